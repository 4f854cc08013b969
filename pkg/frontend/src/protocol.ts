// Wire protocol shared with the live bridge (schema_version 1).

export const SCHEMA_VERSION = 1;

export interface PursuerSpec {
  mode: string;
  radius: number;
}

export interface HelloMessage {
  type: "hello";
  schema_version: number;
  role: "driver" | "spectator";
  arena_half: number;
  r_d: number;
  decision_hz: number;
  fov: number;
  evader_v_max: number;
  pursuers: PursuerSpec[];
  target_radius: number;
}

export interface PursuerFrame {
  p: [number, number];
  v: [number, number];
  theta: number;
  detect_flag: number;
}

export interface EstimateFrame {
  p: [number, number, number];
  v: [number, number, number];
  cov_diag: number[];
}

export interface FrameMessage {
  type: "frame";
  schema_version: number;
  t: number;
  pursuers: PursuerFrame[];
  target: { p: [number, number]; v: [number, number] };
  estimate: EstimateFrame | null;
  metrics: {
    range_error: number;
    observability: number;
    detection_count: number;
    pos_error?: number | null;
  };
}

export interface ErrorMessage {
  type: "error";
  schema_version: number;
  message: string;
}

export type ServerMessage = HelloMessage | FrameMessage | ErrorMessage;

export interface CommandMessage {
  schema_version: number;
  v_cmd: [number, number];
  client_time: number;
}

export function parseServerMessage(raw: string): ServerMessage | null {
  let obj: unknown;
  try {
    obj = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof obj !== "object" || obj === null) return null;
  const msg = obj as { type?: unknown };
  if (msg.type === "hello" || msg.type === "frame" || msg.type === "error") {
    return obj as ServerMessage;
  }
  return null;
}

export function makeCommand(
  vCmd: [number, number],
  clientTime: number,
): CommandMessage {
  return {
    schema_version: SCHEMA_VERSION,
    v_cmd: vCmd,
    client_time: clientTime,
  };
}
