// Websocket session with automatic reconnect.  Drops are surfaced
// through the callbacks; retries back off from 0.5 s to 4 s.

import { parseServerMessage, ServerMessage } from "./protocol.js";

export interface SessionCallbacks {
  onMessage: (msg: ServerMessage) => void;
  onStatus: (connected: boolean) => void;
}

export const BACKOFF_START_MS = 500;
// capped low so a server restart is picked up well inside 5 s
export const BACKOFF_MAX_MS = 1500;

export function nextBackoff(current: number): number {
  return Math.min(current * 2, BACKOFF_MAX_MS);
}

type SocketFactory = (url: string) => WebSocket;

export class Session {
  private socket: WebSocket | null = null;
  private backoffMs = BACKOFF_START_MS;
  private closed = false;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private url: string,
    private callbacks: SessionCallbacks,
    private socketFactory: SocketFactory = (u) => new WebSocket(u),
  ) {}

  connect(): void {
    if (this.closed) return;
    let socket: WebSocket;
    try {
      socket = this.socketFactory(this.url);
    } catch {
      this.scheduleReconnect();
      return;
    }
    this.socket = socket;
    socket.onopen = () => {
      this.backoffMs = BACKOFF_START_MS;
      this.callbacks.onStatus(true);
    };
    socket.onmessage = (event: MessageEvent) => {
      const msg = parseServerMessage(String(event.data));
      if (msg !== null) this.callbacks.onMessage(msg);
    };
    socket.onclose = () => {
      this.callbacks.onStatus(false);
      this.scheduleReconnect();
    };
    socket.onerror = () => {
      // onclose follows; nothing else to do
    };
  }

  send(payload: unknown): boolean {
    if (this.socket !== null && this.socket.readyState === 1 /* OPEN */) {
      this.socket.send(JSON.stringify(payload));
      return true;
    }
    return false;
  }

  private scheduleReconnect(): void {
    if (this.closed || this.timer !== null) return;
    this.timer = setTimeout(() => {
      this.timer = null;
      this.connect();
    }, this.backoffMs);
    this.backoffMs = nextBackoff(this.backoffMs);
  }

  close(): void {
    this.closed = true;
    if (this.timer !== null) clearTimeout(this.timer);
    this.socket?.close();
  }
}
