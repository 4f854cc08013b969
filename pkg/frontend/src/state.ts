// View state: latest frame, trails, connection status.  Frames may
// arrive out of order after a reconnect; only a newer t is accepted so
// the display never runs backwards.

import { FrameMessage, HelloMessage } from "./protocol.js";

export const TRAIL_LENGTH = 300;

export type ConnectionStatus =
  | "connecting"
  | "driver"
  | "spectator"
  | "disconnected";

export class ViewState {
  hello: HelloMessage | null = null;
  frame: FrameMessage | null = null;
  status: ConnectionStatus = "connecting";
  framesSeen = 0;
  framesDropped = 0;
  trails: Array<Array<[number, number]>> = [];
  targetTrail: Array<[number, number]> = [];
  estimateTrail: Array<[number, number]> = [];

  onHello(hello: HelloMessage): void {
    this.hello = hello;
    this.status = hello.role;
    this.trails = hello.pursuers.map(() => []);
    this.targetTrail = [];
    this.estimateTrail = [];
    this.frame = null;
  }

  /** Ingest a frame; returns false (and drops it) if t is not newer. */
  onFrame(frame: FrameMessage): boolean {
    if (this.frame !== null && frame.t <= this.frame.t) {
      this.framesDropped += 1;
      return false;
    }
    this.frame = frame;
    this.framesSeen += 1;
    frame.pursuers.forEach((agent, i) => {
      pushCapped(this.trails[i] ?? (this.trails[i] = []), agent.p);
    });
    pushCapped(this.targetTrail, frame.target.p);
    if (frame.estimate !== null) {
      pushCapped(this.estimateTrail, [frame.estimate.p[0], frame.estimate.p[1]]);
    }
    return true;
  }

  onDisconnect(): void {
    this.status = "disconnected";
  }
}

function pushCapped(
  trail: Array<[number, number]>,
  point: [number, number],
): void {
  trail.push([point[0], point[1]]);
  if (trail.length > TRAIL_LENGTH) {
    trail.splice(0, trail.length - TRAIL_LENGTH);
  }
}
