import { describe, expect, it } from "vitest";

import { FrameMessage, HelloMessage } from "../src/protocol.js";
import { TRAIL_LENGTH, ViewState } from "../src/state.js";

function hello(): HelloMessage {
  return {
    type: "hello",
    schema_version: 1,
    role: "driver",
    arena_half: 2.5,
    r_d: 0.75,
    decision_hz: 10,
    fov: 0.5236,
    evader_v_max: 1.0,
    pursuers: [
      { mode: "omni", radius: 0.15 },
      { mode: "unicycle", radius: 0.15 },
    ],
    target_radius: 0.15,
  };
}

function frame(t: number, x = 0): FrameMessage {
  return {
    type: "frame",
    schema_version: 1,
    t,
    pursuers: [
      { p: [x, 0], v: [0, 0], theta: 0, detect_flag: 0 },
      { p: [0, x], v: [0, 0], theta: 1, detect_flag: 1 },
    ],
    target: { p: [1, 1], v: [0, 0] },
    estimate: { p: [1, 1, 0], v: [0, 0, 0], cov_diag: [1, 1, 1, 1, 1, 1] },
    metrics: { range_error: 0.1, observability: 1.0, detection_count: 1 },
  };
}

describe("ViewState", () => {
  it("tracks the driver role from hello", () => {
    const state = new ViewState();
    state.onHello(hello());
    expect(state.status).toBe("driver");
    expect(state.trails.length).toBe(2);
  });

  it("accepts only strictly newer frames", () => {
    const state = new ViewState();
    state.onHello(hello());
    expect(state.onFrame(frame(1.0))).toBe(true);
    expect(state.onFrame(frame(2.0))).toBe(true);
    expect(state.onFrame(frame(1.5))).toBe(false); // stale: dropped
    expect(state.onFrame(frame(2.0))).toBe(false); // duplicate: dropped
    expect(state.frame!.t).toBe(2.0);
    expect(state.framesDropped).toBe(2);
  });

  it("caps trails at the configured length", () => {
    const state = new ViewState();
    state.onHello(hello());
    for (let k = 0; k < TRAIL_LENGTH + 50; k++) {
      state.onFrame(frame(k * 0.1, k));
    }
    expect(state.trails[0].length).toBe(TRAIL_LENGTH);
    expect(state.targetTrail.length).toBe(TRAIL_LENGTH);
    // oldest points dropped: the first trail x must be > 0
    expect(state.trails[0][0][0]).toBeGreaterThan(0);
  });

  it("skips the estimate trail when the estimate is null", () => {
    const state = new ViewState();
    state.onHello(hello());
    const f = frame(1.0);
    f.estimate = null;
    state.onFrame(f);
    expect(state.estimateTrail.length).toBe(0);
  });

  it("marks disconnect", () => {
    const state = new ViewState();
    state.onHello(hello());
    state.onDisconnect();
    expect(state.status).toBe("disconnected");
  });
});
