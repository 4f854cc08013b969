import { describe, expect, it } from "vitest";

import { InputState } from "../src/input.js";

describe("InputState.velocity", () => {
  it("is zero with no keys held", () => {
    expect(new InputState().velocity(1.0)).toEqual([0, 0]);
  });

  it("maps W to +y scaled to the bound", () => {
    const input = new InputState();
    input.keyDown("w");
    expect(input.velocity(0.8)).toEqual([0, 0.8]);
  });

  it("maps arrow keys like WASD", () => {
    const input = new InputState();
    input.keyDown("ArrowUp");
    expect(input.velocity(1.0)).toEqual([0, 1.0]);
    input.keyUp("ArrowUp");
    input.keyDown("ArrowLeft");
    expect(input.velocity(1.0)).toEqual([-1.0, 0]);
  });

  it("normalizes diagonals to the bound", () => {
    const input = new InputState();
    input.keyDown("w");
    input.keyDown("d");
    const [x, y] = input.velocity(1.0);
    expect(Math.hypot(x, y)).toBeCloseTo(1.0, 10);
    expect(x).toBeGreaterThan(0);
    expect(y).toBeGreaterThan(0);
  });

  it("opposite keys cancel", () => {
    const input = new InputState();
    input.keyDown("w");
    input.keyDown("s");
    expect(input.velocity(1.0)).toEqual([0, 0]);
  });

  it("release returns to zero", () => {
    const input = new InputState();
    input.keyDown("d");
    input.keyUp("d");
    expect(input.velocity(1.0)).toEqual([0, 0]);
  });

  it("clear drops everything (window blur)", () => {
    const input = new InputState();
    input.keyDown("w");
    input.keyDown("d");
    input.clear();
    expect(input.velocity(1.0)).toEqual([0, 0]);
  });

  it("magnitude never exceeds the bound", () => {
    const input = new InputState();
    for (const key of ["w", "a", "s", "d"]) input.keyDown(key);
    const [x, y] = input.velocity(0.7);
    expect(Math.hypot(x, y)).toBeLessThanOrEqual(0.7 + 1e-12);
  });
});
