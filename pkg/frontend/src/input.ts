// Keyboard state to evader velocity commands.  WASD / arrow keys map to
// world axes (W = +y); simultaneous keys are normalized so the command
// magnitude never exceeds the evader bound.

export class InputState {
  private held = new Set<string>();

  keyDown(key: string): void {
    this.held.add(normalizeKey(key));
  }

  keyUp(key: string): void {
    this.held.delete(normalizeKey(key));
  }

  clear(): void {
    this.held.clear();
  }

  /** Commanded world-frame velocity for the given speed bound. */
  velocity(bound: number): [number, number] {
    let x = 0;
    let y = 0;
    if (this.held.has("w")) y += 1;
    if (this.held.has("s")) y -= 1;
    if (this.held.has("d")) x += 1;
    if (this.held.has("a")) x -= 1;
    const norm = Math.hypot(x, y);
    if (norm === 0) return [0, 0];
    const scale = bound / Math.max(norm, 1);
    return [x * scale, y * scale];
  }

  get active(): boolean {
    return this.held.size > 0;
  }
}

function normalizeKey(key: string): string {
  switch (key) {
    case "ArrowUp":
      return "w";
    case "ArrowDown":
      return "s";
    case "ArrowLeft":
      return "a";
    case "ArrowRight":
      return "d";
    default:
      return key.toLowerCase();
  }
}

export const COMMAND_HZ = 20;
