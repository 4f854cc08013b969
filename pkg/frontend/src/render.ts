// Canvas 2D rendering of the arena.  World coordinates are meters with
// +y up; the canvas maps the arena square to the viewport at >= 20 px/m.

import { HelloMessage } from "./protocol.js";
import { ViewState } from "./state.js";

const COLORS = ["#d62728", "#2ca02c", "#1f77b4", "#9467bd"];
const TARGET_COLOR = "#ff7f0e";
const ESTIMATE_COLOR = "#111111";

export class ArenaRenderer {
  private ctx: CanvasRenderingContext2D;

  constructor(private canvas: HTMLCanvasElement) {
    const ctx = canvas.getContext("2d");
    if (ctx === null) throw new Error("no 2d context");
    this.ctx = ctx;
  }

  scale(hello: HelloMessage): number {
    const side = Math.min(this.canvas.width, this.canvas.height);
    return side / (2 * hello.arena_half);
  }

  private toCanvas(
    hello: HelloMessage,
    p: [number, number],
  ): [number, number] {
    const s = this.scale(hello);
    return [
      this.canvas.width / 2 + p[0] * s,
      this.canvas.height / 2 - p[1] * s,
    ];
  }

  draw(state: ViewState): void {
    const { ctx, canvas } = this;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    if (state.hello === null) return;
    const hello = state.hello;
    const s = this.scale(hello);

    // arena bounds
    const [x0, y0] = this.toCanvas(hello, [-hello.arena_half, hello.arena_half]);
    ctx.strokeStyle = "#444";
    ctx.lineWidth = 2;
    ctx.strokeRect(x0, y0, 2 * hello.arena_half * s, 2 * hello.arena_half * s);

    const frame = state.frame;
    if (frame === null) return;

    this.drawTrail(hello, state.targetTrail, TARGET_COLOR);
    state.trails.forEach((trail, i) =>
      this.drawTrail(hello, trail, COLORS[i % COLORS.length]),
    );
    this.drawTrail(hello, state.estimateTrail, ESTIMATE_COLOR);

    frame.pursuers.forEach((agent, i) => {
      const color = COLORS[i % COLORS.length];
      this.drawFov(hello, agent.p, agent.theta, agent.detect_flag === 1, color);
      this.drawDisc(hello, agent.p, hello.pursuers[i]?.radius ?? 0.15, color);
      this.drawHeading(hello, agent.p, agent.theta, color);
    });

    this.drawDisc(hello, frame.target.p, hello.target_radius, TARGET_COLOR);

    if (frame.estimate !== null) {
      const est: [number, number] = [frame.estimate.p[0], frame.estimate.p[1]];
      this.drawEstimateMarker(hello, est);
      // ellipse semi-axes: 2x sqrt of the planar covariance diagonal
      const rx = 2 * Math.sqrt(Math.max(frame.estimate.cov_diag[0], 0));
      const ry = 2 * Math.sqrt(Math.max(frame.estimate.cov_diag[1], 0));
      this.drawEllipse(hello, est, rx, ry);
    }
  }

  private drawTrail(
    hello: HelloMessage,
    trail: Array<[number, number]>,
    color: string,
  ): void {
    if (trail.length < 2) return;
    const { ctx } = this;
    for (let i = 1; i < trail.length; i++) {
      const alpha = (i / trail.length) * 0.5;
      const [ax, ay] = this.toCanvas(hello, trail[i - 1]);
      const [bx, by] = this.toCanvas(hello, trail[i]);
      ctx.strokeStyle = color;
      ctx.globalAlpha = alpha;
      ctx.lineWidth = 1;
      ctx.beginPath();
      ctx.moveTo(ax, ay);
      ctx.lineTo(bx, by);
      ctx.stroke();
    }
    ctx.globalAlpha = 1;
  }

  private drawDisc(
    hello: HelloMessage,
    p: [number, number],
    radius: number,
    color: string,
  ): void {
    const { ctx } = this;
    const [cx, cy] = this.toCanvas(hello, p);
    ctx.fillStyle = color;
    ctx.beginPath();
    ctx.arc(cx, cy, radius * this.scale(hello), 0, 2 * Math.PI);
    ctx.fill();
  }

  private drawHeading(
    hello: HelloMessage,
    p: [number, number],
    theta: number,
    color: string,
  ): void {
    const { ctx } = this;
    const len = 0.3;
    const tip: [number, number] = [
      p[0] + len * Math.cos(theta),
      p[1] + len * Math.sin(theta),
    ];
    const [ax, ay] = this.toCanvas(hello, p);
    const [bx, by] = this.toCanvas(hello, tip);
    ctx.strokeStyle = color;
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(ax, ay);
    ctx.lineTo(bx, by);
    ctx.stroke();
  }

  private drawFov(
    hello: HelloMessage,
    p: [number, number],
    theta: number,
    detecting: boolean,
    color: string,
  ): void {
    const { ctx } = this;
    const [cx, cy] = this.toCanvas(hello, p);
    const range = 1.2 * this.scale(hello);
    const half = hello.fov / 2;
    ctx.fillStyle = color;
    ctx.globalAlpha = detecting ? 0.35 : 0.08;
    ctx.beginPath();
    ctx.moveTo(cx, cy);
    // canvas y is flipped, so angles negate
    ctx.arc(cx, cy, range, -(theta + half), -(theta - half));
    ctx.closePath();
    ctx.fill();
    ctx.globalAlpha = 1;
  }

  private drawEstimateMarker(hello: HelloMessage, p: [number, number]): void {
    const { ctx } = this;
    const [cx, cy] = this.toCanvas(hello, p);
    const r = 6;
    ctx.strokeStyle = ESTIMATE_COLOR;
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.moveTo(cx - r, cy);
    ctx.lineTo(cx + r, cy);
    ctx.moveTo(cx, cy - r);
    ctx.lineTo(cx, cy + r);
    ctx.stroke();
    ctx.beginPath();
    ctx.arc(cx, cy, r * 0.7, 0, 2 * Math.PI);
    ctx.stroke();
  }

  private drawEllipse(
    hello: HelloMessage,
    center: [number, number],
    rx: number,
    ry: number,
  ): void {
    const { ctx } = this;
    const [cx, cy] = this.toCanvas(hello, center);
    const s = this.scale(hello);
    ctx.strokeStyle = ESTIMATE_COLOR;
    ctx.globalAlpha = 0.6;
    ctx.lineWidth = 1;
    ctx.beginPath();
    ctx.ellipse(cx, cy, Math.max(rx * s, 1), Math.max(ry * s, 1), 0, 0, 2 * Math.PI);
    ctx.stroke();
    ctx.globalAlpha = 1;
  }
}
