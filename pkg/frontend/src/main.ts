// Console entry point: connect, render on animation frames, stream
// keyboard commands at 20 Hz while driving.

import { COMMAND_HZ, InputState } from "./input.js";
import { Session } from "./net.js";
import { makeCommand } from "./protocol.js";
import { ArenaRenderer } from "./render.js";
import { ViewState } from "./state.js";

function serverUrl(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("server") ?? `ws://${window.location.hostname}:8765`;
}

function main(): void {
  const canvas = document.getElementById("arena") as HTMLCanvasElement;
  const banner = document.getElementById("banner") as HTMLDivElement;
  const metricsBox = document.getElementById("metrics") as HTMLDivElement;

  const state = new ViewState();
  const input = new InputState();
  const renderer = new ArenaRenderer(canvas);

  const session = new Session(serverUrl() + "/ws", {
    onMessage: (msg) => {
      if (msg.type === "hello") {
        state.onHello(msg);
        banner.textContent =
          msg.role === "driver"
            ? "connected — you drive the evader (WASD / arrows)"
            : "connected — spectating";
        banner.className = msg.role;
      } else if (msg.type === "frame") {
        state.onFrame(msg);
      } else {
        banner.textContent = `server error: ${msg.message}`;
        banner.className = "error";
      }
    },
    onStatus: (connected) => {
      if (!connected) {
        state.onDisconnect();
        banner.textContent = "disconnected — retrying…";
        banner.className = "disconnected";
        input.clear();
      }
    },
  });
  session.connect();

  const sendCommand = () => {
    if (state.status !== "driver" || state.hello === null) return;
    const v = input.velocity(state.hello.evader_v_max);
    session.send(makeCommand(v, performance.now() / 1000));
  };

  // send immediately on key transitions for low latency, plus a steady
  // 20 Hz stream so the server's staleness cutoff never triggers
  window.addEventListener("keydown", (e) => {
    if (!e.repeat) {
      input.keyDown(e.key);
      sendCommand();
    }
  });
  window.addEventListener("keyup", (e) => {
    input.keyUp(e.key);
    sendCommand();
  });
  window.addEventListener("blur", () => {
    input.clear();
    sendCommand();
  });

  setInterval(sendCommand, 1000 / COMMAND_HZ);

  const drawLoop = () => {
    renderer.draw(state);
    const frame = state.frame;
    if (frame !== null) {
      const est = frame.metrics.pos_error;
      metricsBox.textContent = [
        `t ${frame.t.toFixed(1)} s`,
        `detections ${frame.metrics.detection_count}`,
        `range err ${frame.metrics.range_error.toFixed(2)} m`,
        `observability ${frame.metrics.observability.toFixed(2)}`,
        est === null || est === undefined
          ? "est err —"
          : `est err ${est.toFixed(3)} m`,
      ].join("   ");
    }
    requestAnimationFrame(drawLoop);
  };
  requestAnimationFrame(drawLoop);
}

window.addEventListener("load", main);
