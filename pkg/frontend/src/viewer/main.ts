/**
 * Browser entry point for the tearing sandbox.
 *
 * Left-drag on the mesh tears along the stroke; right-drag orbits; wheel
 * zooms.  Hotkeys: P particles, N neighbor links, B tear boxes, G section
 * grid, C cut along the view plane through the last pick.
 *
 * The page connects to a byte-stream bridge (e.g. `websocat --binary
 * ws-l:0.0.0.0:7071 tcp:127.0.0.1:7070`) in front of `meshtear serve`;
 * everything on the wire is the raw session protocol.
 */
import * as THREE from "three";

import { pickSurface, Ray } from "../pick.js";
import { ScalpelSampleMsg } from "../protocol.js";
import { SessionClient, Transport } from "../session.js";
import { StrokeState } from "../stroke.js";
import { OverlayName, SceneView } from "./scene.js";

/**
 * WebSocket transport that queues inbound bytes; the render loop drains
 * the queue between frames so all state changes happen on frame
 * boundaries (single UI thread, no mid-frame geometry swaps).
 */
class BridgeTransport implements Transport {
  private socket: WebSocket;
  private queue: Uint8Array[] = [];
  private handler: (chunk: Uint8Array) => void = () => {};
  private closeHandler: () => void = () => {};

  constructor(url: string) {
    this.socket = new WebSocket(url);
    this.socket.binaryType = "arraybuffer";
    this.socket.onmessage = (event) => this.queue.push(new Uint8Array(event.data as ArrayBuffer));
    this.socket.onclose = () => this.closeHandler();
  }

  ready(): Promise<void> {
    if (this.socket.readyState === WebSocket.OPEN) return Promise.resolve();
    return new Promise((resolve, reject) => {
      this.socket.onopen = () => resolve();
      this.socket.onerror = () => reject(new Error("bridge connection failed"));
    });
  }

  /** Deliver everything received since the last frame. */
  pump(): void {
    for (const chunk of this.queue.splice(0)) this.handler(chunk);
  }

  send(bytes: Uint8Array): void {
    this.socket.send(bytes);
  }
  onData(handler: (chunk: Uint8Array) => void): void {
    this.handler = handler;
  }
  onClose(handler: () => void): void {
    this.closeHandler = handler;
  }
  close(): void {
    this.socket.close();
  }
}

const HOTKEYS: Record<string, OverlayName> = {
  p: "particles",
  n: "neighborLinks",
  b: "tearBoxes",
  g: "sections",
};

async function start(): Promise<void> {
  const canvas = document.getElementById("viewport") as HTMLCanvasElement;
  const banner = document.getElementById("banner") as HTMLElement;
  const bridgeUrl =
    new URLSearchParams(location.search).get("bridge") ?? "ws://127.0.0.1:7071";

  const transport = new BridgeTransport(bridgeUrl);
  await transport.ready();
  const client = new SessionClient(transport);
  client.onFatal = (reason) => {
    banner.textContent = `session lost: ${reason}`;
    banner.hidden = false;
  };

  const view = new SceneView();
  const camera = new THREE.PerspectiveCamera(50, 1, 0.01, 100);
  camera.position.set(0, 0.8, 3.2);
  const renderer = new THREE.WebGLRenderer({ canvas, antialias: true });

  const strokeSamples: { tip: number[]; end: number[] }[] = [];
  client.onUpdate = (message) => {
    if (message.type === "MeshLoaded" && client.mesh) {
      view.meshView.setMesh(client.mesh);
      view.overlays.setSections(client.mesh);
      strokeSamples.length = 0;
      view.overlays.setTearBoxes(strokeSamples);
    } else if (message.type === "MeshDelta" && client.mesh) {
      for (const delta of message.deltas) view.meshView.applyDelta(client.mesh, delta);
    } else if (message.type === "Error" && message.recoverable) {
      banner.textContent = message.message;
      banner.hidden = false;
      setTimeout(() => (banner.hidden = true), 3000);
    }
    if (client.particles) view.overlays.setParticles(client.particles);
  };

  const response = await fetch("./default.obj");
  await client.loadMesh(await response.text());

  // -- interaction -------------------------------------------------------

  const diag = 2 * camera.position.length();
  const stroke = new StrokeState({
    distanceThreshold: 0.02 * diag,
    bladeLength: 0.5 * diag,
  });

  let orbit = { yaw: 0, pitch: 0.2, radius: 3.3 };
  let lastPick: [number, number, number] | null = null;

  function pointerRay(event: PointerEvent): Ray {
    const rect = canvas.getBoundingClientRect();
    const ndc = new THREE.Vector2(
      ((event.clientX - rect.left) / rect.width) * 2 - 1,
      -((event.clientY - rect.top) / rect.height) * 2 + 1,
    );
    const raycaster = new THREE.Raycaster();
    raycaster.setFromCamera(ndc, camera);
    const { origin, direction } = raycaster.ray;
    return {
      origin: [origin.x, origin.y, origin.z],
      direction: [direction.x, direction.y, direction.z],
    };
  }

  function forward(messages: ScalpelSampleMsg[]): void {
    for (const sample of messages) {
      client.send(sample);
      strokeSamples.push({ tip: sample.tip, end: sample.end });
    }
    if (messages.length) view.overlays.setTearBoxes(strokeSamples);
  }

  canvas.addEventListener("pointerdown", (event) => {
    if (event.button !== 0 || !client.mesh) return;
    const hit = pickSurface(pointerRay(event), client.mesh);
    if (!hit) return;
    lastPick = hit.point;
    forward(stroke.begin(performance.now(), hit.point, pointerRay(event).direction));
  });

  canvas.addEventListener("pointermove", (event) => {
    if (event.buttons & 2) {
      orbit.yaw -= event.movementX * 0.005;
      orbit.pitch = Math.min(1.5, Math.max(-1.5, orbit.pitch + event.movementY * 0.005));
      return;
    }
    if (!(event.buttons & 1) || !stroke.active || !client.mesh) return;
    const ray = pointerRay(event);
    const hit = pickSurface(ray, client.mesh);
    if (hit) forward(stroke.move(performance.now(), hit.point, ray.direction));
  });

  window.addEventListener("pointerup", () => {
    for (const message of stroke.end()) client.send(message);
  });
  canvas.addEventListener("contextmenu", (event) => event.preventDefault());
  canvas.addEventListener("wheel", (event) => {
    orbit.radius = Math.min(20, Math.max(0.5, orbit.radius * (1 + event.deltaY * 1e-3)));
  });

  window.addEventListener("keydown", (event) => {
    const overlay = HOTKEYS[event.key.toLowerCase()];
    if (overlay) {
      view.overlays.toggle(overlay);
    } else if (event.key.toLowerCase() === "c" && lastPick) {
      const n = camera.getWorldDirection(new THREE.Vector3());
      const offset = n.x * lastPick[0] + n.y * lastPick[1] + n.z * lastPick[2];
      client.send({ type: "CutPlane", normal: [n.x, n.y, n.z], offset, keep: "larger" });
    }
  });

  // -- render loop -------------------------------------------------------

  function frame(): void {
    transport.pump(); // network events apply between frames only
    camera.position.set(
      orbit.radius * Math.cos(orbit.pitch) * Math.sin(orbit.yaw),
      orbit.radius * Math.sin(orbit.pitch),
      orbit.radius * Math.cos(orbit.pitch) * Math.cos(orbit.yaw),
    );
    camera.lookAt(0, 0, 0);
    const width = canvas.clientWidth || 800;
    const height = canvas.clientHeight || 600;
    camera.aspect = width / height;
    camera.updateProjectionMatrix();
    renderer.setSize(width, height, false);
    renderer.render(view.scene, camera);
    requestAnimationFrame(frame);
  }
  requestAnimationFrame(frame);
}

start().catch((error) => {
  console.error(error);
  const banner = document.getElementById("banner");
  if (banner) {
    banner.textContent = String(error);
    banner.hidden = false;
  }
});
