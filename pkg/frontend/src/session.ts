/**
 * Session client: owns the connection, keeps the local mesh mirror in
 * sync, and exposes awaitable server messages.  All geometry mutation
 * happens server-side; this class only applies what it is told.
 */
import { ClientMesh, EpochGapError } from "./mesh.js";
import {
  ClientMessage,
  FrameDecoder,
  MeshDeltaMsg,
  MeshLoadedMsg,
  ParticleFrameMsg,
  ServerMessage,
  encodeFrame,
} from "./protocol.js";

/** Byte-stream transport; TCP in tests/tools, a socket bridge in the browser. */
export interface Transport {
  send(bytes: Uint8Array): void;
  onData(handler: (chunk: Uint8Array) => void): void;
  onClose(handler: () => void): void;
  close(): void;
}

export interface ParticleState {
  centers: number[];
  neighbors: [number, number][];
}

export class SessionClient {
  mesh: ClientMesh | null = null;
  particles: ParticleState | null = null;
  lastFrame: ParticleFrameMsg | null = null;
  lastServerHash = "";
  closed = false;

  /** Called after every applied mutation so the renderer can repaint. */
  onUpdate: (message: ServerMessage) => void = () => {};
  /** Non-recoverable protocol errors and connection loss. */
  onFatal: (reason: string) => void = () => {};

  private decoder = new FrameDecoder();
  private inbox: ServerMessage[] = [];
  private waiters: ((message: ServerMessage) => void)[] = [];

  constructor(private transport: Transport) {
    transport.onData((chunk) => {
      for (const message of this.decoder.feed(chunk)) this.dispatch(message);
    });
    transport.onClose(() => {
      this.closed = true;
      this.onFatal("connection closed");
      // Wake pending waiters so callers do not hang forever.
      for (const waiter of this.waiters.splice(0)) {
        waiter({ type: "Error", recoverable: false, message: "connection closed" });
      }
    });
  }

  send(message: ClientMessage): void {
    this.transport.send(encodeFrame(message));
  }

  close(): void {
    this.transport.close();
  }

  /** Next server message, in arrival order. */
  next(): Promise<ServerMessage> {
    const queued = this.inbox.shift();
    if (queued !== undefined) return Promise.resolve(queued);
    return new Promise((resolve) => this.waiters.push(resolve));
  }

  /** Await messages until one of the given type arrives. */
  async nextOfType<T extends ServerMessage["type"]>(
    type: T,
  ): Promise<Extract<ServerMessage, { type: T }>> {
    for (;;) {
      const message = await this.next();
      if (message.type === type) {
        return message as Extract<ServerMessage, { type: T }>;
      }
      if (message.type === "Error" && !message.recoverable) {
        throw new Error(`fatal server error: ${message.message}`);
      }
    }
  }

  async loadMesh(obj: string, sidecar?: unknown): Promise<MeshLoadedMsg> {
    this.send(sidecar === undefined ? { type: "LoadMesh", obj } : { type: "LoadMesh", obj, sidecar });
    return this.nextOfType("MeshLoaded");
  }

  /** Payload-less LoadMesh: ask the server for a full-state snapshot. */
  async resync(): Promise<MeshLoadedMsg> {
    this.send({ type: "LoadMesh" });
    return this.nextOfType("MeshLoaded");
  }

  private dispatch(message: ServerMessage): void {
    this.applyStateChange(message);
    this.onUpdate(message);
    const waiter = this.waiters.shift();
    if (waiter) waiter(message);
    else this.inbox.push(message);
  }

  private applyStateChange(message: ServerMessage): void {
    switch (message.type) {
      case "MeshLoaded":
        this.adoptSnapshot(message);
        break;
      case "MeshDelta":
        this.applyMeshDelta(message);
        break;
      case "ParticleFrame":
        this.lastFrame = message;
        if (this.particles) this.particles.centers = message.centers;
        break;
      case "Error":
        if (!message.recoverable) this.onFatal(message.message);
        break;
    }
  }

  private adoptSnapshot(snapshot: MeshLoadedMsg): void {
    this.mesh = ClientMesh.fromSnapshot(snapshot);
    this.particles = {
      centers: snapshot.particles.centers,
      neighbors: snapshot.particles.neighbors,
    };
    this.lastServerHash = snapshot.hash;
  }

  private applyMeshDelta(message: MeshDeltaMsg): void {
    if (this.mesh === null) return;
    try {
      for (const delta of message.deltas) this.mesh.applyDelta(delta);
      this.lastServerHash = message.hash;
    } catch (error) {
      if (error instanceof EpochGapError) {
        // Missed an update: drop local state and ask for a snapshot.  The
        // MeshLoaded reply re-enters through dispatch like any message.
        this.mesh = null;
        this.send({ type: "LoadMesh" });
        return;
      }
      throw error;
    }
  }
}

/** TCP transport over node:net; loaded lazily so browser bundles skip it. */
export async function connectTcp(host: string, port: number): Promise<Transport> {
  const net = await import("node:net");
  const socket: import("node:net").Socket = await new Promise((resolve, reject) => {
    const s = net.createConnection({ host, port, noDelay: true }, () => resolve(s));
    s.once("error", reject);
  });
  return {
    send: (bytes) => socket.write(bytes),
    onData: (handler) => socket.on("data", (chunk: Buffer) => handler(new Uint8Array(chunk))),
    onClose: (handler) => socket.on("close", handler),
    close: () => socket.destroy(),
  };
}
