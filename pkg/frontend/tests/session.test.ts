import { describe, expect, it } from "vitest";

import {
  ClientMessage,
  FrameDecoder,
  ServerMessage,
  encodeFrame,
} from "../src/protocol.js";
import { SessionClient, Transport } from "../src/session.js";
import { emptyDelta, snapshot, QUAD } from "./helpers.js";

/** In-memory transport: records client sends, scripts server pushes. */
class FakeTransport implements Transport {
  sent: ClientMessage[] = [];
  closedByClient = false;
  private decoder = new FrameDecoder();
  private handler: (chunk: Uint8Array) => void = () => {};
  private closeHandler: () => void = () => {};

  send(bytes: Uint8Array): void {
    // Decode with the same framing code; good enough for a loopback.
    this.sent.push(...(this.decoder.feed(bytes) as unknown as ClientMessage[]));
  }
  onData(handler: (chunk: Uint8Array) => void): void {
    this.handler = handler;
  }
  onClose(handler: () => void): void {
    this.closeHandler = handler;
  }
  close(): void {
    this.closedByClient = true;
  }

  push(message: ServerMessage): void {
    this.handler(encodeFrame(message));
  }
  dropConnection(): void {
    this.closeHandler();
  }
}

function delta(epoch: number, overrides: Partial<ReturnType<typeof emptyDelta>> = {}) {
  return { ...emptyDelta(epoch), ...overrides };
}

function meshDelta(segment: number, deltas: ReturnType<typeof emptyDelta>[]): ServerMessage {
  return {
    type: "MeshDelta",
    segment,
    epoch_before: deltas[0]?.epoch ?? 0,
    epoch_after: (deltas[0]?.epoch ?? 0) + deltas.length,
    deltas,
    hash: "h",
    elapsed_ms: 1,
  };
}

describe("session client", () => {
  it("adopts a MeshLoaded snapshot", () => {
    const transport = new FakeTransport();
    const client = new SessionClient(transport);
    transport.push(snapshot(QUAD.positions, QUAD.faces));
    expect(client.mesh!.vertexCount).toBe(4);
    expect(client.mesh!.epoch).toBe(0);
    expect(client.particles).not.toBeNull();
  });

  it("applies in-order deltas and tracks the server hash", () => {
    const transport = new FakeTransport();
    const client = new SessionClient(transport);
    transport.push(snapshot(QUAD.positions, QUAD.faces));
    transport.push(meshDelta(0, [delta(0, { removed_face_ids: [0] }), delta(1)]));
    expect(client.mesh!.epoch).toBe(2);
    expect(client.mesh!.liveFaceCount).toBe(1);
    expect(client.lastServerHash).toBe("h");
  });

  it("requests a resync on an epoch gap instead of applying", () => {
    const transport = new FakeTransport();
    const client = new SessionClient(transport);
    transport.push(snapshot(QUAD.positions, QUAD.faces));
    transport.push(meshDelta(1, [delta(5, { removed_face_ids: [0] })])); // gap
    expect(client.mesh).toBeNull();
    expect(transport.sent).toEqual([{ type: "LoadMesh" } as ClientMessage]);
    // The server answers the resync with a fresh snapshot.
    const fresh = snapshot(QUAD.positions, QUAD.faces);
    fresh.epoch = 6;
    transport.push(fresh);
    expect(client.mesh!.epoch).toBe(6);
    expect(client.mesh!.liveFaceCount).toBe(2);
  });

  it("nextOfType skips unrelated messages", async () => {
    const transport = new FakeTransport();
    const client = new SessionClient(transport);
    transport.push(snapshot(QUAD.positions, QUAD.faces));
    transport.push({ type: "ParticleFrame", epoch: 0, centers: [], vertex_ids: [], positions: [] });
    transport.push(meshDelta(0, [delta(0)]));
    const message = await client.nextOfType("MeshDelta");
    expect(message.segment).toBe(0);
  });

  it("ParticleFrame refreshes overlay centers", () => {
    const transport = new FakeTransport();
    const client = new SessionClient(transport);
    transport.push(snapshot(QUAD.positions, QUAD.faces));
    transport.push({
      type: "ParticleFrame",
      epoch: 0,
      centers: [1, 2, 3],
      vertex_ids: [0],
      positions: [0, 0, 0],
    });
    expect(client.particles!.centers).toEqual([1, 2, 3]);
    expect(client.lastFrame!.vertex_ids).toEqual([0]);
  });

  it("connection loss reports fatal and unblocks waiters", async () => {
    const transport = new FakeTransport();
    const client = new SessionClient(transport);
    let fatal = "";
    client.onFatal = (reason) => (fatal = reason);
    const pending = client.next();
    transport.dropConnection();
    const message = await pending;
    expect(message.type).toBe("Error");
    expect(fatal).toBe("connection closed");
    expect(client.closed).toBe(true);
  });

  it("notifies onUpdate for every server message", () => {
    const transport = new FakeTransport();
    const client = new SessionClient(transport);
    const seen: string[] = [];
    client.onUpdate = (message) => seen.push(message.type);
    transport.push(snapshot(QUAD.positions, QUAD.faces));
    transport.push(meshDelta(0, [delta(0)]));
    expect(seen).toEqual(["MeshLoaded", "MeshDelta"]);
  });
});
