import { describe, expect, it } from "vitest";

import { FrameDecoder, ServerMessage, encodeFrame } from "../src/protocol.js";

const frame = (message: object): Uint8Array => encodeFrame(message as ServerMessage);

describe("frame encoding", () => {
  it("prefixes the payload with a 4-byte big-endian length", () => {
    const bytes = frame({ type: "EndStroke" });
    const length = new DataView(bytes.buffer).getUint32(0, false);
    expect(length).toBe(bytes.length - 4);
    expect(JSON.parse(new TextDecoder().decode(bytes.subarray(4)))).toEqual({
      type: "EndStroke",
    });
  });

  it("round-trips unicode payloads", () => {
    const message = { type: "Error", recoverable: true, message: "ε-band ✂" };
    const decoder = new FrameDecoder();
    expect(decoder.feed(frame(message))).toEqual([message]);
  });
});

describe("frame decoding", () => {
  it("reassembles a frame fed one byte at a time", () => {
    const bytes = frame({ type: "ParticleFrame", epoch: 3 });
    const decoder = new FrameDecoder();
    const out: ServerMessage[] = [];
    for (const byte of bytes) out.push(...decoder.feed(Uint8Array.of(byte)));
    expect(out).toEqual([{ type: "ParticleFrame", epoch: 3 }]);
  });

  it("splits coalesced frames", () => {
    const a = frame({ type: "MeshDelta", segment: 0 });
    const b = frame({ type: "MeshDelta", segment: 1 });
    const merged = new Uint8Array(a.length + b.length);
    merged.set(a, 0);
    merged.set(b, a.length);
    const out = new FrameDecoder().feed(merged);
    expect(out.map((m) => (m as { segment: number }).segment)).toEqual([0, 1]);
  });

  it("keeps a partial tail frame pending", () => {
    const a = frame({ type: "EndStroke" });
    const b = frame({ type: "LoadMesh" });
    const decoder = new FrameDecoder();
    const merged = new Uint8Array(a.length + 3);
    merged.set(a, 0);
    merged.set(b.subarray(0, 3), a.length);
    expect(decoder.feed(merged)).toHaveLength(1);
    expect(decoder.feed(b.subarray(3))).toEqual([{ type: "LoadMesh" }]);
  });

  it("rejects frames over the size limit", () => {
    const header = new Uint8Array(4);
    new DataView(header.buffer).setUint32(0, 0xffffffff, false);
    expect(() => new FrameDecoder().feed(header)).toThrow(/exceeds limit/);
  });
});
