/**
 * Wire protocol shared with the session service: 4-byte big-endian payload
 * length followed by one UTF-8 JSON object.  See ../../docs/protocol.md.
 */

export const PROTOCOL_VERSION = 1;
export const MAX_FRAME = 256 * 1024 * 1024;

export interface MeshDeltaBody {
  epoch: number;
  added_positions: number[][];
  added_normals: number[][];
  added_uvs: number[][];
  provenance: [number, number[]][];
  removed_face_ids: number[];
  added_faces: number[][];
  added_skin?: [number, number][][];
}

export interface MeshLoadedMsg {
  type: "MeshLoaded";
  version: number;
  epoch: number;
  vertices: number;
  faces: number;
  positions: number[];
  normals: number[];
  all_faces: number[];
  dead_face_ids: number[];
  hash: string;
  particles: {
    centers: number[];
    anchors: number[];
    neighbors: [number, number][];
  };
  cut?: {
    kept: string;
    intersection_points: number;
    positive_area: number;
    negative_area: number;
  };
}

export interface MeshDeltaMsg {
  type: "MeshDelta";
  segment: number;
  epoch_before: number;
  epoch_after: number;
  deltas: MeshDeltaBody[];
  hash: string;
  elapsed_ms: number;
}

export interface ParticleFrameMsg {
  type: "ParticleFrame";
  epoch: number;
  centers: number[];
  vertex_ids: number[];
  positions: number[];
}

export interface ErrorMsg {
  type: "Error";
  recoverable: boolean;
  message: string;
  segment?: number;
}

export type ServerMessage = MeshLoadedMsg | MeshDeltaMsg | ParticleFrameMsg | ErrorMsg;

export interface ScalpelSampleMsg {
  type: "ScalpelSample";
  t_ms: number;
  tip: [number, number, number];
  end: [number, number, number];
}

export type ClientMessage =
  | { type: "LoadMesh"; obj?: string; sidecar?: unknown }
  | { type: "SetParams"; [key: string]: unknown }
  | ScalpelSampleMsg
  | { type: "EndStroke" }
  | { type: "CutPlane"; normal?: number[]; offset?: number; samples?: number[][]; keep?: string }
  | { type: "StepSim"; steps?: number; dt?: number }
  | { type: "ApplyForce"; particle?: number; force?: number[]; clear?: boolean };

export function encodeFrame(message: ClientMessage | ServerMessage): Uint8Array {
  const payload = new TextEncoder().encode(JSON.stringify(message));
  const frame = new Uint8Array(4 + payload.length);
  new DataView(frame.buffer).setUint32(0, payload.length, false);
  frame.set(payload, 4);
  return frame;
}

/**
 * Incremental frame decoder: feed it arbitrary byte chunks, get whole JSON
 * messages out.  The TCP stream gives no message boundaries, so partial and
 * coalesced frames are the normal case.
 */
export class FrameDecoder {
  private buffer = new Uint8Array(0);

  feed(chunk: Uint8Array): ServerMessage[] {
    const merged = new Uint8Array(this.buffer.length + chunk.length);
    merged.set(this.buffer, 0);
    merged.set(chunk, this.buffer.length);
    this.buffer = merged;

    const messages: ServerMessage[] = [];
    for (;;) {
      if (this.buffer.length < 4) break;
      const view = new DataView(this.buffer.buffer, this.buffer.byteOffset);
      const length = view.getUint32(0, false);
      if (length > MAX_FRAME) {
        throw new Error(`frame of ${length} bytes exceeds limit`);
      }
      if (this.buffer.length < 4 + length) break;
      const payload = this.buffer.subarray(4, 4 + length);
      messages.push(JSON.parse(new TextDecoder().decode(payload)));
      this.buffer = this.buffer.slice(4 + length);
    }
    return messages;
  }
}
