/**
 * Client-side mirror of the session mesh.  The viewer never computes
 * geometry itself: it loads full snapshots and patches them with the
 * epoch-ordered deltas the service sends back.
 */
import type { MeshDeltaBody, MeshLoadedMsg } from "./protocol.js";

export class EpochGapError extends Error {
  constructor(public expected: number, public got: number) {
    super(`delta at epoch ${got}, local mesh at epoch ${expected}`);
  }
}

export class ClientMesh {
  epoch = 0;
  /** xyz triples, one per vertex. */
  positions: Float64Array;
  normals: Float64Array;
  /** vertex-id triples, one per face slot; dead slots stay in place. */
  faces: Int32Array;
  faceAlive: Uint8Array;

  private constructor(positions: Float64Array, normals: Float64Array, faces: Int32Array) {
    this.positions = positions;
    this.normals = normals;
    this.faces = faces;
    this.faceAlive = new Uint8Array(faces.length / 3).fill(1);
  }

  static fromSnapshot(snapshot: MeshLoadedMsg): ClientMesh {
    const mesh = new ClientMesh(
      Float64Array.from(snapshot.positions),
      Float64Array.from(snapshot.normals),
      Int32Array.from(snapshot.all_faces),
    );
    for (const fid of snapshot.dead_face_ids) mesh.faceAlive[fid] = 0;
    mesh.epoch = snapshot.epoch;
    return mesh;
  }

  get vertexCount(): number {
    return this.positions.length / 3;
  }

  get faceSlotCount(): number {
    return this.faces.length / 3;
  }

  get liveFaceCount(): number {
    let n = 0;
    for (const alive of this.faceAlive) n += alive;
    return n;
  }

  /** Live face ids in ascending order. */
  liveFaceIds(): number[] {
    const ids: number[] = [];
    for (let f = 0; f < this.faceAlive.length; f++) {
      if (this.faceAlive[f]) ids.push(f);
    }
    return ids;
  }

  /**
   * Apply one mesh delta.  A delta at epoch n applies to a mesh at epoch n
   * and produces epoch n+1; anything else means the client missed a frame
   * and must resync.
   */
  applyDelta(delta: MeshDeltaBody): void {
    if (delta.epoch !== this.epoch) {
      throw new EpochGapError(this.epoch, delta.epoch);
    }
    for (const fid of delta.removed_face_ids) this.faceAlive[fid] = 0;

    if (delta.added_positions.length) {
      this.positions = appendTriples(this.positions, delta.added_positions, Float64Array);
      this.normals = appendTriples(this.normals, delta.added_normals, Float64Array);
    }
    if (delta.added_faces.length) {
      this.faces = appendTriples(this.faces, delta.added_faces, Int32Array);
      const alive = new Uint8Array(this.faces.length / 3).fill(1);
      alive.set(this.faceAlive, 0);
      this.faceAlive = alive;
    }
    this.epoch += 1;
  }
}

type TypedArrayCtor<T> = { new (length: number): T };

function appendTriples<T extends Float64Array | Int32Array>(
  base: T,
  rows: number[][],
  ctor: TypedArrayCtor<T>,
): T {
  const out = new ctor(base.length + rows.length * 3);
  out.set(base as never, 0);
  let k = base.length;
  for (const row of rows) {
    out[k++] = row[0];
    out[k++] = row[1];
    out[k++] = row[2];
  }
  return out;
}
