import { ClientMesh } from "../src/mesh.js";
import { MeshDeltaBody, MeshLoadedMsg } from "../src/protocol.js";

/** Minimal MeshLoaded snapshot from flat arrays. */
export function snapshot(
  positions: number[],
  faces: number[],
  deadFaceIds: number[] = [],
): MeshLoadedMsg {
  const vertices = positions.length / 3;
  return {
    type: "MeshLoaded",
    version: 1,
    epoch: 0,
    vertices,
    faces: faces.length / 3 - deadFaceIds.length,
    positions,
    normals: positions.map((_, i) => (i % 3 === 2 ? 1 : 0)),
    all_faces: faces,
    dead_face_ids: deadFaceIds,
    hash: "",
    particles: { centers: [], anchors: [], neighbors: [] },
  };
}

export function meshOf(
  positions: number[],
  faces: number[],
  deadFaceIds: number[] = [],
): ClientMesh {
  return ClientMesh.fromSnapshot(snapshot(positions, faces, deadFaceIds));
}

export function emptyDelta(epoch: number): MeshDeltaBody {
  return {
    epoch,
    added_positions: [],
    added_normals: [],
    added_uvs: [],
    provenance: [],
    removed_face_ids: [],
    added_faces: [],
  };
}

/** Two triangles sharing an edge, in the z=0 plane. */
export const QUAD = {
  positions: [0, 0, 0, 1, 0, 0, 1, 1, 0, 0, 1, 0],
  faces: [0, 1, 2, 0, 2, 3],
};

/** Deterministic 32-bit LCG, enough for test geometry. */
export function rng(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state * 1664525 + 1013904223) >>> 0;
    return state / 0x100000000;
  };
}
