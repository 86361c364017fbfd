/**
 * Canonical mesh digest, byte-for-byte compatible with the service:
 * sha256 over live faces (ascending id, int32 LE triples) then the
 * positions of every used vertex (ascending id, float64 LE triples).
 */
import { createHash } from "node:crypto";

import type { ClientMesh } from "./mesh.js";

export function canonicalMeshHash(mesh: ClientMesh): string {
  const liveIds = mesh.liveFaceIds();

  const faceBytes = new ArrayBuffer(liveIds.length * 12);
  const faceView = new DataView(faceBytes);
  const used = new Set<number>();
  let offset = 0;
  for (const fid of liveIds) {
    for (let c = 0; c < 3; c++) {
      const vid = mesh.faces[fid * 3 + c];
      faceView.setInt32(offset, vid, true);
      offset += 4;
      used.add(vid);
    }
  }

  const usedIds = Array.from(used).sort((a, b) => a - b);
  const posBytes = new ArrayBuffer(usedIds.length * 24);
  const posView = new DataView(posBytes);
  offset = 0;
  for (const vid of usedIds) {
    for (let c = 0; c < 3; c++) {
      posView.setFloat64(offset, mesh.positions[vid * 3 + c], true);
      offset += 8;
    }
  }

  const h = createHash("sha256");
  h.update(new Uint8Array(faceBytes));
  h.update(new Uint8Array(posBytes));
  return h.digest("hex");
}
