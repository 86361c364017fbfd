/**
 * Surface picking: nearest ray-triangle hit among live faces.  Plain
 * Möller–Trumbore over the client mesh buffers — meshes stay small enough
 * that a linear scan beats maintaining an acceleration structure across
 * every delta.
 */
import type { ClientMesh } from "./mesh.js";

export interface Ray {
  origin: [number, number, number];
  direction: [number, number, number];
}

export interface SurfaceHit {
  point: [number, number, number];
  faceId: number;
  t: number;
}

const EPS = 1e-12;

export function pickSurface(ray: Ray, mesh: ClientMesh): SurfaceHit | null {
  const [ox, oy, oz] = ray.origin;
  const [dx, dy, dz] = ray.direction;
  const pos = mesh.positions;
  const faces = mesh.faces;

  let best: SurfaceHit | null = null;
  for (let f = 0; f < mesh.faceAlive.length; f++) {
    if (!mesh.faceAlive[f]) continue;
    const a = faces[f * 3] * 3;
    const b = faces[f * 3 + 1] * 3;
    const c = faces[f * 3 + 2] * 3;

    const e1x = pos[b] - pos[a], e1y = pos[b + 1] - pos[a + 1], e1z = pos[b + 2] - pos[a + 2];
    const e2x = pos[c] - pos[a], e2y = pos[c + 1] - pos[a + 1], e2z = pos[c + 2] - pos[a + 2];

    // p = direction × e2
    const px = dy * e2z - dz * e2y;
    const py = dz * e2x - dx * e2z;
    const pz = dx * e2y - dy * e2x;
    const det = e1x * px + e1y * py + e1z * pz;
    if (Math.abs(det) < EPS) continue;

    const inv = 1 / det;
    const tx = ox - pos[a], ty = oy - pos[a + 1], tz = oz - pos[a + 2];
    const u = (tx * px + ty * py + tz * pz) * inv;
    if (u < 0 || u > 1) continue;

    // q = t × e1
    const qx = ty * e1z - tz * e1y;
    const qy = tz * e1x - tx * e1z;
    const qz = tx * e1y - ty * e1x;
    const v = (dx * qx + dy * qy + dz * qz) * inv;
    if (v < 0 || u + v > 1) continue;

    const t = (e2x * qx + e2y * qy + e2z * qz) * inv;
    if (t < EPS) continue;

    if (best === null || t < best.t) {
      best = {
        t,
        faceId: f,
        point: [ox + t * dx, oy + t * dy, oz + t * dz],
      };
    }
  }
  return best;
}
