/**
 * three.js scene state for the tearing sandbox.  Geometry buffers are
 * preallocated with slack and patched in place from deltas — dead faces
 * are degenerated, new vertices/faces land past the old end — so a tear
 * never forces a full re-upload of the mesh.
 */
import * as THREE from "three";

import type { ClientMesh } from "../mesh.js";
import type { MeshDeltaBody } from "../protocol.js";
import type { ParticleState } from "../session.js";

export type OverlayName = "particles" | "neighborLinks" | "tearBoxes" | "sections";

const GROWTH = 1.5;

export class MeshView {
  readonly object: THREE.Mesh;
  private geometry = new THREE.BufferGeometry();
  private vertexCapacity = 0;
  private faceCapacity = 0;
  private vertexCount = 0;
  private faceCount = 0;

  constructor() {
    this.object = new THREE.Mesh(
      this.geometry,
      new THREE.MeshStandardMaterial({
        color: 0xb87a6f,
        flatShading: true,
        side: THREE.DoubleSide,
      }),
    );
  }

  /** Full upload: snapshot adoption (initial load, cut, resync). */
  setMesh(mesh: ClientMesh): void {
    this.vertexCount = mesh.vertexCount;
    this.faceCount = mesh.faceSlotCount;
    this.vertexCapacity = Math.ceil(this.vertexCount * GROWTH);
    this.faceCapacity = Math.ceil(this.faceCount * GROWTH);

    const positions = new Float32Array(this.vertexCapacity * 3);
    positions.set(Float32Array.from(mesh.positions), 0);
    const normals = new Float32Array(this.vertexCapacity * 3);
    normals.set(Float32Array.from(mesh.normals), 0);
    const index = new Uint32Array(this.faceCapacity * 3);
    index.set(Uint32Array.from(mesh.faces), 0);
    for (let f = 0; f < this.faceCount; f++) {
      if (!mesh.faceAlive[f]) this.degenerateFace(index, f);
    }

    this.geometry.dispose();
    this.geometry = new THREE.BufferGeometry();
    this.geometry.setAttribute("position", new THREE.BufferAttribute(positions, 3));
    this.geometry.setAttribute("normal", new THREE.BufferAttribute(normals, 3));
    this.geometry.setIndex(new THREE.BufferAttribute(index, 1));
    this.geometry.setDrawRange(0, this.faceCount * 3);
    this.object.geometry = this.geometry;
  }

  /** Incremental patch; falls back to a full upload only when capacity runs out. */
  applyDelta(mesh: ClientMesh, delta: MeshDeltaBody): void {
    const newVertices = delta.added_positions.length;
    const newFaces = delta.added_faces.length;
    if (
      this.vertexCount + newVertices > this.vertexCapacity ||
      this.faceCount + newFaces > this.faceCapacity
    ) {
      this.setMesh(mesh);
      return;
    }

    const position = this.geometry.getAttribute("position") as THREE.BufferAttribute;
    const normal = this.geometry.getAttribute("normal") as THREE.BufferAttribute;
    const index = this.geometry.getIndex() as THREE.BufferAttribute;
    const indexArray = index.array as Uint32Array;

    for (let i = 0; i < newVertices; i++) {
      const v = this.vertexCount + i;
      const [x, y, z] = delta.added_positions[i];
      position.setXYZ(v, x, y, z);
      const [nx, ny, nz] = delta.added_normals[i];
      normal.setXYZ(v, nx, ny, nz);
    }
    if (newVertices) {
      position.addUpdateRange(this.vertexCount * 3, newVertices * 3);
      normal.addUpdateRange(this.vertexCount * 3, newVertices * 3);
      position.needsUpdate = true;
      normal.needsUpdate = true;
      this.vertexCount += newVertices;
    }

    for (const fid of delta.removed_face_ids) {
      this.degenerateFace(indexArray, fid);
      index.addUpdateRange(fid * 3, 3);
    }
    for (let i = 0; i < newFaces; i++) {
      const f = this.faceCount + i;
      const [a, b, c] = delta.added_faces[i];
      indexArray[f * 3] = a;
      indexArray[f * 3 + 1] = b;
      indexArray[f * 3 + 2] = c;
    }
    if (newFaces) index.addUpdateRange(this.faceCount * 3, newFaces * 3);
    if (newFaces || delta.removed_face_ids.length) index.needsUpdate = true;
    this.faceCount += newFaces;
    this.geometry.setDrawRange(0, this.faceCount * 3);
  }

  get drawnFaceCount(): number {
    return this.faceCount;
  }

  private degenerateFace(index: Uint32Array, fid: number): void {
    index[fid * 3 + 1] = index[fid * 3];
    index[fid * 3 + 2] = index[fid * 3];
  }
}

/** Diagnostic overlays, one scene child each, togglable independently. */
export class Overlays {
  readonly group = new THREE.Group();
  private objects: Record<OverlayName, THREE.Object3D>;

  constructor() {
    this.objects = {
      particles: new THREE.Points(
        new THREE.BufferGeometry(),
        new THREE.PointsMaterial({ color: 0x2266ff, size: 0.02 }),
      ),
      neighborLinks: new THREE.LineSegments(
        new THREE.BufferGeometry(),
        new THREE.LineBasicMaterial({ color: 0x66aaff }),
      ),
      tearBoxes: new THREE.LineSegments(
        new THREE.BufferGeometry(),
        new THREE.LineBasicMaterial({ color: 0xffaa00 }),
      ),
      sections: new THREE.LineSegments(
        new THREE.BufferGeometry(),
        new THREE.LineBasicMaterial({ color: 0x44cc66 }),
      ),
    };
    for (const object of Object.values(this.objects)) {
      object.visible = false;
      this.group.add(object);
    }
  }

  toggle(name: OverlayName): boolean {
    const object = this.objects[name];
    object.visible = !object.visible;
    return object.visible;
  }

  isVisible(name: OverlayName): boolean {
    return this.objects[name].visible;
  }

  setParticles(particles: ParticleState): void {
    const points = this.objects.particles as THREE.Points;
    points.geometry.dispose();
    points.geometry = new THREE.BufferGeometry();
    points.geometry.setAttribute(
      "position",
      new THREE.Float32BufferAttribute(particles.centers, 3),
    );

    const lines = this.objects.neighborLinks as THREE.LineSegments;
    const segments = new Float32Array(particles.neighbors.length * 6);
    let k = 0;
    for (const [a, b] of particles.neighbors) {
      for (let c = 0; c < 3; c++) segments[k++] = particles.centers[a * 3 + c];
      for (let c = 0; c < 3; c++) segments[k++] = particles.centers[b * 3 + c];
    }
    lines.geometry.dispose();
    lines.geometry = new THREE.BufferGeometry();
    lines.geometry.setAttribute("position", new THREE.BufferAttribute(segments, 3));
  }

  /** Draw each torn segment as a tip→tip and blade-direction wire. */
  setTearBoxes(samples: { tip: number[]; end: number[] }[]): void {
    const lines = this.objects.tearBoxes as THREE.LineSegments;
    const segments: number[] = [];
    for (let i = 0; i + 1 < samples.length; i++) {
      segments.push(...samples[i].tip, ...samples[i + 1].tip);
      segments.push(...samples[i].tip, ...samples[i].end);
    }
    if (samples.length) {
      const last = samples[samples.length - 1];
      segments.push(...last.tip, ...last.end);
    }
    lines.geometry.dispose();
    lines.geometry = new THREE.BufferGeometry();
    lines.geometry.setAttribute("position", new THREE.Float32BufferAttribute(segments, 3));
  }

  /** Section overlay: the spatial-partition grid over the mesh AABB. */
  setSections(mesh: ClientMesh, divisions = 4): void {
    const lo = [Infinity, Infinity, Infinity];
    const hi = [-Infinity, -Infinity, -Infinity];
    for (let v = 0; v < mesh.vertexCount; v++) {
      for (let c = 0; c < 3; c++) {
        const x = mesh.positions[v * 3 + c];
        if (x < lo[c]) lo[c] = x;
        if (x > hi[c]) hi[c] = x;
      }
    }
    const segments: number[] = [];
    for (let i = 0; i <= divisions; i++) {
      for (let j = 0; j <= divisions; j++) {
        const fi = i / divisions;
        const fj = j / divisions;
        const x = lo[0] + fi * (hi[0] - lo[0]);
        const y = lo[1] + fj * (hi[1] - lo[1]);
        const z = lo[2] + fj * (hi[2] - lo[2]);
        segments.push(x, y, lo[2], x, y, hi[2]);
        segments.push(x, lo[1], z, x, hi[1], z);
        segments.push(lo[0], y, z, hi[0], y, z);
      }
    }
    const lines = this.objects.sections as THREE.LineSegments;
    lines.geometry.dispose();
    lines.geometry = new THREE.BufferGeometry();
    lines.geometry.setAttribute("position", new THREE.Float32BufferAttribute(segments, 3));
  }
}

export class SceneView {
  readonly scene = new THREE.Scene();
  readonly meshView = new MeshView();
  readonly overlays = new Overlays();

  constructor() {
    this.scene.add(new THREE.AmbientLight(0xffffff, 0.45));
    const key = new THREE.DirectionalLight(0xffffff, 1.1);
    key.position.set(3, 5, 4);
    this.scene.add(key);
    this.scene.add(this.meshView.object);
    this.scene.add(this.overlays.group);
  }
}
