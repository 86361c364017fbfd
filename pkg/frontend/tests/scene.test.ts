import * as THREE from "three";
import { describe, expect, it } from "vitest";

import { MeshView, Overlays, SceneView } from "../src/viewer/scene.js";
import { QUAD, emptyDelta, meshOf } from "./helpers.js";

describe("incremental mesh view", () => {
  it("uploads a snapshot with slack capacity", () => {
    const mesh = meshOf(QUAD.positions, QUAD.faces);
    const view = new MeshView();
    view.setMesh(mesh);
    const geometry = view.object.geometry;
    expect(view.drawnFaceCount).toBe(2);
    expect(geometry.drawRange.count).toBe(6);
    expect(geometry.getAttribute("position").array.length).toBeGreaterThan(12);
  });

  it("patches removed and added faces in place", () => {
    const mesh = meshOf(QUAD.positions, QUAD.faces);
    const view = new MeshView();
    view.setMesh(mesh);
    const indexBefore = view.object.geometry.getIndex()!.array;

    const delta = {
      ...emptyDelta(0),
      removed_face_ids: [0],
      added_positions: [[2, 0, 0]],
      added_normals: [[0, 0, 1]],
      added_faces: [[1, 4, 2]],
    };
    mesh.applyDelta(delta);
    view.applyDelta(mesh, delta);

    const geometry = view.object.geometry;
    expect(geometry.getIndex()!.array).toBe(indexBefore); // same buffer, no re-upload
    const index = geometry.getIndex()!.array as Uint32Array;
    // Face 0 degenerated, face 2 appended.
    expect(index[1]).toBe(index[0]);
    expect(index[2]).toBe(index[0]);
    expect(Array.from(index.slice(6, 9))).toEqual([1, 4, 2]);
    expect(geometry.drawRange.count).toBe(9);
    const position = geometry.getAttribute("position");
    expect(position.getX(4)).toBe(2);
  });

  it("falls back to a full upload when capacity overflows", () => {
    const mesh = meshOf(QUAD.positions, QUAD.faces);
    const view = new MeshView();
    view.setMesh(mesh);
    const delta = {
      ...emptyDelta(0),
      added_positions: Array.from({ length: 50 }, (_, i) => [3 + i, 0, 0]),
      added_normals: Array.from({ length: 50 }, () => [0, 0, 1]),
      added_faces: Array.from({ length: 50 }, (_, i) => [0, 1, 4 + i]),
    };
    mesh.applyDelta(delta);
    view.applyDelta(mesh, delta);
    expect(view.drawnFaceCount).toBe(52);
    const position = view.object.geometry.getAttribute("position");
    expect(position.getX(4)).toBe(3);
  });
});

describe("overlays", () => {
  it("start hidden and toggle independently", () => {
    const overlays = new Overlays();
    expect(overlays.isVisible("particles")).toBe(false);
    expect(overlays.toggle("particles")).toBe(true);
    expect(overlays.isVisible("neighborLinks")).toBe(false);
    expect(overlays.toggle("particles")).toBe(false);
  });

  it("builds particle points and neighbor segments from session state", () => {
    const overlays = new Overlays();
    overlays.setParticles({
      centers: [0, 0, 0, 1, 0, 0, 0, 1, 0],
      neighbors: [
        [0, 1],
        [1, 2],
      ],
    });
    const points = overlays.group.children[0] as THREE.Points;
    const lines = overlays.group.children[1] as THREE.LineSegments;
    expect(points.geometry.getAttribute("position").count).toBe(3);
    expect(lines.geometry.getAttribute("position").count).toBe(4); // 2 segments
  });

  it("section grid covers the mesh bounds", () => {
    const scene = new SceneView();
    const mesh = meshOf(QUAD.positions, QUAD.faces);
    scene.overlays.setSections(mesh, 2);
    const sections = scene.overlays.group.children[3] as THREE.LineSegments;
    expect(sections.geometry.getAttribute("position").count).toBeGreaterThan(0);
  });
});
