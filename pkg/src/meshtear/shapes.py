"""Procedural test meshes: cube, grid, icosphere, uv sphere."""
from __future__ import annotations

import numpy as np

from .mesh import TriMesh


def cube(size=1.0):
    """Axis-aligned cube centered at the origin, 12 triangles."""
    h = size / 2.0
    corners = np.array([[x, y, z] for x in (-h, h) for y in (-h, h)
                        for z in (-h, h)])
    quads = [
        (0, 1, 3, 2), (4, 6, 7, 5),  # x- x+
        (0, 4, 5, 1), (2, 3, 7, 6),  # y- y+
        (0, 2, 6, 4), (1, 5, 7, 3),  # z- z+
    ]
    faces = []
    for a, b, c, d in quads:
        faces.append([a, b, c])
        faces.append([a, c, d])
    return TriMesh(corners, faces)


def grid(nx=10, ny=10, size=1.0):
    """Flat (z=0) triangulated grid with nx*ny quads -> 2*nx*ny faces."""
    xs = np.linspace(0, size, nx + 1)
    ys = np.linspace(0, size, ny + 1)
    positions = np.array([[x, y, 0.0] for y in ys for x in xs])
    faces = []
    for j in range(ny):
        for i in range(nx):
            a = j * (nx + 1) + i
            b = a + 1
            c = a + nx + 1
            d = c + 1
            faces.append([a, b, d])
            faces.append([a, d, c])
    return TriMesh(positions, faces)


def icosphere(subdivisions=2, radius=1.0):
    """Subdivided icosahedron; 20 * 4^n faces (n=2 -> 320, n=3 -> 1280)."""
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ], dtype=np.float64)
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [v for v in verts]
    for _ in range(subdivisions):
        cache = {}

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = (verts[a] + verts[b]) / 2.0
                m = m / np.linalg.norm(m)
                verts.append(m)
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    positions = np.array(verts) * radius
    return TriMesh(positions, faces)


def uv_sphere(segments=24, rings=17, radius=1.0):
    """Latitude/longitude sphere: segments*(rings-1)+2 vertices,
    2*segments*(rings-1) faces."""
    positions = [np.array([0.0, 0.0, radius])]
    for r in range(1, rings):
        phi = np.pi * r / rings
        for s in range(segments):
            theta = 2 * np.pi * s / segments
            positions.append(radius * np.array([
                np.sin(phi) * np.cos(theta),
                np.sin(phi) * np.sin(theta),
                np.cos(phi)]))
    positions.append(np.array([0.0, 0.0, -radius]))
    south = len(positions) - 1

    def ring_vert(r, s):
        return 1 + (r - 1) * segments + (s % segments)

    faces = []
    for s in range(segments):  # north cap
        faces.append([0, ring_vert(1, s), ring_vert(1, s + 1)])
    for r in range(1, rings - 1):
        for s in range(segments):
            a, b = ring_vert(r, s), ring_vert(r, s + 1)
            c, d = ring_vert(r + 1, s), ring_vert(r + 1, s + 1)
            faces.append([a, c, d])
            faces.append([a, d, b])
    for s in range(segments):  # south cap
        faces.append([south, ring_vert(rings - 1, s + 1), ring_vert(rings - 1, s)])
    return TriMesh(np.array(positions), faces)


def by_spec(spec):
    """Build a mesh from a generator description (used by bench manifests).

    spec: {"kind": "icosphere"|"uv_sphere"|"cube"|"grid", ...params}
    """
    kind = spec["kind"]
    params = {k: v for k, v in spec.items() if k != "kind"}
    makers = {"icosphere": icosphere, "uv_sphere": uv_sphere,
              "cube": cube, "grid": grid}
    if kind not in makers:
        raise ValueError(f"unknown mesh generator {kind!r}")
    return makers[kind](**params)
