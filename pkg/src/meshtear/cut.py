"""Straight plane cut: three-way face retriangulation and sub-mesh split."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import Collinear, StraddlingFace
from .geometry import Plane
from .mesh import TriMesh
from .skinning import interpolate_skin


@dataclass
class CutResult:
    """Two independent sub-meshes plus seam bookkeeping.

    Vertex maps go from working-mesh vertex ids (original mesh plus the
    intersection vertices appended during retriangulation) to compacted ids
    in each sub-mesh; -1 where a vertex is absent from that side.
    """

    positive_mesh: TriMesh
    negative_mesh: TriMesh
    seam_vertex_pairs: list          # (positive vid, negative vid)
    pos_vertex_map: np.ndarray
    neg_vertex_map: np.ndarray
    intersection_count: int = 0
    new_vertex_provenance: list = field(default_factory=list)  # (va, vb, t)


def cut_plane_from_samples(entry_point, scalpel_tip, scalpel_end):
    """Cutting plane through the mesh entry point and the scalpel's final
    tip/end, oriented by the right-hand rule of the argument order."""
    a = np.asarray(entry_point, dtype=np.float64)
    b = np.asarray(scalpel_tip, dtype=np.float64)
    c = np.asarray(scalpel_end, dtype=np.float64)
    n = np.cross(b - a, c - a)
    scale = max(np.linalg.norm(b - a), np.linalg.norm(c - a), 1e-30)
    if np.linalg.norm(n) <= 1e-12 * scale * scale:
        raise Collinear("cut sample points are collinear")
    return Plane.from_point_normal(a, n)


def _side_codes(distances, eps):
    return np.where(np.abs(distances) <= eps, 0, np.sign(distances)).astype(int)


def cut(mesh: TriMesh, plane: Plane):
    """Split a mesh by a plane into two complete sub-meshes.

    Every crossing face is retriangulated into three sub-faces with
    interpolated attributes; seam vertices are duplicated into both outputs.
    A plane that misses the mesh returns (original, empty).
    """
    eps = mesh.eps_side
    pos = mesh.positions
    d = plane.signed_distance(pos)
    codes = _side_codes(d, eps)

    live_ids = mesh.live_face_ids()
    faces = mesh.faces[live_ids]
    fcodes = codes[faces]  # (F, 3)
    crossing = np.any(fcodes > 0, axis=1) & np.any(fcodes < 0, axis=1)

    used = np.unique(faces) if len(faces) else np.zeros(0, dtype=np.int64)
    if not np.any(crossing):
        side_of_used = codes[used]
        if np.all(side_of_used >= 0) or np.all(side_of_used <= 0):
            # Plane misses the mesh: it comes back whole as one sub-mesh.
            n_all = len(mesh.positions)
            vmap = np.full(n_all, -1, dtype=np.int64)
            skin = None if mesh.skin is None else [list(s) for s in mesh.skin]
            full = _compact_arrays(mesh.positions, mesh.normals, mesh.uvs,
                                   skin, faces, vmap, mesh.skeleton)
            full.base_diag = mesh.base_diag
            empty = TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64),
                            normals=np.zeros((0, 3)), uvs=np.zeros((0, 2)),
                            validate=False)
            empty.base_diag = mesh.base_diag
            if np.all(side_of_used >= 0):
                return CutResult(full, empty, [], vmap,
                                 np.full(n_all, -1, dtype=np.int64))
            return CutResult(empty, full, [],
                             np.full(n_all, -1, dtype=np.int64), vmap)

    # Working arrays: original vertices + appended intersection vertices.
    new_positions, new_normals, new_uvs, new_skin = [], [], [], []
    provenance = []
    edge_cache = {}
    n0 = len(pos)

    def edge_vertex(a, b):
        key = (min(a, b), max(a, b))
        if key in edge_cache:
            return edge_cache[key]
        da, db = d[a], d[b]
        t = da / (da - db)
        vid = n0 + len(new_positions)
        new_positions.append((1 - t) * pos[a] + t * pos[b])
        nrm = (1 - t) * mesh.normals[a] + t * mesh.normals[b]
        ln = np.linalg.norm(nrm)
        new_normals.append(nrm / ln if ln > 0 else nrm)
        new_uvs.append((1 - t) * mesh.uvs[a] + t * mesh.uvs[b])
        if mesh.skin is not None:
            new_skin.append(interpolate_skin(mesh.skin[a], mesh.skin[b], float(t)))
        provenance.append((int(a), int(b), float(t)))
        edge_cache[key] = vid
        return vid

    out_faces = [tuple(int(v) for v in f) for f in faces[~crossing]]
    for f in faces[crossing]:
        fc = codes[f]
        on = np.nonzero(fc == 0)[0]
        if len(on) == 1:
            # One vertex on the plane, the other two straddle: split in two.
            k = int(on[0])
            a, b, c = int(f[k]), int(f[(k + 1) % 3]), int(f[(k + 2) % 3])
            m = edge_vertex(b, c)
            out_faces.append((a, b, m))
            out_faces.append((a, m, c))
        else:
            # Two edges crossed: one lone vertex, quad on the other side.
            lone = next(k for k in range(3)
                        if fc[k] != 0 and fc[(k + 1) % 3] == -fc[k]
                        and fc[(k + 2) % 3] == -fc[k])
            a, b, c = int(f[lone]), int(f[(lone + 1) % 3]), int(f[(lone + 2) % 3])
            m_ab = edge_vertex(a, b)
            m_ca = edge_vertex(c, a)
            out_faces.append((a, m_ab, m_ca))
            out_faces.append((m_ab, b, c))
            out_faces.append((m_ab, c, m_ca))

    all_pos = np.concatenate([pos, np.array(new_positions).reshape(-1, 3)])
    all_nrm = np.concatenate([mesh.normals, np.array(new_normals).reshape(-1, 3)])
    all_uv = np.concatenate([mesh.uvs, np.array(new_uvs).reshape(-1, 2)])
    all_skin = None
    if mesh.skin is not None:
        all_skin = [list(s) for s in mesh.skin] + new_skin
    all_codes = np.concatenate([codes, np.zeros(len(new_positions), dtype=int)])

    out_faces = np.asarray(out_faces, dtype=np.int64).reshape(-1, 3)
    pos_faces, neg_faces = partition_faces(out_faces, all_codes)

    pos_map = np.full(len(all_pos), -1, dtype=np.int64)
    neg_map = np.full(len(all_pos), -1, dtype=np.int64)
    pm = _compact_arrays(all_pos, all_nrm, all_uv, all_skin, pos_faces, pos_map,
                         mesh.skeleton)
    nm = _compact_arrays(all_pos, all_nrm, all_uv, all_skin, neg_faces, neg_map,
                         mesh.skeleton)
    pm.base_diag = mesh.base_diag
    nm.base_diag = mesh.base_diag

    seam = [(int(pos_map[v]), int(neg_map[v]))
            for v in range(len(all_pos))
            if pos_map[v] >= 0 and neg_map[v] >= 0]

    return CutResult(pm, nm, seam, pos_map, neg_map,
                     intersection_count=len(new_positions),
                     new_vertex_provenance=provenance)


def partition_faces(faces, codes):
    """Assign whole faces by the side of their non-On vertices.

    Pre: no face straddles the plane.  All-On faces go positive by
    convention.  Raises StraddlingFace on inconsistency.
    """
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    fc = codes[faces]
    has_pos = np.any(fc > 0, axis=1)
    has_neg = np.any(fc < 0, axis=1)
    if np.any(has_pos & has_neg):
        raise StraddlingFace("face still crosses the cut plane")
    return faces[~has_neg], faces[has_neg]


def _compact_arrays(all_pos, all_nrm, all_uv, all_skin, faces, vmap, skeleton):
    used = np.unique(faces) if len(faces) else np.zeros(0, dtype=np.int64)
    vmap[used] = np.arange(len(used))
    skin = None
    if all_skin is not None:
        skin = [all_skin[v] for v in used]
    m = TriMesh(all_pos[used], vmap[faces] if len(faces) else np.zeros((0, 3), dtype=np.int64),
                normals=all_nrm[used], uvs=all_uv[used], skin=skin,
                skeleton=skeleton, validate=False)
    return m
