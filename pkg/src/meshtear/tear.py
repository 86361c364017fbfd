"""Progressive destructive tearing: candidate collection, box clipping,
two retriangulation passes, attribute interpolation, delta emission."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonManifoldResult
from .geometry import (ENTRY, EXIT, LAT_NEG, LAT_POS, TOP, BOTTOM,
                       Plane, TearBox, adjacent_planes, build_tear_boxes,
                       polygon_area)
from .mesh import MeshDelta, TriMesh, sections_touching

PLANE_ORDER = (LAT_NEG, LAT_POS, ENTRY, EXIT, TOP, BOTTOM)


@dataclass
class RimVertex:
    vertex: int
    box_index: int
    plane_slot: int


@dataclass
class TearState:
    """Per-stroke bookkeeping across segments."""

    boxes_so_far: list = field(default_factory=list)
    search_list: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    rim_vertices: list = field(default_factory=list)  # RimVertex


@dataclass
class SegmentResult:
    """Everything one tear segment produced (deltas already applied)."""

    delta: MeshDelta                    # first retriangulation pass
    second_delta: MeshDelta | None      # second pass (T-junction repair)
    rim: list                           # RimVertex for this segment
    new_vertices: list                  # vertex ids created this segment
    affected_vertices: list             # vertices of removed + added faces
    removed_faces: list
    pending_skin: list                  # (new_vid, face_id, bary) for deferred skin interp
    candidates: np.ndarray              # candidate face ids examined


class _PolyVert:
    """Polygon corner during clipping: barycentric coords, cached world
    position, and an identity key for cross-face vertex sharing."""

    __slots__ = ("bary", "pos", "key")

    def __init__(self, bary, pos, key):
        self.bary = bary
        self.pos = pos
        self.key = key


def band_test(points, plane, box: TearBox, eps):
    """True iff every point is on the inner side (closed) of the four planes
    adjacent to ``plane`` in the box."""
    if isinstance(plane, int):
        slot = plane
    else:
        slot = next(i for i, p in enumerate(box.planes)
                    if np.allclose(p.normal, plane.normal)
                    and abs(p.offset - plane.offset) <= eps)
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    for adj in adjacent_planes(slot):
        if np.any(box.planes[adj].signed_distance(points) > eps):
            return False
    return True


def _split_polygon(poly, tri, plane: Plane, slot, eps, counter):
    """Split a convex bary-polygon by one box plane.

    Returns (outside_piece, inside_piece); either may be None.  On-vertices
    go to both sides; crossings within eps of a corner are snapped to it.
    counter is a 1-element list used to mint per-face unique interior keys.
    """
    nx, ny, nz = (float(c) for c in plane.normal)
    off = float(plane.offset)
    d = [float(v.pos[0]) * nx + float(v.pos[1]) * ny + float(v.pos[2]) * nz
         - off for v in poly]
    sides = [0 if abs(di) <= eps else (1 if di > 0.0 else -1) for di in d]

    if 1 not in sides:
        return None, poly
    if -1 not in sides:
        return poly, None

    outside, inside = [], []
    n = len(poly)
    for i in range(n):
        j = (i + 1) % n
        if sides[i] >= 0:
            outside.append(poly[i])
        if sides[i] <= 0:
            inside.append(poly[i])
        if sides[i] * sides[j] < 0:
            t = d[i] / (d[i] - d[j])
            pi, pj = poly[i].pos, poly[j].pos
            ex = float(pj[0]) - float(pi[0])
            ey = float(pj[1]) - float(pi[1])
            ez = float(pj[2]) - float(pi[2])
            elen = math.sqrt(ex * ex + ey * ey + ez * ez)
            if t * elen <= eps:
                vert = poly[i]
            elif (1.0 - t) * elen <= eps:
                vert = poly[j]
            else:
                bary = (1.0 - t) * poly[i].bary + t * poly[j].bary
                pos = (1.0 - t) * pi + t * pj
                zeros = np.nonzero(bary == 0.0)[0]
                if len(zeros) == 1:
                    # Lies on an original triangle edge: shareable key.
                    key = ("edge", int(zeros[0]), slot)
                else:
                    counter[0] += 1
                    key = ("int", counter[0], slot)
                vert = _PolyVert(bary, pos, key)
            outside.append(vert)
            inside.append(vert)

    def _dedupe(p):
        out = []
        for v in p:
            if out and (v is out[-1] or v is out[0]):
                continue
            out.append(v)
        return out if len(out) >= 3 else None

    return _dedupe(outside), _dedupe(inside)


def _clip_face_against_box(tri, box, eps):
    """Successively clip a triangle by the box planes in the fixed order.

    Returns (kept_polys, inside_poly).  kept_polys are the outside pieces;
    inside_poly is the material inside the box (to be discarded), or None
    when the face has no material inside the box.
    """
    counter = [0]
    inner = [_PolyVert(np.eye(3)[k].copy(), tri[k].copy(), ("orig", k))
             for k in range(3)]
    kept = []
    for slot in PLANE_ORDER:
        outside, inner = _split_polygon(inner, tri, box.planes[slot],
                                        slot, eps, counter)
        if outside is not None:
            kept.append(outside)
        if inner is None:
            return kept, None
    return kept, inner


def _dist(a, b):
    dx = float(a[0]) - float(b[0])
    dy = float(a[1]) - float(b[1])
    dz = float(a[2]) - float(b[2])
    return math.sqrt(dx * dx + dy * dy + dz * dz)


def _shorter_diagonal_quads(ids, pts):
    """Split a quad by its shorter diagonal; ties toward the lower vertex id."""
    d02 = _dist(pts[0], pts[2])
    d13 = _dist(pts[1], pts[3])
    if abs(d02 - d13) <= 1e-12:
        use02 = min(ids[0], ids[2]) < min(ids[1], ids[3])
    else:
        use02 = d02 < d13
    if use02:
        return [(ids[0], ids[1], ids[2]), (ids[0], ids[2], ids[3])]
    return [(ids[1], ids[2], ids[3]), (ids[1], ids[3], ids[0])]


def _triangulate(ids, pts, eps_area):
    """Deterministic triangulation of a convex polygon (ids are vertex ids)."""
    out = []
    if len(ids) == 3:
        tris = [tuple(ids)]
    elif len(ids) == 4:
        tris = _shorter_diagonal_quads(ids, pts)
    else:
        tris = [(ids[0], ids[k], ids[k + 1]) for k in range(1, len(ids) - 1)]
    for a, b, c in tris:
        if a == b or b == c or a == c:
            continue
        pa, pb, pc = (pts[ids.index(a)], pts[ids.index(b)], pts[ids.index(c)])
        if polygon_area((pa, pb, pc)) <= eps_area:
            continue
        out.append((a, b, c))
    return out


def tear_segment(mesh: TriMesh, sections, box: TearBox, box_index=0,
                 candidates=None):
    """Clip every candidate face against one tear box (Pass 1).

    Applies the resulting delta to the mesh and returns a SegmentResult.
    A box that misses the mesh yields an empty delta (mesh untouched).
    Note: the caller must keep sections current afterwards.
    """
    eps = mesh.eps_side
    if candidates is None:
        candidates = sections_touching(sections, mesh, [box])
    candidates = np.asarray(candidates, dtype=np.int64)
    candidates = candidates[mesh.face_alive[candidates]]

    delta = MeshDelta(epoch=mesh.epoch)
    if mesh.skin is not None:
        delta.added_skin = []
    result = SegmentResult(delta=delta, second_delta=None, rim=[],
                           new_vertices=[], affected_vertices=[],
                           removed_faces=[], pending_skin=[],
                           candidates=candidates)
    if not len(candidates):
        return result

    p = mesh.positions
    fverts = mesh.faces[candidates]
    corners = p[fverts]  # (C, 3, 3)
    normals = np.stack([pl.normal for pl in box.planes])
    offsets = np.array([pl.offset for pl in box.planes])
    sd = np.einsum("cvk,pk->cvp", corners, normals) - offsets  # (C, 3, 6)

    fully_out = np.any(np.all(sd >= -eps, axis=1), axis=1)
    fully_in = np.all(sd < -eps, axis=(1, 2))
    to_clip = ~fully_out & ~fully_in

    removed = [int(f) for f in candidates[fully_in]]

    # Per-segment vertex realization caches.
    edge_cache = {}       # (vmin, vmax, plane_slot) -> new vid
    next_vid = len(mesh.positions)
    new_pos, new_nrm, new_uv = [], [], []

    def realize(vert, face_id, face_corners, tri):
        nonlocal next_vid
        kind = vert.key[0]
        if kind == "orig":
            return int(face_corners[vert.key[1]])
        if kind == "edge":
            zero = vert.key[1]
            a, b = int(face_corners[(zero + 1) % 3]), int(face_corners[(zero + 2) % 3])
            ck = (min(a, b), max(a, b), vert.key[2])
            if ck in edge_cache:
                return edge_cache[ck]
        bary = vert.bary
        vid = next_vid
        next_vid += 1
        new_pos.append(np.asarray(vert.pos, dtype=np.float64))
        nrm = bary @ mesh.normals[face_corners]
        ln = np.linalg.norm(nrm)
        new_nrm.append(nrm / ln if ln > 0 else nrm)
        new_uv.append(bary @ mesh.uvs[face_corners])
        delta.provenance.append((int(face_id), tuple(float(x) for x in bary)))
        if mesh.skin is not None:
            result.pending_skin.append((vid, int(face_id), bary.copy()))
        result.new_vertices.append(vid)
        result.rim.append(RimVertex(vid, box_index, vert.key[-1]))
        if kind == "edge":
            edge_cache[ck] = vid
        else:
            vert.key = ("realized", vid)
        return vid

    added_faces = []
    for ci in np.nonzero(to_clip)[0]:
        face_id = int(candidates[ci])
        face_corners = fverts[ci]
        tri = corners[ci]
        kept, inner = _clip_face_against_box(tri, box, eps)
        if inner is None:
            continue  # no material inside the box: untouched
        removed.append(face_id)
        realized_keys = {}
        for poly in kept:
            ids = []
            for vert in poly:
                if vert.key[0] == "realized":
                    vid = vert.key[1]
                elif id(vert) in realized_keys:
                    vid = realized_keys[id(vert)]
                else:
                    vid = realize(vert, face_id, face_corners, tri)
                    realized_keys[id(vert)] = vid
                if not ids or (ids[-1] != vid and vid != ids[0]):
                    ids.append(vid)
            if len(ids) < 3:
                continue
            pts = [new_pos[v - len(mesh.positions)] if v >= len(mesh.positions)
                   else p[v] for v in ids]
            if polygon_area(pts) <= mesh.eps_area:
                continue
            added_faces.extend(_triangulate(ids, pts, mesh.eps_area))

    delta.removed_face_ids = removed
    delta.added_faces = added_faces
    if new_pos:
        delta.added_positions = np.array(new_pos)
        delta.added_normals = np.array(new_nrm)
        delta.added_uvs = np.array(new_uv)
        if mesh.skin is not None:
            delta.added_skin = [[] for _ in new_pos]
    result.removed_faces = removed

    if delta.empty:
        return result

    mesh.apply_delta(delta)
    affected = set()
    for fid in removed:
        affected.update(int(v) for v in mesh.faces[fid])
    for f in added_faces:
        affected.update(int(v) for v in f)
    result.affected_vertices = sorted(affected)
    return result


def second_pass(mesh: TriMesh, result: SegmentResult, box: TearBox):
    """T-junction repair: split any face whose edge interior contains a
    vertex created this segment (Pass 2).  Applies and returns its delta."""
    eps = mesh.eps_side
    new_vids = np.array(result.new_vertices, dtype=np.int64)
    delta = MeshDelta(epoch=mesh.epoch)
    if mesh.skin is not None:
        delta.added_skin = []
    if not len(new_vids):
        result.second_delta = delta
        return delta

    # Work queue: surviving candidates plus faces added in pass 1; entries
    # are (face_id_or_None, vertex triple, nearby new vertices).  Faces
    # minted by this pass get fid None and are re-queued (inheriting the
    # parent's nearby set) so cascaded splits terminate naturally.
    n_added = len(result.delta.added_faces)
    seeds = [int(f) for f in result.candidates if mesh.face_alive[f]]
    seeds += [fid for fid in range(len(mesh.faces) - n_added, len(mesh.faces))
              if mesh.face_alive[fid]]
    seeds = np.asarray(seeds, dtype=np.int64)
    if not len(seeds):
        result.second_delta = delta
        return delta

    # AABB prefilter: a hanging vertex must fall inside the face's box.
    qpos = mesh.positions[new_vids]
    corners = mesh.positions[mesh.faces[seeds]]  # (Q, 3, 3)
    lo = corners.min(axis=1) - eps
    hi = corners.max(axis=1) + eps
    near = (np.all(qpos[None, :, :] >= lo[:, None, :], axis=2)
            & np.all(qpos[None, :, :] <= hi[:, None, :], axis=2))  # (Q, M)

    # Vectorized first sweep over every (face, nearby vertex) pair: a face
    # enters the split queue only when a vertex truly hangs on one of its
    # edge interiors, so the per-face loop below touches split faces only.
    fi, mi = np.nonzero(near)
    queue = []
    if len(fi):
        fv = mesh.faces[seeds[fi]]             # (P, 3)
        q = qpos[mi]                           # (P, 3)
        not_own = ((new_vids[mi] != fv[:, 0]) & (new_vids[mi] != fv[:, 1])
                   & (new_vids[mi] != fv[:, 2]))
        hit_any = np.zeros(len(fi), dtype=bool)
        for e in range(3):
            pa = mesh.positions[fv[:, e]]
            pb = mesh.positions[fv[:, (e + 1) % 3]]
            ab = pb - pa
            L2 = np.einsum("ij,ij->i", ab, ab)
            L2s = np.where(L2 == 0.0, 1.0, L2)
            t = np.einsum("ij,ij->i", q - pa, ab) / L2s
            L = np.sqrt(L2)
            interior = (t * L > eps) & ((1.0 - t) * L > eps) & (L2 > 0)
            dist = np.linalg.norm(q - (pa + t[:, None] * ab), axis=1)
            hit_any |= not_own & interior & (dist <= eps)
        for qi in np.unique(fi[hit_any]):
            fid = int(seeds[qi])
            queue.append((fid, tuple(int(v) for v in mesh.faces[fid]),
                          new_vids[near[qi]]))

    removed, added = [], []
    idx = 0
    while idx < len(queue):
        fid, fverts, near_vids = queue[idx]
        idx += 1
        hit = _find_hanging(fverts, near_vids, mesh, eps)
        if hit is None:
            continue
        edge_i, hanging = hit
        a = fverts[edge_i]
        b = fverts[(edge_i + 1) % 3]
        c = fverts[(edge_i + 2) % 3]
        pa, pb = mesh.positions[a], mesh.positions[b]
        denom = float(np.dot(pb - pa, pb - pa))
        ts = sorted((float(np.dot(mesh.positions[v] - pa, pb - pa)) / denom,
                     int(v)) for v in hanging)
        chain = [a] + [v for _, v in ts] + [b]
        new_tris = [(chain[k], chain[k + 1], c) for k in range(len(chain) - 1)]
        if fid is not None:
            removed.append(fid)
        else:
            added.remove(fverts)
        for tri in new_tris:
            added.append(tri)
            queue.append((None, tri, near_vids))

    delta.removed_face_ids = removed
    delta.added_faces = added
    if not delta.empty:
        mesh.apply_delta(delta)
        affected = set(result.affected_vertices)
        for f in added:
            affected.update(int(v) for v in f)
        result.affected_vertices = sorted(affected)
    result.second_delta = delta
    return delta


def _find_hanging(fverts, new_vids, mesh, eps):
    """First edge of the face with hanging new vertices on its interior."""
    cand = new_vids[(new_vids != fverts[0]) & (new_vids != fverts[1])
                    & (new_vids != fverts[2])]
    if not len(cand):
        return None
    q = mesh.positions[cand]
    for edge_i in range(3):
        a = fverts[edge_i]
        b = fverts[(edge_i + 1) % 3]
        pa, pb = mesh.positions[a], mesh.positions[b]
        ab = pb - pa
        L2 = float(np.dot(ab, ab))
        if L2 == 0.0:
            continue
        t = (q - pa) @ ab / L2
        L = np.sqrt(L2)
        interior = (t * L > eps) & ((1.0 - t) * L > eps)
        if not np.any(interior):
            continue
        proj = pa + np.outer(t, ab)
        dist = np.linalg.norm(q - proj, axis=1)
        mask = interior & (dist <= eps)
        if np.any(mask):
            return edge_i, cand[mask]
    return None


def prune_search_list(mesh: TriMesh, face_id, box: TearBox, reach):
    """Retain a face for the next segment?  False only when the face AABB is
    strictly outside the box AABB expanded by the next segment's maximum
    reach, which makes pruning provably side-effect free."""
    f = mesh.faces[face_id]
    p = mesh.positions[f]
    lo, hi = box.aabb(margin=reach)
    return bool(np.all(p.min(axis=0) <= hi) and np.all(p.max(axis=0) >= lo))


def sample_stroke(raw_times, raw_tips, raw_ends, distance_threshold,
                  angle_threshold_deg=25.0):
    """Downsample a raw scalpel stream into stroke samples.

    Keeps poses >= distance_threshold apart, forces a sample at sharp turns
    (angle between consecutive raw motion directions above the threshold),
    and always keeps the first and last distinct poses.
    Returns index array into the raw stream.
    """
    tips = np.asarray(raw_tips, dtype=np.float64)
    n = len(tips)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    cos_thresh = np.cos(np.radians(angle_threshold_deg))
    keep = [0]
    for i in range(1, n):
        dist = np.linalg.norm(tips[i] - tips[keep[-1]])
        turn = False
        if 0 < i < n - 1:
            d0 = tips[i] - tips[i - 1]
            d1 = tips[i + 1] - tips[i]
            n0, n1 = np.linalg.norm(d0), np.linalg.norm(d1)
            if n0 > 0 and n1 > 0:
                turn = float(d0 @ d1) / (n0 * n1) < cos_thresh
        if dist >= distance_threshold or (turn and dist > 0):
            keep.append(i)
    if np.linalg.norm(tips[n - 1] - tips[keep[-1]]) > 0 and keep[-1] != n - 1:
        keep.append(n - 1)
    return np.array(keep, dtype=np.int64)


def check_local_manifold(mesh: TriMesh, affected_vertices):
    """Raise NonManifoldResult when an edge near the tear has >2 live faces."""
    if not affected_vertices:
        return
    av = np.asarray(affected_vertices, dtype=np.int64)
    mask = mesh.face_alive & np.isin(mesh.faces, av).any(axis=1)
    f = mesh.faces[mask]
    if not len(f):
        return
    edges = np.sort(np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]]),
                    axis=1)
    _, counts = np.unique(edges, axis=0, return_counts=True)
    if np.any(counts > 2):
        raise NonManifoldResult("tear produced an over-shared edge")


def tear_stroke(mesh: TriMesh, sections, tips, ends, width):
    """Convenience driver: tear every segment of a stroke (no particles).

    Returns (boxes, list of SegmentResult).  Each segment that fails the
    local manifold check is rolled back by restoring the pre-segment mesh.
    """
    from .mesh import MeshSections  # local import to avoid cycle confusion

    boxes = build_tear_boxes(tips, ends, width)
    results = []
    state = TearState(boxes_so_far=list(boxes))
    for k, box in enumerate(boxes):
        snapshot = mesh.copy()
        try:
            res = tear_segment(mesh, sections, box, box_index=k)
            if not res.delta.empty:
                sections.apply_delta(mesh, res.delta)
            second_pass(mesh, res, box)
            if res.second_delta is not None and not res.second_delta.empty:
                sections.apply_delta(mesh, res.second_delta)
            check_local_manifold(mesh, res.affected_vertices)
        except NonManifoldResult:
            mesh.positions = snapshot.positions
            mesh.normals = snapshot.normals
            mesh.uvs = snapshot.uvs
            mesh.skin = snapshot.skin
            mesh.faces = snapshot.faces
            mesh.face_alive = snapshot.face_alive
            mesh.epoch = snapshot.epoch
            raise
        state.rim_vertices.extend(res.rim)
        results.append(res)
    return boxes, results
