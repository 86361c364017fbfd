"""Spring-anchored particle layer: generation, simulation, post-tear/cut
repair, and auxiliary slit particles that open a tear up."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import NoSkin, NoVertices
from .geometry import adjacent_planes

SIGMOID_STEEPNESS = 8.0
DEFAULT_SPRING_K = 400.0   # 1/s^2, unit particle mass
DEFAULT_DAMPING = 12.0     # 1/s
DEFAULT_DT = 1.0 / 90.0    # VR frame budget

# Fractions of the mesh bbox diagonal; poisson spacing is calibrated so a
# bunny-scale (~2.5k vertex) mesh lands near 180 particles.
DEFAULT_POISSON_FRAC = 0.057
RADIUS_FACTOR = 1.5        # d = 1.5 x poisson_r
NEIGHBOR_FACTOR = 2.5      # delta = 2.5 x poisson_r


def default_params(diag, seed=0):
    poisson_r = DEFAULT_POISSON_FRAC * diag
    return {
        "poisson_r": poisson_r,
        "d": RADIUS_FACTOR * poisson_r,
        "delta": NEIGHBOR_FACTOR * poisson_r,
        "seed": seed,
        "k": DEFAULT_SPRING_K,
        "c": DEFAULT_DAMPING,
    }


def influence_weight(r, d):
    """Sigmoid falloff in [0, 1], decreasing in r; normalized later."""
    r = np.asarray(r, dtype=np.float64)
    return 1.0 / (1.0 + np.exp(SIGMOID_STEEPNESS * (r / d - 0.5)))


@dataclass
class ParticleSystem:
    """Array-of-struct particle state.  anchor_vertex is -1 for auxiliary
    slit particles, which are anchored in space rather than to a vertex."""

    anchor_vertex: np.ndarray   # (P,) int
    anchor_pos: np.ndarray      # (P, 3) spring target (rest or posed)
    rest_center: np.ndarray     # (P, 3) spawn position; displacement origin
    center: np.ndarray          # (P, 3) current
    velocity: np.ndarray        # (P, 3)
    radius: np.ndarray          # (P,) influence radius d
    spring_k: np.ndarray        # (P,)
    damping: np.ndarray         # (P,)

    @property
    def count(self):
        return len(self.anchor_vertex)

    def displacement(self):
        return self.center - self.rest_center

    def add(self, anchor_pos, rest_center, radius, spring_k, damping,
            anchor_vertex=-1):
        pid = self.count
        self.anchor_vertex = np.append(self.anchor_vertex, anchor_vertex)
        self.anchor_pos = np.vstack([self.anchor_pos, anchor_pos])
        self.rest_center = np.vstack([self.rest_center, rest_center])
        self.center = np.vstack([self.center, rest_center])
        self.velocity = np.vstack([self.velocity, np.zeros(3)])
        self.radius = np.append(self.radius, radius)
        self.spring_k = np.append(self.spring_k, spring_k)
        self.damping = np.append(self.damping, damping)
        return pid

    def copy(self):
        return ParticleSystem(*(a.copy() for a in (
            self.anchor_vertex, self.anchor_pos, self.rest_center,
            self.center, self.velocity, self.radius, self.spring_k,
            self.damping)))


@dataclass
class ParticleMap:
    """Influence links (particle -> vertex, normalized weights) and symmetric
    neighbor links (particle <-> particle, distance-decaying weights)."""

    infl_particle: np.ndarray   # (L,) int
    infl_vertex: np.ndarray     # (L,) int
    infl_weight: np.ndarray     # (L,) float, sums to 1 per linked vertex
    nb_a: np.ndarray            # (K,) int, a < b
    nb_b: np.ndarray            # (K,) int
    nb_weight: np.ndarray       # (K,) float
    delta: float
    pinned_vertices: set = field(default_factory=set)

    def copy(self):
        return ParticleMap(self.infl_particle.copy(), self.infl_vertex.copy(),
                           self.infl_weight.copy(), self.nb_a.copy(),
                           self.nb_b.copy(), self.nb_weight.copy(),
                           self.delta, set(self.pinned_vertices))

    def linked_vertices(self):
        return np.unique(self.infl_vertex)

    def normalize(self):
        """Rescale so weights sum to 1 for every linked vertex."""
        if not len(self.infl_vertex):
            return
        sums = np.zeros(int(self.infl_vertex.max()) + 1)
        np.add.at(sums, self.infl_vertex, self.infl_weight)
        self.infl_weight = self.infl_weight / sums[self.infl_vertex]

    def remove_influence(self, mask):
        keep = ~mask
        self.infl_particle = self.infl_particle[keep]
        self.infl_vertex = self.infl_vertex[keep]
        self.infl_weight = self.infl_weight[keep]

    def remove_neighbors(self, mask):
        keep = ~mask
        self.nb_a = self.nb_a[keep]
        self.nb_b = self.nb_b[keep]
        self.nb_weight = self.nb_weight[keep]

    def add_influence(self, particles, vertices, weights):
        self.infl_particle = np.concatenate([self.infl_particle,
                                             np.asarray(particles, dtype=np.int64)])
        self.infl_vertex = np.concatenate([self.infl_vertex,
                                           np.asarray(vertices, dtype=np.int64)])
        self.infl_weight = np.concatenate([self.infl_weight,
                                           np.asarray(weights, dtype=np.float64)])


def generate_particles(mesh, d, delta, poisson_r, seed):
    """Poisson-disk anchors on mesh vertices plus the full particle map.

    Greedy dart throwing over a seeded permutation of vertex ids: the result
    is deterministic, pairwise >= poisson_r apart, and maximal.
    """
    if poisson_r <= 0 or d <= 0 or delta <= 0:
        raise ValueError("d, delta, poisson_r must be > 0")
    if poisson_r > delta:
        raise ValueError("poisson_r must be <= delta")
    verts = np.unique(mesh.live_faces()) if len(mesh.live_faces()) \
        else np.arange(len(mesh.positions))
    if not len(verts):
        raise NoVertices("mesh has no vertices to sample")
    pos = mesh.positions

    rng = np.random.default_rng(seed)
    order = verts[rng.permutation(len(verts))]
    anchors = []
    anchor_pos = np.empty((0, 3))
    r2 = poisson_r * poisson_r
    for v in order:
        p = pos[v]
        if len(anchors):
            if np.min(np.einsum("ij,ij->i", anchor_pos - p, anchor_pos - p)) < r2:
                continue
        anchors.append(int(v))
        anchor_pos = np.vstack([anchor_pos, p])

    P = len(anchors)
    system = ParticleSystem(
        anchor_vertex=np.array(anchors, dtype=np.int64),
        anchor_pos=anchor_pos.copy(),
        rest_center=anchor_pos.copy(),
        center=anchor_pos.copy(),
        velocity=np.zeros((P, 3)),
        radius=np.full(P, float(d)),
        spring_k=np.full(P, DEFAULT_SPRING_K),
        damping=np.full(P, DEFAULT_DAMPING),
    )

    tree = cKDTree(pos[verts])
    ip, iv, iw = [], [], []
    for j in range(P):
        idx = tree.query_ball_point(anchor_pos[j], d)
        for local in sorted(idx):
            v = int(verts[local])
            r = float(np.linalg.norm(pos[v] - anchor_pos[j]))
            ip.append(j)
            iv.append(v)
            iw.append(float(influence_weight(r, d)))

    nb_a, nb_b, nb_w = _neighbor_links(anchor_pos, delta)
    pmap = ParticleMap(np.array(ip, dtype=np.int64), np.array(iv, dtype=np.int64),
                       np.array(iw, dtype=np.float64), nb_a, nb_b, nb_w,
                       delta=float(delta))
    pmap.normalize()
    return system, pmap


def _neighbor_links(anchor_pos, delta):
    P = len(anchor_pos)
    a_ids, b_ids, ws = [], [], []
    if P > 1:
        tree = cKDTree(anchor_pos)
        for a, b in sorted(tree.query_pairs(delta * (1 + 1e-12))):
            dist = float(np.linalg.norm(anchor_pos[a] - anchor_pos[b]))
            if dist <= delta:
                a_ids.append(a)
                b_ids.append(b)
                ws.append(max(0.0, 1.0 - dist / delta))
    return (np.array(a_ids, dtype=np.int64), np.array(b_ids, dtype=np.int64),
            np.array(ws, dtype=np.float64))


def step(base_positions, system: ParticleSystem, pmap: ParticleMap,
         forces=None, dt=DEFAULT_DT):
    """One semi-implicit integration step; returns deformed vertex positions.

    v += dt (F - k (center - anchor) - c v); center += dt v; then every
    influenced vertex moves by its weight-blended particle displacements.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    F = np.zeros_like(system.center) if forces is None else np.asarray(forces)
    system.velocity += dt * (F - system.spring_k[:, None]
                             * (system.center - system.anchor_pos)
                             - system.damping[:, None] * system.velocity)
    system.center += dt * system.velocity
    return apply_map(base_positions, system, pmap)


def apply_map(base_positions, system: ParticleSystem, pmap: ParticleMap):
    """Blend particle displacements onto vertices (the final-position sum)."""
    out = np.array(base_positions, dtype=np.float64, copy=True)
    if len(pmap.infl_vertex):
        disp = system.displacement()
        np.add.at(out, pmap.infl_vertex,
                  pmap.infl_weight[:, None] * disp[pmap.infl_particle])
    return out


def propagate(moved, system: ParticleSystem, pmap: ParticleMap):
    """Spread directly-moved particle displacements to their neighbors.

    moved: {particle id: translation}.  Non-moved particles receive the
    neighbor-weighted sum of the direct displacements; isolated particles
    receive zero.
    """
    out = np.zeros((system.count, 3))
    direct = set(moved)
    for a, b, w in zip(pmap.nb_a, pmap.nb_b, pmap.nb_weight):
        a, b = int(a), int(b)
        if b in direct and a not in direct:
            out[a] += w * np.asarray(moved[b], dtype=np.float64)
        if a in direct and b not in direct:
            out[b] += w * np.asarray(moved[a], dtype=np.float64)
    for pid, t in moved.items():
        out[pid] = np.asarray(t, dtype=np.float64)
    return out


def update_skinned_anchors(mesh, system: ParticleSystem, pmap: ParticleMap):
    """Recompute anchors through LBS for the current pose and refresh the
    neighbor links against delta on the new anchor positions."""
    from .skinning import lbs_points

    if mesh.skin is None or mesh.skeleton is None:
        raise NoSkin("mesh carries no skin/skeleton data")
    vertex_anchored = system.anchor_vertex >= 0
    ids = system.anchor_vertex[vertex_anchored]
    system.anchor_pos[vertex_anchored] = lbs_points(
        mesh.positions[ids], [mesh.skin[v] for v in ids], mesh.skeleton)
    pmap.nb_a, pmap.nb_b, pmap.nb_weight = _neighbor_links(
        system.anchor_pos, pmap.delta)


# --- repair after topology changes ------------------------------------------


def segments_hit_box(a_pts, b_pts, box, margin=0.0):
    """Vectorized: does each segment have positive length inside the box?"""
    a_pts = np.atleast_2d(a_pts)
    b_pts = np.atleast_2d(b_pts)
    t0 = np.zeros(len(a_pts))
    t1 = np.ones(len(a_pts))
    alive = np.ones(len(a_pts), dtype=bool)
    for p in box.planes:
        da = a_pts @ p.normal - p.offset + margin
        db = b_pts @ p.normal - p.offset + margin
        alive &= ~((da >= 0) & (db >= 0))
        denom = np.where(da == db, 1.0, da - db)
        t = da / denom
        entering = (da >= 0) & (db < 0)
        leaving = (da < 0) & (db >= 0)
        t0 = np.where(entering, np.maximum(t0, t), t0)
        t1 = np.where(leaving, np.minimum(t1, t), t1)
    return alive & (t1 - t0 > 1e-12)


def assign_rim_vertices(mesh, system: ParticleSystem, pmap: ParticleMap,
                        rim_vids):
    """Link tear-created vertices to particles, as at generation time."""
    rim_vids = np.asarray(sorted(set(int(v) for v in rim_vids)), dtype=np.int64)
    if not len(rim_vids) or system.count == 0:
        return
    vpos = mesh.positions[rim_vids]
    dists = np.linalg.norm(vpos[:, None, :] - system.anchor_pos[None, :, :],
                           axis=2)  # (R, P)
    within = dists <= system.radius[None, :]
    ip, iv, iw = [], [], []
    for r in range(len(rim_vids)):
        for j in np.nonzero(within[r])[0]:
            ip.append(int(j))
            iv.append(int(rim_vids[r]))
            iw.append(float(influence_weight(dists[r, j], system.radius[j])))
    if ip:
        pmap.add_influence(ip, iv, iw)


def disconnect_links(mesh, system: ParticleSystem, pmap: ParticleMap,
                     boxes, rim_by_box=None, use_pruning=True):
    """Algorithm-4 link removal after a tear.

    Neighbor links whose anchor segment enters any tear box are cut;
    influence links whose (anchor, vertex) segment crosses a tear plane
    inside that box's band are cut.  The closest-rim pruning shortcut lets a
    particle skip a box when its nearest rim vertex is not influenced by it.
    """
    eps = mesh.eps_side
    # Neighbor links vs box interiors.
    if len(pmap.nb_a):
        A = system.anchor_pos[pmap.nb_a]
        B = system.anchor_pos[pmap.nb_b]
        cut_mask = np.zeros(len(pmap.nb_a), dtype=bool)
        for box in boxes:
            cut_mask |= segments_hit_box(A, B, box)
        if np.any(cut_mask):
            pmap.remove_neighbors(cut_mask)

    if not len(pmap.infl_vertex):
        return
    link_keys = None
    n_verts = len(mesh.positions)
    remove = np.zeros(len(pmap.infl_vertex), dtype=bool)
    for bi, box in enumerate(boxes):
        # Pruning shortcut first: it shrinks the link set the (much more
        # expensive) side tests below have to touch.
        idx = np.arange(len(pmap.infl_vertex))
        if use_pruning and rim_by_box is not None:
            rim = rim_by_box.get(bi, [])
            if rim:
                if link_keys is None:
                    link_keys = np.unique(pmap.infl_particle * n_verts
                                          + pmap.infl_vertex)
                rim = np.asarray(sorted(set(rim)), dtype=np.int64)
                dd = np.linalg.norm(
                    system.anchor_pos[:, None, :]
                    - mesh.positions[rim][None, :, :], axis=2)
                nearest = rim[np.argmin(dd, axis=1)]  # (P,)
                wanted = np.arange(system.count, dtype=np.int64) * n_verts \
                    + nearest
                allowed = np.isin(wanted, link_keys)
                idx = idx[allowed[pmap.infl_particle]]
        if not len(idx):
            continue
        anchors = system.anchor_pos[pmap.infl_particle[idx]]
        verts = mesh.positions[pmap.infl_vertex[idx]]
        plane = box.tear_plane
        sa = anchors @ plane.normal - plane.offset
        sv = verts @ plane.normal - plane.offset
        opp = ((sa > eps) & (sv < -eps)) | ((sa < -eps) & (sv > eps))
        if not np.any(opp):
            continue
        t = np.where(opp, sa / np.where(sa == sv, 1.0, sa - sv), 0.0)
        X = anchors + t[:, None] * (verts - anchors)
        band = opp
        for slot in (2, 3, 4, 5):  # entry, exit, top, bottom
            band &= box.planes[slot].signed_distance(X) <= eps
        remove[idx[band]] = True
    if np.any(remove):
        pmap.remove_influence(remove)


def _straddles_band(anchor_pos, vpos, boxes, eps):
    """Per anchor: does the (anchor, vpos) segment cross a tear plane inside
    that box's longitudinal band?"""
    out = np.zeros(len(anchor_pos), dtype=bool)
    for box in boxes:
        plane = box.tear_plane
        sa = anchor_pos @ plane.normal - plane.offset
        sv = float(vpos @ plane.normal - plane.offset)
        opp = ((sa > eps) & (sv < -eps)) | ((sa < -eps) & (sv > eps))
        if not np.any(opp):
            continue
        t = np.where(opp, sa / np.where(sa == sv, 1.0, sa - sv), 0.0)
        X = anchor_pos + t[:, None] * (vpos - anchor_pos)
        band = opp.copy()
        for slot in (2, 3, 4, 5):  # entry, exit, top, bottom
            band &= box.planes[slot].signed_distance(X) <= eps
        out |= band
    return out


def finalize_weights(mesh, system: ParticleSystem, pmap: ParticleMap,
                     previously_linked, boxes=()):
    """Renormalize per-vertex weights; vertices that lost every link are
    re-assigned to the nearest same-side particle within 2d, else pinned
    (rigid).  Candidates whose link would straddle a tear plane inside a
    box band are skipped so re-assignment cannot undo the disconnect."""
    linked = set(int(v) for v in pmap.infl_vertex)
    orphans = [v for v in previously_linked if v not in linked]
    if orphans and system.count:
        vpos = mesh.positions[np.asarray(orphans, dtype=np.int64)]
        dists = np.linalg.norm(vpos[:, None, :] - system.anchor_pos[None, :, :],
                               axis=2)
        ip, iv, iw = [], [], []
        for i, v in enumerate(orphans):
            allowed = dists[i] <= 2.0 * system.radius
            if boxes and np.any(allowed):
                allowed &= ~_straddles_band(system.anchor_pos, vpos[i],
                                            boxes, mesh.eps_side)
            if np.any(allowed):
                j = int(np.argmin(np.where(allowed, dists[i], np.inf)))
                ip.append(j)
                iv.append(int(v))
                iw.append(1.0)
            else:
                pmap.pinned_vertices.add(int(v))
        if ip:
            pmap.add_influence(ip, iv, iw)
    pmap.normalize()


def repair_after_tear(mesh, system: ParticleSystem, pmap: ParticleMap,
                      boxes, rim, use_pruning=True):
    """Full particle-map repair for one or more tear segments.

    rim: iterable of RimVertex (or (vertex, box_index) pairs).
    """
    rim_by_box = {}
    rim_vids = []
    for r in rim:
        vid, bi = (r.vertex, r.box_index) if hasattr(r, "vertex") else (r[0], r[1])
        rim_by_box.setdefault(bi, []).append(int(vid))
        rim_vids.append(int(vid))
    previously_linked = set(int(v) for v in pmap.infl_vertex)
    assign_rim_vertices(mesh, system, pmap, rim_vids)
    previously_linked |= set(int(v) for v in pmap.infl_vertex)
    disconnect_links(mesh, system, pmap, boxes, rim_by_box, use_pruning)
    finalize_weights(mesh, system, pmap, previously_linked, boxes)
    return pmap


def repair_after_cut(mesh, system: ParticleSystem, pmap: ParticleMap,
                     plane, cut_result):
    """Split the particle layer across a cut: links crossing the plane are
    removed, the rest partitioned by side, weights renormalized per side.

    Returns ((system_pos, map_pos), (system_neg, map_neg)).
    """
    eps = mesh.eps_side
    sd = system.anchor_pos @ plane.normal - plane.offset
    p_side = np.where(sd < -eps, -1, 1)  # On goes positive by convention

    out = []
    for side, vmap, submesh in (
            (1, cut_result.pos_vertex_map, cut_result.positive_mesh),
            (-1, cut_result.neg_vertex_map, cut_result.negative_mesh)):
        pids = np.nonzero(p_side == side)[0]
        pidx = np.full(system.count, -1, dtype=np.int64)
        pidx[pids] = np.arange(len(pids))
        sub = ParticleSystem(
            anchor_vertex=np.where(system.anchor_vertex[pids] >= 0,
                                   vmap[np.maximum(system.anchor_vertex[pids], 0)],
                                   -1),
            anchor_pos=system.anchor_pos[pids].copy(),
            rest_center=system.rest_center[pids].copy(),
            center=system.center[pids].copy(),
            velocity=system.velocity[pids].copy(),
            radius=system.radius[pids].copy(),
            spring_k=system.spring_k[pids].copy(),
            damping=system.damping[pids].copy(),
        )
        ip, iv, iw = [], [], []
        if len(pmap.infl_vertex):
            anchors = system.anchor_pos[pmap.infl_particle]
            verts_old = pmap.infl_vertex
            sv = mesh.positions[verts_old] @ plane.normal - plane.offset
            sa = anchors @ plane.normal - plane.offset
            crossing = ((sa > eps) & (sv < -eps)) | ((sa < -eps) & (sv > eps))
            keep = (~crossing) & (p_side[pmap.infl_particle] == side)
            for li in np.nonzero(keep)[0]:
                nv = int(vmap[verts_old[li]])
                if nv < 0:
                    continue
                ip.append(int(pidx[pmap.infl_particle[li]]))
                iv.append(nv)
                iw.append(float(pmap.infl_weight[li]))
        na, nb, nw = [], [], []
        for a, b, w in zip(pmap.nb_a, pmap.nb_b, pmap.nb_weight):
            a, b = int(a), int(b)
            if p_side[a] != side or p_side[b] != side:
                continue
            na.append(int(pidx[a]))
            nb.append(int(pidx[b]))
            nw.append(float(w))
        sub_map = ParticleMap(np.array(ip, dtype=np.int64),
                              np.array(iv, dtype=np.int64),
                              np.array(iw, dtype=np.float64),
                              np.array(na, dtype=np.int64),
                              np.array(nb, dtype=np.int64),
                              np.array(nw, dtype=np.float64),
                              delta=pmap.delta)
        sub_map.normalize()
        out.append((sub, sub_map))
    return out[0], out[1]


def spawn_slit_particles(mesh, system: ParticleSystem, pmap: ParticleMap,
                         rim, boxes, d_slit, eps_open, affected_vertices=None):
    """Auxiliary wound-opening particles around the tear slit.

    Rim vertices are grouped per box and tear-plane side, greedily clustered
    within d_slit; each cluster spawns one particle whose anchor is pushed
    eps_open along the tear-plane normal away from the slit.  The particles
    influence the tear-affected vertices on their own side.
    """
    eps = mesh.eps_side
    if affected_vertices is None:
        affected_vertices = [r.vertex for r in rim]
    affected = np.asarray(sorted(set(int(v) for v in affected_vertices)),
                          dtype=np.int64)
    new_ids = []
    k_def = float(np.median(system.spring_k)) if system.count else DEFAULT_SPRING_K
    c_def = float(np.median(system.damping)) if system.count else DEFAULT_DAMPING

    groups = {}
    for r in rim:
        plane = boxes[r.box_index].tear_plane
        sd = float(plane.signed_distance(mesh.positions[r.vertex]))
        side = -1 if sd < -eps else 1
        groups.setdefault((r.box_index, side), []).append(int(r.vertex))

    for (bi, side), vids in sorted(groups.items()):
        plane = boxes[bi].tear_plane
        vids = sorted(set(vids))
        pos = mesh.positions[np.asarray(vids, dtype=np.int64)]
        unassigned = list(range(len(vids)))
        while unassigned:
            seed = unassigned.pop(0)
            cluster = [seed]
            rest = []
            for i in unassigned:
                if np.linalg.norm(pos[i] - pos[seed]) <= d_slit:
                    cluster.append(i)
                else:
                    rest.append(i)
            unassigned = rest
            base = pos[cluster].mean(axis=0)
            anchor = base + side * eps_open * plane.normal
            pid = system.add(anchor_pos=anchor, rest_center=base,
                             radius=d_slit, spring_k=k_def, damping=c_def)
            new_ids.append(pid)
            # Influence the affected vertices on this side of the tear.
            if len(affected):
                apos = mesh.positions[affected]
                sv = apos @ plane.normal - plane.offset
                on_side = sv * side >= -eps
                dist = np.linalg.norm(apos - base, axis=1)
                reach = 2.0 * d_slit
                take = on_side & (dist <= reach)
                if np.any(take):
                    n_take = int(np.count_nonzero(take))
                    pmap.add_influence([pid] * n_take, affected[take],
                                       influence_weight(dist[take], reach))
    pmap.normalize()
    return new_ids


# --- serialization ------------------------------------------------------------


def map_to_json(system: ParticleSystem, pmap: ParticleMap, params=None):
    doc = {
        "params": params or {},
        "particles": [
            {"id": int(j),
             "anchor_vertex": int(system.anchor_vertex[j]),
             "anchor_pos": [float(x) for x in system.anchor_pos[j]]}
            for j in range(system.count)
        ],
        "influence": [[int(j), int(i), float(w)] for j, i, w in
                      zip(pmap.infl_particle, pmap.infl_vertex, pmap.infl_weight)],
        "neighbors": [[int(a), int(b), float(w)] for a, b, w in
                      zip(pmap.nb_a, pmap.nb_b, pmap.nb_weight)],
    }
    return json.dumps(doc, sort_keys=True)


def map_from_json(text, mesh=None):
    doc = json.loads(text)
    particles = doc["particles"]
    P = len(particles)
    anchor_vertex = np.array([p["anchor_vertex"] for p in particles], dtype=np.int64)
    anchor_pos = np.array([p["anchor_pos"] for p in particles],
                          dtype=np.float64).reshape(P, 3)
    params = doc.get("params", {})
    d = float(params.get("d", 1.0))
    system = ParticleSystem(
        anchor_vertex=anchor_vertex,
        anchor_pos=anchor_pos,
        rest_center=anchor_pos.copy(),
        center=anchor_pos.copy(),
        velocity=np.zeros((P, 3)),
        radius=np.full(P, d),
        spring_k=np.full(P, float(params.get("k", DEFAULT_SPRING_K))),
        damping=np.full(P, float(params.get("c", DEFAULT_DAMPING))),
    )
    infl = np.asarray(doc["influence"], dtype=np.float64).reshape(-1, 3)
    nbs = np.asarray(doc["neighbors"], dtype=np.float64).reshape(-1, 3)
    pmap = ParticleMap(
        infl[:, 0].astype(np.int64), infl[:, 1].astype(np.int64), infl[:, 2],
        nbs[:, 0].astype(np.int64), nbs[:, 1].astype(np.int64), nbs[:, 2],
        delta=float(params.get("delta", 1.0)))
    return system, pmap, params
