"""Indexed triangle mesh with attributes, spatial sections, and OBJ I/O."""
from __future__ import annotations

import io
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidWeights, NonManifold, ParseError, StaleSections


@dataclass
class MeshDelta:
    """One epoch's worth of mesh mutation.

    added_vertices carry full attributes plus provenance: the parent face id
    and barycentric coordinates the vertex was interpolated from.
    Applying a delta at epoch n yields the mesh at epoch n+1.
    """

    epoch: int
    added_positions: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    added_normals: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    added_uvs: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    added_skin: list | None = None          # per new vertex: [(bone, w), ...]
    provenance: list = field(default_factory=list)  # (face_id, (b0, b1, b2))
    removed_face_ids: list = field(default_factory=list)
    added_faces: list = field(default_factory=list)  # (a, b, c) triples
    # Set by TriMesh.apply_delta: ids assigned to the added faces/vertices.
    first_added_face_id: int | None = None
    first_added_vertex_id: int | None = None

    @property
    def empty(self):
        return (len(self.added_faces) == 0 and len(self.removed_face_ids) == 0
                and len(self.added_positions) == 0)

    def to_json(self):
        d = {
            "epoch": self.epoch,
            "added_positions": self.added_positions.tolist(),
            "added_normals": self.added_normals.tolist(),
            "added_uvs": self.added_uvs.tolist(),
            "provenance": [[int(f), list(map(float, b))] for f, b in self.provenance],
            "removed_face_ids": [int(f) for f in self.removed_face_ids],
            "added_faces": [[int(a), int(b), int(c)] for a, b, c in self.added_faces],
        }
        if self.added_skin is not None:
            d["added_skin"] = [[[int(b), float(w)] for b, w in sk]
                               for sk in self.added_skin]
        return d

    @classmethod
    def from_json(cls, d):
        skin = None
        if "added_skin" in d:
            skin = [[(int(b), float(w)) for b, w in sk] for sk in d["added_skin"]]
        return cls(
            epoch=int(d["epoch"]),
            added_positions=np.asarray(d["added_positions"], dtype=np.float64).reshape(-1, 3),
            added_normals=np.asarray(d["added_normals"], dtype=np.float64).reshape(-1, 3),
            added_uvs=np.asarray(d["added_uvs"], dtype=np.float64).reshape(-1, 2),
            added_skin=skin,
            provenance=[(int(f), tuple(b)) for f, b in d["provenance"]],
            removed_face_ids=[int(f) for f in d["removed_face_ids"]],
            added_faces=[tuple(int(x) for x in f) for f in d["added_faces"]],
        )


class TriMesh:
    """Triangle mesh with per-vertex position/normal/uv/skin attributes.

    Faces are tombstoned (face_alive=False) rather than compacted while
    interacting; compaction happens on save.  One mesh is owned by one
    session; use copy() to hand read-only snapshots to other threads.
    """

    def __init__(self, positions, faces, normals=None, uvs=None, skin=None,
                 skeleton=None, validate=True):
        self.positions = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
        self.faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
        self.face_alive = np.ones(len(self.faces), dtype=bool)
        n = len(self.positions)
        if normals is None or not len(normals):
            normals = self._vertex_normals(self.positions, self.faces, n)
        self.normals = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
        if uvs is None or not len(uvs):
            uvs = np.zeros((n, 2))
        self.uvs = np.asarray(uvs, dtype=np.float64).reshape(-1, 2)
        self.skin = skin  # None or list (len n) of [(bone, w), ...]
        self.skeleton = skeleton
        self.epoch = 0
        if len(self.positions):
            lo, hi = self.positions.min(axis=0), self.positions.max(axis=0)
            self.base_diag = float(np.linalg.norm(hi - lo))
        else:
            self.base_diag = 0.0
        if validate:
            self.validate()

    # -- derived quantities ---------------------------------------------

    @property
    def eps_side(self):
        """Scale-invariant On-tolerance: 1e-6 x original bbox diagonal."""
        return 1e-6 * self.base_diag

    @property
    def eps_area(self):
        return 1e-12 * self.base_diag ** 2

    def live_face_ids(self):
        return np.nonzero(self.face_alive)[0]

    def live_faces(self):
        return self.faces[self.face_alive]

    def face_areas(self, face_ids=None):
        f = self.faces if face_ids is None else self.faces[face_ids]
        p = self.positions
        return 0.5 * np.linalg.norm(
            np.cross(p[f[:, 1]] - p[f[:, 0]], p[f[:, 2]] - p[f[:, 0]]), axis=1)

    def total_area(self):
        return float(self.face_areas(self.live_face_ids()).sum())

    def aabb(self):
        used = np.unique(self.live_faces())
        p = self.positions[used] if len(used) else self.positions
        return p.min(axis=0), p.max(axis=0)

    @staticmethod
    def _vertex_normals(positions, faces, n):
        fn = np.cross(positions[faces[:, 1]] - positions[faces[:, 0]],
                      positions[faces[:, 2]] - positions[faces[:, 0]])
        out = np.zeros((n, 3))
        for k in range(3):
            np.add.at(out, faces[:, k], fn)
        norms = np.linalg.norm(out, axis=1)
        norms[norms == 0] = 1.0
        return out / norms[:, None]

    # -- invariants -------------------------------------------------------

    def validate(self):
        if self.faces.size and self.faces.max() >= len(self.positions):
            raise ParseError("face index out of range")
        f = self.faces[self.face_alive]
        if len(f):
            if np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2])
                      | (f[:, 0] == f[:, 2])):
                raise ParseError("face repeats a vertex")
        self.check_manifold()
        if self.skin is not None:
            for i, sk in enumerate(self.skin):
                if not sk:
                    continue
                s = sum(w for _, w in sk)
                if abs(s - 1.0) > 1e-6:
                    raise InvalidWeights(f"vertex {i} weights sum to {s}")

    def check_manifold(self, face_ids=None):
        """Raise NonManifold when any edge is shared by >2 live faces."""
        f = self.live_faces() if face_ids is None else self.faces[face_ids]
        if not len(f):
            return
        edges = np.sort(np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]]),
                        axis=1)
        _, counts = np.unique(edges, axis=0, return_counts=True)
        if np.any(counts > 2):
            raise NonManifold("edge shared by more than 2 faces")

    # -- mutation ----------------------------------------------------------

    def apply_delta(self, delta: MeshDelta):
        if delta.epoch != self.epoch:
            raise StaleSections(f"delta epoch {delta.epoch} != mesh epoch {self.epoch}")
        delta.first_added_vertex_id = len(self.positions)
        delta.first_added_face_id = len(self.faces)
        if len(delta.added_positions):
            self.positions = np.concatenate([self.positions, delta.added_positions])
            self.normals = np.concatenate([self.normals, delta.added_normals])
            self.uvs = np.concatenate([self.uvs, delta.added_uvs])
            if self.skin is not None:
                added = delta.added_skin or [[] for _ in range(len(delta.added_positions))]
                self.skin = self.skin + [list(sk) for sk in added]
        if delta.removed_face_ids:
            self.face_alive[np.asarray(delta.removed_face_ids, dtype=np.int64)] = False
        if delta.added_faces:
            newf = np.asarray(delta.added_faces, dtype=np.int64).reshape(-1, 3)
            self.faces = np.concatenate([self.faces, newf])
            self.face_alive = np.concatenate(
                [self.face_alive, np.ones(len(newf), dtype=bool)])
        self.epoch += 1

    def copy(self):
        m = TriMesh.__new__(TriMesh)
        m.positions = self.positions.copy()
        m.faces = self.faces.copy()
        m.face_alive = self.face_alive.copy()
        m.normals = self.normals.copy()
        m.uvs = self.uvs.copy()
        m.skin = None if self.skin is None else [list(s) for s in self.skin]
        m.skeleton = self.skeleton
        m.epoch = self.epoch
        m.base_diag = self.base_diag
        return m


# --- OBJ / sidecar I/O -------------------------------------------------------


def _parse_index(token, count, line_no):
    try:
        idx = int(token)
    except ValueError:
        raise ParseError(f"bad index {token!r}", line_no)
    if idx < 0:
        idx = count + idx
    else:
        idx -= 1
    if idx < 0 or idx >= count:
        raise ParseError(f"index {token} out of range", line_no)
    return idx


def load_mesh(obj_bytes, sidecar_bytes=None):
    """Parse the OBJ subset (v/vn/vt/f) plus an optional skin sidecar.

    Quad and larger faces are fan-triangulated.  Normals are recomputed from
    faces when absent; uvs default to (0, 0).  Per-corner vt/vn references
    are folded onto the vertex (last reference wins).
    """
    if isinstance(obj_bytes, bytes):
        text = obj_bytes.decode("utf-8")
    else:
        text = obj_bytes
    positions, raw_normals, raw_uvs, faces = [], [], [], []
    v_normal, v_uv = {}, {}

    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise ParseError("v needs 3 coordinates", line_no)
            try:
                positions.append([float(x) for x in parts[1:4]])
            except ValueError:
                raise ParseError("bad vertex coordinate", line_no)
        elif tag == "vn":
            raw_normals.append([float(x) for x in parts[1:4]])
        elif tag == "vt":
            raw_uvs.append([float(x) for x in parts[1:3]])
        elif tag == "f":
            if len(parts) < 4:
                raise ParseError("f needs at least 3 vertices", line_no)
            corner_ids = []
            for tok in parts[1:]:
                fields = tok.split("/")
                vi = _parse_index(fields[0], len(positions), line_no)
                if len(fields) > 1 and fields[1]:
                    v_uv[vi] = _parse_index(fields[1], len(raw_uvs), line_no)
                if len(fields) > 2 and fields[2]:
                    v_normal[vi] = _parse_index(fields[2], len(raw_normals), line_no)
                corner_ids.append(vi)
            for k in range(1, len(corner_ids) - 1):  # fan triangulation
                faces.append([corner_ids[0], corner_ids[k], corner_ids[k + 1]])
        else:
            warnings.warn(f"ignoring OBJ directive {tag!r} at line {line_no}")

    if not positions:
        raise ParseError("no vertices in OBJ input")

    n = len(positions)
    normals = None
    if v_normal:
        normals = np.zeros((n, 3))
        for vi, ni in v_normal.items():
            normals[vi] = raw_normals[ni]
        lens = np.linalg.norm(normals, axis=1)
        # Only rescale normals that actually need it: dividing unit vectors
        # by their ~1.0 norm perturbs the last bit, so a save/load cycle
        # would not be idempotent otherwise.
        lens[np.abs(lens - 1.0) <= 1e-9] = 1.0
        lens[lens == 0] = 1.0
        normals = normals / lens[:, None]
    uvs = None
    if v_uv:
        uvs = np.zeros((n, 2))
        for vi, ti in v_uv.items():
            uvs[vi] = raw_uvs[ti]

    skin = None
    skeleton = None
    if sidecar_bytes is not None:
        skin, skeleton = _parse_sidecar(sidecar_bytes, n)

    return TriMesh(positions, faces, normals=normals, uvs=uvs,
                   skin=skin, skeleton=skeleton)


def _parse_sidecar(sidecar_bytes, n_vertices):
    from .skinning import Skeleton

    if isinstance(sidecar_bytes, bytes):
        sidecar_bytes = sidecar_bytes.decode("utf-8")
    try:
        doc = json.loads(sidecar_bytes)
    except json.JSONDecodeError as e:
        raise ParseError(f"sidecar: {e}")
    skeleton = None
    if doc.get("bones"):
        parents = [int(b["parent"]) for b in doc["bones"]]
        binds = np.array([np.asarray(b["bind_matrix"], dtype=np.float64).reshape(4, 4)
                          for b in doc["bones"]])
        names = [b.get("name", f"bone{i}") for i, b in enumerate(doc["bones"])]
        skeleton = Skeleton(parents=parents, bind=binds, names=names)
    skin = [[] for _ in range(n_vertices)]
    for entry in doc.get("weights", []):
        vi = int(entry["v"])
        if vi < 0 or vi >= n_vertices:
            raise ParseError(f"sidecar weight for missing vertex {vi}")
        bones = [(int(b), float(w)) for b, w in entry["bones"]]
        s = sum(w for _, w in bones)
        if abs(s - 1.0) > 1e-1:
            raise InvalidWeights(f"vertex {vi} weights sum to {s}")
        if abs(s - 1.0) > 1e-3:
            warnings.warn(f"renormalizing skin weights of vertex {vi} (sum {s})")
        bones = [(b, w / s) for b, w in bones]
        skin[vi] = bones
    return skin, skeleton


def save_mesh(mesh: TriMesh):
    """Serialize to OBJ (dead faces compacted away) + sidecar when skinned.

    Returns (obj_bytes, sidecar_bytes_or_None).
    """
    faces = mesh.live_faces()
    used = np.unique(faces) if len(faces) else np.arange(0)
    remap = np.full(len(mesh.positions), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))

    buf = io.StringIO()
    # Shortest round-trip float formatting keeps reload bit-exact, so
    # canonical hashes survive a save/load cycle.
    for p in mesh.positions[used]:
        buf.write(f"v {float(p[0])!r} {float(p[1])!r} {float(p[2])!r}\n")
    for nrm in mesh.normals[used]:
        buf.write(f"vn {float(nrm[0])!r} {float(nrm[1])!r} "
                  f"{float(nrm[2])!r}\n")
    for uv in mesh.uvs[used]:
        buf.write(f"vt {float(uv[0])!r} {float(uv[1])!r}\n")
    for f in faces:
        a, b, c = (remap[f] + 1)
        buf.write(f"f {a}/{a}/{a} {b}/{b}/{b} {c}/{c}/{c}\n")
    obj_bytes = buf.getvalue().encode("utf-8")

    sidecar = None
    if mesh.skin is not None:
        bones = []
        if mesh.skeleton is not None:
            for i in range(len(mesh.skeleton.parents)):
                bones.append({
                    "name": mesh.skeleton.names[i],
                    "parent": mesh.skeleton.parents[i],
                    "bind_matrix": [float(x) for x in mesh.skeleton.bind[i].ravel()],
                })
        weights = []
        for new_id, old_id in enumerate(used):
            sk = mesh.skin[old_id]
            if sk:
                weights.append({"v": int(new_id),
                                "bones": [[int(b), float(w)] for b, w in sk]})
        sidecar = json.dumps({"bones": bones, "weights": weights},
                             sort_keys=True).encode("utf-8")
    return obj_bytes, sidecar


# --- mesh sections -----------------------------------------------------------


@dataclass
class MeshSection:
    aabb_min: np.ndarray
    aabb_max: np.ndarray
    face_ids: np.ndarray
    vertex_ids: np.ndarray  # as of section build time; diagnostic only


class MeshSections:
    """Axis-aligned spatial bins of faces for candidate culling.

    A face straddling a bin boundary appears in every section whose box it
    touches.  Sections track the mesh epoch; apply_delta keeps them current
    by re-binning only the delta's faces.
    """

    def __init__(self, sections, epoch, target):
        self.sections = sections
        self.epoch = epoch
        self.target = target

    def apply_delta(self, mesh: TriMesh, delta: MeshDelta):
        """Re-bin only the faces the delta touched; mesh already mutated."""
        if delta.removed_face_ids:
            dead_mask = np.zeros(len(mesh.faces), dtype=bool)
            dead_mask[np.asarray(delta.removed_face_ids, dtype=np.int64)] = True
            for s in self.sections:
                if len(s.face_ids):
                    hit = dead_mask[s.face_ids]
                    if hit.any():
                        s.face_ids = s.face_ids[~hit]
        if delta.added_faces:
            first_new = delta.first_added_face_id
            newf = mesh.faces[first_new:first_new + len(delta.added_faces)]
            p = mesh.positions
            fmin = np.minimum.reduce([p[newf[:, k]] for k in range(3)])
            fmax = np.maximum.reduce([p[newf[:, k]] for k in range(3)])
            s_lo = np.stack([s.aabb_min for s in self.sections])  # (S, 3)
            s_hi = np.stack([s.aabb_max for s in self.sections])
            overlap = (np.all(fmin[:, None, :] <= s_hi[None, :, :], axis=2)
                       & np.all(fmax[:, None, :] >= s_lo[None, :, :], axis=2))
            unplaced = ~overlap.any(axis=1)
            if np.any(unplaced):
                # Grow the nearest section to cover each stray face.
                centers = (s_lo + s_hi) / 2
                c = (fmin[unplaced] + fmax[unplaced]) / 2
                nearest = np.argmin(np.linalg.norm(
                    c[:, None, :] - centers[None, :, :], axis=2), axis=1)
                for row, si in zip(np.nonzero(unplaced)[0], nearest):
                    s = self.sections[int(si)]
                    s.aabb_min = np.minimum(s.aabb_min, fmin[row])
                    s.aabb_max = np.maximum(s.aabb_max, fmax[row])
                    overlap[row, si] = True
            new_ids = np.arange(first_new, first_new + len(newf))
            for si, s in enumerate(self.sections):
                rows = overlap[:, si]
                if rows.any():
                    s.face_ids = np.concatenate([s.face_ids, new_ids[rows]])
                    # vertex_ids is diagnostic only (see MeshSection) and is
                    # left at its build-time value here.
        self.epoch = mesh.epoch


def build_sections(mesh: TriMesh, target_faces_per_section=256):
    """Recursive median split along the longest AABB axis until <= target.

    After the split, each face is added to every section whose box it
    touches (overlap duplicates are required for cross-section tears).
    """
    if target_faces_per_section < 1:
        raise ValueError("target must be >= 1")
    live = mesh.live_face_ids()
    p = mesh.positions
    f = mesh.faces
    centroids = (p[f[:, 0]] + p[f[:, 1]] + p[f[:, 2]]) / 3.0

    leaves = []

    def split(ids):
        if len(ids) <= target_faces_per_section:
            leaves.append(ids)
            return
        c = centroids[ids]
        axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
        order = ids[np.argsort(c[:, axis], kind="stable")]
        mid = len(order) // 2
        split(order[:mid])
        split(order[mid:])

    split(live)

    fmin = np.minimum.reduce([p[f[:, k]] for k in range(3)])
    fmax = np.maximum.reduce([p[f[:, k]] for k in range(3)])

    sections = []
    for ids in leaves:
        if not len(ids):
            continue
        lo = fmin[ids].min(axis=0)
        hi = fmax[ids].max(axis=0)
        sections.append(MeshSection(lo, hi, ids.copy(), np.unique(f[ids])))
    # Overlap pass: a face touching a foreign box joins that section too.
    for s in sections:
        touch = live[np.all(fmin[live] <= s.aabb_max, axis=1)
                     & np.all(fmax[live] >= s.aabb_min, axis=1)]
        if len(touch) > len(s.face_ids):
            s.face_ids = np.union1d(s.face_ids, touch)
            s.vertex_ids = np.unique(f[s.face_ids])
    return MeshSections(sections, mesh.epoch, target_faces_per_section)


def sections_touching(sections: MeshSections, mesh: TriMesh, boxes):
    """Conservative candidate faces: union of sections overlapping any box.

    Superset guarantee: every face with material inside any box is returned.
    """
    if sections.epoch != mesh.epoch:
        raise StaleSections(
            f"sections at epoch {sections.epoch}, mesh at {mesh.epoch}")
    out = []
    for box in boxes:
        lo, hi = box.aabb(margin=mesh.eps_side)
        for s in sections.sections:
            if np.all(lo <= s.aabb_max) and np.all(hi >= s.aabb_min):
                out.append(s.face_ids)
    if not out:
        return np.zeros(0, dtype=np.int64)
    cand = np.unique(np.concatenate(out))
    return cand[mesh.face_alive[cand]]
