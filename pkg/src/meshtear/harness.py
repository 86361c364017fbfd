"""Trajectory playback drivers with phase timing, benchmark comparison
tables, and delta-log replay."""
from __future__ import annotations

import json
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import particles as prt
from . import shapes
from .cut import cut, cut_plane_from_samples
from .errors import ParseError
from .geometry import Plane, build_tear_boxes
from .mesh import MeshDelta, TriMesh, build_sections, load_mesh, save_mesh
from .skinning import interpolate_skin_bary
from .tear import check_local_manifold, second_pass, tear_segment

PHASES = ("perform_tear", "update_particles", "disconnect_particles",
          "calculate_boneweights", "update_mesh")

# Reference totals (ms) from the original measurements, by size class.
PAPER_TEAR_TOTALS_MS = (3.25, 11.19, 18.65)
PAPER_CUT_TOTALS_MS = (12.0, 17.29, 13.49)


@dataclass
class Trajectory:
    """An ordered scalpel recording: one (tip, end) segment per sample."""

    mode: str                 # "tear" | "cut"
    width: float
    times: np.ndarray         # (N,) ms, strictly increasing
    tips: np.ndarray          # (N, 3)
    ends: np.ndarray          # (N, 3)

    def __post_init__(self):
        if self.mode not in ("tear", "cut"):
            raise ParseError(f"trajectory mode must be tear|cut, got {self.mode!r}")
        if len(self.times) < 2:
            raise ParseError("trajectory needs at least 2 samples")
        if np.any(np.diff(self.times) <= 0):
            raise ParseError("trajectory t_ms must be strictly increasing")

    @classmethod
    def from_json(cls, text):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as e:
            raise ParseError(f"trajectory: {e}")
        try:
            samples = doc["samples"]
            times = np.array([s["t_ms"] for s in samples], dtype=np.float64)
            tips = np.array([s["tip"] for s in samples],
                            dtype=np.float64).reshape(-1, 3)
            ends = np.array([s["end"] for s in samples],
                            dtype=np.float64).reshape(-1, 3)
            return cls(mode=doc["mode"], width=float(doc.get("width", 0.0)),
                       times=times, tips=tips, ends=ends)
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(f"trajectory: {e}")

    def to_json(self):
        return json.dumps({
            "mode": self.mode,
            "width": self.width,
            "samples": [{"t_ms": float(t), "tip": [float(x) for x in tip],
                         "end": [float(x) for x in end]}
                        for t, tip, end in zip(self.times, self.tips, self.ends)],
        }, sort_keys=True)


@dataclass
class PhaseReport:
    """Per-segment phase timings plus mesh statistics."""

    segments: list = field(default_factory=list)
    mesh_stats: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def add_segment(self, timings_ms):
        entry = {name: float(timings_ms.get(name, 0.0)) for name in PHASES}
        entry["total_ms"] = sum(entry[name] for name in PHASES)
        self.segments.append(entry)
        return entry

    def totals(self):
        out = {name: sum(s[name] for s in self.segments) for name in PHASES}
        out["total_ms"] = sum(s["total_ms"] for s in self.segments)
        return out

    def to_json(self):
        return json.dumps({"segments": self.segments, "totals": self.totals(),
                           "mesh_stats": self.mesh_stats, **self.extra},
                          indent=2, sort_keys=True)


class _Timer:
    def __init__(self):
        self.ms = {}

    def run(self, phase, fn, *args, **kwargs):
        t0 = time.perf_counter()
        out = fn(*args, **kwargs)
        self.ms[phase] = self.ms.get(phase, 0.0) + (time.perf_counter() - t0) * 1e3
        return out


def straight_stroke(mesh: TriMesh, n_segments=3, span=0.6):
    """A straight scalpel path across the top of the mesh, blade vertical.

    Tips travel along x at mid-height, ends above the mesh, so every segment
    box intersects the upper surface.  Used by benches and as a default.
    """
    lo, hi = mesh.aabb()
    c = (lo + hi) / 2
    dx = (hi[0] - lo[0]) * span / 2
    dz = hi[2] - lo[2]
    n = n_segments + 1
    xs = np.linspace(c[0] - dx, c[0] + dx, n)
    tips = np.stack([xs, np.full(n, c[1]), np.full(n, c[2])], axis=1)
    ends = tips + np.array([0.0, 0.0, 1.25 * dz])
    times = np.arange(n, dtype=np.float64) * 16.0
    return times, tips, ends


def resolve_pending_skin(mesh: TriMesh, result):
    """Interpolate skin weights for this segment's new vertices and record
    them into the delta so replay reproduces the skin byte-exactly."""
    if mesh.skin is None or not result.pending_skin:
        return
    first = result.delta.first_added_vertex_id
    for vid, fid, bary in result.pending_skin:
        corners = mesh.faces[fid]
        sk = interpolate_skin_bary([mesh.skin[int(v)] for v in corners], bary)
        mesh.skin[vid] = list(sk)
        result.delta.added_skin[vid - first] = list(sk)


def time_tear_stroke(mesh: TriMesh, sections, system, pmap, tips, ends, width,
                     use_pruning=True, spring_params=None):
    """Run a whole tear stroke with per-phase timing.

    Returns (PhaseReport, boxes, delta log).  The mesh, sections, and
    particle map are updated in place.
    """
    boxes = build_tear_boxes(tips, ends, width)
    report = PhaseReport()
    deltas = []
    for k, box in enumerate(boxes):
        t = _Timer()

        def perform_tear():
            res = tear_segment(mesh, sections, box, box_index=k)
            second_pass(mesh, res, box)
            check_local_manifold(mesh, res.affected_vertices)
            return res

        res = t.run("perform_tear", perform_tear)
        rim_vids = [r.vertex for r in res.rim]
        previously_linked = set(int(v) for v in pmap.infl_vertex)
        t.run("update_particles",
              prt.assign_rim_vertices, mesh, system, pmap, rim_vids)
        previously_linked |= set(int(v) for v in pmap.infl_vertex)
        t.run("disconnect_particles",
              prt.disconnect_links, mesh, system, pmap, [box],
              {0: rim_vids}, use_pruning)
        t.run("update_particles",
              prt.finalize_weights, mesh, system, pmap, previously_linked,
              [box])

        def boneweights():
            resolve_pending_skin(mesh, res)
            if mesh.skin is not None and mesh.skeleton is not None:
                prt.update_skinned_anchors(mesh, system, pmap)

        t.run("calculate_boneweights", boneweights)

        def update_mesh():
            if not res.delta.empty:
                sections.apply_delta(mesh, res.delta)
                deltas.append(res.delta)
            if res.second_delta is not None and not res.second_delta.empty:
                sections.apply_delta(mesh, res.second_delta)
                deltas.append(res.second_delta)

        t.run("update_mesh", update_mesh)
        report.add_segment(t.ms)
    report.mesh_stats = {
        "vertices": int(len(np.unique(mesh.live_faces()))
                        if len(mesh.live_faces()) else 0),
        "faces": int(np.count_nonzero(mesh.face_alive)),
        "particles": int(system.count),
    }
    return report, boxes, deltas


def replay_deltas(mesh: TriMesh, deltas):
    """Re-apply a delta log to a fresh base mesh (deterministic replay)."""
    for d in deltas:
        mesh.apply_delta(d if isinstance(d, MeshDelta) else MeshDelta.from_json(d))
    return mesh


def write_delta_log(deltas, path):
    Path(path).write_text(json.dumps([d.to_json() for d in deltas],
                                     sort_keys=True))


def load_delta_log(path):
    return [MeshDelta.from_json(d) for d in json.loads(Path(path).read_text())]


# --- file-level drivers -------------------------------------------------------


def _load_mesh_file(mesh_path):
    mesh_path = Path(mesh_path)
    sidecar = mesh_path.with_suffix(mesh_path.suffix + ".skin.json")
    return load_mesh(mesh_path.read_bytes(),
                     sidecar.read_bytes() if sidecar.exists() else None)


def _write_mesh_file(mesh, out_path):
    obj_bytes, sidecar = save_mesh(mesh)
    out_path = Path(out_path)
    out_path.write_bytes(obj_bytes)
    if sidecar is not None:
        out_path.with_suffix(out_path.suffix + ".skin.json").write_bytes(sidecar)


def run_tear(mesh_path, trajectory_path, width=None, seed=0, out_path=None,
             report_path=None, sections_target=256, use_pruning=True):
    """Tear playback: mesh + trajectory in, torn mesh + report + logs out."""
    mesh = _load_mesh_file(mesh_path)
    traj = Trajectory.from_json(Path(trajectory_path).read_text())
    if traj.mode != "tear":
        raise ParseError("run_tear requires a tear-mode trajectory")
    w = traj.width if width is None else float(width)

    sections = build_sections(mesh, sections_target)
    params = prt.default_params(mesh.base_diag, seed=seed)
    system, pmap = prt.generate_particles(
        mesh, params["d"], params["delta"], params["poisson_r"], seed)

    report, boxes, deltas = time_tear_stroke(
        mesh, sections, system, pmap, traj.tips, traj.ends, w,
        use_pruning=use_pruning)
    report.extra["seed"] = seed
    report.extra["width"] = w

    out_path = Path(out_path) if out_path else Path(str(mesh_path) + ".torn.obj")
    _write_mesh_file(mesh, out_path)
    write_delta_log(deltas, str(out_path) + ".deltalog.json")
    Path(str(out_path) + ".particles.json").write_text(
        prt.map_to_json(system, pmap, params))
    if report_path:
        Path(report_path).write_text(report.to_json())
    return report, out_path


def parse_plane_arg(text):
    """--plane a,b,c,d meaning the plane n.x = d with n = (a, b, c)."""
    try:
        a, b, c, d = (float(x) for x in text.split(","))
    except ValueError:
        raise ParseError(f"bad plane spec {text!r}, want a,b,c,d")
    n = np.array([a, b, c])
    ln = np.linalg.norm(n)
    if ln == 0:
        raise ParseError("plane normal must be nonzero")
    return Plane(n / ln, d / ln)


def run_cut(mesh_path, plane=None, trajectory_path=None, out_prefix=None,
            report_path=None):
    """Plane-cut playback: writes <prefix>.pos.obj and <prefix>.neg.obj."""
    mesh = _load_mesh_file(mesh_path)
    if plane is None:
        if trajectory_path is None:
            raise ParseError("cut needs --plane or --trajectory")
        traj = Trajectory.from_json(Path(trajectory_path).read_text())
        if traj.mode != "cut":
            raise ParseError("run_cut requires a cut-mode trajectory")
        plane = cut_plane_from_samples(traj.tips[0], traj.tips[-1],
                                       traj.ends[-1])
    elif isinstance(plane, str):
        plane = parse_plane_arg(plane)

    t0 = time.perf_counter()
    result = cut(mesh, plane)
    elapsed_ms = (time.perf_counter() - t0) * 1e3

    if not len(result.negative_mesh.faces) or not len(result.positive_mesh.faces):
        warnings.warn("cutting plane misses the mesh; one output is empty")

    prefix = Path(out_prefix) if out_prefix else Path(str(mesh_path))
    pos_path = Path(str(prefix) + ".pos.obj")
    neg_path = Path(str(prefix) + ".neg.obj")
    _write_mesh_file(result.positive_mesh, pos_path)
    _write_mesh_file(result.negative_mesh, neg_path)

    report = {
        "cut_ms": elapsed_ms,
        "intersection_points": result.intersection_count,
        "positive": {"vertices": len(result.positive_mesh.positions),
                     "faces": len(result.positive_mesh.faces)},
        "negative": {"vertices": len(result.negative_mesh.positions),
                     "faces": len(result.negative_mesh.faces)},
    }
    if report_path:
        Path(report_path).write_text(json.dumps(report, indent=2, sort_keys=True))
    return report, result, (pos_path, neg_path)


def run_particles(mesh_path, d, delta, poisson_r, seed, out_path):
    """Generate a particle map for a mesh and write it as JSON."""
    mesh = _load_mesh_file(mesh_path)
    system, pmap = prt.generate_particles(mesh, d, delta, poisson_r, seed)
    params = {"d": d, "delta": delta, "poisson_r": poisson_r, "seed": seed,
              "k": prt.DEFAULT_SPRING_K, "c": prt.DEFAULT_DAMPING}
    Path(out_path).write_text(prt.map_to_json(system, pmap, params))
    return system, pmap


# --- benchmark ----------------------------------------------------------------


def _bench_mesh(case):
    if "mesh" in case and isinstance(case["mesh"], dict):
        return shapes.by_spec(case["mesh"])
    return _load_mesh_file(case["mesh_path"])


def _bench_trajectory(case, mesh):
    if "trajectory" in case:
        return Trajectory.from_json(json.dumps(case["trajectory"]))
    n_seg = int(case.get("auto_stroke_segments", 3))
    times, tips, ends = straight_stroke(mesh, n_seg)
    width = float(case.get("width", 0.05 * mesh.base_diag))
    return Trajectory(mode="tear", width=width, times=times, tips=tips,
                      ends=ends)


def bench_case(case, repeats, seed=0):
    """Run one manifest case `repeats` times; returns the result row."""
    mode = case.get("mode", "tear")
    totals = []
    phase_samples = {name: [] for name in PHASES}
    row = {"name": case.get("name", "case"), "mode": mode,
           "repeats": repeats}
    for _ in range(max(1, repeats)):
        mesh = _bench_mesh(case)
        if mode == "tear":
            traj = _bench_trajectory(case, mesh)
            sections = build_sections(mesh, int(case.get("sections", 256)))
            params = prt.default_params(mesh.base_diag, seed=seed)
            system, pmap = prt.generate_particles(
                mesh, params["d"], params["delta"], params["poisson_r"], seed)
            report, _, _ = time_tear_stroke(mesh, sections, system, pmap,
                                            traj.tips, traj.ends, traj.width)
            n_seg = max(1, len(report.segments))
            per_seg = report.totals()
            totals.append(per_seg["total_ms"] / n_seg)
            for name in PHASES:
                phase_samples[name].append(per_seg[name] / n_seg)
            row["faces"] = report.mesh_stats["faces"]
            row["particles"] = report.mesh_stats["particles"]
        elif mode == "cut":
            plane = (parse_plane_arg(case["plane"])
                     if isinstance(case.get("plane"), str)
                     else Plane(np.asarray(case.get("plane_normal", [1, 0, 0]),
                                           dtype=np.float64),
                                float(case.get("plane_offset", 0.0))))
            row["faces"] = int(np.count_nonzero(mesh.face_alive))
            t0 = time.perf_counter()
            result = cut(mesh, plane)
            totals.append((time.perf_counter() - t0) * 1e3)
            row["intersection_points"] = result.intersection_count
        else:
            raise ParseError(f"unknown bench mode {mode!r}")
    arr = np.array(totals)
    row.update(median_ms=float(np.median(arr)), min_ms=float(arr.min()),
               max_ms=float(arr.max()))
    if mode == "tear":
        row["phases_median_ms"] = {name: float(np.median(phase_samples[name]))
                                   for name in PHASES}
    if "paper_total_ms" in case:
        row["paper_total_ms"] = float(case["paper_total_ms"])
    if "budget_ms" in case:
        row["budget_ms"] = float(case["budget_ms"])
        row["pass"] = bool(row["median_ms"] <= row["budget_ms"])
    return row


def run_bench(manifest_path, repeats=None, out_path=None):
    """Run every case in a bench manifest; returns the comparison table."""
    try:
        manifest = json.loads(Path(manifest_path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ParseError(f"manifest: {e}")
    reps = int(repeats if repeats is not None else manifest.get("repeats", 3))
    rows = [bench_case(case, reps, seed=int(manifest.get("seed", 0)))
            for case in manifest.get("cases", [])]
    table = {
        "repeats": reps,
        "rows": rows,
        "note": ("the update_mesh phase covers delta finalization and "
                 "section refresh; the reference timings' equivalent phase "
                 "included a GPU buffer upload and is not strictly comparable"),
    }
    if out_path:
        Path(out_path).write_text(json.dumps(table, indent=2, sort_keys=True))
    return table


def format_bench_table(table):
    """Human-readable fixed-width rendering of a bench table."""
    lines = []
    header = (f"{'case':<16}{'mode':<6}{'faces':>8}{'median_ms':>11}"
              f"{'min_ms':>9}{'max_ms':>9}{'paper_ms':>10}{'budget_ms':>11}"
              f"  status")
    lines.append(header)
    lines.append("-" * len(header))
    for row in table["rows"]:
        status = ""
        if "pass" in row:
            status = "ok" if row["pass"] else "REGRESSION"
        lines.append(
            f"{row['name']:<16}{row['mode']:<6}{row.get('faces', 0):>8}"
            f"{row['median_ms']:>11.2f}{row['min_ms']:>9.2f}"
            f"{row['max_ms']:>9.2f}"
            f"{row.get('paper_total_ms', float('nan')):>10.2f}"
            f"{row.get('budget_ms', float('nan')):>11.2f}  {status}")
    return "\n".join(lines)
