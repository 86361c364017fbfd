"""Acceptance gate: one test per headline requirement, pinned tolerances.

Each test prints a single summary line so the suite log doubles as the
acceptance report.
"""
from __future__ import annotations

import time

import numpy as np
import pytest

from meshtear import shapes
from meshtear.cut import cut
from meshtear.geometry import Plane, build_tear_boxes, oracle_clip_area
from meshtear.harness import run_tear, straight_stroke, time_tear_stroke, \
    Trajectory
from meshtear.mesh import build_sections, save_mesh
from meshtear.particles import (default_params, generate_particles,
                                repair_after_cut, repair_after_tear, step)
from meshtear.skinning import Skeleton
from meshtear.tear import tear_stroke

from conftest import (influence_weight_sums, maps_identical,
                      random_surface_stroke, t_junction_count)


def _report(num, ok, detail):
    print(f"criterion {num}: {'PASS' if ok else 'FAIL'} — {detail}")
    assert ok, f"criterion {num} failed: {detail}"


def _random_plane(rng, mesh):
    n = rng.normal(size=3)
    n /= np.linalg.norm(n)
    lo, hi = mesh.aabb()
    return Plane.from_point_normal(rng.uniform(lo, hi), n)


def _default_particles(mesh, seed=0):
    params = default_params(mesh.base_diag, seed=seed)
    system, pmap = generate_particles(mesh, params["d"], params["delta"],
                                      params["poisson_r"], seed)
    return system, pmap, params


def test_criterion_01_area_conservation_under_cut():
    rng = np.random.default_rng(42)
    t0 = time.perf_counter()
    worst = 0.0
    cases = 0
    for make in (lambda: shapes.cube(1.0), lambda: shapes.icosphere(2),
                 lambda: shapes.icosphere(3), lambda: shapes.icosphere(4)):
        base = make()
        area = base.total_area()
        for _ in range(20):
            m = base.copy()
            res = cut(m, _random_plane(rng, m))
            split = res.positive_mesh.total_area() + \
                res.negative_mesh.total_area()
            worst = max(worst, abs(split - area) / area)
            cases += 1
    elapsed = time.perf_counter() - t0
    _report(1, worst <= 1e-9 and elapsed < 10.0,
            f"{cases} cuts, worst rel err {worst:.2e}, {elapsed:.1f}s")


def _ten_torn_spheres():
    """Shared driver for criteria 2 and 3: ten 3-segment strokes."""
    out = []
    rng = np.random.default_rng(7)
    for trial in range(10):
        m = shapes.icosphere(3)
        tris_before = m.positions[m.live_faces()]
        area_before = m.total_area()
        tips, ends = random_surface_stroke(rng, m, n_segments=3)
        sections = build_sections(m, 128)
        boxes, _ = tear_stroke(m, sections, tips, ends, 0.05 * m.base_diag)
        out.append((m, tris_before, area_before, boxes))
    return out


@pytest.fixture(scope="module")
def torn_spheres():
    return _ten_torn_spheres()


def test_criterion_02_tear_area_accounting(torn_spheres):
    worst = 0.0
    for m, tris_before, area_before, boxes in torn_spheres:
        expected = area_before - oracle_clip_area(tris_before, boxes)
        worst = max(worst, abs(m.total_area() - expected) / area_before)
    # Zero-width strokes must conserve area to 1e-9.
    rng = np.random.default_rng(3)
    zero_worst = 0.0
    for _ in range(3):
        m = shapes.icosphere(3)
        area = m.total_area()
        tips, ends = random_surface_stroke(rng, m, n_segments=2)
        tear_stroke(m, build_sections(m, 128), tips, ends, 0.0)
        zero_worst = max(zero_worst, abs(m.total_area() - area) / area)
    _report(2, worst <= 1e-6 and zero_worst <= 1e-9,
            f"10 strokes worst rel err {worst:.2e}, "
            f"zero-width {zero_worst:.2e}")


def test_criterion_03_t_junction_absence(torn_spheres):
    counts = [t_junction_count(m) for m, _, _, _ in torn_spheres]
    _report(3, sum(counts) == 0,
            f"interior vertex-on-edge incidences per stroke: {counts}")


def test_criterion_04_weight_soundness():
    def max_dev(sums):
        return float(np.max(np.abs(sums - 1.0))) if len(sums) else 0.0

    devs = []
    # Generation.
    m = shapes.icosphere(3)
    m.skeleton = Skeleton(parents=[-1, 0],
                          bind=np.array([np.eye(4), np.eye(4)]))
    m.skin = [[(0, 0.5), (1, 0.5)] for _ in m.positions]
    system, pmap, _ = _default_particles(m)
    devs.append(max_dev(influence_weight_sums(m, pmap)))

    # Tear repair (the harness path also interpolates skin weights).
    sections = build_sections(m, 128)
    times, tips, ends = straight_stroke(m, n_segments=3)
    time_tear_stroke(m, sections, system, pmap, tips, ends,
                     0.05 * m.base_diag)
    devs.append(max_dev(influence_weight_sums(m, pmap)))
    devs.append(max_dev(np.array([sum(w for _, w in ws) for ws in m.skin])))

    # Cut repair, both sides.
    plane = Plane(np.array([0.0, 0.0, 1.0]), 0.1)
    res = cut(m, plane)
    for (side_sys, side_map), side_mesh in zip(
            repair_after_cut(m, system, pmap, plane, res),
            (res.positive_mesh, res.negative_mesh)):
        devs.append(max_dev(influence_weight_sums(side_mesh, side_map)))
        devs.append(max_dev(np.array([sum(w for _, w in ws)
                                      for ws in side_mesh.skin])))
    worst = max(devs)
    _report(4, worst <= 1e-6, f"worst per-vertex weight-sum deviation "
                              f"{worst:.2e} over generation/tear/cut")


def test_criterion_05_rest_fixed_point_and_elasticity():
    m = shapes.icosphere(3)
    system, pmap, _ = _default_particles(m)
    base = m.positions.copy()
    out = base
    for _ in range(1000):
        out = step(base, system, pmap)
    rest_dev = float(np.max(np.linalg.norm(out - base, axis=1)))

    system.velocity[0] = [1.0, 0.0, 0.0]  # unit impulse
    peak = 0.0
    decay_steps = None
    for n in range(1, 401):
        step(base, system, pmap)
        offset = float(np.linalg.norm(system.center[0]
                                      - system.anchor_pos[0]))
        peak = max(peak, offset)
        if peak > 0 and offset < 0.01 * peak:
            decay_steps = n
            break
    _report(5, rest_dev <= 1e-9 and decay_steps is not None,
            f"1000-step rest drift {rest_dev:.2e}, impulse decayed to <1% "
            f"of peak in {decay_steps} steps")


def test_criterion_06_pruned_repair_equals_exhaustive():
    rng = np.random.default_rng(123)
    mismatches = 0
    straddlers = 0
    for trial in range(50):
        m = shapes.icosphere(3)
        system, pmap, _ = _default_particles(m, seed=trial)
        sections = build_sections(m, 128)
        tips, ends = random_surface_stroke(rng, m, n_segments=2)
        boxes, results = tear_stroke(m, sections, tips, ends,
                                     0.05 * m.base_diag)
        rim = [r for res in results for r in res.rim]
        sys_a, map_a = system.copy(), pmap.copy()
        sys_b, map_b = system.copy(), pmap.copy()
        repair_after_tear(m, sys_a, map_a, boxes, rim, use_pruning=True)
        repair_after_tear(m, sys_b, map_b, boxes, rim, use_pruning=False)
        if not maps_identical(map_a, map_b):
            mismatches += 1
        # Exhaustive straddle scan on the pruned result.
        eps = m.eps_side
        anchors = sys_a.anchor_pos[map_a.infl_particle]
        verts = m.positions[map_a.infl_vertex]
        for box in boxes:
            plane = box.tear_plane
            sa = anchors @ plane.normal - plane.offset
            sv = verts @ plane.normal - plane.offset
            opp = ((sa > eps) & (sv < -eps)) | ((sa < -eps) & (sv > eps))
            if not np.any(opp):
                continue
            t = np.where(opp, sa / np.where(sa == sv, 1.0, sa - sv), 0.0)
            X = anchors + t[:, None] * (verts - anchors)
            band = opp.copy()
            for slot in (2, 3, 4, 5):
                band &= box.planes[slot].signed_distance(X) <= eps
            straddlers += int(np.count_nonzero(band))
    _report(6, mismatches == 0 and straddlers == 0,
            f"50 strokes: {mismatches} pruning mismatches, "
            f"{straddlers} straddling links after repair")


def _tear_segment_ms(mesh, repeats=5):
    """Median (and max) per-segment total over several full strokes."""
    samples = []
    for _ in range(repeats):
        m = mesh.copy()
        system, pmap, _ = _default_particles(m)
        sections = build_sections(m, 256)
        times, tips, ends = straight_stroke(m, n_segments=3)
        report, _, _ = time_tear_stroke(m, sections, system, pmap, tips,
                                        ends, 0.05 * m.base_diag)
        samples.extend(s["total_ms"] for s in report.segments)
    return float(np.median(samples)), float(np.max(samples))


def test_criterion_07_tear_segment_latency():
    budgets = [
        ("~770 faces", shapes.uv_sphere(24, 17), 6.5),
        ("~5k faces", shapes.icosphere(4), 22.4),
        ("~18k faces", shapes.uv_sphere(96, 98), 37.3),
    ]
    results = []
    ok = True
    _tear_segment_ms(shapes.icosphere(2), repeats=1)  # warmup
    for label, mesh, budget in budgets:
        ms, worst = _tear_segment_ms(mesh)
        results.append(f"{label}: median {ms:.2f} ms, worst {worst:.2f} ms "
                       f"(budget {budget})")
        ok &= ms <= budget
    _report(7, ok, "; ".join(results))


def test_criterion_08_cut_latency():
    budgets = [("~1k faces", shapes.icosphere(3), 24.0),
               ("~5k faces", shapes.icosphere(4), 35.0)]
    results = []
    ok = True
    cut(shapes.icosphere(2), Plane(np.array([1.0, 0, 0]), 0.0))  # warmup
    for label, mesh, budget in budgets:
        samples = []
        for _ in range(5):
            m = mesh.copy()
            t0 = time.perf_counter()
            cut(m, Plane(np.array([1.0, 0, 0]), 0.0))
            samples.append((time.perf_counter() - t0) * 1e3)
        ms = float(np.median(samples))
        results.append(f"{label}: {ms:.2f} ms (budget {budget})")
        ok &= ms <= budget
    _report(8, ok, "; ".join(results))


def test_criterion_09_byte_identical_determinism(tmp_path):
    m = shapes.icosphere(3)
    obj, _ = save_mesh(m)
    mesh_path = tmp_path / "ball.obj"
    mesh_path.write_bytes(obj)
    times, tips, ends = straight_stroke(m, n_segments=3)
    traj = Trajectory(mode="tear", width=0.05 * m.base_diag, times=times,
                      tips=tips, ends=ends)
    traj_path = tmp_path / "stroke.json"
    traj_path.write_text(traj.to_json())
    artifacts = []
    for run in range(2):
        out = tmp_path / f"run{run}.obj"
        run_tear(mesh_path, traj_path, seed=5, out_path=out)
        artifacts.append(tuple(
            (tmp_path / name).read_bytes()
            for name in (f"run{run}.obj", f"run{run}.obj.deltalog.json",
                         f"run{run}.obj.particles.json")))
    same = artifacts[0] == artifacts[1]
    _report(9, same, "mesh, delta log, and particle map byte-identical "
                     "across two seeded runs")


def test_criterion_10_poisson_sampling():
    # Exhaustive separation + maximality on a regular grid.
    xs, ys = np.meshgrid(np.arange(12.0), np.arange(12.0))
    pos = np.column_stack([xs.ravel(), ys.ravel(), np.zeros(xs.size)])
    from meshtear.mesh import TriMesh
    grid = TriMesh(pos, np.zeros((0, 3), dtype=np.int64))
    r = 2.5
    system, _ = generate_particles(grid, 1.5 * r, 2.5 * r, r, seed=0)
    a = system.anchor_pos
    d = np.linalg.norm(a[:, None] - a[None, :], axis=2)
    np.fill_diagonal(d, np.inf)
    separated = bool(np.all(d >= r))
    maximal = bool(np.all(np.linalg.norm(
        pos[:, None] - a[None, :], axis=2).min(axis=1) < r))

    # Calibration band on a 2527-vertex sphere with default parameters.
    m = shapes.uv_sphere(25, 102)
    assert len(m.positions) == 2527
    counts = []
    for seed in range(4):
        system, _, _ = _default_particles(m, seed=seed)
        counts.append(system.count)
    in_band = all(150 <= c <= 210 for c in counts)
    _report(10, separated and maximal and in_band,
            f"grid separated={separated} maximal={maximal}, "
            f"2527-vertex sphere counts {counts} (band [150, 210])")
