"""Shared fixtures and independent verification oracles."""
from __future__ import annotations

import numpy as np
import pytest

from meshtear import shapes


@pytest.fixture
def icosphere320():
    return shapes.icosphere(2)


@pytest.fixture
def icosphere1280():
    return shapes.icosphere(3)


@pytest.fixture
def icosphere5120():
    return shapes.icosphere(4)


def t_junction_count(mesh):
    """Exhaustive scan: vertices lying on the interior of a foreign edge."""
    eps = mesh.eps_side
    f = mesh.live_faces()
    used = np.unique(f)
    p = mesh.positions
    edges = set()
    for tri in f:
        for i in range(3):
            a, b = int(tri[i]), int(tri[(i + 1) % 3])
            edges.add((min(a, b), max(a, b)))
    count = 0
    for a, b in edges:
        pa, pb = p[a], p[b]
        ab = pb - pa
        length_sq = float(ab @ ab)
        if length_sq == 0.0:
            continue
        length = np.sqrt(length_sq)
        t = (p[used] - pa) @ ab / length_sq
        interior = (t * length > eps) & ((1.0 - t) * length > eps)
        interior &= (used != a) & (used != b)
        proj = pa + np.outer(t, ab)
        dist = np.linalg.norm(p[used] - proj, axis=1)
        count += int(np.count_nonzero(interior & (dist <= eps)))
    return count


def influence_weight_sums(mesh, pmap):
    """Per-vertex influence weight totals for every linked vertex."""
    sums = np.zeros(len(mesh.positions))
    np.add.at(sums, pmap.infl_vertex, pmap.infl_weight)
    linked = np.unique(pmap.infl_vertex)
    return sums[linked]


def random_surface_stroke(rng, mesh, n_segments=2, radial=0.3):
    """Straight stroke across the mesh in a random horizontal direction."""
    lo, hi = mesh.aabb()
    center = (lo + hi) / 2
    diag = mesh.base_diag
    angle = rng.uniform(0, 2 * np.pi)
    direction = np.array([np.cos(angle), np.sin(angle), 0.0])
    offsets = np.linspace(-radial, radial, n_segments + 1) * diag
    height = rng.uniform(0.0, 0.3) * diag
    tips = center + offsets[:, None] * direction + np.array([0, 0, height])
    ends = tips + np.array([0.0, 0.0, 0.8 * diag])
    return tips, ends


def canonical_map_arrays(pmap):
    """Order-independent canonical form of a particle map for comparison."""
    infl_order = np.lexsort((pmap.infl_particle, pmap.infl_vertex))
    nb_order = np.lexsort((pmap.nb_b, pmap.nb_a))
    return (pmap.infl_particle[infl_order], pmap.infl_vertex[infl_order],
            pmap.infl_weight[infl_order], pmap.nb_a[nb_order],
            pmap.nb_b[nb_order], pmap.nb_weight[nb_order],
            frozenset(pmap.pinned_vertices))


def maps_identical(map_a, map_b):
    a = canonical_map_arrays(map_a)
    b = canonical_map_arrays(map_b)
    return all(np.array_equal(x, y) if isinstance(x, np.ndarray) else x == y
               for x, y in zip(a, b))
