"""meshtear: real-time progressive mesh tearing, straight plane cuts, and a
spring-anchored particle layer for soft-body deformation of the result."""

from .cut import CutResult, cut, cut_plane_from_samples
from .errors import MeshTearError
from .geometry import Plane, TearBox, build_tear_boxes
from .mesh import (MeshDelta, TriMesh, build_sections, load_mesh, save_mesh,
                   sections_touching)
from .particles import (ParticleMap, ParticleSystem, generate_particles,
                        propagate, repair_after_cut, repair_after_tear,
                        spawn_slit_particles, step)
from .skinning import Skeleton, lbs_point, lbs_points
from .tear import sample_stroke, second_pass, tear_segment, tear_stroke

__version__ = "0.1.0"

__all__ = [
    "CutResult", "cut", "cut_plane_from_samples", "MeshTearError", "Plane",
    "TearBox", "build_tear_boxes", "MeshDelta", "TriMesh", "build_sections",
    "load_mesh", "save_mesh", "sections_touching", "ParticleMap",
    "ParticleSystem", "generate_particles", "propagate", "repair_after_cut",
    "repair_after_tear", "spawn_slit_particles", "step", "Skeleton",
    "lbs_point", "lbs_points", "sample_stroke", "second_pass", "tear_segment",
    "tear_stroke", "__version__",
]
