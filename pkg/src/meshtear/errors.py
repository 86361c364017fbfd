"""Exception hierarchy shared across the kernel."""


class MeshTearError(Exception):
    """Base class for all kernel errors."""


class ParseError(MeshTearError):
    """Malformed input file; carries the 1-based line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NonManifold(MeshTearError):
    """An edge is shared by more than two live faces."""


class InvalidWeights(MeshTearError):
    """Skin weights too far from summing to one to be renormalized."""


class StaleSections(MeshTearError):
    """Section index epoch does not match the mesh epoch."""


class DegenerateSegment(MeshTearError):
    """Scalpel tip motion is (near-)parallel to the scalpel axis."""


class Collinear(MeshTearError):
    """Cut-plane sample points are collinear."""


class CoplanarSegment(MeshTearError):
    """Segment lies inside the query plane within tolerance."""


class NonManifoldResult(MeshTearError):
    """A tear segment would leave an edge with more than two faces."""


class StraddlingFace(MeshTearError):
    """Internal consistency failure: a face still crosses the cut plane."""


class NoSkin(MeshTearError):
    """Operation requires skin data the mesh does not carry."""


class NoVertices(MeshTearError):
    """Particle generation needs at least one mesh vertex."""


class BadWeights(MeshTearError):
    """Bone weight list does not sum to one within tolerance."""
