"""Euclidean primitives: planes, side tests, clipping, tear-box construction.

Everything in this module is a pure function of immutable inputs and is safe
to call concurrently.  The only state is the data passed in.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CoplanarSegment, DegenerateSegment

# Plane slots of a tear box, in the fixed clipping order.
LAT_NEG, LAT_POS, ENTRY, EXIT, TOP, BOTTOM = range(6)

# For each plane slot, the four planes forming the "band" around it
# (everything except itself and its opposite).
_OPPOSITE = {LAT_NEG: LAT_POS, LAT_POS: LAT_NEG,
             ENTRY: EXIT, EXIT: ENTRY,
             TOP: BOTTOM, BOTTOM: TOP}


def adjacent_planes(slot):
    """Indices of the four planes adjacent to ``slot`` in a tear box."""
    return [i for i in range(6) if i != slot and i != _OPPOSITE[slot]]


class Side(enum.Enum):
    POSITIVE = 1
    NEGATIVE = -1
    ON = 0


@dataclass(eq=False)
class Plane:
    """Oriented plane in signed-distance form n.x = offset, |n| = 1."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        self.normal = np.asarray(self.normal, dtype=np.float64)
        n = np.linalg.norm(self.normal)
        if not np.isclose(n, 1.0, atol=1e-9):
            self.normal = self.normal / n
            self.offset = float(self.offset) / n
        self.offset = float(self.offset)

    @classmethod
    def from_point_normal(cls, point, normal):
        normal = np.asarray(normal, dtype=np.float64)
        normal = normal / np.linalg.norm(normal)
        return cls(normal, float(np.dot(normal, point)))

    @classmethod
    def from_points(cls, a, b, c):
        a = np.asarray(a, dtype=np.float64)
        n = np.cross(np.asarray(b, dtype=np.float64) - a,
                     np.asarray(c, dtype=np.float64) - a)
        norm = np.linalg.norm(n)
        if norm == 0.0:
            raise CoplanarSegment("degenerate point triple")
        return cls.from_point_normal(a, n / norm)

    def flipped(self):
        return Plane(-self.normal, -self.offset)

    def signed_distance(self, points):
        """n.x - offset for one point (3,) or many (N, 3)."""
        points = np.asarray(points, dtype=np.float64)
        return points @ self.normal - self.offset


def plane_side(point, plane, eps):
    """Classify a point against a plane with an On-band of half-width eps."""
    d = plane.signed_distance(point)
    if abs(d) <= eps:
        return Side.ON
    return Side.POSITIVE if d > 0 else Side.NEGATIVE


def segment_plane_intersect(a, b, plane, eps=0.0):
    """Unique crossing of segment ab with a plane, or None.

    Returns (point, t) with t in [0, 1].  An endpoint lying on the plane
    (within eps) is returned with t of 0 or 1.  Raises CoplanarSegment when
    both endpoints lie on the plane.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    da = plane.signed_distance(a)
    db = plane.signed_distance(b)
    on_a = abs(da) <= eps
    on_b = abs(db) <= eps
    if on_a and on_b:
        raise CoplanarSegment("segment lies in the plane")
    if on_a:
        return a, 0.0
    if on_b:
        return b, 1.0
    if da * db > 0:
        return None
    t = da / (da - db)
    return a + t * (b - a), float(t)


@dataclass
class TriangleClip:
    """Result of splitting one triangle by a plane.

    Polygons are stored as barycentric rows (k, 3) w.r.t. the input triangle;
    a row equal to a unit vector is an original (possibly snapped) vertex.
    """

    positive: np.ndarray | None
    negative: np.ndarray | None
    crossings: list = field(default_factory=list)  # list of (point, bary)


def _bary_point(tri, bary):
    return bary @ tri


def triangle_plane_clip(tri, plane, eps):
    """Split a triangle by a plane, keeping barycentric provenance.

    Intersection points within eps of an existing vertex are snapped to it
    (no new point).  Each side's polygon is a triangle or a quad (or the
    whole triangle / nothing).
    """
    tri = np.asarray(tri, dtype=np.float64)
    d = plane.signed_distance(tri)
    sides = np.where(np.abs(d) <= eps, 0, np.sign(d)).astype(int)

    eye = np.eye(3)
    if not (np.any(sides > 0) and np.any(sides < 0)):
        # No straddle: whole triangle ends up on one side.
        whole = eye.copy()
        if np.any(sides > 0) or np.all(sides == 0):
            return TriangleClip(whole, None)
        return TriangleClip(None, whole)

    pos, neg, crossings = [], [], []
    for i in range(3):
        j = (i + 1) % 3
        if sides[i] >= 0:
            pos.append(eye[i])
        if sides[i] <= 0:
            neg.append(eye[i])
        if sides[i] == 0:
            crossings.append((tri[i].copy(), eye[i].copy()))
        if sides[i] * sides[j] < 0:
            t = d[i] / (d[i] - d[j])
            # Snap to an endpoint when the crossing is within eps of it.
            elen = np.linalg.norm(tri[j] - tri[i])
            if t * elen <= eps:
                bary = eye[i].copy()
            elif (1.0 - t) * elen <= eps:
                bary = eye[j].copy()
            else:
                bary = (1.0 - t) * eye[i] + t * eye[j]
            point = _bary_point(tri, bary)
            crossings.append((point, bary))
            pos.append(bary)
            neg.append(bary)

    def _dedupe(polygon):
        out = []
        for b in polygon:
            if not any(np.allclose(b, o, atol=1e-12) for o in out):
                out.append(b)
        return np.array(out) if len(out) >= 3 else None

    return TriangleClip(_dedupe(pos), _dedupe(neg), crossings)


@dataclass(eq=False)
class TearBox:
    """One tear segment's clipping volume: 6 outward-oriented planes.

    The open interior is {x : n.x < offset for all 6 planes}; it is bounded
    and non-empty for width > 0.  Boxes may be non-rectangular after
    interface smoothing.
    """

    planes: list  # 6 Planes, indexed by LAT_NEG..BOTTOM
    tear_plane: Plane
    segment_span: np.ndarray  # (2, 3): scalpel tip entry / tip exit
    width: float

    def signed_distances(self, points):
        """(N, 6) signed distances to every plane (positive = outside)."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        normals = np.stack([p.normal for p in self.planes])
        offsets = np.array([p.offset for p in self.planes])
        return points @ normals.T - offsets

    def contains(self, points, margin=0.0):
        """Strict interior test; margin > 0 shrinks, < 0 expands the box."""
        return np.all(self.signed_distances(points) < -margin, axis=1)

    def corners(self):
        """The 8 corner points (intersections of plane triples)."""
        out = np.empty((8, 3))
        idx = 0
        for a in (LAT_NEG, LAT_POS):
            for b in (ENTRY, EXIT):
                for c in (TOP, BOTTOM):
                    A = np.stack([self.planes[a].normal,
                                  self.planes[b].normal,
                                  self.planes[c].normal])
                    rhs = np.array([self.planes[a].offset,
                                    self.planes[b].offset,
                                    self.planes[c].offset])
                    out[idx] = np.linalg.solve(A, rhs)
                    idx += 1
        return out

    def aabb(self, margin=0.0):
        c = self.corners()
        return c.min(axis=0) - margin, c.max(axis=0) + margin

    def segment_hits(self, a, b, margin=0.0):
        """True when segment ab has a sub-segment of positive length inside."""
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        t0, t1 = 0.0, 1.0
        for p in self.planes:
            da = p.signed_distance(a) + margin
            db = p.signed_distance(b) + margin
            # Constraint: (1-t) da + t db < 0
            if da >= 0 and db >= 0:
                return False
            if da < 0 and db < 0:
                continue
            t = da / (da - db)
            if da >= 0:
                t0 = max(t0, t)
            else:
                t1 = min(t1, t)
            if t0 >= t1:
                return False
        return t1 - t0 > 1e-12


def _segment_frame(tip0, tip1, end0, parallel_tol=1e-9):
    """Box axes for one tear segment; raises DegenerateSegment."""
    u = tip1 - tip0
    un = np.linalg.norm(u)
    if un == 0.0:
        raise DegenerateSegment("consecutive tips coincide")
    u = u / un
    axis = end0 - tip0
    an = np.linalg.norm(axis)
    if an == 0.0:
        raise DegenerateSegment("scalpel tip equals scalpel end")
    axis = axis / an
    lat = np.cross(u, axis)
    ln = np.linalg.norm(lat)
    if ln < parallel_tol:
        raise DegenerateSegment("tip motion parallel to scalpel axis")
    return u, axis, lat / ln


def _single_box(tip0, end0, tip1, width):
    u, axis, lat = _segment_frame(tip0, tip1, end0)
    half = width / 2.0
    c = float(lat @ tip0)
    planes = [None] * 6
    planes[LAT_NEG] = Plane(-lat, -c + half)
    planes[LAT_POS] = Plane(lat, c + half)
    planes[ENTRY] = Plane(-u, -float(u @ tip0))
    planes[EXIT] = Plane(u, float(u @ tip1))
    planes[TOP] = Plane(axis, float(axis @ end0))
    planes[BOTTOM] = Plane(-axis, -float(axis @ tip0) + half)
    return TearBox(planes, Plane(lat, c), np.stack([tip0, tip1]), width)


def _interface_plane(box_a, box_b, tip, end):
    """Shared plane between consecutive boxes at their common sample.

    Contains the common scalpel segment and bisects the dihedral angle
    between the two tear planes.
    """
    la = box_a.tear_plane.normal
    lb = box_b.tear_plane.normal
    m = la - lb
    if np.linalg.norm(m) < 1e-9:
        # Parallel tear planes: fall back to the motion bisector.
        ua = box_a.planes[EXIT].normal
        ub = -box_b.planes[ENTRY].normal
        m = ua + ub
        if np.linalg.norm(m) < 1e-9:
            m = ua
    m = m / np.linalg.norm(m)
    # Make the plane contain the whole scalpel segment at the joint.
    s = end - tip
    sn = np.linalg.norm(s)
    if sn > 0:
        s = s / sn
        m2 = m - (m @ s) * s
        if np.linalg.norm(m2) > 1e-9:
            m = m2 / np.linalg.norm(m2)
    # Orient outward for the leading box.
    if m @ box_a.planes[EXIT].normal < 0:
        m = -m
    return Plane(m, float(m @ tip))


def build_tear_boxes(tips, ends, width):
    """Ordered tear boxes for a stroke given sampled scalpel poses.

    Consecutive boxes share a smoothed interface plane so their interiors
    never overlap.  A sample whose tip motion is (near-)parallel to the
    scalpel axis is merged with its successor.
    """
    tips = np.asarray(tips, dtype=np.float64)
    ends = np.asarray(ends, dtype=np.float64)
    if len(tips) < 2:
        raise ValueError("need at least 2 scalpel samples")
    if width < 0:
        raise ValueError("width must be >= 0")

    boxes = []
    spans = []  # (start sample idx, end sample idx) per box
    start = 0
    for k in range(1, len(tips)):
        try:
            box = _single_box(tips[start], ends[start], tips[k], width)
        except DegenerateSegment:
            if k == len(tips) - 1 and boxes:
                break  # trailing degenerate motion: drop it
            continue  # merge this sample into the next segment
        boxes.append(box)
        spans.append((start, k))
        start = k

    if not boxes:
        raise DegenerateSegment("no valid tear segment in the stroke")

    for i in range(len(boxes) - 1):
        joint = spans[i][1]
        shared = _interface_plane(boxes[i], boxes[i + 1],
                                  tips[joint], ends[joint])
        boxes[i].planes[EXIT] = shared
        boxes[i + 1].planes[ENTRY] = shared.flipped()
    return boxes


# --- brute-force clipping oracle (tests only) -------------------------------

def clip_polygon_halfspace(points, normal, offset):
    """Sutherland-Hodgman: keep the part of the polygon with n.x <= offset."""
    out = []
    n = len(points)
    for i in range(n):
        a = points[i]
        b = points[(i + 1) % n]
        da = float(np.dot(normal, a)) - offset
        db = float(np.dot(normal, b)) - offset
        if da <= 0:
            out.append(a)
            if db > 0:
                t = da / (da - db)
                out.append(a + t * (b - a))
        elif db <= 0:
            t = da / (da - db)
            out.append(a + t * (b - a))
    return out


def polygon_area(points):
    """Area of a planar polygon in 3D (Newell's method)."""
    n = len(points)
    if n < 3:
        return 0.0
    sx = sy = sz = 0.0
    ax, ay, az = (float(c) for c in points[-1])
    for p in points:
        bx, by, bz = float(p[0]), float(p[1]), float(p[2])
        sx += ay * bz - az * by
        sy += az * bx - ax * bz
        sz += ax * by - ay * bx
        ax, ay, az = bx, by, bz
    return 0.5 * math.sqrt(sx * sx + sy * sy + sz * sz)


def oracle_clip_area(tris, boxes):
    """Total triangle area strictly inside the union of the tear boxes.

    Exhaustive successive half-space clipping of every triangle against every
    box.  Interfaces between consecutive boxes have zero volume overlap by
    construction, so plain per-box summation is exact.
    """
    total = 0.0
    for box in boxes:
        for tri in tris:
            poly = [np.asarray(p, dtype=np.float64) for p in tri]
            for plane in box.planes:
                poly = clip_polygon_halfspace(poly, plane.normal, plane.offset)
                if len(poly) < 3:
                    break
            total += polygon_area(poly)
    return total
