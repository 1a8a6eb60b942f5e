"""Stadium-shaped track geometry.

The arena is the region between two concentric stadiums that share a
horizontal spine segment from (-a, 0) to (a, 0), where a is half the
straight length. A stadium of radius r is the set of points within
distance r of the spine, so wall tests reduce to point/segment distances.

Arc length ``s`` runs along the track centerline in the clockwise
direction (y up), starting at the middle of the bottom straight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

Vec = tuple[float, float]

_EPS = 1e-12


def point_segment_distance(px: float, py: float, ax: float, ay: float, bx: float, by: float) -> float:
    dx = bx - ax
    dy = by - ay
    len2 = dx * dx + dy * dy
    if len2 <= _EPS:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * dx + (py - ay) * dy) / len2
    t = 0.0 if t < 0.0 else (1.0 if t > 1.0 else t)
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def _cross(ax: float, ay: float, bx: float, by: float) -> float:
    return ax * by - ay * bx


def segments_intersect(p: Vec, q: Vec, r: Vec, s: Vec) -> bool:
    """Proper or touching intersection of segments pq and rs."""
    d1 = _cross(s[0] - r[0], s[1] - r[1], p[0] - r[0], p[1] - r[1])
    d2 = _cross(s[0] - r[0], s[1] - r[1], q[0] - r[0], q[1] - r[1])
    d3 = _cross(q[0] - p[0], q[1] - p[1], r[0] - p[0], r[1] - p[1])
    d4 = _cross(q[0] - p[0], q[1] - p[1], s[0] - p[0], s[1] - p[1])
    if ((d1 > 0 > d2) or (d1 < 0 < d2)) and ((d3 > 0 > d4) or (d3 < 0 < d4)):
        return True
    return False


def segment_segment_distance(p: Vec, q: Vec, r: Vec, s: Vec) -> float:
    if segments_intersect(p, q, r, s):
        return 0.0
    return min(
        point_segment_distance(p[0], p[1], r[0], r[1], s[0], s[1]),
        point_segment_distance(q[0], q[1], r[0], r[1], s[0], s[1]),
        point_segment_distance(r[0], r[1], p[0], p[1], q[0], q[1]),
        point_segment_distance(s[0], s[1], p[0], p[1], q[0], q[1]),
    )


def segment_hits_circle(p: Vec, q: Vec, center: Vec, radius: float) -> bool:
    """True if segment pq passes within ``radius`` of ``center``."""
    return point_segment_distance(center[0], center[1], p[0], p[1], q[0], q[1]) <= radius


@dataclass(frozen=True)
class Track:
    """Closed annulus between the inner and outer stadium walls."""

    straight_length: float
    outer_radius: float
    width: float

    @property
    def half_straight(self) -> float:
        return 0.5 * self.straight_length

    @property
    def inner_radius(self) -> float:
        return self.outer_radius - self.width

    @property
    def center_radius(self) -> float:
        return self.outer_radius - 0.5 * self.width

    @property
    def half_length(self) -> float:
        """Half of the arena's long extent, used as the position scale."""
        return self.half_straight + self.outer_radius

    @property
    def perimeter(self) -> float:
        return 2.0 * self.straight_length + 2.0 * math.pi * self.center_radius

    def spine_point(self, x: float, y: float) -> Vec:
        a = self.half_straight
        return (min(max(x, -a), a), 0.0)

    def spine_distance(self, x: float, y: float) -> float:
        a = self.half_straight
        cx = min(max(x, -a), a)
        return math.hypot(x - cx, y)

    def outward_normal(self, x: float, y: float) -> Vec:
        """Unit vector from the nearest spine point towards (x, y)."""
        cx, _ = self.spine_point(x, y)
        dx, dy = x - cx, y
        n = math.hypot(dx, dy)
        if n <= _EPS:
            return (0.0, 1.0)
        return (dx / n, dy / n)

    def contains(self, x: float, y: float, tol: float = 1e-9) -> bool:
        d = self.spine_distance(x, y)
        return self.inner_radius - tol <= d <= self.outer_radius + tol

    def clamp(self, x: float, y: float) -> tuple[float, float, int]:
        """Project a point into the annulus.

        Returns (x, y, wall) where wall is -1 when pushed onto the inner
        wall, +1 for the outer wall and 0 when no projection was needed.
        """
        d = self.spine_distance(x, y)
        if self.inner_radius <= d <= self.outer_radius:
            return x, y, 0
        cx, _ = self.spine_point(x, y)
        nx, ny = self.outward_normal(x, y)
        if d < self.inner_radius:
            r, wall = self.inner_radius, -1
        else:
            r, wall = self.outer_radius, 1
        return cx + nx * r, ny * r, wall

    def inner_wall_distance(self, x: float, y: float) -> float:
        return self.spine_distance(x, y) - self.inner_radius

    def outer_wall_distance(self, x: float, y: float) -> float:
        return self.outer_radius - self.spine_distance(x, y)

    def line_of_sight(self, p: Vec, q: Vec) -> bool:
        """True unless segment pq enters the infield inside the inner wall.

        The outer wall is convex and never blocks a segment between two
        points of the annulus.
        """
        a = self.half_straight
        d = segment_segment_distance(p, q, (-a, 0.0), (a, 0.0))
        return d >= self.inner_radius - 1e-9

    # -- centerline parametrisation -------------------------------------

    def arc_position(self, x: float, y: float) -> float:
        """Clockwise arc length in [0, perimeter) of the centerline point nearest (x, y)."""
        a = self.half_straight
        rc = self.center_radius
        L = self.straight_length
        if -a <= x <= a:
            if y < 0.0:
                s = -x if x <= 0.0 else self.perimeter - x
            else:
                s = a + math.pi * rc + (x + a)
        elif x < -a:
            phi = math.atan2(y, x + a)
            swept = (-0.5 * math.pi - phi) % (2.0 * math.pi)
            s = a + rc * swept
        else:
            phi = math.atan2(y, x - a)
            swept = 0.5 * math.pi - phi
            s = a + math.pi * rc + L + rc * swept
        return s % self.perimeter

    def centerline_point(self, s: float) -> Vec:
        a = self.half_straight
        rc = self.center_radius
        L = self.straight_length
        s = s % self.perimeter
        arc = math.pi * rc
        if s <= a:
            return (-s, -rc)
        s -= a
        if s <= arc:
            phi = -0.5 * math.pi - s / rc
            return (-a + rc * math.cos(phi), rc * math.sin(phi))
        s -= arc
        if s <= L:
            return (-a + s, rc)
        s -= L
        if s <= arc:
            phi = 0.5 * math.pi - s / rc
            return (a + rc * math.cos(phi), rc * math.sin(phi))
        s -= arc
        return (a - s, -rc)

    def clockwise_tangent(self, x: float, y: float) -> Vec:
        a = self.half_straight
        if -a <= x <= a:
            return (-1.0, 0.0) if y < 0.0 else (1.0, 0.0)
        cx = -a if x < -a else a
        phi = math.atan2(y, x - cx)
        return (math.sin(phi), -math.cos(phi))

    def on_curve(self, x: float) -> bool:
        return abs(x) > self.half_straight

    def arc_delta(self, s_from: float, s_to: float) -> float:
        """Signed shortest arc displacement, in (-P/2, P/2]."""
        p = self.perimeter
        d = (s_to - s_from) % p
        if d > 0.5 * p:
            d -= p
        return d
