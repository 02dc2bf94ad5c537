"""Planar shapes, moving unsafe regions, and exact point-to-set distances.

Everything here is immutable and pure.  Obstacle queries at a given time
displace the base shape by its motion offset and reduce to closed-form
point distances, so the same primitives serve the synthesis constraints,
the dense verifier, and the simulator's clearance logging.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConfigError, DomainError

Point = tuple[float, float]

# Distance reported when there is nothing to avoid; large but finite so
# downstream max/min arithmetic stays well-behaved.
NO_OBSTACLE_DISTANCE = 1.0e12

# Relative slack accepted on time-domain checks (integration endpoints
# accumulate roundoff of this order).
_TIME_SLACK = 1e-9


@dataclass(frozen=True)
class Ball2:
    """Closed disc ``{p : |p - center| <= radius}`` with radius > 0."""

    center: Point
    radius: float

    def __post_init__(self) -> None:
        cx, cy = self.center
        if not (math.isfinite(cx) and math.isfinite(cy)):
            raise ConfigError(f"ball center must be finite, got {self.center!r}")
        if not (math.isfinite(self.radius) and self.radius > 0.0):
            raise ConfigError(f"ball radius must be > 0, got {self.radius!r}")


# Disc-shaped obstacles are plain balls; the alias keeps call sites readable.
Disc = Ball2


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle with strictly ordered corners."""

    lo: Point
    hi: Point

    def __post_init__(self) -> None:
        if not (self.lo[0] < self.hi[0] and self.lo[1] < self.hi[1]):
            raise ConfigError(
                f"rectangle needs lo < hi componentwise, got {self.lo!r}..{self.hi!r}")


Shape = Ball2 | Rect


@dataclass(frozen=True)
class Static:
    """No motion: the obstacle stays at its base placement."""


@dataclass(frozen=True)
class PiecewiseLinear:
    """Rigid translation along straight segments between timed offsets.

    ``waypoints`` is a sequence of ``(time, (ox, oy))`` pairs with strictly
    increasing times.  Offsets add to the base shape; queries outside the
    covered time range clamp to the nearest endpoint offset.
    """

    waypoints: tuple[tuple[float, Point], ...]

    def __post_init__(self) -> None:
        wps = tuple((float(t), (float(o[0]), float(o[1]))) for t, o in self.waypoints)
        object.__setattr__(self, "waypoints", wps)
        if len(wps) < 2:
            raise ConfigError("piecewise-linear motion needs at least two waypoints")
        times = [t for t, _ in wps]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigError(f"waypoint times must be strictly increasing, got {times}")


Motion = Static | PiecewiseLinear


def motion_offset(motion: Motion, t: float) -> Point:
    """Translation offset of a motion at time ``t`` (clamped to its span)."""
    if isinstance(motion, Static):
        return (0.0, 0.0)
    wps = motion.waypoints
    if t <= wps[0][0]:
        return wps[0][1]
    if t >= wps[-1][0]:
        return wps[-1][1]
    for (t0, o0), (t1, o1) in zip(wps, wps[1:]):
        if t <= t1:
            w = (t - t0) / (t1 - t0)
            return (o0[0] + w * (o1[0] - o0[0]), o0[1] + w * (o1[1] - o0[1]))
    return wps[-1][1]  # unreachable; loop covers t <= wps[-1][0]


def motion_rate(motion: Motion) -> float:
    """Largest translation speed of a motion (0 for static)."""
    if isinstance(motion, Static):
        return 0.0
    rate = 0.0
    for (t0, o0), (t1, o1) in zip(motion.waypoints, motion.waypoints[1:]):
        rate = max(rate, math.hypot(o1[0] - o0[0], o1[1] - o0[1]) / (t1 - t0))
    return rate


def displace(shape: Shape, offset: Point) -> Shape:
    """Rigidly translate a shape by ``offset``."""
    ox, oy = offset
    if isinstance(shape, Ball2):
        return Ball2((shape.center[0] + ox, shape.center[1] + oy), shape.radius)
    return Rect((shape.lo[0] + ox, shape.lo[1] + oy), (shape.hi[0] + ox, shape.hi[1] + oy))


@dataclass(frozen=True)
class Obstacle:
    """A shape together with the rigid motion that carries it over time."""

    shape: Shape
    motion: Motion = field(default_factory=Static)

    def shape_at(self, t: float) -> Shape:
        return displace(self.shape, motion_offset(self.motion, t))


def dist_point_shape(p: Point, shape: Shape) -> float:
    """Euclidean distance from a point to a closed shape (0 inside)."""
    if isinstance(shape, Ball2):
        gap = math.hypot(p[0] - shape.center[0], p[1] - shape.center[1]) - shape.radius
        return gap if gap > 0.0 else 0.0
    dx = max(shape.lo[0] - p[0], 0.0, p[0] - shape.hi[0])
    dy = max(shape.lo[1] - p[1], 0.0, p[1] - shape.hi[1])
    return math.hypot(dx, dy)


def signed_dist_point_shape(p: Point, shape: Shape) -> float:
    """Signed distance: positive outside, negative in the interior.

    Agrees with :func:`dist_point_shape` outside the shape; inside it
    returns minus the depth, which gives descent directions an escape
    route that the clamped distance cannot provide.
    """
    if isinstance(shape, Ball2):
        return math.hypot(p[0] - shape.center[0], p[1] - shape.center[1]) - shape.radius
    dx = max(shape.lo[0] - p[0], 0.0, p[0] - shape.hi[0])
    dy = max(shape.lo[1] - p[1], 0.0, p[1] - shape.hi[1])
    if dx > 0.0 or dy > 0.0:
        return math.hypot(dx, dy)
    return -min(p[0] - shape.lo[0], shape.hi[0] - p[0],
                p[1] - shape.lo[1], shape.hi[1] - p[1])


def point_in_shape(p: Point, shape: Shape) -> bool:
    """Closed-set membership test."""
    if isinstance(shape, Ball2):
        return math.hypot(p[0] - shape.center[0], p[1] - shape.center[1]) <= shape.radius
    return (shape.lo[0] <= p[0] <= shape.hi[0]) and (shape.lo[1] <= p[1] <= shape.hi[1])


@dataclass(frozen=True)
class Environment:
    """Workspace, start and target balls, unsafe obstacles, and the deadline.

    Construction validates the mission is not vacuously broken: the start
    ball must be inside the workspace and clear of the unsafe set at t=0,
    and likewise the target at the deadline.
    """

    workspace: Shape
    start: Ball2
    target: Ball2
    obstacles: tuple[Obstacle, ...]
    t_c: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        if not (math.isfinite(self.t_c) and self.t_c > 0.0):
            raise ConfigError(f"deadline t_c must be > 0, got {self.t_c!r}")
        for name, ball in (("start", self.start), ("target", self.target)):
            if workspace_margin(ball.center, ball.radius, self) > 0.0:
                raise ConfigError(f"{name} ball {ball} is not contained in the workspace")
        for obs in self.obstacles:
            if isinstance(obs.motion, PiecewiseLinear):
                t0 = obs.motion.waypoints[0][0]
                t1 = obs.motion.waypoints[-1][0]
                if t0 > 0.0 or t1 < self.t_c:
                    raise ConfigError(
                        f"obstacle motion covers [{t0:.6g}, {t1:.6g}] but must span "
                        f"[0, {self.t_c:.6g}]")
        for when, name, ball in ((0.0, "start", self.start), (self.t_c, "target", self.target)):
            for obs in self.obstacles:
                if dist_point_shape(ball.center, obs.shape_at(when)) <= ball.radius:
                    raise ConfigError(
                        f"{name} ball intersects an unsafe obstacle at t={when:.6g}")

    def check_time(self, t: float) -> float:
        """Validate ``t`` against [0, t_c], forgiving integration roundoff."""
        slack = _TIME_SLACK * max(self.t_c, 1.0)
        if t < -slack or t > self.t_c + slack:
            raise DomainError(f"time {t!r} outside [0, {self.t_c!r}]")
        return min(max(t, 0.0), self.t_c)


def dist_point_unsafe(p: Point, t: float, env: Environment) -> float:
    """Distance from ``p`` to the unsafe set at time ``t``.

    Returns :data:`NO_OBSTACLE_DISTANCE` when the environment has no
    obstacles, so callers can take minima without special cases.
    """
    t = env.check_time(t)
    if not env.obstacles:
        return NO_OBSTACLE_DISTANCE
    return min(dist_point_shape(p, obs.shape_at(t)) for obs in env.obstacles)


def workspace_margin(c: Point, r: float, env_or_workspace: Environment | Shape) -> float:
    """Containment margin of the ball B(c, r) against the workspace.

    Nonpositive iff the ball lies inside the workspace.  For a ball
    workspace this is ``|c - c_X| + r - r_X``; for a rectangular one it is
    the largest of the four half-plane margins, which keeps the same sign
    convention and the same unit Lipschitz bound in ``c``.
    """
    ws = env_or_workspace.workspace if isinstance(env_or_workspace, Environment) else env_or_workspace
    if isinstance(ws, Ball2):
        return math.hypot(c[0] - ws.center[0], c[1] - ws.center[1]) + r - ws.radius
    return max(ws.lo[0] - c[0] + r, c[0] - ws.hi[0] + r,
               ws.lo[1] - c[1] + r, c[1] - ws.hi[1] + r)


def max_motion_rate(env: Environment) -> float:
    """Fastest obstacle translation speed in the environment."""
    if not env.obstacles:
        return 0.0
    return max(motion_rate(obs.motion) for obs in env.obstacles)
