"""Time-varying circular corridors parameterized by Bernstein expansions.

A tube is a disc B(c(t), r(t)) whose centre coordinates and radius are
polynomials in normalized time s = t / t_c, written in the Bernstein
basis.  That basis buys three things the synthesis step leans on: the
endpoint coefficients interpolate exactly (so boundary conditions are
pinned, not penalized), evaluation is numerically benign on [0, 1], and
the convex-hull property turns coefficient differences into analytic
bounds on the time derivatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from .errors import ConfigError, DomainError
from .geometry import Point

_TIME_SLACK = 1e-9


@dataclass(frozen=True)
class BasisSpec:
    """Shared polynomial basis for the centre coordinates and the radius."""

    degree: int
    t_c: float
    kind: str = "bernstein"

    def __post_init__(self) -> None:
        if self.kind != "bernstein":
            raise ConfigError(f"unsupported basis kind {self.kind!r}")
        if not (isinstance(self.degree, int) and self.degree >= 1):
            raise ConfigError(f"basis degree must be an integer >= 1, got {self.degree!r}")
        if not (math.isfinite(self.t_c) and self.t_c > 0.0):
            raise ConfigError(f"basis horizon t_c must be > 0, got {self.t_c!r}")

    @property
    def size(self) -> int:
        """Number of coefficients per expanded function."""
        return self.degree + 1


@lru_cache(maxsize=None)
def _binomials(n: int) -> tuple[float, ...]:
    return tuple(float(math.comb(n, k)) for k in range(n + 1))


def bernstein_values(degree: int, s: float) -> list[float]:
    """All degree-``degree`` Bernstein polynomials evaluated at s in [0, 1].

    The returned values are nonnegative and sum to 1 (partition of unity);
    at s = 0 and s = 1 the vector is exactly a coordinate unit vector,
    which is what makes endpoint pinning exact.
    """
    binom = _binomials(degree)
    u = 1.0 - s
    # powers built incrementally; degree stays small so this is exact enough
    spow = [1.0] * (degree + 1)
    upow = [1.0] * (degree + 1)
    for k in range(1, degree + 1):
        spow[k] = spow[k - 1] * s
        upow[k] = upow[k - 1] * u
    return [binom[k] * spow[k] * upow[degree - k] for k in range(degree + 1)]


@dataclass(frozen=True)
class Tube:
    """Bernstein coefficients of the centre coordinates and the radius."""

    basis: BasisSpec
    q_c1: tuple[float, ...]
    q_c2: tuple[float, ...]
    q_r: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "q_c1", tuple(float(v) for v in self.q_c1))
        object.__setattr__(self, "q_c2", tuple(float(v) for v in self.q_c2))
        object.__setattr__(self, "q_r", tuple(float(v) for v in self.q_r))
        z = self.basis.size
        for name, q in (("q_c1", self.q_c1), ("q_c2", self.q_c2), ("q_r", self.q_r)):
            if len(q) != z:
                raise ConfigError(f"{name} has {len(q)} coefficients, basis needs {z}")
            if not all(math.isfinite(v) for v in q):
                raise ConfigError(f"{name} contains non-finite coefficients")

    @property
    def t_c(self) -> float:
        return self.basis.t_c


def _normalized_time(tube: Tube, t: float) -> float:
    t_c = tube.basis.t_c
    slack = _TIME_SLACK * max(t_c, 1.0)
    if t < -slack or t > t_c + slack:
        raise DomainError(f"time {t!r} outside tube horizon [0, {t_c!r}]")
    return min(max(t / t_c, 0.0), 1.0)


def eval_center(tube: Tube, t: float) -> Point:
    """Centre c(t) of the tube cross-section."""
    b = bernstein_values(tube.basis.degree, _normalized_time(tube, t))
    return (math.fsum(w * q for w, q in zip(b, tube.q_c1)),
            math.fsum(w * q for w, q in zip(b, tube.q_c2)))


def eval_radius(tube: Tube, t: float) -> float:
    """Radius r(t) of the tube cross-section."""
    b = bernstein_values(tube.basis.degree, _normalized_time(tube, t))
    return math.fsum(w * q for w, q in zip(b, tube.q_r))


def _diff_eval(q: tuple[float, ...], degree: int, s: float, t_c: float) -> float:
    # derivative of a degree-n expansion: n/t_c times the degree-(n-1)
    # expansion of forward coefficient differences
    b = bernstein_values(degree - 1, s)
    return (degree / t_c) * math.fsum(w * (q[k + 1] - q[k]) for k, w in enumerate(b))


def eval_center_derivative(tube: Tube, t: float) -> Point:
    """Time derivative of the centre."""
    s = _normalized_time(tube, t)
    n, t_c = tube.basis.degree, tube.basis.t_c
    return (_diff_eval(tube.q_c1, n, s, t_c), _diff_eval(tube.q_c2, n, s, t_c))


def eval_radius_derivative(tube: Tube, t: float) -> float:
    """Time derivative of the radius."""
    return _diff_eval(tube.q_r, tube.basis.degree, _normalized_time(tube, t), tube.basis.t_c)


def lipschitz_bounds(tube: Tube) -> tuple[float, float]:
    """Analytic Lipschitz bounds (L_c, L_r) for the centre and radius.

    Each derivative is a Bernstein expansion of scaled forward coefficient
    differences, so by the convex-hull property its magnitude never
    exceeds n/t_c times the largest difference.  The two coordinate
    bounds combine into a Euclidean bound for the planar centre.
    """
    n, t_c = tube.basis.degree, tube.basis.t_c
    scale = n / t_c

    def axis_bound(q: tuple[float, ...]) -> float:
        return scale * max(abs(q[k + 1] - q[k]) for k in range(n))

    return math.hypot(axis_bound(tube.q_c1), axis_bound(tube.q_c2)), axis_bound(tube.q_r)


def tube_to_dict(tube: Tube) -> dict:
    """Plain-data form of a tube; lossless for binary64 coefficients."""
    return {
        "t_c": tube.basis.t_c,
        "degree": tube.basis.degree,
        "q_c1": list(tube.q_c1),
        "q_c2": list(tube.q_c2),
        "q_r": list(tube.q_r),
    }


def tube_from_dict(doc: dict) -> Tube:
    """Inverse of :func:`tube_to_dict`; raises ConfigError on bad fields."""
    try:
        basis = BasisSpec(degree=int(doc["degree"]), t_c=float(doc["t_c"]))
        return Tube(basis, tuple(doc["q_c1"]), tuple(doc["q_c2"]), tuple(doc["q_r"]))
    except KeyError as missing:
        raise ConfigError(f"tube document is missing field {missing}") from None
    except (TypeError, ValueError) as bad:
        raise ConfigError(f"tube document is malformed: {bad}") from None
