"""Closed-form funnel controller that keeps a unicycle inside the tube.

Two normalized errors are tracked: the radial error e_d = |x - c(t)| / r(t)
(1 on the tube boundary) and a heading error e_theta measured against the
bearing from the robot to the tube centre.  Each error is confined to a
shrinking exponential funnel; mapping the normalized error through
log((1 + e_hat) / (1 - e_hat)) blows the gain up near the funnel wall, which
is what turns bounded disturbances into guaranteed containment.

Near the centre the bearing is uninformative, so the heading error is faded
out by a quintic smoothstep of e_d (continuously differentiable twice at
both ends of the band) and the steering channel switches off entirely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ConfigError, FunnelViolation
from .tube import Tube, eval_center, eval_radius

_TWO_OVER_PI = 2.0 / math.pi


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    m = math.fmod(a + math.pi, 2.0 * math.pi)
    if m <= 0.0:
        m += 2.0 * math.pi
    return m - math.pi


def activation(s: float, delta: float) -> float:
    """Quintic smoothstep gate: 0 below 1 - delta, 1 above 1, C^2 between."""
    if not 0.0 < delta <= 1.0:
        raise ConfigError(f"activation band delta must be in (0, 1], got {delta!r}")
    if s <= 1.0 - delta:
        return 0.0
    if s >= 1.0:
        return 1.0
    u = (s - (1.0 - delta)) / delta
    # rounding can push the polynomial an ulp past 1 just below the knee
    return min(1.0, u * u * u * (10.0 + u * (6.0 * u - 15.0)))


@dataclass(frozen=True)
class FunnelParams:
    """Exponential performance funnel rho(t) = (rho_0 - rho_inf) e^{-decay t} + rho_inf."""

    rho_0: float
    rho_inf: float
    decay: float

    def __post_init__(self) -> None:
        if not (0.0 < self.rho_inf <= self.rho_0):
            raise ConfigError(
                f"funnel needs 0 < rho_inf <= rho_0, got {self.rho_inf!r}, {self.rho_0!r}")
        if self.decay < 0.0:
            raise ConfigError(f"funnel decay must be >= 0, got {self.decay!r}")

    def value(self, t: float) -> float:
        return (self.rho_0 - self.rho_inf) * math.exp(-self.decay * t) + self.rho_inf


@dataclass(frozen=True)
class ControllerParams:
    """Gains and funnel shapes; defaults hold up under step disturbances of 0.1.

    Two couplings pin the defaults.  The heading gate releases at
    e_d = (1 - delta) * e_bar_d; that point must sit well below the
    settled radial funnel rho_inf (0.3), otherwise lateral disturbance
    drags e_d through the shrunk funnel while the gate still pins omega
    to zero, and the unbounded radial terms near the wall then overwhelm
    any fixed integrator step.  In the other direction the activation
    must stay partial around rho_inf, since a fresh tube can start with
    e_d there and an arbitrary bearing, and Psi * bearing has to fit
    inside the initial heading funnel.  Gate at 0.15, Psi(0.3 / e_bar_d)
    about 0.21.
    """

    k_d: float = 2.0
    k_theta: float = 2.0
    e_bar_d: float = 0.6
    delta: float = 0.75
    funnel_d: FunnelParams = field(default_factory=lambda: FunnelParams(0.95, 0.3, 1.0))
    funnel_theta: FunnelParams = field(default_factory=lambda: FunnelParams(0.95, 0.35, 1.0))
    e_d_floor: float = 1e-6

    def __post_init__(self) -> None:
        if self.k_d <= 0.0 or self.k_theta <= 0.0:
            raise ConfigError("controller gains must be > 0")
        if self.e_bar_d <= 0.0:
            raise ConfigError(f"activation threshold e_bar_d must be > 0, got {self.e_bar_d!r}")
        if not 0.0 < self.delta < 1.0:
            raise ConfigError(f"activation band delta must be in (0, 1), got {self.delta!r}")
        if self.e_d_floor <= 0.0:
            raise ConfigError(f"e_d_floor must be > 0, got {self.e_d_floor!r}")
        if self.funnel_d.rho_0 >= 1.0:
            # e_hat_d < 1 must imply e_d < 1 so funnel containment implies tube containment
            raise ConfigError(
                f"radial funnel rho_0 must be < 1, got {self.funnel_d.rho_0!r}")


@dataclass(frozen=True)
class ErrorState:
    """Normalized errors, their funnels, and transformed magnitudes at one instant."""

    e_d: float
    e_theta: float
    e_hat_d: float
    e_hat_theta: float
    eps_d: float
    eps_theta: float
    psi: float
    bearing: float  # wrap(psi - theta); kept so the law needs no extra state
    rho_d: float
    rho_theta: float


def _transform(e_hat: float) -> float:
    return math.log((1.0 + e_hat) / (1.0 - e_hat))


def compute_errors(state: tuple[float, float, float], t: float, tube: Tube,
                   params: ControllerParams) -> ErrorState:
    """Evaluate both tracking errors at time ``t``.

    Raises :class:`FunnelViolation` when either normalized error has
    reached its funnel boundary; the transformation is undefined there
    and the guarantee is gone, so this is a hard failure, not a clamp.
    """
    x1, x2, theta = state
    c1, c2 = eval_center(tube, t)
    r = eval_radius(tube, t)
    e_d = math.hypot(x1 - c1, x2 - c2) / r
    if e_d > params.e_d_floor:
        psi = math.atan2(c2 - x2, c1 - x1)
        bearing = wrap_angle(psi - theta)
    else:
        # at the centre the bearing is undefined; any value works since the
        # gate has zeroed the heading error and eps_d vanishes with e_d
        psi = theta
        bearing = 0.0
    gate = activation(e_d / params.e_bar_d, params.delta)
    e_theta = gate * _TWO_OVER_PI * bearing
    rho_d = params.funnel_d.value(t)
    rho_theta = params.funnel_theta.value(t)
    e_hat_d = e_d / rho_d
    e_hat_theta = e_theta / rho_theta
    if e_hat_d >= 1.0:
        raise FunnelViolation(t, "e_hat_d", e_hat_d)
    if abs(e_hat_theta) >= 1.0:
        raise FunnelViolation(t, "e_hat_theta", e_hat_theta)
    return ErrorState(e_d, e_theta, e_hat_d, e_hat_theta,
                      _transform(e_hat_d), _transform(e_hat_theta),
                      psi, bearing, rho_d, rho_theta)


def control_law(err: ErrorState, t: float, tube: Tube,
                params: ControllerParams) -> tuple[float, float]:
    """Forward and angular velocity commands from the transformed errors.

    The radial channel pushes along the bearing to the tube centre
    (forward when facing it, reversing when facing away); the steering
    channel turns the heading toward that bearing.  Inside the gated
    region the steering channel is exactly zero.
    """
    if abs(err.e_hat_d) >= 1.0:
        raise FunnelViolation(t, "e_hat_d", err.e_hat_d)
    if abs(err.e_hat_theta) >= 1.0:
        raise FunnelViolation(t, "e_hat_theta", err.e_hat_theta)
    r = eval_radius(tube, t)
    alpha_d = 2.0 / ((1.0 - err.e_hat_d ** 2) * err.rho_d * r)
    if err.e_d < (1.0 - params.delta) * params.e_bar_d:
        eps_alpha_theta = 0.0
    else:
        alpha_theta = ((2.0 / (1.0 - err.e_hat_theta ** 2)) * _TWO_OVER_PI
                       / (err.rho_theta * max(err.e_d, params.e_d_floor) * r))
        eps_alpha_theta = err.eps_theta * alpha_theta
    v = params.k_d * (err.eps_d * alpha_d * math.cos(err.bearing)
                      - eps_alpha_theta * math.sin(err.bearing))
    omega = params.k_theta * eps_alpha_theta
    if not (math.isfinite(v) and math.isfinite(omega)):
        raise FunnelViolation(t, "control", math.inf)
    return v, omega
