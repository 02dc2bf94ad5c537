"""Disturbed differential-drive simulation of the funnel-tracked tube.

The closed loop (unicycle + funnel controller) is integrated with a fixed
step classical Runge-Kutta scheme.  Smooth disturbance models are
evaluated at the internal stage times so the integrator keeps its order;
the sampled-noise model is by definition piecewise constant over steps,
so its step value is held through all four stages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .controller import ControllerParams, ErrorState, compute_errors, control_law
from .errors import ConfigError, FunnelViolation
from .geometry import Environment, dist_point_unsafe, workspace_margin
from .tube import Tube, eval_center, eval_radius

Triple = tuple[float, float, float]


@dataclass(frozen=True)
class RobotState:
    """Planar pose; heading is unwrapped (integrated without modulo)."""

    x1: float
    x2: float
    theta: float


def dynamics(state: RobotState, u: tuple[float, float], d: Triple) -> Triple:
    """Unicycle vector field under control u = (v, omega) and disturbance d."""
    v, omega = u
    return (v * math.cos(state.theta) + d[0],
            v * math.sin(state.theta) + d[1],
            omega + d[2])


def _triple(value, name: str) -> Triple:
    if isinstance(value, (int, float)):
        return (float(value),) * 3
    out = tuple(float(v) for v in value)
    if len(out) != 3:
        raise ConfigError(f"{name} needs 3 channels (x1, x2, theta), got {value!r}")
    return out


@dataclass(frozen=True)
class NoDisturbance:
    def bound(self) -> Triple:
        return (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class ConstantBias:
    d: Triple

    def __post_init__(self) -> None:
        object.__setattr__(self, "d", _triple(self.d, "bias"))

    def bound(self) -> Triple:
        return tuple(abs(v) for v in self.d)


@dataclass(frozen=True)
class SinusoidDisturbance:
    """Per-channel a * sin(2 pi f t + phase); smooth in t by construction."""

    amplitudes: Triple
    frequencies: Triple
    phases: Triple = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "amplitudes", _triple(self.amplitudes, "amplitudes"))
        object.__setattr__(self, "frequencies", _triple(self.frequencies, "frequencies"))
        object.__setattr__(self, "phases", _triple(self.phases, "phases"))

    def bound(self) -> Triple:
        return tuple(abs(a) for a in self.amplitudes)

    def value(self, t: float) -> Triple:
        return tuple(a * math.sin(2.0 * math.pi * f * t + p)
                     for a, f, p in zip(self.amplitudes, self.frequencies, self.phases))


@dataclass(frozen=True)
class BoundedNoise:
    """Uniform draws in [-bound, bound] held constant over each integration step."""

    bound_value: Triple
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "bound_value", _triple(self.bound_value, "noise bound"))

    def bound(self) -> Triple:
        return self.bound_value


DisturbanceSpec = NoDisturbance | ConstantBias | SinusoidDisturbance | BoundedNoise


@dataclass(frozen=True)
class SimConfig:
    """Integration step, horizon, logging cadence, and the disturbance model.

    ``step=None`` resolves to t_c / 5000; an explicit step must still keep
    at least 100 steps over the horizon or the funnel dynamics are
    under-resolved.
    """

    step: float | None = None
    duration: float | None = None
    log_stride: int = 5
    auto_align_heading: bool = True
    disturbance: DisturbanceSpec = field(default_factory=NoDisturbance)

    def __post_init__(self) -> None:
        if not (isinstance(self.log_stride, int) and self.log_stride >= 1):
            raise ConfigError(f"log_stride must be an integer >= 1, got {self.log_stride!r}")
        if self.step is not None and self.step <= 0.0:
            raise ConfigError(f"integration step must be > 0, got {self.step!r}")
        if self.duration is not None and self.duration <= 0.0:
            raise ConfigError(f"duration must be > 0, got {self.duration!r}")


TRACE_COLUMNS = ("t", "x1", "x2", "theta", "v", "omega", "e_d", "e_theta",
                 "rho_d", "rho_theta", "in_tube", "clearance")


@dataclass(frozen=True)
class SimTrace:
    """Logged rows in :data:`TRACE_COLUMNS` order."""

    rows: tuple[tuple[float, ...], ...]

    def column(self, name: str) -> list[float]:
        k = TRACE_COLUMNS.index(name)
        return [row[k] for row in self.rows]

    def final_state(self) -> RobotState:
        t, x1, x2, theta = self.rows[-1][:4]
        return RobotState(x1, x2, theta)

    def to_csv(self, path) -> None:
        lines = [",".join(TRACE_COLUMNS)]
        for row in self.rows:
            cells = [repr(float(v)) if i != 10 else str(int(v))
                     for i, v in enumerate(row)]
            lines.append(",".join(cells))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path) -> "SimTrace":
        with open(path) as fh:
            header = fh.readline().strip()
            if tuple(header.split(",")) != TRACE_COLUMNS:
                raise ConfigError(f"unexpected trace header in {path}: {header!r}")
            rows = []
            for line in fh:
                line = line.strip()
                if line:
                    rows.append(tuple(float(v) for v in line.split(",")))
        if not rows:
            raise ConfigError(f"trace file {path} has no data rows")
        return cls(tuple(rows))


@dataclass(frozen=True)
class Verdict:
    """Pass/fail summary of one simulated segment."""

    reached_target: bool
    hit_time: float | None
    always_safe: bool
    always_in_tube: bool
    min_clearance: float
    final_target_distance: float

    @property
    def all_true(self) -> bool:
        return self.reached_target and self.always_safe and self.always_in_tube

    def to_dict(self) -> dict:
        return {
            "reached_target": self.reached_target,
            "hit_time": self.hit_time,
            "always_safe": self.always_safe,
            "always_in_tube": self.always_in_tube,
            "min_clearance": self.min_clearance,
            "final_target_distance": self.final_target_distance,
            "all_true": self.all_true,
        }


def step(state: RobotState, t: float, h: float, tube: Tube, params: ControllerParams,
         disturbance) -> RobotState:
    """One classical 4th-order Runge-Kutta step of the closed loop.

    ``disturbance`` is either a constant triple (held through the step) or
    a callable of time, evaluated at each internal stage.  The control is
    always recomputed at the stage time and state.
    """
    if callable(disturbance):
        d_at = disturbance
    else:
        frozen = disturbance

        def d_at(_t: float) -> Triple:
            return frozen

    def f(x1: float, x2: float, theta: float, tau: float) -> Triple:
        err = compute_errors((x1, x2, theta), tau, tube, params)
        v, omega = control_law(err, tau, tube, params)
        d = d_at(tau)
        return (v * math.cos(theta) + d[0], v * math.sin(theta) + d[1], omega + d[2])

    x1, x2, th = state.x1, state.x2, state.theta
    k1 = f(x1, x2, th, t)
    k2 = f(x1 + 0.5 * h * k1[0], x2 + 0.5 * h * k1[1], th + 0.5 * h * k1[2], t + 0.5 * h)
    k3 = f(x1 + 0.5 * h * k2[0], x2 + 0.5 * h * k2[1], th + 0.5 * h * k2[2], t + 0.5 * h)
    k4 = f(x1 + h * k3[0], x2 + h * k3[1], th + h * k3[2], t + h)
    s = h / 6.0
    return RobotState(x1 + s * (k1[0] + 2.0 * (k2[0] + k3[0]) + k4[0]),
                      x2 + s * (k1[1] + 2.0 * (k2[1] + k3[1]) + k4[1]),
                      th + s * (k1[2] + 2.0 * (k2[2] + k3[2]) + k4[2]))


def _resolve_initial(env: Environment, tube: Tube, params: ControllerParams,
                     cfg: SimConfig, initial: RobotState | None) -> RobotState:
    if initial is None:
        c = eval_center(tube, 0.0)
        initial = RobotState(c[0], c[1], 0.0)
    c1, c2 = eval_center(tube, 0.0)
    r = eval_radius(tube, 0.0)
    e_d0 = math.hypot(initial.x1 - c1, initial.x2 - c2) / r
    if e_d0 >= params.funnel_d.rho_0:
        raise ConfigError(
            f"initial radial error e_d={e_d0:.6g} is outside the funnel "
            f"(rho_d(0)={params.funnel_d.rho_0:.6g})")
    if cfg.auto_align_heading and e_d0 > params.e_d_floor:
        psi0 = math.atan2(c2 - initial.x2, c1 - initial.x1)
        initial = RobotState(initial.x1, initial.x2, psi0)
    try:
        compute_errors((initial.x1, initial.x2, initial.theta), 0.0, tube, params)
    except FunnelViolation as bad:
        raise ConfigError(f"inadmissible initial condition: {bad}") from None
    return initial


def run(env: Environment, tube: Tube, params: ControllerParams, cfg: SimConfig,
        initial: RobotState | None = None) -> tuple[SimTrace, Verdict]:
    """Simulate one segment and judge it against the reach-avoid-stay goal.

    The funnel controller aborts (raising :class:`FunnelViolation`) if a
    normalized error ever reaches its funnel wall; an inadmissible start
    raises :class:`ConfigError` instead, since no guarantee was ever on
    the table.
    """
    if tube.basis.t_c != env.t_c:
        raise ConfigError("tube and environment disagree on t_c")
    duration = env.t_c if cfg.duration is None else cfg.duration
    if duration > env.t_c * (1.0 + 1e-12):
        raise ConfigError(f"duration {duration!r} exceeds the tube horizon {env.t_c!r}")
    h = duration / 5000.0 if cfg.step is None else cfg.step
    if h > duration / 100.0:
        raise ConfigError(f"step {h!r} too coarse: need at least 100 steps over {duration!r}")
    state = _resolve_initial(env, tube, params, cfg, initial)

    spec = cfg.disturbance
    rng = np.random.default_rng(spec.seed) if isinstance(spec, BoundedNoise) else None
    smooth = spec.value if isinstance(spec, SinusoidDisturbance) else None
    constant = spec.d if isinstance(spec, ConstantBias) else (0.0, 0.0, 0.0)

    n_steps = max(1, math.ceil(duration / h - 1e-9))
    rows: list[tuple[float, ...]] = []

    def log_row(t: float, s: RobotState) -> None:
        err = compute_errors((s.x1, s.x2, s.theta), t, tube, params)
        v, omega = control_law(err, t, tube, params)
        clearance = dist_point_unsafe((s.x1, s.x2), t, env)
        rows.append((t, s.x1, s.x2, s.theta, v, omega, err.e_d, err.e_theta,
                     err.rho_d, err.rho_theta, float(err.e_d < 1.0), clearance))

    t = 0.0
    for k in range(n_steps):
        if k % cfg.log_stride == 0:
            log_row(t, state)
        h_k = min(h, duration - t)
        if isinstance(spec, BoundedNoise):
            b = spec.bound_value
            draw = rng.uniform(-1.0, 1.0, 3)
            # plain floats: np scalars would otherwise leak into the trace
            disturbance: Triple | object = (b[0] * float(draw[0]),
                                            b[1] * float(draw[1]),
                                            b[2] * float(draw[2]))
        elif smooth is not None:
            disturbance = smooth
        else:
            disturbance = constant
        state = step(state, t, h_k, tube, params, disturbance)
        t = min(t + h_k, duration)
    log_row(duration, state)

    tgt = env.target
    reached, hit_time = False, None
    always_safe = True
    always_in_tube = True
    min_clearance = math.inf
    for row in rows:
        rt, x1, x2 = row[0], row[1], row[2]
        if not reached and math.hypot(x1 - tgt.center[0], x2 - tgt.center[1]) <= tgt.radius:
            reached, hit_time = True, rt
        if workspace_margin((x1, x2), 0.0, env) > 0.0 or row[11] <= 0.0:
            always_safe = False
        if row[6] >= 1.0:
            always_in_tube = False
        min_clearance = min(min_clearance, row[11])
    final = rows[-1]
    final_dist = math.hypot(final[1] - tgt.center[0], final[2] - tgt.center[1])
    verdict = Verdict(reached, hit_time, always_safe, always_in_tube,
                      min_clearance, final_dist)
    return SimTrace(tuple(rows)), verdict


def run_segments(segments: list[tuple[Environment, Tube, SimConfig]],
                 params: ControllerParams,
                 initial: RobotState | None = None) -> tuple[SimTrace, list[Verdict]]:
    """Chain segment simulations, carrying the pose across junctions.

    Each segment's funnel clocks restart at its local time zero; logged
    times are offset into one global timeline.
    """
    rows: list[tuple[float, ...]] = []
    verdicts: list[Verdict] = []
    state = initial
    offset = 0.0
    for env, tube, cfg in segments:
        trace, verdict = run(env, tube, params, cfg, state)
        verdicts.append(verdict)
        rows.extend((row[0] + offset,) + row[1:] for row in trace.rows)
        state = trace.final_state()
        offset += env.t_c if cfg.duration is None else cfg.duration
    return SimTrace(tuple(rows)), verdicts
