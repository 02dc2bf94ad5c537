"""Scenario documents: parsing, validation, and mission plumbing.

A scenario bundles the environment, a mission (one or more segments, each
a target ball plus a deadline), tube synthesis settings, controller
parameters, and the simulation setup.  Documents are JSON with a fixed
shape; parse errors name the offending field path.  Segment k starts in
segment k-1's target ball, so synthesized tubes join continuously.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

from .controller import ControllerParams, FunnelParams
from .errors import ConfigError
from .geometry import (
    Ball2,
    Environment,
    Motion,
    Obstacle,
    PiecewiseLinear,
    Point,
    Rect,
    Shape,
    Static,
    motion_offset,
)
from .sim import (
    BoundedNoise,
    ConstantBias,
    DisturbanceSpec,
    NoDisturbance,
    RobotState,
    SimConfig,
    SimTrace,
    SinusoidDisturbance,
    Verdict,
    run_segments,
)
from .synthesis import Certificate, SopProblem, SolverOptions, make_sampling_plan
from .tube import BasisSpec, Tube, tube_from_dict, tube_to_dict

DEFAULT_EPSILON_FRACTION = 1.0 / 200.0  # of the segment horizon, before retries


@dataclass(frozen=True)
class Segment:
    target: Ball2
    t_c: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.t_c) and self.t_c > 0.0):
            raise ConfigError(f"segment deadline must be > 0, got {self.t_c!r}")


@dataclass(frozen=True)
class Scenario:
    name: str
    workspace: Shape
    start: Ball2
    obstacles: tuple[Obstacle, ...]
    mission: tuple[Segment, ...]
    degree: int
    r_d: float
    epsilon: float | None
    solver: SolverOptions
    controller: ControllerParams
    sim: SimConfig
    seeds: tuple[int, ...]
    initial: RobotState | None

    def segment_start(self, index: int) -> Ball2:
        return self.start if index == 0 else self.mission[index - 1].target

    def segment_offset(self, index: int) -> float:
        return sum(seg.t_c for seg in self.mission[:index])


# ---------------------------------------------------------------------------
# parsing helpers


def _expect(doc: dict, key: str, path: str):
    if key not in doc:
        raise ConfigError(f"{path}: missing required field {key!r}")
    return doc[key]


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    return float(value)


def _point(value, path: str) -> Point:
    if not (isinstance(value, (list, tuple)) and len(value) == 2):
        raise ConfigError(f"{path}: expected [x, y], got {value!r}")
    return (_number(value[0], path + "[0]"), _number(value[1], path + "[1]"))


def _ball(doc, path: str) -> Ball2:
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected an object with center and radius")
    return Ball2(_point(_expect(doc, "center", path), path + ".center"),
                 _number(_expect(doc, "radius", path), path + ".radius"))


def _shape(doc, path: str) -> Shape:
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a shape object")
    kind = _expect(doc, "kind", path)
    if kind == "disc":
        return _ball(doc, path)
    if kind == "rect":
        return Rect(_point(_expect(doc, "min", path), path + ".min"),
                    _point(_expect(doc, "max", path), path + ".max"))
    raise ConfigError(f"{path}.kind: unknown shape kind {kind!r}")


def _motion(doc, path: str) -> Motion:
    if doc is None:
        return Static()
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a motion object")
    kind = doc.get("kind", "static")
    if kind == "static":
        return Static()
    if kind == "piecewise_linear":
        raw = _expect(doc, "waypoints", path)
        if not isinstance(raw, list) or len(raw) < 2:
            raise ConfigError(f"{path}.waypoints: need at least two [t, [ox, oy]] pairs")
        wps = []
        for i, pair in enumerate(raw):
            p = f"{path}.waypoints[{i}]"
            if not (isinstance(pair, (list, tuple)) and len(pair) == 2):
                raise ConfigError(f"{p}: expected [t, [ox, oy]]")
            wps.append((_number(pair[0], p + "[0]"), _point(pair[1], p + "[1]")))
        return PiecewiseLinear(tuple(wps))
    raise ConfigError(f"{path}.kind: unknown motion kind {kind!r}")


def _disturbance(doc, path: str) -> DisturbanceSpec:
    if doc is None:
        return NoDisturbance()
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a disturbance object")
    kind = doc.get("kind", "none")
    try:
        if kind == "none":
            return NoDisturbance()
        if kind == "bias":
            return ConstantBias(_expect(doc, "d", path))
        if kind == "sinusoid":
            return SinusoidDisturbance(_expect(doc, "amplitudes", path),
                                       _expect(doc, "frequencies", path),
                                       doc.get("phases", (0.0, 0.0, 0.0)))
        if kind == "noise":
            seed = doc.get("seed", 0)
            if isinstance(seed, bool) or not isinstance(seed, int):
                raise ConfigError(f"{path}.seed: expected an integer, got {seed!r}")
            return BoundedNoise(_expect(doc, "bound", path), seed)
    except ConfigError:
        raise
    except (TypeError, ValueError) as bad:
        raise ConfigError(f"{path}: {bad}") from None
    raise ConfigError(f"{path}.kind: unknown disturbance kind {kind!r}")


def _funnel(doc, path: str, default: FunnelParams) -> FunnelParams:
    if doc is None:
        return default
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a funnel object")
    return FunnelParams(
        rho_0=_number(doc.get("rho_0", default.rho_0), path + ".rho_0"),
        rho_inf=_number(doc.get("rho_inf", default.rho_inf), path + ".rho_inf"),
        decay=_number(doc.get("decay", default.decay), path + ".decay"))


def _controller(doc, path: str) -> ControllerParams:
    base = ControllerParams()
    if doc is None:
        return base
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a controller object")
    return ControllerParams(
        k_d=_number(doc.get("k_d", base.k_d), path + ".k_d"),
        k_theta=_number(doc.get("k_theta", base.k_theta), path + ".k_theta"),
        e_bar_d=_number(doc.get("e_bar_d", base.e_bar_d), path + ".e_bar_d"),
        delta=_number(doc.get("delta", base.delta), path + ".delta"),
        funnel_d=_funnel(doc.get("funnel_d"), path + ".funnel_d", base.funnel_d),
        funnel_theta=_funnel(doc.get("funnel_theta"), path + ".funnel_theta", base.funnel_theta),
        e_d_floor=_number(doc.get("e_d_floor", base.e_d_floor), path + ".e_d_floor"))


def _solver(doc, path: str) -> SolverOptions:
    base = SolverOptions()
    if doc is None:
        return base
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a solver object")
    ints = {k: doc.get(k) for k in ("starts", "iterations", "rounds", "seed", "workers")}
    for k, v in ints.items():
        if v is not None and (isinstance(v, bool) or not isinstance(v, int)):
            raise ConfigError(f"{path}.{k}: expected an integer, got {v!r}")
    return SolverOptions(
        starts=ints["starts"] if ints["starts"] is not None else base.starts,
        iterations=ints["iterations"] if ints["iterations"] is not None else base.iterations,
        rounds=ints["rounds"] if ints["rounds"] is not None else base.rounds,
        step_size=_number(doc.get("step_size", base.step_size), path + ".step_size"),
        tau_start=_number(doc.get("tau_start", base.tau_start), path + ".tau_start"),
        tau_end=_number(doc.get("tau_end", base.tau_end), path + ".tau_end"),
        jitter=_number(doc.get("jitter", base.jitter), path + ".jitter"),
        seed=ints["seed"] if ints["seed"] is not None else base.seed,
        workers=ints["workers"])


def parse_scenario(doc: dict, fallback_name: str = "scenario") -> Scenario:
    if not isinstance(doc, dict):
        raise ConfigError("scenario document must be a JSON object")
    name = doc.get("name", fallback_name)
    workspace = _shape(_expect(doc, "workspace", "workspace"), "workspace")
    start = _ball(_expect(doc, "start", "start"), "start")
    obstacles = []
    raw_obs = doc.get("obstacles", [])
    if not isinstance(raw_obs, list):
        raise ConfigError("obstacles: expected a list")
    for i, entry in enumerate(raw_obs):
        path = f"obstacles[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{path}: expected an object")
        obstacles.append(Obstacle(_shape(_expect(entry, "shape", path), path + ".shape"),
                                  _motion(entry.get("motion"), path + ".motion")))
    raw_mission = _expect(doc, "mission", "mission")
    if not (isinstance(raw_mission, list) and raw_mission):
        raise ConfigError("mission: expected a non-empty list of segments")
    mission = []
    for i, entry in enumerate(raw_mission):
        path = f"mission[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(f"{path}: expected an object")
        mission.append(Segment(_ball(_expect(entry, "target", path), path + ".target"),
                               _number(_expect(entry, "t_c", path), path + ".t_c")))
    tube_doc = doc.get("tube", {})
    if not isinstance(tube_doc, dict):
        raise ConfigError("tube: expected an object")
    degree = tube_doc.get("degree", 8)
    if isinstance(degree, bool) or not isinstance(degree, int):
        raise ConfigError(f"tube.degree: expected an integer, got {degree!r}")
    r_d = _number(tube_doc.get("r_d", 0.2), "tube.r_d")
    epsilon = tube_doc.get("epsilon")
    if epsilon is not None:
        epsilon = _number(epsilon, "tube.epsilon")
    sim_doc = doc.get("sim", {})
    if not isinstance(sim_doc, dict):
        raise ConfigError("sim: expected an object")
    step_v = sim_doc.get("step")
    if step_v is not None:
        step_v = _number(step_v, "sim.step")
    stride = sim_doc.get("log_stride", 5)
    if isinstance(stride, bool) or not isinstance(stride, int):
        raise ConfigError(f"sim.log_stride: expected an integer, got {stride!r}")
    align = sim_doc.get("auto_align_heading", True)
    if not isinstance(align, bool):
        raise ConfigError(f"sim.auto_align_heading: expected a boolean, got {align!r}")
    sim_cfg = SimConfig(step=step_v, log_stride=stride, auto_align_heading=align,
                        disturbance=_disturbance(sim_doc.get("disturbance"), "sim.disturbance"))
    seeds_raw = sim_doc.get("seeds", [0])
    if not (isinstance(seeds_raw, list) and seeds_raw
            and all(isinstance(s, int) and not isinstance(s, bool) for s in seeds_raw)):
        raise ConfigError("sim.seeds: expected a non-empty list of integers")
    initial = None
    init_doc = doc.get("initial")
    if init_doc is not None:
        if not isinstance(init_doc, dict):
            raise ConfigError("initial: expected an object")
        pos = _point(_expect(init_doc, "position", "initial"), "initial.position")
        heading = _number(init_doc.get("heading", 0.0), "initial.heading")
        initial = RobotState(pos[0], pos[1], heading)
    return Scenario(
        name=str(name),
        workspace=workspace,
        start=start,
        obstacles=tuple(obstacles),
        mission=tuple(mission),
        degree=degree,
        r_d=r_d,
        epsilon=epsilon,
        solver=_solver(doc.get("solver"), "solver"),
        controller=_controller(doc.get("controller"), "controller"),
        sim=sim_cfg,
        seeds=tuple(seeds_raw),
        initial=initial,
    )


def bundled_scenario_names() -> list[str]:
    root = resources.files("stt").joinpath("scenarios")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_scenario(ref: str | Path) -> Scenario:
    """Load a scenario from a file path or a bundled name."""
    path = Path(ref)
    if path.exists():
        text = path.read_text()
        fallback = path.stem
    else:
        name = str(ref)
        if name in bundled_scenario_names():
            text = resources.files("stt").joinpath(f"scenarios/{name}.json").read_text()
            fallback = name
        else:
            raise ConfigError(
                f"no scenario file {ref!r} and no bundled scenario of that name "
                f"(bundled: {', '.join(bundled_scenario_names())})")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as bad:
        raise ConfigError(f"{ref}: invalid JSON at line {bad.lineno}, column {bad.colno}: "
                          f"{bad.msg}") from None
    return parse_scenario(doc, fallback)


# ---------------------------------------------------------------------------
# per-segment environments and problems


def _rebase_motion(motion: Motion, t0: float, t1: float) -> Motion:
    """Restrict a global-time motion to [t0, t1], rebased to local time 0."""
    if isinstance(motion, Static):
        return motion
    inner = [(t - t0, off) for t, off in motion.waypoints if t0 < t < t1]
    wps = [(0.0, motion_offset(motion, t0))] + inner + [(t1 - t0, motion_offset(motion, t1))]
    dedup = [wps[0]]
    for t, off in wps[1:]:
        if t > dedup[-1][0]:
            dedup.append((t, off))
    if len(dedup) < 2:
        dedup.append((t1 - t0, dedup[0][1]))
    return PiecewiseLinear(tuple(dedup))


def segment_environment(scenario: Scenario, index: int) -> Environment:
    if not 0 <= index < len(scenario.mission):
        raise ConfigError(f"segment index {index} out of range")
    seg = scenario.mission[index]
    t0 = scenario.segment_offset(index)
    obstacles = tuple(
        Obstacle(obs.shape, _rebase_motion(obs.motion, t0, t0 + seg.t_c))
        for obs in scenario.obstacles)
    return Environment(scenario.workspace, scenario.segment_start(index),
                       seg.target, obstacles, seg.t_c)


def segment_epsilon(scenario: Scenario, index: int) -> float:
    if scenario.epsilon is not None:
        return scenario.epsilon
    return scenario.mission[index].t_c * DEFAULT_EPSILON_FRACTION


def build_problem(scenario: Scenario, index: int,
                  epsilon: float | None = None) -> SopProblem:
    env = segment_environment(scenario, index)
    eps = epsilon if epsilon is not None else segment_epsilon(scenario, index)
    plan = make_sampling_plan(env.t_c, eps)
    basis = BasisSpec(degree=scenario.degree, t_c=env.t_c)
    return SopProblem.from_environment(env, basis, plan, scenario.r_d)


# ---------------------------------------------------------------------------
# tube documents (lossless round trip; JSON floats are exact for binary64)


def write_tube_document(path, pairs: list[tuple[Tube, Certificate]]) -> None:
    docs = []
    for tube, cert in pairs:
        doc = tube_to_dict(tube)
        doc["certificate"] = cert.to_dict()
        docs.append(doc)
    payload = docs[0] if len(docs) == 1 else {"segments": docs}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def read_tube_document(path) -> list[tuple[Tube, Certificate]]:
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as bad:
        raise ConfigError(f"{path}: invalid JSON at line {bad.lineno}, column {bad.colno}: "
                          f"{bad.msg}") from None
    if isinstance(payload, dict) and "segments" in payload:
        docs = payload["segments"]
        if not isinstance(docs, list):
            raise ConfigError(f"{path}: segments must be a list")
    elif isinstance(payload, list):
        docs = payload
    else:
        docs = [payload]
    out = []
    for i, doc in enumerate(docs):
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: segment {i} is not an object")
        tube = tube_from_dict(doc)
        cert_doc = doc.get("certificate")
        if cert_doc is None:
            raise ConfigError(f"{path}: segment {i} has no certificate")
        out.append((tube, Certificate.from_dict(cert_doc)))
    return out


# ---------------------------------------------------------------------------
# mission simulation


def _segment_noise_seed(master: int, index: int) -> int:
    # distinct deterministic streams per (run seed, segment)
    return (master * 1_000_003 + 7_919 * index) % (2 ** 63)


def simulate_mission(scenario: Scenario, tubes: list[Tube],
                     seed: int) -> tuple[SimTrace, list[Verdict]]:
    """Run all segments back to back under one master seed."""
    if len(tubes) != len(scenario.mission):
        raise ConfigError(f"tube document has {len(tubes)} segments, "
                          f"scenario needs {len(scenario.mission)}")
    segments = []
    for k, tube in enumerate(tubes):
        env = segment_environment(scenario, k)
        if tube.basis.t_c != env.t_c:
            raise ConfigError(f"segment {k}: tube horizon {tube.basis.t_c!r} does not "
                              f"match the mission deadline {env.t_c!r}")
        cfg = scenario.sim
        if isinstance(cfg.disturbance, BoundedNoise):
            cfg = replace(cfg, disturbance=replace(
                cfg.disturbance, seed=_segment_noise_seed(seed, k)))
        segments.append((env, tube, cfg))
    return run_segments(segments, scenario.controller, scenario.initial)
