"""Tube synthesis: sampled minimax program, solver, and certification.

The continuous requirement (stay in the workspace, keep the radius above
its floor, clear the unsafe set at every instant) is relaxed to finitely
many sample times chosen so every instant lies within ``epsilon`` of a
sample.  Minimizing the worst sampled margin gives ``eta_star``; the
analytic Lipschitz bounds of the tube then extend the sampled guarantee
to the whole horizon whenever ``eta_star + rate * epsilon <= 0``.

Two evaluation routes exist on purpose.  The solver works on a vectorized
engine with a smooth softmax surrogate and signed obstacle distances (so
descent can escape overlaps); reported margins always come from the plain
scalar geometry in :mod:`stt.geometry`, which is also what the dense
verifier uses.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from heapq import heappop, heappush

import numpy as np

from .errors import ConfigError
from .geometry import (
    NO_OBSTACLE_DISTANCE,
    Ball2,
    Environment,
    Point,
    Rect,
    dist_point_shape,
    dist_point_unsafe,
    max_motion_rate,
    motion_offset,
    workspace_margin,
)
from .tube import (BasisSpec, Tube, bernstein_values, eval_center, eval_radius,
                   lipschitz_bounds)

__all__ = [
    "SamplingPlan",
    "SopProblem",
    "Certificate",
    "SolverOptions",
    "SolveReport",
    "DenseReport",
    "make_sampling_plan",
    "constraint_values",
    "sampled_eta",
    "tube_from_coefficients",
    "plan_initial_path",
    "initialize_coefficients",
    "solve_sop",
    "solve_sop_report",
    "certify",
    "verify_dense",
]


@dataclass(frozen=True)
class SamplingPlan:
    """Strictly increasing sample times covering [0, t_c] with radius epsilon."""

    epsilon: float
    times: tuple[float, ...]

    @property
    def t_c(self) -> float:
        return self.times[-1]


def make_sampling_plan(t_c: float, epsilon: float) -> SamplingPlan:
    """Midpoint sampling of [0, t_c] at covering radius ``epsilon``.

    Takes the midpoints (2s - 1) * epsilon of the length-2*epsilon bins,
    clamped at t_c, and appends both endpoints.  Every t in [0, t_c] then
    lies within epsilon of some sample.
    """
    if not (math.isfinite(t_c) and t_c > 0.0):
        raise ConfigError(f"horizon t_c must be > 0, got {t_c!r}")
    if not (math.isfinite(epsilon) and 0.0 < epsilon < t_c):
        raise ConfigError(f"covering radius must satisfy 0 < epsilon < t_c, got {epsilon!r}")
    n = math.ceil(t_c / (2.0 * epsilon))
    times = {min((2 * s - 1) * epsilon, t_c) for s in range(1, n + 1)}
    times.update((0.0, t_c))
    return SamplingPlan(epsilon, tuple(sorted(times)))


@dataclass(frozen=True)
class SopProblem:
    """Sampled minimax program over tube coefficients.

    Endpoint coefficients are pinned, not optimized: the tube starts as
    the ball B(c_s, r_s) inside the start set and ends as B(c_t, r_t)
    inside the target set.  The radius floor ``r_d`` keeps the corridor
    wide enough for the tracking layer.
    """

    env: Environment
    basis: BasisSpec
    plan: SamplingPlan
    r_d: float
    c_s: Point
    r_s: float
    c_t: Point
    r_t: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.r_d) and self.r_d > 0.0):
            raise ConfigError(f"radius floor r_d must be > 0, got {self.r_d!r}")
        if self.basis.t_c != self.env.t_c or self.plan.t_c != self.env.t_c:
            raise ConfigError("basis, sampling plan, and environment disagree on t_c")
        for name, r in (("start", self.r_s), ("target", self.r_t)):
            if r < self.r_d:
                raise ConfigError(f"pinned {name} radius {r!r} is below the floor {self.r_d!r}")
        for name, ball, c, r in (("start", self.env.start, self.c_s, self.r_s),
                                 ("target", self.env.target, self.c_t, self.r_t)):
            gap = math.hypot(c[0] - ball.center[0], c[1] - ball.center[1]) + r - ball.radius
            if gap > 1e-12:
                raise ConfigError(f"pinned {name} ball is not contained in the {name} set")

    @classmethod
    def from_environment(cls, env: Environment, basis: BasisSpec,
                         plan: SamplingPlan, r_d: float) -> "SopProblem":
        return cls(env, basis, plan, r_d,
                   env.start.center, env.start.radius,
                   env.target.center, env.target.radius)


def tube_from_coefficients(problem: SopProblem, q) -> Tube:
    """Assemble a tube from the stacked coefficient vector [q_c1, q_c2, q_r]."""
    z = problem.basis.size
    q = [float(v) for v in q]
    if len(q) != 3 * z:
        raise ConfigError(f"coefficient vector has length {len(q)}, expected {3 * z}")
    return Tube(problem.basis, tuple(q[:z]), tuple(q[z:2 * z]), tuple(q[2 * z:]))


def constraint_values(q, problem: SopProblem, t: float) -> tuple[float, float, float]:
    """Margins (g_workspace, g_radius, g_unsafe) of the tube at time ``t``.

    All three are nonpositive exactly when the cross-section at ``t`` is
    admissible.  This is the plain scalar route used for reporting and
    for cross-checking the vectorized solver internals.
    """
    tube = q if isinstance(q, Tube) else tube_from_coefficients(problem, q)
    c = eval_center(tube, t)
    r = eval_radius(tube, t)
    g_ws = workspace_margin(c, r, problem.env)
    g_r = problem.r_d - r
    g_unsafe = r - dist_point_unsafe(c, t, problem.env)
    return (g_ws, g_r, g_unsafe)


def sampled_eta(q, problem: SopProblem) -> float:
    """Exact worst margin over the sampling plan (the quantity certified)."""
    return max(max(constraint_values(q, problem, t)) for t in problem.plan.times)


@dataclass(frozen=True)
class Certificate:
    """Outcome of the sampled-to-continuous validity argument.

    ``L`` is the tube's own rate bound (centre plus radius).  Obstacle
    translation adds ``env_rate``, the fastest unsafe-set speed: between
    samples the clearance can shrink by tube motion and obstacle motion
    alike, so both rates cushion the sampled margin.
    """

    eta_star: float
    L: float
    epsilon: float
    env_rate: float
    valid: bool

    @classmethod
    def build(cls, eta_star: float, L: float, epsilon: float, env_rate: float = 0.0) -> "Certificate":
        valid = eta_star + (L + env_rate) * epsilon <= 0.0
        return cls(eta_star, L, epsilon, env_rate, valid)

    def to_dict(self) -> dict:
        return {"eta_star": self.eta_star, "L": self.L, "epsilon": self.epsilon,
                "env_rate": self.env_rate, "valid": self.valid}

    @classmethod
    def from_dict(cls, doc: dict) -> "Certificate":
        try:
            return cls.build(float(doc["eta_star"]), float(doc["L"]),
                             float(doc["epsilon"]), float(doc.get("env_rate", 0.0)))
        except (KeyError, TypeError, ValueError) as bad:
            raise ConfigError(f"certificate document is malformed: {bad!r}") from None


def certify(tube: Tube, problem: SopProblem, eta_star: float) -> Certificate:
    """Build the validity certificate for a solved tube.

    ``eta_star`` must be the exact sampled maximum for this tube (see
    :func:`sampled_eta`); the certificate then holds over the whole
    horizon, not just the samples, whenever it reports ``valid``.
    """
    l_c, l_r = lipschitz_bounds(tube)
    return Certificate.build(eta_star, l_c + l_r, problem.plan.epsilon,
                             max_motion_rate(problem.env))


# ---------------------------------------------------------------------------
# dense verification (independent of the solver)


@dataclass(frozen=True)
class DenseReport:
    """Worst margins of the three admissibility families on a uniform grid."""

    grid_points: int
    g_radius: float
    t_radius: float
    g_workspace: float
    t_workspace: float
    g_unsafe: float
    t_unsafe: float

    @property
    def worst(self) -> float:
        return max(self.g_radius, self.g_workspace, self.g_unsafe)

    def ok(self, tol: float = 0.0) -> bool:
        return self.worst <= tol

    def to_dict(self) -> dict:
        return {
            "grid_points": self.grid_points,
            "radius": {"margin": self.g_radius, "t": self.t_radius},
            "workspace": {"margin": self.g_workspace, "t": self.t_workspace},
            "unsafe": {"margin": self.g_unsafe, "t": self.t_unsafe},
            "worst": self.worst,
        }


def verify_dense(tube: Tube, env: Environment, grid_points: int) -> DenseReport:
    """Evaluate tube admissibility margins on a uniform time grid.

    Margins are computed directly from the geometry (radius positivity as
    ``-r``, workspace containment, unsafe clearance), with no reference to
    the solver's bookkeeping, so this doubles as an oracle for it.
    """
    if not (isinstance(grid_points, int) and grid_points >= 2):
        raise ConfigError(f"grid_points must be an integer >= 2, got {grid_points!r}")
    if tube.basis.t_c != env.t_c:
        raise ConfigError("tube and environment disagree on t_c")
    degree = tube.basis.degree
    worst = {"radius": (-math.inf, 0.0), "workspace": (-math.inf, 0.0),
             "unsafe": (-math.inf, 0.0)}
    for k in range(grid_points):
        t = env.t_c * k / (grid_points - 1)
        b = bernstein_values(degree, t / env.t_c)
        c = (math.fsum(w * v for w, v in zip(b, tube.q_c1)),
             math.fsum(w * v for w, v in zip(b, tube.q_c2)))
        r = math.fsum(w * v for w, v in zip(b, tube.q_r))
        for name, g in (("radius", -r),
                        ("workspace", workspace_margin(c, r, env)),
                        ("unsafe", r - dist_point_unsafe(c, t, env))):
            if g > worst[name][0]:
                worst[name] = (g, t)
    return DenseReport(grid_points,
                       worst["radius"][0], worst["radius"][1],
                       worst["workspace"][0], worst["workspace"][1],
                       worst["unsafe"][0], worst["unsafe"][1])


# ---------------------------------------------------------------------------
# initialization: coarse grid path, then a least-squares basis fit


def _grid_layers(plan: SamplingPlan, max_layers: int) -> list[float]:
    times = plan.times
    if len(times) <= max_layers:
        return list(times)
    idx = np.unique(np.round(np.linspace(0, len(times) - 1, max_layers)).astype(int))
    return [times[i] for i in idx]


def _workspace_bbox(env: Environment) -> tuple[float, float, float, float]:
    ws = env.workspace
    if isinstance(ws, Ball2):
        (cx, cy), R = ws.center, ws.radius
        return (cx - R, cy - R, cx + R, cy + R)
    return (ws.lo[0], ws.lo[1], ws.hi[0], ws.hi[1])


def _blocked_mask(env: Environment, t: float, xs: np.ndarray, ys: np.ndarray,
                  r_d: float) -> np.ndarray:
    """Cells whose centre cannot host a ball of radius r_d at time t."""
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    ws = env.workspace
    if isinstance(ws, Ball2):
        blocked = np.hypot(X - ws.center[0], Y - ws.center[1]) + r_d > ws.radius
    else:
        blocked = ((X - r_d < ws.lo[0]) | (X + r_d > ws.hi[0])
                   | (Y - r_d < ws.lo[1]) | (Y + r_d > ws.hi[1]))
    for obs in env.obstacles:
        shape = obs.shape_at(t)
        if isinstance(shape, Ball2):
            blocked |= np.hypot(X - shape.center[0], Y - shape.center[1]) <= shape.radius + r_d
        else:
            dx = np.maximum(np.maximum(shape.lo[0] - X, 0.0), X - shape.hi[0])
            dy = np.maximum(np.maximum(shape.lo[1] - Y, 0.0), Y - shape.hi[1])
            blocked |= np.hypot(dx, dy) <= r_d
    return blocked


def _snap_free(mask: np.ndarray, i: int, j: int, max_ring: int = 4) -> tuple[int, int] | None:
    nx, ny = mask.shape
    i = min(max(i, 0), nx - 1)
    j = min(max(j, 0), ny - 1)
    if not mask[i, j]:
        return (i, j)
    for ring in range(1, max_ring + 1):
        for di in range(-ring, ring + 1):
            for dj in range(-ring, ring + 1):
                if max(abs(di), abs(dj)) != ring:
                    continue
                a, b = i + di, j + dj
                if 0 <= a < nx and 0 <= b < ny and not mask[a, b]:
                    return (a, b)
    return None


def plan_initial_path(problem: SopProblem, max_layers: int = 40,
                      cells: int = 72) -> list[tuple[float, Point]] | None:
    """Coarse collision-free path from the start to the target centre.

    Searches an occupancy grid over the workspace; cells are blocked when
    a ball of radius ``r_d`` centred there would touch the unsafe set or
    leave the workspace.  Static environments use a plain spatial search
    with times assigned by arc length; moving obstacles get a layered
    search over (decimated) sample times where each step advances one
    layer.  Returns None when no path is needed or none is found, in
    which case the caller falls back to the straight segment.
    """
    env = problem.env
    if not env.obstacles:
        return None
    x0, y0, x1, y1 = _workspace_bbox(env)
    cell = max((x1 - x0), (y1 - y0)) / cells
    xs = np.arange(x0 + 0.5 * cell, x1, cell)
    ys = np.arange(y0 + 0.5 * cell, y1, cell)

    def cell_of(p: Point) -> tuple[int, int]:
        return (int((p[0] - x0) / cell), int((p[1] - y0) / cell))

    def center_of(i: int, j: int) -> Point:
        return (float(xs[i]), float(ys[j]))

    moving = max_motion_rate(env) > 0.0
    if not moving:
        mask = _blocked_mask(env, 0.0, xs, ys, problem.r_d)
        start = _snap_free(mask, *cell_of(problem.c_s))
        goal = _snap_free(mask, *cell_of(problem.c_t))
        if start is None or goal is None:
            return None
        path = _astar_spatial(mask, start, goal, cell)
        if path is None:
            return None
        pts = [problem.c_s] + [center_of(i, j) for (i, j) in path[1:-1]] + [problem.c_t]
        seg = [math.hypot(b[0] - a[0], b[1] - a[1]) for a, b in zip(pts, pts[1:])]
        total = sum(seg)
        if total <= 0.0:
            return None
        acc, timed = 0.0, [(0.0, pts[0])]
        for length, p in zip(seg, pts[1:]):
            acc += length
            timed.append((env.t_c * acc / total, p))
        return timed

    layers = _grid_layers(problem.plan, max_layers)
    masks = [_blocked_mask(env, t, xs, ys, problem.r_d) for t in layers]
    start = _snap_free(masks[0], *cell_of(problem.c_s))
    goal = _snap_free(masks[-1], *cell_of(problem.c_t))
    if start is None or goal is None:
        return None
    chord = math.hypot(problem.c_t[0] - problem.c_s[0], problem.c_t[1] - problem.c_s[1])
    vmax = 2.0 * chord / env.t_c + max_motion_rate(env) + 0.5
    steps = [min(3, max(1, math.ceil(vmax * (t1 - t0) / cell)))
             for t0, t1 in zip(layers, layers[1:])]
    path = _astar_layered(masks, steps, start, goal, cell)
    if path is None:
        return None
    timed = [(layers[k], center_of(i, j)) for k, (i, j) in enumerate(path)]
    timed[0] = (0.0, problem.c_s)
    timed[-1] = (env.t_c, problem.c_t)
    return timed


def _astar_spatial(mask: np.ndarray, start: tuple[int, int], goal: tuple[int, int],
                   cell: float, cap: int = 200_000) -> list[tuple[int, int]] | None:
    nx, ny = mask.shape
    gx, gy = goal

    def h(i: int, j: int) -> float:
        return cell * math.hypot(i - gx, j - gy)

    frontier = [(h(*start), 0, 0.0, start)]
    came: dict[tuple[int, int], tuple[int, int] | None] = {start: None}
    cost = {start: 0.0}
    tie = 1
    pops = 0
    while frontier:
        _, _, g, node = heappop(frontier)
        pops += 1
        if pops > cap:
            return None
        if node == goal:
            out = [node]
            while came[out[-1]] is not None:
                out.append(came[out[-1]])
            return out[::-1]
        if g > cost.get(node, math.inf):
            continue
        i, j = node
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                if di == 0 and dj == 0:
                    continue
                a, b = i + di, j + dj
                if not (0 <= a < nx and 0 <= b < ny) or mask[a, b]:
                    continue
                ng = g + cell * math.hypot(di, dj)
                if ng < cost.get((a, b), math.inf):
                    cost[(a, b)] = ng
                    came[(a, b)] = node
                    heappush(frontier, (ng + h(a, b), tie, ng, (a, b)))
                    tie += 1
    return None


def _astar_layered(masks: list[np.ndarray], steps: list[int], start: tuple[int, int],
                   goal: tuple[int, int], cell: float,
                   cap: int = 150_000) -> list[tuple[int, int]] | None:
    nx, ny = masks[0].shape
    last = len(masks) - 1
    gx, gy = goal

    def h(i: int, j: int) -> float:
        return cell * math.hypot(i - gx, j - gy)

    start_node = (0, start[0], start[1])
    frontier = [(h(*start), 0, 0.0, start_node)]
    came: dict[tuple[int, int, int], tuple[int, int, int] | None] = {start_node: None}
    cost = {start_node: 0.0}
    tie = 1
    pops = 0
    wait_cost = 0.05 * cell  # prefer short paths without breaking admissibility
    while frontier:
        _, _, g, node = heappop(frontier)
        pops += 1
        if pops > cap:
            return None
        k, i, j = node
        if k == last and (i, j) == goal:
            out = [node]
            while came[out[-1]] is not None:
                out.append(came[out[-1]])
            return [(a, b) for (_, a, b) in out[::-1]]
        if k == last or g > cost.get(node, math.inf):
            continue
        m = steps[k]
        nxt_mask = masks[k + 1]
        for di in range(-m, m + 1):
            for dj in range(-m, m + 1):
                a, b = i + di, j + dj
                if not (0 <= a < nx and 0 <= b < ny) or nxt_mask[a, b]:
                    continue
                ng = g + cell * math.hypot(di, dj) + wait_cost
                nxt = (k + 1, a, b)
                if ng < cost.get(nxt, math.inf):
                    cost[nxt] = ng
                    came[nxt] = node
                    heappush(frontier, (ng + h(a, b), tie, ng, nxt))
                    tie += 1
    return None


def _base_coefficients(problem: SopProblem) -> np.ndarray:
    """Unjittered initial coefficients: path-fit centre, linear radius."""
    z = problem.basis.size
    n = problem.basis.degree
    q1 = np.linspace(problem.c_s[0], problem.c_t[0], z)
    q2 = np.linspace(problem.c_s[1], problem.c_t[1], z)
    path = plan_initial_path(problem)
    if path is not None and len(path) >= 3 and z > 2:
        t_path = np.array([t for t, _ in path])
        px = np.array([p[0] for _, p in path])
        py = np.array([p[1] for _, p in path])
        m = max(4 * z, 40)
        tt = np.linspace(0.0, problem.env.t_c, m)
        fx = np.interp(tt, t_path, px)
        fy = np.interp(tt, t_path, py)
        B = np.array([bernstein_values(n, s) for s in tt / problem.env.t_c])
        A = B[:, 1:-1]
        bx = fx - B[:, 0] * problem.c_s[0] - B[:, -1] * problem.c_t[0]
        by = fy - B[:, 0] * problem.c_s[1] - B[:, -1] * problem.c_t[1]
        q1[1:-1] = np.linalg.lstsq(A, bx, rcond=None)[0]
        q2[1:-1] = np.linalg.lstsq(A, by, rcond=None)[0]
    qr = np.maximum(np.linspace(problem.r_s, problem.r_t, z), problem.r_d)
    return np.concatenate([q1, q2, qr])


def initialize_coefficients(problem: SopProblem, seed: int = 0,
                            jitter: float = 0.2) -> np.ndarray:
    """Initial stacked coefficient vector for one solver start.

    Seed 0 returns the deterministic base (grid-path fit, linear radius);
    other seeds add Gaussian jitter to the interior coefficients only, so
    pinned endpoints survive every restart.  Radius jitter is a quarter
    of the positional jitter since radii live on a tighter scale.
    """
    base = _base_coefficients(problem)
    return _jitter_coefficients(base, problem.basis.size, seed, jitter)


def _jitter_coefficients(base: np.ndarray, z: int, seed: int, jitter: float) -> np.ndarray:
    q = base.copy()
    if seed == 0 or z <= 2 or jitter <= 0.0:
        return q
    rng = np.random.default_rng(seed)
    for block in range(3):
        scale = jitter if block < 2 else 0.25 * jitter
        lo = block * z + 1
        q[lo:lo + z - 2] += rng.normal(0.0, scale, z - 2)
    return q


# ---------------------------------------------------------------------------
# vectorized constraint engine and the annealed softmax solver


@dataclass(frozen=True)
class SolverOptions:
    """Knobs of the multi-start annealed softmax descent."""

    starts: int = 8
    iterations: int = 2000
    rounds: int = 10
    step_size: float = 0.05
    tau_start: float = 1.0
    tau_end: float = 0.01
    jitter: float = 0.2
    seed: int = 0
    workers: int | None = None

    def __post_init__(self) -> None:
        if self.starts < 1 or self.iterations < 1 or self.rounds < 1:
            raise ConfigError("solver needs starts, iterations, and rounds >= 1")
        if not (self.step_size > 0.0 and self.tau_start > 0.0 and self.tau_end > 0.0):
            raise ConfigError("solver step size and temperatures must be > 0")

    def resolved_workers(self) -> int:
        if self.workers is not None:
            return max(1, self.workers)
        try:
            return max(1, int(os.environ.get("STT_WORKERS", "1")))
        except ValueError:
            return 1


@dataclass(frozen=True)
class SolveReport:
    """Best tube plus the incumbent trail of the optimized objective.

    The objective is the certified slack eta + L*eps, not the raw margin;
    eta_star is still the plain sampled max of the returned tube.
    """

    tube: Tube
    eta_star: float
    history: tuple[float, ...]
    per_start: tuple[float, ...]


def _lse(values: np.ndarray, tau: float) -> float:
    peak = float(np.max(values))
    return peak + tau * math.log(float(np.exp((values - peak) / tau).sum()))


def _softmax(values: np.ndarray, tau: float) -> np.ndarray:
    w = np.exp((values - np.max(values)) / tau)
    return w / w.sum()


class _Engine:
    """Vectorized margins and gradients over all samples at once."""

    def __init__(self, problem: SopProblem):
        self.problem = problem
        z = problem.basis.size
        n = problem.basis.degree
        t_c = problem.env.t_c
        self.z = z
        times = np.array(problem.plan.times)
        self.B = np.array([bernstein_values(n, s) for s in times / t_c])
        env = problem.env
        ws = env.workspace
        self.ws_ball = isinstance(ws, Ball2)
        if self.ws_ball:
            self.ws_c = np.array(ws.center)
            self.ws_r = ws.radius
        else:
            self.ws_lo = np.array(ws.lo)
            self.ws_hi = np.array(ws.hi)
        self.discs: list[tuple[np.ndarray, np.ndarray, float]] = []
        self.rects: list[tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = []
        for obs in env.obstacles:
            off = np.array([motion_offset(obs.motion, t) for t in times])
            if isinstance(obs.shape, Ball2):
                cx = obs.shape.center[0] + off[:, 0]
                cy = obs.shape.center[1] + off[:, 1]
                self.discs.append((cx, cy, obs.shape.radius))
            else:
                self.rects.append((obs.shape.lo[0] + off[:, 0], obs.shape.lo[1] + off[:, 1],
                                   obs.shape.hi[0] + off[:, 0], obs.shape.hi[1] + off[:, 1]))
        # free (interior) coefficient indices inside the stacked vector
        idx = []
        for block in range(3):
            idx.extend(range(block * z + 1, block * z + z - 1))
        self.free_idx = np.array(idx, dtype=int)
        self.eps = problem.plan.epsilon
        self.dscale = n / t_c  # coefficient differences to derivative bound

    def fields(self, q: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        z = self.z
        return self.B @ q[:z], self.B @ q[z:2 * z], self.B @ q[2 * z:]

    def exact_eta(self, q: np.ndarray) -> float:
        """Worst sampled margin with true (clamped) obstacle distances."""
        c1, c2, r = self.fields(q)
        worst = np.max(self.problem.r_d - r)
        if self.ws_ball:
            worst = max(worst, np.max(np.hypot(c1 - self.ws_c[0], c2 - self.ws_c[1])
                                      + r - self.ws_r))
        else:
            worst = max(worst, np.max(np.maximum.reduce([
                self.ws_lo[0] - c1 + r, c1 - self.ws_hi[0] + r,
                self.ws_lo[1] - c2 + r, c2 - self.ws_hi[1] + r])))
        for cx, cy, rad in self.discs:
            d = np.maximum(np.hypot(c1 - cx, c2 - cy) - rad, 0.0)
            worst = max(worst, np.max(r - d))
        for lo1, lo2, hi1, hi2 in self.rects:
            dx = np.maximum(np.maximum(lo1 - c1, 0.0), c1 - hi1)
            dy = np.maximum(np.maximum(lo2 - c2, 0.0), c2 - hi2)
            worst = max(worst, np.max(r - np.hypot(dx, dy)))
        return float(worst)

    def exact_slack(self, q: np.ndarray) -> float:
        """Certified objective: worst margin plus the Lipschitz slack L*eps.

        Minimizing the margin alone lets the coefficients oscillate, and a
        jagged tube carries a derivative bound large enough to void its own
        certificate.  The slack term is exactly what certification adds, so
        the incumbent with the smallest value is the easiest to certify.
        """
        z = self.z
        d1 = np.diff(q[:z])
        d2 = np.diff(q[z:2 * z])
        dr = np.diff(q[2 * z:])
        L = self.dscale * (np.max(np.hypot(d1, d2)) + np.max(np.abs(dr)))
        return self.exact_eta(q) + float(L) * self.eps

    def surrogate(self, q: np.ndarray, tau: float) -> tuple[float, np.ndarray]:
        """Softmax relaxation of the sampled max and its gradient.

        Obstacle rows use signed distances so a tube stuck inside an
        obstacle still sees a descent direction; outside they agree with
        the exact margins, and the signed form only over-estimates, so
        descending the surrogate never hides a violation.
        """
        c1, c2, r = self.fields(q)
        n = c1.shape[0]
        vals: list[np.ndarray] = []
        grads: list[tuple[np.ndarray | float, np.ndarray | float, float]] = []
        vals.append(self.problem.r_d - r)
        grads.append((0.0, 0.0, -1.0))
        if self.ws_ball:
            dx, dy = c1 - self.ws_c[0], c2 - self.ws_c[1]
            d = np.hypot(dx, dy)
            safe = np.maximum(d, 1e-12)
            vals.append(d + r - self.ws_r)
            grads.append((dx / safe, dy / safe, 1.0))
        else:
            vals.append(self.ws_lo[0] - c1 + r)
            grads.append((-1.0, 0.0, 1.0))
            vals.append(c1 - self.ws_hi[0] + r)
            grads.append((1.0, 0.0, 1.0))
            vals.append(self.ws_lo[1] - c2 + r)
            grads.append((0.0, -1.0, 1.0))
            vals.append(c2 - self.ws_hi[1] + r)
            grads.append((0.0, 1.0, 1.0))
        for cx, cy, rad in self.discs:
            dx, dy = c1 - cx, c2 - cy
            d = np.hypot(dx, dy)
            safe = np.maximum(d, 1e-12)
            vals.append(r - (d - rad))
            grads.append((-dx / safe, -dy / safe, 1.0))
        for lo1, lo2, hi1, hi2 in self.rects:
            gx = np.where(c1 < lo1, c1 - lo1, np.where(c1 > hi1, c1 - hi1, 0.0))
            gy = np.where(c2 < lo2, c2 - lo2, np.where(c2 > hi2, c2 - hi2, 0.0))
            d = np.hypot(gx, gy)
            outside = d > 0.0
            safe = np.where(outside, d, 1.0)
            gaps = np.stack([c1 - lo1, hi1 - c1, c2 - lo2, hi2 - c2])
            depth = np.min(gaps, axis=0)
            face = np.argmin(gaps, axis=0)
            sd = np.where(outside, d, -depth)
            # inside, walk toward the nearest face; outside, away from the edge
            in1 = np.where(face == 0, 1.0, np.where(face == 1, -1.0, 0.0))
            in2 = np.where(face == 2, 1.0, np.where(face == 3, -1.0, 0.0))
            vals.append(r - sd)
            grads.append((np.where(outside, -gx / safe, in1),
                          np.where(outside, -gy / safe, in2), 1.0))
        g_all = np.concatenate(vals)
        peak = np.max(g_all)
        w = np.exp((g_all - peak) / tau)
        total = w.sum()
        value = float(peak + tau * math.log(total))
        w /= total
        acc1 = np.zeros(n)
        acc2 = np.zeros(n)
        accr = np.zeros(n)
        for k, (d1, d2, dr) in enumerate(grads):
            wk = w[k * n:(k + 1) * n]
            if not (np.isscalar(d1) and d1 == 0.0):
                acc1 += wk * d1
            if not (np.isscalar(d2) and d2 == 0.0):
                acc2 += wk * d2
            accr += wk * dr
        grad = np.concatenate([self.B.T @ acc1, self.B.T @ acc2, self.B.T @ accr])
        # smooth counterpart of the L*eps slack in exact_slack, same tau
        z = self.z
        dq1 = np.diff(q[:z])
        dq2 = np.diff(q[z:2 * z])
        dqr = np.diff(q[2 * z:])
        hc = np.hypot(dq1, dq2)
        scale = self.dscale * self.eps
        value += scale * (_lse(hc, tau) + _lse(np.abs(dqr), tau))
        uc = _softmax(hc, tau)
        ur = _softmax(np.abs(dqr), tau)
        hsafe = np.maximum(hc, 1e-12)
        a1 = uc * dq1 / hsafe
        a2 = uc * dq2 / hsafe
        ar = ur * np.sign(dqr)
        lc_grad = np.zeros(3 * z)
        for block, a in ((0, a1), (1, a2), (2, ar)):
            lc_grad[block * z + 1:(block + 1) * z] += a
            lc_grad[block * z:(block + 1) * z - 1] -= a
        grad += scale * lc_grad
        return value, grad[self.free_idx]


def _optimize_start(engine: _Engine, q0: np.ndarray,
                    options: SolverOptions) -> tuple[float, np.ndarray, list[float]]:
    """Annealed descent from one start; returns its best certified objective."""
    q = q0.copy()
    free = engine.free_idx
    x = q[free].copy()
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    b1, b2, eps = 0.9, 0.999, 1e-8
    taus = np.geomspace(options.tau_start, options.tau_end, options.rounds)
    per_round = max(1, options.iterations // options.rounds)
    best_obj = engine.exact_slack(q)
    best_q = q.copy()
    trail = []
    step = 0
    for tau in taus:
        for _ in range(per_round):
            q[free] = x
            _, g = engine.surrogate(q, float(tau))
            step += 1
            m = b1 * m + (1.0 - b1) * g
            v = b2 * v + (1.0 - b2) * g * g
            mh = m / (1.0 - b1 ** step)
            vh = v / (1.0 - b2 ** step)
            x -= options.step_size * mh / (np.sqrt(vh) + eps)
        q[free] = x
        obj = engine.exact_slack(q)
        if obj < best_obj:
            best_obj = obj
            best_q = q.copy()
        trail.append(best_obj)
    return best_obj, best_q, trail


def solve_sop_report(problem: SopProblem, options: SolverOptions | None = None) -> SolveReport:
    """Multi-start solve with full incumbent bookkeeping."""
    options = options or SolverOptions()
    z = problem.basis.size
    base = _base_coefficients(problem)
    if z == 2:
        tube = tube_from_coefficients(problem, base)
        eta = sampled_eta(tube, problem)
        obj = eta + sum(lipschitz_bounds(tube)) * problem.plan.epsilon
        return SolveReport(tube, eta, (obj,), (obj,))
    engine = _Engine(problem)

    def one_start(j: int) -> tuple[float, np.ndarray, list[float]]:
        q0 = _jitter_coefficients(base, z, options.seed + j, options.jitter)
        return _optimize_start(engine, q0, options)

    workers = options.resolved_workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one_start, range(options.starts)))
    else:
        results = [one_start(j) for j in range(options.starts)]

    history: list[float] = []
    incumbent = math.inf
    per_start = []
    for obj_j, _, trail in results:  # index order keeps the reduction deterministic
        per_start.append(obj_j)
        for obj_round in trail:
            incumbent = min(incumbent, obj_round)
            history.append(incumbent)
    # pick the winner by certified objective, earliest start on ties
    best_idx = min(range(len(results)), key=lambda j: (results[j][0], j))
    best_q = results[best_idx][1]
    tube = tube_from_coefficients(problem, best_q)
    eta_star = sampled_eta(tube, problem)
    return SolveReport(tube, eta_star, tuple(history), tuple(per_start))


def solve_sop(problem: SopProblem, options: SolverOptions | None = None) -> tuple[Tube, float]:
    """Solve the sampled minimax program; returns the tube and its margin.

    Deterministic for fixed problem, options, and seed: starts are
    reduced in index order regardless of worker scheduling.
    """
    report = solve_sop_report(problem, options)
    return report.tube, report.eta_star
