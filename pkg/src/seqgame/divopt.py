"""Divergence minimization over distortion balls and channel sets.

Every optimizer here is a hand-rolled projected-gradient or projection
method; brute-force lattice searches are provided as independent oracles
for tests and are never called by the solvers themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import xlogy

from .errors import DomainError, InfeasibleError, ResourceError, ShapeError
from .prob import Channel, Distribution, DistortionMeasure, _kl_arrays

__all__ = [
    "SolverOptions",
    "DistortionBall",
    "BallMinResult",
    "PairMinResult",
    "ChannelMinMaxResult",
    "channel_from_output",
    "min_divergence_to_ball",
    "pairwise_min_divergence",
    "min_max_divergence_over_channel",
    "min_divergence_over_common_channels",
    "simplex_lattice",
    "ball_lattice",
    "grid_oracle_min",
    "grid_oracle_min_channels",
    "refine_simplex_min",
]

_FEASIBILITY_SLACK = 1e-9


@dataclass(frozen=True)
class SolverOptions:
    """Knobs shared by the iterative solvers."""

    tolerance: float = 1e-10
    max_iterations: int = 10_000
    patience: int = 5
    initial_step: float = 1.0

    def __post_init__(self) -> None:
        if self.tolerance <= 0 or self.max_iterations < 1 or self.patience < 1:
            raise DomainError("solver options must be positive")


_DEFAULT_OPTIONS = SolverOptions()


def _loose_binary_kl(t: float, s: float) -> float:
    """Binary KL with t allowed on the closed interval [0, 1]; s interior."""
    return float(xlogy(t, t / s) + xlogy(1.0 - t, (1.0 - t) / (1.0 - s)))


def _interior_binary_kl(c: float, t: float) -> float:
    return c * math.log(c / t) + (1.0 - c) * math.log((1.0 - c) / (1.0 - t))


@dataclass(frozen=True, eq=False)
class DistortionBall:
    """All distributions within a distortion budget of a center.

    The feasible set is {q : d(center, q) <= radius, q >= floor entrywise,
    sum(q) = 1}. The center itself must clear the floor, otherwise the
    floored set might be empty and the ball is rejected.
    """

    center: Distribution
    radius: float
    measure: DistortionMeasure
    floor: float = 1e-9

    def __post_init__(self) -> None:
        if self.radius < 0:
            raise DomainError(f"radius must be nonnegative, got {self.radius!r}")
        if not (0.0 <= self.floor < 1.0 / self.center.size):
            raise DomainError("floor must satisfy 0 <= floor < 1/K")
        if not self.center.is_fully_supported(self.floor):
            raise InfeasibleError(
                "ball center falls below the support floor; feasible set may be empty"
            )

    @property
    def size(self) -> int:
        return self.center.size

    def distortion(self, point) -> float:
        return self.measure.evaluate(self.center, point)

    def contains(self, point, slack: float = _FEASIBILITY_SLACK) -> bool:
        arr = point.probs if isinstance(point, Distribution) else np.asarray(point, dtype=float)
        if arr.shape != self.center.probs.shape:
            raise ShapeError("point alphabet does not match the ball center")
        if abs(arr.sum() - 1.0) > slack or np.any(arr < self.floor - slack):
            return False
        return self.measure.evaluate(self.center.probs, arr) <= self.radius + slack

    @cached_property
    def interval(self) -> tuple[float, float]:
        """Feasible range of the first coordinate; binary alphabets only."""
        if self.size != 2:
            raise ShapeError("interval reduction applies to binary alphabets only")
        c = float(self.center.probs[0])
        lo_cap, hi_cap = self.floor, 1.0 - self.floor
        if self.measure is DistortionMeasure.TV_L1:
            # sum|q - c| = 2|q0 - c0| for binary vectors
            lo, hi = c - self.radius / 2.0, c + self.radius / 2.0
        else:
            lo = _bisect_kl_edge(c, self.radius, lo_cap, c, descending=True)
            hi = _bisect_kl_edge(c, self.radius, c, hi_cap, descending=False)
        return max(lo, lo_cap), min(hi, hi_cap)

    def project(self, point) -> np.ndarray:
        """Euclidean projection onto the feasible set (Dykstra alternation)."""
        y = np.asarray(point, dtype=float)
        return _project_feasible(y, self)


def _bisect_kl_edge(c: float, radius: float, lo: float, hi: float, descending: bool) -> float:
    """Root of D(c || t) = radius on [lo, hi] where the map is monotone."""
    g_far = _interior_binary_kl(c, lo if descending else hi)
    if g_far <= radius:
        return lo if descending else hi
    a, b = lo, hi
    for _ in range(200):
        mid = 0.5 * (a + b)
        g = _interior_binary_kl(c, mid)
        exceeded = g > radius
        if descending:
            if exceeded:
                a = mid
            else:
                b = mid
        else:
            if exceeded:
                b = mid
            else:
                a = mid
    return b if descending else a


# ---------------------------------------------------------------------------
# Euclidean projections


def _project_simplex_floor(y: np.ndarray, floor: float) -> np.ndarray:
    """Projection onto {x : sum x = 1, x >= floor} via the sorting method."""
    k = y.size
    mass = 1.0 - k * floor
    z = y - floor
    u = np.sort(z)[::-1]
    css = np.cumsum(u) - mass
    idx = np.arange(1, k + 1)
    cond = u - css / idx > 0
    rho = int(np.nonzero(cond)[0][-1])
    theta = css[rho] / (rho + 1.0)
    return np.maximum(z - theta, 0.0) + floor


def _project_l1_ball(y: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    z = y - center
    mag = np.abs(z)
    if mag.sum() <= radius:
        return y.copy()
    u = np.sort(mag)[::-1]
    css = np.cumsum(u)
    idx = np.arange(1, u.size + 1)
    theta_cand = (css - radius) / idx
    rho = int(np.nonzero(u > theta_cand)[0][-1])
    theta = theta_cand[rho]
    return center + np.sign(z) * np.maximum(mag - theta, 0.0)


def _project_kl_sublevel(y: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    """Projection onto {x : D(center || x) <= radius}; coordinates off the
    center's support are unconstrained."""
    support = center > 0.0
    c = center[support]
    ys = y[support]

    def level(xs: np.ndarray) -> float:
        if np.any(xs <= 0.0):
            return math.inf
        return float(np.dot(c, np.log(c) - np.log(xs)))

    if level(ys) <= radius:
        return y.copy()

    # KKT stationarity gives x_i = (y_i + sqrt(y_i^2 + 4 mu c_i)) / 2 with the
    # multiplier mu > 0 solving D(center || x(mu)) = radius; the level is
    # strictly decreasing in mu, so bisection applies.
    def x_of(mu: float) -> np.ndarray:
        return 0.5 * (ys + np.sqrt(ys * ys + 4.0 * mu * c))

    mu_hi = 1e-8
    while level(x_of(mu_hi)) > radius:
        mu_hi *= 4.0
        if mu_hi > 1e12:
            break
    mu_lo = 0.0
    for _ in range(200):
        mid = 0.5 * (mu_lo + mu_hi)
        if level(x_of(mid)) > radius:
            mu_lo = mid
        else:
            mu_hi = mid
    out = y.copy()
    out[support] = x_of(mu_hi)
    return out


def _project_kl_feasible(y: np.ndarray, center: np.ndarray, radius: float,
                         floor: float) -> np.ndarray:
    """Exact projection onto {x : sum x = 1, x >= floor, D(center || x) <= radius}.

    Stationarity gives x_i = max(floor, ((y_i - lam) + sqrt((y_i - lam)^2
    + 4 mu c_i)) / 2) with lam enforcing the sum and mu >= 0 the divergence
    level. Both scalars come from nested bisections, so the result is
    feasible to bisection precision rather than to an alternation tolerance.
    """

    def x_of(lam: float, mu: float) -> np.ndarray:
        t = y - lam
        return np.maximum(floor, 0.5 * (t + np.sqrt(t * t + 4.0 * mu * center)))

    def solve_lam(mu: float) -> np.ndarray:
        lo, hi = -1.0, 1.0
        while x_of(lo, mu).sum() < 1.0:
            lo *= 2.0
        while x_of(hi, mu).sum() > 1.0:
            hi *= 2.0
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if x_of(mid, mu).sum() > 1.0:
                lo = mid
            else:
                hi = mid
        return x_of(0.5 * (lo + hi), mu)

    def level(x: np.ndarray) -> float:
        return float(xlogy(center, center / x).sum())

    x = solve_lam(0.0)
    if level(x) <= radius:
        return x
    mu_hi = 1e-10
    while level(solve_lam(mu_hi)) > radius:
        mu_hi *= 8.0
    mu_lo = 0.0
    for _ in range(120):
        mid = 0.5 * (mu_lo + mu_hi)
        if level(solve_lam(mid)) > radius:
            mu_lo = mid
        else:
            mu_hi = mid
    return solve_lam(mu_hi)


def _project_feasible(y: np.ndarray, ball: DistortionBall, max_cycles: int = 400) -> np.ndarray:
    """Projection onto the ball intersected with the floored simplex.

    The divergence ball case is solved exactly through its stationarity
    conditions; alternating projections converge too slowly there because
    the small sublevel set meets the simplex at a shallow angle. The
    polyhedral case runs Dykstra alternation, ending on a simplex projection
    so the floor and sum constraints hold exactly.
    """
    if ball.measure is DistortionMeasure.KL:
        return _project_kl_feasible(y.astype(float), ball.center.probs,
                                    ball.radius, ball.floor)
    x = y.astype(float)
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    a = x
    for _ in range(max_cycles):
        b = _project_l1_ball(x + p, ball.center.probs, ball.radius)
        p = x + p - b
        a = _project_simplex_floor(b + q, ball.floor)
        q = b + q - a
        if np.max(np.abs(a - b)) <= 1e-13:
            break
        x = a
    return a


# ---------------------------------------------------------------------------
# Projected gradient descent over a single ball


@dataclass(frozen=True)
class BallMinResult:
    value: float
    argmin: Distribution
    converged: bool
    iterations: int


def _minimize_over_ball(value_fn, grad_fn, ball: DistortionBall, options: SolverOptions,
                        x0: np.ndarray | None = None) -> tuple[float, np.ndarray, bool, int]:
    x = _project_feasible(ball.center.probs if x0 is None else np.asarray(x0, float), ball)
    f = value_fn(x)
    step = options.initial_step
    quiet = 0
    iters = 0
    for iters in range(1, options.max_iterations + 1):
        g = grad_fn(x)
        step = min(step * 2.0, 1e6)
        accepted = False
        while step > 1e-16:
            cand = _project_feasible(x - step * g, ball)
            delta = cand - x
            norm2 = float(np.dot(delta, delta))
            if norm2 == 0.0:
                break
            fc = value_fn(cand)
            if fc <= f + float(np.dot(g, delta)) + norm2 / (2.0 * step):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            return f, x, True, iters
        rel = (f - fc) / max(abs(f), 1e-300)
        x, f = cand, fc
        quiet = quiet + 1 if rel < options.tolerance else 0
        if quiet >= options.patience:
            return f, x, True, iters
    return f, x, False, iters


def channel_from_output(source: Distribution, output: Distribution) -> Channel:
    """The rank-one channel sending every input symbol to the output law.

    Pushing `source` (or anything else) through it reproduces `output`
    exactly, which realizes any target output distribution.
    """
    if source.size != output.size:
        raise ShapeError("source and output must share one alphabet")
    return Channel(np.tile(output.probs, (source.size, 1)))


def min_divergence_to_ball(qhat, ball: DistortionBall,
                           options: SolverOptions | None = None) -> BallMinResult:
    """Minimize D(qhat || q) over the ball; the reach of one adversary.

    Value is zero exactly when qhat itself is feasible. Binary alphabets
    reduce to clamping qhat onto the feasible interval; larger alphabets run
    projected gradient descent with Dykstra projections.
    """
    opts = options or _DEFAULT_OPTIONS
    q0 = qhat.probs if isinstance(qhat, Distribution) else np.asarray(qhat, dtype=float)
    if q0.shape != ball.center.probs.shape:
        raise ShapeError("qhat alphabet does not match the ball center")

    if ball.size == 2:
        lo, hi = ball.interval
        t = float(q0[0])
        tc = min(max(t, lo), hi)
        value = 0.0 if tc == t else _loose_binary_kl(t, tc)
        arg = Distribution(np.array([tc, 1.0 - tc]))
        return BallMinResult(value, arg, True, 0)

    if ball.contains(q0, slack=0.0):
        return BallMinResult(0.0, Distribution(q0), True, 0)

    def value_fn(x: np.ndarray) -> float:
        return _kl_arrays(q0, x)

    support = q0 > 0.0

    def grad_fn(x: np.ndarray) -> np.ndarray:
        g = np.zeros_like(x)
        g[support] = -q0[support] / x[support]
        return g

    f, x, converged, iters = _minimize_over_ball(value_fn, grad_fn, ball, opts)
    return BallMinResult(f, Distribution(x), converged, iters)


@dataclass(frozen=True)
class PairMinResult:
    value: float
    argmin_first: Distribution
    argmin_second: Distribution
    converged: bool
    iterations: int


def pairwise_min_divergence(ball_first: DistortionBall, ball_second: DistortionBall,
                            options: SolverOptions | None = None) -> PairMinResult:
    """Minimize D(q1 || q2) jointly over two balls.

    The objective is jointly convex and the feasible set is a product, so
    alternating exact block minimization reaches the global optimum.
    """
    opts = options or _DEFAULT_OPTIONS
    if ball_first.size != ball_second.size:
        raise ShapeError("balls must share one alphabet")

    if ball_first.size == 2:
        a1, b1 = ball_first.interval
        a2, b2 = ball_second.interval
        lo, hi = max(a1, a2), min(b1, b2)
        if lo <= hi:  # overlapping reach: both adversaries meet at one law
            t = min(max(float(ball_first.center.probs[0]), lo), hi)
            shared = Distribution(np.array([t, 1.0 - t]))
            return PairMinResult(0.0, shared, shared, True, 0)
        if b1 < a2:
            t1, t2 = b1, a2
        else:
            t1, t2 = a1, b2
        value = _interior_binary_kl(t1, t2)
        return PairMinResult(
            value,
            Distribution(np.array([t1, 1.0 - t1])),
            Distribution(np.array([t2, 1.0 - t2])),
            True,
            0,
        )

    q2 = _project_feasible(ball_second.center.probs, ball_second)
    q1 = _project_feasible(ball_first.center.probs, ball_first)
    best = _kl_arrays(q1, q2)
    quiet = 0
    converged = False
    total_iters = 0
    for _ in range(200):
        def value_first(x: np.ndarray) -> float:
            return _kl_arrays(x, q2)

        def grad_first(x: np.ndarray) -> np.ndarray:
            return np.log(x) - np.log(q2) + 1.0

        f1, q1, _, it1 = _minimize_over_ball(value_first, grad_first, ball_first, opts, x0=q1)
        inner = min_divergence_to_ball(Distribution(q1), ball_second, opts)
        q2 = inner.argmin.probs
        total_iters += it1 + inner.iterations
        value = inner.value
        rel = (best - value) / max(abs(best), 1e-300)
        best = value
        quiet = quiet + 1 if rel < opts.tolerance else 0
        if quiet >= opts.patience:
            converged = True
            break
    return PairMinResult(best, Distribution(q1), Distribution(q2), converged, total_iters)


# ---------------------------------------------------------------------------
# Channel-space min-max


@dataclass(frozen=True)
class ChannelMinMaxResult:
    value: float
    channel: Channel
    converged: bool
    iterations: int


def _row_project(a: np.ndarray, floor: float) -> np.ndarray:
    out = np.empty_like(a)
    for i in range(a.shape[0]):
        out[i] = _project_simplex_floor(a[i], floor)
    return out


def min_max_divergence_over_channel(qhat, p0: Distribution, p1: Distribution, delta: float,
                                    measure: DistortionMeasure,
                                    options: SolverOptions | None = None,
                                    floor: float = 1e-9,
                                    start: np.ndarray | None = None,
                                    branches: tuple[int, ...] = (0, 1)) -> ChannelMinMaxResult:
    """Minimize max over `branches` of D(qhat || p_b A) over channels A with
    d(p0, p0 A) <= delta and d(p1, p1 A) <= delta.

    Solved by log-sum-exp smoothing of the max plus a log-barrier on the two
    distortion constraints, driven to zero over a continuation schedule, with
    projected gradient steps on the rows. The identity channel is always
    strictly feasible for delta > 0 and seeds the search. A projected
    subgradient pass from the identity acts as a fallback if continuation
    ever produces nothing usable.
    """
    opts = options or _DEFAULT_OPTIONS
    q = qhat.probs if isinstance(qhat, Distribution) else np.asarray(qhat, dtype=float)
    pa = p0.probs
    pb = p1.probs
    k = pa.size
    if q.shape != pa.shape or pa.shape != pb.shape:
        raise ShapeError("qhat, p0, p1 must share one alphabet")
    if delta < 0:
        raise DomainError("delta must be nonnegative")
    if np.any(pa <= 0.0) or np.any(pb <= 0.0):
        raise DomainError("both hypothesis laws must have full support")
    if not branches or any(b not in (0, 1) for b in branches):
        raise DomainError("branches must be a nonempty subset of (0, 1)")
    laws = (pa, pb)

    if delta == 0.0:
        value = max(_kl_arrays(q, laws[b]) for b in branches)
        return ChannelMinMaxResult(value, Channel.identity(k), True, 0)

    support = q > 0.0

    def outputs(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return pa @ a, pb @ a

    def distortions(o0: np.ndarray, o1: np.ndarray) -> tuple[float, float]:
        return measure.evaluate(pa, o0), measure.evaluate(pb, o1)

    def objective(outs) -> float:
        return max(_kl_arrays(q, outs[b]) for b in branches)

    def raw(a: np.ndarray) -> tuple[float, float, float]:
        outs = outputs(a)
        t0, t1 = distortions(*outs)
        return objective(outs), t0, t1

    def div_grad(p: np.ndarray, out: np.ndarray) -> np.ndarray:
        # gradient of D(q || p A) in A
        w = np.zeros_like(out)
        w[support] = -q[support] / out[support]
        return np.outer(p, w)

    def dist_grad(p: np.ndarray, out: np.ndarray) -> np.ndarray:
        if measure is DistortionMeasure.TV_L1:
            return np.outer(p, np.sign(out - p))
        return np.outer(p, -p / out)

    def smoothed(a: np.ndarray, beta: float, mu: float):
        outs = outputs(a)
        t0, t1 = distortions(*outs)
        divs = [_kl_arrays(q, outs[b]) for b in branches]
        if t0 >= delta or t1 >= delta or not all(map(math.isfinite, divs)):
            return math.inf, None
        top = max(divs)
        scaled = np.exp((np.asarray(divs) - top) / mu)
        total = float(scaled.sum())
        weights = scaled / total
        val = top + mu * math.log(total)
        val -= beta * (math.log(delta - t0) + math.log(delta - t1))
        grad = np.zeros_like(a)
        for w, b in zip(weights, branches):
            grad += w * div_grad(laws[b], outs[b])
        grad += beta / (delta - t0) * dist_grad(pa, outs[0])
        grad += beta / (delta - t1) * dist_grad(pb, outs[1])
        return val, grad

    identity = _row_project(np.eye(k), floor)
    a = _row_project(np.asarray(start, float), floor) if start is not None else identity
    best_val, bt0, bt1 = raw(a)
    if bt0 > delta or bt1 > delta:
        a = identity
        best_val, _, _ = raw(a)
    best_a = a.copy()

    stages = [(1e-2, 1e-2), (1e-3, 1e-3), (1e-4, 1e-4), (1e-5, 1e-5),
              (1e-6, 1e-6), (1e-7, 1e-7), (1e-8, 1e-7)]
    inner_budget = max(40, opts.max_iterations // 50)
    total_iters = 0
    converged = True
    for beta, mu in stages:
        val, grad = smoothed(a, beta, mu)
        if not math.isfinite(val):
            a = identity
            val, grad = smoothed(a, beta, mu)
        step = opts.initial_step
        quiet = 0
        for _ in range(inner_budget):
            total_iters += 1
            step = min(step * 2.0, 1e4)
            accepted = False
            while step > 1e-15:
                cand = _row_project(a - step * grad, floor)
                diff = cand - a
                norm2 = float(np.sum(diff * diff))
                if norm2 == 0.0:
                    break
                cval, cgrad = smoothed(cand, beta, mu)
                if cval <= val + float(np.sum(grad * diff)) + norm2 / (2.0 * step):
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                break
            rel = (val - cval) / max(abs(val), 1e-300)
            a, val, grad = cand, cval, cgrad
            rv, t0, t1 = raw(a)
            if t0 <= delta + 1e-12 and t1 <= delta + 1e-12 and rv < best_val:
                best_val, best_a = rv, a.copy()
            if rel < max(opts.tolerance, beta * 1e-4):
                quiet += 1
                if quiet >= opts.patience:
                    break
            else:
                quiet = 0

    if not math.isfinite(best_val):
        # fallback: projected subgradient with exact penalty from the identity
        converged = False
        a = identity
        best_a = a.copy()
        best_val, _, _ = raw(a)
        for it in range(1, 500):
            outs = outputs(a)
            divs = [(_kl_arrays(q, outs[b]), b) for b in branches]
            _, active = max(divs)
            g = div_grad(laws[active], outs[active])
            t0, t1 = distortions(*outs)
            if t0 > delta:
                g = g + 10.0 * dist_grad(pa, outs[0])
            if t1 > delta:
                g = g + 10.0 * dist_grad(pb, outs[1])
            a = _row_project(a - (0.1 / math.sqrt(it)) * g, floor)
            rv, t0, t1 = raw(a)
            if t0 <= delta + 1e-12 and t1 <= delta + 1e-12 and rv < best_val:
                best_val, best_a = rv, a.copy()

    return ChannelMinMaxResult(best_val, Channel(best_a), converged, total_iters)


def min_divergence_over_common_channels(qhat, target: int, p0: Distribution, p1: Distribution,
                                        delta: float, measure: DistortionMeasure,
                                        options: SolverOptions | None = None,
                                        floor: float = 1e-9,
                                        start: np.ndarray | None = None) -> ChannelMinMaxResult:
    """Minimize D(qhat || p_target A) over channels feasible for both laws.

    Unlike `min_divergence_to_ball`, one channel must respect the distortion
    budget of both hypotheses at once, so the reach of `target` is smaller
    than its own ball.
    """
    if target not in (0, 1):
        raise DomainError("target selects one of the two laws, 0 or 1")
    return min_max_divergence_over_channel(
        qhat, p0, p1, delta, measure, options=options, floor=floor,
        start=start, branches=(target,),
    )


# ---------------------------------------------------------------------------
# Brute-force oracles (test support only)


def simplex_lattice(size: int, resolution: int) -> np.ndarray:
    """All integer vectors of the given size summing to `resolution`."""
    if size < 1 or resolution < 0:
        raise DomainError("size must be >= 1 and resolution >= 0")
    if size == 1:
        return np.array([[resolution]], dtype=np.int64)
    blocks = []
    for first in range(resolution + 1):
        sub = simplex_lattice(size - 1, resolution - first)
        head = np.full((sub.shape[0], 1), first, dtype=np.int64)
        blocks.append(np.hstack([head, sub]))
    return np.vstack(blocks)


def ball_lattice(ball: DistortionBall, step: float, max_points: int = 4_000_000) -> np.ndarray:
    """Lattice points of pitch `step` lying inside the ball."""
    n = int(round(1.0 / step))
    count = math.comb(n + ball.size - 1, ball.size - 1)
    if count > max_points:
        raise ResourceError(f"lattice would hold {count} points (limit {max_points})")
    pts = simplex_lattice(ball.size, n).astype(float) / n
    keep = np.all(pts >= ball.floor, axis=1)
    pts = pts[keep]
    c = ball.center.probs
    if ball.measure is DistortionMeasure.TV_L1:
        dist = np.abs(pts - c).sum(axis=1)
    else:
        with np.errstate(divide="ignore"):
            dist = xlogy(c, c / pts).sum(axis=1)
    return pts[dist <= ball.radius + 1e-12]


def grid_oracle_min(objective, ball: DistortionBall, step: float,
                    max_points: int = 4_000_000) -> tuple[float, Distribution]:
    """Exhaustive lattice minimization over a ball; alphabets up to size 3.

    `objective` receives an (N, K) array of candidate rows and must return
    N values. Intended as an independent check on the iterative solvers.
    """
    if ball.size > 3:
        raise ResourceError("exhaustive ball grids support alphabets up to size 3")
    pts = ball_lattice(ball, step, max_points)
    if pts.shape[0] == 0:
        raise InfeasibleError("no lattice point falls inside the ball")
    values = np.asarray(objective(pts), dtype=float)
    idx = int(np.argmin(values))
    return float(values[idx]), Distribution(pts[idx])


def grid_oracle_min_channels(objective, feasible, step: float,
                             max_points: int = 4_000_000) -> tuple[float, Channel]:
    """Exhaustive search over binary-alphabet channels [[a,1-a],[1-b,b]].

    `objective` and `feasible` receive flat arrays of a, b values and return
    per-point values / booleans.
    """
    n = int(round(1.0 / step))
    if (n + 1) ** 2 > max_points:
        raise ResourceError(f"channel grid would hold {(n + 1) ** 2} points")
    g = np.linspace(0.0, 1.0, n + 1)
    a, b = np.meshgrid(g, g, indexing="ij")
    a = a.ravel()
    b = b.ravel()
    ok = np.asarray(feasible(a, b), dtype=bool)
    if not np.any(ok):
        raise InfeasibleError("no grid channel satisfies the distortion budget")
    a, b = a[ok], b[ok]
    values = np.asarray(objective(a, b), dtype=float)
    idx = int(np.argmin(values))
    rows = np.array([[a[idx], 1.0 - a[idx]], [1.0 - b[idx], b[idx]]])
    return float(values[idx]), Channel(rows)


def refine_simplex_min(objective, start, initial_step: float = 0.1,
                       final_step: float = 1e-5, feasible=None) -> tuple[float, np.ndarray]:
    """Pattern descent on the simplex along e_i - e_j moves with shrinking
    pitch. For a convex objective this converges to the global minimum from
    any start; used to sharpen coarse lattice searches.
    """
    x = np.asarray(start, dtype=float).copy()
    k = x.size
    moves = []
    for i in range(k):
        for j in range(k):
            if i != j:
                m = np.zeros(k)
                m[i] += 1.0
                m[j] -= 1.0
                moves.append(m)
    moves = np.array(moves)
    best = float(np.asarray(objective(x[None, :]))[0])
    h = initial_step
    while h >= final_step:
        improved = True
        while improved:
            cands = x[None, :] + h * moves
            ok = np.all(cands >= 0.0, axis=1)
            if feasible is not None:
                ok &= np.asarray(feasible(cands), dtype=bool)
            if not np.any(ok):
                break
            cands = cands[ok]
            vals = np.asarray(objective(cands), dtype=float)
            idx = int(np.argmin(vals))
            if vals[idx] < best - 1e-18:
                best = float(vals[idx])
                x = cands[idx]
            else:
                improved = False
        h *= 0.5
    return best, x
