"""Worst-case adversary strategies and the limiting payoff of the game.

An adversary attached to hypothesis i may replace samples through any
channel whose output law stays within the distortion budget of the source,
so its reach is a ball around the hypothesis. The decision maker's limiting
per-sample evidence under hypothesis i is the smallest divergence from the
adversary's chosen law to any rival ball, and the game value weights those
exponents across hypotheses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .divopt import (
    ChannelMinMaxResult,
    DistortionBall,
    PairMinResult,
    SolverOptions,
    _minimize_over_ball,
    _row_project,
    channel_from_output,
    min_divergence_to_ball,
    min_max_divergence_over_channel,
    pairwise_min_divergence,
)
from .errors import ConstructionError, DegenerateGameError, DomainError, InfeasibleError, ShapeError
from .prob import Channel, Distribution, DistortionMeasure, apply_channel, kl_divergence

__all__ = [
    "GameSpec",
    "EquilibriumSolution",
    "NonAwareBounds",
    "solve_aware_equilibrium",
    "equilibrium_payoff",
    "min_pairwise_bhattacharyya",
    "nonaware_achievable",
    "nonaware_converse",
    "solve_nonaware_adversary",
]

_FEASIBILITY_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class GameSpec:
    """The full game: hypotheses, distortion budget, and mixing weights.

    Construction verifies that no two adversaries can reach a common output
    law; otherwise the hypotheses are statistically indistinguishable at
    this budget and every sequential procedure breaks down.
    """

    hypotheses: tuple[Distribution, ...]
    delta: float
    measure: DistortionMeasure
    weights: tuple[float, ...] = ()
    support_floor: float = 1e-9
    separation_floor: float = 1e-8

    def __post_init__(self) -> None:
        hyps = tuple(self.hypotheses)
        if len(hyps) < 2:
            raise ConstructionError("a testing game needs at least two hypotheses")
        size = hyps[0].size
        if any(h.size != size for h in hyps):
            raise ShapeError("all hypotheses must share one alphabet")
        for idx, h in enumerate(hyps):
            if not h.is_fully_supported(self.support_floor):
                raise ConstructionError(
                    f"hypothesis {idx} falls below the support floor {self.support_floor}"
                )
        for i in range(len(hyps)):
            for j in range(i + 1, len(hyps)):
                if np.max(np.abs(hyps[i].probs - hyps[j].probs)) <= 1e-12:
                    raise ConstructionError(f"hypotheses {i} and {j} coincide")
        if self.delta < 0:
            raise DomainError("delta must be nonnegative")
        weights = tuple(self.weights) if self.weights else (1.0,) * len(hyps)
        if len(weights) != len(hyps):
            raise ShapeError("need one weight per hypothesis")
        if any(w <= 0 for w in weights):
            raise DomainError("weights must be positive")
        object.__setattr__(self, "hypotheses", hyps)
        object.__setattr__(self, "weights", weights)
        # touching the cache runs the separation check eagerly
        self.pairwise_minima

    @property
    def num_hypotheses(self) -> int:
        return len(self.hypotheses)

    @property
    def alphabet_size(self) -> int:
        return self.hypotheses[0].size

    @cached_property
    def balls(self) -> tuple[DistortionBall, ...]:
        return tuple(
            DistortionBall(h, self.delta, self.measure, self.support_floor)
            for h in self.hypotheses
        )

    @cached_property
    def pairwise_minima(self) -> dict[tuple[int, int], PairMinResult]:
        """Joint minima of D(q_i || q_j) over ordered pairs of balls.

        The smallest entry must clear the separation floor or the game is
        degenerate.
        """
        balls = self.balls
        out: dict[tuple[int, int], PairMinResult] = {}
        for i in range(len(balls)):
            for j in range(len(balls)):
                if i != j:
                    out[(i, j)] = pairwise_min_divergence(balls[i], balls[j])
        worst = min(r.value for r in out.values())
        if worst < self.separation_floor:
            raise DegenerateGameError(
                f"distortion budget {self.delta} lets adversaries close the gap "
                f"between some pair of hypotheses (min divergence {worst:.3e})"
            )
        return out


@dataclass(frozen=True)
class EquilibriumSolution:
    """Mutually best adversary laws and the resulting error exponents.

    divergence_matrix[i, j] is the divergence from adversary i's chosen law
    to the closest point of rival ball j (diagonal entries are +inf);
    exponents[i] is the row minimum and payoff the weighted sum.
    """

    q_star: tuple[Distribution, ...]
    divergence_matrix: np.ndarray
    exponents: np.ndarray
    payoff: float
    witness_channels: tuple[Channel, ...]
    converged: bool


def solve_aware_equilibrium(spec: GameSpec,
                            options: SolverOptions | None = None) -> EquilibriumSolution:
    """Solve every adversary's best response assuming rivals also optimize.

    Adversary i picks the law in its ball minimizing the divergence to the
    closest rival ball; enumerating the ordered pairs is exact. The reported
    matrix re-solves each inner minimum at the chosen law.
    """
    m = spec.num_hypotheses
    if options is None:
        pair = spec.pairwise_minima
    else:
        pair = {
            (i, j): pairwise_min_divergence(spec.balls[i], spec.balls[j], options)
            for i in range(m) for j in range(m) if i != j
        }
    q_star = []
    converged = True
    for i in range(m):
        rivals = [(pair[(i, j)].value, j) for j in range(m) if j != i]
        _, j_best = min(rivals)
        best = pair[(i, j_best)]
        q_star.append(best.argmin_first)
        converged &= best.converged
    matrix = np.full((m, m), math.inf)
    for i in range(m):
        for j in range(m):
            if i != j:
                res = min_divergence_to_ball(q_star[i], spec.balls[j], options)
                matrix[i, j] = res.value
                converged &= res.converged
    exponents = matrix.min(axis=1)
    payoff = equilibrium_payoff(exponents, spec.weights)
    witnesses = tuple(
        channel_from_output(spec.hypotheses[i], q_star[i]) for i in range(m)
    )
    return EquilibriumSolution(tuple(q_star), matrix, exponents, payoff, witnesses, converged)


def equilibrium_payoff(exponents, weights) -> float:
    """Weighted sum of per-hypothesis exponents; weights must be positive."""
    e = np.asarray(exponents, dtype=float)
    w = np.asarray(weights, dtype=float)
    if e.shape != w.shape:
        raise ShapeError("exponents and weights must have matching lengths")
    if np.any(w <= 0):
        raise DomainError("weights must be positive")
    return float(np.dot(e, w))


def _bhattacharyya_pair_min(ball_a: DistortionBall, ball_b: DistortionBall,
                            options: SolverOptions) -> float:
    """Smallest Bhattacharyya distance between laws of two balls."""
    if ball_a.size == 2:
        a1, b1 = ball_a.interval
        a2, b2 = ball_b.interval
        if max(a1, a2) <= min(b1, b2):
            return 0.0
        t1, t2 = (b1, a2) if b1 < a2 else (a1, b2)
        coeff = math.sqrt(t1 * t2) + math.sqrt((1.0 - t1) * (1.0 - t2))
        return -math.log(coeff)

    qb = ball_b.project(ball_b.center.probs)
    qa = ball_a.project(ball_a.center.probs)
    best = math.inf
    quiet = 0
    for _ in range(200):
        def value_a(x, other=qb):
            return -math.log(float(np.sqrt(x * other).sum()))

        def grad_a(x, other=qb):
            coeff = float(np.sqrt(x * other).sum())
            return -0.5 * np.sqrt(other / x) / coeff

        _, qa, _, _ = _minimize_over_ball(value_a, grad_a, ball_a, options, x0=qa)

        def value_b(x, other=qa):
            return -math.log(float(np.sqrt(x * other).sum()))

        def grad_b(x, other=qa):
            coeff = float(np.sqrt(x * other).sum())
            return -0.5 * np.sqrt(other / x) / coeff

        value, qb, _, _ = _minimize_over_ball(value_b, grad_b, ball_b, options, x0=qb)
        rel = (best - value) / max(abs(best), 1e-300)
        best = min(best, value)
        quiet = quiet + 1 if rel < options.tolerance else 0
        if quiet >= options.patience:
            break
    return best


def min_pairwise_bhattacharyya(spec: GameSpec,
                               options: SolverOptions | None = None) -> float:
    """The Bhattacharyya separation of the game: the smallest Bhattacharyya
    distance any two adversaries can arrange between their output laws.

    Controls the exponential tail of the stopping time.
    """
    opts = options or SolverOptions()
    balls = spec.balls
    best = math.inf
    for i in range(len(balls)):
        for j in range(i + 1, len(balls)):
            best = min(best, _bhattacharyya_pair_min(balls[i], balls[j], opts))
    return best


# ---------------------------------------------------------------------------
# Non-aware adversary: one common channel for both hypotheses (binary games)


@dataclass(frozen=True)
class NonAwareBounds:
    """Payoff bounds at a common channel choice.

    `achievable` is what the decision maker can guarantee, `converse` what
    no procedure can beat; achievable <= converse always. The channel comes
    from a multistart heuristic, hence the flag.
    """

    achievable: float
    converse: float
    channel: Channel
    heuristic: bool


def _check_common_feasible(p0: Distribution, p1: Distribution, channel: Channel,
                           delta: float, measure: DistortionMeasure) -> tuple[Distribution, Distribution]:
    out0 = apply_channel(p0, channel)
    out1 = apply_channel(p1, channel)
    d0 = measure.evaluate(p0, out0)
    d1 = measure.evaluate(p1, out1)
    if d0 > delta + _FEASIBILITY_SLACK or d1 > delta + _FEASIBILITY_SLACK:
        raise InfeasibleError(
            f"channel distorts the hypotheses by ({d0:.3e}, {d1:.3e}), budget {delta}"
        )
    return out0, out1


def nonaware_achievable(p0: Distribution, p1: Distribution, channel: Channel,
                        delta: float, measure: DistortionMeasure,
                        weight: float = 1.0,
                        options: SolverOptions | None = None) -> float:
    """Guaranteed payoff when one common channel perturbs both hypotheses.

    Each term is the worst divergence the decision maker can still force
    between the observed law and everything a common channel can produce.
    """
    if weight <= 0:
        raise DomainError("weight must be positive")
    out0, out1 = _check_common_feasible(p0, p1, channel, delta, measure)
    term0 = min_max_divergence_over_channel(out0, p0, p1, delta, measure, options).value
    term1 = min_max_divergence_over_channel(out1, p0, p1, delta, measure, options).value
    return term0 + weight * term1


def nonaware_converse(p0: Distribution, p1: Distribution, channel: Channel,
                      delta: float, measure: DistortionMeasure,
                      weight: float = 1.0) -> float:
    """Upper bound on any procedure's payoff at a common channel."""
    if weight <= 0:
        raise DomainError("weight must be positive")
    out0, out1 = _check_common_feasible(p0, p1, channel, delta, measure)
    return kl_divergence(out0, out1) + weight * kl_divergence(out1, out0)


def _max_feasible_blend(p0: Distribution, p1: Distribution, target: np.ndarray,
                        delta: float, measure: DistortionMeasure) -> np.ndarray:
    """Largest blend (1-t) I + t target staying inside the common budget."""
    k = p0.size
    eye = np.eye(k)

    def feasible(t: float) -> bool:
        a = (1.0 - t) * eye + t * target
        for p in (p0, p1):
            if measure.evaluate(p.probs, p.probs @ a) > delta:
                return False
        return True

    lo, hi = 0.0, 1.0
    if feasible(1.0):
        return target.copy()
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    t = 0.9 * lo
    return (1.0 - t) * eye + t * target


def solve_nonaware_adversary(p0: Distribution, p1: Distribution, delta: float,
                             measure: DistortionMeasure, weight: float = 1.0,
                             options: SolverOptions | None = None,
                             num_starts: int = 32, seed: int = 0) -> NonAwareBounds:
    """Search for the common channel minimizing the achievable payoff.

    The outer problem is not known to be convex, so this is a multistart
    pattern search: the identity, blends toward rank-one extremes, and
    random feasible channels each seed a local descent on coarse inner
    solves; the best candidate is re-scored at full accuracy.
    """
    if num_starts < 1:
        raise DomainError("num_starts must be positive")
    opts = options or SolverOptions()
    coarse = SolverOptions(tolerance=1e-7, max_iterations=1200,
                           patience=3, initial_step=opts.initial_step)
    k = p0.size
    floor = 1e-9
    rng = np.random.default_rng(seed)

    def feasible(a: np.ndarray) -> bool:
        for p in (p0, p1):
            if measure.evaluate(p.probs, p.probs @ a) > delta:
                return False
        return True

    def score(a: np.ndarray, o: SolverOptions) -> float:
        out0 = Distribution(p0.probs @ a)
        out1 = Distribution(p1.probs @ a)
        term0 = min_max_divergence_over_channel(out0, p0, p1, delta, measure, o).value
        term1 = min_max_divergence_over_channel(out1, p0, p1, delta, measure, o).value
        return term0 + weight * term1

    starts: list[np.ndarray] = [np.eye(k)]
    extremes = [np.tile(np.eye(k)[s], (k, 1)) for s in range(k)]
    extremes.append(np.tile(0.5 * (p0.probs + p1.probs), (k, 1)))
    for target in extremes:
        starts.append(_max_feasible_blend(p0, p1, target, delta, measure))
    while len(starts) < num_starts:
        rows = rng.dirichlet(np.ones(k), size=k)
        starts.append(_max_feasible_blend(p0, p1, rows, delta, measure))
    starts = starts[:num_starts]

    moves = []
    for row in range(k):
        for a_sym in range(k):
            for b_sym in range(k):
                if a_sym != b_sym:
                    m = np.zeros((k, k))
                    m[row, a_sym] += 1.0
                    m[row, b_sym] -= 1.0
                    moves.append(m)

    best_val = math.inf
    best_a = np.eye(k)
    for raw_start in starts:
        a = _row_project(raw_start, floor)
        if not feasible(a):
            a = _row_project(np.eye(k), floor)
        val = score(a, coarse)
        h = 0.2
        while h >= 2e-3:
            improved = True
            while improved:
                improved = False
                for m in moves:
                    cand = _row_project(a + h * m, floor)
                    if not feasible(cand):
                        continue
                    cval = score(cand, coarse)
                    if cval < val - 1e-12:
                        a, val = cand, cval
                        improved = True
            h *= 0.5
        if val < best_val:
            best_val, best_a = val, a

    channel = Channel(best_a)
    achievable = nonaware_achievable(p0, p1, channel, delta, measure, weight, opts)
    converse = nonaware_converse(p0, p1, channel, delta, measure, weight)
    return NonAwareBounds(achievable, converse, channel, True)
