# core/markov_lab.py
"""
Truncated drifted walk on {0..K}: up with probability alpha, down otherwise,
holding at the boundaries (stay at 0 with 1 - alpha, stay at K with alpha).

Visits to {i >= phi} upper-bound the upset customers of one supermarket
cashier; they are never the same quantity.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy import linalg, stats
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from core.errors import InvalidConfig, NoConvergence
from core.seeding import derive_rng

logger = logging.getLogger(__name__)

DENSE_ORACLE_LIMIT = 2000
ITERATIVE_MIN_STATES = 16
ITERATIVE_MAX_STATES = 10_001
CHUNK = 1 << 16


class ChainSpec(BaseModel):
    K: int = Field(30, ge=1)
    alpha: float = Field(1.0 / 3.0, gt=0.0, lt=0.5)

    @property
    def beta(self) -> float:
        return self.alpha / (1.0 - self.alpha)

    @property
    def states(self) -> int:
        return self.K + 1


class ResetSchedule(BaseModel):
    """Steps 1..horizon; the walk is drawn from the stationary law at step 1 and at every listed step."""
    horizon: int = Field(..., ge=1)
    resets: Tuple[int, ...] = ()

    @model_validator(mode="after")
    def _check_steps(self) -> "ResetSchedule":
        previous = 1
        for step in self.resets:
            if step < previous or step > self.horizon:
                raise ValueError(f"reset step {step} out of order or outside [1, {self.horizon}]")
            previous = step
        return self

    @classmethod
    def none(cls, horizon: int) -> "ResetSchedule":
        return cls(horizon=horizon)

    @classmethod
    def every_step(cls, horizon: int) -> "ResetSchedule":
        return cls(horizon=horizon, resets=tuple(range(2, horizon + 1)))

    @classmethod
    def evenly_spaced(cls, horizon: int, count: int) -> "ResetSchedule":
        if count < 0:
            raise InvalidConfig(f"reset count must be >= 0, got {count}")
        steps = tuple(1 + (j * horizon) // (count + 1) for j in range(1, count + 1))
        return cls(horizon=horizon, resets=steps)

    @property
    def count(self) -> int:
        return len(self.resets)

    def scaled(self, factor: int) -> "ResetSchedule":
        return ResetSchedule(horizon=self.horizon * factor, resets=tuple((t - 1) * factor + 1 for t in self.resets))

    def mask(self) -> np.ndarray:
        """Boolean per step (index t-1), True where the state is redrawn."""
        out = np.zeros(self.horizon, dtype=bool)
        out[0] = True
        if self.resets:
            out[np.asarray(self.resets) - 1] = True
        return out


@dataclass
class WalkResult:
    X: int
    horizon: int
    visits: np.ndarray = field(repr=False)
    final_state: int = 0

    @property
    def fraction(self) -> float:
        return self.X / self.horizon


def stationary_analytic(spec: ChainSpec) -> np.ndarray:
    beta = spec.beta
    powers = beta ** np.arange(spec.states)
    return (1 - beta) * powers / (1 - beta ** spec.states)


def transition_matrix(spec: ChainSpec) -> np.ndarray:
    a = spec.alpha
    P = np.zeros((spec.states, spec.states))
    idx = np.arange(spec.K)
    P[idx, idx + 1] = a
    P[idx + 1, idx] = 1 - a
    P[0, 0] = 1 - a
    P[spec.K, spec.K] = a
    return P


def detailed_balance_residual(spec: ChainSpec, pi: Optional[np.ndarray] = None) -> float:
    pi = stationary_analytic(spec) if pi is None else pi
    return float(np.max(np.abs(pi[:-1] * spec.alpha - pi[1:] * (1 - spec.alpha))))


def _symmetrized_bands(spec: ChainSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Diagonal and off-diagonal of D^(1/2) P D^(-1/2), D = diag(pi)."""
    diagonal = np.zeros(spec.states)
    diagonal[0] += 1 - spec.alpha
    diagonal[spec.K] += spec.alpha
    off = np.full(spec.K, np.sqrt(spec.alpha * (1 - spec.alpha)))
    return diagonal, off


def _second_eigenvalue(eigenvalues: np.ndarray) -> float:
    ordered = np.sort(eigenvalues)
    rest = ordered[:-1]
    return float(np.max(np.abs(rest))) if len(rest) else 0.0


def spectral_expansion(spec: ChainSpec, tol: float = 1e-12, max_iterations: Optional[int] = None) -> float:
    """
    Second-largest absolute eigenvalue of the transition operator, from the
    symmetrized operator with the stationary direction deflated. Small chains
    are solved exactly from the tridiagonal form.
    """
    if spec.states > ITERATIVE_MAX_STATES:
        raise InvalidConfig(f"K={spec.K} is beyond the supported spectral size")
    diagonal, off = _symmetrized_bands(spec)
    if spec.states < ITERATIVE_MIN_STATES:
        return _second_eigenvalue(linalg.eigvalsh_tridiagonal(diagonal, off))
    top = np.sqrt(stationary_analytic(spec))

    def matvec(x: np.ndarray) -> np.ndarray:
        x = np.ravel(x)
        y = diagonal * x
        y[:-1] += off * x[1:]
        y[1:] += off * x[:-1]
        return y - top * (top @ x)

    operator = LinearOperator((spec.states, spec.states), matvec=matvec, dtype=float)
    v0 = np.random.default_rng(0).random(spec.states)
    try:
        largest = eigsh(operator, k=1, which="LA", tol=tol, v0=v0, maxiter=max_iterations,
                        return_eigenvectors=False)[0]
        smallest = eigsh(operator, k=1, which="SA", tol=tol, v0=v0, maxiter=max_iterations,
                         return_eigenvectors=False)[0]
    except ArpackNoConvergence as e:
        raise NoConvergence(f"spectral iteration did not converge for K={spec.K}, alpha={spec.alpha}") from e
    return float(max(abs(largest), abs(smallest)))


def spectral_expansion_dense(spec: ChainSpec) -> float:
    """Dense eigensolver on the unsymmetrized matrix; reference for small chains."""
    if spec.states > DENSE_ORACLE_LIMIT:
        raise InvalidConfig(f"dense oracle limited to {DENSE_ORACLE_LIMIT} states, got {spec.states}")
    eigenvalues = np.linalg.eigvals(transition_matrix(spec))
    magnitudes = np.sort(np.abs(eigenvalues))
    return float(magnitudes[-2])


def _inverse_cdf(pi: np.ndarray):
    cdf = np.cumsum(pi)
    cdf[-1] = 1.0
    last = len(pi) - 1
    return lambda u: np.minimum(np.searchsorted(cdf, u, side="right"), last)


def walk_with_resets(spec: ChainSpec, schedule: ResetSchedule, phi: int, rng: np.random.Generator) -> WalkResult:
    draw = _inverse_cdf(stationary_analytic(spec))
    resets = schedule.mask()
    K, alpha = spec.K, spec.alpha
    visits = [0] * spec.states
    state = 0
    t = 0
    while t < schedule.horizon:
        size = min(CHUNK, schedule.horizon - t)
        ups = (rng.random(size) < alpha).tolist()
        fresh = draw(rng.random(size)).tolist()
        for up, redraw, new in zip(ups, resets[t:t + size].tolist(), fresh):
            if redraw:
                state = new
            elif up:
                if state < K:
                    state += 1
            elif state > 0:
                state -= 1
            visits[state] += 1
        t += size
    visits = np.asarray(visits, dtype=np.int64)
    return WalkResult(X=int(visits[phi:].sum()) if phi <= K else 0, horizon=schedule.horizon,
                      visits=visits, final_state=state)


def occupancy_tv(visits: np.ndarray, spec: ChainSpec) -> float:
    empirical = np.asarray(visits, dtype=float)
    empirical /= empirical.sum()
    return 0.5 * float(np.abs(empirical - stationary_analytic(spec)).sum())


def visit_mass(spec: ChainSpec, phi: int) -> float:
    """mu = pi_K({i >= phi})."""
    return float(stationary_analytic(spec)[phi:].sum()) if phi <= spec.K else 0.0


def walk_batch(
    spec: ChainSpec,
    schedules: Sequence[ResetSchedule],
    phi: int,
    trials: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """X for every (schedule, trial); all schedules consume the same uniforms (paired comparison)."""
    horizon = schedules[0].horizon
    if any(s.horizon != horizon for s in schedules):
        raise InvalidConfig("paired schedules must share a horizon")
    draw = _inverse_cdf(stationary_analytic(spec))
    masks = np.stack([s.mask() for s in schedules])
    states = np.zeros((len(schedules), trials), dtype=np.int64)
    X = np.zeros((len(schedules), trials), dtype=np.int64)
    t = 0
    while t < horizon:
        size = min(1024, horizon - t)
        moves = np.where(rng.random((size, trials)) < spec.alpha, 1, -1)
        fresh = draw(rng.random((size, trials)))
        for j in range(size):
            stepped = np.clip(states + moves[j], 0, spec.K)
            states = np.where(masks[:, t + j, None], fresh[j], stepped)
            X += states >= phi
        t += size
    return X


def reset_tail_experiment(
    spec: ChainSpec,
    schedules: Sequence[ResetSchedule],
    phi: int,
    deltas: Sequence[float],
    trials: int,
    seed: int = 0,
    check_decay: bool = True,
) -> List[dict]:
    """
    Empirical Pr[X >= (1 + delta) mu T] per schedule and delta with Wilson
    intervals; the first schedule is the baseline every other one is compared to.
    """
    if trials < 200:
        raise InvalidConfig(f"reset tail experiment needs at least 200 trials, got {trials}")
    mu = visit_mass(spec, phi)
    horizons = [1, 2] if check_decay else [1]
    frequencies = {}
    rows = []
    for factor in horizons:
        scaled = [s.scaled(factor) if factor > 1 else s for s in schedules]
        horizon = scaled[0].horizon
        X = walk_batch(spec, scaled, phi, trials, derive_rng(seed, "markov", "reset-tail", horizon))
        for delta in deltas:
            threshold = (1 + delta) * mu * horizon
            exceed = (X >= threshold).sum(axis=1)
            for s, schedule in enumerate(scaled):
                k = int(exceed[s])
                ci = stats.binomtest(k, trials).proportion_ci(confidence_level=0.95, method="wilson")
                frequencies[(factor, s, delta)] = (k / trials, float(ci.high - ci.low) / 2)
                rows.append({
                    "schedule": s, "horizon": horizon, "resets": schedule.count, "phi": phi, "delta": float(delta),
                    "mu": mu, "threshold": threshold, "exceed": k, "trials": trials,
                    "frequency": k / trials, "ci_low": float(ci.low), "ci_high": float(ci.high),
                    "mean_X": float(X[s].mean()),
                })
    for row in rows:
        factor = row["horizon"] // schedules[0].horizon
        s = row["schedule"]
        base_freq, base_half = frequencies[(factor, 0, row["delta"])]
        row["no_worse_than_baseline"] = row["frequency"] <= base_freq + base_half
        if check_decay:
            at_t = frequencies[(1, s, row["delta"])][0]
            at_2t = frequencies[(2, s, row["delta"])][0]
            row["decays"] = at_2t < at_t or at_t == at_2t == 0
    logger.info(f"Reset tail experiment: {len(schedules)} schedules x {len(deltas)} deltas, mu={mu:.4g}")
    return rows
