"""Monte Carlo and scaling studies.

Random streams: trial ``i`` of an experiment with seed ``s`` draws its
uniforms from ``numpy.random.Generator(numpy.random.Philox(key=[s, i]))``
via ``Generator.random``.  The same draws are reused (scaled by ``L``) for
every interval length, so curves over ``L`` use common random numbers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .continuum import Profile, continuum_step, profile_range
from .discrete import (
    OpinionConfig,
    default_max_steps,
    extract_clusters,
    is_stable,
    make_equidistant,
    run_to_equilibrium,
)
from .numerics import PrecisionPolicy

__all__ = [
    "ExperimentSpec",
    "EstimateResult",
    "TrialOutcome",
    "trial_stream",
    "sample_uniform",
    "wilson_interval",
    "consensus_probability",
    "stability_probability",
    "equilibration_scan",
    "linear_critical_scan",
    "LinearVerdict",
    "KINDS",
]

KINDS = ("consensus-prob", "stability-prob", "eqtime-scan", "linear-critical")
F64 = PrecisionPolicy.f64()


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    N: int = 500
    L: tuple = (3.0, 4.0, 5.0, 6.0, 7.0)
    trials: int = 30
    seed: int = 42
    horizon: int | None = None
    policy: PrecisionPolicy = F64

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        Ls = (self.L,) if isinstance(self.L, (int, float)) else tuple(self.L)
        object.__setattr__(self, "L", tuple(float(x) for x in Ls))
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.N < 1:
            raise ValueError("N must be at least 1")
        if any(not x > 0 for x in self.L):
            raise ValueError("L must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class EstimateResult:
    kind: str
    N: int
    L: float
    trials: int
    successes: int
    undecided: int
    ci_lo: float
    ci_hi: float

    @property
    def estimate(self) -> float:
        return self.successes / self.trials

    def row(self) -> dict:
        return {
            "kind": self.kind,
            "N": self.N,
            "L": self.L,
            "trials": self.trials,
            "successes": self.successes,
            "estimate": self.estimate,
            "ci_lo": self.ci_lo,
            "ci_hi": self.ci_hi,
            "undecided": self.undecided,
        }


@dataclass(frozen=True)
class TrialOutcome:
    reached: bool
    clusters: int
    stable: bool
    steps: int


def trial_stream(seed: int, trial: int) -> np.random.Generator:
    """Counter-based stream keyed by ``(seed, trial)``."""
    return np.random.Generator(np.random.Philox(key=[seed, trial]))


def sample_uniform(n: int, L: float, stream: np.random.Generator, policy: PrecisionPolicy = F64) -> OpinionConfig:
    """``n`` sorted i.i.d. uniform opinions on ``[0, L]``."""
    if n < 1:
        raise ValueError("N must be at least 1")
    if not L > 0:
        raise ValueError("L must be positive")
    u = np.sort(stream.random(n))
    return OpinionConfig.from_values((u * L).tolist(), policy)


def wilson_interval(successes: int, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson score interval (95% by default)."""
    if trials < 1 or not 0 <= successes <= trials:
        raise ValueError("need 0 <= successes <= trials and trials >= 1")
    p = successes / trials
    z2 = z * z
    den = 1 + z2 / trials
    mid = (p + z2 / (2 * trials)) / den
    half = z * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials)) / den
    lo, hi = max(0.0, mid - half), min(1.0, mid + half)
    # guard against rounding pushing the estimate outside
    return min(lo, p), max(hi, p)


def _one_trial(args) -> list[TrialOutcome]:
    n, Ls, seed, trial, horizon = args
    u = np.sort(trial_stream(seed, trial).random(n))
    out = []
    for L in Ls:
        cfg = OpinionConfig.from_values((u * L).tolist(), F64)
        res = run_to_equilibrium(cfg, max_steps=horizon)
        cs = extract_clusters(res.final)
        out.append(TrialOutcome(res.reached_equilibrium, len(cs), is_stable(cs), res.steps))
    return out


def _run_trials(spec: ExperimentSpec, workers: int = 1) -> list[list[TrialOutcome]]:
    horizon = spec.horizon if spec.horizon is not None else default_max_steps(spec.N)
    jobs = [(spec.N, spec.L, spec.seed, i, horizon) for i in range(spec.trials)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            return list(ex.map(_one_trial, jobs))
    return [_one_trial(j) for j in jobs]


def _aggregate(spec: ExperimentSpec, outcomes, success) -> list[EstimateResult]:
    results = []
    for j, L in enumerate(spec.L):
        col = [row[j] for row in outcomes]
        succ = sum(1 for o in col if o.reached and success(o))
        und = sum(1 for o in col if not o.reached)
        lo, hi = wilson_interval(succ, spec.trials)
        results.append(EstimateResult(spec.kind, spec.N, L, spec.trials, succ, und, lo, hi))
    return results


def consensus_probability(spec: ExperimentSpec, workers: int = 1) -> list[EstimateResult]:
    """Fraction of trials ending in a single cluster, per ``L``.

    Trials that do not reach equilibrium within the horizon count as failures
    and are reported in ``undecided``.
    """
    return _aggregate(spec, _run_trials(spec, workers), lambda o: o.clusters == 1)


def stability_probability(spec: ExperimentSpec, workers: int = 1) -> list[EstimateResult]:
    """Fraction of trials whose equilibrium is stable, per ``L``."""
    return _aggregate(spec, _run_trials(spec, workers), lambda o: o.stable)


@dataclass(frozen=True)
class ScanRow:
    N: int
    steps: int
    reached: bool

    @property
    def ratio(self) -> float:
        return self.steps / self.N


def equilibration_scan(Ns: Iterable[int], policy: PrecisionPolicy = F64, max_steps: int | None = None) -> list[ScanRow]:
    """Steps for ``(1, ..., N)`` to reach equilibrium, for each ``N``."""
    rows = []
    for n in Ns:
        if n < 2:
            raise ValueError("N must be at least 2")
        res = run_to_equilibrium(make_equidistant(n, policy), max_steps=max_steps)
        rows.append(ScanRow(n, res.steps, res.reached_equilibrium))
    return rows


@dataclass(frozen=True)
class LinearVerdict:
    R: float
    verdict: str  # "consensus" | "persistent" | "undecided"
    step: int | None
    ranges: tuple = field(default=(), repr=False)


def linear_critical_scan(
    ranges: Sequence,
    horizon: int = 200,
    tol=1e-6,
    policy: PrecisionPolicy = F64,
    budget: int = 10**6,
) -> list[LinearVerdict]:
    """Evolve ``x_0(alpha) = R alpha`` on ``[0, 1]`` for each ``R``.

    ``consensus`` at step ``k`` when the range first drops to at most 1 at
    step ``k - 1`` (the next state is constant); ``persistent`` when the range
    stays above 2 for ``horizon`` steps; otherwise ``undecided``.
    """
    out = []
    for R in ranges:
        if not R > 0:
            raise ValueError("ranges must be positive")
        p = Profile.linear(R, policy=policy)
        hist = [profile_range(p)]
        verdict, step = "undecided", None
        for t in range(horizon + 1):
            if hist[-1] <= 1:
                verdict, step = "consensus", t + 1
                break
            if t == horizon:
                if all(r > 2 for r in hist):
                    verdict = "persistent"
                break
            p = continuum_step(p, tol, budget=budget)
            hist.append(profile_range(p))
        out.append(LinearVerdict(float(R), verdict, step, tuple(float(r) for r in hist)))
    return out
