"""Finite-agent Hegselmann-Krause dynamics with confidence bound 1.

Every backend computes a step the same way: opinions are mapped onto a common
integer lattice (a common denominator for rationals, a common power of two for
binary floats), window sums come from exact integer prefix sums, and each new
opinion is the window sum divided by the window size, rounded once.  Floating
modes therefore return the correctly rounded neighbourhood mean, which is what
the naive double loop in :func:`hk_step_naive` computes too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .numerics import Backend, PrecisionPolicy, as_ratio, mean

__all__ = [
    "OpinionConfig",
    "Cluster",
    "ClusterSet",
    "RunResult",
    "neighborhood_window",
    "hk_step",
    "hk_step_naive",
    "is_equilibrium",
    "extract_clusters",
    "is_stable",
    "run_to_equilibrium",
    "make_equidistant",
    "receptivity_edges",
    "is_connected",
    "default_max_steps",
]

EXACT = PrecisionPolicy.exact()


@dataclass(frozen=True)
class OpinionConfig:
    """Sorted opinions of N agents; the confidence bound is fixed at 1."""

    opinions: tuple
    policy: PrecisionPolicy = EXACT

    def __post_init__(self) -> None:
        ops = tuple(self.opinions)
        object.__setattr__(self, "opinions", ops)
        if not ops:
            raise ValueError("a configuration needs at least one agent")
        for a, b in zip(ops, ops[1:]):
            if b < a:
                raise ValueError("opinions must be nondecreasing")

    @classmethod
    def from_values(cls, values: Iterable, policy: PrecisionPolicy = EXACT, *, sort: bool = False):
        vals = [policy.scalar(v) for v in values]
        if sort:
            vals.sort()
        return cls(tuple(vals), policy)

    def __len__(self) -> int:
        return len(self.opinions)

    def __iter__(self):
        return iter(self.opinions)

    def __getitem__(self, i):
        return self.opinions[i]

    @property
    def n(self) -> int:
        return len(self.opinions)

    def spread(self):
        return self.opinions[-1] - self.opinions[0]

    def as_array(self) -> np.ndarray:
        return np.asarray([float(x) for x in self.opinions], dtype=np.float64)


@dataclass(frozen=True)
class Cluster:
    center: object
    weight: int


@dataclass(frozen=True)
class ClusterSet:
    clusters: tuple

    def __post_init__(self) -> None:
        cl = tuple(self.clusters)
        object.__setattr__(self, "clusters", cl)
        for c in cl:
            if c.weight <= 0:
                raise ValueError("cluster weights must be positive")
        for a, b in zip(cl, cl[1:]):
            if not a.center < b.center:
                raise ValueError("cluster centers must be strictly increasing")

    def __len__(self) -> int:
        return len(self.clusters)

    def __iter__(self):
        return iter(self.clusters)

    @property
    def total_weight(self) -> int:
        return sum(c.weight for c in self.clusters)

    @property
    def centers(self) -> list:
        return [c.center for c in self.clusters]

    @property
    def weights(self) -> list[int]:
        return [c.weight for c in self.clusters]

    def to_dict(self) -> list[dict]:
        return [{"center": c.center, "weight": c.weight} for c in self.clusters]


@dataclass
class RunResult:
    final: OpinionConfig
    steps: int
    trajectory: list | None = None
    reached_equilibrium: bool = False
    stop_rule: str = "exact"
    meta: dict = field(default_factory=dict)


# -- lattice helpers --------------------------------------------------------


def _lattice(opinions: Sequence) -> tuple[list[int], int]:
    """Integers ``n_i`` and a common denominator ``D`` with ``x_i = n_i / D``."""
    ratios = [as_ratio(x) for x in opinions]
    den = 1
    for _, d in ratios:
        if den % d:
            den = math.lcm(den, d)
    return [n * (den // d) for n, d in ratios], den


def _windows(nums: list[int], den: int) -> list[tuple[int, int]]:
    """Closed index windows ``[lo, hi]`` of agents within distance 1 (exact)."""
    n = len(nums)
    out = []
    lo = hi = 0
    for i in range(n):
        xi = nums[i]
        while xi - nums[lo] > den:
            lo += 1
        if hi < i:
            hi = i
        while hi + 1 < n and nums[hi + 1] - xi <= den:
            hi += 1
        out.append((lo, hi))
    return out


def _exact_diff(a, b) -> Fraction:
    na, da = as_ratio(a)
    nb, db = as_ratio(b)
    return Fraction(na, da) - Fraction(nb, db)


# -- operations -------------------------------------------------------------


def neighborhood_window(config: OpinionConfig, i: int) -> tuple[int, int]:
    """Index range ``(lo, hi)`` of agents ``j`` with ``|x(j) - x(i)| <= 1``."""
    n = len(config)
    if not 0 <= i < n:
        raise IndexError(f"agent index {i} out of range for N={n}")
    ops = config.opinions
    xi = ops[i]
    # binary searches on exact differences; contiguity follows from sorting
    left, right = 0, i
    while left < right:
        mid = (left + right) // 2
        if _exact_diff(xi, ops[mid]) > 1:
            left = mid + 1
        else:
            right = mid
    lo = left
    left, right = i, n - 1
    while left < right:
        mid = (left + right + 1) // 2
        if _exact_diff(ops[mid], xi) <= 1:
            left = mid
        else:
            right = mid - 1
    hi = left
    return lo, hi


def _step_lattice(opinions: Sequence, policy: PrecisionPolicy) -> tuple:
    nums, den = _lattice(opinions)
    prefix = [0]
    acc = 0
    for v in nums:
        acc += v
        prefix.append(acc)
    out = []
    with policy.context():
        for lo, hi in _windows(nums, den):
            out.append(policy.from_ratio(prefix[hi + 1] - prefix[lo], den * (hi - lo + 1)))
    return tuple(out)


def _check_order(new: Sequence) -> None:
    for a, b in zip(new, new[1:]):
        if b < a:
            raise AssertionError("HK step broke the opinion order")


def hk_step(config: OpinionConfig) -> OpinionConfig:
    """One synchronous update: every agent moves to its neighbourhood mean.

    O(N) two-pointer windows over exact prefix sums; in ``f64`` mode the
    compiled kernel is used when available (same result bit for bit).
    """
    policy = config.policy
    if policy.backend is Backend.F64:
        new = tuple(kernels.hk_step_f64(config.as_array()).tolist())
    else:
        new = _step_lattice(config.opinions, policy)
    _check_order(new)
    return OpinionConfig(new, policy)


def hk_step_naive(config: OpinionConfig) -> OpinionConfig:
    """Reference O(N^2) update: scan all agents, sum the visible ones exactly."""
    policy = config.policy
    exact = [Fraction(*as_ratio(x)) for x in config.opinions]
    out = []
    with policy.context():
        for xi in exact:
            total = Fraction(0)
            count = 0
            for xj in exact:
                if abs(xj - xi) <= 1:
                    total += xj
                    count += 1
            q = total / count
            out.append(policy.from_ratio(q.numerator, q.denominator))
    return OpinionConfig(tuple(out), policy)


def is_equilibrium(config: OpinionConfig) -> bool:
    """Distinct opinions are pairwise more than 1 apart (exact comparison)."""
    ops = config.opinions
    for a, b in zip(ops, ops[1:]):
        if a != b and _exact_diff(b, a) <= 1:
            return False
    return True


def _default_merge_tol(config: OpinionConfig):
    if config.policy.is_exact:
        return Fraction(0)
    return 1e-9 * float(config.spread())


def extract_clusters(config: OpinionConfig, merge_tol=None) -> ClusterSet:
    """Group consecutive opinions whose gap is at most ``merge_tol``.

    The center of a group is its (exactly summed) mean.
    """
    policy = config.policy
    if merge_tol is None:
        merge_tol = _default_merge_tol(config)
    if merge_tol < 0:
        raise ValueError("merge_tol must be nonnegative")
    ops = config.opinions
    groups: list[list] = [[ops[0]]]
    with policy.context():
        for a, b in zip(ops, ops[1:]):
            if b - a <= merge_tol:
                groups[-1].append(b)
            else:
                groups.append([b])
        clusters = [Cluster(mean(g, policy), len(g)) for g in groups]
    # rounding can tie neighbouring centres only if merge_tol is absurdly small
    merged: list[Cluster] = []
    for c in clusters:
        if merged and not merged[-1].center < c.center:
            prev = merged.pop()
            w = prev.weight + c.weight
            with policy.context():
                cen = (prev.center * prev.weight + c.center * c.weight) / w
            merged.append(Cluster(cen, w))
        else:
            merged.append(c)
    return ClusterSet(tuple(merged))


def is_stable(clusters: ClusterSet) -> bool:
    """Every pair satisfies ``|b - a| >= 1 + min(w)/max(w)``."""
    cl = list(clusters)
    if not cl:
        raise ValueError("empty cluster set")
    for i in range(len(cl)):
        for j in range(i + 1, len(cl)):
            a, b = cl[i], cl[j]
            gap = abs(_exact_diff(b.center, a.center))
            need = 1 + Fraction(min(a.weight, b.weight), max(a.weight, b.weight))
            if gap < need:
                return False
    return True


def default_max_steps(n: int) -> int:
    return 10 * n + 100


def _machine_eps(policy: PrecisionPolicy) -> float:
    return 2.0 ** (1 - (policy.mantissa_bits or 53))


def floating_equilibrium(config: OpinionConfig) -> bool:
    """Stop rule for floating modes.

    Opinions closer than ``1e6 * eps * max|x|`` are merged first; the strict
    ``> 1`` test is then applied to consecutive cluster centers.
    """
    policy = config.policy
    ops = config.opinions
    scale = max(abs(ops[0]), abs(ops[-1]))
    with policy.context():
        tol = policy.scalar(1e6) * policy.scalar(_machine_eps(policy)) * scale
        cs = extract_clusters(config, tol)
        centers = cs.centers
        return all(b - a > 1 for a, b in zip(centers, centers[1:]))


def run_to_equilibrium(
    config: OpinionConfig,
    max_steps: int | None = None,
    keep_trajectory: bool = False,
) -> RunResult:
    """Iterate :func:`hk_step` until equilibrium or ``max_steps``.

    Exact mode stops on the exact equilibrium predicate; floating modes use
    :func:`floating_equilibrium`.
    """
    if max_steps is None:
        max_steps = default_max_steps(len(config))
    if max_steps < 0:
        raise ValueError("max_steps must be nonnegative")
    policy = config.policy
    stop_rule = "exact" if policy.is_exact else "cluster"
    done = is_equilibrium if policy.is_exact else floating_equilibrium

    if policy.backend is Backend.F64 and not keep_trajectory:
        arr, steps, reached = kernels.run_f64(config.as_array(), max_steps)
        final = OpinionConfig(tuple(arr.tolist()), policy)
        return RunResult(final, steps, None, reached, stop_rule)

    traj = [config] if keep_trajectory else None
    cur = config
    steps = 0
    reached = done(cur)
    while not reached and steps < max_steps:
        cur = hk_step(cur)
        steps += 1
        if traj is not None:
            traj.append(cur)
        reached = done(cur)
    return RunResult(cur, steps, traj, reached, stop_rule)


def make_equidistant(n: int, policy: PrecisionPolicy = EXACT) -> OpinionConfig:
    """The configuration E_N = (1, 2, ..., N)."""
    if n < 1:
        raise ValueError("N must be at least 1")
    return OpinionConfig.from_values(range(1, n + 1), policy)


def receptivity_edges(config: OpinionConfig) -> list[tuple[int, int]]:
    """All pairs ``i < j`` with ``|x(i) - x(j)| <= 1``."""
    nums, den = _lattice(config.opinions)
    edges = []
    for i, (_, hi) in enumerate(_windows(nums, den)):
        edges.extend((i, j) for j in range(i + 1, hi + 1))
    return edges


def is_connected(config: OpinionConfig) -> bool:
    """Receptivity graph connectivity; for sorted opinions only adjacent gaps matter."""
    ops = config.opinions
    return all(_exact_diff(b, a) <= 1 for a, b in zip(ops, ops[1:]))


def window_sizes(config: OpinionConfig) -> list[int]:
    nums, den = _lattice(config.opinions)
    return [hi - lo + 1 for lo, hi in _windows(nums, den)]
