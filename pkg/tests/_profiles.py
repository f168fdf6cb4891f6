"""Random piecewise-linear profiles for property tests."""

from fractions import Fraction

import numpy as np

from hklab.continuum import Profile, event_abscissae
from hklab.numerics import PrecisionPolicy


def random_regular(rng: np.random.Generator, m: int, rng_lo=2.2, rng_hi=6.0, policy=None) -> Profile:
    """Strictly increasing PL profile on [0, 1] with ``m`` segments and range in ``[rng_lo, rng_hi]``."""
    policy = policy or PrecisionPolicy.f64()
    cuts = np.sort(rng.random(m - 1))
    a = np.unique(np.concatenate([[0.0], cuts, [1.0]]))
    inc = rng.uniform(0.05, 1.0, len(a) - 1)
    target = rng.uniform(rng_lo, rng_hi)
    v = np.concatenate([[0.0], np.cumsum(inc)]) * (target / inc.sum())
    if policy.is_exact:
        av = [Fraction(x).limit_denominator(10**6) for x in a]
        vv = [Fraction(x).limit_denominator(10**6) for x in v]
        av[0], av[-1] = Fraction(0), Fraction(1)
        vv[0] = Fraction(0)
        return Profile.from_points(av, vv, policy)
    return Profile.from_points(a.tolist(), v.tolist(), policy)


def random_monotone(rng: np.random.Generator, m: int, policy=None) -> Profile:
    """Nondecreasing PL profile, possibly with plateaus, range in ``(0, 8)``."""
    policy = policy or PrecisionPolicy.f64()
    a = np.unique(np.concatenate([[0.0], rng.random(m - 1), [1.0]]))
    inc = rng.uniform(0.0, 1.0, len(a) - 1)
    inc[rng.random(len(inc)) < 0.25] = 0.0
    v = np.concatenate([[0.0], np.cumsum(inc)])
    if v[-1] > 0:
        v *= rng.uniform(0.5, 8.0) / v[-1]
    return Profile.from_points(a.tolist(), v.tolist(), policy)


def smooth_abscissae(p: Profile, count: int, rng: np.random.Generator, margin: float) -> list:
    """Abscissae at least ``margin`` away from every event abscissa."""
    ev = np.asarray([float(x) for x in event_abscissae(p)])
    out = []
    tries = 0
    while len(out) < count and tries < 100 * count:
        tries += 1
        t = float(rng.uniform(margin, 1.0 - margin))
        if np.min(np.abs(ev - t)) > margin:
            out.append(t)
    return out
