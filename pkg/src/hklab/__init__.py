"""Hegselmann-Krause bounded-confidence dynamics: finite agents, continuum
profiles, a certified non-consensus construction and Monte Carlo studies."""

__version__ = "0.1.0"

from .numerics import Backend, PrecisionPolicy, mean  # noqa: E402
from .discrete import (  # noqa: E402
    Cluster,
    ClusterSet,
    OpinionConfig,
    RunResult,
    extract_clusters,
    hk_step,
    hk_step_naive,
    is_equilibrium,
    is_stable,
    make_equidistant,
    neighborhood_window,
    run_to_equilibrium,
)
from .continuum import (  # noqa: E402
    NbhdBounds,
    Profile,
    bounds_uvw,
    continuum_step,
    derivative_next,
    evaluate,
    profile_range,
    regularity_check,
    update_at,
)

__all__ = [
    "Backend",
    "PrecisionPolicy",
    "mean",
    "Cluster",
    "ClusterSet",
    "OpinionConfig",
    "RunResult",
    "extract_clusters",
    "hk_step",
    "hk_step_naive",
    "is_equilibrium",
    "is_stable",
    "make_equidistant",
    "neighborhood_window",
    "run_to_equilibrium",
    "NbhdBounds",
    "Profile",
    "bounds_uvw",
    "continuum_step",
    "derivative_next",
    "evaluate",
    "profile_range",
    "regularity_check",
    "update_at",
]
