"""File formats: trajectories, cluster reports, profiles, certificates, tables.

Data files carry no timestamps, so identical inputs give identical bytes.
Run metadata goes to an optional JSON sidecar.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from fractions import Fraction
from typing import IO, Any, Iterable, Sequence

from . import __version__
from .continuum import Profile
from .discrete import ClusterSet, OpinionConfig, RunResult
from .numerics import Backend, PrecisionPolicy, to_decimal, to_str

__all__ = [
    "json_dumps",
    "write_trajectory_csv",
    "cluster_report",
    "write_cluster_json",
    "write_profile_csv",
    "profile_to_json",
    "profile_from_json",
    "write_certificates",
    "write_estimates_csv",
    "write_eqtime_csv",
    "write_linear_csv",
    "write_metadata",
    "read_opinions",
]


def _is_scalar(x: Any) -> bool:
    if isinstance(x, bool):
        return False
    return isinstance(x, (int, float, Fraction)) or type(x).__name__ == "mpfr"


def _number(x: Any, digits: int) -> str:
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float) and not math.isfinite(x):
        return "null"
    if type(x).__name__ == "mpfr":
        import gmpy2

        if not gmpy2.is_finite(x):
            return "null"
    text = to_decimal(x, digits)
    return text


def json_dumps(obj: Any, digits: int = 17) -> str:
    """Compact JSON with backend scalars written as decimal numbers."""
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if _is_scalar(obj):
        return _number(obj, digits)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{json_dumps(v, digits)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(json_dumps(v, digits) for v in obj) + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _open(path, mode="w"):
    if path is None or path == "-":
        return _NoClose(sys.stdout)
    return open(path, mode, newline="", encoding="utf-8")


class _NoClose:
    def __init__(self, fh):
        self.fh = fh

    def __enter__(self):
        return self.fh

    def __exit__(self, *exc):
        self.fh.flush()
        return False


# -- discrete ----------------------------------------------------------------


def write_trajectory_csv(states: RunResult | Sequence[OpinionConfig], fh: IO[str], policy: PrecisionPolicy | None = None) -> None:
    """Rows ``t,agent,opinion`` (plus ``opinion_exact`` in exact mode).

    A :class:`RunResult` without a stored trajectory contributes its final
    state at ``t = steps``.  Agents are numbered from 1.
    """
    if isinstance(states, RunResult):
        if states.trajectory is not None:
            seq = list(enumerate(states.trajectory))
        else:
            seq = [(states.steps, states.final)]
        policy = policy or states.final.policy
    else:
        seq = list(enumerate(states))
        if policy is None:
            policy = seq[0][1].policy if seq else PrecisionPolicy.exact()
    exact = policy.is_exact
    digits = policy.digits()
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["t", "agent", "opinion"] + (["opinion_exact"] if exact else []))
    for t, cfg in seq:
        for i, x in enumerate(cfg.opinions, start=1):
            row = [t, i, to_decimal(x, digits)]
            if exact:
                row.append(to_str(x))
            w.writerow(row)


def cluster_report(clusters: ClusterSet, stable: bool, steps: int, policy: PrecisionPolicy) -> dict:
    items = []
    for c in clusters:
        item = {"center": c.center, "weight": c.weight}
        if policy.is_exact:
            item["center_exact"] = to_str(c.center)
        items.append(item)
    return {"clusters": items, "stable": bool(stable), "steps": steps}


def write_cluster_json(report: dict, fh: IO[str], digits: int = 17) -> None:
    fh.write(json_dumps(report, digits) + "\n")


# -- profiles ----------------------------------------------------------------


def write_profile_csv(p: Profile, fh: IO[str]) -> None:
    exact = p.policy.is_exact
    digits = p.policy.digits()
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["alpha", "value"] + (["alpha_exact", "value_exact"] if exact else []))
    for a, v in zip(p.alphas, p.values):
        row = [to_decimal(a, digits), to_decimal(v, digits)]
        if exact:
            row += [to_str(a), to_str(v)]
        w.writerow(row)


def profile_to_json(p: Profile) -> str:
    """Lossless JSON: scalars as strings (``p/q`` in exact mode)."""
    doc = {
        "domain": [to_str(p.start), to_str(p.end)],
        "breakpoints": [to_str(a) for a in p.alphas],
        "values": [to_str(v) for v in p.values],
        "mode": p.policy.backend.value,
        "precision": p.policy.bits,
    }
    return json.dumps(doc, separators=(",", ":")) + "\n"


def profile_from_json(text: str, policy: PrecisionPolicy | None = None) -> Profile:
    doc = json.loads(text, parse_float=str, parse_int=str)
    if policy is None:
        mode = Backend(doc.get("mode", "exact"))
        bits = int(doc.get("precision", 256))
        policy = PrecisionPolicy(mode, bits=bits) if mode is not Backend.F64 else PrecisionPolicy.f64()
    for key in ("breakpoints", "values"):
        if key not in doc:
            raise ValueError(f"profile JSON lacks {key!r}")
    prof = Profile.from_points(doc["breakpoints"], doc["values"], policy)
    if "domain" in doc:
        lo, hi = (policy.scalar(x) for x in doc["domain"])
        if lo != prof.start or hi != prof.end:
            raise ValueError("domain does not match the breakpoints")
    return prof


# -- certificates and tables ---------------------------------------------------


def write_certificates(certs: Iterable, fh: IO[str], digits: int = 17) -> None:
    for c in certs:
        fh.write(json_dumps(c.to_dict(), digits) + "\n")


def write_estimates_csv(results: Iterable, fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["kind", "N", "L", "trials", "successes", "estimate", "ci_lo", "ci_hi", "undecided"])
    for r in results:
        w.writerow([r.kind, r.N, repr(r.L), r.trials, r.successes, repr(r.estimate), repr(r.ci_lo), repr(r.ci_hi), r.undecided])


def write_eqtime_csv(rows: Iterable, fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["N", "steps", "ratio"])
    for r in rows:
        w.writerow([r.N, r.steps, repr(r.ratio)])


def write_linear_csv(rows: Iterable, fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["R", "verdict", "step", "final_range"])
    for r in rows:
        w.writerow([repr(r.R), r.verdict, "" if r.step is None else r.step, repr(r.ranges[-1])])


def write_metadata(path: str, argv: Sequence[str], policy: PrecisionPolicy | None, **extra: Any) -> None:
    doc = {
        "version": __version__,
        "command": list(argv),
        "policy": policy.describe() if policy else None,
    }
    doc.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


# -- inputs --------------------------------------------------------------------


def read_opinions(text: str) -> list[str]:
    """Opinion tokens from comma, whitespace or newline separated text.

    A header line ``opinion`` is skipped; CSV files with an ``opinion`` column
    use that column.
    """
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if lines and "," in lines[0] and any(c.isalpha() for c in lines[0].replace("e", "").replace("E", "")):
        reader = csv.DictReader(io.StringIO("\n".join(lines)))
        col = "opinion_exact" if "opinion_exact" in (reader.fieldnames or []) else "opinion"
        return [row[col].strip() for row in reader]
    toks: list[str] = []
    for ln in lines:
        toks.extend(t for t in ln.replace(",", " ").split() if t)
    if toks and toks[0].lower() == "opinion":
        toks = toks[1:]
    return toks
