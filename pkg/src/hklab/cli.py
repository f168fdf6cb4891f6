"""Command line interface (``hklab``).

Exit codes: 0 success, 1 computation failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

from . import io as hio
from .numerics import Backend, PrecisionPolicy

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class Command:
    name: str
    policy: PrecisionPolicy | None
    params: dict = field(default_factory=dict)
    out: str | None = None
    metadata: str | None = None
    argv: list = field(default_factory=list)


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mode", choices=[b.value for b in Backend], default=None)
    common.add_argument("--precision", type=int, default=None, help="bigfloat mantissa bits")
    common.add_argument("--tol", default=None, help="comparison / approximation tolerance")
    common.add_argument("--out", "-o", default=None, help="output path (default stdout)")
    common.add_argument("--metadata", default=None, help="write a JSON metadata sidecar")

    p = argparse.ArgumentParser(prog="hklab", description="Hegselmann-Krause opinion dynamics toolkit")
    sub = p.add_subparsers(dest="group", required=True)

    d = sub.add_parser("discrete", help="finite-agent dynamics")
    dsub = d.add_subparsers(dest="action", required=True)
    for action, hlp in (("run", "iterate and write the trajectory CSV"), ("equilibrium", "write the cluster report JSON")):
        a = dsub.add_parser(action, parents=[common], help=hlp)
        src = a.add_mutually_exclusive_group(required=True)
        src.add_argument("--agents", help="comma separated opinions (p/q or decimal)")
        src.add_argument("--file", help="file with opinions")
        src.add_argument("--equidistant", type=int, metavar="N", help="use (1, ..., N)")
        a.add_argument("--max-steps", type=int, default=None)
        if action == "run":
            a.add_argument("--final-only", action="store_true", help="write only the final state")
            a.add_argument("--clusters", default=None, help="also write the cluster report JSON here")

    c = sub.add_parser("continuum", help="continuous-agent dynamics")
    csub = c.add_subparsers(dest="action", required=True)
    a = csub.add_parser("run", parents=[common], help="evolve a piecewise-linear profile")
    src = a.add_mutually_exclusive_group(required=True)
    src.add_argument("--linear", help="start from x(alpha) = R alpha on [0, 1]")
    src.add_argument("--profile", help="profile JSON file")
    a.add_argument("--steps", type=int, default=1)
    a.add_argument("--format", choices=["csv", "json"], default="csv")

    x = sub.add_parser("counterexample", help="double-S certification")
    xsub = x.add_subparsers(dest="action", required=True)
    a = xsub.add_parser("run", parents=[common], help="evolve and certify the double-S profile")
    a.add_argument("--epsilon", default="1/100")
    a.add_argument("--d", default="3/2")
    a.add_argument("--steps", type=int, default=5)
    a.add_argument("--explore", action="store_true", help="exploratory run without certification guards")

    e = sub.add_parser("experiment", help="Monte Carlo and scaling studies")
    esub = e.add_subparsers(dest="action", required=True)
    for kind in ("consensus-prob", "stability-prob"):
        a = esub.add_parser(kind, parents=[common])
        a.add_argument("--n", type=int, default=500)
        a.add_argument("--l", default="3,4,5,6,7")
        a.add_argument("--trials", type=int, default=30)
        a.add_argument("--seed", type=int, default=42)
        a.add_argument("--horizon", type=int, default=None)
        a.add_argument("--workers", type=int, default=1)
    for kind in ("eqtime", "eqtime-scan"):
        a = esub.add_parser(kind, parents=[common])
        a.add_argument("--n", default="100,200,400,800")
        a.add_argument("--max-steps", type=int, default=None)
    a = esub.add_parser("linear-critical", parents=[common])
    a.add_argument("--r", default="2.5,3,4,5,6,7", help="initial ranges")
    a.add_argument("--horizon", type=int, default=200)
    return p


def _policy(args, default_mode: str, default_bits: int = 256) -> PrecisionPolicy:
    mode = Backend(args.mode or default_mode)
    bits = args.precision if args.precision is not None else default_bits
    tol = None
    if args.tol is not None and mode is not Backend.EXACT:
        tol = _fraction(args.tol, "--tol")
        if tol <= 0:
            raise UsageError("--tol must be positive")
        tol = float(tol) if mode is Backend.F64 else tol
    try:
        if mode is Backend.EXACT:
            return PrecisionPolicy.exact()
        if mode is Backend.F64:
            return PrecisionPolicy.f64(tol if tol is not None else 1e-12)
        return PrecisionPolicy.bigfloat(bits, tol)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _fraction(text: str, flag: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"{flag}: malformed number {text!r}") from exc


def _list(text: str, flag: str, conv=float) -> list:
    items = [t for t in text.replace(" ", "").split(",") if t]
    if not items:
        raise UsageError(f"{flag}: empty list")
    try:
        return [conv(t) for t in items]
    except ValueError as exc:
        raise UsageError(f"{flag}: malformed list {text!r}") from exc


def parse_command(argv: Sequence[str]) -> Command:
    """Parse and validate ``argv``; raises :class:`UsageError` or ``SystemExit(2)``."""
    parser = _build_parser()
    args = parser.parse_args(list(argv))
    name = f"{args.group} {args.action}"
    params: dict[str, Any] = {}

    if args.group == "discrete":
        policy = _policy(args, "exact")
        if args.agents is not None:
            toks = [t for t in args.agents.split(",") if t.strip()]
        elif args.file is not None:
            try:
                with open(args.file, encoding="utf-8") as fh:
                    toks = hio.read_opinions(fh.read())
            except OSError as exc:
                raise UsageError(f"--file: {exc}") from exc
        else:
            if args.equidistant < 1:
                raise UsageError("--equidistant must be at least 1")
            toks = [str(i) for i in range(1, args.equidistant + 1)]
        if not toks:
            raise UsageError("no opinions given")
        try:
            params["opinions"] = [policy.scalar(t) for t in toks]
        except (ValueError, ZeroDivisionError) as exc:
            raise UsageError(f"malformed opinion: {exc}") from exc
        if args.max_steps is not None and args.max_steps < 0:
            raise UsageError("--max-steps must be nonnegative")
        params["max_steps"] = args.max_steps
        if args.action == "run":
            params["final_only"] = args.final_only
            params["clusters"] = args.clusters

    elif args.group == "continuum":
        policy = _policy(args, "exact")
        if args.steps < 0:
            raise UsageError("--steps must be nonnegative")
        params["steps"] = args.steps
        params["format"] = args.format
        params["tol"] = _fraction(args.tol, "--tol") if args.tol is not None else None
        if params["tol"] is not None and params["tol"] <= 0:
            raise UsageError("--tol must be positive")
        if args.linear is not None:
            r = _fraction(args.linear, "--linear")
            if r < 0:
                raise UsageError("--linear must be nonnegative")
            params["linear"] = r
        else:
            try:
                with open(args.profile, encoding="utf-8") as fh:
                    params["profile_text"] = fh.read()
            except OSError as exc:
                raise UsageError(f"--profile: {exc}") from exc

    elif args.group == "counterexample":
        policy = _policy(args, "bigfloat", 512)
        eps = _fraction(args.epsilon, "--epsilon")
        d = _fraction(args.d, "--d")
        if not 0 < eps <= Fraction(1, 4):
            raise UsageError(f"--epsilon must lie in (0, 1/4], got {args.epsilon}")
        if not 1 < d < 2:
            raise UsageError(f"--d must lie in (1, 2), got {args.d}")
        if args.steps < 1:
            raise UsageError("--steps must be at least 1")
        certify = not args.explore
        if certify and (eps > Fraction(1, 100) or policy.backend is Backend.F64):
            raise UsageError("certification needs --epsilon <= 1/100 and exact or bigfloat mode; use --explore")
        params.update(epsilon=eps, d=d, steps=args.steps, certify=certify)
        params["tol"] = _fraction(args.tol, "--tol") if args.tol is not None else None

    else:
        policy = _policy(args, "f64")
        kind = args.action
        if kind in ("consensus-prob", "stability-prob"):
            if args.n < 1 or args.trials < 1 or args.workers < 1:
                raise UsageError("--n, --trials and --workers must be positive")
            if not 0 <= args.seed < 2**64:
                raise UsageError("--seed must be a 64-bit unsigned integer")
            Ls = _list(args.l, "--l")
            if any(not x > 0 for x in Ls):
                raise UsageError("--l values must be positive")
            params.update(N=args.n, L=Ls, trials=args.trials, seed=args.seed, horizon=args.horizon, workers=args.workers)
        elif kind in ("eqtime", "eqtime-scan"):
            name = "experiment eqtime"
            Ns = _list(args.n, "--n", int)
            if any(n < 2 for n in Ns):
                raise UsageError("--n values must be at least 2")
            params.update(Ns=Ns, max_steps=args.max_steps)
        else:
            Rs = _list(args.r, "--r")
            if any(not r > 0 for r in Rs):
                raise UsageError("--r values must be positive")
            if args.horizon < 0:
                raise UsageError("--horizon must be nonnegative")
            tol = float(_fraction(args.tol, "--tol")) if args.tol is not None else 1e-6
            params.update(R=Rs, horizon=args.horizon, tol=tol)

    return Command(name, policy, params, args.out, args.metadata, list(argv))


# -- execution -------------------------------------------------------------------


def _run_discrete(cmd: Command, fh) -> dict:
    from .discrete import OpinionConfig, extract_clusters, is_stable, run_to_equilibrium

    p = cmd.params
    cfg = OpinionConfig.from_values(p["opinions"], cmd.policy, sort=True)
    keep = cmd.name == "discrete run" and not p.get("final_only")
    res = run_to_equilibrium(cfg, p["max_steps"], keep_trajectory=keep)
    clusters = extract_clusters(res.final)
    report = hio.cluster_report(clusters, is_stable(clusters), res.steps, cmd.policy)
    digits = cmd.policy.digits()
    if cmd.name == "discrete run":
        hio.write_trajectory_csv(res, fh)
        if p.get("clusters"):
            with open(p["clusters"], "w", encoding="utf-8") as cf:
                hio.write_cluster_json(report, cf, digits)
    else:
        hio.write_cluster_json(report, fh, digits)
    return {"steps": res.steps, "reached_equilibrium": res.reached_equilibrium, "stop_rule": res.stop_rule}


def _run_continuum(cmd: Command, fh) -> dict:
    from .continuum import Profile, continuum_step

    p = cmd.params
    if "linear" in p:
        prof = Profile.linear(p["linear"], policy=cmd.policy)
    else:
        prof = hio.profile_from_json(p["profile_text"], cmd.policy)
    tol = p["tol"]
    for _ in range(p["steps"]):
        prof = continuum_step(prof, tol)
    if p["format"] == "json":
        fh.write(hio.profile_to_json(prof))
    else:
        hio.write_profile_csv(prof, fh)
    return {"plateau_convention": "inf/sup", "breakpoints": len(prof)}


def _run_counterexample(cmd: Command, fh) -> tuple[dict, bool]:
    from .counterexample import DoubleSParams, run_counterexample

    p = cmd.params
    params = DoubleSParams(p["epsilon"], p["d"])
    certs = run_counterexample(params, p["steps"], cmd.policy, p["tol"], certify=p["certify"])
    hio.write_certificates(certs, fh, cmd.policy.digits())
    ok = all(c.passed for c in certs)
    return {"symmetrization": True, "certify": p["certify"], "pass": ok}, ok


def _run_experiment(cmd: Command, fh) -> dict:
    from . import experiments as ex

    p = cmd.params
    kind = cmd.name.split(" ", 1)[1]
    if kind in ("consensus-prob", "stability-prob"):
        spec = ex.ExperimentSpec(kind, N=p["N"], L=tuple(p["L"]), trials=p["trials"], seed=p["seed"], horizon=p["horizon"])
        fn = ex.consensus_probability if kind == "consensus-prob" else ex.stability_probability
        hio.write_estimates_csv(fn(spec, workers=p["workers"]), fh)
        return {"seed": p["seed"], "trials": p["trials"], "N": p["N"], "stream": "philox(seed, trial)", "stop_rule": "cluster"}
    if kind == "eqtime":
        hio.write_eqtime_csv(ex.equilibration_scan(p["Ns"], cmd.policy, p["max_steps"]), fh)
        return {"N": p["Ns"], "max_steps": p["max_steps"], "stop_rule": "exact" if cmd.policy.is_exact else "cluster"}
    rows = ex.linear_critical_scan(p["R"], p["horizon"], p["tol"])
    hio.write_linear_csv(rows, fh)
    return {"tol": p["tol"], "horizon": p["horizon"]}


def execute(cmd: Command) -> int:
    from .continuum import RefinementOverflow
    from .counterexample import PrecisionExhausted

    status = EXIT_OK
    try:
        with hio._open(cmd.out) as fh:
            if cmd.name.startswith("discrete"):
                info = _run_discrete(cmd, fh)
            elif cmd.name.startswith("continuum"):
                info = _run_continuum(cmd, fh)
            elif cmd.name.startswith("counterexample"):
                info, ok = _run_counterexample(cmd, fh)
                if not ok:
                    print("hklab: certification failed", file=sys.stderr)
                    status = EXIT_FAIL
            else:
                info = _run_experiment(cmd, fh)
        if cmd.metadata:
            hio.write_metadata(cmd.metadata, ["hklab", *cmd.argv], cmd.policy, **info)
    except (PrecisionExhausted, RefinementOverflow, ArithmeticError, OSError) as exc:
        print(f"hklab: {exc}", file=sys.stderr)
        return EXIT_FAIL
    return status


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        cmd = parse_command(argv)
    except UsageError as exc:
        print(f"hklab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    return execute(cmd)


if __name__ == "__main__":
    sys.exit(main())
