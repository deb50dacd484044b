"""Command-line entry point: ``reslab <subcommand> [flags]``.

Exit status is 0 on success, 1 on invalid input and 2 when a check
subcommand finds a violated identity.  Tabular output is CSV whose first
line is ``# `` followed by a JSON header with the resolved configuration.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy

from . import __version__
from .btm import BTMError, annealed_experiment, quenched_experiment, rate_fit
from .checks import NETWORK_CHECKS, SPACE_CHECKS, network_corpus
from .exponents import ExponentDomainError, exponent_table
from .metric import bl_distance, load_space
from .network import NetworkError, load_network, spectral
from .realtree import ExcursionError, correspondence_embedding, ghp_bound, read_excursion_csv
from .sierpinski import MAX_LEVEL, sg_heat_kernel_error, sg_semigroup_error


class UsageError(Exception):
    pass


class CheckFailed(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def header(command: str, config: dict) -> dict:
    return {"command": command, "config": _jsonable(config),
            "versions": {"reslab": __version__, "numpy": np.__version__, "scipy": scipy.__version__}}


def render_csv(command: str, config: dict, columns: Sequence[str], rows: Sequence[dict]) -> str:
    out = io.StringIO()
    out.write("# " + json.dumps(header(command, config), sort_keys=True) + "\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(row[c]) for c in columns])
    return out.getvalue()


def render_json(command: str, config: dict, payload) -> str:
    doc = {"header": header(command, config), "result": _jsonable(payload)}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def parse_levels(text: str) -> list:
    """``"2..6"`` (inclusive) or ``"2,3,5"``."""
    try:
        if ".." in text:
            a, b = text.split("..")
            out = list(range(int(a), int(b) + 1))
        else:
            out = [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad level range {text!r}")
    if len(out) < 2 or min(out) < 0 or max(out) > MAX_LEVEL:
        raise argparse.ArgumentTypeError(f"levels must give at least two values in [0, {MAX_LEVEL}]")
    return out


def parse_int_list(text: str) -> list:
    try:
        out = [int(v) for v in text.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}")
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError("values must be positive integers")
    return out


def positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def _out_flags(p, default="csv"):
    p.add_argument("--out", choices=("csv", "json"), default=default, help="output format")
    p.add_argument("--output", type=Path, default=None, help="write to this file instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="reslab", description="Resistance-form convergence-rate toolkit")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("exponents", help="JSON table of all rate exponents")
    p.add_argument("--s0", type=float, required=True)
    p.add_argument("--s1", type=float, required=True)
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--output", type=Path, default=None)

    p = sub.add_parser("bl-dist", help="BL^kappa distance between the masses of two space documents")
    p.add_argument("--space", type=Path, required=True)
    p.add_argument("--other", type=Path, required=True)
    p.add_argument("--kappa", type=positive_float, default=1.0)
    p.add_argument("--output", type=Path, default=None)

    p = sub.add_parser("resistance", help="effective resistances of a network document")
    p.add_argument("--network", type=Path, required=True)
    p.add_argument("--spectral-csv", type=Path, default=None,
                   help="also export the spectral decomposition (needs masses)")
    p.add_argument("--output", type=Path, default=None)

    for name, help_ in (("green-check", "Green formula, commute time and heat-kernel identities"),
                        ("resolvent-check", "resolvent series against the direct solve")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--graphs", type=int, default=50)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--output", type=Path, default=None)

    p = sub.add_parser("invariants", help="all corpus identity checks")
    p.add_argument("--graphs", type=int, default=50)
    p.add_argument("--spaces", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", type=Path, default=None)

    for name in ("sg-rate", "sg-hk-rate"):
        p = sub.add_parser(name, help="level-to-level gasket errors")
        p.add_argument("--levels", type=parse_levels, default=parse_levels("2..6"))
        p.add_argument("--t", type=positive_float, default=1.0)
        p.add_argument("--kappa", type=positive_float, default=1.0)
        _out_flags(p)

    p = sub.add_parser("btm-quenched", help="quenched trap-model errors for one environment")
    p.add_argument("--alpha", type=positive_float, required=True)
    p.add_argument("--n", type=parse_int_list, required=True)
    p.add_argument("--t", type=positive_float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kappa", type=positive_float, default=1.0)
    p.add_argument("--bl-r", type=positive_float, default=1.0)
    p.add_argument("--convention", choices=("paper_generator", "unit_resistance"), default="paper_generator")
    p.add_argument("--no-bl", action="store_true", help="skip the BL LP (the slowest column)")
    _out_flags(p)

    p = sub.add_parser("btm-annealed", help="trap-model errors averaged over environments")
    p.add_argument("--alpha", type=positive_float, required=True)
    p.add_argument("--n", type=parse_int_list, required=True)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--t", type=positive_float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kappa", type=positive_float, default=1.0)
    p.add_argument("--bl-r", type=positive_float, default=1.0)
    p.add_argument("--convention", choices=("paper_generator", "unit_resistance"), default="paper_generator")
    p.add_argument("--no-bl", action="store_true")
    _out_flags(p)

    p = sub.add_parser("tree-bound", help="GHP bound and achieved embedding for two excursions")
    p.add_argument("--f", type=Path, required=True)
    p.add_argument("--g", type=Path, required=True)
    p.add_argument("--kappa", type=positive_float, default=1.0)
    p.add_argument("--eps", type=positive_float, default=1e-9)
    p.add_argument("--output", type=Path, default=None)
    return ap


def _config(args) -> dict:
    cfg = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()
           if k not in ("output",)}
    return cfg


def _read(path: Path) -> str:
    try:
        return path.read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}")


def _run_checks(names_and_results) -> dict:
    report = {}
    failed = []
    for name, (worst, tol) in names_and_results:
        ok = bool(worst <= tol)
        report[name] = {"worst": float(worst), "tolerance": tol, "pass": ok}
        if not ok:
            failed.append(name)
    return report, failed


def cmd_exponents(args):
    return render_json("exponents", _config(args),
                       exponent_table(args.s0, args.s1, args.theta, args.kappa, args.alpha)), None


def cmd_bl_dist(args):
    a = load_space(_read(args.space))
    b = load_space(_read(args.other))
    if a.space.dist.shape != b.space.dist.shape or not np.allclose(a.space.dist, b.space.dist,
                                                                     rtol=0, atol=1e-12):
        raise UsageError("--space and --other must describe the same metric")
    d = bl_distance(a.space, a.mass, b.mass, args.kappa)
    return render_json("bl-dist", _config(args), {"bl": d}), None


def cmd_resistance(args):
    net, mass = load_network(_read(args.network))
    payload = {"n": net.n_vertices, "diameter": net.diameter, "R": net.R}
    if args.spectral_csv is not None:
        if mass is None:
            raise UsageError("--spectral-csv needs masses in the network document")
        args.spectral_csv.write_text(spectral(net, mass).to_csv())
        payload["spectral_csv"] = str(args.spectral_csv)
    return render_json("resistance", _config(args), payload), None


def cmd_green_check(args):
    corpus = network_corpus(args.graphs, args.seed)
    names = ("green", "commute", "heat_kernel", "potential_lipschitz")
    report, failed = _run_checks((n, NETWORK_CHECKS[n](corpus)) for n in names)
    return render_json("green-check", _config(args), report), failed


def cmd_resolvent_check(args):
    corpus = network_corpus(args.graphs, args.seed)
    report, failed = _run_checks([("resolvent", NETWORK_CHECKS["resolvent"](corpus))])
    return render_json("resolvent-check", _config(args), report), failed


def cmd_invariants(args):
    corpus = network_corpus(args.graphs, args.seed)
    results = [(n, f(corpus)) for n, f in NETWORK_CHECKS.items()]
    results += [(n, f(count=args.spaces, seed=args.seed + i + 10))
                for i, (n, f) in enumerate(SPACE_CHECKS.items())]
    report, failed = _run_checks(results)
    return render_json("invariants", _config(args), report), failed


def _sg(args, fn, name):
    lv = args.levels
    if lv != list(range(lv[0], lv[-1] + 1)):
        raise UsageError("--levels must be a contiguous range")
    res = fn(lv[0], lv[-1], t=args.t, kappa=args.kappa)
    if args.out == "json":
        return render_json(name, _config(args), res), None
    return render_csv(name, _config(args), ("n", "err", "bound", "ratio"), res["rows"]), None


def _btm_rows(args, rows, name, extra=None):
    cols = ("n", "seed", "cdf_err", "bl_err", "hk_err")
    if args.out == "json":
        payload = {"rows": rows}
        if extra:
            payload.update(extra)
        return render_json(name, _config(args), payload)
    return render_csv(name, _config(args), cols, rows)


def cmd_btm_quenched(args):
    rows = quenched_experiment(args.alpha, args.n, t=args.t, seed=args.seed, bl_r=args.bl_r,
                               kappa=args.kappa, convention=args.convention, with_bl=not args.no_bl)
    extra = None
    if len(args.n) > 1:
        extra = {"fits": {k: rate_fit({r["n"]: r[k] for r in rows})
                          for k in ("cdf_err", "hk_err", "sg_err")}}
    return _btm_rows(args, rows, "btm-quenched", extra), None


def cmd_btm_annealed(args):
    res = annealed_experiment(args.alpha, args.kappa, args.n, args.trials, args.seed, t=args.t,
                              bl_r=args.bl_r, convention=args.convention, with_bl=not args.no_bl)
    return _btm_rows(args, res["rows"], "btm-annealed",
                     {"mean": res["mean"], "fits": res["fits"], "theory_sup": res["theory_sup"]}), None


def cmd_tree_bound(args):
    f = read_excursion_csv(_read(args.f))
    g = read_excursion_csv(_read(args.g))
    emb = correspondence_embedding(f, g, args.eps, args.kappa)
    payload = {"bound": ghp_bound(f, g, args.kappa), "achieved": emb.achieved,
               "distortion": emb.distortion, "hausdorff": emb.hausdorff, "bl": emb.bl,
               "epsilon": emb.epsilon}
    return render_json("tree-bound", _config(args), payload), None


COMMANDS = {
    "exponents": cmd_exponents,
    "bl-dist": cmd_bl_dist,
    "resistance": cmd_resistance,
    "green-check": cmd_green_check,
    "resolvent-check": cmd_resolvent_check,
    "invariants": cmd_invariants,
    "sg-rate": lambda a: _sg(a, sg_semigroup_error, "sg-rate"),
    "sg-hk-rate": lambda a: _sg(a, sg_heat_kernel_error, "sg-hk-rate"),
    "btm-quenched": cmd_btm_quenched,
    "btm-annealed": cmd_btm_annealed,
    "tree-bound": cmd_tree_bound,
}

VALIDATION_ERRORS = (UsageError, ExponentDomainError, NetworkError, BTMError, ExcursionError,
                     ValueError, KeyError, json.JSONDecodeError)


def run(argv: Optional[Sequence[str]] = None, stdout=None, stderr=None) -> int:
    stdout = stdout if stdout is not None else sys.stdout
    stderr = stderr if stderr is not None else sys.stderr
    try:
        args = build_parser().parse_args(argv)
        text, failed = COMMANDS[args.command](args)
    except VALIDATION_ERRORS as exc:
        stderr.write(f"error: {exc}\n")
        return 1
    if getattr(args, "output", None) is not None:
        args.output.write_text(text)
    else:
        stdout.write(text)
    if failed:
        stderr.write(f"check failed: {', '.join(failed)}\n")
        return 2
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
