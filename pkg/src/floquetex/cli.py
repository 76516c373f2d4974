"""Command-line front end.

    floquetex verify        identity suite, JSON lines
    floquetex build-markov  Markov matrix as a labelled CSV (or JSON)
    floquetex stationary    configuration -> probability CSV
    floquetex observables   density profile CSV and a JSON summary
    floquetex simulate      Monte Carlo profile CSV and a JSON summary

Rational parameters are given as ``p/q`` strings so exact mode stays exact.
Any option can also come from a JSON document passed with ``--config``;
command-line flags win over the file.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import sys

from .chain import ChainSpec, build_floquet, config_label, configurations, validate_parameters
from .kernels import FAMILIES, ModelSpec
from .montecarlo import MCConfig, mc_run
from .mpa import mpa_stationary
from .observables import observables_closed, observables_eigensolve, observables_mpa
from .stationary import ReducibleChainError, sector_states, stationary_eigensolve
from .tensor import format_scalar
from .verify import run_suite, summarize

DEFAULTS = {
    "family": "ssep", "L": 3, "boundary": "open", "kappa": "1/2", "t": None,
    "a": "1", "b": "1", "c": "0", "d": "0", "scalar": "rational", "out": None,
    "config": None, "seed": 0,
    "points": 20, "corrupt": False, "no_chains": False,
    "format": "csv",
    "method": None, "cross_check": False, "particles": None,
    "periods": 10000, "burn_in": 1000, "replicas": 1, "threads": 1,
}
MODEL_KEYS = ("kappa", "t", "a", "b", "c", "d")


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# argument handling
# --------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, family_choices):
    S = argparse.SUPPRESS
    p.add_argument("--family", choices=family_choices, default=S)
    p.add_argument("--L", type=int, default=S, help="number of sites")
    p.add_argument("--boundary", choices=["open", "periodic"], default=S)
    p.add_argument("--kappa", default=S, help="staggering parameter (p/q)")
    p.add_argument("--t", default=S, help="asymmetry parameter, 0 < t < 1")
    for k in "abcd":
        p.add_argument(f"--{k}", default=S, help=f"boundary rate {k}")
    p.add_argument("--scalar", choices=["rational", "float"], default=S)
    p.add_argument("--out", default=S, help="output path (default: stdout)")
    p.add_argument("--config", default=S, help="JSON file with option values")
    p.add_argument("--seed", type=int, default=S)


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = argparse.ArgumentParser(prog="floquetex", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run the identity suite")
    _common(v, list(FAMILIES) + ["all"])
    v.add_argument("--points", type=int, default=S, help="random samples per identity")
    v.add_argument("--corrupt", action="store_true", default=S,
                   help="shift one R-matrix entry by 1e-6 (negative control)")
    v.add_argument("--no-chains", dest="no_chains", action="store_true", default=S)

    b = sub.add_parser("build-markov", help="export the Floquet Markov matrix")
    _common(b, FAMILIES)
    b.add_argument("--format", choices=["csv", "json"], default=S)

    s = sub.add_parser("stationary", help="stationary probability vector")
    _common(s, FAMILIES)
    s.add_argument("--method", choices=["mpa", "eigensolve"], default=S)
    s.add_argument("--cross-check", dest="cross_check", action="store_true", default=S)
    s.add_argument("--particles", type=int, default=S, help="particle sector (periodic chains)")

    o = sub.add_parser("observables", help="Z_L, density profile, current")
    _common(o, FAMILIES)
    o.add_argument("--method", choices=["closed", "mpa", "eigensolve"], default=S)
    o.add_argument("--particles", type=int, default=S, help="particle sector (periodic chains)")

    m = sub.add_parser("simulate", help="Monte Carlo sampling")
    _common(m, FAMILIES)
    m.add_argument("--periods", type=int, default=S, help="measured periods per replica")
    m.add_argument("--burn-in", dest="burn_in", type=int, default=S)
    m.add_argument("--replicas", type=int, default=S)
    m.add_argument("--threads", type=int, default=S)
    m.add_argument("--particles", type=int, default=S, help="initial particle number (periodic)")
    return parser


def resolve(ns: argparse.Namespace) -> dict:
    """Merge defaults, the --config document and explicit flags (in that order)."""
    given = {k: v for k, v in vars(ns).items() if k != "command"}
    cfg = {}
    path = given.get("config")
    if path:
        with open(path) as fh:
            cfg = json.load(fh)
        if not isinstance(cfg, dict):
            raise UsageError("--config must hold a JSON object")
        unknown = sorted(set(cfg) - set(DEFAULTS) - {"command"})
        if unknown:
            raise UsageError(f"unknown configuration keys: {', '.join(unknown)}")
        if cfg.get("command", ns.command) != ns.command:
            raise UsageError(f"configuration is for '{cfg['command']}', not '{ns.command}'")
        cfg.pop("command", None)
    out = dict(DEFAULTS)
    out.update(cfg)
    out.update(given)
    out["command"] = ns.command
    out["explicit"] = sorted(set(cfg) | set(given))
    return out


def model_from(cfg: dict, family=None) -> ModelSpec:
    fam = family or cfg["family"]
    kw = {k: str(cfg[k]) for k in MODEL_KEYS if cfg[k] is not None}
    exact = cfg["scalar"] == "rational"
    if fam.endswith("asep"):
        kw.setdefault("t", "1/2")
    else:
        kw.pop("t", None)
    return ModelSpec(fam, exact=exact, **kw)


def chain_from(cfg: dict) -> ChainSpec:
    model = model_from(cfg)
    try:
        return ChainSpec(model, int(cfg["L"]), cfg["boundary"])
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


@contextlib.contextmanager
def _output(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _fmt(x):
    return format_scalar(x)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_verify(cfg) -> int:
    # parameters given explicitly are held fixed, the rest are sampled
    pinned = {k: str(cfg[k]) for k in MODEL_KEYS if k in cfg["explicit"] and cfg[k] is not None}
    if cfg["scalar"] != "rational":
        raise UsageError("the identity suite runs in exact arithmetic only")
    reports = run_suite(cfg["family"], n_points=int(cfg["points"]), seed=int(cfg["seed"]),
                        chains=not cfg["no_chains"], pinned=pinned, corrupt=bool(cfg["corrupt"]))
    with _output(cfg["out"]) as fh:
        for r in reports:
            fh.write(r.to_json() + "\n")
    groups = summarize(reports)
    failed = [r for r in reports if not r.passed]
    for (check, model), (n, ok) in groups.items():
        mark = "ok  " if ok == n else "FAIL"
        print(f"{mark} {check:32s} {model:12s} {ok}/{n}", file=sys.stderr)
    print(f"{len(groups)} identity groups, {len(reports)} checks, {len(failed)} failed", file=sys.stderr)
    for r in failed[:5]:
        print(f"  {r.check} [{r.model}] at {r.to_dict()['point']}: {r.counterexample}", file=sys.stderr)
    return 0 if not failed else 1


def cmd_build_markov(cfg) -> int:
    chain = chain_from(cfg)
    rep = validate_parameters(chain.model, chain.boundary)
    if not rep.valid:
        print(f"warning: parameters give entries outside [0, 1]: {rep.out_of_range[:3]}", file=sys.stderr)
    m = build_floquet(chain).markov
    labels = [config_label(c) for c in configurations(chain.L, chain.model.s)]
    with _output(cfg["out"]) as fh:
        if cfg["format"] == "json":
            doc = {"model": chain.model.params_dict(), "L": chain.L, "boundary": chain.boundary,
                   "labels": labels, "matrix": [[_fmt(v) for v in row] for row in m.data]}
            fh.write(json.dumps(doc) + "\n")
        else:
            w = csv.writer(fh)
            w.writerow(["to\\from"] + labels)
            for lab, row in zip(labels, m.data):
                w.writerow([lab] + [_fmt(v) for v in row])
    return 0


def _sector(cfg, chain):
    if chain.is_open:
        return None
    if cfg["particles"] is None:
        raise UsageError("periodic chains conserve particles; pick a sector with --particles")
    return sector_states(chain.L, chain.model.s, int(cfg["particles"]))


def cmd_stationary(cfg) -> int:
    chain = chain_from(cfg)
    method = cfg["method"] or ("mpa" if chain.is_open and chain.model.exact else "eigensolve")
    if method == "mpa":
        if not chain.is_open:
            raise UsageError("the matrix product state is available for open chains only")
        state, _, _ = mpa_stationary(chain)
    else:
        state = stationary_eigensolve(build_floquet(chain).markov, _sector(cfg, chain), chain.L)
    if cfg["cross_check"]:
        other = (stationary_eigensolve(build_floquet(chain).markov, _sector(cfg, chain), chain.L)
                 if method == "mpa" else mpa_stationary(chain)[0])
        if not state.equals(other):
            print("cross-check FAILED: matrix product and eigen-solve states differ", file=sys.stderr)
            return 1
        print("cross-check passed", file=sys.stderr)
    labels = [config_label(c) for c in configurations(chain.L, chain.model.s)]
    with _output(cfg["out"]) as fh:
        w = csv.writer(fh)
        w.writerow(["configuration", "probability"])
        for lab, p in zip(labels, state.probabilities):
            w.writerow([lab, _fmt(p)])
    return 0


def _write_profile(path, rep, with_err=False):
    with _output(path) as fh:
        w = csv.writer(fh)
        w.writerow(["site", "density"] + (["stderr"] if with_err else []))
        for i, rho in enumerate(rep.density, start=1):
            row = [i, _fmt(rho)]
            if with_err:
                row.append("" if rep.density_stderr is None else _fmt(rep.density_stderr[i - 1]))
            w.writerow(row)


def cmd_observables(cfg) -> int:
    chain = chain_from(cfg)
    method = cfg["method"] or ("closed" if not chain.model.asymmetric and chain.is_open else "eigensolve")
    if method == "closed":
        if not chain.is_open:
            raise UsageError("closed forms are for open chains")
        rep = observables_closed(chain.model, chain.L)
    elif method == "mpa":
        rep = observables_mpa(chain)
    else:
        rep = observables_eigensolve(chain, _sector(cfg, chain))
    if cfg["out"]:
        _write_profile(cfg["out"], rep)
    print(rep.to_json())
    return 0


def cmd_simulate(cfg) -> int:
    chain = chain_from(cfg)
    mc = MCConfig(seed=int(cfg["seed"]), burn_in=int(cfg["burn_in"]), measure=int(cfg["periods"]),
                  replicas=int(cfg["replicas"]), threads=int(cfg["threads"]),
                  particles=None if cfg["particles"] is None else int(cfg["particles"]))
    rep = mc_run(chain, mc)
    if cfg["out"]:
        _write_profile(cfg["out"], rep, with_err=True)
    print(rep.to_json())
    return 0


COMMANDS = {
    "verify": cmd_verify,
    "build-markov": cmd_build_markov,
    "stationary": cmd_stationary,
    "observables": cmd_observables,
    "simulate": cmd_simulate,
}


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = resolve(ns)
        return COMMANDS[ns.command](cfg)
    except UsageError as exc:
        parser.error(str(exc))
    except (ValueError, ArithmeticError, ReducibleChainError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
