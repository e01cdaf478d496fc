"""``singlab`` command line.

Every subcommand accepts ``--config FILE`` (JSON); flags override keys of
the file. Outputs go to ``--out``, else ``$SINGLAB_OUT``, else
``./singlab-out``. Exit codes: 0 ok, 1 experiment or selftest failure,
2 configuration error.
"""
import argparse
import json
import os
import sys

from . import _backend
from .config import ConfigError, load_config

# flag dest -> dotted config key, per subcommand
_OPERATOR_FLAGS = {
    "omega": "omega_key", "kernel": "kernel_key", "d": "grid.d", "N": "grid.N", "L": "grid.L",
    "epsilon_cells": "operator.epsilon_cells", "rule": "operator.rule",
    "j_min": "operator.j_min", "j_max": "operator.j_max",
    "field": "kernel.field", "profile": "kernel.profile",
}
FLAG_KEYS = {
    "norms": {"omega": "omega_key", "d": "grid.d", "resolution": "norms.resolution", "q": "norms.q"},
    "check-kernel": {"kernel": "kernel_key", "d": "grid.d", "samples": "check.samples",
                     "field": "kernel.field", "profile": "kernel.profile"},
    "cz": {"d": "grid.d", "N": "grid.N", "L": "grid.L", "level_factor": "cz.level_factor",
           "enlargement": "cz.enlargement"},
    "net": {"n": "net.n", "gamma": "net.gamma", "d": "grid.d"},
    "apply": dict(_OPERATOR_FLAGS, input="apply.input"),
    "probe": dict(_OPERATOR_FLAGS, epsilons="probe.epsilons", lambda_points="probe.lambda_points",
                  input="probe.input", cz_exclusion="probe.cz_exclusion"),
    "params": {"d": "params.d", "delta": "params.delta", "gamma": "params.gamma",
               "iota": "params.iota", "mu": "params.mu", "eps0": "params.eps0", "N1": "params.N1"},
}
EXPERIMENT_OF = {"check-kernel": "kernel-check"}


def _operator_args(p):
    p.add_argument("--omega")
    p.add_argument("--kernel")
    p.add_argument("--d", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--L", type=float)
    p.add_argument("--epsilon-cells", type=float)
    p.add_argument("--rule", choices=("plain", "antisymmetrized"))
    p.add_argument("--j-min", type=int)
    p.add_argument("--j-max", type=int)
    p.add_argument("--field")
    p.add_argument("--profile")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, default=None, help="worker threads for the compiled core")
    common.add_argument("--seed", type=int)

    ap = argparse.ArgumentParser(prog="singlab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("norms", parents=[common], help="norms and C_Omega of a sample density")
    p.add_argument("--omega")
    p.add_argument("--d", type=int)
    p.add_argument("--resolution", type=int)
    p.add_argument("--q", type=float, nargs="+")

    p = sub.add_parser("check-kernel", parents=[common], help="empirical size/regularity constants")
    p.add_argument("--kernel")
    p.add_argument("--d", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--field")
    p.add_argument("--profile")

    p = sub.add_parser("cz", parents=[common], help="decompose the random fixture and verify")
    p.add_argument("--d", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--L", type=float)
    p.add_argument("--level-factor", type=float)
    p.add_argument("--enlargement", type=float)

    p = sub.add_parser("net", parents=[common], help="build a direction net")
    p.add_argument("--n", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--d", type=int)

    p = sub.add_parser("apply", parents=[common], help="apply the truncated operator, write .sgrd")
    _operator_args(p)
    p.add_argument("--input", help="gaussian, spike or a .sgrd path")

    p = sub.add_parser("probe", parents=[common], help="weak-type distribution sweep")
    _operator_args(p)
    p.add_argument("--epsilons", type=float, nargs="+")
    p.add_argument("--lambda-points", type=int)
    p.add_argument("--input", choices=("spike", "gaussian"))
    p.add_argument("--cz-exclusion", action="store_true", default=None)

    p = sub.add_parser("params", parents=[common], help="admissibility exponents")
    p.add_argument("--d", type=int)
    for name in ("delta", "gamma", "iota", "mu", "eps0"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--N1", type=int)

    p = sub.add_parser("selftest", parents=[common], help="run the invariant suites")
    p.add_argument("--full", action="store_true", help="include the slower checks")
    return ap


def _overrides(args):
    out = {"experiment": EXPERIMENT_OF.get(args.command, args.command)}
    if args.seed is not None:
        out["seed"] = args.seed
    for dest, key in FLAG_KEYS[args.command].items():
        val = getattr(args, dest, None)
        if val is None:
            continue
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = val
    return out


def out_dir(args):
    return args.out or os.environ.get("SINGLAB_OUT") or "singlab-out"


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("config error: --threads must be >= 1", file=sys.stderr)
            return 2
        _backend.set_threads(args.threads)

    if args.command == "selftest":
        from .selftest import run_selftest

        return 0 if run_selftest(full=args.full) else 1

    from .probe import run_experiment

    try:
        doc = load_config(args.config, _overrides(args))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        result, ok, files = run_experiment(doc, out_dir(args))
    except (ValueError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(result, indent=2))
    for f in files:
        print(f"wrote {f}", file=sys.stderr)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
