"""Wall-clock comparison of the compiled core and the numpy fallback.

    python3 benchmarks/bench_backends.py [--sizes 32 64] [--repeat 3] [--threads 1]

Each row times one routine on both backends (median of ``--repeat`` runs)
and checks that the two outputs agree.
"""
import argparse
import statistics
import time
from dataclasses import replace

import numpy as np

from singlab import _backend
from singlab.grid import GridFunction, GridSpec, central_mask
from singlab.kernel_zoo import kernel_from_key
from singlab.microlocal import direction_net
from singlab.operator import OperatorConfig, apply_truncated
from singlab.sphere_fn import sample_omega


def _time(fn, repeat):
    out, ts = None, []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        ts.append(time.perf_counter() - t)
    return statistics.median(ts), out


def _operator_case(key, n, rule):
    spec = GridSpec(2, n, 2.0)
    rng = np.random.default_rng(0)
    f = GridFunction(spec, np.where(central_mask(spec), rng.standard_normal(spec.shape), 0.0))
    cfg = OperatorConfig(sample_omega("theta1"), kernel_from_key(key, 2), rule=rule)

    def run(backend):
        return apply_truncated(replace(cfg, backend=backend), f).values

    return f"apply {key} {rule} N={n}", run


def _net_case(n, gamma, d):
    def run(backend):
        return direction_net(n, gamma, d, backend=backend).vectors

    return f"net d={d} n={n} gamma={gamma}", run


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[32, 64])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args(argv)
    if not _backend.COMPILED:
        raise SystemExit("compiled core not built; nothing to compare")
    _backend.set_threads(args.threads)

    cases = []
    for n in args.sizes:
        cases.append(_operator_case("power", n, "plain"))
        cases.append(_operator_case("power", n, "antisymmetrized"))
        cases.append(_operator_case("commutator", n, "plain"))
        cases.append(_operator_case("bc:2", n, "plain"))
    # d=3 at n=16 takes minutes on the fallback
    cases += [_net_case(16, 0.25, 2), _net_case(8, 0.25, 3)]

    print(f"{'case':42s} {'compiled s':>11s} {'fallback s':>11s} {'speedup':>8s}  agree")
    for label, run in cases:
        tc, a = _time(lambda: run("compiled"), args.repeat)
        tf, b = _time(lambda: run("fallback"), args.repeat)
        agree = np.array_equal(a, b) or np.linalg.norm(a - b) <= 1e-12 * np.linalg.norm(b)
        print(f"{label:42s} {tc:11.4f} {tf:11.4f} {tf / tc:8.1f}  {agree}")


if __name__ == "__main__":
    main()
