"""Invariant suites of every module, runnable without pytest."""
import math
import os
import tempfile

import numpy as np

from . import _backend
from .czd import bad_by_scale, cz_decompose, verify_cz
from .grid import (GridFunction, GridSpec, central_mask, distribution_measure, frequency_l2_norm,
                   lebesgue_norm, read_sgrd, transform_pair, write_sgrd)
from .kernel_zoo import PairSampler, check_size, dyadic_piece, field_from_key, l_delta, make_kernel
from .microlocal import (AdmissibilityParams, MultiplierSymbol, admissible_parameters, apply_multiplier, direction_net,
                         directional_symbol, find_admissible, lp_reconstruction, partition_of_unity,
                         riesz_symbol)
from .operator import OperatorConfig, apply_truncated, diagonal_excluded, dyadic_sum
from .probe import default_lambda_grid, weak_ratio
from .sphere_fn import SAMPLES, build_quadrature, compute_norms, moment, sample_omega


def _rel(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def check_sphere():
    q = build_quadrature(2, 1024)
    q3 = build_quadrature(3, 4096)
    ok = abs(q.weights.sum() - 2 * math.pi) < 1e-10 and abs(q3.weights.sum() - 4 * math.pi) < 1e-10
    ok &= np.allclose(np.linalg.norm(q3.nodes, axis=1), 1.0, atol=1e-12)
    n = compute_norms(sample_omega("const1"), q)
    ok &= abs(n.c_omega - 2 * math.pi * (1 + math.log(3))) < 1e-9
    ok &= abs(moment(sample_omega("theta1"), q, (0, 0))) < 1e-10
    for key in SAMPLES:
        nm = compute_norms(sample_omega(key), q)
        ok &= nm.llogl >= nm.l1 * math.log(2) - 1e-12 and nm.c_omega >= nm.llogl
    om = sample_omega("logspike")
    x = np.random.default_rng(0).standard_normal((50, 2))
    ok &= bool(np.allclose(om(x), om(3.7 * x), rtol=1e-13, atol=0))
    return ok, "quadrature, norms, moments, homogeneity"


def check_kernels():
    K = make_kernel("power", 2)
    ok = check_size(K, PairSampler(2, seed=7), 2000) == 1.0
    ok &= (l_delta(100, 1), l_delta(2, 1), l_delta(4, 0.5)) == (15, 4, 10)
    x, y = np.array([[0.3, 0.1]]), np.array([[0.0, 0.0]])
    tot = sum(dyadic_piece(K, j)(x, y) for j in range(-20, 21))
    ok &= abs(tot[0] - K(x, y)[0]) <= 1e-12 * abs(K(x, y)[0])
    B = make_kernel("bajsanski_coifman", 2, field=field_from_key("quadratic"), l=2)
    z = x - y
    ok &= abs(B(x, y)[0] - z[0, 0] ** 2 / np.linalg.norm(z) ** 4) < 1e-12
    return ok, "size constant, l_delta, dyadic partition, Taylor identity"


def check_grid():
    spec = GridSpec(2, 64, 2.0)
    rng = np.random.default_rng(1)
    u = GridFunction(spec, rng.standard_normal(spec.shape) + 1j * rng.standard_normal(spec.shape))
    back = transform_pair(transform_pair(u, "forward"), "inverse")
    ok = _rel(back.values, u.values) < 1e-12
    ok &= abs(frequency_l2_norm(transform_pair(u, "forward")) / lebesgue_norm(u, 2) - 1) < 1e-10
    lams = np.geomspace(0.01, 5, 40)
    meas = [distribution_measure(u, lv) for lv in lams]
    ok &= bool(np.all(np.diff(meas) <= 0))
    ok &= all(lebesgue_norm(u, 1) >= lv * m for lv, m in zip(lams, meas))
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "u.sgrd")
        write_sgrd(path, u)
        ok &= bool(np.array_equal(read_sgrd(path).values, u.values))
    return ok, "round trip, Parseval, monotone measure, Chebyshev, .sgrd"


def check_cz():
    spec = GridSpec(2, 64, 1.0)
    rng = np.random.default_rng(2)
    f = GridFunction(spec, rng.lognormal(0, 1.5, spec.shape))
    t = 4 * float(np.abs(f.values).mean())
    dec = cz_decompose(f, t)
    ok = verify_cz(dec, f, t).passed
    b = sum((bad_by_scale(dec, k).values for k in dec.scales()), np.zeros(spec.shape))
    ok &= bool(np.allclose(b, dec.bad().values, rtol=0, atol=1e-12 * t))
    dec2 = cz_decompose(f * 3.0, 3.0 * t)
    ok &= [c for c in dec.cubes] == [c for c in dec2.cubes]
    return ok, "decomposition properties, by-scale sum, scaling covariance"


def check_microlocal(full=False):
    ok = True
    for d in ((2, 3) if full else (2,)):
        net = direction_net(8, 0.25, d)
        ok &= net.min_distance() >= net.separation
        pou = partition_of_unity(net)
        xi = np.random.default_rng(3).standard_normal((200, d))
        ok &= float(np.max(np.abs(pou.total(xi) - 1))) <= 1e-10
        m = directional_symbol(net.vectors[0], 8, 0.25)
        ok &= bool(np.allclose(m(xi), m(10 * xi), rtol=0, atol=1e-14))
    spec = GridSpec(2, 32, 4.0)
    u = GridFunction(spec, np.random.default_rng(4).standard_normal(spec.shape))
    v = apply_multiplier(lp_reconstruction(-6, 2), u)
    ok &= _rel(v.values, u.values) < 1e-10
    r = riesz_symbol(1)
    sq = MultiplierSymbol(lambda xi: -(xi[..., 0] / np.linalg.norm(xi, axis=-1)) ** 2, True, "r1^2", 0.0)
    ok &= _rel(apply_multiplier(r, apply_multiplier(r, u)).values, apply_multiplier(sq, u).values) < 1e-10
    ok &= admissible_parameters(AdmissibilityParams(2, 1.0, 0.0, 0.0, 0.5, 0.0, 1)) == (-0.5, -1.0, -1.0, -0.5, True)
    ok &= all(find_admissible(d) is not None for d in (2, 3, 4, 5))
    return ok, "net separation, partition identity, homogeneity, reconstruction, admissibility"


def check_operator():
    spec = GridSpec(2, 32, 2.0)
    rng = np.random.default_rng(5)
    mask = central_mask(spec)
    f = GridFunction(spec, np.where(mask, rng.standard_normal(spec.shape), 0))
    g = GridFunction(spec, np.where(mask, rng.standard_normal(spec.shape), 0))
    cfg = OperatorConfig(sample_omega("theta1"), make_kernel("power", 2))
    lhs = apply_truncated(cfg, f * 2.0 + g * -3.0).values
    rhs = 2.0 * apply_truncated(cfg, f).values - 3.0 * apply_truncated(cfg, g).values
    ok = _rel(lhs, rhs) < 1e-12
    ok &= np.abs(dyadic_sum(cfg, f).values - diagonal_excluded(cfg, f).values).sum() <= \
        1e-10 * np.abs(diagonal_excluded(cfg, f).values).sum()
    if _backend.COMPILED:
        from dataclasses import replace

        fb = apply_truncated(replace(cfg, backend="fallback"), f).values
        ok &= _rel(fb, apply_truncated(cfg, f).values) < 1e-12
    return ok, "linearity, dyadic exhaustion, backend agreement"


def check_probe():
    spec = GridSpec(2, 64, 2.0)
    u = GridFunction(spec, np.random.default_rng(6).standard_normal(spec.shape))
    res = weak_ratio(u, 1.0, default_lambda_grid(u))
    ok = res.weak_ratio <= res.l1_ratio and bool(np.all(np.diff(res.measures) <= 0))
    return ok, "Chebyshev, monotone measures"


SUITES = [("sphere_fn", check_sphere), ("kernel_zoo", check_kernels), ("grid", check_grid),
          ("czd", check_cz), ("microlocal", check_microlocal), ("operator", check_operator),
          ("probe", check_probe)]


def run_selftest(full=False, stream=None):
    import sys

    stream = stream or sys.stdout
    all_ok = True
    for name, fn in SUITES:
        try:
            ok, what = fn(full) if name == "microlocal" else fn()
        except Exception as exc:  # a crash is a failure, reported not raised
            ok, what = False, f"{type(exc).__name__}: {exc}"
        all_ok &= bool(ok)
        print(f"{'PASS' if ok else 'FAIL'} {name}: {what}", file=stream)
    return all_ok
