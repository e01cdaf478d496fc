import math
from dataclasses import replace

import numpy as np
import pytest

from oracles import direct_sum
from singlab import _backend
from singlab.grid import GridFunction, GridSpec, central_mask, lebesgue_norm, transform_pair
from singlab.kernel_zoo import Convolution, KernelSpec, kernel_from_key, make_kernel
from singlab.operator import (OperatorConfig, apply_dyadic, apply_truncated, diagonal_excluded,
                              dyadic_sum, evaluate_truncated, mollification_error, omega_l1,
                              riesz_constant, spectral_riesz_oracle)
from singlab.profiles import smooth_step
from singlab.sphere_fn import sample_omega, zero_omega

ZOO_KEYS = ("power", "muckenhoupt:3", "commutator", "higher:2", "general", "bc:2")


def _random_central(spec, seed=0):
    rng = np.random.default_rng(seed)
    return GridFunction(spec, np.where(central_mask(spec), rng.standard_normal(spec.shape), 0.0))


def _gaussian(spec):
    r2 = np.sum(spec.coordinates() ** 2, axis=-1)
    return GridFunction(spec, np.where(central_mask(spec), np.exp(-r2 / 2), 0.0))


def _rel(a, b):
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def test_zero_inputs():
    spec = GridSpec(2, 16, 1.0)
    cfg = OperatorConfig(sample_omega("theta1"), make_kernel("power", 2))
    assert not apply_truncated(cfg, GridFunction.zeros(spec)).values.any()
    cfg0 = OperatorConfig(zero_omega(2), make_kernel("power", 2))
    assert not apply_truncated(cfg0, _random_central(spec)).values.any()


@pytest.mark.parametrize("key", ZOO_KEYS)
@pytest.mark.parametrize("omega", ["theta1", "logspike"])
def test_against_direct_double_loop(key, omega):
    spec = GridSpec(2, 8, 1.0)
    f = _random_central(spec, 1)
    om = sample_omega(omega)
    K = kernel_from_key(key, 2)
    eps = 1.5 * spec.spacing
    ref = direct_sum(spec, f, lambda x, y: om(x - y) * K(x, y),
                     keep=lambda z: np.linalg.norm(z) > eps)
    got = apply_truncated(OperatorConfig(om, K, epsilon=eps), f).values
    assert _rel(got, ref) <= 1e-12


def test_direct_double_loop_3d():
    spec = GridSpec(3, 4, 1.0)
    f = _random_central(spec, 2)
    om = sample_omega("theta1", 3)
    K = make_kernel("commutator", 3, field=kernel_from_key("commutator", 3).structure.field)
    ref = direct_sum(spec, f, lambda x, y: om(x - y) * K(x, y))
    got = diagonal_excluded(OperatorConfig(om, K), f).values
    assert _rel(got, ref) <= 1e-12


def test_routes_and_rules_agree():
    spec = GridSpec(2, 32, 2.0)
    f = _random_central(spec, 3)
    for key in ZOO_KEYS:
        cfg = OperatorConfig(sample_omega("theta1"), kernel_from_key(key, 2))
        base = apply_truncated(cfg, f).values
        pw = apply_truncated(replace(cfg, route="pairwise"), f).values
        anti = apply_truncated(replace(cfg, rule="antisymmetrized"), f).values
        assert _rel(pw, base) <= 1e-12, key
        assert _rel(anti, base) <= 1e-12, key


def test_restricted_evaluation_matches_full():
    spec = GridSpec(2, 32, 2.0)
    f = _random_central(spec, 4)
    cfg = OperatorConfig(sample_omega("theta1"), kernel_from_key("bc:2", 2))
    full = apply_truncated(cfg, f).values
    cells = np.random.default_rng(5).integers(0, 32, (50, 2))
    part = evaluate_truncated(cfg, f, cells)
    assert np.allclose(part, full[cells[:, 0], cells[:, 1]], rtol=1e-13, atol=0)


def test_support_guard():
    spec = GridSpec(2, 16, 1.0)
    v = np.zeros(spec.shape)
    v[0, 0] = 1
    cfg = OperatorConfig(sample_omega("theta1"), make_kernel("power", 2))
    with pytest.raises(ValueError):
        apply_truncated(cfg, GridFunction(spec, v))
    apply_truncated(replace(cfg, support_guard=False), GridFunction(spec, v))


def test_config_errors():
    om, K = sample_omega("theta1"), make_kernel("power", 2)
    for kw in ({"rule": "weird"}, {"epsilon": 0.0}, {"route": "fast"}):
        with pytest.raises(ValueError):
            OperatorConfig(om, K, **kw)
    with pytest.raises(ValueError):
        OperatorConfig(sample_omega("theta1", 3), K)


@pytest.mark.parametrize("key", ZOO_KEYS)
def test_dyadic_exhaustion(key):
    spec = GridSpec(2, 32, 2.0)
    f = _random_central(spec, 6)
    cfg = OperatorConfig(sample_omega("theta1"), kernel_from_key(key, 2))
    a = dyadic_sum(cfg, f).values
    b = diagonal_excluded(cfg, f).values
    assert np.abs(a - b).sum() <= 1e-10 * np.abs(b).sum()


def test_fine_scales_are_empty():
    spec = GridSpec(2, 16, 1.0)
    cfg = OperatorConfig(sample_omega("theta1"), make_kernel("power", 2))
    j = math.floor(math.log2(spec.spacing)) - 2
    assert not apply_dyadic(cfg, _random_central(spec), j).values.any()


def test_dyadic_support_containment():
    spec = GridSpec(2, 64, 4.0)
    v = np.zeros(spec.shape)
    v[32, 32] = 1.0
    f = GridFunction(spec, v)
    cfg = OperatorConfig(sample_omega("const1"), make_kernel("power", 2))
    j = -1
    out = apply_dyadic(cfg, f, j).values
    centre = spec.coordinates()[32, 32]
    dist = np.linalg.norm(spec.coordinates() - centre, axis=-1)
    assert not out[dist > 2.0 ** (j + 2)].any()
    assert out.any()


def test_mollification_fixture_and_errors():
    spec = GridSpec(2, 32, 4.0)
    r = np.linalg.norm(spec.coordinates(), axis=-1)
    f = GridFunction(spec, smooth_step(2 * (1 - r / 1.5)))
    power = OperatorConfig(sample_omega("const1"), make_kernel("power", 2))
    flat = OperatorConfig(sample_omega("const1"),
                          KernelSpec(2, lambda x, y: np.ones(np.broadcast_shapes(x.shape[:-1], y.shape[:-1])),
                                     label="flat", structure=Convolution()))
    ns = (4, 8)
    ep = [mollification_error(power, f, 0, n) * n * n for n in ns]
    ef = [mollification_error(flat, f, 0, n) * n * n for n in ns]
    assert max(ef) <= max(ep)
    with pytest.raises(ValueError):
        mollification_error(power, GridFunction.zeros(spec), 0, 4)


def test_omega_l1():
    assert omega_l1(sample_omega("const1")) == pytest.approx(2 * math.pi, rel=1e-12)
    assert omega_l1(sample_omega("theta1")) == pytest.approx(4.0, rel=1e-6)


def test_riesz_constant_closed_form():
    assert riesz_constant(2) == pytest.approx(2 * math.pi, rel=1e-15)
    assert riesz_constant(3) == pytest.approx(math.pi ** 2, rel=1e-15)


def _fitted_constant(cells):
    spec = GridSpec(2, cells, 8.0)
    f = _gaussian(spec)
    cfg = OperatorConfig(sample_omega("theta1"), make_kernel("power", 2), epsilon=0.5 * spec.spacing)
    u = apply_truncated(cfg, f).values
    o = spectral_riesz_oracle(f, 1, constant=1.0, pad=True).values
    return float(np.vdot(o, u).real / np.vdot(o, o).real)


def test_riesz_constant_derivation():
    # least-squares fit of the quadrature against the bare multiplier, then
    # first-order Richardson extrapolation in h
    c64, c128 = _fitted_constant(64), _fitted_constant(128)
    assert c64 == pytest.approx(5.8590, abs=5e-4)
    assert c128 == pytest.approx(6.0787, abs=5e-4)
    assert 2 * c128 - c64 == pytest.approx(riesz_constant(2), rel=0.01)


def test_oracle_parity_commutation_parseval():
    spec = GridSpec(2, 64, 4.0)
    g = _gaussian(spec)
    x = spec.coordinates()
    even = GridFunction(spec, g.values * (1 + 0.3 * x[..., 1]))  # even in x1
    out = spectral_riesz_oracle(even, 1).values
    # cell centres are symmetric under i -> N-1-i
    assert np.allclose(out[::-1, :], -out, atol=1e-12 * np.abs(out).max())
    a = spectral_riesz_oracle(spectral_riesz_oracle(g, 1), 2).values
    b = spectral_riesz_oracle(spectral_riesz_oracle(g, 2), 1).values
    assert _rel(a, b) <= 1e-10
    c = riesz_constant(2)
    xi = spec.frequencies()
    r = np.linalg.norm(xi, axis=-1)
    m = np.where(r > 0, c * xi[..., 0] / np.where(r > 0, r, 1), 0)
    coeff = transform_pair(g, "forward").values * m
    side = math.sqrt(np.sum(np.abs(coeff) ** 2) * spec.cell_volume / spec.cells ** 2)
    assert lebesgue_norm(spectral_riesz_oracle(g, 1), 2) == pytest.approx(side, rel=1e-10)
    with pytest.raises(ValueError):
        spectral_riesz_oracle(g, 3)


@pytest.mark.skipif(not _backend.COMPILED, reason="compiled core not built")
@pytest.mark.parametrize("key", ZOO_KEYS)
@pytest.mark.parametrize("rule", ["plain", "antisymmetrized"])
def test_backends_agree(key, rule):
    spec = GridSpec(2, 32, 2.0)
    f = _random_central(spec, 7)
    cfg = OperatorConfig(sample_omega("logspike"), kernel_from_key(key, 2), rule=rule)
    a = apply_truncated(replace(cfg, backend="compiled"), f).values
    b = apply_truncated(replace(cfg, backend="fallback"), f).values
    assert _rel(a, b) <= 1e-12
