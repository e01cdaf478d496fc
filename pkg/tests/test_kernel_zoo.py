import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from singlab.kernel_zoo import (AnalyticProfile, KernelSpec, PairSampler, TripleSampler,
                                check_regularity, check_size, cosh_profile, dyadic_piece, field_from_key,
                                kernel_from_key, l_delta, linear_field, make_kernel,
                                mollified_piece, quadratic_field, sqrt1p_field)
from singlab.profiles import phi_annulus

ZOO_KEYS = ("power", "muckenhoupt:3", "commutator", "higher:2", "general", "bc:2")


def _pair(z):
    return np.array([z], float), np.zeros((1, len(z)))


def test_power_unit_pair():
    x, y = _pair([1.0, 0.0])
    assert make_kernel("power", 2)(x, y)[0] == 1.0


def test_muckenhoupt_modulus():
    K = make_kernel("muckenhoupt", 2, r=3)
    x, y = PairSampler(2, seed=1).draw(500)
    r = np.linalg.norm(x - y, axis=-1)
    assert np.allclose(np.abs(K(x, y)), r ** -2, rtol=1e-12)
    with pytest.raises(ValueError):
        make_kernel("muckenhoupt", 2, r=0)


def test_taylor_identity_for_quadratic_field():
    K = make_kernel("bajsanski_coifman", 2, field=quadratic_field(2), l=2)
    x, y = PairSampler(2, seed=2).draw(300)
    z = x - y
    expected = z[:, 0] ** 2 / np.linalg.norm(z, axis=-1) ** 4
    assert np.allclose(K(x, y), expected, rtol=1e-10, atol=0)


def test_power_size_constant_is_exact():
    assert check_size(make_kernel("power", 2), PairSampler(2, seed=7), 10_000) == 1.0


def test_commutator_size_bounds():
    a = np.array([0.6, -0.8])
    A = linear_field(a)
    c1 = check_size(make_kernel("commutator", 2, field=A), PairSampler(2, seed=3), 20_000)
    c3 = check_size(make_kernel("higher", 2, field=A, k=3), PairSampler(2, seed=3), 20_000)
    assert 0.95 <= c1 <= 1.0 + 1e-12
    assert c3 <= 1.0 + 1e-12


def test_zero_field_commutator_vanishes():
    K = make_kernel("commutator", 2, field=linear_field([0.0, 0.0]))
    reg = check_regularity(K, TripleSampler(2, seed=4), 2000)
    assert reg.first == reg.second == 0.0


def test_power_regularity_is_stable():
    K = make_kernel("power", 2)
    a = check_regularity(K, TripleSampler(2, seed=5), 10_000).value
    b = check_regularity(K, TripleSampler(2, seed=5), 20_000).value
    assert math.isfinite(a) and abs(b / a - 1) <= 0.10


def test_muckenhoupt_regularity_grows_with_r():
    vals = [check_regularity(make_kernel("muckenhoupt", 2, r=r), TripleSampler(2, seed=6), 10_000).value
            for r in (1, 3, 9)]
    assert vals[0] < vals[1] < vals[2]


def test_triples_satisfy_separation():
    a, b, c = TripleSampler(3, seed=8).draw(5000)
    assert np.all(np.linalg.norm(a - c, axis=-1) > 2 * np.linalg.norm(a - b, axis=-1))


def test_samplers_extend_prefix():
    s = PairSampler(2, seed=9)
    x1, y1 = s.draw(5000)
    x2, y2 = s.draw(10_000)
    assert np.array_equal(x1, x2[:5000]) and np.array_equal(y1, y2[:5000])


@pytest.mark.parametrize("n,delta,expected", [(100, 1, 15), (2, 1, 4), (4, 0.5, 10)])
def test_l_delta(n, delta, expected):
    assert l_delta(n, delta) == expected


@pytest.mark.parametrize("n,delta", [(1, 1), (4, 0), (4, 1.5)])
def test_l_delta_domain(n, delta):
    with pytest.raises(ValueError):
        l_delta(n, delta)


@pytest.mark.parametrize("j", [-3, 0, 2])
def test_dyadic_piece_support_and_value(j):
    K = make_kernel("power", 2)
    piece = dyadic_piece(K, j)
    x, y = _pair([2.0 ** (j + 3), 0.0])
    assert piece(x, y)[0] == 0
    x, y = _pair([0.0, 2.0 ** j])
    assert piece(x, y)[0] == pytest.approx(phi_annulus()(1.0) * 2.0 ** (-2 * j), rel=1e-14)
    m = mollified_piece(piece, 4)
    x, y = _pair([2.0 ** (j + 3), 0.0])
    assert m(x, y)[0] == 0


@pytest.mark.parametrize("key", ZOO_KEYS)
def test_dyadic_pieces_telescope(key):
    K = kernel_from_key(key, 2)
    rng = np.random.default_rng(10)
    x = rng.uniform(-1, 1, (40, 2))
    r = np.exp(rng.uniform(np.log(2.0 ** -19), np.log(2.0 ** 19), 40))
    th = rng.uniform(0, 2 * np.pi, 40)
    y = x + r[:, None] * np.column_stack((np.cos(th), np.sin(th)))
    total = sum(dyadic_piece(K, j)(x, y) for j in range(-20, 21))
    ref = K(x, y)
    assert np.all(np.abs(total - ref) <= 1e-12 * np.abs(ref))


def test_mollified_constant_fixture():
    one = KernelSpec(2, lambda x, y: np.ones(np.broadcast_shapes(x.shape[:-1], y.shape[:-1])))
    piece = mollified_piece(dyadic_piece(one, 0, phi=lambda r: np.ones_like(r)), 4)
    x = np.array([[1.0, 0.0], [0.0, 1.5], [-0.7, 0.7]])
    assert np.allclose(piece(x, np.zeros_like(x)), 1.0, atol=1e-6)


def test_mollifier_rule_mass():
    piece = dyadic_piece(make_kernel("power", 2), 0)
    assert mollified_piece(piece, 8, quad_resolution=48).mass_error <= 1e-6
    with pytest.raises(ValueError):
        mollified_piece(piece, 8, quad_resolution=8)
    with pytest.raises(ValueError):
        mollified_piece(mollified_piece(piece, 8), 8)


def test_mollified_gradient_scaling():
    # |grad K_j^n| * 2^(j - l) * 2^(jd) is the same constant at every j
    K = make_kernel("power", 2)
    n = 4
    lvl = l_delta(n, 1.0)
    p = np.array([[1.1, 0.3], [0.2, -1.4], [-0.9, -0.5]])
    consts = []
    for j in (-2, 0, 2):
        m = mollified_piece(dyadic_piece(K, j), n)
        s = 2.0 ** j
        h = 1e-4 * s
        g = [(m(s * p + h * e, 0 * p) - m(s * p - h * e, 0 * p)) / (2 * h) for e in np.eye(2)]
        grad = np.sqrt(np.abs(g[0]) ** 2 + np.abs(g[1]) ** 2)
        consts.append(float(np.max(grad)) * 2.0 ** (j - lvl) * 2.0 ** (2 * j))
    assert max(consts) / min(consts) <= 1.2


def test_make_kernel_errors():
    with pytest.raises(ValueError):
        make_kernel("nope", 2)
    with pytest.raises(ValueError):
        make_kernel("commutator", 2)
    with pytest.raises(ValueError):
        make_kernel("higher", 2, field=sqrt1p_field(2), k=0)
    with pytest.raises(ValueError):
        make_kernel("bajsanski_coifman", 2, field=sqrt1p_field(2), l=4)
    with pytest.raises(ValueError):
        make_kernel("general", 2, field=sqrt1p_field(2))
    with pytest.raises(ValueError):
        narrow = AnalyticProfile(np.cosh, np.sinh, 0.5, "cosh-narrow")
        make_kernel("general", 2, field=sqrt1p_field(2), profile=narrow)
    with pytest.raises(ValueError):
        KernelSpec(2, lambda x, y: 0, holder_delta=1.5)
    with pytest.raises(ValueError):
        kernel_from_key("bogus", 2)
    with pytest.raises(ValueError):
        field_from_key("linear:1", 2)


def test_profile_must_be_even():
    with pytest.raises(ValueError):
        AnalyticProfile(lambda t: t, lambda t: np.ones_like(t), 1.0, "odd")


def test_general_kernel_uses_profile():
    A = sqrt1p_field(2)
    K = make_kernel("general", 2, field=A, profile=cosh_profile())
    x, y = PairSampler(2, seed=11).draw(200)
    r = np.linalg.norm(x - y, axis=-1)
    expected = np.cosh((A(x) - A(y)) / r) / r ** 2
    assert np.allclose(K(x, y), expected, rtol=1e-10)


@pytest.mark.parametrize("key", ZOO_KEYS)
def test_real_kernels_are_real(key):
    K = kernel_from_key(key, 2)
    x, y = PairSampler(2, seed=12).draw(100)
    v = np.asarray(K(x, y))
    if key.startswith("muckenhoupt"):
        assert np.any(np.abs(np.imag(v)) > 0)
    else:
        assert np.all(np.imag(v) == 0)


def test_field_spot_check():
    assert sqrt1p_field(2).spot_check() <= sqrt1p_field(2).grad_bound * (1 + 1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 20.0), st.integers(0, 1000))
def test_power_kernel_homogeneity(s, seed):
    K = make_kernel("power", 3)
    x, y = PairSampler(3, seed=seed).draw(50)
    assert np.allclose(K(s * x, s * y), s ** -3 * K(x, y), rtol=1e-12)
