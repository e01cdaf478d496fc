import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from singlab.grid import GridFunction, GridSpec, lebesgue_norm
from singlab.microlocal import (AdmissibilityParams, DirectionNet, MultiplierSymbol,
                                admissible_parameters, apply_multiplier, direction_net,
                                directional_symbol, find_admissible, lp_reconstruction, lp_symbols,
                                mihlin_estimate, net_separation, one_symbol, overlap_count,
                                partition_of_unity, riesz_symbol, symbol_from_key)


@pytest.fixture(scope="module")
def net2():
    return direction_net(8, 0.25, 2)


def test_circle_packing_count(net2):
    s = net_separation(8, 0.25)
    assert s == 2.0 ** -6
    packing = math.floor(2 * math.pi / (2 * math.asin(s / 2)))
    assert abs(len(net2) - packing) <= 1
    assert abs(len(net2) - 402) <= 1


@pytest.mark.parametrize("n,gamma,d", [(8, 0.25, 2), (16, 0.25, 2), (8, 0.25, 3), (12, 0.125, 3)])
def test_net_is_separated_and_covering(n, gamma, d):
    net = direction_net(n, gamma, d)
    assert net.min_distance() >= net.separation
    assert np.allclose(np.linalg.norm(net.vectors, axis=1), 1.0, atol=1e-12)
    probe = np.random.default_rng(0).standard_normal((2000, d))
    probe /= np.linalg.norm(probe, axis=1, keepdims=True)
    # maximality: every direction lies within s (plus quadrature granularity) of the net
    assert net.covering_radius(probe) <= net.separation + net.granularity


def test_net_json_round_trip(net2):
    back = DirectionNet.from_json(net2.to_json())
    assert np.array_equal(back.vectors, net2.vectors)
    assert (back.n, back.gamma, back.separation) == (net2.n, net2.gamma, net2.separation)


def test_net_is_deterministic():
    a = direction_net(8, 0.25, 3)
    b = direction_net(8, 0.25, 3)
    assert np.array_equal(a.vectors, b.vectors)


def test_net_arguments():
    with pytest.raises(ValueError):
        direction_net(1, 0.25, 2)
    with pytest.raises(ValueError):
        direction_net(8, 1.5, 2)
    with pytest.raises(ValueError):
        direction_net(8, 0.25, 4)


def test_partition_identity_and_homogeneity(net2):
    pou = partition_of_unity(net2)
    xi = np.random.default_rng(1).standard_normal((1000, 2))
    assert np.max(np.abs(pou.total(xi) - 1)) <= 1e-10
    g = pou.symbol(17)
    xi = xi[:100]
    assert np.allclose(g(2 * xi), g(xi), rtol=0, atol=1e-14)


def test_single_term_partition():
    net = DirectionNet(8, 0.25, 2, np.array([[1.0, 0.0], [0.0, 1.0]]), net_separation(8, 0.25))
    pou = partition_of_unity(net)
    assert pou.symbol(0)(np.array([[3.0, 0.0]]))[0] == pytest.approx(1.0, abs=1e-15)


def test_uncovered_direction_raises():
    net = DirectionNet(8, 0.25, 2, np.array([[1.0, 0.0]]), net_separation(8, 0.25))
    with pytest.raises(RuntimeError):
        partition_of_unity(net).total(np.array([[0.0, 1.0]]))


def test_directional_symbol_values():
    e = np.array([0.0, 1.0])
    m = directional_symbol(e, 16, 0.25)
    c = directional_symbol(e, 16, 0.25, complement=True)
    assert m(np.array([[2.0, 0.0]]))[0] == 1.0
    assert m(np.array([[0.0, 5.0]]))[0] == 0.0
    near = np.array([[1.0, 1e-3], [-2.0, 1e-4]])
    assert np.all(c(near) == 0.0)


def test_lp_profile_endpoints():
    k = 3
    low, band = lp_symbols(k)
    r = 2.0 ** -k
    assert band(np.array([[r, 0.0]]))[0] == pytest.approx(1.0, abs=1e-15)
    outside = np.array([[0.99 * r / 2, 0.0], [0.0, 1.01 * 2 * r], [5.0, 5.0]])
    assert np.all(band(outside) == 0)
    assert low(np.zeros((1, 2)))[0] == 1.0


@settings(max_examples=25, deadline=None)
@given(st.integers(-6, 2), st.integers(1, 6), st.floats(1e-3, 1e3))
def test_lp_telescoping(k0, span, radius):
    m = k0 + span
    total = lp_reconstruction(k0, m)
    psi0 = lp_symbols(k0)[0]
    xi = np.array([[radius, 0.0], [0.0, radius / 3]])
    assert np.allclose(total(xi), psi0(xi), atol=1e-14, rtol=0)


def test_lp_reconstruction_on_grid():
    spec = GridSpec(2, 64, 8.0)
    u = GridFunction(spec, np.random.default_rng(2).standard_normal(spec.shape))
    kmax = float(np.abs(spec.frequencies()).max()) * math.sqrt(2)
    k0 = math.floor(-math.log2(kmax)) - 1
    v = apply_multiplier(lp_reconstruction(k0, 3), u)
    assert lebesgue_norm(v - u, 2) <= 1e-10 * lebesgue_norm(u, 2)
    with pytest.raises(ValueError):
        lp_reconstruction(3, 3)


def test_identity_and_composition():
    spec = GridSpec(2, 32, 3.0)
    u = GridFunction(spec, np.random.default_rng(3).standard_normal(spec.shape))
    assert lebesgue_norm(apply_multiplier(one_symbol(), u) - u, 2) <= 1e-12 * lebesgue_norm(u, 2)
    r = riesz_symbol(1)
    sq = MultiplierSymbol(lambda xi: -(xi[..., 0] / np.linalg.norm(xi, axis=-1)) ** 2, True, "sq")
    twice = apply_multiplier(r, apply_multiplier(r, u))
    once = apply_multiplier(sq, u)
    assert lebesgue_norm(twice - once, 2) <= 1e-10 * lebesgue_norm(once, 2)


def test_mihlin_trivial_and_riesz():
    xi = np.random.default_rng(4).standard_normal((300, 2))
    one = mihlin_estimate(one_symbol(), 2, xi, 1e-3)
    assert one.A == 0.0 and one.sup_m == 1.0
    est = mihlin_estimate(riesz_symbol(1), 2, xi, 1e-3)
    assert math.isfinite(est.A) and abs(est.A_halved / est.A - 1) <= 0.10
    with pytest.raises(ValueError):
        mihlin_estimate(one_symbol(), 2, np.zeros((1, 2)), 1e-3)


def test_overlap_counts():
    u = np.random.default_rng(5).standard_normal((500, 2))
    counts = [overlap_count(direction_net(n, 0.25, 2), None, u).max_count for n in (8, 16)]
    assert max(counts) / min(counts) <= 2
    single = DirectionNet(8, 0.25, 2, np.array([[1.0, 0.0]]), net_separation(8, 0.25))
    assert overlap_count(single, None, u).max_count <= 1


def test_admissibility_trivial_tuples():
    assert admissible_parameters(AdmissibilityParams(2, 1.0, 0.0, 0.0, 0.5, 0.0, 1)) == (
        -0.5, -1.0, -1.0, -0.5, True)
    s1, s2, s3, s4, ok = admissible_parameters(AdmissibilityParams(2, 0.1, 1.0, 0.0, 0.0, 0.0, 1))
    assert (s1, s2, s3, s4, ok) == (2.0, 2.0, 3.0 - 0.1, 5.0, False)
    assert s3 == pytest.approx(2.9)


@pytest.mark.parametrize("bad", [AdmissibilityParams(2, 0.0, 0, 0, 0, 0, 1),
                                 AdmissibilityParams(2, 1.0, 0, 0, 0, 0, 0),
                                 AdmissibilityParams(2, 1.0, -1, 0, 0, 0, 1)])
def test_admissibility_domain(bad):
    with pytest.raises(ValueError):
        admissible_parameters(bad)


@pytest.mark.parametrize("d", [2, 3, 4, 5])
def test_grid_search_finds_tuple(d):
    p = find_admissible(d)
    assert p is not None and admissible_parameters(p)[-1]
    # ordering iota << gamma << eps0 << 1
    assert p.iota < p.gamma < p.eps0 < 1


def test_symbol_keys():
    assert symbol_from_key("one")(np.array([[1.0, 2.0]]))[0] == 1
    assert symbol_from_key("riesz:2")(np.array([[0.0, 2.0]]))[0] == pytest.approx(-1j)
    assert symbol_from_key("lp:0")(np.array([[1.0, 0.0]]))[0] == pytest.approx(1.0)
    assert symbol_from_key("dir:8,0.25,0")(np.zeros((1, 2)))[0] == 1.0
    with pytest.raises(ValueError):
        symbol_from_key("nope")
    with pytest.raises(ValueError):
        riesz_symbol(3, 2)
