import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from singlab.sphere_fn import (SphereFunction, admissibility_report, build_quadrature, c_omega, compute_norms,
                               moment, multi_indices, sample_omega, sphere_area, zero_omega)

LOG3 = math.log(3.0)


def test_circle_rule_is_equal_weight():
    q = build_quadrature(2, 360)
    assert q.nodes.shape == (360, 2)
    assert np.allclose(q.weights, 2 * math.pi / 360, rtol=0, atol=1e-15)
    assert abs(q.weights.sum() - 2 * math.pi) < 1e-12


def test_circle_rule_integrates_cos_squared():
    q = build_quadrature(2, 360)
    assert abs(np.sum(q.weights * q.nodes[:, 0] ** 2) - math.pi) < 1e-6


def test_sphere_rule_total_area():
    q = build_quadrature(3, 4096)
    assert abs(q.weights.sum() - 4 * math.pi) < 1e-3
    assert np.allclose(np.linalg.norm(q.nodes, axis=1), 1.0, atol=1e-12)


@pytest.mark.parametrize("d,expected", [(2, 2 * math.pi), (3, 4 * math.pi)])
def test_sphere_area(d, expected):
    assert sphere_area(d) == pytest.approx(expected, rel=1e-15)


def test_constant_norms():
    n = compute_norms(sample_omega("const1"), build_quadrature(2, 1024))
    assert n.l1 == pytest.approx(2 * math.pi, abs=1e-12)
    assert n.llogl == pytest.approx(2 * math.pi * LOG3, abs=1e-12)
    assert n.c_omega == pytest.approx(2 * math.pi * (1 + LOG3), abs=1e-12)
    assert n.c_omega == pytest.approx(13.186, abs=1e-3)


def test_cosine_l1():
    n = compute_norms(sample_omega("theta1"), build_quadrature(2, 4096))
    assert n.l1 == pytest.approx(4.0, abs=1e-5)


def test_logspike_llogl_converges():
    om = sample_omega("logspike")
    a = compute_norms(om, build_quadrature(2, 4096)).llogl
    b = compute_norms(om, build_quadrature(2, 16384)).llogl
    assert math.isfinite(a) and math.isfinite(b)
    assert abs(a - b) / abs(b) < 0.01


def test_logspike_value_at_zero_angle():
    om = sample_omega("logspike")
    assert om(np.array([[1.0, 0.0]]))[0] == 0.0


def test_lq_norms_dominate_l1_on_the_circle():
    q = build_quadrature(2, 2048)
    n = compute_norms(sample_omega("theta1"), q, (2.0, 4.0))
    # Hoelder on a measure 2 pi space
    assert n.lq[2.0] >= n.l1 / (2 * math.pi) ** 0.5 - 1e-12
    assert n.lq[2.0] == pytest.approx(math.sqrt(math.pi), rel=1e-10)


def test_zero_omega_norms():
    n = compute_norms(zero_omega(2), build_quadrature(2, 256))
    assert n.l1 == 0 and n.llogl == 0


def test_moments_of_sample_functions():
    q = build_quadrature(2, 1024)
    assert abs(moment(sample_omega("theta1"), q, (0, 0))) < 1e-10
    assert moment(sample_omega("theta1"), q, (1, 0)) == pytest.approx(math.pi, abs=1e-6)
    for alpha in ((1, 0), (0, 1)):
        assert abs(moment(sample_omega("theta1theta2"), q, alpha)) < 1e-10


def test_admissibility_reports():
    q = build_quadrature(2, 1024)
    r = admissibility_report(sample_omega("const1"), q, 0)
    assert not r.passed and r.moments[0][1] == pytest.approx(2 * math.pi)
    assert admissibility_report(sample_omega("theta1"), q, 0).passed
    r = admissibility_report(sample_omega("theta1theta2"), q, 1)
    assert r.passed and len(r.moments) == 2
    with pytest.raises(ValueError):
        admissibility_report(sample_omega("theta1"), q, -1)


def test_multi_indices_count():
    # compositions of k into d parts
    assert len(list(multi_indices(3, 2))) == 6
    assert all(sum(a) == 2 for a in multi_indices(3, 2))


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(["const1", "theta1", "theta1theta2", "logspike"]),
       st.floats(0.01, 100.0))
def test_samples_are_degree_zero_homogeneous(key, scale):
    om = sample_omega(key)
    x = np.random.default_rng(0).standard_normal((40, 2))
    assert np.allclose(om(scale * x), om(x), rtol=1e-12, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(["const1", "theta1", "theta1theta2", "logspike"]), st.floats(0.1, 10.0))
def test_norm_ordering_and_scaling(key, a):
    q = build_quadrature(2, 512)
    om = sample_omega(key)
    n = compute_norms(om, q)
    assert n.llogl >= n.l1 * math.log(2) - 1e-12
    assert n.c_omega >= n.llogl
    assert c_omega(om, q) == pytest.approx(n.c_omega)
    scaled = compute_norms(SphereFunction(2, lambda x: a * om(x)), q)
    assert scaled.l1 == pytest.approx(a * n.l1, rel=1e-12)
