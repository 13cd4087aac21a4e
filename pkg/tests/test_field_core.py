import math

import numpy as np
import pytest
from scipy import integrate

from fraclap_kit.field_core import (
    CoefficientSet,
    ScalarField,
    TailProfile,
    constant_field,
    check_order,
    l2s_weight_integral,
    make_polar_rule,
    norm_nd,
    sphere_rule,
)
from fraclap_kit.fields import smooth_bump


def test_annulus_area():
    rule = make_polar_rule(2, 8, 15, 0.5, 1.0)
    assert rule.integrate(lambda p: np.ones(len(p))) == pytest.approx(math.pi * 0.75, abs=1e-10)


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_odd_integrand_vanishes(dim):
    rule = make_polar_rule(dim, 8, 9, 0.2, 1.5)
    assert abs(rule.integrate(lambda p: p[:, 0])) < 1e-10


def test_power_singular_shell_matches_radial_formula():
    # 2 pi * int_{0.1}^1 r^-0.5 dr
    exact = 2 * math.pi * (2 - 2 * math.sqrt(0.1))
    rule = make_polar_rule(2, 40, 3, 0.1, 1.0)
    assert rule.integrate(lambda p: norm_nd(p) ** -1.5) == pytest.approx(exact, rel=1e-10)


@pytest.mark.parametrize("kw", [dict(rho=0.0, R=1.0), dict(rho=1.0, R=0.5)])
def test_polar_rule_rejects_bad_radii(kw):
    with pytest.raises(ValueError):
        make_polar_rule(2, 8, 7, **kw)


@pytest.mark.parametrize("dim,order", [(2, 15), (3, 11)])
def test_sphere_rule_total_area(dim, order):
    d, w = sphere_rule(dim, order)
    assert np.allclose(norm_nd(d), 1.0)
    assert w.sum() == pytest.approx(2 * math.pi if dim == 2 else 4 * math.pi, rel=1e-12)


def test_weight_integral_zero_field():
    assert l2s_weight_integral(constant_field(0.0, 2), 0.5) == 0.0


def test_weight_integral_constant_line():
    # int dy / (1 + y^2) = pi
    assert l2s_weight_integral(constant_field(1.0, 1), 0.5) == pytest.approx(math.pi, abs=1e-6)


def test_weight_integral_small_bump_matches_mass():
    u = smooth_bump(2, radius=0.1)
    # reference mass by 1-D radial quadrature of the bump profile
    prof = lambda r: math.exp(1 - 1 / (1 - (r / 0.1) ** 2)) if r < 0.1 else 0.0
    mass = 2 * math.pi * integrate.quad(lambda r: prof(r) * r, 0, 0.1, epsabs=1e-14)[0]
    assert l2s_weight_integral(u, 0.5) == pytest.approx(mass, rel=0.05)


def test_weight_integral_rejects_growing_tail():
    u = ScalarField(lambda p: norm_nd(p) ** 2, 2, TailProfile.algebraic(1.0, -2.0))
    with pytest.raises(ValueError, match="diverges"):
        l2s_weight_integral(u, 0.5)


def test_weight_integral_monotone_in_field():
    small = smooth_bump(2, radius=0.5, amplitude=1.0)
    big = smooth_bump(2, radius=0.5, amplitude=2.0)
    assert l2s_weight_integral(big, 0.3) >= l2s_weight_integral(small, 0.3)


@pytest.mark.parametrize("s", [0.0, 1.0, -0.2, float("nan")])
def test_order_out_of_range(s):
    with pytest.raises(ValueError):
        check_order(s)


def test_drift_needs_order_above_half():
    with pytest.raises(ValueError):
        check_order(0.4, drift=True)
    assert check_order(0.6, drift=True) == 0.6


def test_field_arithmetic_and_translation():
    u = smooth_bump(2, radius=1.0)
    v = (2.0 * u + constant_field(1.0, 2)) - u
    p = np.array([[0.2, -0.1], [0.5, 0.5]])
    assert np.allclose(v(p), u(p) + 1.0)
    w = u.translated([0.3, 0.0])
    assert np.allclose(w(p + [0.3, 0.0]), u(p))


def test_field_is_deterministic():
    u = smooth_bump(3, center=[0.1, 0.0, 0.0])
    p = np.array([0.3, 0.2, 0.1])
    assert u(p) == u(p)


def test_affine_coefficients_validate():
    co = CoefficientSet.affine(0.3 * np.array([[0.0, 1.0], [-1.0, 0.0]]), bound_M=1.0)
    pts = np.random.default_rng(0).uniform(-1, 1, size=(50, 2))
    co.validate(pts)
    assert np.allclose(co.div_b(pts), 0.0)
    tight = CoefficientSet.affine(np.eye(2), bound_M=0.1)
    with pytest.raises(ValueError, match="dominate"):
        tight.validate(pts)


def test_tail_admission():
    assert TailProfile.compact(1.0).admits(0.9)
    assert TailProfile.algebraic(1.0, 0.5).admits(0.01)
    # growth like |y|^0.5 needs 2s > 0.5
    assert TailProfile.algebraic(1.0, -0.5).admits(0.3)
    assert not TailProfile.algebraic(1.0, -0.5).admits(0.2)
