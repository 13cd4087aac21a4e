import math

import numpy as np
import pytest
from scipy import integrate, special

from fraclap_kit.field_core import CoefficientSet, ScalarField, TailProfile, constant_field, norm_nd
from fraclap_kit.fields import gaussian, smooth_bump
from fraclap_kit.fraclap_op import (
    OperatorSpec,
    eval_fraclap,
    eval_full_operator,
    eval_laplacian,
    frac_constant,
    spectral_oracle,
)
from fraclap_kit.potentials import fundamental_solution


def test_normalization_constant_closed_form():
    # 4^s Gamma(n/2 + s) / (pi^(n/2) |Gamma(-s)|), evaluated independently
    for n, s in [(1, 0.5), (2, 0.75), (3, 0.3)]:
        ref = 4**s * special.gamma(n / 2 + s) / (math.pi ** (n / 2) * abs(special.gamma(-s)))
        assert frac_constant(n, s) == pytest.approx(ref, rel=1e-14)
    # n = 1, s = 1/2 gives 1/pi
    assert frac_constant(1, 0.5) == pytest.approx(1 / math.pi, rel=1e-14)


@pytest.mark.parametrize("dim,s", [(1, 0.3), (2, 0.5), (3, 0.8)])
def test_constants_are_annihilated(dim, s):
    val, _ = eval_fraclap(constant_field(2.5, dim), np.full(dim, 0.2), s)
    assert abs(val) < 1e-6


@pytest.mark.parametrize("s", [0.4, 0.75])
@pytest.mark.parametrize("x", [[0.5, 0.0], [0.0, -1.2], [1.3, 1.3]])
def test_fundamental_solution_is_harmonic_off_pole(s, x):
    val, _ = eval_fraclap(fundamental_solution(2, "fractional", s), x, s)
    assert abs(val) < 1e-3


def test_gaussian_matches_one_dimensional_hankel_formula():
    # (-Delta)^s exp(-|x|^2) in n = 1 at 0: (1/pi) int |xi|^(2s) sqrt(pi) exp(-xi^2/4) dxi / 2
    s = 0.5
    g = ScalarField(lambda p: np.exp(-np.sum(p**2, -1)), 1, TailProfile.algebraic(1.0, 50.0), scale=0.7)
    ref = integrate.quad(lambda k: k ** (2 * s) * math.sqrt(math.pi) * math.exp(-k * k / 4), 0, np.inf)[0] / math.pi
    val, err = eval_fraclap(g, [0.0], s)
    assert val == pytest.approx(ref, rel=1e-6)
    assert err < 1e-5


def test_evaluation_is_deterministic():
    u = smooth_bump(2, radius=0.8)
    assert eval_fraclap(u, [0.3, 0.1], 0.6) == eval_fraclap(u, [0.3, 0.1], 0.6)


def test_rejects_divergent_tail():
    u = ScalarField(lambda p: norm_nd(p), 2, TailProfile.algebraic(1.0, -1.0))
    with pytest.raises(ValueError):
        eval_fraclap(u, [0.0, 0.0], 0.3)


def test_laplacian_of_quadratic():
    u = ScalarField(lambda p: np.sum(p**2, -1), 2, TailProfile.algebraic(1.0, -2.0))
    assert eval_laplacian(u, [0.3, -0.2]) == pytest.approx(-4.0, abs=1e-8)


def test_laplacian_of_log_is_zero():
    u = ScalarField(lambda p: np.log(norm_nd(p)), 2, TailProfile.algebraic(1.0, -0.1), singular_points=[[0, 0]])
    assert abs(eval_laplacian(u, [0.3, 0.4])) < 1e-6


def test_laplacian_of_newtonian_kernel_is_zero():
    u = fundamental_solution(3, "classical")
    assert abs(eval_laplacian(u, [0.7, 0.0, 0.0])) < 1e-6


def test_laplacian_rejects_step_over_singularity():
    u = fundamental_solution(3, "classical")
    with pytest.raises(ValueError):
        eval_laplacian(u, [0.01, 0.0, 0.0], h=0.05)


def test_full_operator_reduces_without_coefficients():
    u = smooth_bump(2, radius=0.9)
    spec = OperatorSpec("fractional", 2, 0.75, CoefficientSet.zero(2))
    assert eval_full_operator(u, spec, [0.2, 0.1]) == eval_fraclap(u, [0.2, 0.1], 0.75)[0]


def test_full_operator_zero_order_term():
    co = CoefficientSet.affine(np.zeros((2, 2)), c=3.0, bound_M=3.0)
    spec = OperatorSpec("fractional", 2, 0.5, co)
    assert eval_full_operator(constant_field(1.0, 2), spec, [0.1, 0.1]) == pytest.approx(3.0, abs=1e-8)


def test_full_operator_with_constant_drift_matches_spectral():
    s = 0.75
    u = smooth_bump(2, radius=1.0)
    co = CoefficientSet.affine(np.zeros((2, 2)), offset=[1.0, 0.0], bound_M=1.0)
    spec = OperatorSpec("fractional", 2, s, co)
    x = np.array([0.3, 0.2])
    ref = spectral_oracle(u, x, s) + float(u.gradient(x[None, :])[0, 0])
    assert eval_full_operator(u, spec, x) == pytest.approx(ref, abs=2e-3)


def test_spectral_oracle_zero_field():
    assert spectral_oracle(constant_field(0.0, 2), [0.1, 0.0], 0.5, grid_points=64) == 0.0


@pytest.mark.parametrize("dim", [1, 2])
def test_spectral_oracle_agrees_with_quadrature(dim):
    u = smooth_bump(dim, radius=1.0)
    x = np.full(dim, 0.25)
    ref, _ = eval_fraclap(u, x, 0.5)
    assert spectral_oracle(u, x, 0.5, 16.0, 1024) == pytest.approx(ref, rel=1e-3)


def test_order_near_one_approaches_laplacian():
    u = gaussian(2, width=0.5)
    x = [0.1, 0.05]
    near, _ = eval_fraclap(u, x, 0.99)
    assert near == pytest.approx(eval_laplacian(u, x), rel=0.05)


def test_operator_spec_validation():
    with pytest.raises(ValueError):
        OperatorSpec("fractional", 2, 1.2)
    with pytest.raises(ValueError):
        OperatorSpec("weird", 2)


def test_spectral_oracle_flags_coarse_grid():
    from fraclap_kit.fraclap_op import UnreliableOracleWarning

    with pytest.warns(UnreliableOracleWarning):
        spectral_oracle(smooth_bump(1, radius=1.0), [0.2], 0.5, 2.5, 32)
