import math

import numpy as np
import pytest

from fraclap_kit.field_core import CoefficientSet, ScalarField, TailProfile, constant_field, norm_nd
from fraclap_kit.fields import bubble, gaussian
from fraclap_kit.fraclap_op import OperatorSpec
from fraclap_kit.mollify import MollifierKernel
from fraclap_kit.potentials import fundamental_solution
from fraclap_kit.principles import (
    bocher_battery,
    compute_principle_constants,
    counterexample_suite_n1,
    max_principle_battery,
    recover_singular_coefficient,
    rotation_coeffs,
    verify_max_principle,
)

# kernel masses for n = 2, from 50-digit mpmath quadrature of the defining radial integrals
REFERENCE_MASSES = {
    0.25: (3.8355152732505315, 0.20488565573897138),
    0.5: (9.0, 0.45714285714285713),
    0.75: (14.33966392458375, 0.57508650389340898),
}


@pytest.mark.parametrize("s", sorted(REFERENCE_MASSES))
def test_kernel_masses_match_reference(s):
    c = compute_principle_constants(2, s, 0.0)
    m1, m2 = REFERENCE_MASSES[s]
    assert c.M1 == pytest.approx(m1, rel=1e-8)
    assert c.M2 == pytest.approx(m2, rel=1e-8)


def test_alpha_without_lower_order_terms():
    c = compute_principle_constants(2, 0.75, 0.0)
    assert c.alpha == pytest.approx(c.M2 / (2 * (c.M1 + c.M2)), rel=1e-14)
    assert c.sigma_moll == 1.0 and c.M3 == 0.0


@pytest.mark.parametrize("dim", [2, 3])
@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_alpha_in_unit_interval_and_decreasing_in_bound(dim, s):
    a0 = compute_principle_constants(dim, s, 0.0).alpha
    a1 = compute_principle_constants(dim, s, 1.0).alpha
    assert 0 < a1 < a0 < 1


def test_alpha_continuous_as_bound_vanishes():
    c0 = compute_principle_constants(2, 0.5, 0.0).alpha
    assert compute_principle_constants(2, 0.5, 1e-9).alpha == pytest.approx(c0, rel=1e-6)


def test_constants_validation():
    with pytest.raises(ValueError):
        compute_principle_constants(2, 0.5, -1.0)
    with pytest.raises(ValueError):
        compute_principle_constants(2, 0.5, 1.0, k=MollifierKernel(0.1, 3))


def test_constant_field_passes_with_room():
    m = 1.0
    rep = verify_max_principle(constant_field(m, 2), rotation_coeffs(2), 0.75, m, False)
    assert rep.passed
    assert rep.grid_min - rep.alpha * m == pytest.approx((1 - rep.alpha) * m)


@pytest.mark.parametrize("lam", [1.0, 3.0])
def test_fractional_battery_passes_and_scales(lam):
    results = {}
    for name, u, punctured in max_principle_battery(2, 0.75, m=lam):
        rep = verify_max_principle(u, rotation_coeffs(2), 0.75, lam, punctured)
        assert rep.passed, (name, rep.to_dict())
        results[name] = rep.grid_min
    # nonlocality lets the dipped field fall below m inside the ball
    assert results["nonlocal-dip"] < lam
    assert results["nonlocal-dip"] == pytest.approx(lam * (1 - 0.02), rel=1e-9)


def test_classical_floor_without_lower_order_terms():
    for name, u, punctured in max_principle_battery(2, None, m=1.0):
        rep = verify_max_principle(u, None, None, 1.0, punctured)
        assert rep.passed and rep.alpha == 1.0
        assert rep.grid_min >= 1.0 - 1e-3


def test_failed_hypothesis_is_inconclusive():
    # a Gaussian is not >= m on the outer annulus
    rep = verify_max_principle(gaussian(2, width=0.5), None, 0.75, 1.0, False)
    assert rep.verdict == "inconclusive"
    assert not rep.checks[0]["passed"]


def test_subsolution_is_inconclusive():
    # satisfies the floor but is not a supersolution
    u = ScalarField(lambda p: 1.0 + np.sum(p**2, axis=-1), 2, TailProfile.algebraic(2.0, -2.0))
    rep = verify_max_principle(u, None, None, 1.0, False)
    assert rep.verdict == "inconclusive"


def test_drift_requires_order_above_half():
    with pytest.raises(ValueError):
        verify_max_principle(constant_field(1.0, 2), rotation_coeffs(2), 0.4, 1.0, False)


def test_atom_weight_of_synthetic_field():
    spec = OperatorSpec("fractional", 2, 0.75)
    u = fundamental_solution(2, "fractional", 0.75) * 2.0 + 1.0
    dec = recover_singular_coefficient(u, spec, annuli=())
    assert dec.a_hat == pytest.approx(2.0, rel=0.05)


def test_atom_weight_of_smooth_field():
    spec = OperatorSpec("fractional", 2, 0.75)
    dec = recover_singular_coefficient(gaussian(2, width=0.5), spec, annuli=())
    assert abs(dec.a_hat) < 5e-2
    assert np.all(np.abs(dec.d_hat) < 5e-2)


def test_atom_weight_is_linear():
    spec = OperatorSpec("classical", 3)
    phi = fundamental_solution(3, "classical")
    u1 = phi * 0.5 + 1.0
    u2 = phi * 2.0 + gaussian(3, width=0.6)
    a1 = recover_singular_coefficient(u1, spec, annuli=()).a_hat
    a2 = recover_singular_coefficient(u2, spec, annuli=()).a_hat
    a12 = recover_singular_coefficient(u1 + u2, spec, annuli=()).a_hat
    assert a12 == pytest.approx(a1 + a2, abs=1e-6)


def test_stronger_singularity_rejected():
    spec = OperatorSpec("fractional", 2, 0.75)
    u = ScalarField(
        lambda p: norm_nd(p) ** -1.2, 2, TailProfile.algebraic(1.0, 1.2), singular_points=[np.zeros(2)]
    )
    with pytest.raises(ValueError, match="stronger"):
        recover_singular_coefficient(u, spec, annuli=())


def test_delta_sequence_must_decrease():
    spec = OperatorSpec("fractional", 2, 0.75)
    with pytest.raises(ValueError):
        recover_singular_coefficient(constant_field(1.0, 2), spec, deltas=(0.05, 0.1))


def test_absolute_value_in_one_dimension_has_negative_atom():
    dec = recover_singular_coefficient(
        ScalarField(lambda p: np.abs(p[..., 0]), 1, TailProfile.algebraic(1.0, -1.0), singular_points=[[0.0]]),
        OperatorSpec("classical", 1),
        annuli=(),
    )
    assert dec.a_hat == pytest.approx(-2.0, abs=1e-3)


def test_classical_bocher_battery():
    spec = OperatorSpec("classical", 3)
    for name, u, a in bocher_battery(spec):
        dec = recover_singular_coefficient(u, spec, annuli=((0.25, 0.5),))
        if a > 0:
            assert dec.a_hat == pytest.approx(a, rel=0.05), name
        assert dec.a_hat >= -5e-2
        assert np.all(np.abs(dec.d_hat) <= 5e-2)
        assert all(m["mass"] >= -m["tol"] for m in dec.annulus_masses), name


def test_bubble_annulus_mass_is_positive():
    spec = OperatorSpec("fractional", 2, 0.75)
    dec = recover_singular_coefficient(bubble(2, 0.75), spec, annuli=((0.25, 0.5),))
    assert dec.annulus_masses[0]["mass"] > 0


def test_counterexamples_in_one_dimension():
    rep = counterexample_suite_n1()
    assert rep["passed"], rep["checks"]
    assert rep["abs_a_hat"] == pytest.approx(-2.0, abs=1e-3)
    assert abs(rep["step_d_hat"]) == pytest.approx(1.0, abs=1e-2)
    for row in rep["pairings"]["abs"] + rep["pairings"]["step"]:
        assert row["error"] <= 1e-6
    by_k = {m["k"]: m["mass"] for m in rep["masses"]}
    assert by_k[8] / by_k[4] > 2


def test_classical_battery_rejects_line():
    with pytest.raises(ValueError):
        max_principle_battery(1, None)
