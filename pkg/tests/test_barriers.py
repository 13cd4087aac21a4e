import math

import numpy as np
import pytest

from fraclap_kit.barriers import (
    barrier_cutoff,
    barrier_margins,
    certify_barrier_inequality,
    certify_mollified_barrier,
    decay_bound_report,
    make_barrier,
    remainder_smallness_report,
)
from fraclap_kit.field_core import CoefficientSet, norm_nd
from fraclap_kit.fields import gaussian
from fraclap_kit.mollify import MollifierKernel


def _rotation(dim, strength=0.3, M=1.0):
    A = np.zeros((dim, dim))
    A[0, 1], A[1, 0] = strength, -strength
    return CoefficientSet.affine(A, bound_M=M)


def test_power_barrier_at_eps():
    b = make_barrier("classical-n3-power", 0.1, M=0)
    assert float(b.phi_r(0.1)) == pytest.approx(b.sigma * 0.01, abs=1e-15)
    assert b.sigma == pytest.approx(1 / 3)


@pytest.mark.parametrize("eps", [0.3, 0.01])
def test_fractional_barrier_zero_level(eps):
    b = make_barrier("fractional-power", eps, dim=2, s=0.75)
    assert float(b.phi_r(eps)) == 0.0


def test_fractional_barrier_formula():
    b = make_barrier("fractional-power", 0.1, alpha=0.4, dim=2, s=0.75)
    assert float(b.phi_r(0.2)) == pytest.approx(1 - 0.5**0.4, abs=1e-15)


def test_sigma_depends_on_bound():
    b = make_barrier("classical-n2-log", 0.01, M=1.0)
    assert b.sigma == pytest.approx(1.5)


@pytest.mark.parametrize(
    "family,kw",
    [
        ("classical-n2-log", dict(alpha=1.0)),
        ("classical-n3-power", dict(alpha=1.0, dim=3)),
        ("fractional-power", dict(alpha=0.5, dim=2, s=0.75)),
        ("fractional-power", dict(alpha=-0.1, dim=2, s=0.5)),
    ],
)
def test_alpha_outside_interval_rejected(family, kw):
    with pytest.raises(ValueError, match="admissible"):
        make_barrier(family, 0.01, **kw)


def test_unknown_family_and_bad_eps():
    with pytest.raises(ValueError):
        make_barrier("cubic", 0.1)
    with pytest.raises(ValueError):
        make_barrier("classical-n2-log", 1.5)


def test_log_barrier_stays_inside_unit_ball():
    b = make_barrier("classical-n2-log", 0.01)
    with pytest.raises(ValueError):
        b.phi_r(1.0)


def test_classical_laplacian_matches_finite_differences():
    b = make_barrier("classical-n3-power", 0.01, M=1.0)
    u = b.phi()
    from fraclap_kit.fraclap_op import eval_laplacian

    for r in (0.05, 0.2, 0.6):
        x = np.array([r, 0.0, 0.0])
        assert float(b.minus_lap_phi_r(r)) == pytest.approx(eval_laplacian(u, x, h=1e-3 * r), rel=1e-6)


def test_fractional_radial_reduction_matches_power_identity():
    b = make_barrier("fractional-power", 0.01, dim=2, s=0.75)
    r = np.array([0.02, 0.1, 0.5])
    num, err = b.frac_phi_r(r)
    exact, _ = b.frac_phi_r(r, closed_form=True)
    assert np.allclose(num, exact, rtol=1e-7)
    assert np.all(err < 1e-6 * np.abs(exact))


def test_power_barrier_certified_quarter_ball():
    b = make_barrier("classical-n3-power", 0.01, alpha=0.5, M=0)
    r0, rep = certify_barrier_inequality(b, CoefficientSet.zero(3))
    assert r0 >= 0.25 and rep.passed
    pts = rep.points[norm_nd(rep.points) <= 0.25]
    margins, _ = barrier_margins(b, CoefficientSet.zero(3), pts)
    # -Delta phi + phi, sign computed from the radial formula
    r = norm_nd(pts)
    direct = -6 * (1 / 3) + 0.01**0.5 * 0.5 * (0.5 - 1) * r**-2.5 + (1 + r**2 / 3 - (0.01 / r) ** 0.5)
    assert np.allclose(margins, direct, rtol=1e-12, atol=1e-12)
    assert np.all(direct <= 0)


@pytest.mark.parametrize("family,dim", [("classical-n3-power", 3), ("classical-n2-log", 2)])
def test_classical_radius_stable_across_eps(family, dim):
    off = np.zeros(dim)
    off[0] = 1.0
    co = CoefficientSet.affine(np.zeros((dim, dim)), off, bound_M=1.0)
    radii = [certify_barrier_inequality(make_barrier(family, e, M=1.0, dim=dim), co)[0] for e in (1e-2, 1e-3)]
    assert min(radii) >= 2**-4
    assert radii[0] == radii[1]


def test_fractional_barrier_with_rotation_drift():
    b = make_barrier("fractional-power", 0.01, M=1.0, dim=2, s=0.75)
    r0, rep = certify_barrier_inequality(b, _rotation(2))
    assert r0 >= 2**-4 and rep.passed


def test_drift_needs_order_above_half():
    b = make_barrier("fractional-power", 0.01, M=1.0, dim=2, s=0.4)
    with pytest.raises(ValueError):
        certify_barrier_inequality(b, _rotation(2))


def test_coefficient_bound_must_not_exceed_barrier_bound():
    b = make_barrier("classical-n3-power", 0.01, M=0.5)
    with pytest.raises(ValueError, match="exceeds"):
        certify_barrier_inequality(b, CoefficientSet.affine(np.eye(3), bound_M=3.0))


def test_mollified_fractional_barrier_passes():
    b = make_barrier("fractional-power", 0.01, M=1.0, dim=2, s=0.75)
    co = _rotation(2)
    r0, _ = certify_barrier_inequality(b, co)
    grid = np.array([[r * math.cos(a), r * math.sin(a)] for r in (0.009, 0.011, 0.02, 0.05) for a in (0.3, 2.0)])
    rep = certify_mollified_barrier(b, co, MollifierKernel(0.0025, 2), grid=grid)
    assert rep.passed and len(rep.margins) == 8


def test_mollified_margins_approach_plain_ones():
    b = make_barrier("classical-n3-power", 0.01, M=0)
    co = CoefficientSet.zero(3)
    certify_barrier_inequality(b, co)
    grid = np.array([[r, 0.0, 0.0] for r in (0.02, 0.05, 0.1, 0.2)])
    plain, _ = barrier_margins(b, co, grid)
    gaps = [
        np.abs(certify_mollified_barrier(b, co, MollifierKernel(d, 3), grid=grid).margins - plain)
        for d in (2e-3, 1e-3)
    ]
    # margins reach -400 near eps, so compare on the margin's own scale
    assert np.all(gaps[1] <= 1e-3 * np.maximum(1.0, np.abs(plain)))
    assert np.all(gaps[1] < gaps[0])


def test_mollified_barrier_vanishes_near_origin():
    b = make_barrier("classical-n3-power", 0.01, M=0)
    co = CoefficientSet.zero(3)
    certify_barrier_inequality(b, co)
    grid = np.array([[0.005, 0.0, 0.0]])
    rep = certify_mollified_barrier(b, co, MollifierKernel(1e-3, 3), grid=grid)
    assert rep.passed and abs(rep.margins[0]) < 1e-12


def test_mollified_barrier_rejects_wide_kernel():
    b = make_barrier("fractional-power", 0.01, dim=2, s=0.75)
    with pytest.raises(ValueError):
        certify_mollified_barrier(b, CoefficientSet.zero(2), MollifierKernel(0.006, 2), r0=0.25)


def test_psi_monotone_in_eps():
    r = np.geomspace(1e-3, 0.8, 200)
    for fam, kw in [("classical-n3-power", {}), ("fractional-power", dict(dim=2, s=0.5))]:
        big = make_barrier(fam, 0.1, **kw).psi()
        small = make_barrier(fam, 0.01, **kw).psi()
        pts = np.stack([r] + [np.zeros_like(r)] * (big.dim - 1), axis=-1)
        assert np.all(small(pts) >= big(pts))


def test_psi_tends_to_limit_profile():
    r = np.geomspace(0.05, 0.8, 50)
    pts = np.stack([r, np.zeros_like(r), np.zeros_like(r)], axis=-1)
    gaps = []
    for eps in (1e-2, 1e-4, 1e-6):
        b = make_barrier("classical-n3-power", eps)
        gaps.append(float(np.max(np.abs(b.psi()(pts) - (1 + b.sigma * r**2)))))
    assert gaps[0] > gaps[1] > gaps[2] and gaps[2] < 1e-2


def test_decay_bound_on_cutoff_and_barrier():
    s = 0.75
    psi = make_barrier("fractional-power", 0.01, dim=2, s=s).psi()
    rep = decay_bound_report(barrier_cutoff(2, 0.25), psi, s, r0=0.25)
    assert rep.passed
    far = norm_nd(rep.sample_xs) >= 10
    assert np.all(rep.k2_values[far] * (1 + norm_nd(rep.sample_xs[far]) ** (2 + 2 * s)) <= rep.fitted_C)


def test_decay_first_term_vanishes_where_psi_does():
    s = 0.75
    psi = make_barrier("fractional-power", 0.1, dim=2, s=s).psi()
    rep = decay_bound_report(barrier_cutoff(2, 0.5), psi, s, sample_xs=[[0.05, 0.0]], r0=0.5)
    assert rep.k1_values[0] == 0.0


def test_remainder_smallness_two_scales():
    rep = remainder_smallness_report(gaussian(2, width=0.7), 0.75)
    assert rep["passed"]
