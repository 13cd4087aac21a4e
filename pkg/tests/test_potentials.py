import math

import numpy as np
import pytest

from fraclap_kit.field_core import ScalarField, TailProfile, constant_field, norm_nd
from fraclap_kit.fields import gaussian
from fraclap_kit.fraclap_op import eval_fraclap
from fraclap_kit.potentials import (
    AveragedKernel,
    MeasureApprox,
    PoissonKernel,
    averaged_kernel_extend,
    delta_ball_average,
    fundamental_solution,
    poisson_extend,
    riesz_potential,
)


def test_newtonian_kernel_at_unit_distance():
    assert float(fundamental_solution(3, "classical")([1.0, 0.0, 0.0])) == pytest.approx(1 / (4 * math.pi), abs=1e-12)


def test_logarithmic_kernel_vanishes_on_unit_circle():
    assert float(fundamental_solution(2, "classical")([0.6, 0.8])) == pytest.approx(0.0, abs=1e-15)


def test_fractional_kernel_homogeneity():
    phi = fundamental_solution(2, "fractional", 0.75)
    assert float(phi([2.0, 0.0]) / phi([1.0, 0.0])) == pytest.approx(2**-0.5, abs=1e-12)


def test_fractional_kernel_needs_n_above_2s():
    with pytest.raises(ValueError):
        fundamental_solution(1, "fractional", 0.5)
    with pytest.raises(ValueError):
        fundamental_solution(1, "fractional", 0.7)


def test_single_atom_reduces_to_kernel():
    m = MeasureApprox(2, atoms=[([0.0, 0.0], 1.0)])
    phi = fundamental_solution(2, "fractional", 0.6)
    x = np.array([0.3, -0.4])
    assert riesz_potential(m, 0.6, x) == float(phi(x))


def test_antisymmetric_atoms_cancel_on_bisector():
    m = MeasureApprox(2, atoms=[([0.5, 0.0], 1.0), ([-0.5, 0.0], -1.0)])
    assert abs(riesz_potential(m, 0.75, [0.0, 0.7])) < 1e-12


def test_potential_rejects_pole():
    m = MeasureApprox(2, atoms=[([0.5, 0.0], 1.0)])
    with pytest.raises(ValueError, match="pole"):
        riesz_potential(m, 0.75, [0.5, 0.0])


def _uniform_ball(r=0.1):
    vol = 4 / 3 * math.pi * r**3
    return ScalarField(
        lambda p: (norm_nd(p) < r) / vol, 3, TailProfile.compact(r), kinks=[(np.zeros(3), r)]
    )


def test_radial_density_acts_as_point_mass_outside():
    m = MeasureApprox(3, density=_uniform_ball())
    assert riesz_potential(m, None, [1.0, 0.0, 0.0]) == pytest.approx(1 / (4 * math.pi), abs=1e-8)


def test_uniform_ball_potential_inside():
    m = MeasureApprox(3, density=_uniform_ball())
    # (3 R^2 - r^2) / (2 R^3) / (4 pi) for unit mass
    exact = (3 * 0.01 - 0.0025) / (2 * 0.001) / (4 * math.pi)
    assert riesz_potential(m, None, [0.05, 0.0, 0.0]) == pytest.approx(exact, rel=1e-6)


def test_ball_average_of_constant():
    assert delta_ball_average(constant_field(1.0, 2), 0.1, 2.0) == pytest.approx(math.pi, abs=1e-8)


def test_ball_average_of_kernel_is_scale_free():
    phi = fundamental_solution(2, "fractional", 0.75)
    a = delta_ball_average(phi, 0.05, 1.5)
    b = delta_ball_average(phi, 0.025, 1.5)
    assert a > 0
    assert a == pytest.approx(b, rel=1e-6)


def test_ball_average_of_bounded_field_vanishes():
    s = 0.75
    g = gaussian(2, width=0.5)
    ratio = delta_ball_average(g, 0.01, 2 * s) / delta_ball_average(g, 0.1, 2 * s)
    # the Gaussian peaks at the origin: sup on the small ball over inf on the big one
    spread = float(g([0.0, 0.0]) / g([0.1, 0.0]))
    assert ratio <= spread * 0.1 ** (2 - 2 * s) + 1e-6


def test_ball_average_rejects_nonintegrable():
    u = ScalarField(lambda p: norm_nd(p) ** -2.5, 2, TailProfile.compact(5.0), singular_points=[np.zeros(2)])
    with pytest.raises(ValueError):
        delta_ball_average(u, 0.1, 2.0)


@pytest.mark.parametrize("x", [[0.0, 0.0], [0.3, 0.2], [-0.5, 0.6]])
def test_poisson_kernel_has_unit_mass(x):
    assert poisson_extend(constant_field(1.0, 2), PoissonKernel(1.0, 0.75, 2), x) == pytest.approx(1.0, abs=1e-4)


def test_poisson_reproduces_shifted_kernel():
    s = 0.75
    data = fundamental_solution(2, "fractional", s).translated([2.5, 0.3])
    k = PoissonKernel(1.0, s, 2)
    for x in ([0.0, 0.0], [0.4, -0.3]):
        assert poisson_extend(data, k, x) == pytest.approx(float(data(x)), abs=1e-3)


def test_poisson_extension_concentrates_at_boundary():
    k = PoissonKernel(1.0, 0.75, 2)
    data = gaussian(2, center=[1.5, 0.0], width=0.4)
    near = poisson_extend(data, k, [0.99, 0.0])
    assert near == pytest.approx(float(data([1.0, 0.0])), abs=5e-2)


def test_poisson_rejects_outside_point():
    with pytest.raises(ValueError):
        poisson_extend(constant_field(1.0, 2), PoissonKernel(1.0, 0.5, 2), [1.0, 0.0])


def test_averaged_kernel_has_unit_mass():
    g = AveragedKernel(1.0, 0.2, 0.75, 2)
    assert averaged_kernel_extend(constant_field(1.0, 2), g, [0.3, 0.1]) == pytest.approx(1.0, abs=1e-4)


def test_averaged_kernel_agrees_with_single_radius_extension():
    s = 0.75
    data = fundamental_solution(2, "fractional", s).translated([2.5, 0.3])
    x = [0.3, 0.1]
    avg = averaged_kernel_extend(data, AveragedKernel(1.0, 0.2, s, 2), x)
    single = poisson_extend(data, PoissonKernel(0.9, s, 2), x)
    assert avg == pytest.approx(single, abs=1e-3)


def test_averaged_kernel_decays_like_the_operator_tail():
    g = AveragedKernel(1.0, 0.2, 0.75, 2)
    ys = np.array([[r, 0.2 * r] for r in np.logspace(np.log10(0.81), 3, 30)])
    vals = g([0.3, 0.1], ys)
    assert np.all(vals >= 0)
    assert np.max(vals * (1 + norm_nd(ys) ** 3.5)) < 10.0


def test_averaged_kernel_validation():
    with pytest.raises(ValueError):
        AveragedKernel(1.0, 1.5, 0.5, 2)
