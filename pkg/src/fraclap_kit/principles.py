"""Drivers for the maximum principles and the singular decomposition of supersolutions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.optimize import brentq

from .distrib import (
    RadialPlateau,
    annulus_battery,
    check_distributional_inequality,
    make_battery,
    pair_adjoint,
)
from .field_core import (
    CoefficientSet,
    ScalarField,
    TailProfile,
    check_dimension,
    check_order,
    constant_field,
    norm_nd,
    sphere_area,
    sphere_rule,
)
from .fields import bubble, radial_cutoff, smooth_bump
from .fraclap_op import EvalBudget, OperatorSpec, frac_constant
from .mollify import MollifierKernel, _bump
from .potentials import delta_ball_average, fundamental_solution

DEFAULT_DELTAS = (0.1, 0.05, 0.025, 0.0125)
DEFAULT_ANNULI = ((0.25, 0.5), (0.125, 0.25), (0.0625, 0.125))


# ------------------------------------------------------------- constants


@dataclass(frozen=True)
class PrincipleConstants:
    """Explicit lower-bound constant alpha and the integrals it is built from."""

    M1: float
    M2: float
    sigma_moll: float
    M3: float
    alpha: float
    m: float
    M: float
    dim: int
    s: float

    def to_dict(self) -> dict:
        return {
            "n": self.dim,
            "s": self.s,
            "M": self.M,
            "m": self.m,
            "M1": self.M1,
            "M2": self.M2,
            "sigma_moll": self.sigma_moll,
            "M3": self.M3,
            "alpha": self.alpha,
        }


def _grad_bump_mass(n: int, sigma: float) -> float:
    """Integral of |grad j| over sigma < |y| < 1 for the normalized mollifier j."""
    Z = MollifierKernel(1.0, n).normalization

    def f(r):
        if r >= 1.0:
            return 0.0
        return float(_bump(r)) * 2.0 * r / (1.0 - r * r) ** 2 * r ** (n - 1)

    val, _ = integrate.quad(f, sigma, 1.0, epsabs=1e-15, epsrel=1e-12, limit=200)
    return sphere_area(n) * val / Z


def compute_principle_constants(
    dim: int, s: float, M: float, k: MollifierKernel | None = None, m: float = 1.0
) -> PrincipleConstants:
    """alpha = M2 / (2 (M1 + M2 + 2M + M M3)).

    M1 bounds the kernel mass seen from B_{5/8} outside B_{7/8}, M2 is the
    kernel mass of the shell 5/8 < |y| < 7/8, sigma_moll cuts the mollifier
    where its gradient mass beyond sigma drops to M2 / (2M), and M3 is the
    sup of |grad j| / j on B_sigma.  For M = 0, sigma_moll = 1 and M3 = 0.
    """
    n = check_dimension(dim)
    s = check_order(s)
    if not M >= 0:
        raise ValueError("M must be nonnegative")
    if not m > 0:
        raise ValueError("m must be positive")
    if k is not None and k.dim != n:
        raise ValueError("mollifier dimension does not match")
    C = frac_constant(n, s)
    area = sphere_area(n)
    # substitute t = r - 5/8 on (1/4, inf)
    m1, _ = integrate.quad(
        lambda t: (t + 0.625) ** (n - 1) * t ** (-n - 2 * s), 0.25, np.inf, epsabs=0.0, epsrel=1e-12, limit=200
    )
    M1 = C * area * m1
    M2 = C * area * (0.625 ** (-2 * s) - 0.875 ** (-2 * s)) / (2 * s)
    if M == 0:
        sigma, M3 = 1.0, 0.0
        alpha = M2 / (2 * (M1 + M2))
    else:
        target = M2 / (2 * M)
        if _grad_bump_mass(n, 0.0) <= target:
            sigma = 0.0
        else:
            sigma = brentq(lambda x: _grad_bump_mass(n, x) - target, 0.0, 1.0 - 1e-12, xtol=1e-14, rtol=1e-13)
        M3 = 2 * sigma / (1 - sigma**2) ** 2
        alpha = M2 / (2 * (M1 + M2 + 2 * M + M * M3))
    return PrincipleConstants(
        float(M1), float(M2), float(sigma), float(M3), float(alpha), float(m), float(M), n, s
    )


# ---------------------------------------------------------- max principle


@dataclass
class MaxPrincipleReport:
    verdict: str
    alpha: float | None
    m: float
    grid_min: float
    witness: list
    checks: list = field(default_factory=list)
    alpha_empirical: float | None = None

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "alpha": self.alpha,
            "alpha_empirical": self.alpha_empirical,
            "m": self.m,
            "grid_min": self.grid_min,
            "witness": self.witness,
            "checks": self.checks,
        }


def ball_grid(dim: int, r_min: float, r_max: float, radial: int = 48, punctured: bool = False) -> np.ndarray:
    """Log-spaced radii times a sphere rule's nodes, plus the center unless punctured."""
    n = check_dimension(dim)
    dirs, _ = sphere_rule(n, {1: 2, 2: 31, 3: 11}[n])
    radii = np.geomspace(r_min, r_max, radial)
    pts = (radii[:, None, None] * dirs[None]).reshape(-1, n)
    if not punctured:
        pts = np.vstack([np.zeros((1, n)), pts])
    return pts


def _check(label: str, value: float, bound: float, tol: float, ok: bool | None = None, **extra) -> dict:
    out = {"label": label, "value": float(value), "bound": float(bound), "tol": float(tol)}
    out["passed"] = bool(value >= bound - tol if ok is None else ok)
    out.update(extra)
    return out


def verify_max_principle(
    u: ScalarField,
    coeffs: CoefficientSet | None,
    s: float | None,
    m: float,
    punctured: bool,
    consts: PrincipleConstants | None = None,
    grid=None,
    battery=None,
    tol: float = 1e-9,
    floor_tol: float = 1e-3,
    budget: EvalBudget | None = None,
) -> MaxPrincipleReport:
    """Check min over B_1 of u against alpha * m for a supersolution with u >= m on B_1 minus B_{1/2}.

    s = None selects the classical operator.  The supersolution property,
    the annulus floor and nonnegativity are checked first; if any fails the
    verdict is "inconclusive".  Classical runs with M = 0 must keep the full
    floor m; with M > 0 the observed ratio min / m is only reported.
    """
    n = u.dim
    kind = "classical" if s is None else "fractional"
    if coeffs is not None and not coeffs.drift_free and s is not None:
        check_order(s, drift=True)
    spec = OperatorSpec(kind, n, s, coeffs)
    M = 0.0 if coeffs is None else coeffs.bound_M
    if kind == "fractional" and consts is None:
        consts = compute_principle_constants(n, s, M, m=m)
    checks = []

    # hypotheses
    ring = ball_grid(n, 0.5, 1.0 - 1e-9, 16, punctured=True)
    floor = float(np.min(u(ring)))
    checks.append(_check("annulus floor u >= m", floor, m, tol))
    if kind == "fractional":
        far = ball_grid(n, 1e-3, 16.0, 96, punctured=punctured)
        scope = "global"
    else:
        far = ball_grid(n, 1e-3, 1.0, 48, punctured=punctured)
        scope = "ball"
    checks.append(_check(f"nonnegativity ({scope})", float(np.min(u(far))), 0.0, tol))
    if battery is None:
        battery = annulus_battery(n, 0.0, 1.0, count=9) if punctured else make_battery(n, count=12, domain_radius=1.0)
    rep = check_distributional_inequality(u, spec, None, (), battery, "super", budget)
    worst = min(e["margin"] + e["tol"] for e in rep.entries)
    checks.append(_check("supersolution on the battery", worst, 0.0, 0.0, ok=rep.passed, tests=len(rep.entries)))
    hypotheses_ok = all(c["passed"] for c in checks)

    pts = ball_grid(n, 1e-4, 1.0 - 1e-9, 64, punctured=punctured) if grid is None else np.asarray(grid, dtype=float)
    vals = u(pts)
    i = int(np.argmin(vals))
    gmin = float(vals[i])
    witness = [float(v) for v in pts[i]]
    alpha = None
    empirical = gmin / m
    if kind == "fractional":
        alpha = consts.alpha
        checks.append(_check("min u >= alpha m", gmin, alpha * m, tol))
    elif M == 0:
        alpha = 1.0
        checks.append(_check("min u >= m (no lower-order terms)", gmin, m, floor_tol))
    else:
        checks.append(_check("min u >= 0 (alpha reported only)", gmin, 0.0, tol))
    if not hypotheses_ok:
        verdict = "inconclusive"
    else:
        verdict = "pass" if all(c["passed"] for c in checks) else "fail"
    return MaxPrincipleReport(verdict, alpha, float(m), gmin, witness, checks, float(empirical))


def rotation_coeffs(dim: int, strength: float = 0.3, bound_M: float = 1.0) -> CoefficientSet:
    """b(x) = strength * (x2, -x1, 0...), divergence free with c = 0."""
    if dim < 2:
        raise ValueError("a rotation drift needs n >= 2")
    A = np.zeros((dim, dim))
    A[0, 1], A[1, 0] = strength, -strength
    return CoefficientSet.affine(A, bound_M=bound_M, label=f"rotation({strength:g})")


def max_principle_battery(dim: int, s: float | None, m: float = 1.0, dip: float = 0.02) -> list[tuple[str, ScalarField, bool]]:
    """(name, field, punctured) supersolutions with u >= m on the unit annulus.

    Fractional: the constant m, m min{1, |x|^(2s-n)} on the punctured ball,
    and m (cutoff - dip * bump) whose interior dips below m.
    Classical: the constant m and m + k (Phi - Phi(e1)), harmonic off 0.
    """
    n = check_dimension(dim)
    const = constant_field(m, n)
    if s is None:
        if n == 1:
            raise ValueError("the classical battery needs n >= 2")
        phi = fundamental_solution(n, "classical")
        kappa = 2 * math.pi
        e1 = np.eye(n)[:1]
        sing = (phi - float(phi(e1)[0])) * kappa + m
        sing.name = "m + k (Phi - Phi(e1))"
        return [("constant", const, False), ("singular-harmonic", sing, True)]
    s = check_order(s)
    e = 2 * s - n
    if not e < 0:
        raise ValueError("needs n > 2s")

    def capped(p):
        r = norm_nd(p)
        return m * np.minimum(1.0, np.where(r > 0, r, 1.0) ** e)

    punct = ScalarField(
        capped,
        n,
        TailProfile.algebraic(m, -e),
        singular_points=[np.zeros(n)],
        kinks=[(np.zeros(n), 1.0)],
        name="m min(1, Phi/Phi(e1))",
    )
    cut = radial_cutoff(n, 1.0, 2.0)
    bump = smooth_bump(n, radius=0.5)
    dipped = ScalarField(
        lambda p: m * (cut(p) - dip * bump(p)),
        n,
        cut.tail,
        kinks=list(cut.kinks) + [(np.zeros(n), 0.5)],
        scale=0.5,
        name=f"m (cutoff - {dip:g} bump)",
    )
    return [("constant", const, False), ("punctured-fundamental", punct, True), ("nonlocal-dip", dipped, False)]


# ------------------------------------------------------ singular recovery


@dataclass
class SingularDecomposition:
    a_hat: float
    d_hat: np.ndarray
    annulus_masses: list
    ratios: list
    deltas: list

    def to_dict(self) -> dict:
        return {
            "a_hat": self.a_hat,
            "d_hat": [float(v) for v in self.d_hat],
            "annulus_masses": self.annulus_masses,
            "ratios": self.ratios,
            "deltas": self.deltas,
        }


def fundamental_for(spec: OperatorSpec) -> ScalarField:
    """Phi for the principal part of the operator; in n = 1 the classical one is -|x| / 2."""
    n = spec.dim
    if spec.is_fractional:
        return fundamental_solution(n, "fractional", spec.s)
    if n == 1:
        return ScalarField(
            lambda p: -0.5 * np.abs(p[..., 0]),
            1,
            TailProfile.algebraic(0.5, -1.0),
            singular_points=[np.zeros(1)],
            grad=lambda p: -0.5 * np.sign(p),
            name="Phi(n=1)",
        )
    return fundamental_solution(n, "classical")


def _moment_field(u: ScalarField, i: int, weight=None) -> ScalarField:
    def f(p):
        base = u(p) if weight is None else weight(p)
        return base * p[..., i]

    return ScalarField(f, u.dim, u.tail, singular_points=u.singular_points, kinks=u.kinks, name=f"x{i} {u.name}")


def _phi_dipole_moment(phi: ScalarField, delta: float) -> float:
    """Integral of d_1 Phi(x) x_1 over B_delta."""
    w = ScalarField(
        lambda p: phi.gradient(p)[..., 0] * p[..., 0], phi.dim, phi.tail, singular_points=phi.singular_points
    )
    return delta_ball_average(w, delta, 0.0)


def recover_singular_coefficient(
    u: ScalarField,
    spec: OperatorSpec,
    deltas=DEFAULT_DELTAS,
    annuli=DEFAULT_ANNULI,
    budget: EvalBudget | None = None,
) -> SingularDecomposition:
    """Estimate the atom weight a, the dipole d and annulus masses of L u near the origin.

    a_hat extrapolates q(delta) = int_{B_delta} u / int_{B_delta} Phi.  For
    u = a Phi + h with h bounded, q = a + B g(delta) with
    g = |B_delta| / int_{B_delta} Phi, so two levels eliminate B.
    d_hat is the first moment of u divided by that of d_1 Phi on the
    smallest ball.  Annulus masses pair u with radial plateaus.
    """
    deltas = [float(d) for d in deltas]
    if len(deltas) < 2 or any(b >= a for a, b in zip(deltas, deltas[1:])) or deltas[-1] <= 0:
        raise ValueError("deltas must be a decreasing positive sequence of length >= 2")
    n = u.dim
    phi = fundamental_for(spec)
    one = constant_field(1.0, n)
    ratios, gs = [], []
    for d in deltas:
        pu = delta_ball_average(u, d, 0.0)
        pp = delta_ball_average(phi, d, 0.0)
        ratios.append(pu / pp)
        gs.append(delta_ball_average(one, d, 0.0) / pp)
    # extrapolate each consecutive pair; the bounded part is removed, so
    # estimates that keep growing mean a singularity stronger than Phi
    est = [(q1 * g2 - q2 * g1) / (g2 - g1) for q1, q2, g1, g2 in zip(ratios, ratios[1:], gs, gs[1:])]
    growth = [abs(b) / abs(a) if a != 0 else np.inf for a, b in zip(est, est[1:])]
    noise = 1e-9 * (1.0 + max(abs(q) for q in ratios))
    if growth and abs(est[-1]) > noise and all(g > 1.3 for g in growth):
        raise ValueError("ball averages grow faster than those of Phi: singularity stronger than an atom")
    a_hat = est[-1]

    dsmall = deltas[-1]
    norm = _phi_dipole_moment(phi, dsmall)
    d_hat = np.array([delta_ball_average(_moment_field(u, i), dsmall, 0.0) / norm for i in range(n)])

    masses = []
    for inner, outer in annuli:
        res = pair_adjoint(u, spec, RadialPlateau(n, inner, outer), budget)
        masses.append({"inner": float(inner), "outer": float(outer), "mass": res.value, "tol": 10 * res.err + 1e-9})
    return SingularDecomposition(float(a_hat), d_hat, masses, [float(r) for r in ratios], deltas)


def bocher_battery(spec: OperatorSpec, weights=(0.5, 2.0, 10.0)) -> list[tuple[str, ScalarField, float]]:
    """(name, nonnegative supersolution on the punctured ball, expected atom weight)."""
    n = spec.dim
    phi = fundamental_for(spec)
    out = []
    for a in weights:
        out.append((f"{a:g} Phi + 1", phi * a + 1.0, float(a)))
    if spec.is_fractional:
        smooth = bubble(n, spec.s)
        out.append(("bubble", smooth, 0.0))
        out.append(("Phi + bubble", phi + smooth, 1.0))
    else:
        para = ScalarField(
            lambda p: 1.0 - np.sum(p**2, axis=-1) / (2 * n), n, TailProfile.algebraic(1.0, -2.0), name="1 - |x|^2/2n"
        )
        out.append(("superharmonic quadratic", para, 0.0))
        out.append(("Phi + quadratic", phi + para, 1.0))
    return out


# ------------------------------------------------------- one-dimensional


def _step_field() -> ScalarField:
    return ScalarField(
        lambda p: np.where(p[..., 0] < 0, 1.0, 0.0),
        1,
        TailProfile.algebraic(1.0, 0.0),
        singular_points=[np.zeros(1)],
        name="step",
    )


def _abs_field(theta: float = 1.0) -> ScalarField:
    return ScalarField(
        lambda p: np.abs(p[..., 0]) ** theta,
        1,
        TailProfile.algebraic(1.0, -theta),
        singular_points=[np.zeros(1)],
        name=f"|x|^{theta:g}",
    )


def counterexample_suite_n1(battery=None, theta: float = 0.5, levels=range(4, 11), tol: float = 1e-6) -> dict:
    """Three one-dimensional fields where the singular decomposition breaks down.

    |x| pairs to -2 phi(0) (a negative atom), the step to -phi'(0) (a
    dipole) and |x|^theta has unbounded mass near 0.
    """
    spec = OperatorSpec("classical", 1)
    battery = make_battery(1, count=20, seed=0) if battery is None else list(battery)
    zero = np.zeros((1, 1))
    rows = {"abs": [], "step": []}
    for phi in battery:
        lhs = pair_adjoint(_abs_field(), spec, phi).value
        ref = -2.0 * float(phi(zero)[0])
        rows["abs"].append({"test_function": phi.describe(), "value": lhs, "expected": ref, "error": abs(lhs - ref)})
        lhs = pair_adjoint(_step_field(), spec, phi).value
        ref = -float(phi.gradient(zero)[0, 0])
        rows["step"].append({"test_function": phi.describe(), "value": lhs, "expected": ref, "error": abs(lhs - ref)})

    abs_dec = recover_singular_coefficient(_abs_field(), spec, annuli=())
    step_dec = recover_singular_coefficient(_step_field(), spec, annuli=())

    u = _abs_field(theta)
    c = theta * (1 - theta)
    masses = []
    for k in levels:
        r = 2.0**-k
        res = pair_adjoint(u, spec, RadialPlateau(1, r, 0.5))
        # the plateau lies between the indicators of [r, 1/2] and [r/2, 3/4]
        lo = 2 * c * (r ** (theta - 1) - 0.5 ** (theta - 1)) / (1 - theta)
        hi = 2 * c * ((r / 2) ** (theta - 1) - 0.75 ** (theta - 1)) / (1 - theta)
        masses.append({"k": k, "r": r, "mass": res.value, "err": res.err, "lower": lo, "upper": hi})
    by_k = {row["k"]: row["mass"] for row in masses}
    ratio = by_k[8] / by_k[4] if 4 in by_k and 8 in by_k else float("nan")
    k0 = min(by_k)
    growth_ok = all(by_k[k] >= k / k0 * by_k[k0] for k in by_k)
    brackets_ok = all(row["lower"] - 10 * row["err"] <= row["mass"] <= row["upper"] + 10 * row["err"] for row in masses)

    checks = [
        {"label": "|x| pairing = -2 phi(0)", "value": max(r["error"] for r in rows["abs"]), "tol": tol},
        {"label": "step pairing = -phi'(0)", "value": max(r["error"] for r in rows["step"]), "tol": tol},
        {"label": "|x| atom weight = -2", "value": abs(abs_dec.a_hat + 2.0), "tol": 1e-3},
        {"label": "step dipole |d| = 1", "value": abs(abs(step_dec.d_hat[0]) - 1.0), "tol": 1e-2},
        {"label": "mass ratio 2^-8 vs 2^-4 exceeds 2", "value": ratio, "tol": 2.0, "passed": bool(ratio > 2.0)},
        {"label": "mass at 2^-k exceeds k times base/k0", "value": float(growth_ok), "tol": 1.0, "passed": growth_ok},
        {"label": "masses inside closed-form brackets", "value": float(brackets_ok), "tol": 1.0, "passed": brackets_ok},
    ]
    for c_ in checks:
        c_.setdefault("passed", bool(c_["value"] <= c_["tol"]))
    return {
        "checks": checks,
        "pairings": rows,
        "abs_a_hat": abs_dec.a_hat,
        "step_d_hat": float(step_dec.d_hat[0]),
        "masses": masses,
        "passed": all(c_["passed"] for c_ in checks),
    }
