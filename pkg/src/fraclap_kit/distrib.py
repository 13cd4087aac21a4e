"""Test functions, adjoint pairings and distributional inequality checks."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import chebyshev as cheb

from .field_core import (
    ScalarField,
    TailProfile,
    as_point,
    as_points,
    axial_sphere_rule,
    check_order,
    composite_gauss,
    graded_gauss,
    norm_nd,
    polar_nodes,
    quad_budget,
    sphere_area,
    smooth_step_derivs,
    sphere_rule,
)
from .fields import bump_profile
from .fraclap_op import (
    EvalBudget,
    OperatorSpec,
    RadialProfile,
    _tail_map,
    frac_constant,
    fraclap_radial,
    patch_complement,
    patch_nodes,
)
from .potentials import MeasureApprox


class PreconditionError(ValueError):
    """Raised when a composition's hypotheses fail; carries the failing report."""

    def __init__(self, message: str, report):
        super().__init__(message)
        self.report = report


# ------------------------------------------------------------ test functions


@dataclass(frozen=True)
class TestFunction:
    """amplitude * exp(1 - 1/(1 - t^2)) with t = |y - center| / radius, zero for t >= 1."""

    __test__ = False

    center: np.ndarray
    radius: float
    amplitude: float = 1.0

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=float))
        if c.ndim != 1 or not np.all(np.isfinite(c)):
            raise ValueError("center must be a finite point")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        object.__setattr__(self, "center", c)

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def _t(self, pts):
        d = as_points(pts, self.dim) - self.center
        return d, norm_nd(d) / self.radius

    def __call__(self, pts) -> np.ndarray:
        _, t = self._t(pts)
        return self.amplitude * bump_profile(t)

    def gradient(self, pts) -> np.ndarray:
        d, t = self._t(pts)
        inside = t < 1
        q = np.where(inside, 1.0 - t**2, 1.0)
        fac = np.where(inside, -2.0 * bump_profile(t) / (self.radius**2 * q**2), 0.0)
        return self.amplitude * fac[..., None] * d

    def laplacian(self, pts) -> np.ndarray:
        _, t = self._t(pts)
        inside = t < 1
        q = np.where(inside, 1.0 - t**2, 1.0)
        f = bump_profile(t)
        n = self.dim
        # f'' + (n-1) f'/t with f' = -2 t f / q^2
        val = -2.0 * n * f / q**2 + 4.0 * t**2 * f / q**4 - 8.0 * t**2 * f / q**3
        return self.amplitude * np.where(inside, val, 0.0) / self.radius**2

    def mass(self) -> float:
        return self.amplitude * self.radius**self.dim * unit_bump_mass(self.dim)

    @property
    def breaks(self) -> tuple:
        a = self.radius
        return (0.25 * a, 0.5 * a, 0.75 * a, a)

    def fraclap(self, pts, s: float):
        return test_function_fraclap(self, s, pts, with_error=True)

    def as_field(self) -> ScalarField:
        return ScalarField(
            self,
            self.dim,
            TailProfile.compact(float(np.linalg.norm(self.center)) + self.radius),
            kinks=[(self.center, self.radius)],
            scale=self.radius,
            grad=self.gradient,
            name=f"bump(a={self.radius:g})",
        )

    def describe(self) -> dict:
        return {"center": [float(v) for v in self.center], "radius": self.radius, "amplitude": self.amplitude}


@lru_cache(maxsize=None)
def unit_bump_mass(n: int) -> float:
    t, w = composite_gauss(np.linspace(0.0, 1.0, 9), 24)
    return float(sphere_area(n) * np.dot(w, bump_profile(t) * t ** (n - 1)))


def make_battery(dim: int, count: int = 20, seed: int = 0, domain_radius: float = 1.0) -> list[TestFunction]:
    """Bumps with radii 2^-k (k = 1..6), alternating origin-centered and off-center placements inside the domain."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        k = 1 + i % 6
        a = domain_radius * 2.0**-k
        if i % 3 == 0:
            c = np.zeros(dim)
        else:
            v = rng.normal(size=dim)
            v /= np.linalg.norm(v)
            hi = 0.95 * domain_radius - a
            lo = min(0.25 * domain_radius, 0.5 * hi)
            c = v * rng.uniform(lo, hi)
        out.append(TestFunction(c, a))
    return out


def annulus_battery(dim: int, inner: float, outer: float, count: int = 12, seed: int = 0) -> list[TestFunction]:
    """Bumps whose supports lie inside the open annulus inner < |y| < outer."""
    if not 0 <= inner < outer:
        raise ValueError("need 0 <= inner < outer")
    rng = np.random.default_rng(seed)
    width = outer - inner
    out = []
    for i in range(count):
        a = width * 0.45 * 2.0 ** -(i % 3)
        v = rng.normal(size=dim)
        v /= np.linalg.norm(v)
        r = rng.uniform(inner + a * 1.02, outer - a * 1.02)
        out.append(TestFunction(v * r, a))
    return out


class RadialPlateau:
    """Radial test function equal to 1 on inner <= |y| <= outer.

    It rises on [inner/2, inner] and falls on [outer, 3 outer / 2], so its
    pairing with L u estimates the mass of L u on the annulus.
    """

    __test__ = False

    def __init__(self, dim: int, inner: float, outer: float):
        if not 0 < inner < outer:
            raise ValueError("need 0 < inner < outer")
        self.center = np.zeros(dim)
        self.inner, self.outer = float(inner), float(outer)
        self.radius = 1.5 * self.outer
        self.amplitude = 1.0

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def breaks(self) -> tuple:
        i, o = self.inner, self.outer
        return (0.5 * i, 0.75 * i, i, o, 1.25 * o, 1.5 * o)

    def profile(self, r):
        """phi, phi' and phi'' as functions of the radius."""
        r = np.asarray(r, dtype=float)
        hi, h1, h2 = smooth_step_derivs((r - 0.5 * self.inner) / (0.5 * self.inner))
        lo, l1, l2 = smooth_step_derivs((r - self.outer) / (0.5 * self.outer))
        wi, wo = 0.5 * self.inner, 0.5 * self.outer
        return hi - lo, h1 / wi - l1 / wo, h2 / wi**2 - l2 / wo**2

    def __call__(self, pts) -> np.ndarray:
        return self.profile(norm_nd(as_points(pts, self.dim)))[0]

    def gradient(self, pts) -> np.ndarray:
        p = as_points(pts, self.dim)
        r = norm_nd(p)
        d1 = self.profile(r)[1]
        fac = np.where(r > 0, d1 / np.where(r > 0, r, 1.0), 0.0)
        return fac[..., None] * p

    def laplacian(self, pts) -> np.ndarray:
        r = norm_nd(as_points(pts, self.dim))
        _, d1, d2 = self.profile(r)
        return d2 + (self.dim - 1) * np.where(r > 0, d1 / np.where(r > 0, r, 1.0), 0.0)

    def fraclap(self, pts, s: float):
        r = norm_nd(as_points(pts, self.dim))
        uniq, inv = np.unique(r, return_inverse=True)
        vals = [_plateau_fraclap(self.dim, float(s), self.inner, self.outer, float(x)) for x in uniq]
        v = np.array([a for a, _ in vals])[inv]
        e = np.array([b for _, b in vals])[inv]
        return v, e

    def describe(self) -> dict:
        return {"plateau": [self.inner, self.outer]}


@lru_cache(maxsize=200_000)
def _plateau_fraclap(n: int, s: float, inner: float, outer: float, r: float) -> tuple[float, float]:
    plate = RadialPlateau(n, inner, outer)
    edges = (0.5 * inner, inner, outer, 1.5 * outer)
    if r > 0:
        return fraclap_radial(RadialProfile(lambda x: plate.profile(x)[0], kinks=edges), r, s, n)
    # phi vanishes near 0, so the operator is a plain integral there
    rr, w = composite_gauss([0.5 * inner, 0.75 * inner, inner, outer, 1.25 * outer, 1.5 * outer], 24)
    val = -frac_constant(n, s) * sphere_area(n) * float(np.dot(w, plate.profile(rr)[0] * rr ** (-1 - 2 * s)))
    return val, 1e-12 * abs(val)


# ------------------------------------------------------- symbolic right sides


@dataclass(frozen=True)
class SymbolicAtom:
    """a * delta_p (kind "delta") or d . grad delta_p (kind "dipole")."""

    kind: str
    point: np.ndarray
    weight: float = 0.0
    vector: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("delta", "dipole"):
            raise ValueError(f"unknown atom kind {self.kind!r}")
        object.__setattr__(self, "point", np.atleast_1d(np.asarray(self.point, dtype=float)))
        if self.kind == "dipole":
            if self.vector is None:
                raise ValueError("a dipole needs a vector")
            object.__setattr__(self, "vector", np.atleast_1d(np.asarray(self.vector, dtype=float)))

    @classmethod
    def delta(cls, point, weight: float) -> "SymbolicAtom":
        return cls("delta", point, float(weight))

    @classmethod
    def dipole(cls, point, vector) -> "SymbolicAtom":
        return cls("dipole", point, vector=vector)

    def pair(self, phi: TestFunction) -> float:
        p = as_point(self.point, phi.dim)
        if self.kind == "delta":
            return self.weight * float(phi(p))
        return -float(np.dot(self.vector, phi.gradient(p[None, :])[0]))


# ------------------------------------------------- (-Delta)^s of the unit bump


_INNER_BREAKS = (0.0, 0.25, 0.5, 0.7, 0.85, 0.93, 0.97, 1.0, 1.03, 1.07, 1.15, 1.3, 1.6, 2.0)


class BumpFraclapTable:
    """Piecewise Chebyshev interpolant of t -> (-Delta)^s bump(|y|) at |y| = t.

    Beyond t = 2 the function times t^(n+2s) is interpolated in u = 2/t,
    which is smooth down to u = 0.
    """

    def __init__(self, n: int, s: float, degree: int = 24):
        self.n, self.s = n, s
        p = n + 2 * s
        prof = RadialProfile(bump_profile, kinks=(1.0,), decay=64.0)
        errs = []

        def F(t, weight=0.0):
            vals = [fraclap_radial(prof, float(ti), s, n) for ti in np.atleast_1d(t)]
            errs.append(max(e * ti**weight for (_, e), ti in zip(vals, np.atleast_1d(t))))
            return np.array([v for v, _ in vals])

        self.panels = []
        tails = []
        for lo, hi in zip(_INNER_BREAKS[:-1], _INNER_BREAKS[1:]):
            coef = cheb.chebinterpolate(lambda x, lo=lo, hi=hi: F(lo + (hi - lo) * (x + 1) / 2), degree)
            self.panels.append((lo, hi, coef))
            tails.append(float(np.sum(np.abs(coef[-3:]))))
        self.inner_error = max(errs) + max(tails)
        errs.clear()
        self.far = cheb.chebinterpolate(lambda x: F(4.0 / (x + 1.0), p) * (4.0 / (x + 1.0)) ** p, degree)
        # error of t^(n+2s) F(t) on the far panel
        self.far_error = max(errs) + float(np.sum(np.abs(self.far[-3:])))
        self.far_limit = -frac_constant(n, s) * unit_bump_mass(n)
        self.error = max(self.inner_error, self.far_error * 2.0**-p)

    def error_at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.where(t < _INNER_BREAKS[-1], self.inner_error, self.far_error * np.maximum(t, 1.0) ** -(self.n + 2 * self.s))

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.empty(t.shape)
        for lo, hi, coef in self.panels:
            sel = (t >= lo) & (t < hi)
            if np.any(sel):
                out[sel] = cheb.chebval(2 * (t[sel] - lo) / (hi - lo) - 1, coef)
        far = t >= _INNER_BREAKS[-1]
        if np.any(far):
            tf = t[far]
            out[far] = cheb.chebval(4.0 / tf - 1.0, self.far) * tf ** (-(self.n + 2 * self.s))
        return out


@lru_cache(maxsize=None)
def bump_fraclap_table(n: int, s: float, budget: int = 1) -> BumpFraclapTable:
    return BumpFraclapTable(n, s, 24 * budget)


def test_function_fraclap(phi: TestFunction, s: float, pts, with_error: bool = False):
    """(-Delta)^s phi at pts, from the unit-bump table by scaling."""
    tab = bump_fraclap_table(phi.dim, check_order(s), quad_budget())
    d = norm_nd(as_points(pts, phi.dim) - phi.center) / phi.radius
    fac = abs(phi.amplitude) * phi.radius ** (-2 * s)
    val = np.sign(phi.amplitude) * fac * tab(d)
    return (val, fac * tab.error_at(d)) if with_error else val


# ------------------------------------------------------------------ pairings


@dataclass
class PairingResult:
    value: float
    err: float
    adjoint_terms: dict
    term_errors: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"value": self.value, "err": self.err, "adjoint_terms": dict(self.adjoint_terms)}


def _far_radius(u: ScalarField, phi) -> float:
    c = float(np.linalg.norm(phi.center))
    if u.tail.kind == "compact":
        return max(u.tail.radius + c, phi.radius)
    return max(256.0 * phi.radius, 8.0 * (c + phi.radius), 4.0)


def _pairing_nodes(u: ScalarField, phi, R: float, m: int, order: int):
    """Nodes and weights on B_R(center) resolving the features of u, with cutoff patches at its singular points."""
    n = phi.dim
    c, a = phi.center, phi.radius
    sing = u.singular_points
    at_center = [p for p in sing if np.linalg.norm(p - c) <= 1e-12 * a]
    brk = {0.0, R, *phi.breaks}
    brk.update(float(v) for v in a * 2.0 ** np.arange(1, 64) if v < R)
    for kc, kr in u.kinks:
        d = float(np.linalg.norm(np.asarray(kc) - c))
        for v in (d + kr, abs(d - kr)):
            if 0 < v < R:
                brk.add(v)
    off_center = [p for p in sing if np.linalg.norm(p - c) > 1e-12 * a and np.linalg.norm(p - c) < R]
    patches = []
    for i, p in enumerate(off_center):
        d = float(np.linalg.norm(p - c))
        eta = 0.5 * d
        others = [q for j, q in enumerate(off_center) if j != i]
        if others:
            eta = min(eta, 0.5 * float(np.min(np.linalg.norm(np.array(others) - p, axis=-1))))
        patches.append((p, eta))
        # panel edges where the patch cutoff switches on and off
        brk.update(v for v in (d - eta, d - 0.5 * eta, d, d + 0.5 * eta, d + eta) if 0 < v < R)
    brk = sorted(brk)
    if at_center:
        # graded toward the singular point sitting at the center
        r0, w0 = graded_gauss(0.0, brk[1], m, 4.0)
        r1, w1 = composite_gauss(brk[1:], m)
        r, w = np.concatenate([r0, r1]), np.concatenate([w0, w1])
    else:
        r, w = composite_gauss(brk, m)
    if len(patches) == 1 and n > 1:
        # everything except the patch is symmetric about the axis toward it
        p, eta = patches[0]
        d = float(np.linalg.norm(p - c))
        dirs, dw = axial_sphere_rule(n, p - c, 0.25 * eta / d, max(8, (order + 1) // 2))
    else:
        dirs, dw = sphere_rule(n, order)
    pts, pw = polar_nodes(c, r, w, dirs, dw)
    if patches:
        pw = pw * patch_complement(pts, patches)
        extra_p, extra_w = [], []
        for p, eta in patches:
            off, ow = patch_nodes(eta, dirs, dw, m)
            extra_p.append(p + off)
            extra_w.append(ow)
        pts = np.vstack([pts] + extra_p)
        pw = np.concatenate([pw] + extra_w)
    return pts, pw


def _pairing_sum(u: ScalarField, spec: OperatorSpec, phi, R: float, m: int, order: int, tail_m: int):
    n = phi.dim
    pts, w = _pairing_nodes(u, phi, R, m, order)
    rho = norm_nd(pts - phi.center)
    uv = u(pts)
    inside = rho < phi.radius
    pi, wi, ui = pts[inside], w[inside], uv[inside]
    terms = {"principal": 0.0, "drift": 0.0, "zero_order": 0.0}
    table_err = 0.0
    if spec.is_fractional:
        s = spec.s
        if u.tail.kind != "compact":
            # beyond R: tail map matched to the decay of u times |y|^(-n-2s)
            dirs, dw = sphere_rule(n, order)
            rr, rw = _tail_map(R, u.tail.power, s, tail_m)
            tp, tw = polar_nodes(phi.center, rr, rw, dirs, dw)
            pts, w, uv = np.vstack([pts, tp]), np.concatenate([w, tw]), np.concatenate([uv, u(tp)])
        F, Ferr = phi.fraclap(pts, s)
        terms["principal"] = float(np.dot(w * uv, F))
        table_err = float(np.dot(np.abs(w * uv), Ferr))
    else:
        terms["principal"] = -float(np.dot(wi * ui, phi.laplacian(pi)))
    co = spec.coeffs
    if co is not None:
        phv = phi(pi)
        if not co.drift_free:
            bg = np.sum(co.b(pi) * phi.gradient(pi), axis=-1)
            terms["drift"] = -float(np.dot(wi * ui, co.div_b(pi) * phv + bg))
        terms["zero_order"] = float(np.dot(wi * ui, co.c(pi) * phv))
    return terms, table_err


def _orders(n: int, budget: EvalBudget | None):
    b = quad_budget()
    m = 2 * (budget.radial_order if budget else 12) * b
    if n == 1:
        # a single radial line is cheap; the bump's flat edges want high order
        m *= 4
    order = {1: 2, 2: 96 * b - 1, 3: 24 * b - 1}[n]
    if budget is not None and budget.sphere_order is not None:
        order = budget.sphere_order * b
    return m, order


def pair_adjoint(u: ScalarField, spec: OperatorSpec, phi, budget: EvalBudget | None = None) -> PairingResult:
    """<u, L* phi> with L* phi = P phi - div(b phi) + c phi, P the principal part of spec.

    phi is a TestFunction or a RadialPlateau.
    """
    if u.dim != spec.dim or phi.dim != spec.dim:
        raise ValueError("field, operator and test function dimensions differ")
    if spec.is_fractional and not u.tail.admits(spec.s):
        raise ValueError("field is not in the weighted L^1 class required by the fractional pairing")
    if not spec.is_fractional and u.tail.kind == "bounded":
        raise ValueError("classical pairing needs a field with a pointwise tail")
    n = spec.dim
    m, order = _orders(n, budget)
    R = _far_radius(u, phi)
    fine, table_err = _pairing_sum(u, spec, phi, R, m, order, 2 * m)
    coarse_order = order if n == 1 else max(2, int(0.6 * order))
    rough, _ = _pairing_sum(u, spec, phi, R, max(4, (2 * m) // 3), coarse_order, m)
    errs = {k: abs(fine[k] - rough[k]) for k in fine}
    errs["principal"] += table_err
    value = float(sum(fine.values()))
    err = float(sum(errs.values())) + 1e-14 * (abs(value) + 1.0)
    return PairingResult(value, err, fine, errs)


# ---------------------------------------------------- inequality checking


def _ball_integral(func, phi, budget: EvalBudget | None = None, coarse: bool = False) -> float:
    n = phi.dim
    m, order = _orders(n, budget)
    if coarse:
        m, order = max(4, (2 * m) // 3), (order if n == 1 else max(2, int(0.6 * order)))
    r, w = composite_gauss((0.0,) + tuple(phi.breaks), m)
    dirs, dw = sphere_rule(n, order)
    pts, pw = polar_nodes(phi.center, r, w, dirs, dw)
    return float(np.dot(pw, func(pts) * phi(pts)))


def pair_rhs(rhs, atoms, phi, budget: EvalBudget | None = None) -> tuple[float, float]:
    """<rhs + atoms, phi> and an error estimate; rhs is a MeasureApprox, a density field or None."""
    val, err = 0.0, 0.0
    if isinstance(rhs, MeasureApprox):
        for loc, mass in rhs.atoms:
            val += mass * float(phi(loc))
        if rhs.density is not None:
            fine = _ball_integral(rhs.density, phi, budget)
            val += fine
            err += abs(fine - _ball_integral(rhs.density, phi, budget, coarse=True))
    elif isinstance(rhs, ScalarField):
        fine = _ball_integral(rhs, phi, budget)
        val += fine
        err += abs(fine - _ball_integral(rhs, phi, budget, coarse=True))
    elif rhs is not None:
        raise TypeError("rhs must be a MeasureApprox, a ScalarField or None")
    for atom in atoms:
        val += atom.pair(phi)
    return val, err + 1e-14 * (abs(val) + 1.0)


@dataclass
class DistributionReport:
    direction: str
    entries: list
    smallest_radius: float
    passed: bool

    @property
    def margins(self) -> np.ndarray:
        return np.array([e["margin"] for e in self.entries])

    def to_dict(self) -> dict:
        return {
            "direction": self.direction,
            "smallest_test_radius": self.smallest_radius,
            "passed": self.passed,
            "entries": self.entries,
        }


TOL_FACTOR = 10.0
TOL_FLOOR = 1e-9


def check_distributional_inequality(
    u: ScalarField,
    spec: OperatorSpec,
    rhs=None,
    atoms=(),
    battery=(),
    direction: str = "super",
    budget: EvalBudget | None = None,
) -> DistributionReport:
    """Check L u >= rhs ("super"), L u <= rhs ("sub") or L u = rhs ("equal") against each test function.

    margin = <u, L* phi> - <rhs, phi> (sign flipped for "sub"); a test passes
    when margin >= -tol (|margin| <= tol for "equal") with tol ten times the
    summed error estimates.
    """
    if direction not in ("super", "sub", "equal"):
        raise ValueError("direction must be super, sub or equal")
    battery = list(battery)
    if not battery:
        raise ValueError("empty test-function battery")
    entries = []
    for phi in battery:
        if phi.amplitude < 0:
            raise ValueError("test functions must be nonnegative")
        lhs = pair_adjoint(u, spec, phi, budget)
        rv, re = pair_rhs(rhs, atoms, phi, budget)
        margin = lhs.value - rv
        if direction == "sub":
            margin = -margin
        tol = TOL_FACTOR * (lhs.err + re) + TOL_FLOOR
        ok = abs(margin) <= tol if direction == "equal" else margin >= -tol
        entries.append(
            {
                "test_function": phi.describe(),
                "lhs": lhs.value,
                "rhs": rv,
                "margin": margin,
                "tol": tol,
                "passed": bool(ok),
            }
        )
    return DistributionReport(
        direction, entries, float(min(p.radius for p in battery)), all(e["passed"] for e in entries)
    )


# ---------------------------------------------------------- compositions


def max_field(u: ScalarField, v: ScalarField) -> ScalarField:
    if u.dim != v.dim:
        raise ValueError("fields of different dimension")
    pts = list(u.singular_points) + list(v.singular_points)
    return ScalarField(
        lambda p: np.maximum(u(p), v(p)),
        u.dim,
        u.tail.combine(v.tail),
        singular_points=pts,
        kinks=list(u.kinks) + list(v.kinks),
        scale=min(u.scale, v.scale),
        name=f"max({u.name},{v.name})",
    )


@dataclass
class CompositionReport:
    kind: str
    pre_reports: list
    report: DistributionReport
    band: float

    @property
    def passed(self) -> bool:
        return self.report.passed

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "band": self.band,
            "preconditions": [r.to_dict() for r in self.pre_reports],
            "result": self.report.to_dict(),
        }


def compose_max(
    u: ScalarField,
    v: ScalarField,
    f: ScalarField,
    g: ScalarField,
    spec: OperatorSpec,
    battery,
    check_pre: bool = True,
    budget: EvalBudget | None = None,
) -> CompositionReport:
    """Given L u <= f and L v <= g, check L max(u, v) <= f 1{u>v} + g 1{u<v} + max(f, g) 1{u=v}.

    The coincidence set is taken as the band |u - v| <= 1e-9 * scale.
    """
    battery = list(battery)
    pre = []
    if check_pre:
        for w, h, label in ((u, f, "u"), (v, g, "v")):
            rep = check_distributional_inequality(w, spec, h, (), battery, "sub", budget)
            pre.append(rep)
            if not rep.passed:
                raise PreconditionError(f"hypothesis L{label} <= rhs fails on the battery", rep)
    band = 1e-9 * min(u.scale, v.scale)

    def h(p):
        du = u(p) - v(p)
        fv, gv = f(p), g(p)
        return np.where(np.abs(du) <= band, np.maximum(fv, gv), np.where(du > 0, fv, gv))

    rhs = ScalarField(h, u.dim, f.tail.combine(g.tail), name="composed rhs")
    rep = check_distributional_inequality(max_field(u, v), spec, rhs, (), battery, "sub", budget)
    return CompositionReport("max", pre, rep, band)


def compose_min(
    u: ScalarField,
    v: ScalarField,
    f: ScalarField,
    g: ScalarField,
    spec: OperatorSpec,
    battery,
    check_pre: bool = True,
    budget: EvalBudget | None = None,
) -> CompositionReport:
    """Given L u >= f and L v >= g, check L min(u, v) >= the composed right side (via the max of negatives)."""
    out = compose_max(-u, -v, -f, -g, spec, battery, check_pre, budget)
    out.kind = "min"
    return out
