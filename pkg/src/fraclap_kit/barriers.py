"""Radial barrier families and numerical certification of their inequalities."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .field_core import (
    CoefficientSet,
    ScalarField,
    TailProfile,
    as_points,
    check_dimension,
    check_order,
    composite_gauss,
    geometric_breaks,
    norm_nd,
    quad_budget,
    sphere_area,
    sphere_order_default,
    sphere_rule,
)
from .fields import radial_cutoff
from .fraclap_op import (
    RadialProfile,
    eval_fraclap,
    fraclap_radial,
    riesz_power_constant,
)
from .mollify import MollifierKernel, _angular_bump, radial_mollify

FAMILIES = ("classical-n2-log", "classical-n3-power", "fractional-power")
MARGIN_TOL = 1e-9
MAX_RADIUS = 0.9


@dataclass
class Barrier:
    """phi_eps and psi_eps = max(phi_eps, 0) for one of the three families.

    classical-n2-log:   1 + sigma r^2 - (log r / log eps)^alpha
    classical-n3-power: 1 + sigma r^2 - (eps / r)^alpha
    fractional-power:   1 - (eps / r)^alpha
    """

    family: str
    eps: float
    alpha: float
    M: float
    dim: int
    s: float | None = None
    sigma: float = 0.0
    certified_r0: float | None = None

    @property
    def classical(self) -> bool:
        return self.family != "fractional-power"

    def _check_r(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0):
            raise ValueError("barriers are evaluated on the punctured ball only")
        if self.family == "classical-n2-log" and np.any(r >= 1):
            raise ValueError("the logarithmic barrier is only defined for r < 1")
        return r

    def phi_r(self, r) -> np.ndarray:
        r = self._check_r(r)
        a, e = self.alpha, self.eps
        if self.family == "classical-n2-log":
            return 1.0 + self.sigma * r**2 - (np.log(r) / math.log(e)) ** a
        if self.family == "classical-n3-power":
            return 1.0 + self.sigma * r**2 - (e / r) ** a
        return 1.0 - (e / r) ** a

    def dphi_r(self, r) -> np.ndarray:
        """Radial derivative of phi."""
        r = self._check_r(r)
        a, e = self.alpha, self.eps
        if self.family == "classical-n2-log":
            L = np.log(r) / math.log(e)
            return 2 * self.sigma * r - a * L ** (a - 1) / (r * math.log(e))
        if self.family == "classical-n3-power":
            return 2 * self.sigma * r + a * e**a * r ** (-a - 1)
        return a * e**a * r ** (-a - 1)

    def minus_lap_phi_r(self, r) -> np.ndarray:
        """-Delta phi for the classical families."""
        if not self.classical:
            raise ValueError("the fractional family uses (-Delta)^s, not -Delta")
        r = self._check_r(r)
        a, e, n = self.alpha, self.eps, self.dim
        if self.family == "classical-n2-log":
            L = np.log(r) / math.log(e)
            lap_f = a * (a - 1) * L ** (a - 2) / (r**2 * math.log(e) ** 2)
            return -2 * n * self.sigma + lap_f
        return -2 * n * self.sigma + e**a * a * (a + 2 - n) * r ** (-a - 2)

    def frac_phi_r(self, r, closed_form: bool = False) -> tuple[np.ndarray, np.ndarray]:
        """(-Delta)^s phi at radii r with error bars, by the radial reduction.

        With ``closed_form`` the power-law identity is used instead.
        """
        if self.classical:
            raise ValueError("only the fractional family has a fractional operator")
        r = self._check_r(np.atleast_1d(r))
        a, e, n, s = self.alpha, self.eps, self.dim, self.s
        if closed_form:
            return -(e**a) * riesz_power_constant(n, s, a) * r ** (-a - 2 * s), np.zeros(r.shape)
        prof = RadialProfile(lambda rho: -((e / rho) ** a), singular_origin=True, decay=a)
        vals, errs = zip(*(fraclap_radial(prof, float(ri), s, n) for ri in r))
        return np.array(vals), np.array(errs)

    def zero_radius(self) -> float:
        """The radius where phi changes sign (the kink of psi)."""
        if not self.classical:
            return self.eps
        hi = self.eps
        lo = self.eps * 1e-6
        while self.phi_r(lo) > 0:
            lo *= 1e-3
        return brentq(self.phi_r, lo, hi, xtol=1e-15, rtol=1e-15)

    def grad_sup_positive(self) -> float:
        """sup of |grad phi| over {phi > 0} inside the unit ball."""
        r0 = self.zero_radius()
        top = MAX_RADIUS if self.family == "classical-n2-log" else 1.0
        rs = np.geomspace(r0, top, 4001)
        return float(np.max(np.abs(self.dphi_r(rs))))

    def phi(self) -> ScalarField:
        def f(p):
            return self.phi_r(norm_nd(p))

        def g(p):
            r = norm_nd(p)
            return (self.dphi_r(r) / r)[..., None] * p

        tail = TailProfile.algebraic(1.0 + self.sigma, -2.0) if self.classical else TailProfile.algebraic(1.0, 0.0)
        return ScalarField(f, self.dim, tail, singular_points=[np.zeros(self.dim)], grad=g, name=self.family)

    def psi(self) -> ScalarField:
        r0 = self.zero_radius()

        def f(p):
            r = norm_nd(p)
            out = np.zeros(r.shape)
            pos = r > r0
            out[pos] = np.maximum(self.phi_r(r[pos]), 0.0)
            return out

        def g(p):
            r = norm_nd(p)
            fac = np.zeros(r.shape)
            pos = r > r0
            fac[pos] = self.dphi_r(r[pos]) / r[pos]
            return fac[..., None] * p

        tail = TailProfile.algebraic(1.0 + self.sigma, -2.0) if self.classical else TailProfile.algebraic(1.0, 0.0)
        return ScalarField(
            f, self.dim, tail, kinks=[(np.zeros(self.dim), r0)], grad=g, name=f"max({self.family},0)"
        )

    def describe(self) -> dict:
        return {
            "family": self.family,
            "eps": self.eps,
            "alpha": self.alpha,
            "M": self.M,
            "dim": self.dim,
            "s": self.s,
            "sigma": self.sigma,
            "certified_r0": self.certified_r0,
        }


def default_alpha(family: str, dim: int, s: float | None = None) -> float:
    if family == "classical-n2-log":
        return 0.5
    if family == "classical-n3-power":
        return min((dim - 2) / 2.0, 0.5)
    return (dim - 2 * s) / 2.0


def make_barrier(
    family: str, eps: float, alpha: float | None = None, M: float = 0.0, dim: int | None = None, s: float | None = None
) -> Barrier:
    if family not in FAMILIES:
        raise ValueError(f"unknown barrier family {family!r}; choose from {', '.join(FAMILIES)}")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if M < 0:
        raise ValueError("M must be nonnegative")
    if family == "classical-n2-log":
        n = 2 if dim is None else dim
        if n != 2:
            raise ValueError("the logarithmic barrier is the n = 2 family")
    elif family == "classical-n3-power":
        n = 3 if dim is None else dim
        if n < 3:
            raise ValueError("the power barrier needs n >= 3")
    else:
        if s is None:
            raise ValueError("the fractional family needs s")
        s = check_order(s)
        n = 2 if dim is None else dim
    check_dimension(n)
    a = default_alpha(family, n, s) if alpha is None else float(alpha)
    if family == "classical-n2-log":
        ok, interval = 0 < a < 1, "(0, 1)"
    elif family == "classical-n3-power":
        ok, interval = 0 < a < n - 2, f"(0, {n - 2})"
    else:
        ok, interval = 0 < a < n - 2 * s, f"(0, {n - 2 * s:g})"
    if not ok:
        raise ValueError(f"alpha={a} outside the admissible interval {interval} for {family}")
    sigma = (2 * M + 1) / n if family != "fractional-power" else 0.0
    return Barrier(family, float(eps), a, float(M), n, s, sigma)


# ------------------------------------------------------------ certification


def _directions(n: int) -> np.ndarray:
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        th = 2 * math.pi * (np.arange(8) + 0.25) / 8
        return np.stack([np.cos(th), np.sin(th)], axis=-1)
    axes = np.vstack([np.eye(3), -np.eye(3)])
    corners = np.array([[i, j, k] for i in (-1, 1) for j in (-1, 1) for k in (-1, 1)], dtype=float) / math.sqrt(3)
    return np.vstack([axes, corners])


def certification_grid(dim: int, r_min: float = 1e-4, r_max: float = MAX_RADIUS, per_octave: int | None = None):
    """Log-spaced radii times a fixed direction set."""
    check_dimension(dim)
    per_octave = per_octave or (32 if dim == 1 else 8)
    k = int(math.ceil(math.log2(r_max / r_min) * per_octave))
    radii = np.geomspace(r_min, r_max, k + 1)
    dirs = _directions(dim)
    return (radii[:, None, None] * dirs[None, :, :]).reshape(-1, dim)


@dataclass
class CertificationReport:
    family: str
    r0: float
    points: np.ndarray
    margins: np.ndarray
    candidates: dict
    failures: list = field(default_factory=list)
    passed: bool = True
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "r0": self.r0,
            "points": int(len(self.points)),
            "max_margin": float(np.max(self.margins)) if len(self.margins) else None,
            "candidates": {f"{k:.6g}": v for k, v in self.candidates.items()},
            "failures": self.failures[:10],
            "passed": self.passed,
            **self.extra,
        }


def _radial_unique(points: np.ndarray):
    r = norm_nd(points)
    uniq, inv = np.unique(r, return_inverse=True)
    return r, uniq, inv


def barrier_margins(b: Barrier, coeffs: CoefficientSet, points) -> tuple[np.ndarray, np.ndarray]:
    """Left side minus right side of the barrier inequality at each point, with error bars."""
    pts = as_points(points, b.dim)
    r, uniq, inv = _radial_unique(pts)
    grad = (b.dphi_r(r) / r)[:, None] * pts
    drift = np.sum(coeffs.b(pts) * grad, axis=-1)
    phi = b.phi_r(r)
    if b.classical:
        return b.minus_lap_phi_r(r) - drift + (2 * b.M + 1) * phi, np.zeros(len(r))
    vals, errs = b.frac_phi_r(uniq)
    return vals[inv] - drift + 2 * b.M * phi - 2 * b.M, errs[inv]


def _dyadic_search(r: np.ndarray, ok: np.ndarray, levels: int = 10, min_points: int = 1):
    candidates = {}
    best = 0.0
    for k in range(1, levels + 1):
        rad = 2.0**-k
        inside = r <= rad
        passed = bool(np.all(ok[inside])) and int(inside.sum()) >= min_points
        candidates[rad] = passed
        if passed and best == 0.0:
            best = rad
    return best, candidates


def certify_barrier_inequality(
    b: Barrier,
    coeffs: CoefficientSet,
    grid=None,
    levels: int = 10,
) -> tuple[float, CertificationReport]:
    """Largest dyadic radius 2^-k such that every grid point inside passes.

    Classical: -Delta phi - b.grad phi + (2M + 1) phi <= 0.
    Fractional: (-Delta)^s phi - b.grad phi + 2M phi <= 2M.
    A point passes when its margin is at most 1e-9.
    """
    if coeffs.dim != b.dim:
        raise ValueError("coefficient dimension does not match the barrier")
    if coeffs.bound_M > b.M * (1 + 1e-12) + 1e-15:
        raise ValueError(f"coefficient bound {coeffs.bound_M} exceeds the barrier's M={b.M}")
    if not b.classical and not coeffs.drift_free:
        check_order(b.s, drift=True)
    pts = certification_grid(b.dim) if grid is None else as_points(grid, b.dim)
    r = norm_nd(pts)
    if np.any(r <= 0) or np.any(r >= 1):
        raise ValueError("grid points must lie in the punctured unit ball")
    margins, errs = barrier_margins(b, coeffs, pts)
    ok = margins <= MARGIN_TOL
    r0, cand = _dyadic_search(r, ok, levels)
    fails = [
        {"point": [float(v) for v in pts[i]], "margin": float(margins[i])} for i in np.nonzero(~ok & (r <= 0.5))[0]
    ]
    b.certified_r0 = r0
    report = CertificationReport(
        b.family, r0, pts, margins, cand, fails, r0 > 0, {"max_error_estimate": float(np.max(errs))}
    )
    return r0, report


# ------------------------------------------------------- mollified barriers


def mollified_profiles(b: Barrier, delta: float, radii) -> dict:
    """Radial profiles of psi^delta = J_delta psi and the pieces of its operators."""
    n = b.dim
    r = np.asarray(radii, dtype=float)
    rz = b.zero_radius()
    phi = lambda rho: b.phi_r(np.maximum(rho, rz))
    dphi = lambda rho: b.dphi_r(np.maximum(rho, rz))
    out = {
        "psi": radial_mollify(phi, r, delta, n, lower=rz),
        "dpsi": radial_mollify(dphi, r, delta, n, lower=rz, moment=1),
        "chi": radial_mollify(np.ones_like, r, delta, n, lower=rz),
    }
    if b.classical:
        # -Delta psi = (-Delta phi) 1_{r > rz} - phi'(rz) dS_{rz}
        lap = lambda rho: b.minus_lap_phi_r(np.maximum(rho, rz))
        layer = _angular_bump(n, r, np.full(r.shape, rz), delta, 40 * quad_budget())
        out["op"] = radial_mollify(lap, r, delta, n, lower=rz) - float(b.dphi_r(rz)) * rz ** (n - 1) * layer
        out["op_err"] = np.zeros(r.shape)
    else:
        s = b.s
        prof = RadialProfile(
            lambda rho: radial_mollify(phi, rho, delta, n, lower=rz) - 1.0,
            layers=((rz, delta),),
            decay=b.alpha,
        )
        vals, errs = zip(*(fraclap_radial(prof, float(ri), s, n) for ri in r))
        out["op"], out["op_err"] = np.array(vals), np.array(errs)
    return out


def certify_mollified_barrier(
    b: Barrier,
    coeffs: CoefficientSet,
    k: MollifierKernel,
    grid=None,
    r0: float | None = None,
) -> CertificationReport:
    """Check the mollified inequality with the extra term M delta |grad phi| J_delta(1_{phi>0}).

    Classical: -Delta psi^d - b.grad psi^d + (2M + 1) psi^d <= extra.
    Fractional: (-Delta)^s psi^d - b.grad psi^d + 2M psi^d <= 2M + extra.
    """
    delta = k.delta
    if not delta < b.eps / 2:
        raise ValueError(f"need delta < eps/2, got delta={delta}, eps={b.eps}")
    if k.dim != b.dim or coeffs.dim != b.dim:
        raise ValueError("dimension mismatch")
    r0 = r0 if r0 is not None else b.certified_r0
    if r0 is None:
        raise ValueError("certify the barrier first or pass r0")
    pts = certification_grid(b.dim) if grid is None else as_points(grid, b.dim)
    r = norm_nd(pts)
    pts, r = pts[r <= r0], r[r <= r0]
    if len(pts) == 0:
        raise ValueError("no grid points inside the certified ball")
    uniq, inv = np.unique(r, return_inverse=True)
    prof = mollified_profiles(b, delta, uniq)
    psi = prof["psi"][inv]
    grad = (prof["dpsi"][inv] / r)[:, None] * pts
    drift = np.sum(coeffs.b(pts) * grad, axis=-1)
    extra = b.M * delta * b.grad_sup_positive() * prof["chi"][inv]
    if b.classical:
        margins = prof["op"][inv] - drift + (2 * b.M + 1) * psi - extra
    else:
        margins = prof["op"][inv] - drift + 2 * b.M * psi - 2 * b.M - extra
    ok = margins <= MARGIN_TOL
    fails = [{"point": [float(v) for v in pts[i]], "margin": float(margins[i])} for i in np.nonzero(~ok)[0]]
    return CertificationReport(
        b.family,
        float(r0),
        pts,
        margins,
        {float(r0): bool(np.all(ok))},
        fails,
        bool(np.all(ok)),
        {"delta": delta, "max_error_estimate": float(np.max(prof["op_err"]))},
    )


# -------------------------------------------------------------- decay bounds


@dataclass
class DecayReport:
    sample_xs: np.ndarray
    k1_values: np.ndarray
    k2_values: np.ndarray
    fitted_C: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "samples": int(len(self.sample_xs)),
            "fitted_C": self.fitted_C,
            "max_k1": float(np.max(self.k1_values)),
            "max_k2": float(np.max(self.k2_values)),
            "passed": self.passed,
        }


def decay_samples(dim: int, r0: float) -> np.ndarray:
    """Samples spanning |x| <= r0/4, r0/4 < |x| <= 2 and |x| > 2."""
    radii = [r0 / 16, r0 / 8, r0 / 4, 0.4 * r0, 0.6 * r0, r0, 0.5, 1.0, 2.0, 3.0, 5.0, 10.0, 30.0, 100.0]
    dirs = _directions(dim)[:: max(1, len(_directions(dim)) // 3)]
    return np.array([ri * d for ri in radii for d in dirs])


def _k2(eta: ScalarField, psi: ScalarField, s: float, x: np.ndarray) -> float:
    n = eta.dim
    b = quad_budget()
    dirs, dw = sphere_rule(n, sphere_order_default(n))
    ex, px = float(eta(x)), float(psi(x))
    supp = eta.tail.radius
    m = 12 * b
    ax = float(np.linalg.norm(x))
    if ax > 2 * supp:
        # eta(x) = 0: only y in the support of eta contributes, smooth there
        r, w = composite_gauss(np.linspace(0.0, supp, 5), m)
        pts = (r[:, None, None] * dirs[None]).reshape(-1, n)
        wt = ((w * r ** (n - 1))[:, None] * dw[None]).ravel()
        vals = np.abs(eta(pts)) * np.abs(px - psi(pts)) * norm_nd(x - pts) ** (-n - 2 * s)
        return float(np.dot(wt, vals))
    R = 64.0 + ax + supp
    brk = np.concatenate([[0.0], geometric_breaks(1e-8, R)])
    r, w = composite_gauss(brk, m)
    pts = (x + r[:, None, None] * dirs[None]).reshape(-1, n)
    wt = ((w * r ** (-1 - 2 * s))[:, None] * dw[None]).ravel()
    vals = np.abs(ex - eta(pts)) * np.abs(px - psi(pts))
    total = float(np.dot(wt, vals))
    # beyond R: eta(y) = 0 and |psi(x) - psi(y)| <= 1
    total += abs(ex) * sphere_area(n) * R ** (-2 * s) / (2 * s)
    return total


def decay_bound_report(eta: ScalarField, psi: ScalarField, s: float, sample_xs=None, r0: float = 0.25) -> DecayReport:
    """K1 = |psi (-Delta)^s eta| and K2 = int |eta(x)-eta(y)||psi(x)-psi(y)| / |x-y|^(n+2s) dy.

    C is fitted as 1.25 times the largest weighted value on |x| <= 2 and
    must dominate K_i (1 + |x|^(n+2s)) at every sample, including the far ones.
    """
    s = check_order(s)
    n = eta.dim
    if eta.tail.kind != "compact":
        raise ValueError("the cutoff must have compact support")
    xs = decay_samples(n, r0) if sample_xs is None else as_points(sample_xs, n)
    k1 = np.array([abs(float(psi(x)) * eval_fraclap(eta, x, s)[0]) for x in xs])
    k2 = np.array([_k2(eta, psi, s, x) for x in xs])
    ax = norm_nd(xs)
    weight = 1.0 + ax ** (n + 2 * s)
    near = ax <= 2.0
    C = 1.25 * float(max(np.max((k1 * weight)[near]), np.max((k2 * weight)[near])))
    passed = bool(np.all(k1 * weight <= C) and np.all(k2 * weight <= C))
    return DecayReport(xs, k1, k2, C, passed)


def barrier_cutoff(dim: int, r0: float) -> ScalarField:
    """eta = 1 on B_{r0/2}, 0 outside B_{3 r0 / 4}."""
    return radial_cutoff(dim, r0 / 2, 0.75 * r0)


def localized_remainder(phi: ScalarField, eps: float) -> ScalarField:
    """rho_eps (phi - eta (phi(0) + x . grad phi(0))) with eta = 1 on B_{1/4}, 0 outside B_{1/2},
    and rho_eps(x) = eta(x / (2 eps))."""
    n = phi.dim
    zero = np.zeros(n)
    p0 = float(phi(zero))
    g0 = phi.gradient(zero[None, :])[0]
    eta = radial_cutoff(n, 0.25, 0.5)
    lin = ScalarField(lambda p: p0 + p @ g0, n, TailProfile.algebraic(abs(p0) + float(np.linalg.norm(g0)), -1.0), grad=lambda p: np.broadcast_to(g0, np.shape(p)).copy())
    psi = phi - eta * lin
    rho = radial_cutoff(n, eps / 2, eps)
    out = rho * psi
    out.scale = eps / 2
    return out


def remainder_smallness_report(phi: ScalarField, s: float, eps_values=(0.1, 0.05), sample_xs=None) -> dict:
    """|(-Delta)^s (rho_eps psi)| (1 + |x|^(n+2s)) / (eps^(2s) + eps^(2-2s)) against a constant fitted at the first eps."""
    s = check_order(s)
    n = phi.dim
    if sample_xs is None:
        # radii scaled with every eps so that each run sees the others' profile positions
        dirs = _directions(n)[:2]
        radii = {0.0, 0.3, 1.0, 2.0, 10.0} | {t * e for t in (0.3, 0.7, 0.9, 1.5) for e in eps_values}
        kinks = [0.25, 0.5] + [k * e for e in eps_values for k in (0.5, 1.0)]
        radii = [ri for ri in sorted(radii) if min(abs(ri - k) for k in kinks) > 1e-9]
        sample_xs = np.array([ri * d for ri in radii for d in dirs])
    xs = as_points(sample_xs, n)
    weight = 1.0 + norm_nd(xs) ** (n + 2 * s)
    scaled = {}
    for eps in eps_values:
        f = localized_remainder(phi, eps)
        vals = np.array([eval_fraclap(f, x, s)[0] for x in xs])
        scaled[eps] = np.abs(vals) * weight / (eps ** (2 * s) + eps ** (2 - 2 * s))
    C = 1.25 * float(np.max(scaled[eps_values[0]]))
    per_eps = {f"{e:g}": float(np.max(v)) for e, v in scaled.items()}
    return {"fitted_C": C, "max_scaled": per_eps, "passed": all(np.max(v) <= C for v in scaled.values())}
