"""Pointwise evaluation of (-Delta)^s, the Laplacian and the drift operator.

The fractional operator uses the normalisation whose Fourier symbol is
|xi|^(2s).  Singular points declared by a field are handled with a smooth
partition of unity: a graded polar patch around the singularity and the
ordinary polar rule around the evaluation point for the remainder.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gamma, hyp2f1

from .field_core import (
    CoefficientSet,
    QuadratureRule,
    ScalarField,
    as_point,
    axial_sphere_rule,
    check_dimension,
    check_order,
    composite_gauss,
    cutoff,
    fd_gradient,
    gauss_legendre,
    geometric_breaks,
    graded_gauss,
    polar_nodes,
    quad_budget,
    sphere_rule,
)

DEFAULT_FAR_RADIUS = 50.0


def frac_constant(n: int, s: float) -> float:
    """C_{n,s} = 4^s Gamma(n/2 + s) / (pi^(n/2) |Gamma(-s)|)."""
    return float(4.0**s * gamma(n / 2 + s) / (math.pi ** (n / 2) * abs(gamma(-s))))


def fundamental_constant(n: int, s: float) -> float:
    """Constant of Phi_s = c |x|^(2s-n), valid for n > 2s."""
    if not n > 2 * s:
        raise ValueError(f"fundamental solution needs n > 2s, got n={n}, s={s}")
    return float(gamma(n / 2 - s) / (4.0**s * math.pi ** (n / 2) * gamma(s)))


def riesz_power_constant(n: int, s: float, alpha: float) -> float:
    """K with (-Delta)^s |x|^(-alpha) = K |x|^(-alpha-2s) for 0 < alpha < n - 2s."""
    return float(
        4.0**s
        * gamma((n - alpha) / 2)
        * gamma((alpha + 2 * s) / 2)
        / (gamma(alpha / 2) * gamma((n - alpha - 2 * s) / 2))
    )


def endpoint_widening(s: float) -> float:
    """Tolerance factor for orders close to 0 or 1."""
    return max(1.0, 0.1 / min(s, 1.0 - s))


@dataclass(frozen=True)
class OperatorSpec:
    """Principal part (classical or fractional) plus optional coefficients."""

    kind: str
    dim: int
    s: float | None = None
    coeffs: CoefficientSet | None = None

    def __post_init__(self):
        check_dimension(self.dim)
        if self.kind not in ("classical", "fractional"):
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if self.kind == "fractional":
            check_order(self.s)
        if self.coeffs is not None and self.coeffs.dim != self.dim:
            raise ValueError("coefficient dimension does not match operator dimension")

    @property
    def normalization(self) -> float:
        return frac_constant(self.dim, self.s) if self.kind == "fractional" else 1.0

    @property
    def is_fractional(self) -> bool:
        return self.kind == "fractional"

    def describe(self) -> dict:
        out = {"kind": self.kind, "n": self.dim}
        if self.is_fractional:
            out["s"] = self.s
            out["C_ns"] = self.normalization
        out["M"] = 0.0 if self.coeffs is None else self.coeffs.bound_M
        return out


@dataclass(frozen=True)
class EvalBudget:
    """Quadrature settings for one evaluation.

    ``rule`` may fix the near radius, far radius and sphere rule; the
    remaining fields set per-panel Gauss orders.  Evaluations return their
    achieved error estimate instead of mutating the budget.
    """

    rule: QuadratureRule | None = None
    target_tol: float = 1e-8
    achieved_error_estimate: float = float("nan")
    radial_order: int = 12
    near_order: int = 24
    sphere_order: int | None = None

    def __post_init__(self):
        if not self.target_tol > 0:
            raise ValueError("target_tol must be positive")

    def with_error(self, err: float) -> "EvalBudget":
        return EvalBudget(self.rule, self.target_tol, float(err), self.radial_order, self.near_order, self.sphere_order)


def _sphere(n: int, budget: EvalBudget, coarse: bool):
    if budget.rule is not None and not coarse:
        return budget.rule.sphere_nodes, budget.rule.sphere_weights
    b = quad_budget()
    if budget.sphere_order is not None:
        order = budget.sphere_order * b
    else:
        order = {1: 2, 2: 96 * b - 1, 3: 24 * b - 1}[n]
    if coarse and n > 1:
        order = max(2, int(order * 0.6))
    return sphere_rule(n, order)


def _near_radius(u: ScalarField, x: np.ndarray, budget: EvalBudget) -> float:
    feat = float(u.feature_distance(x))
    if feat == 0.0:
        raise ValueError("field is not evaluable at a declared singular point or kink")
    if budget.rule is not None:
        rho = budget.rule.near_radius
        if rho > 0.5 * feat:
            raise ValueError("near radius of the supplied rule reaches a non-smooth feature of the field")
        return rho
    return min(0.1, 0.25 * u.scale, 0.5 * feat)


def _far_radius(u: ScalarField, x: np.ndarray, rho: float, budget: EvalBudget) -> float:
    if budget.rule is not None:
        return budget.rule.far_radius
    R = DEFAULT_FAR_RADIUS
    if u.tail.kind == "compact":
        R = min(R, float(np.linalg.norm(x)) + u.tail.radius)
    return max(R, 4.0 * rho)


def singular_patches(points: np.ndarray, x: np.ndarray, inner: float, outer: float):
    """Centers (relative to x) and radii of cutoff patches for singular points in inner < |y| < outer."""
    zs = points - x
    out = []
    for i, z in enumerate(zs):
        d = float(np.linalg.norm(z))
        if d >= outer or d <= inner:
            continue
        eta = min(0.5 * d, d - inner, outer - d)
        others = np.delete(zs, i, axis=0)
        if len(others):
            eta = min(eta, 0.5 * float(np.min(np.linalg.norm(others - z, axis=-1))))
        if eta > 1e-12:
            out.append((z, 0.999 * eta))
    return out


def patch_nodes(eta: float, dirs, dw, m: int, power: float = 6.0):
    """Graded polar offsets on B_eta(0) with cutoff weights.

    Offsets are returned separately from the patch center so that callers can
    add them to the singular point itself; adding them to x + z instead would
    round the smallest offsets away and land on the pole.
    """
    # graded toward the pole inside eta/2, plain panels across the cutoff transition
    t0, w0 = graded_gauss(0.0, 0.5 * eta, m, power)
    t1, w1 = composite_gauss(np.linspace(0.5 * eta, eta, 5), max(4, m // 2))
    t, wt = np.concatenate([t0, t1]), np.concatenate([w0, w1])
    off, w = polar_nodes(np.zeros(dirs.shape[1]), t, wt, dirs, dw)
    return off, w * cutoff(np.linalg.norm(off, axis=-1) / eta)


def patch_complement(pts: np.ndarray, patches) -> np.ndarray:
    weight = np.ones(pts.shape[0])
    for z, eta in patches:
        weight -= cutoff(np.linalg.norm(pts - z, axis=-1) / eta)
    return weight


def _tail_map(R: float, power: float, s: float, m: int):
    """Nodes on [R, inf) making r^(-1-2s-power) dr uniform."""
    q = 1.0 / (power + 2.0 * s)
    tau, wt = gauss_legendre(m, 0.0, 1.0)
    r = R * tau ** (-q)
    return r, wt * q * R * tau ** (-q - 1.0)


def _fraclap_sum(u: ScalarField, x: np.ndarray, s: float, rho: float, R: float, budget: EvalBudget, coarse: bool):
    n = u.dim
    b = quad_budget()
    scale = 2.0 / 3.0 if coarse else 1.0
    m_near = max(4, int(budget.near_order * b * scale))
    m_mid = max(4, int(budget.radial_order * b * scale))
    dirs, dw = _sphere(n, budget, coarse)
    ux = float(u(x))
    area = float(np.sum(dw))

    # near field: symmetric second difference D(r) ~ c2 r^2; the r^2 part is
    # integrated exactly and the remainder, which is O(r^4), by Gauss on r = rho tau^2
    def diff2(radius):
        yy = radius * dirs
        return 2 * ux - u(x + yy) - u(x - yy)

    r_c = 1e-3 * rho
    c2 = (4.0 * diff2(r_c) - 0.25 * diff2(2 * r_c)) / (3.0 * r_c**2)
    tau, wt = gauss_legendre(m_near, 0.0, 1.0)
    r = rho * tau**2
    rw = wt * 2.0 * rho * tau * r ** (-1.0 - 2 * s)
    y = r[:, None, None] * dirs[None, :, :]
    rem = 2 * ux - u(x + y) - u(x - y) - (r**2)[:, None] * c2[None, :]
    # below r_c the remainder is pure rounding
    rem[r < r_c] = 0.0
    near = 0.5 * float(np.einsum("i,j,ij->", rw, dw, rem))
    near += 0.5 * float(np.dot(dw, c2)) * rho ** (2 - 2 * s) / (2 - 2 * s)

    # mid field with partition of unity around singular points
    patches = singular_patches(u.singular_points, x, rho, R)
    rr, wr = composite_gauss(geometric_breaks(rho, R), m_mid)
    pts, w = polar_nodes(np.zeros(n), rr, wr, dirs, dw)
    kern = np.linalg.norm(pts, axis=-1) ** (-n - 2 * s)
    vals = ux - u(x + pts)
    if patches:
        w = w * patch_complement(pts, patches)
    mid = float(np.dot(w * kern, vals))
    for z, eta in patches:
        off, pw = patch_nodes(eta, dirs, dw, max(8, int(32 * b * scale)))
        pk = np.linalg.norm(z + off, axis=-1) ** (-n - 2 * s)
        mid += float(np.dot(pw * pk, ux - u((x + z) + off)))

    # far field beyond R
    tail = ux * area * R ** (-2 * s) / (2 * s)
    tail_err = 0.0
    kind = u.tail.kind
    exact_compact = kind == "compact" and R >= float(np.linalg.norm(x)) + u.tail.radius
    if not exact_compact:
        if kind == "bounded":
            tail_err = 2.0 ** (n + 2 * s) * u.tail.bound
        else:
            power = u.tail.power if kind == "algebraic" else 0.0
            tr, tw = _tail_map(R, power, s, max(6, int(20 * b * scale)))
            tpts, tpw = polar_nodes(np.zeros(n), tr, tw, dirs, dw)
            tk = np.linalg.norm(tpts, axis=-1) ** (-n - 2 * s)
            tail -= float(np.dot(tpw * tk, u(x + tpts)))
    return near + mid + tail, tail_err


def _outside_support_sum(u: ScalarField, x: np.ndarray, s: float, supp: float, m: int) -> float:
    n = u.dim
    ax = float(np.linalg.norm(x))
    d = ax - supp
    # radial panels graded toward the side of the support facing x, directions clustered toward x
    radii = [float(np.linalg.norm(p)) for p in u.singular_points]
    radii += [float(np.linalg.norm(c)) + r for c, r in u.kinks] + [max(float(np.linalg.norm(c)) - r, 0.0) for c, r in u.kinks]
    grade = supp - geometric_breaks(min(0.5 * d, 0.25 * supp), supp) if d < 0.5 * supp else []
    brk = np.unique(np.concatenate([[0.0, supp], grade, [v for v in radii if 0 < v < supp]]))
    r, w = composite_gauss(brk, m)
    dirs, dw = axial_sphere_rule(n, x, min(0.5, d / ax), m)
    pts, wt = polar_nodes(np.zeros(n), r, w, dirs, dw)
    return -float(np.dot(wt, u(pts) * np.linalg.norm(x - pts, axis=-1) ** (-n - 2 * s)))


def _outside_support(u: ScalarField, x: np.ndarray, s: float, supp: float) -> tuple[float, float]:
    # u(x) = 0 and the kernel is smooth on the support: a plain integral over the support
    b = quad_budget()
    fine = _outside_support_sum(u, x, s, supp, 24 * b)
    rough = _outside_support_sum(u, x, s, supp, 16 * b)
    C = frac_constant(u.dim, s)
    return C * fine, C * abs(fine - rough) * endpoint_widening(s) + 1e-15 * abs(C * fine)


def eval_fraclap(u: ScalarField, x, s: float, budget: EvalBudget | None = None) -> tuple[float, float]:
    """(-Delta)^s u(x) and an error estimate.

    The estimate is the difference between the default rule and a coarser
    one, plus any declared tail bound, widened near s = 0 and s = 1.
    """
    s = check_order(s)
    budget = budget or EvalBudget()
    x = as_point(x, u.dim)
    if not u.tail.admits(s):
        raise ValueError(f"tail power {u.tail.power} is incompatible with s={s}: weighted integral diverges")
    supp = u.tail.radius if u.tail.kind == "compact" else 0.0
    if budget.rule is None and supp > 0 and np.linalg.norm(x) > supp * (1 + 1e-9):
        return _outside_support(u, x, s, supp)
    rho = _near_radius(u, x, budget)
    R = _far_radius(u, x, rho, budget)
    fine, tail_err = _fraclap_sum(u, x, s, rho, R, budget, coarse=False)
    rough, _ = _fraclap_sum(u, x, s, rho, R, budget, coarse=True)
    C = frac_constant(u.dim, s)
    err = C * (abs(fine - rough) + tail_err) * endpoint_widening(s) + 1e-15 * abs(C * fine)
    return C * fine, err


def eval_fraclap_many(u: ScalarField, xs, s: float, budget: EvalBudget | None = None) -> tuple[np.ndarray, np.ndarray]:
    xs = np.asarray(xs, dtype=float).reshape(-1, u.dim)
    out = np.array([eval_fraclap(u, x, s, budget) for x in xs]).reshape(-1, 2)
    return out[:, 0], out[:, 1]


# ----------------------------------------------------------- radial reduction


def _kernel_2d(r: float, rho: np.ndarray, s: float) -> np.ndarray:
    nu = 1.0 + s
    w = 4.0 * r * rho / (r + rho) ** 2
    omw = ((r - rho) / (r + rho)) ** 2
    out = np.empty_like(rho)
    direct = omw > 0.5
    out[direct] = hyp2f1(nu, 0.5, 1.0, w[direct])
    near = ~direct
    if np.any(near):
        o = omw[near]
        t1 = gamma(-0.5 - s) / (gamma(-s) * math.sqrt(math.pi)) * hyp2f1(nu, 0.5, nu + 0.5, o)
        t2 = o ** (-0.5 - s) * gamma(0.5 + s) / (gamma(nu) * math.sqrt(math.pi)) * hyp2f1(-s, 0.5, 0.5 - s, o)
        out[near] = t1 + t2
    return 2.0 * math.pi * (r + rho) ** (-2.0 * nu) * out


def angular_kernel(n: int, s: float, r: float, rho) -> np.ndarray:
    """Integral over the unit sphere of |r e1 - rho theta|^(-n-2s)."""
    rho = np.asarray(rho, dtype=float)
    if n == 1:
        return np.abs(r - rho) ** (-1 - 2 * s) + (r + rho) ** (-1 - 2 * s)
    if n == 3:
        tiny = rho < 1e-6 * r
        safe = np.where(tiny, r, rho)
        # |r - rho|^-p - (r + rho)^-p without cancellation when rho/r is far from 1
        p = 1 + 2 * s
        big = np.maximum(r, safe)
        ratio = np.minimum(r, safe) / big
        with np.errstate(divide="ignore"):
            diff = big ** (-p) * np.exp(-p * np.log1p(ratio)) * np.expm1(-p * (np.log1p(-ratio) - np.log1p(ratio)))
        val = 2 * math.pi * diff / (r * safe * p)
        return np.where(tiny, 4 * math.pi * r ** (-3 - 2 * s), val)
    if n == 2:
        if abs(s - 0.5) < 1e-6:
            # the connection formula degenerates at s = 1/2; a symmetric average is second order
            h = 1e-5
            return 0.5 * (_kernel_2d(r, rho, s - h) + _kernel_2d(r, rho, s + h))
        return _kernel_2d(r, rho, s)
    raise ValueError(f"radial reduction supports n <= 3, got {n}")


@dataclass(frozen=True)
class RadialProfile:
    """A radial function f(|x|) with its non-smooth radii and transition layers.

    ``kinks`` are radii where f is continuous but not smooth; ``layers``
    are (radius, width) pairs where f is smooth but varies on the scale
    ``width``. ``decay`` is a power p with f = O(rho^-p) at infinity.
    """

    f: Callable[[np.ndarray], np.ndarray]
    kinks: tuple = ()
    layers: tuple = ()
    singular_origin: bool = False
    decay: float = 0.0


def _window(r: float, prof: RadialProfile) -> float:
    h = 0.5 * r
    for k in prof.kinks:
        h = min(h, 0.5 * abs(r - k))
    for c, wdt in prof.layers:
        if abs(r - c) < 2 * wdt:
            h = min(h, 0.5 * wdt)
    if h <= 0:
        raise ValueError(f"radius {r} sits on a kink of the profile")
    return h


def _radial_sum(prof: RadialProfile, r: float, n: int, s: float, m: int) -> float:
    f = prof.f
    fr = float(f(np.array([r]))[0])
    h = _window(r, prof)
    feats = list(prof.kinks) + [c + d for c, w in prof.layers for d in (-w, 0.0, w)]
    top = 64.0 * max([r] + [abs(v) for v in feats])

    def g(rho):
        return (fr - f(rho)) * rho ** (n - 1) * angular_kernel(n, s, r, rho)

    # symmetric window: g(r+t) + g(r-t) ~ A t^(1-2s); that part is exact,
    # the remainder is integrated on t = h tau^2 and dropped where it is rounding
    def pair(tt):
        return g(r + tt) + g(r - tt)

    t_c = 1e-3 * h
    e = 1.0 - 2.0 * s
    A = (4.0 * pair(np.array([t_c]))[0] / t_c**e - pair(np.array([2 * t_c]))[0] / (2 * t_c) ** e) / 3.0
    tau, wt = gauss_legendre(2 * m, 0.0, 1.0)
    t = h * tau**2
    tw = wt * 2.0 * h * tau
    rem = pair(t) - A * t**e
    rem[t < t_c] = 0.0
    total = float(np.dot(tw, rem)) + A * h ** (2 - 2 * s) / (2 - 2 * s)

    depth = 50 if prof.singular_origin else 12
    cand = [r - h * 2.0**j for j in range(64) if h * 2.0**j < r]
    cand += [r * 2.0**-k for k in range(1, depth + 1)] + [0.0]
    cand += [v for v in feats if 0 < v < r - h]
    left = np.unique([c for c in cand if 0 <= c <= r - h] + [r - h])
    cand = [r + h * 2.0**j for j in range(64) if h * 2.0**j < top] + [top]
    cand += [2.0**k * r for k in range(1, 8)] + [v for v in feats if r + h < v < top]
    right = np.unique([c for c in cand if r + h <= c <= top] + [r + h])
    for br in (left, right):
        x, w = composite_gauss(br, m)
        if x.size:
            total += float(np.dot(w, g(x)))

    # the constant and the decaying part of the tail get separate maps
    rr, rw = _tail_map(top, 0.0, s, 2 * m)
    total += fr * float(np.dot(rw, rr ** (n - 1) * angular_kernel(n, s, r, rr)))
    rr, rw = _tail_map(top, prof.decay, s, 2 * m)
    total -= float(np.dot(rw, f(rr) * rr ** (n - 1) * angular_kernel(n, s, r, rr)))
    return total


def fraclap_radial(prof: RadialProfile, r: float, s: float, n: int, m: int = 16) -> tuple[float, float]:
    """(-Delta)^s of a radial function at |x| = r via the 1-D reduction.

    The P.V. integral becomes an integral over rho in (0, inf) against the
    spherical average of the kernel, which has a closed form for n <= 3.
    """
    s = check_order(s)
    check_dimension(n)
    if not r > 0:
        raise ValueError("radial reduction needs r > 0")
    b = quad_budget()
    fine = _radial_sum(prof, float(r), n, s, m * b)
    rough = _radial_sum(prof, float(r), n, s, max(4, (2 * m * b) // 3))
    C = frac_constant(n, s)
    return C * fine, C * abs(fine - rough) * endpoint_widening(s) + 1e-14 * abs(C * fine)


# -------------------------------------------------------- classical operators


def _check_step(u: ScalarField, x: np.ndarray, h: float) -> None:
    if not h > 0:
        raise ValueError("stencil step must be positive")
    if h >= float(u.feature_distance(x)):
        raise ValueError("stencil step exceeds the distance to a non-smooth feature of the field")


def eval_laplacian(u: ScalarField, x, h: float = 1e-3) -> float:
    """-Delta u(x) by central second differences with one Richardson level."""
    x = as_point(x, u.dim)
    _check_step(u, x, h)
    n = u.dim
    eye = np.eye(n)

    def minus_lap(step):
        pts = np.concatenate([x + step * eye, x - step * eye])
        vals = u(pts)
        return -(float(np.sum(vals)) - 2 * n * float(u(x))) / step**2

    return (4.0 * minus_lap(0.5 * h) - minus_lap(h)) / 3.0


def gradient(u: ScalarField, x) -> np.ndarray:
    """Gradient by extrapolated central differences."""
    x = as_point(x, u.dim)
    return fd_gradient(u, x[None, :])[0]


def eval_full_operator(
    u: ScalarField, spec: OperatorSpec, x, budget: EvalBudget | None = None, *, with_error: bool = False
):
    """Principal part plus b(x).grad u(x) plus c(x) u(x)."""
    if spec.dim != u.dim:
        raise ValueError("operator and field dimensions differ")
    x = as_point(x, u.dim)
    if spec.is_fractional:
        value, err = eval_fraclap(u, x, spec.s, budget)
    else:
        value, err = eval_laplacian(u, x), 0.0
    if spec.coeffs is not None:
        co = spec.coeffs
        bx = co.b(x[None, :])[0]
        if np.any(bx):
            value += float(np.dot(bx, gradient(u, x)))
        value += float(co.c(x[None, :])[0]) * float(u(x))
    return (value, err) if with_error else value


# ------------------------------------------------------------ spectral oracle


class UnreliableOracleWarning(UserWarning):
    """Raised when the periodic grid visibly aliases the field."""


def _lattice_sum(d: np.ndarray, L: float, p: float, n: int) -> float:
    """Sum over nonzero k in Z^n of |d + k L|^(-p)."""
    if n == 1:
        K = 4000
        k = np.arange(-K, K + 1, dtype=float)
        k = k[k != 0]
        core = float(np.sum(np.abs(d[0] + k * L) ** (-p)))
        return core + 2.0 * L ** (-p) * (K + 0.5) ** (1 - p) / (p - 1)
    K = 150
    k = np.arange(-K, K + 1, dtype=float)
    k1, k2 = np.meshgrid(k, k, indexing="ij")
    mask = (k1 != 0) | (k2 != 0)
    dist = np.hypot(d[0] + k1[mask] * L, d[1] + k2[mask] * L)
    core = float(np.sum(dist ** (-p)))
    # continuum estimate of the lattice points outside the square
    Rk = (K + 0.5) * L * 2.0 / math.sqrt(math.pi)
    return core + 2 * math.pi * Rk ** (2 - p) / ((p - 2) * L**2)


def spectral_oracle(
    u: ScalarField,
    x,
    s: float,
    grid_extent: float = 16.0,
    grid_points: int = 1024,
    *,
    return_info: bool = False,
    alias_tol: float = 1e-6,
):
    """(-Delta)^s u(x) by FFT with multiplier |xi|^(2s) on a periodic box.

    The periodic images of the operator tail are subtracted with a
    monopole lattice correction.  Intended only as an independent
    cross-check.
    """
    s = check_order(s)
    n = u.dim
    if n not in (1, 2):
        raise ValueError("spectral oracle supports n = 1 or 2")
    x = as_point(x, n)
    L, N = float(grid_extent), int(grid_points)
    h = L / N
    g = -0.5 * L + h * np.arange(N)
    if n == 1:
        pts = g[:, None]
    else:
        pts = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1)
    U = u(pts)
    if not np.any(U):
        return (0.0, {"aliasing": 0.0, "reliable": True}) if return_info else 0.0
    Uh = np.fft.fftn(U)
    xi = 2 * math.pi * np.fft.fftfreq(N, d=h)
    if n == 1:
        mult = np.abs(xi) ** (2 * s)
    else:
        mult = np.hypot(xi[:, None], xi[None, :]) ** (2 * s)
    Vh = Uh * mult
    phase = [np.exp(1j * xi * (x[i] - g[0])) for i in range(n)]
    if n == 1:
        periodic = float(np.real(np.dot(Vh, phase[0]))) / N
    else:
        periodic = float(np.real(phase[0] @ Vh @ phase[1])) / N**2

    # monopole correction for the periodic images of the operator tail
    mass = float(np.sum(U)) * h**n
    if mass != 0.0:
        centre = np.tensordot(U, pts, axes=(tuple(range(n)), tuple(range(n)))) * h**n / mass
        corr = frac_constant(n, s) * mass * _lattice_sum(x - centre, L, n + 2 * s, n)
    else:
        corr = 0.0
    value = periodic + corr

    amp = np.abs(Uh)
    band = np.abs(xi) > 0.8 * np.max(np.abs(xi))
    if n == 1:
        hi = float(np.max(amp[band]))
        edge = max(abs(U[0]), abs(U[-1]))
    else:
        hi = float(max(np.max(amp[band, :]), np.max(amp[:, band])))
        edge = float(max(np.max(np.abs(U[0])), np.max(np.abs(U[-1])), np.max(np.abs(U[:, 0])), np.max(np.abs(U[:, -1]))))
    aliasing = hi / float(np.max(amp)) + edge / float(np.max(np.abs(U)))
    reliable = aliasing < alias_tol
    if not reliable:
        warnings.warn(f"spectral oracle aliasing estimate {aliasing:.2e} exceeds tolerance", UnreliableOracleWarning)
    if return_info:
        return value, {"aliasing": aliasing, "reliable": reliable, "lattice_correction": corr}
    return value
