"""Mollification by a smooth radial bump and drift commutator estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from .field_core import (
    CoefficientSet,
    ScalarField,
    TailProfile,
    as_point,
    as_points,
    check_dimension,
    composite_gauss,
    gauss_legendre,
    norm_nd,
    polar_nodes,
    quad_budget,
    sphere_area,
    sphere_rule,
)
from .fraclap_op import EvalBudget, eval_fraclap


def _bump(r):
    r = np.asarray(r, dtype=float)
    inside = r < 1
    safe = np.where(inside, r, 0.0)
    return np.where(inside, np.exp(-1.0 / (1.0 - safe**2)), 0.0)


@lru_cache(maxsize=None)
def bump_mass(n: int) -> float:
    """Z = integral of exp(-1/(1-|y|^2)) over the unit ball of R^n."""
    val, _ = integrate.quad(lambda r: float(_bump(r)) * r ** (n - 1), 0, 1, epsabs=1e-15, epsrel=1e-13, limit=200)
    return sphere_area(n) * val


@lru_cache(maxsize=None)
def _unit_ball_rule(n: int, radial: int, order: int):
    """Nodes z on B_1 with weights for j(z) dz (normalized to unit sum) and grad j(z) dz."""
    # panels crowd the rim where exp(-1/(1-r^2)) flattens out
    r, wr = composite_gauss((0.0, 0.6, 0.85, 0.95, 1.0), max(radial // 2, 4))
    dirs, dw = sphere_rule(n, order)
    z, w = polar_nodes(np.zeros(n), r, wr, dirs, dw)
    rz = norm_nd(z)
    jz = _bump(rz) / bump_mass(n)
    wj = w * jz
    wj = wj / wj.sum()
    # grad j = j(r) * (-2 r / (1 - r^2)^2) * z / r
    gfac = jz * (-2.0 / (1.0 - rz**2) ** 2)
    wg = (w * gfac)[:, None] * z
    for a in (z, wj, wg):
        a.flags.writeable = False
    return z, wj, wg


@dataclass(frozen=True)
class MollifierKernel:
    """j(y) = exp(-1/(1-|y|^2)) / Z on the unit ball, scaled to j_delta(y) = delta^-n j(y/delta)."""

    delta: float
    dim: int
    radial_order: int = 16
    sphere_order: int | None = None

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("mollification radius must be positive")
        check_dimension(self.dim)

    @property
    def normalization(self) -> float:
        return bump_mass(self.dim)

    def j(self, y) -> np.ndarray:
        return _bump(norm_nd(y)) / self.normalization

    def j_delta(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return self.delta ** (-self.dim) * self.j(y / self.delta)

    def rule(self):
        b = quad_budget()
        order = self.sphere_order or {1: 2, 2: 40 * b - 1, 3: 14 * b - 1}[self.dim]
        return _unit_ball_rule(self.dim, self.radial_order * b, order)

    def moment(self, k: int) -> float:
        """Integral of |z|^k j(z) over the unit ball."""
        n = self.dim
        val, _ = integrate.quad(lambda r: float(_bump(r)) * r ** (n - 1 + k), 0, 1, epsabs=1e-15, epsrel=1e-13)
        return sphere_area(n) * val / self.normalization


def _check_inside(x: np.ndarray, delta: float, domain_radius: float | None):
    if domain_radius is not None and float(np.linalg.norm(x)) + delta > domain_radius:
        raise ValueError(f"B_delta(x) leaves the domain: |x| + delta > {domain_radius}")


def mollify(u: ScalarField, k: MollifierKernel, x, domain_radius: float | None = None) -> float:
    """J_delta u(x) = integral of j_delta(x - y) u(y) dy."""
    x = as_point(x, k.dim)
    _check_inside(x, k.delta, domain_radius)
    z, wj, _ = k.rule()
    return float(np.dot(wj, u(x - k.delta * z)))


def grad_mollify(u: ScalarField, k: MollifierKernel, x) -> np.ndarray:
    """Gradient of J_delta u by differentiating the kernel."""
    x = as_point(x, k.dim)
    z, _, wg = k.rule()
    return (u(x - k.delta * z) @ wg) / k.delta


def mollified_field(u: ScalarField, k: MollifierKernel) -> ScalarField:
    """J_delta u as a field (same quadrature rule at every point)."""
    if u.dim != k.dim:
        raise ValueError("dimension mismatch")
    z, wj, wg = k.rule()
    dz = k.delta * z

    def f(p):
        p = np.asarray(p, dtype=float)
        vals = u((p[..., None, :] - dz).reshape(-1, k.dim)).reshape(p.shape[:-1] + (len(z),))
        return vals @ wj

    def g(p):
        p = np.asarray(p, dtype=float)
        vals = u((p[..., None, :] - dz).reshape(-1, k.dim)).reshape(p.shape[:-1] + (len(z),))
        return (vals @ wg) / k.delta

    tail = u.tail
    if tail.kind == "compact":
        tail = TailProfile.compact(tail.radius + k.delta)
    rough = len(u.singular_points) > 0 or len(u.kinks) > 0
    scale = k.delta if rough else max(u.scale, k.delta)
    return ScalarField(f, k.dim, tail, scale=scale, grad=g, name=f"J[{u.name}]")


def indicator_field(u: ScalarField, threshold: float = 0.0) -> ScalarField:
    """1 where u > threshold, 0 elsewhere."""
    tail = u.tail if u.tail.kind == "compact" else TailProfile.bounded(0.0)
    return ScalarField(lambda p: (u(p) > threshold).astype(float), u.dim, tail, name=f"1[{u.name}>0]")


# ------------------------------------------------------------- commutators


@dataclass
class CommutatorReport:
    grid: np.ndarray
    n_delta_values: np.ndarray
    l1_norm: float
    bound_rhs: np.ndarray | None
    weights: np.ndarray
    delta: float
    rejected: list = field(default_factory=list)

    def bound_holds(self, slack: float = 1e-6) -> bool:
        if self.bound_rhs is None:
            raise ValueError("no bound was evaluated for this report")
        return bool(np.all(np.abs(self.n_delta_values) <= self.bound_rhs + slack))

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "points": int(len(self.grid)),
            "l1_norm": self.l1_norm,
            "max_abs_n_delta": float(np.max(np.abs(self.n_delta_values))) if len(self.grid) else 0.0,
            "bound_holds": None if self.bound_rhs is None else self.bound_holds(),
            "rejected": [list(map(float, p)) for p in self.rejected],
        }


def commutator_value(u: ScalarField, coeffs: CoefficientSet, k: MollifierKernel, x) -> float:
    """N_delta(x) = b(x) . grad J_delta u(x) - J_delta(b . grad u)(x).

    Evaluated as the integral over B_1 of
    u(x - dz) [div b(x - dz) j(z) - (b(x - dz) - b(x)) . grad j(z) / d],
    so that no derivative of u is needed.
    """
    x = as_point(x, k.dim)
    z, wj, wg = k.rule()
    y = x - k.delta * z
    uy = u(y)
    bx = coeffs.b(x[None, :])[0]
    db = coeffs.b(y) - bx
    return float(np.dot(wj, uy * coeffs.div_b(y)) - np.dot(uy, np.sum(db * wg, axis=-1)) / k.delta)


def commutator_report(
    u: ScalarField,
    coeffs: CoefficientSet,
    k: MollifierKernel,
    grid,
    weights=None,
    domain_radius: float | None = None,
    lipschitz: float | None = None,
    with_bound: bool = True,
) -> CommutatorReport:
    """N_delta on a grid, its weighted L1 norm and the pointwise bound
    K delta |grad u|_{L^inf({u>0})} J_delta(1_{u>0})(x) with K = coeffs.bound_M."""
    pts = as_points(grid, k.dim)
    w = np.full(len(pts), 1.0 / max(len(pts), 1)) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (len(pts),):
        raise ValueError("weights must match the grid")
    keep, rejected = [], []
    for i, p in enumerate(pts):
        if domain_radius is not None and float(np.linalg.norm(p)) + k.delta > domain_radius:
            rejected.append(p)
        else:
            keep.append(i)
    pts, w = pts[keep], w[keep]
    vals = np.array([commutator_value(u, coeffs, k, p) for p in pts])
    bound = None
    if with_bound:
        L = lipschitz if lipschitz is not None else positive_set_lipschitz(u, pts, k.delta)
        ind = indicator_field(u)
        chi = np.array([mollify(ind, k, p) for p in pts])
        bound = coeffs.bound_M * k.delta * L * chi
    return CommutatorReport(pts, vals, float(np.dot(w, np.abs(vals))), bound, w, k.delta, rejected)


def positive_set_lipschitz(u: ScalarField, pts, delta: float, samples: int = 4000) -> float:
    """Sampled sup of |grad u| over {u > 0} near the given points."""
    pts = np.asarray(pts, dtype=float)
    n = pts.shape[1]
    lo, hi = pts.min(axis=0) - 2 * delta, pts.max(axis=0) + 2 * delta
    per = max(3, int(round(samples ** (1.0 / n))))
    axes = [np.linspace(lo[i], hi[i], per) for i in range(n)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    pos = mesh[u(mesh) > 0]
    if len(pos) == 0:
        return 0.0
    return float(np.max(norm_nd(u.gradient(pos))))


def square_grid(dim: int, half_width: float, per_axis: int, center=None):
    """Cell-centered grid on a cube with the cell volumes as weights."""
    c = np.zeros(dim) if center is None else as_point(center, dim)
    h = 2 * half_width / per_axis
    ax = -half_width + h * (np.arange(per_axis) + 0.5)
    mesh = np.stack(np.meshgrid(*([ax] * dim), indexing="ij"), axis=-1).reshape(-1, dim) + c
    return mesh, np.full(len(mesh), h**dim)


# ----------------------------------------------------- commuting with (-Delta)^s


def mollified_fraclap_commutes(
    u: ScalarField,
    s: float,
    k: MollifierKernel,
    x,
    domain_radius: float | None = None,
    budget: EvalBudget | None = None,
) -> tuple[float, float]:
    """((-Delta)^s J_delta u (x), J_delta[(-Delta)^s u](x)) by independent quadrature paths."""
    x = as_point(x, k.dim)
    _check_inside(x, k.delta, domain_radius)
    first, _ = eval_fraclap(mollified_field(u, k), x, s, budget)
    z, wj, _ = k.rule()
    inner = np.array([eval_fraclap(u, x - k.delta * zi, s, budget)[0] for zi in z])
    return first, float(np.dot(wj, inner))



# ------------------------------------------------------------ radial profiles


def _angular_bump(n: int, r: np.ndarray, rho: np.ndarray, delta: float, m: int, moment: int = 0) -> np.ndarray:
    """Integral over the unit sphere of j_delta(|r e1 - rho w|) w_1^moment."""
    Z = bump_mass(n)

    def jd(d2):
        q = d2 / delta**2
        inside = q < 1
        safe = np.where(inside, q, 0.0)
        return np.where(inside, np.exp(-1.0 / (1.0 - safe)), 0.0) / (Z * delta**n)

    if n == 1:
        return jd((r - rho) ** 2) + (-1.0) ** moment * jd((r + rho) ** 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        half = (delta**2 - (r - rho) ** 2) / (4.0 * r * rho)
    half = np.where(np.isfinite(half), half, 1.0)
    thmax = 2.0 * np.arcsin(np.sqrt(np.clip(half, 0.0, 1.0)))
    tau, wt = gauss_legendre(m, 0.0, 1.0)
    th = thmax[..., None] * tau
    d2 = (r - rho)[..., None] ** 2 + 4.0 * (r * rho)[..., None] * np.sin(th / 2) ** 2
    vals = jd(d2) * np.cos(th) ** moment
    if n == 2:
        vals = 2.0 * vals
    else:
        vals = 2.0 * math.pi * np.sin(th) * vals
    return thmax * np.sum(vals * wt, axis=-1)


def radial_mollify(f, r, delta: float, n: int, lower: float = 0.0, m: int = 40, moment: int = 0) -> np.ndarray:
    """J_delta of a radial profile at radii ``r``.

    ``f`` is a vectorized profile rho -> f(rho), taken as zero for
    rho < ``lower`` (so a kink at ``lower`` is integrated exactly). With
    ``moment=1`` the angular weight w . e1 is included, which turns a radial
    derivative profile into the radial component of J_delta of its gradient.
    """
    check_dimension(n)
    r = np.atleast_1d(np.asarray(r, dtype=float))
    shape = r.shape
    r = r.ravel()
    b = quad_budget()
    tau, wt = gauss_legendre(40 * b, 0.0, 1.0)
    a = np.maximum(np.maximum(r - delta, 0.0), lower)
    c = np.maximum(r + delta, a)
    mid = np.clip(r, a, c)
    # two panels [a, mid] and [mid, c]; empty panels carry zero weight
    rho = np.concatenate([a[:, None] + (mid - a)[:, None] * tau, mid[:, None] + (c - mid)[:, None] * tau], axis=1)
    w = np.concatenate([(mid - a)[:, None] * wt, (c - mid)[:, None] * wt], axis=1)
    rr = np.broadcast_to(r[:, None], rho.shape)
    with np.errstate(invalid="ignore"):
        A = _angular_bump(n, rr, rho, delta, m * b, moment)
    vals = np.where(w > 0, f(rho.ravel()).reshape(rho.shape), 0.0)
    out = np.sum(w * rho ** (n - 1) * A * vals, axis=1)
    return out.reshape(shape)
