"""Fundamental solutions, potentials of measures and the exterior Poisson kernel."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import gamma, roots_jacobi

from .field_core import (
    ScalarField,
    TailProfile,
    as_point,
    axial_sphere_rule,
    check_dimension,
    check_order,
    composite_gauss,
    cutoff,
    gauss_legendre,
    geometric_breaks,
    graded_gauss,
    norm_nd,
    polar_nodes,
    quad_budget,
    sphere_area,
    sphere_order_default,
    sphere_rule,
)
from .fraclap_op import fundamental_constant


def fundamental_solution(dim: int, kind: str = "fractional", s: float | None = None) -> ScalarField:
    """Phi for -Delta (kind="classical") or (-Delta)^s (kind="fractional")."""
    n = check_dimension(dim)
    if kind == "classical":
        if n < 2:
            raise ValueError("classical fundamental solution needs n >= 2")
        if n == 2:

            def f(p):
                return -np.log(norm_nd(p)) / (2 * math.pi)

            def g(p):
                return -p / (2 * math.pi * np.sum(p**2, axis=-1))[..., None]

            # |log r| <= r^0.05 / (0.05 e) for r >= 1
            tail = TailProfile.algebraic(1.0 / (2 * math.pi * 0.05 * math.e), -0.05)
            name = "Phi(n=2)"
        else:
            c = 1.0 / ((n - 2) * sphere_area(n))

            def f(p):
                return c * norm_nd(p) ** (2 - n)

            def g(p):
                return (c * (2 - n) * norm_nd(p) ** (-n))[..., None] * p

            tail = TailProfile.algebraic(c, n - 2.0)
            name = f"Phi(n={n})"
        return ScalarField(f, n, tail, singular_points=[np.zeros(n)], grad=g, name=name)
    if kind != "fractional":
        raise ValueError(f"kind must be 'classical' or 'fractional', got {kind!r}")
    if s is None:
        raise ValueError("fractional fundamental solution needs s")
    s = check_order(s)
    if not n > 2 * s:
        raise ValueError(f"fractional fundamental solution needs n > 2s, got n={n}, s={s}")
    c = fundamental_constant(n, s)
    e = 2 * s - n

    def f(p):
        return c * norm_nd(p) ** e

    def g(p):
        return (c * e * norm_nd(p) ** (e - 2))[..., None] * p

    return ScalarField(
        f, n, TailProfile.algebraic(c, n - 2 * s), singular_points=[np.zeros(n)], grad=g, name=f"Phi_s(n={n},s={s:g})"
    )


# -------------------------------------------------------------- measures


@dataclass
class MeasureApprox:
    """Finitely many atoms plus an optional compactly supported density.

    The density vanishes outside the ball ``support_radius`` around
    ``support_center`` (taken from the density's tail when not given).
    """

    dim: int
    atoms: list = field(default_factory=list)
    density: ScalarField | None = None
    support_center: np.ndarray | None = None
    support_radius: float | None = None

    def __post_init__(self):
        check_dimension(self.dim)
        clean = []
        for loc, mass in self.atoms:
            loc = as_point(loc, self.dim)
            if not math.isfinite(mass):
                raise ValueError("atom masses must be finite")
            clean.append((loc, float(mass)))
        locs = np.array([a[0] for a in clean]).reshape(-1, self.dim)
        for i in range(len(locs)):
            if np.any(np.all(locs[i + 1 :] == locs[i], axis=-1)):
                raise ValueError("atom locations must be distinct")
        self.atoms = clean
        if self.density is not None:
            if self.density.dim != self.dim:
                raise ValueError("density dimension does not match")
            if self.support_radius is None:
                if self.density.tail.kind != "compact":
                    raise ValueError("density must have compact support")
                self.support_radius = self.density.tail.radius
            self.support_center = (
                np.zeros(self.dim) if self.support_center is None else as_point(self.support_center, self.dim)
            )

    def total_variation(self) -> float:
        tv = sum(abs(m) for _, m in self.atoms)
        if self.density is not None:
            tv += _density_integral(self, lambda y: np.abs(self.density(y)))
        return tv


def _density_integral(m: MeasureApprox, func) -> float:
    b = quad_budget()
    n = m.dim
    r, w = composite_gauss(_support_breaks(m), 16 * b)
    dirs, dw = sphere_rule(n, sphere_order_default(n))
    pts, pw = polar_nodes(m.support_center, r, w, dirs, dw)
    return float(np.dot(pw, func(pts)))


def _support_breaks(m: MeasureApprox):
    R = m.support_radius
    brk = {0.0, R}
    for c, rad in m.density.kinks:
        if np.allclose(c, m.support_center) and 0 < rad < R:
            brk.add(float(rad))
    return sorted(brk)


def _phi_kernel(n: int, s: float | None):
    if s is None:
        return fundamental_solution(n, "classical")
    return fundamental_solution(n, "fractional", s)


def riesz_potential(m: MeasureApprox, s: float | None, x, kind: str | None = None) -> float:
    """Sum of mass * Phi(x - loc) plus the integral of Phi(x - y) density(y).

    ``s=None`` (or ``kind="classical"``) uses the Newtonian kernel.
    """
    n = m.dim
    x = as_point(x, n)
    if kind == "classical":
        s = None
    phi = _phi_kernel(n, s)
    total = 0.0
    for loc, mass in m.atoms:
        if np.array_equal(loc, x):
            raise ValueError("evaluation point coincides with an atom (pole)")
        total += mass * float(phi(x - loc))
    if m.density is None:
        return total
    b = quad_budget()
    c, R = m.support_center, m.support_radius
    d = x - c
    dist = float(np.linalg.norm(d))
    if dist > R * (1 + 1e-9):
        # the kernel is smooth on the support: polar rule about its center
        return total + _density_integral(m, lambda y: phi(x - y) * m.density(y))
    # x inside the support: polar about x, each ray cut at the support boundary
    dirs, dw = sphere_rule(n, sphere_order_default(n))
    proj = dirs @ d
    exit_len = -proj + np.sqrt(np.maximum(proj**2 - dist**2 + R**2, 0.0))
    # r = L tau^power flattens r^(2s-1) from the kernel times r^(n-1)
    power = 1.0 / (2 * s) if s is not None else 2.0
    tau, wt = gauss_legendre(24 * b, 0.0, 1.0)
    val = 0.0
    for k in range(len(dirs)):
        L = exit_len[k]
        if L <= 0:
            continue
        rr = L * tau**power
        jac = wt * L * power * tau ** (power - 1.0)
        y = x + rr[:, None] * dirs[k]
        val += dw[k] * float(np.dot(jac * rr ** (n - 1), phi(rr[:, None] * dirs[k]) * m.density(y)))
    return total + val


# ------------------------------------------------------------ ball averages


def delta_ball_average(u: ScalarField, delta: float, s_exponent: float, dim: int | None = None) -> float:
    """delta^(-s_exponent) times the integral of u over B_delta(0).

    Dyadic shells are summed toward the origin; the shell sums of an
    integrable power singularity form a geometric sequence whose remainder
    is added in closed form. Shells that stop shrinking signal divergence.
    """
    n = u.dim if dim is None else check_dimension(dim)
    if n != u.dim:
        raise ValueError("dimension does not match the field")
    if not delta > 0:
        raise ValueError("delta must be positive")
    b = quad_budget()
    dirs, dw = sphere_rule(n, sphere_order_default(n))
    extra = sorted(float(r) for c, r in u.kinks if np.allclose(c, 0) and 0 < r < delta)
    levels = 60
    outer = [delta] + [r for r in reversed(extra)]
    shells = []
    hi = delta
    for k in range(levels):
        lo = delta * 2.0 ** -(k + 1)
        brk = [lo] + [r for r in outer if lo < r < hi] + [hi]
        r, w = composite_gauss(sorted(set(brk)), 12 * b)
        pts, pw = polar_nodes(np.zeros(n), r, w, dirs, dw)
        shells.append(float(np.dot(pw, u(pts))))
        hi = lo
    shells = np.array(shells)
    if not np.all(np.isfinite(shells)):
        raise ValueError("field is not integrable on the ball (non-finite samples)")
    last, prev = shells[-1], shells[-2]
    scale_ = max(np.max(np.abs(shells)), 1e-300)
    remainder = 0.0
    if abs(last) > 1e-13 * scale_:
        q = last / prev if prev != 0 else np.inf
        if not (0 <= q < 0.97):
            raise ValueError("field is not integrable on the ball: shell contributions do not decay")
        remainder = last * q / (1 - q)
    return float((np.sum(shells) + remainder) / delta**s_exponent)


# ---------------------------------------------------------- Poisson kernels


@lru_cache(maxsize=None)
def poisson_constant(n: int, s: float) -> float:
    """c(n, s) fixed by requiring unit mass of P_t(0, .).

    The radial integral over |y| > t reduces under |y| = t/z to
    |S^{n-1}| * int_0^1 z^(2s-1) (1 - z^2)^(-s) dz.
    """
    # weight="alg" supplies z^(2s-1) (1 - z)^-s
    val, _ = integrate.quad(
        lambda z: (1 + z) ** (-s), 0, 1, weight="alg", wvar=(2 * s - 1, -s), epsabs=1e-15, epsrel=1e-14
    )
    if not math.isfinite(val) or val <= 0:
        raise ArithmeticError("Poisson normalization integral failed")
    return 1.0 / (sphere_area(n) * val)


def poisson_constant_closed(n: int, s: float) -> float:
    return gamma(n / 2) * math.sin(math.pi * s) / math.pi ** (n / 2 + 1)


@dataclass(frozen=True)
class PoissonKernel:
    """P_t(x, y) = c (t^2 - |x|^2)^s / ((|y|^2 - t^2)^s |x - y|^n) for |x| < t < |y|."""

    t: float
    s: float
    dim: int

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError("ball radius t must be positive")
        check_order(self.s)
        check_dimension(self.dim)

    @property
    def normalization(self) -> float:
        return poisson_constant(self.dim, float(self.s))

    def __call__(self, x, y) -> np.ndarray:
        x = as_point(x, self.dim)
        y = np.asarray(y, dtype=float).reshape(-1, self.dim)
        ax, ay = float(np.linalg.norm(x)), norm_nd(y)
        out = np.zeros(len(y))
        ok = (ay > self.t) & (ax < self.t)
        t2 = self.t**2
        out[ok] = (
            self.normalization
            * (t2 - ax**2) ** self.s
            / ((ay[ok] ** 2 - t2) ** self.s * norm_nd(x - y[ok]) ** self.dim)
        )
        return out


@dataclass(frozen=True)
class AveragedKernel:
    """G(x, y) = (1/d0) int_{r - d0}^{min(|y|, r)} P_t(x, y) dt."""

    r: float
    delta0: float
    s: float
    dim: int

    def __post_init__(self):
        if not 0 < self.delta0 < self.r:
            raise ValueError("need 0 < delta0 < r")
        check_order(self.s)
        check_dimension(self.dim)

    def __call__(self, x, y) -> np.ndarray:
        x = as_point(x, self.dim)
        y = np.asarray(y, dtype=float).reshape(-1, self.dim)
        lo = self.r - self.delta0
        ax = float(np.linalg.norm(x))
        if ax >= lo:
            raise ValueError("x must satisfy |x| < r - delta0")
        ay = norm_nd(y)
        out = np.zeros(len(y))
        c = poisson_constant(self.dim, float(self.s))
        s = self.s
        m = 24 * quad_budget()
        for i in np.nonzero(ay > lo)[0]:
            up = min(ay[i], self.r)
            rest = norm_nd(x - y[i]) ** (-self.dim)
            if ay[i] < self.r:
                # (|y| - t)^-s is singular at the upper limit: Gauss-Jacobi in v = |y| - t
                L = up - lo
                v, wv = _jacobi01(m, 0.0, -s)
                tt = up - L * v
                vals = (tt**2 - ax**2) ** s * (ay[i] + tt) ** (-s)
                out[i] = c * rest * L ** (1 - s) * float(np.dot(wv, vals)) / self.delta0
            else:
                t, wt = gauss_legendre(m, lo, up)
                vals = (t**2 - ax**2) ** s * (ay[i] ** 2 - t**2) ** (-s)
                out[i] = c * rest * float(np.dot(wt, vals)) / self.delta0
        return out


def _jacobi01(m: int, a: float, b: float):
    """Nodes and weights on [0, 1] for the weight (1 - z)^a z^b."""
    x, w = roots_jacobi(m, a, b)
    return (1 + x) / 2, w / 2 ** (1 + a + b)


def _zeta_rule(t: float, ax: float, m: int, s: float, tail_power: float, cuts=()):
    """Nodes in z = t/|y| on (0, 1) with the boundary singularity (1 - z)^-s in the weights.

    Returns (z, w) where w already contains z^(2s-1) (1 - z)^(-s) and the
    factor z^tail_power that the caller divides back out.
    """
    d = max((t - ax) / t, 1e-12)
    b = 2 * s - 1 + tail_power
    zs, ws = [], []
    # near z = 1, in u = 1 - z: [0, first] carries u^-s in a Jacobi rule, then geometric panels
    first = min(0.25 * d, 0.25)
    v, wv = _jacobi01(m, 0.0, -s)
    zz = 1 - first * v
    zs.append(zz)
    ws.append(wv * first ** (1 - s) * zz**b)
    ubrk = list(geometric_breaks(first, 0.5)) if first < 0.5 else [0.5]
    ubrk = sorted(set(ubrk + [1 - c for c in cuts if first < 1 - c < 0.5]))
    if len(ubrk) > 1:
        uu, wuu = composite_gauss(ubrk, m)
        zz = 1 - uu
        zs.append(zz)
        ws.append(wuu * uu ** (-s) * zz**b)
    # z in (0, 1/2]: the first panel carries z^b in a Jacobi rule
    zbrk = sorted(set([0.0, 0.5] + [c for c in cuts if 0 < c < 0.5]))
    top = zbrk[1]
    v, wv = _jacobi01(m, 0.0, b)
    zz = top * v
    zs.append(zz)
    ws.append(wv * top ** (1 + b) * (1 - zz) ** (-s))
    if len(zbrk) > 2:
        zz, wz = composite_gauss(zbrk[1:], m)
        zs.append(zz)
        ws.append(wz * zz**b * (1 - zz) ** (-s))
    return np.concatenate(zs), np.concatenate(ws)


def _data_patches(data: ScalarField, t: float):
    """Cutoff patches around singular points of the data lying outside B_t."""
    out = []
    pts = np.asarray(data.singular_points).reshape(-1, data.dim)
    for i, p in enumerate(pts):
        d = float(np.linalg.norm(p))
        if d <= t:
            continue
        eta = 0.5 * (d - t)
        others = np.delete(pts, i, axis=0)
        if len(others):
            eta = min(eta, 0.5 * float(np.min(np.linalg.norm(others - p, axis=-1))))
        out.append((p, 0.999 * eta))
    return out


def poisson_extend(data: ScalarField, k: PoissonKernel, x) -> float:
    """Integral of P_t(x, y) data(y) over |y| > t."""
    n, s, t = k.dim, k.s, k.t
    if data.dim != n:
        raise ValueError("dimension mismatch between data and kernel")
    x = as_point(x, n)
    ax = float(np.linalg.norm(x))
    if not ax < t:
        raise ValueError(f"poisson_extend needs |x| < t, got |x|={ax}, t={t}")
    if not data.tail.admits(s):
        raise ValueError("exterior data is not in the weighted class for this s")
    b = quad_budget()
    m = 16 * b
    c = k.normalization
    tail_power = data.tail.power if data.tail.kind == "algebraic" and data.tail.power > 0 else 0.0
    patches = _data_patches(data, t)
    cuts = []
    for p, eta in patches:
        d = float(np.linalg.norm(p))
        cuts += [t / (d + eta), t / d, t / (d - eta)]
    z, wz = _zeta_rule(t, ax, m, s, tail_power, cuts)
    spread = 0.5 * (t - ax) / t
    dirs, dw = axial_sphere_rule(n, x if ax > 0 else np.eye(n)[0], spread, m)
    pref = c * (t * t - ax * ax) ** s * t ** (n - 2 * s)
    # y = t w / z; zeta^(2s-1-n) (1 - z^2)^-s |x - y|^-n with z^-n |x - y|^-n = |z x - t w|^-n
    zz = z[:, None]
    y = (t / zz)[..., None] * dirs[None, :, :]
    ker = norm_nd(zz[..., None] * x - t * dirs[None, :, :]) ** (-n)
    ker = ker * (1 + zz) ** (-s) * zz ** (-tail_power)
    vals = data(y.reshape(-1, n)).reshape(y.shape[:2])
    if patches:
        weight = np.ones(vals.shape)
        for p, eta in patches:
            weight -= cutoff(norm_nd(y - p) / eta)
        vals = vals * weight
    total = pref * float(np.einsum("i,j,ij->", wz, dw, ker * vals))
    for p, eta in patches:
        total += _patch_integral(data, k, x, p, eta)
    return total


def _patch_integral(data: ScalarField, k: PoissonKernel, x, p, eta) -> float:
    n = k.dim
    b = quad_budget()
    dirs, dw = sphere_rule(n, sphere_order_default(n))
    r, wr = graded_gauss(0.0, eta, 24 * b, 4.0)
    off, w = polar_nodes(np.zeros(n), r, wr, dirs, dw)
    w = w * cutoff(norm_nd(off) / eta)
    return float(np.dot(w, k(x, p + off) * data(p + off)))


def averaged_kernel_extend(data: ScalarField, g: AveragedKernel, x, order: int = 8) -> float:
    """Integral of G(x, y) data(y) over |y| >= r - delta0.

    By Fubini this is the t-average of poisson_extend over [r - delta0, r].
    """
    x = as_point(x, g.dim)
    lo = g.r - g.delta0
    if not float(np.linalg.norm(x)) < lo:
        raise ValueError("x must satisfy |x| < r - delta0")
    ts, wt = gauss_legendre(order * quad_budget(), lo, g.r)
    vals = [poisson_extend(data, PoissonKernel(float(t), g.s, g.dim), x) for t in ts]
    return float(np.dot(wt, vals)) / g.delta0
