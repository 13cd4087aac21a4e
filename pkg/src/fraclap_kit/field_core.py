"""Core types, quadrature rules and the weighted-integrability functional.

Points are numpy arrays whose last axis is the spatial dimension.  Every
field is evaluated in vectorised form: ``u(pts)`` with ``pts`` of shape
``(..., n)`` returns an array of shape ``(...)``.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.special import gamma

SUPPORTED_DIMS = (1, 2, 3)
_CHUNK = 1 << 17


def sphere_area(n: int) -> float:
    """Surface measure of the unit sphere in R^n."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


def ball_volume(n: int) -> float:
    return sphere_area(n) / n


def quad_budget() -> int:
    """Integer multiplier for quadrature orders, read from FLK_QUAD_BUDGET."""
    raw = os.environ.get("FLK_QUAD_BUDGET", "1").strip() or "1"
    try:
        value = int(raw)
    except ValueError as exc:
        raise ValueError(f"FLK_QUAD_BUDGET must be a positive integer, got {raw!r}") from exc
    if value < 1:
        raise ValueError(f"FLK_QUAD_BUDGET must be a positive integer, got {raw!r}")
    return value


def check_dimension(n: int, allowed: Sequence[int] = SUPPORTED_DIMS) -> int:
    if isinstance(n, bool) or int(n) != n:
        raise ValueError(f"dimension must be an integer, got {n!r}")
    n = int(n)
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    if n not in allowed:
        raise ValueError(f"dimension {n} not supported here (allowed: {tuple(allowed)})")
    return n


def check_order(s: float, *, drift: bool = False) -> float:
    s = float(s)
    if not 0.0 < s < 1.0:
        raise ValueError(f"fractional order must lie in (0, 1), got {s}")
    if drift and s <= 0.5:
        raise ValueError(f"a nonzero drift requires s > 1/2, got {s}")
    return s


def as_points(x, n: int) -> np.ndarray:
    """Coerce to a float array with trailing axis n."""
    arr = np.asarray(x, dtype=float)
    if n == 1 and (arr.ndim == 0 or arr.shape[-1] != 1):
        arr = arr[..., None]
    if arr.shape[-1] != n:
        raise ValueError(f"expected points with last axis {n}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("points must be finite")
    return arr


def as_point(x, n: int) -> np.ndarray:
    arr = as_points(x, n)
    if arr.shape != (n,):
        raise ValueError(f"expected a single point in R^{n}, got shape {arr.shape}")
    return arr


# ---------------------------------------------------------------- smooth steps


def smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def smooth_step_derivs(t):
    """smooth_step and its first two derivatives."""
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 1)
    x = np.where(inside, t, 0.5)
    y = 1.0 - x
    with np.errstate(under="ignore", over="ignore"):
        a, b = np.exp(-1.0 / x), np.exp(-1.0 / y)
        a1, b1 = a / x**2, -b / y**2
        a2 = a * (1.0 / x**4 - 2.0 / x**3)
        b2 = b * (1.0 / y**4 - 2.0 / y**3)
        D = a + b
        N = a1 * b - a * b1
        d1 = N / D**2
        d2 = ((a2 * b - a * b2) * D - 2.0 * N * (a1 + b1)) / D**3
    S = smooth_step(t)
    return S, np.where(inside, d1, 0.0), np.where(inside, d2, 0.0)


def cutoff(t):
    """Smooth radial cutoff: 1 for t <= 1/2, 0 for t >= 1."""
    return 1.0 - smooth_step(2.0 * np.asarray(t, dtype=float) - 1.0)


# ------------------------------------------------------------------ tail types


@dataclass(frozen=True)
class TailProfile:
    """Far-field behaviour of a field.

    kind is one of ``compact`` (zero outside ``radius``), ``algebraic``
    (``|u(y)| <= amplitude * (1 + |y|)**(-power)``) or ``bounded`` (only a
    declared bound ``bound`` on the weighted integral is known).
    """

    kind: str
    radius: float = 0.0
    amplitude: float = 1.0
    power: float = 0.0
    bound: float = 0.0

    def __post_init__(self):
        if self.kind not in ("compact", "algebraic", "bounded"):
            raise ValueError(f"unknown tail kind {self.kind!r}")
        if self.kind == "compact" and not self.radius > 0:
            raise ValueError("compact tail needs a positive support radius")
        if self.kind == "bounded" and self.bound < 0:
            raise ValueError("declared weight bound must be nonnegative")

    @classmethod
    def compact(cls, radius: float) -> "TailProfile":
        return cls("compact", radius=float(radius))

    @classmethod
    def algebraic(cls, amplitude: float, power: float) -> "TailProfile":
        return cls("algebraic", amplitude=float(amplitude), power=float(power))

    @classmethod
    def bounded(cls, bound: float) -> "TailProfile":
        return cls("bounded", bound=float(bound))

    def admits(self, s: float) -> bool:
        """True when the weighted integral with exponent n + 2s converges."""
        if self.kind == "algebraic":
            return self.power > -2.0 * s
        return True

    def scaled(self, c: float) -> "TailProfile":
        c = abs(float(c))
        if self.kind == "compact":
            return self
        if self.kind == "algebraic":
            return TailProfile.algebraic(self.amplitude * c, self.power)
        return TailProfile.bounded(self.bound * c)

    def combine(self, other: "TailProfile") -> "TailProfile":
        kinds = {self.kind, other.kind}
        if kinds == {"compact"}:
            return TailProfile.compact(max(self.radius, other.radius))
        if "bounded" in kinds:
            return TailProfile.bounded(self.bound + other.bound)
        alg = [t for t in (self, other) if t.kind == "algebraic"]
        return TailProfile.algebraic(sum(t.amplitude for t in alg), min(t.power for t in alg))


# --------------------------------------------------------------------- fields


class ScalarField:
    """A real function on R^n with a far-field tail declaration.

    Parameters
    ----------
    func : callable
        Vectorised map from points ``(..., n)`` to values ``(...)``.
    dim : int
        Spatial dimension.
    tail : TailProfile
        Far-field behaviour used by the tail quadratures.
    singular_points : sequence of points, optional
        Points where the field is singular or not smooth.
    kinks : sequence of (center, radius), optional
        Spheres across which the field is continuous but not smooth.
    scale : float
        Characteristic length on which the field varies.
    grad : callable, optional
        Analytic gradient ``(..., n) -> (..., n)``.
    name : str
        Label used in reports.
    """

    def __init__(
        self,
        func: Callable[[np.ndarray], np.ndarray],
        dim: int,
        tail: TailProfile,
        *,
        singular_points: Sequence = (),
        kinks: Sequence = (),
        scale: float = 1.0,
        grad: Callable[[np.ndarray], np.ndarray] | None = None,
        name: str = "field",
    ):
        self.dim = check_dimension(dim)
        self._func = func
        self.tail = tail
        pts = [as_point(p, self.dim) for p in singular_points]
        self.singular_points = np.array(pts, dtype=float).reshape(len(pts), self.dim)
        self.singular_points.flags.writeable = False
        self.kinks = tuple((tuple(float(c) for c in as_point(c, self.dim)), float(r)) for c, r in kinks)
        if not scale > 0:
            raise ValueError("scale must be positive")
        self.scale = float(scale)
        self._grad = grad
        self.name = name

    def __repr__(self) -> str:
        return f"ScalarField({self.name!r}, dim={self.dim}, tail={self.tail.kind})"

    def __call__(self, pts) -> np.ndarray:
        pts = as_points(pts, self.dim)
        shape = pts.shape[:-1]
        flat = pts.reshape(-1, self.dim)
        if flat.shape[0] <= _CHUNK:
            out = np.asarray(self._func(flat), dtype=float)
        else:
            out = np.concatenate(
                [np.asarray(self._func(flat[i : i + _CHUNK]), dtype=float) for i in range(0, flat.shape[0], _CHUNK)]
            )
        return np.broadcast_to(out, flat.shape[:1]).reshape(shape)

    @property
    def has_grad(self) -> bool:
        return self._grad is not None

    def gradient(self, pts) -> np.ndarray:
        """Analytic gradient when declared, otherwise extrapolated central differences."""
        pts = as_points(pts, self.dim)
        if self._grad is not None:
            return np.asarray(self._grad(pts), dtype=float).reshape(pts.shape)
        return fd_gradient(self, pts)

    def feature_distance(self, x) -> np.ndarray:
        """Distance from x to the nearest declared singular point or kink sphere."""
        x = as_points(x, self.dim)
        d = np.full(x.shape[:-1], np.inf)
        for p in self.singular_points:
            d = np.minimum(d, np.linalg.norm(x - p, axis=-1))
        for c, r in self.kinks:
            d = np.minimum(d, np.abs(np.linalg.norm(x - np.asarray(c), axis=-1) - r))
        return d

    def _merge(self, other: "ScalarField", func, grad, name) -> "ScalarField":
        if other.dim != self.dim:
            raise ValueError("cannot combine fields of different dimension")
        return ScalarField(
            func,
            self.dim,
            self.tail.combine(other.tail),
            singular_points=list(self.singular_points) + list(other.singular_points),
            kinks=list(self.kinks) + list(other.kinks),
            scale=min(self.scale, other.scale),
            grad=grad,
            name=name,
        )

    def __add__(self, other):
        if isinstance(other, ScalarField):
            grad = None
            if self.has_grad and other.has_grad:
                grad = lambda p, a=self, b=other: a.gradient(p) + b.gradient(p)
            return self._merge(other, lambda p, a=self, b=other: a(p) + b(p), grad, f"({self.name}+{other.name})")
        c = float(other)
        return ScalarField(
            lambda p, a=self: a(p) + c,
            self.dim,
            self.tail.combine(TailProfile.algebraic(abs(c), 0.0)) if c != 0 else self.tail,
            singular_points=self.singular_points,
            kinks=self.kinks,
            scale=self.scale,
            grad=self._grad,
            name=f"({self.name}+{c:g})",
        )

    __radd__ = __add__

    def __mul__(self, other):
        if isinstance(other, ScalarField):
            return self._product(other)
        c = float(other)
        grad = None if self._grad is None else (lambda p, a=self: c * a.gradient(p))
        return ScalarField(
            lambda p, a=self: c * a(p),
            self.dim,
            self.tail.scaled(c),
            singular_points=self.singular_points,
            kinks=self.kinks,
            scale=self.scale,
            grad=grad,
            name=f"{c:g}*{self.name}",
        )

    __rmul__ = __mul__

    def _product(self, other: "ScalarField") -> "ScalarField":
        tails = (self.tail, other.tail)
        compact = [tl.radius for tl in tails if tl.kind == "compact"]
        if compact:
            tail = TailProfile.compact(min(compact))
        elif all(tl.kind == "algebraic" for tl in tails):
            tail = TailProfile.algebraic(tails[0].amplitude * tails[1].amplitude, tails[0].power + tails[1].power)
        else:
            raise ValueError("product tail unknown: declare a compact or algebraic tail on one factor")
        grad = None
        if self.has_grad and other.has_grad:
            grad = lambda p, a=self, b=other: a.gradient(p) * b(p)[..., None] + b.gradient(p) * a(p)[..., None]
        out = self._merge(other, lambda p, a=self, b=other: a(p) * b(p), grad, f"({self.name}*{other.name})")
        out.tail = tail
        return out

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other if isinstance(other, ScalarField) else -float(other))

    def translated(self, z) -> "ScalarField":
        """The field y -> u(y - z)."""
        z = as_point(z, self.dim)
        tail = self.tail
        if tail.kind == "compact":
            tail = TailProfile.compact(tail.radius + float(np.linalg.norm(z)))
        grad = None if self._grad is None else (lambda p, a=self: a.gradient(as_points(p, a.dim) - z))
        return ScalarField(
            lambda p, a=self: a(p - z),
            self.dim,
            tail,
            singular_points=[p + z for p in self.singular_points],
            kinks=[(np.asarray(c) + z, r) for c, r in self.kinks],
            scale=self.scale,
            grad=grad,
            name=f"{self.name}(.-z)",
        )

    def dilated(self, lam: float) -> "ScalarField":
        """The field y -> u(lam * y)."""
        lam = float(lam)
        if not lam > 0:
            raise ValueError("dilation factor must be positive")
        tail = self.tail
        if tail.kind == "compact":
            tail = TailProfile.compact(tail.radius / lam)
        elif tail.kind == "algebraic":
            tail = TailProfile.algebraic(tail.amplitude * max(1.0, lam ** (-tail.power)), tail.power)
        grad = None if self._grad is None else (lambda p, a=self: lam * a.gradient(lam * as_points(p, a.dim)))
        return ScalarField(
            lambda p, a=self: a(lam * p),
            self.dim,
            tail,
            singular_points=[p / lam for p in self.singular_points],
            kinks=[(np.asarray(c) / lam, r / lam) for c, r in self.kinks],
            scale=self.scale / lam,
            grad=grad,
            name=f"{self.name}({lam:g}.)",
        )


def constant_field(value: float, dim: int) -> ScalarField:
    value = float(value)
    return ScalarField(
        lambda p: np.full(p.shape[:-1], value),
        dim,
        TailProfile.algebraic(abs(value), 0.0),
        grad=lambda p: np.zeros_like(p),
        name=f"const({value:g})",
    )


def fd_gradient(u: Callable, pts: np.ndarray) -> np.ndarray:
    """Central differences with step 1e-4 (1 + |x|) and one Richardson level."""
    pts = np.asarray(pts, dtype=float)
    n = pts.shape[-1]
    h = 1e-4 * (1.0 + np.linalg.norm(pts, axis=-1))[..., None]
    out = np.empty(pts.shape)
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        d1 = (u(pts + h * e) - u(pts - h * e)) / (2 * h[..., 0])
        d2 = (u(pts + 0.5 * h * e) - u(pts - 0.5 * h * e)) / h[..., 0]
        out[..., i] = (4.0 * d2 - d1) / 3.0
    return out


# --------------------------------------------------------------- coefficients


@dataclass(frozen=True)
class CoefficientSet:
    """Drift b, its Jacobian, zero-order coefficient c and the shared bound M."""

    b: Callable[[np.ndarray], np.ndarray]
    grad_b: Callable[[np.ndarray], np.ndarray]
    c: Callable[[np.ndarray], np.ndarray]
    bound_M: float
    dim: int
    label: str = "coeffs"
    drift_free: bool = False

    def __post_init__(self):
        check_dimension(self.dim)
        if not self.bound_M >= 0:
            raise ValueError("bound_M must be nonnegative")

    def div_b(self, pts) -> np.ndarray:
        return np.trace(self.grad_b(pts), axis1=-2, axis2=-1)

    def validate(self, sample_points, *, radius: float = 1.0, tol: float = 1e-6) -> None:
        """Check Jacobian consistency and that bound_M dominates the sampled sup norms."""
        pts = as_points(sample_points, self.dim)
        pts = pts[np.linalg.norm(pts, axis=-1) <= radius]
        if pts.size == 0:
            return
        jac = np.asarray(self.grad_b(pts))
        fd = np.stack([fd_gradient(lambda q, i=i: self.b(q)[..., i], pts) for i in range(self.dim)], axis=-2)
        err = np.max(np.abs(jac - fd))
        if err > tol * (1.0 + np.max(np.abs(jac))):
            raise ValueError(f"grad_b inconsistent with finite differences of b (max deviation {err:.3e})")
        sup_b = np.max(np.linalg.norm(self.b(pts), axis=-1))
        sup_db = np.max(np.linalg.norm(jac, ord=2, axis=(-2, -1)))
        sup_c = np.max(np.abs(self.c(pts)))
        if sup_b + sup_db + sup_c > self.bound_M * (1 + 1e-12) + 1e-14:
            raise ValueError(
                f"bound_M={self.bound_M} does not dominate sampled |b|+|Db|+|c|={sup_b + sup_db + sup_c:.4g}"
            )

    @classmethod
    def zero(cls, dim: int, bound_M: float = 0.0) -> "CoefficientSet":
        return cls(
            b=lambda p: np.zeros_like(np.asarray(p, dtype=float)),
            grad_b=lambda p: np.zeros(np.asarray(p).shape + (dim,)),
            c=lambda p: np.zeros(np.asarray(p).shape[:-1]),
            bound_M=float(bound_M),
            dim=dim,
            label="zero",
            drift_free=True,
        )

    @classmethod
    def affine(cls, matrix, offset=None, c: float = 0.0, bound_M: float | None = None, label: str = "affine"):
        """b(x) = A x + b0 with constant c."""
        A = np.atleast_2d(np.asarray(matrix, dtype=float))
        dim = A.shape[0]
        b0 = np.zeros(dim) if offset is None else np.asarray(offset, dtype=float)
        c = float(c)
        if bound_M is None:
            # C^1 norm on the unit ball plus the sup of |c|
            bound_M = float(np.linalg.norm(b0) + 2.0 * np.linalg.norm(A, 2) + abs(c))
        return cls(
            b=lambda p: np.asarray(p, dtype=float) @ A.T + b0,
            grad_b=lambda p: np.broadcast_to(A, np.asarray(p).shape[:-1] + A.shape).copy(),
            c=lambda p: np.full(np.asarray(p).shape[:-1], c),
            bound_M=float(bound_M),
            dim=dim,
            label=label,
            drift_free=not (np.any(A) or np.any(b0)),
        )


# ----------------------------------------------------------------- quadrature


@lru_cache(maxsize=None)
def _gl(m: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(m)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def gauss_legendre(m: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    x, w = _gl(int(m))
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def composite_gauss(breaks: Sequence[float], m: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre with m nodes on every panel between consecutive breaks."""
    br = np.asarray(breaks, dtype=float)
    xs, ws = [], []
    for a, b in zip(br[:-1], br[1:]):
        if b > a:
            x, w = gauss_legendre(m, a, b)
            xs.append(x)
            ws.append(w)
    if not xs:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(xs), np.concatenate(ws)


def graded_gauss(a: float, b: float, m: int, power: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes clustered at ``a`` through t = a + (b - a) * tau**power."""
    tau, w = gauss_legendre(m, 0.0, 1.0)
    t = a + (b - a) * tau**power
    return t, w * (b - a) * power * tau ** (power - 1.0)


def geometric_breaks(a: float, b: float, ratio: float = 2.0) -> np.ndarray:
    """Breakpoints a, a*ratio, a*ratio**2, ... closed off at b."""
    if not (0 < a < b):
        raise ValueError("geometric breaks need 0 < a < b")
    k = max(1, int(math.ceil(math.log(b / a) / math.log(ratio) - 1e-12)))
    pts = a * ratio ** np.arange(k + 1, dtype=float)
    pts[-1] = b
    return np.unique(pts)


@lru_cache(maxsize=None)
def _sphere_rule_cached(n: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    if n == 1:
        dirs, w = np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    elif n == 2:
        m = order + 1
        th = 2 * math.pi * (np.arange(m) + 0.5) / m
        dirs = np.stack([np.cos(th), np.sin(th)], axis=-1)
        w = np.full(m, 2 * math.pi / m)
    elif n == 3:
        q = order // 2 + 1
        ct, wt = _gl(q)
        m = order + 1
        ph = 2 * math.pi * (np.arange(m) + 0.5) / m
        st = np.sqrt(1.0 - ct**2)
        dirs = np.stack(
            [np.outer(st, np.cos(ph)).ravel(), np.outer(st, np.sin(ph)).ravel(), np.repeat(ct, m)], axis=-1
        )
        w = np.repeat(wt, m) * (2 * math.pi / m)
    else:
        raise ValueError(f"sphere rules are provided for n <= 3, got n={n}")
    dirs.flags.writeable = False
    w.flags.writeable = False
    return dirs, w


def sphere_rule(n: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit directions and weights integrating spherical polynomials of degree <= order."""
    check_dimension(n)
    if n > 1 and order < 2:
        raise ValueError("sphere order must be >= 2")
    return _sphere_rule_cached(int(n), int(order))


def axial_sphere_rule(n: int, axis, spread: float, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Directions clustered around ``axis``: polar angle panels grow
    geometrically from ``spread`` radians up to pi."""
    check_dimension(n)
    axis = np.asarray(axis, dtype=float).reshape(n)
    nrm = float(np.linalg.norm(axis))
    axis = axis / nrm if nrm > 0 else np.eye(n)[0]
    if n == 1:
        return np.array([axis, -axis]), np.array([1.0, 1.0])
    spread = min(max(spread, 1e-8), 0.5)
    brk = np.concatenate([[0.0], geometric_breaks(spread, math.pi)])
    th, wt = composite_gauss(brk, m)
    if n == 2:
        perp = np.array([-axis[1], axis[0]])
        th = np.concatenate([th, -th])
        wt = np.concatenate([wt, wt])
        dirs = np.cos(th)[:, None] * axis + np.sin(th)[:, None] * perp
        return dirs, wt
    # n == 3: orthonormal frame (e1, e2, axis), azimuth by the trapezoid rule
    helper = np.eye(3)[int(np.argmin(np.abs(axis)))]
    e1 = np.cross(axis, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    k = 2 * m
    ph = 2 * math.pi * (np.arange(k) + 0.5) / k
    st, ct = np.sin(th), np.cos(th)
    dirs = (
        np.outer(st, np.cos(ph))[..., None] * e1
        + np.outer(st, np.sin(ph))[..., None] * e2
        + np.repeat(ct[:, None], k, axis=1)[..., None] * axis
    ).reshape(-1, 3)
    w = np.outer(wt * st, np.full(k, 2 * math.pi / k)).ravel()
    return dirs, w


@dataclass(frozen=True)
class QuadratureRule:
    """Polar product rule on the annulus rho <= |y| <= R."""

    dim: int
    radial_nodes: np.ndarray
    radial_weights: np.ndarray
    sphere_nodes: np.ndarray
    sphere_weights: np.ndarray
    near_radius: float
    far_radius: float
    tail_mode: str = "analytic"

    def integrate(self, f: Callable[[np.ndarray], np.ndarray], center=None) -> float:
        """Integral of f over the annulus around ``center``."""
        c = np.zeros(self.dim) if center is None else as_point(center, self.dim)
        pts, w = polar_nodes(c, self.radial_nodes, self.radial_weights, self.sphere_nodes, self.sphere_weights)
        return float(np.dot(w, f(pts)))


def make_polar_rule(
    dim: int, radial_order: int, sphere_order: int, rho: float, R: float, tail_mode: str = "analytic"
) -> QuadratureRule:
    """Gauss-Legendre in r on [rho, R] times a product sphere rule."""
    check_dimension(dim)
    if radial_order < 2:
        raise ValueError("radial_order must be >= 2")
    if dim > 1 and sphere_order < 2:
        raise ValueError("sphere_order must be >= 2")
    if not rho > 0:
        raise ValueError(f"near radius must be positive, got {rho}")
    if not R > rho:
        raise ValueError(f"far radius must exceed near radius, got R={R}, rho={rho}")
    if tail_mode not in ("analytic", "truncate"):
        raise ValueError(f"unknown tail mode {tail_mode!r}")
    r, w = gauss_legendre(radial_order // 2 + 1, rho, R)
    dirs, dw = sphere_rule(dim, sphere_order)
    for arr in (r, w):
        arr.flags.writeable = False
    return QuadratureRule(dim, r, w, dirs, dw, float(rho), float(R), tail_mode)


def polar_nodes(center, r, wr, dirs, wd) -> tuple[np.ndarray, np.ndarray]:
    """Cartesian nodes and weights (including r**(n-1)) of a polar product rule."""
    n = dirs.shape[1]
    pts = center + r[:, None, None] * dirs[None, :, :]
    w = (wr * r ** (n - 1))[:, None] * wd[None, :]
    return pts.reshape(-1, n), w.ravel()


def sphere_order_default(n: int) -> int:
    b = quad_budget()
    return {1: 2, 2: 64 * b - 1, 3: 24 * b - 1}[n]


def _radial_weight_nodes(n: int, tail: TailProfile, s: float, m: int):
    """Radial nodes/weights for integrals over R^n against decay |y|^-(n+2s)."""
    inner = np.concatenate([[0.0], 2.0 ** -np.arange(40, -1, -1, dtype=float)])
    outer_end = 64.0
    if tail.kind == "compact":
        outer_end = max(1.0, tail.radius)
    outer = geometric_breaks(1.0, outer_end) if outer_end > 1.0 else np.array([1.0])
    r, w = composite_gauss(np.concatenate([inner, outer[1:]]), m)
    return r, w, outer_end


def l2s_weight_integral(u: ScalarField, s: float, dim: int | None = None) -> float:
    """Numerical value of the integral of |u(y)| / (1 + |y|^(n+2s)) over R^n."""
    s = check_order(s)
    n = u.dim if dim is None else check_dimension(dim)
    if n != u.dim:
        raise ValueError("dimension does not match the field")
    if not u.tail.admits(s):
        raise ValueError(
            f"weighted integral diverges: algebraic tail power {u.tail.power} <= -2s = {-2 * s} "
            "and no compact support declared"
        )
    m = 12 * quad_budget()
    dirs, dw = sphere_rule(n, sphere_order_default(n))
    r, w, R = _radial_weight_nodes(n, u.tail, s, m)
    weight = lambda rr: 1.0 / (1.0 + rr ** (n + 2 * s))
    pts, pw = polar_nodes(np.zeros(n), r, w * weight(r), dirs, dw)
    total = float(np.dot(pw, np.abs(u(pts))))
    if u.tail.kind == "algebraic":
        # substitution r = R tau^(-q) makes the dominating power integrand constant
        q = 1.0 / (u.tail.power + 2 * s)
        tau, wt = gauss_legendre(2 * m, 0.0, 1.0)
        rr = R * tau ** (-q)
        jac = wt * q * R * tau ** (-q - 1.0)
        pts, pw = polar_nodes(np.zeros(n), rr, jac * weight(rr), dirs, dw)
        total += float(np.dot(pw, np.abs(u(pts))))
    return total


def norm_nd(x) -> np.ndarray:
    return np.linalg.norm(np.asarray(x, dtype=float), axis=-1)


def gamma_ratio(a: float, b: float) -> float:
    return float(gamma(a) / gamma(b))
