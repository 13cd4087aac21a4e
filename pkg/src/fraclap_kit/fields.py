"""Built-in fields used by the verification drivers and the command line."""

from __future__ import annotations

import numpy as np
from scipy.special import gamma, hyp2f1

from .field_core import ScalarField, TailProfile, as_point, check_dimension, constant_field, norm_nd, smooth_step


def gaussian(dim: int, center=None, width: float = 0.5, amplitude: float = 1.0) -> ScalarField:
    c = np.zeros(dim) if center is None else as_point(center, dim)
    w2 = 2.0 * width**2

    def f(p):
        return amplitude * np.exp(-np.sum((p - c) ** 2, axis=-1) / w2)

    def g(p):
        return (-(p - c) * 2.0 / w2) * f(p)[..., None]

    # exp(-72) is below double precision relative to the peak
    tail = TailProfile.compact(float(np.linalg.norm(c)) + 12.0 * width)
    return ScalarField(f, dim, tail, scale=width, grad=g, name=f"gauss(w={width:g})")


def bump_profile(t):
    """exp(1 - 1/(1 - t^2)) on |t| < 1, zero outside; equals 1 at t = 0."""
    t = np.asarray(t, dtype=float)
    inside = np.abs(t) < 1
    safe = np.where(inside, t, 0.0)
    return np.where(inside, np.exp(1.0 - 1.0 / (1.0 - safe**2)), 0.0)


def smooth_bump(dim: int, center=None, radius: float = 1.0, amplitude: float = 1.0) -> ScalarField:
    c = np.zeros(dim) if center is None else as_point(center, dim)

    def f(p):
        return amplitude * bump_profile(norm_nd(p - c) / radius)

    def g(p):
        d = p - c
        t = norm_nd(d) / radius
        inside = t < 1
        safe = np.where(inside, t, 0.0)
        fac = np.where(inside, -2.0 / (radius**2 * (1 - safe**2) ** 2), 0.0)
        return (amplitude * bump_profile(t) * fac)[..., None] * d

    tail = TailProfile.compact(float(np.linalg.norm(c)) + radius)
    return ScalarField(f, dim, tail, scale=radius, grad=g, name=f"bump(a={radius:g})")


def cauchy_field(dim: int, q: float, center=None, length: float = 1.0, amplitude: float = 1.0) -> ScalarField:
    """amplitude * (1 + |y - c|^2 / length^2)^(-q)."""
    c = np.zeros(dim) if center is None else as_point(center, dim)

    def f(p):
        return amplitude * (1.0 + np.sum((p - c) ** 2, axis=-1) / length**2) ** (-q)

    def g(p):
        d = p - c
        base = 1.0 + np.sum(d**2, axis=-1) / length**2
        return (amplitude * (-q) * base ** (-q - 1) * 2.0 / length**2)[..., None] * d

    tail = TailProfile.algebraic(abs(amplitude) * max(1.0, length ** (2 * q)) * 4.0**q, 2.0 * q)
    return ScalarField(f, dim, tail, scale=length, grad=g, name=f"cauchy(q={q:g})")


def cauchy_fraclap(dim: int, s: float, q: float, center=None, length: float = 1.0, amplitude: float = 1.0) -> ScalarField:
    """Closed form of (-Delta)^s applied to cauchy_field with the same parameters.

    (-Delta)^s (1 + |y|^2)^(-q) = 4^s Gamma(q + s) Gamma(n/2 + s) / (Gamma(q) Gamma(n/2))
    * 2F1(q + s, n/2 + s; n/2; -|y|^2), rescaled by length^(-2s).
    """
    c = np.zeros(dim) if center is None else as_point(center, dim)
    K = 4.0**s * gamma(q + s) * gamma(dim / 2 + s) / (gamma(q) * gamma(dim / 2))

    def f(p):
        z = np.sum((p - c) ** 2, axis=-1) / length**2
        return amplitude * length ** (-2 * s) * K * hyp2f1(q + s, dim / 2 + s, dim / 2, -z)

    p_tail = min(2 * q + 2 * s, dim + 2 * s)
    return ScalarField(f, dim, TailProfile.algebraic(abs(amplitude) * K * 8.0, p_tail), scale=length, name="cauchy_fraclap")


def bubble(dim: int, s: float) -> ScalarField:
    """(1 + |y|^2)^(-(n - 2s)/2)."""
    return cauchy_field(dim, (dim - 2 * s) / 2)


def lipschitz_cap(dim: int, center=None, radius: float = 1.0, height: float = 1.0) -> ScalarField:
    """height * max(1 - |y - c| / radius, 0)."""
    c = np.zeros(dim) if center is None else as_point(center, dim)

    def f(p):
        return height * np.maximum(1.0 - norm_nd(p - c) / radius, 0.0)

    def g(p):
        d = p - c
        r = norm_nd(d)
        inside = (r < radius) & (r > 0)
        fac = np.where(inside, -height / (radius * np.where(r > 0, r, 1.0)), 0.0)
        return fac[..., None] * d

    return ScalarField(
        f,
        dim,
        TailProfile.compact(float(np.linalg.norm(c)) + radius),
        singular_points=[c],
        kinks=[(c, radius)],
        scale=radius,
        grad=g,
        name="cap",
    )


def concave_cap(dim: int, center=None, height: float = 1.0, curvature: float = 1.0) -> ScalarField:
    """height - curvature * |y - c|^2 (smooth, unbounded below)."""
    c = np.zeros(dim) if center is None else as_point(center, dim)

    def f(p):
        return height - curvature * np.sum((p - c) ** 2, axis=-1)

    def g(p):
        return -2.0 * curvature * (p - c)

    return ScalarField(f, dim, TailProfile.algebraic(abs(height) + curvature, -2.0), grad=g, name="paraboloid")


BUILTIN_FIELDS = ("constant", "gaussian", "bump", "bubble", "fundamental", "cap")


def builtin_field(name: str, dim: int, s: float | None = None) -> ScalarField:
    """Look up a named field for the command line."""
    check_dimension(dim)
    if name == "constant":
        return constant_field(1.0, dim)
    if name == "gaussian":
        return gaussian(dim)
    if name == "bump":
        return smooth_bump(dim)
    if name == "cap":
        return lipschitz_cap(dim)
    if name in ("bubble", "fundamental"):
        if s is None:
            raise ValueError(f"field {name!r} needs a fractional order")
        if name == "bubble":
            return bubble(dim, s)
        from .potentials import fundamental_solution

        return fundamental_solution(dim, "fractional", s)
    raise ValueError(f"unknown builtin field {name!r}; choose from {', '.join(BUILTIN_FIELDS)}")


def radial_cutoff(dim: int, inner: float, outer: float, center=None) -> ScalarField:
    """Smooth radial cutoff: 1 on |y - c| <= inner, 0 on |y - c| >= outer."""
    if not 0 < inner < outer:
        raise ValueError("need 0 < inner < outer")
    c = np.zeros(dim) if center is None else as_point(center, dim)
    width = outer - inner

    def f(p):
        return 1.0 - smooth_step((norm_nd(p - c) - inner) / width)

    # the transition edges are not analytic, so quadratures should break there
    tail = TailProfile.compact(float(np.linalg.norm(c)) + outer)
    return ScalarField(f, dim, tail, kinks=[(c, inner), (c, outer)], scale=width, name=f"cutoff({inner:g},{outer:g})")
