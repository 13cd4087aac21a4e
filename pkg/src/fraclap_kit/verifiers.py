"""Scenario verifiers: each turns a parameter map into margins, provenance and details."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .barriers import (
    FAMILIES,
    certify_barrier_inequality,
    certify_mollified_barrier,
    make_barrier,
)
from .distrib import PreconditionError, compose_max, compose_min, make_battery
from .field_core import CoefficientSet, check_dimension, check_order, constant_field
from .fields import (
    builtin_field,
    cauchy_field,
    cauchy_fraclap,
    concave_cap,
    lipschitz_cap,
    smooth_bump,
)
from .fraclap_op import OperatorSpec, UnreliableOracleWarning, eval_fraclap, frac_constant, spectral_oracle
from .mollify import MollifierKernel, commutator_report, square_grid
from .potentials import PoissonKernel, fundamental_solution, poisson_extend
from .principles import (
    ball_grid,
    bocher_battery,
    compute_principle_constants,
    counterexample_suite_n1,
    max_principle_battery,
    recover_singular_coefficient,
    rotation_coeffs,
    verify_max_principle,
)


class ScenarioError(ValueError):
    """Invalid scenario parameters; maps to exit status 3."""


@dataclass
class Outcome:
    margins: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)
    inconclusive: bool = False

    def add(self, label: str, value: float, tolerance: float, sense: str = "<=") -> bool:
        """Record a margin; sense "<=" passes when value <= tolerance, ">=" when value >= tolerance."""
        if sense not in ("<=", ">="):
            raise ValueError("sense must be '<=' or '>='")
        v = float(value)
        ok = bool(v <= tolerance) if sense == "<=" else bool(v >= tolerance)
        if not math.isfinite(v):
            ok = False
        self.margins.append({"label": label, "value": v, "tolerance": float(tolerance), "sense": sense, "pass": ok})
        return ok


# ------------------------------------------------------------ parameters


def _num_list(params: dict, key: str, default) -> list:
    v = params.get(key, default)
    out = v if isinstance(v, list) else [v]
    try:
        return [float(x) for x in out]
    except (TypeError, ValueError):
        raise ScenarioError(f"parameter {key!r} must be a number or a list of numbers") from None


def _int_list(params: dict, key: str, default) -> list:
    vals = _num_list(params, key, default)
    if any(v != int(v) for v in vals):
        raise ScenarioError(f"parameter {key!r} must hold integers")
    return [int(v) for v in vals]


def _num(params: dict, key: str, default) -> float:
    v = params.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"parameter {key!r} must be a number")
    return float(v)


def _int(params: dict, key: str, default) -> int:
    v = _num(params, key, default)
    if v != int(v):
        raise ScenarioError(f"parameter {key!r} must be an integer")
    return int(v)


def _check_keys(params: dict, allowed: set, verifier: str):
    extra = sorted(set(params) - allowed)
    if extra:
        raise ScenarioError(f"unknown parameter(s) for {verifier}: {', '.join(extra)}")


def _dims(params: dict, key: str = "n", default=2) -> list:
    dims = _int_list(params, key, default)
    for n in dims:
        try:
            check_dimension(n)
        except ValueError as e:
            raise ScenarioError(str(e)) from None
    return dims


def _orders(params: dict, default) -> list:
    vals = _num_list(params, "s", default)
    for s in vals:
        try:
            check_order(s)
        except ValueError as e:
            raise ScenarioError(str(e)) from None
    return vals


def _sample_points(n: int, count: int, r_min: float, r_max: float, rng) -> np.ndarray:
    v = rng.normal(size=(count, n))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v * rng.uniform(r_min, r_max, size=(count, 1))


def _fmt(p) -> str:
    return "(" + ", ".join(f"{x:.4g}" for x in np.atleast_1d(p)) + ")"


# --------------------------------------------------------------- verifiers


def verify_fraclap_eval(params: dict, seed: int) -> Outcome:
    _check_keys(
        params,
        {"field", "n", "s", "points", "count", "r_min", "r_max", "reference", "tolerance", "random_bumps", "grid_points"},
        "fraclap-eval",
    )
    reference = params.get("reference", "zero")
    if reference not in ("zero", "spectral"):
        raise ScenarioError("reference must be 'zero' or 'spectral'")
    tol = _num(params, "tolerance", 1e-3)
    dims = _dims(params)
    orders = _orders(params, 0.5)
    bumps = _int(params, "random_bumps", 0)
    name = params.get("field", "constant")
    count = _int(params, "grid_points", _int(params, "count", 12))
    r_min, r_max = _num(params, "r_min", 0.5), _num(params, "r_max", 2.0)
    if not 0 <= r_min <= r_max:
        raise ScenarioError("need 0 <= r_min <= r_max")
    if reference == "spectral" and any(n > 2 for n in dims):
        raise ScenarioError("the spectral reference supports n = 1 or 2")
    rng = np.random.default_rng(seed)
    out = Outcome()
    rows = []
    for n in dims:
        if bumps > 0:
            fields = []
            for _ in range(bumps):
                c = rng.uniform(-0.3, 0.3, size=n)
                a = float(rng.uniform(0.6, 1.0))
                # evaluate where the bump is curved but not flat
                x = c + 0.3 * a * np.eye(n)[0]
                fields.append((smooth_bump(n, c, a), [x]))
        else:
            if "points" in params:
                pts = np.asarray(params["points"], dtype=float).reshape(-1, n)
            else:
                pts = _sample_points(n, count, r_min, r_max, rng)
            fields = None
        for s in orders:
            if fields is None:
                try:
                    u = builtin_field(str(name), n, s)
                except ValueError as e:
                    raise ScenarioError(str(e)) from None
                todo = [(u, list(pts))]
            else:
                todo = fields
            for u, xs in todo:
                for x in xs:
                    val, err = eval_fraclap(u, x, s)
                    label = f"{u.name} n={n} s={s:g} x={_fmt(x)}"
                    if reference == "zero":
                        out.add(label + " |value|", abs(val), tol)
                        rows.append({"n": n, "s": s, "x": list(map(float, x)), "value": val, "err": err})
                    else:
                        with warnings.catch_warnings():
                            warnings.simplefilter("ignore", UnreliableOracleWarning)
                            ref, info = spectral_oracle(u, x, s, return_info=True)
                        rel = abs(val - ref) / max(abs(ref), 1e-12)
                        out.add(label + " relative gap to spectral", rel, tol)
                        rows.append(
                            {"n": n, "s": s, "x": list(map(float, x)), "value": val, "err": err, "spectral": ref, "aliasing": info["aliasing"]}
                        )
            out.provenance[f"C(n={n},s={s:g})"] = frac_constant(n, s)
    out.details["evaluations"] = rows
    return out


def verify_poisson(params: dict, seed: int) -> Outcome:
    _check_keys(params, {"n", "s", "t", "points", "poles", "mass_tolerance", "tolerance"}, "poisson")
    (n,) = _dims(params, default=2)[:1]
    (s,) = _orders(params, 0.75)[:1]
    t = _num(params, "t", 1.0)
    pts = np.asarray(params.get("points", [[0.0] * n, [0.3, 0.1] + [0.0] * (n - 2), [-0.2, 0.5] + [0.0] * (n - 2)]), float)
    poles = np.asarray(params.get("poles", [[2.5, 0.3] + [0.0] * (n - 2), [-1.6, 1.2] + [0.0] * (n - 2)]), float)
    pts, poles = pts.reshape(-1, n), poles.reshape(-1, n)
    if np.any(np.linalg.norm(pts, axis=1) >= t) or np.any(np.linalg.norm(poles, axis=1) <= t):
        raise ScenarioError("points must lie inside B_t and poles outside it")
    mtol, tol = _num(params, "mass_tolerance", 1e-4), _num(params, "tolerance", 1e-3)
    k = PoissonKernel(t, s, n)
    one = constant_field(1.0, n)
    out = Outcome()
    out.provenance["poisson_constant"] = k.normalization
    phi = fundamental_solution(n, "fractional", s)
    for x in pts:
        out.add(f"kernel mass at x={_fmt(x)}", abs(poisson_extend(one, k, x) - 1.0), mtol)
    for z in poles:
        u = phi.translated(z)
        for x in pts:
            val, ref = poisson_extend(u, k, x), float(u(x))
            out.add(f"reproduce Phi(.-{_fmt(z)}) at x={_fmt(x)}", abs(val - ref) / abs(ref), tol)
    return out


def _coeffs(kind: str, n: int, M: float, strength: float) -> CoefficientSet:
    if kind == "none" or M == 0:
        return CoefficientSet.zero(n, M)
    if kind == "rotation":
        return rotation_coeffs(n, strength, bound_M=M)
    if kind == "constant":
        off = np.zeros(n)
        off[0] = M
        return CoefficientSet.affine(np.zeros((n, n)), off, bound_M=M, label="constant drift")
    raise ScenarioError(f"unknown drift {kind!r}; choose none, constant or rotation")


def verify_barrier(params: dict, seed: int) -> Outcome:
    _check_keys(params, {"families", "M", "eps", "r0_min", "drift", "strength", "mollified_ratio"}, "barrier")
    fams = params.get("families")
    if not isinstance(fams, list) or not fams:
        raise ScenarioError("families must be a nonempty list of {family, n, s}")
    Ms = _num_list(params, "M", [0.0, 1.0])
    epss = _num_list(params, "eps", [1e-2, 1e-3])
    r0_min = _num(params, "r0_min", 2.0**-4)
    drift = params.get("drift", "constant")
    strength = _num(params, "strength", 0.3)
    ratio = params.get("mollified_ratio")
    out = Outcome()
    rows = []
    for spec in fams:
        if not isinstance(spec, dict) or spec.get("family") not in FAMILIES:
            raise ScenarioError(f"family entries need 'family' in {FAMILIES}")
        fam, n, s = spec["family"], int(spec.get("n", 2)), spec.get("s")
        for M in Ms:
            r0s = []
            for eps in epss:
                try:
                    b = make_barrier(fam, eps, M=M, dim=n, s=s)
                    co = _coeffs(drift, n, M, strength)
                    r0, rep = certify_barrier_inequality(b, co)
                except ValueError as e:
                    raise ScenarioError(str(e)) from None
                r0s.append(r0)
                tag = f"{fam} n={n}" + (f" s={s:g}" if s is not None else "") + f" M={M:g} eps={eps:g}"
                out.add(tag + " certified r0", r0, r0_min, ">=")
                out.provenance[tag + " sigma"] = b.sigma
                out.provenance[tag + " alpha"] = b.alpha
                d = rep.to_dict()
                rows.append({"case": tag, "r0": r0, "max_margin": d["max_margin"], "max_error_estimate": d["max_error_estimate"]})
                if ratio is not None:
                    mrep = certify_mollified_barrier(b, co, MollifierKernel(float(ratio) * eps, n))
                    md = mrep.to_dict()
                    out.add(tag + f" mollified (delta={float(ratio):g} eps) max margin", md["max_margin"], 1e-9)
                    rows.append({"case": tag + " mollified", "points": md["points"], "max_margin": md["max_margin"]})
            if len(r0s) > 1:
                spread = max(abs(math.log2(a / b)) for a in r0s for b in r0s) if min(r0s) > 0 else float("inf")
                out.add(f"{fam} n={n} M={M:g} r0 agreement across eps (log2 spread)", spread, 0.0)
    out.details["certifications"] = rows
    return out


def verify_mollifier(params: dict, seed: int) -> Outcome:
    _check_keys(params, {"n", "delta", "grid_points", "ball_radius", "M", "drift_matrix", "deltas", "decay_ratio", "slack"}, "mollifier")
    (n,) = _dims(params, default=2)[:1]
    if n < 2:
        raise ScenarioError("the commutator scenario needs n >= 2")
    delta = _num(params, "delta", 0.05)
    count = _int(params, "grid_points", 100)
    side = max(2, int(round(math.sqrt(count))))
    R = _num(params, "ball_radius", 0.5)
    M = _num(params, "M", 1.0)
    slack = _num(params, "slack", 1e-6)
    cap = lipschitz_cap(n)
    # a rotation commutes with the radial cap and gives N = 0, so use a generic affine drift
    A = np.eye(n) * 0.25
    A[:2, :2] = [[0.3, 0.2], [-0.1, 0.25]]
    A = np.asarray(params.get("drift_matrix", A.tolist()), float)
    if A.shape != (n, n) or not np.all(np.isfinite(A)):
        raise ScenarioError(f"drift_matrix must be a finite {n}x{n} array")
    co = CoefficientSet.affine(A, bound_M=M)
    dirs = np.zeros((side, n))
    ang = np.linspace(0, 2 * math.pi, side, endpoint=False)
    dirs[:, 0], dirs[:, 1] = np.cos(ang), np.sin(ang)
    grid = np.array([R * r * d for r in np.linspace(0.0, 1.0, side) for d in dirs])
    rep = commutator_report(cap, co, MollifierKernel(delta, n), grid)
    out = Outcome()
    excess = float(np.max(np.abs(rep.n_delta_values) - rep.bound_rhs))
    out.add(f"pointwise bound on {len(grid)} points: max(|N| - bound)", excess, slack)
    out.details["pointwise"] = rep.to_dict()
    deltas = _num_list(params, "deltas", [0.1, 0.05, 0.025, 0.0125])
    ratio_tol = _num(params, "decay_ratio", 0.7)
    ident = CoefficientSet.affine(np.eye(n), label="b(x) = x")
    gr, w = square_grid(n, 0.8, 20)
    norms = [commutator_report(cap, ident, MollifierKernel(d, n), gr, w, with_bound=False).l1_norm for d in deltas]
    for (d0, a), (d1, b) in zip(zip(deltas, norms), zip(deltas[1:], norms[1:])):
        out.add(f"L1 commutator ratio delta {d0:g} -> {d1:g}", b / a, ratio_tol)
    out.details["l1_norms"] = dict(zip([f"{d:g}" for d in deltas], norms))
    out.provenance["coeff_bound"] = M
    return out


def verify_compose(params: dict, seed: int) -> Outcome:
    _check_keys(params, {"battery", "s", "min_floor"}, "compose")
    count = _int(params, "battery", 20)
    (s,) = _orders(params, 0.75)[:1]
    floor = _num(params, "min_floor", 0.8)
    bat = make_battery(2, count, seed=seed)
    out = Outcome()

    def record(tag, rep):
        worst = min(e["margin"] + e["tol"] for e in rep.report.entries)
        out.add(f"{tag}: min over battery of margin + tol", worst, 0.0, ">=")
        out.details[tag] = rep.to_dict()

    cl = OperatorSpec("classical", 2)
    u, v = concave_cap(2), concave_cap(2, center=[0.3, 0.1], height=0.7, curvature=0.4)
    try:
        record("two-cap classical max", compose_max(u, v, constant_field(4.0, 2), constant_field(1.6, 2), cl, bat))
        fr = OperatorSpec("fractional", 2, s)
        u, f = cauchy_field(2, 0.5), cauchy_fraclap(2, s, 0.5)
        v = cauchy_field(2, 0.5, center=[0.4, 0.0], amplitude=0.9)
        g = cauchy_fraclap(2, s, 0.5, center=[0.4, 0.0], amplitude=0.9)
        record("fractional Cauchy pair max", compose_max(u, v, f, g, fr, bat))
        record("min with constant floor", compose_min(u, constant_field(floor, 2), f, constant_field(0.0, 2), fr, bat))
    except PreconditionError as e:
        out.inconclusive = True
        out.details["precondition_failure"] = {"message": str(e), "report": e.report.to_dict()}
    out.provenance["battery_size"] = len(bat)
    return out


def verify_maxprinciple(params: dict, seed: int) -> Outcome:
    _check_keys(params, {"n", "s", "M", "orders", "bounds", "m", "strength", "grid_points", "classical", "floor_tolerance"}, "maxprinciple")
    (n,) = _dims(params, default=2)[:1]
    (s,) = _orders(params, 0.75)[:1]
    M = _num(params, "M", 1.0)
    m = _num(params, "m", 1.0)
    if not m > 0:
        raise ScenarioError("m must be positive")
    if M > 0 and s <= 0.5:
        raise ScenarioError("a nonzero drift requires s > 1/2")
    out = Outcome()
    for so in _num_list(params, "orders", [0.25, 0.5, 0.75]):
        for Mo in _num_list(params, "bounds", [0.0, 1.0]):
            c = compute_principle_constants(n, so, Mo, m=m)
            out.add(f"alpha(n={n}, s={so:g}, M={Mo:g}) > 0", c.alpha, 0.0, ">=")
            out.add(f"alpha(n={n}, s={so:g}, M={Mo:g}) < 1", c.alpha, 1.0)
            out.provenance[f"constants s={so:g} M={Mo:g}"] = c.to_dict()
    consts = compute_principle_constants(n, s, M, m=m)
    out.provenance["alpha"] = consts.alpha
    co = rotation_coeffs(n, _num(params, "strength", 0.3), bound_M=M) if M > 0 else None
    radial = _int(params, "grid_points", 64)
    runs = [("fractional", name, u, p, co, s) for name, u, p in max_principle_battery(n, s, m)]
    if params.get("classical", True):
        runs += [("classical", name, u, p, None, None) for name, u, p in max_principle_battery(n, None, m)]
    ftol = _num(params, "floor_tolerance", 1e-3)
    for kind, name, u, punct, cset, so in runs:
        grid = ball_grid(n, 1e-4, 1.0 - 1e-9, radial, punctured=punct)
        rep = verify_max_principle(u, cset, so, m, punct, consts if kind == "fractional" else None, grid=grid, floor_tol=ftol)
        tag = f"{kind} {name}"
        if rep.verdict == "inconclusive":
            out.inconclusive = True
        if kind == "fractional":
            out.add(f"{tag}: grid min - alpha m", rep.grid_min - consts.alpha * m, -1e-9, ">=")
        else:
            out.add(f"{tag}: grid min - m", rep.grid_min - m, -ftol, ">=")
        out.add(f"{tag}: hypotheses and verdict", float(rep.verdict == "pass"), 1.0, ">=")
        out.details[tag] = rep.to_dict()
    return out


def verify_bocher(params: dict, seed: int) -> Outcome:
    _check_keys(params, {"cases", "weights", "relative_tolerance", "sign_tolerance", "dipole_tolerance"}, "bocher")
    cases = params.get("cases", [{"kind": "fractional", "n": 2, "s": 0.75}, {"kind": "classical", "n": 3}])
    weights = _num_list(params, "weights", [0.5, 2.0, 10.0])
    rtol = _num(params, "relative_tolerance", 0.05)
    stol = _num(params, "sign_tolerance", 5e-2)
    dtol = _num(params, "dipole_tolerance", 5e-2)
    out = Outcome()
    for case in cases:
        try:
            spec = OperatorSpec(case["kind"], int(case["n"]), case.get("s"))
        except (KeyError, ValueError, TypeError) as e:
            raise ScenarioError(f"bad case {case!r}: {e}") from None
        tag = f"{spec.kind} n={spec.dim}" + (f" s={spec.s:g}" if spec.is_fractional else "")
        for name, u, a in bocher_battery(spec, weights):
            dec = recover_singular_coefficient(u, spec)
            if a in weights and name.endswith("Phi + 1"):
                out.add(f"{tag} {name}: |a_hat - a| / a", abs(dec.a_hat - a) / a, rtol)
            out.add(f"{tag} {name}: a_hat", dec.a_hat, -stol, ">=")
            out.add(f"{tag} {name}: |d_hat|", float(np.linalg.norm(dec.d_hat)), dtol)
            for row in dec.annulus_masses:
                out.add(f"{tag} {name}: mass on ({row['inner']:g}, {row['outer']:g})", row["mass"], -row["tol"], ">=")
            out.details[f"{tag} {name}"] = dec.to_dict()
    return out


def verify_counterexamples(params: dict, seed: int) -> Outcome:
    _check_keys(params, {"battery", "theta", "tolerance"}, "counterexamples")
    theta = _num(params, "theta", 0.5)
    if not 0 < theta < 1:
        raise ScenarioError("theta must lie in (0, 1)")
    res = counterexample_suite_n1(make_battery(1, _int(params, "battery", 20), seed=seed), theta, tol=_num(params, "tolerance", 1e-6))
    out = Outcome()
    for c in res["checks"]:
        if "mass ratio" in c["label"]:
            out.add(c["label"], c["value"], c["tol"], ">=")
        elif c["label"].startswith("mass at") or c["label"].startswith("masses inside"):
            out.add(c["label"], c["value"], 1.0, ">=")
        else:
            out.add(c["label"], c["value"], c["tol"])
    out.details = {k: v for k, v in res.items() if k != "checks"}
    return out


VERIFIERS = {
    "fraclap-eval": verify_fraclap_eval,
    "poisson": verify_poisson,
    "barrier": verify_barrier,
    "mollifier": verify_mollifier,
    "compose": verify_compose,
    "maxprinciple": verify_maxprinciple,
    "bocher": verify_bocher,
    "counterexamples": verify_counterexamples,
}
