"""Acceptance suite: one test per bundled scenario ac-01 ... ac-11."""

import json
import os
import subprocess
import sys
import time
from pathlib import Path

import pytest

from fraclap_kit import cli

from .conftest import ACCEPTANCE_LINES

ROOT = Path(__file__).resolve().parents[1]
SCENARIOS = ROOT / "scenarios"

# scenario -> runtime limit in seconds
LIMITS = {
    "ac-01-fundamental": 30,
    "ac-02-dual-method": 60,
    "ac-03-poisson": 60,
    "ac-04-barrier-classical": 120,
    "ac-05-barrier-fractional": 180,
    "ac-06-commutator": 60,
    "ac-07-compose": 120,
    "ac-08-maxprinciple": 180,
    "ac-09-bocher": 180,
    "ac-10-counterexamples": 30,
}

_RUNS: dict = {}


def _run(name):
    if name not in _RUNS:
        scn = cli.load_scenario(str(SCENARIOS / f"{name}.json"))
        t0 = time.perf_counter()
        rep = cli.run_scenario(scn)
        _RUNS[name] = (rep, cli.dumps_json(rep), time.perf_counter() - t0)
    return _RUNS[name]


def _record(name, ok, note):
    ACCEPTANCE_LINES[name] = f"{name:28s} {'PASS' if ok else 'FAIL'}  {note}"
    print(ACCEPTANCE_LINES[name])


def _check(name, extra=None):
    rep, _, secs = _run(name)
    failing = [m["label"] for m in rep["margins"] if not m["pass"]]
    problems = list(failing)
    if rep["verdict"] != "pass":
        problems.append(f"verdict {rep['verdict']}: {rep.get('error', '')}")
    if secs >= LIMITS[name]:
        problems.append(f"runtime {secs:.1f}s over {LIMITS[name]}s")
    if extra is not None:
        problems += extra(rep)
    _record(name, not problems, f"{len(rep['margins'])} margins, {secs:.1f}s" + (f"; {problems[:3]}" if problems else ""))
    assert not problems, problems
    return rep


def _labels(rep, *words):
    return [m for m in rep["margins"] if all(w in m["label"] for w in words)]


def test_ac01_fundamental_solution_is_harmonic():
    def extra(rep):
        out = []
        for s in ("0.4", "0.75"):
            ms = _labels(rep, f"s={s}")
            if len(ms) != 12:
                out.append(f"expected 12 points for s={s}, got {len(ms)}")
            if any(m["tolerance"] > 1e-3 for m in ms):
                out.append("tolerance looser than 1e-3")
        return out

    _check("ac-01-fundamental", extra)


def test_ac02_quadrature_matches_spectral():
    def extra(rep):
        out = []
        for n in (1, 2):
            for s in (0.3, 0.5, 0.8):
                ms = _labels(rep, f"n={n} s={s}")
                if len(ms) != 5:
                    out.append(f"n={n} s={s}: {len(ms)} bumps")
        if any(m["tolerance"] > 1e-3 for m in rep["margins"]):
            out.append("tolerance looser than 1e-3")
        return out

    _check("ac-02-dual-method", extra)


def test_ac03_poisson_kernel():
    def extra(rep):
        mass = _labels(rep, "kernel mass")
        repro = _labels(rep, "reproduce")
        out = []
        if len(mass) != 3 or any(m["tolerance"] > 1e-4 for m in mass):
            out.append("kernel mass checks")
        if len({m["label"].split(" at ")[0] for m in repro}) != 2 or any(m["tolerance"] > 1e-3 for m in repro):
            out.append("reproduction checks")
        return out

    _check("ac-03-poisson", extra)


def test_ac04_classical_barriers():
    def extra(rep):
        out = []
        for fam in ("classical-n3-power", "classical-n2-log"):
            for M in (0, 1):
                r0 = _labels(rep, fam, f"M={M}", "certified r0")
                agree = _labels(rep, fam, f"M={M}", "agreement")
                if len(r0) != 2 or any(m["value"] < 2**-4 for m in r0):
                    out.append(f"{fam} M={M}: r0")
                if len(agree) != 1:
                    out.append(f"{fam} M={M}: agreement")
        return out

    _check("ac-04-barrier-classical", extra)


def test_ac05_fractional_barrier():
    def extra(rep):
        r0 = _labels(rep, "certified r0")
        moll = _labels(rep, "mollified")
        out = []
        if not r0 or any(m["value"] < 2**-4 for m in r0):
            out.append("r0 below 2^-4")
        if not moll:
            out.append("mollified variant missing")
        return out

    _check("ac-05-barrier-fractional", extra)


def test_ac06_commutator():
    def extra(rep):
        out = []
        if not _labels(rep, "100 points"):
            out.append("pointwise bound on 100 points missing")
        ratios = _labels(rep, "ratio")
        if len(ratios) != 3 or any(m["value"] > 0.7 for m in ratios):
            out.append("L1 decay ratios")
        return out

    _check("ac-06-commutator", extra)


def test_ac07_compositions():
    def extra(rep):
        need = ("two-cap classical max", "fractional Cauchy pair max", "min with constant floor")
        return [f"missing {k}" for k in need if not _labels(rep, k)]

    _check("ac-07-compose", extra)


def test_ac08_maximum_principles():
    def extra(rep):
        out = []
        for s in (0.25, 0.5, 0.75):
            for M in (0, 1):
                if len(_labels(rep, f"alpha(n=2, s={s}, M={M})")) != 2:
                    out.append(f"alpha s={s} M={M}")
        for name in ("constant", "punctured-fundamental", "nonlocal-dip"):
            if not _labels(rep, f"fractional {name}"):
                out.append(f"fractional {name}")
        floor = _labels(rep, "classical", "grid min - m")
        if not floor or any(m["tolerance"] > 1e-3 for m in floor):
            out.append("classical floor")
        return out

    _check("ac-08-maxprinciple", extra)


def test_ac09_bocher_decomposition():
    def extra(rep):
        out = []
        for kind in ("fractional n=2 s=0.75", "classical n=3"):
            for a in ("0.5", "2", "10"):
                ms = _labels(rep, kind, f"{a} Phi + 1", "|a_hat - a| / a")
                if len(ms) != 1 or ms[0]["tolerance"] > 0.05:
                    out.append(f"{kind} a={a}")
        if not _labels(rep, "|d_hat|") or not _labels(rep, "mass on"):
            out.append("dipole or mass checks missing")
        return out

    _check("ac-09-bocher", extra)


def test_ac10_one_dimensional_counterexamples():
    def extra(rep):
        out = []
        for label in ("|x| pairing = -2 phi(0)", "step pairing"):
            ms = _labels(rep, label)
            if len(ms) != 1 or ms[0]["tolerance"] > 1e-6:
                out.append(label)
        ratio = _labels(rep, "mass ratio")
        if len(ratio) != 1 or not ratio[0]["value"] > 2:
            out.append("mass ratio")
        return out

    _check("ac-10-counterexamples", extra)


def test_ac11_reruns_are_byte_identical(tmp_path):
    names = sorted(LIMITS)
    first = [_run(n)[1] for n in names]
    # a fresh process, so no in-memory cache is shared with the first run
    env = dict(os.environ)
    res = subprocess.run(
        [sys.executable, "-m", "fraclap_kit.cli", "run", *[str(SCENARIOS / f"{n}.json") for n in names], "--out", str(tmp_path / "rerun.json")],
        capture_output=True,
        text=True,
        env=env,
        cwd=ROOT,
    )
    again = json.loads((tmp_path / "rerun.json").read_text(encoding="utf-8"))
    mismatched = [n for n, a, b in zip(names, first, again) if cli.dumps_json(b) != a]
    problems = ([f"exit {res.returncode}"] if res.returncode != 0 else []) + [f"differs: {n}" for n in mismatched]
    # the bundled determinism scenario itself must load and name exactly these scenarios
    scn = cli.load_scenario(str(SCENARIOS / "ac-11-determinism.json"))
    if scn["verifier"] != "determinism" or sorted(scn["parameters"]["scenarios"]) != names:
        problems.append("ac-11 scenario does not cover ac-01..ac-10")
    _record("ac-11-determinism", not problems, f"{len(names)} reports compared" + (f"; {problems}" if problems else ""))
    assert not problems, problems


def test_determinism_verifier_on_cheap_scenarios():
    scn = cli.normalize_scenario(
        {"name": "det", "verifier": "determinism", "parameters": {"scenarios": ["ac-03-poisson", "ac-10-counterexamples"], "runs": 2}}
    )
    rep = cli.run_scenario(scn)
    assert rep["verdict"] == "pass" and len(rep["margins"]) == 2
