"""Command line front end: ``flk run``, ``flk list`` and ``flk eval``."""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .verifiers import VERIFIERS, ScenarioError

EXIT_PASS, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_INVALID = 0, 1, 2, 3
VERDICT_CODES = {"pass": EXIT_PASS, "fail": EXIT_FAIL, "inconclusive": EXIT_INCONCLUSIVE, "invalid": EXIT_INVALID}
CSV_COLUMNS = ("scenario", "label", "value", "tolerance", "pass")
ALL_VERIFIERS = tuple(VERIFIERS) + ("determinism",)

# flag name -> parameter key it overrides
FLAG_PARAMS = {"frac_order": "s", "coeff_bound": "M", "grid_points": "grid_points"}


def scenario_dir() -> Path:
    """Bundled scenarios: $FLK_SCENARIO_DIR, else ./scenarios, else the copy next to the source tree."""
    env = os.environ.get("FLK_SCENARIO_DIR")
    if env:
        return Path(env)
    here = Path.cwd() / "scenarios"
    if here.is_dir():
        return here
    return Path(__file__).resolve().parents[2] / "scenarios"


def resolve_scenario(ref: str) -> Path:
    p = Path(ref)
    if p.is_file():
        return p
    for cand in (scenario_dir() / ref, scenario_dir() / f"{ref}.json"):
        if cand.is_file():
            return cand
    raise ScenarioError(f"scenario file not found: {ref}")


def load_scenario(ref: str) -> dict:
    path = resolve_scenario(ref)
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}: invalid JSON ({e})") from None
    return normalize_scenario(doc, str(path))


def normalize_scenario(doc, origin: str = "<scenario>") -> dict:
    if not isinstance(doc, dict):
        raise ScenarioError(f"{origin}: a scenario must be a JSON object")
    unknown = sorted(set(doc) - {"name", "verifier", "parameters", "seed", "description"})
    if unknown:
        raise ScenarioError(f"{origin}: unknown scenario field(s) {', '.join(unknown)}")
    if doc.get("verifier") not in ALL_VERIFIERS:
        raise ScenarioError(f"{origin}: verifier must be one of {', '.join(ALL_VERIFIERS)}")
    params = doc.get("parameters", {})
    if not isinstance(params, dict):
        raise ScenarioError(f"{origin}: parameters must be an object")
    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ScenarioError(f"{origin}: seed must be an integer")
    return {
        "name": str(doc.get("name", Path(origin).stem)),
        "verifier": doc["verifier"],
        "parameters": copy.deepcopy(params),
        "seed": seed,
    }


def apply_overrides(scn: dict, overrides: dict) -> dict:
    out = copy.deepcopy(scn)
    for key, value in overrides.items():
        if value is not None:
            out["parameters"][key] = value
    return out


# --------------------------------------------------------------- reports


def clean(obj):
    """Plain JSON types: numpy scalars and arrays unwrapped, non-finite floats as strings."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def _verdict(margins, inconclusive: bool) -> str:
    if all(m["pass"] for m in margins):
        return "pass"
    return "inconclusive" if inconclusive else "fail"


def _run_determinism(scn: dict) -> dict:
    params = scn["parameters"]
    names = params.get("scenarios")
    if not isinstance(names, list) or not names:
        raise ScenarioError("determinism needs a nonempty 'scenarios' list")
    runs = int(params.get("runs", 2))
    if runs < 2:
        raise ScenarioError("determinism needs runs >= 2")
    workers = int(params.get("parallel", 1))
    scns = [load_scenario(n) for n in names]
    if any(s["verifier"] == "determinism" for s in scns):
        raise ScenarioError("determinism scenarios cannot nest")
    outputs = [[dumps_json(r) for r in run_many(scns, workers)] for _ in range(runs)]
    margins = []
    for i, s in enumerate(scns):
        same = all(out[i] == outputs[0][i] for out in outputs[1:])
        margins.append({"label": f"{s['name']}: byte-identical over {runs} runs", "value": 0.0 if same else 1.0, "tolerance": 0.0, "sense": "<=", "pass": same})
    return {"margins": margins, "provenance": {"runs": runs}, "details": {"verdicts": [json.loads(o)["verdict"] for o in outputs[0]]}, "inconclusive": False}


def run_scenario(scn: dict, timings: bool = False) -> dict:
    """Run one normalized scenario and return its report as plain JSON data."""
    t0 = time.perf_counter()
    base = {"scenario": scn}
    try:
        if scn["verifier"] == "determinism":
            res = _run_determinism(scn)
        else:
            out = VERIFIERS[scn["verifier"]](scn["parameters"], scn["seed"])
            res = {"margins": out.margins, "provenance": out.provenance, "details": out.details, "inconclusive": out.inconclusive}
    except ValueError as e:
        # ScenarioError and library precondition failures alike
        return clean({**base, "verdict": "invalid", "error": str(e), "margins": [], "provenance": {}, "details": {}})
    report = {
        **base,
        "verdict": _verdict(res["margins"], res["inconclusive"]),
        "margins": res["margins"],
        "provenance": {"quad_budget": _budget(), **res["provenance"]},
        "details": res["details"],
    }
    if timings:
        report["timings_ms"] = {"total": round(1000 * (time.perf_counter() - t0), 1)}
    return clean(report)


def _budget() -> int:
    from .field_core import quad_budget

    return quad_budget()


def _worker(args):
    scn, timings = args
    return run_scenario(scn, timings)


def run_many(scns: list, parallel: int = 1, timings: bool = False) -> list:
    """Reports in input order; with parallel > 1 the scenarios run in worker processes."""
    jobs = [(s, timings) for s in scns]
    if parallel <= 1 or len(scns) <= 1:
        return [_worker(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=parallel) as ex:
        return list(ex.map(_worker, jobs))


def dumps_json(reports) -> str:
    return json.dumps(reports, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def dumps_csv(reports: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    w.writerow(CSV_COLUMNS)
    for r in reports:
        for m in r["margins"]:
            w.writerow([r["scenario"]["name"], m["label"], repr(m["value"]), repr(m["tolerance"]), "true" if m["pass"] else "false"])
    return buf.getvalue()


def emit_report(reports: list, fmt: str, path: str | None) -> None:
    """Write JSON (one object, or an array for several scenarios) or CSV to path, or stdout."""
    if fmt == "json":
        text = dumps_json(reports[0] if len(reports) == 1 else reports)
    elif fmt == "csv":
        text = dumps_csv(reports)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as e:
        raise OSError(f"cannot write report to {path}: {e.strerror or e}") from e


def exit_status(reports: list) -> int:
    codes = [VERDICT_CODES[r["verdict"]] for r in reports]
    for code in (EXIT_INVALID, EXIT_FAIL, EXIT_INCONCLUSIVE):
        if code in codes:
            return code
    return EXIT_PASS


# ------------------------------------------------------------------ commands


def cmd_run(args) -> int:
    overrides = {FLAG_PARAMS[k]: getattr(args, k) for k in FLAG_PARAMS}
    scns = []
    for ref in args.scenarios:
        try:
            scn = load_scenario(ref)
        except (ScenarioError, OSError) as e:
            print(f"flk: {e}", file=sys.stderr)
            return EXIT_INVALID
        scn = apply_overrides(scn, overrides)
        if args.seed is not None:
            scn["seed"] = args.seed
        scns.append(scn)
    reports = run_many(scns, args.parallel, args.timings)
    for r in reports:
        if r["verdict"] == "invalid":
            print(f"flk: {r['scenario']['name']}: {r['error']}", file=sys.stderr)
    try:
        emit_report(reports, args.report_format, args.out)
    except OSError as e:
        print(f"flk: {e}", file=sys.stderr)
        return EXIT_INVALID
    return exit_status(reports)


def cmd_list(args) -> int:
    d = scenario_dir()
    files = sorted(d.glob("*.json")) if d.is_dir() else []
    for f in files:
        try:
            with open(f, encoding="utf-8") as fh:
                doc = json.load(fh)
            print(f"{f.stem:28s} {doc.get('verifier', '?'):16s} {doc.get('description', '')}")
        except (OSError, json.JSONDecodeError):
            print(f"{f.stem:28s} (unreadable)")
    print("verifiers: " + ", ".join(ALL_VERIFIERS))
    return EXIT_PASS


def _parse_point(text: str) -> list:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise ScenarioError(f"bad point {text!r}; expected comma-separated numbers") from None


def cmd_eval(args) -> int:
    from .fields import builtin_field
    from .fraclap_op import eval_fraclap

    try:
        x = _parse_point(args.point)
        u = builtin_field(args.field, len(x), args.frac_order)
        val, err = eval_fraclap(u, x, args.frac_order)
    except ValueError as e:
        print(f"flk: {e}", file=sys.stderr)
        return EXIT_INVALID
    out = clean({"field": args.field, "point": x, "s": args.frac_order, "value": val, "error_estimate": err})
    sys.stdout.write(dumps_json(out))
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flk", description="Verification scenarios for fractional and classical Laplacians.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one or more scenario files")
    r.add_argument("scenarios", nargs="+", help="scenario JSON files or bundled scenario names")
    r.add_argument("--frac-order", type=float, help="override the fractional order s")
    r.add_argument("--coeff-bound", type=float, help="override the coefficient bound M")
    r.add_argument("--grid-points", type=int, help="override the grid size parameter")
    r.add_argument("--seed", type=int, help="override the scenario seed")
    r.add_argument("--report-format", choices=("json", "csv"), default="json")
    r.add_argument("--out", help="write the report here instead of stdout")
    r.add_argument("--parallel", type=int, default=1, metavar="N", help="run scenarios on N worker processes")
    r.add_argument("--timings", action="store_true", help="add wall-clock timings (breaks byte-identical reruns)")
    r.set_defaults(func=cmd_run)

    ls = sub.add_parser("list", help="list bundled scenarios and verifiers")
    ls.set_defaults(func=cmd_list)

    e = sub.add_parser("eval", help="evaluate (-Delta)^s of a builtin field at one point")
    e.add_argument("--field", required=True, help="builtin field name")
    e.add_argument("--point", required=True, help="comma-separated coordinates, e.g. 0.5,0.2")
    e.add_argument("--frac-order", type=float, required=True, help="fractional order s in (0, 1)")
    e.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits with 2 on usage errors; invalid input is 3 here
        return EXIT_INVALID if e.code not in (0, None) else EXIT_PASS
    if getattr(args, "parallel", 1) < 1:
        print("flk: --parallel must be at least 1", file=sys.stderr)
        return EXIT_INVALID
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
