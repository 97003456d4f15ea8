"""Machine-readable run reports.

Reports are plain JSON objects.  Integer matrices are dense row-major lists
of Python ints; floats are rounded to ten significant digits so that
repeated runs produce identical bytes.
"""
from __future__ import annotations

import json
import time
from typing import Dict, List, Optional

import numpy as np

from .specfile import ProblemSpec

SCHEMA_VERSION = "1.0"

_INT_MATRIX = {"type": "array", "items": {"type": "array", "items": {"type": "integer"}}}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "kind", "problem", "settings", "results", "checks", "ok"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "kind": {"enum": ["morse", "linear", "exc"]},
        "problem": {"type": "object", "required": ["name"]},
        "settings": {"type": "object", "required": ["seed", "tol_scale"]},
        "results": {"type": "object"},
        "checks": {"type": "object", "additionalProperties": {"type": "boolean"}},
        "ok": {"type": "boolean"},
        "timing": {"type": "object", "additionalProperties": {"type": "number"}},
    },
    "if": {"properties": {"kind": {"const": "morse"}}},
    "then": {"properties": {"results": {
        "required": ["rest_points", "orbits", "complex", "homology", "morse_relations"],
        "properties": {"complex": {
            "type": "object",
            "properties": {"boundaries": {"type": "object", "additionalProperties": _INT_MATRIX}},
        }},
    }}},
}


def rnd(x, digits: int = 10):
    """Round floats (recursively) to ``digits`` significant digits."""
    if isinstance(x, dict):
        return {k: rnd(v, digits) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [rnd(v, digits) for v in x]
    if isinstance(x, np.ndarray):
        return rnd(x.tolist(), digits)
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        v = float(f"{float(x):.{digits}g}")
        return 0.0 if v == 0 else v
    return x


def phase_from_seed(seed: int) -> float:
    """Rotation of the launch-angle grid, in grid steps."""
    return float(np.random.default_rng(seed).random())


# ------------------------------------------------------------------- morse

def _morse_results(spec: ProblemSpec, problem, seed: int, threads: int):
    from .morse.broken import convergence_profile
    from .morse.engine import analyze

    rep = analyze(problem, threads=threads, flip=spec.flip, phase=phase_from_seed(seed))
    cx = rep.complex
    rps = [{
        "label": p.label,
        "location": p.location,
        "value": p.value,
        "morse_index": p.morse_index,
        "relative_index": p.relative_index,
        "hessian_ok": p.hessian_ok,
    } for p in rep.rest_points]
    orbits = [{
        "source": o.source,
        "target": o.target,
        "sign": int(o.sign),
        "param": o.param,
        "end_distance": o.end_distance,
        "n_samples": int(len(o.y)),
        "transversality_angle": o.diagnostics.get("transversality_angle"),
        "tangent_intersection_dim": o.diagnostics.get("tangent_intersection_dim"),
    } for o in rep.orbits]
    broken = []
    for pair in rep.broken:
        entry = {"cancels": pair.cancels, "lines": []}
        for line in (pair.a, pair.b):
            sw = rep.sweeps[line.first.source]
            prof = convergence_profile(problem, rep.rest_points, sw, line)
            entry["lines"].append({
                "path": [line.first.source, line.first.target, line.second.target],
                "sign": line.sign,
                "angle": line.angle,
                "hausdorff": prof,
            })
        broken.append(entry)
    degrees = sorted(cx.generators)
    results = {
        "rest_points": rps,
        "orbits": orbits,
        "complex": {
            "degrees": degrees,
            "generators": {str(q): list(cx.generators[q]) for q in degrees},
            "boundaries": {str(q): [[int(v) for v in row] for row in np.asarray(B).tolist()]
                           for q, B in sorted(cx.boundaries.items())},
            "counts": [list(c) for c in rep.counts()],
        },
        "homology": {
            "betti": {str(q): b for q, b in sorted(rep.homology.betti.items())},
            "torsion": {str(q): t for q, t in sorted(rep.homology.torsion.items())},
        },
        "morse_relations": {
            "chain_dims": {str(q): c for q, c in cx.chain_dims.items()},
            "Q": {str(q): v for q, v in sorted(rep.morse_Q.items())},
            "holds": rep.morse_poly_ok,
        },
        "broken_lines": broken,
        "lyapunov_violations": problem.lyapunov_violations(),
        "non_hyperbolic": [{"location": x, "reason": msg} for x, msg in rep.non_hyperbolic],
    }
    checks = dict(rep.checks())
    checks["broken_line_convergence"] = all(
        bool(np.all(np.diff(ln["hausdorff"]) < 0)) for b in broken for ln in b["lines"])
    checks["lyapunov_function"] = results["lyapunov_violations"] == 0
    return results, checks


# ------------------------------------------------------------------ linear

def _linear_results(spec: ProblemSpec):
    from .ode_operator import construct_costra, stable_unstable

    n_half, k = spec.params["n_half"], spec.params["k"]
    su = stable_unstable(construct_costra(n_half, k))
    pd = su.pair
    results = {
        "n_half": n_half,
        "k": k,
        "fredholm_index": su.fredholm_index,
        "residual": su.residual,
        "horizon": su.T_used,
        "dim_Ws": su.Ws.dim,
        "dim_Wu": su.Wu.dim,
        "intersection_dim": pd.intersection.dim,
        "cosum_dim": pd.cosum.dim,
    }
    checks = {
        "fredholm_index": su.fredholm_index == k,
        "residual": su.residual < 1e-6,
        "sum_full_rank": pd.cosum.dim == 0,
    }
    if spec.builtin == "section4":
        dims = [1, pd.intersection.dim + 1]
        results["component_dims"] = dims
        checks["component_dims"] = dims == [1, k + 1]
    return results, checks


# --------------------------------------------------------------------- exc

def _exc_results(spec: ProblemSpec, tol: float = 1e-6):
    from .morse.diagnostics import exc_regression

    K = spec.params["K"]
    ks = [k for k in (1, 4, 9) if k <= K] or [K]
    errs = exc_regression(K, ks, (0.5, 1.0))
    results = {"K": K, "errors": [{"k": k, "t": t, "error": e} for (k, t), e in sorted(errs.items())]}
    return results, {"exc_regression": max(errs.values()) < tol}


def build_report(spec: ProblemSpec, seed: int = 0, tol_scale: float = 1.0, threads: int = 1,
                 timing: bool = False) -> dict:
    """Run the pipeline for ``spec`` and return the report object.

    Raises the library errors of the pipeline unchanged (``BoundaryNotSquareZero``,
    ``NonTransverse``, ...).  Wall-clock timings are only included when
    ``timing`` is set, since they would break byte-identical output.
    """
    t0 = time.perf_counter()
    problem_info: Dict[str, object] = {"name": spec.name}
    if spec.builtin is not None:
        problem_info["builtin"] = spec.builtin
        problem_info["params"] = dict(spec.params)
    settings: Dict[str, object] = {"seed": seed, "tol_scale": tol_scale}
    if spec.kind == "morse":
        problem = spec.build(tol_scale)
        problem_info["dim"] = problem.dim
        settings["sweep_phase"] = phase_from_seed(seed)
        settings["tolerances"] = problem.tol.as_dict()
        if spec.flip is not None:
            settings["flip"] = list(spec.flip)
        results, checks = _morse_results(spec, problem, seed, threads)
    elif spec.kind == "linear":
        results, checks = _linear_results(spec)
    else:
        results, checks = _exc_results(spec)
    out = {
        "schema_version": SCHEMA_VERSION,
        "kind": spec.kind,
        "problem": problem_info,
        "settings": settings,
        "results": results,
        "checks": checks,
        "ok": all(checks.values()),
    }
    if timing:
        out["timing"] = {"wall_seconds": time.perf_counter() - t0}
    out = rnd(out)
    validate_report(out)
    return out


def validate_report(rep: dict) -> None:
    import jsonschema

    jsonschema.validate(rep, REPORT_SCHEMA)


def dumps(rep: dict) -> str:
    return json.dumps(rep, indent=2, sort_keys=True) + "\n"


def summary_lines(rep: dict) -> List[str]:
    lines = [f"{'PASS' if v else 'FAIL'} {k}" for k, v in sorted(rep["checks"].items())]
    res = rep["results"]
    if rep["kind"] == "morse":
        betti = [res["homology"]["betti"][str(q)] for q in res["complex"]["degrees"]]
        idx = sorted({p["relative_index"] for p in res["rest_points"]})
        lines.append(f"betti {betti} (degrees {res['complex']['degrees']}); relative indices {idx}")
    elif rep["kind"] == "linear":
        lines.append(f"fredholm_index {res['fredholm_index']}")
        if "component_dims" in res:
            lines.append(f"component_dims {tuple(res['component_dims'])}")
    return lines


def report_betti(rep: dict) -> Optional[List[int]]:
    if rep["kind"] != "morse":
        return None
    res = rep["results"]
    return [res["homology"]["betti"][str(q)] for q in res["complex"]["degrees"]]
