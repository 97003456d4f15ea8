"""Problem specification files (TOML).

A spec names either a built-in problem::

    builtin = "ex2_quadratic(10, 0.01)"

or a custom gradient-like flow::

    name = "wells"

    [custom]
    dim = 2
    lyapunov = "(x1^2 - 1)^2 + x2^2"
    field = ["-4*x1*(x1^2 - 1)", "-2*x2"]   # optional, default -grad f
    comparison_V = []                       # 1-based coordinate indices
    seeds = [[1, 0], [-1, 0], [0, 0]]
    lo = [-2, -2]
    hi = [2, 2]
    period = [0, 0]                         # optional, 0 = not periodic

Optional tables: ``[params]`` (keyword arguments of the built-in),
``[tolerances]`` (overrides of :class:`Tolerances` fields), ``[run]``
(``seed``, ``threads``, ``tol_scale`` defaults for the command line) and
``[debug]`` (``flip = [source, target, k]`` negates one orbit sign).
"""
from __future__ import annotations

import ast
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from . import catalog
from . import expr as ex
from .errors import SpecError
from .fields import ScalarFunction, field_from_nodes, negative_gradient
from .grassmann import Subspace
from .morse.problem import Domain, FlowProblem, Tolerances

try:
    import tomllib as _toml
except ImportError:  # python < 3.11
    import tomli as _toml

MORSE_BUILTINS = tuple(catalog.BUILTINS)
LINEAR_BUILTINS = ("costra", "section4")
EXC_BUILTINS = ("exc_field",)
ALL_BUILTINS = MORSE_BUILTINS + LINEAR_BUILTINS + EXC_BUILTINS

# positional parameter names for the call syntax ``name(a, b)``
_POSITIONAL = {
    "sphere_height": ("kappa",),
    "pinched_sphere": ("alpha", "kappa"),
    "tilted_torus": ("R", "r", "tilt"),
    "double_well": (),
    "ex2_quadratic": ("K", "eps"),
    "exc_field": ("K",),
    "costra": ("n_half", "k"),
    "section4": ("n_half", "k"),
}
_DEFAULTS = {"costra": {"n_half": 3, "k": 1}, "section4": {"n_half": 3, "k": 1},
             "exc_field": {"K": 20}}

_TOP_KEYS = {"name", "builtin", "params", "custom", "tolerances", "run", "debug"}
_CUSTOM_KEYS = {"dim", "lyapunov", "field", "comparison_V", "seeds", "lo", "hi", "period"}
_RUN_KEYS = {"seed", "threads", "tol_scale"}


@dataclass
class ProblemSpec:
    """Parsed spec; :meth:`build` turns it into a problem object."""

    name: str
    kind: str  # "morse", "linear" or "exc"
    builtin: Optional[str] = None
    params: Dict[str, Any] = field(default_factory=dict)
    custom: Optional[dict] = None
    tolerances: Dict[str, float] = field(default_factory=dict)
    run: Dict[str, Any] = field(default_factory=dict)
    flip: Optional[Tuple[int, int, int]] = None
    source: str = ""

    def build(self, tol_scale: float = 1.0):
        """``FlowProblem`` for Morse problems, the built-in's output otherwise."""
        if self.kind == "exc":
            return catalog.exc_field(**self.params)
        if self.kind == "linear":
            return dict(self.params)
        if self.builtin is not None:
            prob = catalog.BUILTINS[self.builtin](**self.params)
        else:
            prob = _build_custom(self)
        tol = replace(prob.tol, **self.tolerances).scaled(tol_scale)
        return replace(prob, tol=tol)


# ----------------------------------------------------------------- locations

def _key_pos(text: str, key: str, start: int = 0) -> Tuple[Optional[int], Optional[int]]:
    m = re.compile(rf"^[ \t]*{re.escape(key)}[ \t]*=", re.M).search(text, start)
    if m is None:
        return None, None
    return ex._line_col(text, m.start() + len(m.group(0)) - len(m.group(0).lstrip()))


def _literal_offsets(text: str, key: str, values: List[str]) -> List[Optional[int]]:
    """Offsets of the string literals ``values`` following ``key = ``."""
    m = re.compile(rf"^[ \t]*{re.escape(key)}[ \t]*=", re.M).search(text)
    pos = m.end() if m else 0
    out = []
    for v in values:
        hit = None
        for q in ('"', "'"):
            i = text.find(q + v + q, pos)
            if i >= 0 and (hit is None or i < hit):
                hit = i
        if hit is None:
            out.append(None)
        else:
            out.append(hit + 1)
            pos = hit + len(v) + 2
    return out


def _parse_expr(text: str, source: str, n: int, offset: Optional[int]) -> tuple:
    try:
        return ex.parse(text, n)
    except SpecError as e:
        if offset is None or e.line is None:
            raise
        line0, col0 = ex._line_col(source, offset)
        line = line0 + e.line - 1
        col = col0 + e.column - 1 if e.line == 1 else e.column
        msg = str(e).split(" (line")[0]
        raise SpecError(msg, line, col) from None


def _fail(msg: str, source: str, key: str):
    line, col = _key_pos(source, key)
    raise SpecError(msg, line, col)


# ------------------------------------------------------------------- parsing

_CALL = re.compile(r"^\s*([A-Za-z_]\w*)\s*(?:\((.*)\))?\s*$", re.S)


def parse_builtin(text: str) -> Tuple[str, Dict[str, Any]]:
    """Split ``"name(a, b)"`` into the name and keyword parameters."""
    m = _CALL.match(text)
    if m is None:
        raise SpecError(f"malformed built-in '{text}'")
    name, args = m.group(1), m.group(2)
    if name not in ALL_BUILTINS:
        raise SpecError(f"unknown built-in '{name}' (choose from {', '.join(ALL_BUILTINS)})")
    params: Dict[str, Any] = {}
    if args is not None and args.strip():
        try:
            vals = ast.literal_eval(f"({args},)")
        except (ValueError, SyntaxError):
            raise SpecError(f"cannot read arguments of '{text}'") from None
        names = _POSITIONAL[name]
        if len(vals) > len(names):
            raise SpecError(f"{name} takes at most {len(names)} arguments")
        for k, v in zip(names, vals):
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise SpecError(f"argument {k} of {name} must be a number")
            params[k] = v
    return name, params


def _kind(name: str) -> str:
    if name in LINEAR_BUILTINS:
        return "linear"
    if name in EXC_BUILTINS:
        return "exc"
    return "morse"


def _check_params(name: str, params: dict):
    allowed = _POSITIONAL[name]
    for k, v in params.items():
        if k not in allowed:
            raise SpecError(f"unknown parameter '{k}' for {name}")
    out = dict(_DEFAULTS.get(name, {}), **params)
    for k in ("n_half", "k", "K"):
        if k in out and (not isinstance(out[k], int) or out[k] < 0):
            raise SpecError(f"parameter {k} of {name} must be a nonnegative integer")
    if name in LINEAR_BUILTINS and not out["k"] <= out["n_half"]:
        raise SpecError(f"{name} needs k <= n_half")
    return out


def loads(text: str, name: str = "spec") -> ProblemSpec:
    """Parse spec text; every error is a :class:`SpecError`."""
    try:
        data = _toml.loads(text)
    except _toml.TOMLDecodeError as e:
        m = re.search(r"\(at line (\d+), column (\d+)\)", str(e))
        msg = re.sub(r"\s*\(at (line|end).*\)$", "", str(e))
        if m:
            raise SpecError(msg, int(m.group(1)), int(m.group(2))) from None
        if "end of document" in str(e):
            line, col = ex._line_col(text, len(text))
            raise SpecError(msg + " at end of document", line, col) from None
        raise SpecError(msg) from None
    for k in data:
        if k not in _TOP_KEYS:
            _fail(f"unknown key '{k}'", text, k)
    if ("builtin" in data) == ("custom" in data):
        raise SpecError("exactly one of 'builtin' or [custom] is required")
    tols = data.get("tolerances", {})
    valid = set(Tolerances().as_dict())
    for k, v in tols.items():
        if k not in valid:
            _fail(f"unknown tolerance '{k}'", text, k)
        if not isinstance(v, (int, float)) or isinstance(v, bool) or v <= 0:
            _fail(f"tolerance '{k}' must be a positive number", text, k)
    run = data.get("run", {})
    for k, v in run.items():
        if k not in _RUN_KEYS:
            _fail(f"unknown run option '{k}'", text, k)
    _check_run(run, text)
    flip = None
    if "debug" in data:
        fl = data["debug"].get("flip")
        if fl is None or len(fl) != 3 or not all(isinstance(v, int) for v in fl):
            _fail("debug.flip must be [source, target, k]", text, "flip")
        flip = tuple(fl)
    if "builtin" in data:
        try:
            bname, params = parse_builtin(str(data["builtin"]))
            params.update(data.get("params", {}))
            params = _check_params(bname, params)
        except SpecError as e:
            line, col = _key_pos(text, "builtin")
            raise SpecError(str(e), line, col) from None
        return ProblemSpec(data.get("name", bname), _kind(bname), bname, params, None,
                           dict(tols), dict(run), flip, text)
    cust = data["custom"]
    _check_custom(cust, text)
    spec = ProblemSpec(data.get("name", name), "morse", None, {}, cust, dict(tols), dict(run),
                       flip, text)
    _build_custom(spec)  # surfaces expression and domain errors at load time
    return spec


def load(path) -> ProblemSpec:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise SpecError(f"cannot read {path}: {e.strerror}") from None
    return loads(text, path.stem)


def _check_run(run: dict, text: str):
    if "seed" in run and (not isinstance(run["seed"], int) or run["seed"] < 0):
        _fail("seed must be a nonnegative integer", text, "seed")
    if "threads" in run and (not isinstance(run["threads"], int) or run["threads"] < 1):
        _fail("threads must be a positive integer", text, "threads")
    if "tol_scale" in run and not (isinstance(run["tol_scale"], (int, float)) and run["tol_scale"] > 0):
        _fail("tol_scale must be positive", text, "tol_scale")


def _check_custom(c: dict, text: str):
    for k in c:
        if k not in _CUSTOM_KEYS:
            _fail(f"unknown key '{k}' in [custom]", text, k)
    for k in ("dim", "lyapunov", "seeds", "lo", "hi"):
        if k not in c:
            raise SpecError(f"[custom] needs '{k}'")
    n = c["dim"]
    if not isinstance(n, int) or n < 1:
        _fail("dim must be a positive integer", text, "dim")
    if not isinstance(c["lyapunov"], str):
        _fail("lyapunov must be an expression string", text, "lyapunov")
    if "field" in c and (not isinstance(c["field"], list) or len(c["field"]) != n
                         or not all(isinstance(s, str) for s in c["field"])):
        _fail(f"field must be a list of {n} expression strings", text, "field")
    for k in ("lo", "hi", "period"):
        if k in c and (not isinstance(c[k], list) or len(c[k]) != n):
            _fail(f"{k} must be a list of {n} numbers", text, k)
    V = c.get("comparison_V", [])
    if not isinstance(V, list) or not all(isinstance(i, int) and 1 <= i <= n for i in V) \
            or len(set(V)) != len(V):
        _fail(f"comparison_V must list distinct indices in 1..{n}", text, "comparison_V")
    S = c["seeds"]
    if not isinstance(S, list) or not S or not all(isinstance(s, list) and len(s) == n for s in S):
        _fail(f"seeds must be a nonempty list of points in R^{n}", text, "seeds")


def _build_custom(spec: ProblemSpec) -> FlowProblem:
    c, text = spec.custom, spec.source
    n = c["dim"]
    off = _literal_offsets(text, "lyapunov", [c["lyapunov"]])[0]
    f = ScalarFunction(_parse_expr(c["lyapunov"], text, n, off), n)
    if "field" in c:
        offs = _literal_offsets(text, "field", c["field"])
        nodes = [_parse_expr(s, text, n, o) for s, o in zip(c["field"], offs)]
        fld = field_from_nodes(nodes, spec.name)
    else:
        fld = negative_gradient(f, spec.name)
    lo, hi = np.asarray(c["lo"], float), np.asarray(c["hi"], float)
    if np.any(hi <= lo):
        _fail("need lo < hi in every coordinate", text, "hi")
    per = np.asarray(c.get("period", [0] * n), float)
    dom = Domain(lo, hi, per)
    seeds = np.asarray(c["seeds"], float)
    for i, s in enumerate(seeds):
        if not dom.contains(s):
            _fail(f"seed {i} lies outside the domain", text, "seeds")
    for s in seeds:
        with np.errstate(all="ignore"):
            finite = np.all(np.isfinite(fld.F(s))) and np.isfinite(f(s))
        if not finite:
            _fail("field or lyapunov does not evaluate to a finite number at a seed", text, "seeds")
    V = Subspace.coordinate(n, [i - 1 for i in c.get("comparison_V", [])])
    return FlowProblem(spec.name, fld, f, V, dom, seeds, catalog._box_samples(lo, hi),
                       Tolerances(), {"lyapunov": c["lyapunov"]})
