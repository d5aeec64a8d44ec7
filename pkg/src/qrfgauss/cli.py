"""Scenario runner behind the ``qrf`` command.

A scenario is a JSON document (schema version 1) naming a particle system,
an initial perspective state and an ordered list of actions.  Running it
writes ``report.json``, ``series.csv`` and ``plotdata/*.csv`` into the
output directory; the exit code is 0 exactly when every check passed.

Exit codes: 0 all checks pass, 2 malformed scenario, 3 an action raised,
10 + k (capped at 255) when the k-th check (1-based) is the first failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import os
import re
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .core import (
    SYM_TOL,
    Corr,
    Cov,
    Mean,
    MomentState,
    Ordering,
    Var,
    make_state,
    moment,
    new_system,
    p,
    random_state,
    reorder,
    x,
)
from .diagnostics import (
    covariance_determinants,
    criteria_invariance,
    determinant_invariance,
    entanglement_criteria,
    equivalence_conditions,
    gaussian_purity,
    in_frame,
    momentum_relation_report,
    particle_purity,
    rel_dev,
    rs_uncertainty_check,
    symplectic_spectrum,
    triangle_report,
)
from .dynamics import evolve, free_hamiltonian, quadratic_hamiltonian
from .errors import ActionError, NonPositiveDeterminant, QRFError, ScenarioParseError
from .frame_transform import switch_frame
from .oracle import GaussianWavefunctionSpec, GridPolicy, analytic_moments, oracle_compare, spec_from_state

SCHEMA_VERSION = 1
CHECK_SETS = ("uncertainty", "triangle", "momentum", "criteria", "invariance", "purity")
REPORT_TARGETS = ("state", "moments", "determinants", "purities", "criteria", "spectrum")
ACTION_KINDS = ("switch", "evolve", "check", "oracle", "report")
INVARIANCE_TOL = 1e-9
EQUIVALENCE_TOL = 1e-6

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_ACTION = 3
EXIT_CHECK_BASE = 10


# -- validation ---------------------------------------------------------------


@dataclass(frozen=True)
class Diagnostic:
    field: str
    message: str
    kind: str = "ParseError"

    def __str__(self):
        return f"{self.field}: {self.kind}: {self.message}"


_MOMENT_PATTERNS = (
    ("var", re.compile(r"^var\(([xp])_(.+)\)$")),
    ("mean", re.compile(r"^mean\(([xp])_(.+)\)$")),
    ("cov", re.compile(r"^cov\(([xp])_([^,]+),([xp])_(.+)\)$")),
    ("corr", re.compile(r"^corr\(([xp])_([^,]+),([xp])_(.+)\)$")),
    ("det2x2", re.compile(r"^det2x2\((.+)\)$")),
    ("purity", re.compile(r"^purity\((.+)\)$")),
    ("det", re.compile(r"^det$")),
)


def parse_moment(text: str):
    """Split a moment name such as ``cov(x_B,p_C)`` into (kind, operands).

    Operands are (quadrature, label) pairs for var/mean/cov/corr and plain
    labels for det2x2/purity.  Returns None for unrecognised names.
    """
    text = text.replace(" ", "")
    for kind, pattern in _MOMENT_PATTERNS:
        m = pattern.match(text)
        if not m:
            continue
        g = m.groups()
        if kind in ("var", "mean"):
            return kind, ((g[0], g[1]),)
        if kind in ("cov", "corr"):
            return kind, ((g[0], g[1]), (g[2], g[3]))
        return kind, g
    return None


def _moment_labels(parsed) -> list:
    kind, ops = parsed
    if kind in ("det2x2", "purity"):
        return list(ops)
    return [label for _, label in ops]


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


class _Validator:
    def __init__(self):
        self.diags: list[Diagnostic] = []

    def error(self, field, message, kind="ParseError"):
        self.diags.append(Diagnostic(field, message, kind))

    def vector(self, field, value, length):
        if not isinstance(value, list) or not all(_is_number(v) for v in value):
            self.error(field, "must be a list of finite numbers")
            return None
        if len(value) != length:
            self.error(field, f"must have length {length}, got {len(value)}", "DimensionMismatch")
            return None
        return np.array(value, dtype=float)

    def matrix(self, field, value, size, symmetric=True):
        ok = isinstance(value, list) and all(
            isinstance(r, list) and all(_is_number(v) for v in r) for r in value
        )
        if not ok:
            self.error(field, "must be a list of rows of finite numbers")
            return None
        shape = (len(value), len(value[0]) if value else 0)
        if shape != (size, size) or any(len(r) != size for r in value):
            self.error(field, f"must be {size}x{size}, got {shape[0]}x{shape[1]}", "DimensionMismatch")
            return None
        a = np.array(value, dtype=float)
        if symmetric and size and float(np.max(np.abs(a - a.T))) > SYM_TOL:
            self.error(field, f"asymmetry {float(np.max(np.abs(a - a.T))):.3g} exceeds {SYM_TOL:g}", "NonSymmetric")
            return None
        return a

    def label(self, field, value, labels):
        if value not in labels:
            self.error(field, f"unknown particle {value!r}", "UnknownLabel")
            return False
        return True


def validate_document(doc) -> list:
    """Every schema violation in a parsed scenario document."""
    v = _Validator()
    if not isinstance(doc, dict):
        v.error("<document>", "top level must be an object")
        return v.diags
    known = {"schema", "name", "system", "initial", "actions", "output"}
    for key in sorted(set(doc) - known):
        v.error(key, "unknown top-level field")
    if "schema" not in doc:
        v.error("schema", "missing")
    elif doc["schema"] != SCHEMA_VERSION:
        v.error("schema", f"unsupported version {doc['schema']!r}, expected {SCHEMA_VERSION}")
    if "name" in doc and not isinstance(doc["name"], str):
        v.error("name", "must be a string")
    if "output" in doc and not isinstance(doc["output"], str):
        v.error("output", "must be a string")

    labels = _validate_system(v, doc.get("system"))
    frame = _validate_initial(v, doc.get("initial"), labels)
    _validate_actions(v, doc.get("actions", []), labels, frame)
    return v.diags


def _validate_system(v, system):
    if not isinstance(system, dict):
        v.error("system", "missing" if system is None else "must be an object")
        return None
    labels = system.get("labels")
    masses = system.get("masses")
    good = True
    if labels is None:
        v.error("system.labels", "missing")
        good = False
    elif not isinstance(labels, list) or not all(isinstance(l, str) and l for l in labels):
        v.error("system.labels", "must be a list of non-empty strings")
        good = False
    else:
        if len(set(labels)) != len(labels):
            v.error("system.labels", "labels must be unique", "DuplicateLabel")
            good = False
        if len(labels) < 2:
            v.error("system.labels", "need at least two particles", "TooFewParticles")
            good = False
    if masses is None:
        v.error("system.masses", "missing")
    elif not isinstance(masses, list) or not all(_is_number(m) for m in masses):
        v.error("system.masses", "must be a list of finite numbers")
    else:
        for i, m in enumerate(masses):
            if m <= 0:
                v.error(f"system.masses[{i}]", f"mass must be positive, got {m}", "NonPositiveMass")
        if isinstance(labels, list) and len(masses) != len(labels):
            v.error("system.masses", f"{len(masses)} masses for {len(labels)} labels", "DimensionMismatch")
    return labels if good else None


def _validate_initial(v, init, labels):
    if not isinstance(init, dict):
        v.error("initial", "missing" if init is None else "must be an object")
        return None
    frame = init.get("frame")
    if frame is None:
        v.error("initial.frame", "missing")
    elif labels is not None and not v.label("initial.frame", frame, labels):
        frame = None
    ordering = init.get("ordering", "blocked")
    if ordering not in ("blocked", "interleaved"):
        v.error("initial.ordering", f"must be 'blocked' or 'interleaved', got {ordering!r}")
    sources = [k for k in ("cov", "random", "wavefunction") if k in init]
    if len(sources) != 1:
        v.error("initial", "exactly one of 'cov', 'random', 'wavefunction' is required")
    if "mean" in init and "cov" not in init:
        v.error("initial.mean", "only allowed together with 'cov'")
    if labels is None:
        return frame
    n_modes = len(labels) - 1
    if "cov" in init:
        v.matrix("initial.cov", init["cov"], 2 * n_modes)
        if init.get("mean") is not None:
            v.vector("initial.mean", init["mean"], 2 * n_modes)
    if "random" in init:
        r = init["random"]
        if not isinstance(r, dict):
            v.error("initial.random", "must be an object")
        else:
            seed = r.get("seed", 0)
            if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
                v.error("initial.random.seed", "must be a non-negative integer")
            nu = r.get("nu_range", [0.5, 3.0])
            pair = [nu, nu] if _is_number(nu) else nu
            if not (isinstance(pair, list) and len(pair) == 2 and all(_is_number(t) for t in pair)):
                v.error("initial.random.nu_range", "must be a number or a pair of numbers")
            elif not (pair[0] >= 0.5 and pair[1] >= pair[0]):
                v.error("initial.random.nu_range", f"must lie in [1/2, inf), got {nu!r}", "InvalidNuRange")
    if "wavefunction" in init:
        w = init["wavefunction"]
        if not isinstance(w, dict):
            v.error("initial.wavefunction", "must be an object")
        elif n_modes not in (1, 2):
            v.error("initial.wavefunction", f"wavefunctions need N in {{2, 3}}, got N={n_modes + 1}", "UnsupportedDimension")
        else:
            for key in sorted(set(w) - {"momentum_mean", "momentum_covariance", "phase_quadratic", "phase_linear"}):
                v.error(f"initial.wavefunction.{key}", "unknown field")
            for key in ("momentum_mean", "phase_linear"):
                if key in w:
                    v.vector(f"initial.wavefunction.{key}", w[key], n_modes)
            if "phase_quadratic" in w:
                v.matrix("initial.wavefunction.phase_quadratic", w["phase_quadratic"], n_modes)
            if "momentum_covariance" in w:
                c = v.matrix("initial.wavefunction.momentum_covariance", w["momentum_covariance"], n_modes)
                if c is not None and np.linalg.eigvalsh(c)[0] <= 0:
                    v.error("initial.wavefunction.momentum_covariance", "must be positive definite")
    return frame


def _validate_actions(v, actions, labels, frame):
    if not isinstance(actions, list):
        v.error("actions", "must be a list")
        return
    for i, action in enumerate(actions):
        field = f"actions[{i}]"
        if not isinstance(action, dict) or len(action) != 1 or next(iter(action)) not in ACTION_KINDS:
            v.error(field, f"must be an object with exactly one key from {', '.join(ACTION_KINDS)}")
            continue
        kind, body = next(iter(action.items()))
        field = f"{field}.{kind}"
        if kind == "switch":
            if labels is not None and v.label(field, body, labels):
                if body == frame:
                    v.error(field, f"state is already described by {body!r}", "SameFrame")
                frame = body
        elif kind == "evolve":
            _validate_evolve(v, field, body, labels, frame)
        elif kind == "check":
            sets = body if isinstance(body, list) else [body]
            for name in sets:
                if name != "all" and name not in CHECK_SETS:
                    v.error(field, f"unknown check set {name!r}; choose from {', '.join(CHECK_SETS + ('all',))}")
        elif kind == "oracle":
            _validate_oracle(v, field, body, labels)
        elif kind == "report":
            targets = body if isinstance(body, list) else [body]
            for t in targets:
                if t not in REPORT_TARGETS:
                    v.error(field, f"unknown report target {t!r}; choose from {', '.join(REPORT_TARGETS)}")


def _validate_evolve(v, field, body, labels, frame):
    if not isinstance(body, dict):
        v.error(field, "must be an object")
        return
    for key in sorted(set(body) - {"hamiltonian", "times", "moments"}):
        v.error(f"{field}.{key}", "unknown field")
    ham = body.get("hamiltonian", "free")
    if ham != "free":
        if not isinstance(ham, dict) or set(ham) != {"G"}:
            v.error(f"{field}.hamiltonian", "must be 'free' or an object {'G': matrix}")
        elif labels is not None:
            v.matrix(f"{field}.hamiltonian.G", ham["G"], 2 * (len(labels) - 1))
    times = body.get("times")
    if not isinstance(times, list) or not times or not all(_is_number(t) for t in times):
        v.error(f"{field}.times", "must be a non-empty list of finite numbers")
    elif any(b < a for a, b in zip(times, times[1:])):
        v.error(f"{field}.times", "must be sorted in increasing order")
    moments = body.get("moments", [])
    if not isinstance(moments, list):
        v.error(f"{field}.moments", "must be a list of moment names")
        return
    for k, name in enumerate(moments):
        parsed = parse_moment(name) if isinstance(name, str) else None
        if parsed is None:
            v.error(f"{field}.moments[{k}]", f"cannot parse moment {name!r}")
        elif labels is not None and frame is not None:
            for label in _moment_labels(parsed):
                if label not in labels or label == frame:
                    v.error(f"{field}.moments[{k}]", f"{label!r} is not described from {frame!r}", "UnknownLabel")


def _validate_oracle(v, field, body, labels):
    if not isinstance(body, dict):
        v.error(field, "must be an object")
        return
    for key in sorted(set(body) - {"frames", "tol", "points", "n_sigma"}):
        v.error(f"{field}.{key}", "unknown field")
    tol = body.get("tol", 1e-4)
    if not _is_number(tol) or tol <= 0:
        v.error(f"{field}.tol", "must be a positive number")
    if labels is None:
        return
    if len(labels) not in (2, 3):
        v.error(field, f"the wavefunction oracle needs N in {{2, 3}}, got N={len(labels)}", "UnsupportedDimension")
    frames = body.get("frames", labels)
    if not isinstance(frames, list):
        v.error(f"{field}.frames", "must be a list of labels")
    else:
        for k, f in enumerate(frames):
            v.label(f"{field}.frames[{k}]", f, labels)
    try:
        GridPolicy(body.get("points"), body.get("n_sigma", GridPolicy.n_sigma)).count(len(labels) - 1)
    except (QRFError, TypeError) as exc:
        v.error(field, str(exc), type(exc).__name__)


def load_document(path) -> dict:
    """Read a scenario file; JSON syntax errors become ScenarioParseError."""
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(exc.msg, f"line {exc.lineno} column {exc.colno}") from None


def validate_scenario(path) -> list:
    """Diagnostics for a scenario file, empty when it is valid."""
    try:
        doc = load_document(path)
    except ScenarioParseError as exc:
        return [Diagnostic(exc.field, str(exc).split(": ", 1)[-1])]
    except OSError as exc:
        return [Diagnostic("<file>", str(exc), "OSError")]
    return validate_document(doc)


# -- serialization ---------------------------------------------------------------


_FLOAT_TOKEN = re.compile(r'"\\u0000f:([^"]*)"')


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _tree(obj):
    if isinstance(obj, dict):
        return {str(k): _tree(val) for k, val in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_tree(val) for val in obj]
    if isinstance(obj, np.ndarray):
        return _tree(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        val = float(obj)
        return f"\0f:{_fmt(val)}" if math.isfinite(val) else None
    if isinstance(obj, Ordering):
        return obj.value
    return obj


def dumps_report(report: dict) -> str:
    """JSON with sorted keys and every float written with 17 significant digits."""
    text = json.dumps(_tree(report), sort_keys=True, indent=2)
    return _FLOAT_TOKEN.sub(lambda m: m.group(1), text) + "\n"


class _Table:
    def __init__(self, leading=()):
        self.columns = list(leading)
        self.rows = []

    def add(self, row: dict):
        for key in row:
            if key not in self.columns:
                self.columns.append(key)
        self.rows.append(row)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_cell(row.get(c, "")) for c in self.columns])
        return buf.getvalue()


def _cell(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return _fmt(value)
    return value


# -- running -----------------------------------------------------------------------


def _observable(quadrature, label):
    return x(label) if quadrature == "x" else p(label)


def eval_moment(state: MomentState, name: str) -> float:
    kind, ops = parse_moment(name)
    if kind == "det":
        return covariance_determinants(state)["full"]
    if kind == "det2x2":
        return float(np.linalg.det(state.particle_block(ops[0])))
    if kind == "purity":
        return particle_purity(state, ops[0])
    obs = [_observable(q, l) for q, l in ops]
    query = {"var": Var, "mean": Mean, "cov": Cov, "corr": Corr}[kind](*obs)
    return moment(state, query)


def _state_dump(state: MomentState) -> dict:
    return {
        "frame": state.frame,
        "described": list(state.described),
        "ordering": state.ordering,
        "mean": state.mean,
        "cov": state.cov,
        "physical": state.physical,
        "psd_margin": state.psd_margin,
    }


def _global_purity(state: MomentState):
    try:
        return gaussian_purity(state.cov)
    except NonPositiveDeterminant:
        return None


def _purities(state: MomentState) -> dict:
    out = {}
    for f in state.system.labels:
        s = in_frame(state, f)
        particles = {}
        for label in s.described:
            try:
                particles[label] = particle_purity(s, label)
            except NonPositiveDeterminant:
                particles[label] = None
        out[f] = {"global": _global_purity(s), "particles": particles}
    return out


def _criteria_all(state: MomentState) -> list:
    rows = []
    for K, L in itertools.combinations(state.system.labels, 2):
        for f in state.system.labels:
            if f not in (K, L):
                rows.append(entanglement_criteria(in_frame(state, f), K, L).as_dict())
    return rows


class _Run:
    def __init__(self, doc: dict, name: str, seed=None):
        self.doc = doc
        self.name = name
        self.seed = seed
        sysdoc = doc["system"]
        self.system = new_system(sysdoc["labels"], sysdoc["masses"])
        self.checks: list[dict] = []
        self.skipped: list[dict] = []
        self.actions: list[dict] = []
        self.series = _Table(["t"])
        self.plots: dict[str, _Table] = {}
        self.clock = 0.0
        self.state = self._initial_state(doc["initial"])
        self.initial = self.state

    def _initial_state(self, init: dict) -> MomentState:
        frame = init["frame"]
        ordering = init.get("ordering", "blocked")
        if "cov" in init:
            return make_state(self.system, frame, init.get("mean"), init["cov"], ordering)
        if "random" in init:
            r = init["random"]
            seed = self.seed if self.seed is not None else r.get("seed", 0)
            self.seed = seed
            return random_state(self.system, frame, seed, r.get("nu_range", (0.5, 3.0)), ordering)
        w = init["wavefunction"]
        d = self.system.n - 1
        spec = GaussianWavefunctionSpec(
            self.system,
            frame,
            w.get("momentum_mean", np.zeros(d)),
            w.get("momentum_covariance", 0.5 * np.eye(d)),
            w.get("phase_quadratic", np.zeros((d, d))),
            w.get("phase_linear", np.zeros(d)),
        )
        return reorder(analytic_moments(spec), ordering)

    def plot(self, name, leading=()) -> _Table:
        if name not in self.plots:
            self.plots[name] = _Table(leading)
        return self.plots[name]

    def add_check(self, index, name, passed, detail=None):
        self.checks.append(
            {
                "name": name,
                "action": index,
                "status": "PASS" if passed else "FAIL",
                "detail": detail if detail is not None else {},
            }
        )

    # -- actions

    def do_switch(self, index, to):
        before = covariance_determinants(self.state)["full"]
        src = self.state.frame
        self.state = switch_frame(self.state, to)
        after = covariance_determinants(self.state)["full"]
        return {"from": src, "to": to, "det_before": before, "det_after": after}

    def do_evolve(self, index, body):
        ham = body.get("hamiltonian", "free")
        state = self.state
        if ham == "free":
            H = free_hamiltonian(self.system, state.frame)
        else:
            H = quadratic_hamiltonian(state.frame, ham["G"])
        moments = body.get("moments") or ["det"] + [f"det2x2({l})" for l in state.described]
        times = [float(t) for t in body["times"]]
        det0 = covariance_determinants(state)["full"]
        volume = self.plot("uncertainty_volume", ["action", "t"])
        drift = 0.0
        final = state
        for t in times:
            final = evolve(state, H, t)
            dets = covariance_determinants(final)
            drift = max(drift, abs(dets["full"] - det0) / max(1.0, abs(det0)))
            self.series.add({"t": self.clock + t, **{m: eval_moment(final, m) for m in moments}})
            row = {"action": index, "t": self.clock + t, "det": dets["full"]}
            for label in final.described:
                row[f"det2x2_{label}"] = float(np.linalg.det(final.particle_block(label)))
            volume.add(row)
        self.clock += times[-1]
        self.state = final
        self.add_check(index, "evolve.det_drift", drift <= INVARIANCE_TOL, {"max_rel_drift": drift})
        return {
            "hamiltonian": "free" if ham == "free" else "matrix",
            "frame": state.frame,
            "times": times,
            "moments": moments,
            "det_initial": det0,
            "det_final": covariance_determinants(final)["full"],
            "max_rel_det_drift": drift,
        }

    def do_check(self, index, body):
        sets = body if isinstance(body, list) else [body]
        if "all" in sets:
            sets = list(CHECK_SETS)
        first = len(self.checks)
        for name in CHECK_SETS:
            if name in sets:
                getattr(self, f"_check_{name}")(index)
        new = self.checks[first:]
        return {"sets": [s for s in CHECK_SETS if s in sets], "checks": len(new), "failed": sum(c["status"] != "PASS" for c in new)}

    def _skip(self, index, name, reason):
        self.skipped.append({"action": index, "name": name, "reason": reason})

    def _check_uncertainty(self, index):
        for f in self.system.labels:
            r = rs_uncertainty_check(in_frame(self.state, f))
            self.add_check(index, f"uncertainty.{f}", r["psd_pass"] and r["per_particle_pass"], r)

    def _check_triangle(self, index):
        if self.system.n < 3:
            self._skip(index, "triangle", "needs N >= 3")
            return
        for I, J, K in itertools.combinations(self.system.labels, 3):
            name = f"triangle.{I}{J}{K}"
            tr = triangle_report(self.state, I, J, K)
            if tr.degenerate:
                self._skip(index, name, "a side length vanishes")
                continue
            self.add_check(index, name, tr.passed, tr.as_dict())
            a, b, _ = tr.sides
            angle = tr.angles[0]
            table = self.plot(f"triangle_{I}{J}{K}", ["action", "vertex", "x", "y"])
            table.add({"action": index, "vertex": I, "x": 0.0, "y": 0.0})
            table.add({"action": index, "vertex": J, "x": a, "y": 0.0})
            table.add({"action": index, "vertex": K, "x": b * math.cos(angle), "y": b * math.sin(angle)})

    def _check_momentum(self, index):
        if self.system.n < 3:
            self._skip(index, "momentum", "needs N >= 3")
            return
        for I, J in itertools.combinations(self.system.labels, 2):
            r = momentum_relation_report(self.state, I, J)
            self.add_check(index, f"momentum.{I}{J}", r["passed"], r)

    def _check_criteria(self, index):
        labels = self.system.labels
        table = self.plot("criteria_vs_frame", ["action", "pair", "frame"])
        for K, L in itertools.combinations(labels, 2):
            frames = [f for f in labels if f not in (K, L)]
            if not frames:
                self._skip(index, f"criteria.{K}{L}", "no frame outside the pair")
                continue
            r = criteria_invariance(self.state, frames, K, L, INVARIANCE_TOL)
            self.add_check(index, f"criteria.{K}{L}", r["passed"], r)
            for rep in r["reports"]:
                table.add(
                    {
                        "action": index,
                        "pair": f"{K}{L}",
                        "frame": rep["frame"],
                        "c_prod": rep["c_prod"],
                        "c_sum": rep["c_sum"],
                        "entangled_prod": rep["entangled_flag_prod"],
                        "entangled_sum": rep["entangled_flag_sum"],
                    }
                )

    def _check_invariance(self, index):
        r = determinant_invariance(self.state, tol=INVARIANCE_TOL)
        self.add_check(index, "invariance.determinants", r["passed"], r)
        spectra = {f: symplectic_spectrum(in_frame(self.state, f).cov, self.state.ordering) for f in self.system.labels}
        ref = spectra[self.state.frame]
        dev = max(rel_dev(a, b) for s in spectra.values() for a, b in zip(s, ref))
        self.add_check(index, "invariance.spectrum", dev <= INVARIANCE_TOL, {"spectra": spectra, "max_rel_dev": dev})

    def _check_purity(self, index):
        purities = _purities(self.state)
        values = [v["global"] for v in purities.values()]
        if None in values:
            self.add_check(index, "purity.global", False, {"purities": purities, "reason": "non-positive determinant"})
        else:
            dev = max(rel_dev(a, values[0]) for a in values)
            ok = dev <= INVARIANCE_TOL and max(values) <= 1.0 + INVARIANCE_TOL
            self.add_check(index, "purity.global", ok, {"purities": purities, "max_rel_dev": dev})
        for I, J in itertools.permutations(self.system.labels, 2):
            r = equivalence_conditions(self.state, I, J, EQUIVALENCE_TOL)
            if r["conditions_pass"]:
                self.add_check(index, f"purity.equivalence.{I}{J}", r["passed"], r)

    def do_oracle(self, index, body):
        frames = body.get("frames", list(self.system.labels))
        tol = float(body.get("tol", 1e-4))
        policy = GridPolicy(body.get("points"), body.get("n_sigma", GridPolicy.n_sigma))
        spec = spec_from_state(self.state)
        r = oracle_compare(spec, frames, tol, grid_policy=policy)
        for row in r["frames"]:
            self.add_check(index, f"oracle.{row['frame']}", row["passed"], row)
        self.add_check(index, "oracle.analytic", r["analytic_dev"] <= tol, {"analytic_dev": r["analytic_dev"], "tol": tol})
        return {"max_abs_dev": r["max_abs_dev"], "analytic_dev": r["analytic_dev"], "tol": tol, "frames": frames}

    def snapshot(self, targets) -> dict:
        state = self.state
        out = {}
        if "state" in targets:
            out["state"] = _state_dump(state)
        if "moments" in targets:
            b = state.blocked()
            n = b.n_modes
            out["moments"] = {
                "frame": state.frame,
                "described": list(state.described),
                "mean_x": b.mean[:n],
                "mean_p": b.mean[n:],
                "X": state.X,
                "P": state.P,
                "XP": state.XP,
            }
        if "determinants" in targets:
            out["determinants"] = {f: covariance_determinants(in_frame(state, f)) for f in self.system.labels}
        if "purities" in targets:
            out["purities"] = _purities(state)
        if "criteria" in targets:
            out["criteria"] = _criteria_all(state)
        if "spectrum" in targets:
            out["spectrum"] = symplectic_spectrum(state.cov, state.ordering)
        return out

    def do_report(self, index, body):
        targets = body if isinstance(body, list) else [body]
        return self.snapshot(targets or REPORT_TARGETS)

    def execute(self):
        for index, action in enumerate(self.doc.get("actions", [])):
            kind, body = next(iter(action.items()))
            try:
                result = getattr(self, f"do_{kind}")(index, body)
            except (QRFError, np.linalg.LinAlgError) as exc:
                raise ActionError(index, exc) from exc
            self.actions.append({"index": index, "kind": kind, "clock": self.clock, "frame": self.state.frame, "result": result})

    def report(self, error=None) -> dict:
        failed = [c for c in self.checks if c["status"] != "PASS"]
        status = "ERROR" if error else ("FAIL" if failed else "PASS")
        return {
            "schema": SCHEMA_VERSION,
            "scenario": self.name,
            "seed": self.seed,
            "system": {"labels": list(self.system.labels), "masses": [self.system.mass(l) for l in self.system.labels]},
            "initial": _state_dump(self.initial),
            "actions": self.actions,
            "checks": self.checks,
            "skipped": self.skipped,
            "final": self.snapshot(REPORT_TARGETS),
            "error": error,
            "summary": {
                "status": status,
                "checks": len(self.checks),
                "failed": len(failed),
                "first_failure": failed[0]["name"] if failed else None,
            },
        }

    def exit_code(self) -> int:
        for k, c in enumerate(self.checks, start=1):
            if c["status"] != "PASS":
                return min(EXIT_CHECK_BASE + k, 255)
        return EXIT_OK


def output_dir(doc: dict, name: str, out=None) -> Path:
    if out is not None:
        return Path(out)
    root = Path(os.environ.get("QRF_OUT_DIR") or "qrf-out")
    return root / doc.get("output", name)


def write_outputs(run: _Run, report: dict, out: Path):
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(dumps_report(report))
    (out / "series.csv").write_text(run.series.to_csv())
    plots = out / "plotdata"
    plots.mkdir(exist_ok=True)
    for stale in plots.glob("*.csv"):
        stale.unlink()
    for name, table in sorted(run.plots.items()):
        (plots / f"{name}.csv").write_text(table.to_csv())


def run_document(doc: dict, name: str, out=None, seed=None):
    """Validate and execute a parsed scenario; returns (exit code, report, output dir).

    Raises:
        ScenarioParseError: the document violates the schema (first violation).
    """
    diags = validate_document(doc)
    if diags:
        raise ScenarioParseError(diags[0].message, diags[0].field)
    run = _Run(doc, name, seed)
    target = output_dir(doc, name, out)
    try:
        run.execute()
    except ActionError as exc:
        report = run.report(error={"action": exc.index, "type": type(exc.cause).__name__, "message": str(exc.cause)})
        write_outputs(run, report, target)
        raise
    report = run.report()
    write_outputs(run, report, target)
    return run.exit_code(), report, target


def run_scenario(path, out=None, seed=None):
    doc = load_document(path)
    name = doc.get("name") if isinstance(doc, dict) and isinstance(doc.get("name"), str) else Path(path).stem
    return run_document(doc, name, out, seed)


# -- demos ---------------------------------------------------------------------------


def demo_names() -> list:
    folder = resources.files("qrfgauss") / "demos"
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".json"))


def demo_path(name: str):
    path = resources.files("qrfgauss") / "demos" / f"{name}.json"
    if not path.is_file():
        raise ScenarioParseError(f"unknown demo {name!r}; available: {', '.join(demo_names())}", "demo")
    return path


# -- entry point -----------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qrf", description="Relational Gaussian moment scenarios.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a scenario file")
    run.add_argument("scenario", help="path to a scenario JSON file")
    run.add_argument("--out", help="output directory (default: $QRF_OUT_DIR/<name>)")
    run.add_argument("--seed", type=int, help="override the seed of a random initial state")

    val = sub.add_parser("validate", help="check a scenario file without running it")
    val.add_argument("scenario")

    demo = sub.add_parser("demo", help="run a built-in scenario ('list' shows them)")
    demo.add_argument("name")
    demo.add_argument("--out")
    demo.add_argument("--seed", type=int)
    return parser


def _execute(path, out, seed) -> int:
    try:
        code, report, target = run_scenario(path, out, seed)
    except ScenarioParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ActionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ACTION
    summary = report["summary"]
    print(f"{summary['status']}: {summary['checks'] - summary['failed']}/{summary['checks']} checks passed -> {target}")
    if summary["first_failure"]:
        print(f"first failing check: {summary['first_failure']}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "validate":
        diags = validate_scenario(args.scenario)
        for d in diags:
            print(d)
        return EXIT_PARSE if diags else EXIT_OK
    if args.command == "run":
        return _execute(args.scenario, args.out, args.seed)
    if args.name == "list":
        print("\n".join(demo_names()))
        return EXIT_OK
    try:
        path = demo_path(args.name)
    except ScenarioParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    with resources.as_file(path) as local:
        return _execute(local, args.out, args.seed)


if __name__ == "__main__":
    sys.exit(main())
