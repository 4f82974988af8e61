"""Experiment configuration: JSON schema, defaults, overrides and builders."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import jsonschema
import numpy as np

from .cost import CostSpec
from .errors import DomainViolation, ParseError, ValidationError
from .io import read_field
from .optimize import AdmissibleSet, ControlProblem
from .potentials import Logarithmic, Regular, SplitPolynomial
from .spectral import DomainSpec, build_basis
from .state import StateConfig, StateModel
from .timegrid import TimeGrid

_NUM = {"type": "number"}
_POS_INT = {"type": "integer", "minimum": 1}


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


_FIELD = _obj(
    {
        "kind": {"enum": ["constant", "modes", "file"]},
        "value": _NUM,
        "offset": _NUM,
        "terms": {"type": "array", "items": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}},
        "path": {"type": "string"},
    },
    required=["kind"],
)
_CONTROL = copy.deepcopy(_FIELD)
_CONTROL["properties"]["kind"] = {"enum": ["zero", "constant", "modes", "file"]}

SCHEMA = _obj(
    {
        "domain": _obj(
            {
                "side_lengths": {"type": "array", "items": _NUM, "minItems": 1, "maxItems": 2},
                "grid_points": {"type": "array", "items": _POS_INT, "minItems": 1, "maxItems": 2},
            },
            required=["side_lengths", "grid_points"],
        ),
        "operators": _obj(
            {
                "A": _obj({"bc": {"enum": ["neumann", "dirichlet"]}, "r": _NUM}),
                "B": _obj({"bc": {"enum": ["neumann", "dirichlet"]}, "sigma": _NUM}),
            }
        ),
        "potential": _obj(
            {
                "kind": {"enum": ["regular", "logarithmic", "polynomial"]},
                "c1": _NUM,
                "delta": _NUM,
                "f1": {"type": "array", "items": _NUM},
                "f2": {"type": "array", "items": _NUM},
                "interval": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
            }
        ),
        "time": _obj({"horizon": _NUM, "steps": _POS_INT}, required=["horizon", "steps"]),
        "state": _obj(
            {
                "tau": _NUM,
                "newton_tol": _NUM,
                "newton_max_iter": _POS_INT,
                "linear_tol": _NUM,
                "gb_interval": {"type": ["array", "null"], "items": _NUM, "minItems": 2, "maxItems": 2},
            }
        ),
        "y0": _FIELD,
        "control": _CONTROL,
        "cost": _obj(
            {"alpha1": _NUM, "alpha2": _NUM, "alpha3": _NUM, "y_omega": _FIELD, "y_q": _FIELD}
        ),
        "admissible": _obj({"rho1": _NUM, "rho2": {"type": ["number", "null"]}}),
        "linearize": _obj({"scheme": {"enum": ["plain", "paper_stabilized"]}, "direction": _CONTROL}),
        "optimize": _obj({"max_iter": {"type": "integer", "minimum": 0}, "stat_tol": _NUM}),
        "grad_check": _obj(
            {"directions": _POS_INT, "eps": {"type": "array", "items": _NUM, "minItems": 1}, "tol": _NUM}
        ),
        "convergence": _obj(
            {"levels": {"type": "array", "items": _POS_INT, "minItems": 2}, "reference": _POS_INT}
        ),
        "output": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
    },
    required=["domain", "time"],
)

DEFAULTS = {
    "operators": {"A": {"bc": "neumann", "r": 0.5}, "B": {"bc": "neumann", "sigma": 0.8}},
    "potential": {"kind": "regular"},
    "state": {"tau": 1.0, "newton_tol": 1e-11, "newton_max_iter": 50, "linear_tol": 1e-12, "gb_interval": None},
    "y0": {"kind": "constant", "value": 0.0},
    "control": {"kind": "zero"},
    "cost": {
        "alpha1": 1.0,
        "alpha2": 1.0,
        "alpha3": 0.1,
        "y_omega": {"kind": "constant", "value": 0.0},
        "y_q": {"kind": "constant", "value": 0.0},
    },
    "admissible": {"rho1": 10.0, "rho2": None},
    "linearize": {"scheme": "plain", "direction": {"kind": "modes", "terms": [[2, 1.0]]}},
    "optimize": {"max_iter": 200, "stat_tol": 1e-6},
    "grad_check": {"directions": 5, "eps": [1e-3, 1e-4, 1e-5], "tol": 1e-5},
    "convergence": {"levels": [32, 64, 128], "reference": 2048},
    "output": "fchc-out",
    "seed": 0,
}


def deep_merge(base: dict, update: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def parse_override(item: str):
    """``"a.b=1e-3"`` -> ``(["a", "b"], 0.001)``; values are JSON when possible."""
    if "=" not in item:
        raise ParseError(f"override {item!r} is not of the form key=value", field=item)
    key, raw = item.split("=", 1)
    path = [p for p in key.strip().split(".") if p]
    if not path:
        raise ParseError(f"override {item!r} has an empty key", field=item)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return path, value


def apply_overrides(data: dict, overrides) -> dict:
    data = copy.deepcopy(data)
    for item in overrides or ():
        path, value = parse_override(item)
        node = data
        for part in path[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ParseError(f"cannot descend into non-object {part!r}", field=".".join(path))
            node = child
        node[path[-1]] = value
    return data


def _line_of(text: str | None, key: str):
    if not text:
        return None
    needle = f'"{key}"'
    for lineno, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return lineno
    return None


def _schema_check(data: dict, text: str | None) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if not errors:
        return
    err = errors[0]
    path = [str(p) for p in err.absolute_path]
    if err.validator == "additionalProperties":
        allowed = set(err.schema.get("properties", {}))
        extra = sorted(set(err.instance) - allowed)
        name = ".".join(path + extra[:1])
        raise ParseError(f"unknown key {extra[0]!r}", line=_line_of(text, extra[0]), field=name)
    name = ".".join(path) or None
    raise ParseError(err.message, line=_line_of(text, path[-1]) if path else None, field=name)


def _positive(value, name, tag):
    if not (np.isfinite(value) and value > 0):
        raise ValidationError(f"{name} must be a positive real, got {value}", field=name, assumption=tag)


def _semantic_check(cfg: dict) -> None:
    _positive(cfg["state"]["tau"], "state.tau", "A3")
    _positive(cfg["operators"]["A"]["r"], "operators.A.r", "A3")
    _positive(cfg["operators"]["B"]["sigma"], "operators.B.sigma", "A3")
    cost = cfg["cost"]
    alphas = [cost["alpha1"], cost["alpha2"], cost["alpha3"]]
    for j, a in enumerate(alphas, start=1):
        if not (np.isfinite(a) and a >= 0):
            raise ValidationError(f"alpha{j} must be nonnegative, got {a}", field=f"cost.alpha{j}", assumption="A6")
    if sum(alphas) <= 0:
        raise ValidationError("cost weights must not all vanish", field="cost", assumption="A6")
    _positive(cfg["admissible"]["rho1"], "admissible.rho1", "A6")
    if cfg["admissible"]["rho2"] is not None:
        _positive(cfg["admissible"]["rho2"], "admissible.rho2", "A6")
    dom = cfg["domain"]
    if len(dom["side_lengths"]) != len(dom["grid_points"]):
        raise ValidationError("side_lengths and grid_points differ in length", field="domain")
    for L in dom["side_lengths"]:
        _positive(L, "domain.side_lengths", None)
    if any(n < 4 for n in dom["grid_points"]):
        raise ValidationError("each axis needs at least 4 grid points", field="domain.grid_points")
    _positive(cfg["time"]["horizon"], "time.horizon", None)
    pot = cfg["potential"]
    if pot["kind"] == "logarithmic":
        if not pot.get("c1", 1.5) > 1:
            raise ValidationError("logarithmic potential needs c1 > 1", field="potential.c1", assumption="A4")
        if not 0 < pot.get("delta", 1e-4) < 0.5:
            raise ValidationError("delta must lie in (0, 0.5)", field="potential.delta", assumption="A4")


@dataclass
class ExperimentConfig:
    """Validated configuration plus builders for the numerical objects."""

    data: dict
    base_dir: Path = field(default_factory=Path.cwd)

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    @property
    def output(self) -> Path:
        return Path(self.data["output"])

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.data, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    # -- builders --------------------------------------------------------
    @cached_property
    def domain(self) -> DomainSpec:
        d = self.data["domain"]
        return DomainSpec(tuple(float(x) for x in d["side_lengths"]), tuple(int(n) for n in d["grid_points"]))

    @cached_property
    def basis_a(self):
        return build_basis(self.domain, self.data["operators"]["A"]["bc"], "A")

    @cached_property
    def basis_b(self):
        return build_basis(self.domain, self.data["operators"]["B"]["bc"], "B")

    @cached_property
    def potential(self):
        p = self.data["potential"]
        if p["kind"] == "logarithmic":
            return Logarithmic(c1=p.get("c1", 1.5), delta=p.get("delta", 1e-4))
        if p["kind"] == "regular":
            return Regular(tuple(p["interval"])) if "interval" in p else Regular()
        kwargs = {"interval": tuple(p["interval"])} if "interval" in p else {}
        return SplitPolynomial(tuple(p.get("f1", [0.0])), tuple(p.get("f2", [0.0])), **kwargs)

    def grid(self, steps: int | None = None) -> TimeGrid:
        t = self.data["time"]
        return TimeGrid(float(t["horizon"]), int(steps or t["steps"]))

    def state_config(self, steps: int | None = None) -> StateConfig:
        s = self.data["state"]
        gb = s.get("gb_interval")
        return StateConfig(
            tau=float(s["tau"]),
            r=float(self.data["operators"]["A"]["r"]),
            sigma=float(self.data["operators"]["B"]["sigma"]),
            grid=self.grid(steps),
            newton_tol=float(s["newton_tol"]),
            newton_max_iter=int(s["newton_max_iter"]),
            linear_tol=float(s["linear_tol"]),
            gb_interval=tuple(gb) if gb is not None else None,
        )

    def model(self, steps: int | None = None) -> StateModel:
        return StateModel(self.basis_a, self.basis_b, self.potential, self.state_config(steps))

    def _space_field(self, desc: dict, name: str) -> np.ndarray:
        kind = desc["kind"]
        n = self.domain.n_nodes
        if kind == "zero":
            return np.zeros(n)
        if kind == "constant":
            return np.full(n, float(desc.get("value", 0.0)))
        if kind == "modes":
            out = np.full(n, float(desc.get("offset", 0.0)))
            for index, amp in desc.get("terms", []):
                j = int(index)
                if not 1 <= j <= self.basis_a.mode_count:
                    raise ValidationError(f"mode index {j} out of range", field=f"{name}.terms")
                out = out + amp * self.basis_a.mode(j - 1)
            return out
        raise ValueError(kind)

    def _read(self, desc: dict, name: str) -> np.ndarray:
        path = self.base_dir / desc["path"]
        values, shape = read_field(path)
        if tuple(shape) != self.domain.shape:
            raise ValidationError(f"{path} has grid {shape}, expected {self.domain.shape}", field=name)
        return values

    def field(self, desc: dict, name: str) -> np.ndarray:
        """Spatial field (file: first snapshot)."""
        if desc["kind"] == "file":
            return self._read(desc, name)[0]
        return self._space_field(desc, name)

    def time_field(self, desc: dict, name: str, steps: int | None = None) -> np.ndarray:
        """Field at every time node; non-file descriptors are constant in time."""
        rows = int(steps or self.data["time"]["steps"]) + 1
        if desc["kind"] == "file":
            values = self._read(desc, name)
            if values.shape[0] == 1:
                return np.repeat(values, rows, axis=0)
            if values.shape[0] != rows:
                raise ValidationError(f"{name} has {values.shape[0]} time levels, expected {rows}", field=name)
            return values
        return np.repeat(self._space_field(desc, name)[None, :], rows, axis=0)

    def y0(self) -> np.ndarray:
        return self.field(self.data["y0"], "y0")

    def control(self, steps: int | None = None) -> np.ndarray:
        return self.time_field(self.data["control"], "control", steps)

    def cost(self, steps: int | None = None) -> CostSpec:
        c = self.data["cost"]
        return CostSpec(
            float(c["alpha1"]),
            float(c["alpha2"]),
            float(c["alpha3"]),
            y_omega=self.field(c["y_omega"], "cost.y_omega"),
            y_q=self.time_field(c["y_q"], "cost.y_q", steps),
        )

    def admissible(self) -> AdmissibleSet:
        a = self.data["admissible"]
        rho2 = np.inf if a["rho2"] is None else float(a["rho2"])
        return AdmissibleSet(float(a["rho1"]), rho2)

    def problem(self, steps: int | None = None) -> ControlProblem:
        return ControlProblem(self.model(steps), self.y0(), self.cost(steps), self.admissible())


def _check_files(cfg: dict, base_dir: Path) -> None:
    descs = [("y0", cfg["y0"]), ("control", cfg["control"]), ("cost.y_omega", cfg["cost"]["y_omega"])]
    descs += [("cost.y_q", cfg["cost"]["y_q"]), ("linearize.direction", cfg["linearize"]["direction"])]
    for name, desc in descs:
        if desc["kind"] == "file":
            if "path" not in desc:
                raise ParseError("file descriptor needs a path", field=name)
            if not (base_dir / desc["path"]).is_file():
                raise ValidationError(f"referenced file {desc['path']!r} does not exist", field=name)


def config_from_dict(data: dict, base_dir=None, overrides=(), text: str | None = None) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ParseError("configuration must be a JSON object")
    merged = apply_overrides(deep_merge(DEFAULTS, data), overrides)
    _schema_check(merged, text)
    _semantic_check(merged)
    base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
    _check_files(merged, base_dir)
    cfg = ExperimentConfig(merged, base_dir)
    try:
        cfg.potential
    except ValueError as exc:
        raise ValidationError(str(exc), field="potential", assumption="A4") from exc
    try:
        cfg.potential.check_domain(cfg.y0())
    except DomainViolation as exc:
        raise ValidationError(f"initial datum outside the potential domain: {exc}", field="y0", assumption="A5")
    return cfg


def load_config(path, overrides=()) -> ExperimentConfig:
    """Parse, merge with defaults, apply dotted overrides and validate."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno) from exc
    return config_from_dict(data, path.parent, overrides, text)
