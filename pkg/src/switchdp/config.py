"""Experiment configuration documents (TOML) and the objects they describe.

A document names either a built-in scenario or a custom system::

    scenario = "example1"          # example1 | example2 | example2-pref
    kappa0 = 0.1

    [scenario_options]             # forwarded to the scenario constructor
    dt = 0.25
    horizon = 8

    [training]                     # any TrainingConfig field
    samples = 1000
    seed = 0

    [controller]
    threshold = 0.0
    disturbance = { low = 0.0, high = 0.005, seed = 0 }   # optional

A custom system replaces ``scenario`` with three tables::

    [system]
    state_dim = 1
    kind = "continuous"            # Euler-discretised fields, or "discrete" maps
    dt = 0.02
    nonneg_clamp = false
    domain_lower = [-2.0]
    domain_upper = [2.0]
    modes = [["-x0"], ["-x0**3"]]  # one expression per state component

    [cost]
    horizon = 100
    terminal = "5*x0**2"
    running = "0"
    kappa0 = 0.1                   # or switch_table = [[0, 0.1], [0.1, 0]]
    terminal_offsets = { "1" = -10.0 }
    running_offsets = { "1" = 0.01 }

    [basis]
    descriptor = "powers(dim=1,min=1,max=14)"

Expressions see the state components ``x0 .. x{n-1}``, the constants ``pi``
and ``e``, and the functions ``sqrt exp log sin cos tan tanh abs maximum
minimum where``. Nothing else is reachable.
"""

from __future__ import annotations

import ast
import dataclasses
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .basis import BasisSet, parse_descriptor
from .bench import SCENARIOS, ContinuousModeSet, euler_discretize, scenario
from .control import ControllerConfig, UniformDisturbance
from .model import ArgumentError, CostSpec, SwitchDPError, SwitchedSystem, uniform_switch_table
from .training import TrainingConfig


class ConfigError(SwitchDPError):
    """The configuration document is malformed or inconsistent."""


_FUNCTIONS = {
    "sqrt": np.sqrt, "exp": np.exp, "log": np.log, "sin": np.sin, "cos": np.cos,
    "tan": np.tan, "tanh": np.tanh, "abs": np.abs, "maximum": np.maximum,
    "minimum": np.minimum, "where": np.where,
}
_CONSTANTS = {"pi": np.pi, "e": np.e}
_NODES = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load, ast.Constant,
          ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd, ast.Mod,
          ast.Compare, ast.Lt, ast.LtE, ast.Gt, ast.GtE)


class Expression:
    """A vectorised arithmetic expression in the state components."""

    def __init__(self, source: str, state_dim: int):
        self.source = str(source)
        names = {f"x{d}" for d in range(state_dim)}
        try:
            tree = ast.parse(self.source, mode="eval")
        except SyntaxError as exc:
            raise ConfigError(f"cannot parse expression {self.source!r}: {exc.msg}") from None
        for node in ast.walk(tree):
            if not isinstance(node, _NODES):
                raise ConfigError(f"{type(node).__name__} is not allowed in {self.source!r}")
            if isinstance(node, ast.Name) and node.id not in names | _FUNCTIONS.keys() | _CONSTANTS.keys():
                raise ConfigError(f"unknown name {node.id!r} in {self.source!r}")
            if isinstance(node, ast.Call) and not (isinstance(node.func, ast.Name) and node.func.id in _FUNCTIONS):
                raise ConfigError(f"only whitelisted functions may be called in {self.source!r}")
            if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
                raise ConfigError(f"only numeric literals are allowed in {self.source!r}")
        self._code = compile(tree, "<expression>", "eval")
        self.state_dim = state_dim

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        scope = {f"x{d}": x[..., d] for d in range(self.state_dim)}
        scope.update(_FUNCTIONS)
        scope.update(_CONSTANTS)
        out = eval(self._code, {"__builtins__": {}}, scope)  # noqa: S307 - AST checked above
        return np.broadcast_to(np.asarray(out, dtype=float), x.shape[:-1])

    def __repr__(self):
        return f"Expression({self.source!r})"


class VectorExpression:
    def __init__(self, sources, state_dim: int):
        if not isinstance(sources, list) or len(sources) != state_dim:
            raise ConfigError(f"each mode needs {state_dim} component expressions")
        self.parts = [Expression(s, state_dim) for s in sources]

    def __call__(self, x):
        return np.stack([p(x) for p in self.parts], axis=-1)


class ModeCost:
    """Expression cost plus a constant per-mode offset."""

    def __init__(self, expr: Expression, offsets: dict):
        self.expr = expr
        self.offsets = offsets

    def __call__(self, x, mode):
        return self.expr(x) + self.offsets.get(mode, 0.0)


@dataclass
class Experiment:
    system: SwitchedSystem
    cost: CostSpec
    basis: BasisSet
    training: TrainingConfig
    controller: ControllerConfig
    document: dict
    tracked_axis: Optional[int] = None
    target: float = 0.0


def read_document(path) -> dict:
    """Parse a TOML file; syntax errors carry line and column."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_document(text, str(path))


def parse_document(text: str, origin: str = "<config>") -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{origin}: {exc}") from None


def _offsets(raw, mode_count: int) -> dict:
    out = {}
    for key, val in dict(raw or {}).items():
        try:
            mode = int(key)
        except ValueError:
            raise ConfigError(f"offset key {key!r} is not a mode number") from None
        if not 1 <= mode <= mode_count:
            raise ConfigError(f"offset for mode {mode} but there are {mode_count} modes")
        out[mode] = float(val)
    return out


def _custom(doc: dict):
    sys_doc, cost_doc = doc.get("system"), doc.get("cost")
    if not isinstance(sys_doc, dict) or not isinstance(cost_doc, dict):
        raise ConfigError("a config needs either 'scenario' or both [system] and [cost] tables")
    try:
        n = int(sys_doc["state_dim"])
        modes = sys_doc["modes"]
        lo, hi = sys_doc["domain_lower"], sys_doc["domain_upper"]
        horizon = cost_doc["horizon"]
    except KeyError as exc:
        raise ConfigError(f"missing required key {exc.args[0]!r}") from None
    if not isinstance(modes, list) or not modes:
        raise ConfigError("[system] modes must be a non-empty list")
    fields = [VectorExpression(m, n) for m in modes]
    kind = sys_doc.get("kind", "continuous")
    if kind == "continuous":
        cms = ContinuousModeSet(fields, float(sys_doc.get("dt", 1.0)), bool(sys_doc.get("nonneg_clamp", False)))
        system = euler_discretize(cms, n, lo, hi, name=sys_doc.get("name", "custom"))
    elif kind == "discrete":
        system = SwitchedSystem(n, tuple(fields), lo, hi, name=sys_doc.get("name", "custom"))
    else:
        raise ConfigError(f"[system] kind must be 'continuous' or 'discrete', got {kind!r}")
    count = len(fields)
    terminal = ModeCost(Expression(cost_doc.get("terminal", "0"), n), _offsets(cost_doc.get("terminal_offsets"), count))
    running = ModeCost(Expression(cost_doc.get("running", "0"), n), _offsets(cost_doc.get("running_offsets"), count))
    if "switch_table" in cost_doc:
        table = cost_doc["switch_table"]
    else:
        table = uniform_switch_table(count, float(cost_doc.get("kappa0", doc.get("kappa0", 0.0))))
    cost = CostSpec(terminal, running, table, horizon)
    basis_doc = doc.get("basis") or {}
    if "descriptor" not in basis_doc:
        raise ConfigError("custom systems need [basis] descriptor")
    basis = parse_descriptor(basis_doc["descriptor"])
    axis = doc.get("tracked_axis")
    return system, cost, basis, TrainingConfig(), axis, float(doc.get("target", 0.0))


def build(doc: dict, seed: Optional[int] = None) -> Experiment:
    """Turn a parsed document into library objects.

    ``seed`` overrides ``[training] seed``; the returned ``document`` has the
    override applied so it can be echoed and replayed verbatim.
    """
    doc = _plain(doc)
    if seed is not None:
        doc.setdefault("training", {})["seed"] = int(seed)
    try:
        if "scenario" in doc:
            name = doc["scenario"]
            if name not in SCENARIOS:
                raise ConfigError(f"unknown scenario {name!r}; expected one of {', '.join(SCENARIOS)}")
            options = dict(doc.get("scenario_options") or {})
            system, cost, basis, base = scenario(name, doc.get("kappa0"), **options)
            axis, target = (0, 0.0) if name == "example1" else (1, 0.5)
            if "target" in options:
                target = float(options["target"])
        else:
            system, cost, basis, base, axis, target = _custom(doc)
        training = dataclasses.replace(base, **(doc.get("training") or {}))
        ctrl = dict(doc.get("controller") or {})
        if "disturbance" in ctrl:
            ctrl["disturbance"] = UniformDisturbance(**ctrl["disturbance"])
        controller = ControllerConfig(**ctrl)
    except TypeError as exc:
        raise ConfigError(f"unexpected option: {exc}") from None
    except ArgumentError as exc:
        raise ConfigError(str(exc)) from None
    return Experiment(system, cost, basis, training, controller, doc,
                      tracked_axis=None if axis is None else int(axis), target=target)


def _plain(value):
    # deep copy restricted to JSON-compatible types, so the echo always serialises
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_plain(v) for v in value]
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    raise ConfigError(f"unsupported config value {value!r}")
