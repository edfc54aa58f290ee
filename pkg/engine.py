"""
engine.py - deterministic stock-flow simulation kernel.

A ModelDefinition (stocks, auxiliaries, flows, parameters, table functions) is compiled once into
an ExecutableModel: expressions are parsed into a restricted arithmetic language and the
auxiliaries/flows are ordered topologically. Runs integrate the model with explicit Euler on a
TimeGrid. Every value is carried as a numpy column so one call can advance a whole batch of
realizations (one column per realization) with the same arithmetic as a single run.

Expression language (Python syntax):
- numbers, dotted names (`energy.coal.cost`), `time`, `dt`
- `+ - * / **`, unary minus, comparisons `< <= > >= == !=`
- exp, ln, log, sqrt, abs, min, max (n-ary), clip(x, lo, hi), if_then_else(cond, a, b)
- table application: `<table name>(x)` - piecewise linear, clamped to the end knots
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field, replace
from functools import reduce
import json
import keyword
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
import pandas as pd

from errors import (
    AlgebraicLoop,
    DuplicateName,
    InvalidExpression,
    InvalidGrid,
    InvalidTable,
    NonFiniteValue,
    ParseError,
    UnknownReference,
)


logger = logging.getLogger(__name__)

Knots = Tuple[Tuple[float, float], ...]
ArrayLike = Union[float, np.ndarray]

RESERVED_SYMBOLS = ("time", "dt")


# ---------- Definition types ----------
@dataclass(frozen=True)
class Stock:
    name: str
    initial: Union[float, str]
    units: str = ""


@dataclass(frozen=True)
class Auxiliary:
    name: str
    expression: str
    units: str = ""


@dataclass(frozen=True)
class Flow:
    name: str
    rate: str
    source: Optional[str] = None
    sink: Optional[str] = None
    units: str = ""


@dataclass(frozen=True)
class Parameter:
    name: str
    value: float
    units: str = ""


@dataclass(frozen=True)
class Table:
    name: str
    knots: Knots

    def __post_init__(self) -> None:
        knots = tuple((float(x), float(y)) for x, y in self.knots)
        object.__setattr__(self, "knots", knots)
        validate_knots(self.name, knots)

    @property
    def xs(self) -> np.ndarray:
        return np.array([x for x, _ in self.knots], dtype=float)

    @property
    def ys(self) -> np.ndarray:
        return np.array([y for _, y in self.knots], dtype=float)


def validate_knots(name: str, knots: Sequence[Tuple[float, float]]) -> None:
    if len(knots) < 2:
        raise InvalidTable(f"Table '{name}' needs at least 2 knots, got {len(knots)}.")
    previous = -math.inf
    for x, y in knots:
        if not (math.isfinite(x) and math.isfinite(y)):
            raise InvalidTable(f"Table '{name}' has a non-finite knot ({x}, {y}).")
        if x <= previous:
            raise InvalidTable(f"Table '{name}' knots must have strictly increasing x (at x={x}).")
        previous = x


@dataclass(frozen=True)
class ModelDefinition:
    stocks: Tuple[Stock, ...] = ()
    auxiliaries: Tuple[Auxiliary, ...] = ()
    flows: Tuple[Flow, ...] = ()
    parameters: Tuple[Parameter, ...] = ()
    tables: Tuple[Table, ...] = ()
    name: str = "model"

    def __post_init__(self) -> None:
        for attr in ("stocks", "auxiliaries", "flows", "parameters", "tables"):
            object.__setattr__(self, attr, tuple(getattr(self, attr)))

    def declared(self) -> List[Tuple[str, str]]:
        out: List[Tuple[str, str]] = []
        out.extend(("stock", s.name) for s in self.stocks)
        out.extend(("auxiliary", a.name) for a in self.auxiliaries)
        out.extend(("flow", f.name) for f in self.flows)
        out.extend(("parameter", p.name) for p in self.parameters)
        out.extend(("table", t.name) for t in self.tables)
        return out

    def parameter_values(self) -> Dict[str, float]:
        return {p.name: float(p.value) for p in self.parameters}

    def with_parameters(self, values: Mapping[str, float]) -> "ModelDefinition":
        known = {p.name for p in self.parameters}
        unknown = sorted(set(values) - known)
        if unknown:
            raise UnknownReference(f"Unknown model parameter(s): {', '.join(unknown)}")
        params = tuple(
            replace(p, value=float(values[p.name])) if p.name in values else p for p in self.parameters
        )
        return replace(self, parameters=params)


@dataclass(frozen=True)
class TimeGrid:
    start: float = 2015.0
    end: float = 2100.0
    step: float = 1.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.start) and math.isfinite(self.end) and math.isfinite(self.step)):
            raise InvalidGrid("Time grid bounds must be finite.")
        if self.start >= self.end:
            raise InvalidGrid(f"Time grid start ({self.start}) must be before end ({self.end}).")
        if self.step <= 0:
            raise InvalidGrid(f"Time grid step must be positive, got {self.step}.")
        steps = (self.end - self.start) / self.step
        if abs(steps - round(steps)) > 1e-9:
            raise InvalidGrid(
                f"Time grid span {self.end - self.start} is not divisible by step {self.step}."
            )

    @property
    def count(self) -> int:
        return int(round((self.end - self.start) / self.step)) + 1

    @property
    def times(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.count, dtype=float)

    def index_of(self, year: float) -> int:
        position = (float(year) - self.start) / self.step
        index = int(round(position))
        if abs(position - index) > 1e-9 or not (0 <= index < self.count):
            raise KeyError(f"Year {year:g} is not a grid point of {self.start:g}-{self.end:g}/{self.step:g}.")
        return index


@dataclass(frozen=True)
class Trajectory:
    grid: TimeGrid
    values: Mapping[str, np.ndarray]

    def __post_init__(self) -> None:
        cleaned: Dict[str, np.ndarray] = {}
        for name, series in self.values.items():
            arr = np.asarray(series, dtype=float)
            if arr.ndim != 1 or arr.shape[0] != self.grid.count:
                raise ValueError(
                    f"Trajectory series '{name}' has {arr.shape} values; expected {self.grid.count}."
                )
            if not np.all(np.isfinite(arr)):
                bad = int(np.flatnonzero(~np.isfinite(arr))[0])
                raise NonFiniteValue(name, float(self.grid.times[bad]))
            cleaned[name] = arr
        object.__setattr__(self, "values", cleaned)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.values[name]

    def __contains__(self, name: object) -> bool:
        return name in self.values

    @property
    def variables(self) -> List[str]:
        return list(self.values.keys())

    def at(self, name: str, year: float) -> float:
        return float(self.values[name][self.grid.index_of(year)])

    def to_frame(self, variables: Optional[Sequence[str]] = None) -> pd.DataFrame:
        names = list(variables) if variables is not None else self.variables
        times = self.grid.times
        years: Any = times.astype(int) if np.all(times == np.round(times)) else times
        frame = pd.DataFrame({"year": years})
        for name in names:
            frame[name] = self.values[name]
        return frame


def write_trajectory_csv(trajectory: Trajectory, path: Union[str, Path], variables: Optional[Sequence[str]] = None) -> Path:
    path = Path(path)
    trajectory.to_frame(variables).to_csv(path, index=False, lineterminator="\n", encoding="utf-8")
    return path


def read_trajectory_csv(path: Union[str, Path], grid: Optional[TimeGrid] = None) -> Trajectory:
    frame = pd.read_csv(path, encoding="utf-8", float_precision="round_trip")
    if "year" not in frame.columns:
        raise ParseError("Trajectory CSV must start with a 'year' column.", path=path)
    years = frame["year"].to_numpy(dtype=float)
    if grid is None:
        step = float(years[1] - years[0]) if len(years) > 1 else 1.0
        grid = TimeGrid(float(years[0]), float(years[-1]), step)
    return Trajectory(grid, {c: frame[c].to_numpy(dtype=float) for c in frame.columns if c != "year"})


# ---------- Expression compiler ----------
def _nary(fn):
    def apply(*args):
        if not args:
            raise InvalidExpression("min/max need at least one argument.")
        return reduce(fn, args)

    return apply


_FUNCTIONS: Dict[str, Any] = {
    "exp": np.exp,
    "ln": np.log,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "min": _nary(np.minimum),
    "max": _nary(np.maximum),
    "clip": np.clip,
    "if_then_else": np.where,
}
_FUNCTION_ARITY = {"exp": 1, "ln": 1, "log": 1, "sqrt": 1, "abs": 1, "clip": 3, "if_then_else": 3}

_BIN_OPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)
_UNARY_OPS = (ast.USub, ast.UAdd)
_CMP_OPS = (ast.Lt, ast.LtE, ast.Gt, ast.GtE, ast.Eq, ast.NotEq)


def symbol_id(name: str) -> str:
    return "v_" + name.replace(".", "__")


def _function_id(name: str) -> str:
    return "f_" + name


def _valid_name(name: str) -> bool:
    parts = name.split(".")
    return bool(name) and all(p.isidentifier() and not keyword.iskeyword(p) and "__" not in p for p in parts)


def _dotted(node: ast.AST) -> Optional[str]:
    if isinstance(node, ast.Name):
        return node.id
    if isinstance(node, ast.Attribute):
        base = _dotted(node.value)
        return f"{base}.{node.attr}" if base is not None else None
    return None


@dataclass
class CompiledExpression:
    text: str
    refs: frozenset
    tables: frozenset
    code: Any = field(repr=False, compare=False)


class _Rewriter:
    def __init__(self, owner: str, symbols: Iterable[str], tables: Iterable[str]) -> None:
        self.owner = owner
        self.symbols = set(symbols)
        self.tables = set(tables)
        self.refs: set[str] = set()
        self.used_tables: set[str] = set()

    def fail(self, message: str) -> InvalidExpression:
        return InvalidExpression(f"'{self.owner}': {message}")

    def visit(self, node: ast.AST) -> ast.AST:
        if isinstance(node, ast.Constant):
            if isinstance(node.value, bool) or not isinstance(node.value, (int, float)):
                raise self.fail(f"unsupported literal {node.value!r}")
            return ast.Constant(value=float(node.value))
        if isinstance(node, (ast.Name, ast.Attribute)):
            name = _dotted(node)
            if name is None:
                raise self.fail("unsupported attribute access")
            if name in self.tables:
                raise self.fail(f"table '{name}' must be applied to an argument")
            if name not in self.symbols:
                raise UnknownReference(f"'{self.owner}' references undeclared symbol '{name}'.")
            self.refs.add(name)
            return ast.Name(id=symbol_id(name), ctx=ast.Load())
        if isinstance(node, ast.BinOp):
            if not isinstance(node.op, _BIN_OPS):
                raise self.fail(f"operator {type(node.op).__name__} is not supported")
            return ast.BinOp(left=self.visit(node.left), op=node.op, right=self.visit(node.right))
        if isinstance(node, ast.UnaryOp):
            if not isinstance(node.op, _UNARY_OPS):
                raise self.fail(f"operator {type(node.op).__name__} is not supported")
            return ast.UnaryOp(op=node.op, operand=self.visit(node.operand))
        if isinstance(node, ast.Compare):
            if len(node.ops) != 1 or not isinstance(node.ops[0], _CMP_OPS):
                raise self.fail("only single comparisons are supported")
            return ast.Compare(left=self.visit(node.left), ops=node.ops, comparators=[self.visit(node.comparators[0])])
        if isinstance(node, ast.Call):
            if node.keywords:
                raise self.fail("keyword arguments are not supported")
            fname = _dotted(node.func)
            args = [self.visit(arg) for arg in node.args]
            if fname in _FUNCTIONS:
                arity = _FUNCTION_ARITY.get(fname)
                if arity is not None and len(args) != arity:
                    raise self.fail(f"{fname}() takes {arity} argument(s), got {len(args)}")
                return ast.Call(func=ast.Name(id=_function_id(fname), ctx=ast.Load()), args=args, keywords=[])
            if fname in self.tables:
                if len(args) != 1:
                    raise self.fail(f"table '{fname}' takes exactly one argument")
                self.used_tables.add(fname)
                return ast.Call(func=ast.Name(id=symbol_id(fname), ctx=ast.Load()), args=args, keywords=[])
            raise UnknownReference(f"'{self.owner}' calls unknown function or table '{fname}'.")
        raise self.fail(f"unsupported syntax {type(node).__name__}")


def compile_expression(owner: str, text: Union[str, float, int], symbols: Iterable[str], tables: Iterable[str] = ()) -> CompiledExpression:
    source = repr(float(text)) if isinstance(text, (int, float)) and not isinstance(text, bool) else str(text or "").strip()
    if not source:
        raise InvalidExpression(f"'{owner}': empty expression")
    try:
        tree = ast.parse(source, mode="eval")
    except SyntaxError as exc:
        raise InvalidExpression(f"'{owner}': cannot parse '{source}' ({exc.msg})") from exc
    rewriter = _Rewriter(owner, symbols, tables)
    body = rewriter.visit(tree.body)
    module = ast.fix_missing_locations(ast.Expression(body=body))
    code = compile(module, f"<{owner}>", "eval")
    return CompiledExpression(source, frozenset(rewriter.refs), frozenset(rewriter.used_tables), code)


def expression_symbols(text: Union[str, float, int]) -> set:
    """Dotted names an expression refers to, including applied tables but not built-in functions."""
    if isinstance(text, (int, float)):
        return set()
    try:
        tree = ast.parse(str(text).strip(), mode="eval")
    except SyntaxError as exc:
        raise InvalidExpression(f"cannot parse '{text}' ({exc.msg})") from exc
    names: set = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.Call):
            fname = _dotted(node.func)
            if fname is not None and fname not in _FUNCTIONS:
                names.add(fname)
        elif isinstance(node, (ast.Name, ast.Attribute)) and not isinstance(getattr(node, "ctx", None), ast.Store):
            name = _dotted(node)
            if name is not None and name not in _FUNCTIONS:
                names.add(name)
    # attribute chains also yield their prefixes; keep only the longest names
    return {n for n in names if not any(other.startswith(n + ".") for other in names)} - set(RESERVED_SYMBOLS)


class _TableFunction:
    __slots__ = ("xs", "ys")

    def __init__(self, table: Table) -> None:
        self.xs = table.xs
        self.ys = table.ys

    def __call__(self, x: ArrayLike) -> ArrayLike:
        return np.interp(x, self.xs, self.ys)


def lookup_eval(table: Union[Table, Sequence[Tuple[float, float]]], x: float) -> float:
    if not isinstance(table, Table):
        table = Table("lookup", tuple(table))
    return float(np.interp(float(x), table.xs, table.ys))


# ---------- Compilation ----------
@dataclass(frozen=True)
class ExecutableModel:
    definition: ModelDefinition
    order: Tuple[str, ...]
    expressions: Mapping[str, CompiledExpression] = field(compare=False, repr=False)
    initials: Mapping[str, CompiledExpression] = field(compare=False, repr=False)
    inflows: Mapping[str, Tuple[str, ...]] = field(compare=False, repr=False)
    outflows: Mapping[str, Tuple[str, ...]] = field(compare=False, repr=False)

    def __reduce__(self):
        # compiled code objects do not pickle; worker processes recompile from the definition
        return (compile_model, (self.definition,))

    @property
    def stock_names(self) -> Tuple[str, ...]:
        return tuple(s.name for s in self.definition.stocks)

    @property
    def variables(self) -> Tuple[str, ...]:
        return self.stock_names + self.order

    @property
    def parameter_names(self) -> Tuple[str, ...]:
        return tuple(p.name for p in self.definition.parameters)


def compile_model(definition: ModelDefinition) -> ExecutableModel:
    declared = definition.declared()
    seen: Dict[str, str] = {}
    mangled: Dict[str, str] = {}
    for kind, name in declared:
        if name in seen:
            raise DuplicateName(f"'{name}' is declared as both {seen[name]} and {kind}.")
        if name in RESERVED_SYMBOLS or name in _FUNCTIONS:
            raise DuplicateName(f"'{name}' is a reserved name.")
        if not _valid_name(name):
            raise InvalidExpression(f"'{name}' is not a valid model name.")
        key = symbol_id(name)
        if key in mangled:
            raise DuplicateName(f"'{name}' collides with '{mangled[key]}'.")
        seen[name] = kind
        mangled[key] = name

    stocks = [s.name for s in definition.stocks]
    computed = [a.name for a in definition.auxiliaries] + [f.name for f in definition.flows]
    params = [p.name for p in definition.parameters]
    tables = [t.name for t in definition.tables]
    symbols = set(stocks) | set(computed) | set(params) | set(RESERVED_SYMBOLS)

    expressions: Dict[str, CompiledExpression] = {}
    for aux in definition.auxiliaries:
        expressions[aux.name] = compile_expression(aux.name, aux.expression, symbols, tables)
    inflows: Dict[str, List[str]] = {s: [] for s in stocks}
    outflows: Dict[str, List[str]] = {s: [] for s in stocks}
    for flow in definition.flows:
        expressions[flow.name] = compile_expression(flow.name, flow.rate, symbols, tables)
        for end, bucket in ((flow.source, outflows), (flow.sink, inflows)):
            if end is None:
                continue
            if end not in bucket:
                raise UnknownReference(f"Flow '{flow.name}' connects undeclared stock '{end}'.")
            bucket[end].append(flow.name)

    initials: Dict[str, CompiledExpression] = {}
    for stock in definition.stocks:
        try:
            initials[stock.name] = compile_expression(f"{stock.name}.initial", stock.initial, params, tables)
        except UnknownReference as exc:
            raise UnknownReference(f"{exc} Stock initial values may only reference parameters and tables.") from exc

    graph = nx.DiGraph()
    graph.add_nodes_from(computed)
    computed_set = set(computed)
    for name in computed:
        for ref in expressions[name].refs & computed_set:
            graph.add_edge(ref, name)
    if not nx.is_directed_acyclic_graph(graph):
        cycle = nx.find_cycle(graph)
        path = " -> ".join([edge[0] for edge in cycle] + [cycle[0][0]])
        raise AlgebraicLoop(f"Algebraic loop without a stock: {path}")
    order = tuple(nx.lexicographical_topological_sort(graph))

    logger.debug("Compiled '%s': %d stocks, %d computed variables", definition.name, len(stocks), len(order))
    return ExecutableModel(
        definition=definition,
        order=order,
        expressions=expressions,
        initials=initials,
        inflows={s: tuple(sorted(v)) for s, v in inflows.items()},
        outflows={s: tuple(sorted(v)) for s, v in outflows.items()},
    )


# ---------- Integration ----------
def _column(value: Any, batch: int) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape == (batch,):
        return arr
    return np.broadcast_to(arr, (batch,))


def _batch_size(overrides: Mapping[str, Any], batch: Optional[int]) -> int:
    sizes = {np.asarray(v).shape[0] for v in overrides.values() if np.ndim(v) == 1}
    if len(sizes) > 1:
        raise ValueError(f"Parameter override columns disagree on batch size: {sorted(sizes)}")
    if sizes:
        size = sizes.pop()
        if batch is not None and batch != size:
            raise ValueError(f"Batch size {batch} does not match override columns ({size}).")
        return size
    return batch or 1


def _namespace(model: ExecutableModel, overrides: Mapping[str, Any]) -> Dict[str, Any]:
    known = set(model.parameter_names)
    unknown = sorted(set(overrides) - known)
    if unknown:
        raise UnknownReference(f"Unknown model parameter(s): {', '.join(unknown)}")
    ns: Dict[str, Any] = {"__builtins__": {}}
    ns.update({_function_id(name): fn for name, fn in _FUNCTIONS.items()})
    for table in model.definition.tables:
        ns[symbol_id(table.name)] = _TableFunction(table)
    for param in model.definition.parameters:
        value = overrides.get(param.name, param.value)
        ns[symbol_id(param.name)] = np.asarray(value, dtype=float) if np.ndim(value) else np.float64(value)
    return ns


def _first_bad(arr: np.ndarray) -> Optional[int]:
    mask = ~np.isfinite(arr)
    if mask.any():
        return int(np.flatnonzero(mask)[0])
    return None


def _check(name: str, arr: np.ndarray, year: float) -> None:
    if not np.isfinite(arr).all():
        raise NonFiniteValue(name, year, column=_first_bad(np.asarray(arr)))


def _initial_state(model: ExecutableModel, ns: Dict[str, Any], batch: int) -> Dict[str, np.ndarray]:
    state: Dict[str, np.ndarray] = {}
    with np.errstate(all="ignore"):
        for name in model.stock_names:
            value = np.array(_column(eval(model.initials[name].code, ns), batch), dtype=float)
            _check(name, value, float("nan"))
            state[name] = value
    return state


def _evaluate(model: ExecutableModel, ns: Dict[str, Any], state: Mapping[str, np.ndarray], t: float, dt: float, batch: int) -> Dict[str, np.ndarray]:
    ns["v_time"] = np.float64(t)
    ns["v_dt"] = np.float64(dt)
    for name, value in state.items():
        ns[symbol_id(name)] = value
    values: Dict[str, np.ndarray] = {}
    with np.errstate(all="ignore"):
        for name in model.order:
            arr = _column(eval(model.expressions[name].code, ns), batch)
            _check(name, arr, t)
            ns[symbol_id(name)] = arr
            values[name] = arr
    return values


def _advance(model: ExecutableModel, state: Mapping[str, np.ndarray], values: Mapping[str, np.ndarray], dt: float, t_next: float) -> Dict[str, np.ndarray]:
    nxt: Dict[str, np.ndarray] = {}
    for name in model.stock_names:
        net: Any = 0.0
        for flow in model.inflows[name]:
            net = net + values[flow]
        for flow in model.outflows[name]:
            net = net - values[flow]
        updated = state[name] + dt * net
        _check(name, updated, t_next)
        nxt[name] = updated
    return nxt


def step(
    model: ExecutableModel,
    state: Mapping[str, float],
    t: float,
    *,
    dt: float = 1.0,
    parameters: Optional[Mapping[str, float]] = None,
) -> Dict[str, float]:
    """One explicit-Euler step: S(t+dt) = S(t) + dt * (inflows - outflows)."""
    missing = [name for name in model.stock_names if name not in state]
    if missing:
        raise UnknownReference(f"State is missing stock(s): {', '.join(missing)}")
    ns = _namespace(model, parameters or {})
    columns: Dict[str, np.ndarray] = {}
    for name in model.stock_names:
        value = np.array([float(state[name])])
        _check(name, value, t)
        columns[name] = value
    values = _evaluate(model, ns, columns, float(t), float(dt), 1)
    nxt = _advance(model, columns, values, float(dt), float(t) + float(dt))
    return {name: float(arr[0]) for name, arr in nxt.items()}


@dataclass(frozen=True)
class BatchTrajectory:
    grid: TimeGrid
    values: Mapping[str, np.ndarray]  # name -> (grid.count, batch)

    @property
    def batch(self) -> int:
        first = next(iter(self.values.values()))
        return int(first.shape[1])

    def trajectory(self, column: int) -> Trajectory:
        return Trajectory(self.grid, {name: arr[:, column].copy() for name, arr in self.values.items()})


def run_batch(
    model: ExecutableModel,
    grid: Optional[TimeGrid] = None,
    *,
    overrides: Optional[Mapping[str, Any]] = None,
    batch: Optional[int] = None,
    record: Optional[Sequence[str]] = None,
) -> BatchTrajectory:
    """Integrate `batch` realizations at once; overrides map parameter names to scalars or columns."""
    grid = grid or TimeGrid()
    overrides = dict(overrides or {})
    size = _batch_size(overrides, batch)
    ns = _namespace(model, overrides)
    names = list(record) if record is not None else list(model.variables)
    unknown = sorted(set(names) - set(model.variables))
    if unknown:
        raise UnknownReference(f"Cannot record undeclared variable(s): {', '.join(unknown)}")

    times = grid.times
    out = {name: np.empty((grid.count, size), dtype=float) for name in names}
    state = _initial_state(model, ns, size)
    for k, t in enumerate(times):
        values = _evaluate(model, ns, state, float(t), grid.step, size)
        for name in names:
            out[name][k] = state[name] if name in state else values[name]
        if k == grid.count - 1:
            break
        state = _advance(model, state, values, grid.step, float(times[k + 1]))
    return BatchTrajectory(grid, out)


def run(
    model: ExecutableModel,
    grid: Optional[TimeGrid] = None,
    *,
    parameters: Optional[Mapping[str, float]] = None,
    record: Optional[Sequence[str]] = None,
) -> Trajectory:
    """Single deterministic run; records stocks, auxiliaries and flows at every grid point."""
    return run_batch(model, grid, overrides=parameters, batch=1, record=record).trajectory(0)


# ---------- Model definition files ----------
def definition_from_dict(payload: Mapping[str, Any], *, source: Any = None) -> ModelDefinition:
    def entries(key: str) -> List[Mapping[str, Any]]:
        items = payload.get(key, []) or []
        if not isinstance(items, list):
            raise ParseError(f"'{key}' must be a list.", path=source)
        for item in items:
            if not isinstance(item, Mapping) or not str(item.get("name", "")).strip():
                raise ParseError(f"Every entry of '{key}' needs a 'name'.", path=source)
        return items

    try:
        stocks = [Stock(str(s["name"]), s.get("initial", 0.0), str(s.get("units", ""))) for s in entries("stocks")]
        auxes = [Auxiliary(str(a["name"]), str(a["expression"]), str(a.get("units", ""))) for a in entries("auxiliaries")]
        flows = [
            Flow(str(f["name"]), str(f["rate"]), f.get("source"), f.get("sink"), str(f.get("units", "")))
            for f in entries("flows")
        ]
        params = [Parameter(str(p["name"]), float(p["value"]), str(p.get("units", ""))) for p in entries("parameters")]
        tables = [Table(str(t["name"]), tuple(tuple(k) for k in t["knots"])) for t in entries("tables")]
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, (InvalidTable, ParseError)):
            raise
        raise ParseError(f"Malformed model definition entry: {exc}", path=source) from exc
    return ModelDefinition(stocks, auxes, flows, params, tables, name=str(payload.get("name", "model")))


def definition_to_dict(definition: ModelDefinition) -> Dict[str, Any]:
    return {
        "name": definition.name,
        "stocks": [{"name": s.name, "initial": s.initial, "units": s.units} for s in definition.stocks],
        "auxiliaries": [{"name": a.name, "expression": a.expression, "units": a.units} for a in definition.auxiliaries],
        "flows": [
            {"name": f.name, "source": f.source, "sink": f.sink, "rate": f.rate, "units": f.units}
            for f in definition.flows
        ],
        "parameters": [{"name": p.name, "value": p.value, "units": p.units} for p in definition.parameters],
        "tables": [{"name": t.name, "knots": [list(k) for k in t.knots]} for t in definition.tables],
    }


def load_model_definition(path: Union[str, Path]) -> ModelDefinition:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path=path, line=exc.lineno) from exc
    if not isinstance(payload, dict):
        raise ParseError("Model definition must be a JSON object.", path=path)
    return definition_from_dict(payload, source=path)
