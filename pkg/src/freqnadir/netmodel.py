"""Network description, incidence matrix and the linear system matrix A(r).

State ordering is ``x = (omega, p, p_mech, v)``: ``n`` bus frequency
deviations, ``m`` line flows, ``n`` mechanical powers and ``n`` governor
(valve) states, so the system has dimension ``3n + m``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

BUS_FIELDS = ("m", "d", "tg", "tb", "pd")
_POSITIVE = ("m", "d", "tg", "tb")
_NUMBER = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")


class NetworkError(ValueError):
    """Invalid network description."""


class NetworkParseError(NetworkError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class NetworkModel:
    """Kron-reduced generator network.

    Per-bus arrays are indexed by ``bus - 1``; lines keep file order and
    use 1-based bus ids. ``r0`` holds the default (currently applied) droop
    gains when the description provides them.
    """

    m: tuple[float, ...]
    d: tuple[float, ...]
    tg: tuple[float, ...]
    tb: tuple[float, ...]
    pd: tuple[float, ...]
    lines: tuple[tuple[int, int], ...] = ()
    b: tuple[float, ...] = ()
    r0: tuple[float, ...] | None = None

    def __post_init__(self):
        # plain Python floats keep equality, hashing and repr predictable
        for name in BUS_FIELDS + ("b",):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        object.__setattr__(self, "lines", tuple((int(i), int(j)) for i, j in self.lines))
        if self.r0 is not None:
            object.__setattr__(self, "r0", tuple(float(v) for v in self.r0))
        _validate(self)

    @property
    def n(self) -> int:
        return len(self.m)

    @property
    def n_lines(self) -> int:
        return len(self.lines)

    @property
    def dimension(self) -> int:
        return 3 * self.n + self.n_lines

    def with_disturbance(self, pd) -> "NetworkModel":
        pd = tuple(float(x) for x in pd)
        if len(pd) != self.n:
            raise NetworkError(f"disturbance has {len(pd)} entries, expected {self.n}")
        return NetworkModel(self.m, self.d, self.tg, self.tb, pd, self.lines, self.b, self.r0)

    def default_gains(self) -> np.ndarray:
        if self.r0 is None:
            raise NetworkError("network description carries no default gains (r=...)")
        return np.array(self.r0, dtype=float)


def _validate(model: NetworkModel) -> None:
    n = len(model.m)
    if n < 1:
        raise NetworkError("network needs at least one bus")
    for name in BUS_FIELDS:
        values = getattr(model, name)
        if len(values) != n:
            raise NetworkError(f"parameter {name} has {len(values)} entries, expected {n}")
        for i, v in enumerate(values, start=1):
            if not np.isfinite(v):
                raise NetworkError(f"non-finite parameter {name} at bus {i}")
            if name in _POSITIVE and v <= 0:
                raise NetworkError(f"non-positive parameter {name} at bus {i}")
    if model.r0 is not None:
        if len(model.r0) != n:
            raise NetworkError(f"default gains have {len(model.r0)} entries, expected {n}")
        for i, v in enumerate(model.r0, start=1):
            if not np.isfinite(v) or v < 0:
                raise NetworkError(f"negative gain at bus {i}")
    if len(model.b) != len(model.lines):
        raise NetworkError("one stiffness value b is required per line")
    seen = set()
    for k, ((i, j), bk) in enumerate(zip(model.lines, model.b), start=1):
        if not (1 <= i <= n and 1 <= j <= n):
            raise NetworkError(f"line {k} ({i}, {j}) has an endpoint outside 1..{n}")
        if i == j:
            raise NetworkError(f"line {k} is a self-loop at bus {i}")
        key = frozenset((i, j))
        if key in seen:
            raise NetworkError(f"duplicate line ({i}, {j})")
        seen.add(key)
        if not (np.isfinite(bk) and bk > 0):
            raise NetworkError(f"non-positive parameter b at line ({i}, {j})")
    if len(model.lines) < n - 1 or not _connected(n, model.lines):
        raise NetworkError("network graph is not connected")


def _connected(n: int, lines) -> bool:
    adjacency = {i: set() for i in range(1, n + 1)}
    for i, j in lines:
        adjacency[i].add(j)
        adjacency[j].add(i)
    stack, reached = [1], {1}
    while stack:
        for nb in adjacency[stack.pop()]:
            if nb not in reached:
                reached.add(nb)
                stack.append(nb)
    return len(reached) == n


# --------------------------------------------------------------------------
# parsing / serialization


def parse_network(text: str) -> NetworkModel:
    """Parse the line-oriented ``bus``/``line`` text format."""
    buses: dict[int, dict[str, float]] = {}
    lines: list[tuple[int, int]] = []
    stiffness: list[float] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        tokens = [(m.group(), m.start() + 1) for m in re.finditer(r"\S+", body)]
        if not tokens:
            continue
        kind, col = tokens[0]
        if kind == "bus":
            if len(tokens) < 2:
                raise NetworkParseError("bus record needs an id", lineno, col)
            bus_id = _parse_int(*tokens[1], lineno)
            if bus_id in buses:
                raise NetworkParseError(f"bus {bus_id} defined twice", lineno, tokens[1][1])
            values = _parse_keyvalues(tokens[2:], lineno, allowed=BUS_FIELDS + ("r",))
            missing = [k for k in BUS_FIELDS if k not in values]
            if missing:
                raise NetworkParseError(
                    f"bus {bus_id} is missing {', '.join(missing)}", lineno, col
                )
            buses[bus_id] = values
        elif kind == "line":
            if len(tokens) < 3:
                raise NetworkParseError("line record needs two endpoints", lineno, col)
            i = _parse_int(*tokens[1], lineno)
            j = _parse_int(*tokens[2], lineno)
            values = _parse_keyvalues(tokens[3:], lineno, allowed=("b",))
            if "b" not in values:
                raise NetworkParseError("line record needs b=<value>", lineno, col)
            lines.append((i, j))
            stiffness.append(values["b"])
        else:
            raise NetworkParseError(f"unknown record type {kind!r}", lineno, col)
    return _build(buses, lines, stiffness)


def _parse_int(token: str, col: int, lineno: int) -> int:
    if not re.fullmatch(r"\d+", token):
        raise NetworkParseError(f"expected a positive integer id, got {token!r}", lineno, col)
    return int(token)


def _parse_keyvalues(tokens, lineno: int, allowed) -> dict[str, float]:
    values: dict[str, float] = {}
    for token, col in tokens:
        key, sep, value = token.partition("=")
        if not sep:
            raise NetworkParseError(f"expected key=value, got {token!r}", lineno, col)
        if key not in allowed:
            raise NetworkParseError(f"unknown key {key!r}", lineno, col)
        if key in values:
            raise NetworkParseError(f"key {key!r} given twice", lineno, col)
        if not _NUMBER.match(value):
            raise NetworkParseError(
                f"invalid number {value!r}", lineno, col + len(key) + 1
            )
        values[key] = float(value)
    return values


def _build(buses: dict[int, dict[str, float]], lines, stiffness) -> NetworkModel:
    n = len(buses)
    if sorted(buses) != list(range(1, n + 1)):
        raise NetworkError("bus ids must be consecutive integers starting at 1")
    ordered = [buses[i] for i in range(1, n + 1)]
    with_r = [b for b in ordered if "r" in b]
    if with_r and len(with_r) != n:
        raise NetworkError("default gain r must be given for every bus or for none")
    return NetworkModel(
        m=tuple(b["m"] for b in ordered),
        d=tuple(b["d"] for b in ordered),
        tg=tuple(b["tg"] for b in ordered),
        tb=tuple(b["tb"] for b in ordered),
        pd=tuple(b["pd"] for b in ordered),
        lines=tuple(lines),
        b=tuple(stiffness),
        r0=tuple(b["r"] for b in ordered) if with_r else None,
    )


def parse_network_json(text: str) -> NetworkModel:
    """Parse the JSON mirror: ``{"buses": [{id, m, d, tg, tb, pd[, r]}], "lines": [{from, to, b}]}``."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkParseError(exc.msg, exc.lineno, exc.colno) from exc
    try:
        buses = {}
        for entry in doc["buses"]:
            bus_id = int(entry["id"])
            if bus_id in buses:
                raise NetworkError(f"bus {bus_id} defined twice")
            buses[bus_id] = {
                k: float(entry[k]) for k in BUS_FIELDS + ("r",) if k in entry
            }
            missing = [k for k in BUS_FIELDS if k not in buses[bus_id]]
            if missing:
                raise NetworkError(f"bus {bus_id} is missing {', '.join(missing)}")
        lines = [(int(e["from"]), int(e["to"])) for e in doc.get("lines", [])]
        stiffness = [float(e["b"]) for e in doc.get("lines", [])]
    except (KeyError, TypeError) as exc:
        raise NetworkError(f"malformed JSON network: missing field {exc}") from exc
    return _build(buses, lines, stiffness)


def load_network(path) -> NetworkModel:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        return parse_network_json(text)
    return parse_network(text)


def format_network(model: NetworkModel) -> str:
    """Serialize to the text format; ``parse_network`` inverts this exactly."""
    out = []
    for i in range(model.n):
        fields = [f"{k}={getattr(model, k)[i]!r}" for k in BUS_FIELDS]
        if model.r0 is not None:
            fields.append(f"r={model.r0[i]!r}")
        out.append(f"bus {i + 1} " + " ".join(fields))
    for (i, j), bk in zip(model.lines, model.b):
        out.append(f"line {i} {j} b={bk!r}")
    return "\n".join(out) + "\n"


def network_to_json(model: NetworkModel) -> str:
    buses = []
    for i in range(model.n):
        entry = {"id": i + 1, **{k: getattr(model, k)[i] for k in BUS_FIELDS}}
        if model.r0 is not None:
            entry["r"] = model.r0[i]
        buses.append(entry)
    lines = [{"from": i, "to": j, "b": bk} for (i, j), bk in zip(model.lines, model.b)]
    return json.dumps({"buses": buses, "lines": lines}, indent=2)


# --------------------------------------------------------------------------
# matrices


def incidence_matrix(model: NetworkModel) -> np.ndarray:
    """n x m incidence matrix: +1 at the 'from' bus, -1 at the 'to' bus."""
    C = np.zeros((model.n, model.n_lines))
    for k, (i, j) in enumerate(model.lines):
        C[i - 1, k] = 1.0
        C[j - 1, k] = -1.0
    return C


@dataclass(frozen=True)
class SystemRealization:
    """``x' = A x + P`` with ``x(0) = 0``."""

    A: np.ndarray
    P: np.ndarray
    n: int
    n_lines: int
    blocks: dict[str, slice] = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return self.A.shape[0]


def block_slices(n: int, n_lines: int) -> dict[str, slice]:
    return {
        "omega": slice(0, n),
        "flow": slice(n, n + n_lines),
        "mech": slice(n + n_lines, 2 * n + n_lines),
        "valve": slice(2 * n + n_lines, 3 * n + n_lines),
    }


def assemble_system(model: NetworkModel, r) -> SystemRealization:
    """Build A(r) and the inhomogeneity for droop gains ``r``."""
    r = np.asarray(r, dtype=float)
    if r.shape != (model.n,):
        raise NetworkError(f"gain vector has shape {r.shape}, expected ({model.n},)")
    n, nl = model.n, model.n_lines
    inv_m = 1.0 / np.array(model.m)
    inv_tg = 1.0 / np.array(model.tg)
    inv_tb = 1.0 / np.array(model.tb)
    C = incidence_matrix(model)
    s = block_slices(n, nl)
    w, p, pm, v = s["omega"], s["flow"], s["mech"], s["valve"]

    A = np.zeros((3 * n + nl, 3 * n + nl))
    A[w, w] = np.diag(-inv_m * np.array(model.d))
    A[w, p] = -inv_m[:, None] * C
    A[w, pm] = np.diag(inv_m)
    A[p, w] = np.array(model.b)[:, None] * C.T
    # turbine lag t_G on p_mech, governor lag t_B on the valve state
    A[pm, pm] = np.diag(-inv_tg)
    A[pm, v] = np.diag(inv_tg)
    A[v, w] = np.diag(-inv_tb * r)
    A[v, v] = np.diag(-inv_tb)

    P = np.zeros(3 * n + nl)
    P[w] = inv_m * np.array(model.pd)
    A.setflags(write=False)
    P.setflags(write=False)
    return SystemRealization(A=A, P=P, n=n, n_lines=nl, blocks=s)
