"""Quantum Turing machine with a halt qubit on a cyclic tape.

A machine configuration is (head state q, head position h, tape contents,
halt bit).  Local rules map (q, scanned symbol, halt) to weighted outcomes
(q', written symbol, move, halt'); the global one-step operator U applies
the rule at the head position of every configuration in superposition.

The tape is cyclic with N cells, which keeps the configuration space
finite and makes unitarity of U exactly decidable.  Head moves are +1 or
-1 only; there is no stay-put option.
"""

from __future__ import annotations

import math
import types
from dataclasses import dataclass
from typing import Dict, Iterator, List, Mapping, NamedTuple, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .hilbert import SparseState

__all__ = [
    "DENSE_DIMENSION_CAP",
    "MachineError",
    "DimensionCapError",
    "MachineDims",
    "Configuration",
    "RuleKey",
    "Outcome",
    "TransitionTable",
    "UnitarityReport",
    "ComplianceReport",
    "step",
    "build_global_matrix",
    "sparse_global_matrix",
    "check_global_unitarity",
    "check_ozawa_compliance",
    "right_shift_table",
]

#: Largest configuration-space dimension for which the exact global
#: operator may be materialized.
DENSE_DIMENSION_CAP = 4096


class MachineError(ValueError):
    """Invalid machine definition, configuration or state."""


class DimensionCapError(MachineError):
    """Configuration space too large for exact global checks."""


@dataclass(frozen=True)
class MachineDims:
    """Machine sizes: M head states, S tape symbols, N tape cells."""

    num_head_states: int
    alphabet_size: int
    tape_cells: int

    def __post_init__(self):
        for name in ("num_head_states", "alphabet_size", "tape_cells"):
            val = getattr(self, name)
            if not isinstance(val, int) or val < 1:
                raise MachineError(f"{name} must be a positive integer, got {val!r}")

    # short aliases, matching the usual M/S/N notation
    @property
    def M(self) -> int:
        return self.num_head_states

    @property
    def S(self) -> int:
        return self.alphabet_size

    @property
    def N(self) -> int:
        return self.tape_cells

    @property
    def dim(self) -> int:
        """Configuration-space dimension M * N * S**N * 2."""
        return self.M * self.N * self.S**self.N * 2

    def require_dense(self) -> int:
        if self.dim > DENSE_DIMENSION_CAP:
            raise DimensionCapError(
                f"dimension {self.dim} exceeds dense cap {DENSE_DIMENSION_CAP}"
            )
        return self.dim


class Configuration(NamedTuple):
    """One classical basis label: head state, position, tape, halt bit."""

    q: int
    h: int
    tape: Tuple[int, ...]
    halt: int


#: (head state, scanned symbol, halt bit)
RuleKey = Tuple[int, int, int]
#: (new head state, written symbol, move in {-1, +1}, new halt bit, amplitude)
Outcome = Tuple[int, int, int, int, complex]


def validate_configuration(config, dims: MachineDims) -> Configuration:
    if not isinstance(config, tuple) or len(config) != 4:
        raise MachineError(f"not a configuration label: {config!r}")
    q, h, tape, halt = config
    if not (isinstance(q, int) and 0 <= q < dims.M):
        raise MachineError(f"head state {q!r} out of range for M={dims.M}")
    if not (isinstance(h, int) and 0 <= h < dims.N):
        raise MachineError(f"head position {h!r} out of range for N={dims.N}")
    if len(tape) != dims.N or any(not (isinstance(s, int) and 0 <= s < dims.S) for s in tape):
        raise MachineError(f"tape {tape!r} invalid for S={dims.S}, N={dims.N}")
    if halt not in (0, 1):
        raise MachineError(f"halt bit {halt!r} must be 0 or 1")
    return Configuration(q, h, tuple(tape), halt)


def all_configurations(dims: MachineDims) -> Iterator[Configuration]:
    """All configurations in lexicographic (q, h, tape, halt) order."""
    for q in range(dims.M):
        for h in range(dims.N):
            for tape_code in range(dims.S**dims.N):
                tape = _tape_from_code(tape_code, dims)
                for halt in (0, 1):
                    yield Configuration(q, h, tape, halt)


def _tape_from_code(code: int, dims: MachineDims) -> Tuple[int, ...]:
    cells = []
    for _ in range(dims.N):
        code, sym = divmod(code, dims.S)
        cells.append(sym)
    return tuple(reversed(cells))


def _tape_code(tape: Sequence[int], dims: MachineDims) -> int:
    code = 0
    for sym in tape:
        code = code * dims.S + sym
    return code


def config_index(config: Configuration, dims: MachineDims) -> int:
    """Position of ``config`` in the lexicographic enumeration."""
    q, h, tape, halt = config
    return ((q * dims.N + h) * dims.S**dims.N + _tape_code(tape, dims)) * 2 + halt


class TransitionTable:
    """Local rules (q, sigma, halt) -> weighted outcomes.

    Every key in [0,M) x [0,S) x {0,1} must be present; an empty outcome
    list is representable (it annihilates, which the global unitarity
    check rejects).  Outcome lists are stored sorted by target tuple and
    may not contain duplicate (q', sigma', move, halt') targets.
    """

    __slots__ = ("dims", "rules")

    def __init__(self, dims: MachineDims, rules: Mapping[RuleKey, Sequence[Outcome]]):
        normalized: Dict[RuleKey, Tuple[Outcome, ...]] = {}
        expected = {
            (q, s, hb)
            for q in range(dims.M)
            for s in range(dims.S)
            for hb in (0, 1)
        }
        unknown = set(rules) - expected
        if unknown:
            raise MachineError(f"rule keys outside dims: {sorted(unknown)[:4]}")
        missing = expected - set(rules)
        if missing:
            raise MachineError(f"missing rule keys: {sorted(missing)[:4]}")
        for key in sorted(rules):
            outcomes = []
            targets = set()
            for q2, s2, move, h2, amp in rules[key]:
                if not (0 <= q2 < dims.M and 0 <= s2 < dims.S):
                    raise MachineError(f"outcome target out of range at key {key}")
                if move not in (-1, 1):
                    raise MachineError(f"move must be -1 or +1, got {move} at key {key}")
                if h2 not in (0, 1):
                    raise MachineError(f"halt bit must be 0 or 1, got {h2} at key {key}")
                a = complex(amp)
                if not (math.isfinite(a.real) and math.isfinite(a.imag)):
                    raise MachineError(f"non-finite amplitude at key {key}")
                target = (q2, s2, move, h2)
                if target in targets:
                    raise MachineError(f"duplicate outcome {target} at key {key}")
                targets.add(target)
                outcomes.append((q2, s2, move, h2, a))
            normalized[key] = tuple(sorted(outcomes, key=lambda o: o[:4]))
        self.dims = dims
        self.rules = types.MappingProxyType(normalized)

    def outcomes(self, key: RuleKey) -> Tuple[Outcome, ...]:
        return self.rules[key]

    def __repr__(self) -> str:
        n_out = sum(len(v) for v in self.rules.values())
        return f"TransitionTable(dims={self.dims}, keys={len(self.rules)}, outcomes={n_out})"


def _resolve_dims(table: TransitionTable, dims: MachineDims | None) -> MachineDims:
    if dims is None:
        return table.dims
    if dims != table.dims:
        raise MachineError(f"dims {dims} do not match table dims {table.dims}")
    return dims


def step(state: SparseState, table: TransitionTable, dims: MachineDims | None = None) -> SparseState:
    """Apply the global one-step operator to a sparse state.

    For each configuration the rule at (q, tape[h], halt) fires: the head
    state, the scanned cell and the halt bit are rewritten and the head
    moves by the outcome's move, cyclically.  Amplitudes accumulate
    additively across interfering configurations.
    """
    d = _resolve_dims(table, dims)
    out: List[Tuple[Configuration, complex]] = []
    for label, amp in state.items():
        config = validate_configuration(label, d)
        key = (config.q, config.tape[config.h], config.halt)
        for q2, s2, move, h2, weight in table.rules[key]:
            tape2 = config.tape[: config.h] + (s2,) + config.tape[config.h + 1 :]
            target = Configuration(q2, (config.h + move) % d.N, tape2, h2)
            out.append((target, amp * weight))
    return SparseState(out)


def _global_entries(table: TransitionTable, dims: MachineDims):
    """Yield (row, col, amp) triples of the global matrix, column-major."""
    for col, config in enumerate(all_configurations(dims)):
        key = (config.q, config.tape[config.h], config.halt)
        for q2, s2, move, h2, weight in table.rules[key]:
            tape2 = config.tape[: config.h] + (s2,) + config.tape[config.h + 1 :]
            target = Configuration(q2, (config.h + move) % dims.N, tape2, h2)
            yield config_index(target, dims), col, weight


def build_global_matrix(table: TransitionTable, dims: MachineDims | None = None) -> np.ndarray:
    """Materialize U as a dense D x D matrix (configurations in lexicographic order)."""
    d = _resolve_dims(table, dims)
    size = d.require_dense()
    mat = np.zeros((size, size), dtype=complex)
    for row, col, amp in _global_entries(table, d):
        mat[row, col] += amp
    return mat


def sparse_global_matrix(table: TransitionTable, dims: MachineDims | None = None) -> sp.csc_matrix:
    """U in CSC form; same entries and ordering as :func:`build_global_matrix`."""
    d = _resolve_dims(table, dims)
    size = d.require_dense()
    rows, cols, vals = [], [], []
    for row, col, amp in _global_entries(table, d):
        rows.append(row)
        cols.append(col)
        vals.append(amp)
    return sp.csc_matrix(
        (np.asarray(vals, dtype=complex), (rows, cols)), shape=(size, size)
    )


@dataclass(frozen=True)
class UnitarityReport:
    max_deviation: float
    tol: float
    passed: bool
    dim: int

    def as_dict(self) -> dict:
        return {
            "max_deviation": self.max_deviation,
            "tol": self.tol,
            "passed": self.passed,
            "dim": self.dim,
        }


@dataclass(frozen=True)
class ComplianceReport:
    violations: Tuple[Tuple[RuleKey, Tuple[int, int, int, int]], ...]

    @property
    def passed(self) -> bool:
        return not self.violations

    def as_dict(self) -> dict:
        return {
            "violations": [
                {"key": list(key), "outcome": list(target)}
                for key, target in self.violations
            ],
            "passed": self.passed,
        }


def check_global_unitarity(
    table: TransitionTable, dims: MachineDims | None = None, tol: float = 1e-12
) -> UnitarityReport:
    """Max-abs entry of U^dag U - I over the full truncated configuration space."""
    d = _resolve_dims(table, dims)
    size = d.require_dense()
    u = sparse_global_matrix(table, d)
    gram = (u.getH() @ u) - sp.identity(size, dtype=complex, format="csc")
    gram.eliminate_zeros()
    dev = float(np.max(np.abs(gram.data))) if gram.nnz else 0.0
    return UnitarityReport(max_deviation=dev, tol=tol, passed=dev <= tol, dim=size)


def check_ozawa_compliance(table: TransitionTable) -> ComplianceReport:
    """Halted keys may change only the head state and position.

    Any outcome of a halt=1 key that rewrites the scanned symbol or clears
    the halt bit is a violation, regardless of its amplitude.
    """
    violations = []
    for key in sorted(table.rules):
        _, sym, halt = key
        if halt != 1:
            continue
        for q2, s2, move, h2, _amp in table.rules[key]:
            if s2 != sym or h2 != 1:
                violations.append((key, (q2, s2, move, h2)))
    return ComplianceReport(violations=tuple(violations))


def right_shift_table(dims: MachineDims) -> TransitionTable:
    """Permutation machine: every key keeps (q, sigma, halt) and moves right."""
    rules = {
        (q, s, hb): [(q, s, 1, hb, 1.0 + 0j)]
        for q in range(dims.M)
        for s in range(dims.S)
        for hb in (0, 1)
    }
    return TransitionTable(dims, rules)
