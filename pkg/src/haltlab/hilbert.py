"""Sparse complex vectors over opaque, totally ordered basis labels.

One vector engine serves every state space in the package: labels are
whatever hashable, sortable objects the caller encodes its basis with
(machine configurations, branch/ancilla composites, ...).  All reductions
iterate in sorted label order, so every result is bit-stable across runs.
"""

from __future__ import annotations

import math
from typing import Callable, Hashable, Iterable, Mapping, Sequence, Tuple

import numpy as np

__all__ = [
    "PRUNE_THRESHOLD",
    "BasisLabel",
    "HilbertError",
    "SparseState",
    "DensityMatrix",
    "inner_product",
    "gram",
    "reduced_density",
]

#: Stored amplitudes at or below this magnitude are dropped.  Every
#: tolerance used elsewhere in the package is >= 1e-12, so pruning is
#: invisible to all checks.
PRUNE_THRESHOLD = 1e-15

BasisLabel = Hashable


class HilbertError(ValueError):
    """Malformed state, label set or density matrix."""


def _require_finite(amp: complex, label) -> None:
    if not (math.isfinite(amp.real) and math.isfinite(amp.imag)):
        raise HilbertError(f"non-finite amplitude {amp!r} at label {label!r}")


class SparseState:
    """Immutable sparse vector: basis label -> complex amplitude.

    Repeated labels in the input accumulate; entries whose magnitude ends
    up at or below ``prune`` are then dropped.
    """

    __slots__ = ("_entries",)

    def __init__(
        self,
        entries: Mapping[BasisLabel, complex] | Iterable[Tuple[BasisLabel, complex]] = (),
        prune: float = PRUNE_THRESHOLD,
    ):
        data: dict = {}
        items = entries.items() if isinstance(entries, Mapping) else entries
        for label, amp in items:
            data[label] = data.get(label, 0j) + complex(amp)
        for label in list(data):
            amp = data[label]
            _require_finite(amp, label)
            if abs(amp) <= prune:
                del data[label]
        self._entries = data

    @classmethod
    def basis(cls, label: BasisLabel) -> "SparseState":
        """Unit basis vector |label>."""
        return cls(((label, 1.0 + 0j),))

    def items(self) -> list:
        """Entries as (label, amplitude) pairs, sorted by label."""
        return sorted(self._entries.items(), key=lambda kv: kv[0])

    def labels(self) -> list:
        return sorted(self._entries)

    def amplitude(self, label: BasisLabel) -> complex:
        return self._entries.get(label, 0j)

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, label: BasisLabel) -> bool:
        return label in self._entries

    def norm_squared(self) -> float:
        return math.fsum(abs(a) ** 2 for _, a in self.items())

    def norm(self) -> float:
        return math.sqrt(self.norm_squared())

    def scaled(self, factor: complex) -> "SparseState":
        return SparseState((label, factor * amp) for label, amp in self.items())

    def plus(self, other: "SparseState") -> "SparseState":
        merged = list(self.items()) + list(other.items())
        return SparseState(merged)

    def minus(self, other: "SparseState") -> "SparseState":
        return self.plus(other.scaled(-1.0))

    def normalized(self) -> "SparseState":
        n = self.norm()
        if n == 0.0:
            raise HilbertError("cannot normalize the zero state")
        return self.scaled(1.0 / n)

    def __repr__(self) -> str:
        shown = ", ".join(f"{l!r}: {a:.3g}" for l, a in self.items()[:4])
        tail = ", ..." if len(self) > 4 else ""
        return f"SparseState({{{shown}{tail}}})"


def inner_product(x: SparseState, y: SparseState) -> complex:
    """<x|y>, conjugate-linear in ``x`` and linear in ``y``."""
    common = sorted(set(x.labels()) & set(y.labels()))
    return complex(sum(x.amplitude(l).conjugate() * y.amplitude(l) for l in common))


def gram(vectors: Sequence[SparseState]) -> np.ndarray:
    """Gram matrix G[j, k] = <v_j|v_k>; Hermitian by construction."""
    if len(vectors) == 0:
        raise HilbertError("gram requires at least one vector")
    n = len(vectors)
    g = np.zeros((n, n), dtype=complex)
    for j in range(n):
        for k in range(j, n):
            val = inner_product(vectors[j], vectors[k])
            g[j, k] = val
            g[k, j] = val.conjugate()
    return g


class DensityMatrix:
    """Dense Hermitian PSD matrix over an ordered list of subsystem labels."""

    #: construction tolerances
    HERMITICITY_TOL = 1e-12
    PSD_TOL = 1e-10

    __slots__ = ("labels", "matrix")

    def __init__(self, labels: Sequence[BasisLabel], matrix: np.ndarray):
        mat = np.asarray(matrix, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] != len(labels):
            raise HilbertError(
                f"matrix shape {mat.shape} does not match {len(labels)} labels"
            )
        if not np.all(np.isfinite(mat.view(float))):
            raise HilbertError("non-finite density matrix entry")
        herm = np.max(np.abs(mat - mat.conj().T)) if mat.size else 0.0
        if herm > self.HERMITICITY_TOL:
            raise HilbertError(f"density matrix not Hermitian: deviation {herm:.3e}")
        if mat.size:
            eigmin = float(np.linalg.eigvalsh(mat).min())
            if eigmin < -self.PSD_TOL:
                raise HilbertError(f"density matrix not PSD: min eigenvalue {eigmin:.3e}")
        mat.flags.writeable = False
        self.labels = tuple(labels)
        self.matrix = mat

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def entry(self, row_label: BasisLabel, col_label: BasisLabel) -> complex:
        i = self.labels.index(row_label)
        j = self.labels.index(col_label)
        return complex(self.matrix[i, j])

    def __repr__(self) -> str:
        return f"DensityMatrix(dim={len(self.labels)}, trace={self.trace:.6g})"


def reduced_density(
    state: SparseState,
    project: Callable[[BasisLabel], Tuple[BasisLabel, BasisLabel]],
) -> DensityMatrix:
    """Reduced density matrix of the subsystem singled out by ``project``.

    ``project`` splits each basis label into a ``(subsystem, environment)``
    pair.  The result is rho[c, c'] = sum_e amp(c, e) * conj(amp(c', e)),
    with rows/columns ordered by sorted subsystem label; its trace equals
    the squared norm of ``state``.
    """
    if state.norm_squared() == 0.0:
        raise HilbertError("reduced_density requires a state with positive norm")

    by_env: dict = {}
    sys_labels: set = set()
    for label, amp in state.items():
        sys_label, env_label = project(label)
        sys_labels.add(sys_label)
        by_env.setdefault(env_label, []).append((sys_label, amp))

    ordered = sorted(sys_labels)
    index = {l: i for i, l in enumerate(ordered)}
    rho = np.zeros((len(ordered), len(ordered)), dtype=complex)
    for env_label in sorted(by_env):
        group = by_env[env_label]
        for sys_i, amp_i in group:
            for sys_j, amp_j in group:
                rho[index[sys_i], index[sys_j]] += amp_i * amp_j.conjugate()

    dm = DensityMatrix(ordered, rho)
    drift = abs(dm.trace - state.norm_squared())
    if drift > 1e-12 * max(1.0, state.norm_squared()):
        raise HilbertError(f"trace drifted from squared norm by {drift:.3e}")
    return dm
