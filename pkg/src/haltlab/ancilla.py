"""Branch computations with a halt qubit and an ancilla clock.

A branch is an abstract computation: an orbit of computational labels, a
halt step, and a frozen label from the halt step on.  Once a branch
halts, its halt qubit flips to 1 and an ancilla register starts stepping
through mutually orthogonal basis states; the ancilla index is what keeps
the evolution unitary while the computational state stays fixed, and it
records the time since halting.  Policies decide which index sequence
each branch walks after halting: the shared identity sequence, a
per-branch permutation of it, or an arbitrary injective map.

Branches that halt at different times entangle the computational register
with different halt-bit/ancilla states, so their mutual coherence in the
reduced computational density matrix dies; with permuted sequences it can
transiently return when two branches revisit the same index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Hashable, Mapping, Sequence, Tuple

import numpy as np

from .hilbert import SparseState, reduced_density

__all__ = [
    "BranchModelError",
    "PolicyError",
    "BranchSpec",
    "AncillaPolicy",
    "RunTrace",
    "run_superposition",
    "coherence",
    "monitored_run",
    "monitoring_effect",
    "FixedPointCertificate",
    "fixed_point_impossibility",
]

NORM_TOL = 1e-12
AGREEMENT_TOL = 1e-14


class BranchModelError(ValueError):
    """Invalid branch set, amplitudes or query."""


class PolicyError(BranchModelError):
    """Ancilla policy violates injectivity or does not cover a lookup."""


@dataclass(frozen=True)
class BranchSpec:
    """One computational branch: orbit, halt step, frozen post-halt label.

    The orbit lists the computational label at steps 0, 1, ...; it must
    cover every pre-halt step, and any entries from ``halt_step`` on must
    repeat ``post_halt_label`` (the computation freezes when it halts).
    """

    id: int
    orbit: Tuple[Hashable, ...]
    halt_step: int
    post_halt_label: Hashable = None

    def __post_init__(self):
        object.__setattr__(self, "orbit", tuple(self.orbit))
        if self.halt_step < 0:
            raise BranchModelError(f"branch {self.id}: halt_step must be >= 0")
        if len(self.orbit) < self.halt_step:
            raise BranchModelError(
                f"branch {self.id}: orbit covers {len(self.orbit)} steps, "
                f"needs at least {self.halt_step}"
            )
        post = self.post_halt_label
        if post is None:
            if len(self.orbit) <= self.halt_step:
                raise BranchModelError(
                    f"branch {self.id}: post_halt_label required when the orbit "
                    "ends at the halt step"
                )
            post = self.orbit[self.halt_step]
            object.__setattr__(self, "post_halt_label", post)
        for t in range(self.halt_step, len(self.orbit)):
            if self.orbit[t] != post:
                raise BranchModelError(
                    f"branch {self.id}: orbit[{t}] differs from the post-halt label"
                )

    def label_at(self, t: int) -> Hashable:
        if t >= self.halt_step:
            return self.post_halt_label
        if t >= len(self.orbit):
            raise BranchModelError(f"branch {self.id}: orbit shorter than step {t}")
        return self.orbit[t]

    def halt_bit(self, t: int) -> int:
        return 1 if t >= self.halt_step else 0


def _check_injective(mapping: Mapping[int, int], what: str) -> None:
    values = list(mapping.values())
    if len(set(values)) != len(values):
        raise PolicyError(f"{what} is not injective")
    if any(k < 0 for k in mapping) or any(v < 0 for v in values):
        raise PolicyError(f"{what} uses negative ancilla indices")


class AncillaPolicy:
    """Rule assigning the post-halt ancilla index of every branch.

    A branch that halted at step ``t_halt`` carries ancilla index
    ``rho(t - t_halt)`` at times t >= t_halt and index 0 before.  The map
    ``rho`` is the identity for the shared policy, a finite permutation
    extended by the identity for the permuted policy, and an explicit
    injective map for the custom policy.  Injectivity is what keeps
    post-halt ancilla states mutually orthogonal, and it is enforced at
    construction.
    """

    SHARED = "SharedOrbit"
    PERMUTED = "PermutedOrbit"
    CUSTOM = "CustomOrbit"

    def __init__(self, kind: str, maps: Mapping[int, Mapping[int, int]] | None = None):
        if kind not in (self.SHARED, self.PERMUTED, self.CUSTOM):
            raise PolicyError(f"unknown policy kind {kind!r}")
        self.kind = kind
        self.maps: Dict[int, Dict[int, int]] = {}
        if kind == self.SHARED:
            if maps:
                raise PolicyError("the shared policy takes no per-branch maps")
            return
        for branch_id, mapping in (maps or {}).items():
            mapping = {int(k): int(v) for k, v in mapping.items()}
            what = f"{kind} map for branch {branch_id}"
            _check_injective(mapping, what)
            if kind == self.PERMUTED and set(mapping) != set(mapping.values()):
                # anything short of a true permutation of its domain would
                # collide with the identity extension
                raise PolicyError(f"{what} is not a permutation of its domain")
            self.maps[branch_id] = mapping

    @classmethod
    def shared(cls) -> "AncillaPolicy":
        return cls(cls.SHARED)

    @classmethod
    def permuted(cls, permutations: Mapping[int, Mapping[int, int]]) -> "AncillaPolicy":
        return cls(cls.PERMUTED, permutations)

    @classmethod
    def custom(cls, maps: Mapping[int, Mapping[int, int]]) -> "AncillaPolicy":
        return cls(cls.CUSTOM, maps)

    def ancilla_index(self, branch_id: int, t: int, halt_step: int) -> int:
        if t < halt_step:
            return 0
        k = t - halt_step
        if self.kind == self.SHARED:
            return k
        mapping = self.maps.get(branch_id)
        if mapping is None:
            return k
        if self.kind == self.PERMUTED:
            return mapping.get(k, k)
        try:
            return mapping[k]
        except KeyError:
            raise PolicyError(
                f"custom map for branch {branch_id} does not cover offset {k}"
            ) from None

    def __repr__(self) -> str:
        return f"AncillaPolicy({self.kind}, branches={sorted(self.maps)})"


@dataclass(frozen=True)
class RunTrace:
    """States of a branch superposition at steps 0 .. t_max.

    Composite basis labels are (computational label, halt bit, ancilla
    index); the trace keeps one SparseState per step, all of norm 1.
    """

    branches: Tuple[BranchSpec, ...]
    amps: Tuple[complex, ...]
    policy: AncillaPolicy
    t_max: int
    states: Tuple[SparseState, ...] = field(repr=False)

    def state(self, t: int) -> SparseState:
        if not (0 <= t <= self.t_max):
            raise BranchModelError(f"step {t} outside 0..{self.t_max}")
        return self.states[t]

    def branch_label(self, i: int, t: int) -> Hashable:
        return self.branches[i].label_at(t)

    def branch_environment(self, i: int, t: int) -> Tuple[int, int]:
        """(halt bit, ancilla index) of branch i at step t."""
        b = self.branches[i]
        return b.halt_bit(t), self.policy.ancilla_index(b.id, t, b.halt_step)


def _composite(branch: BranchSpec, policy: AncillaPolicy, t: int):
    return (
        branch.label_at(t),
        branch.halt_bit(t),
        policy.ancilla_index(branch.id, t, branch.halt_step),
    )


def run_superposition(
    branches: Sequence[BranchSpec],
    amps: Sequence[complex],
    policy: AncillaPolicy,
    t_max: int,
) -> RunTrace:
    """Evolve sum_i a_i |c_i(t), H_i(t), anc_i(t)> for t = 0 .. t_max.

    The amplitudes must be normalized to 1e-12 and the branch set must
    contain no duplicated branch.  Every step is checked to have norm 1:
    a violation means two branches collided on the same composite label,
    which the branch bookkeeping cannot represent.
    """
    if t_max < 0:
        raise BranchModelError("t_max must be >= 0")
    if len(branches) != len(amps) or not branches:
        raise BranchModelError("need one amplitude per branch, at least one branch")
    amps = tuple(complex(a) for a in amps)
    total = math.fsum(abs(a) ** 2 for a in amps)
    if abs(total - 1.0) > NORM_TOL:
        raise BranchModelError(f"amplitudes not normalized: sum |a|^2 = {total!r}")
    ids = [b.id for b in branches]
    if len(set(ids)) != len(ids):
        raise BranchModelError("branch ids must be distinct")
    fingerprints = {(b.orbit, b.halt_step, b.post_halt_label) for b in branches}
    if len(fingerprints) != len(branches):
        raise BranchModelError("duplicated branch: same orbit and halt data")

    states = []
    for t in range(t_max + 1):
        state = SparseState(
            (_composite(b, policy, t), a) for b, a in zip(branches, amps)
        )
        if abs(state.norm() - 1.0) > NORM_TOL:
            raise BranchModelError(
                f"branches collide on a composite label at step {t}; "
                "the run is not an isometry on the branch set"
            )
        states.append(state)
    return RunTrace(
        branches=tuple(branches),
        amps=amps,
        policy=policy,
        t_max=t_max,
        states=tuple(states),
    )


def _split_computational(label):
    comp, halt, anc = label
    return comp, (halt, anc)


def coherence(trace: RunTrace, t: int, i: int, j: int) -> complex:
    """Coefficient of |c_i(t)><c_j(t)| in the reduced computational state.

    Equals a_i * conj(a_j) when branches i and j carry the same halt bit
    and ancilla index at step t, and 0 otherwise.  Whenever the branch
    labels at t are pairwise distinct the value is cross-checked against
    the reduced density matrix entry; the two must agree to 1e-14.
    """
    n = len(trace.branches)
    if not (0 <= i < n and 0 <= j < n):
        raise BranchModelError(f"branch index out of range: ({i}, {j})")
    if i == j:
        raise BranchModelError("coherence needs two distinct branches")
    if not (0 <= t <= trace.t_max):
        raise BranchModelError(f"step {t} outside 0..{trace.t_max}")

    env_i = trace.branch_environment(i, t)
    env_j = trace.branch_environment(j, t)
    value = trace.amps[i] * trace.amps[j].conjugate() if env_i == env_j else 0j

    labels = [trace.branch_label(k, t) for k in range(n)]
    if len(set(labels)) == n:
        rho = reduced_density(trace.state(t), _split_computational)
        entry = rho.entry(labels[i], labels[j])
        if abs(entry - value) > AGREEMENT_TOL:
            raise BranchModelError(
                f"coherence formula and reduced density disagree at step {t}: "
                f"{value} vs {entry}"
            )
    return value


def monitored_run(
    branches: Sequence[BranchSpec],
    amps: Sequence[complex],
    policy: AncillaPolicy,
    t_max: int,
) -> Dict[tuple, float]:
    """Exact outcome distribution under halt-qubit monitoring.

    The halt qubit is measured projectively after every step, which sorts
    the branch ensemble into groups by halt time.  Keys of the returned
    distribution are (halt-time record, final computational label), where
    the record is the halt step, or None for branches still running at
    ``t_max``.  The distribution is enumerated analytically, not sampled.
    """
    trace = run_superposition(branches, amps, policy, t_max)

    groups: Dict[object, list] = {}
    for idx, b in enumerate(trace.branches):
        record = b.halt_step if b.halt_step <= t_max else None
        groups.setdefault(record, []).append(idx)

    dist: Dict[tuple, float] = {}
    for record in sorted(groups, key=lambda r: (r is None, r)):
        # branches in one record group may still interfere; sum amplitudes
        # per (label, environment) before squaring
        cells: Dict[tuple, complex] = {}
        for idx in groups[record]:
            label = trace.branch_label(idx, t_max)
            env = trace.branch_environment(idx, t_max)
            cells[(label, env)] = cells.get((label, env), 0j) + trace.amps[idx]
        for (label, _env), amp in sorted(cells.items()):
            prob = abs(amp) ** 2
            if prob > 0.0:
                dist[(record, label)] = dist.get((record, label), 0.0) + prob
    return dist


@dataclass(frozen=True)
class MonitoringEffect:
    unmonitored_expectation: float
    monitored_expectation: float
    delta: float

    def as_dict(self) -> dict:
        return {
            "unmonitored_expectation": self.unmonitored_expectation,
            "monitored_expectation": self.monitored_expectation,
            "delta": self.delta,
        }


def monitoring_effect(
    branches: Sequence[BranchSpec],
    amps: Sequence[complex],
    policy: AncillaPolicy,
    observable: Tuple[int, int],
    t: int,
) -> MonitoringEffect:
    """Expectation shift caused by monitoring, for one branch pair.

    The observable is the projector onto (|c_i(t)> + |c_j(t)>)/sqrt(2) on
    the computational register, which requires distinct labels.  The
    monitored expectation zeroes the cross term whenever the halt-time
    records of the two branches differ by step t.
    """
    i, j = observable
    trace = run_superposition(branches, amps, policy, t_max=t)
    n = len(trace.branches)
    if not (0 <= i < n and 0 <= j < n) or i == j:
        raise BranchModelError(f"invalid branch pair ({i}, {j})")
    ci = trace.branch_label(i, t)
    cj = trace.branch_label(j, t)
    if ci == cj:
        raise BranchModelError(
            f"branches {i} and {j} share label {ci!r} at step {t}; projector degenerate"
        )

    rho = reduced_density(trace.state(t), _split_computational)
    rho_ii = rho.entry(ci, ci).real
    rho_jj = rho.entry(cj, cj).real
    rho_ij = rho.entry(ci, cj)

    ti = trace.branches[i].halt_step
    tj = trace.branches[j].halt_step
    records_agree = ti == tj or (ti > t and tj > t)

    unmonitored = (rho_ii + rho_jj) / 2.0 + rho_ij.real
    monitored = (rho_ii + rho_jj) / 2.0 + (rho_ij.real if records_agree else 0.0)
    return MonitoringEffect(
        unmonitored_expectation=unmonitored,
        monitored_expectation=monitored,
        delta=abs(unmonitored - monitored),
    )


@dataclass(frozen=True)
class FixedPointCertificate:
    """Numerical witness that a reached state cannot also be a fixed point."""

    dim: int
    overlap: float
    residual: float
    lower_bound: float

    def as_dict(self) -> dict:
        return {
            "dim": self.dim,
            "overlap": self.overlap,
            "residual": self.residual,
            "lower_bound": self.lower_bound,
        }


def fixed_point_impossibility(
    dim: int, overlap: float | None = None, seed: int = 0
) -> FixedPointCertificate:
    """Build U with U|psi_tilde> = |psi> and measure how badly U|psi> = |psi> fails.

    ``overlap`` is the real inner product <psi_tilde|psi> in [0, 1]; a
    random value is drawn when omitted.  U is the Householder reflection
    swapping the two states, so the residual ||U psi - psi|| equals
    ||psi - psi_tilde|| = sqrt(2 - 2 overlap), the bound unitarity alone
    imposes.  Only overlap 1 (psi_tilde = psi) makes the residual vanish.
    """
    if dim < 2:
        raise BranchModelError("need dimension >= 2")
    rng = np.random.default_rng(seed)
    r = float(rng.uniform(0.0, 1.0)) if overlap is None else float(overlap)
    if not 0.0 <= r <= 1.0:
        raise BranchModelError(f"overlap must lie in [0, 1], got {r}")

    psi_tilde = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    psi_tilde /= np.linalg.norm(psi_tilde)
    raw = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    raw -= np.vdot(psi_tilde, raw) * psi_tilde
    orth = raw / np.linalg.norm(raw)
    psi = r * psi_tilde + math.sqrt(max(0.0, 1.0 - r * r)) * orth

    w = psi_tilde - psi
    wnorm2 = float(np.vdot(w, w).real)
    if wnorm2 < 1e-28:
        u = np.eye(dim, dtype=complex)
    else:
        u = np.eye(dim, dtype=complex) - 2.0 * np.outer(w, w.conj()) / wnorm2
    mapped = u @ psi_tilde
    if np.linalg.norm(mapped - psi) > 1e-12:
        raise BranchModelError("reflection failed to map psi_tilde to psi")

    residual = float(np.linalg.norm(u @ psi - psi))
    bound = math.sqrt(max(0.0, 2.0 - 2.0 * r))
    return FixedPointCertificate(dim=dim, overlap=r, residual=residual, lower_bound=bound)
