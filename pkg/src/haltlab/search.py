"""Penalty search for the largest achievable halting mass.

The optimizer works directly on the local rule amplitudes and maximizes
the halting mass subject to global unitarity, enforced as a penalty
lambda * ||U^dag U - I||_F^2 whose weight grows tenfold per phase.  The
Frobenius penalty of the global matrix decomposes exactly into three
small-tensor terms (same-column norms, same-site column overlaps, and
right/left overlaps at head distance two), so no D x D matrix is formed
in the hot loop; the identity with the global computation is covered by
tests.

Each restart ends with a projection of the final table onto the unitary
matrices: polar decomposition of the dense global matrix, followed by a
refit of local rules read off one representative column per key.  Where
the polar factor is not exactly of local-rule form, the leftover is
reported as the projection residual.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
import scipy.optimize
import scipy.sparse as sp

from .nogo import halting_mass_from_table
from .qtm import (
    Configuration,
    MachineDims,
    MachineError,
    TransitionTable,
    build_global_matrix,
    check_global_unitarity,
    config_index,
    sparse_global_matrix,
)

__all__ = [
    "TableParametrization",
    "SearchResult",
    "penalty_value_grad",
    "global_frobenius_penalty",
    "project_to_unitary_table",
    "search_max_halting_mass",
]

#: move axis convention of the slot tensors: index 0 is move -1, 1 is +1
_MOVES = (-1, 1)


class TableParametrization:
    """Free amplitude slots of a transition table.

    In compliant mode the halted keys expose only (head state, move)
    slots that keep the scanned symbol and the halt bit; running keys
    always expose every (q', sigma', move, halt') slot.  Slot order is
    lexicographic in (key, q', sigma', move, halt').
    """

    def __init__(self, dims: MachineDims, ozawa_compliant: bool = True):
        self.dims = dims
        self.ozawa_compliant = ozawa_compliant
        self.keys = sorted(
            (q, s, hb) for q in range(dims.M) for s in range(dims.S) for hb in (0, 1)
        )
        mask = np.zeros((len(self.keys), dims.M, dims.S, 2, 2), dtype=bool)
        mass = np.zeros_like(mask)
        for ki, (_, sym, hb) in enumerate(self.keys):
            if ozawa_compliant and hb == 1:
                mask[ki, :, sym, :, 1] = True
            else:
                mask[ki] = True
            if hb == 0:
                mass[ki, :, :, :, 1] = True
        self.mask = mask
        self.mass_mask = mask & mass
        self.num_slots = int(mask.sum())

    def tensor_from_theta(self, theta: np.ndarray) -> np.ndarray:
        v = np.zeros(self.mask.shape, dtype=complex)
        v[self.mask] = theta
        return v

    def theta_from_tensor(self, v: np.ndarray) -> np.ndarray:
        return v[self.mask]

    def table_from_theta(self, theta: np.ndarray, threshold: float = 1e-15) -> TransitionTable:
        v = self.tensor_from_theta(theta)
        rules = {}
        for ki, key in enumerate(self.keys):
            outcomes = []
            for q2 in range(self.dims.M):
                for s2 in range(self.dims.S):
                    for di, move in enumerate(_MOVES):
                        for h2 in (0, 1):
                            amp = v[ki, q2, s2, di, h2]
                            if abs(amp) > threshold:
                                outcomes.append((q2, s2, move, h2, complex(amp)))
            rules[key] = outcomes
        return TransitionTable(self.dims, rules)

    def theta_from_table(self, table: TransitionTable) -> np.ndarray:
        v = np.zeros(self.mask.shape, dtype=complex)
        for ki, key in enumerate(self.keys):
            for q2, s2, move, h2, amp in table.rules[key]:
                di = _MOVES.index(move)
                if not self.mask[ki, q2, s2, di, h2] and abs(amp) > 0:
                    raise MachineError(
                        f"table amplitude at key {key} slot {(q2, s2, move, h2)} "
                        "outside the parametrization"
                    )
                v[ki, q2, s2, di, h2] = amp
        return self.theta_from_tensor(v)

    def random_theta(self, rng: np.random.Generator) -> np.ndarray:
        """Raw start point: each key column drawn Gaussian and normalized."""
        v = np.zeros(self.mask.shape, dtype=complex)
        v[self.mask] = rng.standard_normal(self.num_slots) + 1j * rng.standard_normal(
            self.num_slots
        )
        for ki in range(len(self.keys)):
            nrm = np.linalg.norm(v[ki])
            if nrm > 0:
                v[ki] /= nrm
        return self.theta_from_tensor(v)


def penalty_value_grad(v: np.ndarray, dims: MachineDims) -> Tuple[float, np.ndarray]:
    """||U^dag U - I||_F^2 and its Wirtinger gradient d/d(conj V).

    ``v`` has shape (num keys, M, S, move, halt').  Valid for N >= 5,
    where the three interference channels of the global operator (same
    head site, and head sites two cells apart in either direction) hit
    disjoint matrix entries.
    """
    if dims.N < 5:
        raise MachineError("closed-form penalty requires at least 5 tape cells")
    n_keys = v.shape[0]
    mult_same = dims.N * dims.S ** (dims.N - 1)
    mult_pair = dims.N * dims.S ** (dims.N - 2)

    flat = v.reshape(n_keys, -1)
    overlap = flat @ flat.conj().T
    delta = overlap - np.eye(n_keys)
    pen_same = mult_same * float(np.sum(np.abs(delta) ** 2))
    grad_flat = 2.0 * mult_same * (delta @ flat)

    # right/left blocks as (key * written symbol, head state * halt') rows
    right = v[:, :, :, 1, :].transpose(0, 2, 1, 3).reshape(n_keys * dims.S, -1)
    left = v[:, :, :, 0, :].transpose(0, 2, 1, 3).reshape(n_keys * dims.S, -1)
    cross = right.conj() @ left.T
    pen_pair = 2.0 * mult_pair * float(np.sum(np.abs(cross) ** 2))
    grad_right = 2.0 * mult_pair * (cross.conj() @ left)
    grad_left = 2.0 * mult_pair * (cross.T @ right)

    grad = grad_flat.reshape(v.shape)
    grad[:, :, :, 1, :] += grad_right.reshape(n_keys, dims.S, dims.M, 2).transpose(0, 2, 1, 3)
    grad[:, :, :, 0, :] += grad_left.reshape(n_keys, dims.S, dims.M, 2).transpose(0, 2, 1, 3)
    return pen_same + pen_pair, grad


def global_frobenius_penalty(table: TransitionTable) -> float:
    """||U^dag U - I||_F^2 computed from the sparse global matrix."""
    u = sparse_global_matrix(table)
    gram = (u.getH() @ u) - sp.identity(u.shape[0], dtype=complex, format="csc")
    return float(np.sum(np.abs(gram.data) ** 2))


def _objective(x, param, lam, mass_weight):
    n = param.num_slots
    theta = x[:n] + 1j * x[n:]
    v = param.tensor_from_theta(theta)
    pen, pen_grad = penalty_value_grad(v, param.dims)
    mass = float(np.sum(np.abs(v[param.mass_mask]) ** 2))
    grad_conj = lam * pen_grad
    if mass_weight:
        grad_conj = grad_conj - mass_weight * np.where(param.mass_mask, v, 0.0)
    g = grad_conj[param.mask]
    grad_x = np.concatenate([2.0 * g.real, 2.0 * g.imag])
    return lam * pen - mass_weight * mass, grad_x


def _mass_and_penalty(x, param):
    n = param.num_slots
    theta = x[:n] + 1j * x[n:]
    v = param.tensor_from_theta(theta)
    pen, _ = penalty_value_grad(v, param.dims)
    mass = float(np.sum(np.abs(v[param.mass_mask]) ** 2))
    return mass, pen


def _polar_factor(matrix: np.ndarray) -> np.ndarray:
    """Closest unitary matrix in Frobenius norm (polar decomposition via SVD)."""
    left, _, right = np.linalg.svd(matrix)
    return left @ right


def _escape_dead_columns(x: np.ndarray, param: TableParametrization, rng) -> np.ndarray:
    """Reinflate near-zero key columns of the current iterate.

    An all-zero column is an exact stationary point of the Frobenius
    penalty, so gradient steps never revive it.  Dead columns are replaced
    by a random direction inside their slot mask, orthogonalized against
    the in-mask components of every other column.
    """
    n = param.num_slots
    theta = x[:n] + 1j * x[n:]
    v = param.tensor_from_theta(theta)
    n_keys = len(param.keys)
    flat = v.reshape(n_keys, -1)
    norms = np.linalg.norm(flat, axis=1)
    if norms.min() >= 0.5:
        return x
    for ki in range(n_keys):
        if norms[ki] >= 0.5:
            continue
        mask_k = param.mask[ki].reshape(-1)
        others = [flat[kj][mask_k] for kj in range(n_keys) if kj != ki and norms[kj] >= 0.5]
        basis = np.stack(others, axis=1) if others else None
        for _attempt in range(16):
            raw = rng.standard_normal(int(mask_k.sum())) + 1j * rng.standard_normal(
                int(mask_k.sum())
            )
            if basis is not None:
                coef, *_ = np.linalg.lstsq(basis, raw, rcond=None)
                raw = raw - basis @ coef
            nrm = np.linalg.norm(raw)
            if nrm > 1e-6:
                flat[ki][:] = 0.0
                flat[ki][mask_k] = raw / nrm
                break
    theta = param.theta_from_tensor(v)
    return np.concatenate([theta.real, theta.imag])


def project_to_unitary_table(
    table: TransitionTable, ozawa_compliant: bool = True
) -> Tuple[TransitionTable, float]:
    """Polar-project the global matrix and refit local rules.

    The polar factor of the dense global matrix is the nearest unitary;
    its local part is read off one representative column per rule key
    (head at cell 0, scanned symbol at cell 0, other cells blank).  Any
    entry the local pattern cannot carry is dropped, and the max-abs
    difference between the polar factor and the refit table's global
    matrix is returned as the projection residual (zero when the refit is
    exact).
    """
    dims = table.dims
    dims.require_dense()
    polar = _polar_factor(build_global_matrix(table))
    param = TableParametrization(dims, ozawa_compliant)

    blank = (0,) * (dims.N - 1)
    rules = {}
    for ki, key in enumerate(param.keys):
        q, sym, hb = key
        rep = Configuration(q, 0, (sym,) + blank, hb)
        col = polar[:, config_index(rep, dims)]
        outcomes = []
        for q2 in range(dims.M):
            for s2 in range(dims.S):
                for di, move in enumerate(_MOVES):
                    for h2 in (0, 1):
                        if not param.mask[ki, q2, s2, di, h2]:
                            continue
                        target = Configuration(q2, move % dims.N, (s2,) + blank, h2)
                        amp = col[config_index(target, dims)]
                        if abs(amp) > 1e-15:
                            outcomes.append((q2, s2, move, h2, complex(amp)))
        rules[key] = outcomes

    refit = TransitionTable(dims, rules)
    residual = float(np.max(np.abs(polar - build_global_matrix(refit))))
    return refit, residual


@dataclass(frozen=True)
class SearchResult:
    best_mass: float
    best_unitarity_deviation: float
    best_projection_residual: float
    best_restart: int
    trace: Tuple[Tuple[int, float], ...]
    table: TransitionTable

    def as_dict(self) -> dict:
        return {
            "best_mass": self.best_mass,
            "best_unitarity_deviation": self.best_unitarity_deviation,
            "best_projection_residual": self.best_projection_residual,
            "best_restart": self.best_restart,
        }


def search_max_halting_mass(
    dims: MachineDims,
    restarts: int,
    iterations: int,
    seed: int,
    ozawa_compliant: bool = True,
    lambda0: float = 0.1,
    lambda_growth: float = 10.0,
    num_phases: int = 6,
) -> SearchResult:
    """Maximize halting mass over tables, penalizing unitarity violation.

    Each restart runs L-BFGS through ``num_phases`` phases with the
    penalty weight growing by ``lambda_growth`` per phase, then a final
    feasibility polish (penalty only), then the polar projection/refit.
    Fully deterministic given ``seed``: restart r draws from
    ``default_rng([seed, r])``.  Restarts are independent and are merged
    by picking the largest projected mass, earliest restart on ties.
    """
    if restarts < 1:
        raise MachineError("restarts must be >= 1")
    if iterations < 1:
        raise MachineError("iterations must be >= 1")
    dims.require_dense()

    lambdas = [lambda0 * lambda_growth**p for p in range(num_phases)]
    per_phase = max(1, iterations // (num_phases + 1))
    polish_iters = max(1, iterations - num_phases * per_phase)
    mass_weight = 1.0

    best = None
    for restart in range(restarts):
        rng = np.random.default_rng([seed, restart])
        param = TableParametrization(dims, ozawa_compliant)
        theta = param.random_theta(rng)
        x = np.concatenate([theta.real, theta.imag])

        trace: List[Tuple[int, float]] = []
        counter = [0]

        def record(xk, lam):
            mass, pen = _mass_and_penalty(xk, param)
            trace.append((counter[0], mass - lam * pen))
            counter[0] += 1

        record(x, lambdas[0])
        for lam in lambdas:
            res = scipy.optimize.minimize(
                _objective,
                x,
                args=(param, lam, mass_weight),
                jac=True,
                method="L-BFGS-B",
                callback=lambda xk, lam=lam: record(xk, lam),
                options={"maxiter": per_phase, "ftol": 1e-18, "gtol": 1e-14, "maxcor": 30},
            )
            x = _escape_dead_columns(res.x, param, rng)
        # feasibility polish: pure penalty, ground the iterate into the
        # unitary-table manifold before the polar projection
        res = scipy.optimize.minimize(
            _objective,
            x,
            args=(param, 1.0, 0.0),
            jac=True,
            method="L-BFGS-B",
            callback=lambda xk: record(xk, lambdas[-1]),
            options={"maxiter": polish_iters, "ftol": 0.0, "gtol": 1e-16, "maxcor": 30},
        )
        x = res.x

        theta = x[: param.num_slots] + 1j * x[param.num_slots :]
        raw_table = param.table_from_theta(theta)
        refit, projection_residual = project_to_unitary_table(raw_table, ozawa_compliant)
        mass = halting_mass_from_table(refit)
        deviation = check_global_unitarity(refit).max_deviation

        candidate = SearchResult(
            best_mass=mass,
            best_unitarity_deviation=deviation,
            best_projection_residual=projection_residual,
            best_restart=restart,
            trace=tuple(trace),
            table=refit,
        )
        if best is None or candidate.best_mass > best.best_mass:
            best = candidate
    return best
