"""Machine model: step operator, global matrix, unitarity and compliance."""

import numpy as np
import pytest

from haltlab.hilbert import SparseState, inner_product
from haltlab.nogo import random_compliant_table
from haltlab.qtm import (
    Configuration,
    DimensionCapError,
    MachineDims,
    MachineError,
    TransitionTable,
    build_global_matrix,
    check_global_unitarity,
    check_ozawa_compliance,
    config_index,
    right_shift_table,
    sparse_global_matrix,
    step,
)

INV_SQRT2 = 2**-0.5


def _random_state(dims, rng, size=12):
    configs = set()
    while len(configs) < size:
        tape = tuple(int(x) for x in rng.integers(0, dims.S, size=dims.N))
        configs.add(
            Configuration(int(rng.integers(dims.M)), int(rng.integers(dims.N)), tape,
                          int(rng.integers(2)))
        )
    amps = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    amps /= np.linalg.norm(amps)
    return SparseState(zip(sorted(configs), amps))


def _to_vector(state, dims):
    vec = np.zeros(dims.dim, dtype=complex)
    for config, amp in state.items():
        vec[config_index(config, dims)] = amp
    return vec


def test_dims_validation():
    with pytest.raises(MachineError):
        MachineDims(0, 2, 6)
    with pytest.raises(MachineError):
        MachineDims(2, 2, -1)
    assert MachineDims(2, 2, 6).dim == 1536


def test_right_shift_moves_head():
    dims = MachineDims(2, 2, 6)
    table = right_shift_table(dims)
    start = Configuration(0, 0, (1, 0, 0, 0, 0, 0), 0)
    out = step(SparseState.basis(start), table)
    assert out.items() == [(Configuration(0, 1, (1, 0, 0, 0, 0, 0), 0), 1.0 + 0j)]


def test_head_state_hadamard_with_right_move():
    dims = MachineDims(2, 2, 6)
    rules = {}
    for s in range(2):
        for hb in (0, 1):
            rules[(0, s, hb)] = [(0, s, 1, hb, INV_SQRT2), (1, s, 1, hb, INV_SQRT2)]
            rules[(1, s, hb)] = [(0, s, 1, hb, INV_SQRT2), (1, s, 1, hb, -INV_SQRT2)]
    table = TransitionTable(dims, rules)
    tape = (0, 1, 0, 1, 0, 1)
    out = step(SparseState.basis(Configuration(0, 2, tape, 0)), table)
    assert out.items() == [
        (Configuration(0, 3, tape, 0), pytest.approx(INV_SQRT2)),
        (Configuration(1, 3, tape, 0), pytest.approx(INV_SQRT2)),
    ]
    assert check_global_unitarity(table).passed


def test_step_rejects_invalid_configuration():
    dims = MachineDims(2, 2, 6)
    table = right_shift_table(dims)
    bad = Configuration(5, 0, (0,) * 6, 0)
    with pytest.raises(MachineError):
        step(SparseState.basis(bad), table)


def test_step_is_linear():
    dims = MachineDims(2, 2, 5)
    rng = np.random.default_rng(11)
    table = random_compliant_table(dims, rng)
    x = _random_state(dims, rng)
    y = _random_state(dims, rng)
    a, b = 0.3 - 0.7j, 1.1 + 0.2j
    lhs = step(x.scaled(a).plus(y.scaled(b)), table)
    rhs = step(x, table).scaled(a).plus(step(y, table).scaled(b))
    assert lhs.minus(rhs).norm() < 1e-14


def test_right_shift_global_matrix_is_permutation():
    dims = MachineDims(1, 1, 3)
    mat = build_global_matrix(right_shift_table(dims))
    assert mat.shape == (6, 6)
    assert np.array_equal(np.abs(mat) > 0.5, np.abs(mat) > 0)  # entries are 0 or 1
    assert np.all(mat.sum(axis=0) == 1.0)
    assert np.all(mat.sum(axis=1) == 1.0)
    assert np.max(np.abs(mat.conj().T @ mat - np.eye(6))) == 0.0


def test_half_amplitude_column_norm():
    dims = MachineDims(1, 1, 3)
    rules = {(0, 0, hb): [(0, 0, 1, hb, 0.5)] for hb in (0, 1)}
    table = TransitionTable(dims, rules)
    mat = build_global_matrix(table)
    assert np.linalg.norm(mat[:, 0]) == pytest.approx(0.5)
    report = check_global_unitarity(table)
    assert report.max_deviation == pytest.approx(0.75)
    assert not report.passed


def test_step_agrees_with_dense_matrix():
    rng = np.random.default_rng(5)
    for dims in (MachineDims(2, 2, 4), MachineDims(1, 2, 5)):
        table = random_compliant_table(dims, rng)
        mat = build_global_matrix(table)
        for _ in range(5):
            state = _random_state(dims, rng)
            direct = _to_vector(step(state, table), dims)
            via_matrix = mat @ _to_vector(state, dims)
            assert np.max(np.abs(direct - via_matrix)) < 1e-14


def test_sparse_and_dense_global_matrices_agree():
    dims = MachineDims(2, 2, 4)
    table = random_compliant_table(dims, np.random.default_rng(9))
    dense = build_global_matrix(table)
    sparse = sparse_global_matrix(table).toarray()
    assert np.max(np.abs(dense - sparse)) == 0.0


def test_unitary_table_preserves_norm_and_inner_products():
    dims = MachineDims(2, 2, 6)
    rng = np.random.default_rng(23)
    table = random_compliant_table(dims, rng)
    assert check_global_unitarity(table).passed
    for _ in range(5):
        x = _random_state(dims, rng)
        y = _random_state(dims, rng)
        sx, sy = step(x, table), step(y, table)
        assert abs(sx.norm() - x.norm()) < 1e-12
        assert abs(inner_product(sx, sy) - inner_product(x, y)) < 1e-12


def test_dimension_cap_enforced():
    dims = MachineDims(2, 2, 8)  # dim 8192
    table = right_shift_table(dims)
    with pytest.raises(DimensionCapError):
        build_global_matrix(table)
    with pytest.raises(DimensionCapError):
        check_global_unitarity(table)


def test_empty_outcome_list_flagged_as_nonunitary():
    dims = MachineDims(1, 1, 3)
    rules = {(0, 0, 0): [], (0, 0, 1): [(0, 0, 1, 1, 1.0)]}
    table = TransitionTable(dims, rules)
    report = check_global_unitarity(table)
    assert report.max_deviation == pytest.approx(1.0)
    assert not report.passed


def test_table_validation_rejects_duplicates_and_gaps():
    dims = MachineDims(1, 2, 3)
    complete = {
        (0, s, hb): [(0, s, 1, hb, 1.0)] for s in range(2) for hb in (0, 1)
    }
    missing = dict(complete)
    del missing[(0, 1, 1)]
    with pytest.raises(MachineError):
        TransitionTable(dims, missing)
    duplicated = dict(complete)
    duplicated[(0, 0, 0)] = [(0, 0, 1, 0, 0.5), (0, 0, 1, 0, 0.5)]
    with pytest.raises(MachineError):
        TransitionTable(dims, duplicated)
    bad_move = dict(complete)
    bad_move[(0, 0, 0)] = [(0, 0, 0, 0, 1.0)]
    with pytest.raises(MachineError):
        TransitionTable(dims, bad_move)


def test_compliance_violations_reported():
    dims = MachineDims(1, 2, 3)

    def table_with_halted_rule(outcome):
        rules = {(0, s, hb): [(0, s, 1, hb, 1.0)] for s in range(2) for hb in (0, 1)}
        rules[(0, 0, 1)] = [outcome]
        return TransitionTable(dims, rules)

    writes_tape = table_with_halted_rule((0, 1, 1, 1, 1.0))
    assert check_ozawa_compliance(writes_tape).violations == (((0, 0, 1), (0, 1, 1, 1)),)

    clears_halt = table_with_halted_rule((0, 0, 1, 0, 1.0))
    assert check_ozawa_compliance(clears_halt).violations == (((0, 0, 1), (0, 0, 1, 0)),)

    moves_head = table_with_halted_rule((0, 0, -1, 1, 1.0))
    assert check_ozawa_compliance(moves_head).passed


def test_added_halting_outcome_breaks_unitarity():
    # a compliant unitary table plus one running->halted outcome of
    # amplitude 0.1, with the column greedily renormalized, cannot stay
    # unitary; the dense gram computation is the oracle
    dims = MachineDims(2, 2, 6)
    table = random_compliant_table(dims, np.random.default_rng(31))
    assert check_global_unitarity(table).passed

    rules = {key: list(val) for key, val in table.rules.items()}
    key = (0, 0, 0)
    taken = {o[:4] for o in rules[key]}
    assert (0, 0, 1, 1) not in taken  # generated tables carry no halting amplitude
    rules[key] = rules[key] + [(0, 0, 1, 1, 0.1 + 0j)]
    scale = 1.0 / np.sqrt(sum(abs(o[4]) ** 2 for o in rules[key]))
    rules[key] = [(q2, s2, mv, h2, amp * scale) for q2, s2, mv, h2, amp in rules[key]]
    spoiled = TransitionTable(dims, rules)

    report = check_global_unitarity(spoiled)
    assert not report.passed
    assert report.max_deviation > 1e-2
