"""CLI contract: exit codes, determinism, CSV and report shapes."""

import json
import pathlib
import subprocess
import sys

import pytest

from haltlab.cli import main

FIXTURES = pathlib.Path(__file__).parent / "fixtures"


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_check_passes_right_shift(capsys):
    code, out, _ = run_cli(capsys, "check", str(FIXTURES / "right_shift.json"))
    assert code == 0
    doc = json.loads(out)
    assert doc["passed"] is True
    assert doc["unitarity"]["max_deviation"] == 0.0
    assert doc["compliance"]["violations"] == []


def test_check_flags_halted_tape_writer(capsys):
    code, out, _ = run_cli(capsys, "check", str(FIXTURES / "halted_tape_writer.json"))
    assert code == 1
    doc = json.loads(out)
    assert doc["unitarity"]["passed"] is True
    assert doc["compliance"]["passed"] is False
    assert len(doc["compliance"]["violations"]) == 4


def test_check_malformed_document_exits_2(capsys):
    code, out, err = run_cli(capsys, "check", str(FIXTURES / "malformed.json"))
    assert code == 2
    assert out == ""
    assert "parse error" in err


def test_check_missing_file_exits_2(capsys):
    code, _, err = run_cli(capsys, "check", str(FIXTURES / "no_such_file.json"))
    assert code == 2
    assert "error" in err


def test_nogo_file_mode_passes_right_shift(capsys):
    code, out, _ = run_cli(capsys, "nogo", str(FIXTURES / "right_shift.json"))
    assert code == 0
    doc = json.loads(out)
    assert doc["report"]["passed"] is True
    assert doc["report"]["halting_mass"] == 0.0


def test_nogo_names_failed_precondition(capsys):
    code, out, _ = run_cli(capsys, "nogo", str(FIXTURES / "leaky_nonunitary.json"))
    assert code == 1
    doc = json.loads(out)
    assert doc["precondition_failure"]["check"] == "global_unitarity"

    code, out, _ = run_cli(capsys, "nogo", str(FIXTURES / "halt_flip_witness.json"))
    assert code == 1
    doc = json.loads(out)
    assert doc["precondition_failure"]["check"] == "ozawa_compliance"


def test_nogo_random_mode(capsys):
    code, out, _ = run_cli(
        capsys, "nogo", "--random", "M=2,S=2,N=6", "--samples", "3", "--seed", "5"
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["samples"] == 3
    assert doc["max_halting_mass"] <= 1e-10
    assert doc["max_residual"] <= 1e-10
    assert doc["passed"] is True


def test_nogo_rejects_both_file_and_random(capsys):
    code, _, err = run_cli(
        capsys, "nogo", str(FIXTURES / "right_shift.json"), "--random", "M=2,S=2,N=6"
    )
    assert code == 2
    assert "not both" in err


def test_nogo_rejects_zero_samples(capsys):
    code, _, err = run_cli(
        capsys, "nogo", "--random", "M=2,S=2,N=6", "--samples", "0"
    )
    assert code == 2
    assert "samples" in err


def test_nogo_trivial_dims_all_residuals_zero(capsys):
    code, out, _ = run_cli(capsys, "nogo", "--random", "M=1,S=1,N=6", "--samples", "2")
    assert code == 0
    doc = json.loads(out)
    assert doc["max_residual"] <= 1e-15


def test_search_reports_and_writes_trace(capsys, tmp_path):
    trace_path = tmp_path / "trace.csv"
    code, out, _ = run_cli(
        capsys, "search", "--dims", "M=1,S=2,N=6", "--restarts", "2",
        "--iterations", "120", "--seed", "1", "--out", str(trace_path),
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["best_mass"] <= 1e-6
    assert doc["best_unitarity_deviation"] <= 1e-8
    assert "warning" not in doc
    lines = trace_path.read_text().splitlines()
    assert lines[0] == "iteration,objective"
    assert len(lines) > 5


def test_search_no_ozawa_warns_and_finds_mass(capsys):
    code, out, _ = run_cli(
        capsys, "search", "--dims", "M=1,S=2,N=6", "--restarts", "2",
        "--iterations", "200", "--seed", "0", "--no-ozawa",
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["best_mass"] >= 0.5
    assert "warning" in doc


def test_search_zero_restarts_exits_2(capsys):
    code, _, err = run_cli(
        capsys, "search", "--dims", "M=2,S=2,N=6", "--restarts", "0"
    )
    assert code == 2
    assert "restarts" in err


def test_search_dimension_cap_exits_2(capsys):
    code, _, err = run_cli(capsys, "search", "--dims", "M=2,S=2,N=8")
    assert code == 2
    assert "cap" in err


def test_search_bad_dims_string_exits_2(capsys):
    code, _, _ = run_cli(capsys, "search", "--dims", "M=2,S=2")
    assert code == 2


def test_interfere_equal_halt_constant_coherence(capsys):
    code, out, _ = run_cli(capsys, "interfere", str(FIXTURES / "scenario_equal_halt.json"))
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "t,abs_coherence,monitored_delta"
    assert len(lines) == 22
    for line in lines[1:]:
        _, coh, delta = line.split(",")
        assert float(coh) == pytest.approx(0.5, abs=1e-12)
        assert float(delta) == 0.0


def test_interfere_shared_unequal_loses_coherence(capsys):
    code, out, _ = run_cli(
        capsys, "interfere", str(FIXTURES / "scenario_shared_unequal.json")
    )
    assert code == 0
    for line in out.splitlines()[1:]:
        t, coh, _ = line.split(",")
        if int(t) >= 3:
            assert float(coh) == 0.0


def test_interfere_permuted_single_reinterference_row(capsys):
    code, out, _ = run_cli(capsys, "interfere", str(FIXTURES / "scenario_permuted.json"))
    assert code == 0
    nonzero = [
        line for line in out.splitlines()[1:] if float(line.split(",")[1]) > 1e-12
    ]
    pre_split = {"0", "1", "2"}
    late = [line for line in nonzero if line.split(",")[0] not in pre_split]
    assert len(late) == 1
    t, coh, delta = late[0].split(",")
    assert t == "5"
    assert float(coh) == pytest.approx(0.5, abs=1e-12)
    assert float(delta) == pytest.approx(0.5, abs=1e-12)


def test_interfere_invalid_pair_exits_2(capsys):
    code, _, _ = run_cli(
        capsys, "interfere", str(FIXTURES / "scenario_equal_halt.json"), "--pair", "0,0"
    )
    assert code == 2
    code, _, _ = run_cli(
        capsys, "interfere", str(FIXTURES / "scenario_equal_halt.json"), "--pair", "0,7"
    )
    assert code == 2
    code, _, _ = run_cli(
        capsys, "interfere", str(FIXTURES / "scenario_equal_halt.json"), "--pair", "zero,one"
    )
    assert code == 2


def test_interfere_writes_csv_file(capsys, tmp_path):
    out_path = tmp_path / "rows.csv"
    code, out, _ = run_cli(
        capsys, "interfere", str(FIXTURES / "scenario_permuted.json"),
        "--out", str(out_path),
    )
    assert code == 0
    assert out == ""
    assert out_path.read_text().startswith("t,abs_coherence,monitored_delta\n")


@pytest.mark.parametrize(
    "argv",
    [
        ("check", str(FIXTURES / "right_shift.json")),
        ("nogo", str(FIXTURES / "right_shift.json")),
        ("nogo", "--random", "M=2,S=2,N=6", "--samples", "2", "--seed", "3"),
        ("search", "--dims", "M=1,S=2,N=6", "--restarts", "1", "--iterations", "80"),
        ("interfere", str(FIXTURES / "scenario_permuted.json")),
    ],
)
def test_commands_are_byte_deterministic(capsys, argv):
    code1, out1, _ = run_cli(capsys, *argv)
    code2, out2, _ = run_cli(capsys, *argv)
    assert code1 == code2
    assert out1 == out2


def test_module_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "haltlab", "check", str(FIXTURES / "right_shift.json")],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["passed"] is True


def test_missing_subcommand_exits_2():
    assert main([]) == 2
