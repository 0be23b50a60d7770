"""Tests of the sscf command line."""
import json

import numpy as np
import pytest
from typer.testing import CliRunner

from sscf import chebmat, structure
from sscf.cli.main import app
from sscf.cli.utils import EXIT_FAILED, EXIT_INPUT, exit_code, print_json, render_text
from sscf.dae import ScfPair
from sscf.equivalence import EquivalenceTransform
from sscf.exceptions import NonConvergenceError, PredicateError, SignatureError
from sscf.models import BlockSignature, Variant
from tests.conftest import JORDAN_ORDERS, COL_ELLS, ROW_ELLS, write_json

runner = CliRunner()


def invoke(tmp_path, *args, env=None):
    """Run a command with the JSON report written to a file; returns the result and the report."""
    report_path = tmp_path / "report.json"
    if report_path.exists():
        report_path.unlink()
    result = runner.invoke(app, ["--json", str(report_path), *args], env=env)
    report = json.loads(report_path.read_text()) if report_path.exists() else None
    return result, report


@pytest.fixture
def corpus(tmp_path):
    out = tmp_path / "corpus"
    result, _ = invoke(tmp_path, "generate", "--ells", "3,2,1", "--degree", "2", "--count", "2",
                       "--scramble", "1", "--out", str(out))
    assert result.exit_code == 0, result.output
    return out


def elementary_pair_file(path, ells, variant=Variant.COLUMNS):
    sig = BlockSignature(ells)
    N = chebmat.constant(structure.elementary(sig, variant))
    return write_json(path, ScfPair(0, None, N, sig, variant).to_dict())


class TestUtils:
    def test_print_json(self, capsys):
        print_json({"key": "value", "num": 42})
        assert json.loads(capsys.readouterr().out) == {"key": "value", "num": 42}

    def test_exit_codes(self):
        assert exit_code(SignatureError("x")) == EXIT_INPUT
        assert exit_code(PredicateError("x")) == EXIT_FAILED
        assert exit_code(NonConvergenceError("x")) == 4
        assert exit_code(RuntimeError("x")) == 1

    def test_render_text_flattens_results(self):
        text = render_text({"command": "spy", "pass": True, "results": {"nonzeros": [1, 0], "shape": [2, 2]},
                            "timings": {"spy": 0.5}})
        assert "results.nonzeros: [1, 0]" in text
        assert "timings.spy: 0.5" in text


class TestGenerate:
    def test_generates_corpus_from_block_sizes(self, tmp_path):
        out = tmp_path / "five"
        result, report = invoke(tmp_path, "generate", "--ells", ",".join(map(str, COL_ELLS)), "--count", "2",
                                "--out", str(out))
        assert result.exit_code == 0, result.output
        assert (out / "manifest.json").is_file()
        assert report["results"]["count"] == 2
        assert report["results"]["instances"][0]["characteristics"]["thetas"] == [7, 5, 4, 2]
        assert report["pass"] is True

    def test_from_characteristics_row_variant(self, tmp_path):
        result, report = invoke(tmp_path, "generate", "--from-characteristics", "m=26,r=18,thetas=7,5,4,2",
                                "--variant", "row", "--out", str(tmp_path / "rows"))
        assert result.exit_code == 0, result.output
        assert report["results"]["instances"][0]["signature"] == list(ROW_ELLS)

    def test_bad_ordering_exits_with_input_error(self, tmp_path):
        result, report = invoke(tmp_path, "generate", "--ells", "1,2", "--out", str(tmp_path / "x"))
        assert result.exit_code == EXIT_INPUT
        assert report["pass"] is False
        assert report["error"]["type"] == "SignatureError"

    def test_mu_mismatch(self, tmp_path):
        result, _ = invoke(tmp_path, "generate", "--mu", "3", "--ells", "2,1", "--out", str(tmp_path / "x"))
        assert result.exit_code == EXIT_INPUT

    def test_spec_file(self, tmp_path):
        spec = tmp_path / "spec.yaml"
        spec.write_text("seed: 3\ninstances:\n  - signature: [2, 1]\n    count: 3\n")
        result, report = invoke(tmp_path, "generate", "--spec-file", str(spec), "--out", str(tmp_path / "y"))
        assert result.exit_code == 0, result.output
        assert report["results"]["count"] == 3
        assert report["input_digest"] is not None

    def test_same_seed_gives_identical_files(self, tmp_path):
        for name in ("a", "b"):
            result, _ = invoke(tmp_path, "--seed", "9", "generate", "--ells", "2,1", "--out", str(tmp_path / name))
            assert result.exit_code == 0, result.output
        assert (tmp_path / "a" / "instance-00000.json").read_bytes() == \
            (tmp_path / "b" / "instance-00000.json").read_bytes()


class TestCanonicalize:
    def test_elementary_input_is_identity(self, tmp_path):
        path = elementary_pair_file(tmp_path / "pair.json", (2, 1))
        result, report = invoke(tmp_path, "canonicalize", str(path))
        assert result.exit_code == 0, result.output
        assert report["results"]["summary"] == "identity, 0 effective changes"
        assert report["results"]["identity"] is True

    def test_worked_example(self, tmp_path, worked_pair):
        path = write_json(tmp_path / "pair.json", worked_pair.to_dict())
        result, report = invoke(tmp_path, "canonicalize", str(path), "--out", str(tmp_path / "T.json"))
        assert result.exit_code == 0, result.output
        assert report["results"]["final_n"] == [[0.0, 1.0], [0.0, 0.0]]
        assert report["results"]["effective_changes"] == 2
        assert report["results"]["verification"]["pass"] is True
        T = EquivalenceTransform.from_dict(json.loads((tmp_path / "T.json").read_text()))
        np.testing.assert_allclose(T.K(0.0), np.diag([2.0, 1.0]), atol=1e-10)

    def test_corrupted_input_names_the_predicate(self, tmp_path, worked_n):
        pair = ScfPair(0, None, worked_n.T, BlockSignature((1, 1)), Variant.COLUMNS)
        path = write_json(tmp_path / "pair.json", pair.to_dict())
        result, report = invoke(tmp_path, "canonicalize", str(path))
        assert result.exit_code == EXIT_FAILED
        assert "SUT_columns" in result.output
        assert report["error"]["type"] == "PredicateError"

    def test_corpus_directory(self, tmp_path, corpus):
        result, report = invoke(tmp_path, "canonicalize", str(corpus), "--workers", "2",
                                "--out", str(tmp_path / "transforms"))
        assert result.exit_code == 0, result.output
        assert report["results"]["count"] == 2
        assert report["results"]["failed"] == 0
        assert (tmp_path / "transforms" / "instance-00001.transform.json").is_file()

    def test_missing_file(self, tmp_path):
        result, _ = invoke(tmp_path, "canonicalize", str(tmp_path / "nope.json"))
        assert result.exit_code == EXIT_INPUT


class TestCharacteristics:
    def test_jordan_matrix(self, tmp_path):
        path = write_json(tmp_path / "j.json", {"jordan": list(JORDAN_ORDERS)})
        result, report = invoke(tmp_path, "characteristics", str(path))
        assert result.exit_code == 0, result.output
        results = report["results"]
        assert results["characteristics"] == {"m": 26, "r": 18, "mu": 5, "thetas": [7, 5, 4, 2], "d": 0}
        assert results["ranks_of_powers"] == [18, 11, 6, 2, 0]
        assert results["jordan_blocks"] == {"1": 1, "2": 2, "3": 1, "4": 2, "5": 2}
        assert results["jordan_block_total"] == 8

    def test_zero_matrix_is_index_one(self, tmp_path):
        path = write_json(tmp_path / "z.json", [[0, 0], [0, 0]])
        result, report = invoke(tmp_path, "characteristics", str(path))
        assert result.exit_code == 0, result.output
        assert report["results"]["index_one"] is True
        assert report["results"]["jordan_blocks"] == {"1": 2}

    def test_row_elementary_matches_column(self, tmp_path):
        path = write_json(tmp_path / "r.json", structure.elementary_row(BlockSignature(ROW_ELLS)).tolist())
        result, report = invoke(tmp_path, "characteristics", str(path))
        assert result.exit_code == 0, result.output
        assert report["results"]["characteristics"]["thetas"] == [7, 5, 4, 2]

    def test_instance_file(self, tmp_path, corpus):
        result, report = invoke(tmp_path, "characteristics", str(corpus / "instance-00000.json"))
        assert result.exit_code == 0, result.output
        assert report["results"]["characteristics"]["thetas"] == [2, 1]
        assert report["results"]["ranks_of_powers"] is None


class TestJordan:
    def test_column_elementary(self, tmp_path, mixed_jordan):
        result, report = invoke(tmp_path, "jordan", "--ells", ",".join(map(str, COL_ELLS)))
        assert result.exit_code == 0, result.output
        assert report["results"]["orders"] == list(JORDAN_ORDERS)
        assert report["results"]["jordan_form"] == mixed_jordan.astype(int).tolist()

    def test_from_characteristics_row(self, tmp_path):
        result, report = invoke(tmp_path, "jordan", "--characteristics", "m=26,r=18,thetas=7,5,4,2",
                                "--variant", "row", "--no-matrix")
        assert result.exit_code == 0, result.output
        assert report["results"]["signature"]["ells"] == list(ROW_ELLS)
        assert "jordan_form" not in report["results"]

    def test_wrong_ordering(self, tmp_path):
        result, _ = invoke(tmp_path, "jordan", "--ells", "2,4", "--variant", "col")
        assert result.exit_code == EXIT_INPUT


class TestSolve:
    def test_manufactured_problem(self, tmp_path):
        out = tmp_path / "problems"
        result, _ = invoke(tmp_path, "generate", "--ells", "2,1", "--d", "1", "--problem", "--out", str(out))
        assert result.exit_code == 0, result.output
        result, report = invoke(tmp_path, "solve", str(out / "problem-00000.json"), "--out", str(tmp_path / "x.json"))
        assert result.exit_code == 0, result.output
        assert report["results"]["residual"] <= report["results"]["bound"]
        assert report["results"]["max_error"] <= 1e-6
        assert report["results"]["free_initial_dimension"] == 1
        assert (tmp_path / "x.json").is_file()


class TestVerify:
    def test_identity_transform(self, tmp_path, worked_pair):
        pair = write_json(tmp_path / "pair.json", worked_pair.to_dict())
        transform = write_json(tmp_path / "T.json", EquivalenceTransform.identity(2).to_dict())
        result, report = invoke(tmp_path, "verify", str(pair), str(transform), str(pair))
        assert result.exit_code == 0, result.output
        assert report["results"]["residual_E"] <= 1e-14
        assert report["results"]["residual_F"] <= 1e-14

    def test_mismatch_fails(self, tmp_path, worked_pair):
        pair = write_json(tmp_path / "pair.json", worked_pair.to_dict())
        other = elementary_pair_file(tmp_path / "other.json", (1, 1))
        transform = write_json(tmp_path / "T.json", EquivalenceTransform.identity(2).to_dict())
        result, report = invoke(tmp_path, "verify", str(pair), str(transform), str(other))
        assert result.exit_code == EXIT_FAILED
        assert report["pass"] is False
        assert report["results"]["residual_E"] > 0.5

    def test_scrambled_instance(self, tmp_path, corpus):
        result, report = invoke(tmp_path, "verify", str(corpus / "instance-00000.json"))
        assert result.exit_code == 0, result.output
        assert report["pass"] is True

    def test_instance_without_transform(self, tmp_path):
        out = tmp_path / "plain"
        invoke(tmp_path, "generate", "--ells", "2,1", "--out", str(out))
        result, _ = invoke(tmp_path, "verify", str(out / "instance-00000.json"))
        assert result.exit_code == EXIT_INPUT


class TestSpy:
    def test_mixed_jordan_powers(self, tmp_path):
        path = write_json(tmp_path / "j.json", {"jordan": list(JORDAN_ORDERS)})
        result, report = invoke(tmp_path, "spy", str(path), "--powers", "5")
        assert result.exit_code == 0, result.output
        assert report["results"]["nonzeros"] == [18, 11, 6, 2, 0]
        assert "N^1 (18 nonzeros)" in result.output

    def test_single_jordan_block(self, tmp_path):
        path = write_json(tmp_path / "j2.json", [[0, 1], [0, 0]])
        result, report = invoke(tmp_path, "spy", str(path), "--powers", "2")
        assert result.exit_code == 0, result.output
        assert report["results"]["nonzeros"] == [1, 0]
        assert report["results"]["panels"][0] == [".#", ".."]

    def test_column_elementary(self, tmp_path):
        matrix = structure.elementary_col(BlockSignature(COL_ELLS)).tolist()
        path = write_json(tmp_path / "e.json", {"matrix": matrix})
        result, report = invoke(tmp_path, "spy", str(path), "--powers", "5")
        assert result.exit_code == 0, result.output
        assert report["results"]["nonzeros"] == [18, 11, 6, 2, 0]

    def test_svg_is_deterministic(self, tmp_path):
        path = write_json(tmp_path / "j.json", {"jordan": list(JORDAN_ORDERS)})
        for name in ("a.svg", "b.svg"):
            result, report = invoke(tmp_path, "spy", str(path), "--powers", "3", "--format", "svg",
                                    "--out", str(tmp_path / name))
            assert result.exit_code == 0, result.output
            assert report["results"]["svg"] == str(tmp_path / name)
        assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()

    def test_unknown_format(self, tmp_path):
        path = write_json(tmp_path / "j2.json", [[0, 1], [0, 0]])
        result, _ = invoke(tmp_path, "spy", str(path), "--format", "png")
        assert result.exit_code == EXIT_INPUT


class TestEnvironment:
    def test_tolerance_and_report_path_from_env(self, tmp_path):
        path = write_json(tmp_path / "j2.json", [[0, 1], [0, 0]])
        report_path = tmp_path / "env-report.json"
        result = runner.invoke(app, ["characteristics", str(path)],
                               env={"SSCF_JSON_OUT": str(report_path), "SSCF_TOL": "1e-7"})
        assert result.exit_code == 0, result.output
        report = json.loads(report_path.read_text())
        assert report["tolerances"]["verify_tol"] == 1e-7

    def test_json_to_stdout(self, tmp_path):
        path = write_json(tmp_path / "j2.json", [[0, 1], [0, 0]])
        result = runner.invoke(app, ["--json", "-", "characteristics", str(path)])
        assert result.exit_code == 0, result.output
        assert json.loads(result.output)["results"]["index"] == 2
