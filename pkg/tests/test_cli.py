import csv
import json

import numpy as np
import pytest

from hmm_frontier.cli import cli_main


def run(capsys, *argv):
    code = cli_main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestSimulate:
    def test_basic(self, capsys):
        code, out, _ = run(capsys, "simulate", "--n", "5", "--seed", "1")
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == "x,y"
        assert len(lines) == 6

    def test_empty_path(self, capsys):
        code, out, _ = run(capsys, "simulate", "--n", "0")
        assert code == 0
        assert out.splitlines() == ["x,y"]

    def test_to_file(self, capsys, tmp_path):
        out_file = tmp_path / "path.csv"
        code, _, _ = run(capsys, "simulate", "--n", "10", "--out", str(out_file))
        assert code == 0
        assert len(out_file.read_text().splitlines()) == 11

    def test_invalid_density(self, capsys):
        code, _, err = run(capsys, "simulate", "--f0", "0.9,0.9,0.2")
        assert code == 1
        assert "error" in err


class TestEstimate:
    def test_end_to_end(self, capsys, tmp_path):
        obs_file = tmp_path / "obs.txt"
        path_file = tmp_path / "path.csv"
        run(capsys, "simulate", "--n", "2000", "--seed", "4", "--out", str(path_file))
        with open(path_file) as fh:
            rows = list(csv.DictReader(fh))
        obs_file.write_text("\n".join(r["y"] for r in rows))
        out_file = tmp_path / "fit.json"
        code, _, _ = run(
            capsys, "estimate", "--input", str(obs_file),
            "--delta", "0.1", "--epsilon", "0.3", "--zeta", "0.3",
            "--L", "0.3", "--k", "3", "--starts", "1",
            "--out", str(out_file),
        )
        assert code == 0
        result = json.loads(out_file.read_text())
        assert set(result) >= {"theta", "estimate", "objective", "converged"}
        assert 0 < result["theta"]["p"] <= 1

    def test_reads_csv_input(self, capsys, tmp_path):
        path_file = tmp_path / "path.csv"
        run(capsys, "simulate", "--n", "500", "--seed", "9", "--out", str(path_file))
        code, out, _ = run(
            capsys, "estimate", "--input", str(path_file),
            "--delta", "0.1", "--epsilon", "0.3", "--zeta", "0.3",
            "--L", "0.3", "--k", "3", "--starts", "0",
        )
        assert code == 0
        assert json.loads(out)["objective"] >= 0


class TestLbPair:
    def test_oracle(self, capsys):
        code, out, _ = run(
            capsys, "lb-pair", "--kind", "phi1_phi3", "--n", "10000000",
            "--delta", "0.1", "--epsilon", "0.2", "--zeta", "0.1",
            "--c", "0.01", "--k", "3",
        )
        assert code == 0
        pair = json.loads(out)
        assert pair["R"] == pytest.approx(0.07905694, abs=1e-8)
        assert pair["kind"] == "phi1_phi3"

    def test_infeasible_exit_2(self, capsys):
        code, _, err = run(
            capsys, "lb-pair", "--kind", "phi1_phi3", "--n", "100", "--c", "10",
        )
        assert code == 2
        assert "infeasible" in err


class TestConfigAndErrors:
    def test_missing_config(self, capsys):
        code, _, err = run(capsys, "rate-sweep", "--config", "does-not-exist.json")
        assert code == 1

    def test_unknown_subcommand(self, capsys):
        code, _, err = run(capsys, "bogus")
        assert code == 1
        assert "usage" in err

    def test_no_subcommand(self, capsys):
        assert run(capsys, )[0] == 1

    def test_config_file_with_flag_override(self, capsys, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"n": 3, "seed": 8}))
        code, out, _ = run(capsys, "simulate", "--config", str(cfg))
        assert code == 0
        assert len(out.splitlines()) == 4
        code, out, _ = run(capsys, "simulate", "--config", str(cfg), "--n", "6")
        assert len(out.splitlines()) == 7


class TestProbes:
    def test_equiv_probe(self, capsys):
        code, out, _ = run(
            capsys, "equiv-probe", "--pairs", "50", "--seed", "2",
            "--epsilon", "0.3", "--zeta", "0.3",
        )
        assert code == 0
        summary = json.loads(out)
        assert summary["min_ratio"] > 0
        assert summary["pairs_used"] == 50

    def test_kl_probe(self, capsys, tmp_path):
        import hmm_frontier as hf

        pp = hf.theta_to_phipsi(
            hf.ThetaParams(p=0.45, q=0.45, f0=[0.4, 0.3, 0.3], f1=[0.3, 0.3, 0.4])
        )
        b = hf.PhiPsiParams(
            phi1=pp.phi1, phi2=pp.phi2, phi3=pp.phi3,
            psi1=[0.36, 0.3, 0.34], psi2=pp.psi2,
        )
        fa, fb = tmp_path / "a.json", tmp_path / "b.json"
        fa.write_text(pp.to_json())
        fb.write_text(b.to_json())
        code, out, _ = run(
            capsys, "kl-probe", "--params-a", str(fa), "--params-b", str(fb),
            "--n-grid", "100,200", "--replicas", "50", "--seed", "3",
        )
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == "n,rho,rho_sq_times_n,kl_mean,kl_stderr,ratio"
        assert len(lines) == 3

    def test_threshold_probe(self, capsys):
        code, out, _ = run(
            capsys, "threshold-probe", "--kind", "phi1_phi3", "--n", "500",
            "--c", "0", "--replicas", "40", "--seed", "5",
        )
        assert code == 0
        probe = json.loads(out)
        assert 0.0 <= probe["test_error"] <= 1.0

    def test_rate_sweep_csv(self, capsys, tmp_path):
        out_file = tmp_path / "sweep.csv"
        code, _, _ = run(
            capsys, "rate-sweep", "--n-grid", "500", "--replicas", "1",
            "--epsilon", "0.3", "--zeta", "0.3", "--seed", "1",
            "--out", str(out_file),
        )
        assert code == 0
        lines = out_file.read_text().splitlines()
        assert lines[0].startswith("n,replica,seed,")
        assert len(lines) == 2
