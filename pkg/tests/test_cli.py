import json
from pathlib import Path

import numpy as np
import pytest

import latentpath as lp
from latentpath.cli import dispatch
from latentpath.report import stars

ASSETS = Path(lp.__file__).parent / "assets"
MODEL = str(ASSETS / "wuliangye.model")
PARAMS = str(ASSETS / "wuliangye_sim.json")


@pytest.fixture(scope="module")
def sim_csv(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "sim.csv"
    status = dispatch([
        "simulate", "--model", MODEL, "--params", PARAMS,
        "--n", "519", "--seed", "42", "--out", str(out),
        "--output", str(out.parent / "sim_report.txt"),
    ])
    assert status == 0
    return str(out)


class TestSimulate:
    def test_writes_csv(self, sim_csv):
        ds = lp.load_table(sim_csv)
        assert ds.n == 519
        assert ds.p == 21
        assert set(ds.names) == set(lp.parse_model(Path(MODEL).read_text()).indicator_names)

    def test_seed_changes_data(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for seed, path in (("1", a), ("2", b)):
            assert dispatch([
                "simulate", "--model", MODEL, "--params", PARAMS,
                "--n", "50", "--seed", seed, "--out", str(path),
                "--output", str(tmp_path / f"r{seed}.txt"),
            ]) == 0
        assert a.read_text() != b.read_text()

    def test_same_seed_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for path in (a, b):
            assert dispatch([
                "simulate", "--model", MODEL, "--params", PARAMS,
                "--n", "50", "--seed", "9", "--out", str(path),
                "--output", str(tmp_path / "r.txt"),
            ]) == 0
        assert a.read_bytes() == b.read_bytes()


class TestFit:
    def test_happy_path_text(self, sim_csv, tmp_path):
        out = tmp_path / "fit.txt"
        status = dispatch(["fit", "--model", MODEL, "--data", sim_csv,
                           "--output", str(out)])
        assert status == 0
        text = out.read_text()
        assert "Regression weights" in text
        assert "PB <- ConsEth" in text
        assert "H1" in text
        assert "Meets the standard?" in text

    def test_json_is_deterministic_and_full_precision(self, sim_csv, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for out in (a, b):
            assert dispatch(["fit", "--model", MODEL, "--data", sim_csv,
                             "--format", "json", "--output", str(out)]) == 0
        assert a.read_bytes() == b.read_bytes()
        doc = json.loads(a.read_text())
        assert doc["schema"] == 1
        assert "provenance" in doc
        assert doc["provenance"]["model_sha256"]
        fit_section = doc["sections"]["fit"]
        assert fit_section["converged"] is True
        # full-precision numerics present in JSON
        est = fit_section["estimates"]["PB~PerVa"]
        assert isinstance(est, float)
        assert abs(est) > 1e-12

    def test_text_numbers_appear_in_json(self, sim_csv, tmp_path):
        txt, js = tmp_path / "r.txt", tmp_path / "r.json"
        assert dispatch(["fit", "--model", MODEL, "--data", sim_csv,
                         "--output", str(txt)]) == 0
        assert dispatch(["fit", "--model", MODEL, "--data", sim_csv,
                         "--format", "json", "--output", str(js)]) == 0
        doc = json.loads(js.read_text())
        paths = doc["sections"]["regression_weights"]["paths"]
        text = txt.read_text()
        for row in paths:
            rounded = f"{row['estimate']:.3f}"
            assert rounded in text

    def test_cyclic_model_exits_2(self, sim_csv, tmp_path, capsys):
        bad = tmp_path / "cyclic.model"
        bad.write_text("A =~ CE1 + CE3\nB =~ CE4 + CE7\nA ~ B\nB ~ A\n")
        status = dispatch(["fit", "--model", str(bad), "--data", sim_csv])
        assert status == 2
        assert "cycle" in capsys.readouterr().err

    def test_missing_file_exits_2(self, tmp_path):
        status = dispatch(["fit", "--model", MODEL, "--data",
                           str(tmp_path / "ghost.csv")])
        assert status == 2

    def test_under_identified_exits_1(self, tmp_path, capsys):
        data = tmp_path / "tiny.csv"
        rng = np.random.default_rng(0)
        X = rng.standard_normal((30, 2))
        data.write_text("x,y\n" + "\n".join(f"{a},{b}" for a, b in X) + "\n")
        bad = tmp_path / "over.model"
        bad.write_text("Lx =~ 1*x\nLy =~ 1*y\nLx ~~ Ly\n")
        status = dispatch(["fit", "--model", str(bad), "--data", str(data)])
        assert status == 1
        assert "estimation error" in capsys.readouterr().err

    def test_unknown_flag_exits_2(self, sim_csv):
        assert dispatch(["fit", "--model", MODEL, "--data", sim_csv,
                         "--nope"]) == 2


class TestCfa:
    def test_convergent_and_discriminant_blocks(self, sim_csv, tmp_path):
        out = tmp_path / "cfa.txt"
        assert dispatch(["cfa", "--model", MODEL, "--data", sim_csv,
                         "--output", str(out)]) == 0
        text = out.read_text()
        assert "Convergent validity" in text
        assert "Discriminant validity" in text
        assert "CE1 <- ConsEth" in text


class TestReliability:
    def test_alpha_cr_ave_block(self, sim_csv, tmp_path):
        out = tmp_path / "rel.json"
        assert dispatch([
            "reliability", "--data", sim_csv,
            "--construct", "ConsEth=CE1,CE3,CE4,CE7,CE9,CE10",
            "--construct", "PerVa=PV1,PV2,PV3,PV4",
            "--format", "json", "--output", str(out),
        ]) == 0
        doc = json.loads(out.read_text())
        blocks = doc["sections"]["reliability"]["constructs"]
        by_name = {b["name"]: b for b in blocks}
        assert 0.6 < by_name["ConsEth"]["alpha"] <= 1.0
        assert 0 < by_name["ConsEth"]["ave"] <= 1.0
        assert 0 < by_name["ConsEth"]["cr"] <= 1.0
        assert by_name["ConsEth"]["kmo"] > 0.5

    def test_bad_construct_spec_exits_2(self, sim_csv):
        assert dispatch(["reliability", "--data", sim_csv,
                         "--construct", "nonsense"]) == 2


class TestEfa:
    def test_retention_and_suppression(self, sim_csv, tmp_path):
        out = tmp_path / "efa.json"
        assert dispatch(["efa", "--data", sim_csv, "--suppress", "0.4",
                         "--format", "json", "--output", str(out)]) == 0
        doc = json.loads(out.read_text())
        efa = doc["sections"]["efa"]
        assert efa["n_factors"] == 5
        # suppression blanks at least one cross loading
        assert any(cell is None for row in efa["cells"] for cell in row)

    def test_fixed_retention(self, sim_csv, tmp_path):
        out = tmp_path / "efa2.json"
        assert dispatch(["efa", "--data", sim_csv, "--retain", "m=2",
                         "--rotation", "none",
                         "--format", "json", "--output", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["sections"]["efa"]["n_factors"] == 2


class TestMediate:
    def test_bootstrap_output(self, sim_csv, tmp_path):
        out = tmp_path / "med.json"
        assert dispatch([
            "mediate", "--model", MODEL, "--data", sim_csv,
            "--effect", "EnvSt:PerVa:PB", "--boot", "150", "--seed", "3",
            "--format", "json", "--output", str(out),
        ]) == 0
        doc = json.loads(out.read_text())
        effect = doc["sections"]["mediation"]["effects"][0]
        assert effect["method"] == "percentile-bootstrap"
        assert effect["indirect_bounds"][0] <= effect["indirect_bounds"][1]
        assert effect["verdict"] in ("partial mediation", "full mediation",
                                     "no mediation", "none", "partial", "full")

    def test_delta_mode(self, sim_csv, tmp_path):
        out = tmp_path / "med_delta.json"
        assert dispatch([
            "mediate", "--model", MODEL, "--data", sim_csv,
            "--effect", "EnvSt:PerVa:PB", "--boot", "0",
            "--format", "json", "--output", str(out),
        ]) == 0
        doc = json.loads(out.read_text())
        assert doc["sections"]["mediation"]["effects"][0]["method"] == "delta"

    def test_seed_reproducibility(self, sim_csv, tmp_path):
        outs = []
        for name in ("m1.json", "m2.json"):
            out = tmp_path / name
            assert dispatch([
                "mediate", "--model", MODEL, "--data", sim_csv,
                "--effect", "PBC:PerVa:PB", "--boot", "120", "--seed", "11",
                "--format", "json", "--output", str(out),
            ]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_env_seed_override(self, sim_csv, tmp_path, monkeypatch):
        monkeypatch.setenv("LATENTPATH_SEED", "77")
        out1 = tmp_path / "e1.json"
        assert dispatch([
            "mediate", "--model", MODEL, "--data", sim_csv,
            "--effect", "PBC:PerVa:PB", "--boot", "120",
            "--format", "json", "--output", str(out1),
        ]) == 0
        doc = json.loads(out1.read_text())
        assert doc["provenance"]["seed"] == 77


class TestReport:
    def test_full_pipeline(self, sim_csv, tmp_path):
        out = tmp_path / "full.txt"
        assert dispatch([
            "report", "--model", MODEL, "--data", sim_csv,
            "--boot", "120", "--seed", "5", "--output", str(out),
        ]) == 0
        text = out.read_text()
        for heading in ("Reliability", "KMO and sphericity",
                        "Rotated component matrix", "Convergent validity",
                        "Discriminant validity", "Regression weights",
                        "Hypotheses", "Effects:"):
            assert heading in text, heading


class TestStars:
    def test_survey_convention(self):
        assert stars(0.0005) == "***"
        assert stars(0.07) == "*"
        assert stars(0.5) == ""
        assert stars(0.03) == "**"

    def test_conventional(self):
        assert stars(0.03, "conventional") == "*"
        assert stars(0.007, "conventional") == "**"
        assert stars(0.0005, "conventional") == "***"
