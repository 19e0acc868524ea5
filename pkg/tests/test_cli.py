import numpy as np
import numpy.testing as npt
import pytest

from scorecast.checkpoint import load_checkpoint
from scorecast.cli import main
from scorecast.ingest import parse_cohort, write_cohort
from scorecast.records import AssessmentRecord, build_view

SMALL = ["--set", "synth.n=40", "--set", "synth.seed=11"]
FAST_TRAIN = ["--set", "train.epochs=2", "--set", "train.batch_size=16"]
FAST_EVAL = FAST_TRAIN + ["--set", "eval.n_folds=2"]


def run(argv):
    return main(argv)


def make_cohort(tmp_path, name="cohort.csv", extra=()):
    path = tmp_path / name
    code = run(["synth", "--out", str(path), *SMALL, *extra])
    assert code == 0
    return path


class TestSynth:
    def test_writes_requested_rows(self, tmp_path, capsys):
        path = make_cohort(tmp_path)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "student_id,t1,t2,cw,mte,ete,total"
        assert len(lines) == 41
        assert "wrote 40 students" in capsys.readouterr().out

    def test_same_seed_byte_identical(self, tmp_path):
        a = make_cohort(tmp_path, "a.csv")
        b = make_cohort(tmp_path, "b.csv")
        assert a.read_bytes() == b.read_bytes()

    def test_seed_flag_changes_output(self, tmp_path):
        a = make_cohort(tmp_path, "a.csv")
        b = make_cohort(tmp_path, "b.csv", extra=["--seed", "99"])
        assert a.read_bytes() != b.read_bytes()

    def test_out_of_range_correlation_is_usage_error(self, tmp_path, capsys):
        code = run(["synth", "--out", str(tmp_path / "x.csv"),
                    "--corr", "ete=1.5"])
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_malformed_correlation_flag(self, tmp_path):
        assert run(["synth", "--out", str(tmp_path / "x.csv"),
                    "--corr", "ete"]) == 2

    def test_unreachable_correlation_is_numerical_error(self, tmp_path):
        # a valid target made infeasible by an enormous noise floor
        code = run(["synth", "--out", str(tmp_path / "x.csv"),
                    "--noise-sd", "80", *SMALL])
        assert code == 3

    def test_unknown_setting_rejected(self, tmp_path):
        assert run(["synth", "--out", str(tmp_path / "x.csv"),
                    "--set", "train.typo=1"]) == 2


class TestEda:
    def test_writes_tables_and_figures(self, tmp_path, capsys):
        cohort = make_cohort(tmp_path)
        out = tmp_path / "eda"
        assert run(["eda", "--input", str(cohort), "--out", str(out)]) == 0
        for suffix in (".hist.csv", ".corr.csv", ".gmap.csv",
                       ".hist.png", ".corr.png", ".gmap.png"):
            assert (out / f"cohort{suffix}").exists(), suffix
        stdout = capsys.readouterr().out
        for name in ("t1", "t2", "cw", "mte", "ete"):
            assert f"corr({name}, total)" in stdout

    def test_missing_input_file(self, tmp_path):
        assert run(["eda", "--input", str(tmp_path / "nope.csv"),
                    "--out", str(tmp_path)]) == 1

    def test_header_only_cohort(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("student_id,t1,t2,cw,mte,ete,total\n", encoding="utf-8")
        assert run(["eda", "--input", str(path), "--out", str(tmp_path)]) == 1


def linear_in_view_cohort(path, n=60, seed=13):
    """total depends only on cw and ete, so a D2-ETE linear fit is exact."""
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n):
        cw = float(rng.uniform(20, 100))
        ete = float(rng.uniform(20, 100))
        records.append(AssessmentRecord(
            student_id=f"s{i:03d}", t1=0.0, t2=0.0, cw=cw, mte=0.0, ete=ete,
            total=0.20 * cw + 0.30 * ete))
    write_cohort(records, path)
    return records


class TestTrainPredict:
    def test_round_trip_reproduces_library_predictions(self, tmp_path, capsys):
        cohort_path = tmp_path / "lin.csv"
        records = linear_in_view_cohort(cohort_path)
        ckpt = tmp_path / "model.json"
        assert run(["train", "--input", str(cohort_path), "--view", "d2-ete",
                    "--pipeline", "lr", "--out", str(ckpt)]) == 0
        assert "train r2 1.0000" in capsys.readouterr().out

        out = tmp_path / "pred.csv"
        assert run(["predict", "--input", str(cohort_path),
                    "--checkpoint", str(ckpt), "--view", "d2-ete",
                    "--out", str(out)]) == 0
        lines = out.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "student_id,predicted_total"
        assert len(lines) == 61

        view = build_view(records, "D2-ETE")
        expected = load_checkpoint(ckpt).predict(view.matrix)
        got = np.array([float(line.split(",")[1]) for line in lines[1:]])
        npt.assert_array_equal(got, expected)
        # exact linear relation means predictions equal the true totals
        npt.assert_allclose(got, view.targets, atol=1e-6)

    def test_view_mismatch_names_feature_counts(self, tmp_path, capsys):
        cohort_path = tmp_path / "lin.csv"
        linear_in_view_cohort(cohort_path)
        ckpt = tmp_path / "model.json"
        run(["train", "--input", str(cohort_path), "--view", "d2-ete",
             "--pipeline", "lr", "--out", str(ckpt)])
        capsys.readouterr()
        code = run(["predict", "--input", str(cohort_path),
                    "--checkpoint", str(ckpt), "--view", "d1",
                    "--out", str(tmp_path / "pred.csv")])
        assert code == 2
        err = capsys.readouterr().err
        assert "2 features" in err and "3" in err

    def test_incomplete_rows_skipped_with_note(self, tmp_path, capsys):
        cohort_path = tmp_path / "lin.csv"
        linear_in_view_cohort(cohort_path, n=20)
        text = cohort_path.read_text(encoding="utf-8").splitlines()
        # blank out ete on the first two data rows
        for i in (1, 2):
            cells = text[i].split(",")
            cells[5] = ""
            text[i] = ",".join(cells)
        cohort_path.write_text("\n".join(text) + "\n", encoding="utf-8")

        ckpt = tmp_path / "model.json"
        run(["train", "--input", str(cohort_path), "--view", "d2-ete",
             "--pipeline", "lr", "--out", str(ckpt)])
        capsys.readouterr()
        out = tmp_path / "pred.csv"
        assert run(["predict", "--input", str(cohort_path),
                    "--checkpoint", str(ckpt), "--out", str(out)]) == 0
        assert "2 rows lacked required features" in capsys.readouterr().err
        assert len(out.read_text(encoding="utf-8").splitlines()) == 19

    def test_missing_checkpoint(self, tmp_path):
        cohort_path = tmp_path / "lin.csv"
        linear_in_view_cohort(cohort_path, n=10)
        assert run(["predict", "--input", str(cohort_path),
                    "--checkpoint", str(tmp_path / "nope.json"),
                    "--out", str(tmp_path / "pred.csv")]) == 1


class TestEvaluate:
    def test_single_pipeline(self, tmp_path, capsys):
        cohort = make_cohort(tmp_path)
        out = tmp_path / "results"
        assert run(["evaluate", "--input", str(cohort), "--view", "d2-ete",
                    "--pipeline", "lr", "--out", str(out), *FAST_EVAL]) == 0
        lines = (out / "results.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0].startswith("pipeline,view,r2_mean,r2_std")
        assert len(lines) == 2
        assert lines[1].startswith("lr,D2-ETE,")
        assert (out / "results.png").exists()
        assert "r2=" in capsys.readouterr().out

    def test_full_view_set_runs_eight_pipelines(self, tmp_path):
        cohort = make_cohort(tmp_path)
        out = tmp_path / "results"
        assert run(["evaluate", "--input", str(cohort), "--view", "d1",
                    "--all-pipelines", "--out", str(out), *FAST_EVAL]) == 0
        lines = (out / "results.csv").read_text(encoding="utf-8").splitlines()
        assert len(lines) == 9
        names = [line.split(",")[0] for line in lines[1:]]
        assert names == ["vae+mlp", "vae+lr", "vae+et", "vae+rf",
                         "vae+xgb", "vae+knn", "lstm", "gru"]

    def test_results_byte_identical_across_runs(self, tmp_path):
        cohort = make_cohort(tmp_path)
        outputs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            assert run(["evaluate", "--input", str(cohort), "--view", "d2-mte",
                        "--pipeline", "xgb", "--out", str(out),
                        *FAST_EVAL]) == 0
            outputs.append((out / "results.csv").read_bytes())
        assert outputs[0] == outputs[1]

    def test_requires_exactly_one_selection_mode(self, tmp_path):
        cohort = make_cohort(tmp_path)
        assert run(["evaluate", "--input", str(cohort), "--view", "d1",
                    "--out", str(tmp_path / "o")]) == 2
        assert run(["evaluate", "--input", str(cohort), "--view", "d1",
                    "--pipeline", "lr", "--all-pipelines",
                    "--out", str(tmp_path / "o")]) == 2


class TestConfigFile:
    def test_config_file_feeds_settings(self, tmp_path):
        config = tmp_path / "run.conf"
        config.write_text("synth.n = 7\nsynth.seed = 3\n", encoding="utf-8")
        path = tmp_path / "c.csv"
        assert run(["synth", "--out", str(path), "--config", str(config)]) == 0
        assert len(path.read_text(encoding="utf-8").splitlines()) == 8

    def test_set_overrides_config_file(self, tmp_path):
        config = tmp_path / "run.conf"
        config.write_text("synth.n = 7\n", encoding="utf-8")
        path = tmp_path / "c.csv"
        assert run(["synth", "--out", str(path), "--config", str(config),
                    "--set", "synth.n=5"]) == 0
        assert len(path.read_text(encoding="utf-8").splitlines()) == 6

    def test_round_trip_through_parser(self, tmp_path):
        path = make_cohort(tmp_path)
        cohort = parse_cohort(path)
        assert cohort.n_accepted == 40
        assert not cohort.rejections
