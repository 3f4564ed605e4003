import json

import numpy as np
import pytest

from earballs import cli
from earballs.data import load_feature_table, save_feature_table, synth_source


def run(argv):
    return cli.main(argv)


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    code = run([
        "synth-data", "--out", str(out), "--clusters", "4", "--per-cluster", "6",
        "--dim", "8", "--clips", "12", "--clip-len", "1024", "--seed", "5",
    ])
    assert code == 0
    return out


@pytest.fixture(scope="module")
def prepared_dir(dataset_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("prep")
    code = run([
        "prepare-data", "--features", str(dataset_dir / "features.csv"),
        "--audio-dir", str(dataset_dir / "audio"), "--out", str(out),
        "--clip-len", "1024", "--val-labels", "1", "--test-labels", "1", "--seed", "5",
    ])
    assert code == 0
    return out


def train_args(prepared_dir, out, seed="3"):
    return [
        "train",
        "--features", str(prepared_dir / "train.csv"),
        "--val-features", str(prepared_dir / "val.csv"),
        "--audio-dir", str(prepared_dir / "audio"),
        "--out", str(out),
        "--seed", seed,
        "--steps", "2", "--batch-size", "4", "--d-updates-per-g", "1",
        "--model-dim", "4", "--output-len", "1024", "--log-every", "1", "--val-every", "1",
    ]


@pytest.fixture(scope="module")
def trained_dir(prepared_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert run(train_args(prepared_dir, out)) == 0
    return out


class TestSynthAndPrepare:
    def test_synth_outputs(self, dataset_dir):
        assert (dataset_dir / "features.csv").exists()
        assert len(list((dataset_dir / "audio").glob("*.wav"))) == 12
        assert (dataset_dir / "run_manifest.json").exists()

    def test_prepare_outputs(self, prepared_dir):
        train = load_feature_table(prepared_dir / "train.csv")
        val = load_feature_table(prepared_dir / "val.csv")
        test = load_feature_table(prepared_dir / "test.csv")
        assert set(train.labels()).isdisjoint(val.labels())
        assert set(train.labels()).isdisjoint(test.labels())
        assert len(list((prepared_dir / "audio").glob("*.wav"))) == 12

    def test_manifest_contents(self, dataset_dir):
        manifest = json.loads((dataset_dir / "run_manifest.json").read_text())
        assert manifest["command"] == "synth-data"
        assert manifest["seed"] == 5
        assert "toolkit_version" in manifest


class TestTrainCli:
    def test_training_outputs(self, trained_dir):
        assert (trained_dir / "log.csv").exists()
        assert (trained_dir / "checkpoint.pt").exists()
        manifest = json.loads((trained_dir / "run_manifest.json").read_text())
        assert manifest["config"]["steps"] == 2

    def test_identical_seeds_identical_logs(self, prepared_dir, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert run(train_args(prepared_dir, a, seed="9")) == 0
        assert run(train_args(prepared_dir, b, seed="9")) == 0
        assert (a / "log.csv").read_bytes() == (b / "log.csv").read_bytes()

    def test_config_file_precedence(self, prepared_dir, tmp_path):
        config = tmp_path / "cfg.toml"
        config.write_text('steps = 1\nbatch_size = 4\nmodel_dim = 4\noutput_len = 1024\nd_updates_per_g = 1\nseed = 4\n')
        out = tmp_path / "run"
        code = run([
            "train", "--features", str(prepared_dir / "train.csv"),
            "--audio-dir", str(prepared_dir / "audio"), "--out", str(out),
            "--config", str(config), "--steps", "2", "--log-every", "1", "--val-every", "1",
        ])
        assert code == 0
        manifest = json.loads((out / "run_manifest.json").read_text())
        assert manifest["config"]["steps"] == 2  # flag beats file
        assert manifest["config"]["batch_size"] == 4  # file beats default
        assert manifest["seed"] == 4  # file seed honored

    def test_env_seed_fallback(self, prepared_dir, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.SEED_ENV_VAR, "17")
        out = tmp_path / "env-run"
        args = train_args(prepared_dir, out)
        seed_at = args.index("--seed")
        del args[seed_at:seed_at + 2]
        assert run(args) == 0
        manifest = json.loads((out / "run_manifest.json").read_text())
        assert manifest["seed"] == 17

    def test_unknown_config_key_is_usage_error(self, prepared_dir, tmp_path):
        config = tmp_path / "bad.toml"
        config.write_text("no_such_option = 1\n")
        args = train_args(prepared_dir, tmp_path / "x") + ["--config", str(config)]
        assert run(args) == 2


class TestSonifyEvaluate:
    def test_sonify_one_wav_per_row(self, trained_dir, prepared_dir, tmp_path):
        out = tmp_path / "sons"
        code = run([
            "sonify", "--checkpoint", str(trained_dir / "checkpoint.pt"),
            "--vector-file", str(prepared_dir / "test.csv"), "--out", str(out),
        ])
        assert code == 0
        table = load_feature_table(prepared_dir / "test.csv")
        wavs = sorted(out.glob("*.wav"))
        assert len(wavs) == len(table)
        assert {w.stem for w in wavs} == set(table.ids())

    def test_evaluate_writes_report(self, trained_dir, prepared_dir, tmp_path, capsys):
        report_path = tmp_path / "report.txt"
        code = run([
            "evaluate", "--checkpoint", str(trained_dir / "checkpoint.pt"),
            "--features", str(prepared_dir / "test.csv"), "--metric", "mfcc",
            "--out", str(report_path),
        ])
        assert code == 0
        text = report_path.read_text()
        assert "pc = " in text and "mae = " in text and "nca = " in text
        assert "pc = " in capsys.readouterr().out

    def test_dimension_mismatch_is_usage_error(self, trained_dir, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)  # the manifest of an --out-less run lands in cwd
        bad = synth_source(3, 4, 5, 0.1, np.random.default_rng(0))
        path = tmp_path / "bad.csv"
        save_feature_table(bad, path)
        code = run([
            "evaluate", "--checkpoint", str(trained_dir / "checkpoint.pt"),
            "--features", str(path),
        ])
        assert code == 2


class TestMakeTestAndGrade:
    def test_roundtrip(self, trained_dir, dataset_dir, tmp_path, capsys):
        pkg_dir = tmp_path / "pkgs"
        code = run([
            "make-test", "--checkpoint", str(trained_dir / "checkpoint.pt"),
            "--features", str(dataset_dir / "features.csv"),
            "--out", str(pkg_dir), "--count", "2", "--seed", "8",
        ])
        assert code == 0
        packages = sorted(pkg_dir.glob("package-*"))
        assert len(packages) == 2

        key = json.loads((packages[0] / "admin" / "key.json").read_text())
        response = {
            "package_id": key["package_id"],
            "answers": key["answer_key"],  # a perfect participant
            "memorability": key["memorability_choice"],
            "participant_id": "p1",
            "started_at": "t0",
            "submitted_at": "t1",
        }
        resp_path = tmp_path / "resp.json"
        resp_path.write_text(json.dumps(response))
        capsys.readouterr()
        code = run([
            "grade", "--keys", str(packages[0]), "--responses", str(resp_path),
            "--out", str(tmp_path / "scores.txt"),
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "mean_hsa=1.0000" in out
        assert "mean_hsm=1.0000" in out


class TestUsageContract:
    def test_unknown_flag_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            run(["train", "--bogus-flag", "1"])
        assert exc.value.code == 2

    def test_missing_input_exits_2(self, tmp_path):
        code = run([
            "evaluate", "--checkpoint", str(tmp_path / "absent.pt"),
            "--features", str(tmp_path / "absent.csv"),
        ])
        assert code == 2

    def test_help_documents_every_flag(self):
        parser = cli.build_parser()
        subparsers = next(
            a for a in parser._actions if isinstance(a, type(parser._subparsers._group_actions[0]))
        )
        for name, sub in subparsers.choices.items():
            help_text = sub.format_help()
            for action in sub._actions:
                assert action.help, f"{name}: {action.dest} has no help text"
                for opt in action.option_strings:
                    if opt.startswith("--"):
                        assert opt in help_text, f"{name}: {opt} missing from --help"
