import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from xfmnet import io
from xfmnet.cli import main
from xfmnet.data import WindowDataset
from xfmnet.diagnostics import periodogram
from xfmnet.numerics import save_checkpoint
from xfmnet.synthetic import SynthConfig, synthetic_generate
from xfmnet.training import load_model, normalizer_from_meta

TOY = {
    "lookback": 32,
    "horizon": 8,
    "levels": 1,
    "window": 5,
    "kernels": 4,
    "d": 8,
    "image_features": 4,
    "encoder_hidden": 4,
    "d_ff": 8,
    "batch_size": 8,
    "epochs": 2,
    "train_stride": 16,
}
SYNTH = ["--n-stations", "2", "--length", "300", "--height", "4", "--width", "4"]


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def error_of(err):
    lines = err.strip().splitlines()
    assert len(lines) == 1, err
    return json.loads(lines[0])


def tree_digest(root: Path) -> dict[str, str]:
    return {
        str(p.relative_to(root)): hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(root.rglob("*")) if p.is_file()
    }


@pytest.fixture
def workdir(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "toy.json").write_text(json.dumps(TOY))
    code, _, err = run(capsys, "synth", "--output-dir", "data", "--seed", 3, *SYNTH)
    assert code == 0, err
    return tmp_path


def train_args(out="run", *extra):
    return ["train", "--config", "toy.json", "--series-csv", "data/series.csv", "--image-blob", "data/images.bin",
            "--output-dir", out, *extra]


# -- synth ----------------------------------------------------------------------------


def test_synth_round_trip_is_bitwise(workdir):
    data = synthetic_generate(3, SynthConfig(n_stations=2, length=300, height=4, width=4))
    stamps, series = io.read_series_csv(workdir / "data/series.csv")
    frames = io.read_image_blob(workdir / "data/images.bin")
    assert series.tobytes() == data.series.tobytes()
    assert frames.tobytes() == data.frames.tobytes()
    assert (stamps == data.timestamps).all()
    assert (workdir / "data/series.csv").read_text().splitlines()[0] == "timestamp,station_1,station_2"
    manifest = json.loads((workdir / "data/images.json").read_text())
    assert manifest == {"T": 300, "C": 1, "H": 4, "W": 4, "dtype": "float32", "byteorder": "little"}


def test_synth_default_shape(tmp_path, capsys):
    code, _, _ = run(capsys, "synth", "--output-dir", tmp_path / "bj")
    assert code == 0
    _, series = io.read_series_csv(tmp_path / "bj/series.csv")
    assert series.shape == (8766, 6)


def test_synth_refuses_to_overwrite(workdir, capsys):
    code, _, err = run(capsys, "synth", "--output-dir", "data", *SYNTH)
    assert code == 2
    e = error_of(err)
    assert e["error"] == "ConfigError" and "--force" in e["message"]
    assert run(capsys, "synth", "--output-dir", "data", "--force", "--seed", 3, *SYNTH)[0] == 0


def test_env_var_sets_default_output_dir(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("XFMNET_OUTPUT_DIR", str(tmp_path / "from_env"))
    assert run(capsys, "synth", *SYNTH)[0] == 0
    assert (tmp_path / "from_env/series.csv").exists()
    echo = json.loads((tmp_path / "from_env/config.json").read_text())
    assert echo["output_dir"] == str(tmp_path / "from_env")


# -- reproducibility ----------------------------------------------------------------------


def test_rerun_of_every_subcommand_is_bitwise_identical(workdir, capsys):
    commands = [
        ["synth", "--output-dir", "data", "--seed", 3, *SYNTH],
        train_args("run", "--seed", 7),
        ["eval", "--checkpoint", "run/checkpoint", "--series-csv", "data/series.csv", "--image-blob", "data/images.bin",
         "--output-dir", "ev"],
        ["diagnose", "--series-csv", "data/series.csv", "--output-dir", "dg", "--svg", "true"],
        ["probe", "--checkpoint", "run/checkpoint", "--series-csv", "data/series.csv", "--image-blob", "data/images.bin",
         "--output-dir", "pr"],
    ]
    for argv in commands:
        first = run(capsys, *argv, "--force")
        assert first[0] == 0, first[2]
        out_dir = workdir / argv[argv.index("--output-dir") + 1]
        before = tree_digest(out_dir)
        assert run(capsys, *argv, "--force")[0] == 0
        assert tree_digest(out_dir) == before, argv[0]


def test_train_twice_gives_identical_metrics(workdir, capsys):
    assert run(capsys, *train_args("a", "--seed", 7))[0] == 0
    assert run(capsys, *train_args("b", "--seed", 7))[0] == 0
    assert (workdir / "a/metrics.csv").read_bytes() == (workdir / "b/metrics.csv").read_bytes()
    assert (workdir / "a/checkpoint/tensors.bin").read_bytes() == (workdir / "b/checkpoint/tensors.bin").read_bytes()


def test_echoed_config_reproduces_run(workdir, capsys):
    assert run(capsys, *train_args("a", "--seed", 5, "--epochs", 3))[0] == 0
    echo = json.loads((workdir / "a/config.json").read_text())
    assert echo["seed"] == 5 and echo["epochs"] == 3 and echo["d"] == 8 and echo["rounds"] == 2
    first = tree_digest(workdir / "a")
    assert run(capsys, "train", "--config", "a/config.json", "--force")[0] == 0
    assert tree_digest(workdir / "a") == first


def test_flags_override_json(workdir, capsys):
    assert run(capsys, *train_args("a", "--epochs", 1))[0] == 0
    assert json.loads((workdir / "a/config.json").read_text())["epochs"] == 1
    assert (workdir / "a/metrics.csv").read_text().count("\n") == 3


# -- eval and probe --------------------------------------------------------------------------


def test_eval_of_zeroed_checkpoint_is_mean_square(workdir, capsys):
    assert run(capsys, *train_args("run"))[0] == 0
    model, meta = load_model(workdir / "run/checkpoint")
    model.zero_()
    save_checkpoint(workdir / "zero", model.state_dict(), meta)
    code, _, err = run(capsys, "eval", "--checkpoint", "zero", "--series-csv", "data/series.csv", "--image-blob",
                       "data/images.bin", "--output-dir", "ev")
    assert code == 0, err
    row = (workdir / "ev/eval.csv").read_text().splitlines()[1].split(",")
    assert row[:2] == ["test", "model"]
    data = synthetic_generate(3, SynthConfig(n_stations=2, length=300, height=4, width=4))
    ds = WindowDataset(data.series, data.frames, data.marks, 32, 8, normalizer_from_meta(meta))
    y = ds.batch(ds.starts("test"))[3]
    assert float(row[2]) == np.mean(np.ascontiguousarray(y, dtype=np.float64) ** 2)


def test_probe_writes_every_stage_and_level(workdir, capsys):
    assert run(capsys, *train_args("run"))[0] == 0
    code, out, _ = run(capsys, "probe", "--checkpoint", "run/checkpoint", "--series-csv", "data/series.csv",
                       "--image-blob", "data/images.bin", "--output-dir", "pr", "--sample", 2)
    assert code == 0
    names = {Path(p).name for p in out.split()}
    for level in (0, 1):
        for label in ("A_cross", "S_f", "Z_hat"):
            assert f"stage_corr_{label}_l{level}.csv" in names and f"stage_act_{label}_l{level}.csv" in names
    rows = (workdir / "pr/stage_corr_Z_hat_l1.csv").read_text().splitlines()
    assert len(rows) == 1 + 8 * 8


def test_eval_without_checkpoint_fails(workdir, capsys):
    code, _, err = run(capsys, "eval", "--checkpoint", "missing", "--series-csv", "data/series.csv",
                       "--image-blob", "data/images.bin", "--output-dir", "ev")
    assert code == 2 and "manifest.json" in error_of(err)["message"]
    assert not (workdir / "ev").exists()


# -- diagnose --------------------------------------------------------------------------------


def test_diagnose_zero_noise_tone(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    cfg = {"n_stations": 1, "length": 2400, "noise_std": 0.0, "rain_rate": 0.0, "drift_per_year": 0.0,
           "midterm_amplitude": [0.0, 0.0]}
    (tmp_path / "tone.json").write_text(json.dumps(cfg))
    assert run(capsys, "synth", "--config", "tone.json", "--output-dir", "tone")[0] == 0
    assert run(capsys, "diagnose", "--series-csv", "tone/series.csv", "--output-dir", "dg")[0] == 0
    rows = [line.split(",") for line in (tmp_path / "dg/periodogram.csv").read_text().splitlines()[1:]]
    power = {float(r[1]): float(r[2]) for r in rows if r[2] != "nan"}
    assert max(power, key=power.get) == 1
    _, series = io.read_series_csv(tmp_path / "tone/series.csv")
    assert periodogram(series[:, 0]).period_days[np.nanargmax(periodogram(series[:, 0]).power)] == 1


# -- input validation -------------------------------------------------------------------------


@pytest.mark.parametrize(
    "mutate, fragment",
    [
        (lambda lines: lines.__setitem__(5, lines[5] + ",9.0"), "line 6"),
        (lambda lines: lines.__setitem__(9, lines[9].rsplit(",", 1)[0] + ",abc"), "line 10"),
        (lambda lines: lines.__setitem__(3, "not-a-time" + lines[3][16:]), "line 4"),
        (lambda lines: lines.__setitem__(0, "time,station_1,station_2"), "line 1"),
    ],
)
def test_malformed_csv_names_the_line(workdir, capsys, mutate, fragment):
    lines = (workdir / "data/series.csv").read_text().splitlines()
    mutate(lines)
    (workdir / "bad.csv").write_text("\n".join(lines) + "\n")
    code, _, err = run(capsys, *train_args("run")[:4], "bad.csv", "--image-blob", "data/images.bin",
                       "--output-dir", "run")
    e = error_of(err)
    assert code == 2 and e["error"] == "FormatError" and fragment in e["message"]


def test_length_mismatch_between_series_and_images(workdir, capsys):
    lines = (workdir / "data/series.csv").read_text().splitlines()
    (workdir / "short.csv").write_text("\n".join(lines[:-5]) + "\n")
    code, _, err = run(capsys, "train", "--config", "toy.json", "--series-csv", "short.csv", "--image-blob",
                       "data/images.bin", "--output-dir", "run")
    assert code == 2 and "length mismatch" in error_of(err)["message"]


def test_truncated_blob(workdir, capsys):
    raw = (workdir / "data/images.bin").read_bytes()
    (workdir / "data/images.bin").write_bytes(raw[:-4])
    code, _, err = run(capsys, *train_args("run"))
    assert code == 2 and "do not match manifest" in error_of(err)["message"]


@pytest.mark.parametrize(
    "argv, kind",
    [
        (["train", "--config", "extra.json"], "ConfigError"),
        (["train", "--epochs", "x"], "UsageError"),
        (["frobnicate"], "UsageError"),
        (["train", "--config", "missing.json"], "ConfigError"),
        (["train", "--config", "toy.json", "--window", "40", "--series-csv", "data/series.csv",
          "--image-blob", "data/images.bin"], "ConfigError"),
    ],
)
def test_configuration_errors_are_single_json_lines(workdir, capsys, argv, kind):
    (workdir / "extra.json").write_text(json.dumps({**TOY, "learning_rate": 0.1}))
    code, out, err = run(capsys, *argv)
    assert code == 2 and out == ""
    assert error_of(err)["error"] == kind
