"""Command line plumbing: every subcommand end to end in a temp dir."""

import json
import socket
import subprocess
import sys

import pytest

from baisim import decoder, eegsim
from baisim.cli import main

CORPUS = """\
How was your weekend?
It was lovely, thank you.
What did you do?
I will go hiking on Saturday.

Who is coming along?
My sister Anna is coming along.
"""

RATINGS = """\
model_tag,rating,mistake
alpha,5,NoMistake
alpha,3,MissedDetails
beta,4,NoMistake
beta,2,AddedDetails
"""


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


# -- codes


def test_codes_prints_codebook(capsys):
    assert main(["codes"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("degree=5")
    assert out.count("\n") >= 13  # 3 header lines + 10 code rows


def test_codes_writes_file(tmp_path, capsys):
    out_path = tmp_path / "codes.txt"
    assert main(["codes", "--out", str(out_path)]) == 0
    main(["codes"])
    assert out_path.read_text(encoding="utf-8") == capsys.readouterr().out


# -- simulate


def test_simulate_writes_container(tmp_path, capsys):
    out_path = tmp_path / "trial.eeg"
    rc = main(["simulate", "--attended", "3", "--sigma", "0.5",
               "--seed", "7", "--out", str(out_path)])
    assert rc == 0
    segment = eegsim.load_segment(str(out_path))
    assert segment.samples.shape == (6, 11100)
    assert "snr" in capsys.readouterr().out


def test_simulate_noiseless_label(tmp_path, capsys):
    rc = main(["simulate", "--attended", "0", "--sigma", "0",
               "--out", str(tmp_path / "t.eeg")])
    assert rc == 0
    assert "noiseless" in capsys.readouterr().out


def test_simulate_bad_stimulus_exits_2(tmp_path, capsys):
    rc = main(["simulate", "--attended", "10", "--out", str(tmp_path / "t.eeg")])
    assert rc == 2
    assert capsys.readouterr().err.strip()


# -- train and decode


def test_train_decode_round_trip(tmp_path, capsys):
    model_path = tmp_path / "clf.bin"
    rc = main(["train", "--kind", "linear", "--epochs", "2",
               "--train-frames", "217", "--out", str(model_path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "training_frames=" in out
    assert f"saved {model_path}" in out
    from baisim import classifier
    assert classifier.load_model(str(model_path)).parameters.size == 1501

    eeg_path = tmp_path / "trial.eeg"
    main(["simulate", "--attended", "2", "--sigma", "0.1",
          "--seed", "3", "--out", str(eeg_path)])
    capsys.readouterr()

    log_path = tmp_path / "trial.log"
    rc = main(["decode", "--model", str(model_path), "--eeg", str(eeg_path),
               "--log", str(log_path)])
    assert rc == 0
    line = capsys.readouterr().out.strip().splitlines()[-1]
    kind, stim, frames, ms = line.split()
    assert kind in ("Selected", "Timeout")
    assert stim.startswith("stimulus=")
    n_frames = int(frames.split("=")[1])
    assert ms == f"selection_time_ms={n_frames * 50 + 200}"

    records = [decoder.parse_trial_log_line(l)
               for l in log_path.read_text(encoding="utf-8").splitlines()]
    assert len(records) == n_frames
    assert records[-1].decided


def test_decode_missing_model_exits_2(tmp_path, capsys):
    eeg_path = tmp_path / "trial.eeg"
    main(["simulate", "--attended", "0", "--out", str(eeg_path)])
    rc = main(["decode", "--model", str(tmp_path / "nope.bin"),
               "--eeg", str(eeg_path)])
    assert rc == 2
    assert capsys.readouterr().err.strip()


# -- dataset


def test_dataset_builds_jsonl(tmp_path, capsys):
    corpus_path = write(tmp_path / "corpus.txt", CORPUS)
    out_path = tmp_path / "data.jsonl"
    rc = main(["dataset", "--corpus", corpus_path, "--variant", "xl",
               "--seed", "123", "--out", str(out_path)])
    assert rc == 0
    assert "wrote 3 samples" in capsys.readouterr().out
    lines = out_path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 3
    for line in lines:
        rec = json.loads(line)
        assert set(rec) == {"prompt", "completion"}
        assert rec["completion"].endswith("END")


def test_dataset_with_overrides(tmp_path):
    corpus_path = write(tmp_path / "corpus.txt", CORPUS)
    overrides_path = write(
        tmp_path / "review.jsonl",
        json.dumps({"id": "0:0", "keywords": ["lovely weekend"]}) + "\n",
    )
    out_path = tmp_path / "data.jsonl"
    rc = main(["dataset", "--corpus", corpus_path, "--seed", "123",
               "--overrides", overrides_path, "--out", str(out_path)])
    assert rc == 0
    first = json.loads(out_path.read_text(encoding="utf-8").splitlines()[0])
    assert "Keyword: lovely weekend\n" in first["prompt"]


def test_dataset_malformed_corpus_exits_2(tmp_path, capsys):
    corpus_path = write(tmp_path / "bad.txt", "A question with no answer?\n")
    rc = main(["dataset", "--corpus", corpus_path, "--out", str(tmp_path / "d.jsonl")])
    assert rc == 2
    assert capsys.readouterr().err.strip()


def test_dataset_missing_corpus_exits_2(tmp_path):
    rc = main(["dataset", "--corpus", str(tmp_path / "nope.txt"),
               "--out", str(tmp_path / "d.jsonl")])
    assert rc == 2


# -- eval


def test_eval_summaries_and_anova(tmp_path, capsys):
    ratings_path = write(tmp_path / "ratings.csv", RATINGS)
    assert main(["eval", "--ratings", ratings_path]) == 0
    out = capsys.readouterr().out
    assert "alpha: n=2" in out
    assert "beta: n=2" in out
    assert "anova_f=" in out
    assert "anova_p=" in out


def test_eval_single_group_skips_anova(tmp_path, capsys):
    ratings_path = write(tmp_path / "ratings.csv",
                         "alpha,5,NoMistake\nalpha,4,NoMistake\n")
    assert main(["eval", "--ratings", ratings_path]) == 0
    out = capsys.readouterr().out
    assert "alpha: n=2" in out
    assert "anova_f" not in out


def test_eval_malformed_ratings_exits_2(tmp_path, capsys):
    ratings_path = write(tmp_path / "ratings.csv", "alpha,11,NoMistake\n")
    assert main(["eval", "--ratings", ratings_path]) == 2
    assert capsys.readouterr().err.strip()


# -- serve


def test_serve_bind_failure_exits_2(capsys):
    with socket.socket() as blocker:
        blocker.bind(("127.0.0.1", 0))
        blocker.listen(1)
        port = blocker.getsockname()[1]
        rc = main(["serve", "--mode", "tcp", "--port", str(port)])
    assert rc == 2
    assert "cannot bind" in capsys.readouterr().err


# -- argument handling


def test_unknown_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_console_script_runs():
    proc = subprocess.run([sys.executable, "-m", "baisim.cli", "codes"],
                          capture_output=True, text=True, timeout=60)
    assert proc.returncode == 0
    assert proc.stdout.startswith("degree=5")
