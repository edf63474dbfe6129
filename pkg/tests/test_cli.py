import io
import json
import math
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from oracles import dense_recount, argmax_lowest, saode_linear
from saode.cli import main
from saode.ingest import read_stream
from saode.report import read_rows

GOLDEN = Path(__file__).parent / "golden"
FIXTURE = GOLDEN / "fixture.tsv"


def oracle_overall(path):
    """Test-then-train over the fixture using the dense oracle and direct metric formulas."""
    with open(path) as fh:
        header, it = read_stream(fh)
        xs = list(it)
    labels = header.labels
    classes, ys = [], []
    for x in xs:
        if x.labels not in classes:
            classes.append(x.labels)
        ys.append(classes.index(x.labels))
    cards = (2,) * header.n
    exact = ham = jac = f1 = se = 0.0
    for d, x in enumerate(xs):
        if d == 0:
            pred, lam = frozenset(), {}
        else:
            seen = max(ys[:d]) + 1
            table = dense_recount(xs[:d], ys[:d], cards, header.n_seasons, seen, binary=True)
            vals = [x.values.get(i, 0) for i in range(header.n)]
            scores, _ = saode_linear(table, vals, x.season, 1, 1.0)
            total = sum(scores)
            pred = classes[argmax_lowest(scores)]
            lam = {l: sum(s for s, c in zip(scores, classes) if l in c) / total for l in labels}
            exact += pred == x.labels
        truth = x.labels
        ham += len(pred ^ truth) / len(labels)
        union = pred | truth
        jac += len(pred & truth) / len(union)
        f1 += 2 * len(pred & truth) / (len(pred) + len(truth))
        se += sum((lam.get(l, 0.0) - (l in truth)) ** 2 for l in labels)
    n = len(xs)
    return {"AP": 100 * exact / n, "HL": ham / n, "MLA": jac / n, "MLFS": f1 / n,
            "RMSE": math.sqrt(se / (n * len(labels)))}


def test_golden_run_matches_oracle(tmp_path, capsys):
    out = tmp_path / "report"
    assert main(["run", "--model", "saode", "--input", str(FIXTURE), "--out", str(out), "--window", "25"]) == 0
    assert "saode: N=80" in capsys.readouterr().out
    row = read_rows(out / "overall.csv")[0]
    expected = oracle_overall(FIXTURE)
    for name, value in expected.items():
        assert float(row[name]) == pytest.approx(value, abs=1e-9)
    for name in ("overall.csv", "windows.csv", "seasons.csv", "season_labels.csv"):
        assert (out / name).read_bytes() == (GOLDEN / "report" / name).read_bytes(), name
    settings = json.loads((out / "run.json").read_text())
    assert settings["model_name"] == "saode" and settings["labels"] == ["l0", "l1"]


def test_unknown_flag_exits_2_without_outputs(tmp_path):
    out = tmp_path / "report"
    with pytest.raises(SystemExit) as exc:
        main(["run", "--input", str(FIXTURE), "--out", str(out), "--bogus"])
    assert exc.value.code == 2
    assert not out.exists()
    with pytest.raises(SystemExit) as exc:
        main(["run", "--input", str(FIXTURE), "--out", str(out), "--season-feature", "--per-season"])
    assert exc.value.code == 2


def test_io_and_input_errors_exit_1(tmp_path, capsys):
    assert main(["run", "--input", str(tmp_path / "missing.tsv"), "--out", str(tmp_path / "r")]) == 1
    bad = tmp_path / "bad.tsv"
    bad.write_text("0\ta\t1\n")
    assert main(["run", "--input", str(bad), "--out", str(tmp_path / "r")]) == 1
    assert "--n-attributes" in capsys.readouterr().err
    assert main(["run", "--input", str(FIXTURE), "--out", str(tmp_path / "r"), "--model", "saode",
                 "--season-feature"]) == 1
    assert main(["inspect-model", str(FIXTURE)]) == 1


def test_headerless_stream(tmp_path):
    plain = tmp_path / "plain.tsv"
    plain.write_text("".join(FIXTURE.read_text().splitlines(True)[1:]))
    out = tmp_path / "r"
    assert main(["run", "--input", str(plain), "--out", str(out), "--n-attributes", "4",
                 "--season", "column", "--season-card", "3", "--window", "25"]) == 0
    # the label universe now comes from the stream itself, which holds the same labels
    assert (out / "overall.csv").read_bytes() == (GOLDEN / "report" / "overall.csv").read_bytes()


def write_spec(path, seed=3):
    path.write_text(f"n_attributes = 6\nn_classes = 3\nn_seasons = 4\nn_instances = 300\nseed = {seed}\n")


def test_generate_is_deterministic(tmp_path):
    spec = tmp_path / "g.toml"
    write_spec(spec)
    a, b, c = tmp_path / "a.tsv", tmp_path / "b.tsv", tmp_path / "c.tsv"
    assert main(["generate", "--spec", str(spec), "--out", str(a)]) == 0
    assert main(["generate", "--spec", str(spec), "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert main(["generate", "--spec", str(spec), "--out", str(c), "--seed", "4", "--n-instances", "50"]) == 0
    assert c.read_bytes() != a.read_bytes()
    assert len(c.read_text().splitlines()) == 51


def test_config_precedence(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('model = "nb"\nwindow = 10\n')
    out = tmp_path / "r"
    assert main(["run", "--input", str(FIXTURE), "--out", str(out), "--config", str(cfg)]) == 0
    settings = json.loads((out / "run.json").read_text())
    assert settings["model"] == "nb" and settings["window"] == 10 and settings["m"] == 1
    assert len(read_rows(out / "windows.csv")) == 8
    assert main(["run", "--input", str(FIXTURE), "--out", str(out), "--config", str(cfg), "--model", "aode"]) == 0
    assert json.loads((out / "run.json").read_text())["model"] == "aode"
    cfg.write_text("colour = 1\n")
    assert main(["run", "--input", str(FIXTURE), "--out", str(tmp_path / "x"), "--config", str(cfg)]) == 1


def test_compare_and_svg(tmp_path, capsys):
    dirs = []
    for model, extra in (("saode", []), ("aode", ["--season-feature"]), ("nb", [])):
        out = tmp_path / model
        assert main(["run", "--input", str(FIXTURE), "--out", str(out), "--model", model, "--svg", *extra]) == 0
        assert (out / "season_mla.svg").read_text().startswith("<svg")
        dirs.append(str(out))
    capsys.readouterr()
    table = tmp_path / "cmp.csv"
    svg = tmp_path / "cmp.svg"
    assert main(["compare", *dirs, "--out", str(table), "--svg", str(svg)]) == 0
    text = capsys.readouterr().out
    assert "aode+season" in text and "*" in text
    rows = read_rows(table)
    assert [r["model"] for r in rows] == ["saode", "aode+season", "nb"]
    assert any("MLA" in r["best"].split(";") for r in rows)
    assert svg.read_text().count("<polyline") == 3


def test_save_and_inspect_model(tmp_path, capsys):
    model_file = tmp_path / "m.sode"
    assert main(["run", "--input", str(FIXTURE), "--out", str(tmp_path / "r"), "--save-model", str(model_file)]) == 0
    capsys.readouterr()
    assert main(["inspect-model", str(model_file)]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["n_attributes"] == 4 and info["n_seasons"] == 3
    assert info["stores"][0]["count"] == 80
    assert sum(info["stores"][0]["class_counts"]) == 80


def test_vocab_and_preprocess(tmp_path):
    docs = tmp_path / "docs.jsonl"
    rows = [
        {"text": "Markets fell as bank shares slid", "date": "2024-01-08", "labels": ["business"]},
        {"text": "The bank museum opened a new gallery", "date": "2024-01-13", "labels": ["arts", "business"]},
        {"text": "Gallery review", "date": "2024-01-14", "labels": ["arts"]},
        {"text": "Undated bank story", "labels": ["business"]},
    ]
    docs.write_text("".join(json.dumps(r) + "\n" for r in rows))
    vocab = tmp_path / "vocab.tsv"
    assert main(["vocab", "--input", str(docs), "--out", str(vocab), "--vocab-size", "4"]) == 0
    assert vocab.read_text().splitlines()[:2] == ["bank\t3", "gallery\t2"]
    stream = tmp_path / "s.tsv"
    assert main(["preprocess", "--input", str(docs), "--out", str(stream), "--vocab", str(vocab)]) == 0
    assert stream.read_bytes() == (GOLDEN / "stream.tsv").read_bytes()
    again = tmp_path / "s2.tsv"
    assert main(["preprocess", "--input", str(docs), "--out", str(again), "--vocab-size", "4"]) == 0
    assert again.read_bytes() == stream.read_bytes()
    prefix = tmp_path / "s3.tsv"
    assert main(["preprocess", "--input", str(docs), "--out", str(prefix), "--vocab-prefix", "1"]) == 0
    assert prefix.read_text().startswith("#sode-stream\tn=5\t")


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "saode", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("saode ")
