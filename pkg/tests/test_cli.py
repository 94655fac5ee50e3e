import csv
import json

import pytest

from fuzzyfusion.cli import build_parser, main

SUBCOMMANDS = ["ingest", "train", "certify", "predict", "explain", "evaluate", "train-logistic", "simulate", "prompt-grid"]


@pytest.fixture(scope="module")
def sim(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert main(["--seed", "3", "simulate", "--out", str(out)]) == 0
    assert main(["train", "--scores", str(out / "dev.csv"), "--registry", str(out / "registry.json"),
                 "--out", str(out / "tree.json")]) == 0
    return out


def test_simulate_layout(sim):
    names = {p.relative_to(sim).as_posix() for p in sim.rglob("*") if p.is_file()}
    assert {"registry.json", "profiles.json", "specs.json", "dev.csv"} <= names
    assert sum(n.startswith("bench_") for n in names) == 6
    assert sum(n.startswith("perturbed/") for n in names) == 9


def test_train_summary_and_depth(sim, tmp_path, capsys):
    assert main(["train", "--scores", str(sim / "dev.csv"), "--out", str(tmp_path / "t.json")]) == 0
    summary = capsys.readouterr().out
    assert "depth=" in summary and "train_accuracy=" in summary
    depth = int(summary.split("depth=")[1].split()[0])
    assert depth <= 4


def test_certify_after_train(sim, tmp_path, capsys):
    report = tmp_path / "cands.csv"
    code = main(["certify", "--tree", str(sim / "tree.json"), "--scores", str(sim / "dev.csv"), "--report", str(report)])
    assert code == 0
    assert capsys.readouterr().out.startswith("PASS")
    assert len(report.read_text().splitlines()) == 1641


def test_certify_failure_exit_code(sim, tmp_path):
    doc = json.loads((sim / "tree.json").read_text())
    doc["root"]["threshold"] = 0.5 if doc["root"]["threshold"] != 0.5 else 0.6
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert main(["certify", "--tree", str(bad), "--scores", str(sim / "dev.csv")]) == 3


def test_predict_explain(sim, tmp_path):
    out = tmp_path / "p.csv"
    bench = next(sim.glob("bench_*.csv"))
    assert main(["predict", "--tree", str(sim / "tree.json"), "--scores", str(bench), "--out", str(out), "--explain"]) == 0
    rows = list(csv.DictReader(out.open()))
    assert list(rows[0]) == ["sample_id", "label", "predicted", "path"]
    assert all(r["predicted"] in ("real", "fake") for r in rows)
    assert all(1 <= len(r["path"].split("|")) <= 4 for r in rows)
    plain = tmp_path / "q.csv"
    main(["predict", "--tree", str(sim / "tree.json"), "--scores", str(bench), "--out", str(plain)])
    assert all(r["path"] == "" for r in csv.DictReader(plain.open()))


def test_explain(sim, capsys):
    assert main(["explain", "--tree", str(sim / "tree.json")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines and all(line.startswith("R") and "THEN x is" in line for line in lines)


def test_evaluate(sim, tmp_path, capsys):
    benches = ",".join(str(p) for p in sorted(sim.glob("bench_*.csv")))
    perturbed = ",".join(str(p) for p in sorted((sim / "perturbed").glob("*.csv")))
    model = tmp_path / "lr.json"
    assert main(["train-logistic", "--scores", str(sim / "dev.csv"), "--iterations", "50", "--out", str(model)]) == 0
    out = tmp_path / "r.json"
    code = main(["evaluate", "--tree", str(sim / "tree.json"), "--scores", benches, "--perturbed", perturbed,
                 "--baselines", "--logistic", str(model), "--out", str(out)])
    assert code == 0
    reports = json.loads(out.read_text())["reports"]
    assert reports[0]["predictor"] == "fuzzy-tree"
    assert len(reports[0]["per_benchmark"]) == 6
    assert reports[0]["robustness"] is not None
    assert len(reports) == 1 + 1 + 1 + 6
    assert "Robustness" in capsys.readouterr().out


def test_ingest_balanced(sim, tmp_path, capsys):
    out = tmp_path / "d.jsonl"
    assert main(["ingest", "--scores", str(sim / "dev.csv"), "--balanced", "10", "--out", str(out),
                 "--out-format", "jsonl"]) == 0
    assert "samples=500 detectors=6 real=250 fake=250" in capsys.readouterr().out
    assert len(out.read_text().splitlines()) == 500


def test_prompt_grid(tmp_path, capsys):
    from fuzzyfusion.report import export_heatmap
    from fuzzyfusion.simulator import synthetic_prompt_grid

    src = tmp_path / "acc.csv"
    src.write_text(export_heatmap(synthetic_prompt_grid(1, planted=(6, 7, 4))))
    out = tmp_path / "heat.csv"
    assert main(["prompt-grid", "--accuracies", str(src), "--out", str(out)]) == 0
    assert "system=6 question=7 output=4" in capsys.readouterr().out
    assert out.read_text() == src.read_text()


def test_idempotent_outputs(sim, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["simulate", "--seed", "3", "--out", str(d)]) == 0
        assert main(["train", "--scores", str(d / "dev.csv"), "--out", str(d / "tree.json")]) == 0
        assert main(["evaluate", "--tree", str(d / "tree.json"), "--scores", str(d / "dev.csv"),
                     "--out", str(d / "r.json")]) == 0
    for p in a.rglob("*"):
        if p.is_file():
            assert p.read_bytes() == (b / p.relative_to(a)).read_bytes(), p.name
    assert (sim / "dev.csv").read_bytes() == (a / "dev.csv").read_bytes()


def test_data_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("sample_id,benchmark,subset,label,detA\nimg1,B1,S1,1,1.20\n")
    assert main(["train", "--scores", str(bad), "--out", str(tmp_path / "t.json")]) == 2
    err = capsys.readouterr().err.strip()
    assert err.count("\n") == 0 and "score out of range at row 1" in err
    assert not (tmp_path / "t.json").exists()
    assert main(["explain", "--tree", str(tmp_path / "missing.json")]) == 2


def test_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["train"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code == 1


@pytest.mark.parametrize("name", SUBCOMMANDS)
def test_help_documents_defaults(name, capsys):
    with pytest.raises(SystemExit) as exc:
        main([name, "--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    if name == "train":
        for flag, default in [("--max-split-models", "3"), ("--min-samples", "0"), ("--max-depth", "4"),
                              ("--thr-grid-size", "10"), ("--split-labeling", "majority")]:
            assert flag in text
            assert f"(default: {default})" in text
    assert "--seed" in text and "(default:" in text


def test_parser_defaults_match_hyperparams():
    args = build_parser().parse_args(["train", "--scores", "x", "--out", "y"])
    assert (args.max_split_models, args.min_samples, args.max_depth, args.thr_grid_size) == (3, 0, 4, 10)
    assert args.seed == 0
