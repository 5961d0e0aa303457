import csv
import json
import subprocess
import sys

import pytest

from pdcr.cli import CLI_MODES, EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from pdcr.export import read_labels, read_partition
from pdcr.trajectory import StepIndex, write_group_log

from conftest import DATA, make_group


def rows(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# config: ")
    return list(csv.DictReader(lines[1:]))


def run(*argv):
    return main([str(a) for a in argv])


@pytest.mark.parametrize("mode", ["pdcr", "grpo"])
def test_compute_matches_golden(tmp_path, mode):
    assert run("compute", "--input", DATA / "two_groups.jsonl", "--output", tmp_path, "--mode", mode) == 0
    golden = (DATA / f"two_groups_{mode}.golden.csv").read_bytes()
    assert (tmp_path / "advantages.csv").read_bytes() == golden


def test_compute_single_group_golden(tmp_path):
    assert run("compute", "--input", DATA / "alpha.jsonl", "--output", tmp_path) == 0
    assert (tmp_path / "advantages.csv").read_bytes() == (DATA / "alpha_pdcr.golden.csv").read_bytes()


def test_compute_parallel_matches_serial(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("compute", "--input", DATA / "two_groups.jsonl", "--output", a) == 0
    assert run("compute", "--input", DATA / "two_groups.jsonl", "--output", b, "--jobs", 2) == 0
    assert (a / "advantages.csv").read_bytes() == (b / "advantages.csv").read_bytes()


def test_compute_summary_and_tokens(tmp_path):
    assert run("compute", "--input", DATA / "two_groups.jsonl", "--output", tmp_path, "--tokens") == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["groups_processed"] == 2 and summary["steps"] == 6
    # beta: one textual cluster holding two distinct returns -> not degenerate;
    # its visual cluster is empty and alpha's clusters are non-constant
    assert summary["degenerate_clusters"] == 0
    tokens = [json.loads(l) for l in (tmp_path / "tokens.jsonl").read_text().splitlines()]
    alpha0 = next(t for t in tokens if t["group_id"] == "alpha" and t["trajectory"] == 0)
    assert alpha0["token_advantages"] == pytest.approx([1.0, 1.0, 0.7, 0.7, 0.7])


def test_compute_dapo_drops_group(tmp_path):
    assert run("compute", "--input", DATA / "two_groups.jsonl", "--output", tmp_path, "--mode", "dapo") == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["groups_dropped"] == ["beta"] and summary["groups_processed"] == 1
    assert {r["group_id"] for r in rows(tmp_path / "advantages.csv")} == {"alpha"}


def test_malformed_line_seven(tmp_path, capsys):
    lines = (DATA / "two_groups.jsonl").read_text().splitlines()
    lines = (lines * 2)[:6] + ['{"group_id": "x", "steps": ']
    bad = tmp_path / "bad.jsonl"
    bad.write_text("\n".join(lines) + "\n")
    assert run("compute", "--input", bad, "--output", tmp_path / "out") == EXIT_DATA
    err = json.loads(capsys.readouterr().err)
    assert err["line"] == 7
    assert "7" in err["message"]


def test_flag_overrides_config_file(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("mode = grpo\nlambda_outcome = 0.5\n")
    out = tmp_path / "o"
    assert run("compute", "--input", DATA / "alpha.jsonl", "--output", out,
               "--config", conf, "--lambda-outcome", 1.0) == 0
    header = json.loads((out / "advantages.csv").read_text().splitlines()[0][len("# config: "):])
    assert header["mode"] == "grpo" and header["lambda_outcome"] == 1.0
    assert rows(out / "advantages.csv")[0]["total_advantage"] == "1"


def test_explicit_gamma_overrides_log(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("compute", "--input", DATA / "alpha.jsonl", "--output", a, "--mode", "pacr") == 0
    assert run("compute", "--input", DATA / "alpha.jsonl", "--output", b, "--mode", "pacr", "--gamma", 0) == 0
    assert rows(a / "advantages.csv") != rows(b / "advantages.csv")


@pytest.mark.parametrize(
    "argv",
    [
        ["compute", "--input", DATA / "alpha.jsonl"],
        ["compute", "--output", "."],
        ["compute", "--input", DATA / "missing.jsonl", "--output", "."],
        ["compute", "--input", DATA / "alpha.jsonl", "--output", ".", "--gamma", 3],
        ["evaluate", "--input", DATA / "alpha.jsonl", "--output", ".", "--grid", "0.5,x", "--labels", "l"],
        ["evaluate", "--input", DATA / "alpha.jsonl", "--output", ".", "--grid", "1.5", "--labels", "l"],
    ],
)
def test_usage_errors(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert run(*argv) == EXIT_USAGE


def test_unknown_config_key(tmp_path):
    conf = tmp_path / "c.conf"
    conf.write_text("lamda = 1\n")
    assert run("compute", "--input", DATA / "alpha.jsonl", "--output", tmp_path, "--config", conf) == EXIT_USAGE


def test_mode_choices():
    assert CLI_MODES == ("grpo", "dapo", "pacr", "pdcr", "pdcr-random")
    for bad in ("pdcr_random", "ppo", "PDCR"):
        with pytest.raises(SystemExit) as exc:
            run("compute", "--mode", bad)
        assert exc.value.code == 2


def test_pdcr_random_mode(tmp_path):
    assert run("compute", "--input", DATA / "alpha.jsonl", "--output", tmp_path, "--mode", "pdcr-random") == 0


def test_refuses_overwrite(tmp_path):
    args = ("compute", "--input", DATA / "alpha.jsonl", "--output", tmp_path)
    assert run(*args) == EXIT_OK
    before = (tmp_path / "advantages.csv").read_bytes()
    assert run(*args, "--mode", "grpo") == EXIT_USAGE
    assert (tmp_path / "advantages.csv").read_bytes() == before


def test_decompose_round_trip(tmp_path):
    assert run("decompose", "--input", DATA / "two_groups.jsonl", "--output", tmp_path) == 0
    with open(tmp_path / "partition.csv") as fh:
        config, scores, labels = read_partition(fh)
    assert config["decomposition_scope"] == "group"
    assert scores["alpha"] == {StepIndex(0, 1): 3.0, StepIndex(0, 2): 0.0,
                               StepIndex(1, 1): 2.5, StepIndex(1, 2): 0.25}
    assert labels["alpha"][StepIndex(0, 1)] == "visual"
    assert set(labels["beta"].values()) == {"textual"}


def _scope_fixture(path):
    # trajectory 0 all low, trajectory 1 all high
    g = make_group([(-1, [(-1, -1.0, -1.0), (-1, -1.0, -1.2)], True, True),
                    (-1, [(-1, -1.0, -4.0), (-1, -1.0, -4.2)], False, True)], group_id="scoped")
    write_group_log(path, [g])


def test_decompose_scopes_disagree(tmp_path):
    log = tmp_path / "scoped.jsonl"
    _scope_fixture(log)
    labels = {}
    for scope in ("group", "trajectory"):
        out = tmp_path / scope
        assert run("decompose", "--input", log, "--output", out, "--scope", scope) == 0
        labels[scope] = {(r["trajectory"], r["step"]): r["label"] for r in rows(out / "partition.csv")}
    assert labels["group"] == {("0", "1"): "textual", ("0", "2"): "textual",
                               ("1", "1"): "visual", ("1", "2"): "visual"}
    assert labels["trajectory"] == {("0", "1"): "textual", ("0", "2"): "visual",
                                    ("1", "1"): "textual", ("1", "2"): "visual"}


def test_decompose_degenerate_spread(tmp_path):
    log = tmp_path / "flat.jsonl"
    g = make_group([(-1, [(-1, -2.0, -3.0), (-1, -1.0, -2.0)], True, True),
                    (-1, [(-1, -4.0, -5.0)], False, True)], group_id="flat")
    write_group_log(log, [g])
    assert run("decompose", "--input", log, "--output", tmp_path / "o") == 0
    got = rows(tmp_path / "o" / "partition.csv")
    assert {r["label"] for r in got} == {"textual"}
    assert {r["threshold"] for r in got} == {"inf"}
    assert run("compute", "--input", log, "--output", tmp_path / "c") == 0
    summary = json.loads((tmp_path / "c" / "summary.json").read_text())
    assert summary["decomposition_fallbacks"] == 1


def test_simulate_deterministic(tmp_path):
    conf = tmp_path / "spec.conf"
    conf.write_text("n_groups = 5\nsteps_min = 10\nsteps_max = 14\n")
    for name in ("a", "b"):
        assert run("simulate", "--config", conf, "--seed", 3, "--output", tmp_path / name) == 0
    for f in ("log.jsonl", "labels.csv", "report.csv", "summary.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    summary = json.loads((tmp_path / "a" / "summary.json").read_text())
    assert summary["groups"] == 5
    assert summary["compressed_fraction"] >= 0.8
    with open(tmp_path / "a" / "labels.csv") as fh:
        assert len(read_labels(fh)) == 5


def test_simulate_bad_spec(tmp_path):
    conf = tmp_path / "spec.conf"
    conf.write_text("visual_fraction = 2\n")
    assert run("simulate", "--config", conf, "--output", tmp_path / "o") == EXIT_USAGE


def test_simulate_then_pipeline(tmp_path):
    assert run("simulate", "--seed", 1, "--output", tmp_path / "sim") == 0
    log = tmp_path / "sim" / "log.jsonl"
    assert run("compute", "--input", log, "--output", tmp_path / "c") == 0
    assert run("decompose", "--input", log, "--output", tmp_path / "d") == 0
    assert run("evaluate", "--input", tmp_path / "d" / "partition.csv",
               "--labels", tmp_path / "sim" / "labels.csv", "--output", tmp_path / "e") == 0
    sweep = rows(tmp_path / "e" / "sweep.csv")
    assert len(sweep) == 10
    assert [r["method"] for r in sweep] == ["otsu"] + ["topk"] * 9
    assert sweep[0]["parameter"] == "nan"
    otsu = float(sweep[0]["accuracy"])
    assert otsu >= max(float(r["accuracy"]) for r in sweep[1:])


def test_evaluate_missing_labels(tmp_path):
    assert run("decompose", "--input", DATA / "alpha.jsonl", "--output", tmp_path / "d") == 0
    lab = tmp_path / "labels.csv"
    lab.write_text("# config: {}\ngroup_id,trajectory,step,label\nother,0,1,visual\n")
    code = run("evaluate", "--input", tmp_path / "d" / "partition.csv", "--labels", lab,
               "--output", tmp_path / "e")
    assert code == EXIT_DATA


def test_train_toy(tmp_path):
    conf = tmp_path / "toy.conf"
    conf.write_text("episodes = 15\nlearning_rate = 0.0\n")
    assert run("train-toy", "--config", conf, "--mode", "grpo", "--output", tmp_path / "t",
               "--compare-seeds", 2) == 0
    curve = rows(tmp_path / "t" / "curve.csv")
    assert len(curve) == 15 and len({r["success"] for r in curve}) == 1
    comparison = rows(tmp_path / "t" / "comparison.csv")
    assert len(comparison) == 8
    summary = json.loads((tmp_path / "t" / "summary.json").read_text())
    assert summary["mode"] == "grpo"


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "pdcr", "compute", "--input", str(DATA / "alpha.jsonl"),
         "--output", str(tmp_path)], capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
