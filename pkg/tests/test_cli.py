"""CLI subcommands, exercised through main() in process."""

from __future__ import annotations

import json

import numpy as np
import pytest

from indeltree.cli import main
from indeltree.evolution import ModelParams, evolve_tree
from indeltree.formats import DAGGER, bits_to_str, load_tree_json


def run(*argv: str) -> int:
    return main(list(argv))


def test_simulate_stdout_prints_one_leaf_per_line(capsys):
    assert run("simulate", "--d", "3", "--H", "1", "--k", "16", "--seed", "5") == 0
    lines = capsys.readouterr().out.splitlines()
    tree = evolve_tree(ModelParams(arity=3, height=1, seq_len=16), 5)
    assert lines == [bits_to_str(leaf.bits) for leaf in tree.leaves()]


def test_simulate_writes_the_four_files(tmp_path, capsys):
    out = tmp_path / "sim"
    code = run(
        "simulate",
        "--d", "3", "--H", "2", "--k", "16",
        "--pd", "0.05", "--pi", "0.05",
        "--seed", "5",
        "--out", str(out),
    )
    assert code == 0
    for name in ("nodes.tsv", "maps.tsv", "leaves.txt", "tree.json"):
        assert (out / name).exists()

    tree = evolve_tree(ModelParams(arity=3, height=2, seq_len=16, p_del=0.05, p_ins=0.05), 5)

    nodes = [line.split("\t") for line in (out / "nodes.tsv").read_text().splitlines()]
    assert len(nodes) == 13
    assert nodes[0][:2] == ["0", "0"]
    assert nodes[0][2] == bits_to_str(tree.root.bits)
    assert [r[1] for r in nodes] == ["0"] + ["1"] * 3 + ["2"] * 9

    leaves = (out / "leaves.txt").read_text().splitlines()
    assert leaves == [bits_to_str(leaf.bits) for leaf in tree.leaves()]

    # maps.tsv: 1-based child positions, dagger for deletions
    rows = [line.split("\t") for line in (out / "maps.tsv").read_text().splitlines()]
    assert {r[0] for r in rows} == {str(i) for i in range(1, 13)}
    child1 = [r for r in rows if r[0] == "1"]
    m = tree.edge_map(1, 0)
    assert len(child1) == m.parent_len
    for p, row in enumerate(child1):
        c = int(m.to_child[p])
        assert row[1] == str(p + 1)
        assert row[2] == (DAGGER if c < 0 else str(c + 1))

    rebuilt = load_tree_json(out / "tree.json")
    for a, b in zip(rebuilt.nodes, tree.nodes):
        assert np.array_equal(a.bits, b.bits)

    assert "within band" in capsys.readouterr().out


def test_reconstruct_stdout_and_files(tmp_path, capsys):
    tree = evolve_tree(ModelParams(arity=3, height=2, seq_len=64), 3)
    leaves_file = tmp_path / "leaves.txt"
    leaves_file.write_text("".join(bits_to_str(l.bits) + "\n" for l in tree.leaves()))

    code = run(
        "reconstruct",
        "--leaves", str(leaves_file),
        "--d", "3", "--H", "2", "--k", "64",
        "--beta", "0.0",
        "--seed", "3",
    )
    assert code == 0
    body = json.loads(capsys.readouterr().out)
    assert body["bits"] == bits_to_str(tree.root.bits)
    assert body["root_radioactive"] is False

    out = tmp_path / "result.json"
    diag = tmp_path / "diag.json"
    code = run(
        "reconstruct",
        "--leaves", str(leaves_file),
        "--d", "3", "--H", "2", "--k", "64",
        "--beta", "0.0",
        "--seed", "3",
        "--out", str(out),
        "--diagnostics", str(diag),
    )
    assert code == 0
    assert json.loads(out.read_text())["bits"] == bits_to_str(tree.root.bits)
    diagnostics = json.loads(diag.read_text())
    assert diagnostics["radioactive_count"] == 0
    assert len(diagnostics["nodes"]) == 13


def test_reconstruct_infeasible_params_exit_1(tmp_path, capsys):
    leaves_file = tmp_path / "leaves.txt"
    leaves_file.write_text("0101\n" * 9)
    # default beta = 1/3 at arity 3 cannot satisfy the anchor margin
    code = run(
        "reconstruct",
        "--leaves", str(leaves_file),
        "--d", "3", "--H", "2", "--k", "4",
    )
    assert code == 1
    assert "422" in capsys.readouterr().err


def test_missing_leaves_file_exit_1(capsys):
    code = run(
        "reconstruct",
        "--leaves", "/nonexistent/leaves.txt",
        "--d", "3", "--H", "1", "--k", "8",
        "--beta", "0.0",
    )
    assert code == 1
    assert "leaves" in capsys.readouterr().err


def test_verify_exit_zero_iff_pass(tmp_path, capsys):
    spec = {
        "name": "cli",
        "seed": 5,
        "cells": [
            {"label": "tiny", "arity": 3, "height": 2, "seq_len": 64, "trials": 4, "beta": 0.0}
        ],
    }
    spec_file = tmp_path / "spec.json"
    spec_file.write_text(json.dumps(spec))
    out = tmp_path / "verdict.json"

    code = run("verify", "--lemma", "length", "--spec", str(spec_file), "--out", str(out))
    assert code == 0
    verdict = json.loads(out.read_text())
    assert verdict["pass"] is True
    assert verdict["lemmas"]["length"]["freq"] == 1.0

    # deletions at p=0.5 shrink every tree far below the band
    spec["cells"][0]["p_del"] = 0.5
    spec_file.write_text(json.dumps(spec))
    code = run("verify", "--lemma", "length", "--spec", str(spec_file), "--out", str(out))
    assert code == 1
    assert json.loads(out.read_text())["pass"] is False


def test_sweep_writes_the_three_reports(tmp_path, capsys):
    spec = {
        "name": "cli_sweep",
        "seed": 17,
        "cells": [
            {"label": "a", "arity": 3, "height": 1, "seq_len": 27, "trials": 3, "beta": 0.0}
        ],
    }
    spec_file = tmp_path / "spec.json"
    spec_file.write_text(json.dumps(spec))
    out_dir = tmp_path / "reports"

    assert run("sweep", "--spec", str(spec_file), "--out-dir", str(out_dir)) == 0
    records = (out_dir / "records.csv").read_text()
    assert records.splitlines()[0].startswith("cell,trial,seed,")
    assert records.count("\n") == 4
    summary = json.loads((out_dir / "summary.json").read_text())
    assert summary["cells"]["a"]["trials"] == 3
    assert (out_dir / "timings.csv").read_text().splitlines()[0] == "cell,trial,seconds"
    stdout = capsys.readouterr().out
    assert "a: 3/3 trials" in stdout


def test_sweep_default_out_dir_comes_from_spec_name(tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    spec = {
        "name": "named",
        "seed": 1,
        "cells": [
            {"label": "a", "arity": 3, "height": 1, "seq_len": 27, "trials": 1, "beta": 0.0}
        ],
    }
    (tmp_path / "spec.json").write_text(json.dumps(spec))
    assert run("sweep", "--spec", "spec.json") == 0
    assert (tmp_path / "reports" / "named" / "summary.json").exists()


def test_config_file_overrides_flags(tmp_path, capsys):
    config = {"seq_len": 16, "seed": 9}
    config_file = tmp_path / "config.json"
    config_file.write_text(json.dumps(config))
    code = run(
        "simulate",
        "--d", "3", "--H", "1", "--k", "999", "--seed", "0",
        "--config", str(config_file),
    )
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    tree = evolve_tree(ModelParams(arity=3, height=1, seq_len=16), 9)
    assert lines == [bits_to_str(leaf.bits) for leaf in tree.leaves()]


def test_config_file_accepts_flag_spellings_too(tmp_path, capsys):
    config_file = tmp_path / "config.json"
    config_file.write_text(json.dumps({"k": 16}))
    code = run(
        "simulate",
        "--d", "3", "--H", "1", "--k", "999", "--seed", "9",
        "--config", str(config_file),
    )
    assert code == 0
    assert all(len(line) == 16 for line in capsys.readouterr().out.splitlines())


def test_config_file_rejects_unknown_keys(tmp_path):
    config_file = tmp_path / "config.json"
    config_file.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(SystemExit, match="bogus"):
        run("simulate", "--d", "3", "--H", "1", "--k", "16", "--config", str(config_file))


def test_unknown_subcommand_is_a_usage_error():
    with pytest.raises(SystemExit):
        run("frobnicate")


def test_entry_point_is_installed():
    from importlib.metadata import entry_points

    eps = entry_points(group="console_scripts")
    match = [ep for ep in eps if ep.name == "indeltree"]
    assert match and match[0].value == "indeltree.cli:main"
