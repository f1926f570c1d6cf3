"""Serialization round-trips for trees, leaves, and site maps."""

import numpy as np
import pytest

from indeltree.evolution import DELETED, ModelParams, evolve_tree
from indeltree.formats import (
    DAGGER,
    bits_to_str,
    load_leaves,
    load_tree_json,
    save_tree_json,
    str_to_bits,
    tree_from_doc,
    tree_to_doc,
    write_leaves,
    write_maps_tsv,
    write_nodes_tsv,
)


@pytest.fixture
def tree():
    params = ModelParams(arity=3, height=2, seq_len=25, p_sub=0.15, p_del=0.08, p_ins=0.08)
    return evolve_tree(params, 17)


def test_bit_strings_round_trip():
    bits = np.array([1, 0, 0, 1, 1], dtype=np.uint8)
    assert bits_to_str(bits) == "10011"
    assert (str_to_bits("10011") == bits).all()
    assert str_to_bits("").shape == (0,)
    with pytest.raises(ValueError):
        str_to_bits("10x1")


def test_tree_doc_round_trip(tree):
    doc = tree_to_doc(tree)
    back = tree_from_doc(doc)
    assert back.params == tree.params
    assert back.seed == tree.seed
    assert back.next_lineage == tree.next_lineage
    for a, b in zip(tree.nodes, back.nodes):
        assert (a.bits == b.bits).all()
        assert (a.lineage == b.lineage).all()
    for a, b in zip(tree.maps, back.maps):
        if a is None:
            assert b is None
            continue
        assert (a.to_child == b.to_child).all()
        assert (a.ins_after == b.ins_after).all()
        assert a.child_len == b.child_len


def test_tree_json_file_round_trip(tree, tmp_path):
    path = tmp_path / "tree.json"
    save_tree_json(tree, path)
    back = load_tree_json(path)
    assert back.params == tree.params
    assert (back.nodes[-1].bits == tree.nodes[-1].bits).all()


def test_tree_doc_rejects_unknown_version(tree):
    doc = tree_to_doc(tree)
    doc["format_version"] = 99
    with pytest.raises(ValueError):
        tree_from_doc(doc)


def test_leaves_round_trip(tree, tmp_path):
    path = tmp_path / "leaves.txt"
    write_leaves(tree.leaves(), path)
    back = load_leaves(path)
    assert len(back) == 9
    for a, b in zip(tree.leaves(), back):
        assert (a.bits == b).all()


def test_nodes_tsv_layout(tree, tmp_path):
    path = tmp_path / "nodes.tsv"
    write_nodes_tsv(tree, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 13
    node_id, level, bits = lines[0].split("\t")
    assert (node_id, level) == ("0", "0")
    assert bits == bits_to_str(tree.root.bits)
    assert lines[-1].split("\t")[1] == "2"


def test_maps_tsv_marks_deletions(tree, tmp_path):
    path = tmp_path / "maps.tsv"
    write_maps_tsv(tree, path)
    rows = [line.split("\t") for line in path.read_text().splitlines()]
    per_edge = sum(m.parent_len for m in tree.maps[1:])
    assert len(rows) == per_edge
    # Cross-check one edge in full against its map, 1-based positions.
    m = tree.maps[1]
    edge_rows = [r for r in rows if r[0] == "1"]
    assert len(edge_rows) == m.parent_len
    for p, row in enumerate(edge_rows):
        assert int(row[1]) == p + 1
        want = DAGGER if m.to_child[p] == DELETED else str(int(m.to_child[p]) + 1)
        assert row[2] == want
    assert any(r[2] == DAGGER for r in rows)
