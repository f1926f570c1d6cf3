"""File formats for trees, leaves, and site maps.

Two families:

* TSV, for eyeballing and for feeding leaves to the CLI. Nodes go to one
  file (node_id, level, bits), edge maps to a sidecar (child_id,
  parent_pos, child_pos or the literal DAGGER for a deleted site;
  positions are 1-based). The sidecar records where surviving parent
  sites landed, so insertions only show up indirectly; TSV is lossy.
* JSON, a lossless dump of an EvolvedTree (params, seed, every node's
  bits and lineage ids, every edge map including insertion positions),
  meant for round-tripping runs at desk scale rather than archiving
  huge trees.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .evolution import DELETED, EvolvedTree, ModelParams, Sequence, SiteMap

FORMAT_VERSION = 1
DAGGER = "DAGGER"


def bits_to_str(bits: np.ndarray) -> str:
    return "".join("1" if b else "0" for b in bits)


def str_to_bits(s: str) -> np.ndarray:
    if s and set(s) - {"0", "1"}:
        raise ValueError(f"bit string contains characters other than 0/1: {s[:40]!r}")
    return np.frombuffer(s.encode("ascii"), dtype=np.uint8) - ord("0")


def write_nodes_tsv(tree: EvolvedTree, path: str | Path) -> None:
    """One line per node: node_id, level, bits (tab separated)."""
    d = tree.params.arity
    with open(path, "w", encoding="ascii") as fh:
        flat = 0
        for level in range(tree.params.height + 1):
            for _ in range(d**level):
                seq = tree.nodes[flat]
                fh.write(f"{flat}\t{level}\t{bits_to_str(seq.bits)}\n")
                flat += 1


def write_maps_tsv(tree: EvolvedTree, path: str | Path) -> None:
    """One line per surviving-or-deleted parent site of every edge.

    Columns: child_id, parent_pos, child_pos (1-based) or DAGGER.
    """
    with open(path, "w", encoding="ascii") as fh:
        for flat, m in enumerate(tree.maps):
            if m is None:
                continue
            for p in range(m.parent_len):
                c = int(m.to_child[p])
                tail = DAGGER if c == DELETED else str(c + 1)
                fh.write(f"{flat}\t{p + 1}\t{tail}\n")


def write_leaves(leaves, path: str | Path) -> None:
    """One ASCII bit string per line, leaf order."""
    with open(path, "w", encoding="ascii") as fh:
        for leaf in leaves:
            bits = leaf.bits if isinstance(leaf, Sequence) else np.asarray(leaf)
            fh.write(bits_to_str(bits) + "\n")


def load_leaves(path: str | Path) -> list[np.ndarray]:
    """Read bit strings written by write_leaves; blank lines are empty leaves."""
    out = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            out.append(str_to_bits(line.strip()))
    return out


def tree_to_doc(tree: EvolvedTree) -> dict:
    """The lossless JSON document for a tree, as a plain dict."""
    p = tree.params
    return {
        "format_version": FORMAT_VERSION,
        "params": {
            "arity": p.arity,
            "height": p.height,
            "seq_len": p.seq_len,
            "p_sub": p.p_sub,
            "p_del": p.p_del,
            "p_ins": p.p_ins,
        },
        "seed": tree.seed,
        "next_lineage": tree.next_lineage,
        "nodes": [
            {"bits": bits_to_str(s.bits), "lineage": s.lineage.tolist()} for s in tree.nodes
        ],
        "maps": [
            None
            if m is None
            else {
                "to_child": m.to_child.tolist(),
                "ins_after": np.flatnonzero(m.ins_after).tolist(),
                "child_len": m.child_len,
            }
            for m in tree.maps
        ],
    }


def save_tree_json(tree: EvolvedTree, path: str | Path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        json.dump(tree_to_doc(tree), fh, separators=(",", ":"))


def tree_from_doc(doc: dict) -> EvolvedTree:
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported format_version {doc.get('format_version')!r}")
    params = ModelParams(**doc["params"])
    nodes = [
        Sequence(bits=str_to_bits(n["bits"]), lineage=np.asarray(n["lineage"], dtype=np.int64))
        for n in doc["nodes"]
    ]
    maps: list[SiteMap | None] = []
    for m in doc["maps"]:
        if m is None:
            maps.append(None)
            continue
        to_child = np.asarray(m["to_child"], dtype=np.int64)
        ins_after = np.zeros(to_child.shape[0], dtype=bool)
        ins_after[np.asarray(m["ins_after"], dtype=np.int64)] = True
        maps.append(SiteMap(to_child=to_child, ins_after=ins_after, child_len=m["child_len"]))
    return EvolvedTree(
        params=params,
        seed=doc["seed"],
        nodes=nodes,
        maps=maps,
        next_lineage=doc["next_lineage"],
    )


def load_tree_json(path: str | Path) -> EvolvedTree:
    with open(path, "r", encoding="ascii") as fh:
        return tree_from_doc(json.load(fh))
