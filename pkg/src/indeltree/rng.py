"""Deterministic randomness plumbing.

Every random decision in this package flows from a single integer seed
through named substreams, so any node, edge, trial, or tie-break can be
re-derived in isolation without replaying the rest of the run.

Substreams are numpy Philox generators keyed by (seed, mixed tag words).
Tie-break coins are pure functions of their coordinates rather than draws
from a stateful generator: two call sites that consult the same coin must
agree even when they reach it in different orders.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1

_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def string_tag(name: str) -> int:
    # blake2b, NEVER Python's built-in hash(), which is randomized per process.
    digest = hashlib.blake2b(name.encode("ascii"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


TAG_ROOT = string_tag("root-sequence")
TAG_EDGE = string_tag("edge-mutations")
TAG_TRIAL = string_tag("trial")
TAG_TIE = string_tag("tie-coin")
TAG_SUBTREE_TRIM = string_tag("stable-subtree-trim")
TAG_GATEWAY_TRIM = string_tag("gateway-trim")
TAG_GAME = string_tag("majority-game")


def splitmix64(x: int) -> int:
    """One splitmix64 round; the workhorse behind mixing and coins."""
    x = (x + _GOLDEN) & MASK64
    x = ((x ^ (x >> 30)) * _MIX1) & MASK64
    x = ((x ^ (x >> 27)) * _MIX2) & MASK64
    return x ^ (x >> 31)


def splitmix64_array(x: np.ndarray) -> np.ndarray:
    """Vectorized splitmix64, bit-identical to the scalar version."""
    x = x.astype(np.uint64, copy=True)
    with np.errstate(over="ignore"):
        x += np.uint64(_GOLDEN)
        x = (x ^ (x >> np.uint64(30))) * np.uint64(_MIX1)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(_MIX2)
    return x ^ (x >> np.uint64(31))


def mix(*parts: int) -> int:
    """Fold any number of integer coordinates into one 64-bit word."""
    h = 0
    for part in parts:
        h = splitmix64((h ^ (part & MASK64)) & MASK64)
    return h


def substream(seed: int, *parts: int) -> np.random.Generator:
    """Independent generator for the coordinate tuple (seed, parts)."""
    key = np.array([seed & MASK64, mix(*parts)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def derive_seed(seed: int, *parts: int) -> int:
    """A child seed; feed it to substream() or pass it further down."""
    return mix(seed & MASK64, *parts)


def tie_coin(seed: int, node: int, site: int) -> int:
    """Shared 0/1 coin for a majority tie at (node, site).

    Pure function of its coordinates: every caller that needs this coin
    computes it locally and all of them agree by construction.
    """
    return splitmix64((mix(seed, TAG_TIE, node) ^ (site & MASK64)) & MASK64) & 1


def tie_coins(seed: int, node: int, sites: np.ndarray) -> np.ndarray:
    """Vectorized tie_coin over an array of site indices."""
    base = np.uint64(mix(seed, TAG_TIE, node))
    x = np.asarray(sites).astype(np.uint64) ^ base
    return (splitmix64_array(x) & np.uint64(1)).astype(np.uint8)
