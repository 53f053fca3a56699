"""Counter-based hashing used as the random source for trees and percolation.

Every random quantity in the library is a pure function of integer keys.
The mixing function is the splitmix64 finalizer; node keys are two 64-bit
lanes (128 bits in total) derived from the tree seed and the child-index
path.  Three implementations of the same arithmetic exist: scalar Python
ints (here), vectorised numpy (here), and the compiled kernel.  They must
agree bit for bit.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
LANE2 = 0xD1B54A32D192ED03
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

# domain-separation tags
TAG_TREE1 = 0x7472656531A5A5A5
TAG_TREE2 = 0x74726565325A5A5A
TAG_OFFSPRING = 0x6F6666737072696E
TAG_PERC = 0x706572636F6C6174
TAG_ANNEAL = 0x616E6E65616C6564
TAG_IIC = 0x6969637370696E65
TAG_SPINE = 0x7370696E65636878
TAG_DERIVE = 0x6465726976656B79

TWO_M53 = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def rotl(x: int, r: int) -> int:
    return ((x << r) | (x >> (64 - r))) & MASK64


def root_key(tree_seed: int) -> tuple[int, int]:
    tree_seed &= MASK64
    return mix64(tree_seed ^ TAG_TREE1), mix64((tree_seed + TAG_TREE2) & MASK64)


def child_key(h1: int, h2: int, i: int) -> tuple[int, int]:
    j = i + 1
    return (mix64((h1 + j * GOLDEN) & MASK64),
            mix64(h2 ^ ((j * LANE2) & MASK64)))


def path_key(tree_seed: int, path) -> tuple[int, int]:
    h1, h2 = root_key(tree_seed)
    for i in path:
        h1, h2 = child_key(h1, h2, i)
    return h1, h2


def offspring_bits(h1: int, h2: int) -> int:
    return mix64(h1 ^ rotl(h2, 29) ^ TAG_OFFSPRING)


def unit_open_right(x: int) -> float:
    """Map 64 random bits to a double in (0, 1]."""
    return ((x >> 11) + 1) * TWO_M53


def unit_closed_left(x: int) -> float:
    """Map 64 random bits to a double in [0, 1)."""
    return (x >> 11) * TWO_M53


def run_key(master_seed: int, run_index: int, tag: int = TAG_PERC) -> int:
    base = mix64((master_seed & MASK64) ^ tag)
    return mix64((base + (run_index + 1) * GOLDEN) & MASK64)


def annealed_tree_seed(master_seed: int, run_index: int) -> int:
    return run_key(master_seed, run_index, TAG_ANNEAL)


def edge_bits(rkey: int, h1: int, h2: int) -> int:
    return mix64(rkey ^ h1 ^ rotl(h2, 32))


def edge_open(rkey: int, h1: int, h2: int, p: float) -> bool:
    return (edge_bits(rkey, h1, h2) >> 11) < p * (1 << 53)


def spine_bits(skey: int, step: int) -> int:
    return mix64(skey ^ mix64((step + TAG_SPINE) & MASK64))


def derive_seed(master_seed: int, label: str, index: int = 0) -> int:
    """Deterministic sub-seed for a named purpose (tree k, csbp stream, ...)."""
    h = TAG_DERIVE
    for ch in label.encode():
        h = mix64(h ^ ch)
    return run_key(master_seed, index, h)


# ---- numpy versions -------------------------------------------------------

_U = np.uint64


def mix64_np(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _U(30))) * _U(_M1)
        z = (z ^ (z >> _U(27))) * _U(_M2)
    return z ^ (z >> _U(31))


def rotl_np(x: np.ndarray, r: int) -> np.ndarray:
    return (x << _U(r)) | (x >> _U(64 - r))


def child_key_np(h1: np.ndarray, h2: np.ndarray, i: np.ndarray):
    j = np.asarray(i, dtype=np.uint64) + _U(1)
    with np.errstate(over="ignore"):
        a = mix64_np(h1 + j * _U(GOLDEN))
        b = mix64_np(h2 ^ (j * _U(LANE2)))
    return a, b


def offspring_bits_np(h1: np.ndarray, h2: np.ndarray) -> np.ndarray:
    return mix64_np(h1 ^ rotl_np(h2, 29) ^ _U(TAG_OFFSPRING))


def unit_open_right_np(x: np.ndarray) -> np.ndarray:
    return ((x >> _U(11)) + _U(1)).astype(np.float64) * TWO_M53


def unit_closed_left_np(x: np.ndarray) -> np.ndarray:
    return (x >> _U(11)).astype(np.float64) * TWO_M53


def run_keys_np(master_seed: int, run_index: np.ndarray, tag: int = TAG_PERC) -> np.ndarray:
    base = _U(mix64((master_seed & MASK64) ^ tag))
    with np.errstate(over="ignore"):
        return mix64_np(base + (np.asarray(run_index, dtype=np.uint64) + _U(1)) * _U(GOLDEN))


def edge_open_np(rkey: np.ndarray, h1: np.ndarray, h2: np.ndarray, p: float) -> np.ndarray:
    bits = mix64_np(rkey ^ h1 ^ rotl_np(h2, 32)) >> _U(11)
    # bits < 2**53 are exact in float64
    return bits.astype(np.float64) < p * float(1 << 53)


def spine_bits_np(skey: np.ndarray, step: int) -> np.ndarray:
    return mix64_np(skey ^ _U(mix64((step + TAG_SPINE) & MASK64)))
