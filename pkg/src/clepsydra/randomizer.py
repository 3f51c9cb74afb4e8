"""Keyed, invertible per-way index randomization on top of round-reduced PRINCE.

The cipher works on 64-bit blocks.  Every function that takes a block accepts
either a Python ``int`` or a ``numpy.uint64`` array, so the same code path
serves the per-access simulator and bulk statistical checks.

Round counting: ``rounds`` is ``2*h + 1`` where ``h`` forward rounds are
followed by the middle layer (counted as one round) and ``h`` backward
rounds.  ``rounds=11`` is full PRINCE; ``rounds=3`` keeps one forward round,
the middle layer and one backward round.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .config import CacheGeometry

MASK64 = (1 << 64) - 1

SBOX = (0xB, 0xF, 0x3, 0x2, 0xA, 0xC, 0x9, 0x1, 0x6, 0x7, 0x8, 0x0, 0xE, 0x5, 0xD, 0x4)
SBOX_INV = tuple(SBOX.index(i) for i in range(16))

# Output nibble i (counted from the least significant end) takes input nibble SHIFT_ROWS[i].
SHIFT_ROWS = (0x4, 0x9, 0xE, 0x3, 0x8, 0xD, 0x2, 0x7, 0xC, 0x1, 0x6, 0xB, 0x0, 0x5, 0xA, 0xF)
SHIFT_ROWS_INV = tuple(SHIFT_ROWS.index(i) for i in range(16))

ROUND_CONSTANTS = (
    0x0000000000000000,
    0x13198A2E03707344,
    0xA4093822299F31D0,
    0x082EFA98EC4E6C89,
    0x452821E638D01377,
    0xBE5466CF34E90C6C,
    0x7EF84F78FD955CB1,
    0x85840851F1AC43AA,
    0xC882D32F25323C54,
    0x64A51195E0E3610D,
    0xD3B5A399CA0C2399,
    0xC0AC29B7C97C50DD,
)
ALPHA = 0xC0AC29B7C97C50DD

FULL_ROUNDS = 11

# 16-bit masks selecting, from each 4x4 block of M', the nibble bits that feed
# one output nibble.
_MIX_MASKS = (0x7BDE, 0xBDE7, 0xDE7B, 0xE7BD)


# -- bit-level reference layers (only used to build lookup tables) ---------

def _nibble_parity16(x: int) -> int:
    return (x ^ (x >> 4) ^ (x >> 8) ^ (x >> 12)) & 0xF


def _mprime_ref(x: int) -> int:
    out = 0
    for blk in range(4):
        chunk = (x >> (16 * blk)) & 0xFFFF
        start = 0 if blk in (0, 3) else 1
        for nib in range(4):
            mask = _MIX_MASKS[(start + 3 - nib) % 4]
            out |= _nibble_parity16(chunk & mask) << (16 * blk + 4 * nib)
    return out


def _permute_nibbles(x: int, perm: Sequence[int]) -> int:
    out = 0
    for i, src in enumerate(perm):
        out |= ((x >> (4 * src)) & 0xF) << (4 * i)
    return out


def _sbox_ref(x: int, box: Sequence[int]) -> int:
    out = 0
    for i in range(16):
        out |= box[(x >> (4 * i)) & 0xF] << (4 * i)
    return out


_SB8 = [SBOX[b & 0xF] | (SBOX[b >> 4] << 4) for b in range(256)]
_SB8_INV = [SBOX_INV[b & 0xF] | (SBOX_INV[b >> 4] << 4) for b in range(256)]


def _byte_tables(linear, sbox=None) -> list[list[int]]:
    """Per-byte tables for ``linear(S(x))``; S is applied to the byte only."""
    pre = sbox if sbox is not None else range(256)
    return [[linear(pre[b] << (8 * j)) for b in range(256)] for j in range(8)]


# forward round body: ShiftRows(M'(S(x)))
_T_FWD = _byte_tables(lambda v: _permute_nibbles(_mprime_ref(v), SHIFT_ROWS), _SB8)
# middle: M'(S(x)), followed by a separate inverse S-layer
_T_MID = _byte_tables(_mprime_ref, _SB8)
# backward round linear part: M'(ShiftRows^-1(x)), followed by inverse S-layer
_T_BWD = _byte_tables(lambda v: _mprime_ref(_permute_nibbles(v, SHIFT_ROWS_INV)))
# decryption helpers: inverses of the pieces above
_T_FWD_INV_LIN = _byte_tables(lambda v: _mprime_ref(_permute_nibbles(v, SHIFT_ROWS_INV)))
_T_BWD_INV_LIN = _byte_tables(lambda v: _permute_nibbles(_mprime_ref(v), SHIFT_ROWS))
_T_MPRIME = _byte_tables(_mprime_ref)


class _Tables:
    def __init__(self, as_array: bool):
        conv = (lambda t: np.array(t, dtype=np.uint64)) if as_array else (lambda t: t)
        self.sb = conv(_SB8)
        self.sb_inv = conv(_SB8_INV)
        self.fwd = [conv(t) for t in _T_FWD]
        self.mid = [conv(t) for t in _T_MID]
        self.bwd = [conv(t) for t in _T_BWD]
        self.fwd_inv = [conv(t) for t in _T_FWD_INV_LIN]
        self.bwd_inv = [conv(t) for t in _T_BWD_INV_LIN]
        self.mprime = [conv(t) for t in _T_MPRIME]


_INT_TABLES = _Tables(as_array=False)
_ARR_TABLES = _Tables(as_array=True)


def _tables_for(x):
    return _ARR_TABLES if isinstance(x, np.ndarray) else _INT_TABLES


def _lin(tabs, x):
    r = tabs[0][x & 0xFF]
    for j in range(1, 8):
        r = r ^ tabs[j][(x >> (8 * j)) & 0xFF]
    return r


def _sub(box, x):
    r = box[x & 0xFF]
    for j in range(1, 8):
        r = r | (box[(x >> (8 * j)) & 0xFF] << (8 * j))
    return r


def _split_key(key: int) -> tuple[int, int, int]:
    k0 = (key >> 64) & MASK64
    k1 = key & MASK64
    k0p = ((k0 >> 1) | ((k0 & 1) << 63)) ^ (k0 >> 63)
    return k0, k0p, k1


def _half_rounds(rounds: int) -> int:
    if rounds < 1 or rounds > FULL_ROUNDS or rounds % 2 == 0:
        raise ValueError(f"rounds must be odd and within [1, {FULL_ROUNDS}], got {rounds}")
    return (rounds - 1) // 2


def _as_block(x):
    if isinstance(x, np.ndarray):
        return x.astype(np.uint64, copy=False)
    return int(x) & MASK64


def prince_encrypt(block, key: int, rounds: int = FULL_ROUNDS):
    """Encrypt a 64-bit block (or uint64 array) under a 128-bit ``k0 || k1`` key."""
    h = _half_rounds(rounds)
    k0, k0p, k1 = _split_key(key)
    t = _tables_for(block)
    x = _as_block(block)
    x = x ^ (k0 ^ k1 ^ ROUND_CONSTANTS[0])
    for i in range(1, h + 1):
        x = _lin(t.fwd, x) ^ (ROUND_CONSTANTS[i] ^ k1)
    x = _sub(t.sb_inv, _lin(t.mid, x))
    for i in range(FULL_ROUNDS - h, FULL_ROUNDS):
        x = _sub(t.sb_inv, _lin(t.bwd, x ^ (ROUND_CONSTANTS[i] ^ k1)))
    return x ^ (ROUND_CONSTANTS[11] ^ k1 ^ k0p)


def prince_decrypt(block, key: int, rounds: int = FULL_ROUNDS):
    """Inverse of :func:`prince_encrypt` for the same key and round count."""
    h = _half_rounds(rounds)
    k0, k0p, k1 = _split_key(key)
    t = _tables_for(block)
    x = _as_block(block)
    x = x ^ (ROUND_CONSTANTS[11] ^ k1 ^ k0p)
    for i in range(FULL_ROUNDS - 1, FULL_ROUNDS - h - 1, -1):
        x = _lin(t.bwd_inv, _sub(t.sb, x)) ^ (ROUND_CONSTANTS[i] ^ k1)
    # middle layer S^-1 . M' . S is an involution
    x = _sub(t.sb_inv, _lin(t.mprime, _sub(t.sb, x)))
    for i in range(h, 0, -1):
        x = _sub(t.sb_inv, _lin(t.fwd_inv, x ^ (ROUND_CONSTANTS[i] ^ k1)))
    return x ^ (k0 ^ k1 ^ ROUND_CONSTANTS[0])


def prince_core(block, key: int, rounds: int = 3):
    return prince_encrypt(block, key, rounds)


def index_bit_positions(count: int) -> list[int]:
    """Ciphertext bit positions that form the cache index.

    The first 16 positions fall into 16 different S-box nibbles; later passes
    reuse nibbles with a different bit each time.
    """
    if not 0 <= count <= 64:
        raise ValueError("index width must be within [0, 64]")
    spread = SHIFT_ROWS_INV  # a nibble order that hops between columns
    order = [4 * nib + (k + r) % 4 for r in range(4) for k, nib in enumerate(spread)]
    return order[:count]


@dataclass(frozen=True)
class RandKey:
    core_key: int
    way_secrets: tuple[int, ...]

    @classmethod
    def generate(cls, rng, ways: int) -> "RandKey":
        """Sample a key from ``random.Random`` or a numpy ``Generator``."""
        if hasattr(rng, "getrandbits"):
            words = [rng.getrandbits(64) for _ in range(2 + ways)]
        else:
            words = [int(v) for v in rng.integers(0, 1 << 64, size=2 + ways, dtype=np.uint64)]
        return cls((words[0] << 64) | words[1], tuple(words[2:]))


@dataclass(frozen=True)
class MappedIndex:
    way: int
    index: int
    # ciphertext with the index bit positions cleared
    out_tag: int


class AddressMapper(Protocol):
    """What a randomized cache needs from an index function."""

    def map_address(self, addr: int, way: int) -> MappedIndex: ...

    def unmap_address(self, mi: MappedIndex) -> int: ...


class PrinceMapper:
    """Per-way index randomization ``f_w(addr) = PRINCE_r(addr ^ secret_w)``.

    The line offset is zeroed before encryption.  The index is gathered from
    ``index_bit_positions``; the remaining ciphertext bits form the stored tag,
    which together with the slot position is enough to invert the mapping.
    """

    def __init__(self, key: RandKey, geometry: CacheGeometry, rounds: int = 3):
        if len(key.way_secrets) != geometry.ways:
            raise ValueError(
                f"key has {len(key.way_secrets)} way secrets, geometry has {geometry.ways} ways")
        _half_rounds(rounds)
        self.key = key
        self.geometry = geometry
        self.rounds = rounds
        self.offset_mask = geometry.line_size - 1
        self.positions = index_bit_positions(geometry.index_bits)
        self.index_mask = 0
        for p in self.positions:
            self.index_mask |= 1 << p

    def _gather(self, c):
        if isinstance(c, np.ndarray):
            idx = np.zeros_like(c)
        else:
            idx = 0
        for i, p in enumerate(self.positions):
            idx = idx | (((c >> p) & 1) << i)
        return idx

    def _scatter(self, idx):
        c = 0
        for i, p in enumerate(self.positions):
            c |= ((idx >> i) & 1) << p
        return c

    def encrypt(self, addr, way: int):
        """Full 64-bit ciphertext for ``addr`` in ``way`` (vectorizes over arrays)."""
        if isinstance(addr, np.ndarray):
            a = addr.astype(np.uint64) & np.uint64(MASK64 ^ self.offset_mask)
        else:
            a = int(addr) & MASK64 & ~self.offset_mask
        return prince_encrypt(a ^ self.key.way_secrets[way], self.key.core_key, self.rounds)

    def indices(self, addrs: np.ndarray, way: int) -> np.ndarray:
        """Cache indices of many addresses in one way."""
        return self._gather(self.encrypt(np.asarray(addrs, dtype=np.uint64), way))

    def map_address(self, addr: int, way: int) -> MappedIndex:
        c = self.encrypt(addr, way)
        return MappedIndex(way, self._gather(c), c & ~self.index_mask & MASK64)

    def unmap_address(self, mi: MappedIndex) -> int:
        c = mi.out_tag | self._scatter(mi.index)
        addr = prince_decrypt(c, self.key.core_key, self.rounds) ^ self.key.way_secrets[mi.way]
        if addr & self.offset_mask:
            raise ValueError("mapped index was not produced by this key/geometry")
        return addr


def map_address(addr: int, way: int, key: RandKey, geometry: CacheGeometry, rounds: int = 3) -> MappedIndex:
    return PrinceMapper(key, geometry, rounds).map_address(addr, way)


def unmap_address(mi: MappedIndex, key: RandKey, geometry: CacheGeometry, rounds: int = 3) -> int:
    return PrinceMapper(key, geometry, rounds).unmap_address(mi)
