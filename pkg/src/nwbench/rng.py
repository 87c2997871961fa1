"""Named, splittable sign streams on Philox4x64 (counter-based).

A stream is identified by ``(seed, name, index)``.  The Philox key is the
first two 64-bit words of ``SeedSequence(seed, spawn_key=(crc32(name), index))``;
sign ``j`` of a draw is bit ``j % 64`` (least significant first) of the
``j // 64``-th raw output word, bit 1 meaning +1.  Unused bits of the last
word are discarded.  Only raw Philox words are consumed, so the output does
not depend on numpy's distribution algorithms or on platform endianness.
"""
from __future__ import annotations

import zlib

import numpy as np


def stream_id(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


class SignStream:
    def __init__(self, seed: int, name: str, index: int = 0):
        self.seed, self.name, self.index = seed, name, index
        ss = np.random.SeedSequence(seed, spawn_key=(stream_id(name), index))
        self._bitgen = np.random.Philox(key=ss.generate_state(2, np.uint64))

    def signs(self, n: int) -> np.ndarray:
        """n values in {+1, -1} as int8."""
        if n == 0:
            return np.zeros(0, dtype=np.int8)
        words = self._bitgen.random_raw((n + 63) // 64)
        raw = np.asarray(words, dtype="<u8").view(np.uint8)
        bits = np.unpackbits(raw, bitorder="little")[:n]
        return (2 * bits.astype(np.int8) - 1).astype(np.int8)

    def sign_matrix(self, rows: int, cols: int) -> np.ndarray:
        return self.signs(rows * cols).reshape(rows, cols)

    def __repr__(self) -> str:
        return f"SignStream(seed={self.seed}, name={self.name!r}, index={self.index})"
