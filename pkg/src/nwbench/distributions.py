"""Samplers for the uniform distribution, D_{A,M}, and the NW-majority distribution.

Every sample is a sign string of length 2N laid out as ``x || z``.  Row sums
that vanish are resolved by a :class:`TieRule`.  Under the fair-coin rule the
coin for the j-th row of ``sorted(R)`` is the j-th sign of a separate tie
stream, and ``nw_evaluate`` draws the coin for set j from the same position,
so both samplers agree coordinate by coordinate when they share streams.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .construction import SignedSparseMatrix
from .errors import UsageError
from .rng import SignStream
from .sim import as_signs


class TieRule(str, enum.Enum):
    FAIR = "fair"
    PLUS = "plus"


@dataclass(frozen=True)
class NWParams:
    sets: tuple[tuple[int, ...], ...]
    patterns: tuple[tuple[int, ...], ...]
    t: int

    def __post_init__(self):
        if not self.sets:
            raise UsageError("need at least one set")
        if len({len(s) for s in self.sets}) != 1:
            raise UsageError("all sets must have the same size")
        if len(self.patterns) != len(self.sets):
            raise UsageError("one negation pattern per set")
        for s, pat in zip(self.sets, self.patterns):
            if len(pat) != len(s) or any(v not in (1, -1) for v in pat):
                raise UsageError("pattern length must match its set, entries +-1")
            if len(set(s)) != len(s) or any(not 0 <= j < self.t for j in s):
                raise UsageError("set indices must be distinct and inside [t]")

    @property
    def m(self) -> int:
        return len(self.sets)

    @property
    def ell(self) -> int:
        return len(self.sets[0])

    @property
    def p(self) -> int:
        """Largest pairwise intersection."""
        best = 0
        as_sets = [frozenset(s) for s in self.sets]
        for i in range(len(as_sets)):
            for j in range(i + 1, len(as_sets)):
                best = max(best, len(as_sets[i] & as_sets[j]))
        return best

    def dense_patterns(self) -> np.ndarray:
        """(m, t) int matrix whose row i carries pattern i on S_i."""
        out = np.zeros((self.m, self.t), dtype=np.int64)
        for i, (s, pat) in enumerate(zip(self.sets, self.patterns)):
            out[i, list(s)] = pat
        return out


@dataclass(frozen=True)
class Sample:
    bits: np.ndarray
    seed: int
    source: str
    stream: str = ""

    def __post_init__(self):
        if self.bits.ndim != 1 or self.bits.size % 2:
            raise UsageError("sample must be a 1-d sign string of even length 2N")

    @property
    def x(self) -> np.ndarray:
        return self.bits[: self.bits.size // 2]

    @property
    def z(self) -> np.ndarray:
        return self.bits[self.bits.size // 2:]


def check_rows(A: SignedSparseMatrix, R) -> tuple[int, ...]:
    rows = tuple(sorted(set(int(i) for i in R)))
    if not rows:
        raise UsageError("row set R is empty")
    if rows[0] < 0 or rows[-1] >= A.num_rows:
        raise UsageError("row index out of range")
    if any(len(A.rows[i]) == 0 for i in rows):
        raise UsageError("rows in R must have nonempty support")
    return rows


def params_from_rows(A: SignedSparseMatrix, R) -> NWParams:
    """Supports of the rows in sorted(R) become sets; their signs become patterns."""
    rows = check_rows(A, R)
    return NWParams(
        sets=tuple(tuple(c for c, _ in A.rows[i]) for i in rows),
        patterns=tuple(tuple(s for _, s in A.rows[i]) for i in rows),
        t=A.num_cols,
    )


def canonical_permutation(N: int, R) -> tuple[int, ...]:
    """Row order with sorted(R) first, then the remaining rows in increasing order."""
    rows = sorted(set(R))
    rest = [i for i in range(N) if i not in set(rows)]
    return tuple(rows + rest)


def resolve_signs(sums: np.ndarray, coins: np.ndarray, tie: TieRule) -> np.ndarray:
    """sign(sums) with zeros replaced by the coin (fair) or +1 (plus)."""
    out = np.sign(sums).astype(np.int8)
    zero = out == 0
    out[zero] = coins[zero] if tie is TieRule.FAIR else 1
    return out


def dam_streams(seed: int, trial: int = 0) -> tuple[SignStream, SignStream]:
    return SignStream(seed, "dam", trial), SignStream(seed, "dam-tie", trial)


def sample_uniform(N: int, seed: int, trial: int = 0) -> Sample:
    stream = SignStream(seed, "uniform", trial)
    return Sample(stream.signs(2 * N), seed, "uniform", repr(stream))


def sample_dam(A: SignedSparseMatrix, R, stream: SignStream, tie_stream: SignStream,
               tie: TieRule = TieRule.FAIR) -> Sample:
    """x from ``stream``, then N uniform z bits; rows in R are overwritten with sign(A_i . x)."""
    rows = check_rows(A, R)
    N = A.num_cols
    if A.num_rows != N:
        raise UsageError("A must be square")
    x = stream.signs(N)
    z = stream.signs(N)
    coins = tie_stream.signs(len(rows))
    sums = np.array([sum(s * int(x[c]) for c, s in A.rows[i]) for i in rows])
    z[list(rows)] = resolve_signs(sums, coins, tie)
    return Sample(np.concatenate([x, z]), stream.seed, "dam", repr(stream))


def sample_dam_batch(A: SignedSparseMatrix, R, seed: int, trials: int,
                     tie: TieRule = TieRule.FAIR) -> tuple[np.ndarray, np.ndarray]:
    """(X, Z) for trials 0..trials-1; trial i equals sample_dam on dam_streams(seed, i)."""
    rows = list(check_rows(A, R))
    N = A.num_cols
    if A.num_rows != N:
        raise UsageError("A must be square")
    X = np.empty((trials, N), dtype=np.int8)
    Z = np.empty((trials, N), dtype=np.int8)
    C = np.empty((trials, len(rows)), dtype=np.int8)
    for i in range(trials):
        s, ts = dam_streams(seed, i)
        X[i], Z[i], C[i] = s.signs(N), s.signs(N), ts.signs(len(rows))
    sums = X.astype(np.int64) @ A.to_dense()[rows].T
    Z[:, rows] = resolve_signs(sums, C, tie)
    return X, Z


def sample_uniform_batch(N: int, seed: int, trials: int) -> tuple[np.ndarray, np.ndarray]:
    bits = np.stack([SignStream(seed, "uniform", i).signs(2 * N) for i in range(trials)])
    return bits[:, :N], bits[:, N:]


def nw_evaluate(params: NWParams, seed, tie: TieRule = TieRule.FAIR,
                tie_stream: SignStream | None = None) -> np.ndarray:
    """Majority of each pattern-negated seed restriction, ties per ``tie``."""
    x = as_signs(seed, params.t).astype(np.int64)
    sums = params.dense_patterns() @ x
    if tie is TieRule.FAIR:
        if tie_stream is None:
            raise UsageError("fair-coin ties need a tie stream")
        coins = tie_stream.signs(params.m)
    else:
        coins = np.ones(params.m, dtype=np.int8)
    return resolve_signs(sums, coins, tie)


def sample_nw(params: NWParams, N: int, stream: SignStream, tie_stream: SignStream,
              tie: TieRule = TieRule.FAIR) -> Sample:
    """(x, NW(x)) padded with N - m uniform bits; D_{A,M} in canonical row order."""
    if params.t != N or params.m > N:
        raise UsageError("params do not fit a length-2N sample")
    x = stream.signs(N)
    pad = stream.signs(N - params.m)
    out = nw_evaluate(params, x, tie, tie_stream)
    return Sample(np.concatenate([x, out, pad]), stream.seed, "nw", repr(stream))


@dataclass(frozen=True)
class NWEquivalenceReport:
    trials: int
    deterministic_mismatches: int
    free_coordinates: int
    max_free_abs_mean: float
    free_threshold: float
    tie: str
    seed: int

    @property
    def passed(self) -> bool:
        return self.deterministic_mismatches == 0 and self.max_free_abs_mean <= self.free_threshold

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "trials": self.trials,
            "deterministic_mismatches": self.deterministic_mismatches,
            "free_coordinates": self.free_coordinates,
            "max_free_abs_mean": self.max_free_abs_mean,
            "free_threshold": self.free_threshold,
            "tie": self.tie,
            "seed": self.seed,
        }


def verify_nw_equivalence(A: SignedSparseMatrix, R, params: NWParams, trials: int,
                          seed: int, tie: TieRule = TieRule.FAIR) -> NWEquivalenceReport:
    """Compare D_{A,M} against NW evaluation on shared x and tie coins.

    Rows outside R must look uniform: each has |mean| within 4 standard
    deviations (4/sqrt(trials)) of 0.
    """
    rows = list(check_rows(A, R))
    N = A.num_cols
    X, Z = sample_dam_batch(A, R, seed, trials, tie)
    mismatches = 0
    for i in range(trials):
        nw = nw_evaluate(params, X[i], tie, dam_streams(seed, i)[1])
        if nw.shape != (len(rows),) or not np.array_equal(nw, Z[i, rows]):
            mismatches += 1
    free = [i for i in range(N) if i not in set(rows)]
    means = np.abs(Z[:, free].mean(axis=0)) if free else np.zeros(0)
    return NWEquivalenceReport(
        trials=trials,
        deterministic_mismatches=mismatches,
        free_coordinates=len(free),
        max_free_abs_mean=float(means.max()) if free else 0.0,
        free_threshold=4 / np.sqrt(trials),
        tie=tie.value,
        seed=seed,
    )


def write_packed(path: str | Path, bits: np.ndarray, meta: dict) -> Path:
    """Write a (rows, cols) sign array as packed bits plus ``<path>.json``.

    Row-major, little-endian within each byte, bit 1 for +1.
    """
    bits = np.atleast_2d(np.asarray(bits))
    if not np.isin(bits, (1, -1)).all():
        raise UsageError("packed export needs entries in {+1, -1}")
    path = Path(path)
    path.write_bytes(np.packbits((bits == 1).ravel(), bitorder="little").tobytes())
    sidecar = {
        "format": "packed-signs v1",
        "rows": int(bits.shape[0]),
        "cols": int(bits.shape[1]),
        "bit_order": "little",
        "one_bit": "+1",
        **meta,
    }
    side = path.with_name(path.name + ".json")
    side.write_text(json.dumps(sidecar, indent=2) + "\n")
    return side


def read_packed(path: str | Path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    meta = json.loads(path.with_name(path.name + ".json").read_text())
    if meta.get("format") != "packed-signs v1":
        raise UsageError("unknown packed format")
    n = meta["rows"] * meta["cols"]
    raw = np.frombuffer(path.read_bytes(), dtype=np.uint8)
    if raw.size != (n + 7) // 8:
        raise UsageError("packed file size does not match the sidecar")
    bits = np.unpackbits(raw, bitorder="little")[:n].astype(np.int8)
    return (2 * bits - 1).reshape(meta["rows"], meta["cols"]), meta
