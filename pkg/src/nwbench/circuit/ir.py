"""Structured-operator IR.

A :class:`CircuitDescription` is a list of factors written in matrix-product
order: ``factors[0]`` is leftmost and is applied last.  A factor of dimension
``d`` inside a circuit of total dimension ``T`` acts as ``factor (x) I_{T/d}``,
i.e. on the most significant ``log2 d`` index bits.  Ancilla qubits are the
least significant bits, so a data-only factor never touches them.

Every factor supports ``apply`` on arrays of shape ``(dim, k)`` (columns are
independent states) and ``matrix`` for dense verification.  All operators are
real.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import sqrt

import numpy as np

from ..errors import ResourceError, UsageError
from ..gf import FieldSpec

MAX_DENSE_DIM = 2**14


def _is_pow2(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def apply_extended(f, state: np.ndarray) -> np.ndarray:
    """Apply ``f (x) I`` to ``state`` of shape (T,) or (T, k)."""
    vec = state.ndim == 1
    s = state[:, None] if vec else state
    T, k = s.shape
    d = f.dim
    if T % d:
        raise UsageError(f"factor dimension {d} does not divide state dimension {T}")
    out = f.apply(s.reshape(d, (T // d) * k)).reshape(T, k)
    return out[:, 0] if vec else out


class Factor:
    """Base class; subclasses define ``dim`` and at least one of ``apply``/``matrix``."""

    dim: int

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.matrix() @ v

    def matrix(self) -> np.ndarray:
        return self.apply(np.eye(self.dim))


@dataclass(frozen=True)
class Identity(Factor):
    size: int

    @property
    def dim(self) -> int:
        return self.size

    def apply(self, v):
        return v

    def matrix(self):
        return np.eye(self.size)


@dataclass(frozen=True)
class TensorLeftIdentity(Factor):
    """I_copies (x) inner."""

    inner: Factor
    copies: int

    @property
    def dim(self) -> int:
        return self.copies * self.inner.dim

    def apply(self, v):
        d, k = self.inner.dim, v.shape[1]
        blocks = v.reshape(self.copies, d, k).transpose(1, 0, 2).reshape(d, self.copies * k)
        out = self.inner.apply(blocks)
        return out.reshape(d, self.copies, k).transpose(1, 0, 2).reshape(self.dim, k)

    def matrix(self):
        return np.kron(np.eye(self.copies), self.inner.matrix())


@dataclass(frozen=True)
class FieldDFT(Factor):
    """Additive-character transform of GF(2^n): entry (x, y) = (-1)^Tr(xy) / sqrt(q)."""

    field: FieldSpec

    @property
    def dim(self) -> int:
        return self.field.order

    @cached_property
    def _m(self) -> np.ndarray:
        F = self.field
        q = F.order
        signs = [[1 - 2 * F.trace(F.mul(x, y)) for y in range(q)] for x in range(q)]
        return np.array(signs, dtype=float) / sqrt(q)

    def matrix(self):
        return self._m.copy()

    def apply(self, v):
        return self._m @ v


@dataclass(frozen=True)
class PairHadamard(Factor):
    """(1/sqrt2) [[1, -1], [1, 1]], the 2x2 building block of the B stages."""

    @property
    def dim(self) -> int:
        return 2

    def matrix(self):
        return np.array([[1.0, -1.0], [1.0, 1.0]]) / sqrt(2)


@dataclass(frozen=True)
class BMatrix(Factor):
    """Rows: (1/sqrt2)(I|-I) for q/2 rows, (1/2)(I|-I|I|-I) for q/4 rows, ..., last row all-ones/sqrt(q)."""

    q: int

    def __post_init__(self):
        if not _is_pow2(self.q) or self.q < 2:
            raise UsageError(f"q={self.q} is not a power of 2")

    @property
    def dim(self) -> int:
        return self.q

    @cached_property
    def _m(self) -> np.ndarray:
        q = self.q
        out = np.zeros((q, q))
        row, width = 0, q // 2
        reps = 2
        while width >= 1:
            pattern = np.array([1.0 if r % 2 == 0 else -1.0 for r in range(reps)])
            block = np.kron(pattern, np.eye(width)) / sqrt(reps)
            out[row:row + width] = block
            row += width
            width //= 2
            reps *= 2
        out[q - 1] = 1.0 / sqrt(q)
        return out

    def matrix(self):
        return self._m.copy()

    def apply(self, v):
        return self._m @ v

    def stages(self) -> list[BStage]:
        n = self.q.bit_length() - 1
        return [BStage(self.q, i) for i in range(1, n + 1)]


@dataclass(frozen=True)
class BStage(Factor):
    """I_q with its lower-right 2^i x 2^i block replaced by PairHadamard (x) I_{2^(i-1)}."""

    q: int
    i: int

    def __post_init__(self):
        n = self.q.bit_length() - 1
        if not _is_pow2(self.q) or not 1 <= self.i <= n:
            raise UsageError(f"BStage needs q = 2^n and 1 <= i <= n (got q={self.q}, i={self.i})")

    @property
    def dim(self) -> int:
        return self.q

    def matrix(self):
        size = 2**self.i
        out = np.eye(self.q)
        out[self.q - size:, self.q - size:] = np.kron(PairHadamard().matrix(), np.eye(size // 2))
        return out

    def as_block_dispatch(self) -> BlockDispatch:
        n = self.q.bit_length() - 1
        size = 2**self.i
        count = 2 ** (n - self.i)
        blocks = [CircuitDescription(size, (Identity(size),))] * (count - 1)
        blocks.append(CircuitDescription(size, (PairHadamard(),)))
        return BlockDispatch(n - self.i, tuple(blocks))


def dc_diagonal(field: FieldSpec, c: int, primed: bool = False) -> np.ndarray:
    """Diagonal of D_c (or D'_c), indexed by field element: slot 0 is 1 (0 if primed),
    slot y != 0 is (-1)^Tr(y c) / sqrt(q).  Slot alpha^k is the one the
    k-th listed entry belongs to."""
    q = field.order
    d = np.array([(1 - 2 * field.trace(field.mul(y, c))) / sqrt(q) for y in range(q)])
    d[0] = 0.0 if primed else 1.0
    return d


@dataclass(frozen=True)
class DMatrix(Factor):
    """q^2 x q^2 matrix whose (i, j) block is D_{ij} when i = j and D'_{ij} otherwise.

    The entries do not depend on alpha; alpha fixes the lowering, where the
    block for diagonal slot alpha^k is the DFT with rows renamed by j -> j alpha^k.
    """

    field: FieldSpec
    alpha: int

    def __post_init__(self):
        if self.field.characteristic != 2:
            raise UsageError("DMatrix needs characteristic 2")
        q = self.field.order
        if q > 2 and (self.alpha == 0 or self.field.multiplicative_order(self.alpha) != q - 1):
            raise UsageError(f"{self.alpha} does not generate GF({q})*")
        if q == 2 and self.alpha != 1:
            raise UsageError("the generator of GF(2)* is 1")

    @property
    def dim(self) -> int:
        return self.field.order ** 2

    @cached_property
    def _m(self) -> np.ndarray:
        F = self.field
        q = F.order
        out = np.zeros((q * q, q * q))
        for i in range(q):
            for j in range(q):
                diag = dc_diagonal(F, F.mul(i, j), primed=(i != j))
                out[i * q:(i + 1) * q, j * q:(j + 1) * q] = np.diag(diag)
        return out

    def matrix(self):
        return self._m.copy()

    def apply(self, v):
        return self._m @ v


@dataclass(frozen=True)
class FieldShiftPermutation(Factor):
    """S_c: entry (x, z) is 1 iff z = x + c."""

    field: FieldSpec
    c: int

    @property
    def dim(self) -> int:
        return self.field.order

    @cached_property
    def _perm(self) -> np.ndarray:
        return np.array([self.field.add(x, self.c) for x in range(self.dim)])

    def apply(self, v):
        return v[self._perm]


@dataclass(frozen=True)
class FieldScalePermutation(Factor):
    """Entry (x, x * alpha^k) is 1: rows of whatever follows are renamed by x -> x alpha^k."""

    field: FieldSpec
    alpha: int
    k: int

    @property
    def dim(self) -> int:
        return self.field.order

    @cached_property
    def _perm(self) -> np.ndarray:
        s = self.field.pow(self.alpha, self.k)
        return np.array([self.field.mul(x, s) for x in range(self.dim)])

    def apply(self, v):
        return v[self._perm]


@dataclass(frozen=True)
class BitHadamard(Factor):
    """H^{(x) n}: entry (i, j) = (-1)^<i, j> / sqrt(2^n)."""

    n: int

    @property
    def dim(self) -> int:
        return 2**self.n

    def apply(self, v):
        out = np.array(v, dtype=float)
        k = out.shape[1]
        h = 1
        while h < self.dim:
            view = out.reshape(-1, 2, h, k)
            a, b = view[:, 0].copy(), view[:, 1].copy()
            view[:, 0] = a + b
            view[:, 1] = a - b
            h *= 2
        return out / sqrt(self.dim)


@dataclass(frozen=True)
class InputPhase(Factor):
    """diag(x) for a sign string x in {+1, -1}^N."""

    signs: tuple[int, ...]

    def __post_init__(self):
        if not _is_pow2(len(self.signs)) or any(s not in (1, -1) for s in self.signs):
            raise UsageError("InputPhase needs a +-1 string of power-of-2 length")

    @property
    def dim(self) -> int:
        return len(self.signs)

    def apply(self, v):
        return np.asarray(self.signs, dtype=float)[:, None] * v


@dataclass(frozen=True)
class IndexTranspose(Factor):
    """Swap the two GF(q) index coordinates: (a, b) -> (b, a)."""

    q: int

    @property
    def dim(self) -> int:
        return self.q * self.q

    def apply(self, v):
        q, k = self.q, v.shape[1]
        return v.reshape(q, q, k).transpose(1, 0, 2).reshape(q * q, k)


@dataclass(frozen=True)
class BlockDispatch(Factor):
    """Block-diagonal operator: block i acts on the data register when the selector holds i."""

    selector_width: int
    blocks: tuple

    def __post_init__(self):
        if len(self.blocks) != 2**self.selector_width:
            raise UsageError("block count must equal 2^selector_width")
        dims = {b.dim for b in self.blocks}
        if len(dims) != 1:
            raise UsageError(f"ragged block dimensions: {sorted(dims)}")

    @property
    def block_dim(self) -> int:
        return self.blocks[0].dim

    @property
    def dim(self) -> int:
        return len(self.blocks) * self.block_dim

    def apply(self, v):
        d = self.block_dim
        out = np.empty_like(v, dtype=float)
        for i, blk in enumerate(self.blocks):
            out[i * d:(i + 1) * d] = blk.apply(v[i * d:(i + 1) * d])
        return out


@dataclass(frozen=True)
class GateTableXor(Factor):
    """|s>|d>|a> -> |s>|d>|a xor table[s]>: writes (or erases) a gate table into the ancilla."""

    data_dim: int
    ancilla_width: int
    table: tuple[int, ...]

    @property
    def dim(self) -> int:
        return len(self.table) * self.data_dim * 2**self.ancilla_width

    def apply(self, v):
        S, A, k = len(self.table), 2**self.ancilla_width, v.shape[1]
        view = v.reshape(S, self.data_dim, A, k)
        out = np.empty_like(view, dtype=float)
        anc = np.arange(A)
        for s, code in enumerate(self.table):
            out[s][:, anc ^ code] = view[s]
        return out.reshape(self.dim, k)


@dataclass(frozen=True)
class ControlledFactor(Factor):
    """Applies ``alphabet[g]`` to the data register, where g is read from ancilla
    bits [offset, offset + width).  Codes past the alphabet act as identity."""

    selector_dim: int
    data_dim: int
    ancilla_width: int
    offset: int
    width: int
    alphabet: tuple

    @property
    def dim(self) -> int:
        return self.selector_dim * self.data_dim * 2**self.ancilla_width

    def apply(self, v):
        S, D, A, k = self.selector_dim, self.data_dim, 2**self.ancilla_width, v.shape[1]
        view = v.reshape(S, D, A, k)
        out = np.array(view, dtype=float)
        codes = (np.arange(A) >> self.offset) & ((1 << self.width) - 1)
        for g, f in enumerate(self.alphabet):
            cols = np.flatnonzero(codes == g)
            if cols.size == 0:
                continue
            sub = view[:, :, cols, :].transpose(1, 0, 2, 3).reshape(D, -1)
            res = apply_extended(f, sub).reshape(D, S, cols.size, k).transpose(1, 0, 2, 3)
            out[:, :, cols, :] = res
        return out.reshape(self.dim, k)


@dataclass(frozen=True)
class CircuitDescription(Factor):
    """Ordered factor list (matrix-product order) over ``dimension * 2^ancilla_width`` amplitudes."""

    dimension: int
    factors: tuple
    ancilla_width: int = 0

    def __post_init__(self):
        if not _is_pow2(self.dimension):
            raise UsageError(f"circuit dimension {self.dimension} is not a power of 2")
        T = self.total_dim
        for f in self.factors:
            if T % f.dim:
                raise UsageError(f"{type(f).__name__} of dimension {f.dim} is incompatible with {T}")

    @property
    def total_dim(self) -> int:
        return self.dimension << self.ancilla_width

    @property
    def dim(self) -> int:
        return self.total_dim

    def apply(self, v):
        for f in reversed(self.factors):
            v = apply_extended(f, v)
        return v

    def matrix(self):
        T = self.total_dim
        out = np.eye(T)
        for f in self.factors:
            m = f.matrix()
            if m.shape[0] != T:
                m = np.kron(m, np.eye(T // m.shape[0]))
            out = out @ m
        return out


def materialize(f: Factor) -> np.ndarray:
    """Dense real matrix of a factor or circuit (the product, for a circuit)."""
    if f.dim > MAX_DENSE_DIM:
        raise ResourceError(f"dimension {f.dim} exceeds the dense guard {MAX_DENSE_DIM}")
    return f.matrix()
