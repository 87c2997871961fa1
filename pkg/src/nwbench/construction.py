"""Signed sparse vector families: paired lines over GF(2^n) and the all-rows family over GF(p).

Both constructions produce :class:`SignedSparseMatrix` rows whose supports form
a combinatorial design; :func:`verify_design` measures the design parameters
and orthogonality with integer arithmetic only.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import UsageError
from .gf import FieldSpec, field_of_order

Entry = tuple[int, int]  # (column, sign)

HEADER = "signed-sparse v1"


@dataclass(frozen=True)
class SignedSparseMatrix:
    """Rows with entries in {0, +1, -1}, stored as sorted (column, sign) pairs."""

    num_rows: int
    num_cols: int
    rows: tuple[tuple[Entry, ...], ...]
    column_labels: tuple | None = field(default=None, compare=False)
    row_labels: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.rows) != self.num_rows:
            raise UsageError(f"expected {self.num_rows} rows, got {len(self.rows)}")
        for i, row in enumerate(self.rows):
            prev = -1
            for col, sign in row:
                if col <= prev or not 0 <= col < self.num_cols:
                    raise UsageError(f"row {i}: columns must be strictly increasing and in range")
                if sign not in (1, -1):
                    raise UsageError(f"row {i}: sign {sign} is not +-1")
                prev = col
        if self.column_labels is not None and len(self.column_labels) != self.num_cols:
            raise UsageError("column_labels length mismatch")

    @classmethod
    def from_dense(cls, dense, **labels) -> SignedSparseMatrix:
        dense = np.asarray(dense)
        if not np.isin(dense, (-1, 0, 1)).all():
            raise UsageError("dense matrix has entries outside {0, +1, -1}")
        rows = tuple(
            tuple((int(c), int(r[c])) for c in np.flatnonzero(r)) for r in dense
        )
        return cls(dense.shape[0], dense.shape[1], rows, **labels)

    @classmethod
    def identity(cls, n: int) -> SignedSparseMatrix:
        return cls(n, n, tuple(((i, 1),) for i in range(n)))

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.num_rows, self.num_cols), dtype=np.int64)
        for i, row in enumerate(self.rows):
            for col, sign in row:
                out[i, col] = sign
        return out

    def support(self, i: int) -> frozenset[int]:
        return frozenset(c for c, _ in self.rows[i])

    def select_rows(self, indices) -> SignedSparseMatrix:
        indices = list(indices)
        labels = None if self.row_labels is None else tuple(self.row_labels[i] for i in indices)
        return SignedSparseMatrix(
            len(indices), self.num_cols, tuple(self.rows[i] for i in indices),
            column_labels=self.column_labels, row_labels=labels,
        )

    def dumps(self) -> str:
        buf = io.StringIO()
        buf.write(f"{HEADER} {self.num_rows} {self.num_cols}\n")
        for i, row in enumerate(self.rows):
            for col, sign in row:
                buf.write(f"{i} {col} {'+1' if sign > 0 else '-1'}\n")
        return buf.getvalue()

    @classmethod
    def loads(cls, text: str) -> SignedSparseMatrix:
        lines = text.splitlines()
        if not lines or not lines[0].startswith(HEADER + " "):
            raise UsageError("missing signed-sparse v1 header")
        try:
            n_rows, n_cols = (int(t) for t in lines[0][len(HEADER):].split())
        except ValueError as exc:
            raise UsageError(f"bad header: {lines[0]!r}") from exc
        rows: list[list[Entry]] = [[] for _ in range(n_rows)]
        last = (-1, -1)
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 3 or parts[2] not in ("+1", "-1"):
                raise UsageError(f"line {lineno}: expected '<row> <col> <+1|-1>'")
            r, c = int(parts[0]), int(parts[1])
            if (r, c) <= last or not 0 <= r < n_rows:
                raise UsageError(f"line {lineno}: entries must be sorted by (row, col)")
            last = (r, c)
            rows[r].append((c, int(parts[2])))
        return cls(n_rows, n_cols, tuple(tuple(r) for r in rows))

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="ascii")

    @classmethod
    def read(cls, path: str | Path) -> SignedSparseMatrix:
        return cls.loads(Path(path).read_text(encoding="ascii"))


@dataclass(frozen=True)
class PairedLinesParams:
    """Equipartition (b1, b2) of GF(q), q = 2^n, and a bijection phi: b1 -> b2."""

    field: FieldSpec
    b1: tuple[int, ...]
    phi: tuple[tuple[int, int], ...]  # sorted (b, phi(b)) pairs

    def __post_init__(self):
        q = self.field.order
        if self.field.characteristic != 2:
            raise UsageError("paired lines need characteristic 2")
        b1 = set(self.b1)
        if len(b1) != q // 2 or len(self.b1) != q // 2 or not b1 <= set(range(q)):
            raise UsageError("b1 must hold q/2 distinct field elements")
        phi = dict(self.phi)
        if set(phi) != b1:
            raise UsageError("phi must be defined exactly on b1")
        image = set(phi.values())
        if len(image) != q // 2 or image & b1 or not image <= set(range(q)):
            raise UsageError("phi must be a bijection from b1 onto its complement")

    @property
    def q(self) -> int:
        return self.field.order

    @property
    def b2(self) -> tuple[int, ...]:
        return tuple(sorted(set(range(self.q)) - set(self.b1)))

    def phi_of(self, b: int) -> int:
        return dict(self.phi)[b]

    @classmethod
    def canonical(cls, q: int) -> PairedLinesParams:
        """b1 = first q/2 elements, phi(b) = the element q/2 places later."""
        F = field_of_order(q)
        if F.characteristic != 2:
            raise UsageError(f"q={q} is not a power of 2")
        h = q // 2
        return cls(F, tuple(range(h)), tuple((b, b + h) for b in range(h)))

    @classmethod
    def from_mapping(cls, field: FieldSpec, phi: dict[int, int]) -> PairedLinesParams:
        return cls(field, tuple(sorted(phi)), tuple(sorted(phi.items())))


def plane_labels(q: int) -> tuple[tuple[int, int], ...]:
    return tuple((x, y) for x in range(q) for y in range(q))


def build_paired_lines(params: PairedLinesParams) -> SignedSparseMatrix:
    """Row (a, b) for a in GF(q), b in b1: -1 on line y = ax + b, +1 on y = ax + phi(b).

    Column x*q + y is the point (x, y); row a*(q/2) + j is (a, b1[j]).
    """
    F = params.field
    q = params.q
    rows, labels = [], []
    for a in range(q):
        for b in params.b1:
            pb = params.phi_of(b)
            entries = {}
            for x in range(q):
                ax = F.mul(a, x)
                entries[x * q + F.add(ax, b)] = -1
                entries[x * q + F.add(ax, pb)] = 1
            rows.append(tuple(sorted(entries.items())))
            labels.append((a, b))
    return SignedSparseMatrix(len(rows), q * q, tuple(rows),
                              column_labels=plane_labels(q), row_labels=tuple(labels))


def canonical_q_set(q: int) -> tuple[int, ...]:
    return tuple(range(1, (q - 1) // 2 + 1))


def build_all_rows(q: int, Q=None) -> SignedSparseMatrix:
    """q^2 - 1 vectors over the punctured plane GF(q)^2 \\ {(0,0)}, q an odd prime.

    Rows are v_{a,b} for b in Q, then v_{a,b} for b in -Q (a-major), then u_c.
    Column x*q + y - 1 is the point (x, y).
    """
    F = field_of_order(q)
    if F.characteristic == 2:
        raise UsageError("the all-rows family needs an odd prime q")
    Q = canonical_q_set(q) if Q is None else tuple(sorted(set(Q)))
    negQ = tuple(sorted(F.neg(b) for b in Q))
    if len(Q) != (q - 1) // 2 or 0 in Q or not set(Q) <= set(range(q)) or set(Q) & set(negQ):
        raise UsageError("Q must be (q-1)/2 nonzero elements with Q and -Q disjoint")

    def col(x, y):
        return x * q + y - 1

    rows, labels = [], []
    for kind, bs, xs in (("Q", Q, Q), ("-Q", negQ, negQ)):
        for a in range(q):
            for b in bs:
                entries = {col(0, b): 1}
                for x in xs:
                    ax = F.mul(a, x)
                    entries[col(x, F.add(ax, b))] = 1
                    entries[col(x, F.sub(ax, b))] = -1
                rows.append(tuple(sorted(entries.items())))
                labels.append((kind, a, b))
    for c in range(1, q):
        rows.append(tuple((col(c, y), 1) for y in range(q)))
        labels.append(("u", c))
    points = tuple((x, y) for x in range(q) for y in range(q) if (x, y) != (0, 0))
    return SignedSparseMatrix(len(rows), q * q - 1, tuple(rows),
                              column_labels=points, row_labels=tuple(labels))


@dataclass(frozen=True)
class DesignReport:
    support_size_min: int
    support_size_max: int
    max_pairwise_intersection: int
    orthogonal: bool
    num_vectors: int
    universe_size: int

    @property
    def ell(self) -> int:
        return self.support_size_max

    @property
    def p(self) -> int:
        return self.max_pairwise_intersection

    def as_dict(self) -> dict:
        return {
            "num_vectors": self.num_vectors,
            "universe_size": self.universe_size,
            "support_size_min": self.support_size_min,
            "support_size_max": self.support_size_max,
            "max_pairwise_intersection": self.max_pairwise_intersection,
            "orthogonal": self.orthogonal,
        }


def verify_design(m: SignedSparseMatrix) -> DesignReport:
    """Exact support sizes, pairwise intersections and inner products (int64)."""
    A = m.to_dense()
    S = np.abs(A)
    sizes = S.sum(axis=1)
    gram = A @ A.T
    inter = S @ S.T
    off = ~np.eye(m.num_rows, dtype=bool)
    return DesignReport(
        support_size_min=int(sizes.min()) if m.num_rows else 0,
        support_size_max=int(sizes.max()) if m.num_rows else 0,
        max_pairwise_intersection=int(inter[off].max()) if m.num_rows > 1 else 0,
        orthogonal=bool((gram[off] == 0).all()),
        num_vectors=m.num_rows,
        universe_size=m.num_cols,
    )
