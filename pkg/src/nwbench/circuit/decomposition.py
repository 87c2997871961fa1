"""The four-factor decomposition (I (x) B)(I (x) F) D (I (x) F^-1) and its verification."""
from __future__ import annotations

from dataclasses import dataclass
from math import isqrt, sqrt

import numpy as np

from ..construction import PairedLinesParams, SignedSparseMatrix, build_paired_lines, plane_labels
from ..errors import UsageError
from ..gf import FieldSpec, field_of_order
from .ir import (
    BlockDispatch,
    BMatrix,
    CircuitDescription,
    DMatrix,
    FieldDFT,
    FieldScalePermutation,
    FieldShiftPermutation,
    Identity,
    IndexTranspose,
    TensorLeftIdentity,
    dc_diagonal,
    materialize,
)

TOL = 1e-10


def _char2_field(q: int) -> FieldSpec:
    F = field_of_order(q)
    if F.characteristic != 2:
        raise UsageError(f"q={q} is not a power of 2")
    return F


def build_decomposition(q: int) -> tuple[CircuitDescription, frozenset[int]]:
    """Circuit for (I_q (x) B)(I_q (x) F) D (I_q (x) F^-1) plus its design rows.

    Design rows are the top halves of the q blocks: {i*q + r : r < q/2}.
    F^-1 is F itself in characteristic 2.
    """
    F = _char2_field(q)
    dft = FieldDFT(F)
    circuit = CircuitDescription(q * q, (
        TensorLeftIdentity(BMatrix(q), q),
        TensorLeftIdentity(dft, q),
        DMatrix(F, F.generator),
        TensorLeftIdentity(dft, q),
    ))
    rows = frozenset(i * q + r for i in range(q) for r in range(q // 2))
    return circuit, rows


def build_d_matrix(q: int, alpha: int | None = None) -> tuple[DMatrix, CircuitDescription]:
    """D as one factor, and D as transpose . BlockDispatch . transpose.

    Block y of the dispatch is I_q for y = 0 and, for y = alpha^k, the DFT with
    rows renamed by j -> j alpha^k.
    """
    F = _char2_field(q)
    alpha = F.generator if alpha is None else alpha
    d = DMatrix(F, alpha)
    dft = FieldDFT(F)
    logs = {F.pow(alpha, k): k for k in range(1, q)}
    blocks = [CircuitDescription(q, (Identity(q),))]
    for y in range(1, q):
        blocks.append(CircuitDescription(q, (FieldScalePermutation(F, alpha, logs[y]), dft)))
    n = q.bit_length() - 1
    lowered = CircuitDescription(q * q, (
        IndexTranspose(q),
        BlockDispatch(n, tuple(blocks)),
        IndexTranspose(q),
    ))
    return d, lowered


@dataclass(frozen=True)
class DcIdentityReport:
    """Residuals of F D_c F^-1 and F D'_c F^-1 against (1/sqrt q) S_c + gamma J.

    ``gamma`` is +(sqrt q - 1)/(q sqrt q) for D_c and -1/(q sqrt q) for D'_c,
    the values forced by the row sums F D_c F^-1 1 = D_c[0,0] 1.  The
    ``literal_*`` fields measure the alternative coefficients -(sqrt q - 1)/q
    and -1/sqrt q.
    """

    q: int
    c: int
    max_abs_error: float
    literal_max_abs_error: float

    @property
    def holds(self) -> bool:
        return self.max_abs_error < TOL

    @property
    def literal_holds(self) -> bool:
        return self.literal_max_abs_error < TOL


def verify_dc_identity(q: int, c: int) -> DcIdentityReport:
    F = _char2_field(q)
    f = materialize(FieldDFT(F))
    s = materialize(FieldShiftPermutation(F, c))
    J = np.ones((q, q))
    rq = sqrt(q)
    lhs = f @ np.diag(dc_diagonal(F, c)) @ f
    lhs_p = f @ np.diag(dc_diagonal(F, c, primed=True)) @ f
    err = max(
        np.abs(lhs - (s / rq + (rq - 1) / (q * rq) * J)).max(),
        np.abs(lhs_p - (s / rq - J / (q * rq))).max(),
    )
    literal = max(
        np.abs(lhs - (s / rq - (rq - 1) / q * J)).max(),
        np.abs(lhs_p - (s / rq - J / rq)).max(),
    )
    return DcIdentityReport(q, c, float(err), float(literal))


def orthogonality_error(m: np.ndarray) -> float:
    return float(np.abs(m.T @ m - np.eye(m.shape[0])).max())


def dft_square_error(q: int) -> float:
    f = materialize(FieldDFT(_char2_field(q)))
    return float(np.abs(f @ f - np.eye(q)).max())


def b_factorization_error(q: int) -> float:
    b = BMatrix(q)
    prod = np.eye(q)
    for stage in b.stages():
        prod = prod @ materialize(stage)
    return float(np.abs(prod - materialize(b)).max())


@dataclass(frozen=True)
class LinePair:
    row: int
    slope: int
    minus_intercept: int
    plus_intercept: int


def fit_line_pairs(matrix: np.ndarray, q: int, rows) -> list[LinePair]:
    """For each row, scale by sqrt(2q) and find (a, b, b') by exhaustive search so that
    the row is -1 on y = ax + b, +1 on y = ax + b', 0 elsewhere (column x*q + y).

    Raises ArithmeticError naming the first row that fits no line pair.
    """
    F = _char2_field(q)
    lines = {}
    for a in range(q):
        for b in range(q):
            lines[(a, b)] = frozenset(x * q + F.add(F.mul(a, x), b) for x in range(q))
    out = []
    for r in sorted(rows):
        v = matrix[r] * sqrt(2 * q)
        signs = np.rint(v)
        if np.abs(v - signs).max() > 1e-8 or not np.isin(signs, (-1, 0, 1)).all():
            raise ArithmeticError(f"row {r} is not a scaled {{0, +1, -1}} vector")
        minus = frozenset(np.flatnonzero(signs == -1).tolist())
        plus = frozenset(np.flatnonzero(signs == 1).tolist())
        found = None
        for (a, b), pts in lines.items():
            if pts == minus:
                for b2 in range(q):
                    if lines[(a, b2)] == plus:
                        found = LinePair(r, a, b, b2)
                        break
            if found:
                break
        if found is None:
            raise ArithmeticError(f"row {r} is not a pair of parallel lines")
        out.append(found)
    return out


def realized_params(pairs: list[LinePair], q: int) -> PairedLinesParams:
    """The (b1, phi) the fitted rows realize; fails if slopes do not share one phi."""
    F = _char2_field(q)
    phi: dict[int, int] = {}
    for p in pairs:
        if phi.setdefault(p.minus_intercept, p.plus_intercept) != p.plus_intercept:
            raise ArithmeticError("rows disagree on phi")
    return PairedLinesParams.from_mapping(F, phi)


def signed_matrix_from_unitary(m: np.ndarray, tol: float = 1e-9) -> SignedSparseMatrix:
    """Recover A from a row-normalized A-bar: row i times sqrt(|support|) must be +-1 on its support."""
    rows = []
    for i, row in enumerate(m):
        support = np.flatnonzero(np.abs(row) > tol)
        scaled = row[support] * sqrt(len(support))
        signs = np.rint(scaled)
        if np.abs(scaled - signs).max() > tol or not np.isin(signs, (-1, 1)).all():
            raise ArithmeticError(f"row {i} is not a scaled +-1 vector on its support")
        if np.abs(row[np.abs(row) <= tol]).max(initial=0.0) > tol:
            raise ArithmeticError(f"row {i} has entries below tolerance but nonzero")
        rows.append(tuple((int(c), int(s)) for c, s in zip(support, signs)))
    n = isqrt(m.shape[1])
    labels = plane_labels(n) if n * n == m.shape[1] else None
    return SignedSparseMatrix(m.shape[0], m.shape[1], tuple(rows), column_labels=labels)


def decomposition_signed_matrix(q: int) -> SignedSparseMatrix:
    """The {0, +1, -1} matrix A whose row normalization is the materialized decomposition."""
    circuit, _ = build_decomposition(q)
    return signed_matrix_from_unitary(materialize(circuit))


@dataclass(frozen=True)
class DecompositionCheck:
    q: int
    orthogonality_error: float
    design_rows_match: bool
    realized_phi: tuple[tuple[int, int], ...]
    dc_max_abs_error: float
    dc_literal_max_abs_error: float
    dft_square_error: float
    b_factorization_error: float
    d_lowering_error: float

    @property
    def passed(self) -> bool:
        return (self.orthogonality_error < TOL and self.design_rows_match
                and self.dc_max_abs_error < TOL and self.dft_square_error < TOL
                and self.b_factorization_error < 1e-12 and self.d_lowering_error < TOL)

    def as_dict(self) -> dict:
        return {
            "q": self.q,
            "passed": self.passed,
            "orthogonality_error": self.orthogonality_error,
            "design_rows_match": self.design_rows_match,
            "realized_phi": [list(p) for p in self.realized_phi],
            "dc_identity_max_abs_error": self.dc_max_abs_error,
            "dc_identity_literal_max_abs_error": self.dc_literal_max_abs_error,
            "dft_square_error": self.dft_square_error,
            "b_factorization_error": self.b_factorization_error,
            "d_lowering_error": self.d_lowering_error,
        }


def check_decomposition(q: int) -> DecompositionCheck:
    """Every dense identity for one q: orthogonality, row structure, D_c identities, F^2, B, D lowering."""
    circuit, rows = build_decomposition(q)
    m = materialize(circuit)
    try:
        pairs = fit_line_pairs(m, q, rows)
        params = realized_params(pairs, q)
        expected = build_paired_lines(params).to_dense()
        got = np.rint(m[sorted(rows)] * sqrt(2 * q)).astype(np.int64)
        match = {tuple(r) for r in expected} == {tuple(r) for r in got} and len(pairs) == q * q // 2
        phi = params.phi
    except ArithmeticError:
        match, phi = False, ()
    dc = [verify_dc_identity(q, c) for c in range(q)]
    d, lowered = build_d_matrix(q)
    return DecompositionCheck(
        q=q,
        orthogonality_error=orthogonality_error(m),
        design_rows_match=match,
        realized_phi=tuple(phi),
        dc_max_abs_error=max(r.max_abs_error for r in dc),
        dc_literal_max_abs_error=max(r.literal_max_abs_error for r in dc),
        dft_square_error=dft_square_error(q),
        b_factorization_error=b_factorization_error(q),
        d_lowering_error=float(np.abs(materialize(lowered) - materialize(d)).max()),
    )
