"""The distinguisher Q_A in two modes.

Exact mode evaluates the closed form ((1/N) sum_i z_i (A-bar x)_i)^2, which is
the squared amplitude at 0^n after the final Hadamard.  Circuit mode runs a
real statevector through: uniform superposition, phase x, circuit factors,
phase z, Hadamard, and reads the same amplitude.
"""
from __future__ import annotations

from functools import lru_cache
from typing import Iterator

import numpy as np

from .circuit.ir import BitHadamard, CircuitDescription, InputPhase, apply_extended
from .construction import SignedSparseMatrix, verify_design
from .errors import UsageError

NORM_TOL = 1e-9


def as_signs(x, n: int | None = None) -> np.ndarray:
    """Validate a sign string (entries in {+1, -1}) and return it as int8."""
    arr = np.asarray(x)
    if arr.ndim != 1 or not np.isin(arr, (1, -1)).all():
        raise UsageError("sign strings must be 1-d with entries in {+1, -1}")
    if n is not None and arr.size != n:
        raise UsageError(f"expected length {n}, got {arr.size}")
    return arr.astype(np.int8)


@lru_cache(maxsize=16)
def normalized_dense(A: SignedSparseMatrix) -> np.ndarray:
    """A-bar: row i of A scaled by 1/sqrt(|support_i|).  A must be square with orthogonal rows."""
    if A.num_rows != A.num_cols:
        raise UsageError("A must be square")
    n = A.num_rows
    if n & (n - 1):
        raise UsageError("dimension must be a power of 2")
    if any(len(r) == 0 for r in A.rows):
        raise UsageError("A has a zero-support row")
    if not verify_design(A).orthogonal:
        raise UsageError("rows of A are not pairwise orthogonal")
    dense = A.to_dense().astype(float)
    return dense / np.sqrt(np.abs(dense).sum(axis=1, keepdims=True))


def acceptance_from_dense(X: np.ndarray, Z: np.ndarray, abar: np.ndarray) -> np.ndarray:
    """Vectorized exact acceptance for rows of X, Z (shape (trials, N))."""
    N = abar.shape[0]
    amp = np.einsum("ti,ti->t", Z.astype(float), X.astype(float) @ abar.T) / N
    return amp**2


def run_qa_exact(x, z, A: SignedSparseMatrix) -> float:
    abar = normalized_dense(A)
    N = abar.shape[0]
    x, z = as_signs(x, N), as_signs(z, N)
    return float(acceptance_from_dense(x[None], z[None], abar)[0])


def evolve(x, z, c: CircuitDescription) -> Iterator[tuple[str, np.ndarray]]:
    """Yield (step, state) after each stage of Q_A.  Ancilla starts and is read at zero."""
    N = c.dimension
    n = N.bit_length() - 1
    x, z = as_signs(x, N), as_signs(z, N)
    A = 2**c.ancilla_width
    state = np.zeros(c.total_dim)
    state[::A] = 1.0 / np.sqrt(N)
    yield "uniform", state
    state = apply_extended(InputPhase(tuple(int(s) for s in x)), state)
    yield "phase_x", state
    for i, f in enumerate(reversed(c.factors)):
        state = apply_extended(f, state)
        yield f"factor[{len(c.factors) - 1 - i}]:{type(f).__name__}", state
    state = apply_extended(InputPhase(tuple(int(s) for s in z)), state)
    yield "phase_z", state
    state = apply_extended(BitHadamard(n), state)
    yield "hadamard", state


def run_qa_circuit(x, z, c: CircuitDescription) -> float:
    """Probability that the data register reads 0^n (summed over ancilla values)."""
    if len(np.asarray(x)) != c.dimension or len(np.asarray(z)) != c.dimension:
        raise UsageError("x and z must match the circuit dimension")
    for step, state in evolve(x, z, c):
        norm = np.linalg.norm(state)
        if abs(norm - 1.0) > NORM_TOL:
            raise ArithmeticError(f"state norm {norm} after {step}")
    A = 2**c.ancilla_width
    return float(np.sum(state[:A] ** 2))
