"""Block-dispatch lowering with a gate table held in ancilla.

The procedure for a dispatch over M blocks: pad every block to a common
length L (oblivious form), XOR the per-block gate table f(i) into the
ancilla, run L steps that each apply the gate selected by one ancilla field,
then XOR f(i) again to return the ancilla to zero.  Steps whose gate is the
same in every block need no ancilla and are applied unconditionally.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import UsageError
from .decomposition import build_d_matrix
from .ir import (
    BlockDispatch,
    BMatrix,
    BStage,
    CircuitDescription,
    ControlledFactor,
    DMatrix,
    Factor,
    GateTableXor,
    Identity,
    TensorLeftIdentity,
    materialize,
)


def _factor_list(block) -> tuple:
    if isinstance(block, CircuitDescription):
        if block.ancilla_width:
            raise UsageError("dispatch blocks must not use ancilla")
        return block.factors
    return (block,)


def lower_block_dispatch(bd: BlockDispatch) -> CircuitDescription:
    """Circuit over (selector, data, ancilla) acting as |i>|psi>|0> -> |i>(U_i|psi>)|0>."""
    M, d = len(bd.blocks), bd.block_dim
    lists = [_factor_list(b) for b in bd.blocks]
    if M == 1:
        return CircuitDescription(d, lists[0])
    L = max(len(fl) for fl in lists)
    lists = [tuple(fl) + (Identity(d),) * (L - len(fl)) for fl in lists]

    steps = []  # (alphabet, per-block code)
    for step in range(L):
        alphabet: list[Factor] = []
        codes = []
        for fl in lists:
            f = fl[step]
            if f not in alphabet:
                alphabet.append(f)
            codes.append(alphabet.index(f))
        steps.append((tuple(alphabet), codes))

    widths = [(len(a) - 1).bit_length() for a, _ in steps]
    w = sum(widths)
    if w == 0:
        return CircuitDescription(M * d, tuple(TensorLeftIdentity(a[0], M) for a, _ in steps))

    offsets, off = [], 0
    for width in widths:
        offsets.append(off)
        off += width
    table = tuple(
        sum(codes[i] << o for (_, codes), o in zip(steps, offsets)) for i in range(M)
    )
    xor = GateTableXor(d, w, table)
    body = []
    for (alphabet, _), o, width in zip(steps, offsets, widths):
        if width == 0:
            body.append(TensorLeftIdentity(alphabet[0], M))
        else:
            body.append(ControlledFactor(M, d, w, o, width, alphabet))
    return CircuitDescription(M * d, (xor, *body, xor), ancilla_width=w)


def lower_factor(f: Factor) -> CircuitDescription:
    """Expand one factor down to leaf factors plus dispatch machinery."""
    if isinstance(f, CircuitDescription):
        return lower_circuit(f)
    if isinstance(f, BlockDispatch):
        return lower_block_dispatch(f)
    if isinstance(f, DMatrix):
        _, lowered = build_d_matrix(f.field.order, f.alpha)
        return lower_circuit(lowered)
    if isinstance(f, BMatrix):
        return lower_circuit(CircuitDescription(f.q, tuple(f.stages())))
    if isinstance(f, BStage):
        return lower_block_dispatch(f.as_block_dispatch())
    if isinstance(f, TensorLeftIdentity):
        inner = lower_factor(f.inner)
        wrapped = tuple(TensorLeftIdentity(g, f.copies) for g in inner.factors)
        return CircuitDescription(f.dim, wrapped, inner.ancilla_width)
    return CircuitDescription(f.dim, (f,))


def lower_circuit(c: CircuitDescription) -> CircuitDescription:
    """Lower every factor.  Each piece keeps its ancilla in the top bits of a shared
    ancilla register sized for the widest piece."""
    if c.ancilla_width:
        raise UsageError("circuit is already lowered")
    pieces = []
    for f in c.factors:
        if f.dim != c.dimension:
            pieces.append(CircuitDescription(c.dimension, (f,)))  # leaf below full width
        else:
            pieces.append(lower_factor(f))
    w = max((p.ancilla_width for p in pieces), default=0)
    return CircuitDescription(c.dimension, tuple(g for p in pieces for g in p.factors), w)


@dataclass(frozen=True)
class GateCostReport:
    factor_count: int
    lowered_factor_count: int
    ancilla_width: int

    def as_dict(self) -> dict:
        return {
            "factor_count": self.factor_count,
            "lowered_factor_count": self.lowered_factor_count,
            "ancilla_width": self.ancilla_width,
        }


def gate_cost(c: CircuitDescription) -> GateCostReport:
    lowered = lower_circuit(c)
    return GateCostReport(len(c.factors), len(lowered.factors), lowered.ancilla_width)


def lowering_error(bd: BlockDispatch, lowered: CircuitDescription | None = None) -> float:
    """Largest deviation of the lowered dispatch from block-diagonal semantics.

    Every basis state |i>|psi>|0> is run through the lowered circuit; the result
    must equal (U_i|psi>)|0>, so both wrong data amplitudes and leftover
    ancilla amplitude count as error.
    """
    if lowered is None:
        lowered = lower_block_dispatch(bd)
    A = 2**lowered.ancilla_width
    target = materialize(bd)
    states = np.zeros((lowered.total_dim, bd.dim))
    states[np.arange(bd.dim) * A, np.arange(bd.dim)] = 1.0
    out = lowered.apply(states).reshape(bd.dim, A, bd.dim)
    err = np.abs(out[:, 0, :] - target).max()
    return float(max(err, np.abs(out[:, 1:, :]).max(initial=0.0)))
