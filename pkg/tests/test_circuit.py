import itertools
from math import sqrt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nwbench import gf
from nwbench.circuit import (
    BitHadamard,
    BlockDispatch,
    BMatrix,
    BStage,
    CircuitDescription,
    DMatrix,
    FieldDFT,
    FieldScalePermutation,
    FieldShiftPermutation,
    Identity,
    IndexTranspose,
    InputPhase,
    PairHadamard,
    TensorLeftIdentity,
    apply_extended,
    b_factorization_error,
    build_d_matrix,
    build_decomposition,
    decomposition_signed_matrix,
    fit_line_pairs,
    gate_cost,
    lower_block_dispatch,
    lower_circuit,
    lowering_error,
    materialize,
    realized_params,
    verify_dc_identity,
)
from nwbench.circuit import serialize
from nwbench.construction import build_paired_lines, verify_design
from nwbench.errors import ResourceError, UsageError

H2 = np.array([[1, 1], [1, -1]]) / sqrt(2)
SWAP = np.array([[0, 1], [1, 0]])


def _all_factors():
    F4, F8 = gf.gf2n(2), gf.gf2n(3)
    return [
        Identity(4),
        TensorLeftIdentity(BitHadamard(1), 2),
        FieldDFT(F4),
        FieldDFT(F8),
        PairHadamard(),
        BMatrix(8),
        BStage(8, 2),
        DMatrix(F4, 2),
        DMatrix(gf.gf2n(1), 1),
        FieldShiftPermutation(F8, 5),
        FieldScalePermutation(F8, 2, 3),
        BitHadamard(3),
        InputPhase((1, -1, -1, 1)),
        IndexTranspose(4),
        build_d_matrix(4)[1].factors[1],
    ]


def test_materialize_examples():
    assert np.allclose(materialize(TensorLeftIdentity(BitHadamard(1), 2)), np.kron(np.eye(2), H2))
    assert np.array_equal(materialize(FieldShiftPermutation(gf.gf2n(1), 1)), SWAP)
    assert np.allclose(materialize(BitHadamard(1)), H2)
    assert np.allclose(materialize(FieldDFT(gf.gf2n(1))), H2)


def test_bit_hadamard_entries():
    n = 3
    m = materialize(BitHadamard(n))
    for i, j in itertools.product(range(8), repeat=2):
        assert m[i, j] == pytest.approx((-1) ** bin(i & j).count("1") / sqrt(8))


@pytest.mark.parametrize("f", _all_factors(), ids=lambda f: type(f).__name__)
def test_every_factor_orthogonal(f):
    m = materialize(f)
    assert np.abs(m.T @ m - np.eye(f.dim)).max() < 1e-10


@pytest.mark.parametrize("f", _all_factors(), ids=lambda f: type(f).__name__)
def test_structured_apply_matches_dense(f):
    rng = np.random.default_rng(0)
    v = rng.standard_normal((f.dim, 3))
    assert np.allclose(f.apply(v), f.matrix() @ v, atol=1e-12)


def test_permutations_are_exact():
    for f in (FieldShiftPermutation(gf.gf2n(3), 6), FieldScalePermutation(gf.gf2n(3), 2, 4),
              InputPhase((1, -1)), IndexTranspose(4)):
        m = materialize(f)
        assert np.array_equal(m.T @ m, np.eye(f.dim))


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_dft_entries_and_self_inverse(n):
    F = gf.gf2n(n)
    m = materialize(FieldDFT(F))
    for x, y in itertools.product(range(F.order), repeat=2):
        tr = gf.trace(F.element(x) * F.element(y))
        assert m[x, y] == pytest.approx((-1) ** tr / sqrt(F.order))
    assert np.array_equal(m, m.T)
    assert np.abs(m @ m - np.eye(F.order)).max() < 1e-10


def test_b_matrix_rows_q4():
    expected = np.array([
        [1 / sqrt(2), 0, -1 / sqrt(2), 0],
        [0, 1 / sqrt(2), 0, -1 / sqrt(2)],
        [0.5, -0.5, 0.5, -0.5],
        [0.5, 0.5, 0.5, 0.5],
    ])
    assert np.allclose(materialize(BMatrix(4)), expected)


@pytest.mark.parametrize("q", [2, 4, 8, 16])
def test_b_factorization(q):
    assert b_factorization_error(q) < 1e-12


def test_factor_order_is_matrix_product_order():
    # PairHadamard and the swap do not commute.
    a, b = PairHadamard(), FieldShiftPermutation(gf.gf2n(1), 1)
    ma, mb = materialize(a), materialize(b)
    assert not np.allclose(ma @ mb, mb @ ma)
    c = CircuitDescription(2, (a, b))
    assert np.allclose(materialize(c), ma @ mb)
    v = np.array([1.0, 0.0])
    assert np.allclose(c.apply(v[:, None])[:, 0], ma @ (mb @ v))


def test_implicit_extension_is_kron_on_the_right():
    c = CircuitDescription(4, (PairHadamard(),))
    assert np.allclose(materialize(c), np.kron(materialize(PairHadamard()), np.eye(2)))
    v = np.arange(4.0)
    assert np.allclose(apply_extended(PairHadamard(), v), materialize(c) @ v)


def test_q2_f_factor():
    circuit, _ = build_decomposition(2)
    inner = circuit.factors[1].inner
    assert np.allclose(materialize(inner), H2)


@pytest.mark.parametrize("q", [2, 4, 8])
def test_decomposition_orthogonal(q):
    circuit, rows = build_decomposition(q)
    assert len(circuit.factors) == 4
    m = materialize(circuit)
    assert np.abs(m.T @ m - np.eye(q * q)).max() < 1e-10
    assert rows == {i * q + r for i in range(q) for r in range(q // 2)}


@pytest.mark.parametrize("q", [2, 4, 8])
def test_design_rows_are_paired_lines(q):
    circuit, rows = build_decomposition(q)
    m = materialize(circuit)
    pairs = fit_line_pairs(m, q, rows)
    assert len(pairs) == q * q // 2
    for p in pairs:  # row i*q + r has slope i
        assert p.slope == p.row // q
    params = realized_params(pairs, q)
    expected = {tuple(r) for r in build_paired_lines(params).to_dense()}
    got = {tuple(r) for r in np.rint(m[sorted(rows)] * sqrt(2 * q)).astype(int)}
    assert got == expected


def test_realized_phi_is_discovered_not_assumed():
    circuit, rows = build_decomposition(8)
    params = realized_params(fit_line_pairs(materialize(circuit), 8, rows), 8)
    # the canonical default would be b1 = {0..3}; the circuit realizes the other half
    assert set(params.b1) | set(params.b2) == set(range(8))
    assert verify_design(build_paired_lines(params)).orthogonal


@pytest.mark.parametrize("q", [2, 4, 8, 16])
def test_every_decomposition_row_is_scaled_signed(q):
    A = decomposition_signed_matrix(q)
    rep = verify_design(A)
    assert rep.orthogonal and A.num_rows == q * q


@pytest.mark.parametrize("q", [2, 4, 8, 16])
def test_dc_identities(q):
    for c in range(q):
        rep = verify_dc_identity(q, c)
        assert rep.holds
        assert rep.max_abs_error < 1e-12


def test_dc_identity_c0_by_hand_q2():
    # F D_0 F with D_0 = diag(1, 1/sqrt2): diagonal (1 + 1/sqrt2)/2, off-diagonal (1 - 1/sqrt2)/2
    f = H2
    lhs = f @ np.diag([1, 1 / sqrt(2)]) @ f
    assert lhs[0, 0] == pytest.approx((1 + 1 / sqrt(2)) / 2)
    assert lhs[0, 1] == pytest.approx((1 - 1 / sqrt(2)) / 2)
    rep = verify_dc_identity(2, 0)
    assert rep.holds and not rep.literal_holds


@pytest.mark.parametrize("q", [2, 4, 8])
def test_d_matrix_entries(q):
    F = gf.gf2n(q.bit_length() - 1)
    alpha = gf.find_generator(F)
    d = materialize(build_d_matrix(q)[0])
    for i, j in itertools.product(range(q), repeat=2):
        block = d[i * q:(i + 1) * q, j * q:(j + 1) * q]
        assert np.count_nonzero(block - np.diag(np.diag(block))) == 0
        assert block[0, 0] == (1.0 if i == j else 0.0)
        for k in range(1, q):
            slot = (alpha**k).value
            tr = gf.trace(F.element(i) * F.element(j) * alpha**k)
            assert block[slot, slot] == pytest.approx((-1) ** tr / sqrt(q))


@pytest.mark.parametrize("q", [2, 4, 8])
def test_d_lowering_matches(q):
    d, lowered = build_d_matrix(q)
    m = materialize(d)
    assert np.abs(m.T @ m - np.eye(q * q)).max() < 1e-10
    assert np.abs(materialize(lowered) - m).max() < 1e-10


def test_d_matrix_rejects_non_generator():
    with pytest.raises(UsageError):
        build_d_matrix(16, alpha=0)
    F = gf.gf2n(4)
    non_gen = next(a for a in range(2, 16) if F.multiplicative_order(a) != 15)
    with pytest.raises(UsageError):
        build_d_matrix(16, alpha=non_gen)


def test_bad_q_rejected():
    with pytest.raises(UsageError):
        build_decomposition(6)
    with pytest.raises(UsageError):
        build_decomposition(3)


def test_dense_guard():
    with pytest.raises(ResourceError):
        materialize(BitHadamard(15))


def test_ragged_dispatch_rejected():
    with pytest.raises(UsageError):
        BlockDispatch(1, (CircuitDescription(2, (Identity(2),)), CircuitDescription(4, (Identity(4),))))


# --- block-dispatch lowering -------------------------------------------------

def check_lowering_semantics(bd):
    """Exhaustive over basis states: ancilla-zero inputs map to U_i|psi>|0>."""
    lowered = lower_block_dispatch(bd)
    assert lowered.dimension == bd.dim
    A = 2**lowered.ancilla_width
    full = materialize(lowered)
    assert np.abs(full.T @ full - np.eye(full.shape[0])).max() < 1e-10
    target = materialize(bd)
    for basis in range(bd.dim):
        state = np.zeros(lowered.total_dim)
        state[basis * A] = 1.0
        out = lowered.apply(state[:, None])[:, 0].reshape(bd.dim, A)
        assert np.abs(out[:, 1:]).max(initial=0.0) < 1e-12  # ancilla restored
        assert np.allclose(out[:, 0], target[:, basis], atol=1e-12)
    # restricted to selector = i, the action is U_i
    d = bd.block_dim
    zero_anc = full[::A, ::A]
    for i, blk in enumerate(bd.blocks):
        sl = slice(i * d, (i + 1) * d)
        assert np.allclose(zero_anc[sl, sl], materialize(blk), atol=1e-12)
    return lowered


def test_lowering_single_block():
    blk = CircuitDescription(4, (FieldDFT(gf.gf2n(2)), FieldShiftPermutation(gf.gf2n(2), 1)))
    lowered = lower_block_dispatch(BlockDispatch(0, (blk,)))
    assert lowered.factors == blk.factors and lowered.ancilla_width == 0


def test_lowering_identity_and_swap():
    F2 = gf.gf2n(1)
    bd = BlockDispatch(1, (CircuitDescription(2, (Identity(2),)),
                           CircuitDescription(2, (FieldShiftPermutation(F2, 1),))))
    lowered = check_lowering_semantics(bd)
    assert lowered.ancilla_width == 1


def test_lowering_identical_blocks_needs_no_ancilla():
    blk = CircuitDescription(2, (PairHadamard(),))
    lowered = check_lowering_semantics(BlockDispatch(2, (blk,) * 4))
    assert lowered.ancilla_width == 0


@pytest.mark.parametrize("seed", range(4))
def test_lowering_random_blocks_m4(seed):
    F4 = gf.gf2n(2)
    pool = [Identity(4), FieldDFT(F4), BitHadamard(2), PairHadamard(), IndexTranspose(2),
            FieldShiftPermutation(F4, 3), FieldScalePermutation(F4, 2, 1), BMatrix(4), BStage(4, 1)]
    rng = np.random.default_rng(seed)
    blocks = []
    for _ in range(4):
        picks = rng.choice(len(pool), size=rng.integers(1, 4))
        blocks.append(CircuitDescription(4, tuple(pool[i] for i in picks)))
    check_lowering_semantics(BlockDispatch(2, tuple(blocks)))


@pytest.mark.parametrize("q", [2, 4, 8])
def test_lowered_d_dispatch_semantics(q):
    _, lowered = build_d_matrix(q)
    bd = lowered.factors[1]
    low = lower_block_dispatch(bd)
    assert low.total_dim <= 2**10
    check_lowering_semantics(bd)


@pytest.mark.parametrize("q", [2, 4])
def test_fully_lowered_decomposition(q):
    circuit, _ = build_decomposition(q)
    low = lower_circuit(circuit)
    assert low.total_dim <= 2**10
    A = 2**low.ancilla_width
    full = materialize(low)
    assert np.allclose(full[::A, ::A], materialize(circuit), atol=1e-10)
    for basis in range(q * q):
        col = full[:, basis * A].reshape(q * q, A)
        assert np.abs(col[:, 1:]).max() < 1e-12


def test_lowered_decomposition_q16_by_application():
    circuit, _ = build_decomposition(16)
    low = lower_circuit(circuit)
    A = 2**low.ancilla_width
    rng = np.random.default_rng(1)
    v = rng.standard_normal((256, 2))
    state = np.zeros((low.total_dim, 2))
    state[::A] = v
    out = low.apply(state).reshape(256, A, 2)
    assert np.abs(out[:, 1:]).max() < 1e-10
    assert np.allclose(out[:, 0], circuit.apply(v), atol=1e-10)


@pytest.mark.parametrize("q", [2, 4, 8, 16])
def test_gate_cost(q):
    circuit, _ = build_decomposition(q)
    cost = gate_cost(circuit)
    assert cost.factor_count == 4
    assert cost.lowered_factor_count >= cost.factor_count
    assert cost.ancilla_width > 0


# --- serialization -------------------------------------------------------------

@pytest.mark.parametrize("q", [2, 4, 8])
def test_serialize_roundtrip(q):
    circuit, _ = build_decomposition(q)
    for c in (circuit, build_d_matrix(q)[1], lower_circuit(circuit)):
        text = serialize.dumps(c)
        back = serialize.loads(text)
        assert back == c
        assert serialize.dumps(back) == text


def test_serialize_layout():
    text = serialize.dumps(build_decomposition(2)[0])
    lines = text.splitlines()
    assert lines[0] == "CIRCUIT v1 dimension=4 ancilla=0"
    assert lines[1] == "FACTOR TensorLeftIdentity copies=2"
    assert lines[2] == "  FACTOR BMatrix q=2"
    assert lines[5] == "FACTOR DMatrix q=2 modulus=3 alpha=1"


def test_serialize_input_phase():
    c = CircuitDescription(4, (InputPhase((1, -1, -1, 1)),))
    assert "signs=+--+" in serialize.dumps(c)
    assert serialize.loads(serialize.dumps(c)) == c


@pytest.mark.parametrize("text", ["", "CIRCUIT v1 dimension=2 ancilla=0\nFACTOR Bogus\n",
                                  "CIRCUIT v1 dimension=2 ancilla=0\n FACTOR PairHadamard\n"])
def test_serialize_rejects(text):
    with pytest.raises(UsageError):
        serialize.loads(text)


def test_csv_export(tmp_path):
    m = materialize(BMatrix(4))
    serialize.export_csv(m, tmp_path / "b.csv")
    back = np.loadtxt(tmp_path / "b.csv", delimiter=",")
    assert np.array_equal(back, m)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**16 - 1))
def test_tensor_left_identity_apply(n_copies_log, seed):
    inner = FieldDFT(gf.gf2n(2))
    f = TensorLeftIdentity(inner, 2**n_copies_log)
    v = np.random.default_rng(seed).standard_normal((f.dim, 2))
    assert np.allclose(f.apply(v), np.kron(np.eye(2**n_copies_log), materialize(inner)) @ v)


@pytest.mark.parametrize("q", [2, 4, 8])
def test_lowering_error_zero_for_d_dispatch(q):
    _, c = build_d_matrix(q)
    assert lowering_error(c.factors[1]) < 1e-12


def test_lowering_error_detects_wrong_lowering():
    _, c = build_d_matrix(4)
    bd = c.factors[1]
    good = lower_block_dispatch(bd)
    broken = CircuitDescription(good.dimension, good.factors[:-1], good.ancilla_width)
    assert lowering_error(bd, broken) > 0.5
