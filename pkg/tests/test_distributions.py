import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nwbench.circuit import build_decomposition, decomposition_signed_matrix
from nwbench.construction import PairedLinesParams, SignedSparseMatrix, build_paired_lines
from nwbench.distributions import (
    NWParams,
    TieRule,
    canonical_permutation,
    dam_streams,
    nw_evaluate,
    params_from_rows,
    read_packed,
    sample_dam,
    sample_dam_batch,
    sample_nw,
    sample_uniform,
    sample_uniform_batch,
    verify_nw_equivalence,
    write_packed,
)
from nwbench.errors import UsageError
from nwbench.rng import SignStream


@pytest.fixture(scope="module")
def dec4():
    _, R = build_decomposition(4)
    return decomposition_signed_matrix(4), sorted(R)


class ConstantStream:
    """Stands in for a SignStream that yields all +1, to force x = all-ones."""

    seed = 0

    def signs(self, n):
        return np.ones(n, dtype=np.int8)


class CountingStream(ConstantStream):
    def __init__(self, value):
        self.value, self.calls = value, 0

    def signs(self, n):
        self.calls += 1
        return np.full(n, self.value, dtype=np.int8)


def test_balanced_rows_tie_on_all_ones(dec4):
    A, R = dec4
    for i in R:
        assert sum(s for _, s in A.rows[i]) == 0
    coins = CountingStream(-1)
    s = sample_dam(A, R, ConstantStream(), coins, TieRule.FAIR)
    assert coins.calls == 1
    assert (s.z[R] == -1).all()  # every design row tied, so every coin was used
    s = sample_dam(A, R, ConstantStream(), CountingStream(-1), TieRule.PLUS)
    assert (s.z[R] == 1).all()


def test_sample_shapes(dec4):
    A, R = dec4
    s = sample_dam(A, R, *dam_streams(3))
    assert s.bits.shape == (32,) and set(np.unique(s.bits)) <= {-1, 1}
    assert s.source == "dam"
    u = sample_uniform(16, 3)
    assert u.bits.shape == (32,) and u.source == "uniform"


def test_empty_rows_rejected(dec4):
    A, _ = dec4
    with pytest.raises(UsageError):
        sample_dam(A, [], *dam_streams(0))
    with pytest.raises(UsageError):
        sample_dam(A, [99], *dam_streams(0))


@pytest.mark.parametrize("tie", list(TieRule))
def test_batch_matches_single(dec4, tie):
    A, R = dec4
    X, Z = sample_dam_batch(A, R, 11, 20, tie)
    for i in range(20):
        s = sample_dam(A, R, *dam_streams(11, i), tie)
        assert np.array_equal(s.x, X[i]) and np.array_equal(s.z, Z[i])
    Xu, Zu = sample_uniform_batch(16, 11, 5)
    assert np.array_equal(np.concatenate([Xu[2], Zu[2]]), sample_uniform(16, 11, 2).bits)


def test_free_rows_unbiased(dec4):
    A, R = dec4
    _, Z = sample_dam_batch(A, R, 5, 10_000)
    free = [i for i in range(16) if i not in R]
    assert np.abs(Z[:, free].mean(axis=0)).max() < 4 / np.sqrt(10_000)


def test_design_row_exactly_unbiased_q2():
    # every x and both coin values: Pr[z_i = +1] = 1/2 for each design row
    _, R = build_decomposition(2)
    A = decomposition_signed_matrix(2)
    dense = A.to_dense()
    for i in R:
        plus = 0
        for x in itertools.product((1, -1), repeat=4):
            s = int(dense[i] @ np.array(x))
            plus += 2 if s > 0 else 1 if s == 0 else 0
        assert plus == 2**4


def test_nw_single_element_sets():
    params = NWParams(((0,), (1,), (2,)), ((1,), (-1,), (1,)), 3)
    out = nw_evaluate(params, [1, 1, -1], TieRule.PLUS)
    assert out.tolist() == [1, -1, -1]


def test_nw_all_positive_odd():
    params = NWParams(((0, 1, 2), (2, 3, 4)), ((1, 1, 1), (1, 1, 1)), 5)
    assert nw_evaluate(params, [1] * 5, TieRule.FAIR, SignStream(0, "t")).tolist() == [1, 1]


def test_nw_needs_tie_stream_for_fair():
    params = NWParams(((0, 1),), ((1, 1),), 2)
    with pytest.raises(UsageError):
        nw_evaluate(params, [1, -1], TieRule.FAIR)


@pytest.mark.parametrize("bad", [
    dict(sets=((0, 1), (2,)), patterns=((1, 1), (1,)), t=3),
    dict(sets=((0, 1),), patterns=((1,),), t=2),
    dict(sets=((0, 5),), patterns=((1, 1),), t=2),
    dict(sets=((0, 0),), patterns=((1, 1),), t=2),
    dict(sets=((0, 1),), patterns=((1, 0),), t=2),
])
def test_nw_params_invariants(bad):
    with pytest.raises(UsageError):
        NWParams(**bad)


@pytest.mark.parametrize("tie", list(TieRule))
def test_nw_matches_dam_coordinates(dec4, tie):
    A, R = dec4
    params = params_from_rows(A, R)
    X, Z = sample_dam_batch(A, R, 9, 1000, tie)
    for i in range(1000):
        nw = nw_evaluate(params, X[i], tie, dam_streams(9, i)[1])
        assert np.array_equal(nw, Z[i, R])


def test_params_from_design_rows(dec4):
    A, R = dec4
    params = params_from_rows(A, R)
    assert (params.t, params.m, params.ell, params.p) == (16, 8, 8, 4)


def test_nw_outputs_exactly_unbiased_q4():
    params = params_from_rows(*_paired(4))
    seeds = np.array(list(itertools.product((1, -1), repeat=16)), dtype=np.int64)
    sums = seeds @ params.dense_patterns().T
    weight = np.where(sums > 0, 2, np.where(sums < 0, 0, 1)).sum(axis=0)
    assert (weight == 2**16).all()


def _paired(q):
    A = build_paired_lines(PairedLinesParams.canonical(q))
    return A, range(A.num_rows)


def test_verify_equivalence_passes(dec4):
    A, R = dec4
    rep = verify_nw_equivalence(A, R, params_from_rows(A, R), 2000, 1)
    assert rep.passed and rep.deterministic_mismatches == 0 and rep.free_coordinates == 8


def test_verify_equivalence_detects_wrong_patterns(dec4):
    A, R = dec4
    good = params_from_rows(A, R)
    flipped = NWParams(good.sets, (tuple(-v for v in good.patterns[0]),) + good.patterns[1:], good.t)
    rep = verify_nw_equivalence(A, R, flipped, 500, 1)
    assert not rep.passed and rep.deterministic_mismatches > 0


def test_canonical_permutation():
    assert canonical_permutation(6, {4, 1}) == (1, 4, 0, 2, 3, 5)


def test_sample_nw_layout(dec4):
    A, R = dec4
    params = params_from_rows(A, R)
    s = sample_nw(params, 16, SignStream(2, "nw"), SignStream(2, "nw-tie"))
    assert s.bits.shape == (32,) and s.source == "nw"
    assert np.array_equal(s.z[:8], nw_evaluate(params, s.x, TieRule.FAIR, SignStream(2, "nw-tie")))
    perm = canonical_permutation(16, R)
    X, Z = sample_dam_batch(A, R, 4, 1)
    nw = nw_evaluate(params, X[0], TieRule.FAIR, dam_streams(4, 0)[1])
    assert np.array_equal(Z[0][list(perm)][:8], nw)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 6), st.integers(1, 40), st.integers(0, 2**31))
def test_packed_roundtrip(tmp_path_factory, rows, cols, seed):
    bits = SignStream(seed, "pack").sign_matrix(rows, cols)
    path = tmp_path_factory.mktemp("pk") / "s.bin"
    write_packed(path, bits, {"seed": seed})
    back, meta = read_packed(path)
    assert np.array_equal(back, bits) and meta["seed"] == seed


def test_packed_layout(tmp_path):
    path = tmp_path / "s.bin"
    write_packed(path, np.array([[1, -1, -1, -1, -1, -1, -1, -1, -1, 1]]), {})
    assert path.read_bytes() == bytes([0b00000001, 0b00000010])


def test_identity_dam_forces_z_equal_x():
    A = SignedSparseMatrix.identity(4)
    X, Z = sample_dam_batch(A, range(4), 0, 50)
    assert np.array_equal(X, Z)
