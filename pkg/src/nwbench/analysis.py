"""Almost k-wise independence, the acceptance gap of Q_A, and the first-bit baseline."""
from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .circuit.ir import CircuitDescription
from .construction import SignedSparseMatrix
from .distributions import (
    NWParams,
    TieRule,
    check_rows,
    sample_dam_batch,
    sample_uniform_batch,
)
from .errors import ResourceError, UsageError
from .rng import SignStream
from .sim import acceptance_from_dense, normalized_dense, run_qa_circuit

EXHAUSTIVE_LIMIT = 20
MAX_K = 4
MIN_MC_TRIALS = 10_000
MIN_GAP_TRIALS = 1_000
# Bound constant c in epsilon <= c * p * k^2 / sqrt(ell): twice the central
# binomial ratio sqrt(2/pi), checked against exhaustive enumeration at q=4.
KWISE_CONSTANT = 2 * math.sqrt(2 / math.pi)


def kwise_bound(p: int, k: int, ell: int) -> float:
    return KWISE_CONSTANT * p * k * k / math.sqrt(ell)


@dataclass(frozen=True)
class KWiseReport:
    k: int
    epsilon_measured: float
    bound_value: float
    worst_index_tuple: tuple[int, ...]
    worst_assignment: tuple[int, ...]
    method: str
    trials: int | None
    standard_error: float
    tie: str
    t: int
    m: int
    ell: int
    p: int

    @property
    def within_bound(self) -> bool:
        return self.epsilon_measured <= self.bound_value

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "epsilon_measured": self.epsilon_measured,
            "bound_value": self.bound_value,
            "bound_constant": KWISE_CONSTANT,
            "within_bound": self.within_bound,
            "worst_index_tuple": list(self.worst_index_tuple),
            "worst_assignment": list(self.worst_assignment),
            "method": self.method,
            "trials": self.trials,
            "standard_error": self.standard_error,
            "tie": self.tie,
            "t": self.t,
            "m": self.m,
            "ell": self.ell,
            "p": self.p,
        }


def _all_seeds(t: int) -> np.ndarray:
    """All 2^t seeds as rows of signs; row r has bit j of r set <=> x_j = -1."""
    r = np.arange(2**t, dtype=np.int64)[:, None]
    return (1 - 2 * ((r >> np.arange(t)) & 1)).astype(np.int8)


def _plus_weights(params: NWParams, X: np.ndarray, tie: TieRule, coins=None) -> np.ndarray:
    """2 * Pr[coordinate = +1 | x] for the t seed bits followed by the m outputs.

    Values are integers in {0, 1, 2}; 1 only for a fair-coin tie that is not
    sampled (``coins`` is None).
    """
    sums = X.astype(np.int64) @ params.dense_patterns().T
    out = np.where(sums > 0, 2, np.where(sums < 0, 0, 1))
    zero = sums == 0
    if tie is TieRule.PLUS:
        out[zero] = 2
    elif coins is not None:
        out[zero] = np.where(coins[zero] > 0, 2, 0)
    return np.concatenate([np.where(X > 0, 2, 0), out], axis=1).astype(np.int64)


def _cell_columns(W: np.ndarray, size: int):
    """Products of weight columns over every increasing index tuple and sign assignment."""
    n = W.shape[1]
    keys, cols = [], []
    for idx in itertools.combinations(range(n), size):
        for assign in itertools.product((1, -1), repeat=size):
            v = np.ones(W.shape[0], dtype=np.int64)
            for i, a in zip(idx, assign):
                v = v * (W[:, i] if a > 0 else 2 - W[:, i])
            keys.append((idx, assign))
            cols.append(v)
    return keys, np.stack(cols, axis=1)


def _cell_sums(W: np.ndarray, k: int, chunk: int = 4096) -> tuple[list, np.ndarray]:
    """Sum over rows of the weight product for every k-tuple/assignment.

    The tuple is split into a left half and a right half whose column products
    are combined with one matrix product; only pairs whose left indices all
    precede the right indices are kept, so each k-subset appears once.
    """
    if k == 1:
        keys, cols = _cell_columns(W, 1)
        return keys, cols.sum(axis=0)
    left_size = (k + 1) // 2
    lkeys, _ = _cell_columns(W[:1], left_size)
    rkeys, _ = _cell_columns(W[:1], k - left_size)
    G = np.zeros((len(lkeys), len(rkeys)), dtype=np.int64)
    for start in range(0, W.shape[0], chunk):
        part = W[start:start + chunk]
        _, L = _cell_columns(part, left_size)
        _, Rc = _cell_columns(part, k - left_size)
        # entries stay below 2^53, so float64 products are exact
        G += np.rint(L.astype(np.float64).T @ Rc.astype(np.float64)).astype(np.int64)
    keys, sums = [], []
    for a, (li, la) in enumerate(lkeys):
        for b, (ri, ra) in enumerate(rkeys):
            if li[-1] < ri[0]:
                keys.append((li + ri, la + ra))
                sums.append(G[a, b])
    return keys, np.array(sums, dtype=np.int64)


def _check_k(params: NWParams, k: int) -> None:
    if not 1 <= k <= MAX_K:
        raise UsageError(f"k must be in 1..{MAX_K}")
    if k > params.t + params.m:
        raise UsageError("k exceeds the number of coordinates")


def kwise_epsilon_exact(params: NWParams, k: int, tie: TieRule = TieRule.FAIR) -> KWiseReport:
    """Exact epsilon over all seeds, all k-tuples of the t + m coordinates and all assignments.

    Pr[tuple = assignment] * 2^k = (sum over seeds of prod 2*Pr[coord = value | x]) / 2^t,
    computed in integers; fair-coin ties contribute weight 1 for each value.
    """
    _check_k(params, k)
    if params.t > EXHAUSTIVE_LIMIT:
        raise ResourceError(f"exhaustive mode needs t <= {EXHAUSTIVE_LIMIT}, got {params.t}")
    W = _plus_weights(params, _all_seeds(params.t), tie)
    keys, sums = _cell_sums(W, k)
    dev = np.abs(sums - 2**params.t)
    worst = int(np.argmax(dev))
    return KWiseReport(
        k=k,
        epsilon_measured=float(Fraction(int(dev[worst]), 2**params.t)),
        bound_value=kwise_bound(params.p, k, params.ell),
        worst_index_tuple=keys[worst][0],
        worst_assignment=keys[worst][1],
        method="exhaustive",
        trials=None,
        standard_error=0.0,
        tie=tie.value,
        t=params.t,
        m=params.m,
        ell=params.ell,
        p=params.p,
    )


def _check_tuple(params: NWParams, indices, assignment) -> tuple[tuple[int, ...], tuple[int, ...]]:
    indices, assignment = tuple(indices), tuple(assignment)
    if len(set(indices)) != len(indices):
        raise UsageError("k-tuple indices must be distinct")
    if len(indices) != len(assignment) or any(a not in (1, -1) for a in assignment):
        raise UsageError("assignment must give one sign per index")
    if any(not 0 <= i < params.t + params.m for i in indices):
        raise UsageError("index out of range")
    return indices, assignment


def cell_ratio_exact(params: NWParams, indices, assignment, tie: TieRule = TieRule.FAIR) -> Fraction:
    """Pr[coords = assignment] / 2^-k by direct enumeration, one cell at a time."""
    indices, assignment = _check_tuple(params, indices, assignment)
    if params.t > EXHAUSTIVE_LIMIT:
        raise ResourceError(f"exhaustive mode needs t <= {EXHAUSTIVE_LIMIT}")
    W = _plus_weights(params, _all_seeds(params.t), tie)
    v = np.ones(W.shape[0], dtype=np.int64)
    for i, a in zip(indices, assignment):
        v *= W[:, i] if a > 0 else 2 - W[:, i]
    return Fraction(int(v.sum()), 2**params.t)


def _mc_weights(params: NWParams, trials: int, seed: int, tie: TieRule) -> np.ndarray:
    X = SignStream(seed, "kwise").sign_matrix(trials, params.t)
    coins = SignStream(seed, "kwise-tie").sign_matrix(trials, params.m)
    return _plus_weights(params, X, tie, coins)


def kwise_epsilon_mc(params: NWParams, k: int, trials: int, seed: int,
                     tie: TieRule = TieRule.FAIR) -> KWiseReport:
    """Monte Carlo epsilon; ties are sampled, so every weight is 0 or 2.

    ``standard_error`` is the binomial standard error of the ratio at the
    reported worst cell.
    """
    _check_k(params, k)
    if trials < MIN_MC_TRIALS:
        raise UsageError(f"Monte Carlo mode needs at least {MIN_MC_TRIALS} trials")
    W = _mc_weights(params, trials, seed, tie)
    keys, sums = _cell_sums(W, k)
    # sums / trials = 2^k * empirical frequency
    ratio = sums / trials
    dev = np.abs(ratio - 1)
    worst = int(np.argmax(dev))
    freq = ratio[worst] / 2**k
    return KWiseReport(
        k=k,
        epsilon_measured=float(dev[worst]),
        bound_value=kwise_bound(params.p, k, params.ell),
        worst_index_tuple=keys[worst][0],
        worst_assignment=keys[worst][1],
        method="monte-carlo",
        trials=trials,
        standard_error=float(2**k * math.sqrt(freq * (1 - freq) / trials)),
        tie=tie.value,
        t=params.t,
        m=params.m,
        ell=params.ell,
        p=params.p,
    )


def cell_ratio_mc(params: NWParams, indices, assignment, trials: int, seed: int,
                  tie: TieRule = TieRule.FAIR) -> tuple[float, float]:
    """(ratio estimate, standard error) for a single cell, on the kwise_epsilon_mc streams."""
    indices, assignment = _check_tuple(params, indices, assignment)
    W = _mc_weights(params, trials, seed, tie)
    hits = np.ones(trials, dtype=bool)
    for i, a in zip(indices, assignment):
        hits &= (W[:, i] == 2) if a > 0 else (W[:, i] == 0)
    freq = hits.mean()
    k = len(indices)
    return float(2**k * freq), float(2**k * math.sqrt(freq * (1 - freq) / trials))


@dataclass(frozen=True)
class GapReport:
    accept_mean_dam: float
    accept_mean_uniform: float
    halfwidth_dam: float
    halfwidth_uniform: float
    trials: int
    mode: str
    tie: str
    seed: int
    N: int
    rows: tuple[int, ...]
    parameters: dict = field(default_factory=dict)
    per_trial_dam: np.ndarray = field(default=None, repr=False, compare=False)
    per_trial_uniform: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def gap(self) -> float:
        return self.accept_mean_dam - self.accept_mean_uniform

    def as_dict(self) -> dict:
        return {
            "accept_mean_dam": self.accept_mean_dam,
            "accept_mean_uniform": self.accept_mean_uniform,
            "gap": self.gap,
            "confidence_halfwidth_dam": self.halfwidth_dam,
            "confidence_halfwidth_uniform": self.halfwidth_uniform,
            "confidence_level": 0.95,
            "trials": self.trials,
            "mode": self.mode,
            "tie": self.tie,
            "seed": self.seed,
            "N": self.N,
            "rows": list(self.rows),
            "uniform_bound": 2 / math.sqrt(self.N),
            "parameters": self.parameters,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2) + "\n"

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["trial", "accept_dam", "accept_uniform"])
            for i, (a, u) in enumerate(zip(self.per_trial_dam, self.per_trial_uniform)):
                w.writerow([i, repr(float(a)), repr(float(u))])


def _halfwidth(values: np.ndarray) -> float:
    return float(1.96 * values.std(ddof=1) / math.sqrt(values.size))


def gap_experiment(A: SignedSparseMatrix, R, trials: int, seed: int,
                   tie: TieRule = TieRule.FAIR, circuit: CircuitDescription | None = None,
                   parameters: dict | None = None) -> GapReport:
    """Mean acceptance of Q_A under D_{A,M} and under the uniform distribution.

    With ``circuit`` set every trial runs the statevector simulator on it;
    otherwise the closed form is used.  Trial i draws from streams keyed by
    (seed, i) in both modes, so the two modes see the same samples.
    """
    if trials < MIN_GAP_TRIALS:
        raise UsageError(f"gap experiment needs at least {MIN_GAP_TRIALS} trials")
    rows = check_rows(A, R)
    abar = normalized_dense(A)
    N = A.num_cols
    if circuit is not None and circuit.dimension != N:
        raise UsageError("circuit dimension does not match A")
    X, Z = sample_dam_batch(A, rows, seed, trials, tie)
    Xu, Zu = sample_uniform_batch(N, seed, trials)
    if circuit is None:
        dam = acceptance_from_dense(X, Z, abar)
        uni = acceptance_from_dense(Xu, Zu, abar)
    else:
        dam = np.array([run_qa_circuit(x, z, circuit) for x, z in zip(X, Z)])
        uni = np.array([run_qa_circuit(x, z, circuit) for x, z in zip(Xu, Zu)])
    return GapReport(
        accept_mean_dam=float(dam.mean()),
        accept_mean_uniform=float(uni.mean()),
        halfwidth_dam=_halfwidth(dam),
        halfwidth_uniform=_halfwidth(uni),
        trials=trials,
        mode="exact" if circuit is None else "circuit",
        tie=tie.value,
        seed=seed,
        N=N,
        rows=rows,
        parameters=dict(parameters or {}),
        per_trial_dam=dam,
        per_trial_uniform=uni,
    )


def baseline_first_bit(ell: int) -> Fraction:
    """Pr[x_1 = majority(x)] for uniform x in {+1,-1}^ell.

    Odd ell uses 1/2 + C(ell-1, (ell-1)/2) / 2^ell.  Even ell breaks ties with a
    fair coin and sums over the number j of +1 among x_2..x_ell given x_1 = +1.
    """
    if ell < 1:
        raise UsageError("ell must be positive")
    if ell % 2:
        return Fraction(1, 2) + Fraction(math.comb(ell - 1, (ell - 1) // 2), 2**ell)
    total = Fraction(0)
    for j in range(ell):
        plus = 1 + j
        if 2 * plus > ell:
            win = Fraction(1)
        elif 2 * plus == ell:
            win = Fraction(1, 2)
        else:
            win = Fraction(0)
        total += Fraction(math.comb(ell - 1, j), 2 ** (ell - 1)) * win
    return total


def baseline_table(ells) -> list[dict]:
    out = []
    for ell in ells:
        v = baseline_first_bit(ell)
        adv = v - Fraction(1, 2)
        out.append({
            "ell": ell,
            "probability": str(v),
            "probability_float": float(v),
            "advantage_times_sqrt_ell": float(adv) * math.sqrt(ell),
        })
    return out
