"""Command-line front end: ``nwbench <subcommand> [flags]``.

Exit status is 0 when every requested check passes, 1 when a check fails and
2 on bad arguments.  Reports are JSON (or CSV) with a fixed key order and no
timestamps, so the same configuration always produces the same bytes.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass
from fractions import Fraction
from pathlib import Path

from . import __version__
from .analysis import (
    baseline_table,
    gap_experiment,
    kwise_epsilon_exact,
    kwise_epsilon_mc,
)
from .circuit import (
    CircuitDescription,
    Identity,
    b_factorization_error,
    build_d_matrix,
    build_decomposition,
    check_decomposition,
    decomposition_signed_matrix,
    fit_line_pairs,
    gate_cost,
    lower_circuit,
    lowering_error,
    materialize,
    serialize,
    verify_dc_identity,
)
from .construction import (
    PairedLinesParams,
    SignedSparseMatrix,
    build_all_rows,
    build_paired_lines,
    verify_design,
)
from .distributions import TieRule, params_from_rows
from .errors import ResourceError, UsageError
from .gf import is_prime

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
TOL = 1e-10
LOWERING_DIM_LIMIT = 2**14


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    q: int | None = None
    construction: str = "paired-lines"
    tie: str = "fair"
    trials: int | None = None
    seed: int = 0
    rows: str = "design"
    mode: str = "exact"
    matrix: str = "decomposition"
    method: str = "exhaustive"
    k: int | None = None
    max_ell: int | None = None
    lowered: bool = False
    out: str | None = None
    format: str = "json"


def check_q(q: int, construction: str) -> None:
    if construction == "paired-lines":
        if q < 2 or q & (q - 1) or q > 256:
            raise UsageError("paired-lines needs q a power of 2 in 2..256")
    elif q < 3 or not is_prime(q):
        raise UsageError("all-rows needs q an odd prime")


def build_matrix(q: int, construction: str) -> SignedSparseMatrix:
    check_q(q, construction)
    if construction == "paired-lines":
        return build_paired_lines(PairedLinesParams.canonical(q))
    return build_all_rows(q)


def parse_rows(spec: str, N: int, design_rows) -> tuple[int, ...]:
    if spec == "all":
        return tuple(range(N))
    if spec == "design":
        if design_rows is None:
            raise UsageError("this matrix has no design rows; use --rows all or prefix:<m>")
        return tuple(sorted(design_rows))
    if spec.startswith("prefix:"):
        try:
            m = int(spec[len("prefix:"):])
        except ValueError:
            raise UsageError(f"bad row prefix {spec!r}") from None
        if not 1 <= m <= N:
            raise UsageError(f"prefix must be in 1..{N}")
        return tuple(range(m))
    raise UsageError(f"unknown row selection {spec!r}")


def _matrix_csv(m: SignedSparseMatrix) -> list[list]:
    return [["row", "col", "sign"]] + [[i, c, s] for i, r in enumerate(m.rows) for c, s in r]


def cmd_construct(cfg: RunConfig, extra) -> tuple[bool, dict, list | None]:
    m = build_matrix(cfg.q, cfg.construction)
    report = verify_design(m)
    if extra.save_matrix:
        m.write(extra.save_matrix)
    expected_p = 4 if cfg.construction == "paired-lines" else 2
    expected_ell = 2 * cfg.q if cfg.construction == "paired-lines" else cfg.q
    ok = (report.orthogonal and report.ell == expected_ell
          and report.support_size_max == expected_ell and report.p <= expected_p)
    result = {
        "design": report.as_dict(),
        "expected": {"ell": expected_ell, "p": expected_p},
        "matrix_file": extra.save_matrix,
    }
    if not extra.save_matrix:
        result["matrix"] = m.dumps()
    return ok, result, _matrix_csv(m)


def _power_of_two_q(q: int) -> None:
    if q < 2 or q & (q - 1) or q > 16:
        raise UsageError("the decomposition is built for q a power of 2 up to 16")


def cmd_decompose(cfg: RunConfig, extra) -> tuple[bool, dict, list | None]:
    _power_of_two_q(cfg.q)
    circuit, design_rows = build_decomposition(cfg.q)
    out_circuit = lower_circuit(circuit) if cfg.lowered else circuit
    if extra.save_circuit:
        serialize.write(out_circuit, extra.save_circuit)
    dense = materialize(circuit)
    pairs = fit_line_pairs(dense, cfg.q, design_rows)
    result = {
        "design_rows": sorted(design_rows),
        "row_matches": [
            {"row": p.row, "slope": p.slope, "minus_intercept": p.minus_intercept,
             "plus_intercept": p.plus_intercept}
            for p in pairs
        ],
        "all_design_rows_matched": len(pairs) == len(design_rows),
        "gate_cost": gate_cost(circuit).as_dict(),
        "circuit_file": extra.save_circuit,
    }
    if not extra.save_circuit:
        result["circuit"] = serialize.dumps(out_circuit)
    rows = [["row", "slope", "minus_intercept", "plus_intercept"]] + [
        [p.row, p.slope, p.minus_intercept, p.plus_intercept] for p in pairs
    ]
    return len(pairs) == len(design_rows), result, rows


def _verify_power_of_two(q: int) -> tuple[bool, dict]:
    _power_of_two_q(q)
    dec = check_decomposition(q)
    dc = [verify_dc_identity(q, c) for c in range(q)]
    _, d_circuit = build_d_matrix(q)
    design = verify_design(build_paired_lines(PairedLinesParams.canonical(q)))
    checks = {
        "decomposition": dec.as_dict(),
        "dc_identity_max_abs_error": max(r.max_abs_error for r in dc),
        "b_factorization_error": b_factorization_error(q),
        "design": design.as_dict(),
    }
    ok = dec.passed and checks["dc_identity_max_abs_error"] < TOL
    ok = ok and checks["b_factorization_error"] < 1e-12
    ok = ok and design.orthogonal and design.ell == 2 * q and design.p <= 4
    bd = d_circuit.factors[1]
    if bd.dim * 2 ** lower_circuit(d_circuit).ancilla_width <= LOWERING_DIM_LIMIT:
        err = lowering_error(bd)
        checks["lowering_error"] = err
        ok = ok and err < 1e-12
    else:
        checks["lowering_error"] = None
    # The alternative J coefficients -(sqrt q - 1)/q and -1/sqrt q do not match
    # the row sums of F D_c F^-1; their residual is reported but not gated.
    checks["informational"] = {
        "dc_identity_alternative_coefficients_max_abs_error": max(
            r.literal_max_abs_error for r in dc),
    }
    return ok, checks


def cmd_verify(cfg: RunConfig, extra) -> tuple[bool, dict, list | None]:
    if cfg.construction == "all-rows":
        check_q(cfg.q, "all-rows")
        rep = verify_design(build_all_rows(cfg.q))
        ok = rep.orthogonal and rep.ell == cfg.q and rep.p <= 2 and rep.num_vectors == cfg.q**2 - 1
        result = {"design": rep.as_dict()}
    else:
        ok, result = _verify_power_of_two(cfg.q)
    rows = [["check", "value"]] + [[k, v] for k, v in _flatten(result)]
    return ok, result, rows


def _flatten(d: dict, prefix: str = ""):
    for k, v in d.items():
        if isinstance(v, dict):
            yield from _flatten(v, f"{prefix}{k}.")
        else:
            yield f"{prefix}{k}", v


def _distinguish_setup(cfg: RunConfig):
    q = cfg.q
    if cfg.matrix == "identity":
        if q < 2 or q & (q - 1) or q > 16:
            raise UsageError("q must be a power of 2 up to 16")
        N = q * q
        return SignedSparseMatrix.identity(N), CircuitDescription(N, (Identity(N),)), None
    _power_of_two_q(q)
    circuit, design_rows = build_decomposition(q)
    return decomposition_signed_matrix(q), circuit, design_rows


def cmd_distinguish(cfg: RunConfig, extra) -> tuple[bool, dict, list | None]:
    A, circuit, design_rows = _distinguish_setup(cfg)
    R = parse_rows(cfg.rows, A.num_rows, design_rows)
    rep = gap_experiment(
        A, R, cfg.trials, cfg.seed, TieRule(cfg.tie),
        circuit=circuit if cfg.mode == "circuit" else None,
        parameters={"q": cfg.q, "matrix": cfg.matrix, "rows": cfg.rows},
    )
    result = rep.as_dict()
    ok = 0.0 <= rep.accept_mean_uniform <= 2 / math.sqrt(rep.N) and rep.gap > 0
    rows = [["trial", "accept_dam", "accept_uniform"]] + [
        [i, repr(float(a)), repr(float(u))]
        for i, (a, u) in enumerate(zip(rep.per_trial_dam, rep.per_trial_uniform))
    ]
    return ok, result, rows


def cmd_kwise(cfg: RunConfig, extra) -> tuple[bool, dict, list | None]:
    A = build_matrix(cfg.q, cfg.construction)
    params = params_from_rows(A, range(A.num_rows))
    tie = TieRule(cfg.tie)
    if cfg.method == "exhaustive":
        rep = kwise_epsilon_exact(params, cfg.k, tie)
    else:
        rep = kwise_epsilon_mc(params, cfg.k, cfg.trials, cfg.seed, tie)
    result = rep.as_dict()
    return rep.within_bound, result, [list(result), [_csv_value(v) for v in result.values()]]


def _csv_value(v):
    return " ".join(map(str, v)) if isinstance(v, list) else v


def cmd_baseline(cfg: RunConfig, extra) -> tuple[bool, dict, list | None]:
    if cfg.max_ell < 1:
        raise UsageError("--max-ell must be positive")
    table = baseline_table(range(1, cfg.max_ell + 1))
    odd = [r for r in table if r["ell"] % 2]
    ok = all(Fraction(r["probability"]) > Fraction(1, 2) for r in table)
    ok = ok and all(a["advantage_times_sqrt_ell"] > b["advantage_times_sqrt_ell"]
                    for a, b in zip(odd, odd[1:]))
    ok = ok and all(r["advantage_times_sqrt_ell"] >= 1 / math.sqrt(2 * math.pi) for r in odd)
    result = {"table": table, "limit_advantage_times_sqrt_ell": 1 / math.sqrt(2 * math.pi)}
    rows = [list(table[0])] + [list(r.values()) for r in table]
    return ok, result, rows


COMMANDS = {
    "construct": cmd_construct,
    "decompose": cmd_decompose,
    "verify": cmd_verify,
    "distinguish": cmd_distinguish,
    "kwise": cmd_kwise,
    "baseline": cmd_baseline,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nwbench", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"nwbench {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def common(p, q_required=True):
        if q_required:
            p.add_argument("--q", type=int, required=True)
        p.add_argument("--out", help="report path (default: standard output)")
        p.add_argument("--format", choices=["json", "csv"], default="json")

    p = sub.add_parser("construct", help="build a design matrix and its design report")
    common(p)
    p.add_argument("--construction", choices=["paired-lines", "all-rows"], default="paired-lines")
    p.add_argument("--save-matrix", help="write the matrix in the signed-sparse text format")

    p = sub.add_parser("decompose", help="emit the four-factor circuit and match its rows")
    common(p)
    p.add_argument("--lowered", action="store_true", help="emit the lowered circuit")
    p.add_argument("--save-circuit", help="write the circuit in the text format")

    p = sub.add_parser("verify", help="run every identity check for one q")
    common(p)
    p.add_argument("--construction", choices=["paired-lines", "all-rows"], default="paired-lines")

    p = sub.add_parser("distinguish", help="acceptance gap of Q_A")
    common(p)
    p.add_argument("--matrix", choices=["decomposition", "identity"], default="decomposition")
    p.add_argument("--rows", default="design", help="design | all | prefix:<m>")
    p.add_argument("--mode", choices=["exact", "circuit"], default="exact")
    p.add_argument("--tie", choices=["fair", "plus"], default="fair")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("kwise", help="almost k-wise independence of the NW-majority output")
    common(p)
    p.add_argument("--construction", choices=["paired-lines", "all-rows"], default="paired-lines")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--method", choices=["exhaustive", "mc"], default="exhaustive")
    p.add_argument("--tie", choices=["fair", "plus"], default="fair")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("baseline", help="first-bit agreement with majority")
    common(p, q_required=False)
    p.add_argument("--max-ell", type=int, default=31)
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    fields = RunConfig.__dataclass_fields__
    values = {k: v for k, v in vars(ns).items() if k in fields and v is not None}
    if ns.subcommand in ("kwise", "distinguish") and values.get("trials", 1) < 1:
        raise UsageError("--trials must be positive")
    return RunConfig(**values)


def render(cfg: RunConfig, passed: bool, result: dict, rows: list | None) -> str:
    if cfg.format == "csv":
        if rows is None:
            raise UsageError(f"{cfg.subcommand} has no CSV form")
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(rows)
        return buf.getvalue()
    report = {
        "artifact": "nwbench",
        "version": __version__,
        "config": asdict(cfg),
        "passed": passed,
        "result": result,
    }
    return json.dumps(report, indent=2) + "\n"


def main(argv: list[str] | None = None) -> int:
    try:
        ns = build_parser().parse_args(argv)
        cfg = config_from_args(ns)
        passed, result, rows = COMMANDS[cfg.subcommand](cfg, ns)
        text = render(cfg, passed, result, rows)
    except (UsageError, ResourceError) as exc:
        print(f"nwbench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)
    if not passed:
        print(f"nwbench: {cfg.subcommand}: check failed", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
