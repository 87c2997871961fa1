"""Line-oriented circuit text format and CSV export of dense matrices.

::

    CIRCUIT v1 dimension=16 ancilla=0
    FACTOR TensorLeftIdentity copies=4
      FACTOR BMatrix q=4
    FACTOR DMatrix q=4 modulus=7 alpha=2
    FACTOR BlockDispatch selector_width=1
      BLOCK dimension=2 ancilla=0
        FACTOR Identity size=2
      BLOCK dimension=2 ancilla=0
        FACTOR PairHadamard

Children (the inner factor, dispatch blocks, controlled alphabets) are
indented two spaces under their parent.  Fields are written as ``q`` (order)
and ``modulus`` (polynomial bit-vector).
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import UsageError
from ..gf import FieldSpec
from . import ir

_INDENT = "  "


def _field_params(F: FieldSpec) -> list[str]:
    return [f"q={F.order}", f"modulus={F.modulus}"]


def _params(f) -> tuple[list[str], list]:
    """(key=value tokens, child factors)."""
    if isinstance(f, ir.Identity):
        return [f"size={f.size}"], []
    if isinstance(f, ir.TensorLeftIdentity):
        return [f"copies={f.copies}"], [f.inner]
    if isinstance(f, ir.FieldDFT):
        return _field_params(f.field), []
    if isinstance(f, ir.PairHadamard):
        return [], []
    if isinstance(f, ir.BMatrix):
        return [f"q={f.q}"], []
    if isinstance(f, ir.BStage):
        return [f"q={f.q}", f"i={f.i}"], []
    if isinstance(f, ir.DMatrix):
        return _field_params(f.field) + [f"alpha={f.alpha}"], []
    if isinstance(f, ir.FieldShiftPermutation):
        return _field_params(f.field) + [f"c={f.c}"], []
    if isinstance(f, ir.FieldScalePermutation):
        return _field_params(f.field) + [f"alpha={f.alpha}", f"k={f.k}"], []
    if isinstance(f, ir.BitHadamard):
        return [f"n={f.n}"], []
    if isinstance(f, ir.InputPhase):
        return ["signs=" + "".join("+" if s > 0 else "-" for s in f.signs)], []
    if isinstance(f, ir.IndexTranspose):
        return [f"q={f.q}"], []
    if isinstance(f, ir.BlockDispatch):
        return [f"selector_width={f.selector_width}"], list(f.blocks)
    if isinstance(f, ir.GateTableXor):
        return [f"data_dim={f.data_dim}", f"ancilla_width={f.ancilla_width}",
                "table=" + ",".join(map(str, f.table))], []
    if isinstance(f, ir.ControlledFactor):
        return [f"selector_dim={f.selector_dim}", f"data_dim={f.data_dim}",
                f"ancilla_width={f.ancilla_width}", f"offset={f.offset}",
                f"width={f.width}"], list(f.alphabet)
    raise UsageError(f"cannot serialize {type(f).__name__}")


def _emit(f, depth: int, out: list[str]) -> None:
    pad = _INDENT * depth
    if isinstance(f, ir.CircuitDescription):
        out.append(f"{pad}BLOCK dimension={f.dimension} ancilla={f.ancilla_width}")
        for g in f.factors:
            _emit(g, depth + 1, out)
        return
    tokens, children = _params(f)
    out.append(" ".join([f"{pad}FACTOR", type(f).__name__, *tokens]))
    for child in children:
        _emit(child, depth + 1, out)


def dumps(c: ir.CircuitDescription) -> str:
    out = [f"CIRCUIT v1 dimension={c.dimension} ancilla={c.ancilla_width}"]
    for f in c.factors:
        _emit(f, 0, out)
    return "\n".join(out) + "\n"


def _kv(tokens: list[str]) -> dict[str, str]:
    try:
        return dict(t.split("=", 1) for t in tokens)
    except ValueError as exc:
        raise UsageError(f"malformed parameters: {tokens}") from exc


def _field(kv) -> FieldSpec:
    q, modulus = int(kv["q"]), int(kv["modulus"])
    return FieldSpec(2, q.bit_length() - 1, modulus)


def _build(kind: str, kv: dict[str, str], children: list):
    i = int
    if kind == "Identity":
        return ir.Identity(i(kv["size"]))
    if kind == "TensorLeftIdentity":
        (inner,) = children
        return ir.TensorLeftIdentity(inner, i(kv["copies"]))
    if kind == "FieldDFT":
        return ir.FieldDFT(_field(kv))
    if kind == "PairHadamard":
        return ir.PairHadamard()
    if kind == "BMatrix":
        return ir.BMatrix(i(kv["q"]))
    if kind == "BStage":
        return ir.BStage(i(kv["q"]), i(kv["i"]))
    if kind == "DMatrix":
        return ir.DMatrix(_field(kv), i(kv["alpha"]))
    if kind == "FieldShiftPermutation":
        return ir.FieldShiftPermutation(_field(kv), i(kv["c"]))
    if kind == "FieldScalePermutation":
        return ir.FieldScalePermutation(_field(kv), i(kv["alpha"]), i(kv["k"]))
    if kind == "BitHadamard":
        return ir.BitHadamard(i(kv["n"]))
    if kind == "InputPhase":
        return ir.InputPhase(tuple(1 if ch == "+" else -1 for ch in kv["signs"]))
    if kind == "IndexTranspose":
        return ir.IndexTranspose(i(kv["q"]))
    if kind == "BlockDispatch":
        return ir.BlockDispatch(i(kv["selector_width"]), tuple(children))
    if kind == "GateTableXor":
        table = tuple(int(t) for t in kv["table"].split(",")) if kv["table"] else ()
        return ir.GateTableXor(i(kv["data_dim"]), i(kv["ancilla_width"]), table)
    if kind == "ControlledFactor":
        return ir.ControlledFactor(i(kv["selector_dim"]), i(kv["data_dim"]),
                                   i(kv["ancilla_width"]), i(kv["offset"]),
                                   i(kv["width"]), tuple(children))
    raise UsageError(f"unknown factor variant {kind!r}")


def _parse_nodes(lines: list[tuple[int, list[str]]], pos: int, depth: int):
    nodes = []
    while pos < len(lines) and lines[pos][0] == depth:
        _, tokens = lines[pos]
        head = tokens[0]
        children, pos = _parse_nodes(lines, pos + 1, depth + 1)
        kv_tokens = tokens[1:] if head == "BLOCK" else tokens[2:]
        kv = _kv(kv_tokens)
        if head == "BLOCK":
            nodes.append(ir.CircuitDescription(int(kv["dimension"]), tuple(children),
                                               int(kv["ancilla"])))
        elif head == "FACTOR" and len(tokens) >= 2:
            nodes.append(_build(tokens[1], kv, children))
        else:
            raise UsageError(f"unexpected line starting with {head!r}")
    return nodes, pos


def loads(text: str) -> ir.CircuitDescription:
    raw = [ln for ln in text.splitlines() if ln.strip()]
    if not raw or not raw[0].startswith("CIRCUIT v1 "):
        raise UsageError("missing 'CIRCUIT v1' header")
    header = _kv(raw[0].split()[2:])
    lines = []
    for ln in raw[1:]:
        stripped = ln.lstrip(" ")
        indent = len(ln) - len(stripped)
        if indent % len(_INDENT):
            raise UsageError(f"bad indentation: {ln!r}")
        lines.append((indent // len(_INDENT), stripped.split()))
    factors, pos = _parse_nodes(lines, 0, 0)
    if pos != len(lines):
        raise UsageError(f"unparsed content at line {pos + 2}")
    return ir.CircuitDescription(int(header["dimension"]), tuple(factors), int(header["ancilla"]))


def write(c: ir.CircuitDescription, path: str | Path) -> None:
    Path(path).write_text(dumps(c), encoding="ascii")


def read(path: str | Path) -> ir.CircuitDescription:
    return loads(Path(path).read_text(encoding="ascii"))


def export_csv(matrix: np.ndarray, path: str | Path) -> None:
    np.savetxt(path, matrix, delimiter=",", fmt="%.17g")
