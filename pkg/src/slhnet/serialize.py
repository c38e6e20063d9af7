"""JSON encoding of triples and operators.

Operators are ``d x d`` nested lists of ``[re, im]`` pairs, so decoding
reproduces the original arrays bit for bit.
"""
from __future__ import annotations

import json
from typing import Any, Sequence

import numpy as np

from .hilbert import Operator, OperatorMatrix, Registry, SpaceFactor
from .slh import SLH

FORMAT = "slhnet.triple/1"


def array_to_json(a: np.ndarray) -> list:
    a = np.asarray(a, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def array_from_json(obj: Sequence) -> np.ndarray:
    a = np.asarray(obj, dtype=float)
    if a.ndim != 3 or a.shape[-1] != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("operator must be a square array of [re, im] pairs")
    return a[..., 0] + 1j * a[..., 1]


def spaces_to_json(signature: Sequence[SpaceFactor]) -> list[dict]:
    return [{"label": f.label, "kind": f.kind, "dim": f.dim} for f in signature]


def spaces_from_json(items: Sequence[dict], registry: Registry | None = None) -> tuple[SpaceFactor, ...]:
    reg = Registry() if registry is None else registry
    return tuple(reg.register(it["label"], it["kind"], int(it["dim"])) for it in items)


def operator_to_json(op: Operator) -> list:
    return array_to_json(op.data)


def triple_to_json(g: SLH, chain_report: dict | None = None) -> dict[str, Any]:
    n = g.n
    out = {
        "format": FORMAT,
        "spaces": spaces_to_json(g.signature),
        "channels": n,
        "S": [[array_to_json(g.S.data[i, j]) for j in range(n)] for i in range(n)],
        "L": [array_to_json(g.L.data[i, 0]) for i in range(n)],
        "H": array_to_json(g.H.data),
    }
    if chain_report is not None:
        out["chain_report"] = chain_report
    return out


def triple_from_json(obj: dict | str, registry: Registry | None = None) -> SLH:
    """Inverse of :func:`triple_to_json` (accepts the dict or its JSON text)."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    if obj.get("format") != FORMAT:
        raise ValueError(f"expected format {FORMAT!r}")
    sig = spaces_from_json(obj["spaces"], registry)
    n = int(obj["channels"])
    d = int(np.prod([f.dim for f in sig])) if sig else 1
    S = np.zeros((n, n, d, d), dtype=complex)
    L = np.zeros((n, 1, d, d), dtype=complex)
    for i in range(n):
        L[i, 0] = array_from_json(obj["L"][i])
        for j in range(n):
            S[i, j] = array_from_json(obj["S"][i][j])
    H = array_from_json(obj["H"])
    return SLH(OperatorMatrix(S, sig), OperatorMatrix(L, sig), Operator(H, sig), validate=False)
