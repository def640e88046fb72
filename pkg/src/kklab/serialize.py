"""JSON form of matrices, cycles, certificates and averaging data.

Complex entries are ``[re, im]`` pairs.  Floats go through ``repr`` in the
standard ``json`` module, so a dump/load round trip is bit exact.
"""

from __future__ import annotations

import json
from typing import Any, Dict

import numpy as np

from .averaging import AveragingData
from .cycles import ControlData, EvenCycle, HomotopyCertificate, LoopCycle, OddCycle
from .matcore import AugMatrix

SCHEMA = 1


def _array(a: np.ndarray) -> Dict[str, Any]:
    a = np.asarray(a, dtype=np.complex128)
    pairs = np.stack([a.real, a.imag], axis=-1)
    return {"shape": list(a.shape), "data": pairs.reshape(-1, 2).tolist()}


def _unarray(d: Dict[str, Any]) -> np.ndarray:
    pairs = np.asarray(d["data"], dtype=np.float64).reshape(-1, 2)
    out = np.empty(len(pairs), dtype=np.complex128)
    out.real, out.imag = pairs[:, 0], pairs[:, 1]     # keeps signed zeros
    return out.reshape(d["shape"])


def to_obj(x) -> Dict[str, Any]:
    """Tagged plain-data form of a supported object."""
    if isinstance(x, AugMatrix):
        return {"type": "aug", "n": x.n, "N": x.N,
                "scalar": _array(x.scalar), "finite": _array(x.finite)}
    if isinstance(x, np.ndarray):
        return {"type": "array", **_array(x)}
    if isinstance(x, ControlData):
        return {"type": "control", "kappa": float(x.kappa), "eps": float(x.eps),
                "X": [to_obj(a) for a in x.X]}
    if isinstance(x, EvenCycle):
        return {"type": "even", "p": to_obj(x.p), "q": to_obj(x.q)}
    if isinstance(x, OddCycle):
        return {"type": "odd", "u": to_obj(x.u), "u_inv": to_obj(x.u_inv)}
    if isinstance(x, LoopCycle):
        return {"type": "loop", "kind": x.kind, "samples": [to_obj(s) for s in x.samples]}
    if isinstance(x, HomotopyCertificate):
        return {"type": "certificate", "ctrl": to_obj(x.ctrl),
                "relaxation": [float(v) for v in x.relaxation],
                "ts": [float(t) for t in x.ts],
                "step_radii": [float(r) for r in x.step_radii],
                "samples": [to_obj(s) for s in x.samples]}
    if isinstance(x, AveragingData):
        return {"type": "averaging", "t": list(x.t), "defect": float(x.defect),
                "a": [to_obj(a) for a in x.a]}
    raise TypeError(f"cannot serialize {type(x).__name__}")


def from_obj(d: Dict[str, Any]):
    kind = d.get("type")
    if kind == "aug":
        return AugMatrix(_unarray(d["scalar"]), _unarray(d["finite"]))
    if kind == "array":
        return _unarray(d)
    if kind == "control":
        return ControlData(tuple(from_obj(a) for a in d["X"]), d["kappa"], d["eps"])
    if kind == "even":
        return EvenCycle(from_obj(d["p"]), from_obj(d["q"]))
    if kind == "odd":
        return OddCycle(from_obj(d["u"]), from_obj(d["u_inv"]))
    if kind == "loop":
        return LoopCycle(tuple(from_obj(s) for s in d["samples"]), d["kind"])
    if kind == "certificate":
        return HomotopyCertificate(tuple(from_obj(s) for s in d["samples"]), from_obj(d["ctrl"]),
                                   tuple(d["step_radii"]), tuple(d["relaxation"]), tuple(d["ts"]))
    if kind == "averaging":
        return AveragingData(tuple(from_obj(a) for a in d["a"]), tuple(d["t"]), d["defect"])
    raise ValueError(f"unknown object type {kind!r}")


def dumps(x) -> str:
    return json.dumps({"schema": SCHEMA, "object": to_obj(x)}, sort_keys=True)


def loads(s: str):
    doc = json.loads(s)
    if doc.get("schema") != SCHEMA:
        raise ValueError(f"unsupported schema {doc.get('schema')!r}")
    return from_obj(doc["object"])
