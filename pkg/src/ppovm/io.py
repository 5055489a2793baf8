"""JSON interchange: matrices as ``{rows, cols, data}`` and typed scene documents.

Complex entries are ``[re, im]`` pairs in row-major order. Python's float
repr is shortest-round-trip, so ``parse(serialize(doc))`` is bit-exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import linalg as la
from .errors import PpovmError
from .extremality import Subalgebra
from .linalg import DEFAULT_EPS, dag
from .process import ProcessPovm, RepresentationTriple
from .quantum import Channel, Povm, state_residuals

KINDS = ("povm", "process_povm", "triple", "channel", "subalgebra")


class ParseError(PpovmError, ValueError):
    """The input is not a well-formed document."""


# -- matrices ------------------------------------------------------------


def matrix_to_json(A) -> dict:
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2:
        raise ParseError(f"expected a matrix, got shape {A.shape}")
    data = [[float(z.real), float(z.imag)] for z in A.ravel()]
    return {"rows": int(A.shape[0]), "cols": int(A.shape[1]), "data": data}


def matrix_from_json(obj) -> np.ndarray:
    try:
        rows, cols, data = int(obj["rows"]), int(obj["cols"]), obj["data"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad matrix document: {exc}") from exc
    if rows < 1 or cols < 1 or not isinstance(data, list) or len(data) != rows * cols:
        raise ParseError(f"matrix data length {len(data) if isinstance(data, list) else '?'} != {rows}x{cols}")
    try:
        flat = np.array([complex(float(re), float(im)) for re, im in data], dtype=complex)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"matrix entries must be [re, im] pairs: {exc}") from exc
    if not np.all(np.isfinite(flat)):
        raise ParseError("matrix has non-finite entries")
    return flat.reshape(rows, cols)


def _matrices_from_json(items, what):
    if not isinstance(items, list) or not items:
        raise ParseError(f"{what} must be a non-empty list of matrices")
    return [matrix_from_json(m) for m in items]


# -- scenes --------------------------------------------------------------


@dataclass
class SceneDocument:
    """One typed object. ``dims`` keys are dK, dH, dH0; unused entries are 1."""

    kind: str
    dims: dict
    n: int
    payload: dict
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"kind": self.kind, "dims": dict(self.dims), "n": self.n, "payload": self.payload, "meta": dict(self.meta)}


def _dims(dK=1, dH=1, dH0=1):
    return {"dK": int(dK), "dH": int(dH), "dH0": int(dH0)}


def scene_from_object(obj, meta=None) -> SceneDocument:
    """Wrap a package object in a document."""
    meta = {str(k): str(v) for k, v in (meta or {}).items()}
    if isinstance(obj, Povm):
        payload = {"effects": [matrix_to_json(E) for E in obj]}
        return SceneDocument("povm", _dims(dK=obj.space_dim), obj.n, payload, meta)
    if isinstance(obj, ProcessPovm):
        payload = {"effects": [matrix_to_json(E) for E in obj]}
        return SceneDocument("process_povm", _dims(obj.d_K, obj.d_H), obj.n, payload, meta)
    if isinstance(obj, RepresentationTriple):
        payload = {"M": [matrix_to_json(E) for E in obj.M]}
        if obj.is_pure:
            payload["T"] = matrix_to_json(obj.T)
        else:
            payload["rho"] = matrix_to_json(obj.rho)
        return SceneDocument("triple", _dims(obj.d_K, obj.d_H, obj.d_H0), obj.n, payload, meta)
    if isinstance(obj, Channel):
        payload = {"kraus": [matrix_to_json(K) for K in obj.kraus]}
        return SceneDocument("channel", _dims(dK=obj.out_dim, dH=obj.in_dim), len(obj.kraus), payload, meta)
    if isinstance(obj, Subalgebra):
        payload = {"basis": [matrix_to_json(B) for B in obj.basis]}
        return SceneDocument("subalgebra", _dims(dK=obj.ambient_dim), obj.dim, payload, meta)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def scene_from_json(obj) -> SceneDocument:
    if not isinstance(obj, dict):
        raise ParseError("scene document must be a JSON object")
    try:
        kind, dims, n, payload = obj["kind"], obj["dims"], int(obj["n"]), obj["payload"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad scene document: {exc}") from exc
    if kind not in KINDS:
        raise ParseError(f"unknown kind {kind!r}")
    if not isinstance(dims, dict) or not isinstance(payload, dict):
        raise ParseError("dims and payload must be objects")
    try:
        dims = _dims(**{k: dims[k] for k in ("dK", "dH", "dH0")})
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"dims must have integer dK, dH, dH0: {exc}") from exc
    if min(dims.values()) < 1 or n < 1:
        raise ParseError("dimensions and n must be positive")
    meta = obj.get("meta", {})
    if not isinstance(meta, dict) or not all(isinstance(k, str) and isinstance(v, str) for k, v in meta.items()):
        raise ParseError("meta must map strings to strings")
    return SceneDocument(kind, dims, n, payload, dict(meta))


def scene_to_object(doc: SceneDocument):
    """Build the package object; shapes are checked here, operator invariants by :func:`validate`."""
    p, d = doc.payload, doc.dims
    try:
        if doc.kind in ("povm", "process_povm"):
            effects = _matrices_from_json(p.get("effects"), "effects")
            _expect(len(effects) == doc.n, "n does not match the number of effects")
            if doc.kind == "povm":
                return Povm(tuple(effects))
            _expect(effects[0].shape == (d["dK"] * d["dH"],) * 2, "effects do not act on K (x) H")
            return ProcessPovm(tuple(effects), d["dK"], d["dH"])
        if doc.kind == "triple":
            M = Povm(tuple(_matrices_from_json(p.get("M"), "M")))
            _expect(M.n == doc.n, "n does not match the number of effects")
            _expect(M.space_dim == d["dK"] * d["dH0"], "M does not act on K (x) H0")
            if "T" in p:
                T = matrix_from_json(p["T"])
                _expect(T.shape == (d["dH0"], d["dH"]), "T must map H to H0")
                return RepresentationTriple(d["dH0"], M, T=T)
            rho = matrix_from_json(p.get("rho"))
            _expect(rho.shape == (d["dH"] * d["dH0"],) * 2, "rho must act on H (x) H0")
            return RepresentationTriple(d["dH0"], M, rho=rho)
        if doc.kind == "channel":
            kraus = _matrices_from_json(p.get("kraus"), "kraus")
            _expect(kraus[0].shape == (d["dK"], d["dH"]), "Kraus operators must map H to K")
            return Channel(tuple(kraus))
        basis = _matrices_from_json(p.get("basis"), "basis")
        _expect(len(basis) == doc.n, "n does not match the basis size")
        return Subalgebra(basis[0].shape[0], tuple(basis))
    except PpovmError as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(str(exc)) from exc


def _expect(cond, message):
    if not cond:
        raise ParseError(message)


# -- validation ----------------------------------------------------------


@dataclass(frozen=True)
class Check:
    name: str
    residual: float
    limit: float

    @property
    def ok(self) -> bool:
        return self.residual <= self.limit


def validate(obj, eps=DEFAULT_EPS) -> list:
    """Per-invariant residuals against their limits; the same limits the ``check`` methods use."""
    if isinstance(obj, Povm):
        r = obj.residuals()
        return [Check(f"povm.{k}", v, obj.n * eps if k == "normalization" else eps) for k, v in r.items()]
    if isinstance(obj, ProcessPovm):
        r = obj.residuals()
        return [Check(f"process_povm.{k}", v, obj.n * eps if k in ("normalization", "sigma_trace") else eps) for k, v in r.items()]
    if isinstance(obj, RepresentationTriple):
        out = validate(obj.M, eps)
        if obj.is_pure:
            out.append(Check("triple.input_trace", abs(np.trace(dag(obj.T) @ obj.T) - 1), 10 * eps))
        else:
            out += [Check(f"triple.input_{k}", v, eps) for k, v in state_residuals(obj.rho).items()]
        return out
    if isinstance(obj, Channel):
        return [Check(f"channel.{k}", v, 10 * eps) for k, v in obj.residuals().items()]
    if isinstance(obj, Subalgebra):
        gram = np.array([[la.hs_inner(A, B) for B in obj.basis] for A in obj.basis])
        out = [Check("subalgebra.orthonormal", float(np.abs(gram - np.eye(obj.dim)).max()), 10 * eps)]
        return out + [Check(f"subalgebra.{k}", v, 10 * eps) for k, v in obj.closure_residuals().items()]
    raise TypeError(f"cannot validate {type(obj).__name__}")


# -- files ---------------------------------------------------------------


def dumps(obj) -> str:
    if isinstance(obj, SceneDocument):
        obj = obj.to_json()
    return json.dumps(obj, indent=1, allow_nan=False) + "\n"


def loads(text: str):
    """Parse a scene document or a bare matrix document."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    if isinstance(obj, dict) and "kind" in obj:
        return scene_from_json(obj)
    if isinstance(obj, dict) and "rows" in obj:
        return matrix_from_json(obj)
    raise ParseError("document is neither a scene nor a matrix")


def read(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    return loads(text)


def read_object(path, kinds=None):
    doc = read(path)
    if not isinstance(doc, SceneDocument):
        raise ParseError(f"{path} holds a bare matrix, expected a scene")
    if kinds and doc.kind not in kinds:
        raise ParseError(f"{path} holds a {doc.kind}, expected one of {', '.join(kinds)}")
    return doc, scene_to_object(doc)


def read_matrix(path) -> np.ndarray:
    doc = read(path)
    if not isinstance(doc, np.ndarray):
        raise ParseError(f"{path} holds a scene, expected a matrix")
    return doc


def write(path, obj):
    text = dumps(obj)
    if path is None or path == "-":
        return text
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return text
