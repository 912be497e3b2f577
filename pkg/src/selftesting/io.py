"""JSON encoding of models and correlations.

Complex scalars are ``[re, im]`` pairs, matrices are row-major nested lists and
reals are written as shortest round-trip decimals (Python's float repr), so a
decode/encode cycle reproduces every number bit for bit.
"""

import json
import math

import numpy as np

from . import matcore as mc
from . import models as md
from .errors import SchemaError

FAMILY_AXES = {"povm": 4, "pvm": 4, "som": 6, "usom": 6}
TABLE_AXES = {"ns": 4, "qns": 8, "cqns": 6}


def encode_complex(a):
    """Nested lists with a trailing [re, im] axis."""
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def encode_real(a):
    return np.asarray(a, dtype=float).tolist()


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _walk(node, path, leaf):
    """Check a nested rectangular list and return (flat values, shape)."""
    if not isinstance(node, list):
        if leaf(node):
            return [node], ()
        raise SchemaError(path, f"expected a list, got {type(node).__name__}")
    if not node:
        raise SchemaError(path, "empty array")
    if leaf(node):
        return [node], ()
    flat, shape = [], None
    for i, child in enumerate(node):
        vals, sh = _walk(child, f"{path}[{i}]", leaf)
        if shape is None:
            shape = sh
        elif sh != shape:
            raise SchemaError(f"{path}[{i}]", f"ragged array: shape {sh} differs from {shape}")
        flat.extend(vals)
    return flat, (len(node),) + shape


def _complex_leaf(v):
    return isinstance(v, list) and len(v) == 2 and all(_is_number(t) for t in v)


def decode_complex(node, path, ndim=None):
    def leaf(v):
        if _is_number(v):
            raise SchemaError(path, "complex entries must be [re, im] pairs")
        return _complex_leaf(v)

    flat, shape = _walk(node, path, leaf)
    if ndim is not None and len(shape) != ndim:
        raise SchemaError(path, f"expected {ndim} array axes, got {len(shape)}")
    vals = np.array([complex(re, im) for re, im in flat])
    return vals.reshape(shape)


def decode_real(node, path, ndim=None):
    flat, shape = _walk(node, path, _is_number)
    if ndim is not None and len(shape) != ndim:
        raise SchemaError(path, f"expected {ndim} array axes, got {len(shape)}")
    return np.array(flat, dtype=float).reshape(shape)


def _field(doc, key, path):
    if not isinstance(doc, dict):
        raise SchemaError(path, f"expected an object, got {type(doc).__name__}")
    if key not in doc:
        raise SchemaError(f"{path}.{key}", "missing field")
    return doc[key]


def _int_field(doc, key, path):
    v = _field(doc, key, path)
    if not isinstance(v, int) or isinstance(v, bool) or v < 1:
        raise SchemaError(f"{path}.{key}", f"expected a positive integer, got {v!r}")
    return v


# --------------------------------------------------------------------------
# families and models


def family_to_json(f):
    return {"kind": f.kind, "X": f.n_inputs, "A": f.n_outputs, "blocks": encode_complex(f.blocks)}


def family_from_json(doc, path="$"):
    kind = _field(doc, "kind", path)
    if kind not in FAMILY_AXES:
        raise SchemaError(f"{path}.kind", f"unknown family kind {kind!r}")
    n_x = _int_field(doc, "X", path)
    n_a = _int_field(doc, "A", path)
    blocks = decode_complex(_field(doc, "blocks", path), f"{path}.blocks", FAMILY_AXES[kind])
    want = (n_x, n_a) if FAMILY_AXES[kind] == 4 else (n_x, n_x, n_a, n_a)
    if blocks.shape[: len(want)] != want:
        raise SchemaError(f"{path}.blocks", f"leading shape {blocks.shape[:len(want)]} does not match X={n_x}, A={n_a}")
    if blocks.shape[-1] != blocks.shape[-2]:
        raise SchemaError(f"{path}.blocks", f"blocks must be square, got {blocks.shape[-2:]}")
    return md.MeasurementFamily(kind, blocks)


def model_to_json(m):
    return {
        "flavor": m.flavor,
        "dims": [int(d) for d in m.dims],
        "alice": family_to_json(m.alice),
        "bob": family_to_json(m.bob),
        "state": encode_complex(m.state),
    }


def model_from_json(doc, tol=mc.DEFAULT_TOL, validate=True):
    """Build a Model from a decoded JSON object; validation runs eagerly."""
    flavor = _field(doc, "flavor", "$")
    if flavor not in ("tensor", "commuting"):
        raise SchemaError("$.flavor", f"expected 'tensor' or 'commuting', got {flavor!r}")
    dims = _field(doc, "dims", "$")
    n_dims = 2 if flavor == "tensor" else 1
    if not isinstance(dims, list) or len(dims) != n_dims or not all(isinstance(d, int) and not isinstance(d, bool) and d > 0 for d in dims):
        raise SchemaError("$.dims", f"expected {n_dims} positive integers, got {dims!r}")
    alice = family_from_json(_field(doc, "alice", "$"), "$.alice")
    bob = family_from_json(_field(doc, "bob", "$"), "$.bob")
    state = decode_complex(_field(doc, "state", "$"), "$.state", 1)
    m = md.Model(flavor, tuple(dims), alice, bob, state)
    return md.check_model(m, tol) if validate else m


# --------------------------------------------------------------------------
# correlations


def correlation_to_json(c):
    table = encode_real(c.table) if c.kind == "ns" else encode_complex(c.table)
    return {"kind": c.kind, "shape": list(c.table.shape), "table": table}


def correlation_from_json(doc, tol=mc.DEFAULT_TOL, validate=True):
    kind = _field(doc, "kind", "$")
    if kind not in TABLE_AXES:
        raise SchemaError("$.kind", f"unknown correlation kind {kind!r}")
    shape = _field(doc, "shape", "$")
    node = _field(doc, "table", "$")
    if kind == "ns":
        table = decode_real(node, "$.table", TABLE_AXES[kind])
    else:
        table = decode_complex(node, "$.table", TABLE_AXES[kind])
    if list(table.shape) != shape:
        raise SchemaError("$.shape", f"declared shape {shape} but table has shape {list(table.shape)}")
    c = md.Correlation(kind, table)
    return md.check_correlation(c, tol) if validate else c


# --------------------------------------------------------------------------
# text level


def _loads(text):
    try:
        return json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc}") from None


def _reject_constant(name):
    raise SchemaError("$", f"{name} is not permitted")


def parse_model(text, tol=mc.DEFAULT_TOL, validate=True):
    return model_from_json(_loads(text), tol, validate)


def parse_correlation(text, tol=mc.DEFAULT_TOL, validate=True):
    return correlation_from_json(_loads(text), tol, validate)


def parse_document(text, tol=mc.DEFAULT_TOL, validate=True):
    """A model or a correlation, told apart by the presence of ``flavor``."""
    doc = _loads(text)
    if isinstance(doc, dict) and "flavor" in doc:
        return model_from_json(doc, tol, validate)
    return correlation_from_json(doc, tol, validate)


def dumps(doc, indent=None):
    return json.dumps(to_jsonable(doc), indent=indent, allow_nan=False)


def to_jsonable(obj):
    """Convert numpy values, tuples and nested containers into plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return encode_complex(obj) if np.iscomplexobj(obj) else obj.tolist()
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, md.Model):
        return model_to_json(obj)
    if isinstance(obj, md.Correlation):
        return correlation_to_json(obj)
    return obj
