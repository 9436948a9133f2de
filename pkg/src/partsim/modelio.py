"""Binary model container (layout in docs/model_format.md)."""
from __future__ import annotations

import hashlib
import json
import struct

import numpy as np
import scipy.sparse as sp

from .models import ScorerModel, SimilarityModel

MAGIC = b"PSIMODL\x01"


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def to_bytes(model) -> bytes:
    if isinstance(model, ScorerModel):
        header = {"kind": "scorer", "name": model.kind, "n_items": model.n, "seed": model.seed}
        body = [] if model.counts is None else [np.asarray(model.counts, dtype="<i8").tobytes()]
        header["has_counts"] = model.counts is not None
    else:
        S = model.sparse.tocoo()
        order = np.lexsort((S.col, S.row))
        header = {
            "kind": "similarity",
            "name": model.name,
            "params": model.params,
            "n_items": model.n_items,
            "nnz": int(S.nnz),
            "rank": model.rank,
            "lambda": model.lam,
            "input_exponents": model.input_exponents,
            "metadata": model.metadata,
        }
        body = [S.row[order].astype("<i8").tobytes(), S.col[order].astype("<i8").tobytes(),
                S.data[order].astype("<f8").tobytes()]
        if model.rank:
            body.append(model.global_weights.astype("<f8").tobytes())
            body.append(np.ascontiguousarray(model.global_vectors.T).astype("<f8").tobytes())
    hbytes = json.dumps(_clean(header), sort_keys=True).encode("utf-8")
    return MAGIC + struct.pack("<Q", len(hbytes)) + hbytes + b"".join(body)


def from_bytes(buf: bytes):
    if buf[:8] != MAGIC:
        raise ValueError("not a partsim model file")
    (hlen,) = struct.unpack("<Q", buf[8:16])
    header = json.loads(buf[16:16 + hlen].decode("utf-8"))
    off = 16 + hlen
    n = header["n_items"]

    def take(count, dtype):
        nonlocal off
        arr = np.frombuffer(buf, dtype=dtype, count=count, offset=off)
        off += arr.nbytes
        return arr.copy()

    if header["kind"] == "scorer":
        counts = take(n, "<i8") if header["has_counts"] else None
        return ScorerModel(header["name"], counts=counts, seed=header["seed"], n=n)
    nnz = header["nnz"]
    rows, cols, vals = take(nnz, "<i8"), take(nnz, "<i8"), take(nnz, "<f8")
    S = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    V = w = None
    d = header["rank"]
    if d:
        w = take(d, "<f8")
        V = take(d * n, "<f8").reshape(d, n).T
    ie = header["input_exponents"]
    return SimilarityModel(S, header["name"], header["params"], global_vectors=V, global_weights=w,
                           lam=header["lambda"], input_exponents=tuple(ie) if ie else None,
                           metadata=header["metadata"])


def save_model(model, path) -> str:
    """Write the container; returns its sha256 digest."""
    data = to_bytes(model)
    with open(path, "wb") as fh:
        fh.write(data)
    return hashlib.sha256(data).hexdigest()


def load_model(path):
    with open(path, "rb") as fh:
        return from_bytes(fh.read())


def model_digest(model) -> str:
    return hashlib.sha256(to_bytes(model)).hexdigest()
