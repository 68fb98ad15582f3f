"""
Model container: a versioned, length-prefixed, checksummed binary file.

Layout (little endian)::

    magic   8 bytes  b"RLFTMDL\\0"
    version u32
    count   u32
    count x [name_len u16 | name utf-8 | kind u8 | size u64 | payload]
    sha256  32 bytes over everything above

``kind`` 0 is UTF-8 JSON, 1 is a NumPy ``.npy`` blob (no pickles), so
arrays round-trip bit for bit.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..bow import BowEncoder, Codebook, LinearRegionModel, PyramidConfig
from ..rescoring import Rescorer
from ..svm import KernelSpec, SvmModel
from .config import RunConfig

MAGIC = b"RLFTMDL\0"
VERSION = 1
_JSON, _NPY = 0, 1


class ModelFormatError(ValueError):
    pass


@dataclass
class ModelBundle:
    """Everything trained so far; later stages fill in the optional parts."""

    config: RunConfig
    encoder: Optional[BowEncoder] = None
    classifiers: dict[int, LinearRegionModel] = field(default_factory=dict)
    rescorer: Optional[Rescorer] = None


def _npy(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    np.save(buf, np.ascontiguousarray(arr), allow_pickle=False)
    return buf.getvalue()


def _pack(sections: list[tuple[str, int, bytes]]) -> bytes:
    out = bytearray(MAGIC)
    out += struct.pack("<II", VERSION, len(sections))
    for name, kind, payload in sections:
        raw = name.encode()
        out += struct.pack("<H", len(raw)) + raw + struct.pack("<BQ", kind, len(payload)) + payload
    out += hashlib.sha256(out).digest()
    return bytes(out)


def _unpack(data: bytes) -> dict[str, object]:
    if len(data) < len(MAGIC) + 8 + 32 or data[: len(MAGIC)] != MAGIC:
        raise ModelFormatError("not a regionlift model file (bad magic or truncated)")
    body, digest = data[:-32], data[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise ModelFormatError("model file checksum mismatch (truncated or corrupted)")
    version, count = struct.unpack_from("<II", body, len(MAGIC))
    if version != VERSION:
        raise ModelFormatError(f"model file version {version} is not supported (expected {VERSION})")
    pos = len(MAGIC) + 8
    out: dict[str, object] = {}
    try:
        for _ in range(count):
            (n,) = struct.unpack_from("<H", body, pos)
            pos += 2
            name = body[pos:pos + n].decode()
            pos += n
            kind, size = struct.unpack_from("<BQ", body, pos)
            pos += 9
            payload = body[pos:pos + size]
            if len(payload) != size:
                raise ModelFormatError(f"section {name!r} is truncated")
            pos += size
            if kind == _JSON:
                out[name] = json.loads(payload.decode())
            elif kind == _NPY:
                out[name] = np.load(io.BytesIO(payload), allow_pickle=False)
            else:
                raise ModelFormatError(f"section {name!r} has unknown kind {kind}")
    except struct.error as exc:
        raise ModelFormatError(f"model file is truncated ({exc})") from None
    if pos != len(body):
        raise ModelFormatError("trailing bytes after the last section")
    return out


def dumps_model(bundle: ModelBundle) -> bytes:
    meta: dict = {"config": bundle.config.to_dict(), "classifiers": {}, "rescorer": None, "encoder": None}
    sections: list[tuple[str, int, bytes]] = []
    enc = bundle.encoder
    if enc is not None:
        meta["encoder"] = {
            "feature_channel": enc.codebook.feature_channel,
            "pyramid": [list(l) for l in enc.pyramid.levels],
            "patch_sizes": list(enc.patch_sizes),
            "stride": enc.stride,
            "neighbors": enc.neighbors,
            "lam": enc.lam,
        }
        sections.append(("codebook", _NPY, _npy(enc.codebook.centers)))
    for c in sorted(bundle.classifiers):
        m = bundle.classifiers[c]
        meta["classifiers"][str(c)] = {"bias": m.bias}
        sections.append((f"classifier/{c}/weights", _NPY, _npy(m.weights)))
    if bundle.rescorer is not None:
        r = bundle.rescorer
        meta["rescorer"] = {"k": r.k, "weight": r.weight, "models": {}}
        for c in sorted(r.models):
            m = r.models[c]
            meta["rescorer"]["models"][str(c)] = {
                "kernel": m.kernel.kind, "gamma": m.kernel.gamma, "bias": m.bias, "C": m.C,
            }
            sections.append((f"rescorer/{c}/sv", _NPY, _npy(m.support_vectors)))
            sections.append((f"rescorer/{c}/coef", _NPY, _npy(m.dual_coef)))
    sections.insert(0, ("meta", _JSON, json.dumps(meta, sort_keys=True).encode()))
    return _pack(sections)


def loads_model(data: bytes) -> ModelBundle:
    s = _unpack(data)
    try:
        meta = s["meta"]
        bundle = ModelBundle(RunConfig.from_dict(meta["config"]))
        if meta["encoder"] is not None:
            e = meta["encoder"]
            cb = Codebook(s["codebook"], e["feature_channel"])
            bundle.encoder = BowEncoder(
                cb, PyramidConfig(tuple(map(tuple, e["pyramid"]))), tuple(e["patch_sizes"]),
                e["stride"], e["neighbors"], e["lam"],
            )
        for c, info in meta["classifiers"].items():
            if bundle.encoder is None:
                raise ModelFormatError("classifier section without an encoder")
            bundle.classifiers[int(c)] = LinearRegionModel(
                bundle.encoder, s[f"classifier/{c}/weights"], info["bias"]
            )
        if meta["rescorer"] is not None:
            r = meta["rescorer"]
            models = {}
            for c, info in r["models"].items():
                models[int(c)] = SvmModel(
                    KernelSpec(info["kernel"], info["gamma"]), s[f"rescorer/{c}/sv"],
                    s[f"rescorer/{c}/coef"], info["bias"], info["C"],
                )
            bundle.rescorer = Rescorer(r["k"], models, r["weight"])
    except KeyError as exc:
        raise ModelFormatError(f"model file is missing section or field {exc}") from None
    return bundle


def save_model(bundle: ModelBundle, path) -> None:
    Path(path).write_bytes(dumps_model(bundle))


def load_model(path) -> ModelBundle:
    return loads_model(Path(path).read_bytes())
