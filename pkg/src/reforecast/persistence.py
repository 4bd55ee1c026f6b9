"""Versioned, byte-deterministic model artifacts.

Layout: 4-byte magic, little-endian u32 format version, u64 length of a
JSON manifest (sorted keys), the manifest, then raw little-endian array
buffers in manifest order. No timestamps anywhere, so re-saving the same
model produces an identical file. Loading an artifact written by a newer
format version fails loudly.
"""

import json
import struct

import numpy as np

from .errors import ArtifactVersionError, InvalidConfig

MAGIC = b"RFMA"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIQ")
_DTYPES = {"<f8": np.dtype("<f8"), "<i8": np.dtype("<i8")}


def save_artifact(path, kind, meta, arrays):
    """Write a model artifact; arrays is an ordered {name: ndarray} dict."""
    entries = []
    buffers = []
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        if arr.dtype.kind == "f":
            arr = arr.astype("<f8", copy=False)
        elif arr.dtype.kind in "iub":
            arr = arr.astype("<i8")
        else:
            raise InvalidConfig(f"array {name!r} has unsupported dtype {arr.dtype}")
        entries.append({"name": name, "dtype": arr.dtype.str, "shape": list(arr.shape)})
        buffers.append(arr.tobytes())
    manifest = json.dumps(
        {"kind": kind, "meta": meta, "arrays": entries},
        sort_keys=True, separators=(",", ":"),
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, len(manifest)))
        fh.write(manifest)
        for buf in buffers:
            fh.write(buf)


def load_artifact(path):
    """Read (kind, meta, arrays) back; rejects newer format versions."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise InvalidConfig(f"{path}: truncated artifact header")
        magic, version, manifest_len = _HEADER.unpack(head)
        if magic != MAGIC:
            raise InvalidConfig(f"{path}: not a model artifact (bad magic)")
        if version > FORMAT_VERSION:
            raise ArtifactVersionError(
                f"{path}: format version {version} is newer than supported "
                f"{FORMAT_VERSION}"
            )
        manifest = json.loads(fh.read(manifest_len).decode("utf-8"))
        arrays = {}
        for entry in manifest["arrays"]:
            dtype = _DTYPES.get(entry["dtype"])
            if dtype is None:
                raise InvalidConfig(f"{path}: unsupported dtype {entry['dtype']}")
            count = int(np.prod(entry["shape"])) if entry["shape"] else 1
            buf = fh.read(count * dtype.itemsize)
            arrays[entry["name"]] = np.frombuffer(buf, dtype=dtype).reshape(
                entry["shape"]
            ).copy()
    return manifest["kind"], manifest["meta"], arrays


def save_model(path, model):
    meta, arrays = model.to_arrays()
    meta = dict(meta)
    meta["config_echo"] = getattr(model, "config_echo", {})
    save_artifact(path, model.kind, meta, arrays)


def load_model(path):
    from .argen import DgpvarModel, FlowModel, RnnNfModel
    from .copula_gen import CopulaModel

    kind, meta, arrays = load_artifact(path)
    classes = {
        "copula": CopulaModel, "nf": FlowModel,
        "dgpvar": DgpvarModel, "rnnnf": RnnNfModel,
    }
    if kind not in classes:
        raise InvalidConfig(f"{path}: unknown model kind {kind!r}")
    meta = dict(meta)
    echo = meta.pop("config_echo", {})
    model = classes[kind].from_arrays(meta, arrays)
    model.config_echo = echo
    return model
