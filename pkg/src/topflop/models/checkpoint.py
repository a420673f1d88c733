"""Self-describing, bytewise-deterministic model checkpoints.

Layout: magic, 8-byte little-endian header length, JSON header (arch id,
config, embedding digest, tensor specs in order), then raw little-endian
float64 tensor bytes.  The same model always serializes to identical
bytes, so a sha256 of the file doubles as the model digest.
"""

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DataError

MAGIC = b"TFCKPT1\n"


@dataclass
class Checkpoint:
    arch: str
    config: dict
    embedding_digest: str
    extra: dict
    tensors: dict


def save_checkpoint(path, arch, tensors, config, embedding_digest="", extra=None):
    names = sorted(tensors)
    header = {
        "arch": arch,
        "config": config,
        "embedding_digest": embedding_digest,
        "extra": extra or {},
        "tensors": [
            {"name": n, "shape": list(tensors[n].shape)} for n in names
        ],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(len(header_bytes).to_bytes(8, "little"))
        fh.write(header_bytes)
        for name in names:
            fh.write(np.ascontiguousarray(tensors[name], dtype="<f8").tobytes())


def load_checkpoint(path):
    raw = Path(path).read_bytes()
    if not raw.startswith(MAGIC):
        raise DataError(f"{path} is not a model checkpoint")
    offset = len(MAGIC)
    header_len = int.from_bytes(raw[offset : offset + 8], "little")
    offset += 8
    header = json.loads(raw[offset : offset + header_len].decode("utf-8"))
    offset += header_len
    tensors = {}
    for spec in header["tensors"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + count * 8
        tensors[spec["name"]] = (
            np.frombuffer(raw[offset:end], dtype="<f8").reshape(shape).copy()
        )
        offset = end
    if offset != len(raw):
        raise DataError(f"{path} has trailing bytes; corrupt checkpoint")
    return Checkpoint(
        arch=header["arch"],
        config=header["config"],
        embedding_digest=header.get("embedding_digest", ""),
        extra=header.get("extra", {}),
        tensors=tensors,
    )


def checkpoint_digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
