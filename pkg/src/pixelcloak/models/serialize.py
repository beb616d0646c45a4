"""Model weight files.

Layout: magic "RPFW", version (u32 LE), architecture name (u32 LE length +
UTF-8 bytes), then each parameter in canonical order as rank (u32 LE), dims
(u32 LE each), values (f64 LE); finally CRC32 of all preceding bytes
(u32 LE). The class count is recoverable from the final dense bias, so the
name plus parameters fully determine the architecture.
"""

import struct
import zlib

import numpy as np

from .architectures import get_architecture
from .network import ModelParams

MAGIC = b"RPFW"
VERSION = 1


class ModelFileError(ValueError):
    """Malformed model file: wrong magic, version, truncation, or checksum."""


def save_model(model: ModelParams, path):
    chunks = [MAGIC, struct.pack("<I", VERSION)]
    name = model.arch.name.encode("utf-8")
    chunks.append(struct.pack("<I", len(name)))
    chunks.append(name)
    for pname, _ in model.arch.param_shapes():
        arr = model.params[pname]
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.astype("<f8").tobytes())
    body = b"".join(chunks)
    crc = zlib.crc32(body) & 0xFFFFFFFF
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(struct.pack("<I", crc))


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, n, section):
        if self.pos + n > len(self.data):
            raise ModelFileError(f"truncated while reading {section}")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self, section):
        return struct.unpack("<I", self.take(4, section))[0]


def load_model(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 4 or data[:4] != MAGIC:
        raise ModelFileError(f"'{path}' is not a model file (bad magic)")
    if len(data) < 8:
        raise ModelFileError("truncated while reading version")
    body, tail = data[:-4], data[-4:]
    if len(data) < 12 or zlib.crc32(body) & 0xFFFFFFFF != struct.unpack("<I", tail)[0]:
        raise ModelFileError("checksum mismatch (file corrupt or truncated)")

    r = _Reader(body)
    r.take(4, "magic")
    version = r.u32("version")
    if version != VERSION:
        raise ModelFileError(f"unsupported version {version} (expected {VERSION})")
    name_len = r.u32("architecture name length")
    name = r.take(name_len, "architecture name").decode("utf-8")

    raw = []
    while r.pos < len(body):
        rank = r.u32(f"parameter {len(raw)} rank")
        dims = struct.unpack(
            f"<{rank}I", r.take(4 * rank, f"parameter {len(raw)} dims")
        )
        count = int(np.prod(dims, dtype=np.int64)) if rank else 1
        vals = np.frombuffer(
            r.take(8 * count, f"parameter {len(raw)} values"), dtype="<f8"
        )
        raw.append(vals.reshape(dims))

    if not raw:
        raise ModelFileError("truncated: no parameters present")
    classes = raw[-1].shape[-1]  # final dense bias has one entry per class
    arch = get_architecture(name, classes=classes)
    expected = arch.param_shapes()
    if len(raw) != len(expected):
        raise ModelFileError(
            f"expected {len(expected)} parameters for {name}, found {len(raw)}"
        )
    params = {}
    for (pname, shape), arr in zip(expected, raw):
        if arr.shape != shape:
            raise ModelFileError(f"parameter '{pname}': shape {arr.shape} != {shape}")
        params[pname] = arr
    return ModelParams(arch=arch, params=params)
