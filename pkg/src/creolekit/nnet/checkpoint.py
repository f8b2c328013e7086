"""Binary checkpoint format.

Layout: magic, format version, preset name, vocab size, seed, then each named
tensor as (name, rank, dims, row-major little-endian float32 data).
"""

import struct

import numpy as np

from .encoder import PRESETS, EncoderParams

MAGIC = b"CRKENC01"
FORMAT_VERSION = 1


def _write_str(fh, s: str) -> None:
    data = s.encode("utf-8")
    fh.write(struct.pack("<I", len(data)))
    fh.write(data)


def _read_str(fh) -> str:
    (n,) = struct.unpack("<I", fh.read(4))
    return fh.read(n).decode("utf-8")


def save_checkpoint(path, params: EncoderParams, seed: int) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        _write_str(fh, params.preset.name)
        fh.write(struct.pack("<Iq", params.vocab_size, seed))
        fh.write(struct.pack("<I", len(params.tensors)))
        for name, tensor in params.tensors.items():
            _write_str(fh, name)
            fh.write(struct.pack("<I", tensor.ndim))
            fh.write(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
            fh.write(np.ascontiguousarray(tensor, dtype="<f4").tobytes())


def load_checkpoint(path) -> tuple[EncoderParams, int]:
    """Returns (params, seed); raises ValueError on a malformed file."""
    with open(path, "rb") as fh:
        if fh.read(8) != MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported format version {version}")
        preset_name = _read_str(fh)
        if preset_name not in PRESETS:
            raise ValueError(f"{path}: unknown preset {preset_name!r}")
        vocab_size, seed = struct.unpack("<Iq", fh.read(12))
        (n_tensors,) = struct.unpack("<I", fh.read(4))
        tensors = {}
        for _ in range(n_tensors):
            name = _read_str(fh)
            (rank,) = struct.unpack("<I", fh.read(4))
            dims = struct.unpack(f"<{rank}I", fh.read(4 * rank))
            count = int(np.prod(dims)) if rank else 1
            data = fh.read(4 * count)
            if len(data) != 4 * count:
                raise ValueError(f"{path}: truncated tensor {name!r}")
            tensors[name] = np.frombuffer(data, dtype="<f4").reshape(dims).astype(np.float32)
    return EncoderParams(PRESETS[preset_name], vocab_size, tensors), seed
