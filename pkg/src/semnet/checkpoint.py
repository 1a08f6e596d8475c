"""``SEMN`` checkpoint files.

Layout (little-endian)::

    b"SEMN"  u32 version
    u32 config_len, config_len bytes of UTF-8 ``key=value`` lines
    u32 record_count
    per record: u32 name_len, name bytes, 4 x u32 dims, float64 values

Arrays with fewer than four axes are padded with trailing ones; readers
reshape to the expected parameter shape.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"SEMN"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _dims4(shape: tuple[int, ...]) -> tuple[int, int, int, int]:
    if len(shape) > 4:
        raise CheckpointError(f"cannot store array with {len(shape)} axes")
    return tuple(shape) + (1,) * (4 - len(shape))  # type: ignore[return-value]


def encode(config: dict[str, str], arrays: dict[str, np.ndarray]) -> bytes:
    text = "".join(f"{k}={v}\n" for k, v in config.items()).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", VERSION), struct.pack("<I", len(text)), text,
             struct.pack("<I", len(arrays))]
    for name, arr in arrays.items():
        arr = np.asarray(arr, dtype="<f8")
        nb = name.encode("utf-8")
        parts.append(struct.pack("<I", len(nb)))
        parts.append(nb)
        parts.append(struct.pack("<4I", *_dims4(arr.shape)))
        parts.append(np.ascontiguousarray(arr).tobytes())
    return b"".join(parts)


def decode(buf: bytes) -> tuple[dict[str, str], dict[str, np.ndarray]]:
    if buf[:4] != MAGIC:
        raise CheckpointError("not a SEMN checkpoint (bad magic)")
    try:
        (version,) = struct.unpack_from("<I", buf, 4)
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        (clen,) = struct.unpack_from("<I", buf, 8)
        pos = 12
        config = {}
        for line in buf[pos:pos + clen].decode("utf-8").splitlines():
            if line:
                k, _, v = line.partition("=")
                config[k] = v
        pos += clen
        (count,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        arrays = {}
        for _ in range(count):
            (nlen,) = struct.unpack_from("<I", buf, pos)
            pos += 4
            name = buf[pos:pos + nlen].decode("utf-8")
            pos += nlen
            dims = struct.unpack_from("<4I", buf, pos)
            pos += 16
            n = int(np.prod(dims))
            if pos + 8 * n > len(buf):
                raise CheckpointError(f"record {name!r} truncated")
            arrays[name] = np.frombuffer(buf, dtype="<f8", count=n, offset=pos).astype(np.float64).reshape(dims)
            pos += 8 * n
    except struct.error as exc:
        raise CheckpointError(f"truncated checkpoint: {exc}") from None
    if pos != len(buf):
        raise CheckpointError(f"{len(buf) - pos} trailing bytes after last record")
    return config, arrays


def save(path, config: dict[str, str], arrays: dict[str, np.ndarray]) -> None:
    Path(path).write_bytes(encode(config, arrays))


def load(path) -> tuple[dict[str, str], dict[str, np.ndarray]]:
    return decode(Path(path).read_bytes())


def assign(named: dict[str, "np.ndarray"], arrays: dict[str, np.ndarray], prefix: str = "") -> None:
    """Copy stored values into the arrays of ``named`` (name -> target array)."""
    expected = {prefix + k for k in named}
    stored = {k for k in arrays if k.startswith(prefix)} if prefix else set(arrays)
    missing = expected - stored
    extra = stored - expected
    if missing or extra:
        raise CheckpointError(f"parameter mismatch: missing {sorted(missing)[:5]}, unexpected {sorted(extra)[:5]}")
    for k, target in named.items():
        src = arrays[prefix + k]
        if _dims4(target.shape) != src.shape:
            raise CheckpointError(f"shape mismatch for {k}: model {target.shape}, checkpoint {src.shape}")
        target[...] = src.reshape(target.shape)
