"""Binary PGM (P5) / PPM (P6) reading and writing, 8-bit only."""
from __future__ import annotations

from pathlib import Path

import numpy as np

_WS = b" \t\n\r\v\f"


class PNMError(ValueError):
    pass


def _tokens(buf: bytes, count: int, pos: int):
    out = []
    n = len(buf)
    while len(out) < count:
        while pos < n and buf[pos] in _WS:
            pos += 1
        if pos < n and buf[pos] == ord("#"):
            while pos < n and buf[pos] not in b"\r\n":
                pos += 1
            continue
        start = pos
        while pos < n and buf[pos] not in _WS and buf[pos] != ord("#"):
            pos += 1
        if start == pos:
            raise PNMError("truncated header")
        out.append(buf[start:pos])
    return out, pos


def decode_pnm(buf: bytes) -> np.ndarray:
    """(H, W) uint8 for P5, (H, W, 3) uint8 for P6."""
    (magic, w, h, maxval), pos = _tokens(buf, 4, 0)
    if magic not in (b"P5", b"P6"):
        raise PNMError(f"unsupported magic {magic!r}; only binary P5/P6 are read")
    try:
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError:
        raise PNMError("malformed header numbers") from None
    if maxval != 255:
        raise PNMError(f"maxval {maxval} not supported (need 255)")
    if pos >= len(buf) or buf[pos] not in _WS:
        raise PNMError("missing whitespace after header")
    pos += 1
    ch = 1 if magic == b"P5" else 3
    need = w * h * ch
    raster = buf[pos:pos + need]
    if len(raster) != need:
        raise PNMError(f"raster holds {len(raster)} bytes, expected {need}")
    arr = np.frombuffer(raster, dtype=np.uint8).copy()
    return arr.reshape(h, w) if ch == 1 else arr.reshape(h, w, 3)


def encode_pnm(arr: np.ndarray) -> bytes:
    arr = np.asarray(arr)
    if arr.dtype != np.uint8:
        raise PNMError(f"expected uint8 pixels, got {arr.dtype}")
    if arr.ndim == 2:
        magic = b"P5"
    elif arr.ndim == 3 and arr.shape[2] == 3:
        magic = b"P6"
    else:
        raise PNMError(f"expected (H, W) or (H, W, 3) array, got {arr.shape}")
    h, w = arr.shape[:2]
    return magic + f"\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(arr).tobytes()


def read_pnm(path) -> np.ndarray:
    return decode_pnm(Path(path).read_bytes())


def write_pnm(path, arr: np.ndarray) -> None:
    Path(path).write_bytes(encode_pnm(arr))


def load_image(path) -> np.ndarray:
    """(3, H, W) float image in [0, 1]; grayscale is replicated to three channels."""
    raw = read_pnm(path).astype(np.float64) / 255.0
    if raw.ndim == 2:
        return np.repeat(raw[None], 3, axis=0)
    return np.ascontiguousarray(raw.transpose(2, 0, 1))


def load_mask(path) -> np.ndarray:
    """(1, H, W) binary mask; bright pixels (>= 128) are known."""
    raw = read_pnm(path)
    if raw.ndim == 3:
        raw = raw.mean(axis=2)
    return (raw >= 128).astype(np.float64)[None]


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def save_image(path, img: np.ndarray) -> None:
    """Write a (3, H, W) or (1, H, W) float image."""
    img = np.asarray(img)
    if img.ndim == 3 and img.shape[0] == 1:
        write_pnm(path, to_uint8(img[0]))
    elif img.ndim == 3 and img.shape[0] == 3:
        write_pnm(path, to_uint8(img.transpose(1, 2, 0)))
    else:
        raise PNMError(f"expected (3, H, W) or (1, H, W) image, got {img.shape}")


def save_mask(path, mask: np.ndarray) -> None:
    m = np.asarray(mask)
    m = m[0] if m.ndim == 3 else m
    write_pnm(path, np.where(m > 0.5, 255, 0).astype(np.uint8))


def list_images(directory) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {d}")
    return sorted(p for p in d.iterdir() if p.suffix.lower() in (".pgm", ".ppm", ".pnm"))
