"""Image, spectrum, checkpoint and log files."""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from spsl.exceptions import InvalidInputError
from spsl.spectral import spectrum_rows

_MAGIC = b"SPSLCKPT"


def to_uint8(image) -> np.ndarray:
    return np.clip(np.rint(np.asarray(image, dtype=float) * 255.0), 0, 255).astype(np.uint8)


def write_image(path, image) -> None:
    """Save a [0, 1] image as 8-bit PNG (1, 3 or 4 channels)."""
    arr = to_uint8(image)
    if arr.ndim == 3 and arr.shape[-1] == 1:
        arr = arr[..., 0]
    Image.fromarray(arr).save(path, format="PNG")


def read_image(path) -> np.ndarray:
    """Load an 8-bit raster as float64 in [0, 1]; grayscale comes back as (H, W)."""
    try:
        with Image.open(path) as im:
            arr = np.asarray(im)
    except (OSError, ValueError) as exc:
        raise InvalidInputError(f"cannot read image {path}: {exc}") from exc
    if arr.dtype != np.uint8:
        raise InvalidInputError(f"{path}: expected 8 bits per channel, got {arr.dtype}")
    return arr.astype(float) / 255.0


def write_spectrum_csv(path, grid) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "col", "re", "im"])
        for r, c, re_, im_ in spectrum_rows(grid):
            writer.writerow([r, c, repr(re_), repr(im_)])


def read_spectrum_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    h = max(int(r["row"]) for r in rows) + 1
    w = max(int(r["col"]) for r in rows) + 1
    grid = np.zeros((h, w), dtype=complex)
    for r in rows:
        grid[int(r["row"]), int(r["col"])] = complex(float(r["re"]), float(r["im"]))
    return grid


def save_checkpoint(path, params: dict[str, np.ndarray], header: dict) -> None:
    """Flat little-endian float64 payload preceded by a JSON header.

    Layout: 8-byte magic, uint64 header length, UTF-8 JSON header, raw parameters
    in the order listed under ``header["tensors"]``.
    """
    names = sorted(params)
    meta = dict(header)
    meta["tensors"] = [{"name": n, "shape": list(params[n].shape)} for n in names]
    blob = json.dumps(meta, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for n in names:
            fh.write(np.ascontiguousarray(params[n], dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    data = Path(path).read_bytes()
    if data[:8] != _MAGIC:
        raise InvalidInputError(f"{path} is not a checkpoint file")
    (n,) = struct.unpack("<Q", data[8:16])
    header = json.loads(data[16 : 16 + n])
    offset = 16 + n
    params = {}
    for t in header["tensors"]:
        count = int(np.prod(t["shape"], dtype=int))
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=offset)
        params[t["name"]] = arr.reshape(t["shape"]).astype(float)
        offset += 8 * count
    if offset != len(data):
        raise InvalidInputError(f"{path}: trailing bytes after parameters")
    return params, header


def write_rows_csv(path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
