"""File formats: FGRID tensors and 8-bit binary PGM/PPM images.

FGRID layout: the ASCII magic line ``FGRID 1``, an ASCII line of
space-separated dimension sizes, then the raw IEEE-754 single-precision
little-endian values in row-major order.
"""

import numpy as np

from .errors import ContractViolationError

MAGIC = b"FGRID 1\n"


def write_fgrid(path, array: np.ndarray) -> None:
    arr = np.asarray(array, dtype=np.float64)
    if arr.ndim == 0:
        raise ContractViolationError("FGRID needs at least one axis")
    header = MAGIC + (" ".join(str(d) for d in arr.shape) + "\n").encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def read_fgrid(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.readline()
        if magic != MAGIC:
            raise ContractViolationError(f"{path}: not an FGRID file")
        shape_line = fh.readline().decode("ascii").split()
        try:
            shape = tuple(int(tok) for tok in shape_line)
        except ValueError as exc:
            raise ContractViolationError(f"{path}: malformed shape line") from exc
        if not shape or any(d <= 0 for d in shape):
            raise ContractViolationError(f"{path}: invalid shape {shape}")
        count = int(np.prod(shape))
        raw = fh.read(4 * count)
        if len(raw) != 4 * count:
            raise ContractViolationError(f"{path}: truncated data section")
        data = np.frombuffer(raw, dtype="<f4", count=count)
    return data.astype(np.float64).reshape(shape)


def write_pgm(path, grid: np.ndarray) -> None:
    """Render a [0, 1] grid as an 8-bit binary PGM (P5)."""
    g = np.asarray(grid, dtype=np.float64)
    if g.ndim != 2:
        raise ContractViolationError("PGM output needs a 2-D grid")
    pixels = np.clip(np.rint(g * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{g.shape[1]} {g.shape[0]}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


def _read_pnm(path, magic_wanted):
    with open(path, "rb") as fh:
        data = fh.read()
    # header: magic, width, height, maxval as whitespace-separated tokens
    # (comments not supported; the formats here are artifact-internal).
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    magic, width, height, maxval = tokens[0].decode(), int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic != magic_wanted:
        raise ContractViolationError(f"{path}: expected {magic_wanted}, got {magic}")
    if maxval != 255:
        raise ContractViolationError(f"{path}: only 8-bit images supported")
    channels = 3 if magic == "P6" else 1
    count = width * height * channels
    raw = data[pos : pos + count]
    if len(raw) != count:
        raise ContractViolationError(f"{path}: truncated pixel data")
    img = np.frombuffer(raw, dtype=np.uint8).astype(np.float64) / 255.0
    if channels == 1:
        return img.reshape(height, width)
    return img.reshape(height, width, 3)


def read_pgm(path) -> np.ndarray:
    return _read_pnm(path, "P5")


def read_ppm(path) -> np.ndarray:
    return _read_pnm(path, "P6")


def read_image(path) -> np.ndarray:
    """Read FGRID, PGM, or PPM into a float64 array in model units."""
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head == MAGIC:
        return read_fgrid(path)
    if head[:2] == b"P5":
        return read_pgm(path)
    if head[:2] == b"P6":
        return read_ppm(path)
    raise ContractViolationError(f"{path}: unrecognized input format")
