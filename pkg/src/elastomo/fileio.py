"""Plain-text persistence helpers.

All floats are written with ``repr`` (shortest round-trip representation),
so parse -> write -> parse is bit-exact for finite IEEE doubles.
"""

from __future__ import annotations

import numpy as np


def format_floats(values) -> str:
    """Space-separated shortest round-trip representation of a 1D float sequence."""
    return " ".join(repr(float(v)) for v in values)


def write_matrix(path, matrix: np.ndarray, header: str) -> None:
    """Write a 2D array as one header line plus one text row per matrix row."""
    matrix = np.asarray(matrix, dtype=float)
    with open(path, "w") as fh:
        fh.write(header.rstrip("\n") + "\n")
        for row in matrix:
            fh.write(format_floats(row) + "\n")


def read_matrix(path) -> tuple[str, np.ndarray]:
    """Read a matrix written by :func:`write_matrix`; returns (header, matrix)."""
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        rows = [[float(tok) for tok in line.split()] for line in fh if line.strip()]
    return header, np.array(rows, dtype=float)


def write_pgm(path, image: np.ndarray) -> None:
    """Write a uint8 image as an ASCII (P2) portable graymap.

    Row 0 of ``image`` is the top scanline.
    """
    image = np.asarray(image)
    if image.ndim != 2:
        raise ValueError("PGM image must be 2D")
    if image.dtype != np.uint8:
        if image.min() < 0 or image.max() > 255:
            raise ValueError("PGM values must fit in [0, 255]")
        image = image.astype(np.uint8)
    h, w = image.shape
    with open(path, "w") as fh:
        fh.write(f"P2\n{w} {h}\n255\n")
        for row in image:
            fh.write(" ".join(str(int(v)) for v in row) + "\n")


def read_pgm(path) -> np.ndarray:
    """Read an ASCII (P2) portable graymap written by :func:`write_pgm`."""
    with open(path) as fh:
        tokens = fh.read().split()
    if tokens[0] != "P2":
        raise ValueError(f"not an ASCII PGM file: {path}")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != 255:
        raise ValueError("only 8-bit graymaps are supported")
    data = np.array(tokens[4:4 + w * h], dtype=np.uint8)
    return data.reshape(h, w)


def write_csv(path, header_fields, rows) -> None:
    """Write a CSV file with repr-formatted floats (deterministic output)."""

    def fmt(v):
        if isinstance(v, (bool, np.bool_)):
            return "1" if v else "0"
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        if isinstance(v, (float, np.floating)):
            return repr(float(v))
        return str(v)

    with open(path, "w") as fh:
        fh.write(",".join(header_fields) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
