"""Complex constellations: square-QAM grids, normalization, moments, file I/O.

A constellation is an ordered set of M complex points with M a power of two.
Point order is significant: symbol index i always maps to point i, so files
and in-memory objects can be exchanged with the encoder without a relabeling
step.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np


class InvalidCardinalityError(ValueError):
    """Constellation size is not a power of two (or not square where required)."""


class DegenerateConstellationError(ValueError):
    """All points are zero; normalization is undefined."""


class ConstellationFileError(ValueError):
    """Constellation file is malformed."""


@dataclass(frozen=True)
class Constellation:
    """Ordered set of M complex points, M = 2^m.

    The point array is copied and frozen at construction; instances are safe
    to share across workers.
    """

    points: np.ndarray
    name: str = "constellation"
    cardinality: int = field(init=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.complex128)
        if pts.ndim != 1:
            raise InvalidCardinalityError("points must be a 1-D sequence")
        m = pts.size
        if m < 1 or (m & (m - 1)) != 0:
            raise InvalidCardinalityError(f"cardinality {m} is not a power of two")
        if not np.all(np.isfinite(pts.view(np.float64))):
            raise ValueError("constellation contains non-finite points")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "cardinality", m)

    @property
    def bits_per_symbol(self) -> int:
        return self.cardinality.bit_length() - 1

    def mean_power(self) -> float:
        pts = self.points
        return float(np.mean(pts.real**2 + pts.imag**2))

    def is_normalized(self, tol: float = 1e-9) -> bool:
        return abs(self.mean_power() - 1.0) <= tol


@dataclass(frozen=True)
class ConstellationMoments:
    """4th and 6th standardized magnitude moments, E|X|^4/(E|X|^2)^2 etc."""

    mu4: float
    mu6: float


def make_square_qam(M: int, name: str | None = None) -> Constellation:
    """Square M-QAM on the {+-1, +-3, ..., +-(sqrt(M)-1)} grid, unit power.

    Parameters
    ----------
    M : int
        Constellation size; must be a power of two with an integer square
        root (4, 16, 64, 256, ...).

    Returns
    -------
    Constellation
        sqrt(M) x sqrt(M) grid normalized to unit average power, points in
        row-major grid order.
    """
    if M < 4 or (M & (M - 1)) != 0:
        raise InvalidCardinalityError(f"M={M} is not a power of two >= 4")
    side = math.isqrt(M)
    if side * side != M:
        raise InvalidCardinalityError(f"M={M} has no integer square root")
    levels = np.arange(-(side - 1), side, 2, dtype=np.float64)
    re, im = np.meshgrid(levels, levels, indexing="ij")
    pts = (re + 1j * im).ravel()
    return normalize(pts, name=name or f"qam{M}")


def normalize(points, name: str | None = None) -> Constellation:
    """Scale a point set to unit average power, (1/M) sum |x_i|^2 = 1."""
    if isinstance(points, Constellation):
        name = name or points.name
        points = points.points
    pts = np.asarray(points, dtype=np.complex128)
    mean_power = np.mean(pts.real**2 + pts.imag**2)
    if mean_power == 0.0:
        raise DegenerateConstellationError("all-zero point set cannot be normalized")
    scaled = pts / np.sqrt(mean_power)
    return Constellation(scaled, name=name or "constellation")


def moments(c: Constellation) -> ConstellationMoments:
    """Standardized moments mu4, mu6 with uniform 1/M weights.

    Scale-invariant, so the constellation need not be normalized.
    """
    pts = np.asarray(c.points if isinstance(c, Constellation) else c, dtype=np.complex128)
    p2 = pts.real**2 + pts.imag**2
    e2 = np.mean(p2)
    if e2 == 0.0:
        raise DegenerateConstellationError("moments of an all-zero constellation")
    mu4 = float(np.mean(p2**2) / e2**2)
    mu6 = float(np.mean(p2**3) / e2**3)
    return ConstellationMoments(mu4=mu4, mu6=mu6)


def save(c: Constellation, destination) -> None:
    """Write a constellation file: header ``M=<int>``, then M ``re,im`` rows.

    Full double precision (repr), so load(save(c)) reproduces the points
    bit-exactly.
    """
    lines = [f"M={c.cardinality}"]
    lines.extend(f"{z.real!r},{z.imag!r}" for z in c.points)
    text = "\n".join(lines) + "\n"
    if hasattr(destination, "write"):
        destination.write(text)
    else:
        with open(destination, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def load(source) -> Constellation:
    """Read a constellation file written by :func:`save`."""
    if hasattr(source, "read"):
        text = source.read()
        name = "constellation"
    else:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
        name = os.path.splitext(os.path.basename(os.fspath(source)))[0]
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("M="):
        raise ConstellationFileError("missing 'M=<int>' header line")
    try:
        m = int(lines[0][2:])
    except ValueError as exc:
        raise ConstellationFileError(f"unparseable header {lines[0]!r}") from exc
    rows = lines[1:]
    if len(rows) != m:
        raise ConstellationFileError(
            f"header declares M={m} but file has {len(rows)} point rows"
        )
    pts = np.empty(m, dtype=np.complex128)
    for i, row in enumerate(rows):
        parts = row.split(",")
        if len(parts) != 2:
            raise ConstellationFileError(f"row {i}: expected 're,im', got {row!r}")
        try:
            pts[i] = complex(float(parts[0]), float(parts[1]))
        except ValueError as exc:
            raise ConstellationFileError(f"row {i}: non-numeric entry in {row!r}") from exc
    return Constellation(pts, name=name)
