"""Scattering-matrix containers, channel checks and port-role bookkeeping.

Vectors and matrices are plain ``numpy`` complex arrays. Ports are numbered
from 1 at every public boundary, matching the labels printed on a measured
board; conversion to 0-based indices happens inside :func:`subblock` only.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "ScatteringMatrix",
    "PortPartition",
    "as_cvector",
    "as_cmatrix",
    "is_reciprocal",
    "is_lossless",
    "subblock",
    "fraunhofer_distance",
]


def as_cvector(v) -> np.ndarray:
    """Coerce ``v`` to a finite, non-empty 1-D complex array."""
    arr = np.asarray(v, dtype=complex)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"expected a non-empty vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector has non-finite entries")
    return arr


def as_cmatrix(m) -> np.ndarray:
    """Coerce ``m`` to a finite 2-D complex array (scalars become 1x1)."""
    arr = np.asarray(m, dtype=complex)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise ValueError(f"expected a matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix has non-finite entries")
    return arr


@dataclass(frozen=True)
class ScatteringMatrix:
    """Single-frequency S-parameter matrix of an n-port network.

    Parameters
    ----------
    s : array_like, shape (n, n)
        Complex scattering parameters, ``s[i, j]`` = wave out of port i+1
        per unit wave into port j+1.
    frequency_hz : float
        Frequency the matrix was measured or synthesized at.
    reference_impedance : float
        Common port reference impedance in ohms.
    """

    s: np.ndarray
    frequency_hz: float = 2.4e9
    reference_impedance: float = 50.0

    def __post_init__(self):
        s = as_cmatrix(self.s).copy()
        if s.shape[0] != s.shape[1]:
            raise ValueError(f"S-matrix must be square, got {s.shape}")
        if not self.frequency_hz > 0:
            raise ValueError("frequency must be positive")
        if not self.reference_impedance > 0:
            raise ValueError("reference impedance must be positive")
        s.setflags(write=False)
        object.__setattr__(self, "s", s)

    @property
    def n_ports(self) -> int:
        return self.s.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.s, dtype=dtype)


@dataclass(frozen=True)
class PortPartition:
    """Assignment of 1-based ports to the four roles of a WPT channel.

    ``rx_active`` and ``tx_active`` are the receiver and generator ports in
    the loop; the absorbing lists are ports terminated in matched loads on
    either side.
    """

    rx_active: tuple[int, ...]
    tx_active: tuple[int, ...]
    rx_absorbing: tuple[int, ...] = field(default=())
    tx_absorbing: tuple[int, ...] = field(default=())

    def __post_init__(self):
        for name in ("rx_active", "tx_active", "rx_absorbing", "tx_absorbing"):
            object.__setattr__(self, name, tuple(int(p) for p in getattr(self, name)))

    @property
    def ports(self) -> tuple[int, ...]:
        return self.rx_active + self.tx_active + self.rx_absorbing + self.tx_absorbing

    def validate(self, n_ports: int) -> "PortPartition":
        """Raise ``ValueError`` unless this partition covers ports 1..n exactly once."""
        if not self.rx_active or not self.tx_active:
            raise ValueError("rx_active and tx_active must be non-empty")
        seen = self.ports
        dupes = sorted({p for p in seen if seen.count(p) > 1})
        if dupes:
            raise ValueError(f"ports assigned to more than one role: {dupes}")
        expected = set(range(1, n_ports + 1))
        extra = sorted(set(seen) - expected)
        if extra:
            raise ValueError(f"ports out of range 1..{n_ports}: {extra}")
        missing = sorted(expected - set(seen))
        if missing:
            raise ValueError(f"ports not assigned to any role: {missing}")
        return self

    @classmethod
    def from_active(cls, n_ports: int, rx: Sequence[int], tx: Sequence[int]) -> "PortPartition":
        """Build a partition where every unlisted port absorbs.

        Unlisted ports in the lower half (1..n/2) go to the receiver side and
        the rest to the generator side, the layout of a two-sided channel
        board.
        """
        used = set(rx) | set(tx)
        half = n_ports // 2
        rest = [p for p in range(1, n_ports + 1) if p not in used]
        part = cls(
            tuple(rx),
            tuple(tx),
            tuple(p for p in rest if p <= half),
            tuple(p for p in rest if p > half),
        )
        return part.validate(n_ports)


def _matrix_of(S) -> np.ndarray:
    return S.s if isinstance(S, ScatteringMatrix) else as_cmatrix(S)


def is_reciprocal(S, tol: float = 1e-10) -> bool:
    s = _matrix_of(S)
    return bool(np.max(np.abs(s - s.T)) <= tol)


def is_lossless(S, tol: float = 1e-10) -> bool:
    s = _matrix_of(S)
    gram = s.conj().T @ s
    return bool(np.max(np.abs(gram - np.eye(s.shape[0]))) <= tol)


def subblock(S, row_ports: Sequence[int], col_ports: Sequence[int]) -> np.ndarray:
    """Extract ``S[row_ports, col_ports]`` using 1-based port numbers.

    The result keeps the order of the port lists, so
    ``subblock(S, rx, tx)[i, j]`` is the transmission from ``tx[j]`` to
    ``rx[i]``.
    """
    s = _matrix_of(S)
    n = s.shape[0] if s.shape[0] == s.shape[1] else None
    for axis, ports in ((0, row_ports), (1, col_ports)):
        limit = s.shape[axis]
        for p in ports:
            if not 1 <= int(p) <= limit:
                raise ValueError(f"port {p} out of range 1..{n or limit}")
    rows = np.asarray(row_ports, dtype=int) - 1
    cols = np.asarray(col_ports, dtype=int) - 1
    return s[np.ix_(rows, cols)].copy()


def fraunhofer_distance(diameter: float, wavelength: float) -> float:
    """Outer edge of the radiative near field, ``2 D**2 / wavelength``."""
    if not wavelength > 0:
        raise ValueError("wavelength must be positive")
    if diameter < 0:
        raise ValueError("diameter must be non-negative")
    return 2.0 * diameter**2 / wavelength
