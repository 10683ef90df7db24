"""Synthetic lossless, reciprocal channels.

All randomness comes from ``numpy.random.Generator(PCG64(seed))``; PCG64 and
the Gaussian sampler are fixed algorithms, so a seed reproduces the same
matrix on every platform numpy supports.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .network import PortPartition, ScatteringMatrix

__all__ = ["make_rng", "haar_unitary", "random_lossless_reciprocal", "embed_singular_values"]


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random n x n unitary via QR of a complex Ginibre matrix.

    Columns of Q are rescaled so that R has a positive real diagonal, which
    is what makes the distribution uniform (Mezzadri 2007).
    """
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_lossless_reciprocal(n: int, seed: int = 0, frequency_hz: float = 2.4e9) -> ScatteringMatrix:
    """Random symmetric unitary ``S = U U^T`` with Haar-distributed ``U``."""
    if n < 1:
        raise ValueError("need at least one port")
    u = haar_unitary(n, make_rng(seed))
    s = u @ u.T
    # exact symmetry; U U^T is symmetric only up to rounding otherwise
    s = 0.5 * (s + s.T)
    return ScatteringMatrix(s, frequency_hz)


def embed_singular_values(
    sigmas: Sequence[float], seed: int = 0, frequency_hz: float = 2.4e9
) -> tuple[ScatteringMatrix, PortPartition]:
    """Lossless reciprocal 2m-port whose rx->tx block has singular values ``sigmas``.

    Ports 1..m are receivers and m+1..2m generators. Each mode i is a
    lossless two-port ``[[c, s], [s, -c]]`` with ``s = sigmas[i]``; power
    that is not transmitted is reflected. With ``seed != 0`` the modes are
    scrambled by ``blockdiag(T1, T2)`` congruence with random unitaries, so
    they no longer line up with individual ports.
    """
    sig = np.asarray(sigmas, dtype=float)
    if sig.ndim != 1 or sig.size == 0:
        raise ValueError("need at least one singular value")
    if np.any(sig < 0) or np.any(sig > 1):
        raise ValueError(f"singular values must lie in [0, 1], got {sig.tolist()}")
    m = sig.size
    c = np.sqrt(1.0 - sig**2)
    base = np.block([[np.diag(c), np.diag(sig)], [np.diag(sig), -np.diag(c)]]).astype(complex)
    if seed == 0:
        s = base
    else:
        rng = make_rng(seed)
        t = np.zeros((2 * m, 2 * m), dtype=complex)
        t[:m, :m] = haar_unitary(m, rng)
        t[m:, m:] = haar_unitary(m, rng)
        s = t @ base @ t.T
        s = 0.5 * (s + s.T)
    part = PortPartition(tuple(range(1, m + 1)), tuple(range(m + 1, 2 * m + 1)))
    return ScatteringMatrix(s, frequency_hz), part
