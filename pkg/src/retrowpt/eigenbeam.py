"""Beam-mode eigenanalysis of a transmission block.

Throughout, ``s21`` is the M x N block of an S-matrix that maps the N active
generator ports to the M active receiver ports (``subblock(S, rx, tx)``).
The wireless power transfer efficiency of a generator drive ``v`` is the
Rayleigh quotient ``|s21 v|^2 / |v|^2`` of the Gram matrix ``s21^H s21``;
its eigenvectors are the beam modes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import as_cmatrix, as_cvector

__all__ = [
    "BeamModeSet",
    "hermitian_eigendecompose",
    "phase_normalize",
    "beam_modes",
    "efficiency",
    "decompose_input",
    "weighted_efficiency",
    "max_efficiency",
]

HERMITIAN_TOL = 1e-10
MAX_SWEEPS = 100
# eigenvalues closer than this (relative to max(1, |xi_max|)) count as tied
TIE_TOL = 1e-10


def phase_normalize(v: np.ndarray) -> np.ndarray:
    """Rotate ``v`` so its largest-magnitude component is real and positive."""
    v = np.asarray(v, dtype=complex)
    mags = np.abs(v)
    # first index wins among components equal up to rounding
    k = int(np.argmax(mags >= mags.max() * (1 - 1e-12)))
    if mags[k] == 0:
        return v.copy()
    return v * (abs(v[k]) / v[k])


def _jacobi_rotation(app: float, aqq: float, apq: complex) -> np.ndarray:
    """2x2 unitary U with ``(U^H A U)`` diagonal for Hermitian A on (p, q)."""
    mag = abs(apq)
    phase = apq / mag
    theta = (aqq - app) / (2.0 * mag)
    t = np.sign(theta) / (abs(theta) + np.hypot(theta, 1.0)) if theta != 0 else 1.0
    c = 1.0 / np.hypot(t, 1.0)
    s = t * c
    # D = diag(1, conj(phase)) makes the pivot real; R is the real rotation
    return np.array([[c, s], [-s * np.conj(phase), c * np.conj(phase)]], dtype=complex)


def hermitian_eigendecompose(H, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decompose a Hermitian matrix by cyclic complex Jacobi rotations.

    Parameters
    ----------
    H : array_like, shape (n, n)
        Hermitian matrix (checked to within 1e-10).
    tol : float
        Sweeps stop once the off-diagonal Frobenius mass drops below
        ``1e-14 * |H|_F``. If that never happens within 100 sweeps, the
        result is still accepted when ``|H v - lambda v| <= tol * |H|``.

    Returns
    -------
    values : ndarray, shape (n,)
        Real eigenvalues, descending. Exact ties keep the original diagonal
        order.
    vectors : ndarray, shape (n, n)
        Orthonormal eigenvectors as columns, each phase-normalized.
    """
    a = as_cmatrix(H).copy()
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError(f"matrix must be square, got {a.shape}")
    asym = float(np.max(np.abs(a - a.conj().T))) if n else 0.0
    if asym > HERMITIAN_TOL:
        raise ValueError(f"matrix is not Hermitian: max |H - H^H| = {asym:.3e}")
    a = 0.5 * (a + a.conj().T)
    v = np.eye(n, dtype=complex)
    norm = np.linalg.norm(a)
    target = 1e-14 * norm

    def off(m):
        # summed directly; |m|^2 - sum(diag^2) cancels catastrophically
        return np.linalg.norm(m - np.diag(np.diag(m)))

    for _ in range(MAX_SWEEPS):
        if off(a) <= target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300 or abs(apq) < 1e-18 * norm:
                    continue
                u = _jacobi_rotation(a[p, p].real, a[q, q].real, apq)
                idx = [p, q]
                a[:, idx] = a[:, idx] @ u
                a[idx, :] = u.conj().T @ a[idx, :]
                a[p, q] = a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                v[:, idx] = v[:, idx] @ u

    values = np.real(np.diag(a)).copy()
    if off(a) > target:
        h = as_cmatrix(H)
        resid = float(np.max(np.abs(h @ v - v * values))) if n else 0.0
        if resid > tol * max(norm, 1.0):
            raise RuntimeError(f"Jacobi iteration did not converge in {MAX_SWEEPS} sweeps (residual {resid:.2e})")
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = np.column_stack([phase_normalize(v[:, i]) for i in order]) if n else v
    return values, vectors


@dataclass(frozen=True)
class BeamModeSet:
    """Beam modes of a transmission block, strongest first.

    ``eigenvalues[i]`` is the efficiency of generator drive ``tx_modes[:, i]``.
    ``rx_modes`` are the receiver-side modes (eigenvectors of
    ``s21 s21^H``) with their own eigenvalue list ``rx_eigenvalues``; the
    non-zero entries of both lists coincide and paired modes satisfy
    ``s21 @ tx_modes[:, i] = sqrt(xi_i) * rx_modes[:, i]`` up to phase.
    """

    eigenvalues: np.ndarray
    tx_modes: np.ndarray
    rx_eigenvalues: np.ndarray
    rx_modes: np.ndarray

    @property
    def xi_max(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def a_max(self) -> np.ndarray:
        return self.tx_modes[:, 0]

    @property
    def b_max(self) -> np.ndarray:
        return self.rx_modes[:, 0]

    @property
    def paired_count(self) -> int:
        return min(self.tx_modes.shape[0], self.rx_modes.shape[0])

    def dominant_indices(self) -> list[int]:
        """Indices of all tx modes tied with the largest eigenvalue."""
        top = self.eigenvalues[0]
        tol = TIE_TOL * max(1.0, abs(top))
        return [i for i, x in enumerate(self.eigenvalues) if top - x <= tol]

    def second_eigenvalue(self) -> float:
        """Largest eigenvalue not tied with ``xi_max`` (0.0 if none)."""
        rest = [x for i, x in enumerate(self.eigenvalues) if i not in self.dominant_indices()]
        return float(rest[0]) if rest else 0.0


def beam_modes(s21) -> BeamModeSet:
    t = as_cmatrix(s21)
    if t.size == 0:
        raise ValueError("transmission block is empty")
    xi, a = hermitian_eigendecompose(t.conj().T @ t)
    xi_rx, b = hermitian_eigendecompose(t @ t.conj().T)
    # Gram matrices are positive semidefinite; drop rounding below zero
    xi = np.maximum(xi, 0.0)
    xi_rx = np.maximum(xi_rx, 0.0)
    for arr in (xi, a, xi_rx, b):
        arr.setflags(write=False)
    return BeamModeSet(xi, a, xi_rx, b)


def efficiency(s21, v2f) -> float:
    """Fraction of the power driven into the generator ports that reaches the receiver."""
    t = as_cmatrix(s21)
    v = as_cvector(v2f)
    if v.shape[0] != t.shape[1]:
        raise ValueError(f"drive has length {v.shape[0]}, channel expects {t.shape[1]}")
    denom = np.vdot(v, v).real
    if denom == 0:
        raise ValueError("efficiency of a zero drive is undefined")
    out = t @ v
    return float(np.vdot(out, out).real / denom)


def decompose_input(modes: BeamModeSet, v2f) -> np.ndarray:
    """Mode weights ``a_i^H v2f``; ``tx_modes @ weights`` rebuilds the drive."""
    v = as_cvector(v2f)
    if v.shape[0] != modes.tx_modes.shape[0]:
        raise ValueError(
            f"drive has length {v.shape[0]}, modes have length {modes.tx_modes.shape[0]}"
        )
    return modes.tx_modes.conj().T @ v


def weighted_efficiency(weights, eigenvalues) -> float:
    w = np.asarray(weights, dtype=complex)
    xi = np.asarray(eigenvalues, dtype=float)
    if w.shape != xi.shape:
        raise ValueError(f"{w.size} weights for {xi.size} eigenvalues")
    p = np.abs(w) ** 2
    total = p.sum()
    if total == 0:
        raise ValueError("all weights are zero")
    return float(np.dot(xi, p) / total)


def max_efficiency(s21) -> tuple[float, np.ndarray]:
    """Largest achievable efficiency and the drive that achieves it."""
    modes = beam_modes(s21)
    return modes.xi_max, modes.a_max.copy()
