"""Discrete-time model of the both-sides retrodirective power loop.

One step is one round trip. With ``T = s21`` (receiver x generator block),
the forward waves evolve as::

    v1f' = conj(L) G conj(T T^H) v1f + r
    v2f' = c2 T^H T v2f + conj(G) T^H conj(r)

where ``c2`` is ``conj(L) G`` under the ``as_eq6`` convention and
``L conj(G)`` under ``conjugate_of_v1f`` (the factor obtained by
substituting ``v2f = conj(G) T^H conj(v1f)``). Both share the same
magnitude, so stability and efficiency agree; only the per-step phase of
``v2f`` differs. The loop is marginally stable when ``|L G| xi_max == 1``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Sequence

import numpy as np

from .channels import make_rng
from .eigenbeam import BeamModeSet, beam_modes
from .network import as_cmatrix, as_cvector

__all__ = [
    "AS_EQ6",
    "CONJUGATE_OF_V1F",
    "LoopConfig",
    "LoopState",
    "step",
    "zero_input_response",
    "classify_stability",
    "marginal_gain",
    "marginal_gain_db",
    "gain_db_for_marginal",
    "dominant_projection",
    "simulate",
    "SimulationResult",
    "gain_sweep",
    "SweepPoint",
    "SweepResult",
    "db_to_amplitude",
    "loss_from_db",
]

AS_EQ6 = "as_eq6"
CONJUGATE_OF_V1F = "conjugate_of_v1f"
MARGINAL_TOL = 1e-9
DIVERGENCE_LIMIT = 1e150


def db_to_amplitude(db: float) -> float:
    return 10.0 ** (db / 20.0)


def loss_from_db(loss_db: float) -> float:
    """Loop loss factor ``L`` for a positive loss in dB (``L_dB = -20 log10 L``)."""
    return 10.0 ** (-loss_db / 20.0)


@dataclass(frozen=True)
class LoopConfig:
    """Parameters of one retrodirective loop.

    ``saturation`` is the amplitude of the per-element tanh soft limiter,
    or ``None`` for a linear loop. ``noise_power`` is the variance of the
    complex Gaussian signal injected at each receiver port per step.
    """

    s21: np.ndarray
    loss: complex = 1.0
    gain: complex = 1.0
    noise_power: float = 0.0
    saturation: float | None = None
    v2f_convention: str = AS_EQ6

    def __post_init__(self):
        t = as_cmatrix(self.s21).copy()
        if t.size == 0:
            raise ValueError("transmission block is empty")
        t.setflags(write=False)
        object.__setattr__(self, "s21", t)
        if abs(self.loss) > 1 + 1e-12:
            raise ValueError(f"|loss| must not exceed 1, got {abs(self.loss):g}")
        if self.noise_power < 0:
            raise ValueError("noise_power must be non-negative")
        if self.saturation is not None and not self.saturation > 0:
            raise ValueError("saturation amplitude must be positive")
        if self.v2f_convention not in (AS_EQ6, CONJUGATE_OF_V1F):
            raise ValueError(f"unknown v2f convention {self.v2f_convention!r}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.s21.shape

    @cached_property
    def modes(self) -> BeamModeSet:
        return beam_modes(self.s21)

    @cached_property
    def _operators(self):
        t = self.s21
        th = t.conj().T
        return np.conj(t @ th), th @ t, th

    @property
    def rx_factor(self) -> complex:
        return complex(np.conj(self.loss) * self.gain)

    @property
    def tx_factor(self) -> complex:
        if self.v2f_convention == AS_EQ6:
            return complex(np.conj(self.loss) * self.gain)
        return complex(self.loss * np.conj(self.gain))

    @property
    def loop_gain(self) -> float:
        return abs(self.loss * self.gain)

    def with_gain(self, gain: complex) -> "LoopConfig":
        return replace(self, gain=gain)


@dataclass(frozen=True)
class LoopState:
    k: int
    v1f: np.ndarray
    v2f: np.ndarray

    @classmethod
    def zeros(cls, config: LoopConfig) -> "LoopState":
        m, n = config.shape
        return cls(0, np.zeros(m, dtype=complex), np.zeros(n, dtype=complex))


def _soft_limit(x: np.ndarray, sat: float) -> np.ndarray:
    mag = np.abs(x)
    scale = np.ones_like(mag)
    nz = mag > 0
    scale[nz] = sat * np.tanh(mag[nz] / sat) / mag[nz]
    return x * scale


def _check_state(config: LoopConfig, v1f, v2f) -> tuple[np.ndarray, np.ndarray]:
    m, n = config.shape
    v1 = np.asarray(v1f, dtype=complex).reshape(-1)
    v2 = np.asarray(v2f, dtype=complex).reshape(-1)
    if v1.size != m or v2.size != n:
        raise ValueError(f"state lengths ({v1.size}, {v2.size}) do not match channel {m}x{n}")
    return v1, v2


def step(config: LoopConfig, state: LoopState, r=None) -> LoopState:
    """Advance the loop by one round trip with receiver-side injection ``r``."""
    v1, v2 = _check_state(config, state.v1f, state.v2f)
    rx_op, tx_op, inject = config._operators
    new1 = config.rx_factor * (rx_op @ v1)
    new2 = config.tx_factor * (tx_op @ v2)
    if r is not None:
        r = np.asarray(r, dtype=complex).reshape(-1)
        if r.size != config.shape[0]:
            raise ValueError(f"injection has length {r.size}, expected {config.shape[0]}")
        new1 = new1 + r
        new2 = new2 + np.conj(config.gain) * (inject @ np.conj(r))
    if config.saturation is not None:
        new1 = _soft_limit(new1, config.saturation)
        new2 = _soft_limit(new2, config.saturation)
    return LoopState(state.k + 1, new1, new2)


def zero_input_response(config: LoopConfig, v0_rx, v0_tx, k: int) -> LoopState:
    """Closed-form state after ``k`` noise-free linear steps.

    Each mode scales by ``(factor * xi_i) ** k``. The receiver recursion
    matrix is ``conj(T T^H)``, whose eigenvectors are the conjugated
    ``rx_modes``.
    """
    if config.saturation is not None:
        raise ValueError("closed-form response only holds for the linear loop (saturation configured)")
    if k < 0:
        raise ValueError("k must be non-negative")
    v1, v2 = _check_state(config, v0_rx, v0_tx)
    if k == 0:
        return LoopState(0, v1.copy(), v2.copy())
    modes = config.modes
    b = np.conj(modes.rx_modes)
    w1 = b.conj().T @ v1
    w2 = modes.tx_modes.conj().T @ v2
    g1 = (config.rx_factor * modes.rx_eigenvalues.astype(complex)) ** k
    g2 = (config.tx_factor * modes.eigenvalues.astype(complex)) ** k
    return LoopState(k, b @ (g1 * w1), modes.tx_modes @ (g2 * w2))


def classify_stability(config: LoopConfig) -> tuple[str, float]:
    rho = config.loop_gain * config.modes.xi_max
    if abs(rho - 1.0) <= MARGINAL_TOL:
        return "marginal", rho
    return ("unstable" if rho > 1.0 else "stable"), rho


def marginal_gain(s21, loss_magnitude: float = 1.0) -> float:
    """Generator gain magnitude ``1 / (|L| xi_max)`` that puts the loop at the margin."""
    if not 0 < loss_magnitude <= 1:
        raise ValueError("loss magnitude must be in (0, 1]")
    xi = beam_modes(s21).xi_max
    if xi <= 0:
        raise ValueError("channel has no power path (xi_max = 0)")
    return 1.0 / (loss_magnitude * xi)


def gain_db_for_marginal(xi_max: float, loss_db: float = 0.0) -> float:
    """``G_dB = L_dB - 20 log10(xi_max)``, the dB form of the margin condition."""
    if xi_max <= 0:
        raise ValueError("channel has no power path (xi_max = 0)")
    return loss_db - 20.0 * math.log10(xi_max)


def marginal_gain_db(s21, loss_db: float = 0.0) -> float:
    return gain_db_for_marginal(beam_modes(s21).xi_max, loss_db)


def dominant_projection(modes: BeamModeSet, v0) -> tuple[np.ndarray, bool]:
    """Project ``v0`` onto the ``xi_max`` eigenspace.

    Returns the projection and a flag that is True when it vanishes, i.e.
    the loop started orthogonal to the optimal beam and has no steady state.
    """
    v = as_cvector(v0)
    a = modes.tx_modes[:, modes.dominant_indices()]
    if v.size != a.shape[0]:
        raise ValueError(f"vector has length {v.size}, modes have length {a.shape[0]}")
    proj = a @ (a.conj().T @ v)
    scale = max(np.linalg.norm(v), 1e-300)
    degenerate = bool(np.linalg.norm(proj) <= 1e-12 * scale)
    if degenerate:
        proj = np.zeros_like(proj)
    return proj, degenerate


@dataclass
class SimulationResult:
    """Per-step trace of :func:`simulate`; row i is the state after step ``k[i]``."""

    k: np.ndarray
    v1f_norm: np.ndarray
    v2f_norm: np.ndarray
    efficiency: np.ndarray
    mode_purity: np.ndarray
    received_power: np.ndarray
    final: LoopState
    diverged: bool = False

    def __len__(self):
        return self.k.size

    def rows(self):
        for i in range(self.k.size):
            yield (int(self.k[i]), self.v1f_norm[i], self.v2f_norm[i], self.efficiency[i], self.mode_purity[i])


def _noise(rng: np.random.Generator, m: int, power: float) -> np.ndarray:
    scale = math.sqrt(power / 2.0)
    return scale * (rng.standard_normal(m) + 1j * rng.standard_normal(m))


def simulate(config: LoopConfig, initial: LoopState, steps: int, seed: int = 0) -> SimulationResult:
    """Iterate :func:`step` and record norms, efficiency and dominant-mode purity.

    Efficiency and purity are NaN while ``v2f`` is exactly zero. A run whose
    state norm passes 1e150 stops early with ``diverged=True``.
    """
    if steps < 1:
        raise ValueError("steps must be positive")
    m, n = config.shape
    rng = make_rng(seed)
    t = config.s21
    a_max = config.modes.a_max
    state = initial
    _check_state(config, state.v1f, state.v2f)
    out = np.full((steps, 6), np.nan)
    diverged = False
    count = 0
    for i in range(steps):
        r = _noise(rng, m, config.noise_power) if config.noise_power > 0 else None
        state = step(config, state, r)
        n1 = np.linalg.norm(state.v1f)
        n2 = np.linalg.norm(state.v2f)
        if not (n1 <= DIVERGENCE_LIMIT and n2 <= DIVERGENCE_LIMIT):
            diverged = True
            break
        rx = t @ state.v2f
        p_rx = float(np.vdot(rx, rx).real)
        out[i, :3] = state.k, n1, n2
        out[i, 5] = p_rx
        if n2 > 0:
            out[i, 3] = p_rx / n2**2
            out[i, 4] = abs(np.vdot(a_max, state.v2f)) ** 2 / n2**2
        count = i + 1
    out = out[:count]
    return SimulationResult(
        k=out[:, 0].astype(int),
        v1f_norm=out[:, 1],
        v2f_norm=out[:, 2],
        efficiency=out[:, 3],
        mode_purity=out[:, 4],
        received_power=out[:, 5],
        final=state,
        diverged=diverged,
    )


@dataclass(frozen=True)
class SweepPoint:
    gain_db: float
    eff_mean: float
    eff_std: float
    label: str
    rho: float
    diverged: bool = False

    @property
    def defined(self) -> bool:
        return not math.isnan(self.eff_mean)


@dataclass
class SweepResult:
    points: list[SweepPoint]
    transition_gain_db: float | None
    predicted_gain_db: float | None = None

    def rows(self):
        for p in self.points:
            yield (p.gain_db, p.eff_mean, p.eff_std, p.label)


def measured_efficiency(result: SimulationResult, n_rx: int, floor: float) -> np.ndarray:
    """Efficiency as seen through a receiver with a measurement floor.

    The true efficiency is weighted by ``P / (P + n_rx * floor)`` where
    ``P`` is the signal power reaching the active receivers, so a loop whose
    output is buried in the floor reads close to zero.
    """
    eff = result.efficiency
    if floor <= 0:
        return eff
    p = result.received_power
    return eff * p / (p + n_rx * floor)


def _sweep_point(args) -> SweepPoint:
    config, gain_db, seed, steps, discard, floor = args
    label, rho = classify_stability(config)
    res = simulate(config, LoopState.zeros(config), steps, seed)
    eff = measured_efficiency(res, config.shape[0], floor)[discard:]
    eff = eff[~np.isnan(eff)]
    if eff.size == 0:
        return SweepPoint(gain_db, math.nan, math.nan, label, rho, res.diverged)
    return SweepPoint(gain_db, float(eff.mean()), float(eff.std()), label, rho, res.diverged)


def find_transition(points: Sequence[SweepPoint]) -> float | None:
    """Gain just above the largest efficiency drop in a high-to-low sweep."""
    best, where = -math.inf, None
    for hi, lo in zip(points, points[1:]):
        if not (hi.defined and lo.defined):
            continue
        drop = hi.eff_mean - lo.eff_mean
        if drop > best:
            best, where = drop, hi.gain_db
    return where


def gain_sweep(
    s21,
    loss: complex,
    gains_db: Sequence[float],
    noise_power: float,
    saturation: float | None = None,
    seed: int = 0,
    steps_per_point: int = 2000,
    discard: int = 1000,
    measurement_floor: float = 0.0,
    v2f_convention: str = AS_EQ6,
    max_workers: int | None = None,
) -> SweepResult:
    """Sweep generator gain from high to low and locate the margin.

    Every grid point starts from a silent loop driven only by the injected
    noise, with its own seed ``seed ^ index``, so points are independent and
    may run in parallel without changing the result. The transition is the
    grid point just above the largest drop in mean efficiency.
    """
    if len(gains_db) == 0:
        raise ValueError("gain grid is empty")
    if discard >= steps_per_point:
        raise ValueError("discard must be smaller than steps_per_point")
    grid = sorted((float(g) for g in gains_db), reverse=True)
    base = LoopConfig(s21, loss, 1.0, noise_power, saturation, v2f_convention)
    jobs = [
        (base.with_gain(db_to_amplitude(g)), g, seed ^ i, steps_per_point, discard, measurement_floor)
        for i, g in enumerate(grid)
    ]
    if max_workers and max_workers > 1:
        with ThreadPoolExecutor(max_workers) as pool:
            points = list(pool.map(_sweep_point, jobs))
    else:
        points = [_sweep_point(j) for j in jobs]
    try:
        predicted = gain_db_for_marginal(base.modes.xi_max, -20.0 * math.log10(abs(loss)))
    except ValueError:
        predicted = None
    return SweepResult(points, find_transition(points), predicted)
