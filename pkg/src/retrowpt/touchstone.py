"""Touchstone version 1 (.sNp) reader and writer for S-parameters.

Data ordering follows the v1 convention: a 2-port point is written
``f S11 S21 S12 S22`` on one line; every other port count is row-major
``S11 S12 ... Snn`` with each matrix row starting on a new line and at most
four complex pairs per line.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .network import ScatteringMatrix

__all__ = [
    "TouchstoneError",
    "TouchstoneDocument",
    "parse_touchstone",
    "write_touchstone",
    "to_scattering_matrix",
    "from_scattering_matrix",
    "read_touchstone_file",
    "write_touchstone_file",
    "port_count_from_path",
]

UNIT_SCALE = {"HZ": 1.0, "KHZ": 1e3, "MHZ": 1e6, "GHZ": 1e9}
UNIT_NAMES = {"HZ": "Hz", "KHZ": "kHz", "MHZ": "MHz", "GHZ": "GHz"}
FORMATS = ("RI", "MA", "DB")
PARAMETERS = ("S", "Y", "Z", "G", "H")
# magnitude written for exact zeros in DB format
DB_FLOOR = -400.0


class TouchstoneError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass
class TouchstoneDocument:
    """Parsed contents of one Touchstone file.

    ``frequencies`` are in ``freq_unit``; ``matrices[k]`` is the n x n
    S-matrix at ``frequencies[k]``.
    """

    port_count: int
    frequencies: np.ndarray = field(default_factory=lambda: np.zeros(0))
    matrices: np.ndarray | None = None
    freq_unit: str = "GHz"
    value_format: str = "MA"
    reference_ohms: float = 50.0
    comments: list[str] = field(default_factory=list)
    parameter_kind: str = "S"

    def __post_init__(self):
        n = int(self.port_count)
        if n < 1:
            raise ValueError("port_count must be positive")
        self.port_count = n
        self.frequencies = np.asarray(self.frequencies, dtype=float).reshape(-1)
        if self.matrices is None:
            self.matrices = np.zeros((0, n, n), dtype=complex)
        self.matrices = np.asarray(self.matrices, dtype=complex).reshape(-1, n, n)
        if self.matrices.shape[0] != self.frequencies.size:
            raise ValueError("one matrix is needed per frequency point")
        if np.any(np.diff(self.frequencies) <= 0):
            raise ValueError("frequencies must be strictly ascending")
        unit = self.freq_unit.upper()
        if unit not in UNIT_SCALE:
            raise ValueError(f"unknown frequency unit {self.freq_unit!r}")
        self.freq_unit = UNIT_NAMES[unit]
        self.value_format = self.value_format.upper()
        if self.value_format not in FORMATS:
            raise ValueError(f"unknown value format {self.value_format!r}")
        if self.parameter_kind.upper() != "S":
            raise ValueError("only S-parameter documents are supported")
        if not self.reference_ohms > 0:
            raise ValueError("reference impedance must be positive")

    @property
    def frequencies_hz(self) -> np.ndarray:
        return self.frequencies * UNIT_SCALE[self.freq_unit.upper()]

    def __len__(self):
        return self.frequencies.size


def _parse_option_line(text: str, lineno: int) -> dict:
    tokens = text.lstrip()[1:].split()
    opts = {}
    i = 0
    while i < len(tokens):
        tok = tokens[i].upper()
        if tok in UNIT_SCALE:
            opts["freq_unit"] = tok
        elif tok in FORMATS:
            opts["value_format"] = tok
        elif tok in PARAMETERS:
            if tok != "S":
                raise TouchstoneError(f"{tok}-parameters are not supported", lineno)
        elif tok == "R":
            if i + 1 >= len(tokens):
                raise TouchstoneError("option 'R' needs a resistance value", lineno)
            try:
                ohms = float(tokens[i + 1])
            except ValueError:
                raise TouchstoneError(f"bad reference resistance {tokens[i + 1]!r}", lineno) from None
            if not ohms > 0:
                raise TouchstoneError("reference resistance must be positive", lineno)
            opts["reference_ohms"] = ohms
            i += 1
        else:
            raise TouchstoneError(f"malformed option line, unknown token {tokens[i]!r}", lineno)
        i += 1
    return opts


def _to_complex(a: np.ndarray, b: np.ndarray, fmt: str) -> np.ndarray:
    if fmt == "RI":
        return a + 1j * b
    mag = a if fmt == "MA" else 10.0 ** (a / 20.0)
    return mag * np.exp(1j * np.deg2rad(b))


def _ordered(values: np.ndarray, n: int) -> np.ndarray:
    """Reshape one point's complex values into an n x n matrix."""
    m = values.reshape(n, n)
    # 2-port files are column-major: S11 S21 S12 S22
    return m.T if n == 2 else m


def parse_touchstone(text: str, port_count: int) -> TouchstoneDocument:
    """Parse Touchstone v1 text holding ``port_count``-port S-parameters.

    Raises
    ------
    TouchstoneError
        On a malformed option line, non-numeric data, an incomplete point,
        non-ascending frequencies or a noise-parameter block. The message
        starts with the offending line number.
    """
    n = int(port_count)
    if n < 1:
        raise ValueError("port_count must be positive")
    if not text.strip():
        raise TouchstoneError("empty Touchstone text")
    per_point = 1 + 2 * n * n
    opts: dict = {}
    comments: list[str] = []
    seen_option = False
    points: list[list[float]] = []
    current: list[float] = []
    start_line = 0

    for lineno, raw in enumerate(text.splitlines(), start=1):
        body, bang, comment = raw.partition("!")
        if bang and not body.strip():
            comments.append(comment.strip())
        stripped = body.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            # only the first option line counts (v1 rule)
            if not seen_option:
                opts = _parse_option_line(stripped, lineno)
                seen_option = True
            continue
        if stripped.startswith("["):
            raise TouchstoneError("Touchstone v2 keywords are not supported", lineno)
        tokens = stripped.split()
        try:
            nums = [float(t) for t in tokens]
        except ValueError:
            bad = next(t for t in tokens if _not_float(t))
            raise TouchstoneError(f"non-numeric token {bad!r}", lineno) from None

        if not current:
            start_line = lineno
            if n == 2 and len(nums) == 5 and points and nums[0] <= points[-1][0]:
                raise TouchstoneError("noise-parameter data is not supported", lineno)
            if n <= 2 and len(nums) != per_point:
                raise TouchstoneError(
                    f"expected {per_point} values per {n}-port point, found {len(nums)}", lineno
                )
            if len(nums) % 2 != 1:
                raise TouchstoneError("a point must start with a frequency followed by complex pairs", lineno)
        elif len(nums) % 2 != 0:
            raise TouchstoneError("continuation line must hold whole complex pairs", lineno)
        current.extend(nums)
        if len(current) > per_point:
            raise TouchstoneError(
                f"point starting at line {start_line} has {len(current) - 1} data values, "
                f"expected {per_point - 1}",
                lineno,
            )
        if len(current) == per_point:
            if points and current[0] <= points[-1][0]:
                if n == 2:
                    raise TouchstoneError("noise-parameter data is not supported", start_line)
                raise TouchstoneError(
                    f"frequency {current[0]:g} does not exceed previous {points[-1][0]:g}", start_line
                )
            points.append(current)
            current = []

    if current:
        raise TouchstoneError(
            f"incomplete point: {len(current) - 1} data values, expected {per_point - 1}"
            f" (datum count not a multiple of {per_point - 1})",
            start_line,
        )

    fmt = opts.get("value_format", "MA")
    if points:
        arr = np.asarray(points, dtype=float)
        freqs = arr[:, 0]
        vals = _to_complex(arr[:, 1::2], arr[:, 2::2], fmt)
        mats = np.stack([_ordered(v, n) for v in vals])
    else:
        freqs = np.zeros(0)
        mats = np.zeros((0, n, n), dtype=complex)
    return TouchstoneDocument(
        port_count=n,
        frequencies=freqs,
        matrices=mats,
        freq_unit=opts.get("freq_unit", "GHZ"),
        value_format=fmt,
        reference_ohms=opts.get("reference_ohms", 50.0),
        comments=comments,
    )


def _not_float(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return True
    return False


def _fmt(x: float) -> str:
    return repr(float(x))


def _pairs(values: np.ndarray, fmt: str) -> list[tuple[float, float]]:
    if fmt == "RI":
        return [(v.real, v.imag) for v in values]
    mag = np.abs(values)
    ang = np.rad2deg(np.angle(values))
    if fmt == "DB":
        with np.errstate(divide="ignore"):
            mag = np.maximum(20.0 * np.log10(mag), DB_FLOOR)
    return list(zip(mag, ang))


def write_touchstone(doc: TouchstoneDocument) -> str:
    """Serialize ``doc``; values are written with full double precision."""
    n = doc.port_count
    fmt = doc.value_format
    lines = [f"! {c}" if c else "!" for c in doc.comments]
    lines.append(f"# {doc.freq_unit.upper()} S {fmt} R {_fmt(doc.reference_ohms)}")
    for f, m in zip(doc.frequencies, doc.matrices):
        if n <= 2:
            flat = m.T.reshape(-1) if n == 2 else m.reshape(-1)
            items = [_fmt(f)] + [f"{_fmt(a)} {_fmt(b)}" for a, b in _pairs(flat, fmt)]
            lines.append(" ".join(items))
            continue
        for r in range(n):
            pairs = [f"{_fmt(a)} {_fmt(b)}" for a, b in _pairs(m[r], fmt)]
            for j in range(0, n, 4):
                chunk = " ".join(pairs[j : j + 4])
                if r == 0 and j == 0:
                    chunk = f"{_fmt(f)} {chunk}"
                lines.append(chunk)
    return "\n".join(lines) + "\n"


def to_scattering_matrix(doc: TouchstoneDocument, frequency_hz: float, tolerance_hz: float) -> ScatteringMatrix:
    """Return the point nearest ``frequency_hz`` if it is within ``tolerance_hz``."""
    if len(doc) == 0:
        raise ValueError("document has no data points")
    f_hz = doc.frequencies_hz
    k = int(np.argmin(np.abs(f_hz - frequency_hz)))
    if abs(f_hz[k] - frequency_hz) > tolerance_hz:
        avail = ", ".join(f"{f:g}" for f in f_hz)
        raise ValueError(
            f"no point within {tolerance_hz:g} Hz of {frequency_hz:g} Hz; available (Hz): {avail}"
        )
    return ScatteringMatrix(doc.matrices[k], float(f_hz[k]), doc.reference_ohms)


def from_scattering_matrix(
    S: ScatteringMatrix, value_format: str = "RI", freq_unit: str = "GHz", comments=()
) -> TouchstoneDocument:
    scale = UNIT_SCALE[freq_unit.upper()]
    return TouchstoneDocument(
        port_count=S.n_ports,
        frequencies=[S.frequency_hz / scale],
        matrices=[S.s],
        freq_unit=freq_unit,
        value_format=value_format,
        reference_ohms=S.reference_impedance,
        comments=list(comments),
    )


def port_count_from_path(path) -> int:
    m = re.search(r"\.s(\d+)p$", str(path), flags=re.IGNORECASE)
    if not m:
        raise ValueError(f"cannot infer port count from file name {str(path)!r} (expected .sNp)")
    return int(m.group(1))


def read_touchstone_file(path, port_count: int | None = None) -> TouchstoneDocument:
    path = Path(path)
    n = port_count or port_count_from_path(path)
    try:
        return parse_touchstone(path.read_text(), n)
    except TouchstoneError as exc:
        raise TouchstoneError(f"{path}: {exc}") from None


def write_touchstone_file(doc: TouchstoneDocument, path) -> Path:
    path = Path(path)
    path.write_text(write_touchstone(doc))
    return path
