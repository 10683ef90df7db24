"""Command-line front end: ``retrowpt <subcommand> [options]``.

Every subcommand writes one machine-readable artifact (JSON, CSV or
Touchstone) to ``--out`` or stdout. Status is 0 on success, 2 on a usage
or validation error and 1 on I/O or parse failures.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .channels import embed_singular_values, make_rng, random_lossless_reciprocal
from .eigenbeam import beam_modes
from .experiment import (
    fit_regression,
    fixed_slope_fit,
    load_table2,
    recompute_table,
    regression_points,
)
from .loop import (
    AS_EQ6,
    CONJUGATE_OF_V1F,
    LoopConfig,
    LoopState,
    db_to_amplitude,
    gain_db_for_marginal,
    gain_sweep,
    loss_from_db,
    simulate,
)
from .network import PortPartition, subblock
from .touchstone import (
    TouchstoneError,
    from_scattering_matrix,
    read_touchstone_file,
    to_scattering_matrix,
    write_touchstone,
)

SUBCOMMANDS = ("analyze", "modes", "simulate", "sweep", "synth", "regress", "table2")


class UsageError(Exception):
    def __init__(self, message: str, status: int = 2):
        super().__init__(message)
        self.status = status


@dataclass
class Command:
    subcommand: str
    options: dict = field(default_factory=dict)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")

    def exit(self, status=0, message=None):
        raise UsageError(message or "", status)


def _int_list(text: str) -> list[int]:
    try:
        return [int(p) for p in text.replace(";", ",").split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated port numbers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def parse_grid(text: str) -> list[float]:
    """``start:stop:step`` in dB, inclusive, returned high to low."""
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"gain grid must be start:stop:step, got {text!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"gain grid must be numeric, got {text!r}") from None
    if step <= 0:
        raise argparse.ArgumentTypeError("grid step must be positive")
    hi, lo = max(start, stop), min(start, stop)
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [round(hi - i * step, 12) for i in range(count)]


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _add_channel(p: argparse.ArgumentParser):
    g = p.add_argument_group("channel")
    g.add_argument("file", nargs="?", help="Touchstone .sNp file")
    g.add_argument("--rx", type=_int_list, help="active receiver ports, e.g. 1,2")
    g.add_argument("--tx", type=_int_list, help="active generator ports, e.g. 7,8")
    g.add_argument("--rx-absorb", type=_int_list, help="absorbing receiver-side ports")
    g.add_argument("--tx-absorb", type=_int_list, help="absorbing generator-side ports")
    g.add_argument("--freq-ghz", type=float, default=2.4, help="analysis frequency (default 2.4)")
    g.add_argument("--freq-tol-mhz", type=float, default=50.0, help="frequency match tolerance")
    g.add_argument("--sigmas", type=_float_list, help="synthetic channel with these singular values")
    g.add_argument("--random-n", type=int, help="random lossless reciprocal channel with N ports")
    g.add_argument("--channel-seed", type=_seed, default=0, help="seed for synthetic channels")


def _add_loop(p: argparse.ArgumentParser, sweep: bool):
    p.add_argument("--loss-db", type=float, default=0.0, help="loop loss L_dB (>= 0)")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--noise-power", type=float, default=1e-6 if sweep else 0.0)
    p.add_argument("--sat", type=float, default=1.0 if sweep else None, help="saturation amplitude")
    p.add_argument("--no-sat", action="store_true", help="disable saturation")
    p.add_argument("--convention", choices=(AS_EQ6, CONJUGATE_OF_V1F), default=AS_EQ6)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="retrowpt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"retrowpt {__version__}")
    sub = parser.add_subparsers(dest="subcommand", parser_class=_Parser, metavar="SUBCOMMAND")

    p = sub.add_parser("analyze", help="maximum efficiency, optimal drive and marginal gain (JSON)")
    _add_channel(p)
    p.add_argument("--loss-db", type=float, default=0.0)
    p.add_argument("--out")

    p = sub.add_parser("modes", help="all beam modes (CSV)")
    _add_channel(p)
    p.add_argument("--out")

    p = sub.add_parser("simulate", help="loop time series (CSV)")
    _add_channel(p)
    _add_loop(p, sweep=False)
    p.add_argument("--gain-db", type=float, help="generator gain (default: marginal gain)")
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--init", choices=("random", "amax", "zero"), default="random")
    p.add_argument("--out")

    p = sub.add_parser("sweep", help="high-to-low gain sweep (CSV) and transition gain")
    _add_channel(p)
    _add_loop(p, sweep=True)
    p.add_argument("--gains", type=parse_grid, required=True, help="start:stop:step in dB")
    p.add_argument("--floor-power", type=float, default=1e-4, help="receiver measurement floor per port")
    p.add_argument("--steps", type=int, default=2000, help="steps per grid point")
    p.add_argument("--discard", type=int, default=1000, help="initial steps dropped per point")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--summary", help="write transition summary JSON here")
    p.add_argument("--out")

    p = sub.add_parser("synth", help="synthetic channel as a Touchstone file")
    p.add_argument("--n", type=int, help="random lossless reciprocal channel with N ports")
    p.add_argument("--sigmas", type=_float_list, help="channel with these rx/tx singular values")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--format", choices=("RI", "MA", "DB"), default="RI")
    p.add_argument("--freq-ghz", type=float, default=2.4)
    p.add_argument("--out")

    p = sub.add_parser("regress", help="free- and fixed-slope loss regression (JSON)")
    p.add_argument("--table2", action="store_true", help="use the bundled 30-case data")
    p.add_argument("--points", help="CSV with columns g_db,y_db instead of the bundled data")
    p.add_argument("--plot-csv", help="write g_db,y_db,y_fit_free,y_fit_fixed here")
    p.add_argument("--out")

    p = sub.add_parser("table2", help="bundled cases with recomputed columns (CSV)")
    p.add_argument("--out")
    return parser


def parse_args(argv: list[str]) -> Command:
    """Validate ``argv``; ``-h``/``--help`` yields a ``help`` command carrying the text."""
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except UsageError as exc:
        if exc.status == 0:
            buf = io.StringIO()
            target = parser
            sub = next((a for a in argv if a in SUBCOMMANDS), None)
            if sub:
                target = parser._subparsers._group_actions[0].choices[sub]
            target.print_help(buf)
            text = str(exc) if argv and argv[0] == "--version" else buf.getvalue()
            return Command("help", {"text": text})
        raise
    if ns.subcommand is None:
        raise UsageError(f"{parser.format_usage()}retrowpt: error: a subcommand is required")
    opts = vars(ns)
    cmd = opts.pop("subcommand")
    _validate(cmd, opts, parser)
    return Command(cmd, opts)


def _validate(cmd: str, o: dict, parser):
    def fail(msg):
        raise UsageError(f"retrowpt {cmd}: error: {msg}")

    if cmd in ("analyze", "modes", "simulate", "sweep"):
        sources = [o.get("file") is not None, o.get("sigmas") is not None, o.get("random_n") is not None]
        if sum(sources) != 1:
            fail("give exactly one channel source: FILE, --sigmas or --random-n")
        if (o.get("file") or o.get("random_n")) and not (o.get("rx") and o.get("tx")):
            fail("--rx and --tx are required with FILE or --random-n")
        if o.get("loss_db", 0) < 0:
            fail("--loss-db must be non-negative")
    if cmd in ("simulate", "sweep"):
        if o["noise_power"] < 0:
            fail("--noise-power must be non-negative")
        if o.get("sat") is not None and o["sat"] <= 0:
            fail("--sat must be positive")
        if o["steps"] < 1:
            fail("--steps must be positive")
    if cmd == "sweep" and not 0 <= o["discard"] < o["steps"]:
        fail("--discard must be in [0, steps)")
    if cmd == "synth" and (o["n"] is None) == (o["sigmas"] is None):
        fail("give exactly one of --n or --sigmas")
    if cmd == "regress" and not (o["table2"] or o["points"]):
        fail("give --table2 or --points")


# ---------- execution ----------


def _channel(o: dict):
    """Return (s21 block, partition, full S-matrix) for the selected source."""
    if o.get("sigmas") is not None:
        S, part = embed_singular_values(o["sigmas"], o["channel_seed"])
    else:
        if o.get("random_n") is not None:
            S = random_lossless_reciprocal(o["random_n"], o["channel_seed"])
        else:
            doc = read_touchstone_file(o["file"])
            S = to_scattering_matrix(doc, o["freq_ghz"] * 1e9, o["freq_tol_mhz"] * 1e6)
        if o.get("rx_absorb") is not None or o.get("tx_absorb") is not None:
            part = PortPartition(o["rx"], o["tx"], o.get("rx_absorb") or (), o.get("tx_absorb") or ())
            part.validate(S.n_ports)
        else:
            part = PortPartition.from_active(S.n_ports, o["rx"], o["tx"])
    return subblock(S, part.rx_active, part.tx_active), part, S


def _num(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_num(x) for x in r])
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _emit(text: str, path, stdout):
    if path:
        Path(path).write_text(text)
    else:
        stdout.write(text)


def _cplx(v) -> list[list[float]]:
    return [[float(z.real), float(z.imag)] for z in v]


def _run_analyze(o, out, err):
    t, part, S = _channel(o)
    modes = beam_modes(t)
    xi = modes.xi_max
    report = {
        "rx": list(part.rx_active),
        "tx": list(part.tx_active),
        "frequency_hz": S.frequency_hz,
        "xi_list": [float(x) for x in modes.eigenvalues],
        "xi_max": xi,
        "a_max": _cplx(modes.a_max),
        "eta_max_pct": round(100.0 * xi, 2),
        "loss_db": o["loss_db"],
        "marginal_gain_db": gain_db_for_marginal(xi, o["loss_db"]) if xi > 0 else None,
        "tied_modes": len(modes.dominant_indices()),
    }
    _emit(_json(report), o["out"], out)


def _run_modes(o, out, err):
    t, part, _ = _channel(o)
    modes = beam_modes(t)
    rows = []
    for side, vals, vecs, ports in (
        ("tx", modes.eigenvalues, modes.tx_modes, part.tx_active),
        ("rx", modes.rx_eigenvalues, modes.rx_modes, part.rx_active),
    ):
        for i, x in enumerate(vals):
            for port, z in zip(ports, vecs[:, i]):
                rows.append((i + 1, float(x), side, port, z.real, z.imag))
    _emit(_csv(("mode", "xi", "side", "port", "re", "im"), rows), o["out"], out)


def _sat(o):
    return None if o.get("no_sat") else o.get("sat")


def _run_simulate(o, out, err):
    t, _, _ = _channel(o)
    modes = beam_modes(t)
    loss = loss_from_db(o["loss_db"])
    if o["gain_db"] is None:
        if modes.xi_max <= 0:
            raise UsageError("channel has no power path; give --gain-db explicitly")
        gain = 1.0 / (loss * modes.xi_max)
    else:
        gain = db_to_amplitude(o["gain_db"])
    cfg = LoopConfig(t, loss, gain, o["noise_power"], _sat(o), o["convention"])
    m, n = t.shape
    if o["init"] == "zero":
        init = LoopState.zeros(cfg)
    elif o["init"] == "amax":
        init = LoopState(0, np.zeros(m, dtype=complex), modes.a_max.copy())
    else:
        rng = make_rng(o["seed"] ^ 0x5EED)
        init = LoopState(
            0,
            rng.standard_normal(m) + 1j * rng.standard_normal(m),
            rng.standard_normal(n) + 1j * rng.standard_normal(n),
        )
    res = simulate(cfg, init, o["steps"], o["seed"])
    _emit(_csv(("k", "v1f_norm", "v2f_norm", "efficiency", "mode_purity"), res.rows()), o["out"], out)
    if res.diverged:
        err.write(f"warning: state exceeded 1e150 at step {len(res) + 1}; series truncated\n")


def _run_sweep(o, out, err):
    t, _, _ = _channel(o)
    res = gain_sweep(
        t,
        loss_from_db(o["loss_db"]),
        o["gains"],
        o["noise_power"],
        _sat(o),
        seed=o["seed"],
        steps_per_point=o["steps"],
        discard=o["discard"],
        measurement_floor=o["floor_power"],
        v2f_convention=o["convention"],
        max_workers=o["workers"],
    )
    _emit(_csv(("gain_db", "eff_mean", "eff_std", "label"), res.rows()), o["out"], out)
    summary = {
        "transition_gain_db": res.transition_gain_db,
        "predicted_gain_db": res.predicted_gain_db,
        "grid_points": len(res.points),
    }
    if o["summary"]:
        Path(o["summary"]).write_text(_json(summary))
    err.write(
        f"transition_gain_db={_num(res.transition_gain_db)} predicted_gain_db={_num(res.predicted_gain_db)}\n"
    )


def _run_synth(o, out, err):
    if o["sigmas"] is not None:
        S, part = embed_singular_values(o["sigmas"], o["seed"], o["freq_ghz"] * 1e9)
        note = [
            f"synthetic channel, singular values {','.join(map(repr, o['sigmas']))}, seed {o['seed']}",
            f"rx ports {','.join(map(str, part.rx_active))}; tx ports {','.join(map(str, part.tx_active))}",
        ]
    else:
        S = random_lossless_reciprocal(o["n"], o["seed"], o["freq_ghz"] * 1e9)
        note = [f"random lossless reciprocal {o['n']}-port, seed {o['seed']}"]
    doc = from_scattering_matrix(S, o["format"], comments=note)
    _emit(write_touchstone(doc), o["out"], out)


def _load_points(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    try:
        return np.array([(float(r["g_db"]), float(r["y_db"])) for r in rows])
    except (KeyError, ValueError) as exc:
        raise UsageError(f"{path}: expected numeric columns g_db,y_db ({exc})", 1) from None


def _run_regress(o, out, err):
    pts = regression_points(load_table2()) if o["table2"] else _load_points(o["points"])
    free = fit_regression(pts)
    fixed = fixed_slope_fit(pts)
    _emit(_json({"free": free.to_dict(), "fixed": fixed.to_dict()}), o["out"], out)
    if o["plot_csv"]:
        order = np.argsort(pts[:, 0], kind="stable")
        rows = [(g, y, free.predict(g), fixed.predict(g)) for g, y in pts[order]]
        Path(o["plot_csv"]).write_text(_csv(("g_db", "y_db", "y_fit_free", "y_fit_fixed"), rows))


def _run_table2(o, out, err):
    rows = recompute_table(load_table2())
    header = list(rows[0])
    _emit(_csv(header, ([r[h] for h in header] for r in rows)), o["out"], out)
    bad = [r["case"] for r in rows if not (r["error_ok"] and r["gain_ok"] and r["loss_ok"])]
    err.write(f"{len(rows)} cases, {len(bad)} mismatches" + (f": {bad}" if bad else "") + "\n")


RUNNERS = {
    "analyze": _run_analyze,
    "modes": _run_modes,
    "simulate": _run_simulate,
    "sweep": _run_sweep,
    "synth": _run_synth,
    "regress": _run_regress,
    "table2": _run_table2,
}


def execute(cmd: Command, stdout=None, stderr=None) -> int:
    out = stdout or sys.stdout
    err = stderr or sys.stderr
    if cmd.subcommand == "help":
        out.write(cmd.options["text"])
        return 0
    try:
        RUNNERS[cmd.subcommand](cmd.options, out, err)
    except UsageError as exc:
        err.write(f"{exc}\n")
        return exc.status
    except (TouchstoneError, OSError) as exc:
        err.write(f"retrowpt {cmd.subcommand}: {exc}\n")
        return 1
    except ValueError as exc:
        err.write(f"retrowpt {cmd.subcommand}: error: {exc}\n")
        return 2
    return 0


def main(argv: list[str] | None = None, stdout=None, stderr=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cmd = parse_args(argv)
    except UsageError as exc:
        (stderr or sys.stderr).write(f"{exc}\n")
        return exc.status
    return execute(cmd, stdout, stderr)


if __name__ == "__main__":
    sys.exit(main())
