"""Command-line front end: one subcommand per reproducible experiment.

Subcommands map onto the study's figures: ``waveform`` (source packet),
``store`` (input/slowed/retrieved waveforms with efficiencies), ``scan``
(optical-depth, control-strength, and storage-time sweeps), ``fit``
(transmission-curve and decay fits), and ``stats`` (Monte Carlo photon
statistics).  Outputs are CSV (schema-versioned header comment, floats at
9 significant digits) plus JSON summaries; given identical configuration
and seed, re-runs are byte-identical.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 parse error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .core import UNITS, Wavepacket
from .errors import ConfigError, DataParseError, NumericalError, TimeTagParseError
from .optimize import scan_optical_depth, scan_storage_time
from .spectral import TransmissionCurve, fit_eit
from .stats import CHANNEL_G, SourceStatModel, conditional_g2, estimate_rcs, simulate_event_stream
from .storage import (
    fit_gaussian_decay,
    intensity_fwhm,
    run_slow_light,
    run_storage,
    storage_time_at,
)
from .timetags import write_timetag_file

_CSV_VERSION = 1


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.9g}"


def write_csv(path: Path, schema: str, columns: dict) -> None:
    names = list(columns)
    rows = len(next(iter(columns.values())))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# eitmem-csv v{_CSV_VERSION} schema={schema}\n")
        fh.write(",".join(names) + "\n")
        for i in range(rows):
            fh.write(",".join(_fmt(columns[name][i]) for name in names) + "\n")


def read_csv_columns(path: Path, expected: list[str]) -> dict:
    """Parse a two-plus-column numeric CSV written by this tool (or by hand)."""
    columns: dict[str, list[float]] = {name: [] for name in expected}
    header: list[str] | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            parts = [p.strip() for p in stripped.split(",")]
            if header is None:
                header = parts
                missing = [name for name in expected if name not in header]
                if missing:
                    raise DataParseError(lineno, f"missing columns {missing} in header {header}")
                continue
            if len(parts) != len(header):
                raise DataParseError(lineno, f"expected {len(header)} fields, got {len(parts)}")
            for name in expected:
                raw = parts[header.index(name)]
                try:
                    columns[name].append(float(raw))
                except ValueError:
                    raise DataParseError(lineno, f"bad value {raw!r} for {name}") from None
    if header is None:
        raise DataParseError(0, "empty file")
    return {name: np.array(vals) for name, vals in columns.items()}


def _round_floats(obj):
    if isinstance(obj, float):
        if math.isnan(obj):
            return None
        return float(f"{obj:.9g}") if math.isfinite(obj) else obj
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return _round_floats(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_round_floats(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_transmission_csv(path: Path, curve: TransmissionCurve) -> None:
    write_csv(path, "eit-transmission", {
        "detuning": curve.detunings,
        "transmission": curve.transmission,
    })


def read_transmission_csv(path: Path) -> TransmissionCurve:
    cols = read_csv_columns(path, ["detuning", "transmission"])
    return TransmissionCurve(cols["detuning"], cols["transmission"])


def cmd_waveform(cfg: RunConfig, out: Path) -> Path:
    packet = cfg.waveform()
    ns_per_unit = UNITS.time_to_ns(1.0)
    mask = (
        packet.precursor_mask
        if packet.precursor_mask is not None
        else np.zeros(packet.grid.n, dtype=bool)
    )
    path = out / "waveform.csv"
    write_csv(path, "waveform", {
        "tau_ns": UNITS.time_to_ns(packet.grid.times()),
        "intensity": packet.intensity / ns_per_unit,  # per ns; integrates to 1
        "is_precursor": mask,
    })
    write_json(out / "waveform_summary.json", {
        "fwhm_ns": UNITS.time_to_ns(intensity_fwhm(packet)),
        "tau0_ns": UNITS.time_to_ns(cfg.source.tau0),
        "peak_time_ns": UNITS.time_to_ns(packet.peak_time()),
        "norm": packet.norm(),
        "norm_excluding_precursor": packet.norm(exclude_precursor=True),
    })
    return path


def cmd_store(cfg: RunConfig, out: Path) -> Path:
    packet = cfg.waveform()
    ens = cfg.ensemble
    ctrl = cfg.control.profile(packet, ens)
    stored = run_storage(packet, ens, ctrl, cfg.decay, cfg.solver)
    grid_end = stored.input.grid.t_end
    slow = run_slow_light(packet, ens, ctrl.omega_peak, cfg.solver, tail=grid_end - packet.grid.t_end)

    t_ns = UNITS.time_to_ns(stored.input.grid.times())
    ns_per_unit = UNITS.time_to_ns(1.0)
    n = stored.input.grid.n

    def per_ns(w: Wavepacket) -> np.ndarray:
        inten = np.zeros(n)
        inten[: w.grid.n] = w.intensity[:n]
        return inten / ns_per_unit

    path = out / "store.csv"
    write_csv(path, "store", {
        "tau_ns": t_ns,
        "input": per_ns(stored.input),
        "slowed": per_ns(slow.retrieved),
        "retrieved": per_ns(stored.retrieved),
    })
    write_json(out / "store_summary.json", {
        "od": ens.od,
        "omega_peak": ctrl.omega_peak,
        "se": stored.se,
        "slow_light_efficiency": slow.se,
        "likeness": stored.likeness,
        "optimal_delay_ns": UNITS.time_to_ns(stored.optimal_delay),
        "slow_light_delay_ns": UNITS.time_to_ns(slow.optimal_delay),
        "storage_time_ns": UNITS.time_to_ns(ctrl.storage_time),
    })
    return path


def cmd_scan(cfg: RunConfig, axis: str, out: Path, jobs: int) -> Path:
    packet = cfg.waveform()
    ens = cfg.ensemble
    scan = cfg.scan
    if axis == "od":
        result = scan_optical_depth(
            np.asarray(scan.od_values),
            ens,
            packet,
            (scan.omega_min, scan.omega_max),
            cfg.solver,
            storage_time=scan.storage_time,
            decay=cfg.decay,
            edge_10_90=cfg.control.edge_10_90,
            n_coarse=scan.n_coarse,
            jobs=jobs,
        )
        path = out / "od_scan.csv"
        write_csv(path, "od-scan", {
            "od": result.axis,
            "se_opt": result.se,
            "omega_opt": result.optimal_omega,
            "omega_halfwidth": result.meta["omega_halfwidth"],
        })
        write_json(out / "od_scan_meta.json", {
            "t_off_opt": list(result.meta["t_off_opt"]),
            "at_boundary": list(result.meta["at_boundary"]),
            "errors": result.meta["errors"],
            "storage_time_ns": UNITS.time_to_ns(scan.storage_time),
        })
        return path
    if axis == "omega":
        ses = []
        for om in scan.omega_values:
            ctrl = replace(cfg.control, omega_peak=float(om)).profile(packet, ens)
            ses.append(run_storage(packet, ens, ctrl, cfg.decay, cfg.solver).se)
        path = out / "omega_scan.csv"
        write_csv(path, "omega-scan", {
            "omega": np.asarray(scan.omega_values),
            "se": np.asarray(ses),
        })
        return path
    if axis == "storage-time":
        result = scan_storage_time(
            np.asarray(scan.storage_times),
            ens,
            cfg.control.omega_peak,
            packet,
            cfg.decay,
            cfg.solver,
            t_off=cfg.control.t_off,
            edge_10_90=cfg.control.edge_10_90,
        )
        path = out / "storage_time_scan.csv"
        write_csv(path, "storage-time-scan", {
            "storage_time_us": UNITS.time_to_ns(result.axis) / 1000.0,
            "se": result.se,
        })
        return path
    raise ConfigError(f"unknown scan axis {axis!r}")


def cmd_fit(cfg: RunConfig, kind: str, data: Path, out: Path) -> Path:
    if kind == "eit":
        curve = read_transmission_csv(data)
        guess = (cfg.ensemble.od, cfg.control.omega_peak, cfg.ensemble.gamma12)
        fit = fit_eit(curve, guess)
        path = out / "eit_fit.json"
        write_json(path, fit.as_dict())
        return path
    if kind == "decay":
        cols = read_csv_columns(data, ["storage_time_us", "se"])
        times = UNITS.time_from_ns(cols["storage_time_us"] * 1000.0)
        fit = fit_gaussian_decay(times, cols["se"])
        tau0_us = UNITS.time_to_ns(fit.tau0) / 1000.0 if math.isfinite(fit.tau0) else math.inf
        payload = fit.as_dict()
        payload["tau0_us"] = tau0_us
        fwhm_us = UNITS.time_to_ns(cfg.source.intensity_fwhm) / 1000.0
        if 0.0 < 0.5 < fit.se0:
            crossing = storage_time_at(0.5, fit.tau0, fit.se0)
            crossing_us = UNITS.time_to_ns(crossing) / 1000.0
            payload["storage_time_at_half_us"] = crossing_us
            payload["fractional_delay_at_half"] = crossing_us / fwhm_us
        else:
            payload["storage_time_at_half_us"] = None
            payload["fractional_delay_at_half"] = None
        path = out / "decay_fit.json"
        write_json(path, payload)
        return path
    raise ConfigError(f"unknown fit kind {kind!r}")


def cmd_stats(cfg: RunConfig, out: Path, dump_ttg: Path | None) -> Path:
    packet = cfg.waveform()
    st = cfg.stats
    model = SourceStatModel(
        trial_rate=st.trial_rate,
        pair_probability=st.pair_probability,
        two_pair_probability=st.two_pair_probability,
        waveform=packet,
        noise_rate_as=st.noise_rate_as,
        dark_rate_g=st.dark_rate_g,
        dark_rate_as=st.dark_rate_as,
        channel_efficiency=st.channel_efficiency,
        seed=cfg.seed,
    )
    stream = simulate_event_stream(model, st.duration, split_as=st.split_as)
    peak_ns = float(UNITS.time_to_ns(packet.peak_time()))
    g2 = conditional_g2(stream, st.t_w, peak_ns)
    table = []
    for t_w in st.g2_windows:
        res = conditional_g2(stream, float(t_w), peak_ns)
        table.append({
            "t_w_ns": float(t_w),
            "g2": res.value,
            "uncertainty": res.uncertainty,
        })
    unsplit = simulate_event_stream(model, st.duration, split_as=False)
    rcs = estimate_rcs(
        unsplit, st.bin_ns, st.span_ns, st.thermal_autocorrelation, peak_lag_ns=peak_ns
    )
    payload = {
        "n_events": len(stream),
        "n_heralds": int(np.count_nonzero(stream.channels == CHANNEL_G)),
        "g2": {
            "value": g2.value,
            "uncertainty": g2.uncertainty,
            "t_w_ns": g2.window,
            "counts": {
                "N_G": g2.counts[0],
                "N_GT": g2.counts[1],
                "N_GR": g2.counts[2],
                "N_GTR": g2.counts[3],
            },
        },
        "g2_vs_window": table,
        "cauchy_schwarz": {
            "r_cs": rcs.r_cs,
            "g_sas_peak": rcs.g_sas_peak,
            "g_ss": rcs.g_ss,
            "g_asas": rcs.g_asas,
            "analytic_autocorrelation": rcs.analytic_autocorrelation,
            "bin_ns": st.bin_ns,
        },
        "seed": cfg.seed,
    }
    path = out / "stats.json"
    write_json(path, payload)
    if dump_ttg is not None:
        write_timetag_file(stream, dump_ttg)
    return path


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eitmem",
        description="EIT optical-memory simulator and optimizer",
    )
    parser.add_argument("--config", type=Path, default=None, help="TOML run configuration")
    parser.add_argument("--out", type=Path, default=Path("."), help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--jobs", type=int, default=1, help="max parallel scan workers")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("waveform", help="emit the heralded source waveform")
    sub.add_parser("store", help="slow-light and store-and-retrieve waveforms")
    p_scan = sub.add_parser("scan", help="parameter sweeps")
    p_scan.add_argument("--axis", choices=("od", "omega", "storage-time"), required=True)
    p_fit = sub.add_parser("fit", help="nonlinear fits of emitted data")
    p_fit.add_argument("--kind", choices=("eit", "decay"), required=True)
    p_fit.add_argument("--data", type=Path, required=True)
    p_stats = sub.add_parser("stats", help="Monte Carlo photon statistics")
    p_stats.add_argument("--dump-ttg", type=Path, default=None, help="also write the TTG1 stream")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        args.out.mkdir(parents=True, exist_ok=True)
        if args.command == "waveform":
            cmd_waveform(cfg, args.out)
        elif args.command == "store":
            cmd_store(cfg, args.out)
        elif args.command == "scan":
            cmd_scan(cfg, args.axis, args.out, args.jobs)
        elif args.command == "fit":
            cmd_fit(cfg, args.kind, args.data, args.out)
        elif args.command == "stats":
            cmd_stats(cfg, args.out, args.dump_ttg)
        else:  # pragma: no cover - argparse enforces the choices
            raise ConfigError(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (TimeTagParseError, DataParseError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 4
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
