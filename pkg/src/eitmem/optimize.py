"""Storage-efficiency optimization over control strength and write timing.

For each optical depth the control Rabi frequency is scanned on a coarse
log grid and refined by golden-section search; the switch-off time is
co-optimized on a nested coarse grid around the pulse-centering heuristic.
Efficiency trades capture (long group delay wants small Omega) against
transparency (wide EIT window wants large Omega), so SE(Omega) is smooth
and unimodal in practice.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import ControlProfile, EnsembleParams, Wavepacket, DEFAULT_EDGE_1090
from .solver import SolverConfig
from .storage import (
    DecayModel,
    heuristic_off_time,
    read_group_delay,
    run_storage,
)

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

#: SE drop (absolute) defining the indiscernibility plateau around the optimum.
PLATEAU_DROP = 0.005


@dataclass(frozen=True)
class ControlOptimum:
    """Optimized control setting for one optical depth."""

    omega_opt: float
    t_off_opt: float
    se_opt: float
    plateau_halfwidth: float
    at_boundary: bool
    omega_evaluated: np.ndarray
    se_evaluated: np.ndarray


@dataclass(frozen=True)
class ScanResult:
    """One scanned axis with per-point efficiencies."""

    axis: np.ndarray
    se: np.ndarray
    optimal_omega: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.axis) != len(self.se):
            raise ValueError("axis and se must share length")
        if self.optimal_omega is not None and len(self.optimal_omega) != len(self.axis):
            raise ValueError("optimal_omega must share the axis length")


def _storage_se(
    packet: Wavepacket,
    ens: EnsembleParams,
    omega: float,
    t_off: float,
    storage_time: float,
    decay: DecayModel | None,
    cfg: SolverConfig | None,
    edge_10_90: float,
) -> float:
    ctrl = ControlProfile(omega, t_off, t_off + storage_time, edge_10_90)
    return run_storage(packet, ens, ctrl, decay, cfg).se


def optimize_control(
    od: float,
    ens_template: EnsembleParams,
    packet: Wavepacket,
    bounds: tuple[float, float],
    cfg: SolverConfig | None = None,
    *,
    storage_time: float,
    decay: DecayModel | None = None,
    edge_10_90: float = DEFAULT_EDGE_1090,
    n_coarse: int = 15,
    omega_rel_tol: float = 1e-3,
    n_t_off: int = 7,
) -> ControlOptimum:
    """Maximize storage efficiency over (Omega, t_off) at fixed OD.

    Coarse log-spaced scan over Omega (>= 15 points) with the pulse-centering
    switch-off heuristic, golden-section refinement of Omega to
    ``omega_rel_tol``, then a nested coarse scan of t_off at the refined
    Omega.  The plateau halfwidth is the Omega range (interpolated from the
    evaluated points) within which SE stays within 0.5 pp of the optimum.
    """
    lo, hi = bounds
    if not (0 < lo < hi) or not math.isfinite(hi):
        raise ValueError("bounds must be finite, positive, and increasing")
    if n_coarse < 15:
        raise ValueError("coarse scan needs at least 15 points")
    ens = ens_template.replace(od=od)
    cache: dict[float, float] = {}

    def se_at(omega: float) -> float:
        key = round(omega, 12)
        if key not in cache:
            t_off = heuristic_off_time(packet, ens, omega)
            cache[key] = _storage_se(
                packet, ens, omega, t_off, storage_time, decay, cfg, edge_10_90
            )
        return cache[key]

    omegas = np.geomspace(lo, hi, n_coarse)
    ses = np.array([se_at(om) for om in omegas])
    k = int(np.argmax(ses))

    a = omegas[max(k - 1, 0)]
    b = omegas[min(k + 1, n_coarse - 1)]
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = se_at(x1), se_at(x2)
    while (b - a) > omega_rel_tol * 0.5 * (a + b):
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = se_at(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = se_at(x1)
    omega_opt = x1 if f1 >= f2 else x2
    se_heur = max(f1, f2)

    # nested coarse scan of the switch-off time around the heuristic
    t_heur = heuristic_off_time(packet, ens, omega_opt)
    span = max(read_group_delay(ens, omega_opt) / 2.0, 2.0)
    t_off_opt, se_opt = t_heur, se_heur
    for t_off in t_heur + np.linspace(-span / 2.0, span / 2.0, n_t_off):
        se = _storage_se(packet, ens, omega_opt, t_off, storage_time, decay, cfg, edge_10_90)
        if se > se_opt:
            t_off_opt, se_opt = float(t_off), se

    om_arr = np.array(sorted(cache))
    se_arr = np.array([cache[key] for key in sorted(cache)])
    halfwidth = _plateau_halfwidth(om_arr, se_arr, omega_opt, max(se_arr))
    at_boundary = (omega_opt - lo) < 0.015 * lo or (hi - omega_opt) < 0.015 * hi
    return ControlOptimum(
        omega_opt=float(omega_opt),
        t_off_opt=float(t_off_opt),
        se_opt=float(se_opt),
        plateau_halfwidth=float(halfwidth),
        at_boundary=bool(at_boundary),
        omega_evaluated=om_arr,
        se_evaluated=se_arr,
    )


def _plateau_halfwidth(omegas, ses, omega_opt, se_ref) -> float:
    """Half the Omega interval whose SE stays within PLATEAU_DROP of se_ref."""
    level = se_ref - PLATEAU_DROP
    lo = hi = omega_opt
    k = int(np.searchsorted(omegas, omega_opt))
    i = min(max(k, 0), len(omegas) - 1)
    j = i
    while i > 0 and ses[i - 1] >= level:
        i -= 1
    lo = omegas[i]
    if i > 0:
        frac = (ses[i] - level) / max(ses[i] - ses[i - 1], 1e-30)
        lo = omegas[i] - frac * (omegas[i] - omegas[i - 1])
    while j < len(ses) - 1 and ses[j + 1] >= level:
        j += 1
    hi = omegas[j]
    if j < len(ses) - 1:
        frac = (ses[j] - level) / max(ses[j] - ses[j + 1], 1e-30)
        hi = omegas[j] + frac * (omegas[j + 1] - omegas[j])
    return (hi - lo) / 2.0


def _od_point(args) -> tuple[int, dict]:
    (
        i,
        od,
        ens_template,
        packet,
        bounds,
        cfg,
        storage_time,
        decay,
        edge_10_90,
        n_coarse,
    ) = args
    try:
        opt = optimize_control(
            od,
            ens_template,
            packet,
            bounds,
            cfg,
            storage_time=storage_time,
            decay=decay,
            edge_10_90=edge_10_90,
            n_coarse=n_coarse,
        )
        return i, {
            "se": opt.se_opt,
            "omega": opt.omega_opt,
            "halfwidth": opt.plateau_halfwidth,
            "t_off": opt.t_off_opt,
            "at_boundary": opt.at_boundary,
            "error": None,
        }
    except Exception as exc:  # noqa: BLE001 - per-point failures must not kill the scan
        return i, {
            "se": math.nan,
            "omega": math.nan,
            "halfwidth": math.nan,
            "t_off": math.nan,
            "at_boundary": False,
            "error": f"{type(exc).__name__}: {exc}",
        }


def scan_optical_depth(
    od_values,
    ens_template: EnsembleParams,
    packet: Wavepacket,
    bounds: tuple[float, float],
    cfg: SolverConfig | None = None,
    *,
    storage_time: float,
    decay: DecayModel | None = None,
    edge_10_90: float = DEFAULT_EDGE_1090,
    n_coarse: int = 15,
    jobs: int = 1,
) -> ScanResult:
    """Per-OD optimize_control results, assembled in axis order.

    Points run independently (optionally on ``jobs`` worker processes);
    failed points are flagged in ``meta['errors']`` and the scan continues.
    """
    od_values = np.asarray(od_values, dtype=float)
    if np.any(od_values < 0) or np.any(od_values > 300):
        raise ValueError("od values must lie in [0, 300]")
    tasks = [
        (i, float(od), ens_template, packet, bounds, cfg, storage_time, decay, edge_10_90, n_coarse)
        for i, od in enumerate(od_values)
    ]
    results: list[dict | None] = [None] * len(tasks)
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for i, out in pool.map(_od_point, tasks):
                results[i] = out
    else:
        for task in tasks:
            i, out = _od_point(task)
            results[i] = out
    return ScanResult(
        axis=od_values,
        se=np.array([r["se"] for r in results]),
        optimal_omega=np.array([r["omega"] for r in results]),
        meta={
            "omega_halfwidth": np.array([r["halfwidth"] for r in results]),
            "t_off_opt": np.array([r["t_off"] for r in results]),
            "at_boundary": [r["at_boundary"] for r in results],
            "errors": [r["error"] for r in results],
            "storage_time": storage_time,
        },
    )


def scan_storage_time(
    times,
    ens: EnsembleParams,
    omega: float,
    packet: Wavepacket,
    decay: DecayModel | None = None,
    cfg: SolverConfig | None = None,
    *,
    t_off: float | None = None,
    edge_10_90: float = DEFAULT_EDGE_1090,
) -> ScanResult:
    """SE versus hold time at fixed (OD, Omega); feeds the decay fit."""
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ValueError("storage times must be nonnegative")
    if t_off is None:
        t_off = heuristic_off_time(packet, ens, omega)
    ses = np.empty(len(times))
    for i, hold in enumerate(times):
        ctrl = ControlProfile(omega, t_off, t_off + float(hold), edge_10_90)
        ses[i] = run_storage(packet, ens, ctrl, decay, cfg).se
    return ScanResult(
        axis=times,
        se=ses,
        meta={"omega": omega, "od": ens.od, "t_off": t_off},
    )
