"""Heralded single-photon waveform of the backward sFWM source.

The source operates in the group-delay regime, where the anti-Stokes
envelope is a time-mapped image of the pump beam profile along the
ensemble: a photon born at position z leaves the medium a group delay
``(L/2 - z)/V_g`` after the herald, so a Gaussian pump profile of width
``z0 = w0/theta`` produces a Gaussian count envelope of width

    tau0 = z0 / V_g = 2 * OD1 * gamma13 * w0 / (Omega_c1^2 * L1 * theta)

centered at half the total group delay ``tau_g = L1/V_g``.  The measured
intensity FWHM is ``2*tau0*sqrt(ln 2)``.  The sharp optical precursor that
always travels at c0 is not simulated microscopically; it enters as a
masked spike carrying a configurable fraction of the total norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import GAMMA13_SI, TimeGrid, Wavepacket
from .errors import GridTooShortError, UndefinedVelocityError

#: Relative envelope level above which grid truncation is rejected.
TRUNCATION_LEVEL = 1e-4


@dataclass(frozen=True)
class SourceParams:
    """Source-ensemble parameters (rates in gamma13 units, lengths in m)."""

    od1: float = 100.0
    omega_c1: float = 3.5
    l1: float = 0.015
    w0: float = 182e-6
    theta: float = math.radians(2.5)
    kappa0: float = 1.0
    precursor_fraction: float = 0.02

    def __post_init__(self):
        if self.od1 <= 0:
            raise ValueError("od1 must be positive")
        if self.omega_c1 <= 0:
            raise ValueError("omega_c1 must be positive")
        if self.l1 <= 0:
            raise ValueError("l1 must be positive")
        if self.w0 <= 0:
            raise ValueError("w0 must be positive")
        if not (0 < self.theta < math.pi / 2):
            raise ValueError("theta must lie in (0, pi/2)")
        if self.kappa0 <= 0:
            raise ValueError("kappa0 must be positive")
        if not (0 <= self.precursor_fraction < 0.1):
            raise ValueError("precursor_fraction must lie in [0, 0.1)")

    @property
    def z0(self) -> float:
        """1/e half-width of the effective pump profile along z (m)."""
        return self.w0 / self.theta

    @property
    def group_delay(self) -> float:
        """Transit time tau_g = L1/V_g of the source ensemble (internal units)."""
        return self.l1 / group_velocity_internal(self.od1, self.omega_c1, self.l1)

    @property
    def tau0(self) -> float:
        """Gaussian width parameter of the count envelope (internal units)."""
        return self.z0 / group_velocity_internal(self.od1, self.omega_c1, self.l1)

    @property
    def intensity_fwhm(self) -> float:
        return 2.0 * self.tau0 * math.sqrt(math.log(2.0))


def group_velocity(od: float, omega_c: float, l: float, gamma13: float) -> float:
    """Slow-light group velocity V_g = Omega_c^2 * L / (2 * OD * gamma13).

    Pure formula: pass SI rates (rad/s) with ``l`` in meters to get m/s, or
    internal rates to get meters per internal time unit.
    """
    if od == 0:
        raise UndefinedVelocityError("group velocity undefined at od = 0")
    if od < 0:
        raise ValueError("od must be positive")
    return omega_c**2 * l / (2.0 * od * gamma13)


def group_velocity_internal(od: float, omega_c: float, l: float) -> float:
    """V_g in meters per internal time unit (rates in gamma13 units)."""
    return group_velocity(od, omega_c, l, 1.0)


def group_velocity_si(od: float, omega_c: float, l: float) -> float:
    """V_g in m/s for internal-unit rates."""
    return group_velocity(od, omega_c * GAMMA13_SI, l, GAMMA13_SI)


def pump_profile(params: SourceParams, z) -> np.ndarray | float:
    """Effective pump intensity profile f_p(z) = exp(-z^2 / (w0/theta)^2)."""
    z = np.asarray(z, dtype=float)
    out = np.exp(-((z / params.z0) ** 2))
    return float(out) if out.ndim == 0 else out


def default_grid(params: SourceParams, dt: float | None = None) -> TimeGrid:
    """Grid spanning [-tau_g/2, 3*tau_g/2], wide enough for the envelope."""
    tau_g = params.group_delay
    if dt is None:
        dt = min(params.tau0 / 60.0, tau_g / 400.0)
    return TimeGrid.spanning(-tau_g / 2.0, 1.5 * tau_g, dt)


def generate_heralded_waveform(
    params: SourceParams,
    grid: TimeGrid | None = None,
    pump: Callable[[np.ndarray], np.ndarray] | None = None,
) -> Wavepacket:
    """Sample the heralded anti-Stokes packet on ``grid``.

    The count-level envelope is ``kappa0 * V_g * f_p(L1/2 - V_g*tau)``; the
    returned amplitude is its square root, normalized to unit total norm
    (so ``kappa0`` cancels).  A masked spike carrying
    ``precursor_fraction`` of the norm is prepended near tau = 0.  ``pump``
    overrides the Gaussian f_p with a tabulated profile (intensity level,
    clipped to nonnegative).
    """
    if grid is None:
        grid = default_grid(params)
    v_g = group_velocity_internal(params.od1, params.omega_c1, params.l1)
    tau = grid.times()
    z = params.l1 / 2.0 - v_g * tau
    profile = pump(z) if pump is not None else pump_profile(params, z)
    envelope = np.clip(np.asarray(profile, dtype=float), 0.0, None)
    peak = envelope.max()
    if peak <= 0:
        raise ValueError("pump profile vanishes over the whole grid")
    if envelope[0] > TRUNCATION_LEVEL * peak or envelope[-1] > TRUNCATION_LEVEL * peak:
        raise GridTooShortError(
            "grid truncates the envelope above "
            f"{TRUNCATION_LEVEL:g} of peak (edges at "
            f"{envelope[0] / peak:.3g} and {envelope[-1] / peak:.3g}); "
            "span at least [-tau_g/2, 3*tau_g/2]"
        )

    dt = grid.dt
    main_norm = float(envelope.sum() * dt)
    frac = params.precursor_fraction
    amplitude = np.sqrt(envelope * ((1.0 - frac) / main_norm))

    mask = None
    if frac > 0:
        mask = np.zeros(grid.n, dtype=bool)
        k0 = int(np.searchsorted(tau, 0.0))
        k0 = min(max(k0, 0), grid.n - 3)
        # 3-sample triangular spike at tau ~ 0, carrying `frac` of the norm
        shape = np.array([0.5, 1.0, 0.5])
        spike_sq = shape / (shape.sum() * dt) * frac
        idx = np.arange(k0, k0 + 3)
        amplitude[idx] = np.sqrt(amplitude[idx] ** 2 + spike_sq)
        mask[idx] = True

    packet = Wavepacket(grid, amplitude.astype(complex), mask)
    return packet.normalized()
