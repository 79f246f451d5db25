"""Unit conventions, time grids, wavepackets, and shared parameter records.

Internal unit convention
------------------------
All rates are expressed in units of the optical dipole relaxation rate
``gamma13`` (|1>-|3| coherence decay), i.e. ``gamma13 == 1`` internally,
and all times in units of ``1/gamma13``.  Conversion to SI uses
``gamma13 = 2*pi*3.0 MHz`` exactly, so one internal time unit is about
53.05 ns.  Lengths stay in meters; velocities that mix the two systems are
documented at their definition sites.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi

#: |1>-|3> dipole relaxation rate in SI angular frequency (rad/s).
GAMMA13_SI = TWO_PI * 3.0e6

#: Hyperfine splitting between |5> and |3>, in gamma13 units (2*pi*361.6 MHz).
DELTA_S_INTERNAL = 361.6 / 3.0

#: Clebsch-Gordan ratio of the |2>->|5> transition to the control transition.
BETA_CG = math.sqrt(37.0 / 50.0)

#: Vacuum light speed, m/s.
C0_SI = 299792458.0


@dataclass(frozen=True)
class UnitSystem:
    """Conversion between internal (gamma13 = 1) units and SI.

    ``time_unit`` is seconds per internal time unit; ``rate_unit`` is its
    reciprocal and must satisfy ``rate_unit * time_unit == 1``.
    """

    time_unit: float = 1.0 / GAMMA13_SI
    rate_unit: float = GAMMA13_SI

    def __post_init__(self):
        if self.time_unit <= 0:
            raise ValueError("time_unit must be positive")
        if not math.isclose(self.rate_unit * self.time_unit, 1.0, rel_tol=1e-12):
            raise ValueError("rate_unit must be the reciprocal of time_unit")

    def time_from_si(self, seconds):
        return np.asarray(seconds) / self.time_unit if np.ndim(seconds) else seconds / self.time_unit

    def time_to_si(self, internal):
        return np.asarray(internal) * self.time_unit if np.ndim(internal) else internal * self.time_unit

    def time_from_ns(self, ns):
        return self.time_from_si(np.multiply(ns, 1e-9))

    def time_to_ns(self, internal):
        return self.time_to_si(internal) * 1e9

    def rate_from_si(self, rad_per_s):
        return rad_per_s / self.rate_unit

    def rate_to_si(self, internal):
        return internal * self.rate_unit


#: Default unit system shared across the package.
UNITS = UnitSystem()


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid ``t_start + k*dt`` for ``k in [0, n)``."""

    t_start: float
    dt: float
    n: int

    def __post_init__(self):
        if not (self.dt > 0):
            raise ValueError("dt must be positive")
        if self.n < 2:
            raise ValueError("grid needs at least 2 samples")

    @property
    def t_end(self) -> float:
        return self.t_start + (self.n - 1) * self.dt

    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n)

    def refined(self, factor: int) -> "TimeGrid":
        """Grid spanning the same interval with ``factor`` times finer step."""
        return TimeGrid(self.t_start, self.dt / factor, (self.n - 1) * factor + 1)

    def extended_to(self, t_end: float) -> "TimeGrid":
        """Grid with the same origin and step, covering at least ``t_end``."""
        if t_end <= self.t_end:
            return self
        n = self.n + int(math.ceil((t_end - self.t_end) / self.dt))
        return TimeGrid(self.t_start, self.dt, n)

    @classmethod
    def spanning(cls, t_start: float, t_end: float, dt: float) -> "TimeGrid":
        n = int(math.ceil((t_end - t_start) / dt)) + 1
        return cls(t_start, dt, max(n, 2))


@dataclass(frozen=True)
class Wavepacket:
    """Complex photon envelope psi(tau) on a uniform time grid.

    ``sum(|psi_k|^2) * dt`` is the detection probability carried by the
    packet.  ``precursor_mask`` flags samples that belong to the optical
    precursor; those samples are excluded from storage-efficiency
    denominators and from likeness estimates.
    """

    grid: TimeGrid
    amplitude: np.ndarray
    precursor_mask: np.ndarray | None = None

    def __post_init__(self):
        amp = np.asarray(self.amplitude, dtype=complex)
        if amp.shape != (self.grid.n,):
            raise ValueError(
                f"amplitude length {amp.shape} does not match grid n={self.grid.n}"
            )
        object.__setattr__(self, "amplitude", _readonly(amp))
        if self.precursor_mask is not None:
            mask = np.asarray(self.precursor_mask, dtype=bool)
            if mask.shape != (self.grid.n,):
                raise ValueError("precursor_mask length does not match grid")
            object.__setattr__(self, "precursor_mask", _readonly(mask))
        if not np.all(np.isfinite(self.amplitude.view(float))):
            raise ValueError("amplitude contains non-finite values")

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.amplitude) ** 2

    def norm(self, exclude_precursor: bool = False) -> float:
        return wavepacket_norm(self, exclude_precursor)

    def normalized(self, total: float = 1.0) -> "Wavepacket":
        n = self.norm()
        if n <= 0:
            raise ValueError("cannot normalize a zero-norm packet")
        return Wavepacket(
            self.grid, self.amplitude * math.sqrt(total / n), self.precursor_mask
        )

    def resampled(self, grid: TimeGrid) -> "Wavepacket":
        """Linear interpolation onto another grid (zero outside support)."""
        t_old = self.grid.times()
        t_new = grid.times()
        re = np.interp(t_new, t_old, self.amplitude.real, left=0.0, right=0.0)
        im = np.interp(t_new, t_old, self.amplitude.imag, left=0.0, right=0.0)
        mask = None
        if self.precursor_mask is not None:
            mask = (
                np.interp(t_new, t_old, self.precursor_mask.astype(float), left=0.0, right=0.0)
                > 0.5
            )
        return Wavepacket(grid, re + 1j * im, mask)

    def peak_time(self, exclude_precursor: bool = True) -> float:
        """Time of the intensity maximum, parabolically refined."""
        inten = self.intensity.copy()
        if exclude_precursor and self.precursor_mask is not None:
            inten[self.precursor_mask] = 0.0
        k = int(np.argmax(inten))
        t = self.grid.times()
        if 0 < k < self.grid.n - 1:
            y0, y1, y2 = inten[k - 1], inten[k], inten[k + 1]
            denom = y0 - 2 * y1 + y2
            if denom < 0:
                return t[k] + 0.5 * self.grid.dt * (y0 - y2) / denom
        return t[k]


def wavepacket_norm(w: Wavepacket, exclude_precursor: bool = False) -> float:
    """Total detection probability ``sum |psi_k|^2 dt`` of a packet.

    With ``exclude_precursor`` the samples flagged by the precursor mask are
    left out, which is the denominator convention for storage efficiency.
    """
    inten = w.intensity
    if exclude_precursor and w.precursor_mask is not None:
        inten = inten[~w.precursor_mask]
    return float(np.sum(inten) * w.grid.dt)


@dataclass(frozen=True)
class EnsembleParams:
    """Physical parameters of one atomic ensemble.

    ``od`` is the resonant (EIT off) intensity optical depth; ``length`` is
    in meters; all rates are in gamma13 units.
    """

    od: float
    length: float
    gamma13: float = 1.0
    gamma12: float = 0.0
    delta_s: float = DELTA_S_INTERNAL
    beta: float = BETA_CG
    c0: float = C0_SI

    def __post_init__(self):
        if self.od < 0:
            raise ValueError("od must be nonnegative")
        if self.length <= 0:
            raise ValueError("length must be positive")
        if self.gamma13 <= 0:
            raise ValueError("gamma13 must be positive")
        if self.gamma12 < 0:
            raise ValueError("gamma12 must be nonnegative")
        if not (0 < self.beta <= 1):
            raise ValueError("beta must be in (0, 1]")
        if self.delta_s <= 0:
            raise ValueError("delta_s must be positive")

    def replace(self, **kw) -> "EnsembleParams":
        from dataclasses import replace

        return replace(self, **kw)


# Fraction of a raised-cosine edge duration spanned by its 10%-90% interval.
_EDGE_1090_FRACTION = (math.acos(-0.8) - math.acos(0.8)) / math.pi

#: Default control-field switching edge (70 ns), internal units.
DEFAULT_EDGE_1090 = 70e-9 * GAMMA13_SI


@dataclass(frozen=True)
class ControlProfile:
    """Control Rabi frequency Omega_c2(tau) with raised-cosine switching.

    The field sits at ``omega_peak`` on the plateaus, falls to zero through
    an edge centered at ``off_time`` and rises back through an edge centered
    at ``on_time``; ``on_time - off_time`` is the storage time.  Each edge is
    a raised cosine whose 10%-90% duration equals ``edge_10_90``.  Setting
    both switch times to ``+inf`` (see :meth:`constant`) keeps the field on
    throughout.
    """

    omega_peak: float
    off_time: float
    on_time: float
    edge_10_90: float = DEFAULT_EDGE_1090

    def __post_init__(self):
        if self.omega_peak < 0:
            raise ValueError("omega_peak must be nonnegative")
        if self.edge_10_90 <= 0:
            raise ValueError("edge_10_90 must be positive")
        if math.isfinite(self.off_time) != math.isfinite(self.on_time):
            raise ValueError("off_time and on_time must both be finite or both +inf")
        if math.isfinite(self.off_time) and self.on_time < self.off_time:
            raise ValueError("on_time must not precede off_time")

    @classmethod
    def constant(cls, omega_peak: float, edge_10_90: float = DEFAULT_EDGE_1090) -> "ControlProfile":
        return cls(omega_peak, math.inf, math.inf, edge_10_90)

    @property
    def is_constant(self) -> bool:
        return not math.isfinite(self.off_time)

    @property
    def storage_time(self) -> float:
        return 0.0 if self.is_constant else self.on_time - self.off_time

    @property
    def edge_full(self) -> float:
        """Full duration of one raised-cosine edge."""
        return self.edge_10_90 / _EDGE_1090_FRACTION


def _cos_step_down(t, center, width):
    """Raised-cosine step 1 -> 0 over [center - width/2, center + width/2]."""
    x = np.clip((t - center) / width + 0.5, 0.0, 1.0)
    return 0.5 * (1.0 + np.cos(np.pi * x))


def evaluate_control(profile: ControlProfile, t):
    """Control Rabi frequency at time(s) ``t``.

    Overlapping off/on edges add up (an AOM re-opening mid-switch), clipped
    to the plateau value, so a zero storage time degenerates to a constant
    field.
    """
    t = np.asarray(t, dtype=float)
    if profile.is_constant:
        out = np.full(t.shape, profile.omega_peak)
        return float(out) if out.ndim == 0 else out
    width = profile.edge_full
    down = _cos_step_down(t, profile.off_time, width)
    up = 1.0 - _cos_step_down(t, profile.on_time, width)
    out = profile.omega_peak * np.clip(down + up, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out
