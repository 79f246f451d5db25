"""Steady-state frequency response: transmission spectra and their fits.

For constant control the field/polarization/spin system is linear and time
invariant, so eliminating P and S at probe detuning ``delta`` (envelope
convention exp(-i delta tau)) gives the complex transfer function across
the whole ensemble

    H(delta) = exp[ -(OD*gamma13/2) /
                    (gamma13 - i delta + Omega^2 / (4 (gamma12_eff - i delta))) ]

with power transmission |H|^2.  The same closed form underlies the
time-domain solver's oracle checks and the transmission-curve fits used to
calibrate the optical depth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .core import EnsembleParams, TimeGrid, Wavepacket
from .errors import FitFailureError, InsufficientSignalError
from .solver import effective_dephasing


@dataclass(frozen=True)
class TransmissionCurve:
    """Power transmission versus probe detuning (gamma13 units)."""

    detunings: np.ndarray
    transmission: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.detunings, dtype=float)
        tr = np.asarray(self.transmission, dtype=float)
        if d.shape != tr.shape or d.ndim != 1:
            raise ValueError("detunings and transmission must be 1-d and equal length")
        if not np.all(np.diff(d) > 0):
            raise ValueError("detunings must be strictly increasing")
        object.__setattr__(self, "detunings", d)
        object.__setattr__(self, "transmission", tr)

    def __len__(self) -> int:
        return len(self.detunings)


def transfer_function(delta, ens: EnsembleParams, omega_c: float):
    """Complex field transfer across the ensemble at detuning(s) ``delta``.

    gamma12_eff regularizes the two-photon pole; in the ideal limit
    (gamma12_eff = 0, delta = 0) the transparency value H = 1 is returned.
    """
    if omega_c < 0:
        raise ValueError("omega_c must be nonnegative")
    delta = np.asarray(delta, dtype=complex)
    geff = effective_dephasing(ens, omega_c)
    denom2 = geff - 1j * delta
    with np.errstate(divide="ignore", invalid="ignore"):
        d = ens.gamma13 - 1j * delta + (omega_c**2 / 4.0) / denom2
        h = np.exp(-(ens.od * ens.gamma13 / 2.0) / d)
    # delta = 0 with geff = 0: the Omega^2 term diverges, killing absorption.
    h = np.where(np.isfinite(h), h, 1.0 if omega_c > 0 else np.exp(-ens.od / 2.0))
    return complex(h) if h.ndim == 0 else h


def eit_spectrum(detunings, ens: EnsembleParams, omega_c: float) -> TransmissionCurve:
    """Pointwise power transmission |H|^2 over a detuning grid."""
    detunings = np.asarray(detunings, dtype=float)
    h = transfer_function(detunings, ens, omega_c)
    return TransmissionCurve(detunings, np.abs(h) ** 2)


def group_delay(ens: EnsembleParams, omega_c: float, delta_step: float = 1e-6) -> float:
    """Slow-light group delay from the phase slope of H at delta = 0.

    Centered finite difference of arg H; equals 2*OD*gamma13/Omega^2 in the
    ideal EIT limit.  Positive values mean the envelope leaves later.
    """
    h = transfer_function(np.array([-delta_step, delta_step]), ens, omega_c)
    return float(np.angle(h[1] / h[0]) / (2.0 * delta_step))


def apply_transfer(packet: Wavepacket, ens: EnsembleParams, omega_c: float) -> Wavepacket:
    """Frequency-domain propagation of ``packet`` under constant control.

    FFT-based: each synthesis mode exp(+i w t) is H(delta = -w) in the
    envelope convention above.  Serves as the independent oracle for the
    time-domain solver; the packet must decay to ~0 at both grid ends to
    avoid wraparound.
    """
    n = packet.grid.n
    omega = 2.0 * np.pi * np.fft.fftfreq(n, packet.grid.dt)
    spec = np.fft.fft(packet.amplitude)
    h = transfer_function(-omega, ens, omega_c)
    out = np.fft.ifft(spec * h)
    return Wavepacket(packet.grid, out, packet.precursor_mask)


@dataclass(frozen=True)
class EitFit:
    """Result of a transmission-curve fit."""

    od: float
    omega_c: float
    gamma12: float
    residual_norm: float
    stderr: dict = field(default_factory=dict)
    n_evaluations: int = 0

    def as_dict(self) -> dict:
        return {
            "od": self.od,
            "omega_c": self.omega_c,
            "gamma12": self.gamma12,
            "residual_norm": self.residual_norm,
            "stderr": dict(self.stderr),
            "n_evaluations": self.n_evaluations,
        }


#: transmission peak-to-peak below which a curve is considered featureless.
_FLAT_CURVE_SPAN = 1e-3


def fit_eit(
    curve: TransmissionCurve,
    initial_guess: tuple[float, float, float],
    ens_template: EnsembleParams | None = None,
    max_nfev: int = 2000,
) -> EitFit:
    """Damped least-squares fit of (OD, Omega_c, gamma12) to |H|^2 data.

    OD and Omega are fitted in log space to enforce positivity; gamma12 is
    bounded below by zero.  The returned standard errors are 1-sigma
    half-widths from the Jacobian at the solution.
    """
    if len(curve) < 20:
        raise ValueError("need at least 20 points spanning both absorption dips")
    if float(np.ptp(curve.transmission)) < _FLAT_CURVE_SPAN:
        raise InsufficientSignalError("transmission curve is flat; nothing to fit")

    od0, om0, g120 = initial_guess
    if od0 <= 0 or om0 <= 0 or g120 < 0:
        raise ValueError("initial guess must have od, omega > 0 and gamma12 >= 0")
    template = ens_template or EnsembleParams(od=od0, length=0.028, gamma12=g120)

    data = curve.transmission

    def model(x):
        od, om, g12 = math.exp(x[0]), math.exp(x[1]), x[2]
        ens = template.replace(od=od, gamma12=g12)
        return np.abs(transfer_function(curve.detunings, ens, om)) ** 2

    def residuals(x):
        return model(x) - data

    x0 = np.array([math.log(od0), math.log(om0), g120])
    res = optimize.least_squares(
        residuals,
        x0,
        bounds=([-np.inf, -np.inf, 0.0], [np.inf, np.inf, np.inf]),
        max_nfev=max_nfev,
    )
    od, om, g12 = math.exp(res.x[0]), math.exp(res.x[1]), float(res.x[2])
    fit = _build_fit(res, od, om, g12, len(curve))
    if res.status <= 0:
        raise FitFailureError("EIT fit did not converge", best=fit)
    return fit


def _build_fit(res, od, om, g12, n_points) -> EitFit:
    resid_norm = float(np.linalg.norm(res.fun))
    stderr: dict = {}
    try:
        jac = res.jac
        dof = max(n_points - jac.shape[1], 1)
        s_sq = 2.0 * res.cost / dof
        cov = np.linalg.inv(jac.T @ jac) * s_sq
        sig = np.sqrt(np.clip(np.diag(cov), 0.0, None))
        # chain rule through the log parameterization
        stderr = {"od": od * sig[0], "omega_c": om * sig[1], "gamma12": sig[2]}
    except np.linalg.LinAlgError:
        stderr = {"od": math.nan, "omega_c": math.nan, "gamma12": math.nan}
    return EitFit(
        od=od,
        omega_c=om,
        gamma12=g12,
        residual_norm=resid_norm,
        stderr=stderr,
        n_evaluations=int(res.nfev),
    )
