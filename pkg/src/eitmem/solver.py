"""Time-domain integrator for the coupled field/polarization/spin system.

Model
-----
In the slowly-varying envelope picture the photon field eps(tau, z), the
collective optical polarization P and the ground-state coherence S obey

    (d_tau + c0 d_z) eps = i g*sqrt(N) P
    d_tau P = -gamma13 P + i g*sqrt(N)/2 eps + i/2 Omega_c(tau) S
    d_tau S = -gamma12_eff P ... + i/2 Omega_c*(tau) P

with the coupling fixed by the optical depth, g^2 N = OD * gamma13 * c0 / L.
The effective ground-state dephasing carries a power-broadening term from
the off-resonant coupling of |2> to the nearby excited state,

    gamma12_eff = gamma12 + gamma13 * (beta*Omega_c)^2 / (4 delta_s^2),

evaluated with the instantaneous control value, so it vanishes while the
control is off.

Numerics
--------
Because the vacuum transit L/c0 (~0.1 ns) is far below every dynamical
timescale, the default scheme drops d_tau for the field only (retarded
frame): at fixed tau the field is the quadrature

    eps(zeta) = psi_in(tau) + i * integral_0^zeta u dzeta',

where u, v are the polarization/spin scaled so that only OD, gamma13 and
Omega appear.  Eliminating the field this way leaves a closed ODE system in
tau for (u, v), which a classical 4th-order step advances; the field
quadrature uses the cumulative midpoint (trapezoid) rule between z planes.
Setting ``adiabatic_field=False`` selects the explicit characteristics
scheme that keeps the field's d_tau term; it is CFL-limited at dz/c0 per
step and exists for validating the retarded-frame reduction.

The system is linear in the field, so propagation of any input is exact
superposition; for constant control the frequency-domain transfer function
(see the spectral module) solves the same equations and serves as the
independent oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import C0_SI, UNITS, ControlProfile, EnsembleParams, TimeGrid, Wavepacket, evaluate_control
from .errors import NumericalInstabilityError, SolverConfigError

#: Step-size safety factor: dt <= DT_SAFETY / max(Omega_peak, gamma13, bandwidth).
DT_SAFETY = 0.02

#: Stride (in grid steps) between non-finite-value checks.
_NAN_CHECK_STRIDE = 256


def effective_dephasing(ens: EnsembleParams, omega_c2) -> float | np.ndarray:
    """Ground-state dephasing including control power broadening.

    gamma12_eff = gamma12 + gamma13 (beta Omega)^2 / (4 delta_s^2); the
    broadening term disappears with the control off.
    """
    omega_c2 = np.asarray(omega_c2, dtype=float)
    if np.any(omega_c2 < 0):
        raise ValueError("omega_c2 must be nonnegative")
    out = ens.gamma12 + ens.gamma13 * (ens.beta * omega_c2) ** 2 / (4.0 * ens.delta_s**2)
    return float(out) if out.ndim == 0 else out


def input_bandwidth(packet: Wavepacket) -> float:
    """Spectral extent of a packet: 6x the RMS width of its power spectrum."""
    amp = packet.amplitude
    spec = np.abs(np.fft.fft(amp)) ** 2
    omega = 2.0 * np.pi * np.fft.fftfreq(packet.grid.n, packet.grid.dt)
    total = spec.sum()
    if total <= 0:
        return 0.0
    mean = float((omega * spec).sum() / total)
    var = float(((omega - mean) ** 2 * spec).sum() / total)
    return 6.0 * math.sqrt(max(var, 0.0))


@dataclass(frozen=True)
class SolverConfig:
    """Resolution knobs; ``None`` fields are resolved per run.

    The contract requires n_z >= max(64, 2*OD) and
    dt <= 0.02 / max(Omega_peak, gamma13, input bandwidth).
    """

    n_z: int | None = None
    dt: float | None = None
    adiabatic_field: bool = True

    def resolved(
        self, ens: EnsembleParams, ctrl: ControlProfile, packet: Wavepacket
    ) -> "SolverConfig":
        """Concrete configuration for this run; rejects contract violations."""
        n_z_min = max(64, int(math.ceil(2.0 * ens.od)))
        n_z = self.n_z if self.n_z is not None else n_z_min
        if n_z < n_z_min:
            raise SolverConfigError(
                f"n_z = {n_z} below contract minimum {n_z_min} for OD = {ens.od}"
            )
        rate_scale = max(ctrl.omega_peak, ens.gamma13, input_bandwidth(packet))
        dt_max = DT_SAFETY / rate_scale
        dt = self.dt if self.dt is not None else dt_max
        if dt > dt_max * (1 + 1e-12):
            raise SolverConfigError(
                f"dt = {dt:.3g} exceeds contract maximum {dt_max:.3g} "
                f"(rate scale {rate_scale:.3g})"
            )
        return SolverConfig(n_z=n_z, dt=dt, adiabatic_field=self.adiabatic_field)

    def refined(self, factor: int = 2) -> "SolverConfig":
        """Configuration with n_z scaled up and dt scaled down by ``factor``."""
        if self.n_z is None or self.dt is None:
            raise ValueError("refine a resolved configuration")
        return SolverConfig(
            n_z=(self.n_z - 1) * factor + 1,
            dt=self.dt / factor,
            adiabatic_field=self.adiabatic_field,
        )


@dataclass(frozen=True)
class FieldState:
    """Snapshot of (eps, pol, spin) across the medium at one retarded time.

    pol and spin are stored in the field-equation normalization (both
    proportional to the physical envelopes; the shared scale cancels in
    every observable derived here).
    """

    tau: float
    z_grid: np.ndarray
    eps: np.ndarray
    pol: np.ndarray
    spin: np.ndarray

    def __post_init__(self):
        n = len(self.z_grid)
        for name in ("eps", "pol", "spin"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} length does not match z_grid")


@dataclass(frozen=True)
class PropagationResult:
    output: Wavepacket
    trace: list[FieldState] | None = None


def _interp_complex(t_new: np.ndarray, t_old: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.interp(t_new, t_old, y.real, left=0.0, right=0.0) + 1j * np.interp(
        t_new, t_old, y.imag, left=0.0, right=0.0
    )


def propagate(
    inp: Wavepacket,
    ens: EnsembleParams,
    ctrl: ControlProfile,
    cfg: SolverConfig | None = None,
    *,
    spin_decay: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
    keep_trace: bool = False,
    trace_stride: int | None = None,
) -> PropagationResult:
    """Propagate ``inp`` through the ensemble under control ``ctrl``.

    Returns the transmitted envelope eps(tau, L) on the input grid, with
    initial conditions P = S = 0 and boundary eps(tau, 0) = psi_in(tau).
    ``spin_decay(t0, t1)`` may supply an extra multiplicative amplitude
    factor applied to the spin coherence over each grid step (used by the
    storage protocol for hold-interval decoherence); it must accept numpy
    arrays.  Deterministic for fixed configuration.
    """
    cfg = (cfg or SolverConfig()).resolved(ens, ctrl, inp)
    if cfg.adiabatic_field:
        return _propagate_adiabatic(
            inp, ens, ctrl, cfg, spin_decay=spin_decay, keep_trace=keep_trace, trace_stride=trace_stride
        )
    return _propagate_characteristics(
        inp, ens, ctrl, cfg, spin_decay=spin_decay, keep_trace=keep_trace, trace_stride=trace_stride
    )


def _propagate_adiabatic(inp, ens, ctrl, cfg, *, spin_decay, keep_trace, trace_stride):
    grid = inp.grid
    n_t = grid.n
    n_z = cfg.n_z
    t = grid.times()

    n_sub = max(1, int(math.ceil(grid.dt / cfg.dt - 1e-12)))
    h = grid.dt / n_sub

    # Drive terms sampled at every half-substep (RK4 stage times).
    n_half = 2 * (n_t - 1) * n_sub + 1
    t_fine = grid.t_start + (h / 2.0) * np.arange(n_half)
    psi_fine = _interp_complex(t_fine, t, inp.amplitude)
    om_fine = evaluate_control(ctrl, t_fine)
    geff_fine = effective_dephasing(ens, om_fine)
    if np.ndim(geff_fine) == 0:
        geff_fine = np.full(n_half, float(geff_fine))

    a_half = 0.5j * ens.od * ens.gamma13  # drives u from eps
    dzeta = 1.0 / (n_z - 1)
    gamma13 = ens.gamma13

    u = np.zeros(n_z, dtype=complex)
    v = np.zeros(n_z, dtype=complex)
    integ = np.empty(n_z, dtype=complex)

    def field(psi0, u_stage):
        integ[0] = 0.0
        np.cumsum(u_stage[1:] + u_stage[:-1], out=integ[1:])
        return psi0 + (0.5j * dzeta) * integ

    def rhs(psi0, om, geff, u_stage, v_stage):
        eps = field(psi0, u_stage)
        du = -gamma13 * u_stage + a_half * eps + (0.5j * om) * v_stage
        dv = -geff * v_stage + (0.5j * om) * u_stage
        return du, dv

    decay_factors = None
    if spin_decay is not None:
        decay_factors = np.asarray(spin_decay(t[:-1], t[1:]), dtype=float)

    out = np.empty(n_t, dtype=complex)
    out[0] = psi_fine[0]
    trace: list[FieldState] | None = None
    z_grid = None
    if keep_trace:
        trace = []
        z_grid = np.linspace(0.0, ens.length, n_z)
        stride = trace_stride or max(1, n_t // 200)

    for k in range(n_t - 1):
        base = 2 * k * n_sub
        for j in range(n_sub):
            i0 = base + 2 * j
            p0, p1, p2 = psi_fine[i0], psi_fine[i0 + 1], psi_fine[i0 + 2]
            o0, o1, o2 = om_fine[i0], om_fine[i0 + 1], om_fine[i0 + 2]
            g0, g1, g2 = geff_fine[i0], geff_fine[i0 + 1], geff_fine[i0 + 2]
            du1, dv1 = rhs(p0, o0, g0, u, v)
            du2, dv2 = rhs(p1, o1, g1, u + (0.5 * h) * du1, v + (0.5 * h) * dv1)
            du3, dv3 = rhs(p1, o1, g1, u + (0.5 * h) * du2, v + (0.5 * h) * dv2)
            du4, dv4 = rhs(p2, o2, g2, u + h * du3, v + h * dv3)
            u += (h / 6.0) * (du1 + 2.0 * (du2 + du3) + du4)
            v += (h / 6.0) * (dv1 + 2.0 * (dv2 + dv3) + dv4)
        if decay_factors is not None:
            v *= decay_factors[k]
        eps_now = field(psi_fine[base + 2 * n_sub], u)
        out[k + 1] = eps_now[-1]
        if k % _NAN_CHECK_STRIDE == 0 and not np.isfinite(out[k + 1]):
            _raise_instability(u, k, t[k + 1])
        if keep_trace and ((k + 1) % stride == 0 or k == n_t - 2):
            trace.append(
                FieldState(tau=t[k + 1], z_grid=z_grid, eps=eps_now.copy(), pol=u.copy(), spin=v.copy())
            )

    if not np.all(np.isfinite(out.view(float))):
        k_bad = int(np.argmax(~np.isfinite(out.view(float))) // 2)
        raise NumericalInstabilityError(step=k_bad, time=float(t[min(k_bad, n_t - 1)]))
    return PropagationResult(output=Wavepacket(grid, out), trace=trace)


def _raise_instability(u, step, time):
    raise NumericalInstabilityError(step=step, time=float(time))


def _propagate_characteristics(inp, ens, ctrl, cfg, *, spin_decay, keep_trace, trace_stride):
    """Explicit scheme keeping the field d_tau term (validation path).

    Marches along the vacuum characteristics with dt = dz/c0, which is
    orders of magnitude below the dynamical timescales; only small test
    cases are practical here.
    """
    grid = inp.grid
    n_z = cfg.n_z
    t = grid.times()
    c0_internal = ens.c0 * UNITS.time_unit  # meters per internal time unit
    dzeta = 1.0 / (n_z - 1)
    dt = dzeta * ens.length / c0_internal  # characteristic step
    n_steps = int(math.ceil((grid.t_end - grid.t_start) / dt))
    cc = 1.0j * dzeta  # source term integrated along one characteristic

    gamma13 = ens.gamma13
    a_half = 0.5j * ens.od * ens.gamma13

    u = np.zeros(n_z, dtype=complex)
    v = np.zeros(n_z, dtype=complex)
    eps = np.zeros(n_z, dtype=complex)

    t_in = grid.times()
    out_t = np.empty(n_steps + 1, dtype=float)
    out_e = np.empty(n_steps + 1, dtype=complex)
    out_t[0] = t[0]
    out_e[0] = 0.0

    tau = t[0]
    for k in range(n_steps):
        om = float(evaluate_control(ctrl, tau + 0.5 * dt))
        geff = float(effective_dephasing(ens, om))

        def rhs(u_s, v_s):
            du = -gamma13 * u_s + a_half * eps + (0.5j * om) * v_s
            dv = -geff * v_s + (0.5j * om) * u_s
            return du, dv

        du1, dv1 = rhs(u, v)
        du2, dv2 = rhs(u + 0.5 * dt * du1, v + 0.5 * dt * dv1)
        du3, dv3 = rhs(u + 0.5 * dt * du2, v + 0.5 * dt * dv2)
        du4, dv4 = rhs(u + dt * du3, v + dt * dv3)
        u_new = u + (dt / 6.0) * (du1 + 2.0 * (du2 + du3) + du4)
        v_new = v + (dt / 6.0) * (dv1 + 2.0 * (dv2 + dv3) + dv4)

        eps_new = np.empty_like(eps)
        eps_new[0] = _interp_complex(np.array([tau + dt]), t_in, inp.amplitude)[0]
        eps_new[1:] = eps[:-1] + cc * 0.5 * (u[:-1] + u_new[1:])
        if spin_decay is not None:
            v_new *= float(spin_decay(np.array([tau]), np.array([tau + dt]))[0])

        u, v, eps = u_new, v_new, eps_new
        tau += dt
        out_t[k + 1] = tau
        out_e[k + 1] = eps[-1]
        if k % 4096 == 0 and not np.isfinite(eps[-1]):
            raise NumericalInstabilityError(step=k, time=float(tau))

    amp = _interp_complex(t, out_t, out_e)
    return PropagationResult(output=Wavepacket(grid, amp), trace=None)
