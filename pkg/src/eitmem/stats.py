"""Monte Carlo detection-event streams and coincidence statistics.

Events are time-tagged detector clicks at 1 ns resolution on four
channels: G (herald/Stokes), T and R (the two output ports of the 50/50
splitter on the anti-Stokes side), and AS (anti-Stokes undivided, when the
splitter is bypassed).  The source model is trial-based: each trial
produces zero, one, or (with a separate probability) two photon pairs; the
anti-Stokes arrival lags its herald by a draw from the configured waveform
intensity.  Uncorrelated channel noise and detector dark counts are
homogeneous Poisson processes.

The conditional autocorrelation of heralded photons is estimated by triple
coincidence counting,

    g_c2 = N(G) N(GTR) / [N(GT) N(GR)],

which is 0 for ideal single photons, 0.5 for two-photon trials, and 1 for
Poissonian light.  Nonclassicality of the pair source is summarized by the
Cauchy-Schwarz ratio R_CS = g_sas^2 / (g_ss * g_asas).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import UNITS, Wavepacket
from .errors import UndefinedG2Error

CHANNEL_G = 0
CHANNEL_T = 1
CHANNEL_R = 2
CHANNEL_AS = 3

CHANNEL_NAMES = {CHANNEL_G: "G", CHANNEL_T: "T", CHANNEL_R: "R", CHANNEL_AS: "AS"}
CHANNEL_CODES = {name: code for code, name in CHANNEL_NAMES.items()}


@dataclass(frozen=True)
class EventStream:
    """Time-tagged click records, sorted by (timestamp, channel)."""

    channels: np.ndarray
    timestamps_ns: np.ndarray

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=np.uint8)
        ts = np.asarray(self.timestamps_ns, dtype=np.uint64)
        if ch.shape != ts.shape or ch.ndim != 1:
            raise ValueError("channels and timestamps must be 1-d and equal length")
        if np.any(ch > CHANNEL_AS):
            raise ValueError("unknown channel code")
        order = np.lexsort((ch, ts))
        object.__setattr__(self, "channels", ch[order])
        object.__setattr__(self, "timestamps_ns", ts[order])
        for name in ("channels", "timestamps_ns"):
            getattr(self, name).flags.writeable = False

    def __len__(self) -> int:
        return len(self.channels)

    def times_of(self, channel: int) -> np.ndarray:
        return self.timestamps_ns[self.channels == channel].astype(np.int64)

    def shifted(self, offset_ns: int) -> "EventStream":
        if offset_ns < 0 and np.any(self.timestamps_ns < -offset_ns):
            raise ValueError("shift would produce negative timestamps")
        return EventStream(self.channels, self.timestamps_ns + np.uint64(offset_ns))

    @property
    def duration_ns(self) -> int:
        if len(self) == 0:
            return 0
        return int(self.timestamps_ns[-1] - self.timestamps_ns[0]) + 1


@dataclass(frozen=True)
class SourceStatModel:
    """Trial-level statistical model of the heralded source.

    Rates are per second of wall time; ``waveform`` carries the conditional
    anti-Stokes delay density (internal time units) via its intensity.
    ``channel_efficiency`` applies independently to the herald and to each
    anti-Stokes photon.
    """

    trial_rate: float
    pair_probability: float
    two_pair_probability: float
    waveform: Wavepacket
    noise_rate_as: float = 0.0
    dark_rate_g: float = 0.0
    dark_rate_as: float = 0.0
    channel_efficiency: float = 0.027
    seed: int = 0

    def __post_init__(self):
        if self.trial_rate <= 0:
            raise ValueError("trial_rate must be positive")
        for name in ("pair_probability", "two_pair_probability"):
            p = getattr(self, name)
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.pair_probability + self.two_pair_probability > 1.0:
            raise ValueError("pair and two-pair probabilities must sum to <= 1")
        if self.two_pair_probability > 2.0 * self.pair_probability**2:
            # thermal pair statistics obey P2 <= 2 P1^2; diagnostic streams
            # (e.g. pure two-photon trials) intentionally exceed it.
            warnings.warn(
                "two_pair_probability exceeds the thermal regime guard "
                "2*pair_probability^2",
                stacklevel=2,
            )
        for name in ("noise_rate_as", "dark_rate_g", "dark_rate_as"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if not (0.0 < self.channel_efficiency <= 1.0):
            raise ValueError("channel_efficiency must lie in (0, 1]")


def _delay_sampler(waveform: Wavepacket):
    """Inverse-CDF sampler of the waveform intensity, in nanoseconds."""
    weights = waveform.intensity * waveform.grid.dt
    total = weights.sum()
    if total <= 0:
        raise ValueError("waveform carries no intensity")
    cdf = np.cumsum(weights) / total
    t_ns = UNITS.time_to_ns(waveform.grid.times())
    dt_ns = UNITS.time_to_ns(waveform.grid.dt)

    def draw(rng: np.random.Generator, n: int) -> np.ndarray:
        idx = np.searchsorted(cdf, rng.random(n), side="left")
        return t_ns[idx] + (rng.random(n) - 0.5) * dt_ns

    return draw


def simulate_event_stream(
    model: SourceStatModel, duration: float, split_as: bool = True
) -> EventStream:
    """Generate a detection record of ``duration`` seconds.

    Trials fire at the repetition period; each generated pair contributes
    an (independently detected) herald at the trial time and an anti-Stokes
    click delayed by a waveform draw.  With ``split_as`` every anti-Stokes
    side event (signal, channel noise, and the anti-Stokes dark counts) is
    routed to T or R with probability 1/2, modeling the 50/50 splitter.
    Reproducible from ``model.seed``.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    rng = np.random.default_rng(model.seed)
    n_trials = int(round(duration * model.trial_rate))
    period_ns = 1e9 / model.trial_rate
    trial_times = np.round((1.0 + np.arange(n_trials)) * period_ns).astype(np.int64)

    u = rng.random(n_trials)
    two = u < model.two_pair_probability
    one = (~two) & (u < model.two_pair_probability + model.pair_probability)
    pair_trials = np.concatenate([np.nonzero(one)[0], np.repeat(np.nonzero(two)[0], 2)])

    eff = model.channel_efficiency
    g_hit = rng.random(len(pair_trials)) < eff
    as_hit = rng.random(len(pair_trials)) < eff
    g_times = trial_times[pair_trials[g_hit]]

    draw = _delay_sampler(model.waveform)
    delays = draw(rng, int(as_hit.sum()))
    as_times = np.maximum(
        trial_times[pair_trials[as_hit]] + np.round(delays).astype(np.int64), 0
    )

    total_ns = int(round(duration * 1e9))

    def homogeneous(rate: float) -> np.ndarray:
        n = rng.poisson(rate * duration)
        return rng.integers(0, total_ns, size=n).astype(np.int64)

    noise_as = homogeneous(model.noise_rate_as)
    dark_g = homogeneous(model.dark_rate_g)
    dark_as = homogeneous(model.dark_rate_as)

    g_all = np.concatenate([g_times, dark_g])
    as_all = np.concatenate([as_times, noise_as, dark_as])
    if split_as:
        to_t = rng.random(len(as_all)) < 0.5
        as_channels = np.where(to_t, CHANNEL_T, CHANNEL_R).astype(np.uint8)
    else:
        as_channels = np.full(len(as_all), CHANNEL_AS, dtype=np.uint8)

    channels = np.concatenate(
        [np.full(len(g_all), CHANNEL_G, dtype=np.uint8), as_channels]
    )
    times = np.concatenate([g_all, as_all])
    return EventStream(channels, times.astype(np.uint64))


@dataclass(frozen=True)
class Gc2Result:
    """Conditional autocorrelation estimate with Poisson uncertainty."""

    value: float
    uncertainty: float
    window: float
    counts: tuple[int, int, int, int]  # (N_G, N_GT, N_GR, N_GTR)


def conditional_g2(stream: EventStream, t_w: float, waveform_peak: float) -> Gc2Result:
    """Triple-coincidence g_c2 with the window anchored at the waveform peak.

    For each herald, T and R clicks count when they fall inside a window of
    total width ``t_w`` (ns) centered ``waveform_peak`` ns after the
    herald; triple coincidences additionally require |t_T - t_R| < t_w.
    The uncertainty propagates Poisson errors of the four counts (for a
    zero triple count it is the one-count scale N_G/(N_GT N_GR)).
    """
    if t_w <= 0:
        raise ValueError("t_w must be positive")
    t_g = stream.times_of(CHANNEL_G)
    t_t = stream.times_of(CHANNEL_T)
    t_r = stream.times_of(CHANNEL_R)
    n_g = len(t_g)
    if n_g == 0 or len(t_t) == 0 or len(t_r) == 0:
        raise UndefinedG2Error((n_g, 0, 0, 0))

    half = t_w / 2.0
    lo = t_g + waveform_peak - half
    hi = t_g + waveform_peak + half
    t_lo = np.searchsorted(t_t, lo, side="left")
    t_hi = np.searchsorted(t_t, hi, side="right")
    r_lo = np.searchsorted(t_r, lo, side="left")
    r_hi = np.searchsorted(t_r, hi, side="right")
    n_t_each = t_hi - t_lo
    n_r_each = r_hi - r_lo
    n_gt = int(n_t_each.sum())
    n_gr = int(n_r_each.sum())
    if n_gt == 0 or n_gr == 0:
        raise UndefinedG2Error((n_g, n_gt, n_gr, 0))

    n_gtr = 0
    both = np.nonzero((n_t_each > 0) & (n_r_each > 0))[0]
    for i in both:
        tt = t_t[t_lo[i] : t_hi[i]]
        rr = t_r[r_lo[i] : r_hi[i]]
        n_gtr += int(np.count_nonzero(np.abs(tt[:, None] - rr[None, :]) < t_w))

    value = n_g * n_gtr / (n_gt * n_gr)
    if n_gtr > 0:
        rel = math.sqrt(1.0 / n_g + 1.0 / n_gt + 1.0 / n_gr + 1.0 / n_gtr)
        unc = value * rel
    else:
        unc = n_g / (n_gt * n_gr)
    return Gc2Result(value=float(value), uncertainty=float(unc), window=float(t_w), counts=(n_g, n_gt, n_gr, n_gtr))


@dataclass(frozen=True)
class CorrelationHistogram:
    """Normalized coincidence histogram g(tau) on uniform lag bins."""

    lag_ns: np.ndarray
    g: np.ndarray
    counts: np.ndarray
    accidentals_per_bin: float
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.lag_ns)

    @property
    def peak(self) -> float:
        return float(self.g.max()) if len(self.g) else math.nan

    def value_at(self, lag_ns: float) -> float:
        """g in the bin containing ``lag_ns``."""
        if len(self.g) == 0:
            return math.nan
        k = int(np.argmin(np.abs(self.lag_ns - lag_ns)))
        return float(self.g[k])


def _pair_lags(t_a: np.ndarray, t_b: np.ndarray, span: float) -> np.ndarray:
    """All lags t_b - t_a within +-span, excluding self pairs when a is b."""
    same = t_a is t_b
    lags = []
    lo = np.searchsorted(t_b, t_a - span, side="left")
    hi = np.searchsorted(t_b, t_a + span, side="right")
    for i, t0 in enumerate(t_a):
        block = t_b[lo[i] : hi[i]]
        d = block - t0
        if same:
            d = np.delete(d, np.searchsorted(block, t0))
        lags.append(d)
    return np.concatenate(lags) if lags else np.empty(0, dtype=np.int64)


def pair_cross_correlation(
    stream: EventStream, bin_ns: float, span_ns: float
) -> CorrelationHistogram:
    """Normalized herald/anti-Stokes cross-correlation g_s,as(tau).

    Coincidence counts between G and all anti-Stokes side channels per lag
    bin, divided by the accidental level from the product of singles rates.
    """
    if bin_ns < 1.0:
        raise ValueError("bin must be at least the 1 ns TDC resolution")
    t_g = stream.times_of(CHANNEL_G)
    as_mask = stream.channels != CHANNEL_G
    t_as = stream.timestamps_ns[as_mask].astype(np.int64)
    if len(t_g) == 0 or len(t_as) == 0:
        return CorrelationHistogram(
            lag_ns=np.empty(0),
            g=np.empty(0),
            counts=np.empty(0, dtype=int),
            accidentals_per_bin=math.nan,
            meta={"n_g": len(t_g), "n_as": len(t_as)},
        )
    edges = np.arange(-span_ns, span_ns + bin_ns, bin_ns)
    lags = _pair_lags(t_g, t_as, span_ns)
    counts, _ = np.histogram(lags, bins=edges)
    duration = stream.duration_ns
    accidental = len(t_g) * len(t_as) * bin_ns / duration
    centers = 0.5 * (edges[:-1] + edges[1:])
    with np.errstate(divide="ignore", invalid="ignore"):
        g = counts / accidental
    return CorrelationHistogram(
        lag_ns=centers,
        g=g,
        counts=counts,
        accidentals_per_bin=float(accidental),
        meta={"n_g": len(t_g), "n_as": len(t_as), "duration_ns": duration},
    )


def channel_autocorrelation(
    stream: EventStream, channel: int, bin_ns: float, span_ns: float
) -> CorrelationHistogram:
    """Normalized same-channel correlation (self pairs excluded)."""
    if bin_ns < 1.0:
        raise ValueError("bin must be at least the 1 ns TDC resolution")
    if channel == CHANNEL_G:
        t = stream.times_of(CHANNEL_G)
    else:
        t = stream.timestamps_ns[stream.channels != CHANNEL_G].astype(np.int64)
    if len(t) < 2:
        return CorrelationHistogram(
            lag_ns=np.empty(0),
            g=np.empty(0),
            counts=np.empty(0, dtype=int),
            accidentals_per_bin=math.nan,
        )
    edges = np.arange(-span_ns, span_ns + bin_ns, bin_ns)
    lags = _pair_lags(t, t, span_ns)
    counts, _ = np.histogram(lags, bins=edges)
    accidental = len(t) * len(t) * bin_ns / stream.duration_ns
    with np.errstate(divide="ignore", invalid="ignore"):
        g = counts / accidental
    return CorrelationHistogram(
        lag_ns=0.5 * (edges[:-1] + edges[1:]),
        g=g,
        counts=counts,
        accidentals_per_bin=float(accidental),
    )


def cauchy_schwarz_ratio(g_sas_peak: float, g_ss: float, g_asas: float) -> float:
    """R_CS = g_sas^2 / (g_ss * g_asas); values above 1 are nonclassical."""
    if g_ss <= 0 or g_asas <= 0:
        raise ValueError("autocorrelations must be positive")
    return g_sas_peak**2 / (g_ss * g_asas)


@dataclass(frozen=True)
class RcsEstimate:
    r_cs: float
    g_sas_peak: float
    g_ss: float
    g_asas: float
    analytic_autocorrelation: bool


def estimate_rcs(
    stream: EventStream,
    bin_ns: float,
    span_ns: float,
    thermal_autocorrelation: bool = True,
    peak_lag_ns: float | None = None,
) -> RcsEstimate:
    """Cauchy-Schwarz ratio from a simulated stream.

    ``peak_lag_ns`` anchors the cross-correlation readout at the waveform
    peak (avoiding the upward bias of a max over noisy bins); without it
    the maximum bin is used.  Heralded-regime streams rarely produce
    same-channel coincidences, so by default the thermal single-mode value
    g = 2 is used for both autocorrelations (flagged in the result);
    otherwise the zero-lag bins of the measured autocorrelations are taken.
    """
    cross = pair_cross_correlation(stream, bin_ns, span_ns)
    g_peak = cross.peak if peak_lag_ns is None else cross.value_at(peak_lag_ns)
    if thermal_autocorrelation:
        g_ss = g_asas = 2.0
    else:
        auto_g = channel_autocorrelation(stream, CHANNEL_G, bin_ns, span_ns)
        auto_as = channel_autocorrelation(stream, CHANNEL_AS, bin_ns, span_ns)
        mid_g = len(auto_g.g) // 2
        mid_as = len(auto_as.g) // 2
        g_ss = float(auto_g.g[mid_g]) if len(auto_g.g) else math.nan
        g_asas = float(auto_as.g[mid_as]) if len(auto_as.g) else math.nan
    return RcsEstimate(
        r_cs=cauchy_schwarz_ratio(g_peak, g_ss, g_asas),
        g_sas_peak=g_peak,
        g_ss=g_ss,
        g_asas=g_asas,
        analytic_autocorrelation=thermal_autocorrelation,
    )
