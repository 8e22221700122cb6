"""Synthetic photon-counting data and photon statistics.

Arrival-time histograms for the three measurement settings, Hanbury Brown
and Twiss coincidence histograms with optional blinking, g2(0) extraction
and the noise model of the memory output.

Per-pulse photon-number law
---------------------------
Many laws share a given g2(0). Synthesis uses a vacuum / one / two-photon
mixture with mean ``mu``::

    p2 = g2 * mu**2 / 2,    p1 = mu - 2 * p2,    p0 = 1 - p1 - p2

which has exactly the configured g2(0) at the photon level.
"""
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import constants as C
from .errors import InsufficientDataError, InvalidArgumentError, RangeError
from .photonics import TemporalProfile

SETTINGS = ("signal", "memory", "noise")


@dataclass(frozen=True)
class Blinking:
    """Two-state telegraph modulation of the source: on-fraction ``duty``
    and exponential correlation time ``correlation_time`` (s)."""

    duty: float
    correlation_time: float

    def __post_init__(self):
        if not 0 < self.duty <= 1:
            raise InvalidArgumentError("duty must lie in (0, 1]")
        if not self.correlation_time > 0:
            raise InvalidArgumentError("correlation_time must be positive")

    @property
    def mean_on(self):
        return self.correlation_time / (1 - self.duty) if self.duty < 1 else np.inf

    @property
    def mean_off(self):
        return self.correlation_time / self.duty


@dataclass(frozen=True)
class SourceModel:
    rep_rate: float = C.REP_RATE
    mean_photons_per_pulse: float = 0.01
    g2_zero: float = 0.0
    blinking: Blinking | None = None
    profile: TemporalProfile | None = None

    def __post_init__(self):
        if not self.rep_rate > 0:
            raise InvalidArgumentError("rep_rate must be positive")
        if not self.mean_photons_per_pulse >= 0:
            raise InvalidArgumentError("mean_photons_per_pulse must be non-negative")
        if not self.g2_zero >= 0:
            raise InvalidArgumentError("g2_zero must be non-negative")

    @property
    def period(self):
        return 1.0 / self.rep_rate


@dataclass(frozen=True)
class DetectorModel:
    efficiency: float = 0.80
    dark_rate: float = 0.0
    jitter_fwhm: float = 70e-12

    def __post_init__(self):
        if not 0 <= self.efficiency <= 1:
            raise InvalidArgumentError("efficiency must lie in [0, 1]")
        if not self.dark_rate >= 0:
            raise InvalidArgumentError("dark_rate must be non-negative")
        if not self.jitter_fwhm >= 0:
            raise InvalidArgumentError("jitter_fwhm must be non-negative")

    @property
    def jitter_sigma(self):
        return self.jitter_fwhm / C.FWHM_PER_SIGMA


@dataclass
class ArrivalHistogram:
    """Detection counts against time after the excitation trigger.

    Bin ``i`` covers ``[i * bin_width, (i + 1) * bin_width)``.
    """

    counts: np.ndarray
    bin_width: float = C.TDC_BIN
    acquisition_time: float = 1.0
    setting: str = "signal"
    seed: int | None = None

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 1 or np.any(c < 0) or not np.all(np.equal(np.mod(c, 1), 0)):
            raise InvalidArgumentError("counts must be non-negative integers")
        self.counts = c.astype(np.int64)
        if self.setting not in SETTINGS:
            raise InvalidArgumentError(f"setting must be one of {SETTINGS}")
        if not self.bin_width > 0 or not self.acquisition_time > 0:
            raise InvalidArgumentError("bin_width and acquisition_time must be positive")

    @property
    def bin_starts(self):
        return np.arange(len(self.counts)) * self.bin_width

    @property
    def bin_centers(self):
        return self.bin_starts + self.bin_width / 2

    @property
    def total(self):
        return int(self.counts.sum())

    def metadata(self):
        return {"kind": "arrival", "setting": self.setting, "bin_width_s": self.bin_width,
                "acquisition_time_s": self.acquisition_time, "seed": self.seed}


@dataclass
class CoincidenceHistogram:
    """Coincidence counts against delay (detector B minus detector A).

    ``delays`` are bin centres; peaks sit at multiples of ``peak_spacing``.
    """

    delays: np.ndarray
    counts: np.ndarray
    bin_width: float
    peak_spacing: float
    acquisition_time: float = 1.0
    correlation_time: float | None = None
    seed: int | None = None

    def __post_init__(self):
        self.delays = np.asarray(self.delays, dtype=float)
        c = np.asarray(self.counts)
        if c.shape != self.delays.shape or np.any(c < 0):
            raise InvalidArgumentError("counts must be non-negative and match delays")
        self.counts = c.astype(np.int64)

    def metadata(self):
        return {"kind": "coincidence", "bin_width_s": self.bin_width,
                "peak_spacing_s": self.peak_spacing, "acquisition_time_s": self.acquisition_time,
                "correlation_time_s": self.correlation_time, "seed": self.seed}


def _rng(seed):
    return np.random.Generator(np.random.Philox(seed))


def sample_arrival_times(profile, n, rng, jitter_sigma=0.0, grid_points=20001):
    """Draw ``n`` arrival times from ``profile`` (inverse CDF) plus Gaussian jitter."""
    if n == 0:
        return np.empty(0)
    if profile is None:
        t = np.zeros(n)
    else:
        lo, hi = profile.support()
        grid = np.linspace(lo, hi, grid_points)
        if profile.shape == "tabulated":
            grid = np.union1d(grid, profile.times)
        dens = profile.intensity(grid)
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
        cdf /= cdf[-1]
        # drop flat stretches so the inverse is single-valued
        keep = np.concatenate([[True], np.diff(cdf) > 0])
        t = np.interp(rng.random(n), cdf[keep], grid[keep])
    if jitter_sigma > 0:
        t = t + jitter_sigma * rng.standard_normal(n)
    return t


def synthesize_arrival(source, profile, detector, duration, seed, setting="signal",
                       bin_width=C.TDC_BIN, offset=0.0):
    """Arrival-time histogram over one repetition period.

    Detections are Poisson with mean ``mu * efficiency`` per pulse, summed over
    all pulses; times follow ``profile`` (shifted by ``offset``) with detector
    jitter and are folded into the period. Dark counts are uniform over the
    period. The trailing fraction of a bin left when the period is not a whole
    number of bins is discarded.
    """
    if not duration > 0:
        raise InvalidArgumentError("duration must be positive")
    rng = _rng(seed)
    period = source.period
    n_bins = int(np.floor(period / bin_width + 1e-9))
    span = n_bins * bin_width
    n_pulses = source.rep_rate * duration
    n_sig = rng.poisson(source.mean_photons_per_pulse * detector.efficiency * n_pulses)
    t_sig = np.mod(sample_arrival_times(profile, n_sig, rng, detector.jitter_sigma) + offset, period)
    n_dark = rng.poisson(detector.dark_rate * duration)
    t_dark = rng.random(n_dark) * period
    t = np.concatenate([t_sig, t_dark])
    counts, _ = np.histogram(t[t < span], bins=n_bins, range=(0.0, span))
    return ArrivalHistogram(counts, bin_width, duration, setting, seed)


def _telegraph_on_intervals(blinking, duration, rng):
    """On intervals ``(start, stop)`` of a telegraph process started in its
    stationary state."""
    if blinking is None or blinking.duty >= 1:
        return np.array([[0.0, duration]])
    on = rng.random() < blinking.duty
    t = 0.0
    starts, stops = [], []
    # draw durations in blocks to keep the loop short
    block = max(16, int(2 * duration / (blinking.mean_on + blinking.mean_off)) + 16)
    while t < duration:
        d_on = rng.exponential(blinking.mean_on, block)
        d_off = rng.exponential(blinking.mean_off, block)
        if on:
            seq = np.column_stack([d_on, d_off]).ravel()
        else:
            seq = np.column_stack([d_off, d_on]).ravel()
        edges = t + np.concatenate([[0.0], np.cumsum(seq)])
        first = 0 if on else 1
        s = edges[first:-1:2]
        e = edges[first + 1::2]
        m = min(len(s), len(e))
        starts.append(s[:m])
        stops.append(e[:m])
        t = edges[-1]
    s = np.concatenate(starts)
    e = np.concatenate(stops)
    keep = s < duration
    return np.column_stack([s[keep], np.minimum(e[keep], duration)])


def _click_probabilities(mu, g2, eta_a, eta_b):
    """Per-pulse probabilities of (A only, B only, A and B) behind a 50:50 splitter."""
    p2 = g2 * mu**2 / 2
    p1 = mu - 2 * p2
    if p1 < 0 or p1 + p2 > 1:
        raise InvalidArgumentError("mean photon number too large for the 0/1/2-photon law at this g2")
    a, b = eta_a / 2, eta_b / 2
    none = 1 - a - b
    qa = p1 * a + p2 * ((a + none) ** 2 - none**2)
    qb = p1 * b + p2 * ((b + none) ** 2 - none**2)
    qab = p2 * 2 * a * b
    return qa, qb, qab


def synthesize_hbt(source, detectors, duration, seed, bin_width=64e-12, max_delay=None):
    """Coincidence histogram of a 50:50 HBT measurement.

    Photon numbers per pulse follow the module-level law with mean
    ``mu / duty`` while the source is on, so the average rate is unchanged by
    blinking. Click events are placed at distinct pulses drawn uniformly from
    the on intervals; dark counts land at uniform random times.
    """
    if not duration > 0:
        raise InvalidArgumentError("duration must be positive")
    det_a, det_b = detectors
    rng = _rng(seed)
    T = source.period
    blink = source.blinking
    if max_delay is None:
        max_delay = (5 * blink.correlation_time if blink else 0.0) + 25 * T
    K = int(np.ceil(max_delay / T))
    n_pulses = int(round(source.rep_rate * duration))

    # pulse-index ranges of the on state
    iv = _telegraph_on_intervals(blink, duration, rng)
    first = np.ceil(iv[:, 0] / T - 1e-9).astype(np.int64)
    last = np.minimum(np.ceil(iv[:, 1] / T - 1e-9).astype(np.int64), n_pulses)
    lengths = np.maximum(last - first, 0)
    n_on = int(lengths.sum())
    duty = blink.duty if blink else 1.0
    qa, qb, qab = _click_probabilities(source.mean_photons_per_pulse / duty, source.g2_zero,
                                       det_a.efficiency, det_b.efficiency)
    n_ev = rng.multinomial(n_on, [qa, qb, qab, max(0.0, 1 - qa - qb - qab)])[:3]
    picks = rng.choice(n_on, int(n_ev.sum()), replace=False, shuffle=True) if n_on else np.empty(0, np.int64)
    offsets = np.concatenate([[0], np.cumsum(lengths)])
    seg = np.searchsorted(offsets, picks, side="right") - 1
    pulses = first[seg] + (picks - offsets[seg])
    pa = np.concatenate([pulses[:n_ev[0]], pulses[n_ev[0] + n_ev[1]:]])
    pb = pulses[n_ev[0]:]

    def clicks(idx, det):
        t = sample_arrival_times(source.profile, len(idx), rng, det.jitter_sigma)
        n_dark = rng.poisson(det.dark_rate * duration)
        dark_t = rng.random(n_dark) * duration
        idx = np.concatenate([idx, np.floor(dark_t / T).astype(np.int64)])
        t = np.concatenate([t, np.mod(dark_t, T)])
        order = np.argsort(idx, kind="stable")
        return idx[order], t[order]

    ia, ta = clicks(pa, det_a)
    ib, tb = clicks(pb, det_b)

    # all (A, B) pairs within K pulses
    lo = np.searchsorted(ib, ia - K, side="left")
    hi = np.searchsorted(ib, ia + K, side="right")
    n_pairs = hi - lo
    rows = np.repeat(np.arange(len(ia)), n_pairs)
    start = np.repeat(lo - np.concatenate([[0], np.cumsum(n_pairs)[:-1]]), n_pairs)
    cols = np.arange(len(rows)) + start
    delays = (ib[cols] - ia[rows]) * T + (tb[cols] - ta[rows])

    half_bins = int(np.ceil((K + 0.5) * T / bin_width))
    edges = (np.arange(-half_bins, half_bins + 1) - 0.5) * bin_width
    counts, _ = np.histogram(delays, bins=edges)
    centers = 0.5 * (edges[1:] + edges[:-1])
    return CoincidenceHistogram(centers, counts, bin_width, T, duration,
                                blink.correlation_time if blink else None, seed)


@dataclass(frozen=True)
class G2Result:
    g2: float
    stderr: float
    zero_area: int
    far_mean: float
    n_far: int


def peak_areas(hist, window=8e-9):
    """Counts within ``window`` of each peak centre, keyed by peak index."""
    if window > hist.peak_spacing + 1e-15:
        raise InvalidArgumentError("window must not exceed the peak spacing")
    k = np.round(hist.delays / hist.peak_spacing).astype(np.int64)
    inside = np.abs(hist.delays - k * hist.peak_spacing) <= window / 2
    kmax = int(np.max(np.abs(k[inside]))) if inside.any() else 0
    # only peaks fully covered by the histogram
    lo_edge = hist.delays[0] - hist.bin_width / 2
    hi_edge = hist.delays[-1] + hist.bin_width / 2
    idx = np.arange(-kmax, kmax + 1)
    full = (idx * hist.peak_spacing - window / 2 >= lo_edge) & (idx * hist.peak_spacing + window / 2 <= hi_edge)
    areas = np.bincount(k[inside] + kmax, weights=hist.counts[inside], minlength=2 * kmax + 1)
    return idx[full], areas[full].astype(np.int64)


def extract_g2(hist, window=8e-9, n_far=20, far_delay=None):
    """g2(0) as the zero-delay peak area over the mean far-delay peak area.

    Far peaks are the ``n_far`` farthest peaks beyond ``far_delay`` (default
    five times the histogram's blinking correlation time, zero without
    blinking). Uncertainty follows from Poisson statistics of the areas.
    """
    idx, areas = peak_areas(hist, window)
    if far_delay is None:
        far_delay = 5 * hist.correlation_time if hist.correlation_time else 0.0
    eligible = np.nonzero((idx != 0) & (np.abs(idx) * hist.peak_spacing >= far_delay))[0]
    if len(eligible) < 3:
        raise InsufficientDataError(f"only {len(eligible)} far-delay peaks available; need 3")
    far = eligible[np.argsort(-np.abs(idx[eligible]), kind="stable")[:n_far]]
    total_far = int(areas[far].sum())
    if total_far == 0:
        raise InsufficientDataError("far-delay peaks are empty")
    m = total_far / len(far)
    zero = areas[idx == 0]
    a0 = int(zero[0]) if len(zero) else 0
    g = a0 / m
    err = np.sqrt(max(a0, 1) / m**2 + g**2 / total_far)
    return G2Result(float(g), float(err), a0, float(m), len(far))


def predict_g2_out(g2_in, snr):
    """g2(0) of retrieved signal mixed with Poissonian noise at signal-to-noise ``snr``."""
    g2_in = np.asarray(g2_in, dtype=float)
    snr = np.asarray(snr, dtype=float)
    if np.any(g2_in < 0) or np.any(snr < 0):
        raise InvalidArgumentError("g2_in and snr must be non-negative")
    out = (1 + 2 * snr + snr**2 * g2_in) / (1 + snr) ** 2
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class NoiseCurve:
    """Noise photons per pulse against control detuning magnitude (Hz),
    piecewise linear and non-increasing away from resonance."""

    detunings: tuple
    noise: tuple
    label: str = ""

    def __post_init__(self):
        d = np.asarray(self.detunings, dtype=float)
        n = np.asarray(self.noise, dtype=float)
        if d.shape != n.shape or len(d) < 2:
            raise InvalidArgumentError("noise table needs matching detunings and values")
        if np.any(np.diff(d) <= 0):
            raise InvalidArgumentError("noise table detunings must increase")
        if np.any(n < 0) or np.any(np.diff(n) > 0):
            raise InvalidArgumentError("noise must be non-negative and non-increasing in |detuning|")


NOISE_ANCHOR_DETUNING = 6e9
NOISE_UNFILTERED = 1.33e-7
NOISE_ETALON = 1.5e-8
_NOISE_GRID = np.arange(2, 11) * 1e9


def default_noise_curve(etalon=True):
    """Noise table anchored at 6 GHz; the shape away from the anchor falls as
    1/detuning**2 (placeholder for the untabulated measured curve)."""
    anchor = NOISE_ETALON if etalon else NOISE_UNFILTERED
    vals = anchor * (NOISE_ANCHOR_DETUNING / _NOISE_GRID) ** 2
    return NoiseCurve(tuple(_NOISE_GRID), tuple(vals), "etalon" if etalon else "unfiltered")


def noise_vs_detuning(model, detuning):
    """Noise photons per pulse at control ``detuning`` (Hz, either sign)."""
    d = np.abs(np.asarray(detuning, dtype=float))
    lo, hi = model.detunings[0], model.detunings[-1]
    if np.any(d < lo - 1e-6) or np.any(d > hi + 1e-6):
        raise RangeError(f"detuning outside the tabulated range [{lo:.3g}, {hi:.3g}] Hz")
    out = np.interp(d, model.detunings, model.noise)
    return float(out) if out.ndim == 0 else out


# --- serialisation ----------------------------------------------------------------

def write_histogram(hist, path):
    """Write ``path`` as CSV plus a JSON sidecar with the metadata."""
    path = Path(path)
    if isinstance(hist, ArrivalHistogram):
        x, header = hist.bin_starts, "bin_start_s,counts"
    else:
        x, header = hist.delays - hist.bin_width / 2, "bin_start_s,counts"
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for xi, ci in zip(x, hist.counts):
            fh.write(f"{xi:.12e},{int(ci)}\n")
    path.with_suffix(".json").write_text(json.dumps(hist.metadata(), indent=2, sort_keys=True))
    return path


def read_histogram(path):
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    counts = data[:, 1].astype(np.int64)
    if meta["kind"] == "arrival":
        return ArrivalHistogram(counts, meta["bin_width_s"], meta["acquisition_time_s"],
                                meta["setting"], meta["seed"])
    bw = meta["bin_width_s"]
    return CoincidenceHistogram(data[:, 0] + bw / 2, counts, bw, meta["peak_spacing_s"],
                                meta["acquisition_time_s"], meta["correlation_time_s"], meta["seed"])
