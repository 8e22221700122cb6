"""Gaussian fits of arrival histograms and memory figures of merit.

Pulses in a histogram are modelled as ``A exp(-(t - t_c)**2 / (2 sigma**2))``
on a flat offset fixed from the off-pulse background. The counts of a pulse
inside a centred window of width ``t_int`` follow from the closed-form
windowed Gaussian integral divided by the bin width.
"""
import json
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit
from scipy.special import erf

from .counting import predict_g2_out
from .errors import DegeneracyError, FitError, InvalidArgumentError

PEAK_EXCLUSION = 3e-9
NS = 1e9
DCHI2_SECOND_PEAK = 25.0


@dataclass
class GaussianComponent:
    amplitude: float
    center: float
    sigma: float
    amplitude_err: float = 0.0
    center_err: float = 0.0
    sigma_err: float = 0.0


@dataclass
class GaussianFitResult:
    components: list
    offset: float
    covariance: np.ndarray
    residual_norm: float

    def model(self, t):
        t = np.asarray(t, dtype=float)
        y = np.full_like(t, self.offset)
        for c in self.components:
            y = y + c.amplitude * np.exp(-0.5 * ((t - c.center) / c.sigma) ** 2)
        return y


def _model(t, offset, *p):
    y = np.full_like(t, offset, dtype=float)
    for k in range(0, len(p), 3):
        y = y + p[k] * np.exp(-0.5 * ((t - p[k + 1]) / p[k + 2]) ** 2)
    return y


def _half_max_sigma(t, y, i, bin_width):
    half = y[i] / 2
    lo = i
    while lo > 0 and y[lo] > half:
        lo -= 1
    hi = i
    while hi < len(y) - 1 and y[hi] > half:
        hi += 1
    return max((t[hi] - t[lo]) / (2 * np.sqrt(2 * np.log(2))), bin_width)


def find_peaks(hist, n_components, offset=0.0):
    """Initial (A, t_c, sigma) guesses: highest bins with half-max widths,
    masking +/-3 sigma around each accepted peak."""
    t = hist.bin_centers
    resid = hist.counts - offset
    thr = 3 * np.sqrt(max(offset, 1.0))
    mask = np.ones(len(t), dtype=bool)
    guesses = []
    for _ in range(n_components):
        cand = np.where(mask, resid, -np.inf)
        i = int(np.argmax(cand))
        if not cand[i] > thr:
            break
        s = _half_max_sigma(t, resid, i, hist.bin_width)
        guesses.append((float(resid[i]), float(t[i]), float(s)))
        mask &= np.abs(t - t[i]) > 3 * s
    return guesses


def estimate_offset(hist, exclusion=PEAK_EXCLUSION, n_peaks=2):
    """Mean counts per bin further than ``exclusion`` from the detected pulses."""
    t = hist.bin_centers
    keep = np.ones(len(t), dtype=bool)
    span = len(t) * hist.bin_width
    for _, c, _ in find_peaks(hist, n_peaks, float(np.median(hist.counts))):
        # the histogram folds one repetition period, so distances wrap
        dist = np.abs(t - c) % span
        keep &= np.minimum(dist, span - dist) > exclusion
    if keep.sum() < 10:
        raise FitError("too few off-pulse bins to estimate the background")
    return float(hist.counts[keep].mean())


def fit_gaussians(hist, n_components=1, offset=None, max_nfev=20000):
    """Least-squares fit of ``n_components`` Gaussians on a fixed offset.

    A first pass weights bins by the observed counts, a second by the
    first-pass model (Pearson weights) so the covariance reflects Poisson
    statistics. Components are returned in order of increasing centre.
    """
    if n_components not in (1, 2):
        raise InvalidArgumentError("n_components must be 1 or 2")
    if offset is None:
        offset = estimate_offset(hist)
    t = hist.bin_centers
    y = hist.counts.astype(float)
    above = np.count_nonzero(y > offset + 3 * np.sqrt(offset))
    if above < 10:
        raise FitError(f"only {above} bins above background; no peak to fit", residual=None)
    guesses = find_peaks(hist, n_components, offset)
    if len(guesses) < n_components:
        raise DegeneracyError(f"found {len(guesses)} resolvable peaks, expected {n_components}",
                              residual=None)
    # fit in nanoseconds so the parameters are of comparable magnitude
    t = t * NS
    p0 = [v * u for g in guesses for v, u in zip(g, (1.0, NS, NS))]
    lower = [0.0, t[0], hist.bin_width * NS / 4] * n_components
    upper = [np.inf, t[-1], t[-1] - t[0]] * n_components

    def f(tt, *p):
        return _model(tt, offset, *p)

    popt = p0
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OptimizeWarning)
            for weights in ("data", "model"):
                ref = y if weights == "data" else f(t, *popt)
                sig = np.sqrt(np.maximum(ref, 1.0))
                popt, pcov = curve_fit(f, t, y, p0=popt, sigma=sig, absolute_sigma=True,
                                       bounds=(lower, upper), max_nfev=max_nfev,
                                       xtol=1e-14, ftol=1e-14, gtol=1e-14)
    except (RuntimeError, ValueError) as exc:
        r = float(np.linalg.norm((y - f(t, *popt)) / np.sqrt(np.maximum(y, 1.0))))
        raise FitError(f"Gaussian fit did not converge: {exc}", residual=r) from exc
    unit = np.tile([1.0, 1 / NS, 1 / NS], n_components)
    popt = np.asarray(popt) * unit
    pcov = pcov * np.outer(unit, unit)
    perr = np.sqrt(np.clip(np.diag(pcov), 0, None))
    comps = [GaussianComponent(popt[k], popt[k + 1], popt[k + 2], perr[k], perr[k + 1], perr[k + 2])
             for k in range(0, len(popt), 3)]
    order = np.argsort([c.center for c in comps])
    comps = [comps[i] for i in order]
    idx = np.concatenate([np.arange(3 * i, 3 * i + 3) for i in order])
    pcov = pcov[np.ix_(idx, idx)]
    if n_components == 2 and abs(comps[1].center - comps[0].center) < 0.5 * max(c.sigma for c in comps):
        raise DegeneracyError("fitted components collapsed onto one peak",
                              residual=None)
    model = _model(hist.bin_centers, offset, *popt)
    resid = float(np.sqrt(np.mean((y - model) ** 2 / np.maximum(model, 1.0))))
    return GaussianFitResult(comps, float(offset), 0.5 * (pcov + pcov.T), resid)


def gaussian_area(amplitude, sigma, t_int, bin_width=None):
    """Area of a Gaussian inside a centred window of width ``t_int``:
    ``2 sqrt(pi/2) A sigma erf(t_int / (2 sqrt(2) sigma))``. Divide by
    ``bin_width`` (if given) to turn counts-per-bin times seconds into counts."""
    area = (2 * np.sqrt(np.pi / 2) * np.asarray(amplitude) * np.asarray(sigma)
            * erf(np.asarray(t_int) / (2 * np.sqrt(2) * np.asarray(sigma))))
    if bin_width is not None:
        area = area / bin_width
    return float(area) if np.ndim(area) == 0 else area


def area_partials(amplitude, sigma, t_int):
    """Partial derivatives of :func:`gaussian_area` in (A, sigma, t_int)."""
    f = gaussian_area(amplitude, sigma, t_int)
    d_t = amplitude * np.exp(-t_int**2 / (8 * sigma**2))
    if np.isinf(t_int):
        return f / amplitude if amplitude != 0 else np.sqrt(2 * np.pi) * sigma, f / sigma, 0.0
    d_a = f / amplitude if amplitude != 0 else 2 * np.sqrt(np.pi / 2) * sigma * erf(
        t_int / (2 * np.sqrt(2) * sigma))
    d_s = f / sigma - (t_int / sigma) * d_t
    return d_a, d_s, d_t


def area_uncertainty(amplitude, sigma, t_int, amplitude_err=0.0, sigma_err=0.0, t_int_err=0.0,
                     bin_width=None):
    """First-order uncertainty of :func:`gaussian_area` from independent errors."""
    d_a, d_s, d_t = area_partials(amplitude, sigma, t_int)
    err = float(np.sqrt((d_a * amplitude_err) ** 2 + (d_s * sigma_err) ** 2 + (d_t * t_int_err) ** 2))
    return err / bin_width if bin_width is not None else err


def _component_area(comp, t_int, bin_width):
    # the centre uncertainty is carried by the integration window
    a = gaussian_area(comp.amplitude, comp.sigma, t_int, bin_width)
    e = area_uncertainty(comp.amplitude, comp.sigma, t_int, comp.amplitude_err, comp.sigma_err,
                         comp.center_err, bin_width)
    return a, e


def _ratio_err(num, num_err, den, den_err):
    if num == 0:
        return num_err / den
    return abs(num / den) * np.sqrt((num_err / num) ** 2 + (den_err / den) ** 2)


@dataclass
class MemoryReport:
    window: float
    eta_in: float
    eta_in_err: float
    eta_tot: float
    eta_tot_err: float
    snr: float
    snr_err: float
    retrieved_rate: float
    retrieved_rate_err: float
    eta_tot_whole_input: float
    eta_tot_whole_input_err: float
    input_area: float
    transmitted_area: float
    retrieved_area: float
    noise_counts: float
    input_fraction_in_window: float
    notes: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def _chi2(hist, fit):
    model = fit.model(hist.bin_centers)
    return float(np.sum((hist.counts - model) ** 2 / np.maximum(model, 1.0)))


def _check_settings(input_hist, memory_hist, noise_hist):
    for h, name in ((input_hist, "signal"), (memory_hist, "memory"), (noise_hist, "noise")):
        if h is None:
            raise InvalidArgumentError(f"missing {name} histogram")
        if h.setting != name:
            raise InvalidArgumentError(f"expected a {name!r} histogram, got {h.setting!r}")
    if not (input_hist.bin_width == memory_hist.bin_width == noise_hist.bin_width):
        raise InvalidArgumentError("histograms must share a bin width")


class _Fits:
    """Fits shared by every window of one data set."""

    def __init__(self, input_hist, memory_hist, noise_hist):
        _check_settings(input_hist, memory_hist, noise_hist)
        self.bin = input_hist.bin_width
        self.input = fit_gaussians(input_hist, 1).components[0]
        self.notes = ["fit widths left free for input, transmitted and retrieved pulses"]
        one = fit_gaussians(memory_hist, 1)
        self.transmitted, self.retrieved = one.components[0], None
        try:
            two = fit_gaussians(memory_hist, 2)
        except (FitError, DegeneracyError):
            two = None
        # keep the second pulse only if it improves chi-square by more than 5 sigma
        if two is not None and _chi2(memory_hist, one) - _chi2(memory_hist, two) > DCHI2_SECOND_PEAK:
            comps = two.components
            # nearest to the input centre is the transmitted pulse, the later one retrieved
            k = int(np.argmin([abs(c.center - self.input.center) for c in comps]))
            if comps[1 - k].center > comps[k].center:
                self.transmitted, self.retrieved = comps[k], comps[1 - k]
        if self.retrieved is None:
            self.notes.append("no retrieved pulse resolved; retrieved area set to zero")
        n = noise_hist.counts
        self.noise_per_bin = float(n.mean())
        self.noise_per_bin_err = float(np.sqrt(n.sum()) / len(n))
        self.acq = memory_hist.acquisition_time
        self.input_acq = input_hist.acquisition_time


def _report(fits, t_int, t_int_err=0.0):
    if not t_int > 0:
        raise InvalidArgumentError("integration window must be positive")
    b = fits.bin
    i_area, i_err = _component_area(fits.input, t_int, b)
    if not i_area > 0 or i_area <= i_err:
        raise ZeroDivisionError("input area is consistent with zero")
    tr_area, tr_err = _component_area(fits.transmitted, t_int, b)
    if fits.retrieved is not None:
        r_area, r_err = _component_area(fits.retrieved, t_int, b)
    else:
        r_area, r_err = 0.0, 0.0
    # input and memory settings may be acquired for different times
    scale = fits.input_acq / fits.acq
    tr_area, tr_err, r_area, r_err = (x * scale for x in (tr_area, tr_err, r_area, r_err))
    eta_in = min(max(1 - tr_area / i_area, 0.0), 1.0)
    eta_in_err = _ratio_err(tr_area, tr_err, i_area, i_err)
    eta_tot = min(max(r_area / i_area, 0.0), 1.0)
    eta_tot_err = _ratio_err(r_area, r_err, i_area, i_err)
    whole, whole_err = _component_area(fits.input, np.inf, b)
    eta_whole = r_area / whole
    eta_whole_err = _ratio_err(r_area, r_err, whole, whole_err)
    noise = fits.noise_per_bin * t_int / b
    noise_err = fits.noise_per_bin_err * t_int / b
    r_raw = r_area / scale
    r_raw_err = r_err / scale
    snr = r_raw / noise if noise > 0 else np.inf
    snr_err = _ratio_err(r_raw, r_raw_err, noise, noise_err) if noise > 0 else 0.0
    return MemoryReport(
        window=float(t_int), eta_in=float(eta_in), eta_in_err=float(eta_in_err),
        eta_tot=float(eta_tot), eta_tot_err=float(eta_tot_err), snr=float(snr),
        snr_err=float(snr_err), retrieved_rate=float(r_raw / fits.acq),
        retrieved_rate_err=float(r_raw_err / fits.acq), eta_tot_whole_input=float(eta_whole),
        eta_tot_whole_input_err=float(eta_whole_err), input_area=float(i_area),
        transmitted_area=float(tr_area), retrieved_area=float(r_area), noise_counts=float(noise),
        input_fraction_in_window=float(i_area / whole), notes=list(fits.notes))


def memory_report(input_hist, memory_hist, noise_hist, t_int=500e-12):
    """Read-in and total efficiency, SNR and retrieved count rate in a
    ``t_int`` window, with first-order propagated uncertainties."""
    return _report(_Fits(input_hist, memory_hist, noise_hist), t_int)


@dataclass
class WindowSweep:
    windows: np.ndarray
    snr: np.ndarray
    snr_err: np.ndarray
    rate: np.ndarray
    rate_err: np.ndarray
    g2_out_pred: np.ndarray
    reports: list

    def rate_monotone(self):
        return bool(np.all(np.diff(self.rate) >= -1e-12 * np.abs(self.rate[1:]).max(initial=1.0)))

    def to_csv(self, path):
        data = np.column_stack([self.windows, self.snr, self.snr_err, self.rate, self.rate_err,
                                self.g2_out_pred])
        np.savetxt(path, data, delimiter=",", comments="", fmt="%.10e",
                   header="window_s,snr,snr_err,retrieved_rate_per_s,retrieved_rate_err,g2_out_pred")

    def to_dict(self):
        return {"windows_s": self.windows.tolist(), "snr": self.snr.tolist(),
                "snr_err": self.snr_err.tolist(), "retrieved_rate_per_s": self.rate.tolist(),
                "retrieved_rate_err": self.rate_err.tolist(),
                "g2_out_pred": self.g2_out_pred.tolist(),
                "reports": [r.to_dict() for r in self.reports]}


def window_sweep(input_hist, memory_hist, noise_hist, windows, g2_in=0.325):
    """Memory reports over integration windows plus the predicted output g2(0)."""
    windows = np.asarray(windows, dtype=float)
    if windows.ndim != 1 or len(windows) == 0 or np.any(np.diff(windows) <= 0):
        raise InvalidArgumentError("windows must be a non-empty ascending sequence")
    fits = _Fits(input_hist, memory_hist, noise_hist)
    reports = [_report(fits, w) for w in windows]
    snr = np.array([r.snr for r in reports])
    sweep = WindowSweep(windows, snr, np.array([r.snr_err for r in reports]),
                        np.array([r.retrieved_rate for r in reports]),
                        np.array([r.retrieved_rate_err for r in reports]),
                        np.array([predict_g2_out(g2_in, s) for s in snr]), reports)
    if not sweep.rate_monotone():
        raise FitError("retrieved rate decreased with window width")
    return sweep


# --- synthetic memory data set ------------------------------------------------

@dataclass
class MemoryDataSet:
    input: object
    memory: object
    noise: object
    truth: dict


def synthesize_memory_data(seed, acquisition_time=600.0, input_rate=203.4, eta_in=0.493,
                           eta_tot=0.129, snr=18.2, storage_time=800e-12,
                           input_fraction_in_window=0.845, window=500e-12, t0=3e-9,
                           jitter_fwhm=70e-12, bin_width=16e-12, rep_rate=80e6):
    """Input, memory and noise histograms with known figures of merit.

    The detected input (``input_rate`` counts/s) is Gaussian with the width
    that places ``input_fraction_in_window`` of it inside ``window``. The memory
    setting holds the transmitted pulse and a copy retrieved ``storage_time``
    later; ``eta_tot`` and ``snr`` refer to the windowed areas and fix the
    retrieved amplitude and the flat dark rate. Noise photons from the memory
    itself are neglected, so all three settings share the dark rate.
    """
    from scipy.special import erfinv

    from .counting import ArrivalHistogram, _rng, sample_arrival_times

    if not 0 < input_fraction_in_window < 1:
        raise InvalidArgumentError("input_fraction_in_window must lie in (0, 1)")
    sigma = window / (2 * np.sqrt(2) * erfinv(input_fraction_in_window))
    jit = jitter_fwhm / (2 * np.sqrt(2 * np.log(2)))
    if sigma <= jit:
        raise InvalidArgumentError("detector jitter exceeds the requested pulse width")
    sigma_photon = np.sqrt(sigma**2 - jit**2)
    period = 1.0 / rep_rate
    n_bins = int(np.floor(period / bin_width + 1e-9))
    span = n_bins * bin_width
    retrieved_rate = input_rate * input_fraction_in_window * eta_tot
    noise_window_rate = retrieved_rate / snr
    dark_rate = noise_window_rate * period / window
    rng = _rng(seed)

    def histogram(setting, pulses):
        t = [rng.random(rng.poisson(dark_rate * acquisition_time)) * period]
        for rate, center in pulses:
            n = rng.poisson(rate * acquisition_time)
            t.append(center + sample_arrival_times(None, n, rng, sigma))
        t = np.mod(np.concatenate(t), period)
        counts, _ = np.histogram(t[t < span], bins=n_bins, range=(0.0, span))
        return ArrivalHistogram(counts, bin_width, acquisition_time, setting, seed)

    del sigma_photon  # photon width and jitter combine into one Gaussian of width sigma
    data = MemoryDataSet(
        histogram("signal", [(input_rate, t0)]),
        histogram("memory", [(input_rate * (1 - eta_in), t0),
                             (input_rate * eta_tot, t0 + storage_time)]),
        histogram("noise", []),
        {"eta_in": eta_in, "eta_tot": eta_tot, "snr": snr, "retrieved_rate": retrieved_rate,
         "eta_tot_whole_input": eta_tot * input_fraction_in_window, "sigma": sigma,
         "dark_rate": dark_rate, "window": window})
    return data
