"""Source and filter-chain models.

Photon temporal profiles and EOM gating, single-resonance etalon filtering,
inhomogeneous broadening of the emitter line and loss-budget composition.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.optimize import minimize_scalar
from scipy.special import voigt_profile

from . import constants as C
from .errors import IntegrationError, InvalidArgumentError, PreconditionError
from .memory import detuning_scan

GATE_FLOOR_DB = -20.0
SCAN_POINTS = 61
SCAN_HALF_RANGE = 15e9


@dataclass(frozen=True)
class TemporalProfile:
    """Photon intensity profile normalised to unit photon number.

    ``shape`` is ``"exponential"`` (``parameter`` = 1/e time, rising sharply at
    ``t0``), ``"gaussian"`` (``parameter`` = intensity FWHM, centred on ``t0``)
    or ``"tabulated"`` (``times``/``values`` sampled intensity, linearly
    interpolated and zero outside the table).
    """

    shape: str
    parameter: float = 0.0
    t0: float = 0.0
    times: np.ndarray | None = None
    values: np.ndarray | None = None
    _norm: float = field(default=1.0, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.shape in ("exponential", "gaussian"):
            if not self.parameter > 0:
                raise InvalidArgumentError(f"{self.shape} profile needs a positive parameter")
        elif self.shape == "tabulated":
            if self.times is None or self.values is None:
                raise InvalidArgumentError("tabulated profile needs times and values")
            t = np.asarray(self.times, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if t.shape != v.shape or t.ndim != 1 or len(t) < 2:
                raise InvalidArgumentError("times and values must be equal-length 1-D arrays")
            if np.any(np.diff(t) <= 0):
                raise InvalidArgumentError("times must increase strictly")
            if np.any(v < 0):
                raise InvalidArgumentError("intensity values must be non-negative")
            area = float(np.trapezoid(v, t))
            if not area > 0:
                raise InvalidArgumentError("tabulated profile has zero area")
            object.__setattr__(self, "times", t)
            object.__setattr__(self, "values", v)
            object.__setattr__(self, "_norm", area)
        else:
            raise InvalidArgumentError(f"unknown profile shape {self.shape!r}")

    @classmethod
    def exponential(cls, decay_time, t0=0.0):
        return cls("exponential", decay_time, t0)

    @classmethod
    def gaussian(cls, fwhm, center=0.0):
        return cls("gaussian", fwhm, center)

    @classmethod
    def tabulated(cls, times, values):
        return cls("tabulated", 0.0, 0.0, np.asarray(times, float), np.asarray(values, float))

    @property
    def sigma(self):
        return self.parameter / C.FWHM_PER_SIGMA

    def intensity(self, t):
        """Photon flux density (1/s) at times ``t``."""
        t = np.asarray(t, dtype=float)
        if self.shape == "exponential":
            x = (t - self.t0) / self.parameter
            return np.where(x >= 0, np.exp(-np.maximum(x, 0.0)), 0.0) / self.parameter
        if self.shape == "gaussian":
            s = self.sigma
            return np.exp(-0.5 * ((t - self.t0) / s) ** 2) / (np.sqrt(2 * np.pi) * s)
        return np.interp(t, self.times, self.values, left=0.0, right=0.0) / self._norm

    def peak(self):
        if self.shape == "exponential":
            return 1.0 / self.parameter
        if self.shape == "gaussian":
            return 1.0 / (np.sqrt(2 * np.pi) * self.sigma)
        return float(self.values.max() / self._norm)

    def support(self, tail=40.0):
        """Interval holding all but a negligible fraction of the photon."""
        if self.shape == "exponential":
            return self.t0, self.t0 + tail * self.parameter
        if self.shape == "gaussian":
            w = np.sqrt(2 * tail) * self.sigma
            return self.t0 - w, self.t0 + w
        return float(self.times[0]), float(self.times[-1])

    def shifted(self, dt):
        if self.shape == "tabulated":
            return TemporalProfile.tabulated(self.times + dt, self.values)
        return TemporalProfile(self.shape, self.parameter, self.t0 + dt)

    def feature_time(self):
        if self.shape == "exponential":
            return self.parameter
        if self.shape == "gaussian":
            return self.sigma
        return float(np.min(np.diff(self.times)))


def gate_transmission(gate, t, delay=0.0, floor_db=GATE_FLOOR_DB):
    """Intensity transmission of an EOM gate shaped like ``gate``, peaking at
    one and never falling below the extinction floor."""
    floor = 10 ** (floor_db / 10)
    if gate is None:
        return np.ones_like(np.asarray(t, dtype=float))
    shape = gate.intensity(np.asarray(t, dtype=float) - delay) / gate.peak()
    return floor + (1 - floor) * shape


def _gate_grid(profile, gate, samples_per_feature=200):
    # the output vanishes wherever the input does, so the input support suffices
    lo, hi = profile.support()
    step = profile.feature_time()
    if gate is not None:
        step = min(step, gate.feature_time())
    n = int(np.ceil((hi - lo) / (step / samples_per_feature))) + 1
    return np.linspace(lo, hi, min(n, 2_000_001))


def apply_temporal_gate(profile, gate, delay=0.0, floor_db=GATE_FLOOR_DB):
    """Gate ``profile`` with an intensity modulator shaped like ``gate``.

    Returns the transmitted profile (renormalised, tabulated) and the
    transmitted fraction. ``gate=None`` is an open modulator.
    """
    t = _gate_grid(profile, gate)
    out = profile.intensity(t) * gate_transmission(gate, t, delay, floor_db)
    eff = float(np.clip(integrate.simpson(out, x=t), 0.0, 1.0))
    if gate is None:
        return profile, eff
    return TemporalProfile.tabulated(t, out), eff


def optimal_gate_delay(profile, gate, floor_db=GATE_FLOOR_DB, n_scan=201):
    """Gate delay maximising transmission: coarse scan, then bounded refinement."""
    a0, a1 = profile.support(tail=8.0)
    delays = np.linspace(a0 - 2 * gate.parameter, a1, n_scan)
    effs = np.array([apply_temporal_gate(profile, gate, d, floor_db)[1] for d in delays])
    i = int(np.argmax(effs))
    lo, hi = delays[max(i - 1, 0)], delays[min(i + 1, n_scan - 1)]
    res = minimize_scalar(lambda d: -apply_temporal_gate(profile, gate, d, floor_db)[1],
                          bounds=(lo, hi), method="bounded", options={"xatol": 1e-15})
    if -res.fun >= effs[i]:
        return float(res.x), float(-res.fun)
    return float(delays[i]), float(effs[i])


@dataclass(frozen=True)
class EtalonSpec:
    """Single-resonance Fabry-Perot etalon (Hz)."""

    lorentzian_fwhm: float = 1.12e9
    peak_power_transmission: float = 0.85
    center_detuning: float = 0.0

    def __post_init__(self):
        if not self.lorentzian_fwhm > 0:
            raise InvalidArgumentError("lorentzian_fwhm must be positive")
        if not 0 < self.peak_power_transmission <= 1:
            raise InvalidArgumentError("peak_power_transmission must lie in (0, 1]")


def etalon_amplitude(etalon, detuning):
    """Complex amplitude transmission at ``detuning`` (Hz)."""
    x = 2 * (np.asarray(detuning, dtype=float) - etalon.center_detuning) / etalon.lorentzian_fwhm
    return np.sqrt(etalon.peak_power_transmission) / (1 - 1j * x)


def etalon_power(etalon, detuning):
    return np.abs(etalon_amplitude(etalon, detuning)) ** 2


@dataclass(frozen=True)
class InhomogeneousModel:
    """Normal distribution of emitter centre frequencies (FWHM, Hz) around
    ``center``, each line Lorentzian with ``homogeneous_linewidth`` FWHM."""

    fwhm: float = 12.4e9
    homogeneous_linewidth: float = 200e6
    center: float = 0.0

    def __post_init__(self):
        if not self.fwhm > 0:
            raise InvalidArgumentError("inhomogeneous fwhm must be positive")
        if not self.homogeneous_linewidth >= 0:
            raise InvalidArgumentError("homogeneous_linewidth must be non-negative")

    @property
    def sigma(self):
        return self.fwhm / C.FWHM_PER_SIGMA

    def sample(self, n, rng):
        return self.center + self.sigma * rng.standard_normal(n)


def _line_overlap(line, etalon, offset):
    # homogeneous Lorentzian convolved with the etalon Lorentzian: widths add
    w = etalon.lorentzian_fwhm + line.homogeneous_linewidth
    x = 2 * (offset - etalon.center_detuning) / w
    return etalon.peak_power_transmission * etalon.lorentzian_fwhm / w / (1 + x * x)


def broadened_transmission(line, etalon, method="quad"):
    """Ensemble-average etalon power transmission of the broadened line.

    ``method="quad"`` integrates the homogeneous-line overlap against the
    normal centre distribution adaptively; ``"trapezoid"`` integrates the
    Voigt line shape against ``|t|**2`` on a uniform frequency grid;
    ``"voigt"`` uses the closed-form Voigt profile of the combined widths.
    """
    s = line.sigma
    if method == "quad":
        # standardised centre frequency y = (nu - center) / sigma
        def f(y):
            return _line_overlap(line, etalon, line.center + s * y) * np.exp(-0.5 * y * y)

        y_et = (etalon.center_detuning - line.center) / s
        lo, hi = -12.0, 12.0
        pts = [y for y in (0.0, y_et) if lo < y < hi]
        val, err = integrate.quad(f, lo, hi, points=pts or None, limit=500, epsrel=1e-10)
        val /= np.sqrt(2 * np.pi)
        err /= np.sqrt(2 * np.pi)
        if not np.isfinite(val) or err > 1e-6 * max(abs(val), 1e-300):
            raise IntegrationError(f"overlap integral did not converge (error {err:.2g})")
        return float(val)
    if method == "trapezoid":
        # frequency-domain rule: broadened line shape times etalon |t|^2
        half = 60 * max(s, etalon.lorentzian_fwhm, line.homogeneous_linewidth)
        step = min(max(s, line.homogeneous_linewidth / 2), etalon.lorentzian_fwhm) / 40
        n = int(2 * half / step) + 1
        if n > 5_000_000:
            raise IntegrationError("line too narrow for the frequency-grid rule")
        nu = np.linspace(-half, half, n) + line.center
        shape = voigt_profile(nu - line.center, s, line.homogeneous_linewidth / 2)
        return float(np.trapezoid(shape * etalon_power(etalon, nu), nu))
    if method == "voigt":
        w = etalon.lorentzian_fwhm + line.homogeneous_linewidth
        peak_to_area = np.pi * w / 2
        return float(etalon.peak_power_transmission * etalon.lorentzian_fwhm / w * peak_to_area
                     * voigt_profile(etalon.center_detuning - line.center, s, w / 2))
    raise InvalidArgumentError(f"unknown method {method!r}")


@dataclass(frozen=True)
class MonteCarloResult:
    mean: float
    stderr: float
    n_samples: int
    seed: int


def readin_scan(params, signal, control, quad=None, n_points=64,
                n_scan=SCAN_POINTS, half_range=SCAN_HALF_RANGE):
    """Read-in efficiency on the interpolation grid used by the Monte Carlo."""
    return detuning_scan(params, signal, control, np.linspace(-half_range, half_range, n_scan),
                         quad, n_points)


def monte_carlo_readin(params, signal, control, line, n_samples, seed, scan=None,
                       quad=None, n_points=64):
    """Mean read-in efficiency over emitter centre frequencies drawn from ``line``.

    Per-sample efficiencies come from linear interpolation of a read-in
    detuning scan (computed here unless ``scan`` is given); the sampler is a
    Philox counter-based generator keyed by ``seed``.
    """
    if not getattr(control, "calibrated", False):
        raise PreconditionError("control pulse must be calibrated before the Monte Carlo")
    if n_samples < 100:
        raise InvalidArgumentError("n_samples must be at least 100")
    if scan is None:
        scan = readin_scan(params, signal, control, quad, n_points)
    rng = np.random.Generator(np.random.Philox(seed))
    eff = np.clip(scan.interpolate(line.sample(n_samples, rng)), 0.0, 1.0)
    return MonteCarloResult(float(eff.mean()), float(eff.std(ddof=1) / np.sqrt(n_samples)),
                            int(n_samples), int(seed))


@dataclass
class LossBudget:
    """Ordered (label, transmission, uncertainty) stages."""

    stages: list = field(default_factory=list)

    def __post_init__(self):
        stages = []
        for st in self.stages:
            label, t, u = st
            t, u = float(t), float(u)
            if not 0 < t <= 1:
                raise InvalidArgumentError(f"stage {label!r}: transmission must lie in (0, 1]")
            if u < 0:
                raise InvalidArgumentError(f"stage {label!r}: uncertainty must be non-negative")
            stages.append((str(label), t, u))
        self.stages = stages


REFERENCE_LOSS_STAGES = [
    ("source fibres to EOM", 0.90, 0.01),
    ("EOM", 0.45, 0.02),
    ("EOM output to vapour cell", 0.72, 0.01),
    ("vapour cell", 0.80, 0.02),
    ("vapour cell to detectors", 0.65, 0.01),
]


def compose_loss_budget(budget):
    """Total transmission and first-order propagated uncertainty."""
    if not budget.stages:
        raise InvalidArgumentError("loss budget needs at least one stage")
    t = np.array([s[1] for s in budget.stages])
    u = np.array([s[2] for s in budget.stages])
    total = float(np.prod(t))
    return total, float(total * np.sqrt(np.sum((u / t) ** 2)))
