"""Scenario configuration, built-in presets and the run pipeline.

A scenario is a JSON document whose keys carry their units (``*_ghz``,
``*_ps``, ``*_hz``). :func:`load_config` validates a document into a
:class:`ScenarioConfig`; :func:`run_scenario` executes it and writes CSV
histograms and curves plus a JSON report with a provenance block.

Pipeline for memory scenarios: source profile, temporal gate, optional etalon,
memory solve (with optional inhomogeneous Monte Carlo), counting synthesis of
the three settings, Gaussian-fit analysis.
"""
import copy
import hashlib
import json
import platform
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from . import constants as C
from .analysis import memory_report, window_sweep
from .counting import (
    ArrivalHistogram,
    Blinking,
    DetectorModel,
    SourceModel,
    default_noise_curve,
    extract_g2,
    noise_vs_detuning,
    predict_g2_out,
    sample_arrival_times,
    synthesize_hbt,
    write_histogram,
)
from .errors import ConfigError
from .memory import (
    ControlPulse,
    MemoryParams,
    detuning_scan,
    input_signal,
    lifetime_sweep,
    solve_retrieval,
    solve_storage,
)
from .photonics import (
    EtalonSpec,
    InhomogeneousModel,
    LossBudget,
    REFERENCE_LOSS_STAGES,
    TemporalProfile,
    apply_temporal_gate,
    broadened_transmission,
    compose_loss_budget,
    etalon_power,
    optimal_gate_delay,
    readin_scan,
)

KINDS = ("memory", "window_sweep", "lifetime", "detuning", "lossbudget", "g2hbt")
PLACEMENTS = ("none", "before", "after")
# read-in peak Rabi frequency giving 49.3 % on the default grid
OMEGA_CALIBRATED = 10885857845.691542
# detected input rate for the etalon-after configuration
REFERENCE_INPUT_RATE = 203.4
# quoted noise photons per pulse are counted in this output window
NOISE_REFERENCE_WINDOW = 500e-12


@dataclass
class ScenarioConfig:
    name: str
    kind: str
    description: str
    seed: int
    params: MemoryParams
    control: ControlPulse
    readout_scale: float
    storage_time: float
    signal_fwhm: float
    grid_points: int
    velocity_classes: int
    time_steps: int
    source: SourceModel
    gate: TemporalProfile | None
    gate_floor_db: float
    etalon: EtalonSpec | None
    placement: str
    line: InhomogeneousModel | None
    mc_samples: int
    detector: DetectorModel
    loss: LossBudget
    acquisition_time: float
    window: float
    windows: tuple
    storage_times: tuple
    scan_detunings: tuple
    g2_in: float
    document: dict


# --- presets --------------------------------------------------------------------------

def _base(name, description, kind="memory"):
    return {
        "scenario": name,
        "kind": kind,
        "description": description,
        "seed": 1,
        "constants": {
            "atomic_mass_kg": C.MASS_RB87,
            "gamma_e_hwhm_mhz": C.GAMMA_E_RB_D2 / (2 * np.pi) / 1e6,
            "gamma_s_hwhm_mhz": C.GAMMA_S_RB_4D52 / (2 * np.pi) / 1e6,
        },
        "memory": {
            "optical_depth": C.OPTICAL_DEPTH,
            "control_detuning_ghz": C.CONTROL_DETUNING / (2 * np.pi) / 1e9,
            "temperature_c": C.CELL_TEMPERATURE - 273.15,
            "cell_length_cm": C.CELL_LENGTH * 100,
            "signal_wavelength_nm": C.SIGNAL_WAVELENGTH * 1e9,
            "control_wavelength_nm": C.CONTROL_WAVELENGTH * 1e9,
            "counter_propagating": True,
        },
        "control": {
            "peak_rabi_rad_per_s": OMEGA_CALIBRATED,
            "spectral_fwhm_ghz": 1.0,
            "calibrated": True,
            "readout_energy_scale": 10.0,
            "storage_time_ps": 800.0,
        },
        "signal": {"fwhm_ps": 300.0},
        "grid": {"grid_points": 64, "velocity_classes": 64, "time_steps": 4000},
        "source": {
            "rep_rate_mhz": C.REP_RATE / 1e6,
            "mean_photons_per_pulse": None,
            "g2_zero": 0.306,
            "blinking": None,
            "decay_time_ps": 850.0,
        },
        "gate": {"fwhm_ps": 300.0, "floor_db": -20.0},
        "etalon": {"placement": "after", "fwhm_ghz": 1.12, "peak_transmission": 0.85,
                   "center_detuning_ghz": 0.0},
        "inhomogeneous": None,
        "detector": {"efficiency": 0.80, "dark_rate_hz": 0.0, "jitter_fwhm_ps": 70.0},
        "loss_budget": [{"stage": s, "transmission": t, "uncertainty": u}
                        for s, t, u in REFERENCE_LOSS_STAGES],
        "acquisition": {"time_s": 600.0, "window_ps": 500.0, "windows_ps": None},
        "analysis": {"g2_in": 0.325},
    }


def _broad(doc, placement):
    doc["etalon"]["placement"] = placement
    doc["inhomogeneous"] = {"fwhm_ghz": 12.4, "homogeneous_linewidth_mhz": 200.0,
                            "samples": 10000}
    return doc


def _presets():
    p = {}
    p["fig3"] = _base("fig3", "Storage of QD photons with the etalon after the memory; "
                              "narrow-line read-in calibrated to 49.3 %")
    p["figS4a"] = _broad(_base("figS4a", "No spectral filter; 12.4 GHz inhomogeneous QD line"),
                         "none")
    p["figS4b"] = _broad(_base("figS4b", "Etalon before the memory; 12.4 GHz QD line"), "before")
    p["figS4c"] = _broad(_base("figS4c", "Etalon after the memory; 12.4 GHz QD line"), "after")
    s5 = _base("figS5", "Integration-window sweep of SNR, count rate and predicted g2", "window_sweep")
    s5["acquisition"]["windows_ps"] = [100.0 * k for k in range(1, 21)]
    p["figS5"] = s5
    lt = _base("lifetime", "Total efficiency against storage time with a Gaussian 1/e fit",
               "lifetime")
    lt["control"]["readout_energy_scale"] = 1.0
    lt["lifetime"] = {"storage_times_ps": [800.0, 1200.0, 1600.0, 2000.0, 2500.0, 3000.0]}
    p["lifetime"] = lt
    dt = _base("detuning", "Read-in efficiency against signal detuning (61 points, +/-15 GHz)",
               "detuning")
    dt["detuning"] = {"signal_detunings_ghz": list(np.round(np.linspace(-15, 15, 61), 6))}
    p["detuning"] = dt
    p["lossbudget"] = _base("lossbudget", "Composed transmission of the optical loss stages",
                            "lossbudget")
    g = _base("g2hbt", "HBT g2(0) of a blinking QD-like source and the predicted output g2",
              "g2hbt")
    g["source"]["mean_photons_per_pulse"] = 0.0025
    g["source"]["blinking"] = {"duty": round(0.306 / 0.325, 6), "correlation_time_ns": 1000.0}
    g["acquisition"]["time_s"] = 10.0
    p["g2hbt"] = g
    return p


PRESETS = _presets()


def list_presets():
    """Names and descriptions of the built-in presets."""
    return [(name, doc["description"]) for name, doc in PRESETS.items()]


def preset_document(name):
    if name not in PRESETS:
        raise ConfigError("scenario", f"unknown preset {name!r}")
    return copy.deepcopy(PRESETS[name])


# --- validation --------------------------------------------------------------------------

def _get(doc, path, kind=float, optional=False):
    node = doc
    for key in path.split("."):
        if not isinstance(node, dict) or key not in node:
            raise ConfigError(path, "missing")
        node = node[key]
    if node is None:
        if optional:
            return None
        raise ConfigError(path, "must not be null")
    if kind is float:
        if isinstance(node, bool) or not isinstance(node, (int, float)) or not np.isfinite(node):
            raise ConfigError(path, f"expected a number, got {node!r}")
        return float(node)
    if kind is int:
        if isinstance(node, bool) or not isinstance(node, int):
            raise ConfigError(path, f"expected an integer, got {node!r}")
        return node
    if not isinstance(node, kind):
        raise ConfigError(path, f"expected {kind.__name__}, got {type(node).__name__}")
    return node


def _build(path, factory, *args, **kwargs):
    # sub-objects validate their own invariants; name the config field on failure
    try:
        return factory(*args, **kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(path, str(exc)) from exc


def _default_mu(doc):
    """Mean photons per pulse giving the reference detected input rate in the
    narrow-line etalon-after configuration."""
    gate = TemporalProfile.gaussian(300e-12)
    _, gate_eff = optimal_gate_delay(TemporalProfile.exponential(850e-12), gate)
    loss, _ = compose_loss_budget(LossBudget(REFERENCE_LOSS_STAGES))
    return REFERENCE_INPUT_RATE / (C.REP_RATE * gate_eff * loss * 0.80 * 0.85)


def load_config(doc):
    """Validate a scenario document into a :class:`ScenarioConfig`."""
    if not isinstance(doc, dict):
        raise ConfigError("document", "expected a JSON object")
    name = _get(doc, "scenario", str)
    kind = _get(doc, "kind", str)
    if kind not in KINDS:
        raise ConfigError("kind", f"must be one of {KINDS}")
    seed = _get(doc, "seed", int)
    if seed < 0:
        raise ConfigError("seed", "must be non-negative")

    params = _build("memory", MemoryParams,
                    optical_depth=_get(doc, "memory.optical_depth"),
                    detuning=2 * np.pi * 1e9 * _get(doc, "memory.control_detuning_ghz"),
                    gamma_e=2 * np.pi * 1e6 * _get(doc, "constants.gamma_e_hwhm_mhz"),
                    gamma_s=2 * np.pi * 1e6 * _get(doc, "constants.gamma_s_hwhm_mhz"),
                    signal_wavelength=1e-9 * _get(doc, "memory.signal_wavelength_nm"),
                    control_wavelength=1e-9 * _get(doc, "memory.control_wavelength_nm"),
                    counter_propagating=_get(doc, "memory.counter_propagating", bool),
                    temperature=_get(doc, "memory.temperature_c") + 273.15,
                    atomic_mass=_get(doc, "constants.atomic_mass_kg"),
                    cell_length=0.01 * _get(doc, "memory.cell_length_cm"))
    rabi = _get(doc, "control.peak_rabi_rad_per_s")
    if not rabi > 0:
        raise ConfigError("control.peak_rabi_rad_per_s", "must be positive")
    control = _build("control", ControlPulse, rabi,
                     spectral_fwhm=1e9 * _get(doc, "control.spectral_fwhm_ghz"),
                     calibrated=_get(doc, "control.calibrated", bool))
    readout_scale = _get(doc, "control.readout_energy_scale")
    storage_time = 1e-12 * _get(doc, "control.storage_time_ps")
    if not readout_scale > 0:
        raise ConfigError("control.readout_energy_scale", "must be positive")
    if not storage_time >= 0:
        raise ConfigError("control.storage_time_ps", "must be non-negative")
    signal_fwhm = 1e-12 * _get(doc, "signal.fwhm_ps")
    if not signal_fwhm > 0:
        raise ConfigError("signal.fwhm_ps", "must be positive")
    grid = {k: _get(doc, f"grid.{k}", int) for k in ("grid_points", "velocity_classes", "time_steps")}
    for k, lo in (("grid_points", 8), ("velocity_classes", 1), ("time_steps", 100)):
        if grid[k] < lo:
            raise ConfigError(f"grid.{k}", f"must be at least {lo}")

    mu = _get(doc, "source.mean_photons_per_pulse", optional=True)
    if mu is None:
        mu = _default_mu(doc)
    blink_doc = _get(doc, "source.blinking", dict, optional=True)
    blinking = None
    if blink_doc is not None:
        blinking = _build("source.blinking", Blinking, _get(doc, "source.blinking.duty"),
                          1e-9 * _get(doc, "source.blinking.correlation_time_ns"))
    profile = _build("source.decay_time_ps", TemporalProfile.exponential,
                     1e-12 * _get(doc, "source.decay_time_ps"), 2e-9)
    source = _build("source", SourceModel, 1e6 * _get(doc, "source.rep_rate_mhz"), mu,
                    _get(doc, "source.g2_zero"), blinking, profile)

    gate = None
    floor_db = -20.0
    if _get(doc, "gate", dict, optional=True) is not None:
        gate = _build("gate.fwhm_ps", TemporalProfile.gaussian, 1e-12 * _get(doc, "gate.fwhm_ps"))
        floor_db = _get(doc, "gate.floor_db")
        if floor_db > 0:
            raise ConfigError("gate.floor_db", "extinction floor must be <= 0 dB")
    placement = _get(doc, "etalon.placement", str)
    if placement not in PLACEMENTS:
        raise ConfigError("etalon.placement", f"must be one of {PLACEMENTS}")
    etalon = None
    if placement != "none":
        etalon = _build("etalon", EtalonSpec, 1e9 * _get(doc, "etalon.fwhm_ghz"),
                        _get(doc, "etalon.peak_transmission"),
                        1e9 * _get(doc, "etalon.center_detuning_ghz"))
    line, samples = None, 0
    if _get(doc, "inhomogeneous", dict, optional=True) is not None:
        line = _build("inhomogeneous", InhomogeneousModel,
                      1e9 * _get(doc, "inhomogeneous.fwhm_ghz"),
                      1e6 * _get(doc, "inhomogeneous.homogeneous_linewidth_mhz"))
        samples = _get(doc, "inhomogeneous.samples", int)
        if samples < 1000:
            raise ConfigError("inhomogeneous.samples", "need at least 1000 samples")
    detector = _build("detector", DetectorModel, _get(doc, "detector.efficiency"),
                      _get(doc, "detector.dark_rate_hz"), 1e-12 * _get(doc, "detector.jitter_fwhm_ps"))
    stages = _get(doc, "loss_budget", list)
    try:
        loss = LossBudget([(s["stage"], float(s["transmission"]), float(s["uncertainty"]))
                           for s in stages])
    except (KeyError, TypeError) as exc:
        raise ConfigError("loss_budget", f"malformed stage: {exc}") from exc
    except ValueError as exc:
        raise ConfigError("loss_budget", str(exc)) from exc

    acq = _get(doc, "acquisition.time_s")
    window = 1e-12 * _get(doc, "acquisition.window_ps")
    if not acq > 0:
        raise ConfigError("acquisition.time_s", "must be positive")
    if not window > 0:
        raise ConfigError("acquisition.window_ps", "must be positive")
    windows = _get(doc, "acquisition.windows_ps", list, optional=True) or []
    windows = tuple(1e-12 * float(w) for w in windows)
    if kind == "window_sweep" and (not windows or any(np.diff(windows) <= 0)):
        raise ConfigError("acquisition.windows_ps", "need an ascending list of windows")
    storage_times = ()
    if kind == "lifetime":
        storage_times = tuple(1e-12 * float(t) for t in _get(doc, "lifetime.storage_times_ps", list))
        if len(storage_times) < 4 or any(np.diff(storage_times) <= 0):
            raise ConfigError("lifetime.storage_times_ps", "need at least 4 ascending times")
    scan = ()
    if kind == "detuning":
        scan = tuple(1e9 * float(d) for d in _get(doc, "detuning.signal_detunings_ghz", list))
        if len(scan) < 3 or any(np.diff(scan) <= 0):
            raise ConfigError("detuning.signal_detunings_ghz", "need at least 3 ascending detunings")
    g2_in = _get(doc, "analysis.g2_in")
    if g2_in < 0:
        raise ConfigError("analysis.g2_in", "must be non-negative")
    if kind in ("memory", "window_sweep", "detuning") and line is not None and not control.calibrated:
        raise ConfigError("control.calibrated", "the Monte Carlo needs a calibrated control")

    return ScenarioConfig(
        name=name, kind=kind, description=str(doc.get("description", "")), seed=seed,
        params=params, control=control, readout_scale=readout_scale, storage_time=storage_time,
        signal_fwhm=signal_fwhm, grid_points=grid["grid_points"],
        velocity_classes=grid["velocity_classes"], time_steps=grid["time_steps"], source=source,
        gate=gate, gate_floor_db=floor_db, etalon=etalon, placement=placement, line=line,
        mc_samples=samples, detector=detector, loss=loss, acquisition_time=acq, window=window,
        windows=windows, storage_times=storage_times, scan_detunings=scan, g2_in=g2_in,
        document=copy.deepcopy(doc))


def apply_overrides(doc, seed=None, grid_points=None, velocity_classes=None):
    doc = copy.deepcopy(doc)
    if seed is not None:
        doc["seed"] = seed
    if grid_points is not None:
        doc.setdefault("grid", {})["grid_points"] = grid_points
    if velocity_classes is not None:
        doc.setdefault("grid", {})["velocity_classes"] = velocity_classes
    return doc


# --- pipeline ---------------------------------------------------------------------------------

def _canonical(doc):
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def provenance(cfg):
    import numba
    import scipy

    return {
        "config_sha256": hashlib.sha256(_canonical(cfg.document).encode()).hexdigest(),
        "seed": cfg.seed,
        "versions": {"orcasim": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__,
                     "numba": numba.__version__},
    }


def _rng(seed, stream):
    return np.random.Generator(np.random.Philox(key=[seed, stream]))


def _memory_solution(cfg):
    """Narrow-line read-in and total efficiency from the ladder solver."""
    quad = cfg.params.quadrature(cfg.velocity_classes)
    signal = input_signal(cfg.control, cfg.signal_fwhm, cfg.time_steps)
    out, coh = solve_storage(cfg.params, signal, cfg.control, quad, cfg.grid_points)
    ret = solve_retrieval(cfg.params, coh, cfg.control.scaled(cfg.readout_scale), cfg.storage_time,
                          quad, n_steps=cfg.time_steps)
    return signal, quad, out.eta_in, ret.retrieved_fraction


def _inhomogeneous_readin(cfg, signal, quad):
    """Mean read-in over emitter frequencies; with an etalon in the path the
    photons reaching the memory or detector are weighted by its transmission."""
    scan = readin_scan(cfg.params, signal, cfg.control, quad, cfg.grid_points)
    x = cfg.line.sample(cfg.mc_samples, _rng(cfg.seed, 1))
    eta = scan.interpolate(x)
    w = np.ones_like(x) if cfg.etalon is None else etalon_power(cfg.etalon, x)
    mean = float(np.sum(w * eta) / np.sum(w))
    n_eff = np.sum(w) ** 2 / np.sum(w**2)
    err = float(np.sqrt(np.sum(w * (eta - mean) ** 2) / np.sum(w) / n_eff))
    return scan, mean, err


def _histogram(setting, components, flat_rate, cfg, stream):
    rng = _rng(cfg.seed, stream)
    period = cfg.source.period
    n_bins = int(np.floor(period / C.TDC_BIN + 1e-9))
    span = n_bins * C.TDC_BIN
    t = [rng.random(rng.poisson(flat_rate * cfg.acquisition_time)) * period]
    for rate, profile, shift in components:
        n = rng.poisson(rate * cfg.acquisition_time)
        t.append(sample_arrival_times(profile, n, rng, cfg.detector.jitter_sigma) + shift)
    t = np.mod(np.concatenate(t), period)
    counts, _ = np.histogram(t[t < span], bins=n_bins, range=(0.0, span))
    return ArrivalHistogram(counts, C.TDC_BIN, cfg.acquisition_time, setting, cfg.seed)


def _memory_pipeline(cfg, out_dir):
    src = cfg.source
    profile = src.profile
    gate_eff = 1.0
    if cfg.gate is not None:
        delay, _ = optimal_gate_delay(profile, cfg.gate, floor_db=cfg.gate_floor_db)
        profile, gate_eff = apply_temporal_gate(profile, cfg.gate, delay, cfg.gate_floor_db)
    loss, loss_err = compose_loss_budget(cfg.loss)
    if cfg.etalon is None:
        filt = 1.0
    elif cfg.line is None:
        filt = float(etalon_power(cfg.etalon, 0.0))
    else:
        filt = broadened_transmission(cfg.line, cfg.etalon)

    signal, quad, eta_in0, eta_tot0 = _memory_solution(cfg)
    result = {"narrow_line": {"eta_in": eta_in0, "eta_tot": eta_tot0}}
    eta_in, eta_tot = eta_in0, eta_tot0
    if cfg.line is not None:
        scan, eta_in, eta_in_err = _inhomogeneous_readin(cfg, signal, quad)
        # retrieval of a stored spin wave does not depend on the emitter frequency
        eta_tot = eta_in * eta_tot0 / eta_in0
        result["inhomogeneous"] = {"eta_in": eta_in, "eta_in_stderr": eta_in_err,
                                   "eta_tot": eta_tot, "samples": cfg.mc_samples,
                                   "scan_fwhm_hz": scan.fwhm()}
        np.savetxt(out_dir / "readin_scan.csv", np.column_stack([scan.detunings, scan.eta_in]),
                   delimiter=",", header="detuning_hz,eta_in", comments="", fmt="%.10e")

    input_rate = src.rep_rate * src.mean_photons_per_pulse * gate_eff * loss * filt * \
        cfg.detector.efficiency
    # noise photons are filtered only by an etalon placed after the memory
    noise_pp = noise_vs_detuning(default_noise_curve(cfg.placement == "after"),
                                 cfg.params.detuning / (2 * np.pi))
    flat_rate = noise_pp * src.rep_rate * src.period / NOISE_REFERENCE_WINDOW + cfg.detector.dark_rate
    hists = {
        "signal": _histogram("signal", [(input_rate, profile, 0.0)], flat_rate, cfg, 2),
        "memory": _histogram("memory", [(input_rate * (1 - eta_in), profile, 0.0),
                                        (input_rate * eta_tot, profile, cfg.storage_time)],
                             flat_rate, cfg, 3),
        "noise": _histogram("noise", [], flat_rate, cfg, 4),
    }
    for name, h in hists.items():
        write_histogram(h, out_dir / f"histogram_{name}.csv")
    result["pipeline"] = {
        "gate_efficiency": gate_eff, "loss_budget": loss, "loss_budget_err": loss_err,
        "filter_transmission": filt, "detected_input_rate_hz": input_rate,
        "noise_photons_per_pulse": noise_pp, "flat_background_rate_hz": flat_rate,
        "etalon_placement": cfg.placement,
    }
    if cfg.kind == "window_sweep":
        sweep = window_sweep(hists["signal"], hists["memory"], hists["noise"], cfg.windows, cfg.g2_in)
        sweep.to_csv(out_dir / "window_sweep.csv")
        result["window_sweep"] = sweep.to_dict()
    else:
        rep = memory_report(hists["signal"], hists["memory"], hists["noise"], cfg.window)
        result["report"] = rep.to_dict()
        result["report"]["g2_out_pred"] = predict_g2_out(cfg.g2_in, rep.snr)
    return result


def _lifetime(cfg, out_dir):
    quad = cfg.params.quadrature(cfg.velocity_classes)
    signal = input_signal(cfg.control, cfg.signal_fwhm, cfg.time_steps)
    res = lifetime_sweep(cfg.params, signal, cfg.control, cfg.storage_times, cfg.readout_scale,
                         quad, cfg.grid_points)
    np.savetxt(out_dir / "lifetime.csv", np.column_stack([res.storage_times, res.efficiencies]),
               delimiter=",", header="storage_time_s,eta_tot", comments="", fmt="%.10e")
    return {"lifetime_s": res.lifetime, "eta0": res.eta0, "eta_in": res.eta_in,
            "storage_times_s": res.storage_times.tolist(), "eta_tot": res.efficiencies.tolist(),
            "fit_residual_norm": res.residual_norm}


def _detuning(cfg, out_dir):
    quad = cfg.params.quadrature(cfg.velocity_classes)
    signal = input_signal(cfg.control, cfg.signal_fwhm, cfg.time_steps)
    scan = detuning_scan(cfg.params, signal, cfg.control, cfg.scan_detunings, quad, cfg.grid_points)
    np.savetxt(out_dir / "detuning_scan.csv", np.column_stack([scan.detunings, scan.eta_in]),
               delimiter=",", header="detuning_hz,eta_in", comments="", fmt="%.10e")
    return {"fwhm_hz": scan.fwhm(), "detunings_hz": scan.detunings.tolist(),
            "eta_in": scan.eta_in.tolist()}


def _lossbudget(cfg, out_dir):
    total, unc = compose_loss_budget(cfg.loss)
    return {"total": total, "uncertainty": unc,
            "stages": [{"stage": s, "transmission": t, "uncertainty": u} for s, t, u in cfg.loss.stages]}


def _g2hbt(cfg, out_dir):
    det = cfg.detector
    hist = synthesize_hbt(cfg.source, (det, det), cfg.acquisition_time, cfg.seed)
    write_histogram(hist, out_dir / "coincidences.csv")
    g = extract_g2(hist)
    return {"g2_configured": cfg.source.g2_zero, "g2": g.g2, "g2_stderr": g.stderr,
            "zero_area": g.zero_area, "far_mean": g.far_mean, "n_far": g.n_far,
            "g2_out_pred_at_snr_18_2": predict_g2_out(g.g2, 18.2)}


_RUNNERS = {"memory": _memory_pipeline, "window_sweep": _memory_pipeline, "lifetime": _lifetime,
            "detuning": _detuning, "lossbudget": _lossbudget, "g2hbt": _g2hbt}


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, float) and not np.isfinite(x):
        return None
    return x


def run_scenario(cfg, out_dir):
    """Run ``cfg`` and write its files into ``out_dir``; returns the report dict."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        result = _RUNNERS[cfg.kind](cfg, out_dir)
    except Exception as exc:
        # keep the module's exception type, prefix the scenario for context
        if exc.args and isinstance(exc.args[0], str):
            exc.args = (f"scenario {cfg.name!r}: {exc.args[0]}",) + exc.args[1:]
        raise
    report = _jsonable({"scenario": cfg.name, "kind": cfg.kind, "description": cfg.description,
                        "results": result, "provenance": provenance(cfg), "config": cfg.document})
    (out_dir / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report

