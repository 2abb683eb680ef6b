"""Config-driven experiment runner.

A config is a JSON object naming an experiment ``kind`` plus parameter
blocks whose keys carry their units (``sigma_rad_per_ps``, ``length_mm``).
:func:`validate` collects every problem without running anything;
:func:`run` executes the experiment, writes CSV/JSON artifacts and a
``manifest.json`` listing each file with its SHA-256, the resolved
parameters, the seed and the library version.
"""

from __future__ import annotations

import hashlib
import json
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import crystal, hom, hyperhom, jsa, spectra, tofs, tomo
from ._version import __version__

KINDS = (
    "design-crystal",
    "shape-pump",
    "simulate-jsa",
    "schmidt",
    "hom-intra",
    "hom-inter",
    "hom-hyper",
    "tofs-roundtrip",
    "tomo-fit",
    "figure-repro",
)

FIGURE_TARGETS = ("four-bin-jsa", "hom-phase-dichotomy", "polarisation-hom", "poling-design")

# kinds that need a JSA source
_NEEDS_JSA = {"simulate-jsa", "schmidt", "hom-intra", "hom-inter", "hom-hyper", "tofs-roundtrip"}

# design-point defaults
_DELTA = 5.466
_SIGMA = 1.095


@dataclass(frozen=True)
class Field:
    kind: str  # "pos", "nonneg", "posint", "real", "choice", "file", "bool"
    default: object = None
    choices: tuple = ()


SCHEMA: dict[str, dict[str, Field]] = {
    "jsa": {
        "layout": Field("choice", "c4", tuple(jsa.PUMP_LAYOUTS)),
        "delta_rad_per_ps": Field("pos", _DELTA),
        "sigma_rad_per_ps": Field("pos", _SIGMA),
        "n_points": Field("posint", 256),
        "phase_shift": Field("choice", "pi", ("pi", "zero")),
        "center_wavelength_nm": Field("pos", 1582.0),
        "real_csv": Field("file"),
        "imag_csv": Field("file"),
        "dispersion_json": Field("file"),
        "pump_wavelength_nm": Field("pos"),
        "epsilon_per_mm": Field("pos", crystal.DESIGN_EPSILON_PER_MM),
        "xi_per_mm": Field("pos", 4.0 / crystal.DESIGN_LENGTH_MM),
    },
    "crystal": {
        "length_mm": Field("pos", crystal.DESIGN_LENGTH_MM),
        "poling_period_mm": Field("pos", crystal.DESIGN_POLING_PERIOD_MM),
        "epsilon_per_mm": Field("pos", crystal.DESIGN_EPSILON_PER_MM),
        "xi_per_mm": Field("pos", 4.0 / crystal.DESIGN_LENGTH_MM),
        "min_domain_mm": Field("pos", crystal.DESIGN_MIN_DOMAIN_MM),
        "n_z": Field("posint", 4001),
        "n_dk": Field("posint", 2001),
    },
    "pump": {
        "layout": Field("choice", "c4", tuple(jsa.PUMP_LAYOUTS)),
        "delta_rad_per_ps": Field("pos", _DELTA),
        "sigma_rad_per_ps": Field("pos", _SIGMA),
        "input_sigma_rad_per_ps": Field("pos", 10.0),
        "span_rad_per_ps": Field("pos", 30.0),
        "n_points": Field("posint", 2048),
        "n_pixels": Field("posint", 256),
        "max_sweeps": Field("posint", 50),
    },
    "hom": {
        "n_delays": Field("posint", 201),
        "span_sigma": Field("pos", 10.0),
        "counts_per_point": Field("posint"),
        "fit_model": Field("choice", None, hom.MODELS),
    },
    "hyperhom": {
        "phi_rad": Field("real", 0.0),
        "basis": Field("choice", "DA", hyperhom.BASES),
        "visibility": Field("nonneg", 1.0),
    },
    "tofs": {
        "n_pairs": Field("posint", 1_000_000),
        "D_ps_per_nm": Field("real", -1350.0),
        "wavelength_ref_nm": Field("pos", 1582.0),
        "jitter_fwhm_ps": Field("nonneg", tofs.JITTER_FWHM_PS),
        "bin_width_ps": Field("pos", 100.0),
        "ghost_fraction": Field("nonneg", 0.0),
    },
    "tomo": {
        "counts_csv": Field("file"),
        "state": Field("choice", "phi+", tuple(tomo.BELL_STATES)),
        "counts_per_basis": Field("pos", 1e4),
        "target": Field("choice", "phi+", tuple(tomo.BELL_STATES)),
        "mc_trials": Field("posint", 100),
    },
    "figure": {
        "target": Field("choice", None, FIGURE_TARGETS),
    },
}

_TOP_LEVEL = {"kind", "seed", "output_dir"} | set(SCHEMA)


class PipelineError(RuntimeError):
    """A module failure, tagged with the module name and the config it came from."""

    def __init__(self, module: str, config_path, message: str):
        self.module = module
        self.config_path = config_path
        where = str(config_path) if config_path else "<inline config>"
        super().__init__(f"[{module}] {where}: {message}")


class ConfigError(ValueError):
    def __init__(self, diagnostics: list[str], config_path=None):
        self.diagnostics = list(diagnostics)
        where = str(config_path) if config_path else "<inline config>"
        super().__init__(f"{where}: invalid config\n  " + "\n  ".join(self.diagnostics))


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed experiment description.

    ``blocks`` maps block name to its raw key/value dict. Relative file paths
    inside blocks are resolved against ``base_dir`` (the config's directory).
    """

    kind: str
    blocks: dict = field(default_factory=dict)
    output_dir: str | None = None
    seed: int | None = None
    config_path: str | None = None
    base_dir: str = "."

    @classmethod
    def from_dict(cls, data: dict, config_path=None) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError(["config must be a JSON object"], config_path)
        blocks = {k: v for k, v in data.items() if k not in ("kind", "seed", "output_dir")}
        base = str(Path(config_path).resolve().parent) if config_path else "."
        return cls(kind=data.get("kind"), blocks=blocks, output_dir=data.get("output_dir"),
                   seed=data.get("seed"), config_path=str(config_path) if config_path else None,
                   base_dir=base)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError([f"not valid JSON: {exc}"], path) from None
        return cls.from_dict(data, path)

    def with_overrides(self, kind=None, output_dir=None, seed=None) -> "ExperimentConfig":
        new = self
        if kind is not None:
            new = replace(new, kind=kind)
        if output_dir is not None:
            new = replace(new, output_dir=str(output_dir))
        if seed is not None:
            new = replace(new, seed=seed)
        return new

    def block(self, name: str) -> dict:
        return self.blocks.get(name) or {}

    def path(self, value) -> Path:
        p = Path(value)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def resolved(self, name: str) -> dict:
        """Block with defaults filled in (keys whose default is None are left out)."""
        raw = self.block(name)
        out = {}
        for key, f in SCHEMA[name].items():
            if key in raw:
                out[key] = raw[key]
            elif f.default is not None:
                out[key] = f.default
        return out


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------


def _jsa_source(block: dict) -> str | None:
    if "real_csv" in block:
        return "files"
    if "dispersion_json" in block:
        return "dispersion"
    if "layout" in block:
        return "ideal"
    return None


def _is_stochastic(cfg: ExperimentConfig) -> bool:
    if cfg.kind in ("tofs-roundtrip", "tomo-fit"):
        return True
    return cfg.kind in ("hom-intra", "hom-inter") and "counts_per_point" in cfg.block("hom")


def _check_field(cfg: ExperimentConfig, block: str, key: str, value, f: Field) -> str | None:
    name = f"{block}.{key}"
    if f.kind == "choice":
        return None if value in f.choices else f"{name}: {value!r} is not one of {list(f.choices)}"
    if f.kind == "file":
        if not isinstance(value, str):
            return f"{name}: expected a file path"
        p = cfg.path(value)
        return None if p.is_file() else f"{name}: input file not found: {p}"
    if f.kind == "bool":
        return None if isinstance(value, bool) else f"{name}: expected true or false"
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value):
        return f"{name}: expected a finite number, got {value!r}"
    if f.kind == "posint":
        if int(value) != value or value < 1:
            return f"{name}: must be a positive integer, got {value!r}"
    elif f.kind == "pos" and not value > 0:
        return f"{name}: must be positive, got {value!r}"
    elif f.kind == "nonneg" and not value >= 0:
        return f"{name}: must be non-negative, got {value!r}"
    return None


def validate(cfg: ExperimentConfig, require_output: bool = True) -> list[str]:
    """All schema and cross-field problems of ``cfg``; empty when it can run."""
    diags: list[str] = []
    if cfg.kind not in KINDS:
        diags.append(f"kind: {cfg.kind!r} is not one of {list(KINDS)}")
    for name in cfg.blocks:
        if name not in _TOP_LEVEL:
            diags.append(f"{name}: unknown config key")
    for name, fields in SCHEMA.items():
        raw = cfg.blocks.get(name)
        if raw is None:
            continue
        if not isinstance(raw, dict):
            diags.append(f"{name}: expected an object")
            continue
        for key, value in raw.items():
            if key not in fields:
                diags.append(f"{name}.{key}: unknown key (keys carry units, e.g. sigma_rad_per_ps)")
                continue
            msg = _check_field(cfg, name, key, value, fields[key])
            if msg:
                diags.append(msg)

    if cfg.seed is not None and (isinstance(cfg.seed, bool) or not isinstance(cfg.seed, int) or cfg.seed < 0):
        diags.append(f"seed: must be a non-negative integer, got {cfg.seed!r}")
    if cfg.kind in KINDS and cfg.seed is None and _is_stochastic(cfg):
        diags.append(f"seed: required for the stochastic experiment {cfg.kind!r}")
    if require_output and not cfg.output_dir:
        diags.append("output_dir: missing (set it in the config or pass --out)")

    block = cfg.block("jsa")
    if cfg.kind in _NEEDS_JSA and _jsa_source(block) is None:
        diags.append("missing jsa input")
    if "imag_csv" in block and "real_csv" not in block:
        diags.append("jsa.imag_csv: given without jsa.real_csv")
    if cfg.kind == "figure-repro" and "target" not in cfg.block("figure"):
        diags.append("figure.target: missing")
    if cfg.kind == "design-crystal":
        c = cfg.resolved("crystal")
        if isinstance(c.get("min_domain_mm"), (int, float)) and isinstance(c.get("poling_period_mm"), (int, float)):
            if c["min_domain_mm"] >= c["poling_period_mm"] / 2:
                diags.append("crystal.min_domain_mm: must be below half of crystal.poling_period_mm")
    return diags


# --------------------------------------------------------------------------
# output bookkeeping
# --------------------------------------------------------------------------


class _Outputs:
    def __init__(self, root: Path):
        self.root = root
        self.files: list[str] = []

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.root / name

    def json(self, name: str, obj) -> None:
        with open(self.path(name), "w") as fh:
            json.dump(_plain(obj), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def columns(self, name: str, header: list[str], cols) -> None:
        data = np.column_stack([np.asarray(c, dtype=float) for c in cols])
        np.savetxt(self.path(name), data, delimiter=",", header=",".join(header), comments="", fmt="%.17g")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@contextmanager
def _stage(module: str, cfg: ExperimentConfig):
    try:
        yield
    except PipelineError:
        raise
    except Exception as exc:  # surfaced with its origin
        raise PipelineError(module, cfg.config_path, f"{type(exc).__name__}: {exc}") from exc


@dataclass(frozen=True)
class RunResult:
    output_dir: Path
    files: tuple[str, ...]
    manifest: dict


# --------------------------------------------------------------------------
# building blocks
# --------------------------------------------------------------------------


def _build_jsa(cfg: ExperimentConfig, params: dict) -> jsa.JointSpectralAmplitude:
    b = params
    source = _jsa_source(cfg.block("jsa"))
    if source == "files":
        re_path = cfg.path(b["real_csv"])
        re, s_vals, i_vals = jsa.load_matrix_csv(re_path)
        im = np.zeros_like(re)
        if "imag_csv" in b:
            im, s2, i2 = jsa.load_matrix_csv(cfg.path(b["imag_csv"]))
            if not (np.array_equal(s2, s_vals) and np.array_equal(i2, i_vals)):
                raise ValueError("real and imaginary CSVs have different axes")
        s_axis = spectra.SpectralAxis(float(np.mean(s_vals)), s_vals)
        i_axis = spectra.SpectralAxis(float(np.mean(i_vals)), i_vals)
        state = jsa.JointSpectralAmplitude(s_axis, i_axis, re + 1j * im, {"source": re_path.name})
    elif source == "dispersion":
        model = crystal.load_dispersion(cfg.path(b["dispersion_json"]))
        state = jsa.crystal_jsa(model, float(b["epsilon_per_mm"]), float(b["xi_per_mm"]),
                                pump_wavelength_nm=b.get("pump_wavelength_nm"), kind=b["layout"],
                                n_points=int(b["n_points"]))
    else:
        center = float(spectra.wavelength_to_omega(b["center_wavelength_nm"]))
        state = jsa.ideal_jsa(b["layout"], float(b["delta_rad_per_ps"]), float(b["sigma_rad_per_ps"]),
                              int(b["n_points"]), phase_shift=b["phase_shift"], center=center)
    return state.normalized()


def _write_jsa(out: _Outputs, state: jsa.JointSpectralAmplitude, prefix: str = "") -> None:
    jsa.save_matrix_csv(out.path(f"{prefix}jsa_real.csv"), state.values.real, state.s_axis.values, state.i_axis.values)
    jsa.save_matrix_csv(out.path(f"{prefix}jsa_imag.csv"), state.values.imag, state.s_axis.values, state.i_axis.values)
    sig, idl = jsa.marginals(state)
    out.columns(f"{prefix}marginals.csv", ["signal_omega_rad_per_ps", "signal_density",
                                            "idler_omega_rad_per_ps", "idler_density"],
                [state.s_axis.values, sig, state.i_axis.values, idl])


def _bin_sigma(state: jsa.JointSpectralAmplitude, params: dict) -> float:
    return float(state.metadata.get("sigma", params.get("sigma_rad_per_ps", _SIGMA)))


def _delays(state, cfg: ExperimentConfig) -> np.ndarray:
    h = cfg.resolved("hom")
    return hom.default_delays(_bin_sigma(state, cfg.resolved("jsa")), int(h["n_delays"]), float(h["span_sigma"]))


def _noisy_fit(out: _Outputs, cfg: ExperimentConfig, trace: hom.HomTrace, model: str, rng) -> dict:
    h = cfg.resolved("hom")
    if "counts_per_point" not in h:
        return {}
    with _stage("hom", cfg):
        noisy = hom.counts_trace(trace.delays, trace.probability, int(h["counts_per_point"]), rng, kind=trace.kind)
        noisy.to_csv(out.path("hom_counts.csv"))
        fit = hom.fit_trace(noisy, h.get("fit_model", model))
        fit.save(out.path("hom_fit.json"))
    return fit.to_dict()


# --------------------------------------------------------------------------
# experiments
# --------------------------------------------------------------------------


def _design_crystal(cfg, out, rng, params):
    c = cfg.resolved("crystal")
    params["crystal"] = c
    with _stage("crystal", cfg):
        dk0 = 2.0 * np.pi / float(c["poling_period_mm"])
        target = crystal.target_nonlinearity(float(c["length_mm"]), dk0, float(c["epsilon_per_mm"]),
                                             float(c["xi_per_mm"]), int(c["n_z"]))
        pattern = crystal.synthesize_poling(target, min_domain=float(c["min_domain_mm"]))
        pattern.to_csv(out.path("poling.csv"))
        dk = crystal.design_dk_grid(target, int(c["n_dk"]))
        real = crystal.pmf_from_poling(pattern, dk)
        ideal = crystal.pmf_analytic(dk, dk0, float(c["epsilon_per_mm"]), float(c["xi_per_mm"]))
        # put both on a common scale for plotting
        scale = np.vdot(ideal, real) / np.vdot(ideal, ideal)
        out.columns("pmf.csv", ["dk_per_mm", "realized_re", "realized_im", "target_re", "target_im"],
                    [dk, real.real, real.imag, (scale * ideal).real, (scale * ideal).imag])
        out.json("crystal_summary.json", {
            "fidelity": pattern.metadata["fidelity"],
            "antinode_phase_difference_rad": crystal.antinode_phase_difference(pattern, target),
            "n_domains": pattern.n_domains,
            "min_domain_realized_mm": pattern.metadata["min_domain_realized_mm"],
        })


def _shape_pump(cfg, out, rng, params):
    p = cfg.resolved("pump")
    params["pump"] = p
    with _stage("spectra", cfg):
        span = float(p["span_rad_per_ps"])
        f = np.linspace(-span, span, int(p["n_points"]))
        inp = np.exp(-f**2 / (2.0 * float(p["input_sigma_rad_per_ps"]) ** 2))
        delta, sigma = float(p["delta_rad_per_ps"]), float(p["sigma_rad_per_ps"])
        amp = sum(np.exp(-(f - o * delta) ** 2 / (2.0 * sigma**2)) for o in jsa.PUMP_LAYOUTS[p["layout"]])
        target = np.abs(amp) ** 2
        cfg_shaper = spectra.ShaperConfig.uniform(f, inp, n_pixels=int(p["n_pixels"]))
        res = spectra.optimize_shaper(target, cfg_shaper, max_iter=int(p["max_sweeps"]), normalize=True)
        out.columns("pump_spectrum.csv", ["offset_rad_per_ps", "input", "target", "shaped"],
                    [f, inp, target * res.target_scale, spectra.shaped_spectrum(res.config)])
        edges = res.config.pixel_edges
        out.columns("pixel_angles.csv", ["pixel_lower_rad_per_ps", "pixel_upper_rad_per_ps", "angle_rad"],
                    [edges[:-1], edges[1:], res.config.pixel_angles])
        out.json("shaper_summary.json", {"residual": res.residual, "converged": res.converged,
                                         "feasible": res.feasible, "target_scale": res.target_scale,
                                         "sweeps": res.metadata["n_sweeps"]})


def _simulate_jsa(cfg, out, rng, params):
    state = _jsa_stage(cfg, params)
    _write_jsa(out, state)
    jsa.save_matrix_csv(out.path("jsi.csv"), state.intensity(), state.s_axis.values, state.i_axis.values)


def _schmidt(cfg, out, rng, params):
    state = _jsa_stage(cfg, params)
    with _stage("jsa", cfg):
        res = jsa.schmidt_decompose(state)
        res.save(out.path("schmidt.json"))
        n = min(16, res.lambdas.size)
        out.columns("schmidt_coefficients.csv", ["index", "lambda"], [np.arange(n), res.lambdas[:n]])


def _jsa_stage(cfg, params):
    b = cfg.resolved("jsa")
    params["jsa"] = b
    with _stage("jsa", cfg):
        return _build_jsa(cfg, b)


def _hom_intra(cfg, out, rng, params):
    state = _jsa_stage(cfg, params)
    params["hom"] = cfg.resolved("hom")
    with _stage("hom", cfg):
        trace = hom.intra_pair_trace(state, _delays(state, cfg))
        trace.to_csv(out.path("hom_intra.csv"))
    model = "intra-pi" if state.metadata.get("phase_shift", "pi") == "pi" else "intra-0"
    summary = {"p_at_zero_delay": float(np.interp(0.0, trace.delays, trace.probability))}
    fit = _noisy_fit(out, cfg, trace, model, rng)
    if fit:
        summary["fit"] = fit
    out.json("hom_summary.json", summary)


def _hom_inter(cfg, out, rng, params):
    state = _jsa_stage(cfg, params)
    params["hom"] = cfg.resolved("hom")
    with _stage("hom", cfg):
        herald = hom.heralded_density(state)
        trace = hom.inter_pair_trace(herald, _delays(state, cfg))
        trace.to_csv(out.path("hom_inter.csv"))
    summary = {"p_at_zero_delay": float(np.interp(0.0, trace.delays, trace.probability)),
               "heralded_purity": herald.purity}
    fit = _noisy_fit(out, cfg, trace, "inter", rng)
    if fit:
        summary["fit"] = fit
    out.json("hom_summary.json", summary)


def _hom_hyper(cfg, out, rng, params):
    state = _jsa_stage(cfg, params)
    h = cfg.resolved("hyperhom")
    params["hyperhom"] = h
    params["hom"] = cfg.resolved("hom")
    delays = _delays(state, cfg)
    at_zero = {}
    with _stage("hyperhom", cfg):
        hs = hyperhom.HyperState(float(h["phi_rad"]), state)
        for pair in hyperhom.PAIRS:
            tr = hyperhom.polarised_hom_trace(hs, h["basis"], pair, delays, visibility=float(h["visibility"]))
            tr.to_csv(out.path(f"hyperhom_{h['basis']}_{pair}.csv"))
            at_zero[pair] = float(np.interp(0.0, tr.delays, tr.probability))
    out.json("hyperhom_summary.json", {"basis": h["basis"], "phi_rad": float(h["phi_rad"]),
                                       "p_at_zero_delay": at_zero})


def _tofs_roundtrip(cfg, out, rng, params):
    state = _jsa_stage(cfg, params)
    t = cfg.resolved("tofs")
    params["tofs"] = t
    with _stage("tofs", cfg):
        spec = tofs.DispersionSpec(D=float(t["D_ps_per_nm"]), wavelength_ref=float(t["wavelength_ref_nm"]),
                                   jitter_sigma=float(t["jitter_fwhm_ps"]) / tofs.FWHM_PER_SIGMA,
                                   bin_width=float(t["bin_width_ps"]))
        seed = int(rng.integers(2**63))
        hist = tofs.simulate_tofs(state, spec, float(t["n_pairs"]), seed,
                                  ghost_fraction=float(t["ghost_fraction"]))
        hist.to_csv(out.path("tofs_histogram.csv"))
        rec = tofs.reconstruct_jsi(hist, spec)
        k_ref = jsa.schmidt_decompose(np.sqrt(state.intensity())).K
        k_rec = rec.schmidt().K if not rec.degenerate else float("nan")
        with open(out.path("reconstructed_jsi.csv"), "w") as fh:
            fh.write("signal_wavelength_nm," + ",".join(f"{v:.17g}" for v in rec.wavelength_s) + "\n")
            fh.write("idler_wavelength_nm," + ",".join(f"{v:.17g}" for v in rec.wavelength_i) + "\n")
            for row in rec.jsi:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
        out.json("tofs_summary.json", {"K_noiseless": k_ref, "K_reconstructed": k_rec,
                                       "relative_difference": (k_rec - k_ref) / k_ref,
                                       "total_counts": hist.total, "dispersion": spec.to_dict()})


def _tomo_fit(cfg, out, rng, params):
    t = cfg.resolved("tomo")
    params["tomo"] = t
    with _stage("tomo", cfg):
        if "counts_csv" in t:
            pset = tomo.ProjectionSet.from_csv(cfg.path(t["counts_csv"]))
        else:
            rho = tomo.DensityMatrix.from_ket(tomo.BELL_STATES[t["state"]])
            pset = tomo.simulate_counts(rho, float(t["counts_per_basis"]), rng)
            pset.to_csv(out.path("tomo_counts.csv"))
        res = tomo.mle_reconstruct(pset)
        res.rho.to_csv(out.path("density_matrix.csv"))
        mc_seed = int(rng.integers(2**63))
        mc = tomo.monte_carlo_metrics(pset, int(t["mc_trials"]), seed=mc_seed, target=t["target"])
        out.json("tomo_summary.json", tomo.summary(res, t["target"], mc))


def _figure_repro(cfg, out, rng, params):
    target = cfg.block("figure")["target"]
    params["figure"] = {"target": target}
    if target == "four-bin-jsa":
        b = cfg.resolved("jsa")
        if _jsa_source(cfg.block("jsa")) is None:
            b = {**b, "layout": "c4"}
        params["jsa"] = b
        with _stage("jsa", cfg):
            state = _build_jsa(cfg, b)
            _write_jsa(out, state)
            jsa.schmidt_decompose(state).save(out.path("schmidt.json"))
    elif target == "hom-phase-dichotomy":
        b = cfg.resolved("jsa")
        params["jsa"] = b
        h = cfg.resolved("hom")
        params["hom"] = h
        delta, sigma, n = float(b["delta_rad_per_ps"]), float(b["sigma_rad_per_ps"]), int(b["n_points"])
        d = hom.default_delays(sigma, int(h["n_delays"]), float(h["span_sigma"]))
        with _stage("hom", cfg):
            cols = [d]
            for shift in ("pi", "zero"):
                state = jsa.ideal_jsa("c4", delta, sigma, n, phase_shift=shift).normalized()
                cols.append(hom.intra_pair_trace(state, d).probability)
                cols.append(hom.intra_fit_model(d, sigma, delta, 1.0, phase_shift=shift))
            out.columns("hom_phase_dichotomy.csv",
                        ["delay_ps", "pi_numeric", "pi_closed_form", "zero_numeric", "zero_closed_form"], cols)
    elif target == "polarisation-hom":
        b = cfg.resolved("jsa")
        params["jsa"] = b
        h = cfg.resolved("hom")
        params["hom"] = h
        sigma = float(b["sigma_rad_per_ps"])
        d = hom.default_delays(sigma, int(h["n_delays"]), float(h["span_sigma"]))
        with _stage("hyperhom", cfg):
            state = jsa.ideal_jsa("c4", float(b["delta_rad_per_ps"]), sigma, int(b["n_points"])).normalized()
            for label, phi in (("phi0", 0.0), ("phipi", np.pi)):
                hs = hyperhom.HyperState(phi, state)
                for basis in hyperhom.BASES:
                    cols, names = [d], ["delay_ps"]
                    for pair in hyperhom.PAIRS:
                        cols.append(hyperhom.polarised_hom_trace(hs, basis, pair, d).probability)
                        names.append(pair)
                    out.columns(f"polarisation_hom_{label}_{basis}.csv", names, cols)
    elif target == "poling-design":
        _design_crystal(cfg, out, rng, params)


_RUNNERS = {
    "design-crystal": _design_crystal,
    "shape-pump": _shape_pump,
    "simulate-jsa": _simulate_jsa,
    "schmidt": _schmidt,
    "hom-intra": _hom_intra,
    "hom-inter": _hom_inter,
    "hom-hyper": _hom_hyper,
    "tofs-roundtrip": _tofs_roundtrip,
    "tomo-fit": _tomo_fit,
    "figure-repro": _figure_repro,
}


def run(cfg: ExperimentConfig) -> RunResult:
    """Validate and execute ``cfg``; returns the output directory, files and manifest.

    Raises
    ------
    ConfigError
        If validation reports any problem (nothing is written).
    PipelineError
        If a module fails; the message names the module and the config path.
    """
    diags = validate(cfg)
    if diags:
        raise ConfigError(diags, cfg.config_path)
    root = Path(cfg.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    out = _Outputs(root)
    rng = np.random.default_rng(cfg.seed if cfg.seed is not None else 0)
    params: dict = {}
    _RUNNERS[cfg.kind](cfg, out, rng, params)
    files = sorted(set(out.files))
    manifest = {
        "kind": cfg.kind,
        "seed": cfg.seed,
        "library": "hyperspdc",
        "version": __version__,
        "parameters": _plain(params),
        "files": [{"path": name, "sha256": _sha256(root / name)} for name in files],
    }
    with open(root / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return RunResult(root, tuple(files), manifest)
