"""Hong-Ou-Mandel coincidence traces for frequency-bin photon pairs.

Delays are in ps and frequencies in rad/ps. The traces are the discretised
double integrals over the two-photon spectrum; closed-form models for the
Gaussian four-bin state are provided for fitting.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .jsa import JointSpectralAmplitude
from .spectra import SpectralAxis

INTRA_MODELS = ("intra-pi", "intra-0", "intra-exact")
MODELS = INTRA_MODELS + ("inter",)


class FitError(RuntimeError):
    """The trace fit did not converge; ``best`` holds the last parameters."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True, eq=False)
class HomTrace:
    delays: np.ndarray
    probability: np.ndarray
    kind: str = "intra"
    counts: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        d = np.array(self.delays, dtype=float)
        p = np.array(self.probability, dtype=float)
        if d.shape != p.shape or d.ndim != 1:
            raise ValueError("delays and probability must be 1-D arrays of equal length")
        object.__setattr__(self, "delays", d)
        object.__setattr__(self, "probability", p)
        if self.counts is not None:
            c = np.array(self.counts, dtype=float)
            if c.shape != d.shape:
                raise ValueError("counts must match the delay grid")
            object.__setattr__(self, "counts", c)

    def to_csv(self, path) -> None:
        cols = [self.delays, self.probability]
        header = "delay_ps,probability"
        if self.counts is not None:
            cols.append(self.counts)
            header += ",counts"
        np.savetxt(path, np.column_stack(cols), delimiter=",", header=header, comments="", fmt="%.17g")

    @classmethod
    def from_csv(cls, path, kind: str = "intra") -> "HomTrace":
        with open(path) as fh:
            header = fh.readline().strip().split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        counts = data[:, header.index("counts")] if "counts" in header else None
        prob = data[:, header.index("probability")] if "probability" in header else np.full(data.shape[0], np.nan)
        return cls(data[:, 0], prob, kind, counts)


def default_delays(sigma: float, n: int = 201, span: float = 10.0) -> np.ndarray:
    """Delay grid of ``n`` points over +- span / sigma."""
    return np.linspace(-span / sigma, span / sigma, n)


def _phase_sum(G: np.ndarray, omega: np.ndarray, delays: np.ndarray, weight: float) -> np.ndarray:
    """sum_jk G_jk exp(i (w_k - w_j) tau) * weight for every tau (complex)."""
    w = omega - omega.mean()
    E = np.exp(1j * np.outer(w, delays))
    return np.sum(np.conj(E) * (G @ E), axis=0) * weight


def _clamp(p: np.ndarray) -> np.ndarray:
    # only numerical overshoot is clamped
    over = (p < 0) & (p > -1e-9) | (p > 1) & (p < 1 + 1e-9)
    return np.where(over, np.clip(p, 0.0, 1.0), p)


def exchange_overlap(jsa: JointSpectralAmplitude) -> complex:
    """S = integral of f*(ws, wi) f(wi, ws); p(0) = (1 - Re S) / 2."""
    if not jsa.is_square:
        raise ValueError("exchange overlap needs identical signal and idler axes")
    return complex(np.vdot(jsa.values, jsa.values.T) * jsa.cell)


def exchange_overlap_trace(jsa: JointSpectralAmplitude, delays) -> np.ndarray:
    """S(tau) = sum f*(ws, wi) f(wi, ws) exp(i (wi - ws) tau) dws dwi, complex."""
    if not jsa.is_square:
        raise ValueError("exchange overlap needs identical signal and idler axes")
    F = jsa.values
    return _phase_sum(np.conj(F) * F.T, jsa.s_axis.values, np.asarray(delays, dtype=float), jsa.cell)


def intra_pair_trace(jsa: JointSpectralAmplitude, delays) -> HomTrace:
    """Coincidence probability of the two photons of one pair at a balanced splitter.

    p(tau) = 1/2 - 1/2 Re sum f*(ws, wi) f(wi, ws) exp(i (wi - ws) tau) dws dwi
    """
    if not jsa.is_square:
        raise ValueError("intra-pair interference needs identical signal and idler axes")
    delays = np.asarray(delays, dtype=float)
    p = 0.5 - 0.5 * np.real(exchange_overlap_trace(jsa, delays))
    return HomTrace(delays, _clamp(p), "intra")


@dataclass(frozen=True, eq=False)
class HeraldedState:
    """Reduced spectral density matrix of the heralded signal photon."""

    axis: SpectralAxis
    rho: np.ndarray

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.rho)) * self.axis.spacing)

    @property
    def purity(self) -> float:
        return float(np.sum(np.abs(self.rho) ** 2) * self.axis.spacing**2)


def heralded_density(jsa: JointSpectralAmplitude) -> HeraldedState:
    """rho_s(ws, ws') = integral f(ws, wi) f*(ws', wi) dwi."""
    F = jsa.values
    rho = (F @ F.conj().T) * jsa.i_axis.spacing
    return HeraldedState(jsa.s_axis, rho)


def inter_pair_trace(state: HeraldedState, delays) -> HomTrace:
    """Heralded two-source interference of two identical signal photons.

    p_H(tau) = 1/2 - 1/2 Re sum rho(w, w') rho(w', w) exp(i (w' - w) tau) dw dw'
    """
    rho = np.asarray(state.rho)
    scale = max(float(np.max(np.abs(rho))), 1e-300)
    if np.max(np.abs(rho - rho.conj().T)) > 1e-8 * scale:
        raise ValueError("density matrix is not Hermitian")
    delays = np.asarray(delays, dtype=float)
    G = rho * rho.T
    p = 0.5 - 0.5 * np.real(_phase_sum(G, state.axis.values, delays, state.axis.spacing**2))
    return HomTrace(delays, _clamp(p), "inter-heralded", metadata={"purity": state.purity})


# --------------------------------------------------------------------------
# closed forms
# --------------------------------------------------------------------------


def intra_fit_model(tau, sigma, delta, V=1.0, phase_shift: str = "pi"):
    """Well-separated-bin intra-pair trace; 'pi' peaks at zero delay, 'zero' dips."""
    tau = np.asarray(tau, dtype=float)
    sign = {"pi": 1.0, "zero": -1.0}[phase_shift]
    return 0.5 + sign * 0.5 * V * np.exp(-(sigma**2) * tau**2 / 4) * np.cos(delta * tau)


def intra_exact_model(tau, sigma, delta, V=1.0):
    """Intra-pair trace including the overlap eta = exp(-delta^2/sigma^2) of the two lobes."""
    tau = np.asarray(tau, dtype=float)
    eta = np.exp(-(delta**2) / sigma**2)
    return 0.5 + 0.5 * V * np.exp(-(sigma**2) * tau**2 / 4) * (np.cos(delta * tau) - eta) / (1 - eta)


def inter_fit_model(tau, sigma, delta, V=1.0):
    """Heralded inter-pair trace of the four-bin state; beats at 2 delta."""
    tau = np.asarray(tau, dtype=float)
    return 0.5 - (V / 16.0) * np.exp(-(sigma**2) * tau**2 / 4) * (3 + np.cos(2 * delta * tau))


def model_probability(model: str, tau, sigma, delta, V=1.0):
    if model == "intra-pi":
        return intra_fit_model(tau, sigma, delta, V, "pi")
    if model == "intra-0":
        return intra_fit_model(tau, sigma, delta, V, "zero")
    if model == "intra-exact":
        return intra_exact_model(tau, sigma, delta, V)
    if model == "inter":
        return inter_fit_model(tau, sigma, delta, V)
    raise ValueError(f"unknown model {model!r}; choose from {MODELS}")


def dominant_frequency(delays, probability, min_frequency: float = 0.0) -> float:
    """Angular frequency (rad/ps) of the strongest FFT component above ``min_frequency``.

    The inter-pair trace carries a non-oscillating dip whose spectrum sits
    near zero frequency; pass a floor of a few envelope widths to skip it.
    """
    delays = np.asarray(delays, dtype=float)
    y = np.asarray(probability, dtype=float) - np.mean(probability)
    amp = np.abs(np.fft.rfft(y))
    freqs = 2 * np.pi * np.fft.rfftfreq(y.size, d=delays[1] - delays[0])
    amp[freqs <= min_frequency] = 0.0
    amp[0] = 0.0
    return float(freqs[np.argmax(amp)])


# --------------------------------------------------------------------------
# fitting
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FitOutcome:
    sigma: float
    delta: float
    V: float
    baseline: float
    covariance: np.ndarray
    residual_norm: float
    chi2_reduced: float
    model: str
    n_points: int

    @property
    def stderr(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def to_dict(self) -> dict:
        names = ["sigma", "delta", "V", "baseline"]
        return {
            "model": self.model,
            **{n: float(getattr(self, n)) for n in names},
            **{f"{n}_stderr": float(e) for n, e in zip(names, self.stderr)},
            "covariance": self.covariance.tolist(),
            "residual_norm": self.residual_norm,
            "chi2_reduced": self.chi2_reduced,
            "n_points": self.n_points,
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)


def initial_guess(delays, counts, model: str) -> tuple[float, float, float, float]:
    """Rough (sigma, delta, V, baseline) from the trace itself."""
    delays = np.asarray(delays, dtype=float)
    counts = np.asarray(counts, dtype=float)
    edge = np.abs(delays) >= 0.8 * np.max(np.abs(delays))
    base = float(np.mean(counts[edge])) * 2.0 if np.any(edge) else float(np.mean(counts)) * 2.0
    base = max(base, 1e-12)
    dev = counts / base - 0.5
    # envelope width from the second moment of |deviation|
    w = np.abs(dev)
    tau_rms = float(np.sqrt(np.sum(w * delays**2) / max(np.sum(w), 1e-300)))
    sigma = np.sqrt(2.0) / max(tau_rms, 1e-6)
    beat = dominant_frequency(delays, counts, min_frequency=3 * sigma if model == "inter" else 0.0)
    delta = beat / 2.0 if model == "inter" else beat
    if delta <= 0:
        delta = 2 * np.pi / (delays[-1] - delays[0])
    amp = float(np.max(np.abs(dev)))
    V = float(np.clip(amp * (4.0 if model == "inter" else 2.0), 0.05, 1.0))
    return float(sigma), float(delta), V, base


def fit_trace(trace: HomTrace, model: str = "intra-pi", guess=None, max_nfev: int = 2000) -> FitOutcome:
    """Poisson-weighted least squares of counts = baseline * p(tau; sigma, delta, V).

    ``baseline`` is the coincidence rate far from zero delay divided by 1/2,
    i.e. the normalisation that maps counts to probabilities. V is bounded to
    [0, 1]. The covariance is (J^T J)^-1 of the weighted residuals.

    Raises
    ------
    ValueError
        Fewer than 10 points, or the delay span covers less than one beating
        period of the initial guess.
    FitError
        The optimiser stopped on its evaluation budget; ``best`` holds the
        last parameter vector.
    """
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; choose from {MODELS}")
    delays = trace.delays
    counts = trace.counts if trace.counts is not None else trace.probability
    if delays.size < 10:
        raise ValueError("at least 10 data points are needed")
    p0 = initial_guess(delays, counts, model) if guess is None else tuple(float(x) for x in guess)
    if len(p0) == 3:
        p0 = (*p0, initial_guess(delays, counts, model)[3])
    period = (np.pi if model == "inter" else 2 * np.pi) / p0[1]
    if delays.max() - delays.min() < period:
        raise ValueError("delay span must cover at least one beating period")
    weights = 1.0 / np.sqrt(np.maximum(counts, 1.0)) if trace.counts is not None else np.ones_like(counts)

    def resid(x):
        s, d, v, b = x
        return (b * model_probability(model, delays, s, d, v) - counts) * weights

    lower = [1e-9, 1e-9, 0.0, 1e-12]
    upper = [np.inf, np.inf, 1.0, np.inf]
    x0 = np.clip(np.array(p0, dtype=float), np.array(lower) + 1e-12, [1e12, 1e12, 1.0, 1e300])
    res = least_squares(resid, x0, bounds=(lower, upper), method="trf", x_scale="jac",
                        xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=max_nfev)
    if res.status == 0:
        raise FitError(f"fit did not converge within {max_nfev} evaluations", best=res.x)
    J = res.jac
    try:
        cov = np.linalg.inv(J.T @ J)
    except np.linalg.LinAlgError:
        cov = np.linalg.pinv(J.T @ J)
    dof = max(1, delays.size - 4)
    s, d, v, b = res.x
    return FitOutcome(float(s), float(d), float(v), float(b), cov, float(np.linalg.norm(res.fun)),
                      float(np.sum(res.fun**2) / dof), model, int(delays.size))


def counts_trace(delays, probability, n_per_point: float, rng=None, kind: str = "intra") -> HomTrace:
    """Coincidence counts with mean n_per_point * 2 p(tau) (baseline n at p = 1/2).

    Without ``rng`` the noiseless expectation is returned.
    """
    mean = 2.0 * n_per_point * np.asarray(probability, dtype=float)
    counts = mean if rng is None else rng.poisson(mean).astype(float)
    return HomTrace(delays, probability, kind, counts)
