"""Frequency grids, multi-Gaussian pump envelopes and the pulse-shaper model.

All frequencies are angular frequencies in rad/ps. Wavelength conversion
lives here and nowhere else (``omega_to_wavelength`` / ``wavelength_to_omega``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

# speed of light in nm/ps
C_NM_PER_PS = 299792.458


def omega_to_wavelength(omega):
    """Vacuum wavelength in nm for an angular frequency in rad/ps."""
    return 2.0 * np.pi * C_NM_PER_PS / np.asarray(omega, dtype=float)


def wavelength_to_omega(wavelength_nm):
    """Angular frequency in rad/ps for a vacuum wavelength in nm."""
    return 2.0 * np.pi * C_NM_PER_PS / np.asarray(wavelength_nm, dtype=float)


class SpectralDomainError(ValueError):
    """A spectral quantity does not fit on the grid it is evaluated on."""


@dataclass(frozen=True, eq=False)
class SpectralAxis:
    """Uniformly spaced angular-frequency axis.

    Parameters
    ----------
    center : float
        Nominal centre frequency (rad/ps); only used as a reference.
    values : ndarray
        Strictly increasing, uniformly spaced sample frequencies (rad/ps).
    """

    center: float
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise ValueError("a spectral axis needs at least two points")
        steps = np.diff(values)
        step = (values[-1] - values[0]) / (values.size - 1)
        if step <= 0 or np.any(steps <= 0):
            raise ValueError("spectral axis must be strictly increasing")
        # rounding of absolute frequencies allows a few ulps of max|w| per step
        slack = 1e-12 * step + 8.0 * np.finfo(float).eps * np.max(np.abs(values))
        if np.max(np.abs(steps - step)) > slack:
            raise ValueError("spectral axis spacing is not uniform")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "center", float(self.center))

    @classmethod
    def centered(cls, center: float, half_span: float, n_points: int) -> "SpectralAxis":
        """Axis of ``n_points`` samples covering ``center +- half_span``."""
        if half_span <= 0:
            raise ValueError("half_span must be positive")
        return cls(center, np.linspace(center - half_span, center + half_span, int(n_points)))

    @property
    def n_points(self) -> int:
        return self.values.size

    @property
    def spacing(self) -> float:
        return float((self.values[-1] - self.values[0]) / (self.values.size - 1))

    @property
    def lower(self) -> float:
        return float(self.values[0])

    @property
    def upper(self) -> float:
        return float(self.values[-1])

    def wavelengths(self) -> np.ndarray:
        """Sample wavelengths in nm (decreasing, since the axis is in frequency)."""
        return omega_to_wavelength(self.values)

    def same_as(self, other: "SpectralAxis") -> bool:
        return self.n_points == other.n_points and bool(np.array_equal(self.values, other.values))


@dataclass(frozen=True)
class GaussianComponent:
    center: float
    sigma: float
    weight: float = 1.0
    phase: float = 0.0


def _as_components(components) -> tuple[GaussianComponent, ...]:
    out = []
    for c in components:
        if isinstance(c, GaussianComponent):
            out.append(c)
        elif isinstance(c, dict):
            out.append(GaussianComponent(**c))
        else:
            out.append(GaussianComponent(*c))
    return tuple(out)


def _multi_gaussian(x, components: Sequence[GaussianComponent]):
    x = np.asarray(x, dtype=float)
    total = np.zeros(x.shape, dtype=complex)
    for c in components:
        total += c.weight * np.exp(1j * c.phase) * np.exp(-((x - c.center) ** 2) / (2.0 * c.sigma**2))
    return total


@dataclass(frozen=True, eq=False)
class PumpEnvelope:
    """Pump envelope function sampled over the sum frequency ws + wi.

    ``amplitude`` holds the samples on ``axis`` with peak magnitude 1. The
    envelope can be re-evaluated anywhere with :meth:`evaluate`, using the
    same normalisation, and on a two-photon grid with :meth:`on_grid`.
    """

    axis: SpectralAxis
    amplitude: np.ndarray
    params: tuple[GaussianComponent, ...]
    scale: float = 1.0

    def evaluate(self, sum_frequency):
        return _multi_gaussian(sum_frequency, self.params) / self.scale

    def on_grid(self, s_axis: SpectralAxis, i_axis: SpectralAxis) -> np.ndarray:
        """Envelope on the (signal, idler) grid.

        For axes of equal spacing the sum frequency is built from the index
        sum, so that every anti-diagonal holds bit-identical values.
        """
        ns, ni = s_axis.n_points, i_axis.n_points
        if np.isclose(s_axis.spacing, i_axis.spacing, rtol=1e-12, atol=0.0):
            step = s_axis.spacing
            sums = s_axis.lower + i_axis.lower + step * np.arange(ns + ni - 1)
            line = self.evaluate(sums)
            idx = np.arange(ns)[:, None] + np.arange(ni)[None, :]
            return line[idx]
        return self.evaluate(s_axis.values[:, None] + i_axis.values[None, :])


def multi_gaussian_pef(axis: SpectralAxis, components) -> PumpEnvelope:
    """Sum of complex-weighted Gaussians in the sum frequency, peak-normalised.

    Each component is ``(center, sigma, weight, phase)`` (or a
    :class:`GaussianComponent`). The axis must contain every centre +- 5 sigma.
    """
    comps = _as_components(components)
    if not comps:
        raise ValueError("at least one Gaussian component is required")
    for k, c in enumerate(comps):
        if not c.sigma > 0:
            raise ValueError(f"component {k}: sigma must be positive, got {c.sigma}")
        lo, hi = c.center - 5.0 * c.sigma, c.center + 5.0 * c.sigma
        if lo < axis.lower or hi > axis.upper:
            raise SpectralDomainError(
                f"component {k} (center={c.center:.6g}, sigma={c.sigma:.6g}) is clipped: "
                f"needs [{lo:.6g}, {hi:.6g}] but axis spans [{axis.lower:.6g}, {axis.upper:.6g}]"
            )
    raw = _multi_gaussian(axis.values, comps)
    peak = float(np.max(np.abs(raw)))
    if peak == 0.0:
        raise SpectralDomainError("pump envelope vanishes on the whole axis")
    amp = raw / peak
    amp.setflags(write=False)
    return PumpEnvelope(axis=axis, amplitude=amp, params=comps, scale=peak)


# --------------------------------------------------------------------------
# pulse shaper
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ShaperConfig:
    """Liquid-crystal pulse shaper followed by a polariser.

    ``frequencies`` is the grid on which ``input_spectrum`` (intensity) is
    sampled. Pixel ``p`` covers ``pixel_edges[p] <= w < pixel_edges[p + 1]``;
    frequencies outside the pixel array are blocked by the aperture.
    """

    frequencies: np.ndarray
    input_spectrum: np.ndarray
    pixel_edges: np.ndarray
    pixel_angles: np.ndarray

    def __post_init__(self):
        freqs = np.array(self.frequencies, dtype=float)
        spec = np.array(self.input_spectrum, dtype=float)
        edges = np.array(self.pixel_edges, dtype=float)
        angles = np.array(self.pixel_angles, dtype=float)
        if freqs.shape != spec.shape or freqs.ndim != 1:
            raise ValueError("frequencies and input_spectrum must be 1-D arrays of equal length")
        if np.any(spec < 0):
            raise ValueError("input spectrum must be non-negative")
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise ValueError("pixel_edges must be strictly increasing")
        if angles.size != edges.size - 1:
            raise ValueError(f"expected {edges.size - 1} pixel angles, got {angles.size}")
        if np.any(angles < 0) or np.any(angles > np.pi / 2):
            raise ValueError("pixel angles must lie in [0, pi/2]")
        for name, arr in (("frequencies", freqs), ("input_spectrum", spec),
                          ("pixel_edges", edges), ("pixel_angles", angles)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def uniform(cls, frequencies, input_spectrum, n_pixels: int = 128, lower=None, upper=None):
        """Equal-width pixels spanning ``[lower, upper]`` (default: the grid), all angles 0."""
        freqs = np.asarray(frequencies, dtype=float)
        lo = freqs[0] if lower is None else lower
        hi = freqs[-1] if upper is None else upper
        # widen by a hair so that the last grid point falls inside the last pixel
        hi = hi + 1e-9 * max(abs(hi), 1.0)
        edges = np.linspace(lo, hi, n_pixels + 1)
        return cls(freqs, input_spectrum, edges, np.zeros(n_pixels))

    @property
    def n_pixels(self) -> int:
        return self.pixel_angles.size

    def pixel_index(self) -> np.ndarray:
        """Pixel index per frequency sample, -1 where the aperture blocks."""
        idx = np.searchsorted(self.pixel_edges, self.frequencies, side="right") - 1
        idx[(idx < 0) | (idx >= self.n_pixels)] = -1
        return idx

    def with_angles(self, angles) -> "ShaperConfig":
        return replace(self, pixel_angles=np.asarray(angles, dtype=float))

    def to_dict(self) -> dict:
        return {
            "frequencies_rad_per_ps": self.frequencies.tolist(),
            "input_spectrum": self.input_spectrum.tolist(),
            "pixel_edges_rad_per_ps": self.pixel_edges.tolist(),
            "pixel_angles_rad": self.pixel_angles.tolist(),
        }

    @classmethod
    def from_dict(cls, data) -> "ShaperConfig":
        return cls(data["frequencies_rad_per_ps"], data["input_spectrum"],
                   data["pixel_edges_rad_per_ps"], data["pixel_angles_rad"])

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path) -> "ShaperConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def shaper_transmission(cfg: ShaperConfig) -> np.ndarray:
    """Amplitude transmission |cos(2 theta)| of the pixel covering each frequency."""
    idx = cfg.pixel_index()
    per_pixel = np.abs(np.cos(2.0 * cfg.pixel_angles))
    t = np.zeros(cfg.frequencies.shape)
    inside = idx >= 0
    t[inside] = per_pixel[idx[inside]]
    return t


def shaped_spectrum(cfg: ShaperConfig) -> np.ndarray:
    """Output intensity spectrum: input intensity times |t|^2."""
    return cfg.input_spectrum * shaper_transmission(cfg) ** 2


@dataclass(frozen=True, eq=False)
class ShaperResult:
    config: ShaperConfig
    residual: float
    history: tuple[float, ...]
    converged: bool
    feasible: bool
    target_scale: float = 1.0
    metadata: dict = field(default_factory=dict)


def _residual(cfg: ShaperConfig, target: np.ndarray) -> float:
    peak = float(np.max(target))
    err = shaped_spectrum(cfg) - target
    return float(np.sqrt(np.mean(err**2)) / peak) if peak > 0 else float(np.sqrt(np.mean(err**2)))


def optimize_shaper(target, cfg: ShaperConfig, max_iter: int = 20, tol: float = 1e-10,
                    normalize: bool = False) -> ShaperResult:
    """Fit the pixel angles so that the shaped spectrum approaches ``target``.

    The objective is the L2 distance between shaped and target intensities.
    With piecewise-constant transmission the problem decouples per pixel and
    each pixel has a closed-form least-squares intensity transmission
    ``u = <I_in, T> / <I_in, I_in>`` clipped to [0, 1]. Pixels are visited in
    turn (coordinate descent) and a move is only kept if it does not raise the
    global error; sweeps repeat until the error improves by less than ``tol``.

    A target that would need gain (above the input anywhere, or non-zero
    outside the input support) is not an error: the best passive solution is
    returned with ``feasible=False``. ``normalize=True`` first rescales the
    target by the largest factor that keeps it under the input.

    The reported residual is the RMS error divided by the target peak.
    """
    target = np.asarray(target, dtype=float)
    if target.shape != cfg.frequencies.shape:
        raise ValueError("target must be sampled on the shaper frequency grid")
    if np.any(target < 0):
        raise ValueError("target intensity must be non-negative")
    inp = cfg.input_spectrum
    scale = 1.0
    if normalize:
        ok = (target > 0) & (inp > 0)
        if np.any(ok):
            scale = float(min(1.0, np.min(inp[ok] / target[ok])))
        target = target * scale
    slack = 1e-9 * max(float(np.max(inp)), 1e-300)
    idx = cfg.pixel_index()
    blocked = (idx < 0) & (target > slack)
    feasible = bool(np.all(target <= inp + slack) and not np.any(blocked))

    angles = np.array(cfg.pixel_angles, dtype=float)
    current = cfg
    history = [_residual(current, target)]
    converged = False
    members = [np.flatnonzero(idx == p) for p in range(cfg.n_pixels)]
    for _ in range(max_iter):
        for p, sel in enumerate(members):
            if sel.size == 0:
                continue
            a, b = inp[sel], target[sel]
            denom = float(a @ a)
            if denom == 0.0:
                continue
            u = min(max(float(a @ b) / denom, 0.0), 1.0)
            new_angle = 0.5 * np.arccos(np.sqrt(u))
            t_old = np.cos(2.0 * angles[p]) ** 2
            if np.sum((a * u - b) ** 2) <= np.sum((a * t_old - b) ** 2):
                angles[p] = new_angle
        current = cfg.with_angles(angles)
        history.append(_residual(current, target))
        if history[-2] - history[-1] < tol:
            converged = True
            break
    return ShaperResult(
        config=current,
        residual=history[-1],
        history=tuple(history),
        converged=converged,
        feasible=feasible,
        target_scale=scale,
        metadata={"n_sweeps": len(history) - 1, "infeasible": not feasible},
    )


def save_spectrum_csv(path, frequencies, values) -> None:
    """Two-column CSV: angular frequency (rad/ps), value."""
    data = np.column_stack((np.asarray(frequencies, dtype=float), np.asarray(values, dtype=float)))
    np.savetxt(path, data, delimiter=",", header="omega_rad_per_ps,value", comments="", fmt="%.17g")


def load_spectrum_csv(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1]
