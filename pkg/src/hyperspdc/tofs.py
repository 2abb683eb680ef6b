"""Time-of-flight spectrometer: dispersion mapping, detection simulation and JSI recovery.

A dispersive fibre maps wavelength to arrival time, t = D (lambda - lambda_ref),
with D in ps/nm. Photon pairs are drawn cell-by-cell from a joint spectrum,
spread uniformly over the time interval each spectral cell maps onto, smeared
by Gaussian detector jitter and histogrammed on a two-dimensional time grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .jsa import JointSpectralAmplitude, bin_coefficients, schmidt_decompose
from .spectra import C_NM_PER_PS, SpectralAxis

JITTER_FWHM_PS = 37.0
FWHM_PER_SIGMA = 2.355
REPETITION_PERIOD_PS = 1e6 / 76.0  # 76 MHz pump


class TimeWindowError(ValueError):
    """Mapped arrival times fall outside the histogram range."""


@dataclass(frozen=True)
class DispersionSpec:
    D: float = -1350.0
    wavelength_ref: float = 1582.0
    jitter_sigma: float = JITTER_FWHM_PS / FWHM_PER_SIGMA
    bin_width: float = 100.0
    valid_half_width_nm: float = 100.0

    def __post_init__(self):
        if not np.isfinite(self.D) or self.D == 0:
            raise ValueError("dispersion D must be non-zero")
        if not self.bin_width > 0:
            raise ValueError("bin_width must be positive")
        if not self.jitter_sigma >= 0:
            raise ValueError("jitter_sigma must be non-negative")

    def to_dict(self) -> dict:
        return {"D_ps_per_nm": self.D, "wavelength_ref_nm": self.wavelength_ref,
                "jitter_sigma_ps": self.jitter_sigma, "bin_width_ps": self.bin_width}

    @classmethod
    def from_dict(cls, d: dict) -> "DispersionSpec":
        return cls(D=float(d.get("D_ps_per_nm", -1350.0)),
                   wavelength_ref=float(d.get("wavelength_ref_nm", 1582.0)),
                   jitter_sigma=float(d.get("jitter_sigma_ps", JITTER_FWHM_PS / FWHM_PER_SIGMA)),
                   bin_width=float(d.get("bin_width_ps", 100.0)))


def wavelength_to_time(wavelength_nm, spec: DispersionSpec):
    """Arrival time (ps) relative to a photon at the reference wavelength."""
    lam = np.asarray(wavelength_nm, dtype=float)
    if np.any(np.abs(lam - spec.wavelength_ref) > spec.valid_half_width_nm):
        raise ValueError(f"wavelength outside {spec.wavelength_ref} +- {spec.valid_half_width_nm} nm")
    return spec.D * (lam - spec.wavelength_ref)


def time_to_wavelength(t_ps, spec: DispersionSpec):
    return spec.wavelength_ref + np.asarray(t_ps, dtype=float) / spec.D


def frequency_to_time(omega, spec: DispersionSpec):
    return wavelength_to_time(2 * np.pi * C_NM_PER_PS / np.asarray(omega, dtype=float), spec)


@dataclass(frozen=True, eq=False)
class CoincidenceHistogram:
    t_s_axis: np.ndarray
    t_i_axis: np.ndarray
    counts: np.ndarray
    integration_time: float | None = None
    seed: int | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        ts = np.array(self.t_s_axis, dtype=float)
        ti = np.array(self.t_i_axis, dtype=float)
        c = np.array(self.counts)
        if c.shape != (ts.size, ti.size):
            raise ValueError("counts shape does not match the time axes")
        if np.any(c < 0) or not np.all(np.equal(np.mod(c, 1), 0)):
            raise ValueError("counts must be non-negative integers")
        for ax in (ts, ti):
            if ax.size > 2 and np.ptp(np.diff(ax)) > 1e-9 * abs(ax[1] - ax[0]) + 1e-9:
                raise ValueError("time axes must be uniform")
        object.__setattr__(self, "t_s_axis", ts)
        object.__setattr__(self, "t_i_axis", ti)
        object.__setattr__(self, "counts", c.astype(np.int64))

    @property
    def bin_width(self) -> float:
        return float(self.t_s_axis[1] - self.t_s_axis[0])

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def degenerate(self) -> bool:
        return self.total == 0

    def edges(self, axis: int) -> tuple[float, float]:
        ax = self.t_s_axis if axis == 0 else self.t_i_axis
        h = 0.5 * (ax[1] - ax[0]) if ax.size > 1 else 0.5 * self.metadata.get("bin_width", 0.0)
        return float(ax[0] - h), float(ax[-1] + h)

    def with_counts(self, counts, **meta) -> "CoincidenceHistogram":
        return CoincidenceHistogram(self.t_s_axis, self.t_i_axis, counts, self.integration_time,
                                    self.seed, {**self.metadata, **meta})

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("signal_time_ps," + ",".join(f"{v:.17g}" for v in self.t_s_axis) + "\n")
            fh.write("idler_time_ps," + ",".join(f"{v:.17g}" for v in self.t_i_axis) + "\n")
            for row in self.counts:
                fh.write(",".join(str(int(v)) for v in row) + "\n")

    @classmethod
    def from_csv(cls, path) -> "CoincidenceHistogram":
        with open(path) as fh:
            ts = np.array(fh.readline().strip().split(",")[1:], dtype=float)
            ti = np.array(fh.readline().strip().split(",")[1:], dtype=float)
            counts = np.loadtxt(fh, delimiter=",", ndmin=2, dtype=np.int64)
        return cls(ts, ti, counts)


# --------------------------------------------------------------------------
# forward model
# --------------------------------------------------------------------------


def _as_jsi(source, s_axis=None, i_axis=None):
    if isinstance(source, JointSpectralAmplitude):
        return source.intensity(), source.s_axis, source.i_axis
    if s_axis is None or i_axis is None:
        raise ValueError("a bare JSI matrix needs its signal and idler axes")
    jsi = np.asarray(source, dtype=float)
    if np.any(jsi < 0):
        raise ValueError("JSI must be non-negative")
    return jsi, s_axis, i_axis


def cell_time_intervals(axis: SpectralAxis, spec: DispersionSpec) -> tuple[np.ndarray, np.ndarray]:
    """Lower and upper arrival time of every spectral cell of ``axis``."""
    h = 0.5 * axis.spacing
    a = frequency_to_time(axis.values - h, spec)
    b = frequency_to_time(axis.values + h, spec)
    return np.minimum(a, b), np.maximum(a, b)


def _time_axis(lo: float, hi: float, bw: float) -> np.ndarray:
    # bin centres on multiples of the bin width
    k0 = int(np.floor(lo / bw + 0.5))
    k1 = int(np.ceil(hi / bw - 0.5))
    return np.arange(k0, k1 + 1) * bw


def default_time_axes(s_axis: SpectralAxis, i_axis: SpectralAxis, spec: DispersionSpec, pad: float | None = None):
    if pad is None:
        pad = 6 * spec.jitter_sigma + spec.bin_width
    axes = []
    for ax in (s_axis, i_axis):
        lo, hi = cell_time_intervals(ax, spec)
        axes.append(_time_axis(lo.min() - pad, hi.max() + pad, spec.bin_width))
    return axes[0], axes[1]


def _bin_index(t, axis, name):
    bw = axis[1] - axis[0]
    lo = axis[0] - 0.5 * bw
    hi = axis[-1] + 0.5 * bw
    idx = np.floor((t - lo) / bw).astype(np.int64)
    if t.size and (idx.min() < 0 or idx.max() >= axis.size):
        raise TimeWindowError(f"{name} arrival times span [{t.min():.1f}, {t.max():.1f}] ps, "
                              f"outside the histogram range [{lo:.1f}, {hi:.1f}] ps")
    return idx


def simulate_tofs(source, spec: DispersionSpec, n_pairs: float, seed: int, *, s_axis=None, i_axis=None,
                  time_axes=None, ghost_fraction: float = 0.0,
                  repetition_period: float = REPETITION_PERIOD_PS,
                  integration_time: float | None = None) -> CoincidenceHistogram:
    """Poisson-sample a coincidence time histogram from a joint spectrum.

    Each spectral cell contributes Poisson(n_pairs * P_cell) pairs. Every
    photon lands uniformly inside the time interval its cell maps to, plus
    Gaussian jitter. ``ghost_fraction`` of the pairs are attributed to the
    previous or next trigger, shifting both times by one repetition period.

    Raises
    ------
    TimeWindowError
        Some arrival time falls outside ``time_axes``.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    jsi, s_axis, i_axis = _as_jsi(source, s_axis, i_axis)
    total = jsi.sum()
    if total <= 0:
        raise ValueError("JSI is zero everywhere")
    rng = np.random.default_rng(seed)
    n_cell = rng.poisson(n_pairs * jsi / total)
    js, ji = np.nonzero(n_cell)
    reps = n_cell[js, ji]
    js = np.repeat(js, reps)
    ji = np.repeat(ji, reps)

    s_lo, s_hi = cell_time_intervals(s_axis, spec)
    i_lo, i_hi = cell_time_intervals(i_axis, spec)
    n = js.size
    ts = s_lo[js] + (s_hi[js] - s_lo[js]) * rng.random(n)
    ti = i_lo[ji] + (i_hi[ji] - i_lo[ji]) * rng.random(n)
    if spec.jitter_sigma > 0:
        ts += rng.normal(0.0, spec.jitter_sigma, n)
        ti += rng.normal(0.0, spec.jitter_sigma, n)
    n_ghost = 0
    if ghost_fraction > 0:
        ghost = rng.random(n) < ghost_fraction
        n_ghost = int(ghost.sum())
        shift = np.where(rng.random(n) < 0.5, -repetition_period, repetition_period)
        ts = np.where(ghost, ts + shift, ts)
        ti = np.where(ghost, ti + shift, ti)

    if time_axes is None:
        if ghost_fraction > 0:
            pad = repetition_period + 6 * spec.jitter_sigma + spec.bin_width
            time_axes = default_time_axes(s_axis, i_axis, spec, pad)
        else:
            time_axes = default_time_axes(s_axis, i_axis, spec)
    tax_s, tax_i = (np.asarray(a, dtype=float) for a in time_axes)
    ks = _bin_index(ts, tax_s, "signal")
    ki = _bin_index(ti, tax_i, "idler")
    counts = np.bincount(ks * tax_i.size + ki, minlength=tax_s.size * tax_i.size).reshape(tax_s.size, tax_i.size)
    meta = {"n_pairs": float(n_pairs), "ghost_fraction": ghost_fraction, "n_ghost": n_ghost, **spec.to_dict()}
    return CoincidenceHistogram(tax_s, tax_i, counts, integration_time, seed, meta)


def _smeared_box_cdf_integral(x, sigma):
    # integral of the Gaussian CDF; reduces to max(x, 0) without jitter
    if sigma == 0:
        return np.maximum(x, 0.0)
    z = x / sigma
    return x * ndtr(z) + sigma * np.exp(-0.5 * z * z) / np.sqrt(2 * np.pi)


def transfer_matrix(axis: SpectralAxis, time_axis, spec: DispersionSpec) -> np.ndarray:
    """P[j, b]: probability that a photon from spectral cell j lands in time bin b."""
    lo, hi = cell_time_intervals(axis, spec)
    t = np.asarray(time_axis, dtype=float)
    bw = t[1] - t[0]
    b_lo = (t - 0.5 * bw)[None, :]
    b_hi = (t + 0.5 * bw)[None, :]
    lo = lo[:, None]
    hi = hi[:, None]
    G = lambda x: _smeared_box_cdf_integral(x, spec.jitter_sigma)  # noqa: E731
    P = (G(b_hi - lo) - G(b_hi - hi) - G(b_lo - lo) + G(b_lo - hi)) / (hi - lo)
    return np.clip(P, 0.0, None)  # cancellation round-off


def expected_histogram(source, spec: DispersionSpec, n_pairs: float, time_axes, *, s_axis=None, i_axis=None):
    """Mean of :func:`simulate_tofs` (no ghosts) as a float matrix."""
    jsi, s_axis, i_axis = _as_jsi(source, s_axis, i_axis)
    Ps = transfer_matrix(s_axis, time_axes[0], spec)
    Pi = transfer_matrix(i_axis, time_axes[1], spec)
    return n_pairs * Ps.T @ (jsi / jsi.sum()) @ Pi


# --------------------------------------------------------------------------
# reconstruction
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ReconstructedJSI:
    wavelength_s: np.ndarray
    wavelength_i: np.ndarray
    jsi: np.ndarray
    degenerate: bool = False

    def schmidt(self):
        """Schmidt decomposition of sqrt(JSI) on the (uniform) wavelength grid."""
        return schmidt_decompose(np.sqrt(self.jsi))


def reconstruct_jsi(hist: CoincidenceHistogram, spec: DispersionSpec) -> ReconstructedJSI:
    """Map time bins back to wavelengths (ascending) and normalise counts to unit sum."""
    wl_s = time_to_wavelength(hist.t_s_axis, spec)
    wl_i = time_to_wavelength(hist.t_i_axis, spec)
    jsi = hist.counts.astype(float)
    if wl_s.size > 1 and wl_s[1] < wl_s[0]:
        wl_s, jsi = wl_s[::-1], jsi[::-1, :]
    if wl_i.size > 1 and wl_i[1] < wl_i[0]:
        wl_i, jsi = wl_i[::-1], jsi[:, ::-1]
    total = jsi.sum()
    if total == 0:
        return ReconstructedJSI(wl_s, wl_i, np.zeros_like(jsi), True)
    return ReconstructedJSI(wl_s, wl_i, jsi / total, False)


def _normalize_window(window):
    (s_lo, s_hi), (i_lo, i_hi) = window
    return (float(s_lo), float(s_hi)), (float(i_lo), float(i_hi))


def crop_trigger_window(hist: CoincidenceHistogram, window) -> CoincidenceHistogram:
    """Zero all counts whose bin centre lies outside ``((s_lo, s_hi), (i_lo, i_hi))``."""
    (s_lo, s_hi), (i_lo, i_hi) = _normalize_window(window)
    if s_hi <= s_lo or i_hi <= i_lo:
        raise ValueError("empty trigger window")
    tol = 0.5 * hist.bin_width + 1e-9
    for (lo, hi), axis in (((s_lo, s_hi), 0), ((i_lo, i_hi), 1)):
        e_lo, e_hi = hist.edges(axis)
        if lo < e_lo - tol or hi > e_hi + tol:
            raise ValueError(f"window [{lo}, {hi}] ps exceeds the histogram range [{e_lo}, {e_hi}] ps")
    ms = (hist.t_s_axis >= s_lo) & (hist.t_s_axis <= s_hi)
    mi = (hist.t_i_axis >= i_lo) & (hist.t_i_axis <= i_hi)
    if not ms.any() or not mi.any():
        raise ValueError("trigger window contains no histogram bins")
    counts = np.where(ms[:, None] & mi[None, :], hist.counts, 0)
    return hist.with_counts(counts, window=[[s_lo, s_hi], [i_lo, i_hi]])


@dataclass(frozen=True, eq=False)
class BinCounts:
    totals: np.ndarray
    regions: list
    centers: list

    def to_dict(self) -> dict:
        return {"totals": [int(x) for x in self.totals], "regions": self.regions, "centers": self.centers}


def extract_bins(hist: CoincidenceHistogram, centers, half_width: float = 3500.0) -> BinCounts:
    """Total counts inside square regions of +- half_width around each (t_s, t_i) centre.

    Regions must lie inside the histogram and must not overlap.
    """
    centers = [(float(a), float(b)) for a, b in centers]
    if half_width <= 0:
        raise ValueError("half_width must be positive")
    for n, (a, b) in enumerate(centers):
        for c, d in centers[n + 1:]:
            if abs(a - c) < 2 * half_width and abs(b - d) < 2 * half_width:
                raise ValueError(f"regions around {(a, b)} and {(c, d)} overlap")
    tol = 0.5 * hist.bin_width + 1e-9
    s_edges, i_edges = hist.edges(0), hist.edges(1)
    totals, regions = [], []
    for a, b in centers:
        box = [[a - half_width, a + half_width], [b - half_width, b + half_width]]
        if (box[0][0] < s_edges[0] - tol or box[0][1] > s_edges[1] + tol
                or box[1][0] < i_edges[0] - tol or box[1][1] > i_edges[1] + tol):
            raise ValueError(f"region around {(a, b)} extends outside the histogram")
        ms = (hist.t_s_axis >= box[0][0]) & (hist.t_s_axis < box[0][1])
        mi = (hist.t_i_axis >= box[1][0]) & (hist.t_i_axis < box[1][1])
        totals.append(int(hist.counts[np.ix_(ms, mi)].sum()))
        regions.append(box)
    return BinCounts(np.array(totals, dtype=np.int64), regions, centers)


def bin_time_centers(kind: str, delta: float, center: float, spec: DispersionSpec,
                     phase_shift: str = "pi") -> list[tuple[float, float]]:
    """Arrival-time centres of the occupied bins of an ideal pump layout."""
    A, pos = bin_coefficients(kind, phase_shift)
    out = []
    for a, b in zip(*np.nonzero(A)):
        ws = center + pos[a] * delta
        wi = center + pos[b] * delta
        out.append((float(frequency_to_time(ws, spec)), float(frequency_to_time(wi, spec))))
    return out
