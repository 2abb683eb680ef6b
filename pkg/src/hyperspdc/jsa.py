"""Joint spectral amplitudes: assembly, Schmidt decomposition and denoising.

A JSA is stored as a complex matrix with rows on the signal axis and columns
on the idler axis. It is normalised so that ``sum |f|^2 dws dwi = 1``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .crystal import DispersionModel, NonlinearityTarget, pmf_analytic, pmf_finite_crystal, target_nonlinearity
from .spectra import PumpEnvelope, SpectralAxis, multi_gaussian_pef, wavelength_to_omega


class DegenerateStateError(ValueError):
    """The two-photon amplitude vanishes everywhere on the grid."""


@dataclass(frozen=True, eq=False)
class JointSpectralAmplitude:
    s_axis: SpectralAxis
    i_axis: SpectralAxis
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = np.array(self.values, dtype=complex)
        if vals.shape != (self.s_axis.n_points, self.i_axis.n_points):
            raise ValueError(f"values shape {vals.shape} does not match the axes "
                             f"({self.s_axis.n_points}, {self.i_axis.n_points})")
        if not np.all(np.isfinite(vals)):
            raise ValueError("JSA contains non-finite entries")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def cell(self) -> float:
        """Area element dws * dwi."""
        return self.s_axis.spacing * self.i_axis.spacing

    @property
    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.cell))

    @property
    def is_square(self) -> bool:
        return self.s_axis.same_as(self.i_axis)

    def normalized(self) -> "JointSpectralAmplitude":
        n = self.norm
        if n == 0.0:
            raise DegenerateStateError("cannot normalise an all-zero JSA")
        return JointSpectralAmplitude(self.s_axis, self.i_axis, self.values / n, dict(self.metadata))

    def intensity(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def transposed(self) -> "JointSpectralAmplitude":
        """Signal and idler roles exchanged."""
        return JointSpectralAmplitude(self.i_axis, self.s_axis, self.values.T, dict(self.metadata))

    def with_values(self, values) -> "JointSpectralAmplitude":
        return JointSpectralAmplitude(self.s_axis, self.i_axis, values, dict(self.metadata))

    def to_csv(self, path_re, path_im=None) -> None:
        """Real part (and optionally imaginary part) as matrix CSVs with axis header rows."""
        save_matrix_csv(path_re, self.values.real, self.s_axis.values, self.i_axis.values)
        if path_im is not None:
            save_matrix_csv(path_im, self.values.imag, self.s_axis.values, self.i_axis.values)


def save_matrix_csv(path, matrix, s_values, i_values) -> None:
    """Matrix CSV: first row signal axis, second row idler axis, then one row per signal frequency."""
    matrix = np.asarray(matrix, dtype=float)
    with open(path, "w") as fh:
        fh.write("signal_omega_rad_per_ps," + ",".join(f"{v:.17g}" for v in s_values) + "\n")
        fh.write("idler_omega_rad_per_ps," + ",".join(f"{v:.17g}" for v in i_values) + "\n")
        for row in matrix:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def load_matrix_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inverse of :func:`save_matrix_csv`; returns (matrix, signal values, idler values)."""
    with open(path) as fh:
        s_line = fh.readline().strip().split(",")
        i_line = fh.readline().strip().split(",")
        matrix = np.loadtxt(fh, delimiter=",", ndmin=2)
    return matrix, np.array(s_line[1:], dtype=float), np.array(i_line[1:], dtype=float)


# --------------------------------------------------------------------------
# assembly
# --------------------------------------------------------------------------


def assemble_jsa(pef, pmf, s_axis: SpectralAxis, i_axis: SpectralAxis, metadata=None) -> JointSpectralAmplitude:
    """Pointwise product of pump envelope and phase matching, normalised.

    ``pef`` is a :class:`PumpEnvelope` (evaluated on the grid) or a matrix
    already on the grid; ``pmf`` is a matrix on the same grid.
    """
    if isinstance(pef, PumpEnvelope):
        pef_grid = pef.on_grid(s_axis, i_axis)
    else:
        pef_grid = np.asarray(pef)
    pmf = np.asarray(pmf)
    shape = (s_axis.n_points, i_axis.n_points)
    if pef_grid.shape != shape or pmf.shape != shape:
        raise ValueError("PEF and PMF must be evaluated on the same signal/idler grid")
    prod = pef_grid * pmf
    if not np.any(prod):
        raise DegenerateStateError("pump envelope and phase matching have disjoint supports")
    meta = dict(metadata or {})
    return JointSpectralAmplitude(s_axis, i_axis, prod, meta).normalized()


def _difference_grid(s_axis: SpectralAxis, i_axis: SpectralAxis) -> np.ndarray:
    """ws - wi on the grid; built from index differences on equal-spacing axes
    so that the exchange ws <-> wi flips the sign exactly."""
    if np.isclose(s_axis.spacing, i_axis.spacing, rtol=1e-12, atol=0.0):
        j = np.arange(s_axis.n_points)[:, None] - np.arange(i_axis.n_points)[None, :]
        return (s_axis.lower - i_axis.lower) + s_axis.spacing * j
    return s_axis.values[:, None] - i_axis.values[None, :]


def gaussian_pmf_grid(s_axis: SpectralAxis, i_axis: SpectralAxis, delta: float, sigma: float,
                      phase_shift: str = "pi") -> np.ndarray:
    """Double-Gaussian phase matching in ws - wi with lobes at +-delta.

    ``phase_shift="pi"`` gives lobes of opposite sign (exchange-antisymmetric
    state); ``"zero"`` gives lobes of equal sign.
    """
    if phase_shift not in ("pi", "zero"):
        raise ValueError("phase_shift must be 'pi' or 'zero'")
    d = _difference_grid(s_axis, i_axis)
    upper = np.exp(-((d - delta) ** 2) / (2 * sigma**2))
    lower = np.exp(-((d + delta) ** 2) / (2 * sigma**2))
    return upper - lower if phase_shift == "pi" else upper + lower


def pmf_grid_from_dispersion(s_axis: SpectralAxis, i_axis: SpectralAxis, model: DispersionModel,
                             dk0: float, eps: float, xi: float,
                             target: NonlinearityTarget | None = None) -> np.ndarray:
    """Crystal PMF on the grid through a dispersion model, unit peak magnitude.

    Without ``target`` the untruncated double Gaussian is used; with it, the
    PMF of the sampled (finite-length) nonlinearity profile.
    """
    dk = model.phase_mismatch(s_axis.values[:, None], i_axis.values[None, :])
    if target is None:
        vals = pmf_analytic(dk, dk0, eps, xi)
    else:
        # tabulate on a fine 1-D wavevector grid, then spline onto the 2-D grid
        lo, hi = float(dk.min()), float(dk.max())
        n_tab = int(min(20001, max(2049, (hi - lo) / (0.05 / target.L) + 1)))
        table = np.linspace(lo, hi, n_tab) if hi > lo else np.array([lo - 1e-9, lo + 1e-9])
        tab = pmf_finite_crystal(table, target)
        vals = CubicSpline(table, tab.real)(dk) + 1j * CubicSpline(table, tab.imag)(dk)
    peak = float(np.max(np.abs(vals)))
    if peak == 0.0:
        raise DegenerateStateError("phase matching vanishes on the whole grid")
    return vals / peak


# --------------------------------------------------------------------------
# Schmidt decomposition
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SchmidtResult:
    singular_values: np.ndarray
    lambdas: np.ndarray
    K: float
    purity: float
    signal_modes: np.ndarray
    idler_modes: np.ndarray

    def summary(self, n_top: int = 8) -> dict:
        return {"K": self.K, "purity": self.purity,
                "lambdas_top": [float(x) for x in self.lambdas[:n_top]]}

    def save(self, path, n_top: int = 8) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(n_top), fh, indent=2)


def schmidt_decompose(jsa, s_spacing: float = 1.0, i_spacing: float = 1.0, n_modes: int = 8) -> SchmidtResult:
    """Schmidt decomposition via the SVD of the grid-weighted amplitude matrix.

    ``jsa`` is a :class:`JointSpectralAmplitude` (its spacings are used) or
    a bare matrix with the spacings given explicitly. Mode functions are
    returned as columns normalised with the grid weights; only the first
    ``n_modes`` are kept.
    """
    if isinstance(jsa, JointSpectralAmplitude):
        mat, ds, di = jsa.values, jsa.s_axis.spacing, jsa.i_axis.spacing
    else:
        mat, ds, di = np.asarray(jsa), s_spacing, i_spacing
    if not np.all(np.isfinite(mat)):
        raise ValueError("JSA contains non-finite entries")
    weighted = mat * np.sqrt(ds * di)
    u, s, vh = np.linalg.svd(weighted, full_matrices=False)
    total = float(np.sum(s**2))
    if total == 0.0:
        raise DegenerateStateError("cannot decompose an all-zero JSA")
    lam = s**2 / total
    K = float(1.0 / np.sum(lam**2))
    m = min(n_modes, s.size)
    return SchmidtResult(
        singular_values=s,
        lambdas=lam,
        K=K,
        purity=1.0 / K,
        signal_modes=u[:, :m] / np.sqrt(ds),
        idler_modes=vh[:m].T / np.sqrt(di),
    )


def schmidt_number(jsa, **kw) -> float:
    return schmidt_decompose(jsa, **kw).K


def jsi_purity(jsi) -> float:
    """Purity 1/K of the square-root intensity sqrt(JSI)."""
    jsi = np.asarray(jsi, dtype=float)
    if np.any(jsi < 0):
        raise ValueError("JSI must be non-negative")
    return schmidt_decompose(np.sqrt(jsi)).purity


# --------------------------------------------------------------------------
# intensity-side tools
# --------------------------------------------------------------------------


def phase_mask(kind, shape) -> np.ndarray:
    """Phase matrix theta(ws, wi) for :func:`jsa_from_jsi`."""
    if isinstance(kind, str):
        if kind == "zero":
            return np.zeros(shape)
        if kind == "pi-above-diagonal":
            n_s, n_i = shape
            if n_s != n_i:
                raise ValueError("pi-above-diagonal needs a square grid")
            j = np.arange(n_s)[:, None]
            k = np.arange(n_i)[None, :]
            # rows are signal: ws > wi is j > k
            return np.where(j > k, np.pi, 0.0)
        raise ValueError(f"unknown phase mask {kind!r}")
    mask = np.asarray(kind, dtype=float)
    if mask.shape != tuple(shape):
        raise ValueError("custom phase mask must match the JSI shape")
    return mask


def jsa_from_jsi(jsi, s_axis: SpectralAxis, i_axis: SpectralAxis, mask="pi-above-diagonal") -> JointSpectralAmplitude:
    """Amplitude exp(i theta) sqrt(JSI) with a sign structure attached.

    ``mask`` is ``"pi-above-diagonal"`` (theta = pi where ws > wi),
    ``"zero"`` or a custom phase matrix.
    """
    jsi = np.asarray(jsi, dtype=float)
    if np.any(jsi < 0):
        raise ValueError("JSI must be entrywise non-negative")
    theta = phase_mask(mask, jsi.shape)
    amp = np.sqrt(jsi).astype(complex)
    nz = theta != 0.0
    amp[nz] = amp[nz] * np.exp(1j * theta[nz])
    if not np.any(amp):
        raise DegenerateStateError("JSI is zero everywhere")
    return JointSpectralAmplitude(s_axis, i_axis, amp, {"phase_mask": mask if isinstance(mask, str) else "custom"}).normalized()


@dataclass(frozen=True, eq=False)
class LowRankResult:
    jsi: np.ndarray
    rank: int
    capped: bool
    clipped_fraction: float = 0.0


def denoise_lowrank(jsi, rank: int = 4) -> LowRankResult:
    """Keep the leading ``rank`` singular triplets of sqrt(JSI).

    Negative amplitudes produced by the truncation are clipped to zero, the
    amplitude is squared back into an intensity and rescaled to the input's
    total. ``clipped_fraction`` is the share of reconstructed intensity that
    was removed by clipping. A rank above the matrix dimension is capped
    (``capped=True``, with a warning).
    """
    if rank < 1:
        raise ValueError("rank must be at least 1")
    jsi = np.asarray(jsi, dtype=float)
    if np.any(jsi < 0):
        raise ValueError("JSI must be entrywise non-negative")
    full = min(jsi.shape)
    capped = rank > full
    if capped:
        warnings.warn(f"rank {rank} exceeds matrix dimension {full}; capped", RuntimeWarning, stacklevel=2)
        rank = full
    u, s, vh = np.linalg.svd(np.sqrt(jsi), full_matrices=False)
    amp = (u[:, :rank] * s[:rank]) @ vh[:rank]
    # the leading singular vectors of a non-negative matrix may come out
    # with a global sign flip
    if amp.sum() < 0:
        amp = -amp
    total_sq = float(np.sum(amp**2))
    neg = amp < 0
    clipped = float(np.sum(amp[neg] ** 2)) / total_sq if total_sq > 0 else 0.0
    out = np.where(neg, 0.0, amp) ** 2
    total = float(jsi.sum())
    if out.sum() > 0:
        out *= total / out.sum()
    return LowRankResult(out, rank, capped, clipped)


def marginals(jsa: JointSpectralAmplitude) -> tuple[np.ndarray, np.ndarray]:
    """Signal and idler marginal densities; each integrates to 1 over its axis."""
    inten = jsa.intensity()
    total = float(inten.sum() * jsa.cell)
    sig = inten.sum(axis=1) * jsa.i_axis.spacing / total
    idl = inten.sum(axis=0) * jsa.s_axis.spacing / total
    return sig, idl


# --------------------------------------------------------------------------
# ideal frequency-bin states
# --------------------------------------------------------------------------

# pump lobe offsets from the pump centre, in units of delta
PUMP_LAYOUTS = {
    "single": (0.0,),
    "c4": (-1.0, 1.0),
    "double-half": (-0.5, 0.5),
    "triple": (-1.0, 0.0, 1.0),
}

DEFAULT_DEGENERATE_NM = 1582.0


def bin_grid(delta: float, sigma: float, n_points: int = 512, center: float | None = None,
             margin: float = 6.0) -> SpectralAxis:
    """Square-grid axis centred on the degenerate frequency covering +-(delta + margin*sigma)."""
    if center is None:
        center = float(wavelength_to_omega(DEFAULT_DEGENERATE_NM))
    return SpectralAxis.centered(center, delta + margin * sigma, n_points)


def ideal_pump(kind: str, delta: float, sigma: float, axis: SpectralAxis, weights=None, phases=None) -> PumpEnvelope:
    """Multi-Gaussian pump envelope for a named lobe layout, on the sum-frequency axis."""
    if kind not in PUMP_LAYOUTS:
        raise ValueError(f"unknown pump layout {kind!r}; choose from {sorted(PUMP_LAYOUTS)}")
    offsets = PUMP_LAYOUTS[kind]
    weights = np.ones(len(offsets)) if weights is None else np.asarray(weights, dtype=float)
    phases = np.zeros(len(offsets)) if phases is None else np.asarray(phases, dtype=float)
    wp = 2.0 * axis.center
    sum_axis = SpectralAxis(wp, 2.0 * axis.values)
    comps = [(wp + o * delta, sigma, w, ph) for o, w, ph in zip(offsets, weights, phases)]
    return multi_gaussian_pef(sum_axis, comps)


def ideal_jsa(kind: str = "c4", delta: float = 6.0, sigma: float = 1.0, n_points: int = 512,
              phase_shift: str = "pi", center: float | None = None, axis: SpectralAxis | None = None,
              weights=None, phases=None) -> JointSpectralAmplitude:
    """Gaussian-model frequency-bin state: multi-Gaussian pump times double-Gaussian PMF.

    Pump lobes sit at ``wp + offset * delta`` (see ``PUMP_LAYOUTS``), PMF
    lobes at ``ws - wi = +-delta``; all widths are ``sigma``. The ``"c4"``
    layout gives the four-bin state with signal bins at w0 + {-delta, 0, delta}.
    """
    if axis is None:
        axis = bin_grid(delta, sigma, n_points, center)
    pef = ideal_pump(kind, delta, sigma, axis, weights, phases)
    pmf = gaussian_pmf_grid(axis, axis, delta, sigma, phase_shift)
    meta = {"layout": kind, "delta": delta, "sigma": sigma, "phase_shift": phase_shift}
    return assemble_jsa(pef, pmf, axis, axis, meta)


def bin_coefficients(kind: str, phase_shift: str = "pi") -> tuple[np.ndarray, np.ndarray]:
    """Discrete oracle for the well-separated limit.

    Returns the coefficient matrix A over signal x idler bin positions (in
    units of delta, relative to w0) and the sorted position list. Each pump
    lobe S and PMF lobe D = +-1 place a bin at ws = (S + D)/2, wi = (S - D)/2
    with amplitude sign(D) for the pi design.
    """
    offsets = PUMP_LAYOUTS[kind]
    cells = []
    for s in offsets:
        for d in (-1.0, 1.0):
            sign = d if phase_shift == "pi" else 1.0
            cells.append(((s + d) / 2, (s - d) / 2, sign))
    pos = sorted({c[0] for c in cells} | {c[1] for c in cells})
    idx = {p: n for n, p in enumerate(pos)}
    A = np.zeros((len(pos), len(pos)))
    for ws, wi, sign in cells:
        A[idx[ws], idx[wi]] += sign
    return A / np.linalg.norm(A), np.array(pos)


def design_slope(model: DispersionModel) -> float:
    """d dk / d ws at the degenerate design point (ps/mm)."""
    if hasattr(model, "slope"):
        return float(model.slope)
    return float(model.slopes()[0])


def crystal_jsa(model: DispersionModel, eps: float, xi: float, dk0: float | None = None,
                pump_wavelength_nm: float | None = None, kind: str = "c4", n_points: int = 512,
                crystal_length: float | None = None, margin: float = 8.0) -> JointSpectralAmplitude:
    """Frequency-bin state from a crystal PMF seen through a dispersion model.

    The pump lobes use the bin spacing and width implied by the crystal at its
    design point, ``delta = eps / (2 a)`` and ``sigma = xi / a`` with ``a`` the
    PMF slope. ``pump_wavelength_nm`` (default: half the degenerate
    wavelength) moves the pump centre while the crystal stays fixed. With
    ``crystal_length`` the finite-crystal PMF is used instead of the ideal
    double Gaussian.
    """
    if dk0 is None:
        dk0 = float(model.dk0)
    a = design_slope(model)
    delta = eps / (2.0 * abs(a))
    sigma = xi / abs(a)
    if pump_wavelength_nm is None:
        pump_wavelength_nm = model.degenerate_wavelength_nm / 2.0
    wp = float(wavelength_to_omega(pump_wavelength_nm))
    axis = bin_grid(delta, sigma, n_points, center=wp / 2.0, margin=margin)
    pef = ideal_pump(kind, delta, sigma, axis)
    target = None
    if crystal_length is not None:
        target = target_nonlinearity(crystal_length, dk0, eps, xi)
    pmf = pmf_grid_from_dispersion(axis, axis, model, dk0, eps, xi, target)
    meta = {"layout": kind, "delta": delta, "sigma": sigma, "pump_wavelength_nm": pump_wavelength_nm,
            "dispersion": model.kind, "finite_crystal": crystal_length is not None}
    return assemble_jsa(pef, pmf, axis, axis, meta)


def bin_window(jsa: JointSpectralAmplitude, ws_offset: float, wi_offset: float, half_width: float) -> np.ndarray:
    """Amplitude restricted to one bin: a square of +-half_width around (w0 + offsets)."""
    w0 = jsa.s_axis.center
    ms = np.abs(jsa.s_axis.values - w0 - ws_offset) < half_width
    mi = np.abs(jsa.i_axis.values - w0 - wi_offset) < half_width
    return jsa.values[np.ix_(ms, mi)]
