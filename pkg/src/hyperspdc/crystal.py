"""Nonlinearity-profile targets, aperiodic poling synthesis and phase matching.

Lengths are in mm and wavevectors in 1/mm. The crystal occupies
``0 <= z <= L``; profiles and phase-matching integrals use the centred
coordinate ``zeta = z - L/2`` so that an even/odd target gives a real PMF.

Fourier convention linking a nonlinearity profile to its PMF::

    phi(dk) = 1/sqrt(2 pi) * integral g(zeta) exp(-i dk zeta) dzeta
"""

from __future__ import annotations

import json
import math
from importlib import resources
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .spectra import C_NM_PER_PS, omega_to_wavelength, wavelength_to_omega

# speed of light in mm/ps
C_MM_PER_PS = C_NM_PER_PS * 1e-6

# domain-size bounds quoted for the fabricated crystal
DESIGN_MIN_DOMAIN_MM = 0.009
DESIGN_POLING_PERIOD_MM = 0.023
DESIGN_LENGTH_MM = 30.0
DESIGN_EPSILON_PER_MM = 1.331


class PolingSynthesisError(RuntimeError):
    """Poling synthesis could not meet its constraints.

    ``fidelity`` is the best PMF fidelity achieved and ``pattern`` the
    pattern that achieved it.
    """

    def __init__(self, message, fidelity=None, pattern=None):
        super().__init__(message)
        self.fidelity = fidelity
        self.pattern = pattern


class DispersionRangeError(ValueError):
    """Frequency outside the validity range of a dispersion model."""


# --------------------------------------------------------------------------
# target profile and analytic PMF
# --------------------------------------------------------------------------


def _envelope(zeta, eps, xi):
    """Target profile with the carrier exp(i dk0 zeta) removed."""
    zeta = np.asarray(zeta, dtype=float)
    return 1j * np.sqrt(2.0 / np.pi) * np.sin(eps * zeta / 2.0) * np.exp(-(xi**2) * zeta**2 / 2.0)


@dataclass(frozen=True, eq=False)
class NonlinearityTarget:
    """Complex nonlinearity profile g sampled along the crystal.

    ``eps`` and ``xi`` are the double-Gaussian design parameters; they are
    ``None`` for custom profiles built with :meth:`from_envelope`.
    """

    L: float
    dk0: float
    eps: float | None
    xi: float | None
    z: np.ndarray
    g_samples: np.ndarray

    @classmethod
    def from_envelope(cls, L: float, dk0: float, envelope, n_z: int = 4001) -> "NonlinearityTarget":
        """Custom target ``envelope(zeta) * exp(i dk0 zeta)`` on the centred grid."""
        z = np.linspace(-L / 2.0, L / 2.0, int(n_z))
        env = np.broadcast_to(np.asarray(envelope(z), dtype=complex), z.shape)
        return cls(float(L), float(dk0), None, None, z, env * np.exp(1j * dk0 * z))

    @property
    def envelope_samples(self) -> np.ndarray:
        """g with the carrier exp(i dk0 zeta) removed."""
        return self.g_samples * np.exp(-1j * self.dk0 * self.z)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.g_samples)


def target_nonlinearity(L: float, dk0: float, eps: float, xi: float, n_z: int = 4001) -> NonlinearityTarget:
    """Sample g(z) = i sqrt(2/pi) sin(eps z/2) exp(i dk0 z - xi^2 z^2/2) on [-L/2, L/2]."""
    if L <= 0 or xi <= 0 or eps <= 0:
        raise ValueError("L, eps and xi must be positive")
    if n_z < 1000:
        raise ValueError("n_z must be at least 1000")
    z = np.linspace(-L / 2.0, L / 2.0, int(n_z))
    g = _envelope(z, eps, xi) * np.exp(1j * dk0 * z)
    return NonlinearityTarget(float(L), float(dk0), float(eps), float(xi), z, g)


def pmf_analytic(dk, dk0: float, eps: float, xi: float):
    """Antisymmetric double Gaussian centred at dk0 +- eps/2 with width xi."""
    if xi <= 0:
        raise ValueError("xi must be positive")
    dk = np.asarray(dk, dtype=float)
    pref = 1.0 / (np.sqrt(2.0 * np.pi) * xi)
    return pref * (
        np.exp(-((dk - dk0 - eps / 2.0) ** 2) / (2.0 * xi**2))
        - np.exp(-((dk - dk0 + eps / 2.0) ** 2) / (2.0 * xi**2))
    )


def pmf_finite_crystal(dk, target: NonlinearityTarget):
    """PMF of the sampled profile, i.e. the target truncated to the crystal.

    Unlike :func:`pmf_analytic` this keeps the side lobes caused by cutting
    the envelope at the crystal faces. Trapezoidal quadrature is applied to
    the demodulated (slowly varying) envelope.
    """
    dk = np.asarray(dk, dtype=float)
    w = np.full(target.z.size, target.z[1] - target.z[0])
    w[0] = w[-1] = 0.5 * w[0]
    env = target.envelope_samples * w
    kappa = dk.reshape(-1) - target.dk0
    out = np.empty(kappa.shape, dtype=complex)
    chunk = max(1, 2**22 // target.z.size)
    for a in range(0, kappa.size, chunk):
        out[a:a + chunk] = np.exp(-1j * np.outer(kappa[a:a + chunk], target.z)) @ env
    return (out / np.sqrt(2.0 * np.pi)).reshape(dk.shape)


# --------------------------------------------------------------------------
# poling patterns
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PolingPattern:
    """Ferroelectric domains: ``signs[j]`` applies on ``boundaries[j] <= z < boundaries[j+1]``."""

    boundaries: np.ndarray
    signs: np.ndarray
    min_domain: float = 0.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        b = np.array(self.boundaries, dtype=float)
        s = np.array(self.signs, dtype=int)
        if b.ndim != 1 or b.size < 2:
            raise ValueError("a poling pattern needs at least one domain")
        if s.size != b.size - 1:
            raise ValueError("need exactly one sign per domain")
        if np.any(np.diff(b) <= 0):
            raise ValueError("domain boundaries must be strictly increasing")
        if b[0] != 0.0:
            raise ValueError("the first boundary must be at z = 0")
        if not np.all(np.isin(s, (-1, 1))):
            raise ValueError("domain signs must be +1 or -1")
        if self.min_domain > 0 and np.min(np.diff(b)) < self.min_domain * (1.0 - 1e-12):
            raise ValueError(
                f"domain of width {np.min(np.diff(b)):.6g} mm is below the minimum {self.min_domain:.6g} mm"
            )
        b.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "boundaries", b)
        object.__setattr__(self, "signs", s)

    @property
    def length(self) -> float:
        return float(self.boundaries[-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.boundaries)

    @property
    def n_domains(self) -> int:
        return self.signs.size

    def merged(self) -> "PolingPattern":
        """Same pattern with adjacent equal-sign domains fused."""
        keep = np.concatenate(([True], self.signs[1:] != self.signs[:-1]))
        bounds = np.concatenate((self.boundaries[:-1][keep], [self.boundaries[-1]]))
        return PolingPattern(bounds, self.signs[keep], self.min_domain, dict(self.metadata))

    def sign_at(self, z):
        z = np.asarray(z, dtype=float)
        idx = np.clip(np.searchsorted(self.boundaries, z, side="right") - 1, 0, self.n_domains - 1)
        return self.signs[idx]

    def to_csv(self, path) -> None:
        """Rows of (boundary_mm, sign); the final boundary carries sign 0."""
        with open(path, "w") as fh:
            fh.write("boundary_mm,sign\n")
            for zb, sg in zip(self.boundaries[:-1], self.signs):
                fh.write(f"{zb:.12g},{int(sg)}\n")
            fh.write(f"{self.boundaries[-1]:.12g},0\n")

    @classmethod
    def from_csv(cls, path, min_domain: float = 0.0) -> "PolingPattern":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:-1, 1].astype(int), min_domain)


def pmf_from_poling(pattern: PolingPattern, dk, centered: bool = True):
    """Exact phase-matching integral of a +-1 domain pattern.

    Returns ``sum_j s_j (exp(-i dk z_{j+1}) - exp(-i dk z_j)) / (-i dk)``, the
    integral of s(z) exp(-i dk z) over the crystal. With ``centered=True``
    positions are measured from the crystal centre, which matches the
    convention of :func:`target_nonlinearity`. At dk = 0 the analytic limit
    ``sum_j s_j (z_{j+1} - z_j)`` is used.

    No 1/sqrt(2 pi) factor is applied: a single domain of length L gives
    ``L sinc(dk L / 2)``. Downstream code renormalises PMFs to unit peak.
    """
    dk = np.asarray(dk, dtype=float)
    flat = dk.reshape(-1)
    z = pattern.boundaries - (pattern.length / 2.0 if centered else 0.0)
    s = pattern.signs.astype(float)
    # sum_j s_j (E_{j+1} - E_j) = -s_0 E_0 + sum_{j>=1} (s_{j-1} - s_j) E_j + s_{n-1} E_n
    coeff = np.zeros(z.size)
    coeff[0] = -s[0]
    coeff[1:-1] = s[:-1] - s[1:]
    coeff[-1] = s[-1]
    nz = coeff != 0.0
    phases = np.exp(-1j * np.outer(flat, z[nz]))
    num = phases @ coeff[nz]
    out = np.empty(flat.shape, dtype=complex)
    small = np.abs(flat) < 1e-12
    out[~small] = num[~small] / (-1j * flat[~small])
    out[small] = float(np.sum(s * np.diff(z)))
    return out.reshape(dk.shape)


def pmf_fidelity(a, b) -> float:
    """|<a|b>|^2 / (<a|a><b|b>) for two sampled PMFs on the same grid."""
    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    return float(abs(np.vdot(a, b)) ** 2 / (np.vdot(a, a).real * np.vdot(b, b).real))


def _greedy_signs(zeta, cum, dk0, min_steps, first_min_steps):
    carrier = np.exp(-1j * dk0 * zeta)
    incr = (carrier[1:] - carrier[:-1]) / (-1j * dk0)
    n_steps = incr.size
    signs = np.empty(n_steps, dtype=int)
    acc = 0.0 + 0.0j
    # first cell: the sign that starts closer to the target
    current = -1 if abs(acc - incr[0] - cum[1]) < abs(acc + incr[0] - cum[1]) else 1
    run = 0
    needed = first_min_steps
    for n in range(n_steps):
        if run >= needed:
            keep = abs(acc + current * incr[n] - cum[n + 1])
            flip = abs(acc - current * incr[n] - cum[n + 1])
            if flip < keep:
                current = -current
                run = 0
                needed = min_steps
        acc += current * incr[n]
        signs[n] = current
        run += 1
    return signs


def _is_mirror_symmetric(target: NonlinearityTarget) -> bool:
    # g(-zeta) = conj(g(zeta)) makes the PMF real
    g = target.g_samples
    return bool(np.allclose(g[::-1], np.conj(g), rtol=0.0, atol=1e-9 * np.max(np.abs(g))))


def _cumulative(target: NonlinearityTarget, zeta, kappa):
    cs = cumulative_trapezoid(target.envelope_samples, target.z, initial=0.0)
    return kappa * (np.interp(zeta, target.z, cs.real) + 1j * np.interp(zeta, target.z, cs.imag))


def _cell_grid(length: float, h: float) -> np.ndarray:
    # uniform cells of width h; any remainder widens the last cell
    n = max(1, int(math.floor(length / h + 1e-9)))
    grid = np.arange(n + 1) * h
    grid[-1] = length
    return grid


def _track(target: NonlinearityTarget, min_domain: float, step: float, fill: float, mirror: bool):
    L = target.L
    kappa = fill * (2.0 / np.pi) / float(np.max(np.abs(target.envelope_samples)))
    m = max(1, int(math.ceil(min_domain / step - 1e-9)))
    # a hair wider than min_domain / m so that boundary round-off never
    # produces a domain narrower than min_domain
    h = min_domain / m * (1.0 + 1e-11)
    if mirror:
        zeta = _cell_grid(L / 2.0, h)
        cum = _cumulative(target, zeta, kappa) - _cumulative(target, np.array([0.0]), kappa)[0]
        half = _greedy_signs(zeta, cum, target.dk0, m, int(math.ceil(m / 2)))
        signs = np.concatenate((half[::-1], half))
        edges = np.concatenate((L / 2.0 - zeta[::-1], L / 2.0 + zeta[1:]))
    else:
        zeta = _cell_grid(L, h) - L / 2.0
        signs = _greedy_signs(zeta, _cumulative(target, zeta, kappa), target.dk0, m, m)
        edges = zeta + L / 2.0
    edges[0], edges[-1] = 0.0, L

    change = np.flatnonzero(signs[1:] != signs[:-1]) + 1
    bounds = np.concatenate(([0.0], edges[change], [L]))
    dom_signs = signs[np.concatenate(([0], change))]
    # short end domains are absorbed by their neighbours
    tol = 1e-9 * h
    if bounds.size > 2 and bounds[-1] - bounds[-2] < min_domain - tol:
        bounds = np.delete(bounds, -2)
        dom_signs = dom_signs[:-1]
    if bounds.size > 2 and bounds[1] - bounds[0] < min_domain - tol:
        bounds = np.delete(bounds, 1)
        dom_signs = dom_signs[1:]
    return bounds, dom_signs, kappa, h


def synthesize_poling(
    target: NonlinearityTarget,
    min_domain: float = DESIGN_MIN_DOMAIN_MM,
    base_period: float | None = None,
    grid_step: float | None = None,
    fill: float = 1.0,
    min_fidelity: float | None = None,
    mirror: bool | None = None,
) -> PolingPattern:
    """Greedy sub-coherence-length tracking of a nonlinearity target.

    Candidate boundaries sit on a uniform grid of ``grid_step`` (default a
    quarter of ``min_domain``, so the minimum domain is realisable exactly). Walking along the crystal, the domain sign
    for the next grid cell is chosen to minimise the distance between the
    realised demodulated amplitude ``int s(z) exp(-i dk0 z) dz`` and the
    scaled target amplitude ``kappa * int g_env dz``; a flip is only allowed
    once the running domain has reached ``min_domain``. The target is scaled
    so that its steepest part equals ``fill`` times the first-order QPM
    growth rate 2/pi.

    When the target satisfies g(-z) = conj(g(z)) about the crystal centre
    (``mirror=None`` detects this), only half the crystal is tracked,
    starting from the centre, and the pattern is mirrored. A mirror-symmetric
    pattern has a real PMF, so the relative phase of the PMF lobes is exact.

    Raises
    ------
    PolingSynthesisError
        If ``min_domain`` is at least half the base period (no first-order
        tracking possible), or if ``min_fidelity`` is given and the realised
        PMF falls short of it. The error carries the achieved fidelity.
    """
    if base_period is None:
        base_period = 2.0 * np.pi / target.dk0
    if grid_step is None:
        grid_step = min_domain / 4.0
    if min_domain <= 0 or grid_step <= 0:
        raise ValueError("min_domain and grid_step must be positive")
    if target.is_zero:
        return PolingPattern([0.0, target.L], [1], min_domain, {"kappa": 0.0, "fidelity": 1.0})

    if mirror is None:
        mirror = _is_mirror_symmetric(target)
    bounds, dom_signs, kappa, h = _track(target, min_domain, grid_step, fill, mirror)
    pattern = PolingPattern(bounds, dom_signs, min_domain)
    fid = realized_fidelity(pattern, target)
    widths = pattern.widths
    meta = {
        "kappa": kappa,
        "fidelity": fid,
        "grid_step_mm": h,
        "mirrored": bool(mirror),
        "min_domain_realized_mm": float(widths.min()),
        "max_domain_realized_mm": float(widths.max()),
        "n_domains": int(pattern.n_domains),
    }
    pattern = PolingPattern(bounds, dom_signs, min_domain, meta)
    if min_domain >= base_period / 2.0:
        raise PolingSynthesisError(
            f"min_domain {min_domain} mm cannot track a carrier of period {base_period} mm "
            f"(best fidelity {fid:.4f})", fid, pattern)
    if min_fidelity is not None and fid < min_fidelity:
        raise PolingSynthesisError(
            f"realised PMF fidelity {fid:.4f} below the requested {min_fidelity}", fid, pattern)
    return pattern


def design_dk_grid(target: NonlinearityTarget, n: int = 2001, half_width: float | None = None) -> np.ndarray:
    """Wavevector grid around dk0 covering both PMF lobes +- 6 xi."""
    if half_width is None:
        if target.xi is None:
            raise ValueError("half_width is required for a custom target")
        half_width = target.eps / 2.0 + 6.0 * target.xi
    return target.dk0 + np.linspace(-half_width, half_width, n)


def realized_fidelity(pattern: PolingPattern, target: NonlinearityTarget, dk=None) -> float:
    """Overlap of the pattern's PMF with the target's PMF near dk0.

    Double-Gaussian targets are compared with the analytic (untruncated) PMF,
    custom targets with the PMF of their sampled profile.
    """
    if dk is None:
        dk = design_dk_grid(target) if target.xi is not None else target.dk0 + np.linspace(-2.0, 2.0, 2001)
    if target.xi is not None:
        ref = pmf_analytic(dk, target.dk0, target.eps, target.xi)
    else:
        ref = pmf_finite_crystal(dk, target)
    return pmf_fidelity(pmf_from_poling(pattern, dk), ref)


def antinode_phase_difference(pattern: PolingPattern, target: NonlinearityTarget) -> float:
    """|arg phi(dk0 + eps/2) - arg phi(dk0 - eps/2)| wrapped into [0, pi]."""
    vals = pmf_from_poling(pattern, np.array([target.dk0 + target.eps / 2.0, target.dk0 - target.eps / 2.0]))
    diff = np.angle(vals[0]) - np.angle(vals[1])
    return float(abs(np.angle(np.exp(1j * diff))))


# --------------------------------------------------------------------------
# dispersion models
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearizedGVM:
    """First-order phase mismatch with symmetric group-velocity matching.

    ``dk = dk0 + slope * ((ws - w0) - (wi - w0))`` with ``w0`` half the
    degenerate pump frequency, so the PMF depends on ws - wi only.
    ``slope`` (ps/mm) equals ``(n_g,pump - n_g,signal) / c``.
    """

    dk0: float
    slope: float
    degenerate_wavelength_nm: float = 1582.0
    valid_half_width: float = 200.0
    kind: str = "linearized-GVM"

    @classmethod
    def from_group_indices(cls, dk0: float, n_g_signal: float, n_g_idler: float,
                           degenerate_wavelength_nm: float = 1582.0) -> "LinearizedGVM":
        # symmetric matching fixes the pump group index at the mean
        n_g_pump = 0.5 * (n_g_signal + n_g_idler)
        return cls(dk0, (n_g_pump - n_g_signal) / C_MM_PER_PS, degenerate_wavelength_nm)

    @classmethod
    def for_bins(cls, dk0: float, eps: float, delta: float,
                 degenerate_wavelength_nm: float = 1582.0) -> "LinearizedGVM":
        """Slope that puts the PMF lobes at ws - wi = +-delta."""
        return cls(dk0, eps / (2.0 * delta), degenerate_wavelength_nm)

    @property
    def omega0(self) -> float:
        return float(wavelength_to_omega(self.degenerate_wavelength_nm))

    def phase_mismatch(self, ws, wi):
        ws = np.asarray(ws, dtype=float)
        wi = np.asarray(wi, dtype=float)
        w0 = self.omega0
        if np.any(np.abs(ws - w0) > self.valid_half_width) or np.any(np.abs(wi - w0) > self.valid_half_width):
            raise DispersionRangeError(
                f"frequency outside +-{self.valid_half_width} rad/ps of the degenerate point {w0:.6g} rad/ps")
        return self.dk0 + self.slope * (ws - w0) - self.slope * (wi - w0)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "dk0_per_mm": self.dk0, "slope_ps_per_mm": self.slope,
                "degenerate_wavelength_nm": self.degenerate_wavelength_nm,
                "valid_half_width_rad_per_ps": self.valid_half_width}


@dataclass(frozen=True)
class SellmeierIndex:
    """n^2(lam) = A + sum_j B_j / (lam^2 - C_j) - D lam^2, lam in micrometres."""

    A: float
    B: tuple[float, ...] = ()
    C: tuple[float, ...] = ()
    D: float = 0.0
    valid_nm: tuple[float, float] = (400.0, 3000.0)

    def index(self, wavelength_nm):
        lam = np.asarray(wavelength_nm, dtype=float) * 1e-3
        lam2 = lam * lam
        n2 = self.A - self.D * lam2
        for b, c in zip(self.B, self.C):
            n2 = n2 + b / (lam2 - c)
        return np.sqrt(n2)

    def wavenumber(self, omega):
        """k(w) in 1/mm."""
        omega = np.asarray(omega, dtype=float)
        lam = omega_to_wavelength(omega)
        lo, hi = self.valid_nm
        if np.any(lam < lo) or np.any(lam > hi):
            raise DispersionRangeError(f"wavelength outside Sellmeier validity range [{lo}, {hi}] nm")
        return self.index(lam) * omega / C_MM_PER_PS

    def group_index(self, wavelength_nm, h: float = 1e-3):
        w = wavelength_to_omega(wavelength_nm)
        return (self.wavenumber(w + h) - self.wavenumber(w - h)) / (2.0 * h) * C_MM_PER_PS


@dataclass(frozen=True)
class SellmeierDispersion:
    """Full phase mismatch from per-role refractive-index tables.

    ``dk = k_p(ws + wi) - k_s(ws) - k_i(wi) - 2 pi / poling_period``; without
    a poling period the raw material mismatch is returned, which is what a
    nonlinearity profile with carrier exp(i dk0 z) compensates.
    """

    pump: SellmeierIndex
    signal: SellmeierIndex
    idler: SellmeierIndex
    degenerate_wavelength_nm: float = 1582.0
    poling_period_mm: float | None = None
    kind: str = "sellmeier-table"

    def phase_mismatch(self, ws, wi):
        ws = np.asarray(ws, dtype=float)
        wi = np.asarray(wi, dtype=float)
        dk = self.pump.wavenumber(ws + wi) - self.signal.wavenumber(ws) - self.idler.wavenumber(wi)
        if self.poling_period_mm:
            dk = dk - 2.0 * np.pi / self.poling_period_mm
        return dk

    @property
    def omega0(self) -> float:
        return float(wavelength_to_omega(self.degenerate_wavelength_nm))

    @property
    def dk0(self) -> float:
        w0 = self.omega0
        return float(self.phase_mismatch(w0, w0))

    def slopes(self, wavelength_nm: float | None = None, h: float = 1e-3) -> tuple[float, float]:
        """(d dk / d ws, d dk / d wi) at the degenerate point of ``wavelength_nm``."""
        lam = self.degenerate_wavelength_nm if wavelength_nm is None else wavelength_nm
        w0 = float(wavelength_to_omega(lam))
        ds = (self.phase_mismatch(w0 + h, w0) - self.phase_mismatch(w0 - h, w0)) / (2 * h)
        di = (self.phase_mismatch(w0, w0 + h) - self.phase_mismatch(w0, w0 - h)) / (2 * h)
        return float(ds), float(di)

    def to_dict(self) -> dict:
        def tab(t: SellmeierIndex):
            return {"A": t.A, "B": list(t.B), "C": list(t.C), "D": t.D, "valid_nm": list(t.valid_nm)}

        return {"kind": self.kind, "degenerate_wavelength_nm": self.degenerate_wavelength_nm,
                "poling_period_mm": self.poling_period_mm,
                "pump": tab(self.pump), "signal": tab(self.signal), "idler": tab(self.idler)}


DispersionModel = LinearizedGVM | SellmeierDispersion


def phase_mismatch(ws, wi, model: DispersionModel):
    """Phase mismatch dk(ws, wi) in 1/mm for either dispersion model kind."""
    return model.phase_mismatch(ws, wi)


def dispersion_from_dict(data: Mapping) -> DispersionModel:
    kind = data.get("kind", "linearized-GVM")
    if kind == "linearized-GVM":
        if "slope_ps_per_mm" in data:
            return LinearizedGVM(float(data["dk0_per_mm"]), float(data["slope_ps_per_mm"]),
                                 float(data.get("degenerate_wavelength_nm", 1582.0)),
                                 float(data.get("valid_half_width_rad_per_ps", 200.0)))
        return LinearizedGVM.from_group_indices(
            float(data["dk0_per_mm"]), float(data["group_index_signal"]), float(data["group_index_idler"]),
            float(data.get("degenerate_wavelength_nm", 1582.0)))
    if kind == "sellmeier-table":
        def tab(d):
            return SellmeierIndex(float(d["A"]), tuple(d.get("B", ())), tuple(d.get("C", ())),
                                  float(d.get("D", 0.0)), tuple(d.get("valid_nm", (400.0, 3000.0))))

        return SellmeierDispersion(tab(data["pump"]), tab(data["signal"]), tab(data["idler"]),
                                   float(data.get("degenerate_wavelength_nm", 1582.0)),
                                   data.get("poling_period_mm"))
    raise ValueError(f"unknown dispersion model kind {kind!r}")


def load_dispersion(path) -> DispersionModel:
    with open(path) as fh:
        return dispersion_from_dict(json.load(fh))


def example_dispersion() -> SellmeierDispersion:
    """Packaged KTP-like type-II Sellmeier example, degenerate at 1582 nm."""
    text = resources.files("hyperspdc").joinpath("data/ktp_type2_example.json").read_text()
    return dispersion_from_dict(json.loads(text))


def symmetric_gvm_mismatch(model: SellmeierDispersion, wavelength_nm: float | None = None) -> float:
    """d dk/d ws + d dk/d wi; zero when the group velocities are symmetrically matched."""
    ds, di = model.slopes(wavelength_nm)
    return ds + di


def pmf_on_grid(s_values: Sequence[float], i_values: Sequence[float], model: DispersionModel,
                dk0: float, eps: float, xi: float):
    """Analytic double-Gaussian PMF evaluated through a dispersion model on a 2-D grid."""
    ws = np.asarray(s_values, dtype=float)[:, None]
    wi = np.asarray(i_values, dtype=float)[None, :]
    return pmf_analytic(model.phase_mismatch(ws, wi), dk0, eps, xi)
