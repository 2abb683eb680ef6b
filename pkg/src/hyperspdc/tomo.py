"""Two-qubit polarisation tomography from 36 projective measurements.

Basis order for density matrices is HH, HV, VH, VV. Single-photon states are
H, V, D = (H+V)/sqrt2, A = (H-V)/sqrt2, R = (H + iV)/sqrt2, L = (H - iV)/sqrt2.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import product

import numpy as np

# sign of the V component of R; flipping it conjugates reconstructed coherences
R_HANDEDNESS = 1.0

_S = 1 / np.sqrt(2)
STATES = {
    "H": np.array([1, 0], dtype=complex),
    "V": np.array([0, 1], dtype=complex),
    "D": np.array([_S, _S], dtype=complex),
    "A": np.array([_S, -_S], dtype=complex),
    "R": np.array([_S, 1j * R_HANDEDNESS * _S], dtype=complex),
    "L": np.array([_S, -1j * R_HANDEDNESS * _S], dtype=complex),
}
LABELS = "HVDARL"
SETTINGS = tuple(product(LABELS, repeat=2))
_BASIS_OF = {"H": 0, "V": 0, "D": 1, "A": 1, "R": 2, "L": 2}

BELL_STATES = {
    "phi+": np.array([1, 0, 0, 1], dtype=complex) * _S,
    "phi-": np.array([1, 0, 0, -1], dtype=complex) * _S,
    "psi+": np.array([0, 1, 1, 0], dtype=complex) * _S,
    "psi-": np.array([0, 1, -1, 0], dtype=complex) * _S,
}


class TomographyError(ValueError):
    pass


def _ket(a: str, b: str) -> np.ndarray:
    if a not in STATES or b not in STATES:
        raise TomographyError(f"unknown projection label in {(a, b)}; use {LABELS}")
    return np.kron(STATES[a], STATES[b])


def projector(a: str, b: str) -> np.ndarray:
    """Rank-1 projector |ab><ab|."""
    k = _ket(a, b)
    return np.outer(k, k.conj())


def basis_index(setting) -> int:
    """Which of the 9 two-qubit bases (HV/DA/RL per photon) a setting belongs to."""
    a, b = setting
    return 3 * _BASIS_OF[a] + _BASIS_OF[b]


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    entries: np.ndarray

    def __post_init__(self):
        m = np.array(self.entries, dtype=complex)
        if m.shape != (4, 4):
            raise ValueError("two-qubit density matrix must be 4x4")
        if np.max(np.abs(m - m.conj().T)) > 1e-10:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m).real - 1) > 1e-10:
            raise ValueError("density matrix trace differs from 1")
        if np.linalg.eigvalsh(m).min() < -1e-10:
            raise ValueError("density matrix has negative eigenvalues")
        object.__setattr__(self, "entries", m)

    @property
    def purity(self) -> float:
        return float(np.real(np.trace(self.entries @ self.entries)))

    @classmethod
    def from_ket(cls, psi) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    def to_csv(self, path) -> None:
        """Real part then imaginary part as two 4x4 blocks."""
        with open(path, "w") as fh:
            fh.write("# real\n")
            np.savetxt(fh, self.entries.real, delimiter=",", fmt="%.17g")
            fh.write("# imag\n")
            np.savetxt(fh, self.entries.imag, delimiter=",", fmt="%.17g")

    @classmethod
    def from_csv(cls, path) -> "DensityMatrix":
        data = np.loadtxt(path, delimiter=",", comments="#")
        return cls(data[:4] + 1j * data[4:8])


def werner_state(p: float, target: str = "phi+") -> DensityMatrix:
    psi = BELL_STATES[target]
    return DensityMatrix(p * np.outer(psi, psi.conj()) + (1 - p) * np.eye(4) / 4)


@dataclass(frozen=True, eq=False)
class ProjectionSet:
    settings: tuple
    counts: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        settings = tuple((str(a), str(b)) for a, b in self.settings)
        if len(settings) != 36 or len(set(settings)) != 36:
            raise TomographyError("exactly 36 distinct settings are required")
        for s in settings:
            _ket(*s)
        c = np.array(self.counts, dtype=float)
        if c.shape != (36,):
            raise TomographyError("one count per setting is required")
        if np.any(c < 0) or not np.all(np.isfinite(c)):
            raise TomographyError("counts must be finite and non-negative")
        object.__setattr__(self, "settings", settings)
        object.__setattr__(self, "counts", c)

    def kets(self) -> np.ndarray:
        return np.array([_ket(a, b) for a, b in self.settings])

    def basis_totals(self) -> np.ndarray:
        tot = np.zeros(9)
        for s, n in zip(self.settings, self.counts):
            tot[basis_index(s)] += n
        return tot

    def with_counts(self, counts) -> "ProjectionSet":
        return ProjectionSet(self.settings, counts, dict(self.metadata))

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("setting_a,setting_b,counts\n")
            for (a, b), n in zip(self.settings, self.counts):
                fh.write(f"{a},{b},{n:.17g}\n")

    @classmethod
    def from_csv(cls, path) -> "ProjectionSet":
        settings, counts = [], []
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            if header[:3] != ["setting_a", "setting_b", "counts"]:
                raise TomographyError(f"{path}: expected header setting_a,setting_b,counts")
            for line in fh:
                if not line.strip():
                    continue
                a, b, n = line.strip().split(",")
                settings.append((a.strip(), b.strip()))
                counts.append(float(n))
        return cls(tuple(settings), np.array(counts))


def predicted_counts(rho, settings=SETTINGS, n_per_basis=1.0) -> np.ndarray:
    """Expected counts N_k Tr(rho Pi_s); ``n_per_basis`` is a scalar or one value per basis."""
    m = rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    kets = np.array([_ket(a, b) for a, b in settings])
    p = np.real(np.einsum("si,ij,sj->s", kets.conj(), m, kets))
    N = np.broadcast_to(np.asarray(n_per_basis, dtype=float), (9,))
    return np.array([N[basis_index(s)] for s in settings]) * np.clip(p, 0.0, None)


def simulate_counts(rho, n_per_basis: float, rng, settings=SETTINGS) -> ProjectionSet:
    mean = predicted_counts(rho, settings, n_per_basis)
    return ProjectionSet(settings, rng.poisson(mean).astype(float))


# --------------------------------------------------------------------------
# maximum likelihood
# --------------------------------------------------------------------------

_UPPER = [(a, b) for a in range(4) for b in range(a, 4)]


def _unpack(t: np.ndarray) -> np.ndarray:
    T = np.zeros((4, 4), dtype=complex)
    k = 0
    for a, b in _UPPER:
        if a == b:
            T[a, b] = t[k]
            k += 1
        else:
            T[a, b] = t[k] + 1j * t[k + 1]
            k += 2
    return T


def _pack(T: np.ndarray) -> np.ndarray:
    out = []
    for a, b in _UPPER:
        if a == b:
            out.append(T[a, b].real)
        else:
            out.extend([T[a, b].real, T[a, b].imag])
    return np.array(out)


def rho_from_params(t) -> np.ndarray:
    """rho = T^H T / Tr(T^H T) with T upper triangular from 16 reals."""
    T = _unpack(np.asarray(t, dtype=float))
    M = T.conj().T @ T
    return M / np.real(np.trace(M))


def _probs_and_jac(t, kets):
    T = _unpack(t)
    M = T.conj().T @ T
    tau = np.real(np.trace(M))
    Tpsi = kets @ T.T  # (s, a) = (T psi_s)_a
    p = np.sum(np.abs(Tpsi) ** 2, axis=1) / tau
    J = np.empty((kets.shape[0], 16))
    k = 0
    for a, b in _UPPER:
        for c in ((1.0,) if a == b else (1.0, 1j)):
            dnum = 2 * np.real(np.conj(c * kets[:, b]) * Tpsi[:, a])
            dtr = 2 * np.real(np.conj(c) * T[a, b])
            J[:, k] = (dnum - p * dtr) / tau
            k += 1
    return p, J


def linear_inversion(pset: ProjectionSet) -> np.ndarray:
    """Least-squares rho from per-basis frequencies, projected onto physical states."""
    tot = pset.basis_totals()
    freqs = np.array([n / tot[basis_index(s)] if tot[basis_index(s)] > 0 else 0.0
                      for s, n in zip(pset.settings, pset.counts)])
    kets = pset.kets()
    # p_s = <psi_s| rho |psi_s> is linear in the 16 real entries of rho
    A = np.real(np.einsum("si,sj->sij", kets.conj(), kets)).reshape(36, 16)
    B = np.imag(np.einsum("si,sj->sij", kets.conj(), kets)).reshape(36, 16)
    x, *_ = np.linalg.lstsq(np.hstack([A, -B]), freqs, rcond=None)
    rho = (x[:16] + 1j * x[16:]).reshape(4, 4)
    rho = 0.5 * (rho + rho.conj().T)
    w, v = np.linalg.eigh(rho)
    w = np.clip(w, 0.0, None)
    if w.sum() == 0:
        return np.eye(4) / 4
    rho = (v * w) @ v.conj().T
    return rho / np.real(np.trace(rho))


@dataclass(frozen=True, eq=False)
class MLEResult:
    rho: DensityMatrix
    converged: bool
    grad_norm: float
    n_iter: int
    loglik_history: list
    normalizations: np.ndarray


def _loglik(p, counts):
    return float(np.sum(counts * np.log(np.maximum(p, 1e-300))))


def _gradient(t, kets, counts):
    p, J = _probs_and_jac(t, kets)
    return J.T @ (counts / np.maximum(p, 1e-300))


def _hessian(t, kets, counts, h=1e-6):
    # central differences of the analytic gradient, symmetrised
    H = np.empty((16, 16))
    for k in range(16):
        e = np.zeros(16)
        e[k] = h
        H[:, k] = (_gradient(t + e, kets, counts) - _gradient(t - e, kets, counts)) / (2 * h)
    return 0.5 * (H + H.T)


def mle_reconstruct(pset: ProjectionSet, max_iter: int = 200, tol: float = 1e-8) -> MLEResult:
    """Poisson maximum-likelihood state with per-basis normalisation.

    For each complete two-qubit basis the normalisation that maximises the
    likelihood is the basis total, so the objective reduces to
    sum_s n_s log p_s. It is maximised over the 16 real Cholesky parameters
    with a damped Newton iteration (Gauss-Newton/Fisher term plus the
    curvature of p itself, which the Fisher term alone misses for
    rank-deficient states) and a Levenberg-style backtracking that only
    accepts steps that do not lower the likelihood. Convergence: gradient
    norm of the per-count log-likelihood below ``tol``.
    """
    counts = pset.counts
    if counts.sum() <= 0:
        raise TomographyError("all counts are zero")
    totals = pset.basis_totals()
    scale = counts.sum()
    kets = pset.kets()
    rho0 = 0.999 * linear_inversion(pset) + 0.001 * np.eye(4) / 4
    t = _pack(np.linalg.cholesky(rho0).conj().T)
    p, J = _probs_and_jac(t, kets)
    ll = _loglik(p, counts)
    history = [ll / scale]
    lam = 1e-3
    gnorm = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        grad = J.T @ (counts / np.maximum(p, 1e-300))
        gnorm = float(np.linalg.norm(grad) / scale)
        if gnorm < tol:
            break
        negH = -_hessian(t, kets, counts)
        d = np.abs(np.diag(negH)) + 1e-12 * scale
        accepted = False
        for _ in range(60):
            A = negH + lam * np.diag(d)
            try:
                np.linalg.cholesky(A)
            except np.linalg.LinAlgError:
                lam = max(lam * 4.0, 1e-6)
                continue
            t_new = t + np.linalg.solve(A, grad)
            p_new, J_new = _probs_and_jac(t_new, kets)
            ll_new = _loglik(p_new, counts)
            if np.isfinite(ll_new) and ll_new >= ll:
                accepted = True
                break
            lam = max(lam * 4.0, 1e-6)
        if not accepted:
            break
        t, p, J, ll = t_new, p_new, J_new, ll_new
        history.append(ll / scale)
        lam = lam / 5.0
    rho = rho_from_params(t)
    rho = 0.5 * (rho + rho.conj().T)
    return MLEResult(DensityMatrix(rho), gnorm < tol, gnorm, it, history, totals)


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------


def _matrix(rho) -> np.ndarray:
    return rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)


def fidelity(rho, target) -> float:
    """<psi|rho|psi> for a pure target given as a ket or a name from BELL_STATES."""
    psi = BELL_STATES[target] if isinstance(target, str) else np.asarray(target, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    return float(np.clip(np.real(psi.conj() @ _matrix(rho) @ psi), 0.0, 1.0))


_SYSY = np.kron(np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]]))


def concurrence(rho) -> float:
    """Wootters concurrence."""
    m = _matrix(rho)
    tilde = _SYSY @ m.conj() @ _SYSY
    ev = np.linalg.eigvals(m @ tilde)
    lam = np.sort(np.sqrt(np.clip(np.real(ev), 0.0, None)))[::-1]
    return float(np.clip(lam[0] - lam[1] - lam[2] - lam[3], 0.0, 1.0))


def purity(rho) -> float:
    m = _matrix(rho)
    return float(np.real(np.trace(m @ m)))


# --------------------------------------------------------------------------
# Monte Carlo
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MCUncertainty:
    mean: float
    std: float
    n_trials: int
    n_failed: int
    values: np.ndarray


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("HYPERSPDC_THREADS", "1")))
    except ValueError:
        return 1


def _metric_fn(metric, target):
    if callable(metric):
        return metric
    if metric == "fidelity":
        return lambda r: fidelity(r, target)
    if metric == "concurrence":
        return concurrence
    if metric == "purity":
        return purity
    raise ValueError(f"unknown metric {metric!r}")


def monte_carlo_metrics(pset: ProjectionSet, n_trials: int = 100, seed: int = 0,
                        metrics=("fidelity", "concurrence"), target="phi+",
                        max_fail_fraction: float = 0.1) -> dict:
    """Poisson-resample the counts, reconstruct each trial and summarise every metric.

    All metrics are evaluated on the same resampled reconstructions. Trial k
    uses its own child seed, so results do not depend on the number of worker
    threads (``HYPERSPDC_THREADS``). Returns ``{metric name: MCUncertainty}``.
    """
    if n_trials < 50:
        raise ValueError("at least 50 trials are required")
    fns = [_metric_fn(m, target) for m in metrics]
    names = [m if isinstance(m, str) else getattr(m, "__name__", f"metric{k}") for k, m in enumerate(metrics)]
    seeds = np.random.SeedSequence(seed).spawn(n_trials)

    def trial(ss):
        rng = np.random.default_rng(ss)
        try:
            res = mle_reconstruct(pset.with_counts(rng.poisson(pset.counts).astype(float)))
        except (TomographyError, np.linalg.LinAlgError, ValueError):
            return None
        return [fn(res.rho) for fn in fns]

    n_threads = _threads()
    if n_threads > 1:
        with ThreadPoolExecutor(n_threads) as ex:
            out = list(ex.map(trial, seeds))
    else:
        out = [trial(s) for s in seeds]
    ok = [v for v in out if v is not None]
    failed = n_trials - len(ok)
    if failed > max_fail_fraction * n_trials:
        raise RuntimeError(f"{failed} of {n_trials} Monte Carlo reconstructions failed")
    table = np.array(ok, dtype=float).reshape(len(ok), len(fns))
    return {name: MCUncertainty(float(col.mean()), float(col.std(ddof=1)), n_trials, failed, col)
            for name, col in zip(names, table.T)}


def monte_carlo_uncertainty(pset: ProjectionSet, n_trials: int = 100, seed: int = 0,
                            metric="fidelity", target="phi+", max_fail_fraction: float = 0.1) -> MCUncertainty:
    """Single-metric form of :func:`monte_carlo_metrics`."""
    res = monte_carlo_metrics(pset, n_trials, seed, (metric,), target, max_fail_fraction)
    return next(iter(res.values()))


def summary(result: MLEResult, target="phi+", mc: dict | None = None) -> dict:
    out = {
        "fidelity": fidelity(result.rho, target),
        "concurrence": concurrence(result.rho),
        "purity": result.rho.purity,
        "converged": result.converged,
        "grad_norm": result.grad_norm,
        "iterations": result.n_iter,
    }
    if mc:
        for name, u in mc.items():
            out[f"{name}_mc_mean"] = u.mean
            out[f"{name}_mc_std"] = u.std
            out[f"{name}_mc_failed"] = u.n_failed
    return out
