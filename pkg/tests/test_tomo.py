import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hyperspdc.tomo import (
    BELL_STATES,
    SETTINGS,
    DensityMatrix,
    ProjectionSet,
    TomographyError,
    basis_index,
    concurrence,
    fidelity,
    mle_reconstruct,
    monte_carlo_uncertainty,
    predicted_counts,
    projector,
    simulate_counts,
    werner_state,
)

PHI_PLUS = DensityMatrix.from_ket(BELL_STATES["phi+"])
MIXED = DensityMatrix(np.eye(4) / 4)


def _random_rho(seed, rank=4):
    rng = np.random.default_rng(seed)
    G = rng.normal(size=(4, rank)) + 1j * rng.normal(size=(4, rank))
    M = G @ G.conj().T
    return DensityMatrix(M / np.trace(M).real)


# ------------------------------------------------------------- projectors


def test_projector_examples():
    np.testing.assert_allclose(projector("H", "H"), np.diag([1, 0, 0, 0]), atol=1e-15)
    np.testing.assert_allclose(projector("D", "D"), np.full((4, 4), 0.25), atol=1e-15)
    total = sum(projector(a, b) for a in "HV" for b in "HV")
    np.testing.assert_allclose(total, np.eye(4), atol=1e-15)
    r = projector("R", "H")
    assert r[2, 0] == pytest.approx(0.5j)  # R = (H + iV)/sqrt2
    with pytest.raises(TomographyError):
        projector("H", "X")


@settings(max_examples=30)
@given(st.integers(0, 10_000))
def test_basis_completeness(seed):
    rho = _random_rho(seed)
    p = predicted_counts(rho, SETTINGS, 1.0)
    sums = np.zeros(9)
    for s, x in zip(SETTINGS, p):
        sums[basis_index(s)] += x
    np.testing.assert_allclose(sums, 1.0, atol=1e-10)


def test_predicted_counts_examples():
    N = 1000.0
    n = dict(zip(SETTINGS, predicted_counts(PHI_PLUS, SETTINGS, N)))
    assert n[("H", "V")] == pytest.approx(0.0, abs=1e-12)
    assert n[("D", "D")] == pytest.approx(N / 2)
    np.testing.assert_allclose(predicted_counts(MIXED, SETTINGS, N), N / 4)


def test_projection_set_validation(tmp_path):
    with pytest.raises(TomographyError):
        ProjectionSet(SETTINGS[:35], np.ones(35))
    with pytest.raises(TomographyError):
        ProjectionSet(SETTINGS[:35] + (SETTINGS[0],), np.ones(36))
    with pytest.raises(TomographyError):
        ProjectionSet(SETTINGS, -np.ones(36))
    ps = ProjectionSet(SETTINGS, np.arange(36.0))
    ps.to_csv(tmp_path / "p.csv")
    back = ProjectionSet.from_csv(tmp_path / "p.csv")
    assert back.settings == ps.settings
    np.testing.assert_array_equal(back.counts, ps.counts)


# ---------------------------------------------------------------- metrics


def test_fidelity_examples():
    assert fidelity(PHI_PLUS, "phi+") == pytest.approx(1.0)
    assert fidelity(MIXED, "psi-") == pytest.approx(0.25)
    assert fidelity(DensityMatrix.from_ket(BELL_STATES["psi+"]), "phi+") == pytest.approx(0.0, abs=1e-15)


def test_concurrence_examples():
    for name in BELL_STATES:
        assert concurrence(DensityMatrix.from_ket(BELL_STATES[name])) == pytest.approx(1.0, abs=1e-7)
    assert concurrence(MIXED) == pytest.approx(0.0, abs=1e-12)
    assert concurrence(DensityMatrix.from_ket([1, 0, 0, 0])) == pytest.approx(0.0, abs=1e-7)


@pytest.mark.parametrize("p", [0.2, 0.5, 0.8, 0.95])
def test_werner_concurrence(p):
    assert concurrence(werner_state(p)) == pytest.approx(max(0.0, (3 * p - 1) / 2), abs=1e-7)


@settings(max_examples=30)
@given(st.integers(0, 10_000), st.integers(1, 4))
def test_metric_bounds(seed, rank):
    rho = _random_rho(seed, rank)
    assert 0.0 <= concurrence(rho) <= 1.0
    psi = np.random.default_rng(seed).normal(size=4) + 0j
    assert 0.0 <= fidelity(rho, psi) <= 1.0


def test_density_matrix_validation(tmp_path):
    with pytest.raises(ValueError):
        DensityMatrix(np.eye(4))
    with pytest.raises(ValueError):
        DensityMatrix(np.diag([1.5, -0.5, 0, 0]))
    rho = _random_rho(3)
    rho.to_csv(tmp_path / "rho.csv")
    np.testing.assert_allclose(DensityMatrix.from_csv(tmp_path / "rho.csv").entries, rho.entries, atol=1e-15)


# -------------------------------------------------------------------- MLE


def test_noiseless_recovery():
    res = mle_reconstruct(ProjectionSet(SETTINGS, predicted_counts(PHI_PLUS, SETTINGS, 1e4)))
    assert fidelity(res.rho, "phi+") > 0.9999
    assert res.converged
    res = mle_reconstruct(ProjectionSet(SETTINGS, predicted_counts(MIXED, SETTINGS, 1e4)))
    assert res.rho.purity == pytest.approx(0.25, abs=1e-3)


@pytest.mark.parametrize("seed", range(3))
def test_recovers_general_states(seed):
    rho = _random_rho(seed)
    res = mle_reconstruct(ProjectionSet(SETTINGS, predicted_counts(rho, SETTINGS, 1e5)))
    np.testing.assert_allclose(res.rho.entries, rho.entries, atol=1e-6)


def test_per_basis_normalisation_is_free():
    # rescaling each basis independently leaves the estimate unchanged
    rho = _random_rho(7)
    N = np.linspace(500, 5000, 9)
    a = mle_reconstruct(ProjectionSet(SETTINGS, predicted_counts(rho, SETTINGS, N)))
    np.testing.assert_allclose(a.rho.entries, rho.entries, atol=1e-6)
    np.testing.assert_allclose(a.normalizations, N, rtol=1e-12)


def test_likelihood_monotone_and_physical():
    rng = np.random.default_rng(0)
    for _ in range(5):
        res = mle_reconstruct(simulate_counts(werner_state(0.9), 2000, rng))
        assert np.all(np.diff(res.loglik_history) >= -1e-12)
        m = res.rho.entries
        assert np.max(np.abs(m - m.conj().T)) < 1e-10
        assert abs(np.trace(m).real - 1) < 1e-10
        assert np.linalg.eigvalsh(m).min() > -1e-10


def test_all_zero_counts_rejected():
    with pytest.raises(TomographyError):
        mle_reconstruct(ProjectionSet(SETTINGS, np.zeros(36)))


def test_nonconvergence_is_reported():
    ps = simulate_counts(werner_state(0.9), 2000, np.random.default_rng(1))
    res = mle_reconstruct(ps, max_iter=1)
    assert not res.converged
    assert res.grad_norm > 1e-8


@pytest.mark.slow
def test_poisson_calibration():
    rng = np.random.default_rng(12345)
    good = 0
    for _ in range(100):
        res = mle_reconstruct(simulate_counts(PHI_PLUS, 1e4, rng))
        if fidelity(res.rho, "phi+") > 0.99 and concurrence(res.rho) > 0.98:
            good += 1
    assert good >= 95


# ------------------------------------------------------------ Monte Carlo


def test_monte_carlo_large_count_limit():
    ps = ProjectionSet(SETTINGS, predicted_counts(werner_state(0.9), SETTINGS, 1e10))
    u = monte_carlo_uncertainty(ps, 50, seed=1)
    assert u.std < 1e-3
    assert u.n_failed == 0


def test_monte_carlo_deterministic(monkeypatch):
    ps = simulate_counts(PHI_PLUS, 1e4, np.random.default_rng(3))
    a = monte_carlo_uncertainty(ps, 50, seed=9)
    monkeypatch.setenv("HYPERSPDC_THREADS", "4")
    b = monte_carlo_uncertainty(ps, 50, seed=9)
    assert (a.mean, a.std) == (b.mean, b.std)
    with pytest.raises(ValueError):
        monte_carlo_uncertainty(ps, 10)


def test_monte_carlo_failure_fraction():
    # a single count: about a third of the resamples are all-zero and cannot be reconstructed
    counts = np.zeros(36)
    counts[0] = 1
    with pytest.raises(RuntimeError, match="failed"):
        monte_carlo_uncertainty(ProjectionSet(SETTINGS, counts), 50, seed=0)


@pytest.mark.slow
def test_monte_carlo_spread_for_bell_counts():
    ps = simulate_counts(PHI_PLUS, 1e4, np.random.default_rng(2024))
    u = monte_carlo_uncertainty(ps, 100, seed=5)
    # spread in percentage points, the unit of quoted "(4)"-style digits
    assert 1e-3 <= 100 * u.std <= 1e-2
