import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hyperspdc.hom import (
    FitError,
    HeraldedState,
    HomTrace,
    counts_trace,
    default_delays,
    dominant_frequency,
    fit_trace,
    heralded_density,
    inter_fit_model,
    inter_pair_trace,
    intra_exact_model,
    intra_fit_model,
    intra_pair_trace,
)
from hyperspdc.jsa import JointSpectralAmplitude, ideal_jsa
from hyperspdc.spectra import SpectralAxis


@pytest.fixture(scope="module")
def c4_pi():
    return ideal_jsa("c4", 6.0, 1.0, 256, phase_shift="pi").normalized()


@pytest.fixture(scope="module")
def c4_zero():
    return ideal_jsa("c4", 6.0, 1.0, 256, phase_shift="zero").normalized()


def _overlap_loop(F, cell):
    # independent of the vectorised path: explicit double loop
    n = F.shape[0]
    total = 0j
    for a in range(n):
        for b in range(n):
            total += np.conj(F[a, b]) * F[b, a]
    return total * cell


def _random_jsa(seed, n=24):
    rng = np.random.default_rng(seed)
    axis = SpectralAxis(1190.0, np.linspace(1180.0, 1200.0, n))
    F = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return JointSpectralAmplitude(axis, axis, F).normalized()


# ---------------------------------------------------------------- intra trace


def test_antisymmetric_and_symmetric_limits():
    axis = SpectralAxis(0.0, np.linspace(-5, 5, 41))
    rng = np.random.default_rng(1)
    A = rng.normal(size=(41, 41))
    anti = JointSpectralAmplitude(axis, axis, A - A.T).normalized()
    sym = JointSpectralAmplitude(axis, axis, A + A.T).normalized()
    assert intra_pair_trace(anti, [0.0]).probability[0] == pytest.approx(1.0, abs=1e-12)
    assert intra_pair_trace(sym, [0.0]).probability[0] == pytest.approx(0.0, abs=1e-12)


def test_non_square_grid_rejected():
    s = SpectralAxis(0.0, np.linspace(-1, 1, 10))
    i = SpectralAxis(0.0, np.linspace(-1, 1, 12))
    with pytest.raises(ValueError):
        intra_pair_trace(JointSpectralAmplitude(s, i, np.ones((10, 12))), [0.0])


@pytest.mark.parametrize("phase", ["pi", "zero"])
def test_gaussian_jsa_matches_closed_form(phase):
    jsa = ideal_jsa("c4", 6.0, 1.0, 512, phase_shift=phase).normalized()
    d = default_delays(1.0)
    trace = intra_pair_trace(jsa, d)
    assert np.max(np.abs(trace.probability - intra_fit_model(d, 1.0, 6.0, 1.0, phase))) < 1e-3


@pytest.mark.parametrize("seed", range(4))
def test_zero_delay_identity(seed):
    jsa = _random_jsa(seed)
    S = _overlap_loop(jsa.values, jsa.cell)
    p0 = intra_pair_trace(jsa, [0.0]).probability[0]
    assert p0 == pytest.approx((1 - S.real) / 2, abs=1e-9)


def test_trace_symmetric_for_real_jsa(c4_pi, c4_zero):
    d = default_delays(1.0)
    for jsa in (c4_pi, c4_zero):
        p = intra_pair_trace(jsa, d).probability
        assert np.max(np.abs(p - p[::-1])) < 1e-9


def test_baseline_far_from_zero_delay(c4_pi):
    d = np.linspace(-10, 10, 401)
    p = intra_pair_trace(c4_pi, d).probability
    assert np.mean(p[np.abs(d) > 6.0]) == pytest.approx(0.5, abs=1e-3)
    assert abs(p[0] - 0.5) < 0.01 and abs(p[-1] - 0.5) < 0.01


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_probability_bounded(seed):
    jsa = _random_jsa(seed, n=16)
    p = intra_pair_trace(jsa, np.linspace(-3, 3, 31)).probability
    assert np.all(p >= 0) and np.all(p <= 1)


def test_trace_csv_round_trip(tmp_path, c4_pi):
    d = default_delays(1.0, n=21)
    tr = counts_trace(d, intra_pair_trace(c4_pi, d).probability, 1000.0, np.random.default_rng(0))
    tr.to_csv(tmp_path / "t.csv")
    back = HomTrace.from_csv(tmp_path / "t.csv")
    np.testing.assert_array_equal(back.delays, tr.delays)
    np.testing.assert_array_equal(back.counts, tr.counts)


# ------------------------------------------------------------- closed forms


def test_closed_form_values():
    assert intra_fit_model(0.0, 1.0, 5.0, 1.0, "pi") == pytest.approx(1.0)
    assert intra_fit_model(0.0, 1.0, 5.0, 1.0, "zero") == pytest.approx(0.0)
    assert intra_fit_model(np.pi / 5, 1.0, 5.0, 1.0, "pi") == pytest.approx(0.5 - 0.5 * np.exp(-np.pi**2 / 100))
    assert intra_fit_model(np.pi / 5, 1.0, 5.0, 1.0, "pi") == pytest.approx(0.0470, abs=5e-5)
    # frozen from direct evaluation of the exact model
    assert intra_exact_model(np.pi / 2, 1.0, 2.0, 1.0) == pytest.approx(0.22011097, abs=1e-8)
    assert intra_exact_model(0.0, 1.0, 2.0, 1.0) == pytest.approx(1.0)
    assert inter_fit_model(0.0, 1.0, 6.0, 1.0) == pytest.approx(0.25)
    tau = np.pi / 12
    assert inter_fit_model(tau, 1.0, 6.0) == pytest.approx(0.5 - 2 / 16 * np.exp(-(np.pi**2) / (16 * 36)))


def test_exact_model_reduces_to_approximation():
    tau = np.linspace(-10, 10, 301)
    for delta in (6.0, 8.0):
        assert np.max(np.abs(intra_exact_model(tau, 1.0, delta) - intra_fit_model(tau, 1.0, delta))) < 1e-15


# ---------------------------------------------------------- heralded/inter


def test_heralded_density_properties(c4_pi):
    st_ = heralded_density(c4_pi)
    assert st_.trace == pytest.approx(1.0, abs=1e-10)
    assert np.allclose(st_.rho, st_.rho.conj().T, atol=1e-14)
    ev = np.linalg.eigvalsh(st_.rho)
    assert ev.min() > -1e-10 * ev.max()
    assert st_.purity == pytest.approx(0.5, abs=1e-9)


def test_separable_state_is_pure():
    axis = SpectralAxis(0.0, np.linspace(-5, 5, 64))
    g = np.exp(-axis.values**2)
    h = np.exp(-(axis.values - 1) ** 2 / 2) * np.exp(0.3j * axis.values)
    st_ = heralded_density(JointSpectralAmplitude(axis, axis, np.outer(g, h)).normalized())
    assert st_.purity == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.matrix_rank(st_.rho * axis.spacing, tol=1e-10) == 1
    assert inter_pair_trace(st_, [0.0]).probability[0] == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_inter_zero_delay_identity(seed):
    st_ = heralded_density(_random_jsa(seed))
    assert inter_pair_trace(st_, [0.0]).probability[0] == pytest.approx(0.5 - st_.purity / 2, abs=1e-9)


def test_inter_trace_matches_closed_form():
    jsa = ideal_jsa("c4", 6.0, 1.0, 512).normalized()
    d = default_delays(1.0)
    tr = inter_pair_trace(heralded_density(jsa), d)
    assert tr.probability[100] == pytest.approx(0.25, abs=1e-9)
    assert np.max(np.abs(tr.probability - inter_fit_model(d, 1.0, 6.0))) < 1e-3


def test_non_hermitian_rejected():
    axis = SpectralAxis(0.0, np.linspace(-1, 1, 8))
    rho = np.eye(8, dtype=complex)
    rho[0, 1] = 0.1
    with pytest.raises(ValueError):
        inter_pair_trace(HeraldedState(axis, rho), [0.0])


def test_frequency_doubling(c4_pi):
    d = np.linspace(-10, 10, 400, endpoint=False)
    intra = intra_pair_trace(c4_pi, d).probability
    inter = inter_pair_trace(heralded_density(c4_pi), d).probability
    # skip the envelope band of the non-oscillating inter-pair dip
    f1, f2 = dominant_frequency(d, intra, 3.0), dominant_frequency(d, inter, 3.0)
    step = 2 * np.pi / (d[1] - d[0]) / d.size
    assert round(f2 / step) == 2 * round(f1 / step)


# ------------------------------------------------------------------ fitting


def test_fit_recovers_noiseless_parameters():
    d = default_delays(1.0)
    p = intra_fit_model(d, 1.0, 6.0, 0.9, "pi")
    fit = fit_trace(counts_trace(d, p, 1000.0), "intra-pi")
    assert fit.sigma == pytest.approx(1.0, rel=1e-6)
    assert fit.delta == pytest.approx(6.0, rel=1e-6)
    assert fit.V == pytest.approx(0.9, rel=1e-6)
    assert fit.baseline == pytest.approx(2000.0, rel=1e-6)


def test_fit_inter_model():
    d = default_delays(1.0)
    p = inter_fit_model(d, 1.0, 6.0, 0.8)
    fit = fit_trace(counts_trace(d, p, 500.0), "inter")
    assert fit.V == pytest.approx(0.8, rel=1e-6)
    assert fit.delta == pytest.approx(6.0, rel=1e-6)


@pytest.mark.slow
def test_fit_uncertainty_calibrated():
    rng = np.random.default_rng(2024)
    d = default_delays(1.0)
    p = intra_fit_model(d, 1.0, 6.0, 0.9, "pi")
    misses = 0
    for _ in range(100):
        fit = fit_trace(counts_trace(d, p, 1000.0, rng), "intra-pi")
        assert 0.0 <= fit.V <= 1.0
        if abs(fit.V - 0.9) > 3 * fit.stderr[2]:
            misses += 1
    # a 3-sigma band misses 0.27% of the time; allow a few
    assert misses <= 3


def test_model_selection(c4_zero):
    d = default_delays(1.0)
    p = intra_pair_trace(c4_zero, d).probability
    tr = counts_trace(d, p, 1000.0, np.random.default_rng(5))
    right = fit_trace(tr, "intra-0")
    wrong = fit_trace(tr, "intra-pi")
    assert wrong.residual_norm >= 10 * right.residual_norm


def test_fit_preconditions_and_errors():
    d = np.linspace(-1, 1, 5)
    with pytest.raises(ValueError):
        fit_trace(counts_trace(d, intra_fit_model(d, 1, 6), 100.0), "intra-pi")
    d = np.linspace(-0.1, 0.1, 20)
    with pytest.raises(ValueError):
        fit_trace(counts_trace(d, intra_fit_model(d, 1, 6), 100.0), "intra-pi", guess=(1.0, 6.0, 1.0, 200.0))
    d = default_delays(1.0)
    tr = counts_trace(d, intra_fit_model(d, 1, 6, 0.7), 100.0, np.random.default_rng(0))
    with pytest.raises(FitError) as err:
        fit_trace(tr, "intra-pi", guess=(0.3, 5.0, 0.5, 150.0), max_nfev=2)
    assert err.value.best is not None and len(err.value.best) == 4


def test_fit_outcome_json(tmp_path):
    import json

    d = default_delays(1.0)
    fit = fit_trace(counts_trace(d, intra_fit_model(d, 1, 6, 0.9), 1000.0), "intra-pi")
    fit.save(tmp_path / "fit.json")
    data = json.loads((tmp_path / "fit.json").read_text())
    assert data["model"] == "intra-pi"
    assert np.array(data["covariance"]).shape == (4, 4)
