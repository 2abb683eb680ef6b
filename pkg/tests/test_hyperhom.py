import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hyperspdc.hom import default_delays, dominant_frequency, intra_fit_model, intra_pair_trace
from hyperspdc.hyperhom import (
    DETECTORS,
    PAIRS,
    HyperState,
    PortPairTrace,
    basis_change,
    beam_splitter_amplitudes,
    bell_coefficients,
    no_coincidence_probability,
    polarised_hom_trace,
)
from hyperspdc.jsa import ideal_jsa

TOL = 1e-10


@pytest.fixture(scope="module")
def anti():
    # pi-shifted pump: exchange-antisymmetric frequency state
    return ideal_jsa("c4", 6.0, 1.0, 96, phase_shift="pi").normalized()


@pytest.fixture(scope="module")
def sym():
    return ideal_jsa("c4", 6.0, 1.0, 96, phase_shift="zero").normalized()


def _category(out, pair):
    return sum(out.probability(a, b) for a, b in PAIRS[pair])


# ------------------------------------------------------------ basis change


def test_basis_change_of_bell_states():
    s = 1 / np.sqrt(2)
    plus = basis_change(bell_coefficients(0.0))
    np.testing.assert_allclose(plus, [[s, 0], [0, -s]], atol=1e-15)  # (DD - AA)/sqrt2
    minus = basis_change(bell_coefficients(np.pi))
    np.testing.assert_allclose(minus, [[0, -s], [s, 0]], atol=1e-15)  # (AD - DA)/sqrt2


@settings(max_examples=50)
@given(st.lists(st.floats(-1, 1), min_size=8, max_size=8))
def test_basis_change_is_involution(vals):
    c = np.array(vals[:4]).reshape(2, 2) + 1j * np.array(vals[4:]).reshape(2, 2)
    np.testing.assert_allclose(basis_change(basis_change(c)), c, atol=1e-12)
    assert np.linalg.norm(basis_change(c)) == pytest.approx(np.linalg.norm(c), abs=1e-12)


# -------------------------------------------------------- amplitude tables


def test_phi0_hv_only_cross_port_hv(anti):
    out = beam_splitter_amplitudes(HyperState(0.0, anti), "HV", 0.0)
    for d1, d2 in [("T1", "R1"), ("T2", "R2"), ("T1", "T1"), ("R1", "R1"), ("T1", "T2"), ("R1", "R2")]:
        assert np.max(np.abs(out.amplitudes[DETECTORS.index(d1), DETECTORS.index(d2)])) < 1e-10
    assert _category(out, "cross-pol-cross-port") == pytest.approx(1.0, abs=1e-9)


def test_phipi_hv_only_same_port_hv(anti):
    out = beam_splitter_amplitudes(HyperState(np.pi, anti), "HV", 0.0)
    assert _category(out, "cross-pol-same-port") == pytest.approx(1.0, abs=1e-9)
    assert _category(out, "cross-pol-cross-port") < TOL
    assert _category(out, "same-pol-cross-port") < TOL


def test_phi0_da_only_same_pol_cross_port(anti):
    out = beam_splitter_amplitudes(HyperState(0.0, anti), "DA", 0.0)
    assert _category(out, "same-pol-cross-port") == pytest.approx(1.0, abs=1e-9)
    assert _category(out, "cross-pol-same-port") < TOL


@pytest.mark.parametrize("phi", [0.0, np.pi, 0.7])
@pytest.mark.parametrize("basis", ["HV", "DA"])
def test_trace_matches_amplitude_table(anti, phi, basis):
    state = HyperState(phi, anti)
    taus = [-1.3, 0.0, 0.4, 2.0]
    for pair in PAIRS:
        trace = polarised_hom_trace(state, basis, pair, taus)
        direct = [_category(beam_splitter_amplitudes(state, basis, t), pair) for t in taus]
        np.testing.assert_allclose(trace.probability, direct, atol=1e-12)


@pytest.mark.parametrize("phi", [0.0, np.pi, 1.9])
def test_unitarity(anti, phi):
    state = HyperState(phi, anti)
    for tau in (0.0, 0.3, -2.2):
        assert beam_splitter_amplitudes(state, "DA", tau).total() == pytest.approx(1.0, abs=1e-9)
    d = default_delays(1.0)
    for basis in ("HV", "DA"):
        total = no_coincidence_probability(state, basis, d)
        for pair in PAIRS:
            tr = polarised_hom_trace(state, basis, pair, d)
            assert np.all((tr.probability >= 0) & (tr.probability <= 1))
            total = total + tr.probability
        np.testing.assert_allclose(total, 1.0, atol=1e-9)


# ------------------------------------------------------------- invariants


def test_exchange_symmetry_dichotomy(anti, sym):
    same = ("cross-pol-same-port",)
    cross = ("cross-pol-cross-port", "same-pol-cross-port")

    def at_zero(jsa, phi, pairs):
        return sum(polarised_hom_trace(HyperState(phi, jsa), "HV", p, [0.0]).probability[0] for p in pairs)

    assert at_zero(anti, 0.0, same) < 1e-9
    assert at_zero(anti, np.pi, cross) < 1e-9
    assert at_zero(sym, 0.0, cross) < 1e-9
    assert at_zero(sym, np.pi, same) < 1e-9


def test_basis_covariance_for_singlet(anti):
    state = HyperState(np.pi, anti)
    d = default_delays(1.0)
    for pair in PAIRS:
        hv = polarised_hom_trace(state, "HV", pair, d).probability
        da = polarised_hom_trace(state, "DA", pair, d).probability
        assert np.max(np.abs(hv - da)) < 1e-9


def test_same_pol_cross_port_vanishes_for_triplet(anti):
    tr = polarised_hom_trace(HyperState(0.0, anti), "HV", "same-pol-cross-port", default_delays(1.0))
    assert np.all(tr.probability == 0.0)
    assert np.all(tr.normalized() == 0.0)


def test_cross_port_trace_equals_intra_pair_trace(anti):
    d = default_delays(1.0)
    tr = polarised_hom_trace(HyperState(0.0, anti), "HV", "cross-pol-cross-port", d)
    np.testing.assert_allclose(tr.probability, intra_pair_trace(anti, d).probability, atol=1e-12)
    assert tr.baseline == pytest.approx(0.5)
    # normalised to its baseline: twice the closed-form trace
    assert np.max(np.abs(tr.normalized() - 2 * intra_fit_model(d, 1.0, 6.0))) < 2e-3


def test_beating_at_bin_separation(anti):
    d = np.linspace(-10, 10, 400, endpoint=False)
    ref = dominant_frequency(d, intra_pair_trace(anti, d).probability)
    step = 2 * np.pi / (d[1] - d[0]) / d.size
    assert abs(ref - 6.0) <= step
    for phi in (0.0, np.pi):
        for basis in ("HV", "DA"):
            for pair in PAIRS:
                tr = polarised_hom_trace(HyperState(phi, anti), basis, pair, d)
                if np.max(np.abs(tr.probability)) == 0:
                    continue
                assert dominant_frequency(d, tr.probability) == pytest.approx(ref)


def test_visibility_parameter(anti):
    d = default_delays(1.0)
    tr = polarised_hom_trace(HyperState(0.0, anti), "HV", "cross-pol-cross-port", d, visibility=0.9)
    assert tr.normalized()[100] == pytest.approx(1.9, abs=1e-9)


def test_csv_round_trip(tmp_path, anti):
    tr = polarised_hom_trace(HyperState(np.pi, anti), "DA", "cross-pol-same-port", default_delays(1.0, 31))
    tr.to_csv(tmp_path / "p.csv")
    back = PortPairTrace.from_csv(tmp_path / "p.csv")
    assert (back.basis, back.pair, back.phi) == ("DA", "cross-pol-same-port", pytest.approx(np.pi))
    np.testing.assert_array_equal(back.probability, tr.probability)


def test_invalid_arguments(anti):
    with pytest.raises(ValueError):
        polarised_hom_trace(HyperState(0.0, anti), "XY", "cross-pol-same-port", [0.0])
    with pytest.raises(ValueError):
        polarised_hom_trace(HyperState(0.0, anti), "HV", "both", [0.0])
