"""Polarisation-resolved HOM interference of polarisation x frequency-bin states.

The two photons of a pair enter a balanced beam splitter through inputs a
(signal) and b (idler). Each output port ends in a polarising splitter with a
transmitted (T: H or D) and a reflected (R: V or A) detector, giving four
detectors T1, R1, T2, R2.

First-quantised picture used throughout: the signal reaches output port k
with amplitude u_k = (1, 1)/sqrt2, the idler with v_k = (1, -1)/sqrt2, and
the delay multiplies the signal's spectral amplitude by exp(i w tau). The
two-photon amplitude for detectors d1 = (k1, x1) at w and d2 = (k2, x2) at w' is

    A = u_k1 v_k2 c[x1, x2] f(w, w') e^{i w tau} + u_k2 v_k1 c[x2, x1] f(w', w) e^{i w' tau}

with c the polarisation coefficients in the detection basis.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hom import exchange_overlap_trace
from .jsa import JointSpectralAmplitude

DETECTORS = ("T1", "R1", "T2", "R2")
# (port, polarisation index) per detector
_DET = {"T1": (0, 0), "R1": (0, 1), "T2": (1, 0), "R2": (1, 1)}
_U = np.array([1.0, 1.0]) / np.sqrt(2)
_V = np.array([1.0, -1.0]) / np.sqrt(2)

PAIRS = {
    "cross-pol-same-port": (("T1", "R1"), ("T2", "R2")),
    "cross-pol-cross-port": (("T1", "R2"), ("R1", "T2")),
    "same-pol-cross-port": (("T1", "T2"), ("R1", "R2")),
}
BASES = ("HV", "DA")

# rows D, A; columns H, V
_ROTATION = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2)


def bell_coefficients(phi: float) -> np.ndarray:
    """c[p, q] in the H/V basis, p for the signal; (|HV> + e^{i phi}|VH>)/sqrt2."""
    c = np.zeros((2, 2), dtype=complex)
    c[0, 1] = 1 / np.sqrt(2)
    c[1, 0] = np.exp(1j * phi) / np.sqrt(2)
    return c


def basis_change(coefficients, to: str = "DA") -> np.ndarray:
    """Rotate two-photon polarisation coefficients between the H/V and D/A bases.

    The rotation is its own inverse, so ``to`` only documents the direction.
    """
    if to not in BASES:
        raise ValueError(f"basis must be one of {BASES}")
    c = np.asarray(coefficients, dtype=complex)
    return _ROTATION @ c @ _ROTATION.T


@dataclass(frozen=True, eq=False)
class HyperState:
    phi: float
    jsa: JointSpectralAmplitude
    label: str = ""

    def __post_init__(self):
        if not self.jsa.is_square:
            raise ValueError("the frequency state needs identical signal and idler axes")
        if abs(self.jsa.norm - 1.0) > 1e-9:
            object.__setattr__(self, "jsa", self.jsa.normalized())

    def coefficients(self, basis: str = "HV") -> np.ndarray:
        if basis not in BASES:
            raise ValueError(f"basis must be one of {BASES}")
        c = bell_coefficients(self.phi)
        return c if basis == "HV" else basis_change(c)


def _pair_weights(c: np.ndarray, d1: str, d2: str) -> tuple[complex, complex]:
    k1, x1 = _DET[d1]
    k2, x2 = _DET[d2]
    return _U[k1] * _V[k2] * c[x1, x2], _U[k2] * _V[k1] * c[x2, x1]


@dataclass(frozen=True, eq=False)
class BeamSplitterOutput:
    """Two-photon output amplitudes A[d1, d2, j, m] on the frequency grid.

    ``amplitudes[a, b]`` is the amplitude for the photon at ``DETECTORS[a]``
    having frequency index j and the one at ``DETECTORS[b]`` index m.
    """

    amplitudes: np.ndarray
    cell: float
    basis: str
    tau: float

    def probability(self, d1: str, d2: str) -> float:
        a, b = DETECTORS.index(d1), DETECTORS.index(d2)
        p = float(np.sum(np.abs(self.amplitudes[a, b]) ** 2) * self.cell)
        return 0.5 * p if a == b else p

    def total(self) -> float:
        tot = 0.0
        for a, d1 in enumerate(DETECTORS):
            for d2 in DETECTORS[a:]:
                tot += self.probability(d1, d2)
        return tot


def beam_splitter_amplitudes(state: HyperState, basis: str = "HV", tau: float = 0.0) -> BeamSplitterOutput:
    """Mode-resolved output amplitudes of the state after the balanced splitter."""
    c = state.coefficients(basis)
    F = state.jsa.values
    w = state.jsa.s_axis.values - state.jsa.s_axis.values.mean()
    E = np.exp(1j * w * tau)
    G1 = F * E[:, None]  # f(w, w') e^{i w tau}
    G2 = G1.T  # f(w', w) e^{i w' tau}
    n = F.shape[0]
    amps = np.empty((4, 4, n, n), dtype=complex)
    for a, d1 in enumerate(DETECTORS):
        for b, d2 in enumerate(DETECTORS):
            alpha, beta = _pair_weights(c, d1, d2)
            amps[a, b] = alpha * G1 + beta * G2
    return BeamSplitterOutput(amps, state.jsa.cell, basis, float(tau))


@dataclass(frozen=True, eq=False)
class PortPairTrace:
    basis: str
    pair: str
    delays: np.ndarray
    probability: np.ndarray
    baseline: float
    phi: float = 0.0
    metadata: dict = field(default_factory=dict)

    def normalized(self) -> np.ndarray:
        """Trace divided by its large-delay value (all-zero traces stay zero)."""
        if self.baseline <= 0:
            return np.zeros_like(self.probability)
        return self.probability / self.baseline

    def to_csv(self, path) -> None:
        header = f"# basis={self.basis}\n# pair={self.pair}\n# phi={self.phi!r}\ndelay_ps,probability"
        np.savetxt(path, np.column_stack([self.delays, self.probability]), delimiter=",",
                   header=header, comments="", fmt="%.17g")

    @classmethod
    def from_csv(cls, path) -> "PortPairTrace":
        meta = {}
        with open(path) as fh:
            for line in fh:
                if not line.startswith("#"):
                    break
                key, _, val = line[1:].strip().partition("=")
                meta[key] = val
        data = np.loadtxt(path, delimiter=",", comments="#", skiprows=len(meta) + 1, ndmin=2)
        return cls(meta["basis"], meta["pair"], data[:, 0], data[:, 1], float("nan"), float(meta["phi"]))


def pair_probabilities(state: HyperState, basis: str, pair: str, overlap: np.ndarray,
                       visibility: float = 1.0) -> tuple[np.ndarray, float]:
    """Category probability from the exchange overlap S(tau), plus its S = 0 baseline.

    Distinct detectors give |alpha|^2 + |beta|^2 + 2 Re(conj(alpha) beta S).
    """
    if pair not in PAIRS:
        raise ValueError(f"pair must be one of {tuple(PAIRS)}")
    c = state.coefficients(basis)
    S = visibility * np.asarray(overlap)
    p = np.zeros(S.shape)
    base = 0.0
    for d1, d2 in PAIRS[pair]:
        alpha, beta = _pair_weights(c, d1, d2)
        incoh = abs(alpha) ** 2 + abs(beta) ** 2
        p += incoh + 2 * np.real(np.conj(alpha) * beta * S)
        base += incoh
    return p, base


def polarised_hom_trace(state: HyperState, basis: str, pair: str, delays, visibility: float = 1.0) -> PortPairTrace:
    """Coincidence probability of one detector-pair category versus delay.

    ``visibility`` scales the exchange overlap to mimic imperfect mode matching.
    """
    if basis not in BASES:
        raise ValueError(f"basis must be one of {BASES}")
    delays = np.asarray(delays, dtype=float)
    p, base = pair_probabilities(state, basis, pair, exchange_overlap_trace(state.jsa, delays), visibility)
    p = np.where(np.abs(p) < 1e-15, 0.0, p)
    return PortPairTrace(basis, pair, delays, p, base, float(state.phi), {"label": state.label})


def no_coincidence_probability(state: HyperState, basis: str, delays) -> np.ndarray:
    """Probability that both photons hit the same detector."""
    c = state.coefficients(basis)
    S = exchange_overlap_trace(state.jsa, np.asarray(delays, dtype=float))
    total = np.zeros(S.shape)
    for d in DETECTORS:
        alpha, _ = _pair_weights(c, d, d)
        total += abs(alpha) ** 2 * (1 + np.real(S))
    return total
