"""Design and simulation tools for spectrally engineered photon-pair sources.

Submodules
----------
spectra   frequency axes, pump envelopes and the pulse shaper
crystal   nonlinearity targets, poling synthesis and dispersion models
jsa       joint spectral amplitudes, Schmidt analysis and denoising
hom       Hong-Ou-Mandel traces, closed-form models and fits
hyperhom  polarisation-resolved interference of hyperentangled pairs
tofs      time-of-flight spectrometer simulation and reconstruction
tomo      two-qubit maximum-likelihood tomography
pipeline  config-driven experiments behind the ``hyperspdc`` command
"""

from ._version import __version__
from . import crystal, hom, hyperhom, jsa, pipeline, spectra, tofs, tomo
from .jsa import JointSpectralAmplitude, ideal_jsa, schmidt_decompose
from .pipeline import ExperimentConfig, run, validate

__all__ = [
    "__version__",
    "crystal",
    "hom",
    "hyperhom",
    "jsa",
    "pipeline",
    "spectra",
    "tofs",
    "tomo",
    "JointSpectralAmplitude",
    "ideal_jsa",
    "schmidt_decompose",
    "ExperimentConfig",
    "run",
    "validate",
]
