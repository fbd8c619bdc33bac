"""Frequency-bin entanglement swapping: spectra, closed-form fringes, a Fock-space oracle and fitting."""

from .config import RunConfig, load_config
from .errors import *  # noqa: F401,F403
from .fitting import FitResult, FringeParams, Interferogram, fit_fringes, fringe_model
from .oracle import (
    apply_beamsplitter,
    build_four_photon_state,
    coincidence_scan,
    joint_spectrum_heralded,
    project_bsm,
)
from .spectral import (
    DoubleGaussianJsaParams,
    FilterFunction,
    FrequencyGrid,
    JointSpectralAmplitude,
    SpectralAmplitude,
    build_gaussian_jsa,
    experiment_params,
    ingest_jsi_csv,
    params_from_marginals,
    schmidt_decompose,
)
from .swap import (
    BsmConfig,
    HeraldedState,
    SourcePair,
    coincidence_full,
    coincidence_ideal,
    fringe_map,
    heralded_state,
    hom_dip,
)

__version__ = "0.1.0"
