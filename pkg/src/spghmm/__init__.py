"""Hidden Markov stochastic precipitation generator fitted by variational Bayes."""

__version__ = "0.1.0"

from .errors import ConfigError, DataError, DegeneracyError, DomainError
from .model import (
    ExpectedParams,
    Hyperparameters,
    ModelDims,
    PointParams,
    default_priors,
    expected_params,
    permute_states,
    posterior_means,
)
from .emissions import log_emission_matrix, responsibilities
from .forward_backward import forward_backward, forward_backward_chains
from .vbem import FitConfig, FitTrace, elbo, fit_cavi, vbe_step, vbm_step
from .svb import SvbConfig, fit_svb, step_size, svb_m_step
from .viterbi import decode, viterbi
from .generator import paper_simulation_preset, simulate, simulate_replicates
from .dataio import PrecipDataset, load_long_csv, load_model, save_model
from .stats import align_states, confusion, location_stats, order_by_wetness
