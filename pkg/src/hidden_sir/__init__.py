"""Hidden-state stochastic SIR models, Wonham filtering and extinction thresholds."""

__version__ = "0.1.0"

from .errors import (AssumptionViolated, ConfigError, DegenerateFilter, HiddenSirError,
                     InsufficientData, NonFiniteState, NumericalError, OutOfDomain,
                     QuadratureFailure, ReducibleChain, UnknownState)
from .sde import (FixedNoise, NoiseBundle, SdeSystem, SimPath, TimeGrid, brownian_increments,
                  euler_maruyama_step, simulate_ensemble, simulate_path)
from .markov import ChainPath, ChainSpec, observation_path, simulate_ctmc, stationary_distribution
from .filtering import (ParticleCloud, ctmc_transition_sampler, particle_filter_step, project_simplex,
                        run_wonham, wonham_innovation_step, wonham_step)
from .models import (EpidemicParams, IncidenceModel, RateLaw, check_incidence, incidence_eval,
                     make_boundary_system, make_filtered_system, make_hidden_system,
                     make_predicted_system, make_wonham_system)
from .threshold import (InvGammaLaw, Label, ThresholdReport, classify_prediction,
                        invgamma_from_params, lambda_discrete, lambda_general, lambda_predicted,
                        monotone_prediction_bounds, sufficient_conditions, two_state_filter_density)
from .analysis import (LyapunovEstimate, OccupationHistogram, Verdict, barycenter_deviation,
                       extinction_verdict, lyapunov_slope, moment_check, occupation_histogram,
                       permanence_means)
from .config import ExperimentConfig, load_config, parse_config
