"""Sign-based stochastic descent: signSGD, majority vote and SSDM, with the
success-probability machinery used to analyse them."""

from .core import (
    InvalidInputError,
    RandomSource,
    majority_vote,
    sign,
    stochastic_sign,
    stochastic_sign_probabilities,
)
from .optimizers import (
    RunRecord,
    SsdmConfig,
    StepSchedule,
    run_parallel_majority_vote,
    run_sgd,
    run_signsgd,
    run_ssdm,
    signsgd_step_opt1,
    signsgd_step_opt2,
)
from .problems import (
    PartitionedProblem,
    counterexample_problem,
    minibatch,
    partitioned_quadratics,
    quadratic_problem,
    rosenbrock,
    rosenbrock_component_oracle,
    scale_nodes,
)
from .special import (
    MomentEstimates,
    SuccessProbabilityVector,
    binomial_tail,
    chebyshev_spb_bound,
    clt_spb_bound,
    gauss_spb_bound,
    hoeffding_speedup_bound,
    improved_gauss_spb_bound,
    improved_l12_norm,
    l12_norm,
    reg_inc_beta_symmetric,
    required_minibatch,
    rho_m_norm,
    rho_norm,
)

__version__ = "0.1.0"
