"""Semi-discrete optimal transport with smoothed duals.

Modules:
    core      measures, costs, samplers, the plain discrete c-transform
    noise     marginal noise families, choice probabilities, smooth transforms
    solver    averaged SGD, accelerated gradient and LP reference solvers
    hardness  knapsack-volume recovery through two-atom transport
    cli       experiment runner, slope fits, SVG plots, command line
"""

from sdot.core import (
    CostSpec,
    DiscreteMeasure,
    Potential,
    Sampler,
    SamplerSpec,
    cost_matrix,
    derive_seed,
    discrete_c_transform,
    draw,
    eval_cost,
    make_sampler,
    subgradient_indicator,
)
from sdot.noise import (
    MarginalModel,
    choice_jacobian,
    choice_probabilities,
    marginal_lipschitz,
    probs_from_utilities,
    smooth_c_transform,
)
from sdot.solver import (
    SolverConfig,
    SolverTrace,
    averaged_sgd,
    dual_objective_estimate,
    exact_discrete_ot,
    exact_discrete_ot_duals,
    finite_sample_reference,
    kappa_estimate,
    nesterov_agd,
    step_size,
)
from sdot.hardness import (
    KnapsackInstance,
    QuadratureSpec,
    binary_search_min,
    exact_knapsack_volume,
    knapsack_volume_via_ot,
    wc_two_point,
)
from sdot.cli import (
    ConvergenceRecord,
    ExperimentConfig,
    config_hash,
    emit_plots,
    fit_slope,
    main,
    records_to_csv,
    run_convergence_experiment,
)

__version__ = "0.1.0"
