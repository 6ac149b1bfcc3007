"""Online output prediction for unknown linear systems.

The package provides (i) dense discrete-time state-space machinery with
Lyapunov/Riccati solvers and the steady-state one-step output predictor,
(ii) orthonormal basis-filter banks generated by balanced all-pass inner
functions, (iii) an online least-squares predictor over basis-filtered
regressors together with its exact asymptotic solution, (iv) regret and
bias analytics including the pole-matching decay level and geometric bias
ceiling, and (v) a randomized heat-diffusion benchmark.
"""

from .errors import (
    ConfigError,
    ConvergenceError,
    DimensionError,
    ExcitationError,
    ObfArxError,
    SimulationError,
    UnstableSystemError,
)
from .linalg import psd_factor, solve_dare, solve_lyapunov, spectral_radius
from .statespace import (
    AugmentedSystem,
    ClosedLoop,
    KalmanPredictor,
    NoiseSpec,
    StateSpace,
    Trajectory,
    augment_full,
    build_kalman_predictor,
    close_loop,
    design_kalman_predictor,
    kalman_gain,
    psd_bound,
    simulate,
    white_noise_controller,
)
from .gobf import (
    GobfBank,
    InnerFunction,
    balanced_allpass,
    frequency_response,
    gobf_bank,
    impulse_response,
)
from .predictor import (
    AsymptoticSolution,
    PredictorConfig,
    PredictorState,
    RunResult,
    asymptotic_coefficients,
    batch_solve,
    init_predictor,
    predict,
    run_predictor,
    update,
)
from .regret import (
    BoundParams,
    RateFit,
    RegretSeries,
    average_regret,
    bias_bound,
    fit_alpha,
    fit_convergence_rate,
    log_checkpoints,
    pooled_deviation,
    tau,
)
from .diffusion import (
    DiffusionConfig,
    DiffusionResult,
    RegionMask,
    RegionSpec,
    build_region,
    discretize_heat,
    random_stable_plant,
    run_experiment,
)

__version__ = "0.1.0"
