"""Online least-squares output predictor over basis-filtered regressors.

At every step the predictor emits ``y_check(t) = L(t) x_check(t)`` where
``x_check(t)`` stacks the bank-filtered past inputs and outputs, then
folds the fresh sample into a running second-moment matrix and refreshes
``L`` either by a direct normal-equation solve (``batch``) or by a
rank-one recursive update (``recursive``).  The update order enforces
causality: the regressor used at step t depends on u(1:t-1), y(1:t-1)
only.

The asymptotic coefficients ``L*`` and the steady-state prediction bias
are computed exactly from the stationary covariance of the stacked
closed-loop / predictor / bank system rather than by Monte Carlo.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg

from .errors import DimensionError, ExcitationError, SimulationError
from .gobf import balanced_allpass, gobf_bank
from .linalg import psd_factor, solve_lyapunov, symmetrize
from .seeding import STREAM_CLOSED_LOOP, STREAM_INITIAL_STATE, substream
from .statespace import augment_full, close_loop

__all__ = [
    "PredictorConfig",
    "PredictorState",
    "init_predictor",
    "predict",
    "update",
    "batch_solve",
    "AsymptoticSolution",
    "asymptotic_coefficients",
    "RunResult",
    "run_predictor",
]


@dataclass(frozen=True)
class PredictorConfig:
    """Static description of an online predictor.

    ``poles`` and ``q`` define the basis bank; ``input_dim``/``output_dim``
    are the plant's m and p.  ``eps_reg`` sets the recursive mode's prior
    (P0 = I/eps_reg); ``condition_cap`` is the invertibility guard on the
    regressor block of the second-moment matrix in batch mode;
    ``resolve_every`` thins the batch re-solve cadence.
    """

    poles: tuple
    q: int
    input_dim: int
    output_dim: int
    eps_reg: float = 1e-8
    condition_cap: float = 1e12
    update_mode: str = "batch"
    resolve_every: int = 1

    def __post_init__(self):
        object.__setattr__(self, "poles", tuple(complex(z) for z in self.poles))
        if self.eps_reg < 0:
            raise ValueError("eps_reg must be nonnegative")
        if self.condition_cap < 1:
            raise ValueError("condition_cap must be at least 1")
        if self.update_mode not in ("batch", "recursive"):
            raise ValueError(f"unknown update_mode {self.update_mode!r}")
        if self.resolve_every < 1:
            raise ValueError("resolve_every must be positive")

    def build_bank(self):
        inner = balanced_allpass(self.poles)
        return gobf_bank(inner, self.q, self.input_dim + self.output_dim)


@dataclass
class PredictorState:
    """Mutable online state: bank state, second moments, coefficients.

    Single-owner object; safe to hand between threads between calls but
    not to mutate concurrently.
    """

    config: PredictorConfig
    bank: object
    phi: np.ndarray
    W: np.ndarray
    L: np.ndarray
    t: int = 0
    rls_P: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def regressor(self):
        """Current regressor x_check(t); equals the bank state (C = I)."""
        return self.phi


def init_predictor(config):
    """Fresh all-zero predictor state for the given configuration."""
    bank = config.build_bank()
    n_reg = bank.regressor_dim
    p = config.output_dim
    state = PredictorState(
        config=config,
        bank=bank,
        phi=np.zeros(n_reg),
        W=np.zeros((p + n_reg, p + n_reg)),
        L=np.zeros((p, n_reg)),
        t=0,
    )
    if config.update_mode == "recursive":
        if config.eps_reg <= 0:
            raise ValueError("recursive mode needs eps_reg > 0 for its prior")
        state.rls_P = np.eye(n_reg) / config.eps_reg
    return state


def predict(state):
    """Current prediction L(t) x_check(t); does not mutate the state."""
    return state.L @ state.phi


def batch_solve(W, output_dim, condition_cap=1e12):
    """Coefficients minimizing ``[I, -L] W [I, -L]^T`` over L.

    ``W`` is the (p + n_reg)-square second-moment matrix with the output
    block leading.  Solves the normal equations through a symmetric
    positive-definite factorization of the regressor block; raises
    :class:`ExcitationError` when that block's condition number exceeds
    ``condition_cap`` (the caller keeps its previous coefficients).
    """
    W = np.asarray(W, dtype=float)
    p = int(output_dim)
    Wxx = W[p:, p:]
    if Wxx.shape[0] == 0:
        return np.zeros((p, 0))
    eigs = np.linalg.eigvalsh(symmetrize(Wxx))
    lo, hi = float(eigs[0]), float(eigs[-1])
    if lo <= 0.0 or hi / lo > condition_cap:
        raise ExcitationError(
            f"regressor moment block not invertible within condition cap "
            f"(eigen range [{lo:.3e}, {hi:.3e}])"
        )
    Wxy = W[p:, :p]
    return scipy.linalg.solve(Wxx, Wxy, assume_a="pos").T


def update(state, u, y):
    """Fold the step-t sample into the predictor and advance the bank.

    Callers must consume :func:`predict` for step t before calling this
    (the prediction uses the pre-update regressor).  In order: the running
    second moment absorbs ``[y(t); x_check(t)]``, the coefficients refresh
    per the configured mode, and only then does the bank state advance on
    ``[u(t); y(t)]``.
    """
    cfg = state.config
    u = np.asarray(u, dtype=float).reshape(cfg.input_dim)
    y = np.asarray(y, dtype=float).reshape(cfg.output_dim)
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite sample passed to update")

    x = state.phi
    w = np.concatenate([y, x])
    t = state.t
    state.W *= t / (t + 1.0)
    state.W += np.outer(w, w) / (t + 1.0)

    if cfg.update_mode == "batch":
        if (t + 1) % cfg.resolve_every == 0:
            try:
                state.L = batch_solve(state.W, cfg.output_dim, cfg.condition_cap)
            except ExcitationError:
                pass
    else:
        P = state.rls_P
        Px = P @ x
        gain = Px / (1.0 + x @ Px)
        state.L = state.L + np.outer(y - state.L @ x, gain)
        P -= np.outer(gain, Px)
        # rank-one updates slowly lose symmetry in floating point
        P += P.T
        P *= 0.5

    state.phi = state.bank.realization.A @ x + state.bank.realization.B @ np.concatenate([u, y])
    state.t = t + 1
    return state


@dataclass(frozen=True)
class AsymptoticSolution:
    """Best-in-class coefficients and their steady-state prediction bias.

    ``cov_full`` is the stationary covariance of ``[y; x_hat; x_check]``;
    ``bias`` is the steady-state mean squared gap between the basis
    predictor at ``L*`` and the optimal one-step predictor;
    ``excitation_floor`` is the measured smallest eigenvalue of the
    regressor covariance block (the persistent-excitation margin).
    """

    L_star: np.ndarray
    cov_full: np.ndarray
    bias: float
    excitation_floor: float
    output_dim: int
    predictor_dim: int


def asymptotic_coefficients(closed, kf, bank, min_excitation=1e-10):
    """Exact asymptotic coefficients L* and bias via stationary covariances.

    Builds the stacked closed-loop/predictor/bank system, solves one
    Lyapunov equation for its stationary state covariance, and reads off
    the second moments of ``[y; x_hat; x_check]``.  ``L*`` solves the
    normal equations of the regression of y on x_check; the bias is

        ``trace([C, -L*] Cov([x_hat; x_check]) [C, -L*]^T)``.

    Raises
    ------
    ExcitationError
        If the regressor covariance block has an eigenvalue below
        ``min_excitation`` (the data would not identify L*).
    """
    aug = augment_full(closed, kf, bank)
    Sigma = solve_lyapunov(aug.system.A, aug.noise.Q)
    covY = symmetrize(aug.system.C @ Sigma @ aug.system.C.T)

    p = closed.output_dim
    nk = kf.state_dim
    Wxx = covY[aug.o_regressor, aug.o_regressor]
    floor = float(np.min(np.linalg.eigvalsh(Wxx))) if Wxx.size else math.inf
    if Wxx.size and floor < min_excitation:
        raise ExcitationError(
            f"regressor covariance nearly singular (min eigenvalue {floor:.3e}); "
            "the excitation assumption fails for this configuration"
        )
    if Wxx.size:
        Wxy = covY[aug.o_regressor, aug.o_output]
        L_star = np.linalg.solve(Wxx, Wxy).T
    else:
        L_star = np.zeros((p, 0))

    C = kf.realization.C
    J = np.hstack([C, -L_star])
    cov_joint = covY[p:, p:]
    bias = float(np.trace(J @ cov_joint @ J.T))
    bias = max(bias, 0.0)
    return AsymptoticSolution(
        L_star=L_star,
        cov_full=covY,
        bias=bias,
        excitation_floor=floor,
        output_dim=p,
        predictor_dim=nk,
    )


@dataclass(frozen=True)
class RunResult:
    """Checkpointed summaries of one online prediction run.

    ``regret`` holds the running mean of ``||y_check - y_hat*||^2`` at each
    checkpoint.  When the run was given an asymptotic solution, the
    decomposition terms are filled in as running means of
    ``||y_check - y_check*||^2`` and ``||y_check* - y_hat*||^2``, plus the
    empirical cross term between the innovation and the asymptotic
    residual.  ``L_snapshots`` maps checkpoint step counts to coefficient
    copies.
    """

    checkpoints: np.ndarray
    regret: np.ndarray
    L_snapshots: dict
    seed: int
    gap_sq: Optional[np.ndarray] = None
    asym_gap_sq: Optional[np.ndarray] = None
    cross_term: Optional[np.ndarray] = None
    final_L: Optional[np.ndarray] = None
    series: Optional[np.ndarray] = None


def run_predictor(
    plant,
    plant_noise,
    controller,
    controller_noise,
    kf,
    config,
    horizon,
    seed,
    checkpoints=None,
    asym=None,
    return_series=False,
):
    """Run the closed loop, the reference predictor, and the online filter.

    The plant, controller, reference predictor, and basis bank evolve as
    one autonomous linear system (the predictor never feeds back into the
    loop), so a single state recursion drives everything; the online
    coefficient update rides along step by step.  The loop and the
    reference predictor start from a joint draw of their stationary
    distribution; the bank and the coefficients start from zero.

    Returns a :class:`RunResult` sampled at ``checkpoints`` (default:
    eight per decade plus the horizon).
    """
    from .regret import log_checkpoints  # local import to avoid a cycle

    closed = close_loop(plant, plant_noise, controller, controller_noise)
    bank = config.build_bank()
    if config.input_dim != closed.input_dim or config.output_dim != closed.output_dim:
        raise DimensionError("predictor config dims must match the plant's m and p")
    aug = augment_full(closed, kf, bank)

    horizon = int(horizon)
    if checkpoints is None:
        checkpoints = log_checkpoints(horizon)
    checkpoints = np.asarray(checkpoints, dtype=int)
    cp_set = set(int(c) for c in checkpoints)

    nt = closed.state_dim
    nk = kf.state_dim
    n_reg = bank.regressor_dim
    p = closed.output_dim
    dim = aug.system.A.shape[0]
    A_full = np.ascontiguousarray(aug.system.A)
    C_plant = kf.realization.C

    # Joint stationary start for the loop and the reference predictor.
    A_sub = A_full[: nt + nk, : nt + nk]
    Q_sub = np.zeros((nt + nk, nt + nk))
    Q_sub[:nt, :nt] = closed.noise.Q
    S_sub = solve_lyapunov(A_sub, Q_sub)
    X = np.zeros(dim)
    X[: nt + nk] = psd_factor(S_sub) @ substream(seed, STREAM_INITIAL_STATE).standard_normal(nt + nk)

    F = psd_factor(closed.noise.Q)
    E = substream(seed, STREAM_CLOSED_LOOP).standard_normal((horizon, F.shape[1])) @ F.T

    sy = closed.s_output
    s_pred = aug.s_state_predictor
    s_bank = aug.s_state_bank

    L = np.zeros((p, n_reg))
    recursive = config.update_mode == "recursive"
    if recursive:
        P_rls = np.eye(n_reg) / config.eps_reg
    else:
        Wm = np.zeros((p + n_reg, p + n_reg))
    track = asym is not None
    if track:
        L_star = asym.L_star

    e_kf = np.empty(horizon)
    if track:
        e_gap = np.empty(horizon)
        e_asym = np.empty(horizon)
        e_cross = np.empty(horizon)
    snapshots = {}

    for t in range(horizon):
        phi = X[s_bank]
        y = X[sy]
        y_hat = C_plant @ X[s_pred]
        y_check = L @ phi
        d = y_check - y_hat
        e_kf[t] = d @ d
        if track:
            y_star = L_star @ phi
            g = y_check - y_star
            e_gap[t] = g @ g
            a = y_star - y_hat
            e_asym[t] = a @ a
            e_cross[t] = (y - y_hat) @ (y_hat - y_star)

        if recursive:
            Px = P_rls @ phi
            gain = Px / (1.0 + phi @ Px)
            L = L + np.outer(y - y_check, gain)
            P_rls -= np.outer(gain, Px)
            P_rls += P_rls.T
            P_rls *= 0.5
        else:
            w = np.concatenate([y, phi])
            Wm *= t / (t + 1.0)
            Wm += np.outer(w, w) / (t + 1.0)
            if (t + 1) % config.resolve_every == 0:
                try:
                    L = batch_solve(Wm, p, config.condition_cap)
                except ExcitationError:
                    pass

        X = A_full @ X
        X[:nt] += E[t]
        if t + 1 in cp_set:
            snapshots[t + 1] = L.copy()

    if horizon and not (np.all(np.isfinite(X)) and np.all(np.isfinite(e_kf))):
        raise SimulationError("online run produced non-finite values", step=horizon)

    steps = np.arange(1, horizon + 1, dtype=float)
    idx = checkpoints - 1

    def running_mean(series):
        if horizon == 0:
            return np.zeros(0)
        return (np.cumsum(series) / steps)[idx]

    return RunResult(
        checkpoints=checkpoints,
        regret=running_mean(e_kf),
        L_snapshots=snapshots,
        seed=int(seed),
        gap_sq=running_mean(e_gap) if track else None,
        asym_gap_sq=running_mean(e_asym) if track else None,
        cross_term=running_mean(e_cross) if track else None,
        final_L=L,
        series=e_kf if return_series else None,
    )
