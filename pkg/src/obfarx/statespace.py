"""Discrete-time LTI state-space types, simulation, and system builders.

The central composite here is the closed loop of a plant

    ``x(t+1) = A x(t) + B u(t) + w(t),   y(t) = C x(t) + v(t)``

under a strictly-proper stabilizing controller

    ``psi(t+1) = A_u psi(t) + B_u y(t) + w_u(t),   u(t) = C_u psi(t) + v_u(t)``,

rewritten as one autonomous system whose state stacks ``[x; psi; u; y]``
and whose output is ``[u; y]``.  On top of that, :func:`augment_full`
stacks the steady-state one-step predictor and a basis-filter bank into a
block lower-triangular system whose steady-state output covariance yields
every second moment the asymptotic analysis needs.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionError, SimulationError
from .linalg import psd_factor, solve_dare, solve_lyapunov, spectral_radius, symmetrize
from .seeding import (
    STREAM_INITIAL_STATE,
    STREAM_MEASUREMENT,
    STREAM_PROCESS,
    substream,
)

__all__ = [
    "StateSpace",
    "NoiseSpec",
    "Trajectory",
    "KalmanPredictor",
    "ClosedLoop",
    "AugmentedSystem",
    "simulate",
    "kalman_gain",
    "build_kalman_predictor",
    "design_kalman_predictor",
    "white_noise_controller",
    "close_loop",
    "augment_full",
    "psd_bound",
]


@dataclass(frozen=True)
class StateSpace:
    """Dense real LTI system (A, B, C, D).

    Treated as an immutable value object: the arrays are never mutated
    after construction, so instances are safe to share between threads.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n):
            raise DimensionError(f"A must be square, got {A.shape}")
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        if B.ndim != 2 or B.shape[0] != n:
            raise DimensionError(f"B must have {n} rows, got shape {B.shape}")
        C = np.asarray(self.C, dtype=float)
        if C.ndim == 1:
            C = C[None, :]
        if C.ndim != 2 or C.shape[1] != n:
            raise DimensionError(f"C must have {n} columns, got shape {C.shape}")
        m = B.shape[1]
        p = C.shape[0]
        D = np.atleast_2d(np.asarray(self.D, dtype=float))
        if D.size == 0 and D.shape != (p, m):
            D = np.zeros((p, m))
        if D.shape != (p, m):
            raise DimensionError(f"D must have shape ({p}, {m}), got {D.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)

    @property
    def state_dim(self):
        return self.A.shape[0]

    @property
    def input_dim(self):
        return self.B.shape[1]

    @property
    def output_dim(self):
        return self.C.shape[0]

    def spectral_radius(self):
        return spectral_radius(self.A)

    def is_stable(self):
        """Checked stability: spectral radius strictly below 1."""
        return self.spectral_radius() < 1.0

    def transfer(self, z):
        """Evaluate C (zI - A)^{-1} B + D at a complex point ``z``."""
        n = self.state_dim
        if n == 0:
            return self.D.astype(complex)
        zIA = z * np.eye(n) - self.A
        return self.C @ np.linalg.solve(zIA, self.B) + self.D


@dataclass(frozen=True)
class NoiseSpec:
    """Covariances of the process noise (Q) and measurement noise (R).

    Q must be symmetric PSD (eigenvalues >= -1e-10 numerically); R must be
    symmetric PSD here, with strict positive definiteness enforced where a
    predictor design actually inverts it.
    """

    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        Q = symmetrize(np.atleast_2d(np.asarray(self.Q, dtype=float)))
        R = symmetrize(np.atleast_2d(np.asarray(self.R, dtype=float)))
        for name, M in (("Q", Q), ("R", R)):
            if M.size and np.linalg.norm(M - M.T) > 1e-12 * (1 + np.linalg.norm(M)):
                raise ValueError(f"{name} must be symmetric")
            if M.size:
                lo = float(np.min(np.linalg.eigvalsh(M)))
                if lo < -1e-10 * max(1.0, float(np.max(np.abs(M)))):
                    raise ValueError(f"{name} must be PSD; min eigenvalue {lo:.3e}")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)


@dataclass(frozen=True)
class Trajectory:
    """Recorded input/output (and optionally state) sample paths."""

    inputs: np.ndarray
    outputs: np.ndarray
    seed: int
    states: Optional[np.ndarray] = None

    def __post_init__(self):
        u = np.asarray(self.inputs, dtype=float)
        y = np.asarray(self.outputs, dtype=float)
        if u.shape[0] != y.shape[0]:
            raise DimensionError("inputs and outputs must have equal row counts")
        if self.states is not None and np.asarray(self.states).shape[0] != y.shape[0]:
            raise DimensionError("states must have the same row count as outputs")
        for name, arr in (("inputs", u), ("outputs", y)):
            if arr.size and not np.all(np.isfinite(arr)):
                raise ValueError(f"trajectory {name} contain non-finite entries")

    def __len__(self):
        return self.outputs.shape[0]


@dataclass(frozen=True)
class KalmanPredictor:
    """Steady-state one-step output predictor in LTI form.

    ``realization`` maps the stacked input ``[u(t); y(t)]`` to the
    prediction of y(t+1): state matrix ``A(I - KC)``, input matrix
    ``[B, AK]``, output matrix ``C``.  ``eigenvalues`` are those of the
    predictor state matrix.
    """

    gain: np.ndarray
    realization: StateSpace
    eigenvalues: np.ndarray
    riccati_solution: Optional[np.ndarray] = None

    @property
    def state_dim(self):
        return self.realization.state_dim


def simulate(
    sys,
    noise,
    horizon,
    seed,
    initial_state=None,
    inputs=None,
    burn_in=0,
    steady_start=False,
    record_states=False,
):
    """Simulate ``x(t+1) = A x + B u + w``, ``y(t) = C x + D u + v``.

    Noise is drawn from per-source substreams of ``seed`` so the result is
    bit-reproducible.  ``inputs`` (shape ``(horizon + burn_in, m)``) default
    to zeros.  With ``steady_start`` the initial state is drawn from the
    noise-driven stationary distribution N(0, S) with ``S`` from the
    Lyapunov equation (inputs are treated as exogenous and do not enter S);
    otherwise it is ``initial_state`` or zero.  The first ``burn_in`` steps
    are simulated and discarded.

    Raises
    ------
    SimulationError
        If the state or output becomes non-finite; the message carries the
        offending step index.
    """
    n, m, p = sys.state_dim, sys.input_dim, sys.output_dim
    if noise.Q.shape != (n, n):
        raise DimensionError(f"Q must be ({n}, {n}), got {noise.Q.shape}")
    if noise.R.shape != (p, p):
        raise DimensionError(f"R must be ({p}, {p}), got {noise.R.shape}")
    total = int(horizon) + int(burn_in)
    if inputs is None:
        u_all = np.zeros((total, m))
    else:
        u_all = np.asarray(inputs, dtype=float).reshape(total, m)

    rng_w = substream(seed, STREAM_PROCESS)
    rng_v = substream(seed, STREAM_MEASUREMENT)
    Fw = psd_factor(noise.Q)
    Fv = psd_factor(noise.R)
    w_all = rng_w.standard_normal((total, n)) @ Fw.T
    v_all = rng_v.standard_normal((total, p)) @ Fv.T

    if steady_start:
        S = solve_lyapunov(sys.A, noise.Q)
        x = psd_factor(S) @ substream(seed, STREAM_INITIAL_STATE).standard_normal(n)
    elif initial_state is not None:
        x = np.asarray(initial_state, dtype=float).reshape(n)
    else:
        x = np.zeros(n)

    ys = np.empty((total, p))
    xs = np.empty((total, n)) if record_states else None
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(total):
            y = sys.C @ x + sys.D @ u_all[t] + v_all[t]
            if not np.all(np.isfinite(y)):
                raise SimulationError(f"non-finite output at step {t}", step=t)
            ys[t] = y
            if record_states:
                xs[t] = x
            x = sys.A @ x + sys.B @ u_all[t] + w_all[t]
            if not np.all(np.isfinite(x)):
                raise SimulationError(f"non-finite state after step {t}", step=t)

    sl = slice(int(burn_in), total)
    return Trajectory(
        inputs=u_all[sl].copy(),
        outputs=ys[sl].copy(),
        states=xs[sl].copy() if record_states else None,
        seed=int(seed),
    )


def kalman_gain(P, C, R):
    """Gain ``K = P C^T (C P C^T + R)^{-1}``."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    S = C @ P @ C.T + R
    try:
        K = np.linalg.solve(S.T, (P @ C.T).T).T
    except np.linalg.LinAlgError as exc:
        raise ValueError("innovation covariance C P C^T + R is singular") from exc
    if not np.all(np.isfinite(K)):
        raise ValueError("predictor gain has non-finite entries")
    return K


def build_kalman_predictor(A, B, C, K, riccati_solution=None):
    """Assemble the predictor realization from the gain.

    State matrix ``A(I - KC)``, input matrix ``[B, AK]`` acting on the
    stacked ``[u; y]``, output matrix ``C``, no feedthrough.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    B = np.asarray(B, dtype=float).reshape(n, -1)
    C = np.asarray(C, dtype=float).reshape(-1, n)
    p = C.shape[0]
    K = np.asarray(K, dtype=float).reshape(n, p)
    A_pred = A @ (np.eye(n) - K @ C)
    realization = StateSpace(A_pred, np.hstack([B, A @ K]), C, np.zeros((p, B.shape[1] + p)))
    return KalmanPredictor(
        gain=K,
        realization=realization,
        eigenvalues=np.linalg.eigvals(A_pred),
        riccati_solution=None if riccati_solution is None else np.asarray(riccati_solution, dtype=float),
    )


def design_kalman_predictor(sys, noise):
    """Solve the Riccati equation for ``sys``/``noise`` and build the predictor."""
    P = solve_dare(sys.A, sys.C, noise.Q, noise.R)
    K = kalman_gain(P, sys.C, noise.R)
    return build_kalman_predictor(sys.A, sys.B, sys.C, K, riccati_solution=P)


def white_noise_controller(input_dim, output_dim, variance=1.0):
    """Degenerate zero-state controller emitting ``u(t) ~ N(0, variance*I)``.

    This is the open-loop excitation commonly used for identification; it
    satisfies the stabilizing-controller structure with an empty state.
    """
    m, p = int(input_dim), int(output_dim)
    sys = StateSpace(
        np.zeros((0, 0)), np.zeros((0, p)), np.zeros((m, 0)), np.zeros((m, p))
    )
    noise = NoiseSpec(np.zeros((0, 0)), float(variance) * np.eye(m))
    return sys, noise


@dataclass(frozen=True)
class ClosedLoop:
    """Autonomous closed-loop system with state ``[x; psi; u; y]``.

    ``system`` has no inputs; its output is ``[u; y]``.  ``noise.Q`` is the
    mapped covariance of the combined disturbance and ``noise.R`` is zero
    (the output is a linear function of the state).  Index slices locate
    the plant state, controller state, input, and output inside the stacked
    state vector.
    """

    system: StateSpace
    noise: NoiseSpec
    plant_dim: int
    controller_dim: int
    input_dim: int
    output_dim: int
    s_plant: slice = field(repr=False, default=None)
    s_controller: slice = field(repr=False, default=None)
    s_input: slice = field(repr=False, default=None)
    s_output: slice = field(repr=False, default=None)

    @property
    def state_dim(self):
        return self.system.state_dim


def close_loop(plant, plant_noise, controller, controller_noise):
    """Stack plant and controller into one autonomous noise-driven system.

    The stacked state is ``[x(t); psi(t); u(t); y(t)]`` and evolves as

        ``x+  = A x + B u + w``
        ``psi+ = A_u psi + B_u y + w_u``
        ``u+  = C_u A_u psi + C_u B_u y + C_u w_u + v_u(t+1)``
        ``y+  = C A x + C B u + C w + v(t+1)``

    so the single disturbance vector per step is the image of
    ``[w(t); v(t+1); w_u(t); v_u(t+1)]`` under a fixed sparse map, and the
    returned ``noise.Q`` is the corresponding covariance.
    """
    n = plant.state_dim
    m = plant.input_dim
    p = plant.output_dim
    nu = controller.state_dim
    if controller.input_dim != p:
        raise DimensionError(
            f"controller input dim {controller.input_dim} must equal plant output dim {p}"
        )
    if controller.output_dim != m:
        raise DimensionError(
            f"controller output dim {controller.output_dim} must equal plant input dim {m}"
        )
    A, B, C = plant.A, plant.B, plant.C
    Au, Bu, Cu = controller.A, controller.B, controller.C
    Z = np.zeros

    A_cl = np.block(
        [
            [A, Z((n, nu)), B, Z((n, p))],
            [Z((nu, n)), Au, Z((nu, m)), Bu],
            [Z((m, n)), Cu @ Au, Z((m, m)), Cu @ Bu],
            [C @ A, Z((p, nu)), C @ B, Z((p, p))],
        ]
    )
    # Disturbance map acting on [w; v(+1); w_u; v_u(+1)].
    G = np.block(
        [
            [np.eye(n), Z((n, p)), Z((n, nu)), Z((n, m))],
            [Z((nu, n)), Z((nu, p)), np.eye(nu), Z((nu, m))],
            [Z((m, n)), Z((m, p)), Cu, np.eye(m)],
            [C, np.eye(p), Z((p, nu)), Z((p, m))],
        ]
    )
    base = np.zeros((n + p + nu + m, n + p + nu + m))
    base[:n, :n] = plant_noise.Q
    base[n : n + p, n : n + p] = plant_noise.R
    base[n + p : n + p + nu, n + p : n + p + nu] = controller_noise.Q
    base[n + p + nu :, n + p + nu :] = controller_noise.R
    Q_cl = symmetrize(G @ base @ G.T)

    dim = n + nu + m + p
    C_cl = np.zeros((m + p, dim))
    C_cl[:m, n + nu : n + nu + m] = np.eye(m)
    C_cl[m:, n + nu + m :] = np.eye(p)

    system = StateSpace(A_cl, np.zeros((dim, 0)), C_cl, np.zeros((m + p, 0)))
    noise = NoiseSpec(Q_cl, np.zeros((m + p, m + p)))
    return ClosedLoop(
        system=system,
        noise=noise,
        plant_dim=n,
        controller_dim=nu,
        input_dim=m,
        output_dim=p,
        s_plant=slice(0, n),
        s_controller=slice(n, n + nu),
        s_input=slice(n + nu, n + nu + m),
        s_output=slice(n + nu + m, dim),
    )


@dataclass(frozen=True)
class AugmentedSystem:
    """Closed loop, predictor, and basis bank stacked into one system.

    State ``[x_cl; x_hat; phi]``; output ``[y; x_hat; x_check]``.  The
    state matrix is block lower-triangular, so stability is inherited from
    the three diagonal blocks.  Output index slices are provided for the
    covariance bookkeeping downstream.
    """

    system: StateSpace
    noise: NoiseSpec
    closed: ClosedLoop
    s_state_closed: slice
    s_state_predictor: slice
    s_state_bank: slice
    o_output: slice
    o_predictor: slice
    o_regressor: slice


def augment_full(closed, kf, bank):
    """Stack the closed loop, the one-step predictor, and a basis bank.

    The predictor and the bank are both driven by the ``(u, y)`` components
    of the closed-loop state, so the stacked system is autonomous with the
    closed loop's disturbance as its only noise.  Its steady-state output
    covariance (from :func:`obfarx.linalg.solve_lyapunov`) is the exact
    second moment of ``[y; x_hat; x_check]``.
    """
    m, p = closed.input_dim, closed.output_dim
    nt = closed.state_dim
    nk = kf.state_dim
    bank_sys = bank.realization
    nb = bank_sys.state_dim
    if kf.realization.input_dim != m + p:
        raise DimensionError("predictor realization must take the stacked [u; y] input")
    if bank_sys.input_dim != m + p:
        raise DimensionError(
            f"bank must filter the {m + p}-channel [u; y] signal, got {bank_sys.input_dim}"
        )
    q_out = bank_sys.output_dim

    dim = nt + nk + nb
    A = np.zeros((dim, dim))
    A[:nt, :nt] = closed.system.A
    su, sy = closed.s_input, closed.s_output
    A[nt : nt + nk, su] = kf.realization.B[:, :m]
    A[nt : nt + nk, sy] = kf.realization.B[:, m:]
    A[nt : nt + nk, nt : nt + nk] = kf.realization.A
    A[nt + nk :, su] = bank_sys.B[:, :m]
    A[nt + nk :, sy] = bank_sys.B[:, m:]
    A[nt + nk :, nt + nk :] = bank_sys.A

    Q = np.zeros((dim, dim))
    Q[:nt, :nt] = closed.noise.Q

    n_out = p + nk + q_out
    C = np.zeros((n_out, dim))
    C[:p, sy] = np.eye(p)
    C[p : p + nk, nt : nt + nk] = np.eye(nk)
    C[p + nk :, nt + nk :] = bank_sys.C

    system = StateSpace(A, np.zeros((dim, 0)), C, np.zeros((n_out, 0)))
    return AugmentedSystem(
        system=system,
        noise=NoiseSpec(Q, np.zeros((n_out, n_out))),
        closed=closed,
        s_state_closed=slice(0, nt),
        s_state_predictor=slice(nt, nt + nk),
        s_state_bank=slice(nt + nk, dim),
        o_output=slice(0, p),
        o_predictor=slice(p, p + nk),
        o_regressor=slice(p + nk, n_out),
    )


def psd_bound(system, Q, R):
    """Analytic ceiling on the output power spectral density.

    For a stable system with state matrix ``A`` (spectral radius ``rho``),
    output map ``C``, process covariance ``Q`` and output covariance ``R``,
    returns

        ``(1 + rho) / (1 - rho) * ||C||^2 * ||S|| + ||R||``

    with ``S`` the stationary state covariance.  The value dominates
    ``||Phi_y(w)||`` for every frequency, which the test suite checks
    against a dense frequency-grid evaluation.
    """
    rho = spectral_radius(system.A)
    if rho >= 1.0:
        raise ValueError(f"PSD bound requires a stable system; spectral radius {rho:.6g}")
    S = solve_lyapunov(system.A, np.asarray(Q, dtype=float))
    c_norm = np.linalg.norm(system.C, 2) if system.C.size else 0.0
    s_norm = np.linalg.norm(S, 2) if S.size else 0.0
    r_norm = np.linalg.norm(np.atleast_2d(np.asarray(R, dtype=float)), 2)
    return float((1.0 + rho) / (1.0 - rho) * c_norm**2 * s_norm + r_norm)
