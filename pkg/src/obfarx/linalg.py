"""Dense matrix-equation solvers for discrete-time analysis.

Both solvers are doubling iterations: quadratic convergence, plain real
matrix products, and no external dependencies beyond numpy.  They are
exercised against independent oracles (truncated series, fixed-point
iteration, `scipy.linalg.solve_discrete_are`) in the test suite.
"""

import numpy as np

from .errors import ConvergenceError, DimensionError, UnstableSystemError

__all__ = [
    "spectral_radius",
    "solve_lyapunov",
    "solve_dare",
    "psd_factor",
    "symmetrize",
]


def spectral_radius(A):
    """Largest eigenvalue modulus of a square matrix."""
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 0.0
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"spectral_radius needs a square matrix, got {A.shape}")
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def symmetrize(M):
    """Project onto the symmetric part, (M + M.T)/2."""
    return 0.5 * (M + M.T)


def solve_lyapunov(A, Q, tol=1e-15, max_doublings=120):
    """Solve the discrete Lyapunov equation ``S = A S A^T + Q``.

    Uses squared-Smith doubling: partial sums of ``sum_k A^k Q (A^k)^T``
    with the matrix power squared each step, so convergence is quadratic
    even for spectral radius close to 1.

    Parameters
    ----------
    A : (n, n) array, spectral radius strictly below 1.
    Q : (n, n) symmetric array (the forcing term).

    Returns
    -------
    (n, n) symmetric solution.

    Raises
    ------
    UnstableSystemError
        If ``spectral_radius(A) >= 1``; the message names the radius.
    ConvergenceError
        If the doubling cap is exceeded (only reachable for radii
        pathologically close to 1).
    """
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if A.shape != Q.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"incompatible shapes A{A.shape}, Q{Q.shape}")
    if A.size == 0:
        return np.zeros_like(Q)
    rho = spectral_radius(A)
    if rho >= 1.0:
        raise UnstableSystemError(
            f"Lyapunov equation requires a stable matrix; spectral radius is {rho:.6g}"
        )
    S = symmetrize(Q).copy()
    M = A.copy()
    for _ in range(max_doublings):
        S_next = S + M @ S @ M.T
        M = M @ M
        if np.linalg.norm(S_next - S) <= tol * (1.0 + np.linalg.norm(S_next)):
            return symmetrize(S_next)
        S = S_next
    raise ConvergenceError(
        f"Lyapunov doubling did not converge in {max_doublings} steps (rho={rho:.6g})"
    )


def solve_dare(A, C, Q, R, tol=1e-14, max_doublings=200, max_fixed_point=10**6):
    """Solve the filter-form Riccati equation for the one-step predictor.

    Finds the stabilizing ``P`` with

        ``P = A P A^T - A P C^T (C P C^T + R)^{-1} C P A^T + Q``.

    A structure-preserving doubling iteration is tried first; if it stalls,
    a plain fixed-point iteration of the Riccati map takes over.
    Convergence is declared when successive iterates differ by at most
    ``tol * (1 + ||P||)``.

    Raises
    ------
    ConvergenceError
        If neither phase converges; the message carries the final residual.
    """
    A = np.asarray(A, dtype=float)
    C = np.asarray(C, dtype=float)
    Q = np.asarray(Q, dtype=float)
    R = np.asarray(R, dtype=float)
    n = A.shape[0]
    p = C.shape[0]
    if A.shape != (n, n) or C.shape != (p, n) or Q.shape != (n, n) or R.shape != (p, p):
        raise DimensionError(
            f"incompatible shapes A{A.shape}, C{C.shape}, Q{Q.shape}, R{R.shape}"
        )
    if np.min(np.linalg.eigvalsh(symmetrize(R))) <= 0.0:
        raise ValueError("measurement covariance R must be positive definite")

    # Doubling in the dual (control) coordinates: A_k, G_k, H_k with H_k -> P.
    Ak = A.T.copy()
    Gk = C.T @ np.linalg.solve(R, C)
    Hk = symmetrize(Q).copy()
    I = np.eye(n)
    try:
        for _ in range(max_doublings):
            W = I + Gk @ Hk
            WA = np.linalg.solve(W, Ak)
            WG = np.linalg.solve(W, Gk)
            H_next = symmetrize(Hk + Ak.T @ Hk @ WA)
            G_next = symmetrize(Gk + Ak @ WG @ Ak.T)
            A_next = Ak @ WA
            delta = np.linalg.norm(H_next - Hk) / (1.0 + np.linalg.norm(H_next))
            Ak, Gk, Hk = A_next, G_next, H_next
            if delta <= tol:
                return Hk
    except np.linalg.LinAlgError:
        pass  # singular doubling pencil; fall through to fixed point

    # Fixed-point fallback: P <- A P A^T - A P C^T (C P C^T + R)^-1 C P A^T + Q.
    P = symmetrize(Q).copy()
    residual = np.inf
    for _ in range(max_fixed_point):
        PCt = P @ C.T
        P_next = symmetrize(A @ (P - PCt @ np.linalg.solve(C @ PCt + R, PCt.T)) @ A.T + Q)
        residual = np.linalg.norm(P_next - P) / (1.0 + np.linalg.norm(P_next))
        P = P_next
        if residual <= tol:
            return P
    raise ConvergenceError(
        f"Riccati iteration did not converge; final relative step {residual:.3e}"
    )


def psd_factor(M, tol=1e-10):
    """Factor a symmetric PSD matrix as ``M = F F^T`` via eigendecomposition.

    Eigenvalues in ``[-tol * scale, 0)`` are clipped to zero; anything more
    negative raises, since the matrix is then not a covariance.
    """
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return np.zeros_like(M)
    vals, vecs = np.linalg.eigh(symmetrize(M))
    scale = max(1.0, float(np.max(np.abs(vals))))
    if np.min(vals) < -tol * scale:
        raise ValueError(
            f"matrix is not PSD: min eigenvalue {np.min(vals):.3e} (scale {scale:.3e})"
        )
    return vecs * np.sqrt(np.clip(vals, 0.0, None))
