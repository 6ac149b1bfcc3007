"""Orthonormal basis filters generated by an all-pass inner function.

An inner function G_b(z) of order n_b with poles mu_1..mu_nb inside the
unit disc is realized in balanced form, i.e. with an orthogonal system
block matrix [[A_b, B_b], [C_b, D_b]].  Chaining q copies of G_b and
tapping the section states yields q_check = q * n_b scalar filters

    V_{j + (k-1) n_b}(z) = e_j^T (zI - A_b)^{-1} B_b * G_b(z)^{k-1}

that form an orthonormal family in H2.  The balanced realization makes
the orthonormality exact by construction; the test suite verifies it by
independent quadrature.

Conventions fixed here (they pin down the coefficient layout downstream):

* a real pole ``a`` is realized as the section (a, s, s, -a) with
  ``s = sqrt(1 - a^2)``, i.e. ``G(z) = (1 - a z)/(z - a)``;
* a conjugate pair is realized as a 2x2 balanced section of
  ``G(z) = (pi z^2 - sigma z + 1)/(z^2 - sigma z + pi)``;
* sections are cascaded in ascending (Re, |Im|) pole order;
* a bank applied to a multichannel signal orders its outputs basis-major,
  channel-minor: output index ``k * channels + c`` is basis V_{k+1}
  applied to channel c.
"""

from dataclasses import dataclass, field

import numpy as np

from .statespace import StateSpace

__all__ = [
    "InnerFunction",
    "GobfBank",
    "balanced_allpass",
    "gobf_bank",
    "frequency_response",
    "impulse_response",
]

_CONJ_TOL = 1e-9
_REAL_TOL = 1e-12


def _real_section(a):
    s = np.sqrt(1.0 - a * a)
    return (
        np.array([[a]]),
        np.array([[s]]),
        np.array([[s]]),
        np.array([[-a]]),
    )


def _pair_section(mu):
    """Balanced 2x2 section for the conjugate pair (mu, conj(mu)).

    Built from the companion realization and the exact 2x2 controllability
    Gramian; for a minimal all-pass realization, normalizing that Gramian
    to the identity also normalizes the observability Gramian, which makes
    the block matrix orthogonal.
    """
    sigma = 2.0 * mu.real
    pi = abs(mu) ** 2
    A0 = np.array([[sigma, -pi], [1.0, 0.0]])
    B0 = np.array([[1.0], [0.0]])
    C0 = np.array([[-sigma * (1.0 - pi), 1.0 - pi**2]])
    D0 = np.array([[pi]])
    P = np.linalg.solve(np.eye(4) - np.kron(A0, A0), (B0 @ B0.T).ravel()).reshape(2, 2)
    R = np.linalg.cholesky(0.5 * (P + P.T))
    return np.linalg.inv(R) @ A0 @ R, np.linalg.solve(R, B0), C0 @ R, D0


def _cascade(first, second):
    A1, B1, C1, D1 = first
    A2, B2, C2, D2 = second
    A = np.block([[A1, np.zeros((A1.shape[0], A2.shape[0]))], [B2 @ C1, A2]])
    return A, np.vstack([B1, B2 @ D1]), np.hstack([D2 @ C1, C2]), D2 @ D1


@dataclass(frozen=True)
class InnerFunction:
    """Balanced realization of an all-pass filter with the given poles."""

    poles: tuple
    realization: StateSpace

    @property
    def order(self):
        return self.realization.state_dim

    def evaluate(self, z):
        """G_b at a complex point (scalar complex result)."""
        return complex(self.realization.transfer(z)[0, 0])


def balanced_allpass(poles):
    """Construct the balanced all-pass inner function for a pole set.

    ``poles`` must all lie strictly inside the unit disc and form a
    conjugate-closed multiset; a lone complex pole is rejected rather than
    silently completed.  Real-pole and conjugate-pair sections are cascaded
    in ascending (Re, |Im|) order, which keeps the full block matrix
    orthogonal and every matrix real.
    """
    poles = [complex(z) for z in np.atleast_1d(np.asarray(poles, dtype=complex))]
    if not poles:
        raise ValueError("at least one pole is required")
    for i, z in enumerate(poles):
        if abs(z) >= 1.0:
            raise ValueError(f"pole {i} has modulus {abs(z):.6g} >= 1")

    order = sorted(range(len(poles)), key=lambda i: (poles[i].real, abs(poles[i].imag)))
    used = [False] * len(poles)
    sections = []
    canonical = []
    for i in order:
        if used[i]:
            continue
        z = poles[i]
        if abs(z.imag) <= _REAL_TOL:
            used[i] = True
            sections.append(_real_section(z.real))
            canonical.append(complex(z.real))
            continue
        mate = None
        for j in order:
            if j != i and not used[j] and abs(np.conj(z) - poles[j]) <= _CONJ_TOL * (1 + abs(z)):
                mate = j
                break
        if mate is None:
            raise ValueError(
                f"pole {i} ({z:.6g}) has no conjugate partner; the pole set must be conjugate-closed"
            )
        used[i] = used[mate] = True
        top = z if z.imag > 0 else np.conj(z)
        sections.append(_pair_section(top))
        canonical.extend([complex(top), complex(np.conj(top))])

    full = sections[0]
    for sec in sections[1:]:
        full = _cascade(full, sec)
    A, B, C, D = full

    block = np.block([[A, B], [C, D]])
    defect = np.linalg.norm(block @ block.T - np.eye(block.shape[0]))
    if defect > 1e-10:
        raise ArithmeticError(f"balanced construction lost orthogonality (defect {defect:.3e})")
    return InnerFunction(poles=tuple(canonical), realization=StateSpace(A, B, C, D))


@dataclass(frozen=True)
class GobfBank:
    """Stacked realization of the first q_check = q * n_b basis filters.

    ``realization`` filters an ``input_dim``-channel signal through every
    scalar basis; its state equals its output (C = I), ordered basis-major,
    channel-minor.  ``chain_A``/``chain_B`` hold the single-channel chain
    used for frequency- and time-domain evaluation of the scalar bases.
    """

    inner: InnerFunction
    q: int
    input_dim: int
    realization: StateSpace
    chain_A: np.ndarray = field(repr=False, default=None)
    chain_B: np.ndarray = field(repr=False, default=None)

    @property
    def n_basis(self):
        """Number of scalar basis filters, q * n_b."""
        return self.q * self.inner.order

    @property
    def regressor_dim(self):
        """Length of the stacked regressor, n_basis * input_dim."""
        return self.n_basis * self.input_dim

    def spectral_radius(self):
        return max((abs(z) for z in self.inner.poles), default=0.0)


def gobf_bank(inner, q, input_dim=1):
    """Build the chain realization emitting all q * n_b basis outputs.

    Stage k of the chain is a copy of the inner section driven by the
    all-pass output of stage k-1, so its state carries exactly the k-th
    block of basis signals.  ``q = 0`` yields the degenerate empty bank
    (zero states and outputs), which downstream code treats as "predict
    with no regressors".
    """
    q = int(q)
    input_dim = int(input_dim)
    if q < 0:
        raise ValueError("chain length q must be nonnegative")
    if input_dim < 1:
        raise ValueError("input_dim must be positive")
    Ab = inner.realization.A
    Bb = inner.realization.B
    Cb = inner.realization.C
    Db = inner.realization.D
    nb = inner.order
    n = q * nb
    A = np.zeros((n, n))
    B = np.zeros((n, 1))
    Dk = np.eye(1)
    for k in range(q):
        rows = slice(k * nb, (k + 1) * nb)
        A[rows, rows] = Ab
        B[rows] = Bb @ Dk
        Dk = Db @ Dk
        for j in range(k):
            A[rows, j * nb : (j + 1) * nb] = Bb @ np.linalg.matrix_power(Db, k - 1 - j) @ Cb
    realization = StateSpace(
        np.kron(A, np.eye(input_dim)),
        np.kron(B, np.eye(input_dim)),
        np.eye(n * input_dim),
        np.zeros((n * input_dim, input_dim)),
    )
    return GobfBank(
        inner=inner,
        q=q,
        input_dim=input_dim,
        realization=realization,
        chain_A=A,
        chain_B=B,
    )


def frequency_response(bank, omega):
    """Evaluate the scalar bases V_k on the unit circle.

    ``omega`` may be a scalar or a 1-D array of angles; the result has one
    column per basis (shape ``(n_basis,)`` or ``(len(omega), n_basis)``).
    """
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    n = bank.chain_A.shape[0]
    if n == 0:
        out = np.zeros((w.size, 0), dtype=complex)
        return out[0] if np.isscalar(omega) or np.asarray(omega).ndim == 0 else out
    z = np.exp(1j * w)
    M = z[:, None, None] * np.eye(n)[None] - bank.chain_A[None]
    V = np.linalg.solve(M, np.broadcast_to(bank.chain_B, (w.size, n, 1)).astype(complex))
    V = V[:, :, 0]
    if np.isscalar(omega) or np.asarray(omega).ndim == 0:
        return V[0]
    return V


def impulse_response(bank, length):
    """First ``length`` samples of every scalar basis impulse response.

    Row t holds (h_1(t), ..., h_{n_basis}(t)); all bases are strictly
    proper, so row 0 is zero.
    """
    length = int(length)
    n = bank.chain_A.shape[0]
    H = np.zeros((length, n))
    x = np.zeros(n)
    for t in range(length):
        H[t] = x
        x = bank.chain_A @ x + (bank.chain_B[:, 0] if t == 0 else 0.0)
    return H
