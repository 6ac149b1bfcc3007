"""Tour of the orthonormal basis machinery.

Builds three flavors of basis bank (single real pole, conjugate pair,
mixed), checks the balanced realization, and verifies orthonormality of
the generated filters by plain quadrature on the unit circle.
"""

import numpy as np

from obfarx import balanced_allpass, frequency_response, gobf_bank, impulse_response

BANKS = {
    "single pole 0.5 (Laguerre-style)": ([0.5], 4),
    "conjugate pair 0.6 +/- 0.3j (Kautz-style)": ([0.6 + 0.3j, 0.6 - 0.3j], 3),
    "mixed third order": ([0.2, -0.4 + 0.5j, -0.4 - 0.5j], 2),
}

grid = 2 * np.pi * np.arange(8192) / 8192

for name, (poles, q) in BANKS.items():
    inner = balanced_allpass(poles)
    r = inner.realization
    M = np.block([[r.A, r.B], [r.C, r.D]])
    block_defect = np.linalg.norm(M @ M.T - np.eye(M.shape[0]))
    gains = np.abs([inner.evaluate(np.exp(1j * w)) for w in grid[::64]])
    gain_defect = np.max(np.abs(gains - 1.0))

    bank = gobf_bank(inner, q, input_dim=1)
    V = frequency_response(bank, grid)
    gram = (V[:, :, None] * V.conj()[:, None, :]).mean(axis=0)
    ortho_defect = np.max(np.abs(gram - np.eye(bank.n_basis)))

    H = impulse_response(bank, 400)
    energies = (H**2).sum(axis=0)

    print(f"== {name} ==")
    print(f"  inner order {inner.order}, chain length {q}, {bank.n_basis} basis filters")
    print(f"  balanced block orthogonality defect : {block_defect:.2e}")
    print(f"  |G(e^iw)| - 1 on the circle         : {gain_defect:.2e}")
    print(f"  quadrature Gram defect (8192 pts)   : {ortho_defect:.2e}")
    print(f"  impulse-response energies           : {np.round(energies, 10)}")
    print()

print("A pole at the origin turns the chain into pure delays:")
H = impulse_response(gobf_bank(balanced_allpass([0.0]), 3, 1), 5)
for t, row in enumerate(H):
    print(f"  t={t}: {row}")
