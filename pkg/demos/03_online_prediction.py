"""Online prediction without plant knowledge, against the exact oracle.

Runs the basis-regressor least-squares predictor on a plant it has never
seen, tracks the average regret to the oracle predictor, and compares the
learned coefficients with the exact asymptotic solution computed from
stationary covariances.
"""

import numpy as np

from obfarx import (
    PredictorConfig,
    asymptotic_coefficients,
    close_loop,
    design_kalman_predictor,
    log_checkpoints,
    random_stable_plant,
    run_predictor,
    white_noise_controller,
)

plant, noise = random_stable_plant(4, seed=5, rho=0.9)
controller, ctrl_noise = white_noise_controller(1, 1)
kf = design_kalman_predictor(plant, noise)
closed = close_loop(plant, noise, controller, ctrl_noise)

config = PredictorConfig(
    poles=(0.4,), q=2, input_dim=1, output_dim=1, update_mode="recursive"
)
asym = asymptotic_coefficients(closed, kf, config.build_bank())
print(f"exact asymptotic bias          : {asym.bias:.5f}")
print(f"excitation floor (min eig)     : {asym.excitation_floor:.5f}")
print(f"asymptotic coefficients L*     : {np.round(asym.L_star.ravel(), 4)}")
print()

horizon = 10**5
res = run_predictor(
    plant, noise, controller, ctrl_noise, kf, config, horizon, seed=1,
    checkpoints=log_checkpoints(horizon), asym=asym,
)
print(f"{'N':>8}  {'avg regret':>12}  {'||L(N)-L*||':>12}")
for N, rn in zip(res.checkpoints, res.regret):
    if N in (10, 100, 1000, 10000, 100000):
        gap = np.linalg.norm(res.L_snapshots[N] - asym.L_star)
        print(f"{N:>8}  {rn:>12.5f}  {gap:>12.5f}")
print()
print("the average regret settles onto the exact bias floor while the")
print("coefficient gap keeps shrinking at roughly the square-root rate")
