"""Designing the optimal one-step output predictor for a known plant.

Solves the Riccati equation for a random stable plant, checks the
residual, and confirms on a long simulation that the resulting predictor
beats naive baselines (copy the last output, predict zero).
"""

import numpy as np

from obfarx import (
    close_loop,
    design_kalman_predictor,
    random_stable_plant,
    simulate,
    white_noise_controller,
)

plant, noise = random_stable_plant(4, seed=2024, rho=0.85)
kf = design_kalman_predictor(plant, noise)

P = kf.riccati_solution
A, C = plant.A, plant.C
residual = np.linalg.norm(
    A @ P @ A.T - A @ P @ C.T @ np.linalg.solve(C @ P @ C.T + noise.R, C @ P @ A.T) + noise.Q - P
)
print(f"plant spectral radius      : {plant.spectral_radius():.4f}")
print(f"Riccati residual           : {residual:.2e}")
print(f"predictor gain             : {np.round(kf.gain.ravel(), 4)}")
print(f"predictor eigenvalues      : {np.round(kf.eigenvalues, 4)}")

controller, ctrl_noise = white_noise_controller(1, 1)
closed = close_loop(plant, noise, controller, ctrl_noise)
traj = simulate(closed.system, closed.noise, 10**5, seed=7, steady_start=True)
uy = traj.outputs
y = uy[:, closed.input_dim :]

xh = np.zeros(kf.state_dim)
preds = np.empty_like(y)
for t in range(len(y)):
    preds[t] = kf.realization.C @ xh
    xh = kf.realization.A @ xh + kf.realization.B @ uy[t]

warm = slice(500, None)
mse = lambda e: float(np.mean(e**2))
print()
print(f"one-step MSE, designed predictor : {mse(y[warm] - preds[warm]):.5f}")
print(f"one-step MSE, copy last output   : {mse(y.ravel()[500:] - y.ravel()[499:-1]):.5f}")
print(f"one-step MSE, predict zero       : {mse(y[warm]):.5f}")
print(f"innovation floor (C P C^T + R)   : {(C @ P @ C.T + noise.R)[0, 0]:.5f}")
