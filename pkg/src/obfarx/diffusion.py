"""Heat-diffusion benchmark plant and randomized experiment driver.

A square room with internal obstacles is discretized on a uniform grid by
the explicit five-point stencil with zero (Dirichlet) boundary values in
the obstacles and outside the room.  A heat source driven by white noise
and a single temperature sensor turn the grid into a SISO LTI plant; each
experiment draws a fresh diffusion constant, designs the exact reference
predictor, and runs the online basis predictor against it.

Rasterization rule: a cell is blocked iff its *center* lies inside an
obstacle.  Points on a grid line (the nominal source/sensor positions sit
on cell corners) resolve to the cell with the larger index, i.e. cell
``min(floor(x / dx), n - 1)`` per axis.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionError
from .predictor import asymptotic_coefficients, run_predictor
from .regret import BoundParams, RegretSeries, bias_bound, fit_convergence_rate, tau
from .seeding import STREAM_PLANT_PARAMS, substream
from .statespace import (
    NoiseSpec,
    StateSpace,
    close_loop,
    design_kalman_predictor,
    white_noise_controller,
)

__all__ = [
    "RegionSpec",
    "RegionMask",
    "DiffusionConfig",
    "build_region",
    "discretize_heat",
    "DiffusionResult",
    "run_experiment",
    "random_stable_plant",
]


@dataclass(frozen=True)
class RegionSpec:
    """Geometry of the benchmark room.

    Two full discs near the top, one half-disc near the bottom whose flat
    side faces the ``half_flat_side`` direction ('down' keeps the upper
    half of the disc), a noise-driven source, and one sensor.
    """

    side: float = 3.0
    circles: tuple = (((0.75, 2.25), 0.1), ((2.25, 2.25), 0.1))
    half_circle: tuple = ((1.5, 0.95), 0.55)
    half_flat_side: str = "down"
    source: tuple = (1.5, 2.25)
    sensor: tuple = (1.5, 1.5)

    def __post_init__(self):
        if self.half_flat_side not in ("down", "up"):
            raise ValueError("half_flat_side must be 'down' or 'up'")
        # full-disc bounding box; conservative for the half disc
        for (cx, cy), r in tuple(self.circles) + (self.half_circle,):
            if not (0 <= cx - r and cx + r <= self.side and 0 <= cy - r and cy + r <= self.side):
                raise ValueError(f"obstacle at ({cx}, {cy}) r={r} leaves the square region")


@dataclass(frozen=True)
class RegionMask:
    """Rasterized region: blocked cells plus resolved source/sensor cells."""

    blocked: np.ndarray
    source_cell: tuple
    sensor_cell: tuple
    dx: float

    @property
    def shape(self):
        return self.blocked.shape

    def to_text(self):
        """Character-art mask, row y = top; '#' blocked, 'S' source, 'o' sensor."""
        ny, nx = self.blocked.shape
        rows = []
        for iy in reversed(range(ny)):
            row = []
            for ix in range(nx):
                if (ix, iy) == tuple(self.source_cell):
                    row.append("S")
                elif (ix, iy) == tuple(self.sensor_cell):
                    row.append("o")
                else:
                    row.append("#" if self.blocked[iy, ix] else ".")
            rows.append("".join(row))
        return "\n".join(rows) + "\n"


def _point_cell(pt, dx, nx, ny):
    ix = min(int(pt[0] / dx), nx - 1)
    iy = min(int(pt[1] / dx), ny - 1)
    return ix, iy


def build_region(spec=RegionSpec(), shape=(10, 10)):
    """Rasterize the region onto a grid of cells.

    A cell is blocked iff its center falls inside one of the obstacles;
    cell (ix, iy) has center ((ix + 0.5) dx, (iy + 0.5) dx).  Raises if
    the resolved source or sensor cell is blocked.
    """
    ny, nx = int(shape[0]), int(shape[1])
    dx = spec.side / nx
    if abs(spec.side / ny - dx) > 1e-12:
        raise ValueError("grid cells must be square")
    xs = (np.arange(nx) + 0.5) * dx
    ys = (np.arange(ny) + 0.5) * dx
    X, Y = np.meshgrid(xs, ys)  # [iy, ix]
    blocked = np.zeros((ny, nx), dtype=bool)
    for (cx, cy), r in spec.circles:
        blocked |= (X - cx) ** 2 + (Y - cy) ** 2 <= r * r
    (cx, cy), r = spec.half_circle
    inside = (X - cx) ** 2 + (Y - cy) ** 2 <= r * r
    keep = Y >= cy if spec.half_flat_side == "down" else Y <= cy
    blocked |= inside & keep

    source_cell = _point_cell(spec.source, dx, nx, ny)
    sensor_cell = _point_cell(spec.sensor, dx, nx, ny)
    for name, (ix, iy) in (("source", source_cell), ("sensor", sensor_cell)):
        if blocked[iy, ix]:
            raise ValueError(f"{name} cell ({ix}, {iy}) is inside an obstacle")
    return RegionMask(blocked=blocked, source_cell=source_cell, sensor_cell=sensor_cell, dx=dx)


def discretize_heat(
    blocked,
    alpha,
    dt,
    dx,
    source_cell,
    sensor_cell,
    r_noise=0.01,
    q_noise=0.0,
    source_mode="neighbor",
):
    """Explicit finite-difference plant for the masked heat equation.

    Works for any mask dimensionality (the 1-D analogue is used as a hand
    oracle in the tests).  Cell values outside the array or inside the
    mask are held at zero, so a free cell's update is

        ``s_i(t+1) = s_i(t) + c_i * (sum of free-neighbor values - 2 d s_i)``

    with ``c_i = alpha_i dt / dx^2`` and ``d`` the mask dimensionality.
    ``source_mode='neighbor'`` adds ``c * u`` to the source cell as if one
    extra neighbor were held at temperature u; ``'clamp'`` instead pins
    the source cell to the input one step later.

    ``source_cell`` and ``sensor_cell`` are index tuples in the same axis
    order as ``blocked``; the flat state index follows C order, so a 2-D
    (ny, nx) mask gives state index ``iy * nx + ix``.

    Raises if any ``c_i > 1/4`` (explicit-Euler stability) or if the
    source/sensor cell is blocked.
    """
    blocked = np.asarray(blocked, dtype=bool)
    shape = blocked.shape
    N = blocked.size
    ndim = blocked.ndim
    alpha_field = np.broadcast_to(np.asarray(alpha, dtype=float), shape)
    c = alpha_field * dt / dx**2
    if np.max(c) > 0.25 + 1e-12:
        raise ValueError(
            f"explicit stencil unstable: max alpha*dt/dx^2 = {np.max(c):.4g} > 0.25"
        )
    if source_mode not in ("neighbor", "clamp"):
        raise ValueError("source_mode must be 'neighbor' or 'clamp'")

    src = int(np.ravel_multi_index(tuple(source_cell), shape))
    sen = int(np.ravel_multi_index(tuple(sensor_cell), shape))
    blocked_flat = blocked.reshape(-1)
    c_flat = c.reshape(-1)
    if blocked_flat[src]:
        raise ValueError("source cell is blocked")
    if blocked_flat[sen]:
        raise ValueError("sensor cell is blocked")

    A = np.zeros((N, N))
    for i in range(N):
        if blocked_flat[i]:
            continue
        idx = np.unravel_index(i, shape)
        A[i, i] = 1.0 - 2.0 * ndim * c_flat[i]
        for axis in range(ndim):
            for step in (-1, 1):
                nb = list(idx)
                nb[axis] += step
                if not (0 <= nb[axis] < shape[axis]):
                    continue
                j = int(np.ravel_multi_index(tuple(nb), shape))
                if not blocked_flat[j]:
                    A[i, j] = c_flat[i]

    B = np.zeros((N, 1))
    if source_mode == "neighbor":
        B[src, 0] = c_flat[src]
    else:
        A[src, :] = 0.0
        B[src, 0] = 1.0
    C = np.zeros((1, N))
    C[0, sen] = 1.0
    sys = StateSpace(A, B, C, np.zeros((1, 1)))
    noise = NoiseSpec(q_noise * np.eye(N), np.array([[float(r_noise)]]))
    return sys, noise


@dataclass(frozen=True)
class DiffusionConfig:
    """Benchmark parameters: grid, step sizes, noise levels, horizon."""

    shape: tuple = (10, 10)
    dt: float = 0.1
    alpha_range: tuple = (0.005, 0.02)
    r_noise: float = 0.01
    q_noise: float = 0.0
    total_time: float = 200.0
    input_variance: float = 1.0
    source_mode: str = "neighbor"
    per_cell_alpha: bool = False
    region: RegionSpec = field(default_factory=RegionSpec)

    @property
    def steps(self):
        return int(round(self.total_time / self.dt))

    @property
    def dx(self):
        return self.region.side / self.shape[1]

    def __post_init__(self):
        worst = self.alpha_range[1] * self.dt / self.dx**2
        if worst > 0.25:
            raise ValueError(f"alpha_range[1] violates the stability limit ({worst:.4g} > 0.25)")


@dataclass(frozen=True)
class DiffusionResult:
    """Per-experiment record for the benchmark CSV."""

    seed: int
    alpha: float
    tau_value: float
    bias_exact: float
    bias_bound_unit: float
    series: RegretSeries
    gap_sq: np.ndarray
    asym_gap_sq: np.ndarray
    slope_fit: Optional[float]
    excitation_floor: float


def run_experiment(config, predictor, seed, delta=1e-9):
    """One benchmark experiment: draw a plant, design the oracle, run online.

    The diffusion constant is drawn uniformly (one scalar applied to every
    cell unless ``per_cell_alpha``), the plant is excited by white noise,
    the exact reference predictor comes from the Riccati design, and the
    online predictor's regret plus the exact asymptotic bias and its
    unit-constant geometric ceiling are recorded.
    """
    if predictor.input_dim != 1 or predictor.output_dim != 1:
        raise DimensionError("the diffusion benchmark plant is SISO")
    mask = build_region(config.region, config.shape)
    rng = substream(seed, STREAM_PLANT_PARAMS)
    lo, hi = config.alpha_range
    if config.per_cell_alpha:
        alpha = rng.uniform(lo, hi, size=config.shape)
        alpha_scalar = float(np.mean(alpha))
    else:
        alpha = float(rng.uniform(lo, hi))
        alpha_scalar = alpha
    plant, noise = discretize_heat(
        mask.blocked,
        alpha,
        config.dt,
        config.dx,
        tuple(reversed(mask.source_cell)),
        tuple(reversed(mask.sensor_cell)),
        r_noise=config.r_noise,
        q_noise=config.q_noise,
        source_mode=config.source_mode,
    )
    controller, ctrl_noise = white_noise_controller(1, 1, variance=config.input_variance)
    kf = design_kalman_predictor(plant, noise)
    closed = close_loop(plant, noise, controller, ctrl_noise)
    bank = predictor.build_bank()
    asym = asymptotic_coefficients(closed, kf, bank)

    t_val = tau(kf.eigenvalues, predictor.poles, delta)
    bound_unit = bias_bound(
        BoundParams(lam=tuple(kf.eigenvalues), mu=predictor.poles, q=predictor.q, delta=delta)
    )
    result = run_predictor(
        plant,
        noise,
        controller,
        ctrl_noise,
        kf,
        predictor,
        config.steps,
        seed,
        asym=asym,
    )
    series = RegretSeries(
        counts=result.checkpoints, values=result.regret, bias_estimate=asym.bias
    )
    try:
        slope = fit_convergence_rate(series, asym.bias).slope
    except ValueError:
        slope = None
    return DiffusionResult(
        seed=int(seed),
        alpha=alpha_scalar,
        tau_value=t_val,
        bias_exact=asym.bias,
        bias_bound_unit=bound_unit,
        series=series,
        gap_sq=result.gap_sq,
        asym_gap_sq=result.asym_gap_sq,
        slope_fit=slope,
        excitation_floor=asym.excitation_floor,
    )


def random_stable_plant(
    dim,
    seed,
    input_dim=1,
    output_dim=1,
    rho=None,
    rho_range=(0.3, 0.95),
    q_scale=0.1,
    r_scale=0.5,
):
    """Random stable test plant with PSD process and PD measurement noise.

    The state matrix is rescaled to a spectral radius drawn uniformly from
    ``rho_range`` (or fixed via ``rho``); Q is a scaled Wishart draw and R
    a scaled identity.
    """
    dim = int(dim)
    if dim < 1:
        raise ValueError("dim must be at least 1")
    rng = substream(seed, STREAM_PLANT_PARAMS)
    A = rng.standard_normal((dim, dim))
    target = float(rho) if rho is not None else float(rng.uniform(*rho_range))
    radius = np.max(np.abs(np.linalg.eigvals(A)))
    A *= target / max(radius, 1e-12)
    B = rng.standard_normal((dim, input_dim))
    C = rng.standard_normal((output_dim, dim))
    G = rng.standard_normal((dim, dim))
    Q = q_scale * (G @ G.T) / dim
    R = r_scale * np.eye(output_dim)
    return StateSpace(A, B, C, np.zeros((output_dim, input_dim))), NoiseSpec(Q, R)
