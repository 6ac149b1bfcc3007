"""Command-line front end: experiment orchestration and artifact emission.

Subcommands
-----------
``regret``
    Online prediction runs on a fixed plant across noise seeds.
``bias-sweep``
    Exact asymptotic bias versus the number of basis blocks, with the
    fitted bound constant.
``bench-diffusion``
    The randomized heat-diffusion benchmark.
``tau-table``
    Pole-matching decay levels over a grid of basis poles.
``selftest``
    Fast numerical battery; exit 0 on pass.

Every experiment mode writes ``results.csv`` (fixed schema),
``summary.json`` (may contain wall-clock fields), and ``manifest.json``
(config hash + echo; fully deterministic).  Exit codes: 0 success,
2 configuration error, 3 numerical failure (partial results are kept).
"""

import argparse
import concurrent.futures
import os
import sys
import time

import numpy as np

from . import __version__
from .config import RunConfig, parse_config, parse_config_text
from .diffusion import DiffusionConfig, RegionSpec, build_region, random_stable_plant, run_experiment
from .errors import ConfigError, ObfArxError
from .predictor import PredictorConfig, asymptotic_coefficients, run_predictor
from .records import (
    CSV_HEADER,
    ExperimentRecord,
    dump_json,
    matrix_from_json,
    records_to_csv,
    sha256_text,
    snapshots_to_json,
)
from .regret import (
    BoundParams,
    RegretSeries,
    bias_bound,
    fit_alpha,
    fit_convergence_rate,
    log_checkpoints,
    pooled_deviation,
    tau,
)
from .statespace import NoiseSpec, StateSpace, close_loop, design_kalman_predictor, white_noise_controller

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _predictor_config(cfg: RunConfig):
    return PredictorConfig(
        poles=cfg.poles,
        q=cfg.q,
        input_dim=1,
        output_dim=1,
        eps_reg=cfg.eps_reg,
        condition_cap=cfg.condition_cap,
        update_mode=cfg.update_mode,
        resolve_every=cfg.resolve_every,
    )


def _load_plant(cfg: RunConfig):
    if cfg.plant_source == "file":
        import json

        with open(cfg.plant_file, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        sys_ = StateSpace(
            matrix_from_json(payload["A"]),
            matrix_from_json(payload["B"]),
            matrix_from_json(payload["C"]),
            matrix_from_json(payload["D"]) if "D" in payload else np.zeros((1, 1)),
        )
        noise = NoiseSpec(matrix_from_json(payload["Q"]), matrix_from_json(payload["R"]))
        return sys_, noise
    return random_stable_plant(cfg.plant_dim, cfg.plant_seed, rho=cfg.plant_rho)


class _RegretContext:
    """Prepared, seed-independent pieces of a regret run (picklable)."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.predictor = _predictor_config(cfg)
        self.plant, self.noise = _load_plant(cfg)
        self.controller, self.ctrl_noise = white_noise_controller(
            self.plant.input_dim, self.plant.output_dim
        )
        self.kf = design_kalman_predictor(self.plant, self.noise)
        closed = close_loop(self.plant, self.noise, self.controller, self.ctrl_noise)
        self.asym = asymptotic_coefficients(closed, self.kf, self.predictor.build_bank())
        self.tau_value = tau(self.kf.eigenvalues, cfg.poles, cfg.delta)
        self.bound_unit = bias_bound(
            BoundParams(lam=tuple(self.kf.eigenvalues), mu=cfg.poles, q=cfg.q, delta=cfg.delta)
        )
        self.horizon = cfg.horizon if cfg.horizon is not None else 10**5
        self.checkpoints = log_checkpoints(self.horizon, cfg.per_decade)


def _run_regret_seed(ctx, seed):
    t0 = time.perf_counter()
    res = run_predictor(
        ctx.plant,
        ctx.noise,
        ctx.controller,
        ctx.ctrl_noise,
        ctx.kf,
        ctx.predictor,
        ctx.horizon,
        seed,
        checkpoints=ctx.checkpoints,
        asym=ctx.asym,
    )
    series = RegretSeries(counts=res.checkpoints, values=res.regret)
    try:
        slope = fit_convergence_rate(series, ctx.asym.bias).slope
    except ValueError:
        slope = None
    return ExperimentRecord(
        seed=int(seed),
        alpha=None,
        tau_value=ctx.tau_value,
        bias_exact=ctx.asym.bias,
        bias_bound=ctx.bound_unit,
        checkpoints=res.checkpoints,
        regret=res.regret,
        slope_fit=slope,
        wall_clock=time.perf_counter() - t0,
        gap_sq=res.gap_sq,
        asym_gap_sq=res.asym_gap_sq,
        L_snapshots=res.L_snapshots,
    )


def _run_diffusion_seed(ctx, seed):
    diff_cfg, pred_cfg, delta = ctx
    t0 = time.perf_counter()
    result = run_experiment(diff_cfg, pred_cfg, seed, delta=delta)
    return ExperimentRecord(
        seed=int(seed),
        alpha=result.alpha,
        tau_value=result.tau_value,
        bias_exact=result.bias_exact,
        bias_bound=result.bias_bound_unit,
        checkpoints=result.series.counts,
        regret=result.series.values,
        slope_fit=result.slope_fit,
        wall_clock=time.perf_counter() - t0,
        gap_sq=result.gap_sq,
        asym_gap_sq=result.asym_gap_sq,
    )


def _map_seeds(worker, ctx, seeds, jobs):
    """Run one experiment per seed; results return in seed order."""
    if jobs <= 1 or len(seeds) <= 1:
        return [(s, _call_guarded(worker, ctx, s)) for s in seeds]
    results = {}
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = {pool.submit(worker, ctx, s): s for s in seeds}
        for fut in concurrent.futures.as_completed(futures):
            s = futures[fut]
            try:
                results[s] = fut.result()
            except Exception as exc:  # noqa: BLE001 - recorded, re-raised at merge
                results[s] = exc
    return [(s, results[s]) for s in seeds]


def _call_guarded(worker, ctx, seed):
    try:
        return worker(ctx, seed)
    except Exception as exc:  # noqa: BLE001
        return exc


def _write_outputs(out_dir, cfg, records, summary, extra_files=()):
    os.makedirs(out_dir, exist_ok=True)
    csv_text = records_to_csv(records) if not isinstance(records, str) else records
    with open(os.path.join(out_dir, "results.csv"), "w", encoding="utf-8") as fh:
        fh.write(csv_text)
    dump_json(summary, os.path.join(out_dir, "summary.json"))
    echo = cfg.echo_text()
    manifest = {
        "mode": cfg.mode,
        "package_version": __version__,
        "seeds": list(cfg.seeds),
        "config_sha256": sha256_text(echo),
        "config_echo": echo.splitlines(),
    }
    dump_json(manifest, os.path.join(out_dir, "manifest.json"))
    for name, text in extra_files:
        with open(os.path.join(out_dir, name), "w", encoding="utf-8") as fh:
            fh.write(text)


def _pooled_slope(records, bias, n_min=None, n_max=None):
    counts = records[0].checkpoints
    values = np.vstack([r.regret for r in records])
    pooled = pooled_deviation(counts, values, bias)
    try:
        return fit_convergence_rate(pooled, 0.0, n_min=n_min, n_max=n_max).slope
    except ValueError:
        return None


def _collect(results):
    """Split guarded results into records and failures."""
    records, failures = [], []
    for seed, item in results:
        if isinstance(item, Exception):
            failures.append((seed, f"{type(item).__name__}: {item}"))
        else:
            records.append(item)
    return records, failures


def _cmd_regret(cfg: RunConfig):
    t0 = time.perf_counter()
    ctx = _RegretContext(cfg)
    results = _map_seeds(_run_regret_seed, ctx, cfg.seeds, cfg.jobs)
    records, failures = _collect(results)
    pooled = _pooled_slope(records, ctx.asym.bias) if records else None
    summary = {
        "mode": "regret",
        "n_seeds": len(cfg.seeds),
        "n_failed": len(failures),
        "failures": [f"seed {s}: {msg}" for s, msg in failures],
        "bias_exact": ctx.asym.bias,
        "tau": ctx.tau_value,
        "bias_bound_unit_alpha": ctx.bound_unit,
        "excitation_floor": ctx.asym.excitation_floor,
        "pooled_deviation_slope": pooled,
        "mean_final_regret": float(np.mean([r.regret[-1] for r in records])) if records else None,
        "wall_clock_s": time.perf_counter() - t0,
    }
    _write_outputs(cfg.out, cfg, records, summary)
    if cfg.save_coefficients:
        for rec in records:
            if rec.L_snapshots:
                dump_json(
                    snapshots_to_json(rec.L_snapshots),
                    os.path.join(cfg.out, f"coefficients_seed{rec.seed}.json"),
                )
    if failures:
        for s, msg in failures:
            print(f"[regret] seed {s} failed: {msg}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"[regret] {len(records)} runs -> {cfg.out}/results.csv")
    return EXIT_OK


def _cmd_bias_sweep(cfg: RunConfig):
    t0 = time.perf_counter()
    plant, noise = _load_plant(cfg)
    controller, ctrl_noise = white_noise_controller(plant.input_dim, plant.output_dim)
    kf = design_kalman_predictor(plant, noise)
    closed = close_loop(plant, noise, controller, ctrl_noise)
    t_val = tau(kf.eigenvalues, cfg.poles, cfg.delta)
    qs = list(range(cfg.sweep_q_min, cfg.sweep_q_max + 1))
    biases = []
    base = _predictor_config(cfg)
    for q in qs:
        pred = PredictorConfig(
            poles=base.poles,
            q=q,
            input_dim=1,
            output_dim=1,
            eps_reg=base.eps_reg,
            condition_cap=base.condition_cap,
            update_mode=base.update_mode,
            resolve_every=base.resolve_every,
        )
        asym = asymptotic_coefficients(closed, kf, pred.build_bank())
        biases.append(asym.bias)
    alpha_fit = fit_alpha(qs, biases, tuple(kf.eigenvalues), cfg.poles, cfg.delta)
    n_b = len(cfg.poles)

    lines = [CSV_HEADER]
    for q, b in zip(qs, biases):
        bound = bias_bound(
            BoundParams(lam=tuple(kf.eigenvalues), mu=cfg.poles, q=q, delta=cfg.delta, alpha_fit=alpha_fit)
        )
        # sweep rows carry the basis count q*n_b in checkpoint_N
        lines.append(
            f"{cfg.plant_seed},,{t_val!r},{b!r},{bound!r},{q * n_b},,"
        )
    summary = {
        "mode": "bias-sweep",
        "tau": t_val,
        "alpha_fit": alpha_fit,
        "q_range": [cfg.sweep_q_min, cfg.sweep_q_max],
        "biases": {str(q): b for q, b in zip(qs, biases)},
        "wall_clock_s": time.perf_counter() - t0,
    }
    _write_outputs(cfg.out, cfg, "\n".join(lines) + "\n", summary)
    print(f"[bias-sweep] q={cfg.sweep_q_min}..{cfg.sweep_q_max} alpha_fit={alpha_fit:.6g}")
    return EXIT_OK


def _cmd_bench_diffusion(cfg: RunConfig):
    t0 = time.perf_counter()
    seeds = cfg.seeds
    if cfg.diffusion_full and len(seeds) < 100:
        base = seeds[0]
        seeds = tuple(range(base, base + 100))
    diff_cfg = DiffusionConfig(
        dt=cfg.dt,
        alpha_range=(cfg.alpha_min, cfg.alpha_max),
        r_noise=cfg.r_noise,
        q_noise=cfg.q_noise,
        total_time=cfg.total_time if cfg.horizon is None else cfg.horizon * cfg.dt,
        input_variance=cfg.input_variance,
        source_mode=cfg.source_mode,
    )
    pred_cfg = _predictor_config(cfg)
    results = _map_seeds(_run_diffusion_seed, (diff_cfg, pred_cfg, cfg.delta), seeds, cfg.jobs)
    records, failures = _collect(results)
    biases = [r.bias_exact for r in records]
    pooled = _pooled_slope(records, 0.0) if records else None
    summary = {
        "mode": "bench-diffusion",
        "n_seeds": len(seeds),
        "n_failed": len(failures),
        "failures": [f"seed {s}: {msg}" for s, msg in failures],
        "mean_bias": float(np.mean(biases)) if biases else None,
        "median_bias": float(np.median(biases)) if biases else None,
        "mean_tau": float(np.mean([r.tau_value for r in records])) if records else None,
        "pooled_regret_slope": pooled,
        "wall_clock_s": time.perf_counter() - t0,
    }
    region_art = build_region(RegionSpec()).to_text()
    cfg_for_write = cfg if seeds == cfg.seeds else _with_seeds(cfg, seeds)
    _write_outputs(cfg.out, cfg_for_write, records, summary, extra_files=[("region.txt", region_art)])
    if failures:
        for s, msg in failures:
            print(f"[bench-diffusion] seed {s} failed: {msg}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(
        f"[bench-diffusion] {len(records)} experiments, mean bias "
        f"{summary['mean_bias']:.3e} -> {cfg.out}/results.csv"
    )
    return EXIT_OK


def _with_seeds(cfg, seeds):
    from dataclasses import replace

    echo = tuple(
        (k, ",".join(str(s) for s in seeds)) if k == "seeds" else (k, v) for k, v in cfg.echo
    )
    return replace(cfg, seeds=tuple(seeds), echo=echo)


def _cmd_tau_table(cfg: RunConfig):
    t0 = time.perf_counter()
    start, stop, step = cfg.tau_mu_grid
    mus = []
    k = 0
    while start + k * step <= stop + step / 2:
        mus.append(start + k * step)
        k += 1
    lines = [CSV_HEADER]
    values = []
    for idx, mu in enumerate(mus):
        t_val = tau(cfg.tau_lam, [mu], cfg.delta)
        values.append(t_val)
        try:
            bound = bias_bound(
                BoundParams(lam=cfg.tau_lam, mu=(mu,), q=cfg.q, delta=cfg.delta)
            )
            bound_txt = repr(bound)
        except ValueError:
            bound_txt = ""  # vacuous: tau >= 1
        lines.append(f",,{t_val!r},,{bound_txt},{idx},,")
    summary = {
        "mode": "tau-table",
        "lam": [[z.real, z.imag] for z in cfg.tau_lam],
        "mu_grid": {"start": start, "stop": stop, "step": step},
        "mu_values": list(mus),
        "tau_values": values,
        "wall_clock_s": time.perf_counter() - t0,
    }
    _write_outputs(cfg.out, cfg, "\n".join(lines) + "\n", summary)
    print(f"[tau-table] {len(mus)} grid points -> {cfg.out}/results.csv")
    return EXIT_OK


def _cmd_selftest(cfg: RunConfig):
    from .gobf import balanced_allpass, frequency_response, gobf_bank
    from .linalg import solve_dare, solve_lyapunov

    checks = []

    def check(name, fn):
        try:
            fn()
            checks.append((name, True, ""))
        except Exception as exc:  # noqa: BLE001
            checks.append((name, False, f"{type(exc).__name__}: {exc}"))

    def lyapunov_scalar():
        S = solve_lyapunov(np.array([[0.5]]), np.array([[1.0]]))
        assert abs(S[0, 0] - 4.0 / 3.0) < 1e-12

    def riccati_scalar():
        P = solve_dare(np.array([[0.9]]), np.array([[1.0]]), np.eye(1), np.eye(1))
        root = (0.81 + np.sqrt(0.81**2 + 4.0)) / 2.0
        assert abs(P[0, 0] - root) < 1e-10

    def basis_orthonormal():
        bank = gobf_bank(balanced_allpass([0.6 + 0.3j, 0.6 - 0.3j]), 3, 1)
        w = 2 * np.pi * np.arange(4096) / 4096
        V = frequency_response(bank, w)
        G = (V[:, :, None] * V.conj()[:, None, :]).mean(axis=0)
        assert np.max(np.abs(G - np.eye(bank.n_basis))) < 1e-8

    def tau_match():
        assert tau([0.5], [0.5], 1e-9) < 1e-8
        assert abs(tau([0.9], [0.0], 1e-9) - 0.81) < 1e-8

    def diffusion_small():
        pred = PredictorConfig(poles=(0.0,), q=4, input_dim=1, output_dim=1, condition_cap=1e6)
        diff = DiffusionConfig(total_time=20.0)
        res = run_experiment(diff, pred, 1)
        assert res.bias_exact >= 0 and np.all(np.isfinite(res.series.values))

    check("lyapunov-scalar-closed-form", lyapunov_scalar)
    check("riccati-scalar-closed-form", riccati_scalar)
    check("basis-orthonormality", basis_orthonormal)
    check("tau-arithmetic", tau_match)
    check("diffusion-smoke", diffusion_small)

    failed = 0
    for name, ok, msg in checks:
        print(f"[selftest] {'PASS' if ok else 'FAIL'} {name}" + (f" ({msg})" if msg else ""))
        failed += 0 if ok else 1
    return EXIT_OK if failed == 0 else EXIT_NUMERICAL


_COMMANDS = {
    "regret": _cmd_regret,
    "bias-sweep": _cmd_bias_sweep,
    "bench-diffusion": _cmd_bench_diffusion,
    "tau-table": _cmd_tau_table,
    "selftest": _cmd_selftest,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="obfarx",
        description="Online basis-filter output prediction: experiments and analytics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="path to a key-value config file")
        p.add_argument("--seeds", default=None, help="seed range a..b or comma list")
        p.add_argument("--jobs", type=int, default=None, help="parallel worker count")
        p.add_argument("--out", default=None, help="output directory")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    overrides = {"mode": args.command}
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    if args.out is not None:
        overrides["out"] = args.out
    try:
        if args.seeds is not None:
            from .config import _parse_seeds

            overrides["seeds"] = _parse_seeds(args.seeds, "--seeds", 0)
        if args.config is not None:
            cfg = parse_config(args.config, overrides=overrides)
        else:
            cfg = parse_config_text("", overrides=overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        return _COMMANDS[cfg.mode](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ObfArxError, ArithmeticError, np.linalg.LinAlgError, ValueError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
