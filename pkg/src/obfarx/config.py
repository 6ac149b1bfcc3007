"""Run configuration: a flat, typed key-value format with dotted sections.

Grammar (one assignment per line)::

    key = value          # '#' starts a comment; blank lines ignored

Keys are dotted paths (``predictor.q``); every key has a declared type:

``int``/``float``/``bool``/``str``
    literal tokens; booleans are ``true``/``false``.
``seeds``
    ``a..b`` (inclusive range), a comma list ``1,4,9``, or one integer.
``poles``
    whitespace-separated ``(re, im)`` pairs, e.g. ``(0.4, 0) (0.1, 0.2)``.
``grid``
    ``start..stop:step`` over floats (inclusive of the endpoint within
    half a step).

Unknown keys, duplicate keys, type mismatches, and constraint violations
raise :class:`~obfarx.errors.ConfigError` naming the key and line.
"""

import math
import re
from dataclasses import dataclass, field
from typing import Optional

from .errors import ConfigError

MODES = ("regret", "bias-sweep", "bench-diffusion", "tau-table", "selftest")

# key -> (type tag, default); None default means "required or mode-defaulted".
_SCHEMA = {
    "mode": ("str", None),
    "seeds": ("seeds", (1,)),
    "horizon": ("int", None),
    "jobs": ("int", 1),
    "out": ("str", "out"),
    "save_coefficients": ("bool", False),
    "plant.source": ("str", None),
    "plant.dim": ("int", 4),
    "plant.seed": ("int", 7),
    "plant.rho": ("float", None),
    "plant.file": ("str", None),
    "predictor.poles": ("poles", ((0.0, 0.0),)),
    "predictor.q": ("int", 10),
    "predictor.eps_reg": ("float", 1e-8),
    "predictor.condition_cap": ("float", 1e12),
    "predictor.update_mode": ("str", "batch"),
    "predictor.resolve_every": ("int", 1),
    "regret.delta": ("float", 1e-9),
    "checkpoints.per_decade": ("int", 8),
    "diffusion.alpha_min": ("float", 0.005),
    "diffusion.alpha_max": ("float", 0.02),
    "diffusion.r_noise": ("float", 0.01),
    "diffusion.q_noise": ("float", 0.0),
    "diffusion.dt": ("float", 0.1),
    "diffusion.total_time": ("float", 200.0),
    "diffusion.input_variance": ("float", 1.0),
    "diffusion.source_mode": ("str", "neighbor"),
    "diffusion.full": ("bool", False),
    "sweep.q_min": ("int", 1),
    "sweep.q_max": ("int", 8),
    "tau.lam": ("poles", ((0.9, 0.0),)),
    "tau.mu_grid": ("grid", (-0.9, 0.9, 0.1)),
}

# Benchmark-mode predictor defaults; a loose invertibility guard lets the
# first barely-invertible solve through with wild coefficients, so the
# benchmark uses a conservative cap unless the config overrides it.
_MODE_DEFAULTS = {
    "bench-diffusion": {"predictor.condition_cap": 1e6, "plant.source": "diffusion"},
    "regret": {"plant.source": "random"},
    "bias-sweep": {"plant.source": "random"},
}


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration with all defaults resolved."""

    mode: str
    seeds: tuple
    horizon: Optional[int]
    jobs: int
    out: str
    save_coefficients: bool
    plant_source: str
    plant_dim: int
    plant_seed: int
    plant_rho: Optional[float]
    plant_file: Optional[str]
    poles: tuple
    q: int
    eps_reg: float
    condition_cap: float
    update_mode: str
    resolve_every: int
    delta: float
    per_decade: int
    alpha_min: float
    alpha_max: float
    r_noise: float
    q_noise: float
    dt: float
    total_time: float
    input_variance: float
    source_mode: str
    diffusion_full: bool
    sweep_q_min: int
    sweep_q_max: int
    tau_lam: tuple
    tau_mu_grid: tuple
    echo: tuple = field(default=(), repr=False)

    def echo_text(self):
        """Canonical `key = value` echo of every resolved setting."""
        return "\n".join(f"{k} = {v}" for k, v in self.echo) + "\n"


def _parse_scalar(kind, token, key, line_no):
    try:
        if kind == "int":
            return int(token)
        if kind == "float":
            return float(token)
        if kind == "bool":
            if token.lower() in ("true", "false"):
                return token.lower() == "true"
            raise ValueError
        if kind == "str":
            return token
    except ValueError:
        raise ConfigError(f"line {line_no}: key '{key}' expects {kind}, got {token!r}") from None
    raise ConfigError(f"unknown type {kind}")


def _parse_seeds(token, key, line_no):
    token = token.strip()
    m = re.fullmatch(r"(-?\d+)\s*\.\.\s*(-?\d+)", token)
    if m:
        a, b = int(m.group(1)), int(m.group(2))
        if b < a:
            raise ConfigError(f"line {line_no}: key '{key}' has empty range {token!r}")
        return tuple(range(a, b + 1))
    if "," in token:
        try:
            return tuple(int(t.strip()) for t in token.split(","))
        except ValueError:
            raise ConfigError(f"line {line_no}: key '{key}' expects integers, got {token!r}") from None
    try:
        return (int(token),)
    except ValueError:
        raise ConfigError(f"line {line_no}: key '{key}' expects a seed range or list, got {token!r}") from None


_POLE_RE = re.compile(r"\(\s*([^,()\s]+)\s*,\s*([^,()\s]+)\s*\)")


def _parse_poles(token, key, line_no):
    pairs = _POLE_RE.findall(token)
    leftover = _POLE_RE.sub("", token).strip()
    if not pairs or leftover:
        raise ConfigError(
            f"line {line_no}: key '{key}' expects '(re, im)' pairs, got {token!r}"
        )
    out = []
    for idx, (re_s, im_s) in enumerate(pairs):
        try:
            re_v, im_v = float(re_s), float(im_s)
        except ValueError:
            raise ConfigError(
                f"line {line_no}: key '{key}' pole {idx} is not numeric: ({re_s}, {im_s})"
            ) from None
        if math.hypot(re_v, im_v) >= 1.0:
            raise ConfigError(
                f"line {line_no}: key '{key}' pole {idx} has modulus "
                f"{math.hypot(re_v, im_v):.6g} >= 1"
            )
        out.append((re_v, im_v))
    return tuple(out)


def _parse_grid(token, key, line_no):
    head, sep, rest = token.strip().partition("..")
    stop_s, sep2, step_s = rest.partition(":")
    if not sep or not sep2:
        raise ConfigError(f"line {line_no}: key '{key}' expects start..stop:step, got {token!r}")
    try:
        start, stop, step = float(head), float(stop_s), float(step_s)
    except ValueError:
        raise ConfigError(f"line {line_no}: key '{key}' grid bounds are not numeric") from None
    if step <= 0 or stop < start:
        raise ConfigError(f"line {line_no}: key '{key}' grid must have step > 0 and stop >= start")
    return (start, stop, step)


def parse_config_text(text, overrides=None):
    """Parse config source text into a validated :class:`RunConfig`."""
    values = {}
    lines_seen = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {raw!r}")
        key, _, token = line.partition("=")
        key = key.strip()
        token = token.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"line {line_no}: unknown key '{key}'")
        if key in values:
            raise ConfigError(
                f"line {line_no}: duplicate key '{key}' (first set on line {lines_seen[key]})"
            )
        lines_seen[key] = line_no
        kind = _SCHEMA[key][0]
        if kind == "seeds":
            values[key] = _parse_seeds(token, key, line_no)
        elif kind == "poles":
            values[key] = _parse_poles(token, key, line_no)
        elif kind == "grid":
            values[key] = _parse_grid(token, key, line_no)
        else:
            values[key] = _parse_scalar(kind, token, key, line_no)

    for key, value in (overrides or {}).items():
        if key not in _SCHEMA:
            raise ConfigError(f"override for unknown key '{key}'")
        if value is not None:
            values[key] = value

    if "mode" not in values:
        raise ConfigError("missing required key 'mode'")
    mode = values["mode"]
    if mode not in MODES:
        raise ConfigError(f"key 'mode' must be one of {MODES}, got {mode!r}")

    resolved = {}
    mode_defaults = _MODE_DEFAULTS.get(mode, {})
    for key, (kind, default) in _SCHEMA.items():
        if key in values:
            resolved[key] = values[key]
        elif key in mode_defaults:
            resolved[key] = mode_defaults[key]
        else:
            resolved[key] = default

    _validate(resolved)
    # 'out' and 'jobs' steer orchestration only; keeping them out of the
    # echo makes the manifest hash a function of the experiment definition.
    echo = tuple(
        (k, _echo_value(resolved[k]))
        for k in sorted(_SCHEMA)
        if resolved[k] is not None and k not in ("out", "jobs")
    )
    return RunConfig(
        mode=mode,
        seeds=resolved["seeds"],
        horizon=resolved["horizon"],
        jobs=resolved["jobs"],
        out=resolved["out"],
        save_coefficients=resolved["save_coefficients"],
        plant_source=resolved["plant.source"] or "random",
        plant_dim=resolved["plant.dim"],
        plant_seed=resolved["plant.seed"],
        plant_rho=resolved["plant.rho"],
        plant_file=resolved["plant.file"],
        poles=tuple(complex(re_v, im_v) for re_v, im_v in resolved["predictor.poles"]),
        q=resolved["predictor.q"],
        eps_reg=resolved["predictor.eps_reg"],
        condition_cap=resolved["predictor.condition_cap"],
        update_mode=resolved["predictor.update_mode"],
        resolve_every=resolved["predictor.resolve_every"],
        delta=resolved["regret.delta"],
        per_decade=resolved["checkpoints.per_decade"],
        alpha_min=resolved["diffusion.alpha_min"],
        alpha_max=resolved["diffusion.alpha_max"],
        r_noise=resolved["diffusion.r_noise"],
        q_noise=resolved["diffusion.q_noise"],
        dt=resolved["diffusion.dt"],
        total_time=resolved["diffusion.total_time"],
        input_variance=resolved["diffusion.input_variance"],
        source_mode=resolved["diffusion.source_mode"],
        diffusion_full=resolved["diffusion.full"],
        sweep_q_min=resolved["sweep.q_min"],
        sweep_q_max=resolved["sweep.q_max"],
        tau_lam=tuple(complex(re_v, im_v) for re_v, im_v in resolved["tau.lam"]),
        tau_mu_grid=resolved["tau.mu_grid"],
        echo=echo,
    )


def _echo_value(v):
    if isinstance(v, tuple) and v and isinstance(v[0], tuple):
        return " ".join(f"({a!r}, {b!r})" for a, b in v)
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _validate(r):
    if not r["seeds"]:
        raise ConfigError("key 'seeds' resolved to an empty list")
    if r["jobs"] < 1:
        raise ConfigError("key 'jobs' must be at least 1")
    if r["horizon"] is not None and r["horizon"] < 0:
        raise ConfigError("key 'horizon' must be nonnegative")
    if r["predictor.update_mode"] not in ("batch", "recursive"):
        raise ConfigError("key 'predictor.update_mode' must be batch or recursive")
    if r["predictor.q"] < 0:
        raise ConfigError("key 'predictor.q' must be nonnegative")
    if r["predictor.eps_reg"] < 0:
        raise ConfigError("key 'predictor.eps_reg' must be nonnegative")
    if r["predictor.condition_cap"] < 1:
        raise ConfigError("key 'predictor.condition_cap' must be at least 1")
    if r["regret.delta"] <= 0:
        raise ConfigError("key 'regret.delta' must be positive")
    if r["diffusion.alpha_max"] < r["diffusion.alpha_min"]:
        raise ConfigError("diffusion.alpha_max must be >= diffusion.alpha_min")
    if r["sweep.q_max"] < r["sweep.q_min"] or r["sweep.q_min"] < 0:
        raise ConfigError("sweep.q_min..q_max must be a nonempty nonnegative range")
    if r["plant.source"] not in (None, "random", "diffusion", "file"):
        raise ConfigError("plant.source must be random, diffusion, or file")
    if r["plant.source"] == "file" and not r["plant.file"]:
        raise ConfigError("plant.source = file requires plant.file")
    if r["diffusion.source_mode"] not in ("neighbor", "clamp"):
        raise ConfigError("diffusion.source_mode must be neighbor or clamp")


def parse_config(path, overrides=None):
    """Read and parse a config file; missing files raise ConfigError."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config_text(text, overrides=overrides)
