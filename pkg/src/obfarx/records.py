"""Result records and deterministic CSV/JSON serialization.

The results CSV schema is fixed:

    seed,alpha,tau,bias_exact,bias_bound,checkpoint_N,regret_RN,slope_fit

one row per (experiment, checkpoint).  Floats are written with shortest
round-trip ``repr`` so identical runs produce identical bytes;
inapplicable fields are left empty.  Wall-clock times never enter the
CSV; they live in the summary JSON, which is the only output whose bytes
may differ between identical runs.
"""

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

CSV_HEADER = "seed,alpha,tau,bias_exact,bias_bound,checkpoint_N,regret_RN,slope_fit"


@dataclass
class ExperimentRecord:
    """One experiment's scalar results plus its checkpointed regret."""

    seed: int
    tau_value: Optional[float]
    bias_exact: Optional[float]
    bias_bound: Optional[float]
    checkpoints: np.ndarray
    regret: np.ndarray
    alpha: Optional[float] = None
    slope_fit: Optional[float] = None
    wall_clock: float = 0.0
    gap_sq: Optional[np.ndarray] = field(default=None, repr=False)
    asym_gap_sq: Optional[np.ndarray] = field(default=None, repr=False)
    L_snapshots: Optional[dict] = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("tau_value", "bias_exact", "bias_bound", "alpha", "slope_fit"):
            v = getattr(self, name)
            if v is not None and not np.isfinite(v):
                raise ValueError(f"{name} must be finite when present, got {v}")
        if np.asarray(self.regret).size and np.min(self.regret) < 0:
            raise ValueError("regret values must be nonnegative")


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def records_to_csv(records):
    """Render records to the fixed-schema CSV text (deterministic bytes)."""
    lines = [CSV_HEADER]
    for rec in records:
        for N, rn in zip(rec.checkpoints, rec.regret):
            lines.append(
                ",".join(
                    [
                        _fmt(rec.seed),
                        _fmt(rec.alpha),
                        _fmt(rec.tau_value),
                        _fmt(rec.bias_exact),
                        _fmt(rec.bias_bound),
                        _fmt(int(N)),
                        _fmt(float(rn)),
                        _fmt(rec.slope_fit),
                    ]
                )
            )
    return "\n".join(lines) + "\n"


def matrix_to_json(M):
    """Row-major matrix payload with explicit dimensions."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return {"rows": int(M.shape[0]), "cols": int(M.shape[1]), "data": M.ravel().tolist()}


def matrix_from_json(payload):
    data = np.asarray(payload["data"], dtype=float)
    return data.reshape(int(payload["rows"]), int(payload["cols"]))


def snapshots_to_json(snapshots):
    """Serialize {step: coefficient matrix} keeping step order."""
    return {str(int(k)): matrix_to_json(v) for k, v in sorted(snapshots.items())}


def dump_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def sha256_text(text):
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
