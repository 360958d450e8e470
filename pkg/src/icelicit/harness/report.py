"""Report rows, CSV/JSON emission and summary statistics.

CSV columns (fixed order): ``run_id, seed, mechanism, n, eps, queries,
error_tv, payment, gain, ms``. ``error_tv`` holds ``d(theta, hypothesis)``
in the mechanism's metric (total variation for beliefs). ``gain`` and
``ms`` are blank when not measured; ``ms`` is only filled when timing is
requested, since wall time would break byte-for-byte reproducibility.

The JSON summary carries ``schema_version``, ``config`` and
``config_hash`` (sha256 of the canonical config), ``seed``, ``trials``,
``success_rate``, ``error`` (mean and quantiles), ``max_gain``,
``mean_queries`` and a free-form ``details`` object.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import astuple, dataclass, fields
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1
COLUMNS = ("run_id", "seed", "mechanism", "n", "eps", "queries", "error_tv", "payment", "gain", "ms")


@dataclass(frozen=True)
class ReportRow:
    run_id: int
    seed: int
    mechanism: str
    n: int
    eps: float
    queries: int
    error_tv: float | None = None
    payment: float | None = None
    gain: float | None = None
    ms: float | None = None


assert tuple(f.name for f in fields(ReportRow)) == COLUMNS


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def _clean(v):
    """JSON-safe floats (NaN and inf become null)."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    return v


def summarize(rows: list[ReportRow], eps: float) -> dict:
    if not rows:
        raise ValueError("no rows to summarize")
    errs = np.array([r.error_tv for r in rows if r.error_tv is not None], dtype=float)
    gains = [r.gain for r in rows if r.gain is not None]
    out = {
        "trials": len(rows),
        "success_rate": float(np.mean(errs <= eps)) if errs.size else None,
        "error": {
            "mean": float(errs.mean()) if errs.size else None,
            "q50": float(np.quantile(errs, 0.5)) if errs.size else None,
            "q90": float(np.quantile(errs, 0.9)) if errs.size else None,
            "max": float(errs.max()) if errs.size else None,
        },
        "max_gain": max(gains) if gains else None,
        "mean_gain": float(np.mean(gains)) if gains else None,
        "mean_queries": float(np.mean([r.queries for r in rows])),
    }
    return out


def emit_report(rows: list[ReportRow], outdir: Path | str, config, details: dict | None = None,
                stem: str = "report") -> tuple[Path, Path]:
    """Write ``<stem>.csv`` and ``<stem>.json`` into ``outdir``."""
    if not rows:
        raise ValueError("refusing to write an empty report")
    out = Path(outdir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    csv_path, json_path = out / f"{stem}.csv", out / f"{stem}.json"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow([_fmt(v) for v in astuple(r)])
    summary = {
        "schema_version": SCHEMA_VERSION,
        "config": json.loads(config.to_json()),
        "config_hash": config.hash(),
        "seed": config.seed,
        **summarize(rows, config.eps),
        "details": details or {},
    }
    with open(json_path, "w") as fh:
        json.dump(_clean(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, json_path


def read_rows(path: Path | str) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
