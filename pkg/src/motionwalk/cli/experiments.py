"""Walk + verifier pipelines behind each CLI experiment."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..dynamics import deviation_trends, ergodic_mean
from ..group_core import Character
from ..step_laws import mixing_floor, product_fourier_complex
from ..verifiers import (
    clt_covariance,
    exact_simple_return,
    llt_reference,
    llt_slope,
    moment_tolerance,
    return_frequency,
    return_stderr,
    slln_scaled,
    slln_target,
    summability_diagnostic,
    summarize,
)
from .config import ExperimentConfig, resolved_echo


@dataclass
class Table:
    columns: list[str]
    rows: list[list] = field(default_factory=list)


@dataclass
class Verdict:
    passed: bool
    threshold: object
    value: object = None

    def as_dict(self):
        return {"passed": self.passed, "threshold": self.threshold, "value": self.value}


@dataclass
class ReportEnvelope:
    config: dict
    version: str
    tables: dict[str, Table]
    verdicts: dict[str, Verdict]

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts.values())

    def failures(self) -> list[str]:
        return [f"{k} (threshold {v.threshold!r}, value {v.value!r})" for k, v in self.verdicts.items() if not v.passed]

    def to_json(self, include_tables: bool) -> str:
        doc = {
            "artifact": {"name": "motionwalk", "version": self.version},
            "config": self.config,
            "passed": self.passed,
            "verdicts": {k: v.as_dict() for k, v in self.verdicts.items()},
        }
        if include_tables:
            doc["tables"] = {k: {"columns": t.columns, "rows": t.rows} for k, t in self.tables.items()}
        return json.dumps(_jsonable(doc), indent=2, sort_keys=True, allow_nan=True) + "\n"


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    return x


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def table_csv(table: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def emit_plot_data(envelope: ReportEnvelope, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, table in envelope.tables.items():
        p = out / f"{name}.csv"
        p.write_bytes(table_csv(table).encode())
        paths.append(p)
    return paths


def write_report(envelope: ReportEnvelope, out_dir, fmt: str = "csv") -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = emit_plot_data(envelope, out) if fmt == "csv" else []
    p = out / "summary.json"
    p.write_bytes(envelope.to_json(include_tables=(fmt == "json")).encode())
    return paths + [p]


# ---------------------------------------------------------------------------


def _cov_columns(d: int) -> list[str]:
    return [f"cov_{i + 1}{j + 1}" for i in range(d) for j in range(i, d)]


def _cov_values(cov: np.ndarray) -> list[float]:
    d = cov.shape[0]
    return [float(cov[i, j]) for i in range(d) for j in range(i, d)]


def _simulate(cfg: ExperimentConfig):
    walk = cfg.walk
    s = summarize(walk, workers=cfg.workers)
    t = Table(["n"] + [f"mean_{j + 1}" for j in range(walk.d)] + _cov_columns(walk.d))
    for k, n in enumerate(walk.checkpoints):
        t.rows.append([n, *map(float, s.mean[k]), *_cov_values(s.covariance(n))])
    return {"moments": t}, {}


def _haar(cfg: ExperimentConfig):
    walk, law = cfg.walk, cfg.walk.rotation_law
    chars = [c for c in cfg.characters if not c.is_trivial]
    s = summarize(walk, chars, workers=cfg.workers)
    M = walk.ensemble_size
    tol = moment_tolerance(M)
    exact = {c: product_fourier_complex(law, walk.n_steps, c) for c in chars}
    t = Table(["n", "character_index", "empirical_modulus", "exact_modulus", "deviation"])
    worst_dev = 0.0
    for n in walk.checkpoints:
        for c in chars:
            emp = s.character_moment(n, c)
            ex = complex(exact[c][n - 1])
            dev = abs(emp - ex)
            worst_dev = max(worst_dev, dev)
            t.rows.append([n, c.label(), abs(emp), abs(ex), dev])
    n_last = walk.checkpoints[-1]
    final = max((abs(s.character_moment(n_last, c)) for c in chars), default=0.0)
    monotone = all(bool(np.all(np.diff(np.abs(exact[c])) <= 0.0)) for c in chars)
    verdicts = {
        "haar_converged": Verdict(final <= tol, tol, final),
        "oracle_agreement": Verdict(worst_dev <= tol, tol, worst_dev),
        "exact_non_increasing": Verdict(monotone, "non-increasing", monotone),
    }
    return {"haar": t}, verdicts


def _clt(cfg: ExperimentConfig):
    walk = cfg.walk
    s = summarize(walk, workers=cfg.workers)
    t = Table(["n"] + _cov_columns(walk.d) + ["isotropy_score"])
    for n in walk.checkpoints:
        cov, score = clt_covariance(s, n)
        t.rows.append([n, *_cov_values(cov), score])
    cov, score = clt_covariance(s, walk.checkpoints[-1])
    verdicts = {}
    thr = cfg.thresholds
    if cfg.reference_covariance is not None:
        dev = float(np.max(np.abs(cov - np.asarray(cfg.reference_covariance))))
        verdicts["covariance_match"] = Verdict(dev <= thr["covariance_tolerance"], thr["covariance_tolerance"], dev)
    else:
        verdicts["isotropic"] = Verdict(score < thr["isotropy_tolerance"], thr["isotropy_tolerance"], score)
    return {"clt": t}, verdicts


def _uniform_simple(walk) -> bool:
    law = walk.translation_law
    return walk.d <= 2 and all(p.kind == "constant" and p.c == 0.5 / walk.d for p in law.profiles)


def _llt(cfg: ExperimentConfig):
    walk = cfg.walk
    d, M = walk.d, walk.ensemble_size
    s = summarize(walk, workers=cfg.workers)
    if cfg.reference_covariance is not None:
        A = np.asarray(cfg.reference_covariance, dtype=float)
    else:
        A = s.covariance(walk.checkpoints[-1])
    exact_ok = _uniform_simple(walk)
    thr = cfg.thresholds
    lo, hi = thr["ratio_band"]
    t = Table(["n", "empirical_return", "reference", "ratio", "exact", "stderr"])
    ratio_fail, ratio_worst = [], 1.0
    exact_worst, exact_pass = 0.0, True
    exact_steps = thr.get("exact_steps")
    fit_n, fit_p = [], []
    slope_half = set(thr.get("slope_half_steps", [n // 2 for n in walk.checkpoints if n % 2 == 0 and n >= 50]))
    for n in walk.checkpoints:
        p = return_frequency(s, n)
        ref = llt_reference(d, A, n // 2) if n % 2 == 0 else None
        ratio = p / ref if ref else None
        ex = exact_simple_return(d, n) if exact_ok else None
        se = return_stderr(ex if ex is not None else p, M)
        t.rows.append([n, p, ref, ratio, ex, se])
        if ratio is not None and n >= thr["ratio_from"]:
            if abs(ratio - 1.0) > abs(ratio_worst - 1.0):
                ratio_worst = ratio
            if not lo <= ratio <= hi:
                ratio_fail.append(n)
        if ex is not None and (exact_steps is None or n in exact_steps):
            z = abs(p - ex) / se if se > 0 else (0.0 if p == ex else math.inf)
            exact_worst = max(exact_worst, z)
            exact_pass &= z <= 3.0
        if n % 2 == 0 and n // 2 in slope_half and p > 0:
            fit_n.append(n // 2)
            fit_p.append(p)
    verdicts = {"ratio_in_band": Verdict(not ratio_fail, [lo, hi], ratio_worst)}
    if exact_ok:
        verdicts["exact_within_3_sigma"] = Verdict(exact_pass, 3.0, exact_worst)
    slope_tab = Table(["half_n", "log_half_n", "log_return"])
    for n, p in zip(fit_n, fit_p):
        slope_tab.rows.append([n, math.log(n), math.log(p)])
    if len(fit_n) >= 2:
        slope = llt_slope(fit_n, fit_p)
        tol = thr["slope_tolerance"]
        verdicts["slope"] = Verdict(abs(slope + d / 2) <= tol, [-d / 2 - tol, -d / 2 + tol], slope)
    return {"llt": t, "llt_slope": slope_tab}, verdicts


def _log_grid(n_max: int) -> list[int]:
    out = []
    p = 1
    while p <= n_max:
        out.extend(m * p for m in range(1, 10) if m * p <= n_max)
        p *= 10
    if out[-1] != n_max:
        out.append(n_max)
    return out


def _slln(cfg: ExperimentConfig):
    walk = cfg.walk
    s = summarize(walk, workers=cfg.workers, keep_positions=True)
    target = slln_target(walk) if cfg.target == "auto" else np.asarray(cfg.target, dtype=float)
    res = slln_scaled(s, cfg.alpha, target)
    t = Table(["n", "median_scaled_norm", "q90_scaled_norm"])
    comp = Table(["n", "component", "median_scaled", "target"])
    for k, n in enumerate(walk.checkpoints):
        t.rows.append([n, float(res.median[k]), float(res.q90[k])])
        for j in range(walk.d):
            comp.rows.append([n, j + 1, float(res.component_median[k, j]), float(target[j])])
    thr = cfg.thresholds
    verdicts = {
        "alpha_above_half": Verdict(res.alpha_in_range, 0.5, cfg.alpha),
        "median_decreasing": Verdict(res.decreasing, "last three checkpoints", [float(v) for v in res.median[-3:]]),
    }
    if "max_final_median" in thr:
        m = float(res.median[-1])
        verdicts["final_median"] = Verdict(m < thr["max_final_median"], thr["max_final_median"], m)
    if "component_tolerance" in thr:
        dev = float(np.max(np.abs(res.component_median[-1] - target)))
        verdicts["components_at_target"] = Verdict(dev <= thr["component_tolerance"], thr["component_tolerance"], dev)
    tables = {"slln": t, "slln_components": comp}
    if walk.track_increments:
        diag = summability_diagnostic(s.increment_variance(), cfg.alpha)
        sm = Table(["n", "partial_sum"])
        for n in _log_grid(walk.n_steps):
            sm.rows.append([n, float(diag.partial_sums[n - 1])])
        tables["summability"] = sm
        verdicts["summable"] = Verdict(diag.summable, "last-decade increment < 1% of total", diag.tail_fraction)
    return tables, verdicts


def _diagnose(cfg: ExperimentConfig):
    walk = cfg.walk
    n = walk.n_steps
    tlaw, rlaw = walk.translation_law, walk.rotation_law
    named = [(f"h_{j + 1}", p, tlaw.ds) for j, p in enumerate(tlaw.profiles)]
    named += [(f"f_{k + 1}", p, rlaw.ds) for k, p in enumerate(rlaw.profiles)]
    t = Table(["profile", "m", "deviation", "h2_ratio", "h1_ratio", "ergodic_mean", "integral"])
    tol = cfg.thresholds["h2_tolerance"]
    worst = 0.0
    for name, p, ds in named:
        tr = deviation_trends(p, ds, n)
        for m in walk.checkpoints:
            t.rows.append(
                [name, m, float(tr["deviation"][m - 1]), float(tr["h2"][m - 1]), float(tr["h1"][m - 1]),
                 ergodic_mean(p, ds, m), p.integral]
            )
        worst = max(worst, float(tr["h2"][-1]))
    verdicts = {"h2_trend": Verdict(worst < tol, tol, worst)}
    if not rlaw.is_identity:
        floor = float(np.min(mixing_floor(rlaw, n)))
        verdicts["mixing_floor_positive"] = Verdict(floor > 0.0, 0.0, floor)
    return {"birkhoff": t}, verdicts


_PIPELINES = {
    "simulate": _simulate,
    "haar": _haar,
    "clt": _clt,
    "llt": _llt,
    "slln": _slln,
    "diagnose": _diagnose,
}


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ReportEnvelope:
    tables, verdicts = _PIPELINES[cfg.experiment](cfg)
    env = ReportEnvelope(resolved_echo(cfg), __version__, tables, verdicts)
    if write:
        write_report(env, cfg.output_dir, cfg.format)
    return env
