"""Experiment grids: generate, estimate, score, aggregate, emit.

A grid crosses effect-parameter cells with structured and text seeds, runs
every configured method with cross-fitting on each generated dataset, and
scores against the exact oracle. Each run persists to its own
content-addressed record file, so interrupted grids resume without
recomputing and reruns are byte-identical.
"""

from __future__ import annotations

import csv
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import classify as cl
from .corpus import build_corpus, load_templates
from .effects import EffectParams
from .estimators import (
    EstimateReport,
    EstimatorConfig,
    IpwEstimator,
    MeasurementErrorEstimator,
    PropensityMatching,
    RepresentationMatching,
    baseline_suite,
    crossfit,
)
from .lda import train_lda
from .ngram import build_ngram_lm
from .seeding import child_seed
from .structured import oracle_ate, sample_structured_params
from .textgen import Dataset, TextEffectConfig, generate_dataset

__all__ = [
    "ExperimentConfig",
    "GridReport",
    "run_grid",
    "run_ablation",
    "accuracy_error_analysis",
    "emit_report",
    "load_config",
    "preset_path",
]

METHODS = {
    "representation": RepresentationMatching,
    "propensity": PropensityMatching,
    "ipw": IpwEstimator,
    "measurement": MeasurementErrorEstimator,
}

_RESOURCES: dict[str, tuple] = {}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a grid or ablation needs, resolvable from a JSON file."""

    dgp: str
    cells: tuple[dict, ...]
    structured_seeds: tuple[int, ...] = (0, 1, 2, 3)
    text_seeds: tuple[int, ...] = (0, 1, 2, 3)
    n_records: int = 10000
    methods: tuple[str, ...] = ("representation", "propensity", "ipw", "measurement")
    labeled_budgets: tuple[int, ...] = ()
    master_seed: int = 0
    workers: int = 1
    out_dir: str | None = None
    doc_len: int | None = None  # None: 16 for trivial, 32 for lda
    trivial_vocab: int = 16
    max_len: int = 32
    lens_split: tuple[int, int, int] | None = None  # None: 80/10/10
    corpus_docs: int = 2000
    corpus_seed: int = 0
    vocab_cap: int = 5000
    lda_topics: int = 20
    lda_alpha: float = 0.1
    lda_beta: float = 0.01
    lda_iters: int = 300
    ngram_order: int = 2
    ngram_smoothing: float = 0.1
    exponent_form: str = "zipf"
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)

    def __post_init__(self):
        if self.dgp not in ("trivial", "lda", "sequential"):
            raise ValueError(f"unknown dgp {self.dgp!r}")
        if not self.cells:
            raise ValueError("cell grid must be nonempty")
        if not self.structured_seeds or not self.text_seeds:
            raise ValueError("seed lists must be nonempty")
        if self.n_records < 100:
            raise ValueError("n_records must be at least 100")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")
        object.__setattr__(self, "cells", tuple(dict(c) for c in self.cells))
        object.__setattr__(self, "structured_seeds", tuple(self.structured_seeds))
        object.__setattr__(self, "text_seeds", tuple(self.text_seeds))
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "labeled_budgets", tuple(self.labeled_budgets))

    def to_dict(self) -> dict:
        # workers and out_dir are operational knobs: they never influence
        # results, so they stay out of the echoed config and report bytes.
        out = {}
        for key in (
            "dgp", "cells", "structured_seeds", "text_seeds", "n_records", "methods",
            "labeled_budgets", "master_seed", "doc_len",
            "trivial_vocab", "max_len", "lens_split", "corpus_docs", "corpus_seed",
            "vocab_cap", "lda_topics", "lda_alpha", "lda_beta", "lda_iters",
            "ngram_order", "ngram_smoothing", "exponent_form",
        ):
            value = getattr(self, key)
            if isinstance(value, tuple):
                value = list(value) if not value or not isinstance(value[0], dict) else [dict(v) for v in value]
            out[key] = value
        est = self.estimator
        out["estimator"] = {
            "ipw_truncation": list(est.ipw_truncation),
            "bootstrap_samples": est.bootstrap_samples,
            "labeled_budget": est.labeled_budget,
            "min_separation": est.min_separation,
            "rep_topics": est.rep_topics,
            "rep_iters": est.rep_iters,
            "rep_foldin_sweeps": est.rep_foldin_sweeps,
            "mcf_max_pairs": est.mcf_max_pairs,
        }
        return out


def _coerce_config(data: dict) -> ExperimentConfig:
    data = dict(data)
    est = data.pop("estimator", {})
    est_kwargs = {}
    if est:
        allowed = {
            "ipw_truncation", "bootstrap_samples", "labeled_budget", "min_separation",
            "rep_topics", "rep_iters", "rep_foldin_sweeps", "mcf_max_pairs",
            "max_set_size",
        }
        unknown = set(est) - allowed
        if unknown:
            raise ValueError(f"unknown estimator config keys: {sorted(unknown)}")
        if "ipw_truncation" in est:
            est["ipw_truncation"] = tuple(est["ipw_truncation"])
        est_kwargs = est
    if "lens_split" in data and data["lens_split"] is not None:
        data["lens_split"] = tuple(data["lens_split"])
    return ExperimentConfig(estimator=EstimatorConfig(**est_kwargs), **data)


def preset_path(name: str) -> str:
    from importlib import resources

    return str(resources.files("causaltext.presets").joinpath(f"{name}.json"))


def load_config(source: str, overrides: list[str] | None = None) -> ExperimentConfig:
    """Load a config from a JSON path or a bundled preset name.

    Overrides are `key=json_value` pairs applied on top of the file, e.g.
    `n_records=2000` or `methods=["ipw"]`; bare words parse as strings.
    """
    path = source
    if not os.path.exists(path):
        candidate = preset_path(source)
        if os.path.exists(candidate):
            path = candidate
        else:
            raise FileNotFoundError(f"no config file or preset named {source!r}")
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    for pair in overrides or []:
        key, _, raw = pair.partition("=")
        if not _:
            raise ValueError(f"override {pair!r} is not key=value")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        target = data
        parts = key.split(".")
        for part in parts[:-1]:
            target = target.setdefault(part, {})
        target[parts[-1]] = value
    return _coerce_config(data)


def _cell_fingerprint(cell: dict) -> str:
    return json.dumps({k: cell[k] for k in sorted(cell)}, separators=(",", ":"))


def _dgp_resources(config: ExperimentConfig):
    """Build (and cache per process) the shared generation backends."""
    if config.dgp == "trivial":
        return {}
    key = json.dumps(
        [config.dgp, config.corpus_docs, config.corpus_seed, config.vocab_cap,
         config.lda_topics, config.lda_alpha, config.lda_beta, config.lda_iters,
         config.ngram_order, config.ngram_smoothing],
        separators=(",", ":"),
    )
    if key in _RESOURCES:
        return _RESOURCES[key]
    docs, vocab = build_corpus(
        n_docs=config.corpus_docs, seed=config.corpus_seed, vocab_cap=config.vocab_cap
    )
    if config.dgp == "lda":
        model = train_lda(
            docs, vocab, k=config.lda_topics, alpha=config.lda_alpha,
            beta=config.lda_beta, iters=config.lda_iters,
            seed=child_seed(config.corpus_seed, "dgp-lda"),
        )
        resources = {"model": model}
    else:
        lm = build_ngram_lm(
            docs, vocab, order=config.ngram_order, smoothing=config.ngram_smoothing
        )
        resources = {"lm": lm, "templates": load_templates()}
    _RESOURCES[key] = resources
    return resources


def _effect_config(config: ExperimentConfig, cell: dict, text_seed: int) -> TextEffectConfig:
    word = EffectParams(float(cell["tau_word"]), float(cell["delta_word"]))
    context = None
    if "tau_context" in cell or "delta_context" in cell:
        context = EffectParams(float(cell["tau_context"]), float(cell["delta_context"]))
    ordering_seed = child_seed(
        config.master_seed, "ordering", text_seed, _cell_fingerprint(cell)
    )
    return TextEffectConfig(
        word=word, context_effect=context, ordering_seed=ordering_seed,
        exponent_form=config.exponent_form,
    )


def _make_dataset(config: ExperimentConfig, cell: dict, s_seed: int, t_seed: int) -> Dataset:
    params = sample_structured_params(s_seed)
    cfg = _effect_config(config, cell, t_seed)
    data_seed = child_seed(
        config.master_seed, "data", config.dgp, _cell_fingerprint(cell), s_seed, t_seed
    )
    resources = _dgp_resources(config)
    kwargs = dict(resources)
    if config.dgp == "trivial":
        kwargs["n_tokens"] = config.doc_len or 16
        from .textgen import default_trivial_vocab

        kwargs["vocab"] = default_trivial_vocab(config.trivial_vocab)
    elif config.dgp == "lda":
        kwargs["length"] = config.doc_len or 32
    else:
        kwargs["max_len"] = config.max_len
    return generate_dataset(params, config.dgp, cfg, config.n_records, data_seed, **kwargs)


def _lens_accuracy(dataset: Dataset, config: ExperimentConfig, run_seed: int) -> float:
    """Held-out accuracy of the latent-variable classifier on this dataset."""
    n = len(dataset.records)
    if config.lens_split is not None:
        sizes = config.lens_split
    else:
        n_test = max(1, n // 10)
        n_dev = max(1, n // 10)
        sizes = (n - n_dev - n_test, n_dev, n_test)
    vocab_size = len(dataset.metadata["vocab"])
    rows = [cl.featurize(r.tokens, vocab_size) for r in dataset.records]
    X = cl.features_matrix(rows)
    y = np.array([r.u for r in dataset.records], dtype=np.int64)
    from .seeding import child_rng

    split = cl.make_split(n, sizes, rng=child_rng(run_seed, "lens-split"))
    model = cl.train_logreg(X[split.train], y[split.train], seed=run_seed)
    return cl.accuracy(model, X[split.test], y[split.test])


def _report_to_dict(report: EstimateReport) -> dict:
    return {
        "method": report.method,
        "estimate": report.estimate,
        "oracle": report.oracle,
        "abs_error": report.abs_error,
        "ci_low": report.ci_low,
        "ci_high": report.ci_high,
        "classifier_accuracy": report.classifier_accuracy,
        "seeds": report.seeds,
        "config_fingerprint": report.config_fingerprint,
        "extras": report.extras,
    }


def _run_key(config: ExperimentConfig, kind: str, cell: dict, s_seed: int, t_seed: int) -> dict:
    return {
        "kind": kind,
        "dgp": config.dgp,
        "cell": {k: cell[k] for k in sorted(cell)},
        "structured_seed": s_seed,
        "text_seed": t_seed,
        "master_seed": config.master_seed,
        "n": config.n_records,
    }


def _record_path(runs_dir: str, key: dict) -> str:
    import hashlib

    digest = hashlib.sha256(json.dumps(key, separators=(",", ":"), sort_keys=True).encode()).hexdigest()
    return os.path.join(runs_dir, f"{digest[:20]}.json")


def _execute_grid_run(config: ExperimentConfig, cell: dict, s_seed: int, t_seed: int) -> dict:
    key = _run_key(config, "grid", cell, s_seed, t_seed)
    run_seed = child_seed(config.master_seed, "run", json.dumps(key, sort_keys=True, separators=(",", ":")))
    dataset = _make_dataset(config, cell, s_seed, t_seed)
    params = dataset.structured_params()
    record = {
        "key": key,
        "oracle": oracle_ate(params),
        "achieved_correlations": dataset.metadata["achieved_correlations"],
        "lens_accuracy": _lens_accuracy(dataset, config, child_seed(run_seed, "lens")),
        "methods": {},
    }
    for method in config.methods:
        estimator = METHODS[method](config.estimator)
        try:
            report = crossfit(dataset, estimator, seed=child_seed(run_seed, method))
            record["methods"][method] = _report_to_dict(report)
        except Exception as exc:  # recorded, never aborts the grid
            record["methods"][method] = {
                "method": method, "failure": f"{type(exc).__name__}: {exc}",
            }
    if config.labeled_budgets:
        record["ablation"] = _ablation_for_dataset(config, dataset, run_seed)
    return record


def _ablation_for_dataset(config: ExperimentConfig, dataset: Dataset, run_seed: int) -> dict:
    out = {}
    for budget in config.labeled_budgets:
        entry = {}
        estimator = MeasurementErrorEstimator(
            replace(config.estimator, labeled_budget=budget)
        )
        try:
            # Same crossfit seed as the grid's measurement run: budgets share
            # one split (labeled subsets nest), and the full-budget row
            # reproduces the grid cell exactly.
            report = crossfit(dataset, estimator, seed=child_seed(run_seed, "measurement"))
            entry["measurement"] = _report_to_dict(report)
        except Exception as exc:
            entry["measurement"] = {"method": "measurement", "failure": f"{type(exc).__name__}: {exc}"}
        baselines = baseline_suite(dataset, labeled_budget=budget,
                                   seed=child_seed(run_seed, "ablate-baseline", budget))
        for rep in baselines:
            if rep.method == "plug_in":
                if np.isnan(rep.estimate):
                    entry["plug_in"] = {
                        "method": "plug_in",
                        "failure": rep.extras.get("failure", "empty stratum"),
                    }
                else:
                    entry["plug_in"] = _report_to_dict(rep)
        out[str(budget)] = entry
    return out


@dataclass(frozen=True)
class GridReport:
    """Raw per-run records plus per-cell aggregates."""

    config: dict
    runs: tuple[dict, ...]
    cells: tuple[dict, ...]

    def to_json(self) -> str:
        return json.dumps(
            {"config": self.config, "cells": list(self.cells), "runs": list(self.runs)},
            indent=1, sort_keys=True, allow_nan=False,
        ) + "\n"


def _aggregate(config: ExperimentConfig, runs: list[dict]) -> list[dict]:
    cells = []
    for cell in config.cells:
        fingerprint = _cell_fingerprint(cell)
        members = [r for r in runs if _cell_fingerprint(r["key"]["cell"]) == fingerprint
                   and r["key"]["kind"] == "grid"]
        agg = {
            "cell": {k: cell[k] for k in sorted(cell)},
            "n_runs": len(members),
            "lens_accuracy_mean": float(np.mean([r["lens_accuracy"] for r in members]))
            if members else None,
            "methods": {},
        }
        for method in config.methods:
            errors, accuracies, failures = [], [], 0
            for r in members:
                res = r["methods"].get(method)
                if res is None or "failure" in res:
                    failures += 1
                    continue
                errors.append(res["abs_error"])
                if res.get("classifier_accuracy") is not None:
                    accuracies.append(res["classifier_accuracy"])
            agg["methods"][method] = {
                "mean_abs_error": float(np.mean(errors)) if errors else None,
                "n_ok": len(errors),
                "n_failed": failures,
                "mean_classifier_accuracy": float(np.mean(accuracies)) if accuracies else None,
            }
        cells.append(agg)
    return cells


def _run_task(args):
    config_dict, cell, s_seed, t_seed = args
    config = _coerce_config(config_dict)
    return _execute_grid_run(config, cell, s_seed, t_seed)


def run_grid(config: ExperimentConfig, runs_dir: str | None = None) -> GridReport:
    """Execute every (cell x structured seed x text seed) run and aggregate.

    With `runs_dir` (or config.out_dir), completed run records are reused on
    resume; per-run failures are recorded inside the run record rather than
    aborting. Worker processes (config.workers > 1) execute whole runs;
    results are keyed, so assembly order never affects the report.
    """
    runs_dir = runs_dir or (os.path.join(config.out_dir, "runs") if config.out_dir else None)
    if runs_dir:
        os.makedirs(runs_dir, exist_ok=True)
    def _record_satisfies(record: dict, key_json: str) -> bool:
        # a stored record is reusable only if it matches the run key and
        # already carries every configured method and ablation budget
        if json.dumps(record.get("key"), sort_keys=True, separators=(",", ":")) != key_json:
            return False
        if not set(config.methods) <= set(record.get("methods", {})):
            return False
        ablation = record.get("ablation", {})
        return all(str(b) in ablation for b in config.labeled_budgets)

    tasks = []
    done: dict[str, dict] = {}
    for cell in config.cells:
        for s_seed in config.structured_seeds:
            for t_seed in config.text_seeds:
                key = _run_key(config, "grid", cell, s_seed, t_seed)
                key_json = json.dumps(key, sort_keys=True, separators=(",", ":"))
                if runs_dir:
                    path = _record_path(runs_dir, key)
                    if os.path.exists(path):
                        try:
                            with open(path, "r", encoding="utf-8") as f:
                                record = json.load(f)
                        except (json.JSONDecodeError, OSError):
                            record = None  # unreadable record: recompute
                        if record is not None and _record_satisfies(record, key_json):
                            done[key_json] = record
                            continue
                tasks.append((cell, s_seed, t_seed, key_json))
    if tasks:
        def _store(key_json: str, record: dict):
            done[key_json] = record
            if runs_dir:
                path = _record_path(runs_dir, record["key"])
                tmp = path + ".tmp"
                with open(tmp, "w", encoding="utf-8") as f:
                    json.dump(record, f, sort_keys=True, allow_nan=False)
                    f.write("\n")
                os.replace(tmp, path)  # never leave a partial record behind

        if config.workers > 1:
            payload = [(config.to_dict(), cell, s, t) for cell, s, t, _ in tasks]
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                # records are persisted as results stream in, so an
                # interrupted grid resumes from completed runs
                for (cell, s, t, key_json), record in zip(tasks, pool.map(_run_task, payload)):
                    _store(key_json, record)
        else:
            for cell, s, t, key_json in tasks:
                _store(key_json, _execute_grid_run(config, cell, s, t))
    ordered = [done[k] for k in sorted(done)]
    return GridReport(config=config.to_dict(), runs=tuple(ordered),
                      cells=tuple(_aggregate(config, ordered)))


def run_ablation(config: ExperimentConfig, runs_dir: str | None = None) -> dict:
    """Measurement-error estimator and the labeled plug-in baseline at each
    labeled budget, with bootstrap confidence intervals over runs."""
    if not config.labeled_budgets:
        raise ValueError("config.labeled_budgets must be nonempty for an ablation")
    budgets = list(config.labeled_budgets)
    if sorted(budgets) != budgets:
        raise ValueError("labeled budgets must be ascending")
    if budgets[-1] > config.n_records // 2:
        raise ValueError("labeled budgets must fit inside the training split")
    report = run_grid(config, runs_dir=runs_dir)
    rows = []
    from .seeding import child_rng

    for cell in config.cells:
        fingerprint = _cell_fingerprint(cell)
        members = [r for r in report.runs if _cell_fingerprint(r["key"]["cell"]) == fingerprint]
        for budget in budgets:
            for method in ("measurement", "plug_in"):
                errors, signed = [], []
                failures = 0
                for r in members:
                    entry = r.get("ablation", {}).get(str(budget), {}).get(method)
                    if entry is None or "failure" in entry or entry.get("estimate") is None \
                            or (isinstance(entry.get("estimate"), float) and np.isnan(entry["estimate"])):
                        failures += 1
                        continue
                    errors.append(entry["abs_error"])
                    signed.append(entry["estimate"] - entry["oracle"])
                row = {
                    "cell": {k: cell[k] for k in sorted(cell)},
                    "budget": budget,
                    "method": method,
                    "n_ok": len(errors),
                    "n_failed": failures,
                    "mean_abs_error": float(np.mean(errors)) if errors else None,
                    "mean_error": float(np.mean(signed)) if signed else None,
                }
                if signed:
                    rng = child_rng(config.master_seed, "ablation-ci", fingerprint, budget, method)
                    signed_arr = np.array(signed)
                    boots = np.array([
                        signed_arr[rng.integers(0, len(signed_arr), len(signed_arr))].mean()
                        for _ in range(100)
                    ])
                    row["ci_low"] = float(np.percentile(boots, 2.5))
                    row["ci_high"] = float(np.percentile(boots, 97.5))
                else:
                    row["ci_low"] = row["ci_high"] = None
                rows.append(row)
    return {"config": report.config, "rows": rows, "grid": report}


def accuracy_error_analysis(report: GridReport) -> dict:
    """Pearson correlation of method classifier accuracy with causal error.

    Returns per-method correlation entries plus per-run scatter rows keyed
    by structured seed. Methods without a classifier are skipped; zero
    variance in either series is reported as undefined.
    """
    scatter = []
    series: dict[str, list[tuple[float, float]]] = {}
    for run in report.runs:
        for method in sorted(run["methods"]):
            res = run["methods"][method]
            if "failure" in res or res.get("classifier_accuracy") is None:
                continue
            pair = (res["classifier_accuracy"], res["abs_error"])
            series.setdefault(method, []).append(pair)
            scatter.append({
                "dgp": run["key"]["dgp"],
                "method": method,
                "structured_seed": run["key"]["structured_seed"],
                "text_seed": run["key"]["text_seed"],
                "cell": run["key"]["cell"],
                "classifier_accuracy": pair[0],
                "abs_error": pair[1],
            })
    correlations = {}
    for method, pairs in sorted(series.items()):
        x = np.array([p[0] for p in pairs])
        y = np.array([p[1] for p in pairs])
        entry = {"n": len(pairs)}
        if len(pairs) < 2 or x.std() <= 1e-12 or y.std() <= 1e-12:
            entry["r"] = None
            entry["undefined_reason"] = "zero variance" if len(pairs) >= 2 else "too few runs"
        else:
            entry["r"] = float(np.corrcoef(x, y)[0, 1])
        correlations[method] = entry
    return {"correlations": correlations, "scatter": scatter}


_RUNS_CSV_COLUMNS = [
    "method", "dgp", "structured_seed", "text_seed", "tau_word", "delta_word",
    "tau_second", "delta_second", "n", "estimate", "oracle", "abs_error",
    "ci_low", "ci_high",
]


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if np.isnan(value):
            return ""
        return repr(value)
    return str(value)


def runs_csv(report: GridReport) -> str:
    """Per-run estimate rows in the documented CSV schema."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_RUNS_CSV_COLUMNS)
    for run in report.runs:
        key = run["key"]
        cell = key["cell"]
        for method in sorted(run["methods"]):
            res = run["methods"][method]
            if "failure" in res:
                continue
            writer.writerow([
                method, key["dgp"], key["structured_seed"], key["text_seed"],
                _fmt(cell.get("tau_word")), _fmt(cell.get("delta_word")),
                _fmt(cell.get("tau_context")), _fmt(cell.get("delta_context")),
                key["n"], _fmt(res["estimate"]), _fmt(res["oracle"]),
                _fmt(res["abs_error"]), _fmt(res["ci_low"]), _fmt(res["ci_high"]),
            ])
    return buf.getvalue()


def parse_runs_csv(text: str) -> list[dict]:
    reader = csv.DictReader(io.StringIO(text))
    rows = []
    for raw in reader:
        row = dict(raw)
        for key in ("estimate", "oracle", "abs_error", "ci_low", "ci_high",
                    "tau_word", "delta_word", "tau_second", "delta_second"):
            row[key] = float(row[key]) if row[key] != "" else None
        for key in ("structured_seed", "text_seed", "n"):
            row[key] = int(row[key])
        rows.append(row)
    return rows


def cells_csv(report: GridReport) -> str:
    """Per-cell mean errors and accuracies, one row per cell x method."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([
        "dgp", "tau_word", "delta_word", "tau_second", "delta_second",
        "lens_accuracy", "method", "mean_abs_error", "n_ok", "n_failed",
        "mean_classifier_accuracy",
    ])
    dgp = report.config["dgp"]
    for cell_row in report.cells:
        cell = cell_row["cell"]
        for method in sorted(cell_row["methods"]):
            m = cell_row["methods"][method]
            writer.writerow([
                dgp, _fmt(cell.get("tau_word")), _fmt(cell.get("delta_word")),
                _fmt(cell.get("tau_context")), _fmt(cell.get("delta_context")),
                _fmt(cell_row["lens_accuracy_mean"]), method,
                _fmt(m["mean_abs_error"]), m["n_ok"], m["n_failed"],
                _fmt(m["mean_classifier_accuracy"]),
            ])
    return buf.getvalue()


def analysis_csv(analysis: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["method", "n_runs", "pearson_r", "undefined_reason"])
    for method, entry in sorted(analysis["correlations"].items()):
        writer.writerow([method, entry["n"], _fmt(entry.get("r")),
                         entry.get("undefined_reason", "")])
    return buf.getvalue()


def scatter_csv(analysis: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["dgp", "method", "structured_seed", "text_seed",
                     "tau_word", "delta_word", "tau_second", "delta_second",
                     "classifier_accuracy", "abs_error"])
    for row in analysis["scatter"]:
        cell = row["cell"]
        writer.writerow([
            row["dgp"], row["method"], row["structured_seed"], row["text_seed"],
            _fmt(cell.get("tau_word")), _fmt(cell.get("delta_word")),
            _fmt(cell.get("tau_context")), _fmt(cell.get("delta_context")),
            _fmt(row["classifier_accuracy"]), _fmt(row["abs_error"]),
        ])
    return buf.getvalue()


def ablation_csv(ablation: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["tau_word", "delta_word", "tau_second", "delta_second",
                     "budget", "method", "n_ok", "n_failed", "mean_abs_error",
                     "mean_error", "ci_low", "ci_high"])
    for row in ablation["rows"]:
        cell = row["cell"]
        writer.writerow([
            _fmt(cell.get("tau_word")), _fmt(cell.get("delta_word")),
            _fmt(cell.get("tau_context")), _fmt(cell.get("delta_context")),
            row["budget"], row["method"], row["n_ok"], row["n_failed"],
            _fmt(row["mean_abs_error"]), _fmt(row["mean_error"]),
            _fmt(row["ci_low"]), _fmt(row["ci_high"]),
        ])
    return buf.getvalue()


def emit_report(report: GridReport, out_dir: str, analysis: dict | None = None,
                ablation: dict | None = None) -> list[str]:
    """Write the report CSVs (and the full JSON) with stable ordering."""
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def _write(name: str, text: str):
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        written.append(path)

    _write("report.json", report.to_json())
    _write("runs.csv", runs_csv(report))
    _write("cells.csv", cells_csv(report))
    if analysis is None:
        analysis = accuracy_error_analysis(report)
    _write("analysis.csv", analysis_csv(analysis))
    _write("scatter.csv", scatter_csv(analysis))
    if ablation is not None:
        _write("ablation.csv", ablation_csv(ablation))
    return written
