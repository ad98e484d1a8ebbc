"""Treatment-effect estimators that use text, and the baselines they race.

All four text methods follow the same split-sample protocol: nuisance
models (classifiers, topic representations) are fitted on one half of the
dataset and the effect is estimated on the other, then the halves swap and
the two estimates are averaged.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import classify as cl
from .lda import infer_topic_mixture, train_lda
from .matching import (
    MCF_MAX_PAIRS,
    full_match_scalar,
    full_match_vectors,
    matched_sets_estimate,
)
from .seeding import child_rng, child_seed
from .structured import (
    EmptyStratumError,
    identification_ate,
    oracle_ate,
    plug_in_ate,
)
from .textgen import Dataset
from .vocab import Vocab

__all__ = [
    "EstimatorConfig",
    "EstimateReport",
    "MeasurementSingularError",
    "crossfit",
    "propensity_match_ate",
    "representation_match_ate",
    "ipw_ate",
    "measurement_error_ate",
    "baseline_suite",
    "corrupt_joint",
    "invert_misclassified_joint",
    "PropensityMatching",
    "RepresentationMatching",
    "IpwEstimator",
    "MeasurementErrorEstimator",
]


class MeasurementSingularError(RuntimeError):
    """Error-rate matrix too close to singular to invert meaningfully."""


@dataclass(frozen=True)
class EstimatorConfig:
    """Shared knobs for the estimator suite."""

    ipw_truncation: tuple[float, float] = (0.05, 0.95)
    bootstrap_samples: int = 100
    labeled_budget: int | None = None  # None: the whole training split
    min_separation: float = 0.05  # refuse inversion when |1-fpr-fnr| is below
    rep_topics: int = 8
    rep_iters: int = 60
    rep_foldin_sweeps: int = 15
    lda_alpha: float = 0.1
    lda_beta: float = 0.01
    mcf_max_pairs: int = MCF_MAX_PAIRS
    max_set_size: int | None = None
    logreg: cl.LogregConfig = field(default_factory=cl.LogregConfig)


@dataclass(frozen=True)
class EstimateReport:
    """One method's outcome on one dataset, scored against the oracle."""

    method: str
    estimate: float
    oracle: float
    abs_error: float
    ci_low: float | None = None
    ci_high: float | None = None
    classifier_accuracy: float | None = None
    seeds: dict = field(default_factory=dict)
    config_fingerprint: str = ""
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.isnan(self.estimate) and np.isnan(self.abs_error):
            return  # a recorded failure, not an estimate
        expected = abs(self.estimate - self.oracle)
        if abs(self.abs_error - expected) > 1e-12:
            raise ValueError("abs_error must equal |estimate - oracle|")


def _report(method, estimate, oracle, **kw) -> EstimateReport:
    return EstimateReport(
        method=method, estimate=float(estimate), oracle=float(oracle),
        abs_error=abs(float(estimate) - float(oracle)), **kw,
    )


def _columns(records):
    c = np.array([r.c for r in records], dtype=np.int64)
    u = np.array([r.u for r in records], dtype=np.int64)
    a = np.array([r.a for r in records], dtype=np.int64)
    y = np.array([r.y for r in records], dtype=np.int64)
    return c, u, a, y


def _bow_matrix(records, vocab_size, with_c=False, binary=False):
    rows = []
    for r in records:
        cov = np.array([r.c], dtype=np.float64) if with_c else None
        rows.append(cl.featurize(r.tokens, vocab_size, covariates=cov, binary=binary))
    return cl.features_matrix(rows)


def _hajek(y, a, scores):
    w1 = a / scores
    w0 = (1 - a) / (1 - scores)
    if w1.sum() <= 0 or w0.sum() <= 0:
        raise ValueError("one treatment arm is empty")
    return float((w1 * y).sum() / w1.sum() - (w0 * y).sum() / w0.sum())


def _stratified_propensity(train, est, vocab_size, config, seed):
    """Fit p(A|C,T) as one bag-of-words model per C stratum.

    A pooled model with C as an additive feature cannot express latent
    effects on treatment that reverse sign across C, which the Simpson's
    paradox construction guarantees; conditioning exactly on binary C keeps
    the scores calibrated. Returns (est-split scores, est-split accuracy).
    """
    c_tr, _, a_tr, _ = _columns(train)
    c_est, _, a_est, _ = _columns(est)
    X_tr = _bow_matrix(train, vocab_size, binary=config.logreg.binary_counts)
    X_est = _bow_matrix(est, vocab_size, binary=config.logreg.binary_counts)
    scores = np.empty(len(est))
    hits = 0
    for stratum in (0, 1):
        tr_mask = c_tr == stratum
        est_mask = c_est == stratum
        if est_mask.sum() == 0:
            continue
        if np.unique(a_tr[tr_mask]).size < 2:
            raise ValueError(f"training stratum c={stratum} lacks both treatment arms")
        model = cl.train_logreg(
            X_tr[np.nonzero(tr_mask)[0]], a_tr[tr_mask], config.logreg,
            seed=child_seed(seed, "propensity", stratum),
        )
        idx = np.nonzero(est_mask)[0]
        scores[idx] = cl.predict_proba(model, X_est[idx])
        hits += int(((scores[idx] > 0.5).astype(np.int64) == a_est[idx]).sum())
    return scores, hits / len(est)


class PropensityMatching:
    """Full matching on a text-based propensity score within C strata."""

    name = "propensity"

    def __init__(self, config: EstimatorConfig):
        self.config = config

    def fit_estimate(self, train, est, ctx):
        scores, acc = _stratified_propensity(
            train, est, ctx["vocab_size"], self.config, ctx["seed"]
        )
        c, _, a, y = _columns(est)
        groups, dropped = [], 0
        for stratum in (0, 1):
            mask = c == stratum
            member = np.nonzero(mask)[0]
            treated_flags = a[member] == 1
            if treated_flags.all() or not treated_flags.any():
                dropped += int(member.size)
                continue
            groups.append(
                full_match_scalar(scores[member], treated_flags, ids=member,
                                  mcf_max_pairs=self.config.mcf_max_pairs)
            )
        if not groups:
            raise ValueError("no stratum had both treated and control units")
        estimate = matched_sets_estimate(groups, y)
        return estimate, {
            "classifier_accuracy": acc,
            "dropped_units": dropped,
            "engines": sorted({g.engine for g in groups}),
        }


class RepresentationMatching:
    """Full matching on topic-mixture vectors (cosine distance) within C strata."""

    name = "representation"

    def __init__(self, config: EstimatorConfig):
        self.config = config

    def fit_estimate(self, train, est, ctx):
        cfg = self.config
        vocab: Vocab = ctx["vocab"]
        lda_model = train_lda(
            [r.tokens for r in train], vocab, k=cfg.rep_topics,
            alpha=cfg.lda_alpha, beta=cfg.lda_beta, iters=cfg.rep_iters,
            seed=ctx["seed"],
        )
        # fold-in noise is keyed by document content, so identical texts get
        # identical representations and tie exactly in the matcher
        thetas = np.stack([
            infer_topic_mixture(
                lda_model, r.tokens, sweeps=cfg.rep_foldin_sweeps,
                seed=child_seed(ctx["seed"], "foldin", tuple(int(t) for t in r.tokens)),
            )
            for r in est
        ])
        empty_docs = sum(1 for r in est if len(r.tokens) == 0)
        c, _, a, y = _columns(est)
        groups, dropped = [], 0
        for stratum in (0, 1):
            mask = c == stratum
            member = np.nonzero(mask)[0]
            treated_flags = a[member] == 1
            if treated_flags.all() or not treated_flags.any():
                dropped += int(member.size)
                continue
            groups.append(
                full_match_vectors(thetas[member], treated_flags, ids=member,
                                   mcf_max_pairs=cfg.mcf_max_pairs)
            )
        if not groups:
            raise ValueError("no stratum had both treated and control units")
        estimate = matched_sets_estimate(groups, y)
        return estimate, {
            "classifier_accuracy": None,
            "dropped_units": dropped,
            "uniform_representations": empty_docs,
            "engines": sorted({g.engine for g in groups}),
        }


class IpwEstimator:
    """Stabilized inverse-propensity weighting with truncated text scores."""

    name = "ipw"

    def __init__(self, config: EstimatorConfig):
        self.config = config

    def fit_estimate(self, train, est, ctx):
        cfg = self.config
        raw_scores, acc = _stratified_propensity(
            train, est, ctx["vocab_size"], cfg, ctx["seed"]
        )
        _, _, a, y = _columns(est)
        lo, hi = cfg.ipw_truncation
        scores = np.clip(raw_scores, lo, hi)
        ya = y.astype(np.float64)
        aa = a.astype(np.float64)
        rng = child_rng("ipw-bootstrap", ctx["seed"])
        n = len(est)
        boots = np.empty(cfg.bootstrap_samples)
        for b in range(cfg.bootstrap_samples):
            idx = rng.integers(0, n, n)
            boots[b] = _hajek(ya[idx], aa[idx], scores[idx])
        estimate = float(boots.mean())
        return estimate, {
            "classifier_accuracy": acc,
            "bootstrap": boots,
            "point_estimate": _hajek(ya, aa, scores),
        }


def corrupt_joint(joint: np.ndarray, fpr: float, fnr: float) -> np.ndarray:
    """Replace the U axis of a [c, u, a, y] joint with a noisy proxy axis."""
    joint = np.asarray(joint, dtype=np.float64)
    m = np.array([[1.0 - fpr, fnr], [fpr, 1.0 - fnr]])  # m[u*, u] = P(U*=u*|U=u)
    return np.einsum("su,cuay->csay", m, joint)


def invert_misclassified_joint(joint_star: np.ndarray, fpr: float, fnr: float,
                               min_separation: float = 0.05):
    """Recover p(U, A, C, Y) from the proxy joint by inverting the 2x2
    misclassification matrix cell by cell.

    Negative recovered masses are clamped to zero and the (a, c, y) cell is
    rescaled to keep its observed total; clamp events are counted. Refuses
    (MeasurementSingularError) when |1 - fpr - fnr| < min_separation.
    Returns (joint, clamp_events).
    """
    joint_star = np.asarray(joint_star, dtype=np.float64)
    if joint_star.shape != (2, 2, 2, 2):
        raise ValueError("expected a [c, u*, a, y] joint")
    separation = 1.0 - fpr - fnr
    if abs(separation) < min_separation:
        raise MeasurementSingularError(
            f"error rates too close to singular: |1 - {fpr:.4f} - {fnr:.4f}|"
            f" = {abs(separation):.4f} < {min_separation}"
        )
    m = np.array([[1.0 - fpr, fnr], [fpr, 1.0 - fnr]])
    m_inv = np.linalg.inv(m)
    joint = np.empty_like(joint_star)
    clamp_events = 0
    for c in range(2):
        for a in range(2):
            for y in range(2):
                observed = joint_star[c, :, a, y]
                recovered = m_inv @ observed
                if recovered.min() < 0.0:
                    clamp_events += 1
                    clipped = np.clip(recovered, 0.0, None)
                    total = observed.sum()
                    if clipped.sum() > 0 and total > 0:
                        recovered = clipped * (total / clipped.sum())
                    else:
                        recovered = clipped
                joint[c, :, a, y] = recovered
    return joint, clamp_events


class MeasurementErrorEstimator:
    """Impute a noisy proxy for U, then undo its bias via the error rates."""

    name = "measurement"

    def __init__(self, config: EstimatorConfig):
        self.config = config

    def fit_estimate(self, train, est, ctx):
        cfg = self.config
        vocab_size = ctx["vocab_size"]
        binary = cfg.logreg.binary_counts
        budget = cfg.labeled_budget if cfg.labeled_budget is not None else len(train)
        if budget < 4:
            raise ValueError("labeled budget too small to split")
        if budget > len(train):
            raise ValueError(
                f"labeled budget {budget} exceeds the training split ({len(train)})"
            )
        rng = child_rng("me-labeled", ctx["seed"])
        labeled_idx = rng.permutation(len(train))[:budget]
        half = budget // 2
        fit_records = [train[i] for i in labeled_idx[:half]]
        rate_records = [train[i] for i in labeled_idx[half:]]
        X_fit = _bow_matrix(fit_records, vocab_size, binary=binary)
        _, u_fit, _, _ = _columns(fit_records)
        model = cl.train_logreg(X_fit, u_fit, cfg.logreg, seed=ctx["seed"])
        X_rate = _bow_matrix(rate_records, vocab_size, binary=binary)
        _, u_rate, _, _ = _columns(rate_records)
        rates = cl.estimate_error_rates(model, X_rate, u_rate)

        X_est = _bow_matrix(est, vocab_size, binary=binary)
        c, u_true, a, y = _columns(est)
        u_star = (cl.predict_proba(model, X_est) > 0.5).astype(np.int64)
        acc = float(np.mean(u_star == u_true))
        counts = np.zeros((2, 2, 2, 2))
        np.add.at(counts, (c, u_star, a, y), 1.0)
        joint, clamp_events = invert_misclassified_joint(
            counts / counts.sum(), rates.fpr, rates.fnr, cfg.min_separation
        )
        estimate, pooled = identification_ate(joint, pool_empty_strata=True)
        return estimate, {
            "classifier_accuracy": acc,
            "fpr": rates.fpr,
            "fnr": rates.fnr,
            "clamp_events": clamp_events,
            "pooled_strata": pooled,
            "labeled_budget": budget,
        }


def _validate_fold(records, needs_u: bool):
    c, u, a, y = _columns(records)
    if np.unique(a).size < 2:
        raise ValueError("a split lacks both treatment arms")
    if needs_u and np.unique(u).size < 2:
        raise ValueError("a split lacks both latent classes")


def crossfit(dataset: Dataset, estimator, seed: int, oracle: float | None = None) -> EstimateReport:
    """Split in half, fit nuisances on one side and estimate on the other,
    swap, and average the two estimates into one report."""
    records = dataset.records
    n = len(records)
    if n < 4:
        raise ValueError("dataset too small to crossfit")
    if oracle is None:
        oracle = oracle_ate(dataset.structured_params())
    perm = child_rng("crossfit-split", seed).permutation(n)
    half = n // 2
    folds = (perm[:half], perm[half:])
    needs_u = isinstance(estimator, MeasurementErrorEstimator)
    estimates, infos = [], []
    vocab = Vocab(tuple(dataset.metadata["vocab"]), eos_id=dataset.metadata.get("eos_id"))
    for k in (0, 1):
        train = [records[i] for i in folds[k]]
        est = [records[i] for i in folds[1 - k]]
        _validate_fold(train, needs_u)
        _validate_fold(est, needs_u)
        ctx = {
            "vocab_size": len(vocab),
            "vocab": vocab,
            "seed": child_seed(seed, "fold", k),
            "metadata": dataset.metadata,
        }
        estimate, info = estimator.fit_estimate(train, est, ctx)
        estimates.append(estimate)
        infos.append(info)
    estimate = float(np.mean(estimates))
    ci_low = ci_high = None
    if all("bootstrap" in info for info in infos):
        paired = (infos[0]["bootstrap"] + infos[1]["bootstrap"]) / 2.0
        ci_low = float(np.percentile(paired, 2.5))
        ci_high = float(np.percentile(paired, 97.5))
    accuracies = [info.get("classifier_accuracy") for info in infos]
    acc = None
    if all(x is not None for x in accuracies):
        acc = float(np.mean(accuracies))
    extras = {
        "fold_estimates": [float(e) for e in estimates],
        "fold_info": [
            {k: v for k, v in info.items() if k != "bootstrap"} for info in infos
        ],
    }
    return _report(
        estimator.name, estimate, oracle,
        ci_low=ci_low, ci_high=ci_high, classifier_accuracy=acc,
        seeds={"crossfit": seed}, extras=extras,
    )


def propensity_match_ate(dataset: Dataset, config: EstimatorConfig = EstimatorConfig(),
                         seed: int = 0) -> EstimateReport:
    return crossfit(dataset, PropensityMatching(config), seed)


def representation_match_ate(dataset: Dataset, config: EstimatorConfig = EstimatorConfig(),
                             seed: int = 0) -> EstimateReport:
    return crossfit(dataset, RepresentationMatching(config), seed)


def ipw_ate(dataset: Dataset, config: EstimatorConfig = EstimatorConfig(),
            seed: int = 0) -> EstimateReport:
    return crossfit(dataset, IpwEstimator(config), seed)


def measurement_error_ate(dataset: Dataset, labeled_budget: int | None = None,
                          config: EstimatorConfig = EstimatorConfig(),
                          seed: int = 0) -> EstimateReport:
    if labeled_budget is not None:
        config = replace(config, labeled_budget=labeled_budget)
    return crossfit(dataset, MeasurementErrorEstimator(config), seed)


def baseline_suite(dataset: Dataset, labeled_budget: int = 50,
                   seed: int = 0) -> list[EstimateReport]:
    """Oracle, naive C-adjusted, unadjusted, and labeled plug-in baselines."""
    params = dataset.structured_params()
    oracle = oracle_ate(params)
    c, u, a, y = _columns(dataset.records)
    reports = [_report("oracle", oracle, oracle, seeds={"baseline": seed})]

    naive = 0.0
    for stratum in (0, 1):
        mask = c == stratum
        y1 = y[mask & (a == 1)]
        y0 = y[mask & (a == 0)]
        if y1.size == 0 or y0.size == 0:
            raise ValueError(f"stratum c={stratum} lacks a treatment arm")
        naive += (float(y1.mean()) - float(y0.mean())) * float(mask.mean())
    reports.append(_report("naive", naive, oracle, seeds={"baseline": seed}))

    unadjusted = float(y[a == 1].mean() - y[a == 0].mean())
    reports.append(_report("unadjusted", unadjusted, oracle, seeds={"baseline": seed}))

    n = len(dataset.records)
    budget = min(labeled_budget, n)
    idx = child_rng("baseline-plugin", seed).permutation(n)[:budget]
    arr = np.stack([c[idx], u[idx], a[idx], y[idx]], axis=1)
    try:
        plug = plug_in_ate(arr)
        reports.append(
            _report("plug_in", plug, oracle, seeds={"baseline": seed},
                    extras={"labeled_budget": budget})
        )
    except EmptyStratumError as exc:
        reports.append(
            EstimateReport(
                method="plug_in", estimate=float("nan"), oracle=oracle,
                abs_error=float("nan"), seeds={"baseline": seed},
                extras={"labeled_budget": budget, "failure": str(exc)},
            )
        )
    return reports
