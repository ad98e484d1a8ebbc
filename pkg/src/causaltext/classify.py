"""Bag-of-words logistic regression, trained by deterministic batch descent.

The same model family serves three roles downstream: recovering the latent
variable from text, modeling treatment propensity from text plus observed
covariates, and acting as an interpretability lens on how separable a
synthetic dataset is.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

__all__ = [
    "BowFeatures",
    "LogregConfig",
    "LogisticModel",
    "ErrorRates",
    "SplitSpec",
    "featurize",
    "features_matrix",
    "sigmoid",
    "loss_and_gradient",
    "train_logreg",
    "predict_proba",
    "accuracy",
    "estimate_error_rates",
    "make_split",
]


@dataclass(frozen=True)
class BowFeatures:
    """Sparse token counts, with optional covariates in trailing slots."""

    indices: np.ndarray
    values: np.ndarray
    n_features: int

    def __post_init__(self):
        indices = np.asarray(self.indices, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "values", values)
        if indices.shape != values.shape:
            raise ValueError("indices and values must align")
        if indices.size and (indices.min() < 0 or indices.max() >= self.n_features):
            raise ValueError("feature index out of bounds")

    def dense(self) -> np.ndarray:
        out = np.zeros(self.n_features)
        out[self.indices] = self.values
        return out


def featurize(tokens, vocab_size: int, covariates=None, binary: bool = False) -> BowFeatures:
    """Token counts over the vocabulary; covariates appended after the vocab
    block. The intercept is the model's business, not a feature."""
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.size and (tokens.min() < 0 or tokens.max() >= vocab_size):
        raise ValueError("token id out of vocab bounds")
    counts = np.bincount(tokens, minlength=vocab_size).astype(np.float64)
    if binary:
        counts = (counts > 0).astype(np.float64)
    n_features = vocab_size
    extra_idx = []
    extra_val = []
    if covariates is not None:
        covariates = np.asarray(covariates, dtype=np.float64)
        for j, value in enumerate(covariates):
            extra_idx.append(vocab_size + j)
            extra_val.append(float(value))
        n_features += covariates.size
    nz = np.nonzero(counts)[0]
    indices = np.concatenate([nz, np.array(extra_idx, dtype=np.int64)]) if extra_idx else nz
    values = np.concatenate([counts[nz], np.array(extra_val)]) if extra_val else counts[nz]
    return BowFeatures(indices=indices, values=values, n_features=n_features)


def features_matrix(rows: list[BowFeatures]) -> sp.csr_matrix:
    if not rows:
        raise ValueError("no feature rows")
    n_features = rows[0].n_features
    indptr = np.zeros(len(rows) + 1, dtype=np.int64)
    for i, row in enumerate(rows):
        if row.n_features != n_features:
            raise ValueError("inconsistent feature dimensions")
        indptr[i + 1] = indptr[i] + row.indices.size
    indices = np.concatenate([r.indices for r in rows]) if rows else np.empty(0)
    data = np.concatenate([r.values for r in rows])
    return sp.csr_matrix((data, indices, indptr), shape=(len(rows), n_features))


@dataclass(frozen=True)
class LogregConfig:
    """Training hyperparameters; l2=None means 1/n_train."""

    l2: float | None = None
    learning_rate: float = 0.1
    max_epochs: int = 500
    grad_tol: float = 1e-5
    binary_counts: bool = False
    track_history: bool = False  # keep the per-epoch loss curve in the summary


@dataclass(frozen=True)
class LogisticModel:
    """Fitted weights (intercept last) plus the config and a fit summary."""

    weights: np.ndarray
    config: LogregConfig
    seed: int
    summary: dict = field(default_factory=dict)

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=np.float64)
        object.__setattr__(self, "weights", weights)
        if not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite")

    def to_text(self) -> str:
        cfg = self.config
        lines = [
            f"l2={cfg.l2 if cfg.l2 is None else repr(float(cfg.l2))}",
            f"learning_rate={float(cfg.learning_rate)!r}",
            f"max_epochs={cfg.max_epochs}",
            f"grad_tol={float(cfg.grad_tol)!r}",
            f"binary_counts={int(cfg.binary_counts)}",
            f"seed={self.seed}",
            f"n_weights={self.weights.size}",
        ]
        lines += [repr(float(w)) for w in self.weights]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "LogisticModel":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        fields = {}
        idx = 0
        while "=" in lines[idx]:
            key, _, value = lines[idx].partition("=")
            fields[key] = value
            idx += 1
        n = int(fields["n_weights"])
        weights = np.array([float(v) for v in lines[idx:idx + n]])
        cfg = LogregConfig(
            l2=None if fields["l2"] == "None" else float(fields["l2"]),
            learning_rate=float(fields["learning_rate"]),
            max_epochs=int(fields["max_epochs"]),
            grad_tol=float(fields["grad_tol"]),
            binary_counts=bool(int(fields["binary_counts"])),
        )
        return cls(weights=weights, config=cfg, seed=int(fields["seed"]))


@dataclass(frozen=True)
class ErrorRates:
    """Confusion rates of thresholded predictions against true labels."""

    fpr: float
    fnr: float
    n_negative: int
    n_positive: int

    def __post_init__(self):
        if not (0.0 <= self.fpr <= 1.0 and 0.0 <= self.fnr <= 1.0):
            raise ValueError("rates must be in [0, 1]")

    @property
    def separation(self) -> float:
        """1 - fpr - fnr; the misclassification matrix is singular at 0."""
        return 1.0 - self.fpr - self.fnr


@dataclass(frozen=True)
class SplitSpec:
    """Disjoint train/dev/test index sets covering a dataset."""

    train: np.ndarray
    dev: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        parts = [np.asarray(p, dtype=np.int64) for p in (self.train, self.dev, self.test)]
        object.__setattr__(self, "train", parts[0])
        object.__setattr__(self, "dev", parts[1])
        object.__setattr__(self, "test", parts[2])
        merged = np.concatenate(parts)
        if np.unique(merged).size != merged.size:
            raise ValueError("split parts must be disjoint")


def make_split(n: int, sizes: tuple[int, int, int] = (8000, 1000, 1000),
               rng: np.random.Generator | None = None) -> SplitSpec:
    """Seeded shuffled split; sizes must sum to n."""
    if sum(sizes) != n:
        raise ValueError(f"split sizes {sizes} do not sum to {n}")
    order = np.arange(n) if rng is None else rng.permutation(n)
    a, b = sizes[0], sizes[0] + sizes[1]
    return SplitSpec(train=order[:a], dev=order[a:b], test=order[b:])


def sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))


def _scores(X, weights: np.ndarray) -> np.ndarray:
    return np.asarray(X @ weights[:-1]).ravel() + weights[-1]


def loss_and_gradient(X, y: np.ndarray, weights: np.ndarray, l2: float):
    """Mean log-loss with L2 on the non-intercept weights, and its gradient."""
    n = y.shape[0]
    z = _scores(X, weights)
    p = sigmoid(z)
    eps = 1e-12
    loss = -np.mean(y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps))
    loss += 0.5 * l2 * float(weights[:-1] @ weights[:-1])
    residual = p - y
    grad = np.empty_like(weights)
    grad[:-1] = np.asarray(X.T @ residual).ravel() / n + l2 * weights[:-1]
    grad[-1] = residual.mean()
    return loss, grad


def train_logreg(X, y, config: LogregConfig = LogregConfig(), seed: int = 0) -> LogisticModel:
    """L2-regularized maximum likelihood by full-batch gradient descent.

    Deterministic given (data, config, seed): weights start at zero and the
    step size halves whenever a step would increase the loss, so the loss
    is non-increasing across accepted epochs. Stops when the gradient
    infinity-norm falls below config.grad_tol or at the epoch cap (recorded
    in the fit summary either way).
    """
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.shape[0] < 2:
        raise ValueError("need at least two training examples")
    classes = np.unique(y)
    if classes.size < 2:
        raise ValueError("training labels are single-class")
    if not np.all(np.isin(classes, (0.0, 1.0))):
        raise ValueError("labels must be 0/1")
    n_features = X.shape[1]
    l2 = config.l2 if config.l2 is not None else 1.0 / y.shape[0]
    weights = np.zeros(n_features + 1)
    lr = config.learning_rate
    loss, grad = loss_and_gradient(X, y, weights, l2)
    history = [float(loss)] if config.track_history else None
    epochs_run = 0
    halvings = 0
    hit_cap = True
    for _ in range(config.max_epochs):
        if float(np.max(np.abs(grad))) <= config.grad_tol:
            hit_cap = False
            break
        while True:
            candidate = weights - lr * grad
            cand_loss, cand_grad = loss_and_gradient(X, y, candidate, l2)
            if cand_loss <= loss or lr < 1e-14:
                break
            lr *= 0.5
            halvings += 1
        weights, loss, grad = candidate, cand_loss, cand_grad
        epochs_run += 1
        if history is not None:
            history.append(float(loss))
    summary = {
        "epochs_run": epochs_run,
        "hit_epoch_cap": hit_cap,
        "final_loss": float(loss),
        "final_grad_norm": float(np.max(np.abs(grad))),
        "lr_halvings": halvings,
        "l2": float(l2),
    }
    if history is not None:
        summary["loss_history"] = history
    return LogisticModel(weights=weights, config=config, seed=seed, summary=summary)


def predict_proba(model: LogisticModel, X) -> np.ndarray:
    return sigmoid(_scores(X, model.weights))


def accuracy(model: LogisticModel, X, y) -> float:
    """Fraction of threshold-0.5 predictions matching labels.

    Ties (probability exactly 0.5) predict class 0.
    """
    y = np.asarray(y, dtype=np.int64).ravel()
    if y.size == 0:
        raise ValueError("empty evaluation set")
    pred = (_scores(X, model.weights) > 0).astype(np.int64)
    return float(np.mean(pred == y))


def estimate_error_rates(model: LogisticModel, X, y) -> ErrorRates:
    """Empirical confusion rates of thresholded predictions on held-out data."""
    y = np.asarray(y, dtype=np.int64).ravel()
    pred = (_scores(X, model.weights) > 0).astype(np.int64)
    n_neg = int(np.sum(y == 0))
    n_pos = int(np.sum(y == 1))
    if n_neg == 0 or n_pos == 0:
        raise ValueError("both classes must appear in the held-out set")
    fpr = float(np.sum((pred == 1) & (y == 0)) / n_neg)
    fnr = float(np.sum((pred == 0) & (y == 1)) / n_pos)
    return ErrorRates(fpr=fpr, fnr=fnr, n_negative=n_neg, n_positive=n_pos)
