"""Per-variable probability predictors for binary MIP solutions.

Three sources: per-variable logistic models trained on solved instances
of a family, the LP root relaxation (simplex or interior point), and
external prediction files.  All produce a Prediction whose entries live
in [0, 1].
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import FORMAT_VERSION, MalformedDocumentError, MipInstance

SOURCE_LOGISTIC = "logistic"
SOURCE_LP_SIMPLEX = "lp_root_simplex"
SOURCE_LP_IPM = "lp_root_ipm"
SOURCE_EXTERNAL = "external"

_P_FLOOR = 1e-9  # probability clamp for intercept-only models


@dataclass
class Prediction:
    """Per-binary-variable probabilities with their source tag."""

    probabilities: np.ndarray
    source: str

    def __post_init__(self):
        self.probabilities = np.asarray(self.probabilities, dtype=float)
        if np.any(self.probabilities < 0) or np.any(self.probabilities > 1):
            raise ValueError("probabilities must lie in [0, 1]")


@dataclass
class LogisticModel:
    """One logistic classifier per binary variable over standardized features."""

    weights: np.ndarray  # (num_vars, num_features)
    intercepts: np.ndarray  # (num_vars,)
    feature_mean: np.ndarray
    feature_std: np.ndarray
    regularization: float
    iterations: list[int] = field(default_factory=list)
    loss_trace: list[list[float]] = field(default_factory=list)

    @property
    def num_vars(self) -> int:
        return self.weights.shape[0]

    @property
    def num_features(self) -> int:
        return self.weights.shape[1]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_loss(
    w: np.ndarray, b: float, x: np.ndarray, y: np.ndarray, reg: float
) -> float:
    """Mean logistic loss plus (reg/2)*||w||^2 (the intercept is unpenalized)."""
    z = x @ w + b
    # softplus(z) - y z is the negative log-likelihood per sample
    return float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * reg * (w @ w))


def logistic_gradient(
    w: np.ndarray, b: float, x: np.ndarray, y: np.ndarray, reg: float
) -> tuple[np.ndarray, float]:
    p = _sigmoid(x @ w + b)
    gw = x.T @ (p - y) / len(y) + reg * w
    gb = float(np.mean(p - y))
    return gw, gb


def _fit_one(x: np.ndarray, y: np.ndarray, reg: float, max_iters: int, tol: float):
    """Full-batch gradient descent with backtracking line search, zero init."""
    w = np.zeros(x.shape[1])
    b = 0.0
    loss = logistic_loss(w, b, x, y, reg)
    trace = [loss]
    it = 0
    while it < max_iters:
        gw, gb = logistic_gradient(w, b, x, y, reg)
        gnorm2 = float(gw @ gw) + gb * gb
        if math.sqrt(gnorm2) <= tol:
            break
        step = 1.0
        while step > 1e-12:
            w2 = w - step * gw
            b2 = b - step * gb
            new_loss = logistic_loss(w2, b2, x, y, reg)
            if new_loss <= loss - 1e-4 * step * gnorm2:
                break
            step *= 0.5
        else:
            break  # no productive step remains
        w, b, loss = w2, b2, new_loss
        trace.append(loss)
        it += 1
    return w, b, it, trace


def logistic_train(
    dataset: list[tuple[np.ndarray, np.ndarray]],
    reg: float = 1e-4,
    max_iters: int = 500,
    tol: float = 1e-6,
) -> LogisticModel:
    """Train one logistic model per binary variable on (features, labels) pairs.

    Features are standardized with the training-set mean/std.  Variables
    whose labels are constant across the dataset short-circuit to an
    intercept-only model.  Training is deterministic (zero init).
    """
    if len(dataset) < 2:
        raise ValueError("need at least two training samples")
    x = np.asarray([np.asarray(f, dtype=float) for f, _ in dataset])
    labels = np.asarray([np.asarray(y, dtype=float) for _, y in dataset])
    if x.ndim != 2 or labels.ndim != 2:
        raise ValueError("inconsistent feature or label dimensions")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std[std == 0] = 1.0
    xs = (x - mean) / std

    n_vars = labels.shape[1]
    weights = np.zeros((n_vars, x.shape[1]))
    intercepts = np.zeros(n_vars)
    iterations = []
    traces = []
    for j in range(n_vars):
        y = labels[:, j]
        if np.all(y == y[0]):
            p = min(max(float(y[0]), _P_FLOOR), 1.0 - _P_FLOOR)
            intercepts[j] = math.log(p / (1.0 - p))
            iterations.append(0)
            traces.append([logistic_loss(weights[j], intercepts[j], xs, y, reg)])
            continue
        w, b, it, trace = _fit_one(xs, y, reg, max_iters, tol)
        weights[j] = w
        intercepts[j] = b
        iterations.append(it)
        traces.append(trace)
    return LogisticModel(
        weights=weights,
        intercepts=intercepts,
        feature_mean=mean,
        feature_std=std,
        regularization=reg,
        iterations=iterations,
        loss_trace=traces,
    )


def logistic_predict(model: LogisticModel, xi: np.ndarray) -> Prediction:
    """Probabilities for one feature vector under the trained model."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (model.num_features,):
        raise ValueError(
            f"feature vector has shape {xi.shape}, expected ({model.num_features},)"
        )
    z = model.weights @ ((xi - model.feature_mean) / model.feature_std) + model.intercepts
    p = np.clip(_sigmoid(z), 1e-15, 1.0 - 1e-15)
    return Prediction(probabilities=p, source=SOURCE_LOGISTIC)


def lp_root_predict(instance: MipInstance, backend: str = "simplex") -> Prediction:
    """Use the LP root relaxation values of the binaries as probabilities."""
    from . import lp  # deferred to avoid an import cycle

    if backend == "simplex":
        sol = lp.solve_simplex(instance)
        source = SOURCE_LP_SIMPLEX
    elif backend == "ipm":
        sol = lp.solve_ipm(instance)
        source = SOURCE_LP_IPM
    else:
        raise ValueError(f"unknown backend {backend!r}")
    if sol.status != "optimal":
        raise ValueError(f"root relaxation is {sol.status}; cannot predict")
    p = np.clip(sol.primal[: instance.num_binary], 0.0, 1.0)
    return Prediction(probabilities=p, source=source)


def save_prediction(prediction: Prediction, path: str | Path) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "predictions": [
            {"index": j, "probability": float(p)}
            for j, p in enumerate(prediction.probabilities)
        ],
    }
    Path(path).write_text(json.dumps(doc))


def load_prediction(path: str | Path, n: int) -> Prediction:
    """Load an external prediction file for an instance with n binaries.

    Every index 0..n-1 must appear exactly once.  Out-of-range
    probabilities are clamped into [0, 1] with a warning rather than
    rejected.
    """
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise MalformedDocumentError(str(exc), position=exc.pos) from exc
    if not isinstance(doc, dict) or "predictions" not in doc:
        raise MalformedDocumentError("prediction file lacks a 'predictions' array")
    if doc.get("format_version") != FORMAT_VERSION:
        raise MalformedDocumentError(
            f"unsupported format_version {doc.get('format_version')!r}"
        )
    p = np.full(n, np.nan)
    for entry in doc["predictions"]:
        try:
            idx = int(entry["index"])
            val = float(entry["probability"])
        except (TypeError, KeyError, ValueError) as exc:
            raise MalformedDocumentError(f"bad prediction entry {entry!r}") from exc
        if not 0 <= idx < n:
            raise ValueError(f"prediction index {idx} out of range for n={n}")
        if not np.isnan(p[idx]):
            raise ValueError(f"duplicate prediction index {idx}")
        p[idx] = val
    if np.isnan(p).any():
        missing = int(np.isnan(p).sum())
        raise ValueError(f"prediction file covers {n - missing} of {n} variables")
    clipped = np.clip(p, 0.0, 1.0)
    if np.any(clipped != p):
        bad = int(np.sum(clipped != p))
        warnings.warn(
            f"{bad} prediction(s) outside [0, 1] were clamped", stacklevel=2
        )
    return Prediction(probabilities=clipped, source=SOURCE_EXTERNAL)


def save_model(model: LogisticModel, path: str | Path) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "weights": model.weights.tolist(),
        "intercepts": model.intercepts.tolist(),
        "feature_mean": model.feature_mean.tolist(),
        "feature_std": model.feature_std.tolist(),
        "regularization": model.regularization,
        "iterations": model.iterations,
    }
    Path(path).write_text(json.dumps(doc))


def load_model(path: str | Path) -> LogisticModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("format_version") != FORMAT_VERSION:
        raise MalformedDocumentError(
            f"unsupported format_version {doc.get('format_version')!r}"
        )
    return LogisticModel(
        weights=np.asarray(doc["weights"], dtype=float),
        intercepts=np.asarray(doc["intercepts"], dtype=float),
        feature_mean=np.asarray(doc["feature_mean"], dtype=float),
        feature_std=np.asarray(doc["feature_std"], dtype=float),
        regularization=float(doc["regularization"]),
        iterations=list(doc.get("iterations", [])),
    )
