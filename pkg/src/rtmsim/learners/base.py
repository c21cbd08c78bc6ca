"""Uniform fit/predict interface, feature standardization and model dumps."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, DegenerateTraining, DimensionMismatch, ValidationError

ALGORITHMS = ("knn", "naive_bayes", "decision_tree", "random_forest",
              "logistic_regression", "gradient_boosting", "svm")
STANDARDIZED = ("knn", "logistic_regression", "svm")
DUMP_VERSION = 1

DEFAULTS = {
    "knn": {"k": 5},
    "naive_bayes": {"var_floor": 1e-9, "fixed_variance": None},
    "decision_tree": {"max_depth": 8, "min_leaf": 3, "max_features": None},
    "random_forest": {"n_trees": 100, "max_depth": 8, "min_leaf": 3, "max_features": "sqrt",
                      "bootstrap": True},
    "logistic_regression": {"l2": 1e-2, "max_iter": 500, "tol": 1e-8, "class_weight": None},
    "gradient_boosting": {"n_rounds": 100, "max_depth": 3, "learning_rate": 0.1, "min_leaf": 1},
    "svm": {"C": 1.0, "max_iter": 2000, "step0": 1.0, "class_weight": None},
}


@dataclass(frozen=True)
class LearnerSpec:
    algorithm: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        unknown = set(self.params) - set(DEFAULTS[self.algorithm])
        if unknown:
            raise ConfigError(f"unknown {self.algorithm} parameters {sorted(unknown)}")
        merged = {**DEFAULTS[self.algorithm], **self.params}
        object.__setattr__(self, "params", merged)
        _validate_params(self.algorithm, merged)

    def replace(self, **kw) -> "LearnerSpec":
        if "params" in kw:
            kw["params"] = {**self.params, **kw["params"]}
        return dataclasses.replace(self, **kw)


def _validate_params(alg: str, p: dict) -> None:
    def need(cond, msg):
        if not cond:
            raise ConfigError(f"{alg}: {msg}")

    if alg == "knn":
        need(int(p["k"]) >= 1, "k must be >= 1")
    elif alg == "naive_bayes":
        need(p["var_floor"] > 0, "var_floor must be positive")
        need(p["fixed_variance"] is None or p["fixed_variance"] > 0, "fixed_variance must be positive")
    elif alg in ("decision_tree", "random_forest", "gradient_boosting"):
        need(int(p["max_depth"]) >= 1, "max_depth must be >= 1")
        need(int(p["min_leaf"]) >= 1, "min_leaf must be >= 1")
        if alg == "random_forest":
            need(int(p["n_trees"]) >= 1, "n_trees must be >= 1")
        if alg == "gradient_boosting":
            need(int(p["n_rounds"]) >= 1, "n_rounds must be >= 1")
            need(p["learning_rate"] > 0, "learning_rate must be positive")
        mf = p.get("max_features")
        need(mf is None or mf == "sqrt" or (isinstance(mf, int) and mf >= 1), "max_features must be None, 'sqrt' or >= 1")
    elif alg == "logistic_regression":
        need(p["l2"] >= 0, "l2 must be non-negative")
        need(int(p["max_iter"]) >= 1 and p["tol"] > 0, "max_iter >= 1 and tol > 0 required")
        need(p["class_weight"] in (None, "balanced"), "class_weight must be None or 'balanced'")
    elif alg == "svm":
        need(p["C"] > 0 and p["step0"] > 0, "C and step0 must be positive")
        need(int(p["max_iter"]) >= 2, "max_iter must be >= 2")
        need(p["class_weight"] in (None, "balanced"), "class_weight must be None or 'balanced'")


@dataclass
class Scaler:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X) -> "Scaler":
        sd = X.std(axis=0)
        return cls(X.mean(axis=0), np.where(sd > 0, sd, 1.0))

    def transform(self, X) -> np.ndarray:
        return (X - self.mean) / self.scale


@dataclass
class Model:
    algorithm: str
    spec: LearnerSpec
    n_features: int
    params: dict                  # fitted parameters (arrays or nested dicts)
    scaler: Scaler | None = None

    def to_json(self) -> str:
        return dump_model(self)


def check_xy(X, y=None):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch("feature matrix must be two-dimensional")
    if not np.isfinite(X).all():
        raise ValidationError("feature matrix has non-finite entries")
    if y is None:
        return X
    y = np.asarray(y)
    if y.ndim != 1 or len(y) != len(X):
        raise DimensionMismatch("label vector length differs from row count")
    if not np.isin(y, (0, 1)).all():
        raise ValidationError("labels must be 0 (healthy) or 1 (cancer)")
    return X, y.astype(np.int64)


def class_weights(y, mode) -> np.ndarray:
    """Per-sample weights (mean one); ``None`` gives uniform weights."""
    if mode is None:
        return np.ones(len(y))
    counts = np.bincount(y, minlength=2).astype(float)
    w = len(y) / (2.0 * np.maximum(counts, 1.0))
    return w[y]


def fit(spec: LearnerSpec, X, y) -> Model:
    """Train ``spec.algorithm`` on ``(X, y)``; labels 0 = healthy, 1 = cancer."""
    from . import REGISTRY

    X, y = check_xy(X, y)
    if len(X) == 0:
        raise DegenerateTraining("empty training set")
    scaler = None
    if spec.algorithm in STANDARDIZED:
        scaler = Scaler.fit(X)
        X = scaler.transform(X)
    params = REGISTRY[spec.algorithm][0](X, y, spec.params, spec.seed)
    return Model(spec.algorithm, spec, X.shape[1], params, scaler)


def predict(model: Model, X) -> np.ndarray:
    from . import REGISTRY

    X = check_xy(X)
    if X.shape[1] != model.n_features:
        raise DimensionMismatch(f"model expects {model.n_features} columns, got {X.shape[1]}")
    if model.scaler is not None:
        X = model.scaler.transform(X)
    return REGISTRY[model.algorithm][1](model.params, X).astype(np.int64)


# --- persistence -------------------------------------------------------------

def _encode(obj):
    if isinstance(obj, np.ndarray):
        return {"__array__": obj.tolist(), "dtype": str(obj.dtype), "shape": list(obj.shape)}
    if isinstance(obj, dict):
        return {k: _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _decode(obj):
    if isinstance(obj, dict):
        if "__array__" in obj:
            return np.array(obj["__array__"], dtype=obj["dtype"]).reshape(obj["shape"])
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    return obj


def dump_model(model: Model) -> str:
    """Versioned JSON text; floats are written at full precision."""
    payload = {
        "version": DUMP_VERSION,
        "algorithm": model.algorithm,
        "spec": {"params": model.spec.params, "seed": model.spec.seed},
        "n_features": model.n_features,
        "scaler": None if model.scaler is None else _encode({"mean": model.scaler.mean, "scale": model.scaler.scale}),
        "params": _encode(model.params),
    }
    return json.dumps(payload, sort_keys=True)


def load_model(text: str) -> Model:
    data = json.loads(text)
    if data.get("version") != DUMP_VERSION:
        raise ValidationError(f"unsupported model dump version {data.get('version')!r}")
    spec = LearnerSpec(data["algorithm"], data["spec"]["params"], data["spec"]["seed"])
    scaler = None
    if data["scaler"] is not None:
        s = _decode(data["scaler"])
        scaler = Scaler(s["mean"], s["scale"])
    return Model(data["algorithm"], spec, data["n_features"], _decode(data["params"]), scaler)
