"""Synthetic benchmark: mixture-of-exponentials response with known treatment effects"""
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union
import json
import logging
import math

import numpy as np
from joblib import Parallel, delayed
from pydantic import ValidationError

from app.config import settings
from app.data.dataset import Dataset
from app.exceptions import ConfigError, ParameterError
from app.schemas.dataset import Schema
from app.schemas.synthetic import SyntheticModelDocument

logger = logging.getLogger(__name__)

# X -> dataset treatment labels (0..K-1)
TreatmentRule = Callable[[np.ndarray], np.ndarray]

FEATURE_LOW, FEATURE_HIGH = 0.0, 10.0
TARGET_MEAN_ABS_F = 8.0
_CHUNK = 8192


@dataclass(frozen=True)
class SyntheticModel:
    """
    Y = f(X) + U[0, alpha * X_t] + N(0, sigma^2) under treatment t = 1..K, with
    f(x) = sum_i a_i exp(-sum_j b_ij |x_j - c_ij|) and X uniform on [0, 10]^d.
    Dataset label k stands for treatment k + 1.
    """
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    alpha: float = 0.4
    sigma: float = 0.8
    n_treatments: int = 4
    seed: Optional[int] = None

    def __post_init__(self):
        if np.any(self.b <= 0):
            raise ParameterError("b entries must be strictly positive")
        if self.alpha < 0 or self.sigma < 0:
            raise ParameterError("alpha and sigma must be non-negative")
        if self.n_treatments > self.d:
            raise ParameterError("each treatment needs its own feature coordinate")

    @property
    def d(self) -> int:
        return int(self.c.shape[1])

    @property
    def m(self) -> int:
        return int(self.a.shape[0])

    @property
    def label_map(self) -> Dict[int, int]:
        return {k: k + 1 for k in range(self.n_treatments)}

    def schema(self) -> Schema:
        return Schema.from_names([f"x{j + 1}" for j in range(self.d)], [], "treatment", "response")


def f_values(model: SyntheticModel, X: np.ndarray) -> np.ndarray:
    """Systematic component f, evaluated in row chunks."""
    out = np.empty(X.shape[0])
    for start in range(0, X.shape[0], _CHUNK):
        block = X[start:start + _CHUNK]
        acc = np.zeros(block.shape[0])
        for i in range(model.m):
            acc += model.a[i] * np.exp(-(np.abs(block - model.c[i]) @ model.b[i]))
        out[start:start + _CHUNK] = acc
    return out


def _uniform_features(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    return rng.uniform(FEATURE_LOW, FEATURE_HIGH, size=(n, d))


def mean_abs_f(model: SyntheticModel, n: int, rng: np.random.Generator) -> float:
    return float(np.mean(np.abs(f_values(model, _uniform_features(rng, n, model.d)))))


def calibration_stream(seed: int) -> np.random.Generator:
    return np.random.default_rng([seed, 1])


def sample_model(seed: int, d: int = 50, m: int = 50, n_treatments: int = 4,
                 alpha: float = 0.4, sigma: float = 0.8,
                 calibration_draws: int = 100_000) -> SyntheticModel:
    """
    Draw c ~ U[0, 10], b ~ U[0.05, 0.25], a ~ U[-15, 15], then rescale ``a`` so
    that E|f(X)| over ``calibration_draws`` points is 8, keeping alpha near 5%
    of the main effect.
    """
    rng = np.random.default_rng(seed)
    c = rng.uniform(0.0, 10.0, size=(m, d))
    b = rng.uniform(0.05, 0.25, size=(m, d))
    a = rng.uniform(-15.0, 15.0, size=m)
    raw = SyntheticModel(a=a, b=b, c=c, alpha=alpha, sigma=sigma, n_treatments=n_treatments, seed=seed)
    scale = TARGET_MEAN_ABS_F / mean_abs_f(raw, calibration_draws, calibration_stream(seed))
    logger.info(f"Sampled synthetic model (seed={seed}, d={d}, m={m}), rescaled a by {scale:.4g}")
    return SyntheticModel(a=a * scale, b=b, c=c, alpha=alpha, sigma=sigma, n_treatments=n_treatments, seed=seed)


def _responses(model: SyntheticModel, X: np.ndarray, labels: np.ndarray,
               rng: np.random.Generator) -> np.ndarray:
    u = rng.uniform(0.0, 1.0, size=X.shape[0])
    noise = rng.normal(0.0, model.sigma, size=X.shape[0])
    return f_values(model, X) + u * model.alpha * X[np.arange(X.shape[0]), labels] + noise


def _dataset(model: SyntheticModel, X: np.ndarray, labels: np.ndarray, y: np.ndarray) -> Dataset:
    return Dataset(
        schema=model.schema(),
        features=X,
        treatment=labels.astype(np.int64),
        response=y,
        n_treatments=model.n_treatments,
        treatment_names=[str(model.label_map[k]) for k in range(model.n_treatments)],
    )


def generate(model: SyntheticModel, n_per_treatment: int, rng: np.random.Generator) -> Dataset:
    """``n_per_treatment`` rows for every treatment, in treatment blocks."""
    if n_per_treatment < 1:
        raise ParameterError(f"n_per_treatment must be at least 1, got {n_per_treatment}")
    blocks_X, blocks_t, blocks_y = [], [], []
    for k in range(model.n_treatments):
        X = _uniform_features(rng, n_per_treatment, model.d)
        labels = np.full(n_per_treatment, k, dtype=np.int64)
        blocks_X.append(X)
        blocks_t.append(labels)
        blocks_y.append(_responses(model, X, labels, rng))
    return _dataset(model, np.vstack(blocks_X), np.concatenate(blocks_t), np.concatenate(blocks_y))


def generate_randomized(model: SyntheticModel, n: int, probs: Sequence[float],
                        rng: np.random.Generator) -> Dataset:
    """``n`` rows whose treatments are drawn independently with probabilities ``probs``."""
    p = np.asarray(probs, dtype=np.float64)
    if p.shape != (model.n_treatments,) or np.any(p <= 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ParameterError(f"need {model.n_treatments} positive probabilities summing to 1")
    labels = rng.choice(model.n_treatments, size=n, p=p)
    X = _uniform_features(rng, n, model.d)
    return _dataset(model, X, labels, _responses(model, X, labels, rng))


def oracle_mean(model: SyntheticModel, x: np.ndarray, t: int) -> float:
    """E[Y | X=x, T=t] for treatment number t in 1..K."""
    if not 1 <= t <= model.n_treatments:
        raise ParameterError(f"treatment must lie in 1..{model.n_treatments}, got {t}")
    x = np.asarray(x, dtype=np.float64)
    return float(f_values(model, x[None, :])[0] + model.alpha * x[t - 1] / 2.0)


def oracle_policy(model: SyntheticModel) -> TreatmentRule:
    """Point-wise optimal rule: the treatment whose coordinate is largest."""
    def rule(X: np.ndarray) -> np.ndarray:
        return np.argmax(X[:, :model.n_treatments], axis=1)
    return rule


def constant_rule(label: int) -> TreatmentRule:
    def rule(X: np.ndarray) -> np.ndarray:
        return np.full(X.shape[0], label, dtype=np.int64)
    return rule


def _shard_values(model: SyntheticModel, rules: Sequence[TreatmentRule], size: int,
                  rng: np.random.Generator) -> np.ndarray:
    X = _uniform_features(rng, size, model.d)
    f = f_values(model, X)
    rows = np.arange(size)
    out = np.empty((len(rules), size))
    for r, rule in enumerate(rules):
        labels = np.asarray(rule(X), dtype=np.int64)
        out[r] = f + model.alpha * X[rows, labels] / 2.0
    return out


def monte_carlo_values(model: SyntheticModel, rules: Dict[str, TreatmentRule], n: int,
                       rng: np.random.Generator,
                       n_jobs: Optional[int] = None) -> Dict[str, Tuple[float, float]]:
    """
    Oracle values of several rules on the same ``n`` uniform draws.

    Draws are cut into fixed-size shards, each with its own child stream, so the
    result does not depend on ``n_jobs``.

    Returns:
        rule name -> (mean of E[Y | x, rule(x)], standard error)
    """
    if n < 1:
        raise ParameterError(f"need at least one Monte Carlo draw, got {n}")
    n_jobs = settings.n_jobs if n_jobs is None else n_jobs
    shard = settings.mc_shard_size
    sizes = [min(shard, n - start) for start in range(0, n, shard)]
    streams = rng.spawn(len(sizes))
    names = list(rules)
    parts = Parallel(n_jobs=n_jobs)(
        delayed(_shard_values)(model, [rules[k] for k in names], size, s) for size, s in zip(sizes, streams)
    )
    values = np.concatenate(parts, axis=1)
    out = {}
    for r, name in enumerate(names):
        std_error = float(np.std(values[r], ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        out[name] = (float(np.mean(values[r])), std_error)
    return out


def monte_carlo_value(model: SyntheticModel, policy: TreatmentRule, n: int,
                      rng: np.random.Generator, n_jobs: Optional[int] = None) -> Tuple[float, float]:
    """Oracle value E[Y | T = policy(X)] of one rule and its Monte Carlo standard error."""
    return monte_carlo_values(model, {"policy": policy}, n, rng, n_jobs)["policy"]


def to_document(model: SyntheticModel) -> SyntheticModelDocument:
    return SyntheticModelDocument(
        d=model.d, m=model.m, n_treatments=model.n_treatments,
        alpha=model.alpha, sigma=model.sigma,
        a=model.a.tolist(), b=model.b.tolist(), c=model.c.tolist(),
        seed=model.seed, label_map=model.label_map,
    )


def save_model_constants(model: SyntheticModel, path: Union[str, Path]) -> None:
    text = json.dumps(to_document(model).model_dump(mode="json"), indent=2)
    Path(path).write_text(text + "\n", encoding="utf-8")
    logger.info(f"Wrote synthetic model constants to {path}")


def load_model_constants(path: Union[str, Path]) -> SyntheticModel:
    if not Path(path).is_file():
        raise ConfigError(f"missing synthetic model document: {path}")
    try:
        doc = SyntheticModelDocument.model_validate(json.loads(Path(path).read_text(encoding="utf-8")))
    except (json.JSONDecodeError, UnicodeDecodeError, ValidationError) as e:
        raise ConfigError(f"invalid synthetic model document {path}: {e}")
    return SyntheticModel(
        a=np.asarray(doc.a), b=np.asarray(doc.b), c=np.asarray(doc.c),
        alpha=doc.alpha, sigma=doc.sigma, n_treatments=doc.n_treatments, seed=doc.seed,
    )
