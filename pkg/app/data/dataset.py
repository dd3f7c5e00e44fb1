"""Tabular experiment logs: loading, writing, treatment probabilities and stratified resampling"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union
import logging

import numpy as np
import pandas as pd

from app.exceptions import DatasetError
from app.schemas.dataset import CategoryMap, Schema, TreatmentProbs

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


@dataclass(frozen=True)
class Dataset:
    """
    Immutable experiment log s_N = {(x, t, y)}.

    Features are held as one dense float matrix in schema feature order;
    categorical columns carry integer codes (exact in float64) whose names
    live in ``categories``.
    """
    schema: Schema
    features: np.ndarray
    treatment: np.ndarray
    response: np.ndarray
    n_treatments: int
    categories: CategoryMap = field(default_factory=dict)
    treatment_names: Optional[List[str]] = None

    def __post_init__(self):
        n = self.treatment.shape[0]
        d = len(self.schema.feature_columns)
        if self.features.shape != (n, d):
            raise DatasetError(f"feature matrix has shape {self.features.shape}, expected {(n, d)}")
        if self.response.shape != (n,):
            raise DatasetError("response length differs from treatment length")
        if self.n_treatments < 2:
            raise DatasetError("need at least two treatments (labels 0..K with K >= 1)")
        if n and (self.treatment.min() < 0 or self.treatment.max() >= self.n_treatments):
            raise DatasetError(f"treatment labels must lie in 0..{self.n_treatments - 1}")
        if not np.all(np.isfinite(self.response)):
            raise DatasetError("response values must be finite")
        for arr in (self.features, self.treatment, self.response):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return int(self.treatment.shape[0])

    @property
    def d(self) -> int:
        return int(self.features.shape[1])

    @property
    def categorical_mask(self) -> np.ndarray:
        return np.asarray(self.schema.categorical_mask, dtype=bool)

    def treatment_counts(self) -> np.ndarray:
        return np.bincount(self.treatment, minlength=self.n_treatments)

    def column(self, name: str) -> np.ndarray:
        """Values of one feature column (codes for categorical features)."""
        try:
            j = self.schema.feature_names.index(name)
        except ValueError:
            raise DatasetError(f"unknown feature column: {name}")
        return self.features[:, j]

    def subset(self, rows: np.ndarray) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(
            schema=self.schema,
            features=self.features[rows],
            treatment=self.treatment[rows],
            response=self.response[rows],
            n_treatments=self.n_treatments,
            categories=self.categories,
            treatment_names=self.treatment_names,
        )


def _read_table(path: PathLike) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"missing file: {path}")
    try:
        return pd.read_csv(path, dtype=str, keep_default_na=False, na_filter=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise DatasetError(f"empty file: {path}")
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise DatasetError(f"cannot parse {path}: {e}")


def _parse_reals(series: pd.Series, name: str) -> np.ndarray:
    values = series.str.strip()
    missing = values == ""
    if missing.any():
        raise DatasetError(f"missing value in column '{name}' at row {int(np.argmax(missing.to_numpy()))}")
    try:
        # numpy's str -> float conversion is exact, so written reals reload bit for bit
        out = values.to_numpy().astype(np.float64)
    except ValueError:
        bad = pd.to_numeric(values, errors="coerce").isna().to_numpy()
        row = int(np.argmax(bad))
        raise DatasetError(f"unparseable numeric cell in column '{name}' at row {row}: {values.iloc[row]!r}")
    if not np.all(np.isfinite(out)):
        row = int(np.argmax(~np.isfinite(out)))
        raise DatasetError(f"non-finite value in column '{name}' at row {row}")
    return out


def _parse_labels(series: pd.Series, name: str) -> np.ndarray:
    """Treatment labels; a dense range 0..K never reaches the row count."""
    reals = _parse_reals(series, name)
    if np.any(reals < 0) or np.any(reals != np.floor(reals)):
        row = int(np.argmax((reals < 0) | (reals != np.floor(reals))))
        raise DatasetError(
            f"treatment label not a non-negative integer in column '{name}' at row {row}: {series.iloc[row]!r}"
        )
    too_large = reals >= reals.shape[0]
    if np.any(too_large):
        row = int(np.argmax(too_large))
        raise DatasetError(
            f"non-dense treatment labels: label {series.iloc[row]!r} in column '{name}' at row {row} "
            f"is not below the row count {reals.shape[0]}"
        )
    return reals.astype(np.int64)


def _encode_categories(series: pd.Series, name: str,
                       known: Optional[List[str]]) -> Tuple[np.ndarray, List[str]]:
    """First-appearance coding; names already in ``known`` keep their codes."""
    missing = series == ""
    if missing.any():
        raise DatasetError(f"missing value in column '{name}' at row {int(np.argmax(missing.to_numpy()))}")
    _, uniques = pd.factorize(series)
    names = list(known or [])
    seen = set(names)
    for u in uniques:
        if u not in seen:
            names.append(u)
            seen.add(u)
    if known is not None and len(names) > len(known):
        logger.warning(f"Column '{name}' has {len(names) - len(known)} categories unseen in training")
    codes = pd.Categorical(series, categories=names).codes.astype(np.float64)
    return codes, names


def _encode_features(df: pd.DataFrame, schema: Schema,
                     categories: Optional[CategoryMap]) -> Tuple[np.ndarray, CategoryMap]:
    columns = []
    encoded: CategoryMap = {}
    for spec in schema.feature_columns:
        if spec.role == "numeric_feature":
            columns.append(_parse_reals(df[spec.name], spec.name))
        else:
            known = categories.get(spec.name) if categories is not None else None
            codes, names = _encode_categories(df[spec.name], spec.name, known)
            columns.append(codes)
            encoded[spec.name] = names
    features = np.column_stack(columns) if len(df) else np.empty((0, len(columns)))
    return np.ascontiguousarray(features, dtype=np.float64), encoded


def load_csv(path: PathLike, schema: Schema, categories: Optional[CategoryMap] = None) -> Dataset:
    """
    Load an experiment log.

    Args:
        path: UTF-8 CSV with a header row naming exactly the schema's columns
        schema: Column declaration
        categories: Known category dictionaries (from a trained model); when
            given, known names keep their codes and unseen ones are appended

    Returns:
        Dataset with dense treatment labels 0..K
    """
    logger.info(f"Loading dataset from {path}")
    df = _read_table(path)
    if sorted(df.columns) != sorted(schema.names):
        raise DatasetError(f"header mismatch: file has {list(df.columns)}, schema expects {schema.names}")
    if len(df) == 0:
        raise DatasetError(f"no rows in {path}")

    features, encoded = _encode_features(df, schema, categories)
    treatment = _parse_labels(df[schema.treatment_column], schema.treatment_column)
    response = _parse_reals(df[schema.response_column], schema.response_column)

    present = np.unique(treatment)
    n_treatments = int(present.max()) + 1
    if len(present) != n_treatments:
        absent = np.setdiff1d(np.arange(n_treatments), present)[:10].tolist()
        raise DatasetError(f"non-dense treatment labels: {present.shape[0]} distinct labels up to "
                           f"{int(present.max())} (missing {absent})")

    data = Dataset(
        schema=schema,
        features=features,
        treatment=treatment,
        response=response,
        n_treatments=n_treatments,
        categories=encoded,
    )
    logger.info(f"Loaded {data.n} rows, {data.d} features, {n_treatments} treatments")
    return data


def load_features(path: PathLike, schema: Schema, categories: Optional[CategoryMap] = None) -> np.ndarray:
    """Read only the feature columns of a CSV (treatment/response may be absent)."""
    df = _read_table(path)
    missing = [n for n in schema.feature_names if n not in df.columns]
    if missing:
        raise DatasetError(f"header mismatch: feature columns {missing} not found in {path}")
    features, _ = _encode_features(df, schema, categories)
    return features


def write_csv(data: Dataset, path: PathLike) -> None:
    """Write a dataset in schema column order, categorical codes decoded to names."""
    out = {}
    feature_index = {name: j for j, name in enumerate(data.schema.feature_names)}
    for spec in data.schema.columns:
        if spec.role == "treatment":
            out[spec.name] = data.treatment
        elif spec.role == "response":
            out[spec.name] = data.response
        elif spec.role == "numeric_feature":
            out[spec.name] = data.features[:, feature_index[spec.name]]
        else:
            names = np.asarray(data.categories[spec.name], dtype=object)
            out[spec.name] = names[data.features[:, feature_index[spec.name]].astype(np.int64)]
    pd.DataFrame(out).to_csv(path, index=False, lineterminator="\n")
    logger.info(f"Wrote {data.n} rows to {path}")


def empirical_treatment_probs(data: Dataset) -> TreatmentProbs:
    counts = data.treatment_counts()
    for t, c in enumerate(counts):
        if c == 0:
            raise DatasetError(f"treatment {t} absent")
    return TreatmentProbs(probs=(counts / data.n).tolist())


def largest_remainder(total: int, weights: Sequence[float]) -> np.ndarray:
    """
    Split ``total`` into integer parts proportional to ``weights``.

    Floors of the exact quotas first; the residual goes one unit at a time to
    the largest fractional parts, ties to the lower index.
    """
    w = np.asarray(weights)
    if np.issubdtype(w.dtype, np.integer):
        scaled = total * w.astype(np.int64)
        denom = int(w.sum())
        base = scaled // denom
        remainder = (scaled % denom).astype(np.float64)
    else:
        quotas = total * w.astype(np.float64) / w.sum()
        base = np.floor(quotas).astype(np.int64)
        remainder = quotas - base
    residual = total - int(base.sum())
    order = np.argsort(-remainder, kind="stable")
    base = base.astype(np.int64)
    base[order[:residual]] += 1
    return base


def stratified_bootstrap_indices(data: Dataset, b: int, rng: np.random.Generator) -> np.ndarray:
    if b < 1 or b > data.n:
        raise DatasetError(f"bootstrap size must satisfy 1 <= b <= n={data.n}, got {b}")
    counts = data.treatment_counts()
    allocation = largest_remainder(b, counts)
    rows = []
    for t in range(data.n_treatments):
        if allocation[t] == 0:
            continue
        members = np.flatnonzero(data.treatment == t)
        rows.append(members[rng.integers(0, members.shape[0], size=allocation[t])])
    return np.concatenate(rows)


def stratified_bootstrap(data: Dataset, b: int, rng: np.random.Generator) -> Dataset:
    """Draw ``b`` rows with replacement, proportionally from each treatment."""
    return data.subset(stratified_bootstrap_indices(data, b, rng))


def _check_fractions(fractions: Sequence[float]) -> np.ndarray:
    f = np.asarray(fractions, dtype=np.float64)
    if f.size == 0:
        raise DatasetError("fractions must not be empty")
    if np.any(f <= 0):
        raise DatasetError(f"fractions must be positive, got {f.tolist()}")
    if abs(float(f.sum()) - 1.0) > 1e-9:
        raise DatasetError(f"fractions must sum to 1, got {float(f.sum())}")
    return f


def stratified_split_indices(data: Dataset, fractions: Sequence[float],
                             rng: np.random.Generator) -> List[np.ndarray]:
    f = _check_fractions(fractions)
    parts: List[List[np.ndarray]] = [[] for _ in f]
    for t in range(data.n_treatments):
        members = rng.permutation(np.flatnonzero(data.treatment == t))
        sizes = largest_remainder(members.shape[0], f)
        for k, chunk in enumerate(np.split(members, np.cumsum(sizes)[:-1])):
            parts[k].append(chunk)
    return [np.sort(np.concatenate(p)) for p in parts]


def stratified_split(data: Dataset, fractions: Sequence[float],
                     rng: np.random.Generator) -> List[Dataset]:
    """Disjoint, exhaustive partition with per-treatment proportional part sizes."""
    return [data.subset(rows) for rows in stratified_split_indices(data, fractions, rng)]


def kfold_partition(data: Dataset, folds: int,
                    rng: np.random.Generator) -> List[Tuple[Dataset, Dataset]]:
    """
    Treatment-stratified k-fold partition.

    Returns:
        (train, held_out) pairs, one per fold
    """
    if folds < 2:
        raise DatasetError(f"need at least 2 folds, got {folds}")
    parts = stratified_split_indices(data, [1.0 / folds] * folds, rng)
    pairs = []
    for k, held_out in enumerate(parts):
        held = data.subset(held_out)
        if np.any(held.treatment_counts() == 0):
            raise DatasetError(f"fold {k} too small to contain all treatments")
        train = data.subset(np.concatenate([p for j, p in enumerate(parts) if j != k]))
        pairs.append((train, held))
    return pairs


def read_header(path: PathLike) -> List[str]:
    """Column names of a CSV without reading its rows."""
    if not Path(path).is_file():
        raise DatasetError(f"missing file: {path}")
    try:
        return list(pd.read_csv(path, nrows=0, dtype=str, encoding="utf-8").columns)
    except pd.errors.EmptyDataError:
        raise DatasetError(f"empty file: {path}")
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise DatasetError(f"cannot parse {path}: {e}")
