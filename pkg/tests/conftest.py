import numpy as np
import pytest

from app.data.dataset import Dataset
from app.schemas.dataset import Schema


def build_dataset(X, t, y, categorical=(), n_treatments=None) -> Dataset:
    """Dataset over features x0..x{d-1}; columns listed in ``categorical`` hold integer codes."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    t = np.asarray(t, dtype=np.int64)
    names = [f"x{j}" for j in range(X.shape[1])]
    schema = Schema.from_names(
        [n for j, n in enumerate(names) if j not in categorical],
        [n for j, n in enumerate(names) if j in categorical],
        "t",
        "y",
    )
    # from_names puts numeric columns first; reorder X to the schema's feature order
    order = [names.index(n) for n in schema.feature_names]
    categories = {names[j]: [str(c) for c in range(int(X[:, j].max()) + 1)] for j in categorical}
    return Dataset(
        schema=schema,
        features=np.ascontiguousarray(X[:, order]),
        treatment=t,
        response=np.asarray(y, dtype=np.float64),
        n_treatments=int(t.max()) + 1 if n_treatments is None else n_treatments,
        categories=categories,
    )


@pytest.fixture
def make_dataset():
    return build_dataset


@pytest.fixture
def hand_rows() -> Dataset:
    """(y, t) = (2,0), (4,1), (6,0), (8,1) with one feature 0..3."""
    return build_dataset([0.0, 1.0, 2.0, 3.0], [0, 1, 0, 1], [2.0, 4.0, 6.0, 8.0])


@pytest.fixture
def random_dataset():
    def make(n=400, d=3, k=2, seed=0, categorical=()):
        rng = np.random.default_rng(seed)
        X = rng.uniform(0, 10, size=(n, d))
        for j in categorical:
            X[:, j] = rng.integers(0, 4, size=n)
        t = np.arange(n) % k
        y = X[:, 0] * (t == 1) + rng.normal(0, 1, size=n)
        return build_dataset(X, t, y, categorical=categorical, n_treatments=k)
    return make


@pytest.fixture
def write_text(tmp_path):
    def write(name: str, text: str):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path
    return write
