import numpy as np
import pytest

from app.evaluation.tuning import default_grid, tune, usable_grid, with_value
from app.exceptions import ParameterError
from app.schemas.model import ForestParams, SmaParams, TreeParams


def test_default_grids():
    assert default_grid(ForestParams()) == [25, 50, 100, 200, 400, 800, 1600, 3200, 6400]
    assert default_grid(SmaParams()) == [1, 5, 10, 20]


def test_with_value_sets_the_tuned_parameter():
    assert with_value(ForestParams(), 400).tree.min_split == 400
    assert with_value(SmaParams(), 10).min_samples_leaf == 10


def test_usable_grid_drops_values_above_training_size():
    assert usable_grid([400, 25, 100, 25], 150) == [25, 100]
    assert usable_grid([400, 800], 150) == [400]
    with pytest.raises(ParameterError):
        usable_grid([], 10)


def test_single_value_grid(random_dataset):
    data = random_dataset(n=200, seed=1)
    result = tune(data, ForestParams(ntree=3), np.random.default_rng(0), grid=[30], folds=3)
    assert result.best == 30
    assert len(result.scores) == 3


def test_score_table_and_selection(random_dataset):
    data = random_dataset(n=300, seed=2)
    result = tune(data, ForestParams(ntree=3, seed=4), np.random.default_rng(1), grid=[5, 50, 20], folds=4)
    assert len(result.scores) == 3 * 4
    assert sorted(result.scores["value"].unique().tolist()) == [5, 20, 50]
    means = result.mean_scores()
    assert means[result.best] == means.max()


def test_ties_prefer_the_smaller_value(random_dataset):
    data = random_dataset(n=200, seed=3)
    # both values exceed every per-treatment count, so both give single-leaf trees
    result = tune(data, ForestParams(ntree=2, tree=TreeParams(min_split=1)), np.random.default_rng(0),
                  grid=[160, 150], folds=5)
    assert result.best == 150


def test_validation_split_mode(random_dataset):
    data = random_dataset(n=200, seed=4)
    result = tune(data, SmaParams(ntree=2), np.random.default_rng(0), grid=[1, 5], validation_fraction=0.3)
    assert result.scores["fold"].tolist() == [0, 0]
    assert result.best in (1, 5)
