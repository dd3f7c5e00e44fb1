"""uplift tune: choose min_split (cts) or min_samples_leaf (sma-rf) by held-out z-bar"""
from argparse import Namespace
import logging

from app.cli.common import (
    add_algorithm_options,
    add_run_options,
    add_schema_options,
    int_list,
    load_run_config,
    resolve_schema,
    stream,
    write_effective_config,
)
from app.data.dataset import load_csv
from app.evaluation.tuning import tune, tuned_parameter, with_value

logger = logging.getLogger(__name__)

FOLD_STREAM = 3


def register(subparsers) -> None:
    parser = subparsers.add_parser("tune", help="Grid search of the leaf-size parameter")
    add_run_options(parser)
    add_schema_options(parser)
    add_algorithm_options(parser)
    parser.add_argument("--data", required=True, help="Training CSV")
    parser.add_argument("--grid", type=int_list, help="Candidate values (default depends on the algorithm)")
    mode = parser.add_mutually_exclusive_group()
    mode.add_argument("--folds", type=int, help="k-fold cross-validation (default 5)")
    mode.add_argument("--validation-fraction", dest="validation_fraction", type=float,
                      help="Single stratified train/validate split instead of k-fold")
    parser.add_argument("--out", required=True, help="Score table CSV (value, fold, score)")
    parser.set_defaults(handler=run)


def run(args: Namespace) -> None:
    config = resolve_schema(load_run_config(args), args, args.data)
    data = load_csv(args.data, config.data_schema)
    result = tune(
        data,
        config.params,
        stream(config, FOLD_STREAM),
        grid=config.tune.grid,
        folds=config.tune.folds,
        validation_fraction=config.tune.validation_fraction,
        n_jobs=config.n_jobs,
    )
    result.scores.to_csv(args.out, index=False, lineterminator="\n")

    best = with_value(config.params, result.best)
    config = config.model_copy(update={"cts" if config.algorithm == "cts" else "sma": best})
    write_effective_config(config, args.out, scores=args.out)
    print(f"{tuned_parameter(best)}={result.best}")
