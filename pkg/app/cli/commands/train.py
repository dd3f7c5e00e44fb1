"""uplift train: fit a CTS forest or the SMA-RF baseline on an experiment log"""
from argparse import Namespace
import logging

from app.cli.common import (
    add_algorithm_options,
    add_run_options,
    add_schema_options,
    load_run_config,
    resolve_schema,
    write_effective_config,
)
from app.data.dataset import load_csv
from app.evaluation.tuning import fit
from app.models.persistence import save_model

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("train", help="Train a model and write its JSON document")
    add_run_options(parser)
    add_schema_options(parser)
    add_algorithm_options(parser)
    parser.add_argument("--data", required=True, help="Training CSV")
    parser.add_argument("--model", required=True, help="Model document to write")
    parser.set_defaults(handler=run)


def run(args: Namespace) -> None:
    config = resolve_schema(load_run_config(args), args, args.data)
    data = load_csv(args.data, config.data_schema)
    model = fit(data, config.params, config.n_jobs)
    save_model(model, args.model)
    write_effective_config(config, args.model, model=args.model)
