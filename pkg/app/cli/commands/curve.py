"""uplift curve: modified uplift curve of a trained model"""
from argparse import Namespace
import logging

from app.cli.common import (
    add_evaluation_options,
    add_run_options,
    check_treatments,
    config_for_model,
    float_list,
    load_run_config,
    treatment_probs,
    write_effective_config,
)
from app.data.dataset import load_csv
from app.evaluation.curve import modified_uplift_curve, write_curve_csv
from app.models.persistence import load_model

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("curve", help="Expected response against the fraction treated")
    add_run_options(parser)
    add_evaluation_options(parser)
    parser.add_argument("--model", required=True, help="Trained model document")
    parser.add_argument("--data", required=True, help="Evaluation CSV (randomized experiment)")
    parser.add_argument("--grid", dest="fractions", type=float_list, help="Fractions from 0 to 1 (default steps of 0.05)")
    parser.add_argument("--out", required=True, help="Curve CSV to write")
    parser.set_defaults(handler=run)


def run(args: Namespace) -> None:
    config = load_run_config(args)
    model = load_model(args.model)
    config = config_for_model(config, model)
    data = load_csv(args.data, model.schema, model.categories)
    check_treatments(model, data)

    curve = modified_uplift_curve(data, model, treatment_probs(config), config.control,
                                  args.fractions, config.conf_level)
    write_curve_csv(curve, args.out)
    write_effective_config(config, args.out, curve=args.out)
