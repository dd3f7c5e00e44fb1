"""uplift evaluate: z-bar estimate of a policy's expected response on held-out data"""
from argparse import Namespace
from pathlib import Path
import logging

from app.cli.common import (
    add_evaluation_options,
    add_run_options,
    add_schema_options,
    check_treatments,
    config_for_model,
    load_run_config,
    resolve_schema,
    treatment_probs,
    write_effective_config,
)
from app.data.dataset import load_csv
from app.evaluation.estimator import expected_response
from app.evaluation.policy import constant_policy
from app.models.persistence import load_model

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("evaluate", help="Estimate the expected response of a policy")
    add_run_options(parser)
    add_schema_options(parser)
    add_evaluation_options(parser)
    policy = parser.add_mutually_exclusive_group(required=True)
    policy.add_argument("--model", help="Trained model document whose policy is evaluated")
    policy.add_argument("--constant", type=int, help="Evaluate the policy assigning everyone this label")
    parser.add_argument("--data", required=True, help="Evaluation CSV (randomized experiment)")
    parser.add_argument("--out", help="Also write the report JSON here")
    parser.set_defaults(handler=run)


def run(args: Namespace) -> None:
    config = load_run_config(args)
    if args.model is not None:
        model = load_model(args.model)
        config = config_for_model(config, model)
        data = load_csv(args.data, model.schema, model.categories)
        check_treatments(model, data)
        policy = model
    else:
        config = resolve_schema(config, args, args.data)
        data = load_csv(args.data, config.data_schema)
        policy = constant_policy(args.constant, data.n_treatments)

    report = expected_response(data, policy, treatment_probs(config), config.conf_level)
    text = report.model_dump_json(indent=2)
    print(text)
    logger.info(f"z-bar {report.estimate:.6g} [{report.ci_low:.6g}, {report.ci_high:.6g}] over {report.n} rows")
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        write_effective_config(config, args.out, report=args.out)
