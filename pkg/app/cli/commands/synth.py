"""uplift synth: sample a synthetic benchmark instance and a training set"""
from argparse import Namespace
import logging

from app.cli.common import add_run_options, float_list, load_run_config, stream, write_effective_config
from app.data.dataset import write_csv
from app.data.synthetic import (
    generate,
    generate_randomized,
    load_model_constants,
    sample_model,
    save_model_constants,
)
from app.exceptions import ConfigError

logger = logging.getLogger(__name__)

DATA_STREAM = 2


def register(subparsers) -> None:
    parser = subparsers.add_parser("synth", help="Generate a synthetic dataset and its pinned model constants")
    add_run_options(parser)
    parser.add_argument("--n-per-treatment", dest="n_per_treatment", type=int,
                        help="Rows per treatment (equal-sized arms)")
    parser.add_argument("--n-rows", dest="n_rows", type=int,
                        help="Total rows with treatments drawn from --probs")
    parser.add_argument("--probs", type=float_list, help="Treatment probabilities for --n-rows")
    parser.add_argument("--from-constants", dest="from_constants", type=str,
                        help="Reuse a pinned constants document instead of sampling one")
    parser.add_argument("--out", required=True, help="Dataset CSV to write")
    parser.add_argument("--constants", required=True, help="Model constants JSON to write")
    parser.set_defaults(handler=run)


def run(args: Namespace) -> None:
    if (args.n_per_treatment is None) == (args.n_rows is None):
        raise ConfigError("give exactly one of --n-per-treatment and --n-rows")
    config = load_run_config(args)
    model = load_model_constants(args.from_constants) if args.from_constants else sample_model(config.seed)

    rng = stream(config, DATA_STREAM)
    if args.n_per_treatment is not None:
        data = generate(model, args.n_per_treatment, rng)
    else:
        if config.probs is None:
            raise ConfigError("--n-rows needs --probs")
        data = generate_randomized(model, args.n_rows, config.probs, rng)

    write_csv(data, args.out)
    save_model_constants(model, args.constants)
    config = config.model_copy(update={"data_schema": data.schema})
    write_effective_config(config, args.out, data=args.out, constants=args.constants)
    logger.info(f"Synthesized {data.n} rows ({model.n_treatments} treatments, d={model.d})")
