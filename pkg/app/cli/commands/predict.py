"""uplift predict: per-row treatment choice and per-treatment estimates"""
from argparse import Namespace
import logging

import numpy as np
import pandas as pd

from app.cli.common import add_run_options, config_for_model, load_run_config, write_effective_config
from app.data.dataset import load_features
from app.models.persistence import load_model

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("predict", help="Predict the best treatment for every row")
    add_run_options(parser)
    parser.add_argument("--model", required=True, help="Trained model document")
    parser.add_argument("--data", required=True, help="CSV holding at least the feature columns")
    parser.add_argument("--out", required=True, help="Prediction CSV to write")
    parser.set_defaults(handler=run)


def run(args: Namespace) -> None:
    config = load_run_config(args)
    model = load_model(args.model)
    features = load_features(args.data, model.schema, model.categories)
    prediction = model.predict(features)

    out = pd.DataFrame({"row": np.arange(len(prediction)), "chosen": prediction.chosen})
    for t in range(model.n_treatments):
        out[f"estimate_{t}"] = prediction.per_treatment[:, t]
    out.to_csv(args.out, index=False, lineterminator="\n")
    logger.info(f"Wrote {len(prediction)} predictions to {args.out}")

    config = config_for_model(config, model)
    write_effective_config(config, args.out, model=args.model, predictions=args.out)
