"""Options, run configuration and helpers shared by the subcommands"""
from argparse import ArgumentParser, Namespace, ArgumentTypeError
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union
import json
import logging

import numpy as np
from pydantic import ValidationError

from app.data.dataset import Dataset, read_header
from app.exceptions import ConfigError, EvaluationError, SchemaError
from app.models.persistence import TrainedModel
from app.schemas.dataset import ColumnSpec, Schema, TreatmentProbs
from app.schemas.model import ForestParams
from app.schemas.run_config import RunConfig

logger = logging.getLogger(__name__)

# argparse destination -> path inside the run configuration document
OVERRIDES: List[Tuple[str, Tuple[Tuple[str, ...], ...]]] = [
    ("seed", (("seed",),)),
    ("n_jobs", (("n_jobs",),)),
    ("conf_level", (("conf_level",),)),
    ("control", (("control",),)),
    ("probs", (("probs",),)),
    ("algorithm", (("algorithm",),)),
    ("ntree", (("cts", "ntree"), ("sma", "ntree"))),
    ("mtry", (("cts", "tree", "mtry"), ("sma", "mtry"))),
    ("bootstrap_size", (("cts", "b"),)),
    ("min_split", (("cts", "tree", "min_split"),)),
    ("n_reg", (("cts", "tree", "n_reg"),)),
    ("max_depth", (("cts", "tree", "max_depth"),)),
    ("min_samples_leaf", (("sma", "min_samples_leaf"),)),
    ("grid", (("tune", "grid"),)),
    ("folds", (("tune", "folds"),)),
    ("validation_fraction", (("tune", "validation_fraction"),)),
    ("sizes", (("benchmark", "sizes"),)),
    ("replications", (("benchmark", "replications"),)),
    ("algorithms", (("benchmark", "algorithms"),)),
    ("mc_draws", (("benchmark", "mc_draws"),)),
    ("tune_each_size", (("benchmark", "tune"),)),
]


def int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def name_list(text: str) -> List[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def add_run_options(parser: ArgumentParser) -> None:
    group = parser.add_argument_group("run configuration")
    group.add_argument("--config", type=str, help="Run configuration JSON; flags below override it")
    group.add_argument("--seed", type=int, help="Master random seed")
    group.add_argument("--n-jobs", dest="n_jobs", type=int, help="joblib workers (default UPLIFT_N_JOBS)")


def add_schema_options(parser: ArgumentParser) -> None:
    group = parser.add_argument_group("schema (ignored when the config declares one)")
    group.add_argument("--numeric", type=name_list, help="Numeric feature columns (default: all remaining)")
    group.add_argument("--categorical", type=name_list, help="Categorical feature columns")
    group.add_argument("--treatment-col", dest="treatment_col", default="treatment")
    group.add_argument("--response-col", dest="response_col", default="response")


def add_algorithm_options(parser: ArgumentParser) -> None:
    group = parser.add_argument_group("algorithm")
    group.add_argument("--algorithm", choices=["cts", "sma-rf"])
    group.add_argument("--ntree", type=int)
    group.add_argument("--mtry", type=int)
    group.add_argument("--bootstrap-size", dest="bootstrap_size", type=int, help="CTS rows per tree (default N)")
    group.add_argument("--min-split", dest="min_split", type=int)
    group.add_argument("--n-reg", dest="n_reg", type=int)
    group.add_argument("--max-depth", dest="max_depth", type=int)
    group.add_argument("--min-samples-leaf", dest="min_samples_leaf", type=int)


def add_evaluation_options(parser: ArgumentParser) -> None:
    group = parser.add_argument_group("evaluation")
    group.add_argument("--probs", type=float_list, help="Design probabilities by label (default: empirical)")
    group.add_argument("--conf-level", dest="conf_level", type=float)
    group.add_argument("--control", type=int, help="Control label")


def _set_path(doc: Dict[str, Any], path: Sequence[str], value: Any) -> None:
    for key in path[:-1]:
        node = doc.get(key)
        if not isinstance(node, dict):
            node = doc[key] = {}
        doc = node
    doc[path[-1]] = value


def _first_error(e: ValidationError) -> str:
    err = e.errors()[0]
    where = ".".join(str(p) for p in err["loc"]) or "config"
    return f"{where}: {err['msg']}"


def load_run_config(args: Namespace) -> RunConfig:
    """The --config document (or defaults) with command-line overrides applied."""
    raw: Dict[str, Any] = {}
    path = getattr(args, "config", None)
    if path:
        if not Path(path).is_file():
            raise ConfigError(f"missing config file: {path}")
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (json.JSONDecodeError, UnicodeDecodeError) as e:
            raise ConfigError(f"malformed config {path}: {e}")
        if not isinstance(raw, dict):
            raise ConfigError(f"malformed config {path}: top level is not an object")
        logger.info(f"Loaded run configuration from {path}")
    for option, targets in OVERRIDES:
        value = getattr(args, option, None)
        if value is None:
            continue
        for target in targets:
            _set_path(raw, target, value)
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"invalid run configuration: {_first_error(e)}")


def resolve_schema(config: RunConfig, args: Namespace, csv_path: Union[str, Path]) -> RunConfig:
    """Fill in the schema from the column flags and the CSV header unless the config has one."""
    if config.data_schema is not None:
        return config
    header = read_header(csv_path)
    treatment, response = args.treatment_col, args.response_col
    categorical = set(args.categorical or [])
    numeric = set(args.numeric) if args.numeric is not None else None
    columns = []
    for name in header:
        if name == treatment:
            columns.append(ColumnSpec(name=name, role="treatment"))
        elif name == response:
            columns.append(ColumnSpec(name=name, role="response"))
        elif name in categorical:
            columns.append(ColumnSpec(name=name, role="categorical_feature"))
        elif numeric is None or name in numeric:
            columns.append(ColumnSpec(name=name, role="numeric_feature"))
    unknown = (categorical | (numeric or set())) - set(header)
    if unknown:
        raise SchemaError(f"columns {sorted(unknown)} not found in {csv_path}")
    try:
        schema = Schema(columns=columns)
    except ValidationError as e:
        raise SchemaError(f"cannot build schema from {csv_path}: {_first_error(e)}")
    return config.model_copy(update={"data_schema": schema})


def treatment_probs(config: RunConfig) -> Optional[TreatmentProbs]:
    if config.probs is None:
        return None
    try:
        return TreatmentProbs(probs=config.probs)
    except ValidationError as e:
        raise ConfigError(f"invalid treatment probabilities: {_first_error(e)}")


def check_treatments(model: TrainedModel, data: Dataset) -> None:
    if model.n_treatments != data.n_treatments:
        raise EvaluationError(
            f"model was trained on {model.n_treatments} treatments, data has {data.n_treatments}"
        )


def config_path(output: Union[str, Path]) -> Path:
    output = Path(output)
    return output.with_name(output.name + ".config.json")


def write_effective_config(config: RunConfig, output: Union[str, Path], **outputs: str) -> RunConfig:
    """Record the configuration that produced ``output`` next to it."""
    config = config.model_copy(update={"outputs": {k: str(v) for k, v in outputs.items()}})
    path = config_path(output)
    path.write_text(json.dumps(config.model_dump(mode="json", by_alias=True), indent=2) + "\n",
                    encoding="utf-8")
    logger.info(f"Wrote effective configuration to {path}")
    return config


def stream(config: RunConfig, *tags: int) -> np.random.Generator:
    """Independent random stream for one purpose of a run."""
    return np.random.default_rng([config.seed, *tags])


def config_for_model(config: RunConfig, model: TrainedModel) -> RunConfig:
    """Config carrying the schema, algorithm and parameters stored in a trained model."""
    if isinstance(model.params, ForestParams):
        update = {"algorithm": "cts", "cts": model.params}
    else:
        update = {"algorithm": "sma-rf", "sma": model.params}
    return config.model_copy(update={"data_schema": model.schema, "seed": model.params.seed, **update})
