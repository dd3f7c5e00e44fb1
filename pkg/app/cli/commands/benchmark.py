"""uplift benchmark: learning curves on the synthetic model, scored by the Monte Carlo oracle"""
from argparse import Namespace
from typing import Dict, List, Optional
import logging
import math

import numpy as np
import pandas as pd
from scipy.stats import t as student_t

from app.cli.common import (
    add_algorithm_options,
    add_run_options,
    int_list,
    load_run_config,
    name_list,
    stream,
    write_effective_config,
)
from app.data.synthetic import (
    SyntheticModel,
    TreatmentRule,
    constant_rule,
    generate,
    load_model_constants,
    monte_carlo_values,
    oracle_policy,
    sample_model,
)
from app.evaluation.tuning import Params, fit, tune, with_value
from app.exceptions import ConfigError
from app.schemas.run_config import RunConfig

logger = logging.getLogger(__name__)

RESULT_COLUMNS = ["size", "replication", "policy", "value", "std_error"]
SUMMARY_COLUMNS = ["size", "policy", "replications", "mean", "margin"]

MC_STREAM = 4
DATA_STREAM = 5
TUNE_STREAM = 6


def register(subparsers) -> None:
    parser = subparsers.add_parser("benchmark", help="Oracle-scored learning curves on synthetic data")
    add_run_options(parser)
    add_algorithm_options(parser)
    parser.add_argument("--constants", help="Pinned synthetic model constants (default: sampled from --seed)")
    parser.add_argument("--sizes", type=int_list, help="Training rows per treatment")
    parser.add_argument("--replications", type=int)
    parser.add_argument("--algorithms", type=name_list, help="Comma-separated subset of cts,sma-rf")
    parser.add_argument("--mc-draws", dest="mc_draws", type=int, help="Monte Carlo draws per evaluation")
    parser.add_argument("--tune-each-size", dest="tune_each_size", action="store_const", const=True,
                        help="Tune the leaf-size parameter on the first replication of each size")
    parser.add_argument("--out", required=True, help="Results CSV to write")
    parser.add_argument("--summary", help="Summary CSV (default: <out>.summary.csv)")
    parser.set_defaults(handler=run)


def _params(config: RunConfig, algorithm: str) -> Params:
    return config.cts if algorithm == "cts" else config.sma


def _seeded(params: Params, *tags: int) -> Params:
    seed = int(np.random.SeedSequence(list(tags)).generate_state(1, dtype=np.uint64)[0])
    return params.model_copy(update={"seed": seed})


def _model_rule(model) -> TreatmentRule:
    def rule(X: np.ndarray) -> np.ndarray:
        return model.predict(X).chosen
    return rule


def reference_rules(model: SyntheticModel) -> Dict[str, TreatmentRule]:
    rules = {f"constant_{model.label_map[k]}": constant_rule(k) for k in range(model.n_treatments)}
    rules["oracle"] = oracle_policy(model)
    return rules


def summarize(results: pd.DataFrame) -> pd.DataFrame:
    """Mean over replications and the 95% margin of error (t quantile times sd / sqrt(R))."""
    rows = []
    learned = results[results["size"].notna()]
    for (size, policy), group in learned.groupby(["size", "policy"], sort=True):
        r = len(group)
        margin = 0.0
        if r > 1:
            margin = float(student_t.ppf(0.975, r - 1) * group["value"].std(ddof=1) / math.sqrt(r))
        rows.append((int(size), policy, r, float(group["value"].mean()), margin))
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def benchmark(model: SyntheticModel, config: RunConfig) -> pd.DataFrame:
    """
    Train every algorithm on fresh synthetic data for each (size, replication)
    and score the learned policies with the oracle. All evaluations share the
    same Monte Carlo draws.
    """
    settings = config.benchmark
    mc_seed = [config.seed, MC_STREAM]
    rows: List[tuple] = []

    references = monte_carlo_values(model, reference_rules(model), settings.mc_draws,
                                    np.random.default_rng(mc_seed), config.n_jobs)
    for name, (value, std_error) in references.items():
        rows.append((None, None, name, value, std_error))
        logger.info(f"Reference {name}: {value:.4f} (se {std_error:.2g})")

    for size in settings.sizes:
        tuned: Dict[str, Optional[int]] = {a: None for a in settings.algorithms}
        for rep in range(settings.replications):
            data = generate(model, size, stream(config, DATA_STREAM, size, rep))
            rules: Dict[str, TreatmentRule] = {}
            for algorithm in settings.algorithms:
                params = _seeded(_params(config, algorithm), config.seed, size, rep)
                if settings.tune and tuned[algorithm] is None:
                    tuned[algorithm] = tune(data, params, stream(config, TUNE_STREAM, size),
                                            grid=config.tune.grid, folds=config.tune.folds,
                                            validation_fraction=config.tune.validation_fraction,
                                            n_jobs=config.n_jobs).best
                if tuned[algorithm] is not None:
                    params = with_value(params, tuned[algorithm])
                rules[algorithm] = _model_rule(fit(data, params, config.n_jobs))
            values = monte_carlo_values(model, rules, settings.mc_draws,
                                        np.random.default_rng(mc_seed), config.n_jobs)
            for name, (value, std_error) in values.items():
                rows.append((size, rep, name, value, std_error))
                logger.info(f"size={size} rep={rep} {name}: {value:.4f}")

    results = pd.DataFrame(rows, columns=RESULT_COLUMNS)
    results["size"] = results["size"].astype("Int64")
    results["replication"] = results["replication"].astype("Int64")
    return results


def run(args: Namespace) -> None:
    config = load_run_config(args)
    model = load_model_constants(args.constants) if args.constants else sample_model(config.seed)
    if any(s < 1 for s in config.benchmark.sizes):
        raise ConfigError("benchmark sizes must be positive")

    results = benchmark(model, config)
    results.to_csv(args.out, index=False, lineterminator="\n")
    summary_path = args.summary or f"{args.out}.summary.csv"
    summarize(results).to_csv(summary_path, index=False, lineterminator="\n")
    logger.info(f"Wrote benchmark results to {args.out} and {summary_path}")

    outputs = {"results": args.out, "summary": summary_path}
    if args.constants:
        outputs["constants"] = args.constants
    write_effective_config(config, args.out, **outputs)
