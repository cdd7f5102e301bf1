"""Command-line surface.

Subcommands cover the pipeline stages individually (predict, aggregate,
rank, evaluate, simulate) and end to end (run). All randomness flows from
--seed, so identical invocations on identical inputs write identical
aggregated.csv and ranking.tsv bytes.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io
from .core import LabelSpace
from .errors import DescrankError
from .mace import EmConfig, fit_em
from .metrics import macro_f1, ranking_report
from .pipeline import (
    ExperimentConfig,
    _aggregate,
    _write_aggregated,
    _write_ranking,
    compute_predictions,
    run_pipeline,
)
from .simulate import sample


def _add_shared(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="master random seed")
    parser.add_argument("--restarts", type=int, default=None, help="EM restarts")
    parser.add_argument("--max-iter", type=int, default=None, help="EM iteration cap")
    parser.add_argument("--tol", type=float, default=None, help="EM relative tolerance")
    parser.add_argument("--theta-smoothing", type=float, default=None)
    parser.add_argument("--xi-smoothing", type=float, default=None)
    parser.add_argument("--temperature", type=float, default=None, help="softmax temperature")
    parser.add_argument("--method", choices=["mace", "majority"], default=None)
    parser.add_argument("--gold", type=Path, default=None, help="gold labels CSV")
    parser.add_argument("--out", type=Path, default=None, help="output directory")


def _em_overrides(args) -> dict:
    mapping = {
        "seed": args.seed,
        "restarts": args.restarts,
        "max_iterations": args.max_iter,
        "rel_tolerance": args.tol,
        "theta_smoothing": args.theta_smoothing,
        "xi_smoothing": args.xi_smoothing,
    }
    return {key: value for key, value in mapping.items() if value is not None}


def _em_config(args) -> EmConfig:
    return EmConfig(**_em_overrides(args))


def _labels(arg: str) -> LabelSpace:
    return LabelSpace(tuple(part for part in arg.split(",") if part))


def _load_config(args) -> ExperimentConfig:
    config = ExperimentConfig.from_file(args.config)
    raw = config.to_dict()
    raw["em"].update(_em_overrides(args))
    if args.temperature is not None:
        raw["temperature"] = args.temperature
    if args.method is not None:
        raw["method"] = args.method
    if args.gold is not None:
        raw["gold"] = str(args.gold)
    if args.out is not None:
        raw["out_dir"] = str(args.out)
    # Paths in to_dict() are already resolved, so re-parse relative to cwd.
    return ExperimentConfig.from_dict(raw, base_dir=".")


def _cmd_run(args) -> int:
    report = run_pipeline(_load_config(args))
    out = report["config"]["out_dir"]
    print(f"wrote predictions.csv, aggregated.csv, ranking.tsv, report.json to {out}")
    return 0


def _cmd_predict(args) -> int:
    config = _load_config(args)
    matrix = compute_predictions(config)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_predictions(out / "predictions.csv", matrix, config.space)
    print(f"wrote {out / 'predictions.csv'} ({matrix.n_items} items x {matrix.n_annotators} sets)")
    return 0


def _cmd_aggregate(args) -> int:
    space = _labels(args.labels)
    matrix = io.read_predictions(args.predictions, space)
    model = fit_em(matrix, space, _em_config(args))
    method = args.method or "mace"
    labels, confidence = _aggregate(matrix, model, method)
    out = args.out or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    _write_aggregated(out / "aggregated.csv", matrix, labels, confidence, space)
    print(f"wrote {out / 'aggregated.csv'} (method={method})")
    return 0


def _cmd_rank(args) -> int:
    space = _labels(args.labels)
    matrix = io.read_predictions(args.predictions, space)
    gold = io.read_gold(args.gold, space) if args.gold else None
    if gold is not None and gold.item_ids != matrix.item_ids:
        raise DescrankError("gold file items do not match the prediction matrix")
    model = fit_em(matrix, space, _em_config(args))
    report = ranking_report(matrix, model, gold=gold, space=space)
    out = args.out or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    _write_ranking(out / "ranking.tsv", report)
    print(f"wrote {out / 'ranking.tsv'}")
    if report.rho_theta_f1 is not None:
        print(f"rho(theta, f1) = {report.rho_theta_f1:.4f}")
        print(f"rho(kappa, f1) = {report.rho_kappa_f1:.4f}")
    return 0


def _cmd_evaluate(args) -> int:
    space = _labels(args.labels)
    gold = io.read_gold(args.gold, space)
    predicted = {}
    with open(args.aggregated, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header[:2] != ["item_id", "label"]:
            raise DescrankError(f"{args.aggregated}: header must start with 'item_id,label'")
        for line in fh:
            parts = line.rstrip("\n").split(",")
            predicted[parts[0]] = space.index(parts[1])
    try:
        labels = np.array([predicted[item] for item in gold.item_ids])
    except KeyError as exc:
        raise DescrankError(f"aggregated file is missing item {exc}") from exc
    accuracy = float(np.mean(labels == gold.labels))
    result = {
        "n_items": len(gold.item_ids),
        "accuracy": accuracy,
        "macro_f1": macro_f1(labels, gold, space.k),
    }
    print(json.dumps(result, indent=2))
    return 0


def _cmd_simulate(args) -> int:
    space = _labels(args.labels)
    theta = np.array([float(v) for v in args.theta.split(",")])
    if args.xi:
        with open(args.xi, "r", encoding="utf-8") as fh:
            xi = np.array(json.load(fh), dtype=np.float64)
    else:
        xi = np.full((theta.shape[0], space.k), 1.0 / space.k)
    bundle = sample(
        n_items=args.items,
        space=space,
        theta_true=theta,
        xi_true=xi,
        missing_rate=args.missing_rate,
        seed=args.seed if args.seed is not None else 0,
    )
    out = args.out or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    io.write_predictions(out / "predictions.csv", bundle.matrix, space)
    io.write_gold(out / "gold.csv", bundle.gold, space)
    with open(out / "truth.json", "w", encoding="utf-8") as fh:
        json.dump(
            {
                "seed": bundle.seed,
                "theta_true": bundle.theta_true.tolist(),
                "xi_true": bundle.xi_true.tolist(),
                "missing_rate": args.missing_rate,
                "labels": list(space.classes),
            },
            fh,
            indent=2,
        )
        fh.write("\n")
    print(f"wrote predictions.csv, gold.csv, truth.json to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="descrank",
        description="Zero-shot label-description predictions, ranked and aggregated "
        "with an annotator-competence model.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="full pipeline from a config file")
    p_run.add_argument("--config", type=Path, required=True, help="experiment config JSON")
    _add_shared(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_predict = sub.add_parser("predict", help="zero-shot predictions only")
    p_predict.add_argument("--config", type=Path, required=True)
    _add_shared(p_predict)
    p_predict.set_defaults(func=_cmd_predict)

    p_agg = sub.add_parser("aggregate", help="aggregate a prediction matrix")
    p_agg.add_argument("--predictions", type=Path, required=True)
    p_agg.add_argument("--labels", required=True, help="comma-separated class names, in order")
    _add_shared(p_agg)
    p_agg.set_defaults(func=_cmd_aggregate)

    p_rank = sub.add_parser("rank", help="rank annotators by fitted competence")
    p_rank.add_argument("--predictions", type=Path, required=True)
    p_rank.add_argument("--labels", required=True)
    _add_shared(p_rank)
    p_rank.set_defaults(func=_cmd_rank)

    p_eval = sub.add_parser("evaluate", help="score an aggregated output against gold")
    p_eval.add_argument("--aggregated", type=Path, required=True)
    p_eval.add_argument("--labels", required=True)
    _add_shared(p_eval)
    p_eval.set_defaults(func=_cmd_evaluate)

    p_sim = sub.add_parser("simulate", help="sample a synthetic annotation dataset")
    p_sim.add_argument("--items", type=int, required=True)
    p_sim.add_argument("--labels", required=True)
    p_sim.add_argument("--theta", required=True, help="comma-separated true competences")
    p_sim.add_argument("--xi", type=Path, default=None, help="JSON matrix of emission rows")
    p_sim.add_argument("--missing-rate", type=float, default=0.0)
    _add_shared(p_sim)
    p_sim.set_defaults(func=_cmd_simulate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "evaluate" and args.gold is None:
        parser.error("evaluate requires --gold")
    try:
        return args.func(args)
    except DescrankError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    raise SystemExit(main())
