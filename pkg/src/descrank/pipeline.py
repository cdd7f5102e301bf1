"""Experiment configuration and the end-to-end run.

A run turns inputs (embeddings plus description sources, or a precomputed
prediction matrix) into four artifacts in the output directory:

    predictions.csv   the per-description prediction matrix
    aggregated.csv    item_id, label, confidence
    ranking.tsv       annotator_id, theta, kappa_mean [, macro_f1]
    report.json       resolved config, likelihood, seeds, correlations, versions

Artifacts are written to a ``.partial`` path first and renamed once complete,
so an interrupted run never leaves a truncated file under a final name.
"""

from __future__ import annotations

import csv
import json
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, io
from .backends import active_backend_name
from .core import (
    MISSING,
    DescriptionSet,
    GoldLabels,
    LabelSpace,
    PredictionMatrix,
    validate_matrix,
)
from .errors import ConfigError, InvalidMatrixError
from .mace import EmConfig, MaceModel, decode, fit_em
from .metrics import RankingReport, majority_vote, ranking_report
from .zeroshot import PatternGrid, expand_patterns, predict_matrix

METHODS = ("mace", "majority")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one pipeline run needs, resolved and validated.

    Exactly one input route must be configured: either ``predictions_path``
    (a ready-made matrix) or embeddings plus at least one description source
    (explicit sets, a pattern grid, or both).
    """

    space: LabelSpace
    out_dir: Path
    description_sets: tuple[DescriptionSet, ...] = ()
    pattern_grid: PatternGrid | None = None
    predictions_path: Path | None = None
    item_embeddings_path: Path | None = None
    description_embeddings_path: Path | None = None
    gold_path: Path | None = None
    method: str = "mace"
    temperature: float = 1.0
    em: EmConfig = EmConfig()

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if not (self.temperature > 0.0):
            raise ConfigError("temperature must be positive")
        if self.predictions_path is not None:
            if self.item_embeddings_path or self.description_embeddings_path:
                raise ConfigError("give either a predictions file or embeddings, not both")
        else:
            if not (self.item_embeddings_path and self.description_embeddings_path):
                raise ConfigError(
                    "need item and description embeddings when no predictions file is given"
                )
            if not self.description_sets and self.pattern_grid is None:
                raise ConfigError("need at least one description source")
        paths = [
            p
            for p in (
                self.predictions_path,
                self.item_embeddings_path,
                self.description_embeddings_path,
                self.gold_path,
            )
            if p is not None
        ]
        if len(set(paths)) != len(paths):
            raise ConfigError("referenced input paths must be distinct")

    @classmethod
    def from_dict(cls, raw: dict, base_dir=".") -> "ExperimentConfig":
        """Build from a parsed JSON object; relative paths resolve against base_dir."""
        base = Path(base_dir)

        def path_of(key):
            return (base / raw[key]) if raw.get(key) else None

        try:
            space = LabelSpace(tuple(raw["labels"]))
        except KeyError:
            raise ConfigError("config needs a 'labels' list") from None

        sets = tuple(
            DescriptionSet(name=d["name"], descriptions=d["descriptions"])
            for d in raw.get("description_sets", [])
        )
        grid = None
        if raw.get("pattern_grid"):
            g = raw["pattern_grid"]
            grid = PatternGrid(
                patterns=tuple(g["patterns"]),
                variants=tuple(
                    DescriptionSet(name=v["name"], descriptions=v["words"])
                    for v in g["variants"]
                ),
            )
        em = EmConfig(**raw.get("em", {}))
        if "out_dir" not in raw:
            raise ConfigError("config needs an 'out_dir'")
        return cls(
            space=space,
            out_dir=base / raw["out_dir"],
            description_sets=sets,
            pattern_grid=grid,
            predictions_path=path_of("predictions"),
            item_embeddings_path=path_of("item_embeddings"),
            description_embeddings_path=path_of("description_embeddings"),
            gold_path=path_of("gold"),
            method=raw.get("method", "mace"),
            temperature=float(raw.get("temperature", 1.0)),
            em=em,
        )

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        with open(path, "r", encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc.msg})") from exc
        return cls.from_dict(raw, base_dir=path.parent)

    def to_dict(self) -> dict:
        """Echo of the resolved configuration, JSON-serializable."""
        return {
            "labels": list(self.space.classes),
            "description_sets": [
                {"name": s.name, "descriptions": dict(s.descriptions)}
                for s in self.description_sets
            ],
            "pattern_grid": None
            if self.pattern_grid is None
            else {
                "patterns": list(self.pattern_grid.patterns),
                "variants": [
                    {"name": v.name, "words": dict(v.descriptions)}
                    for v in self.pattern_grid.variants
                ],
            },
            "predictions": str(self.predictions_path) if self.predictions_path else None,
            "item_embeddings": str(self.item_embeddings_path)
            if self.item_embeddings_path
            else None,
            "description_embeddings": str(self.description_embeddings_path)
            if self.description_embeddings_path
            else None,
            "gold": str(self.gold_path) if self.gold_path else None,
            "method": self.method,
            "temperature": self.temperature,
            "em": {
                "restarts": self.em.restarts,
                "max_iterations": self.em.max_iterations,
                "rel_tolerance": self.em.rel_tolerance,
                "theta_smoothing": self.em.theta_smoothing,
                "xi_smoothing": self.em.xi_smoothing,
                "seed": self.em.seed,
                "theta_init_low": self.em.theta_init_low,
                "theta_init_high": self.em.theta_init_high,
                "symmetric_init": self.em.symmetric_init,
            },
            "out_dir": str(self.out_dir),
        }


class _atomic_output:
    """Open ``<path>.partial`` for writing; rename to ``path`` only on success."""

    def __init__(self, path: Path, newline=None):
        self.path = Path(path)
        self.partial = self.path.with_name(self.path.name + ".partial")
        self.newline = newline

    def __enter__(self):
        self.fh = open(self.partial, "w", newline=self.newline, encoding="utf-8")
        return self.fh

    def __exit__(self, exc_type, exc, tb):
        self.fh.close()
        if exc_type is None:
            os.replace(self.partial, self.path)
        return False


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def resolve_description_sets(config: ExperimentConfig) -> list[DescriptionSet]:
    """Explicit sets first, then the expanded pattern grid, in stable order."""
    sets = list(config.description_sets)
    if config.pattern_grid is not None:
        sets.extend(expand_patterns(config.pattern_grid, config.space))
    return sets


def compute_predictions(config: ExperimentConfig) -> PredictionMatrix:
    """The zero-shot stage: embeddings plus descriptions to a hard matrix."""
    items = io.read_embeddings(config.item_embeddings_path)
    desc_embeddings = io.read_embeddings(config.description_embeddings_path)
    sets = resolve_description_sets(config)
    result = predict_matrix(
        items, sets, desc_embeddings, config.space, temperature=config.temperature
    )
    return result.matrix


def _aggregate(matrix: PredictionMatrix, model: MaceModel, method: str):
    """Labels plus a per-item confidence for the chosen aggregator."""
    if method == "mace":
        return decode(model)
    labels = majority_vote(matrix)
    observed = matrix.cells != MISSING
    agree = (matrix.cells == labels[:, None]) & observed
    confidence = agree.sum(axis=1) / observed.sum(axis=1)
    return labels, confidence


def _write_aggregated(path, matrix, labels, confidence, space):
    with _atomic_output(path, newline="") as fh:
        fh.write("item_id,label,confidence\n")
        for item_id, label, conf in zip(matrix.item_ids, labels, confidence):
            fh.write(f"{item_id},{space.name(int(label))},{_fmt(float(conf))}\n")


def _write_ranking(path, report: RankingReport):
    with_gold = report.rows and report.rows[0].macro_f1 is not None
    with _atomic_output(path, newline="") as fh:
        header = "annotator_id\ttheta\tkappa_mean"
        if with_gold:
            header += "\tmacro_f1"
        fh.write(header + "\n")
        for row in report.rows:
            line = f"{row.annotator_id}\t{_fmt(row.theta)}\t{_fmt(row.kappa_mean)}"
            if with_gold:
                line += f"\t{_fmt(row.macro_f1)}"
            fh.write(line + "\n")


def run_pipeline(config: ExperimentConfig) -> dict:
    """Run all stages and write the four artifacts; returns the report dict.

    The competence model is always fitted (the ranking needs it); ``method``
    only chooses which aggregator fills aggregated.csv.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    if config.predictions_path is not None:
        matrix = io.read_predictions(config.predictions_path, config.space)
    else:
        matrix = compute_predictions(config)
    check = validate_matrix(matrix, config.space)
    if not check.ok:
        raise InvalidMatrixError(check.violations)

    with _atomic_output(out / "predictions.csv", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["item_id", *matrix.annotator_ids])
        for i, item_id in enumerate(matrix.item_ids):
            writer.writerow(
                [item_id]
                + [
                    "" if v == MISSING else config.space.name(int(v))
                    for v in matrix.cells[i]
                ]
            )

    gold: GoldLabels | None = None
    if config.gold_path is not None:
        gold = io.read_gold(config.gold_path, config.space)
        if gold.item_ids != matrix.item_ids:
            raise ConfigError("gold file items do not match the prediction matrix")

    model = fit_em(matrix, config.space, config.em)
    labels, confidence = _aggregate(matrix, model, config.method)
    _write_aggregated(out / "aggregated.csv", matrix, labels, confidence, config.space)

    report = ranking_report(matrix, model, gold=gold, space=config.space)
    _write_ranking(out / "ranking.tsv", report)

    report_dict = {
        "config": config.to_dict(),
        "log_likelihood": model.log_likelihood,
        "restart_index": model.restart_index,
        "n_iterations": model.n_iterations,
        "seeds": {
            "master": config.em.seed,
            "per_restart": [config.em.seed + r for r in range(config.em.restarts)],
        },
        "correlations": None
        if gold is None
        else {
            "rho_theta_f1": report.rho_theta_f1,
            "rho_kappa_f1": report.rho_kappa_f1,
        },
        "diagnostics": {
            "theta": [float(t) for t in model.theta],
            "mean_nonspam": [float(v) for v in model.mean_nonspam],
            "annotator_ids": list(matrix.annotator_ids),
        },
        "versions": {
            "descrank": __version__,
            "numpy": np.__version__,
            "python": ".".join(map(str, sys.version_info[:3])),
            "backend": active_backend_name(),
        },
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    with _atomic_output(out / "report.json") as fh:
        json.dump(report_dict, fh, indent=2)
        fh.write("\n")
    return report_dict
