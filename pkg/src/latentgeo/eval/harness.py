"""Experiment grids: rank/dimension sweeps, IAT variant tables and labelled-budget curves.

Every cell trains a fresh model, then scores it on the test split. A diverging
cell is recorded with ``status="diverged"`` and the remaining cells still run.
"""

from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ..datasets.core import Dataset
from ..iat import IatVariant, parse_variant
from ..models import GvaeModel, TrainConfig, TrainingDiverged, VaeModel, train
from .pipeline import MetricReport, TripletResult, evaluate_suite

log = logging.getLogger(__name__)


@dataclass
class ExperimentConfig:
    domain: str = "image"
    latent_dim: int = 32
    rank: int | None = None
    hidden: int = 256
    gcn_hidden: int = 32
    train: TrainConfig = field(default_factory=TrainConfig)
    kind: str = "norm"
    n_triplets: int = 2000
    eval_seed: int = 0

    @classmethod
    def defaults(cls, domain: str, **overrides) -> "ExperimentConfig":
        base = {"domain": domain, "train": TrainConfig.defaults(domain)}
        if domain == "graph":
            base.update(latent_dim=16, kind="slerp")
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        d["train"] = TrainConfig(**d.get("train", {}))
        return cls(**d)


def build_model(cfg: ExperimentConfig, dataset: Dataset, seed: int):
    if cfg.domain == "image":
        size = dataset.sequences[0].samples.shape[-1]
        return VaeModel(size, cfg.latent_dim, cfg.hidden, cfg.rank, seed=seed)
    return GvaeModel(dataset.sequences[0].n_nodes, cfg.latent_dim, cfg.gcn_hidden, cfg.rank, seed=seed)


def posterior_mean_sv_ratio(model, test_set: Dataset, rank: int) -> float:
    """``sigma_{rank+1} / sigma_1`` of the stacked posterior means (flattened per sample)."""
    z = np.asarray(model.encode_map(test_set.stacked()))
    z = z.reshape(-1, z.shape[-1])
    s = np.linalg.svd(z, compute_uv=False)
    return float(s[rank] / s[0]) if rank < len(s) and s[0] > 0 else 0.0


@dataclass
class CellResult:
    reports: list[MetricReport]
    raw: dict[str, list[TripletResult]]
    trace: list[dict]


def run_cell(cfg: ExperimentConfig, dataset: Dataset, keys: dict, seed: int) -> CellResult:
    """Train one model (model, data-order and noise all seeded by ``seed``) and evaluate it."""
    keys = dict(keys, seed=seed)
    model = build_model(cfg, dataset, seed)
    tcfg = replace(cfg.train, seed=seed)
    try:
        result = train(model, dataset, tcfg)
    except TrainingDiverged as e:
        log.warning("cell %s diverged at iteration %d", keys, e.iteration)
        rep = MetricReport(dict(keys, algorithm=cfg.kind), {}, {}, 0, status="diverged")
        return CellResult([rep], {}, e.trace)
    test = dataset.view("test")
    reports, raw = evaluate_suite(model, test, [cfg.kind], cfg.n_triplets, cfg.eval_seed, result.interp_mlp, keys)
    if cfg.rank is not None:
        for r in reports:
            r.extras["sv_ratio"] = posterior_mean_sv_ratio(model, test, cfg.rank)
    return CellResult(reports, raw, result.trace)


def _run_cells(jobs_list, dataset: Dataset, jobs: int) -> list[CellResult]:
    if jobs <= 1:
        return [run_cell(c, dataset, k, s) for c, k, s in jobs_list]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(run_cell, c, dataset, k, s) for c, k, s in jobs_list]
        return [f.result() for f in futures]


def _grid(cells, dataset, seeds, jobs) -> list[CellResult]:
    todo = [(cfg, keys, s) for cfg, keys in cells for s in seeds]
    return _run_cells(todo, dataset, jobs)


def sweep_rank_dim(base: ExperimentConfig, dataset: Dataset, dims, ranks, seeds=(0,), jobs: int = 1) -> list[CellResult]:
    """One row per latent size ``D`` (full-rank head) and one per rank ``R`` at the base ``D``."""
    if not dims and not ranks:
        raise ValueError("dims and ranks are both empty")
    cells = [(replace(base, latent_dim=d, rank=None), {"dim": d, "rank": None, "iat": "none"}) for d in dims]
    for r in ranks:
        if r > base.latent_dim:
            raise ValueError(f"rank {r} exceeds latent_dim {base.latent_dim}")
        cells.append((replace(base, rank=r), {"dim": base.latent_dim, "rank": r, "iat": "none"}))
    return _grid(cells, dataset, seeds, jobs)


def run_iat_experiment(
    base: ExperimentConfig,
    dataset: Dataset,
    variants=("none", "latent", "decode", "mlp_latent", "mlp_decode"),
    kind: str | None = None,
    lambda_iat: float | None = None,
    seeds=(0,),
    jobs: int = 1,
) -> list[CellResult]:
    """Train with each IAT variant (same iterations as the baseline) and score with one fixed interpolator."""
    for v in variants:
        parse_variant(v)
    kind = kind or base.kind
    lam = base.train.lambda_iat if lambda_iat is None else lambda_iat
    cells = []
    for v in variants:
        tcfg = replace(base.train, iat=None if v == "none" else v, interp=kind, lambda_iat=lam)
        cells.append((replace(base, kind=kind, train=tcfg), {"dim": base.latent_dim, "rank": base.rank, "iat": v}))
    return _grid(cells, dataset, seeds, jobs)


def label_budget_study(base: ExperimentConfig, dataset: Dataset, budgets, seeds=(0,), jobs: int = 1) -> list[CellResult]:
    """``mlp_decode`` training with at most ``budget`` labelled samples per sequence."""
    budgets = list(budgets)
    if not budgets or budgets != sorted(budgets) or budgets[0] < 3:
        raise ValueError(f"budgets must be ascending and each >= 3, got {budgets}")
    cells = []
    for b in budgets:
        tcfg = replace(base.train, iat=IatVariant.MLP_DECODE.value, interp=base.kind, labeled_budget=b)
        keys = {"dim": base.latent_dim, "rank": base.rank, "iat": "mlp_decode", "budget": b}
        cells.append((replace(base, train=tcfg), keys))
    return _grid(cells, dataset, seeds, jobs)


def reports_of(cells: list[CellResult]) -> list[MetricReport]:
    return [r for c in cells for r in c.reports]
