from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .. import ndkernel as nk
from ..datasets.core import Dataset
from ..iat import InterpMlp, joint_loss, parse_variant, restrict_labels, sample_triplet_batch

log = logging.getLogger(__name__)

# short schedules so a full run fits on one CPU core
_DEFAULTS = {
    "image": {"batch": 40, "iters": 4000, "iat_iters": 8000, "interp": "norm", "lambda_iat": 1.0},
    "graph": {"batch": 10, "iters": 3000, "iat_iters": 5000, "interp": "slerp", "lambda_iat": 5.0},
}


@dataclass
class TrainConfig:
    lr: float = 5e-4
    batch: int = 40
    iters: int = 4000
    seed: int = 0
    log_every: int = 200
    iat: str | None = None
    interp: str = "norm"
    lambda_iat: float = 1.0
    triplet_batch: int = 20
    labeled_budget: int | None = None
    pretrain_iters: int = 0
    kl_weight: float = 1.0

    @classmethod
    def defaults(cls, domain: str, iat: str | None = None, **overrides) -> "TrainConfig":
        d = dict(_DEFAULTS[domain])
        iat_iters = d.pop("iat_iters")
        if parse_variant(iat) is not None:
            d["iters"] = iat_iters
        d["iat"] = iat
        d.update(overrides)
        return cls(**d)

    def validate(self) -> None:
        if self.lr <= 0 or self.batch < 1 or self.iters < 0 or self.triplet_batch < 1:
            raise ValueError(f"invalid training config {self}")
        if self.lambda_iat < 0:
            raise ValueError("lambda_iat must be >= 0")
        if self.kl_weight <= 0:
            raise ValueError("kl_weight must be > 0")
        parse_variant(self.iat)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


class TrainingDiverged(RuntimeError):
    def __init__(self, iteration: int, trace: list[dict]):
        self.iteration = iteration
        self.trace = trace
        super().__init__(f"loss became non-finite at iteration {iteration}")


@dataclass
class TrainResult:
    model: object
    trace: list[dict]
    interp_mlp: InterpMlp | None = None
    config: TrainConfig = field(default_factory=TrainConfig)


def train(model, dataset: Dataset, config: TrainConfig, interp_mlp: InterpMlp | None = None) -> TrainResult:
    """Adam on minibatch ELBO, plus the interpolation-aware term when ``config.iat`` is set.

    ELBO minibatches come from every sample in ``dataset`` (attributes unused);
    IAT triplets come from the ``train`` split only. Separate random streams
    feed minibatches, reparameterisation noise and triplets, so the ELBO-only
    path is unchanged by the IAT settings. ``kl_weight`` scales the KL term of
    the optimised loss; the traced ``elbo`` is always the unweighted bound.
    """
    config.validate()
    variant = parse_variant(config.iat)
    data_rng, noise_rng, triplet_rng = nk.split_rng(config.seed, 3)
    samples = dataset.stacked()
    n = samples.shape[0]
    batch = min(config.batch, n)

    pool = None
    if variant is not None:
        pool = restrict_labels(dataset.view("train"), config.labeled_budget, config.seed)
        if variant.uses_mlp and interp_mlp is None:
            interp_mlp = InterpMlp(model.latent_dim, seed=nk.derive_seed(config.seed, 7))
    params = list(model.parameters())
    if interp_mlp is not None and variant is not None and variant.uses_mlp:
        params += interp_mlp.parameters()
    state = nk.AdamState.for_params(params)

    trace: list[dict] = []
    for it in range(config.iters):
        idx = data_rng.choice(n, size=batch, replace=False)
        noise = noise_rng.standard_normal((batch, *model.latent_shape))
        use_iat = variant is not None and it >= config.pretrain_iters
        triplets = sample_triplet_batch(pool, config.triplet_batch, triplet_rng) if use_iat else None
        loss, parts = joint_loss(
            model,
            samples[idx],
            noise,
            triplets,
            variant if use_iat else None,
            config.interp,
            config.lambda_iat,
            interp_mlp,
            config.kl_weight,
        )
        row = {"iter": it, "loss": loss.item(), **parts}
        trace.append(row)
        if not math.isfinite(row["loss"]):
            raise TrainingDiverged(it, trace)
        grads = nk.grad(loss, params)
        try:
            nk.adam_step(params, grads, state, config.lr)
        except FloatingPointError:
            raise TrainingDiverged(it, trace) from None
        if config.log_every and (it + 1) % config.log_every == 0:
            log.info("iter %d loss %.4f elbo %.4f", it + 1, row["loss"], row["elbo"])
    return TrainResult(model, trace, interp_mlp if variant is not None and variant.uses_mlp else None, config)


def window_means(trace: list[dict], key: str = "elbo", frac: float = 0.1) -> tuple[float, float]:
    """Mean of ``key`` over the first and the last ``frac`` of the trace."""
    vals = np.array([r[key] for r in trace])
    k = max(1, int(len(vals) * frac))
    return float(vals[:k].mean()), float(vals[-k:].mean())
