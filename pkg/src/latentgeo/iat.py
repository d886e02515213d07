"""Interpolation-aware training objectives.

Each loss takes a batch of labelled triplets ``(x_t1, x_t2, x_t3)``, encodes all
three with the posterior mean (gradients flow into the encoder), interpolates
the outer codes at the weight implied by the attributes and penalises the
mismatch with the middle sample, either in latent space or through the decoder.
"""

from __future__ import annotations

import enum
import math
from typing import Sequence

import numpy as np

from . import ndkernel as nk
from .datasets.core import Dataset, Triplet, make_triplet
from .interp import get_interpolator, lambda_from_times


class IatVariant(str, enum.Enum):
    LATENT = "latent"
    DECODE = "decode"
    MLP_LATENT = "mlp_latent"
    MLP_DECODE = "mlp_decode"

    def __str__(self) -> str:
        return self.value

    @property
    def uses_mlp(self) -> bool:
        return self in (IatVariant.MLP_LATENT, IatVariant.MLP_DECODE)


def parse_variant(name) -> IatVariant | None:
    if name is None or name == "none":
        return None
    return IatVariant(name)


class InterpMlp:
    """Learned interpolator: ``[z1, z3, z_inter] (3D) -> D -> D -> D`` with ReLU."""

    def __init__(self, latent_dim: int, seed: int = 0):
        from .models.layers import ParamSet  # models imports this module

        self.latent_dim = latent_dim
        self.seed = seed
        d = latent_dim
        rng = nk.make_rng(seed)
        p = ParamSet()
        p.linear(rng, "interp.0", 3 * d, d)
        p.linear(rng, "interp.1", d, d)
        p.linear(rng, "interp.2", d, d)
        self.p = p

    def config(self) -> dict:
        return {"latent_dim": self.latent_dim, "seed": self.seed}

    def parameters(self) -> list[nk.Tensor]:
        return self.p.parameters()

    def __call__(self, z1, z3, z_inter) -> nk.Tensor:
        x = nk.concat([z1, z3, z_inter], axis=-1)
        if x.shape[-1] != 3 * self.latent_dim:
            raise nk.ShapeError("interp_mlp", x.shape, (3 * self.latent_dim,))
        h = nk.relu(self.p.apply_linear("interp.0", x))
        h = nk.relu(self.p.apply_linear("interp.1", h))
        return self.p.apply_linear("interp.2", h)


def _stack(triplets: Sequence[Triplet], k: int) -> np.ndarray:
    return np.stack([t.xs[k] for t in triplets])


def triplet_codes(model, triplets: Sequence[Triplet], kind):
    """Differentiable ``(z_t1, z_t2, z_t3, z_inter)`` for a triplet batch."""
    if not triplets:
        raise ValueError("empty triplet batch")
    b = len(triplets)
    t = np.array([tr.times for tr in triplets])
    lam = lambda_from_times(t[:, 0], t[:, 1], t[:, 2])
    x = np.concatenate([_stack(triplets, 0), _stack(triplets, 1), _stack(triplets, 2)])
    mu, _ = model.encode_t(x)
    z1, z2, z3 = mu[:b], mu[b : 2 * b], mu[2 * b :]
    f = get_interpolator(kind)
    # graph codes are interpolated as one flattened N*D vector
    flat = (b, -1)
    z_inter = f(z1.reshape(flat), z3.reshape(flat), lam).reshape(z1.shape)
    return z1, z2, z3, z_inter


def _sq_dist(a: nk.Tensor, b: nk.Tensor) -> nk.Tensor:
    d = a - b
    axes = tuple(range(1, d.ndim))
    return (d * d).sum(axis=axes).mean()


def loss_iat_latent(model, triplets, kind) -> nk.Tensor:
    z1, z2, z3, z_inter = triplet_codes(model, triplets, kind)
    return _sq_dist(z2, z_inter)


def loss_iat_decode(model, triplets, kind) -> nk.Tensor:
    """Negative log-likelihood of ``x_t2`` decoded from the interpolated code."""
    _, _, _, z_inter = triplet_codes(model, triplets, kind)
    return model.nll_t(_stack(triplets, 1), z_inter).mean()


def loss_iat_mlp_latent(model, interp_mlp: InterpMlp, triplets, kind) -> nk.Tensor:
    z1, z2, z3, z_inter = triplet_codes(model, triplets, kind)
    return _sq_dist(z2, interp_mlp(z1, z3, z_inter))


def loss_iat_mlp_decode(model, interp_mlp: InterpMlp, triplets, kind) -> nk.Tensor:
    z1, _, z3, z_inter = triplet_codes(model, triplets, kind)
    return model.nll_t(_stack(triplets, 1), interp_mlp(z1, z3, z_inter)).mean()


def iat_loss(model, triplets, variant, kind, interp_mlp: InterpMlp | None = None) -> nk.Tensor:
    variant = IatVariant(variant)
    if variant.uses_mlp and interp_mlp is None:
        raise ValueError(f"variant {variant} needs an InterpMlp")
    if variant is IatVariant.LATENT:
        return loss_iat_latent(model, triplets, kind)
    if variant is IatVariant.DECODE:
        return loss_iat_decode(model, triplets, kind)
    if variant is IatVariant.MLP_LATENT:
        return loss_iat_mlp_latent(model, interp_mlp, triplets, kind)
    return loss_iat_mlp_decode(model, interp_mlp, triplets, kind)


def joint_loss(
    model,
    batch,
    noise: np.ndarray,
    triplets,
    variant,
    kind,
    lambda_iat: float,
    interp_mlp: InterpMlp | None = None,
    kl_weight: float = 1.0,
) -> tuple[nk.Tensor, dict]:
    """``ELBO(batch) + lambda_iat * L_IAT(triplets)``.

    With no variant or ``lambda_iat == 0`` this is exactly the ELBO graph.
    """
    if lambda_iat < 0:
        raise ValueError("lambda_iat must be >= 0")
    elbo, parts = model.elbo_t(batch, noise, kl_weight)
    if parse_variant(variant) is None or lambda_iat == 0:
        return elbo, parts
    iat = iat_loss(model, triplets, variant, kind, interp_mlp)
    parts["iat"] = iat.item()
    return elbo + lambda_iat * iat, parts


def restrict_labels(dataset: Dataset, budget: int | None, seed: int = 0) -> Dataset:
    """Keep at most ``budget`` labelled samples per sequence (seeded choice)."""
    if budget is None:
        return dataset
    if budget < 3:
        raise ValueError(f"labelled budget must be >= 3, got {budget}")
    seqs = []
    for s in dataset.sequences:
        n = len(s.times)
        if budget >= n:
            seqs.append(s)
            continue
        keep = nk.make_rng(nk.derive_seed(seed, s.object_id, 29)).permutation(n)[:budget]
        seqs.append(s.subset(keep))
    return Dataset(dataset.kind, seqs, {}, dict(dataset.meta, labeled_budget=budget))


def sample_triplet_batch(
    dataset: Dataset,
    n: int,
    seed,
    labeled_budget: int | None = None,
    budget_seed: int = 0,
) -> list[Triplet]:
    """``n`` triplets drawn uniformly over all ordered same-sequence choices."""
    pool = restrict_labels(dataset, labeled_budget, budget_seed)
    rng = nk.make_rng(seed)
    sizes = np.array([len(s.times) for s in pool.sequences])
    weights = np.array([math.comb(int(m), 3) for m in sizes], dtype=np.float64)
    if weights.sum() == 0:
        raise ValueError("no sequence holds three samples")
    seq_idx = rng.choice(len(pool.sequences), size=n, p=weights / weights.sum())
    out = []
    for si in seq_idx:
        s = pool.sequences[si]
        i, j, k = rng.choice(len(s.times), size=3, replace=False)
        out.append(make_triplet(s, i, j, k))
    return out
