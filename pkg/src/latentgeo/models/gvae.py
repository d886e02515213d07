"""Graph VAE for directed graphs: two-layer GCN encoder, MLP + half-split inner-product decoder."""

from __future__ import annotations

import numpy as np

from .. import ndkernel as nk
from .layers import ParamSet, Posterior, clamp_logvar, kl_std_normal, reparameterize


def normalized_adjacency(adj) -> np.ndarray:
    """``D^-1/2 (A + A^T + I) D^-1/2`` for a single matrix or a stack."""
    a = np.asarray(adj, dtype=np.float64)
    if a.shape[-1] != a.shape[-2]:
        raise nk.ShapeError("gcn", a.shape)
    tilde = a + np.swapaxes(a, -1, -2) + np.eye(a.shape[-1])
    d = 1.0 / np.sqrt(tilde.sum(axis=-1))
    return tilde * d[..., :, None] * d[..., None, :]


class GvaeModel:
    kind = "gvae"
    domain = "graph"

    def __init__(
        self,
        n_nodes: int,
        latent_dim: int = 16,
        gcn_hidden: int = 32,
        rank: int | None = None,
        seed: int = 0,
    ):
        if latent_dim % 2:
            raise ValueError(f"latent_dim must be even for the half-split decoder, got {latent_dim}")
        self.n_nodes = n_nodes
        self.latent_dim = latent_dim
        self.gcn_hidden = gcn_hidden
        self.rank = rank
        self.seed = seed
        d = latent_dim
        rng = nk.make_rng(seed)
        p = ParamSet()
        p.linear(rng, "gcn.0", n_nodes, gcn_hidden, bias=False)
        p.linear(rng, "gcn.mu", gcn_hidden, d, bias=False)
        p.linear(rng, "gcn.sigma", gcn_hidden, d, bias=False)
        p.linear(rng, "enc_mu.0", d, d)
        if rank is None:
            p.linear(rng, "enc_mu.1", d, d)
        else:
            p.linear(rng, "enc_mu.1.1", d, rank)
            p.linear(rng, "enc_mu.1.2", rank, d, bias=False)
        p.linear(rng, "dec.0", d, d)
        p.linear(rng, "dec.1", d, d)
        p.add("dec.bias", np.zeros(1))
        self.p = p

    def config(self) -> dict:
        return {
            "kind": self.kind,
            "n_nodes": self.n_nodes,
            "latent_dim": self.latent_dim,
            "gcn_hidden": self.gcn_hidden,
            "rank": self.rank,
            "seed": self.seed,
        }

    def parameters(self) -> list[nk.Tensor]:
        return self.p.parameters()

    @property
    def latent_shape(self) -> tuple[int, ...]:
        return (self.n_nodes, self.latent_dim)

    def _check_adj(self, adj) -> np.ndarray:
        a = np.asarray(adj, dtype=np.float64)
        n = self.n_nodes
        if a.ndim not in (2, 3) or a.shape[-2:] != (n, n):
            raise nk.ShapeError("gcn", a.shape, (n, n))
        return a

    def gcn_forward_t(self, adj, features=None) -> tuple[nk.Tensor, nk.Tensor]:
        """Per-node embedding pairs ``(e_mu, e_sigma)``; features default to one-hot (identity)."""
        a_hat = normalized_adjacency(self._check_adj(adj))
        w0 = self.p["gcn.0.w"] if features is None else nk.matmul(np.asarray(features, dtype=np.float64), self.p["gcn.0.w"])
        h = nk.relu(nk.matmul(a_hat, w0))
        e_mu = nk.matmul(a_hat, self.p.apply_linear("gcn.mu", h))
        e_sigma = nk.matmul(a_hat, self.p.apply_linear("gcn.sigma", h))
        return e_mu, e_sigma

    def gcn_forward(self, adj, features=None) -> tuple[np.ndarray, np.ndarray]:
        e_mu, e_sigma = self.gcn_forward_t(adj, features)
        return e_mu.data, e_sigma.data

    def encode_t(self, adj) -> tuple[nk.Tensor, nk.Tensor]:
        e_mu, e_sigma = self.gcn_forward_t(adj)
        h = nk.relu(self.p.apply_linear("enc_mu.0", e_mu))
        if self.rank is None:
            mu = self.p.apply_linear("enc_mu.1", h)
        else:
            mu = self.p.apply_linear("enc_mu.1.2", self.p.apply_linear("enc_mu.1.1", h))
        return mu, clamp_logvar(e_sigma)

    def logits_t(self, z) -> nk.Tensor:
        z = nk.as_tensor(z)
        if z.shape[-2:] != self.latent_shape:
            raise nk.ShapeError("gvae_decode", z.shape, self.latent_shape)
        h = nk.relu(self.p.apply_linear("dec.0", z))
        zp = self.p.apply_linear("dec.1", h)
        half = self.latent_dim // 2
        src, dst = zp[..., :half], zp[..., half:]
        return nk.matmul(src, nk.transpose(dst)) + self.p["dec.bias"]

    def decode_t(self, z) -> nk.Tensor:
        return nk.sigmoid(self.logits_t(z))

    def nll_t(self, adj, z) -> nk.Tensor:
        """Per-graph summed Bernoulli NLL of ``adj`` given ``z``, computed from logits."""
        a = self._check_adj(adj)
        logits = self.logits_t(z)
        return (nk.softplus(logits) - logits * a).sum(axis=(-2, -1))

    def elbo_t(self, adj, noise: np.ndarray, kl_weight: float = 1.0) -> tuple[nk.Tensor, dict]:
        """Negative ELBO; ``kl_weight != 1`` rescales the KL in the returned loss only."""
        a = self._check_adj(adj)
        if a.ndim == 2:
            a = a[None]
        mu, logvar = self.encode_t(a)
        z = mu + nk.exp(0.5 * logvar) * noise
        recon = self.nll_t(a, z).mean()
        kl = kl_std_normal(mu, logvar, axes=(-2, -1)).mean()
        loss = recon + kl if kl_weight == 1.0 else recon + kl_weight * kl
        return loss, {"recon": recon.item(), "kl": kl.item(), "elbo": recon.item() + kl.item()}

    def encode(self, adj) -> Posterior:
        mu, logvar = self.encode_t(adj)
        return Posterior(mu.data, logvar.data)

    def encode_map(self, adj) -> np.ndarray:
        return self.encode(adj).mu

    def decode(self, z) -> np.ndarray:
        """Edge-probability matrix ``P_ij = sigmoid(z'_i1 . z'_j2 + b)``."""
        return self.decode_t(np.asarray(z, dtype=np.float64)).data

    def sample_latent(self, posterior: Posterior, seed=None) -> np.ndarray:
        return reparameterize(posterior, seed)


def gvae_elbo(model: GvaeModel, adj, seed=None, noise: np.ndarray | None = None) -> tuple[nk.Tensor, dict]:
    a = np.asarray(adj, dtype=np.float64)
    batch = 1 if a.ndim == 2 else a.shape[0]
    if noise is None:
        noise = nk.make_rng(seed).standard_normal((batch, *model.latent_shape))
    return model.elbo_t(a, noise)
