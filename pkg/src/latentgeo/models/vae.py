"""Image VAE with an MLP encoder/decoder and an optional rank-R posterior-mean head."""

from __future__ import annotations

import numpy as np

from .. import ndkernel as nk
from .layers import ParamSet, Posterior, clamp_logvar, kl_std_normal, reparameterize


class VaeModel:
    kind = "vae"
    domain = "image"

    def __init__(
        self,
        image_size: int = 32,
        latent_dim: int = 32,
        hidden: int = 256,
        rank: int | None = None,
        sigma_x: float = 1.0,
        seed: int = 0,
    ):
        if rank is not None and not 1 <= rank:
            raise ValueError(f"rank must be >= 1, got {rank}")
        self.image_size = image_size
        self.latent_dim = latent_dim
        self.hidden = hidden
        self.rank = rank
        self.sigma_x = sigma_x
        self.seed = seed
        n_pix = image_size * image_size
        rng = nk.make_rng(seed)
        p = ParamSet()
        p.linear(rng, "enc.0", n_pix, hidden)
        p.linear(rng, "enc.1", hidden, hidden)
        if rank is None:
            p.linear(rng, "mu", hidden, latent_dim)
        else:
            # mu = (h W1 + b1) W2: means stay in the row space of W2
            p.linear(rng, "mu.1", hidden, rank)
            p.linear(rng, "mu.2", rank, latent_dim, bias=False)
        p.linear(rng, "logvar", hidden, latent_dim)
        p.linear(rng, "dec.0", latent_dim, hidden)
        p.linear(rng, "dec.1", hidden, hidden)
        p.linear(rng, "dec.2", hidden, n_pix)
        self.p = p

    def config(self) -> dict:
        return {
            "kind": self.kind,
            "image_size": self.image_size,
            "latent_dim": self.latent_dim,
            "hidden": self.hidden,
            "rank": self.rank,
            "sigma_x": self.sigma_x,
            "seed": self.seed,
        }

    def parameters(self) -> list[nk.Tensor]:
        return self.p.parameters()

    @property
    def latent_shape(self) -> tuple[int, ...]:
        return (self.latent_dim,)

    # -- differentiable path ------------------------------------------------

    def _check_images(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        s = self.image_size
        if x.shape[-2:] != (s, s) or x.ndim not in (2, 3):
            raise nk.ShapeError("encode", x.shape, (s, s))
        return x

    def encode_t(self, x) -> tuple[nk.Tensor, nk.Tensor]:
        x = self._check_images(x)
        flat = x.reshape(-1, self.image_size * self.image_size)
        h = nk.leaky_relu(self.p.apply_linear("enc.0", flat))
        h = nk.leaky_relu(self.p.apply_linear("enc.1", h))
        if self.rank is None:
            mu = self.p.apply_linear("mu", h)
        else:
            mu = self.p.apply_linear("mu.2", self.p.apply_linear("mu.1", h))
        logvar = clamp_logvar(self.p.apply_linear("logvar", h))
        return mu, logvar

    def decode_t(self, z) -> nk.Tensor:
        z = nk.as_tensor(z)
        if z.shape[-1] != self.latent_dim:
            raise nk.ShapeError("decode", z.shape, (self.latent_dim,))
        h = nk.leaky_relu(self.p.apply_linear("dec.0", z))
        h = nk.leaky_relu(self.p.apply_linear("dec.1", h))
        out = nk.tanh(self.p.apply_linear("dec.2", h))
        return out.reshape(*z.shape[:-1], self.image_size, self.image_size)

    def nll_t(self, x, z) -> nk.Tensor:
        """Per-sample ``||x - decode(z)||^2 / (2 sigma_x^2)`` (Gaussian NLL without its constant)."""
        x = self._check_images(x)
        diff = self.decode_t(z) - x
        return (diff * diff).sum(axis=(-2, -1)) / (2.0 * self.sigma_x**2)

    def elbo_t(self, x, noise: np.ndarray, kl_weight: float = 1.0) -> tuple[nk.Tensor, dict]:
        x = self._check_images(x)
        if x.ndim == 2:
            x = x[None]
        mu, logvar = self.encode_t(x)
        z = mu + nk.exp(0.5 * logvar) * noise
        recon = self.nll_t(x, z).mean()
        kl = kl_std_normal(mu, logvar, axes=-1).mean()
        loss = recon + kl if kl_weight == 1.0 else recon + kl_weight * kl
        return loss, {"recon": recon.item(), "kl": kl.item(), "elbo": recon.item() + kl.item()}

    # -- numpy conveniences -------------------------------------------------

    def encode(self, x) -> Posterior:
        mu, logvar = self.encode_t(x)
        if np.ndim(x) == 2:
            return Posterior(mu.data[0], logvar.data[0])
        return Posterior(mu.data, logvar.data)

    def encode_map(self, x) -> np.ndarray:
        """Posterior mean, i.e. the mode of ``q(z|x)``."""
        return self.encode(x).mu

    def decode(self, z) -> np.ndarray:
        return self.decode_t(np.asarray(z, dtype=np.float64)).data

    def sample_latent(self, posterior: Posterior, seed=None) -> np.ndarray:
        return reparameterize(posterior, seed)


def elbo_image(model: VaeModel, x, seed=None, noise: np.ndarray | None = None) -> tuple[nk.Tensor, dict]:
    """Minibatch-mean negative ELBO. ``noise`` fixes the reparameterisation draw."""
    x = np.asarray(x, dtype=np.float64)
    batch = 1 if x.ndim == 2 else x.shape[0]
    if noise is None:
        noise = nk.make_rng(seed).standard_normal((batch, model.latent_dim))
    return model.elbo_t(x, noise)
