"""Image VAE and directed-graph GVAE built on :mod:`latentgeo.ndkernel`."""

from .gvae import GvaeModel, gvae_elbo, normalized_adjacency
from .layers import Posterior, reparameterize
from .train import TrainConfig, TrainingDiverged, TrainResult, train, window_means
from .vae import VaeModel, elbo_image
from .checkpoint import CheckpointError, build_model, load_checkpoint, read_header, save_checkpoint
