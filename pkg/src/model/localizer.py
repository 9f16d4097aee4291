"""
Sequential generative localization model: first-person frames in, overhead map
reconstructions and normalized coordinates out, one prediction per timestep.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Union

import pandas as pd
import torch
import torch.nn as nn

from .model_config import ModelConfig
from .networks import (
    CausalTransformerCore,
    CoordinateHead,
    FrameEncoder,
    GmpDecoder,
    LatentHeads,
    RecurrentCore,
    init_weights,
    reparameterize,
)

logger = logging.getLogger(__name__)


@dataclass
class LatentState:
    mu: torch.Tensor        # (B, L, latent_dim)
    logvar: torch.Tensor
    z: torch.Tensor


@dataclass
class ModelOutput:
    recon: Optional[torch.Tensor]   # (B, L, 3, H, W) or None without the reconstruction objective
    latent: LatentState
    coords: torch.Tensor            # (B, L, 2) normalized (u, v)

    def __len__(self) -> int:
        return self.coords.size(1)


class SpatialTemporalModel(nn.Module):
    """Frame encoder -> causal sequence core -> per-step latent -> {map decoder, coordinate head}."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        feature_dim = config.feature_dim
        self.encoder = FrameEncoder(config.enc_channels, config.enc_kernel, config.fpp_size, feature_dim)
        if config.variant == 'transformer':
            self.core = CausalTransformerCore(config.d_model, config.n_heads, config.n_layers,
                                              config.ff_mult, config.dropout, config.seq_len)
        else:
            self.core = RecurrentCore(feature_dim, config.rnn_hidden, config.rnn_layers,
                                      config.dropout, config.seq_len)
        self.latent_heads = LatentHeads(feature_dim, config.latent_dim)
        self.decoder = (GmpDecoder(config.latent_dim, config.dec_channels, config.dec_kernel,
                                   config.dec_seed_size, config.gmp_size)
                        if config.reconstruction_enabled else None)
        self.coord_head = CoordinateHead(config.latent_dim, config.coord_hidden)
        init_weights(self)
        nn.init.constant_(self.latent_heads.logvar.bias, config.logvar_init)
        logger.debug(f"Built {config.variant} model with {parameter_count(self):,} parameters "
                     f"(reconstruction {'on' if config.reconstruction_enabled else 'off'})")

    def encode_frames(self, frames: torch.Tensor) -> torch.Tensor:
        """(B, L, 3, H, W) -> (B, L, feature_dim)"""
        batch, length = frames.shape[:2]
        return self.encoder(frames.reshape(batch * length, *frames.shape[2:])).view(batch, length, -1)

    def forward(self, frames: torch.Tensor, deterministic: bool = False,
                generator: Optional[torch.Generator] = None) -> ModelOutput:
        """Run the full model on a batch of frame sequences.

        Args:
            frames: (B, L, 3, H, W) images in [0, 1]
            deterministic: Use z = mu instead of sampling
            generator: Source of the reparameterization noise

        Returns:
            ModelOutput with one entry per timestep
        """
        if frames.dim() != 5:
            raise ValueError(f"Expected (B, L, 3, H, W) frames, got shape {tuple(frames.shape)}")
        batch, length = frames.shape[:2]
        if length == 0:
            raise ValueError("Cannot run the model on an empty sequence")

        hidden = self.core(self.encode_frames(frames))
        mu, logvar = self.latent_heads(hidden)
        z = mu if deterministic else reparameterize(mu, logvar, generator)

        recon = None
        if self.decoder is not None:
            recon = self.decoder(z.reshape(batch * length, -1))
            recon = recon.view(batch, length, *recon.shape[1:])
        return ModelOutput(recon=recon, latent=LatentState(mu, logvar, z), coords=self.coord_head(z))

    @torch.no_grad()
    def predict_coords(self, frames: torch.Tensor) -> torch.Tensor:
        """Deterministic normalized coordinates for every timestep, (B, L, 2)."""
        was_training = self.training
        self.eval()
        try:
            return self.forward(frames, deterministic=True).coords
        finally:
            self.train(was_training)


def parameter_count(model_or_config: Union[nn.Module, ModelConfig]) -> int:
    """Exact number of trainable scalars."""
    model = model_or_config
    if isinstance(model_or_config, ModelConfig):
        model = SpatialTemporalModel(model_or_config)
    return sum(p.numel() for p in model.parameters() if p.requires_grad)


def layer_table(model: nn.Module) -> pd.DataFrame:
    """Parameter count of every module that owns parameters directly."""
    rows = []
    for name, module in model.named_modules():
        count = sum(p.numel() for p in module.parameters(recurse=False) if p.requires_grad)
        if count:
            rows.append({'module': name, 'type': type(module).__name__, 'parameters': count})
    return pd.DataFrame(rows, columns=['module', 'type', 'parameters'])
