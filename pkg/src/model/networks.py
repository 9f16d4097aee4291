"""
Network components: frame encoder, sequence cores, latent heads, map decoder, coordinate head.
"""
import logging
import math
from typing import Optional, Sequence, Tuple

import torch
import torch.nn as nn

logger = logging.getLogger(__name__)


class FrameEncoder(nn.Module):
    """Stride-2 convolutions followed by a linear projection of the flattened map."""

    def __init__(self, channels: Sequence[int], kernel: int, image_size: Tuple[int, int], out_dim: int):
        super().__init__()
        width, height = image_size
        self.image_shape = (3, height, width)
        layers, in_ch = [], 3
        for ch in channels:
            layers += [nn.Conv2d(in_ch, ch, kernel, stride=2, padding=kernel // 2), nn.SiLU()]
            in_ch = ch
        self.conv = nn.Sequential(*layers)
        with torch.no_grad():
            flat = self.conv(torch.zeros(1, *self.image_shape)).numel()
        self.proj = nn.Linear(flat, out_dim)

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        if tuple(images.shape[1:]) != self.image_shape:
            raise ValueError(f"Expected frames of shape {self.image_shape}, got {tuple(images.shape[1:])}")
        return self.proj(self.conv(images).flatten(1))


class SinusoidalPositionEncoding(nn.Module):
    def __init__(self, d_model: int, max_len: int):
        super().__init__()
        position = torch.arange(max_len, dtype=torch.float64)[:, None]
        div = torch.exp(torch.arange(0, d_model, 2, dtype=torch.float64) * (-math.log(10000.0) / d_model))
        pe = torch.zeros(max_len, d_model, dtype=torch.float64)
        pe[:, 0::2] = torch.sin(position * div)
        pe[:, 1::2] = torch.cos(position * div)[:, :d_model // 2]
        self.register_buffer('pe', pe.to(torch.get_default_dtype()), persistent=False)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x + self.pe[:x.size(1)].to(x.dtype)


class CausalTransformerCore(nn.Module):
    """Pre-norm transformer encoder where step t only attends to steps <= t."""

    def __init__(self, d_model: int, n_heads: int, n_layers: int, ff_mult: int, dropout: float, max_len: int):
        super().__init__()
        self.max_len = max_len
        self.position = SinusoidalPositionEncoding(d_model, max_len)
        layer = nn.TransformerEncoderLayer(
            d_model=d_model,
            nhead=n_heads,
            dim_feedforward=d_model * ff_mult,
            dropout=dropout,
            batch_first=True,
            norm_first=True,
            activation='gelu',
        )
        self.encoder = nn.TransformerEncoder(layer, num_layers=n_layers, norm=nn.LayerNorm(d_model),
                                             enable_nested_tensor=False)

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        length = features.size(1)
        if length == 0 or length > self.max_len:
            raise ValueError(f"Sequence length {length} outside [1, {self.max_len}]")
        mask = torch.triu(torch.ones(length, length, device=features.device, dtype=torch.bool), diagonal=1)
        return self.encoder(self.position(features), mask=mask)


class RecurrentCore(nn.Module):
    """GRU unrolled left to right."""

    def __init__(self, input_dim: int, hidden: int, n_layers: int, dropout: float, max_len: int):
        super().__init__()
        self.max_len = max_len
        self.rnn = nn.GRU(input_dim, hidden, num_layers=n_layers, batch_first=True,
                          dropout=dropout if n_layers > 1 else 0.0)

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        length = features.size(1)
        if length == 0 or length > self.max_len:
            raise ValueError(f"Sequence length {length} outside [1, {self.max_len}]")
        hidden, _ = self.rnn(features)
        return hidden


class LatentHeads(nn.Module):
    def __init__(self, hidden_dim: int, latent_dim: int):
        super().__init__()
        self.mu = nn.Linear(hidden_dim, latent_dim)
        self.logvar = nn.Linear(hidden_dim, latent_dim)

    def forward(self, hidden: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        return self.mu(hidden), self.logvar(hidden)


def reparameterize(mu: torch.Tensor, logvar: torch.Tensor,
                   generator: Optional[torch.Generator] = None) -> torch.Tensor:
    """z = mu + exp(logvar / 2) * eps with eps ~ N(0, I)."""
    eps = torch.randn(mu.shape, generator=generator, dtype=mu.dtype, device=mu.device)
    return mu + torch.exp(0.5 * logvar) * eps


class GmpDecoder(nn.Module):
    """Latent -> seed map -> doubling transpose convolutions -> RGB in [0, 1]."""

    def __init__(self, latent_dim: int, channels: Sequence[int], kernel: int, seed_size: int,
                 image_size: Tuple[int, int]):
        super().__init__()
        self.seed_shape = (channels[0], seed_size, seed_size)
        self.width, self.height = image_size
        self.fc = nn.Linear(latent_dim, channels[0] * seed_size * seed_size)
        layers = []
        for c_in, c_out in zip(channels[:-1], channels[1:]):
            layers += [
                nn.ConvTranspose2d(c_in, c_out, kernel, stride=2, padding=kernel // 2, output_padding=1),
                nn.SiLU(),
            ]
        layers.append(nn.ConvTranspose2d(channels[-1], 3, kernel, stride=1, padding=kernel // 2))
        self.deconv = nn.Sequential(*layers)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        x = nn.functional.silu(self.fc(z)).view(-1, *self.seed_shape)
        x = torch.sigmoid(self.deconv(x))
        top = (x.size(2) - self.height) // 2
        left = (x.size(3) - self.width) // 2
        return x[:, :, top:top + self.height, left:left + self.width]


class CoordinateHead(nn.Module):
    """MLP from the latent to unclamped normalized (u, v)."""

    def __init__(self, latent_dim: int, hidden: Sequence[int]):
        super().__init__()
        layers, width = [], latent_dim
        for h in hidden:
            layers += [nn.Linear(width, h), nn.SiLU()]
            width = h
        layers.append(nn.Linear(width, 2))
        self.mlp = nn.Sequential(*layers)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        return self.mlp(z)


def init_weights(model: nn.Module) -> None:
    """Fan-in scaled uniform init, U(-sqrt(3 / fan_in), sqrt(3 / fan_in)), with zero biases."""
    for module in model.modules():
        if isinstance(module, (nn.Linear, nn.Conv2d, nn.ConvTranspose2d)):
            fan_in, _ = nn.init._calculate_fan_in_and_fan_out(module.weight)
            bound = math.sqrt(3.0 / fan_in)
            nn.init.uniform_(module.weight, -bound, bound)
            if module.bias is not None:
                nn.init.zeros_(module.bias)
        elif isinstance(module, nn.MultiheadAttention) and module.in_proj_weight is not None:
            bound = math.sqrt(3.0 / module.in_proj_weight.size(1))
            nn.init.uniform_(module.in_proj_weight, -bound, bound)
            if module.in_proj_bias is not None:
                nn.init.zeros_(module.in_proj_bias)
