"""
Training objective: map reconstruction + annealed KL + coordinate distance.
"""
import math
from dataclasses import dataclass
from typing import Dict, Optional

import torch

from ..errors import NonFiniteLossError
from ..model import ModelOutput


def recon_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean squared error over batch, timesteps, pixels and channels."""
    return torch.mean((pred - target) ** 2)


def kl_loss(mu: torch.Tensor, logvar: torch.Tensor) -> torch.Tensor:
    """KL(N(mu, exp(logvar)) || N(0, I)) summed over latent dims, averaged over batch and time."""
    return torch.mean(0.5 * torch.sum(mu ** 2 + torch.exp(logvar) - 1.0 - logvar, dim=-1))


def coord_loss(pred: torch.Tensor, truth: torch.Tensor) -> torch.Tensor:
    """Mean Euclidean distance between normalized coordinates."""
    return torch.mean(torch.linalg.vector_norm(pred - truth, dim=-1))


def beta_schedule(step: int, anneal_steps: int) -> float:
    """Linear KL weight: 0 at step 0, 1 from anneal_steps on."""
    if anneal_steps <= 0:
        return 1.0
    return min(max(step / anneal_steps, 0.0), 1.0)


@dataclass
class LossBreakdown:
    kl: torch.Tensor
    coord: torch.Tensor
    beta: float
    total: torch.Tensor
    recon: Optional[torch.Tensor] = None

    def check_finite(self, step: int) -> None:
        for term in ('recon', 'kl', 'coord', 'total'):
            value = getattr(self, term)
            if value is not None and not math.isfinite(float(value)):
                raise NonFiniteLossError(term, step, float(value))

    def as_floats(self) -> Dict[str, float]:
        values = {'kl': float(self.kl), 'coord': float(self.coord), 'total': float(self.total)}
        if self.recon is not None:
            values['recon'] = float(self.recon)
        return values


def total_loss(output: ModelOutput, batch: Dict[str, torch.Tensor], beta: float) -> LossBreakdown:
    """Combine the three terms; the reconstruction term is dropped when the model has no decoder.

    Args:
        output: Model output for the batch
        batch: Dict with 'gmp' (B, L, 3, H, W) and 'coords' (B, L, 2) targets
        beta: KL weight for this step

    Returns:
        LossBreakdown whose total is recon + beta * kl + coord
    """
    kl = kl_loss(output.latent.mu, output.latent.logvar)
    coord = coord_loss(output.coords, batch['coords'])
    total = beta * kl + coord
    recon = None
    if output.recon is not None:
        recon = recon_loss(output.recon, batch['gmp'])
        total = recon + total
    return LossBreakdown(kl=kl, coord=coord, beta=beta, total=total, recon=recon)
