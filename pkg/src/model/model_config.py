"""
Architecture hyperparameters for the sequence localization models.
"""
from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, Tuple

from ..config import MODEL_PRESETS
from ..errors import ConfigValidationError

VARIANTS = ('transformer', 'rnn')


@dataclass(frozen=True)
class ModelConfig:
    variant: str = 'transformer'
    enc_channels: Tuple[int, ...] = (16, 32, 32, 32)
    enc_kernel: int = 3
    dec_channels: Tuple[int, ...] = (512, 256, 128, 64, 32)
    dec_kernel: int = 3
    dec_seed_size: int = 4
    latent_dim: int = 1000
    d_model: int = 256
    n_heads: int = 16
    n_layers: int = 8
    ff_mult: int = 4
    rnn_hidden: int = 256
    rnn_layers: int = 1
    coord_hidden: Tuple[int, ...] = (256, 64)
    seq_len: int = 24
    fpp_size: Tuple[int, int] = (64, 64)    # (W, H)
    gmp_size: Tuple[int, int] = (64, 64)
    logvar_init: float = -6.0          # initial log-variance bias of the posterior
    dropout: float = 0.0
    reconstruction_enabled: bool = True

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigValidationError(f"Unknown variant '{self.variant}'. Use: {list(VARIANTS)}")
        if self.latent_dim <= 0:
            raise ConfigValidationError(f"latent_dim must be positive, got {self.latent_dim}")
        if self.d_model <= 0 or self.n_heads <= 0 or self.d_model % self.n_heads:
            raise ConfigValidationError(f"d_model {self.d_model} must be divisible by n_heads {self.n_heads}")
        if self.seq_len < 1:
            raise ConfigValidationError(f"seq_len must be at least 1, got {self.seq_len}")
        if not self.enc_channels or len(self.dec_channels) < 2:
            raise ConfigValidationError("Need at least one encoder layer and two decoder channel widths")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigValidationError(f"dropout must lie in [0, 1), got {self.dropout}")
        upsampled = self.dec_seed_size * 2 ** (len(self.dec_channels) - 1)
        if upsampled < max(self.gmp_size):
            raise ConfigValidationError(
                f"Decoder reaches {upsampled} px from a {self.dec_seed_size} px seed, "
                f"smaller than the GMP size {self.gmp_size}"
            )

    @property
    def feature_dim(self) -> int:
        """Width of the per-frame features fed to the sequence core."""
        return self.d_model if self.variant == 'transformer' else self.rnn_hidden

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ModelConfig':
        data = dict(data)
        preset = data.pop('preset', None)
        merged: Dict[str, Any] = {}
        if preset is not None:
            if preset not in MODEL_PRESETS:
                raise ConfigValidationError(f"Unknown model preset '{preset}'. Use: {list(MODEL_PRESETS)}")
            merged.update(MODEL_PRESETS[preset])
        merged.update(data)
        unknown = set(merged) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigValidationError(f"Unknown model settings: {sorted(unknown)}")
        for key in ('enc_channels', 'dec_channels', 'coord_hidden', 'fpp_size', 'gmp_size'):
            if key in merged:
                merged[key] = tuple(int(v) for v in merged[key])
        return cls(**merged)

    @classmethod
    def from_preset(cls, name: str, **overrides: Any) -> 'ModelConfig':
        return cls.from_dict({'preset': name, **overrides})

    def to_dict(self) -> Dict[str, Any]:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}
