"""
Run configuration: one JSON document deep-merged over the package defaults.

Sections: world, sensors, dataset, model, train, inference, eval, search, plus
output_dir and seeds. The hash of the merged document is stamped on every artifact.
"""
import copy
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

from ..config import (
    DATASET_CONFIG,
    EVAL_CONFIG,
    INFERENCE_CONFIG,
    SEARCH_CONFIG,
    SENSOR_CONFIG,
    TRAIN_CONFIG,
    get_env_config,
)
from ..errors import ConfigValidationError
from ..model import ModelConfig
from ..training import TrainConfig
from ..worldsim import SensorNoiseSpec, WorldSpec

logger = logging.getLogger(__name__)

# Sections whose contents are validated by their own from_dict
_OPEN_SECTIONS = ('world', 'model')
# Values replaced wholesale instead of merged key by key
_LEAF_KEYS = ('space', 'bounds')
# Model fields that must agree with the dataset they are trained on
_SHARED_DATA_KEYS = ('seq_len', 'fpp_size', 'gmp_size')


def default_document() -> Dict[str, Any]:
    """Package defaults as a plain JSON-compatible document."""
    return copy.deepcopy({
        'world': {'preset': 'campus'},
        'sensors': SENSOR_CONFIG,
        'dataset': DATASET_CONFIG,
        'model': {'preset': 'desk'},
        'train': TRAIN_CONFIG,
        'inference': INFERENCE_CONFIG,
        'eval': EVAL_CONFIG,
        'search': SEARCH_CONFIG,
        'output_dir': get_env_config()['OUT_DIR'],
        'seeds': [1, 2, 3],
    })


def deep_merge(base: Dict[str, Any], override: Mapping[str, Any], path: str = '') -> Dict[str, Any]:
    """Merge override into a copy of base; keys unknown to base are rejected.

    Open sections accept any key (their owners validate them); leaf keys replace.
    """
    merged = copy.deepcopy(base)
    for key, value in override.items():
        where = f'{path}.{key}' if path else key
        if key not in merged and path.split('.')[0] not in _OPEN_SECTIONS:
            raise ConfigValidationError(f"Unknown configuration key '{where}'")
        current = merged.get(key)
        if isinstance(current, dict) and isinstance(value, Mapping) and key not in _LEAF_KEYS:
            merged[key] = deep_merge(current, value, where)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def config_hash(document: Mapping[str, Any]) -> str:
    """First 16 hex chars of SHA-256 over the canonical JSON of the document."""
    canonical = json.dumps(document, sort_keys=True, separators=(',', ':'), default=str)
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()[:16]


@dataclass(frozen=True)
class RunConfig:
    world: WorldSpec
    sensors: SensorNoiseSpec
    dataset: Dict[str, Any]
    model: ModelConfig
    train: TrainConfig
    inference: Dict[str, Any]
    eval: Dict[str, Any]
    search: Dict[str, Any]
    output_dir: Path
    seeds: List[int]
    document: Dict[str, Any] = field(repr=False, default_factory=dict)
    config_hash: str = ''

    @property
    def frame_interval_s(self) -> float:
        return float(self.dataset['frame_interval_s'])

    @classmethod
    def from_document(cls, overrides: Optional[Mapping[str, Any]] = None) -> 'RunConfig':
        """Validate a (partial) document merged over the defaults."""
        document = deep_merge(default_document(), overrides or {})

        seeds = document['seeds']
        if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) for s in seeds):
            raise ConfigValidationError(f"seeds must be a non-empty list of integers, got {seeds!r}")

        dataset = document['dataset']
        model_section = dict(document['model'])
        for key in _SHARED_DATA_KEYS:
            if key in model_section and list(_as_list(model_section[key])) != list(_as_list(dataset[key])):
                raise ConfigValidationError(
                    f"model.{key} = {model_section[key]} disagrees with dataset.{key} = {dataset[key]}"
                )
            model_section[key] = dataset[key]

        try:
            config = cls(
                world=WorldSpec.from_dict(document['world']),
                sensors=SensorNoiseSpec.from_dict(document['sensors']),
                dataset=dataset,
                model=ModelConfig.from_dict(model_section),
                train=TrainConfig.from_dict(document['train']),
                inference=document['inference'],
                eval=document['eval'],
                search=document['search'],
                output_dir=Path(document['output_dir']),
                seeds=list(seeds),
                document=document,
                config_hash=config_hash(document),
            )
        except (KeyError, TypeError) as e:
            raise ConfigValidationError(f"Malformed configuration: {e}") from e
        logger.debug(f"Run configuration {config.config_hash} validated")
        return config

    @classmethod
    def load(cls, path: Optional[Union[str, Path]] = None,
             overrides: Optional[Mapping[str, Any]] = None) -> 'RunConfig':
        """Read a JSON config file (optional), then apply command-line overrides."""
        document: Dict[str, Any] = {}
        if path is not None:
            try:
                with open(path, 'r', encoding='utf-8') as f:
                    document = json.load(f)
            except FileNotFoundError as e:
                raise ConfigValidationError(f"Config file not found: {path}") from e
            except json.JSONDecodeError as e:
                raise ConfigValidationError(f"Config file {path} is not valid JSON: {e}") from e
            if not isinstance(document, dict):
                raise ConfigValidationError(f"Config file {path} must hold a JSON object")
        if overrides:
            document = _overlay(document, overrides)
        return cls.from_document(document)

    def write(self, path: Path) -> Path:
        """Write the merged document next to the artifacts it produced."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump({**self.document, 'config_hash': self.config_hash}, f, indent=2, sort_keys=True)
        return path


def _as_list(value: Any) -> List[Any]:
    return list(value) if isinstance(value, (list, tuple)) else [value]


def _overlay(document: Dict[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    result = copy.deepcopy(document)
    for key, value in overrides.items():
        if isinstance(value, Mapping) and isinstance(result.get(key), dict):
            result[key] = _overlay(result[key], value)
        else:
            result[key] = copy.deepcopy(value)
    return result
