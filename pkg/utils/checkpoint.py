"""Checkpoint directories: one HTSR file per named tensor plus a YAML manifest."""
import logging
from pathlib import Path
from typing import Any, Optional, Union

import yaml

from models.configs import ModelConfig
from network.hiperformer import HiPerformer
from tensor.serialization import VERSION, TensorFormatError, load_tensor, save_tensor, tag_for

logger = logging.getLogger(__name__)

MANIFEST = 'manifest.yaml'


class CheckpointError(ValueError):
    """Raised when a checkpoint directory is incomplete or does not match its manifest."""


def save_checkpoint(
    model: HiPerformer,
    directory: Union[str, Path],
    step: int = 0,
    extra: Optional[dict[str, Any]] = None
) -> Path:
    """
    Write every parameter and buffer of ``model`` to ``directory``.

    Args:
        model: Network to save
        directory: Target directory (created if missing)
        step: Optimizer step stored in the manifest
        extra: Additional manifest entries (e.g. loss/train settings)

    Returns:
        Path of the written manifest
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    state = model.state_dict()

    tensors = {}
    for name in sorted(state):
        save_tensor(directory / f'{name}.htsr', state[name], dtype_tag=tag_for(state[name]))
        tensors[name] = list(state[name].shape)

    manifest = {
        'format': {'name': 'HTSR', 'version': VERSION},
        'step': step,
        'model': model.cfg.model_dump(mode='json'),
        'tensors': tensors,
    }
    if extra:
        manifest['extra'] = extra

    path = directory / MANIFEST
    with open(path, 'w') as f:
        yaml.safe_dump(manifest, f, sort_keys=True)
    logger.info("saved %d tensors to %s", len(tensors), directory)
    return path


def read_manifest(directory: Union[str, Path]) -> dict[str, Any]:
    path = Path(directory) / MANIFEST
    if not path.exists():
        raise CheckpointError(f"no {MANIFEST} in {directory}")
    with open(path, 'r') as f:
        manifest = yaml.safe_load(f)
    if not isinstance(manifest, dict) or 'model' not in manifest or 'tensors' not in manifest:
        raise CheckpointError(f"{path} is missing the model or tensors section")
    return manifest


def load_checkpoint(directory: Union[str, Path]) -> tuple[HiPerformer, dict[str, Any]]:
    """Rebuild the model described by the manifest and load its tensors."""
    directory = Path(directory)
    manifest = read_manifest(directory)
    cfg = ModelConfig(**manifest['model'])
    model = HiPerformer(cfg)

    state = {}
    for name, shape in manifest['tensors'].items():
        path = directory / f'{name}.htsr'
        if not path.exists():
            raise CheckpointError(f"missing tensor file {path.name}")
        try:
            value = load_tensor(path)
        except TensorFormatError as exc:
            raise CheckpointError(f"{path.name}: {exc}") from exc
        if list(value.shape) != list(shape):
            raise CheckpointError(f"{name}: manifest says {shape}, file holds {list(value.shape)}")
        state[name] = value

    try:
        model.load_state_dict(state)
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"checkpoint does not match the configured model: {exc}") from exc
    model.eval()
    return model, manifest
