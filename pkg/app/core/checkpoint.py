"""JSON checkpoints: parameter name -> {shape, data, frozen}.

Floats are written with python's shortest round-trip repr, so a save/load
cycle reproduces every float64 bit for bit.
"""
import json
import logging
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)


class CheckpointError(ValueError):
    """Checkpoint contents do not match the model's parameters."""


def to_document(store):
    return {
        param.name: {
            'shape': list(param.shape),
            'data': [float(x) for x in param.data.reshape(-1)],
            'frozen': param.frozen,
        }
        for param in store
    }


def from_document(store, document):
    """Copy values from a checkpoint document into `store` in place."""
    missing = [name for name in store.names() if name not in document]
    extra = [name for name in document if name not in store]
    if missing or extra:
        raise CheckpointError(
            f'Checkpoint does not match the model: missing {missing}, '
            f'unexpected {extra}.'
        )
    for param in store:
        entry = document[param.name]
        shape = tuple(entry['shape'])
        if shape != param.shape:
            raise CheckpointError(
                f'Parameter {param.name!r} has shape {param.shape}, '
                f'checkpoint holds {shape}.'
            )
        values = np.asarray(entry['data'], dtype=np.float64)
        param.data[...] = values.reshape(shape)


def save_checkpoint(store, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8') as fh:
        json.dump(to_document(store), fh)
    logger.info('saved %d parameters to %s', len(store), path)


def load_checkpoint(store, path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f'Checkpoint {path} does not exist.')
    with path.open(encoding='utf-8') as fh:
        from_document(store, json.load(fh))
    logger.info('loaded %d parameters from %s', len(store), path)
