"""Synthetic composed-retrieval triplets with a known latent structure.

An image is a set of objects drawn from `n_attributes` object types. Its
latent is one coordinate per type, at 0.75 when the object is present and
0.25 when it is absent, and its token sequence lists the present types in
increasing order. A text names one absent type and adds it:

    target = reference + e_a / 2 + noise

Every reference holds `objects` objects, so every target holds one more.
Validation targets are distinct images, and each validation record carries
the ids of the nearest validation targets as its subset.
"""
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from rest_framework import serializers

from retrieval.serializers import TripletRecordSerializer

logger = logging.getLogger(__name__)

TRAIN_PREFIX = 'train'
VAL_PREFIX = 'val'
MAX_DRAWS_PER_RECORD = 1000

ABSENT = 0.25
PRESENT = 0.75
THRESHOLD = 0.5


class DatasetError(ValueError):
    """Dataset contents or files violate the record contract."""


@dataclass(frozen=True)
class TripletRecord:
    id: str
    ref_tokens: tuple
    text_tokens: tuple
    target_tokens: tuple
    subset_ids: tuple = None

    def as_dict(self):
        return {
            'id': self.id,
            'ref_tokens': list(self.ref_tokens),
            'text_tokens': list(self.text_tokens),
            'target_tokens': list(self.target_tokens),
            'subset_ids': None if self.subset_ids is None
            else list(self.subset_ids),
        }


@dataclass(frozen=True)
class SynthSpec:
    image_vocab: int
    text_vocab: int
    n_train: int
    n_val: int
    n_attributes: int
    objects: int = 4
    text_len: int = 2
    noise_sigma: float = 0.05
    seed: int = 0
    subset_size: int = 5

    def __post_init__(self):
        for name in ('image_vocab', 'text_vocab', 'n_train', 'n_val',
                     'n_attributes', 'objects', 'text_len', 'subset_size'):
            if getattr(self, name) < 1:
                raise ValueError(f'{name} must be at least 1.')
        if self.objects >= self.n_attributes:
            raise ValueError('objects must leave at least one type absent.')
        if self.noise_sigma < 0:
            raise ValueError('noise_sigma must be non-negative.')

    @classmethod
    def from_config(cls, config):
        return cls(
            image_vocab=config.image_vocab,
            text_vocab=config.text_vocab,
            n_train=config.n_train,
            n_val=config.n_val,
            n_attributes=config.n_attributes,
            objects=config.objects,
            text_len=config.text_len,
            noise_sigma=config.noise_sigma,
            seed=config.seed,
            subset_size=config.subset_size,
        )

    def check_vocabulary(self):
        if self.image_vocab < self.n_attributes:
            raise ValueError(
                f'image_vocab={self.image_vocab} cannot encode '
                f'{self.n_attributes} object types.'
            )
        needed = self.n_attributes + (1 if self.text_len > 1 else 0)
        if self.text_vocab < needed:
            raise ValueError(
                f'text_vocab={self.text_vocab} cannot encode '
                f'{self.n_attributes} directions plus filler words '
                f'(needs {needed}).'
            )
        if self.subset_size > self.n_val:
            raise ValueError('subset_size exceeds the validation set.')
        if math.comb(self.n_attributes, self.objects + 1) < self.n_val:
            raise ValueError(
                f'Only {math.comb(self.n_attributes, self.objects + 1)} '
                f'distinct targets exist for n_val={self.n_val}.'
            )


@dataclass
class SyntheticWorld:
    """Records plus the latent coordinates they were drawn from."""
    spec: SynthSpec
    train: list = field(default_factory=list)
    val: list = field(default_factory=list)
    reference_latents: dict = field(default_factory=dict)
    target_latents: dict = field(default_factory=dict)
    directions: dict = field(default_factory=dict)

    def shift(self, direction):
        step = np.zeros(self.spec.n_attributes)
        step[direction] = PRESENT - ABSENT
        return step


def image_tokens(latent):
    """Ids of the present object types, in increasing order."""
    return tuple(int(a) for a in np.flatnonzero(latent >= THRESHOLD))


def latent_distances(point, points):
    """Euclidean distance from `point` to each row of `points`."""
    return np.sqrt(((points - point) ** 2).sum(axis=1))


def _draw(world, rng, record_id, taken=None):
    spec = world.spec
    for _ in range(MAX_DRAWS_PER_RECORD):
        present = rng.choice(spec.n_attributes, size=spec.objects,
                             replace=False)
        reference = np.full(spec.n_attributes, ABSENT)
        reference[present] = PRESENT
        absent = np.flatnonzero(reference < THRESHOLD)
        direction = int(absent[rng.integers(len(absent))])
        noise = rng.normal(0.0, 1.0, size=spec.n_attributes) * spec.noise_sigma
        target = reference + world.shift(direction) + noise
        fillers = rng.integers(spec.n_attributes, spec.text_vocab,
                               size=spec.text_len - 1) \
            if spec.text_len > 1 else np.empty(0, dtype=np.int64)
        ref_tokens = image_tokens(reference)
        target_tokens = image_tokens(target)
        # noise may not flip any object in or out
        if target_tokens != tuple(sorted(ref_tokens + (direction,))):
            continue
        if taken is not None and target_tokens in taken:
            continue
        world.reference_latents[record_id] = reference
        world.target_latents[record_id] = target
        world.directions[record_id] = direction
        return TripletRecord(
            id=record_id,
            ref_tokens=ref_tokens,
            text_tokens=(direction,) + tuple(int(t) for t in fillers),
            target_tokens=target_tokens,
        )
    raise ValueError(
        'Could not draw distinct validation targets; too few object types '
        'for n_val.'
    )


def _with_subsets(world, records):
    ids = [r.id for r in records]
    latents = np.stack([world.target_latents[i] for i in ids])
    size = world.spec.subset_size
    out = []
    for index, record in enumerate(records):
        distances = latent_distances(latents[index], latents)
        distances[index] = -1.0
        nearest = np.argsort(distances, kind='stable')[:size]
        subset = tuple(ids[i] for i in nearest)
        out.append(TripletRecord(
            id=record.id,
            ref_tokens=record.ref_tokens,
            text_tokens=record.text_tokens,
            target_tokens=record.target_tokens,
            subset_ids=subset,
        ))
    return out


def build_world(spec):
    """Draw train then validation records from one seeded generator."""
    spec.check_vocabulary()
    world = SyntheticWorld(spec)
    rng = np.random.default_rng(spec.seed)
    world.train = [
        _draw(world, rng, f'{TRAIN_PREFIX}-{i:05d}')
        for i in range(spec.n_train)
    ]
    taken, val = set(), []
    for i in range(spec.n_val):
        record = _draw(world, rng, f'{VAL_PREFIX}-{i:05d}', taken)
        taken.add(record.target_tokens)
        val.append(record)
    world.val = _with_subsets(world, val)
    logger.info('generated %d train and %d val triplets',
                len(world.train), len(world.val))
    return world


def generate(spec):
    """(train, val) record lists; identical for identical specs."""
    world = build_world(spec)
    return world.train, world.val


def batches(records, batch_size, seed, epoch=0):
    """Shuffled batches of one epoch; the final short batch is dropped."""
    if not records:
        raise DatasetError('Cannot batch an empty dataset.')
    if batch_size < 1:
        raise ValueError('batch_size must be at least 1.')
    order = np.random.default_rng([seed, epoch]).permutation(len(records))
    for start in range(0, len(order) - batch_size + 1, batch_size):
        yield [records[i] for i in order[start:start + batch_size]]


def write_jsonl(path, records):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8') as fh:
        for record in records:
            fh.write(json.dumps(record.as_dict()) + '\n')
    logger.info('wrote %d records to %s', len(records), path)


def read_jsonl(path):
    """Load and validate TripletRecords from a JSON Lines file."""
    path = Path(path)
    if not path.exists():
        raise DatasetError(f'Dataset file {path} does not exist.')
    records, seen = [], set()
    with path.open(encoding='utf-8') as fh:
        for number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                serializer = TripletRecordSerializer(data=json.loads(line))
                serializer.is_valid(raise_exception=True)
            except (json.JSONDecodeError, serializers.ValidationError) as exc:
                raise DatasetError(f'{path}:{number}: {exc}') from exc
            record = TripletRecord(**serializer.validated_data)
            if record.id in seen:
                raise DatasetError(
                    f'{path}:{number}: duplicate id {record.id!r}')
            seen.add(record.id)
            records.append(record)
    if not records:
        raise DatasetError(f'Dataset file {path} holds no records.')
    return records
