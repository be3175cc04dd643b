import json
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from core.checkpoint import (
    CheckpointError, load_checkpoint, save_checkpoint,
)
from core.params import ParamStore


def sample_store(seed=0, cols=2):
    store = ParamStore(seed)
    store.create('a.w', (2, cols), std=1.0)
    store.create('b.w', (1, 3), std=1e-7, frozen=True)
    return store


class CheckpointTests(SimpleTestCase):
    """Test saving and loading parameter checkpoints."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = Path(self.tmp.name) / 'ckpt' / 'model.json'

    def tearDown(self):
        self.tmp.cleanup()

    def test_round_trip_is_bit_exact(self):
        """Test every float64 survives save and load unchanged."""
        source = sample_store(seed=1)
        save_checkpoint(source, self.path)
        target = sample_store(seed=2)
        load_checkpoint(target, self.path)

        for name in source.names():
            self.assertEqual(source[name].data.tobytes(),
                             target[name].data.tobytes())

    def test_document_layout(self):
        """Test each entry holds shape, flat data and the frozen flag."""
        save_checkpoint(sample_store(), self.path)
        document = json.loads(self.path.read_text())

        self.assertEqual(document['a.w']['shape'], [2, 2])
        self.assertEqual(len(document['a.w']['data']), 4)
        self.assertTrue(document['b.w']['frozen'])

    def test_missing_file(self):
        """Test loading an absent checkpoint is an IO error."""
        with self.assertRaises(FileNotFoundError):
            load_checkpoint(sample_store(), self.path)

    def test_shape_mismatch(self):
        """Test a checkpoint with other shapes is rejected."""
        save_checkpoint(sample_store(cols=3), self.path)

        with self.assertRaises(CheckpointError):
            load_checkpoint(sample_store(cols=2), self.path)

    def test_unexpected_parameter(self):
        """Test a checkpoint with extra names is rejected."""
        store = sample_store()
        store.create('c.w', (1, 1), std=1.0)
        save_checkpoint(store, self.path)

        with self.assertRaises(CheckpointError):
            load_checkpoint(sample_store(), self.path)

    def test_load_keeps_param_objects(self):
        """Test loading writes into the existing arrays."""
        store = sample_store()
        array = store['a.w'].data
        save_checkpoint(sample_store(seed=5), self.path)
        load_checkpoint(store, self.path)

        self.assertIs(store['a.w'].data, array)
        np.testing.assert_array_equal(array, sample_store(seed=5)['a.w'].data)
