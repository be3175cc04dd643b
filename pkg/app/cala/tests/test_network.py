from unittest.mock import patch

import numpy as np
from django.test import SimpleTestCase

from core.config import PURE, load_config
from cala import hca, tac
from cala.evaluation import evaluate
from cala.network import CalaNetwork, REFERENCE, TARGET
from cala.trainer import mean_loss, train
from retrieval.synth import SynthSpec, generate

TRAINABLE = ('text_encoder', 'cross_encoder', 'qformer', 'hca', 'tac')
FROZEN = ('reference_encoder', 'target_encoder')


def sample_config(**overrides):
    values = {
        'dim': 8, 'max_tokens': 8, 'prompts': 2, 'tac_layers': 1,
        'batch_size': 4, 'epochs': 2, 'n_train': 24, 'n_val': 10,
        'learning_rate': 5e-3,
    }
    values.update(overrides)
    return load_config(overrides=values)


def sample_data(config):
    return generate(SynthSpec.from_config(config))


def snapshot(network, groups):
    return {p.name: p.data.copy()
            for g in groups for p in network.store.group(g)}


class NetworkTests(SimpleTestCase):
    """Test the assembled model."""

    def setUp(self):
        self.config = sample_config()
        self.train_set, self.val_set = sample_data(self.config)

    def test_parameter_groups(self):
        """Test groups appear in creation order with frozen image encoders."""
        network = CalaNetwork(self.config)

        self.assertEqual(network.store.groups(), list(FROZEN + TRAINABLE))
        for group in FROZEN:
            self.assertEqual(network.store.count(group), 0)

    def test_same_seed_same_parameters(self):
        """Test the seed fully determines initial values."""
        a, b = CalaNetwork(self.config), CalaNetwork(self.config)
        for name in a.store.names():
            np.testing.assert_array_equal(a.store[name].data,
                                          b.store[name].data)

    def test_feature_shapes(self):
        """Test per-triplet features have the expected shapes."""
        record = self.train_set[0]
        feats = CalaNetwork(self.config).features(record)
        image_rows = len(record.ref_tokens) + 1

        self.assertEqual(feats.f_r.shape, (image_rows, 8))
        self.assertEqual(feats.f_c.shape, (len(record.text_tokens), 8))
        self.assertEqual(feats.f_r_bar.shape, feats.f_r.shape)
        self.assertEqual(feats.f_r_prime.shape, feats.f_r.shape)

    def test_unknown_image_branch(self):
        """Test only the reference and target branches exist."""
        network = CalaNetwork(self.config)
        self.assertNotEqual(REFERENCE, TARGET)
        with self.assertRaises(ValueError):
            network.encode_image(None, 'sideways')

    def test_losses_breakdown(self):
        """Test the total is the weighted sum of the logged terms."""
        loss, parts = CalaNetwork(self.config).losses(self.train_set[:4])

        self.assertAlmostEqual(
            parts.total, parts.qtm + 0.45 * parts.tbia + 0.1 * parts.ctr,
            places=12)
        self.assertEqual(loss.item(), parts.total)

    def test_empty_batch(self):
        """Test an empty batch is rejected."""
        with self.assertRaises(ValueError):
            CalaNetwork(self.config).losses([])

    def test_gradients_reach_every_trainable_group(self):
        """Test one backward pass touches each trainable component."""
        network = CalaNetwork(self.config)
        loss, _ = network.losses(self.train_set[:3])
        loss.backward()

        for group in TRAINABLE:
            total = sum(np.abs(p.grad).sum()
                        for p in network.store.group(group)
                        if p.grad is not None)
            self.assertGreater(total, 0.0, group)
        for group in FROZEN:
            for param in network.store.group(group):
                self.assertIsNone(param.grad)

    def test_pure_reference_features(self):
        """Test the pure flag changes the alignment term only."""
        batch = self.train_set[:3]
        _, attentive = CalaNetwork(self.config).losses(batch)
        _, pure = CalaNetwork(
            self.config.updated(reference_features=PURE)).losses(batch)

        self.assertEqual(attentive.qtm, pure.qtm)
        self.assertEqual(attentive.ctr, pure.ctr)
        self.assertNotEqual(attentive.tbia, pure.tbia)

    def test_disabled_terms_logged_without_gradient(self):
        """Test zero-weight terms are still reported."""
        config = self.config.updated(alpha=0.0, beta=0.0)
        network = CalaNetwork(config)
        loss, parts = network.losses(self.train_set[:3])
        loss.backward()

        self.assertGreater(parts.tbia, 0.0)
        self.assertGreater(parts.ctr, 0.0)
        self.assertEqual(parts.total, parts.qtm)
        for group in ('cross_encoder', 'hca', 'tac'):
            for param in network.store.group(group):
                self.assertIsNone(param.grad)


class TrainerTests(SimpleTestCase):
    """Test the training loop."""

    def setUp(self):
        self.config = sample_config()
        self.train_set, _ = sample_data(self.config)

    def test_too_few_records(self):
        """Test training needs at least one full batch."""
        with self.assertRaises(ValueError):
            train(CalaNetwork(self.config), self.train_set[:3])

    def test_loss_decreases(self):
        """Test one epoch on 64 triplets at d=16 lowers the total loss."""
        config = sample_config(dim=16, n_train=64, epochs=1, batch_size=8)
        train_set, _ = sample_data(config)
        network = CalaNetwork(config)
        before = mean_loss(network, train_set, config.batch_size)
        history = train(network, train_set)
        after = mean_loss(network, train_set, config.batch_size)

        self.assertEqual(len(history), 1)
        self.assertLess(after.total, before.total)

    def test_frozen_encoders_unchanged(self):
        """Test image encoders stay bitwise identical through training."""
        network = CalaNetwork(self.config)
        before = snapshot(network, FROZEN)
        train(network, self.train_set)

        for name, data in before.items():
            self.assertEqual(network.store[name].data.tobytes(),
                             data.tobytes())

    def test_baseline_leaves_auxiliary_params(self):
        """Test alpha=beta=0 training updates only the matching path."""
        config = self.config.updated(disable_tbia=True, disable_ctr=True)
        network = CalaNetwork(config)
        auxiliary = snapshot(network, ('cross_encoder', 'hca', 'tac'))
        matching = snapshot(network, ('text_encoder', 'qformer'))
        train(network, self.train_set)

        for name, data in auxiliary.items():
            np.testing.assert_array_equal(network.store[name].data, data)
        changed = [not np.array_equal(network.store[n].data, d)
                   for n, d in matching.items()]
        self.assertTrue(any(changed))

    def test_deterministic(self):
        """Test identical config and seed give identical parameters."""
        a, b = CalaNetwork(self.config), CalaNetwork(self.config)
        history_a = train(a, self.train_set)
        history_b = train(b, self.train_set)

        self.assertEqual(history_a, history_b)
        for name in a.store.names():
            self.assertEqual(a.store[name].data.tobytes(),
                             b.store[name].data.tobytes())


class EvaluationTests(SimpleTestCase):
    """Test validation scoring."""

    def setUp(self):
        self.config = sample_config()
        _, self.val_set = sample_data(self.config)

    def test_report_keys(self):
        """Test recall and subset recall are reported as fractions."""
        results, report = evaluate(CalaNetwork(self.config), self.val_set)

        self.assertEqual(len(results), 10)
        for key in ('recall@1', 'recall@5', 'recall@10', 'recall_subset@1',
                    'recall_subset@2', 'recall_subset@3',
                    'avg(r@5,r_sub@1)'):
            self.assertIn(key, report)
            self.assertGreaterEqual(report[key], 0.0)
            self.assertLessEqual(report[key], 1.0)
        self.assertEqual(report['recall@10'], 1.0)

    def test_inference_skips_auxiliary_modules(self):
        """Test evaluation never runs HCA or TAC and leaves them untouched."""
        network = CalaNetwork(self.config)
        before = snapshot(network, ('hca', 'tac'))
        calls = dict(side_effect=AssertionError('auxiliary module used'))
        with patch.object(hca, 'attend_ref_to_text', **calls) as a, \
                patch.object(hca, 'tbia_logits', **calls) as b, \
                patch.object(tac, 'fuse_branch', **calls) as c, \
                patch.object(tac, 'ctr_logits', **calls) as d:
            evaluate(network, self.val_set)

        for mock in (a, b, c, d):
            self.assertEqual(mock.call_count, 0)
        for name, data in before.items():
            np.testing.assert_array_equal(network.store[name].data, data)
            self.assertIsNone(network.store[name].grad)

    def test_parallel_matches_serial(self):
        """Test worker threads rank exactly as the serial loop."""
        network = CalaNetwork(self.config)

        self.assertEqual(evaluate(network, self.val_set, workers=1),
                         evaluate(network, self.val_set, workers=3))

    def test_untrained_near_chance(self):
        """Test a random model retrieves at roughly chance level."""
        config = sample_config(n_val=100)
        _, val_set = sample_data(config)
        _, report = evaluate(CalaNetwork(config), val_set)

        self.assertLess(report['recall@1'], 0.05)

    def test_empty_validation_set(self):
        """Test evaluating nothing fails."""
        with self.assertRaises(ValueError):
            evaluate(CalaNetwork(self.config), [])
