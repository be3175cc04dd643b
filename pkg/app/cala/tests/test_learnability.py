import numpy as np
from django.test import SimpleTestCase

from core import autograd as ag
from core.config import load_config
from cala.encoders import REFERENCE_IMAGE, TARGET_IMAGE, TokenSeq
from cala.evaluation import evaluate
from cala.network import CalaNetwork, REFERENCE, TARGET
from cala.trainer import train
from retrieval.synth import SynthSpec, generate


def unit_rows(x):
    return x / np.linalg.norm(x, axis=1, keepdims=True)


class LinearReadoutTests(SimpleTestCase):
    """Test targets are linear in the frozen reference features."""

    def setUp(self):
        self.config = load_config(overrides={'n_train': 256, 'n_val': 64})
        self.network = CalaNetwork(self.config)
        self.train_set, self.val_set = generate(
            SynthSpec.from_config(self.config))

    def cls_rows(self, records, which):
        rows = []
        with ag.no_grad():
            for record in records:
                if which == REFERENCE:
                    seq = TokenSeq(record.ref_tokens, REFERENCE_IMAGE)
                else:
                    seq = TokenSeq(record.target_tokens, TARGET_IMAGE)
                rows.append(self.network.encode_image(seq, which).data[0])
        return np.stack(rows)

    def design(self, records):
        """[reference CLS row, one-hot direction, 1] per triplet."""
        directions = np.eye(self.config.n_attributes)[
            [r.text_tokens[0] for r in records]]
        return np.hstack([self.cls_rows(records, REFERENCE), directions,
                          np.ones((len(records), 1))])

    def test_readout_retrieves_targets(self):
        """Test a least-squares readout fitted on train ranks val targets."""
        readout, *_ = np.linalg.lstsq(
            self.design(self.train_set),
            self.cls_rows(self.train_set, TARGET), rcond=None)
        queries = unit_rows(self.design(self.val_set) @ readout)
        gallery = unit_rows(self.cls_rows(self.val_set, TARGET))
        best = np.argmax(queries @ gallery.T, axis=1)

        hits = best == np.arange(len(self.val_set))
        self.assertGreaterEqual(hits.mean(), 0.95)

    def test_direction_alone_is_not_enough(self):
        """Test dropping the reference features breaks the readout."""
        design = self.design(self.train_set)[:, self.config.dim:]
        readout, *_ = np.linalg.lstsq(
            design, self.cls_rows(self.train_set, TARGET), rcond=None)
        queries = unit_rows(
            self.design(self.val_set)[:, self.config.dim:] @ readout)
        gallery = unit_rows(self.cls_rows(self.val_set, TARGET))
        best = np.argmax(queries @ gallery.T, axis=1)

        self.assertLess((best == np.arange(len(self.val_set))).mean(), 0.5)


class TrainingFitTests(SimpleTestCase):
    """Test the matching path learns the triplets it trains on."""

    def test_training_fits_training_triplets(self):
        """Test 30 short epochs lift Recall@5 on the training gallery."""
        config = load_config(overrides={
            'n_train': 64, 'n_val': 16, 'epochs': 30, 'tac_layers': 1,
        })
        train_set, _ = generate(SynthSpec.from_config(config))
        network = CalaNetwork(config)
        _, before = evaluate(network, train_set)
        train(network, train_set)
        _, after = evaluate(network, train_set)

        self.assertLess(before['recall@5'], 0.25)
        self.assertGreaterEqual(after['recall@5'], 0.5)
        self.assertGreater(after['recall@1'], before['recall@1'])
