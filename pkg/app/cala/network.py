"""The full CaLa model: encoders, fusion, and the three training terms."""
import logging
from contextlib import nullcontext
from dataclasses import dataclass

from core import autograd as ag
from core.config import PURE
from core.params import ParamStore
from cala import hca, tac
from cala.encoders import (
    REFERENCE_IMAGE, TARGET_IMAGE, TEXT,
    CrossEncoder, ImageEncoder, QFormerLite, TextEncoder, TokenSeq,
)
from cala.objective import (
    LossBreakdown, ObjectiveWeights,
    qtm_loss, stack_rows, target_embedding, total_loss,
)

logger = logging.getLogger(__name__)

REFERENCE = 'reference'
TARGET = 'target'


@dataclass
class TripletFeatures:
    f_r: object
    f_c: object
    f_t: object
    f_r_bar: object
    f_r_prime: object


class CalaNetwork:
    """All parameters of one model, created in a fixed order from the seed.

    Both image encoders are frozen; the text encoder, cross encoder,
    Q-former-lite, HCA and TAC train.
    """

    def __init__(self, config):
        self.config = config
        self.store = store = ParamStore(config.seed)
        common = dict(dim=config.dim, max_tokens=config.max_tokens,
                      heads=config.heads)
        self.reference_encoder = ImageEncoder(
            store, 'reference_encoder', config.image_vocab, frozen=True,
            positional=config.image_positional, **common)
        self.target_encoder = ImageEncoder(
            store, 'target_encoder', config.image_vocab, frozen=True,
            positional=config.image_positional, **common)
        self.text_encoder = TextEncoder(
            store, 'text_encoder', config.text_vocab,
            positional=config.positional, **common)
        self.cross_encoder = CrossEncoder(
            store, 'cross_encoder', config.dim, config.heads,
            enabled=config.cross_attention)
        self.qformer = QFormerLite(
            store, 'qformer', config.dim, config.prompts, config.heads)
        self.hca = hca.HcaParams(
            store, config.dim, config.tau, config.share_text_projection)
        self.tac = tac.TacParams(
            store, config.dim, config.tac_layers, config.heads,
            config.share_tac_branches)
        self.weights = ObjectiveWeights(
            config.effective_alpha, config.effective_beta, config.tau)

    def encode_image(self, seq, which):
        if which == REFERENCE:
            return self.reference_encoder(seq)
        if which == TARGET:
            return self.target_encoder(seq)
        raise ValueError(f'Unknown image branch {which!r}.')

    def encode_text(self, seq):
        return self.text_encoder(seq)

    def cross_encode(self, f_r, f_c):
        return self.cross_encoder(f_r, f_c)

    def features(self, record):
        """Every feature the three losses read, for one triplet."""
        reference = TokenSeq(record.ref_tokens, REFERENCE_IMAGE)
        f_r = self.encode_image(reference, REFERENCE)
        f_c = self.encode_text(TokenSeq(record.text_tokens, TEXT))
        f_t = self.encode_image(TokenSeq(record.target_tokens, TARGET_IMAGE),
                                TARGET)
        return TripletFeatures(
            f_r=f_r,
            f_c=f_c,
            f_t=f_t,
            f_r_bar=self.cross_encode(f_r, f_c),
            f_r_prime=self.encode_image(reference, TARGET),
        )

    def losses(self, records):
        """Joint loss tensor and the value of each term.

        Terms with zero weight are evaluated without recording, so they
        are logged but never reach the gradient.
        """
        if not records:
            raise ValueError('Cannot compute losses for an empty batch.')
        feats = [self.features(r) for r in records]
        w = self.weights

        l_qtm = qtm_loss(
            stack_rows([self.qformer.embed(f.f_c, f.f_r) for f in feats]),
            stack_rows([target_embedding(f.f_t) for f in feats]),
            w,
        )
        anchors = [f.f_r if self.config.reference_features == PURE
                   else f.f_r_bar for f in feats]
        with _recording(w.alpha > 0):
            l_tbia = hca.tbia_loss(
                anchors, [f.f_c for f in feats], [f.f_t for f in feats],
                self.hca)
        with _recording(w.beta > 0):
            l_ctr = tac.ctr_loss(
                [f.f_r_prime for f in feats], [f.f_t for f in feats],
                [f.f_c for f in feats], self.tac, w.tau)

        loss = total_loss(l_qtm, l_tbia, l_ctr, w)
        breakdown = LossBreakdown(
            qtm=l_qtm.item(), tbia=l_tbia.item(), ctr=l_ctr.item(),
            total=loss.item())
        return loss, breakdown

    def query_embedding(self, record):
        """Inference query path: Q-former-lite only (1 x d)."""
        f_r = self.encode_image(TokenSeq(record.ref_tokens, REFERENCE_IMAGE),
                                REFERENCE)
        f_c = self.encode_text(TokenSeq(record.text_tokens, TEXT))
        return self.qformer.embed(f_c, f_r)

    def gallery_embedding(self, record):
        """Target image representation used for ranking (1 x d)."""
        f_t = self.encode_image(TokenSeq(record.target_tokens, TARGET_IMAGE),
                                TARGET)
        return target_embedding(f_t)


def _recording(enabled):
    return nullcontext() if enabled else ag.no_grad()
