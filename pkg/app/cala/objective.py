"""Query-target matching, the joint objective and inference scoring."""
from dataclasses import dataclass

import numpy as np

from core import autograd as ag


@dataclass(frozen=True)
class ObjectiveWeights:
    alpha: float = 0.45
    beta: float = 0.1
    tau: float = 0.1

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError('alpha and beta must be non-negative.')
        if self.tau <= 0:
            raise ValueError('tau must be positive.')


@dataclass(frozen=True)
class LossBreakdown:
    qtm: float
    tbia: float
    ctr: float
    total: float

    def as_dict(self):
        return {'qtm': self.qtm, 'tbia': self.tbia, 'ctr': self.ctr,
                'total': self.total}


def in_batch_nll(logits):
    """Mean negative log-likelihood of the diagonal under row softmax.

    Row i scores query i against every candidate of the batch; the
    matched candidate sits on the diagonal.
    """
    size = logits.shape[0]
    if size == 0:
        raise ValueError('Contrastive loss needs a batch of at least one.')
    if logits.shape != (size, size):
        raise ValueError(f'Logits must be square, got {logits.shape}.')
    log_probs = ag.log_softmax_rows(logits)
    return ag.total(log_probs * ag.eye(size)) * (-1.0 / size)


def stack_rows(rows):
    if not rows:
        raise ValueError('Cannot stack an empty batch.')
    return rows[0] if len(rows) == 1 else ag.concat(rows, axis=0)


def target_embedding(f_t):
    """CLS row of the target features, unit norm (1 x d)."""
    return ag.l2_normalize_rows(ag.slice_rows(f_t, 0, 1))


def qtm_loss(queries, targets, w):
    """In-batch contrastive loss of query embeddings against targets.

    `queries` and `targets` are B x d with unit-norm rows.
    """
    if queries.shape[0] == 0:
        raise ValueError('qtm_loss needs a batch of at least one.')
    if queries.shape != targets.shape:
        raise ValueError(
            f'Queries {queries.shape} and targets {targets.shape} differ.'
        )
    return in_batch_nll((queries @ targets.T) * (1.0 / w.tau))


def total_loss(l_qtm, l_tbia, l_ctr, w):
    """L = L_QTM + alpha * L_TBIA + beta * L_CTR."""
    return l_qtm + l_tbia * w.alpha + l_ctr * w.beta


def score_query_against_gallery(query, gallery):
    """Cosine score of one unit-norm query against unit-norm gallery rows."""
    if gallery.shape[0] == 0:
        raise ValueError('Cannot score against an empty gallery.')
    if query.shape != (1, gallery.shape[1]):
        raise ValueError(
            f'Query {query.shape} does not match gallery {gallery.shape}.'
        )
    with ag.no_grad():
        scores = gallery @ query.T
    return ag.constant(np.asarray(scores.data).reshape(-1))
