"""Hinge-based cross attention and text-bridged image alignment.

The reference image attends to the text, the text attends to the target
image, and the product of the two cosine association maps lets reference
patches query target patches with the text as the pivot.
"""
import math

from core import autograd as ag
from cala.objective import in_batch_nll, stack_rows


class HcaParams:
    """Projections W_r, W_c, W_c', W_t, W_v and the temperature.

    With `share_text_projection` W_c' is the W_c Param itself.
    """

    def __init__(self, store, dim, tau=0.1, share_text_projection=True,
                 prefix='hca'):
        if tau <= 0:
            raise ValueError('tau must be positive.')
        std = 1.0 / math.sqrt(dim)
        self.dim = dim
        self.tau = tau
        self.w_r = store.create(f'{prefix}.w_r', (dim, dim), std)
        self.w_c = store.create(f'{prefix}.w_c', (dim, dim), std)
        self.w_c_prime = self.w_c if share_text_projection \
            else store.create(f'{prefix}.w_c_prime', (dim, dim), std)
        self.w_t = store.create(f'{prefix}.w_t', (dim, dim), std)
        self.w_v = store.create(f'{prefix}.w_v', (dim, dim), std)

    @property
    def shared(self):
        return self.w_c_prime is self.w_c


def _cosine_map(left, w_left, right, w_right):
    for x in (left, right):
        if x.shape[1] != w_left.shape[0]:
            raise ValueError(
                f'Feature width {x.shape[1]} does not match projection '
                f'{w_left.shape}.'
            )
    q = ag.l2_normalize_rows(left @ w_left)
    k = ag.l2_normalize_rows(right @ w_right)
    return q @ k.T


def attend_ref_to_text(f_r_bar, f_c, p):
    """A_r2c (N x L): cosine of projected reference rows and text rows."""
    return _cosine_map(f_r_bar, p.w_r, f_c, p.w_c)


def attend_text_to_target(f_c, f_t, p):
    """A_c2t (L x N): cosine of projected text rows and target rows."""
    return _cosine_map(f_c, p.w_c_prime, f_t, p.w_t)


def hinge_attention(a_r2c, a_c2t, d):
    """A_r2t = softmax(A_r2c A_c2t / sqrt(d)) over target patches."""
    if a_r2c.shape[1] != a_c2t.shape[0]:
        raise ValueError(
            f'Text lengths disagree: {a_r2c.shape} and {a_c2t.shape}.'
        )
    return ag.softmax_rows((a_r2c @ a_c2t) * (1.0 / math.sqrt(d)))


def query_target(a_r2t, f_t, p):
    """F_r2t = A_r2t V_t with V_t = F_t W_v."""
    if a_r2t.shape[1] != f_t.shape[0]:
        raise ValueError(
            f'Attention {a_r2t.shape} does not cover '
            f'{f_t.shape[0]} target rows.'
        )
    return a_r2t @ (f_t @ p.w_v)


def pooled(features):
    """Mean over rows, unit norm (1 x d)."""
    return ag.l2_normalize_rows(ag.mean(features, axis=0))


def tbia_logits(f_r_bars, f_cs, f_ts, p):
    """B x B similarities sim(F̄_r(i), F_r2t(i, j)) / tau.

    The whole reference -> text -> target chain is recomputed for every
    query i and candidate target j of the batch.
    """
    size = len(f_r_bars)
    if size == 0:
        raise ValueError('tbia_loss needs a batch of at least one.')
    if not len(f_cs) == len(f_ts) == size:
        raise ValueError('Batch features have different lengths.')
    rows = []
    for i in range(size):
        a_r2c = attend_ref_to_text(f_r_bars[i], f_cs[i], p)
        anchor = pooled(f_r_bars[i])
        sims = []
        for j in range(size):
            a_c2t = attend_text_to_target(f_cs[i], f_ts[j], p)
            a_r2t = hinge_attention(a_r2c, a_c2t, p.dim)
            sims.append(anchor @ pooled(query_target(a_r2t, f_ts[j], p)).T)
        rows.append(sims[0] if size == 1 else ag.concat(sims, axis=1))
    return stack_rows(rows) * (1.0 / p.tau)


def tbia_loss(f_r_bars, f_cs, f_ts, p):
    """-mean log P(I_t | I_r, C) with in-batch targets as negatives."""
    return in_batch_nll(tbia_logits(f_r_bars, f_cs, f_ts, p))
