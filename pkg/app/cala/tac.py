"""Twin attention-based vision compositor and complementary text reasoning."""
import logging

from core import autograd as ag
from cala.attention import Attention
from cala.hca import pooled
from cala.objective import in_batch_nll, stack_rows

logger = logging.getLogger(__name__)

TARGET_ORIENTED = 'target_oriented'
REFERENCE_ORIENTED = 'reference_oriented'
BRANCHES = (TARGET_ORIENTED, REFERENCE_ORIENTED)


class TacParams:
    """One attention block per branch, reused by all M layers of it."""

    def __init__(self, store, dim, layers=4, heads=1,
                 share_across_branches=False, prefix='tac'):
        if layers < 1:
            raise ValueError('TAC needs at least one attention layer.')
        self.dim = dim
        self.layers = layers
        target = Attention(store, f'{prefix}.{TARGET_ORIENTED}', dim, heads)
        reference = target if share_across_branches \
            else Attention(store, f'{prefix}.{REFERENCE_ORIENTED}', dim, heads)
        self.branches = {
            TARGET_ORIENTED: target,
            REFERENCE_ORIENTED: reference,
        }

    @property
    def shared(self):
        branches = self.branches
        return branches[TARGET_ORIENTED] is branches[REFERENCE_ORIENTED]

    def swapped(self):
        """Same params with the two branch roles exchanged."""
        twin = object.__new__(TacParams)
        twin.dim, twin.layers = self.dim, self.layers
        twin.branches = {
            TARGET_ORIENTED: self.branches[REFERENCE_ORIENTED],
            REFERENCE_ORIENTED: self.branches[TARGET_ORIENTED],
        }
        return twin


def fuse_branch(anchor, other, p, branch):
    """H_0 = other; H_m = Attention(anchor, H_{m-1}, H_{m-1}); returns H_M."""
    if p.layers < 1:
        raise ValueError('TAC needs at least one attention layer.')
    if branch not in p.branches:
        raise ValueError(f'Unknown TAC branch {branch!r}.')
    if anchor.shape[1] != other.shape[1]:
        raise ValueError(
            f'Branch inputs disagree on width: {anchor.shape}, {other.shape}.'
        )
    block = p.branches[branch]
    state = other
    for _ in range(p.layers):
        state = block(anchor, state)
    return state


def compose(f_r_prime, f_t, p):
    """F_v: mean of the two branch CLS rows, unit norm (1 x d)."""
    if f_r_prime.shape[0] == 0 or f_t.shape[0] == 0:
        raise ValueError('Compositor inputs need a CLS row.')
    h_t = fuse_branch(f_r_prime, f_t, p, TARGET_ORIENTED)
    h_r = fuse_branch(f_t, f_r_prime, p, REFERENCE_ORIENTED)
    f_v = (ag.slice_rows(h_t, 0, 1) + ag.slice_rows(h_r, 0, 1)) * 0.5
    if float((f_v.data ** 2).sum()) < ag.NORM_EPS ** 2:
        logger.warning('degenerate composite feature: branch CLS rows cancel')
    return ag.l2_normalize_rows(f_v)


def ctr_logits(f_r_primes, f_ts, f_cs, p, tau):
    """B x B similarities sim(F_v(i), F_c(j)) / tau."""
    size = len(f_r_primes)
    if size == 0:
        raise ValueError('ctr_loss needs a batch of at least one.')
    if not len(f_ts) == len(f_cs) == size:
        raise ValueError('Batch features have different lengths.')
    visual = stack_rows(
        [compose(f_r_primes[i], f_ts[i], p) for i in range(size)])
    texts = stack_rows([pooled(f_c) for f_c in f_cs])
    return (visual @ texts.T) * (1.0 / tau)


def ctr_loss(f_r_primes, f_ts, f_cs, p, tau=0.1):
    """-mean log P(C | I_r, I_t) with in-batch texts as negatives."""
    if tau <= 0:
        raise ValueError('tau must be positive.')
    return in_batch_nll(ctr_logits(f_r_primes, f_ts, f_cs, p, tau))
