"""Toy feature extractors for images, text and the query fusion.

Each image or text encoder is an embedding table, optional learned
positions and one residual self-attention block. Image outputs carry a
leading CLS row.
"""
from dataclasses import dataclass

from core import autograd as ag
from cala.attention import Attention

REFERENCE_IMAGE = 'reference-image'
TARGET_IMAGE = 'target-image'
TEXT = 'text'

IMAGE_KINDS = (REFERENCE_IMAGE, TARGET_IMAGE)
KINDS = IMAGE_KINDS + (TEXT,)

EMBEDDING_STD = 1.0
POSITION_STD = 0.1
# near zero, so the CLS row reads every token almost evenly
CLS_STD = 0.02


@dataclass(frozen=True)
class TokenSeq:
    tokens: tuple
    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f'Unknown sequence kind {self.kind!r}.')
        object.__setattr__(self, 'tokens', tuple(int(t) for t in self.tokens))

    def __len__(self):
        return len(self.tokens)


def _check_tokens(seq, vocab, max_tokens):
    if not seq.tokens:
        raise ValueError(f'Cannot encode an empty {seq.kind} sequence.')
    if len(seq) > max_tokens:
        raise ValueError(
            f'{seq.kind} sequence has {len(seq)} tokens, '
            f'limit is {max_tokens}.'
        )
    bad = [t for t in seq.tokens if not 0 <= t < vocab]
    if bad:
        raise ValueError(f'Token ids {bad} are outside [0, {vocab}).')


class _SequenceEncoder:

    def __init__(self, store, prefix, vocab, dim, max_tokens, heads,
                 positional, frozen, cls):
        self.vocab = vocab
        self.dim = dim
        self.max_tokens = max_tokens
        self.frozen = frozen
        self.embedding = store.create(
            f'{prefix}.embedding', (vocab, dim), EMBEDDING_STD, frozen)
        self.cls = store.create(
            f'{prefix}.cls', (1, dim), CLS_STD, frozen) if cls else None
        rows = max_tokens + (1 if cls else 0)
        self.position = store.create(
            f'{prefix}.position', (rows, dim), POSITION_STD, frozen
        ) if positional else None
        self.attention = Attention(store, f'{prefix}.attention', dim, heads,
                                   frozen)

    def _encode(self, seq):
        _check_tokens(seq, self.vocab, self.max_tokens)
        x = ag.take_rows(self.embedding, seq.tokens)
        if self.cls is not None:
            x = ag.concat([self.cls, x], axis=0)
        if self.position is not None:
            x = x + ag.slice_rows(self.position, 0, x.shape[0])
        return x + self.attention(x, x)


class ImageEncoder(_SequenceEncoder):
    """Patch-token encoder producing (N+1) x d features, CLS first.

    Image tokens are an unordered set of objects, so positions are off
    unless asked for.
    """

    def __init__(self, store, prefix, vocab, dim, max_tokens, heads=1,
                 positional=False, frozen=True):
        super().__init__(store, prefix, vocab, dim, max_tokens, heads,
                         positional, frozen, cls=True)

    def __call__(self, seq):
        if seq.kind not in IMAGE_KINDS:
            raise ValueError(f'Image encoder got a {seq.kind} sequence.')
        return self._encode(seq)


class TextEncoder(_SequenceEncoder):
    """Word-token encoder producing L x d features."""

    def __init__(self, store, prefix, vocab, dim, max_tokens, heads=1,
                 positional=True, frozen=False):
        super().__init__(store, prefix, vocab, dim, max_tokens, heads,
                         positional, frozen, cls=False)

    def __call__(self, seq):
        if seq.kind != TEXT:
            raise ValueError(f'Text encoder got a {seq.kind} sequence.')
        return self._encode(seq)


class CrossEncoder:
    """Text-conditioned reference features F_r + Attention(F_r, F_c).

    Reference rows read from the text, which keeps the output aligned
    with F_r row for row. With `enabled` off the block is the identity.
    """

    def __init__(self, store, prefix, dim, heads=1, enabled=True):
        self.enabled = enabled
        self.attention = Attention(store, f'{prefix}.attention', dim, heads)

    def __call__(self, f_r, f_c):
        if f_r.shape[1] != f_c.shape[1]:
            raise ValueError(
                f'Cross encoder got widths {f_r.shape[1]} and {f_c.shape[1]}.'
            )
        if not self.enabled:
            return f_r
        return f_r + self.attention(f_r, f_c)


class QFormerLite:
    """Learnable prompts plus text tokens querying the reference image.

    Output rows are [prompts; text] after cross-attention into F_r; the
    mean-pooled text feature is added to every text row.
    """

    def __init__(self, store, prefix, dim, prompts=8, heads=1):
        self.dim = dim
        self.prompts = store.create(
            f'{prefix}.prompts', (prompts, dim), EMBEDDING_STD
        ) if prompts else None
        self.attention = Attention(store, f'{prefix}.attention', dim, heads)

    @property
    def prompt_count(self):
        return 0 if self.prompts is None else self.prompts.shape[0]

    def __call__(self, f_c, f_r):
        if f_c.shape[1] != self.dim or f_r.shape[1] != self.dim:
            raise ValueError(
                f'Q-former expects width {self.dim}, got {f_c.shape[1]} '
                f'and {f_r.shape[1]}.'
            )
        count, length = self.prompt_count, f_c.shape[0]
        queries = f_c if not count else ag.concat([self.prompts, f_c], axis=0)
        fused = self.attention(queries, f_r)
        pooled_text = ag.mean(f_c, axis=0)
        text_rows = ag.slice_rows(fused, count, count + length) \
            + ag.ones(length, 1) @ pooled_text
        if not count:
            return text_rows
        return ag.concat([ag.slice_rows(fused, 0, count), text_rows], axis=0)

    def embed(self, f_c, f_r):
        """Pooled, unit-norm query embedding (1 x d)."""
        return ag.l2_normalize_rows(ag.mean(self(f_c, f_r), axis=0))
