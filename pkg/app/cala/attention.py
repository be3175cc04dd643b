import math

from core import autograd as ag


def scaled_dot_product(queries, keys, values, heads=1):
    """softmax(Q K^T / sqrt(d_head)) V, heads split along the columns."""
    dim = queries.shape[1]
    if keys.shape[1] != dim or values.shape[1] != dim:
        raise ValueError(
            f'Attention inputs disagree on width: {queries.shape}, '
            f'{keys.shape}, {values.shape}.'
        )
    if dim % heads:
        raise ValueError(f'{heads} heads do not divide width {dim}.')
    width = dim // heads
    outputs = []
    for head in range(heads):
        cols = slice(head * width, (head + 1) * width)
        q, k, v = queries, keys, values
        if heads > 1:
            q = ag.slice_cols(q, cols.start, cols.stop)
            k = ag.slice_cols(k, cols.start, cols.stop)
            v = ag.slice_cols(v, cols.start, cols.stop)
        weights = ag.softmax_rows((q @ k.T) * (1.0 / math.sqrt(width)))
        outputs.append(weights @ v)
    return outputs[0] if heads == 1 else ag.concat(outputs, axis=1)


class Attention:
    """Projections W_q, W_k, W_v around `scaled_dot_product`.

    Features are rows, so a projection is `F @ W`.
    """

    def __init__(self, store, prefix, dim, heads=1, frozen=False):
        std = 1.0 / math.sqrt(dim)
        self.dim = dim
        self.heads = heads
        self.w_q = store.create(f'{prefix}.w_q', (dim, dim), std, frozen)
        self.w_k = store.create(f'{prefix}.w_k', (dim, dim), std, frozen)
        self.w_v = store.create(f'{prefix}.w_v', (dim, dim), std, frozen)

    def params(self):
        return [self.w_q, self.w_k, self.w_v]

    def __call__(self, queries, context):
        """Rows of `queries` attend over the rows of `context`."""
        for x in (queries, context):
            if x.shape[1] != self.dim:
                raise ValueError(
                    f'Expected feature width {self.dim}, got {x.shape[1]}.'
                )
        return scaled_dot_product(
            queries @ self.w_q,
            context @ self.w_k,
            context @ self.w_v,
            self.heads,
        )
