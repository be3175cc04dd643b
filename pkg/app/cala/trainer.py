import json
import logging
from pathlib import Path

from core import autograd as ag
from core.optim import Adam
from cala.objective import LossBreakdown
from retrieval.synth import batches

logger = logging.getLogger(__name__)


def _mean_breakdown(parts):
    count = len(parts)
    return LossBreakdown(
        qtm=sum(p.qtm for p in parts) / count,
        tbia=sum(p.tbia for p in parts) / count,
        ctr=sum(p.ctr for p in parts) / count,
        total=sum(p.total for p in parts) / count,
    )


def mean_loss(network, records, batch_size, seed=0, epoch=0):
    """Epoch-averaged LossBreakdown without recording gradients."""
    with ag.no_grad():
        parts = [network.losses(batch)[1]
                 for batch in batches(records, batch_size, seed, epoch)]
    if not parts:
        raise ValueError('Dataset is smaller than one batch.')
    return _mean_breakdown(parts)


def train(network, records, log_path=None):
    """Optimize the joint loss with Adam; returns one breakdown per epoch.

    Each epoch's mean LossBreakdown is appended to `log_path` as a JSON
    line. A non-finite value anywhere aborts with NonFiniteError.
    """
    config = network.config
    if len(records) < config.batch_size:
        raise ValueError(
            f'{len(records)} records do not fill one batch of '
            f'{config.batch_size}.'
        )
    optimizer = Adam(network.store, lr=config.learning_rate)
    log_file = None
    if log_path:
        log_path = Path(log_path)
        log_path.parent.mkdir(parents=True, exist_ok=True)
        log_file = log_path.open('w', encoding='utf-8')

    history = []
    try:
        for epoch in range(config.epochs):
            parts = []
            for batch in batches(records, config.batch_size, config.seed,
                                 epoch):
                network.store.zero_grad()
                loss, breakdown = network.losses(batch)
                loss.backward()
                optimizer.step()
                parts.append(breakdown)
            summary = _mean_breakdown(parts)
            history.append(summary)
            logger.info(
                'epoch %d: total %.6f qtm %.6f tbia %.6f ctr %.6f',
                epoch, summary.total, summary.qtm, summary.tbia, summary.ctr)
            if log_file:
                log_file.write(
                    json.dumps({'epoch': epoch, **summary.as_dict()}) + '\n')
    finally:
        if log_file:
            log_file.close()
    return history
