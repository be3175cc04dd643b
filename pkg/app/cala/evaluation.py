import logging
from concurrent.futures import ThreadPoolExecutor

from core import autograd as ag
from cala.objective import score_query_against_gallery, stack_rows
from retrieval.metrics import build_report, rank_gallery

logger = logging.getLogger(__name__)


def evaluate(network, records, workers=1):
    """Rank all validation targets for every validation query.

    Only the query-target matching path runs: HCA and TAC are not
    touched. Returns (ranking results, metric report).
    """
    if not records:
        raise ValueError('Cannot evaluate an empty validation set.')
    gallery_ids = [r.id for r in records]
    with ag.no_grad():
        gallery = stack_rows([network.gallery_embedding(r) for r in records])
        queries = [network.query_embedding(r) for r in records]

    def rank(index):
        scores = score_query_against_gallery(queries[index], gallery)
        return rank_gallery(records[index].id, records[index].id,
                            scores.data, gallery_ids)

    indices = range(len(records))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(rank, indices))
    else:
        results = [rank(i) for i in indices]

    subsets = {r.id: r.subset_ids for r in records if r.subset_ids}
    if subsets and len(subsets) != len(records):
        logger.warning('%d of %d queries lack a subset; subset recall skipped',
                       len(records) - len(subsets), len(records))
        subsets = None
    report = build_report(results, subsets)
    logger.info('evaluated %d queries against %d gallery images',
                len(results), len(gallery_ids))
    return results, report
