"""Ranking kernel and retrieval metrics.

Rankings sort by descending score; equal scores fall back to ascending
gallery id so every ordering is deterministic. Metrics are fractions.
"""
from dataclasses import dataclass

import numpy as np

RECALL_KS = (1, 5, 10, 50)
SUBSET_KS = (1, 2, 3)


@dataclass(frozen=True)
class RankingResult:
    query_id: str
    target_id: str
    ordered_ids: tuple
    rank_of_target: int


def rank_gallery(query_id, target_id, scores, gallery_ids):
    """Order the gallery for one query and locate its target (1-based)."""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if scores.size == 0:
        raise ValueError('Cannot rank an empty gallery.')
    if scores.size != len(gallery_ids):
        raise ValueError(
            f'{scores.size} scores for {len(gallery_ids)} gallery items.'
        )
    id_rank = np.empty(len(gallery_ids), dtype=np.int64)
    id_rank[sorted(range(len(gallery_ids)), key=gallery_ids.__getitem__)] = \
        np.arange(len(gallery_ids))
    order = np.lexsort((id_rank, -scores))
    ordered = tuple(gallery_ids[i] for i in order)
    try:
        rank = ordered.index(target_id) + 1
    except ValueError:
        raise ValueError(
            f'Target {target_id!r} of query {query_id!r} is not in the '
            'gallery.'
        ) from None
    return RankingResult(query_id, target_id, ordered, rank)


def recall_at_k(results, k):
    """Fraction of queries whose target ranks within the top k."""
    if k < 1:
        raise ValueError('k must be at least 1.')
    if not results:
        raise ValueError('Cannot compute recall over no queries.')
    return sum(r.rank_of_target <= k for r in results) / len(results)


def subset_ranking(result, subset_ids):
    """Restrict a ranking to the candidate subset, keeping its order."""
    subset = set(subset_ids)
    if result.target_id not in subset:
        raise ValueError(
            f'Subset of query {result.query_id!r} misses its target.'
        )
    ordered = tuple(g for g in result.ordered_ids if g in subset)
    return RankingResult(result.query_id, result.target_id, ordered,
                         ordered.index(result.target_id) + 1)


def recall_subset_at_k(results, subsets, k):
    """Recall@k after re-ranking each query among its subset only.

    `subsets` maps query id -> candidate ids (target included).
    """
    if not results:
        raise ValueError('Cannot compute recall over no queries.')
    missing = [r.query_id for r in results if r.query_id not in subsets]
    if missing:
        raise ValueError(f'No subset for queries {missing[:5]}.')
    return recall_at_k(
        [subset_ranking(r, subsets[r.query_id]) for r in results], k)


def challenge_metric(r10, r50):
    """FashionIQ challenge metric (R@10 + R@50) / 2."""
    return (r10 + r50) / 2.0


def avg_metric(r5, rsub1):
    """CIRR headline (R@5 + R_subset@1) / 2."""
    return (r5 + rsub1) / 2.0


def build_report(results, subsets=None):
    """Metric name -> fraction for one evaluation run."""
    gallery_size = len(results[0].ordered_ids) if results else 0
    report = {f'recall@{k}': recall_at_k(results, k)
              for k in RECALL_KS if k <= max(gallery_size, 1)}
    if subsets:
        for k in SUBSET_KS:
            report[f'recall_subset@{k}'] = recall_subset_at_k(
                results, subsets, k)
        if 'recall@5' in report:
            report['avg(r@5,r_sub@1)'] = avg_metric(
                report['recall@5'], report['recall_subset@1'])
    if 'recall@50' in report:
        report['cm'] = challenge_metric(report['recall@10'],
                                        report['recall@50'])
    return report


def format_table(report, title='metric'):
    """Aligned two-column table with values as percentages."""
    width = max([len(title)] + [len(name) for name in report])
    lines = [f'{title:<{width}}  {"value":>7}', '-' * (width + 9)]
    for name, value in report.items():
        lines.append(f'{name:<{width}}  {100.0 * value:>7.2f}')
    return '\n'.join(lines)


def format_comparison(reports):
    """Side-by-side table of several reports (rows: runs, cols: metrics)."""
    names = list(next(iter(reports.values())))
    run_width = max(len('run'), *(len(run) for run in reports))
    col = max(9, *(len(n) for n in names))
    header = f'{"run":<{run_width}}' + ''.join(f'  {n:>{col}}' for n in names)
    lines = [header, '-' * len(header)]
    for run, report in reports.items():
        cells = ''.join(f'  {100.0 * report[n]:>{col}.2f}' for n in names)
        lines.append(f'{run:<{run_width}}{cells}')
    return '\n'.join(lines)
