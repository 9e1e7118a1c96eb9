"""Semantic axes: pole construction, projection, ranking, rank comparison.

An axis is the difference of the mean in-vectors of two disjoint pole sets;
locations score by cosine similarity to that axis, so scores live in [-1, 1]
and swapping the poles negates every score.
"""

from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .corpus import metadata_by_id
from .distances import cosine_distance
from .embedding import in_vector
from .errors import DomainError, InputError, MatchingError


@dataclass(frozen=True)
class Axis:
    positive_ids: tuple
    negative_ids: tuple
    v_plus: np.ndarray
    v_minus: np.ndarray
    axis_vector: np.ndarray


@dataclass(frozen=True)
class Ranking:
    """Entries (id, score) in descending score, ties lexicographic by id."""

    entries: tuple

    def scores(self):
        return dict(self.entries)

    def order(self):
        return [loc_id for loc_id, _ in self.entries]


def build_axis(model, pos_ids, neg_ids):
    pos_ids = tuple(pos_ids)
    neg_ids = tuple(neg_ids)
    if not pos_ids or not neg_ids:
        raise InputError("pole sets must be nonempty")
    overlap = set(pos_ids) & set(neg_ids)
    if overlap:
        raise InputError(f"pole sets overlap: {sorted(overlap)}")
    v_plus = np.mean([in_vector(model, i) for i in pos_ids], axis=0)
    v_minus = np.mean([in_vector(model, i) for i in neg_ids], axis=0)
    axis_vector = v_plus - v_minus
    if not np.any(axis_vector):
        raise DomainError("pole means coincide; axis vector is zero")
    return Axis(pos_ids, neg_ids, v_plus, v_minus, axis_vector)


def project(model, location_id, axis):
    """Cosine similarity of the location's in-vector to the axis vector."""
    return 1.0 - cosine_distance(in_vector(model, location_id), axis.axis_vector)


def rank_by_axis(model, ids, axis):
    scored = [(loc_id, project(model, loc_id, axis)) for loc_id in ids]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return Ranking(tuple(scored))


def match_poles(ranking_table, metadata, n):
    """Pick top-n ids and a region-matched bottom set from a ranking.

    The bottom set mirrors the top set's region multiset, filled with the
    worst-ranked remaining ids of each region; rank 1 is best, ties broken
    lexicographically.
    """
    if not ranking_table:
        raise InputError("ranking table is empty")
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    if n > len(ranking_table):
        raise InputError(f"n={n} exceeds ranking size {len(ranking_table)}")
    if not isinstance(metadata, dict):
        metadata = metadata_by_id(metadata)

    regions = {}
    for loc_id in ranking_table:
        record = metadata.get(loc_id)
        if record is None or not record.region:
            raise InputError(f"no region metadata for ranked id {loc_id!r}")
        regions[loc_id] = record.region

    best_first = sorted(ranking_table, key=lambda i: (ranking_table[i], i))
    top = best_first[:n]
    quotas = Counter(regions[i] for i in top)

    top_set = set(top)
    worst_first = sorted(
        (i for i in ranking_table if i not in top_set),
        key=lambda i: (-ranking_table[i], i),
    )
    bottom = []
    for region, quota in quotas.items():
        candidates = [i for i in worst_first if regions[i] == region]
        if len(candidates) < quota:
            raise MatchingError(
                f"region {region!r}: need {quota} bottom candidates, found {len(candidates)}"
            )
        bottom.extend(candidates[:quota])
    bottom.sort(key=lambda i: (-ranking_table[i], i))
    return top, bottom


def spearman(rank_a, rank_b):
    """Spearman correlation with average ranks for ties.

    Each argument is a Ranking (scores, higher is better) or a mapping
    id -> rank position (1 is best); both must cover the same ids.
    """
    def values(ranking):
        if isinstance(ranking, Ranking):
            return ranking.scores()
        return {i: -float(r) for i, r in ranking.items()}

    a = values(rank_a)
    b = values(rank_b)
    if set(a) != set(b):
        raise InputError("rankings cover different id sets")
    if len(a) < 2:
        raise InputError("need at least 2 ids to correlate")
    ids = sorted(a)
    rho = stats.spearmanr([a[i] for i in ids], [b[i] for i in ids]).statistic
    return float(rho)
