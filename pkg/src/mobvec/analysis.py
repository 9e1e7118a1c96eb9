"""Country-level analyses: centroids, hierarchical clustering, clustering
comparison, and vector-norm diagnostics.

The agglomerative clustering is written out here rather than delegated so
that tie-breaking is deterministic (smallest lexicographic leaf pair) and
the output is invariant under permutation of the input.
"""

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .corpus import metadata_by_id
from .distances import cosine_distance
from .embedding import in_vector
from .errors import DomainError, InputError

LINKAGES = ("average", "complete", "single")

# Restart mass of the affinity walk in element_centric_similarity; 0.9 is
# the conventional choice.
AFFINITY_ALPHA = 0.9


def country_members(model, metadata, country):
    """Ids of a country's in-vocabulary locations, sorted."""
    if not isinstance(metadata, dict):
        metadata = metadata_by_id(metadata)
    return sorted(
        loc_id
        for loc_id, record in metadata.items()
        if record.country == country and loc_id in model.vocabulary
    )


def country_centroid(model, metadata, country):
    members = country_members(model, metadata, country)
    if not members:
        raise DomainError(f"country {country!r} has no in-vocabulary locations")
    return np.mean([in_vector(model, i) for i in members], axis=0)


def select_countries(metadata, vocabulary, min_orgs=25, exclusions=()):
    """Countries with at least min_orgs in-vocabulary locations, sorted."""
    if not isinstance(metadata, dict):
        metadata = metadata_by_id(metadata)
    counts = {}
    for loc_id, record in metadata.items():
        if loc_id in vocabulary and record.country:
            counts[record.country] = counts.get(record.country, 0) + 1
    excluded = set(exclusions)
    return sorted(
        country
        for country, count in counts.items()
        if count >= min_orgs and country not in excluded
    )


@dataclass(frozen=True)
class Dendrogram:
    """Agglomerative merge history.

    Leaves are ids 0..n-1 in `leaves` order; merge t creates cluster n+t.
    Each merge is (cluster_a, cluster_b, height), heights nondecreasing.
    """

    leaves: tuple
    merges: tuple

    def to_linkage(self):
        """Merge history as an (n-1) x 4 array: a, b, height, new size."""
        sizes = {i: 1 for i in range(len(self.leaves))}
        rows = []
        for t, (a, b, height) in enumerate(self.merges):
            size = sizes[a] + sizes[b]
            sizes[len(self.leaves) + t] = size
            rows.append([float(a), float(b), height, float(size)])
        return np.array(rows)


def centroid_similarity(centroids):
    """Cosine similarity matrix between centroids; rows follow sorted names."""
    names = sorted(centroids)
    n = len(names)
    matrix = np.ones((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            sim = 1.0 - cosine_distance(centroids[names[i]], centroids[names[j]])
            matrix[i, j] = matrix[j, i] = sim
    return names, matrix


def hierarchical_cluster(centroids, linkage="average"):
    """Agglomerative clustering of centroids on pairwise cosine distance.

    linkage is one of 'average', 'complete', 'single' (Lance-Williams
    updates). Ties on merge distance resolve by the smallest lexicographic
    pair of cluster representatives, making output order-independent.
    """
    if linkage not in LINKAGES:
        raise InputError(f"unknown linkage {linkage!r}; expected one of {LINKAGES}")
    names = sorted(centroids)
    n = len(names)
    if n < 2:
        raise InputError(f"need at least 2 centroids, got {n}")
    vectors = [np.asarray(centroids[name], dtype=float) for name in names]
    for name, vec in zip(names, vectors):
        if not np.any(vec):
            raise DomainError(f"centroid for {name!r} is a zero vector")

    total = 2 * n - 1
    distance = np.full((total, total), np.inf)
    for i in range(n):
        for j in range(i + 1, n):
            d = cosine_distance(vectors[i], vectors[j])
            distance[i, j] = distance[j, i] = d

    active = list(range(n))
    size = {i: 1 for i in range(n)}
    representative = {i: names[i] for i in range(n)}
    merges = []
    for t in range(n - 1):
        best = None
        best_d = np.inf
        best_pair = None
        for ai in range(len(active)):
            for bi in range(ai + 1, len(active)):
                a, b = active[ai], active[bi]
                d = distance[a, b]
                if d > best_d:
                    continue
                ra, rb = representative[a], representative[b]
                pair = (ra, rb) if ra < rb else (rb, ra)
                if d < best_d or best_pair is None or pair < best_pair:
                    best_d, best_pair, best = d, pair, (a, b)
        a, b = best
        height = distance[a, b]
        if merges and height < merges[-1][2]:
            height = merges[-1][2]
        new = n + t
        for c in active:
            if c in (a, b):
                continue
            if linkage == "average":
                d = (size[a] * distance[a, c] + size[b] * distance[b, c]) / (size[a] + size[b])
            elif linkage == "complete":
                d = max(distance[a, c], distance[b, c])
            else:
                d = min(distance[a, c], distance[b, c])
            distance[new, c] = distance[c, new] = d
        active.remove(a)
        active.remove(b)
        active.append(new)
        size[new] = size[a] + size[b]
        representative[new] = min(representative[a], representative[b])
        a, b = (a, b) if a < b else (b, a)
        merges.append((a, b, height))
    return Dendrogram(tuple(names), tuple(merges))


def cut(dendrogram, k):
    """Labels after undoing the last k-1 merges; dense integers from 0."""
    n = len(dendrogram.leaves)
    if not 1 <= k <= n:
        raise InputError(f"k must be in [1, {n}], got {k}")
    clusters = {i: {i} for i in range(n)}
    for t in range(n - k):
        a, b, _ = dendrogram.merges[t]
        clusters[n + t] = clusters.pop(a) | clusters.pop(b)
    groups = sorted(clusters.values(), key=min)
    labels = {}
    for label, group in enumerate(groups):
        for leaf in group:
            labels[dendrogram.leaves[leaf]] = label
    return labels


def _flat_affinity(elements, labels, alpha):
    """Closed-form walk affinities for a disjoint partition.

    Within a cluster of size s every row is alpha/s plus 1-alpha on the
    diagonal; across clusters zero.
    """
    n = len(elements)
    position = {element: i for i, element in enumerate(elements)}
    members = {}
    for element in elements:
        members.setdefault(labels[element], []).append(position[element])
    affinity = np.zeros((n, n))
    for group in members.values():
        idx = np.array(group)
        affinity[np.ix_(idx, idx)] = alpha / len(idx)
    affinity[np.diag_indices(n)] += 1.0 - alpha
    return affinity


def _dendrogram_affinity(dendrogram, r, alpha):
    """Walk affinities induced by a dendrogram, levels weighted by r.

    Every cluster of the hierarchy (singletons, merges, root) contributes
    weight exp(r * zeta) / size to its member pairs, with zeta the height
    rescaled so the root sits at 0 and leaves at 1; small r flattens the
    weights toward the coarse levels, large r emphasizes the fine ones.
    The affinity rows solve the same restart walk as the flat case.
    """
    n = len(dendrogram.leaves)
    clusters = {i: {i} for i in range(n)}
    cluster_heights = {i: 0.0 for i in range(n)}
    for t, (a, b, height) in enumerate(dendrogram.merges):
        clusters[n + t] = clusters[a] | clusters[b]
        cluster_heights[n + t] = height
    h_max = max(cluster_heights.values())
    adjacency = np.zeros((n, n))
    for cluster_id, members in clusters.items():
        zeta = 1.0 - cluster_heights[cluster_id] / h_max if h_max > 0 else 1.0
        weight = np.exp(r * zeta) / len(members)
        idx = np.array(sorted(members))
        adjacency[np.ix_(idx, idx)] += weight
    walk = adjacency / adjacency.sum(axis=1, keepdims=True)
    return (1.0 - alpha) * np.linalg.inv(np.eye(n) - alpha * walk)


def element_centric_similarity(clustering_a, clustering_b, r=1.0, alpha=AFFINITY_ALPHA):
    """Mean per-element agreement of walk-affinity rows, in [0, 1].

    clustering_a is a flat mapping element -> label or a Dendrogram (then
    r > 0 scales the level weights); clustering_b is a flat mapping. Each
    element scores 1 - L1(row_a, row_b)/(2 alpha); identical clusterings
    score exactly 1.
    """
    if isinstance(clustering_a, Dendrogram):
        if r <= 0:
            raise InputError(f"r must be positive for hierarchical input, got {r}")
        elements = list(clustering_a.leaves)
        if set(elements) != set(clustering_b):
            raise InputError("clusterings cover different element sets")
        affinity_a = _dendrogram_affinity(clustering_a, r, alpha)
    else:
        if set(clustering_a) != set(clustering_b):
            raise InputError("clusterings cover different element sets")
        elements = sorted(clustering_a)
        affinity_a = _flat_affinity(elements, clustering_a, alpha)
    affinity_b = _flat_affinity(elements, clustering_b, alpha)
    l1 = np.abs(affinity_a - affinity_b).sum(axis=1)
    scores = 1.0 - l1 / (2.0 * alpha)
    return float(min(max(scores.mean(), 0.0), 1.0))


def gini(values):
    """Gini coefficient of a nonnegative sample, in [0, 1]; 0 when constant."""
    x = np.sort(np.asarray(values, dtype=float))
    if x.size == 0:
        raise InputError("gini of an empty sample")
    if x[0] < 0:
        raise DomainError("gini requires nonnegative values")
    total = x.sum()
    if total == 0:
        return 0.0
    n = x.size
    ranks = np.arange(1, n + 1)
    return float(2.0 * np.dot(ranks, x) / (n * total) - (n + 1) / n)


@dataclass(frozen=True)
class NormSummary:
    country: str
    mean_norm: float
    org_norms: tuple
    skewness: float
    gini: float


def norm_summary(model, metadata, country):
    """Centroid norm plus the distribution shape of member vector norms.

    Skewness is the adjusted Fisher-Pearson coefficient, defined as 0 for
    degenerate samples (fewer than 3 members or zero spread).
    """
    members = country_members(model, metadata, country)
    if not members:
        raise DomainError(f"country {country!r} has no in-vocabulary locations")
    vectors = np.array([in_vector(model, i) for i in members])
    norms = np.linalg.norm(vectors, axis=1)
    mean_norm = float(np.linalg.norm(vectors.mean(axis=0)))
    if len(norms) < 3 or float(norms.std()) == 0.0:
        skewness = 0.0
    else:
        skewness = float(stats.skew(norms, bias=False))
    return NormSummary(
        country=country,
        mean_norm=mean_norm,
        org_norms=tuple(float(x) for x in norms),
        skewness=skewness,
        gini=gini(norms),
    )
