"""Network baselines over the mobility co-occurrence graph.

Personalized PageRank vectors give each location a network-based
representation to compare against the embeddings; degree strength and
eigenvector centrality are the scalar baselines.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .distances import cosine_distance
from .errors import ConvergenceError, DomainError

MAX_ITERATIONS = 100_000
LN2 = math.log(2.0)


class MobilityNetwork:
    """Undirected weighted graph; edge weight = flux count, no self-loops."""

    def __init__(self, nodes, weights):
        weights = sp.csr_array(weights)
        n = len(nodes)
        if weights.shape != (n, n):
            raise DomainError(f"weight matrix shape {weights.shape} does not match {n} nodes")
        if weights.diagonal().any():
            raise DomainError("self-loops are not allowed")
        if (abs(weights - weights.T)).sum() > 1e-9 * max(abs(weights).sum(), 1.0):
            raise DomainError("weight matrix must be symmetric")
        if weights.nnz and weights.data.min() < 0:
            raise DomainError("weights must be nonnegative")
        self.nodes = tuple(nodes)
        self.weights = weights
        self.node_index = {node: i for i, node in enumerate(self.nodes)}
        self.strengths = np.asarray(weights.sum(axis=1)).ravel()

    @classmethod
    def from_flux(cls, flux):
        rows, cols, data = [], [], []
        for (i, j), count in flux.counts.items():
            if count > 0:
                rows += [i, j]
                cols += [j, i]
                data += [count, count]
        n = len(flux.locations)
        if not data:
            weights = sp.csr_array((n, n))
        else:
            weights = sp.csr_array(
                (np.array(data, dtype=float), (np.array(rows), np.array(cols))),
                shape=(n, n),
            )
        return cls(flux.locations, weights)

    def _index(self, node):
        if node not in self.node_index:
            raise DomainError(f"unknown node {node!r}")
        return self.node_index[node]


@dataclass(frozen=True)
class PprVector:
    source: str
    p: np.ndarray


def _probabilities(value):
    p = value.p if isinstance(value, PprVector) else np.asarray(value, dtype=float)
    if p.min() < 0:
        raise DomainError("probability vector has negative entries")
    return p


def ppr(network, source, alpha=0.9, tol=1e-12):
    """Personalized PageRank from `source` by power iteration.

    Solves p = (1 - alpha) e_source + alpha p W_bar with W_bar the
    row-normalized weights; alpha is the walk mass, 1 - alpha the restart
    mass. Iterates until the L1 change drops below tol.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must be in (0, 1), got {alpha}")
    idx = network._index(source)
    strengths = network.strengths
    if strengths[idx] == 0:
        raise DomainError(f"source {source!r} is isolated")
    inverse = np.where(strengths > 0, 1.0 / np.maximum(strengths, 1e-300), 0.0)
    # p W_bar = (W D^-1)^T-free form: W is symmetric, so p W_bar = W @ (p / deg).
    weights = network.weights
    n = len(network.nodes)
    restart = np.zeros(n)
    restart[idx] = 1.0 - alpha
    p = np.zeros(n)
    p[idx] = 1.0
    for _ in range(MAX_ITERATIONS):
        walked = weights @ (p * inverse)
        new = restart + alpha * walked
        if np.abs(new - p).sum() < tol:
            p = new
            break
        p = new
    else:
        raise ConvergenceError(f"ppr from {source!r} did not converge in {MAX_ITERATIONS} iterations")
    p = np.maximum(p, 0.0)
    return PprVector(source, p / p.sum())


def ppr_cosine_distance(p_i, p_j):
    return cosine_distance(_probabilities(p_i), _probabilities(p_j))


def ppr_jsd(p_i, p_j):
    """Jensen-Shannon divergence, natural log, in [0, ln 2]; 0 ln 0 = 0."""
    p = _probabilities(p_i)
    q = _probabilities(p_j)
    if p.shape != q.shape:
        raise DomainError(f"length mismatch: {p.shape} vs {q.shape}")
    m = 0.5 * (p + q)
    mask_p = p > 0
    mask_q = q > 0
    kl_p = float(np.sum(p[mask_p] * np.log(p[mask_p] / m[mask_p])))
    kl_q = float(np.sum(q[mask_q] * np.log(q[mask_q] / m[mask_q])))
    return min(max(0.5 * kl_p + 0.5 * kl_q, 0.0), LN2)


def degree_strength(network, node):
    """Sum of edge weights at `node`."""
    return float(network.strengths[network._index(node)])


def eigenvector_centrality(network, tol=1e-10):
    """Leading eigenvector of W, nonnegative, computed per component.

    Each connected component with any edge weight gets its own unit-L2
    eigenvector; isolated nodes score zero. The iteration runs on W shifted
    by its max row sum, which leaves eigenvectors alone but keeps bipartite
    components from oscillating.
    """
    weights = network.weights
    n = len(network.nodes)
    scores = np.zeros(n)
    n_components, labels = connected_components(weights, directed=False)
    for component in range(n_components):
        members = np.flatnonzero(labels == component)
        if len(members) < 2:
            continue
        sub = weights[members][:, members].tocsr()
        shift = float(abs(sub).sum(axis=1).max())
        if shift == 0.0:
            continue
        x = np.full(len(members), 1.0 / math.sqrt(len(members)))
        for _ in range(MAX_ITERATIONS):
            y = sub @ x + shift * x
            norm = float(np.linalg.norm(y))
            y /= norm
            if float(np.linalg.norm(y - x)) < tol:
                x = y
                break
            x = y
        else:
            raise ConvergenceError(
                f"eigenvector centrality did not converge in {MAX_ITERATIONS} iterations"
            )
        scores[members] = x
    return {node: float(scores[i]) for i, node in enumerate(network.nodes)}
