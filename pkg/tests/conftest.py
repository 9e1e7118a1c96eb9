import numpy as np
import pytest

from mobvec.corpus import LocationRecord, Trajectory, Visit, Vocabulary
from mobvec.embedding import EmbeddingModel, TrainConfig


def record(loc_id, country="XX", region="", lat=None, lon=None, sector="Unspecified",
           population=None, parent=None, name=None):
    return LocationRecord(
        id=loc_id, name=name or loc_id, latitude=lat, longitude=lon,
        country=country, region=region, sector=sector,
        external_population=population, general_parent=parent,
    )


def trajectory(entity_id, *groups):
    """groups are (period, token, token, ...) tuples."""
    built = tuple((g[0], tuple(sorted(g[1:]))) for g in groups)
    return Trajectory(entity_id, built)


def vocabulary_of(*tokens, counts=None):
    counts = counts or {token: 1 for token in tokens}
    ordered = tuple(sorted(tokens, key=lambda t: (-counts[t], t)))
    return Vocabulary(
        tokens=ordered,
        counts={t: counts[t] for t in ordered},
        index={t: i for i, t in enumerate(ordered)},
    )


def model_of(vectors, out_vectors=None, counts=None):
    """Model from {token: in_vector}; out-vectors default to zeros."""
    tokens = tuple(sorted(vectors))
    in_matrix = np.array([vectors[t] for t in tokens], dtype=float)
    if out_vectors is None:
        out_matrix = np.zeros_like(in_matrix)
    else:
        out_matrix = np.array([out_vectors[t] for t in tokens], dtype=float)
    vocab = Vocabulary(
        tokens=tokens,
        counts=counts or {t: 1 for t in tokens},
        index={t: i for i, t in enumerate(tokens)},
    )
    return EmbeddingModel(vocab, in_matrix, out_matrix,
                          TrainConfig(dim=in_matrix.shape[1]))


@pytest.fixture
def two_entity_visits():
    return [
        Visit("e1", "a", 0), Visit("e1", "b", 0), Visit("e1", "c", 1),
        Visit("e2", "a", 0), Visit("e2", "a", 1),
    ]
