"""Skip-gram negative-sampling training over realized trajectories.

Every epoch re-realizes each trajectory (fresh within-period shuffles), walks
a +-window context around every position, and applies one gradient-ascent
step per (center, context) pair against k sampled negatives. Analyses
downstream read only the in-vectors; out-vectors exist for the objective.
"""

import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from .corpus import Vocabulary, build_vocabulary, realize
from .errors import DomainError, InputError, ParseError, TrainingError

# The linear rate schedule ends at initial_rate times this factor; a hard
# floor of zero would make late updates dead weight.
RATE_FLOOR_FACTOR = 1e-4


@dataclass(frozen=True)
class TrainConfig:
    dim: int = 300
    window: int = 1
    negatives: int = 5
    initial_rate: float = 0.025
    epochs: int = 5
    seed: int = 0
    workers: int = 1
    smoothing: float = 0.75
    f_min: int = 50
    subsample: float = 0.0

    def __post_init__(self):
        if self.dim < 2:
            raise InputError(f"dim must be >= 2, got {self.dim}")
        if self.window < 1:
            raise InputError(f"window must be >= 1, got {self.window}")
        if self.negatives < 1:
            raise InputError(f"negatives must be >= 1, got {self.negatives}")
        if self.initial_rate <= 0:
            raise InputError(f"initial_rate must be positive, got {self.initial_rate}")
        if self.epochs < 0:
            raise InputError(f"epochs must be >= 0, got {self.epochs}")
        if self.workers < 1:
            raise InputError(f"workers must be >= 1, got {self.workers}")
        if self.smoothing < 0:
            raise InputError(f"smoothing must be >= 0, got {self.smoothing}")
        if self.f_min < 1:
            raise InputError(f"f_min must be >= 1, got {self.f_min}")
        if self.subsample < 0:
            raise InputError(f"subsample must be >= 0, got {self.subsample}")


@dataclass
class EmbeddingModel:
    vocabulary: Vocabulary
    in_vectors: np.ndarray
    out_vectors: np.ndarray
    config: TrainConfig


def init_model(config, vocabulary, rng):
    """Fresh model: in-vectors uniform on [-0.5/d, 0.5/d], out-vectors zero."""
    if len(vocabulary) == 0:
        raise InputError("cannot initialize a model over an empty vocabulary")
    n, d = len(vocabulary), config.dim
    in_vectors = (rng.random((n, d)) - 0.5) / d
    out_vectors = np.zeros((n, d))
    return EmbeddingModel(vocabulary, in_vectors, out_vectors, config)


def context_pairs(sequence, window):
    """All (center, context) pairs within +-window, truncated at boundaries."""
    if window < 1:
        raise InputError(f"window must be >= 1, got {window}")
    n = len(sequence)
    pairs = []
    for t in range(n):
        lo = max(0, t - window)
        hi = min(n, t + window + 1)
        for s in range(lo, hi):
            if s != t:
                pairs.append((sequence[t], sequence[s]))
    return pairs


def negative_table(vocabulary, exponent=0.75):
    """Unigram sampling distribution with counts raised to `exponent`."""
    if exponent < 0:
        raise InputError(f"exponent must be >= 0, got {exponent}")
    weights = np.array(
        [float(vocabulary.counts[token]) ** exponent for token in vocabulary.tokens]
    )
    return weights / weights.sum()


def _log_sigmoid(x):
    # log(1/(1+e^-x)) without overflow on either tail.
    x = np.asarray(x, dtype=float)
    out = np.where(x >= 0, -np.log1p(np.exp(-np.abs(x))), x - np.log1p(np.exp(-np.abs(x))))
    return out


def sgns_objective(model, center, context, negatives):
    """log sigma(u_ctx . v_c) + sum_n log sigma(-u_n . v_c), no mutation."""
    v = model.in_vectors[center]
    s_pos = float(np.dot(model.out_vectors[context], v))
    s_neg = model.out_vectors[np.asarray(negatives, dtype=int)] @ v
    return float(_log_sigmoid(s_pos) + _log_sigmoid(-s_neg).sum())


def sgns_update(model, center, context, negatives, rate):
    """One gradient-ascent step on a single (center, context) sample.

    Mutates V[center], U[context], and U[n] for each negative, nothing else;
    returns the objective value at the pre-update parameters. Gradients are
    all evaluated at the pre-update point.
    """
    if rate <= 0:
        raise InputError(f"rate must be positive, got {rate}")
    V, U = model.in_vectors, model.out_vectors
    negatives = np.asarray(negatives, dtype=int)
    v = V[center]
    s_pos = float(np.dot(U[context], v))
    s_neg = U[negatives] @ v
    if not np.isfinite(s_pos) or not np.all(np.isfinite(s_neg)):
        raise TrainingError(
            f"non-finite score while updating pair (center={center}, context={context})"
        )
    loss = float(_log_sigmoid(s_pos) + _log_sigmoid(-s_neg).sum())
    g_pos = 1.0 - expit(s_pos)
    g_neg = expit(s_neg)
    grad_v = g_pos * U[context] - g_neg @ U[negatives]
    U[context] += rate * g_pos * v
    # add.at accumulates correctly when an index repeats among the negatives.
    np.add.at(U, negatives, (-rate) * g_neg[:, None] * v)
    V[center] += rate * grad_v
    return loss


def _scheduled_tokens(trajectory, vocabulary):
    return sum(
        1 for _, group in trajectory.groups for token in group if token in vocabulary
    )


def _draw_negatives(rng, cumulative, n_pairs, k):
    return np.searchsorted(cumulative, rng.random((n_pairs, k)), side="right")


class _Progress:
    """Shared token counter for the rate schedule; races are tolerated."""

    def __init__(self, total):
        self.total = max(total, 1)
        self.done = 0

    def rate(self, initial_rate):
        frac = min(self.done / self.total, 1.0)
        return initial_rate * (1.0 - (1.0 - RATE_FLOOR_FACTOR) * frac)


def _train_shard(model, trajectories, config, rng, cumulative, keep_prob, progress):
    vocab = model.vocabulary
    index = vocab.index
    k = config.negatives
    for trajectory in trajectories:
        rate = progress.rate(config.initial_rate)
        progress.done += _scheduled_tokens(trajectory, vocab)
        sequence = realize(trajectory, vocab, rng, collapse_duplicates=True)
        if keep_prob is not None and sequence:
            draws = rng.random(len(sequence))
            sequence = [
                token for token, u in zip(sequence, draws)
                if u < keep_prob[index[token]]
            ]
        if len(sequence) < 2:
            continue
        indices = [index[token] for token in sequence]
        pairs = context_pairs(indices, config.window)
        negatives = _draw_negatives(rng, cumulative, len(pairs), k)
        for (center, context), negs in zip(pairs, negatives):
            sgns_update(model, center, context, negs, rate)


def train(trajectories, config):
    """Train a model from scratch over `trajectories`.

    Deterministic (bit-identical across runs) when workers == 1; with more
    workers, shards share the parameter matrices without locking and results
    are only statistically reproducible.
    """
    vocab = build_vocabulary(trajectories, config.f_min)
    rng = np.random.default_rng(config.seed)
    model = init_model(config, vocab, rng)

    probabilities = negative_table(vocab, config.smoothing)
    cumulative = np.cumsum(probabilities)
    cumulative[-1] = 1.0

    keep_prob = None
    if config.subsample > 0:
        total = sum(vocab.counts.values())
        frequency = np.array([vocab.counts[t] / total for t in vocab.tokens])
        keep_prob = np.minimum(1.0, np.sqrt(config.subsample / frequency))

    per_epoch = sum(_scheduled_tokens(t, vocab) for t in trajectories)
    progress = _Progress(config.epochs * per_epoch)

    for _ in range(config.epochs):
        if config.workers == 1:
            _train_shard(model, trajectories, config, rng, cumulative, keep_prob, progress)
        else:
            shard_rngs = rng.spawn(config.workers)
            threads = [
                threading.Thread(
                    target=_train_shard,
                    args=(model, trajectories[w::config.workers], config,
                          shard_rngs[w], cumulative, keep_prob, progress),
                )
                for w in range(config.workers)
            ]
            for thread in threads:
                thread.start()
            for thread in threads:
                thread.join()

    if not (np.isfinite(model.in_vectors).all() and np.isfinite(model.out_vectors).all()):
        raise TrainingError("model contains non-finite entries after training")
    return model


def in_vector(model, location_id):
    """The in-vector for one location; analyses never read out-vectors."""
    if location_id not in model.vocabulary:
        raise DomainError(f"unknown location id {location_id!r}")
    return model.in_vectors[model.vocabulary.index[location_id]].copy()


def _out_path(path):
    path = Path(path)
    return path.with_name(path.stem + ".out" + path.suffix)


def _write_matrix(path, tokens, matrix):
    n, d = matrix.shape
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(f"{n} {d}\n")
        for token, row in zip(tokens, matrix):
            values = " ".join(format(x, ".17g") for x in row)
            handle.write(f"{token} {values}\n")


def save_model(model, path):
    """Write the model as text: `<V> <d>` header then one token per line.

    Values carry 17 significant digits so a load/save round trip is
    byte-identical; out-vectors go to a sibling `<stem>.out<suffix>` file.
    """
    for token in model.vocabulary.tokens:
        if any(ch.isspace() for ch in token):
            raise InputError(f"token {token!r} contains whitespace; cannot serialize")
    _write_matrix(path, model.vocabulary.tokens, model.in_vectors)
    _write_matrix(_out_path(path), model.vocabulary.tokens, model.out_vectors)


def _read_matrix(path):
    with open(path, encoding="utf-8") as handle:
        header = handle.readline().split()
        if len(header) != 2:
            raise ParseError(f"{path}: malformed header line")
        try:
            n, d = int(header[0]), int(header[1])
        except ValueError:
            raise ParseError(f"{path}: malformed header line") from None
        tokens = []
        matrix = np.empty((n, d))
        for i in range(n):
            parts = handle.readline().split()
            if len(parts) != d + 1:
                raise ParseError(f"{path}: line {i + 2}: expected {d + 1} fields")
            tokens.append(parts[0])
            matrix[i] = [float(x) for x in parts[1:]]
    return tokens, matrix


def load_model(path):
    """Load a serialized model.

    The sibling out-vector file is read when present (zeros otherwise); the
    reconstructed vocabulary carries no frequency information.
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"model file not found: {path}")
    tokens, in_vectors = _read_matrix(path)
    out_file = _out_path(path)
    if out_file.exists():
        out_tokens, out_vectors = _read_matrix(out_file)
        if out_tokens != tokens or out_vectors.shape != in_vectors.shape:
            raise ParseError(f"{out_file}: does not match {path}")
    else:
        out_vectors = np.zeros_like(in_vectors)
    vocabulary = Vocabulary(
        tokens=tuple(tokens),
        counts={},
        index={token: i for i, token in enumerate(tokens)},
    )
    config = TrainConfig(dim=in_vectors.shape[1])
    return EmbeddingModel(vocabulary, in_vectors, out_vectors, config)
