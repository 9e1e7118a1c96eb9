"""Flux counting and gravity-model fits.

The model is T_hat_ij = C * m_i * m_j * f(r_ij), fitted by ordinary least
squares of ln(T_ij / (m_i m_j)) against the regressor of the chosen decay
family. Pairs with zero flux are excluded throughout.
"""

import enum
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import metadata_by_id, realize
from .distances import DistanceKind
from .errors import DomainError, FitError, InputError


class FluxMode(enum.Enum):
    CONSECUTIVE_DISTINCT = "consecutive"
    ALL_PAIRS_WITHIN_TRAJECTORY = "all-pairs"


class PopulationSource(enum.Enum):
    UNIQUE_ENTITIES = "unique"
    YEARLY_AVERAGE_UNIQUE_ENTITIES = "yearly"
    EXTERNAL = "external"


class Family(enum.Enum):
    POWER_LAW = "power"
    EXPONENTIAL = "exponential"


@dataclass
class FluxMatrix:
    """Symmetric co-occurrence counts, stored sparsely as index pairs i < j."""

    locations: tuple[str, ...]
    counts: dict
    populations: dict = field(default_factory=dict)

    def __post_init__(self):
        self.index = {token: i for i, token in enumerate(self.locations)}

    def flux(self, a, b):
        ia, ib = self.index[a], self.index[b]
        if ia == ib:
            return 0
        key = (ia, ib) if ia < ib else (ib, ia)
        return self.counts.get(key, 0)

    def pairs(self):
        """Yield (location_a, location_b, count) for every nonzero pair, i < j."""
        for (ia, ib), count in sorted(self.counts.items()):
            if count > 0:
                yield self.locations[ia], self.locations[ib], count

    def total(self):
        return sum(self.counts.values())


def compute_flux(trajectories, vocabulary, mode=FluxMode.CONSECUTIVE_DISTINCT, seed=0):
    """Count co-occurrences between in-vocabulary locations.

    CONSECUTIVE_DISTINCT realizes each trajectory once (fixed seed, duplicate
    runs collapsed) and counts each unordered adjacent pair;
    ALL_PAIRS_WITHIN_TRAJECTORY counts each unordered pair of distinct
    locations once per trajectory containing both.
    """
    mode = FluxMode(mode)
    index = vocabulary.index
    counts = {}
    if mode is FluxMode.CONSECUTIVE_DISTINCT:
        rng = np.random.default_rng(seed)
        for trajectory in trajectories:
            sequence = realize(trajectory, vocabulary, rng, collapse_duplicates=True)
            for a, b in zip(sequence, sequence[1:]):
                ia, ib = index[a], index[b]
                key = (ia, ib) if ia < ib else (ib, ia)
                counts[key] = counts.get(key, 0) + 1
    else:
        for trajectory in trajectories:
            members = sorted(
                {index[token] for token in trajectory.distinct() if token in vocabulary}
            )
            for key in itertools.combinations(members, 2):
                counts[key] = counts.get(key, 0) + 1
    return FluxMatrix(tuple(vocabulary.tokens), counts)


def compute_population(data, source, locations=None):
    """Location populations m_i.

    UNIQUE_ENTITIES and YEARLY_AVERAGE_UNIQUE_ENTITIES read trajectories
    (`data` is the trajectory list); EXTERNAL reads metadata records. With
    `locations` given, EXTERNAL checks exactly those ids and fails on a
    missing value.
    """
    source = PopulationSource(source)
    if source is PopulationSource.EXTERNAL:
        metadata = data if isinstance(data, dict) else metadata_by_id(data)
        wanted = locations if locations is not None else list(metadata)
        populations = {}
        for loc_id in wanted:
            record = metadata.get(loc_id)
            if record is None or record.external_population is None:
                raise DomainError(f"no external population for location {loc_id!r}")
            populations[loc_id] = float(record.external_population)
        return populations
    if source is PopulationSource.UNIQUE_ENTITIES:
        entities = {}
        for trajectory in data:
            for token in trajectory.distinct():
                entities.setdefault(token, set()).add(trajectory.entity_id)
        return {token: float(len(ids)) for token, ids in entities.items()}
    # Yearly average: distinct entities per (location, period), averaged over
    # every period present in the corpus.
    periods = set()
    per_period = {}
    for trajectory in data:
        for period, group in trajectory.groups:
            periods.add(period)
            for token in set(group):
                per_period.setdefault(token, {}).setdefault(period, set()).add(
                    trajectory.entity_id
                )
    n_periods = len(periods)
    if n_periods == 0:
        return {}
    return {
        token: sum(len(ids) for ids in by_period.values()) / n_periods
        for token, by_period in per_period.items()
    }


@dataclass(frozen=True)
class GravityFit:
    family: Family
    distance_kind: DistanceKind | None
    lnC: float
    exponent_or_rate: float
    r_squared: float
    rmse_log: float
    n_pairs: int


@dataclass(frozen=True)
class FitMetrics:
    r_squared_loglog: float
    rmse: float
    binned_means: tuple  # (bin_center, mean_ln_flux, n_pairs) rows


def default_family(kind):
    """Power decay for geographic distance, exponential for everything else."""
    kind = DistanceKind(kind)
    if kind is DistanceKind.GEOGRAPHIC_KM:
        return Family.POWER_LAW
    return Family.EXPONENTIAL


def _regression_arrays(flux, distances, family):
    """Regressor x, response y = ln(T/(m_i m_j)), and ln T per nonzero pair."""
    xs, ys, ln_flux = [], [], []
    for a, b, count in flux.pairs():
        for token in (a, b):
            m = flux.populations.get(token)
            if m is None:
                raise DomainError(f"population missing for location {token!r}")
            if m <= 0:
                raise DomainError(f"population must be positive for location {token!r}")
        r = float(distances(a, b))
        if not math.isfinite(r):
            raise DomainError(f"non-finite distance for pair ({a!r}, {b!r})")
        if family is Family.POWER_LAW:
            if r <= 0:
                raise DomainError(
                    f"power-law family needs positive distance, got {r} for ({a!r}, {b!r})"
                )
            x = math.log(r)
        else:
            x = r
        log_t = math.log(count)
        xs.append(x)
        ys.append(log_t - math.log(flux.populations[a]) - math.log(flux.populations[b]))
        ln_flux.append(log_t)
    return np.array(xs), np.array(ys), np.array(ln_flux)


def _ols(x, y):
    """Slope/intercept/R^2/RMSE of y on x with an intercept term."""
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = float(np.dot(xc, xc))
    if sxx == 0.0:
        raise FitError("distances are constant across all pairs; cannot fit")
    slope = float(np.dot(xc, yc)) / sxx
    intercept = float(y.mean() - slope * x.mean())
    residuals = y - (intercept + slope * x)
    sse = float(np.dot(residuals, residuals))
    sst = float(np.dot(yc, yc))
    if sst == 0.0:
        r_squared = 1.0 if sse < 1e-12 else 0.0
    else:
        r_squared = min(max(1.0 - sse / sst, 0.0), 1.0)
    rmse = math.sqrt(sse / len(x))
    return slope, intercept, r_squared, rmse


def fit_gravity(flux, distances, family, kind=None):
    """Fit one gravity regression over the nonzero-flux pairs.

    `distances` maps a location pair to a real; the family decides the
    regressor: ln r for POWER_LAW (slope is -alpha), r for EXPONENTIAL
    (slope is -beta). The returned exponent_or_rate is alpha or beta.
    """
    family = Family(family)
    x, y, _ = _regression_arrays(flux, distances, family)
    if len(x) < 3:
        raise FitError(f"need at least 3 nonzero pairs to fit, got {len(x)}")
    slope, intercept, r_squared, rmse = _ols(x, y)
    return GravityFit(
        family=family,
        distance_kind=DistanceKind(kind) if kind is not None else None,
        lnC=intercept,
        exponent_or_rate=-slope,
        r_squared=r_squared,
        rmse_log=rmse,
        n_pairs=len(x),
    )


def predict_flux(fit, m_i, m_j, r):
    """Expected flux C * m_i * m_j * f(r) under a fitted model."""
    if m_i <= 0 or m_j <= 0:
        raise DomainError("populations must be positive")
    if fit.family is Family.POWER_LAW:
        if r <= 0:
            raise DomainError(f"power-law family needs positive distance, got {r}")
        decay = r ** (-fit.exponent_or_rate)
    else:
        decay = math.exp(-fit.exponent_or_rate * r)
    return math.exp(fit.lnC) * m_i * m_j * decay


def evaluate_fit(fit, flux, distances, bins=50):
    """Goodness-of-fit metrics plus binned means for plot export.

    R^2 and RMSE are computed in the fitted (log) space; binned_means holds
    the mean ln T per equal-width bin of the regressor, nonempty bins only.
    """
    x, y, ln_flux = _regression_arrays(flux, distances, fit.family)
    predicted = fit.lnC - fit.exponent_or_rate * x
    residuals = y - predicted
    sse = float(np.dot(residuals, residuals))
    yc = y - y.mean()
    sst = float(np.dot(yc, yc))
    if sst == 0.0:
        r_squared = 1.0 if sse < 1e-12 else 0.0
    else:
        r_squared = min(max(1.0 - sse / sst, 0.0), 1.0)
    rmse = math.sqrt(sse / len(x))

    lo, hi = float(x.min()), float(x.max())
    rows = []
    if lo == hi:
        rows.append((lo, float(ln_flux.mean()), len(x)))
    else:
        edges = np.linspace(lo, hi, bins + 1)
        which = np.clip(np.digitize(x, edges) - 1, 0, bins - 1)
        for b in range(bins):
            mask = which == b
            if mask.any():
                center = 0.5 * (edges[b] + edges[b + 1])
                rows.append((float(center), float(ln_flux[mask].mean()), int(mask.sum())))
    return FitMetrics(r_squared_loglog=r_squared, rmse=rmse, binned_means=tuple(rows))


def restrict_scope(flux, metadata, scope):
    """Keep only domestic (same-country) or international pairs.

    Returns a new FluxMatrix over the same location list; populations carry
    over unchanged. scope is one of 'all', 'domestic', 'international'.
    """
    if scope not in ("all", "domestic", "international"):
        raise InputError(f"unknown scope {scope!r}")
    if scope == "all":
        return flux
    if not isinstance(metadata, dict):
        metadata = metadata_by_id(metadata)
    counts = {}
    for (ia, ib), count in flux.counts.items():
        a, b = flux.locations[ia], flux.locations[ib]
        rec_a, rec_b = metadata.get(a), metadata.get(b)
        if rec_a is None or rec_b is None:
            raise DomainError(f"no metadata for pair ({a!r}, {b!r})")
        same = rec_a.country == rec_b.country
        if (scope == "domestic") == same:
            counts[(ia, ib)] = count
    return FluxMatrix(flux.locations, counts, dict(flux.populations))
