"""Planted-truth benchmark generators.

Two families: a gravity benchmark with known decay exponent and planted
populations, and a community benchmark where flux concentrates inside
latent communities while geography is assigned independently. Both return
the ground truth alongside the data so recovery can be asserted.
"""

import numpy as np

from .corpus import LocationRecord, Visit, Vocabulary
from .distances import great_circle_km
from .embedding import EmbeddingModel, TrainConfig
from .errors import InputError
from .gravity import FluxMatrix


def _gravity_record(loc_id, lat, lon, population):
    return LocationRecord(
        id=loc_id, name=loc_id, latitude=lat, longitude=lon,
        country="XX", region="R0", sector="Unspecified",
        external_population=population, general_parent=None,
    )


def planted_gravity(n_locations=200, seed=0, noise="none", alpha=2.0,
                    min_expected=10.0, sigma=1.0, extent_deg=60.0,
                    floor_km=1.0):
    """Locations with lognormal populations and flux C m_i m_j r^-alpha.

    Flux is round(C m_i m_j r^-alpha) for noise='none' or a Poisson draw of
    that mean for noise='poisson'; C is scaled so the smallest expected flux
    is min_expected. Returns (records, flux, truth).
    """
    if noise not in ("none", "poisson"):
        raise InputError(f"unknown noise kind {noise!r}")
    rng = np.random.default_rng(seed)
    half = extent_deg / 2.0
    lats = rng.uniform(-half, half, n_locations)
    lons = rng.uniform(-1.5 * half, 1.5 * half, n_locations)
    populations = rng.lognormal(mean=3.0, sigma=sigma, size=n_locations)

    ids = tuple(f"L{i:04d}" for i in range(n_locations))
    records = [
        _gravity_record(ids[i], float(lats[i]), float(lons[i]), float(populations[i]))
        for i in range(n_locations)
    ]

    pair_expected = {}
    smallest = np.inf
    for i in range(n_locations):
        for j in range(i + 1, n_locations):
            r = great_circle_km((lats[i], lons[i]), (lats[j], lons[j]), floor_km)
            expected = populations[i] * populations[j] * r ** (-alpha)
            pair_expected[(i, j)] = expected
            smallest = min(smallest, expected)
    scale = min_expected / smallest

    counts = {}
    for key, expected in pair_expected.items():
        lam = scale * expected
        if noise == "none":
            count = int(round(lam))
        else:
            count = int(rng.poisson(lam))
        if count > 0:
            counts[key] = count
    flux = FluxMatrix(ids, counts, {ids[i]: float(populations[i]) for i in range(n_locations)})
    truth = {
        "alpha": alpha,
        "lnC": float(np.log(scale)),
        "noise": noise,
        "seed": seed,
        "n_locations": n_locations,
        "floor_km": floor_km,
    }
    return records, flux, truth


def flux_to_visits(flux, max_total=2_000_000):
    """Materialize a flux matrix as two-visit entities, one per unit of flux.

    Each unit of T_ij becomes one entity visiting i then j in consecutive
    periods, so consecutive-pair counting recovers T exactly.
    """
    total = flux.total()
    if total > max_total:
        raise InputError(
            f"flux total {total} exceeds {max_total}; "
            "shrink the benchmark before materializing visits"
        )
    visits = []
    entity = 0
    for a, b, count in flux.pairs():
        for _ in range(count):
            name = f"e{entity:07d}"
            visits.append(Visit(name, a, 0))
            visits.append(Visit(name, b, 1))
            entity += 1
    return visits


def planted_communities(n_communities=5, per_community=40, n_entities=1500,
                        traj_len=12, intra_prob=0.905, seed=0):
    """Visit data whose flux concentrates inside latent communities.

    Each entity walks traj_len steps from a home community: with intra_prob
    the next location stays inside the community (never repeating in place),
    otherwise it jumps to a uniformly random outside location. Coordinates
    are drawn independently of community. Excursions return home, so inter
    adjacencies come in pairs; intra_prob 0.905 lands the realized per-pair
    intra/inter flux ratio at about 20.

    Returns (records, visits, truth) where truth maps each location to its
    community and records the generator parameters.
    """
    if n_communities < 2 or per_community < 2:
        raise InputError("need at least 2 communities of at least 2 locations")
    rng = np.random.default_rng(seed)
    ids = []
    community_of = {}
    for c in range(n_communities):
        for i in range(per_community):
            loc_id = f"C{c}O{i:02d}"
            ids.append(loc_id)
            community_of[loc_id] = c

    records = []
    for loc_id in ids:
        records.append(LocationRecord(
            id=loc_id, name=loc_id,
            latitude=float(rng.uniform(-50, 50)),
            longitude=float(rng.uniform(-120, 120)),
            country=f"CT{community_of[loc_id]}",
            region=f"R{rng.integers(0, 2)}",
            sector="Unspecified",
            external_population=None,
            general_parent=None,
        ))

    by_community = [
        [loc_id for loc_id in ids if community_of[loc_id] == c]
        for c in range(n_communities)
    ]
    outside_community = [
        [loc_id for loc_id in ids if community_of[loc_id] != c]
        for c in range(n_communities)
    ]
    visits = []
    for e in range(n_entities):
        home = e % n_communities
        own = by_community[home]
        outside = outside_community[home]
        current = own[rng.integers(len(own))]
        visits.append(Visit(f"e{e:05d}", current, 0))
        for step in range(1, traj_len):
            if rng.random() < intra_prob:
                others = [loc for loc in own if loc != current]
                current = others[rng.integers(len(others))]
            else:
                current = outside[rng.integers(len(outside))]
            visits.append(Visit(f"e{e:05d}", current, step))

    truth = {
        "communities": community_of,
        "n_communities": n_communities,
        "per_community": per_community,
        "n_entities": n_entities,
        "traj_len": traj_len,
        "intra_prob": intra_prob,
        "seed": seed,
    }
    return records, visits, truth


def community_ranking(truth):
    """Reference ranking for the community benchmark: by community, then id."""
    ordered = sorted(truth["communities"], key=lambda i: (truth["communities"][i], i))
    return {loc_id: rank for rank, loc_id in enumerate(ordered, start=1)}


def planted_trait_model(n=40, dim=8, seed=0):
    """Embedding whose coordinate 0 carries a strictly monotone trait.

    Every vector is (t_i, 1, ..., 1) with distinct increasing t_i, so any
    axis built from trait extremes is parallel to coordinate 0 and cosine
    scores order exactly like the trait. Returns (model, trait) with trait
    mapping id -> planted value.
    """
    if n < 4:
        raise InputError(f"need at least 4 locations, got {n}")
    rng = np.random.default_rng(seed)
    traits = np.sort(rng.uniform(-2.0, 2.0, n))
    while len(np.unique(traits)) < n:
        traits = np.sort(rng.uniform(-2.0, 2.0, n))
    ids = tuple(f"T{i:03d}" for i in range(n))
    vectors = np.ones((n, dim))
    vectors[:, 0] = traits
    vocabulary = Vocabulary(
        tokens=ids,
        counts={loc_id: 1 for loc_id in ids},
        index={loc_id: i for i, loc_id in enumerate(ids)},
    )
    config = TrainConfig(dim=dim)
    model = EmbeddingModel(vocabulary, vectors, np.zeros((n, dim)), config)
    trait = {ids[i]: float(traits[i]) for i in range(n)}
    return model, trait
