"""Command-line driver: train, gravity, baselines, semaxis, analyze, export, synth.

Configuration comes from a TOML file merged over built-in defaults, with CLI
flags overriding file values. Every run derives a short hash of its
effective configuration; all reports embed it, and commands that consume
multiple hashed artifacts refuse to mix different hashes.

Exit statuses: 0 success, 1 numeric/convergence failure, 2 input/config error.
"""

import argparse
import copy
import csv
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import analysis as analysis_mod
from . import baselines as baselines_mod
from . import figures
from . import gravity as gravity_mod
from . import semaxis as semaxis_mod
from . import synth as synth_mod
from .corpus import (
    METADATA_HEADER,
    VISITS_HEADER,
    build_trajectories,
    build_vocabulary,
    filter_mobile,
    metadata_by_id,
    parse_metadata,
    parse_visits,
    prune_general,
)
from .distances import DistanceKind, cosine_distance, dot_similarity, great_circle_km
from .embedding import TrainConfig, in_vector, load_model, save_model, train
from .errors import DomainError, InputError, NumericError, ParseError, SchemaError
from .gravity import (
    Family,
    FluxMatrix,
    FluxMode,
    PopulationSource,
    compute_flux,
    compute_population,
    default_family,
    evaluate_fit,
    fit_gravity,
    restrict_scope,
)

DEFAULTS = {
    "seed": 0,
    "figures": True,
    "paths": {
        "metadata": None,
        "visits": None,
        "model": None,
        "output_dir": "out",
    },
    "train": {
        "dim": 300,
        "window": 1,
        "negatives": 5,
        "initial_rate": 0.025,
        "epochs": 5,
        "workers": 1,
        "smoothing": 0.75,
        "f_min": 50,
        "subsample": 0.0,
    },
    "gravity": {
        "distance": ["embedding", "geographic"],
        "family": "auto",
        "floor_km": 1.0,
        "flux_mode": "consecutive",
        "population": "unique",
        "scope": "all",
        "flux": None,
    },
    "baselines": {
        "alpha": 0.9,
        "tol": 1e-10,
        "sources": [],
    },
    "semaxis": {
        "ranking": None,
        "pole_size": 5,
        "pos_pole_file": None,
        "neg_pole_file": None,
        "ids": None,
    },
    "analysis": {
        "min_orgs": 25,
        "exclusions": [],
        "linkage": "average",
        "k": 6,
        "r": 1.0,
    },
    "synth": {
        "benchmark": "community",
        "locations": 60,
        "noise": "none",
        "alpha": 2.0,
        "sigma": 0.35,
        "extent_deg": 16.0,
        "min_expected": 2.0,
        "emit_visits": True,
        "communities": 5,
        "per_community": 40,
        "entities": 1500,
        "length": 12,
        "intra_prob": 0.905,
    },
}


class RunConfig:
    """The effective configuration of one run, hashable for provenance."""

    def __init__(self, values):
        self.values = values

    @property
    def hash(self):
        canonical = json.dumps(self.values, sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()[:12]

    def __getitem__(self, section):
        return self.values[section]

    @property
    def seed(self):
        return self.values["seed"]

    def path(self, key):
        value = self.values["paths"][key]
        return Path(value) if value else None

    def require_path(self, key, hint):
        value = self.path(key)
        if value is None:
            raise InputError(f"no {key} path configured; pass {hint} or set [paths] {key}")
        return value

    def output_dir(self):
        out = Path(self.values["paths"]["output_dir"])
        out.mkdir(parents=True, exist_ok=True)
        return out


def _merge_file(values, path):
    try:
        with open(path, "rb") as handle:
            loaded = tomllib.load(handle)
    except OSError as exc:
        raise InputError(f"cannot read config file: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"config file {path}: {exc}") from exc
    for key, value in loaded.items():
        if key not in values:
            raise InputError(f"unknown config key {key!r} in {path}")
        if isinstance(values[key], dict):
            if not isinstance(value, dict):
                raise InputError(f"config key {key!r} must be a table")
            for sub, item in value.items():
                if sub not in values[key]:
                    raise InputError(f"unknown config key {key}.{sub} in {path}")
                values[key][sub] = item
        else:
            values[key] = value


# argparse dest -> (section, key); dests not listed here are command-local.
_OVERRIDES = {
    "metadata": ("paths", "metadata"),
    "visits": ("paths", "visits"),
    "model": ("paths", "model"),
    "out": ("paths", "output_dir"),
    "seed": (None, "seed"),
    "dim": ("train", "dim"),
    "window": ("train", "window"),
    "negatives": ("train", "negatives"),
    "rate": ("train", "initial_rate"),
    "epochs": ("train", "epochs"),
    "workers": ("train", "workers"),
    "f_min": ("train", "f_min"),
    "smoothing": ("train", "smoothing"),
    "subsample": ("train", "subsample"),
    "distance": ("gravity", "distance"),
    "family": ("gravity", "family"),
    "floor_km": ("gravity", "floor_km"),
    "flux_mode": ("gravity", "flux_mode"),
    "population": ("gravity", "population"),
    "scope": ("gravity", "scope"),
    "flux": ("gravity", "flux"),
    "alpha": ("baselines", "alpha"),
    "tol": ("baselines", "tol"),
    "source": ("baselines", "sources"),
    "ranking": ("semaxis", "ranking"),
    "pole_size": ("semaxis", "pole_size"),
    "pos_pole": ("semaxis", "pos_pole_file"),
    "neg_pole": ("semaxis", "neg_pole_file"),
    "ids": ("semaxis", "ids"),
    "min_orgs": ("analysis", "min_orgs"),
    "exclude": ("analysis", "exclusions"),
    "linkage": ("analysis", "linkage"),
    "k": ("analysis", "k"),
    "r": ("analysis", "r"),
    "benchmark": ("synth", "benchmark"),
    "locations": ("synth", "locations"),
    "noise": ("synth", "noise"),
    "planted_alpha": ("synth", "alpha"),
    "sigma": ("synth", "sigma"),
    "extent": ("synth", "extent_deg"),
    "min_expected": ("synth", "min_expected"),
    "communities": ("synth", "communities"),
    "per_community": ("synth", "per_community"),
    "entities": ("synth", "entities"),
    "length": ("synth", "length"),
    "intra_prob": ("synth", "intra_prob"),
}


def effective_config(args):
    values = copy.deepcopy(DEFAULTS)
    if getattr(args, "config", None):
        _merge_file(values, args.config)
    for dest, (section, key) in _OVERRIDES.items():
        value = getattr(args, dest, None)
        if value is None:
            continue
        if section is None:
            values[key] = value
        else:
            values[section][key] = value
    if getattr(args, "no_figures", False):
        values["figures"] = False
    if getattr(args, "no_visits", False):
        values["synth"]["emit_visits"] = False
    return RunConfig(values)


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return path


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _manifest_path(artifact):
    return Path(artifact).with_suffix(".manifest.json")


def _read_manifest_hash(artifact):
    path = _manifest_path(artifact)
    if not path.exists():
        return None
    with open(path, encoding="utf-8") as handle:
        return json.load(handle).get("config_hash")


def _check_hashes(**named):
    """Reject mixing artifacts produced under different config hashes."""
    present = {name: h for name, h in named.items() if h is not None}
    if len(set(present.values())) > 1:
        detail = ", ".join(f"{name}={h}" for name, h in sorted(present.items()))
        raise InputError(f"config hash mismatch between inputs: {detail}")


def _load_corpus(config, metadata=None):
    """Visits -> pruned, mobile trajectories (and metadata when configured)."""
    visits_path = config.require_path("visits", "--visits")
    visits = parse_visits(visits_path)
    if metadata is None:
        metadata_path = config.path("metadata")
        metadata = parse_metadata(metadata_path) if metadata_path else None
    trajectories = build_trajectories(visits)
    if metadata:
        trajectories = prune_general(trajectories, metadata)
    trajectories = filter_mobile(trajectories)
    if not trajectories:
        raise InputError("no mobile trajectories in the visits file")
    return trajectories, metadata


def _train_config(config):
    section = config["train"]
    return TrainConfig(
        dim=section["dim"],
        window=section["window"],
        negatives=section["negatives"],
        initial_rate=section["initial_rate"],
        epochs=section["epochs"],
        seed=config.seed,
        workers=section["workers"],
        smoothing=section["smoothing"],
        f_min=section["f_min"],
        subsample=section["subsample"],
    )


def _format_float(x):
    return format(float(x), ".17g")


def cmd_train(args):
    config = effective_config(args)
    trajectories, _ = _load_corpus(config)
    train_config = _train_config(config)
    started = time.monotonic()
    model = train(trajectories, train_config)
    wall = time.monotonic() - started
    out = config.output_dir()
    model_path = config.path("model") or out / "model.txt"
    model_path.parent.mkdir(parents=True, exist_ok=True)
    save_model(model, model_path)
    _write_json(_manifest_path(model_path), {
        "config_hash": config.hash,
        "vocab_size": len(model.vocabulary),
        "dim": train_config.dim,
        "epochs": train_config.epochs,
        "seed": config.seed,
        "workers": train_config.workers,
        "wall_time_s": round(wall, 3),
    })
    print(f"wrote {model_path} ({len(model.vocabulary)} tokens, d={train_config.dim}, "
          f"{wall:.1f}s)")
    return 0


def _load_flux_csv(path):
    locations = set()
    entries = []
    try:
        handle = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read flux file: {path}") from exc
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != ["source", "target", "flux"]:
            raise SchemaError(f"flux header mismatch in {path}: expected source,target,flux")
        for row in reader:
            if not row:
                continue
            if len(row) != 3:
                raise ParseError(f"line {reader.line_num}: expected 3 fields")
            a, b, count = row
            try:
                count = int(count)
            except ValueError:
                raise ParseError(f"line {reader.line_num}: flux is not an integer") from None
            if count < 0:
                raise ParseError(f"line {reader.line_num}: negative flux")
            locations.update((a, b))
            entries.append((a, b, count))
    ordered = tuple(sorted(locations))
    index = {token: i for i, token in enumerate(ordered)}
    counts = {}
    for a, b, count in entries:
        ia, ib = index[a], index[b]
        if ia == ib:
            raise SchemaError(f"self-flux for {a!r} in {path}")
        key = (ia, ib) if ia < ib else (ib, ia)
        counts[key] = counts.get(key, 0) + count
    return FluxMatrix(ordered, counts)


def _flux_for(config, metadata):
    """FluxMatrix from a precomputed CSV or freshly counted visits."""
    flux_file = config["gravity"]["flux"]
    if flux_file:
        flux = _load_flux_csv(flux_file)
        flux_hash = _read_manifest_hash(flux_file)
        trajectories = None
    else:
        trajectories, metadata = _load_corpus(config, metadata)
        vocabulary = build_vocabulary(trajectories, config["train"]["f_min"])
        mode = FluxMode(config["gravity"]["flux_mode"])
        flux = compute_flux(trajectories, vocabulary, mode, seed=config.seed)
        flux_hash = None
    return flux, flux_hash, trajectories, metadata


def _populations_for(config, flux, trajectories, metadata):
    source = PopulationSource(config["gravity"]["population"])
    involved = sorted({token for a, b, _ in flux.pairs() for token in (a, b)})
    if source is PopulationSource.EXTERNAL:
        if metadata is None:
            raise InputError("external populations need a metadata file")
        return compute_population(metadata, source, locations=involved)
    if trajectories is None:
        if config.path("visits") is None:
            raise InputError(
                f"population source {source.value!r} counts entities from visits; "
                "pass --visits as well, or use --population external"
            )
        trajectories, _ = _load_corpus(config, metadata)
    return compute_population(trajectories, source)


def _distance_callable(kind, config, model, metadata, flux):
    if kind in (DistanceKind.EMBEDDING_COSINE, DistanceKind.EMBEDDING_DOT):
        if model is None:
            raise InputError(f"distance kind {kind.value!r} needs a model")
        cache = {}

        def vector(token):
            if token not in cache:
                cache[token] = in_vector(model, token)
            return cache[token]

        if kind is DistanceKind.EMBEDDING_COSINE:
            return lambda a, b: cosine_distance(vector(a), vector(b))
        return lambda a, b: dot_similarity(vector(a), vector(b))
    if kind is DistanceKind.GEOGRAPHIC_KM:
        if metadata is None:
            raise InputError("geographic distance needs a metadata file")
        records = metadata_by_id(metadata)
        floor = config["gravity"]["floor_km"]

        def geographic(a, b):
            for token in (a, b):
                if token not in records:
                    raise DomainError(f"no metadata for location {token!r}")
            return great_circle_km(records[a], records[b], floor)

        return geographic
    # PPR kinds share one network and a vector cache.
    network = baselines_mod.MobilityNetwork.from_flux(flux)
    alpha = config["baselines"]["alpha"]
    tol = config["baselines"]["tol"]
    cache = {}

    def ppr_vector(token):
        if token not in cache:
            cache[token] = baselines_mod.ppr(network, token, alpha, tol)
        return cache[token]

    if kind is DistanceKind.PPR_COSINE:
        return lambda a, b: baselines_mod.ppr_cosine_distance(ppr_vector(a), ppr_vector(b))
    return lambda a, b: baselines_mod.ppr_jsd(ppr_vector(a), ppr_vector(b))


def cmd_gravity(args):
    config = effective_config(args)
    out = config.output_dir()
    metadata_path = config.path("metadata")
    metadata = parse_metadata(metadata_path) if metadata_path else None

    kinds = [DistanceKind(value) for value in config["gravity"]["distance"]]
    needs_model = any(
        kind in (DistanceKind.EMBEDDING_COSINE, DistanceKind.EMBEDDING_DOT)
        for kind in kinds
    )
    model = model_hash = None
    if needs_model:
        model_path = config.require_path("model", "--model")
        model = load_model(model_path)
        model_hash = _read_manifest_hash(model_path)

    flux, flux_hash, trajectories, metadata = _flux_for(config, metadata)
    _check_hashes(model=model_hash, flux=flux_hash)
    flux.populations.update(_populations_for(config, flux, trajectories, metadata))

    scope = config["gravity"]["scope"]
    if scope != "all":
        if metadata is None:
            raise InputError(f"scope {scope!r} needs a metadata file")
        flux = restrict_scope(flux, metadata, scope)

    family_setting = config["gravity"]["family"]
    for kind in kinds:
        family = default_family(kind) if family_setting == "auto" else Family(family_setting)
        distance = _distance_callable(kind, config, model, metadata, flux)
        fit = fit_gravity(flux, distance, family, kind)
        metrics = evaluate_fit(fit, flux, distance)
        slug = kind.value.replace("-", "_")
        report = {
            "config_hash": config.hash,
            "inputs": {"model_config_hash": model_hash, "flux_config_hash": flux_hash},
            "distance_kind": kind.value,
            "family": fit.family.value,
            "lnC": fit.lnC,
            "exponent_or_rate": fit.exponent_or_rate,
            "r_squared": fit.r_squared,
            "rmse_log": fit.rmse_log,
            "n_pairs": fit.n_pairs,
            "metrics": {"r_squared_loglog": metrics.r_squared_loglog, "rmse": metrics.rmse},
            "scope": scope,
            "population": config["gravity"]["population"],
            "flux_mode": config["gravity"]["flux_mode"],
        }
        _write_json(out / f"gravity_{slug}.json", report)
        _write_csv(
            out / f"gravity_{slug}_bins.csv",
            ["bin_center", "mean_ln_flux", "n_pairs"],
            [(_format_float(c), _format_float(m), n) for c, m, n in metrics.binned_means],
        )
        if config["figures"]:
            x, _, ln_flux = gravity_mod._regression_arrays(flux, distance, fit.family)
            figures.gravity_figure(
                out / f"gravity_{slug}.png", kind.value, fit, metrics, x, ln_flux
            )
        print(f"gravity {kind.value}: family={fit.family.value} "
              f"slope={fit.exponent_or_rate:.4f} R2={fit.r_squared:.4f} "
              f"n={fit.n_pairs}")
    return 0


def cmd_baselines(args):
    config = effective_config(args)
    out = config.output_dir()
    trajectories, metadata = _load_corpus(config)
    vocabulary = build_vocabulary(trajectories, config["train"]["f_min"])
    mode = FluxMode(config["gravity"]["flux_mode"])
    flux = compute_flux(trajectories, vocabulary, mode, seed=config.seed)
    network = baselines_mod.MobilityNetwork.from_flux(flux)
    alpha = config["baselines"]["alpha"]
    tol = config["baselines"]["tol"]

    strengths = {
        node: baselines_mod.degree_strength(network, node) for node in network.nodes
    }
    centralities = baselines_mod.eigenvector_centrality(network, tol)
    _write_csv(
        out / "centralities.csv",
        ["node", "strength", "eigenvector"],
        [
            (node, _format_float(strengths[node]), _format_float(centralities[node]))
            for node in network.nodes
        ],
    )
    _write_csv(
        out / "network.csv",
        ["source", "target", "weight"],
        [(a, b, int(c)) for a, b, c in flux.pairs()],
    )

    ppr_files = []
    for source in config["baselines"]["sources"]:
        vector = baselines_mod.ppr(network, source, alpha, tol)
        path = out / f"ppr_{source}.csv"
        _write_csv(
            path,
            ["node", "probability"],
            [
                (node, _format_float(vector.p[i]))
                for i, node in enumerate(network.nodes)
                if vector.p[i] > 0
            ],
        )
        ppr_files.append(str(path))

    _write_json(out / "baselines.json", {
        "config_hash": config.hash,
        "alpha": alpha,
        "tol": tol,
        "n_nodes": len(network.nodes),
        "n_edges": int(network.weights.nnz // 2),
        "total_flux": int(flux.total()),
        "ppr_sources": config["baselines"]["sources"],
        "ppr_files": ppr_files,
    })
    if config["figures"]:
        figures.baselines_figure(out / "baselines.png", strengths, centralities)
    print(f"baselines: {len(network.nodes)} nodes, {network.weights.nnz // 2} edges")
    return 0


def _read_id_file(path):
    try:
        with open(path, encoding="utf-8") as handle:
            ids = [line.strip() for line in handle if line.strip()]
    except OSError as exc:
        raise InputError(f"cannot read id file: {path}") from exc
    if not ids:
        raise InputError(f"id file {path} is empty")
    return ids


def _ranking_from_scores(scores):
    entries = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return semaxis_mod.Ranking(tuple(entries))


def _read_ranking_csv(path):
    try:
        handle = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read ranking file: {path}") from exc
    table = {}
    with handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header != ["id", "rank"]:
            raise SchemaError(f"ranking header mismatch in {path}: expected id,rank")
        for row in reader:
            if not row:
                continue
            if len(row) != 2:
                raise ParseError(f"line {reader.line_num}: expected 2 fields")
            loc_id, rank = row
            if loc_id in table:
                raise SchemaError(f"duplicate id {loc_id!r} in {path}")
            try:
                rank = int(rank)
            except ValueError:
                raise ParseError(f"line {reader.line_num}: rank is not an integer") from None
            if rank < 1:
                raise ParseError(f"line {reader.line_num}: rank must be >= 1")
            table[loc_id] = rank
    if not table:
        raise InputError(f"ranking file {path} is empty")
    return table


def cmd_semaxis(args):
    config = effective_config(args)
    out = config.output_dir()
    model_path = config.require_path("model", "--model")
    model = load_model(model_path)
    model_hash = _read_manifest_hash(model_path)
    section = config["semaxis"]

    reference = None
    if section["pos_pole_file"] and section["neg_pole_file"]:
        pos_ids = _read_id_file(section["pos_pole_file"])
        neg_ids = _read_id_file(section["neg_pole_file"])
    elif section["ranking"]:
        reference = _read_ranking_csv(section["ranking"])
        metadata_path = config.require_path("metadata", "--metadata")
        metadata = parse_metadata(metadata_path)
        in_vocab = {i: r for i, r in reference.items() if i in model.vocabulary}
        if not in_vocab:
            raise InputError("no ranked id is in the model vocabulary")
        pos_ids, neg_ids = semaxis_mod.match_poles(
            in_vocab, metadata, section["pole_size"]
        )
    else:
        raise InputError(
            "semaxis needs either both pole files or a ranking CSV with metadata"
        )

    axis = semaxis_mod.build_axis(model, pos_ids, neg_ids)
    if section["ids"]:
        ids = [i for i in _read_id_file(section["ids"]) if i in model.vocabulary]
    elif reference:
        ids = [i for i in reference if i in model.vocabulary]
    else:
        ids = list(model.vocabulary.tokens)
    ranking = semaxis_mod.rank_by_axis(model, ids, axis)

    rho = None
    if reference:
        common = [i for i in ids if i in reference]
        if len(common) >= 2:
            scores = ranking.scores()
            rho = semaxis_mod.spearman(
                _ranking_from_scores({i: scores[i] for i in common}),
                {i: reference[i] for i in common},
            )

    _write_csv(
        out / "semaxis_scores.csv",
        ["id", "score", "rank"],
        [
            (loc_id, _format_float(score), position)
            for position, (loc_id, score) in enumerate(ranking.entries, start=1)
        ],
    )
    _write_json(out / "semaxis.json", {
        "config_hash": config.hash,
        "inputs": {"model_config_hash": model_hash},
        "positive_pole": list(axis.positive_ids),
        "negative_pole": list(axis.negative_ids),
        "n_scored": len(ranking.entries),
        "spearman_vs_reference": rho,
    })
    if config["figures"]:
        figures.semaxis_figure(out / "semaxis.png", ranking, reference)
    summary = f"spearman={rho:.4f}" if rho is not None else "no reference"
    print(f"semaxis: scored {len(ranking.entries)} ids, {summary}")
    return 0


def _region_labels(metadata, model, countries):
    """Country -> modal region of its in-vocabulary members, if any."""
    labels = {}
    for country in countries:
        regions = [
            record.region
            for record in metadata
            if record.country == country and record.region and record.id in model.vocabulary
        ]
        if not regions:
            return None
        counts = {}
        for region in regions:
            counts[region] = counts.get(region, 0) + 1
        labels[country] = min(counts, key=lambda r: (-counts[r], r))
    return labels


def cmd_analyze(args):
    config = effective_config(args)
    out = config.output_dir()
    model_path = config.require_path("model", "--model")
    model = load_model(model_path)
    model_hash = _read_manifest_hash(model_path)
    metadata_path = config.require_path("metadata", "--metadata")
    metadata = parse_metadata(metadata_path)
    section = config["analysis"]

    countries = analysis_mod.select_countries(
        metadata, model.vocabulary, section["min_orgs"], section["exclusions"]
    )
    if len(countries) < 2:
        raise InputError(
            f"only {len(countries)} countries pass min_orgs={section['min_orgs']}; "
            "need at least 2"
        )
    centroids = {
        country: analysis_mod.country_centroid(model, metadata, country)
        for country in countries
    }
    dendrogram = analysis_mod.hierarchical_cluster(centroids, section["linkage"])
    k = min(section["k"], len(countries))
    labels = analysis_mod.cut(dendrogram, k)
    names, similarity = analysis_mod.centroid_similarity(centroids)

    _write_csv(
        out / "clusters.csv",
        ["country", "cluster"],
        [(country, labels[country]) for country in countries],
    )
    _write_json(out / "dendrogram.json", {
        "config_hash": config.hash,
        "leaves": list(dendrogram.leaves),
        "merges": [[a, b, h] for a, b, h in dendrogram.merges],
        "linkage": section["linkage"],
    })
    _write_csv(
        out / "similarity_matrix.csv",
        ["country"] + names,
        [
            [names[i]] + [_format_float(similarity[i, j]) for j in range(len(names))]
            for i in range(len(names))
        ],
    )

    summaries = [
        analysis_mod.norm_summary(model, metadata, country) for country in countries
    ]
    _write_csv(
        out / "norm_summary.csv",
        ["country", "mean_norm", "n_orgs", "skewness", "gini"],
        [
            (s.country, _format_float(s.mean_norm), len(s.org_norms),
             _format_float(s.skewness), _format_float(s.gini))
            for s in summaries
        ],
    )

    r_values = section["r"]
    if not isinstance(r_values, list):
        r_values = [r_values]
    region_labels = _region_labels(metadata, model, countries)
    ecs_scores = None
    if region_labels:
        ecs_scores = {
            str(r): analysis_mod.element_centric_similarity(dendrogram, region_labels, r)
            for r in r_values
        }

    size_norm_points = None
    if config.path("visits"):
        trajectories, _ = _load_corpus(config, metadata)
        sizes = compute_population(
            trajectories, PopulationSource.YEARLY_AVERAGE_UNIQUE_ENTITIES
        )
        by_id = metadata_by_id(metadata)
        rows = []
        size_norm_points = []
        for country in countries:
            for loc_id in analysis_mod.country_members(model, metadata, country):
                if loc_id not in sizes:
                    continue
                norm = float(np.linalg.norm(in_vector(model, loc_id)))
                rows.append((loc_id, by_id[loc_id].country,
                             _format_float(sizes[loc_id]), _format_float(norm)))
                size_norm_points.append((sizes[loc_id], norm))
        _write_csv(out / "size_norm.csv", ["id", "country", "size", "norm"], rows)

    _write_json(out / "analyze.json", {
        "config_hash": config.hash,
        "inputs": {"model_config_hash": model_hash},
        "countries": countries,
        "k": k,
        "linkage": section["linkage"],
        "clusters": {country: labels[country] for country in countries},
        "element_centric_vs_region": ecs_scores,
    })
    if config["figures"]:
        figures.dendrogram_figure(out / "clustering.png", dendrogram, names, similarity)
        figures.norm_figure(out / "norms.png", summaries, size_norm_points)
    print(f"analyze: {len(countries)} countries, k={k}")
    return 0


def cmd_export(args):
    config = effective_config(args)
    out = config.output_dir()
    what = args.what
    if what == "vectors":
        model_path = config.require_path("model", "--model")
        model = load_model(model_path)
        target = out / "vectors.txt"
        save_model(model, target)
        _write_json(_manifest_path(target), {
            "config_hash": config.hash,
            "vocab_size": len(model.vocabulary),
            "source_model_config_hash": _read_manifest_hash(model_path),
        })
        print(f"wrote {target}")
        return 0
    trajectories, _ = _load_corpus(config)
    vocabulary = build_vocabulary(trajectories, config["train"]["f_min"])
    mode = FluxMode(config["gravity"]["flux_mode"])
    flux = compute_flux(trajectories, vocabulary, mode, seed=config.seed)
    if what == "flux":
        target = out / "flux.csv"
        _write_csv(target, ["source", "target", "flux"],
                   [(a, b, int(c)) for a, b, c in flux.pairs()])
    else:
        target = out / "network.csv"
        _write_csv(target, ["source", "target", "weight"],
                   [(a, b, int(c)) for a, b, c in flux.pairs()])
    _write_json(_manifest_path(target), {
        "config_hash": config.hash,
        "flux_mode": config["gravity"]["flux_mode"],
        "f_min": config["train"]["f_min"],
        "seed": config.seed,
        "n_locations": len(flux.locations),
        "total": int(flux.total()),
    })
    print(f"wrote {target}")
    return 0


def _write_metadata_csv(path, records):
    rows = []
    for record in records:
        rows.append((
            record.id,
            record.name,
            "" if record.latitude is None else _format_float(record.latitude),
            "" if record.longitude is None else _format_float(record.longitude),
            record.country,
            record.region,
            record.sector,
            "" if record.external_population is None else _format_float(record.external_population),
            record.general_parent or "",
        ))
    return _write_csv(path, METADATA_HEADER, rows)


def _write_visits_csv(path, visits):
    return _write_csv(
        path, VISITS_HEADER, [(v.entity_id, v.location_id, v.period) for v in visits]
    )


def cmd_synth(args):
    config = effective_config(args)
    out = config.output_dir()
    section = config["synth"]
    benchmark = section["benchmark"]
    if benchmark == "gravity":
        records, flux, truth = synth_mod.planted_gravity(
            n_locations=section["locations"],
            seed=config.seed,
            noise=section["noise"],
            alpha=section["alpha"],
            min_expected=section["min_expected"],
            sigma=section["sigma"],
            extent_deg=section["extent_deg"],
        )
        _write_metadata_csv(out / "metadata.csv", records)
        flux_path = out / "flux.csv"
        _write_csv(flux_path, ["source", "target", "flux"],
                   [(a, b, int(c)) for a, b, c in flux.pairs()])
        _write_json(_manifest_path(flux_path), {
            "config_hash": config.hash,
            "flux_mode": "planted",
            "seed": config.seed,
            "n_locations": len(flux.locations),
            "total": int(flux.total()),
        })
        written = [str(out / "metadata.csv"), str(flux_path)]
        if section["emit_visits"]:
            visits = synth_mod.flux_to_visits(flux)
            _write_visits_csv(out / "visits.csv", visits)
            written.append(str(out / "visits.csv"))
        _write_json(out / "truth.json", {"config_hash": config.hash, **truth})
        print(f"synth gravity: {len(records)} locations, total flux {flux.total()}")
    elif benchmark == "community":
        records, visits, truth = synth_mod.planted_communities(
            n_communities=section["communities"],
            per_community=section["per_community"],
            n_entities=section["entities"],
            traj_len=section["length"],
            intra_prob=section["intra_prob"],
            seed=config.seed,
        )
        _write_metadata_csv(out / "metadata.csv", records)
        _write_visits_csv(out / "visits.csv", visits)
        ranking = synth_mod.community_ranking(truth)
        _write_csv(out / "ranking.csv", ["id", "rank"],
                   sorted(ranking.items(), key=lambda item: item[1]))
        _write_json(out / "truth.json", {"config_hash": config.hash, **truth})
        print(f"synth community: {len(records)} locations, {truth['n_entities']} entities")
    else:
        raise InputError(f"unknown benchmark {benchmark!r}")
    return 0


def _add_common(parser):
    parser.add_argument("--config", help="TOML config file")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int, help="global seed")
    parser.add_argument("--no-figures", action="store_true",
                        help="skip figure rendering")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mobvec",
        description="Location embeddings from trajectories, with gravity and network analyses",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train an embedding from visits")
    _add_common(p)
    p.add_argument("--visits")
    p.add_argument("--metadata")
    p.add_argument("--model", help="model output path")
    p.add_argument("--dim", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--negatives", type=int)
    p.add_argument("--rate", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--f-min", type=int, dest="f_min")
    p.add_argument("--smoothing", type=float)
    p.add_argument("--subsample", type=float)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("gravity", help="fit gravity models over the flux")
    _add_common(p)
    p.add_argument("--visits")
    p.add_argument("--metadata")
    p.add_argument("--model")
    p.add_argument("--flux", help="precomputed flux CSV")
    p.add_argument("--distance", action="append",
                   choices=[kind.value for kind in DistanceKind])
    p.add_argument("--family", choices=["auto", "power", "exponential"])
    p.add_argument("--floor-km", type=float, dest="floor_km")
    p.add_argument("--flux-mode", choices=["consecutive", "all-pairs"], dest="flux_mode")
    p.add_argument("--population", choices=["unique", "yearly", "external"])
    p.add_argument("--scope", choices=["all", "domestic", "international"])
    p.add_argument("--f-min", type=int, dest="f_min")
    p.set_defaults(func=cmd_gravity)

    p = sub.add_parser("baselines", help="network centralities and PPR vectors")
    _add_common(p)
    p.add_argument("--visits")
    p.add_argument("--metadata")
    p.add_argument("--alpha", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--source", action="append", help="PPR source node (repeatable)")
    p.add_argument("--f-min", type=int, dest="f_min")
    p.add_argument("--flux-mode", choices=["consecutive", "all-pairs"], dest="flux_mode")
    p.set_defaults(func=cmd_baselines)

    p = sub.add_parser("semaxis", help="axis projection and ranking comparison")
    _add_common(p)
    p.add_argument("--model")
    p.add_argument("--metadata")
    p.add_argument("--ranking", help="reference ranking CSV (id,rank)")
    p.add_argument("--pole-size", type=int, dest="pole_size")
    p.add_argument("--pos-pole", dest="pos_pole", help="file of positive pole ids")
    p.add_argument("--neg-pole", dest="neg_pole", help="file of negative pole ids")
    p.add_argument("--ids", help="file of ids to score (default: ranked ids)")
    p.set_defaults(func=cmd_semaxis)

    p = sub.add_parser("analyze", help="country clustering and norm diagnostics")
    _add_common(p)
    p.add_argument("--model")
    p.add_argument("--metadata")
    p.add_argument("--visits", help="visits file for size/norm export")
    p.add_argument("--min-orgs", type=int, dest="min_orgs")
    p.add_argument("--exclude", action="append", help="country to exclude (repeatable)")
    p.add_argument("--linkage", choices=["average", "complete", "single"])
    p.add_argument("--k", type=int)
    p.add_argument("--r", type=float)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("export", help="export vectors, flux, or the network")
    _add_common(p)
    p.add_argument("what", choices=["vectors", "flux", "network"])
    p.add_argument("--visits")
    p.add_argument("--metadata")
    p.add_argument("--model")
    p.add_argument("--f-min", type=int, dest="f_min")
    p.add_argument("--flux-mode", choices=["consecutive", "all-pairs"], dest="flux_mode")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("synth", help="generate planted benchmark data")
    _add_common(p)
    p.add_argument("--benchmark", choices=["gravity", "community"])
    p.add_argument("--locations", type=int)
    p.add_argument("--noise", choices=["none", "poisson"])
    p.add_argument("--planted-alpha", type=float, dest="planted_alpha")
    p.add_argument("--sigma", type=float)
    p.add_argument("--extent", type=float)
    p.add_argument("--min-expected", type=float, dest="min_expected")
    p.add_argument("--no-visits", action="store_true",
                   help="gravity benchmark: skip visit materialization")
    p.add_argument("--communities", type=int)
    p.add_argument("--per-community", type=int, dest="per_community")
    p.add_argument("--entities", type=int)
    p.add_argument("--length", type=int)
    p.add_argument("--intra-prob", type=float, dest="intra_prob")
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
