import json
from pathlib import Path

import pytest

from mobvec.cli import DEFAULTS, build_parser, effective_config, main


def run(*argv):
    return main([str(a) for a in argv])


def parse(*argv):
    return build_parser().parse_args([str(a) for a in argv])


@pytest.fixture(scope="module")
def community_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("community")
    assert run("synth", "--benchmark", "community", "--communities", 2,
               "--per-community", 4, "--entities", 40, "--length", 6,
               "--seed", 0, "--out", out) == 0
    return out


@pytest.fixture(scope="module")
def model_dir(tmp_path_factory, community_dir):
    out = tmp_path_factory.mktemp("model")
    assert run("train", "--visits", community_dir / "visits.csv",
               "--f-min", 1, "--dim", 8, "--epochs", 2, "--seed", 0,
               "--out", out) == 0
    return out


@pytest.fixture(scope="module")
def gravity_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("gravity")
    assert run("synth", "--benchmark", "gravity", "--locations", 12,
               "--sigma", 0.3, "--extent", 10, "--min-expected", 1,
               "--seed", 0, "--out", out) == 0
    return out


class TestConfigMerge:
    def test_defaults_apply(self):
        config = effective_config(parse("train"))
        assert config["train"]["dim"] == 300
        assert config.seed == 0
        assert config["paths"]["output_dir"] == "out"

    def test_file_overrides_defaults(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text('seed = 7\n[train]\ndim = 64\n')
        config = effective_config(parse("train", "--config", path))
        assert config["train"]["dim"] == 64
        assert config.seed == 7
        assert config["train"]["epochs"] == 5

    def test_flag_overrides_file(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text('[train]\ndim = 64\n')
        config = effective_config(parse("train", "--config", path, "--dim", 32))
        assert config["train"]["dim"] == 32

    def test_no_figures_flag(self):
        assert effective_config(parse("train"))["figures"] is True
        assert effective_config(parse("train", "--no-figures"))["figures"] is False

    def test_unknown_top_level_key(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text('surprise = 1\n')
        assert run("train", "--config", path) == 2

    def test_unknown_section_key(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text('[train]\nlearning_rate = 0.1\n')
        assert run("train", "--config", path) == 2

    def test_malformed_toml(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text('[train\n')
        assert run("train", "--config", path) == 2

    def test_defaults_not_mutated(self):
        before = json.dumps(DEFAULTS, sort_keys=True)
        effective_config(parse("train", "--dim", 2, "--seed", 99))
        assert json.dumps(DEFAULTS, sort_keys=True) == before


class TestConfigHash:
    def test_stable_for_equal_values(self):
        a = effective_config(parse("train", "--dim", 16))
        b = effective_config(parse("train", "--dim", 16))
        assert a.hash == b.hash
        assert len(a.hash) == 12

    def test_sensitive_to_values(self):
        base = effective_config(parse("train"))
        assert effective_config(parse("train", "--seed", 1)).hash != base.hash
        assert effective_config(parse("train", "--dim", 64)).hash != base.hash

    def test_file_key_order_irrelevant(self, tmp_path):
        first = tmp_path / "a.toml"
        second = tmp_path / "b.toml"
        first.write_text('[train]\ndim = 8\nepochs = 2\n')
        second.write_text('[train]\nepochs = 2\ndim = 8\n')
        assert effective_config(parse("train", "--config", first)).hash == \
            effective_config(parse("train", "--config", second)).hash


class TestSynthCommand:
    def test_community_outputs(self, community_dir):
        for name in ("metadata.csv", "visits.csv", "ranking.csv", "truth.json"):
            assert (community_dir / name).exists()
        truth = json.loads((community_dir / "truth.json").read_text())
        assert truth["n_communities"] == 2
        assert "config_hash" in truth

    def test_gravity_outputs(self, gravity_dir):
        for name in ("metadata.csv", "flux.csv", "flux.manifest.json",
                     "visits.csv", "truth.json"):
            assert (gravity_dir / name).exists()
        manifest = json.loads((gravity_dir / "flux.manifest.json").read_text())
        assert manifest["n_locations"] == 12

    def test_no_visits_flag(self, tmp_path):
        assert run("synth", "--benchmark", "gravity", "--locations", 8,
                   "--sigma", 0.3, "--extent", 8, "--min-expected", 1,
                   "--no-visits", "--out", tmp_path) == 0
        assert not (tmp_path / "visits.csv").exists()
        assert (tmp_path / "flux.csv").exists()


class TestTrainCommand:
    def test_model_and_manifest(self, model_dir):
        assert (model_dir / "model.txt").exists()
        assert (model_dir / "model.out.txt").exists()
        manifest = json.loads((model_dir / "model.manifest.json").read_text())
        assert manifest["vocab_size"] == 8
        assert manifest["dim"] == 8

    def test_rerun_is_byte_identical(self, community_dir, model_dir, tmp_path):
        assert run("train", "--visits", community_dir / "visits.csv",
                   "--f-min", 1, "--dim", 8, "--epochs", 2, "--seed", 0,
                   "--out", tmp_path) == 0
        assert (tmp_path / "model.txt").read_bytes() == \
            (model_dir / "model.txt").read_bytes()
        assert (tmp_path / "model.out.txt").read_bytes() == \
            (model_dir / "model.out.txt").read_bytes()

    def test_missing_visits(self, capsys):
        assert run("train") == 2
        assert "--visits" in capsys.readouterr().err

    @pytest.mark.filterwarnings("ignore:overflow")
    def test_divergent_rate_exits_one(self, community_dir, tmp_path, capsys):
        assert run("train", "--visits", community_dir / "visits.csv",
                   "--f-min", 1, "--dim", 8, "--epochs", 3, "--rate", 1e8,
                   "--out", tmp_path) == 1
        assert "error" in capsys.readouterr().err


class TestGravityCommand:
    def test_geographic_fit_on_planted_data(self, gravity_dir, tmp_path):
        assert run("gravity", "--flux", gravity_dir / "flux.csv",
                   "--metadata", gravity_dir / "metadata.csv",
                   "--population", "external", "--distance", "geographic",
                   "--out", tmp_path) == 0
        report = json.loads((tmp_path / "gravity_geographic.json").read_text())
        assert report["family"] == "power"
        assert report["exponent_or_rate"] == pytest.approx(2.0, abs=0.1)
        assert (tmp_path / "gravity_geographic_bins.csv").exists()
        assert (tmp_path / "gravity_geographic.png").exists()

    def test_no_figures_skips_rendering(self, gravity_dir, tmp_path):
        assert run("gravity", "--flux", gravity_dir / "flux.csv",
                   "--metadata", gravity_dir / "metadata.csv",
                   "--population", "external", "--distance", "geographic",
                   "--no-figures", "--out", tmp_path) == 0
        assert not list(tmp_path.glob("*.png"))

    def test_embedding_distance_from_visits(self, community_dir, model_dir, tmp_path):
        assert run("gravity", "--visits", community_dir / "visits.csv",
                   "--model", model_dir / "model.txt", "--f-min", 1,
                   "--distance", "embedding", "--seed", 0, "--out", tmp_path) == 0
        report = json.loads((tmp_path / "gravity_embedding.json").read_text())
        assert report["family"] == "exponential"
        assert report["n_pairs"] > 0

    def test_hash_mixing_rejected(self, community_dir, model_dir, tmp_path, capsys):
        flux_dir = tmp_path / "flux"
        # different f_min -> different config hash than the model's
        assert run("export", "flux", "--visits", community_dir / "visits.csv",
                   "--f-min", 2, "--out", flux_dir) == 0
        assert run("gravity", "--flux", flux_dir / "flux.csv",
                   "--model", model_dir / "model.txt",
                   "--distance", "embedding", "--visits",
                   community_dir / "visits.csv", "--out", tmp_path / "out") == 2
        assert "config hash mismatch" in capsys.readouterr().err

    def test_matching_hashes_accepted(self, community_dir, tmp_path):
        # one config file shared across commands keeps the hashes equal
        work = tmp_path / "work"
        cfg = tmp_path / "run.toml"
        cfg.write_text(
            f'[paths]\nvisits = "{community_dir / "visits.csv"}"\n'
            f'output_dir = "{work}"\n'
            '[train]\nf_min = 1\ndim = 8\nepochs = 2\n'
        )
        assert run("export", "flux", "--config", cfg) == 0
        assert run("train", "--config", cfg) == 0
        assert run("gravity", "--config", cfg, "--flux", work / "flux.csv",
                   "--model", work / "model.txt", "--distance", "embedding") == 0


class TestBaselinesCommand:
    def test_outputs(self, community_dir, tmp_path):
        assert run("baselines", "--visits", community_dir / "visits.csv",
                   "--f-min", 1, "--source", "C0O00", "--out", tmp_path) == 0
        assert (tmp_path / "centralities.csv").exists()
        assert (tmp_path / "network.csv").exists()
        assert (tmp_path / "ppr_C0O00.csv").exists()
        assert (tmp_path / "baselines.png").exists()
        report = json.loads((tmp_path / "baselines.json").read_text())
        assert report["n_nodes"] == 8
        probabilities = [
            float(line.split(",")[1])
            for line in (tmp_path / "ppr_C0O00.csv").read_text().splitlines()[1:]
        ]
        assert sum(probabilities) == pytest.approx(1.0, abs=1e-9)


class TestSemaxisCommand:
    def test_pole_files(self, community_dir, model_dir, tmp_path):
        pos = tmp_path / "pos.txt"
        neg = tmp_path / "neg.txt"
        pos.write_text("C0O00\nC0O01\n")
        neg.write_text("C1O00\nC1O01\n")
        assert run("semaxis", "--model", model_dir / "model.txt",
                   "--pos-pole", pos, "--neg-pole", neg, "--out", tmp_path) == 0
        report = json.loads((tmp_path / "semaxis.json").read_text())
        assert report["n_scored"] == 8
        assert report["spearman_vs_reference"] is None
        lines = (tmp_path / "semaxis_scores.csv").read_text().splitlines()
        assert lines[0] == "id,score,rank"
        assert len(lines) == 9

    def test_overlapping_poles_exit_two(self, model_dir, tmp_path, capsys):
        pos = tmp_path / "pos.txt"
        neg = tmp_path / "neg.txt"
        pos.write_text("C0O00\n")
        neg.write_text("C0O00\n")
        assert run("semaxis", "--model", model_dir / "model.txt",
                   "--pos-pole", pos, "--neg-pole", neg, "--out", tmp_path) == 2
        assert "overlap" in capsys.readouterr().err

    def test_ranking_reference(self, community_dir, model_dir, tmp_path):
        assert run("semaxis", "--model", model_dir / "model.txt",
                   "--metadata", community_dir / "metadata.csv",
                   "--ranking", community_dir / "ranking.csv",
                   "--pole-size", 2, "--out", tmp_path) == 0
        report = json.loads((tmp_path / "semaxis.json").read_text())
        assert report["spearman_vs_reference"] is not None
        assert -1.0 <= report["spearman_vs_reference"] <= 1.0
        assert len(report["positive_pole"]) == 2

    def test_needs_poles_or_ranking(self, model_dir, capsys):
        assert run("semaxis", "--model", model_dir / "model.txt") == 2
        assert "pole files or a ranking" in capsys.readouterr().err


class TestAnalyzeCommand:
    def test_outputs(self, community_dir, model_dir, tmp_path):
        assert run("analyze", "--model", model_dir / "model.txt",
                   "--metadata", community_dir / "metadata.csv",
                   "--visits", community_dir / "visits.csv",
                   "--min-orgs", 2, "--k", 2, "--out", tmp_path) == 0
        for name in ("clusters.csv", "dendrogram.json", "similarity_matrix.csv",
                     "norm_summary.csv", "size_norm.csv", "analyze.json",
                     "clustering.png", "norms.png"):
            assert (tmp_path / name).exists(), name
        report = json.loads((tmp_path / "analyze.json").read_text())
        assert report["countries"] == ["CT0", "CT1"]
        assert sorted(set(report["clusters"].values())) == [0, 1]
        assert report["element_centric_vs_region"] is not None

    def test_min_orgs_filter_exit_two(self, community_dir, model_dir, tmp_path, capsys):
        assert run("analyze", "--model", model_dir / "model.txt",
                   "--metadata", community_dir / "metadata.csv",
                   "--min-orgs", 5, "--out", tmp_path) == 2
        assert "min_orgs" in capsys.readouterr().err


class TestExportCommand:
    def test_vectors_round_trip(self, model_dir, tmp_path):
        assert run("export", "vectors", "--model", model_dir / "model.txt",
                   "--out", tmp_path) == 0
        assert (tmp_path / "vectors.txt").read_bytes() == \
            (model_dir / "model.txt").read_bytes()
        assert (tmp_path / "vectors.out.txt").read_bytes() == \
            (model_dir / "model.out.txt").read_bytes()

    def test_flux_manifest(self, community_dir, tmp_path):
        assert run("export", "flux", "--visits", community_dir / "visits.csv",
                   "--f-min", 1, "--out", tmp_path) == 0
        manifest = json.loads((tmp_path / "flux.manifest.json").read_text())
        assert manifest["flux_mode"] == "consecutive"
        lines = (tmp_path / "flux.csv").read_text().splitlines()
        assert lines[0] == "source,target,flux"
        assert manifest["total"] == sum(int(l.split(",")[2]) for l in lines[1:])
