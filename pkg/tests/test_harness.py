import json

import pytest

from trunclab.cli import main
from trunclab.embedding import EmbeddedGraph, ScaleVector, SlabParameters
from trunclab.harness import (
    PipelineConfig,
    containment_check,
    load_config,
    run_pipeline,
)
from trunclab.sequences import EpsilonCertificate, ProbabilitySequence
from trunclab.thresholds import ThresholdSettings
from trunclab.windows import ConfigError

FAST_THRESHOLDS = ThresholdSettings(
    l_schedule=(6, 12), bracket_tol=0.04, trials_per_probe=400, coarse_trials=150
)


def small_config(**overrides) -> PipelineConfig:
    defaults = dict(
        sequence=ProbabilitySequence.lacunary(0.9, base=2),
        certificate=EpsilonCertificate(0.45, evidence="0.9 on a geometric length set"),
        margin=0.02,
        d_max=4,
        k_max=3,
        verify_coarse=2,
        verify_vertical=2,
        theta_radii=(8, 12),
        theta_trials=200,
        containment_trials=100,
        thresholds=FAST_THRESHOLDS,
        master_seed=424242,
    )
    defaults.update(overrides)
    return PipelineConfig(**defaults)


CONFIG_TEXT = """
[sequence]
kind = lacunary
base = 2
value = 0.9

[certificate]
epsilon = 0.45
evidence = geometric support at 0.9

[search]
margin = 0.02
d_max = 4
k_max = 3

[thresholds]
l_schedule = 6, 12
bracket_tol = 0.04
trials_per_probe = 400
coarse_trials = 150

[verify]
coarse_window = 2
vertical_window = 2

[theta]
radii = 8, 12
trials = 200
positivity_floor = 0.05

[containment]
trials = 100

[run]
master_seed = 424242

[embedding]
dimension = 3
thickness = 2
"""


class TestConfig:
    def test_load_round_trip(self, tmp_path):
        path = tmp_path / "exp.ini"
        path.write_text(CONFIG_TEXT)
        config = load_config(path)
        assert config.certificate.epsilon == 0.45
        assert config.thresholds.l_schedule == (6, 12)
        assert config.theta_radii == (8, 12)
        assert config.master_seed == 424242
        assert config.sequence.probability(4) == 0.9
        assert config.embedding_dimension == 3
        assert config.raw_text == CONFIG_TEXT

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.ini")

    def test_bad_epsilon(self, tmp_path):
        path = tmp_path / "exp.ini"
        path.write_text(CONFIG_TEXT.replace("epsilon = 0.45", "epsilon = 0.6"))
        with pytest.raises(ConfigError):
            load_config(path)

    def test_margin_must_stay_below_epsilon(self):
        with pytest.raises(ConfigError):
            small_config(margin=0.45)

    def test_sequence_section_variants(self, tmp_path):
        path = tmp_path / "exp.ini"
        path.write_text(
            CONFIG_TEXT.replace(
                "kind = lacunary\nbase = 2\nvalue = 0.9",
                "kind = constant\nvalue = 0.7\ntruncation = 3",
            )
        )
        config = load_config(path)
        assert config.sequence.probability(2) == 0.7
        assert config.sequence.probability(4) == 0.0


@pytest.fixture(scope="module")
def graph():
    return EmbeddedGraph(SlabParameters(3, 2), ScaleVector((1, 4), 2))


@pytest.fixture(scope="module")
def seq():
    return ProbabilitySequence.lacunary(0.9, base=2)


class TestContainment:

    def test_containment_holds(self, graph, seq):
        report = containment_check(graph, seq, radius=12, trials=150, master_seed=9)
        assert report.passed
        assert report.trials == 150
        assert report.edge_violations == 0
        assert report.cluster_violations == 0
        assert not report.vacuous

    def test_corrupted_edge_is_reported(self, graph, seq):
        report = containment_check(
            graph, seq, radius=12, trials=150, master_seed=9, corrupt_edge=3
        )
        assert not report.passed
        assert report.edge_violations > 0
        assert report.first_violation is not None
        assert report.first_violation["kind"] == "edge-open-only-in-embedded"

    def test_zero_trials_is_vacuous(self, graph, seq):
        report = containment_check(graph, seq, radius=12, trials=0, master_seed=9)
        assert report.vacuous
        assert report.passed
        assert "no trials" in report.note


class TestPipeline:
    def test_small_run_passes_and_reproduces(self, tmp_path):
        config = small_config()
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        report_a = run_pipeline(config, out_a)
        report_b = run_pipeline(config, out_b)
        assert report_a.passed
        assert report_a.exit_code == 0
        assert report_a.truncation == report_a.scales[-1]
        assert (out_a / "report.json").read_bytes() == (out_b / "report.json").read_bytes()
        for name in ("report.json", "manifest.json", "estimates.csv", "calibration.csv"):
            assert (out_a / name).exists()
        manifest = json.loads((out_a / "manifest.json").read_text())
        assert manifest["master_seed"] == config.master_seed
        assert "trunclab" in manifest["versions"]

    def test_finite_support_fails_at_scale_selection(self, tmp_path):
        config = small_config(sequence=ProbabilitySequence.lacunary(0.9, support=(5,)))
        report = run_pipeline(config, tmp_path / "out")
        assert not report.passed
        assert report.failure_stage == "scale-selection"
        assert report.exit_code == 3
        assert "step 2" in report.error

    def test_unreachable_level_fails_at_slab_search(self, tmp_path):
        config = small_config(
            certificate=EpsilonCertificate(0.2, evidence="far below slab thresholds"),
            margin=0.01,
            d_max=3,
            k_max=1,
        )
        report = run_pipeline(config, tmp_path / "out")
        assert not report.passed
        assert report.failure_stage == "slab-search"
        assert report.exit_code == 3
        assert report.slab["shortfalls"]

    def test_report_records_theta_and_containment(self, tmp_path):
        report = run_pipeline(small_config(), tmp_path / "out")
        assert len(report.theta) == 2
        for row in report.theta:
            assert 0.0 <= row["embedded"]["value"] <= 1.0
            assert row["embedded"]["trials"] == 200
            # The embedded process is a subprocess of the truncated one, so
            # its reach probability cannot exceed the full one beyond noise.
            slack = 3 * (row["embedded"]["half_width"] + row["full"]["half_width"])
            assert row["full"]["value"] >= row["embedded"]["value"] - slack
        assert len(report.containment) == 2
        assert all(row["passed"] for row in report.containment)

    def test_fully_open_sequence_gives_tight_scales_and_certain_reach(self, tmp_path):
        config = small_config(
            sequence=ProbabilitySequence.constant(1.0),
            theta_radii=(6, 9),
            theta_trials=60,
            containment_trials=30,
        )
        outcome = run_pipeline(config, tmp_path / "out")
        assert outcome.passed
        thickness = outcome.slab["thickness"]
        expected = [1]
        for _ in range(outcome.slab["dimension"] - 2):
            expected.append((thickness + 1) * expected[-1] + 1)
        assert outcome.scales == expected
        assert all(row["embedded"]["value"] == 1.0 for row in outcome.theta)
        assert all(row["full"]["value"] == 1.0 for row in outcome.theta)


class TestCli:
    def test_usage_error_exits_one(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["estimate", "--family", "nosuch", "--p", "0.5", "--L", "4"])
        assert excinfo.value.code == 1

    def test_estimate_row(self, capsys):
        code = main(
            ["estimate", "--family", "z2", "--p", "0.5", "--L", "4", "--trials", "200", "--seed", "3"]
        )
        assert code == 0
        out = capsys.readouterr().out.strip()
        fields = out.split(",")
        assert fields[0] == "z2"
        assert fields[2] == "crossing"
        assert 0.0 <= float(fields[3]) <= 1.0

    def test_estimate_theta_row(self, capsys):
        code = main(
            ["estimate", "--family", "slab", "--p", "0.6", "--L", "3", "--d", "3", "--K", "2",
             "--trials", "100", "--seed", "3", "--event", "theta"]
        )
        assert code == 0
        assert "theta" in capsys.readouterr().out

    def test_scales_command(self, tmp_path, capsys):
        path = tmp_path / "exp.ini"
        path.write_text(CONFIG_TEXT)
        assert main(["scales", "--config", str(path)]) == 0
        out = capsys.readouterr().out
        assert "n_1 = 1" in out and "N = " in out

    def test_scales_hypothesis_failure_exits_three(self, tmp_path, capsys):
        path = tmp_path / "exp.ini"
        path.write_text(CONFIG_TEXT.replace("base = 2", "support = 5"))
        assert main(["scales", "--config", str(path)]) == 3

    def test_verify_embedding(self, tmp_path, capsys):
        path = tmp_path / "exp.ini"
        path.write_text(CONFIG_TEXT)
        assert main(["verify-embedding", "--config", str(path)]) == 0
        assert "PASS" in capsys.readouterr().out
        assert main(["verify-embedding", "--config", str(path), "--json"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["passed"] is True

    def test_verify_embedding_needs_embedding_section(self, tmp_path):
        path = tmp_path / "exp.ini"
        text = CONFIG_TEXT.split("[embedding]")[0]
        path.write_text(text)
        assert main(["verify-embedding", "--config", str(path)]) == 1

    def test_pc_command(self, tmp_path, capsys):
        code = main(
            ["pc", "--family", "z2", "--L-schedule", "4,8", "--trials", "200",
             "--tol", "0.05", "--seed", "5", "--calib", str(tmp_path / "calib.csv")]
        )
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["family"] == "z2"
        assert (tmp_path / "calib.csv").exists()

    def test_pipeline_command(self, tmp_path, capsys):
        path = tmp_path / "exp.ini"
        path.write_text(CONFIG_TEXT)
        out_dir = tmp_path / "out"
        assert main(["pipeline", "--config", str(path), "--out", str(out_dir)]) == 0
        assert (out_dir / "report.json").exists()
        assert "PASS" in capsys.readouterr().out
