"""End-to-end pipeline: geometry selection, scale recursion, embedding
verification, reach estimates, and containment checks, with file outputs.

A run is a pure function of its configuration and master seed.  Every stage
derives its stream seeds from the master seed and a textual label, so the
report (written as ``report.json``) is byte-identical across reruns; wall
times live only in the manifest.
"""

from __future__ import annotations

import configparser
import csv
import json
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .embedding import (
    EmbeddedGraph,
    HypothesisNotWitnessed,
    select_scales,
    verify_isomorphism,
)
from .engine import Estimate, component_labels, origin_boundary_estimate
from .rng import INDEXED_STREAM_RULE, KEYED_STREAM_RULE, derive_seed, keyed_uniforms
from .sequences import EpsilonCertificate, ProbabilitySequence
from .thresholds import (
    CalibrationTable,
    ParametersNotFound,
    ThresholdSettings,
    choose_slab_parameters,
)
from .windows import ConfigError, embedded_radial_window, long_range_radial_window


@dataclass
class PipelineConfig:
    sequence: ProbabilitySequence
    certificate: EpsilonCertificate
    margin: float = 0.02
    d_max: int = 6
    k_max: int = 4
    scale_search_limit: int = 1_000_000
    verify_coarse: int = 3
    verify_vertical: int = 3
    theta_radii: tuple[int, ...] = (32, 64)
    theta_trials: int = 2000
    positivity_floor: float = 0.05
    containment_trials: int = 1000
    thresholds: ThresholdSettings = field(default_factory=ThresholdSettings)
    master_seed: int = 1
    calibration_file: str | None = None
    embedding_dimension: int | None = None
    embedding_thickness: int | None = None
    raw_text: str = ""

    def __post_init__(self) -> None:
        if not 0.0 < self.margin < self.certificate.epsilon:
            raise ConfigError("margin must lie strictly between 0 and epsilon")
        if self.d_max < 3 or self.k_max < 1:
            raise ConfigError("search budget needs d_max >= 3 and k_max >= 1")
        if self.scale_search_limit < 1:
            raise ConfigError("scale_search_limit must be positive")
        if list(self.theta_radii) != sorted(set(self.theta_radii)) or not self.theta_radii:
            raise ConfigError("theta radii must be a nonempty increasing list")
        if self.positivity_floor < 0 or self.positivity_floor > 1:
            raise ConfigError("positivity floor must lie in [0, 1]")


def _sequence_from_section(section: configparser.SectionProxy, base_dir: Path) -> ProbabilitySequence:
    kind = section.get("kind", fallback=None)
    if kind is None:
        raise ConfigError("[sequence] needs a kind")
    kind = kind.strip().replace("-", "_")
    if kind == "constant":
        seq = ProbabilitySequence.constant(section.getfloat("value"))
    elif kind == "power_law":
        seq = ProbabilitySequence.power_law(
            section.getfloat("amplitude", fallback=1.0), section.getfloat("exponent")
        )
    elif kind == "lacunary":
        support_text = section.get("support", fallback=None)
        support = tuple(int(s) for s in support_text.split(",")) if support_text else None
        base = section.getint("base", fallback=None) if support is None else None
        seq = ProbabilitySequence.lacunary(
            section.getfloat("value"),
            base=base,
            support=support,
            background=section.getfloat("background", fallback=0.0),
        )
    elif kind == "table":
        path = Path(section.get("file"))
        if not path.is_absolute():
            path = base_dir / path
        seq = ProbabilitySequence.from_table_file(path, tail=section.getfloat("tail", fallback=0.0))
    else:
        raise ConfigError(f"unknown sequence kind {kind!r}")
    truncation = section.getint("truncation", fallback=None)
    return seq.truncate(truncation) if truncation else seq


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.replace(",", " ").split())


def load_config(path: str | Path) -> PipelineConfig:
    """Parse the INI-style experiment file into a validated configuration."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    text = path.read_text()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    try:
        sequence = _sequence_from_section(parser["sequence"], path.parent)
        certificate = EpsilonCertificate(
            epsilon=parser.getfloat("certificate", "epsilon"),
            evidence=parser.get("certificate", "evidence", fallback="declared by configuration"),
        )
        thresholds = ThresholdSettings(
            l_schedule=_int_list(parser.get("thresholds", "l_schedule", fallback="8, 16, 32")),
            bracket_tol=parser.getfloat("thresholds", "bracket_tol", fallback=0.015),
            trials_per_probe=parser.getint("thresholds", "trials_per_probe", fallback=3000),
            coarse_trials=parser.getint("thresholds", "coarse_trials", fallback=600),
        )
        config = PipelineConfig(
            sequence=sequence,
            certificate=certificate,
            margin=parser.getfloat("search", "margin", fallback=0.02),
            d_max=parser.getint("search", "d_max", fallback=6),
            k_max=parser.getint("search", "k_max", fallback=4),
            scale_search_limit=parser.getint("search", "scale_search_limit", fallback=1_000_000),
            verify_coarse=parser.getint("verify", "coarse_window", fallback=3),
            verify_vertical=parser.getint("verify", "vertical_window", fallback=3),
            theta_radii=_int_list(parser.get("theta", "radii", fallback="32, 64")),
            theta_trials=parser.getint("theta", "trials", fallback=2000),
            positivity_floor=parser.getfloat("theta", "positivity_floor", fallback=0.05),
            containment_trials=parser.getint("containment", "trials", fallback=1000),
            thresholds=thresholds,
            master_seed=parser.getint("run", "master_seed", fallback=1),
            calibration_file=parser.get("thresholds", "calibration_file", fallback=None),
            embedding_dimension=parser.getint("embedding", "dimension", fallback=None),
            embedding_thickness=parser.getint("embedding", "thickness", fallback=None),
            raw_text=text,
        )
    except (ValueError, KeyError, configparser.Error) as exc:
        raise ConfigError(f"invalid config {path}: {exc}") from None
    return config


@dataclass
class ContainmentReport:
    """Per-trial check that the embedded process sits inside the truncated one."""

    radius: int
    trials: int
    checked_edges: int
    edge_violations: int = 0
    cluster_violations: int = 0
    first_violation: dict | None = None
    vacuous: bool = False
    note: str = ""
    seed: int = 0

    @property
    def passed(self) -> bool:
        return self.edge_violations == 0 and self.cluster_violations == 0

    def to_dict(self) -> dict:
        return {
            "radius": self.radius,
            "trials": self.trials,
            "checked_edges": self.checked_edges,
            "edge_violations": self.edge_violations,
            "cluster_violations": self.cluster_violations,
            "first_violation": self.first_violation,
            "vacuous": self.vacuous,
            "note": self.note,
            "seed": self.seed,
            "passed": self.passed,
        }


def containment_check(
    graph: EmbeddedGraph,
    seq: ProbabilitySequence,
    radius: int,
    trials: int,
    master_seed: int,
    corrupt_edge: int | None = None,
) -> ContainmentReport:
    """Sample both processes from shared per-lattice-edge uniforms and assert
    that every open embedded edge is open in the full truncated configuration
    and that the origin's embedded cluster sits inside its full cluster.

    ``corrupt_edge`` (test hook) decouples one embedded edge's uniform from
    the shared stream, which must surface as a reported violation.
    """
    truncated = seq.truncate(graph.scales.top)
    embedded = embedded_radial_window(graph, truncated, radius)
    full = long_range_radial_window(truncated, radius)
    report = ContainmentReport(
        radius=radius, trials=trials, checked_edges=embedded.n_edges, seed=master_seed
    )
    if trials == 0:
        report.vacuous = True
        report.note = "no trials: containment holds vacuously"
        return report

    full_edge_index = {
        (tuple(int(c) for c in u), tuple(int(c) for c in v)): e
        for e, (u, v) in enumerate(zip(full.coords[full.edges_u], full.coords[full.edges_v]))
    }
    edge_map = np.empty(embedded.n_edges, dtype=np.int64)
    for e, (u, v, _) in enumerate(embedded.edge_pairs()):
        key = (tuple(int(c) for c in u), tuple(int(c) for c in v))
        if key not in full_edge_index:
            report.edge_violations += 1
            report.first_violation = {"kind": "unmapped-edge", "edge": [list(u), list(v)]}
            return report
        edge_map[e] = full_edge_index[key]

    vertex_map = np.empty(embedded.n_vertices, dtype=np.int64)
    full_vertex_index = {tuple(int(c) for c in coord): i for i, coord in enumerate(full.coords)}
    for i, coord in enumerate(embedded.coords):
        vertex_map[i] = full_vertex_index[tuple(int(c) for c in coord)]

    embedded_keys = embedded.edge_keys.copy()
    if corrupt_edge is not None:
        embedded_keys[corrupt_edge] ^= np.uint64(0x5DEECE66D)

    for trial in range(trials):
        open_embedded = keyed_uniforms(embedded_keys, master_seed, trial) < embedded.probs
        open_full = keyed_uniforms(full.edge_keys, master_seed, trial) < full.probs
        escaped = open_embedded & ~open_full[edge_map]
        if escaped.any():
            report.edge_violations += int(escaped.sum())
            if report.first_violation is None:
                e = int(np.nonzero(escaped)[0][0])
                report.first_violation = {
                    "kind": "edge-open-only-in-embedded",
                    "trial": trial,
                    "edge_index": e,
                    "edge": [
                        [int(c) for c in embedded.coords[embedded.edges_u[e]]],
                        [int(c) for c in embedded.coords[embedded.edges_v[e]]],
                    ],
                }
            continue
        labels_emb = component_labels(embedded, open_embedded)
        labels_full = component_labels(full, open_full)
        cluster = np.nonzero(labels_emb == labels_emb[embedded.origin_index])[0]
        inside = labels_full[vertex_map[cluster]] == labels_full[full.origin_index]
        if not inside.all():
            report.cluster_violations += 1
            if report.first_violation is None:
                stray = int(cluster[np.nonzero(~inside)[0][0]])
                report.first_violation = {
                    "kind": "cluster-vertex-escapes",
                    "trial": trial,
                    "vertex": [int(c) for c in embedded.coords[stray]],
                }
    return report


@dataclass
class PipelineReport:
    epsilon: float
    margin: float
    master_seed: int
    passed: bool = False
    failure_stage: str | None = None
    error: str | None = None
    slab: dict | None = None
    threshold: dict | None = None
    scales: list[int] | None = None
    truncation: int | None = None
    embedding: dict | None = None
    theta: list[dict] = field(default_factory=list)
    containment: list[dict] = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    positivity_floor: float = 0.05
    stream_rules: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "margin": self.margin,
            "master_seed": self.master_seed,
            "passed": self.passed,
            "failure_stage": self.failure_stage,
            "error": self.error,
            "slab": self.slab,
            "threshold": self.threshold,
            "scales": self.scales,
            "truncation": self.truncation,
            "embedding": self.embedding,
            "theta": self.theta,
            "containment": self.containment,
            "checks": self.checks,
            "positivity_floor": self.positivity_floor,
            "stream_rules": self.stream_rules,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @property
    def exit_code(self) -> int:
        if self.passed:
            return 0
        if self.failure_stage in ("slab-search", "scale-selection"):
            return 3
        return 2


def _estimate_dict(estimate: Estimate) -> dict:
    return {
        "value": estimate.value,
        "trials": estimate.trials,
        "successes": estimate.successes,
        "half_width": estimate.half_width,
        "seed": estimate.seed,
        "stream_rule": estimate.stream_rule,
    }


def run_pipeline(config: PipelineConfig, out_dir: str | Path | None = None) -> PipelineReport:
    """Execute all stages in order and (optionally) persist the run artifacts.

    Stage failures with an honest meaning (level never witnessed, budget
    exhausted) produce a failed report with the stage named instead of an
    exception; verification failures do the same.  Everything else raises.
    """
    timings: dict[str, float] = {}
    estimates_log: list[dict] = []
    report = PipelineReport(
        epsilon=config.certificate.epsilon,
        margin=config.margin,
        master_seed=config.master_seed,
        positivity_floor=config.positivity_floor,
        stream_rules={"indexed": INDEXED_STREAM_RULE, "keyed": KEYED_STREAM_RULE},
    )
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
    calibration_path = (
        Path(config.calibration_file)
        if config.calibration_file
        else (out_path / "calibration.csv" if out_path else None)
    )
    table = CalibrationTable(calibration_path)

    def finish() -> PipelineReport:
        if out_path is not None:
            _write_outputs(out_path, config, report, estimates_log, timings)
        return report

    clock = time.perf_counter()
    try:
        params, row = choose_slab_parameters(
            epsilon=config.certificate.epsilon,
            margin=config.margin,
            d_max=config.d_max,
            k_max=config.k_max,
            table=table,
            settings=config.thresholds,
            master_seed=config.master_seed,
        )
    except ParametersNotFound as exc:
        report.failure_stage = "slab-search"
        report.error = str(exc)
        report.checks["slab_found"] = False
        report.slab = {"shortfalls": exc.shortfalls}
        return finish()
    timings["slab-search"] = time.perf_counter() - clock
    report.slab = {"dimension": params.dimension, "thickness": params.thickness}
    report.threshold = row.to_dict()
    report.checks["slab_found"] = True

    clock = time.perf_counter()
    try:
        scales = select_scales(
            config.sequence, config.certificate.epsilon, params, config.scale_search_limit
        )
    except HypothesisNotWitnessed as exc:
        report.failure_stage = "scale-selection"
        report.error = str(exc)
        report.checks["scales_found"] = False
        return finish()
    timings["scale-selection"] = time.perf_counter() - clock
    report.scales = list(scales.scales)
    report.truncation = scales.top
    report.checks["scales_found"] = True

    clock = time.perf_counter()
    graph = EmbeddedGraph(params, scales)
    embedding_report = verify_isomorphism(
        graph,
        config.verify_coarse,
        config.verify_vertical,
        seq=config.sequence,
        epsilon=config.certificate.epsilon,
    )
    timings["embedding-verification"] = time.perf_counter() - clock
    report.embedding = embedding_report.to_dict()
    report.checks["isomorphism"] = embedding_report.passed
    if not embedding_report.passed:
        report.failure_stage = "embedding-verification"
        report.error = embedding_report.counterexample
        return finish()

    truncated = config.sequence.truncate(scales.top)
    clock = time.perf_counter()
    floor_ok = True
    for radius in config.theta_radii:
        embedded_window = embedded_radial_window(graph, truncated, radius)
        full_window = long_range_radial_window(truncated, radius)
        est_embedded = origin_boundary_estimate(
            embedded_window,
            config.theta_trials,
            derive_seed(config.master_seed, "theta", "embedded", radius),
            label=f"theta-embedded-r{radius}",
        )
        est_full = origin_boundary_estimate(
            full_window,
            config.theta_trials,
            derive_seed(config.master_seed, "theta", "full", radius),
            label=f"theta-full-r{radius}",
        )
        report.theta.append(
            {
                "radius": radius,
                "embedded": _estimate_dict(est_embedded),
                "full": _estimate_dict(est_full),
            }
        )
        for est, family in ((est_embedded, "embedded"), (est_full, "z2-long-range")):
            estimates_log.append({"family": family, "event": "origin_boundary", **est.as_row()})
        floor_ok = floor_ok and est_embedded.value >= config.positivity_floor
    timings["theta"] = time.perf_counter() - clock
    report.checks["theta_floor"] = floor_ok

    clock = time.perf_counter()
    containment_ok = True
    for radius in config.theta_radii:
        outcome = containment_check(
            graph,
            config.sequence,
            radius,
            config.containment_trials,
            derive_seed(config.master_seed, "containment", radius),
        )
        report.containment.append(outcome.to_dict())
        containment_ok = containment_ok and outcome.passed
    timings["containment"] = time.perf_counter() - clock
    report.checks["containment"] = containment_ok

    report.passed = all(report.checks.values())
    if not report.passed and report.failure_stage is None:
        report.failure_stage = "acceptance-checks"
    return finish()


def _write_outputs(
    out_path: Path,
    config: PipelineConfig,
    report: PipelineReport,
    estimates_log: list[dict],
    timings: dict[str, float],
) -> None:
    (out_path / "report.json").write_text(report.to_json())
    manifest = {
        "config_text": config.raw_text,
        "master_seed": config.master_seed,
        "versions": {
            "trunclab": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "timings_seconds": {k: round(v, 3) for k, v in timings.items()},
        "passed": report.passed,
    }
    (out_path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    columns = [
        "family",
        "event",
        "label",
        "value",
        "half_width",
        "trials",
        "successes",
        "seed",
        "stream_rule",
    ]
    with open(out_path / "estimates.csv", "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=columns)
        writer.writeheader()
        for row in estimates_log:
            writer.writerow(row)
