"""
Experiment service layer - single runs, grids, jammer and ad-hoc scenarios, baseline comparison.
"""

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from lib.errors import ArtifactIOError, ConfigError, FairshareError
from lib.simulation import real, simulate
from models.artifacts import (
    COMPARISON_COLUMNS,
    COMPARISON_FILE,
    GRID_COLUMNS,
    GRID_FILE,
    ComparisonRow,
    GridRow,
    RunArtifacts,
    RunSummary,
)
from models.config import (
    ADHOC_HYPER_OVERRIDES,
    JAMMER_HYPER_OVERRIDES,
    AgentKind,
    ChannelModel,
    ExperimentConfig,
)
from services.base_service import guarded
from services.catalog_service import CatalogService, run_record

logger = logging.getLogger(__name__)

JAMMER_HORIZON = 150_000
ADHOC_HORIZON = 22_000

# (M, N, band, start, end)
JAMMER_PRESETS: Dict[str, Tuple[int, int, int, int, int]] = {
    "a": (5, 3, 3, 40_000, 70_000),
    "b": (6, 6, 6, 90_000, 140_000),
}

COMPARISON_SETTINGS: List[Tuple[int, int]] = [
    (10, 9),
    (10, 7),
    (10, 5),
    (10, 3),
    (10, 1),
    (9, 2),
    (8, 2),
    (7, 2),
    (6, 5),
    (6, 1),
    (5, 4),
    (2, 2),
]

COMPARISON_VARIANTS = ("cp1", "fsrl-no-time-ref", "fsrl")


# ========== configuration ==========


def load_config(path: Path) -> ExperimentConfig:
    """Read an ExperimentConfig from a JSON file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ArtifactIOError(path, f"cannot read config: {e}") from e
    try:
        return ExperimentConfig.model_validate_json(text)
    except ValidationError as e:
        raise ConfigError(f"{path}: {e}") from e


def single_kind(config: ExperimentConfig) -> AgentKind:
    """The one agent kind a reshaped or preset config is built around."""
    kinds = set(config.agent_kinds)
    if len(kinds) != 1:
        raise ConfigError(
            f"Cannot resize a run with mixed agent kinds ({', '.join(sorted(k.value for k in kinds))})"
        )
    return kinds.pop()


def reshape(
    config: ExperimentConfig,
    num_agents: int,
    num_bands: int,
    **changes,
) -> ExperimentConfig:
    """Copy of `config` for another (M, N), keeping one agent kind for everyone."""
    network = {**config.network.model_dump(), "num_agents": num_agents, "num_bands": num_bands}
    kind = single_kind(config)
    try:
        return config.with_overrides(network=network, agent_kinds=[kind] * num_agents, **changes)
    except ValidationError as e:
        raise ConfigError(str(e)) from e


def with_hyper(config: ExperimentConfig, overrides: Dict[str, float]) -> ExperimentConfig:
    hyper = {**config.hyper.model_dump(), **overrides}
    try:
        return config.with_overrides(hyper=hyper)
    except ValidationError as e:
        raise ConfigError(str(e)) from e


def jammer_config(preset: str, base: ExperimentConfig, horizon: int = JAMMER_HORIZON) -> ExperimentConfig:
    """One of the two published jammer scenarios on top of `base`."""
    if preset not in JAMMER_PRESETS:
        raise ConfigError(f"Unknown jammer preset '{preset}' (choose from {', '.join(JAMMER_PRESETS)})")
    num_agents, num_bands, band, start, end = JAMMER_PRESETS[preset]
    network = {
        **base.network.model_dump(),
        "num_agents": num_agents,
        "num_bands": num_bands,
        "channel_model": ChannelModel.BROADCAST,
        "horizon": horizon,
        "jammer": {"band": band, "start_slot": start, "end_slot": end},
    }
    try:
        config = base.with_overrides(
            scenario="jammer",
            network=network,
            agent_kinds=[single_kind(base)] * num_agents,
        )
    except ValidationError as e:
        raise ConfigError(str(e)) from e
    return with_hyper(config, JAMMER_HYPER_OVERRIDES)


def adhoc_config(
    base: ExperimentConfig, num_agents: int = 6, num_bands: int = 2, horizon: int = ADHOC_HORIZON
) -> ExperimentConfig:
    """The chain scenario with its exploration schedule."""
    network = {
        **base.network.model_dump(),
        "num_agents": num_agents,
        "num_bands": num_bands,
        "channel_model": ChannelModel.ADHOC,
        "horizon": horizon,
        "jammer": None,
    }
    try:
        config = base.with_overrides(
            scenario="adhoc",
            network=network,
            agent_kinds=[single_kind(base)] * num_agents,
        )
    except ValidationError as e:
        raise ConfigError(str(e)) from e
    return with_hyper(config, ADHOC_HYPER_OVERRIDES)


def comparison_variant(config: ExperimentConfig, variant: str) -> ExperimentConfig:
    """Apply one comparison variant to a cell config."""
    num_agents = config.network.num_agents
    if variant == "cp1":
        return config.with_overrides(agent_kinds=[AgentKind.DQN_CP1] * num_agents, time_reference=True)
    if variant == "fsrl-no-time-ref":
        return config.with_overrides(agent_kinds=[AgentKind.FSRL] * num_agents, time_reference=False)
    if variant == "fsrl":
        return config.with_overrides(agent_kinds=[AgentKind.FSRL] * num_agents, time_reference=True)
    raise ConfigError(f"Unknown comparison variant '{variant}'")


# ========== worker plumbing ==========


def _simulate_payload(payload: str) -> Tuple[Optional[str], Optional[str]]:
    """
    Worker entry point: run a serialized config, return (summary json, error).

    Runs in child processes, so it takes and returns plain strings.
    """
    config = ExperimentConfig.model_validate_json(payload)
    try:
        artifacts = simulate(config)
    except FairshareError as e:
        logger.error("Run in %s failed: %s", config.output_dir, e)
        return None, str(e)
    return artifacts.summary.model_dump_json(by_alias=True), None


def _run_many(
    configs: Sequence[ExperimentConfig], workers: int
) -> List[Tuple[Optional[RunSummary], Optional[str]]]:
    """Run independent configs, in parallel when workers > 1; results keep input order."""
    payloads = [config.model_dump_json() for config in configs]
    if workers > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            raw = list(pool.map(_simulate_payload, payloads))
    else:
        raw = [_simulate_payload(payload) for payload in payloads]
    return [
        (RunSummary.model_validate_json(summary) if summary else None, error)
        for summary, error in raw
    ]


def _write_table(path: Path, header: List[str], rows: Iterable[List]) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as e:
        raise ArtifactIOError(path, f"cannot write table: {e}") from e


def _cell(value: Optional[float]) -> str:
    return "" if value is None else real(value)


def _record(out_root: Path, config: ExperimentConfig, run_dir: Path, summary, label="", error=None):
    _, catalog_error = CatalogService.record(
        out_root, run_record(config, run_dir, summary, label=label, error=error)
    )
    if catalog_error:
        logger.warning("Run %s not catalogued: %s", run_dir, catalog_error)


# ========== service ==========


class ExperimentService:
    """Service for experiment runs. Every method returns (result, error)."""

    @staticmethod
    def run_single(
        config: ExperimentConfig, out_root: Path
    ) -> Tuple[Optional[RunArtifacts], Optional[FairshareError]]:
        """
        Run one episode and record it in the catalog under `out_root`.

        Returns:
            Tuple of (artifacts, error). If an error occurs, artifacts is None.
        """
        artifacts, error = guarded(lambda: simulate(config))
        if error is not None:
            _record(out_root, config, Path(config.output_dir), None, error=str(error))
            return None, error
        _record(out_root, config, artifacts.run_dir, artifacts.summary)
        return artifacts, None

    @staticmethod
    def run_grid(
        agent_counts: Sequence[int],
        band_counts: Sequence[int],
        base: ExperimentConfig,
        out_dir: Path,
        out_root: Path,
        workers: int = 1,
    ) -> Tuple[Optional[List[GridRow]], Optional[FairshareError]]:
        """
        One run per (M, N) with M >= N, all sharing the base hyper-parameters.

        Failed cells are kept in the table with an error and the grid carries on.
        """
        if not agent_counts or not band_counts:
            return None, ConfigError("Grid ranges must be non-empty")
        cells = [(m, n) for m in agent_counts for n in band_counts if m >= n]
        if not cells:
            return None, ConfigError("No grid cell satisfies M >= N")

        def build():
            return [
                reshape(base, m, n, scenario="grid", output_dir=Path(out_dir) / f"M{m}_N{n}")
                for m, n in cells
            ]

        configs, error = guarded(build)
        if error is not None:
            return None, error

        rows = []
        for config, (summary, failure) in zip(configs, _run_many(configs, workers)):
            network = config.network
            label = f"M{network.num_agents}_N{network.num_bands}"
            _record(out_root, config, config.output_dir, summary, label=label, error=failure)
            if failure:
                logger.error("Grid cell %s failed: %s", label, failure)
            else:
                logger.info("Grid cell %s done: C_bar=%.3f jain=%.3f", label, summary.c_bar, summary.jain)
            rows.append(
                GridRow(
                    num_agents=network.num_agents,
                    num_bands=network.num_bands,
                    c_bar=summary.c_bar if summary else None,
                    sigma=summary.sigma if summary else None,
                    jain=summary.jain if summary else None,
                    run_dir=config.output_dir,
                    error=failure,
                )
            )

        table = [
            [row.num_agents, row.num_bands, _cell(row.c_bar), _cell(row.sigma), _cell(row.jain)]
            for row in rows
        ]
        _, error = guarded(lambda: _write_table(Path(out_dir) / GRID_FILE, GRID_COLUMNS, table))
        if error is not None:
            return None, error
        return rows, None

    @staticmethod
    def run_jammer(
        config: ExperimentConfig, out_root: Path
    ) -> Tuple[Optional[RunArtifacts], Optional[FairshareError]]:
        """A single run whose network carries a jammer; the summary is segmented around it."""
        if config.network.jammer is None:
            return None, ConfigError("Jammer run needs a jammer in the network config")
        return ExperimentService.run_single(config, out_root)

    @staticmethod
    def run_adhoc(
        config: ExperimentConfig, out_root: Path
    ) -> Tuple[Optional[RunArtifacts], Optional[FairshareError]]:
        """A single run on the chain; the summary carries the final transmission pattern."""
        if config.network.channel_model != ChannelModel.ADHOC:
            return None, ConfigError("Ad-hoc run needs channel_model 'adhoc'")
        if config.network.num_agents < 3:
            return None, ConfigError("Ad-hoc run needs at least 3 agents")
        return ExperimentService.run_single(config, out_root)

    @staticmethod
    def run_comparison(
        settings: Sequence[Tuple[int, int]],
        base: ExperimentConfig,
        out_dir: Path,
        out_root: Path,
        workers: int = 1,
        variants: Sequence[str] = COMPARISON_VARIANTS,
    ) -> Tuple[Optional[List[ComparisonRow]], Optional[FairshareError]]:
        """DQN-CP1 against FSRL with and without time reference, same seed per setting."""
        if not settings:
            return None, ConfigError("Comparison needs at least one (M, N) setting")

        def build():
            configs = []
            for m, n in settings:
                cell = reshape(base, m, n, scenario="compare")
                for variant in variants:
                    configs.append(
                        comparison_variant(cell, variant).with_overrides(
                            output_dir=Path(out_dir) / f"M{m}_N{n}" / variant
                        )
                    )
            return configs

        configs, error = guarded(build)
        if error is not None:
            return None, error

        labels = [variant for _ in settings for variant in variants]
        rows = []
        for config, variant, (summary, failure) in zip(configs, labels, _run_many(configs, workers)):
            network = config.network
            _record(out_root, config, config.output_dir, summary, label=variant, error=failure)
            if failure:
                logger.error("Comparison M=%d N=%d %s failed: %s", network.num_agents, network.num_bands, variant, failure)
            rows.append(
                ComparisonRow(
                    num_agents=network.num_agents,
                    num_bands=network.num_bands,
                    variant=variant,
                    jain=summary.jain if summary else None,
                    c_bar=summary.c_bar if summary else None,
                    run_dir=config.output_dir,
                    error=failure,
                )
            )

        table = [
            [row.num_agents, row.num_bands, row.variant, _cell(row.jain), _cell(row.c_bar)]
            for row in rows
        ]
        _, error = guarded(
            lambda: _write_table(Path(out_dir) / COMPARISON_FILE, COMPARISON_COLUMNS, table)
        )
        if error is not None:
            return None, error
        return rows, None


__all__ = [
    "ExperimentService",
    "load_config",
    "reshape",
    "with_hyper",
    "jammer_config",
    "adhoc_config",
    "comparison_variant",
    "JAMMER_PRESETS",
    "COMPARISON_SETTINGS",
    "COMPARISON_VARIANTS",
]
