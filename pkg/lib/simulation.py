"""
Slot-barrier episode loop and the writers for a run directory.

Every slot all agents emit their pending action, the medium resolves the
joint action, then every agent consumes its own outcome and learns. The
event log gets one row per agent-slot; metric series are written every
metric window.
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import numpy as np

from lib import metrics
from lib.agents import Agent, build_agents
from lib.env import Medium
from lib.errors import ArtifactIOError, NumericalFailureError
from models.artifacts import (
    BAND_COLUMNS,
    BANDS_FILE,
    CHECKPOINT_DIR,
    CONFIG_FILE,
    EVENT_COLUMNS,
    EVENTS_FILE,
    METRIC_COLUMNS,
    METRICS_FILE,
    SUMMARY_FILE,
    AgentSegments,
    JammerReport,
    PatternSlot,
    RunArtifacts,
    RunSummary,
)
from models.config import ChannelModel, ExperimentConfig, JammerConfig

logger = logging.getLogger(__name__)

RECOVERY_TOLERANCE = 0.05


def real(value: float) -> str:
    """Round-trip exact text form of a real."""
    return repr(float(value))


@dataclass
class Episode:
    """Joint actions and outcomes of a finished run, row k-1 holding slot k."""

    actions: np.ndarray
    outcomes: np.ndarray
    digests: List[str]


def resolve_seed(config: ExperimentConfig) -> ExperimentConfig:
    """Replace an unseeded config by one carrying a freshly drawn, recorded seed."""
    if config.seeded:
        return config
    seed = int(np.random.SeedSequence().entropy % 2**63)
    logger.info("Drew seed %d from OS entropy", seed)
    return config.with_overrides(seed=seed, seeded=True)


def metric_slots(horizon: int, window: int) -> List[int]:
    """Slots at which metric series are sampled: every window, plus the horizon."""
    slots = list(range(2 * window, horizon + 1, window))
    if not slots or slots[-1] != horizon:
        slots.append(horizon)
    return slots


def checkpoint_agents(agents: List[Agent], run_dir: Path) -> List[Path]:
    directory = run_dir / CHECKPOINT_DIR
    return [agent.save(directory / f"agent_{agent.index + 1}.npz") for agent in agents]


def _open_csv(path: Path, header: List[str]):
    try:
        handle = open(path, "w", newline="")
    except OSError as e:
        raise ArtifactIOError(path, f"cannot open for writing: {e}") from e
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(header)
    return handle, writer


def run_episode(config: ExperimentConfig, agents: List[Agent], run_dir: Path) -> Episode:
    """Drive `agents` through H slots, streaming events and metric series to `run_dir`."""
    network = config.network
    horizon, window = network.horizon, config.metric_window
    num_agents = network.num_agents
    medium = Medium(network)
    sample_at = set(metric_slots(horizon, window))

    actions = np.zeros((horizon, num_agents), dtype=np.int16)
    outcomes = np.zeros((horizon, num_agents), dtype=np.int8)

    event_handle, events = _open_csv(run_dir / EVENTS_FILE, EVENT_COLUMNS)
    metric_handle, metric_rows = _open_csv(run_dir / METRICS_FILE, METRIC_COLUMNS)
    band_handle, band_rows = _open_csv(run_dir / BANDS_FILE, BAND_COLUMNS)
    try:
        joint = [agent.begin() for agent in agents]
        for t in range(1, horizon + 1):
            result = medium.resolve(t, joint)
            actions[t - 1] = joint
            outcomes[t - 1] = result

            joint = []
            for agent, outcome in zip(agents, result):
                joint.append(agent.act_and_learn_slot(outcome))
                log = agent.last_log
                events.writerow(
                    [
                        t,
                        agent.index + 1,
                        log.action,
                        log.outcome,
                        real(log.reward),
                        real(log.epsilon),
                        real(log.alpha),
                        real(log.learning_rate),
                        "" if log.loss is None else real(log.loss),
                    ]
                )

            if t in sample_at:
                rates = []
                for m in range(num_agents):
                    rate = metrics.throughput(outcomes[:t, m], t, window)
                    rates.append(rate)
                    metric_rows.writerow(
                        [t, m + 1, real(rate), real(metrics.collision_rate(outcomes[:t, m], t, window))]
                    )
                for band in range(1, network.num_bands + 1):
                    band_rows.writerow(
                        [t, band, real(metrics.idle_band_rate(actions[:t], band, t, window))]
                    )
                logger.info(
                    "slot %d/%d C=%s eps=%.4f alpha=%.4f",
                    t,
                    horizon,
                    " ".join(f"{r:.3f}" for r in rates),
                    agents[0].epsilon(),
                    agents[0].alpha(),
                )
    except NumericalFailureError:
        saved = checkpoint_agents(agents, run_dir)
        logger.error("Numerical failure; %d agent checkpoints written to %s", len(saved), run_dir / CHECKPOINT_DIR)
        raise
    except OSError as e:
        raise ArtifactIOError(run_dir, f"write failed: {e}") from e
    finally:
        event_handle.close()
        metric_handle.close()
        band_handle.close()

    return Episode(actions=actions, outcomes=outcomes, digests=[a.digest() for a in agents])


def final_throughputs(outcomes: np.ndarray, window: int) -> List[float]:
    """C_m^W at t = H for every agent."""
    horizon = outcomes.shape[0]
    return [metrics.throughput(outcomes[:, m], horizon, window) for m in range(outcomes.shape[1])]


def _segment_mean(column: np.ndarray, first: int, last: int) -> Optional[float]:
    if last < first:
        return None
    return float(np.mean(column[first - 1 : last] == 1))


def jammer_report(outcomes: np.ndarray, jammer: JammerConfig, window: int) -> JammerReport:
    """
    Per-agent throughput before, during and after the jammer window, and
    whether every agent came back to within tolerance of its pre-jam level.
    """
    horizon = outcomes.shape[0]
    finals = final_throughputs(outcomes, window)
    segments = []
    recovered = True
    for m in range(outcomes.shape[1]):
        column = outcomes[:, m]
        before = _segment_mean(column, 1, jammer.start_slot - 1)
        at_start = (
            metrics.throughput(column, jammer.start_slot, window)
            if jammer.start_slot > window
            else None
        )
        after_slot = jammer.end_slot + 1
        at_end = (
            metrics.throughput(column, after_slot, window)
            if window < after_slot <= horizon
            else None
        )
        reference = at_start if at_start is not None else before
        if reference is not None and abs(finals[m] - reference) > RECOVERY_TOLERANCE:
            recovered = False
        segments.append(
            AgentSegments(
                agent_id=m + 1,
                before=before,
                during=_segment_mean(column, jammer.start_slot, jammer.end_slot),
                after=_segment_mean(column, after_slot, horizon),
                at_start=at_start,
                at_end=at_end,
                final=finals[m],
            )
        )
    return JammerReport(segments=segments, recovered=recovered)


def transmission_pattern(actions: np.ndarray, outcomes: np.ndarray, slots: int) -> List[PatternSlot]:
    """Band choice and outcome of every agent over the last `slots` slots."""
    horizon = actions.shape[0]
    first = max(1, horizon - slots + 1)
    return [
        PatternSlot(
            t=t,
            actions=[int(a) for a in actions[t - 1]],
            outcomes=[int(o) for o in outcomes[t - 1]],
        )
        for t in range(first, horizon + 1)
    ]


def build_summary(config: ExperimentConfig, episode: Episode) -> RunSummary:
    network = config.network
    finals = final_throughputs(episode.outcomes, config.metric_window)
    totals = metrics.summarize(finals, network.num_bands)
    jammer = None
    if network.jammer is not None:
        jammer = jammer_report(episode.outcomes, network.jammer, config.metric_window)
    pattern = None
    if network.channel_model == ChannelModel.ADHOC:
        pattern = transmission_pattern(episode.actions, episode.outcomes, config.pattern_slots)
    return RunSummary(
        scenario=config.scenario,
        seed=config.seed,
        num_agents=network.num_agents,
        num_bands=network.num_bands,
        horizon=network.horizon,
        metric_window=config.metric_window,
        sigma=totals.sigma,
        c_bar=totals.c_bar,
        jain=totals.jain,
        throughput_sum=totals.throughput_sum,
        finals=finals,
        digests=episode.digests,
        jammer=jammer,
        pattern=pattern,
    )


def write_json(path: Path, text: str) -> None:
    try:
        path.write_text(text + "\n")
    except OSError as e:
        raise ArtifactIOError(path, f"cannot write: {e}") from e


def simulate(config: ExperimentConfig) -> RunArtifacts:
    """
    Run one seeded episode end to end and write every artifact.

    Args:
        config: Validated experiment configuration; `output_dir` receives the files.

    Returns:
        RunArtifacts pointing at the run directory with the parsed summary.
    """
    config = resolve_seed(config)
    run_dir = Path(config.output_dir)
    try:
        run_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ArtifactIOError(run_dir, f"cannot create run directory: {e}") from e
    write_json(run_dir / CONFIG_FILE, config.model_dump_json(indent=2))

    network = config.network
    logger.info(
        "Starting %s run: M=%d N=%d H=%d seed=%d",
        config.scenario,
        network.num_agents,
        network.num_bands,
        network.horizon,
        config.seed,
    )
    agents = build_agents(
        config.agent_kinds,
        network.num_bands,
        network.horizon,
        config.hyper,
        config.rewards,
        config.seed,
        config.time_reference,
    )
    episode = run_episode(config, agents, run_dir)
    if config.checkpoint:
        checkpoint_agents(agents, run_dir)

    summary = build_summary(config, episode)
    write_json(run_dir / SUMMARY_FILE, summary.model_dump_json(by_alias=True, indent=2))
    logger.info(
        "Finished %s run: sigma=%.4f C_bar=%.4f jain=%.4f",
        config.scenario,
        summary.sigma,
        summary.c_bar,
        summary.jain,
    )
    return RunArtifacts(run_dir=run_dir, summary=summary)


__all__ = [
    "Episode",
    "real",
    "resolve_seed",
    "metric_slots",
    "checkpoint_agents",
    "run_episode",
    "final_throughputs",
    "jammer_report",
    "transmission_pattern",
    "build_summary",
    "simulate",
]
