"""Run orchestration for the simulate, calibrate and gen-reference modes."""

from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import AUTO, ScenarioConfig
from .engine import Engine
from .io import JsonlLog, SpikeLog, read_reference, write_frequency, write_json, write_psth, write_reference
from .neural import DELAY_RANGE, Network, Role, Sign, StimulusProtocol, SynapseLink
from .organization import OrganizationLog
from .simulation import Simulation
from .viewer import FrequencySeries, Psth, ReferenceTrace, average_series

SPIKES_FILE = "spikes.csv"
FREQUENCY_FILE = "frequency.csv"
PSTH_FILE = "psth.csv"
ORG_LOG_FILE = "organization.jsonl"
REPORT_FILE = "report.json"


@dataclass
class RunReport:
    mode: str
    final_error: float | None
    trials: int
    event_counts: dict[str, int] = field(default_factory=dict)
    converged: bool = False
    wall_clock: float = 0.0
    evolution_refused: bool = False
    errors: list[float] = field(default_factory=list)

    def __post_init__(self):
        if self.converged and self.final_error is None:
            raise ValueError("a converged report needs a final error")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def build_network(config: ScenarioConfig, rng: np.random.Generator) -> Network:
    """Network described by ``config``; ``auto`` weights and delays are drawn from ``rng``."""
    spec = config.network
    base = dataclasses.asdict(config.neuron)
    net = Network()
    for agent in spec.agents:
        net.add_neuron(agent.id, agent.role, **{**base, **agent.params})
    lo, hi = spec.weight_bounds

    def draw_weight():
        return float(rng.uniform(lo, hi))

    def draw_delay():
        return float(rng.uniform(*DELAY_RANGE))

    if spec.links == AUTO:
        # layered feed-forward: afferents -> interneurons -> motoneurons,
        # or afferents -> motoneurons when there are no interneurons
        layers = [net.by_role(Role.AFFERENT), net.by_role(Role.INTERNEURON), net.by_role(Role.MOTONEURON)]
        layers = [layer for layer in layers if layer]
        for upper, lower in zip(layers, layers[1:]):
            for pre in upper:
                for post in lower:
                    net.add_link(SynapseLink.create(pre, post, draw_weight(), Sign.EXCITATORY, draw_delay(), (lo, hi)))
    else:
        for link in spec.links:
            weight = draw_weight() if link.weight == AUTO else float(link.weight)
            delay = draw_delay() if link.delay == AUTO else float(link.delay)
            net.add_link(SynapseLink.create(link.pre, link.post, weight, Sign(link.sign), delay, (lo, hi)))
    for muscle in spec.muscles:
        net.add_muscle(muscle.id, list(muscle.innervating))
    return net


def trials_within(config: ScenarioConfig, budget: int) -> int:
    """Trials that fit the budget and, when set, the run duration."""
    s = config.stimulus
    if config.duration_ms is None:
        return budget
    fit = int(np.floor((config.duration_ms - s.onset_ms) / s.interval_ms + 1e-9)) if config.duration_ms >= s.onset_ms else 0
    return max(0, min(budget, fit))


def _protocol(config: ScenarioConfig, count: int) -> StimulusProtocol:
    s = config.stimulus
    return StimulusProtocol(
        s.onset_ms, s.interval_ms, max(1, count), s.targets, s.train_count, s.train_interval_ms
    )


def _simulation(config: ScenarioConfig, count: int, **kw) -> Simulation:
    engine = Engine(config.seed)
    network = build_network(config, engine.rng)
    v = config.viewer
    return Simulation(
        network,
        _protocol(config, count),
        config.observed,
        engine=engine,
        window_ms=v.window_ms,
        epsilon=v.epsilon,
        constants=config.organization,
        psth_bin_ms=v.psth_bin_ms,
        psth_window=v.psth_window_ms,
        **kw,
    )


class _Accumulator:
    """Absolute-time frequency series and summed PSTH across trials."""

    def __init__(self):
        self.times: list[float] = []
        self.freqs: list[float] = []
        self.series: list[FrequencySeries] = []
        self.psth: Psth | None = None

    def add(self, t_stim: float, result) -> None:
        self.series.append(result.series)
        shifted = result.series.shifted(t_stim)
        self.times.extend(shifted.times)
        self.freqs.extend(shifted.freqs)
        if self.psth is None:
            self.psth = dataclasses.replace(result.psth, counts=result.psth.counts.copy())
        else:
            self.psth.counts += result.psth.counts
            self.psth.trials += result.psth.trials

    def write(self, out_dir: Path, sim: Simulation) -> None:
        write_frequency(out_dir / FREQUENCY_FILE, FrequencySeries(tuple(self.times), tuple(self.freqs)))
        hist = self.psth
        if hist is None:
            lo, hi = sim.psth_window
            n = max(1, int(np.ceil((hi - lo) / sim.psth_bin_ms - 1e-9)))
            hist = Psth(sim.psth_bin_ms, (lo, hi), np.zeros(n, dtype=np.int64), 0)
        write_psth(out_dir / PSTH_FILE, hist)


def run_simulate(config: ScenarioConfig, out_dir) -> RunReport:
    """Nominal behavior only; writes spike, frequency and PSTH logs plus a report."""
    start = time.perf_counter()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    n_trials = trials_within(config, config.stimulus.count)
    sim = _simulation(config, n_trials)
    acc = _Accumulator()
    with SpikeLog(out_dir / SPIKES_FILE) as spikes:
        sim.network.spike_listeners.append(spikes)
        for _ in range(n_trials):
            t_stim = sim.protocol.trial_time(sim.trials_done)
            acc.add(t_stim, sim.run_trial())
    acc.write(out_dir, sim)
    report = RunReport("simulate", None, n_trials, wall_clock=time.perf_counter() - start)
    write_json(out_dir / REPORT_FILE, report.to_dict())
    return report


def converged(errors: list[float], window: int, epsilon: float) -> bool:
    return len(errors) >= window and float(np.mean(errors[-window:])) <= epsilon


def calibrate(config: ScenarioConfig, reference: ReferenceTrace, org_stream=None, on_trial=None):
    """Trial loop of a calibrate run; returns the simulation, per-trial errors and the log."""
    budget = trials_within(config, config.calibration.max_trials)
    window = config.calibration.convergence_window
    eps = config.viewer.epsilon
    log = OrganizationLog(org_stream)
    sim = _simulation(config, budget, reference=reference, self_organize=True, org_log=log)
    errors: list[float] = []
    if on_trial is not None:
        on_trial(sim, None, None)
    while sim.trials_done < budget and not converged(errors, window, eps):
        t_stim = sim.protocol.trial_time(sim.trials_done)
        result = sim.run_trial()
        errors.append(result.error)
        if on_trial is not None:
            on_trial(sim, t_stim, result)
    return sim, errors, log


def run_calibrate(config: ScenarioConfig, reference, out_dir) -> RunReport:
    """Self-organize against ``reference`` (a path or a trace) until converged or out of budget."""
    start = time.perf_counter()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not isinstance(reference, ReferenceTrace):
        reference = read_reference(reference, tolerance=config.viewer.epsilon)
    acc = _Accumulator()
    with JsonlLog(out_dir / ORG_LOG_FILE) as org_stream, SpikeLog(out_dir / SPIKES_FILE) as spikes:

        def on_trial(sim, t_stim, result):
            if result is None:
                sim.network.spike_listeners.append(spikes)
            else:
                acc.add(t_stim, result)

        sim, errors, log = calibrate(config, reference, org_stream.stream, on_trial)
    acc.write(out_dir, sim)
    report = calibration_report(config, sim, errors, log, time.perf_counter() - start)
    write_json(out_dir / REPORT_FILE, report.to_dict())
    return report


def calibration_report(config, sim, errors, log, wall_clock) -> RunReport:
    window = config.calibration.convergence_window
    tail = errors[-window:]
    return RunReport(
        "calibrate",
        float(np.mean(tail)) if tail else None,
        len(errors),
        event_counts=log.counts(),
        converged=converged(errors, window, config.viewer.epsilon),
        wall_clock=wall_clock,
        evolution_refused=sim.non_convergent,
        errors=errors,
    )


def generate_reference(config: ScenarioConfig) -> tuple[ReferenceTrace, list[FrequencySeries]]:
    n_trials = trials_within(config, config.stimulus.count)
    if n_trials == 0:
        raise ValueError("no stimulus trial fits in the configured duration")
    sim = _simulation(config, n_trials)
    per_trial = [sim.run_trial().series for _ in range(n_trials)]
    mean = average_series(per_trial)
    if len(mean) == 0:
        raise ValueError(
            f"observed motoneuron {config.observed!r} produced no spike pair in any trial; "
            "the reference would be empty"
        )
    return ReferenceTrace.from_series(mean, source="generated", tolerance=config.viewer.epsilon), per_trial


def run_gen_reference(config: ScenarioConfig, out_path) -> RunReport:
    start = time.perf_counter()
    reference, per_trial = generate_reference(config)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_reference(out_path, reference)
    return RunReport("gen-reference", None, len(per_trial), wall_clock=time.perf_counter() - start)
