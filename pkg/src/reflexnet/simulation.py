"""Wires the network, the cooperative agents and the WiringViewer onto one engine."""

from __future__ import annotations

from dataclasses import dataclass, field

from .engine import Engine, Event, FeedbackDelivery, ScheduledAction, SpikeDelivery, StimulusPulse
from .neural import Network, Role, StimulusProtocol, schedule_trial_pulses
from .organization import (
    AgentMemory,
    BehaviorAction,
    Feedback,
    LadderState,
    OrganizationLog,
    OrgConstants,
    TopologyChange,
    compute_criticality,
    detect_depolarization_ncs,
    evolve,
    forget,
    good_feedback,
    handle_feedback,
    is_useless,
    link_direction,
    threshold_direction,
    link_record,
    memorize,
    ncs_feedback,
    ncs_record,
    propagate_feedback,
    record_outcome,
    reorganize,
    select_helpee,
    tunable_links,
)
from .tracker import Direction, apply_feedback, at_limit, stalled
from .viewer import (
    DEFAULT_EPSILON,
    FrequencySeries,
    Psth,
    ReferenceTrace,
    TrialObservation,
    compare,
    psth,
    trial_error,
    trial_series,
)

VIEWER_ID = "viewer"


@dataclass
class AgentState:
    """Cooperative bookkeeping attached to one neuron agent."""

    memory: AgentMemory
    ladder: LadderState = field(default_factory=LadderState)
    pending: list[Feedback] = field(default_factory=list)
    decision_scheduled: bool = False
    complained_to: set[str] = field(default_factory=set)
    housekeeping: ScheduledAction | None = None


@dataclass
class TrialResult:
    series: FrequencySeries
    psth: Psth
    feedbacks: list[Feedback]
    error: float | None


class Simulation:
    """One simulated reflex pathway observed by a WiringViewer.

    With ``self_organize=False`` only the nominal integrate-and-fire
    behavior runs; the viewer still records the observed motoneuron.
    """

    def __init__(
        self,
        network: Network,
        protocol: StimulusProtocol,
        observe: str,
        *,
        seed: int = 0,
        engine: Engine | None = None,
        window_ms: float | None = None,
        reference: ReferenceTrace | None = None,
        epsilon: float = DEFAULT_EPSILON,
        self_organize: bool = False,
        constants: OrgConstants | None = None,
        org_log: OrganizationLog | None = None,
        psth_bin_ms: float = 1.0,
        psth_window: tuple[float, float] | None = None,
    ):
        if observe not in network.neurons or network.neurons[observe].role is not Role.MOTONEURON:
            raise ValueError(f"observed agent {observe!r} is not a motoneuron of the network")
        self.network = network
        self.protocol = protocol
        self.observe = observe
        self.engine = engine if engine is not None else Engine(seed)
        self.window_ms = protocol.interval if window_ms is None else float(window_ms)
        if not 0 < self.window_ms <= protocol.interval:
            raise ValueError("observation window must lie in (0, stimulus interval]")
        self.reference = reference
        self.epsilon = epsilon
        self.self_organize = self_organize
        self.constants = constants or OrgConstants()
        self.log = org_log if org_log is not None else OrganizationLog()
        self.psth_bin_ms = psth_bin_ms
        self.psth_window = psth_window or (0.0, self.window_ms)
        self.agents: dict[str, AgentState] = {}
        self.observations: list[TrialObservation] = []
        self.non_convergent = False
        if self_organize and reference is None:
            raise ValueError("self-organization needs a reference trace to compare against")
        for nid in list(network.neurons):
            self._enlist(nid)
        for mid in network.muscles:
            self.engine.register(mid, self._on_event)

    # -- agent registry -----------------------------------------------------

    def _enlist(self, neuron_id: str) -> None:
        self.engine.register(neuron_id, self._on_event)
        state = AgentState(AgentMemory(self.constants.horizon))
        self.agents[neuron_id] = state
        role = self.network.neurons[neuron_id].role
        if self.self_organize and role is not Role.AFFERENT:
            first = max(self.engine.now(), self.protocol.onset) + self.protocol.interval
            state.housekeeping = self.engine.every(
                self.protocol.interval, neuron_id, lambda t, n=neuron_id: self._housekeeping(n, t), first
            )

    def _retire(self, neuron_id: str) -> None:
        self.engine.unregister(neuron_id)
        state = self.agents.pop(neuron_id, None)
        if state is not None and state.housekeeping is not None:
            state.housekeeping.cancel()

    # -- event dispatch -------------------------------------------------------

    def _on_event(self, event: Event) -> None:
        payload = event.payload
        if isinstance(payload, SpikeDelivery):
            self.network.deliver(event, self.engine)
        elif isinstance(payload, StimulusPulse):
            self.network.force_spike(payload.afferent, event.due, self.engine)
        elif isinstance(payload, FeedbackDelivery):
            self._receive(event.target, payload.feedback, event.due)

    def _send(self, recipient: str, feedback: Feedback, t: float) -> None:
        self.engine.schedule(t, recipient, FeedbackDelivery(feedback))

    def _receive(self, neuron_id: str, feedback: Feedback, t: float) -> None:
        state = self.agents.get(neuron_id)
        if state is None:
            return
        # logged on delivery so the log order is the processing order
        self.log.append(
            "feedback",
            t,
            neuron_id,
            sender=feedback.sender,
            hops=feedback.hops,
            criticality=feedback.criticality,
            **ncs_record(feedback.ncs),
        )
        memorize(state.memory, feedback, t)
        if self.network.neurons[neuron_id].role is Role.AFFERENT:
            return  # stimulus-driven; nothing of their own to adjust
        if feedback.good:
            self._on_good(neuron_id, state, feedback, t)
            return
        state.pending.append(feedback)
        if not state.decision_scheduled:
            state.decision_scheduled = True
            self.engine.once(t, neuron_id, lambda now, n=neuron_id: self._decide(n, now))

    # -- cooperative behavior ---------------------------------------------------

    def _decide(self, neuron_id: str, t: float) -> None:
        state = self.agents.get(neuron_id)
        if state is None or neuron_id not in self.network.neurons:
            return
        problems, state.pending = state.pending, []
        state.decision_scheduled = False
        c = self.constants
        if not problems:
            return

        by_sender: dict[str, float] = {}
        for fb in problems:
            by_sender[fb.sender] = max(by_sender.get(fb.sender, 0.0), fb.criticality)
        helpee = select_helpee(by_sender.items())
        demand = max(
            (fb for fb in problems if fb.sender == helpee), key=lambda fb: fb.criticality
        )
        ncs = demand.ncs
        movable = tunable_links(self.network, neuron_id, ncs)
        neuron = self.network.neurons[neuron_id]
        threshold_dir = threshold_direction(ncs.direction)
        tune_threshold = (
            c.tune_thresholds
            and neuron.threshold_tracker is not None
            and not at_limit(neuron.threshold_tracker, threshold_dir)
            and not stalled(neuron.threshold_tracker, threshold_dir)
        )
        action = handle_feedback(
            state.ladder, demand, bool(movable) or tune_threshold, c.k_tune, c.k_reorg
        )
        criticality = compute_criticality(state.memory, t, c.hop_decay)
        common = dict(action=action.value, criticality=criticality, hops=demand.hops, **ncs_record(ncs))

        if action is BehaviorAction.TUNE:
            for link in movable:
                before = link.weight
                link.tracker = apply_feedback(link.tracker, link_direction(ncs.direction, link.sign))
                self.log.append(
                    "tune", t, neuron_id, exhausted=False, link=[link.pre, link.post],
                    before=before, after=link.weight, step=link.tracker.delta, **common,
                )
            if tune_threshold:
                before = neuron.state.theta
                neuron.retune_threshold(threshold_dir)
                self.log.append(
                    "tune", t, neuron_id, exhausted=False, parameter="theta",
                    before=before, after=neuron.state.theta, **common,
                )
            if c.eager_propagation:
                self._propagate(neuron_id, state, demand, t)
        elif action is BehaviorAction.PROPAGATE:
            self.log.append("tune", t, neuron_id, exhausted=True,
                            streak=state.ladder.exhausted[ncs.key], **common)
            self._propagate(neuron_id, state, demand, t)
        elif action is BehaviorAction.REORGANIZE:
            change = reorganize(self.network, neuron_id, ncs, c, self.engine.rng)
            record_outcome(state.ladder, ncs.key, action, change.success)
            self._log_change("reorganize", neuron_id, change, t, common)
        elif action is BehaviorAction.EVOLVE:
            change = evolve(self.network, neuron_id, ncs, c, self.engine.rng)
            record_outcome(state.ladder, ncs.key, action, change.success)
            if change.refused:
                self.non_convergent = True
            self._log_change("evolve", neuron_id, change, t, common)

    def _propagate(self, neuron_id: str, state: AgentState, demand: Feedback, t: float) -> None:
        own = detect_depolarization_ncs(self.network.neurons[neuron_id], demand, t)
        ncs = own if own is not None else demand.ncs
        for recipient, fb in propagate_feedback(
            self.network, neuron_id, ncs, demand.hops, self.constants.max_hops, self.constants.hop_decay
        ):
            state.complained_to.add(recipient)
            self._send(recipient, fb, t)

    def _on_good(self, neuron_id: str, state: AgentState, good: Feedback, t: float) -> None:
        handle_feedback(state.ladder, good, False, self.constants.k_tune, self.constants.k_reorg)
        for link in self.network.incoming(neuron_id):
            link.tracker = apply_feedback(link.tracker, Direction.GOOD)
        if good.hops + 1 <= self.constants.max_hops:
            for recipient in sorted(state.complained_to):
                if recipient in self.network.neurons:
                    self._send(recipient, good_feedback(neuron_id, good.hops + 1), t)
        state.complained_to.clear()

    def _log_change(self, kind: str, neuron_id: str, change: TopologyChange, t: float, common: dict) -> None:
        self.log.append(
            kind, t, neuron_id,
            success=change.success,
            refused=change.refused,
            reason=change.reason,
            added=[link_record(l) for l in change.added],
            removed=[link_record(l) for l in change.removed],
            flipped=[link_record(l) for l in change.flipped],
            created=change.created,
            deleted=change.deleted,
            **common,
        )
        for nid in change.created:
            self._enlist(nid)
        for nid in change.deleted:
            self._retire(nid)

    def _housekeeping(self, neuron_id: str, t: float) -> None:
        state = self.agents.get(neuron_id)
        if state is None:
            return
        forget(state.memory, t)
        self.network.neurons[neuron_id].prune(t - self.constants.horizon)
        if is_useless(self.network, neuron_id):
            change = evolve(self.network, neuron_id, None, self.constants, self.engine.rng)
            self._log_change("evolve", neuron_id, change, t, dict(action=BehaviorAction.EVOLVE.value, ncs_kind=None))

    # -- trials -----------------------------------------------------------------

    @property
    def trials_done(self) -> int:
        return len(self.observations)

    def run_trial(self) -> TrialResult:
        """Stimulate, observe the motoneuron, and (when organizing) feed back."""
        k = self.trials_done
        t_k = self.protocol.trial_time(k)
        self.engine.once(t_k, VIEWER_ID, lambda t: schedule_trial_pulses(self.protocol, t, self.engine))
        result: dict = {}
        self.engine.once(t_k + self.window_ms, VIEWER_ID, lambda t: result.update(self._evaluate(k, t_k, t)))
        self.engine.run_until(t_k + self.protocol.interval)
        return TrialResult(**result)

    def _evaluate(self, k: int, t_k: float, t: float) -> dict:
        spikes = self.network.neurons[self.observe].spikes
        series = trial_series(spikes, t_k, self.window_ms)
        trial_psth = psth(spikes, [t_k], self.psth_bin_ms, self.psth_window)
        obs = TrialObservation(k, t_k, series)
        feedbacks: list[Feedback] = []
        if self.reference is not None:
            obs.error = trial_error(series, self.reference)
            obs.ncs = compare(series, self.reference, self.epsilon, VIEWER_ID, (t_k, t_k + self.window_ms))
            if self.self_organize:
                feedbacks = [ncs_feedback(n, VIEWER_ID, 0, self.constants.hop_decay) for n in obs.ncs]
                for fb in feedbacks:
                    self._send(self.observe, fb, t)
                if not feedbacks:
                    self._send(self.observe, good_feedback(VIEWER_ID), t)
        self.observations.append(obs)
        return dict(series=series, psth=trial_psth, feedbacks=feedbacks, error=obs.error)

    def psth_over_trials(self) -> Psth:
        spikes = self.network.neurons[self.observe].spikes
        return psth(spikes, [o.t_stim for o in self.observations], self.psth_bin_ms, self.psth_window)
