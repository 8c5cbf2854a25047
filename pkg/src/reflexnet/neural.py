"""Leaky integrate-and-fire cells, axonal links, muscles and stimulation.

Membrane potential is not stepped on a clock. It is relaxed analytically to
the arrival time of each PSP (:func:`decay_to`) and then jumps by the PSP
amplitude (:func:`receive_psp`). Times are in ms and potentials in mV.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

from .engine import Engine, Event, SpikeDelivery, StimulusPulse
from .tracker import TrackerState, apply_feedback, make_tracker

V_REST = -70.0
THETA = -55.0
TAU_M = 10.0
T_REFRACTORY = 3.0
NEUROMUSCULAR_DELAY = 1.0
DELAY_RANGE = (1.0, 5.0)
WEIGHT_BOUNDS = (0.0, 20.0)


class Role(str, Enum):
    AFFERENT = "afferent"
    INTERNEURON = "interneuron"
    MOTONEURON = "motoneuron"


class Sign(str, Enum):
    EXCITATORY = "excitatory"
    INHIBITORY = "inhibitory"

    @property
    def factor(self) -> float:
        return 1.0 if self is Sign.EXCITATORY else -1.0


@dataclass(frozen=True)
class NeuronState:
    v: float = V_REST
    v_rest: float = V_REST
    theta: float = THETA
    tau_m: float = TAU_M
    t_refractory: float = T_REFRACTORY
    last_update: float = 0.0
    last_spike: float | None = None
    role: Role = Role.INTERNEURON

    def __post_init__(self):
        if not self.theta > self.v_rest:
            raise ValueError(f"threshold {self.theta} must exceed resting potential {self.v_rest}")
        if not self.tau_m > 0:
            raise ValueError(f"tau_m must be positive, got {self.tau_m}")
        if self.t_refractory < 0:
            raise ValueError(f"t_refractory must be non-negative, got {self.t_refractory}")

    def refractory_at(self, t: float) -> bool:
        return self.last_spike is not None and t - self.last_spike <= self.t_refractory


def decay_to(neuron: NeuronState, t: float) -> NeuronState:
    """Relax the membrane toward rest over ``t - last_update``."""
    dt = t - neuron.last_update
    if dt < 0:
        raise ValueError(f"cannot decay backwards from {neuron.last_update} to {t}")
    if neuron.refractory_at(t):
        v = neuron.v_rest
    elif dt == 0:
        v = neuron.v
    else:
        v = neuron.v_rest + (neuron.v - neuron.v_rest) * math.exp(-dt / neuron.tau_m)
    return replace(neuron, v=v, last_update=t)


@dataclass
class SynapseLink:
    """Directed axonal connection; its weight lives in a bounded tracker."""

    pre: str
    post: str
    tracker: TrackerState
    sign: Sign = Sign.EXCITATORY
    delay: float = 1.0

    def __post_init__(self):
        self.sign = Sign(self.sign)
        if not self.delay > 0:
            raise ValueError(f"link {self.pre}->{self.post}: delay must be > 0, got {self.delay}")
        if self.tracker.lo < 0:
            raise ValueError(f"link {self.pre}->{self.post}: weights are magnitudes, w_min must be >= 0")

    @classmethod
    def create(cls, pre, post, weight, sign=Sign.EXCITATORY, delay=1.0, bounds=WEIGHT_BOUNDS):
        lo, hi = bounds
        if not lo <= weight <= hi:
            raise ValueError(f"link {pre}->{post}: weight {weight} outside [{lo}, {hi}]")
        return cls(pre, post, make_tracker(weight, lo, hi), Sign(sign), float(delay))

    @property
    def key(self) -> tuple[str, str]:
        return (self.pre, self.post)

    @property
    def weight(self) -> float:
        return self.tracker.value

    @property
    def weight_bounds(self) -> tuple[float, float]:
        return (self.tracker.lo, self.tracker.hi)

    @property
    def psp(self) -> float:
        return self.sign.factor * self.weight


def receive_psp(neuron: NeuronState, link: SynapseLink, t: float) -> tuple[NeuronState, float | None]:
    """Decay to ``t``, add the link's PSP and fire if threshold is reached.

    Returns the new state and the spike time, or ``None`` when no spike is
    emitted. PSPs arriving inside the refractory window are absorbed by the
    clamp to rest.
    """
    neuron = decay_to(neuron, t)
    if neuron.refractory_at(t):
        return neuron, None
    v = neuron.v + link.psp
    if v >= neuron.theta:
        return replace(neuron, v=neuron.v_rest, last_spike=t), t
    return replace(neuron, v=v), None


@dataclass
class Neuron:
    """Excitable-cell agent wrapping a :class:`NeuronState` and its logs."""

    id: str
    state: NeuronState
    spikes: list[float] = field(default_factory=list)
    # (time, potential right after the PSP jump, before any reset)
    trace: list[tuple[float, float]] = field(default_factory=list)
    threshold_tracker: TrackerState | None = None

    def __post_init__(self):
        s = self.state
        if self.threshold_tracker is None and s.role is not Role.AFFERENT:
            gap = s.theta - s.v_rest
            self.threshold_tracker = make_tracker(s.theta, s.v_rest + gap / 10, s.theta + gap)

    def retune_threshold(self, direction) -> None:
        self.threshold_tracker = apply_feedback(self.threshold_tracker, direction)
        self.state = replace(self.state, theta=self.threshold_tracker.value)

    @property
    def role(self) -> Role:
        return self.state.role

    def spike_count(self, t0: float, t1: float) -> int:
        return sum(1 for s in self.spikes if t0 <= s < t1)

    def peak_depolarization(self, t0: float, t1: float) -> float:
        peaks = [v for t, v in self.trace if t0 <= t < t1]
        return max(peaks, default=self.state.v_rest)

    def prune(self, before: float) -> None:
        self.trace = [(t, v) for t, v in self.trace if t >= before]


@dataclass
class MuscleState:
    id: str
    innervating: list[str]
    discharge_log: list[float] = field(default_factory=list)


class DischargeError(ValueError):
    pass


def record_discharge(muscle: MuscleState, motoneuron: str, t: float) -> MuscleState:
    if motoneuron not in muscle.innervating:
        raise DischargeError(f"{motoneuron!r} does not innervate muscle {muscle.id!r}")
    if muscle.discharge_log and t <= muscle.discharge_log[-1]:
        raise DischargeError(
            f"muscle {muscle.id!r} discharge at {t} not after previous {muscle.discharge_log[-1]}"
        )
    muscle.discharge_log.append(t)
    return muscle


@dataclass(frozen=True)
class StimulusProtocol:
    """Stimulus trials at ``onset + k * interval`` for ``k < count``.

    Each trial delivers a pulse train of ``train_count`` pulses spaced by
    ``train_interval`` ms to every target afferent; a single pulse by default.
    """

    onset: float
    interval: float
    count: int
    targets: tuple[str, ...]
    train_count: int = 1
    train_interval: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        if self.count <= 0:
            raise ValueError(f"stimulus count must be positive, got {self.count}")
        if not self.interval > 0:
            raise ValueError(f"stimulus interval must be > 0, got {self.interval}")
        if self.onset < 0:
            raise ValueError(f"stimulus onset must be >= 0, got {self.onset}")
        if self.train_count <= 0 or not self.train_interval > 0:
            raise ValueError("pulse train needs train_count > 0 and train_interval > 0")
        if (self.train_count - 1) * self.train_interval >= self.interval:
            raise ValueError("pulse train must end before the next trial starts")
        if not self.targets:
            raise ValueError("stimulus protocol needs at least one target afferent")

    def trial_time(self, k: int) -> float:
        return self.onset + k * self.interval

    def trial_times(self) -> list[float]:
        return [self.trial_time(k) for k in range(self.count)]

    def pulse_offsets(self) -> list[float]:
        return [j * self.train_interval for j in range(self.train_count)]


class TopologyError(ValueError):
    pass


class Network:
    """Agents and links of one simulated reflex pathway."""

    def __init__(self):
        self.neurons: dict[str, Neuron] = {}
        self.links: dict[tuple[str, str], SynapseLink] = {}
        self.muscles: dict[str, MuscleState] = {}
        self.neuromuscular_delay = NEUROMUSCULAR_DELAY
        # called as listener(agent_id, t) for every neuron spike and muscle discharge
        self.spike_listeners: list = []

    def add_neuron(self, neuron_id: str, role: Role | str = Role.INTERNEURON, **params) -> Neuron:
        if neuron_id in self.neurons or neuron_id in self.muscles:
            raise TopologyError(f"duplicate agent id {neuron_id!r}")
        neuron = Neuron(neuron_id, NeuronState(role=Role(role), **params))
        self.neurons[neuron_id] = neuron
        return neuron

    def remove_neuron(self, neuron_id: str) -> list[SynapseLink]:
        """Delete a neuron; returns the links removed with it."""
        removed = [l for l in self.links.values() if neuron_id in (l.pre, l.post)]
        for link in removed:
            del self.links[link.key]
        del self.neurons[neuron_id]
        return removed

    def add_link(self, link: SynapseLink) -> SynapseLink:
        for end in (link.pre, link.post):
            if end not in self.neurons:
                raise TopologyError(f"link {link.pre}->{link.post} references unknown agent {end!r}")
        if link.pre == link.post:
            raise TopologyError(f"self-link on {link.pre!r} is not allowed")
        if link.key in self.links:
            raise TopologyError(f"duplicate link {link.pre}->{link.post}")
        if self.neurons[link.post].role is Role.AFFERENT:
            raise TopologyError(f"afferent {link.post!r} cannot receive synapses")
        self.links[link.key] = link
        return link

    def remove_link(self, pre: str, post: str) -> SynapseLink:
        return self.links.pop((pre, post))

    def add_muscle(self, muscle_id: str, innervating: list[str]) -> MuscleState:
        if muscle_id in self.neurons or muscle_id in self.muscles:
            raise TopologyError(f"duplicate agent id {muscle_id!r}")
        for m in innervating:
            if m not in self.neurons or self.neurons[m].role is not Role.MOTONEURON:
                raise TopologyError(f"muscle {muscle_id!r} innervated by non-motoneuron {m!r}")
        muscle = MuscleState(muscle_id, list(innervating))
        self.muscles[muscle_id] = muscle
        return muscle

    def incoming(self, neuron_id: str) -> list[SynapseLink]:
        return sorted((l for l in self.links.values() if l.post == neuron_id), key=lambda l: l.pre)

    def outgoing(self, neuron_id: str) -> list[SynapseLink]:
        return sorted((l for l in self.links.values() if l.pre == neuron_id), key=lambda l: l.post)

    def by_role(self, role: Role) -> list[str]:
        return sorted(n for n, neuron in self.neurons.items() if neuron.role is role)

    def agent_count(self) -> int:
        return len(self.neurons) + len(self.muscles)

    # -- event-level operations -------------------------------------------

    def fire(self, neuron_id: str, t: float, engine: Engine) -> list[Event]:
        """Log a spike and schedule one delivery per outgoing link (and muscle)."""
        self.neurons[neuron_id].spikes.append(t)
        for listener in self.spike_listeners:
            listener(neuron_id, t)
        events = [
            engine.schedule(t + link.delay, link.post, SpikeDelivery(link.pre, link.post))
            for link in self.outgoing(neuron_id)
        ]
        for muscle in self.muscles.values():
            if neuron_id in muscle.innervating:
                events.append(
                    engine.schedule(
                        t + self.neuromuscular_delay, muscle.id, SpikeDelivery(neuron_id, muscle.id)
                    )
                )
        return events

    def deliver(self, event: Event, engine: Engine) -> float | None:
        """Apply a spike delivery to its target; returns the spike time if it fired."""
        payload = event.payload
        if payload.post in self.muscles:
            record_discharge(self.muscles[payload.post], payload.pre, event.due)
            for listener in self.spike_listeners:
                listener(payload.post, event.due)
            return None
        link = self.links.get((payload.pre, payload.post))
        neuron = self.neurons.get(payload.post)
        if link is None or neuron is None:
            return None  # link removed while the spike was in flight
        relaxed = decay_to(neuron.state, event.due)
        neuron.state, spike = receive_psp(neuron.state, link, event.due)
        if not relaxed.refractory_at(event.due):
            neuron.trace.append((event.due, relaxed.v + link.psp))
        if spike is not None:
            self.fire(neuron.id, spike, engine)
        return spike

    def force_spike(self, neuron_id: str, t: float, engine: Engine) -> list[Event]:
        neuron = self.neurons[neuron_id]
        neuron.state = replace(decay_to(neuron.state, t), v=neuron.state.v_rest, last_spike=t)
        return self.fire(neuron_id, t, engine)


def apply_stimulus(protocol: StimulusProtocol, engine: Engine) -> list[Event]:
    """Schedule every stimulus pulse of the protocol."""
    if protocol.onset < engine.now():
        raise ValueError(f"stimulus onset {protocol.onset} is before now={engine.now()}")
    events = []
    for t_trial in protocol.trial_times():
        events.extend(schedule_trial_pulses(protocol, t_trial, engine))
    return events


def schedule_trial_pulses(protocol: StimulusProtocol, t_trial: float, engine: Engine) -> list[Event]:
    return [
        engine.schedule(t_trial + offset, target, StimulusPulse(target))
        for offset in protocol.pulse_offsets()
        for target in protocol.targets
    ]
