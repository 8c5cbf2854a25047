"""Cooperative self-organization: NCS feedback, criticality and the behavior ladder.

An agent facing a non-cooperative situation (NCS) first tries to tune its
incoming link weights. When no link can move it propagates the problem to
its presynaptic agents and counts the attempt as exhausted. After
``k_tune`` consecutive exhausted attempts it reorganizes (adds or removes a
link) and after ``k_reorg`` failed reorganizations it evolves (creates an
interneuron, or disappears when useless).
"""

from __future__ import annotations

import itertools
import json
from collections import defaultdict
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import IO, Iterable

from .neural import DELAY_RANGE, WEIGHT_BOUNDS, Network, Neuron, Role, Sign, SynapseLink
from .tracker import Direction, at_limit, stalled


class NCSKind(str, Enum):
    DEPOLARIZATION = "DepolarizationNCS"
    INSTANT_FREQUENCY = "InstantFrequencyNCS"


class NCSDirection(str, Enum):
    TOO_LOW = "TooLow"
    TOO_HIGH = "TooHigh"

    def flipped(self) -> "NCSDirection":
        return NCSDirection.TOO_HIGH if self is NCSDirection.TOO_LOW else NCSDirection.TOO_LOW

    def through(self, sign: Sign) -> "NCSDirection":
        """Direction asked of a presynaptic agent reached through a link of ``sign``."""
        return self if sign is Sign.EXCITATORY else self.flipped()


class BehaviorAction(str, Enum):
    NO_ACTION = "NoAction"
    TUNE = "Tune"
    PROPAGATE = "Propagate"
    REORGANIZE = "Reorganize"
    EVOLVE = "Evolve"


@dataclass(frozen=True)
class NCS:
    kind: NCSKind
    direction: NCSDirection
    magnitude: float
    origin: str
    window: tuple[float, float]

    def __post_init__(self):
        if not 0.0 <= self.magnitude <= 1.0:
            raise ValueError(f"NCS magnitude must lie in [0, 1], got {self.magnitude}")
        object.__setattr__(self, "kind", NCSKind(self.kind))
        object.__setattr__(self, "direction", NCSDirection(self.direction))

    @property
    def key(self) -> tuple[NCSKind, NCSDirection]:
        return (self.kind, self.direction)


@dataclass(frozen=True)
class Feedback:
    """A cooperative message; ``ncs is None`` marks a Good observation."""

    ncs: NCS | None
    criticality: float
    hops: int
    sender: str

    @property
    def good(self) -> bool:
        return self.ncs is None


HOP_DECAY = 0.5


def good_feedback(sender: str, hops: int = 0) -> Feedback:
    return Feedback(None, 0.0, hops, sender)


def ncs_feedback(ncs: NCS, sender: str, hops: int = 0, hop_decay: float = HOP_DECAY) -> Feedback:
    return Feedback(ncs, ncs.magnitude * hop_decay**hops, hops, sender)


# -- memory and criticality ------------------------------------------------


@dataclass
class AgentMemory:
    horizon: float
    recent: list[tuple[Feedback, float]] = field(default_factory=list)


def forget(memory: AgentMemory, t: float) -> AgentMemory:
    memory.recent = [(fb, at) for fb, at in memory.recent if t - at <= memory.horizon]
    return memory


def memorize(memory: AgentMemory, feedback: Feedback, t: float) -> AgentMemory:
    memory.recent.append((feedback, t))
    return forget(memory, t)


def compute_criticality(memory: AgentMemory, t: float, hop_decay: float = HOP_DECAY) -> float:
    """Largest hop-decayed NCS magnitude among live memory entries."""
    live = [fb for fb, at in memory.recent if t - at <= memory.horizon and fb.ncs is not None]
    return max((fb.ncs.magnitude * hop_decay**fb.hops for fb in live), default=0.0)


def select_helpee(candidates: Iterable[tuple[str, float]]) -> str:
    """Most critical agent id, smallest id on ties."""
    candidates = list(candidates)
    if not candidates:
        raise ValueError("select_helpee needs at least one candidate")
    return min(candidates, key=lambda c: (-c[1], c[0]))[0]


# -- detection and propagation ----------------------------------------------


def detect_depolarization_ncs(neuron: Neuron, demand: Feedback | None, t: float) -> NCS | None:
    """Check whether the neuron's own depolarization fails the downstream demand."""
    if demand is None or demand.ncs is None:
        return None
    state = neuron.state
    t0, t1 = demand.ncs.window
    if demand.ncs.direction is NCSDirection.TOO_LOW:
        peak = neuron.peak_depolarization(t0, t1)
        if peak >= state.theta:
            return None
        magnitude = min(1.0, max(0.0, (state.theta - peak) / (state.theta - state.v_rest)))
        return NCS(NCSKind.DEPOLARIZATION, NCSDirection.TOO_LOW, magnitude, neuron.id, (t0, t1))
    if neuron.spike_count(t0, t1) > 0:
        return NCS(
            NCSKind.DEPOLARIZATION, NCSDirection.TOO_HIGH, demand.ncs.magnitude, neuron.id, (t0, t1)
        )
    return None


def propagate_feedback(
    network: Network,
    neuron_id: str,
    ncs: NCS,
    hops: int,
    max_hops: int,
    hop_decay: float = HOP_DECAY,
) -> list[tuple[str, Feedback]]:
    """One feedback per incoming link, interpreted through the link's sign.

    ``hops`` is the hop count of the feedback that triggered propagation;
    returns ``(recipient, feedback)`` pairs, empty past ``max_hops``.
    """
    next_hops = hops + 1
    if next_hops > max_hops:
        return []
    out = []
    for link in network.incoming(neuron_id):
        interpreted = replace(ncs, direction=ncs.direction.through(link.sign))
        out.append((link.pre, ncs_feedback(interpreted, neuron_id, next_hops, hop_decay)))
    return out


# -- the ladder -------------------------------------------------------------


@dataclass
class LadderState:
    """Escalation counters of one agent, per (NCS kind, direction)."""

    exhausted: dict = field(default_factory=lambda: defaultdict(int))
    failed_reorgs: dict = field(default_factory=lambda: defaultdict(int))

    def reset(self) -> None:
        self.exhausted.clear()
        self.failed_reorgs.clear()


def tunable_links(network: Network, neuron_id: str, ncs: NCS) -> list[SynapseLink]:
    """Incoming links that were co-active in the NCS window and can still usefully move."""
    t0, t1 = ncs.window
    movable = []
    for link in network.incoming(neuron_id):
        pre = network.neurons.get(link.pre)
        if pre is None or pre.spike_count(t0, t1) == 0:
            continue
        direction = link_direction(ncs.direction, link.sign)
        if not (at_limit(link.tracker, direction) or stalled(link.tracker, direction)):
            movable.append(link)
    return movable


def link_direction(direction: NCSDirection, sign: Sign) -> Direction:
    want_more = direction.through(sign) is NCSDirection.TOO_LOW
    return Direction.UP if want_more else Direction.DOWN


def threshold_direction(direction: NCSDirection) -> Direction:
    """A neuron asked for more depolarization lowers its threshold."""
    return Direction.DOWN if direction is NCSDirection.TOO_LOW else Direction.UP


def handle_feedback(
    ladder: LadderState, feedback: Feedback, can_tune: bool, k_tune: int, k_reorg: int
) -> BehaviorAction:
    """Pick the next rung for ``feedback`` and update the counters.

    Counter updates that depend on the outcome of reorganization or
    evolution are applied by :func:`record_outcome`.
    """
    if feedback.good:
        ladder.reset()
        return BehaviorAction.NO_ACTION
    key = feedback.ncs.key
    if can_tune:
        ladder.exhausted[key] = 0
        return BehaviorAction.TUNE
    if ladder.exhausted[key] < k_tune:
        ladder.exhausted[key] += 1
        return BehaviorAction.PROPAGATE
    if ladder.failed_reorgs[key] < k_reorg:
        return BehaviorAction.REORGANIZE
    return BehaviorAction.EVOLVE


def record_outcome(ladder: LadderState, key, action: BehaviorAction, success: bool) -> None:
    if action is BehaviorAction.REORGANIZE:
        if success:
            ladder.exhausted[key] = 0
        else:
            ladder.failed_reorgs[key] += 1
    elif action is BehaviorAction.EVOLVE and success:
        ladder.exhausted[key] = 0
        ladder.failed_reorgs[key] = 0


# -- topology changes -------------------------------------------------------


@dataclass
class OrgConstants:
    k_tune: int = 5
    k_reorg: int = 3
    max_hops: int = 4
    w_init: float = 2.0
    n_max: int = 32
    horizon: float = 1000.0
    hop_decay: float = HOP_DECAY
    eager_propagation: bool = False
    tune_thresholds: bool = False


@dataclass
class TopologyChange:
    success: bool
    added: list[SynapseLink] = field(default_factory=list)
    removed: list[SynapseLink] = field(default_factory=list)
    flipped: list[SynapseLink] = field(default_factory=list)
    created: list[str] = field(default_factory=list)
    deleted: list[str] = field(default_factory=list)
    refused: bool = False
    reason: str = ""


def coactive_candidates(network: Network, neuron_id: str, window: tuple[float, float]) -> list[tuple[str, int]]:
    """Neurons that could newly wire onto ``neuron_id``, with their spike counts in ``window``."""
    t0, t1 = window
    existing = {l.pre for l in network.incoming(neuron_id)}
    out = []
    for nid, neuron in sorted(network.neurons.items()):
        if nid == neuron_id or nid in existing or neuron.role is Role.MOTONEURON:
            continue
        count = neuron.spike_count(t0, t1)
        if count > 0:
            out.append((nid, count))
    return out


def draw_delay(rng) -> float:
    lo, hi = DELAY_RANGE
    return float(rng.uniform(lo, hi))


def reorganize(network: Network, neuron_id: str, ncs: NCS, constants: OrgConstants, rng) -> TopologyChange:
    t0, t1 = ncs.window
    if ncs.direction is NCSDirection.TOO_LOW:
        candidates = coactive_candidates(network, neuron_id, ncs.window)
        if not candidates:
            return TopologyChange(False, reason="no co-active candidate")
        best = min(candidates, key=lambda c: (-c[1], c[0]))[0]
        bounds = _default_bounds(network, neuron_id)
        w = min(bounds[1], max(bounds[0], constants.w_init))
        link = network.add_link(
            SynapseLink.create(best, neuron_id, w, Sign.EXCITATORY, draw_delay(rng), bounds)
        )
        return TopologyChange(True, added=[link])

    active_exc = [
        l
        for l in network.incoming(neuron_id)
        if l.sign is Sign.EXCITATORY
        and l.pre in network.neurons
        and network.neurons[l.pre].spike_count(t0, t1) > 0
    ]
    if not active_exc:
        return TopologyChange(False, reason="no active excitatory input")
    weakest = min(active_exc, key=lambda l: (l.weight, l.pre))
    if weakest.weight <= weakest.tracker.lo:
        network.remove_link(weakest.pre, weakest.post)
        return TopologyChange(True, removed=[weakest])
    weakest.sign = Sign.INHIBITORY
    return TopologyChange(True, flipped=[weakest])


def _default_bounds(network: Network, neuron_id: str) -> tuple[float, float]:
    incoming = network.incoming(neuron_id)
    return incoming[0].weight_bounds if incoming else WEIGHT_BOUNDS


def fresh_interneuron_id(network: Network) -> str:
    for n in itertools.count(1):
        candidate = f"evo{n}"
        if candidate not in network.neurons and candidate not in network.muscles:
            return candidate
    raise AssertionError("unreachable")


def is_useless(network: Network, neuron_id: str) -> bool:
    neuron = network.neurons.get(neuron_id)
    return (
        neuron is not None
        and neuron.role is Role.INTERNEURON
        and not network.outgoing(neuron_id)
    )


def evolve(network: Network, neuron_id: str, ncs: NCS | None, constants: OrgConstants, rng) -> TopologyChange:
    """Create a helper interneuron, or let a useless interneuron disappear.

    A ``None`` ncs asks only whether the agent should disappear.
    """
    if is_useless(network, neuron_id):
        removed = network.remove_neuron(neuron_id)
        return TopologyChange(True, removed=removed, deleted=[neuron_id], reason="useless")
    if ncs is None:
        return TopologyChange(False, reason="not useless")

    if ncs.direction is NCSDirection.TOO_HIGH:
        if network.neurons[neuron_id].role is Role.INTERNEURON:
            removed = network.remove_neuron(neuron_id)
            return TopologyChange(True, removed=removed, deleted=[neuron_id], reason="overactive")
        return TopologyChange(False, reason="cannot silence a non-interneuron")

    if network.agent_count() >= constants.n_max:
        return TopologyChange(False, refused=True, reason="network size cap reached")
    t0, t1 = ncs.window
    afferents = [(a, network.neurons[a].spike_count(t0, t1)) for a in network.by_role(Role.AFFERENT)]
    if not afferents:
        return TopologyChange(False, reason="no afferent to recruit")
    source = min(afferents, key=lambda c: (-c[1], c[0]))[0]
    new_id = fresh_interneuron_id(network)
    target = network.neurons[neuron_id].state
    network.add_neuron(
        new_id,
        Role.INTERNEURON,
        v_rest=target.v_rest,
        theta=target.theta,
        tau_m=target.tau_m,
        t_refractory=target.t_refractory,
    )
    bounds = _default_bounds(network, neuron_id)
    w = min(bounds[1], max(bounds[0], constants.w_init))
    a = network.add_link(SynapseLink.create(source, new_id, w, Sign.EXCITATORY, draw_delay(rng), bounds))
    b = network.add_link(SynapseLink.create(new_id, neuron_id, w, Sign.EXCITATORY, draw_delay(rng), bounds))
    return TopologyChange(True, added=[a, b], created=[new_id])


# -- organization event log -------------------------------------------------


def ncs_record(ncs: NCS | None) -> dict:
    if ncs is None:
        return {"ncs_kind": None, "direction": "Good", "magnitude": 0.0}
    return {
        "ncs_kind": ncs.kind.value,
        "direction": ncs.direction.value,
        "magnitude": ncs.magnitude,
        "origin": ncs.origin,
        "window": list(ncs.window),
    }


def link_record(link: SynapseLink) -> dict:
    return {"pre": link.pre, "post": link.post, "weight": link.weight, "sign": link.sign.value, "delay": link.delay}


class OrganizationLog:
    """Append-only record of feedback, tune, reorganize and evolve events.

    Records are kept in memory and, when a stream is attached, written as
    JSON Lines as they happen.
    """

    KINDS = ("feedback", "tune", "reorganize", "evolve")

    def __init__(self, stream: IO[str] | None = None):
        self.records: list[dict] = []
        self.stream = stream

    def append(self, kind: str, time: float, agent: str, **fields) -> dict:
        if kind not in self.KINDS:
            raise ValueError(f"unknown organization record kind {kind!r}")
        record = {"seq": len(self.records), "kind": kind, "time_ms": time, "agent": agent, **fields}
        self.records.append(record)
        if self.stream is not None:
            self.stream.write(json.dumps(record, sort_keys=True) + "\n")
        return record

    def counts(self) -> dict[str, int]:
        counts = {k: 0 for k in self.KINDS}
        for r in self.records:
            counts[r["kind"]] += 1
        return counts

    def organization_events(self) -> int:
        c = self.counts()
        return c["tune"] + c["reorganize"] + c["evolve"]
