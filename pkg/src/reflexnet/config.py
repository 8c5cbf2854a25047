"""Scenario configuration: YAML schema, defaults and total validation."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .neural import DELAY_RANGE, T_REFRACTORY, TAU_M, THETA, V_REST, WEIGHT_BOUNDS, Role, Sign
from .organization import OrgConstants

MODES = ("simulate", "calibrate", "gen-reference")
AUTO = "auto"
NEURON_PARAMS = ("v_rest", "theta", "tau_m", "t_refractory")
UINT64_MAX = 2**64 - 1


class ConfigError(ValueError):
    """Every validation problem found in a scenario, not just the first."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid scenario config:\n  " + "\n  ".join(self.errors))


@dataclass(frozen=True)
class NeuronConstants:
    v_rest: float = V_REST
    theta: float = THETA
    tau_m: float = TAU_M
    t_refractory: float = T_REFRACTORY


@dataclass(frozen=True)
class AgentSpec:
    id: str
    role: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class LinkSpec:
    pre: str
    post: str
    weight: float | str = AUTO
    sign: str = Sign.EXCITATORY.value
    delay: float | str = AUTO


@dataclass(frozen=True)
class MuscleSpec:
    id: str
    innervating: tuple[str, ...]


@dataclass(frozen=True)
class NetworkSpec:
    agents: tuple[AgentSpec, ...]
    links: tuple[LinkSpec, ...] | str = ()
    muscles: tuple[MuscleSpec, ...] = ()
    weight_bounds: tuple[float, float] = WEIGHT_BOUNDS


@dataclass(frozen=True)
class StimulusSpec:
    targets: tuple[str, ...]
    onset_ms: float = 0.0
    interval_ms: float = 500.0
    count: int = 10
    train_count: int = 1
    train_interval_ms: float = 1.0


@dataclass(frozen=True)
class ViewerSpec:
    observe: str | None = None
    window_ms: float | None = None
    epsilon: float = 0.05
    psth_bin_ms: float = 1.0
    psth_window_ms: tuple[float, float] | None = None


@dataclass(frozen=True)
class CalibrationSpec:
    max_trials: int = 500
    convergence_window: int = 10


@dataclass(frozen=True)
class ScenarioConfig:
    network: NetworkSpec
    stimulus: StimulusSpec
    seed: int = 0
    duration_ms: float | None = None
    mode: str = "simulate"
    neuron: NeuronConstants = NeuronConstants()
    viewer: ViewerSpec = ViewerSpec()
    organization: OrgConstants = field(default_factory=OrgConstants)
    calibration: CalibrationSpec = CalibrationSpec()

    @property
    def observed(self) -> str:
        if self.viewer.observe is not None:
            return self.viewer.observe
        return next(a.id for a in self.network.agents if a.role == Role.MOTONEURON.value)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)


# -- parsing ------------------------------------------------------------------


def _take(section: dict, cls, where: str, errors: list[str], skip=()) -> dict:
    known = {f.name for f in dataclasses.fields(cls)} - set(skip)
    if not isinstance(section, dict):
        errors.append(f"{where}: expected a mapping, got {type(section).__name__}")
        return {}
    for key in section:
        if key not in known:
            errors.append(f"{where}: unknown key {key!r}")
    return {k: v for k, v in section.items() if k in known}


def _pair(value, where: str, errors: list[str]):
    if value is None:
        return None
    if not isinstance(value, (list, tuple)) or len(value) != 2 or not all(_is_number(v) for v in value):
        errors.append(f"{where}: expected a numeric [low, high] pair, got {value!r}")
        return None
    return (float(value[0]), float(value[1]))


def _list(value, where: str, errors: list[str]) -> list:
    if value is None:
        return []
    if not isinstance(value, (list, tuple)):
        errors.append(f"{where}: expected a list, got {value!r}")
        return []
    return list(value)


def _ident(value, where: str, errors: list[str]) -> str | None:
    if isinstance(value, bool) or not isinstance(value, (str, int)):
        errors.append(f"{where}: expected an id string, got {value!r}")
        return None
    return str(value)


def _text(section: dict, key: str, where: str, errors: list[str]) -> None:
    """Optional string field; anything else is reported and dropped."""
    if key in section and section[key] is not None and not isinstance(section[key], str):
        errors.append(f"{where}.{key}: expected a string, got {section[key]!r}")
        del section[key]


def _numbers(section: dict, where: str, errors: list[str]) -> dict:
    """Keep numeric entries as floats; report the rest."""
    out = {}
    for k, v in section.items():
        if _is_number(v):
            out[k] = float(v)
        else:
            errors.append(f"{where}.{k}: expected a number, got {v!r}")
    return out


def config_from_dict(data: dict) -> ScenarioConfig:
    errors: list[str] = []
    if not isinstance(data, dict):
        raise ConfigError([f"top level: expected a mapping, got {type(data).__name__}"])
    top = _take(data, ScenarioConfig, "config", errors)
    missing = [r for r in ("network", "stimulus") if r not in top]
    for required in missing:
        errors.append(f"config: missing required section {required!r}")
    if missing:
        raise ConfigError(errors)

    net_raw = _take(top["network"], NetworkSpec, "network", errors)
    agents = []
    for i, a in enumerate(_list(net_raw.get("agents"), "network.agents", errors)):
        where = f"network.agents[{i}]"
        if not isinstance(a, dict) or "id" not in a or "role" not in a:
            errors.append(f"{where}: needs 'id' and 'role'")
            continue
        agent_id = _ident(a["id"], f"{where}.id", errors)
        role = _ident(a["role"], f"{where}.role", errors)
        extra = {k: v for k, v in a.items() if k not in ("id", "role")}
        for k in extra:
            if k not in NEURON_PARAMS:
                errors.append(f"{where} ({agent_id}): unknown key {k!r}")
        params = _numbers({k: v for k, v in extra.items() if k in NEURON_PARAMS}, where, errors)
        if agent_id is not None and role is not None:
            agents.append(AgentSpec(agent_id, role, params))
    if not agents:
        errors.append("network.agents: at least one agent is required")

    links_raw = net_raw.get("links", ())
    if links_raw == AUTO:
        links: tuple | str = AUTO
    else:
        parsed = []
        for i, l in enumerate(_list(links_raw, "network.links", errors)):
            where = f"network.links[{i}]"
            kw = _take(l, LinkSpec, where, errors)
            if "pre" not in kw or "post" not in kw:
                errors.append(f"{where}: needs 'pre' and 'post'")
                continue
            kw["pre"] = _ident(kw["pre"], f"{where}.pre", errors)
            kw["post"] = _ident(kw["post"], f"{where}.post", errors)
            _text(kw, "sign", where, errors)
            if kw["pre"] is not None and kw["post"] is not None:
                parsed.append(LinkSpec(**kw))
        links = tuple(parsed)

    muscles = []
    for i, m in enumerate(_list(net_raw.get("muscles"), "network.muscles", errors)):
        where = f"network.muscles[{i}]"
        kw = _take(m, MuscleSpec, where, errors)
        if "id" not in kw:
            errors.append(f"{where}: needs 'id'")
            continue
        muscle_id = _ident(kw["id"], f"{where}.id", errors)
        innervating = [_ident(x, f"{where}.innervating", errors) for x in _list(kw.get("innervating"), f"{where}.innervating", errors)]
        if muscle_id is not None:
            muscles.append(MuscleSpec(muscle_id, tuple(x for x in innervating if x is not None)))
    bounds = _pair(net_raw.get("weight_bounds", WEIGHT_BOUNDS), "network.weight_bounds", errors) or WEIGHT_BOUNDS
    network = NetworkSpec(tuple(agents), links, tuple(muscles), bounds)

    stim_raw = _take(top["stimulus"], StimulusSpec, "stimulus", errors)
    if "targets" not in stim_raw:
        errors.append("stimulus: missing 'targets'")
    targets = [_ident(t, "stimulus.targets", errors) for t in _list(stim_raw.get("targets"), "stimulus.targets", errors)]
    stim_raw["targets"] = tuple(t for t in targets if t is not None)
    stimulus = StimulusSpec(**stim_raw)

    neuron = NeuronConstants(**_numbers(_take(top.get("neuron", {}), NeuronConstants, "neuron", errors), "neuron", errors))
    viewer_raw = _take(top.get("viewer", {}), ViewerSpec, "viewer", errors)
    _text(viewer_raw, "observe", "viewer", errors)
    if "psth_window_ms" in viewer_raw:
        viewer_raw["psth_window_ms"] = _pair(viewer_raw["psth_window_ms"], "viewer.psth_window_ms", errors)
    viewer = ViewerSpec(**viewer_raw)
    organization = OrgConstants(**_take(top.get("organization", {}), OrgConstants, "organization", errors))
    calibration = CalibrationSpec(**_take(top.get("calibration", {}), CalibrationSpec, "calibration", errors))

    _text(top, "mode", "config", errors)
    cfg = ScenarioConfig(
        network=network,
        stimulus=stimulus,
        seed=top.get("seed", 0),
        duration_ms=top.get("duration_ms"),
        mode=top.get("mode", "simulate"),
        neuron=neuron,
        viewer=viewer,
        organization=organization,
        calibration=calibration,
    )
    errors.extend(validate(cfg))
    if errors:
        raise ConfigError(errors)
    return cfg


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def validate(cfg: ScenarioConfig) -> list[str]:
    """All problems that would otherwise surface as runtime precondition failures."""
    errors: list[str] = []
    err = errors.append

    if not _is_int(cfg.seed) or not 0 <= cfg.seed <= UINT64_MAX:
        err(f"seed: must be an unsigned 64-bit integer, got {cfg.seed!r}")
    if cfg.duration_ms is not None and (not _is_number(cfg.duration_ms) or cfg.duration_ms < 0):
        err(f"duration_ms: must be >= 0, got {cfg.duration_ms!r}")
    if cfg.mode not in MODES:
        err(f"mode: must be one of {', '.join(MODES)}, got {cfg.mode!r}")

    def check_neuron(p: dict, where: str) -> None:
        v_rest, theta = p["v_rest"], p["theta"]
        if not theta > v_rest:
            err(f"{where}: theta ({theta}) must exceed v_rest ({v_rest})")
        if not p["tau_m"] > 0:
            err(f"{where}: tau_m must be > 0, got {p['tau_m']}")
        if p["t_refractory"] < 0:
            err(f"{where}: t_refractory must be >= 0, got {p['t_refractory']}")

    base = dataclasses.asdict(cfg.neuron)
    check_neuron(base, "neuron")

    roles = {r.value for r in Role}
    ids: dict[str, str] = {}
    for a in cfg.network.agents:
        if a.id in ids:
            err(f"network.agents: duplicate agent id {a.id!r}")
        if a.role not in roles:
            err(f"network.agents ({a.id}): unknown role {a.role!r}")
        ids[a.id] = a.role
        if a.params:
            check_neuron({**base, **a.params}, f"network.agents ({a.id})")

    lo, hi = cfg.network.weight_bounds
    if not 0 <= lo < hi:
        err(f"network.weight_bounds: need 0 <= low < high, got {[lo, hi]}")
    signs = {s.value for s in Sign}
    seen = set()
    if cfg.network.links != AUTO:
        for link in cfg.network.links:
            name = f"network.links ({link.pre}->{link.post})"
            for end in (link.pre, link.post):
                if end not in ids:
                    err(f"{name}: unknown agent id {end!r}")
            if link.pre == link.post:
                err(f"{name}: self-links are not allowed")
            if ids.get(link.post) == Role.AFFERENT.value:
                err(f"{name}: afferents cannot receive synapses")
            if (link.pre, link.post) in seen:
                err(f"{name}: duplicate link")
            seen.add((link.pre, link.post))
            if link.sign not in signs:
                err(f"{name}: sign must be excitatory or inhibitory, got {link.sign!r}")
            if link.weight != AUTO and (not _is_number(link.weight) or not lo <= link.weight <= hi):
                err(f"{name}: weight {link.weight!r} outside weight_bounds [{lo}, {hi}]")
            if link.delay != AUTO and (not _is_number(link.delay) or not link.delay > 0):
                err(f"{name}: delay must be > 0 or 'auto', got {link.delay!r}")

    for m in cfg.network.muscles:
        if m.id in ids:
            err(f"network.muscles ({m.id}): id clashes with a neuron")
        if not m.innervating:
            err(f"network.muscles ({m.id}): needs at least one innervating motoneuron")
        for mn in m.innervating:
            if ids.get(mn) != Role.MOTONEURON.value:
                err(f"network.muscles ({m.id}): innervating agent {mn!r} is not a motoneuron")

    s = cfg.stimulus
    if not s.targets:
        err("stimulus.targets: at least one afferent is required")
    for t in s.targets:
        if ids.get(t) != Role.AFFERENT.value:
            err(f"stimulus.targets: {t!r} is not an afferent")
    if not _is_number(s.onset_ms) or s.onset_ms < 0:
        err(f"stimulus.onset_ms: must be >= 0, got {s.onset_ms!r}")
    if not _is_number(s.interval_ms) or not s.interval_ms > 0:
        err(f"stimulus.interval_ms: must be > 0, got {s.interval_ms!r}")
    if not _is_int(s.count) or s.count <= 0:
        err(f"stimulus.count: must be a positive integer, got {s.count!r}")
    if not _is_int(s.train_count) or s.train_count <= 0:
        err(f"stimulus.train_count: must be a positive integer, got {s.train_count!r}")
    if not _is_number(s.train_interval_ms) or not s.train_interval_ms > 0:
        err(f"stimulus.train_interval_ms: must be > 0, got {s.train_interval_ms!r}")
    elif _is_int(s.train_count) and _is_number(s.interval_ms) and (s.train_count - 1) * s.train_interval_ms >= s.interval_ms:
        err("stimulus: pulse train must end before the next trial starts")

    v = cfg.viewer
    motoneurons = [i for i, r in ids.items() if r == Role.MOTONEURON.value]
    if v.observe is None and not motoneurons:
        err("viewer.observe: network has no motoneuron to observe")
    if v.observe is not None and ids.get(v.observe) != Role.MOTONEURON.value:
        err(f"viewer.observe: {v.observe!r} is not a motoneuron")
    if v.window_ms is not None and _is_number(s.interval_ms):
        if not _is_number(v.window_ms) or not 0 < v.window_ms <= s.interval_ms:
            err(f"viewer.window_ms: must lie in (0, stimulus.interval_ms], got {v.window_ms!r}")
    if not _is_number(v.epsilon) or not 0 < v.epsilon < 1:
        err(f"viewer.epsilon: must lie in (0, 1), got {v.epsilon!r}")
    if not _is_number(v.psth_bin_ms) or not v.psth_bin_ms > 0:
        err(f"viewer.psth_bin_ms: must be > 0, got {v.psth_bin_ms!r}")
    if v.psth_window_ms is not None and not v.psth_window_ms[0] < v.psth_window_ms[1]:
        err(f"viewer.psth_window_ms: need low < high, got {list(v.psth_window_ms)}")

    o = cfg.organization
    for name in ("k_tune", "k_reorg", "n_max"):
        if not _is_int(getattr(o, name)) or getattr(o, name) < 1:
            err(f"organization.{name}: must be an integer >= 1, got {getattr(o, name)!r}")
    if not _is_int(o.max_hops) or o.max_hops < 0:
        err(f"organization.max_hops: must be an integer >= 0, got {o.max_hops!r}")
    if not _is_number(o.w_init) or not lo <= o.w_init <= hi:
        err(f"organization.w_init: {o.w_init!r} outside weight_bounds [{lo}, {hi}]")
    if _is_int(o.n_max) and o.n_max < len(ids) + len(cfg.network.muscles):
        err(f"organization.n_max: {o.n_max} is below the initial agent count {len(ids) + len(cfg.network.muscles)}")
    if not _is_number(o.horizon) or not o.horizon > 0:
        err(f"organization.horizon: must be > 0, got {o.horizon!r}")
    if not _is_number(o.hop_decay) or not 0 < o.hop_decay < 1:
        err(f"organization.hop_decay: must lie in (0, 1), got {o.hop_decay!r}")

    for name in ("eager_propagation", "tune_thresholds"):
        if not isinstance(getattr(o, name), bool):
            err(f"organization.{name}: must be true or false, got {getattr(o, name)!r}")

    c = cfg.calibration
    if not _is_int(c.max_trials) or c.max_trials < 1:
        err(f"calibration.max_trials: must be an integer >= 1, got {c.max_trials!r}")
    if not _is_int(c.convergence_window) or c.convergence_window < 1:
        err(f"calibration.convergence_window: must be an integer >= 1, got {c.convergence_window!r}")
    return errors


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError([f"config file not found: {path}"])
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError([f"{path}: not valid YAML ({exc})"]) from exc
    return config_from_dict(data)


def config_to_dict(cfg: ScenarioConfig) -> dict[str, Any]:
    net = cfg.network
    return {
        "seed": cfg.seed,
        "duration_ms": cfg.duration_ms,
        "mode": cfg.mode,
        "neuron": dataclasses.asdict(cfg.neuron),
        "network": {
            "agents": [{"id": a.id, "role": a.role, **a.params} for a in net.agents],
            "links": AUTO if net.links == AUTO else [dataclasses.asdict(l) for l in net.links],
            "muscles": [{"id": m.id, "innervating": list(m.innervating)} for m in net.muscles],
            "weight_bounds": list(net.weight_bounds),
        },
        "stimulus": {**dataclasses.asdict(cfg.stimulus), "targets": list(cfg.stimulus.targets)},
        "viewer": {
            **dataclasses.asdict(cfg.viewer),
            "psth_window_ms": None if cfg.viewer.psth_window_ms is None else list(cfg.viewer.psth_window_ms),
        },
        "organization": dataclasses.asdict(cfg.organization),
        "calibration": dataclasses.asdict(cfg.calibration),
    }


def save_config(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(yaml.safe_dump(config_to_dict(cfg), sort_keys=False))


def delay_range() -> tuple[float, float]:
    return DELAY_RANGE
