"""Self-organizing agent-based model of motor-unit reflex pathways."""

from .config import ConfigError, ScenarioConfig, load_config, save_config
from .engine import Engine
from .estimators import InstantaneousFrequencyTransformer, PSTHTransformer, ReflexCalibrator
from .neural import Network, Role, Sign, StimulusProtocol, SynapseLink
from .organization import OrganizationLog, OrgConstants
from .runner import RunReport, run_calibrate, run_gen_reference, run_simulate
from .simulation import Simulation
from .tracker import Direction, apply_feedback, make_tracker
from .viewer import ReferenceTrace, compare, instantaneous_frequency, psth

__all__ = [
    "ConfigError",
    "Direction",
    "Engine",
    "InstantaneousFrequencyTransformer",
    "Network",
    "OrgConstants",
    "OrganizationLog",
    "PSTHTransformer",
    "ReferenceTrace",
    "ReflexCalibrator",
    "Role",
    "RunReport",
    "ScenarioConfig",
    "Sign",
    "Simulation",
    "StimulusProtocol",
    "SynapseLink",
    "apply_feedback",
    "compare",
    "instantaneous_frequency",
    "load_config",
    "make_tracker",
    "psth",
    "run_calibrate",
    "run_gen_reference",
    "run_simulate",
    "save_config",
]
