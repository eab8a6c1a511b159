"""Passivity-certified grid-forming inverter control and microgrid simulation."""

from .certify import (CertificationReport, FrequencyGrid, PassivityCertificate, TuningSpec,
                      certify_bus, max_osp_index)
from .config import ScenarioBundle, parse_scenario, preset_path
from .dqframe import DQPair, SyncFrame, instantaneous_power, inverse_park, park_transform
from .inverter import (ControllerGains, InverterParams, VirtualImpedance, assemble_plant, augment,
                       close_loop, reference_gains)
from .network import Line, LineSection, build_network, assemble_line_statespace
from .sim import Scenario, run_scenario
from .synthesize import SynthesisConfig, synthesize_controller

__version__ = "0.1.0"

__all__ = [
    "CertificationReport",
    "ControllerGains",
    "DQPair",
    "FrequencyGrid",
    "InverterParams",
    "Line",
    "LineSection",
    "PassivityCertificate",
    "Scenario",
    "ScenarioBundle",
    "SyncFrame",
    "SynthesisConfig",
    "TuningSpec",
    "VirtualImpedance",
    "assemble_line_statespace",
    "assemble_plant",
    "augment",
    "build_network",
    "certify_bus",
    "close_loop",
    "instantaneous_power",
    "inverse_park",
    "max_osp_index",
    "reference_gains",
    "park_transform",
    "parse_scenario",
    "preset_path",
    "run_scenario",
    "synthesize_controller",
]
