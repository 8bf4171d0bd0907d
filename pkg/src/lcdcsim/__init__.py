"""Discrete-event simulator for stage-gated optical links in Clos data-center networks."""

from .config import ScenarioConfig, load_config
from .engine import Simulator
from .network import Network, run_scenario, run_simulation
from .topology import SiteConfig, build_site, desk_site

__all__ = [
    "Network",
    "ScenarioConfig",
    "SiteConfig",
    "Simulator",
    "build_site",
    "desk_site",
    "load_config",
    "run_scenario",
    "run_simulation",
]
__version__ = "0.1.0"
