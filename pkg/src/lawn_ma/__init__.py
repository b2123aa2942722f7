"""Joint trajectory, beamforming, power and movable-antenna placement for
aerial uplink data collection."""

from lawn_ma.scenario import Scenario, default_scenario, desk_scenario, validate
from lawn_ma.channel import ChannelModel
from lawn_ma.rate import Iterate, sum_rate
from lawn_ma.ao import ao_solve

__all__ = [
    "Scenario",
    "default_scenario",
    "desk_scenario",
    "validate",
    "ChannelModel",
    "Iterate",
    "sum_rate",
    "ao_solve",
]

__version__ = "0.1.0"
