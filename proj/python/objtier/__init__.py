"""Object-level tiered memory simulator."""

import json

from ._objtier import (
    ConfigError,
    amat,
    bin_of,
    compute_cutoff,
    delinquent_sites,
    oracle,
    policies,
    run_scenario,
)


def run(config):
    """Run a scenario given as a dict or JSON string."""
    if not isinstance(config, str):
        config = json.dumps(config)
    return run_scenario(config)


__all__ = [
    "ConfigError",
    "amat",
    "bin_of",
    "compute_cutoff",
    "delinquent_sites",
    "oracle",
    "policies",
    "run",
    "run_scenario",
]
