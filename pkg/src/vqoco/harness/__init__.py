"""Config parsing, run execution, verification and reporting."""

from .config import RunConfig, load_config, parse_config
from .experiments import monte_carlo, run, sweep, sweep_table, trial_seed
from .trace import RunTrace
from .verify import CheckResult, VerificationReport, verify

__all__ = [
    "CheckResult",
    "RunConfig",
    "RunTrace",
    "VerificationReport",
    "load_config",
    "monte_carlo",
    "parse_config",
    "run",
    "sweep",
    "sweep_table",
    "trial_seed",
    "verify",
]
