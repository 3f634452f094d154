"""
Configuration for the Hardy-Bellman Laboratory
Process settings come from the environment (.env supported); per-run settings come from
a JSON file mirroring the CLI flag names, with explicit flags taking precedence.
"""

import json
import logging
from pathlib import Path
from typing import Annotated, Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, StrictInt
from pydantic_settings import BaseSettings, SettingsConfigDict

from .models import DomainError

logger = logging.getLogger(__name__)


class LabSettings(BaseSettings):
    """Environment-level settings, prefix HBL_."""

    # Output directory; overrides --out when set
    OUT: Optional[str] = None

    # Thread-pool size for sweeps and seed fan-out
    WORKERS: int = Field(default=4, ge=1)

    LOG_LEVEL: str = "INFO"

    model_config = SettingsConfigDict(
        env_prefix="HBL_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )


class Tolerances(BaseModel):
    """Every numeric tolerance the acceptance suite checks against."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    inverse_residual: PositiveFloat = 1e-12       # |H_p(omega_p(x)) - x|
    omega_limit: PositiveFloat = 1e-4             # omega_p(1e-10) vs p/(p-1)
    bellman_closed_form: PositiveFloat = 1e-12
    attainment: PositiveFloat = 1e-3              # relative Phi_p vs B_p for discretized g0
    defect: PositiveFloat = 1e-4                  # absolute, integer p
    defect_relative: PositiveFloat = 1e-4         # relative to B_p, fractional p
    eigen_identity: PositiveFloat = 1e-12
    defect_decay: PositiveFloat = 1e-2            # defect(2^14) / defect(2^4)
    lp_convergence: PositiveFloat = 1e-3
    optimizer_attainment: PositiveFloat = 0.99
    optimizer_lp: PositiveFloat = 0.05
    bellman_ceiling: PositiveFloat = 1e-8
    symmetrization: PositiveFloat = 1e-9
    average_identity: PositiveFloat = 1e-10
    sandwich_gap: PositiveFloat = 0.05
    sandwich_order: PositiveFloat = 1e-10
    scaling: PositiveFloat = 1e-10
    finite_difference: PositiveFloat = 1e-5
    moment_exactness: PositiveFloat = 1e-12


DEFAULT_A_SCHEDULE = [0.5, 0.2, 0.1, 0.05, 0.02]


class ExperimentConfig(BaseModel):
    """Per-run configuration. Keys mirror the CLI flags; unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid")

    p: float = 2.0
    f: float = 1.0
    F: float = 2.0

    # Grid resolution; each command supplies its own default when unset
    cells: Optional[StrictInt] = Field(default=None, ge=2)

    # Alpha-tree parameter; a single value replaces the sweep schedule
    a: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    a_schedule: List[Annotated[float, Field(gt=0.0, lt=1.0)]] = Field(
        default_factory=lambda: list(DEFAULT_A_SCHEDULE), min_length=1)

    # Dyadic depth for the symmetrization sweep, or alpha-tree depth in branching mode
    depth: Optional[StrictInt] = Field(default=None, ge=1, le=20)
    branching: StrictInt = Field(default=1, ge=1)
    gamma: float = Field(default=1.0, gt=0.0, le=1.0)
    samples: StrictInt = Field(default=200, ge=1)

    seed: StrictInt = Field(default=0, ge=0)
    runs: StrictInt = Field(default=5, ge=1)
    max_iters: StrictInt = Field(default=2000, ge=1)
    step_size: PositiveFloat = 1e-2
    tol_obj: PositiveFloat = 1e-12

    cutoff: str = Field(default="mass", pattern="^(mass|time)$")
    method: str = Field(default="auto", pattern="^(auto|exact|quad)$")

    only: Optional[List[str]] = None
    out: Optional[str] = None

    tolerances: Tolerances = Field(default_factory=Tolerances)

    def schedule(self) -> List[float]:
        """The a values to sweep."""
        return [self.a] if self.a is not None else list(self.a_schedule)

    def echo(self) -> Dict[str, Any]:
        """Input echo for reports (tolerances are reported separately)."""
        return self.model_dump(exclude={"tolerances", "out", "only"})


def load_experiment_config(path: Optional[str] = None,
                           overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """
    Build an ExperimentConfig from an optional JSON file and flag overrides.

    Args:
        path: JSON file whose keys mirror the flag names
        overrides: Explicit flag values; None entries are ignored

    Returns:
        Validated ExperimentConfig (raises pydantic ValidationError on bad input)
    """
    data: Dict[str, Any] = {}
    if path:
        config_path = Path(path)
        if not config_path.exists():
            raise DomainError(f"config file not found: {path}")
        with open(config_path, "r", encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DomainError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise DomainError("config file must hold a JSON object")
        logger.info(f"Loaded config file {path} ({len(data)} keys)")

    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value

    return ExperimentConfig.model_validate(data)
