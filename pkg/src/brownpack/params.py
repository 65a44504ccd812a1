"""Hyperparameter block shared by the packing and dispersion integrators."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

from .errors import ConfigError


@dataclass
class HyperParams:
    """All tunable constants of the dynamics.

    Defaults are the baseline values used throughout; `mu` is the bulk
    viscosity and is fixed at 1.0, the remaining constants are expressed
    relative to it.
    """

    mu: float = 1.0
    # inter-class packing
    k_e: float = 1.0          # embedding contact force coefficient
    d0_e: float = 1.4         # embedding contact distance (radians)
    k_w: float = 0.1          # latent pull-back coefficient
    eta0: float = 0.01        # random force magnitude
    tau: float = 0.3          # adaptive time-step fraction
    n_iter: int = 100
    # intra-class dispersion
    k_w_disp: float = 1.0     # latent contact force coefficient
    d0_w: float = 12.0        # latent contact distance
    k_e_disp: float = 1.0     # embedding tether coefficient
    k_w_tilde: float = 1.0    # dispersion latent pull-back coefficient
    eta0_tilde: float = 0.01  # dispersion random force magnitude
    dt_tilde: float = 0.05    # dispersion fixed time-step
    n_iter_disp: int = 20
    xi0: float = 0.2          # init symmetry-breaking noise scale
    lambda0: float = 1.0      # covariate mixing scale
    # training-set repulsion (off by default: d_tr = 0 admits no contacts)
    k_tr: float = 1.0
    d_tr: float = 0.0
    # time-step guard
    dt_cap: float = 1.0

    def validate(self) -> None:
        if self.mu != 1.0:
            raise ConfigError(f"mu is fixed at 1.0, got {self.mu}")
        nonneg = (
            "k_e", "k_w", "eta0", "k_w_disp", "d0_w", "k_e_disp", "k_w_tilde",
            "eta0_tilde", "xi0", "lambda0", "k_tr", "d_tr",
        )
        for name in nonneg:
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v >= 0):
                raise ConfigError(f"{name} must be a finite number >= 0, got {v!r}")
        if not 0.0 < self.d0_e <= math.pi:
            raise ConfigError(f"d0_e must lie in (0, pi], got {self.d0_e}")
        if not 0.0 < self.tau <= 1.0:
            raise ConfigError(f"tau must lie in (0, 1], got {self.tau}")
        if self.n_iter < 0 or self.n_iter_disp < 0:
            raise ConfigError("iteration counts must be >= 0")
        if self.dt_tilde <= 0:
            raise ConfigError(f"dt_tilde must be > 0, got {self.dt_tilde}")
        if self.dt_cap <= 0:
            raise ConfigError(f"dt_cap must be > 0, got {self.dt_cap}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "HyperParams":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown hyperparameter keys: {sorted(unknown)}")
        p = cls(**data)
        p.validate()
        return p
