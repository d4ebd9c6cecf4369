"""Material descriptors and the small library of stackup materials."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .constants import EPS0, OMEGA_DESIGN

DIELECTRIC = "dielectric"
PEC = "PEC"
AIR = "air"
_KINDS = (DIELECTRIC, PEC, AIR)


@dataclass(frozen=True)
class Material:
    """Isotropic, non-dispersive material.

    ``sigma`` is the bulk conductivity in S/m.  Dielectric loss given as a
    loss tangent is folded into an effective conductivity at the design
    frequency by :meth:`effective_sigma`.
    """

    name: str
    eps_r: float = 1.0
    tan_delta: float = 0.0
    sigma: float = 0.0
    kind: str = DIELECTRIC

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"material {self.name!r}: kind must be one of {_KINDS}")
        if self.kind != PEC and self.eps_r < 1.0:
            raise ValueError(f"material {self.name!r}: eps_r must be >= 1")
        if self.tan_delta < 0 or self.sigma < 0:
            raise ValueError(f"material {self.name!r}: tan_delta and sigma must be >= 0")

    @property
    def is_pec(self) -> bool:
        return self.kind == PEC

    def effective_sigma(self, omega: float = OMEGA_DESIGN) -> float:
        if self.is_pec:
            return 0.0
        return self.sigma + omega * EPS0 * self.eps_r * self.tan_delta

    def lossless(self) -> "Material":
        if self.is_pec:
            return self
        return replace(self, tan_delta=0.0, sigma=0.0)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "eps_r": self.eps_r,
            "tan_delta": self.tan_delta,
            "sigma": self.sigma,
            "kind": self.kind,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Material":
        return cls(**d)


VACUUM = Material("air", 1.0, 0.0, 0.0, AIR)
METAL = Material("pec", 1.0, 0.0, 0.0, PEC)
# tan_delta values are vendor datasheet numbers (10 GHz), not given with the design
ROGERS_4003 = Material("rogers4003", 3.55, 0.0027, 0.0, DIELECTRIC)
DUROID_5880 = Material("duroid5880", 2.2, 0.0009, 0.0, DIELECTRIC)
