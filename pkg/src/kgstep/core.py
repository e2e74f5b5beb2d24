"""Units, physical parameters and light-cone kinematics.

Conventions: lengths in nm, times in fs, energies in eV.  The barrier
mass parameter ``mu0`` and the incident wavenumber ``energy_k`` are both
inverse lengths (nm^-1), so the field only ever sees the combinations
``mu0 * x`` and ``energy_k * c * t``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

C_NM_PER_FS = 299.792458
HBAR_C_EV_NM = 197.3269804

# Worked example of the step barrier used throughout the figures.
PRESET_MU0 = 1.542
PRESET_ENERGY_EV = 10.0
PRESET_ENERGY_K = 5.064e-2
PUBLISHED_TWO_XP = 1.317


class KGStepError(Exception):
    """Base class for errors raised by this package."""


class ParameterError(KGStepError, ValueError):
    pass


class PropagatingRegimeError(ParameterError):
    pass


@dataclass(frozen=True)
class StepParams:
    """Physical configuration of the step barrier.

    ``allow_propagating`` is an explicit opt-in for ``energy_k >= mu0``;
    the closed-form series is then evaluated by analytic continuation
    (q -> i*sqrt(E^2 - mu0^2)).  It exists for the free-propagation limit
    check and is off by default.
    """

    mu0: float
    energy_k: float
    allow_propagating: bool = False

    def __post_init__(self):
        for name in ("mu0", "energy_k"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ParameterError(f"{name} must be a positive finite number, got {v!r}")

    @classmethod
    def from_energy_ev(cls, mu0: float, energy_ev: float, **kw) -> StepParams:
        return cls(mu0, energy_to_wavenumber(energy_ev), **kw)


def preset_params() -> StepParams:
    """mu0 = 1.542 nm^-1 with the literal E = 5.064e-2 nm^-1 (E_r = 10 eV)."""
    return StepParams(PRESET_MU0, PRESET_ENERGY_K)


@dataclass(frozen=True)
class DerivedParams:
    mu0: float
    energy_k: float
    q: complex | float
    x_p: float
    k_plus: complex
    k_minus: complex
    z_plus: complex
    z_minus: complex

    @property
    def evanescent(self) -> bool:
        return isinstance(self.q, float)


@lru_cache(maxsize=512)
def derive_params(p: StepParams) -> DerivedParams:
    """Spectral quantities q, x_p, k+-, z+- for the barrier.

    k+- = 2E/(E +- iq) are the pole residue weights and z+- = (E +- iq)/mu0
    the unit-modulus pole positions in the transformed plane.
    """
    mu0, e = float(p.mu0), float(p.energy_k)
    if e >= mu0 and not p.allow_propagating:
        raise PropagatingRegimeError(
            f"propagating regime unsupported: energy_k={e} >= mu0={mu0}"
        )
    if e < mu0:
        q: complex | float = math.sqrt((mu0 - e) * (mu0 + e))
        e_plus = complex(e, q)
        e_minus = complex(e, -q)
        x_p = 1.0 / q
    else:
        s = math.sqrt((e - mu0) * (e + mu0))
        q = complex(0.0, s)
        # (E + iq)(E - iq) = mu0^2; form the small root without cancellation
        e_minus = complex(e + s, 0.0)
        e_plus = complex(mu0 * mu0 / (e + s), 0.0)
        x_p = math.inf
    return DerivedParams(
        mu0=mu0,
        energy_k=e,
        q=q,
        x_p=x_p,
        k_plus=2.0 * e / e_plus,
        k_minus=2.0 * e / e_minus,
        z_plus=e_plus / mu0,
        z_minus=e_minus / mu0,
    )


def energy_to_wavenumber(energy_ev: float) -> float:
    """E_r [eV] -> E_r / (hbar c) [nm^-1]."""
    if not (math.isfinite(energy_ev) and energy_ev > 0):
        raise ParameterError(f"energy must be positive, got {energy_ev!r}")
    return energy_ev / HBAR_C_EV_NM


@dataclass(frozen=True)
class SpacetimePoint:
    x: float
    t: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.t)):
            raise ParameterError(f"non-finite spacetime point ({self.x}, {self.t})")
        if self.x < 0 or self.t < 0:
            raise ParameterError(f"expected x >= 0 and t >= 0, got ({self.x}, {self.t})")


class Region(enum.Enum):
    INTERIOR = "interior"
    ON_CONE = "on_cone"
    EXTERIOR = "exterior"


# relative width of the band around x = ct treated as the cone itself
CONE_BAND = 1e-12


@dataclass(frozen=True)
class LightConeCoords:
    """xi = sqrt((ct+x)/(ct-x)), eta = mu0 sqrt(c^2 t^2 - x^2).

    Only interior points carry xi; on the cone eta is 0 and xi is None,
    outside both are None.
    """

    region: Region
    xi: float | None
    eta: float | None
    ct: float


def classify(x: float, ct: float) -> Region:
    if abs(ct - x) <= CONE_BAND * max(ct, x, 1.0):
        return Region.ON_CONE
    return Region.INTERIOR if x < ct else Region.EXTERIOR


def light_cone(p: StepParams, pt: SpacetimePoint) -> LightConeCoords:
    ct = C_NM_PER_FS * pt.t
    region = classify(pt.x, ct)
    if region is Region.EXTERIOR:
        return LightConeCoords(region, None, None, ct)
    if region is Region.ON_CONE:
        return LightConeCoords(region, None, 0.0, ct)
    plus, minus = ct + pt.x, ct - pt.x
    return LightConeCoords(
        region, math.sqrt(plus / minus), p.mu0 * math.sqrt(plus * minus), ct
    )
