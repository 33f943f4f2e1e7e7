"""Linear plane elasticity: strain, stress and strain-energy density.

Units are mm and MPa, so energy density is in MPa (mJ/mm^3) and integrated
energies come out in mJ per mm of thickness.  All functions use plain
arithmetic, so they accept floats, numpy arrays and tape Vars alike.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import SingularMaterialError


class Formulation(str, Enum):
    AS_PAPER = "as_paper"
    PLANE_STRAIN = "plane_strain"
    PLANE_STRESS = "plane_stress"


@dataclass(frozen=True)
class MaterialModel:
    E: float = 11.4
    mu: float = 0.45
    formulation: Formulation = Formulation.AS_PAPER

    def __post_init__(self):
        object.__setattr__(self, "formulation", Formulation(self.formulation))
        if not self.E > 0:
            raise ValueError(f"Young's modulus must be positive, got {self.E}")
        if not 0 <= self.mu < 0.5:
            raise ValueError(f"Poisson's ratio must lie in [0, 0.5), got {self.mu}")

    def coefficients(self) -> tuple[float, float]:
        """(lam, two_g): sigma = lam * tr(eps) * I + two_g * eps.

        ``as_paper`` uses the (1 - mu) denominator, which is algebraically the
        plane-stress law; ``plane_strain`` uses (1 - 2 mu).
        """
        E, mu = self.E, self.mu
        two_g = E / (1.0 + mu)
        if self.formulation is Formulation.PLANE_STRAIN:
            denom = (1.0 + mu) * (1.0 - 2.0 * mu)
            if abs(1.0 - 2.0 * mu) < 1e-12:
                raise SingularMaterialError("plane strain is singular as mu -> 0.5")
        else:
            denom = (1.0 + mu) * (1.0 - mu)
        return E * mu / denom, two_g

    def constitutive_matrix(self) -> np.ndarray:
        """3x3 D with [sxx, syy, sxy] = D @ [exx, eyy, exy] (tensor shear)."""
        lam, two_g = self.coefficients()
        return np.array([
            [lam + two_g, lam, 0.0],
            [lam, lam + two_g, 0.0],
            [0.0, 0.0, two_g],
        ])


@dataclass
class Strain2:
    xx: object
    yy: object
    xy: object


@dataclass
class Stress2:
    xx: object
    yy: object
    xy: object


def strain_from_jacobian(du_dx, du_dy, dv_dx, dv_dy) -> Strain2:
    return Strain2(du_dx, dv_dy, 0.5 * (du_dy + dv_dx))


def stress_from_strain(eps: Strain2, mat: MaterialModel) -> Stress2:
    lam, two_g = mat.coefficients()
    vol = lam * (eps.xx + eps.yy)
    return Stress2(vol + two_g * eps.xx, vol + two_g * eps.yy, two_g * eps.xy)


def energy_density(sigma: Stress2, eps: Strain2):
    """1/2 sigma_ij eps_ij; the shear pair (xy, yx) contributes twice."""
    return 0.5 * (sigma.xx * eps.xx + sigma.yy * eps.yy + 2.0 * sigma.xy * eps.xy)
