import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pinnray.elasticity import (
    Formulation,
    MaterialModel,
    Strain2,
    energy_density,
    strain_from_jacobian,
    stress_from_strain,
)
from pinnray.errors import SingularMaterialError

E, MU = 11.4, 0.45
MAT = MaterialModel(E, MU)


def hand_sigma_xx():
    return (E * MU / ((1 + MU) * (1 - MU)) + E / (1 + MU)) * 0.01


def test_strain_examples():
    z = strain_from_jacobian(0.0, 0.0, 0.0, 0.0)
    assert (z.xx, z.yy, z.xy) == (0.0, 0.0, 0.0)
    e = strain_from_jacobian(0.01, 0.0, 0.0, -0.0045)
    assert (e.xx, e.yy, e.xy) == (0.01, -0.0045, 0.0)
    s = strain_from_jacobian(0.0, 0.02, 0.02, 0.0)
    assert (s.xx, s.yy, s.xy) == (0.0, 0.0, 0.02)
    r = strain_from_jacobian(0.0, 0.02, -0.02, 0.0)
    assert (r.xx, r.yy, r.xy) == (0.0, 0.0, 0.0)


def test_uniaxial_stress_values():
    s = stress_from_strain(Strain2(0.01, 0.0, 0.0), MAT)
    assert s.xx == pytest.approx(hand_sigma_xx(), rel=1e-12)
    assert s.yy == pytest.approx(E * MU / ((1 + MU) * (1 - MU)) * 0.01, rel=1e-12)
    assert s.xy == 0.0
    assert round(s.xx, 4) == 0.1429
    assert round(s.yy, 4) == 0.0643


def test_shear_stress_value():
    s = stress_from_strain(Strain2(0.0, 0.0, 0.01), MAT)
    assert s.xy == pytest.approx(E / (1 + MU) * 0.01, rel=1e-12)
    assert round(s.xy, 4) == 0.0786
    assert s.xx == 0.0 and s.yy == 0.0


def test_energy_density_uniaxial():
    eps = Strain2(0.01, 0.0, 0.0)
    w = energy_density(stress_from_strain(eps, MAT), eps)
    assert w == pytest.approx(0.5 * hand_sigma_xx() * 0.01, rel=1e-12)
    # 7.146e-4 is the same product formed with sigma_xx rounded to 0.1429
    assert w == pytest.approx(7.146e-4, rel=5e-4)


def test_zero_strain_zero_stress():
    s = stress_from_strain(Strain2(0.0, 0.0, 0.0), MAT)
    assert (s.xx, s.yy, s.xy) == (0.0, 0.0, 0.0)


def test_as_paper_equals_plane_stress():
    a = MaterialModel(E, MU, Formulation.AS_PAPER).constitutive_matrix()
    b = MaterialModel(E, MU, Formulation.PLANE_STRESS).constitutive_matrix()
    np.testing.assert_allclose(a, b, rtol=1e-14)
    # textbook plane stress on tensor shear
    c = E / (1 - MU ** 2)
    ref = np.array([[c, c * MU, 0], [c * MU, c, 0], [0, 0, E / (1 + MU)]])
    np.testing.assert_allclose(a, ref, rtol=1e-14)


def test_plane_strain_uses_one_minus_two_mu():
    lam, two_g = MaterialModel(E, MU, Formulation.PLANE_STRAIN).coefficients()
    assert lam == pytest.approx(E * MU / ((1 + MU) * (1 - 2 * MU)), rel=1e-14)
    assert two_g == pytest.approx(E / (1 + MU), rel=1e-14)


def test_formulations_coincide_at_zero_poisson():
    a = MaterialModel(3.0, 0.0, Formulation.AS_PAPER).constitutive_matrix()
    b = MaterialModel(3.0, 0.0, Formulation.PLANE_STRAIN).constitutive_matrix()
    np.testing.assert_array_equal(a, b)


def test_plane_strain_near_incompressible_is_singular():
    with pytest.raises(SingularMaterialError):
        MaterialModel(E, 0.5 - 1e-15, Formulation.PLANE_STRAIN).coefficients()


@pytest.mark.parametrize("kw", [{"E": 0.0}, {"E": -1.0}, {"mu": 0.5}, {"mu": -0.1}])
def test_invalid_material(kw):
    with pytest.raises(ValueError):
        MaterialModel(**kw)


@pytest.mark.parametrize("formulation", list(Formulation))
@pytest.mark.parametrize("mu", [0.0, 0.1, 0.3, 0.45])
def test_constitutive_matrix_positive_definite(formulation, mu):
    d = MaterialModel(E, mu, formulation).constitutive_matrix()
    np.testing.assert_allclose(d, d.T)
    # energy is 1/2 eps^T M D eps with M = diag(1, 1, 2) on tensor shear
    assert np.linalg.eigvalsh(np.diag([1.0, 1.0, 2.0]) @ d + (np.diag([1.0, 1.0, 2.0]) @ d).T).min() > 0


# magnitudes below 1e-6 would let the quadratic energy underflow
component = st.one_of(st.just(0.0), st.floats(1e-6, 1.0), st.floats(-1.0, -1e-6))
strains = st.tuples(component, component, component)


@given(strains, strains, st.floats(-3, 3), st.floats(-3, 3), st.sampled_from(list(Formulation)))
@settings(max_examples=100, deadline=None)
def test_stress_is_linear(e1, e2, a, b, formulation):
    mat = MaterialModel(E, 0.3, formulation)
    combo = Strain2(*(a * x + b * y for x, y in zip(e1, e2)))
    s = stress_from_strain(combo, mat)
    s1, s2 = stress_from_strain(Strain2(*e1), mat), stress_from_strain(Strain2(*e2), mat)
    scale = 20 * (abs(a) + abs(b) + 1)
    for k in ("xx", "yy", "xy"):
        assert getattr(s, k) == pytest.approx(a * getattr(s1, k) + b * getattr(s2, k), abs=1e-13 * scale)


@given(strains, st.sampled_from([0.0, 0.3, 0.45]), st.sampled_from(list(Formulation)))
@settings(max_examples=100, deadline=None)
def test_energy_positive_for_nonzero_strain(e, mu, formulation):
    eps = Strain2(*e)
    w = energy_density(stress_from_strain(eps, MaterialModel(E, mu, formulation)), eps)
    if any(e):
        assert w > 0
    else:
        assert w == 0


def test_rigid_motion_has_no_energy():
    # infinitesimal rotation: du/dy = -theta, dv/dx = theta
    eps = strain_from_jacobian(0.0, -0.003, 0.003, 0.0)
    sig = stress_from_strain(eps, MAT)
    assert energy_density(sig, eps) == 0.0


def test_vectorized_energy():
    rng = np.random.default_rng(0)
    e = Strain2(*rng.normal(size=(3, 1000)))
    w = energy_density(stress_from_strain(e, MAT), e)
    assert w.shape == (1000,) and (w > 0).all()
