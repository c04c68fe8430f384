import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helmfem.assets import scattering_mesh
from helmfem.bounds import (AdmissibilityError, BoundContext, Case,
                            approximation_factor_bound, plane_wave_constants,
                            rectangle_eigenvalues, reliability_prefactor,
                            scattering_constants, square_stability_constant,
                            stability_constant, theta_1, theta_2,
                            theta_tilde_1, theta_tilde_2)
from helmfem.mesh import Mesh, build_cartesian_mesh


def test_square_stability_closed_form():
    mesh = build_cartesian_mesh(4)
    val = stability_constant(mesh, np.zeros(2))
    expected = (3 + np.sqrt(2)) / (2 * np.sqrt(2))
    assert abs(val - expected) < 1e-13
    assert abs(square_stability_constant() - expected) < 1e-15
    assert abs(expected - 1.56066) < 5e-6


def test_disk_stability_cross_check():
    # polygonal approximation of the unit circle centered at the origin
    n = 512
    ang = 2 * np.pi * np.arange(n) / n
    verts = np.column_stack([np.cos(ang), np.sin(ang)])
    verts = np.vstack([[0.0, 0.0], verts])
    tris = np.array([[0, 1 + i, 1 + (i + 1) % n] for i in range(n)])
    bed = np.array([[1 + i, 1 + (i + 1) % n] for i in range(n)])
    mesh = Mesh(verts, tris, bed, np.array(["A"] * n))
    val = stability_constant(mesh, np.zeros(2))
    assert abs(val - 1.5) < 1e-3


def test_inadmissible_star_point():
    mesh = build_cartesian_mesh(2)
    with pytest.raises(AdmissibilityError):
        stability_constant(mesh, np.array([1.5, 0.0]))  # outside the square


def test_scattering_admissibility():
    mesh = scattering_mesh()
    val = stability_constant(mesh, np.zeros(2))
    assert abs(val - square_stability_constant()) < 1e-12
    with pytest.raises(AdmissibilityError):
        stability_constant(mesh, np.array([0.0, -0.9]))


def test_case_1a_values():
    c_stab = square_stability_constant()
    ctx = BoundContext(case=Case.SCATTERING, k=2 * np.pi,
                       h_domain=2 * np.sqrt(2), c_stab=c_stab)
    A = 1 + c_stab * 2 * np.pi * 2 * np.sqrt(2)
    assert abs(A - 28.737) < 2e-3
    bound = approximation_factor_bound(ctx)
    assert abs(bound - 29.24) < 0.01
    assert abs(bound - np.sqrt(A + A ** 2)) < 1e-12


def test_case_1b_chain():
    c_ba, c_up = plane_wave_constants(np.pi, 2 * np.sqrt(2) / 8)
    assert abs(c_ba - 6.14) < 0.01


def test_case_2a_square():
    lam = rectangle_eigenvalues(2.0, 2.0, 200)
    ctx = BoundContext(case=Case.INTERIOR, k=1.0, h_domain=2 * np.sqrt(2),
                       eigenvalues=lam)
    bound = approximation_factor_bound(ctx)
    lam1 = np.pi ** 2 / 2
    assert abs(bound - np.sqrt(lam1) / (lam1 - 1.0)) < 1e-12
    assert abs(bound - 0.5646) < 1e-4


def test_case_2_resonance_errors():
    lam = rectangle_eigenvalues(2.0, 2.0, 50)
    ctx = BoundContext(case=Case.INTERIOR, k=float(np.sqrt(lam[0])),
                       h_domain=2 * np.sqrt(2), eigenvalues=lam)
    with pytest.raises(ValueError, match="eigenvalue"):
        approximation_factor_bound(ctx)
    ctx2 = BoundContext(case=Case.INTERIOR_CONVEX, k=float(np.sqrt(lam[0])),
                        h_domain=2 * np.sqrt(2), h=0.1, eigenvalues=lam)
    with pytest.raises(ValueError, match="eigenvalue"):
        approximation_factor_bound(ctx2)


def test_eigenvalue_basics():
    lam = rectangle_eigenvalues(2.0, 2.0, 6)
    assert abs(lam[0] - np.pi ** 2 / 2) < 1e-12
    # lambda_12 = lambda_21 appears twice
    assert abs(lam[1] - 5 * np.pi ** 2 / 4) < 1e-12
    assert abs(lam[2] - 5 * np.pi ** 2 / 4) < 1e-12
    lam_pi = rectangle_eigenvalues(np.pi, np.pi, 1)
    assert abs(lam_pi[0] - 2.0) < 1e-12


def test_theta_values():
    assert theta_tilde_1(0.0) == pytest.approx(0.0, abs=1e-15)
    assert reliability_prefactor(0.0) == pytest.approx(np.sqrt(2))
    # agreement to one unit in the second decimal; the exact k = 10 pi
    # value is 198.9468
    _, c_up = scattering_constants(2 * np.pi)
    assert abs(c_up - 42.05) <= 0.01
    _, c_up10 = scattering_constants(10 * np.pi)
    assert abs(c_up10 - 198.94) <= 0.01


def test_theta_negative_inputs():
    with pytest.raises(ValueError):
        theta_tilde_1(-1.0)
    with pytest.raises(ValueError):
        theta_tilde_2(1.0, -0.5)


@given(st.floats(0, 1e3), st.floats(0, 1e3))
@settings(max_examples=200, deadline=None)
def test_theta_envelopes(t, tt):
    assert 0 <= theta_tilde_1(t) <= theta_1(t) + 1e-12
    assert 0 <= theta_tilde_2(t, tt) <= theta_2(t, tt) + 1e-12


@given(st.floats(0, 500), st.floats(0, 500))
@settings(max_examples=100, deadline=None)
def test_theta_monotone(a, b):
    lo, hi = sorted((a, b))
    assert theta_tilde_1(lo) <= theta_tilde_1(hi) + 1e-12
    assert reliability_prefactor(lo) <= reliability_prefactor(hi) + 1e-12
