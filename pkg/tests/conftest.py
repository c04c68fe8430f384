import numpy as np
import pytest

from helmfem.equilibration import equilibrate, project_data
from helmfem.mesh import build_cartesian_mesh
from helmfem.solver import (HelmholtzProblem, plane_wave_problem,
                            solve_helmholtz)


class PolynomialField:
    """u = x^2 y with consistent Helmholtz data for wavenumber k."""

    def __init__(self, k):
        self.k = k

    def value(self, pts):
        return (pts[:, 0] ** 2 * pts[:, 1]).astype(complex)

    def gradient(self, pts):
        return np.stack([2 * pts[:, 0] * pts[:, 1], pts[:, 0] ** 2],
                        axis=-1).astype(complex)

    def source(self, pts):
        return (-self.k ** 2 * pts[:, 0] ** 2 * pts[:, 1]
                - 2 * pts[:, 1]).astype(complex)

    def impedance(self, pts, normal):
        return (self.gradient(pts) @ normal.astype(complex)
                - 1j * self.k * self.value(pts))


@pytest.fixture(scope="session")
def manufactured():
    k = 2.0
    exact = PolynomialField(k)
    mesh = build_cartesian_mesh(4)
    problem = HelmholtzProblem(mesh=mesh, k=k, degree=3,
                               f=exact.source, g=exact.impedance)
    u_h = solve_helmholtz(problem, check_galerkin=True)
    return problem, exact, u_h


@pytest.fixture(scope="session")
def plane_wave_run():
    """Galerkin solve, projection, and flux of the k=pi, p=1, n=8 case."""
    k = np.pi
    mesh = build_cartesian_mesh(8)
    problem, wave = plane_wave_problem(mesh, k, np.pi / 3, degree=1)
    u_h = solve_helmholtz(problem)
    proj = project_data(problem)
    flux = equilibrate(u_h, proj, k)
    return problem, wave, u_h, proj, flux
