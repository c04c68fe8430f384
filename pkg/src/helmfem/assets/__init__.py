"""Bundled mesh assets."""

from importlib import resources

from ..mesh import load_mesh


def asset_path(name):
    return resources.files(__package__) / name


def scattering_mesh():
    """Coarse triangulation of the square (-1,1)^2 minus the arrowhead
    obstacle, Dirichlet tags on the obstacle and Absorbing outside."""
    with resources.as_file(asset_path("scattering_mesh.txt")) as p:
        return load_mesh(p)
