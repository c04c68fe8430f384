"""Command-line drivers for the plane-wave study, the adaptive scattering
experiment, and the self-check suite."""

import argparse
import sys
from dataclasses import dataclass

import numpy as np

from .adaptivity import adapt_loop
from .assets import scattering_mesh
from .bounds import plane_wave_constants, scattering_constants
from .equilibration import equilibrate, eval_projected_g, project_data
from .estimator import energy_norm_discrete, eta_local, report
from .mesh import build_cartesian_mesh, load_mesh, save_mesh
from .solver import (HelmholtzProblem, best_approximation, plane_wave,
                     solve_helmholtz)


@dataclass
class RunConfig:
    command: str
    k: float = np.pi
    degree: int = 1
    n_values: tuple = (8,)
    mesh_path: str = None
    nu: float = np.pi / 3
    iterations: int = 15
    out: str = None
    snapshot_dir: str = None
    p_ref: int = None
    quad_degree: int = None

    def validate(self):
        if self.k <= 0:
            raise ValueError("k must be positive")
        if not 1 <= self.degree <= 6:
            raise ValueError("p must be in 1..6")
        if any(n < 1 for n in self.n_values):
            raise ValueError("n must be >= 1")
        if self.iterations < 0:
            raise ValueError("iters must be >= 0")
        return self


def fmt(x):
    if x is None:
        return ""
    return f"{x:.12g}"


def _write(lines, out):
    text = "\n".join(lines) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w") as f:
            f.write(text)


def cmd_plane_wave(config):
    """Uniform-mesh sweep of the free-space plane-wave problem."""
    config.validate()
    k, p = config.k, config.degree
    lines = ["n,h,p,k,E_fem,E_ba,E_est,E_est_guar,eff_est,eff_guar,"
             "eta,osc,c_ba,c_up"]
    for n in config.n_values:
        mesh = build_cartesian_mesh(n)
        h = 2 * np.sqrt(2) / n
        wave = plane_wave(k, config.nu)
        prob = HelmholtzProblem(mesh=mesh, k=k, degree=p, g=wave.impedance,
                                quad_degree=config.quad_degree)
        u_h = solve_helmholtz(prob)
        proj = project_data(prob)
        flux = equilibrate(u_h, proj, k)
        best = best_approximation(wave, u_h.space, k,
                                  quad_degree=config.quad_degree)
        c_ba, c_up = plane_wave_constants(k, h, degree=p)
        rep = report(prob, u_h, flux, proj, reference=wave, best=best,
                     c_ba=c_ba, c_up=c_up)
        lines.append(",".join([
            str(n), fmt(h), str(p), fmt(k), fmt(rep.E_fem), fmt(rep.E_ba),
            fmt(rep.E_est), fmt(rep.E_est_guaranteed), fmt(rep.effectivity),
            fmt(rep.guaranteed_effectivity), fmt(rep.eta), fmt(rep.osc),
            fmt(c_ba), fmt(c_up)]))
    _write(lines, config.out)
    return lines


def _snapshot(state, directory):
    import os
    os.makedirs(directory, exist_ok=True)
    tag = f"{state.iteration:03d}"
    save_mesh(state.mesh, os.path.join(directory, f"mesh_iter_{tag}.txt"))
    rep = state.report
    err = rep.err_K if rep.err_K is not None else np.zeros_like(rep.eta_K)
    rows = ["elem,eta_K,err_K"]
    rows += [f"{t},{fmt(rep.eta_K[t])},{fmt(err[t])}"
             for t in range(len(rep.eta_K))]
    with open(os.path.join(directory, f"elem_iter_{tag}.csv"), "w") as f:
        f.write("\n".join(rows) + "\n")


def cmd_scattering(config):
    """Adaptive loop on the obstacle geometry with a guaranteed constant."""
    config.validate()
    k, p = config.k, config.degree
    mesh = load_mesh(config.mesh_path) if config.mesh_path else scattering_mesh()
    wave = plane_wave(k, config.nu)
    prob = HelmholtzProblem(mesh=mesh, k=k, degree=p, g=wave.impedance,
                            quad_degree=config.quad_degree)
    c_ba, c_up = scattering_constants(k)
    lines = [f"# case=scattering k={fmt(k)} p={p} nu={fmt(config.nu)} "
             f"c_ba={fmt(c_ba)} c_up={fmt(c_up)}",
             "iter,n_elem,h_min,h_max,E_fem,E_est,eff"]

    def emit(state):
        rep = state.report
        lines.append(",".join([
            str(state.iteration), str(state.n_elements), fmt(state.h_min),
            fmt(state.h_max), fmt(rep.E_fem), fmt(rep.E_est),
            fmt(rep.effectivity)]))
        if config.snapshot_dir:
            _snapshot(state, config.snapshot_dir)

    states = adapt_loop(prob, config.iterations, p_ref=config.p_ref,
                        c_ba=c_ba, c_up=c_up, on_iteration=emit)
    _write(lines, config.out)
    return lines, states


def _check(name, ok, detail):
    print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return ok


def cmd_verify():
    """Invariant suite: exact quadrature, partition of unity, manufactured
    exactness, projection orthogonality, and the flux identities."""
    from .quadrature import edge_rule, triangle_rule
    from .spaces import eval_lagrange_basis

    ok = True

    rule = triangle_rule(9)
    x, y = rule.xy[:, 0], rule.xy[:, 1]
    err = abs(float(np.sum(rule.weights * x ** 4 * y ** 3)) - 1 / 2520)
    ok &= _check("quadrature exactness", err < 1e-15, f"x^4 y^3 error {err:.2e}")

    pts = np.random.default_rng(0).dirichlet((1, 1, 1), 100)[:, 1:]
    vals, grads = eval_lagrange_basis(4, pts)
    pou = np.abs(vals.sum(axis=0) - 1).max()
    ok &= _check("partition of unity", pou < 1e-12, f"max deviation {pou:.2e}")

    k = 2.0
    mesh = build_cartesian_mesh(4)

    class Poly:
        def value(self, pts):
            return (pts[:, 0] ** 2 * pts[:, 1]).astype(complex)

        def gradient(self, pts):
            return np.stack([2 * pts[:, 0] * pts[:, 1], pts[:, 0] ** 2],
                            axis=-1).astype(complex)

    exact = Poly()
    prob = HelmholtzProblem(
        mesh=mesh, k=k, degree=3,
        f=lambda pts: (-k ** 2 * pts[:, 0] ** 2 * pts[:, 1]
                       - 2 * pts[:, 1]).astype(complex),
        g=lambda pts, n: exact.gradient(pts) @ n.astype(complex)
        - 1j * k * exact.value(pts))
    u_h = solve_helmholtz(prob)
    proj = project_data(prob)
    flux = equilibrate(u_h, proj, k)
    eta = float(np.sqrt(np.sum(eta_local(flux, u_h) ** 2)))
    scale = energy_norm_discrete(u_h, k)
    ok &= _check("manufactured exactness", eta <= 1e-8 * scale,
                 f"eta = {eta:.2e} vs norm {scale:.2e}")

    wk = np.pi
    wmesh = build_cartesian_mesh(8)
    wave = plane_wave(wk, np.pi / 3)
    wprob = HelmholtzProblem(mesh=wmesh, k=wk, degree=1, g=wave.impedance)
    w_h = solve_helmholtz(wprob)
    wproj = project_data(wprob)

    from .solver import absorbing_edges, edge_geometry, edge_reference_points
    er = edge_rule(wprob.data_quad_degree)
    worst = 0.0
    for e in absorbing_edges(wmesh)[:8]:
        elem, (a, b), length, normal = edge_geometry(wmesh, e)
        _, phys = edge_reference_points(wmesh, elem, a, b, er.points)
        gv = wprob.g(phys, normal)
        gp = eval_projected_g(wproj, e, er.points)
        worst = max(worst, abs(np.sum(er.weights * (gv - gp)) * length))
    ok &= _check("projection orthogonality", worst < 1e-12,
                 f"worst moment {worst:.2e}")

    wflux = equilibrate(w_h, wproj, wk)
    rule = triangle_rule(2 * (wflux.q + 1))
    _, divs = wflux.evaluate(rule.xy)
    N, _ = eval_lagrange_basis(1, rule.xy)
    u_vals = w_h.coefficients[w_h.space.elem_dofs] @ N
    target = wk ** 2 * u_vals
    rel = (np.abs(divs - target).max()
           / max(np.abs(divs).max(), 1e-30))
    ok &= _check("flux divergence identity", rel < 1e-10, f"relative {rel:.2e}")

    er2 = edge_rule(2 * wflux.q + 2)
    worst_tr = 0.0
    for e in absorbing_edges(wmesh):
        elem, (a, b), length, normal = edge_geometry(wmesh, e)
        ref_pts, phys = edge_reference_points(wmesh, elem, a, b, er2.points)
        vals, _ = wflux.evaluate(ref_pts, elems=[elem])
        Ne, _ = eval_lagrange_basis(1, ref_pts)
        u_tr = w_h.coefficients[w_h.space.elem_dofs[elem]] @ Ne
        expected = -(eval_projected_g(wproj, e, er2.points) + 1j * wk * u_tr)
        worst_tr = max(worst_tr, np.abs(vals[0] @ normal - expected).max()
                       / max(np.abs(expected).max(), 1.0))
    ok &= _check("flux boundary trace identity", worst_tr < 1e-10,
                 f"relative {worst_tr:.2e}")
    return 0 if ok else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="helmfem",
        description="Helmholtz finite elements with equilibrated-flux "
                    "error estimation")
    sub = parser.add_subparsers(dest="command", required=True)

    pw = sub.add_parser("plane-wave", help="uniform-mesh effectivity sweep")
    pw.add_argument("--k", type=float, default=np.pi)
    pw.add_argument("--p", type=int, default=1)
    pw.add_argument("--n", type=str, default="8",
                    help="comma-separated mesh counts, e.g. 8,16,32")
    pw.add_argument("--out", type=str, default=None)
    pw.add_argument("--quad-degree", type=int, default=None)

    sc = sub.add_parser("scattering", help="adaptive obstacle experiment")
    sc.add_argument("--k", type=float, default=2 * np.pi)
    sc.add_argument("--p", type=int, default=1)
    sc.add_argument("--mesh", type=str, default=None,
                    help="mesh file (default: bundled obstacle mesh)")
    sc.add_argument("--nu", type=float, default=np.pi / 3,
                    help="incident angle")
    sc.add_argument("--iters", type=int, default=15)
    sc.add_argument("--out", type=str, default=None)
    sc.add_argument("--snapshot-dir", type=str, default=None)
    sc.add_argument("--pref", type=int, default=None)
    sc.add_argument("--quad-degree", type=int, default=None)

    sub.add_parser("verify", help="run the invariant self-checks")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "plane-wave":
        config = RunConfig(command="plane-wave", k=args.k, degree=args.p,
                           n_values=tuple(int(x) for x in args.n.split(",")),
                           out=args.out, quad_degree=args.quad_degree)
        cmd_plane_wave(config)
        return 0
    if args.command == "scattering":
        config = RunConfig(command="scattering", k=args.k, degree=args.p,
                           mesh_path=args.mesh, nu=args.nu,
                           iterations=args.iters, out=args.out,
                           snapshot_dir=args.snapshot_dir, p_ref=args.pref,
                           quad_degree=args.quad_degree)
        cmd_scattering(config)
        return 0
    return cmd_verify()


if __name__ == "__main__":
    sys.exit(main())
