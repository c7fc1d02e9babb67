"""Smoke test for the biot_apost_py extension module.

Build and install first, e.g. `maturin develop --release` from crates/python.
"""

import math

import biot_apost_py as bp


def check(cond, msg):
    if not cond:
        raise SystemExit(f"smoke test failed: {msg}")


def main():
    mesh = bp.Mesh(2)
    check(mesh.n_triangles == 32, "triangle count")
    check(abs(mesh.total_area() - 1.0) < 1e-14, "mesh area")
    check(set(mesh.boundary_tags()) == {"interior", "gamma1"}, "boundary tags")
    check(bp.Mesh(2, diagonal="rising").n_edges == mesh.n_edges, "rising diagonal mesh")

    pts, wts = bp.gauss_legendre(5)
    check(abs(sum(w * x**9 for x, w in zip(pts, wts)) - 0.1) < 1e-14, "line rule degree 9")
    _, wts = bp.triangle_rule(5)
    check(abs(sum(wts) - 0.5) < 1e-14, "triangle rule weights")

    coeffs = bp.Coefficients(mu=0.4, lam=0.4)
    ex = bp.BenchmarkSolution(coeffs)
    check(abs(ex.p(0.3, 0.0, 0.0) - math.sin(0.3)) < 1e-14, "benchmark pressure")
    try:
        bp.Coefficients(mu=-1.0)
    except ValueError:
        pass
    else:
        raise SystemExit("smoke test failed: negative mu accepted")

    sim = bp.Simulation(2, coeffs)
    state = sim.initial_state()
    tau = 0.1
    for n in range(1, 4):
        state, report = sim.step(state, tau, n * tau)
        check(report["n"] == n, "report index")
        check(report["eps"] > 0.0 and math.isfinite(report["eps"]), "indicator value")
        check(len(report["element_space"]) == mesh.n_triangles, "per-element array")
    check(sim.energy(state) > 0.0, "energy")

    rows = bp.run_study("coupled-sim", kmin=1, kmax=3, final_time=0.5)
    for r in rows:
        print(f"k={r['k']} E={r['E']:.4f} Est={r['Est']:.4f} Est/E={r['Est_over_E']:.3f}")
    check(rows[0]["E_ratio"] is None, "first ratio")
    check(1.7 < rows[-1]["E_ratio"] < 2.3, "error halves")
    check(len(rows[-1]["series"]) == rows[-1]["steps"], "series length")

    heat = bp.run_study("heat", kmin=2, kmax=3, final_time=0.2)
    check(heat[1]["Est"] < heat[0]["Est"], "heat indicator decreases")
    print("smoke test passed")


if __name__ == "__main__":
    main()
