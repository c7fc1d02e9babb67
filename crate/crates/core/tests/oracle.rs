mod common;

use biot_apost::assembly::{Coefficients, Discretization, FormMatrices, Permeability};
use biot_apost::estimators::{est_e1, est_e2, est_e3, est_time};
use biot_apost::mesh::{uniform_unit_square, uniform_unit_square_with, BoundaryTag, TriMesh};
use biot_apost::stepper::DiscreteState;
use common::{max_rel_gap, Oracle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn mixed_boundary(k: i64) -> TriMesh {
    // right and top sides traction-free
    uniform_unit_square_with(k, |a, b| {
        if (a[0] == 1.0 && b[0] == 1.0) || (a[1] == 1.0 && b[1] == 1.0) {
            BoundaryTag::Gamma2
        } else {
            BoundaryTag::Gamma1
        }
    })
    .unwrap()
}

fn random_coeffs(rng: &mut ChaCha8Rng, n_tri: usize) -> Coefficients {
    let ks = (0..n_tri)
        .map(|_| {
            let a: f64 = rng.random_range(0.5..2.0);
            let b: f64 = rng.random_range(0.5..2.0);
            let c: f64 = rng.random_range(-0.3..0.3);
            [[a, c], [c, b]]
        })
        .collect();
    Coefficients {
        mu: rng.random_range(0.2..2.0),
        lambda: rng.random_range(0.0..5.0),
        alpha: rng.random_range(0.5..1.5),
        beta: rng.random_range(0.1..2.0),
        permeability: Permeability::PerElement(ks),
    }
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn indicators_match_dense_quadrature_on_random_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for k in 1..=3 {
        for mesh in [uniform_unit_square(k).unwrap(), mixed_boundary(k)] {
            let disc = Discretization::new(mesh);
            let sp = &disc.spaces;
            for _ in 0..5 {
                let coeffs = random_coeffs(&mut rng, disc.n_triangles());
                let oracle = Oracle::new(&disc.mesh, coeffs.clone());
                let u = random_vec(&mut rng, sp.v.n_dofs);
                let p = random_vec(&mut rng, sp.q.n_dofs);
                let w = random_vec(&mut rng, sp.w.n_dofs);
                let f = random_vec(&mut rng, sp.v.n_dofs);
                let g = random_vec(&mut rng, sp.q.n_dofs);

                let gap = max_rel_gap(&est_e1(&disc, &coeffs, &u, &p, &f).unwrap(), &oracle.e1(&u, &p, &f));
                assert!(gap < 1e-10, "E1 k={k} gap {gap:e}");
                for alpha in [true, false] {
                    let gap = max_rel_gap(&est_e2(&disc, &coeffs, &u, &p, &w, &g, alpha).unwrap(), &oracle.e2(&u, &p, &w, &g, alpha));
                    assert!(gap < 1e-10, "E2 k={k} gap {gap:e}");
                }
                let gap = max_rel_gap(&est_e3(&disc, &coeffs, &p, &w).unwrap(), &oracle.e3(&p, &w));
                assert!(gap < 1e-10, "E3 k={k} gap {gap:e}");
            }
        }
    }
}

#[test]
fn single_bubble_mode_matches_oracle() {
    let disc = Discretization::new(uniform_unit_square(2).unwrap());
    let coeffs = Coefficients::benchmark();
    let oracle = Oracle::new(&disc.mesh, coeffs.clone());
    let nv = disc.mesh.n_vertices();
    let zero_p = vec![0.0; disc.spaces.q.n_dofs];
    let zero_v = vec![0.0; disc.spaces.v.n_dofs];
    // an interior edge and a boundary edge
    for e in [disc.mesh.edge_tris().iter().position(|t| t.second.is_some()).unwrap(), 0] {
        let mut u = zero_v.clone();
        u[2 * nv + e] = 1.0;
        let lib = est_e1(&disc, &coeffs, &u, &zero_p, &zero_v).unwrap();
        let ora = oracle.e1(&u, &zero_p, &zero_v);
        assert!(ora.iter().sum::<f64>() > 0.0);
        let gap = max_rel_gap(&lib, &ora);
        assert!(gap < 1e-11, "bubble on edge {e}: {gap:e}");
    }
}

#[test]
fn single_flux_mode_matches_oracle() {
    let disc = Discretization::new(mixed_boundary(2));
    let coeffs = Coefficients::benchmark();
    let oracle = Oracle::new(&disc.mesh, coeffs.clone());
    let p = vec![0.0; disc.spaces.q.n_dofs];
    for e in 0..disc.mesh.n_edges() {
        let mut w = vec![0.0; disc.spaces.w.n_dofs];
        w[e] = 1.0;
        let gap = max_rel_gap(&est_e3(&disc, &coeffs, &p, &w).unwrap(), &oracle.e3(&p, &w));
        assert!(gap < 1e-11, "flux mode {e}: {gap:e}");
    }
}

#[test]
fn time_indicator_matches_quadrature_norms() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let disc = Discretization::new(mixed_boundary(2));
    let coeffs = random_coeffs(&mut rng, disc.n_triangles());
    let forms = FormMatrices::assemble(&disc, &coeffs).unwrap();
    let oracle = Oracle::new(&disc.mesh, coeffs);
    let prev = DiscreteState::zeros(0, &disc);
    let mut cur = DiscreteState::zeros(1, &disc);
    cur.u = random_vec(&mut rng, cur.u.len());
    cur.p = random_vec(&mut rng, cur.p.len());
    cur.w = random_vec(&mut rng, cur.w.len());
    let (e, tilde) = est_time(&forms, &prev, &cur, true).unwrap();
    let [a, c, we, div] = oracle.norms(&cur.u, &cur.p, &cur.w);
    let expected = a + c + we + div;
    assert!((e - expected).abs() <= 1e-12 * expected, "{e} vs {expected}");
    assert!((tilde - div.sqrt()).abs() <= 1e-12 * div.sqrt());
}

#[test]
fn oracle_rule_integrates_polynomials() {
    let (xs, ws) = common::gauss_legendre(8);
    for d in 0..16 {
        let q: f64 = xs.iter().zip(&ws).map(|(x, w)| w * x.powi(d)).sum();
        assert!((q - 1.0 / (d as f64 + 1.0)).abs() < 1e-14, "degree {d}");
    }
}
