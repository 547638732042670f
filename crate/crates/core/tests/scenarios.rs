mod common;

use common::*;
use nalgebra::DMatrix;
use vdecomp::configspace::{TransitionGraph, DEFAULT_BUDGET};
use vdecomp::interaction::{conserved_basis, InteractionTable};
use vdecomp::locale::{Locale, Site};
use vdecomp::measure::SiteMeasure;
use vdecomp::spectral::{
    estimate_ctilde, spectral_gap, uniform_gap_scan, verify_boundary_estimate, verify_dagger_bound, verify_mpl,
    verify_sigma_gap_bound,
};
use vdecomp::varadhan::{
    current_form, gamma_form, is_closed_shift_invariant, psi_sequence, window_sites, Decomposer, ShiftInvariantForm,
};
use vdecomp::Error;

/// Full-space eigensolve of the symmetrized Dirichlet matrix; the gap is the first
/// eigenvalue past the kernel, whose dimension is the number of transition components.
fn oracle_gap(locale: &Locale, phi: &InteractionTable, nu: &SiteMeasure) -> f64 {
    let g = TransitionGraph::build(phi, locale, DEFAULT_BUDGET).unwrap();
    let codec = g.codec();
    let size = codec.size();
    let mu: Vec<f64> = (0..size).map(|c| nu.product(&codec.decode(c))).collect();
    let mut d = DMatrix::<f64>::zeros(size, size);
    for c in 0..size {
        for e in 0..locale.num_edges() {
            let t = g.target(c, e);
            if t != c {
                d[(c, c)] += mu[c];
                d[(t, t)] += mu[c];
                d[(c, t)] -= mu[c];
                d[(t, c)] -= mu[c];
            }
        }
    }
    let s = DMatrix::from_fn(size, size, |i, j| d[(i, j)] / (mu[i] * mu[j]).sqrt());
    let mut ev: Vec<f64> = s.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev[g.num_components()]
}

fn split(sigma: &Locale, take: std::ops::Range<usize>) -> Vec<Site> {
    sigma.sites()[take].to_vec()
}

#[test]
fn gap_matches_full_space_oracle() {
    let gep2 = InteractionTable::gep(2);
    let k3 = Locale::complete(3).unwrap();
    let nu = SiteMeasure::geometric(3, 1.0).unwrap();
    let g = spectral_gap(&k3, &gep2, &nu, None, DEFAULT_BUDGET).unwrap();
    assert!((g.gap - oracle_gap(&k3, &gep2, &nu)).abs() < 1e-8);

    let sep1 = InteractionTable::sep(1);
    let k2 = Locale::complete(2).unwrap();
    let g = spectral_gap(&k2, &sep1, &SiteMeasure::uniform(2), None, DEFAULT_BUDGET).unwrap();
    assert!((g.gap - 8.0).abs() < 1e-8);

    let skew = SiteMeasure::new(vec![0.5, 0.25, 0.25]).unwrap();
    let c4 = Locale::cycle(4).unwrap();
    let g = spectral_gap(&c4, &gep2, &skew, None, DEFAULT_BUDGET).unwrap();
    assert!((g.gap - oracle_gap(&c4, &gep2, &skew)).abs() < 1e-8);
}

#[test]
fn single_vertex_gap_is_infinite() {
    let g = spectral_gap(&Locale::single(), &InteractionTable::sep(1), &SiteMeasure::uniform(2), None, DEFAULT_BUDGET)
        .unwrap();
    assert!(g.degenerate && g.gap.is_infinite());
}

#[test]
fn gap_scans_stay_positive() {
    for (phi, nu) in [
        (InteractionTable::sep(1), SiteMeasure::uniform(2)),
        (InteractionTable::gep(2), SiteMeasure::geometric(3, 0.5).unwrap()),
    ] {
        let rows = uniform_gap_scan(&phi, &nu, &[2, 3, 4, 5], DEFAULT_BUDGET).unwrap();
        assert_eq!(rows.len(), 4);
        for r in &rows {
            assert!(r.normalized > 0.1, "n={} normalized={}", r.n, r.normalized);
            assert!(r.running_min <= r.normalized);
        }
    }
    let err = uniform_gap_scan(&InteractionTable::identity(2), &SiteMeasure::uniform(2), &[2, 3], DEFAULT_BUDGET);
    assert!(matches!(err, Err(Error::NotIrreduciblyQuantified(_))));
}

#[test]
fn move_to_exchange_constant() {
    for seed in 0..5 {
        let mut r = rng(seed);
        let w: Vec<f64> = (0..3).map(|_| 0.1 + normal(&mut r).abs()).collect();
        let nu = SiteMeasure::from_unnormalized(&w).unwrap();
        assert!((estimate_ctilde(&InteractionTable::sep(2), &nu).unwrap() - 1.0).abs() < 1e-9);
    }
    let c = estimate_ctilde(&InteractionTable::gep(2), &SiteMeasure::uniform(3)).unwrap();
    assert!(c.is_finite() && c >= 1.0 - 1e-9);
    assert!(matches!(
        estimate_ctilde(&InteractionTable::identity(2), &SiteMeasure::uniform(2)),
        Err(Error::DegenerateDenominator)
    ));
}

#[test]
fn inequalities_hold_on_listed_locales() {
    let sep1 = InteractionTable::sep(1);
    let gep2 = InteractionTable::gep(2);
    let u2 = SiteMeasure::uniform(2);
    let g3 = SiteMeasure::geometric(3, 0.5).unwrap();
    let p3 = Locale::path(3).unwrap();
    let p4 = Locale::path(4).unwrap();
    let k3 = Locale::complete(3).unwrap();

    let mut reports = vec![
        verify_mpl(&p4, &sep1, &u2, 100, 1, DEFAULT_BUDGET).unwrap(),
        verify_mpl(&p4, &gep2, &g3, 100, 2, DEFAULT_BUDGET).unwrap(),
        verify_sigma_gap_bound(&p3, &sep1, &u2, 100, 3, DEFAULT_BUDGET).unwrap(),
        verify_sigma_gap_bound(&k3, &gep2, &g3, 100, 4, DEFAULT_BUDGET).unwrap(),
    ];
    for take in [0..2, 1..3] {
        for (phi, nu) in [(&sep1, &u2), (&gep2, &g3)] {
            let lambda = split(&p4, take.clone());
            reports.push(verify_boundary_estimate(&p4, &lambda, phi, nu, 100, 5, DEFAULT_BUDGET).unwrap());
            reports.push(verify_dagger_bound(&p4, &lambda, phi, nu, 100, 6, DEFAULT_BUDGET).unwrap());
        }
    }
    for r in &reports {
        assert!(r.pass, "{} worst ratio {}", r.name, r.worst_ratio);
        assert!(r.trials >= 100);
    }
    let whole = verify_dagger_bound(&p4, p4.sites(), &sep1, &u2, 20, 7, DEFAULT_BUDGET).unwrap();
    assert!(whole.pass && whole.worst_ratio.abs() < 1e-12);
}

#[test]
fn currents_and_exact_forms_are_closed() {
    for phi in [InteractionTable::sep(1), InteractionTable::gep(2)] {
        let n = phi.num_states();
        let nu = SiteMeasure::uniform(n);
        let basis = conserved_basis(&phi);
        for d in [1, 2] {
            let max_box = if d == 1 { 3 } else { 1 };
            let w = current_form(&phi, &basis.vector_f64(0), d - 1, d).unwrap();
            assert!(is_closed_shift_invariant(&w, &nu, max_box, DEFAULT_BUDGET).unwrap());
            let mut r = rng(d as u64);
            let f = random_table(&window_sites(d, 1), n, &mut r);
            let g = gamma_form(&f, d, &phi).unwrap();
            assert!(is_closed_shift_invariant(&g, &nu, max_box, DEFAULT_BUDGET).unwrap());
            let mut reps = w.reps().to_vec();
            let first = reps[d - 1].clone();
            let code = (0..first.len()).find(|&c| first.values()[c] != 0.0).unwrap();
            reps[d - 1].values_mut()[code] += 0.3;
            let bad = ShiftInvariantForm::new(d, &phi, reps).unwrap();
            assert!(!is_closed_shift_invariant(&bad, &nu, max_box, DEFAULT_BUDGET).unwrap());
        }
    }
}

#[test]
fn decomposition_is_stable_under_window_growth() {
    let cases: [(InteractionTable, usize, usize); 3] =
        [(InteractionTable::gep(3), 1, 2), (InteractionTable::sep(1), 2, 1), (InteractionTable::sep(2), 1, 2)];
    for (phi, d, r0) in cases {
        let n = phi.num_states();
        let basis = conserved_basis(&phi);
        let nu = SiteMeasure::geometric(n, 0.7).unwrap();
        let mut r = rng(11);
        let f0 = random_table(&window_sites(d, r0), n, &mut r);
        let a0: Vec<Vec<f64>> = (0..basis.dim()).map(|_| (0..d).map(|_| normal(&mut r)).collect()).collect();
        let w = synthetic_form(&phi, &basis, d, &f0, &a0);
        let small = Decomposer::new(&phi, &basis, &nu, d, r0).unwrap().decompose(&w).unwrap();
        let large = Decomposer::new(&phi, &basis, &nu, d, r0 + 1).unwrap().decompose(&w).unwrap();
        for ((x, y), z) in small.a.iter().flatten().zip(large.a.iter().flatten()).zip(a0.iter().flatten()) {
            assert!((x - z).abs() < 1e-8 && (x - y).abs() < 1e-8, "{x} {y} {z}");
        }
        assert!(small.max_residual() < 1e-10 && large.max_residual() < 1e-10);
    }
}

#[test]
fn psi_identity_holds_for_mixed_forms() {
    let phi = InteractionTable::sep(1);
    let basis = conserved_basis(&phi);
    let nu = SiteMeasure::uniform(2);
    let mut r = rng(5);
    let f0 = random_table(&window_sites(1, 1), 2, &mut r);
    let w = synthetic_form(&phi, &basis, 1, &f0, &[vec![0.75]]);
    for n in 1..=3 {
        let step = psi_sequence(&w, n, &nu, None, DEFAULT_BUDGET).unwrap();
        assert!(step.identity_error < 1e-9, "n={n} error {}", step.identity_error);
        assert!(step.bound.pass);
    }
}
