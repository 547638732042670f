mod common;

use common::*;
use proptest::prelude::*;
use vdecomp::configspace::{
    apply_edge, conserved_vector, find_path, irreducibly_quantified_check, Codec, TransitionGraph, DEFAULT_BUDGET,
};
use vdecomp::forms::{cycle_integrals_vanish, differential};
use vdecomp::interaction::{conserved_basis, is_conserved, InteractionTable};
use vdecomp::locale::{Locale, Site};
use vdecomp::measure::{
    c_phi_nu, canonical_rate, expand_base, expand_mu, is_reversible, rate_bounds, FunctionTable, Rate, SiteMeasure,
};
use vdecomp::spectral::spectral_gap;
use vdecomp::varadhan::{current_form, gamma_form, is_closed_shift_invariant, window_sites, Decomposer};

fn interactions() -> impl Strategy<Value = InteractionTable> {
    prop_oneof![
        (1usize..=3).prop_map(InteractionTable::sep),
        (1usize..=3).prop_map(InteractionTable::gep),
    ]
}

fn small_locale() -> impl Strategy<Value = Locale> {
    prop::sample::select(vec!["p2", "p3", "c4", "k3", "box2x2"]).prop_map(locale)
}

fn measure(n: usize, seed: u64) -> SiteMeasure {
    let mut r = rng(seed);
    SiteMeasure::from_unnormalized(&(0..n).map(|_| 0.1 + normal(&mut r).abs()).collect::<Vec<_>>()).unwrap()
}

/// Union-find over all transition pairs.
fn union_find_components(phi: &InteractionTable, loc: &Locale) -> Vec<usize> {
    let codec = Codec::new(phi.num_states(), loc.num_vertices(), DEFAULT_BUDGET).unwrap();
    let mut parent: Vec<usize> = (0..codec.size()).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for c in 0..codec.size() {
        for &(o, t) in loc.edges() {
            let c2 = codec.apply_pair(phi, c, o, t);
            let (a, b) = (find(&mut parent, c), find(&mut parent, c2));
            parent[a.max(b)] = a.min(b);
        }
    }
    (0..codec.size()).map(|c| find(&mut parent, c)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transitions_are_involutions(phi in interactions(), loc in small_locale(), seed in 0u64..1000) {
        let mut r = rng(seed);
        let n = phi.num_states();
        let eta: Vec<usize> = (0..loc.num_vertices()).map(|_| (normal(&mut r).abs() * 10.0) as usize % n).collect();
        for &(o, t) in loc.edges() {
            let once = apply_edge(&phi, &loc, &eta, o, t).unwrap();
            if once != eta {
                prop_assert_eq!(apply_edge(&phi, &loc, &once, t, o).unwrap(), eta.clone());
            }
        }
    }

    #[test]
    fn conserved_basis_vectors_are_conserved(phi in interactions()) {
        let basis = conserved_basis(&phi);
        for v in basis.vectors() {
            prop_assert!(is_conserved(&phi, v));
        }
    }

    #[test]
    fn paths_conserve_and_components_match_union_find(phi in interactions(), loc in small_locale(), a in 0usize..4096, b in 0usize..4096) {
        let g = TransitionGraph::build(&phi, &loc, DEFAULT_BUDGET).unwrap();
        let uf = union_find_components(&phi, &loc);
        let size = g.num_configurations();
        for c in 0..size {
            for c2 in [0, c / 2, size - 1] {
                prop_assert_eq!(g.component(c) == g.component(c2), uf[c] == uf[c2]);
            }
        }
        let basis = conserved_basis(&phi);
        let codec = g.codec();
        let (x, y) = (codec.decode(a % size), codec.decode(b % size));
        if conserved_vector(&x, &basis) == conserved_vector(&y, &basis) {
            if let Some(path) = find_path(&phi, &loc, &x, &y, DEFAULT_BUDGET).unwrap() {
                let mut cur = x.clone();
                for e in path {
                    let (o, t) = loc.edge(e);
                    cur = apply_edge(&phi, &loc, &cur, o, t).unwrap();
                    prop_assert_eq!(conserved_vector(&cur, &basis), conserved_vector(&x, &basis));
                }
                prop_assert_eq!(cur, y);
            }
        }
        let q = irreducibly_quantified_check(&phi, &loc, DEFAULT_BUDGET).unwrap();
        prop_assert!(q.classes <= q.components);
        prop_assert_eq!(q.connected, q.classes == q.components);
    }

    #[test]
    fn expansions_reconstruct(n in 2usize..=4, len in 0usize..=4, seed in 0u64..10_000) {
        let mut r = rng(seed);
        let sites: Vec<Site> = (0..len as i32).map(|x| Site::lattice(&[x, 1 - x])).collect();
        let f = random_table(&sites, n, &mut r);
        let nu = measure(n, seed);
        prop_assert!(expand_mu(&f, &nu).reconstruct().max_diff(&f) < 1e-10);
        prop_assert!(expand_base(&f, seed as usize % n).reconstruct().max_diff(&f) < 1e-10);
    }

    #[test]
    fn differentials_are_closed_and_exact(phi in interactions(), loc in small_locale(), seed in 0u64..10_000) {
        let n = phi.num_states();
        prop_assume!(n.pow(loc.num_vertices() as u32) <= 4096);
        let mut r = rng(seed);
        let f = random_table(loc.sites(), n, &mut r);
        let w = differential(&f, &loc, &phi).unwrap();
        prop_assert!(w.is_alternating(1e-12));
        prop_assert!(w.is_closed(1e-9));
        let p = w.solve_potential(1e-9).unwrap();
        prop_assert!(differential(&p.f, &loc, &phi).unwrap().max_diff(&w) < 1e-9);
        let bad = perturb(&w, &mut r, 0.25);
        if n.pow(loc.num_vertices() as u32) <= 256 {
            prop_assert_eq!(bad.is_closed(1e-9), cycle_integrals_vanish(&bad, 1e-9));
        }
    }

    #[test]
    fn canonical_rates_are_reversible(phi in interactions(), loc in small_locale(), seed in 0u64..1000) {
        let nu = measure(phi.num_states(), seed);
        let rate = canonical_rate(&nu, &phi, &loc);
        prop_assert!(is_reversible(&rate, &nu, &phi, &loc));
        let trivial = Rate::trivial(&loc, phi.num_states());
        let c = c_phi_nu(&phi, &nu);
        for e in 0..loc.num_edges() {
            let b = rate_bounds(&rate, &nu, &phi, &loc, e);
            let rb = rate_bounds(&rate, &nu, &phi, &loc, loc.reverse(e));
            prop_assert!((b.transition_bound - 1.0).abs() < 1e-9);
            prop_assert!(b.transition_bound <= b.rate_bound * rb.rate_bound * c * (1.0 + 1e-12));
            let t = rate_bounds(&trivial, &nu, &phi, &loc, e);
            prop_assert!((t.rate_bound - 1.0).abs() < 1e-15);
            prop_assert!(t.transition_bound <= c * (1.0 + 1e-12));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn gap_is_attained_and_label_invariant(which in 0usize..3, k in 2usize..=4, seed in 0u64..1000) {
        let phi = [InteractionTable::sep(1), InteractionTable::sep(2), InteractionTable::gep(2)][which].clone();
        let n = phi.num_states();
        let nu = measure(n, seed);
        let loc = Locale::complete(k).unwrap();
        let g = spectral_gap(&loc, &phi, &nu, None, DEFAULT_BUDGET).unwrap();
        prop_assert!(g.gap > 0.0 && g.residual < 1e-8);

        let graph = TransitionGraph::build(&phi, &loc, DEFAULT_BUDGET).unwrap();
        let codec = graph.codec();
        let mu: Vec<f64> = (0..codec.size()).map(|c| nu.product(&codec.decode(c))).collect();
        let dirichlet = |f: &[f64]| -> f64 {
            (0..codec.size())
                .map(|c| (0..loc.num_edges()).map(|e| mu[c] * (f[graph.target(c, e)] - f[c]).powi(2)).sum::<f64>())
                .sum()
        };
        let quotient_sq = |f: &[f64]| -> f64 {
            let k = graph.num_components();
            let (mut s, mut m) = (vec![0.0; k], vec![0.0; k]);
            for c in 0..codec.size() {
                s[graph.component(c)] += mu[c] * f[c];
                m[graph.component(c)] += mu[c];
            }
            (0..codec.size()).map(|c| mu[c] * (f[c] - s[graph.component(c)] / m[graph.component(c)]).powi(2)).sum()
        };
        let mut r = rng(seed);
        for _ in 0..200 {
            let f: Vec<f64> = (0..codec.size()).map(|_| normal(&mut r)).collect();
            prop_assert!(quotient_sq(&f) <= dirichlet(&f) / g.gap * (1.0 + 1e-9));
        }
        let m = g.minimizer.as_ref().unwrap().values().to_vec();
        prop_assert!((dirichlet(&m) / quotient_sq(&m) - g.gap).abs() < 1e-6 * g.gap.max(1.0));

        let perm: Vec<usize> = (0..n).map(|s| (s + 1) % n).collect();
        let g2 = spectral_gap(&loc, &phi.relabel(&perm).unwrap(), &nu.relabel(&perm), None, DEFAULT_BUDGET).unwrap();
        prop_assert!((g2.gap - g.gap).abs() < 1e-8 * g.gap.max(1.0));
    }

    #[test]
    fn decomposition_recovers_coefficients_in_one_dimension(which in 0usize..3, seed in 0u64..10_000) {
        let phi = [InteractionTable::sep(1), InteractionTable::sep(2), InteractionTable::gep(2)][which].clone();
        let n = phi.num_states();
        let basis = conserved_basis(&phi);
        let nu = measure(n, seed);
        let mut r = rng(seed);
        let f0 = random_table(&window_sites(1, 2), n, &mut r);
        let a0: Vec<Vec<f64>> = (0..basis.dim()).map(|_| vec![normal(&mut r)]).collect();
        let w = synthetic_form(&phi, &basis, 1, &f0, &a0);
        prop_assert!(is_closed_shift_invariant(&w, &nu, 3, DEFAULT_BUDGET).unwrap());
        for radius in [2, 3] {
            let res = Decomposer::new(&phi, &basis, &nu, 1, radius).unwrap().decompose(&w).unwrap();
            for (x, y) in res.a.iter().flatten().zip(a0.iter().flatten()) {
                prop_assert!((x - y).abs() < 1e-8);
            }
            prop_assert!(res.max_residual() < 1e-10);
            prop_assert!(res.f.expectation(&nu).abs() < 1e-10);
            let rebuilt = gamma_form(&res.f, 1, &phi).unwrap();
            let mut expected = w.clone();
            for (i, row) in res.a.iter().enumerate() {
                expected = expected.sub(&current_form(&phi, &basis.vector_f64(i), 0, 1).unwrap().scale(row[0]));
            }
            prop_assert!(rebuilt.max_diff(&expected) < 1e-8);
        }
    }
}

#[test]
fn constant_tables_expand_to_one_piece() {
    let nu = SiteMeasure::uniform(3);
    let c = FunctionTable::constant(3, 2.5).extend(&[Site::ORIGIN, Site::unit(0)]);
    let p = expand_mu(&c, &nu);
    assert_eq!(p.len(), 1);
    assert!((p.piece(&[]).unwrap().values()[0] - 2.5).abs() < 1e-15);
}
