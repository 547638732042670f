#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use vdecomp::forms::Form;
use vdecomp::interaction::{ConsvBasis, InteractionTable};
use vdecomp::locale::{Locale, Site};
use vdecomp::measure::{FunctionTable, SiteMeasure};
use vdecomp::varadhan::{current_form, gamma_form, ShiftInvariantForm};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn random_table(sites: &[Site], nstates: usize, rng: &mut ChaCha8Rng) -> FunctionTable {
    FunctionTable::from_fn(sites, nstates, |_| normal(rng))
}

pub fn locale(name: &str) -> Locale {
    Locale::from_name(name).unwrap_or_else(|| panic!("unknown locale {name}"))
}

pub fn interaction(name: &str) -> InteractionTable {
    InteractionTable::from_name(name).unwrap_or_else(|| panic!("unknown interaction {name}"))
}

/// `d Gamma_{f0} + sum_ij a0[i][j] (current of xi_i in direction j)`.
pub fn synthetic_form(phi: &InteractionTable, basis: &ConsvBasis, d: usize, f0: &FunctionTable, a0: &[Vec<f64>]) -> ShiftInvariantForm {
    let mut w = gamma_form(f0, d, phi).unwrap();
    for (i, row) in a0.iter().enumerate() {
        let xi = basis.vector_f64(i);
        for (j, &a) in row.iter().enumerate() {
            w = w.add(&current_form(phi, &xi, j, d).unwrap().scale(a));
        }
    }
    w
}

/// Adds `delta` on one transition that actually moves the configuration.
pub fn perturb(form: &Form, rng: &mut ChaCha8Rng, delta: f64) -> Form {
    let loc = form.locale().clone();
    let phi = form.interaction().clone();
    let n = phi.num_states();
    let size = n.pow(loc.num_vertices() as u32);
    let mut out = form.clone();
    loop {
        let c = rng.random_range(0..size);
        let e = rng.random_range(0..loc.num_edges());
        let (o, t) = loc.edge(e);
        let codec = vdecomp::configspace::Codec::new(n, loc.num_vertices(), u128::MAX).unwrap();
        let c2 = codec.apply_pair(&phi, c, o, t);
        if c2 != c {
            out.add_to_transition(c, c2, delta);
            return out;
        }
    }
}

pub fn measures(n: usize) -> Vec<(String, SiteMeasure)> {
    vec![
        ("uniform".to_string(), SiteMeasure::uniform(n)),
        ("geometric(0.5)".to_string(), SiteMeasure::geometric(n, 0.5).unwrap()),
    ]
}
