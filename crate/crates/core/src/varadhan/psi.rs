//! The averaged potentials `Psi_n`: a potential of the form on `Sigma_n`,
//! projected off the kernel and onto `Lambda_n`, averaged over translations,
//! together with the split of its differential into interior and boundary parts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use super::{gamma_differential, project_to_box, reverse_table, ShiftInvariantForm};
use crate::configspace::TransitionGraph;
use crate::error::{Error, Result};
use crate::forms::{boundary_differential, CLOSED_TOL};
use crate::locale::{box_sites, Locale, Site};
use crate::measure::{FunctionTable, SiteMeasure};
use crate::spectral::{dagger_constant, RATIO_SLACK};

/// Number of sampled configurations per edge for the pointwise route when exhaustive evaluation is too large.
const POINT_SAMPLES: usize = 4096;

/// The boundary-form bound `||w_e||^2 <= C (|dL|^2/|L|^2)(|S|/|S \ L|) diam(S)^2 ||omega||_sp^2`.
#[derive(Clone, Debug, Serialize)]
pub struct BoundaryBound {
    pub constant: f64,
    pub geometry_factor: f64,
    pub omega_sp: f64,
    pub rhs: f64,
    /// Largest squared norm over the `2d` edges at the origin.
    pub plus_norm_sq: f64,
    pub minus_norm_sq: f64,
    pub dagger_norm_sq: f64,
    /// `||d^dagger_L F_n||_sp^2` and its bound through `||d_S F_n||_sp`.
    pub potential_dagger_sq: f64,
    pub potential_dagger_rhs: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct PsiSequenceStep {
    pub n: usize,
    pub lambda: Vec<Site>,
    pub sigma: Vec<Site>,
    /// Potential on `S^Sigma_n`, orthogonal to the functions constant on transition components.
    pub potential: FunctionTable,
    /// `pi^{Lambda_n} F_n`; `Psi_n` is its translation sum divided by `|Lambda_n|`.
    pub summand: FunctionTable,
    pub d_psi: ShiftInvariantForm,
    pub omega_n: ShiftInvariantForm,
    pub omega_dagger: ShiftInvariantForm,
    /// Representatives on `(0, 1_j)` of the boundary parts leaving and entering translates of `Lambda_n`.
    pub omega_plus: Vec<FunctionTable>,
    pub omega_minus: Vec<FunctionTable>,
    pub dagger_sp_norm: f64,
    /// Largest discrepancy in `d Psi_n = omega_n + omega_dagger` over all routes.
    pub identity_error: f64,
    pub test_boxes: Vec<String>,
    pub bound: BoundaryBound,
}

impl PsiSequenceStep {
    pub fn to_json(&self) -> Value {
        json!({
            "n": self.n,
            "lambda_size": self.lambda.len(),
            "sigma_size": self.sigma.len(),
            "dagger_sp_norm": self.dagger_sp_norm,
            "identity_error": self.identity_error,
            "test_boxes": self.test_boxes,
            "bound": self.bound,
        })
    }
}

/// Sum over the lattice edges `(x, x + 1_j)` selected by `keep(x in L, x + 1_j in L)` of
/// `tau_{-x}` of `grad` on that edge (forward) or its reverse, divided by `|L|`.
fn averaged_gradients(
    g: &FunctionTable,
    lambda: &[Site],
    j: usize,
    reversed: bool,
    keep: impl Fn(bool, bool) -> bool,
    omega: &ShiftInvariantForm,
) -> FunctionTable {
    let phi = omega.interaction();
    let u = Site::unit(j);
    let inside = |s: Site| lambda.binary_search(&s).is_ok();
    let mut starts: Vec<Site> = lambda.iter().flat_map(|&s| [s, s - u]).collect();
    starts.sort();
    starts.dedup();
    let mut out = FunctionTable::zero(phi.num_states()).extend(&[Site::ORIGIN, u]);
    for x in starts {
        if !keep(inside(x), inside(x + u)) {
            continue;
        }
        let grad = if reversed { g.move_gradient(phi, x + u, x) } else { g.move_gradient(phi, x, x + u) };
        out.add_scaled(&grad.translate(Site::ORIGIN - x), 1.0);
    }
    out.scale(1.0 / lambda.len() as f64)
}

/// Direct evaluation of `(d Psi_n)_e` at a configuration given on `window` by `eta`,
/// for `e = (0, 1_j)` or its reverse.
fn direct_value(g: &FunctionTable, lambda: &[Site], window: &[Site], eta: &[usize], j: usize, reversed: bool, omega: &ShiftInvariantForm) -> f64 {
    let phi = omega.interaction();
    let u = Site::unit(j);
    let (o, t) = if reversed { (u, Site::ORIGIN) } else { (Site::ORIGIN, u) };
    let at = |cfg: &[usize], s: Site| window.binary_search(&s).map_or(0, |i| cfg[i]);
    let mut moved = eta.to_vec();
    let (io, it) = (window.binary_search(&o).unwrap(), window.binary_search(&t).unwrap());
    let (a, b) = phi.apply(eta[io], eta[it]);
    moved[io] = a;
    moved[it] = b;
    let mut shifts: Vec<Site> = lambda.iter().flat_map(|&s| [o - s, t - s]).collect();
    shifts.sort();
    shifts.dedup();
    let total: f64 = shifts
        .iter()
        .map(|&z| g.eval(|s| at(&moved, s + z)) - g.eval(|s| at(eta, s + z)))
        .sum();
    total / lambda.len() as f64
}

/// Builds `Psi_n`, `omega_n` and the boundary forms on `Lambda_n = [-n, n]^d` with
/// `Sigma_n = [-2n, 2n]^d`, and checks `d Psi_n = omega_n + omega_dagger` and the boundary bound.
/// `constant` defaults to the boundary-differential constant scanned up to `K_|Sigma_n|`.
pub fn psi_sequence(
    omega: &ShiftInvariantForm,
    n: usize,
    nu: &SiteMeasure,
    constant: Option<f64>,
    budget: u128,
) -> Result<PsiSequenceStep> {
    if n == 0 {
        return Err(Error::Invalid("n must be at least 1".into()));
    }
    let d = omega.dim();
    let phi = omega.interaction();
    let ns = phi.num_states();
    let lambda = box_sites(d, n);
    let sigma = box_sites(d, 2 * n);
    let configs = |len: usize| (ns as u128).checked_pow(len as u32).unwrap_or(u128::MAX);
    if configs(sigma.len()) > budget {
        return Err(Error::BudgetExceeded { needed: configs(sigma.len()), budget });
    }
    let sigma_loc = Locale::lattice_box(d, 2 * n)?;
    let omega_sigma = project_to_box(omega, &sigma_loc, nu)?;
    let mut f = omega_sigma.solve_potential(CLOSED_TOL)?.f;

    let graph = TransitionGraph::build(phi, &sigma_loc, budget)?;
    let codec = graph.codec();
    let mu: Vec<f64> = (0..codec.size()).map(|c| nu.product(&codec.decode(c))).collect();
    let mut sums = vec![0.0; graph.num_components()];
    let mut mass = vec![0.0; graph.num_components()];
    for (c, v) in f.values().iter().enumerate() {
        sums[graph.component(c)] += mu[c] * v;
        mass[graph.component(c)] += mu[c];
    }
    for (c, v) in f.values_mut().iter_mut().enumerate() {
        *v -= sums[graph.component(c)] / mass[graph.component(c)];
    }

    let g = f.conditional_expectation(&lambda, nu);
    let size = lambda.len() as f64;
    let d_psi = ShiftInvariantForm::new(d, phi, (0..d).map(|j| gamma_differential(&g, j, phi).scale(1.0 / size)).collect())?;
    let interior = |a: bool, b: bool| a && b;
    let leaving = |a: bool, b: bool| a && !b;
    let entering = |a: bool, b: bool| !a && b;
    let omega_n = ShiftInvariantForm::new(d, phi, (0..d).map(|j| averaged_gradients(&g, &lambda, j, false, interior, omega)).collect())?;
    let omega_plus: Vec<FunctionTable> = (0..d).map(|j| averaged_gradients(&g, &lambda, j, false, leaving, omega)).collect();
    let omega_minus: Vec<FunctionTable> = (0..d).map(|j| averaged_gradients(&g, &lambda, j, false, entering, omega)).collect();
    let omega_dagger = ShiftInvariantForm::new(d, phi, omega_plus.iter().zip(&omega_minus).map(|(p, m)| p.add(m)).collect())?;

    // representative tables
    let mut identity_error = d_psi.max_diff(&omega_n.add(&omega_dagger));
    // projections onto boxes containing every window
    let window = {
        let mut w = d_psi.window();
        w.extend(omega_n.window());
        w.extend(omega_dagger.window());
        w.sort();
        w.dedup();
        w
    };
    let reach = window.iter().map(Site::linf).max().unwrap_or(1).max(1) as usize;
    let mut test_boxes = Vec::new();
    for m in [reach, reach + 1] {
        if configs(box_sites(d, m).len()) > budget {
            continue;
        }
        let b = Locale::lattice_box(d, m)?;
        let lhs = project_to_box(&d_psi, &b, nu)?;
        let rhs = project_to_box(&omega_n, &b, nu)?.add(&project_to_box(&omega_dagger, &b, nu)?);
        identity_error = identity_error.max(lhs.max_diff(&rhs));
        test_boxes.push(b.name().to_string());
    }
    // pointwise evaluation of the translation sum on both orientations
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for j in 0..d {
        let w = d_psi.rep(j).sites().to_vec();
        let total = configs(w.len());
        let samples: Vec<Vec<usize>> = if total <= 1 << 16 {
            let t = FunctionTable::zero(ns).extend(&w);
            (0..total as usize).map(|c| t.decode(c)).collect()
        } else {
            (0..POINT_SAMPLES).map(|_| (0..w.len()).map(|_| rng.random_range(0..ns)).collect()).collect()
        };
        let split_fwd = omega_n.rep(j).add(omega_dagger.rep(j)).extend(&w);
        let split_rev = reverse_table(&split_fwd, phi, Site::ORIGIN, Site::unit(j)).extend(&w);
        for eta in &samples {
            for (rev, split) in [(false, &split_fwd), (true, &split_rev)] {
                let direct = direct_value(&g, &lambda, &w, eta, j, rev, omega);
                identity_error = identity_error.max((direct - split.at(eta)).abs());
            }
        }
    }

    // boundary bound
    let constant = match constant {
        Some(c) => c,
        None => dagger_constant(phi, nu, sigma.len(), budget)?,
    };
    let boundary_edges = lambda.iter().map(|s| s.lattice_neighbors(d).filter(|y| lambda.binary_search(y).is_err()).count()).sum::<usize>() as f64;
    let diam = sigma_loc.diameter() as f64;
    let outside = (sigma.len() - lambda.len()) as f64;
    let geometry_factor = (boundary_edges / size).powi(2) * (sigma.len() as f64 / outside) * diam * diam;
    let omega_sp = omega.sp_norm(nu);
    let rhs = constant * geometry_factor * omega_sp * omega_sp;
    let both = |reps: &[FunctionTable], fwd: bool| -> f64 {
        (0..d)
            .map(|j| {
                let r = if fwd {
                    reps[j].clone()
                } else {
                    // the same part on the reverse edge comes from the opposite crossing direction
                    let keep = if std::ptr::eq(reps.as_ptr(), omega_plus.as_ptr()) { entering } else { leaving };
                    averaged_gradients(&g, &lambda, j, true, keep, omega)
                };
                r.norm_sq(nu)
            })
            .fold(0.0, f64::max)
    };
    let plus_norm_sq = both(&omega_plus, true).max(both(&omega_plus, false));
    let minus_norm_sq = both(&omega_minus, true).max(both(&omega_minus, false));
    let dagger_norm_sq = (0..d)
        .flat_map(|j| [false, true].map(|r| omega_dagger.edge_table(Site::ORIGIN, j, r).norm_sq(nu)))
        .fold(0.0, f64::max);
    let potential_dagger_sq = boundary_differential(&f, &sigma_loc, &lambda, phi, nu)?.sp_norm(nu, None).powi(2);
    let potential_dagger_rhs = constant * (sigma.len() as f64 / outside) * diam * diam * omega_sigma.sp_norm(nu, None).powi(2);
    let ok = |lhs: f64, r: f64| lhs <= r * (1.0 + RATIO_SLACK) + 1e-300;
    let pass = ok(plus_norm_sq, rhs) && ok(minus_norm_sq, rhs) && ok(dagger_norm_sq, rhs) && ok(potential_dagger_sq, potential_dagger_rhs);
    let bound = BoundaryBound {
        constant,
        geometry_factor,
        omega_sp,
        rhs,
        plus_norm_sq,
        minus_norm_sq,
        dagger_norm_sq,
        potential_dagger_sq,
        potential_dagger_rhs,
        pass,
    };
    let dagger_sp_norm = omega_dagger.sp_norm(nu);
    Ok(PsiSequenceStep {
        n,
        lambda,
        sigma,
        potential: f,
        summand: g,
        d_psi,
        omega_n,
        omega_dagger,
        omega_plus,
        omega_minus,
        dagger_sp_norm,
        identity_error,
        test_boxes,
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configspace::DEFAULT_BUDGET;
    use crate::interaction::InteractionTable;
    use crate::varadhan::{current_form, gamma_form};

    #[test]
    fn identity_and_bound_for_current() {
        let sep = InteractionTable::sep(1);
        let nu = SiteMeasure::uniform(2);
        let w = current_form(&sep, &[0.0, 1.0], 0, 1).unwrap();
        let c = dagger_constant(&sep, &nu, 5, DEFAULT_BUDGET).unwrap();
        for n in 1..=2 {
            let step = psi_sequence(&w, n, &nu, Some(c), DEFAULT_BUDGET).unwrap();
            assert!(step.identity_error < 1e-10, "n={n}: {}", step.identity_error);
            assert!(step.bound.pass, "{:?}", step.bound);
            assert!(!step.test_boxes.is_empty());
        }
    }

    #[test]
    fn zero_form_gives_zero_parts() {
        let sep = InteractionTable::sep(1);
        let nu = SiteMeasure::uniform(2);
        let step = psi_sequence(&ShiftInvariantForm::zero(1, &sep), 1, &nu, Some(1.0), DEFAULT_BUDGET).unwrap();
        assert!(step.d_psi.max_abs() < 1e-14 && step.omega_dagger.max_abs() < 1e-14 && step.omega_n.max_abs() < 1e-14);
    }

    #[test]
    fn exact_form_has_small_boundary_part() {
        let sep = InteractionTable::sep(1);
        let nu = SiteMeasure::uniform(2);
        let f0 = FunctionTable::single_site(Site::ORIGIN, 2, |s| s as f64).mul(&FunctionTable::single_site(Site::unit(0), 2, |s| s as f64));
        let w = gamma_form(&f0, 1, &sep).unwrap();
        let s1 = psi_sequence(&w, 1, &nu, Some(1.0), DEFAULT_BUDGET).unwrap();
        let s3 = psi_sequence(&w, 3, &nu, Some(1.0), DEFAULT_BUDGET).unwrap();
        assert!(s3.dagger_sp_norm < s1.dagger_sp_norm);
        assert!(s3.dagger_sp_norm < 0.5 * w.sp_norm(&nu));
    }
}
