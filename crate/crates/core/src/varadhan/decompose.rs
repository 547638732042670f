//! Least-squares splitting of a shift-invariant form into the differential of
//! a translation sum of a windowed function plus conserved currents.
//!
//! All functions are expanded in the product basis built from a
//! `nu`-orthonormal basis of functions of one site. Translation sums depend
//! only on the translation class of a labeled support, so the unknowns are
//! the labeled supports fitting in the window modulo translation, and the
//! `L^2(mu)` norm of a residual is the Euclidean norm of its coefficients.

use std::collections::HashMap;

use faer::Mat;
use serde_json::{json, Value};

use super::{closed_on_small_box, current_table, table_to_json, ShiftInvariantForm};
use crate::error::{Error, Result};
use crate::interaction::{is_simple, ConsvBasis, InteractionTable};
use crate::linalg::sym_eigen;
use crate::locale::Site;
use crate::measure::{FunctionTable, SiteMeasure};

/// Relative eigenvalue threshold below which a direction counts as null.
pub const RANK_TOL: f64 = 1e-10;

/// A null direction whose current coefficients exceed this norm makes `a` non-unique.
const CURRENT_NULL_TOL: f64 = 1e-6;

/// A labeled support: sites with nonconstant basis labels, sorted by site.
type Labeled = Vec<(Site, u8)>;

/// Sites `x` with nonnegative coordinates and `|x|_1 < radius`.
pub fn window_sites(d: usize, radius: usize) -> Vec<Site> {
    let mut out = vec![Site::ORIGIN];
    for j in 0..d {
        out = out
            .iter()
            .flat_map(|s| (0..radius as i32).map(move |c| {
                let mut t = *s;
                t.0[j] = c;
                t
            }))
            .collect();
    }
    out.retain(|s| (s.l1() as usize) < radius);
    out.sort();
    out
}

/// A `nu`-orthonormal basis `psi_0 = 1, psi_1, ..` of functions of one site.
#[derive(Clone, Debug)]
pub struct OrthonormalBasis {
    weights: Vec<f64>,
    psi: Vec<Vec<f64>>,
}

impl OrthonormalBasis {
    /// Gram-Schmidt applied to `1, 1_{s=1}, .., 1_{s=n-1}`.
    pub fn new(nu: &SiteMeasure) -> Self {
        let n = nu.nstates();
        let w = nu.weights().to_vec();
        let inner = |a: &[f64], b: &[f64]| -> f64 { (0..n).map(|s| w[s] * a[s] * b[s]).sum() };
        let mut psi: Vec<Vec<f64>> = Vec::with_capacity(n);
        for k in 0..n {
            let mut v: Vec<f64> = (0..n).map(|s| if k == 0 || s == k { 1.0 } else { 0.0 }).collect();
            for p in &psi {
                let c = inner(&v, p);
                v.iter_mut().zip(p).for_each(|(x, y)| *x -= c * y);
            }
            let norm = inner(&v, &v).sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            psi.push(v);
        }
        Self { weights: w, psi }
    }

    pub fn nstates(&self) -> usize {
        self.psi.len()
    }

    pub fn psi(&self, k: usize) -> &[f64] {
        &self.psi[k]
    }

    /// Coefficients on the product basis, indexed by label code over the same sites.
    pub fn analysis(&self, f: &FunctionTable) -> Vec<f64> {
        let n = self.nstates();
        let m: Vec<Vec<f64>> = (0..n).map(|b| (0..n).map(|s| self.weights[s] * self.psi[b][s]).collect()).collect();
        transform(f.values(), f.sites().len(), n, &m)
    }

    /// The function with the given label-code coefficients over `sites`.
    pub fn synthesis(&self, sites: &[Site], coeffs: &[f64]) -> FunctionTable {
        let n = self.nstates();
        let m: Vec<Vec<f64>> = (0..n).map(|s| (0..n).map(|b| self.psi[b][s]).collect()).collect();
        FunctionTable::new(sites.to_vec(), n, transform(coeffs, sites.len(), n, &m))
    }
}

/// Applies `m` (`out[b] = sum_s m[b][s] in[s]`) along every axis of a dense tensor.
fn transform(values: &[f64], len: usize, n: usize, m: &[Vec<f64>]) -> Vec<f64> {
    let mut cur = values.to_vec();
    let mut buf = vec![0.0; n];
    for axis in 0..len {
        let stride = n.pow((len - 1 - axis) as u32);
        let block = stride * n;
        for base in (0..cur.len()).step_by(block) {
            for k in 0..stride {
                for (b, out) in buf.iter_mut().enumerate() {
                    *out = (0..n).map(|s| m[b][s] * cur[base + s * stride + k]).sum();
                }
                for (b, v) in buf.iter().enumerate() {
                    cur[base + b * stride + k] = *v;
                }
            }
        }
    }
    cur
}

fn decode_labels(sites: &[Site], n: usize, mut code: usize) -> Labeled {
    let mut out = Vec::new();
    for &s in sites.iter().rev() {
        let l = code % n;
        code /= n;
        if l != 0 {
            out.push((s, l as u8));
        }
    }
    out.reverse();
    out
}

fn canonical(a: &Labeled, d: usize) -> bool {
    (0..d).all(|j| a.iter().map(|(s, _)| s.coord(j)).min() == Some(0))
}

/// Nonempty labeled supports inside `window` that are the least translate of their class.
fn shapes(window: &[Site], n: usize, d: usize) -> Vec<Labeled> {
    let total = n.pow(window.len() as u32);
    (1..total).map(|c| decode_labels(window, n, c)).filter(|a| canonical(a, d)).collect()
}

#[derive(Clone, Debug)]
pub struct DecompositionResult {
    /// `a[i][j]`: coefficient of the current of the `i`-th conserved quantity in direction `j`.
    pub a: Vec<Vec<f64>>,
    /// Mean-zero potential on the window; its translation sum carries the exact part.
    pub f: FunctionTable,
    /// `||omega_{e_j} - (d Gamma_f)_{e_j} - sum_i a_ij c^{ij}||_mu` per direction.
    pub residuals: Vec<f64>,
    pub radius: usize,
    pub rank: usize,
    pub gauge_dim: usize,
    pub gauge_note: String,
    pub warnings: Vec<String>,
}

impl DecompositionResult {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn to_json(&self, d: usize) -> Value {
        json!({
            "a": self.a,
            "residuals": self.residuals,
            "radius": self.radius,
            "rank": self.rank,
            "gauge_dim": self.gauge_dim,
            "gauge_note": self.gauge_note,
            "warnings": self.warnings,
            "f": table_to_json(&self.f, d),
        })
    }
}

/// The least-squares system for one interaction, measure, dimension and
/// window radius, factorized once and reused across inputs.
pub struct Decomposer {
    phi: InteractionTable,
    nu: SiteMeasure,
    basis: OrthonormalBasis,
    d: usize,
    radius: usize,
    ncons: usize,
    window: Vec<Site>,
    shapes: Vec<Labeled>,
    rows: HashMap<(usize, Labeled), usize>,
    row_dir: Vec<usize>,
    row_entries: Vec<Vec<(usize, f64)>>,
    values: Vec<f64>,
    vectors: Mat<f64>,
    cutoff: f64,
    rank: usize,
    current_null: f64,
}

impl Decomposer {
    pub fn new(phi: &InteractionTable, consv: &ConsvBasis, nu: &SiteMeasure, d: usize, radius: usize) -> Result<Self> {
        super::check_dim(d)?;
        if radius == 0 {
            return Err(Error::Invalid("window radius must be at least 1".into()));
        }
        if nu.nstates() != phi.num_states() {
            return Err(Error::Invalid("measure and interaction disagree on the number of states".into()));
        }
        let n = phi.num_states();
        let basis = OrthonormalBasis::new(nu);
        let window = window_sites(d, radius);
        let shapes = shapes(&window, n, d);
        let ncons = consv.dim();
        let ncols = shapes.len() + ncons * d;

        // coefficients of grad_{(o,t)} (psi_p(eta_o) psi_q(eta_t)) on psi_a(eta_o) psi_b(eta_t)
        let grad = |p: usize, q: usize| -> Vec<f64> {
            let t = FunctionTable::from_fn(&[Site::ORIGIN, Site::unit(0)], n, |s| {
                let (s0, s1) = phi.apply(s[0], s[1]);
                basis.psi(p)[s0] * basis.psi(q)[s1] - basis.psi(p)[s[0]] * basis.psi(q)[s[1]]
            });
            basis.analysis(&t)
        };
        let grads: Vec<Vec<Vec<f64>>> = (0..n).map(|p| (0..n).map(|q| grad(p, q)).collect()).collect();

        let mut rows: HashMap<(usize, Labeled), usize> = HashMap::new();
        let mut row_dir = Vec::new();
        let mut row_entries: Vec<Vec<(usize, f64)>> = Vec::new();
        let mut push = |rows: &mut HashMap<(usize, Labeled), usize>, j: usize, key: Labeled, col: usize, v: f64| {
            let r = *rows.entry((j, key)).or_insert_with(|| {
                row_dir.push(j);
                row_entries.push(Vec::new());
                row_dir.len() - 1
            });
            match row_entries[r].iter_mut().find(|(c, _)| *c == col) {
                Some(entry) => entry.1 += v,
                None => row_entries[r].push((col, v)),
            }
        };

        for (col, shape) in shapes.iter().enumerate() {
            for j in 0..d {
                let (o, t) = (Site::ORIGIN, Site::unit(j));
                let mut shifts: Vec<Site> = shape.iter().flat_map(|&(s, _)| [o - s, t - s]).collect();
                shifts.sort();
                shifts.dedup();
                for x in shifts {
                    let moved: Labeled = shape.iter().map(|&(s, l)| (s + x, l)).collect();
                    let label_at = |y: Site| moved.iter().find(|(s, _)| *s == y).map_or(0, |&(_, l)| l as usize);
                    let (p, q) = (label_at(o), label_at(t));
                    let rest: Labeled = moved.iter().copied().filter(|(s, _)| *s != o && *s != t).collect();
                    for a in 0..n {
                        for b in 0..n {
                            let v = grads[p][q][a * n + b];
                            if v.abs() < 1e-14 {
                                continue;
                            }
                            let mut key = rest.clone();
                            if a != 0 {
                                key.push((o, a as u8));
                            }
                            if b != 0 {
                                key.push((t, b as u8));
                            }
                            key.sort();
                            push(&mut rows, j, key, col, v);
                        }
                    }
                }
            }
        }
        for i in 0..ncons {
            let xi = consv.vector_f64(i);
            for j in 0..d {
                let col = shapes.len() + i * d + j;
                let c = current_table(phi, &xi, j);
                for (code, v) in basis.analysis(&c).into_iter().enumerate() {
                    if v.abs() >= 1e-14 {
                        push(&mut rows, j, decode_labels(c.sites(), n, code), col, v);
                    }
                }
            }
        }

        let mut normal = Mat::<f64>::zeros(ncols, ncols);
        for entries in &row_entries {
            for &(c1, v1) in entries {
                for &(c2, v2) in entries {
                    normal[(c1, c2)] += v1 * v2;
                }
            }
        }
        let eig = sym_eigen(&normal);
        let top = eig.values.last().copied().unwrap_or(0.0).max(0.0);
        let cutoff = RANK_TOL * top.max(f64::MIN_POSITIVE);
        let rank = eig.values.iter().filter(|&&v| v > cutoff).count();
        let current_null = (0..ncols)
            .filter(|&k| eig.values[k] <= cutoff)
            .map(|k| (shapes.len()..ncols).map(|r| eig.vectors[(r, k)].powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        Ok(Self {
            phi: phi.clone(),
            nu: nu.clone(),
            basis,
            d,
            radius,
            ncons,
            window,
            shapes,
            rows,
            row_dir,
            row_entries,
            values: eig.values,
            vectors: eig.vectors,
            cutoff,
            rank,
            current_null,
        })
    }

    pub fn num_unknowns(&self) -> usize {
        self.shapes.len() + self.ncons * self.d
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn window(&self) -> &[Site] {
        &self.window
    }

    /// Pseudo-inverse of the normal matrix applied to `v`.
    fn pinv(&self, v: &[f64]) -> Vec<f64> {
        let m = v.len();
        let rhs = Mat::from_fn(m, 1, |i, _| v[i]);
        let mut y = self.vectors.transpose() * &rhs;
        for k in 0..m {
            y[(k, 0)] = if self.values[k] > self.cutoff { y[(k, 0)] / self.values[k] } else { 0.0 };
        }
        let x = &self.vectors * &y;
        (0..m).map(|i| x[(i, 0)]).collect()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.row_entries.iter().map(|e| e.iter().map(|&(c, v)| v * x[c]).sum()).collect()
    }

    fn apply_transpose(&self, r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_unknowns()];
        for (entries, &rv) in self.row_entries.iter().zip(r) {
            for &(c, v) in entries {
                out[c] += v * rv;
            }
        }
        out
    }

    pub fn decompose(&self, omega: &ShiftInvariantForm) -> Result<DecompositionResult> {
        if omega.dim() != self.d || omega.interaction().num_states() != self.phi.num_states() {
            return Err(Error::Invalid("form does not match the decomposer's dimension or state space".into()));
        }
        if self.current_null > CURRENT_NULL_TOL {
            return Err(Error::IllConditioned(format!(
                "a null direction of the least-squares system moves the current coefficients (norm {:.3e})",
                self.current_null
            )));
        }
        if !closed_on_small_box(omega, &self.nu)? {
            return Err(Error::NotClosed("projection onto a small box is not closed".into()));
        }
        let n = self.phi.num_states();
        let mut b = vec![0.0; self.row_dir.len()];
        let mut outside = vec![0.0; self.d];
        for j in 0..self.d {
            let rep = omega.rep(j);
            let coeffs = self.basis.analysis(rep);
            let scale = coeffs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (code, v) in coeffs.into_iter().enumerate() {
                if v.abs() <= 1e-15 * scale {
                    continue;
                }
                match self.rows.get(&(j, decode_labels(rep.sites(), n, code))) {
                    Some(&r) => b[r] += v,
                    None => outside[j] += v * v,
                }
            }
        }
        let mut x = self.pinv(&self.apply_transpose(&b));
        for _ in 0..2 {
            let ax = self.apply(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(bv, av)| bv - av).collect();
            let dx = self.pinv(&self.apply_transpose(&r));
            x.iter_mut().zip(&dx).for_each(|(xv, dv)| *xv += dv);
        }
        let ax = self.apply(&x);
        let mut res = outside;
        for (r, (&bv, &av)) in b.iter().zip(&ax).enumerate() {
            res[self.row_dir[r]] += (bv - av).powi(2);
        }
        let residuals = res.into_iter().map(f64::sqrt).collect();

        let ns = self.shapes.len();
        let a = (0..self.ncons).map(|i| (0..self.d).map(|j| x[ns + i * self.d + j]).collect()).collect();
        let mut coeffs = vec![0.0; n.pow(self.window.len() as u32)];
        for (shape, &v) in self.shapes.iter().zip(&x) {
            let code = self.window.iter().fold(0usize, |acc, s| {
                acc * n + shape.iter().find(|(t, _)| t == s).map_or(0, |&(_, l)| l as usize)
            });
            coeffs[code] = v;
        }
        let f = self.basis.synthesis(&self.window, &coeffs);
        let gauge_dim = self.num_unknowns() - self.rank;
        let mut warnings = Vec::new();
        if self.d == 1 && !is_simple(&self.phi) {
            warnings.push("interaction is not simple; uniqueness of the current coefficients in d=1 is not guaranteed".into());
        }
        Ok(DecompositionResult {
            a,
            f,
            residuals,
            radius: self.radius,
            rank: self.rank,
            gauge_dim,
            gauge_note: format!(
                "minimum-norm potential; {gauge_dim} null directions of the translation-sum differential were fixed to zero"
            ),
            warnings,
        })
    }
}

/// One-shot decomposition on the window of the given radius.
pub fn decompose(omega: &ShiftInvariantForm, basis: &ConsvBasis, radius: usize, nu: &SiteMeasure) -> Result<DecompositionResult> {
    Decomposer::new(omega.interaction(), basis, nu, omega.dim(), radius)?.decompose(omega)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interaction::conserved_basis;
    use crate::varadhan::{current_form, gamma_form};

    #[test]
    fn window_shapes() {
        assert_eq!(window_sites(1, 3), vec![Site::lattice(&[0]), Site::lattice(&[1]), Site::lattice(&[2])]);
        assert_eq!(window_sites(2, 2).len(), 3);
        assert_eq!(window_sites(2, 3).len(), 6);
        // d=1, two states, window {0,1}: shapes {0} and {0,1}
        assert_eq!(shapes(&window_sites(1, 2), 2, 1).len(), 2);
    }

    #[test]
    fn basis_is_orthonormal_and_invertible() {
        let nu = SiteMeasure::new(vec![0.5, 0.25, 0.25]).unwrap();
        let b = OrthonormalBasis::new(&nu);
        for p in 0..3 {
            for q in 0..3 {
                let ip: f64 = (0..3).map(|s| nu.weight(s) * b.psi(p)[s] * b.psi(q)[s]).sum();
                assert!((ip - if p == q { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        let sites = [Site::ORIGIN, Site::unit(0)];
        let f = FunctionTable::from_fn(&sites, 3, |s| (s[0] as f64).sin() + (s[1] * s[0]) as f64);
        let back = b.synthesis(f.sites(), &b.analysis(&f));
        assert!(back.max_diff(&f) < 1e-12);
        let norm: f64 = b.analysis(&f).iter().map(|c| c * c).sum();
        assert!((norm - f.norm_sq(&nu)).abs() < 1e-12);
    }

    #[test]
    fn recovers_current_and_zero() {
        let gep = InteractionTable::gep(2);
        let basis = conserved_basis(&gep);
        let nu = SiteMeasure::uniform(3);
        let xi = basis.vector_f64(0);
        let w = current_form(&gep, &xi, 0, 1).unwrap();
        let r = decompose(&w, &basis, 2, &nu).unwrap();
        assert!((r.a[0][0] - 1.0).abs() < 1e-10);
        assert!(r.f.max_abs() < 1e-9);
        assert!(r.max_residual() < 1e-10);
        let z = decompose(&ShiftInvariantForm::zero(1, &gep), &basis, 2, &nu).unwrap();
        assert!(z.a[0][0].abs() < 1e-14 && z.f.max_abs() < 1e-14);
    }

    #[test]
    fn recovers_exact_part_in_two_dimensions() {
        let sep = InteractionTable::sep(2);
        let basis = conserved_basis(&sep);
        let nu = SiteMeasure::geometric(3, 0.5).unwrap();
        let window = window_sites(2, 2);
        let f0 = FunctionTable::from_fn(&window, 3, |s| ((s[0] * 7 + s[1] * 3 + s[2]) as f64 * 0.37).sin());
        let omega = gamma_form(&f0, 2, &sep).unwrap();
        let r = decompose(&omega, &basis, 2, &nu).unwrap();
        assert!(r.a.iter().flatten().all(|v| v.abs() < 1e-9), "{:?}", r.a);
        assert!(r.max_residual() < 1e-10);
        let rebuilt = gamma_form(&r.f, 2, &sep).unwrap();
        assert!(rebuilt.max_diff(&omega) < 1e-9);
    }

    #[test]
    fn rejects_non_closed_and_degenerate() {
        let sep = InteractionTable::sep(1);
        let nu = SiteMeasure::uniform(2);
        let basis = conserved_basis(&sep);
        let s = |x| Site::lattice(&[x]);
        let bumped = FunctionTable::from_fn(&[s(0), s(1), s(2)], 2, |v| if v == [0, 1, 0] { 0.5 } else { 0.0 });
        let w = ShiftInvariantForm::new(1, &sep, vec![bumped]).unwrap();
        assert!(matches!(decompose(&w, &basis, 2, &nu), Err(Error::NotClosed(_))));
        let id = InteractionTable::identity(2);
        let zero = ShiftInvariantForm::zero(1, &id);
        assert!(matches!(decompose(&zero, &conserved_basis(&id), 1, &nu), Err(Error::IllConditioned(_))));
    }
}
