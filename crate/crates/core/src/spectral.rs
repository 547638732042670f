//! Spectral gaps of the transition Dirichlet form and numerical checks of the
//! moving-particle, boundary, gap and boundary-differential inequalities with
//! their explicit constants.

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::configspace::{irreducibly_quantified_check, Codec, TransitionGraph};
use crate::error::{Error, Result};
use crate::forms::boundary_differential;
use crate::interaction::InteractionTable;
use crate::linalg::{eigen_residual, sym_eigen};
use crate::locale::{Locale, Site};
use crate::measure::{c_phi_nu, FunctionTable, Rate, SiteMeasure};

/// Slack allowed on a ratio before an inequality check fails.
pub const RATIO_SLACK: f64 = 1e-9;

/// Configurations of one locale with their product weights.
struct Space<'a> {
    locale: &'a Locale,
    phi: &'a InteractionTable,
    graph: TransitionGraph,
    mu: Vec<f64>,
}

impl<'a> Space<'a> {
    fn new(locale: &'a Locale, phi: &'a InteractionTable, nu: &SiteMeasure, budget: u128) -> Result<Self> {
        let graph = TransitionGraph::build(phi, locale, budget)?;
        let codec = graph.codec();
        let mu = (0..codec.size()).map(|c| nu.product(&codec.decode(c))).collect();
        Ok(Self { locale, phi, graph, mu })
    }

    fn codec(&self) -> &Codec {
        self.graph.codec()
    }

    fn size(&self) -> usize {
        self.mu.len()
    }

    fn energy(&self, f: &[f64], map: impl Fn(usize) -> usize) -> f64 {
        (0..self.size()).map(|c| self.mu[c] * (f[map(c)] - f[c]).powi(2)).sum()
    }

    fn edge_energy(&self, f: &[f64], e: usize) -> f64 {
        self.energy(f, |c| self.graph.target(c, e))
    }

    fn move_energy(&self, f: &[f64], x: usize, y: usize) -> f64 {
        if x == y {
            return 0.0;
        }
        let (o, t) = (x, y);
        self.energy(f, |c| self.codec().apply_pair(self.phi, c, o, t))
    }

    fn sp_energy(&self, f: &[f64]) -> f64 {
        (0..self.locale.num_edges()).map(|e| self.edge_energy(f, e)).fold(0.0, f64::max)
    }

    fn norm_sq(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.mu).map(|(v, m)| m * v * v).sum()
    }

    /// Subtracts the weighted mean on every transition component.
    fn project_off_kernel(&self, f: &mut [f64]) {
        let k = self.graph.num_components();
        let mut sums = vec![0.0; k];
        let mut mass = vec![0.0; k];
        for c in 0..self.size() {
            let j = self.graph.component(c);
            sums[j] += self.mu[c] * f[c];
            mass[j] += self.mu[c];
        }
        for (c, v) in f.iter_mut().enumerate() {
            let j = self.graph.component(c);
            *v -= sums[j] / mass[j];
        }
    }

    fn random(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut f: Vec<f64> = (0..self.size()).map(|_| rng.sample(StandardNormal)).collect();
        let mean: f64 = f.iter().zip(&self.mu).map(|(v, m)| v * m).sum();
        f.iter_mut().for_each(|v| *v -= mean);
        f
    }

    fn table(&self, f: Vec<f64>) -> FunctionTable {
        FunctionTable::new(self.locale.sites().to_vec(), self.phi.num_states(), f)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GapReport {
    pub locale: String,
    pub vertices: usize,
    /// Largest `C` with `||f||^2 <= C^-1 * sum_e ||grad_e f||^2` off the kernel; infinite when degenerate.
    pub gap: f64,
    pub normalized: f64,
    pub residual: f64,
    /// True when every transition component is a single configuration.
    pub degenerate: bool,
    #[serde(skip)]
    pub minimizer: Option<FunctionTable>,
}

/// The spectral gap of the locale's Dirichlet form, componentwise, with the
/// trivial rate unless `rate` is given.
pub fn spectral_gap(
    locale: &Locale,
    phi: &InteractionTable,
    nu: &SiteMeasure,
    rate: Option<&Rate>,
    budget: u128,
) -> Result<GapReport> {
    let space = Space::new(locale, phi, nu, budget)?;
    let rate_vals: Option<Vec<Vec<f64>>> = rate.map(|r| {
        (0..locale.num_edges())
            .map(|e| r.table(e).extend(locale.sites()).values().to_vec())
            .collect()
    });
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for comp in space.graph.components() {
        let m = comp.len();
        if m < 2 {
            continue;
        }
        let pos = |c: usize| comp.binary_search(&c).unwrap();
        let mut d = Mat::<f64>::zeros(m, m);
        for (i, &c) in comp.iter().enumerate() {
            for e in 0..locale.num_edges() {
                let c2 = space.graph.target(c, e);
                if c2 == c {
                    continue;
                }
                let r = rate_vals.as_ref().map_or(1.0, |rv| rv[e][c]);
                let w = r * space.mu[c];
                let j = pos(c2);
                d[(i, i)] += w;
                d[(j, j)] += w;
                d[(i, j)] -= w;
                d[(j, i)] -= w;
            }
        }
        let s: Vec<f64> = comp.iter().map(|&c| space.mu[c].sqrt()).collect();
        let a = Mat::from_fn(m, m, |i, j| d[(i, j)] / (s[i] * s[j]));
        let eig = sym_eigen(&a);
        let lambda = eig.values[1];
        if best.as_ref().is_none_or(|b| lambda < b.0) {
            let v: Vec<f64> = (0..m).map(|i| eig.vectors[(i, 1)]).collect();
            let residual = eigen_residual(&a, &v, lambda);
            let mut f = vec![0.0; space.size()];
            for (i, &c) in comp.iter().enumerate() {
                f[c] = v[i] / s[i];
            }
            best = Some((lambda, residual, f));
        }
    }
    let n = locale.num_vertices();
    Ok(match best {
        Some((gap, residual, f)) => GapReport {
            locale: locale.name().to_string(),
            vertices: n,
            gap,
            normalized: gap / n as f64,
            residual,
            degenerate: false,
            minimizer: Some(space.table(f)),
        },
        None => GapReport {
            locale: locale.name().to_string(),
            vertices: n,
            gap: f64::INFINITY,
            normalized: f64::INFINITY,
            residual: 0.0,
            degenerate: true,
            minimizer: None,
        },
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GapScanRow {
    pub n: usize,
    pub gap: f64,
    pub normalized: f64,
    pub running_min: f64,
    pub residual: f64,
}

/// Normalized gaps on complete locales `K_n` for the listed sizes.
pub fn uniform_gap_scan(phi: &InteractionTable, nu: &SiteMeasure, sizes: &[usize], budget: u128) -> Result<Vec<GapScanRow>> {
    let mut rows = Vec::new();
    let mut running = f64::INFINITY;
    for &n in sizes {
        let k = Locale::complete(n)?;
        let q = irreducibly_quantified_check(phi, &k, budget)?;
        if !q.connected {
            return Err(Error::NotIrreduciblyQuantified(k.name().to_string()));
        }
        let g = spectral_gap(&k, phi, nu, None, budget)?;
        running = running.min(g.normalized);
        rows.push(GapScanRow { n, gap: g.gap, normalized: g.normalized, running_min: running, residual: g.residual });
    }
    Ok(rows)
}

/// Quadratic form `f -> E[(f(T eta) - f(eta))^2]` on `S^2` for a configuration map `T`.
fn pair_form(n: usize, nu: &SiteMeasure, map: impl Fn(usize, usize) -> (usize, usize)) -> Mat<f64> {
    let mut q = Mat::<f64>::zeros(n * n, n * n);
    for a in 0..n {
        for b in 0..n {
            let i = a * n + b;
            let (a2, b2) = map(a, b);
            let j = a2 * n + b2;
            if i == j {
                continue;
            }
            let w = nu.weight(a) * nu.weight(b);
            q[(i, i)] += w;
            q[(j, j)] += w;
            q[(i, j)] -= w;
            q[(j, i)] -= w;
        }
    }
    q
}

/// Sup over functions on two sites of the exchange energy divided by the move energy.
pub fn estimate_ctilde(phi: &InteractionTable, nu: &SiteMeasure) -> Result<f64> {
    let n = phi.num_states();
    let a = pair_form(n, nu, |x, y| (y, x));
    let b = pair_form(n, nu, |x, y| phi.apply(x, y));
    let eb = sym_eigen(&b);
    let top = eb.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = top.max(a.norm_max()).max(f64::MIN_POSITIVE);
    let tol = 1e-10 * scale;
    let dim = n * n;
    let (range, null): (Vec<usize>, Vec<usize>) = (0..dim).partition(|&k| eb.values[k] > tol);
    let col = |k: usize| -> Vec<f64> { (0..dim).map(|i| eb.vectors[(i, k)]).collect() };
    let quad = |u: &[f64], v: &[f64]| -> f64 {
        (0..dim).map(|i| u[i] * (0..dim).map(|j| a[(i, j)] * v[j]).sum::<f64>()).sum()
    };
    for &k in &null {
        let v = col(k);
        if quad(&v, &v) > tol {
            return Err(Error::DegenerateDenominator);
        }
    }
    if range.is_empty() {
        return Ok(0.0);
    }
    let vs: Vec<Vec<f64>> = range.iter().map(|&k| {
        let s = eb.values[k].sqrt();
        col(k).into_iter().map(|x| x / s).collect()
    }).collect();
    let r = range.len();
    let m = Mat::from_fn(r, r, |i, j| quad(&vs[i], &vs[j]));
    Ok(sym_eigen(&m).values[r - 1])
}

#[derive(Clone, Debug, Serialize)]
pub struct InequalityReport {
    pub name: String,
    pub constant: f64,
    pub worst_ratio: f64,
    pub trials: usize,
    pub pass: bool,
}

impl InequalityReport {
    fn new(name: &str, constant: f64, worst: f64, trials: usize) -> Self {
        Self { name: name.into(), constant, worst_ratio: worst, trials, pass: worst <= 1.0 + RATIO_SLACK }
    }
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs <= 1e-14 * rhs.abs().max(1.0) && rhs <= 0.0 {
        0.0
    } else if rhs <= 0.0 {
        f64::INFINITY
    } else {
        lhs / rhs
    }
}

/// Constants entering the inequality checks for one interaction and measure.
#[derive(Clone, Debug, Serialize)]
pub struct Constants {
    pub c_phi_nu: f64,
    pub ctilde: f64,
    /// `6 max(1, ctilde)`
    pub c_mp: f64,
    /// `3 (c_phi_nu |S|^2 + |S|)`
    pub c_be: f64,
}

impl Constants {
    pub fn new(phi: &InteractionTable, nu: &SiteMeasure) -> Result<Self> {
        let ctilde = estimate_ctilde(phi, nu)?;
        let c = c_phi_nu(phi, nu);
        let s = phi.num_states() as f64;
        Ok(Self { c_phi_nu: c, ctilde, c_mp: 6.0 * ctilde.max(1.0), c_be: 3.0 * (c * s * s + s) })
    }
}

/// The smallest normalized gap over `K_2 .. K_max(5, largest)`.
pub fn uniform_gap_constant(phi: &InteractionTable, nu: &SiteMeasure, largest: usize, budget: u128) -> Result<f64> {
    let sizes: Vec<usize> = (2..=largest.max(5)).collect();
    let rows = uniform_gap_scan(phi, nu, &sizes, budget)?;
    Ok(rows.last().map_or(f64::INFINITY, |r| r.running_min))
}

/// `||grad_{x->y} f||^2 <= C_MP diam^2 ||df||_sp^2` over random `f` and all vertex pairs.
pub fn verify_mpl(
    locale: &Locale,
    phi: &InteractionTable,
    nu: &SiteMeasure,
    trials: usize,
    seed: u64,
    budget: u128,
) -> Result<InequalityReport> {
    let k = Constants::new(phi, nu)?;
    let space = Space::new(locale, phi, nu, budget)?;
    let diam = locale.diameter() as f64;
    let n = locale.num_vertices();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let f = space.random(&mut rng);
        let rhs = k.c_mp * diam * diam * space.sp_energy(&f);
        for x in 0..n {
            for y in 0..n {
                worst = worst.max(ratio(space.move_energy(&f, x, y), rhs));
            }
        }
    }
    Ok(InequalityReport::new("moving particle", k.c_mp, worst, trials))
}

fn vertex_indices(locale: &Locale, sites: &[Site]) -> Result<Vec<usize>> {
    let mut v: Vec<usize> = sites
        .iter()
        .map(|s| locale.site_index(*s).ok_or_else(|| Error::Invalid(format!("site {s} not in {}", locale.name()))))
        .collect::<Result<_>>()?;
    v.sort_unstable();
    v.dedup();
    Ok(v)
}

/// Boundary estimate for `pi^L h` on every edge leaving `lambda`, together with
/// the reflected bound for the reverse edge.
pub fn verify_boundary_estimate(
    sigma: &Locale,
    lambda: &[Site],
    phi: &InteractionTable,
    nu: &SiteMeasure,
    trials: usize,
    seed: u64,
    budget: u128,
) -> Result<InequalityReport> {
    let k = Constants::new(phi, nu)?;
    let space = Space::new(sigma, phi, nu, budget)?;
    let inside = vertex_indices(sigma, lambda)?;
    let outside: Vec<usize> = (0..sigma.num_vertices()).filter(|v| inside.binary_search(v).is_err()).collect();
    let lam_sites: Vec<Site> = inside.iter().map(|&v| sigma.sites()[v]).collect();
    let boundary = sigma.boundary(&inside);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let factor = if outside.is_empty() { 0.0 } else { k.c_be / outside.len() as f64 };
    for _ in 0..trials {
        let h = space.random(&mut rng);
        let g = space
            .table(h.clone())
            .conditional_expectation(&lam_sites, nu)
            .extend(sigma.sites());
        let norm = space.norm_sq(&h);
        for &e in &boundary {
            let (o, _) = sigma.edge(e);
            let out_moves: f64 = outside.iter().map(|&y| space.move_energy(&h, o, y)).sum();
            let in_moves: f64 = outside.iter().map(|&x| space.move_energy(&h, x, o)).sum();
            worst = worst.max(ratio(space.edge_energy(g.values(), e), factor * (norm + out_moves)));
            worst = worst.max(ratio(space.edge_energy(g.values(), sigma.reverse(e)), factor * (norm + in_moves)));
        }
    }
    Ok(InequalityReport::new("boundary estimate", k.c_be, worst, trials))
}

/// `||h||_Sigma^2 <= C_SG^-1 C_MP |Sigma| diam^2 ||dh||_sp^2`.
pub fn verify_sigma_gap_bound(
    sigma: &Locale,
    phi: &InteractionTable,
    nu: &SiteMeasure,
    trials: usize,
    seed: u64,
    budget: u128,
) -> Result<InequalityReport> {
    let k = Constants::new(phi, nu)?;
    let c_sg = uniform_gap_constant(phi, nu, sigma.num_vertices(), budget)?;
    let space = Space::new(sigma, phi, nu, budget)?;
    let diam = sigma.diameter() as f64;
    let size = sigma.num_vertices() as f64;
    let constant = k.c_mp / c_sg;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let mut h = space.random(&mut rng);
        let rhs = constant * size * diam * diam * space.sp_energy(&h);
        space.project_off_kernel(&mut h);
        worst = worst.max(ratio(space.norm_sq(&h), rhs));
    }
    Ok(InequalityReport::new("sigma gap bound", constant, worst, trials))
}

/// `||d^dagger_L h||_sp^2 <= C |Sigma| / |Sigma \ L| diam^2 ||dh||_sp^2` for `h` orthogonal to the kernel,
/// with `C = C_BE C_MP (C_SG^-1 + 1)`.
pub fn verify_dagger_bound(
    sigma: &Locale,
    lambda: &[Site],
    phi: &InteractionTable,
    nu: &SiteMeasure,
    trials: usize,
    seed: u64,
    budget: u128,
) -> Result<InequalityReport> {
    let constant = dagger_constant(phi, nu, sigma.num_vertices(), budget)?;
    let space = Space::new(sigma, phi, nu, budget)?;
    let inside = vertex_indices(sigma, lambda)?;
    let lam_sites: Vec<Site> = inside.iter().map(|&v| sigma.sites()[v]).collect();
    let outside = sigma.num_vertices() - inside.len();
    let diam = sigma.diameter() as f64;
    let size = sigma.num_vertices() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let mut h = space.random(&mut rng);
        space.project_off_kernel(&mut h);
        let dagger = boundary_differential(&space.table(h.clone()), sigma, &lam_sites, phi, nu)?;
        let lhs = dagger.sp_norm(nu, None).powi(2);
        let rhs = if outside == 0 {
            0.0
        } else {
            constant * size / outside as f64 * diam * diam * space.sp_energy(&h)
        };
        worst = worst.max(ratio(lhs, rhs));
    }
    Ok(InequalityReport::new("boundary differential bound", constant, worst, trials))
}

/// `C_BE C_MP (C_SG^-1 + 1)` with the gap constant scanned up to `K_max(5, largest)`.
pub fn dagger_constant(phi: &InteractionTable, nu: &SiteMeasure, largest: usize, budget: u128) -> Result<f64> {
    let k = Constants::new(phi, nu)?;
    let c_sg = uniform_gap_constant(phi, nu, largest, budget)?;
    Ok(k.c_be * k.c_mp * (1.0 / c_sg + 1.0))
}
