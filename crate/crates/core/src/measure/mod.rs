//! Product measures, conditional expectations, exact-support expansions,
//! rates and the constants bounding them.

mod expansion;
mod table;

pub use expansion::{expand_base, expand_mu, renormalize, unrenormalize, ExpansionPieces, Flavor};
pub use table::{FunctionTable, MAX_ENTRIES};
pub(crate) use table::union;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::interaction::InteractionTable;
use crate::locale::{Locale, Site};

/// A strictly positive probability vector on the state space.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteMeasure {
    weights: Vec<f64>,
}

impl SiteMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Invalid("measure needs at least one state".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::Invalid(format!("measure weight {w} is not strictly positive")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Invalid(format!("measure weights sum to {total}, not 1")));
        }
        Ok(Self { weights })
    }

    /// Normalizes positive weights to a probability vector.
    pub fn from_unnormalized(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Invalid("measure weights must be positive".into()));
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    pub fn uniform(nstates: usize) -> Self {
        Self { weights: vec![1.0 / nstates as f64; nstates] }
    }

    /// `nu(m)` proportional to `rho^m`.
    pub fn geometric(nstates: usize, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Invalid(format!("geometric parameter {rho} must be positive")));
        }
        let w: Vec<f64> = (0..nstates).map(|m| rho.powi(m as i32)).collect();
        Self::from_unnormalized(&w)
    }

    /// `uniform`, `geometric:0.5` or `geometric(0.5)`.
    pub fn from_name(name: &str, nstates: usize) -> Result<Self> {
        let name = name.trim();
        if name == "uniform" {
            return Ok(Self::uniform(nstates));
        }
        match crate::interaction::split_call(name) {
            Some(("geometric", arg)) => {
                let rho = arg
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad geometric parameter {arg:?}")))?;
                Self::geometric(nstates, rho)
            }
            _ => Err(Error::Parse(format!("unknown measure {name:?}"))),
        }
    }

    /// Parses `{"weights": [...]}`; the weights must already sum to one.
    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let w = v
            .get("weights")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("missing \"weights\" array".into()))?;
        let w: Option<Vec<f64>> = w.iter().map(Value::as_f64).collect();
        Self::new(w.ok_or_else(|| Error::Parse("weights must be numbers".into()))?)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, s: usize) -> f64 {
        self.weights[s]
    }

    pub fn nstates(&self) -> usize {
        self.weights.len()
    }

    /// Product weight of a configuration.
    pub fn product(&self, states: &[usize]) -> f64 {
        states.iter().map(|&s| self.weights[s]).product()
    }

    /// The same measure with states renamed: state `perm[s]` gets the weight of `s`.
    pub fn relabel(&self, perm: &[usize]) -> Self {
        let mut w = vec![0.0; self.weights.len()];
        for (s, &p) in perm.iter().enumerate() {
            w[p] = self.weights[s];
        }
        Self { weights: w }
    }
}

/// Largest ratio, in either direction, between the product weights of a pair and its image.
pub fn c_phi_nu(phi: &InteractionTable, nu: &SiteMeasure) -> f64 {
    let n = phi.num_states();
    let mut c: f64 = 1.0;
    for a in 0..n {
        for b in 0..n {
            let (a2, b2) = phi.apply(a, b);
            let q = nu.weight(a2) * nu.weight(b2) / (nu.weight(a) * nu.weight(b));
            c = c.max(q).max(1.0 / q);
        }
    }
    c
}

/// One positive local function per directed edge of a locale.
#[derive(Clone, Debug, PartialEq)]
pub struct Rate {
    tables: Vec<FunctionTable>,
}

impl Rate {
    pub fn new(locale: &Locale, tables: Vec<FunctionTable>) -> Result<Self> {
        if tables.len() != locale.num_edges() {
            return Err(Error::Invalid(format!(
                "rate has {} tables for {} edges",
                tables.len(),
                locale.num_edges()
            )));
        }
        if tables.iter().any(|t| t.values().iter().any(|&v| !(v > 0.0 && v.is_finite()))) {
            return Err(Error::Invalid("rates must be strictly positive".into()));
        }
        Ok(Self { tables })
    }

    pub fn trivial(locale: &Locale, nstates: usize) -> Self {
        Self { tables: vec![FunctionTable::constant(nstates, 1.0); locale.num_edges()] }
    }

    pub fn table(&self, e: usize) -> &FunctionTable {
        &self.tables[e]
    }

    pub fn tables(&self) -> &[FunctionTable] {
        &self.tables
    }

    /// Whether `r_e(eta) = r_ebar(eta)` on every configuration fixed by `e`.
    pub fn fixed_point_symmetric(&self, phi: &InteractionTable, locale: &Locale, tol: f64) -> bool {
        (0..locale.num_edges()).all(|e| {
            let (o, t) = edge_sites(locale, e);
            let re = &self.tables[e];
            let rb = &self.tables[locale.reverse(e)];
            let w = union(&union(re.sites(), rb.sites()), &sorted_pair(o, t));
            let (re, rb) = (re.extend(&w), rb.extend(&w));
            let (po, pt) = positions(&w, o, t);
            (0..re.len()).all(|c| {
                let st = re.decode(c);
                phi.apply(st[po], st[pt]) != (st[po], st[pt]) || (re.values()[c] - rb.values()[c]).abs() <= tol
            })
        })
    }
}

pub(crate) fn edge_sites(locale: &Locale, e: usize) -> (Site, Site) {
    let (o, t) = locale.edge(e);
    (locale.sites()[o], locale.sites()[t])
}

fn sorted_pair(a: Site, b: Site) -> Vec<Site> {
    let mut v = vec![a, b];
    v.sort();
    v
}

fn positions(window: &[Site], o: Site, t: Site) -> (usize, usize) {
    (window.binary_search(&o).unwrap(), window.binary_search(&t).unwrap())
}

/// The rate built from square roots of pair-weight ratios, for which the product
/// measure is reversible.
pub fn canonical_rate(nu: &SiteMeasure, phi: &InteractionTable, locale: &Locale) -> Rate {
    let n = phi.num_states();
    let pair = |a: usize, b: usize| nu.weight(a) * nu.weight(b);
    let tables = (0..locale.num_edges())
        .map(|e| {
            let (o, t) = edge_sites(locale, e);
            FunctionTable::from_fn(&[o, t], n, |st| {
                let (a, b) = if o < t { (st[0], st[1]) } else { (st[1], st[0]) };
                let img = phi.apply(a, b);
                let (a2, b2) = if img != (a, b) {
                    img
                } else {
                    let (b3, a3) = phi.apply(b, a);
                    (a3, b3)
                };
                (pair(a2, b2) / pair(a, b)).sqrt()
            })
        })
        .collect();
    Rate { tables }
}

/// Runs `visit(eta, eta^e, r_e(eta), r_ebar(eta^e), mu(eta), mu(eta^e))` over the joint window of edge `e`.
fn for_each_transition(
    rate: &Rate,
    nu: &SiteMeasure,
    phi: &InteractionTable,
    locale: &Locale,
    e: usize,
    mut visit: impl FnMut(f64, f64, f64, f64),
) {
    let (o, t) = edge_sites(locale, e);
    let re = rate.table(e);
    let rb = rate.table(locale.reverse(e));
    let w = union(&union(re.sites(), rb.sites()), &sorted_pair(o, t));
    let (re, rb) = (re.extend(&w), rb.extend(&w));
    let (po, pt) = positions(&w, o, t);
    for c in 0..re.len() {
        let st = re.decode(c);
        let mut st2 = st.clone();
        let (a, b) = phi.apply(st[po], st[pt]);
        st2[po] = a;
        st2[pt] = b;
        let c2 = re.code_of(&st2);
        visit(re.values()[c], rb.values()[c2], nu.product(&st), nu.product(&st2));
    }
}

/// Whether `mu(eta) r_e(eta) = mu(eta^e) r_ebar(eta^e)` for every edge and configuration.
pub fn is_reversible(rate: &Rate, nu: &SiteMeasure, phi: &InteractionTable, locale: &Locale) -> bool {
    let mut ok = true;
    for e in 0..locale.num_edges() {
        for_each_transition(rate, nu, phi, locale, e, |re, rb, m, m2| {
            let (l, r) = (m * re, m2 * rb);
            ok &= (l - r).abs() <= 1e-10 * l.abs().max(r.abs());
        });
    }
    ok
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateBounds {
    /// Smallest `M >= 1` with `1/M <= r_e <= M`.
    pub rate_bound: f64,
    /// Smallest `A >= 1` bounding the forward/backward flux ratio in both directions.
    pub transition_bound: f64,
}

/// Both bounds for edge `e`; the flux ratio is evaluated on the joint window of
/// `r_e`, `r_ebar` and the edge, which suffices for a product measure.
pub fn rate_bounds(rate: &Rate, nu: &SiteMeasure, phi: &InteractionTable, locale: &Locale, e: usize) -> RateBounds {
    let rate_bound = rate.table(e).values().iter().fold(1.0f64, |m, &r| m.max(r).max(1.0 / r));
    let mut transition_bound = 1.0f64;
    for_each_transition(rate, nu, phi, locale, e, |re, rb, m, m2| {
        let q = re * m / (rb * m2);
        transition_bound = transition_bound.max(q).max(1.0 / q);
    });
    RateBounds { rate_bound, transition_bound }
}

/// `sqrt(E[f^2])`.
pub fn mu_norm(f: &FunctionTable, nu: &SiteMeasure) -> f64 {
    f.norm_sq(nu).sqrt()
}

/// `sqrt(E[r f^2])`.
pub fn weighted_norm(f: &FunctionTable, r: &FunctionTable, nu: &SiteMeasure) -> f64 {
    f.map(|v| v * v).mul(r).expectation(nu).sqrt()
}
