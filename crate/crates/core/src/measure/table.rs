//! Dense real functions on `S^W` for a finite window `W` of sites.

use crate::interaction::InteractionTable;
use crate::locale::Site;

use super::SiteMeasure;

/// Largest number of entries a single table may hold.
pub const MAX_ENTRIES: usize = 1 << 28;

/// A real function on `S^W`. Sites are sorted; the first site is the most
/// significant digit of the configuration code.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionTable {
    sites: Vec<Site>,
    nstates: usize,
    values: Vec<f64>,
}

pub(crate) fn table_len(nstates: usize, len: usize) -> usize {
    let mut size = 1usize;
    for _ in 0..len {
        size = size
            .checked_mul(nstates)
            .filter(|&s| s <= MAX_ENTRIES)
            .unwrap_or_else(|| panic!("table on {len} sites with {nstates} states is too large"));
    }
    size
}

/// For every code of `big`, the code of its restriction to `small` (a subset of `big`).
fn restriction_codes(big: &[Site], small: &[Site], nstates: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(table_len(nstates, big.len()));
    out.push(0usize);
    for site in big {
        let w = small
            .binary_search(site)
            .map(|i| nstates.pow((small.len() - 1 - i) as u32))
            .unwrap_or(0);
        out = out.iter().flat_map(|&p| (0..nstates).map(move |s| p + s * w)).collect();
    }
    out
}

/// For every code of `big`, the product of `site_weight(s)` over the sites of `big` not in `keep`.
fn marginal_weights(big: &[Site], keep: &[Site], site_weight: &[f64]) -> Vec<f64> {
    let mut out = vec![1.0];
    for site in big {
        let kept = keep.binary_search(site).is_ok();
        out = out
            .iter()
            .flat_map(|&p| site_weight.iter().map(move |&w| if kept { p } else { p * w }))
            .collect();
    }
    out
}

pub(crate) fn union(a: &[Site], b: &[Site]) -> Vec<Site> {
    let mut u: Vec<Site> = a.iter().chain(b).copied().collect();
    u.sort();
    u.dedup();
    u
}

fn intersection(a: &[Site], b: &[Site]) -> Vec<Site> {
    a.iter().copied().filter(|s| b.binary_search(s).is_ok()).collect()
}

fn sorted(sites: &[Site]) -> Vec<Site> {
    let mut s = sites.to_vec();
    s.sort();
    s.dedup();
    s
}

impl FunctionTable {
    /// Values are indexed by configuration code over the sorted `sites`.
    pub fn new(sites: Vec<Site>, nstates: usize, values: Vec<f64>) -> Self {
        assert!(sites.windows(2).all(|w| w[0] < w[1]), "sites must be strictly increasing");
        assert_eq!(values.len(), table_len(nstates, sites.len()), "value count mismatch");
        Self { sites, nstates, values }
    }

    pub fn constant(nstates: usize, c: f64) -> Self {
        Self { sites: Vec::new(), nstates, values: vec![c] }
    }

    pub fn zero(nstates: usize) -> Self {
        Self::constant(nstates, 0.0)
    }

    /// Tabulates `f(states)` where `states[i]` is the state at the i-th sorted site.
    pub fn from_fn(sites: &[Site], nstates: usize, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let sites = sorted(sites);
        let size = table_len(nstates, sites.len());
        let mut digits = vec![0usize; sites.len()];
        let mut values = Vec::with_capacity(size);
        for _ in 0..size {
            values.push(f(&digits));
            for d in digits.iter_mut().rev() {
                *d += 1;
                if *d < nstates {
                    break;
                }
                *d = 0;
            }
        }
        Self { sites, nstates, values }
    }

    /// `g(eta_x)` for a single site.
    pub fn single_site(x: Site, nstates: usize, g: impl Fn(usize) -> f64) -> Self {
        Self::from_fn(&[x], nstates, |s| g(s[0]))
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn nstates(&self) -> usize {
        self.nstates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn code_of(&self, states: &[usize]) -> usize {
        states.iter().fold(0, |c, &s| c * self.nstates + s)
    }

    pub fn decode(&self, mut code: usize) -> Vec<usize> {
        let mut states = vec![0; self.sites.len()];
        for d in states.iter_mut().rev() {
            *d = code % self.nstates;
            code /= self.nstates;
        }
        states
    }

    /// Value at the configuration whose state at site `x` is `config(x)`.
    pub fn eval(&self, config: impl Fn(Site) -> usize) -> f64 {
        let code = self.sites.iter().fold(0, |c, &x| c * self.nstates + config(x));
        self.values[code]
    }

    /// Value on the listed states of the sorted window.
    pub fn at(&self, states: &[usize]) -> f64 {
        self.values[self.code_of(states)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// The same function viewed on a larger window.
    pub fn extend(&self, window: &[Site]) -> Self {
        let window = union(window, &self.sites);
        if window == self.sites {
            return self.clone();
        }
        let map = restriction_codes(&window, &self.sites, self.nstates);
        let values = map.iter().map(|&c| self.values[c]).collect();
        Self { sites: window, nstates: self.nstates, values }
    }

    /// Integrates out the sites outside `keep` against per-state weights.
    pub fn marginalize(&self, keep: &[Site], site_weight: &[f64]) -> Self {
        let keep = intersection(&self.sites, &sorted(keep));
        if keep.len() == self.sites.len() {
            return self.clone();
        }
        let map = restriction_codes(&self.sites, &keep, self.nstates);
        let w = marginal_weights(&self.sites, &keep, site_weight);
        let mut values = vec![0.0; table_len(self.nstates, keep.len())];
        for ((&c, &wc), &v) in map.iter().zip(&w).zip(&self.values) {
            values[c] += wc * v;
        }
        Self { sites: keep, nstates: self.nstates, values }
    }

    /// Conditional expectation onto the sites in `keep` under the product measure.
    pub fn conditional_expectation(&self, keep: &[Site], nu: &SiteMeasure) -> Self {
        self.marginalize(keep, nu.weights())
    }

    /// The restriction obtained by fixing every site outside `keep` to state `base`.
    pub fn plug_base(&self, keep: &[Site], base: usize) -> Self {
        let mut delta = vec![0.0; self.nstates];
        delta[base] = 1.0;
        self.marginalize(keep, &delta)
    }

    pub fn expectation(&self, nu: &SiteMeasure) -> f64 {
        self.marginalize(&[], nu.weights()).values[0]
    }

    pub fn inner(&self, other: &Self, nu: &SiteMeasure) -> f64 {
        self.zip_with(other, |a, b| a * b).expectation(nu)
    }

    pub fn norm_sq(&self, nu: &SiteMeasure) -> f64 {
        self.map(|v| v * v).expectation(nu)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { sites: self.sites.clone(), nstates: self.nstates, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Pointwise combination on the union of the two windows.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.nstates, other.nstates, "state counts differ");
        let w = union(&self.sites, &other.sites);
        let (a, b) = (self.extend(&w), other.extend(&w));
        let values = a.values.iter().zip(&b.values).map(|(&x, &y)| f(x, y)).collect();
        Self { sites: w, nstates: self.nstates, values }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// In-place `self += c * other`, widening the window when needed.
    pub fn add_scaled(&mut self, other: &Self, c: f64) {
        if other.sites.iter().all(|s| self.sites.binary_search(s).is_ok()) {
            let o = other.extend(&self.sites);
            for (v, w) in self.values.iter_mut().zip(&o.values) {
                *v += c * w;
            }
        } else {
            *self = self.zip_with(other, |a, b| a + c * b);
        }
    }

    /// Largest pointwise difference over the union window.
    pub fn max_diff(&self, other: &Self) -> f64 {
        self.sub(other).max_abs()
    }

    pub fn translate(&self, z: Site) -> Self {
        Self {
            sites: self.sites.iter().map(|&s| s + z).collect(),
            nstates: self.nstates,
            values: self.values.clone(),
        }
    }

    /// Whether the function changes with the state at window position `i` (beyond `tol`).
    fn depends_on_position(&self, i: usize, tol: f64) -> bool {
        let n = self.nstates;
        let stride = n.pow((self.sites.len() - 1 - i) as u32);
        let block = stride * n;
        self.values.chunks(block).any(|chunk| {
            (1..n).any(|s| (0..stride).any(|k| (chunk[s * stride + k] - chunk[k]).abs() > tol))
        })
    }

    pub fn depends_on(&self, x: Site, tol: f64) -> bool {
        self.sites.binary_search(&x).is_ok_and(|i| self.depends_on_position(i, tol))
    }

    /// Drops every site the function does not depend on (within `tol`).
    pub fn trim(&self, tol: f64) -> Self {
        let keep: Vec<Site> = (0..self.sites.len())
            .filter(|&i| self.depends_on_position(i, tol))
            .map(|i| self.sites[i])
            .collect();
        self.plug_base(&keep, 0)
    }

    /// `f(eta^{o,t}) - f(eta)` where the pair `(o, t)` is updated by the interaction.
    pub fn move_gradient(&self, phi: &InteractionTable, o: Site, t: Site) -> Self {
        self.pair_gradient(o, t, |a, b| phi.apply(a, b))
    }

    /// `f(eta^{x,y}) - f(eta)` with the states at `x` and `y` swapped.
    pub fn exchange_gradient(&self, x: Site, y: Site) -> Self {
        self.pair_gradient(x, y, |a, b| (b, a))
    }

    fn pair_gradient(&self, o: Site, t: Site, rule: impl Fn(usize, usize) -> (usize, usize)) -> Self {
        if o == t {
            return Self { sites: self.sites.clone(), nstates: self.nstates, values: vec![0.0; self.len()] };
        }
        let f = self.extend(&[o, t]);
        let n = self.nstates;
        let len = f.sites.len();
        let po = n.pow((len - 1 - f.sites.binary_search(&o).unwrap()) as u32);
        let pt = n.pow((len - 1 - f.sites.binary_search(&t).unwrap()) as u32);
        let values = (0..f.len())
            .map(|c| {
                let (a, b) = ((c / po) % n, (c / pt) % n);
                let (a2, b2) = rule(a, b);
                let c2 = c + a2 * po + b2 * pt - a * po - b * pt;
                f.values[c2] - f.values[c]
            })
            .collect();
        Self { sites: f.sites, nstates: n, values }
    }
}
