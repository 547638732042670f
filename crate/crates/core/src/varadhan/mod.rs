//! Shift-invariant forms on Z^d through windowed representatives: conserved
//! currents, differentials of translation sums, projections onto boxes, the
//! difference map, the locality probe, the decomposition solver and the
//! averaged-potential sequence.

mod decompose;
mod psi;

use serde_json::{json, Value};

pub use decompose::{decompose, window_sites, DecompositionResult, Decomposer, OrthonormalBasis};
pub use psi::{psi_sequence, BoundaryBound, PsiSequenceStep};

use crate::configspace::DEFAULT_BUDGET;
use crate::error::{Error, Result};
use crate::forms::{Form, CLOSED_TOL};
use crate::interaction::{ConsvBasis, InteractionTable};
use crate::locale::{box_sites, Locale, Site, MAX_DIM};
use crate::measure::{FunctionTable, SiteMeasure};

/// A translation-invariant form on the nearest-neighbour edges of Z^d, stored
/// as one table per direction `j` for the edge `(0, 1_j)`.
#[derive(Clone, Debug)]
pub struct ShiftInvariantForm {
    d: usize,
    phi: InteractionTable,
    reps: Vec<FunctionTable>,
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 || d > MAX_DIM {
        return Err(Error::Invalid(format!("lattice dimension {d} unsupported")));
    }
    Ok(())
}

/// Strides of the digits of `o` and `t` in the configuration code over `sites`.
fn pair_strides(sites: &[Site], n: usize, o: Site, t: Site) -> (usize, usize) {
    let len = sites.len();
    let stride = |s: Site| n.pow((len - 1 - sites.binary_search(&s).unwrap()) as u32);
    (stride(o), stride(t))
}

/// For every code over `sites` (which contain `o` and `t`), whether the edge `(o, t)` changes it.
fn moved_mask(sites: &[Site], phi: &InteractionTable, o: Site, t: Site) -> Vec<bool> {
    let n = phi.num_states();
    let (po, pt) = pair_strides(sites, n, o, t);
    (0..n.pow(sites.len() as u32))
        .map(|c| {
            let (a, b) = ((c / po) % n, (c / pt) % n);
            phi.apply(a, b) != (a, b)
        })
        .collect()
}

/// `omega_{rev e}` from `omega_e` for `e = (o, t)`: `-omega_e(zeta^{rev e})` off fixed points, zero on them.
pub(crate) fn reverse_table(table: &FunctionTable, phi: &InteractionTable, o: Site, t: Site) -> FunctionTable {
    let w = table.extend(&[o, t]);
    let n = phi.num_states();
    let (po, pt) = pair_strides(w.sites(), n, o, t);
    let vals = w.values();
    let out = (0..w.len())
        .map(|c| {
            let (a, b) = ((c / po) % n, (c / pt) % n);
            let (b2, a2) = phi.apply(b, a);
            let c2 = c + a2 * po + b2 * pt - a * po - b * pt;
            if c2 == c { 0.0 } else { -vals[c2] }
        })
        .collect();
    FunctionTable::new(w.sites().to_vec(), n, out)
}

impl ShiftInvariantForm {
    /// Representative tables must vanish on configurations fixed by the edge `(0, 1_j)`.
    pub fn new(d: usize, phi: &InteractionTable, reps: Vec<FunctionTable>) -> Result<Self> {
        check_dim(d)?;
        if reps.len() != d {
            return Err(Error::Invalid(format!("{} representative tables for dimension {d}", reps.len())));
        }
        let reps: Vec<FunctionTable> =
            reps.into_iter().enumerate().map(|(j, t)| t.extend(&[Site::ORIGIN, Site::unit(j)])).collect();
        let form = Self { d, phi: phi.clone(), reps };
        for j in 0..d {
            let t = &form.reps[j];
            let moved = moved_mask(t.sites(), phi, Site::ORIGIN, Site::unit(j));
            if t.values().iter().zip(&moved).any(|(v, m)| !m && v.abs() > 1e-12) {
                return Err(Error::Invalid(format!("direction {j} table is nonzero on a fixed configuration")));
            }
        }
        Ok(form)
    }

    pub fn zero(d: usize, phi: &InteractionTable) -> Self {
        let reps = (0..d).map(|j| FunctionTable::zero(phi.num_states()).extend(&[Site::ORIGIN, Site::unit(j)])).collect();
        Self { d, phi: phi.clone(), reps }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn interaction(&self) -> &InteractionTable {
        &self.phi
    }

    pub fn reps(&self) -> &[FunctionTable] {
        &self.reps
    }

    pub fn rep(&self, j: usize) -> &FunctionTable {
        &self.reps[j]
    }

    /// The table of `omega` on `(x, x + 1_j)`, or on `(x + 1_j, x)` when `reversed`.
    pub fn edge_table(&self, x: Site, j: usize, reversed: bool) -> FunctionTable {
        let fwd = self.reps[j].translate(x);
        if reversed {
            reverse_table(&fwd, &self.phi, x, x + Site::unit(j))
        } else {
            fwd
        }
    }

    /// Union of the representative windows.
    pub fn window(&self) -> Vec<Site> {
        let mut w: Vec<Site> = self.reps.iter().flat_map(|t| t.sites().iter().copied()).collect();
        w.sort();
        w.dedup();
        w
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a.add(b))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a.sub(b))
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { d: self.d, phi: self.phi.clone(), reps: self.reps.iter().map(|t| t.scale(c)).collect() }
    }

    fn zip(&self, other: &Self, f: impl Fn(&FunctionTable, &FunctionTable) -> FunctionTable) -> Self {
        assert_eq!(self.d, other.d, "dimensions differ");
        Self { d: self.d, phi: self.phi.clone(), reps: self.reps.iter().zip(&other.reps).map(|(a, b)| f(a, b)).collect() }
    }

    /// Largest representative-table difference.
    pub fn max_diff(&self, other: &Self) -> f64 {
        self.reps.iter().zip(&other.reps).map(|(a, b)| a.max_diff(b)).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.reps.iter().map(FunctionTable::max_abs).fold(0.0, f64::max)
    }

    /// `sup_e ||omega_e||_mu` over the `2d` edges at the origin.
    pub fn sp_norm(&self, nu: &SiteMeasure) -> f64 {
        (0..self.d)
            .flat_map(|j| [false, true].map(|r| self.edge_table(Site::ORIGIN, j, r).norm_sq(nu).sqrt()))
            .fold(0.0, f64::max)
    }

    /// `{"d", "nstates", "directions": [{"sites": [[..],..], "values": [..]}, ..]}`.
    pub fn to_json(&self) -> Value {
        json!({
            "d": self.d,
            "nstates": self.phi.num_states(),
            "directions": self.reps.iter().map(|t| table_to_json(t, self.d)).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Value, phi: &InteractionTable) -> Result<Self> {
        let d = v.get("d").and_then(Value::as_u64).ok_or_else(|| Error::Parse("missing d".into()))? as usize;
        check_dim(d)?;
        if let Some(n) = v.get("nstates").and_then(Value::as_u64) {
            if n as usize != phi.num_states() {
                return Err(Error::Parse(format!("form has {n} states, interaction has {}", phi.num_states())));
            }
        }
        let dirs = v.get("directions").and_then(Value::as_array).ok_or_else(|| Error::Parse("missing directions".into()))?;
        let reps = dirs.iter().map(|t| table_from_json(t, d, phi.num_states())).collect::<Result<Vec<_>>>()?;
        Self::new(d, phi, reps)
    }
}

/// `{"sites": [[x1, .., xd], ..], "values": [..]}` with values in configuration-code order.
pub fn table_to_json(t: &FunctionTable, d: usize) -> Value {
    json!({
        "sites": t.sites().iter().map(|s| s.to_vec(d)).collect::<Vec<_>>(),
        "values": t.values(),
    })
}

pub fn table_from_json(v: &Value, d: usize, nstates: usize) -> Result<FunctionTable> {
    let sites = v.get("sites").and_then(Value::as_array).ok_or_else(|| Error::Parse("missing sites".into()))?;
    let sites: Vec<Site> = sites
        .iter()
        .map(|s| {
            let c: Option<Vec<i32>> = s.as_array().map(|a| a.iter().filter_map(|x| x.as_i64().map(|x| x as i32)).collect());
            c.filter(|c| c.len() == d).map(|c| Site::lattice(&c)).ok_or_else(|| Error::Parse(format!("bad site {s}")))
        })
        .collect::<Result<_>>()?;
    let values = v.get("values").and_then(Value::as_array).ok_or_else(|| Error::Parse("missing values".into()))?;
    let values: Vec<f64> = values.iter().map(|x| x.as_f64().ok_or_else(|| Error::Parse(format!("bad value {x}")))).collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..sites.len()).collect();
    order.sort_by_key(|&i| sites[i]);
    if order.iter().enumerate().any(|(k, &i)| i != k) || sites.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Parse("sites must be listed in strictly increasing order".into()));
    }
    let expected = nstates.checked_pow(sites.len() as u32);
    if expected != Some(values.len()) {
        return Err(Error::Parse(format!("{} values for {} sites", values.len(), sites.len())));
    }
    Ok(FunctionTable::new(sites, nstates, values))
}

/// `xi(phi(s_o, s_t).1) - xi(s_t)` on the sites `(0, 1_j)`: the xi-flux across the bond.
pub fn current_table(phi: &InteractionTable, xi: &[f64], j: usize) -> FunctionTable {
    let n = phi.num_states();
    FunctionTable::from_fn(&[Site::ORIGIN, Site::unit(j)], n, |s| {
        let (_, t2) = phi.apply(s[0], s[1]);
        xi[t2] - xi[s[1]]
    })
}

/// One conserved current `c^{ij}` with its indices.
#[derive(Clone, Debug)]
pub struct CurrentBasisElement {
    pub i: usize,
    pub j: usize,
    pub table: FunctionTable,
}

/// All currents `c^{ij}` for a conserved basis in dimension `d`, ordered by `(i, j)`.
pub fn current_basis(phi: &InteractionTable, basis: &ConsvBasis, d: usize) -> Vec<CurrentBasisElement> {
    (0..basis.dim())
        .flat_map(|i| {
            let xi = basis.vector_f64(i);
            (0..d).map(move |j| (i, j, xi.clone()))
        })
        .map(|(i, j, xi)| CurrentBasisElement { i, j, table: current_table(phi, &xi, j) })
        .collect()
}

/// The differential of `sum_x x_j xi(eta_x)`: the current in direction `j`, zero on other directions.
pub fn current_form(phi: &InteractionTable, xi: &[f64], j: usize, d: usize) -> Result<ShiftInvariantForm> {
    check_dim(d)?;
    if j >= d || xi.len() != phi.num_states() {
        return Err(Error::Invalid("direction or conserved vector out of range".into()));
    }
    let mut form = ShiftInvariantForm::zero(d, phi);
    form.reps[j] = current_table(phi, xi, j);
    Ok(form)
}

/// `(d Gamma_f)_{(0, 1_j)}`: the sum of `grad_{(0,1_j)} tau_x f` over the translates touching the edge.
pub fn gamma_differential(f: &FunctionTable, j: usize, phi: &InteractionTable) -> FunctionTable {
    let (o, t) = (Site::ORIGIN, Site::unit(j));
    let mut shifts: Vec<Site> = f.sites().iter().flat_map(|&w| [o - w, t - w]).collect();
    shifts.sort();
    shifts.dedup();
    let mut out = FunctionTable::zero(f.nstates()).extend(&[o, t]);
    for x in shifts {
        out.add_scaled(&f.translate(x).move_gradient(phi, o, t), 1.0);
    }
    out
}

/// The shift-invariant form `d Gamma_f` in dimension `d`.
pub fn gamma_form(f: &FunctionTable, d: usize, phi: &InteractionTable) -> Result<ShiftInvariantForm> {
    check_dim(d)?;
    Ok(ShiftInvariantForm { d, phi: phi.clone(), reps: (0..d).map(|j| gamma_differential(f, j, phi)).collect() })
}

/// Unit direction of a lattice edge and whether it points backwards.
fn lattice_direction(o: Site, t: Site, d: usize) -> Option<(usize, bool)> {
    (0..d).find_map(|j| {
        let u = Site::unit(j);
        if t == o + u {
            Some((j, false))
        } else if o == t + u {
            Some((j, true))
        } else {
            None
        }
    })
}

/// Conditional expectation of every edge table onto the sites of a lattice locale.
pub(crate) fn project_onto(omega: &ShiftInvariantForm, locale: &Locale, nu: &SiteMeasure) -> Result<Form> {
    let sites = locale.sites();
    let mut tables = vec![None; locale.num_edges()];
    for (e, &(o, t)) in locale.edges().iter().enumerate() {
        let (so, st) = (sites[o], sites[t]);
        let (j, back) = lattice_direction(so, st, omega.d)
            .ok_or_else(|| Error::Invalid(format!("edge ({so}, {st}) is not a lattice edge")))?;
        if !back {
            let p = omega.edge_table(so, j, false).conditional_expectation(sites, nu).extend(sites);
            let r = reverse_table(&p, &omega.phi, so, st);
            tables[locale.reverse(e)] = Some(r);
            tables[e] = Some(p);
        }
    }
    Form::new(locale, &omega.phi, tables.into_iter().map(|t| t.expect("every edge has a forward partner")).collect())
}

/// Projection of `omega` onto a finite lattice box; the box must contain every representative window.
pub fn project_to_box(omega: &ShiftInvariantForm, lambda: &Locale, nu: &SiteMeasure) -> Result<Form> {
    if let Some(s) = omega.window().into_iter().find(|s| lambda.site_index(*s).is_none()) {
        return Err(Error::WindowExceedsBox(format!("site {s} lies outside {}", lambda.name())));
    }
    project_onto(omega, lambda, nu)
}

/// Closedness of the projections onto the centered boxes `[-m, m]^d`, `m = 1..=max_box`, that
/// contain the representative windows.
pub fn is_closed_shift_invariant(omega: &ShiftInvariantForm, nu: &SiteMeasure, max_box: usize, budget: u128) -> Result<bool> {
    let mut tested = 0;
    for m in 1..=max_box {
        let sites = box_sites(omega.d, m);
        if omega.window().iter().any(|s| sites.binary_search(s).is_err()) {
            continue;
        }
        let needed = (omega.phi.num_states() as u128).checked_pow(sites.len() as u32).unwrap_or(u128::MAX);
        if needed > budget {
            return Err(Error::BudgetExceeded { needed, budget });
        }
        let b = Locale::lattice_box(omega.d, m)?;
        if !project_onto(omega, &b, nu)?.is_closed(CLOSED_TOL) {
            return Ok(false);
        }
        tested += 1;
    }
    if tested == 0 {
        return Err(Error::WindowExceedsBox(format!("no box up to [-{max_box}, {max_box}]^d contains the windows")));
    }
    Ok(true)
}

/// Closedness on one small centered box, ignoring whether it contains the windows.
pub(crate) fn closed_on_small_box(omega: &ShiftInvariantForm, nu: &SiteMeasure) -> Result<bool> {
    let n = omega.phi.num_states() as u128;
    let m = if n.checked_pow(3u32.pow(omega.d as u32)).is_some_and(|s| s <= 1 << 18) { 1 } else { 0 };
    let sites: Vec<Site> = if m == 1 {
        box_sites(omega.d, 1)
    } else {
        box_sites(omega.d, 1).into_iter().filter(|s| (0..omega.d).all(|j| s.coord(j) >= 0)).collect()
    };
    let b = Locale::lattice_window("precheck", omega.d, &sites)?;
    if n.checked_pow(sites.len() as u32).is_none_or(|s| s > DEFAULT_BUDGET) {
        return Ok(true);
    }
    Ok(project_onto(omega, &b, nu)?.is_closed(CLOSED_TOL))
}

/// `f - tau_{1_j} f` for every direction.
pub fn delta_map(f: &FunctionTable, d: usize) -> Vec<FunctionTable> {
    (0..d).map(|j| f.sub(&f.translate(Site::unit(j)))).collect()
}

/// Whether `grad_e (pi^{L u L'} g)` vanishes for every lattice edge `e` inside `lambda_prime`.
pub fn locality_probe(
    g: &FunctionTable,
    lambda: &[Site],
    lambda_prime: &[Site],
    d: usize,
    phi: &InteractionTable,
    nu: &SiteMeasure,
    tol: f64,
) -> Result<bool> {
    if lambda.iter().any(|s| lambda_prime.contains(s)) {
        return Err(Error::Invalid("windows must be disjoint".into()));
    }
    let mut both: Vec<Site> = lambda.iter().chain(lambda_prime).copied().collect();
    both.sort();
    both.dedup();
    let h = g.conditional_expectation(&both, nu);
    for &x in lambda_prime {
        for j in 0..d {
            let y = x + Site::unit(j);
            if lambda_prime.contains(&y)
                && (h.move_gradient(phi, x, y).max_abs() > tol || h.move_gradient(phi, y, x).max_abs() > tol)
            {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interaction::conserved_basis;

    fn s1(x: i32) -> Site {
        Site::lattice(&[x])
    }

    #[test]
    fn currents() {
        let gep = InteractionTable::gep(2);
        let c = current_table(&gep, &[0.0, 1.0, 2.0], 0);
        assert_eq!(c.at(&[2, 0]), 1.0);
        assert_eq!(c.at(&[0, 2]), 0.0);
        assert_eq!(c.at(&[1, 1]), 1.0);
        let sep = InteractionTable::sep(1);
        let c = current_table(&sep, &[0.0, 1.0], 0);
        assert_eq!(c.values(), &[0.0, -1.0, 1.0, 0.0]);
        let f = current_form(&sep, &[0.0, 1.0], 0, 2).unwrap();
        assert_eq!(f.rep(1).max_abs(), 0.0);
        assert_eq!(current_basis(&InteractionTable::sep(2), &conserved_basis(&InteractionTable::sep(2)), 2).len(), 4);
    }

    #[test]
    fn gamma_of_conserved_vanishes() {
        let gep = InteractionTable::gep(2);
        let xi = FunctionTable::single_site(Site::ORIGIN, 3, |s| s as f64);
        assert!(gamma_differential(&xi, 0, &gep).max_abs() < 1e-12);
        let c = FunctionTable::constant(3, 2.0);
        assert_eq!(gamma_differential(&c, 0, &gep).max_abs(), 0.0);
    }

    #[test]
    fn gamma_of_pair_product() {
        let sep = InteractionTable::sep(1);
        let f = FunctionTable::from_fn(&[s1(0), s1(1)], 2, |s| (s[0] * s[1]) as f64);
        let g = gamma_differential(&f, 0, &sep);
        assert_eq!(g.sites(), &[s1(-1), s1(0), s1(1), s1(2)]);
        // moving a particle from 0 to 1 with a neighbour at 2 and none at -1 creates one bond
        assert_eq!(g.at(&[0, 1, 0, 1]), 1.0);
        assert_eq!(g.at(&[1, 1, 0, 0]), -1.0);
        let w = Locale::lattice_window("w", 1, &[s1(-2), s1(-1), s1(0), s1(1), s1(2), s1(3)]).unwrap();
        let nu = SiteMeasure::uniform(2);
        assert!(project_to_box(&gamma_form(&f, 1, &sep).unwrap(), &w, &nu).unwrap().solve_potential(1e-9).is_ok());
    }

    #[test]
    fn projections_and_closedness() {
        let sep = InteractionTable::sep(1);
        let nu = SiteMeasure::uniform(2);
        let cur = current_form(&sep, &[0.0, 1.0], 0, 1).unwrap();
        let p2 = Locale::lattice_window("p2", 1, &[s1(0), s1(1)]).unwrap();
        assert!(project_to_box(&cur, &p2, &nu).unwrap().is_closed(1e-9));
        assert!(is_closed_shift_invariant(&cur, &nu, 3, DEFAULT_BUDGET).unwrap());
        let small = Locale::lattice_window("p1", 1, &[s1(0)]).unwrap();
        assert!(matches!(project_to_box(&cur, &small, &nu), Err(Error::WindowExceedsBox(_))));
        let mut bumped = cur.rep(0).extend(&[s1(0), s1(1), s1(2)]);
        bumped.values_mut()[2] += 0.5; // configuration (0,1,0) is moved by the edge
        let bad = ShiftInvariantForm::new(1, &sep, vec![bumped]).unwrap();
        assert!(!is_closed_shift_invariant(&bad, &nu, 3, DEFAULT_BUDGET).unwrap());
        let z = ShiftInvariantForm::zero(1, &sep);
        assert_eq!(project_to_box(&z, &p2, &nu).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn reverse_tables_alternate() {
        let gep = InteractionTable::gep(2);
        let cur = current_form(&gep, &[0.0, 1.0, 2.0], 0, 1).unwrap();
        let r = cur.edge_table(Site::ORIGIN, 0, true);
        // reverse edge (1, 0): moving one particle from site 1 to site 0 carries flux -1
        assert_eq!(r.at(&[0, 2]), -1.0);
        assert_eq!(r.at(&[2, 0]), 0.0);
    }

    #[test]
    fn delta_and_locality() {
        let sep = InteractionTable::sep(2);
        let nu = SiteMeasure::uniform(3);
        let window: Vec<Site> = (0..5).map(s1).collect();
        let xi = [0.0, 1.0, 1.0];
        let a = FunctionTable::from_fn(&window, 3, |s| s.iter().enumerate().map(|(x, &v)| x as f64 * xi[v]).sum());
        let delta = &delta_map(&a, 1)[0];
        let interior: Vec<Site> = (1..5).map(s1).collect();
        let expected = FunctionTable::from_fn(&interior, 3, |s| s.iter().map(|&v| xi[v]).sum());
        let restricted = delta.plug_base(&interior, 0);
        assert!(restricted.max_diff(&expected) < 1e-12);
        assert!(delta_map(&FunctionTable::constant(3, 1.0), 1)[0].max_abs() == 0.0);

        let lam = [s1(0)];
        let lam2 = [s1(1), s1(2)];
        let g = FunctionTable::single_site(s1(0), 3, |v| v as f64);
        assert!(locality_probe(&g, &lam, &lam2, 1, &sep, &nu, 1e-12).unwrap());
        let g = FunctionTable::single_site(s1(1), 3, |v| v as f64);
        assert!(!locality_probe(&g, &lam, &lam2, 1, &sep, &nu, 1e-12).unwrap());
        let g = FunctionTable::from_fn(&lam2, 3, |s| xi[s[0]] + xi[s[1]]);
        assert!(locality_probe(&g, &lam, &lam2, 1, &sep, &nu, 1e-12).unwrap());
    }

    #[test]
    fn json_round_trip() {
        let gep = InteractionTable::gep(2);
        let f = FunctionTable::from_fn(&[Site::ORIGIN, Site::unit(1)], 3, |s| (s[0] * 3 + s[1]) as f64 * 0.1);
        let w = gamma_form(&f, 2, &gep).unwrap();
        let back = ShiftInvariantForm::from_json(&w.to_json(), &gep).unwrap();
        assert_eq!(back.max_diff(&w), 0.0);
    }
}
