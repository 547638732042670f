//! Alternating forms on the transition graph of a finite locale: differentials,
//! closedness, potentials, projections, boundary differentials and norms.

use std::collections::{HashMap, VecDeque};

use serde_json::{json, Value};

use crate::configspace::TransitionGraph;
use crate::error::{Error, Result};
use crate::interaction::InteractionTable;
use crate::locale::{Locale, Site};
use crate::measure::{weighted_norm, FunctionTable, Rate, SiteMeasure};

/// Default consistency tolerance for closedness checks.
pub const CLOSED_TOL: f64 = 1e-9;

/// One table per directed edge of the locale, each over all its sites.
#[derive(Clone, Debug)]
pub struct Form {
    locale: Locale,
    phi: InteractionTable,
    tables: Vec<FunctionTable>,
}

fn check_window(f: &FunctionTable, locale: &Locale) -> Result<()> {
    match f.sites().iter().find(|s| locale.site_index(**s).is_none()) {
        Some(s) => Err(Error::Invalid(format!("site {s} lies outside locale {}", locale.name()))),
        None => Ok(()),
    }
}

impl Form {
    pub fn new(locale: &Locale, phi: &InteractionTable, tables: Vec<FunctionTable>) -> Result<Self> {
        if tables.len() != locale.num_edges() {
            return Err(Error::Invalid(format!("{} tables for {} edges", tables.len(), locale.num_edges())));
        }
        for t in &tables {
            check_window(t, locale)?;
        }
        let tables = tables.iter().map(|t| t.extend(locale.sites())).collect();
        Ok(Self { locale: locale.clone(), phi: phi.clone(), tables })
    }

    pub fn zero(locale: &Locale, phi: &InteractionTable) -> Self {
        let z = FunctionTable::zero(phi.num_states()).extend(locale.sites());
        Self { locale: locale.clone(), phi: phi.clone(), tables: vec![z; locale.num_edges()] }
    }

    /// Builds the form from `value(e, code)`.
    pub fn from_fn(locale: &Locale, phi: &InteractionTable, mut value: impl FnMut(usize, usize) -> f64) -> Self {
        let mut form = Self::zero(locale, phi);
        for (e, t) in form.tables.iter_mut().enumerate() {
            for (c, v) in t.values_mut().iter_mut().enumerate() {
                *v = value(e, c);
            }
        }
        form
    }

    pub fn locale(&self) -> &Locale {
        &self.locale
    }

    pub fn interaction(&self) -> &InteractionTable {
        &self.phi
    }

    pub fn tables(&self) -> &[FunctionTable] {
        &self.tables
    }

    pub fn table(&self, e: usize) -> &FunctionTable {
        &self.tables[e]
    }

    pub fn value(&self, e: usize, code: usize) -> f64 {
        self.tables[e].values()[code]
    }

    pub fn max_abs(&self) -> f64 {
        self.tables.iter().map(FunctionTable::max_abs).fold(0.0, f64::max)
    }

    pub fn max_diff(&self, other: &Self) -> f64 {
        self.tables.iter().zip(&other.tables).map(|(a, b)| a.max_diff(b)).fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &Self) -> Self {
        let tables = self.tables.iter().zip(&other.tables).map(|(a, b)| a.sub(b)).collect();
        Self { locale: self.locale.clone(), phi: self.phi.clone(), tables }
    }

    pub fn add(&self, other: &Self) -> Self {
        let tables = self.tables.iter().zip(&other.tables).map(|(a, b)| a.add(b)).collect();
        Self { locale: self.locale.clone(), phi: self.phi.clone(), tables }
    }

    fn graph(&self) -> TransitionGraph {
        TransitionGraph::build(&self.phi, &self.locale, u128::MAX).expect("form tables already fit in memory")
    }

    /// Adds `delta` to the transition `from -> to` and keeps the alternating axioms.
    pub fn add_to_transition(&mut self, from: usize, to: usize, delta: f64) {
        let g = self.graph();
        for e in 0..self.locale.num_edges() {
            if from != to && g.target(from, e) == to {
                self.tables[e].values_mut()[from] += delta;
            }
            if from != to && g.target(to, e) == from {
                self.tables[e].values_mut()[to] -= delta;
            }
        }
    }

    /// Violations of the alternating axioms as `(edge, code)` pairs.
    pub fn alternating_violations(&self, tol: f64) -> Vec<(usize, usize)> {
        let g = self.graph();
        let mut out = Vec::new();
        for c in 0..g.num_configurations() {
            for e in 0..self.locale.num_edges() {
                let d = g.target(c, e);
                let w = self.value(e, c);
                let bad = if d == c {
                    w.abs() > tol
                } else {
                    let back = self.value(self.locale.reverse(e), d);
                    let rev_ok = g.target(d, self.locale.reverse(e)) == c && (w + back).abs() <= tol;
                    let same_ok = (0..self.locale.num_edges())
                        .all(|e2| g.target(c, e2) != d || (self.value(e2, c) - w).abs() <= tol);
                    !(rev_ok && same_ok)
                };
                if bad {
                    out.push((e, c));
                }
            }
        }
        out
    }

    pub fn is_alternating(&self, tol: f64) -> bool {
        self.alternating_violations(tol).is_empty()
    }

    /// Whether the integral over every closed path vanishes, decided through a potential.
    pub fn is_closed(&self, tol: f64) -> bool {
        self.solve_potential(tol).is_ok()
    }

    /// A potential `f` with `df = omega`, zero at the least code of each component.
    pub fn solve_potential(&self, tol: f64) -> Result<Potential> {
        let g = self.graph();
        let scale = tol * self.max_abs().max(1.0);
        let mut pot = vec![f64::NAN; g.num_configurations()];
        let mut anchors = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..g.num_configurations() {
            if !pot[start].is_nan() {
                continue;
            }
            pot[start] = 0.0;
            anchors.push(start);
            queue.push_back(start);
            while let Some(c) = queue.pop_front() {
                for e in 0..self.locale.num_edges() {
                    let d = g.target(c, e);
                    if d == c {
                        continue;
                    }
                    let expected = pot[c] + self.value(e, c);
                    if pot[d].is_nan() {
                        pot[d] = expected;
                        queue.push_back(d);
                    } else if (pot[d] - expected).abs() > scale {
                        let codec = g.codec();
                        return Err(Error::NotClosed(format!(
                            "transition {:?} -> {:?} along edge {:?} is inconsistent by {:.3e}",
                            codec.decode(c),
                            codec.decode(d),
                            self.locale.edge(e),
                            pot[d] - expected
                        )));
                    }
                }
            }
        }
        let f = FunctionTable::new(self.locale.sites().to_vec(), self.phi.num_states(), pot);
        Ok(Potential { f, anchors })
    }

    /// Applies the conditional expectation onto `lambda` to the tables of edges
    /// inside `lambda`, giving a form on the induced locale.
    pub fn project(&self, lambda: &[Site], nu: &SiteMeasure) -> Result<Form> {
        let idx: Vec<usize> = lambda
            .iter()
            .map(|s| self.locale.site_index(*s).ok_or_else(|| Error::Invalid(format!("site {s} not in locale"))))
            .collect::<Result<_>>()?;
        let sub = self.locale.induced(&idx)?;
        let tables = sub
            .edges()
            .iter()
            .map(|&(o, t)| {
                let e = self.locale.edge_index(
                    self.locale.site_index(sub.sites()[o]).unwrap(),
                    self.locale.site_index(sub.sites()[t]).unwrap(),
                );
                self.tables[e.unwrap()].conditional_expectation(sub.sites(), nu)
            })
            .collect();
        Form::new(&sub, &self.phi, tables)
    }

    /// Edges whose table is not identically zero.
    pub fn support(&self, tol: f64) -> Vec<usize> {
        (0..self.tables.len()).filter(|&e| self.tables[e].max_abs() > tol).collect()
    }

    /// `sup_e ||omega_e||_{r_e}`; the trivial rate when `rate` is `None`.
    pub fn sp_norm(&self, nu: &SiteMeasure, rate: Option<&Rate>) -> f64 {
        (0..self.tables.len()).map(|e| self.edge_norm(e, nu, rate)).fold(0.0, f64::max)
    }

    /// Root sum of squares of `||omega_e||_{r_e}` over the listed edges.
    pub fn r_norm(&self, edges: &[usize], nu: &SiteMeasure, rate: Option<&Rate>) -> f64 {
        edges.iter().map(|&e| self.edge_norm(e, nu, rate).powi(2)).sum::<f64>().sqrt()
    }

    pub fn edge_norm(&self, e: usize, nu: &SiteMeasure, rate: Option<&Rate>) -> f64 {
        match rate {
            Some(r) => weighted_norm(&self.tables[e], r.table(e), nu),
            None => self.tables[e].norm_sq(nu).sqrt(),
        }
    }

    /// `{"locale": {"name", "vertices", "edges"}, "nstates", "edges": [[o,t],..], "tables": [[..],..]}`.
    pub fn to_json(&self) -> Value {
        let undirected: Vec<[usize; 2]> =
            self.locale.edges().iter().filter(|(o, t)| o < t).map(|&(o, t)| [o, t]).collect();
        json!({
            "locale": {"name": self.locale.name(), "vertices": self.locale.num_vertices(), "edges": undirected},
            "nstates": self.phi.num_states(),
            "edges": self.locale.edges().iter().map(|&(o, t)| [o, t]).collect::<Vec<_>>(),
            "tables": self.tables.iter().map(|t| t.values().to_vec()).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Value, phi: &InteractionTable) -> Result<Self> {
        let locale = Locale::from_json(&v.get("locale").ok_or_else(|| Error::Parse("missing locale".into()))?.to_string())?;
        let edges = v.get("edges").and_then(Value::as_array).ok_or_else(|| Error::Parse("missing edges".into()))?;
        let tables = v.get("tables").and_then(Value::as_array).ok_or_else(|| Error::Parse("missing tables".into()))?;
        if edges.len() != tables.len() {
            return Err(Error::Parse("edges and tables differ in length".into()));
        }
        let mut form = Form::zero(&locale, phi);
        for (e, t) in edges.iter().zip(tables) {
            let pair: Option<Vec<usize>> = e.as_array().map(|p| p.iter().filter_map(|x| x.as_u64().map(|x| x as usize)).collect());
            let pair = pair.filter(|p| p.len() == 2).ok_or_else(|| Error::Parse(format!("bad edge {e}")))?;
            let k = locale.edge_index(pair[0], pair[1]).ok_or(Error::EdgeNotInLocale(pair[0], pair[1]))?;
            let vals: Option<Vec<f64>> = t.as_array().map(|a| a.iter().filter_map(Value::as_f64).collect());
            let vals = vals.ok_or_else(|| Error::Parse("table must be an array of numbers".into()))?;
            if vals.len() != form.tables[k].len() {
                return Err(Error::Parse(format!("table for edge {pair:?} has {} values", vals.len())));
            }
            form.tables[k].values_mut().copy_from_slice(&vals);
        }
        Ok(form)
    }
}

#[derive(Clone, Debug)]
pub struct Potential {
    pub f: FunctionTable,
    /// Least configuration code of each transition component; the potential vanishes there.
    pub anchors: Vec<usize>,
}

/// `(df)_e(eta) = f(eta^e) - f(eta)` for every edge of the locale.
pub fn differential(f: &FunctionTable, locale: &Locale, phi: &InteractionTable) -> Result<Form> {
    check_window(f, locale)?;
    let tables = locale
        .edges()
        .iter()
        .map(|&(o, t)| f.move_gradient(phi, locale.sites()[o], locale.sites()[t]))
        .collect();
    Form::new(locale, phi, tables)
}

/// The differential of `f` restricted to the edges inside `lambda`, zero elsewhere.
pub fn restricted_differential(f: &FunctionTable, locale: &Locale, lambda: &[Site], phi: &InteractionTable) -> Result<Form> {
    let full = differential(f, locale, phi)?;
    let inside = |v: usize| lambda.contains(&locale.sites()[v]);
    let tables = (0..locale.num_edges())
        .map(|e| {
            let (o, t) = locale.edge(e);
            if inside(o) && inside(t) {
                full.tables[e].clone()
            } else {
                FunctionTable::zero(phi.num_states())
            }
        })
        .collect();
    Form::new(locale, phi, tables)
}

/// `d(pi^L f) - d_L(pi^L f)`: the discrepancy between differentiating on the
/// whole locale and on the sub-window, after projecting onto the sub-window.
pub fn boundary_differential(
    f: &FunctionTable,
    locale: &Locale,
    lambda: &[Site],
    phi: &InteractionTable,
    nu: &SiteMeasure,
) -> Result<Form> {
    let g = f.conditional_expectation(lambda, nu);
    Ok(differential(&g, locale, phi)?.sub(&restricted_differential(&g, locale, lambda, phi)?))
}

/// Independent closedness oracle: integrates the form over every two-step loop,
/// every simple cycle of length at most four, and every fundamental cycle of a
/// depth-first spanning forest.
pub fn cycle_integrals_vanish(form: &Form, tol: f64) -> bool {
    let g = form.graph();
    let nedges = form.locale.num_edges();
    let n = g.num_configurations();
    let scale = tol * form.max_abs().max(1.0);
    // one representative arc value per ordered pair of distinct configurations
    let mut arc: HashMap<(usize, usize), f64> = HashMap::new();
    let mut nbrs = vec![Vec::new(); n];
    for c in 0..n {
        for e in 0..nedges {
            let d = g.target(c, e);
            if d == c {
                continue;
            }
            let w = form.value(e, c);
            match arc.get(&(c, d)) {
                Some(&w0) if (w0 - w).abs() > scale => return false,
                Some(_) => {}
                None => {
                    arc.insert((c, d), w);
                    nbrs[c].push(d);
                }
            }
        }
    }
    for (&(c, d), &w) in &arc {
        match arc.get(&(d, c)) {
            Some(&back) if (w + back).abs() <= scale => {}
            _ => return false,
        }
    }
    let integral = |path: &[usize]| -> f64 { path.windows(2).map(|p| arc[&(p[0], p[1])]).sum() };
    // short cycles, each started at its least vertex
    for a in 0..n {
        for &b in &nbrs[a] {
            if b < a {
                continue;
            }
            for &c in &nbrs[b] {
                if c <= a || c == b {
                    continue;
                }
                if arc.contains_key(&(c, a)) && integral(&[a, b, c, a]).abs() > scale {
                    return false;
                }
                for &d in &nbrs[c] {
                    if d <= a || d == b || d == c {
                        continue;
                    }
                    if arc.contains_key(&(d, a)) && integral(&[a, b, c, d, a]).abs() > scale {
                        return false;
                    }
                }
            }
        }
    }
    // fundamental cycles of a depth-first forest
    let mut parent = vec![usize::MAX; n];
    let mut depth = vec![0usize; n];
    let mut seen = vec![false; n];
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut stack = vec![(root, 0usize)];
        while let Some(&mut (v, ref mut i)) = stack.last_mut() {
            if *i < nbrs[v].len() {
                let w = nbrs[v][*i];
                *i += 1;
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = v;
                    depth[w] = depth[v] + 1;
                    stack.push((w, 0));
                }
            } else {
                stack.pop();
            }
        }
    }
    for (&(u, v), _) in &arc {
        if parent[v] == u || parent[u] == v {
            continue;
        }
        // u -> v, then the tree path from v back to u
        let (mut a, mut b) = (u, v);
        let mut up_from_v = vec![v];
        let mut up_from_u = vec![u];
        while a != b {
            if depth[a] >= depth[b] {
                a = parent[a];
                up_from_u.push(a);
            } else {
                b = parent[b];
                up_from_v.push(b);
            }
        }
        up_from_u.pop();
        let mut path = vec![u];
        path.extend(&up_from_v);
        path.extend(up_from_u.iter().rev());
        if integral(&path).abs() > scale * path.len() as f64 {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p2() -> Locale {
        Locale::path(2).unwrap()
    }

    #[test]
    fn differential_examples() {
        let sep = InteractionTable::sep(1);
        let x = Site::vertex(0);
        let f = FunctionTable::single_site(x, 2, |a| a as f64);
        let w = differential(&f, &p2(), &sep).unwrap();
        let e = p2().edge_index(0, 1).unwrap();
        let expect = FunctionTable::from_fn(p2().sites(), 2, |st| st[1] as f64 - st[0] as f64);
        assert!(w.table(e).max_diff(&expect) < 1e-15);
        assert!(w.is_alternating(1e-12));
        let c = differential(&FunctionTable::constant(2, 3.0), &p2(), &sep).unwrap();
        assert_eq!(c.max_abs(), 0.0);
        let xi = FunctionTable::from_fn(p2().sites(), 2, |st| (st[0] + st[1]) as f64);
        assert_eq!(differential(&xi, &p2(), &sep).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn potentials_and_perturbations() {
        let gep = InteractionTable::gep(2);
        let k3 = Locale::complete(3).unwrap();
        let f = FunctionTable::from_fn(k3.sites(), 3, |st| (st[0] * 7 + st[1] * st[2]) as f64 * 0.1);
        let w = differential(&f, &k3, &gep).unwrap();
        let p = w.solve_potential(CLOSED_TOL).unwrap();
        assert!(differential(&p.f, &k3, &gep).unwrap().max_diff(&w) < 1e-12);
        assert!(p.anchors.iter().all(|&a| p.f.values()[a] == 0.0));
        assert!(cycle_integrals_vanish(&w, CLOSED_TOL));

        let mut bad = w.clone();
        // (1,1,0) -> (0,2,0) along edge (0,1) lies on a cycle
        let (from, to) = (9 + 3, 6);
        bad.add_to_transition(from, to, 0.5);
        assert!(bad.is_alternating(1e-12));
        assert!(matches!(bad.solve_potential(CLOSED_TOL), Err(Error::NotClosed(_))));
        assert!(!cycle_integrals_vanish(&bad, CLOSED_TOL));

        let z = Form::zero(&k3, &gep);
        assert!(z.is_closed(CLOSED_TOL));
        assert_eq!(z.solve_potential(CLOSED_TOL).unwrap().f.max_abs(), 0.0);
    }

    #[test]
    fn projection_commutes_with_differential() {
        let gep = InteractionTable::gep(2);
        let nu = SiteMeasure::new(vec![0.5, 0.3, 0.2]).unwrap();
        let p4 = Locale::path(4).unwrap();
        let f = FunctionTable::from_fn(p4.sites(), 3, |st| {
            (st[0] as f64).sin() + (st[1] * st[2]) as f64 - 0.3 * (st[3] * st[1]) as f64
        });
        let lam: Vec<Site> = (0..3).map(Site::vertex).collect();
        let lhs = differential(&f, &p4, &gep).unwrap().project(&lam, &nu).unwrap();
        let sub = Locale::path(3).unwrap();
        let rhs = differential(&f.conditional_expectation(&lam, &nu), &sub, &gep).unwrap();
        assert!(lhs.max_diff(&rhs) < 1e-12);
        assert!(lhs.is_closed(CLOSED_TOL));
    }

    #[test]
    fn boundary_differential_support() {
        let gep = InteractionTable::gep(2);
        let nu = SiteMeasure::uniform(3);
        let p4 = Locale::path(4).unwrap();
        let f = FunctionTable::from_fn(p4.sites(), 3, |st| (st[0] * 3 + st[1] * st[2] + st[3]) as f64);
        let lam = [Site::vertex(0), Site::vertex(1)];
        let b = boundary_differential(&f, &p4, &lam, &gep, &nu).unwrap();
        let allowed = [p4.edge_index(1, 2).unwrap(), p4.edge_index(2, 1).unwrap()];
        assert!(b.support(1e-12).iter().all(|e| allowed.contains(e)));
        assert!(!b.support(1e-12).is_empty());
        let all: Vec<Site> = p4.sites().to_vec();
        assert_eq!(boundary_differential(&f, &p4, &all, &gep, &nu).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn json_round_trip() {
        let sep = InteractionTable::sep(1);
        let f = FunctionTable::single_site(Site::vertex(1), 2, |a| a as f64 * 2.5);
        let p3 = Locale::path(3).unwrap();
        let w = differential(&f, &p3, &sep).unwrap();
        let back = Form::from_json(&w.to_json(), &sep).unwrap();
        assert_eq!(back.max_diff(&w), 0.0);
    }
}
