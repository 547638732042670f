//! Configurations on a finite locale, single-edge transitions, moves and
//! exchanges, the transition graph, and the conserved-class connectivity check.

use std::collections::{HashMap, VecDeque};

use num::BigRational;
use num::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::interaction::{ConsvBasis, InteractionTable};
use crate::locale::{Locale, Site};
use crate::measure::{union, FunctionTable};

/// Default cap on the number of configurations enumerated by one call.
pub const DEFAULT_BUDGET: u128 = 1 << 22;

/// Mixed-radix configuration codes; vertex 0 is the most significant digit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Codec {
    nstates: usize,
    place: Vec<usize>,
    size: usize,
}

impl Codec {
    pub fn new(nstates: usize, len: usize, budget: u128) -> Result<Self> {
        let needed = (nstates as u128).checked_pow(len as u32).unwrap_or(u128::MAX);
        if needed > budget || needed > usize::MAX as u128 {
            return Err(Error::BudgetExceeded { needed, budget });
        }
        let place = (0..len).map(|v| nstates.pow((len - 1 - v) as u32)).collect();
        Ok(Self { nstates, place, size: needed as usize })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn nstates(&self) -> usize {
        self.nstates
    }

    pub fn len(&self) -> usize {
        self.place.len()
    }

    pub fn is_empty(&self) -> bool {
        self.place.is_empty()
    }

    pub fn digit(&self, code: usize, v: usize) -> usize {
        (code / self.place[v]) % self.nstates
    }

    pub fn with_digit(&self, code: usize, v: usize, s: usize) -> usize {
        code + s * self.place[v] - self.digit(code, v) * self.place[v]
    }

    pub fn decode(&self, code: usize) -> Vec<usize> {
        (0..self.len()).map(|v| self.digit(code, v)).collect()
    }

    pub fn encode(&self, states: &[usize]) -> usize {
        states.iter().fold(0, |c, &s| c * self.nstates + s)
    }

    /// Code after replacing the pair at `(o, t)` by its image under the interaction.
    pub fn apply_pair(&self, phi: &InteractionTable, code: usize, o: usize, t: usize) -> usize {
        let (a, b) = (self.digit(code, o), self.digit(code, t));
        let (a2, b2) = phi.apply(a, b);
        code + a2 * self.place[o] + b2 * self.place[t] - a * self.place[o] - b * self.place[t]
    }
}

fn check_states(eta: &[usize], n: usize, locale: &Locale) -> Result<()> {
    if eta.len() != locale.num_vertices() {
        return Err(Error::Invalid(format!(
            "configuration has {} entries for {} vertices",
            eta.len(),
            locale.num_vertices()
        )));
    }
    if let Some(s) = eta.iter().find(|&&s| s >= n) {
        return Err(Error::Invalid(format!("state {s} out of range")));
    }
    Ok(())
}

/// `eta^e` for the edge from vertex `o` to vertex `t`.
pub fn apply_edge(phi: &InteractionTable, locale: &Locale, eta: &[usize], o: usize, t: usize) -> Result<Vec<usize>> {
    check_states(eta, phi.num_states(), locale)?;
    if locale.edge_index(o, t).is_none() {
        return Err(Error::EdgeNotInLocale(o, t));
    }
    Ok(apply_move(phi, eta, o, t))
}

/// `eta^{x->y}`: the interaction applied to the pair `(x, y)` whether or not it is an edge.
pub fn apply_move(phi: &InteractionTable, eta: &[usize], x: usize, y: usize) -> Vec<usize> {
    let mut out = eta.to_vec();
    if x != y {
        let (a, b) = phi.apply(eta[x], eta[y]);
        out[x] = a;
        out[y] = b;
    }
    out
}

/// `eta^{x,y}`: the states at `x` and `y` swapped.
pub fn exchange(eta: &[usize], x: usize, y: usize) -> Vec<usize> {
    let mut out = eta.to_vec();
    out.swap(x, y);
    out
}

/// Componentwise sums of the basis vectors over the configuration.
pub fn conserved_vector(eta: &[usize], basis: &ConsvBasis) -> Vec<BigRational> {
    basis
        .vectors()
        .iter()
        .map(|xi| eta.iter().fold(BigRational::zero(), |acc, &s| acc + &xi[s]))
        .collect()
}

/// Same as [`conserved_vector`] for integer-scaled basis vectors.
pub fn integer_conserved_vector(eta: &[usize], scaled: &[Vec<i64>]) -> Vec<i64> {
    scaled.iter().map(|xi| eta.iter().map(|&s| xi[s]).sum()).collect()
}

/// The directed graph on `S^V` with an arc `eta -> eta^e` for every edge `e`.
#[derive(Clone, Debug)]
pub struct TransitionGraph {
    codec: Codec,
    nedges: usize,
    targets: Vec<u32>,
    component: Vec<u32>,
    ncomponents: usize,
}

impl TransitionGraph {
    pub fn build(phi: &InteractionTable, locale: &Locale, budget: u128) -> Result<Self> {
        let codec = Codec::new(phi.num_states(), locale.num_vertices(), budget)?;
        if codec.size() > u32::MAX as usize {
            return Err(Error::BudgetExceeded { needed: codec.size() as u128, budget: u32::MAX as u128 });
        }
        let nedges = locale.num_edges();
        let mut targets = Vec::with_capacity(codec.size() * nedges);
        for code in 0..codec.size() {
            for &(o, t) in locale.edges() {
                targets.push(codec.apply_pair(phi, code, o, t) as u32);
            }
        }
        let mut component = vec![u32::MAX; codec.size()];
        let mut ncomponents = 0;
        let mut queue = VecDeque::new();
        for start in 0..codec.size() {
            if component[start] != u32::MAX {
                continue;
            }
            component[start] = ncomponents as u32;
            queue.push_back(start);
            while let Some(c) = queue.pop_front() {
                for &d in &targets[c * nedges..(c + 1) * nedges] {
                    if component[d as usize] == u32::MAX {
                        component[d as usize] = ncomponents as u32;
                        queue.push_back(d as usize);
                    }
                }
            }
            ncomponents += 1;
        }
        Ok(Self { codec, nedges, targets, component, ncomponents })
    }

    pub fn codec(&self) -> &Codec {
        &self.codec
    }

    pub fn num_configurations(&self) -> usize {
        self.codec.size()
    }

    pub fn num_edges(&self) -> usize {
        self.nedges
    }

    pub fn target(&self, code: usize, e: usize) -> usize {
        self.targets[code * self.nedges + e] as usize
    }

    pub fn component(&self, code: usize) -> usize {
        self.component[code] as usize
    }

    pub fn num_components(&self) -> usize {
        self.ncomponents
    }

    /// Configuration codes grouped by component, each group in increasing order.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.ncomponents];
        for (c, &k) in self.component.iter().enumerate() {
            out[k as usize].push(c);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct QuantificationReport {
    pub locale: String,
    pub configurations: usize,
    pub classes: usize,
    pub components: usize,
    pub disconnected_classes: usize,
    /// Two configurations with equal conserved sums and no connecting path.
    pub witness: Option<(Vec<usize>, Vec<usize>)>,
    pub connected: bool,
}

/// Partitions `S^V` by conserved sums and checks each class is one transition component.
pub fn irreducibly_quantified_check(phi: &InteractionTable, locale: &Locale, budget: u128) -> Result<QuantificationReport> {
    let graph = TransitionGraph::build(phi, locale, budget)?;
    let scaled = crate::interaction::conserved_basis(phi).integer_scaled();
    let codec = graph.codec();
    // class key -> (first code, its component, whether the class is split)
    let mut classes: HashMap<Vec<i64>, (usize, usize, bool)> = HashMap::new();
    let mut witness = None;
    for code in 0..codec.size() {
        let key = integer_conserved_vector(&codec.decode(code), &scaled);
        let comp = graph.component(code);
        let entry = classes.entry(key).or_insert((code, comp, false));
        if entry.1 != comp {
            if !entry.2 && witness.is_none() {
                witness = Some((codec.decode(entry.0), codec.decode(code)));
            }
            entry.2 = true;
        }
    }
    let disconnected_classes = classes.values().filter(|c| c.2).count();
    Ok(QuantificationReport {
        locale: locale.name().to_string(),
        configurations: codec.size(),
        classes: classes.len(),
        components: graph.num_components(),
        disconnected_classes,
        connected: disconnected_classes == 0,
        witness,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FamilyReport {
    /// Always of the form "verified on family {..}": a finite sample, not a proof.
    pub label: String,
    pub reports: Vec<QuantificationReport>,
    pub all_connected: bool,
}

/// The default sample of locales: P2, P3, K3 and the 2x2 box.
pub fn default_family() -> Vec<Locale> {
    ["p2", "p3", "k3", "box2x2"].iter().map(|n| Locale::from_name(n).unwrap()).collect()
}

pub fn check_family(phi: &InteractionTable, family: &[Locale], budget: u128) -> Result<FamilyReport> {
    let reports = family
        .iter()
        .map(|l| irreducibly_quantified_check(phi, l, budget))
        .collect::<Result<Vec<_>>>()?;
    let names: Vec<&str> = family.iter().map(Locale::name).collect();
    Ok(FamilyReport {
        label: format!("verified on family {{{}}}", names.join(", ")),
        all_connected: reports.iter().all(|r| r.connected),
        reports,
    })
}

/// A shortest sequence of edge indices carrying `from` to `to`, or `None` when
/// the two configurations lie in different components.
pub fn find_path(
    phi: &InteractionTable,
    locale: &Locale,
    from: &[usize],
    to: &[usize],
    budget: u128,
) -> Result<Option<Vec<usize>>> {
    check_states(from, phi.num_states(), locale)?;
    check_states(to, phi.num_states(), locale)?;
    let basis = crate::interaction::conserved_basis(phi);
    if conserved_vector(from, &basis) != conserved_vector(to, &basis) {
        return Err(Error::InvalidQuery("configurations carry different conserved sums".into()));
    }
    let codec = Codec::new(phi.num_states(), locale.num_vertices(), budget)?;
    let (start, goal) = (codec.encode(from), codec.encode(to));
    let mut via: HashMap<usize, (usize, usize)> = HashMap::new();
    let mut queue = VecDeque::from([start]);
    via.insert(start, (start, usize::MAX));
    while let Some(c) = queue.pop_front() {
        if c == goal {
            let mut path = Vec::new();
            let mut cur = goal;
            while cur != start {
                let (prev, e) = via[&cur];
                path.push(e);
                cur = prev;
            }
            path.reverse();
            return Ok(Some(path));
        }
        for (e, &(o, t)) in locale.edges().iter().enumerate() {
            let d = codec.apply_pair(phi, c, o, t);
            via.entry(d).or_insert_with(|| {
                queue.push_back(d);
                (c, e)
            });
        }
    }
    Ok(None)
}

/// Whether `f` is constant on every set of configurations sharing the conserved
/// sums over `lambda` and the states off `lambda`.
pub fn is_class_measurable(f: &FunctionTable, lambda: &[Site], basis: &ConsvBasis, tol: f64) -> bool {
    let mut lambda = lambda.to_vec();
    lambda.sort();
    lambda.dedup();
    let window = union(f.sites(), &lambda);
    let g = f.extend(&window);
    let inside: Vec<bool> = window.iter().map(|s| lambda.binary_search(s).is_ok()).collect();
    let scaled = basis.integer_scaled();
    let mut seen: HashMap<(Vec<i64>, Vec<usize>), f64> = HashMap::new();
    for (code, &v) in g.values().iter().enumerate() {
        let st = g.decode(code);
        let (mut ins, mut outs) = (Vec::new(), Vec::new());
        for (k, &s) in st.iter().enumerate() {
            if inside[k] {
                ins.push(s);
            } else {
                outs.push(s);
            }
        }
        let key = (integer_conserved_vector(&ins, &scaled), outs);
        let first = *seen.entry(key).or_insert(v);
        if (first - v).abs() > tol {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interaction::conserved_basis;

    #[test]
    fn edges_moves_exchanges() {
        let p2 = Locale::path(2).unwrap();
        let sep = InteractionTable::sep(1);
        assert_eq!(apply_edge(&sep, &p2, &[1, 0], 0, 1).unwrap(), vec![0, 1]);
        let gep = InteractionTable::gep(2);
        assert_eq!(apply_edge(&gep, &p2, &[0, 2], 0, 1).unwrap(), vec![0, 2]);
        assert_eq!(apply_move(&gep, &[2, 0], 0, 1), vec![1, 1]);
        assert_eq!(apply_move(&gep, &[2, 0], 1, 1), vec![2, 0]);
        assert_eq!(exchange(&[2, 0], 0, 1), vec![0, 2]);
        let p3 = Locale::path(3).unwrap();
        assert!(matches!(apply_edge(&sep, &p3, &[0, 1, 0], 0, 2), Err(Error::EdgeNotInLocale(0, 2))));
    }

    #[test]
    fn conserved_vectors() {
        let basis = conserved_basis(&InteractionTable::sep(2));
        let v = conserved_vector(&[1, 2, 1], &basis);
        assert_eq!(v, vec![BigRational::from_integer(2.into()), BigRational::from_integer(1.into())]);
        assert!(conserved_vector(&[0, 0, 0], &basis).iter().all(Zero::is_zero));
    }

    #[test]
    fn quantification_examples() {
        let p3 = Locale::path(3).unwrap();
        assert!(irreducibly_quantified_check(&InteractionTable::sep(1), &p3, DEFAULT_BUDGET).unwrap().connected);
        let k3 = Locale::complete(3).unwrap();
        assert!(irreducibly_quantified_check(&InteractionTable::gep(2), &k3, DEFAULT_BUDGET).unwrap().connected);
        let p2 = Locale::path(2).unwrap();
        let r = irreducibly_quantified_check(&InteractionTable::identity(2), &p2, DEFAULT_BUDGET).unwrap();
        assert!(!r.connected);
        assert_eq!(r.witness, Some((vec![0, 1], vec![1, 0])));
        let big = Locale::complete(30).unwrap();
        assert!(matches!(
            irreducibly_quantified_check(&InteractionTable::sep(1), &big, DEFAULT_BUDGET),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn paths() {
        let p2 = Locale::path(2).unwrap();
        let sep = InteractionTable::sep(1);
        assert_eq!(find_path(&sep, &p2, &[1, 0], &[1, 0], DEFAULT_BUDGET).unwrap(), Some(vec![]));
        assert_eq!(find_path(&sep, &p2, &[1, 0], &[0, 1], DEFAULT_BUDGET).unwrap().unwrap().len(), 1);
        let id = InteractionTable::identity(2);
        assert_eq!(find_path(&id, &p2, &[1, 0], &[0, 1], DEFAULT_BUDGET).unwrap(), None);
        assert!(matches!(find_path(&sep, &p2, &[1, 0], &[1, 1], DEFAULT_BUDGET), Err(Error::InvalidQuery(_))));
    }

    #[test]
    fn class_measurability() {
        let sep = InteractionTable::sep(2);
        let basis = conserved_basis(&sep);
        let lam = [Site::vertex(0), Site::vertex(1)];
        let ones = FunctionTable::from_fn(&lam, 3, |st| st.iter().filter(|&&s| s == 1).count() as f64);
        assert!(is_class_measurable(&ones, &lam, &basis, 1e-12));
        let eta0 = FunctionTable::single_site(Site::vertex(0), 3, |a| a as f64);
        assert!(!is_class_measurable(&eta0, &lam, &basis, 1e-12));
        let outside = FunctionTable::single_site(Site::vertex(2), 3, |a| a as f64);
        assert!(is_class_measurable(&outside, &lam, &basis, 1e-12));
    }
}
