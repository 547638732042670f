//! Interaction tables on a finite state set, the inversion axiom, and the
//! space of conserved quantities computed in exact rational arithmetic.

use std::collections::BTreeMap;

use num::{BigInt, BigRational, Integer, One, ToPrimitive, Zero};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateSpace {
    labels: Vec<String>,
    base: usize,
}

impl StateSpace {
    pub fn new(labels: Vec<String>, base: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Invalid("state space must be nonempty".into()));
        }
        if base >= labels.len() {
            return Err(Error::Invalid(format!("base state index {base} out of range")));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::Invalid(format!("duplicate state label {l:?}")));
            }
        }
        Ok(Self { labels, base })
    }

    /// States `0..n` with base state `0`.
    pub fn numbered(n: usize) -> Result<Self> {
        Self::new((0..n).map(|s| s.to_string()).collect(), 0)
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// The map on ordered pairs of states describing a transition across one edge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InteractionTable {
    space: StateSpace,
    map: Vec<(usize, usize)>,
}

impl InteractionTable {
    /// `map[s1 * n + s2]` is the image of `(s1, s2)`.
    pub fn new(space: StateSpace, map: Vec<(usize, usize)>) -> Result<Self> {
        let n = space.size();
        if map.len() != n * n {
            return Err(Error::Invalid(format!(
                "interaction map has {} entries, expected {}",
                map.len(),
                n * n
            )));
        }
        if let Some(&(a, b)) = map.iter().find(|&&(a, b)| a >= n || b >= n) {
            return Err(Error::Invalid(format!("image ({a}, {b}) out of range")));
        }
        Ok(Self { space, map })
    }

    pub fn from_fn(space: StateSpace, f: impl Fn(usize, usize) -> (usize, usize)) -> Result<Self> {
        let n = space.size();
        let map = (0..n * n).map(|k| f(k / n, k % n)).collect();
        Self::new(space, map)
    }

    /// Multi-species exclusion on `{0..kappa}`: the two components are exchanged.
    pub fn sep(kappa: usize) -> Self {
        Self::from_fn(StateSpace::numbered(kappa + 1).unwrap(), |a, b| (b, a)).unwrap()
    }

    /// Generalized exclusion on `{0..kappa}`: one particle hops from the origin
    /// to the target when the origin is occupied and the target is not full.
    pub fn gep(kappa: usize) -> Self {
        Self::from_fn(StateSpace::numbered(kappa + 1).unwrap(), |a, b| {
            if a > 0 && b < kappa {
                (a - 1, b + 1)
            } else {
                (a, b)
            }
        })
        .unwrap()
    }

    /// The map fixing every pair.
    pub fn identity(n: usize) -> Self {
        Self::from_fn(StateSpace::numbered(n).unwrap(), |a, b| (a, b)).unwrap()
    }

    /// Parses `{"states":[...], "base":0, "map":{"s1,s2":"t1,t2", ...}}`.
    /// Every ordered pair must be listed.
    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let states = v
            .get("states")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("missing \"states\" array".into()))?;
        let labels: Vec<String> = states.iter().map(json_label).collect();
        let base = match v.get("base") {
            None => 0,
            Some(b) => b
                .as_u64()
                .ok_or_else(|| Error::Parse("\"base\" must be a state index".into()))?
                as usize,
        };
        let space = StateSpace::new(labels, base)?;
        let entries = v
            .get("map")
            .and_then(Value::as_object)
            .ok_or_else(|| Error::Parse("missing \"map\" object".into()))?;
        let n = space.size();
        let mut map: Vec<Option<(usize, usize)>> = vec![None; n * n];
        let pair = |s: &str| -> Result<(usize, usize)> {
            let parts: Vec<&str> = s.split(',').map(str::trim).collect();
            if parts.len() != 2 {
                return Err(Error::Parse(format!("pair {s:?} is not of the form \"a,b\"")));
            }
            let look = |p: &str| {
                space
                    .index_of(p)
                    .ok_or_else(|| Error::Parse(format!("unknown state {p:?}")))
            };
            Ok((look(parts[0])?, look(parts[1])?))
        };
        for (k, val) in entries {
            let (a, b) = pair(k)?;
            let target = val
                .as_str()
                .ok_or_else(|| Error::Parse(format!("image of {k:?} must be a string")))?;
            if map[a * n + b].replace(pair(target)?).is_some() {
                return Err(Error::Parse(format!("pair {k:?} listed twice")));
            }
        }
        let mut full = Vec::with_capacity(n * n);
        for (k, m) in map.into_iter().enumerate() {
            match m {
                Some(p) => full.push(p),
                None => {
                    return Err(Error::Invalid(format!(
                        "map is not total: missing \"{},{}\"",
                        space.labels[k / n],
                        space.labels[k % n]
                    )))
                }
            }
        }
        Self::new(space, full)
    }

    pub fn to_json(&self) -> Value {
        let n = self.num_states();
        let l = &self.space.labels;
        let mut map = serde_json::Map::new();
        for a in 0..n {
            for b in 0..n {
                let (c, d) = self.apply(a, b);
                map.insert(format!("{},{}", l[a], l[b]), Value::String(format!("{},{}", l[c], l[d])));
            }
        }
        serde_json::json!({ "states": l, "base": self.space.base, "map": map })
    }

    /// Builds one of `sep:K`, `gep:K`, `identity:N` (parentheses also accepted).
    pub fn from_name(name: &str) -> Option<Self> {
        let (kind, arg) = split_call(name)?;
        let k: usize = arg.parse().ok()?;
        match kind {
            "sep" if k >= 1 => Some(Self::sep(k)),
            "gep" if k >= 1 => Some(Self::gep(k)),
            "identity" | "id" if k >= 1 => Some(Self::identity(k)),
            _ => None,
        }
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn num_states(&self) -> usize {
        self.space.size()
    }

    pub fn base(&self) -> usize {
        self.space.base
    }

    #[inline]
    pub fn apply(&self, s1: usize, s2: usize) -> (usize, usize) {
        self.map[s1 * self.space.size() + s2]
    }

    /// The conjugate by the component swap: `(s1, s2) -> swap(phi(s2, s1))`.
    pub fn apply_reversed(&self, s1: usize, s2: usize) -> (usize, usize) {
        let (a, b) = self.apply(s2, s1);
        (b, a)
    }

    /// Conjugates the table by a permutation of the states; `perm[s]` is the new index of `s`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        let n = self.num_states();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::Invalid("relabeling must be a permutation of the states".into()));
        }
        let mut labels = vec![String::new(); n];
        for s in 0..n {
            labels[perm[s]] = self.space.labels[s].clone();
        }
        let mut map = vec![(0, 0); n * n];
        for a in 0..n {
            for b in 0..n {
                let (c, d) = self.apply(a, b);
                map[perm[a] * n + perm[b]] = (perm[c], perm[d]);
            }
        }
        Self::new(StateSpace::new(labels, perm[self.space.base])?, map)
    }
}

fn json_label(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub(crate) fn split_call(name: &str) -> Option<(&str, &str)> {
    let name = name.trim();
    if let Some((k, rest)) = name.split_once('(') {
        return Some((k.trim(), rest.strip_suffix(')')?.trim()));
    }
    name.split_once(':').map(|(k, a)| (k.trim(), a.trim()))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationReport {
    /// Pairs `s` with `phi(s) != s` and `phi_bar(phi(s)) != s`.
    pub violations: Vec<(usize, usize)>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_interaction(phi: &InteractionTable) -> ValidationReport {
    let n = phi.num_states();
    let mut violations = Vec::new();
    for a in 0..n {
        for b in 0..n {
            let img = phi.apply(a, b);
            if img != (a, b) && phi.apply_reversed(img.0, img.1) != (a, b) {
                violations.push((a, b));
            }
        }
    }
    ValidationReport { violations }
}

/// A basis of the conserved quantities, one rational vector per quantity,
/// indexed by state. Rows are in reduced echelon form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConsvBasis {
    vectors: Vec<Vec<BigRational>>,
}

impl ConsvBasis {
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[Vec<BigRational>] {
        &self.vectors
    }

    pub fn vector_f64(&self, i: usize) -> Vec<f64> {
        self.vectors[i].iter().map(rational_to_f64).collect()
    }

    pub fn as_f64(&self) -> Vec<Vec<f64>> {
        (0..self.dim()).map(|i| self.vector_f64(i)).collect()
    }

    /// Each vector multiplied by the least common multiple of its denominators.
    pub fn integer_scaled(&self) -> Vec<Vec<i64>> {
        self.vectors
            .iter()
            .map(|v| {
                let l = v.iter().fold(BigInt::one(), |acc, q| acc.lcm(q.denom()));
                v.iter()
                    .map(|q| (q.numer() * (&l / q.denom())).to_i64().expect("conserved quantity overflows i64"))
                    .collect()
            })
            .collect()
    }

    pub fn to_strings(&self) -> Vec<Vec<String>> {
        self.vectors.iter().map(|v| v.iter().map(|q| q.to_string()).collect()).collect()
    }
}

pub fn rational_to_f64(q: &BigRational) -> f64 {
    q.numer().to_f64().unwrap() / q.denom().to_f64().unwrap()
}

/// Reduced row echelon form with pivots chosen left to right; returns the pivot columns.
pub fn rref(m: &mut Vec<Vec<BigRational>>) -> Vec<usize> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for x in m[r].iter_mut() {
            *x = &*x * &inv;
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for k in 0..cols {
                    let sub = &f * &m[r][k];
                    m[i][k] -= sub;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    m.truncate(r);
    pivots
}

/// Basis of `{x : A x = 0}` over the rationals, returned in reduced echelon form.
pub fn rational_null_space(rows: &[Vec<BigRational>], ncols: usize) -> Vec<Vec<BigRational>> {
    let mut m = rows.to_vec();
    let pivots = rref(&mut m);
    let free: Vec<usize> = (0..ncols).filter(|c| !pivots.contains(c)).collect();
    let mut basis: Vec<Vec<BigRational>> = free
        .iter()
        .map(|&f| {
            let mut v = vec![BigRational::zero(); ncols];
            v[f] = BigRational::one();
            for (row, &p) in m.iter().zip(&pivots) {
                v[p] = -row[f].clone();
            }
            v
        })
        .collect();
    rref(&mut basis);
    basis
}

fn conservation_constraints(phi: &InteractionTable) -> Vec<Vec<BigRational>> {
    let n = phi.num_states();
    let mut rows = Vec::new();
    let mut base = vec![BigRational::zero(); n];
    base[phi.base()] = BigRational::one();
    rows.push(base);
    for a in 0..n {
        for b in 0..n {
            let (c, d) = phi.apply(a, b);
            let mut row = vec![BigRational::zero(); n];
            for (s, w) in [(c, 1), (d, 1), (a, -1), (b, -1)] {
                row[s] += BigRational::from_integer(BigInt::from(w));
            }
            if row.iter().any(|q| !q.is_zero()) {
                rows.push(row);
            }
        }
    }
    rows
}

pub fn conserved_basis(phi: &InteractionTable) -> ConsvBasis {
    let rows = conservation_constraints(phi);
    ConsvBasis { vectors: rational_null_space(&rows, phi.num_states()) }
}

/// True when there is one conserved quantity and the monoid generated by its
/// values is free on one generator or is a cyclic group.
pub fn is_simple(phi: &InteractionTable) -> bool {
    let basis = conserved_basis(phi);
    if basis.dim() != 1 {
        return false;
    }
    let values: Vec<i64> = basis.integer_scaled()[0].iter().copied().filter(|&v| v != 0).collect();
    if values.is_empty() {
        return false;
    }
    let mixed = values.iter().any(|&v| v > 0) && values.iter().any(|&v| v < 0);
    if mixed {
        return true;
    }
    let g = values.iter().fold(0i64, |acc, &v| acc.gcd(&v));
    let smallest = values.iter().map(|v| v.abs()).min().unwrap();
    g.abs() == smallest
}

/// Checks a candidate quantity against the base normalization and every table entry.
pub fn is_conserved(phi: &InteractionTable, xi: &[BigRational]) -> bool {
    let n = phi.num_states();
    if xi.len() != n || !xi[phi.base()].is_zero() {
        return false;
    }
    (0..n).all(|a| {
        (0..n).all(|b| {
            let (c, d) = phi.apply(a, b);
            &xi[c] + &xi[d] == &xi[a] + &xi[b]
        })
    })
}

/// Bookkeeping view of a basis vector: state label to value.
pub fn labeled(phi: &InteractionTable, xi: &[BigRational]) -> BTreeMap<String, String> {
    phi.space()
        .labels()
        .iter()
        .zip(xi)
        .map(|(l, q)| (l.clone(), q.to_string()))
        .collect()
}
