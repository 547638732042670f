//! Finite locales (connected symmetric simple graphs), lattice boxes in Z^d,
//! boundaries, perimeters, and the shift-orbit counts used for lattice windows.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde_json::Value;

use crate::error::{Error, Result};

/// Largest lattice dimension a [`Site`] can carry.
pub const MAX_DIM: usize = 3;

/// A vertex label. Vertices of abstract locales use the first coordinate only;
/// lattice vertices use the first `d` coordinates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Site(pub [i32; MAX_DIM]);

impl Site {
    pub const ORIGIN: Site = Site([0; MAX_DIM]);

    pub fn vertex(i: usize) -> Site {
        Site([i as i32, 0, 0])
    }

    pub fn lattice(coords: &[i32]) -> Site {
        assert!(coords.len() <= MAX_DIM, "lattice dimension above {MAX_DIM}");
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Site(c)
    }

    /// The unit vector along axis `j`.
    pub fn unit(j: usize) -> Site {
        let mut c = [0; MAX_DIM];
        c[j] = 1;
        Site(c)
    }

    pub fn coord(&self, j: usize) -> i32 {
        self.0[j]
    }

    pub fn l1(&self) -> i32 {
        self.0.iter().map(|c| c.abs()).sum()
    }

    pub fn linf(&self) -> i32 {
        self.0.iter().map(|c| c.abs()).max().unwrap()
    }

    /// The `2d` nearest neighbours in Z^d.
    pub fn lattice_neighbors(&self, d: usize) -> impl Iterator<Item = Site> + '_ {
        (0..d).flat_map(move |j| [*self + Site::unit(j), *self - Site::unit(j)])
    }

    pub fn to_vec(&self, d: usize) -> Vec<i32> {
        self.0[..d].to_vec()
    }
}

impl Add for Site {
    type Output = Site;
    fn add(self, o: Site) -> Site {
        Site([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl Sub for Site {
    type Output = Site;
    fn sub(self, o: Site) -> Site {
        Site([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Neg for Site {
    type Output = Site;
    fn neg(self) -> Site {
        Site([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let last = self.0.iter().rposition(|&c| c != 0).unwrap_or(0);
        let parts: Vec<String> = self.0[..=last].iter().map(i32::to_string).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// A finite connected symmetric simple directed graph. Sites are kept sorted,
/// so vertex indices agree with the digit order of configuration codes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Locale {
    name: String,
    sites: Vec<Site>,
    edges: Vec<(usize, usize)>,
    reverse: Vec<usize>,
    out: Vec<Vec<usize>>,
}

impl Locale {
    /// Builds a locale from sites and undirected pairs of site indices. Both
    /// orientations are added. Fails when the graph has loops or is disconnected.
    pub fn new(name: impl Into<String>, sites: Vec<Site>, pairs: &[(usize, usize)]) -> Result<Self> {
        let name = name.into();
        let n = sites.len();
        if n == 0 {
            return Err(Error::Invalid("locale must have at least one vertex".into()));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| sites[i]);
        let mut new_index = vec![0; n];
        for (k, &i) in order.iter().enumerate() {
            new_index[i] = k;
        }
        let sorted: Vec<Site> = order.iter().map(|&i| sites[i]).collect();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Invalid("duplicate vertex".into()));
        }
        let mut set = BTreeSet::new();
        for &(a, b) in pairs {
            if a >= n || b >= n {
                return Err(Error::Invalid(format!("edge ({a}, {b}) references a missing vertex")));
            }
            if a == b {
                return Err(Error::Invalid(format!("self-loop at vertex {a}")));
            }
            let (a, b) = (new_index[a], new_index[b]);
            set.insert((a, b));
            set.insert((b, a));
        }
        let edges: Vec<(usize, usize)> = set.into_iter().collect();
        let reverse = edges
            .iter()
            .map(|&(a, b)| edges.binary_search(&(b, a)).unwrap())
            .collect();
        let mut out = vec![Vec::new(); n];
        for (k, &(a, _)) in edges.iter().enumerate() {
            out[a].push(k);
        }
        let loc = Self { name, sites: sorted, edges, reverse, out };
        if !loc.is_connected() {
            return Err(Error::Invalid(format!("locale {} is not connected", loc.name)));
        }
        Ok(loc)
    }

    pub fn single() -> Self {
        Self::new("k1", vec![Site::vertex(0)], &[]).unwrap()
    }

    pub fn path(k: usize) -> Result<Self> {
        let pairs: Vec<_> = (1..k).map(|i| (i - 1, i)).collect();
        Self::new(format!("p{k}"), (0..k).map(Site::vertex).collect(), &pairs)
    }

    pub fn cycle(k: usize) -> Result<Self> {
        if k < 3 {
            return Err(Error::Invalid("a cycle needs at least 3 vertices".into()));
        }
        let pairs: Vec<_> = (0..k).map(|i| (i, (i + 1) % k)).collect();
        Self::new(format!("c{k}"), (0..k).map(Site::vertex).collect(), &pairs)
    }

    pub fn complete(k: usize) -> Result<Self> {
        let pairs: Vec<_> = (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).collect();
        Self::new(format!("k{k}"), (0..k).map(Site::vertex).collect(), &pairs)
    }

    /// The rectangular grid `[0, dims_0) x [0, dims_1) x ...` with nearest-neighbour edges.
    pub fn grid(dims: &[usize]) -> Result<Self> {
        let mut sites = vec![Site::ORIGIN];
        for (j, &m) in dims.iter().enumerate() {
            sites = sites
                .iter()
                .flat_map(|s| (0..m as i32).map(move |c| {
                    let mut t = *s;
                    t.0[j] = c;
                    t
                }))
                .collect();
        }
        let name = format!(
            "box{}",
            dims.iter().map(usize::to_string).collect::<Vec<_>>().join("x")
        );
        Self::lattice_window(name, dims.len(), &sites)
    }

    /// The box `[-n, n]^d` of Z^d.
    pub fn lattice_box(d: usize, n: usize) -> Result<Self> {
        Self::lattice_window(format!("lambda{n}_d{d}"), d, &box_sites(d, n))
    }

    /// The subgraph of Z^d induced on the given sites.
    pub fn lattice_window(name: impl Into<String>, d: usize, sites: &[Site]) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::Invalid(format!("lattice dimension {d} unsupported")));
        }
        let mut sorted = sites.to_vec();
        sorted.sort();
        sorted.dedup();
        let mut pairs = Vec::new();
        for (i, s) in sorted.iter().enumerate() {
            for j in 0..d {
                if let Ok(k) = sorted.binary_search(&(*s + Site::unit(j))) {
                    pairs.push((i, k));
                }
            }
        }
        Self::new(name, sorted, &pairs)
    }

    /// Parses `{"name": ..., "vertices": n, "edges": [[a, b], ...]}` (edges undirected).
    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let edges = v
            .get("edges")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("missing \"edges\" array".into()))?;
        let mut pairs = Vec::new();
        let mut n = 0usize;
        for e in edges {
            let pair = e
                .as_array()
                .filter(|p| p.len() == 2)
                .and_then(|p| Some((p[0].as_u64()? as usize, p[1].as_u64()? as usize)))
                .ok_or_else(|| Error::Parse(format!("edge {e} is not a pair of vertex indices")))?;
            n = n.max(pair.0 + 1).max(pair.1 + 1);
            pairs.push(pair);
        }
        if let Some(k) = v.get("vertices") {
            let k = k
                .as_u64()
                .ok_or_else(|| Error::Parse("\"vertices\" must be a count".into()))? as usize;
            if k < n {
                return Err(Error::Parse("\"vertices\" smaller than the largest edge index".into()));
            }
            n = k;
        }
        let name = v.get("name").and_then(Value::as_str).unwrap_or("custom").to_string();
        Self::new(name, (0..n).map(Site::vertex).collect(), &pairs)
    }

    /// `p3`, `c4`, `k5`, `box2x2`, `k1`.
    pub fn from_name(name: &str) -> Option<Self> {
        let name = name.trim();
        if let Some(dims) = name.strip_prefix("box") {
            let dims: Option<Vec<usize>> = dims.split('x').map(|p| p.parse().ok()).collect();
            return Self::grid(&dims?).ok();
        }
        let (kind, rest) = name.split_at(1.min(name.len()));
        let k: usize = rest.parse().ok()?;
        match kind {
            "p" => Self::path(k).ok(),
            "c" => Self::cycle(k).ok(),
            "k" => Self::complete(k).ok(),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn num_vertices(&self) -> usize {
        self.sites.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    pub fn reverse(&self, e: usize) -> usize {
        self.reverse[e]
    }

    pub fn edge_index(&self, o: usize, t: usize) -> Option<usize> {
        self.edges.binary_search(&(o, t)).ok()
    }

    pub fn site_index(&self, s: Site) -> Option<usize> {
        self.sites.binary_search(&s).ok()
    }

    pub fn out_edges(&self, v: usize) -> &[usize] {
        &self.out[v]
    }

    pub fn degree(&self) -> usize {
        self.out.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Graph distances from `v`; `usize::MAX` never occurs since locales are connected.
    pub fn distances_from(&self, v: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.num_vertices()];
        let mut queue = VecDeque::from([v]);
        dist[v] = 0;
        while let Some(x) = queue.pop_front() {
            for &e in &self.out[x] {
                let y = self.edges[e].1;
                if dist[y] == usize::MAX {
                    dist[y] = dist[x] + 1;
                    queue.push_back(y);
                }
            }
        }
        dist
    }

    pub fn distance(&self, x: usize, y: usize) -> usize {
        self.distances_from(x)[y]
    }

    pub fn diameter(&self) -> usize {
        (0..self.num_vertices())
            .map(|v| self.distances_from(v).into_iter().max().unwrap_or(0))
            .max()
            .unwrap_or(0)
    }

    /// A shortest path from `x` to `y` as a list of edge indices.
    pub fn shortest_path(&self, x: usize, y: usize) -> Vec<usize> {
        let n = self.num_vertices();
        let mut via = vec![usize::MAX; n];
        let mut seen = vec![false; n];
        seen[x] = true;
        let mut queue = VecDeque::from([x]);
        while let Some(v) = queue.pop_front() {
            if v == y {
                break;
            }
            for &e in &self.out[v] {
                let w = self.edges[e].1;
                if !seen[w] {
                    seen[w] = true;
                    via[w] = e;
                    queue.push_back(w);
                }
            }
        }
        let mut path = Vec::new();
        let mut v = y;
        while v != x {
            let e = via[v];
            path.push(e);
            v = self.edges[e].0;
        }
        path.reverse();
        path
    }

    fn is_connected(&self) -> bool {
        self.distances_from(0).iter().all(|&d| d != usize::MAX)
    }

    /// The locale induced on a subset of vertex indices.
    pub fn induced(&self, subset: &[usize]) -> Result<Self> {
        let mut subset = subset.to_vec();
        subset.sort_unstable();
        subset.dedup();
        let pos = |v: usize| subset.binary_search(&v).ok();
        let pairs: Vec<_> = self
            .edges
            .iter()
            .filter_map(|&(a, b)| Some((pos(a)?, pos(b)?)))
            .collect();
        let sites = subset.iter().map(|&v| self.sites[v]).collect();
        Self::new(format!("{}[sub]", self.name), sites, &pairs)
    }

    /// The complete graph on the same vertices.
    pub fn completed(&self) -> Self {
        let n = self.num_vertices();
        let pairs: Vec<_> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        Self::new(format!("{}[complete]", self.name), self.sites.clone(), &pairs).unwrap()
    }

    /// Edges leaving `subset`: origin inside, target outside.
    pub fn boundary(&self, subset: &[usize]) -> Vec<usize> {
        let inside = self.mask(subset);
        (0..self.num_edges())
            .filter(|&e| {
                let (o, t) = self.edges[e];
                inside[o] && !inside[t]
            })
            .collect()
    }

    /// Vertices of `subset` within distance `ell` of its complement.
    pub fn perimeter(&self, subset: &[usize], ell: usize) -> Vec<usize> {
        let inside = self.mask(subset);
        let outside: Vec<usize> = (0..self.num_vertices()).filter(|&v| !inside[v]).collect();
        if outside.is_empty() {
            return Vec::new();
        }
        let mut dist = vec![usize::MAX; self.num_vertices()];
        let mut queue = VecDeque::new();
        for &v in &outside {
            dist[v] = 0;
            queue.push_back(v);
        }
        while let Some(x) = queue.pop_front() {
            for &e in &self.out[x] {
                let y = self.edges[e].1;
                if dist[y] == usize::MAX {
                    dist[y] = dist[x] + 1;
                    queue.push_back(y);
                }
            }
        }
        (0..self.num_vertices()).filter(|&v| inside[v] && dist[v] <= ell).collect()
    }

    fn mask(&self, subset: &[usize]) -> Vec<bool> {
        let mut m = vec![false; self.num_vertices()];
        for &v in subset {
            m[v] = true;
        }
        m
    }
}

/// Sites of `[-n, n]^d` in increasing order.
pub fn box_sites(d: usize, n: usize) -> Vec<Site> {
    let n = n as i32;
    let mut sites = vec![Site::ORIGIN];
    for j in 0..d {
        sites = sites
            .iter()
            .flat_map(|s| (-n..=n).map(move |c| {
                let mut t = *s;
                t.0[j] = c;
                t
            }))
            .collect();
    }
    sites.sort();
    sites
}

/// A nearest-neighbour edge of Z^d as an ordered pair of sites.
pub type LatticeEdge = (Site, Site);

/// Edges of Z^d leaving a finite site set.
pub fn lattice_boundary(sites: &[Site], d: usize) -> Vec<LatticeEdge> {
    let set: BTreeSet<Site> = sites.iter().copied().collect();
    let mut out = Vec::new();
    for &s in &set {
        for t in s.lattice_neighbors(d) {
            if !set.contains(&t) {
                out.push((s, t));
            }
        }
    }
    out
}

/// Sites of a finite set in Z^d within lattice distance `ell` of the complement.
pub fn lattice_perimeter(sites: &[Site], d: usize, ell: usize) -> Vec<Site> {
    let set: BTreeSet<Site> = sites.iter().copied().collect();
    let mut dist = std::collections::BTreeMap::new();
    let mut queue = VecDeque::new();
    for &s in &set {
        if s.lattice_neighbors(d).any(|t| !set.contains(&t)) {
            dist.insert(s, 1usize);
            queue.push_back(s);
        }
    }
    while let Some(s) = queue.pop_front() {
        let ds = dist[&s];
        for t in s.lattice_neighbors(d) {
            if set.contains(&t) && !dist.contains_key(&t) {
                dist.insert(t, ds + 1);
                queue.push_back(t);
            }
        }
    }
    dist.into_iter().filter(|&(_, k)| k <= ell).map(|(s, _)| s).collect()
}

/// The half-space of Z^d on the side opposite to the direction of `e`.
pub fn in_half_space(e: LatticeEdge, x: Site) -> bool {
    let step = e.1 - e.0;
    let j = (0..MAX_DIM).find(|&j| step.0[j] != 0).expect("edge must join distinct sites");
    if step.0[j] > 0 {
        x.0[j] <= e.0 .0[j]
    } else {
        x.0[j] >= e.0 .0[j]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountingReport {
    pub d: usize,
    pub n: usize,
    pub box_size: usize,
    pub boundary_size: usize,
    pub degree: usize,
    /// `(ell, |perimeter_ell|)`
    pub perimeters: Vec<(usize, usize)>,
    /// `|P_1| <= |boundary| <= deg |P_1|`
    pub boundary_bounds_hold: bool,
    /// `|P_ell| <= |P_1| deg^ell` for every requested `ell`
    pub perimeter_bounds_hold: bool,
}

impl CountingReport {
    pub fn all_hold(&self) -> bool {
        self.boundary_bounds_hold && self.perimeter_bounds_hold
    }
}

/// Enumerates the box `[-n, n]^d` and checks the perimeter and boundary inequalities.
pub fn counting_report(d: usize, n: usize, ells: &[usize]) -> CountingReport {
    let sites = box_sites(d, n);
    let boundary = lattice_boundary(&sites, d);
    let degree = 2 * d;
    let p1 = lattice_perimeter(&sites, d, 1).len();
    let perimeters: Vec<(usize, usize)> = ells
        .iter()
        .map(|&l| (l, lattice_perimeter(&sites, d, l).len()))
        .collect();
    let perimeter_bounds_hold = perimeters
        .iter()
        .all(|&(l, c)| (c as u128) <= (p1 as u128) * (degree as u128).pow(l as u32));
    CountingReport {
        d,
        n,
        box_size: sites.len(),
        boundary_size: boundary.len(),
        degree,
        perimeters,
        boundary_bounds_hold: p1 <= boundary.len() && boundary.len() <= degree * p1,
        perimeter_bounds_hold,
    }
}

/// Closed-form counts for the box `[-n, n]^d`: `(|box|, |boundary|)`.
pub fn box_counts(d: usize, n: u64) -> (u128, u128) {
    let side = 2 * n as u128 + 1;
    (side.pow(d as u32), 2 * d as u128 * side.pow(d as u32 - 1))
}

/// The enlargement ratio for the box `[-n, n]^d` inside `[-2n, 2n]^d`, with
/// the outer diameter taken as `d (4n + 1)`.
pub fn tempered_ratio(d: usize, n: u64) -> f64 {
    let (inner, boundary) = box_counts(d, n);
    let (outer, _) = box_counts(d, 2 * n);
    let diam = d as f64 * (4.0 * n as f64 + 1.0);
    let b = boundary as f64 / inner as f64;
    b * b * (outer as f64 / (outer - inner) as f64) * diam * diam
}

/// The limit of [`tempered_ratio`] as `n` grows.
pub fn tempered_limit(d: usize) -> f64 {
    let d = d as i32;
    4f64.powi(d + 2) * (d as f64).powi(4) / (4f64.powi(d) - 2f64.powi(d))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OrbitCounts {
    /// Translates of the box having `e` among their boundary edges.
    pub single: usize,
    /// Translates having both edges among their boundary edges.
    pub pair: Option<usize>,
}

/// Counts translations `tau` of `[-n, n]^d` with `e` (and optionally `e2`) in the
/// translated boundary, by enumeration.
pub fn orbit_edge_counts(d: usize, n: usize, e: LatticeEdge, e2: Option<LatticeEdge>) -> OrbitCounts {
    let ni = n as i32;
    let is_boundary = |tau: Site, (o, t): LatticeEdge| {
        let inside = |x: Site| (0..d).all(|j| (x.0[j] - tau.0[j]).abs() <= ni);
        inside(o) && !inside(t)
    };
    let reach = |x: Site| (0..d).map(|j| x.0[j].abs()).max().unwrap_or(0) + ni + 1;
    let mut radius = reach(e.0).max(reach(e.1));
    if let Some(f) = e2 {
        radius = radius.max(reach(f.0)).max(reach(f.1));
    }
    let mut single = 0;
    let mut pair = 0;
    for tau in box_sites(d, radius as usize) {
        if is_boundary(tau, e) {
            single += 1;
            if e2.is_some_and(|f| is_boundary(tau, f)) {
                pair += 1;
            }
        }
    }
    OrbitCounts { single, pair: e2.map(|_| pair) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_boundary_sizes() {
        for n in 1..4 {
            let sites = box_sites(2, n);
            assert_eq!(lattice_boundary(&sites, 2).len(), 4 * (2 * n + 1));
        }
        let b = lattice_boundary(&[Site::lattice(&[0])], 1);
        assert_eq!(b.len(), 2);
    }

    #[test]
    fn finite_boundary_of_everything_is_empty() {
        let k = Locale::complete(4).unwrap();
        assert!(k.boundary(&[0, 1, 2, 3]).is_empty());
        assert_eq!(k.boundary(&[0]).len(), 3);
    }

    #[test]
    fn perimeters() {
        let line: Vec<Site> = (-2..=2).map(|x| Site::lattice(&[x])).collect();
        assert_eq!(lattice_perimeter(&line, 1, 1), vec![Site::lattice(&[-2]), Site::lattice(&[2])]);
        let ring = lattice_perimeter(&box_sites(2, 2), 2, 1);
        assert_eq!(ring.len(), 16);
        assert!(ring.iter().all(|s| s.linf() == 2));
        assert_eq!(lattice_perimeter(&line, 1, 6).len(), 5);
    }

    #[test]
    fn counting_small_boxes() {
        let r = counting_report(1, 3, &[1, 2]);
        assert_eq!((r.box_size, r.boundary_size, r.perimeters[0].1, r.degree), (7, 2, 2, 2));
        assert!(r.all_hold());
        let r = counting_report(2, 1, &[1]);
        assert_eq!((r.box_size, r.boundary_size, r.perimeters[0].1), (9, 12, 8));
    }

    #[test]
    fn tempered_limits() {
        assert!((tempered_limit(1) - 32.0).abs() < 1e-12);
        assert!((tempered_limit(2) - 4096.0 / 12.0).abs() < 1e-9);
        assert!(tempered_ratio(1, 1).is_finite() && tempered_ratio(1, 1) > 0.0);
    }

    #[test]
    fn orbit_counts() {
        let e = (Site::lattice(&[0, 0]), Site::lattice(&[1, 0]));
        assert_eq!(orbit_edge_counts(2, 2, e, None).single, 5);
        let par = (Site::lattice(&[0, 3]), Site::lattice(&[1, 3]));
        assert_eq!(orbit_edge_counts(2, 2, e, Some(par)).pair, Some(2));
        let far = (Site::lattice(&[0, 5]), Site::lattice(&[1, 5]));
        assert_eq!(orbit_edge_counts(2, 2, e, Some(far)).pair, Some(0));
    }

    #[test]
    fn half_space() {
        let e = (Site::lattice(&[0, 0]), Site::lattice(&[1, 0]));
        assert!(in_half_space(e, Site::lattice(&[0, 5])));
        assert!(in_half_space(e, Site::lattice(&[-3, 0])));
        assert!(!in_half_space(e, Site::lattice(&[1, 0])));
        let f = (Site::lattice(&[0, 0]), Site::lattice(&[0, -1]));
        assert!(in_half_space(f, Site::lattice(&[7, 1])));
    }

    #[test]
    fn named_locales() {
        assert_eq!(Locale::from_name("p3").unwrap().num_edges(), 4);
        assert_eq!(Locale::from_name("k3").unwrap().num_edges(), 6);
        assert_eq!(Locale::from_name("box2x2").unwrap().num_edges(), 8);
        assert_eq!(Locale::from_name("c5").unwrap().diameter(), 2);
        assert!(Locale::from_name("q3").is_none());
    }

    #[test]
    fn disconnected_rejected() {
        let r = Locale::new("x", vec![Site::vertex(0), Site::vertex(1)], &[]);
        assert!(r.is_err());
    }
}
