//! Expansions of a local function into pieces supported exactly on sub-windows,
//! either relative to the product measure or relative to the base state, and the
//! renormalization map between the two.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::locale::Site;

use super::{FunctionTable, SiteMeasure};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flavor {
    /// Pieces annihilated by conditional expectation onto any window missing a site.
    Mu,
    /// Pieces vanishing when any of their sites is in the base state.
    Base,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExpansionPieces {
    flavor: Flavor,
    nstates: usize,
    pieces: BTreeMap<Vec<Site>, FunctionTable>,
}

impl ExpansionPieces {
    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn pieces(&self) -> &BTreeMap<Vec<Site>, FunctionTable> {
        &self.pieces
    }

    pub fn piece(&self, window: &[Site]) -> Option<&FunctionTable> {
        self.pieces.get(window)
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// Sum of all pieces.
    pub fn reconstruct(&self) -> FunctionTable {
        let mut total = FunctionTable::zero(self.nstates);
        for p in self.pieces.values() {
            total.add_scaled(p, 1.0);
        }
        total
    }

    /// Largest pointwise difference between corresponding pieces (missing pieces count as zero).
    pub fn max_diff(&self, other: &Self) -> f64 {
        let zero = FunctionTable::zero(self.nstates);
        self.pieces
            .keys()
            .chain(other.pieces.keys())
            .map(|k| {
                let a = self.pieces.get(k).unwrap_or(&zero);
                let b = other.pieces.get(k).unwrap_or(&zero);
                a.max_diff(b)
            })
            .fold(0.0, f64::max)
    }

    fn empty_piece_value(&self) -> f64 {
        self.pieces.get(&Vec::new()).map_or(0.0, |p| p.values()[0])
    }

    fn accumulate(&mut self, window: &[Site], piece: &FunctionTable) {
        match self.pieces.get_mut(window) {
            Some(acc) => acc.add_scaled(piece, 1.0),
            None => {
                self.pieces.insert(window.to_vec(), piece.clone());
            }
        }
    }

    fn pruned(mut self, tol: f64) -> Self {
        self.pieces.retain(|_, p| p.max_abs() > tol);
        self
    }
}

fn prune_tol(f: &FunctionTable) -> f64 {
    1e-13 * (1.0 + f.max_abs())
}

fn expand_with(f: &FunctionTable, flavor: Flavor, restrict: impl Fn(&FunctionTable, &[Site]) -> FunctionTable) -> ExpansionPieces {
    let w = f.sites();
    let k = w.len();
    assert!(k <= 20, "expansion window of {k} sites is too large");
    let mut by_mask: Vec<FunctionTable> = Vec::with_capacity(1 << k);
    for mask in 0usize..1 << k {
        let sub: Vec<Site> = (0..k).filter(|i| mask >> (k - 1 - i) & 1 == 1).map(|i| w[i]).collect();
        let mut piece = restrict(f, &sub).extend(&sub);
        // proper subsets of `mask` have smaller numeric values
        let mut m = mask;
        while m > 0 {
            m = (m - 1) & mask;
            piece.add_scaled(&by_mask[m], -1.0);
        }
        by_mask.push(piece);
    }
    let pieces = by_mask.into_iter().map(|p| (p.sites().to_vec(), p)).collect();
    ExpansionPieces { flavor, nstates: f.nstates(), pieces }.pruned(prune_tol(f))
}

/// Pieces `f_L = pi^L f - sum over proper subsets of f_L''`.
pub fn expand_mu(f: &FunctionTable, nu: &SiteMeasure) -> ExpansionPieces {
    expand_with(f, Flavor::Mu, |g, sub| g.conditional_expectation(sub, nu))
}

/// Pieces `f*_L = (f with base outside L) - sum over proper subsets of f*_L''`.
pub fn expand_base(f: &FunctionTable, base: usize) -> ExpansionPieces {
    expand_with(f, Flavor::Base, |g, sub| g.plug_base(sub, base))
}

fn check_normalized(p: &ExpansionPieces, flavor: Flavor) -> Result<()> {
    if p.flavor != flavor {
        return Err(Error::Invalid(format!("expected {flavor:?}-flavor pieces, got {:?}", p.flavor)));
    }
    let v = p.empty_piece_value();
    if v.abs() > 1e-12 {
        return Err(Error::NotNormalized(v));
    }
    Ok(())
}

fn regroup(
    input: &ExpansionPieces,
    flavor: Flavor,
    expand: impl Fn(&FunctionTable) -> ExpansionPieces,
) -> ExpansionPieces {
    let mut out = ExpansionPieces { flavor, nstates: input.nstates, pieces: BTreeMap::new() };
    let mut scale: f64 = 0.0;
    for piece in input.pieces.values() {
        scale = scale.max(piece.max_abs());
        for (w, sub) in expand(piece).pieces {
            if !w.is_empty() {
                out.accumulate(&w, &sub);
            }
        }
    }
    out.pruned(1e-13 * (1.0 + scale))
}

/// Maps base-flavor pieces of a normalized function to the mu-flavor pieces of
/// its mean-zero counterpart.
pub fn renormalize(pieces: &ExpansionPieces, nu: &SiteMeasure) -> Result<ExpansionPieces> {
    check_normalized(pieces, Flavor::Base)?;
    Ok(regroup(pieces, Flavor::Mu, |p| expand_mu(p, nu)))
}

/// Inverse of [`renormalize`] on mean-zero inputs.
pub fn unrenormalize(pieces: &ExpansionPieces, base: usize) -> Result<ExpansionPieces> {
    check_normalized(pieces, Flavor::Mu)?;
    Ok(regroup(pieces, Flavor::Base, |p| expand_base(p, base)))
}
