//! Cubic-scheme counts a(S) from the functional equations for near-cubic
//! maps with marked vertices, plus exhaustive scheme enumeration.
//!
//! `O_{g,k}` counts rooted maps on the orientable closed surface of genus
//! `g` with `k` marked non-root vertices, all other non-root vertices cubic;
//! `z` marks edges, `x` the root degree and `x_i` the marked degrees.
//! `Q_{g,k}` is the analogue over both orientability classes with
//! `χ = 2 − g`. Each `[z^e]` coefficient depends only on `[z^{e−1}]` data.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::exact_series::{Coeff, Poly, SchemePoly};
use crate::maps::{enumerate_leaf_rooted, CombinatorialMap, EnumParams};
use crate::surface::Surface;

/// Largest scheme size the exhaustive enumerator accepts.
pub const MAX_BRUTE_EDGES: usize = 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SchemeError {
    #[error("the disc has no scheme; its dissections are counted in closed form")]
    Disc,
    #[error("series ({0}, {1}) is outside the computed closure")]
    OutOfClosure(u32, u32),
    #[error("z order {0} exceeds the computed order {1}")]
    OrderTooHigh(usize, usize),
    #[error("coefficient {0} is not an integer")]
    NotIntegral(String),
    #[error("exhaustive enumeration is capped at {cap} edges, {requested} requested")]
    TooLarge { requested: usize, cap: usize },
    #[error("k_max {k_max} must be at least g_max {g_max}")]
    BadClosure { g_max: u32, k_max: u32 },
}

/// Solved family `O_{g,k}` or `Q_{g,k}` on a dependency-closed index set.
#[derive(Clone, Debug)]
pub struct SchemeSystem<C = BigInt> {
    orientable: bool,
    z_max: usize,
    series: BTreeMap<(u32, u32), SchemePoly<C>>,
}

impl<C: Coeff> SchemeSystem<C> {
    pub fn is_orientable_family(&self) -> bool {
        self.orientable
    }

    pub fn z_max(&self) -> usize {
        self.z_max
    }

    pub fn keys(&self) -> impl Iterator<Item = &(u32, u32)> {
        self.series.keys()
    }

    pub fn get(&self, g: u32, k: u32) -> Result<&SchemePoly<C>, SchemeError> {
        self.series.get(&(g, k)).ok_or(SchemeError::OutOfClosure(g, k))
    }
}

impl SchemeSystem<BigInt> {
    /// `[x^1 z^e]` of the `k = 0` series of genus `g`, as an integer.
    pub fn root_leaf_coeff(&self, g: u32, e: usize) -> Result<BigInt, SchemeError> {
        if e > self.z_max {
            return Err(SchemeError::OrderTooHigh(e, self.z_max));
        }
        Ok(self.get(g, 0)?.z_coeff(e).coeff(&[1]))
    }
}

fn solve<C: Coeff>(orientable: bool, keys: Vec<(u32, u32)>, z_max: usize) -> SchemeSystem<C> {
    let mut series: BTreeMap<(u32, u32), SchemePoly<C>> = keys
        .iter()
        .map(|&(g, k)| {
            let mut s = SchemePoly::zero(k as usize, z_max);
            if g == 0 && k == 0 {
                s.set_z_coeff(0, Poly::constant(0, C::one()));
            }
            ((g, k), s)
        })
        .collect();
    let two = C::from_i64(2);
    for e in 1..=z_max {
        let mut fresh = Vec::with_capacity(keys.len());
        for &(g, k) in &keys {
            let ku = k as usize;
            let mut out = Poly::zero(ku);
            // root edge to a non-root unmarked vertex: (z/x)(O − c0 − x[x^1]O)
            for (m, c) in series[&(g, k)].z_coeff(e - 1).terms() {
                if m[0] >= 2 {
                    let mut mm = m.clone();
                    mm[0] -= 1;
                    out.add_term(mm, c.clone());
                }
            }
            // root edge to the marked vertex x_k
            if k >= 1 {
                out.add_divided_difference(series[&(g, k - 1)].z_coeff(e - 1), ku, 1, 1);
            }
            // separating root loop
            for i in 0..=g {
                for j in 0..=k {
                    let (Some(a), Some(b)) = (series.get(&(i, j)), series.get(&(g - i, k - j))) else {
                        continue;
                    };
                    for e1 in 0..e {
                        let (pa, pb) = (a.z_coeff(e1), b.z_coeff(e - 1 - e1));
                        if !pa.is_zero() && !pb.is_zero() {
                            out.add_mul_concat(pa, pb, 2);
                        }
                    }
                }
            }
            // non-separating root loop
            let handle = if orientable { (g >= 1).then(|| (g - 1, C::one())) } else { (g >= 2).then(|| (g - 2, two.clone())) };
            if let Some((h, factor)) = handle {
                if let Some(s) = series.get(&(h, k + 1)) {
                    let p = s.z_coeff(e - 1);
                    for j in 1..=ku + 1 {
                        out.add_subst_chain(p, j, 3, &factor);
                    }
                }
            }
            if !orientable && g >= 1 {
                if let Some(s) = series.get(&(g - 1, k)) {
                    // x^2 z d/dx (x Q): x^m ↦ (m+1) x^{m+2}
                    for (m, c) in s.z_coeff(e - 1).terms() {
                        let mut mm = m.clone();
                        mm[0] += 2;
                        out.add_term(mm, c.clone() * C::from_i64(m[0] as i64 + 1));
                    }
                }
            }
            fresh.push(((g, k), out));
        }
        for (key, p) in fresh {
            series.get_mut(&key).expect("key present").set_z_coeff(e, p);
        }
    }
    SchemeSystem { orientable, z_max, series }
}

/// `O_{g,k}` for `g ≤ g_max`, `g + k ≤ k_max`: the set is closed under the
/// dependencies of the equations.
pub fn solve_o<C: Coeff>(g_max: u32, k_max: u32, z_max: usize) -> Result<SchemeSystem<C>, SchemeError> {
    if k_max < g_max {
        return Err(SchemeError::BadClosure { g_max, k_max });
    }
    let keys = (0..=g_max)
        .flat_map(|g| (0..=k_max - g).map(move |k| (g, k)))
        .collect();
    Ok(solve(true, keys, z_max))
}

/// `Q_{g,k}` for `g ≤ g_max`, `g + 2k ≤ g_max + 2 (k_max − g_max)`.
pub fn solve_q<C: Coeff>(g_max: u32, k_max: u32, z_max: usize) -> Result<SchemeSystem<C>, SchemeError> {
    if k_max < g_max {
        return Err(SchemeError::BadClosure { g_max, k_max });
    }
    let level = g_max + 2 * (k_max - g_max);
    let keys = (0..=g_max)
        .flat_map(|g| (0..=(level - g) / 2).map(move |k| (g, k)))
        .collect();
    Ok(solve(false, keys, z_max))
}

/// `[x^1 z^e] P_{g,0}` with `P = Q − O_{g/2}`.
fn non_orientable_count(q: &SchemeSystem, o: Option<&SchemeSystem>, g: u32, e: usize) -> Result<BigInt, SchemeError> {
    let mut a = q.root_leaf_coeff(g, e)?;
    if g.is_multiple_of(2) {
        let o = o.ok_or(SchemeError::OutOfClosure(g / 2, 0))?;
        a -= o.root_leaf_coeff(g / 2, e)?;
    }
    Ok(a)
}

/// Number a(S) of cubic schemes of a surface other than the disc.
pub fn cubic_scheme_count(surface: &Surface) -> Result<BigInt, SchemeError> {
    if surface.is_disc() {
        return Err(SchemeError::Disc);
    }
    let e = surface.cubic_edges() as usize;
    let g = surface.genus;
    if surface.orientable {
        solve_o(g, g, e)?.root_leaf_coeff(g, e)
    } else {
        let q = solve_q(g, g, e)?;
        let o = if g.is_multiple_of(2) { Some(solve_o(g / 2, g / 2, e)?) } else { None };
        non_orientable_count(&q, o.as_ref(), g, e)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SchemeTableEntry {
    pub surface: Surface,
    /// Zero for the disc, which has no scheme.
    #[serde(serialize_with = "crate::serialize_bigint")]
    pub a: BigInt,
}

/// a(S) for genus `0..=max_genus` (cross-caps `1..=max_genus` when
/// non-orientable) and `1..=max_boundaries` boundaries, from one solve.
pub fn scheme_table(orientable: bool, max_genus: u32, max_boundaries: u32) -> Result<Vec<SchemeTableEntry>, SchemeError> {
    let min_genus = if orientable { 0 } else { 1 };
    let surfaces: Vec<Surface> = (min_genus..=max_genus)
        .flat_map(|g| (1..=max_boundaries).map(move |b| (g, b)))
        .map(|(g, b)| Surface { orientable, genus: g, boundaries: b })
        .collect();
    let z_max = surfaces
        .iter()
        .filter(|s| !s.is_disc())
        .map(|s| s.cubic_edges() as usize)
        .max()
        .unwrap_or(0);
    let (main, o_half) = if orientable {
        (solve_o(max_genus, max_genus, z_max)?, None)
    } else {
        (solve_q(max_genus, max_genus, z_max)?, Some(solve_o(max_genus / 2, max_genus / 2, z_max)?))
    };
    surfaces
        .into_iter()
        .map(|s| {
            let a = if s.is_disc() {
                BigInt::zero()
            } else if orientable {
                main.root_leaf_coeff(s.genus, s.cubic_edges() as usize)?
            } else {
                non_orientable_count(&main, o_half.as_ref(), s.genus, s.cubic_edges() as usize)?
            };
            Ok(SchemeTableEntry { surface: s, a })
        })
        .collect()
}

/// `2 (6g−3)! / (12^g g! (3g−2)!)`, the one-boundary orientable count.
pub fn unicellular_closed_form(g: u32) -> BigInt {
    assert!(g >= 1, "genus must be positive");
    let fact = |n: u32| -> BigInt { (1..=n).fold(BigInt::one(), |acc, i| acc * BigInt::from(i)) };
    let num = BigInt::from(2) * fact(6 * g - 3);
    let den = num_traits::pow(BigInt::from(12), g as usize) * fact(g) * fact(3 * g - 2);
    assert!((&num % &den).is_zero(), "closed form is integral");
    num / den
}

/// Schemes of `surface` with at most `max_edges` edges: leaf-rooted maps
/// with `β` faces whose non-root vertices have degree ≥ 3 (exactly 3 when
/// `cubic_only`). Returned in canonical labeling and generation order.
pub fn brute_force_schemes(
    surface: &Surface,
    max_edges: usize,
    cubic_only: bool,
) -> Result<Vec<CombinatorialMap>, SchemeError> {
    if surface.is_disc() {
        return Err(SchemeError::Disc);
    }
    if max_edges > MAX_BRUTE_EDGES {
        return Err(SchemeError::TooLarge { requested: max_edges, cap: MAX_BRUTE_EDGES });
    }
    let chi = surface.chi();
    let excess = (1 - 2 * chi) as usize;
    let degrees: Vec<u32> = if cubic_only { vec![3] } else { (3..=excess as u32 + 2).collect() };
    let params = EnumParams {
        degrees,
        leaves: 1,
        excess,
        back_edges: (1 - chi) as usize,
        orientable_only: surface.orientable,
    };
    let mut out = Vec::new();
    enumerate_leaf_rooted(&params, |m| {
        if m.edge_count() <= max_edges && m.surface().as_ref() == Some(surface) {
            out.push(m.clone());
        }
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_edge_is_a_planar_loop() {
        let o = solve_o::<BigInt>(0, 0, 2).unwrap();
        let p = o.get(0, 0).unwrap().z_coeff(1);
        assert_eq!(p, &Poly::from_terms(0, &[(&[2], 1)]));
    }

    #[test]
    fn small_table_entries() {
        assert_eq!(cubic_scheme_count(&Surface::cylinder()).unwrap(), BigInt::from(1));
        assert_eq!(cubic_scheme_count(&Surface::orientable(1, 1)).unwrap(), BigInt::from(1));
        assert_eq!(cubic_scheme_count(&Surface::orientable(1, 2)).unwrap(), BigInt::from(28));
        assert_eq!(cubic_scheme_count(&Surface::moebius()).unwrap(), BigInt::from(1));
        assert_eq!(cubic_scheme_count(&Surface::non_orientable(2, 2)).unwrap(), BigInt::from(174));
        assert_eq!(cubic_scheme_count(&Surface::disc()), Err(SchemeError::Disc));
    }

    #[test]
    fn closure_is_enforced() {
        let o = solve_o(1, 1, 3).unwrap();
        assert!(o.get(1, 1).is_err());
        assert!(o.get(0, 1).is_ok());
        assert!(matches!(solve_o::<BigInt>(2, 1, 3), Err(SchemeError::BadClosure { .. })));
        assert_eq!(o.root_leaf_coeff(0, 9), Err(SchemeError::OrderTooHigh(9, 3)));
    }

    #[test]
    fn rational_and_integer_solves_agree() {
        use crate::exact_series::Rat;
        for orientable in [true, false] {
            let (a, b) = if orientable {
                (solve_o::<BigInt>(1, 2, 6).unwrap(), solve_o::<Rat>(1, 2, 6).unwrap())
            } else {
                (solve_q::<BigInt>(2, 2, 6).unwrap(), solve_q::<Rat>(2, 2, 6).unwrap())
            };
            for &(g, k) in a.keys() {
                let lifted = a.get(g, k).unwrap().map_coeffs(|c| Rat::from_integer(c.clone()));
                assert_eq!(&lifted, b.get(g, k).unwrap());
            }
        }
    }

    #[test]
    fn unicellular_values() {
        assert_eq!(unicellular_closed_form(1), BigInt::from(1));
        assert_eq!(unicellular_closed_form(2), BigInt::from(105));
        assert_eq!(unicellular_closed_form(3), BigInt::from(50050));
    }

    #[test]
    fn brute_force_small_surfaces() {
        assert_eq!(brute_force_schemes(&Surface::cylinder(), 2, true).unwrap().len(), 1);
        assert_eq!(brute_force_schemes(&Surface::moebius(), 2, true).unwrap().len(), 1);
        assert_eq!(brute_force_schemes(&Surface::orientable(1, 1), 5, true).unwrap().len(), 1);
        assert!(matches!(
            brute_force_schemes(&Surface::orientable(2, 1), 11, true),
            Err(SchemeError::TooLarge { .. })
        ));
    }
}
