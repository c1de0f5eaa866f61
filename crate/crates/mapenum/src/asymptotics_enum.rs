//! Exact counting series of leaf-rooted (Δ ∪ {1})-valent maps on a surface
//! with boundary, assembled from scheme inventories, and their asymptotic
//! estimates.
//!
//! A map with `n` leaves on `S` decomposes into a scheme, one doubly-rooted
//! tree per scheme edge and one leg-tree per non-root scheme vertex, so
//! `A_S(z) = z^{2χ} B_S(z^p)` with
//! `B_S(t) = Σ_schemes Z(t)^e Π_u Y_{deg(u)−1}(t)`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::char_system::{solve_characteristic, CharConstants, CharError};
use crate::exact_series::{rat_int, IntSeries, Rat, SeriesError, TruncSeries};
use crate::scheme_constants::{brute_force_schemes, cubic_scheme_count, SchemeError, MAX_BRUTE_EDGES};
use crate::surface::Surface;
use crate::tree_gf::{legs_from_powers, tree_powers, DegreeSet};

#[derive(Debug, Error, PartialEq)]
pub enum AsymptoticsError {
    #[error("the disc is handled by the closed form C(n-2), not by schemes")]
    Disc,
    #[error("surface {surface} needs schemes with {edges} edges, the exhaustive cap is {cap}")]
    InventoryTooLarge { surface: Surface, edges: i64, cap: usize },
    #[error("n = {n} is not congruent to {residue} modulo {period}")]
    Inadmissible { n: usize, residue: usize, period: usize },
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Char(#[from] CharError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// `[z^n]` of `C(n − 2)` for `n ≥ 2`: leaf-rooted triangular maps of the disc.
pub fn disc_series(order: usize) -> IntSeries {
    let mut out = IntSeries::zero(order);
    let mut c = BigInt::one();
    for n in 2..=order {
        let m = (n - 2) as u64;
        out.set(n, c.clone());
        c = c * BigInt::from(2 * (2 * m + 1)) / BigInt::from(m + 2);
    }
    out
}

/// `a(S) z (1 − 4z)^{3χ/2 − 1}`, the Δ = {3} series.
pub fn triangular_series(surface: &Surface, order: usize) -> Result<TruncSeries, AsymptoticsError> {
    if surface.is_disc() {
        return Err(AsymptoticsError::Disc);
    }
    let a = Rat::from_integer(cubic_scheme_count(surface)?);
    let chi = surface.chi();
    if order == 0 {
        return Ok(TruncSeries::zero(0));
    }
    let base = TruncSeries::binomial(3 * chi - 2, 2, &rat_int(4), order)?;
    Ok(base.shift_up(1).scale(&a))
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct InventoryEntry {
    pub edges: usize,
    /// Non-root vertex degrees, sorted.
    pub degrees: Vec<u32>,
    pub multiplicity: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SchemeInventory {
    pub surface: Surface,
    pub entries: Vec<InventoryEntry>,
}

impl SchemeInventory {
    /// Total multiplicity of the schemes with `e` edges.
    pub fn total_with_edges(&self, e: usize) -> u64 {
        self.entries.iter().filter(|x| x.edges == e).map(|x| x.multiplicity).sum()
    }

    pub fn cubic_only(&self) -> SchemeInventory {
        let e = self.surface.cubic_edges() as usize;
        SchemeInventory {
            surface: self.surface,
            entries: self.entries.iter().filter(|x| x.edges == e).cloned().collect(),
        }
    }
}

/// Exhaustive inventory of all schemes of `surface` with at most `max_edges`
/// edges, grouped by edge count and degree multiset.
pub fn scheme_inventory(surface: &Surface, max_edges: usize) -> Result<SchemeInventory, AsymptoticsError> {
    if surface.is_disc() {
        return Err(AsymptoticsError::Disc);
    }
    let needed = surface.cubic_edges();
    if needed as usize > MAX_BRUTE_EDGES {
        return Err(AsymptoticsError::InventoryTooLarge { surface: *surface, edges: needed, cap: MAX_BRUTE_EDGES });
    }
    let mut groups: BTreeMap<(usize, Vec<u32>), u64> = BTreeMap::new();
    for m in brute_force_schemes(surface, max_edges, false)? {
        let mut degrees: Vec<u32> = m.degrees().into_iter().filter(|&d| d != 1).collect();
        degrees.sort_unstable();
        *groups.entry((m.edge_count(), degrees)).or_default() += 1;
    }
    let entries = groups
        .into_iter()
        .map(|((edges, degrees), multiplicity)| InventoryEntry { edges, degrees, multiplicity })
        .collect();
    Ok(SchemeInventory { surface: *surface, entries })
}

/// Single-entry inventory of the cubic schemes, counted by the functional
/// equations; complete whenever `max(Δ) = 3`.
pub fn cubic_inventory(surface: &Surface) -> Result<SchemeInventory, AsymptoticsError> {
    if surface.is_disc() {
        return Err(AsymptoticsError::Disc);
    }
    let a = cubic_scheme_count(surface)?;
    let edges = surface.cubic_edges() as usize;
    let entry = InventoryEntry {
        edges,
        degrees: vec![3; (1 - 2 * surface.chi()) as usize],
        multiplicity: a.to_u64().ok_or(SchemeError::NotIntegral(a.to_string()))?,
    };
    Ok(SchemeInventory { surface: *surface, entries: vec![entry] })
}

/// `A_S(z) = z^{2χ} B(z^p)` stored as `B` plus the index shift.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MapSeries {
    pub chi: i64,
    pub period: usize,
    pub b: IntSeries,
}

impl MapSeries {
    /// `[z^n] A_S`; zero outside the residue class and below `2χ`.
    pub fn coeff(&self, n: usize) -> BigInt {
        let shifted = n as i64 - 2 * self.chi;
        if shifted < 0 || shifted % self.period as i64 != 0 {
            return BigInt::zero();
        }
        let i = shifted as usize / self.period;
        if i > self.b.order() {
            panic!("coefficient {n} is beyond the computed order");
        }
        self.b.coeff(i)
    }

    /// Largest `n` whose coefficient is available.
    pub fn max_n(&self) -> usize {
        (self.b.order() as i64 * self.period as i64 + 2 * self.chi).max(0) as usize
    }

    pub fn coeffs(&self, order: usize) -> Vec<BigInt> {
        (0..=order).map(|n| self.coeff(n)).collect()
    }
}

/// `t`-order needed for all `n ≤ n_max`.
fn t_order(chi: i64, p: usize, n_max: usize) -> usize {
    let span = n_max as i64 - 2 * chi;
    if span < 0 {
        0
    } else {
        span as usize / p
    }
}

/// `B_S(t)` to order `order` from the scheme inventory.
pub fn assemble_b(delta: &DegreeSet, inventory: &SchemeInventory, order: usize) -> IntSeries {
    let p = delta.period();
    let powers = tree_powers(delta, order * p + 1);
    // [t^i] Y_ℓ = [z^{ip+1−ℓ}] T_ℓ
    let y_of = |legs: usize| -> IntSeries {
        let s = legs_from_powers(delta, legs, &powers);
        IntSeries::from_coeffs(
            (0..=order)
                .map(|i| if i * p + 1 >= legs { s.coeff(i * p + 1 - legs) } else { BigInt::zero() })
                .collect(),
        )
    };
    let t = &powers[1];
    let z = IntSeries::from_coeffs((0..=order).map(|i| t.coeff(i * p + 1) * BigInt::from(i * p + 1)).collect());
    let mut leg_cache: BTreeMap<usize, IntSeries> = BTreeMap::new();
    let mut acc = IntSeries::zero(order);
    for entry in &inventory.entries {
        let mut term = z.pow(entry.edges as u32);
        for &d in &entry.degrees {
            let legs = d as usize - 1;
            let y = leg_cache.entry(legs).or_insert_with(|| y_of(legs));
            term = term.mul(y);
        }
        acc = acc.add(&term.scale(&BigInt::from(entry.multiplicity)));
    }
    acc
}

/// `A_S` for all `n ≤ n_max` from a given inventory.
pub fn map_series_from(delta: &DegreeSet, inventory: &SchemeInventory, n_max: usize) -> MapSeries {
    let chi = inventory.surface.chi();
    let p = delta.period();
    MapSeries { chi, period: p, b: assemble_b(delta, inventory, t_order(chi, p, n_max)) }
}

/// Complete inventory for `(S, Δ)`: the cubic one when `max(Δ) = 3`,
/// otherwise the exhaustive one.
pub fn complete_inventory(surface: &Surface, delta: &DegreeSet) -> Result<SchemeInventory, AsymptoticsError> {
    if delta.max_degree() == 3 {
        cubic_inventory(surface)
    } else {
        scheme_inventory(surface, surface.cubic_edges().max(0) as usize)
    }
}

/// `A_S^Δ` for all `n ≤ n_max`.
pub fn map_series(surface: &Surface, delta: &DegreeSet, n_max: usize) -> Result<MapSeries, AsymptoticsError> {
    let inv = complete_inventory(surface, delta)?;
    Ok(map_series_from(delta, &inv, n_max))
}

/// `Γ(m/2) = rational · √π^{[m odd]}` for `m ≥ 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HalfGamma {
    pub rational: Rat,
    pub sqrt_pi: bool,
}

impl HalfGamma {
    pub fn to_f64(&self) -> f64 {
        let r = self.rational.to_f64().unwrap_or(f64::INFINITY);
        if self.sqrt_pi {
            r * std::f64::consts::PI.sqrt()
        } else {
            r
        }
    }

    /// `self / other`, with the `√π` powers combined.
    pub fn ratio_f64(&self, other: &HalfGamma) -> f64 {
        let r = (&self.rational / &other.rational).to_f64().unwrap_or(f64::NAN);
        match (self.sqrt_pi, other.sqrt_pi) {
            (true, false) => r * std::f64::consts::PI.sqrt(),
            (false, true) => r / std::f64::consts::PI.sqrt(),
            _ => r,
        }
    }
}

/// `Γ(m/2)`: `(m/2 − 1)!` for even `m`, `(2k)! √π / (4^k k!)` for `m = 2k + 1`.
pub fn gamma_half(m: u32) -> HalfGamma {
    assert!(m >= 1, "Γ is evaluated at positive arguments only");
    let fact = |n: u32| -> BigInt { (1..=n).fold(BigInt::one(), |acc, i| acc * BigInt::from(i)) };
    if m.is_multiple_of(2) {
        HalfGamma { rational: Rat::from_integer(fact(m / 2 - 1)), sqrt_pi: false }
    } else {
        let k = (m - 1) / 2;
        let den = num_traits::pow(BigInt::from(4), k as usize) * fact(k);
        HalfGamma { rational: Rat::new(fact(2 * k), den), sqrt_pi: true }
    }
}

/// Natural logarithm of a positive integer of any size.
pub fn ln_bigint(x: &BigInt) -> f64 {
    assert!(x.sign() == num_bigint::Sign::Plus, "logarithm of a non-positive integer");
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().expect("fits in f64").ln();
    }
    let shift = bits - 64;
    let top: BigInt = x >> shift;
    top.to_f64().expect("64-bit value").ln() + shift as f64 * std::f64::consts::LN_2
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AsymptoticEstimate {
    pub surface: Surface,
    #[serde(serialize_with = "crate::serialize_bigint")]
    pub a: BigInt,
    pub constant: f64,
    /// `1/ρ`.
    pub base: f64,
    /// Exponent `−3χ/2` as numerator over 2.
    pub poly_exponent_num: i64,
    pub poly_exponent_den: i64,
    pub period: usize,
    pub residue: usize,
}

impl AsymptoticEstimate {
    pub fn poly_exponent(&self) -> f64 {
        self.poly_exponent_num as f64 / self.poly_exponent_den as f64
    }

    pub fn is_admissible(&self, n: usize) -> bool {
        n % self.period == self.residue
    }

    /// `ln(c n^{−3χ/2} ρ^{−n})`.
    pub fn ln_value(&self, n: usize) -> f64 {
        self.constant.ln() + self.poly_exponent() * (n as f64).ln() + n as f64 * self.base.ln()
    }
}

pub fn residue_class(chi: i64, p: usize) -> usize {
    (2 * chi).rem_euclid(p as i64) as usize
}

/// `c = a p (8γρ)^χ / (4 Γ(1 − 3χ/2))` from already solved constants.
pub fn asymptotic_estimate_with(
    surface: &Surface,
    delta: &DegreeSet,
    consts: &CharConstants,
) -> Result<AsymptoticEstimate, AsymptoticsError> {
    if surface.is_disc() {
        return Err(AsymptoticsError::Disc);
    }
    let a = cubic_scheme_count(surface)?;
    let chi = surface.chi();
    let p = delta.period();
    let gamma = gamma_half((2 - 3 * chi) as u32).to_f64();
    let a_f = a.to_f64().unwrap_or(f64::INFINITY);
    let constant = a_f * p as f64 * (8.0 * consts.gamma * consts.rho).powi(chi as i32) / (4.0 * gamma);
    Ok(AsymptoticEstimate {
        surface: *surface,
        a,
        constant,
        base: 1.0 / consts.rho,
        poly_exponent_num: -3 * chi,
        poly_exponent_den: 2,
        period: p,
        residue: residue_class(chi, p),
    })
}

pub fn asymptotic_estimate(surface: &Surface, delta: &DegreeSet) -> Result<AsymptoticEstimate, AsymptoticsError> {
    let consts = solve_characteristic(delta, 1e-13)?;
    asymptotic_estimate_with(surface, delta, &consts)
}

/// `ln` of `p γ / (2√π) n^{−3/2} ρ^{−n}`, the tree-count estimate for
/// `n ≡ 1 (mod p)`.
pub fn ln_tree_estimate(consts: &CharConstants, n: usize) -> f64 {
    let p = consts.period as f64;
    (p * consts.gamma / (2.0 * std::f64::consts::PI.sqrt())).ln() - 1.5 * (n as f64).ln() - n as f64 * consts.rho.ln()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    #[serde(serialize_with = "crate::serialize_bigint")]
    pub exact: BigInt,
    pub ratio: f64,
    /// `(ratio − 1) √n`.
    pub scaled_deviation: f64,
}

/// Exact over asymptotic count for each `n`, computed in log space.
pub fn convergence_report(
    surface: &Surface,
    delta: &DegreeSet,
    n_list: &[usize],
) -> Result<Vec<ConvergenceRow>, AsymptoticsError> {
    let est = asymptotic_estimate(surface, delta)?;
    if let Some(&n) = n_list.iter().find(|&&n| !est.is_admissible(n)) {
        return Err(AsymptoticsError::Inadmissible { n, residue: est.residue, period: est.period });
    }
    let n_max = n_list.iter().copied().max().unwrap_or(0);
    let series = map_series(surface, delta, n_max)?;
    Ok(n_list
        .iter()
        .map(|&n| {
            let exact = series.coeff(n);
            let ratio = if exact.is_zero() { 0.0 } else { (ln_bigint(&exact) - est.ln_value(n)).exp() };
            ConvergenceRow { n, exact, ratio, scaled_deviation: (ratio - 1.0) * (n as f64).sqrt() }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_series::rat;
    use crate::maps::census_count;

    fn d(x: &[u32]) -> DegreeSet {
        DegreeSet::new(x).unwrap()
    }

    #[test]
    fn disc_is_catalan() {
        let s = disc_series(8);
        let want = [0, 0, 1, 1, 2, 5, 14, 42, 132];
        for (n, w) in want.iter().enumerate() {
            assert_eq!(s.coeff(n), BigInt::from(*w));
        }
    }

    #[test]
    fn triangular_examples() {
        let cyl = triangular_series(&Surface::cylinder(), 6).unwrap();
        assert_eq!(cyl.coeffs()[1..].to_vec(), [1, 4, 16, 64, 256, 1024].map(rat_int).to_vec());
        let mob = triangular_series(&Surface::moebius(), 6).unwrap();
        assert_eq!(mob, cyl);
        let torus = triangular_series(&Surface::orientable(1, 1), 4).unwrap();
        assert_eq!(torus.coeff(2), rat_int(10));
        assert_eq!(triangular_series(&Surface::disc(), 4), Err(AsymptoticsError::Disc));
    }

    #[test]
    fn inventory_totals() {
        let cyl = scheme_inventory(&Surface::cylinder(), 2).unwrap();
        assert_eq!(cyl.total_with_edges(2), 1);
        assert!(cyl.entries.iter().any(|x| x.edges == 2 && x.degrees == vec![3]));
        let mob = scheme_inventory(&Surface::moebius(), 2).unwrap();
        assert_eq!(mob.total_with_edges(2), 1);
        for inv in [cyl, mob] {
            for x in &inv.entries {
                assert_eq!(x.degrees.iter().sum::<u32>() as usize, 2 * x.edges - 1);
            }
        }
        assert_eq!(scheme_inventory(&Surface::disc(), 2), Err(AsymptoticsError::Disc));
        assert!(matches!(
            scheme_inventory(&Surface::orientable(2, 1), 8),
            Err(AsymptoticsError::InventoryTooLarge { .. })
        ));
    }

    #[test]
    fn routes_agree_for_triangles() {
        let delta = d(&[3]);
        for s in [Surface::cylinder(), Surface::moebius(), Surface::orientable(1, 1), Surface::non_orientable(2, 1)] {
            let closed = triangular_series(&s, 30).unwrap().to_int().unwrap();
            let full = map_series_from(&delta, &scheme_inventory(&s, 8).unwrap(), 30);
            let cubic = map_series_from(&delta, &cubic_inventory(&s).unwrap(), 30);
            for n in 0..=30 {
                assert_eq!(full.coeff(n), closed.coeff(n), "{s} n={n}");
                assert_eq!(cubic.coeff(n), closed.coeff(n), "{s} n={n}");
            }
        }
    }

    #[test]
    fn small_census_agreement() {
        for s in [Surface::cylinder(), Surface::moebius()] {
            for delta in [d(&[3]), d(&[4])] {
                let a = map_series(&s, &delta, 5).unwrap();
                for n in 1..=5 {
                    assert_eq!(a.coeff(n), BigInt::from(census_count(&s, delta.degrees(), n)), "{s} {delta} n={n}");
                }
            }
        }
    }

    #[test]
    fn periodicity() {
        let a = map_series(&Surface::orientable(1, 1), &d(&[4]), 20).unwrap();
        for n in 0..=20 {
            if n % 2 != 0 {
                assert!(a.coeff(n).is_zero());
            }
        }
    }

    #[test]
    fn gamma_values() {
        assert_eq!(gamma_half(1), HalfGamma { rational: rat_int(1), sqrt_pi: true });
        assert_eq!(gamma_half(3).rational, rat(1, 2));
        assert_eq!(gamma_half(5).rational, rat(3, 4));
        assert_eq!(gamma_half(8).rational, rat_int(6));
        assert!((gamma_half(7).to_f64() - 3.323_350_970_447_843).abs() < 1e-12);
        assert!((gamma_half(3).ratio_f64(&gamma_half(1)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn estimate_examples() {
        let cyl = asymptotic_estimate(&Surface::cylinder(), &d(&[3])).unwrap();
        assert!((cyl.constant - 0.25).abs() < 1e-12);
        assert!((cyl.base - 4.0).abs() < 1e-12);
        assert_eq!(cyl.poly_exponent(), 0.0);
        let mob = asymptotic_estimate(&Surface::moebius(), &d(&[4])).unwrap();
        assert!((mob.constant - 0.5).abs() < 1e-12);
        assert!((mob.base - (27.0f64 / 4.0).sqrt()).abs() < 1e-12);
        assert_eq!((mob.period, mob.residue), (2, 0));
        let rows = convergence_report(&Surface::cylinder(), &d(&[3]), &[10, 100, 400]).unwrap();
        for r in rows {
            assert!((r.ratio - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn ln_of_large_integers() {
        let x = num_traits::pow(BigInt::from(3), 2000);
        assert!((ln_bigint(&x) - 2000.0 * 3f64.ln()).abs() < 1e-9);
    }
}
