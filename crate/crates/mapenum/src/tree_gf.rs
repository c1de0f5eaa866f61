//! Generating series of the tree families used by the map decompositions,
//! and a compact plane-tree representation.
//!
//! All trees are leaf-rooted and (Δ ∪ {1})-valent: an internal vertex of
//! degree δ has δ − 1 ordered children. Sizes count non-root leaves.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::exact_series::{rat_int, IntSeries, Rat, SeriesError, TruncSeries};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DegreeError {
    #[error("degree set is empty")]
    Empty,
    #[error("degree {0} is below 3")]
    TooSmall(u32),
}

/// Finite set Δ ⊆ {3, 4, ...} with its period `p = gcd(δ − 2)` and the
/// shifted indices `K` such that Δ = {2 + kp : k ∈ K}.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct DegreeSet {
    degrees: Vec<u32>,
    period: usize,
    shifted: Vec<usize>,
}

impl DegreeSet {
    pub fn new(degrees: &[u32]) -> Result<Self, DegreeError> {
        let mut ds = degrees.to_vec();
        ds.sort_unstable();
        ds.dedup();
        if ds.is_empty() {
            return Err(DegreeError::Empty);
        }
        if let Some(&d) = ds.iter().find(|&&d| d < 3) {
            return Err(DegreeError::TooSmall(d));
        }
        let period = ds.iter().fold(0usize, |g, &d| g.gcd(&(d as usize - 2)));
        let shifted = ds.iter().map(|&d| (d as usize - 2) / period).collect();
        Ok(DegreeSet { degrees: ds, period, shifted })
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn shifted(&self) -> &[usize] {
        &self.shifted
    }

    pub fn max_degree(&self) -> u32 {
        *self.degrees.last().expect("nonempty")
    }

    pub fn contains(&self, d: u32) -> bool {
        self.degrees.binary_search(&d).is_ok()
    }
}

impl std::fmt::Display for DegreeSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.degrees.iter().map(|d| d.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// Integer series `T^m` for `m = 0..=max(Δ) − 1`, all truncated at `order`.
///
/// Built order by order: `[z^n] T^m` for `m ≥ 2` only needs coefficients of
/// `T` below `n`, because `T` has valuation 1.
pub fn tree_powers(delta: &DegreeSet, order: usize) -> Vec<IntSeries> {
    let mmax = delta.max_degree() as usize - 1;
    let mut pw: Vec<Vec<BigInt>> = vec![vec![BigInt::zero(); order + 1]; mmax + 1];
    pw[0][0] = BigInt::one();
    for n in 1..=order {
        for m in 2..=mmax {
            let mut acc = BigInt::zero();
            for i in 1..n {
                let t = &pw[1][i];
                if t.is_zero() {
                    continue;
                }
                let q = &pw[m - 1][n - i];
                if !q.is_zero() {
                    acc += t * q;
                }
            }
            pw[m][n] = acc;
        }
        let mut t = if n == 1 { BigInt::one() } else { BigInt::zero() };
        for &d in delta.degrees() {
            t += &pw[d as usize - 1][n];
        }
        pw[1][n] = t;
    }
    pw.into_iter().map(IntSeries::from_coeffs).collect()
}

pub fn tree_series_int(delta: &DegreeSet, order: usize) -> IntSeries {
    tree_powers(delta, order.max(1)).swap_remove(1).truncate(order)
}

/// `T_Δ(z)`, counted by non-root leaves.
pub fn tree_series(delta: &DegreeSet, order: usize) -> TruncSeries {
    TruncSeries::from_int(&tree_series_int(delta, order))
}

/// `Y_Δ(t)` with `T_Δ(z) = z Y_Δ(z^p)`.
pub fn y_series(delta: &DegreeSet, order: usize) -> TruncSeries {
    let p = delta.period();
    let t = tree_series_int(delta, order * p + 1);
    let coeffs = (0..=order).map(|i| Rat::from_integer(t.coeff(i * p + 1))).collect();
    TruncSeries::from_coeffs(coeffs)
}

/// `Z_Δ(t) = p t Y'(t) + Y(t)`, so that `Z_Δ(z^p) = T'_Δ(z)`.
pub fn z_series(delta: &DegreeSet, order: usize) -> TruncSeries {
    let y = y_series(delta, order);
    let p = delta.period() as i64;
    let coeffs = (0..=order)
        .map(|i| y.coeff(i) * rat_int(p * i as i64 + 1))
        .collect();
    TruncSeries::from_coeffs(coeffs)
}

fn binom(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// Trees with ℓ legs, `Σ_{δ > ℓ} C(δ−1, ℓ) T^{δ−ℓ−1}`, in integers.
pub fn legs_series_int(delta: &DegreeSet, legs: usize, order: usize) -> IntSeries {
    let powers = tree_powers(delta, order);
    legs_from_powers(delta, legs, &powers)
}

pub(crate) fn legs_from_powers(delta: &DegreeSet, legs: usize, powers: &[IntSeries]) -> IntSeries {
    let order = powers[0].order();
    let mut acc = IntSeries::zero(order);
    for &d in delta.degrees() {
        let d = d as usize;
        if d > legs {
            acc = acc.add(&powers[d - legs - 1].scale(&binom(d as u64 - 1, legs as u64)));
        }
    }
    acc
}

/// `T_{Δ,ℓ}(z)` by the direct binomial sum over root degrees.
pub fn legs_series(delta: &DegreeSet, legs: usize, order: usize) -> TruncSeries {
    assert!(legs >= 1, "at least one leg");
    TruncSeries::from_int(&legs_series_int(delta, legs, order))
}

/// `Y_{Δ,ℓ}(t)` via `Y_{Δ,1} = 1 − 1/Z` and
/// `Y_{Δ,ℓ} = (p t Y'_{Δ,ℓ−1} + (2 − ℓ) Y_{Δ,ℓ−1}) / (ℓ Z)`.
pub fn legs_y_series(delta: &DegreeSet, legs: usize, order: usize) -> Result<TruncSeries, SeriesError> {
    assert!(legs >= 1, "at least one leg");
    let z_inv = z_series(delta, order).inverse()?;
    let p = delta.period() as i64;
    let mut y = TruncSeries::one(order).sub(&z_inv);
    for l in 2..=legs as i64 {
        let coeffs = (0..=order)
            .map(|i| y.coeff(i) * rat_int(p * i as i64 + 2 - l))
            .collect();
        y = TruncSeries::from_coeffs(coeffs).mul(&z_inv).scale(&Rat::new(BigInt::one(), BigInt::from(l)));
    }
    Ok(y)
}

/// `T_{Δ,ℓ}(z) = z^{1−ℓ} Y_{Δ,ℓ}(z^p)`, assembled from [`legs_y_series`].
pub fn legs_series_via_y(delta: &DegreeSet, legs: usize, order: usize) -> Result<TruncSeries, SeriesError> {
    let p = delta.period();
    let y = legs_y_series(delta, legs, (order + legs) / p + 1)?;
    let mut out = TruncSeries::zero(order);
    for n in 0..=order {
        let e = n + legs - 1;
        if e.is_multiple_of(p) {
            out.set(n, y.coeff(e / p));
        }
    }
    Ok(out)
}

/// One-sided doubly-rooted trees, `2 T_Δ(z)/z − 1`.
pub fn one_sided_series(delta: &DegreeSet, order: usize) -> TruncSeries {
    let t = tree_series(delta, order + 1).shift_down(1);
    t.scale(&rat_int(2)).sub(&TruncSeries::one(order))
}

/// `[u^r] T•(u, z)` for `r = 0..=r_max`, where `T• = u / (1 − u T_{Δ,1})`
/// counts doubly-rooted trees by spine edges and plain leaves.
pub fn spine_bivariate(delta: &DegreeSet, order: usize, r_max: usize) -> Vec<TruncSeries> {
    let t1 = legs_series(delta, 1, order);
    let mut out = vec![TruncSeries::zero(order)];
    let mut cur = TruncSeries::one(order);
    for _ in 1..=r_max {
        out.push(cur.clone());
        cur = cur.mul(&t1);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum LeafTag {
    Plain,
    Marked,
    Leg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TreeNode {
    Leaf(LeafTag),
    Internal { start: u32, len: u32 },
}

/// Plane tree hanging below an implicit root leaf. `root` is the vertex
/// adjacent to the root leaf; children of internal nodes are stored in
/// planar order in a shared index buffer.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct PlaneTree {
    nodes: Vec<TreeNode>,
    kids: Vec<u32>,
    root: u32,
}

impl PlaneTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_leaf(&mut self, tag: LeafTag) -> u32 {
        self.nodes.push(TreeNode::Leaf(tag));
        self.nodes.len() as u32 - 1
    }

    /// Adds an internal node whose children are already in the tree.
    pub fn add_internal(&mut self, children: &[u32]) -> u32 {
        assert!(!children.is_empty(), "internal node needs children");
        let start = self.kids.len() as u32;
        self.kids.extend_from_slice(children);
        self.nodes.push(TreeNode::Internal { start, len: children.len() as u32 });
        self.nodes.len() as u32 - 1
    }

    pub fn set_root(&mut self, root: u32) {
        self.root = root;
    }

    pub fn root(&self) -> u32 {
        self.root
    }

    pub fn node(&self, id: u32) -> TreeNode {
        self.nodes[id as usize]
    }

    pub fn children(&self, id: u32) -> &[u32] {
        match self.nodes[id as usize] {
            TreeNode::Leaf(_) => &[],
            TreeNode::Internal { start, len } => &self.kids[start as usize..(start + len) as usize],
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Leaves reachable from the root with the given tag.
    pub fn count_leaves(&self, tag: LeafTag) -> usize {
        let mut count = 0;
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            match self.nodes[v as usize] {
                TreeNode::Leaf(t) => count += usize::from(t == tag),
                TreeNode::Internal { .. } => stack.extend_from_slice(self.children(v)),
            }
        }
        count
    }

    pub fn plain_leaves_below(&self, v: u32) -> usize {
        let mut count = 0;
        let mut stack = vec![v];
        while let Some(v) = stack.pop() {
            match self.nodes[v as usize] {
                TreeNode::Leaf(t) => count += usize::from(t == LeafTag::Plain),
                TreeNode::Internal { .. } => stack.extend_from_slice(self.children(v)),
            }
        }
        count
    }

    /// Path from the root to the marked leaf, as `(node, index of the child
    /// towards the marked leaf)` for each internal spine vertex. `None` if
    /// there is no marked leaf.
    pub fn spine(&self) -> Option<Vec<(u32, usize)>> {
        fn walk(t: &PlaneTree, v: u32, path: &mut Vec<(u32, usize)>) -> bool {
            match t.nodes[v as usize] {
                TreeNode::Leaf(tag) => tag == LeafTag::Marked,
                TreeNode::Internal { .. } => {
                    for (i, &c) in t.children(v).iter().enumerate() {
                        path.push((v, i));
                        if walk(t, c, path) {
                            return true;
                        }
                        path.pop();
                    }
                    false
                }
            }
        }
        let mut path = Vec::new();
        walk(self, self.root, &mut path).then_some(path)
    }

    /// Number of edges from the root leaf to the marked leaf.
    pub fn spine_length(&self) -> Option<usize> {
        self.spine().map(|s| s.len() + 1)
    }

    /// For each internal spine vertex, the plain leaves hanging on the left
    /// (children before the spine child) and on the right.
    pub fn spine_sides(&self) -> Option<Vec<(usize, usize)>> {
        let spine = self.spine()?;
        Some(
            spine
                .iter()
                .map(|&(v, i)| {
                    let ch = self.children(v);
                    let left = ch[..i].iter().map(|&c| self.plain_leaves_below(c)).sum();
                    let right = ch[i + 1..].iter().map(|&c| self.plain_leaves_below(c)).sum();
                    (left, right)
                })
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;

    fn ds(d: &[u32]) -> DegreeSet {
        DegreeSet::new(d).unwrap()
    }

    fn ints(s: &TruncSeries) -> Vec<i64> {
        s.coeffs().iter().map(|c| c.to_integer().to_i64().unwrap()).collect()
    }

    #[test]
    fn degree_set_period() {
        let d = ds(&[4, 6]);
        assert_eq!(d.period(), 2);
        assert_eq!(d.shifted(), &[1, 2]);
        assert_eq!(ds(&[3, 4]).period(), 1);
        assert_eq!(DegreeSet::new(&[]), Err(DegreeError::Empty));
        assert_eq!(DegreeSet::new(&[2, 3]), Err(DegreeError::TooSmall(2)));
    }

    #[test]
    fn tree_series_examples() {
        assert_eq!(ints(&tree_series(&ds(&[3]), 5)), vec![0, 1, 1, 2, 5, 14]);
        assert_eq!(ints(&tree_series(&ds(&[4]), 7)), vec![0, 1, 0, 1, 0, 3, 0, 12]);
        assert_eq!(ints(&tree_series(&ds(&[3, 4]), 4)), vec![0, 1, 1, 3, 10]);
    }

    #[test]
    fn y_and_z_examples() {
        assert_eq!(ints(&y_series(&ds(&[3]), 3)), vec![1, 1, 2, 5]);
        assert_eq!(ints(&y_series(&ds(&[4]), 3)), vec![1, 1, 3, 12]);
        assert_eq!(ints(&z_series(&ds(&[3]), 3)), vec![1, 2, 6, 20]);
        assert_eq!(ints(&z_series(&ds(&[4]), 3)), vec![1, 3, 15, 84]);
    }

    #[test]
    fn legs_examples() {
        assert_eq!(ints(&legs_series(&ds(&[3]), 1, 3)), vec![0, 2, 2, 4]);
        assert_eq!(ints(&legs_series(&ds(&[3]), 2, 3)), vec![1, 0, 0, 0]);
        assert!(legs_series(&ds(&[3]), 3, 3).is_zero());
        let d = ds(&[3, 4]);
        let t1 = legs_series(&d, 1, 8);
        let tp = tree_series(&d, 9).derive();
        let expect = TruncSeries::one(8).sub(&tp.inverse().unwrap());
        assert_eq!(t1, expect);
    }

    #[test]
    fn one_sided_examples() {
        assert_eq!(ints(&one_sided_series(&ds(&[3]), 3)), vec![1, 2, 4, 10]);
        assert_eq!(ints(&one_sided_series(&ds(&[4]), 4)), vec![1, 0, 2, 0, 6]);
    }

    #[test]
    fn spine_small_values() {
        let sb = spine_bivariate(&ds(&[3]), 4, 6);
        assert_eq!(sb[1].coeff(0), rat_int(1));
        assert_eq!(sb[2].coeff(2), rat_int(2));
        assert_eq!(sb[3].coeff(2), rat_int(4));
    }

    #[test]
    fn plane_tree_spine() {
        // root -> v(a, w(marked, b)) with plain leaves a, b
        let mut t = PlaneTree::new();
        let a = t.add_leaf(LeafTag::Plain);
        let m = t.add_leaf(LeafTag::Marked);
        let b = t.add_leaf(LeafTag::Plain);
        let w = t.add_internal(&[m, b]);
        let v = t.add_internal(&[a, w]);
        t.set_root(v);
        assert_eq!(t.spine_length(), Some(3));
        assert_eq!(t.spine_sides(), Some(vec![(1, 0), (0, 1)]));
        assert_eq!(t.count_leaves(LeafTag::Plain), 2);
    }
}
