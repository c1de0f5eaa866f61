//! Exact uniform sampling of leaf-rooted (Δ ∪ {1})-valent maps through their
//! scheme decomposition, structuring-edge statistics, the run criterion for
//! duals of dissections, and the limit law of rescaled structuring edges.
//!
//! Sampling is the recursive method over integer counting tables. Each
//! weighted choice is first resolved with a 53-bit uniform against `f64`
//! cumulative probabilities computed from logarithms; when the uniform lands
//! within a safety margin of a boundary, the choice is redone exactly by
//! refining the same uniform bit by bit against the integer counts, so the
//! output distribution is exactly uniform.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::Zero;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::asymptotics_enum::{gamma_half, ln_bigint, residue_class};
use crate::char_system::{solve_characteristic, CharConstants, CharError};
use crate::exact_series::IntSeries;
use crate::maps::CombinatorialMap;
use crate::scheme_constants::{brute_force_schemes, SchemeError, MAX_BRUTE_EDGES};
use crate::surface::Surface;
use crate::tree_gf::{legs_from_powers, tree_powers, DegreeSet, LeafTag, PlaneTree, TreeNode};

/// Probability margin below which a float decision is redone exactly.
const MARGIN: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("the disc has no scheme decomposition")]
    Disc,
    #[error("surface {surface} needs schemes with {edges} edges, the exhaustive cap is {cap}")]
    TooManyEdges { surface: Surface, edges: i64, cap: usize },
    #[error("no map of {surface} with {n} leaves and degrees {degrees}")]
    EmptyClass { surface: Surface, degrees: String, n: usize },
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Char(#[from] CharError),
}

fn ln_table(v: &[BigInt]) -> Vec<f64> {
    v.iter()
        .map(|x| if x.sign() == Sign::Plus { ln_bigint(x) } else { f64::NEG_INFINITY })
        .collect()
}

/// Integer counts with their logarithms.
#[derive(Clone, Debug)]
struct Table {
    exact: Vec<BigInt>,
    ln: Vec<f64>,
}

impl Table {
    fn new(exact: Vec<BigInt>) -> Self {
        let ln = ln_table(&exact);
        Table { exact, ln }
    }

    fn from_series(s: &IntSeries) -> Self {
        Self::new(s.coeffs().to_vec())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Slot {
    Edge,
    Legs(usize),
}

#[derive(Clone, Debug)]
struct SchemeSlots {
    map: CombinatorialMap,
    /// Canonical end of each edge, ascending; the root edge comes first.
    edge_ends: Vec<u32>,
    /// Non-root vertices with their first half-edge and degree.
    vertices: Vec<(u32, u32)>,
    signature: usize,
}

/// Counting tables for `A_S^Δ(n)`, shared read-only by all samplers.
#[derive(Clone, Debug)]
pub struct CountTables {
    pub surface: Surface,
    pub delta: DegreeSet,
    pub n: usize,
    size: usize,
    /// `T^m` for `m = 0..=max(Δ) − 1`.
    pw: Vec<Table>,
    d: Table,
    t1: Table,
    legs: BTreeMap<usize, Table>,
    schemes: Vec<SchemeSlots>,
    /// Per slot signature, `rest[i] = Π_{j ≥ i}` slot series.
    suffix: Vec<(Vec<Slot>, Vec<Table>)>,
    weights: Table,
    total: BigInt,
    ln_total: f64,
}

fn binom_u64(n: usize, k: usize) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

impl CountTables {
    pub fn build(surface: &Surface, delta: &DegreeSet, n: usize) -> Result<Self, SamplerError> {
        if surface.is_disc() {
            return Err(SamplerError::Disc);
        }
        let edges = surface.cubic_edges();
        if edges as usize > MAX_BRUTE_EDGES {
            return Err(SamplerError::TooManyEdges { surface: *surface, edges, cap: MAX_BRUTE_EDGES });
        }
        let empty = || SamplerError::EmptyClass { surface: *surface, degrees: delta.to_string(), n };
        if n == 0 || n % delta.period() != residue_class(surface.chi(), delta.period()) {
            return Err(empty());
        }
        let size = n - 1;
        let powers = tree_powers(delta, size + 1);
        let d = Table::new((0..=size).map(|m| powers[1].coeff(m + 1) * BigInt::from(m + 1)).collect());
        let trunc = |s: &IntSeries| IntSeries::from_coeffs(s.coeffs()[..=size].to_vec());
        let t1 = Table::from_series(&trunc(&legs_from_powers(delta, 1, &powers)));
        let max_deg = delta.max_degree();
        let mut schemes = Vec::new();
        let mut signatures: Vec<Vec<Slot>> = Vec::new();
        for map in brute_force_schemes(surface, edges as usize, max_deg == 3)? {
            let degs = map.degrees();
            if degs.iter().any(|&x| x > max_deg) {
                continue;
            }
            let edge_ends: Vec<u32> = (0..map.half_edge_count() as u32).filter(|&h| h < map.mate(h)).collect();
            let mut first = vec![u32::MAX; degs.len()];
            for h in 0..map.half_edge_count() as u32 {
                let v = map.vertex_of(h) as usize;
                first[v] = first[v].min(h);
            }
            let vertices: Vec<(u32, u32)> = (1..degs.len()).map(|v| (first[v], degs[v])).collect();
            let mut sig: Vec<Slot> = vec![Slot::Edge; edge_ends.len()];
            sig.extend(vertices.iter().map(|&(_, dg)| Slot::Legs(dg as usize - 1)));
            let signature = match signatures.iter().position(|s| *s == sig) {
                Some(i) => i,
                None => {
                    signatures.push(sig);
                    signatures.len() - 1
                }
            };
            schemes.push(SchemeSlots { map, edge_ends, vertices, signature });
        }
        let mut legs = BTreeMap::new();
        for sig in &signatures {
            for s in sig {
                if let Slot::Legs(l) = *s {
                    legs.entry(l).or_insert_with(|| Table::from_series(&trunc(&legs_from_powers(delta, l, &powers))));
                }
            }
        }
        let series_of = |s: Slot| -> IntSeries {
            match s {
                Slot::Edge => IntSeries::from_coeffs(d.exact.clone()),
                Slot::Legs(l) => IntSeries::from_coeffs(legs[&l].exact.clone()),
            }
        };
        let suffix: Vec<(Vec<Slot>, Vec<Table>)> = signatures
            .into_iter()
            .map(|sig| {
                let mut rest = vec![IntSeries::one(size)];
                for &s in sig.iter().rev() {
                    let next = rest.last().expect("nonempty").mul(&series_of(s));
                    rest.push(next);
                }
                rest.reverse();
                let tables = rest.iter().map(Table::from_series).collect();
                (sig, tables)
            })
            .collect();
        let weights = Table::new(schemes.iter().map(|s| suffix[s.signature].1[0].exact[size].clone()).collect());
        let total: BigInt = weights.exact.iter().sum();
        if total.is_zero() {
            return Err(empty());
        }
        let ln_total = ln_bigint(&total);
        let pw = powers.iter().map(|s| Table::from_series(&trunc(s))).collect();
        Ok(CountTables {
            surface: *surface,
            delta: delta.clone(),
            n,
            size,
            pw,
            d,
            t1,
            legs,
            schemes,
            suffix,
            weights,
            total,
            ln_total,
        })
    }

    /// `|A_S^Δ(n)|`.
    pub fn total(&self) -> &BigInt {
        &self.total
    }

    /// Per-scheme counts `[z^n] F_S`, in scheme enumeration order.
    pub fn scheme_counts(&self) -> &[BigInt] {
        &self.weights.exact
    }

    pub fn scheme_count(&self) -> usize {
        self.schemes.len()
    }
}

/// Source of the random decisions taken by the sampler.
pub trait ChoiceSource {
    /// Picks `i ∈ 0..k` with probability `w(i) / total`.
    fn weighted<L, E>(&mut self, k: usize, ln_w: L, ln_total: f64, exact_w: E, total: &BigInt) -> usize
    where
        L: Fn(usize) -> f64,
        E: Fn(usize) -> BigInt;

    /// Uniform in `0..k`.
    fn uniform(&mut self, k: usize) -> usize;
}

/// Random decisions from a generator, exact through lazy refinement.
pub struct RngSource<R> {
    rng: R,
    fallbacks: u64,
}

impl<R: RngCore> RngSource<R> {
    pub fn new(rng: R) -> Self {
        RngSource { rng, fallbacks: 0 }
    }

    /// Decisions that needed the exact comparison.
    pub fn fallbacks(&self) -> u64 {
        self.fallbacks
    }

    fn exact_pick<E: Fn(usize) -> BigInt>(&mut self, k: usize, u: u64, exact_w: E, total: &BigInt) -> usize {
        self.fallbacks += 1;
        let total = total.to_biguint().expect("positive total");
        let mut cum = Vec::with_capacity(k + 1);
        cum.push(BigUint::zero());
        for i in 0..k {
            let w = exact_w(i).to_biguint().expect("non-negative weight");
            let next = cum.last().expect("nonempty") + w;
            cum.push(next);
        }
        assert_eq!(cum[k], total, "weights do not sum to the total");
        let mut num = BigUint::from(u);
        let mut bits = 53u64;
        loop {
            let lo = &num * &total;
            let hi = (&num + 1u32) * &total;
            for i in 0..k {
                if cum[i] == cum[i + 1] {
                    continue;
                }
                if (&cum[i] << bits) <= lo && hi <= (&cum[i + 1] << bits) {
                    return i;
                }
            }
            num = (num << 1u32) + BigUint::from(self.rng.next_u32() & 1);
            bits += 1;
        }
    }
}

impl<R: RngCore> ChoiceSource for RngSource<R> {
    fn weighted<L, E>(&mut self, k: usize, ln_w: L, ln_total: f64, exact_w: E, total: &BigInt) -> usize
    where
        L: Fn(usize) -> f64,
        E: Fn(usize) -> BigInt,
    {
        let u = self.rng.next_u64() >> 11;
        let scale = (1u64 << 53) as f64;
        let lo = u as f64 / scale;
        let hi = (u + 1) as f64 / scale;
        let mut cum = 0.0;
        for i in 0..k {
            let w = (ln_w(i) - ln_total).exp();
            if w == 0.0 {
                continue;
            }
            let next = cum + w;
            if lo > cum + MARGIN && hi < next - MARGIN {
                return i;
            }
            if lo <= next + MARGIN {
                break;
            }
            cum = next;
        }
        self.exact_pick(k, u, exact_w, total)
    }

    fn uniform(&mut self, k: usize) -> usize {
        self.rng.gen_range(0..k)
    }
}

/// Walks every decision sequence once, visiting each object of the class.
#[derive(Debug, Default)]
pub struct Exhaustive {
    /// `(rank among admissible options, number of admissible options)`.
    path: Vec<(usize, usize)>,
    pos: usize,
}

impl Exhaustive {
    pub fn new() -> Self {
        Self::default()
    }

    fn take(&mut self, options: usize) -> usize {
        assert!(options > 0, "no admissible option");
        if self.pos == self.path.len() {
            self.path.push((0, options));
        }
        let (rank, count) = self.path[self.pos];
        assert_eq!(count, options, "decision tree changed between replays");
        self.pos += 1;
        rank
    }

    /// Moves to the next decision sequence; false when all are done.
    pub fn advance(&mut self) -> bool {
        self.pos = 0;
        while let Some((rank, count)) = self.path.pop() {
            if rank + 1 < count {
                self.path.push((rank + 1, count));
                return true;
            }
        }
        false
    }
}

impl ChoiceSource for Exhaustive {
    fn weighted<L, E>(&mut self, k: usize, ln_w: L, _ln_total: f64, _exact_w: E, _total: &BigInt) -> usize
    where
        L: Fn(usize) -> f64,
        E: Fn(usize) -> BigInt,
    {
        let admissible: Vec<usize> = (0..k).filter(|&i| ln_w(i) > f64::NEG_INFINITY).collect();
        admissible[self.take(admissible.len())]
    }

    fn uniform(&mut self, k: usize) -> usize {
        self.take(k)
    }
}

/// Candidate `i` of the range `lo..=hi` in alternating order from both ends.
fn zigzag(lo: usize, hi: usize, i: usize) -> usize {
    if i.is_multiple_of(2) {
        lo + i / 2
    } else {
        hi - i / 2
    }
}

/// The `rank`-th `k`-subset of `0..n` in lexicographic order.
fn unrank_subset(n: usize, k: usize, mut rank: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut next = 0;
    for left in (1..=k).rev() {
        loop {
            let c = binom_u64(n - next - 1, left - 1);
            if rank < c {
                out.push(next);
                next += 1;
                break;
            }
            rank -= c;
            next += 1;
        }
    }
    out
}

/// A scheme with one doubly-rooted tree per edge and one leg-tree per
/// non-root vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecoratedScheme {
    pub scheme: CombinatorialMap,
    /// Canonical end of each edge (its smaller half-edge), ascending; the
    /// first edge carries the root leaf.
    pub edge_ends: Vec<u32>,
    pub edge_trees: Vec<PlaneTree>,
    /// First half-edge of each non-root vertex, in vertex order.
    pub vertex_roots: Vec<u32>,
    pub vertex_trees: Vec<PlaneTree>,
}

struct OneLeg {
    degree: u32,
    leg: usize,
    sizes: Vec<usize>,
}

struct Draw<'a, S> {
    t: &'a CountTables,
    src: &'a mut S,
}

impl<S: ChoiceSource> Draw<'_, S> {
    /// Sizes of `k` trees with `m` leaves in total.
    fn split(&mut self, k: usize, m: usize) -> Vec<usize> {
        let t = self.t;
        let mut out = Vec::with_capacity(k);
        let mut m = m;
        for i in 0..k {
            let r = k - i;
            if r == 1 {
                out.push(m);
                break;
            }
            let hi = m - (r - 1);
            let count = hi;
            let (tr, rest, whole) = (&t.pw[1], &t.pw[r - 1], &t.pw[r]);
            let pick = self.src.weighted(
                count,
                |j| {
                    let a = zigzag(1, hi, j);
                    tr.ln[a] + rest.ln[m - a]
                },
                whole.ln[m],
                |j| {
                    let a = zigzag(1, hi, j);
                    &tr.exact[a] * &rest.exact[m - a]
                },
                &whole.exact[m],
            );
            let a = zigzag(1, hi, pick);
            out.push(a);
            m -= a;
        }
        out
    }

    fn tree(&mut self, tree: &mut PlaneTree, m: usize) -> u32 {
        if m == 1 {
            return tree.add_leaf(LeafTag::Plain);
        }
        let t = self.t;
        let degs = t.delta.degrees();
        let i = self.src.weighted(
            degs.len(),
            |i| t.pw[degs[i] as usize - 1].ln[m],
            t.pw[1].ln[m],
            |i| t.pw[degs[i] as usize - 1].exact[m].clone(),
            &t.pw[1].exact[m],
        );
        let sizes = self.split(degs[i] as usize - 1, m);
        let kids: Vec<u32> = sizes.into_iter().map(|s| self.tree(tree, s)).collect();
        tree.add_internal(&kids)
    }

    fn one_leg(&mut self, m: usize) -> OneLeg {
        let t = self.t;
        let degs = t.delta.degrees();
        let i = self.src.weighted(
            degs.len(),
            |i| ((degs[i] - 1) as f64).ln() + t.pw[degs[i] as usize - 2].ln[m],
            t.t1.ln[m],
            |i| BigInt::from(degs[i] - 1) * &t.pw[degs[i] as usize - 2].exact[m],
            &t.t1.exact[m],
        );
        let degree = degs[i];
        let leg = self.src.uniform(degree as usize - 1);
        let sizes = self.split(degree as usize - 2, m);
        OneLeg { degree, leg, sizes }
    }

    fn doubly_rooted(&mut self, m: usize) -> PlaneTree {
        let t = self.t;
        let mut comps = Vec::new();
        let mut m = m;
        while m > 0 {
            let (t1, d) = (&t.t1, &t.d);
            let j = self.src.weighted(
                m,
                |i| {
                    let a = zigzag(1, m, i);
                    t1.ln[a] + d.ln[m - a]
                },
                d.ln[m],
                |i| {
                    let a = zigzag(1, m, i);
                    &t1.exact[a] * &d.exact[m - a]
                },
                &d.exact[m],
            );
            let a = zigzag(1, m, j);
            comps.push(self.one_leg(a));
            m -= a;
        }
        let mut tree = PlaneTree::new();
        let mut cur = tree.add_leaf(LeafTag::Marked);
        for c in comps.into_iter().rev() {
            let mut kids = Vec::with_capacity(c.degree as usize - 1);
            let mut sizes = c.sizes.into_iter();
            for pos in 0..c.degree as usize - 1 {
                if pos == c.leg {
                    kids.push(cur);
                } else {
                    let s = sizes.next().expect("subtree size");
                    kids.push(self.tree(&mut tree, s));
                }
            }
            cur = tree.add_internal(&kids);
        }
        tree.set_root(cur);
        tree
    }

    fn leg_tree(&mut self, legs: usize, m: usize) -> PlaneTree {
        let t = self.t;
        let degs: Vec<u32> = t.delta.degrees().iter().copied().filter(|&x| x as usize > legs).collect();
        let table = &t.legs[&legs];
        let weight = |i: usize| binom_u64(degs[i] as usize - 1, legs);
        let i = self.src.weighted(
            degs.len(),
            |i| (weight(i) as f64).ln() + t.pw[degs[i] as usize - 1 - legs].ln[m],
            table.ln[m],
            |i| BigInt::from(weight(i)) * &t.pw[degs[i] as usize - 1 - legs].exact[m],
            &table.exact[m],
        );
        let degree = degs[i] as usize;
        let rank = self.src.uniform(weight(i) as usize) as u64;
        let leg_pos = unrank_subset(degree - 1, legs, rank);
        let sizes = self.split(degree - 1 - legs, m);
        let mut tree = PlaneTree::new();
        let mut sizes = sizes.into_iter();
        let mut kids = Vec::with_capacity(degree - 1);
        for pos in 0..degree - 1 {
            if leg_pos.contains(&pos) {
                kids.push(tree.add_leaf(LeafTag::Leg));
            } else {
                let s = sizes.next().expect("subtree size");
                kids.push(self.tree(&mut tree, s));
            }
        }
        let root = tree.add_internal(&kids);
        tree.set_root(root);
        tree
    }

    fn decorated(&mut self) -> DecoratedScheme {
        let t = self.t;
        let w = &t.weights;
        let si = self.src.weighted(t.schemes.len(), |i| w.ln[i], t.ln_total, |i| w.exact[i].clone(), &t.total);
        let scheme = &t.schemes[si];
        let (sig, rest) = &t.suffix[scheme.signature];
        let mut sizes = Vec::with_capacity(sig.len());
        let mut r = t.size;
        for (i, &slot) in sig.iter().enumerate() {
            if i + 1 == sig.len() {
                sizes.push(r);
                break;
            }
            let own = match slot {
                Slot::Edge => &t.d,
                Slot::Legs(l) => &t.legs[&l],
            };
            let next = &rest[i + 1];
            let m = self.src.weighted(
                r + 1,
                |j| {
                    let a = zigzag(0, r, j);
                    own.ln[a] + next.ln[r - a]
                },
                rest[i].ln[r],
                |j| {
                    let a = zigzag(0, r, j);
                    &own.exact[a] * &next.exact[r - a]
                },
                &rest[i].exact[r],
            );
            let a = zigzag(0, r, m);
            sizes.push(a);
            r -= a;
        }
        let e = scheme.edge_ends.len();
        let edge_trees = sizes[..e].iter().map(|&m| self.doubly_rooted(m)).collect();
        let vertex_trees = scheme
            .vertices
            .iter()
            .zip(&sizes[e..])
            .map(|(&(_, deg), &m)| self.leg_tree(deg as usize - 1, m))
            .collect();
        DecoratedScheme {
            scheme: scheme.map.clone(),
            edge_ends: scheme.edge_ends.clone(),
            edge_trees,
            vertex_roots: scheme.vertices.iter().map(|&(h, _)| h).collect(),
            vertex_trees,
        }
    }
}

/// One decorated scheme drawn with the given decision source.
pub fn sample_with<S: ChoiceSource>(tables: &CountTables, src: &mut S) -> DecoratedScheme {
    Draw { t: tables, src }.decorated()
}

/// The generator used for sample `index` under `seed`: ChaCha8 keyed by the
/// seed, on stream `index`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Sample `index` of the seeded sequence; identical for identical inputs.
pub fn sample_uniform(tables: &CountTables, seed: u64, index: u64) -> DecoratedScheme {
    let mut src = RngSource::new(sample_rng(seed, index));
    sample_with(tables, &mut src)
}

/// Every decorated scheme of the class, once each.
pub fn enumerate_all<F: FnMut(DecoratedScheme)>(tables: &CountTables, mut visit: F) {
    let mut src = Exhaustive::new();
    loop {
        visit(sample_with(tables, &mut src));
        if !src.advance() {
            break;
        }
    }
}

impl DecoratedScheme {
    /// Leaves of the assembled map: the root leaf plus all plain leaves.
    pub fn leaf_count(&self) -> usize {
        1 + self
            .edge_trees
            .iter()
            .chain(&self.vertex_trees)
            .map(|t| t.count_leaves(LeafTag::Plain))
            .sum::<usize>()
    }

    /// Spine edges of the trees on the non-root edges.
    pub fn structuring_edges(&self) -> usize {
        self.edge_trees[1..].iter().map(|t| t.spine_length().expect("marked leaf")).sum()
    }

    pub fn all_balanced(&self) -> bool {
        self.edge_trees.iter().all(is_balanced)
    }

    /// The full map on the closed surface encoded by this decoration.
    pub fn assemble(&self) -> CombinatorialMap {
        let s = &self.scheme;
        let mut b = Builder::default();
        let mut slot = vec![u32::MAX; s.half_edge_count()];
        let root = b.vertex(1);
        slot[0] = root;
        for (&first, tree) in self.vertex_roots.iter().zip(&self.vertex_trees) {
            let r = tree.root();
            let kids = tree.children(r).to_vec();
            let base = b.vertex(kids.len() + 1);
            slot[first as usize] = base;
            let mut h = first;
            for (i, &c) in kids.iter().enumerate() {
                match tree.node(c) {
                    TreeNode::Leaf(LeafTag::Leg) => {
                        h = s.next(h);
                        slot[h as usize] = base + 1 + i as u32;
                    }
                    _ => b.hang(tree, c, base + 1 + i as u32),
                }
            }
        }
        for (&h, tree) in self.edge_ends.iter().zip(&self.edge_trees) {
            let mut cur = slot[h as usize];
            for (node, toward) in tree.spine().expect("marked leaf") {
                let kids = tree.children(node);
                let base = b.vertex(kids.len() + 1);
                b.link(cur, base, false);
                for (i, &c) in kids.iter().enumerate() {
                    if i != toward {
                        b.hang(tree, c, base + 1 + i as u32);
                    }
                }
                cur = base + 1 + toward as u32;
            }
            b.link(cur, slot[s.mate(h) as usize], s.twisted(h));
        }
        CombinatorialMap::from_blocks_rooted(&b.degrees, b.mate, b.twist, root).expect("assembled map is valid")
    }
}

#[derive(Default)]
struct Builder {
    degrees: Vec<u32>,
    mate: Vec<u32>,
    twist: Vec<bool>,
}

impl Builder {
    /// A new vertex; returns its first half-edge, the rest follow in order.
    fn vertex(&mut self, degree: usize) -> u32 {
        let start = self.mate.len() as u32;
        self.degrees.push(degree as u32);
        self.mate.resize(self.mate.len() + degree, u32::MAX);
        self.twist.resize(self.twist.len() + degree, false);
        start
    }

    fn link(&mut self, a: u32, b: u32, twisted: bool) {
        self.mate[a as usize] = b;
        self.mate[b as usize] = a;
        self.twist[a as usize] = twisted;
        self.twist[b as usize] = twisted;
    }

    /// Attaches the subtree at `v` to the half-edge `parent`.
    fn hang(&mut self, tree: &PlaneTree, v: u32, parent: u32) {
        let kids = tree.children(v);
        let first = self.vertex(kids.len() + 1);
        self.link(parent, first, false);
        for (i, &c) in kids.iter().enumerate() {
            self.hang(tree, c, first + 1 + i as u32);
        }
    }
}

/// No leaf on one side of the spine.
pub fn is_one_sided(tree: &PlaneTree) -> bool {
    let sides = tree.spine_sides().expect("marked leaf");
    let left: usize = sides.iter().map(|s| s.0).sum();
    let right: usize = sides.iter().map(|s| s.1).sum();
    left == 0 || right == 0
}

/// Whether three spine edges cut the tree into four two-sided pieces; the
/// greedy scan closes each piece as soon as it is two-sided.
pub fn is_balanced(tree: &PlaneTree) -> bool {
    let sides = tree.spine_sides().expect("marked leaf");
    let mut pieces = 0;
    let (mut left, mut right) = (false, false);
    for (l, r) in sides {
        left |= l > 0;
        right |= r > 0;
        if left && right {
            pieces += 1;
            left = false;
            right = false;
            if pieces == 4 {
                return true;
            }
        }
    }
    false
}

/// Whether `map` is the dual of a dissection: every face meets a leaf, no
/// vertex repeats within a run, and two distinct runs share nothing, one
/// vertex, or one edge with its endpoints.
pub fn is_dual_of_dissection(map: &CombinatorialMap) -> bool {
    let orbits = map.face_orbits();
    let n = map.half_edge_count();
    let mut orbit_of = vec![0usize; 2 * n];
    for (i, orbit) in orbits.iter().enumerate() {
        for &(h, o) in orbit {
            orbit_of[2 * h as usize + o as usize] = i;
        }
    }
    let degrees = map.degrees();
    let is_leaf = |h: u32| degrees[map.vertex_of(h) as usize] == 1;
    // run r spans verts[vstart[r]..vstart[r+1]] and edges[estart[r]..estart[r+1]]
    let (mut verts, mut edges) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let (mut vstart, mut estart) = (vec![0usize], vec![0usize]);
    for (i, orbit) in orbits.iter().enumerate() {
        let (h0, o0) = orbit[0];
        let m = map.mate(h0);
        if orbit_of[2 * m as usize + (!(o0 ^ map.twisted(h0))) as usize] < i {
            continue;
        }
        let Some(start) = orbit.iter().position(|&(h, _)| is_leaf(h)) else {
            return false;
        };
        let len = orbit.len();
        verts.push(map.vertex_of(orbit[start].0));
        for step in 1..=len {
            let (prev, _) = orbit[(start + step - 1) % len];
            let (h, _) = orbit[(start + step) % len];
            edges.push(prev.min(map.mate(prev)));
            verts.push(map.vertex_of(h));
            if is_leaf(h) {
                vstart.push(verts.len());
                estart.push(edges.len());
                verts.push(map.vertex_of(h));
            }
        }
        verts.pop();
    }
    let runs = vstart.len() - 1;
    let run_verts = |r: usize| &verts[vstart[r]..vstart[r + 1]];
    let run_edges = |r: usize| &edges[estart[r]..estart[r + 1]];
    let mut seen = vec![usize::MAX; map.vertex_count()];
    for r in 0..runs {
        for &v in run_verts(r) {
            if seen[v as usize] == r {
                return false;
            }
            seen[v as usize] = r;
        }
    }
    let by_vertex = Incidence::new(map.vertex_count(), runs, run_verts);
    let by_edge = Incidence::new(n, runs, run_edges);
    let mut stamp = vec![usize::MAX; runs];
    let mut shared = vec![(0u32, 0u32); runs];
    let mut touched = Vec::new();
    for a in 0..runs {
        touched.clear();
        for &v in run_verts(a) {
            for &b in by_vertex.runs(v) {
                let b = b as usize;
                if b <= a {
                    continue;
                }
                if stamp[b] != a {
                    stamp[b] = a;
                    shared[b] = (0, 0);
                    touched.push(b);
                }
                shared[b].0 += 1;
            }
        }
        for &e in run_edges(a) {
            for &b in by_edge.runs(e) {
                if b as usize > a {
                    shared[b as usize].1 += 1;
                }
            }
        }
        if touched.iter().any(|&b| shared[b] != (1, 0) && shared[b] != (2, 1)) {
            return false;
        }
    }
    true
}

/// Runs through each item, in increasing run order.
struct Incidence {
    start: Vec<usize>,
    runs: Vec<u32>,
}

impl Incidence {
    fn new<'a>(items: usize, run_count: usize, members: impl Fn(usize) -> &'a [u32]) -> Self {
        let mut start = vec![0usize; items + 1];
        for r in 0..run_count {
            for &x in members(r) {
                start[x as usize + 1] += 1;
            }
        }
        for i in 0..items {
            start[i + 1] += start[i];
        }
        let mut fill = start.clone();
        let mut runs = vec![0u32; start[items]];
        for r in 0..run_count {
            for &x in members(r) {
                runs[fill[x as usize]] = r as u32;
                fill[x as usize] += 1;
            }
        }
        Incidence { start, runs }
    }

    fn runs(&self, item: u32) -> &[u32] {
        &self.runs[self.start[item as usize]..self.start[item as usize + 1]]
    }
}

impl DecoratedScheme {
    pub fn dual_is_dissection(&self) -> bool {
        is_dual_of_dissection(&self.assemble())
    }
}

/// `E[X^r] = (γ/ρ)^r Γ((r+1−3χ)/2) / Γ((1−3χ)/2)`.
pub fn theoretical_moment(r: u32, surface: &Surface, consts: &CharConstants) -> f64 {
    let k = -surface.chi();
    assert!(k >= 0, "surfaces with positive Euler characteristic have no limit law");
    let ratio = gamma_half(r + 1 + 3 * k as u32).ratio_f64(&gamma_half(1 + 3 * k as u32));
    (consts.gamma / consts.rho).powi(r as i32) * ratio
}

/// `g_k(t) = 2 t^{3k} e^{−t²} / Γ((1+3k)/2)` for `t ≥ 0`.
pub fn density_gk(k: u32, t: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    2.0 * t.powi(3 * k as i32) * (-t * t).exp() / gamma_half(1 + 3 * k).to_f64()
}

/// `∫_0^∞ t^r g_k(t) dt` by double-exponential quadrature.
pub fn density_moment(k: u32, r: u32) -> f64 {
    let f = |t: f64| t.powi(r as i32) * density_gk(k, t);
    quadrature::double_exponential::integrate(f, 0.0, 40.0, 1e-14).integral
}

/// `R^r m_r / r!` with `R = ρ/(2γ)`, for `r = 0..=r_max`.
pub fn moment_decay(surface: &Surface, consts: &CharConstants, r_max: u32) -> Vec<f64> {
    let big_r = consts.rho / (2.0 * consts.gamma);
    let mut fact = 1.0f64;
    (0..=r_max)
        .map(|r| {
            if r > 0 {
                fact *= r as f64;
            }
            big_r.powi(r as i32) * theoretical_moment(r, surface, consts) / fact
        })
        .collect()
}

/// Per-sample outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SampleRecord {
    pub index: u64,
    pub structuring_edges: usize,
    /// `None` when the run check was skipped.
    pub is_dissection: Option<bool>,
    pub all_balanced: bool,
}

/// Draws samples `0..count` of the seeded sequence on `threads` workers;
/// the records do not depend on the thread count.
pub fn sample_records(
    tables: &CountTables,
    seed: u64,
    count: u64,
    threads: usize,
    check_dissection: bool,
) -> Vec<SampleRecord> {
    let threads = threads.max(1).min(count.max(1) as usize);
    let one = |index: u64| {
        let d = sample_uniform(tables, seed, index);
        SampleRecord {
            index,
            structuring_edges: d.structuring_edges(),
            is_dissection: check_dissection.then(|| d.dual_is_dissection()),
            all_balanced: d.all_balanced(),
        }
    };
    let mut out: Vec<SampleRecord> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|w| {
                std::thread::Builder::new()
                    .stack_size(256 << 20)
                    .spawn_scoped(scope, move || {
                        (w as u64..count).step_by(threads).map(one).collect::<Vec<_>>()
                    })
                    .expect("spawn sampler thread")
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("sampler thread")).collect()
    });
    out.sort_by_key(|r| r.index);
    out
}

/// Pairwise summation in index order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n => pairwise_sum(&xs[..n / 2]) + pairwise_sum(&xs[n / 2..]),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentReport {
    pub order: u32,
    pub empirical: f64,
    pub theoretical: f64,
    pub sample_count: usize,
    pub standard_error: f64,
}

impl MomentReport {
    pub fn relative_error(&self) -> f64 {
        (self.empirical - self.theoretical).abs() / self.theoretical
    }
}

/// Empirical moments of `U/√n` for `r = 0..=r_max`.
pub fn empirical_moments(
    records: &[SampleRecord],
    n: usize,
    r_max: u32,
    surface: &Surface,
    consts: &CharConstants,
) -> Vec<MomentReport> {
    let scale = (n as f64).sqrt();
    let xs: Vec<f64> = records.iter().map(|r| r.structuring_edges as f64 / scale).collect();
    let count = xs.len();
    (0..=r_max)
        .map(|r| {
            let powers: Vec<f64> = xs.iter().map(|x| x.powi(r as i32)).collect();
            let mean = pairwise_sum(&powers) / count as f64;
            let dev: Vec<f64> = powers.iter().map(|p| (p - mean) * (p - mean)).collect();
            let var = if count > 1 { pairwise_sum(&dev) / (count - 1) as f64 } else { 0.0 };
            MomentReport {
                order: r,
                empirical: mean,
                theoretical: theoretical_moment(r, surface, consts),
                sample_count: count,
                standard_error: (var / count as f64).sqrt(),
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitReport {
    pub surface: Surface,
    pub degrees: Vec<u32>,
    pub n: usize,
    pub samples: u64,
    pub seed: u64,
    pub moments: Vec<MomentReport>,
    /// Fraction of samples that are not duals of dissections.
    pub non_dissection_fraction: f64,
    pub all_balanced_fraction: f64,
    /// Samples with all edge-trees balanced whose dual is not a dissection.
    pub balanced_violations: u64,
}

pub fn limit_check(
    surface: &Surface,
    delta: &DegreeSet,
    n: usize,
    samples: u64,
    r_max: u32,
    seed: u64,
    threads: usize,
) -> Result<LimitReport, SamplerError> {
    let consts = solve_characteristic(delta, 1e-13)?;
    let tables = CountTables::build(surface, delta, n)?;
    let records = sample_records(&tables, seed, samples, threads, true);
    Ok(limit_report(&tables, &records, r_max, seed, &consts))
}

pub fn limit_report(
    tables: &CountTables,
    records: &[SampleRecord],
    r_max: u32,
    seed: u64,
    consts: &CharConstants,
) -> LimitReport {
    let count = records.len().max(1) as f64;
    let failures = records.iter().filter(|r| r.is_dissection == Some(false)).count();
    let balanced = records.iter().filter(|r| r.all_balanced).count();
    let violations = records.iter().filter(|r| r.all_balanced && r.is_dissection == Some(false)).count();
    LimitReport {
        surface: tables.surface,
        degrees: tables.delta.degrees().to_vec(),
        n: tables.n,
        samples: records.len() as u64,
        seed,
        moments: empirical_moments(records, tables.n, r_max, &tables.surface, consts),
        non_dissection_fraction: failures as f64 / count,
        all_balanced_fraction: balanced as f64 / count,
        balanced_violations: violations as u64,
    }
}

/// Exact `E[U^r]` at finite `n` for `r = 0..=r_max`, from the bivariate
/// series: with `u = 1 + ε`, the edge-tree series becomes
/// `(1+ε) D Σ_s (ε T_1 D)^s`.
pub fn exact_moments(tables: &CountTables, r_max: usize) -> Vec<f64> {
    let size = tables.size;
    let d = IntSeries::from_coeffs(tables.d.exact.clone());
    let t1d = IntSeries::from_coeffs(tables.t1.exact.clone()).mul(&d);
    // eps[s] = [ε^s] (1+ε) D Σ (ε T1 D)^j
    let mut geo = vec![d.clone()];
    for s in 1..=r_max {
        geo.push(geo[s - 1].mul(&t1d));
    }
    let eps: Vec<IntSeries> = (0..=r_max).map(|s| if s == 0 { geo[0].clone() } else { geo[s].add(&geo[s - 1]) }).collect();
    let mut factorial = vec![BigInt::zero(); r_max + 1];
    for scheme in &tables.schemes {
        let (sig, _) = &tables.suffix[scheme.signature];
        // fixed part: root edge tree and leg-trees
        let mut fixed = d.clone();
        for s in &sig[scheme.edge_ends.len()..] {
            if let Slot::Legs(l) = s {
                fixed = fixed.mul(&IntSeries::from_coeffs(tables.legs[l].exact.clone()));
            }
        }
        let mut poly: Vec<IntSeries> = vec![IntSeries::one(size)];
        poly.resize(r_max + 1, IntSeries::zero(size));
        for _ in 1..scheme.edge_ends.len() {
            let mut next = vec![IntSeries::zero(size); r_max + 1];
            for (i, a) in poly.iter().enumerate() {
                for (j, b) in eps.iter().enumerate().take(r_max + 1 - i) {
                    next[i + j] = next[i + j].add(&a.mul(b));
                }
            }
            poly = next;
        }
        for (r, p) in poly.iter().enumerate() {
            factorial[r] += p.mul(&fixed).coeff(size);
        }
    }
    // [ε^r] = E[C(U, r)] · total; convert to raw moments via Stirling numbers
    let falling: Vec<f64> = factorial
        .iter()
        .enumerate()
        .map(|(r, c)| {
            let fact: f64 = (1..=r).map(|i| i as f64).product();
            let ratio = if c.is_zero() { 0.0 } else { (ln_bigint(c) - tables.ln_total).exp() };
            ratio * fact
        })
        .collect();
    let mut stirling = vec![vec![0.0f64; r_max + 1]; r_max + 1];
    stirling[0][0] = 1.0;
    for r in 1..=r_max {
        for k in 1..=r {
            stirling[r][k] = k as f64 * stirling[r - 1][k] + stirling[r - 1][k - 1];
        }
    }
    (0..=r_max).map(|r| (0..=r).map(|k| stirling[r][k] * falling[k]).sum()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(x: &[u32]) -> DegreeSet {
        DegreeSet::new(x).unwrap()
    }

    fn bare_edge() -> PlaneTree {
        let mut t = PlaneTree::new();
        let m = t.add_leaf(LeafTag::Marked);
        t.set_root(m);
        t
    }

    /// Spine of `sides.len()` cubic vertices; `true` puts the leaf left.
    fn caterpillar(sides: &[bool]) -> PlaneTree {
        let mut t = PlaneTree::new();
        let mut cur = t.add_leaf(LeafTag::Marked);
        for &left in sides.iter().rev() {
            let leaf = t.add_leaf(LeafTag::Plain);
            cur = if left { t.add_internal(&[leaf, cur]) } else { t.add_internal(&[cur, leaf]) };
        }
        t.set_root(cur);
        t
    }

    #[test]
    fn balance_examples() {
        assert!(is_one_sided(&bare_edge()));
        assert!(!is_balanced(&bare_edge()));
        assert!(!is_balanced(&caterpillar(&[true; 10])));
        assert!(is_one_sided(&caterpillar(&[true; 10])));
        assert!(is_balanced(&caterpillar(&[true, false, true, false, true, false, true, false])));
        assert!(!is_balanced(&caterpillar(&[true, false, true, false, true, false, true])));
    }

    #[test]
    fn greedy_matches_all_cut_triples() {
        for mask in 0u32..(1 << 10) {
            let sides: Vec<bool> = (0..10).map(|i| mask >> i & 1 == 1).collect();
            let t = caterpillar(&sides);
            let two_sided = |a: usize, b: usize| {
                let s = &sides[a..b];
                s.iter().any(|&x| x) && s.iter().any(|&x| !x)
            };
            let mut brute = false;
            for c1 in 0..=10 {
                for c2 in c1 + 1..=10 {
                    for c3 in c2 + 1..=10 {
                        if two_sided(0, c1) && two_sided(c1, c2) && two_sided(c2, c3) && two_sided(c3, 10) {
                            brute = true;
                        }
                    }
                }
            }
            assert_eq!(is_balanced(&t), brute, "{sides:?}");
        }
    }

    #[test]
    fn subsets_unrank_in_order() {
        let all: Vec<Vec<usize>> = (0..10).map(|r| unrank_subset(5, 2, r)).collect();
        assert_eq!(all[0], vec![0, 1]);
        assert_eq!(all[9], vec![3, 4]);
        let mut sorted = all.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 10);
    }

    #[test]
    fn tables_match_exact_counts() {
        use crate::asymptotics_enum::map_series;
        for (s, delta) in [(Surface::cylinder(), d(&[3])), (Surface::orientable(1, 1), d(&[3, 4]))] {
            let a = map_series(&s, &delta, 30).unwrap();
            for n in (1..=30).filter(|n| !a.coeff(*n).is_zero()) {
                assert_eq!(CountTables::build(&s, &delta, n).unwrap().total(), &a.coeff(n), "{s} n={n}");
            }
        }
        assert!(matches!(
            CountTables::build(&Surface::moebius(), &d(&[4]), 3),
            Err(SamplerError::EmptyClass { .. })
        ));
        assert_eq!(CountTables::build(&Surface::disc(), &d(&[3]), 4).unwrap_err(), SamplerError::Disc);
    }

    #[test]
    fn samples_have_the_requested_size_and_are_reproducible() {
        let t = CountTables::build(&Surface::cylinder(), &d(&[3]), 40).unwrap();
        for i in 0..20 {
            let a = sample_uniform(&t, 7, i);
            assert_eq!(a.leaf_count(), 40);
            assert_eq!(a, sample_uniform(&t, 7, i));
            let m = a.assemble();
            assert_eq!(m.surface(), Some(Surface::cylinder()));
            assert_eq!(m.degrees().iter().filter(|&&x| x == 1).count(), 40);
        }
    }

    #[test]
    fn hand_built_cylinder_decoration() {
        // the cylinder scheme: root leaf, a cubic vertex carrying a loop
        let t = CountTables::build(&Surface::cylinder(), &d(&[3]), 1).unwrap();
        let mut x = sample_uniform(&t, 0, 0);
        assert_eq!(x.edge_ends.len(), 2);
        x.edge_trees = vec![caterpillar(&[true]), caterpillar(&[true, false, false])];
        assert_eq!(x.leaf_count(), 5);
        assert_eq!(x.structuring_edges(), 4);
        let m = x.assemble();
        assert_eq!(m.surface(), Some(Surface::cylinder()));
        assert_eq!(m.vertex_count(), 1 + 1 + 4 + 4);
    }

    #[test]
    fn bare_trees_give_scheme_edge_count() {
        let t = CountTables::build(&Surface::cylinder(), &d(&[3]), 1).unwrap();
        let s = sample_uniform(&t, 1, 0);
        assert_eq!(s.structuring_edges(), s.edge_ends.len() - 1);
    }

    #[test]
    fn exhaustive_enumeration_is_the_census() {
        use crate::maps::census;
        use std::collections::BTreeSet;
        for (s, delta, n) in [
            (Surface::cylinder(), d(&[3]), 5),
            (Surface::moebius(), d(&[3]), 4),
            (Surface::orientable(1, 1), d(&[3]), 4),
            (Surface::cylinder(), d(&[3, 4]), 4),
            (Surface::moebius(), d(&[4]), 4),
        ] {
            let t = CountTables::build(&s, &delta, n).unwrap();
            let mut seen = BTreeSet::new();
            enumerate_all(&t, |x| {
                assert_eq!(x.leaf_count(), n);
                assert!(seen.insert(x.assemble().canonical()), "duplicate map");
            });
            let want: BTreeSet<_> = census(&s, delta.degrees(), n).into_iter().collect();
            assert_eq!(seen, want, "{s} {delta} n={n}");
        }
    }

    #[test]
    fn tree_with_no_cycle_passes_runs() {
        let star = CombinatorialMap::from_blocks(&[1, 3, 1, 1], vec![1, 0, 4, 5, 2, 3], vec![false; 6]).unwrap();
        assert!(is_dual_of_dissection(&star));
    }

    #[test]
    fn doubled_run_vertex_fails() {
        // two cubic vertices joined by a double edge, one leaf on each: each
        // face has a single leaf, so its run returns to its start
        let m = CombinatorialMap::from_blocks(&[1, 3, 3, 1], vec![1, 0, 4, 5, 2, 3, 7, 6], vec![false; 8]).unwrap();
        assert_eq!(m.surface(), Some(Surface::cylinder()));
        assert!(!is_dual_of_dissection(&m));
    }

    #[test]
    fn loop_with_leafless_side_fails() {
        // root leaf on a cubic vertex with a bare loop: one face has no leaf
        let m = CombinatorialMap::from_blocks(&[1, 3], vec![1, 0, 3, 2], vec![false; 4]).unwrap();
        assert!(!is_dual_of_dissection(&m));
    }


    #[test]
    fn moment_formulas() {
        let c = solve_characteristic(&d(&[3]), 1e-13).unwrap();
        let cyl = Surface::cylinder();
        assert!((theoretical_moment(0, &cyl, &c) - 1.0).abs() < 1e-15);
        assert!((theoretical_moment(1, &cyl, &c) - 2.0 / std::f64::consts::PI.sqrt()).abs() < 1e-12);
        assert!((theoretical_moment(2, &cyl, &c) - 2.0).abs() < 1e-12);
        assert!((theoretical_moment(3, &cyl, &c) - 8.0 / std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn density_moments_match() {
        for k in 0..=3u32 {
            for r in 0..=6u32 {
                let want = gamma_half(r + 1 + 3 * k).ratio_f64(&gamma_half(1 + 3 * k));
                let got = density_moment(k, r);
                assert!((got - want).abs() <= 1e-8 * want, "k={k} r={r}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn decay_is_monotone() {
        let c = solve_characteristic(&d(&[3]), 1e-13).unwrap();
        let v = moment_decay(&Surface::orientable(1, 1), &c, 40);
        for w in v.windows(2).skip(1) {
            assert!(w[1] < w[0]);
        }
        assert!(v[40] < 1e-6);
    }

    #[test]
    fn exact_moments_small_case() {
        // cylinder n = 2: four maps, two with a one-vertex spine on the loop
        let t = CountTables::build(&Surface::cylinder(), &d(&[3]), 2).unwrap();
        let m = exact_moments(&t, 2);
        let mut sum = [0.0; 3];
        enumerate_all(&t, |x| {
            let u = x.structuring_edges() as f64;
            sum[0] += 1.0;
            sum[1] += u;
            sum[2] += u * u;
        });
        for r in 0..3 {
            assert!((m[r] - sum[r] / sum[0]).abs() < 1e-12, "r={r}");
        }
    }
}
