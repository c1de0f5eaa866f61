//! Rooted maps on closed surfaces as signed rotation systems, with face
//! tracing, canonical labeling, and exhaustive generation of leaf-rooted
//! maps by a canonical root-first construction.
//!
//! A map is stored on half-edges: each half-edge has a vertex, rotation
//! successor and predecessor, a mate (the other half of its edge) and the
//! twist bit of its edge. The root is half-edge `root`, taken on the side
//! given by the positive local orientation of its vertex.

use std::collections::VecDeque;

use serde::Serialize;
use thiserror::Error;

use crate::surface::Surface;

const NONE: u32 = u32::MAX;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MapError {
    #[error("half-edge {0} is missing from the rotations or listed twice")]
    BadRotation(u32),
    #[error("mate array is not a fixed-point-free involution at half-edge {0}")]
    BadMate(u32),
    #[error("twist bits differ on the two halves of the edge at half-edge {0}")]
    BadTwist(u32),
    #[error("map is not connected")]
    Disconnected,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CombinatorialMap {
    vert: Vec<u32>,
    next: Vec<u32>,
    prev: Vec<u32>,
    mate: Vec<u32>,
    twist: Vec<bool>,
    vertex_count: usize,
    root: u32,
}

/// Canonical labeling of a rooted map: vertex degrees in discovery order,
/// and the mate and relative twist of every half-edge, with half-edges of
/// each vertex numbered consecutively in rotation order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct CanonicalForm {
    pub degrees: Vec<u32>,
    pub mate: Vec<u32>,
    pub twist: Vec<bool>,
}

impl CanonicalForm {
    pub fn to_map(&self) -> CombinatorialMap {
        CombinatorialMap::from_blocks(&self.degrees, self.mate.clone(), self.twist.clone())
            .expect("canonical form is a valid map")
    }
}

impl CombinatorialMap {
    /// Builds a map from the cyclic rotation of half-edges at each vertex.
    pub fn from_rotations(
        rotations: &[Vec<u32>],
        mate: Vec<u32>,
        twist: Vec<bool>,
        root: u32,
    ) -> Result<Self, MapError> {
        let n = mate.len();
        let mut vert = vec![NONE; n];
        let mut next = vec![NONE; n];
        let mut prev = vec![NONE; n];
        for (v, rot) in rotations.iter().enumerate() {
            for (i, &h) in rot.iter().enumerate() {
                let hu = h as usize;
                if hu >= n || vert[hu] != NONE {
                    return Err(MapError::BadRotation(h));
                }
                vert[hu] = v as u32;
                let nx = rot[(i + 1) % rot.len()];
                next[hu] = nx;
                prev[nx as usize] = h;
            }
        }
        if let Some(h) = vert.iter().position(|&v| v == NONE) {
            return Err(MapError::BadRotation(h as u32));
        }
        Self::checked(vert, next, prev, mate, twist, rotations.len(), root)
    }

    /// Vertices are consecutive blocks of half-edges in rotation order; the
    /// root is half-edge 0.
    pub fn from_blocks(degrees: &[u32], mate: Vec<u32>, twist: Vec<bool>) -> Result<Self, MapError> {
        Self::from_blocks_rooted(degrees, mate, twist, 0)
    }

    /// [`Self::from_blocks`] with an arbitrary root half-edge.
    pub fn from_blocks_rooted(degrees: &[u32], mate: Vec<u32>, twist: Vec<bool>, root: u32) -> Result<Self, MapError> {
        let n = mate.len();
        let mut vert = Vec::with_capacity(n);
        let mut next = Vec::with_capacity(n);
        let mut prev = Vec::with_capacity(n);
        let mut start = 0u32;
        for (v, &d) in degrees.iter().enumerate() {
            for i in 0..d {
                vert.push(v as u32);
                next.push(start + (i + 1) % d);
                prev.push(start + (i + d - 1) % d);
            }
            start += d;
        }
        if start as usize != n {
            return Err(MapError::BadRotation(start.min(n as u32)));
        }
        Self::checked(vert, next, prev, mate, twist, degrees.len(), root)
    }

    fn checked(
        vert: Vec<u32>,
        next: Vec<u32>,
        prev: Vec<u32>,
        mate: Vec<u32>,
        twist: Vec<bool>,
        vertex_count: usize,
        root: u32,
    ) -> Result<Self, MapError> {
        let n = mate.len();
        for h in 0..n {
            let m = mate[h] as usize;
            if m >= n || m == h || mate[m] as usize != h {
                return Err(MapError::BadMate(h as u32));
            }
            if twist.len() != n || twist[h] != twist[m] {
                return Err(MapError::BadTwist(h as u32));
            }
        }
        let map = CombinatorialMap { vert, next, prev, mate, twist, vertex_count, root };
        if !map.is_connected() {
            return Err(MapError::Disconnected);
        }
        Ok(map)
    }

    pub fn half_edge_count(&self) -> usize {
        self.mate.len()
    }

    pub fn edge_count(&self) -> usize {
        self.mate.len() / 2
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn root(&self) -> u32 {
        self.root
    }

    pub fn vertex_of(&self, h: u32) -> u32 {
        self.vert[h as usize]
    }

    pub fn next(&self, h: u32) -> u32 {
        self.next[h as usize]
    }

    pub fn prev(&self, h: u32) -> u32 {
        self.prev[h as usize]
    }

    pub fn mate(&self, h: u32) -> u32 {
        self.mate[h as usize]
    }

    pub fn twisted(&self, h: u32) -> bool {
        self.twist[h as usize]
    }

    /// Rotation step in direction `o` (false: successor, true: predecessor).
    pub fn rot(&self, h: u32, o: bool) -> u32 {
        if o {
            self.prev[h as usize]
        } else {
            self.next[h as usize]
        }
    }

    pub fn degrees(&self) -> Vec<u32> {
        let mut d = vec![0u32; self.vertex_count];
        for &v in &self.vert {
            d[v as usize] += 1;
        }
        d
    }

    fn is_connected(&self) -> bool {
        let n = self.mate.len();
        if n == 0 {
            return self.vertex_count <= 1;
        }
        let mut seen_vertex = vec![false; self.vertex_count];
        let mut stack = vec![0u32];
        seen_vertex[self.vert[0] as usize] = true;
        let mut reached = 1;
        while let Some(h0) = stack.pop() {
            let mut h = h0;
            loop {
                let w = self.vert[self.mate[h as usize] as usize] as usize;
                if !seen_vertex[w] {
                    seen_vertex[w] = true;
                    reached += 1;
                    stack.push(self.mate[h as usize]);
                }
                h = self.next[h as usize];
                if h == h0 {
                    break;
                }
            }
        }
        reached == self.vertex_count
    }

    /// One face-walk step on states `(h, o)`: cross the edge of `h`, flip the
    /// direction if it is twisted, then turn at the far vertex.
    pub fn face_step(&self, h: u32, o: bool) -> (u32, bool) {
        let o2 = o ^ self.twist[h as usize];
        (self.rot(self.mate[h as usize], o2), o2)
    }

    /// Orbits of [`Self::face_step`]. Every face appears twice, once per
    /// traversal direction.
    pub fn face_orbits(&self) -> Vec<Vec<(u32, bool)>> {
        let n = self.mate.len();
        let mut seen = vec![[false; 2]; n];
        let mut orbits = Vec::new();
        for o in [false, true] {
            for h in 0..n as u32 {
                if seen[h as usize][o as usize] {
                    continue;
                }
                let mut orbit = Vec::new();
                let (mut x, mut ox) = (h, o);
                while !seen[x as usize][ox as usize] {
                    seen[x as usize][ox as usize] = true;
                    orbit.push((x, ox));
                    (x, ox) = self.face_step(x, ox);
                }
                orbits.push(orbit);
            }
        }
        orbits
    }

    pub fn face_count(&self) -> usize {
        self.face_orbits().len() / 2
    }

    pub fn euler_char(&self) -> i64 {
        self.vertex_count as i64 - self.edge_count() as i64 + self.face_count() as i64
    }

    /// True if vertex orientations can be chosen so that no edge is twisted.
    pub fn is_orientable(&self) -> bool {
        let mut orient: Vec<Option<bool>> = vec![None; self.vertex_count];
        let mut by_vertex: Vec<Vec<u32>> = vec![Vec::new(); self.vertex_count];
        for h in 0..self.mate.len() {
            by_vertex[self.vert[h] as usize].push(h as u32);
        }
        for start in 0..self.vertex_count {
            if orient[start].is_some() {
                continue;
            }
            orient[start] = Some(false);
            let mut queue = VecDeque::from([start as u32]);
            while let Some(v) = queue.pop_front() {
                let ov = orient[v as usize].expect("assigned");
                for &h in &by_vertex[v as usize] {
                    let w = self.vert[self.mate[h as usize] as usize] as usize;
                    let want = ov ^ self.twist[h as usize];
                    match orient[w] {
                        None => {
                            orient[w] = Some(want);
                            queue.push_back(w as u32);
                        }
                        Some(ow) if ow != want => return false,
                        _ => {}
                    }
                }
            }
        }
        true
    }

    /// The closed surface of the map with one boundary per face.
    pub fn surface(&self) -> Option<Surface> {
        let faces = self.face_count() as u32;
        Surface::from_closed_chi(self.is_orientable(), self.euler_char(), faces)
    }

    /// Canonical labeling by a root-first traversal: half-edges are
    /// processed in label order; an unlabeled mate discovers its vertex,
    /// whose half-edges get the next labels starting at the entry, listed in
    /// the direction making the discovering edge untwisted.
    pub fn canonical(&self) -> CanonicalForm {
        let n = self.mate.len();
        let mut label = vec![NONE; n];
        let mut order: Vec<u32> = Vec::with_capacity(n);
        let mut vorient = vec![false; self.vertex_count];
        let mut degrees = Vec::with_capacity(self.vertex_count);
        let discover = |entry: u32, o: bool, order: &mut Vec<u32>, label: &mut Vec<u32>| {
            let mut h = entry;
            let mut d = 0;
            loop {
                label[h as usize] = order.len() as u32;
                order.push(h);
                d += 1;
                h = self.rot(h, o);
                if h == entry {
                    break;
                }
            }
            d
        };
        degrees.push(discover(self.root, false, &mut order, &mut label));
        let mut i = 0;
        while i < order.len() {
            let h = order[i];
            let m = self.mate[h as usize];
            if label[m as usize] == NONE {
                let o = vorient[self.vert[h as usize] as usize] ^ self.twist[h as usize];
                vorient[self.vert[m as usize] as usize] = o;
                degrees.push(discover(m, o, &mut order, &mut label));
            }
            i += 1;
        }
        let mut mate = vec![0u32; n];
        let mut twist = vec![false; n];
        for (l, &h) in order.iter().enumerate() {
            let m = self.mate[h as usize];
            mate[l] = label[m as usize];
            twist[l] = vorient[self.vert[h as usize] as usize]
                ^ vorient[self.vert[m as usize] as usize]
                ^ self.twist[h as usize];
        }
        CanonicalForm { degrees, mate, twist }
    }
}

/// Constraints for [`enumerate_leaf_rooted`]. The root is a leaf; totals
/// satisfy `leaves = 2 + excess − 2 back_edges`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnumParams {
    /// Allowed degrees of internal (non-leaf) vertices, each ≥ 3.
    pub degrees: Vec<u32>,
    /// Number of degree-1 vertices, root included.
    pub leaves: usize,
    /// `Σ (d − 2)` over internal vertices.
    pub excess: usize,
    /// Edges outside the discovery tree; equals `1 − χ(S)` for maps of `S`.
    pub back_edges: usize,
    pub orientable_only: bool,
}

impl EnumParams {
    /// Leaf-rooted maps on surfaces with `χ(S) = chi` having `n` leaves.
    pub fn for_maps(degrees: &[u32], chi: i64, n: usize) -> Option<Self> {
        let excess = n as i64 - 2 * chi;
        let back = 1 - chi;
        (excess >= 0 && back >= 0).then(|| EnumParams {
            degrees: degrees.to_vec(),
            leaves: n,
            excess: excess as usize,
            back_edges: back as usize,
            orientable_only: false,
        })
    }
}

struct Generator<'a, F: FnMut(&CombinatorialMap)> {
    params: &'a EnumParams,
    degrees: Vec<u32>,
    mate: Vec<u32>,
    twist: Vec<bool>,
    leaves: usize,
    excess: usize,
    back: usize,
    open: usize,
    visit: F,
}

impl<F: FnMut(&CombinatorialMap)> Generator<'_, F> {
    fn push_vertex(&mut self, from: usize, d: u32) {
        let start = self.mate.len();
        self.degrees.push(d);
        self.mate.extend(std::iter::repeat_n(NONE, d as usize));
        self.twist.extend(std::iter::repeat_n(false, d as usize));
        self.mate[from] = start as u32;
        self.mate[start] = from as u32;
        self.open = self.open + d as usize - 2;
    }

    fn pop_vertex(&mut self, from: usize) {
        let d = self.degrees.pop().expect("vertex to pop") as usize;
        let start = self.mate.len() - d;
        self.mate.truncate(start);
        self.twist.truncate(start);
        self.mate[from] = NONE;
        self.open = self.open + 2 - d;
    }

    fn run(&mut self, mut l: usize) {
        while l < self.mate.len() && self.mate[l] != NONE {
            l += 1;
        }
        let p = self.params;
        if l == self.mate.len() {
            if self.excess == p.excess && self.back == p.back_edges && self.leaves == p.leaves {
                let map = CombinatorialMap::from_blocks(&self.degrees, self.mate.clone(), self.twist.clone())
                    .expect("generated map is valid");
                (self.visit)(&map);
            }
            return;
        }
        if self.open > (p.leaves - self.leaves) + 2 * (p.back_edges - self.back) {
            return;
        }
        if self.leaves < p.leaves {
            self.leaves += 1;
            self.push_vertex(l, 1);
            self.run(l + 1);
            self.pop_vertex(l);
            self.leaves -= 1;
        }
        for &d in &p.degrees {
            let e = d as usize - 2;
            if self.excess + e > p.excess {
                continue;
            }
            self.excess += e;
            self.push_vertex(l, d);
            self.run(l + 1);
            self.pop_vertex(l);
            self.excess -= e;
        }
        if self.back < p.back_edges {
            let twists: &[bool] = if p.orientable_only { &[false] } else { &[false, true] };
            for m in l + 1..self.mate.len() {
                if self.mate[m] != NONE {
                    continue;
                }
                for &t in twists {
                    self.mate[l] = m as u32;
                    self.mate[m] = l as u32;
                    self.twist[l] = t;
                    self.twist[m] = t;
                    self.back += 1;
                    self.open -= 2;
                    self.run(l + 1);
                    self.open += 2;
                    self.back -= 1;
                    self.mate[l] = NONE;
                    self.mate[m] = NONE;
                    self.twist[l] = false;
                    self.twist[m] = false;
                }
            }
        }
    }
}

/// Visits every leaf-rooted map satisfying `params` exactly once, already
/// in canonical labeling.
pub fn enumerate_leaf_rooted<F: FnMut(&CombinatorialMap)>(params: &EnumParams, visit: F) {
    let mut g = Generator {
        params,
        degrees: vec![1],
        mate: vec![NONE],
        twist: vec![false],
        leaves: 1,
        excess: 0,
        back: 0,
        open: 1,
        visit,
    };
    if params.leaves >= 1 {
        g.run(0);
    }
}

/// Leaf-rooted maps of `surface` with `n` leaves whose internal degrees lie
/// in `degrees`.
pub fn census(surface: &Surface, degrees: &[u32], n: usize) -> Vec<CanonicalForm> {
    let mut out = Vec::new();
    let Some(mut params) = EnumParams::for_maps(degrees, surface.chi(), n) else {
        return out;
    };
    params.orientable_only = surface.orientable;
    enumerate_leaf_rooted(&params, |m| {
        if m.surface().as_ref() == Some(surface) {
            out.push(m.canonical());
        }
    });
    out
}

pub fn census_count(surface: &Surface, degrees: &[u32], n: usize) -> u64 {
    let mut count = 0u64;
    let Some(mut params) = EnumParams::for_maps(degrees, surface.chi(), n) else {
        return 0;
    };
    params.orientable_only = surface.orientable;
    enumerate_leaf_rooted(&params, |m| {
        if m.surface().as_ref() == Some(surface) {
            count += 1;
        }
    });
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Root leaf attached to a cubic vertex carrying a loop.
    fn loop_map(twisted: bool) -> CombinatorialMap {
        CombinatorialMap::from_blocks(&[1, 3], vec![1, 0, 3, 2], vec![false, false, twisted, twisted]).unwrap()
    }

    #[test]
    fn planar_loop_is_cylinder() {
        let m = loop_map(false);
        assert_eq!(m.face_count(), 2);
        assert_eq!(m.euler_char(), 2);
        assert_eq!(m.surface(), Some(Surface::cylinder()));
    }

    #[test]
    fn twisted_loop_is_moebius() {
        let m = loop_map(true);
        assert!(!m.is_orientable());
        assert_eq!(m.face_count(), 1);
        assert_eq!(m.surface(), Some(Surface::moebius()));
    }

    #[test]
    fn rejects_malformed() {
        assert_eq!(
            CombinatorialMap::from_blocks(&[1, 1], vec![0, 1], vec![false, false]),
            Err(MapError::BadMate(0))
        );
        assert!(CombinatorialMap::from_blocks(&[1, 1, 2], vec![1, 0, 3, 2], vec![false; 4]).is_err());
    }

    #[test]
    fn canonical_is_relabeling_invariant() {
        let m = loop_map(false);
        // same map with the cubic vertex listed first and its half-edges renamed
        let r = CombinatorialMap::from_rotations(&[vec![2, 1, 0], vec![3]], vec![1, 0, 3, 2], vec![false; 4], 3).unwrap();
        assert_eq!(r.canonical(), m.canonical());
    }

    #[test]
    fn generator_output_is_canonical() {
        let params = EnumParams::for_maps(&[3], -1, 3).unwrap();
        let mut seen = std::collections::HashSet::new();
        enumerate_leaf_rooted(&params, |m| {
            let c = m.canonical();
            assert_eq!(c.mate, m.mate);
            assert_eq!(c.twist, m.twist);
            assert!(seen.insert(c));
        });
        assert!(!seen.is_empty());
    }

    #[test]
    fn small_censuses() {
        // cylinder with binary internal vertices: 4^{n-1}
        for n in 1..=5 {
            assert_eq!(census_count(&Surface::cylinder(), &[3], n), 4u64.pow(n as u32 - 1));
        }
        assert_eq!(census_count(&Surface::moebius(), &[3], 3), 16);
        // disc triangulations: Catalan C(n-2)
        assert_eq!(census_count(&Surface::disc(), &[3], 6), 14);
    }
}
