//! Coupling graphs for the three model families: odd rings, open square
//! grids and random high-coordination graphs.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng;

/// Uniform longitudinal field placed on every site by the family constructors.
pub const DEFAULT_FIELD: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sublattice {
    A,
    B,
}

impl Sublattice {
    /// Staggered sign: `+1` on A, `-1` on B.
    pub fn sign(self) -> i8 {
        match self {
            Sublattice::A => 1,
            Sublattice::B => -1,
        }
    }
}

/// Real-space embedding, present only for rings and grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Geometry {
    /// Site `i` sits at position `i` on a periodic chain.
    Ring { n: usize },
    /// Site `iy * lx + ix` sits at `(ix, iy)`.
    Grid { lx: usize, ly: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub coupling: f64,
}

impl Edge {
    pub fn new(i: usize, j: usize, coupling: f64) -> Self {
        Edge { i, j, coupling }
    }

    fn key(&self) -> (usize, usize) {
        (self.i.min(self.j), self.i.max(self.j))
    }
}

/// Undirected Ising coupling graph with per-edge couplings and per-site fields.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinLattice {
    n_sites: usize,
    edges: Vec<Edge>,
    fields: Vec<f64>,
    bipartition: Option<Vec<Sublattice>>,
    geometry: Option<Geometry>,
    offsets: Vec<usize>,
    neighbors: Vec<(usize, f64)>,
}

impl SpinLattice {
    /// Validated lattice from raw parts. Fails on self-loops, duplicate
    /// undirected edges and out-of-range indices.
    pub fn new(n_sites: usize, edges: Vec<Edge>, fields: Vec<f64>) -> Result<Self> {
        if fields.len() != n_sites {
            return Err(Error::SiteOutOfRange {
                index: fields.len(),
                n_sites,
            });
        }
        let mut seen = BTreeSet::new();
        for e in &edges {
            for index in [e.i, e.j] {
                if index >= n_sites {
                    return Err(Error::SiteOutOfRange { index, n_sites });
                }
            }
            if e.i == e.j {
                return Err(Error::SelfLoop(e.i, e.j));
            }
            if !seen.insert(e.key()) {
                return Err(Error::DuplicateEdge(e.i, e.j));
            }
        }
        let (offsets, neighbors) = build_adjacency(n_sites, &edges);
        Ok(SpinLattice {
            n_sites,
            edges,
            fields,
            bipartition: None,
            geometry: None,
            offsets,
            neighbors,
        })
    }

    /// Attach sublattice labels; every edge must join A to B.
    pub fn with_bipartition(mut self, labels: Vec<Sublattice>) -> Result<Self> {
        if labels.len() != self.n_sites {
            return Err(Error::SiteOutOfRange {
                index: labels.len(),
                n_sites: self.n_sites,
            });
        }
        if let Some(e) = self.edges.iter().find(|e| labels[e.i] == labels[e.j]) {
            return Err(Error::NotBipartite(e.i, e.j));
        }
        self.bipartition = Some(labels);
        Ok(self)
    }

    /// Attach a geometry after checking its site count.
    pub fn with_geometry(mut self, geometry: Geometry) -> Result<Self> {
        let expected = match geometry {
            Geometry::Ring { n } => n,
            Geometry::Grid { lx, ly } => lx * ly,
        };
        if expected != self.n_sites {
            return Err(Error::SiteOutOfRange {
                index: expected,
                n_sites: self.n_sites,
            });
        }
        self.geometry = Some(geometry);
        Ok(self)
    }

    /// Label sites by a two-colouring if the graph admits one. In every
    /// connected component the lowest-indexed site is placed on A.
    pub fn infer_bipartition(self) -> Self {
        match two_colouring(self.n_sites, &self.offsets, &self.neighbors) {
            Some(labels) => {
                let mut out = self;
                out.bipartition = Some(labels);
                out
            }
            None => self,
        }
    }

    pub fn with_uniform_field(mut self, h: f64) -> Self {
        self.fields.iter_mut().for_each(|f| *f = h);
        self
    }

    /// Copy with Gaussian static offsets on every coupling and field.
    pub fn with_static_disorder(&self, sigma_j: f64, sigma_h: f64, seed: u64) -> Self {
        let mut out = self.clone();
        if sigma_j <= 0.0 && sigma_h <= 0.0 {
            return out;
        }
        let mut rng = rng::stream(seed, rng::domain::DISORDER, 0, 0);
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        for e in &mut out.edges {
            e.coupling += sigma_j * unit.sample(&mut rng);
        }
        for f in &mut out.fields {
            *f += sigma_h * unit.sample(&mut rng);
        }
        let (offsets, neighbors) = build_adjacency(out.n_sites, &out.edges);
        out.offsets = offsets;
        out.neighbors = neighbors;
        out
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    pub fn bipartition(&self) -> Option<&[Sublattice]> {
        self.bipartition.as_deref()
    }

    pub fn geometry(&self) -> Option<Geometry> {
        self.geometry
    }

    /// Stable 64-bit digest of sites, couplings and fields.
    pub fn fingerprint(&self) -> u64 {
        let mut parts = Vec::with_capacity(1 + 3 * self.edges.len() + self.n_sites);
        parts.push(self.n_sites as u64);
        for e in &self.edges {
            parts.extend([e.i as u64, e.j as u64, e.coupling.to_bits()]);
        }
        parts.extend(self.fields.iter().map(|f| f.to_bits()));
        rng::mix(&parts)
    }

    /// `(neighbor, coupling)` pairs of site `i`.
    #[inline]
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    /// Grid coordinates `(ix, iy)` of site `i`.
    pub fn grid_coords(&self, i: usize) -> Option<(usize, usize)> {
        match self.geometry {
            Some(Geometry::Grid { lx, .. }) => Some((i % lx, i / lx)),
            _ => None,
        }
    }

    pub fn is_ring(&self) -> bool {
        matches!(self.geometry, Some(Geometry::Ring { .. }))
    }

    pub fn is_connected(&self) -> bool {
        if self.n_sites == 0 {
            return true;
        }
        let mut seen = vec![false; self.n_sites];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &(v, _) in self.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.n_sites
    }

    /// Classical energy `sum_ij J_ij s_i s_j - field * sum_i h_i s_i`.
    pub fn classical_energy(&self, spins: &[i8], field_scale: f64) -> f64 {
        let bond: f64 = self
            .edges
            .iter()
            .map(|e| e.coupling * f64::from(spins[e.i] * spins[e.j]))
            .sum();
        let zeeman: f64 = self
            .fields
            .iter()
            .zip(spins)
            .map(|(h, &s)| h * f64::from(s))
            .sum();
        bond - field_scale * zeeman
    }

    /// Edge-wise structural equality ignoring edge order and orientation.
    pub fn same_graph(&self, other: &SpinLattice) -> bool {
        if self.n_sites != other.n_sites || self.edges.len() != other.edges.len() {
            return false;
        }
        let canon = |l: &SpinLattice| {
            let mut v: Vec<(usize, usize, u64)> = l
                .edges
                .iter()
                .map(|e| {
                    let (a, b) = e.key();
                    (a, b, e.coupling.to_bits())
                })
                .collect();
            v.sort_unstable();
            v
        };
        canon(self) == canon(other) && self.fields == other.fields
    }
}

fn build_adjacency(n_sites: usize, edges: &[Edge]) -> (Vec<usize>, Vec<(usize, f64)>) {
    let mut degree = vec![0usize; n_sites];
    for e in edges {
        degree[e.i] += 1;
        degree[e.j] += 1;
    }
    let mut offsets = Vec::with_capacity(n_sites + 1);
    offsets.push(0);
    for d in &degree {
        offsets.push(offsets.last().unwrap() + d);
    }
    let mut fill = offsets.clone();
    let mut neighbors = vec![(0usize, 0.0f64); offsets[n_sites]];
    for e in edges {
        neighbors[fill[e.i]] = (e.j, e.coupling);
        fill[e.i] += 1;
        neighbors[fill[e.j]] = (e.i, e.coupling);
        fill[e.j] += 1;
    }
    (offsets, neighbors)
}

fn two_colouring(
    n_sites: usize,
    offsets: &[usize],
    neighbors: &[(usize, f64)],
) -> Option<Vec<Sublattice>> {
    let mut colour: Vec<Option<Sublattice>> = vec![None; n_sites];
    let mut queue = VecDeque::new();
    for start in 0..n_sites {
        if colour[start].is_some() {
            continue;
        }
        colour[start] = Some(Sublattice::A);
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            let cu = colour[u]?;
            let other = match cu {
                Sublattice::A => Sublattice::B,
                Sublattice::B => Sublattice::A,
            };
            for &(v, _) in &neighbors[offsets[u]..offsets[u + 1]] {
                match colour[v] {
                    None => {
                        colour[v] = Some(other);
                        queue.push_back(v);
                    }
                    Some(cv) if cv == cu => return None,
                    Some(_) => {}
                }
            }
        }
    }
    colour.into_iter().collect()
}

/// Periodic antiferromagnetic ring with an odd number of sites.
pub fn make_odd_ring(n: usize, coupling: f64) -> Result<SpinLattice> {
    if n < 3 || n % 2 == 0 {
        return Err(Error::RingSize(n));
    }
    make_ring(n, coupling)
}

/// Periodic ring of any size `n >= 3`. Even rings are bipartite but are
/// left unlabelled, matching the odd-ring family.
pub fn make_ring(n: usize, coupling: f64) -> Result<SpinLattice> {
    if n < 3 {
        return Err(Error::RingSize(n));
    }
    let edges = (0..n).map(|i| Edge::new(i, (i + 1) % n, coupling)).collect();
    SpinLattice::new(n, edges, vec![DEFAULT_FIELD; n])?.with_geometry(Geometry::Ring { n })
}

/// `lx` by `ly` square grid with open boundaries, checkerboard bipartition
/// with `(0, 0)` on sublattice A.
pub fn make_open_grid(lx: usize, ly: usize, coupling: f64) -> Result<SpinLattice> {
    if lx < 2 || ly < 2 {
        return Err(Error::GridSize { lx, ly });
    }
    let idx = |x: usize, y: usize| y * lx + x;
    let mut edges = Vec::with_capacity(2 * lx * ly - lx - ly);
    for y in 0..ly {
        for x in 0..lx {
            if x + 1 < lx {
                edges.push(Edge::new(idx(x, y), idx(x + 1, y), coupling));
            }
            if y + 1 < ly {
                edges.push(Edge::new(idx(x, y), idx(x, y + 1), coupling));
            }
        }
    }
    let labels = (0..lx * ly)
        .map(|i| {
            if (i % lx + i / lx) % 2 == 0 {
                Sublattice::A
            } else {
                Sublattice::B
            }
        })
        .collect();
    SpinLattice::new(lx * ly, edges, vec![DEFAULT_FIELD; lx * ly])?
        .with_geometry(Geometry::Grid { lx, ly })?
        .with_bipartition(labels)
}

/// Seeded random connected `degree`-regular graph with unit antiferromagnetic
/// couplings.
///
/// Starts from a circulant regular graph and randomises it with
/// degree-preserving double-edge swaps until it is connected.
pub fn make_high_coordination(n: usize, degree: usize, seed: u64) -> Result<SpinLattice> {
    let infeasible = Error::InfeasibleRegular { n, degree };
    if degree < 3 || degree >= n || (n * degree) % 2 == 1 {
        return Err(infeasible);
    }
    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(n * degree / 2);
    for i in 0..n {
        for d in 1..=degree / 2 {
            pairs.push((i, (i + d) % n));
        }
    }
    if degree % 2 == 1 {
        for i in 0..n / 2 {
            pairs.push((i, i + n / 2));
        }
    }
    let mut present: BTreeSet<(usize, usize)> =
        pairs.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();

    let mut rng = rng::stream(seed, rng::domain::GRAPH, n as u64, degree as u64);
    let m = pairs.len();
    for _ in 0..64 {
        for _ in 0..10 * m {
            let x = rng.random_range(0..m);
            let y = rng.random_range(0..m);
            if x == y {
                continue;
            }
            let (a, b) = pairs[x];
            let (c, d) = if rng.random::<bool>() {
                pairs[y]
            } else {
                (pairs[y].1, pairs[y].0)
            };
            // (a,b),(c,d) -> (a,d),(c,b)
            if a == d || c == b {
                continue;
            }
            let e1 = (a.min(d), a.max(d));
            let e2 = (c.min(b), c.max(b));
            if e1 == e2 || present.contains(&e1) || present.contains(&e2) {
                continue;
            }
            present.remove(&(a.min(b), a.max(b)));
            present.remove(&(c.min(d), c.max(d)));
            present.insert(e1);
            present.insert(e2);
            pairs[x] = (a, d);
            pairs[y] = (c, b);
        }
        let edges = pairs
            .iter()
            .map(|&(a, b)| Edge::new(a.min(b), a.max(b), 1.0))
            .collect();
        let lattice = SpinLattice::new(n, edges, vec![DEFAULT_FIELD; n])?;
        if lattice.is_connected() {
            return Ok(lattice);
        }
    }
    Err(infeasible)
}

/// Number of bonds `(i, i+1)` on a periodic chain with equal spins.
pub fn ring_wall_count(spins: &[i8]) -> usize {
    let n = spins.len();
    (0..n).filter(|&i| spins[i] == spins[(i + 1) % n]).count()
}
