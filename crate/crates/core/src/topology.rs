//! k-nearest-neighbor platoon graphs, reference-vehicle placements, and the
//! grounded Laplacian partition.
//!
//! Vehicle indices are 1-based everywhere in the public API. Laplacian blocks
//! are kept as exact integer matrices; callers convert to `f64` when they hand
//! them to a numerical routine.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The platoon graph P(n,k): vehicles `i` and `j` communicate iff
/// `0 < |i - j| <= k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlatoonTopology {
    n: usize,
    k: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl PlatoonTopology {
    /// Builds P(n,k). `k >= n - 1` is accepted and gives the complete graph.
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::param(format!("platoon needs n >= 2 vehicles, got {n}")));
        }
        if k < 1 {
            return Err(Error::param("connectivity index k must be >= 1"));
        }
        let edges = (1..=n)
            .flat_map(|i| (i + 1..=n.min(i.saturating_add(k))).map(move |j| (i, j)))
            .collect();
        Ok(Self { n, k, edges })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Unordered edges as `(i, j)` with `i < j`, 1-based.
    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.edges.contains(&(a, b))
    }

    /// Closed-form degree `min(i-1, k) + min(n-i, k)`.
    pub fn degree(&self, i: usize) -> usize {
        debug_assert!((1..=self.n).contains(&i));
        (i - 1).min(self.k) + (self.n - i).min(self.k)
    }

    pub fn degrees(&self) -> Vec<usize> {
        (1..=self.n).map(|i| self.degree(i)).collect()
    }

    /// Neighbors of vehicle `i`, ascending.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let lo = i.saturating_sub(self.k).max(1);
        let hi = (i + self.k).min(self.n);
        (lo..=hi).filter(move |&j| j != i)
    }

    /// Full n x n graph Laplacian `D - A`.
    pub fn laplacian(&self) -> DMatrix<i64> {
        let mut l = DMatrix::<i64>::zeros(self.n, self.n);
        for &(i, j) in &self.edges {
            let (a, b) = (i - 1, j - 1);
            l[(a, b)] -= 1;
            l[(b, a)] -= 1;
            l[(a, a)] += 1;
            l[(b, b)] += 1;
        }
        l
    }
}

/// Which vehicles act as references (grounded nodes). Both index lists are
/// sorted, disjoint, and together cover `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RefsRepr", into = "RefsRepr")]
pub struct ReferenceSet {
    n: usize,
    refs: Vec<usize>,
    followers: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RefsRepr {
    n: usize,
    refs: Vec<usize>,
}

impl TryFrom<RefsRepr> for ReferenceSet {
    type Error = Error;
    fn try_from(r: RefsRepr) -> Result<Self> {
        ReferenceSet::new(r.n, r.refs)
    }
}

impl From<ReferenceSet> for RefsRepr {
    fn from(r: ReferenceSet) -> Self {
        RefsRepr { n: r.n, refs: r.refs }
    }
}

impl ReferenceSet {
    /// Validates and normalizes an arbitrary list of 1-based indices.
    /// Duplicates are merged.
    pub fn new(n: usize, refs: impl IntoIterator<Item = usize>) -> Result<Self> {
        let set: BTreeSet<usize> = refs.into_iter().collect();
        if set.is_empty() {
            return Err(Error::param("reference set must be nonempty"));
        }
        if let Some(&bad) = set.iter().find(|&&r| r == 0 || r > n) {
            return Err(Error::param(format!(
                "reference index {bad} outside 1..={n}"
            )));
        }
        let followers = (1..=n).filter(|i| !set.contains(i)).collect();
        Ok(Self {
            n,
            refs: set.into_iter().collect(),
            followers,
        })
    }

    /// Minimally dense placement: split `1..=n` into consecutive segments of
    /// length `2k+1` (the last may be shorter) and put one reference at each
    /// segment's middle, `start + ceil(len/2) - 1`.
    pub fn minimally_dense(n: usize, k: usize) -> Result<Self> {
        if n < 1 || k < 1 {
            return Err(Error::param(format!("need n >= 1 and k >= 1, got n={n}, k={k}")));
        }
        let seg = 2 * k + 1;
        let refs = (1..=n).step_by(seg).map(|start| {
            let len = seg.min(n - start + 1);
            start + len.div_ceil(2) - 1
        });
        Self::new(n, refs)
    }

    pub fn single(n: usize, position: usize) -> Result<Self> {
        Self::new(n, [position])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn refs(&self) -> &[usize] {
        &self.refs
    }

    pub fn followers(&self) -> &[usize] {
        &self.followers
    }

    pub fn contains(&self, i: usize) -> bool {
        self.refs.binary_search(&i).is_ok()
    }

    /// Same set with `i` demoted to follower.
    pub fn without(&self, i: usize) -> Result<Self> {
        if !self.contains(i) {
            return Err(Error::param(format!("vehicle {i} is not a reference")));
        }
        Self::new(self.n, self.refs.iter().copied().filter(|&r| r != i))
    }

    /// Same set with `i` promoted to reference.
    pub fn with(&self, i: usize) -> Result<Self> {
        Self::new(self.n, self.refs.iter().copied().chain([i]))
    }
}

/// Number of references an MD placement uses, `ceil(n / (2k+1))`.
pub fn md_reference_count(n: usize, k: usize) -> usize {
    n.div_ceil(2 * k + 1)
}

/// Laplacian partitioned by follower/reference index:
/// `lg` is the follower-follower block, `l12` the follower-reference block.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundedSystem {
    n: usize,
    k: usize,
    refs: ReferenceSet,
    lg: DMatrix<i64>,
    l12: DMatrix<i64>,
    betas: Vec<usize>,
    boundary_size: usize,
    dmax_f: usize,
}

impl GroundedSystem {
    /// Removes the reference rows and columns from the Laplacian of `topology`.
    pub fn new(topology: &PlatoonTopology, refs: &ReferenceSet) -> Result<Self> {
        if refs.n() != topology.n() {
            return Err(Error::param(format!(
                "reference set built for n={} but topology has n={}",
                refs.n(),
                topology.n()
            )));
        }
        let f = refs.followers();
        let r = refs.refs();
        if f.is_empty() {
            return Err(Error::param(
                "every vehicle is a reference; no follower dynamics remain",
            ));
        }
        let l = topology.laplacian();
        let lg = DMatrix::from_fn(f.len(), f.len(), |a, b| l[(f[a] - 1, f[b] - 1)]);
        let l12 = DMatrix::from_fn(f.len(), r.len(), |a, b| l[(f[a] - 1, r[b] - 1)]);
        let betas: Vec<usize> = f
            .iter()
            .map(|&i| topology.neighbors(i).filter(|&j| refs.contains(j)).count())
            .collect();
        let boundary_size = topology
            .edges()
            .iter()
            .filter(|&&(i, j)| refs.contains(i) != refs.contains(j))
            .count();
        let dmax_f = f.iter().map(|&i| topology.degree(i)).max().unwrap_or(0);
        Ok(Self {
            n: topology.n(),
            k: topology.k(),
            refs: refs.clone(),
            lg,
            l12,
            betas,
            boundary_size,
            dmax_f,
        })
    }

    /// Convenience constructor for P(n,k) with the given references.
    pub fn from_parts(n: usize, k: usize, refs: impl IntoIterator<Item = usize>) -> Result<Self> {
        let topo = PlatoonTopology::new(n, k)?;
        let refs = ReferenceSet::new(n, refs)?;
        Self::new(&topo, &refs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn refs(&self) -> &ReferenceSet {
        &self.refs
    }

    pub fn follower_count(&self) -> usize {
        self.betas.len()
    }

    pub fn lg(&self) -> &DMatrix<i64> {
        &self.lg
    }

    pub fn l12(&self) -> &DMatrix<i64> {
        &self.l12
    }

    pub fn lg_f64(&self) -> DMatrix<f64> {
        self.lg.map(|v| v as f64)
    }

    pub fn l12_f64(&self) -> DMatrix<f64> {
        self.l12.map(|v| v as f64)
    }

    /// Per follower, the number of adjacent references.
    pub fn betas(&self) -> &[usize] {
        &self.betas
    }

    pub fn min_beta(&self) -> usize {
        self.betas.iter().copied().min().unwrap_or(0)
    }

    pub fn max_beta(&self) -> usize {
        self.betas.iter().copied().max().unwrap_or(0)
    }

    /// Number of edges with exactly one endpoint in the reference set.
    pub fn boundary_size(&self) -> usize {
        self.boundary_size
    }

    /// Largest degree (in the full graph) over followers.
    pub fn dmax_f(&self) -> usize {
        self.dmax_f
    }
}

/// The canonical scenario fragment `{ "n": .., "k": .., "refs": [..] }`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub n: usize,
    pub k: usize,
    pub refs: Vec<usize>,
}

impl Scenario {
    pub fn from_system(gs: &GroundedSystem) -> Self {
        Self {
            n: gs.n(),
            k: gs.k(),
            refs: gs.refs().refs().to_vec(),
        }
    }

    pub fn ground(&self) -> Result<GroundedSystem> {
        GroundedSystem::from_parts(self.n, self.k, self.refs.iter().copied())
    }
}
