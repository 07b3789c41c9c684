//! Pinching and corner conditional expectations and chains of them.
//!
//! A [`BlockPartition`] splits the coordinates `0..dim` into an optional
//! leading remainder followed by consecutive blocks. The associated
//! expectation keeps the diagonal blocks and zeroes everything else,
//! including the remainder block when the partition is a corner. The
//! subgroup `G_B` consists of the block-diagonal invertibles that act as the
//! identity on the remainder.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CprError, Result};
use crate::linalg::{
    frobenius, gaussian, herm_exp, identity, norm, random_hermitian, random_unitary, scaled_error, seeded_rng, CMatrix,
    HermBasis, Hermitian, Invertible, NormKind, SkewHermitian, Unitary, C64,
};
use crate::report::{MaxTracker, PropertyCheck};

/// Membership tolerance for `X in B`: `||X - E(X)||_F <= 1e-10 (1 + ||X||_F)`.
pub const MEMBERSHIP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PartitionDoc", into = "PartitionDoc")]
pub struct BlockPartition {
    dim: usize,
    blocks: Vec<usize>,
    corner: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PartitionDoc {
    dim: usize,
    blocks: Vec<usize>,
    corner: bool,
}

impl TryFrom<PartitionDoc> for BlockPartition {
    type Error = CprError;

    fn try_from(d: PartitionDoc) -> Result<Self> {
        BlockPartition::new(d.dim, d.blocks, d.corner)
    }
}

impl From<BlockPartition> for PartitionDoc {
    fn from(p: BlockPartition) -> Self {
        PartitionDoc {
            dim: p.dim,
            blocks: p.blocks,
            corner: p.corner,
        }
    }
}

impl BlockPartition {
    /// `corner` must be true exactly when the blocks do not cover `dim`.
    pub fn new(dim: usize, blocks: Vec<usize>, corner: bool) -> Result<Self> {
        if dim == 0 {
            return Err(CprError::InvalidPartition("dim must be positive".into()));
        }
        if blocks.is_empty() {
            return Err(CprError::InvalidPartition("no blocks".into()));
        }
        if let Some(k) = blocks.iter().position(|&b| b == 0) {
            return Err(CprError::InvalidPartition(format!("block {k} has size 0")));
        }
        let total: usize = blocks.iter().sum();
        if total > dim {
            return Err(CprError::InvalidPartition(format!("blocks sum to {total} > dim {dim}")));
        }
        if corner != (total < dim) {
            return Err(CprError::InvalidPartition(if corner {
                format!("corner flag set but blocks cover all of dim {dim}")
            } else {
                format!("blocks sum to {total} < dim {dim}; mark the partition as a corner")
            }));
        }
        Ok(Self { dim, blocks, corner })
    }

    /// Corner flag inferred from the block sum.
    pub fn inferred(dim: usize, blocks: Vec<usize>) -> Result<Self> {
        let corner = blocks.iter().sum::<usize>() < dim;
        Self::new(dim, blocks, corner)
    }

    /// One block covering everything; the expectation is the identity.
    pub fn total(dim: usize) -> Self {
        Self {
            dim,
            blocks: vec![dim],
            corner: false,
        }
    }

    pub fn diagonal(dim: usize) -> Self {
        Self {
            dim,
            blocks: vec![1; dim],
            corner: false,
        }
    }

    /// Parses `"b1,b2,..."` with an optional trailing `+` marking a corner.
    pub fn parse(spec: &str, dim: usize) -> Result<Self> {
        let mut corner = false;
        let mut blocks = Vec::new();
        let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
        for (k, part) in parts.iter().enumerate() {
            if *part == "+" && k + 1 == parts.len() {
                corner = true;
                continue;
            }
            let b = part
                .parse::<usize>()
                .map_err(|_| CprError::InvalidPartition(format!("entry {k} ('{part}') of '{spec}'")))?;
            blocks.push(b);
        }
        Self::new(dim, blocks, corner)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn is_corner(&self) -> bool {
        self.corner
    }

    pub fn remainder(&self) -> usize {
        self.dim - self.blocks.iter().sum::<usize>()
    }

    pub fn remainder_range(&self) -> Range<usize> {
        0..self.remainder()
    }

    pub fn ranges(&self) -> Vec<Range<usize>> {
        let mut start = self.remainder();
        self.blocks
            .iter()
            .map(|&b| {
                let r = start..start + b;
                start += b;
                r
            })
            .collect()
    }

    /// Block label of every coordinate; `None` on the remainder.
    pub fn labels(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.dim];
        for (k, r) in self.ranges().into_iter().enumerate() {
            for i in r {
                out[i] = Some(k);
            }
        }
        out
    }

    /// Every block of `self` lies inside one block of `coarser`.
    pub fn refines(&self, coarser: &BlockPartition) -> bool {
        if self.dim != coarser.dim {
            return false;
        }
        let outer = coarser.ranges();
        self.ranges()
            .iter()
            .all(|r| outer.iter().any(|o| o.start <= r.start && r.end <= o.end))
    }

    /// The block projections `p_i`.
    pub fn projections(&self) -> Vec<CMatrix> {
        self.ranges()
            .into_iter()
            .map(|r| coordinate_projection(self.dim, r))
            .collect()
    }

    pub fn spec_string(&self) -> String {
        let mut s = self.blocks.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(",");
        if self.corner {
            s.push_str(",+");
        }
        s
    }

    fn herm_basis(&self) -> HermBasis {
        let mut pairs = Vec::new();
        for r in self.ranges() {
            for i in r.clone() {
                for j in i..r.end {
                    pairs.push((i, j));
                }
            }
        }
        HermBasis::from_pairs(self.dim, pairs)
    }
}

impl fmt::Display for BlockPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.spec_string())
    }
}

pub(crate) fn coordinate_projection(dim: usize, r: Range<usize>) -> CMatrix {
    CMatrix::from_fn(dim, dim, |i, j| {
        if i == j && r.contains(&i) {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// The pinching `X -> sum_i p_i X p_i`, optionally expressed in a rotated
/// orthonormal frame `V` (then `p_i = V P_i V*`).
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalExpectation {
    partition: BlockPartition,
    frame: Option<Unitary>,
    labels: Vec<Option<usize>>,
}

impl ConditionalExpectation {
    pub fn new(partition: BlockPartition) -> Self {
        let labels = partition.labels();
        Self {
            partition,
            frame: None,
            labels,
        }
    }

    pub fn with_frame(partition: BlockPartition, frame: Unitary) -> Result<Self> {
        if frame.dim() != partition.dim() {
            return Err(CprError::DimensionMismatch {
                expected: partition.dim(),
                found: frame.dim(),
            });
        }
        let labels = partition.labels();
        Ok(Self {
            partition,
            frame: Some(frame),
            labels,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(BlockPartition::total(dim))
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn frame(&self) -> Option<&Unitary> {
        self.frame.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.partition.dim
    }

    /// `E(1) = 1` exactly when there is no remainder block.
    pub fn is_unital(&self) -> bool {
        !self.partition.corner
    }

    fn to_frame(&self, x: &CMatrix) -> CMatrix {
        match &self.frame {
            Some(v) => v.matrix().adjoint() * x * v.matrix(),
            None => x.clone(),
        }
    }

    fn leave_frame(&self, x: CMatrix) -> CMatrix {
        match &self.frame {
            Some(v) => v.matrix() * x * v.matrix().adjoint(),
            None => x,
        }
    }

    fn mask(&self, x: &CMatrix) -> CMatrix {
        let l = &self.labels;
        CMatrix::from_fn(x.nrows(), x.ncols(), |i, j| match (l[i], l[j]) {
            (Some(a), Some(b)) if a == b => x[(i, j)],
            _ => C64::new(0.0, 0.0),
        })
    }

    pub(crate) fn apply(&self, x: &CMatrix) -> CMatrix {
        match &self.frame {
            None => self.mask(x),
            Some(_) => self.leave_frame(self.mask(&self.to_frame(x))),
        }
    }

    fn check_dim(&self, x: &CMatrix) -> Result<()> {
        if x.nrows() != self.dim() || x.ncols() != self.dim() {
            return Err(CprError::DimensionMismatch {
                expected: self.dim(),
                found: x.nrows(),
            });
        }
        Ok(())
    }

    pub fn pinch(&self, x: &CMatrix) -> Result<CMatrix> {
        self.check_dim(x)?;
        Ok(self.apply(x))
    }

    pub fn pinch_hermitian(&self, x: &Hermitian) -> Hermitian {
        Hermitian::symmetrize(self.apply(x.matrix()))
    }

    pub fn pinch_skew(&self, w: &SkewHermitian) -> SkewHermitian {
        SkewHermitian::symmetrize(self.apply(w.matrix()))
    }

    /// `(1 - E)X`, the component in `ker E`.
    pub fn kernel_part(&self, x: &Hermitian) -> Hermitian {
        Hermitian::symmetrize(x.matrix() - self.apply(x.matrix()))
    }

    pub fn kernel_part_skew(&self, w: &SkewHermitian) -> SkewHermitian {
        SkewHermitian::symmetrize(w.matrix() - self.apply(w.matrix()))
    }

    /// `X = Y + Z` with `Y = E(X)` in `p_B` and `Z` in `p_E = ker E ∩ p`.
    pub fn split_spaces(&self, x: &Hermitian) -> Result<(Hermitian, Hermitian)> {
        self.check_dim(x.matrix())?;
        let y = self.pinch_hermitian(x);
        let z = Hermitian::symmetrize(x.matrix() - y.matrix());
        Ok((y, z))
    }

    /// Same decomposition on the skew-Hermitian side, `u = u_B ⊕ u_E`.
    pub fn split_skew(&self, w: &SkewHermitian) -> Result<(SkewHermitian, SkewHermitian)> {
        self.check_dim(w.matrix())?;
        let y = self.pinch_skew(w);
        let z = SkewHermitian::symmetrize(w.matrix() - y.matrix());
        Ok((y, z))
    }

    /// Projection onto the remainder block (zero for unital expectations).
    pub fn remainder_projection(&self) -> CMatrix {
        self.leave_frame(coordinate_projection(self.dim(), self.partition.remainder_range()))
    }

    /// `||X - E(X)||_F / (1 + ||X||_F)`.
    pub fn algebra_residual(&self, x: &CMatrix) -> f64 {
        scaled_error(&self.apply(x), x)
    }

    pub fn in_algebra(&self, x: &CMatrix) -> bool {
        self.algebra_residual(x) <= MEMBERSHIP_TOL
    }

    /// Distance of `g` from the group form `E(g) + (1 - E(1))`.
    pub fn group_residual(&self, g: &CMatrix) -> f64 {
        let target = self.apply(g) + self.remainder_projection();
        scaled_error(&target, g)
    }

    pub fn in_group(&self, g: &CMatrix) -> bool {
        self.group_residual(g) <= MEMBERSHIP_TOL
    }

    /// Random general element of `B`.
    pub fn random_algebra<R: Rng + ?Sized>(&self, rng: &mut R) -> CMatrix {
        self.apply(&gaussian(self.dim(), rng))
    }

    /// Random element of `p_B`, blockwise clipped Gaussian.
    pub fn random_hermitian_b<R: Rng + ?Sized>(&self, rng: &mut R) -> Hermitian {
        let mut m = CMatrix::zeros(self.dim(), self.dim());
        for r in self.partition.ranges() {
            let h = random_hermitian(r.len(), rng);
            m.view_mut((r.start, r.start), (r.len(), r.len())).copy_from(h.matrix());
        }
        Hermitian::symmetrize(self.leave_frame(m))
    }

    /// Random element of `p_E`.
    pub fn random_kernel_hermitian<R: Rng + ?Sized>(&self, rng: &mut R) -> Hermitian {
        self.kernel_part(&random_hermitian(self.dim(), rng))
    }

    /// Random element of `U_B`: Haar blocks, identity on the remainder.
    pub fn random_unitary_b<R: Rng + ?Sized>(&self, rng: &mut R) -> Unitary {
        let mut m = identity(self.dim());
        for r in self.partition.ranges() {
            let u = random_unitary(r.len(), rng);
            m.view_mut((r.start, r.start), (r.len(), r.len())).copy_from(u.matrix());
        }
        Unitary::new(self.leave_frame(m)).expect("block unitary")
    }

    /// Random element of `G_B`: blockwise `Q e^S`, identity on the remainder.
    pub fn random_group<R: Rng + ?Sized>(&self, rng: &mut R) -> Invertible {
        let u = self.random_unitary_b(rng);
        let s = self.random_hermitian_b(rng);
        let e = herm_exp(&s).expect("clipped input");
        let e_inv = herm_exp(&s.scale(-1.0)).expect("clipped input");
        // e^S carries the identity on the remainder because S vanishes there
        let m = u.matrix() * e.matrix();
        let inv = e_inv.matrix() * u.matrix().adjoint();
        Invertible::from_parts_unchecked(m, inv)
    }

    /// Real coordinates on `p_B` (orthonormal for the Frobenius inner product).
    pub fn b_coordinates(&self) -> BCoordinates<'_> {
        BCoordinates {
            e: self,
            basis: self.partition.herm_basis(),
        }
    }
}

/// Coordinate chart of the real vector space `p_B`.
pub struct BCoordinates<'a> {
    e: &'a ConditionalExpectation,
    basis: HermBasis,
}

impl BCoordinates<'_> {
    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn coords(&self, y: &Hermitian) -> Vec<f64> {
        self.basis.coords(&self.e.to_frame(y.matrix()))
    }

    pub fn hermitian(&self, c: &[f64]) -> Hermitian {
        Hermitian::symmetrize(self.e.leave_frame(self.basis.matrix(c)))
    }
}

/// Residuals of the conditional-expectation axioms over random samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectationReport {
    pub partition: String,
    pub samples: usize,
    pub seed: u64,
    pub checks: Vec<PropertyCheck>,
}

impl ExpectationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Tolerance for the expectation axioms in [`verify_expectation`].
pub const AXIOM_TOL: f64 = 1e-10;

pub fn verify_expectation(e: &ConditionalExpectation, samples: usize, seed: u64) -> Result<ExpectationReport> {
    if samples == 0 {
        return Err(CprError::Config("samples must be at least 1".into()));
    }
    let n = e.dim();
    let mut rng = seeded_rng(seed);
    let mut idem = MaxTracker::default();
    let mut tomiyama = MaxTracker::default();
    let mut star = MaxTracker::default();
    let mut equivariance = MaxTracker::default();
    let mut kernel_invariance = MaxTracker::default();
    let mut sigma = MaxTracker::default();
    let mut trace = MaxTracker::default();
    let norms = NormKind::standard();
    let mut contraction = [MaxTracker::default(); 5];

    for _ in 0..samples {
        let a = gaussian(n, &mut rng);
        let ea = e.apply(&a);
        idem.push(scaled_error(&e.apply(&ea), &ea));

        let b1 = e.random_algebra(&mut rng);
        let b2 = e.random_algebra(&mut rng);
        tomiyama.push(scaled_error(&e.apply(&(&b1 * &a * &b2)), &(&b1 * &ea * &b2)));

        star.push(scaled_error(&e.apply(&a.adjoint()), &ea.adjoint()));

        let g = e.random_group(&mut rng);
        let lhs = g.matrix() * &ea * g.inverse_matrix();
        let rhs = e.apply(&(g.matrix() * &a * g.inverse_matrix()));
        equivariance.push(scaled_error(&rhs, &lhs));

        let k = &a - &ea;
        let moved = g.matrix() * &k * g.inverse_matrix();
        kernel_invariance.push(frobenius(&e.apply(&moved)) / (1.0 + frobenius(&moved)));

        // sigma_{*1}(a) = -a*
        sigma.push(scaled_error(&e.apply(&(-a.adjoint())), &(-ea.adjoint())));

        if e.is_unital() {
            let (t0, t1) = (a.trace(), ea.trace());
            trace.push((t1 - t0).norm() / (1.0 + t0.norm()));
        }

        let x = random_hermitian(n, &mut rng);
        let ex = e.apply(x.matrix());
        for (slot, kind) in contraction.iter_mut().zip(norms) {
            let nx = norm(x.matrix(), kind);
            slot.push(((norm(&ex, kind) - nx) / (1.0 + nx)).max(0.0));
        }
    }

    let mut checks = vec![
        PropertyCheck::new("idempotence", idem.get(), AXIOM_TOL),
        PropertyCheck::new("tomiyama", tomiyama.get(), AXIOM_TOL),
        PropertyCheck::new("star", star.get(), AXIOM_TOL),
        PropertyCheck::new("ad_equivariance", equivariance.get(), AXIOM_TOL),
        PropertyCheck::new("kernel_invariance", kernel_invariance.get(), AXIOM_TOL),
        PropertyCheck::new("sigma_compatibility", sigma.get(), AXIOM_TOL),
    ];
    for (slot, kind) in contraction.iter().zip(norms) {
        checks.push(PropertyCheck::new(
            format!("contraction_{}", kind.label()),
            slot.get(),
            AXIOM_TOL,
        ));
    }
    checks.push(if e.is_unital() {
        PropertyCheck::new("trace_preservation", trace.get(), AXIOM_TOL)
    } else {
        PropertyCheck::not_applicable("trace_preservation")
    });

    Ok(ExpectationReport {
        partition: e.partition().to_string(),
        samples,
        seed,
        checks,
    })
}

/// Nested subalgebras `B_1 ⊆ ... ⊆ B_n = M_dim`, given finest-first by the
/// partitions `Q_1, ..., Q_{n-1}`. `E_k` pinches onto `Q_{k-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChainDoc", into = "ChainDoc")]
pub struct ExpectationChain {
    dim: usize,
    partitions: Vec<BlockPartition>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ChainDoc {
    dim: usize,
    partitions: Vec<Vec<usize>>,
}

impl TryFrom<ChainDoc> for ExpectationChain {
    type Error = CprError;

    fn try_from(d: ChainDoc) -> Result<Self> {
        let parts = d
            .partitions
            .into_iter()
            .map(|b| BlockPartition::inferred(d.dim, b))
            .collect::<Result<Vec<_>>>()?;
        ExpectationChain::new(d.dim, parts)
    }
}

impl From<ExpectationChain> for ChainDoc {
    fn from(c: ExpectationChain) -> Self {
        ChainDoc {
            dim: c.dim,
            partitions: c.partitions.into_iter().map(|p| p.blocks).collect(),
        }
    }
}

impl ExpectationChain {
    pub fn new(dim: usize, partitions: Vec<BlockPartition>) -> Result<Self> {
        if partitions.is_empty() {
            return Err(CprError::InvalidChain("at least one partition required".into()));
        }
        for (k, p) in partitions.iter().enumerate() {
            if p.dim() != dim {
                return Err(CprError::InvalidChain(format!(
                    "partition {} has dim {}, chain dim {dim}",
                    k + 1,
                    p.dim()
                )));
            }
        }
        for (k, w) in partitions.windows(2).enumerate() {
            if !w[0].refines(&w[1]) {
                return Err(CprError::InvalidChain(format!(
                    "partition {} {} does not refine partition {} {}",
                    k + 1,
                    w[0],
                    k + 2,
                    w[1]
                )));
            }
        }
        Ok(Self { dim, partitions })
    }

    /// Depth-2 chain `B ⊆ M_dim`.
    pub fn single(partition: BlockPartition) -> Self {
        Self {
            dim: partition.dim(),
            partitions: vec![partition],
        }
    }

    /// Parses `"p1;p2;..."` finest-first, each in [`BlockPartition::parse`] syntax.
    pub fn parse(spec: &str, dim: usize) -> Result<Self> {
        let parts = spec
            .split(';')
            .enumerate()
            .map(|(k, p)| {
                BlockPartition::parse(p, dim).map_err(|e| CprError::InvalidChain(format!("level {}: {e}", k + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(dim, parts)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of algebras `n`.
    pub fn depth(&self) -> usize {
        self.partitions.len() + 1
    }

    pub fn partitions(&self) -> &[BlockPartition] {
        &self.partitions
    }

    /// `Q_k` for `1 <= k <= n`, with `Q_n` the full algebra.
    pub fn level_partition(&self, k: usize) -> Result<BlockPartition> {
        let n = self.depth();
        if k == 0 || k > n {
            return Err(CprError::Index(format!("level {k} outside 1..={n}")));
        }
        Ok(if k == n {
            BlockPartition::total(self.dim)
        } else {
            self.partitions[k - 1].clone()
        })
    }

    /// `E_k: g_k -> g_{k-1}` for `2 <= k <= n`.
    pub fn expectation(&self, k: usize) -> Result<ConditionalExpectation> {
        let n = self.depth();
        if k < 2 || k > n {
            return Err(CprError::Index(format!("expectation E_{k} outside 2..={n}")));
        }
        Ok(ConditionalExpectation::new(self.partitions[k - 2].clone()))
    }

    /// The level-`k` algebra viewed as an expectation onto itself.
    pub fn level_expectation(&self, k: usize) -> Result<ConditionalExpectation> {
        Ok(ConditionalExpectation::new(self.level_partition(k)?))
    }

    /// `F_{k,j} = E_{j+1} ∘ ... ∘ E_k`, which is the pinching of `Q_j`.
    pub fn compose(&self, k: usize, j: usize) -> Result<ConditionalExpectation> {
        let n = self.depth();
        if !(1 <= j && j < k && k <= n) {
            return Err(CprError::Index(format!(
                "composition F_{{{k},{j}}} needs 1 <= j < k <= {n}"
            )));
        }
        Ok(ConditionalExpectation::new(self.partitions[j - 1].clone()))
    }

    /// Applies `E_k` first, then `E_{k-1}`, down to `E_{j+1}`.
    pub fn iterated(&self, k: usize, j: usize, x: &CMatrix) -> Result<CMatrix> {
        self.compose(k, j)?;
        let mut y = x.clone();
        for level in (j + 1..=k).rev() {
            y = self.expectation(level)?.pinch(&y)?;
        }
        Ok(y)
    }

    /// Largest scaled difference between [`Self::compose`] and [`Self::iterated`].
    pub fn composition_residual(&self, k: usize, j: usize, samples: usize, seed: u64) -> Result<f64> {
        let f = self.compose(k, j)?;
        let mut rng = seeded_rng(seed);
        let mut worst = MaxTracker::default();
        for _ in 0..samples {
            let x = gaussian(self.dim, &mut rng);
            worst.push(scaled_error(&self.iterated(k, j, &x)?, &f.apply(&x)));
        }
        Ok(worst.get())
    }
}

impl FromStr for ExpectationChain {
    type Err = CprError;

    /// JSON chain document.
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| CprError::Document(e.to_string()))
    }
}
