//! Cosets of `G_A/G_B` and `U_A/U_B`, the bundle `U_A ×_{U_B} p_E`, and the
//! identification of `G_A/G_B` with the tangent bundle of `U_A/U_B`.
//!
//! Cosets and bundle points are stored by representative. Equality is
//! decided by tolerance, never by canonical forms.

use serde::Serialize;

use crate::error::{CprError, Result};
use crate::expectations::{BlockPartition, ConditionalExpectation};
use crate::linalg::{
    frobenius, herm_exp, scaled_error, spectral, CMatrix, Hermitian, Invertible, NormKind, PositiveDefinite,
    SkewHermitian, Unitary, C64, I,
};
use crate::splitting::{cpr_split, SolverConfig};

/// Tolerance for coset, bundle and tangent equality.
pub const COSET_TOL: f64 = 1e-8;

fn check_dims(e: &ConditionalExpectation, m: &CMatrix) -> Result<()> {
    if m.nrows() != e.dim() {
        return Err(CprError::DimensionMismatch {
            expected: e.dim(),
            found: m.nrows(),
        });
    }
    Ok(())
}

/// `g G_B`.
#[derive(Debug, Clone, PartialEq)]
pub struct GCoset {
    g: Invertible,
    e: ConditionalExpectation,
}

impl GCoset {
    pub fn new(g: Invertible, e: ConditionalExpectation) -> Result<Self> {
        check_dims(&e, g.matrix())?;
        Ok(Self { g, e })
    }

    pub fn identity(e: ConditionalExpectation) -> Self {
        Self {
            g: Invertible::identity(e.dim()),
            e,
        }
    }

    pub fn representative(&self) -> &Invertible {
        &self.g
    }

    pub fn expectation(&self) -> &ConditionalExpectation {
        &self.e
    }

    /// How far `g_1^{-1} g_2` is from `G_B`.
    pub fn residual(&self, other: &GCoset) -> f64 {
        let b = self.g.inverse_matrix() * other.g.matrix();
        self.e.group_residual(&b)
    }

    pub fn same_as(&self, other: &GCoset) -> bool {
        self.residual(other) <= COSET_TOL
    }

    /// Left action `h · gG_B = hgG_B`.
    pub fn act(&self, h: &Invertible) -> GCoset {
        GCoset {
            g: h.mul(&self.g),
            e: self.e.clone(),
        }
    }

    /// Right multiplication of the representative by `b`, which for `b` in
    /// `G_B` does not change the coset.
    pub fn with_representative_times(&self, b: &Invertible) -> GCoset {
        GCoset {
            g: self.g.mul(b),
            e: self.e.clone(),
        }
    }
}

/// `u U_B`.
#[derive(Debug, Clone, PartialEq)]
pub struct UCoset {
    u: Unitary,
    e: ConditionalExpectation,
}

impl UCoset {
    pub fn new(u: Unitary, e: ConditionalExpectation) -> Result<Self> {
        check_dims(&e, u.matrix())?;
        Ok(Self { u, e })
    }

    pub fn representative(&self) -> &Unitary {
        &self.u
    }

    pub fn residual(&self, other: &UCoset) -> f64 {
        self.e.group_residual(&(self.u.matrix().adjoint() * other.u.matrix()))
    }

    pub fn same_as(&self, other: &UCoset) -> bool {
        self.residual(other) <= COSET_TOL
    }

    pub fn act(&self, w: &Unitary) -> UCoset {
        UCoset {
            u: w.mul(&self.u),
            e: self.e.clone(),
        }
    }

    /// The inclusion `λ: uU_B -> uG_B`.
    pub fn include(&self) -> GCoset {
        GCoset {
            g: self.u.to_invertible(),
            e: self.e.clone(),
        }
    }
}

/// `[(u, X)]` in `U_A ×_{U_B} p_E`.
#[derive(Debug, Clone, PartialEq)]
pub struct BundlePoint {
    pub u: Unitary,
    pub x: Hermitian,
    e: ConditionalExpectation,
}

fn kernel_check(e: &ConditionalExpectation, m: &CMatrix) -> Result<()> {
    check_dims(e, m)?;
    let leak = frobenius(&e.pinch(m)?) / (1.0 + frobenius(m));
    if leak > COSET_TOL {
        return Err(CprError::InvalidMatrix(format!(
            "fiber coordinate not in ker E (||E(X)|| ratio {leak:.3e})"
        )));
    }
    Ok(())
}

/// Residual of `(u_1, A_1) ~ (u_2, A_2)`: with `v = u_2^{-1} u_1`, the pair is
/// equivalent when `v` lies in `U_B` and `Ad_v A_1 = A_2`.
fn class_residual(e: &ConditionalExpectation, u1: &Unitary, a1: &CMatrix, u2: &Unitary, a2: &CMatrix) -> f64 {
    let v = u2.matrix().adjoint() * u1.matrix();
    let membership = e.group_residual(&v);
    let moved = &v * a1 * v.adjoint();
    membership.max(scaled_error(&moved, a2))
}

impl BundlePoint {
    pub fn new(u: Unitary, x: Hermitian, e: ConditionalExpectation) -> Result<Self> {
        check_dims(&e, u.matrix())?;
        kernel_check(&e, x.matrix())?;
        let x = e.kernel_part(&x);
        Ok(Self { u, x, e })
    }

    pub fn expectation(&self) -> &ConditionalExpectation {
        &self.e
    }

    /// `Ψ^E[(u, X)] = u e^X G_B`.
    pub fn compose(&self) -> Result<GCoset> {
        let ex = herm_exp(&self.x)?;
        let ex_inv = herm_exp(&self.x.scale(-1.0))?;
        let g = Invertible::from_parts_unchecked(
            self.u.matrix() * ex.matrix(),
            ex_inv.matrix() * self.u.matrix().adjoint(),
        );
        Ok(GCoset { g, e: self.e.clone() })
    }

    /// The representative `v · (u, X) = (u v^{-1}, Ad_v X)` for `v` in `U_B`.
    pub fn reparametrize(&self, v: &Unitary) -> BundlePoint {
        BundlePoint {
            u: self.u.mul(&v.inverse()),
            x: v.conj_hermitian(&self.x),
            e: self.e.clone(),
        }
    }

    /// `U_A` action `w · [(u, X)] = [(wu, X)]`.
    pub fn act(&self, w: &Unitary) -> BundlePoint {
        BundlePoint {
            u: w.mul(&self.u),
            x: self.x.clone(),
            e: self.e.clone(),
        }
    }

    pub fn residual(&self, other: &BundlePoint) -> f64 {
        class_residual(&self.e, &self.u, self.x.matrix(), &other.u, other.x.matrix())
    }
}

/// `(Ψ^E)^{-1}`: split the representative as `g = u e^X e^Y` and keep `[(u, X)]`.
pub fn coset_reduce(s: &GCoset, cfg: &SolverConfig) -> Result<BundlePoint> {
    let f = cpr_split(&s.g, &s.e, cfg)?;
    let x = f.x.into_iter().next().expect("depth-2 split has one X");
    Ok(BundlePoint {
        u: f.u,
        x,
        e: s.e.clone(),
    })
}

pub fn bundle_equal(a: &BundlePoint, b: &BundlePoint) -> bool {
    a.residual(b) <= COSET_TOL
}

/// `Ξ[(u, X)] = u U_B`.
pub fn project_to_base(pt: &BundlePoint) -> UCoset {
    UCoset {
        u: pt.u.clone(),
        e: pt.e.clone(),
    }
}

/// `σ_G(gG_B) = σ(g)G_B` with `σ(g) = (g*)^{-1}`.
pub fn sigma_g(s: &GCoset) -> GCoset {
    GCoset {
        g: s.g.sigma(),
        e: s.e.clone(),
    }
}

/// `τ_G[(u, X)] = [(u, -X)]`.
pub fn tau_g(pt: &BundlePoint) -> BundlePoint {
    BundlePoint {
        u: pt.u.clone(),
        x: pt.x.scale(-1.0),
        e: pt.e.clone(),
    }
}

/// `[(u, X)] -> [(u, tX)]`, a deformation retraction onto `λ(U_A/U_B)`.
pub fn retract(pt: &BundlePoint, t: f64) -> Result<BundlePoint> {
    if !(0.0..=1.0).contains(&t) {
        return Err(CprError::Config(format!("retraction parameter {t} outside [0, 1]")));
    }
    Ok(BundlePoint {
        u: pt.u.clone(),
        x: pt.x.scale(t),
        e: pt.e.clone(),
    })
}

/// `[(u, W)]` in `U_A ×_{U_B} u_E`, standing for the tangent vector
/// `(μ_u)_{*o} q_{*1} W` of `U_A/U_B`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub u: Unitary,
    pub w: SkewHermitian,
    e: ConditionalExpectation,
}

impl TangentVector {
    pub fn new(u: Unitary, w: SkewHermitian, e: ConditionalExpectation) -> Result<Self> {
        check_dims(&e, u.matrix())?;
        kernel_check(&e, w.matrix())?;
        let w = e.kernel_part_skew(&w);
        Ok(Self { u, w, e })
    }

    pub fn expectation(&self) -> &ConditionalExpectation {
        &self.e
    }

    pub fn base(&self) -> UCoset {
        UCoset {
            u: self.u.clone(),
            e: self.e.clone(),
        }
    }

    pub fn neg(&self) -> TangentVector {
        TangentVector {
            u: self.u.clone(),
            w: self.w.neg(),
            e: self.e.clone(),
        }
    }

    pub fn act(&self, w: &Unitary) -> TangentVector {
        TangentVector {
            u: w.mul(&self.u),
            w: self.w.clone(),
            e: self.e.clone(),
        }
    }

    pub fn residual(&self, other: &TangentVector) -> f64 {
        class_residual(&self.e, &self.u, self.w.matrix(), &other.u, other.w.matrix())
    }

    pub fn same_as(&self, other: &TangentVector) -> bool {
        self.residual(other) <= COSET_TOL
    }

    /// Norm of the representative; independent of the representative
    /// because every implemented norm is unitarily invariant.
    pub fn norm(&self, kind: NormKind) -> f64 {
        crate::linalg::norm(self.w.matrix(), kind)
    }
}

/// `Θ: [(u, X)] -> [(u, iX)]`.
pub fn theta(pt: &BundlePoint) -> TangentVector {
    TangentVector {
        u: pt.u.clone(),
        w: pt.x.times_i(),
        e: pt.e.clone(),
    }
}

/// `α^E ∘ Θ ∘ (Ψ^E)^{-1}`.
pub fn to_tangent(s: &GCoset, cfg: &SolverConfig) -> Result<TangentVector> {
    Ok(theta(&coset_reduce(s, cfg)?))
}

/// Inverse of [`to_tangent`]: `[(u, W)] -> u e^{-iW} G_B`.
pub fn from_tangent(v: &TangentVector) -> Result<GCoset> {
    BundlePoint {
        u: v.u.clone(),
        x: v.w.times_minus_i(),
        e: v.e.clone(),
    }
    .compose()
}

/// Log of a positive element of `G_B` stays in `B`; returns the algebra
/// residual of `log b`.
pub fn positive_block_log_residual(e: &ConditionalExpectation, b: &PositiveDefinite) -> Result<f64> {
    let l = crate::linalg::herm_log(b)?;
    Ok(e.algebra_residual(l.matrix()))
}

/// Both paths around the functoriality square for the corner embedding
/// `α(g) = diag(g, I_m)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PushforwardReport {
    pub source_dim: usize,
    pub target_dim: usize,
    pub target_partition: String,
    /// Tangent residual between `to_tangent(α_G(s))` and `α_{U*}(to_tangent(s))`.
    pub residual: f64,
    /// Base residual between the two projected cosets.
    pub base_residual: f64,
    pub commutes: bool,
}

/// Embedding `α` into dimension `n + m` as a morphism of reductive structures.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockEmbedding {
    source: ConditionalExpectation,
    target: ConditionalExpectation,
    extra: usize,
}

impl BlockEmbedding {
    /// `target = None` appends one block of size `m` (nothing when `m = 0`).
    pub fn new(source: &ConditionalExpectation, extra: usize, target: Option<BlockPartition>) -> Result<Self> {
        if source.frame().is_some() || !source.is_unital() {
            return Err(CprError::Config(
                "block embeddings need a unital, unrotated source partition".into(),
            ));
        }
        let n = source.dim();
        let src_blocks = source.partition().blocks().to_vec();
        let target = match target {
            Some(t) => t,
            None if extra == 0 => source.partition().clone(),
            None => {
                let mut b = src_blocks.clone();
                b.push(extra);
                BlockPartition::new(n + extra, b, false)?
            }
        };
        if target.dim() != n + extra {
            return Err(CprError::Config(format!(
                "target partition has dim {}, expected {}",
                target.dim(),
                n + extra
            )));
        }
        if target.is_corner() || !target.blocks().starts_with(&src_blocks) {
            return Err(CprError::Config(format!(
                "target partition {target} does not restrict to {}",
                source.partition()
            )));
        }
        Ok(Self {
            source: source.clone(),
            target: ConditionalExpectation::new(target),
            extra,
        })
    }

    pub fn target(&self) -> &ConditionalExpectation {
        &self.target
    }

    fn embed(&self, m: &CMatrix, fill: C64) -> CMatrix {
        let n = self.source.dim();
        let mut out = CMatrix::zeros(n + self.extra, n + self.extra);
        out.view_mut((0, 0), (n, n)).copy_from(m);
        for i in n..n + self.extra {
            out[(i, i)] = fill;
        }
        out
    }

    /// `α(g) = diag(g, I_m)`.
    pub fn group(&self, g: &Invertible) -> Invertible {
        let one = C64::new(1.0, 0.0);
        Invertible::from_parts_unchecked(self.embed(g.matrix(), one), self.embed(g.inverse_matrix(), one))
    }

    pub fn unitary(&self, u: &Unitary) -> Unitary {
        Unitary::new(self.embed(u.matrix(), C64::new(1.0, 0.0))).expect("block unitary")
    }

    /// `α_{*1}(X) = diag(X, 0)`.
    pub fn algebra(&self, x: &CMatrix) -> CMatrix {
        self.embed(x, C64::new(0.0, 0.0))
    }

    /// `α_G(gG_B) = α(g) G̃_B`.
    pub fn coset(&self, s: &GCoset) -> GCoset {
        GCoset {
            g: self.group(&s.g),
            e: self.target.clone(),
        }
    }

    /// `α_{U*}` on tangent vectors `[(u, W)] -> [(α(u), α_{*1}W)]`.
    pub fn tangent(&self, v: &TangentVector) -> TangentVector {
        TangentVector {
            u: self.unitary(&v.u),
            w: SkewHermitian::symmetrize(self.algebra(v.w.matrix())),
            e: self.target.clone(),
        }
    }
}

pub fn pushforward_check(alpha: &BlockEmbedding, s: &GCoset, cfg: &SolverConfig) -> Result<PushforwardReport> {
    if s.e != alpha.source {
        return Err(CprError::Config("coset does not live on the embedding's source".into()));
    }
    let via_group = to_tangent(&alpha.coset(s), cfg)?;
    let via_tangent = alpha.tangent(&to_tangent(s, cfg)?);
    let residual = via_group.residual(&via_tangent);
    let base_residual = via_group.base().residual(&via_tangent.base());
    Ok(PushforwardReport {
        source_dim: alpha.source.dim(),
        target_dim: alpha.target.dim(),
        target_partition: alpha.target.partition().to_string(),
        residual,
        base_residual,
        commutes: residual <= COSET_TOL && base_residual <= COSET_TOL,
    })
}

/// `(u p_1 u*, ..., u p_n u*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlagPoint {
    pub projections: Vec<CMatrix>,
}

impl FlagPoint {
    pub fn residual(&self, other: &FlagPoint) -> f64 {
        self.projections
            .iter()
            .zip(&other.projections)
            .map(|(a, b)| frobenius(&(a - b)))
            .fold(0.0, f64::max)
    }

    pub fn same_as(&self, other: &FlagPoint) -> bool {
        self.projections.len() == other.projections.len() && self.residual(other) <= COSET_TOL
    }

    /// `p_i² = p_i = p_i*` and `Σ p_i = 1`.
    pub fn defect(&self) -> f64 {
        let n = self.projections.first().map_or(0, |p| p.nrows());
        let mut sum = CMatrix::zeros(n, n);
        let mut worst: f64 = 0.0;
        for p in &self.projections {
            worst = worst.max(frobenius(&(p * p - p))).max(frobenius(&(p - p.adjoint())));
            sum += p;
        }
        worst.max(frobenius(&(sum - CMatrix::identity(n, n))))
    }
}

pub fn flag_of(u: &Unitary, partition: &BlockPartition) -> Result<FlagPoint> {
    if partition.is_corner() {
        return Err(CprError::Config(format!(
            "flags need a partition covering all coordinates, got {partition}"
        )));
    }
    if u.dim() != partition.dim() {
        return Err(CprError::DimensionMismatch {
            expected: partition.dim(),
            found: u.dim(),
        });
    }
    Ok(FlagPoint {
        projections: partition
            .projections()
            .iter()
            .map(|p| u.matrix() * p * u.matrix().adjoint())
            .collect(),
    })
}

/// Partial isometry `u p_1`, where `p_1` projects onto the remainder of a
/// corner partition with a single block. The isotropy group of `p_1` is
/// then exactly `U_B = {diag(1, w)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelPoint {
    pub isometry: CMatrix,
    pub rank: usize,
}

impl StiefelPoint {
    /// The `rank` nonzero columns, an orthonormal frame.
    pub fn frame(&self) -> CMatrix {
        self.isometry.columns(0, self.rank).into_owned()
    }

    pub fn residual(&self, other: &StiefelPoint) -> f64 {
        frobenius(&(&self.isometry - &other.isometry))
    }

    pub fn same_as(&self, other: &StiefelPoint) -> bool {
        self.rank == other.rank && self.residual(other) <= COSET_TOL
    }
}

pub fn stiefel_of(u: &Unitary, partition: &BlockPartition) -> Result<StiefelPoint> {
    if !partition.is_corner() || partition.blocks().len() != 1 {
        return Err(CprError::Config(format!(
            "Stiefel points need a corner partition with one block, got {partition}"
        )));
    }
    if u.dim() != partition.dim() {
        return Err(CprError::DimensionMismatch {
            expected: partition.dim(),
            found: u.dim(),
        });
    }
    let rank = partition.remainder();
    let p1 = crate::expectations::coordinate_projection(partition.dim(), 0..rank);
    Ok(StiefelPoint {
        isometry: u.matrix() * p1,
        rank,
    })
}

/// Eigenprojections of a skew-Hermitian `X_0 = Σ λ_i p_i` and the pinching
/// onto their commutant.
#[derive(Debug, Clone, PartialEq)]
pub struct CoadjointSetup {
    pub x0: SkewHermitian,
    /// Imaginary parts of the distinct eigenvalues, ascending.
    pub levels: Vec<f64>,
    pub multiplicities: Vec<usize>,
    expectation: ConditionalExpectation,
}

pub const DEFAULT_GAP: f64 = 1e-6;

impl CoadjointSetup {
    pub fn expectation(&self) -> &ConditionalExpectation {
        &self.expectation
    }

    pub fn norm(&self) -> NormKind {
        NormKind::Schatten(2.0)
    }

    /// `Ad*_g X_0 = g X_0 g^{-1}`.
    pub fn orbit(&self, g: &Invertible) -> CMatrix {
        g.matrix() * self.x0.matrix() * g.inverse_matrix()
    }

    pub fn fixes(&self, g: &Invertible) -> bool {
        scaled_error(&self.orbit(g), self.x0.matrix()) <= COSET_TOL
    }

    pub fn point(&self, g: &Invertible) -> CoadjointPoint {
        CoadjointPoint {
            g: g.clone(),
            orbit_point: self.orbit(g),
        }
    }

    pub fn coset(&self, pt: &CoadjointPoint) -> GCoset {
        GCoset {
            g: pt.g.clone(),
            e: self.expectation.clone(),
        }
    }
}

/// `g X_0 g^{-1}` together with the `g` that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct CoadjointPoint {
    pub g: Invertible,
    pub orbit_point: CMatrix,
}

impl CoadjointPoint {
    pub fn residual(&self, other: &CoadjointPoint) -> f64 {
        scaled_error(&self.orbit_point, &other.orbit_point)
    }

    pub fn same_as(&self, other: &CoadjointPoint) -> bool {
        self.residual(other) <= COSET_TOL
    }
}

/// Groups eigenvalues closer than `1e-9 (1 + ||X_0||)` into one level and
/// rejects distinct levels closer than `gap`.
pub fn coadjoint_setup(x0: &SkewHermitian, gap: f64) -> Result<CoadjointSetup> {
    let h = x0.times_minus_i();
    let (mu, v) = spectral(&h)?;
    let merge = 1e-9 * (1.0 + h.frobenius());
    let mut levels: Vec<f64> = Vec::new();
    let mut multiplicities: Vec<usize> = Vec::new();
    for &m in &mu {
        match levels.last() {
            Some(&last) if (m - last).abs() <= merge => *multiplicities.last_mut().unwrap() += 1,
            Some(&last) if (m - last).abs() < gap => {
                return Err(CprError::Gap {
                    gap: (m - last).abs(),
                    required: gap,
                })
            }
            _ => {
                levels.push(m);
                multiplicities.push(1);
            }
        }
    }
    let partition = BlockPartition::new(x0.dim(), multiplicities.clone(), false)?;
    let frame = Unitary::new(v)?;
    Ok(CoadjointSetup {
        x0: x0.clone(),
        levels,
        multiplicities,
        expectation: ConditionalExpectation::with_frame(partition, frame)?,
    })
}

/// Builds `X_0 = diag(i λ_1, ..., i λ_n)`.
pub fn diagonal_skew(levels: &[f64]) -> SkewHermitian {
    let n = levels.len();
    SkewHermitian::new(CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            I * levels[i]
        } else {
            C64::new(0.0, 0.0)
        }
    }))
    .expect("diagonal skew matrix")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, random_invertible, random_unitary, relative_error, seeded_rng};

    fn e_of(spec: &str, n: usize) -> ConditionalExpectation {
        ConditionalExpectation::new(BlockPartition::parse(spec, n).unwrap())
    }

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    #[test]
    fn identity_coset_reduces_to_origin() {
        let pt = coset_reduce(&GCoset::identity(e_of("1,2", 3)), &cfg()).unwrap();
        assert!(relative_error(pt.u.matrix(), &identity(3)) < 1e-14);
        assert!(pt.x.frobenius() < 1e-14);
    }

    #[test]
    fn constructed_coset_recovers_factors() {
        let e = e_of("2,2", 4);
        let mut rng = seeded_rng(4);
        let u0 = random_unitary(4, &mut rng);
        let x0 = e.random_kernel_hermitian(&mut rng);
        let pt0 = BundlePoint::new(u0.clone(), x0.clone(), e.clone()).unwrap();
        let pt = coset_reduce(&pt0.compose().unwrap(), &cfg()).unwrap();
        assert!(relative_error(pt.u.matrix(), u0.matrix()) < 1e-8);
        assert!(frobenius(&(pt.x.matrix() - x0.matrix())) < 1e-8);
    }

    #[test]
    fn coset_reduce_is_representative_independent() {
        let e = e_of("1,1,+", 3);
        let mut rng = seeded_rng(8);
        let g = random_invertible(3, &mut rng);
        let b = e.random_group(&mut rng);
        let s = GCoset::new(g, e.clone()).unwrap();
        let s2 = s.with_representative_times(&b);
        assert!(s.same_as(&s2));
        let a = coset_reduce(&s, &cfg()).unwrap();
        let c = coset_reduce(&s2, &cfg()).unwrap();
        assert!(bundle_equal(&a, &c), "{}", a.residual(&c));
    }

    #[test]
    fn bundle_equality_cases() {
        let e = e_of("2,1", 3);
        let mut rng = seeded_rng(2);
        let pt = BundlePoint::new(
            random_unitary(3, &mut rng),
            e.random_kernel_hermitian(&mut rng),
            e.clone(),
        )
        .unwrap();
        assert!(bundle_equal(&pt, &pt));
        let v = e.random_unitary_b(&mut rng);
        assert!(bundle_equal(&pt, &pt.reparametrize(&v)));
        assert!(!bundle_equal(&pt, &tau_g(&pt)));
        let bad = BundlePoint::new(Unitary::identity(3), crate::linalg::random_hermitian(3, &mut rng), e);
        assert!(bad.is_err());
    }

    #[test]
    fn projection_is_well_defined_and_equivariant() {
        let e = e_of("1,1,1", 3);
        let mut rng = seeded_rng(13);
        let x = e.random_kernel_hermitian(&mut rng);
        let origin = BundlePoint::new(Unitary::identity(3), x.clone(), e.clone()).unwrap();
        assert!(project_to_base(&origin).same_as(&UCoset::new(Unitary::identity(3), e.clone()).unwrap()));
        let pt = BundlePoint::new(random_unitary(3, &mut rng), x, e.clone()).unwrap();
        let v = e.random_unitary_b(&mut rng);
        assert!(project_to_base(&pt).same_as(&project_to_base(&pt.reparametrize(&v))));
        let w = random_unitary(3, &mut rng);
        assert!(project_to_base(&pt.act(&w)).same_as(&project_to_base(&pt).act(&w)));
    }

    #[test]
    fn sigma_fixed_points() {
        let e = e_of("2,+", 3);
        let mut rng = seeded_rng(5);
        let s = GCoset::new(random_unitary(3, &mut rng).to_invertible(), e.clone()).unwrap();
        assert!(sigma_g(&s).same_as(&s));
        let x0 = e.random_kernel_hermitian(&mut rng);
        let s = BundlePoint::new(Unitary::identity(3), x0, e.clone())
            .unwrap()
            .compose()
            .unwrap();
        assert!(!sigma_g(&s).same_as(&s));
    }

    #[test]
    fn sigma_tau_square_commutes() {
        let e = e_of("2,2", 4);
        let s = GCoset::new(random_invertible(4, &mut seeded_rng(17)), e).unwrap();
        let left = coset_reduce(&sigma_g(&s), &cfg()).unwrap();
        let right = tau_g(&coset_reduce(&s, &cfg()).unwrap());
        assert!(bundle_equal(&left, &right));
    }

    #[test]
    fn retraction_endpoints() {
        let e = e_of("1,2", 3);
        let mut rng = seeded_rng(6);
        let pt = BundlePoint::new(
            random_unitary(3, &mut rng),
            e.random_kernel_hermitian(&mut rng),
            e.clone(),
        )
        .unwrap();
        assert!(bundle_equal(&retract(&pt, 1.0).unwrap(), &pt));
        let zero = retract(&pt, 0.0).unwrap();
        assert_eq!(zero.x.frobenius(), 0.0);
        assert!(bundle_equal(&tau_g(&zero), &zero));
        let v = e.random_unitary_b(&mut rng);
        assert!(bundle_equal(
            &retract(&pt, 0.5).unwrap(),
            &retract(&pt.reparametrize(&v), 0.5).unwrap()
        ));
        assert!(retract(&pt, 1.5).is_err());
    }

    #[test]
    fn tangent_identification() {
        let e = e_of("1,1,1", 3);
        let zero = to_tangent(&GCoset::identity(e.clone()), &cfg()).unwrap();
        assert!(frobenius(zero.w.matrix()) < 1e-14);
        let s = GCoset::new(random_invertible(3, &mut seeded_rng(23)), e).unwrap();
        let v = to_tangent(&s, &cfg()).unwrap();
        assert!(from_tangent(&v).unwrap().same_as(&s));
        let vs = to_tangent(&sigma_g(&s), &cfg()).unwrap();
        assert!(vs.same_as(&v.neg()));
    }

    #[test]
    fn pushforward_identity_and_embedding() {
        let e = e_of("1,1", 2);
        let s = GCoset::new(random_invertible(2, &mut seeded_rng(3)), e.clone()).unwrap();
        let id = BlockEmbedding::new(&e, 0, None).unwrap();
        let r = pushforward_check(&id, &s, &cfg()).unwrap();
        assert!(r.residual < 1e-14, "{r:?}");
        let alpha = BlockEmbedding::new(&e, 1, None).unwrap();
        let r = pushforward_check(&alpha, &s, &cfg()).unwrap();
        assert!(r.commutes, "{r:?}");
        let r = pushforward_check(&alpha, &GCoset::identity(e.clone()), &cfg()).unwrap();
        assert!(r.residual < 1e-14);
        assert!(BlockEmbedding::new(&e, 1, Some(BlockPartition::parse("2,1", 3).unwrap())).is_err());
        assert!(BlockEmbedding::new(&e_of("1,+", 2), 1, None).is_err());
    }

    #[test]
    fn flags() {
        let p = BlockPartition::parse("1,1", 2).unwrap();
        let base = flag_of(&Unitary::identity(2), &p).unwrap();
        assert_eq!(base.projections, p.projections());
        let (c, s) = (std::f64::consts::FRAC_PI_4.cos(), std::f64::consts::FRAC_PI_4.sin());
        let rot = Unitary::new(CMatrix::from_row_slice(
            2,
            2,
            &[C64::new(c, 0.0), C64::new(-s, 0.0), C64::new(s, 0.0), C64::new(c, 0.0)],
        ))
        .unwrap();
        let f = flag_of(&rot, &p).unwrap();
        // lines spanned by (1,1)/sqrt2 and (-1,1)/sqrt2
        let half = C64::new(0.5, 0.0);
        let plus = CMatrix::from_element(2, 2, half);
        let minus = CMatrix::from_row_slice(2, 2, &[half, -half, -half, half]);
        assert!(frobenius(&(&f.projections[0] - plus)) < 1e-15);
        assert!(frobenius(&(&f.projections[1] - minus)) < 1e-15);
        assert!(!f.same_as(&base));
        assert!(f.defect() < 1e-14);
        assert!(flag_of(&rot, &BlockPartition::parse("1,+", 2).unwrap()).is_err());
    }

    #[test]
    fn stiefel_points() {
        let p = BlockPartition::parse("1,+", 2).unwrap();
        let u = random_unitary(2, &mut seeded_rng(1));
        let s = stiefel_of(&u, &p).unwrap();
        assert_eq!(s.frame(), u.matrix().columns(0, 1).into_owned());
        let base = stiefel_of(&Unitary::identity(2), &p).unwrap();
        assert_eq!(base.isometry, crate::expectations::coordinate_projection(2, 0..1));
        assert!(stiefel_of(&u, &BlockPartition::parse("1,1", 2).unwrap()).is_err());
    }

    #[test]
    fn coadjoint_basics() {
        let x0 = diagonal_skew(&[1.0, -1.0]);
        let setup = coadjoint_setup(&x0, DEFAULT_GAP).unwrap();
        let pt = setup.point(&Invertible::identity(2));
        assert!(frobenius(&(&pt.orbit_point - x0.matrix())) < 1e-15);
        let b = setup.expectation().random_group(&mut seeded_rng(2));
        assert!(setup.fixes(&b));
        assert!(setup.point(&b).same_as(&pt));
        let close = diagonal_skew(&[1.0, 1.0 + 1e-8]);
        assert!(matches!(
            coadjoint_setup(&close, DEFAULT_GAP),
            Err(CprError::Gap { .. })
        ));
        let repeated = diagonal_skew(&[1.0, 1.0, -2.0]);
        let s = coadjoint_setup(&repeated, DEFAULT_GAP).unwrap();
        assert_eq!(s.multiplicities, vec![1, 2]);
    }

    #[test]
    fn block_log_stays_in_block() {
        let e = e_of("2,1,+", 4);
        let mut rng = seeded_rng(3);
        let b = herm_exp(&e.random_hermitian_b(&mut rng)).unwrap();
        assert!(e.in_group(b.matrix()));
        assert!(positive_block_log_residual(&e, &b).unwrap() <= 1e-10);
    }
}
