//! Dense complex matrices with role-typed wrappers.
//!
//! Every wrapper repairs its input on construction (symmetrization for the
//! Hermitian roles, re-orthonormalization for unitaries) and records the size
//! of the repair. A repair larger than [`Tolerances::repair_max`] is an error.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Complex, DMatrix, SymmetricEigen, SVD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{CprError, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

/// Relative tolerances shared by the role wrappers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub herm_tol: f64,
    pub unitary_tol: f64,
    pub repair_max: f64,
    /// Positive-definiteness floor relative to the operator norm.
    pub pd_floor: f64,
    /// Invertibility floor on sigma_min / sigma_max.
    pub inv_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            herm_tol: 1e-10,
            unitary_tol: 1e-10,
            repair_max: 1e-6,
            pd_floor: 1e-12,
            inv_floor: 1e-12,
        }
    }
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `||a - b||_F / max(||b||_F, 1e-300)`.
pub fn relative_error(a: &CMatrix, b: &CMatrix) -> f64 {
    frobenius(&(a - b)) / frobenius(b).max(1e-300)
}

/// `||a - b||_F / (1 + ||b||_F)`, the scale-free residual used by property checks.
pub fn scaled_error(a: &CMatrix, b: &CMatrix) -> f64 {
    frobenius(&(a - b)) / (1.0 + frobenius(b))
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

fn check_finite(m: &CMatrix) -> Result<()> {
    if !m.is_square() {
        return Err(CprError::InvalidMatrix(format!(
            "not square ({}x{})",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Err(CprError::InvalidMatrix("empty matrix".into()));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(CprError::InvalidMatrix("non-finite entry".into()));
    }
    Ok(())
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

fn skew_part(m: &CMatrix) -> CMatrix {
    (m - m.adjoint()).scale(0.5)
}

/// Self-adjoint matrix, an element of the `p` space.
#[derive(Debug, Clone, PartialEq)]
pub struct Hermitian {
    m: CMatrix,
    repair: f64,
}

impl Hermitian {
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::with_tolerances(m, &Tolerances::default())
    }

    pub fn with_tolerances(m: CMatrix, tol: &Tolerances) -> Result<Self> {
        check_finite(&m)?;
        let asymmetry = frobenius(&skew_part(&m)) / (1.0 + frobenius(&m));
        if asymmetry > tol.repair_max {
            return Err(CprError::NotHermitian { asymmetry });
        }
        Ok(Self {
            m: hermitian_part(&m),
            repair: asymmetry,
        })
    }

    /// Symmetrizes without the repair bound; for results of functional calculus.
    pub(crate) fn symmetrize(m: CMatrix) -> Self {
        let repair = frobenius(&skew_part(&m)) / (1.0 + frobenius(&m));
        Self {
            m: hermitian_part(&m),
            repair,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            m: CMatrix::zeros(n, n),
            repair: 0.0,
        }
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let m = CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(d[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        Self { m, repair: 0.0 }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn repair(&self) -> f64 {
        self.repair
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            m: self.m.scale(s),
            repair: self.repair,
        }
    }

    pub fn add(&self, other: &Hermitian) -> Self {
        Self::symmetrize(&self.m + &other.m)
    }

    pub fn sub(&self, other: &Hermitian) -> Self {
        Self::symmetrize(&self.m - &other.m)
    }

    /// `iX`, which is skew-Hermitian.
    pub fn times_i(&self) -> SkewHermitian {
        SkewHermitian {
            m: self.m.map(|z| z * I),
            repair: self.repair,
        }
    }

    pub fn frobenius(&self) -> f64 {
        frobenius(&self.m)
    }
}

/// Skew-adjoint matrix, an element of the `u` space.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewHermitian {
    m: CMatrix,
    repair: f64,
}

impl SkewHermitian {
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::with_tolerances(m, &Tolerances::default())
    }

    pub fn with_tolerances(m: CMatrix, tol: &Tolerances) -> Result<Self> {
        check_finite(&m)?;
        let defect = frobenius(&hermitian_part(&m)) / (1.0 + frobenius(&m));
        if defect > tol.repair_max {
            return Err(CprError::NotSkewHermitian { defect });
        }
        Ok(Self {
            m: skew_part(&m),
            repair: defect,
        })
    }

    pub(crate) fn symmetrize(m: CMatrix) -> Self {
        let repair = frobenius(&hermitian_part(&m)) / (1.0 + frobenius(&m));
        Self {
            m: skew_part(&m),
            repair,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            m: CMatrix::zeros(n, n),
            repair: 0.0,
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn repair(&self) -> f64 {
        self.repair
    }

    pub fn neg(&self) -> Self {
        Self {
            m: -&self.m,
            repair: self.repair,
        }
    }

    /// `iW`, which is Hermitian.
    pub fn times_i(&self) -> Hermitian {
        Hermitian {
            m: self.m.map(|z| z * I),
            repair: self.repair,
        }
    }

    /// `-iW`, the inverse of [`Hermitian::times_i`].
    pub fn times_minus_i(&self) -> Hermitian {
        Hermitian {
            m: self.m.map(|z| z * -I),
            repair: self.repair,
        }
    }
}

/// Positive-definite Hermitian matrix, a point of `G^+ = e^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct PositiveDefinite {
    h: Hermitian,
    min_eigenvalue: f64,
}

impl PositiveDefinite {
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::with_tolerances(m, &Tolerances::default())
    }

    pub fn with_tolerances(m: CMatrix, tol: &Tolerances) -> Result<Self> {
        let h = Hermitian::with_tolerances(m, tol)?;
        Self::from_hermitian(h, tol)
    }

    pub fn from_hermitian(h: Hermitian, tol: &Tolerances) -> Result<Self> {
        let (eig, _) = spectral(&h)?;
        let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let max_abs = eig.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let floor = tol.pd_floor * max_abs;
        if !(min > floor) {
            return Err(CprError::Positivity {
                min_eigenvalue: min,
                floor,
            });
        }
        Ok(Self { h, min_eigenvalue: min })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            h: Hermitian {
                m: identity(n),
                repair: 0.0,
            },
            min_eigenvalue: 1.0,
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        self.h.matrix()
    }

    pub fn hermitian(&self) -> &Hermitian {
        &self.h
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }
}

/// Unitary matrix, a fixed point of `sigma(g) = (g*)^{-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Unitary {
    m: CMatrix,
    repair: f64,
}

impl Unitary {
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::with_tolerances(m, &Tolerances::default())
    }

    /// Accepts `m` when `||m*m - I||_F <= repair_max`; inputs above
    /// `unitary_tol` are projected back onto the unitary group via the polar factor.
    pub fn with_tolerances(m: CMatrix, tol: &Tolerances) -> Result<Self> {
        check_finite(&m)?;
        let n = m.nrows();
        let defect = frobenius(&(m.adjoint() * &m - identity(n)));
        if defect > tol.repair_max {
            return Err(CprError::NotUnitary { defect });
        }
        if defect <= tol.unitary_tol {
            return Ok(Self { m, repair: defect });
        }
        let svd = SVD::new(m, true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        Ok(Self {
            m: u * vt,
            repair: defect,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: identity(n),
            repair: 0.0,
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn repair(&self) -> f64 {
        self.repair
    }

    pub fn inverse(&self) -> Unitary {
        Unitary {
            m: self.m.adjoint(),
            repair: self.repair,
        }
    }

    pub fn mul(&self, other: &Unitary) -> Unitary {
        Unitary {
            m: &self.m * &other.m,
            repair: self.repair.max(other.repair),
        }
    }

    pub fn to_invertible(&self) -> Invertible {
        Invertible {
            m: self.m.clone(),
            inv: self.m.adjoint(),
            min_singular: 1.0,
        }
    }

    /// `u X u*`, which keeps Hermitian inputs Hermitian.
    pub fn conj_hermitian(&self, x: &Hermitian) -> Hermitian {
        Hermitian::symmetrize(&self.m * x.matrix() * self.m.adjoint())
    }

    pub fn conj_skew(&self, w: &SkewHermitian) -> SkewHermitian {
        SkewHermitian::symmetrize(&self.m * w.matrix() * self.m.adjoint())
    }

    pub fn defect(&self) -> f64 {
        frobenius(&(self.m.adjoint() * &self.m - identity(self.dim())))
    }
}

/// Invertible matrix, an element of `G`. Caches its inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct Invertible {
    m: CMatrix,
    inv: CMatrix,
    min_singular: f64,
}

impl Invertible {
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::with_tolerances(m, &Tolerances::default())
    }

    pub fn with_tolerances(m: CMatrix, tol: &Tolerances) -> Result<Self> {
        check_finite(&m)?;
        let sv = singular_values(&m);
        let max = sv.iter().copied().fold(0.0, f64::max);
        let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
        if !(max > 0.0) || !(min > tol.inv_floor * max) {
            return Err(CprError::Invertibility {
                min_singular: min,
                max_singular: max,
            });
        }
        let inv = m.clone().try_inverse().ok_or(CprError::Invertibility {
            min_singular: min,
            max_singular: max,
        })?;
        Ok(Self {
            m,
            inv,
            min_singular: min,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: identity(n),
            inv: identity(n),
            min_singular: 1.0,
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn inverse_matrix(&self) -> &CMatrix {
        &self.inv
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn min_singular(&self) -> f64 {
        self.min_singular
    }

    pub fn inverse(&self) -> Invertible {
        Invertible {
            m: self.inv.clone(),
            inv: self.m.clone(),
            min_singular: 1.0 / singular_values(&self.m).into_iter().fold(0.0, f64::max),
        }
    }

    pub fn mul(&self, other: &Invertible) -> Invertible {
        let m = &self.m * &other.m;
        let inv = &other.inv * &self.inv;
        let min_singular = self.min_singular * other.min_singular;
        Invertible { m, inv, min_singular }
    }

    /// The involution `sigma(g) = (g*)^{-1}`.
    pub fn sigma(&self) -> Invertible {
        Invertible {
            m: self.inv.adjoint(),
            inv: self.m.adjoint(),
            min_singular: 1.0 / singular_values(&self.m).into_iter().fold(0.0, f64::max),
        }
    }

    pub(crate) fn from_parts_unchecked(m: CMatrix, inv: CMatrix) -> Invertible {
        Invertible {
            m,
            inv,
            min_singular: f64::NAN,
        }
    }
}

/// Norms on the matrix algebra. All of them are unitarily invariant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    Operator,
    Frobenius,
    Schatten(f64),
}

impl NormKind {
    pub fn label(&self) -> String {
        match self {
            NormKind::Operator => "op".into(),
            NormKind::Frobenius => "fro".into(),
            NormKind::Schatten(p) => format!("s{p}"),
        }
    }

    /// The norm kinds exercised by the property suites.
    pub fn standard() -> [NormKind; 5] {
        [
            NormKind::Operator,
            NormKind::Frobenius,
            NormKind::Schatten(1.0),
            NormKind::Schatten(2.0),
            NormKind::Schatten(4.0),
        ]
    }

    pub fn of_singular_values(&self, sv: &[f64]) -> f64 {
        match *self {
            NormKind::Operator => sv.iter().copied().fold(0.0, f64::max),
            NormKind::Frobenius => sv.iter().map(|s| s * s).sum::<f64>().sqrt(),
            NormKind::Schatten(p) => {
                let max = sv.iter().copied().fold(0.0, f64::max);
                if max == 0.0 {
                    return 0.0;
                }
                // scaled to avoid overflow for large p
                max * sv.iter().map(|s| (s / max).powf(p)).sum::<f64>().powf(1.0 / p)
            }
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for NormKind {
    type Err = CprError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "op" | "operator" => Ok(NormKind::Operator),
            "fro" | "frobenius" => Ok(NormKind::Frobenius),
            _ => {
                let p: f64 = s
                    .strip_prefix('s')
                    .and_then(|p| p.parse().ok())
                    .ok_or_else(|| CprError::Config(format!("unknown norm '{s}'")))?;
                if !(p >= 1.0) || !p.is_finite() {
                    return Err(CprError::Config(format!("Schatten exponent {p} < 1")));
                }
                Ok(NormKind::Schatten(p))
            }
        }
    }
}

impl Serialize for NormKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for NormKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    SVD::new(m.clone(), false, false)
        .singular_values
        .iter()
        .copied()
        .collect()
}

pub fn norm(m: &CMatrix, kind: NormKind) -> f64 {
    match kind {
        NormKind::Frobenius => frobenius(m),
        _ => kind.of_singular_values(&singular_values(m)),
    }
}

/// Norm of a Hermitian matrix; singular values are the absolute eigenvalues.
pub fn norm_hermitian(h: &Hermitian, kind: NormKind) -> Result<f64> {
    if kind == NormKind::Frobenius {
        return Ok(h.frobenius());
    }
    let (eig, _) = spectral(h)?;
    let sv: Vec<f64> = eig.iter().map(|v| v.abs()).collect();
    Ok(kind.of_singular_values(&sv))
}

/// Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix.
pub fn spectral(h: &Hermitian) -> Result<(Vec<f64>, CMatrix)> {
    let n = h.dim();
    let eig =
        SymmetricEigen::try_new(h.matrix().clone(), f64::EPSILON, 1000 * n.max(1)).ok_or(CprError::Eigensolver {
            dim: n,
            frobenius: h.frobenius(),
        })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((values, vectors))
}

/// `f(X) = V diag(f(lambda)) V*`, symmetrized.
pub fn hermitian_function(h: &Hermitian, f: impl Fn(f64) -> f64) -> Result<Hermitian> {
    let (values, v) = spectral(h)?;
    Ok(Hermitian::symmetrize(apply_spectrum(&v, values.iter().map(|&l| f(l)))))
}

fn apply_spectrum(v: &CMatrix, diag: impl Iterator<Item = f64>) -> CMatrix {
    let mut scaled = v.clone();
    for (j, d) in diag.enumerate() {
        scaled.column_mut(j).scale_mut(d);
    }
    scaled * v.adjoint()
}

pub fn herm_exp(x: &Hermitian) -> Result<PositiveDefinite> {
    let (values, v) = spectral(x)?;
    let m = apply_spectrum(&v, values.iter().map(|l| l.exp()));
    let min_eigenvalue = values.first().map(|l| l.exp()).unwrap_or(1.0);
    Ok(PositiveDefinite {
        h: Hermitian::symmetrize(m),
        min_eigenvalue,
    })
}

pub fn herm_log(p: &PositiveDefinite) -> Result<Hermitian> {
    let (values, v) = spectral(p.hermitian())?;
    if let Some(&min) = values.first() {
        if !(min > 0.0) {
            return Err(CprError::Positivity {
                min_eigenvalue: min,
                floor: 0.0,
            });
        }
    }
    Ok(Hermitian::symmetrize(apply_spectrum(&v, values.iter().map(|l| l.ln()))))
}

/// `p^{1/2}`.
pub fn herm_sqrt(p: &PositiveDefinite) -> Result<PositiveDefinite> {
    herm_exp(&herm_log(p)?.scale(0.5))
}

/// `ad_X(Y) = XY - YX`.
pub fn ad(x: &CMatrix, y: &CMatrix) -> Result<CMatrix> {
    if x.shape() != y.shape() {
        return Err(CprError::DimensionMismatch {
            expected: x.nrows(),
            found: y.nrows(),
        });
    }
    Ok(x * y - y * x)
}

/// `Ad_g(X) = g X g^{-1}`.
pub fn adjoint_action(g: &Invertible, x: &CMatrix) -> Result<CMatrix> {
    if g.dim() != x.nrows() {
        return Err(CprError::DimensionMismatch {
            expected: g.dim(),
            found: x.nrows(),
        });
    }
    Ok(g.matrix() * x * g.inverse_matrix())
}

/// Checks invertibility of a raw matrix before applying `Ad`.
pub fn adjoint_action_raw(g: &CMatrix, x: &CMatrix) -> Result<CMatrix> {
    adjoint_action(&Invertible::new(g.clone())?, x)
}

/// Orthonormal (Frobenius) real coordinates on a coordinate subspace of the
/// Hermitian matrices: `E_ii`, `(E_ij + E_ji)/sqrt 2`, `i(E_ij - E_ji)/sqrt 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct HermBasis {
    n: usize,
    pairs: Vec<(usize, usize)>,
}

impl HermBasis {
    /// All `n^2` coordinates of the `n x n` Hermitian matrices.
    pub fn full(n: usize) -> Self {
        let mut pairs = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i..n {
                pairs.push((i, j));
            }
        }
        Self { n, pairs }
    }

    /// Coordinates supported on the given index pairs `(i, j)` with `i <= j`.
    pub fn from_pairs(n: usize, pairs: Vec<(usize, usize)>) -> Self {
        debug_assert!(pairs.iter().all(|&(i, j)| i <= j && j < n));
        Self { n, pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.iter().map(|&(i, j)| if i == j { 1 } else { 2 }).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn coords(&self, m: &CMatrix) -> Vec<f64> {
        let s = std::f64::consts::SQRT_2;
        let mut out = Vec::with_capacity(self.len());
        for &(i, j) in &self.pairs {
            if i == j {
                out.push(m[(i, i)].re);
            } else {
                let z = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
                out.push(s * z.re);
                out.push(s * z.im);
            }
        }
        out
    }

    pub fn matrix(&self, c: &[f64]) -> CMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut m = CMatrix::zeros(self.n, self.n);
        let mut k = 0;
        for &(i, j) in &self.pairs {
            if i == j {
                m[(i, i)] = C64::new(c[k], 0.0);
                k += 1;
            } else {
                let z = C64::new(c[k] * s, c[k + 1] * s);
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
                k += 2;
            }
        }
        m
    }

    /// Scale of each coordinate relative to the plain entries: `1` on the
    /// diagonal, `sqrt 2` off it.
    pub fn weights(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for &(i, j) in &self.pairs {
            if i == j {
                out.push(1.0);
            } else {
                out.push(std::f64::consts::SQRT_2);
                out.push(std::f64::consts::SQRT_2);
            }
        }
        out
    }

    /// Coordinates without the `sqrt 2` weights, exact for Hermitian input.
    pub fn raw_coords(&self, m: &CMatrix) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for &(i, j) in &self.pairs {
            if i == j {
                out.push(m[(i, i)].re);
            } else {
                let z = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
                out.push(z.re);
                out.push(z.im);
            }
        }
        out
    }

    pub fn raw_matrix(&self, c: &[f64]) -> CMatrix {
        let mut m = CMatrix::zeros(self.n, self.n);
        let mut k = 0;
        for &(i, j) in &self.pairs {
            if i == j {
                m[(i, i)] = C64::new(c[k], 0.0);
                k += 1;
            } else {
                let z = C64::new(c[k], c[k + 1]);
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
                k += 2;
            }
        }
        m
    }
}

/// Role requested from [`random_instance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Unitary,
    Hermitian,
    Invertible,
    Positive,
}

impl FromStr for Role {
    type Err = CprError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unitary" => Ok(Role::Unitary),
            "hermitian" => Ok(Role::Hermitian),
            "invertible" => Ok(Role::Invertible),
            "positive" => Ok(Role::Positive),
            _ => Err(CprError::Config(format!("unknown role '{s}'"))),
        }
    }
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `index` under `seed`, so sample `i` draws the same
/// numbers no matter which thread evaluates it.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Entries `(N(0,1) + i N(0,1)) / sqrt 2`.
pub fn gaussian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * s, im * s)
    })
}

/// Haar-distributed unitary: QR of a Gaussian matrix with the phases of
/// `diag(R)` moved into `Q`.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Unitary {
    let qr = gaussian(n, rng).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        for z in q.column_mut(j).iter_mut() {
            *z *= phase;
        }
    }
    Unitary::new(q).expect("QR factor is unitary")
}

/// Gaussian Hermitian matrix scaled to a semicircle of radius about 2, with
/// its spectrum clipped to `[-2, 2]`.
pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Hermitian {
    let a = gaussian(n, rng);
    let h = Hermitian::symmetrize(hermitian_part(&a).scale((2.0 / n as f64).sqrt()));
    hermitian_function(&h, |l| l.clamp(-2.0, 2.0)).expect("eigensolver on Gaussian input")
}

/// Gaussian Hermitian matrix, unclipped and normalized to unit Frobenius norm.
pub fn random_direction<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Hermitian {
    let h = hermitian_part(&gaussian(n, rng));
    let f = frobenius(&h);
    Hermitian::symmetrize(if f > 0.0 { h.unscale(f) } else { identity(n) })
}

pub fn random_positive<R: Rng + ?Sized>(n: usize, rng: &mut R) -> PositiveDefinite {
    herm_exp(&random_hermitian(n, rng)).expect("eigensolver on clipped input")
}

/// `Q e^S` with `Q` Haar and `S` clipped Hermitian; condition number at most `e^4`.
pub fn random_invertible<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Invertible {
    let q = random_unitary(n, rng);
    let s = random_hermitian(n, rng);
    let e = herm_exp(&s).expect("eigensolver on clipped input");
    let e_inv = herm_exp(&s.scale(-1.0)).expect("eigensolver on clipped input");
    let m = q.matrix() * e.matrix();
    let inv = e_inv.matrix() * q.matrix().adjoint();
    Invertible {
        m,
        inv,
        min_singular: e.min_eigenvalue(),
    }
}

/// Deterministic instance of the requested role.
pub fn random_instance(dim: usize, seed: u64, role: Role) -> Result<CMatrix> {
    if dim == 0 {
        return Err(CprError::Config("dim must be at least 1".into()));
    }
    let mut rng = seeded_rng(seed);
    Ok(match role {
        Role::Unitary => random_unitary(dim, &mut rng).into_matrix(),
        Role::Hermitian => random_hermitian(dim, &mut rng).into_matrix(),
        Role::Invertible => random_invertible(dim, &mut rng).m,
        Role::Positive => random_positive(dim, &mut rng).matrix().clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn real(n: usize, data: &[f64]) -> CMatrix {
        CMatrix::from_row_iterator(n, n, data.iter().map(|&v| c(v)))
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let e = herm_exp(&Hermitian::zeros(2)).unwrap();
        assert!(relative_error(e.matrix(), &identity(2)) < 1e-15);
    }

    #[test]
    fn exp_of_diagonal() {
        let x = Hermitian::from_real_diagonal(&[2f64.ln(), 3f64.ln()]);
        let e = herm_exp(&x).unwrap();
        assert!(relative_error(e.matrix(), &real(2, &[2.0, 0.0, 0.0, 3.0])) < 1e-14);
    }

    #[test]
    fn exp_of_swap_matches_series() {
        // Taylor series oracle, summed to convergence
        let x = real(2, &[0.0, 1.0, 1.0, 0.0]);
        let mut term = identity(2);
        let mut sum = identity(2);
        for k in 1..40 {
            term = &term * &x / c(k as f64);
            sum += &term;
        }
        let expected = real(2, &[1f64.cosh(), 1f64.sinh(), 1f64.sinh(), 1f64.cosh()]);
        assert!(relative_error(&sum, &expected) < 1e-14);
        let e = herm_exp(&Hermitian::new(x).unwrap()).unwrap();
        assert!(relative_error(e.matrix(), &sum) < 1e-12);
    }

    #[test]
    fn log_of_identity_and_diagonal() {
        let l = herm_log(&PositiveDefinite::identity(3)).unwrap();
        assert!(l.frobenius() < 1e-15);
        let p = PositiveDefinite::new(real(2, &[4.0, 0.0, 0.0, 9.0])).unwrap();
        let l = herm_log(&p).unwrap();
        let expected = real(2, &[4f64.ln(), 0.0, 0.0, 9f64.ln()]);
        assert!(relative_error(l.matrix(), &expected) < 1e-14);
    }

    #[test]
    fn log_via_eigenbasis() {
        // eigenvectors (1,1)/sqrt2 and (1,-1)/sqrt2 with eigenvalues 3 and 1
        let p = PositiveDefinite::new(real(2, &[2.0, 1.0, 1.0, 2.0])).unwrap();
        let l3 = 3f64.ln();
        let expected = real(2, &[l3 / 2.0, l3 / 2.0, l3 / 2.0, l3 / 2.0]);
        let l = herm_log(&p).unwrap();
        assert!(relative_error(l.matrix(), &expected) < 1e-14);
    }

    #[test]
    fn log_rejects_nonpositive() {
        assert!(matches!(
            PositiveDefinite::new(real(2, &[1.0, 0.0, 0.0, -1.0])),
            Err(CprError::Positivity { .. })
        ));
    }

    #[test]
    fn norm_examples() {
        let m = real(2, &[3.0, 0.0, 0.0, -4.0]);
        assert_eq!(norm(&m, NormKind::Operator), 4.0);
        let m = real(2, &[3.0, 0.0, 0.0, 4.0]);
        assert!((norm(&m, NormKind::Schatten(1.0)) - 7.0).abs() < 1e-14);
    }

    #[test]
    fn schatten_two_is_frobenius() {
        let g = gaussian(4, &mut seeded_rng(5));
        let entrywise: f64 = g.iter().map(|z| z.re * z.re + z.im * z.im).sum::<f64>().sqrt();
        assert!((norm(&g, NormKind::Schatten(2.0)) - entrywise).abs() <= 1e-12 * entrywise);
    }

    #[test]
    fn ad_and_adjoint_action_basics() {
        let x = gaussian(3, &mut seeded_rng(1));
        assert!(frobenius(&ad(&x, &x).unwrap()) < 1e-15);
        let same = adjoint_action(&Invertible::identity(3), &x).unwrap();
        assert_eq!(same, x);
        assert!(matches!(
            adjoint_action_raw(&CMatrix::zeros(3, 3), &x),
            Err(CprError::Invertibility { .. })
        ));
    }

    #[test]
    fn unitary_conjugation_keeps_hermitian() {
        let mut rng = seeded_rng(9);
        let u = random_unitary(4, &mut rng);
        let x = random_hermitian(4, &mut rng);
        let y = adjoint_action(&u.to_invertible(), x.matrix()).unwrap();
        assert!(frobenius(&(&y - y.adjoint())) <= 1e-12);
    }

    #[test]
    fn random_instances() {
        let u = random_instance(2, 42, Role::Unitary).unwrap();
        assert!(frobenius(&(u.adjoint() * &u - identity(2))) <= 1e-12);
        let p = PositiveDefinite::new(random_instance(3, 7, Role::Positive).unwrap()).unwrap();
        let (eig, _) = spectral(p.hermitian()).unwrap();
        for l in eig {
            assert!(l >= (-2f64).exp() * (1.0 - 1e-12) && l <= 2f64.exp() * (1.0 + 1e-12));
        }
        for role in [Role::Unitary, Role::Hermitian, Role::Invertible, Role::Positive] {
            assert_eq!(
                random_instance(3, 11, role).unwrap(),
                random_instance(3, 11, role).unwrap()
            );
        }
        assert!(random_instance(0, 1, Role::Unitary).is_err());
    }

    #[test]
    fn invertible_condition_bound() {
        let g = random_invertible(6, &mut seeded_rng(3));
        let sv = singular_values(g.matrix());
        let cond = sv.iter().copied().fold(0.0, f64::max) / sv.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(cond <= 4f64.exp() * (1.0 + 1e-10));
        assert!(relative_error(&(g.matrix() * g.inverse_matrix()), &identity(6)) < 1e-12);
    }

    #[test]
    fn wrappers_reject_large_repairs() {
        let m = real(2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(Hermitian::new(m.clone()), Err(CprError::NotHermitian { .. })));
        assert!(matches!(Unitary::new(m.clone()), Err(CprError::NotUnitary { .. })));
        let mut nearly = identity(2);
        nearly[(0, 1)] = c(1e-9);
        let u = Unitary::new(nearly).unwrap();
        assert!(u.repair() > 0.0 && u.defect() < 1e-12);
        let mut nan = identity(2);
        nan[(0, 0)] = c(f64::NAN);
        assert!(matches!(Hermitian::new(nan), Err(CprError::InvalidMatrix(_))));
    }

    #[test]
    fn sigma_is_an_involution() {
        let g = random_invertible(4, &mut seeded_rng(21));
        let back = g.sigma().sigma();
        assert!(relative_error(back.matrix(), g.matrix()) <= 1e-12);
    }

    #[test]
    fn norm_kind_parsing() {
        assert_eq!("op".parse::<NormKind>().unwrap(), NormKind::Operator);
        assert_eq!("s4".parse::<NormKind>().unwrap(), NormKind::Schatten(4.0));
        assert!("s0.5".parse::<NormKind>().is_err());
        assert!("max".parse::<NormKind>().is_err());
    }
}
