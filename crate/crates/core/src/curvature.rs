//! Semi-negative curvature of `G/U` for the Hermitian part `p = Herm(n)`
//! with a unitarily invariant norm, checked through three equivalent
//! conditions on `ad_X`:
//!
//! * (2) `-(ad_X)^2` is dissipative: `||(1 + t (ad_X)^2) Z|| >= ||Z||`,
//! * (3) `1 + (ad_X)^2` is expansive,
//! * (4) `sinh(ad_X) / ad_X` is expansive.
//!
//! In the Frobenius norm all three operators are symmetric and the checks
//! reduce to eigenvalue bounds. Other norms are sampled.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{CprError, Result};
use crate::linalg::{norm, random_direction, random_hermitian, sample_rng, CMatrix, HermBasis, Hermitian, NormKind};
use crate::par::map_indices;

/// Ratios at or above this count as expansive.
pub const EXPANSIVE_TOL: f64 = 1e-9;
/// Allowed asymmetry and negative eigenvalue noise of `(ad_X)^2`.
pub const SPECTRAL_TOL: f64 = 1e-10;
/// Below this `|t|`, `sinh(t)/t` is evaluated by its Taylor series.
pub const SERIES_CUTOFF: f64 = 1e-4;

/// A real-linear map on `Herm(n)`, stored as its matrix in the orthonormal
/// coordinates of [`HermBasis::full`].
#[derive(Debug, Clone, PartialEq)]
pub struct HermOperator {
    basis: HermBasis,
    matrix: DMatrix<f64>,
    /// The same map in unweighted coordinates, used by [`Self::apply`] so
    /// that diagonal operators act without rounding.
    raw: DMatrix<f64>,
    eigenvalues: Vec<f64>,
}

impl HermOperator {
    fn from_matrix(basis: HermBasis, matrix: DMatrix<f64>) -> Self {
        let sym = (&matrix + matrix.transpose()) * 0.5;
        let eigenvalues = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
        Self::from_parts(basis, matrix, eigenvalues)
    }

    fn from_parts(basis: HermBasis, matrix: DMatrix<f64>, mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        let w = basis.weights();
        let raw = DMatrix::from_fn(matrix.nrows(), matrix.ncols(), |i, j| matrix[(i, j)] * (w[j] / w[i]));
        Self {
            basis,
            matrix,
            raw,
            eigenvalues,
        }
    }

    fn lift(n: usize, f: impl Fn(&CMatrix) -> CMatrix) -> Self {
        let basis = HermBasis::full(n);
        let len = basis.len();
        let mut matrix = DMatrix::zeros(len, len);
        let mut unit = vec![0.0; len];
        for k in 0..len {
            unit[k] = 1.0;
            let image = basis.coords(&f(&basis.matrix(&unit)));
            unit[k] = 0.0;
            matrix.column_mut(k).copy_from_slice(&image);
        }
        Self::from_matrix(basis, matrix)
    }

    pub fn identity(n: usize) -> Self {
        let basis = HermBasis::full(n);
        let len = basis.len();
        Self::from_matrix(basis, DMatrix::identity(len, len))
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `max |M - M^T|`, zero for a Frobenius self-adjoint operator.
    pub fn asymmetry(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).amax()
    }

    /// Smallest `|eigenvalue|`, the Frobenius lower bound `||T Z|| >= b ||Z||`
    /// for symmetric `T`.
    pub fn min_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().map(|e| e.abs()).fold(f64::INFINITY, f64::min)
    }

    pub fn apply(&self, z: &Hermitian) -> Hermitian {
        let c = nalgebra::DVector::from_vec(self.basis.raw_coords(z.matrix()));
        let out = &self.raw * c;
        Hermitian::symmetrize(self.basis.raw_matrix(out.as_slice()))
    }

    /// `1 + t T`.
    pub fn shifted(&self, t: f64) -> HermOperator {
        let len = self.matrix.nrows();
        let eig = self.eigenvalues.iter().map(|e| 1.0 + t * e).collect();
        Self::from_parts(self.basis.clone(), DMatrix::identity(len, len) + &self.matrix * t, eig)
    }

    /// `f(T)` through the eigendecomposition of the symmetric part. The
    /// spectrum is `f` of the old one, which stays accurate at the bottom
    /// even when `f` is huge at the top.
    pub fn spectral_map(&self, f: impl Fn(f64) -> f64) -> HermOperator {
        let sym = (&self.matrix + self.matrix.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let fd = eig.eigenvalues.map(&f);
        let m = &eig.eigenvectors * DMatrix::from_diagonal(&fd) * eig.eigenvectors.transpose();
        Self::from_parts(self.basis.clone(), m, fd.iter().copied().collect())
    }
}

/// `(ad_X)^2` restricted to the Hermitian matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct AdOperator {
    pub base: Hermitian,
    pub op: HermOperator,
}

impl AdOperator {
    pub fn eigenvalues(&self) -> &[f64] {
        self.op.eigenvalues()
    }

    /// `1 + (ad_X)^2`.
    pub fn one_plus(&self) -> HermOperator {
        self.op.shifted(1.0)
    }
}

pub fn ad_squared(x: &Hermitian) -> AdOperator {
    let xm = x.matrix();
    let op = HermOperator::lift(x.dim(), |z| {
        let c = xm * z - z * xm;
        xm * &c - c * xm
    });
    AdOperator { base: x.clone(), op }
}

/// `sinh(sqrt s) / sqrt s`, which is `sinh(t)/t` at `s = t^2`.
pub fn sinhc_of_square(s: f64) -> f64 {
    let s = s.max(0.0);
    let t = s.sqrt();
    if t < SERIES_CUTOFF {
        1.0 + s / 6.0 + s * s / 120.0
    } else {
        t.sinh() / t
    }
}

/// `sinh(ad_X) / ad_X` on `Herm(n)`. The function is even, so it is a
/// function of `(ad_X)^2`.
pub fn sinh_ratio(x: &Hermitian) -> HermOperator {
    ad_squared(x).op.spectral_map(sinhc_of_square)
}

/// Smallest sampled `||T Z|| / ||Z||` plus the spectral invertibility bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpansivityResult {
    pub norm: NormKind,
    pub samples: usize,
    pub min_ratio: f64,
    pub min_abs_eigenvalue: f64,
    pub pass: bool,
}

fn check_samples(samples: usize) -> Result<()> {
    if samples == 0 {
        return Err(CprError::Config("samples must be at least 1".into()));
    }
    Ok(())
}

fn ratio(t: &HermOperator, z: &Hermitian, kind: NormKind) -> f64 {
    norm(t.apply(z).matrix(), kind) / norm(z.matrix(), kind)
}

pub fn expansivity_check(t: &HermOperator, kind: NormKind, samples: usize, seed: u64) -> Result<ExpansivityResult> {
    check_samples(samples)?;
    let n = t.dim();
    let ratios = map_indices(samples, |i| {
        let z = random_direction(n, &mut sample_rng(seed, i as u64));
        ratio(t, &z, kind)
    });
    let min_ratio = ratios.into_iter().fold(f64::INFINITY, min_nan);
    let min_abs_eigenvalue = t.min_abs_eigenvalue();
    Ok(ExpansivityResult {
        norm: kind,
        samples,
        min_ratio,
        min_abs_eigenvalue,
        pass: min_ratio >= 1.0 - EXPANSIVE_TOL && min_abs_eigenvalue > 0.0,
    })
}

fn min_nan(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NEG_INFINITY
    } else {
        a.min(b)
    }
}

/// Nine log-spaced points `10^-2 .. 10^2`.
pub fn default_t_grid() -> Vec<f64> {
    (0..9).map(|k| 10f64.powf(-2.0 + 0.5 * k as f64)).collect()
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() || t_grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(CprError::Config(format!(
            "t grid must be non-empty and inside (0, inf), got {t_grid:?}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DissipativityResult {
    pub norm: NormKind,
    pub samples: usize,
    pub t_grid: Vec<f64>,
    /// Smallest ratio per grid point.
    pub min_ratio_per_t: Vec<f64>,
    pub min_ratio: f64,
    pub pass: bool,
}

/// `||(1 - tA) Z|| >= ||Z||` with `A = -(ad_X)^2`.
pub fn dissipativity_check(
    x: &Hermitian,
    kind: NormKind,
    samples: usize,
    t_grid: &[f64],
    seed: u64,
) -> Result<DissipativityResult> {
    check_samples(samples)?;
    check_grid(t_grid)?;
    let ad2 = ad_squared(x);
    let ops: Vec<HermOperator> = t_grid.iter().map(|&t| ad2.op.shifted(t)).collect();
    let n = x.dim();
    let rows = map_indices(samples, |i| {
        let z = random_direction(n, &mut sample_rng(seed, i as u64));
        ops.iter().map(|op| ratio(op, &z, kind)).collect::<Vec<f64>>()
    });
    let mut per_t = vec![f64::INFINITY; t_grid.len()];
    for row in rows {
        for (m, r) in per_t.iter_mut().zip(row) {
            *m = min_nan(*m, r);
        }
    }
    let min_ratio = per_t.iter().copied().fold(f64::INFINITY, min_nan);
    Ok(DissipativityResult {
        norm: kind,
        samples,
        t_grid: t_grid.to_vec(),
        min_ratio_per_t: per_t,
        min_ratio,
        pass: min_ratio >= 1.0 - EXPANSIVE_TOL,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub criterion: String,
    pub min_ratio: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureReport {
    pub dim: usize,
    pub norm: NormKind,
    pub samples: usize,
    pub seed: u64,
    pub t_grid: Vec<f64>,
    pub criteria: Vec<CriterionResult>,
    /// Smallest eigenvalue of `(ad_X)^2` seen; should be `>= -1e-10`.
    pub ad_squared_min_eigenvalue: f64,
    pub ad_squared_max_asymmetry: f64,
    /// Smallest eigenvalue of `1 + (ad_X)^2`; the Frobenius certificate of (3).
    pub one_plus_min_eigenvalue: f64,
    /// Smallest eigenvalue of `sinh(ad_X)/ad_X`; the Frobenius certificate of (4).
    pub sinh_ratio_min_eigenvalue: f64,
    pub spectral_pass: bool,
    /// All three criteria reached the same verdict.
    pub consistent: bool,
    pub pass: bool,
}

struct SampleOutcome {
    dissipative: Vec<f64>,
    one_plus: f64,
    sinh: f64,
    ad_min_eig: f64,
    asym: f64,
    one_plus_eig: f64,
    sinh_eig: f64,
}

/// One `(X, Z)` pair per sample. `X` is a random Hermitian matrix at a
/// log-uniform scale in `[0.1, 10]` so that both the linear and the
/// exponential regime of `sinh` get exercised.
pub fn curvature_certificate(dim: usize, kind: NormKind, samples: usize, seed: u64) -> Result<CurvatureReport> {
    check_samples(samples)?;
    if dim == 0 {
        return Err(CprError::Config("dim must be at least 1".into()));
    }
    let t_grid = default_t_grid();
    let outcomes = map_indices(samples, |i| {
        use rand::Rng;
        let mut rng = sample_rng(seed, i as u64);
        let scale = 10f64.powf(rng.random_range(-1.0..=1.0));
        let x = random_hermitian(dim, &mut rng).scale(scale);
        let z = random_direction(dim, &mut rng);
        let ad2 = ad_squared(&x);
        let one_plus = ad2.one_plus();
        let sinh = ad2.op.spectral_map(sinhc_of_square);
        SampleOutcome {
            dissipative: t_grid.iter().map(|&t| ratio(&ad2.op.shifted(t), &z, kind)).collect(),
            one_plus: ratio(&one_plus, &z, kind),
            sinh: ratio(&sinh, &z, kind),
            ad_min_eig: ad2.eigenvalues()[0],
            asym: ad2.op.asymmetry(),
            one_plus_eig: one_plus.eigenvalues()[0],
            sinh_eig: sinh.eigenvalues()[0],
        }
    });
    let mut dis = f64::INFINITY;
    let (mut c3, mut c4) = (f64::INFINITY, f64::INFINITY);
    let (mut ad_min, mut asym) = (f64::INFINITY, 0.0f64);
    let (mut op_eig, mut sinh_eig) = (f64::INFINITY, f64::INFINITY);
    for o in &outcomes {
        dis = o.dissipative.iter().copied().fold(dis, min_nan);
        c3 = min_nan(c3, o.one_plus);
        c4 = min_nan(c4, o.sinh);
        ad_min = min_nan(ad_min, o.ad_min_eig);
        asym = if o.asym.is_nan() {
            f64::INFINITY
        } else {
            asym.max(o.asym)
        };
        op_eig = min_nan(op_eig, o.one_plus_eig);
        sinh_eig = min_nan(sinh_eig, o.sinh_eig);
    }
    let criterion = |name: &str, r: f64| CriterionResult {
        criterion: name.to_string(),
        min_ratio: r,
        pass: r >= 1.0 - EXPANSIVE_TOL,
    };
    let criteria = vec![
        criterion("dissipative", dis),
        criterion("one_plus_ad_squared_expansive", c3),
        criterion("sinh_ratio_expansive", c4),
    ];
    let consistent = criteria.iter().all(|c| c.pass == criteria[0].pass);
    let spectral_pass =
        ad_min >= -SPECTRAL_TOL && asym <= SPECTRAL_TOL && op_eig >= 1.0 - 1e-12 && sinh_eig >= 1.0 - 1e-12;
    let pass = consistent && criteria[0].pass && spectral_pass;
    Ok(CurvatureReport {
        dim,
        norm: kind,
        samples,
        seed,
        t_grid,
        criteria,
        ad_squared_min_eigenvalue: ad_min,
        ad_squared_max_asymmetry: asym,
        one_plus_min_eigenvalue: op_eig,
        sinh_ratio_min_eigenvalue: sinh_eig,
        spectral_pass,
        consistent,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{seeded_rng, spectral};

    fn diag(d: &[f64]) -> Hermitian {
        Hermitian::from_real_diagonal(d)
    }

    #[test]
    fn zero_base_is_zero_operator() {
        let a = ad_squared(&Hermitian::zeros(3));
        assert!(a.op.matrix().iter().all(|&v| v == 0.0));
        let s = sinh_ratio(&Hermitian::zeros(3));
        assert!((s.matrix() - DMatrix::identity(9, 9)).amax() < 1e-15);
    }

    #[test]
    fn two_by_two_spectrum() {
        // Brute force: [X,[X,Z]] for X = diag(1,-1) kills the diagonal and
        // multiplies each off-diagonal entry by (1 - (-1))^2 = 4.
        let a = ad_squared(&diag(&[1.0, -1.0]));
        let expected = [0.0, 0.0, 4.0, 4.0];
        for (e, x) in a.eigenvalues().iter().zip(expected) {
            assert!((e - x).abs() < 1e-14);
        }
        let s = sinh_ratio(&diag(&[1.0, -1.0]));
        let v = 2f64.sinh() / 2.0;
        for (e, x) in s.eigenvalues().iter().zip([1.0, 1.0, v, v]) {
            assert!((e - x).abs() < 1e-13);
        }
    }

    #[test]
    fn random_spectrum_matches_differences() {
        let mut rng = seeded_rng(1);
        for n in 2..=5 {
            let x = random_hermitian(n, &mut rng);
            let (lam, _) = spectral(&x).unwrap();
            let mut expected: Vec<f64> = lam
                .iter()
                .flat_map(|a| lam.iter().map(move |b| (a - b).powi(2)))
                .collect();
            expected.sort_by(f64::total_cmp);
            let a = ad_squared(&x);
            assert!(a.op.asymmetry() <= SPECTRAL_TOL);
            for (e, x) in a.eigenvalues().iter().zip(&expected) {
                assert!((e - x).abs() < 1e-8, "{e} vs {x}");
            }
        }
    }

    #[test]
    fn series_branch_is_continuous() {
        for t in [1e-5f64, 9.9e-5, 1e-4, 1.01e-4, 1e-3] {
            let direct = if t > 1e-6 { t.sinh() / t } else { 1.0 };
            assert!((sinhc_of_square(t * t) - direct).abs() < 1e-15);
        }
        assert_eq!(sinhc_of_square(0.0), 1.0);
    }

    #[test]
    fn identity_ratio_is_one() {
        let r = expansivity_check(&HermOperator::identity(3), NormKind::Operator, 20, 1).unwrap();
        assert_eq!(r.min_ratio, 1.0);
        assert!(r.pass);
        assert!(expansivity_check(&HermOperator::identity(3), NormKind::Operator, 0, 1).is_err());
    }

    #[test]
    fn frobenius_one_plus_is_expansive() {
        let x = random_hermitian(4, &mut seeded_rng(2)).scale(3.0);
        let t = ad_squared(&x).one_plus();
        assert!(t.eigenvalues()[0] >= 1.0 - 1e-12);
        let r = expansivity_check(&t, NormKind::Frobenius, 200, 3).unwrap();
        assert!(r.min_ratio >= 1.0 - 1e-12);
    }

    #[test]
    fn operator_norm_sinh_ratio_samples() {
        let x = random_hermitian(3, &mut seeded_rng(5)).scale(2.0);
        let r = expansivity_check(&sinh_ratio(&x), NormKind::Operator, 500, 6).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn dissipativity_cases() {
        let grid = [0.1, 1.0, 10.0];
        let r = dissipativity_check(&Hermitian::zeros(3), NormKind::Operator, 30, &grid, 1).unwrap();
        assert!(r.min_ratio_per_t.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        // commuting pair: A Z = 0
        let x = diag(&[1.0, 2.0, -3.0]);
        let t = ad_squared(&x).op.shifted(5.0);
        let z = diag(&[0.3, -1.0, 2.0]);
        assert!((ratio(&t, &z, NormKind::Operator) - 1.0).abs() < 1e-14);
        let x = random_hermitian(3, &mut seeded_rng(9));
        assert!(dissipativity_check(&x, NormKind::Operator, 500, &grid, 2).unwrap().pass);
        assert!(dissipativity_check(&x, NormKind::Operator, 5, &[0.0], 2).is_err());
    }

    #[test]
    fn certificates() {
        let r = curvature_certificate(1, NormKind::Frobenius, 5, 0).unwrap();
        assert!(r.pass && r.criteria.iter().all(|c| c.min_ratio == 1.0));
        let r = curvature_certificate(4, NormKind::Frobenius, 50, 1).unwrap();
        assert!(r.pass && r.spectral_pass, "{r:?}");
        let r = curvature_certificate(4, NormKind::Schatten(1.0), 50, 1).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn reports_are_reproducible() {
        let a = curvature_certificate(3, NormKind::Operator, 40, 11).unwrap();
        let b = curvature_certificate(3, NormKind::Operator, 40, 11).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
