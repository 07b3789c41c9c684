//! Polar, CPR and extended CPR splittings.
//!
//! Convention: `p = g* g`, so `g = u e^X e^Y` gives `p = e^Y e^{2X} e^Y`.
//!
//! The positive part is found by solving `R(Y) = E(log(e^{-Y} p e^{-Y})) = 0`
//! over `Y` in `p_B`. At the solution `X = ½ log(e^{-Y} p e^{-Y})` lies in
//! `ker E`. The main iteration is the damped fixed point
//! `Y <- Y + s·½R(Y)`, which is exact in one step when `p` commutes with `B`.
//! When it stops making progress the solver switches to a finite-difference
//! Newton iteration on the real coordinates of `p_B`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CprError, Result};
use crate::expectations::{ConditionalExpectation, ExpectationChain};
use crate::linalg::{
    frobenius, herm_exp, herm_log, herm_sqrt, relative_error, CMatrix, Hermitian, Invertible, PositiveDefinite,
    Tolerances, Unitary,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fallback {
    FixedPointOnly,
    NewtonFallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub residual_tol: f64,
    pub max_iterations: usize,
    pub damping_shrink: f64,
    pub fallback: Fallback,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            residual_tol: 1e-12,
            max_iterations: 200,
            damping_shrink: 0.5,
            fallback: Fallback::NewtonFallback,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.residual_tol > 0.0) {
            return Err(CprError::Config("residual_tol must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(CprError::Config("max_iterations must be at least 1".into()));
        }
        if !(self.damping_shrink > 0.0 && self.damping_shrink < 1.0) {
            return Err(CprError::Config("damping_shrink must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// `g = e^X u`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarFactors {
    pub x: Hermitian,
    pub u: Unitary,
}

impl PolarFactors {
    pub fn compose(&self) -> Result<CMatrix> {
        Ok(herm_exp(&self.x)?.matrix() * self.u.matrix())
    }
}

/// `X = ½ log(g g*)`, `u = e^{-X} g`.
pub fn polar_decompose(g: &Invertible) -> Result<PolarFactors> {
    let m = g.matrix();
    let ggs = PositiveDefinite::from_hermitian(Hermitian::symmetrize(m * m.adjoint()), &Tolerances::default())
        .map_err(|e| CprError::Conditioning(format!("g g* lost positivity: {e}")))?;
    let x = herm_log(&ggs)?.scale(0.5);
    let u = herm_exp(&x.scale(-1.0))?.matrix() * m;
    let u = Unitary::new(u).map_err(|e| CprError::Conditioning(format!("polar factor not unitary: {e}")))?;
    Ok(PolarFactors { x, u })
}

/// Output of the `Psi` splitting `p = e^Y e^{2X} e^Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiSplit {
    pub x: Hermitian,
    pub y: Hermitian,
    pub residual: f64,
    pub iterations: usize,
    pub used_newton: bool,
}

impl PsiSplit {
    pub fn compose(&self) -> Result<CMatrix> {
        let ey = herm_exp(&self.y)?;
        let e2x = herm_exp(&self.x.scale(2.0))?;
        Ok(ey.matrix() * e2x.matrix() * ey.matrix())
    }
}

struct Evaluation {
    y: Hermitian,
    log_inner: Hermitian,
    r: Hermitian,
    r_norm: f64,
}

struct ResidualMap<'a> {
    p: &'a PositiveDefinite,
    e: &'a ConditionalExpectation,
}

impl ResidualMap<'_> {
    fn eval(&self, y: Hermitian) -> Result<Evaluation> {
        let half = herm_exp(&y.scale(-1.0))?;
        let inner = half.matrix() * self.p.matrix() * half.matrix();
        let inner = PositiveDefinite::from_hermitian(Hermitian::symmetrize(inner), &Tolerances::default())
            .map_err(|e| CprError::Conditioning(format!("e^-Y p e^-Y lost positivity: {e}")))?;
        let log_inner = herm_log(&inner)?;
        let r = self.e.pinch_hermitian(&log_inner);
        let r_norm = r.frobenius();
        Ok(Evaluation {
            y,
            log_inner,
            r,
            r_norm,
        })
    }
}

const MIN_STEP: f64 = 1e-6;
const SLOW_RATIO: f64 = 0.5;
const SLOW_PATIENCE: usize = 3;

/// Solves `p = e^Y e^{2X} e^Y` with `Y` in `p_B` and `X` in `p_E`.
pub fn psi_split(p: &PositiveDefinite, e: &ConditionalExpectation, cfg: &SolverConfig) -> Result<PsiSplit> {
    psi_split_from(p, e, cfg, None)
}

/// [`psi_split`] from a caller-supplied starting point (projected onto `p_B`).
/// The default start is `½ E(log p)`.
pub fn psi_split_from(
    p: &PositiveDefinite,
    e: &ConditionalExpectation,
    cfg: &SolverConfig,
    start: Option<&Hermitian>,
) -> Result<PsiSplit> {
    cfg.validate()?;
    if p.dim() != e.dim() {
        return Err(CprError::DimensionMismatch {
            expected: e.dim(),
            found: p.dim(),
        });
    }
    let log_p = herm_log(p)?;
    let tol = cfg.residual_tol * (1.0 + log_p.frobenius());
    let map = ResidualMap { p, e };
    let y0 = match start {
        Some(y) => e.pinch_hermitian(y),
        None => e.pinch_hermitian(&log_p).scale(0.5),
    };

    let mut cur = map.eval(y0)?;
    let mut history = vec![cur.r_norm];
    let mut iterations = 0;
    let mut newton = false;
    let mut slow = 0;

    while cur.r_norm > tol {
        if iterations >= cfg.max_iterations {
            return Err(stall(iterations, history));
        }
        iterations += 1;
        let next = if newton {
            newton_step(&map, &cur, cfg)?
        } else {
            let next = damped_step(&map, &cur, cfg)?;
            match next {
                Some(n) if n.r_norm <= SLOW_RATIO * cur.r_norm || n.r_norm <= tol => {
                    slow = 0;
                    Some(n)
                }
                Some(n) => {
                    slow += 1;
                    if slow >= SLOW_PATIENCE && cfg.fallback == Fallback::NewtonFallback {
                        newton = true;
                    }
                    Some(n)
                }
                None if cfg.fallback == Fallback::NewtonFallback => {
                    newton = true;
                    newton_step(&map, &cur, cfg)?
                }
                None => None,
            }
        };
        match next {
            Some(n) => {
                cur = n;
                history.push(cur.r_norm);
            }
            None => return Err(stall(iterations, history)),
        }
    }

    let x = e.kernel_part(&cur.log_inner.scale(0.5));
    Ok(PsiSplit {
        x,
        y: cur.y,
        residual: cur.r_norm,
        iterations,
        used_newton: newton,
    })
}

fn stall(iterations: usize, residual_history: Vec<f64>) -> CprError {
    CprError::SolverStall {
        level: 2,
        iterations,
        residual_history,
    }
}

/// `Y + s·½R(Y)` with `s` shrinking until the residual decreases.
fn damped_step(map: &ResidualMap, cur: &Evaluation, cfg: &SolverConfig) -> Result<Option<Evaluation>> {
    let mut s = 1.0;
    while s >= MIN_STEP {
        let trial = cur.y.add(&cur.r.scale(0.5 * s));
        if let Ok(next) = map.eval(trial) {
            if next.r_norm < cur.r_norm {
                return Ok(Some(next));
            }
        }
        s *= cfg.damping_shrink;
    }
    Ok(None)
}

/// One Newton step with a central-difference Jacobian on the coordinates of
/// `p_B`; the linear solve is a QR solve whose failure is reported.
fn newton_step(map: &ResidualMap, cur: &Evaluation, cfg: &SolverConfig) -> Result<Option<Evaluation>> {
    let chart = map.e.b_coordinates();
    let m = chart.len();
    let y0 = chart.coords(&cur.y);
    let r0 = DVector::from_vec(chart.coords(&cur.r));
    let h = 1e-6 * (1.0 + cur.y.frobenius());
    let mut jac = DMatrix::<f64>::zeros(m, m);
    let mut probe = y0.clone();
    for k in 0..m {
        probe[k] = y0[k] + h;
        let plus = map.eval(chart.hermitian(&probe))?;
        probe[k] = y0[k] - h;
        let minus = map.eval(chart.hermitian(&probe))?;
        probe[k] = y0[k];
        let col = plus.r.sub(&minus.r);
        for (i, v) in chart.coords(&col).into_iter().enumerate() {
            jac[(i, k)] = v / (2.0 * h);
        }
    }
    let delta = jac
        .qr()
        .solve(&(-r0))
        .ok_or_else(|| CprError::Conditioning("singular Newton Jacobian on p_B".into()))?;
    let mut s = 1.0;
    while s >= MIN_STEP {
        let c: Vec<f64> = y0.iter().zip(delta.iter()).map(|(a, d)| a + s * d).collect();
        if let Ok(next) = map.eval(chart.hermitian(&c)) {
            if next.r_norm < cur.r_norm {
                return Ok(Some(next));
            }
        }
        s *= cfg.damping_shrink;
    }
    Ok(None)
}

/// `g = u e^{X_n} ... e^{X_2} e^{Y_1}`; `x` holds `X_n, ..., X_2` in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitFactors {
    pub u: Unitary,
    pub x: Vec<Hermitian>,
    pub y1: Hermitian,
    pub residual: f64,
    pub iterations: usize,
}

impl SplitFactors {
    pub fn compose(&self) -> Result<CMatrix> {
        let mut m = self.u.matrix().clone();
        for x in &self.x {
            m *= herm_exp(x)?.matrix();
        }
        m *= herm_exp(&self.y1)?.matrix();
        Ok(m)
    }

    pub fn reconstruction_error(&self, g: &CMatrix) -> Result<f64> {
        Ok(relative_error(&self.compose()?, g))
    }

    pub fn depth(&self) -> usize {
        self.x.len() + 1
    }

    /// The `Psi` factors with `u` dropped.
    pub fn positive_part(&self) -> PsiFactors {
        PsiFactors {
            x: self.x.clone(),
            y1: self.y1.clone(),
            residual: self.residual,
            iterations: self.iterations,
        }
    }
}

fn gram(g: &Invertible) -> Result<PositiveDefinite> {
    let m = g.matrix();
    PositiveDefinite::from_hermitian(Hermitian::symmetrize(m.adjoint() * m), &Tolerances::default())
        .map_err(|e| CprError::Conditioning(format!("g* g lost positivity: {e}")))
}

/// Depth-2 splitting `g = u e^X e^Y`.
pub fn cpr_split(g: &Invertible, e: &ConditionalExpectation, cfg: &SolverConfig) -> Result<SplitFactors> {
    let psi = psi_split(&gram(g)?, e, cfg)?;
    let u = g.matrix() * herm_exp(&psi.y.scale(-1.0))?.matrix() * herm_exp(&psi.x.scale(-1.0))?.matrix();
    let u = Unitary::new(u).map_err(|err| CprError::Conditioning(format!("unitary factor: {err}")))?;
    Ok(SplitFactors {
        u,
        x: vec![psi.x],
        y1: psi.y,
        residual: psi.residual,
        iterations: psi.iterations,
    })
}

/// Splitting along a chain, following the inductive construction: split at
/// the top level with `E_n`, split `e^{Y_{n-1}}` inside `G_{n-1}`, then
/// merge `u = u_n u_{n-1}` and replace `X_n` by `Ad_{u_{n-1}^{-1}} X_n`.
pub fn extended_split(g: &Invertible, chain: &ExpectationChain, cfg: &SolverConfig) -> Result<SplitFactors> {
    if g.dim() != chain.dim() {
        return Err(CprError::DimensionMismatch {
            expected: chain.dim(),
            found: g.dim(),
        });
    }
    split_level(g, chain, chain.depth(), cfg)
}

fn split_level(g: &Invertible, chain: &ExpectationChain, level: usize, cfg: &SolverConfig) -> Result<SplitFactors> {
    let e = chain.expectation(level)?;
    let top = cpr_split(g, &e, cfg).map_err(|err| err.at_level(level))?;
    let within = chain.level_expectation(level)?;
    let x_top = within.pinch_hermitian(&top.x[0]);
    if level == 2 {
        let y1 = chain.level_expectation(1)?.pinch_hermitian(&top.y1);
        return Ok(SplitFactors {
            x: vec![x_top],
            y1,
            ..top
        });
    }
    let h = herm_exp(&top.y1)?;
    let h_inv = herm_exp(&top.y1.scale(-1.0))?;
    let h = Invertible::from_parts_unchecked(h.matrix().clone(), h_inv.matrix().clone());
    let inner = split_level(&h, chain, level - 1, cfg)?;
    let u = top.u.mul(&inner.u);
    let x_moved = within.pinch_hermitian(&inner.u.inverse().conj_hermitian(&x_top));
    let mut x = Vec::with_capacity(level - 1);
    x.push(x_moved);
    x.extend(inner.x);
    Ok(SplitFactors {
        u,
        x,
        y1: inner.y1,
        residual: top.residual.max(inner.residual),
        iterations: top.iterations + inner.iterations,
    })
}

/// `p = e^{Y_1} e^{X_2} ... e^{X_{n-1}} e^{2X_n} e^{X_{n-1}} ... e^{X_2} e^{Y_1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiFactors {
    pub x: Vec<Hermitian>,
    pub y1: Hermitian,
    pub residual: f64,
    pub iterations: usize,
}

impl PsiFactors {
    pub fn compose(&self) -> Result<CMatrix> {
        let n = self.y1.dim();
        let mut left = herm_exp(&self.y1)?.matrix().clone();
        // X_2, ..., X_{n-1} on the left in ascending level order
        for x in self.x.iter().skip(1).rev() {
            left *= herm_exp(x)?.matrix();
        }
        let middle = match self.x.first() {
            Some(top) => herm_exp(&top.scale(2.0))?.matrix().clone(),
            None => CMatrix::identity(n, n),
        };
        Ok(&left * middle * left.adjoint())
    }
}

/// Splits `p` through the square root `g = p^{1/2}`, for which `g* g = p`.
pub fn extended_psi_split(p: &PositiveDefinite, chain: &ExpectationChain, cfg: &SolverConfig) -> Result<PsiFactors> {
    let root = herm_sqrt(p)?;
    let root_inv = herm_exp(&herm_log(p)?.scale(-0.5))?;
    let g = Invertible::from_parts_unchecked(root.matrix().clone(), root_inv.matrix().clone());
    Ok(extended_split(&g, chain, cfg)?.positive_part())
}

/// Residual reached by [`oracle_split`] before it reports success.
pub const ORACLE_TARGET: f64 = 1e-8;
const ORACLE_MAX_DIM: usize = 6;

/// Independent check of [`psi_split`]: derivative-free coordinate descent on
/// `||E(log(e^{-Y} p e^{-Y}))||_F^2` over the coordinates of `p_B`, from `Y = 0`.
/// Each sweep fits a parabola through three probes per coordinate.
pub fn oracle_split(p: &PositiveDefinite, e: &ConditionalExpectation) -> Result<(Hermitian, Hermitian)> {
    if p.dim() > ORACLE_MAX_DIM {
        return Err(CprError::Config(format!(
            "oracle limited to dim <= {ORACLE_MAX_DIM}, got {}",
            p.dim()
        )));
    }
    if p.dim() != e.dim() {
        return Err(CprError::DimensionMismatch {
            expected: e.dim(),
            found: p.dim(),
        });
    }
    let chart = e.b_coordinates();
    let m = chart.len();
    let objective = |c: &[f64]| -> f64 {
        let y = chart.hermitian(c);
        let inner = match herm_exp(&y.scale(-1.0)) {
            Ok(h) => h.matrix() * p.matrix() * h.matrix(),
            Err(_) => return f64::INFINITY,
        };
        let log = PositiveDefinite::new(inner)
            .and_then(|q| herm_log(&q))
            .map(|l| frobenius(&e.pinch_hermitian(&l).into_matrix()));
        match log {
            Ok(r) => r * r,
            Err(_) => f64::INFINITY,
        }
    };

    let mut c = vec![0.0; m];
    let mut f = objective(&c);
    let mut step = vec![0.5; m];
    for _sweep in 0..5000 {
        if f.sqrt() <= 1e-2 * ORACLE_TARGET {
            break;
        }
        let before = f;
        for k in 0..m {
            let h = step[k];
            let base = c[k];
            c[k] = base + h;
            let fp = objective(&c);
            c[k] = base - h;
            let fm = objective(&c);
            let curvature = (fp + fm - 2.0 * f) / (2.0 * h * h);
            let mut best = (f, base);
            if fp < best.0 {
                best = (fp, base + h);
            }
            if fm < best.0 {
                best = (fm, base - h);
            }
            if curvature > 0.0 {
                let vertex = base - (fp - fm) / (4.0 * curvature * h);
                c[k] = vertex;
                let fv = objective(&c);
                if fv < best.0 {
                    best = (fv, vertex);
                }
            }
            c[k] = best.1;
            let moved = (best.1 - base).abs();
            f = best.0;
            step[k] = if moved > 0.0 {
                (2.0 * moved).clamp(1e-13, 1.0)
            } else {
                (0.25 * h).max(1e-13)
            };
        }
        if f >= before && step.iter().all(|&s| s <= 1e-13) {
            break;
        }
    }
    let residual = f.sqrt();
    if !(residual <= ORACLE_TARGET) {
        return Err(CprError::OracleInconclusive { residual });
    }
    let y = chart.hermitian(&c);
    let inner = herm_exp(&y.scale(-1.0))?;
    let q = PositiveDefinite::new(inner.matrix() * p.matrix() * inner.matrix())?;
    let x = e.kernel_part(&herm_log(&q)?.scale(0.5));
    Ok((x, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expectations::BlockPartition;
    use crate::linalg::{identity, random_invertible, seeded_rng, C64};

    fn real(n: usize, data: &[f64]) -> CMatrix {
        CMatrix::from_row_iterator(n, n, data.iter().map(|&v| C64::new(v, 0.0)))
    }

    fn diag_e(n: usize) -> ConditionalExpectation {
        ConditionalExpectation::new(BlockPartition::diagonal(n))
    }

    #[test]
    fn polar_of_identity_and_diagonal() {
        let f = polar_decompose(&Invertible::identity(3)).unwrap();
        assert!(f.x.frobenius() < 1e-15);
        assert!(relative_error(f.u.matrix(), &identity(3)) < 1e-15);

        let g = Invertible::new(real(2, &[2.0, 0.0, 0.0, 0.5])).unwrap();
        let f = polar_decompose(&g).unwrap();
        let expected = real(2, &[2f64.ln(), 0.0, 0.0, -(2f64.ln())]);
        assert!(relative_error(f.x.matrix(), &expected) < 1e-14);
        assert!(relative_error(f.u.matrix(), &identity(2)) < 1e-14);
    }

    #[test]
    fn polar_random_reconstructs() {
        let g = random_invertible(5, &mut seeded_rng(3));
        let f = polar_decompose(&g).unwrap();
        assert!(relative_error(&f.compose().unwrap(), g.matrix()) <= 1e-10);
        assert!(f.u.defect() <= 1e-10);
    }

    #[test]
    fn psi_identity_and_commuting_cases() {
        let cfg = SolverConfig::default();
        let r = psi_split(&PositiveDefinite::identity(2), &diag_e(2), &cfg).unwrap();
        assert!(r.x.frobenius() == 0.0 && r.y.frobenius() == 0.0);

        let p = PositiveDefinite::new(real(2, &[4.0, 0.0, 0.0, 9.0])).unwrap();
        let r = psi_split(&p, &diag_e(2), &cfg).unwrap();
        assert!(r.iterations <= 1);
        assert!(r.x.frobenius() < 1e-14);
        let expected = real(2, &[2f64.ln(), 0.0, 0.0, 3f64.ln()]);
        assert!(relative_error(r.y.matrix(), &expected) < 1e-14);
    }

    #[test]
    fn psi_two_by_two_matches_oracle() {
        let p = PositiveDefinite::new(real(2, &[2.0, 1.0, 1.0, 2.0])).unwrap();
        let e = diag_e(2);
        let r = psi_split(&p, &e, &SolverConfig::default()).unwrap();
        assert!(relative_error(&r.compose().unwrap(), p.matrix()) < 1e-12);
        assert!(frobenius(&e.pinch(r.x.matrix()).unwrap()) < 1e-12);
        let (ox, oy) = oracle_split(&p, &e).unwrap();
        assert!(frobenius(&(ox.matrix() - r.x.matrix())) < 1e-8);
        assert!(frobenius(&(oy.matrix() - r.y.matrix())) < 1e-8);
    }

    #[test]
    fn oracle_commuting_cases() {
        let e = diag_e(2);
        let p = PositiveDefinite::new(real(2, &[4.0, 0.0, 0.0, 9.0])).unwrap();
        let (x, y) = oracle_split(&p, &e).unwrap();
        assert!(x.frobenius() < 1e-8);
        let expected = real(2, &[2f64.ln(), 0.0, 0.0, 3f64.ln()]);
        assert!(frobenius(&(y.matrix() - expected)) < 1e-8);
        assert!(oracle_split(&PositiveDefinite::identity(7), &diag_e(7)).is_err());
    }

    #[test]
    fn cpr_of_unitary_is_trivial() {
        let u = crate::linalg::random_unitary(3, &mut seeded_rng(2));
        let s = cpr_split(&u.to_invertible(), &diag_e(3), &SolverConfig::default()).unwrap();
        assert!(s.x[0].frobenius() < 1e-12 && s.y1.frobenius() < 1e-12);
        assert!(relative_error(s.u.matrix(), u.matrix()) < 1e-12);
    }

    #[test]
    fn cpr_random_round_trip() {
        let e = ConditionalExpectation::new(BlockPartition::parse("2,2", 4).unwrap());
        let g = random_invertible(4, &mut seeded_rng(11));
        let s = cpr_split(&g, &e, &SolverConfig::default()).unwrap();
        assert!(s.reconstruction_error(g.matrix()).unwrap() <= 1e-8);
        assert!(s.u.defect() <= 1e-9);
    }

    #[test]
    fn fixed_point_only_can_stall() {
        let e = ConditionalExpectation::new(BlockPartition::parse("2,2", 4).unwrap());
        let g = random_invertible(4, &mut seeded_rng(11));
        let cfg = SolverConfig {
            max_iterations: 1,
            fallback: Fallback::FixedPointOnly,
            ..SolverConfig::default()
        };
        match cpr_split(&g, &e, &cfg) {
            Err(CprError::SolverStall { residual_history, .. }) => {
                assert!(!residual_history.is_empty())
            }
            other => panic!("expected stall, got {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        let bad = SolverConfig {
            residual_tol: 0.0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            max_iterations: 0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn extended_depth_two_is_cpr() {
        let p = BlockPartition::parse("1,2", 3).unwrap();
        let g = random_invertible(3, &mut seeded_rng(5));
        let cfg = SolverConfig::default();
        let a = extended_split(&g, &ExpectationChain::single(p.clone()), &cfg).unwrap();
        let b = cpr_split(&g, &ConditionalExpectation::new(p), &cfg).unwrap();
        assert!(relative_error(a.u.matrix(), b.u.matrix()) < 1e-14);
        assert!(frobenius(&(a.x[0].matrix() - b.x[0].matrix())) < 1e-14);
    }

    #[test]
    fn extended_depth_three_round_trip() {
        let chain = ExpectationChain::parse("1,1,1,1;2,2", 4).unwrap();
        let g = random_invertible(4, &mut seeded_rng(19));
        let s = extended_split(&g, &chain, &SolverConfig::default()).unwrap();
        assert!(s.reconstruction_error(g.matrix()).unwrap() <= 1e-8);
        assert_eq!(s.x.len(), 2);
        for (i, x) in s.x.iter().enumerate() {
            let level = chain.depth() - i;
            let e = chain.expectation(level).unwrap();
            assert!(frobenius(&e.pinch(x.matrix()).unwrap()) <= 1e-10);
            assert!(chain.level_expectation(level).unwrap().in_algebra(x.matrix()));
        }
    }

    #[test]
    fn constructed_depth_two_recovers_factors() {
        let e = ConditionalExpectation::new(BlockPartition::parse("1,2,+", 4).unwrap());
        let mut rng = seeded_rng(31);
        let u0 = crate::linalg::random_unitary(4, &mut rng);
        let x0 = e.random_kernel_hermitian(&mut rng);
        let y0 = e.random_hermitian_b(&mut rng);
        let g = u0.matrix() * herm_exp(&x0).unwrap().matrix() * herm_exp(&y0).unwrap().matrix();
        let s = cpr_split(&Invertible::new(g).unwrap(), &e, &SolverConfig::default()).unwrap();
        assert!(relative_error(s.u.matrix(), u0.matrix()) < 1e-8);
        assert!(frobenius(&(s.x[0].matrix() - x0.matrix())) < 1e-8);
        assert!(frobenius(&(s.y1.matrix() - y0.matrix())) < 1e-8);
    }

    #[test]
    fn constructed_depth_three_recovers_factors() {
        let chain = ExpectationChain::parse("1,1,1,1,1;2,2,1", 5).unwrap();
        let mut rng = seeded_rng(37);
        let e3 = chain.expectation(3).unwrap();
        let e2 = chain.expectation(2).unwrap();
        let x3 = e3.random_kernel_hermitian(&mut rng);
        let x2 = e2.kernel_part(&chain.level_expectation(2).unwrap().random_hermitian_b(&mut rng));
        let y1 = e2.random_hermitian_b(&mut rng);
        let g = herm_exp(&x3).unwrap().matrix() * herm_exp(&x2).unwrap().matrix() * herm_exp(&y1).unwrap().matrix();
        let s = extended_split(&Invertible::new(g).unwrap(), &chain, &SolverConfig::default()).unwrap();
        assert!(relative_error(s.u.matrix(), &identity(5)) < 1e-8);
        assert!(frobenius(&(s.x[0].matrix() - x3.matrix())) < 1e-8);
        assert!(frobenius(&(s.x[1].matrix() - x2.matrix())) < 1e-8);
        assert!(frobenius(&(s.y1.matrix() - y1.matrix())) < 1e-8);
    }

    #[test]
    fn perturbed_restart_converges_to_same_split() {
        let e = ConditionalExpectation::new(BlockPartition::parse("2,1", 3).unwrap());
        let mut rng = seeded_rng(41);
        let p = crate::linalg::random_positive(3, &mut rng);
        let cfg = SolverConfig::default();
        let a = psi_split(&p, &e, &cfg).unwrap();
        let start = a.y.add(
            &e.pinch_hermitian(&crate::linalg::random_direction(3, &mut rng))
                .scale(0.1),
        );
        let b = psi_split_from(&p, &e, &cfg, Some(&start)).unwrap();
        assert!(frobenius(&(a.x.matrix() - b.x.matrix())) < 1e-8);
        assert!(frobenius(&(a.y.matrix() - b.y.matrix())) < 1e-8);
    }

    #[test]
    fn corner_split_keeps_remainder_out_of_y() {
        let e = ConditionalExpectation::new(BlockPartition::parse("1,1,+", 4).unwrap());
        let g = random_invertible(4, &mut seeded_rng(43));
        let s = cpr_split(&g, &e, &SolverConfig::default()).unwrap();
        assert!(s.reconstruction_error(g.matrix()).unwrap() <= 1e-8);
        // the remainder of a corner is not in B, so Y vanishes there
        let r = e.partition().remainder_range();
        for i in r.clone() {
            for j in r.clone() {
                assert!(s.y1.matrix()[(i, j)].norm() < 1e-12);
            }
        }
    }

    #[test]
    fn stall_reports_level() {
        let chain = ExpectationChain::parse("1,1,1,1;2,2", 4).unwrap();
        let g = random_invertible(4, &mut seeded_rng(47));
        let cfg = SolverConfig {
            max_iterations: 1,
            fallback: Fallback::FixedPointOnly,
            ..SolverConfig::default()
        };
        match extended_split(&g, &chain, &cfg) {
            Err(CprError::SolverStall { level, .. }) => assert!(level == 2 || level == 3),
            other => panic!("expected stall, got {other:?}"),
        }
    }

    #[test]
    fn extended_psi_of_identity() {
        let chain = ExpectationChain::parse("1,1,1;2,1", 3).unwrap();
        let f = extended_psi_split(&PositiveDefinite::identity(3), &chain, &SolverConfig::default()).unwrap();
        assert!(f.x.iter().all(|x| x.frobenius() < 1e-14) && f.y1.frobenius() < 1e-14);
    }
}
