//! Property suites behind `cpr-split verify`. Every sample draws from its
//! own RNG stream, so reports are identical with or without threads.

use std::str::FromStr;

use serde::Serialize;

use crate::curvature::{ad_squared, curvature_certificate};
use crate::error::{CprError, Result};
use crate::expectations::{verify_expectation, BlockPartition, ConditionalExpectation, ExpectationChain};
use crate::homogeneous::{
    coadjoint_setup, coset_reduce, diagonal_skew, flag_of, from_tangent, positive_block_log_residual, project_to_base,
    pushforward_check, retract, sigma_g, stiefel_of, tau_g, to_tangent, BlockEmbedding, BundlePoint, GCoset, UCoset,
    DEFAULT_GAP,
};
use crate::linalg::{
    frobenius, gaussian, herm_exp, herm_log, norm, random_direction, random_hermitian, random_invertible,
    random_positive, random_unitary, relative_error, sample_rng, scaled_error, spectral, Hermitian, NormKind, Unitary,
};
use crate::par::map_indices;
use crate::report::{MaxTracker, PropertyCheck};
use crate::splitting::{
    cpr_split, extended_psi_split, extended_split, oracle_split, polar_decompose, psi_split, psi_split_from,
    SolverConfig,
};

/// Residual bound for identities that hold up to rounding.
pub const EXACT_TOL: f64 = 1e-10;
/// Residual bound for quantities produced by the iterative solver.
pub const SOLVER_TOL: f64 = 1e-8;
/// Agreement required between the oracle and the solver.
pub const ORACLE_TOL: f64 = 1e-6;
const ORACLE_SAMPLES: usize = 20;
const ORACLE_MAX_DIM: usize = 4;

// Stream offsets so that sections do not reuse each other's samples.
const SALT_ORACLE: u64 = 0x1000_0001;
const SALT_CHAIN: u64 = 0x1000_0002;
const SALT_PUSH: u64 = 0x1000_0003;
const SALT_ORBIT: u64 = 0x1000_0004;
const SALT_COADJOINT: u64 = 0x1000_0005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Core,
    Expectations,
    Splitting,
    Homogeneous,
    Curvature,
    All,
}

impl Suite {
    pub const EACH: [Suite; 5] = [
        Suite::Core,
        Suite::Expectations,
        Suite::Splitting,
        Suite::Homogeneous,
        Suite::Curvature,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Core => "core",
            Suite::Expectations => "expectations",
            Suite::Splitting => "splitting",
            Suite::Homogeneous => "homogeneous",
            Suite::Curvature => "curvature",
            Suite::All => "all",
        }
    }
}

impl FromStr for Suite {
    type Err = CprError;

    fn from_str(s: &str) -> Result<Self> {
        Suite::EACH
            .into_iter()
            .chain([Suite::All])
            .find(|x| x.name() == s)
            .ok_or_else(|| {
                CprError::Config(format!(
                    "unknown suite '{s}' (expected core, expectations, splitting, homogeneous, curvature or all)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub dim: usize,
    pub samples: usize,
    pub seed: u64,
    /// Replaces the default partitions when set.
    pub partition: Option<BlockPartition>,
    /// Replaces the default depth-3 chain when set.
    pub chain: Option<ExpectationChain>,
    /// Restricts the curvature suite to one norm.
    pub norm: Option<NormKind>,
    pub solver: SolverConfig,
}

impl VerifyConfig {
    pub fn new(dim: usize, samples: usize, seed: u64) -> Self {
        Self {
            dim,
            samples,
            seed,
            partition: None,
            chain: None,
            norm: None,
            solver: SolverConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(CprError::Config("samples must be at least 1".into()));
        }
        if self.dim == 0 {
            return Err(CprError::Config("dim must be at least 1".into()));
        }
        if let Some(p) = &self.partition {
            if p.dim() != self.dim {
                return Err(CprError::Config(format!(
                    "partition {p} has dim {}, expected {}",
                    p.dim(),
                    self.dim
                )));
            }
        }
        if let Some(c) = &self.chain {
            if c.dim() != self.dim {
                return Err(CprError::Config(format!(
                    "chain has dim {}, expected {}",
                    c.dim(),
                    self.dim
                )));
            }
        }
        self.solver.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub dim: usize,
    pub samples: usize,
    pub seed: u64,
    pub checks: Vec<PropertyCheck>,
    pub pass: bool,
}

impl SuiteReport {
    fn new(suite: Suite, cfg: &VerifyConfig, checks: Vec<PropertyCheck>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Self {
            suite: suite.name().to_string(),
            dim: cfg.dim,
            samples: cfg.samples,
            seed: cfg.seed,
            checks,
            pass,
        }
    }

    pub fn check(&self, name: &str) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&PropertyCheck> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub suites: Vec<SuiteReport>,
    pub pass: bool,
}

pub fn run(suite: Suite, cfg: &VerifyConfig) -> Result<VerifyReport> {
    cfg.validate()?;
    let list: Vec<Suite> = match suite {
        Suite::All => Suite::EACH.to_vec(),
        s => vec![s],
    };
    let suites = list.into_iter().map(|s| run_one(s, cfg)).collect::<Result<Vec<_>>>()?;
    let pass = suites.iter().all(|s| s.pass);
    Ok(VerifyReport { suites, pass })
}

pub fn run_one(suite: Suite, cfg: &VerifyConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let checks = match suite {
        Suite::Core => core_suite(cfg),
        Suite::Expectations => expectations_suite(cfg)?,
        Suite::Splitting => splitting_suite(cfg),
        Suite::Homogeneous => homogeneous_suite(cfg)?,
        Suite::Curvature => curvature_suite(cfg)?,
        Suite::All => return Err(CprError::Config("run_one takes a single suite".into())),
    };
    Ok(SuiteReport::new(suite, cfg, checks))
}

/// Default partitions for dimension `n`, labelled.
pub fn default_partitions(n: usize) -> Vec<(&'static str, BlockPartition)> {
    let mut out = vec![("diagonal", BlockPartition::diagonal(n))];
    let mut pairs = vec![2; n / 2];
    if n % 2 == 1 {
        pairs.push(1);
    }
    out.push(("pairs", BlockPartition::new(n, pairs, false).expect("pairs partition")));
    if n >= 2 {
        out.push(("corner", corner_partition(n)));
    }
    out
}

/// Diagonal blocks with a one-dimensional remainder.
pub fn corner_partition(n: usize) -> BlockPartition {
    BlockPartition::new(n, vec![1; n - 1], true).expect("corner partition")
}

/// The single-block corner whose `U_A/U_B` is the unit sphere.
pub fn stiefel_partition(n: usize) -> BlockPartition {
    BlockPartition::new(n, vec![n - 1], true).expect("stiefel partition")
}

/// Depth-3 chain with the given finest level.
pub fn default_chain(n: usize, corner: bool) -> ExpectationChain {
    let parts = if corner && n >= 2 {
        vec![corner_partition(n), stiefel_partition(n)]
    } else {
        let coarse = if n >= 3 {
            let mut b = vec![2; n / 2];
            if n % 2 == 1 {
                b.push(1);
            }
            BlockPartition::new(n, b, false).expect("pairs")
        } else {
            BlockPartition::total(n)
        };
        vec![BlockPartition::diagonal(n), coarse]
    };
    ExpectationChain::new(n, parts).expect("default chain refines")
}

fn partitions(cfg: &VerifyConfig) -> Vec<(String, BlockPartition)> {
    match &cfg.partition {
        Some(p) => vec![(format!("partition {p}"), p.clone())],
        None => default_partitions(cfg.dim)
            .into_iter()
            .map(|(l, p)| (l.to_string(), p))
            .collect(),
    }
}

fn chains(cfg: &VerifyConfig) -> Vec<(String, ExpectationChain)> {
    match &cfg.chain {
        Some(c) => vec![("chain".to_string(), c.clone())],
        None => {
            let mut out = vec![("chain".to_string(), default_chain(cfg.dim, false))];
            if cfg.dim >= 2 {
                out.push(("corner_chain".to_string(), default_chain(cfg.dim, true)));
            }
            out
        }
    }
}

/// Per-sample measurements: either a residual held to a tolerance (maximum
/// over samples) or a counterexample indicator (summed).
enum Col {
    Max(&'static str, f64),
    Count(&'static str),
}

/// Runs `f` on every sample index and aggregates its columns. A sample
/// that returns an error counts under `{section}/errors`.
fn sampled<F>(section: &str, cols: &[Col], samples: usize, f: F) -> Vec<PropertyCheck>
where
    F: Fn(usize) -> Result<Vec<f64>> + Sync + Send,
{
    let rows = map_indices(samples, f);
    let mut maxes = vec![MaxTracker::default(); cols.len()];
    let mut counts = vec![0usize; cols.len()];
    let mut errors = 0usize;
    for row in rows {
        match row {
            Ok(vals) => {
                debug_assert_eq!(vals.len(), cols.len());
                for (k, v) in vals.into_iter().enumerate() {
                    maxes[k].push(v);
                    if v != 0.0 {
                        counts[k] += 1;
                    }
                }
            }
            Err(_) => errors += 1,
        }
    }
    let mut out: Vec<PropertyCheck> = cols
        .iter()
        .enumerate()
        .map(|(k, c)| match c {
            Col::Max(name, tol) => PropertyCheck::new(format!("{section}/{name}"), maxes[k].get(), *tol),
            Col::Count(name) => PropertyCheck::boolean(format!("{section}/{name}"), counts[k]),
        })
        .collect();
    out.push(PropertyCheck::boolean(format!("{section}/errors"), errors));
    out
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn core_suite(cfg: &VerifyConfig) -> Vec<PropertyCheck> {
    let n = cfg.dim;
    let seed = cfg.seed;
    let mut cols = vec![
        Col::Max("exp_log_round_trip", EXACT_TOL),
        Col::Max("log_exp_round_trip", EXACT_TOL),
        Col::Max("polar_reconstruction", EXACT_TOL),
        Col::Max("polar_unitary_defect", EXACT_TOL),
        Col::Max("sigma_involution", EXACT_TOL),
        Col::Max("schatten2_is_frobenius", EXACT_TOL),
        Col::Count("i_maps_skew_onto_hermitian"),
    ];
    let invariance_names = [
        "unitary_invariance_op",
        "unitary_invariance_fro",
        "unitary_invariance_s1",
        "unitary_invariance_s2",
        "unitary_invariance_s4",
    ];
    cols.extend(invariance_names.iter().map(|&nm| Col::Max(nm, EXACT_TOL)));
    sampled("core", &cols, cfg.samples, |i| {
        let mut rng = sample_rng(seed, i as u64);
        let x = random_hermitian(n, &mut rng);
        let p = random_positive(n, &mut rng);
        let g = random_invertible(n, &mut rng);
        let e = herm_exp(&x)?;
        let mut row = vec![
            scaled_error(herm_log(&e)?.matrix(), x.matrix()),
            scaled_error(herm_exp(&herm_log(&p)?)?.matrix(), p.matrix()),
        ];
        let polar = polar_decompose(&g)?;
        row.push(relative_error(&polar.compose()?, g.matrix()));
        row.push(polar.u.defect());
        row.push(relative_error(g.sigma().sigma().matrix(), g.matrix()));
        let a = gaussian(n, &mut rng);
        row.push((norm(&a, NormKind::Schatten(2.0)) - frobenius(&a)).abs() / (1.0 + frobenius(&a)));
        let w = x.times_i();
        row.push(flag(
            w.times_minus_i().matrix() != x.matrix() || w.times_i().matrix() != &(-x.matrix()),
        ));
        let (u, v) = (random_unitary(n, &mut rng), random_unitary(n, &mut rng));
        let moved = u.matrix() * &a * v.matrix();
        for kind in NormKind::standard() {
            let base = norm(&a, kind);
            row.push((norm(&moved, kind) - base).abs() / (1.0 + base));
        }
        Ok(row)
    })
}

fn expectations_suite(cfg: &VerifyConfig) -> Result<Vec<PropertyCheck>> {
    let mut out = Vec::new();
    let push = |out: &mut Vec<PropertyCheck>, label: &str, e: &ConditionalExpectation| -> Result<()> {
        let r = verify_expectation(e, cfg.samples, cfg.seed)?;
        out.extend(r.checks.into_iter().map(|mut c| {
            c.name = format!("{label}/{}", c.name);
            c
        }));
        Ok(())
    };
    for (label, p) in partitions(cfg) {
        push(&mut out, &label, &ConditionalExpectation::new(p))?;
    }
    for (label, chain) in chains(cfg) {
        let top = chain.depth();
        let composed = chain.compose(top, 1)?;
        push(&mut out, &format!("{label}_composed"), &composed)?;
        let r = chain.composition_residual(top, 1, cfg.samples, cfg.seed)?;
        out.push(PropertyCheck::new(
            format!("{label}_composed/matches_iterated"),
            r,
            EXACT_TOL,
        ));
    }
    Ok(out)
}

fn splitting_suite(cfg: &VerifyConfig) -> Vec<PropertyCheck> {
    let n = cfg.dim;
    let seed = cfg.seed;
    let solver = &cfg.solver;
    let mut out = Vec::new();
    for (label, p) in partitions(cfg) {
        let e = ConditionalExpectation::new(p);
        let cols = [
            Col::Max("round_trip", SOLVER_TOL),
            Col::Max("x_in_kernel", EXACT_TOL),
            Col::Max("y_in_subalgebra", EXACT_TOL),
            Col::Max("perturbed_restart", SOLVER_TOL),
            Col::Max("representative_independence", SOLVER_TOL),
            Col::Max("left_equivariance", SOLVER_TOL),
        ];
        out.extend(sampled(&label, &cols, cfg.samples, |i| {
            let mut rng = sample_rng(seed, i as u64);
            let g = random_invertible(n, &mut rng);
            let f = cpr_split(&g, &e, solver)?;
            let x = &f.x[0];
            let mut row = vec![
                f.reconstruction_error(g.matrix())?,
                frobenius(&e.pinch(x.matrix())?) / (1.0 + x.frobenius()),
                e.algebra_residual(f.y1.matrix()),
            ];
            let gram = crate::linalg::PositiveDefinite::from_hermitian(
                Hermitian::symmetrize(g.matrix().adjoint() * g.matrix()),
                &Default::default(),
            )?;
            let base = psi_split(&gram, &e, solver)?;
            let dir = e.pinch_hermitian(&random_direction(n, &mut rng)).scale(0.1);
            let start = e.pinch_hermitian(&herm_log(&gram)?).scale(0.5).add(&dir);
            let moved = psi_split_from(&gram, &e, solver, Some(&start))?;
            row.push(
                scaled_error(moved.x.matrix(), base.x.matrix()).max(scaled_error(moved.y.matrix(), base.y.matrix())),
            );
            let b = e.random_group(&mut rng);
            // g b = (u v) e^{Ad_{v*} X} e^{Y'} for some v in U_B
            let fb = cpr_split(&g.mul(&b), &e, solver)?;
            let a = BundlePoint::new(f.u.clone(), x.clone(), e.clone())?;
            let c = BundlePoint::new(fb.u, fb.x[0].clone(), e.clone())?;
            row.push(a.residual(&c));
            let w = random_unitary(n, &mut rng);
            let fw = cpr_split(&w.to_invertible().mul(&g), &e, solver)?;
            let wu = w.matrix() * f.u.matrix();
            row.push(
                scaled_error(fw.u.matrix(), &wu)
                    .max(scaled_error(fw.x[0].matrix(), x.matrix()))
                    .max(scaled_error(fw.y1.matrix(), f.y1.matrix())),
            );
            Ok(row)
        }));
        if n <= ORACLE_MAX_DIM {
            out.extend(sampled(
                &label,
                &[Col::Max("oracle_agreement", ORACLE_TOL)],
                cfg.samples.min(ORACLE_SAMPLES),
                |i| {
                    let mut rng = sample_rng(seed ^ SALT_ORACLE, i as u64);
                    let p = random_positive(n, &mut rng);
                    let s = psi_split(&p, &e, solver)?;
                    let (x, y) = oracle_split(&p, &e)?;
                    Ok(vec![
                        scaled_error(x.matrix(), s.x.matrix()).max(scaled_error(y.matrix(), s.y.matrix()))
                    ])
                },
            ));
        } else {
            out.push(PropertyCheck::not_applicable(format!("{label}/oracle_agreement")));
        }
    }
    for (label, chain) in chains(cfg) {
        let cols = [
            Col::Max("extended_round_trip", SOLVER_TOL),
            Col::Max("psi_matches_phi", SOLVER_TOL),
            Col::Max("psi_reconstruction", SOLVER_TOL),
            Col::Max("levels_in_kernel", EXACT_TOL),
        ];
        out.extend(sampled(&label, &cols, cfg.samples, |i| {
            let mut rng = sample_rng(seed ^ SALT_CHAIN, i as u64);
            let g = random_invertible(n, &mut rng);
            let f = extended_split(&g, &chain, solver)?;
            let gram = crate::linalg::PositiveDefinite::from_hermitian(
                Hermitian::symmetrize(g.matrix().adjoint() * g.matrix()),
                &Default::default(),
            )?;
            let psi = extended_psi_split(&gram, &chain, solver)?;
            let phi = f.positive_part();
            let mut agree = scaled_error(psi.y1.matrix(), phi.y1.matrix());
            for (a, b) in psi.x.iter().zip(&phi.x) {
                agree = agree.max(scaled_error(a.matrix(), b.matrix()));
            }
            // X_k must lie in ker E_k within the level-k algebra
            let top = chain.depth();
            let mut leak: f64 = 0.0;
            for (idx, x) in f.x.iter().enumerate() {
                let k = top - idx;
                let ek = chain.expectation(k)?;
                let level = chain.level_expectation(k)?;
                leak = leak
                    .max(frobenius(&ek.pinch(x.matrix())?) / (1.0 + x.frobenius()))
                    .max(level.algebra_residual(x.matrix()));
            }
            Ok(vec![
                f.reconstruction_error(g.matrix())?,
                agree,
                relative_error(&psi.compose()?, gram.matrix()),
                leak,
            ])
        }));
    }
    out
}

fn homogeneous_suite(cfg: &VerifyConfig) -> Result<Vec<PropertyCheck>> {
    let n = cfg.dim;
    let seed = cfg.seed;
    let solver = &cfg.solver;
    let mut out = Vec::new();
    for (label, p) in partitions(cfg) {
        let e = ConditionalExpectation::new(p.clone());
        let cols = [
            Col::Max("compose_after_reduce", SOLVER_TOL),
            Col::Max("reduce_after_compose", SOLVER_TOL),
            Col::Max("representative_independence", SOLVER_TOL),
            Col::Count("sigma_fixed_iff_x_zero"),
            Col::Max("sigma_tau_square", SOLVER_TOL),
            Col::Max("retract_endpoints", SOLVER_TOL),
            Col::Max("retract_well_defined", SOLVER_TOL),
            Col::Max("tangent_round_trip", SOLVER_TOL),
            Col::Max("sigma_negates_tangent", SOLVER_TOL),
            Col::Max("ua_equivariance", SOLVER_TOL),
            Col::Max("base_equivariance", EXACT_TOL),
            Col::Max("positive_block_log", EXACT_TOL),
        ];
        out.extend(sampled(&label, &cols, cfg.samples, |i| {
            let mut rng = sample_rng(seed, i as u64);
            // alternate unitary and general representatives so both sides
            // of the fixed-point equivalence are exercised
            let g = if i % 2 == 0 {
                random_unitary(n, &mut rng).to_invertible()
            } else {
                random_invertible(n, &mut rng)
            };
            let s = GCoset::new(g, e.clone())?;
            let pt = coset_reduce(&s, solver)?;
            let mut row = vec![pt.compose()?.residual(&s)];
            let pt0 = BundlePoint::new(
                random_unitary(n, &mut rng),
                e.random_kernel_hermitian(&mut rng),
                e.clone(),
            )?;
            row.push(coset_reduce(&pt0.compose()?, solver)?.residual(&pt0));
            let b = e.random_group(&mut rng);
            row.push(coset_reduce(&s.with_representative_times(&b), solver)?.residual(&pt));
            let fixed = sigma_g(&s).same_as(&s);
            let x_zero = pt.x.frobenius() <= SOLVER_TOL;
            row.push(flag(fixed != x_zero));
            row.push(coset_reduce(&sigma_g(&s), solver)?.residual(&tau_g(&pt)));
            let zero = retract(&pt, 0.0)?;
            row.push(
                retract(&pt, 1.0)?
                    .residual(&pt)
                    .max(zero.x.frobenius())
                    .max(tau_g(&zero).residual(&zero)),
            );
            let v = e.random_unitary_b(&mut rng);
            row.push(retract(&pt, 0.5)?.residual(&retract(&pt.reparametrize(&v), 0.5)?));
            let tv = to_tangent(&s, solver)?;
            row.push(from_tangent(&tv)?.residual(&s));
            row.push(to_tangent(&sigma_g(&s), solver)?.residual(&tv.neg()));
            let w = random_unitary(n, &mut rng);
            row.push(to_tangent(&s.act(&w.to_invertible()), solver)?.residual(&tv.act(&w)));
            row.push(project_to_base(&pt.act(&w)).residual(&project_to_base(&pt).act(&w)));
            let pos = herm_exp(&e.random_hermitian_b(&mut rng))?;
            row.push(positive_block_log_residual(&e, &pos)?);
            Ok(row)
        }));
        if !p.is_corner() {
            out.extend(orbit_equality(
                &label,
                "flag",
                cfg,
                &e,
                |u| flag_of(u, &p),
                |a, b| a.same_as(b),
            ));
        }
    }

    // functoriality under block embeddings n -> n+1 and n -> n+2
    let source = match &cfg.partition {
        Some(p) if !p.is_corner() => p.clone(),
        _ => BlockPartition::diagonal(n),
    };
    let e = ConditionalExpectation::new(source);
    for extra in [1usize, 2] {
        let alpha = BlockEmbedding::new(&e, extra, None)?;
        let section = format!("pushforward_{n}_to_{}", n + extra);
        out.extend(sampled(
            &section,
            &[Col::Max("commutes", SOLVER_TOL)],
            cfg.samples,
            |i| {
                let mut rng = sample_rng(seed ^ SALT_PUSH, i as u64);
                let s = GCoset::new(random_invertible(n, &mut rng), e.clone())?;
                let r = pushforward_check(&alpha, &s, solver)?;
                Ok(vec![r.residual.max(r.base_residual)])
            },
        ));
    }

    if n >= 2 {
        let sp = stiefel_partition(n);
        let e = ConditionalExpectation::new(sp.clone());
        out.extend(orbit_equality(
            "stiefel",
            "stiefel",
            cfg,
            &e,
            |u| stiefel_of(u, &sp),
            |a, b| a.same_as(b),
        ));
    }

    out.extend(coadjoint_checks(cfg)?);
    Ok(out)
}

/// Orbit-point equality against coset equality on pairs `(u, u v)` with `v`
/// in `U_B` (both equal) and independent pairs (both different).
fn orbit_equality<T, F, Q>(
    section: &str,
    kind: &str,
    cfg: &VerifyConfig,
    e: &ConditionalExpectation,
    point: F,
    same: Q,
) -> Vec<PropertyCheck>
where
    F: Fn(&Unitary) -> Result<T> + Sync + Send,
    Q: Fn(&T, &T) -> bool + Sync + Send,
{
    let n = cfg.dim;
    let seed = cfg.seed;
    let name: &'static str = match kind {
        "flag" => "flag_equality_iff_coset",
        _ => "stiefel_equality_iff_coset",
    };
    sampled(section, &[Col::Count(name)], cfg.samples, |i| {
        let mut rng = sample_rng(seed ^ SALT_ORBIT, i as u64);
        let u = random_unitary(n, &mut rng);
        let other = if i % 2 == 0 {
            u.mul(&e.random_unitary_b(&mut rng))
        } else {
            random_unitary(n, &mut rng)
        };
        let cu = UCoset::new(u.clone(), e.clone())?;
        let co = UCoset::new(other.clone(), e.clone())?;
        let orbit_same = same(&point(&u)?, &point(&other)?);
        Ok(vec![flag(orbit_same != cu.same_as(&co))])
    })
}

fn coadjoint_checks(cfg: &VerifyConfig) -> Result<Vec<PropertyCheck>> {
    let n = cfg.dim;
    let seed = cfg.seed;
    let solver = &cfg.solver;
    // a rotated datum so that the pinching has a nontrivial frame
    let mut rng = sample_rng(seed ^ SALT_COADJOINT, u64::MAX);
    let w = random_unitary(n, &mut rng);
    let levels: Vec<f64> = (0..n).map(|k| k as f64 - (n as f64 - 1.0) / 2.0).collect();
    let x0 = w.conj_skew(&diagonal_skew(&levels));
    let setup = coadjoint_setup(&x0, DEFAULT_GAP)?;
    let e = setup.expectation().clone();
    let cols = [
        Col::Count("coadjoint_equality_iff_coset"),
        Col::Count("isotropy_is_subgroup"),
        Col::Max("orbit_round_trip", SOLVER_TOL),
    ];
    Ok(sampled("coadjoint", &cols, cfg.samples, |i| {
        let mut rng = sample_rng(seed ^ SALT_COADJOINT, i as u64);
        let g = random_invertible(n, &mut rng);
        let other = if i % 2 == 0 {
            g.mul(&e.random_group(&mut rng))
        } else {
            random_invertible(n, &mut rng)
        };
        let (a, b) = (setup.point(&g), setup.point(&other));
        let (ca, cb) = (setup.coset(&a), setup.coset(&b));
        let eq = flag(a.same_as(&b) != ca.same_as(&cb));
        let h = if i % 2 == 0 {
            e.random_group(&mut rng)
        } else {
            random_invertible(n, &mut rng)
        };
        let iso = flag(setup.fixes(&h) != e.in_group(h.matrix()));
        let back = from_tangent(&to_tangent(&ca, solver)?)?;
        let trip = setup.point(back.representative()).residual(&a).max(back.residual(&ca));
        Ok(vec![eq, iso, trip])
    }))
}

fn curvature_suite(cfg: &VerifyConfig) -> Result<Vec<PropertyCheck>> {
    let n = cfg.dim;
    let seed = cfg.seed;
    let mut out = sampled(
        "curvature",
        &[
            Col::Max("ad_spectrum_law", SOLVER_TOL),
            Col::Max("ad_self_adjoint", EXACT_TOL),
        ],
        cfg.samples,
        |i| {
            let x = random_hermitian(n, &mut sample_rng(seed, i as u64));
            let (lam, _) = spectral(&x)?;
            let mut expected: Vec<f64> = lam
                .iter()
                .flat_map(|a| lam.iter().map(move |b| (a - b).powi(2)))
                .collect();
            expected.sort_by(f64::total_cmp);
            let a = ad_squared(&x);
            let gap = a
                .eigenvalues()
                .iter()
                .zip(&expected)
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max);
            Ok(vec![gap, a.op.asymmetry()])
        },
    );
    let norms = match cfg.norm {
        Some(k) => vec![k],
        None => vec![NormKind::Frobenius, NormKind::Operator, NormKind::Schatten(1.0)],
    };
    for kind in norms {
        let r = curvature_certificate(n, kind, cfg.samples, seed)?;
        let section = format!("curvature_{}", kind.label());
        for c in &r.criteria {
            out.push(PropertyCheck::new(
                format!("{section}/{}", c.criterion),
                (1.0 - c.min_ratio).max(0.0),
                crate::curvature::EXPANSIVE_TOL,
            ));
        }
        out.push(PropertyCheck::boolean(
            format!("{section}/spectral_certificate"),
            usize::from(!r.spectral_pass),
        ));
        out.push(PropertyCheck::boolean(
            format!("{section}/criteria_agree"),
            usize::from(!r.consistent),
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass_small() {
        let cfg = VerifyConfig::new(3, 6, 1);
        let r = run(Suite::All, &cfg).unwrap();
        for s in &r.suites {
            assert!(s.pass, "{}: {:?}", s.suite, s.failures());
        }
    }

    #[test]
    fn reports_are_deterministic() {
        let cfg = VerifyConfig::new(2, 4, 9);
        let a = serde_json::to_string(&run(Suite::All, &cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&run(Suite::All, &cfg).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_zero_samples_and_unknown_suite() {
        assert!(run(Suite::Core, &VerifyConfig::new(2, 0, 1)).is_err());
        assert!("bogus".parse::<Suite>().is_err());
        assert_eq!("all".parse::<Suite>().unwrap(), Suite::All);
    }

    #[test]
    fn dim_one_runs() {
        let r = run(Suite::All, &VerifyConfig::new(1, 3, 0)).unwrap();
        assert!(
            r.pass,
            "{:?}",
            r.suites.iter().flat_map(|s| s.failures()).collect::<Vec<_>>()
        );
    }
}
