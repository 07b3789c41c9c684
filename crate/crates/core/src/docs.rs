//! JSON documents: matrices, split results, orbits.

use serde::{Deserialize, Serialize};

use crate::error::{CprError, Result};
use crate::expectations::{BlockPartition, ConditionalExpectation};
use crate::homogeneous::{
    coadjoint_setup, coset_reduce, diagonal_skew, flag_of, from_tangent, project_to_base, sigma_g, stiefel_of, theta,
    GCoset, DEFAULT_GAP,
};
use crate::linalg::{CMatrix, Invertible, NormKind, Unitary, C64};
use crate::splitting::{SolverConfig, SplitFactors};

/// `{"dim": n, "entries": [[re, im], ...]}`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDoc {
    pub dim: usize,
    pub entries: Vec<[f64; 2]>,
}

impl MatrixDoc {
    pub fn from_matrix(m: &CMatrix) -> Self {
        assert!(m.is_square(), "documents hold square matrices");
        let n = m.nrows();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let z = m[(i, j)];
                entries.push([z.re, z.im]);
            }
        }
        Self { dim: n, entries }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let n = self.dim;
        if n == 0 {
            return Err(CprError::Document("dim must be positive".into()));
        }
        if self.entries.len() != n * n {
            return Err(CprError::Document(format!(
                "dim {n} needs {} entries, found {} (matrix must be square)",
                n * n,
                self.entries.len()
            )));
        }
        if let Some(k) = self
            .entries
            .iter()
            .position(|e| !(e[0].is_finite() && e[1].is_finite()))
        {
            return Err(CprError::Document(format!(
                "entry ({}, {}) is not finite",
                k / n,
                k % n
            )));
        }
        Ok(CMatrix::from_fn(n, n, |i, j| {
            let [re, im] = self.entries[i * n + j];
            C64::new(re, im)
        }))
    }
}

pub fn parse_matrix(text: &str) -> Result<CMatrix> {
    let doc: MatrixDoc = serde_json::from_str(text).map_err(|e| CprError::Document(e.to_string()))?;
    doc.to_matrix()
}

pub fn matrix_to_string(m: &CMatrix) -> String {
    to_pretty(&MatrixDoc::from_matrix(m))
}

pub fn to_pretty<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents serialize");
    s.push('\n');
    s
}

/// Result of an (extended) split: `g = u e^{X_n} ... e^{X_2} e^{Y_1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDoc {
    pub u: MatrixDoc,
    #[serde(rename = "X")]
    pub x: Vec<MatrixDoc>,
    #[serde(rename = "Y1")]
    pub y1: MatrixDoc,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SplitDoc {
    pub fn from_factors(f: &SplitFactors) -> Self {
        Self {
            u: MatrixDoc::from_matrix(f.u.matrix()),
            x: f.x.iter().map(|x| MatrixDoc::from_matrix(x.matrix())).collect(),
            y1: MatrixDoc::from_matrix(f.y1.matrix()),
            residual: f.residual,
            iterations: f.iterations,
            converged: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrbitKind {
    Flag,
    Stiefel,
    Coadjoint,
}

impl std::str::FromStr for OrbitKind {
    type Err = CprError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flag" => Ok(Self::Flag),
            "stiefel" => Ok(Self::Stiefel),
            "coadjoint" => Ok(Self::Coadjoint),
            _ => Err(CprError::Config(format!(
                "unknown orbit type '{s}' (expected flag, stiefel or coadjoint)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum OrbitPointDoc {
    Flag {
        projections: Vec<MatrixDoc>,
    },
    Stiefel {
        isometry: MatrixDoc,
        rank: usize,
    },
    Coadjoint {
        #[serde(rename = "X0")]
        x0: MatrixDoc,
        g: MatrixDoc,
        orbit_point: MatrixDoc,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BundleDoc {
    pub u: MatrixDoc,
    #[serde(rename = "X")]
    pub x: MatrixDoc,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TangentDoc {
    pub u: MatrixDoc,
    #[serde(rename = "W")]
    pub w: MatrixDoc,
}

/// An orbit point together with its images under the identification
/// `G_A/G_B ≅ U_A ×_{U_B} p_E ≅ T(U_A/U_B)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitDoc {
    pub kind: OrbitKind,
    pub dim: usize,
    pub partition: String,
    /// Representative `g` of the coset `g G_B`.
    pub coset: MatrixDoc,
    /// The orbit point of the base `u U_B` (flag, Stiefel) or of `g`
    /// itself (coadjoint).
    pub orbit: OrbitPointDoc,
    pub bundle: BundleDoc,
    pub tangent: TangentDoc,
    pub norm: NormKind,
    pub tangent_norm: f64,
    pub sigma_fixed: bool,
    /// Coset residual of `from_tangent(to_tangent(s))` against `s`.
    pub round_trip_residual: f64,
}

/// Default coadjoint datum `X_0 = i diag(n-1, n-3, ..., 1-n)`.
pub fn default_levels(n: usize) -> Vec<f64> {
    (0..n).map(|k| (n as f64 - 1.0) - 2.0 * k as f64).collect()
}

/// Builds an orbit document for the coset `g G_B`.
///
/// `partition` is required for flags and Stiefel points and ignored for
/// coadjoint orbits, whose subalgebra comes from the eigenprojections of
/// `X_0 = i diag(levels)`.
pub fn orbit_document(
    kind: OrbitKind,
    g: &Invertible,
    partition: Option<&BlockPartition>,
    levels: Option<&[f64]>,
    norm: NormKind,
    cfg: &SolverConfig,
) -> Result<OrbitDoc> {
    let n = g.dim();
    let need_partition = || {
        partition
            .cloned()
            .ok_or_else(|| CprError::Config(format!("{kind:?} orbits need a partition")))
    };
    let (e, coadjoint) = match kind {
        OrbitKind::Flag | OrbitKind::Stiefel => {
            let p = need_partition()?;
            if p.dim() != n {
                return Err(CprError::DimensionMismatch {
                    expected: n,
                    found: p.dim(),
                });
            }
            // validate the orbit type against the partition before solving
            match kind {
                OrbitKind::Flag => flag_of(&Unitary::identity(n), &p).map(|_| ())?,
                _ => stiefel_of(&Unitary::identity(n), &p).map(|_| ())?,
            }
            (ConditionalExpectation::new(p), None)
        }
        OrbitKind::Coadjoint => {
            let lv = levels.map(<[f64]>::to_vec).unwrap_or_else(|| default_levels(n));
            if lv.len() != n {
                return Err(CprError::DimensionMismatch {
                    expected: n,
                    found: lv.len(),
                });
            }
            let setup = coadjoint_setup(&diagonal_skew(&lv), DEFAULT_GAP)?;
            (setup.expectation().clone(), Some(setup))
        }
    };
    let s = GCoset::new(g.clone(), e.clone())?;
    let pt = coset_reduce(&s, cfg)?;
    let tangent = theta(&pt);
    let back = from_tangent(&tangent)?;
    let mut round_trip_residual = back.residual(&s);
    let orbit = match (&coadjoint, kind) {
        (Some(setup), _) => {
            let here = setup.point(g);
            let there = setup.point(back.representative());
            round_trip_residual = round_trip_residual.max(here.residual(&there));
            OrbitPointDoc::Coadjoint {
                x0: MatrixDoc::from_matrix(setup.x0.matrix()),
                g: MatrixDoc::from_matrix(g.matrix()),
                orbit_point: MatrixDoc::from_matrix(&here.orbit_point),
            }
        }
        (None, OrbitKind::Flag) => {
            let base = project_to_base(&pt);
            let f = flag_of(base.representative(), e.partition())?;
            OrbitPointDoc::Flag {
                projections: f.projections.iter().map(MatrixDoc::from_matrix).collect(),
            }
        }
        (None, _) => {
            let st = stiefel_of(&pt.u, e.partition())?;
            OrbitPointDoc::Stiefel {
                isometry: MatrixDoc::from_matrix(&st.isometry),
                rank: st.rank,
            }
        }
    };
    Ok(OrbitDoc {
        kind,
        dim: n,
        partition: e.partition().to_string(),
        coset: MatrixDoc::from_matrix(g.matrix()),
        orbit,
        bundle: BundleDoc {
            u: MatrixDoc::from_matrix(pt.u.matrix()),
            x: MatrixDoc::from_matrix(pt.x.matrix()),
        },
        tangent: TangentDoc {
            u: MatrixDoc::from_matrix(tangent.u.matrix()),
            w: MatrixDoc::from_matrix(tangent.w.matrix()),
        },
        norm,
        tangent_norm: tangent.norm(norm),
        sigma_fixed: sigma_g(&s).same_as(&s),
        round_trip_residual,
    })
}
