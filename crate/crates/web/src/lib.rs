//! WebAssembly bindings for the browser demo in `www/`. Each export returns
//! a JSON string. The plain functions in [`demo`] carry the logic so they
//! can be tested natively.

use wasm_bindgen::prelude::*;

pub mod demo {
    use cpr_core::curvature::{ad_squared, default_t_grid, dissipativity_check, expansivity_check, sinh_ratio};
    use cpr_core::docs::{orbit_document, to_pretty, MatrixDoc, OrbitKind};
    use cpr_core::expectations::{BlockPartition, ExpectationChain};
    use cpr_core::linalg::{random_hermitian, random_instance, seeded_rng, Invertible, NormKind, Role};
    use cpr_core::splitting::{extended_split, SolverConfig};
    use serde::Serialize;

    const MAX_DIM: usize = 8;

    fn check_dim(dim: usize) -> Result<(), String> {
        if dim == 0 || dim > MAX_DIM {
            return Err(format!("dimension must be between 1 and {MAX_DIM}"));
        }
        Ok(())
    }

    #[derive(Serialize)]
    struct SplitView {
        g: MatrixDoc,
        u: MatrixDoc,
        #[serde(rename = "X")]
        x: Vec<MatrixDoc>,
        #[serde(rename = "Y1")]
        y1: MatrixDoc,
        residual: f64,
        iterations: usize,
        reconstruction_error: f64,
    }

    /// Splits a seeded random invertible matrix along `chain` ("p1;p2;...").
    pub fn split(dim: usize, seed: u32, chain: &str) -> Result<String, String> {
        check_dim(dim)?;
        let chain = ExpectationChain::parse(chain.trim(), dim).map_err(|e| e.to_string())?;
        let g = Invertible::new(random_instance(dim, seed.into(), Role::Invertible).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let f = extended_split(&g, &chain, &SolverConfig::default()).map_err(|e| e.to_string())?;
        let view = SplitView {
            g: MatrixDoc::from_matrix(g.matrix()),
            u: MatrixDoc::from_matrix(f.u.matrix()),
            x: f.x.iter().map(|x| MatrixDoc::from_matrix(x.matrix())).collect(),
            y1: MatrixDoc::from_matrix(f.y1.matrix()),
            residual: f.residual,
            iterations: f.iterations,
            reconstruction_error: f.reconstruction_error(g.matrix()).map_err(|e| e.to_string())?,
        };
        Ok(to_pretty(&view))
    }

    #[derive(Serialize)]
    struct CurvatureView {
        norm: NormKind,
        t_grid: Vec<f64>,
        dissipative_min_ratio: Vec<f64>,
        one_plus_min_ratio: f64,
        sinh_ratio_min_ratio: f64,
        ad_squared_spectrum: Vec<f64>,
    }

    /// Sampled expansion ratios for one random `X` of the given scale.
    pub fn curvature(dim: usize, scale: f64, norm: &str, samples: usize, seed: u32) -> Result<String, String> {
        check_dim(dim)?;
        if !scale.is_finite() {
            return Err("scale must be finite".into());
        }
        let kind: NormKind = norm.parse().map_err(|e: cpr_core::CprError| e.to_string())?;
        let x = random_hermitian(dim, &mut seeded_rng(seed.into())).scale(scale);
        let grid = default_t_grid();
        let d = dissipativity_check(&x, kind, samples, &grid, seed.into()).map_err(|e| e.to_string())?;
        let ad2 = ad_squared(&x);
        let one_plus = expansivity_check(&ad2.one_plus(), kind, samples, seed.into()).map_err(|e| e.to_string())?;
        let sinh = expansivity_check(&sinh_ratio(&x), kind, samples, seed.into()).map_err(|e| e.to_string())?;
        Ok(to_pretty(&CurvatureView {
            norm: kind,
            t_grid: grid,
            dissipative_min_ratio: d.min_ratio_per_t,
            one_plus_min_ratio: one_plus.min_ratio,
            sinh_ratio_min_ratio: sinh.min_ratio,
            ad_squared_spectrum: ad2.eigenvalues().to_vec(),
        }))
    }

    /// Orbit document for a seeded representative of the given role.
    pub fn orbit(kind: &str, dim: usize, seed: u32, partition: &str, role: &str) -> Result<String, String> {
        check_dim(dim)?;
        let kind: OrbitKind = kind.parse().map_err(|e: cpr_core::CprError| e.to_string())?;
        let role: Role = role.parse().map_err(|e: cpr_core::CprError| e.to_string())?;
        if role == Role::Hermitian {
            return Err("the representative must be invertible".into());
        }
        let g = Invertible::new(random_instance(dim, seed.into(), role).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let partition = match partition.trim() {
            "" => None,
            p => Some(BlockPartition::parse(p, dim).map_err(|e| e.to_string())?),
        };
        let doc = orbit_document(
            kind,
            &g,
            partition.as_ref(),
            None,
            NormKind::Schatten(2.0),
            &SolverConfig::default(),
        )
        .map_err(|e| e.to_string())?;
        Ok(to_pretty(&doc))
    }
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn split_demo(dim: usize, seed: u32, chain: &str) -> Result<String, JsError> {
    js(demo::split(dim, seed, chain))
}

#[wasm_bindgen]
pub fn curvature_demo(dim: usize, scale: f64, norm: &str, samples: usize, seed: u32) -> Result<String, JsError> {
    js(demo::curvature(dim, scale, norm, samples, seed))
}

#[wasm_bindgen]
pub fn orbit_demo(kind: &str, dim: usize, seed: u32, partition: &str, role: &str) -> Result<String, JsError> {
    js(demo::orbit(kind, dim, seed, partition, role))
}

#[cfg(test)]
mod tests {
    use super::demo;
    use serde_json::Value;

    #[test]
    fn split_reconstructs() {
        let v: Value = serde_json::from_str(&demo::split(4, 3, "1,1,1,1;2,2").unwrap()).unwrap();
        assert!(v["reconstruction_error"].as_f64().unwrap() < 1e-8);
        assert_eq!(v["X"].as_array().unwrap().len(), 2);
        assert!(demo::split(4, 3, "1,1").is_err());
        assert!(demo::split(0, 3, "").is_err());
    }

    #[test]
    fn curvature_ratios_expand() {
        let v: Value = serde_json::from_str(&demo::curvature(3, 2.0, "op", 50, 1).unwrap()).unwrap();
        assert_eq!(v["t_grid"].as_array().unwrap().len(), 9);
        assert!(v["one_plus_min_ratio"].as_f64().unwrap() >= 1.0 - 1e-9);
        assert!(demo::curvature(3, 2.0, "s0", 50, 1).is_err());
    }

    #[test]
    fn orbits() {
        let v: Value = serde_json::from_str(&demo::orbit("stiefel", 2, 5, "1,+", "unitary").unwrap()).unwrap();
        assert_eq!(v["sigma_fixed"], Value::Bool(true));
        assert!(demo::orbit("flag", 3, 5, "1,+", "invertible").is_err());
        assert!(demo::orbit("torus", 3, 5, "", "invertible").is_err());
    }
}
