//! JSON interchange for the f64 lane: the `mpa-spec v1` and
//! `mixture-spec v1` schemas consumed and produced by the CLI. Output is
//! pretty-printed with sorted keys (serialization goes through
//! `serde_json::Value`, whose object map is ordered).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bridge::BridgeSpec;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::mixture::{MarginalKernel, MixtureSpec};
use crate::mpa::{Boundary, MpaSpec};
use crate::spectral::StochasticMatrix;

pub const MPA_SCHEMA: &str = "mpa-spec v1";
pub const MIXTURE_SCHEMA: &str = "mixture-spec v1";

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum BoundaryV1 {
    Vectors { x: Vec<f64>, y: Vec<f64> },
    Trace,
}

/// On-disk form of an MPA spec.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MpaSpecV1 {
    pub schema: String,
    pub alphabet: usize,
    pub states: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub boundary: BoundaryV1,
    pub matrices: BTreeMap<String, Vec<Vec<f64>>>,
}

/// On-disk form of a mixture spec (bridge + kernel + eigenvalue).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MixtureSpecV1 {
    pub schema: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub lambda: f64,
    #[serde(rename = "P")]
    pub p: Vec<Vec<f64>>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    /// `kernel[b][b']` is the letter distribution at the pair (b, b').
    pub kernel: Vec<Vec<Vec<f64>>>,
    pub reachable: Vec<Vec<bool>>,
}

fn mat_to_rows(m: &Mat<f64>) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

impl MpaSpecV1 {
    pub fn from_spec(spec: &MpaSpec<f64>) -> Self {
        let matrices = spec
            .matrices()
            .iter()
            .enumerate()
            .map(|(a, m)| (a.to_string(), mat_to_rows(m)))
            .collect();
        let boundary = match spec.boundary() {
            Boundary::Vectors { x, y } => BoundaryV1::Vectors { x: x.clone(), y: y.clone() },
            Boundary::Trace => BoundaryV1::Trace,
        };
        MpaSpecV1 {
            schema: MPA_SCHEMA.to_string(),
            alphabet: spec.alphabet_size(),
            states: spec.state_size(),
            n: spec.word_length(),
            boundary,
            matrices,
        }
    }

    pub fn into_spec(self) -> Result<MpaSpec<f64>> {
        if self.schema != MPA_SCHEMA {
            return Err(Error::InvalidSpec(format!(
                "expected schema {MPA_SCHEMA:?}, found {:?}",
                self.schema
            )));
        }
        let mut matrices = Vec::with_capacity(self.alphabet);
        for a in 0..self.alphabet {
            let rows = self
                .matrices
                .get(&a.to_string())
                .ok_or_else(|| Error::InvalidSpec(format!("missing matrix for letter {a}")))?;
            matrices.push(Mat::from_rows(rows.clone())?);
        }
        let boundary = match self.boundary {
            BoundaryV1::Vectors { x, y } => Boundary::Vectors { x, y },
            BoundaryV1::Trace => Boundary::Trace,
        };
        MpaSpec::new(self.alphabet, self.states, matrices, boundary, self.n)
    }
}

impl MixtureSpecV1 {
    pub fn from_spec(mix: &MixtureSpec<f64>) -> Self {
        let dim = mix.bridge().dim();
        let kernel = (0..dim)
            .map(|b| (0..dim).map(|b2| mix.kernel().dist(b, b2).to_vec()).collect())
            .collect();
        let reachable = (0..dim)
            .map(|b| (0..dim).map(|b2| mix.kernel().is_reachable(b, b2)).collect())
            .collect();
        MixtureSpecV1 {
            schema: MIXTURE_SCHEMA.to_string(),
            n: mix.word_length(),
            lambda: mix.lambda(),
            p: mat_to_rows(mix.bridge().transition().mat()),
            f: mix.bridge().end_weight().to_vec(),
            g: mix.bridge().start_weight().to_vec(),
            kernel,
            reachable,
        }
    }

    pub fn into_spec(self) -> Result<MixtureSpec<f64>> {
        if self.schema != MIXTURE_SCHEMA {
            return Err(Error::InvalidSpec(format!(
                "expected schema {MIXTURE_SCHEMA:?}, found {:?}",
                self.schema
            )));
        }
        let dim = self.p.len();
        let alphabet = self
            .kernel
            .first()
            .and_then(|row| row.first())
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidSpec("empty kernel".into()))?;
        if self.kernel.len() != dim || self.reachable.len() != dim {
            return Err(Error::ShapeMismatch);
        }
        let mut probs = Vec::with_capacity(dim * dim * alphabet);
        let mut reachable = Vec::with_capacity(dim * dim);
        for (krow, rrow) in self.kernel.iter().zip(&self.reachable) {
            if krow.len() != dim || rrow.len() != dim {
                return Err(Error::ShapeMismatch);
            }
            for (dist, &reach) in krow.iter().zip(rrow) {
                if dist.len() != alphabet {
                    return Err(Error::ShapeMismatch);
                }
                probs.extend_from_slice(dist);
                reachable.push(reach);
            }
        }
        let kernel = MarginalKernel::new(dim, alphabet, probs, reachable)?;
        let p = StochasticMatrix::new(Mat::from_rows(self.p)?)?;
        let bridge = BridgeSpec::new(p, self.f, self.g, self.n + 1)?;
        MixtureSpec::new(bridge, kernel, self.lambda)
    }
}

/// Pretty-print any serializable value with sorted keys.
pub fn to_json_string<S: Serialize>(value: &S) -> Result<String> {
    let v = serde_json::to_value(value)?;
    Ok(serde_json::to_string_pretty(&v)?)
}

pub fn read_mpa_spec(path: &Path) -> Result<MpaSpec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let file: MpaSpecV1 = serde_json::from_str(&text)?;
    file.into_spec()
}

pub fn read_mixture_spec(path: &Path) -> Result<MixtureSpec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let file: MixtureSpecV1 = serde_json::from_str(&text)?;
    file.into_spec()
}
