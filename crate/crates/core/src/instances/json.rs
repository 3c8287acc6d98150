//! Instance files: `{type, seed, params, data, generator_version}`.
//!
//! Floats are written by `serde_json` in shortest round-trip form, so a
//! file read back yields bit-identical data.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::dopt::{DoptInstance, Knapsack};
use super::loginvest::LogInvestInstance;
use super::pet::PetInstance;
use super::rng::GENERATOR_VERSION;
use crate::error::{Error, Result};
use crate::linmap::CsrMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PetParams {
    pub n: usize,
    /// Bins requested; the kept count is `data.P.cols`.
    pub m: usize,
    pub stream: u64,
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PetData {
    #[serde(rename = "P")]
    pub p: CsrMatrix,
    pub counts: Vec<u64>,
    pub x_true: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoptParams {
    pub n: usize,
    pub m: usize,
    pub stream: u64,
    pub knapsack: bool,
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnapsackData {
    pub weights: Vec<f64>,
    pub budget: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoptData {
    /// One point per row.
    pub points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub knapsack: Option<KnapsackData>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogInvestParams {
    pub n: usize,
    pub m: usize,
    /// `1/p_min`, the factor applied to the objective.
    pub rescale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogInvestData {
    /// One outcome per row.
    pub returns: Vec<Vec<f64>>,
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum InstanceFile {
    Pet {
        seed: u64,
        params: PetParams,
        data: PetData,
        generator_version: String,
    },
    Dopt {
        seed: u64,
        params: DoptParams,
        data: DoptData,
        generator_version: String,
    },
    Loginvest {
        seed: u64,
        params: LogInvestParams,
        data: LogInvestData,
        generator_version: String,
    },
}

/// A loaded instance of any family.
#[derive(Debug, Clone, PartialEq)]
pub enum Instance {
    Pet(PetInstance),
    Dopt(DoptInstance),
    LogInvest(LogInvestInstance),
}

impl Instance {
    pub fn kind(&self) -> &'static str {
        match self {
            Instance::Pet(_) => "pet",
            Instance::Dopt(_) => "dopt",
            Instance::LogInvest(_) => "loginvest",
        }
    }

    pub fn to_file(&self) -> InstanceFile {
        let generator_version = GENERATOR_VERSION.to_string();
        match self {
            Instance::Pet(p) => InstanceFile::Pet {
                seed: p.seed,
                params: PetParams {
                    n: p.voxels(),
                    m: p.bins_generated,
                    stream: p.stream,
                    notes: vec![
                        "bins with zero counts removed".into(),
                        "boundary start uses a greedy cover: most uncovered bins first, ties by index".into(),
                    ],
                },
                data: PetData { p: p.probabilities.clone(), counts: p.counts.clone(), x_true: p.x_true.clone() },
                generator_version,
            },
            Instance::Dopt(d) => InstanceFile::Dopt {
                seed: d.seed,
                params: DoptParams {
                    n: d.dim(),
                    m: d.num_points(),
                    stream: d.stream,
                    knapsack: d.knapsack.is_some(),
                    notes: if d.knapsack.is_some() {
                        vec!["knapsack weights U[0.5,1.5] and budget m/4 are synthetic defaults".into()]
                    } else {
                        vec![]
                    },
                },
                data: DoptData {
                    points: d.points.column_iter().map(|c| c.iter().copied().collect()).collect(),
                    knapsack: d.knapsack.as_ref().map(|k| KnapsackData { weights: k.weights.clone(), budget: k.budget }),
                },
                generator_version,
            },
            Instance::LogInvest(l) => InstanceFile::Loginvest {
                seed: l.seed,
                params: LogInvestParams { n: l.returns.ncols(), m: l.returns.nrows(), rescale: 1.0 / l.p_min() },
                data: LogInvestData {
                    returns: l.returns.row_iter().map(|r| r.iter().copied().collect()).collect(),
                    probs: l.probs.clone(),
                },
                generator_version,
            },
        }
    }

    pub fn from_file(file: InstanceFile) -> Result<Self> {
        match file {
            InstanceFile::Pet {
                seed, params, data, ..
            } => {
                if data.p.rows != params.n {
                    return Err(Error::InvalidInput(format!(
                        "P has {} rows, params.n = {}",
                        data.p.rows, params.n
                    )));
                }
                Ok(Instance::Pet(PetInstance::from_parts(
                    seed,
                    params.stream,
                    params.m,
                    data.p,
                    data.counts,
                    data.x_true,
                )?))
            }
            InstanceFile::Dopt {
                seed, params, data, ..
            } => {
                let points = rows_to_matrix(&data.points, params.n)?.transpose();
                let knapsack = data.knapsack.map(|k| Knapsack {
                    weights: k.weights,
                    budget: k.budget,
                });
                let mut inst = DoptInstance::from_points(points, knapsack)?;
                inst.seed = seed;
                inst.stream = params.stream;
                Ok(Instance::Dopt(inst))
            }
            InstanceFile::Loginvest {
                seed, params, data, ..
            } => {
                let returns = rows_to_matrix(&data.returns, params.n)?;
                Ok(Instance::LogInvest(LogInvestInstance::new(
                    seed, returns, data.probs,
                )?))
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn rows_to_matrix(rows: &[Vec<f64>], width: usize) -> Result<DMatrix<f64>> {
    if let Some(r) = rows.iter().find(|r| r.len() != width) {
        return Err(Error::Dimension {
            expected: width,
            got: r.len(),
        });
    }
    Ok(DMatrix::from_fn(rows.len(), width, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{gen_dopt, gen_log_invest, gen_pet};

    #[test]
    fn round_trips_are_lossless() {
        let all = [
            Instance::Pet(gen_pet(30, 40, 1).unwrap()),
            Instance::Dopt(gen_dopt(3, 9, 1, true).unwrap()),
            Instance::Dopt(gen_dopt(3, 9, 1, false).unwrap()),
            Instance::LogInvest(gen_log_invest(3, 7, 1).unwrap()),
        ];
        for inst in all {
            let text = inst.to_json().unwrap();
            assert_eq!(Instance::from_json(&text).unwrap(), inst);
            let v: serde_json::Value = serde_json::from_str(&text).unwrap();
            assert_eq!(v["type"], inst.kind());
            assert!(v.get("generator_version").is_some());
        }
    }

    #[test]
    fn bad_files_are_rejected() {
        assert!(Instance::from_json(r#"{"type":"nope"}"#).is_err());
        let mut f = Instance::Pet(gen_pet(20, 20, 2).unwrap()).to_file();
        if let InstanceFile::Pet { data, .. } = &mut f {
            data.counts[0] = 0;
        }
        assert!(Instance::from_file(f).is_err());
    }
}
