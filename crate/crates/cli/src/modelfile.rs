//! JSON model documents.
//!
//! ```json
//! {
//!   "dim": 2,
//!   "S0": [[0.012, 0.001], [0.001, 0.003]],
//!   "M": [[-0.02, -0.02], [-0.01, -0.02]],
//!   "Q": [[0.141421356237310, -0.070710678118655], [0.0, 0.070710678118655]],
//!   "alpha": 3.0,
//!   "query": { "w": [[0.11, 0.03], [0.03, 0.11]], "v": [[0.1, 0.04], [0.04, 0.1]] }
//! }
//! ```
//!
//! Exactly one of `alpha` and `b` must be present. The optional blocks
//! `query`, `sv`, `short_rate` and `contract` feed the subcommands that need
//! them. Matrices are arrays of rows.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wishart_core::matfun::RMat;
use wishart_core::pricing::{CarrMadanConfig, ShortRateModel, SvModel};
use wishart_core::{presets, Gindikin, LaplaceQuery, WishartModel};

use crate::CliError;

pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub dim: usize,
    #[serde(rename = "S0")]
    pub s0: Rows,
    #[serde(rename = "M")]
    pub m: Rows,
    #[serde(rename = "Q")]
    pub q: Rows,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query: Option<QueryBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sv: Option<SvBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub short_rate: Option<ShortRateBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contract: Option<ContractBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryBlock {
    pub w: Rows,
    pub v: Rows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvBlock {
    #[serde(rename = "R")]
    pub r: Rows,
    pub spot: f64,
    #[serde(default)]
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShortRateBlock {
    pub a: f64,
    pub v: Rows,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strike: Option<f64>,
    pub maturity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping: Option<f64>,
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| CliError::input("model_parse", e.to_string()))?;
        file.check_shapes()?;
        Ok(file)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input("model_read", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// The reference parameter block with its weights.
    pub fn reference() -> Self {
        Self {
            dim: 2,
            s0: rows(&presets::reference_s0()),
            m: rows(&presets::reference_m()),
            q: rows(&presets::reference_q()),
            alpha: Some(presets::REFERENCE_ALPHA),
            b: None,
            query: Some(QueryBlock {
                w: rows(&presets::reference_w()),
                v: rows(&presets::reference_v()),
            }),
            sv: None,
            short_rate: None,
            contract: None,
        }
    }

    fn check_shapes(&self) -> Result<(), CliError> {
        if self.dim == 0 {
            return Err(CliError::input("model_schema", "dim must be positive"));
        }
        match (self.alpha, &self.b) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => return Err(CliError::input("model_schema", "exactly one of alpha and b is required")),
        }
        let mut named: Vec<(&str, &Rows)> = vec![("S0", &self.s0), ("M", &self.m), ("Q", &self.q)];
        if let Some(b) = &self.b {
            named.push(("b", b));
        }
        if let Some(q) = &self.query {
            named.push(("query.w", &q.w));
            named.push(("query.v", &q.v));
        }
        if let Some(sv) = &self.sv {
            named.push(("sv.R", &sv.r));
        }
        if let Some(sr) = &self.short_rate {
            named.push(("short_rate.v", &sr.v));
        }
        for (name, m) in named {
            if m.len() != self.dim || m.iter().any(|r| r.len() != self.dim) {
                return Err(CliError::input(
                    "model_schema",
                    format!("{name} must be {d}x{d}", d = self.dim),
                ));
            }
        }
        Ok(())
    }

    pub fn model(&self) -> Result<WishartModel, CliError> {
        let gindikin = match (self.alpha, &self.b) {
            (Some(a), None) => Gindikin::Scalar(a),
            (None, Some(b)) => Gindikin::Matrix(matrix(b)),
            _ => unreachable!("checked at parse time"),
        };
        WishartModel::new(matrix(&self.s0), matrix(&self.m), matrix(&self.q), gindikin)
            .map_err(|e| CliError::invalid_model(&e))
    }

    /// Weights from the `query` block, overridden by explicit flags.
    pub fn weights(&self, w: Option<&RMat>, v: Option<&RMat>) -> Result<(RMat, RMat), CliError> {
        let from_file = self.query.as_ref().map(|q| (matrix(&q.w), matrix(&q.v)));
        let w = w.cloned().or_else(|| from_file.as_ref().map(|f| f.0.clone()));
        let v = v.cloned().or_else(|| from_file.as_ref().map(|f| f.1.clone()));
        match (w, v) {
            (Some(w), Some(v)) => {
                if w.nrows() != self.dim || v.nrows() != self.dim {
                    return Err(CliError::input("query", format!("weights must be {d}x{d}", d = self.dim)));
                }
                Ok((w, v))
            }
            _ => Err(CliError::input("query", "no weights: add a query block or pass --w and --v")),
        }
    }

    pub fn query(&self, w: Option<&RMat>, v: Option<&RMat>, t: f64) -> Result<LaplaceQuery, CliError> {
        let (w, v) = self.weights(w, v)?;
        LaplaceQuery::new(w, v, t).map_err(|e| CliError::input("query", e.to_string()))
    }

    pub fn sv_model(&self) -> Result<SvModel, CliError> {
        let sv = self.sv.as_ref().ok_or_else(|| CliError::input("model_schema", "missing sv block"))?;
        SvModel::new(self.model()?, matrix(&sv.r), sv.spot, sv.rate).map_err(|e| CliError::invalid_model(&e))
    }

    pub fn short_rate_model(&self) -> Result<ShortRateModel, CliError> {
        let sr = self
            .short_rate
            .as_ref()
            .ok_or_else(|| CliError::input("model_schema", "missing short_rate block"))?;
        ShortRateModel::new(self.model()?, sr.a, matrix(&sr.v)).map_err(|e| CliError::invalid_model(&e))
    }

    pub fn carr_madan(&self) -> CarrMadanConfig {
        let mut cfg = CarrMadanConfig::default();
        if let Some(d) = self.contract.and_then(|c| c.damping) {
            cfg.damping = d;
        }
        cfg
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("model serializes");
        Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn matrix(rows: &Rows) -> RMat {
    let d = rows.len();
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    RMat::from_row_slice(d, if d == 0 { 0 } else { flat.len() / d }, &flat)
}

pub fn rows(m: &RMat) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// `"a,b;c,d"` as a row-major matrix.
pub fn parse_matrix(s: &str) -> Result<RMat, String> {
    let parsed: Result<Rows, String> = s
        .split(';')
        .map(|row| {
            row.split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}")))
                .collect()
        })
        .collect();
    let parsed = parsed?;
    let n = parsed.len();
    if parsed.iter().any(|r| r.len() != n) {
        return Err(format!("{s:?} is not a square matrix"));
    }
    Ok(matrix(&parsed))
}
