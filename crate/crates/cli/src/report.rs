//! JSON report types. The layout is documented in `docs/report-schema.md`.

use serde::Serialize;

pub const SCHEMA: &str = "confsym-report/1";
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Serialize)]
pub struct Header {
    pub schema: &'static str,
    pub engine_version: &'static str,
    pub command: &'static str,
    pub input_sha256: String,
}

impl Header {
    pub fn new(command: &'static str, input: &[u8]) -> Header {
        Header {
            schema: SCHEMA,
            engine_version: ENGINE_VERSION,
            command,
            input_sha256: sha256_hex(input),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
pub struct Component {
    /// 1-based indices.
    pub index: Vec<usize>,
    pub value: String,
}

#[derive(Serialize)]
pub struct CurvatureReport {
    #[serde(flatten)]
    pub header: Header,
    pub tensor: String,
    pub variance: String,
    pub components: Vec<Component>,
}

#[derive(Serialize)]
pub struct ClassifyReport {
    #[serde(flatten)]
    pub header: Header,
    pub symbol: String,
    pub vector: Option<String>,
    pub hat_metric: Option<String>,
    pub verdict: String,
    pub killing: bool,
    pub conformal_killing: bool,
    pub vector_killing: Option<bool>,
    pub vector_conformal_killing: Option<bool>,
    pub obs: String,
    pub obs_flat: Vec<Component>,
    pub d_obs: Vec<Component>,
    pub potential: Option<String>,
    pub potential_supplied: bool,
    pub ansatz_exhausted: bool,
    pub potential_residual: Option<Vec<Component>>,
    pub operator: Option<String>,
    pub operator_residual: Option<String>,
    pub lm_divergence_coeff: String,
}

#[derive(Serialize)]
pub struct ObsOnlyReport {
    #[serde(flatten)]
    pub header: Header,
    pub symbol: String,
    pub hat_metric: Option<String>,
    pub obs: String,
    pub obs_flat: Vec<Component>,
    pub d_obs: Vec<Component>,
}

#[derive(Serialize)]
pub struct CheckEntry {
    pub name: String,
    pub criterion: u8,
    pub status: String,
    pub residual: String,
    pub claims: usize,
    pub failed: Vec<String>,
    pub note: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<u128>,
}

#[derive(Serialize)]
pub struct Summary {
    pub checks: usize,
    pub pass: usize,
    pub fail: usize,
    pub verdict: usize,
}

#[derive(Serialize)]
pub struct SuiteReport {
    #[serde(flatten)]
    pub header: Header,
    pub mode: String,
    pub seed: Option<u64>,
    pub points: Option<usize>,
    pub tol: Option<f64>,
    pub filter: Option<String>,
    pub checks: Vec<CheckEntry>,
    pub summary: Summary,
}
