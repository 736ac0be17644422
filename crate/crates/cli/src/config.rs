//! TOML config schemas, one document per subcommand. Unknown fields are
//! rejected so typos surface as field-level errors.

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context};
use serde::Deserialize;

use relaxlab::dyadic::Lp;
use relaxlab::euler::{DataProfile, InitialData, VelocityPrep};
use relaxlab::field::{RandomFieldSpec, ScalarField};
use relaxlab::grid::PeriodicGrid;
use relaxlab::limit::ReferenceChoice;
use relaxlab::symmetry::PressureLaw;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridToml {
    pub dim: usize,
    pub points_per_axis: usize,
    #[serde(default = "default_period")]
    pub period: f64,
}

fn default_period() -> f64 {
    2.0 * std::f64::consts::PI
}

impl GridToml {
    pub fn build(&self) -> anyhow::Result<Arc<PeriodicGrid>> {
        Ok(PeriodicGrid::new(self.dim, self.points_per_axis, self.period)?)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawToml {
    pub gamma: f64,
}

impl LawToml {
    pub fn build(&self) -> anyhow::Result<PressureLaw> {
        Ok(PressureLaw::new(self.gamma)?)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldSpecToml {
    Random {
        seed: u64,
        #[serde(default)]
        k_min: f64,
        k_max: f64,
        #[serde(default = "one")]
        decay: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    SingleMode {
        k: i64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        phase: f64,
    },
    File {
        path: String,
    },
}

fn one() -> f64 {
    1.0
}

impl FieldSpecToml {
    pub fn build(
        &self,
        grid: &Arc<PeriodicGrid>,
        seed_override: Option<u64>,
    ) -> anyhow::Result<ScalarField> {
        match self {
            FieldSpecToml::Random {
                seed,
                k_min,
                k_max,
                decay,
                amplitude,
            } => Ok(RandomFieldSpec {
                seed: seed_override.unwrap_or(*seed),
                k_min: *k_min,
                k_max: *k_max,
                decay: *decay,
                amplitude: *amplitude,
            }
            .realize(grid)?),
            FieldSpecToml::SingleMode { k, amplitude, phase } => Ok(
                relaxlab::field::mode_field(grid, [*k, 0], *amplitude, *phase),
            ),
            FieldSpecToml::File { path } => {
                let (file_grid, mut fields) =
                    relaxlab::io::read_fields(Path::new(path)).context("reading field container")?;
                if file_grid.dim() != grid.dim()
                    || file_grid.points_per_axis() != grid.points_per_axis()
                {
                    bail!(
                        "field container grid ({}d, M={}) does not match the config grid",
                        file_grid.dim(),
                        file_grid.points_per_axis()
                    );
                }
                if fields.is_empty() {
                    bail!("field container holds no components");
                }
                Ok(fields.remove(0))
            }
        }
    }
}

fn lp_from_str(s: &str) -> anyhow::Result<Lp> {
    match s {
        "2" => Ok(Lp::Two),
        "inf" => Ok(Lp::Inf),
        other => bail!("unsupported Lebesgue exponent {other:?} (use \"2\" or \"inf\")"),
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LpVerifyToml {
    pub grid: GridToml,
    #[serde(default = "default_partition_tol")]
    pub partition_tolerance: f64,
    #[serde(default = "default_reconstruction_tol")]
    pub reconstruction_tolerance: f64,
    pub field: FieldSpecToml,
}

fn default_partition_tol() -> f64 {
    1e-12
}

fn default_reconstruction_tol() -> f64 {
    1e-10
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormToml {
    pub grid: GridToml,
    pub field: FieldSpecToml,
    pub norm: NormSpecToml,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormSpecToml {
    /// "besov" or "sobolev"
    pub kind: String,
    pub s: f64,
    #[serde(default = "default_p")]
    pub p: String,
    #[serde(default = "one")]
    pub r: f64,
    #[serde(default)]
    pub homogeneous: bool,
}

fn default_p() -> String {
    "2".to_string()
}

impl NormSpecToml {
    pub fn lp(&self) -> anyhow::Result<Lp> {
        lp_from_str(&self.p)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BonyVerifyToml {
    pub grid: GridToml,
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub k_band: f64,
    #[serde(default = "default_decay")]
    pub decay: f64,
    #[serde(default = "default_bony_tol")]
    pub tolerance: f64,
    /// block indices checked in the K-decomposition (defaults to all)
    #[serde(default)]
    pub blocks: Option<Vec<i32>>,
}

fn default_pairs() -> usize {
    30
}

fn default_seed() -> u64 {
    2024
}

fn default_decay() -> f64 {
    1.8
}

fn default_bony_tol() -> f64 {
    1e-10
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommutatorSuiteToml {
    pub grid: GridToml,
    pub s: f64,
    #[serde(default = "one")]
    pub r: f64,
    #[serde(default = "default_pairs")]
    pub family_size: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub k_band: f64,
    #[serde(default = "default_decay")]
    pub decay: f64,
    #[serde(default = "default_true")]
    pub homogeneous: bool,
    #[serde(default)]
    pub with_terms: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SkVerifyToml {
    #[serde(default = "default_dims")]
    pub dims: Vec<usize>,
    #[serde(default = "default_gammas")]
    pub gammas: Vec<f64>,
    #[serde(default = "one")]
    pub rho_bar: f64,
    #[serde(default = "default_directions")]
    pub directions: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_sk_tol")]
    pub tolerance: f64,
}

fn default_dims() -> Vec<usize> {
    vec![1, 2, 3]
}

fn default_gammas() -> Vec<f64> {
    vec![1.0, 1.4, 2.0]
}

fn default_directions() -> usize {
    200
}

fn default_sk_tol() -> f64 {
    1e-13
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileToml {
    Equilibrium,
    SingleMode { amplitude: f64, k: i64 },
    MultiMode { amplitude: f64, k_max: i64, seed: u64 },
}

impl ProfileToml {
    fn build(&self, seed_override: Option<u64>) -> DataProfile {
        match self {
            ProfileToml::Equilibrium => DataProfile::Equilibrium,
            ProfileToml::SingleMode { amplitude, k } => DataProfile::SingleMode {
                amplitude: *amplitude,
                k: *k,
            },
            ProfileToml::MultiMode {
                amplitude,
                k_max,
                seed,
            } => DataProfile::MultiMode {
                amplitude: *amplitude,
                k_max: *k_max,
                seed: seed_override.unwrap_or(*seed),
            },
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum VelocityToml {
    WellPrepared,
    Zero,
    Gradient { amplitude: f64, k: i64 },
}

impl VelocityToml {
    fn build(&self) -> VelocityPrep {
        match self {
            VelocityToml::WellPrepared => VelocityPrep::WellPrepared,
            VelocityToml::Zero => VelocityPrep::Zero,
            VelocityToml::Gradient { amplitude, k } => VelocityPrep::Gradient {
                amplitude: *amplitude,
                k: *k,
            },
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataToml {
    pub profile: ProfileToml,
    pub velocity: VelocityToml,
}

impl DataToml {
    pub fn build(&self, seed_override: Option<u64>) -> InitialData {
        InitialData {
            profile: self.profile.build(seed_override),
            velocity: self.velocity.build(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveEulerToml {
    pub grid: GridToml,
    pub law: LawToml,
    pub tau: f64,
    #[serde(default = "one")]
    pub rho_bar: f64,
    pub s_end: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    pub snapshot_times: Vec<f64>,
    pub data: DataToml,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "one")]
    pub r: f64,
}

fn default_cfl() -> f64 {
    0.4
}

fn default_sigma() -> f64 {
    1.5
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolvePmeToml {
    pub grid: GridToml,
    pub law: LawToml,
    #[serde(default = "one")]
    pub rho_bar: f64,
    pub s_end: f64,
    pub snapshot_times: Vec<f64>,
    pub dt: f64,
    pub profile: ProfileToml,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ReferenceToml {
    Pme { dt: f64 },
    Euler { tau: f64 },
}

impl ReferenceToml {
    pub fn build(&self) -> ReferenceChoice {
        match self {
            ReferenceToml::Pme { dt } => ReferenceChoice::Pme { dt: *dt },
            ReferenceToml::Euler { tau } => ReferenceChoice::FinestEuler { tau: *tau },
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauSweepToml {
    pub grid: GridToml,
    pub law: LawToml,
    #[serde(default = "one")]
    pub rho_bar: f64,
    pub tau_list: Vec<f64>,
    pub data: DataToml,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "one")]
    pub r: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub comparison_times: Vec<f64>,
    pub s_end: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    pub reference: ReferenceToml,
    /// audit-energy gate: allowed max/min spread of the fitted ratios
    #[serde(default = "default_spread")]
    pub spread_threshold: f64,
}

fn default_delta() -> f64 {
    0.5
}

fn default_spread() -> f64 {
    1.3
}

pub fn load<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}
