//! Scenario documents: one self-contained JSON file per experiment.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use hjsub::geometry::chart::{LinearChart, PolarChart, SphericalChart, ToroidalChart};
use hjsub::geometry::{catalog as manifolds, Chart, Submanifold};
use hjsub::grid::{Axis, Boundary, Grid, SnapshotFormat};
use hjsub::hamiltonian::{HamiltonianField, SamplingPlan};
use hjsub::hjsolver::SchemeParams;
use hjsub::Vector;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::expr::{Env, Expr};
use crate::expression::{expr_hamiltonian, ExprConstraint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    RestrictCheck,
    ExtendCheck,
    InvarianceReport,
    ChartEquivalence,
    Convergence,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::RestrictCheck => "restrict_check",
            Kind::ExtendCheck => "extend_check",
            Kind::InvarianceReport => "invariance_report",
            Kind::ChartEquivalence => "chart_equivalence",
            Kind::Convergence => "convergence",
        }
    }
}

/// A catalog manifold such as `"circle(1)"`, or `F(q) = 0` from expressions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ManifoldSpec {
    Catalog(String),
    Implicit(ImplicitSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ImplicitSpec {
    #[serde(default = "default_implicit_name")]
    pub name: String,
    pub ambient_dim: usize,
    /// One expression in `q` per constraint component.
    pub constraints: Vec<String>,
    /// Lower bound for the tubular radius.
    pub theta: f64,
    /// Box whose points are projected onto `M` for sampling, one `[min, max]` per axis.
    pub sample_box: Vec<[f64; 2]>,
}

fn default_implicit_name() -> String {
    "implicit".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum HamiltonianSpec {
    /// `free`, `rotation`, `abs`, `transport(c1, ..)`, `tangent_kinetic(M)`.
    Catalog(String),
    /// Expression in `q` and `p`.
    Expr(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ChartSpec {
    /// The adapted chart that comes with the catalog manifold.
    Default,
    Identity,
    /// Planar rotation by `angle` radians.
    Rotation {
        angle: f64,
    },
    Polar {
        radius: f64,
    },
    Spherical {
        radius: f64,
    },
    Toroidal {
        major: f64,
        minor: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub min: f64,
    pub max: f64,
    pub n: usize,
    pub boundary: BoundarySpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum BoundarySpec {
    Periodic,
    #[serde(alias = "extrapolate")]
    ExtrapolateConstant,
    #[serde(alias = "linear")]
    ExtrapolateLinear,
}

impl From<BoundarySpec> for Boundary {
    fn from(b: BoundarySpec) -> Self {
        match b {
            BoundarySpec::Periodic => Boundary::Periodic,
            BoundarySpec::ExtrapolateConstant => Boundary::Extrapolate,
            BoundarySpec::ExtrapolateLinear => Boundary::Linear,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub axes: Vec<AxisSpec>,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        let axes = self
            .axes
            .iter()
            .map(|a| Axis::new(a.min, a.max, a.n, a.boundary.into()))
            .collect::<hjsub::Result<Vec<_>>>()?;
        Ok(Grid::new(axes)?)
    }

    /// The same grid with `k` times as many cells per axis.
    pub fn refined(&self, k: usize) -> Result<Self> {
        let fine = self.build()?.refined(k)?;
        let axes = self.axes.iter().zip(fine.axes()).map(|(a, f)| AxisSpec { n: f.n, ..a.clone() }).collect();
        Ok(Self { axes })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    /// CFL factor `λ ∈ (0, 1]`.
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    /// Per-axis dissipation coefficients; estimated from the datum when absent.
    #[serde(default)]
    pub alpha: Option<Vec<f64>>,
}

fn default_cfl() -> f64 {
    0.4
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self { cfl: default_cfl(), alpha: None }
    }
}

impl SolverSpec {
    pub fn params(&self) -> SchemeParams {
        SchemeParams { alpha: self.alpha.clone(), cfl: self.cfl }
    }
}

/// Reference solution used to measure errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum OracleSpec {
    /// Closed form `u(t, q)`.
    Expr(String),
    /// `u(t, q) = min_{|y - q| <= speed t} u0(y)`, the solution for `H = speed |p|`.
    HopfLax {
        speed: f64,
        /// Sampling resolution of the minimisation.
        resolution: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ExtensionSpec {
    /// Coefficients `a` of the normal term `a |q - q̃|²`.
    pub a: Vec<f64>,
    /// Number of tube sample points.
    pub points: usize,
    /// Sample points satisfy `dist(q, M) <= depth`.
    pub depth: f64,
    /// Number of sample times, evenly spread over `(0, final_time]`.
    pub times: usize,
    /// Central difference step of the residual.
    #[serde(default = "default_residual_step")]
    pub step: f64,
    /// A function that is not a solution; its residual must exceed the
    /// tolerance by the factor `control_factor`.
    #[serde(default)]
    pub negative_control: Option<String>,
    #[serde(default = "default_control_factor")]
    pub control_factor: f64,
}

fn default_residual_step() -> f64 {
    1e-5
}

fn default_control_factor() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SamplingSpec {
    #[serde(default = "default_base_points")]
    pub base_points: usize,
    #[serde(default = "default_momenta")]
    pub momenta_per_point: usize,
    #[serde(default = "default_p_max")]
    pub p_max: f64,
    /// Random ordered pairs for the monotonicity spot check.
    #[serde(default)]
    pub monotonicity_pairs: usize,
    /// Flows started on `M` for the drift measurement.
    #[serde(default)]
    pub flow_starts: usize,
    #[serde(default = "default_flow_dt")]
    pub flow_dt: f64,
    /// A single documented point at which residuals are also reported.
    #[serde(default)]
    pub probe: Option<ProbeSpec>,
}

fn default_base_points() -> usize {
    64
}
fn default_momenta() -> usize {
    16
}
fn default_p_max() -> f64 {
    5.0
}
fn default_flow_dt() -> f64 {
    1e-2
}

impl Default for SamplingSpec {
    fn default() -> Self {
        Self {
            base_points: default_base_points(),
            momenta_per_point: default_momenta(),
            p_max: default_p_max(),
            monotonicity_pairs: 0,
            flow_starts: 0,
            flow_dt: default_flow_dt(),
            probe: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RefinementSpec {
    /// Grid refinement factor per level.
    #[serde(default = "default_factor")]
    pub factor: usize,
    /// Number of grids in a convergence study, including the base grid.
    #[serde(default = "default_levels")]
    pub levels: usize,
}

fn default_factor() -> usize {
    2
}
fn default_levels() -> usize {
    2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Binary,
}

impl From<OutputFormat> for SnapshotFormat {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Csv => SnapshotFormat::Csv,
            OutputFormat::Binary => SnapshotFormat::Binary,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Directory for grid snapshots; the `--out` flag takes precedence.
    #[serde(default)]
    pub dir: Option<PathBuf>,
    pub format: OutputFormat,
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub kind: Kind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub manifold: Option<ManifoldSpec>,
    pub hamiltonian: HamiltonianSpec,
    /// Initial datum `u0(q)`.
    #[serde(default)]
    pub initial: Option<String>,
    #[serde(default)]
    pub exact: Option<OracleSpec>,
    #[serde(default)]
    pub chart: Option<ChartSpec>,
    #[serde(default)]
    pub ambient_grid: Option<GridSpec>,
    #[serde(default)]
    pub chart_grid: Option<GridSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub final_time: f64,
    #[serde(default)]
    pub extension: Option<ExtensionSpec>,
    #[serde(default)]
    pub sampling: SamplingSpec,
    /// Named tolerances; each check reports the value it used.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default)]
    pub refinement: Option<RefinementSpec>,
    #[serde(default)]
    pub output: Option<OutputSpec>,
}

/// The JSON schema of scenario files.
pub fn schema() -> serde_json::Value {
    serde_json::to_value(schemars::schema_for!(Scenario)).expect("schema serializes")
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("scenario: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn tolerance(&self, key: &str, default: f64) -> f64 {
        self.tolerances.get(key).copied().unwrap_or(default)
    }

    pub fn require<'a, T>(&self, value: &'a Option<T>, field: &str) -> Result<&'a T> {
        value.as_ref().ok_or_else(|| HarnessError::Config(format!("{} scenario needs `{field}`", self.kind.as_str())))
    }

    pub fn build_manifold(&self) -> Result<Arc<Submanifold>> {
        let spec = self.require(&self.manifold, "manifold")?;
        Ok(Arc::new(match spec {
            ManifoldSpec::Catalog(name) => hjsub::catalog::manifold(name)?,
            ManifoldSpec::Implicit(imp) => {
                if imp.sample_box.len() != imp.ambient_dim {
                    return Err(HarnessError::Config(format!(
                        "sample_box has {} axes, ambient_dim is {}",
                        imp.sample_box.len(),
                        imp.ambient_dim
                    )));
                }
                let c = ExprConstraint::parse(imp.ambient_dim, &imp.constraints)?;
                Submanifold::implicit(imp.name.clone(), Arc::new(c), imp.theta)?
                    .with_sample_box(imp.sample_box.iter().map(|b| (b[0], b[1])).collect())?
            }
        }))
    }

    pub fn ambient_dim(&self) -> Result<usize> {
        if let Some(g) = &self.ambient_grid {
            return Ok(g.axes.len());
        }
        match &self.manifold {
            Some(ManifoldSpec::Catalog(_)) => Ok(self.build_manifold()?.ambient_dim()),
            Some(ManifoldSpec::Implicit(imp)) => Ok(imp.ambient_dim),
            None => Err(HarnessError::Config(
                "cannot infer the ambient dimension: give `ambient_grid` or `manifold`".into(),
            )),
        }
    }

    pub fn build_hamiltonian(&self, context: Option<Arc<Submanifold>>) -> Result<HamiltonianField> {
        let dim = self.ambient_dim()?;
        match &self.hamiltonian {
            HamiltonianSpec::Catalog(name) => Ok(hjsub::catalog::hamiltonian(name, dim, context)?),
            HamiltonianSpec::Expr(src) => expr_hamiltonian(src, dim),
        }
    }

    pub fn build_chart(&self, manifold: Option<&Submanifold>) -> Result<Arc<dyn Chart>> {
        let spec = self.chart.clone().unwrap_or(ChartSpec::Default);
        let dim = self.ambient_dim()?;
        let mdim = manifold.map_or(dim, Submanifold::dim);
        Ok(match spec {
            ChartSpec::Default => {
                let m = manifold.ok_or_else(|| HarnessError::Config("the default chart needs a manifold".into()))?;
                manifolds::default_chart(m).ok_or_else(|| {
                    HarnessError::Config(format!("manifold `{}` has no default chart; give `chart`", m.name()))
                })?
            }
            ChartSpec::Identity => Arc::new(LinearChart::identity(dim, mdim)),
            ChartSpec::Rotation { angle } => {
                if dim != 2 {
                    return Err(HarnessError::Config("rotation chart needs ambient dimension 2".into()));
                }
                Arc::new(LinearChart::rotation(angle))
            }
            ChartSpec::Polar { radius } => Arc::new(PolarChart { radius }),
            ChartSpec::Spherical { radius } => Arc::new(SphericalChart { radius }),
            ChartSpec::Toroidal { major, minor } => Arc::new(ToroidalChart { major, minor }),
        })
    }

    pub fn sampling_plan(&self) -> SamplingPlan {
        SamplingPlan {
            base_points: self.sampling.base_points,
            momenta_per_point: self.sampling.momenta_per_point,
            p_max: self.sampling.p_max,
            seed: self.seed,
        }
    }

    pub fn initial_expr(&self) -> Result<Expr> {
        Ok(Expr::parse(self.require(&self.initial, "initial")?)?)
    }

    /// Parses every expression, builds every object and checks the grids,
    /// without running anything.
    pub fn validate(&self) -> Result<()> {
        let manifold = match &self.manifold {
            Some(_) => Some(self.build_manifold()?),
            None => None,
        };
        let h = self.build_hamiltonian(manifold.clone())?;
        for g in [&self.ambient_grid, &self.chart_grid].into_iter().flatten() {
            g.build()?;
        }
        if let Some(g) = &self.ambient_grid {
            if g.axes.len() != h.dim() {
                return Err(HarnessError::Config(format!(
                    "ambient grid has {} axes, the Hamiltonian lives on R^{}",
                    g.axes.len(),
                    h.dim()
                )));
            }
        }
        self.solver.params().validate()?;
        if !(self.final_time >= 0.0 && self.final_time.is_finite()) {
            return Err(HarnessError::Config(format!("final_time must be finite and >= 0, got {}", self.final_time)));
        }
        let d = h.dim();
        let zeros = vec![0.0; d];
        let env = Env { q: &zeros, p: &zeros, t: 0.0 };
        if let Some(src) = &self.initial {
            check_scalar(&Expr::parse(src)?, &env, "initial")?;
        }
        if let Some(OracleSpec::Expr(src)) = &self.exact {
            check_scalar(&Expr::parse(src)?, &env, "exact")?;
        }
        if let Some(ext) = &self.extension {
            if let Some(src) = &ext.negative_control {
                check_scalar(&Expr::parse(src)?, &env, "negative_control")?;
            }
            if ext.a.is_empty() || ext.points == 0 || ext.times == 0 {
                return Err(HarnessError::Config("extension needs a non-empty `a` sweep, points and times".into()));
            }
        }
        if let Some(r) = &self.refinement {
            if r.factor < 2 || r.levels < 1 {
                return Err(HarnessError::Config("refinement needs factor >= 2 and levels >= 1".into()));
            }
        }
        if self.chart.is_some() || matches!(self.kind, Kind::RestrictCheck) {
            self.build_chart(manifold.as_deref())?;
        }
        match self.kind {
            Kind::RestrictCheck => {
                self.require(&self.manifold, "manifold")?;
                self.require(&self.ambient_grid, "ambient_grid")?;
                self.require(&self.chart_grid, "chart_grid")?;
                self.require(&self.initial, "initial")?;
            }
            Kind::ExtendCheck => {
                self.require(&self.manifold, "manifold")?;
                self.require(&self.extension, "extension")?;
                match self.require(&self.exact, "exact")? {
                    OracleSpec::Expr(_) => {}
                    OracleSpec::HopfLax { .. } => {
                        return Err(HarnessError::Config("extend_check needs a closed-form `exact` expression".into()))
                    }
                }
            }
            Kind::InvarianceReport => {
                self.require(&self.manifold, "manifold")?;
            }
            Kind::ChartEquivalence => {
                self.require(&self.ambient_grid, "ambient_grid")?;
                self.require(&self.initial, "initial")?;
                self.require(&self.chart, "chart")?;
            }
            Kind::Convergence => {
                self.require(&self.ambient_grid, "ambient_grid")?;
                self.require(&self.initial, "initial")?;
                self.require(&self.exact, "exact")?;
                self.require(&self.refinement, "refinement")?;
            }
        }
        Ok(())
    }
}

fn check_scalar(e: &Expr, env: &Env, what: &str) -> Result<()> {
    e.eval_scalar(env).map(|_| ()).map_err(|err| HarnessError::Config(format!("`{what}` = `{e}`: {err}")))
}

/// `q` as an expression environment with `p` empty.
pub fn env_q(q: &[f64], t: f64) -> Env<'_> {
    Env { q, p: &[], t }
}

pub fn vector(x: &[f64]) -> Vector {
    Vector::from_column_slice(x)
}
