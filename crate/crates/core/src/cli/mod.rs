//! Scenario-driven runner behind the `gaugelab` binary: TOML configs, task dispatch,
//! deterministic JSON outputs and a manifest per run.

mod plot;
pub mod suite;
mod tasks;

pub use plot::{emit_plotdata, PlotKind};
pub use suite::{run_suite, SuiteCheck, SuiteReport, SuiteSpec};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::billiards::RayFan;
use crate::dtn::{BoundaryTreatment, DtnOptions, NormKind, SolverOptions, DEFAULT_COND_LIMIT, DEFAULT_FIT_DEGREE, DEFAULT_FIT_RADIUS};
use crate::error::{BilliardError, DtnError, FieldError, GeometryError, ReconstructError, TransportError};
use crate::fields::{gauge_transform, GaugeElement, GaugeSpec, MatrixPotential, PotentialSpec};
use crate::geometry::{Domain, DomainSpec};
use crate::linalg::{c, C64};
use crate::transport::TransportOptions;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Runner errors, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("validation error: {0}")]
    Validation(String),
    #[error("numerical guard: {0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
    #[error("verify-suite: {0} check(s) failed")]
    SuiteFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Io(_) | CliError::SuiteFailed(_) => EXIT_FAILURE,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::GrazingHit { .. } | GeometryError::TangentialIncidence(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<FieldError> for CliError {
    fn from(e: FieldError) -> Self {
        match e {
            FieldError::SingularGauge(..) => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<TransportError> for CliError {
    fn from(e: TransportError) -> Self {
        match e {
            TransportError::StepTooLarge { .. } => CliError::Numerical(e.to_string()),
            TransportError::Field(f) => f.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<BilliardError> for CliError {
    fn from(e: BilliardError) -> Self {
        match e {
            BilliardError::TangentialReflection(..) | BilliardError::TrappedRay { .. } | BilliardError::CornerHit(_) => {
                CliError::Numerical(e.to_string())
            }
            BilliardError::Geometry(g) => g.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<DtnError> for CliError {
    fn from(e: DtnError) -> Self {
        match e {
            DtnError::NearSingularSystem(_) | DtnError::GridTooCoarse(_) | DtnError::Factorization(_) => {
                CliError::Numerical(e.to_string())
            }
            DtnError::Field(f) => f.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<ReconstructError> for CliError {
    fn from(e: ReconstructError) -> Self {
        match e {
            ReconstructError::Transport(t) => t.into(),
            ReconstructError::Billiard(b) => b.into(),
            ReconstructError::Field(f) => f.into(),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Trace,
    Transport,
    Holonomy,
    Dtn,
    CompareDtn,
    Reconstruct,
    VerifySuite,
}

/// Numeric parameters; defaults are the library defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    /// Transport step length.
    pub h: f64,
    pub transport_tolerance: f64,
    pub richardson: bool,
    pub h_grid: f64,
    pub k: f64,
    pub k_im: f64,
    pub n_b: usize,
    pub fit_degree: usize,
    pub fit_radius: f64,
    pub cond_limit: f64,
    pub boundary: BoundaryTreatment,
    /// Norm used for DtN comparisons.
    pub norm: NormKind,
    pub fd_spacing: f64,
    pub max_legs: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            h: crate::transport::DEFAULT_STEP,
            transport_tolerance: crate::transport::DEFAULT_TOLERANCE,
            richardson: true,
            h_grid: 1.0 / 128.0,
            k: crate::dtn::DEFAULT_K,
            k_im: 0.0,
            n_b: 17,
            fit_degree: DEFAULT_FIT_DEGREE,
            fit_radius: DEFAULT_FIT_RADIUS,
            cond_limit: DEFAULT_COND_LIMIT,
            boundary: BoundaryTreatment::ShortleyWeller,
            norm: NormKind::Frobenius,
            fd_spacing: 1e-3,
            max_legs: crate::billiards::DEFAULT_MAX_LEGS,
        }
    }
}

impl Numerics {
    pub fn transport_options(&self) -> TransportOptions {
        TransportOptions { h: self.h, richardson: self.richardson, tolerance: self.transport_tolerance }
    }

    pub fn dtn_options(&self) -> DtnOptions {
        DtnOptions {
            solver: SolverOptions { h_grid: self.h_grid, treatment: self.boundary, cond_limit: self.cond_limit },
            fit_degree: self.fit_degree,
            fit_radius: self.fit_radius,
            n_quad: None,
        }
    }

    pub fn k(&self) -> C64 {
        c(self.k, self.k_im)
    }

    fn validate(&self) -> Result<(), CliError> {
        let positive = [
            ("h", self.h),
            ("transport_tolerance", self.transport_tolerance),
            ("h_grid", self.h_grid),
            ("fit_radius", self.fit_radius),
            ("cond_limit", self.cond_limit),
            ("fd_spacing", self.fd_spacing),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(CliError::Validation(format!("numerics.{name} must be positive and finite, got {v}")));
            }
        }
        if self.n_b == 0 || self.max_legs == 0 {
            return Err(CliError::Validation("numerics.n_b and numerics.max_legs must be positive".into()));
        }
        Ok(())
    }
}

/// Direction given as an angle from the inward normal, or explicitly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSpec {
    /// Arc length of the start point on the outer curve.
    pub start_s: f64,
    #[serde(default)]
    pub angle: Option<f64>,
    #[serde(default)]
    pub direction: Option<[f64; 2]>,
    /// Also build the extended loop based at this arc length.
    #[serde(default)]
    pub base_s: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathSpec {
    Polyline {
        vertices: Vec<[f64; 2]>,
    },
    Circle {
        center: [f64; 2],
        radius: f64,
        #[serde(default)]
        theta0: f64,
        #[serde(default = "yes")]
        ccw: bool,
    },
    BrokenRay {
        start_s: f64,
        #[serde(default)]
        angle: f64,
    },
    GeneratorLoops {
        #[serde(default)]
        base_s: f64,
    },
}

fn yes() -> bool {
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub nx: usize,
    pub ny: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconstructSpec {
    pub base_s: f64,
    pub lattice: Option<LatticeSpec>,
    pub points: Vec<[f64; 2]>,
    /// Centres of axis stencils at `numerics.fd_spacing` for the gauge residual.
    pub stencil_centers: Vec<[f64; 2]>,
    pub endpoint_check: bool,
    pub fingerprints: bool,
}

impl Default for ReconstructSpec {
    fn default() -> Self {
        ReconstructSpec {
            base_s: 0.0,
            lattice: None,
            points: vec![],
            stencil_centers: vec![],
            endpoint_check: true,
            fingerprints: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSpec {
    /// Precomputed DtN files (`.json` or binary); computed from the potentials when absent.
    pub a: Option<String>,
    pub b: Option<String>,
    /// Also compare the blocks with `|n| ≤ central_modes`.
    pub central_modes: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    /// Output directory; relative paths resolve against the config file.
    pub dir: String,
    /// Write CSV plot data next to the JSON results.
    pub plotdata: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: "out".into(), plotdata: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub task: Task,
    #[serde(default)]
    pub seed: u64,
    pub domain: DomainSpec,
    #[serde(default)]
    pub potential: Option<PotentialSpec>,
    #[serde(default)]
    pub potential_b: Option<PotentialSpec>,
    #[serde(default)]
    pub gauge: Option<GaugeSpec>,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub trace: Option<TraceSpec>,
    #[serde(default)]
    pub path: Option<PathSpec>,
    #[serde(default)]
    pub fan: Option<RayFan>,
    #[serde(default)]
    pub reconstruct: Option<ReconstructSpec>,
    #[serde(default)]
    pub compare: Option<CompareSpec>,
    #[serde(default)]
    pub suite: Option<SuiteSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

/// A parsed scenario with its source text and the directory relative paths resolve against.
#[derive(Clone, Debug)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub text: String,
    pub base_dir: PathBuf,
}

impl LoadedScenario {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| CliError::Validation(e.to_string()))?;
        Ok(LoadedScenario { scenario, text: text.to_string(), base_dir: base_dir.to_path_buf() })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &dir)
    }

    pub fn config_hash(&self) -> String {
        hex::encode(Sha256::digest(self.text.as_bytes()))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.base_dir.join(&self.scenario.output.dir)
    }
}

/// Everything a task needs, with every referenced spec resolved.
#[derive(Debug)]
pub struct Context {
    pub domain: Domain,
    pub pot_a: Option<MatrixPotential>,
    pub pot_b: Option<MatrixPotential>,
    pub gauge: Option<GaugeElement>,
    pub numerics: Numerics,
}

impl Context {
    pub fn pot_a(&self) -> Result<&MatrixPotential, CliError> {
        self.pot_a.as_ref().ok_or_else(|| CliError::Validation("this task needs [potential]".into()))
    }

    /// Second potential: `[potential_b]`, else the gauge transform of `[potential]` by `[gauge]`.
    pub fn pot_b(&self) -> Result<&MatrixPotential, CliError> {
        self.pot_b
            .as_ref()
            .ok_or_else(|| CliError::Validation("this task needs [potential_b] or [gauge]".into()))
    }
}

fn needs(s: &Scenario) -> (bool, bool) {
    match s.task {
        Task::Trace | Task::VerifySuite => (false, false),
        Task::Transport | Task::Holonomy | Task::Dtn => (true, false),
        Task::CompareDtn => {
            let files = s.compare.as_ref().is_some_and(|c| c.a.is_some() && c.b.is_some());
            (!files, !files)
        }
        Task::Reconstruct => (true, true),
    }
}

/// Resolves every spec of the scenario without running the task.
pub fn validate(ls: &LoadedScenario) -> Result<Context, CliError> {
    let s = &ls.scenario;
    s.numerics.validate()?;
    let domain = Domain::new(s.domain.clone())?;
    let pot_a = s.potential.as_ref().map(|p| p.build(&domain, &ls.base_dir)).transpose()?;
    let gauge = s.gauge.as_ref().map(|g| g.build(&domain, &ls.base_dir)).transpose()?;
    let mut pot_b = s.potential_b.as_ref().map(|p| p.build(&domain, &ls.base_dir)).transpose()?;
    if pot_b.is_none() {
        if let (Some(a), Some(g)) = (&pot_a, &gauge) {
            pot_b = Some(gauge_transform(a, g)?);
        }
    }
    if let (Some(a), Some(b)) = (&pot_a, &pot_b) {
        if a.m() != b.m() {
            return Err(FieldError::ChannelMismatch(a.m(), b.m()).into());
        }
    }
    let (need_a, need_b) = needs(s);
    if need_a && pot_a.is_none() {
        return Err(CliError::Validation(format!("task {:?} needs [potential]", s.task)));
    }
    if need_b && pot_b.is_none() {
        return Err(CliError::Validation(format!("task {:?} needs [potential_b] or [gauge]", s.task)));
    }
    match s.task {
        Task::Trace if s.trace.is_none() => return Err(CliError::Validation("task trace needs [trace]".into())),
        Task::Transport if s.path.is_none() => return Err(CliError::Validation("task transport needs [path]".into())),
        Task::Reconstruct => {
            let r = s.reconstruct.clone().unwrap_or_default();
            if r.lattice.is_none() && r.points.is_empty() && r.stencil_centers.is_empty() {
                return Err(CliError::Validation("[reconstruct] needs lattice, points or stencil_centers".into()));
            }
        }
        _ => {}
    }
    Ok(Context { domain, pot_a, pot_b, gauge, numerics: s.numerics.clone() })
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub task: Task,
    pub config_hash: String,
    pub seed: u64,
    pub numerics: Numerics,
    pub interpolation: String,
    pub threads: usize,
    pub outputs: Vec<String>,
    /// Seconds since the Unix epoch; the only nondeterministic field.
    pub timestamp: u64,
}

/// Result of a run: files written (relative to the output directory) and a short summary.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub files: Vec<String>,
    pub summary: String,
}

/// One output file held in memory before writing.
pub(crate) struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn json(name: &str, v: &serde_json::Value) -> Self {
        let mut bytes = serde_json::to_vec_pretty(v).expect("json");
        bytes.push(b'\n');
        Artifact { name: name.into(), bytes }
    }

    pub fn text(name: &str, s: String) -> Self {
        Artifact { name: name.into(), bytes: s.into_bytes() }
    }
}

/// Runs the scenario and writes its outputs plus `manifest.json`.
pub fn run(ls: &LoadedScenario) -> Result<RunOutput, CliError> {
    let ctx = validate(ls)?;
    let (artifacts, summary, failed) = tasks::execute(ls, &ctx)?;
    let dir = ls.output_dir();
    std::fs::create_dir_all(&dir)?;
    let mut files = Vec::with_capacity(artifacts.len() + 1);
    for a in &artifacts {
        std::fs::write(dir.join(&a.name), &a.bytes)?;
        files.push(a.name.clone());
    }
    let manifest = Manifest {
        tool: "gaugelab".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        task: ls.scenario.task,
        config_hash: ls.config_hash(),
        seed: ls.scenario.seed,
        numerics: ls.scenario.numerics.clone(),
        interpolation: "keys-cubic-convolution".into(),
        threads: rayon::current_num_threads(),
        outputs: files.clone(),
        timestamp: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    let m = Artifact::json("manifest.json", &serde_json::to_value(&manifest).expect("manifest"));
    std::fs::write(dir.join(&m.name), &m.bytes)?;
    files.push(m.name);
    if failed > 0 {
        eprintln!("{summary}");
        return Err(CliError::SuiteFailed(failed));
    }
    Ok(RunOutput { dir, files, summary })
}

/// Caps the global thread pool from `GAUGELAB_THREADS`, if set.
pub fn init_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("GAUGELAB_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| CliError::Validation(format!("GAUGELAB_THREADS must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(CliError::Validation("GAUGELAB_THREADS must be positive".into()));
        }
        // a second initialization in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}
