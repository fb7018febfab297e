//! Experiment configuration: one TOML file with nested sections, validated
//! in full before any computation starts.

use std::path::{Path, PathBuf};

use fracpm::chaos::{Coupling, Schedule};
use fracpm::kernels::{InitialShape, ProblemParams, RawNonlinearity};
use fracpm::particles::DriftMode;
use fracpm::pde::{Equation, TransportScheme};
use fracpm::spectral::Grid;
use serde::{Deserialize, Serialize};

/// Name of the configuration dialect recorded in every manifest.
pub const DIALECT: &str = "TOML 1.0";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Experiment kind; informational, the subcommand decides what runs.
    pub kind: Option<String>,
    pub seed: u64,
    pub replicas: usize,
    pub horizon: f64,
    pub dt: f64,
    pub output: PathBuf,
    pub problem: ProblemSection,
    pub grid: GridSection,
    pub nonlinearity: NonlinearitySpec,
    pub initial: InitialSpec,
    pub pde: PdeSection,
    pub beta_sweep: SweepSection,
    pub zeta_sweep: SweepSection,
    pub schedule: ScheduleSection,
    pub continuation: ContinuationSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    pub d: usize,
    pub s: f64,
    pub sigma: f64,
    pub beta: f64,
    pub zeta: f64,
    pub n_particles: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    pub half_length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NonlinearitySpec {
    /// `f(u) = u^m`.
    Power { m: f64 },
    /// Piecewise-linear `f` from a two-column CSV file `u,f` with a header,
    /// resolved relative to the configuration file.
    Table { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialSpec {
    Gaussian { std: f64 },
    DoubleBump { offset: f64, std: f64 },
    Plateau { radius: f64 },
    Constant { value: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquationName {
    Macro,
    Intermediate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    Muscl,
    Upwind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeName {
    SharedField,
    ExactPerParticle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingName {
    Dynamics,
    Identical,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeSection {
    pub equation: EquationName,
    pub scheme: SchemeName,
    /// Evenly spaced binary snapshots written by `solve-pde`, endpoints included.
    pub snapshots: usize,
    pub table_size: usize,
}

/// A dyadic sweep of one regularisation width with the other set to zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub values: Vec<f64>,
    /// Order `s` for this sweep; the problem's when absent.
    pub s: Option<f64>,
    pub grid: GridSection,
    /// Accepted fitted-slope window.
    pub slope_window: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub eps: f64,
    pub c1: f64,
    pub n_values: Vec<usize>,
    pub mode: ModeName,
    pub coupling: CouplingName,
    /// Also run the leave-one-out oracle at the smallest `N`.
    pub oracle: bool,
    /// Sub-seed of the slicing directions.
    pub metric_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuationSection {
    pub sigmas: Vec<f64>,
    pub include_limit: bool,
}

impl Default for ExperimentConfig {
    /// The default scenario: d = 2, s = 1/2, f(u) = u, σ = 0.1, Gaussian
    /// datum, L = 8, n = 128, T = 0.5, dt = 2e-3.
    fn default() -> Self {
        Self {
            kind: None,
            seed: 42,
            replicas: 8,
            horizon: 0.5,
            dt: 2e-3,
            output: PathBuf::from("out"),
            problem: ProblemSection::default(),
            grid: GridSection::default(),
            nonlinearity: NonlinearitySpec::Power { m: 1.0 },
            initial: InitialSpec::Gaussian { std: 0.5 },
            pde: PdeSection::default(),
            beta_sweep: SweepSection {
                values: vec![0.125, 0.25, 0.5, 1.0],
                s: None,
                grid: GridSection { n: 128, half_length: 4.0 },
                slope_window: [0.7, 1.3],
            },
            zeta_sweep: SweepSection {
                values: vec![0.25, 0.5, 1.0, 2.0],
                s: Some(0.75),
                grid: GridSection { n: 256, half_length: 16.0 },
                slope_window: [0.2, 0.8],
            },
            schedule: ScheduleSection::default(),
            continuation: ContinuationSection::default(),
        }
    }
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self {
            d: 2,
            s: 0.5,
            sigma: 0.1,
            beta: 0.5,
            zeta: 0.5,
            n_particles: 1024,
        }
    }
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n: 128, half_length: 8.0 }
    }
}

impl Default for PdeSection {
    fn default() -> Self {
        Self {
            equation: EquationName::Macro,
            scheme: SchemeName::Muscl,
            snapshots: 5,
            table_size: 4096,
        }
    }
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            values: Vec::new(),
            s: None,
            grid: GridSection::default(),
            slope_window: [0.0, 0.0],
        }
    }
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self {
            eps: 1e5,
            c1: 4.0,
            n_values: vec![256, 512, 1024, 2048],
            mode: ModeName::SharedField,
            coupling: CouplingName::Dynamics,
            oracle: true,
            metric_seed: 7,
        }
    }
}

impl Default for ContinuationSection {
    fn default() -> Self {
        Self {
            sigmas: vec![0.2, 0.1, 0.05, 0.025],
            include_limit: false,
        }
    }
}

const TAGGED: [&str; 2] = ["initial", "nonlinearity"];

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (key, value) in over {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}

/// A configuration problem, naming the violated invariant.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

fn check(what: &str, r: fracpm::Result<()>) -> Result<(), ConfigError> {
    r.map_err(|e| ConfigError(format!("{what}: {e}")))
}

/// Configuration together with everything resolved from it.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub config: ExperimentConfig,
    /// Canonical TOML text the input hash is taken over.
    pub canonical: String,
    pub raw: RawNonlinearity,
    /// Content of the nonlinearity table file, if any.
    pub table_bytes: Option<Vec<u8>>,
}

impl ExperimentConfig {
    /// Parses a file as overrides of the default configuration: every table
    /// merges key by key into its default, except the tagged `initial` and
    /// `nonlinearity` tables, which replace it.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let user: toml::Table = toml::from_str(text).map_err(|e| ConfigError(format!("cannot parse: {e}")))?;
        let mut merged = toml::Table::try_from(Self::default()).expect("defaults serialise");
        for (key, value) in user {
            match (merged.get_mut(&key), value) {
                (Some(toml::Value::Table(base)), toml::Value::Table(over)) if !TAGGED.contains(&key.as_str()) => {
                    merge(base, over)
                }
                (_, value) => {
                    merged.insert(key, value);
                }
            }
        }
        toml::Value::Table(merged)
            .try_into()
            .map_err(|e| ConfigError(format!("cannot parse: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serialises")
    }

    pub fn params(&self) -> ProblemParams {
        let p = &self.problem;
        ProblemParams {
            d: p.d,
            s: p.s,
            sigma: p.sigma,
            beta: p.beta,
            zeta: p.zeta,
            n_particles: p.n_particles,
        }
    }

    pub fn grid(&self) -> Grid {
        make_grid(self.problem.d, self.grid).expect("validated grid")
    }

    pub fn shape(&self) -> InitialShape {
        match self.initial {
            InitialSpec::Gaussian { std } => InitialShape::Gaussian { std },
            InitialSpec::DoubleBump { offset, std } => InitialShape::DoubleBump { offset, std },
            InitialSpec::Plateau { radius } => InitialShape::Plateau { radius },
            InitialSpec::Constant { value } => InitialShape::Constant { value },
        }
    }

    pub fn equation(&self) -> Equation {
        match self.pde.equation {
            EquationName::Macro => Equation::Macro,
            EquationName::Intermediate => Equation::Intermediate,
        }
    }

    pub fn scheme(&self) -> TransportScheme {
        match self.pde.scheme {
            SchemeName::Muscl => TransportScheme::Muscl,
            SchemeName::Upwind => TransportScheme::Upwind,
        }
    }

    pub fn mode(&self) -> DriftMode {
        match self.schedule.mode {
            ModeName::SharedField => DriftMode::SharedField,
            ModeName::ExactPerParticle => DriftMode::ExactPerParticle,
        }
    }

    pub fn coupling(&self) -> Coupling {
        match self.schedule.coupling {
            CouplingName::Dynamics => Coupling::Dynamics,
            CouplingName::Identical => Coupling::Identical,
        }
    }

    pub fn schedule(&self) -> Schedule {
        let sc = &self.schedule;
        Schedule::new(self.problem.d, self.problem.s, sc.eps, sc.c1, sc.n_values.clone()).expect("validated schedule")
    }

    /// Validates the sections the configured subcommand reads (all of them
    /// when `kind` is unset) against the library preconditions. Relative
    /// table paths are resolved against `base`.
    pub fn resolve(self, base: &Path) -> Result<Resolved, ConfigError> {
        let uses = |kinds: &[&str]| self.kind.as_deref().is_none_or(|k| kinds.contains(&k));
        check("problem", self.params().validate())?;
        let grid = make_grid(self.problem.d, self.grid)?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return invalid(format!("time step must be positive, got {}", self.dt));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return invalid(format!("horizon must be finite and ≥ 0, got {}", self.horizon));
        }
        if self.replicas < 4 {
            return invalid(format!("replicas must be ≥ 4, got {}", self.replicas));
        }
        if self.output.as_os_str().is_empty() {
            return invalid("output directory must not be empty");
        }
        check("initial", self.shape().validate())?;
        if self.problem.sigma == 0.0 {
            return invalid("the regularised datum needs σ > 0");
        }
        if self.pde.table_size < 16 {
            return invalid(format!("pde.table_size must be ≥ 16, got {}", self.pde.table_size));
        }
        if self.pde.snapshots < 2 {
            return invalid("pde.snapshots must be ≥ 2 (both endpoints are written)");
        }
        if self.pde.equation == EquationName::Intermediate && self.problem.beta > 0.0 && self.problem.beta < 2.0 * grid.spacing() {
            return invalid(format!(
                "β = {} is below two grid spacings ({})",
                self.problem.beta,
                2.0 * grid.spacing()
            ));
        }
        if uses(&["converge-beta-zeta"]) {
            for (name, sweep) in [("beta_sweep", &self.beta_sweep), ("zeta_sweep", &self.zeta_sweep)] {
                sweep.validate(name, &self)?;
            }
        }
        if uses(&["converge-n", "chaos-test"]) {
            let sc = &self.schedule;
            let schedule = Schedule::new(self.problem.d, self.problem.s, sc.eps, sc.c1, sc.n_values.clone())
                .map_err(|e| ConfigError(format!("schedule: {e}")))?;
            for (n, beta, zeta) in schedule.points() {
                if beta < 2.0 * grid.spacing() {
                    return invalid(format!("schedule β({n}) = {beta:.4} is below two grid spacings"));
                }
                check("schedule", ProblemParams::new(self.problem.d, self.problem.s, self.problem.sigma, beta, zeta, n).map(|_| ()))?;
            }
            if sc.n_values.len() < 3 {
                return invalid("schedule.n_values needs at least 3 entries for a rate fit");
            }
        }
        if uses(&["sigma-limit"]) {
            let c = &self.continuation;
            if c.sigmas.len() < 2 || c.sigmas.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                return invalid("continuation.sigmas needs ≥ 2 positive values");
            }
            if c.sigmas.windows(2).any(|w| w[1] >= w[0]) {
                return invalid("continuation.sigmas must be strictly decreasing");
            }
        }
        let (raw, table_bytes) = match &self.nonlinearity {
            NonlinearitySpec::Power { m } => (RawNonlinearity::Power(*m), None),
            NonlinearitySpec::Table { path } => {
                let full = if path.is_absolute() { path.clone() } else { base.join(path) };
                let bytes = std::fs::read(&full)
                    .map_err(|e| ConfigError(format!("cannot read nonlinearity table {}: {e}", full.display())))?;
                (parse_table(&bytes)?, Some(bytes))
            }
        };
        check("nonlinearity", raw.validate())?;
        let canonical = self.to_toml();
        Ok(Resolved {
            config: self,
            canonical,
            raw,
            table_bytes,
        })
    }
}

impl SweepSection {
    pub fn order(&self, cfg: &ExperimentConfig) -> f64 {
        self.s.unwrap_or(cfg.problem.s)
    }

    pub fn grid(&self, d: usize) -> Grid {
        make_grid(d, self.grid).expect("validated sweep grid")
    }

    fn validate(&self, name: &str, cfg: &ExperimentConfig) -> Result<(), ConfigError> {
        if self.values.len() < 3 {
            return invalid(format!("{name}.values needs at least 3 entries for a rate fit"));
        }
        if self.values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return invalid(format!("{name}.values must be positive"));
        }
        let grid = make_grid(cfg.problem.d, self.grid).map_err(|e| ConfigError(format!("{name}: {}", e.0)))?;
        let probe = ProblemParams { s: self.order(cfg), ..cfg.params() };
        check(name, probe.validate())?;
        if name == "beta_sweep" && self.values.iter().any(|b| *b < 2.0 * grid.spacing()) {
            return invalid(format!("{name}: every β must be at least two grid spacings ({})", 2.0 * grid.spacing()));
        }
        let [lo, hi] = self.slope_window;
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return invalid(format!("{name}.slope_window must be an increasing pair"));
        }
        Ok(())
    }
}

fn make_grid(d: usize, g: GridSection) -> Result<Grid, ConfigError> {
    Grid::new(d, g.n, g.half_length).map_err(|e| ConfigError(format!("grid: {e}")))
}

fn parse_table(bytes: &[u8]) -> Result<RawNonlinearity, ConfigError> {
    let mut reader = csv::Reader::from_reader(bytes);
    let mut u = Vec::new();
    let mut f = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| ConfigError(format!("nonlinearity table row {}: {e}", i + 1)))?;
        if row.len() != 2 {
            return invalid(format!("nonlinearity table row {} needs two columns", i + 1));
        }
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| ConfigError(format!("nonlinearity table row {}: {e}", i + 1)))
        };
        u.push(parse(&row[0])?);
        f.push(parse(&row[1])?);
    }
    Ok(RawNonlinearity::Tabulated { u, f })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, back);
        back.resolve(Path::new(".")).unwrap();
    }

    #[test]
    fn partial_files_fill_in_defaults() {
        let cfg = ExperimentConfig::parse("seed = 3\n[problem]\nsigma = 0.2\n[initial]\nshape = \"plateau\"\nradius = 1.0\n").unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.problem.sigma, 0.2);
        assert_eq!(cfg.problem.d, 2);
        assert_eq!(cfg.shape(), InitialShape::Plateau { radius: 1.0 });
        let cfg = ExperimentConfig::parse("[zeta_sweep]\ngrid = { n = 64 }\n").unwrap();
        let default = ExperimentConfig::default().zeta_sweep;
        assert_eq!(cfg.zeta_sweep.values, default.values);
        assert_eq!(cfg.zeta_sweep.s, Some(0.75));
        assert_eq!(cfg.zeta_sweep.grid.n, 64);
        assert_eq!(cfg.zeta_sweep.grid.half_length, default.grid.half_length);
    }

    #[test]
    fn violations_name_the_invariant() {
        let bad = |text: &str| ExperimentConfig::parse(text).and_then(|c| c.resolve(Path::new(".")).map(|_| ())).unwrap_err().0;
        assert!(bad("[grid]\nn = 100\n").contains("grid"));
        assert!(bad("[problem]\ns = 1.5\n").contains("order"));
        assert!(bad("dt = -1.0\n").contains("time step"));
        assert!(bad("replicas = 2\n").contains("replicas"));
        assert!(bad("[continuation]\nsigmas = [0.1, 0.2]\n").contains("decreasing"));
        assert!(bad("[beta_sweep]\nvalues = [0.01, 0.5, 1.0]\n").contains("grid spacings"));
        assert!(bad("unknown = 1\n").contains("parse"));
        assert!(bad("[nonlinearity]\nkind = \"table\"\npath = \"/nonexistent.csv\"\n").contains("table"));
    }

    #[test]
    fn tables_parse_and_validate() {
        let raw = parse_table(b"u,f\n0,0\n1,1\n2,4\n").unwrap();
        assert_eq!(raw, RawNonlinearity::Tabulated { u: vec![0.0, 1.0, 2.0], f: vec![0.0, 1.0, 4.0] });
        assert!(parse_table(b"u,f\n0,x\n").is_err());
    }
}
