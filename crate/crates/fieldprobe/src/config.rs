//! Declarative scenario configuration: lattice, masses, coupling
//! profiles, states, test functions and the experiment list, parsed from
//! TOML and validated fail-fast against every module precondition.

use num_complex::Complex64 as C64;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::lattice::Lattice;
use crate::scheme::ScatteringContext;
use crate::states::QuasifreeState;

/// Top-level scenario file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub lattice: LatticeSpec,
    pub system: SystemSpec,
    pub probes: Vec<ProbeConfig>,
    #[serde(default)]
    pub test_functions: TestFunctionSpec,
    #[serde(default)]
    pub experiments: Vec<ExperimentSpec>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub tolerances: ToleranceOverrides,
}

fn default_seed() -> u64 {
    0xF1E1D
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub n_t: usize,
    pub n_x: usize,
    pub dt: f64,
    pub dx: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub mass: f64,
    #[serde(default)]
    pub state: StateSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub mass: f64,
    #[serde(default)]
    pub state: StateSpec,
    pub coupling: ShapeSpec,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
}

fn default_lambda() -> f64 {
    1.0
}

/// State preparation of one field component.
#[derive(Debug, Clone, Deserialize, Default)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum StateSpec {
    #[default]
    Vacuum,
    Coherent {
        source: ShapeSpec,
    },
}

impl StateSpec {
    pub fn build(&self, lattice: Lattice, mass: f64) -> Result<QuasifreeState> {
        match self {
            StateSpec::Vacuum => QuasifreeState::vacuum(lattice, mass),
            StateSpec::Coherent { source } => {
                QuasifreeState::coherent(lattice, mass, &source.build(lattice)?)
            }
        }
    }
}

/// A test-function or profile shape on the grid.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum ShapeSpec {
    /// Characteristic function of [t0, t1] x [x0, x1] times amplitude.
    /// The x range is circular when x1 < x0.
    Rectangle { t0: usize, t1: usize, x0: usize, x1: usize, amplitude: f64 },
    /// Smooth compactly supported bump on the same box.
    Bump { t0: usize, t1: usize, x0: usize, x1: usize, amplitude: f64 },
    /// Explicit cells: rows (t, x, re, im).
    Cells { values: Vec<(usize, usize, f64, f64)> },
    /// Cells read from a CSV file with rows t,x,re,im; `#` comment lines
    /// and a header row are skipped.
    Csv { path: String },
    /// Zero everywhere.
    Zero,
}

fn bump_profile(s: f64) -> f64 {
    if s.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

impl ShapeSpec {
    pub fn build(&self, lattice: Lattice) -> Result<GridFunction> {
        match self {
            ShapeSpec::Zero => Ok(GridFunction::zeros(lattice)),
            ShapeSpec::Rectangle { t0, t1, x0, x1, amplitude } => {
                check_box(lattice, *t0, *t1)?;
                let width = circ_width(lattice, *x0, *x1);
                let mut g = GridFunction::zeros(lattice);
                for t in *t0..=*t1 {
                    for dx in 0..=width {
                        g.set(t, (*x0 + dx) % lattice.n_x, C64::from(*amplitude));
                    }
                }
                Ok(g)
            }
            ShapeSpec::Bump { t0, t1, x0, x1, amplitude } => {
                check_box(lattice, *t0, *t1)?;
                let width = circ_width(lattice, *x0, *x1);
                let mut g = GridFunction::zeros(lattice);
                let t_mid = (*t0 + *t1) as f64 / 2.0;
                let t_rad = (*t1 - *t0) as f64 / 2.0 + 0.5;
                let x_rad = width as f64 / 2.0 + 0.5;
                for t in *t0..=*t1 {
                    for dx in 0..=width {
                        let ts = (t as f64 - t_mid) / t_rad;
                        let xs = (dx as f64 - width as f64 / 2.0) / x_rad;
                        let v = amplitude * bump_profile(ts) * bump_profile(xs);
                        g.set(t, (*x0 + dx) % lattice.n_x, C64::from(v));
                    }
                }
                Ok(g)
            }
            ShapeSpec::Cells { values } => cells_to_grid(lattice, values),
            ShapeSpec::Csv { path } => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read {path}: {e}")))?;
                let mut values = Vec::new();
                for (line_no, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') || line.starts_with("t,") {
                        continue;
                    }
                    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
                    if fields.len() != 4 {
                        return Err(Error::Config(format!(
                            "{path}:{}: expected 4 fields t,x,re,im",
                            line_no + 1
                        )));
                    }
                    let parse = |s: &str| -> Result<f64> {
                        s.parse()
                            .map_err(|_| Error::Config(format!("{path}:{}: bad number {s}", line_no + 1)))
                    };
                    values.push((
                        parse(fields[0])? as usize,
                        parse(fields[1])? as usize,
                        parse(fields[2])?,
                        parse(fields[3])?,
                    ));
                }
                cells_to_grid(lattice, &values)
            }
        }
    }
}

fn cells_to_grid(lattice: Lattice, values: &[(usize, usize, f64, f64)]) -> Result<GridFunction> {
    let mut g = GridFunction::zeros(lattice);
    for (t, x, re, im) in values {
        if *t >= lattice.n_t {
            return Err(Error::CellOutOfRange { t: *t, x: *x, n_t: lattice.n_t, n_x: lattice.n_x });
        }
        g.set(*t, *x % lattice.n_x, C64::new(*re, *im));
    }
    Ok(g)
}

fn check_box(lattice: Lattice, t0: usize, t1: usize) -> Result<()> {
    if t0 > t1 || t1 >= lattice.n_t {
        return Err(Error::Config(format!(
            "time range [{t0}, {t1}] out of bounds for n_t = {}",
            lattice.n_t
        )));
    }
    Ok(())
}

fn circ_width(lattice: Lattice, x0: usize, x1: usize) -> usize {
    if x1 >= x0 {
        x1 - x0
    } else {
        lattice.n_x - x0 + x1
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct TestFunctionSpec {
    #[serde(default)]
    pub h: Option<ShapeSpec>,
    #[serde(default)]
    pub h2: Option<ShapeSpec>,
}

/// One experiment entry: a registry name plus its parameters.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    /// Sample count for randomized suites.
    #[serde(default)]
    pub samples: Option<usize>,
    /// Lambda grid for sweeps and characteristic functions.
    #[serde(default)]
    pub lambdas: Option<Vec<f64>>,
    /// Worldline site index.
    #[serde(default)]
    pub site: Option<usize>,
    /// Worldline energy gap.
    #[serde(default)]
    pub gap: Option<f64>,
    /// Worldline window slices [t0, t1].
    #[serde(default)]
    pub window: Option<(usize, usize)>,
    /// Spatial widths for the worldline concentration sweep.
    #[serde(default)]
    pub widths: Option<Vec<usize>>,
}

/// Tolerances used by the experiment pass criteria. The defaults pin the
/// acceptance thresholds; a config may only tighten or loosen them
/// explicitly.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceOverrides {
    pub identity: f64,
    pub additivity: f64,
    pub factorization: f64,
    pub slope_margin: f64,
    pub detector_slope_margin: f64,
}

impl Default for ToleranceOverrides {
    fn default() -> Self {
        Self {
            identity: 1e-9,
            additivity: 1e-10,
            factorization: 1e-10,
            slope_margin: 0.15,
            detector_slope_margin: 0.2,
        }
    }
}

/// Everything a run needs, built and validated from a config.
pub struct PreparedScenario {
    pub lattice: Lattice,
    pub config: ScenarioConfig,
    /// Scattering context of probe 0, coupling scaled by its lambda.
    pub context: ScatteringContext,
    /// The same context at unit coupling scale.
    pub context_unit: ScatteringContext,
    /// Product state (system, probe 0).
    pub prep: QuasifreeState,
    /// System state alone.
    pub system_state: QuasifreeState,
    /// Per-probe single-component states.
    pub probe_states: Vec<QuasifreeState>,
    /// Per-probe coupling profiles at unit scale.
    pub couplings: Vec<GridFunction>,
    pub h: GridFunction,
    pub h2: GridFunction,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Builds and validates every object the experiments need.
    pub fn prepare(&self) -> Result<PreparedScenario> {
        let lattice = Lattice::new(self.lattice.n_t, self.lattice.n_x, self.lattice.dt, self.lattice.dx)?;
        if self.probes.is_empty() {
            return Err(Error::Config("at least one probe is required".into()));
        }
        let system_state = self.system.state.build(lattice, self.system.mass)?;
        let mut probe_states = Vec::new();
        let mut couplings = Vec::new();
        for p in &self.probes {
            probe_states.push(p.state.build(lattice, p.mass)?);
            couplings.push(p.coupling.build(lattice)?);
        }
        let p0 = &self.probes[0];
        let rho_scaled = couplings[0].scaled(C64::from(p0.lambda));
        let context = ScatteringContext::system_probe(lattice, self.system.mass, p0.mass, &rho_scaled)?;
        let context_unit = ScatteringContext::system_probe(lattice, self.system.mass, p0.mass, &couplings[0])?;
        let prep = QuasifreeState::product(vec![system_state.clone(), probe_states[0].clone()])?;
        let h = match &self.test_functions.h {
            Some(s) => s.build(lattice)?,
            None => default_h(lattice, &couplings[0])?,
        };
        let h2 = match &self.test_functions.h2 {
            Some(s) => s.build(lattice)?,
            None => default_h2(lattice, &couplings[0])?,
        };
        for spec in &self.experiments {
            crate::experiments::validate_spec(spec)?;
        }
        Ok(PreparedScenario {
            lattice,
            config: self.clone(),
            context,
            context_unit,
            prep,
            system_state,
            probe_states,
            couplings,
            h,
            h2,
        })
    }
}

/// A default late-time probe smearing over the future cone of the
/// coupling support, used when the config gives none.
fn default_h(lattice: Lattice, coupling: &GridFunction) -> Result<GridFunction> {
    default_probe_function(lattice, coupling, 0)
}

fn default_h2(lattice: Lattice, coupling: &GridFunction) -> Result<GridFunction> {
    default_probe_function(lattice, coupling, 1)
}

fn default_probe_function(lattice: Lattice, coupling: &GridFunction, variant: usize) -> Result<GridFunction> {
    let support = coupling.support();
    let (t_ref, x_ref) = if support.is_empty() {
        (lattice.n_t / 3, lattice.n_x / 2)
    } else {
        let t = support.t_max().unwrap();
        let x = support.cells().next().unwrap().x;
        (t, x)
    };
    let t0 = (t_ref + 2 + variant).min(lattice.n_t - 5);
    let t1 = (t0 + 2).min(lattice.n_t - 3);
    let spec = ShapeSpec::Bump {
        t0,
        t1,
        x0: (x_ref + lattice.n_x - 2 - variant) % lattice.n_x,
        x1: (x_ref + 3 + variant) % lattice.n_x,
        amplitude: 1.0,
    };
    spec.build(lattice)
}
