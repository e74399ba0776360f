//! TOML scenario files.
//!
//! Every section mirrors a part of [`ScenarioConfig`]. Matrices are row-major
//! nested arrays; a matrix entry may instead be a table with
//! `kind = "sinusoidal"` (`base`, `amplitude`, `omega`) or
//! `kind = "tabulated"` (`times`, `values`).

use std::path::Path;

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::controller::ControllerGains;
use crate::error::{Error, Result};
use crate::interaction::{HumanParams, Horizon, ImpedanceParams, InteractionModel, MatrixSchedule, Profile};
use crate::manipulator::{ElbowBranch, ManipulatorParams};
use crate::riccati::{LqProblem, ScheduledSystem, DEFAULT_GUARD_STEPS};
use crate::simulation::{
    CostWeights, NetworkOptions, ScenarioConfig, DEFAULT_NODES, DEFAULT_SEED, DEFAULT_SETTLE_TIME,
    DEFAULT_STEP, DEFAULT_TF, DEFAULT_WIDTH,
};

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScheduleSpec {
    Matrix(Rows),
    Table(ScheduleTable),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ScheduleTable {
    Constant { base: Rows },
    Sinusoidal { base: Rows, amplitude: Rows, omega: f64 },
    Tabulated { times: Vec<f64>, values: Vec<Rows> },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub t0: Option<f64>,
    pub tf: Option<f64>,
    pub step: Option<f64>,
    pub guard_steps: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotSection {
    pub m1: Option<f64>,
    pub m2: Option<f64>,
    pub l1: Option<f64>,
    pub l2: Option<f64>,
    pub i1: Option<f64>,
    pub i2: Option<f64>,
    pub g: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpedanceSection {
    #[serde(rename = "M")]
    pub m: Option<ScheduleSpec>,
    #[serde(rename = "B")]
    pub b: Option<ScheduleSpec>,
    #[serde(rename = "K")]
    pub k: Option<ScheduleSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HumanSection {
    #[serde(rename = "Kd")]
    pub kd: Option<ScheduleSpec>,
    #[serde(rename = "Kp")]
    pub kp: Option<ScheduleSpec>,
    pub ke: Option<ScheduleSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    #[serde(rename = "Q")]
    pub q: Option<ScheduleSpec>,
    #[serde(rename = "S")]
    pub s: Option<ScheduleSpec>,
    #[serde(rename = "R")]
    pub r: Option<ScheduleSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySection {
    pub x0: Option<Vec<f64>>,
    pub xf: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaSpec {
    Scalar(f64),
    Matrix(Rows),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub zeta: Option<f64>,
    pub k_rc: Option<f64>,
    pub alpha: Option<f64>,
    pub sigma: Option<f64>,
    /// A scalar `g` stands for `g * I`.
    pub gamma: Option<GammaSpec>,
    pub nodes: Option<usize>,
    pub seed: Option<u64>,
    pub width: Option<f64>,
    pub scales: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackingSection {
    pub step: Option<f64>,
    pub branch: Option<String>,
    pub initial_offset: Option<[f64; 2]>,
    pub settle_time: Option<f64>,
}

/// The file as written, before defaults and validation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub robot: RobotSection,
    #[serde(default)]
    pub impedance: ImpedanceSection,
    #[serde(default)]
    pub human: HumanSection,
    #[serde(default)]
    pub cost: CostSection,
    #[serde(default)]
    pub boundary: BoundarySection,
    #[serde(default)]
    pub controller: ControllerSection,
    #[serde(default)]
    pub tracking: TrackingSection,
}

fn required<T>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| Error::config(key, "missing required key"))
}

fn matrix(rows: &Rows, key: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::config(key, "expected a non-empty rectangular matrix (list of equal-length rows)"));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::config(key, "matrix entries must be finite"));
    }
    Ok(DMatrix::from_row_iterator(nrows, ncols, rows.iter().flatten().copied()))
}

fn rows(m: &DMatrix<f64>) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn schedule(spec: &ScheduleSpec, key: &str, shape: (usize, usize)) -> Result<MatrixSchedule> {
    let keyed = |e: Error| match e {
        Error::InvalidArgument(msg) => Error::config(key, msg),
        other => other,
    };
    let s = match spec {
        ScheduleSpec::Matrix(r) | ScheduleSpec::Table(ScheduleTable::Constant { base: r }) => {
            MatrixSchedule::constant(matrix(r, key)?)
        }
        ScheduleSpec::Table(ScheduleTable::Sinusoidal { base, amplitude, omega }) => {
            MatrixSchedule::sinusoidal(matrix(base, key)?, matrix(amplitude, key)?, *omega).map_err(keyed)?
        }
        ScheduleSpec::Table(ScheduleTable::Tabulated { times, values }) => {
            let values = values.iter().map(|v| matrix(v, key)).collect::<Result<Vec<_>>>()?;
            MatrixSchedule::tabulated(times.clone(), values).map_err(keyed)?
        }
    };
    if s.shape() != shape {
        return Err(Error::config(
            key,
            format!("expected a {}x{} matrix, got {}x{}", shape.0, shape.1, s.shape().0, s.shape().1),
        ));
    }
    Ok(s)
}

fn schedule_spec(s: &MatrixSchedule) -> ScheduleSpec {
    match s.profile() {
        Profile::Constant(m) => ScheduleSpec::Matrix(rows(m)),
        Profile::Sinusoidal { base, amplitude, omega } => ScheduleSpec::Table(ScheduleTable::Sinusoidal {
            base: rows(base),
            amplitude: rows(amplitude),
            omega: *omega,
        }),
        Profile::Tabulated { times, values } => ScheduleSpec::Table(ScheduleTable::Tabulated {
            times: times.clone(),
            values: values.iter().map(rows).collect(),
        }),
    }
}

fn vector(v: &[f64], key: &str, len: usize) -> Result<DVector<f64>> {
    if v.len() != len {
        return Err(Error::config(key, format!("expected {len} entries, got {}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::config(key, "entries must be finite"));
    }
    Ok(DVector::from_column_slice(v))
}

fn positive(v: f64, key: &str) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(key, format!("must be strictly positive, got {v}")))
    }
}

impl RawConfig {
    pub fn into_scenario(self) -> Result<ScenarioConfig> {
        let sim = &self.simulation;
        let t0 = sim.t0.unwrap_or(0.0);
        let tf = sim.tf.unwrap_or(DEFAULT_TF);
        let horizon = Horizon::new(t0, tf).map_err(|e| Error::config("simulation.tf", e.to_string()))?;
        let step = positive(sim.step.unwrap_or(DEFAULT_STEP), "simulation.step")?;

        let r = &self.robot;
        let (m1, m2) = (required(r.m1, "robot.m1")?, required(r.m2, "robot.m2")?);
        let (l1, l2) = (required(r.l1, "robot.l1")?, required(r.l2, "robot.l2")?);
        let robot = ManipulatorParams {
            m1,
            m2,
            l1,
            l2,
            i1: r.i1.unwrap_or(m1 * l1 * l1 / 12.0),
            i2: r.i2.unwrap_or(m2 * l2 * l2 / 12.0),
            g: r.g.unwrap_or(9.81),
        };
        robot.validate()?;

        let sq = (2, 2);
        let imp = &self.impedance;
        let hum = &self.human;
        let interaction = InteractionModel {
            impedance: ImpedanceParams {
                mass: schedule(&required(imp.m.clone(), "impedance.M")?, "impedance.M", sq)?,
                damping: schedule(&required(imp.b.clone(), "impedance.B")?, "impedance.B", sq)?,
                stiffness: schedule(&required(imp.k.clone(), "impedance.K")?, "impedance.K", sq)?,
            },
            human: HumanParams {
                damping: schedule(&required(hum.kd.clone(), "human.Kd")?, "human.Kd", sq)?,
                stiffness: schedule(&required(hum.kp.clone(), "human.Kp")?, "human.Kp", sq)?,
                gain: schedule(&required(hum.ke.clone(), "human.ke")?, "human.ke", sq)?,
            },
        };

        let c = &self.cost;
        let cost = CostWeights {
            q: schedule(&required(c.q.clone(), "cost.Q")?, "cost.Q", (6, 6))?,
            s: match &c.s {
                Some(s) => schedule(s, "cost.S", (6, 2))?,
                None => MatrixSchedule::zeros(6, 2),
            },
            r: schedule(&required(c.r.clone(), "cost.R")?, "cost.R", (2, 2))?,
        };

        let x0 = vector(&required(self.boundary.x0.clone(), "boundary.x0")?, "boundary.x0", 6)?;
        let xf = vector(&required(self.boundary.xf.clone(), "boundary.xf")?, "boundary.xf", 6)?;

        let k = &self.controller;
        let nodes = k.nodes.unwrap_or(DEFAULT_NODES);
        if nodes == 0 {
            return Err(Error::config("controller.nodes", "must be at least 1"));
        }
        let seed = k.seed.unwrap_or(DEFAULT_SEED);
        if seed > i64::MAX as u64 {
            return Err(Error::config("controller.seed", "must fit in a signed 64-bit integer"));
        }
        let gamma = match &k.gamma {
            None => DMatrix::identity(nodes, nodes),
            Some(GammaSpec::Scalar(g)) => DMatrix::identity(nodes, nodes) * *g,
            Some(GammaSpec::Matrix(r)) => matrix(r, "controller.gamma")?,
        };
        let gains = ControllerGains {
            zeta: required(k.zeta, "controller.zeta")?,
            k_rc: required(k.k_rc, "controller.k_rc")?,
            alpha: required(k.alpha, "controller.alpha")?,
            sigma: required(k.sigma, "controller.sigma")?,
            gamma,
        };
        let network = NetworkOptions {
            nodes,
            seed,
            width: k.width.unwrap_or(DEFAULT_WIDTH),
            scales: k.scales.unwrap_or([1.0; 3]),
        };

        let tr = &self.tracking;
        let branch = match &tr.branch {
            None => ElbowBranch::Down,
            Some(s) => ElbowBranch::parse(s)
                .ok_or_else(|| Error::config("tracking.branch", format!("expected \"elbow-up\" or \"elbow-down\", got {s:?}")))?,
        };
        let offset = tr.initial_offset.unwrap_or([0.0; 2]);

        let config = ScenarioConfig {
            robot,
            interaction,
            cost,
            x0,
            xf,
            horizon,
            step,
            tracking_step: positive(tr.step.unwrap_or(step), "tracking.step")?,
            guard_steps: sim.guard_steps.unwrap_or(DEFAULT_GUARD_STEPS),
            gains,
            network,
            branch,
            initial_offset: Vector2::new(offset[0], offset[1]),
            settle_time: tr.settle_time.unwrap_or(DEFAULT_SETTLE_TIME),
        }
        .bound_to_horizon();
        config.validate()?;
        Ok(config)
    }

    /// Fully explicit form of `config`, defaults included.
    pub fn from_scenario(config: &ScenarioConfig) -> Self {
        let r = &config.robot;
        let i = &config.interaction;
        let g = &config.gains;
        let n = &config.network;
        Self {
            simulation: SimulationSection {
                t0: Some(config.horizon.t0),
                tf: Some(config.horizon.tf),
                step: Some(config.step),
                guard_steps: Some(config.guard_steps),
            },
            robot: RobotSection {
                m1: Some(r.m1),
                m2: Some(r.m2),
                l1: Some(r.l1),
                l2: Some(r.l2),
                i1: Some(r.i1),
                i2: Some(r.i2),
                g: Some(r.g),
            },
            impedance: ImpedanceSection {
                m: Some(schedule_spec(&i.impedance.mass)),
                b: Some(schedule_spec(&i.impedance.damping)),
                k: Some(schedule_spec(&i.impedance.stiffness)),
            },
            human: HumanSection {
                kd: Some(schedule_spec(&i.human.damping)),
                kp: Some(schedule_spec(&i.human.stiffness)),
                ke: Some(schedule_spec(&i.human.gain)),
            },
            cost: CostSection {
                q: Some(schedule_spec(&config.cost.q)),
                s: Some(schedule_spec(&config.cost.s)),
                r: Some(schedule_spec(&config.cost.r)),
            },
            boundary: BoundarySection {
                x0: Some(config.x0.iter().copied().collect()),
                xf: Some(config.xf.iter().copied().collect()),
            },
            controller: ControllerSection {
                zeta: Some(g.zeta),
                k_rc: Some(g.k_rc),
                alpha: Some(g.alpha),
                sigma: Some(g.sigma),
                gamma: Some(GammaSpec::Matrix(rows(&g.gamma))),
                nodes: Some(n.nodes),
                seed: Some(n.seed),
                width: Some(n.width),
                scales: Some(n.scales),
            },
            tracking: TrackingSection {
                step: Some(config.tracking_step),
                branch: Some(config.branch.as_str().to_string()),
                initial_offset: Some([config.initial_offset[0], config.initial_offset[1]]),
                settle_time: Some(config.settle_time),
            },
        }
    }
}

fn deserialize<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::config("<document>", e.message().to_string()))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let key = if path == "." { "<document>".to_string() } else { path };
        Error::config(key, e.inner().message().to_string())
    })
}

pub fn parse_raw(text: &str) -> Result<RawConfig> {
    deserialize(text)
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    parse_raw(text)?.into_scenario()
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

pub fn serialize_config(config: &ScenarioConfig) -> String {
    toml::to_string(&RawConfig::from_scenario(config)).expect("scenario config is always representable")
}

/// Standalone LQ problem file for the oracle command. `A`, `B`, `Q`, `R`,
/// `tf`, `x0` and `xf` are required; `S` defaults to zero and `t0` to 0.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LqProblemFile {
    #[serde(rename = "A")]
    pub a: Option<ScheduleSpec>,
    #[serde(rename = "B")]
    pub b: Option<ScheduleSpec>,
    #[serde(rename = "Q")]
    pub q: Option<ScheduleSpec>,
    #[serde(rename = "S")]
    pub s: Option<ScheduleSpec>,
    #[serde(rename = "R")]
    pub r: Option<ScheduleSpec>,
    pub t0: Option<f64>,
    pub tf: Option<f64>,
    pub x0: Option<Vec<f64>>,
    pub xf: Option<Vec<f64>>,
}

pub fn parse_lq_problem(text: &str) -> Result<LqProblem<ScheduledSystem>> {
    let f: LqProblemFile = deserialize(text)?;
    let a_spec = required(f.a, "A")?;
    let n = spec_rows(&a_spec);
    let b_spec = required(f.b, "B")?;
    let m = spec_cols(&b_spec);
    let a = schedule(&a_spec, "A", (n, n))?;
    let b = schedule(&b_spec, "B", (n, m))?;
    let q = schedule(&required(f.q, "Q")?, "Q", (n, n))?;
    let s = match &f.s {
        Some(s) => schedule(s, "S", (n, m))?,
        None => MatrixSchedule::zeros(n, m),
    };
    let r = schedule(&required(f.r, "R")?, "R", (m, m))?;
    let horizon = Horizon::new(f.t0.unwrap_or(0.0), required(f.tf, "tf")?)
        .map_err(|e| Error::config("tf", e.to_string()))?;
    let x0 = vector(&required(f.x0, "x0")?, "x0", n)?;
    let xf = vector(&required(f.xf, "xf")?, "xf", n)?;
    LqProblem::new(
        ScheduledSystem { a: a.within(horizon), b: b.within(horizon) },
        q.within(horizon),
        s.within(horizon),
        r.within(horizon),
        horizon,
        x0,
        xf,
    )
    .map_err(|e| match e {
        Error::Config { key, message } => Error::config(key.trim_start_matches("cost.").trim_start_matches("boundary."), message),
        other => other,
    })
}

fn spec_first(spec: &ScheduleSpec) -> Option<&Rows> {
    match spec {
        ScheduleSpec::Matrix(r) => Some(r),
        ScheduleSpec::Table(ScheduleTable::Constant { base }) => Some(base),
        ScheduleSpec::Table(ScheduleTable::Sinusoidal { base, .. }) => Some(base),
        ScheduleSpec::Table(ScheduleTable::Tabulated { values, .. }) => values.first(),
    }
}

fn spec_rows(spec: &ScheduleSpec) -> usize {
    spec_first(spec).map_or(0, Vec::len)
}

fn spec_cols(spec: &ScheduleSpec) -> usize {
    spec_first(spec).and_then(|r| r.first()).map_or(0, Vec::len)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const BENCHMARK: &str = r#"
[simulation]
tf = 10.0
step = 0.001

[robot]
m1 = 5.0
m2 = 5.0
l1 = 1.0
l2 = 1.0

[impedance]
M = [[5.0, 1.0], [1.0, -3.0]]
B = [[20.0, 0.0], [5.0, 15.0]]
K = [[1.0, 0.5], [0.0, 0.0]]

[human]
Kd = [[10.0, 0.0], [0.0, 10.0]]
Kp = [[2.0, 0.0], [0.0, 2.0]]
ke = [[1.0, 0.0], [0.0, 1.0]]

[cost]
Q = [[1, 0, 0, 0, 0, 0], [0, 1, 0, 0, 0, 0], [0, 0, 1, 0, 0, 0], [0, 0, 0, 1, 0, 0], [0, 0, 0, 0, 1, 0], [0, 0, 0, 0, 0, 1]]
R = [[1.0, 0.0], [0.0, 1.0]]

[boundary]
x0 = [-0.5, 1.0, 0.0, 0.0, 0.0, 0.0]
xf = [0.8, -0.6, 0.0, 0.0, 0.0, 0.0]

[controller]
zeta = 0.1
k_rc = 50.0
alpha = 10.0
sigma = 0.1
"#;

    fn key_of(err: Error) -> String {
        match err {
            Error::Config { key, .. } => key,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_file_matches_benchmark() {
        let c = parse_config(BENCHMARK).unwrap();
        assert_eq!(c, ScenarioConfig::benchmark());
    }

    #[test]
    fn missing_r_names_key() {
        let text = BENCHMARK.replace("R = [[1.0, 0.0], [0.0, 1.0]]\n", "");
        assert_eq!(key_of(parse_config(&text).unwrap_err()), "cost.R");
    }

    #[test]
    fn zero_r_rejected() {
        let text = BENCHMARK.replace("R = [[1.0, 0.0], [0.0, 1.0]]", "R = [[0.0, 0.0], [0.0, 0.0]]");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("positive definite"), "{err}");
        assert_eq!(key_of(err), "cost.R");
    }

    #[test]
    fn unknown_key_rejected() {
        let text = BENCHMARK.replace("sigma = 0.1", "sigma = 0.1\nsigmaa = 0.2");
        let err = parse_config(&text).unwrap_err();
        assert!(err.to_string().contains("sigmaa"), "{err}");
        assert_eq!(key_of(err), "controller.sigmaa");
        let text = format!("{BENCHMARK}\n[extra]\nx = 1\n");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn wrong_type_names_path() {
        let text = BENCHMARK.replace("zeta = 0.1", "zeta = \"small\"");
        assert_eq!(key_of(parse_config(&text).unwrap_err()), "controller.zeta");
    }

    #[test]
    fn wrong_shapes_rejected() {
        let text = BENCHMARK.replace("x0 = [-0.5, 1.0, 0.0, 0.0, 0.0, 0.0]", "x0 = [-0.5, 1.0]");
        assert_eq!(key_of(parse_config(&text).unwrap_err()), "boundary.x0");
        let text = BENCHMARK.replace("K = [[1.0, 0.5], [0.0, 0.0]]", "K = [[1.0, 0.5]]");
        assert_eq!(key_of(parse_config(&text).unwrap_err()), "impedance.K");
        let text = BENCHMARK.replace("K = [[1.0, 0.5], [0.0, 0.0]]", "K = [[1.0, 0.5], [0.0]]");
        assert_eq!(key_of(parse_config(&text).unwrap_err()), "impedance.K");
    }

    #[test]
    fn singular_impedance_mass_rejected() {
        let text = BENCHMARK.replace("M = [[5.0, 1.0], [1.0, -3.0]]", "M = [[1.0, 2.0], [2.0, 4.0]]");
        assert_eq!(key_of(parse_config(&text).unwrap_err()), "impedance.M");
    }

    #[test]
    fn schedule_tables_parse() {
        let text = BENCHMARK.replace(
            "K = [[1.0, 0.5], [0.0, 0.0]]",
            "K = { kind = \"sinusoidal\", base = [[1.0, 0.5], [0.0, 0.0]], amplitude = [[0.1, 0.0], [0.0, 0.1]], omega = 3.14 }",
        );
        let c = parse_config(&text).unwrap();
        assert!(!c.interaction.impedance.stiffness.is_constant());
        let text = BENCHMARK.replace(
            "ke = [[1.0, 0.0], [0.0, 1.0]]",
            "ke = { kind = \"tabulated\", times = [0.0, 10.0], values = [[[1.0, 0.0], [0.0, 1.0]], [[2.0, 0.0], [0.0, 2.0]]] }",
        );
        let c = parse_config(&text).unwrap();
        let mid = c.interaction.human.gain.evaluate(5.0).unwrap();
        assert_eq!(mid, DMatrix::identity(2, 2) * 1.5);
        assert!(c.interaction.human.gain.evaluate(10.5).is_err());
    }

    #[test]
    fn scalar_gamma_and_overrides() {
        let text = BENCHMARK.replace("sigma = 0.1", "sigma = 0.1\ngamma = 5.0\nnodes = 4\nseed = 11")
            + "\n[tracking]\nbranch = \"elbow-up\"\ninitial_offset = [0.1, -0.1]\n";
        let c = parse_config(&text).unwrap();
        assert_eq!(c.gains.gamma, DMatrix::identity(4, 4) * 5.0);
        assert_eq!(c.network.seed, 11);
        assert_eq!(c.branch, ElbowBranch::Up);
        let bad = BENCHMARK.replace("sigma = 0.1", "sigma = 0.1\nnodes = 4\ngamma = [[1.0, 0.0], [0.0, 1.0]]");
        assert_eq!(key_of(parse_config(&bad).unwrap_err()), "controller.gamma");
        let bad = format!("{BENCHMARK}\n[tracking]\nbranch = \"sideways\"\n");
        assert_eq!(key_of(parse_config(&bad).unwrap_err()), "tracking.branch");
    }

    #[test]
    fn lq_problem_file() {
        let text = "A = [[0.0, 1.0], [0.0, 0.0]]\nB = [[0.0], [1.0]]\nQ = [[0.0, 0.0], [0.0, 0.0]]\nR = [[1.0]]\ntf = 1.0\nx0 = [0.0, 0.0]\nxf = [1.0, 0.0]\n";
        let p = parse_lq_problem(text).unwrap();
        assert_eq!((p.state_dim(), p.input_dim()), (2, 1));
        assert_eq!(p.s.evaluate(0.5).unwrap(), DMatrix::zeros(2, 1));
        let err = parse_lq_problem(&text.replace("R = [[1.0]]\n", "")).unwrap_err();
        assert_eq!(key_of(err), "R");
        let err = parse_lq_problem(&text.replace("R = [[1.0]]", "R = [[-1.0]]")).unwrap_err();
        assert_eq!(key_of(err), "R");
        let err = parse_lq_problem(&text.replace("xf = [1.0, 0.0]", "xf = [1.0]")).unwrap_err();
        assert_eq!(key_of(err), "xf");
    }

    #[test]
    fn round_trip() {
        let c = ScenarioConfig::benchmark();
        let text = serialize_config(&c);
        assert_eq!(parse_config(&text).unwrap(), c);
        let again = parse_config(&serialize_config(&parse_config(&text).unwrap())).unwrap();
        assert_eq!(again, c);
    }
}
