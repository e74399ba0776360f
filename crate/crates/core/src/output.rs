//! CSV time series and plotting scripts.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DVector, Vector2};

use crate::error::{Error, Result};
use crate::riccati::OptimalTrajectory;
use crate::simulation::{CartesianReference, Metrics, ReferenceTrajectory, SimulationReport, TrackingRecord};

pub const PHASE1_FILE: &str = "phase1_state.csv";
pub const REFERENCE_FILE: &str = "reference.csv";
pub const TRACKING_FILE: &str = "tracking.csv";
pub const METRICS_FILE: &str = "metrics.csv";

pub const PHASE1_HEADER: [&str; 9] = ["t", "ximp1", "ximp2", "xdimp1", "xdimp2", "fh1", "fh2", "u1", "u2"];
pub const REFERENCE_HEADER: [&str; 5] = ["t", "qd1", "qd2", "qdd1", "qdd2"];
pub const TRACKING_HEADER: [&str; 12] = [
    "t", "q1", "q2", "qd1", "qd2", "e1", "e2", "ec1", "ec2", "tau1", "tau2", "kR",
];
pub const METRICS_HEADER: [&str; 2] = ["key", "value"];

#[derive(Debug, Clone, PartialEq)]
pub struct OutputBundle {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub plots: Vec<PathBuf>,
}

/// 17 significant digits, enough to read back the identical `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn write_rows<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(row.iter().map(|v| format_float(*v))).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_phase1(path: &Path, traj: &OptimalTrajectory) -> Result<()> {
    let rows = traj.times.iter().zip(&traj.states).zip(&traj.controls).map(|((t, x), u)| {
        let mut row = vec![*t];
        row.extend(x.iter().take(6));
        row.extend(u.iter().take(2));
        row
    });
    write_rows(path, &PHASE1_HEADER, rows)
}

pub fn write_reference(path: &Path, reference: &ReferenceTrajectory) -> Result<()> {
    let rows = reference
        .times()
        .iter()
        .zip(&reference.q_d)
        .zip(&reference.qdot_d)
        .map(|((t, q), qd)| vec![*t, q[0], q[1], qd[0], qd[1]]);
    write_rows(path, &REFERENCE_HEADER, rows)
}

pub fn write_tracking(path: &Path, rec: &TrackingRecord) -> Result<()> {
    let rows = (0..rec.len()).map(|k| {
        vec![
            rec.times[k],
            rec.q[k][0],
            rec.q[k][1],
            rec.q_d[k][0],
            rec.q_d[k][1],
            rec.e[k][0],
            rec.e[k][1],
            rec.e_c[k][0],
            rec.e_c[k][1],
            rec.tau[k][0],
            rec.tau[k][1],
            rec.k_r[k],
        ]
    });
    write_rows(path, &TRACKING_HEADER, rows)
}

pub fn write_metrics(path: &Path, metrics: &Metrics) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(METRICS_HEADER).map_err(csv_err(path))?;
    for (k, v) in &metrics.entries {
        w.write_record([k.as_str(), &format_float(*v)]).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_timeseries(report: &SimulationReport, dir: &Path) -> Result<OutputBundle> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let files: Vec<PathBuf> = [PHASE1_FILE, REFERENCE_FILE, TRACKING_FILE, METRICS_FILE]
        .iter()
        .map(|f| dir.join(f))
        .collect();
    write_phase1(&files[0], &report.optimal)?;
    write_reference(&files[1], &report.reference)?;
    write_tracking(&files[2], &report.tracking)?;
    write_metrics(&files[3], &report.metrics)?;
    Ok(OutputBundle {
        dir: dir.to_path_buf(),
        files,
        plots: Vec::new(),
    })
}

/// Header and numeric rows of a CSV file.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header: Vec<String> = r.headers().map_err(csv_err(path))?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let row = rec
            .iter()
            .map(|s| {
                s.trim().parse::<f64>().map_err(|_| {
                    Error::InvalidArgument(format!("{}: row {}: `{s}` is not a number", path.display(), line + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

fn read_expecting(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let (found, rows) = read_table(path)?;
    if found != header {
        return Err(Error::InvalidArgument(format!(
            "{}: expected header {}, found {}",
            path.display(),
            header.join(","),
            found.join(",")
        )));
    }
    Ok(rows)
}

pub fn read_phase1(path: &Path) -> Result<OptimalTrajectory> {
    let rows = read_expecting(path, &PHASE1_HEADER)?;
    Ok(OptimalTrajectory {
        times: rows.iter().map(|r| r[0]).collect(),
        states: rows.iter().map(|r| DVector::from_column_slice(&r[1..7])).collect(),
        controls: rows.iter().map(|r| DVector::from_column_slice(&r[7..9])).collect(),
        cost: f64::NAN,
    })
}

/// Joint reference from `reference.csv`. The Cartesian part is taken from
/// `phase1` when given; otherwise positions come from `q_d` through the
/// caller and the human force is zero.
pub fn read_reference(path: &Path, phase1: Option<&OptimalTrajectory>) -> Result<ReferenceTrajectory> {
    let rows = read_expecting(path, &REFERENCE_HEADER)?;
    let times: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let n = rows.len();
    let cartesian = match phase1 {
        Some(p) => {
            if p.times.len() != n || p.times.iter().zip(&times).any(|(a, b)| (a - b).abs() > 1e-12) {
                return Err(Error::InvalidArgument(
                    "phase 1 series and reference are on different grids".into(),
                ));
            }
            CartesianReference::from_trajectory(p)?
        }
        None => CartesianReference {
            times: times.clone(),
            position: vec![Vector2::zeros(); n],
            velocity: vec![Vector2::zeros(); n],
            force: vec![Vector2::zeros(); n],
        },
    };
    Ok(ReferenceTrajectory {
        cartesian,
        q_d: rows.iter().map(|r| Vector2::new(r[1], r[2])).collect(),
        qdot_d: rows.iter().map(|r| Vector2::new(r[3], r[4])).collect(),
    })
}

pub fn read_tracking(path: &Path) -> Result<Vec<Vec<f64>>> {
    read_expecting(path, &TRACKING_HEADER)
}

pub fn read_metrics(path: &Path) -> Result<Vec<(String, f64)>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err(path))?;
        let value = rec[1]
            .parse::<f64>()
            .map_err(|_| Error::InvalidArgument(format!("{}: bad value `{}`", path.display(), &rec[1])))?;
        out.push((rec[0].to_string(), value));
    }
    Ok(out)
}

const PLOT_PRELUDE: &str = "import csv\nimport os\n\nimport matplotlib\nmatplotlib.use(\"Agg\")\nimport matplotlib.pyplot as plt\n\nHERE = os.path.dirname(os.path.abspath(__file__))\n\n\ndef load(name):\n    with open(os.path.join(HERE, name), newline=\"\") as f:\n        rows = list(csv.DictReader(f))\n    return {k: [float(r[k]) for r in rows] for k in rows[0]} if rows else {}\n\n\n";

fn plot_body(figure: u8) -> Option<(&'static str, String)> {
    let line = |file: &str, ys: &[(&str, &str)], ylabel: &str, title: &str| {
        let mut s = format!("d = load(\"{file}\")\nfig, ax = plt.subplots()\n");
        for (col, label) in ys {
            s += &format!("ax.plot(d[\"t\"], d[\"{col}\"], label=\"{label}\")\n");
        }
        s += &format!(
            "ax.set_xlabel(\"t [s]\")\nax.set_ylabel(\"{ylabel}\")\nax.set_title(\"{title}\")\nax.legend()\nax.grid(True)\n"
        );
        s
    };
    let (name, body) = match figure {
        1 => (
            "fig1_xy_path",
            "d = load(\"phase1_state.csv\")\nfig, ax = plt.subplots()\nax.plot(d[\"ximp1\"], d[\"ximp2\"])\nax.plot(d[\"ximp1\"][0], d[\"ximp2\"][0], \"o\", label=\"start\")\nax.plot(d[\"ximp1\"][-1], d[\"ximp2\"][-1], \"s\", label=\"end\")\nax.set_xlabel(\"x [m]\")\nax.set_ylabel(\"y [m]\")\nax.set_title(\"End-effector path\")\nax.axis(\"equal\")\nax.legend()\nax.grid(True)\n".to_string(),
        ),
        2 => (
            "fig2_position",
            line("phase1_state.csv", &[("ximp1", "x"), ("ximp2", "y")], "position [m]", "Cartesian position"),
        ),
        3 => (
            "fig3_human_force",
            line("phase1_state.csv", &[("fh1", "f_h,x"), ("fh2", "f_h,y")], "force [N]", "Human force"),
        ),
        4 => (
            "fig4_joint1",
            line("tracking.csv", &[("qd1", "desired"), ("q1", "actual")], "q1 [rad]", "Joint 1 tracking"),
        ),
        5 => (
            "fig5_joint2",
            line("tracking.csv", &[("qd2", "desired"), ("q2", "actual")], "q2 [rad]", "Joint 2 tracking"),
        ),
        6 => (
            "fig6_commutative_error",
            line("tracking.csv", &[("ec1", "e_c1"), ("ec2", "e_c2")], "e_c", "Commutative error"),
        ),
        _ => return None,
    };
    Some((name, body))
}

/// Writes a standalone matplotlib script for figure `figure` (1 to 6) next
/// to the CSV files in `dir`.
pub fn emit_plot_script(dir: &Path, figure: u8) -> Result<PathBuf> {
    let (name, body) = plot_body(figure)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown figure {figure}; expected 1 to 6")))?;
    let script = format!(
        "{PLOT_PRELUDE}{body}fig.savefig(os.path.join(HERE, \"{name}.png\"), dpi=150)\n"
    );
    let path = dir.join(format!("{name}.py"));
    fs::write(&path, script).map_err(io_err(&path))?;
    Ok(path)
}

pub fn emit_all_plots(bundle: &mut OutputBundle) -> Result<()> {
    for fig in 1..=6 {
        let p = emit_plot_script(&bundle.dir, fig)?;
        bundle.plots.push(p);
    }
    Ok(())
}
