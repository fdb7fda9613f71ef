//! Trajectory recording and its on-disk representation.
//!
//! A run writes up to five files into its output directory:
//!
//! * `trajectory.csv`: one row per outer iterate: `t,alpha_t,f,grad_norm`
//!   plus `dist_to_ref` when a reference point is configured. Row `t = 0`
//!   has an empty step-size field (no step produced the initial point).
//! * `meta.json`: the run metadata sidecar.
//! * `iterates.csv`: the outer iterates themselves, one coordinate per
//!   column.
//! * `perms.csv`: the component order used per epoch, hyphen-joined.
//! * `inner.csv`: all inner iterates, only when inner recording was on.
//!
//! Floats are written with 17 significant digits, so reading a directory
//! back reproduces the trajectory bit-for-bit.

use crate::schedules::StepSchedule;
use serde::{Deserialize, Serialize};
use std::io::{self, BufRead, Write};
use std::path::Path;
use thiserror::Error;

use super::Variant;

pub const TRAJECTORY_CSV: &str = "trajectory.csv";
pub const META_JSON: &str = "meta.json";
pub const ITERATES_CSV: &str = "iterates.csv";
pub const PERMS_CSV: &str = "perms.csv";
pub const INNER_CSV: &str = "inner.csv";

/// 17 significant digits: round-trip exact for 64-bit floats.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub problem: String,
    pub variant: Variant,
    pub schedule: StepSchedule,
    pub seed: Option<u64>,
    pub epochs: usize,
    pub dim: usize,
    pub num_components: usize,
    pub record_inner: bool,
}

/// A recorded run: outer iterates `x⁰..x^T`, per-iterate objective values
/// and gradient norms, the step sizes and permutations actually used, and
/// optionally every inner iterate.
///
/// Written once by its run, read-only afterwards.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub meta: RunMeta,
    pub outer: Vec<Vec<f64>>,
    /// `inner[t-1]` holds the `N+1` iterates `x̃₀ … x̃_N` of epoch `t`.
    pub inner: Option<Vec<Vec<Vec<f64>>>>,
    pub values: Vec<f64>,
    pub grad_norms: Vec<f64>,
    /// `steps[t-1] = α_t`.
    pub steps: Vec<f64>,
    /// `perms[t-1] = σᵗ` (0-based component indices).
    pub perms: Vec<Vec<usize>>,
}

#[derive(Debug, Error)]
pub enum TrajectoryIoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },
    #[error("inconsistent trajectory files: {0}")]
    Inconsistent(String),
}

impl Trajectory {
    pub fn epochs(&self) -> usize {
        self.steps.len()
    }

    /// Euclidean distances of the outer iterates to a reference point.
    pub fn distances_to(&self, reference: &[f64]) -> Vec<f64> {
        self.outer
            .iter()
            .map(|x| crate::linalg::dist(x, reference))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W, reference: Option<&[f64]>) -> io::Result<()> {
        if reference.is_some() {
            writeln!(w, "t,alpha_t,f,grad_norm,dist_to_ref")?;
        } else {
            writeln!(w, "t,alpha_t,f,grad_norm")?;
        }
        for t in 0..self.outer.len() {
            let alpha = if t == 0 {
                String::new()
            } else {
                format_float(self.steps[t - 1])
            };
            let base = format!(
                "{t},{alpha},{},{}",
                format_float(self.values[t]),
                format_float(self.grad_norms[t])
            );
            match reference {
                Some(r) => {
                    let d = crate::linalg::dist(&self.outer[t], r);
                    writeln!(w, "{base},{}", format_float(d))?;
                }
                None => writeln!(w, "{base}")?,
            }
        }
        Ok(())
    }

    pub fn meta_json(&self) -> String {
        serde_json::to_string_pretty(&self.meta).expect("metadata serializes")
    }

    /// Write all files for this run into `dir` (created if missing).
    pub fn write_dir(&self, dir: &Path, reference: Option<&[f64]>) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut traj = io::BufWriter::new(std::fs::File::create(dir.join(TRAJECTORY_CSV))?);
        self.write_csv(&mut traj, reference)?;
        traj.flush()?;

        std::fs::write(dir.join(META_JSON), self.meta_json())?;

        let mut it = io::BufWriter::new(std::fs::File::create(dir.join(ITERATES_CSV))?);
        let coords: Vec<String> = (0..self.meta.dim).map(|j| format!("x{j}")).collect();
        writeln!(it, "t,{}", coords.join(","))?;
        for (t, x) in self.outer.iter().enumerate() {
            let row: Vec<String> = x.iter().map(|&v| format_float(v)).collect();
            writeln!(it, "{t},{}", row.join(","))?;
        }
        it.flush()?;

        let mut pw = io::BufWriter::new(std::fs::File::create(dir.join(PERMS_CSV))?);
        writeln!(pw, "t,perm")?;
        for (k, perm) in self.perms.iter().enumerate() {
            let joined: Vec<String> = perm.iter().map(|i| i.to_string()).collect();
            writeln!(pw, "{},{}", k + 1, joined.join("-"))?;
        }
        pw.flush()?;

        if let Some(inner) = &self.inner {
            let mut iw = io::BufWriter::new(std::fs::File::create(dir.join(INNER_CSV))?);
            writeln!(iw, "t,i,{}", coords.join(","))?;
            for (k, epoch) in inner.iter().enumerate() {
                for (i, x) in epoch.iter().enumerate() {
                    let row: Vec<String> = x.iter().map(|&v| format_float(v)).collect();
                    writeln!(iw, "{},{i},{}", k + 1, row.join(","))?;
                }
            }
            iw.flush()?;
        }
        Ok(())
    }

    /// Read a trajectory previously written with [`Trajectory::write_dir`].
    pub fn read_dir(dir: &Path) -> Result<Trajectory, TrajectoryIoError> {
        let meta: RunMeta = {
            let text = std::fs::read_to_string(dir.join(META_JSON))?;
            serde_json::from_str(&text).map_err(|e| TrajectoryIoError::Parse {
                file: META_JSON.into(),
                line: e.line(),
                message: e.to_string(),
            })?
        };

        let (mut values, mut grad_norms, mut steps) = (Vec::new(), Vec::new(), Vec::new());
        for (line_no, line) in read_lines(dir, TRAJECTORY_CSV)?
            .into_iter()
            .enumerate()
            .skip(1)
        {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() < 4 {
                return Err(parse_err(
                    TRAJECTORY_CSV,
                    line_no + 1,
                    "expected at least 4 fields",
                ));
            }
            let t: usize = parse(TRAJECTORY_CSV, line_no + 1, fields[0])?;
            if t != line_no - 1 {
                return Err(parse_err(TRAJECTORY_CSV, line_no + 1, "rows out of order"));
            }
            if t == 0 {
                if !fields[1].is_empty() {
                    return Err(parse_err(
                        TRAJECTORY_CSV,
                        line_no + 1,
                        "row 0 must have empty step",
                    ));
                }
            } else {
                steps.push(parse(TRAJECTORY_CSV, line_no + 1, fields[1])?);
            }
            values.push(parse(TRAJECTORY_CSV, line_no + 1, fields[2])?);
            grad_norms.push(parse(TRAJECTORY_CSV, line_no + 1, fields[3])?);
        }

        let mut outer = Vec::new();
        for (line_no, line) in read_lines(dir, ITERATES_CSV)?
            .into_iter()
            .enumerate()
            .skip(1)
        {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != meta.dim + 1 {
                return Err(parse_err(
                    ITERATES_CSV,
                    line_no + 1,
                    &format!("expected {} fields", meta.dim + 1),
                ));
            }
            let mut x = Vec::with_capacity(meta.dim);
            for f in &fields[1..] {
                x.push(parse(ITERATES_CSV, line_no + 1, f)?);
            }
            outer.push(x);
        }

        let mut perms = Vec::new();
        for (line_no, line) in read_lines(dir, PERMS_CSV)?.into_iter().enumerate().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 2 {
                return Err(parse_err(PERMS_CSV, line_no + 1, "expected 2 fields"));
            }
            let mut perm = Vec::with_capacity(meta.num_components);
            for part in fields[1].split('-') {
                perm.push(parse(PERMS_CSV, line_no + 1, part)?);
            }
            perms.push(perm);
        }

        let inner = if meta.record_inner {
            let mut all: Vec<Vec<Vec<f64>>> = Vec::with_capacity(meta.epochs);
            for (line_no, line) in read_lines(dir, INNER_CSV)?.into_iter().enumerate().skip(1) {
                let fields: Vec<&str> = line.split(',').collect();
                if fields.len() != meta.dim + 2 {
                    return Err(parse_err(
                        INNER_CSV,
                        line_no + 1,
                        &format!("expected {} fields", meta.dim + 2),
                    ));
                }
                let t: usize = parse(INNER_CSV, line_no + 1, fields[0])?;
                let i: usize = parse(INNER_CSV, line_no + 1, fields[1])?;
                if t == all.len() + 1 && i == 0 {
                    all.push(Vec::with_capacity(meta.num_components + 1));
                }
                let epochs_so_far = all.len();
                let epoch = all
                    .last_mut()
                    .ok_or_else(|| parse_err(INNER_CSV, line_no + 1, "rows before first epoch"))?;
                if t != epochs_so_far || i != epoch.len() {
                    return Err(parse_err(INNER_CSV, line_no + 1, "rows out of order"));
                }
                let mut x = Vec::with_capacity(meta.dim);
                for f in &fields[2..] {
                    x.push(parse(INNER_CSV, line_no + 1, f)?);
                }
                epoch.push(x);
            }
            Some(all)
        } else {
            None
        };

        let traj = Trajectory {
            meta,
            outer,
            inner,
            values,
            grad_norms,
            steps,
            perms,
        };
        traj.check_consistent()
            .map_err(TrajectoryIoError::Inconsistent)?;
        Ok(traj)
    }

    /// Structural invariants: matching lengths and, when inner recording is
    /// on, exact stitching `x̃ᵗ₀ = x^{t-1}` and `x̃ᵗ_N = x^t`.
    pub fn check_consistent(&self) -> Result<(), String> {
        let outer_len = self.outer.len();
        if self.values.len() != outer_len || self.grad_norms.len() != outer_len {
            return Err("values/grad_norms length mismatch".into());
        }
        if self.steps.len() + 1 != outer_len || self.perms.len() != self.steps.len() {
            return Err("steps/perms length mismatch".into());
        }
        if self.meta.epochs != self.steps.len() {
            return Err(format!(
                "meta says {} epochs, trajectory has {}",
                self.meta.epochs,
                self.steps.len()
            ));
        }
        if let Some(inner) = &self.inner {
            if inner.len() != self.steps.len() {
                return Err("inner epoch count mismatch".into());
            }
            for (k, epoch) in inner.iter().enumerate() {
                if epoch.len() != self.meta.num_components + 1 {
                    return Err(format!(
                        "epoch {} has {} inner iterates",
                        k + 1,
                        epoch.len()
                    ));
                }
                if epoch[0] != self.outer[k] || epoch[self.meta.num_components] != self.outer[k + 1]
                {
                    return Err(format!("epoch {} inner iterates do not stitch", k + 1));
                }
            }
        }
        Ok(())
    }
}

fn read_lines(dir: &Path, name: &str) -> Result<Vec<String>, TrajectoryIoError> {
    let file = std::fs::File::open(dir.join(name))?;
    let mut lines = Vec::new();
    for line in io::BufReader::new(file).lines() {
        lines.push(line?);
    }
    Ok(lines)
}

fn parse_err(file: &str, line: usize, message: &str) -> TrajectoryIoError {
    TrajectoryIoError::Parse {
        file: file.into(),
        line,
        message: message.into(),
    }
}

fn parse<T: std::str::FromStr>(file: &str, line: usize, s: &str) -> Result<T, TrajectoryIoError>
where
    T::Err: std::fmt::Display,
{
    s.trim()
        .parse()
        .map_err(|e: T::Err| parse_err(file, line, &format!("bad value '{s}': {e}")))
}
