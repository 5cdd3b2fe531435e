use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::ForcingSignal;
use crate::{Error, Result};

/// Time series of states with optional forcing channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    timestamps: Vec<f64>,
    states: Vec<Vec<f64>>,
    forcing: Option<Vec<Vec<f64>>>,
    fps: Option<f64>,
}

impl Trajectory {
    pub fn new(
        timestamps: Vec<f64>,
        states: Vec<Vec<f64>>,
        forcing: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        if timestamps.len() != states.len() {
            return Err(Error::LengthMismatch {
                what: "timestamps/states",
                left: timestamps.len(),
                right: states.len(),
            });
        }
        if let Some(i) = timestamps.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(format!(
                "timestamps not strictly increasing at sample {}",
                i + 1
            )));
        }
        let d = states.first().map_or(0, Vec::len);
        if let Some(r) = states.iter().find(|r| r.len() != d) {
            return Err(Error::Dimension {
                what: "state row",
                expected: d,
                got: r.len(),
            });
        }
        if let Some(f) = &forcing {
            if f.len() != states.len() {
                return Err(Error::LengthMismatch {
                    what: "forcing/states",
                    left: f.len(),
                    right: states.len(),
                });
            }
            let fd = f.first().map_or(0, Vec::len);
            if let Some(r) = f.iter().find(|r| r.len() != fd) {
                return Err(Error::Dimension {
                    what: "forcing row",
                    expected: fd,
                    got: r.len(),
                });
            }
        }
        Ok(Self {
            timestamps,
            states,
            forcing,
            fps: None,
        })
    }

    pub fn with_fps(mut self, fps: f64) -> Self {
        self.fps = Some(fps);
        self
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn forcing_dim(&self) -> usize {
        self.forcing
            .as_ref()
            .and_then(|f| f.first())
            .map_or(0, Vec::len)
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn forcing(&self) -> Option<&[Vec<f64>]> {
        self.forcing.as_deref()
    }

    pub fn channel(&self, i: usize) -> Vec<f64> {
        self.states.iter().map(|r| r[i]).collect()
    }

    /// Declared frame rate, or `1 / median(dt)` when none was given.
    pub fn fps(&self) -> Option<f64> {
        if self.fps.is_some() {
            return self.fps;
        }
        let mut dts: Vec<f64> = self.timestamps.windows(2).map(|w| w[1] - w[0]).collect();
        if dts.is_empty() {
            return None;
        }
        dts.sort_by(f64::total_cmp);
        let n = dts.len();
        let median = if n % 2 == 1 {
            dts[n / 2]
        } else {
            0.5 * (dts[n / 2 - 1] + dts[n / 2])
        };
        Some(1.0 / median)
    }

    pub fn forcing_signal(&self) -> Option<Result<ForcingSignal>> {
        self.forcing
            .as_ref()
            .map(|f| ForcingSignal::new(self.timestamps.clone(), f.clone()))
    }

    /// Linear interpolation of every state channel onto `grid`, holding the
    /// end values outside the sampled range.
    pub fn interpolate(&self, grid: &[f64]) -> Result<Trajectory> {
        if self.is_empty() {
            return Err(Error::TooShort { need: 1, got: 0 });
        }
        let sig = ForcingSignal::new(self.timestamps.clone(), self.states.clone())?;
        let states = grid.iter().map(|&t| sig.at(t)).collect();
        let forcing = match &self.forcing {
            Some(f) => {
                let fs = ForcingSignal::new(self.timestamps.clone(), f.clone())?;
                Some(grid.iter().map(|&t| fs.at(t)).collect())
            }
            None => None,
        };
        Trajectory::new(grid.to_vec(), states, forcing)
    }
}

fn csv_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn is_forcing_column(name: &str) -> bool {
    name.strip_prefix('u')
        .is_some_and(|rest| !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()))
}

/// Reads `t,<state columns>[,u1..uF]`. Columns named `u<digits>` are forcing;
/// every other column after `t` is a state.
pub fn read_csv_trajectory(path: &Path) -> Result<Trajectory> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| csv_err(path, 1, "empty file"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first() != Some(&"t") {
        return Err(csv_err(path, 1, "first column must be 't'"));
    }
    if cols.len() < 2 {
        return Err(csv_err(path, 1, "no data columns"));
    }
    let forcing_cols: Vec<bool> = cols[1..].iter().map(|c| is_forcing_column(c)).collect();
    let has_forcing = forcing_cols.iter().any(|&f| f);

    let mut ts = Vec::new();
    let mut states = Vec::new();
    let mut forcing = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != cols.len() {
            return Err(csv_err(
                path,
                lineno,
                format!("expected {} cells, got {}", cols.len(), cells.len()),
            ));
        }
        let mut row = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                csv_err(
                    path,
                    lineno,
                    format!("column '{}': not a number: '{cell}'", cols[c]),
                )
            })?;
            if !v.is_finite() {
                return Err(csv_err(
                    path,
                    lineno,
                    format!("column '{}': non-finite value", cols[c]),
                ));
            }
            row.push(v);
        }
        if let Some(&prev) = ts.last() {
            if !(row[0] > prev) {
                return Err(csv_err(path, lineno, "timestamp not strictly increasing"));
            }
        }
        ts.push(row[0]);
        let (mut s, mut u) = (Vec::new(), Vec::new());
        for (v, &is_u) in row[1..].iter().zip(&forcing_cols) {
            if is_u {
                u.push(*v);
            } else {
                s.push(*v);
            }
        }
        states.push(s);
        forcing.push(u);
    }
    if ts.is_empty() {
        return Err(csv_err(path, 2, "no data rows"));
    }
    Trajectory::new(ts, states, has_forcing.then_some(forcing))
}

/// Writes `t,x1..xD[,u1..uF]` with shortest round-trip float formatting.
pub fn write_csv_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    write_csv_with_names(path, traj, None)
}

/// Like [`write_csv_trajectory`] with custom state column names.
pub fn write_csv_with_names(
    path: &Path,
    traj: &Trajectory,
    names: Option<&[String]>,
) -> Result<()> {
    let d = traj.state_dim();
    let mut out = String::from("t");
    for i in 0..d {
        match names {
            Some(n) => write!(out, ",{}", n[i]).unwrap(),
            None => write!(out, ",x{}", i + 1).unwrap(),
        }
    }
    for j in 0..traj.forcing_dim() {
        write!(out, ",u{}", j + 1).unwrap();
    }
    out.push('\n');
    for k in 0..traj.len() {
        write!(out, "{}", traj.timestamps[k]).unwrap();
        for v in &traj.states[k] {
            write!(out, ",{v}").unwrap();
        }
        if let Some(f) = &traj.forcing {
            for v in &f[k] {
                write!(out, ",{v}").unwrap();
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fps_from_median_spacing() {
        let t = Trajectory::new(vec![0.0, 0.1, 0.2, 0.5], vec![vec![0.0]; 4], None).unwrap();
        assert!((t.fps().unwrap() - 10.0).abs() < 1e-9);
        assert_eq!(t.clone().with_fps(30.0).fps(), Some(30.0));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Trajectory::new(vec![0.0, 1.0], vec![vec![0.0]], None).is_err());
        assert!(Trajectory::new(vec![0.0, 0.0], vec![vec![0.0]; 2], None).is_err());
        assert!(Trajectory::new(vec![0.0, 1.0], vec![vec![0.0], vec![0.0, 1.0]], None).is_err());
    }

    #[test]
    fn interpolation_onto_grid() {
        let t =
            Trajectory::new(vec![0.0, 1.0], vec![vec![0.0, 10.0], vec![1.0, 20.0]], None).unwrap();
        let g = t.interpolate(&[0.25, 0.5, 2.0]).unwrap();
        assert_eq!(
            g.states(),
            &[vec![0.25, 12.5], vec![0.5, 15.0], vec![1.0, 20.0]]
        );
    }

    #[test]
    fn forcing_column_names() {
        assert!(is_forcing_column("u1"));
        assert!(is_forcing_column("u12"));
        assert!(!is_forcing_column("u"));
        assert!(!is_forcing_column("ux"));
        assert!(!is_forcing_column("x1"));
    }
}
