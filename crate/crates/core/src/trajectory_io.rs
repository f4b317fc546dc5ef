//! CSV and JSON trajectory output.

use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::integrator::{Trajectory, TrajectorySample};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryFormat {
    Csv,
    Json,
}

impl FromStr for TrajectoryFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(TrajectoryFormat::Csv),
            "json" => Ok(TrajectoryFormat::Json),
            other => Err(format!("unknown format '{other}', expected csv or json")),
        }
    }
}

#[derive(Debug, Error)]
pub enum ReadError {
    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Trailing diagnostic columns, in order.
pub const DIAGNOSTIC_COLUMNS: [&str; 10] = [
    "|Rm|",
    "|DJ|",
    "|D2J|",
    "norm_N",
    "norm_domega",
    "compat_residual",
    "jsq_residual",
    "min_eig_g",
    "t_half_DJ",
    "t_Rm",
];

/// Header for a dimension-`n` trajectory: `t`, `g_ij` (i <= j, 1-based),
/// `J_ij` (all), then [`DIAGNOSTIC_COLUMNS`].
pub fn csv_header(n: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    for i in 1..=n {
        for j in i..=n {
            cols.push(format!("g_{i}{j}"));
        }
    }
    for i in 1..=n {
        for j in 1..=n {
            cols.push(format!("J_{i}{j}"));
        }
    }
    cols.extend(DIAGNOSTIC_COLUMNS.iter().map(|s| s.to_string()));
    cols
}

fn diagnostic_values(s: &TrajectorySample) -> [f64; 10] {
    [
        s.rm,
        s.dj,
        s.d2j,
        s.norm_n,
        s.norm_domega,
        s.compat_residual,
        s.jsq_residual,
        s.min_eig_g,
        s.t_half_dj,
        s.t_rm,
    ]
}

pub fn write_csv(traj: &Trajectory) -> String {
    let n = traj.dim;
    let mut out = csv_header(n).join(",");
    out.push('\n');
    for s in &traj.samples {
        let mut row = vec![s.t];
        for i in 0..n {
            row.extend_from_slice(&s.g[i * n + i..(i + 1) * n]);
        }
        row.extend_from_slice(&s.j);
        row.extend_from_slice(&diagnostic_values(s));
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

pub fn write_json(traj: &Trajectory) -> String {
    serde_json::to_string_pretty(traj).expect("trajectory values are finite")
}

pub fn write_trajectory(traj: &Trajectory, format: TrajectoryFormat) -> String {
    match format {
        TrajectoryFormat::Csv => write_csv(traj),
        TrajectoryFormat::Json => write_json(traj),
    }
}

pub fn read_json(text: &str) -> Result<Trajectory, ReadError> {
    Ok(serde_json::from_str(text)?)
}

/// One parsed CSV row; `g` is rebuilt as a full row-major symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub t: f64,
    pub g: Vec<f64>,
    pub j: Vec<f64>,
    /// Values of [`DIAGNOSTIC_COLUMNS`].
    pub diagnostics: [f64; 10],
}

impl CsvRow {
    pub fn of_sample(s: &TrajectorySample) -> Self {
        CsvRow {
            t: s.t,
            g: s.g.clone(),
            j: s.j.clone(),
            diagnostics: diagnostic_values(s),
        }
    }

    pub fn column(&self, name: &str) -> Option<f64> {
        DIAGNOSTIC_COLUMNS
            .iter()
            .position(|c| *c == name)
            .map(|i| self.diagnostics[i])
    }
}

pub fn read_csv(text: &str) -> Result<Vec<CsvRow>, ReadError> {
    let err = |line: usize, message: String| ReadError::Csv { line, message };
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| err(1, "empty input".into()))?
        .split(',')
        .collect();
    // header length is 1 + n(n+1)/2 + n^2 + 10
    let n = (1..=64)
        .find(|&n| 1 + n * (n + 1) / 2 + n * n + DIAGNOSTIC_COLUMNS.len() == header.len())
        .ok_or_else(|| err(1, format!("unexpected column count {}", header.len())))?;
    if header.iter().zip(csv_header(n)).any(|(a, b)| *a != b) {
        return Err(err(1, "header does not match the trajectory layout".into()));
    }
    let mut rows = Vec::new();
    for (idx, line) in lines.enumerate() {
        let ln = idx + 2;
        if line.trim().is_empty() {
            continue;
        }
        let vals = line
            .split(',')
            .map(|c| {
                c.trim()
                    .parse::<f64>()
                    .map_err(|_| err(ln, format!("bad number '{c}'")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if vals.len() != header.len() {
            return Err(err(ln, format!("{} cells, expected {}", vals.len(), header.len())));
        }
        let mut it = vals.into_iter();
        let t = it.next().expect("length checked");
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = it.next().expect("length checked");
                g[i * n + j] = v;
                g[j * n + i] = v;
            }
        }
        let j: Vec<f64> = it.by_ref().take(n * n).collect();
        let mut diagnostics = [0.0; 10];
        for d in diagnostics.iter_mut() {
            *d = it.next().expect("length checked");
        }
        rows.push(CsvRow { t, g, j, diagnostics });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::builtin;
    use crate::integrator::{integrate, IntegratorConfig};

    fn run(name: &str, t_end: f64, dt: f64) -> Trajectory {
        let cfg = IntegratorConfig {
            dt,
            t_end,
            sample_stride: 1,
            ..IntegratorConfig::default()
        };
        integrate(&builtin(name).unwrap(), &cfg).unwrap()
    }

    #[test]
    fn header_layout() {
        let h = csv_header(4);
        assert_eq!(h.len(), 1 + 10 + 16 + 10);
        assert_eq!(&h[..3], &["t", "g_11", "g_12"]);
        assert_eq!(h[10], "g_44");
        assert_eq!(h[11], "J_11");
        assert_eq!(h[26], "J_44");
        assert_eq!(&h[27..], &DIAGNOSTIC_COLUMNS.map(String::from)[..]);
    }

    #[test]
    fn flat_torus_csv() {
        let traj = run("flat_torus_4", 2e-3, 1e-3);
        let csv = write_csv(&traj);
        let rows = read_csv(&csv).unwrap();
        assert_eq!(rows.len(), 3);
        for r in &rows {
            assert_eq!(r.g, rows[0].g);
            for c in [
                "|Rm|",
                "|DJ|",
                "|D2J|",
                "norm_N",
                "norm_domega",
                "compat_residual",
                "jsq_residual",
            ] {
                assert_eq!(r.column(c), Some(0.0));
            }
        }
    }

    #[test]
    fn csv_is_value_exact() {
        let traj = run("kodaira_thurston", 0.01, 1e-3);
        let rows = read_csv(&write_csv(&traj)).unwrap();
        assert_eq!(rows.len(), traj.samples.len());
        for (r, s) in rows.iter().zip(&traj.samples) {
            assert_eq!(*r, CsvRow::of_sample(s));
            let recomputed = r.t.sqrt() * r.column("|DJ|").unwrap();
            assert!((r.column("t_half_DJ").unwrap() - recomputed).abs() <= 1e-15);
        }
    }

    #[test]
    fn json_is_bit_exact() {
        let traj = run("kodaira_thurston", 0.01, 1e-3);
        let back = read_json(&write_json(&traj)).unwrap();
        assert_eq!(back, traj);
        for (a, b) in back.samples.iter().zip(&traj.samples) {
            assert!(a.g.iter().zip(&b.g).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        let v: serde_json::Value = serde_json::from_str(&write_json(&traj)).unwrap();
        assert_eq!(v["status"]["kind"], "completed");
        assert!(v["samples"][0].get("|Rm|").is_some());
    }

    #[test]
    fn csv_rejects_garbage() {
        assert!(read_csv("").is_err());
        assert!(read_csv("t,x\n1,2\n").is_err());
        let traj = run("flat_torus_4", 1e-3, 1e-3);
        let bad = write_csv(&traj).replacen("0e0", "zero", 1);
        assert!(matches!(read_csv(&bad), Err(ReadError::Csv { line: 2, .. })));
    }
}
