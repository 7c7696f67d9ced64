//! CSV tables. Every float is written with 17 significant digits so repeated
//! runs produce identical bytes.

use std::path::Path;

use spinchain::model::ControlPulse;
use spinchain::propagator::Trajectory;

use crate::error::{HarnessError, Result};

pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::format(path, e))?;
    w.write_record(header).map_err(|e| HarnessError::format(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| HarnessError::format(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Reads a table, checking that its header starts with `expected`.
pub fn read_table(path: &Path, expected: &[&str]) -> Result<Vec<Vec<String>>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => HarnessError::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string()),
        ),
        _ => HarnessError::format(path, e),
    })?;
    let header = r.headers().map_err(|e| HarnessError::format(path, e))?.clone();
    if header.len() < expected.len() || expected.iter().zip(header.iter()).any(|(a, b)| *a != b) {
        return Err(HarnessError::format(
            path,
            format!("expected header starting with {}, found {}", expected.join(","), header.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    r.records()
        .map(|rec| {
            rec.map(|r| r.iter().map(str::to_string).collect())
                .map_err(|e| HarnessError::format(path, e))
        })
        .collect()
}

pub fn parse_f64(path: &Path, s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| HarnessError::format(path, format!("not a number: {s:?}")))
}

pub fn write_pulse(path: &Path, pulse: &ControlPulse<f64>) -> Result<()> {
    let rows = (0..pulse.n_samples()).map(|k| {
        let (c, d) = pulse.sample(k);
        vec![fmt(k as f64 * pulse.dt()), fmt(d), fmt(c)]
    });
    write_table(path, &["t", "d", "C"], rows)
}

/// Reads a `t,d,C` pulse; the time column must be a uniform grid from 0.
pub fn read_pulse(path: &Path) -> Result<ControlPulse<f64>> {
    let rows = read_table(path, &["t", "d", "C"])?;
    if rows.len() < 2 {
        return Err(HarnessError::format(path, "a pulse file needs at least two rows"));
    }
    let mut t = Vec::with_capacity(rows.len());
    let mut d = Vec::with_capacity(rows.len());
    let mut c = Vec::with_capacity(rows.len());
    for row in &rows {
        if row.len() != 3 {
            return Err(HarnessError::format(path, "pulse rows need three columns"));
        }
        t.push(parse_f64(path, &row[0])?);
        d.push(parse_f64(path, &row[1])?);
        c.push(parse_f64(path, &row[2])?);
    }
    let dt = t[1] - t[0];
    let uniform = t
        .iter()
        .enumerate()
        .all(|(k, &tk)| (tk - k as f64 * dt).abs() <= 1e-9 * (1.0 + tk.abs()));
    if t[0].abs() > 1e-12 || !uniform {
        return Err(HarnessError::format(path, "time column is not a uniform grid starting at 0"));
    }
    ControlPulse::new(d, c, dt).map_err(|e| HarnessError::format(path, e))
}

pub fn write_trajectory(path: &Path, traj: &Trajectory<f64>) -> Result<()> {
    let n = traj.final_state.len();
    let mut header: Vec<String> = ["t", "x_expect", "E", "dE"].iter().map(|s| s.to_string()).collect();
    if traj.site_probabilities.is_some() {
        header.extend((1..=n).map(|i| format!("p_{i}")));
    }
    let header_ref: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..traj.times.len()).map(|k| {
        let mut row = vec![
            fmt(traj.times[k]),
            fmt(traj.position_expectation[k]),
            fmt(traj.energy_mean[k]),
            fmt(traj.energy_spread[k]),
        ];
        if let Some(p) = &traj.site_probabilities {
            row.extend(p[k].iter().map(|&v| fmt(v)));
        }
        row
    });
    write_table(path, &header_ref, rows)
}

pub fn write_history(path: &Path, history: &[f64]) -> Result<()> {
    let rows = history.iter().enumerate().map(|(i, &v)| vec![(i + 1).to_string(), fmt(v)]);
    write_table(path, &["iteration", "infidelity"], rows)
}

/// `quantity,value` table; values are preformatted.
pub fn write_quantities(path: &Path, rows: &[(String, String)]) -> Result<()> {
    write_table(path, &["quantity", "value"], rows.iter().map(|(q, v)| vec![q.clone(), v.clone()]))
}

pub fn read_quantities(path: &Path) -> Result<Vec<(String, String)>> {
    Ok(read_table(path, &["quantity", "value"])?
        .into_iter()
        .map(|mut r| {
            let v = r.pop().unwrap_or_default();
            (r.pop().unwrap_or_default(), v)
        })
        .collect())
}
