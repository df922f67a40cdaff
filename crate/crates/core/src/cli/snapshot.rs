//! Columnar text snapshots: a `# {json}` header line, then `beta,gamma,u` rows.
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! snapshot re-ingests to a bit-identical state.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CapflowError, Result};
use crate::flow::SurfaceState;
use crate::geometry::AmbientParams;
use crate::grid::Grid;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub step: usize,
    pub t: f64,
    pub c: f64,
    /// Contact angle in radians.
    pub theta: f64,
    pub n_beta: usize,
    pub n_gamma: usize,
}

pub fn snapshot_name(step: usize) -> String {
    format!("snap_{step}.csv")
}

pub fn format_snapshot(state: &SurfaceState, step: usize) -> String {
    let grid = &state.grid;
    let header = SnapshotHeader {
        step,
        t: state.t,
        c: state.amb.c,
        theta: state.amb.theta,
        n_beta: grid.n_beta,
        n_gamma: grid.n_gamma,
    };
    let mut out = format!(
        "# {}\nbeta,gamma,u\n",
        serde_json::to_string(&header).expect("header serializes")
    );
    for (i, j) in grid.nodes() {
        let _ = writeln!(out, "{:?},{:?},{:?}", grid.beta(i), grid.gamma(j), state.u.get(i, j));
    }
    out
}

pub fn write_snapshot(path: &Path, state: &SurfaceState, step: usize) -> Result<()> {
    std::fs::write(path, format_snapshot(state, step))?;
    Ok(())
}

fn parse_err(line: usize, message: impl Into<String>) -> CapflowError {
    CapflowError::Parse {
        line,
        column: 1,
        message: message.into(),
    }
}

pub fn parse_snapshot(text: &str) -> Result<(SnapshotHeader, SurfaceState)> {
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l));
    let (_, first) = lines.next().ok_or_else(|| parse_err(1, "empty snapshot"))?;
    let json = first
        .strip_prefix('#')
        .ok_or_else(|| parse_err(1, "missing '# {...}' header line"))?;
    let header: SnapshotHeader = serde_json::from_str(json.trim()).map_err(|e| CapflowError::Parse {
        line: 1,
        column: e.column() + 1,
        message: e.to_string(),
    })?;
    match lines.next() {
        Some((_, "beta,gamma,u")) => {}
        _ => return Err(parse_err(2, "expected column header 'beta,gamma,u'")),
    }
    let grid = Grid::new(header.n_beta, header.n_gamma)?;
    let amb = AmbientParams::new(header.c, header.theta)?;
    let mut values = Vec::with_capacity(grid.len());
    for (k, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let idx = values.len();
        if idx >= grid.len() {
            return Err(parse_err(k, format!("more than {} data rows", grid.len())));
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(parse_err(k, format!("expected 3 columns, found {}", cols.len())));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| parse_err(k, format!("{s:?}: {e}")));
        let (beta, gamma, u) = (num(cols[0])?, num(cols[1])?, num(cols[2])?);
        let (i, j) = (idx / grid.n_gamma, idx % grid.n_gamma);
        if (beta - grid.beta(i)).abs() > 1e-12 || (gamma - grid.gamma(j)).abs() > 1e-12 {
            return Err(parse_err(k, format!("node ({beta}, {gamma}) out of grid order")));
        }
        values.push(u);
    }
    if values.len() != grid.len() {
        return Err(parse_err(
            text.lines().count(),
            format!("expected {} data rows, found {}", grid.len(), values.len()),
        ));
    }
    let state = SurfaceState::new(grid, amb, values, header.t)?;
    Ok((header, state))
}

pub fn read_snapshot(path: &Path) -> Result<(SnapshotHeader, SurfaceState)> {
    parse_snapshot(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::Perturbation;
    use crate::geometry::CapSpec;

    fn state() -> SurfaceState {
        let spec = CapSpec::centered(2.0, 1.0, 1.0).unwrap();
        let bump = Perturbation {
            amplitude: 0.0314159,
            mode: 3,
            beta0: 0.6,
            width: 0.1,
        };
        let mut s = SurfaceState::perturbed_cap(Grid::new(8, 16).unwrap(), &spec, &bump).unwrap();
        s.t = 0.1 + 0.2;
        s
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let s = state();
        let (h, back) = parse_snapshot(&format_snapshot(&s, 17)).unwrap();
        assert_eq!(h.step, 17);
        assert_eq!(back.t, s.t);
        assert_eq!(back.amb, s.amb);
        assert_eq!(back.u.values(), s.u.values());
        assert_eq!(back.u.ghost(), s.u.ghost());
    }

    #[test]
    fn truncated_snapshot_is_rejected() {
        let text = format_snapshot(&state(), 0);
        let cut: String = text.lines().take(20).map(|l| format!("{l}\n")).collect();
        assert!(matches!(parse_snapshot(&cut), Err(CapflowError::Parse { .. })));
        let bad = text.replacen("beta,gamma,u", "b,g,u", 1);
        assert!(matches!(parse_snapshot(&bad), Err(CapflowError::Parse { line: 2, .. })));
    }
}
