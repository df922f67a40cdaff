//! Run configuration: JSON parsing, validation and initial data.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::diagnostics::containment_check;
use crate::error::{CapflowError, Result};
use crate::flow::{check_hypotheses, Barriers, Perturbation, StepPolicy, SurfaceState};
use crate::geometry::{angle_condition_holds, AmbientParams, CapSpec};
use crate::grid::Grid;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmbientConfig {
    pub c: f64,
    pub theta_degrees: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_beta: usize,
    pub n_gamma: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    Cap,
    PerturbedCap,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub kind: InitialKind,
    #[serde(rename = "R")]
    pub radius: f64,
    #[serde(default)]
    pub a2: f64,
    #[serde(default)]
    pub perturbation: Option<Perturbation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub diag_every: usize,
    /// Write `snap_<step>.csv` every this many steps (0: initial and final only).
    pub snapshot_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("capflow-out"),
            diag_every: 10,
            snapshot_every: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierConfig {
    #[serde(rename = "R_outer")]
    pub outer: f64,
    #[serde(rename = "R_inner")]
    pub inner: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub amb: AmbientConfig,
    pub grid: GridConfig,
    pub initial: InitialConfig,
    #[serde(default)]
    pub stepping: StepPolicy,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub barriers: Option<BarrierConfig>,
    #[serde(default)]
    pub seed: u64,
}

/// A validated configuration and the hypothesis warnings it raised.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedConfig {
    pub config: RunConfig,
    pub warnings: Vec<String>,
}

impl RunConfig {
    pub fn ambient(&self) -> Result<AmbientParams> {
        AmbientParams::from_degrees(self.amb.c, self.amb.theta_degrees)
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.n_beta, self.grid.n_gamma)
    }

    pub fn cap(&self) -> Result<CapSpec> {
        CapSpec::new(
            self.amb.c,
            self.initial.radius,
            self.amb.theta_degrees.to_radians(),
            self.initial.a2,
        )
    }

    pub fn barriers(&self) -> Result<Option<Barriers>> {
        self.barriers
            .map(|b| {
                let theta = self.amb.theta_degrees.to_radians();
                Ok(Barriers {
                    outer: CapSpec::centered(self.amb.c, b.outer, theta)?,
                    inner: CapSpec::centered(self.amb.c, b.inner, theta)?,
                })
            })
            .transpose()
    }

    /// The bump added to the cap, if any.
    pub fn perturbation(&self) -> Option<Perturbation> {
        match self.initial.kind {
            InitialKind::Cap => None,
            InitialKind::PerturbedCap => self.initial.perturbation,
        }
    }

    /// Every violated invariant, in document order.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let mut push_err = |r: Result<()>| match r {
            Err(CapflowError::Validation(v)) => problems.extend(v),
            Err(e) => problems.push(e.to_string()),
            Ok(()) => {}
        };
        push_err(self.ambient().map(drop));
        push_err(self.grid().map(drop));
        if self.ambient().is_ok() {
            push_err(self.cap().map(drop));
            if let Ok(Some(b)) = self.barriers() {
                if !(b.inner.radius < self.initial.radius && self.initial.radius < b.outer.radius) {
                    problems.push(format!(
                        "barriers must satisfy R_inner < R < R_outer, got {} < {} < {}",
                        b.inner.radius, self.initial.radius, b.outer.radius
                    ));
                }
            } else if let Err(e) = self.barriers() {
                problems.push(e.to_string());
            }
        }
        match (self.initial.kind, &self.initial.perturbation) {
            (InitialKind::PerturbedCap, None) => {
                problems.push("initial.kind perturbed_cap requires initial.perturbation".into())
            }
            (InitialKind::PerturbedCap, Some(p)) => problems.extend(p.validate()),
            (InitialKind::Cap, _) => {}
        }
        problems.extend(self.stepping.validate());
        problems
    }

    /// Hypotheses of the convergence theorem that the declared cap fails.
    pub fn warnings(&self) -> Vec<String> {
        let Ok(amb) = self.ambient() else {
            return Vec::new();
        };
        let radius = self.barriers.map_or(self.initial.radius, |b| b.outer);
        let n = amb.n as f64;
        let k0 = crate::geometry::k0(amb.c, radius, amb.theta);
        let mut warnings = Vec::new();
        if k0 <= amb.c * (n - 1.0) / (4.0 * n) {
            warnings.push(format!("K0 bound fails: K0 = {k0} does not exceed c(n-1)/(4n)"));
        }
        if !matches!(angle_condition_holds(amb.c, radius, amb.theta, amb.n), Ok(true)) {
            warnings.push(format!(
                "angle condition |cos theta| < (4nK0 - c(n-1))/(4nK0 + c(n-1)) fails for R = {radius}"
            ));
        }
        warnings
    }
}

/// Parse and validate a JSON configuration document.
pub fn parse_config(text: &str) -> Result<ParsedConfig> {
    let config: RunConfig = serde_json::from_str(text).map_err(|e| CapflowError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let problems = config.validate();
    if !problems.is_empty() {
        return Err(CapflowError::Validation(problems));
    }
    let warnings = config.warnings();
    Ok(ParsedConfig { config, warnings })
}

/// The initial surface of `config`: cap plus bump, ghost ring applied,
/// checked for star-shapedness and containment in the declared barriers.
pub fn build_initial(config: &RunConfig) -> Result<SurfaceState> {
    let grid = config.grid()?;
    let spec = config.cap()?;
    let state = match config.perturbation() {
        Some(bump) => SurfaceState::perturbed_cap(grid, &spec, &bump)?,
        None => SurfaceState::from_cap(grid, &spec)?,
    };
    let barriers = config.barriers()?;
    let report = check_hypotheses(&state, barriers.as_ref());
    let mut problems = Vec::new();
    if !report.star_shaped {
        problems.push("initial surface is not star-shaped with respect to cE3".to_string());
    }
    if let Some(b) = &barriers {
        if !containment_check(&state, &b.outer, &b.inner) {
            problems.push(format!(
                "initial surface leaves the barriers R_inner = {} and R_outer = {}",
                b.inner.radius, b.outer.radius
            ));
        }
    }
    if !problems.is_empty() {
        return Err(CapflowError::Validation(problems));
    }
    Ok(state)
}
