use std::path::Path;

use aquid_core::beam::{Aberration, FeedbackParams, OpticsParams, RingTargetParams};
use aquid_core::{CurrentOptions, EffectiveModelSpec, RingSpec, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// One experiment: exactly one model section plus run settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub ring: Option<RingSpec>,
    pub effective: Option<EffectiveModelSpec>,
    pub double_well: Option<DoubleWell>,
    pub beam: Option<BeamConfig>,
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub currents: CurrentOptions,
    #[serde(default)]
    pub reduced: ReducedSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// The rf-AQUID double well `U n^2 + E_L phi^2 - E_J cos(phi - Omega)` with
/// `E_L = E_J / delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoubleWell {
    #[serde(default = "one")]
    pub u: f64,
    #[serde(default = "one")]
    pub ej_over_u: f64,
    #[serde(default = "two")]
    pub delta: f64,
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamConfig {
    #[serde(default)]
    pub optics: OpticsParams,
    #[serde(default)]
    pub target: RingTargetParams,
    #[serde(default)]
    pub aberration: Aberration,
    #[serde(default)]
    pub feedback: FeedbackParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Omega,
    U,
    N,
    TPrime,
    TDoublePrime,
    JPrime,
    JDoublePrime,
    Sites,
    Delta,
    EjOverU,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Omega => "omega",
            Axis::U => "u",
            Axis::N => "n",
            Axis::TPrime => "t_prime",
            Axis::TDoublePrime => "t_double_prime",
            Axis::JPrime => "j_prime",
            Axis::JDoublePrime => "j_double_prime",
            Axis::Sites => "sites",
            Axis::Delta => "delta",
            Axis::EjOverU => "ej_over_u",
        }
    }

    fn integral(self) -> bool {
        matches!(self, Axis::N | Axis::Sites)
    }
}

/// Either explicit `values` or an inclusive `start..stop` grid of `points`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: Axis,
    pub values: Option<Vec<f64>>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub points: Option<usize>,
    /// Outer axis; every series value gets a full sweep.
    pub series: Option<Series>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Series {
    pub axis: Axis,
    pub values: Vec<f64>,
}

impl SweepConfig {
    pub fn grid(&self) -> Result<Vec<f64>, CliError> {
        let grid = match (&self.values, self.start, self.stop, self.points) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(n)) => {
                if n == 0 {
                    return Err(invalid("sweep.points", "must be at least 1"));
                }
                if n == 1 {
                    vec![a]
                } else {
                    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
                }
            }
            _ => {
                return Err(invalid(
                    "sweep",
                    "give either `values` or all of `start`, `stop` and `points`",
                ))
            }
        };
        check_values("sweep", self.axis, &grid)?;
        Ok(grid)
    }
}

fn check_values(field: &str, axis: Axis, values: &[f64]) -> Result<(), CliError> {
    if values.is_empty() {
        return Err(invalid(field, "grid is empty"));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(invalid(field, &format!("non-finite grid value {v}")));
    }
    if axis.integral() {
        if let Some(v) = values.iter().find(|v| v.fract() != 0.0 || **v < 1.0) {
            return Err(invalid(
                field,
                &format!("{} takes positive integers, got {v}", axis.name()),
            ));
        }
    }
    Ok(())
}

/// Solver settings with the number of levels to report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub levels: usize,
    pub tol: f64,
    pub seed: u64,
    pub dense_threshold: usize,
    pub krylov_dim: Option<usize>,
    pub max_restarts: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverConfig::default();
        SolverSection {
            levels: 4,
            tol: s.tol,
            seed: s.seed,
            dense_threshold: s.dense_threshold,
            krylov_dim: s.krylov_dim,
            max_restarts: s.max_restarts,
        }
    }
}

impl SolverSection {
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            tol: self.tol,
            seed: self.seed,
            dense_threshold: self.dense_threshold,
            krylov_dim: self.krylov_dim,
            max_restarts: self.max_restarts,
            ..SolverConfig::default()
        }
    }
}

/// Plane-wave settings of the effective-model runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReducedSection {
    /// 1 for the mirror-line problem, 2 for the full two-angle problem.
    pub dimension: usize,
    /// Odd number of plane waves per angle.
    pub basis: usize,
}

impl Default for ReducedSection {
    fn default() -> Self {
        ReducedSection {
            dimension: 1,
            basis: 41,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Not part of the experiment, so left out of manifests.
    #[serde(skip_serializing)]
    pub dir: String,
    /// Also write the Hamiltonian of the unswept ring in coordinate format.
    pub dump_matrix: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: "out".into(),
            dump_matrix: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Ring,
    Effective,
    DoubleWell,
    Beam,
}

impl ModelKind {
    pub fn section(self) -> &'static str {
        match self {
            ModelKind::Ring => "ring",
            ModelKind::Effective => "effective",
            ModelKind::DoubleWell => "double_well",
            ModelKind::Beam => "beam",
        }
    }

    fn axes(self) -> &'static [Axis] {
        match self {
            ModelKind::Ring => &[Axis::Omega, Axis::U, Axis::N, Axis::TPrime, Axis::TDoublePrime],
            ModelKind::Effective => &[Axis::Omega, Axis::U, Axis::JPrime, Axis::JDoublePrime, Axis::Sites],
            ModelKind::DoubleWell => &[Axis::Delta, Axis::EjOverU, Axis::U],
            ModelKind::Beam => &[],
        }
    }
}

pub(crate) fn invalid(field: &str, message: &str) -> CliError {
    CliError::Validation {
        field: field.to_string(),
        message: message.to_string(),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Parse(msg) => CliError::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn model(&self) -> Result<ModelKind, CliError> {
        let present: Vec<ModelKind> = [
            (self.ring.is_some(), ModelKind::Ring),
            (self.effective.is_some(), ModelKind::Effective),
            (self.double_well.is_some(), ModelKind::DoubleWell),
            (self.beam.is_some(), ModelKind::Beam),
        ]
        .into_iter()
        .filter_map(|(p, k)| p.then_some(k))
        .collect();
        match present.as_slice() {
            [one] => Ok(*one),
            [] => Err(invalid(
                "config",
                "no model section (ring, effective, double_well or beam)",
            )),
            many => Err(invalid(
                "config",
                &format!(
                    "exactly one model section allowed, found {}",
                    many.iter().map(|k| k.section()).collect::<Vec<_>>().join(", ")
                ),
            )),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let model = self.model()?;
        if let Some(sweep) = &self.sweep {
            if model == ModelKind::Beam {
                return Err(invalid("sweep", "the beam model has no sweep axes"));
            }
            let allowed = model.axes();
            if !allowed.contains(&sweep.axis) {
                return Err(invalid(
                    "sweep.axis",
                    &format!(
                        "`{}` is not a parameter of the {} model",
                        sweep.axis.name(),
                        model.section()
                    ),
                ));
            }
            sweep.grid()?;
            if let Some(series) = &sweep.series {
                if !allowed.contains(&series.axis) {
                    return Err(invalid(
                        "sweep.series.axis",
                        &format!(
                            "`{}` is not a parameter of the {} model",
                            series.axis.name(),
                            model.section()
                        ),
                    ));
                }
                if series.axis == sweep.axis {
                    return Err(invalid("sweep.series.axis", "must differ from sweep.axis"));
                }
                check_values("sweep.series", series.axis, &series.values)?;
            }
            if let Some(ring) = &self.ring {
                let axes = [Some(sweep.axis), sweep.series.as_ref().map(|s| s.axis)];
                if axes.contains(&Some(Axis::TPrime)) && ring.weak_links.is_empty() {
                    return Err(invalid("sweep.axis", "t_prime needs at least one weak link"));
                }
                if axes.contains(&Some(Axis::TDoublePrime)) && ring.weak_links.len() < 2 {
                    return Err(invalid("sweep.axis", "t_double_prime needs at least two weak links"));
                }
            }
        }
        if self.solver.levels == 0 {
            return Err(invalid("solver.levels", "must be at least 1"));
        }
        if !(self.solver.tol > 0.0 && self.solver.tol.is_finite()) {
            return Err(invalid("solver.tol", "must be positive"));
        }
        if !matches!(self.reduced.dimension, 1 | 2) {
            return Err(invalid("reduced.dimension", "must be 1 or 2"));
        }
        if let Some(w) = &self.double_well {
            for (name, v) in [("double_well.u", w.u), ("double_well.ej_over_u", w.ej_over_u)] {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(invalid(name, "must be positive"));
                }
            }
            if !(w.delta >= 1.0 && w.delta.is_finite()) {
                return Err(invalid("double_well.delta", "must be at least 1"));
            }
        }
        Ok(())
    }
}
