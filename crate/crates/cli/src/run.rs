use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use aquid_core::beam::{feedback_loop, generate_ring_target, pgm, BeamError, FeedbackOutcome, InitialPhase, Optics};
use aquid_core::observables::{ring_spectrum, with_secondary_links};
use aquid_core::{
    bath_modes, build_hamiltonian, density_profile, persistent_current, reduced_spectrum_1d, reduced_spectrum_2d,
    rf_aquid_spectrum, wkb_gap, EffectiveModelSpec, FockBasis, QubitFigures, RealGrid, RingSpec,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::{invalid, Axis, DoubleWell, ExperimentConfig, ModelKind};
use crate::output::{create, io_error, num, opt, write_manifest, OutputEntry, Table};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    Currents,
    Gaps,
    Density,
    Effective,
    Wkb,
    Shape,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Currents => "currents",
            Command::Gaps => "gaps",
            Command::Density => "density",
            Command::Effective => "effective",
            Command::Wkb => "wkb",
            Command::Shape => "shape",
        }
    }

    fn model(self) -> ModelKind {
        match self {
            Command::Spectrum | Command::Currents | Command::Gaps | Command::Density => ModelKind::Ring,
            Command::Effective => ModelKind::Effective,
            Command::Wkb => ModelKind::DoubleWell,
            Command::Shape => ModelKind::Beam,
        }
    }
}

/// Command-line settings that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, config: &mut ExperimentConfig) {
        if let Some(dir) = &self.out {
            config.output.dir = dir.display().to_string();
        }
        if let Some(seed) = self.seed {
            config.solver.seed = seed;
            if let Some(beam) = config.beam.as_mut() {
                beam.aberration.noise_seed = seed;
                if let InitialPhase::Random { .. } = beam.feedback.initial_phase {
                    beam.feedback.initial_phase = InitialPhase::Random { seed };
                }
            }
        }
        if let Some(tol) = self.tol {
            config.solver.tol = tol;
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub manifest: PathBuf,
    pub files: Vec<String>,
}

/// A sweep point: optional series value, then the axis value.
#[derive(Debug, Clone, Copy)]
struct Point {
    series: Option<f64>,
    value: f64,
}

struct Plan {
    series: Option<Axis>,
    axis: Axis,
    points: Vec<Point>,
}

impl Plan {
    fn key_columns(&self) -> Vec<String> {
        self.series
            .iter()
            .chain([&self.axis])
            .map(|a| a.name().to_string())
            .collect()
    }

    fn key_cells(&self, p: &Point) -> Vec<String> {
        p.series.iter().chain([&p.value]).map(|&v| num(v)).collect()
    }
}

fn plan(config: &ExperimentConfig, model: ModelKind) -> Result<Plan, CliError> {
    let Some(sweep) = &config.sweep else {
        let (axis, value) = match model {
            ModelKind::Ring => (Axis::Omega, config.ring.as_ref().map_or(0.0, |r| r.flux)),
            ModelKind::Effective => (Axis::Omega, config.effective.as_ref().map_or(0.0, |e| e.flux)),
            _ => (Axis::Delta, config.double_well.as_ref().map_or(2.0, |w| w.delta)),
        };
        return Ok(Plan {
            series: None,
            axis,
            points: vec![Point { series: None, value }],
        });
    };
    let mut grid = sweep.grid()?;
    grid.sort_by(f64::total_cmp);
    let outer: Vec<Option<f64>> = match &sweep.series {
        Some(s) => {
            let mut v = s.values.clone();
            v.sort_by(f64::total_cmp);
            v.into_iter().map(Some).collect()
        }
        None => vec![None],
    };
    let points = outer
        .iter()
        .flat_map(|&series| grid.iter().map(move |&value| Point { series, value }))
        .collect();
    Ok(Plan {
        series: sweep.series.as_ref().map(|s| s.axis),
        axis: sweep.axis,
        points,
    })
}

fn set_ring(spec: &mut RingSpec, axis: Axis, v: f64) {
    match axis {
        Axis::Omega => spec.flux = v,
        Axis::U => spec.interaction = v,
        Axis::N => spec.particles = v as usize,
        Axis::TPrime => spec.weak_links[0].strength = v,
        Axis::TDoublePrime => *spec = with_secondary_links(spec, v),
        _ => unreachable!("axis validated against the ring model"),
    }
}

fn set_effective(spec: &mut EffectiveModelSpec, axis: Axis, v: f64) {
    match axis {
        Axis::Omega => spec.flux = v,
        Axis::U => spec.u = v,
        Axis::JPrime => spec.j_prime = v,
        Axis::JDoublePrime => spec.j_double_prime = v,
        Axis::Sites => spec.sites = v as usize,
        _ => unreachable!("axis validated against the effective model"),
    }
}

fn set_well(w: &mut DoubleWell, axis: Axis, v: f64) {
    match axis {
        Axis::Delta => w.delta = v,
        Axis::EjOverU => w.ej_over_u = v,
        Axis::U => w.u = v,
        _ => unreachable!("axis validated against the double-well model"),
    }
}

fn at(plan: &Plan, p: &Point, e: impl Into<CliError>) -> CliError {
    CliError::AtPoint {
        axis: plan.axis.name(),
        value: p.value,
        source: Box::new(e.into()),
    }
}

fn figure_cells(levels: &[f64]) -> [String; 2] {
    match QubitFigures::from_levels(levels) {
        Ok(f) => [num(f.gap), num(f.quality)],
        Err(_) => [String::new(), String::new()],
    }
}

/// Runs `command` on a validated config and writes its outputs.
pub fn run(command: Command, config: &ExperimentConfig) -> Result<RunSummary, CliError> {
    config.validate()?;
    let model = config.model()?;
    if model != command.model() {
        return Err(invalid(
            "config",
            &format!(
                "`{}` needs a [{}] section, found [{}]",
                command.name(),
                command.model().section(),
                model.section()
            ),
        ));
    }
    let dir = PathBuf::from(&config.output.dir);
    std::fs::create_dir_all(&dir).map_err(io_error(&dir))?;
    let (outputs, summary, pending) = match command {
        Command::Spectrum | Command::Currents | Command::Gaps | Command::Density => ring_run(command, config, &dir)?,
        Command::Effective => effective_run(config, &dir)?,
        Command::Wkb => wkb_run(config, &dir)?,
        Command::Shape => shape_run(config, &dir)?,
    };
    let manifest = write_manifest(&dir, command.name(), config.solver.seed, config, &outputs, &summary)?;
    if let Some(e) = pending {
        return Err(e);
    }
    Ok(RunSummary {
        dir,
        manifest,
        files: outputs.into_iter().map(|o| o.file).collect(),
    })
}

type RunOutput = (Vec<OutputEntry>, serde_json::Value, Option<CliError>);

fn ring_run(command: Command, config: &ExperimentConfig, dir: &Path) -> Result<RunOutput, CliError> {
    let base = config.ring.as_ref().expect("model checked");
    let plan = plan(config, ModelKind::Ring)?;
    let cfg = config.solver.solver_config();
    let levels = match command {
        Command::Gaps | Command::Currents => config.solver.levels.max(3),
        _ => config.solver.levels,
    };
    let spec_at = |p: &Point| {
        let mut s = base.clone();
        if let (Some(axis), Some(v)) = (plan.series, p.series) {
            set_ring(&mut s, axis, v);
        }
        set_ring(&mut s, plan.axis, p.value);
        s
    };
    let mut outputs = Vec::new();
    if config.output.dump_matrix {
        let basis = FockBasis::new(base.sites, base.particles)?;
        let h = build_hamiltonian(base, &basis)?;
        let path = dir.join("hamiltonian.coo");
        let mut w = create(&path)?;
        h.write_coordinate(&mut w).map_err(io_error(&path))?;
        std::io::Write::flush(&mut w).map_err(io_error(&path))?;
        outputs.push(OutputEntry::file("hamiltonian.coo"));
    }
    let energy_columns = (0..levels).map(|k| format!("E{k}"));
    let mut table;
    match command {
        Command::Spectrum => {
            table = Table::new("spectrum.csv", plan.key_columns());
            table.columns.extend(energy_columns);
            table.columns.extend(["gap".into(), "quality".into()]);
            let rows: Vec<Result<Vec<f64>, CliError>> = plan
                .points
                .par_iter()
                .map(|p| {
                    ring_spectrum(&spec_at(p), levels, &cfg)
                        .map(|r| r.eigenvalues)
                        .map_err(|e| at(&plan, p, e))
                })
                .collect();
            for (p, r) in plan.points.iter().zip(rows) {
                let e = r?;
                let mut row = plan.key_cells(p);
                row.extend(e.iter().map(|&v| num(v)));
                row.extend(figure_cells(&e));
                table.rows.push(row);
            }
        }
        Command::Gaps | Command::Currents => {
            let name = if command == Command::Gaps {
                "gaps.csv"
            } else {
                "currents.csv"
            };
            table = Table::new(name, plan.key_columns());
            table.columns.push("dimension".into());
            table.columns.extend(energy_columns);
            table.columns.extend(["gap".into(), "quality".into()]);
            if command == Command::Currents {
                table.columns.extend(["I0".into(), "I1".into()]);
            }
            table.columns.push("error".into());
            // failures stay attached to their point instead of aborting the sweep
            let rows: Vec<Vec<String>> = plan
                .points
                .par_iter()
                .map(|p| {
                    let s = spec_at(p);
                    let dim = aquid_core::fock::basis_dimension(s.sites, s.particles);
                    let mut row = plan.key_cells(p);
                    row.push(dim.to_string());
                    let mut errors = Vec::new();
                    match ring_spectrum(&s, levels, &cfg) {
                        Ok(r) => {
                            row.extend(r.eigenvalues.iter().map(|&v| num(v)));
                            row.extend(figure_cells(&r.eigenvalues));
                        }
                        Err(e) => {
                            row.extend(std::iter::repeat_n(String::new(), levels + 2));
                            errors.push(e.to_string());
                        }
                    }
                    if command == Command::Currents {
                        for level in 0..2 {
                            match persistent_current(&s, level, s.flux, &config.currents, &cfg) {
                                Ok(i) => row.push(num(i)),
                                Err(e) => {
                                    row.push(String::new());
                                    errors.push(format!("I{level}: {e}"));
                                }
                            }
                        }
                    }
                    row.push(errors.join("; "));
                    row
                })
                .collect();
            table.rows = rows;
        }
        Command::Density => {
            table = Table::new("density.csv", plan.key_columns());
            table.columns.push("level".into());
            table.columns.extend((1..=base.sites).map(|j| format!("n{j}")));
            let rows: Vec<Result<Vec<Vec<f64>>, CliError>> = plan
                .points
                .par_iter()
                .map(|p| {
                    let s = spec_at(p);
                    let basis = FockBasis::new(s.sites, s.particles).map_err(|e| at(&plan, p, e))?;
                    let r = ring_spectrum(&s, levels, &cfg).map_err(|e| at(&plan, p, e))?;
                    r.eigenvectors
                        .iter()
                        .map(|v| {
                            density_profile(v, &basis)
                                .map(|d| d.occupations)
                                .map_err(|e| at(&plan, p, e))
                        })
                        .collect()
                })
                .collect();
            for (p, r) in plan.points.iter().zip(rows) {
                for (level, occ) in r?.into_iter().enumerate() {
                    let mut row = plan.key_cells(p);
                    row.push(level.to_string());
                    row.extend(occ.into_iter().map(num));
                    table.rows.push(row);
                }
            }
        }
        _ => unreachable!(),
    }
    let failed = table
        .rows
        .iter()
        .filter(|r| !r.last().is_none_or(|e| e.is_empty()))
        .count();
    let failed = if table.columns.last().is_some_and(|c| c == "error") {
        failed
    } else {
        0
    };
    outputs.push(table.write(dir)?);
    Ok((
        outputs,
        json!({ "points": plan.points.len(), "failed_points": failed }),
        None,
    ))
}

fn effective_run(config: &ExperimentConfig, dir: &Path) -> Result<RunOutput, CliError> {
    let base = config.effective.as_ref().expect("model checked");
    let plan = plan(config, ModelKind::Effective)?;
    let spec_at = |p: &Point| {
        let mut s = base.clone();
        if let (Some(axis), Some(v)) = (plan.series, p.series) {
            set_effective(&mut s, axis, v);
        }
        set_effective(&mut s, plan.axis, p.value);
        s
    };
    let mut table = Table::new("effective.csv", plan.key_columns());
    if plan.axis == Axis::Sites {
        // coefficient table of the bath reduction; c_alpha ignores every other parameter
        table.columns.extend(["c0".into(), "c1".into(), "c2".into()]);
        for p in &plan.points {
            let c = bath_modes(&spec_at(p)).map_err(|e| at(&plan, p, e))?.quadratic;
            let mut row = plan.key_cells(p);
            row.extend(c.iter().map(|&v| num(v)));
            table.rows.push(row);
        }
    } else {
        let levels = config.solver.levels;
        let cfg = config.solver.solver_config();
        let basis = config.reduced.basis;
        table.columns.extend((0..levels).map(|k| format!("E{k}")));
        table
            .columns
            .extend(["gap".into(), "quality".into(), "doubling_shift".into()]);
        let rows: Vec<Result<_, CliError>> = plan
            .points
            .par_iter()
            .map(|p| {
                let s = spec_at(p);
                let r = if config.reduced.dimension == 1 {
                    reduced_spectrum_1d(&s, levels, basis)
                } else {
                    reduced_spectrum_2d(&s, levels, basis, &cfg)
                };
                r.map_err(|e| at(&plan, p, e))
            })
            .collect();
        for (p, r) in plan.points.iter().zip(rows) {
            let r = r?;
            let mut row = plan.key_cells(p);
            row.extend(r.eigenvalues.iter().map(|&v| num(v)));
            row.extend(figure_cells(&r.eigenvalues));
            row.push(num(r.doubling_shift));
            table.rows.push(row);
        }
    }
    let out = table.write(dir)?;
    Ok((vec![out], json!({ "points": plan.points.len() }), None))
}

fn wkb_run(config: &ExperimentConfig, dir: &Path) -> Result<RunOutput, CliError> {
    let base = config.double_well.as_ref().expect("model checked");
    let plan = plan(config, ModelKind::DoubleWell)?;
    let mut table = Table::new(
        "wkb.csv",
        [
            "u",
            "ej_over_u",
            "delta",
            "wkb_gap",
            "grid_splitting",
            "ratio",
            "boundary_amplitude",
        ]
        .map(String::from)
        .to_vec(),
    );
    let rows: Vec<Result<Vec<String>, CliError>> = plan
        .points
        .par_iter()
        .map(|p| {
            let mut w = base.clone();
            if let (Some(axis), Some(v)) = (plan.series, p.series) {
                set_well(&mut w, axis, v);
            }
            set_well(&mut w, plan.axis, p.value);
            let ej = w.ej_over_u * w.u;
            let el = ej / w.delta;
            let gap = wkb_gap(w.u, ej, w.delta).map_err(|e| at(&plan, p, e))?;
            let grid = RealGrid::auto(w.u, el, ej, 2);
            let s = rf_aquid_spectrum(w.u, el, ej, PI, 2, &grid).map_err(|e| at(&plan, p, e))?;
            let split = s.eigenvalues[1] - s.eigenvalues[0];
            let mut row = vec![num(w.u), num(w.ej_over_u), num(w.delta), num(gap), num(split)];
            row.push(opt((gap > 0.0).then(|| split / gap)));
            row.push(num(s.boundary_amplitude));
            Ok(row)
        })
        .collect();
    table.rows = rows.into_iter().collect::<Result<_, _>>()?;
    let out = table.write(dir)?;
    Ok((vec![out], json!({ "points": plan.points.len() }), None))
}

#[derive(Serialize)]
struct ShapeSummary {
    converged: bool,
    best_iteration: usize,
    best_discrepancy_percent: f64,
    threshold_percent: f64,
    iterations_run: usize,
}

fn shape_run(config: &ExperimentConfig, dir: &Path) -> Result<RunOutput, CliError> {
    let beam = config.beam.as_ref().expect("model checked");
    let optics = Optics::new(beam.optics.clone())?;
    let n = optics.size();
    let target = generate_ring_target(&beam.target, n, n)?;
    let (outcome, pending) = match feedback_loop(&target, &beam.aberration, &beam.feedback, &optics) {
        Ok(o) => (o, None),
        Err(BeamError::NotConverged {
            best_percent,
            threshold_percent,
            outcome,
        }) => (
            *outcome,
            Some(CliError::NotConverged {
                best_percent,
                threshold_percent,
            }),
        ),
        Err(e) => return Err(e.into()),
    };
    let mut outputs = Vec::new();
    for (name, data) in [("target.pgm", &target.intensity), ("image.pgm", &outcome.image)] {
        write_file(dir, name, |w| pgm::write_intensity(data, n, n, w))?;
        outputs.push(OutputEntry::file(name));
    }
    write_file(dir, "kinoform.pgm", |w| pgm::write_kinoform(&outcome.kinoform, w))?;
    outputs.push(OutputEntry::file("kinoform.pgm"));
    outputs.push(history_table(&outcome).write(dir)?);
    outputs.push(profile_table(&outcome).write(dir)?);
    let summary = ShapeSummary {
        converged: pending.is_none(),
        best_iteration: outcome.best_iteration,
        best_discrepancy_percent: outcome.best().discrepancy_percent,
        threshold_percent: beam.feedback.threshold_percent,
        iterations_run: outcome.history.len(),
    };
    Ok((outputs, serde_json::to_value(summary)?, pending))
}

fn write_file(
    dir: &Path,
    name: &str,
    write: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> Result<(), BeamError>,
) -> Result<(), CliError> {
    let path = dir.join(name);
    let mut w = create(&path)?;
    write(&mut w)?;
    std::io::Write::flush(&mut w).map_err(io_error(&path))
}

fn history_table(outcome: &FeedbackOutcome) -> Table {
    let mut t = Table::new(
        "history.csv",
        [
            "iteration",
            "discrepancy_percent",
            "max_over_min_contrast",
            "max_extrema_error_percent",
            "mraf_error",
        ]
        .map(String::from)
        .to_vec(),
    );
    t.rows = outcome
        .history
        .iter()
        .map(|r| {
            vec![
                r.iteration.to_string(),
                num(r.discrepancy_percent),
                num(r.contrast),
                num(r.max_extrema_error_percent),
                num(r.mraf_error),
            ]
        })
        .collect();
    t
}

/// Azimuthal profiles of the target, iterations 1 and 5 and the best pass.
fn profile_table(outcome: &FeedbackOutcome) -> Table {
    let mut picks: Vec<(String, &[f64])> = vec![("target".into(), &outcome.target_profile.values)];
    for i in [1, 5] {
        if let Some(r) = outcome.record(i) {
            picks.push((format!("iteration_{i}"), &r.profile));
        }
    }
    picks.push(("best".into(), &outcome.best().profile));
    let mut columns = vec!["angle".to_string()];
    columns.extend(picks.iter().map(|(n, _)| n.clone()));
    let mut t = Table::new("profile.csv", columns);
    t.rows = outcome
        .target_profile
        .angles
        .iter()
        .enumerate()
        .map(|(j, &a)| {
            std::iter::once(num(a))
                .chain(picks.iter().map(|(_, v)| num(v[j])))
                .collect()
        })
        .collect();
    t
}
