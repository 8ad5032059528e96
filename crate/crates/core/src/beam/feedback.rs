use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::measure::{simulate_measurement, Aberration};
use super::mraf::{initial_phase, mraf, InitialPhase, Kinoform, MrafParams, Optics};
use super::profile::{azimuthal_profile, AzimuthalProfile, ExtremumKind, DEFAULT_SAMPLES};
use super::target::RingTarget;
use super::BeamError;

/// Discrepancy between a measured extremum `m` and the original target `t0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiscrepancyFormula {
    /// `-(m^2 - t0^2) / (2 t0)`, zero when the measurement matches.
    #[default]
    MinusVariant,
    /// `-(m^2 + t0^2) / (2 t0)` as printed.
    Verbatim,
}

pub fn discrepancy(measured: f64, target: f64, formula: DiscrepancyFormula) -> f64 {
    match formula {
        DiscrepancyFormula::MinusVariant => -(measured * measured - target * target) / (2.0 * target),
        DiscrepancyFormula::Verbatim => -(measured * measured + target * target) / (2.0 * target),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeedbackParams {
    pub alpha: f64,
    pub max_iterations: usize,
    /// Acceptance level of the extrema discrepancy, in percent.
    pub threshold_percent: f64,
    pub formula: DiscrepancyFormula,
    /// End the loop at the first iteration below the threshold.
    pub stop_at_threshold: bool,
    pub mraf: MrafParams,
    pub initial_phase: InitialPhase,
    pub samples: usize,
}

impl Default for FeedbackParams {
    fn default() -> Self {
        FeedbackParams {
            alpha: 0.3,
            max_iterations: 30,
            threshold_percent: 2.0,
            formula: DiscrepancyFormula::MinusVariant,
            stop_at_threshold: false,
            mraf: MrafParams::default(),
            initial_phase: InitialPhase::Axicon,
            samples: DEFAULT_SAMPLES,
        }
    }
}

/// One pass of the loop (iterations count from 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub iteration: usize,
    /// RMS extrema error relative to the mean target maximum, percent.
    pub discrepancy_percent: f64,
    /// Largest extrema error relative to the mean target maximum, percent.
    pub max_extrema_error_percent: f64,
    /// Mean measured maximum over mean measured minimum.
    pub contrast: f64,
    /// Target extrema used for this pass, in units of the original target.
    pub target_extrema: Vec<f64>,
    /// Measured profile rescaled onto the original target.
    pub profile: Vec<f64>,
    pub mraf_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackOutcome {
    pub best_iteration: usize,
    pub kinoform: Kinoform,
    pub image: Vec<f64>,
    pub target_profile: AzimuthalProfile,
    pub history: Vec<FeedbackRecord>,
}

impl FeedbackOutcome {
    pub fn best(&self) -> &FeedbackRecord {
        &self.history[self.best_iteration - 1]
    }

    pub fn record(&self, iteration: usize) -> Option<&FeedbackRecord> {
        self.history.get(iteration.checked_sub(1)?)
    }
}

/// Periodic interpolation of `(angle, value)` knots with a cosine blend
/// between neighbours.
fn cosine_interpolate(knots: &[(f64, f64)], angle: f64) -> f64 {
    let n = knots.len();
    let a = angle.rem_euclid(2.0 * PI);
    let k = knots.partition_point(|&(t, _)| t <= a);
    let (lo, hi) = if k == 0 || k == n {
        let (t0, v0) = knots[n - 1];
        let (t1, v1) = knots[0];
        (
            (t0 - if k == 0 { 2.0 * PI } else { 0.0 }, v0),
            (t1 + if k == n { 2.0 * PI } else { 0.0 }, v1),
        )
    } else {
        (knots[k - 1], knots[k])
    };
    let t = (a - lo.0) / (hi.0 - lo.0);
    let w = 0.5 * (1.0 - (PI * t).cos());
    lo.1 * (1.0 - w) + hi.1 * w
}

/// `t0(x, y) * g(theta)` with the gain `g` interpolated between extrema.
fn reshape_target(target0: &RingTarget, knots: &[(f64, f64)]) -> Result<RingTarget, BeamError> {
    let g = &target0.geometry;
    let w = target0.width;
    let intensity = target0
        .intensity
        .par_iter()
        .enumerate()
        .map(|(i, &t)| {
            if t == 0.0 {
                return 0.0;
            }
            t * cosine_interpolate(knots, g.azimuth((i % w) as f64, (i / w) as f64))
        })
        .collect();
    target0.with_intensity(intensity)
}

const MIN_GAIN: f64 = 0.05;
const MAX_GAIN: f64 = 20.0;

/// Iterates MRAF against a simulated camera, nudging the target extrema by
/// `alpha D` each pass, and returns the pass whose profile is closest to the
/// original target.
pub fn feedback_loop(
    target0: &RingTarget,
    aberration: &Aberration,
    params: &FeedbackParams,
    optics: &Optics,
) -> Result<FeedbackOutcome, BeamError> {
    if !(0.0..=1.0).contains(&params.alpha) {
        return Err(BeamError::InvalidParameter(format!(
            "alpha {} outside [0, 1]",
            params.alpha
        )));
    }
    if params.max_iterations == 0 {
        return Err(BeamError::InvalidParameter(
            "feedback needs at least one iteration".into(),
        ));
    }
    let (w, h) = (target0.width, target0.height);
    let ring = target0.geometry;
    let target_profile = azimuthal_profile(&target0.intensity, w, h, &ring, params.samples)?;
    let t0: Vec<f64> = target_profile.extrema.iter().map(|e| e.value).collect();
    let angles: Vec<f64> = target_profile.extrema.iter().map(|e| e.angle).collect();
    let mean_max = {
        let m: Vec<f64> = target_profile.maxima().map(|e| e.value).collect();
        m.iter().sum::<f64>() / m.len() as f64
    };
    let phase0 = initial_phase(params.initial_phase, optics, target0);
    let mut current = t0.clone();
    let mut target = target0.clone();
    let mut history: Vec<FeedbackRecord> = Vec::new();
    let mut best: Option<(usize, Kinoform, Vec<f64>)> = None;
    for iteration in 1..=params.max_iterations {
        let shaped = mraf(&target, &phase0, &params.mraf, optics)?;
        let image = simulate_measurement(&shaped.kinoform, aberration, optics)?;
        let profile = azimuthal_profile(&image, w, h, &ring, params.samples)?;
        let measured: Vec<f64> = profile.extrema.iter().map(|e| e.value).collect();
        let mm: f64 = measured.iter().map(|m| m * m).sum();
        let scale = if mm > 0.0 {
            measured.iter().zip(&t0).map(|(m, t)| m * t).sum::<f64>() / mm
        } else {
            0.0
        };
        let errors: Vec<f64> = measured.iter().zip(&t0).map(|(m, t)| scale * m - t).collect();
        let rms = (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt();
        let worst = errors.iter().fold(0.0_f64, |a, e| a.max(e.abs()));
        let mean_of = |kind| {
            let v: Vec<f64> = profile
                .extrema
                .iter()
                .filter(|e| e.kind == kind)
                .map(|e| e.value)
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let record = FeedbackRecord {
            iteration,
            discrepancy_percent: 100.0 * rms / mean_max,
            max_extrema_error_percent: 100.0 * worst / mean_max,
            contrast: mean_of(ExtremumKind::Maximum) / mean_of(ExtremumKind::Minimum),
            target_extrema: current.clone(),
            profile: profile.values.iter().map(|v| v * scale).collect(),
            mraf_error: shaped.final_error(),
        };
        let improved = best
            .as_ref()
            .is_none_or(|(b, _, _)| record.discrepancy_percent < history[*b - 1].discrepancy_percent);
        let below = record.discrepancy_percent < params.threshold_percent;
        history.push(record);
        if improved {
            best = Some((iteration, shaped.kinoform, image));
        }
        if below && params.stop_at_threshold {
            break;
        }
        if iteration == params.max_iterations || params.alpha == 0.0 {
            continue;
        }
        for ((c, &m), &t) in current.iter_mut().zip(&measured).zip(&t0) {
            let d = discrepancy(scale * m, t, params.formula);
            *c = (*c + params.alpha * d).clamp(MIN_GAIN * t, MAX_GAIN * t);
        }
        let mut knots: Vec<(f64, f64)> = angles
            .iter()
            .zip(current.iter().zip(&t0))
            .map(|(&a, (c, t))| (a, c / t))
            .collect();
        knots.sort_by(|a, b| a.0.total_cmp(&b.0));
        target = reshape_target(target0, &knots)?;
    }
    let (best_iteration, kinoform, image) = best.expect("at least one iteration");
    let outcome = FeedbackOutcome {
        best_iteration,
        kinoform,
        image,
        target_profile,
        history,
    };
    let best_percent = outcome.best().discrepancy_percent;
    if best_percent >= params.threshold_percent {
        return Err(BeamError::NotConverged {
            best_percent,
            threshold_percent: params.threshold_percent,
            outcome: Box::new(outcome),
        });
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minus_variant_vanishes_at_match() {
        assert_eq!(discrepancy(0.7, 0.7, DiscrepancyFormula::MinusVariant), 0.0);
        assert!((discrepancy(0.7, 0.7, DiscrepancyFormula::Verbatim) + 0.7).abs() < 1e-15);
        // linearizes to t0 - m
        let d = discrepancy(1.0 + 1e-6, 1.0, DiscrepancyFormula::MinusVariant);
        assert!((d + 1e-6).abs() < 1e-11);
    }

    #[test]
    fn interpolation_hits_knots_and_wraps() {
        let knots = [(0.5, 1.0), (2.0, 3.0), (5.0, 2.0)];
        for &(a, v) in &knots {
            assert!((cosine_interpolate(&knots, a) - v).abs() < 1e-12);
        }
        let mid = cosine_interpolate(&knots, 1.25);
        assert!((mid - 2.0).abs() < 1e-12);
        let left = cosine_interpolate(&knots, 0.1);
        let right = cosine_interpolate(&knots, 2.0 * PI + 0.1);
        assert!((left - right).abs() < 1e-12);
        assert!(left > 1.0 && left < 2.0);
    }
}
