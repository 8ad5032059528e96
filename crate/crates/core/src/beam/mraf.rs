use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::{ComplexField, Fft2, Propagator};
use super::measure::{simulate_measurement, Aberration};
use super::target::RingTarget;
use super::BeamError;

pub const PHASE_LEVELS: usize = 256;

/// Phase-only hologram quantized to 256 levels; level `v` means `2 pi v / 256`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Kinoform {
    pub width: usize,
    pub height: usize,
    pub levels: Vec<u8>,
}

impl Kinoform {
    pub fn quantize(width: usize, height: usize, phase: &[f64]) -> Self {
        let n = PHASE_LEVELS as f64;
        let levels = phase
            .iter()
            .map(|p| ((p.rem_euclid(2.0 * PI) / (2.0 * PI) * n).round() as usize % PHASE_LEVELS) as u8)
            .collect();
        Kinoform { width, height, levels }
    }

    pub fn phase(level: u8) -> f64 {
        2.0 * PI * level as f64 / PHASE_LEVELS as f64
    }

    pub fn phases(&self) -> Vec<f64> {
        self.levels.iter().map(|&v| Self::phase(v)).collect()
    }
}

/// SLM geometry, illumination and the lens model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OpticsParams {
    pub grid: usize,
    pub slm_pitch_um: f64,
    pub wavelength_um: f64,
    /// Gaussian illumination `1/e` amplitude radius as a fraction of half the grid.
    pub illumination_waist: f64,
    pub propagator: Propagator,
}

impl Default for OpticsParams {
    fn default() -> Self {
        OpticsParams {
            grid: 512,
            slm_pitch_um: 8.0,
            wavelength_um: 1.064,
            illumination_waist: 0.3,
            propagator: Propagator::FarField,
        }
    }
}

/// Planned transforms plus the unit-power illumination amplitude.
#[derive(Debug)]
pub struct Optics {
    pub params: OpticsParams,
    pub fft: Fft2,
    pub illumination: ComplexField,
}

impl Optics {
    pub fn new(params: OpticsParams) -> Result<Self, BeamError> {
        if params.grid < 8 {
            return Err(BeamError::InvalidParameter(format!("grid {} too small", params.grid)));
        }
        if !(params.illumination_waist > 0.0 && params.illumination_waist.is_finite()) {
            return Err(BeamError::InvalidParameter(format!(
                "illumination waist {}",
                params.illumination_waist
            )));
        }
        let n = params.grid;
        let c = (n / 2) as f64;
        let w = params.illumination_waist * c;
        let mut illumination = ComplexField::from_fn(n, n, params.slm_pitch_um, params.wavelength_um, |x, y| {
            let r2 = (x as f64 - c).powi(2) + (y as f64 - c).powi(2);
            Complex64::new((-r2 / (w * w)).exp(), 0.0)
        })?;
        let norm = illumination.power().sqrt();
        illumination.data.iter_mut().for_each(|a| *a /= norm);
        Ok(Optics {
            fft: Fft2::new(n, n),
            params,
            illumination,
        })
    }

    pub fn size(&self) -> usize {
        self.params.grid
    }

    /// Illumination carrying `phase` at the SLM plane.
    pub fn slm_field(&self, phase: &[f64]) -> ComplexField {
        let data = self
            .illumination
            .data
            .par_iter()
            .zip(phase)
            .map(|(a, &p)| a * Complex64::from_polar(1.0, p))
            .collect();
        ComplexField {
            data,
            ..self.illumination.clone()
        }
    }

    pub fn image_field(&self, phase: &[f64]) -> ComplexField {
        self.params.propagator.forward(&self.slm_field(phase), &self.fft)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum InitialPhase {
    /// Conical phase focusing onto the ring circle plus a quadratic term
    /// spreading the focus across the signal annulus.
    #[default]
    Axicon,
    Flat,
    Random {
        seed: u64,
    },
}

pub fn initial_phase(kind: InitialPhase, optics: &Optics, target: &RingTarget) -> Vec<f64> {
    let size = optics.size();
    let c = (size / 2) as f64;
    let radius = |i: usize| ((i % size) as f64 - c).hypot((i / size) as f64 - c);
    match kind {
        InitialPhase::Axicon => {
            let cone = 2.0 * PI * target.geometry.radius / size as f64;
            // a quadratic phase gamma (r/w)^2 spreads the focus over ~N gamma / (pi w) pixels
            let waist = optics.params.illumination_waist * c;
            let gamma = PI * waist * target.annulus_width() / size as f64;
            (0..size * size)
                .map(|i| {
                    let r = radius(i);
                    (cone * r + gamma * (r / waist).powi(2)).rem_euclid(2.0 * PI)
                })
                .collect()
        }
        InitialPhase::Flat => vec![0.0; size * size],
        InitialPhase::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..size * size).map(|_| rng.random::<f64>() * 2.0 * PI).collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MrafParams {
    pub iterations: usize,
    /// Weight of the target amplitude in the signal region.
    pub mixing: f64,
}

impl Default for MrafParams {
    fn default() -> Self {
        MrafParams {
            iterations: 20,
            mixing: 0.4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MrafResult {
    pub kinoform: Kinoform,
    /// Image of the quantized kinoform without aberrations.
    pub predicted: Vec<f64>,
    /// Signal-region error before each iteration, then of the quantized result.
    pub errors: Vec<f64>,
}

impl MrafResult {
    pub fn final_error(&self) -> f64 {
        *self.errors.last().expect("at least one entry")
    }
}

/// Relative L2 distance between the signal-region shapes of `image` and the target.
pub fn signal_error(image: &[f64], target: &RingTarget) -> f64 {
    let power: f64 = image
        .iter()
        .zip(&target.signal)
        .filter(|(_, &s)| s)
        .map(|(v, _)| v)
        .sum();
    if power <= 0.0 {
        return 1.0;
    }
    let (mut num, mut den) = (0.0, 0.0);
    for ((v, t), _) in image
        .iter()
        .zip(&target.intensity)
        .zip(&target.signal)
        .filter(|(_, &s)| s)
    {
        num += (v / power - t).powi(2);
        den += t * t;
    }
    (num / den).sqrt()
}

pub fn mraf(
    target: &RingTarget,
    phase0: &[f64],
    params: &MrafParams,
    optics: &Optics,
) -> Result<MrafResult, BeamError> {
    let n = optics.size();
    if target.width != n || target.height != n || phase0.len() != n * n {
        return Err(BeamError::GridMismatch {
            expected: n * n,
            found: if phase0.len() != n * n {
                phase0.len()
            } else {
                target.width * target.height
            },
        });
    }
    if params.iterations == 0 {
        return Err(BeamError::InvalidParameter("MRAF needs at least one iteration".into()));
    }
    if !(params.mixing > 0.0 && params.mixing <= 1.0) {
        return Err(BeamError::InvalidParameter(format!(
            "mixing {} outside (0, 1]",
            params.mixing
        )));
    }
    let m = params.mixing;
    let amplitude: Vec<f64> = target.intensity.iter().map(|t| t.sqrt()).collect();
    let mut phase = phase0.to_vec();
    let mut errors = Vec::with_capacity(params.iterations + 1);
    for _ in 0..params.iterations {
        let mut image = optics.image_field(&phase);
        let intensity = image.intensity();
        errors.push(signal_error(&intensity, target));
        let power: f64 = intensity
            .iter()
            .zip(&target.signal)
            .filter(|(_, &s)| s)
            .map(|(v, _)| v)
            .sum();
        let scale = power.sqrt();
        image.data.par_iter_mut().enumerate().for_each(|(i, e)| {
            if target.signal[i] {
                let a = m * scale * amplitude[i] + (1.0 - m) * e.norm();
                *e = Complex64::from_polar(a, e.arg());
            } else if !target.noise[i] {
                *e = Complex64::new(0.0, 0.0);
            }
        });
        let back = optics.params.propagator.backward(&image, &optics.fft);
        phase = back.data.par_iter().map(|b| b.arg()).collect();
    }
    let kinoform = Kinoform::quantize(n, n, &phase);
    let predicted = simulate_measurement(&kinoform, &Aberration::default(), optics)?;
    errors.push(signal_error(&predicted, target));
    Ok(MrafResult {
        kinoform,
        predicted,
        errors,
    })
}
