use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mraf::{Kinoform, Optics};
use super::BeamError;

/// Low-order phase errors at the SLM plane (radians at the pupil edge, with
/// pupil coordinates in `[-1, 1]`), a linear intensity gradient across the
/// image and optional additive camera noise.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Aberration {
    pub tilt_x: f64,
    pub tilt_y: f64,
    pub defocus: f64,
    pub astigmatism: f64,
    pub astigmatism_diagonal: f64,
    pub intensity_gradient: [f64; 2],
    /// Standard deviation relative to the image maximum; 0 disables noise.
    pub noise_sigma: f64,
    pub noise_seed: u64,
}

impl Aberration {
    pub fn defocus(strength: f64) -> Self {
        Aberration {
            defocus: strength,
            ..Default::default()
        }
    }

    pub fn phase_map(&self, size: usize) -> Vec<f64> {
        let c = (size / 2) as f64;
        (0..size * size)
            .into_par_iter()
            .map(|i| {
                let x = ((i % size) as f64 - c) / c;
                let y = ((i / size) as f64 - c) / c;
                self.tilt_x * x
                    + self.tilt_y * y
                    + self.defocus * (x * x + y * y)
                    + self.astigmatism * (x * x - y * y)
                    + self.astigmatism_diagonal * 2.0 * x * y
            })
            .collect()
    }
}

/// Camera image of `kinoform` through the aberrated optics.
pub fn simulate_measurement(
    kinoform: &Kinoform,
    aberration: &Aberration,
    optics: &Optics,
) -> Result<Vec<f64>, BeamError> {
    let n = optics.size();
    if kinoform.width != n || kinoform.height != n {
        return Err(BeamError::GridMismatch {
            expected: n * n,
            found: kinoform.width * kinoform.height,
        });
    }
    if !(aberration.noise_sigma >= 0.0 && aberration.noise_sigma.is_finite()) {
        return Err(BeamError::InvalidParameter(format!(
            "noise sigma {}",
            aberration.noise_sigma
        )));
    }
    let mut phase = kinoform.phases();
    if *aberration != Aberration::default() {
        phase.iter_mut().zip(aberration.phase_map(n)).for_each(|(p, a)| *p += a);
    }
    let mut image = optics.image_field(&phase).intensity();
    let [gx, gy] = aberration.intensity_gradient;
    if gx != 0.0 || gy != 0.0 {
        let c = (n / 2) as f64;
        image.par_iter_mut().enumerate().for_each(|(i, v)| {
            let x = ((i % n) as f64 - c) / c;
            let y = ((i / n) as f64 - c) / c;
            *v *= (1.0 + gx * x + gy * y).max(0.0);
        });
    }
    if aberration.noise_sigma > 0.0 {
        let peak = image.iter().cloned().fold(0.0, f64::max);
        let normal =
            Normal::new(0.0, aberration.noise_sigma * peak).map_err(|e| BeamError::InvalidParameter(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(aberration.noise_seed);
        image
            .iter_mut()
            .for_each(|v| *v = (*v + normal.sample(&mut rng)).max(0.0));
    }
    Ok(image)
}
