use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::BeamError;

/// Complex amplitudes on a regular grid, row-major (`height` rows of `width`).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub width: usize,
    pub height: usize,
    /// Pixel pitch in micrometres.
    pub pitch: f64,
    /// Wavelength in micrometres.
    pub wavelength: f64,
    pub data: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(width: usize, height: usize, pitch: f64, wavelength: f64) -> Result<Self, BeamError> {
        if width == 0 || height == 0 {
            return Err(BeamError::InvalidParameter(format!("grid {width}x{height}")));
        }
        if !(pitch > 0.0 && wavelength > 0.0 && pitch.is_finite() && wavelength.is_finite()) {
            return Err(BeamError::InvalidParameter(format!(
                "pitch {pitch} and wavelength {wavelength} must be positive"
            )));
        }
        Ok(ComplexField {
            width,
            height,
            pitch,
            wavelength,
            data: vec![Complex64::new(0.0, 0.0); width * height],
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        pitch: f64,
        wavelength: f64,
        f: impl Fn(usize, usize) -> Complex64 + Sync,
    ) -> Result<Self, BeamError> {
        let mut field = Self::zeros(width, height, pitch, wavelength)?;
        field
            .data
            .par_chunks_mut(width)
            .enumerate()
            .for_each(|(y, row)| row.iter_mut().enumerate().for_each(|(x, v)| *v = f(x, y)));
        Ok(field)
    }

    pub fn power(&self) -> f64 {
        self.data.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.data.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// Cached row and column transforms for one grid shape. All transforms are
/// unitary.
pub struct Fft2 {
    width: usize,
    height: usize,
    rows: [Arc<dyn Fft<f64>>; 2],
    cols: [Arc<dyn Fft<f64>>; 2],
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fft2({}x{})", self.width, self.height)
    }
}

impl Fft2 {
    pub fn new(width: usize, height: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            width,
            height,
            rows: [planner.plan_fft_forward(width), planner.plan_fft_inverse(width)],
            cols: [planner.plan_fft_forward(height), planner.plan_fft_inverse(height)],
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, 0);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, 1);
    }

    fn run(&self, data: &mut [Complex64], dir: usize) {
        let (w, h) = (self.width, self.height);
        assert_eq!(data.len(), w * h, "buffer does not match {w}x{h}");
        let rows = &self.rows[dir];
        data.par_chunks_mut(w).for_each(|row| rows.process(row));
        let mut t = transpose(data, w, h);
        let cols = &self.cols[dir];
        t.par_chunks_mut(h).for_each(|col| cols.process(col));
        let scale = 1.0 / ((w * h) as f64).sqrt();
        let back = transpose(&t, h, w);
        data.par_iter_mut().zip(back).for_each(|(d, b)| *d = b * scale);
    }
}

fn transpose(data: &[Complex64], w: usize, h: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); w * h];
    out.par_chunks_mut(h).enumerate().for_each(|(x, col)| {
        for (y, v) in col.iter_mut().enumerate() {
            *v = data[y * w + x];
        }
    });
    out
}

/// Swap half-planes so that zero frequency sits at `(width/2, height/2)`.
pub fn fftshift(data: &[Complex64], w: usize, h: usize) -> Vec<Complex64> {
    shift_by(data, w, h, w / 2, h / 2)
}

pub fn ifftshift(data: &[Complex64], w: usize, h: usize) -> Vec<Complex64> {
    shift_by(data, w, h, w - w / 2, h - h / 2)
}

fn shift_by(data: &[Complex64], w: usize, h: usize, sx: usize, sy: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let src = (y + h - sy) % h;
        for (x, v) in row.iter_mut().enumerate() {
            *v = data[src * w + (x + w - sx) % w];
        }
    });
    out
}

/// Signed spatial frequency (cycles per unit length) of FFT bin `k` out of `n`.
fn frequency(k: usize, n: usize, pitch: f64) -> f64 {
    let k = if k < n.div_ceil(2) {
        k as f64
    } else {
        k as f64 - n as f64
    };
    k / (n as f64 * pitch)
}

/// Angular-spectrum propagation over `distance` micrometres; negative
/// distances propagate backwards. Evanescent components are dropped.
pub fn propagate(field: &ComplexField, distance: f64, fft: &Fft2) -> ComplexField {
    if distance == 0.0 {
        return field.clone();
    }
    let (w, h) = (field.width, field.height);
    let mut data = field.data.clone();
    fft.forward(&mut data);
    let inv_l2 = 1.0 / (field.wavelength * field.wavelength);
    data.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let fy = frequency(y, h, field.pitch);
        for (x, v) in row.iter_mut().enumerate() {
            let fx = frequency(x, w, field.pitch);
            let arg = inv_l2 - fx * fx - fy * fy;
            if arg < 0.0 {
                *v = Complex64::new(0.0, 0.0);
            } else {
                *v *= Complex64::from_polar(1.0, 2.0 * PI * arg.sqrt() * distance);
            }
        }
    });
    fft.inverse(&mut data);
    ComplexField { data, ..field.clone() }
}

/// How the SLM plane maps onto the image plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Propagator {
    /// Focal plane of a Fourier lens, centred on the optical axis.
    #[default]
    FarField,
    AngularSpectrum {
        distance: f64,
    },
}

impl Propagator {
    pub fn forward(&self, field: &ComplexField, fft: &Fft2) -> ComplexField {
        match *self {
            Propagator::FarField => {
                let mut data = field.data.clone();
                fft.forward(&mut data);
                ComplexField {
                    data: fftshift(&data, field.width, field.height),
                    ..field.clone()
                }
            }
            Propagator::AngularSpectrum { distance } => propagate(field, distance, fft),
        }
    }

    pub fn backward(&self, field: &ComplexField, fft: &Fft2) -> ComplexField {
        match *self {
            Propagator::FarField => {
                let mut data = ifftshift(&field.data, field.width, field.height);
                fft.inverse(&mut data);
                ComplexField { data, ..field.clone() }
            }
            Propagator::AngularSpectrum { distance } => propagate(field, -distance, fft),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(n: usize, waist: f64) -> ComplexField {
        let c = n as f64 / 2.0;
        ComplexField::from_fn(n, n, 1.0, 0.5, |x, y| {
            let r2 = (x as f64 - c).powi(2) + (y as f64 - c).powi(2);
            Complex64::new((-r2 / (waist * waist)).exp(), 0.0)
        })
        .unwrap()
    }

    #[test]
    fn unitary_transform_round_trip() {
        let f = gaussian(32, 5.0);
        let fft = Fft2::new(32, 32);
        let mut d = f.data.clone();
        fft.forward(&mut d);
        let p: f64 = d.iter().map(|a| a.norm_sqr()).sum();
        assert!((p - f.power()).abs() < 1e-10 * f.power());
        fft.inverse(&mut d);
        for (a, b) in d.iter().zip(&f.data) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn shifts_are_inverse() {
        let d: Vec<Complex64> = (0..35).map(|i| Complex64::new(i as f64, 0.0)).collect();
        assert_eq!(ifftshift(&fftshift(&d, 7, 5), 7, 5), d);
        let s = fftshift(&d, 7, 5);
        assert_eq!(s[2 * 7 + 3], d[0]);
    }

    #[test]
    fn zero_distance_is_identity() {
        let f = gaussian(16, 3.0);
        assert_eq!(propagate(&f, 0.0, &Fft2::new(16, 16)), f);
    }

    #[test]
    fn plane_wave_picks_up_global_phase() {
        let n = 16;
        let (pitch, lambda) = (1.0, 0.5);
        let kx = 3.0 / (n as f64 * pitch);
        let f = ComplexField::from_fn(n, n, pitch, lambda, |x, _| {
            Complex64::from_polar(1.0, 2.0 * PI * kx * x as f64)
        })
        .unwrap();
        let z = 7.3;
        let g = propagate(&f, z, &Fft2::new(n, n));
        let phase = Complex64::from_polar(1.0, 2.0 * PI * (1.0 / (lambda * lambda) - kx * kx).sqrt() * z);
        for (a, b) in g.data.iter().zip(&f.data) {
            assert!((a - b * phase).norm() < 1e-10);
        }
        assert!((g.power() - f.power()).abs() < 1e-10 * f.power());
    }

    #[test]
    fn evanescent_content_is_removed() {
        // pitch below half a wavelength: the Nyquist mode cannot propagate
        let f = ComplexField::from_fn(8, 8, 0.2, 1.0, |x, _| {
            Complex64::new(if x % 2 == 0 { 1.0 } else { -1.0 }, 0.0)
        })
        .unwrap();
        let g = propagate(&f, 1.0, &Fft2::new(8, 8));
        assert!(g.power() < 1e-20);
    }
}
