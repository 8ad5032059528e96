use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::BeamError;

/// Circle in image-pixel coordinates with `sites` equally spaced lattice
/// sites, the first at angle `offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingGeometry {
    pub center_x: f64,
    pub center_y: f64,
    pub radius: f64,
    pub sites: usize,
    pub offset: f64,
}

impl RingGeometry {
    pub fn site_angle(&self, s: usize) -> f64 {
        self.offset + 2.0 * PI * s as f64 / self.sites as f64
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.sites as f64
    }

    /// Azimuth of pixel `(x, y)` about the ring centre, in `[0, 2pi)`.
    pub fn azimuth(&self, x: f64, y: f64) -> f64 {
        (y - self.center_y).atan2(x - self.center_x).rem_euclid(2.0 * PI)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RingTargetParams {
    pub sites: usize,
    /// Ring radius in micrometres.
    pub radius_um: f64,
    /// Gaussian spot standard deviation in micrometres.
    pub spot_sigma_um: f64,
    /// Image-plane pixel size in micrometres.
    pub image_pitch_um: f64,
    /// Relative spot intensities in `(0, 1]`; empty means all 1.
    pub depths: Vec<f64>,
    pub angle_offset: f64,
    /// Half-width of the signal annulus in spot widths.
    pub signal_half_width: f64,
}

impl Default for RingTargetParams {
    fn default() -> Self {
        RingTargetParams {
            sites: 8,
            radius_um: 8.0,
            spot_sigma_um: 1.6,
            image_pitch_um: 0.2,
            depths: Vec::new(),
            angle_offset: 0.0,
            signal_half_width: 3.0,
        }
    }
}

/// Target intensity with disjoint signal and noise regions.
#[derive(Debug, Clone, PartialEq)]
pub struct RingTarget {
    pub width: usize,
    pub height: usize,
    pub geometry: RingGeometry,
    /// Spot width in pixels.
    pub sigma: f64,
    pub depths: Vec<f64>,
    /// Sums to 1 over the signal region.
    pub intensity: Vec<f64>,
    pub signal: Vec<bool>,
    pub noise: Vec<bool>,
    /// Radial half-width of the signal annulus in pixels.
    pub band: f64,
}

pub fn generate_ring_target(params: &RingTargetParams, width: usize, height: usize) -> Result<RingTarget, BeamError> {
    let p = params;
    if p.sites < 3 {
        return Err(BeamError::InvalidParameter(format!(
            "ring needs at least 3 sites, got {}",
            p.sites
        )));
    }
    for (name, v) in [
        ("radius_um", p.radius_um),
        ("spot_sigma_um", p.spot_sigma_um),
        ("image_pitch_um", p.image_pitch_um),
        ("signal_half_width", p.signal_half_width),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(BeamError::InvalidParameter(format!("{name} must be positive, got {v}")));
        }
    }
    let depths = if p.depths.is_empty() {
        vec![1.0; p.sites]
    } else if p.depths.len() != p.sites {
        return Err(BeamError::InvalidParameter(format!(
            "{} depth factors for {} sites",
            p.depths.len(),
            p.sites
        )));
    } else {
        p.depths.clone()
    };
    if let Some(d) = depths.iter().find(|&&d| !(d > 0.0 && d <= 1.0)) {
        return Err(BeamError::InvalidParameter(format!("depth factor {d} outside (0, 1]")));
    }
    let radius = p.radius_um / p.image_pitch_um;
    let sigma = p.spot_sigma_um / p.image_pitch_um;
    let reach = radius + p.signal_half_width * sigma;
    let geometry = RingGeometry {
        center_x: (width / 2) as f64,
        center_y: (height / 2) as f64,
        radius,
        sites: p.sites,
        offset: p.angle_offset,
    };
    let room = geometry
        .center_x
        .min(geometry.center_y)
        .min((width - width / 2) as f64 - 1.0)
        .min((height - height / 2) as f64 - 1.0);
    if reach >= room {
        return Err(BeamError::Geometry(format!(
            "ring reaches {reach:.1} px from the centre but the grid allows {room:.1}"
        )));
    }
    let spots: Vec<(f64, f64, f64)> = (0..p.sites)
        .map(|s| {
            let a = geometry.site_angle(s);
            (
                geometry.center_x + radius * a.cos(),
                geometry.center_y + radius * a.sin(),
                depths[s],
            )
        })
        .collect();
    let band = p.signal_half_width * sigma;
    let mut intensity = vec![0.0; width * height];
    let mut signal = vec![false; width * height];
    intensity
        .par_chunks_mut(width)
        .zip(signal.par_chunks_mut(width))
        .enumerate()
        .for_each(|(y, (irow, srow))| {
            let yf = y as f64;
            for x in 0..width {
                let xf = x as f64;
                let r = (xf - geometry.center_x).hypot(yf - geometry.center_y);
                srow[x] = (r - radius).abs() <= band;
                if srow[x] {
                    irow[x] = spots
                        .iter()
                        .map(|&(sx, sy, d)| {
                            d * (-((xf - sx).powi(2) + (yf - sy).powi(2)) / (2.0 * sigma * sigma)).exp()
                        })
                        .sum();
                }
            }
        });
    let total: f64 = intensity.iter().sum();
    intensity.iter_mut().for_each(|v| *v /= total);
    let noise = signal.iter().map(|s| !s).collect();
    Ok(RingTarget {
        width,
        height,
        geometry,
        sigma,
        depths,
        intensity,
        signal,
        noise,
        band,
    })
}

impl RingTarget {
    /// Full radial width of the signal annulus in pixels.
    pub fn annulus_width(&self) -> f64 {
        2.0 * self.band
    }

    /// Same masks and geometry with a new intensity image, renormalized over
    /// the signal region.
    pub fn with_intensity(&self, mut intensity: Vec<f64>) -> Result<RingTarget, BeamError> {
        if intensity.len() != self.intensity.len() {
            return Err(BeamError::GridMismatch {
                expected: self.intensity.len(),
                found: intensity.len(),
            });
        }
        let total: f64 = intensity
            .iter()
            .zip(&self.signal)
            .filter(|(_, &s)| s)
            .map(|(v, _)| *v)
            .sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(BeamError::InvalidParameter(
                "target has no power in the signal region".into(),
            ));
        }
        intensity.iter_mut().for_each(|v| *v /= total);
        Ok(RingTarget {
            intensity,
            ..self.clone()
        })
    }
}
