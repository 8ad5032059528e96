use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::target::RingGeometry;
use super::BeamError;

pub const DEFAULT_SAMPLES: usize = 720;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremumKind {
    Maximum,
    Minimum,
}

/// A lattice-site maximum or the minimum between site `site` and `site + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub kind: ExtremumKind,
    pub site: usize,
    pub angle: f64,
    pub value: f64,
}

/// Intensity sampled on the ring circle at `angles[j] = 2 pi j / samples`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AzimuthalProfile {
    pub angles: Vec<f64>,
    pub values: Vec<f64>,
    /// Site maxima then inter-site minima, in site order.
    pub extrema: Vec<Extremum>,
}

impl AzimuthalProfile {
    pub fn maxima(&self) -> impl Iterator<Item = &Extremum> {
        self.extrema.iter().filter(|e| e.kind == ExtremumKind::Maximum)
    }

    pub fn minima(&self) -> impl Iterator<Item = &Extremum> {
        self.extrema.iter().filter(|e| e.kind == ExtremumKind::Minimum)
    }
}

fn bilinear(image: &[f64], width: usize, x: f64, y: f64) -> f64 {
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (i, j) = (x0 as usize, y0 as usize);
    let at = |a: usize, b: usize| image[b * width + a];
    (1.0 - fy) * ((1.0 - fx) * at(i, j) + fx * at(i + 1, j)) + fy * ((1.0 - fx) * at(i, j + 1) + fx * at(i + 1, j + 1))
}

pub fn azimuthal_profile(
    image: &[f64],
    width: usize,
    height: usize,
    ring: &RingGeometry,
    samples: usize,
) -> Result<AzimuthalProfile, BeamError> {
    if image.len() != width * height {
        return Err(BeamError::GridMismatch {
            expected: width * height,
            found: image.len(),
        });
    }
    if samples < 2 * ring.sites || ring.sites == 0 {
        return Err(BeamError::InvalidParameter(format!(
            "{samples} samples cannot resolve {} sites",
            ring.sites
        )));
    }
    let inside = |v: f64, n: usize| v >= 0.0 && v + 1.0 < n as f64;
    if !(inside(ring.center_x - ring.radius, width)
        && inside(ring.center_x + ring.radius, width)
        && inside(ring.center_y - ring.radius, height)
        && inside(ring.center_y + ring.radius, height))
    {
        return Err(BeamError::Geometry("ring lies outside the image".into()));
    }
    let angles: Vec<f64> = (0..samples).map(|j| 2.0 * PI * j as f64 / samples as f64).collect();
    let values: Vec<f64> = angles
        .iter()
        .map(|&a| {
            bilinear(
                image,
                width,
                ring.center_x + ring.radius * a.cos(),
                ring.center_y + ring.radius * a.sin(),
            )
        })
        .collect();
    let extrema = find_extrema(&angles, &values, ring);
    Ok(AzimuthalProfile {
        angles,
        values,
        extrema,
    })
}

/// Largest sample within half a spacing of each site and smallest within half
/// a spacing of each midpoint.
fn find_extrema(angles: &[f64], values: &[f64], ring: &RingGeometry) -> Vec<Extremum> {
    let half = ring.spacing() / 2.0;
    let pick = |centre: f64, kind: ExtremumKind, site: usize| {
        let mut best: Option<(f64, f64)> = None;
        for (&a, &v) in angles.iter().zip(values) {
            let d = (a - centre + PI).rem_euclid(2.0 * PI) - PI;
            if d.abs() < half {
                let better = match (best, kind) {
                    (None, _) => true,
                    (Some((_, b)), ExtremumKind::Maximum) => v > b,
                    (Some((_, b)), ExtremumKind::Minimum) => v < b,
                };
                if better {
                    best = Some((a, v));
                }
            }
        }
        let (angle, value) = best.expect("window contains samples");
        Extremum {
            kind,
            site,
            angle,
            value,
        }
    };
    let mut out: Vec<Extremum> = (0..ring.sites)
        .map(|s| pick(ring.site_angle(s), ExtremumKind::Maximum, s))
        .collect();
    out.extend((0..ring.sites).map(|s| pick(ring.site_angle(s) + half, ExtremumKind::Minimum, s)));
    out
}

/// Number of cyclic local maxima after merging neighbours separated by a
/// valley shallower than `prominence * max`.
pub fn count_maxima(values: &[f64], prominence: f64) -> usize {
    let n = values.len();
    let peak = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let floor = prominence * peak;
    let mut maxima: Vec<usize> = (0..n)
        .filter(|&i| values[i] > values[(i + n - 1) % n] && values[i] >= values[(i + 1) % n])
        .collect();
    let valley = |a: usize, b: usize| {
        let mut m = values[a];
        let mut j = a;
        while j != b {
            j = (j + 1) % n;
            m = m.min(values[j]);
        }
        m
    };
    while maxima.len() > 1 {
        let k = maxima.len();
        let shallow = (0..k).find(|&i| {
            let (a, b) = (maxima[i], maxima[(i + 1) % k]);
            values[a].min(values[b]) - valley(a, b) < floor
        });
        match shallow {
            Some(i) => {
                let (a, b) = (i, (i + 1) % k);
                maxima.remove(if values[maxima[a]] < values[maxima[b]] { a } else { b });
            }
            None => break,
        }
    }
    maxima.len()
}
