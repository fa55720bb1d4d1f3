//! Radial (column-mean) processes of the two-pointed surfaces: drifted
//! Brownian motion conditioned to stay negative for all positive times, two
//! independent sides glued at 0.
//!
//! The conditioning is singular at the start. We realize the limit
//! construction by starting at −ε₀ (ε₀ = 10⁻³ of one step's diffusive
//! scale) and sampling each step exactly from the killed transition kernel
//! reweighted by the harmonic function h(y) = 1 − e^{2ay/σ²}, which is the
//! law of the process conditioned to stay negative forever. The only
//! approximation is the ε₀ start; its effect on the path law is O(ε₀)
//! relative on the first step and nil afterwards.

use crate::params::LqgParams;
use crate::rng::{standard_normal, RngStream};
use crate::{CoreError, Result};
use rand::Rng;

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RadialPath {
    /// Strictly increasing, two-sided around 0 (0 included).
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl RadialPath {
    pub fn value_at_origin(&self) -> f64 {
        let k = self.times.iter().position(|&t| t == 0.0).expect("0 in times");
        self.values[k]
    }

    /// Evaluate by linear interpolation (constant beyond the horizon).
    pub fn eval(&self, t: f64) -> f64 {
        match self.times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(k) => self.values[k],
            Err(0) => self.values[0],
            Err(k) if k >= self.times.len() => *self.values.last().unwrap(),
            Err(k) => {
                let (t0, t1) = (self.times[k - 1], self.times[k]);
                let f = (t - t0) / (t1 - t0);
                self.values[k - 1] * (1.0 - f) + self.values[k] * f
            }
        }
    }
}

/// One step of drifted BM (drift −a, variance rate sigma2) from x < 0,
/// conditioned to stay negative forever. Exact via rejection against the
/// free Gaussian step: accept y < 0 with probability
/// (1 − e^{−2xy/v})·(1 − e^{2ay/σ²}).
fn conditioned_step<R: Rng>(rng: &mut R, x: f64, a: f64, sigma2: f64, dt: f64) -> f64 {
    let v = sigma2 * dt;
    let sd = v.sqrt();
    let mean = x - a * dt;
    loop {
        let y = mean + sd * standard_normal(rng);
        if y >= 0.0 {
            continue;
        }
        let p_stay = -(-2.0 * x * y / v).exp_m1();
        let p_harm = -(2.0 * a * y / sigma2).exp_m1();
        if rng.gen::<f64>() < p_stay * p_harm {
            return y;
        }
    }
}

/// Sample the conditioned path at the given positive times (strictly
/// increasing, starting after 0). A small drift floor avoids the degenerate
/// a = 0 conditioning; at the thick-disk threshold this adds an O(1e−8)
/// drift.
pub fn conditioned_negative_path(
    a: f64,
    sigma2: f64,
    times: &[f64],
    stream: &RngStream,
) -> Vec<f64> {
    let a = a.max(1e-8);
    let mut rng = stream.rng();
    let mut out = Vec::with_capacity(times.len());
    let dt0 = times[0];
    let eps0 = 1e-3 * (sigma2 * dt0).sqrt();
    let mut x = -eps0;
    let mut t_prev = 0.0;
    for &t in times {
        x = conditioned_step(&mut rng, x, a, sigma2, t - t_prev);
        t_prev = t;
        out.push(x);
    }
    out
}

fn two_sided(a: f64, sigma2: f64, horizon: f64, step: f64, stream: &RngStream) -> RadialPath {
    let n = (horizon / step).ceil() as usize;
    let pos_times: Vec<f64> = (1..=n).map(|k| k as f64 * step).collect();
    let right = conditioned_negative_path(a, sigma2, &pos_times, &stream.substream(0));
    let left = conditioned_negative_path(a, sigma2, &pos_times, &stream.substream(1));
    let mut times = Vec::with_capacity(2 * n + 1);
    let mut values = Vec::with_capacity(2 * n + 1);
    for k in (0..n).rev() {
        times.push(-pos_times[k]);
        values.push(left[k]);
    }
    times.push(0.0);
    values.push(0.0);
    for k in 0..n {
        times.push(pos_times[k]);
        values.push(right[k]);
    }
    RadialPath { times, values }
}

/// Disk radial process: double-speed clock (variance rate 2), drift
/// magnitude Q − β = W/γ − γ/2. Requires W ≥ γ²/2.
pub fn sample_radial_disk(
    params: &LqgParams,
    weight: f64,
    horizon: f64,
    step: f64,
    stream: &RngStream,
) -> Result<RadialPath> {
    let a = params.disk_drift(weight)?;
    if horizon <= 0.0 || step <= 0.0 {
        return Err(CoreError::InvalidParameter("horizon and step must be positive".into()));
    }
    Ok(two_sided(a, 2.0, horizon, step, stream))
}

/// Sphere radial process: unit clock, drift magnitude Q − α = W/(2γ), W > 0.
pub fn sample_radial_sphere(
    params: &LqgParams,
    weight: f64,
    horizon: f64,
    step: f64,
    stream: &RngStream,
) -> Result<RadialPath> {
    let a = params.sphere_drift(weight)?;
    if horizon <= 0.0 || step <= 0.0 {
        return Err(CoreError::InvalidParameter("horizon and step must be positive".into()));
    }
    Ok(two_sided(a, 1.0, horizon, step, stream))
}
