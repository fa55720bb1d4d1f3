//! Loewner-chain curve samplers and curve functionals: chordal traces in the
//! half-plane, the two-arc whole-plane loop through two points, Minkowski
//! content with Richardson extrapolation, loop-measure log-weights, and a
//! box-counting dimension diagnostic.

use crate::rng::{standard_normal, RngStream};
use crate::{C64, CoreError, Result};
use rand::Rng;
use std::collections::HashSet;

#[derive(Debug, Clone, serde::Serialize)]
pub struct DrivingFunction {
    pub times: Vec<f64>,
    /// Real driving (chordal) or circle angle (whole-plane).
    pub values: Vec<f64>,
    pub kappa: f64,
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct CurveSample {
    pub points: Vec<C64>,
    pub p: C64,
    pub q: C64,
    pub kappa: f64,
    /// d = 1 + κ/8, set analytically, never fitted.
    pub d: f64,
    pub content: Option<f64>,
    pub content_stable: bool,
    pub log_weight: f64,
}

impl CurveSample {
    pub fn diameter(&self) -> f64 {
        let mut d = 0.0f64;
        for (k, a) in self.points.iter().enumerate() {
            for b in &self.points[k + 1..] {
                d = d.max((a - b).norm());
            }
        }
        d
    }

    pub fn is_closed(&self) -> bool {
        self.points.first() == self.points.last()
    }
}

fn sqrt_upper(z: C64) -> C64 {
    let w = z.sqrt();
    if w.im < 0.0 {
        -w
    } else {
        w
    }
}

/// Inverse of the half-plane capacity-δ slit map at driving u:
/// f(z) = u + sqrt((z−u)² − 4δ), branch in the closed upper half-plane.
fn chordal_slit_backward(z: C64, u: f64, delta: f64) -> C64 {
    let t = z - C64::new(u, 0.0);
    C64::new(u, 0.0) + sqrt_upper(t * t - C64::new(4.0 * delta, 0.0))
}

/// Tip of the discrete chordal trace after step k: the slit maps are
/// composed backwards, each step using the driving value at its interval
/// end so the innermost tip W_k + 2i√δ sits off the axis.
fn chordal_tip(driving: &[f64], k: usize, delta: f64) -> C64 {
    let mut z = C64::new(driving[k], 2.0 * delta.sqrt());
    for j in (1..k).rev() {
        z = chordal_slit_backward(z, driving[j], delta);
    }
    z
}

/// Gaussian driving with Var = κδ per step; values[0] = 0.
pub fn chordal_driving(kappa: f64, n_steps: usize, t_total: f64, stream: &RngStream) -> DrivingFunction {
    let delta = t_total / n_steps as f64;
    let sd = (kappa * delta).sqrt();
    let mut rng = stream.rng();
    let mut values = Vec::with_capacity(n_steps + 1);
    values.push(0.0);
    for _ in 0..n_steps {
        values.push(values.last().unwrap() + sd * standard_normal(&mut rng));
    }
    let times = (0..=n_steps).map(|k| k as f64 * delta).collect();
    DrivingFunction { times, values, kappa, rho: None }
}

/// Trace of the discrete Loewner chain for a given driving sequence.
/// Non-finite tips are retried with a bisected final step (Brownian-bridge
/// midpoint); more than 10 consecutive bisections is a solver failure.
pub fn chordal_trace_from_driving(driving: &DrivingFunction, stream: &RngStream) -> Result<Vec<C64>> {
    let n = driving.values.len() - 1;
    let delta = (driving.times[n] - driving.times[0]) / n as f64;
    let mut rng = stream.substream(999).rng();
    let mut points = Vec::with_capacity(n);
    for k in 1..=n {
        let mut tip = chordal_tip(&driving.values, k, delta);
        if !tip.re.is_finite() || !tip.im.is_finite() {
            // Refine the last step only: halve repeatedly with bridge
            // midpoints until the tip evaluates.
            let mut sub = vec![driving.values[k - 1], driving.values[k]];
            let mut sub_delta = delta;
            let mut tries = 0;
            loop {
                tries += 1;
                if tries > 10 {
                    return Err(CoreError::LoewnerFailure(format!(
                        "tip at step {k} did not stabilize after 10 bisections"
                    )));
                }
                // Insert bridge midpoints.
                let mut refined = Vec::with_capacity(sub.len() * 2 - 1);
                for w in sub.windows(2) {
                    let mid = 0.5 * (w[0] + w[1])
                        + 0.5 * (driving.kappa * sub_delta).sqrt() * standard_normal(&mut rng);
                    refined.push(w[0]);
                    refined.push(mid);
                }
                refined.push(*sub.last().unwrap());
                sub = refined;
                sub_delta /= 2.0;
                let mut z = C64::new(*sub.last().unwrap(), 2.0 * sub_delta.sqrt());
                for j in (1..sub.len() - 1).rev() {
                    z = chordal_slit_backward(z, sub[j], sub_delta);
                }
                let mut full = z;
                for j in (1..k).rev() {
                    full = chordal_slit_backward(full, driving.values[j], delta);
                }
                if full.re.is_finite() && full.im.is_finite() {
                    tip = full;
                    break;
                }
            }
        }
        points.push(tip);
    }
    Ok(points)
}

/// Chordal trace in the upper half-plane from 0 toward ∞.
pub fn chordal_sle_trace(
    kappa: f64,
    n_steps: usize,
    t_total: f64,
    stream: &RngStream,
) -> Result<CurveSample> {
    if !(kappa > 0.0 && kappa < 4.0) {
        return Err(CoreError::InvalidParameter(format!("kappa {kappa} outside (0,4)")));
    }
    if n_steps < 100 {
        return Err(CoreError::InvalidParameter("need at least 100 steps".into()));
    }
    let driving = chordal_driving(kappa, n_steps, t_total, stream);
    let points = chordal_trace_from_driving(&driving, stream)?;
    let q = *points.last().unwrap();
    Ok(CurveSample {
        points,
        p: C64::new(0.0, 0.0),
        q,
        kappa,
        d: 1.0 + kappa / 8.0,
        content: None,
        content_stable: false,
        log_weight: 0.0,
    })
}

// ---------------------------------------------------------------------------
// Whole-plane machinery.

/// s(g) = g/(1+g)², the conserved quantity of the constant-driving radial
/// flow: s(g_t) = e^t s(g_0).
fn radial_conserved(g: C64) -> C64 {
    let d = 1.0 + g;
    g / (d * d)
}

/// Solve s(g) = target picking the exterior root (|g| ≥ 1); the two roots
/// are reciprocal.
fn radial_solve(target: C64) -> C64 {
    if target.norm() < 1e-290 {
        // s ≈ 0 ↔ g ≈ ∞ (or 0); exterior branch is 1/target asymptotically.
        return C64::new(1.0, 0.0) / target;
    }
    let disc = sqrt_any(C64::new(1.0, 0.0) - 4.0 * target);
    let r1 = ((C64::new(1.0, 0.0) - 2.0 * target) + disc) / (2.0 * target);
    let r2 = ((C64::new(1.0, 0.0) - 2.0 * target) - disc) / (2.0 * target);
    // Roots multiply to 1; prefer the one outside the disk, resolving the
    // near-unit tie toward the larger.
    if r1.norm() >= r2.norm() {
        r1
    } else {
        r2
    }
}

fn sqrt_any(z: C64) -> C64 {
    z.sqrt()
}

/// One backward elementary radial map: time-k coords → time-(k−1) coords,
/// slit at circle point u, capacity increment δ.
fn radial_slit_backward(z: C64, u: C64, delta: f64) -> C64 {
    let zeta = z / u;
    let denom = 1.0 + zeta;
    if denom.norm_sqr() < 1e-280 {
        return z;
    }
    let s = (-delta).exp() * radial_conserved(zeta);
    u * radial_solve(s)
}

fn radial_chain_backward(z: C64, angles: &[f64], upto: usize, delta: f64) -> C64 {
    let mut z = z;
    for j in (0..upto).rev() {
        z = radial_slit_backward(z, C64::from_polar(1.0, angles[j]), delta);
    }
    z
}

/// Stationary law of the driving/force angle gap: density ∝ sin(x/2)^{8/κ}
/// on (0, 2π), sampled by a numeric inverse CDF.
fn stationary_gap(kappa: f64, rng: &mut impl Rng) -> f64 {
    let n = 2048;
    // log-domain weights: sin(x/2)^{8/κ} underflows for small κ.
    let logw: Vec<f64> = (0..n)
        .map(|k| {
            let x = std::f64::consts::PI * 2.0 * (k as f64 + 0.5) / n as f64;
            8.0 / kappa * (x / 2.0).sin().max(1e-300).ln()
        })
        .collect();
    let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut cdf = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    cdf.push(0.0);
    for lw in &logw {
        acc += (lw - max).exp();
        cdf.push(acc);
    }
    let u = rng.gen::<f64>() * acc;
    let idx = cdf.partition_point(|&v| v < u).clamp(1, n);
    std::f64::consts::PI * 2.0 * (idx as f64 - 0.5) / n as f64
}

/// Driving and force angles of the radial κ(ρ=2) diffusion:
/// dw = √κ dB + cot((w−o)/2) dt, do = −cot((w−o)/2) dt, gap started from
/// its stationary law.
fn whole_plane_driving(
    kappa: f64,
    n_steps: usize,
    delta: f64,
    stream: &RngStream,
) -> (Vec<f64>, Vec<f64>) {
    let mut rng = stream.rng();
    let mut x = stationary_gap(kappa, &mut rng);
    let mut w = 0.0f64;
    let mut o = -x;
    let mut ws = Vec::with_capacity(n_steps);
    let mut os = Vec::with_capacity(n_steps);
    let sub = 8;
    let dt = delta / sub as f64;
    let sd = (kappa * dt).sqrt();
    for _ in 0..n_steps {
        for _ in 0..sub {
            let cot = 0.5 * (x / 2.0).tan().recip();
            // Drift guard: the gap diffusion never hits {0, 2π} in the
            // continuum; cap the discrete pull to keep it that way.
            let drift = cot.clamp(-50.0, 50.0);
            let db = sd * standard_normal(&mut rng);
            x = (x + 4.0 * drift * dt + db).clamp(1e-4, 2.0 * std::f64::consts::PI - 1e-4);
            o -= 2.0 * drift * dt;
            w = o + x;
        }
        ws.push(w);
        os.push(o);
    }
    (ws, os)
}

/// Configuration of the two-arc loop sampler.
#[derive(Debug, Clone, Copy)]
pub struct LoopConfig {
    pub kappa: f64,
    /// Steps of the first (whole-plane) arc.
    pub n1: usize,
    /// Steps of the second (chordal, complement) arc.
    pub n2: usize,
    /// The first arc runs on capacity [−t_init, t_end].
    pub t_init: f64,
    pub t_end: f64,
    /// Half-plane capacity horizon of the second arc.
    pub cap2: f64,
}

impl LoopConfig {
    pub fn new(kappa: f64, n_steps: usize) -> Self {
        LoopConfig {
            kappa,
            n1: n_steps,
            n2: n_steps,
            t_init: 6.0,
            t_end: 2.0,
            cap2: 150.0,
        }
    }
}

/// Closed oriented loop through p and q: first arc a radial-chain
/// whole-plane κ(2) discretization started from the stationary driving at
/// capacity −t_init, second arc a chordal trace in the complement from the
/// first arc's tip prime end to its force-point prime end, mapped through
/// the accumulated slit maps. The raw loop (through 0 and the realized
/// tip) is carried to (p, q) by the similarity fixing the construction's
/// law.
pub fn two_sided_whole_plane(
    cfg: &LoopConfig,
    p: C64,
    q: C64,
    stream: &RngStream,
) -> Result<CurveSample> {
    if !(cfg.kappa > 0.0 && cfg.kappa < 4.0) {
        return Err(CoreError::InvalidParameter(format!("kappa {} outside (0,4)", cfg.kappa)));
    }
    if p == q {
        return Err(CoreError::CoincidentPoints);
    }
    let t0 = -cfg.t_init;
    let span = cfg.t_end - t0;
    let delta = span / cfg.n1 as f64;
    let (ws, os) = whole_plane_driving(cfg.kappa, cfg.n1, delta, &stream.substream(0));
    let scale = t0.exp();

    // First arc.
    let mut arc1 = Vec::with_capacity(cfg.n1);
    for k in 0..cfg.n1 {
        let tip = radial_chain_backward(C64::from_polar(1.0, ws[k]), &ws, k + 1, delta);
        let z = scale * tip;
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(CoreError::LoewnerFailure(format!("first arc tip {k} not finite")));
        }
        arc1.push(z);
    }
    let q_raw = *arc1.last().unwrap();

    // Uniformize the complement of the first arc: exterior-disk coordinates
    // via the accumulated chain, then a Möbius map to the half-plane taking
    // the tip image to 0 and the force-point image to ∞.
    let a = C64::from_polar(1.0, ws[cfg.n1 - 1]);
    let b = C64::from_polar(1.0, os[cfg.n1 - 1]);
    if (a - b).norm() < 1e-9 {
        return Err(CoreError::LoewnerFailure("tip and base images collide (crowding)".into()));
    }
    // Phase fixing: a circle point between the two marked images maps to ℝ.
    let test_circle = C64::from_polar(1.0, 0.5 * (ws[cfg.n1 - 1] + os[cfg.n1 - 1]) + std::f64::consts::PI);
    let raw = |zeta: C64| (zeta - a) / (zeta - b);
    let mut lambda = C64::from_polar(1.0, -raw(test_circle).arg());
    // Orientation: a far exterior point must land in the upper half-plane.
    let far = 3.0 * test_circle;
    if (lambda * raw(far)).im < 0.0 {
        lambda = -lambda;
    }
    let m_inv = |xi: C64| -> C64 { (lambda * a - xi * b) / (lambda - xi) };

    // Second arc: chordal trace in the half-plane, mapped into place.
    let driving2 = chordal_driving(cfg.kappa, cfg.n2, cfg.cap2, &stream.substream(1));
    let trace2 = chordal_trace_from_driving(&driving2, &stream.substream(1))?;
    let mut arc2 = Vec::with_capacity(cfg.n2);
    for xi in trace2 {
        let zeta = m_inv(xi);
        let z = scale * radial_chain_backward(zeta, &ws, cfg.n1, delta);
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(CoreError::LoewnerFailure(
                "second arc mapping failed (crowding in the accumulated chain)".into(),
            ));
        }
        arc2.push(z);
    }

    // Assemble the raw loop through 0 and q_raw, then carry it to (p, q).
    let mut raw_points = Vec::with_capacity(cfg.n1 + cfg.n2 + 2);
    raw_points.push(C64::new(0.0, 0.0));
    raw_points.extend_from_slice(&arc1);
    raw_points.extend_from_slice(&arc2);
    raw_points.push(C64::new(0.0, 0.0));
    let carry = (q - p) / q_raw;
    let points: Vec<C64> = raw_points.iter().map(|z| p + carry * z).collect();
    Ok(CurveSample {
        points,
        p,
        q,
        kappa: cfg.kappa,
        d: 1.0 + cfg.kappa / 8.0,
        content: None,
        content_stable: false,
        log_weight: 0.0,
    })
}

// ---------------------------------------------------------------------------
// Minkowski content and box counting.

struct SegmentHash {
    cell: f64,
    buckets: std::collections::HashMap<(i64, i64), Vec<usize>>,
    segs: Vec<(C64, C64)>,
}

impl SegmentHash {
    fn new(points: &[C64], reach: f64) -> Self {
        let segs: Vec<(C64, C64)> = points.windows(2).map(|w| (w[0], w[1])).collect();
        let cell = reach.max(1e-12);
        let mut buckets: std::collections::HashMap<(i64, i64), Vec<usize>> =
            std::collections::HashMap::new();
        for (idx, (a, b)) in segs.iter().enumerate() {
            let lo_x = ((a.re.min(b.re) - reach) / cell).floor() as i64;
            let hi_x = ((a.re.max(b.re) + reach) / cell).floor() as i64;
            let lo_y = ((a.im.min(b.im) - reach) / cell).floor() as i64;
            let hi_y = ((a.im.max(b.im) + reach) / cell).floor() as i64;
            for gx in lo_x..=hi_x {
                for gy in lo_y..=hi_y {
                    buckets.entry((gx, gy)).or_default().push(idx);
                }
            }
        }
        SegmentHash { cell, buckets, segs }
    }

    /// Distance from w to the nearest segment within reach, with its index.
    fn nearest(&self, w: C64) -> Option<(f64, usize)> {
        let key = ((w.re / self.cell).floor() as i64, (w.im / self.cell).floor() as i64);
        let mut best: Option<(f64, usize)> = None;
        if let Some(list) = self.buckets.get(&key) {
            for &idx in list {
                let d = seg_distance(self.segs[idx], w);
                if best.map_or(true, |(bd, _)| d < bd) {
                    best = Some((d, idx));
                }
            }
        }
        best
    }
}

fn seg_distance((a, b): (C64, C64), w: C64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (w - a).norm();
    }
    let t = (((w - a) * ab.conj()).re / len2).clamp(0.0, 1.0);
    (w - (a + ab * t)).norm()
}

/// Area of the ε-neighborhood of the polyline, by counting raster cells of
/// side cell whose centers lie within ε, with per-segment attribution.
fn neighborhood_area(points: &[C64], eps: f64, cell: f64) -> (f64, Vec<f64>) {
    let hash = SegmentHash::new(points, eps + cell);
    let (mut lo_x, mut hi_x, mut lo_y, mut hi_y) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for z in points {
        lo_x = lo_x.min(z.re);
        hi_x = hi_x.max(z.re);
        lo_y = lo_y.min(z.im);
        hi_y = hi_y.max(z.im);
    }
    lo_x -= eps + cell;
    hi_x += eps + cell;
    lo_y -= eps + cell;
    hi_y += eps + cell;
    let nx = ((hi_x - lo_x) / cell).ceil() as usize;
    let ny = ((hi_y - lo_y) / cell).ceil() as usize;
    let mut per_seg = vec![0.0; points.len().saturating_sub(1)];
    let mut covered = 0usize;
    for ix in 0..nx {
        let x = lo_x + (ix as f64 + 0.5) * cell;
        for iy in 0..ny {
            let y = lo_y + (iy as f64 + 0.5) * cell;
            if let Some((d, idx)) = hash.nearest(C64::new(x, y)) {
                if d <= eps {
                    covered += 1;
                    per_seg[idx] += cell * cell;
                }
            }
        }
    }
    (covered as f64 * cell * cell, per_seg)
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ContentEstimate {
    /// Richardson-extrapolated value from the two finest levels.
    pub value: f64,
    /// (ε, ε^{d−2}·area) per level, coarsest first.
    pub levels: Vec<(f64, f64)>,
    /// Oscillation across levels within 20%.
    pub stable: bool,
}

/// ε^{d−2}·Area(ε-neighborhood) across the schedule, linearly extrapolated
/// in ε from the two finest levels.
pub fn minkowski_content(points: &[C64], d: f64, schedule: &[f64]) -> Result<ContentEstimate> {
    if schedule.len() < 2 || schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(CoreError::InvalidParameter("content schedule must be decreasing".into()));
    }
    let mut levels = Vec::with_capacity(schedule.len());
    for &eps in schedule {
        let cell = eps / 12.0;
        let (area, _) = neighborhood_area(points, eps, cell);
        levels.push((eps, eps.powf(d - 2.0) * area));
    }
    let n = levels.len();
    let (e1, c1) = levels[n - 2];
    let (e0, c0) = levels[n - 1];
    let value = c0 + (c0 - c1) * e0 / (e1 - e0);
    let worst = levels
        .windows(2)
        .map(|w| (w[1].1 - w[0].1).abs())
        .fold(0.0f64, f64::max);
    let stable = worst <= 0.20 * c0.abs().max(1e-300);
    Ok(ContentEstimate { value, levels, stable })
}

/// Default content schedule relative to the curve diameter.
pub fn content_schedule(diameter: f64) -> Vec<f64> {
    [0.10, 0.07, 0.05, 0.035].iter().map(|f| f * diameter).collect()
}

/// Content measure atoms: neighborhood area attributed to the nearest
/// segment, normalized by ε^{d−2}; atom located at the segment midpoint.
pub fn content_atoms(points: &[C64], d: f64, eps: f64) -> Vec<(C64, f64)> {
    let cell = eps / 12.0;
    let (_, per_seg) = neighborhood_area(points, eps, cell);
    let norm = eps.powf(d - 2.0);
    points
        .windows(2)
        .zip(per_seg)
        .filter(|(_, a)| *a > 0.0)
        .map(|(w, a)| (0.5 * (w[0] + w[1]), norm * a))
        .collect()
}

/// Attach a content estimate to a curve.
pub fn with_content(mut curve: CurveSample, schedule: &[f64]) -> Result<CurveSample> {
    let est = minkowski_content(&curve.points, curve.d, schedule)?;
    curve.content = Some(est.value);
    curve.content_stable = est.stable;
    Ok(curve)
}

/// Loop-measure log-weight of a loop with endpoints p, q:
/// −2·log Cont + (κ/4 − 2)·log|p−q| + (optional window log-area of the
/// endpoint integration domain).
pub fn loop_measure_weight(curve: &CurveSample, pq_window_log_area: f64) -> Result<f64> {
    let content = curve.content.ok_or(CoreError::UnstableContent { osc: f64::NAN })?;
    if !curve.content_stable {
        return Err(CoreError::UnstableContent { osc: f64::NAN });
    }
    let exponent = curve.kappa / 4.0 - 2.0;
    Ok(-2.0 * content.ln() + exponent * (curve.p - curve.q).norm().ln() + pq_window_log_area)
}

/// Box-counting dimension from occupied-box counts at dyadic scales.
pub fn box_counting_dimension(points: &[C64], n_scales: usize) -> f64 {
    let (mut lo_x, mut hi_x, mut lo_y, mut hi_y) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for z in points {
        lo_x = lo_x.min(z.re);
        hi_x = hi_x.max(z.re);
        lo_y = lo_y.min(z.im);
        hi_y = hi_y.max(z.im);
    }
    let diam = (hi_x - lo_x).max(hi_y - lo_y).max(1e-12);
    let mut xs = Vec::with_capacity(n_scales);
    let mut ys = Vec::with_capacity(n_scales);
    for l in 2..2 + n_scales {
        let s = diam / (1 << l) as f64;
        let mut boxes: HashSet<(i64, i64)> = HashSet::new();
        for w in points.windows(2) {
            // Walk each segment at quarter-box resolution so thin diagonal
            // crossings are not missed.
            let steps = ((w[1] - w[0]).norm() / (0.25 * s)).ceil().max(1.0) as usize;
            for m in 0..=steps {
                let z = w[0] + (w[1] - w[0]) * (m as f64 / steps as f64);
                boxes.insert((((z.re - lo_x) / s).floor() as i64, ((z.im - lo_y) / s).floor() as i64));
            }
        }
        xs.push((1.0 / s).ln());
        ys.push((boxes.len() as f64).ln());
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
