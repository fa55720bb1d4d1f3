//! Two-ensemble consistency checks for "sampling a point from a chaos
//! measure equals adding an insertion".
//!
//! Everything is carried out at the lattice's own covariance: the shifted
//! ensemble reweights atoms by the exact lattice moment e^{charge²·Var/2}
//! and shifts the free field by charge·Cov(·, circle average at the atom),
//! which is the exact Gaussian change-of-measure for the regularized
//! exponential weight. The two ensembles then describe the same measure and
//! differ only by Monte Carlo noise, which is what the z-scores test.

use crate::gff::covariance_column;
use crate::grid::{circle_stencil, FieldSample, Geometry, LatticeGrid};
use crate::liouville::{c_exponent, CWindow, Insertion, LiouvilleSampler};
use crate::measures::{weighted_mean, WeightedSample};
use crate::rng::RngStream;
use crate::{C64, CoreError, Result};
use rand::Rng;

/// One candidate point of the chaos measure under test.
struct Anchor {
    /// Plane location (reported to test functions).
    location: C64,
    /// Deterministic base mass (cell area, chart factors, content mass).
    base_mass: f64,
    /// Circle-average functional on lattice sites.
    stencil: Vec<(usize, f64)>,
    /// Cov(h(site), stencil·h) under the normalized lattice field.
    cov_col: Vec<f64>,
    /// Var(stencil·h).
    variance: f64,
    /// stencil · (deterministic profile).
    profile_avg: f64,
}

pub struct TwoEnsembleReport {
    pub names: Vec<String>,
    pub sampling_means: Vec<(f64, f64)>,
    pub insertion_means: Vec<(f64, f64)>,
    pub z_scores: Vec<f64>,
    pub max_abs_z: f64,
    pub n_samples: usize,
}

impl TwoEnsembleReport {
    pub fn passes(&self, z_limit: f64) -> bool {
        self.max_abs_z < z_limit
    }
}

/// Fixed test statistics: smoothed field values at three probes and the
/// two coordinates of the sampled point.
fn test_statistics(field: &FieldSample, u: C64) -> [f64; 5] {
    let probe = |r: f64| {
        let k = 16;
        let mut acc = 0.0;
        for m in 0..k {
            let th = 2.0 * std::f64::consts::PI * (m as f64 + 0.5) / k as f64;
            acc += field.interp_chart(r, th).0;
        }
        acc / k as f64
    };
    [probe(-1.0), probe(0.0), probe(1.0), u.re, u.im]
}

const STAT_NAMES: [&str; 5] = [
    "field circle avg |w|=e^-1",
    "field circle avg |w|=1",
    "field circle avg |w|=e",
    "Re u",
    "Im u",
];

struct CheckSetup {
    anchors: Vec<Anchor>,
    base_profile: Vec<f64>,
    base_log_c: f64,
    base_c_exp: f64,
    charge: f64,
    eps_norm: f64,
}

fn build_anchors(
    grid: &LatticeGrid,
    profile: &[f64],
    points: &[(C64, f64)],
    eps: f64,
    k: usize,
) -> Result<Vec<Anchor>> {
    // Covariance solves run on the cylinder twin of the sphere grid: the
    // stochastic part lives there.
    let cyl = LatticeGrid::new(Geometry::Cylinder, grid.nx, grid.ny, grid.t_extent)?;
    let mut anchors = Vec::with_capacity(points.len());
    for &(w, base_mass) in points {
        if !grid.covers_plane_point(w) {
            return Err(CoreError::InsertionOffGrid(format!("anchor {w}")));
        }
        let chart = C64::new(w.norm().ln(), w.arg());
        let stencil = circle_stencil(grid, chart.re, chart.im, eps / w.norm(), k);
        let cov_col = covariance_column(&cyl, &stencil);
        let variance: f64 = stencil.iter().map(|&(s, wt)| wt * cov_col[s]).sum();
        let profile_avg: f64 = stencil.iter().map(|&(s, wt)| wt * profile[s]).sum();
        anchors.push(Anchor { location: w, base_mass, stencil, cov_col, variance, profile_avg });
    }
    Ok(anchors)
}

fn run_two_ensembles(
    sampler: &LiouvilleSampler,
    setup: &CheckSetup,
    n_samples: usize,
    c_window: CWindow,
    stream: &RngStream,
) -> Result<TwoEnsembleReport> {
    let shifted_c_exp = setup.base_c_exp + setup.charge;

    // Sampling side: field from the base ensemble, weight × total measure
    // mass over the anchors, point from the normalized atom masses.
    let mut sampling: Vec<Vec<WeightedSample<f64>>> = vec![Vec::with_capacity(n_samples); 5];
    for r in 0..n_samples {
        let st = stream.substream(2 * r as u64);
        let field = sampler.sample_with_profile(
            setup.base_profile.clone(),
            setup.base_log_c,
            setup.base_c_exp,
            c_window,
            &st,
        );
        let mut masses = Vec::with_capacity(setup.anchors.len());
        let mut total = 0.0;
        for a in &setup.anchors {
            let avg = field.stencil_apply(&a.stencil);
            let m = a.base_mass * setup.eps_norm * (setup.charge * avg).exp();
            masses.push(m);
            total += m;
        }
        let mut rng = st.substream(7).rng();
        let mut pick = rng.gen::<f64>() * total;
        let mut chosen = setup.anchors.len() - 1;
        for (k, m) in masses.iter().enumerate() {
            pick -= m;
            if pick <= 0.0 {
                chosen = k;
                break;
            }
        }
        let u = setup.anchors[chosen].location;
        let lw = field.log_weight + total.ln();
        for (slot, v) in test_statistics(&field, u).into_iter().enumerate() {
            sampling[slot].push(WeightedSample::new(v, lw));
        }
    }

    // Insertion side: point from the deterministic moment-weighted atoms,
    // field shifted by charge × covariance column.
    let rho: Vec<f64> = setup
        .anchors
        .iter()
        .map(|a| {
            a.base_mass
                * setup.eps_norm
                * (setup.charge * a.profile_avg
                    + 0.5 * setup.charge * setup.charge * a.variance)
                    .exp()
        })
        .collect();
    let rho_total: f64 = rho.iter().sum();
    let mut insertion: Vec<Vec<WeightedSample<f64>>> = vec![Vec::with_capacity(n_samples); 5];
    for r in 0..n_samples {
        let st = stream.substream(2 * r as u64 + 1);
        let mut rng = st.substream(7).rng();
        let mut pick = rng.gen::<f64>() * rho_total;
        let mut chosen = setup.anchors.len() - 1;
        for (k, m) in rho.iter().enumerate() {
            pick -= m;
            if pick <= 0.0 {
                chosen = k;
                break;
            }
        }
        let anchor = &setup.anchors[chosen];
        let mut field = sampler.sample_with_profile(
            setup.base_profile.clone(),
            setup.base_log_c,
            shifted_c_exp,
            c_window,
            &st,
        );
        for (s, col) in anchor.cov_col.iter().enumerate() {
            field.lateral[s] += setup.charge * col;
        }
        let lw = field.log_weight + rho_total.ln();
        for (slot, v) in test_statistics(&field, anchor.location).into_iter().enumerate() {
            insertion[slot].push(WeightedSample::new(v, lw));
        }
    }

    let mut report = TwoEnsembleReport {
        names: STAT_NAMES.iter().map(|s| s.to_string()).collect(),
        sampling_means: Vec::with_capacity(5),
        insertion_means: Vec::with_capacity(5),
        z_scores: Vec::with_capacity(5),
        max_abs_z: 0.0,
        n_samples,
    };
    for slot in 0..5 {
        let (ms, ses) = weighted_mean(&sampling[slot], |v| *v)?;
        let (mi, sei) = weighted_mean(&insertion[slot], |v| *v)?;
        let z = (ms - mi) / (ses * ses + sei * sei).sqrt().max(1e-300);
        report.sampling_means.push((ms, ses));
        report.insertion_means.push((mi, sei));
        report.z_scores.push(z);
        report.max_abs_z = report.max_abs_z.max(z.abs());
    }
    Ok(report)
}

/// Bulk case: the candidate set is every grid cell whose plane position
/// lies in the region; base masses are plane cell areas (chart factor
/// e^{γQx}, charge γ, normalization ε^{γ²/2}).
pub fn insertion_equals_sampling_bulk(
    sampler: &LiouvilleSampler,
    base_insertions: &[Insertion],
    region: impl Fn(C64) -> bool,
    n_samples: usize,
    c_window: CWindow,
    stream: &RngStream,
) -> Result<TwoEnsembleReport> {
    let params = *sampler.params();
    let grid = sampler.grid().clone();
    let profile = sampler.profile(base_insertions)?;
    let gamma = params.gamma;
    let mut points = Vec::new();
    for i in 0..grid.nx {
        for j in 0..grid.ny {
            let w = grid.site(i, j);
            if region(w) {
                let ok = base_insertions.iter().all(|ins| (ins.z - w).norm() > 5.0 * grid.dx());
                if !ok {
                    return Err(CoreError::InvalidParameter(
                        "region must stay away from the base insertions".into(),
                    ));
                }
                let base = grid.dx() * grid.dy() * (gamma * params.q() * grid.x(i)).exp();
                points.push((w, base));
            }
        }
    }
    if points.len() < 2 {
        return Err(CoreError::InvalidParameter("region covers fewer than 2 cells".into()));
    }
    let eps = 2.0 * grid.dx().max(grid.dy());
    let anchors = build_anchors(&grid, &profile, &points, eps, crate::gmc::CIRCLE_SAMPLES)?;
    let setup = CheckSetup {
        anchors,
        base_log_c: crate::liouville::insertion_constant(&params, base_insertions)?,
        base_c_exp: c_exponent(&params, base_insertions),
        base_profile: profile,
        charge: gamma,
        eps_norm: eps.powf(gamma * gamma / 2.0),
    };
    run_two_ensembles(sampler, &setup, n_samples, c_window, stream)
}

/// Curve case: candidates are fixed content atoms, charge γ/2,
/// normalization ε^{γ²/8}.
pub fn insertion_equals_sampling_curve(
    sampler: &LiouvilleSampler,
    base_insertions: &[Insertion],
    content_atoms: &[(C64, f64)],
    n_samples: usize,
    c_window: CWindow,
    stream: &RngStream,
) -> Result<TwoEnsembleReport> {
    let params = *sampler.params();
    let grid = sampler.grid().clone();
    let profile = sampler.profile(base_insertions)?;
    let gamma = params.gamma;
    if content_atoms.len() < 2 {
        return Err(CoreError::InvalidParameter("need at least 2 content atoms".into()));
    }
    let eps = 2.0 * grid.dx().max(grid.dy());
    let anchors = build_anchors(&grid, &profile, content_atoms, eps, crate::gmc::CIRCLE_SAMPLES)?;
    let setup = CheckSetup {
        anchors,
        base_log_c: crate::liouville::insertion_constant(&params, base_insertions)?,
        base_c_exp: c_exponent(&params, base_insertions),
        base_profile: profile,
        charge: gamma / 2.0,
        eps_norm: eps.powf(gamma * gamma / 8.0),
    };
    run_two_ensembles(sampler, &setup, n_samples, c_window, stream)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::LqgParams;

    #[test]
    fn bulk_check_agrees_at_moderate_n() {
        let params = LqgParams::new(1.0).unwrap();
        let grid = LatticeGrid::new(Geometry::SpherePlane, 32, 16, 2.0).unwrap();
        let sampler = LiouvilleSampler::new(params, &grid).unwrap();
        let base = [Insertion { alpha: params.gamma, z: C64::new(1.0, 0.0) }];
        let region = |w: C64| (w - C64::new(-1.0, 0.0)).norm() < 0.4;
        let rep = insertion_equals_sampling_bulk(
            &sampler,
            &base,
            region,
            1500,
            CWindow::new(-0.5, 0.5).unwrap(),
            &RngStream::new(90, 0),
        )
        .unwrap();
        assert!(rep.max_abs_z < 4.0, "z-scores {:?}", rep.z_scores);
    }

    #[test]
    fn curve_check_agrees_at_moderate_n() {
        let params = LqgParams::new(1.0).unwrap();
        let grid = LatticeGrid::new(Geometry::SpherePlane, 32, 16, 2.0).unwrap();
        let sampler = LiouvilleSampler::new(params, &grid).unwrap();
        // A fixed polygonal loop of radius ~1 with synthetic content masses.
        let atoms: Vec<(C64, f64)> = (0..24)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / 24.0;
                (C64::from_polar(1.0 + 0.1 * (3.0 * th).sin(), th), 1.0 + 0.2 * (k % 4) as f64)
            })
            .collect();
        let rep = insertion_equals_sampling_curve(
            &sampler,
            &[],
            &atoms,
            1500,
            CWindow::new(-0.5, 0.5).unwrap(),
            &RngStream::new(91, 0),
        )
        .unwrap();
        assert!(rep.max_abs_z < 4.0, "z-scores {:?}", rep.z_scores);
    }

    #[test]
    fn degenerate_field_reduces_to_same_profile() {
        // With the lateral/radial parts suppressed both ensembles are the
        // same deterministic profile ensemble: identical atom laws.
        let params = LqgParams::new(1.2).unwrap();
        let grid = LatticeGrid::new(Geometry::SpherePlane, 16, 8, 2.0).unwrap();
        let sampler = LiouvilleSampler::new(params, &grid).unwrap();
        let profile = sampler.profile(&[]).unwrap();
        let points = vec![
            (grid.site(3, 2), 1.0),
            (grid.site(4, 5), 2.0),
            (grid.site(11, 1), 0.5),
        ];
        let eps = 2.0 * grid.dx().max(grid.dy());
        let anchors = build_anchors(&grid, &profile, &points, eps, 12).unwrap();
        // Zero covariance ⇒ the sampling-side masses with h ≡ 0 equal the
        // insertion-side ρ with Var = 0.
        for a in &anchors {
            let mass_h0 = a.base_mass * (params.gamma * a.profile_avg).exp();
            let rho_var0 = a.base_mass * (params.gamma * a.profile_avg).exp();
            assert!((mass_h0 - rho_var0).abs() < 1e-12);
            assert!(a.variance > 0.0);
        }
    }
}
