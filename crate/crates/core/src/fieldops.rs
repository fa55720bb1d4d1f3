//! Coordinate changes of fields: the cylinder ↔ plane chart conversion and
//! the Möbius pushforward f •_γ φ = φ∘f⁻¹ + Q log|(f⁻¹)′|, plus the uniform
//! embedding that composes a group-measure Möbius draw with a surface draw.

use crate::grid::{FieldSample, Geometry, LatticeGrid};
use crate::liouville::CWindow;
use crate::mobius::{HaarTriple, MobiusMap};
use crate::params::LqgParams;
use crate::{CoreError, Result};

/// View a cylinder-chart field as a plane-chart field on the matching
/// sphere grid: ψ(e^z) = φ(z) − Q·Re z.
pub fn plane_view(params: &LqgParams, field: &FieldSample) -> Result<FieldSample> {
    if field.grid.geometry != Geometry::Cylinder {
        return Err(CoreError::InvalidParameter("plane view needs a cylinder field".into()));
    }
    let grid = LatticeGrid::new(
        Geometry::SpherePlane,
        field.grid.nx,
        field.grid.ny,
        field.grid.t_extent,
    )?;
    let mut profile = vec![0.0; grid.len()];
    for i in 0..grid.nx {
        let corr = -params.q() * grid.x(i);
        for j in 0..grid.ny {
            let base =
                if field.profile.is_empty() { 0.0 } else { field.profile[grid.idx(i, j)] };
            profile[grid.idx(i, j)] = base + corr;
        }
    }
    Ok(FieldSample {
        grid,
        lateral: field.lateral.clone(),
        radial: field.radial.clone(),
        profile,
        c: field.c,
        log_weight: field.log_weight,
    })
}

/// Result of a pushforward: the new field and how many target sites needed
/// extrapolation beyond the source truncation.
pub struct Pushforward {
    pub field: FieldSample,
    pub extrapolated: usize,
}

/// f •_γ φ on the target grid, by bilinear interpolation of φ at f⁻¹(w)
/// plus the exact derivative correction. Fails if more than 1% of target
/// sites fall outside the source annulus.
pub fn pushforward_field(
    params: &LqgParams,
    map: &MobiusMap,
    src: &FieldSample,
    target: &LatticeGrid,
) -> Result<Pushforward> {
    if src.grid.geometry != Geometry::SpherePlane || target.geometry != Geometry::SpherePlane {
        return Err(CoreError::InvalidParameter("pushforward needs sphere-chart fields".into()));
    }
    let inv = map.inverse();
    let q = params.q();
    let mut values = vec![0.0; target.len()];
    let mut extrapolated = 0usize;
    for i in 0..target.nx {
        for j in 0..target.ny {
            let w = target.site(i, j);
            let u = inv.apply(w);
            let (v, ex) = src.interp_plane(u);
            if ex {
                extrapolated += 1;
            }
            values[target.idx(i, j)] = v + q * inv.derivative(w).norm().ln();
        }
    }
    let frac = extrapolated as f64 / target.len() as f64;
    if frac > 0.01 {
        return Err(CoreError::TooMuchExtrapolation { frac });
    }
    let mut field = FieldSample::zero(target.clone());
    field.lateral = values;
    field.log_weight = src.log_weight;
    Ok(Pushforward { field, extrapolated })
}

/// Average of the total field over the plane unit circle. For every sphere
/// ensemble here this equals the additive constant c exactly in the mean,
/// since both log|·|₊ and G(·,u) average to zero on |w| = 1.
pub fn unit_circle_average(field: &FieldSample, k: usize) -> f64 {
    debug_assert_eq!(field.grid.geometry, Geometry::SpherePlane);
    let mut acc = 0.0;
    for m in 0..k {
        let th = 2.0 * std::f64::consts::PI * (m as f64 + 0.5) / k as f64;
        acc += field.interp_chart(0.0, th).0;
    }
    acc / k as f64
}

/// Uniform embedding: push a plane-chart field through the Möbius map of a
/// group-measure triple draw. Weights add (group density + field weight).
pub fn uniform_embed(
    params: &LqgParams,
    triple: &HaarTriple,
    field: &FieldSample,
    target: &LatticeGrid,
) -> Result<Pushforward> {
    let map = triple.map()?;
    let mut pf = pushforward_field(params, &map, field, target)?;
    pf.field.log_weight = field.log_weight + triple.log_weight;
    Ok(pf)
}

/// Windowed comparison helper: restrict an embedded sample to a c-window on
/// the unit-circle average; returns None if the restriction fails.
pub fn restrict_to_c_window(field: FieldSample, window: CWindow, k: usize) -> Option<FieldSample> {
    if window.contains(unit_circle_average(&field, k)) {
        Some(field)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;
    use crate::gff::GffSampler;
    use crate::grid::FieldSample;
    use crate::mobius::mobius_from_triple;
    use crate::rng::RngStream;

    fn sphere_field_with_noise(nx: usize, ny: usize, t: f64, seed: u64) -> FieldSample {
        let cyl = LatticeGrid::new(Geometry::Cylinder, nx, ny, t).unwrap();
        let s = GffSampler::new(&cyl).unwrap();
        let h = s.sample(&RngStream::new(seed, 0));
        let p = LqgParams::new(1.0).unwrap();
        plane_view(&p, &h).unwrap()
    }

    #[test]
    fn identity_pushforward_is_exact_on_matching_grids() {
        let p = LqgParams::new(1.0).unwrap();
        let f = sphere_field_with_noise(16, 8, 2.0, 3);
        let pf = pushforward_field(&p, &MobiusMap::identity(), &f, &f.grid).unwrap();
        assert_eq!(pf.extrapolated, 0);
        for i in 0..f.grid.nx {
            for j in 0..f.grid.ny {
                assert!((pf.field.total(i, j) - f.total(i, j)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn doubling_map_adds_constant_correction() {
        // f(z) = 2z: f⁻¹ has |(f⁻¹)'| = 1/2 everywhere, so the correction is
        // −Q log 2; the stochastic part shifts by one chart unit in x.
        let p = LqgParams::new(1.3).unwrap();
        let f = sphere_field_with_noise(32, 8, 3.0, 5);
        let map = MobiusMap::scaling(C64::new(2.0, 0.0)).unwrap();
        // Retract the target annulus so f⁻¹ stays inside the source grid.
        let target = LatticeGrid::new(Geometry::SpherePlane, 32, 8, 2.0).unwrap();
        let pf = pushforward_field(&p, &map, &f, &target).unwrap();
        assert_eq!(pf.extrapolated, 0);
        let shift = 2.0_f64.ln();
        for i in 0..target.nx {
            for j in 0..target.ny {
                let w = target.site(i, j);
                let (src_val, ex) = f.interp_plane(w / 2.0);
                if ex {
                    continue;
                }
                let want = src_val - p.q() * shift;
                assert!(
                    (pf.field.total(i, j) - want).abs() < 1e-9,
                    "site {i},{j}"
                );
            }
        }
    }

    #[test]
    fn composition_cocycle() {
        // (f∘g) • φ = f • (g • φ) within interpolation tolerance on the
        // interior. A smooth synthetic field isolates the cocycle plumbing;
        // rough draws would swamp the comparison with interpolation error.
        let p = LqgParams::new(1.0).unwrap();
        let src_grid = LatticeGrid::new(Geometry::SpherePlane, 128, 64, 3.0).unwrap();
        let mut f_field = FieldSample::zero(src_grid.clone());
        for i in 0..src_grid.nx {
            for j in 0..src_grid.ny {
                let (x, y) = (src_grid.x(i), src_grid.y(j));
                f_field.lateral[src_grid.idx(i, j)] = 0.3 * x.sin() * y.cos();
            }
        }
        let c = C64::new(1.05, 0.02);
        let g_map = MobiusMap::scaling(c).unwrap();
        let f_map = mobius_from_triple(
            C64::new(0.02, 0.03),
            C64::new(1.01, 0.0),
            C64::new(-0.99, -0.02),
        )
        .unwrap();
        let target = LatticeGrid::new(Geometry::SpherePlane, 128, 64, 2.0).unwrap();
        let once = pushforward_field(&p, &f_map.compose(&g_map), &f_field, &target).unwrap();
        let mid = LatticeGrid::new(Geometry::SpherePlane, 128, 64, 2.5).unwrap();
        let step1 = pushforward_field(&p, &g_map, &f_field, &mid).unwrap();
        let step2 = pushforward_field(&p, &f_map, &step1.field, &target).unwrap();
        let mut worst = 0.0f64;
        for i in 16..target.nx - 16 {
            for j in 0..target.ny {
                let d = (once.field.total(i, j) - step2.field.total(i, j)).abs();
                worst = worst.max(d);
            }
        }
        assert!(worst < 1e-3, "sup interior difference {worst}");
    }

    #[test]
    fn plane_view_matches_chart_rule() {
        let p = LqgParams::new(1.0).unwrap();
        let cyl = LatticeGrid::new(Geometry::Cylinder, 16, 8, 2.0).unwrap();
        let s = GffSampler::new(&cyl).unwrap();
        let h = s.sample(&RngStream::new(9, 9));
        let pv = plane_view(&p, &h).unwrap();
        for i in 0..cyl.nx {
            for j in 0..cyl.ny {
                let want = h.total(i, j) - p.q() * cyl.x(i);
                assert!((pv.total(i, j) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn embed_weight_is_additive() {
        let p = LqgParams::new(1.0).unwrap();
        let mut f = sphere_field_with_noise(16, 8, 2.0, 4);
        f.log_weight = -1.25;
        let triple = HaarTriple {
            p: C64::new(0.0, 0.0),
            q: C64::new(1.0, 0.0),
            r: C64::new(-1.0, 0.0),
            log_weight: 0.75,
        };
        let out = uniform_embed(&p, &triple, &f, &f.grid).unwrap();
        assert!((out.field.log_weight - (-1.25 + 0.75)).abs() < 1e-15);
        // Identity triple: field unchanged.
        for i in 0..f.grid.nx {
            for j in 0..f.grid.ny {
                assert!((out.field.total(i, j) - f.total(i, j)).abs() < 1e-10);
            }
        }
    }
}
