//! Liouville fields on the sphere: the whole-plane Green function, insertion
//! constants, and the field sampler (free field under the exponential chart,
//! log singularities, and the additive constant drawn on a window with
//! explicit weight).

use crate::gff::GffSampler;
use crate::grid::{FieldSample, Geometry, LatticeGrid};
use crate::params::LqgParams;
use crate::rng::RngStream;
use crate::{C64, CoreError, Result};
use rand::Rng;

/// log|z|₊ = log max(|z|, 1).
pub fn log_plus(z: C64) -> f64 {
    z.norm().max(1.0).ln()
}

/// Whole-plane Green function G(z,w) = −log|z−w| + log|z|₊ + log|w|₊.
pub fn green_sphere(z: C64, w: C64) -> Result<f64> {
    if z == w {
        return Err(CoreError::DiagonalSingularity);
    }
    Ok(-(z - w).norm().ln() + log_plus(z) + log_plus(w))
}

/// A log singularity of strength alpha at the plane point z.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Insertion {
    pub alpha: f64,
    pub z: C64,
}

/// log of ∏ᵢ |zᵢ|₊^{−αᵢ(2Q−αᵢ)} · exp(Σ_{j>i} αᵢαⱼ G(zᵢ,zⱼ)).
pub fn insertion_constant(params: &LqgParams, insertions: &[Insertion]) -> Result<f64> {
    let q = params.q();
    let mut log_c = 0.0;
    for (i, ins) in insertions.iter().enumerate() {
        log_c -= ins.alpha * (2.0 * q - ins.alpha) * log_plus(ins.z);
        for other in &insertions[i + 1..] {
            if other.z == ins.z {
                return Err(CoreError::CoincidentPoints);
            }
            log_c += ins.alpha * other.alpha * green_sphere(ins.z, other.z)?;
        }
    }
    Ok(log_c)
}

/// Interval for the additive constant; [c, c] pins it.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CWindow {
    pub lo: f64,
    pub hi: f64,
}

impl CWindow {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || hi < lo {
            return Err(CoreError::EmptyWindow);
        }
        Ok(CWindow { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Uniform draw plus the log correction for using the uniform proposal
    /// as the dc integrator (zero for a pinned window).
    pub fn draw<R: Rng>(&self, rng: &mut R) -> (f64, f64) {
        if self.width() == 0.0 {
            (self.lo, 0.0)
        } else {
            (self.lo + rng.gen::<f64>() * self.width(), self.width().ln())
        }
    }

    pub fn contains(&self, c: f64) -> bool {
        c >= self.lo && c <= self.hi
    }
}

/// Σαᵢ − 2Q, the exponent of the c-density of the field with insertions.
pub fn c_exponent(params: &LqgParams, insertions: &[Insertion]) -> f64 {
    insertions.iter().map(|i| i.alpha).sum::<f64>() - 2.0 * params.q()
}

/// Deterministic profile of the field with insertions at the plane point w:
/// −2Q log|w|₊ + Σ αᵢ G(w, zᵢ). Log singularities are floored at half a
/// local lattice spacing to keep site values finite.
pub fn singular_profile(params: &LqgParams, insertions: &[Insertion], w: C64, floor: f64) -> f64 {
    let mut v = -2.0 * params.q() * log_plus(w);
    for ins in insertions {
        let d = (w - ins.z).norm().max(floor * w.norm().max(1e-12));
        v += ins.alpha * (-d.ln() + log_plus(w) + log_plus(ins.z));
    }
    v
}

/// Check that every insertion is coverable by the grid's annulus image and
/// that insertions are pairwise separated by ≥ 3 lattice spacings in the
/// chart metric. The chart end z = 0 is always coverable (its profile is
/// regular away from 0).
fn check_insertions(grid: &LatticeGrid, insertions: &[Insertion]) -> Result<()> {
    let spacing = grid.dx().max(grid.dy());
    for (i, ins) in insertions.iter().enumerate() {
        if ins.z != C64::new(0.0, 0.0) && !grid.covers_plane_point(ins.z) {
            return Err(CoreError::InsertionOffGrid(format!("{}", ins.z)));
        }
        for other in &insertions[i + 1..] {
            if ins.z == other.z {
                return Err(CoreError::CoincidentPoints);
            }
            if ins.z == C64::new(0.0, 0.0) || other.z == C64::new(0.0, 0.0) {
                continue;
            }
            let a = C64::new(ins.z.norm().ln(), ins.z.arg());
            let b = C64::new(other.z.norm().ln(), other.z.arg());
            let mut dy = (a.im - b.im).abs();
            let per = 2.0 * std::f64::consts::PI;
            if dy > per / 2.0 {
                dy = per - dy;
            }
            let dist = ((a.re - b.re).powi(2) + dy * dy).sqrt();
            if dist < 3.0 * spacing {
                return Err(CoreError::InsertionOffGrid(format!(
                    "insertions {} and {} closer than 3 lattice spacings",
                    ins.z, other.z
                )));
            }
        }
    }
    Ok(())
}

/// Field sampler for the sphere chart. Holds the free-field eigenbasis for
/// the underlying cylinder so repeated draws are cheap.
pub struct LiouvilleSampler {
    params: LqgParams,
    grid: LatticeGrid,
    gff: GffSampler,
}

impl LiouvilleSampler {
    pub fn new(params: LqgParams, grid: &LatticeGrid) -> Result<Self> {
        if grid.geometry != Geometry::SpherePlane {
            return Err(CoreError::InvalidParameter(
                "Liouville sampler needs a sphere-plane grid".into(),
            ));
        }
        let cyl = LatticeGrid::new(Geometry::Cylinder, grid.nx, grid.ny, grid.t_extent)?;
        Ok(LiouvilleSampler { params, grid: grid.clone(), gff: GffSampler::new(&cyl)? })
    }

    pub fn grid(&self) -> &LatticeGrid {
        &self.grid
    }

    pub fn params(&self) -> &LqgParams {
        &self.params
    }

    /// Deterministic profile table for a set of insertions.
    pub fn profile(&self, insertions: &[Insertion]) -> Result<Vec<f64>> {
        check_insertions(&self.grid, insertions)?;
        let floor = 0.5 * self.grid.dx().max(self.grid.dy());
        let mut out = vec![0.0; self.grid.len()];
        for i in 0..self.grid.nx {
            for j in 0..self.grid.ny {
                let w = self.grid.site(i, j);
                out[self.grid.idx(i, j)] = singular_profile(&self.params, insertions, w, floor);
            }
        }
        Ok(out)
    }

    /// One field draw: free field under the chart, plus profile, plus c
    /// drawn uniformly on the window, with log-weight
    /// log C + (Σα − 2Q)c + log|window|.
    pub fn sample(
        &self,
        insertions: &[Insertion],
        c_window: CWindow,
        stream: &RngStream,
    ) -> Result<FieldSample> {
        let profile = self.profile(insertions)?;
        let log_c = insertion_constant(&self.params, insertions)?;
        let c_exp = c_exponent(&self.params, insertions);
        Ok(self.sample_with_profile(profile, log_c, c_exp, c_window, stream))
    }

    /// Like [`Self::sample`] with a precomputed profile (hot loops).
    pub fn sample_with_profile(
        &self,
        profile: Vec<f64>,
        log_c: f64,
        c_exp: f64,
        c_window: CWindow,
        stream: &RngStream,
    ) -> FieldSample {
        let h = self.gff.sample(&stream.substream(0));
        let (c, log_len) = c_window.draw(&mut stream.substream(1).rng());
        FieldSample {
            grid: self.grid.clone(),
            lateral: h.lateral,
            radial: h.radial,
            profile,
            c,
            log_weight: log_c + c_exp * c + log_len,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn green_values() {
        assert_eq!(green_sphere(c(0.0, 0.0), c(2.0, 0.0)).unwrap(), 0.0);
        assert!((green_sphere(c(0.0, 0.0), c(0.5, 0.0)).unwrap() - 2.0_f64.ln()).abs() < 1e-15);
        assert!(matches!(
            green_sphere(c(1.0, 1.0), c(1.0, 1.0)),
            Err(CoreError::DiagonalSingularity)
        ));
        let mut rng = RngStream::new(3, 1).rng();
        for _ in 0..100 {
            let z = c(rng.gen::<f64>() * 4.0 - 2.0, rng.gen::<f64>() * 4.0 - 2.0);
            let w = c(rng.gen::<f64>() * 4.0 - 2.0, rng.gen::<f64>() * 4.0 - 2.0);
            if z == w {
                continue;
            }
            let a = green_sphere(z, w).unwrap();
            let b = green_sphere(w, z).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn green_unit_circle_average_vanishes() {
        // The unit-circle average of G(·, u) is 0 for every u, which is what
        // makes the c coordinate of every sphere ensemble intrinsic.
        for u in [c(0.0, 0.0), c(0.3, 0.1), c(2.0, -1.0), c(0.0, 5.0)] {
            let k = 4096;
            let mut s = 0.0;
            for m in 0..k {
                let th = 2.0 * std::f64::consts::PI * (m as f64 + 0.5) / k as f64;
                s += green_sphere(C64::from_polar(1.0, th), u).unwrap();
            }
            assert!((s / k as f64).abs() < 1e-6, "avg G(., {u}) = {}", s / k as f64);
        }
    }

    #[test]
    fn insertion_constants() {
        let p = LqgParams::new(1.0).unwrap();
        // Single insertion at the origin: |0|₊ = 1, constant 1.
        let lc = insertion_constant(&p, &[Insertion { alpha: 0.7, z: c(0.0, 0.0) }]).unwrap();
        assert_eq!(lc, 0.0);
        // Single insertion (γ=1, z=2), Q = 2.5: 2^{−1·(5−1)} = 1/16.
        let lc = insertion_constant(&p, &[Insertion { alpha: 1.0, z: c(2.0, 0.0) }]).unwrap();
        assert!((lc - (1.0f64 / 16.0).ln()).abs() < 1e-12);
        // Two insertions at 0 and 1: G(0,1) = 0 so the constant is 1.
        let lc = insertion_constant(
            &p,
            &[
                Insertion { alpha: 0.4, z: c(0.0, 0.0) },
                Insertion { alpha: 0.4, z: c(1.0, 0.0) },
            ],
        )
        .unwrap();
        assert!(lc.abs() < 1e-12);
        assert!(insertion_constant(
            &p,
            &[
                Insertion { alpha: 0.4, z: c(1.0, 0.0) },
                Insertion { alpha: 0.4, z: c(1.0, 0.0) },
            ],
        )
        .is_err());
    }

    #[test]
    fn no_insertion_field_shape() {
        let p = LqgParams::new(1.3).unwrap();
        let grid = LatticeGrid::new(Geometry::SpherePlane, 16, 8, 2.0).unwrap();
        let s = LiouvilleSampler::new(p, &grid).unwrap();
        let f = s.sample(&[], CWindow::new(0.0, 0.0).unwrap(), &RngStream::new(1, 0)).unwrap();
        // Profile is −2Q max(x, 0); weight is the same for every draw.
        for i in 0..grid.nx {
            for j in 0..grid.ny {
                let want = -2.0 * p.q() * grid.x(i).max(0.0);
                assert!((f.profile[grid.idx(i, j)] - want).abs() < 1e-12);
            }
        }
        let f2 = s.sample(&[], CWindow::new(0.0, 0.0).unwrap(), &RngStream::new(1, 5)).unwrap();
        assert_eq!(f.log_weight, f2.log_weight);
        assert_eq!(f.c, 0.0);
    }

    #[test]
    fn pinned_constant_shifts_field() {
        let p = LqgParams::new(1.0).unwrap();
        let grid = LatticeGrid::new(Geometry::SpherePlane, 16, 8, 2.0).unwrap();
        let s = LiouvilleSampler::new(p, &grid).unwrap();
        let st = RngStream::new(2, 2);
        let f0 = s.sample(&[], CWindow::new(0.0, 0.0).unwrap(), &st).unwrap();
        let f1 = s.sample(&[], CWindow::new(0.75, 0.75).unwrap(), &st).unwrap();
        for i in 0..grid.nx {
            for j in 0..grid.ny {
                assert!((f1.total(i, j) - f0.total(i, j) - 0.75).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn insertion_shifts_circle_average_by_green_profile() {
        // One (γ, 0) insertion against none, both with pinned c: the means
        // of the field averaged on |w| = r differ by γ·G(r, 0) = −γ log r
        // (r < 1). Shared streams make this a direct check of the shift.
        let p = LqgParams::new(1.0).unwrap();
        let grid = LatticeGrid::new(Geometry::SpherePlane, 24, 12, 2.0).unwrap();
        let s = LiouvilleSampler::new(p, &grid).unwrap();
        let ins = [Insertion { alpha: p.gamma, z: c(0.0, 0.0) }];
        let w0 = CWindow::new(0.0, 0.0).unwrap();
        let r: f64 = (-1.0f64).exp();
        let n = 400;
        let mut d_acc = 0.0;
        let mut d2_acc = 0.0;
        for k in 0..n {
            let st = RngStream::new(77, k);
            let f_ins = s.sample(&ins, w0, &st).unwrap();
            let f_no = s.sample(&[], w0, &st).unwrap();
            let avg = |f: &FieldSample| {
                let kk = 64;
                let mut acc = 0.0;
                for m in 0..kk {
                    let th = 2.0 * std::f64::consts::PI * m as f64 / kk as f64;
                    acc += f.interp_plane(C64::from_polar(r, th)).0;
                }
                acc / kk as f64
            };
            let d = avg(&f_ins) - avg(&f_no);
            d_acc += d;
            d2_acc += d * d;
        }
        let mean = d_acc / n as f64;
        let var = (d2_acc / n as f64 - mean * mean).max(0.0);
        let se = (var / n as f64).sqrt();
        let want = -p.gamma * r.ln();
        assert!(
            (mean - want).abs() < 3.0 * se + 0.02 * want.abs(),
            "shift {mean} vs {want} (se {se})"
        );
    }

    #[test]
    fn off_grid_and_too_close_insertions() {
        let p = LqgParams::new(1.0).unwrap();
        let grid = LatticeGrid::new(Geometry::SpherePlane, 16, 8, 1.5).unwrap();
        let s = LiouvilleSampler::new(p, &grid).unwrap();
        let w = CWindow::new(0.0, 1.0).unwrap();
        // |z| = e^2 > e^T: outside the annulus.
        let far = [Insertion { alpha: 1.0, z: c(7.389, 0.0) }];
        assert!(s.sample(&far, w, &RngStream::new(0, 0)).is_err());
        let close = [
            Insertion { alpha: 1.0, z: c(1.0, 0.0) },
            Insertion { alpha: 0.5, z: c(1.001, 0.0) },
        ];
        assert!(s.sample(&close, w, &RngStream::new(0, 0)).is_err());
        assert!(CWindow::new(1.0, 0.0).is_err());
    }
}
