//! Discrete free field on strip and cylinder grids.
//!
//! The Gaussian measure is exp(−(1/4π)·E(h)) where E is the lattice
//! Dirichlet energy with per-direction conductances dy/dx and dx/dy (so E
//! approximates ∫|∇h|² on anisotropic cells), and the additive constant is
//! fixed by zero average over the center column (the lattice stand-in for
//! the unit measure on {0}×lateral). Covariance is therefore
//! A (2π L⁺) Aᵀ with L the weighted graph Laplacian and A the
//! center-column averaging projector.
//!
//! Sampling goes through the explicit eigenbasis (cosine modes in x, free
//! or periodic modes in y). The independent check path used by tests and
//! the verification suite solves the same Laplacian by conjugate gradients.

use crate::grid::{FieldSample, Geometry, LatticeGrid};
use crate::rng::{standard_normal, RngStream};
use crate::Result;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Precomputed eigenbasis for one grid shape.
pub struct GffSampler {
    grid: LatticeGrid,
    /// vx[j][i]: x-mode j at column i (orthonormal), eigenvalue lx[j].
    vx: Vec<Vec<f64>>,
    lx: Vec<f64>,
    /// vy[k][j]: y-mode k at row j (orthonormal), eigenvalue ly[k];
    /// mode k = 0 is the constant.
    vy: Vec<Vec<f64>>,
    ly: Vec<f64>,
    wx: f64,
    wy: f64,
}

fn neumann_modes(n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut vecs = Vec::with_capacity(n);
    let mut vals = Vec::with_capacity(n);
    for j in 0..n {
        let norm = if j == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
        let v: Vec<f64> = (0..n)
            .map(|i| norm * (std::f64::consts::PI * j as f64 * (i as f64 + 0.5) / n as f64).cos())
            .collect();
        vecs.push(v);
        vals.push(2.0 - 2.0 * (std::f64::consts::PI * j as f64 / n as f64).cos());
    }
    (vecs, vals)
}

fn periodic_modes(n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut vecs = Vec::new();
    let mut vals = Vec::new();
    let lam = |f: usize| 2.0 - 2.0 * (TWO_PI * f as f64 / n as f64).cos();
    vecs.push(vec![(1.0 / n as f64).sqrt(); n]);
    vals.push(0.0);
    let half = n / 2;
    for f in 1..half + (n % 2) {
        let c: Vec<f64> =
            (0..n).map(|j| (2.0 / n as f64).sqrt() * (TWO_PI * f as f64 * j as f64 / n as f64).cos()).collect();
        let s: Vec<f64> =
            (0..n).map(|j| (2.0 / n as f64).sqrt() * (TWO_PI * f as f64 * j as f64 / n as f64).sin()).collect();
        vecs.push(c);
        vals.push(lam(f));
        vecs.push(s);
        vals.push(lam(f));
    }
    if n % 2 == 0 {
        let v: Vec<f64> =
            (0..n).map(|j| (1.0 / n as f64).sqrt() * if j % 2 == 0 { 1.0 } else { -1.0 }).collect();
        vecs.push(v);
        vals.push(lam(half));
    }
    (vecs, vals)
}

impl GffSampler {
    pub fn new(grid: &LatticeGrid) -> Result<Self> {
        let (vx, lx) = neumann_modes(grid.nx);
        let (vy, ly) = match grid.geometry {
            Geometry::Strip => neumann_modes(grid.ny),
            _ => periodic_modes(grid.ny),
        };
        Ok(GffSampler {
            grid: grid.clone(),
            vx,
            lx,
            vy,
            ly,
            wx: grid.dy() / grid.dx(),
            wy: grid.dx() / grid.dy(),
        })
    }

    pub fn grid(&self) -> &LatticeGrid {
        &self.grid
    }

    /// Raw normalized field values h (center-column average zero), row-major.
    pub fn sample_values(&self, stream: &RngStream) -> Vec<f64> {
        let mut rng = stream.rng();
        let nx = self.grid.nx;
        let ny = self.grid.ny;
        // Coefficients per (x-mode, y-mode), zero mode excluded.
        let mut coef = vec![0.0; nx * self.vy.len()];
        for jx in 0..nx {
            for ky in 0..self.vy.len() {
                if jx == 0 && ky == 0 {
                    continue;
                }
                let lam = self.wx * self.lx[jx] + self.wy * self.ly[ky];
                coef[jx * self.vy.len() + ky] = standard_normal(&mut rng) * (TWO_PI / lam).sqrt();
            }
        }
        // Contract y-modes, then x-modes.
        let nmy = self.vy.len();
        let mut tmp = vec![0.0; nx * ny];
        for jx in 0..nx {
            for ky in 0..nmy {
                let c = coef[jx * nmy + ky];
                if c == 0.0 {
                    continue;
                }
                let row = &self.vy[ky];
                let t = &mut tmp[jx * ny..(jx + 1) * ny];
                for j in 0..ny {
                    t[j] += c * row[j];
                }
            }
        }
        let mut h = vec![0.0; nx * ny];
        for jx in 0..nx {
            let vxj = &self.vx[jx];
            let t = &tmp[jx * ny..(jx + 1) * ny];
            for i in 0..nx {
                let a = vxj[i];
                if a == 0.0 {
                    continue;
                }
                let out = &mut h[i * ny..(i + 1) * ny];
                for j in 0..ny {
                    out[j] += a * t[j];
                }
            }
        }
        // Fix the additive constant: zero average over the center column.
        let ic = self.grid.center_column();
        let mean: f64 = h[ic * ny..(ic + 1) * ny].iter().sum::<f64>() / ny as f64;
        for v in h.iter_mut() {
            *v -= mean;
        }
        h
    }

    /// Split a raw draw into (radial = column means, lateral = remainder).
    pub fn sample(&self, stream: &RngStream) -> FieldSample {
        let h = self.sample_values(stream);
        let mut field = FieldSample::zero(self.grid.clone());
        split_radial_lateral(&self.grid, &h, &mut field.radial, &mut field.lateral);
        field
    }

    /// Lateral-only draw: the projection of an independent field onto
    /// mean-zero-per-column functions (x-mode column means removed).
    pub fn sample_lateral(&self, stream: &RngStream) -> Vec<f64> {
        let h = self.sample_values(stream);
        let mut radial = vec![0.0; self.grid.nx];
        let mut lateral = vec![0.0; self.grid.len()];
        split_radial_lateral(&self.grid, &h, &mut radial, &mut lateral);
        lateral
    }
}

pub fn split_radial_lateral(grid: &LatticeGrid, h: &[f64], radial: &mut [f64], lateral: &mut [f64]) {
    let ny = grid.ny;
    for i in 0..grid.nx {
        let col = &h[i * ny..(i + 1) * ny];
        let mean: f64 = col.iter().sum::<f64>() / ny as f64;
        radial[i] = mean;
        for j in 0..ny {
            lateral[i * ny + j] = col[j] - mean;
        }
    }
}

/// Weighted graph Laplacian action, free in x, free or periodic in y.
pub fn laplacian_apply(grid: &LatticeGrid, v: &[f64], out: &mut [f64]) {
    let nx = grid.nx;
    let ny = grid.ny;
    let wx = grid.dy() / grid.dx();
    let wy = grid.dx() / grid.dy();
    let periodic = grid.geometry.periodic();
    for i in 0..nx {
        for j in 0..ny {
            let c = v[i * ny + j];
            let mut acc = 0.0;
            if i > 0 {
                acc += wx * (c - v[(i - 1) * ny + j]);
            }
            if i + 1 < nx {
                acc += wx * (c - v[(i + 1) * ny + j]);
            }
            if j > 0 {
                acc += wy * (c - v[i * ny + j - 1]);
            } else if periodic {
                acc += wy * (c - v[i * ny + ny - 1]);
            }
            if j + 1 < ny {
                acc += wy * (c - v[i * ny + j + 1]);
            } else if periodic {
                acc += wy * (c - v[i * ny]);
            }
            out[i * ny + j] = acc;
        }
    }
}

fn project_mean_zero(v: &mut [f64]) {
    let m: f64 = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= m;
    }
}

/// Solve L x = b on the mean-zero subspace by conjugate gradients.
pub fn solve_laplacian(grid: &LatticeGrid, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut rhs = b.to_vec();
    project_mean_zero(&mut rhs);
    let mut x = vec![0.0; n];
    let mut r = rhs.clone();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rs: f64 = r.iter().map(|v| v * v).sum();
    let rs0 = rs.max(1e-300);
    for _ in 0..20 * n {
        if rs / rs0 < 1e-24 {
            break;
        }
        laplacian_apply(grid, &p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        let alpha = rs / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rs_new / rs;
        rs = rs_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    project_mean_zero(&mut x);
    x
}

/// Covariance column of the normalized field against the averaging
/// functional a ↦ Σ wᵢ h(siteᵢ): returns Cov(h(·), Σ w h).
///
/// Independent of the spectral sampler: computes A (2πL⁺) Aᵀ a by a linear
/// solve, where A subtracts the center-column average.
pub fn covariance_column(grid: &LatticeGrid, weights: &[(usize, f64)]) -> Vec<f64> {
    let n = grid.len();
    let ny = grid.ny;
    let ic = grid.center_column();
    // u = Aᵀ a = a − m₀ (1ᵀ a)
    let mut u = vec![0.0; n];
    let mut total = 0.0;
    for &(s, w) in weights {
        u[s] += w;
        total += w;
    }
    for j in 0..ny {
        u[ic * ny + j] -= total / ny as f64;
    }
    for v in u.iter_mut() {
        *v *= TWO_PI;
    }
    let g = solve_laplacian(grid, &u);
    // A g = g − 1 (m₀ᵀ g)
    let m0g: f64 = (0..ny).map(|j| g[ic * ny + j]).sum::<f64>() / ny as f64;
    g.iter().map(|v| v - m0g).collect()
}

/// Exact lattice variance of the averaging functional under the normalized
/// field.
pub fn covariance_quadratic(grid: &LatticeGrid, weights: &[(usize, f64)]) -> f64 {
    let col = covariance_column(grid, weights);
    weights.iter().map(|&(s, w)| w * col[s]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Geometry, LatticeGrid};

    fn spectral_covariance(s: &GffSampler, a: usize, b: usize) -> f64 {
        // Direct mode sum: Cov(h) = A (Σ 2π/λ φφᵀ) Aᵀ.
        let grid = &s.grid;
        let ny = grid.ny;
        let ic = grid.center_column();
        let nmy = s.vy.len();
        let mut cov = 0.0;
        for jx in 0..grid.nx {
            for ky in 0..nmy {
                if jx == 0 && ky == 0 {
                    continue;
                }
                let lam = s.wx * s.lx[jx] + s.wy * s.ly[ky];
                let phi = |site: usize| {
                    let (i, j) = (site / ny, site % ny);
                    s.vx[jx][i] * s.vy[ky][j]
                };
                let col_mean = |_: usize| -> f64 {
                    (0..ny).map(|j| s.vx[jx][ic] * s.vy[ky][j]).sum::<f64>() / ny as f64
                };
                let pa = phi(a) - col_mean(a);
                let pb = phi(b) - col_mean(b);
                cov += TWO_PI / lam * pa * pb;
            }
        }
        cov
    }

    #[test]
    fn spectral_matches_linear_solve() {
        for geom in [Geometry::Strip, Geometry::Cylinder] {
            let grid = LatticeGrid::new(geom, 8, 6, 1.5).unwrap();
            let s = GffSampler::new(&grid).unwrap();
            let probes = [0usize, 17, 33, 47];
            for &a in &probes {
                let col = covariance_column(&grid, &[(a, 1.0)]);
                for &b in &probes {
                    let want = spectral_covariance(&s, a, b);
                    assert!(
                        (col[b] - want).abs() < 1e-8,
                        "{geom:?} cov({a},{b}): solve {} vs modes {want}",
                        col[b]
                    );
                }
            }
        }
    }

    #[test]
    fn deterministic_and_column_centered() {
        let grid = LatticeGrid::new(Geometry::Strip, 16, 8, 2.0).unwrap();
        let s = GffSampler::new(&grid).unwrap();
        let st = RngStream::new(11, 4);
        let f1 = s.sample(&st);
        let f2 = s.sample(&st);
        assert_eq!(f1.lateral, f2.lateral);
        assert_eq!(f1.radial, f2.radial);
        for m in f1.lateral_column_means() {
            assert!(m.abs() < 1e-10);
        }
        assert_eq!(f1.c, 0.0);
        assert_eq!(f1.log_weight, 0.0);
    }

    #[test]
    fn empirical_variance_matches_oracle() {
        let grid = LatticeGrid::new(Geometry::Cylinder, 8, 8, 1.5).unwrap();
        let s = GffSampler::new(&grid).unwrap();
        let site = grid.idx(2, 3);
        let exact = covariance_quadratic(&grid, &[(site, 1.0)]);
        let n = 4000;
        let mut m2 = 0.0;
        for r in 0..n {
            let h = s.sample_values(&RngStream::new(3, r as u64));
            m2 += h[site] * h[site];
        }
        let emp = m2 / n as f64;
        // SE of a variance estimate ≈ exact·sqrt(2/n).
        let se = exact * (2.0 / n as f64).sqrt();
        assert!(
            (emp - exact).abs() < 4.0 * se,
            "empirical {emp} vs exact {exact} (se {se})"
        );
    }
}
