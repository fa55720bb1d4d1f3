//! Lattice grids for the three chart geometries and the field samples that
//! live on them.
//!
//! Strip: ℝ × (0,π) truncated to |Re z| ≤ T, free lateral boundary.
//! Cylinder: ℝ × [0,2π] with (x,0) ∼ (x,2π), truncated likewise.
//! Sphere-plane: the image of the cylinder grid under z ↦ e^z; field values
//! are stored in plane coordinates at those sites.
//!
//! Sites sit at cell centers: x_i = −T + (i+½)dx, and y_j = (j+½)dy for the
//! strip, y_j = j·dy for the cylinder. Index layout is row-major in x:
//! site(i,j) = i·ny + j.

use crate::{C64, CoreError, Result};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Geometry {
    Strip,
    Cylinder,
    SpherePlane,
}

impl Geometry {
    fn tag(self) -> u8 {
        match self {
            Geometry::Strip => 0,
            Geometry::Cylinder => 1,
            Geometry::SpherePlane => 2,
        }
    }

    fn from_tag(t: u8) -> Option<Self> {
        match t {
            0 => Some(Geometry::Strip),
            1 => Some(Geometry::Cylinder),
            2 => Some(Geometry::SpherePlane),
            _ => None,
        }
    }

    /// Lateral period: π for the strip's free interval, 2π for the cylinder
    /// and its exponential image.
    pub fn lateral_extent(self) -> f64 {
        match self {
            Geometry::Strip => std::f64::consts::PI,
            _ => 2.0 * std::f64::consts::PI,
        }
    }

    pub fn periodic(self) -> bool {
        !matches!(self, Geometry::Strip)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeGrid {
    pub geometry: Geometry,
    pub nx: usize,
    pub ny: usize,
    /// Truncation of the ℝ direction: columns cover [−T, T].
    pub t_extent: f64,
}

impl LatticeGrid {
    pub fn new(geometry: Geometry, nx: usize, ny: usize, t_extent: f64) -> Result<Self> {
        if nx < 4 || ny < 4 {
            return Err(CoreError::GridTooSmall(format!("nx={nx}, ny={ny} (need ≥ 4)")));
        }
        if t_extent < 1.0 {
            return Err(CoreError::GridTooSmall(format!("T={t_extent} (need ≥ 1)")));
        }
        Ok(LatticeGrid { geometry, nx, ny, t_extent })
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.t_extent / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.geometry.lateral_extent() / self.ny as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.t_extent + (i as f64 + 0.5) * self.dx()
    }

    pub fn y(&self, j: usize) -> f64 {
        match self.geometry {
            Geometry::Strip => (j as f64 + 0.5) * self.dy(),
            _ => j as f64 * self.dy(),
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.ny + j
    }

    /// Chart coordinate of a site (strip/cylinder coordinates).
    pub fn chart_point(&self, i: usize, j: usize) -> C64 {
        C64::new(self.x(i), self.y(j))
    }

    /// Embedded position of a site: identity for strip/cylinder, e^z for the
    /// sphere-plane chart.
    pub fn site(&self, i: usize, j: usize) -> C64 {
        let z = self.chart_point(i, j);
        match self.geometry {
            Geometry::SpherePlane => z.exp(),
            _ => z,
        }
    }

    /// Column index nearest to x = 0; the normalization line lives there.
    pub fn center_column(&self) -> usize {
        self.nx / 2
    }

    /// Does the annulus image of the grid cover the plane point w (sphere
    /// chart)? The two chart ends 0 and ∞ are never covered.
    pub fn covers_plane_point(&self, w: C64) -> bool {
        let r = w.norm();
        r.ln().abs() <= self.t_extent && r > 0.0
    }
}

/// Bilinear interpolation weights for a chart point (x, y).
/// Returns ((i0, i1, fx), (j0, j1, fy), extrapolated_in_x).
fn locate(grid: &LatticeGrid, x: f64, y: f64) -> ((usize, usize, f64), (usize, usize, f64), bool) {
    let dx = grid.dx();
    let dy = grid.dy();
    let nx = grid.nx;
    let ny = grid.ny;

    let ux = (x + grid.t_extent) / dx - 0.5;
    let extrap = ux < -0.5 || ux > nx as f64 - 0.5;
    let uxc = ux.clamp(0.0, (nx - 1) as f64);
    let i0 = uxc.floor() as usize;
    let i1 = (i0 + 1).min(nx - 1);
    let fx = (uxc - i0 as f64).clamp(0.0, 1.0);

    let (j0, j1, fy) = match grid.geometry {
        Geometry::Strip => {
            let uy = (y / dy - 0.5).clamp(0.0, (ny - 1) as f64);
            let j0 = uy.floor() as usize;
            let j1 = (j0 + 1).min(ny - 1);
            (j0, j1, (uy - j0 as f64).clamp(0.0, 1.0))
        }
        _ => {
            let per = grid.geometry.lateral_extent();
            let mut yy = y % per;
            if yy < 0.0 {
                yy += per;
            }
            let uy = yy / dy;
            let j0 = (uy.floor() as usize) % ny;
            let j1 = (j0 + 1) % ny;
            (j0, j1, uy - uy.floor())
        }
    };
    ((i0, i1, fx), (j0, j1, fy), extrap)
}

/// A lattice field draw: per-column radial part, per-site lateral part with
/// zero column averages (strip/cylinder), a deterministic singular profile
/// (insertions, log|·|₊ terms), and the additive constant c.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldSample {
    pub grid: LatticeGrid,
    pub lateral: Vec<f64>,
    pub radial: Vec<f64>,
    /// Deterministic per-site profile; empty means identically zero.
    pub profile: Vec<f64>,
    pub c: f64,
    pub log_weight: f64,
}

impl FieldSample {
    pub fn zero(grid: LatticeGrid) -> Self {
        let n = grid.len();
        let nx = grid.nx;
        FieldSample {
            grid,
            lateral: vec![0.0; n],
            radial: vec![0.0; nx],
            profile: Vec::new(),
            c: 0.0,
            log_weight: 0.0,
        }
    }

    pub fn total(&self, i: usize, j: usize) -> f64 {
        let p = if self.profile.is_empty() { 0.0 } else { self.profile[self.grid.idx(i, j)] };
        self.lateral[self.grid.idx(i, j)] + self.radial[i] + p + self.c
    }

    /// Total field as a dense row-major vector.
    pub fn total_values(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.len()];
        for i in 0..self.grid.nx {
            for j in 0..self.grid.ny {
                out[self.grid.idx(i, j)] = self.total(i, j);
            }
        }
        out
    }

    /// Bilinear interpolation of the total field at a chart point.
    /// The flag reports extrapolation past the x-truncation.
    pub fn interp_chart(&self, x: f64, y: f64) -> (f64, bool) {
        let ((i0, i1, fx), (j0, j1, fy), ex) = locate(&self.grid, x, y);
        let v = |i: usize, j: usize| self.total(i, j);
        let v0 = v(i0, j0) * (1.0 - fy) + v(i0, j1) * fy;
        let v1 = v(i1, j0) * (1.0 - fy) + v(i1, j1) * fy;
        (v0 * (1.0 - fx) + v1 * fx, ex)
    }

    /// Interpolate at a plane point (sphere chart): w ↦ chart log w.
    pub fn interp_plane(&self, w: C64) -> (f64, bool) {
        debug_assert_eq!(self.grid.geometry, Geometry::SpherePlane);
        let z = C64::new(w.norm().ln(), w.arg());
        self.interp_chart(z.re, z.im)
    }

    /// Average of the total field over the circle of radius eps around a
    /// chart point, clipped to the domain (strip keeps the arc inside
    /// (0, π)). `k` sample points; extrapolation flags are ORed.
    pub fn circle_average(&self, x: f64, y: f64, eps: f64, k: usize) -> (f64, bool) {
        let per = self.grid.geometry.lateral_extent();
        let mut sum = 0.0;
        let mut cnt = 0usize;
        let mut ex = false;
        for m in 0..k {
            let th = 2.0 * std::f64::consts::PI * (m as f64 + 0.5) / k as f64;
            let px = x + eps * th.cos();
            let py = y + eps * th.sin();
            if matches!(self.grid.geometry, Geometry::Strip) && !(0.0..=per).contains(&py) {
                continue;
            }
            let (v, e) = self.interp_chart(px, py);
            sum += v;
            cnt += 1;
            ex |= e;
        }
        if cnt == 0 {
            (0.0, true)
        } else {
            (sum / cnt as f64, ex)
        }
    }

    /// Average over a plane circle of radius eps around w, taken in chart
    /// coordinates with the local conformal factor (radius eps/|w|).
    pub fn circle_average_plane(&self, w: C64, eps: f64, k: usize) -> (f64, bool) {
        debug_assert_eq!(self.grid.geometry, Geometry::SpherePlane);
        let z = C64::new(w.norm().ln(), w.arg());
        self.circle_average(z.re, z.im, eps / w.norm(), k)
    }

    /// Apply a site-weight functional to the total field.
    pub fn stencil_apply(&self, stencil: &[(usize, f64)]) -> f64 {
        let ny = self.grid.ny;
        stencil
            .iter()
            .map(|&(s, w)| w * self.total(s / ny, s % ny))
            .sum()
    }

    /// Column means of the lateral part (diagnostic: ≈ 0 per invariant).
    pub fn lateral_column_means(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.grid.nx];
        for i in 0..self.grid.nx {
            let mut s = 0.0;
            for j in 0..self.grid.ny {
                s += self.lateral[self.grid.idx(i, j)];
            }
            out[i] = s / self.grid.ny as f64;
        }
        out
    }
}

/// Site-weight functional equal to the circle average used by
/// [`FieldSample::circle_average`]: k bilinear point evaluations on the
/// chart circle of radius eps, domain-clipped for the strip. Weights sum
/// to 1.
pub fn circle_stencil(
    grid: &LatticeGrid,
    x: f64,
    y: f64,
    eps: f64,
    k: usize,
) -> Vec<(usize, f64)> {
    let per = grid.geometry.lateral_extent();
    let mut entries: Vec<(usize, f64)> = Vec::with_capacity(4 * k);
    let mut cnt = 0usize;
    for m in 0..k {
        let th = 2.0 * std::f64::consts::PI * (m as f64 + 0.5) / k as f64;
        let px = x + eps * th.cos();
        let py = y + eps * th.sin();
        if matches!(grid.geometry, Geometry::Strip) && !(0.0..=per).contains(&py) {
            continue;
        }
        cnt += 1;
        let ((i0, i1, fx), (j0, j1, fy), _) = locate(grid, px, py);
        entries.push((grid.idx(i0, j0), (1.0 - fx) * (1.0 - fy)));
        entries.push((grid.idx(i0, j1), (1.0 - fx) * fy));
        entries.push((grid.idx(i1, j0), fx * (1.0 - fy)));
        entries.push((grid.idx(i1, j1), fx * fy));
    }
    if cnt == 0 {
        return entries;
    }
    for e in entries.iter_mut() {
        e.1 /= cnt as f64;
    }
    // Merge duplicate sites so downstream linear algebra sees one weight
    // per site.
    entries.sort_by_key(|e| e.0);
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
    for (s, w) in entries {
        match merged.last_mut() {
            Some(last) if last.0 == s => last.1 += w,
            _ => merged.push((s, w)),
        }
    }
    merged
}

/// Sidecar metadata written next to binary field dumps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldSidecar {
    pub insertions: Vec<(f64, [f64; 2])>,
    pub c: f64,
    pub log_weight: f64,
    pub gamma: f64,
}

const FIELD_MAGIC: &[u8; 4] = b"RCGF";

/// Binary field dump: magic, version, geometry tag, nx, ny, T, gamma, then
/// the nx·ny total-field values as little-endian f64, row-major in x.
pub fn write_field_binary<W: Write>(out: &mut W, field: &FieldSample, gamma: f64) -> std::io::Result<()> {
    out.write_all(FIELD_MAGIC)?;
    out.write_all(&1u32.to_le_bytes())?;
    out.write_all(&[field.grid.geometry.tag(), 0, 0, 0])?;
    out.write_all(&(field.grid.nx as u32).to_le_bytes())?;
    out.write_all(&(field.grid.ny as u32).to_le_bytes())?;
    out.write_all(&field.grid.t_extent.to_le_bytes())?;
    out.write_all(&gamma.to_le_bytes())?;
    for v in field.total_values() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Read back a binary field dump as (grid, gamma, total values).
pub fn read_field_binary<R: Read>(input: &mut R) -> std::io::Result<(LatticeGrid, f64, Vec<f64>)> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    let bad = |m: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, m.to_string());
    if &magic != FIELD_MAGIC {
        return Err(bad("bad magic"));
    }
    let mut b4 = [0u8; 4];
    input.read_exact(&mut b4)?;
    if u32::from_le_bytes(b4) != 1 {
        return Err(bad("unsupported version"));
    }
    input.read_exact(&mut b4)?;
    let geometry = Geometry::from_tag(b4[0]).ok_or_else(|| bad("bad geometry tag"))?;
    input.read_exact(&mut b4)?;
    let nx = u32::from_le_bytes(b4) as usize;
    input.read_exact(&mut b4)?;
    let ny = u32::from_le_bytes(b4) as usize;
    let mut b8 = [0u8; 8];
    input.read_exact(&mut b8)?;
    let t_extent = f64::from_le_bytes(b8);
    input.read_exact(&mut b8)?;
    let gamma = f64::from_le_bytes(b8);
    let grid = LatticeGrid { geometry, nx, ny, t_extent };
    let mut values = vec![0.0; nx * ny];
    for v in values.iter_mut() {
        input.read_exact(&mut b8)?;
        *v = f64::from_le_bytes(b8);
    }
    Ok((grid, gamma, values))
}
