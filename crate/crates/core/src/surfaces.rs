//! Marked quantum surfaces: two-pointed disks and spheres, their unmarked
//! reweightings, typical-point resampling, the area-marked sphere, and the
//! three-insertion sphere embedding.
//!
//! Disk surfaces live on the strip chart, sphere surfaces on the cylinder
//! chart; the additive constant is always drawn uniformly on a window with
//! the density weight made explicit, and shape-adapted windows (boundary
//! length or area pinned to an interval) draw c so that the window is hit
//! exactly, keeping importance weights bounded.

use crate::gff::GffSampler;
use crate::gmc::{default_schedule, quantum_area, quantum_length, GmcMeasure};
use crate::grid::{FieldSample, Geometry, LatticeGrid};
use crate::liouville::{CWindow, Insertion, LiouvilleSampler};
use crate::params::LqgParams;
use crate::radial::{sample_radial_disk, sample_radial_sphere};
use crate::rng::RngStream;
use crate::sle::CurveSample;
use crate::{C64, CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub enum MeasureTag {
    TwoPointedDisk { weight: f64 },
    UnmarkedDisk,
    BoundaryLengthDisk { ell: f64 },
    TwoPointedSphere { weight: f64 },
    UnmarkedSphere,
    AreaMarkedSphere { weight: f64 },
}

impl MeasureTag {
    pub fn mark_count(&self) -> usize {
        match self {
            MeasureTag::TwoPointedDisk { .. } | MeasureTag::TwoPointedSphere { .. } => 2,
            MeasureTag::UnmarkedDisk
            | MeasureTag::BoundaryLengthDisk { .. }
            | MeasureTag::UnmarkedSphere => 0,
            MeasureTag::AreaMarkedSphere { .. } => 3,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct MarkedSurface {
    pub field: FieldSample,
    /// Chart coordinates; ±T real parts stand for the chart ends.
    pub marks: Vec<C64>,
    pub loop_curve: Option<CurveSample>,
    pub tag: MeasureTag,
    pub log_weight: f64,
}

impl MarkedSurface {
    pub fn check_marks(&self) -> bool {
        self.marks.len() == self.tag.mark_count()
    }
}

/// Sampler bound to one chart grid; holds the free-field basis.
pub struct SurfaceSampler {
    params: LqgParams,
    grid: LatticeGrid,
    gff: GffSampler,
    schedule: Vec<f64>,
}

impl SurfaceSampler {
    pub fn new(params: LqgParams, grid: &LatticeGrid) -> Result<Self> {
        if grid.geometry == Geometry::SpherePlane {
            return Err(CoreError::InvalidParameter(
                "surface sampler works on strip or cylinder charts".into(),
            ));
        }
        Ok(SurfaceSampler {
            params,
            grid: grid.clone(),
            gff: GffSampler::new(grid)?,
            schedule: default_schedule(grid.dx().max(grid.dy())),
        })
    }

    pub fn params(&self) -> &LqgParams {
        &self.params
    }

    pub fn grid(&self) -> &LatticeGrid {
        &self.grid
    }

    pub fn schedule(&self) -> &[f64] {
        &self.schedule
    }

    fn end_marks(&self) -> Vec<C64> {
        vec![C64::new(-self.grid.t_extent, 0.0), C64::new(self.grid.t_extent, 0.0)]
    }

    /// Radial + lateral shape of a disk draw, before the additive constant.
    fn disk_shape(&self, weight: f64, stream: &RngStream) -> Result<FieldSample> {
        if self.grid.geometry != Geometry::Strip {
            return Err(CoreError::InvalidParameter("disk surfaces need the strip chart".into()));
        }
        let path = sample_radial_disk(
            &self.params,
            weight,
            self.grid.t_extent,
            self.grid.dx(),
            &stream.substream(0),
        )?;
        let mut field = FieldSample::zero(self.grid.clone());
        for i in 0..self.grid.nx {
            field.radial[i] = path.eval(self.grid.x(i));
        }
        field.lateral = self.gff.sample_lateral(&stream.substream(1));
        Ok(field)
    }

    fn sphere_shape(&self, weight: f64, stream: &RngStream) -> Result<FieldSample> {
        if self.grid.geometry != Geometry::Cylinder {
            return Err(CoreError::InvalidParameter(
                "sphere surfaces need the cylinder chart".into(),
            ));
        }
        let path = sample_radial_sphere(
            &self.params,
            weight,
            self.grid.t_extent,
            self.grid.dx(),
            &stream.substream(0),
        )?;
        let mut field = FieldSample::zero(self.grid.clone());
        for i in 0..self.grid.nx {
            field.radial[i] = path.eval(self.grid.x(i));
        }
        field.lateral = self.gff.sample_lateral(&stream.substream(1));
        Ok(field)
    }

    /// Two-pointed disk of the given weight, c on the window with density
    /// (γ/2)e^{(β−Q)c}dc.
    pub fn two_pointed_disk(
        &self,
        weight: f64,
        c_window: CWindow,
        stream: &RngStream,
    ) -> Result<MarkedSurface> {
        let mut field = self.disk_shape(weight, stream)?;
        let (c, log_len) = c_window.draw(&mut stream.substream(2).rng());
        field.c = c;
        let drift = self.params.disk_drift(weight)?;
        let log_weight = (self.params.gamma / 2.0).ln() - drift * c + log_len;
        Ok(MarkedSurface {
            field,
            marks: self.end_marks(),
            loop_curve: None,
            tag: MeasureTag::TwoPointedDisk { weight },
            log_weight,
        })
    }

    /// Two-pointed disk with the boundary length forced into
    /// [ell_lo, ell_hi]: the shape is drawn first and c is proposed exactly
    /// on the matching interval, so every sample lands in the window.
    pub fn two_pointed_disk_in_length_window(
        &self,
        weight: f64,
        ell_lo: f64,
        ell_hi: f64,
        stream: &RngStream,
    ) -> Result<MarkedSurface> {
        if !(ell_lo > 0.0 && ell_hi > ell_lo) {
            return Err(CoreError::EmptyWindow);
        }
        let mut field = self.disk_shape(weight, stream)?;
        let nu0 = quantum_length(&self.params, &field, &self.schedule)?.total_mass();
        if !(nu0 > 0.0 && nu0.is_finite()) {
            return Err(CoreError::DegenerateWeights);
        }
        let g = self.params.gamma;
        let window =
            CWindow::new(2.0 / g * (ell_lo / nu0).ln(), 2.0 / g * (ell_hi / nu0).ln())?;
        let (c, log_len) = window.draw(&mut stream.substream(2).rng());
        field.c = c;
        let drift = self.params.disk_drift(weight)?;
        let log_weight = (g / 2.0).ln() - drift * c + log_len;
        Ok(MarkedSurface {
            field,
            marks: self.end_marks(),
            loop_curve: None,
            tag: MeasureTag::TwoPointedDisk { weight },
            log_weight,
        })
    }

    pub fn boundary_measure(&self, surface: &MarkedSurface) -> Result<GmcMeasure> {
        quantum_length(&self.params, &surface.field, &self.schedule)
    }

    pub fn area_measure(&self, surface: &MarkedSurface) -> Result<GmcMeasure> {
        quantum_area(&self.params, &surface.field, &self.schedule)
    }

    /// Weight-2 two-pointed disk reweighted by ν(∂)⁻² with marks dropped.
    pub fn unmarked_disk(&self, c_window: CWindow, stream: &RngStream) -> Result<MarkedSurface> {
        let mut s = self.two_pointed_disk(2.0, c_window, stream)?;
        let nu = self.boundary_measure(&s)?.total_mass();
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(CoreError::DegenerateWeights);
        }
        s.log_weight -= 2.0 * nu.ln();
        s.marks.clear();
        s.tag = MeasureTag::UnmarkedDisk;
        Ok(s)
    }

    /// Unmarked disk conditioned on boundary length ℓ(1 ± half-width); the
    /// narrow-bin stand-in for the length disintegration.
    pub fn qd_conditioned(
        &self,
        ell: f64,
        rel_halfwidth: f64,
        stream: &RngStream,
    ) -> Result<MarkedSurface> {
        let mut s = self.two_pointed_disk_in_length_window(
            2.0,
            ell * (1.0 - rel_halfwidth),
            ell * (1.0 + rel_halfwidth),
            stream,
        )?;
        let nu = self.boundary_measure(&s)?.total_mass();
        s.log_weight -= 2.0 * nu.ln();
        s.marks.clear();
        s.tag = MeasureTag::BoundaryLengthDisk { ell };
        Ok(s)
    }

    /// Redraw two boundary marks from the normalized length measure;
    /// weights pick up +2·log ν(∂) and the tag returns to the two-pointed
    /// weight-2 disk.
    pub fn resample_boundary_marks(
        &self,
        surface: &MarkedSurface,
        stream: &RngStream,
    ) -> Result<MarkedSurface> {
        let nu = self.boundary_measure(surface)?;
        let total = nu.total_mass();
        if !(total > 0.0 && total.is_finite()) {
            return Err(CoreError::DegenerateWeights);
        }
        let mut rng = stream.rng();
        let m1 = nu.atoms[nu.sample_atom(&mut rng)].0;
        let m2 = nu.atoms[nu.sample_atom(&mut rng)].0;
        let mut out = surface.clone();
        out.marks = vec![m1, m2];
        out.log_weight += 2.0 * total.ln();
        out.tag = MeasureTag::TwoPointedDisk { weight: 2.0 };
        Ok(out)
    }

    /// Two-pointed sphere of the given weight, c-density (γ/2)e^{2(α−Q)c}dc.
    pub fn two_pointed_sphere(
        &self,
        weight: f64,
        c_window: CWindow,
        stream: &RngStream,
    ) -> Result<MarkedSurface> {
        let mut field = self.sphere_shape(weight, stream)?;
        let (c, log_len) = c_window.draw(&mut stream.substream(2).rng());
        field.c = c;
        let drift = self.params.sphere_drift(weight)?;
        let log_weight = (self.params.gamma / 2.0).ln() - 2.0 * drift * c + log_len;
        Ok(MarkedSurface {
            field,
            marks: self.end_marks(),
            loop_curve: None,
            tag: MeasureTag::TwoPointedSphere { weight },
            log_weight,
        })
    }

    /// Weight-(4−γ²) sphere reweighted by μ⁻² with marks dropped.
    pub fn quantum_sphere(&self, c_window: CWindow, stream: &RngStream) -> Result<MarkedSurface> {
        let w = 4.0 - self.params.kappa();
        let mut s = self.two_pointed_sphere(w, c_window, stream)?;
        let mu = self.area_measure(&s)?.total_mass();
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(CoreError::DegenerateWeights);
        }
        s.log_weight -= 2.0 * mu.ln();
        s.marks.clear();
        s.tag = MeasureTag::UnmarkedSphere;
        Ok(s)
    }

    /// Unmarked sphere with total area forced into [a_lo, a_hi] by a
    /// shape-adapted c proposal.
    pub fn quantum_sphere_in_area_window(
        &self,
        a_lo: f64,
        a_hi: f64,
        stream: &RngStream,
    ) -> Result<MarkedSurface> {
        if !(a_lo > 0.0 && a_hi > a_lo) {
            return Err(CoreError::EmptyWindow);
        }
        let w = 4.0 - self.params.kappa();
        let mut field = self.sphere_shape(w, stream)?;
        let mu0 = quantum_area(&self.params, &field, &self.schedule)?.total_mass();
        if !(mu0 > 0.0 && mu0.is_finite()) {
            return Err(CoreError::DegenerateWeights);
        }
        let g = self.params.gamma;
        let window = CWindow::new((a_lo / mu0).ln() / g, (a_hi / mu0).ln() / g)?;
        let (c, log_len) = window.draw(&mut stream.substream(2).rng());
        field.c = c;
        let mu = mu0 * (g * c).exp();
        let drift = self.params.sphere_drift(w)?;
        let log_weight = (g / 2.0).ln() - 2.0 * drift * c + log_len - 2.0 * mu.ln();
        Ok(MarkedSurface {
            field,
            marks: Vec::new(),
            loop_curve: None,
            tag: MeasureTag::UnmarkedSphere,
            log_weight,
        })
    }

    /// Area-weighted sphere with a third mark from the normalized area
    /// measure.
    pub fn area_marked_sphere(
        &self,
        weight: f64,
        c_window: CWindow,
        stream: &RngStream,
    ) -> Result<MarkedSurface> {
        let mut s = self.two_pointed_sphere(weight, c_window, stream)?;
        let mu = self.area_measure(&s)?;
        let total = mu.total_mass();
        if !(total > 0.0 && total.is_finite()) {
            return Err(CoreError::DegenerateWeights);
        }
        let mut rng = stream.substream(3).rng();
        let z = mu.atoms[mu.sample_atom(&mut rng)].0;
        s.marks.push(z);
        s.log_weight += total.ln();
        s.tag = MeasureTag::AreaMarkedSphere { weight };
        Ok(s)
    }
}

/// The insertion set of the three-point sphere embedding:
/// (α, 0), (α, 1), (γ, −1) with α = Q − W/(2γ).
pub fn three_point_insertions(params: &LqgParams, weight: f64) -> Result<Vec<Insertion>> {
    let alpha = params.sphere_alpha(weight)?;
    Ok(vec![
        Insertion { alpha, z: C64::new(0.0, 0.0) },
        Insertion { alpha, z: C64::new(1.0, 0.0) },
        Insertion { alpha: params.gamma, z: C64::new(-1.0, 0.0) },
    ])
}

/// log of the prefactor 2πγ/(Q−α)² of the three-point embedding.
pub fn three_point_log_prefactor(params: &LqgParams, weight: f64) -> Result<f64> {
    let drift = params.sphere_drift(weight)?;
    Ok((2.0 * std::f64::consts::PI * params.gamma).ln() - 2.0 * drift.ln())
}

/// Area-marked sphere realized directly as a plane-chart field with the
/// three insertions and marks at (0, 1, −1).
pub fn embed_three_point_sphere(
    sampler: &LiouvilleSampler,
    weight: f64,
    c_window: CWindow,
    stream: &RngStream,
) -> Result<MarkedSurface> {
    let params = *sampler.params();
    let insertions = three_point_insertions(&params, weight)?;
    let mut field = sampler.sample(&insertions, c_window, stream)?;
    field.log_weight += three_point_log_prefactor(&params, weight)?;
    let log_weight = field.log_weight;
    field.log_weight = 0.0;
    Ok(MarkedSurface {
        field,
        marks: vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(-1.0, 0.0)],
        loop_curve: None,
        tag: MeasureTag::AreaMarkedSphere { weight },
        log_weight,
    })
}
