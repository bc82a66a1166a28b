//! Region files and the color-line diagnostic report.

use serde::{Deserialize, Serialize};

use orgb_core::offset::{estimate_convergence_point, fit_color_line, line_origin_distance};
use orgb_core::{make_mask_rect, LinearImage, Rect};

/// One named rectangle of a regions file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedRegion {
    #[serde(default)]
    pub name: String,
    pub rect: Rect,
}

/// `{"regions": [{"name": "...", "rect": {"x":0,"y":0,"w":8,"h":8}}, ...]}`
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RegionsFile {
    pub regions: Vec<NamedRegion>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineReport {
    pub name: String,
    pub rect: Rect,
    pub n: usize,
    pub centroid: [f64; 3],
    pub direction: [f64; 3],
    pub rms_residual: f64,
    pub origin_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub point: [f64; 3],
    pub rms_line_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseReport {
    pub lines: Vec<LineReport>,
    /// Least-squares meeting point of all lines; `None` with fewer than two.
    pub convergence: Option<Convergence>,
}

pub fn diagnose(img: &LinearImage, regions: &[NamedRegion]) -> orgb_core::Result<DiagnoseReport> {
    let (w, h) = img.dims();
    let mut fitted = Vec::with_capacity(regions.len());
    let mut lines = Vec::with_capacity(regions.len());
    for region in regions {
        let mask = make_mask_rect(region.rect, w, h)?;
        let line = fit_color_line(img, &mask)?;
        lines.push(LineReport {
            name: region.name.clone(),
            rect: mask.rect().unwrap_or(region.rect),
            n: line.n,
            centroid: line.centroid,
            direction: line.direction,
            rms_residual: line.rms_residual,
            origin_distance: line_origin_distance(&line),
        });
        fitted.push(line);
    }
    let convergence = if fitted.len() >= 2 {
        let c = estimate_convergence_point(&fitted)?;
        Some(Convergence {
            point: c.point,
            rms_line_distance: c.rms_line_distance,
        })
    } else {
        None
    };
    Ok(DiagnoseReport { lines, convergence })
}
