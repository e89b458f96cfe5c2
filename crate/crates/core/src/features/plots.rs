use serde::{Deserialize, Serialize};

use super::{AxisKind, FeatureError, LesionMeasurement};
use crate::imaging::{reflect_mask, BinaryMask, RasterImage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotArtifact {
    pub name: String,
    pub media_type: String,
    #[serde(skip)]
    pub bytes: Vec<u8>,
}

const OUTLINE: [u8; 3] = [0, 255, 0];
const ORIGINAL: [u8; 3] = [230, 60, 60];
const MIRRORED: [u8; 3] = [60, 90, 230];
const OVERLAP: [u8; 3] = [235, 235, 235];
const HIST_HEIGHT: usize = 120;

fn png(name: &str, image: &RasterImage) -> Result<PlotArtifact, FeatureError> {
    Ok(PlotArtifact { name: name.to_string(), media_type: "image/png".into(), bytes: image.encode_png()? })
}

fn draw_axis(canvas: &mut RasterImage, origin: (f64, f64), dir: (f64, f64)) {
    let reach = (canvas.width() + canvas.height()) as i64;
    for t in -reach..=reach {
        let (x, y) = ((origin.0 + dir.0 * t as f64).round(), (origin.1 + dir.1 * t as f64).round());
        if x >= 0.0 && y >= 0.0 && (x as usize) < canvas.width() && (y as usize) < canvas.height() {
            canvas.set(x as usize, y as usize, [255, 255, 0]);
        }
    }
}

fn asymmetry_overlay(region: &BinaryMask, m: &LesionMeasurement, kind: AxisKind) -> Result<RasterImage, FeatureError> {
    let axis = m.axes.axis(kind);
    let mirrored = reflect_mask(region, &axis)?;
    let (w, h) = region.dims();
    let mut canvas = RasterImage::filled(w, h, [0, 0, 0])?;
    for y in 0..h {
        for x in 0..w {
            let color = match (region.get(x, y), mirrored.get(x, y)) {
                (true, true) => OVERLAP,
                (true, false) => ORIGINAL,
                (false, true) => MIRRORED,
                (false, false) => continue,
            };
            canvas.set(x, y, color);
        }
    }
    let dir = match kind {
        AxisKind::Major => m.axes.major_axis,
        AxisKind::Minor => m.axes.minor_axis,
    };
    draw_axis(&mut canvas, m.axes.centroid, dir);
    Ok(canvas)
}

fn color_histogram(image: &RasterImage, region: &BinaryMask) -> Result<RasterImage, FeatureError> {
    let mut counts = [[0u64; 256]; 3];
    for (x, y) in region.foreground() {
        let p = image.get(x, y);
        for c in 0..3 {
            counts[c][p[c] as usize] += 1;
        }
    }
    let peak = counts.iter().flatten().copied().max().unwrap_or(0).max(1);
    let mut canvas = RasterImage::filled(256, HIST_HEIGHT * 3, [255, 255, 255])?;
    for (c, channel) in counts.iter().enumerate() {
        let mut color = [40u8; 3];
        color[c] = 220;
        for (bin, &n) in channel.iter().enumerate() {
            let bar = (n as f64 / peak as f64 * (HIST_HEIGHT - 1) as f64).round() as usize;
            for k in 0..bar {
                canvas.set(bin, (c + 1) * HIST_HEIGHT - 1 - k, color);
            }
        }
    }
    Ok(canvas)
}

/// Contour outline, mirror overlays for both axes and the per-channel color
/// histogram of the lesion, as PNGs.
pub fn render_plots(image: &RasterImage, m: &LesionMeasurement) -> Result<Vec<PlotArtifact>, FeatureError> {
    let mut outline = image.clone();
    for &(x, y) in m.contour.points() {
        outline.set(x as usize, y as usize, OUTLINE);
    }
    Ok(vec![
        png("contour.png", &outline)?,
        png("asymmetry_major.png", &asymmetry_overlay(&m.region, m, AxisKind::Major)?)?,
        png("asymmetry_minor.png", &asymmetry_overlay(&m.region, m, AxisKind::Minor)?)?,
        png("color_histogram.png", &color_histogram(image, &m.region)?)?,
    ])
}
