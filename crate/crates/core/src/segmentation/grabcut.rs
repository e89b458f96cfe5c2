use super::gmm::GaussianMixture;
use super::maxflow::{GraphCut, Segment};
use super::{GrabCutParams, SegmentationError};
use crate::imaging::{dilate, BinaryMask, RasterImage};

const GMM_SEED_FOREGROUND: u64 = 0x005e_edf0;
const GMM_SEED_BACKGROUND: u64 = 0x005e_edb0;

/// Final mask plus the energy after initialisation and after every cut.
#[derive(Debug, Clone)]
pub struct GrabCutOutcome {
    pub mask: BinaryMask,
    pub energies: Vec<f64>,
    pub iterations_run: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Trimap {
    LockedBackground,
    Free,
}

struct Neighbor {
    offset: (i64, i64),
    inv_dist: f64,
}

fn forward_neighbors(connectivity: u8) -> Vec<Neighbor> {
    let mut n = vec![
        Neighbor { offset: (1, 0), inv_dist: 1.0 },
        Neighbor { offset: (0, 1), inv_dist: 1.0 },
    ];
    if connectivity == 8 {
        n.push(Neighbor { offset: (1, 1), inv_dist: std::f64::consts::FRAC_1_SQRT_2 });
        n.push(Neighbor { offset: (-1, 1), inv_dist: std::f64::consts::FRAC_1_SQRT_2 });
    }
    n
}

/// Each undirected neighbour pair once, with its smoothness weight.
struct PairwiseTerms {
    pairs: Vec<(u32, u32, f64)>,
}

impl PairwiseTerms {
    fn new(image: &RasterImage, params: &GrabCutParams) -> Self {
        let (w, h) = (image.width() as i64, image.height() as i64);
        let px = image.pixels();
        let neighbors = forward_neighbors(params.connectivity);
        let sq = |a: [u8; 3], b: [u8; 3]| -> f64 {
            (0..3).map(|c| (a[c] as f64 - b[c] as f64).powi(2)).sum()
        };
        let mut raw = Vec::with_capacity((w * h) as usize * neighbors.len());
        let mut total = 0.0;
        for y in 0..h {
            for x in 0..w {
                let i = (y * w + x) as usize;
                for nb in &neighbors {
                    let (nx, ny) = (x + nb.offset.0, y + nb.offset.1);
                    if nx < 0 || ny < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    let j = (ny * w + nx) as usize;
                    let d2 = sq(px[i], px[j]);
                    total += d2;
                    raw.push((i as u32, j as u32, d2, nb.inv_dist));
                }
            }
        }
        let mean = if raw.is_empty() { 0.0 } else { total / raw.len() as f64 };
        let beta = if mean > f64::EPSILON { 1.0 / (2.0 * mean) } else { 0.0 };
        let pairs = raw
            .into_iter()
            .map(|(i, j, d2, inv_dist)| (i, j, params.gamma * inv_dist * (-beta * d2).exp()))
            .collect();
        Self { pairs }
    }

    fn energy(&self, labels: &[bool]) -> f64 {
        self.pairs
            .iter()
            .filter(|(i, j, _)| labels[*i as usize] != labels[*j as usize])
            .map(|(_, _, w)| w)
            .sum()
    }

    /// Upper bound on the smoothness mass attached to any single pixel.
    fn max_incident(&self, n: usize) -> f64 {
        let mut acc = vec![0.0; n];
        for &(i, j, w) in &self.pairs {
            acc[i as usize] += w;
            acc[j as usize] += w;
        }
        acc.into_iter().fold(0.0, f64::max)
    }
}

fn samples_for(colors: &[[f64; 3]], labels: &[bool], want: bool) -> Vec<[f64; 3]> {
    colors.iter().zip(labels).filter(|(_, &l)| l == want).map(|(c, _)| *c).collect()
}

fn data_energy(colors: &[[f64; 3]], labels: &[bool], fg: &GaussianMixture, bg: &GaussianMixture) -> f64 {
    colors
        .iter()
        .zip(labels)
        .map(|(&z, &l)| if l { fg.cost(z) } else { bg.cost(z) })
        .sum()
}

/// Refits `gmm` on `samples` by one hard-EM step, keeping the previous
/// mixture when the refit would raise the data cost (possible only through
/// covariance regularization).
fn refit_monotone(gmm: &GaussianMixture, samples: &[[f64; 3]]) -> GaussianMixture {
    let refit = gmm.refit(samples);
    if refit.total_cost(samples) <= gmm.total_cost(samples) {
        refit
    } else {
        gmm.clone()
    }
}

/// GrabCut refinement of `init`, returning the energy trace.
pub fn grabcut_refine_traced(
    image: &RasterImage,
    init: &BinaryMask,
    params: &GrabCutParams,
) -> Result<GrabCutOutcome, SegmentationError> {
    params.validate()?;
    let (w, h) = init.dims();
    if (w, h) != (image.width(), image.height()) {
        return Err(SegmentationError::DimensionMismatch);
    }
    let Some(bbox) = init.bounding_box() else {
        return Err(SegmentationError::UninitializedTrimap);
    };
    if init.bits().iter().all(|&b| b) {
        return Err(SegmentationError::UninitializedTrimap);
    }

    let free_box = bbox.expand(params.locked_margin, w, h);
    let trimap: Vec<Trimap> = (0..w * h)
        .map(|i| if free_box.contains(i % w, i / w) { Trimap::Free } else { Trimap::LockedBackground })
        .collect();
    let probable_fg = dilate(init, params.probable_foreground_margin);
    let mut labels: Vec<bool> = probable_fg
        .bits()
        .iter()
        .zip(&trimap)
        .map(|(&f, &t)| f && t == Trimap::Free)
        .collect();
    if !labels.iter().any(|&l| l) || labels.iter().all(|&l| l) {
        return Err(SegmentationError::UninitializedTrimap);
    }

    let colors: Vec<[f64; 3]> =
        image.pixels().iter().map(|p| [p[0] as f64, p[1] as f64, p[2] as f64]).collect();
    let pairwise = PairwiseTerms::new(image, params);
    let locked_cap = 1.0 + pairwise.max_incident(w * h);

    let mut fg = GaussianMixture::fit(&samples_for(&colors, &labels, true), params.gmm_components, GMM_SEED_FOREGROUND);
    let mut bg = GaussianMixture::fit(&samples_for(&colors, &labels, false), params.gmm_components, GMM_SEED_BACKGROUND);
    let mut energies = vec![data_energy(&colors, &labels, &fg, &bg) + pairwise.energy(&labels)];
    let mut iterations_run = 0;

    for _ in 0..params.iterations {
        let fg_samples = samples_for(&colors, &labels, true);
        let bg_samples = samples_for(&colors, &labels, false);
        if fg_samples.is_empty() || bg_samples.is_empty() {
            break;
        }
        fg = refit_monotone(&fg, &fg_samples);
        bg = refit_monotone(&bg, &bg_samples);

        let mut graph = GraphCut::new(w * h);
        for (i, (&z, &t)) in colors.iter().zip(&trimap).enumerate() {
            match t {
                Trimap::Free => {
                    // The source link is cut when i ends up background, so it
                    // carries the background cost. Only the difference matters.
                    let (cf, cb) = (fg.cost(z), bg.cost(z));
                    let base = cf.min(cb);
                    graph.add_terminal(i, cb - base, cf - base);
                }
                Trimap::LockedBackground => graph.add_terminal(i, 0.0, locked_cap),
            }
        }
        for &(i, j, wgt) in &pairwise.pairs {
            graph.add_edge(i as usize, j as usize, wgt, wgt);
        }
        graph.maxflow();
        let next: Vec<bool> = (0..w * h).map(|i| graph.segment(i) == Segment::Source).collect();
        iterations_run += 1;
        let changed = next != labels;
        labels = next;
        energies.push(data_energy(&colors, &labels, &fg, &bg) + pairwise.energy(&labels));
        if !changed || !labels.iter().any(|&l| l) {
            break;
        }
    }

    let mask = BinaryMask::from_bits(w, h, labels).expect("dimensions checked");
    Ok(GrabCutOutcome { mask, energies, iterations_run })
}
