use std::collections::VecDeque;

use super::BinaryMask;

const FAR: f64 = 1e20;

/// Squared Euclidean distance from every pixel to the nearest foreground
/// pixel (exact, separable lower-envelope transform). Empty masks yield
/// a very large value everywhere.
pub fn squared_distance_to_foreground(mask: &BinaryMask) -> Vec<f64> {
    let (w, h) = mask.dims();
    let mut grid: Vec<f64> = mask.bits().iter().map(|&b| if b { 0.0 } else { FAR }).collect();
    let mut line = vec![0.0; w.max(h)];
    let mut out = vec![0.0; w.max(h)];
    for x in 0..w {
        for y in 0..h {
            line[y] = grid[y * w + x];
        }
        lower_envelope(&line[..h], &mut out[..h]);
        for y in 0..h {
            grid[y * w + x] = out[y];
        }
    }
    for y in 0..h {
        line[..w].copy_from_slice(&grid[y * w..(y + 1) * w]);
        lower_envelope(&line[..w], &mut out[..w]);
        grid[y * w..(y + 1) * w].copy_from_slice(&out[..w]);
    }
    grid
}

fn lower_envelope(f: &[f64], d: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                // k == 0: replace the only parabola
                v[0] = q;
                z[1] = f64::INFINITY;
                break;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    k = 0;
    for (q, slot) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let diff = q as f64 - p as f64;
        *slot = diff * diff + f[p];
    }
}

/// Euclidean dilation by a disk of `radius` pixels.
pub fn dilate(mask: &BinaryMask, radius: usize) -> BinaryMask {
    let r2 = (radius * radius) as f64;
    let dist = squared_distance_to_foreground(mask);
    let bits = dist.iter().map(|&d| d <= r2).collect();
    BinaryMask::from_bits(mask.width(), mask.height(), bits).expect("same dimensions")
}

/// 8-connected component labels (0 = background, 1.. in raster order of
/// each component's first pixel) and the number of components.
pub fn component_labels(mask: &BinaryMask) -> (Vec<u32>, u32) {
    let (w, h) = mask.dims();
    let mut labels = vec![0u32; w * h];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !mask.bits()[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if mask.bits()[j] && labels[j] == 0 {
                        labels[j] = next;
                        queue.push_back(j);
                    }
                }
            }
        }
    }
    (labels, next)
}

/// Sets every background pixel that is not 4-connected to the frame border.
pub fn fill_holes(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = mask.dims();
    let mut outside = vec![false; w * h];
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            let border = x == 0 || y == 0 || x == w - 1 || y == h - 1;
            let i = y * w + x;
            if border && !mask.bits()[i] {
                outside[i] = true;
                queue.push_back(i);
            }
        }
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = (i % w, i / w);
        let mut visit = |j: usize| {
            if !mask.bits()[j] && !outside[j] {
                outside[j] = true;
                queue.push_back(j);
            }
        };
        if x > 0 {
            visit(i - 1);
        }
        if x + 1 < w {
            visit(i + 1);
        }
        if y > 0 {
            visit(i - w);
        }
        if y + 1 < h {
            visit(i + w);
        }
    }
    let bits = outside.iter().map(|&o| !o).collect();
    BinaryMask::from_bits(w, h, bits).expect("same dimensions")
}
