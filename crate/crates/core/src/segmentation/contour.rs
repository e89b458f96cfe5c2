use super::SegmentationError;
use crate::imaging::{component_labels, BinaryMask, Contour};

// Clockwise on screen (y grows downward), starting east.
const DIRS: [(i64, i64); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];
const WEST: usize = 4;

fn dir_index(v: (i64, i64)) -> usize {
    DIRS.iter().position(|&d| d == v).expect("unit 8-neighbour step")
}

/// Moore-neighbour trace of the outer boundary of the component labelled
/// `label`, starting at its raster-first pixel.
fn trace(labels: &[u32], width: usize, height: usize, label: u32, start: (i64, i64)) -> Vec<(i64, i64)> {
    let inside = |(x, y): (i64, i64)| {
        x >= 0 && y >= 0 && x < width as i64 && y < height as i64 && labels[y as usize * width + x as usize] == label
    };
    let mut points = vec![start];
    let mut cur = start;
    // The raster-first pixel always has background to its west.
    let mut back = WEST;
    let mut first_step: Option<(i64, i64)> = None;
    loop {
        let found = (1..=8).map(|k| (back + k) % 8).find(|&d| inside((cur.0 + DIRS[d].0, cur.1 + DIRS[d].1)));
        let Some(d) = found else { return points };
        let next = (cur.0 + DIRS[d].0, cur.1 + DIRS[d].1);
        if cur == start {
            match first_step {
                None => first_step = Some(next),
                Some(p1) if p1 == next => break,
                Some(_) => {}
            }
        }
        let prev = DIRS[(d + 7) % 8];
        back = dir_index((prev.0 - DIRS[d].0, prev.1 - DIRS[d].1));
        cur = next;
        points.push(cur);
    }
    // The walk re-enters the start pixel before detecting the repeat step.
    if points.len() > 1 && points.last() == Some(&start) {
        points.pop();
    }
    points
}

/// One outer contour per 8-connected foreground component, in raster order
/// of the components' first pixels. Components whose boundary has fewer than
/// three pixels (isolated specks, two-pixel runs) are not closed polygons
/// and are skipped.
pub fn extract_contours(mask: &BinaryMask) -> Vec<Contour> {
    let (w, h) = mask.dims();
    let (labels, count) = component_labels(mask);
    let mut starts = vec![None; count as usize + 1];
    for (i, &l) in labels.iter().enumerate() {
        if l != 0 && starts[l as usize].is_none() {
            starts[l as usize] = Some(((i % w) as i64, (i / w) as i64));
        }
    }
    (1..=count)
        .filter_map(|label| {
            let start = starts[label as usize].expect("every label has a pixel");
            Contour::new(trace(&labels, w, h, label, start))
        })
        .collect()
}

/// Shoelace area over the contour vertices.
pub fn contour_area(contour: &Contour) -> Result<f64, SegmentationError> {
    let pts = contour.points();
    if pts.len() < 3 {
        return Err(SegmentationError::DegenerateContour);
    }
    let twice: i64 = (0..pts.len())
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % pts.len()]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum();
    Ok(twice.abs() as f64 / 2.0)
}

/// Closed arc length: 1 per axis step, sqrt(2) per diagonal step.
pub fn contour_perimeter(contour: &Contour) -> Result<f64, SegmentationError> {
    let pts = contour.points();
    if pts.len() < 3 {
        return Err(SegmentationError::DegenerateContour);
    }
    Ok((0..pts.len())
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % pts.len()]);
            ((a.0 - b.0) as f64).hypot((a.1 - b.1) as f64)
        })
        .sum())
}

/// Contour with the largest enclosed area; the first one wins ties.
pub fn largest_contour(contours: &[Contour]) -> Result<&Contour, SegmentationError> {
    let mut best: Option<(&Contour, f64)> = None;
    for c in contours {
        let area = contour_area(c)?;
        if best.is_none_or(|(_, a)| area > a) {
            best = Some((c, area));
        }
    }
    best.map(|(c, _)| c).ok_or(SegmentationError::NoLesion)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::mask_area;
    use proptest::prelude::*;

    fn square(x0: usize, y0: usize, side: usize, w: usize, h: usize) -> BinaryMask {
        BinaryMask::from_fn(w, h, |x, y| x >= x0 && x < x0 + side && y >= y0 && y < y0 + side).unwrap()
    }

    fn disk(cx: i64, cy: i64, r: i64, w: usize, h: usize) -> BinaryMask {
        BinaryMask::from_fn(w, h, |x, y| (x as i64 - cx).pow(2) + (y as i64 - cy).pow(2) <= r * r).unwrap()
    }

    /// Pick's theorem: pixels on or inside a simple lattice polygon whose
    /// boundary lattice points are exactly its vertices.
    fn pick_pixel_count(c: &Contour) -> f64 {
        contour_area(c).unwrap() + c.len() as f64 / 2.0 + 1.0
    }

    #[test]
    fn empty_mask_has_no_contours() {
        assert!(extract_contours(&BinaryMask::new(8, 8).unwrap()).is_empty());
    }

    #[test]
    fn five_by_five_square_has_sixteen_boundary_pixels() {
        let m = square(2, 3, 5, 10, 10);
        let cs = extract_contours(&m);
        assert_eq!(cs.len(), 1);
        let c = &cs[0];
        assert_eq!(c.len(), 16);
        let mut expected: Vec<(i64, i64)> = Vec::new();
        for y in 3..8i64 {
            for x in 2..7i64 {
                if x == 2 || x == 6 || y == 3 || y == 7 {
                    expected.push((x, y));
                }
            }
        }
        let mut got = c.points().to_vec();
        got.sort();
        expected.sort();
        assert_eq!(got, expected);
        assert_eq!(contour_area(c).unwrap(), 16.0);
        assert_eq!(contour_perimeter(c).unwrap(), 16.0);
    }

    #[test]
    fn two_blobs_give_two_contours_matching_component_sizes() {
        let a = square(1, 1, 6, 30, 20);
        let b = disk(20, 10, 6, 30, 20);
        let m = a.or(&b).unwrap();
        let cs = extract_contours(&m);
        assert_eq!(cs.len(), 2);
        assert_eq!(pick_pixel_count(&cs[0]), mask_area(&a) as f64);
        assert_eq!(pick_pixel_count(&cs[1]), mask_area(&b) as f64);
    }

    #[test]
    fn contours_are_closed_and_eight_connected() {
        let m = disk(20, 20, 9, 41, 41).or(&square(0, 0, 3, 41, 41)).unwrap();
        for c in extract_contours(&m) {
            assert!(Contour::new(c.points().to_vec()).is_some());
        }
    }

    #[test]
    fn specks_are_skipped() {
        let mut m = square(5, 5, 4, 20, 20);
        m.set(15, 15, true);
        assert_eq!(extract_contours(&m).len(), 1);
    }

    #[test]
    fn analytic_polygons() {
        let sq = Contour::polygon(vec![(0, 0), (10, 0), (10, 10), (0, 10)]).unwrap();
        assert_eq!(contour_area(&sq).unwrap(), 100.0);
        assert_eq!(contour_perimeter(&sq).unwrap(), 40.0);
        let diamond = Contour::polygon(vec![(5, 0), (10, 5), (5, 10), (0, 5)]).unwrap();
        assert_eq!(contour_area(&diamond).unwrap(), 50.0);
        assert!((contour_perimeter(&diamond).unwrap() - 4.0 * 50f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn traced_square_contour_gives_vertex_polygon_measures() {
        // An 11x11 pixel square has a 10x10 polygon through its boundary centers.
        let c = &extract_contours(&square(3, 3, 11, 20, 20))[0];
        assert_eq!(contour_area(c).unwrap(), 100.0);
        assert_eq!(contour_perimeter(c).unwrap(), 40.0);
    }

    #[test]
    fn disk_perimeter_within_five_percent() {
        let c = &extract_contours(&disk(60, 60, 40, 121, 121))[0];
        let p = contour_perimeter(c).unwrap();
        let target = 2.0 * std::f64::consts::PI * 40.0;
        assert!((p - target).abs() / target < 0.05, "perimeter {p}");
    }

    #[test]
    fn largest_contour_selection() {
        let make = |side: i64| {
            Contour::polygon(vec![(0, 0), (side, 0), (side, side), (0, side)]).unwrap()
        };
        let single = vec![make(3)];
        assert_eq!(largest_contour(&single).unwrap(), &single[0]);
        // areas 30, 120, 7
        let cs = vec![
            Contour::polygon(vec![(0, 0), (5, 0), (5, 6), (0, 6)]).unwrap(),
            Contour::polygon(vec![(0, 0), (10, 0), (10, 12), (0, 12)]).unwrap(),
            Contour::polygon(vec![(0, 0), (7, 0), (7, 1), (0, 1)]).unwrap(),
        ];
        assert_eq!(contour_area(largest_contour(&cs).unwrap()).unwrap(), 120.0);
        assert_eq!(largest_contour(&[]), Err(SegmentationError::NoLesion));
        // Tie: the first wins.
        let tie = vec![make(4), Contour::polygon(vec![(9, 9), (13, 9), (13, 13), (9, 13)]).unwrap()];
        assert_eq!(largest_contour(&tie).unwrap(), &tie[0]);
    }

    proptest! {
        #[test]
        fn largest_contour_agrees_with_exhaustive_and_is_permutation_invariant(
            sizes in proptest::collection::vec((3i64..40, 3i64..40), 1..8),
            rot in 0usize..8,
        ) {
            let cs: Vec<Contour> = sizes.iter().map(|&(a, b)| {
                Contour::polygon(vec![(0, 0), (a, 0), (a, b), (0, b)]).unwrap()
            }).collect();
            let areas: Vec<f64> = cs.iter().map(|c| contour_area(c).unwrap()).collect();
            let max = areas.iter().cloned().fold(f64::MIN, f64::max);
            let first = areas.iter().position(|&a| a == max).unwrap();
            prop_assert_eq!(largest_contour(&cs).unwrap(), &cs[first]);
            let mut rotated = cs.clone();
            rotated.rotate_left(rot % cs.len());
            prop_assert_eq!(contour_area(largest_contour(&rotated).unwrap()).unwrap(), max);
        }

        #[test]
        fn contour_area_covers_most_of_large_blobs(
            a in 20.0f64..50.0, b in 20.0f64..50.0, theta in 0.0f64..3.2,
        ) {
            let (s, c) = theta.sin_cos();
            let m = BinaryMask::from_fn(120, 120, |x, y| {
                let (dx, dy) = (x as f64 - 60.0, y as f64 - 60.0);
                let u = dx * c + dy * s;
                let v = -dx * s + dy * c;
                (u / a).powi(2) + (v / b).powi(2) <= 1.0
            }).unwrap();
            let total: f64 = extract_contours(&m).iter().map(|c| contour_area(c).unwrap()).sum();
            prop_assert!(total >= 0.9 * mask_area(&m) as f64);
        }
    }
}
