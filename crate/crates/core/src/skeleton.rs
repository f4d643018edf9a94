//! Topology-preserving thinning to a one-pixel-wide, 8-connected skeleton.
//!
//! The algorithm is sequential morphological thinning with an explicit
//! simple-point test: border pixels are peeled in four directional passes
//! (north, south, east, west) and a pixel is deleted only when
//!
//! * it is *simple* — removing it changes neither the number of 8-connected
//!   foreground components nor the number of 4-connected background
//!   components in its 3x3 neighborhood (Kong & Rosenfeld's characterization
//!   of deletable pixels under (8, 4) connectivity), and
//! * it is not an *endpoint* (exactly one foreground neighbor); keeping
//!   endpoints preserves the medial-axis branch tips.
//!
//! Because deletion happens one pixel at a time with the simple-point test
//! re-evaluated against the current raster, the skeleton provably has the
//! same component and hole structure as the input. The four directional
//! passes keep the result centered on the medial axis, and fixed raster scan
//! order makes the output deterministic.

use crate::raster::{BitRaster, NEIGHBORS4, NEIGHBORS8};

/// Lookup table over the 256 possible 8-neighborhood patterns:
/// `SIMPLE[mask]` is true when a foreground pixel with that neighbor
/// configuration is simple.
fn simple_point_table() -> [bool; 256] {
    let mut table = [false; 256];
    for (mask, entry) in table.iter_mut().enumerate() {
        *entry = is_simple_pattern(mask as u8);
    }
    table
}

/// Decide simpleness of one neighborhood pattern by counting components
/// among the eight ring cells directly.
fn is_simple_pattern(mask: u8) -> bool {
    let fg: Vec<usize> = (0..8).filter(|i| mask & (1 << i) != 0).collect();
    let bg: Vec<usize> = (0..8).filter(|i| mask & (1 << i) == 0).collect();
    if fg.is_empty() {
        // Isolated pixel: deleting it removes a component.
        return false;
    }
    // Foreground must form exactly one 8-connected piece.
    if count_components(&fg, |a, b| cells_adjacent(a, b, true)) != 1 {
        return false;
    }
    // Background pieces (4-connectivity) that touch a 4-neighbor of the
    // center must number exactly one, otherwise deletion opens or merges a
    // background region (e.g. the center of a plus sign).
    let touching: Vec<usize> = {
        let comps = component_labels(&bg, |a, b| cells_adjacent(a, b, false));
        let mut seen = std::collections::BTreeSet::new();
        for (idx, &cell) in bg.iter().enumerate() {
            // Odd ring indices are the 4-neighbors (N, E, S, W).
            if cell % 2 == 1 {
                seen.insert(comps[idx]);
            }
        }
        seen.into_iter().collect()
    };
    touching.len() == 1
}

/// True when ring cells `a` and `b` are adjacent in the raster
/// (8-adjacency for foreground, 4-adjacency for background).
fn cells_adjacent(a: usize, b: usize, eight: bool) -> bool {
    let (ar, ac) = NEIGHBORS8[a];
    let (br, bc) = NEIGHBORS8[b];
    let (dr, dc) = ((ar - br).abs(), (ac - bc).abs());
    if eight {
        dr <= 1 && dc <= 1 && (dr | dc) != 0
    } else {
        dr + dc == 1
    }
}

fn component_labels(cells: &[usize], adj: impl Fn(usize, usize) -> bool) -> Vec<usize> {
    let n = cells.len();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        label[start] = next;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if label[j] == usize::MAX && adj(cells[i], cells[j]) {
                    label[j] = next;
                    stack.push(j);
                }
            }
        }
        next += 1;
    }
    label
}

fn count_components(cells: &[usize], adj: impl Fn(usize, usize) -> bool) -> usize {
    if cells.is_empty() {
        return 0;
    }
    *component_labels(cells, adj).iter().max().unwrap() + 1
}

/// Thin a binary raster to its one-pixel-wide skeleton.
///
/// The result is 8-connected, preserves the component and hole structure of
/// the input, and is idempotent on rasters that are already thin.
pub fn skeletonize(mask: &BitRaster) -> BitRaster {
    let table = simple_point_table();
    let mut sk = mask.clone();
    loop {
        let mut changed = false;
        for (dir_r, dir_c) in NEIGHBORS4 {
            // Border pixels of this direction, collected before any deletion
            // so each subpass peels at most one pixel layer; testing the
            // border on the evolving raster instead would cascade through
            // the whole shape within a single scan.
            let mut border = Vec::new();
            for r in 0..sk.rows() as i64 {
                for c in 0..sk.cols() as i64 {
                    if sk.get(r, c) && !sk.get(r + dir_r, c + dir_c) {
                        border.push((r, c));
                    }
                }
            }
            // Delete sequentially, re-testing against the current raster so
            // connectivity is preserved exactly.
            for (r, c) in border {
                let m = sk.neighbor_mask(r, c);
                if m.count_ones() == 1 {
                    continue; // endpoint
                }
                if table[m as usize] {
                    sk.set(r as usize, c as usize, false);
                    changed = true;
                }
            }
        }
        if !changed {
            return sk;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Px;

    fn bar(rows: usize, cols: usize, r0: usize, r1: usize, c0: usize, c1: usize) -> BitRaster {
        let mut g = BitRaster::new(rows, cols);
        for r in r0..r1 {
            for c in c0..c1 {
                g.set(r, c, true);
            }
        }
        g
    }

    fn is_chain(sk: &BitRaster) -> bool {
        sk.fg_pixels().iter().all(|&p| sk.degree8(p) <= 2)
    }

    #[test]
    fn horizontal_bar_thins_to_midline_chain() {
        // 5-pixel-thick, 50-pixel-long bar with margins.
        let g = bar(11, 60, 3, 8, 5, 55);
        let sk = skeletonize(&g);
        let px = sk.fg_pixels();
        assert_eq!(sk.components8().len(), 1);
        assert!(is_chain(&sk), "skeleton of a bar must be a simple chain");
        assert!(
            (44..=52).contains(&px.len()),
            "expected roughly 50 pixels, got {}",
            px.len()
        );
        assert!(
            px.iter().all(|p| p.row == 5),
            "chain must sit on the midline"
        );
    }

    #[test]
    fn crossing_bars_keep_a_degree_four_pixel() {
        // Two 3-pixel-thick bars crossing at the center.
        let mut g = bar(31, 31, 14, 17, 2, 29);
        for r in 2..29 {
            for c in 14..17 {
                g.set(r, c, true);
            }
        }
        let sk = skeletonize(&g);
        assert_eq!(sk.components8().len(), 1);
        // The crossing itself: four 4-neighbors, no diagonals.
        assert!(sk.get_px(Px::new(15, 15)));
        assert_eq!(sk.degree8(Px::new(15, 15)), 4);
        // On an 8-connected lattice the pixels flanking the crossing also
        // reach degree >= 3 through diagonals; together they must form one
        // small branching cluster around the center, and every pixel outside
        // it must be chain-like.
        let branching: Vec<Px> = sk
            .fg_pixels()
            .into_iter()
            .filter(|&p| sk.degree8(p) >= 3)
            .collect();
        assert!(branching.contains(&Px::new(15, 15)));
        assert!(
            branching.len() <= 5,
            "branching cluster too large: {branching:?}"
        );
        for p in &branching {
            assert!(
                p.dist(&Px::new(15, 15)) <= 1.5,
                "stray branching pixel {p:?}"
            );
        }
    }

    #[test]
    fn component_count_is_preserved() {
        let mut g = BitRaster::new(40, 40);
        // Three separated blobs of different shapes.
        for r in 2..8 {
            for c in 2..20 {
                g.set(r, c, true);
            }
        }
        g.fill_disc(Px::new(25, 10), 5.0);
        for i in 0..10 {
            g.set(20 + i, 25 + i, true);
            g.set(21 + i, 25 + i, true);
        }
        let before = g.components8().len();
        let sk = skeletonize(&g);
        assert_eq!(sk.components8().len(), before);
    }

    #[test]
    fn holes_are_preserved() {
        // Thick annulus: background components (outside + hole) must survive.
        let mut g = BitRaster::new(41, 41);
        g.fill_disc(Px::new(20, 20), 15.0);
        for r in 0..41 {
            for c in 0..41 {
                let d2 = (r as f64 - 20.0).powi(2) + (c as f64 - 20.0).powi(2);
                if d2 <= 8.0 * 8.0 {
                    g.set(r, c, false);
                }
            }
        }
        let bg_before = g.background_components4().len();
        let sk = skeletonize(&g);
        assert_eq!(sk.background_components4().len(), bg_before);
        // A ring skeleton has no endpoints.
        assert!(sk.fg_pixels().iter().all(|&p| sk.degree8(p) == 2));
    }

    #[test]
    fn idempotent_on_thin_chains() {
        let mut g = BitRaster::new(20, 20);
        for i in 0..12 {
            g.set(3 + i, 4 + i, true);
        }
        for i in 0..5 {
            g.set(3, 4 + i, true);
        }
        let once = skeletonize(&g);
        let twice = skeletonize(&once);
        assert_eq!(once, twice);
    }

    #[test]
    fn single_pixel_survives() {
        let mut g = BitRaster::new(5, 5);
        g.set(2, 2, true);
        let sk = skeletonize(&g);
        assert_eq!(sk.count(), 1);
        assert!(sk.get(2, 2));
    }
}
