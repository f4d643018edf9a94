//! Pruning, rooting, and assembly of the centerline forest.
//!
//! [`prune_and_root`] removes the skeleton pixels inside the optic-disc
//! ellipse (where arteries and veins overlap and the centerline is
//! meaningless), discards tiny leftovers, and picks one root per remaining
//! component: the pixel closest to the disc center, which is where the
//! central retinal artery enters the image.
//!
//! [`build_graph`] turns the rooted skeleton into a [`CenterlineGraph`]:
//! branching pixels are clustered into vertices, chains are traced into
//! edges, cycles (segmentation artifacts) are broken by dropping, per cycle,
//! the edge with the smallest mean radius (a maximum-radius spanning forest),
//! and everything is oriented away from the roots.

use crate::error::{Error, Result};
use crate::graph::{CenterlineGraph, Edge, RPix, Tree, Vertex, VertexKind};
use crate::mask::ArteryMask;
use crate::radii::{estimate_radii, RadiusMap};
use crate::raster::{BitRaster, Ellipse, Px, NEIGHBORS8};
use crate::scalar::Real;
use crate::skeleton::skeletonize;

/// Skeleton components with fewer centerline pixels than this are treated as
/// segmentation noise and discarded during pruning.
pub const MIN_COMPONENT_PIXELS: usize = 10;

/// Remove centerline pixels inside the optic-disc ellipse, drop components
/// smaller than [`MIN_COMPONENT_PIXELS`], and select one root per surviving
/// component (the pixel nearest the disc center; ties break toward the
/// lowest row, then column).
///
/// Returns the pruned centerline and the roots sorted by `(row, col)`.
pub fn prune_and_root(centerline: &BitRaster, od: &Ellipse) -> Result<(BitRaster, Vec<Px>)> {
    let mut pruned = centerline.clone();
    for p in centerline.fg_pixels() {
        if od.contains(p) {
            pruned.set_px(p, false);
        }
    }
    let mut roots = Vec::new();
    for comp in pruned.components8() {
        if comp.len() < MIN_COMPONENT_PIXELS {
            for p in comp {
                pruned.set_px(p, false);
            }
            continue;
        }
        let root = comp
            .iter()
            .copied()
            .min_by(|a, b| {
                od.center_dist(*a)
                    .partial_cmp(&od.center_dist(*b))
                    .unwrap()
                    .then(a.cmp(b))
            })
            .expect("component is non-empty");
        roots.push(root);
    }
    if roots.is_empty() {
        return Err(Error::NoArterialTree(
            "pruning left no component with at least 10 centerline pixels".into(),
        ));
    }
    roots.sort();
    Ok((pruned, roots))
}

/// End of a traced chain before vertex resolution.
enum RawEnd {
    Vertex(usize),
    Free(Px),
}

struct RawEdge {
    from: usize,
    to: usize,
    /// Chain pixels in trace order (from `from` toward `to`).
    pixels: Vec<Px>,
}

pub(crate) struct DisjointSet(Vec<usize>);

impl DisjointSet {
    pub(crate) fn new(n: usize) -> Self {
        DisjointSet((0..n).collect())
    }
    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra] = rb;
        true
    }
}

/// Assemble the rooted centerline forest from a pruned skeleton, its radius
/// map, and one root per component.
///
/// Fails with [`Error::RootMismatch`] when the roots do not line up
/// one-to-one with the skeleton components, and with
/// [`Error::InvalidCenterline`] when a centerline pixel has no positive
/// radius (i.e. lies on mask background). Components that reduce to a bare
/// root with no edges (possible when every chain of a pure loop is dropped)
/// are omitted from the result.
pub fn build_graph<T: Real>(
    centerline: &BitRaster,
    radii: &RadiusMap<T>,
    roots: &[Px],
    pixel_pitch_um: T,
) -> Result<CenterlineGraph<T>> {
    if centerline.count() == 0 {
        return Err(Error::EmptyInput("centerline raster is empty".into()));
    }
    if roots.is_empty() {
        return Err(Error::RootMismatch("no roots supplied".into()));
    }
    let comps = centerline.components8();
    // Map pixel -> component index.
    let mut comp_of = vec![usize::MAX; centerline.rows() * centerline.cols()];
    for (ci, comp) in comps.iter().enumerate() {
        for p in comp {
            comp_of[p.row as usize * centerline.cols() + p.col as usize] = ci;
        }
    }
    let mut root_of_comp = vec![None; comps.len()];
    for &root in roots {
        if !centerline.get_px(root) {
            return Err(Error::RootMismatch(format!(
                "root ({}, {}) is not a centerline pixel",
                root.row, root.col
            )));
        }
        let ci = comp_of[root.row as usize * centerline.cols() + root.col as usize];
        if root_of_comp[ci].replace(root).is_some() {
            return Err(Error::RootMismatch(format!(
                "component {ci} has more than one root"
            )));
        }
    }
    if root_of_comp.iter().any(|r| r.is_none()) {
        return Err(Error::RootMismatch(format!(
            "{} components but {} roots",
            comps.len(),
            roots.len()
        )));
    }

    let radius_at = |p: Px| -> Result<T> {
        let r = radii.get(p);
        if r > T::zero() {
            Ok(r)
        } else {
            Err(Error::InvalidCenterline(format!(
                "centerline pixel ({}, {}) has no positive radius",
                p.row, p.col
            )))
        }
    };

    let mut trees = Vec::new();
    // Process components in root order for a deterministic tree sequence.
    let mut order: Vec<usize> = (0..comps.len()).collect();
    order.sort_by_key(|&ci| root_of_comp[ci].unwrap());
    for ci in order {
        let root = root_of_comp[ci].unwrap();
        if let Some(tree) = build_tree(centerline, &comps[ci], root, &radius_at)? {
            trees.push(tree);
        }
    }
    if trees.is_empty() {
        return Err(Error::NoArterialTree(
            "every component degenerated to a bare root".into(),
        ));
    }
    let graph = CenterlineGraph {
        pixel_pitch_um,
        trees,
    };
    debug_assert_eq!(graph.validate(), Ok(()));
    Ok(graph)
}

fn build_tree<T: Real>(
    sk: &BitRaster,
    comp: &[Px],
    root: Px,
    radius_at: &impl Fn(Px) -> Result<T>,
) -> Result<Option<Tree<T>>> {
    use std::collections::{HashMap, HashSet};

    // --- classify pixels and build bifurcation-cluster vertices ---
    let mut branching: Vec<Px> = comp
        .iter()
        .copied()
        .filter(|&p| sk.degree8(p) >= 3)
        .collect();
    branching.sort();
    let branch_set: HashSet<Px> = branching.iter().copied().collect();

    let mut vertices: Vec<Vertex<T>> = Vec::new();
    let mut owner: HashMap<Px, usize> = HashMap::new();
    let mut cluster_seen: HashSet<Px> = HashSet::new();
    for &seed in &branching {
        if cluster_seen.contains(&seed) {
            continue;
        }
        let mut cluster = vec![seed];
        cluster_seen.insert(seed);
        let mut queue = std::collections::VecDeque::from([seed]);
        while let Some(p) = queue.pop_front() {
            for n in sk.neighbors8(p) {
                if branch_set.contains(&n) && cluster_seen.insert(n) {
                    cluster.push(n);
                    queue.push_back(n);
                }
            }
        }
        cluster.sort();
        let idx = vertices.len();
        let centroid_r = cluster.iter().map(|p| p.row as f64).sum::<f64>() / cluster.len() as f64;
        let centroid_c = cluster.iter().map(|p| p.col as f64).sum::<f64>() / cluster.len() as f64;
        let rep = cluster
            .iter()
            .copied()
            .min_by(|a, b| {
                let da = (a.row as f64 - centroid_r).powi(2) + (a.col as f64 - centroid_c).powi(2);
                let db = (b.row as f64 - centroid_r).powi(2) + (b.col as f64 - centroid_c).powi(2);
                da.partial_cmp(&db).unwrap().then(a.cmp(b))
            })
            .unwrap();
        let mut pixels = Vec::with_capacity(cluster.len());
        for &p in &cluster {
            pixels.push(RPix {
                px: p,
                radius_cm: radius_at(p)?,
            });
            owner.insert(p, idx);
        }
        vertices.push(Vertex {
            kind: VertexKind::Bifurcation,
            pixels,
            rep,
            rep_radius_cm: radius_at(rep)?,
            parent_edge: None,
            child_edges: Vec::new(),
        });
    }

    // --- root vertex ---
    let root_deg = sk.degree8(root);
    let mut root_virtual = false;
    let root_vi = if let Some(&vi) = owner.get(&root) {
        vertices[vi].kind = VertexKind::Root { branching: true };
        vi
    } else if root_deg == 2 {
        // Mid-chain root: promote to a real vertex so the chain splits here.
        let vi = vertices.len();
        owner.insert(root, vi);
        vertices.push(Vertex {
            kind: VertexKind::Root { branching: false },
            pixels: vec![RPix {
                px: root,
                radius_cm: radius_at(root)?,
            }],
            rep: root,
            rep_radius_cm: radius_at(root)?,
            parent_edge: None,
            child_edges: Vec::new(),
        });
        vi
    } else {
        // Chain-end root: virtual vertex, the pixel stays with its edge.
        root_virtual = true;
        let vi = vertices.len();
        vertices.push(Vertex {
            kind: VertexKind::Root { branching: false },
            pixels: Vec::new(),
            rep: root,
            rep_radius_cm: radius_at(root)?,
            parent_edge: None,
            child_edges: Vec::new(),
        });
        vi
    };

    // --- trace chains into raw edges ---
    let mut visited: HashSet<Px> = HashSet::new();
    let mut raw: Vec<RawEdge> = Vec::new();
    let resolve_free = |vertices: &mut Vec<Vertex<T>>, p: Px| -> Result<usize> {
        if root_virtual && p == root {
            return Ok(root_vi);
        }
        let vi = vertices.len();
        vertices.push(Vertex {
            kind: VertexKind::Terminal,
            pixels: Vec::new(),
            rep: p,
            rep_radius_cm: radius_at(p)?,
            parent_edge: None,
            child_edges: Vec::new(),
        });
        Ok(vi)
    };

    let trace = |visited: &mut HashSet<Px>, prev: Px, start: Px| -> (Vec<Px>, RawEnd) {
        let mut pixels = vec![start];
        visited.insert(start);
        let (mut prev, mut cur) = (prev, start);
        loop {
            let mut next = None;
            for n in sk.neighbors8(cur) {
                if n != prev {
                    next = Some(n);
                    break;
                }
            }
            match next {
                None => return (pixels, RawEnd::Free(cur)),
                Some(n) if owner.contains_key(&n) => {
                    return (pixels, RawEnd::Vertex(owner[&n]));
                }
                Some(n) => {
                    debug_assert!(!visited.contains(&n), "chain revisited a pixel");
                    visited.insert(n);
                    pixels.push(n);
                    prev = cur;
                    cur = n;
                }
            }
        }
    };

    let owned_order: Vec<(usize, Px)> = {
        let mut v: Vec<(usize, Px)> = owner.iter().map(|(&p, &vi)| (vi, p)).collect();
        v.sort_by_key(|&(vi, p)| (vi, p));
        v
    };
    for (vi, vp) in owned_order {
        for (dr, dc) in NEIGHBORS8 {
            let (r, c) = (vp.row as i64 + dr, vp.col as i64 + dc);
            if !sk.get(r, c) {
                continue;
            }
            let q = Px::new(r as u32, c as u32);
            if owner.contains_key(&q) || visited.contains(&q) {
                continue;
            }
            let (pixels, end) = trace(&mut visited, vp, q);
            let to = match end {
                RawEnd::Vertex(w) => w,
                RawEnd::Free(p) => resolve_free(&mut vertices, p)?,
            };
            raw.push(RawEdge {
                from: vi,
                to,
                pixels,
            });
        }
    }
    // Bare-chain component: no owned pixels anywhere, so nothing was seeded.
    if root_virtual && raw.is_empty() && owner.is_empty() {
        if sk.degree8(root) == 0 {
            return Ok(None); // isolated pixel, nothing to build
        }
        // Start from the root pixel itself; `trace` needs a previous pixel,
        // so step manually to the root's single neighbor.
        visited.insert(root);
        let first = sk.neighbors8(root)[0];
        let (mut pixels, end) = trace(&mut visited, root, first);
        pixels.insert(0, root);
        let to = match end {
            RawEnd::Vertex(w) => w,
            RawEnd::Free(p) => resolve_free(&mut vertices, p)?,
        };
        raw.push(RawEdge {
            from: root_vi,
            to,
            pixels,
        });
    }

    // --- cycle breaking: maximum-mean-radius spanning forest ---
    let mut with_radius: Vec<(usize, T)> = Vec::with_capacity(raw.len());
    for (i, e) in raw.iter().enumerate() {
        let mut sum = T::zero();
        for &p in &e.pixels {
            sum += radius_at(p)?;
        }
        with_radius.push((i, sum / T::from_usize_lossy(e.pixels.len())));
    }
    // Sort descending by mean radius; ties resolve by trace order so the
    // result never depends on float comparison quirks.
    with_radius.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut dsu = DisjointSet::new(vertices.len());
    let mut keep = vec![false; raw.len()];
    for (i, _) in with_radius {
        if dsu.union(raw[i].from, raw[i].to) {
            keep[i] = true;
        }
    }

    // --- orient away from the root ---
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); vertices.len()];
    for (i, e) in raw.iter().enumerate() {
        if keep[i] {
            incident[e.from].push(i);
            incident[e.to].push(i);
        }
    }
    let mut edges: Vec<Edge<T>> = Vec::new();
    let mut v_done = vec![false; vertices.len()];
    let mut e_done = vec![false; raw.len()];
    v_done[root_vi] = true;
    let mut queue = std::collections::VecDeque::from([root_vi]);
    while let Some(vi) = queue.pop_front() {
        for &ri in &incident[vi] {
            if e_done[ri] {
                continue;
            }
            e_done[ri] = true;
            let r = &raw[ri];
            let other = if r.from == vi { r.to } else { r.from };
            let mut chain = r.pixels.clone();
            if r.from != vi {
                chain.reverse();
            }
            let mut pixels = Vec::with_capacity(chain.len());
            for p in chain {
                pixels.push(RPix {
                    px: p,
                    radius_cm: radius_at(p)?,
                });
            }
            let ei = edges.len();
            edges.push(Edge {
                from: vi,
                to: other,
                pixels,
            });
            vertices[vi].child_edges.push(ei);
            vertices[other].parent_edge = Some(ei);
            debug_assert!(!v_done[other], "spanning forest left a cycle");
            v_done[other] = true;
            queue.push_back(other);
        }
    }

    // Components that collapse to a bare root (e.g. a pure loop whose single
    // self-looping chain was dropped) produce no usable tree.
    if edges.is_empty() {
        return Ok(None);
    }

    // Prune vertices never reached (endpoints of dropped self-loops don't
    // exist; all reachable vertices are kept, so just remap indices).
    let mut remap = vec![usize::MAX; vertices.len()];
    let mut final_vertices = Vec::new();
    for (vi, v) in vertices.into_iter().enumerate() {
        if v_done[vi] {
            remap[vi] = final_vertices.len();
            final_vertices.push(v);
        }
    }
    for e in &mut edges {
        e.from = remap[e.from];
        e.to = remap[e.to];
    }

    // --- finalize vertex kinds from the oriented structure ---
    for v in final_vertices.iter_mut() {
        if v.is_root() {
            continue;
        }
        v.kind = match v.child_edges.len() {
            0 => VertexKind::Terminal,
            1 => VertexKind::Junction,
            _ => VertexKind::Bifurcation,
        };
    }

    Ok(Some(Tree {
        root: remap[root_vi],
        vertices: final_vertices,
        edges,
    }))
}

/// Full extraction pipeline: skeletonize the mask, estimate radii, prune at
/// the optic disc, and build the rooted forest.
pub fn extract_graph<T: Real>(mask: &ArteryMask<T>) -> Result<CenterlineGraph<T>> {
    let sk = skeletonize(&mask.grid);
    let (pruned, roots) = prune_and_root(&sk, &mask.od_ellipse)?;
    let radii = estimate_radii(mask, &pruned)?;
    build_graph(&pruned, &radii, &roots, mask.pixel_pitch_um)
}
