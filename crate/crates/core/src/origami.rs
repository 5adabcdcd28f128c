//! Crease-pattern descriptor for facial landmarks.
//!
//! Landmarks of the brows, eyes, nose and mouth are linked into a metric
//! tree. Its leaves are laid out on a rectangle in doubling-cycle order, and
//! that polygon is shrunk at unit speed. Two events reshape it on the way:
//! consecutive vertices that meet are merged (contraction), and two
//! non-consecutive leaves whose boundary distance drops to their reduced
//! tree distance are joined by a new edge that cuts the polygon in two
//! (split). The traced vertex trajectories and split edges form the crease
//! pattern, which is encoded as fixed-length complex vectors.
//!
//! Tree distances are reduced as the polygon shrinks: at inset `h` the
//! relevant distance between leaves `a` and `b` is `d_T(a, b) - 2h`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::{atan2, ceil, cos, hypot, sin, sqrt};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dataio::{validate_frame, Point};
use crate::error::{param, Error, Result};
use crate::features::{FeatureTag, FeatureVector};
use crate::preprocess::normalize_to_nose;

fn dist(a: Point, b: Point) -> f64 {
    hypot(a[0] - b[0], a[1] - b[1])
}

/// Rooted metric tree over 2D points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowTree {
    /// Caller-facing label per node (the landmark index for face trees).
    pub labels: Vec<usize>,
    pub positions: Vec<Point>,
    pub parent: Vec<Option<usize>>,
    /// Length of the edge to the parent; 0 for the root.
    pub parent_len: Vec<f64>,
    /// Children in traversal order.
    pub children: Vec<Vec<usize>>,
    pub root: usize,
    depth: Vec<usize>,
    root_dist: Vec<f64>,
}

impl ShadowTree {
    /// Builds a tree from `(parent, child)` links over `positions`. Children
    /// are visited in link order. Edge lengths are Euclidean, floored at
    /// `min_len`.
    pub fn from_links(
        positions: Vec<Point>,
        labels: Vec<usize>,
        root: usize,
        links: &[(usize, usize)],
        min_len: f64,
    ) -> Result<Self> {
        let n = positions.len();
        if labels.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: labels.len(),
            });
        }
        if root >= n {
            return Err(param("root out of range"));
        }
        let mut parent = vec![None; n];
        let mut parent_len = vec![0.0; n];
        let mut children = vec![Vec::new(); n];
        for &(p, c) in links {
            if p >= n || c >= n || p == c {
                return Err(param(format!("invalid tree link ({p}, {c})")));
            }
            if c == root || parent[c].is_some() {
                return Err(param(format!("node {c} has two parents")));
            }
            parent[c] = Some(p);
            parent_len[c] = dist(positions[p], positions[c]).max(min_len);
            children[p].push(c);
        }
        let mut tree = Self {
            labels,
            positions,
            parent,
            parent_len,
            children,
            root,
            depth: vec![0; n],
            root_dist: vec![0.0; n],
        };
        // Reachability from the root also rules out cycles, since every
        // non-root node has exactly one parent.
        let mut seen = vec![false; n];
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            seen[v] = true;
            for &c in &tree.children[v] {
                tree.depth[c] = tree.depth[v] + 1;
                tree.root_dist[c] = tree.root_dist[v] + tree.parent_len[c];
                stack.push(c);
            }
        }
        if let Some(v) = seen.iter().position(|s| !s) {
            return Err(param(format!("node {v} is not connected to the root")));
        }
        Ok(tree)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// `(parent, child, length)` per edge.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        (0..self.len())
            .filter_map(|c| self.parent[c].map(|p| (p, c, self.parent_len[c])))
            .collect()
    }

    fn degree(&self, v: usize) -> usize {
        self.children[v].len() + usize::from(self.parent[v].is_some())
    }

    /// Degree-1 nodes in depth-first order from the root: the order in which
    /// a walk around the tree meets them.
    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            if self.degree(v) == 1 {
                out.push(v);
            }
            stack.extend(self.children[v].iter().rev());
        }
        out
    }

    fn lca(&self, mut a: usize, mut b: usize) -> usize {
        while self.depth[a] > self.depth[b] {
            a = self.parent[a].unwrap();
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b].unwrap();
        }
        while a != b {
            a = self.parent[a].unwrap();
            b = self.parent[b].unwrap();
        }
        a
    }

    /// Path length between two nodes.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let c = self.lca(a, b);
        (self.root_dist[a] - self.root_dist[c]) + (self.root_dist[b] - self.root_dist[c])
    }

    /// Nodes on the path from `a` to `b`, both included.
    pub fn path(&self, a: usize, b: usize) -> Vec<usize> {
        let c = self.lca(a, b);
        let mut up = vec![a];
        let mut v = a;
        while v != c {
            v = self.parent[v].unwrap();
            up.push(v);
        }
        let mut down = Vec::new();
        let mut v = b;
        while v != c {
            down.push(v);
            v = self.parent[v].unwrap();
        }
        up.extend(down.into_iter().rev());
        up
    }

    pub fn node_by_label(&self, label: usize) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }
}

/// Face-tree links as `(parent, child)` landmark pairs, 0-based 68-point
/// indices. Child order makes the leaf walk go clockwise in image
/// coordinates: image-right brow, image-right eye, right nostril, mouth from
/// right to left, left nostril, image-left eye, image-left brow.
pub const FACE_TREE_ROOT: usize = 27;
pub const FACE_TREE_LINKS: [(usize, usize); 42] = [
    (27, 24),
    (24, 23),
    (23, 22),
    (24, 25),
    (25, 26),
    (27, 28),
    (28, 29),
    (29, 42),
    (42, 43),
    (43, 44),
    (42, 45),
    (42, 47),
    (47, 46),
    (29, 30),
    (30, 33),
    (33, 34),
    (34, 35),
    (33, 51),
    (51, 52),
    (52, 53),
    (53, 54),
    (51, 57),
    (57, 56),
    (56, 55),
    (57, 58),
    (58, 59),
    (51, 50),
    (50, 49),
    (49, 48),
    (33, 32),
    (32, 31),
    (29, 39),
    (39, 40),
    (40, 41),
    (39, 36),
    (39, 38),
    (38, 37),
    (27, 19),
    (19, 18),
    (18, 17),
    (19, 20),
    (20, 21),
];

/// Shadow tree of a 68-point frame. Coincident linked landmarks get an edge
/// length of `1e-9` times the frame's bounding-box diagonal.
pub fn build_shadow_tree(frame: &[Point]) -> Result<ShadowTree> {
    validate_frame(frame)?;
    let mut labels = vec![FACE_TREE_ROOT];
    for &(_, c) in &FACE_TREE_LINKS {
        labels.push(c);
    }
    let index = |label: usize| labels.iter().position(|&l| l == label).unwrap();
    let links: Vec<(usize, usize)> = FACE_TREE_LINKS
        .iter()
        .map(|&(p, c)| (index(p), index(c)))
        .collect();
    let positions: Vec<Point> = labels.iter().map(|&l| frame[l]).collect();
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in frame {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let diag = hypot(hi[0] - lo[0], hi[1] - lo[1]).max(f64::MIN_POSITIVE);
    let root = index(FACE_TREE_ROOT);
    ShadowTree::from_links(positions, labels.clone(), root, &links, 1e-9 * diag)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyVertex {
    pub pos: Point,
    /// Index into the polygon's leaf list; `None` for plain boundary points.
    pub leaf: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LangPolygon {
    /// Boundary vertices in walk order, positively oriented.
    pub vertices: Vec<PolyVertex>,
    /// Tree node of each leaf.
    pub leaf_nodes: Vec<usize>,
    /// Tree distances between leaves.
    pub d_t: Vec<Vec<f64>>,
    pub tree: Option<ShadowTree>,
}

fn signed_area(pts: &[Point]) -> f64 {
    let n = pts.len();
    (0..n)
        .map(|i| {
            let a = pts[i];
            let b = pts[(i + 1) % n];
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        / 2.0
}

impl LangPolygon {
    /// A polygon over an explicit leaf metric, with no tree attached.
    pub fn from_parts(vertices: Vec<PolyVertex>, d_t: Vec<Vec<f64>>) -> Result<Self> {
        let m = d_t.len();
        if vertices.len() < 3 {
            return Err(param("polygon needs at least 3 vertices"));
        }
        if d_t.iter().any(|r| r.len() != m) {
            return Err(param("tree-distance matrix must be square"));
        }
        let mut seen = vec![false; m];
        for v in &vertices {
            if let Some(l) = v.leaf {
                if l >= m || seen[l] {
                    return Err(param(format!("leaf {l} missing from metric or repeated")));
                }
                seen[l] = true;
            }
        }
        let pts: Vec<Point> = vertices.iter().map(|v| v.pos).collect();
        let vertices = if signed_area(&pts) < 0.0 {
            vertices.into_iter().rev().collect()
        } else {
            vertices
        };
        Ok(Self {
            vertices,
            leaf_nodes: Vec::new(),
            d_t,
            tree: None,
        })
    }

    pub fn n_leaves(&self) -> usize {
        self.d_t.len()
    }

    /// Leaf positions indexed by leaf id.
    pub fn leaf_positions(&self) -> Vec<Point> {
        let mut out = vec![[0.0, 0.0]; self.n_leaves()];
        for v in &self.vertices {
            if let Some(l) = v.leaf {
                out[l] = v.pos;
            }
        }
        out
    }

    /// Leaf ids in boundary order.
    pub fn cycle(&self) -> Vec<usize> {
        self.vertices.iter().filter_map(|v| v.leaf).collect()
    }

    /// Largest `d_T - d_P` over all leaf pairs (non-positive when valid).
    pub fn max_violation(&self) -> f64 {
        let pos = self.leaf_positions();
        let mut worst = f64::NEG_INFINITY;
        for a in 0..pos.len() {
            for b in a + 1..pos.len() {
                worst = worst.max(self.d_t[a][b] - dist(pos[a], pos[b]));
            }
        }
        worst
    }

    /// Bounding-box diagonal.
    pub fn diag(&self) -> f64 {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for v in &self.vertices {
            for a in 0..2 {
                lo[a] = lo[a].min(v.pos[a]);
                hi[a] = hi[a].max(v.pos[a]);
            }
        }
        hypot(hi[0] - lo[0], hi[1] - lo[1])
    }
}

/// Rectangle aspect ratio (width : height).
const ASPECT: [f64; 2] = [4.0, 3.0];

/// Point at arc length `s` along the boundary of a `w x h` rectangle,
/// starting at top-centre and running along the top edge towards `+x`
/// (y grows downwards, as in image coordinates).
fn rect_point(s: f64, w: f64, h: f64) -> Point {
    let per = 2.0 * (w + h);
    let mut s = s % per;
    if s < 0.0 {
        s += per;
    }
    let legs = [w / 2.0, h, w, h, w / 2.0];
    let mut acc = 0.0;
    for (k, &len) in legs.iter().enumerate() {
        if s <= acc + len || k == legs.len() - 1 {
            let u = s - acc;
            return match k {
                0 => [w / 2.0 + u, 0.0],
                1 => [w, u],
                2 => [w - u, h],
                3 => [0.0, h - u],
                _ => [u, 0.0],
            };
        }
        acc += len;
    }
    unreachable!()
}

/// Lays the tree's leaves on a 4:3 rectangle in walk order, spacing them by
/// consecutive tree distance, then scales the rectangle up just enough that
/// every pair of leaves is at least as far apart as in the tree.
pub fn build_lang_polygon(tree: &ShadowTree) -> Result<LangPolygon> {
    let leaves = tree.leaves();
    let m = leaves.len();
    if m < 3 {
        return Err(param(format!("tree has {m} leaves, need at least 3")));
    }
    let d_t: Vec<Vec<f64>> = leaves
        .iter()
        .map(|&a| leaves.iter().map(|&b| tree.distance(a, b)).collect())
        .collect();
    let gaps: Vec<f64> = (0..m).map(|j| d_t[j][(j + 1) % m]).collect();
    let per: f64 = gaps.iter().sum();
    let w = per * ASPECT[0] / (2.0 * (ASPECT[0] + ASPECT[1]));
    let h = per * ASPECT[1] / (2.0 * (ASPECT[0] + ASPECT[1]));
    // The wrap-around gap straddles top-centre, so a mirror-symmetric tree
    // yields a mirror-symmetric layout.
    let mut arc = Vec::with_capacity(m);
    let mut s = gaps[m - 1] / 2.0;
    for g in &gaps {
        arc.push(s);
        s += g;
    }
    let items: Vec<(f64, PolyVertex)> = arc
        .iter()
        .enumerate()
        .map(|(j, &s)| {
            (
                s,
                PolyVertex {
                    pos: rect_point(s, w, h),
                    leaf: Some(j),
                },
            )
        })
        .collect();
    let mut vertices: Vec<PolyVertex> = items.into_iter().map(|(_, v)| v).collect();

    let mut lambda: f64 = 1.0;
    let pos: Vec<Point> = {
        let mut p = vec![[0.0, 0.0]; m];
        for v in &vertices {
            if let Some(l) = v.leaf {
                p[l] = v.pos;
            }
        }
        p
    };
    for a in 0..m {
        for b in a + 1..m {
            let dp = dist(pos[a], pos[b]);
            if dp > 0.0 {
                lambda = lambda.max(d_t[a][b] / dp);
            }
        }
    }
    for v in vertices.iter_mut() {
        v.pos = [v.pos[0] * lambda, v.pos[1] * lambda];
    }
    Ok(LangPolygon {
        vertices,
        leaf_nodes: leaves,
        d_t,
        tree: Some(tree.clone()),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShrinkParams {
    /// Inset per tick.
    pub step: f64,
    /// Event tolerance.
    pub th: f64,
    pub max_ticks: u64,
}

impl ShrinkParams {
    /// `step = 1e-3 * diag`, `th = 1e-6 * diag`, 10 000 ticks.
    pub fn for_polygon(poly: &LangPolygon) -> Self {
        let d = poly.diag();
        Self {
            step: 1e-3 * d,
            th: 1e-6 * d,
            max_ticks: 10_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(param("shrink step must be positive"));
        }
        if !(self.th > 0.0 && self.th.is_finite()) {
            return Err(param("event tolerance must be positive"));
        }
        if self.max_ticks == 0 {
            return Err(param("max_ticks must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Contraction,
    Split,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CreaseEvent {
    pub tick: u64,
    /// Inset at which the event fired.
    pub h: f64,
    pub kind: EventKind,
    /// Contraction: the two merged nodes then the merge node. Split: the
    /// split edge's nodes from one end to the other.
    pub nodes: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CreaseNode {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CreasePattern {
    pub nodes: Vec<CreaseNode>,
    /// Undirected edges `(a, b)` with `a < b`, sorted.
    pub edges: Vec<(usize, usize)>,
    pub events: Vec<CreaseEvent>,
}

impl CreasePattern {
    pub fn degree(&self, id: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(a, b)| a == id || b == id)
            .count()
    }

    pub fn is_connected(&self) -> bool {
        let n = self.nodes.len();
        if n == 0 {
            return true;
        }
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }
}

/// State of one active polygon at a tick boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotPolygon {
    pub vertices: Vec<PolyVertex>,
}

/// What the observer sees after each tick.
#[derive(Clone, Debug, PartialEq)]
pub struct ShrinkSnapshot {
    pub tick: u64,
    /// Inset reached.
    pub h: f64,
    pub polygons: Vec<SnapshotPolygon>,
    /// Total perimeter of the active polygons.
    pub boundary_length: f64,
    /// Summed length of split edges created during this tick. Each one was
    /// added to the boundary twice, once per side.
    pub split_length: f64,
}

#[derive(Clone, Debug)]
struct Vert {
    pos: Point,
    node: usize,
    leaf: Option<usize>,
}

#[derive(Clone, Debug)]
struct Poly {
    verts: Vec<Vert>,
    /// Inward unit normal of edge `i -> i + 1`.
    normals: Vec<Point>,
}

impl Poly {
    fn len(&self) -> usize {
        self.verts.len()
    }

    fn denom(&self, i: usize) -> f64 {
        let n = self.len();
        let a = self.normals[(i + n - 1) % n];
        let b = self.normals[i];
        1.0 + a[0] * b[0] + a[1] * b[1]
    }

    /// Velocity that keeps both incident edges moving inward at unit speed.
    fn velocity(&self, i: usize) -> Point {
        let n = self.len();
        let a = self.normals[(i + n - 1) % n];
        let b = self.normals[i];
        let d = self.denom(i);
        [(a[0] + b[0]) / d, (a[1] + b[1]) / d]
    }

    fn degenerate(&self) -> bool {
        self.len() <= 2 || (0..self.len()).any(|i| self.denom(i) < 1e-10)
    }

    fn advance(&mut self, dt: f64) {
        if dt == 0.0 {
            return;
        }
        let vel: Vec<Point> = (0..self.len()).map(|i| self.velocity(i)).collect();
        for (v, d) in self.verts.iter_mut().zip(vel) {
            v.pos = [v.pos[0] + d[0] * dt, v.pos[1] + d[1] * dt];
        }
    }

    fn perimeter(&self) -> f64 {
        let n = self.len();
        (0..n)
            .map(|i| dist(self.verts[i].pos, self.verts[(i + 1) % n].pos))
            .sum()
    }

    fn snapshot(&self) -> SnapshotPolygon {
        SnapshotPolygon {
            vertices: self
                .verts
                .iter()
                .map(|v| PolyVertex {
                    pos: v.pos,
                    leaf: v.leaf,
                })
                .collect(),
        }
    }
}

fn inward_normal(a: Point, b: Point, fallback: Point) -> Point {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len = hypot(d[0], d[1]);
    if len > 0.0 {
        [-d[1] / len, d[0] / len]
    } else {
        fallback
    }
}

/// Smallest root in `[0, upper]` of `a t^2 + b t + c`, given `c > 0`.
fn first_crossing(a: f64, b: f64, c: f64, upper: f64) -> Option<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return None;
    }
    let roots: Vec<f64> = if a.abs() <= 1e-14 * scale {
        if b < 0.0 {
            vec![-c / b]
        } else {
            Vec::new()
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return None;
        }
        let q = -0.5 * (b + if b >= 0.0 { sqrt(disc) } else { -sqrt(disc) });
        let mut r = Vec::with_capacity(2);
        r.push(q / a);
        if q != 0.0 {
            r.push(c / q);
        }
        r
    };
    roots
        .into_iter()
        .filter(|&t| t >= 0.0 && t <= upper && t.is_finite())
        .min_by(f64::total_cmp)
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Next {
    Contract(usize),
    Split(usize, usize),
    Collapse,
}

struct Sim<'a> {
    poly: &'a LangPolygon,
    params: ShrinkParams,
    nodes: Vec<Point>,
    edges: Vec<(usize, usize)>,
    events: Vec<CreaseEvent>,
    active: Vec<Poly>,
    h: f64,
}

impl<'a> Sim<'a> {
    fn new(poly: &'a LangPolygon, params: ShrinkParams) -> Self {
        let mut nodes = Vec::new();
        let verts: Vec<Vert> = poly
            .vertices
            .iter()
            .map(|v| {
                nodes.push(v.pos);
                Vert {
                    pos: v.pos,
                    node: nodes.len() - 1,
                    leaf: v.leaf,
                }
            })
            .collect();
        let n = verts.len();
        let normals = (0..n)
            .map(|i| inward_normal(verts[i].pos, verts[(i + 1) % n].pos, [0.0, 0.0]))
            .collect();
        Self {
            poly,
            params,
            nodes,
            edges: Vec::new(),
            events: Vec::new(),
            active: vec![Poly { verts, normals }],
            h: 0.0,
        }
    }

    fn add_node(&mut self, p: Point) -> usize {
        self.nodes.push(p);
        self.nodes.len() - 1
    }

    fn tick_of(&self, h: f64) -> u64 {
        ceil(h / self.params.step - 1e-9) as u64
    }

    fn reduced(&self, a: usize, b: usize) -> f64 {
        self.poly.d_t[a][b] - 2.0 * self.h
    }

    /// Earliest event of one polygon, as time from now.
    fn next_event(&self, p: &Poly) -> Option<(f64, Next)> {
        if p.degenerate() {
            return Some((0.0, Next::Collapse));
        }
        let th = self.params.th;
        let n = p.len();
        let vel: Vec<Point> = (0..n).map(|i| p.velocity(i)).collect();
        let mut best: Option<(f64, Next)> = None;
        let offer = |t: f64, e: Next, best: &mut Option<(f64, Next)>| {
            if best.map_or(true, |(bt, _)| t < bt) {
                *best = Some((t, e));
            }
        };
        for i in 0..n {
            let j = (i + 1) % n;
            let dp = [
                p.verts[j].pos[0] - p.verts[i].pos[0],
                p.verts[j].pos[1] - p.verts[i].pos[1],
            ];
            let dv = [vel[j][0] - vel[i][0], vel[j][1] - vel[i][1]];
            let l2 = dp[0] * dp[0] + dp[1] * dp[1];
            if l2 <= th * th {
                offer(0.0, Next::Contract(i), &mut best);
                continue;
            }
            let a = dv[0] * dv[0] + dv[1] * dv[1];
            let b = 2.0 * (dp[0] * dv[0] + dp[1] * dv[1]);
            if b >= 0.0 {
                continue;
            }
            let t = first_crossing(a, b, l2 - th * th, f64::INFINITY).or_else(|| {
                // Rounding can leave the closest approach a hair above th.
                let tc = -b / (2.0 * a);
                let m2 = l2 + b * tc + a * tc * tc;
                (m2 <= 4.0 * th * th).then_some(tc)
            });
            if let Some(t) = t {
                offer(t, Next::Contract(i), &mut best);
            }
        }
        for i in 0..n {
            let Some(la) = p.verts[i].leaf else { continue };
            for k in i + 2..n {
                if i == 0 && k == n - 1 {
                    continue;
                }
                let Some(lb) = p.verts[k].leaf else { continue };
                let c0 = self.reduced(la, lb) + th;
                if c0 < 0.0 {
                    continue;
                }
                let dp = [
                    p.verts[k].pos[0] - p.verts[i].pos[0],
                    p.verts[k].pos[1] - p.verts[i].pos[1],
                ];
                let dv = [vel[k][0] - vel[i][0], vel[k][1] - vel[i][1]];
                let l2 = dp[0] * dp[0] + dp[1] * dp[1];
                if l2 <= c0 * c0 {
                    offer(0.0, Next::Split(i, k), &mut best);
                    continue;
                }
                let a = dv[0] * dv[0] + dv[1] * dv[1] - 4.0;
                let b = 2.0 * (dp[0] * dv[0] + dp[1] * dv[1]) + 4.0 * c0;
                if let Some(t) = first_crossing(a, b, l2 - c0 * c0, c0 / 2.0) {
                    offer(t, Next::Split(i, k), &mut best);
                }
            }
        }
        best.or(Some((f64::INFINITY, Next::Collapse)))
    }

    fn contract(&mut self, pi: usize, i: usize) {
        let p = &self.active[pi];
        let n = p.len();
        let j = (i + 1) % n;
        let (a, b) = (p.verts[i].clone(), p.verts[j].clone());
        let mid = [(a.pos[0] + b.pos[0]) / 2.0, (a.pos[1] + b.pos[1]) / 2.0];
        let leaf = match (a.leaf, b.leaf) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (x, y) => x.or(y),
        };
        let node = self.add_node(mid);
        self.edges.push((a.node, node));
        self.edges.push((b.node, node));
        let tick = self.tick_of(self.h);
        self.events.push(CreaseEvent {
            tick,
            h: self.h,
            kind: EventKind::Contraction,
            nodes: vec![a.node, b.node, node],
        });
        let p = &mut self.active[pi];
        let merged = Vert {
            pos: mid,
            node,
            leaf,
        };
        p.normals.remove(i);
        if j == 0 {
            p.verts.pop();
            p.verts[0] = merged;
        } else {
            p.verts.remove(j);
            p.verts[i] = merged;
        }
    }

    fn split(&mut self, pi: usize, i: usize, k: usize) -> f64 {
        let poly = self.active.swap_remove(pi);
        let (vi, vk) = (poly.verts[i].clone(), poly.verts[k].clone());
        let ni = self.add_node(vi.pos);
        let nk = self.add_node(vk.pos);
        self.edges.push((vi.node, ni));
        self.edges.push((vk.node, nk));
        // Interior tree nodes on the leaf-to-leaf path are placed along the
        // split edge in proportion to their reduced tree distance.
        let mut chain = vec![ni];
        let (la, lb) = (vi.leaf.unwrap(), vk.leaf.unwrap());
        if let Some(tree) = &self.poly.tree {
            let (ta, tb) = (self.poly.leaf_nodes[la], self.poly.leaf_nodes[lb]);
            let path = tree.path(ta, tb);
            let total = self.reduced(la, lb);
            for &mid in &path[1..path.len() - 1] {
                let f = if total > 0.0 {
                    ((tree.distance(ta, mid) - self.h) / total).clamp(0.0, 1.0)
                } else {
                    0.5
                };
                let pos = [
                    vi.pos[0] + f * (vk.pos[0] - vi.pos[0]),
                    vi.pos[1] + f * (vk.pos[1] - vi.pos[1]),
                ];
                chain.push(self.add_node(pos));
            }
        }
        chain.push(nk);
        for w in chain.windows(2) {
            self.edges.push((w[0], w[1]));
        }
        let tick = self.tick_of(self.h);
        self.events.push(CreaseEvent {
            tick,
            h: self.h,
            kind: EventKind::Split,
            nodes: chain,
        });

        let n = poly.len();
        let wi = Vert { node: ni, ..vi };
        let wk = Vert { node: nk, ..vk };
        // First piece: i..=k, closed by k -> i.
        let mut va: Vec<Vert> = poly.verts[i..=k].to_vec();
        va[0] = wi.clone();
        *va.last_mut().unwrap() = wk.clone();
        let mut na: Vec<Point> = poly.normals[i..k].to_vec();
        na.push(inward_normal(wk.pos, wi.pos, poly.normals[k]));
        // Second piece: k..n then 0..=i, closed by i -> k.
        let mut vb: Vec<Vert> = Vec::with_capacity(n - k + i + 1);
        vb.push(wk);
        vb.extend(poly.verts[k + 1..].iter().cloned());
        vb.extend(poly.verts[..i].iter().cloned());
        vb.push(wi);
        let mut nb: Vec<Point> = poly.normals[k..].to_vec();
        nb.extend_from_slice(&poly.normals[..i]);
        nb.push(inward_normal(vi.pos, vk.pos, poly.normals[i]));
        self.active.push(Poly {
            verts: va,
            normals: na,
        });
        self.active.push(Poly {
            verts: vb,
            normals: nb,
        });
        dist(vi.pos, vk.pos)
    }

    /// Ends a polygon that has shrunk to a point or segment: every vertex
    /// gets a final node, and final nodes are chained along the principal
    /// direction of the remaining points.
    fn collapse(&mut self, pi: usize) {
        let poly = self.active.swap_remove(pi);
        let n = poly.len() as f64;
        let c = poly.verts.iter().fold([0.0, 0.0], |a, v| {
            [a[0] + v.pos[0] / n, a[1] + v.pos[1] / n]
        });
        let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
        for v in &poly.verts {
            let d = [v.pos[0] - c[0], v.pos[1] - c[1]];
            sxx += d[0] * d[0];
            sxy += d[0] * d[1];
            syy += d[1] * d[1];
        }
        let theta = 0.5 * atan2(2.0 * sxy, sxx - syy);
        let dir = [cos(theta), sin(theta)];
        let mut finals: Vec<(f64, usize)> = Vec::with_capacity(poly.len());
        for v in &poly.verts {
            let node = self.add_node(v.pos);
            self.edges.push((v.node, node));
            finals.push((
                (v.pos[0] - c[0]) * dir[0] + (v.pos[1] - c[1]) * dir[1],
                node,
            ));
        }
        finals.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for w in finals.windows(2) {
            self.edges.push((w[0].1, w[1].1));
        }
    }

    fn boundary_length(&self) -> f64 {
        self.active.iter().map(Poly::perimeter).sum()
    }

    fn snapshot(&self, tick: u64, split_length: f64) -> ShrinkSnapshot {
        ShrinkSnapshot {
            tick,
            h: self.h,
            polygons: self.active.iter().map(Poly::snapshot).collect(),
            boundary_length: self.boundary_length(),
            split_length,
        }
    }

    fn run(&mut self, observer: &mut dyn FnMut(&ShrinkSnapshot)) -> Result<()> {
        let step = self.params.step;
        let mut tick: u64 = 0;
        observer(&self.snapshot(0, 0.0));
        while !self.active.is_empty() {
            if tick >= self.params.max_ticks {
                return Err(Error::NonTermination {
                    max_ticks: self.params.max_ticks,
                    partial: alloc::boxed::Box::new(self.pattern()),
                });
            }
            let tick_end = (tick + 1) as f64 * step;
            let mut split_length = 0.0;
            loop {
                let mut best: Option<(f64, usize, Next)> = None;
                for (pi, p) in self.active.iter().enumerate() {
                    if let Some((t, e)) = self.next_event(p) {
                        if best.map_or(true, |(bt, _, _)| t < bt) {
                            best = Some((t, pi, e));
                        }
                    }
                }
                let Some((t, pi, ev)) = best else { break };
                if self.h + t > tick_end {
                    break;
                }
                for p in self.active.iter_mut() {
                    p.advance(t);
                }
                self.h += t;
                match ev {
                    Next::Contract(i) => self.contract(pi, i),
                    Next::Split(i, k) => split_length += self.split(pi, i, k),
                    Next::Collapse => self.collapse(pi),
                }
                if self.active.is_empty() {
                    break;
                }
            }
            if !self.active.is_empty() {
                let dt = tick_end - self.h;
                for p in self.active.iter_mut() {
                    p.advance(dt);
                }
                self.h = tick_end;
            }
            tick += 1;
            observer(&self.snapshot(tick, split_length));
        }
        Ok(())
    }

    /// Coalesces nodes closer than the merge tolerance and canonicalizes the
    /// edge list.
    fn pattern(&self) -> CreasePattern {
        let tol = 8.0 * self.params.th;
        let n = self.nodes.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for a in 0..n {
            for b in a + 1..n {
                if dist(self.nodes[a], self.nodes[b]) <= tol {
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    if ra != rb {
                        parent[ra.max(rb)] = ra.min(rb);
                    }
                }
            }
        }
        let mut new_id = vec![usize::MAX; n];
        let mut sums: Vec<(Point, f64)> = Vec::new();
        let mut root_id: BTreeMap<usize, usize> = BTreeMap::new();
        for v in 0..n {
            let r = find(&mut parent, v);
            let id = *root_id.entry(r).or_insert_with(|| {
                sums.push(([0.0, 0.0], 0.0));
                sums.len() - 1
            });
            new_id[v] = id;
            let s = &mut sums[id];
            s.0 = [s.0[0] + self.nodes[v][0], s.0[1] + self.nodes[v][1]];
            s.1 += 1.0;
        }
        let nodes = sums
            .iter()
            .enumerate()
            .map(|(id, (s, c))| CreaseNode {
                id,
                x: s[0] / c,
                y: s[1] / c,
            })
            .collect();
        let mut edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .map(|&(a, b)| (new_id[a], new_id[b]))
            .filter(|(a, b)| a != b)
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        let events = self
            .events
            .iter()
            .map(|e| {
                let mut ids: Vec<usize> = e.nodes.iter().map(|&v| new_id[v]).collect();
                ids.dedup();
                CreaseEvent {
                    nodes: ids,
                    ..e.clone()
                }
            })
            .collect();
        CreasePattern {
            nodes,
            edges,
            events,
        }
    }
}

/// Shrinks the polygon to a crease pattern.
pub fn shrink(poly: &LangPolygon, params: &ShrinkParams) -> Result<CreasePattern> {
    shrink_observed(poly, params, &mut |_| {})
}

/// [`shrink`] with a callback after every tick (and once before the first).
pub fn shrink_observed(
    poly: &LangPolygon,
    params: &ShrinkParams,
    observer: &mut dyn FnMut(&ShrinkSnapshot),
) -> Result<CreasePattern> {
    params.validate()?;
    if poly.vertices.len() < 3 {
        return Err(param("polygon needs at least 3 vertices"));
    }
    let mut sim = Sim::new(poly, *params);
    sim.run(observer)?;
    Ok(sim.pattern())
}

/// Fixed-length complex encodings of a crease pattern.
///
/// Nodes are ranked by `(y, x)` and encoded as `x + i y`; edges are written
/// with ranked endpoints `(min, max)` as `min + i max` and sorted. Both lists
/// are truncated or zero-padded to their targets. `y` is compared on a grid
/// of `quantum` so rounding noise cannot reorder nodes at equal height.
pub fn encode_crease_features_with(
    cp: &CreasePattern,
    target_nodes: usize,
    target_edges: usize,
    quantum: f64,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let key = |y: f64| {
        if quantum > 0.0 {
            libm::round(y / quantum)
        } else {
            y
        }
    };
    let mut order: Vec<usize> = (0..cp.nodes.len()).collect();
    order.sort_by(|&a, &b| {
        let (na, nb) = (&cp.nodes[a], &cp.nodes[b]);
        key(na.y)
            .total_cmp(&key(nb.y))
            .then(na.x.total_cmp(&nb.x))
            .then(a.cmp(&b))
    });
    let mut rank = vec![0usize; cp.nodes.len()];
    for (r, &v) in order.iter().enumerate() {
        rank[v] = r;
    }
    let mut nodes: Vec<Complex64> = order
        .iter()
        .map(|&v| Complex64::new(cp.nodes[v].x, cp.nodes[v].y))
        .collect();
    let mut edges: Vec<(usize, usize)> = cp
        .edges
        .iter()
        .map(|&(a, b)| {
            let (ra, rb) = (rank[a], rank[b]);
            (ra.min(rb), ra.max(rb))
        })
        .collect();
    edges.sort_unstable();
    let mut edges: Vec<Complex64> = edges
        .into_iter()
        .map(|(a, b)| Complex64::new(a as f64, b as f64))
        .collect();
    nodes.resize(target_nodes, Complex64::new(0.0, 0.0));
    edges.resize(target_edges, Complex64::new(0.0, 0.0));
    (nodes, edges)
}

/// [`encode_crease_features_with`] with exact `(y, x)` ordering.
pub fn encode_crease_features(
    cp: &CreasePattern,
    target_nodes: usize,
    target_edges: usize,
) -> (Vec<Complex64>, Vec<Complex64>) {
    encode_crease_features_with(cp, target_nodes, target_edges, 0.0)
}

pub const DEFAULT_TARGET_NODES: usize = 48;
pub const DEFAULT_TARGET_EDGES: usize = 64;

/// Shadow tree, Lang polygon and crease pattern of one frame.
pub fn crease_pattern_of(frame: &[Point]) -> Result<(LangPolygon, CreasePattern)> {
    let local = normalize_to_nose(frame).points;
    let tree = build_shadow_tree(&local)?;
    let poly = build_lang_polygon(&tree)?;
    let params = ShrinkParams::for_polygon(&poly);
    let cp = shrink(&poly, &params)?;
    Ok((poly, cp))
}

/// Origami descriptor of a frame: node and edge encodings at the default
/// targets, flattened as interleaved `(re, im)`.
pub fn origami_descriptor(frame: &[Point]) -> Result<FeatureVector> {
    let (poly, cp) = crease_pattern_of(frame)?;
    let quantum = 1e-6 * poly.diag();
    let (n, e) =
        encode_crease_features_with(&cp, DEFAULT_TARGET_NODES, DEFAULT_TARGET_EDGES, quantum);
    let values = n.iter().chain(&e).flat_map(|z| [z.re, z.im]).collect();
    FeatureVector::new(values, FeatureTag::Origami)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::mean_face;

    #[test]
    fn chain_distance_is_path_sum() {
        let t = ShadowTree::from_links(
            vec![[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]],
            vec![0, 1, 2],
            0,
            &[(0, 1), (1, 2)],
            1e-12,
        )
        .unwrap();
        assert_eq!(t.distance(0, 2), 3.0);
        assert_eq!(t.leaves(), vec![0, 2]);
        assert_eq!(t.path(2, 0), vec![2, 1, 0]);
    }

    #[test]
    fn rejects_disconnected_and_two_parents() {
        let pos = vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        assert!(ShadowTree::from_links(pos.clone(), vec![0, 1, 2], 0, &[(0, 1)], 0.0).is_err());
        assert!(
            ShadowTree::from_links(pos, vec![0, 1, 2], 0, &[(0, 1), (0, 2), (1, 2)], 0.0).is_err()
        );
    }

    #[test]
    fn face_tree_shape() {
        let t = build_shadow_tree(&mean_face()).unwrap();
        assert_eq!(t.edges().len(), t.len() - 1);
        let leaves: Vec<usize> = t.leaves().iter().map(|&v| t.labels[v]).collect();
        assert_eq!(
            leaves,
            vec![22, 26, 44, 45, 46, 35, 54, 55, 59, 48, 31, 41, 36, 37, 17, 21]
        );
        let root = t.root;
        let l = t.node_by_label(17).unwrap();
        let r = t.node_by_label(26).unwrap();
        assert!((t.distance(l, root) - t.distance(r, root)).abs() < 1e-9);
    }

    #[test]
    fn coincident_landmarks_get_floor_length() {
        let mut f = mean_face();
        f[18] = f[17];
        let t = build_shadow_tree(&f).unwrap();
        assert!(t.edges().iter().all(|e| e.2 > 0.0));
    }

    #[test]
    fn lang_polygon_symmetric_face() {
        let t = build_shadow_tree(&mean_face()).unwrap();
        let p = build_lang_polygon(&t).unwrap();
        assert!(p.max_violation() <= 1e-9);
        let w = p.vertices.iter().map(|v| v.pos[0]).fold(0.0, f64::max);
        let pos = p.leaf_positions();
        let cyc = p.cycle();
        let m = cyc.len();
        for j in 0..m {
            let a = pos[cyc[j]];
            let b = pos[cyc[m - 1 - j]];
            assert!((a[0] + b[0] - w).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn first_crossing_roots() {
        // t^2 - 3t + 2 = (t - 1)(t - 2)
        assert_eq!(first_crossing(1.0, -3.0, 2.0, 10.0), Some(1.0));
        assert_eq!(first_crossing(1.0, -3.0, 2.0, 0.5), None);
        assert_eq!(first_crossing(0.0, -2.0, 4.0, 10.0), Some(2.0));
        assert_eq!(first_crossing(1.0, 0.0, 1.0, 10.0), None);
    }

    #[test]
    fn encoding_examples() {
        let cp = CreasePattern {
            nodes: vec![
                CreaseNode {
                    id: 0,
                    x: 3.0,
                    y: 4.0,
                },
                CreaseNode {
                    id: 1,
                    x: 0.0,
                    y: 0.0,
                },
            ],
            edges: vec![(0, 1)],
            events: Vec::new(),
        };
        let (n, e) = encode_crease_features(&cp, 3, 2);
        assert_eq!(
            n,
            vec![
                Complex64::new(0.0, 0.0),
                Complex64::new(3.0, 4.0),
                Complex64::new(0.0, 0.0)
            ]
        );
        assert_eq!(e, vec![Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0)]);
    }
}
