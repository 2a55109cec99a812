//! Node placement, the radio graph, and the quadtree of monitoring areas.
//!
//! Deployments are square: `n` nodes dropped uniformly on `[0, side]^2`,
//! with an undirected edge between any two nodes at distance at most the
//! radio range. Monitoring areas form a quadtree over the same square; a
//! second detection pass may shift the whole grid, so an area's rectangle is
//! stored unshrunk and clipped against the deployment square only where
//! geometry matters (corners, drawing).
//!
//! Area membership is half-open on the right and top edges so sibling
//! quadrants partition their parent exactly; the outermost right/top edges
//! of the deployment square are closed so no node on the boundary is lost.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TopologyError {
    #[error("cannot place {requested} adversaries among {available} nodes")]
    TooManyAdversaries { requested: usize, available: usize },
    #[error("gaussian spread must be positive and finite, got {0}")]
    InvalidSpread(f64),
}

/// One deployed node.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeRecord {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub is_adversary: bool,
}

/// Uniform placement over the deployment square; ids are assigned in draw
/// order, x before y for each node.
pub fn place_nodes<R: Rng + ?Sized>(n: usize, side: f64, rng: &mut R) -> Vec<NodeRecord> {
    (0..n)
        .map(|id| {
            let x = rng.random_range(0.0..side);
            let y = rng.random_range(0.0..side);
            NodeRecord { id, x, y, is_adversary: false }
        })
        .collect()
}

/// How adversary identities are assigned to already-placed nodes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AdversaryPlacement {
    /// A uniformly random subset of nodes.
    Uniform,
    /// Each adversary samples a point from an isotropic normal and claims
    /// the nearest node not already claimed.
    Gaussian { mean: (f64, f64), sigma: f64 },
}

/// Marks `z0` nodes as adversaries according to `placement`.
pub fn place_adversaries<R: Rng + ?Sized>(
    nodes: &mut [NodeRecord],
    z0: usize,
    placement: &AdversaryPlacement,
    rng: &mut R,
) -> Result<(), TopologyError> {
    if z0 > nodes.len() {
        return Err(TopologyError::TooManyAdversaries { requested: z0, available: nodes.len() });
    }
    match *placement {
        AdversaryPlacement::Uniform => {
            // Partial Fisher-Yates: the first z0 slots become a uniform
            // subset.
            let mut ids: Vec<usize> = (0..nodes.len()).collect();
            for i in 0..z0 {
                let j = rng.random_range(i..ids.len());
                ids.swap(i, j);
                nodes[ids[i]].is_adversary = true;
            }
        }
        AdversaryPlacement::Gaussian { mean, sigma } => {
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(TopologyError::InvalidSpread(sigma));
            }
            let nx = Normal::new(mean.0, sigma).expect("validated above");
            let ny = Normal::new(mean.1, sigma).expect("validated above");
            for _ in 0..z0 {
                let px = nx.sample(rng);
                let py = ny.sample(rng);
                let mut best: Option<(f64, usize)> = None;
                for node in nodes.iter() {
                    if node.is_adversary {
                        continue;
                    }
                    let d2 = (node.x - px).powi(2) + (node.y - py).powi(2);
                    // Strict less keeps the lowest id on exact ties.
                    if best.map_or(true, |(bd, _)| d2 < bd) {
                        best = Some((d2, node.id));
                    }
                }
                let (_, id) = best.expect("z0 <= n leaves an unclaimed node");
                nodes[id].is_adversary = true;
            }
        }
    }
    Ok(())
}

/// Undirected radio graph as sorted neighbor lists.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    /// Wraps prebuilt adjacency lists. Callers are responsible for symmetry.
    pub fn from_adjacency(adjacency: Vec<Vec<usize>>) -> Graph {
        Graph { adjacency }
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn neighbors(&self, id: usize) -> &[usize] {
        &self.adjacency[id]
    }

    pub fn degree(&self, id: usize) -> usize {
        self.adjacency[id].len()
    }

    /// True when every node can reach every other node.
    pub fn is_connected(&self) -> bool {
        let n = self.adjacency.len();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &self.adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == n
    }
}

/// Connects every pair within `radius` (inclusive).
pub fn build_graph(nodes: &[NodeRecord], radius: f64) -> Graph {
    let n = nodes.len();
    let r2 = radius * radius;
    let mut adjacency = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d2 = (nodes[i].x - nodes[j].x).powi(2) + (nodes[i].y - nodes[j].y).powi(2);
            if d2 <= r2 {
                adjacency[i].push(j);
                adjacency[j].push(i);
            }
        }
    }
    Graph { adjacency }
}

/// Axis-aligned rectangle, corner plus extents.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub width: f64,
    pub height: f64,
}

impl Rect {
    pub fn x1(&self) -> f64 {
        self.x0 + self.width
    }

    pub fn y1(&self) -> f64 {
        self.y0 + self.height
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    /// Quadrants in a fixed order: bottom-left, bottom-right, top-left,
    /// top-right.
    pub fn quadrants(&self) -> [Rect; 4] {
        let w = self.width / 2.0;
        let h = self.height / 2.0;
        [
            Rect { x0: self.x0, y0: self.y0, width: w, height: h },
            Rect { x0: self.x0 + w, y0: self.y0, width: w, height: h },
            Rect { x0: self.x0, y0: self.y0 + h, width: w, height: h },
            Rect { x0: self.x0 + w, y0: self.y0 + h, width: w, height: h },
        ]
    }

    /// Corners in the same order as [`Rect::quadrants`].
    pub fn corners(&self) -> [(f64, f64); 4] {
        [
            (self.x0, self.y0),
            (self.x1(), self.y0),
            (self.x0, self.y1()),
            (self.x1(), self.y1()),
        ]
    }

    pub fn intersect(&self, other: &Rect) -> Option<Rect> {
        let x0 = self.x0.max(other.x0);
        let y0 = self.y0.max(other.y0);
        let x1 = self.x1().min(other.x1());
        let y1 = self.y1().min(other.y1());
        if x0 < x1 && y0 < y1 {
            Some(Rect { x0, y0, width: x1 - x0, height: y1 - y0 })
        } else {
            None
        }
    }
}

/// One square cell of the monitoring quadtree.
///
/// `rect` is the cell's nominal square, which can poke past the deployment
/// boundary when the grid is shifted. `estimated_count` is what the
/// hierarchy believes about the population: density times nominal area,
/// quartered on each subdivision. Levels start at 2 for the whole grid,
/// matching a quadtree whose level-l pass has 4^(l-2) cells.
#[derive(Clone, Debug, PartialEq)]
pub struct MonitoringArea {
    pub rect: Rect,
    pub level: u32,
    pub estimated_count: f64,
}

/// Quadtree level assigned to the whole deployment square.
pub const ROOT_LEVEL: u32 = 2;

impl MonitoringArea {
    /// The whole monitoring grid as one area, optionally shifted.
    pub fn root(side: f64, node_count: usize, origin: (f64, f64)) -> MonitoringArea {
        MonitoringArea {
            rect: Rect { x0: origin.0, y0: origin.1, width: side, height: side },
            level: ROOT_LEVEL,
            estimated_count: node_count as f64,
        }
    }

    /// Four children, each inheriting a quarter of the estimate.
    pub fn subdivide(&self) -> [MonitoringArea; 4] {
        self.rect.quadrants().map(|rect| MonitoringArea {
            rect,
            level: self.level + 1,
            estimated_count: self.estimated_count / 4.0,
        })
    }

    /// The part of the cell that lies inside the deployment square.
    pub fn clipped(&self, side: f64) -> Option<Rect> {
        self.rect.intersect(&Rect { x0: 0.0, y0: 0.0, width: side, height: side })
    }

    /// Membership test: half-open on the right/top, except that a cell edge
    /// lying on or past the deployment boundary is closed so nodes at
    /// exactly `side` belong somewhere.
    pub fn contains(&self, x: f64, y: f64, side: f64) -> bool {
        let in_axis = |v: f64, lo: f64, hi: f64| v >= lo && (v < hi || (hi >= side && v >= hi));
        in_axis(x, self.rect.x0, self.rect.x1()) && in_axis(y, self.rect.y0, self.rect.y1())
    }
}

/// Ids of the nodes inside the area, ascending.
pub fn nodes_in(area: &MonitoringArea, nodes: &[NodeRecord], side: f64) -> Vec<usize> {
    nodes
        .iter()
        .filter(|n| area.contains(n.x, n.y, side))
        .map(|n| n.id)
        .collect()
}

/// For each corner of the (clipped) area, the member node closest to it;
/// ties go to the lower id. All four entries are `Some` whenever the area
/// has at least one member, and one node can serve several corners.
pub fn corner_assignments(
    area: &MonitoringArea,
    nodes: &[NodeRecord],
    side: f64,
) -> [Option<usize>; 4] {
    let Some(clipped) = area.clipped(side) else {
        return [None; 4];
    };
    let members = nodes_in(area, nodes, side);
    clipped.corners().map(|(cx, cy)| {
        let mut best: Option<(f64, usize)> = None;
        for &id in &members {
            let d2 = (nodes[id].x - cx).powi(2) + (nodes[id].y - cy).powi(2);
            if best.map_or(true, |(bd, _)| d2 < bd) {
                best = Some((d2, id));
            }
        }
        best.map(|(_, id)| id)
    })
}

/// Distinct watchdog ids for the area, ascending; at most four.
pub fn corner_watchdogs(area: &MonitoringArea, nodes: &[NodeRecord], side: f64) -> Vec<usize> {
    let mut ids: Vec<usize> = corner_assignments(area, nodes, side)
        .iter()
        .filter_map(|&id| id)
        .collect();
    ids.sort_unstable();
    ids.dedup();
    ids
}

/// Plain-text node dump: one `id x y adversary` line per node.
pub fn export_nodes(nodes: &[NodeRecord]) -> String {
    let mut out = String::new();
    for n in nodes {
        out.push_str(&format!("{} {} {} {}\n", n.id, n.x, n.y, n.is_adversary as u8));
    }
    out
}

/// Plain-text adjacency dump: one `id: n1 n2 ...` line per node.
pub fn export_adjacency(graph: &Graph) -> String {
    let mut out = String::new();
    for id in 0..graph.len() {
        out.push_str(&format!("{}:", id));
        for nb in graph.neighbors(id) {
            out.push_str(&format!(" {}", nb));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_placement_fills_the_square() {
        let side = 800.0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let nodes = place_nodes(100_000, side, &mut rng);
        assert_eq!(nodes.len(), 100_000);
        let mut sx = 0.0;
        let mut sy = 0.0;
        for (i, n) in nodes.iter().enumerate() {
            assert_eq!(n.id, i);
            assert!((0.0..side).contains(&n.x) && (0.0..side).contains(&n.y));
            assert!(!n.is_adversary);
            sx += n.x;
            sy += n.y;
        }
        // Mean of 1e5 uniforms: standard error ~0.73, so +-3 is ~4 sigma.
        assert!((sx / 1e5 - 400.0).abs() < 3.0);
        assert!((sy / 1e5 - 400.0).abs() < 3.0);
    }

    #[test]
    fn adjacency_is_inclusive_at_the_exact_range() {
        let nodes = vec![
            NodeRecord { id: 0, x: 0.0, y: 0.0, is_adversary: false },
            NodeRecord { id: 1, x: 3.0, y: 4.0, is_adversary: false },
            NodeRecord { id: 2, x: 3.0, y: 4.001, is_adversary: false },
        ];
        let g = build_graph(&nodes, 5.0);
        assert_eq!(g.neighbors(0), &[1]); // distance exactly 5
        assert!(g.neighbors(1).contains(&2));
        assert!(!g.neighbors(0).contains(&0), "no self loops");
    }

    #[test]
    fn large_range_gives_a_complete_graph() {
        let side = 100.0;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let nodes = place_nodes(30, side, &mut rng);
        // Anything at least the diagonal connects every pair.
        let g = build_graph(&nodes, side * std::f64::consts::SQRT_2);
        for id in 0..30 {
            assert_eq!(g.degree(id), 29);
        }
        assert!(g.is_connected());
    }

    #[test]
    fn quadrants_partition_their_parent() {
        let side = 800.0;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..200 {
            // Mix plain and shifted grids, at a few depths.
            let origin = if trial % 2 == 0 { (0.0, 0.0) } else { (25.0, 25.0) };
            let mut area = MonitoringArea::root(side, 400, origin);
            for depth in 0..(trial % 4) {
                let children = area.subdivide();
                area = children[(trial + depth) % 4].clone();
            }
            let children = area.subdivide();
            for _ in 0..50 {
                let x = rng.random_range(area.rect.x0..area.rect.x1());
                let y = rng.random_range(area.rect.y0..area.rect.y1());
                if !area.contains(x, y, side) {
                    continue;
                }
                let holders =
                    children.iter().filter(|c| c.contains(x, y, side)).count();
                assert_eq!(holders, 1, "point ({x},{y}) held by {holders} children");
            }
            // Seam points: center of the parent belongs to exactly one child.
            let cx = area.rect.x0 + area.rect.width / 2.0;
            let cy = area.rect.y0 + area.rect.height / 2.0;
            let holders = children.iter().filter(|c| c.contains(cx, cy, side)).count();
            assert_eq!(holders, 1);
        }
    }

    #[test]
    fn deployment_edge_is_closed() {
        let side = 800.0;
        let root = MonitoringArea::root(side, 400, (0.0, 0.0));
        assert!(root.contains(800.0, 800.0, side));
        assert!(root.contains(800.0, 0.0, side));
        let children = root.subdivide();
        // The point at the far corner lands in the top-right child only.
        let holders: Vec<usize> = (0..4)
            .filter(|&i| children[i].contains(800.0, 800.0, side))
            .collect();
        assert_eq!(holders, vec![3]);
        // An interior seam is half-open: x = 400 belongs to the right side.
        let holders: Vec<usize> = (0..4)
            .filter(|&i| children[i].contains(400.0, 10.0, side))
            .collect();
        assert_eq!(holders, vec![1]);
    }

    #[test]
    fn estimates_quarter_with_each_level() {
        let root = MonitoringArea::root(800.0, 400, (0.0, 0.0));
        assert_eq!(root.level, 2);
        assert_eq!(root.estimated_count, 400.0);
        let child = &root.subdivide()[2];
        assert_eq!(child.level, 3);
        assert_eq!(child.estimated_count, 100.0);
        let grandchild = &child.subdivide()[0];
        assert_eq!(grandchild.level, 4);
        assert_eq!(grandchild.estimated_count, 25.0);
        assert_eq!(grandchild.rect.width, 200.0);
    }

    #[test]
    fn corner_assignment_picks_nearest_members() {
        let side = 100.0;
        let nodes = vec![
            NodeRecord { id: 0, x: 10.0, y: 10.0, is_adversary: false },
            NodeRecord { id: 1, x: 90.0, y: 5.0, is_adversary: false },
            NodeRecord { id: 2, x: 20.0, y: 95.0, is_adversary: false },
            NodeRecord { id: 3, x: 80.0, y: 80.0, is_adversary: false },
            NodeRecord { id: 4, x: 50.0, y: 50.0, is_adversary: false },
        ];
        let area = MonitoringArea::root(side, 5, (0.0, 0.0));
        assert_eq!(corner_assignments(&area, &nodes, side), [Some(0), Some(1), Some(2), Some(3)]);
        assert_eq!(corner_watchdogs(&area, &nodes, side), vec![0, 1, 2, 3]);

        // A single member serves every corner.
        let lone = vec![NodeRecord { id: 0, x: 42.0, y: 17.0, is_adversary: false }];
        assert_eq!(corner_assignments(&area, &lone, side), [Some(0); 4]);
        assert_eq!(corner_watchdogs(&area, &lone, side), vec![0]);

        // Equidistant nodes: the lower id wins.
        let tied = vec![
            NodeRecord { id: 0, x: 5.0, y: 0.0, is_adversary: false },
            NodeRecord { id: 1, x: 0.0, y: 5.0, is_adversary: false },
        ];
        assert_eq!(corner_assignments(&area, &tied, side)[0], Some(0));

        // No members, no watchdogs.
        assert_eq!(corner_assignments(&area, &[], side), [None; 4]);
        assert!(corner_watchdogs(&area, &[], side).is_empty());
    }

    #[test]
    fn uniform_adversaries_form_an_exact_subset() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut nodes = place_nodes(50, 800.0, &mut rng);
        place_adversaries(&mut nodes, 7, &AdversaryPlacement::Uniform, &mut rng).unwrap();
        assert_eq!(nodes.iter().filter(|n| n.is_adversary).count(), 7);

        let mut all = place_nodes(5, 800.0, &mut rng);
        place_adversaries(&mut all, 5, &AdversaryPlacement::Uniform, &mut rng).unwrap();
        assert!(all.iter().all(|n| n.is_adversary));

        let err = place_adversaries(&mut all, 6, &AdversaryPlacement::Uniform, &mut rng);
        assert_eq!(
            err.unwrap_err(),
            TopologyError::TooManyAdversaries { requested: 6, available: 5 }
        );
    }

    #[test]
    fn tight_gaussian_claims_the_nodes_nearest_its_mean() {
        let side = 800.0;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut nodes = place_nodes(200, side, &mut rng);
        let mean = (side / 2.0, side / 2.0);
        let placement = AdversaryPlacement::Gaussian { mean, sigma: 1e-9 };
        place_adversaries(&mut nodes, 10, &placement, &mut rng).unwrap();

        let mut by_distance: Vec<usize> = (0..200).collect();
        by_distance.sort_by(|&a, &b| {
            let da = (nodes[a].x - mean.0).powi(2) + (nodes[a].y - mean.1).powi(2);
            let db = (nodes[b].x - mean.0).powi(2) + (nodes[b].y - mean.1).powi(2);
            da.partial_cmp(&db).unwrap()
        });
        for (rank, &id) in by_distance.iter().enumerate() {
            assert_eq!(nodes[id].is_adversary, rank < 10, "rank {rank} id {id}");
        }

        let bad = AdversaryPlacement::Gaussian { mean, sigma: 0.0 };
        assert_eq!(
            place_adversaries(&mut nodes, 1, &bad, &mut rng).unwrap_err(),
            TopologyError::InvalidSpread(0.0)
        );
    }

    #[test]
    fn exports_have_a_stable_line_format() {
        let nodes = vec![
            NodeRecord { id: 0, x: 1.0, y: 2.5, is_adversary: false },
            NodeRecord { id: 1, x: 4.0, y: 2.5, is_adversary: true },
            NodeRecord { id: 2, x: 400.0, y: 2.5, is_adversary: false },
        ];
        assert_eq!(export_nodes(&nodes), "0 1 2.5 0\n1 4 2.5 1\n2 400 2.5 0\n");
        let g = build_graph(&nodes, 5.0);
        assert_eq!(export_adjacency(&g), "0: 1\n1: 0\n2:\n");
    }

    #[test]
    fn shifted_cells_clip_to_the_deployment_square() {
        let side = 800.0;
        let root = MonitoringArea::root(side, 400, (25.0, 25.0));
        let clipped = root.clipped(side).unwrap();
        assert_eq!(clipped, Rect { x0: 25.0, y0: 25.0, width: 775.0, height: 775.0 });
        // A node inside the missing strip belongs to no shifted cell.
        assert!(!root.contains(10.0, 400.0, side));
        // Nominal area is used for estimates even when clipped.
        assert_eq!(root.rect.area(), 640_000.0);
    }
}
