//! Interface-fitted non-convex polygonal meshes on the unit square.
//!
//! Two grid families are provided. Both start from an n-by-n partition of
//! (0,1)^2 into square cells and split every cell into non-convex pieces:
//!
//! * type A: a triangle plus a pentagon with one reflex vertex,
//! * type B: two hexagons, each with one reflex vertex, separated by a
//!   two-kink polyline.
//!
//! The material interface (a vertical line or the boundary of a centered
//! square) always coincides with cell boundaries, so no element straddles it.

use std::collections::HashMap;
use std::ops::{Add, Mul, Sub};

use thiserror::Error;

/// Absolute tolerance for geometric coincidence on the unit square.
pub const GEOM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("grid resolution must be positive")]
    ZeroResolution,
    #[error("grid resolution {n} must be divisible by {needed} for this layout")]
    BadDivisibility { n: usize, needed: usize },
    #[error("element {0} is degenerate or not counter-clockwise")]
    BadElement(usize),
    #[error("ear clipping failed: polygon is degenerate or self-intersecting")]
    EarClipFailed,
    #[error("edge shared by more than two elements")]
    NonManifoldEdge,
    #[error("mesh validation failed: {0}")]
    Invalid(String),
}

/// A point (or vector) in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dist(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    /// z-component of the cross product `self x o`.
    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

/// Signed area of a polygon loop (positive for counter-clockwise).
pub fn signed_area(pts: &[Point2]) -> f64 {
    let n = pts.len();
    let mut a = 0.0;
    for i in 0..n {
        a += pts[i].cross(pts[(i + 1) % n]);
    }
    0.5 * a
}

/// Area centroid of a simple polygon.
pub fn polygon_centroid(pts: &[Point2]) -> Point2 {
    let n = pts.len();
    let (mut cx, mut cy, mut a) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let p = pts[i];
        let q = pts[(i + 1) % n];
        let w = p.cross(q);
        cx += (p.x + q.x) * w;
        cy += (p.y + q.y) * w;
        a += w;
    }
    Point2::new(cx / (3.0 * a), cy / (3.0 * a))
}

/// Diameter: largest pairwise vertex distance.
pub fn polygon_diameter(pts: &[Point2]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            d = d.max(pts[i].dist(pts[j]));
        }
    }
    d
}

/// Indices of reflex vertices (interior angle > pi) of a CCW simple polygon.
pub fn reflex_vertices(pts: &[Point2]) -> Vec<usize> {
    let n = pts.len();
    (0..n)
        .filter(|&i| {
            let prev = pts[(i + n - 1) % n];
            let next = pts[(i + 1) % n];
            (pts[i] - prev).cross(next - pts[i]) < -GEOM_TOL
        })
        .collect()
}

fn point_in_triangle(p: Point2, a: Point2, b: Point2, c: Point2) -> bool {
    let d1 = (b - a).cross(p - a);
    let d2 = (c - b).cross(p - b);
    let d3 = (a - c).cross(p - c);
    let tol = -GEOM_TOL;
    d1 >= tol && d2 >= tol && d3 >= tol
}

/// Ear-clipping triangulation of a simple CCW polygon.
///
/// Returns triangles as index triples into `pts`. The triangles partition the
/// polygon, so their areas sum to the polygon area.
pub fn ear_clip(pts: &[Point2]) -> Result<Vec<[usize; 3]>, MeshError> {
    let n = pts.len();
    if n < 3 {
        return Err(MeshError::EarClipFailed);
    }
    if n == 3 {
        return Ok(vec![[0, 1, 2]]);
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut tris = Vec::with_capacity(n - 2);
    let mut guard = 0usize;
    while idx.len() > 3 {
        guard += 1;
        if guard > 2 * n * n {
            return Err(MeshError::EarClipFailed);
        }
        let m = idx.len();
        let mut clipped = false;
        for i in 0..m {
            let (ia, ib, ic) = (idx[(i + m - 1) % m], idx[i], idx[(i + 1) % m]);
            let (a, b, c) = (pts[ia], pts[ib], pts[ic]);
            // convex corner with positive area
            if (b - a).cross(c - b) <= GEOM_TOL {
                continue;
            }
            // no other remaining vertex inside the candidate ear
            let blocked = idx
                .iter()
                .any(|&j| j != ia && j != ib && j != ic && point_in_triangle(pts[j], a, b, c));
            if blocked {
                continue;
            }
            tris.push([ia, ib, ic]);
            idx.remove(i);
            clipped = true;
            break;
        }
        if !clipped {
            return Err(MeshError::EarClipFailed);
        }
    }
    tris.push([idx[0], idx[1], idx[2]]);
    Ok(tris)
}

/// Subdomain layouts from the two model geometries: a vertical split at
/// x = 1/2, or a centered square (1/4,3/4)^2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Vertical,
    Square,
}

impl Layout {
    /// Subdomain label of an interior point: 0 inside the distinguished
    /// region, 1 outside.
    pub fn subdomain_of(self, p: Point2) -> usize {
        match self {
            Layout::Vertical => {
                if p.x > 0.5 {
                    0
                } else {
                    1
                }
            }
            Layout::Square => {
                if p.x > 0.25 && p.x < 0.75 && p.y > 0.25 && p.y < 0.75 {
                    0
                } else {
                    1
                }
            }
        }
    }

    fn divisibility(self) -> usize {
        match self {
            Layout::Vertical => 2,
            Layout::Square => 4,
        }
    }

    /// Index of the interface piece containing `p`, if any.
    fn interface_piece(self, p: Point2) -> Option<usize> {
        let on = |a: f64, b: f64| (a - b).abs() <= GEOM_TOL;
        let within = |a: f64| a >= 0.25 - GEOM_TOL && a <= 0.75 + GEOM_TOL;
        match self {
            Layout::Vertical => on(p.x, 0.5).then_some(0),
            Layout::Square => {
                if on(p.y, 0.25) && within(p.x) {
                    Some(0)
                } else if on(p.x, 0.75) && within(p.y) {
                    Some(1)
                } else if on(p.y, 0.75) && within(p.x) {
                    Some(2)
                } else if on(p.x, 0.25) && within(p.y) {
                    Some(3)
                } else {
                    None
                }
            }
        }
    }

    /// Total length of the interface polyline.
    pub fn interface_length(self) -> f64 {
        match self {
            Layout::Vertical => 1.0,
            Layout::Square => 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeTag {
    Interior,
    Boundary,
    Interface(usize),
}

#[derive(Debug, Clone)]
pub struct Element {
    /// Counter-clockwise vertex loop.
    pub vertices: Vec<usize>,
    /// Subdomain label: 0 in the distinguished region, 1 outside.
    pub subdomain: usize,
    pub diameter: f64,
    pub centroid: Point2,
    pub area: f64,
}

#[derive(Debug, Clone)]
pub struct Edge {
    /// Endpoints in the traversal order of the left element.
    pub endpoints: [usize; 2],
    pub left: usize,
    pub right: Option<usize>,
    pub tag: EdgeTag,
    pub length: f64,
    /// Unit normal pointing from the left element into the right one
    /// (outward from the domain on boundary edges).
    pub normal: Point2,
}

/// Edge reference stored per element, in loop order.
#[derive(Debug, Clone, Copy)]
pub struct ElementEdge {
    pub edge: usize,
    /// Whether `edges[edge].normal` is the outward normal for this element.
    pub outward: bool,
}

#[derive(Debug, Clone)]
pub struct PolyMesh {
    pub vertices: Vec<Point2>,
    pub elements: Vec<Element>,
    pub edges: Vec<Edge>,
    /// Per element, its boundary edges in loop order.
    pub element_edges: Vec<Vec<ElementEdge>>,
    /// Mesh size: max element diameter.
    pub h: f64,
    pub layout: Layout,
}

impl PolyMesh {
    /// Vertex coordinates of an element, in loop order.
    pub fn element_points(&self, el: usize) -> Vec<Point2> {
        self.elements[el]
            .vertices
            .iter()
            .map(|&v| self.vertices[v])
            .collect()
    }

    /// Outward unit normal of `edge` as seen from element `el`.
    pub fn outward_normal(&self, _el: usize, ee: ElementEdge) -> Point2 {
        let n = self.edges[ee.edge].normal;
        if ee.outward {
            n
        } else {
            n * -1.0
        }
    }

    /// Ear-clipping triangulation of one element (local indices).
    pub fn triangulate(&self, el: usize) -> Result<Vec<[usize; 3]>, MeshError> {
        ear_clip(&self.element_points(el))
    }

    pub fn n_interface_edges(&self) -> usize {
        self.edges
            .iter()
            .filter(|e| matches!(e.tag, EdgeTag::Interface(_)))
            .count()
    }

    /// Largest ratio of element diameter to the inradius of the fattest
    /// triangle in its triangulation. A crude shape-regularity monitor.
    pub fn shape_regularity(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for el in 0..self.elements.len() {
            let pts = self.element_points(el);
            let tris = ear_clip(&pts).expect("mesh elements are simple polygons");
            let mut best_inradius: f64 = 0.0;
            for t in tris {
                let (a, b, c) = (pts[t[0]], pts[t[1]], pts[t[2]]);
                let area = 0.5 * (b - a).cross(c - a);
                let per = a.dist(b) + b.dist(c) + c.dist(a);
                best_inradius = best_inradius.max(2.0 * area / per);
            }
            worst = worst.max(self.elements[el].diameter / best_inradius);
        }
        worst
    }

    /// Structural checks: orientation, manifoldness, area partition and
    /// interface consistency. Cheap enough to run after every generation.
    pub fn validate(&self) -> Result<(), MeshError> {
        let fail = |m: String| Err(MeshError::Invalid(m));
        let total: f64 = self.elements.iter().map(|e| e.area).sum();
        if (total - 1.0).abs() > 1e-12 {
            return fail(format!("element areas sum to {total}, expected 1"));
        }
        let mut interface_len = 0.0;
        for (i, e) in self.edges.iter().enumerate() {
            if (e.normal.norm() - 1.0).abs() > 1e-14 {
                return fail(format!("edge {i} normal is not unit length"));
            }
            match e.tag {
                EdgeTag::Boundary => {
                    if e.right.is_some() {
                        return fail(format!("boundary edge {i} has two elements"));
                    }
                }
                EdgeTag::Interior => {
                    if e.right.is_none() {
                        return fail(format!("interior edge {i} has one element"));
                    }
                }
                EdgeTag::Interface(_) => {
                    let r = match e.right {
                        Some(r) => r,
                        None => return fail(format!("interface edge {i} has one element")),
                    };
                    let (sl, sr) = (self.elements[e.left].subdomain, self.elements[r].subdomain);
                    if sl != 0 || sr != 1 {
                        return fail(format!("interface edge {i} labels ({sl},{sr}) != (0,1)"));
                    }
                    interface_len += e.length;
                }
            }
        }
        if (interface_len - self.layout.interface_length()).abs() > 1e-10 {
            return fail(format!("interface length {interface_len} mismatch"));
        }
        for (el, loops) in self.element_edges.iter().enumerate() {
            if loops.len() != self.elements[el].vertices.len() {
                return fail(format!("element {el} edge loop length mismatch"));
            }
        }
        Ok(())
    }
}

/// Incremental mesh builder with vertex deduplication on a 1e-10 grid.
struct MeshBuilder {
    vertices: Vec<Point2>,
    lookup: HashMap<(i64, i64), usize>,
    elements: Vec<Vec<usize>>,
}

impl MeshBuilder {
    fn new() -> Self {
        MeshBuilder {
            vertices: Vec::new(),
            lookup: HashMap::new(),
            elements: Vec::new(),
        }
    }

    fn vertex(&mut self, p: Point2) -> usize {
        let key = ((p.x * 1e10).round() as i64, (p.y * 1e10).round() as i64);
        if let Some(&v) = self.lookup.get(&key) {
            debug_assert!(self.vertices[v].dist(p) < 1e-12);
            return v;
        }
        let v = self.vertices.len();
        self.vertices.push(p);
        self.lookup.insert(key, v);
        v
    }

    fn element(&mut self, pts: &[Point2]) {
        let ids = pts.iter().map(|&p| self.vertex(p)).collect();
        self.elements.push(ids);
    }

    fn finish(self, layout: Layout) -> Result<PolyMesh, MeshError> {
        let vertices = self.vertices;
        let mut elements = Vec::with_capacity(self.elements.len());
        for (i, ids) in self.elements.iter().enumerate() {
            let pts: Vec<Point2> = ids.iter().map(|&v| vertices[v]).collect();
            let area = signed_area(&pts);
            if area <= GEOM_TOL {
                return Err(MeshError::BadElement(i));
            }
            let centroid = polygon_centroid(&pts);
            elements.push(Element {
                vertices: ids.clone(),
                subdomain: layout.subdomain_of(centroid),
                diameter: polygon_diameter(&pts),
                centroid,
                area,
            });
        }

        // Discover edges: first incident element is the left one.
        let mut edge_of: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        for (el, e) in elements.iter().enumerate() {
            let m = e.vertices.len();
            for i in 0..m {
                let (a, b) = (e.vertices[i], e.vertices[(i + 1) % m]);
                let key = (a.min(b), a.max(b));
                match edge_of.get(&key) {
                    None => {
                        edge_of.insert(key, edges.len());
                        edges.push(Edge {
                            endpoints: [a, b],
                            left: el,
                            right: None,
                            tag: EdgeTag::Interior,
                            length: 0.0,
                            normal: Point2::default(),
                        });
                    }
                    Some(&id) => {
                        if edges[id].right.is_some() {
                            return Err(MeshError::NonManifoldEdge);
                        }
                        if edges[id].endpoints != [b, a] {
                            return Err(MeshError::Invalid(format!(
                                "edge {id} traversed twice with the same orientation"
                            )));
                        }
                        edges[id].right = Some(el);
                    }
                }
            }
        }

        // Tag edges; make the subdomain-0 element the left one on the interface.
        for edge in edges.iter_mut() {
            let (pa, pb) = (vertices[edge.endpoints[0]], vertices[edge.endpoints[1]]);
            let mid = (pa + pb) * 0.5;
            edge.tag = match edge.right {
                None => EdgeTag::Boundary,
                Some(r) => {
                    let (sl, sr) = (elements[edge.left].subdomain, elements[r].subdomain);
                    if sl != sr {
                        let m = layout.interface_piece(mid).ok_or_else(|| {
                            MeshError::Invalid("subdomain jump off the interface".into())
                        })?;
                        if sl == 1 {
                            let old_left = edge.left;
                            edge.endpoints = [edge.endpoints[1], edge.endpoints[0]];
                            edge.left = r;
                            edge.right = Some(old_left);
                        }
                        EdgeTag::Interface(m)
                    } else {
                        EdgeTag::Interior
                    }
                }
            };
        }
        // Recompute geometry after any endpoint swaps.
        for edge in edges.iter_mut() {
            let (pa, pb) = (vertices[edge.endpoints[0]], vertices[edge.endpoints[1]]);
            let d = pb - pa;
            edge.length = d.norm();
            edge.normal = Point2::new(d.y, -d.x) * (1.0 / edge.length);
        }

        // Per-element edge loops with outwardness flags.
        let mut element_edges = Vec::with_capacity(elements.len());
        for (el, e) in elements.iter().enumerate() {
            let m = e.vertices.len();
            let mut loops = Vec::with_capacity(m);
            for i in 0..m {
                let (a, b) = (e.vertices[i], e.vertices[(i + 1) % m]);
                let id = edge_of[&(a.min(b), a.max(b))];
                loops.push(ElementEdge {
                    edge: id,
                    outward: edges[id].endpoints == [a, b],
                });
            }
            debug_assert!(loops
                .iter()
                .all(|ee| edges[ee.edge].left == el || edges[ee.edge].right == Some(el)));
            element_edges.push(loops);
        }

        let h = elements.iter().map(|e| e.diameter).fold(0.0, f64::max);
        let mesh = PolyMesh {
            vertices,
            elements,
            edges,
            element_edges,
            h,
            layout,
        };
        mesh.validate()?;
        Ok(mesh)
    }
}

fn check_resolution(n: usize, layout: Layout) -> Result<(), MeshError> {
    if n == 0 {
        return Err(MeshError::ZeroResolution);
    }
    let d = layout.divisibility();
    if n % d != 0 {
        return Err(MeshError::BadDivisibility { n, needed: d });
    }
    Ok(())
}

fn frac(num: usize, den: usize) -> f64 {
    num as f64 / den as f64
}

/// Type-A grid: each cell is split into a triangle and a pentagon with a
/// reflex vertex at the interior split point.
pub fn generate_type_a(n: usize, layout: Layout) -> Result<PolyMesh, MeshError> {
    check_resolution(n, layout)?;
    let mut b = MeshBuilder::new();
    for j in 0..n {
        for i in 0..n {
            let a = Point2::new(frac(i, n), frac(j, n));
            let bb = Point2::new(frac(i + 1, n), frac(j, n));
            let c = Point2::new(frac(i + 1, n), frac(j + 1, n));
            let d = Point2::new(frac(i, n), frac(j + 1, n));
            let m = Point2::new(frac(2 * i + 1, 2 * n), frac(4 * j + 1, 4 * n));
            b.element(&[a, bb, m]);
            b.element(&[bb, c, d, a, m]);
        }
    }
    b.finish(layout)
}

/// Type-B grid: each cell is split by a two-kink polyline into two hexagons,
/// each with one reflex vertex.
pub fn generate_type_b(n: usize, layout: Layout) -> Result<PolyMesh, MeshError> {
    check_resolution(n, layout)?;
    let mut b = MeshBuilder::new();
    for j in 0..n {
        for i in 0..n {
            let a = Point2::new(frac(i, n), frac(j, n));
            let bb = Point2::new(frac(i + 1, n), frac(j, n));
            let c = Point2::new(frac(i + 1, n), frac(j + 1, n));
            let d = Point2::new(frac(i, n), frac(j + 1, n));
            let e = Point2::new(frac(2 * i + 1, 2 * n), frac(j, n));
            let f = Point2::new(frac(2 * i + 1, 2 * n), frac(j + 1, n));
            let p1 = Point2::new(frac(10 * i + 3, 10 * n), frac(3 * j + 1, 3 * n));
            let p2 = Point2::new(frac(10 * i + 7, 10 * n), frac(3 * j + 2, 3 * n));
            b.element(&[a, e, p1, p2, f, d]);
            b.element(&[e, bb, c, f, p2, p1]);
        }
    }
    b.finish(layout)
}

/// One of the two grid families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridFamily {
    TypeA,
    TypeB,
}

/// A refinable family of meshes: `level` L yields resolution `base_n * 2^(L-1)`.
#[derive(Debug, Clone, Copy)]
pub struct MeshFamily {
    pub family: GridFamily,
    pub layout: Layout,
    pub base_n: usize,
}

impl MeshFamily {
    pub fn new(family: GridFamily, layout: Layout, base_n: usize) -> Self {
        MeshFamily {
            family,
            layout,
            base_n,
        }
    }

    pub fn resolution(&self, level: usize) -> usize {
        assert!(level >= 1, "refinement levels start at 1");
        self.base_n << (level - 1)
    }

    pub fn at_level(&self, level: usize) -> Result<PolyMesh, MeshError> {
        let n = self.resolution(level);
        match self.family {
            GridFamily::TypeA => generate_type_a(n, self.layout),
            GridFamily::TypeB => generate_type_b(n, self.layout),
        }
    }
}
