//! Quadrature on polygons and edges with a certified exactness degree.
//!
//! Element rules triangulate the (possibly non-convex) polygon by ear
//! clipping and map a conical-product Gauss rule to each triangle. Edge rules
//! are plain Gauss-Legendre. `exact_moment` integrates monomials over a
//! polygon from its boundary with rational arithmetic; it shares no code path
//! with the quadrature rules and serves as their certification oracle.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::mesh::{ear_clip, MeshError, Point2, PolyMesh};

/// Gauss-Legendre nodes/weights on [-1, 1], by Newton iteration.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Chebyshev initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            if n == 1 {
                p1 = x;
            }
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            dp = n as f64 * (x * p - p0) / (x * x - 1.0);
            if n == 1 {
                dp = 1.0;
            }
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

/// Gauss-Legendre rule on [0, 1].
pub fn gauss_legendre_01(n: usize) -> Vec<(f64, f64)> {
    gauss_legendre(n)
        .into_iter()
        .map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect()
}

/// A positive-weight quadrature rule on a planar region.
#[derive(Debug, Clone)]
pub struct QuadRule {
    pub points: Vec<Point2>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

impl QuadRule {
    pub fn integrate(&self, f: impl Fn(Point2) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * f(p))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Conical-product rule on the triangle (p0, p1, p2), exact for total degree
/// `exactness`.
pub fn triangle_rule(p0: Point2, p1: Point2, p2: Point2, exactness: usize) -> QuadRule {
    let nxi = exactness / 2 + 1;
    let neta = exactness / 2 + 2;
    let gx = gauss_legendre_01(nxi);
    let ge = gauss_legendre_01(neta);
    let jac = (p1 - p0).cross(p2 - p0); // = 2 * signed area
    let mut points = Vec::with_capacity(nxi * neta);
    let mut weights = Vec::with_capacity(nxi * neta);
    for &(eta, we) in &ge {
        for &(xi, wx) in &gx {
            let (u, v) = (xi * (1.0 - eta), eta);
            points.push(p0 + (p1 - p0) * u + (p2 - p0) * v);
            weights.push(wx * we * (1.0 - eta) * jac);
        }
    }
    QuadRule {
        points,
        weights,
        exactness,
    }
}

/// Quadrature over a simple polygon via ear clipping.
pub fn polygon_rule(pts: &[Point2], exactness: usize) -> Result<QuadRule, MeshError> {
    let tris = ear_clip(pts)?;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for t in tris {
        let r = triangle_rule(pts[t[0]], pts[t[1]], pts[t[2]], exactness);
        points.extend(r.points);
        weights.extend(r.weights);
    }
    Ok(QuadRule {
        points,
        weights,
        exactness,
    })
}

/// Quadrature over one mesh element.
pub fn element_rule(mesh: &PolyMesh, el: usize, exactness: usize) -> Result<QuadRule, MeshError> {
    polygon_rule(&mesh.element_points(el), exactness)
}

/// Gauss rule along the segment p0 -> p1; `points` are physical locations,
/// `params` the corresponding parameters in [0, 1].
#[derive(Debug, Clone)]
pub struct EdgeRule {
    pub points: Vec<Point2>,
    pub params: Vec<f64>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

impl EdgeRule {
    pub fn integrate(&self, f: impl Fn(Point2) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&p, &w)| w * f(p))
            .sum()
    }
}

pub fn edge_rule(p0: Point2, p1: Point2, exactness: usize) -> EdgeRule {
    let n = exactness / 2 + 1;
    let len = p0.dist(p1);
    let g = gauss_legendre_01(n);
    EdgeRule {
        points: g.iter().map(|&(t, _)| p0 + (p1 - p0) * t).collect(),
        params: g.iter().map(|&(t, _)| t).collect(),
        weights: g.iter().map(|&(_, w)| w * len).collect(),
        exactness,
    }
}

fn binomial(n: usize, k: usize) -> BigInt {
    let mut c = BigInt::one();
    for i in 0..k {
        c = c * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    c
}

/// Exact monomial moment of a simple polygon:
/// integral of x^a y^b over the polygon, computed from the boundary via the
/// divergence theorem in rational arithmetic. f64 vertex coordinates convert
/// to rationals exactly, so the only rounding is the final conversion back.
pub fn exact_moment(pts: &[Point2], a: usize, b: usize) -> f64 {
    let rat = |v: f64| BigRational::from_float(v).expect("finite coordinate");
    let n = pts.len();
    let mut acc = BigRational::zero();
    for i in 0..n {
        let p = pts[i];
        let q = pts[(i + 1) % n];
        let (x0, y0) = (rat(p.x), rat(p.y));
        let (dx, dy) = (rat(q.x) - &x0, rat(q.y) - &y0);
        // integral over t in [0,1] of (x0 + t dx)^(a+1) (y0 + t dy)^b * dy
        let mut seg = BigRational::zero();
        for i1 in 0..=a + 1 {
            let xc = BigRational::from(binomial(a + 1, i1))
                * x0.pow((a + 1 - i1) as i32)
                * dx.pow(i1 as i32);
            for j1 in 0..=b {
                let yc = BigRational::from(binomial(b, j1))
                    * y0.pow((b - j1) as i32)
                    * dy.pow(j1 as i32);
                seg += xc.clone() * yc / BigRational::from(BigInt::from(i1 + j1 + 1));
            }
        }
        acc += seg * &dy;
    }
    acc /= BigRational::from(BigInt::from(a + 1));
    acc.to_f64().expect("moment fits in f64")
}

/// Sweep all monomials up to `rule.exactness` against `exact_moment`.
/// Returns the worst relative error.
pub fn certify_rule(rule: &QuadRule, pts: &[Point2]) -> f64 {
    let mut worst: f64 = 0.0;
    for d in 0..=rule.exactness {
        for a in (0..=d).rev() {
            let b = d - a;
            let got = rule.integrate(|p| p.x.powi(a as i32) * p.y.powi(b as i32));
            let want = exact_moment(pts, a, b);
            let scale = want.abs().max(1e-30);
            worst = worst.max((got - want).abs() / scale);
        }
    }
    worst
}
