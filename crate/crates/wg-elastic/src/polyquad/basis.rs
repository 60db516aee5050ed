//! Polynomial bases: scaled monomials on elements, vector bases on edges.

use crate::mesh::{PolyMesh, Point2};

/// Dimension of the total-degree-r polynomial space in two variables.
pub fn poly_dim(r: usize) -> usize {
    (r + 1) * (r + 2) / 2
}

/// Monomials ((x-xc)/h)^a ((y-yc)/h)^b with a+b <= degree, in graded
/// lexicographic order.
#[derive(Debug, Clone)]
pub struct ScaledMonomialBasis {
    pub center: Point2,
    pub scale: f64,
    pub degree: usize,
    exps: Vec<(u32, u32)>,
}

impl ScaledMonomialBasis {
    pub fn new(center: Point2, scale: f64, degree: usize) -> Self {
        let mut exps = Vec::with_capacity(poly_dim(degree));
        for d in 0..=degree as u32 {
            for a in (0..=d).rev() {
                exps.push((a, d - a));
            }
        }
        ScaledMonomialBasis {
            center,
            scale,
            degree,
            exps,
        }
    }

    pub fn for_element(mesh: &PolyMesh, el: usize, degree: usize) -> Self {
        let e = &mesh.elements[el];
        Self::new(e.centroid, e.diameter, degree)
    }

    pub fn dim(&self) -> usize {
        self.exps.len()
    }

    pub fn exponents(&self, i: usize) -> (u32, u32) {
        self.exps[i]
    }

    pub fn eval(&self, i: usize, p: Point2) -> f64 {
        let (a, b) = self.exps[i];
        let u = (p.x - self.center.x) / self.scale;
        let v = (p.y - self.center.y) / self.scale;
        u.powi(a as i32) * v.powi(b as i32)
    }

    /// Values of all basis functions at `p`.
    pub fn eval_all(&self, p: Point2, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim());
        let u = (p.x - self.center.x) / self.scale;
        let v = (p.y - self.center.y) / self.scale;
        for (i, &(a, b)) in self.exps.iter().enumerate() {
            out[i] = u.powi(a as i32) * v.powi(b as i32);
        }
    }

    pub fn eval_grad(&self, i: usize, p: Point2) -> [f64; 2] {
        let (a, b) = self.exps[i];
        let u = (p.x - self.center.x) / self.scale;
        let v = (p.y - self.center.y) / self.scale;
        let dx = if a == 0 {
            0.0
        } else {
            a as f64 / self.scale * u.powi(a as i32 - 1) * v.powi(b as i32)
        };
        let dy = if b == 0 {
            0.0
        } else {
            b as f64 / self.scale * u.powi(a as i32) * v.powi(b as i32 - 1)
        };
        [dx, dy]
    }

    /// Evaluate the polynomial with the given coefficients at `p`.
    pub fn value(&self, coeffs: &[f64], p: Point2) -> f64 {
        coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| c * self.eval(i, p))
            .sum()
    }
}

fn legendre(j: usize, s: f64) -> f64 {
    match j {
        0 => 1.0,
        1 => s,
        _ => {
            let (mut p0, mut p1) = (1.0, s);
            for k in 2..=j {
                let p2 = ((2 * k - 1) as f64 * s * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            p1
        }
    }
}

/// Vector-valued basis of the edge trace space.
///
/// For k >= 2 the space is all vectors with components of degree k-1 along
/// the edge; the basis tensors Legendre polynomials in the normalized
/// arc-length parameter with the two coordinate directions. For k = 1 the
/// space is spanned by the two translations and the in-plane rotation about
/// the edge midpoint, which is three-dimensional on any non-degenerate edge.
#[derive(Debug, Clone)]
pub struct EdgeBasis {
    pub k: usize,
    pub p0: Point2,
    pub p1: Point2,
    pub mid: Point2,
    pub len: f64,
}

impl EdgeBasis {
    pub fn new(p0: Point2, p1: Point2, k: usize) -> Self {
        assert!(k >= 1);
        EdgeBasis {
            k,
            p0,
            p1,
            mid: (p0 + p1) * 0.5,
            len: p0.dist(p1),
        }
    }

    pub fn for_edge(mesh: &PolyMesh, edge: usize, k: usize) -> Self {
        let e = &mesh.edges[edge];
        Self::new(
            mesh.vertices[e.endpoints[0]],
            mesh.vertices[e.endpoints[1]],
            k,
        )
    }

    pub fn dim(&self) -> usize {
        edge_block_size(self.k)
    }

    pub fn point_at(&self, t: f64) -> Point2 {
        self.p0 + (self.p1 - self.p0) * t
    }

    /// Basis function `i` at parameter t in [0, 1].
    pub fn eval_at(&self, i: usize, t: f64) -> [f64; 2] {
        if self.k == 1 {
            let p = self.point_at(t);
            match i {
                0 => [1.0, 0.0],
                1 => [0.0, 1.0],
                2 => [
                    -(p.y - self.mid.y) / self.len,
                    (p.x - self.mid.x) / self.len,
                ],
                _ => unreachable!("edge basis index"),
            }
        } else {
            let s = 2.0 * t - 1.0;
            let v = legendre(i / 2, s);
            if i % 2 == 0 {
                [v, 0.0]
            } else {
                [0.0, v]
            }
        }
    }

    /// Vector value of the expansion with the given coefficients at t.
    pub fn value_at(&self, coeffs: &[f64], t: f64) -> [f64; 2] {
        let mut out = [0.0, 0.0];
        for (i, &c) in coeffs.iter().enumerate() {
            let b = self.eval_at(i, t);
            out[0] += c * b[0];
            out[1] += c * b[1];
        }
        out
    }
}

/// Number of coefficients stored per edge: 3 for k = 1, 2k for k >= 2.
pub fn edge_block_size(k: usize) -> usize {
    if k == 1 {
        3
    } else {
        2 * k
    }
}
