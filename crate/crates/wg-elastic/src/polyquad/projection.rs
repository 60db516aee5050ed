//! L2 projections onto element and edge polynomial spaces.

use faer::prelude::Solve;
use faer::{Mat, Side};
use thiserror::Error;

use crate::mesh::{MeshError, PolyMesh, Point2};
use crate::polyquad::basis::{EdgeBasis, ScaledMonomialBasis};
use crate::polyquad::quadrature::{edge_rule, element_rule, EdgeRule, QuadRule};

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error("mass/Gram matrix is singular (degenerate geometry)")]
    SingularMass,
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Cholesky factorization of an SPD matrix, falling back to a spectral
/// decomposition (with an explicit singularity check) when the matrix is too
/// ill-conditioned for plain Cholesky. Solves apply two steps of iterative
/// refinement so that moderately conditioned mass matrices still give
/// coefficients near machine accuracy.
pub struct SpdFactor {
    mat: Mat<f64>,
    kind: FactorKind,
}

enum FactorKind {
    Llt(faer::linalg::solvers::Llt<f64>),
    Eigen { u: Mat<f64>, s_inv: Vec<f64> },
}

impl SpdFactor {
    pub fn new(m: &Mat<f64>) -> Result<Self, ProjectionError> {
        let kind = if let Ok(llt) = m.llt(Side::Lower) {
            FactorKind::Llt(llt)
        } else {
            let evd = m
                .self_adjoint_eigen(Side::Lower)
                .map_err(|_| ProjectionError::SingularMass)?;
            let n = m.nrows();
            let smax = (0..n).map(|i| evd.S()[i]).fold(0.0f64, f64::max);
            let mut s_inv = Vec::with_capacity(n);
            for i in 0..n {
                let s = evd.S()[i];
                if s <= 1e-14 * smax {
                    return Err(ProjectionError::SingularMass);
                }
                s_inv.push(1.0 / s);
            }
            FactorKind::Eigen {
                u: evd.U().to_owned(),
                s_inv,
            }
        };
        Ok(SpdFactor {
            mat: m.clone(),
            kind,
        })
    }

    pub fn solve_vec(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let b = Mat::from_fn(n, 1, |i, _| rhs[i]);
        let x = self.solve_mat(&b);
        (0..n).map(|i| x[(i, 0)]).collect()
    }

    pub fn solve_mat(&self, rhs: &Mat<f64>) -> Mat<f64> {
        let mut x = self.solve_once(rhs);
        for _ in 0..2 {
            let r = rhs - &self.mat * &x;
            x += self.solve_once(&r);
        }
        x
    }

    fn solve_once(&self, rhs: &Mat<f64>) -> Mat<f64> {
        match &self.kind {
            FactorKind::Llt(llt) => llt.solve(rhs),
            FactorKind::Eigen { u, s_inv } => {
                let ut_b = u.transpose() * rhs;
                let mut scaled = ut_b.clone();
                for j in 0..scaled.ncols() {
                    for i in 0..scaled.nrows() {
                        scaled[(i, j)] *= s_inv[i];
                    }
                }
                u * scaled
            }
        }
    }
}

/// L2 projector onto scalar polynomials of a fixed degree on one element.
pub struct ElementProjector {
    pub basis: ScaledMonomialBasis,
    pub rule: QuadRule,
    pub mass: Mat<f64>,
    factor: SpdFactor,
}

impl ElementProjector {
    /// `data_degree` is the polynomial degree of the functions that will be
    /// projected; the quadrature is made exact for all products.
    pub fn new(
        mesh: &PolyMesh,
        el: usize,
        degree: usize,
        data_degree: usize,
    ) -> Result<Self, ProjectionError> {
        let basis = ScaledMonomialBasis::for_element(mesh, el, degree);
        let exactness = (2 * degree).max(degree + data_degree);
        let rule = element_rule(mesh, el, exactness)?;
        let mass = mass_matrix(&basis, &rule);
        let factor = SpdFactor::new(&mass)?;
        Ok(ElementProjector {
            basis,
            rule,
            mass,
            factor,
        })
    }

    pub fn project_scalar(&self, f: impl Fn(Point2) -> f64) -> Vec<f64> {
        let n = self.basis.dim();
        let mut rhs = vec![0.0; n];
        let mut vals = vec![0.0; n];
        for (q, &p) in self.rule.points.iter().enumerate() {
            let w = self.rule.weights[q];
            let fv = f(p);
            self.basis.eval_all(p, &mut vals);
            for i in 0..n {
                rhs[i] += w * fv * vals[i];
            }
        }
        self.factor.solve_vec(&rhs)
    }

    pub fn project_vector(&self, f: impl Fn(Point2) -> [f64; 2]) -> [Vec<f64>; 2] {
        let n = self.basis.dim();
        let mut rhs = Mat::<f64>::zeros(n, 2);
        let mut vals = vec![0.0; n];
        for (q, &p) in self.rule.points.iter().enumerate() {
            let w = self.rule.weights[q];
            let fv = f(p);
            self.basis.eval_all(p, &mut vals);
            for i in 0..n {
                rhs[(i, 0)] += w * fv[0] * vals[i];
                rhs[(i, 1)] += w * fv[1] * vals[i];
            }
        }
        let x = self.factor.solve_mat(&rhs);
        [
            (0..n).map(|i| x[(i, 0)]).collect(),
            (0..n).map(|i| x[(i, 1)]).collect(),
        ]
    }

    /// 2-norm condition number of the mass matrix (diagnostic).
    pub fn mass_condition(&self) -> f64 {
        let evd = self.mass.self_adjoint_eigen(Side::Lower).unwrap();
        let n = self.mass.nrows();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..n {
            lo = lo.min(evd.S()[i]);
            hi = hi.max(evd.S()[i]);
        }
        hi / lo
    }
}

pub fn mass_matrix(basis: &ScaledMonomialBasis, rule: &QuadRule) -> Mat<f64> {
    let n = basis.dim();
    let mut m = Mat::<f64>::zeros(n, n);
    let mut vals = vec![0.0; n];
    for (q, &p) in rule.points.iter().enumerate() {
        let w = rule.weights[q];
        basis.eval_all(p, &mut vals);
        for i in 0..n {
            let wi = w * vals[i];
            for j in i..n {
                m[(i, j)] += wi * vals[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
    m
}

/// L2 projector onto the vector trace space of one edge.
pub struct EdgeProjector {
    pub basis: EdgeBasis,
    pub rule: EdgeRule,
    pub gram: Mat<f64>,
    factor: SpdFactor,
}

impl EdgeProjector {
    pub fn new(
        mesh: &PolyMesh,
        edge: usize,
        k: usize,
        data_degree: usize,
    ) -> Result<Self, ProjectionError> {
        let basis = EdgeBasis::for_edge(mesh, edge, k);
        let own_degree = if k == 1 { 1 } else { k - 1 };
        let exactness = (2 * own_degree).max(own_degree + data_degree);
        let rule = edge_rule(basis.p0, basis.p1, exactness);
        let n = basis.dim();
        let mut gram = Mat::<f64>::zeros(n, n);
        for (q, &t) in rule.params.iter().enumerate() {
            let w = rule.weights[q];
            for i in 0..n {
                let bi = basis.eval_at(i, t);
                for j in i..n {
                    let bj = basis.eval_at(j, t);
                    gram[(i, j)] += w * (bi[0] * bj[0] + bi[1] * bj[1]);
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                gram[(i, j)] = gram[(j, i)];
            }
        }
        let factor = SpdFactor::new(&gram)?;
        Ok(EdgeProjector {
            basis,
            rule,
            gram,
            factor,
        })
    }

    pub fn project(&self, f: impl Fn(Point2) -> [f64; 2]) -> Vec<f64> {
        let n = self.basis.dim();
        let mut rhs = vec![0.0; n];
        for (q, &t) in self.rule.params.iter().enumerate() {
            let w = self.rule.weights[q];
            let fv = f(self.rule.points[q]);
            for i in 0..n {
                let bi = self.basis.eval_at(i, t);
                rhs[i] += w * (fv[0] * bi[0] + fv[1] * bi[1]);
            }
        }
        self.factor.solve_vec(&rhs)
    }
}

/// Interpolate a (possibly subdomain-wise defined) vector field into the
/// global weak space: interior L2 projections per element, trace projections
/// per edge. On interface edges the two one-sided traces fill the two blocks;
/// elsewhere the single-valued trace of the adjacent subdomain is used.
/// Returns coefficients in the full layout.
pub fn project_qh(
    mesh: &PolyMesh,
    space: &crate::weakops::WgSpace,
    layout: &crate::system::DofLayout,
    data_degree: usize,
    w: impl Fn(Point2, usize) -> [f64; 2],
) -> Result<Vec<f64>, ProjectionError> {
    use crate::mesh::EdgeTag;
    let mut full = vec![0.0; layout.n_full];
    for el in 0..mesh.elements.len() {
        let sub = mesh.elements[el].subdomain;
        let proj = ElementProjector::new(mesh, el, space.k, data_degree)?;
        let [cx, cy] = proj.project_vector(|p| w(p, sub));
        let off = layout.elem_offset[el];
        let nk = cx.len();
        full[off..off + nk].copy_from_slice(&cx);
        full[off + nk..off + 2 * nk].copy_from_slice(&cy);
    }
    for (e, edge) in mesh.edges.iter().enumerate() {
        let proj = EdgeProjector::new(mesh, e, space.k, data_degree)?;
        let sub_left = mesh.elements[edge.left].subdomain;
        let coeffs = proj.project(|p| w(p, sub_left));
        let off = layout.edge_offset[e];
        full[off..off + coeffs.len()].copy_from_slice(&coeffs);
        if let EdgeTag::Interface(_) = edge.tag {
            let sub_right = mesh.elements[edge.right.unwrap()].subdomain;
            let coeffs_r = proj.project(|p| w(p, sub_right));
            let off_r = layout.edge_offset_r[e].unwrap();
            full[off_r..off_r + coeffs_r.len()].copy_from_slice(&coeffs_r);
        }
    }
    Ok(full)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_type_a, generate_type_b, Layout};
    use faer::prelude::SolveLstsq;

    #[test]
    fn projection_reproduces_subspace_elements() {
        let mesh = generate_type_a(2, Layout::Vertical).unwrap();
        for el in [0usize, 1] {
            let proj = ElementProjector::new(&mesh, el, 2, 3).unwrap();
            // w in P_2 -> Q w = w
            let c = &proj.basis.center;
            let s = proj.basis.scale;
            let w = |p: Point2| 0.7 - 1.3 * (p.x - c.x) / s + 0.4 * ((p.y - c.y) / s).powi(2);
            let coeffs = proj.project_scalar(w);
            for (q, &p) in proj.rule.points.iter().enumerate().step_by(5) {
                let _ = q;
                assert!((proj.basis.value(&coeffs, p) - w(p)).abs() < 1e-12);
            }
            // zero projects to zero
            let z = proj.project_scalar(|_| 0.0);
            assert!(z.iter().all(|&v| v.abs() < 1e-14));
        }
    }

    #[test]
    fn projector_is_idempotent() {
        let mesh = generate_type_b(2, Layout::Vertical).unwrap();
        let proj = ElementProjector::new(&mesh, 3, 2, 7).unwrap();
        let w = |p: Point2| (3.1 * p.x).sin() * (2.7 * p.y).cos();
        let once = proj.project_scalar(w);
        let basis = proj.basis.clone();
        let twice = proj.project_scalar(|p| basis.value(&once, p));
        for i in 0..once.len() {
            assert!((once[i] - twice[i]).abs() < 1e-12, "coefficient {i}");
        }
    }

    #[test]
    fn residual_is_l2_orthogonal_to_basis() {
        let mesh = generate_type_a(4, Layout::Square).unwrap();
        let proj = ElementProjector::new(&mesh, 7, 3, 8).unwrap();
        let w = |p: Point2| p.x.powi(5) - 2.0 * p.y.powi(4) + p.x * p.y;
        let coeffs = proj.project_scalar(w);
        let norm_w = proj.rule.integrate(|p| w(p) * w(p)).sqrt();
        for i in 0..proj.basis.dim() {
            let r = proj
                .rule
                .integrate(|p| (w(p) - proj.basis.value(&coeffs, p)) * proj.basis.eval(i, p));
            assert!(r.abs() < 1e-11 * norm_w.max(1.0), "basis {i}: residual {r}");
        }
    }

    #[test]
    fn interior_projection_matches_dense_least_squares_oracle() {
        // w = (x^(k+1), 0): compare against an independent dense solve of the
        // quadrature-built normal equations.
        let mesh = generate_type_a(2, Layout::Vertical).unwrap();
        let k = 2;
        let proj = ElementProjector::new(&mesh, 1, k, k + 1).unwrap();
        let w = |p: Point2| [p.x.powi(k as i32 + 1), 0.0];
        let ours = proj.project_vector(w);

        // oracle: weighted Vandermonde least squares at the quadrature points
        let nq = proj.rule.len();
        let n = proj.basis.dim();
        let mut a = Mat::<f64>::zeros(nq, n);
        let mut b = Mat::<f64>::zeros(nq, 1);
        for q in 0..nq {
            let p = proj.rule.points[q];
            let sw = proj.rule.weights[q].sqrt();
            for j in 0..n {
                a[(q, j)] = sw * proj.basis.eval(j, p);
            }
            b[(q, 0)] = sw * w(p)[0];
        }
        let x = a.col_piv_qr().solve_lstsq(&b);
        for i in 0..n {
            assert!((ours[0][i] - x[(i, 0)]).abs() < 1e-11, "coeff {i}");
            assert!(ours[1][i].abs() < 1e-13);
        }
    }

    #[test]
    fn edge_projection_constants_and_rigid_motions() {
        let mesh = generate_type_a(2, Layout::Vertical).unwrap();
        for k in 1..=3 {
            let proj = EdgeProjector::new(&mesh, 0, k, 2).unwrap();
            let coeffs = proj.project(|_| [2.0, -1.0]);
            for &t in &[0.0, 0.37, 1.0] {
                let v = proj.basis.value_at(&coeffs, t);
                assert!((v[0] - 2.0).abs() < 1e-12 && (v[1] + 1.0).abs() < 1e-12);
            }
        }
        // k = 1 reproduces a rigid motion trace exactly
        let proj = EdgeProjector::new(&mesh, 2, 1, 2).unwrap();
        let rm = |p: Point2| [0.3 - 1.1 * p.y, -0.2 + 1.1 * p.x];
        let coeffs = proj.project(rm);
        for &t in &[0.1, 0.5, 0.9] {
            let p = proj.basis.point_at(t);
            let v = proj.basis.value_at(&coeffs, t);
            let want = rm(p);
            assert!((v[0] - want[0]).abs() < 1e-12 && (v[1] - want[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn edge_projection_k1_matches_dense_oracle() {
        // best fit of (s^2, 0) in the three-dimensional k=1 trace space,
        // cross-checked against a dense least-squares solve.
        let mesh = generate_type_a(2, Layout::Vertical).unwrap();
        let proj = EdgeProjector::new(&mesh, 0, 1, 2).unwrap();
        let basis = &proj.basis;
        let f = |t: f64| {
            let s = 2.0 * t - 1.0;
            [s * s, 0.0]
        };
        let coeffs = proj.project(|p| {
            let t = (p - basis.p0).dot(basis.p1 - basis.p0) / (basis.len * basis.len);
            f(t)
        });

        let rule = &proj.rule;
        let nq = rule.params.len();
        let mut a = Mat::<f64>::zeros(2 * nq, 3);
        let mut b = Mat::<f64>::zeros(2 * nq, 1);
        for q in 0..nq {
            let t = rule.params[q];
            let sw = rule.weights[q].sqrt();
            for j in 0..3 {
                let bj = basis.eval_at(j, t);
                a[(2 * q, j)] = sw * bj[0];
                a[(2 * q + 1, j)] = sw * bj[1];
            }
            let fv = f(t);
            b[(2 * q, 0)] = sw * fv[0];
            b[(2 * q + 1, 0)] = sw * fv[1];
        }
        let x = a.col_piv_qr().solve_lstsq(&b);
        for j in 0..3 {
            assert!((coeffs[j] - x[(j, 0)]).abs() < 1e-11);
        }
    }
}
