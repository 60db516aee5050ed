//! Element-local weak operators and stiffness blocks.
//!
//! A weak function on an element is a pair {v0, vb}: an interior vector
//! polynomial of degree k and an independent trace on each boundary edge.
//! The discrete weak gradient of such a pair is the polynomial matrix
//! G in [P_r1]^{2x2} defined by testing an integration-by-parts identity,
//!
//!   (G, phi)_T = -(v0, div phi)_T + <vb, phi n>_dT   for all phi,
//!
//! the weak strain is its symmetric part, and the weak divergence is the
//! scalar analogue in P_r2. No stabilizer term is used anywhere; the raised
//! degrees r1, r2 carry the stability.

use faer::{Mat, Side};
use thiserror::Error;

use crate::mesh::{ElementEdge, MeshError, Point2, PolyMesh};
use crate::polyquad::basis::{edge_block_size, EdgeBasis, ScaledMonomialBasis};
use crate::polyquad::projection::{ProjectionError, SpdFactor};
use crate::polyquad::quadrature::{edge_rule, element_rule, EdgeRule, QuadRule};

#[derive(Debug, Error)]
pub enum WeakOpsError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error("non-positive material coefficients")]
    BadCoefficients,
    #[error("bubble function vanishes at the element barycenter")]
    DegenerateBubble,
}

/// Rule for the operator degrees r1 = r2, given k and the edge count of an
/// element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegreePolicy {
    /// r = k + 1; the workhorse on the triangle/pentagon grids.
    Numerics,
    /// r = k + 2; used on the hexagon grids.
    NumericsPlus,
    /// r = N + k - 1 for an N-gon (convex analysis choice).
    TheoryConvex,
    /// r = 2N + k - 1 (non-convex analysis choice; expensive).
    TheoryNonconvex,
    Fixed(usize),
}

impl DegreePolicy {
    pub fn degrees(self, k: usize, n_edges: usize) -> (usize, usize) {
        let r = match self {
            DegreePolicy::Numerics => k + 1,
            DegreePolicy::NumericsPlus => k + 2,
            DegreePolicy::TheoryConvex => n_edges + k - 1,
            DegreePolicy::TheoryNonconvex => 2 * n_edges + k - 1,
            DegreePolicy::Fixed(r) => r,
        };
        let r = r.max(k).max(1);
        (r, r)
    }
}

/// The discrete space: interior degree k plus the operator degree policy.
#[derive(Debug, Clone, Copy)]
pub struct WgSpace {
    pub k: usize,
    pub policy: DegreePolicy,
}

impl WgSpace {
    pub fn new(k: usize, policy: DegreePolicy) -> Self {
        assert!(k >= 1, "interior degree must be at least 1");
        WgSpace { k, policy }
    }

    pub fn degrees(&self, mesh: &PolyMesh, el: usize) -> (usize, usize) {
        self.policy.degrees(self.k, mesh.elements[el].vertices.len())
    }

    /// Interior coefficients per element: both components of [P_k]^2.
    pub fn interior_dim(&self) -> usize {
        (self.k + 1) * (self.k + 2)
    }

    pub fn edge_dim(&self) -> usize {
        edge_block_size(self.k)
    }

    pub fn local_dof_count(&self, mesh: &PolyMesh, el: usize) -> usize {
        self.interior_dim() + mesh.elements[el].vertices.len() * self.edge_dim()
    }
}

/// Per-element operator matrices mapping local weak-function coefficients to
/// weak gradient / strain / divergence coefficients, plus the two stiffness
/// blocks.
pub struct ElementOperators {
    pub el: usize,
    pub n_int: usize,
    pub edge_dim: usize,
    pub ndof: usize,
    pub basis_k: ScaledMonomialBasis,
    pub basis_r1: ScaledMonomialBasis,
    pub basis_r2: ScaledMonomialBasis,
    pub rule: QuadRule,
    pub edge_rules: Vec<EdgeRule>,
    pub edge_bases: Vec<EdgeBasis>,
    /// Whether the stored edge direction is this element's CCW direction.
    pub edge_outward: Vec<bool>,
    pub factor_r1: SpdFactor,
    pub factor_r2: SpdFactor,
    pub mass_r1: Mat<f64>,
    pub mass_r2: Mat<f64>,
    /// Weak gradient: 4 row blocks (11, 12, 21, 22) of dim P_r1 each.
    pub g: Mat<f64>,
    /// Weak strain: 3 row blocks (11, 12, 22).
    pub e: Mat<f64>,
    /// Weak divergence: dim P_r2 rows.
    pub d: Mat<f64>,
    /// Strain part of the stiffness: E^T diag(M,2M,M) E.
    pub ke: Mat<f64>,
    /// Divergence part: D^T M D.
    pub kd: Mat<f64>,
}

impl ElementOperators {
    /// Build all operator matrices for one element. `data_degree` is the
    /// highest polynomial degree of problem data that must be integrated
    /// exactly against the bases.
    pub fn build(
        mesh: &PolyMesh,
        el: usize,
        space: &WgSpace,
        data_degree: usize,
    ) -> Result<Self, WeakOpsError> {
        let k = space.k;
        let (r1, r2) = space.degrees(mesh, el);
        let rmax = r1.max(r2).max(k);
        let exactness = (2 * rmax + 2).max(rmax + data_degree);

        let basis_k = ScaledMonomialBasis::for_element(mesh, el, k);
        let basis_r1 = ScaledMonomialBasis::for_element(mesh, el, r1);
        let basis_r2 = ScaledMonomialBasis::for_element(mesh, el, r2);
        let rule = element_rule(mesh, el, exactness)?;

        let nk = basis_k.dim();
        let np1 = basis_r1.dim();
        let np2 = basis_r2.dim();
        let eb = space.edge_dim();
        let loops = &mesh.element_edges[el];
        let nedges = loops.len();
        let ndof = 2 * nk + nedges * eb;

        let mass_r1 = crate::polyquad::projection::mass_matrix(&basis_r1, &rule);
        let mass_r2 = crate::polyquad::projection::mass_matrix(&basis_r2, &rule);
        let factor_r1 = SpdFactor::new(&mass_r1)?;
        let factor_r2 = SpdFactor::new(&mass_r2)?;

        // Volume coupling: (m_j^(k), d_dir m_i^(r)) for both operator bases.
        let grad_pair = |basis_r: &ScaledMonomialBasis| {
            let np = basis_r.dim();
            let mut bx = Mat::<f64>::zeros(nk, np);
            let mut by = Mat::<f64>::zeros(nk, np);
            let mut vk = vec![0.0; nk];
            for (q, &p) in rule.points.iter().enumerate() {
                let w = rule.weights[q];
                basis_k.eval_all(p, &mut vk);
                for i in 0..np {
                    let gr = basis_r.eval_grad(i, p);
                    for j in 0..nk {
                        bx[(j, i)] += w * vk[j] * gr[0];
                        by[(j, i)] += w * vk[j] * gr[1];
                    }
                }
            }
            (bx, by)
        };
        let (b1x, b1y) = grad_pair(&basis_r1);
        let (b2x, b2y) = grad_pair(&basis_r2);

        // Edge coupling: t1[a][dir][j, i] = <(phi_j)_dir, m_i^(r1)>_e, and the
        // same against the r2 basis.
        let mut edge_rules = Vec::with_capacity(nedges);
        let mut edge_bases = Vec::with_capacity(nedges);
        let mut t1: Vec<[Mat<f64>; 2]> = Vec::with_capacity(nedges);
        let mut t2: Vec<[Mat<f64>; 2]> = Vec::with_capacity(nedges);
        for ee in loops {
            let eb_basis = EdgeBasis::for_edge(mesh, ee.edge, k);
            let erule = edge_rule(eb_basis.p0, eb_basis.p1, exactness);
            let couple = |basis_r: &ScaledMonomialBasis| {
                let np = basis_r.dim();
                let mut tx = Mat::<f64>::zeros(eb, np);
                let mut ty = Mat::<f64>::zeros(eb, np);
                for (q, &t) in erule.params.iter().enumerate() {
                    let w = erule.weights[q];
                    let p = erule.points[q];
                    for j in 0..eb {
                        let phi = eb_basis.eval_at(j, t);
                        for i in 0..np {
                            let m = basis_r.eval(i, p);
                            tx[(j, i)] += w * phi[0] * m;
                            ty[(j, i)] += w * phi[1] * m;
                        }
                    }
                }
                [tx, ty]
            };
            t1.push(couple(&basis_r1));
            t2.push(couple(&basis_r2));
            edge_rules.push(erule);
            edge_bases.push(eb_basis);
        }
        let edge_outward: Vec<bool> = loops.iter().map(|ee| ee.outward).collect();

        // Right-hand sides of the defining equations, then mass solves.
        // Row blocks of rg: (alpha, beta) in order 11, 12, 21, 22.
        let mut rg = Mat::<f64>::zeros(4 * np1, ndof);
        let mut rd = Mat::<f64>::zeros(np2, ndof);
        for (ab, (alpha, beta)) in [(0usize, 0usize), (0, 1), (1, 0), (1, 1)]
            .iter()
            .enumerate()
        {
            let row0 = ab * np1;
            let b = if *beta == 0 { &b1x } else { &b1y };
            for j in 0..nk {
                for i in 0..np1 {
                    rg[(row0 + i, *alpha * nk + j)] = -b[(j, i)];
                }
            }
            for (a, ee) in loops.iter().enumerate() {
                let n = mesh.outward_normal(el, *ee);
                let nb = if *beta == 0 { n.x } else { n.y };
                let t = &t1[a][*alpha];
                let col0 = 2 * nk + a * eb;
                for j in 0..eb {
                    for i in 0..np1 {
                        rg[(row0 + i, col0 + j)] += nb * t[(j, i)];
                    }
                }
            }
        }
        for alpha in 0..2 {
            let b = if alpha == 0 { &b2x } else { &b2y };
            for j in 0..nk {
                for i in 0..np2 {
                    rd[(i, alpha * nk + j)] = -b[(j, i)];
                }
            }
        }
        for (a, ee) in loops.iter().enumerate() {
            let n = mesh.outward_normal(el, *ee);
            let col0 = 2 * nk + a * eb;
            for (alpha, na) in [n.x, n.y].iter().enumerate() {
                let t = &t2[a][alpha];
                for j in 0..eb {
                    for i in 0..np2 {
                        rd[(i, col0 + j)] += na * t[(j, i)];
                    }
                }
            }
        }

        let g = solve_blocks(&factor_r1, &rg, np1);
        let d = factor_r2.solve_mat(&rd);

        // strain = symmetric part of the gradient, stored as (11, 12, 22)
        let mut e = Mat::<f64>::zeros(3 * np1, ndof);
        for c in 0..ndof {
            for i in 0..np1 {
                e[(i, c)] = g[(i, c)];
                e[(np1 + i, c)] = 0.5 * (g[(np1 + i, c)] + g[(2 * np1 + i, c)]);
                e[(2 * np1 + i, c)] = g[(3 * np1 + i, c)];
            }
        }

        // ke = E^T diag(M, 2M, M) E; kd = D^T M D
        let mut me = Mat::<f64>::zeros(3 * np1, ndof);
        for blk in 0..3 {
            let scale = if blk == 1 { 2.0 } else { 1.0 };
            let sub = e.as_ref().submatrix(blk * np1, 0, np1, ndof);
            let prod = &mass_r1 * sub;
            for c in 0..ndof {
                for i in 0..np1 {
                    me[(blk * np1 + i, c)] = scale * prod[(i, c)];
                }
            }
        }
        let ke = e.transpose() * &me;
        let kd = d.transpose() * &mass_r2 * &d;

        Ok(ElementOperators {
            el,
            n_int: 2 * nk,
            edge_dim: eb,
            ndof,
            basis_k,
            basis_r1,
            basis_r2,
            rule,
            edge_rules,
            edge_bases,
            edge_outward,
            factor_r1,
            factor_r2,
            mass_r1,
            mass_r2,
            g,
            e,
            d,
            ke,
            kd,
        })
    }

    /// Local stiffness for coefficients (mu, lambda): A = 2 mu Ke + lambda Kd.
    pub fn stiffness(&self, mu: f64, lambda: f64) -> Result<Mat<f64>, WeakOpsError> {
        if mu <= 0.0 || lambda <= 0.0 {
            return Err(WeakOpsError::BadCoefficients);
        }
        let mut a = Mat::<f64>::zeros(self.ndof, self.ndof);
        for i in 0..self.ndof {
            for j in 0..self.ndof {
                a[(i, j)] = 2.0 * mu * self.ke[(i, j)] + lambda * self.kd[(i, j)];
            }
        }
        Ok(a)
    }

    pub fn weak_gradient(&self, dofs: &[f64]) -> Vec<f64> {
        mat_vec(&self.g, dofs)
    }

    pub fn weak_strain(&self, dofs: &[f64]) -> Vec<f64> {
        mat_vec(&self.e, dofs)
    }

    pub fn weak_divergence(&self, dofs: &[f64]) -> Vec<f64> {
        mat_vec(&self.d, dofs)
    }

    /// Strain by the defining equation with symmetric test matrices
    /// (symmetrize-then-solve); algebraically equal to `weak_strain`.
    pub fn weak_strain_direct(&self, dofs: &[f64]) -> Vec<f64> {
        let np = self.basis_r1.dim();
        // rhs blocks of the gradient equation, before the mass solve
        let raw = |ab: usize| -> Vec<f64> {
            let mut out = vec![0.0; np];
            for i in 0..np {
                let mut acc = 0.0;
                for j in 0..np {
                    let mut gj = 0.0;
                    for (c, &v) in dofs.iter().enumerate() {
                        gj += self.g[(ab * np + j, c)] * v;
                    }
                    acc += self.mass_r1[(i, j)] * gj;
                }
                out[i] = acc;
            }
            out
        };
        let r11 = raw(0);
        let r12 = raw(1);
        let r21 = raw(2);
        let r22 = raw(3);
        let sym12: Vec<f64> = r12.iter().zip(&r21).map(|(a, b)| 0.5 * (a + b)).collect();
        let s11 = self.factor_r1.solve_vec(&r11);
        let s12 = self.factor_r1.solve_vec(&sym12);
        let s22 = self.factor_r1.solve_vec(&r22);
        [s11, s12, s22].concat()
    }

    /// Project a scalar function onto P_r1 on this element.
    pub fn project_r1(&self, f: impl Fn(Point2) -> f64) -> Vec<f64> {
        project_with(&self.basis_r1, &self.factor_r1, &self.rule, f)
    }

    /// Project a scalar function onto P_r2 on this element.
    pub fn project_r2(&self, f: impl Fn(Point2) -> f64) -> Vec<f64> {
        project_with(&self.basis_r2, &self.factor_r2, &self.rule, f)
    }

    /// Weak gradient of the pair {w, w|boundary} for an arbitrary smooth w,
    /// from the defining right side (not the projection shortcut).
    pub fn weak_gradient_of_fn(&self, w: impl Fn(Point2) -> [f64; 2]) -> Vec<f64> {
        let np = self.basis_r1.dim();
        let mut rhs = Mat::<f64>::zeros(np, 4);
        for (q, &p) in self.rule.points.iter().enumerate() {
            let wt = self.rule.weights[q];
            let wv = w(p);
            for i in 0..np {
                let gr = self.basis_r1.eval_grad(i, p);
                rhs[(i, 0)] -= wt * wv[0] * gr[0];
                rhs[(i, 1)] -= wt * wv[0] * gr[1];
                rhs[(i, 2)] -= wt * wv[1] * gr[0];
                rhs[(i, 3)] -= wt * wv[1] * gr[1];
            }
        }
        for (a, erule) in self.edge_rules.iter().enumerate() {
            let n = self.outward(a);
            for (q, &p) in erule.points.iter().enumerate() {
                let wt = erule.weights[q];
                let wv = w(p);
                for i in 0..np {
                    let m = self.basis_r1.eval(i, p);
                    rhs[(i, 0)] += wt * wv[0] * m * n.x;
                    rhs[(i, 1)] += wt * wv[0] * m * n.y;
                    rhs[(i, 2)] += wt * wv[1] * m * n.x;
                    rhs[(i, 3)] += wt * wv[1] * m * n.y;
                }
            }
        }
        let x = self.factor_r1.solve_mat(&rhs);
        let mut out = vec![0.0; 4 * np];
        for ab in 0..4 {
            for i in 0..np {
                out[ab * np + i] = x[(i, ab)];
            }
        }
        out
    }

    /// Weak strain of {w, w|boundary} by the defining equation.
    pub fn weak_strain_of_fn(&self, w: impl Fn(Point2) -> [f64; 2]) -> Vec<f64> {
        let g = self.weak_gradient_of_fn(w);
        let np = self.basis_r1.dim();
        let mut out = vec![0.0; 3 * np];
        for i in 0..np {
            out[i] = g[i];
            out[np + i] = 0.5 * (g[np + i] + g[2 * np + i]);
            out[2 * np + i] = g[3 * np + i];
        }
        out
    }

    /// Weak divergence of {w, w|boundary} by the defining equation.
    pub fn weak_divergence_of_fn(&self, w: impl Fn(Point2) -> [f64; 2]) -> Vec<f64> {
        let np = self.basis_r2.dim();
        let mut rhs = vec![0.0; np];
        for (q, &p) in self.rule.points.iter().enumerate() {
            let wt = self.rule.weights[q];
            let wv = w(p);
            for i in 0..np {
                let gr = self.basis_r2.eval_grad(i, p);
                rhs[i] -= wt * (wv[0] * gr[0] + wv[1] * gr[1]);
            }
        }
        for (a, erule) in self.edge_rules.iter().enumerate() {
            let n = self.outward(a);
            for (q, &p) in erule.points.iter().enumerate() {
                let wt = erule.weights[q];
                let wv = w(p);
                let wn = wv[0] * n.x + wv[1] * n.y;
                for i in 0..np {
                    rhs[i] += wt * wn * self.basis_r2.eval(i, p);
                }
            }
        }
        self.factor_r2.solve_vec(&rhs)
    }

    /// Outward normal of the a-th edge in this element's loop.
    pub fn outward(&self, a: usize) -> Point2 {
        let p0 = self.edge_bases[a].p0;
        let p1 = self.edge_bases[a].p1;
        let d = p1 - p0;
        let n = Point2::new(d.y, -d.x) * (1.0 / d.norm());
        if self.edge_outward[a] {
            n
        } else {
            n * -1.0
        }
    }
}

fn project_with(
    basis: &ScaledMonomialBasis,
    factor: &SpdFactor,
    rule: &QuadRule,
    f: impl Fn(Point2) -> f64,
) -> Vec<f64> {
    let n = basis.dim();
    let mut rhs = vec![0.0; n];
    let mut vals = vec![0.0; n];
    for (q, &p) in rule.points.iter().enumerate() {
        let w = rule.weights[q];
        let fv = f(p);
        basis.eval_all(p, &mut vals);
        for i in 0..n {
            rhs[i] += w * fv * vals[i];
        }
    }
    factor.solve_vec(&rhs)
}

pub(crate) fn mat_vec(m: &Mat<f64>, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m.nrows()];
    for j in 0..m.ncols() {
        let vj = v[j];
        if vj == 0.0 {
            continue;
        }
        for i in 0..m.nrows() {
            out[i] += m[(i, j)] * vj;
        }
    }
    out
}

fn solve_blocks(factor: &SpdFactor, rhs: &Mat<f64>, np: usize) -> Mat<f64> {
    let nblocks = rhs.nrows() / np;
    let ndof = rhs.ncols();
    let mut out = Mat::<f64>::zeros(rhs.nrows(), ndof);
    for b in 0..nblocks {
        let sub = rhs.as_ref().submatrix(b * np, 0, np, ndof).to_owned();
        let x = factor.solve_mat(&sub);
        for c in 0..ndof {
            for i in 0..np {
                out[(b * np + i, c)] = x[(i, c)];
            }
        }
    }
    out
}

/// Interpolate a smooth vector field into the local weak space of one
/// element: L2-project onto the interior space and onto every edge trace
/// space. Returns the local coefficient vector.
pub fn local_interpolant(
    mesh: &PolyMesh,
    el: usize,
    space: &WgSpace,
    data_degree: usize,
    w: impl Fn(Point2) -> [f64; 2],
) -> Result<Vec<f64>, WeakOpsError> {
    use crate::polyquad::projection::{EdgeProjector, ElementProjector};
    let proj = ElementProjector::new(mesh, el, space.k, data_degree)?;
    let [cx, cy] = proj.project_vector(&w);
    let mut dofs = Vec::with_capacity(space.local_dof_count(mesh, el));
    dofs.extend_from_slice(&cx);
    dofs.extend_from_slice(&cy);
    for ee in &mesh.element_edges[el] {
        let ep = EdgeProjector::new(mesh, ee.edge, space.k, data_degree)?;
        dofs.extend(ep.project(&w));
    }
    Ok(dofs)
}

/// Products of squared per-edge linear forms: the element bubble vanishes on
/// the whole boundary, each edge bubble on all edges but one.
pub struct BubbleFunction {
    h: f64,
    anchors: Vec<Point2>,
    normals: Vec<Point2>,
    pub barycenter: Point2,
    scale: f64,
}

impl BubbleFunction {
    fn line(&self, i: usize, p: Point2) -> f64 {
        (p - self.anchors[i]).dot(self.normals[i]) / self.h
    }

    /// Element bubble, scaled to 1 at the barycenter.
    pub fn element_bubble(&self, p: Point2) -> f64 {
        let mut v = 1.0;
        for i in 0..self.anchors.len() {
            let l = self.line(i, p);
            v *= l * l;
        }
        v * self.scale
    }

    /// Edge bubble for edge `i` (unscaled).
    pub fn edge_bubble(&self, i: usize, p: Point2) -> f64 {
        let mut v = 1.0;
        for j in 0..self.anchors.len() {
            if j != i {
                let l = self.line(j, p);
                v *= l * l;
            }
        }
        v
    }

    /// First-power product variant for convex elements, with inward normals
    /// so the product is nonnegative inside.
    pub fn element_bubble_convex(&self, p: Point2) -> f64 {
        let mut v = 1.0;
        for i in 0..self.anchors.len() {
            v *= -self.line(i, p);
        }
        v
    }

    pub fn n_edges(&self) -> usize {
        self.anchors.len()
    }
}

pub fn evaluate_bubbles(mesh: &PolyMesh, el: usize) -> Result<BubbleFunction, WeakOpsError> {
    let e = &mesh.elements[el];
    let loops: &Vec<ElementEdge> = &mesh.element_edges[el];
    let pts = mesh.element_points(el);
    let mut anchors = Vec::with_capacity(loops.len());
    let mut normals = Vec::with_capacity(loops.len());
    for (i, ee) in loops.iter().enumerate() {
        anchors.push(pts[i]);
        normals.push(mesh.outward_normal(el, *ee));
    }
    let mut bubble = BubbleFunction {
        h: e.diameter,
        anchors,
        normals,
        barycenter: e.centroid,
        scale: 1.0,
    };
    let raw = bubble.element_bubble(e.centroid);
    if raw.abs() < 1e-14 {
        return Err(WeakOpsError::DegenerateBubble);
    }
    bubble.scale = 1.0 / raw;
    Ok(bubble)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_type_a, generate_type_b, Layout};
    use faer::prelude::Solve;

    fn space(k: usize) -> WgSpace {
        WgSpace::new(k, DegreePolicy::Numerics)
    }

    fn constant_dofs(ops: &ElementOperators, mesh: &PolyMesh, c: [f64; 2]) -> Vec<f64> {
        let nk = ops.basis_k.dim();
        let mut dofs = vec![0.0; ops.ndof];
        dofs[0] = c[0];
        dofs[nk] = c[1];
        let nedges = mesh.element_edges[ops.el].len();
        for a in 0..nedges {
            let off = 2 * nk + a * ops.edge_dim;
            dofs[off] = c[0];
            dofs[off + 1] = c[1];
        }
        dofs
    }

    #[test]
    fn constants_are_annihilated() {
        for (mesh, k) in [
            (generate_type_a(2, Layout::Vertical).unwrap(), 1),
            (generate_type_b(2, Layout::Vertical).unwrap(), 2),
        ] {
            for el in 0..2 {
                let sp = space(k);
                let ops = ElementOperators::build(&mesh, el, &sp, 2).unwrap();
                let dofs = constant_dofs(&ops, &mesh, [0.7, -1.2]);
                for v in ops.weak_gradient(&dofs) {
                    assert!(v.abs() < 1e-10);
                }
                for v in ops.weak_divergence(&dofs) {
                    assert!(v.abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn linear_pairs_reproduce_their_gradient() {
        let mesh = generate_type_a(2, Layout::Vertical).unwrap();
        let sp = space(2);
        let ops = ElementOperators::build(&mesh, 1, &sp, 2).unwrap();
        // w = (1 + 2x - y, 3x + 4y): gradient rows (2, -1; 3, 4)
        let g = ops.weak_gradient_of_fn(|p| [1.0 + 2.0 * p.x - p.y, 3.0 * p.x + 4.0 * p.y]);
        let np = ops.basis_r1.dim();
        let want = [2.0, -1.0, 3.0, 4.0];
        for ab in 0..4 {
            assert!((g[ab * np] - want[ab]).abs() < 1e-11);
            for i in 1..np {
                assert!(g[ab * np + i].abs() < 1e-11);
            }
        }
        // strain of (x, 0) is [[1,0],[0,0]]
        let s = ops.weak_strain_of_fn(|p| [p.x, 0.0]);
        assert!((s[0] - 1.0).abs() < 1e-11);
        for i in 1..np {
            assert!(s[i].abs() < 1e-11);
        }
        for i in 0..np {
            assert!(s[np + i].abs() < 1e-11 && s[2 * np + i].abs() < 1e-11);
        }
        // divergence of (x, y) is 2
        let d = ops.weak_divergence_of_fn(|p| [p.x, p.y]);
        assert!((d[0] - 2.0).abs() < 1e-11);
        for i in 1..d.len() {
            assert!(d[i].abs() < 1e-11);
        }
    }

    #[test]
    fn rigid_motions_have_zero_strain_and_divergence() {
        let mesh = generate_type_b(2, Layout::Vertical).unwrap();
        for k in 1..=3 {
            let sp = WgSpace::new(k, DegreePolicy::NumericsPlus);
            let ops = ElementOperators::build(&mesh, 0, &sp, 2).unwrap();
            let rm = |p: Point2| [0.4 - 1.7 * p.y, -0.9 + 1.7 * p.x];
            let dofs = local_interpolant(&mesh, 0, &sp, 2, rm).unwrap();
            let scale = dofs.iter().map(|v| v.abs()).fold(0.0, f64::max);
            // compare in L2: coefficient-level zeros are blurred by the mass
            // conditioning, the strain/divergence norms are not
            let s = ops.weak_strain(&dofs);
            let d = ops.weak_divergence(&dofs);
            let np = ops.basis_r1.dim();
            let mut snorm2 = 0.0;
            for blk in 0..3 {
                let w = if blk == 1 { 2.0 } else { 1.0 };
                for i in 0..np {
                    for j in 0..np {
                        snorm2 += w * s[blk * np + i] * ops.mass_r1[(i, j)] * s[blk * np + j];
                    }
                }
            }
            let nq = ops.basis_r2.dim();
            let mut dnorm2 = 0.0;
            for i in 0..nq {
                for j in 0..nq {
                    dnorm2 += d[i] * ops.mass_r2[(i, j)] * d[j];
                }
            }
            assert!(snorm2.sqrt() < 1e-9 * scale.max(1.0), "strain norm {snorm2}");
            assert!(dnorm2.sqrt() < 1e-9 * scale.max(1.0), "div norm {dnorm2}");
        }
    }

    #[test]
    fn single_edge_dof_matches_dense_oracle() {
        // v = {0, vb} with vb = (1, 0) on one edge only; brute-force assemble
        // the defining system by quadrature and solve densely.
        let mesh = generate_type_a(2, Layout::Vertical).unwrap();
        let sp = space(1);
        let ops = ElementOperators::build(&mesh, 0, &sp, 2).unwrap();
        let nk = ops.basis_k.dim();
        let np = ops.basis_r1.dim();
        let target_edge = 1usize;
        let mut dofs = vec![0.0; ops.ndof];
        dofs[2 * nk + target_edge * ops.edge_dim] = 1.0; // (1,0) on that edge
        let got = ops.weak_gradient(&dofs);

        // oracle: (G_ab, m_i) = <(1,0), m_i n_b>_e restricted to a = 0
        let erule = &ops.edge_rules[target_edge];
        let n = ops.outward(target_edge);
        let mut oracle = vec![0.0; 4 * np];
        for (ab, nb) in [(0usize, n.x), (1, n.y)] {
            let mut rhs = Mat::<f64>::zeros(np, 1);
            for (q, &p) in erule.points.iter().enumerate() {
                for i in 0..np {
                    rhs[(i, 0)] += erule.weights[q] * ops.basis_r1.eval(i, p) * nb;
                }
            }
            let x = ops.mass_r1.full_piv_lu().solve(&rhs);
            for i in 0..np {
                oracle[ab * np + i] = x[(i, 0)];
            }
        }
        for i in 0..4 * np {
            assert!((got[i] - oracle[i]).abs() < 1e-11, "entry {i}");
        }
    }

    #[test]
    fn strain_routes_agree_on_random_vectors() {
        use rand::prelude::*;
        let mesh = generate_type_b(2, Layout::Vertical).unwrap();
        let sp = space(2);
        let ops = ElementOperators::build(&mesh, 1, &sp, 2).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            let dofs: Vec<f64> = (0..ops.ndof).map(|_| rng.random_range(-1.0..1.0)).collect();
            let a = ops.weak_strain(&dofs);
            let b = ops.weak_strain_direct(&dofs);
            for i in 0..a.len() {
                assert!((a[i] - b[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn stiffness_symmetric_psd_with_rigid_kernel() {
        // the triangle is full-rank at r = k+1; the pentagon needs k+2 for
        // k = 1 and 3 (its local kernel picks up extra modes at k+1, which
        // the global assembly controls -- see the system module tests)
        let mesh = generate_type_a(2, Layout::Vertical).unwrap();
        for (el, pol) in [(0usize, DegreePolicy::Numerics), (1, DegreePolicy::NumericsPlus)] {
            for k in 1..=3 {
                let sp = WgSpace::new(k, pol);
                let ops = ElementOperators::build(&mesh, el, &sp, 2).unwrap();
                let a = ops.stiffness(0.5, 1.0).unwrap();
                let norm = (0..ops.ndof)
                    .map(|i| a[(i, i)].abs())
                    .fold(0.0f64, f64::max);
                for i in 0..ops.ndof {
                    for j in 0..ops.ndof {
                        assert!((a[(i, j)] - a[(j, i)]).abs() < 1e-12 * norm.max(1.0));
                    }
                }
                // PSD, and the kernel is exactly the rigid motions
                let evd = a.self_adjoint_eigen(Side::Lower).unwrap();
                let lmax = (0..ops.ndof).map(|i| evd.S()[i]).fold(0.0f64, f64::max);
                let tiny = (0..ops.ndof)
                    .filter(|&i| evd.S()[i] <= 1e-10 * lmax)
                    .count();
                assert!(
                    (0..ops.ndof).all(|i| evd.S()[i] >= -1e-10 * lmax),
                    "negative eigenvalue"
                );
                assert_eq!(tiny, 3, "k={k} el={el}: local kernel is rigid motions");
                // rigid motion annihilated
                let rm = |p: Point2| [1.0 - 0.8 * p.y, 2.0 + 0.8 * p.x];
                let r = local_interpolant(&mesh, el, &sp, 2, rm).unwrap();
                let ar = mat_vec(&a, &r);
                let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
                for v in ar {
                    assert!(v.abs() <= 1e-10 * norm * rn);
                }
            }
        }
    }

    #[test]
    fn stiffness_is_linear_in_coefficients() {
        let mesh = generate_type_b(2, Layout::Vertical).unwrap();
        let sp = WgSpace::new(1, DegreePolicy::NumericsPlus);
        let ops = ElementOperators::build(&mesh, 2, &sp, 2).unwrap();
        let (mu, lam) = (0.7, 1.3);
        let a2 = ops.stiffness(2.0 * mu, lam).unwrap();
        let a1 = ops.stiffness(mu, lam).unwrap();
        // the lambda part cancels: A(2mu,l) - A(mu,l) = 2 mu Ke
        for i in 0..ops.ndof {
            for j in 0..ops.ndof {
                let diff = a2[(i, j)] - a1[(i, j)];
                assert!((diff - 2.0 * mu * ops.ke[(i, j)]).abs() < 1e-12);
            }
        }
        assert!(ops.stiffness(-1.0, 1.0).is_err());
    }

    #[test]
    fn bubbles_vanish_on_the_right_edges() {
        let meshes = [
            generate_type_a(2, Layout::Vertical).unwrap(),
            generate_type_b(2, Layout::Vertical).unwrap(),
        ];
        for mesh in &meshes {
            for el in 0..2 {
                let b = evaluate_bubbles(mesh, el).unwrap();
                let pts = mesh.element_points(el);
                let m = pts.len();
                assert!((b.element_bubble(b.barycenter) - 1.0).abs() < 1e-14);
                for i in 0..m {
                    let (p0, p1) = (pts[i], pts[(i + 1) % m]);
                    let mut emax: f64 = 0.0;
                    for s in 0..20 {
                        let t = (s as f64 + 0.5) / 20.0;
                        let p = p0 + (p1 - p0) * t;
                        assert!(b.element_bubble(p).abs() < 1e-12, "element bubble on edge");
                        for j in 0..m {
                            if j != i {
                                assert!(b.edge_bubble(j, p).abs() < 1e-12);
                            }
                        }
                        emax = emax.max(b.edge_bubble(i, p).abs());
                    }
                    assert!(emax >= 1e-6, "edge bubble vanished on its own edge");
                }
            }
        }
    }

    #[test]
    fn convex_bubble_variant_positive_inside_triangle() {
        let mesh = generate_type_a(2, Layout::Vertical).unwrap();
        assert_eq!(mesh.elements[0].vertices.len(), 3);
        let b = evaluate_bubbles(&mesh, 0).unwrap();
        let c = b.barycenter;
        for s in 0..10 {
            let t = s as f64 / 10.0;
            let p = Point2::new(c.x + 0.01 * (t - 0.5), c.y - 0.008 * (t - 0.5));
            assert!(b.element_bubble_convex(p) > 0.0);
            assert!(b.element_bubble(p) > 0.0);
        }
    }

    #[test]
    fn degree_policy_table() {
        assert_eq!(DegreePolicy::Numerics.degrees(2, 5), (3, 3));
        assert_eq!(DegreePolicy::NumericsPlus.degrees(1, 6), (3, 3));
        assert_eq!(DegreePolicy::TheoryConvex.degrees(2, 3), (4, 4));
        assert_eq!(DegreePolicy::TheoryNonconvex.degrees(3, 5), (12, 12));
        // never below k
        assert_eq!(DegreePolicy::Fixed(1).degrees(3, 5), (3, 3));
    }
}
