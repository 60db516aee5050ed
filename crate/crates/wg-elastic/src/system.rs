//! Global degree-of-freedom layout, constraint elimination, sparse SPD
//! assembly and linear solvers.
//!
//! Unknowns are element-interior coefficient blocks followed by per-edge
//! trace blocks. Interface edges carry two trace blocks (the subdomain-0
//! side first); the second block is eliminated through the prescribed
//! displacement jump, and boundary blocks through the projected Dirichlet
//! data, so the reduced matrix stays symmetric positive definite.

use faer::prelude::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use rayon::prelude::*;
use thiserror::Error;

use crate::mesh::{EdgeTag, PolyMesh};
use crate::polyquad::projection::EdgeProjector;
use crate::problems::ManufacturedProblem;
use crate::weakops::{ElementOperators, WeakOpsError, WgSpace};

#[derive(Debug, Error)]
pub enum SystemError {
    #[error(transparent)]
    WeakOps(#[from] WeakOpsError),
    #[error(transparent)]
    Projection(#[from] crate::polyquad::projection::ProjectionError),
    #[error("matrix is not positive definite")]
    NotSpd,
    #[error("conjugate gradients stalled after {iters} iterations (residual {residual:.3e})")]
    CgDiverged { iters: usize, residual: f64 },
}

/// How a full-layout coefficient expands into the reduced system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DofMap {
    Free(usize),
    /// Interface slave: the master free dof plus a constant offset.
    Slave { master: usize, offset: f64 },
    /// Dirichlet-fixed value.
    Fixed(f64),
}

/// Deterministic global numbering: element interiors first, then edge blocks
/// in edge order, with interface edges contributing the subdomain-0 block
/// followed by the subdomain-1 block.
#[derive(Debug, Clone)]
pub struct DofLayout {
    pub k: usize,
    pub n_int: usize,
    pub edge_dim: usize,
    pub elem_offset: Vec<usize>,
    /// Base (subdomain-0 side) block of each edge.
    pub edge_offset: Vec<usize>,
    /// Subdomain-1 side block of interface edges.
    pub edge_offset_r: Vec<Option<usize>>,
    pub n_full: usize,
    pub n_free: usize,
    free_of_full: Vec<Option<usize>>,
}

impl DofLayout {
    pub fn build(mesh: &PolyMesh, k: usize) -> Self {
        let n_int = (k + 1) * (k + 2);
        let edge_dim = crate::polyquad::basis::edge_block_size(k);
        let mut next = 0usize;
        let elem_offset: Vec<usize> = mesh
            .elements
            .iter()
            .map(|_| {
                let o = next;
                next += n_int;
                o
            })
            .collect();
        let mut edge_offset = Vec::with_capacity(mesh.edges.len());
        let mut edge_offset_r = Vec::with_capacity(mesh.edges.len());
        for e in &mesh.edges {
            edge_offset.push(next);
            next += edge_dim;
            if matches!(e.tag, EdgeTag::Interface(_)) {
                edge_offset_r.push(Some(next));
                next += edge_dim;
            } else {
                edge_offset_r.push(None);
            }
        }
        let n_full = next;

        // free dofs: interiors, interior-edge blocks, interface base blocks
        let mut free_of_full = vec![None; n_full];
        let mut n_free = 0;
        for off in &elem_offset {
            for j in 0..n_int {
                free_of_full[off + j] = Some(n_free);
                n_free += 1;
            }
        }
        for (e, edge) in mesh.edges.iter().enumerate() {
            if !matches!(edge.tag, EdgeTag::Boundary) {
                for j in 0..edge_dim {
                    free_of_full[edge_offset[e] + j] = Some(n_free);
                    n_free += 1;
                }
            }
        }
        DofLayout {
            k,
            n_int,
            edge_dim,
            elem_offset,
            edge_offset,
            edge_offset_r,
            n_full,
            n_free,
            free_of_full,
        }
    }

    /// Full-layout indices of one element's local dofs, respecting which
    /// interface side the element is on.
    pub fn element_full_dofs(&self, mesh: &PolyMesh, el: usize) -> Vec<usize> {
        let mut out =
            Vec::with_capacity(self.n_int + mesh.element_edges[el].len() * self.edge_dim);
        out.extend(self.elem_offset[el]..self.elem_offset[el] + self.n_int);
        for ee in &mesh.element_edges[el] {
            let e = ee.edge;
            let base = if mesh.edges[e].right == Some(el) {
                self.edge_offset_r[e].unwrap_or(self.edge_offset[e])
            } else {
                self.edge_offset[e]
            };
            out.extend(base..base + self.edge_dim);
        }
        out
    }

    pub fn free_index(&self, full: usize) -> Option<usize> {
        self.free_of_full[full]
    }
}

/// Resolution of every full dof for the current problem data.
pub struct Constraints {
    pub map: Vec<DofMap>,
}

/// Project Dirichlet and jump data onto the edge trace spaces.
pub fn build_constraints(
    mesh: &PolyMesh,
    space: &WgSpace,
    layout: &DofLayout,
    problem: &ManufacturedProblem,
) -> Result<Constraints, SystemError> {
    let mut map: Vec<DofMap> = (0..layout.n_full)
        .map(|i| match layout.free_index(i) {
            Some(f) => DofMap::Free(f),
            None => DofMap::Fixed(0.0),
        })
        .collect();
    for (e, edge) in mesh.edges.iter().enumerate() {
        match edge.tag {
            EdgeTag::Boundary => {
                let sub = mesh.elements[edge.left].subdomain;
                let proj = EdgeProjector::new(mesh, e, space.k, problem.data_degree)?;
                let coeffs = proj.project(|p| problem.dirichlet(p, sub));
                for (j, c) in coeffs.into_iter().enumerate() {
                    map[layout.edge_offset[e] + j] = DofMap::Fixed(c);
                }
            }
            EdgeTag::Interface(_) => {
                let proj = EdgeProjector::new(mesh, e, space.k, problem.data_degree)?;
                let jump = proj.project(|p| problem.jump_displacement(p));
                let off_r = layout.edge_offset_r[e].expect("interface edge has a slave block");
                for (j, c) in jump.into_iter().enumerate() {
                    let master = layout
                        .free_index(layout.edge_offset[e] + j)
                        .expect("interface master dof is free");
                    // u_b on the subdomain-1 side = u_b(side 0) - Q_b(jump)
                    map[off_r + j] = DofMap::Slave { master, offset: -c };
                }
            }
            EdgeTag::Interior => {}
        }
    }
    Ok(Constraints { map })
}

/// Symmetric sparse matrix in CSR form (both triangles stored).
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<f64>,
}

impl CsrMatrix {
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; n + 1];
        for &(i, _, _) in triplets {
            counts[i + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut pos = counts.clone();
        let nnz = triplets.len();
        let mut col = vec![0usize; nnz];
        let mut val = vec![0.0; nnz];
        for &(i, j, v) in triplets {
            col[pos[i]] = j;
            val[pos[i]] = v;
            pos[i] += 1;
        }
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::with_capacity(nnz);
        let mut data = Vec::with_capacity(nnz);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for i in 0..n {
            row.clear();
            row.extend((counts[i]..counts[i + 1]).map(|t| (col[t], val[t])));
            row.sort_unstable_by_key(|&(j, _)| j);
            let mut it = row.iter().peekable();
            while let Some(&(j, v)) = it.next() {
                let mut acc = v;
                while let Some(&&(j2, v2)) = it.peek() {
                    if j2 == j {
                        acc += v2;
                        it.next();
                    } else {
                        break;
                    }
                }
                indices.push(j);
                data.push(acc);
            }
            indptr[i + 1] = indices.len();
        }
        CsrMatrix {
            n,
            indptr,
            indices,
            data,
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let mut acc = 0.0;
            for t in self.indptr[i]..self.indptr[i + 1] {
                acc += self.data[t] * x[self.indices[t]];
            }
            *yi = acc;
        });
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            for t in self.indptr[i]..self.indptr[i + 1] {
                if self.indices[t] == i {
                    d[i] = self.data[t];
                }
            }
        }
        d
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                (self.indptr[i]..self.indptr[i + 1])
                    .map(|t| self.data[t].abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Max absolute entry of A - A^T (diagnostic).
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for t in self.indptr[i]..self.indptr[i + 1] {
                let j = self.indices[t];
                if j < i {
                    continue;
                }
                let mut aji = 0.0;
                for s in self.indptr[j]..self.indptr[j + 1] {
                    if self.indices[s] == i {
                        aji = self.data[s];
                    }
                }
                worst = worst.max((self.data[t] - aji).abs());
            }
        }
        worst
    }
}

/// The reduced linear system plus the constraint table needed to expand a
/// free-dof solution back to the full layout.
pub struct SparseSpdSystem {
    pub n: usize,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub constraints: Constraints,
    pub n_full: usize,
}

/// Assemble the reduced SPD system. Element operators are built in parallel;
/// accumulation runs in deterministic element order.
pub fn assemble(
    mesh: &PolyMesh,
    space: &WgSpace,
    layout: &DofLayout,
    problem: &ManufacturedProblem,
) -> Result<SparseSpdSystem, SystemError> {
    let ops = build_all_operators(mesh, space, problem.data_degree)?;
    assemble_with_operators(mesh, space, layout, problem, &ops)
}

/// Build every element's operator matrices (parallel).
pub fn build_all_operators(
    mesh: &PolyMesh,
    space: &WgSpace,
    data_degree: usize,
) -> Result<Vec<ElementOperators>, SystemError> {
    Ok((0..mesh.elements.len())
        .into_par_iter()
        .map(|el| ElementOperators::build(mesh, el, space, data_degree))
        .collect::<Result<Vec<_>, _>>()?)
}

pub fn assemble_with_operators(
    mesh: &PolyMesh,
    space: &WgSpace,
    layout: &DofLayout,
    problem: &ManufacturedProblem,
    ops: &[ElementOperators],
) -> Result<SparseSpdSystem, SystemError> {
    let constraints = build_constraints(mesh, space, layout, problem)?;
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut rhs = vec![0.0; layout.n_free];

    for el in 0..mesh.elements.len() {
        let op = &ops[el];
        let sub = mesh.elements[el].subdomain;
        let co = problem.coeff[sub];
        let a = op.stiffness(co.mu, co.lambda)?;
        let full = layout.element_full_dofs(mesh, el);

        // (f, v0)_T against the interior block
        let nk = op.basis_k.dim();
        let mut load = vec![0.0; op.ndof];
        let mut vals = vec![0.0; nk];
        for (qi, &p) in op.rule.points.iter().enumerate() {
            let w = op.rule.weights[qi];
            let fv = problem.body_force(p, sub);
            op.basis_k.eval_all(p, &mut vals);
            for j in 0..nk {
                load[j] += w * fv[0] * vals[j];
                load[nk + j] += w * fv[1] * vals[j];
            }
        }

        for (i, &fi) in full.iter().enumerate() {
            let row = match constraints.map[fi] {
                DofMap::Free(r) => Some(r),
                DofMap::Slave { master, .. } => Some(master),
                DofMap::Fixed(_) => None,
            };
            let Some(r) = row else { continue };
            rhs[r] += load[i];
            for (j, &fj) in full.iter().enumerate() {
                let aij = a[(i, j)];
                if aij == 0.0 {
                    continue;
                }
                match constraints.map[fj] {
                    DofMap::Free(c) => triplets.push((r, c, aij)),
                    DofMap::Slave { master, offset } => {
                        triplets.push((r, master, aij));
                        rhs[r] -= aij * offset;
                    }
                    DofMap::Fixed(v) => rhs[r] -= aij * v,
                }
            }
        }
    }

    // interface traction load on the (single-valued) test trace
    for (e, edge) in mesh.edges.iter().enumerate() {
        if !matches!(edge.tag, EdgeTag::Interface(_)) {
            continue;
        }
        let proj = EdgeProjector::new(mesh, e, space.k, problem.data_degree)?;
        let basis = &proj.basis;
        let n0 = edge.normal;
        for j in 0..basis.dim() {
            let mut acc = 0.0;
            for (qi, &t) in proj.rule.params.iter().enumerate() {
                let w = proj.rule.weights[qi];
                let psi = problem.jump_traction(proj.rule.points[qi], n0);
                let phi = basis.eval_at(j, t);
                acc += w * (psi[0] * phi[0] + psi[1] * phi[1]);
            }
            let r = layout
                .free_index(layout.edge_offset[e] + j)
                .expect("interface master dof is free");
            rhs[r] += acc;
        }
    }

    let matrix = CsrMatrix::from_triplets(layout.n_free, &triplets);
    Ok(SparseSpdSystem {
        n: layout.n_free,
        matrix,
        rhs,
        constraints,
        n_full: layout.n_full,
    })
}

/// Expand a free-dof vector to the full layout.
pub fn reconstruct_full(system: &SparseSpdSystem, x: &[f64]) -> Vec<f64> {
    system
        .constraints
        .map
        .iter()
        .map(|m| match *m {
            DofMap::Free(i) => x[i],
            DofMap::Slave { master, offset } => x[master] + offset,
            DofMap::Fixed(v) => v,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    /// Sparse Cholesky below 20k unknowns, conjugate gradients above.
    Auto,
    Cholesky,
    Cg,
}

pub struct SolveReport {
    pub x: Vec<f64>,
    pub relative_residual: f64,
    pub cg_iterations: Option<usize>,
}

/// Relative residual ||Ax - b|| / max(||b||, tiny).
pub fn residual_check(system: &SparseSpdSystem, x: &[f64]) -> f64 {
    let mut ax = vec![0.0; system.n];
    system.matrix.matvec(x, &mut ax);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..system.n {
        num += (ax[i] - system.rhs[i]) * (ax[i] - system.rhs[i]);
        den += system.rhs[i] * system.rhs[i];
    }
    num.sqrt() / den.sqrt().max(1e-300)
}

/// Sparse Cholesky (fill-reducing ordering inside faer).
pub fn solve_cholesky(system: &SparseSpdSystem) -> Result<SolveReport, SystemError> {
    let n = system.n;
    let mut tris: Vec<Triplet<usize, usize, f64>> = Vec::new();
    for i in 0..n {
        for t in system.matrix.indptr[i]..system.matrix.indptr[i + 1] {
            let j = system.matrix.indices[t];
            if j <= i {
                tris.push(Triplet::new(i, j, system.matrix.data[t]));
            }
        }
    }
    let a = SparseColMat::try_new_from_triplets(n, n, &tris).expect("valid triplets");
    let llt = a
        .as_ref()
        .sp_cholesky(Side::Lower)
        .map_err(|_| SystemError::NotSpd)?;
    let b = Mat::from_fn(n, 1, |i, _| system.rhs[i]);
    let xm = llt.solve(&b);
    let x: Vec<f64> = (0..n).map(|i| xm[(i, 0)]).collect();
    let relative_residual = residual_check(system, &x);
    Ok(SolveReport {
        x,
        relative_residual,
        cg_iterations: None,
    })
}

/// Jacobi-preconditioned conjugate gradients.
pub fn solve_cg(
    system: &SparseSpdSystem,
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<SolveReport, SystemError> {
    let n = system.n;
    let a = &system.matrix;
    let b = &system.rhs;
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    let diag = a.diagonal();
    let minv: Vec<f64> = diag
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut x = match x0 {
        Some(v) => v.to_vec(),
        None => vec![0.0; n],
    };
    let mut r = vec![0.0; n];
    a.matvec(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<f64> = (0..n).map(|i| minv[i] * r[i]).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    let mut iters = 0;
    for it in 0..max_iter {
        let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rn <= tol * bnorm {
            break;
        }
        a.matvec(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(SystemError::NotSpd);
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = minv[i] * r[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        iters = it + 1;
    }
    let relative_residual = residual_check(system, &x);
    if relative_residual > tol {
        return Err(SystemError::CgDiverged {
            iters,
            residual: relative_residual,
        });
    }
    Ok(SolveReport {
        x,
        relative_residual,
        cg_iterations: Some(iters),
    })
}

/// Solve the reduced system; see `SolverKind`.
pub fn solve(system: &SparseSpdSystem, kind: SolverKind) -> Result<SolveReport, SystemError> {
    match kind {
        SolverKind::Cholesky => solve_cholesky(system),
        SolverKind::Cg => solve_cg(system, None, 1e-10, 200 * system.n.max(100)),
        SolverKind::Auto => {
            if system.n <= 20_000 {
                solve_cholesky(system)
            } else {
                solve_cg(system, None, 1e-10, 200 * system.n)
            }
        }
    }
}

/// Dense global stiffness with a single trace block per edge and no
/// constraints: the setting for the kernel-dimension check. On a connected
/// mesh the kernel should be exactly the three rigid motions.
pub fn global_matrix_unconstrained(
    mesh: &PolyMesh,
    space: &WgSpace,
    coeff: &[crate::problems::LameCoeff; 2],
) -> Result<Mat<f64>, SystemError> {
    let n_int = space.interior_dim();
    let edge_dim = space.edge_dim();
    let n = mesh.elements.len() * n_int + mesh.edges.len() * edge_dim;
    let mut a = Mat::<f64>::zeros(n, n);
    for el in 0..mesh.elements.len() {
        let op = ElementOperators::build(mesh, el, space, 2)?;
        let co = coeff[mesh.elements[el].subdomain];
        let at = op.stiffness(co.mu, co.lambda)?;
        let mut full = Vec::with_capacity(op.ndof);
        full.extend(el * n_int..(el + 1) * n_int);
        for ee in &mesh.element_edges[el] {
            let base = mesh.elements.len() * n_int + ee.edge * edge_dim;
            full.extend(base..base + edge_dim);
        }
        for (i, &fi) in full.iter().enumerate() {
            for (j, &fj) in full.iter().enumerate() {
                a[(fi, fj)] += at[(i, j)];
            }
        }
    }
    Ok(a)
}
