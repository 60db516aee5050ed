//! Manufactured elasticity interface problems.
//!
//! Six benchmark problems on the unit square with piecewise-constant Lame
//! coefficients. Problem 1 prescribes only a constant body force (no exact
//! solution, homogeneous boundary and jump data); problems 2-6 carry exact
//! piecewise polynomial displacements from which body force, boundary data,
//! displacement jump and traction jump are derived symbolically.

pub mod poly;

use num_rational::BigRational;
use thiserror::Error;

use crate::mesh::{Layout, Point2};
use poly::{expr, q, Poly2};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("unknown example id {0} (valid: 1..=6)")]
    UnknownExample(usize),
}

/// Lame parameters of one subdomain.
#[derive(Debug, Clone, Copy)]
pub struct LameCoeff {
    pub mu: f64,
    pub lambda: f64,
}

/// Exact solution data on one subdomain, derived from the displacement.
#[derive(Debug, Clone)]
pub struct ExactBranch {
    pub u: [Poly2; 2],
    /// grad[i][j] = d u_i / d x_j
    pub grad: [[Poly2; 2]; 2],
    /// strain components (e11, e12, e22)
    pub eps: [Poly2; 3],
    pub div: Poly2,
    /// stress components (s11, s12, s22)
    pub sigma: [Poly2; 3],
    /// body force = -div sigma
    pub f: [Poly2; 2],
}

impl ExactBranch {
    pub fn from_displacement(u: [Poly2; 2], mu: BigRational, lambda: BigRational) -> Self {
        let u1x = u[0].dx();
        let u1y = u[0].dy();
        let u2x = u[1].dx();
        let u2y = u[1].dy();
        let half = q(1, 2);
        let e12 = (&u1y + &u2x).scale(&half);
        let div = &u1x + &u2y;
        let two_mu = &mu + &mu;
        let ldiv = div.scale(&lambda);
        let s11 = &u1x.scale(&two_mu) + &ldiv;
        let s12 = e12.scale(&two_mu);
        let s22 = &u2y.scale(&two_mu) + &ldiv;
        let f = [
            -&(&s11.dx() + &s12.dy()),
            -&(&s12.dx() + &s22.dy()),
        ];
        ExactBranch {
            grad: [[u1x.clone(), u1y], [u2x, u2y.clone()]],
            eps: [u1x, e12, u2y],
            div,
            sigma: [s11, s12, s22],
            f,
            u,
        }
    }

    pub fn eval_u(&self, p: Point2) -> [f64; 2] {
        [self.u[0].eval(p.x, p.y), self.u[1].eval(p.x, p.y)]
    }

    pub fn eval_eps(&self, p: Point2) -> [f64; 3] {
        [
            self.eps[0].eval(p.x, p.y),
            self.eps[1].eval(p.x, p.y),
            self.eps[2].eval(p.x, p.y),
        ]
    }

    pub fn eval_grad(&self, p: Point2) -> [f64; 4] {
        [
            self.grad[0][0].eval(p.x, p.y),
            self.grad[0][1].eval(p.x, p.y),
            self.grad[1][0].eval(p.x, p.y),
            self.grad[1][1].eval(p.x, p.y),
        ]
    }

    pub fn eval_div(&self, p: Point2) -> f64 {
        self.div.eval(p.x, p.y)
    }

    /// sigma(u) n at a point.
    pub fn traction(&self, p: Point2, n: Point2) -> [f64; 2] {
        let s11 = self.sigma[0].eval(p.x, p.y);
        let s12 = self.sigma[1].eval(p.x, p.y);
        let s22 = self.sigma[2].eval(p.x, p.y);
        [s11 * n.x + s12 * n.y, s12 * n.x + s22 * n.y]
    }

    pub fn eval_f(&self, p: Point2) -> [f64; 2] {
        [self.f[0].eval(p.x, p.y), self.f[1].eval(p.x, p.y)]
    }
}

/// A fully populated interface problem. Subdomain index 0 is the
/// distinguished region of the layout, 1 its complement.
pub struct ManufacturedProblem {
    pub id: usize,
    pub layout: Layout,
    pub coeff: [LameCoeff; 2],
    pub exact: Option<[ExactBranch; 2]>,
    /// Constant body force when no exact solution is given.
    pub const_f: Option<[f64; 2]>,
    /// Max total degree of the exact displacement (0 if none).
    pub data_degree: usize,
}

impl ManufacturedProblem {
    pub fn has_exact(&self) -> bool {
        self.exact.is_some()
    }

    pub fn body_force(&self, p: Point2, sub: usize) -> [f64; 2] {
        match (&self.exact, &self.const_f) {
            (Some(branches), _) => branches[sub].eval_f(p),
            (None, Some(f)) => *f,
            _ => [0.0, 0.0],
        }
    }

    /// Dirichlet data: the exact trace of the subdomain branch.
    pub fn dirichlet(&self, p: Point2, sub: usize) -> [f64; 2] {
        match &self.exact {
            Some(branches) => branches[sub].eval_u(p),
            None => [0.0, 0.0],
        }
    }

    /// Displacement jump u|_0 - u|_1 on the interface.
    pub fn jump_displacement(&self, p: Point2) -> [f64; 2] {
        match &self.exact {
            Some(b) => {
                let a = b[0].eval_u(p);
                let c = b[1].eval_u(p);
                [a[0] - c[0], a[1] - c[1]]
            }
            None => [0.0, 0.0],
        }
    }

    /// Traction jump sigma(u_0) n0 + sigma(u_1) (-n0), with n0 the outward
    /// normal of subdomain 0 on the interface.
    pub fn jump_traction(&self, p: Point2, n0: Point2) -> [f64; 2] {
        match &self.exact {
            Some(b) => {
                let t0 = b[0].traction(p, n0);
                let t1 = b[1].traction(p, n0 * -1.0);
                [t0[0] + t1[0], t0[1] + t1[1]]
            }
            None => [0.0, 0.0],
        }
    }
}

fn lame(v: BigRational) -> (LameCoeff, BigRational, BigRational) {
    // the benchmark coefficient convention: 2 mu = lambda = v
    let mu = &v * q(1, 2);
    let c = LameCoeff {
        mu: rat_f64(&mu),
        lambda: rat_f64(&v),
    };
    (c, mu, v)
}

fn rat_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().expect("coefficient fits in f64")
}

fn branch(u: [Poly2; 2], mu: BigRational, lambda: BigRational) -> ExactBranch {
    ExactBranch::from_displacement(u, mu, lambda)
}

// Shared inner displacement of problems 2 and 3:
// -2 x^2 (1-x)(1-y) * (8y^2 - 4y + x - 1, x - 1)
fn strip_inner_u() -> [Poly2; 2] {
    let base = expr(&[(-2, 1, 2, 0), (2, 1, 3, 0), (2, 1, 2, 1), (-2, 1, 3, 1)]);
    let c1 = expr(&[(8, 1, 0, 2), (-4, 1, 0, 1), (1, 1, 1, 0), (-1, 1, 0, 0)]);
    let c2 = expr(&[(1, 1, 1, 0), (-1, 1, 0, 0)]);
    [&base * &c1, &base * &c2]
}

// B4 = (x - 1/4)(x - 3/4)(y - 1/4)(y - 3/4)
fn b4() -> Poly2 {
    let bx = expr(&[(1, 1, 2, 0), (-1, 1, 1, 0), (3, 16, 0, 0)]);
    let by = expr(&[(1, 1, 0, 2), (-1, 1, 0, 1), (3, 16, 0, 0)]);
    &bx * &by
}

// x(1-x) y(1-y)
fn box_factor() -> Poly2 {
    let px = expr(&[(1, 1, 1, 0), (-1, 1, 2, 0)]);
    let py = expr(&[(1, 1, 0, 1), (-1, 1, 0, 2)]);
    &px * &py
}

// Shared inner displacement of problems 4-6:
// (2^12/11) (x^2 + y^2 - x - y + 3/16) B4 * (-1, 4)
fn square_inner_u() -> [Poly2; 2] {
    let qq = expr(&[
        (1, 1, 2, 0),
        (1, 1, 0, 2),
        (-1, 1, 1, 0),
        (-1, 1, 0, 1),
        (3, 16, 0, 0),
    ]);
    let w = &qq * &b4();
    [w.scale(&q(-4096, 11)), w.scale(&q(16384, 11))]
}

/// Construct benchmark problem `id` in 1..=6.
pub fn example(id: usize) -> Result<ManufacturedProblem, ProblemError> {
    match id {
        1 => {
            let (c0, _, _) = lame(q(10, 1));
            let (c1, _, _) = lame(q(1, 1));
            Ok(ManufacturedProblem {
                id,
                layout: Layout::Vertical,
                coeff: [c0, c1],
                exact: None,
                const_f: Some([1.0, -1.0]),
                data_degree: 0,
            })
        }
        2 => {
            let (c, mu, la) = lame(q(1, 1));
            // outer: 2 x^2 (1-x) y * (4xy - 16y^2 - 3x + 8y + 1,
            //                         4xy -  8y^2 - 3x + 4y + 1)
            let base = expr(&[(2, 1, 2, 1), (-2, 1, 3, 1)]);
            let p1 = expr(&[
                (4, 1, 1, 1),
                (-16, 1, 0, 2),
                (-3, 1, 1, 0),
                (8, 1, 0, 1),
                (1, 1, 0, 0),
            ]);
            let p2 = expr(&[
                (4, 1, 1, 1),
                (-8, 1, 0, 2),
                (-3, 1, 1, 0),
                (4, 1, 0, 1),
                (1, 1, 0, 0),
            ]);
            let outer = [&base * &p1, &base * &p2];
            Ok(ManufacturedProblem {
                id,
                layout: Layout::Vertical,
                coeff: [c, c],
                exact: Some([
                    branch(strip_inner_u(), mu.clone(), la.clone()),
                    branch(outer, mu, la),
                ]),
                const_f: None,
                data_degree: 6,
            })
        }
        3 => {
            let (c0, mu0, la0) = lame(q(10, 1));
            let (c1, mu1, la1) = lame(q(1, 1));
            // outer: 2 x (1-x) y * u1
            let base = expr(&[(2, 1, 1, 1), (-2, 1, 2, 1)]);
            let p1 = expr(&[
                (22, 1, 2, 1),
                (-196, 1, 1, 2),
                (72, 1, 0, 3),
                (-12, 1, 2, 0),
                (98, 1, 1, 1),
                (-36, 1, 0, 2),
                (1, 1, 1, 0),
            ]);
            let p2 = expr(&[
                (22, 1, 2, 1),
                (-80, 1, 1, 2),
                (36, 1, 0, 3),
                (-12, 1, 2, 0),
                (40, 1, 1, 1),
                (-18, 1, 0, 2),
                (1, 1, 1, 0),
            ]);
            let outer = [&base * &p1, &base * &p2];
            Ok(ManufacturedProblem {
                id,
                layout: Layout::Vertical,
                coeff: [c0, c1],
                exact: Some([
                    branch(strip_inner_u(), mu0, la0),
                    branch(outer, mu1, la1),
                ]),
                const_f: None,
                data_degree: 6,
            })
        }
        4 | 5 | 6 => {
            let (v0, outer_scale) = match id {
                4 => (q(1, 1), q(256, 33)),
                5 => (q(1, 10), q(2048, 165)),
                _ => (q(100, 1), q(25600, 33)),
            };
            let (c0, mu0, la0) = lame(v0);
            let (c1, mu1, la1) = lame(q(1, 1));
            let w = &box_factor() * &b4();
            let outer = [
                w.scale(&outer_scale),
                w.scale(&(-&outer_scale * q(4, 1))),
            ];
            Ok(ManufacturedProblem {
                id,
                layout: Layout::Square,
                coeff: [c0, c1],
                exact: Some([
                    branch(square_inner_u(), mu0, la0),
                    branch(outer, mu1, la1),
                ]),
                const_f: None,
                data_degree: 8,
            })
        }
        _ => Err(ProblemError::UnknownExample(id)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;

    // central finite differences of -div sigma(u)
    fn fd_body_force(b: &ExactBranch, mu: f64, lambda: f64, p: Point2, h: f64) -> [f64; 2] {
        let sigma = |p: Point2| {
            let g = b.eval_grad(p);
            let div = g[0] + g[3];
            let e12 = 0.5 * (g[1] + g[2]);
            [
                2.0 * mu * g[0] + lambda * div,
                2.0 * mu * e12,
                2.0 * mu * g[3] + lambda * div,
            ]
        };
        let sxp = sigma(Point2::new(p.x + h, p.y));
        let sxm = sigma(Point2::new(p.x - h, p.y));
        let syp = sigma(Point2::new(p.x, p.y + h));
        let sym = sigma(Point2::new(p.x, p.y - h));
        [
            -((sxp[0] - sxm[0]) / (2.0 * h) + (syp[1] - sym[1]) / (2.0 * h)),
            -((sxp[1] - sxm[1]) / (2.0 * h) + (syp[2] - sym[2]) / (2.0 * h)),
        ]
    }

    #[test]
    fn body_force_matches_finite_difference_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for id in 2..=6 {
            let prob = example(id).unwrap();
            let branches = prob.exact.as_ref().unwrap();
            for sub in 0..2 {
                for _ in 0..50 {
                    let p = Point2::new(rng.random_range(0.05..0.95), rng.random_range(0.05..0.95));
                    let want = fd_body_force(
                        &branches[sub],
                        prob.coeff[sub].mu,
                        prob.coeff[sub].lambda,
                        p,
                        1e-5,
                    );
                    let got = prob.body_force(p, sub);
                    for c in 0..2 {
                        let scale = want[c].abs().max(1.0);
                        assert!(
                            (got[c] - want[c]).abs() <= 1e-6 * scale,
                            "example {id} sub {sub} comp {c}: {} vs {}",
                            got[c],
                            want[c]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn example_coefficient_contrasts() {
        let e3 = example(3).unwrap();
        assert!((e3.coeff[0].mu / e3.coeff[1].mu - 10.0).abs() < 1e-15);
        assert!((e3.coeff[0].lambda / e3.coeff[1].lambda - 10.0).abs() < 1e-15);
        let e6 = example(6).unwrap();
        assert!((e6.coeff[0].lambda / e6.coeff[1].lambda - 100.0).abs() < 1e-15);
        let e5 = example(5).unwrap();
        assert!((e5.coeff[0].lambda - 0.1).abs() < 1e-15);
        assert!(example(0).is_err() && example(7).is_err());
    }

    #[test]
    fn example1_is_solve_only() {
        let e1 = example(1).unwrap();
        assert!(!e1.has_exact());
        let p = Point2::new(0.3, 0.8);
        assert_eq!(e1.body_force(p, 0), [1.0, -1.0]);
        assert_eq!(e1.dirichlet(p, 1), [0.0, 0.0]);
        assert_eq!(e1.jump_displacement(p), [0.0, 0.0]);
        assert_eq!(e1.jump_traction(p, Point2::new(1.0, 0.0)), [0.0, 0.0]);
    }

    #[test]
    fn example4_body_force_frozen_coefficients() {
        // spot values of 33*f on subdomain 0, exact in rational arithmetic
        let prob = example(4).unwrap();
        let f = &prob.exact.as_ref().unwrap()[0].f;
        let t33 = |p: &Poly2, a: u32, b: u32| p.coeff(a, b) * q(33, 1);
        assert_eq!(t33(&f[0], 4, 0), q(12288, 1));
        assert_eq!(t33(&f[0], 3, 1), q(-589824, 1));
        assert_eq!(t33(&f[0], 2, 2), q(368640, 1));
        assert_eq!(t33(&f[0], 0, 0), q(-25632, 1));
        assert_eq!(t33(&f[1], 4, 0), q(-196608, 1));
        assert_eq!(t33(&f[1], 2, 2), q(-1474560, 1));
        assert_eq!(t33(&f[1], 0, 0), q(-52992, 1));
    }

    #[test]
    fn displacement_degrees() {
        for (id, deg) in [(2usize, 6usize), (3, 6), (4, 8), (5, 8), (6, 8)] {
            let prob = example(id).unwrap();
            let b = prob.exact.as_ref().unwrap();
            let dmax = b
                .iter()
                .flat_map(|br| br.u.iter().map(|p| p.total_degree()))
                .max()
                .unwrap();
            assert_eq!(dmax, deg, "example {id}");
            assert_eq!(prob.data_degree, deg);
            // f has degree deg(u) - 2
            let fdeg = b
                .iter()
                .flat_map(|br| br.f.iter().map(|p| p.total_degree()))
                .max()
                .unwrap();
            assert_eq!(fdeg, deg - 2);
        }
    }

    #[test]
    fn jump_data_consistency() {
        // with both branches set equal, jumps vanish identically
        let prob = example(2).unwrap();
        let b = prob.exact.as_ref().unwrap();
        let same = ManufacturedProblem {
            id: 99,
            layout: Layout::Vertical,
            coeff: prob.coeff,
            exact: Some([b[1].clone(), b[1].clone()]),
            const_f: None,
            data_degree: 6,
        };
        let n = Point2::new(1.0, 0.0);
        for i in 0..5 {
            let p = Point2::new(0.5, 0.1 + 0.2 * i as f64);
            let phi = same.jump_displacement(p);
            let psi = same.jump_traction(p, n);
            assert!(phi[0].abs() < 1e-14 && phi[1].abs() < 1e-14);
            assert!(psi[0].abs() < 1e-13 && psi[1].abs() < 1e-13);
        }
        // example 2 has genuinely nonzero jumps at (1/2, 1/4)
        let p = Point2::new(0.5, 0.25);
        let phi = prob.jump_displacement(p);
        // dual evaluation of the two branches
        let u0 = b[0].eval_u(p);
        let u1 = b[1].eval_u(p);
        assert!((phi[0] - (u0[0] - u1[0])).abs() < 1e-15);
        assert!((phi[1] - (u0[1] - u1[1])).abs() < 1e-15);
        assert!(phi[0].abs() + phi[1].abs() > 1e-3);
    }

    #[test]
    fn boundary_trace_is_polynomial_evaluation() {
        let prob = example(4).unwrap();
        let b = prob.exact.as_ref().unwrap();
        // outer branch vanishes on the outer boundary (factor x(1-x)y(1-y))
        for t in 0..10 {
            let s = t as f64 / 9.0;
            for p in [
                Point2::new(s, 0.0),
                Point2::new(s, 1.0),
                Point2::new(0.0, s),
                Point2::new(1.0, s),
            ] {
                let u = b[1].eval_u(p);
                assert!(u[0].abs() < 1e-14 && u[1].abs() < 1e-14);
                let g = prob.dirichlet(p, 1);
                assert_eq!(g, u);
            }
        }
    }
}
