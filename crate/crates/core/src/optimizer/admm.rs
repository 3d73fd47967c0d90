use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::sdp::{from_hermitian_coords, hermitian_coords, trace_input};
use crate::pauli::{random_hermitian_with, rng_from_seed};
use crate::tensor::linalg::{self, c, CMatrix};
use crate::tensor::SystemLayout;

/// Iteration limits and stopping rule of the first-order solver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Stop once `max(primal, dual)` residual is below this ...
    pub primal_tolerance: f64,
    /// ... and the objective moved less than this over `window` iterations.
    pub objective_tolerance: f64,
    pub window: usize,
    /// Initial penalty; adapted by residual balancing.
    pub rho: f64,
    /// Over-relaxation factor in `(0, 2)`.
    pub relaxation: f64,
    /// Seeds the jitter of the starting point.
    pub seed: u64,
    /// Record a trace row every this many iterations.
    pub trace_every: usize,
    /// Largest operator dimension accepted.
    pub max_dim: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100_000,
            primal_tolerance: 1e-7,
            objective_tolerance: 1e-8,
            window: 50,
            rho: 1.0,
            relaxation: 1.6,
            seed: 0,
            trace_every: 10,
            max_dim: super::DEFAULT_MAX_DIM,
        }
    }
}

/// One row of the solver trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub residual: f64,
}

/// The program on the face singled out by perfect teleportation.
///
/// With the resource written as `(X (x) I)|Phi>`, the teleportation rows
/// fix `Tr_rest Omega_k` to a multiple of `Phi+` on `(a, A'_k)`, and
/// positivity then forces `Omega_k = Phi+_{a A'_k} (x) Y_k`. Over the
/// reference layout `(a, A'_1..A'_N)` the program is
///
/// ```text
/// max  sum_k Tr(Y_k) / d^(N+1)
/// s.t. Z + sum_k Phi+_{a A'_k} (x) Y_k = I_a (x) S,   Y_k, Z >= 0
/// ```
///
/// with `S = X† X` given (fixed mode) or a PSD variable with
/// `Tr S = d^N` (joint mode). Unlike the row form it has strictly
/// feasible points, which the splitting method needs to converge at a
/// useful rate.
#[derive(Clone, Debug)]
pub(crate) struct FaceProgram {
    pub d: usize,
    pub ports: usize,
    /// `d^(N-1)`, the side of each `Y_k`.
    pub m: usize,
    /// `d^N`, the side of `S`.
    pub db: usize,
    /// `d^(N+1)`, the side of `Z`.
    pub dim: usize,
    /// `I_a (x) S` in fixed mode, zero in joint mode.
    target: CMatrix,
    joint: bool,
    /// `index[k][x * m + r]`: full index of `a = A'_k = x`, rest `= r`.
    index: Vec<Vec<usize>>,
    h: Cholesky<f64, Dyn>,
    /// `H^{-1} tau` and `tau^T H^{-1} tau` for the trace row (joint mode).
    h_tau: DVector<f64>,
    tau_h_tau: f64,
    tau: DVector<f64>,
    cost: DVector<f64>,
}

#[derive(Clone, Debug)]
pub(crate) struct Point {
    pub z: CMatrix,
    pub w: DVector<f64>,
}

impl Point {
    fn axpy(&self, a: f64, other: &Point, b: f64) -> Point {
        Point { z: &self.z * c(a, 0.0) + &other.z * c(b, 0.0), w: &self.w * a + &other.w * b }
    }

    fn distance(&self, other: &Point) -> f64 {
        ((&self.z - &other.z).norm_squared() + (&self.w - &other.w).norm_squared()).sqrt()
    }

    fn scaled(&self, a: f64) -> Point {
        Point { z: &self.z * c(a, 0.0), w: &self.w * a }
    }
}

pub(crate) struct AdmmOutcome {
    pub point: Point,
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
    pub objective: f64,
    pub trace: Vec<TraceRow>,
}

impl FaceProgram {
    /// `s` is `X† X` for a fixed resource, `None` for the joint program.
    pub fn new(n: usize, ports: usize, s: Option<&CMatrix>) -> Self {
        let d = 1usize << n;
        let m = d.pow(ports as u32 - 1);
        let db = m * d;
        let dim = db * d;
        let joint = s.is_none();
        let target = match s {
            Some(s) => CMatrix::identity(d, d).kronecker(s),
            None => CMatrix::zeros(dim, dim),
        };
        let index = (0..ports)
            .map(|k| {
                let mut out = Vec::with_capacity(d * m);
                for x in 0..d {
                    for r in 0..m {
                        // digits of r fill A'_j for j != k, most significant first
                        let mut full = x;
                        let mut rest = r;
                        let mut digits = vec![0usize; ports];
                        for j in (0..ports).rev() {
                            if j == k {
                                digits[j] = x;
                            } else {
                                digits[j] = rest % d;
                                rest /= d;
                            }
                        }
                        for digit in digits {
                            full = full * d + digit;
                        }
                        out.push(full);
                    }
                }
                out
            })
            .collect();

        let ydim = m * m;
        let size = ports * ydim + if joint { db * db } else { 0 };
        let mut cost = DVector::zeros(size);
        let scale = 1.0 / (db * d) as f64;
        for k in 0..ports {
            for i in 0..m {
                cost[k * ydim + i] = -scale;
            }
        }
        let mut tau = DVector::zeros(size);
        if joint {
            for i in 0..db {
                tau[ports * ydim + i] = 1.0;
            }
        }
        let mut prog = FaceProgram {
            d,
            ports,
            m,
            db,
            dim,
            target,
            joint,
            index,
            h: Cholesky::new(DMatrix::identity(1, 1)).expect("identity"),
            h_tau: DVector::zeros(size),
            tau_h_tau: 0.0,
            tau,
            cost,
        };
        let mut h = DMatrix::identity(size, size);
        let mut e = DVector::zeros(size);
        for j in 0..size {
            e[j] = 1.0;
            let col = prog.adjoint(&prog.apply(&e));
            e[j] = 0.0;
            for i in 0..size {
                h[(i, j)] += col[i];
            }
        }
        prog.h = Cholesky::new(h).expect("I + U^T U is positive definite");
        if joint {
            prog.h_tau = prog.h.solve(&prog.tau);
            prog.tau_h_tau = prog.tau.dot(&prog.h_tau);
        }
        prog
    }

    fn ydim(&self) -> usize {
        self.m * self.m
    }

    pub fn y_block(&self, w: &DVector<f64>, k: usize) -> CMatrix {
        let y = self.ydim();
        from_hermitian_coords(&w.as_slice()[k * y..(k + 1) * y], self.m)
    }

    pub fn s_block(&self, w: &DVector<f64>) -> Option<CMatrix> {
        let off = self.ports * self.ydim();
        self.joint.then(|| from_hermitian_coords(&w.as_slice()[off..], self.db))
    }

    /// `Phi+_{a A'_k} (x) Y` on `(a, A'_1..A'_N)`.
    pub fn lift(&self, k: usize, y: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        self.add_lift(k, y, &mut out);
        out
    }

    fn add_lift(&self, k: usize, y: &CMatrix, out: &mut CMatrix) {
        let (d, m) = (self.d, self.m);
        let inv = 1.0 / d as f64;
        let idx = &self.index[k];
        for x in 0..d {
            for yy in 0..d {
                for r in 0..m {
                    for s in 0..m {
                        out[(idx[x * m + r], idx[yy * m + s])] += y[(r, s)] * inv;
                    }
                }
            }
        }
    }

    fn lift_adjoint(&self, k: usize, w: &CMatrix) -> CMatrix {
        let (d, m) = (self.d, self.m);
        let inv = 1.0 / d as f64;
        let idx = &self.index[k];
        let mut y = CMatrix::zeros(m, m);
        for x in 0..d {
            for yy in 0..d {
                for r in 0..m {
                    for s in 0..m {
                        y[(r, s)] += w[(idx[x * m + r], idx[yy * m + s])] * inv;
                    }
                }
            }
        }
        y
    }

    /// `U'(w) = sum_k Phi+ (x) Y_k - I_a (x) S`.
    fn apply(&self, w: &DVector<f64>) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for k in 0..self.ports {
            self.add_lift(k, &self.y_block(w, k), &mut out);
        }
        if let Some(s) = self.s_block(w) {
            out -= CMatrix::identity(self.d, self.d).kronecker(&s);
        }
        out
    }

    fn adjoint(&self, big: &CMatrix) -> DVector<f64> {
        let y = self.ydim();
        let mut out = DVector::zeros(self.cost.len());
        for k in 0..self.ports {
            let block = linalg::hermitize(&self.lift_adjoint(k, big));
            hermitian_coords(&block, &mut out.as_mut_slice()[k * y..(k + 1) * y]);
        }
        if self.joint {
            let off = self.ports * y;
            let traced = linalg::hermitize(&trace_input(big, self.d, self.db)).map(|z| -z);
            hermitian_coords(&traced, &mut out.as_mut_slice()[off..]);
        }
        out
    }

    /// Euclidean projection onto `Z + U'(w) = target` (and `Tr S = d^N`).
    pub fn project_affine(&self, p: &Point) -> Point {
        let rhs = &self.target - &p.z;
        let h = &p.w + self.adjoint(&rhs);
        let mut w = self.h.solve(&h);
        if self.joint {
            let mu = (self.db as f64 - self.tau.dot(&w)) / self.tau_h_tau;
            w += &self.h_tau * mu;
        }
        let z = linalg::hermitize(&(&self.target - self.apply(&w)));
        Point { z, w }
    }

    fn project_cone(&self, p: &Point) -> Point {
        let y = self.ydim();
        let mut w = p.w.clone();
        for k in 0..self.ports {
            let block = linalg::psd_projection(&self.y_block(&p.w, k));
            hermitian_coords(&block, &mut w.as_mut_slice()[k * y..(k + 1) * y]);
        }
        if let Some(s) = self.s_block(&p.w) {
            let off = self.ports * y;
            hermitian_coords(&linalg::psd_projection(&s), &mut w.as_mut_slice()[off..]);
        }
        Point { z: linalg::psd_projection(&p.z), w }
    }

    #[cfg(test)]
    pub fn equality_residual(&self, p: &Point) -> f64 {
        let mut r = (&p.z + self.apply(&p.w) - &self.target).norm();
        if let Some(s) = self.s_block(&p.w) {
            r = r.hypot(linalg::trace(&s).re - self.db as f64);
        }
        r
    }

    /// Success probability `sum_k Tr(Y_k) / d^(N+1)` at `w`.
    pub fn objective(&self, w: &DVector<f64>) -> f64 {
        -self.cost.dot(w)
    }

    /// `Y_k = I / (N+1)`, `S = I` and the matching slack, plus seeded
    /// jitter of size `1e-3`.
    fn starting_point(&self, seed: u64) -> Point {
        let mut rng = rng_from_seed(seed);
        let mut jitter = |d: usize| {
            let layout = SystemLayout::single("x", d).expect("nonzero dimension");
            random_hermitian_with(&mut rng, layout).into_entries() * c(1e-3, 0.0)
        };
        let y = self.ydim();
        let mut w = DVector::zeros(self.cost.len());
        let share = CMatrix::identity(self.m, self.m) / c((self.ports + 1) as f64, 0.0);
        for k in 0..self.ports {
            let block = linalg::psd_projection(&(&share + jitter(self.m)));
            hermitian_coords(&block, &mut w.as_mut_slice()[k * y..(k + 1) * y]);
        }
        if self.joint {
            let off = self.ports * y;
            let s = linalg::psd_projection(&(CMatrix::identity(self.db, self.db) + jitter(self.db)));
            hermitian_coords(&s, &mut w.as_mut_slice()[off..]);
        }
        let base = if self.joint {
            CMatrix::identity(self.dim, self.dim)
        } else {
            self.target.clone()
        };
        let mut z = base;
        for k in 0..self.ports {
            z -= self.lift(k, &self.y_block(&w, k));
        }
        let z = linalg::psd_projection(&(z + jitter(self.dim)));
        Point { z, w }
    }

    /// Relaxed ADMM on `min cost^T w  s.t.  affine equalities, PSD blocks`.
    pub fn admm(&self, cfg: &SolverConfig) -> AdmmOutcome {
        let mut z = self.starting_point(cfg.seed);
        let mut u = z.scaled(0.0);
        let mut rho = cfg.rho;
        let alpha = cfg.relaxation;
        let window = cfg.window.max(1);
        let mut history: Vec<f64> = Vec::with_capacity(window + 1);
        let mut trace = Vec::new();
        let mut residual = f64::INFINITY;
        let mut objective = 0.0;
        let every = cfg.trace_every.max(1);

        for it in 1..=cfg.max_iterations {
            let mut v = z.axpy(1.0, &u, -1.0);
            v.w -= &self.cost / rho;
            let x = self.project_affine(&v);
            let relaxed = x.axpy(alpha, &z, 1.0 - alpha);
            let z_new = self.project_cone(&relaxed.axpy(1.0, &u, 1.0));
            u = u.axpy(1.0, &relaxed.axpy(1.0, &z_new, -1.0), 1.0);
            let primal = x.distance(&z_new);
            let dual = rho * z_new.distance(&z);
            z = z_new;
            residual = primal.max(dual);
            objective = self.objective(&x.w);

            history.push(objective);
            if history.len() > window {
                history.remove(0);
            }
            if it % every == 0 {
                trace.push(TraceRow { iteration: it, objective, residual });
            }
            let settled = history.len() == window
                && history.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
                    - history.iter().fold(f64::INFINITY, |a, &b| a.min(b))
                    < cfg.objective_tolerance;
            if residual < cfg.primal_tolerance && settled {
                if it % every != 0 {
                    trace.push(TraceRow { iteration: it, objective, residual });
                }
                return AdmmOutcome { point: z, iterations: it, converged: true, residual, objective, trace };
            }
            if it % 50 == 0 {
                // residual balancing; the scaled dual variable rescales with rho
                if primal > 10.0 * dual {
                    rho *= 2.0;
                    u = u.scaled(0.5);
                } else if dual > 10.0 * primal {
                    rho /= 2.0;
                    u = u.scaled(2.0);
                }
            }
        }
        if trace.last().is_none_or(|r| r.iteration != cfg.max_iterations) {
            trace.push(TraceRow { iteration: cfg.max_iterations, objective, residual });
        }
        AdmmOutcome { point: z, iterations: cfg.max_iterations, converged: false, residual, objective, trace }
    }
}
