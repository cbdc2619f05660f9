//! Log-barrier interior-point method with a phase-I feasibility search.

use nalgebra::{DMatrix, DVector};

use super::kkt::Multipliers;
use super::{Affine, Atom, Constraint, ConvexProgram, Variable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Final primal point (best iterate when not optimal).
    pub x: Vec<f64>,
    /// Maximized objective value at `x`.
    pub objective: f64,
    pub multipliers: Multipliers,
    pub kkt_stationarity_residual: f64,
    pub kkt_feasibility_residual: f64,
    pub kkt_complementarity_residual: f64,
    pub newton_steps: usize,
    /// On infeasibility: nonnegative constraint weights (summing to one) from
    /// the feasibility search, under which no point makes the weighted sum of
    /// constraint values negative.
    pub certificate: Option<Vec<f64>>,
}

impl SolveReport {
    pub fn max_residual(&self) -> f64 {
        self.kkt_stationarity_residual
            .max(self.kkt_feasibility_residual)
            .max(self.kkt_complementarity_residual)
    }
}

const MU: f64 = 20.0;
const T0: f64 = 1.0;
const DECREMENT_TOL: f64 = 1e-10;
const INNER_CAP: usize = 80;

/// Sparse gradient accumulator; indices may repeat until `merge`.
#[derive(Default)]
struct Sparse(Vec<(usize, f64)>);

impl Sparse {
    fn push_affine(&mut self, a: &Affine, s: f64) {
        for &(i, c) in &a.terms {
            self.0.push((i, s * c));
        }
    }

    fn merge(&mut self) {
        self.0.sort_unstable_by_key(|e| e.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.0.len());
        for &(i, v) in &self.0 {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => out.push((i, v)),
            }
        }
        self.0 = out;
    }
}

fn add_outer_affine(h: &mut DMatrix<f64>, a: &Affine, b: &Affine, c: f64) {
    for &(i, ci) in &a.terms {
        for &(j, cj) in &b.terms {
            h[(i, j)] += c * ci * cj;
        }
    }
}

fn add_outer_sparse(h: &mut DMatrix<f64>, v: &[(usize, f64)], c: f64) {
    for &(i, vi) in v {
        for &(j, vj) in v {
            h[(i, j)] += c * vi * vj;
        }
    }
}

/// Pushes `s * grad(atom)` into `g`.
fn atom_grad(atom: &Atom, x: &[f64], s: f64, g: &mut Sparse) {
    match atom {
        Atom::Affine(a) => g.push_affine(a, s),
        Atom::NegLog { weight, arg } => g.push_affine(arg, -s * weight / arg.eval(x)),
        Atom::SqNorm { weight, args } => {
            for a in args {
                g.push_affine(a, 2.0 * s * weight * a.eval(x));
            }
        }
        Atom::NormCubed { weight, args } => {
            let vals: Vec<f64> = args.iter().map(|a| a.eval(x)).collect();
            let r = vals.iter().map(|v| v * v).sum::<f64>().sqrt();
            for (a, v) in args.iter().zip(&vals) {
                g.push_affine(a, 3.0 * s * weight * r * v);
            }
        }
        Atom::Recip { weight, arg } => {
            let u = arg.eval(x);
            g.push_affine(arg, -s * weight / (u * u));
        }
        Atom::QuadOverLin { weight, num, den } => {
            let y = den.eval(x);
            let mut q = 0.0;
            for a in num {
                let u = a.eval(x);
                q += u * u;
                g.push_affine(a, 2.0 * s * weight * u / y);
            }
            g.push_affine(den, -s * weight * q / (y * y));
        }
    }
}

/// Adds `s * hess(atom)` to `h`.
fn atom_hess(atom: &Atom, x: &[f64], s: f64, h: &mut DMatrix<f64>) {
    match atom {
        Atom::Affine(_) => {}
        Atom::NegLog { weight, arg } => {
            let u = arg.eval(x);
            add_outer_affine(h, arg, arg, s * weight / (u * u));
        }
        Atom::SqNorm { weight, args } => {
            for a in args {
                add_outer_affine(h, a, a, 2.0 * s * weight);
            }
        }
        Atom::NormCubed { weight, args } => {
            let vals: Vec<f64> = args.iter().map(|a| a.eval(x)).collect();
            let r = vals.iter().map(|v| v * v).sum::<f64>().sqrt();
            for a in args {
                add_outer_affine(h, a, a, 3.0 * s * weight * r);
            }
            if r > 0.0 {
                let mut v = Sparse::default();
                for (a, u) in args.iter().zip(&vals) {
                    v.push_affine(a, *u);
                }
                v.merge();
                add_outer_sparse(h, &v.0, 3.0 * s * weight / r);
            }
        }
        Atom::Recip { weight, arg } => {
            let u = arg.eval(x);
            add_outer_affine(h, arg, arg, 2.0 * s * weight / (u * u * u));
        }
        Atom::QuadOverLin { weight, num, den } => {
            let y = den.eval(x);
            for a in num {
                let u = a.eval(x);
                let mut v = Sparse::default();
                v.push_affine(a, 1.0);
                v.push_affine(den, -u / y);
                v.merge();
                add_outer_sparse(h, &v.0, 2.0 * s * weight / y);
            }
        }
    }
}

/// Barrier problem `t f0(x) - sum ln(-g_i(x)) - sum ln(box slack)`.
struct Barrier<'a> {
    vars: &'a [Variable],
    objective: &'a [Atom],
    constraints: &'a [Constraint],
    free: Vec<bool>,
}

impl<'a> Barrier<'a> {
    fn new(vars: &'a [Variable], objective: &'a [Atom], constraints: &'a [Constraint]) -> Self {
        let free = vars.iter().map(|v| !v.is_fixed()).collect();
        Self { vars, objective, constraints, free }
    }

    fn n(&self) -> usize {
        self.vars.len()
    }

    fn num_barrier_terms(&self) -> usize {
        let boxes: usize = self
            .vars
            .iter()
            .filter(|v| !v.is_fixed())
            .map(|v| v.lb.is_finite() as usize + v.ub.is_finite() as usize)
            .sum();
        self.constraints.len() + boxes
    }

    fn f0(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|a| a.eval(x)).sum()
    }

    /// Barrier value, or `None` outside the domain.
    fn value(&self, t: f64, x: &[f64]) -> Option<f64> {
        let mut f = 0.0;
        for (v, (&xi, &free)) in self.vars.iter().zip(x.iter().zip(&self.free)) {
            if !free {
                continue;
            }
            if v.lb.is_finite() {
                let s = xi - v.lb;
                if !(s > 0.0) {
                    return None;
                }
                f -= s.ln();
            }
            if v.ub.is_finite() {
                let s = v.ub - xi;
                if !(s > 0.0) {
                    return None;
                }
                f -= s.ln();
            }
        }
        for c in self.constraints {
            let g = c.eval(x);
            if !(g < 0.0) {
                return None;
            }
            f -= (-g).ln();
        }
        let obj = self.f0(x);
        if !obj.is_finite() {
            return None;
        }
        let total = t * obj + f;
        total.is_finite().then_some(total)
    }

    /// Gradient and Hessian of the barrier at an interior point.
    fn derivatives(&self, t: f64, x: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.n();
        let mut grad = DVector::zeros(n);
        let mut hess = DMatrix::zeros(n, n);

        let mut g0 = Sparse::default();
        for a in self.objective {
            atom_grad(a, x, t, &mut g0);
            atom_hess(a, x, t, &mut hess);
        }
        for &(i, v) in &g0.0 {
            grad[i] += v;
        }

        for c in self.constraints {
            let g = c.eval(x);
            let inv = 1.0 / (-g);
            let mut gc = Sparse::default();
            for a in &c.atoms {
                atom_grad(a, x, 1.0, &mut gc);
                atom_hess(a, x, inv, &mut hess);
            }
            gc.merge();
            for &(i, v) in &gc.0 {
                grad[i] += inv * v;
            }
            add_outer_sparse(&mut hess, &gc.0, inv * inv);
        }

        for (i, v) in self.vars.iter().enumerate() {
            if !self.free[i] {
                continue;
            }
            if v.lb.is_finite() {
                let s = x[i] - v.lb;
                grad[i] -= 1.0 / s;
                hess[(i, i)] += 1.0 / (s * s);
            }
            if v.ub.is_finite() {
                let s = v.ub - x[i];
                grad[i] += 1.0 / s;
                hess[(i, i)] += 1.0 / (s * s);
            }
        }

        for i in 0..n {
            if !self.free[i] {
                grad[i] = 0.0;
                for j in 0..n {
                    hess[(i, j)] = 0.0;
                    hess[(j, i)] = 0.0;
                }
                hess[(i, i)] = 1.0;
            }
        }
        (grad, hess)
    }

    fn multipliers(&self, t: f64, x: &[f64]) -> Multipliers {
        let constraints = self.constraints.iter().map(|c| 1.0 / (t * (-c.eval(x)))).collect();
        let mut lower = vec![0.0; self.n()];
        let mut upper = vec![0.0; self.n()];
        for (i, v) in self.vars.iter().enumerate() {
            if !self.free[i] {
                continue;
            }
            if v.lb.is_finite() {
                lower[i] = 1.0 / (t * (x[i] - v.lb));
            }
            if v.ub.is_finite() {
                upper[i] = 1.0 / (t * (v.ub - x[i]));
            }
        }
        Multipliers { constraints, lower, upper }
    }
}

impl Barrier<'_> {
    fn objective_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = Sparse::default();
        for a in self.objective {
            atom_grad(a, x, 1.0, &mut g);
        }
        let mut out = vec![0.0; self.n()];
        for (i, v) in g.0 {
            out[i] += v;
        }
        out
    }

    fn constraint_gradient(&self, c: &Constraint, x: &[f64]) -> Vec<(usize, f64)> {
        let mut g = Sparse::default();
        for a in &c.atoms {
            atom_grad(a, x, 1.0, &mut g);
        }
        g.merge();
        g.0
    }

    /// `grad f0 + sum lambda_i grad g_i - lower + upper`, sup norm over free
    /// variables.
    fn stationarity(&self, x: &[f64], m: &Multipliers) -> f64 {
        let mut r = self.objective_gradient(x);
        for (c, &lam) in self.constraints.iter().zip(&m.constraints) {
            if lam != 0.0 {
                for (i, v) in self.constraint_gradient(c, x) {
                    r[i] += lam * v;
                }
            }
        }
        (0..self.n())
            .filter(|&j| self.free[j])
            .map(|j| (r[j] - m.lower[j] + m.upper[j]).abs())
            .fold(0.0, f64::max)
    }

    fn complementarity(&self, x: &[f64], m: &Multipliers) -> f64 {
        let mut worst = 0.0f64;
        for (c, &lam) in self.constraints.iter().zip(&m.constraints) {
            worst = worst.max((lam * c.eval(x)).abs());
        }
        for (j, v) in self.vars.iter().enumerate() {
            if v.lb.is_finite() {
                worst = worst.max((m.lower[j] * (x[j] - v.lb)).abs());
            }
            if v.ub.is_finite() {
                worst = worst.max((m.upper[j] * (v.ub - x[j])).abs());
            }
        }
        worst
    }

    /// Barrier multipliers `1/(t * slack)` lose accuracy at near-active
    /// constraints, where the slack carries large relative rounding error.
    /// Those multipliers are re-fitted by nonnegative least squares on the
    /// stationarity equations, holding the rest fixed. The refit is kept only
    /// if it lowers the residual.
    #[allow(clippy::needless_range_loop)]
    fn refined_multipliers(&self, t: f64, x: &[f64]) -> Multipliers {
        let base = self.multipliers(t, x);
        let threshold = 1.0 / t.sqrt();
        let n = self.n();
        // columns: (sparse gradient, multiplier slot)
        enum Slot {
            Con(usize),
            Lower(usize),
            Upper(usize),
        }
        let mut cols: Vec<(Vec<(usize, f64)>, Slot)> = Vec::new();
        let mut rhs = self.objective_gradient(x);
        for (i, c) in self.constraints.iter().enumerate() {
            let grad = self.constraint_gradient(c, x);
            if base.constraints[i] >= threshold {
                cols.push((grad, Slot::Con(i)));
            } else {
                for (j, v) in grad {
                    rhs[j] += base.constraints[i] * v;
                }
            }
        }
        for j in 0..n {
            if !self.free[j] {
                continue;
            }
            if base.lower[j] >= threshold {
                cols.push((vec![(j, -1.0)], Slot::Lower(j)));
            } else {
                rhs[j] -= base.lower[j];
            }
            if base.upper[j] >= threshold {
                cols.push((vec![(j, 1.0)], Slot::Upper(j)));
            } else {
                rhs[j] += base.upper[j];
            }
        }
        if cols.is_empty() {
            return base;
        }
        for (r, &free) in rhs.iter_mut().zip(&self.free) {
            if !free {
                *r = 0.0;
            }
        }
        let k = cols.len();
        let mut a = DMatrix::<f64>::zeros(n, k);
        for (c, (grad, _)) in cols.iter().enumerate() {
            for &(j, v) in grad {
                if self.free[j] {
                    a[(j, c)] += v;
                }
            }
        }
        let initial: Vec<f64> = cols
            .iter()
            .map(|(_, s)| match *s {
                Slot::Con(i) => base.constraints[i],
                Slot::Lower(j) => base.lower[j],
                Slot::Upper(j) => base.upper[j],
            })
            .collect();
        let b = -DVector::from_vec(rhs);
        let Some(mu) = nonneg_least_squares(&a, &b, &initial) else {
            return base;
        };
        let mut refined = base.clone();
        for ((_, s), &v) in cols.iter().zip(mu.iter()) {
            match *s {
                Slot::Con(i) => refined.constraints[i] = v,
                Slot::Lower(j) => refined.lower[j] = v,
                Slot::Upper(j) => refined.upper[j] = v,
            }
        }
        let before = self.stationarity(x, &base);
        let after = self.stationarity(x, &refined);
        if after < before && self.complementarity(x, &refined) <= 10.0 * self.complementarity(x, &base) {
            refined
        } else {
            base
        }
    }
}

/// Least squares `min |A mu - b|` with `mu >= 0`, warm-started from an
/// interior estimate: solve unconstrained, then drop negative components and
/// re-solve on the remaining columns.
fn nonneg_least_squares(a: &DMatrix<f64>, b: &DVector<f64>, init: &[f64]) -> Option<DVector<f64>> {
    let k = a.ncols();
    let mut keep: Vec<bool> = init.iter().map(|_| true).collect();
    for _ in 0..k.max(1) {
        let idx: Vec<usize> = (0..k).filter(|&c| keep[c]).collect();
        if idx.is_empty() {
            return Some(DVector::zeros(k));
        }
        let sub = a.select_columns(&idx);
        let norms: Vec<f64> = (0..idx.len()).map(|c| sub.column(c).norm().max(1e-300)).collect();
        let mut scaled = sub.clone();
        for (c, nrm) in norms.iter().enumerate() {
            scaled.column_mut(c).scale_mut(1.0 / nrm);
        }
        let y = lstsq(&scaled, b)?;
        let mut full = DVector::zeros(k);
        let mut negative = false;
        for (p, &c) in idx.iter().enumerate() {
            let v = y[p] / norms[p];
            if v < 0.0 {
                keep[c] = false;
                negative = true;
            } else {
                full[c] = v;
            }
        }
        if !negative {
            return Some(full);
        }
    }
    None
}

/// Minimum-residual solution by QR when tall, or regularized normal
/// equations otherwise.
fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let (m, k) = a.shape();
    if m >= k {
        let qr = a.clone().qr();
        let r = qr.r();
        if (0..k).all(|i| r[(i, i)].abs() > 1e-13) {
            let qtb = qr.q().transpose() * b;
            return r.solve_upper_triangular(&qtb.rows(0, k).into_owned());
        }
    }
    let mut n = a.transpose() * a;
    for i in 0..k {
        n[(i, i)] += 1e-12;
    }
    let rhs = a.transpose() * b;
    n.cholesky().map(|c| c.solve(&rhs))
}

/// Newton direction for `H d = -g` with Jacobi scaling and a regularization
/// fallback.
fn newton_direction(grad: &DVector<f64>, hess: DMatrix<f64>) -> Option<DVector<f64>> {
    let n = grad.len();
    let d: DVector<f64> = DVector::from_iterator(
        n,
        (0..n).map(|i| {
            let hii = hess[(i, i)];
            if hii > 0.0 && hii.is_finite() {
                1.0 / hii.sqrt()
            } else {
                1.0
            }
        }),
    );
    let mut scaled = hess;
    for j in 0..n {
        for i in 0..n {
            scaled[(i, j)] *= d[i] * d[j];
        }
    }
    let rhs = -grad.component_mul(&d);
    let mut reg = 0.0;
    for _ in 0..12 {
        let mut m = scaled.clone();
        if reg > 0.0 {
            for i in 0..n {
                m[(i, i)] += reg;
            }
        }
        if let Some(ch) = m.cholesky() {
            let y = ch.solve(&rhs);
            if y.iter().all(|v| v.is_finite()) {
                return Some(y.component_mul(&d));
            }
        }
        reg = if reg == 0.0 { 1e-12 } else { reg * 100.0 };
    }
    None
}

enum CenterOutcome {
    Converged,
    Stalled,
    Budget,
}

/// Minimizes the barrier at fixed `t` starting from `x`.
fn center(
    b: &Barrier,
    t: f64,
    x: &mut Vec<f64>,
    steps: &mut usize,
    max_steps: usize,
    mut stop: impl FnMut(&[f64]) -> bool,
) -> CenterOutcome {
    let mut fx = match b.value(t, x) {
        Some(v) => v,
        None => return CenterOutcome::Stalled,
    };
    for _ in 0..INNER_CAP {
        if *steps >= max_steps {
            return CenterOutcome::Budget;
        }
        let (grad, hess) = b.derivatives(t, x);
        let dir = match newton_direction(&grad, hess) {
            Some(d) => d,
            None => return CenterOutcome::Stalled,
        };
        let slope = grad.dot(&dir);
        let dec2 = -slope;
        if dec2 / 2.0 <= DECREMENT_TOL {
            return CenterOutcome::Converged;
        }
        if dec2 / 2.0 <= 1e-20 || !(slope < 0.0) {
            return if dec2 / 2.0 <= DECREMENT_TOL {
                CenterOutcome::Converged
            } else {
                CenterOutcome::Stalled
            };
        }
        *steps += 1;
        let mut s = 1.0;
        let mut accepted = false;
        let mut trial = x.clone();
        while s > 1e-14 {
            for i in 0..x.len() {
                trial[i] = x[i] + s * dir[i];
            }
            if let Some(ft) = b.value(t, &trial) {
                if ft <= fx + 0.25 * s * slope {
                    accepted = true;
                    fx = ft;
                    break;
                }
            }
            s *= 0.5;
        }
        if !accepted {
            return if dec2 / 2.0 <= DECREMENT_TOL {
                CenterOutcome::Converged
            } else {
                CenterOutcome::Stalled
            };
        }
        std::mem::swap(x, &mut trial);
        if stop(x) {
            return CenterOutcome::Converged;
        }
    }
    CenterOutcome::Stalled
}

fn initial_point(vars: &[Variable]) -> Vec<f64> {
    vars.iter()
        .map(|v| {
            if v.is_fixed() {
                return v.lb;
            }
            let (lb, ub) = (v.lb, v.ub);
            let raw = v.hint.unwrap_or(match (lb.is_finite(), ub.is_finite()) {
                (true, true) => 0.5 * (lb + ub),
                (true, false) => lb + 1.0,
                (false, true) => ub - 1.0,
                (false, false) => 0.0,
            });
            let mut x = raw;
            if lb.is_finite() && ub.is_finite() {
                let m = (1e-8 * (ub - lb).max(1.0)).min(0.25 * (ub - lb));
                x = x.clamp(lb + m, ub - m);
            } else if lb.is_finite() {
                x = x.max(lb + 1e-8 * lb.abs().max(1.0));
            } else if ub.is_finite() {
                x = x.min(ub - 1e-8 * ub.abs().max(1.0));
            }
            x
        })
        .collect()
}

/// Optional infeasibility certificate and the last point reached.
type PhaseOneFailure = (Option<Vec<f64>>, Vec<f64>);

/// Phase I: finds a strictly feasible point or proves infeasibility.
fn phase_one(
    prog: &ConvexProgram,
    x0: &[f64],
    steps: &mut usize,
    max_steps: usize,
) -> Result<Vec<f64>, PhaseOneFailure> {
    let s0 = prog.constraints.iter().map(|c| c.eval(x0)).fold(f64::NEG_INFINITY, f64::max);
    let n = prog.vars.len();
    let s_lb = -(1.0 + s0.abs());
    let mut vars = prog.vars.clone();
    vars.push(Variable { name: "phase1_s".into(), lb: s_lb, ub: f64::INFINITY, hint: None });
    let sv = n;
    let shift = Affine { terms: vec![(sv, -1.0)], constant: 0.0 };
    let constraints: Vec<Constraint> = prog
        .constraints
        .iter()
        .map(|c| {
            let mut atoms = c.atoms.clone();
            atoms.push(Atom::Affine(shift.clone()));
            Constraint { name: c.name.clone(), atoms }
        })
        .collect();
    let objective = vec![Atom::Affine(Affine { terms: vec![(sv, 1.0)], constant: 0.0 })];
    let b = Barrier::new(&vars, &objective, &constraints);

    let mut x = x0.to_vec();
    x.push(s0.max(s_lb) + 1.0 + 1e-3 * s0.abs());
    if b.value(1.0, &x).is_none() {
        return Err((None, x0.to_vec()));
    }
    let m = b.num_barrier_terms() as f64;
    let mut t = T0;
    let gap_tol = 1e-12 * (1.0 + s0.abs());
    loop {
        // The auxiliary variable may lag behind the true worst constraint, and
        // variables that only loosen constraints can drift without bound, so
        // stop at the first strictly feasible iterate.
        let worst = |p: &[f64]| prog.constraints.iter().map(|c| c.eval(&p[..n])).fold(f64::NEG_INFINITY, f64::max);
        let outcome = center(&b, t, &mut x, steps, max_steps, |p| p[sv] <= 0.5 * s_lb || worst(p) < 0.0);
        if x[sv] < 0.0 || worst(&x) < 0.0 {
            x.truncate(n);
            return Ok(x);
        }
        let done = m / t <= gap_tol;
        if done || !matches!(outcome, CenterOutcome::Converged) {
            let cert = b.multipliers(t, &x).constraints;
            let total: f64 = cert.iter().sum();
            let cert = cert.into_iter().map(|v| v / total).collect();
            x.truncate(n);
            return Err((Some(cert), x));
        }
        t *= MU;
    }
}

/// Solves `prog` to KKT residuals `<= tol` within `max_iter` Newton steps.
pub fn solve(prog: &ConvexProgram, tol: f64, max_iter: usize) -> SolveReport {
    if let Err(msg) = prog.validate() {
        panic!("malformed convex program: {msg}");
    }
    let mut steps = 0;
    let x0 = initial_point(&prog.vars);
    let b = Barrier::new(&prog.vars, &prog.objective, &prog.constraints);

    let mut x = if b.value(T0, &x0).is_some() {
        x0
    } else {
        match phase_one(prog, &x0, &mut steps, max_iter) {
            Ok(x) => x,
            Err((certificate, x)) => {
                let status = if steps >= max_iter {
                    SolveStatus::MaxIterations
                } else {
                    SolveStatus::Infeasible
                };
                return report_without_barrier(prog, x, status, steps, certificate);
            }
        }
    };
    if b.value(T0, &x).is_none() {
        return report_without_barrier(prog, x, SolveStatus::Infeasible, steps, None);
    }

    let m = b.num_barrier_terms() as f64;
    let mut t = T0;
    let mut status = SolveStatus::MaxIterations;
    loop {
        let outcome = center(&b, t, &mut x, &mut steps, max_iter, |_| false);
        let complementarity = 1.0 / t;
        let converged = matches!(outcome, CenterOutcome::Converged);
        if complementarity <= tol && converged {
            status = SolveStatus::Optimal;
            break;
        }
        if matches!(outcome, CenterOutcome::Budget) || steps >= max_iter {
            break;
        }
        if complementarity <= tol || m / t < f64::EPSILON {
            break;
        }
        t *= MU;
    }
    finish(prog, &b, t, x, status, steps, tol)
}

fn finish(
    prog: &ConvexProgram,
    b: &Barrier,
    t: f64,
    x: Vec<f64>,
    status: SolveStatus,
    steps: usize,
    tol: f64,
) -> SolveReport {
    let multipliers = b.refined_multipliers(t, &x);
    let stationarity = b.stationarity(&x, &multipliers);
    let complementarity = b.complementarity(&x, &multipliers);
    let feasibility = prog.max_violation(&x);
    let within = stationarity.max(complementarity).max(feasibility) <= tol;
    let status = if within {
        SolveStatus::Optimal
    } else if status == SolveStatus::Optimal {
        SolveStatus::MaxIterations
    } else {
        status
    };
    SolveReport {
        status,
        objective: prog.objective_value(&x),
        x,
        multipliers,
        kkt_stationarity_residual: stationarity,
        kkt_feasibility_residual: feasibility,
        kkt_complementarity_residual: complementarity,
        newton_steps: steps,
        certificate: None,
    }
}

fn report_without_barrier(
    prog: &ConvexProgram,
    x: Vec<f64>,
    status: SolveStatus,
    steps: usize,
    certificate: Option<Vec<f64>>,
) -> SolveReport {
    let n = prog.vars.len();
    SolveReport {
        status,
        objective: prog.objective_value(&x),
        kkt_feasibility_residual: prog.max_violation(&x),
        x,
        multipliers: Multipliers {
            constraints: vec![0.0; prog.constraints.len()],
            lower: vec![0.0; n],
            upper: vec![0.0; n],
        },
        kkt_stationarity_residual: f64::INFINITY,
        kkt_complementarity_residual: 0.0,
        newton_steps: steps,
        certificate,
    }
}
