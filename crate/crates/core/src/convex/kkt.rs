//! KKT residuals computed independently of the solver.
//!
//! Partial derivatives come from complex-step differentiation of each atom,
//! which is exact to rounding and shares no code with the solver's
//! hand-written gradients.

use nalgebra::Complex;

use super::{Affine, Atom, ConvexProgram};

type C = Complex<f64>;

const STEP: f64 = 1e-30;

/// Dual values: one per constraint, and one per lower/upper variable bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers {
    pub constraints: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Multipliers {
    pub fn zeros(prog: &ConvexProgram) -> Self {
        let n = prog.num_vars();
        Self { constraints: vec![0.0; prog.constraints.len()], lower: vec![0.0; n], upper: vec![0.0; n] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub feasibility: f64,
    pub complementarity: f64,
}

/// Affine value with `x_j` perturbed by `i * STEP`.
fn affine_c(a: &Affine, x: &[f64], j: usize) -> C {
    let mut re = a.constant;
    let mut im = 0.0;
    for &(i, c) in &a.terms {
        re += c * x[i];
        if i == j {
            im += c * STEP;
        }
    }
    C::new(re, im)
}

fn atom_c(atom: &Atom, x: &[f64], j: usize) -> C {
    let sq = |args: &[Affine]| -> C {
        args.iter().map(|a| {
            let v = affine_c(a, x, j);
            v * v
        }).sum()
    };
    match atom {
        Atom::Affine(a) => affine_c(a, x, j),
        Atom::NegLog { weight, arg } => -affine_c(arg, x, j).ln() * *weight,
        Atom::SqNorm { weight, args } => sq(args) * *weight,
        Atom::NormCubed { weight, args } => {
            let s = sq(args);
            if s.re == 0.0 {
                C::new(0.0, 0.0)
            } else {
                s * s.sqrt() * *weight
            }
        }
        Atom::Recip { weight, arg } => C::new(*weight, 0.0) / affine_c(arg, x, j),
        Atom::QuadOverLin { weight, num, den } => sq(num) / affine_c(den, x, j) * *weight,
    }
}

fn atom_support(atom: &Atom, out: &mut Vec<usize>) {
    let mut push = |a: &Affine| out.extend(a.terms.iter().map(|t| t.0));
    match atom {
        Atom::Affine(a) | Atom::NegLog { arg: a, .. } | Atom::Recip { arg: a, .. } => push(a),
        Atom::SqNorm { args, .. } | Atom::NormCubed { args, .. } => args.iter().for_each(push),
        Atom::QuadOverLin { num, den, .. } => {
            num.iter().for_each(&mut push);
            push(den);
        }
    }
}

/// Adds `scale * d(sum atoms)/dx` into `grad`.
fn add_gradient(atoms: &[Atom], x: &[f64], scale: f64, grad: &mut [f64]) {
    let mut support = Vec::new();
    for atom in atoms {
        support.clear();
        atom_support(atom, &mut support);
        support.sort_unstable();
        support.dedup();
        for &j in &support {
            grad[j] += scale * atom_c(atom, x, j).im / STEP;
        }
    }
}

/// Residuals of the KKT system of `minimize f0 s.t. g_i <= 0, lb <= x <= ub`
/// at `point` with the given multipliers. Fixed variables (`lb == ub`) are
/// excluded from stationarity.
pub fn check_kkt(prog: &ConvexProgram, point: &[f64], multipliers: &Multipliers) -> KktResiduals {
    let n = prog.num_vars();
    let mut grad = vec![0.0; n];
    add_gradient(&prog.objective, point, 1.0, &mut grad);
    for (c, &lam) in prog.constraints.iter().zip(&multipliers.constraints) {
        if lam != 0.0 {
            add_gradient(&c.atoms, point, lam, &mut grad);
        }
    }
    let mut stationarity = 0.0f64;
    let mut feasibility = 0.0f64;
    let mut complementarity = 0.0f64;
    for (j, v) in prog.vars.iter().enumerate() {
        let xj = point[j];
        feasibility = feasibility.max(v.lb - xj).max(xj - v.ub);
        if v.is_fixed() {
            continue;
        }
        let r = grad[j] - multipliers.lower[j] + multipliers.upper[j];
        stationarity = stationarity.max(r.abs());
        if v.lb.is_finite() {
            complementarity = complementarity.max((multipliers.lower[j] * (xj - v.lb)).abs());
        }
        if v.ub.is_finite() {
            complementarity = complementarity.max((multipliers.upper[j] * (v.ub - xj)).abs());
        }
    }
    for (c, &lam) in prog.constraints.iter().zip(&multipliers.constraints) {
        let g = c.eval(point);
        feasibility = feasibility.max(g);
        complementarity = complementarity.max((lam * g).abs());
    }
    KktResiduals { stationarity, feasibility: feasibility.max(0.0), complementarity }
}
