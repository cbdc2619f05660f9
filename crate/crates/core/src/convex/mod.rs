//! Structured convex programs and a log-barrier interior-point solver.
//!
//! A program maximizes a concave objective, stored as a sum of convex atoms to
//! be minimized, subject to constraints of the form `sum of convex atoms <= 0`
//! and box bounds on the variables. The atom set covers affine expressions,
//! logarithms, squared norms, cubed norms, reciprocals and quadratic-over-linear
//! terms, which is enough for every subproblem of the planner.

mod kkt;
mod solver;

use std::fmt::Write as _;

pub use kkt::{check_kkt, KktResiduals, Multipliers};
pub use solver::{solve, SolveReport, SolveStatus};

/// Smallest admissible value of any log, reciprocal or quadratic-over-linear
/// denominator argument.
pub const MARGIN_MIN: f64 = 1e-12;

/// Index of a variable in its program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

/// `sum_i c_i x_i + constant`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Affine {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn var(v: VarId) -> Self {
        Self { terms: vec![(v.0, 1.0)], constant: 0.0 }
    }

    pub fn term(v: VarId, c: f64) -> Self {
        Self { terms: vec![(v.0, c)], constant: 0.0 }
    }

    pub fn plus_term(mut self, v: VarId, c: f64) -> Self {
        if c != 0.0 {
            self.terms.push((v.0, c));
        }
        self
    }

    pub fn plus_const(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn plus(mut self, other: &Affine) -> Self {
        self.terms.extend_from_slice(&other.terms);
        self.constant += other.constant;
        self
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for t in &mut self.terms {
            t.1 *= s;
        }
        self.constant *= s;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().fold(self.constant, |acc, &(i, c)| acc + c * x[i])
    }

    /// Smallest value over the box, or `-inf`.
    fn lower_bound(&self, vars: &[Variable]) -> f64 {
        self.terms.iter().fold(self.constant, |acc, &(i, c)| {
            let v = &vars[i];
            acc + if c >= 0.0 { c * v.lb } else { c * v.ub }
        })
    }
}

/// A convex scalar function of the variables.
#[derive(Debug, Clone, PartialEq)]
pub enum Atom {
    /// `a(x)`.
    Affine(Affine),
    /// `-w ln(a(x))`, `w >= 0`.
    NegLog { weight: f64, arg: Affine },
    /// `w sum_j a_j(x)^2`.
    SqNorm { weight: f64, args: Vec<Affine> },
    /// `w (sum_j a_j(x)^2)^(3/2)`.
    NormCubed { weight: f64, args: Vec<Affine> },
    /// `w / a(x)`.
    Recip { weight: f64, arg: Affine },
    /// `w sum_j a_j(x)^2 / d(x)`.
    QuadOverLin { weight: f64, num: Vec<Affine>, den: Affine },
}

impl Atom {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Atom::Affine(a) => a.eval(x),
            Atom::NegLog { weight, arg } => {
                let u = arg.eval(x);
                if u > 0.0 {
                    -weight * u.ln()
                } else {
                    f64::INFINITY
                }
            }
            Atom::SqNorm { weight, args } => weight * sum_sq(args, x),
            Atom::NormCubed { weight, args } => weight * sum_sq(args, x).powf(1.5),
            Atom::Recip { weight, arg } => {
                let u = arg.eval(x);
                if u > 0.0 {
                    weight / u
                } else {
                    f64::INFINITY
                }
            }
            Atom::QuadOverLin { weight, num, den } => {
                let d = den.eval(x);
                if d > 0.0 {
                    weight * sum_sq(num, x) / d
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Affine arguments that must stay positive.
    fn positive_args(&self) -> Option<&Affine> {
        match self {
            Atom::NegLog { arg, .. } | Atom::Recip { arg, .. } => Some(arg),
            Atom::QuadOverLin { den, .. } => Some(den),
            _ => None,
        }
    }

    fn for_each_affine(&self, mut f: impl FnMut(&Affine)) {
        match self {
            Atom::Affine(a) | Atom::NegLog { arg: a, .. } | Atom::Recip { arg: a, .. } => f(a),
            Atom::SqNorm { args, .. } | Atom::NormCubed { args, .. } => args.iter().for_each(f),
            Atom::QuadOverLin { num, den, .. } => {
                num.iter().for_each(&mut f);
                f(den);
            }
        }
    }
}

fn sum_sq(args: &[Affine], x: &[f64]) -> f64 {
    args.iter().map(|a| {
        let v = a.eval(x);
        v * v
    }).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lb: f64,
    pub ub: f64,
    pub hint: Option<f64>,
}

impl Variable {
    pub fn is_fixed(&self) -> bool {
        self.lb == self.ub
    }
}

/// `sum(atoms) <= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub atoms: Vec<Atom>,
}

impl Constraint {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.atoms.iter().map(|a| a.eval(x)).sum()
    }
}

/// Maximize `-sum(objective)` subject to the constraints and box bounds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvexProgram {
    pub vars: Vec<Variable>,
    /// Convex atoms whose sum is minimized; the maximized value is its
    /// negation.
    pub objective: Vec<Atom>,
    pub constraints: Vec<Constraint>,
}

impl ConvexProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lb: f64, ub: f64) -> VarId {
        assert!(lb <= ub, "empty variable box");
        self.vars.push(Variable { name: name.into(), lb, ub, hint: None });
        VarId(self.vars.len() - 1)
    }

    pub fn set_hint(&mut self, v: VarId, value: f64) {
        self.vars[v.0].hint = Some(value);
    }

    /// Adds `+a(x)` to the maximized objective.
    pub fn maximize_affine(&mut self, a: Affine) {
        self.objective.push(Atom::Affine(a.scaled(-1.0)));
    }

    /// Adds `+w ln(a(x))` to the maximized objective.
    pub fn maximize_log(&mut self, weight: f64, arg: Affine) {
        assert!(weight >= 0.0 && weight.is_finite());
        self.add_objective_atom(Atom::NegLog { weight, arg });
    }

    /// Subtracts a convex atom from the maximized objective.
    pub fn subtract_convex(&mut self, atom: Atom) {
        self.add_objective_atom(atom);
    }

    fn add_objective_atom(&mut self, atom: Atom) {
        self.ensure_positive(&atom);
        self.objective.push(atom);
    }

    /// General constraint `sum(atoms) <= 0`.
    pub fn add_constraint(&mut self, name: impl Into<String>, atoms: Vec<Atom>) {
        for a in &atoms {
            self.ensure_positive(a);
        }
        self.constraints.push(Constraint { name: name.into(), atoms });
    }

    /// `a(x) <= 0`.
    pub fn affine_le_zero(&mut self, name: impl Into<String>, a: Affine) {
        self.add_constraint(name, vec![Atom::Affine(a)]);
    }

    /// `sum_j a_j(x)^2 <= r(x)`.
    pub fn sq_norm_le(&mut self, name: impl Into<String>, args: Vec<Affine>, rhs: Affine) {
        self.add_constraint(
            name,
            vec![Atom::SqNorm { weight: 1.0, args }, Atom::Affine(rhs.scaled(-1.0))],
        );
    }

    /// `||(a_j(x))_j|| <= r(x)`, written as `sum_j a_j^2 / r - r <= 0`.
    pub fn norm_le(&mut self, name: impl Into<String>, args: Vec<Affine>, rhs: Affine) {
        self.add_constraint(
            name,
            vec![
                Atom::QuadOverLin { weight: 1.0, num: args, den: rhs.clone() },
                Atom::Affine(rhs.scaled(-1.0)),
            ],
        );
    }

    /// `sum_i w_i ln(a_i(x)) >= r(x)`.
    pub fn log_ge(&mut self, name: impl Into<String>, logs: Vec<(f64, Affine)>, rhs: Affine) {
        let mut atoms = vec![Atom::Affine(rhs)];
        for (w, a) in logs {
            assert!(w >= 0.0 && w.is_finite());
            atoms.push(Atom::NegLog { weight: w, arg: a });
        }
        self.add_constraint(name, atoms);
    }

    /// Adds `margin - a(x) <= 0` for every positive-domain argument of `atom`
    /// unless the box already implies it.
    fn ensure_positive(&mut self, atom: &Atom) {
        if let Some(arg) = atom.positive_args() {
            if arg.lower_bound(&self.vars) < MARGIN_MIN {
                let idx = self.constraints.len();
                self.constraints.push(Constraint {
                    name: format!("positivity[{idx}]"),
                    atoms: vec![Atom::Affine(arg.clone().scaled(-1.0).plus_const(MARGIN_MIN))],
                });
            }
        }
    }

    /// Maximized objective value at `x`.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        -self.objective.iter().map(|a| a.eval(x)).sum::<f64>()
    }

    /// Largest constraint or bound violation at `x` (0 if feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let c = self.constraints.iter().map(|c| c.eval(x)).fold(0.0, f64::max);
        let b = self
            .vars
            .iter()
            .zip(x)
            .map(|(v, &xi)| (v.lb - xi).max(xi - v.ub))
            .fold(0.0, f64::max);
        c.max(b)
    }

    /// Variables referenced by the program, checked for index validity.
    pub fn validate(&self) -> Result<(), String> {
        let n = self.vars.len();
        let mut bad = None;
        let mut check = |a: &Affine| {
            for &(i, c) in &a.terms {
                if i >= n || !c.is_finite() {
                    bad = Some(format!("bad term ({i}, {c})"));
                }
            }
            if !a.constant.is_finite() {
                bad = Some("non-finite constant".into());
            }
        };
        for atom in self.objective.iter().chain(self.constraints.iter().flat_map(|c| &c.atoms)) {
            atom.for_each_affine(&mut check);
        }
        for v in &self.vars {
            if v.lb.is_nan() || v.ub.is_nan() || v.lb > v.ub {
                return Err(format!("variable {} has an invalid box", v.name));
            }
        }
        bad.map_or(Ok(()), Err)
    }

    /// Human-readable listing of variables, objective atoms and constraints.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let name = |i: usize| self.vars[i].name.as_str();
        let aff = |a: &Affine| {
            let mut s = String::new();
            for &(i, c) in &a.terms {
                let _ = write!(s, "{c:+e}*{} ", name(i));
            }
            let _ = write!(s, "{:+e}", a.constant);
            s
        };
        let affs = |v: &[Affine]| v.iter().map(aff).collect::<Vec<_>>().join(", ");
        let atom = |a: &Atom| match a {
            Atom::Affine(x) => format!("affine({})", aff(x)),
            Atom::NegLog { weight, arg } => format!("neglog[{weight:e}]({})", aff(arg)),
            Atom::SqNorm { weight, args } => format!("sqnorm[{weight:e}]({})", affs(args)),
            Atom::NormCubed { weight, args } => format!("normcubed[{weight:e}]({})", affs(args)),
            Atom::Recip { weight, arg } => format!("recip[{weight:e}]({})", aff(arg)),
            Atom::QuadOverLin { weight, num, den } => {
                format!("quadoverlin[{weight:e}]({} ; {})", affs(num), aff(den))
            }
        };
        let _ = writeln!(out, "variables {}", self.vars.len());
        for v in &self.vars {
            let hint = v.hint.map_or("-".to_string(), |h| format!("{h:e}"));
            let _ = writeln!(out, "  {} in [{:e}, {:e}] hint {hint}", v.name, v.lb, v.ub);
        }
        let _ = writeln!(out, "minimize");
        for a in &self.objective {
            let _ = writeln!(out, "  {}", atom(a));
        }
        let _ = writeln!(out, "subject to {}", self.constraints.len());
        for c in &self.constraints {
            let parts: Vec<String> = c.atoms.iter().map(atom).collect();
            let _ = writeln!(out, "  {}: {} <= 0", c.name, parts.join(" + "));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positivity_margin_added_only_when_needed() {
        let mut p = ConvexProgram::new();
        let x = p.add_var("x", 1.0, 2.0);
        let y = p.add_var("y", 0.0, 2.0);
        p.maximize_log(1.0, Affine::var(x));
        assert!(p.constraints.is_empty());
        p.maximize_log(1.0, Affine::var(y));
        assert_eq!(p.constraints.len(), 1);
        assert_eq!(p.constraints[0].eval(&[1.0, 0.5]), MARGIN_MIN - 0.5);
    }

    #[test]
    fn dump_lists_everything() {
        let mut p = ConvexProgram::new();
        let x = p.add_var("x", 0.0, 1.0);
        p.maximize_affine(Affine::var(x));
        p.affine_le_zero("cap", Affine::var(x).plus_const(-1.0));
        let d = p.dump();
        assert!(d.contains("x in [0e0, 1e0]"));
        assert!(d.contains("cap:"));
        assert!(d.contains("minimize"));
    }
}
