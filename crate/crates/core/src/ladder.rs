//! Elementary discrete Schlesinger transformations of the P6 system and the
//! ladders of iterated transformations used by the two degeneration limits.

use serde::{Deserialize, Serialize};

use crate::algebra::{eigvec, Mat2C, C, ONE, ZERO};
use crate::error::{Error, Result};
use crate::painleve6::{schlesinger_flow, P6State, Thetas6, NU0, NU1, NUT};

/// Threshold for the projector denominators and existence conditions,
/// relative to the size of the quantities involved.
pub const DELTA_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Zero,
    One,
    T,
    Inf,
}

impl Label {
    /// Index into the finite arrays of `P6State`.
    pub fn finite_index(self) -> Option<usize> {
        match self {
            Label::Zero => Some(NU0),
            Label::One => Some(NU1),
            Label::T => Some(NUT),
            Label::Inf => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Zero => "0",
            Label::One => "1",
            Label::T => "t",
            Label::Inf => "inf",
        }
    }

    fn from_index(i: usize) -> Label {
        [Label::Zero, Label::One, Label::T][i]
    }
}

/// `L^{s s'}_{νν'}`: shifts `Θν` by `s` and `Θν'` by `s'`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementaryStep {
    pub nu: Label,
    pub nu_prime: Label,
    pub signs: (i8, i8),
}

impl ElementaryStep {
    pub fn new(nu: Label, nu_prime: Label, signs: (i8, i8)) -> Result<Self> {
        if nu == nu_prime {
            return Err(Error::InvalidInput("ν and ν′ must differ".into()));
        }
        if nu == Label::Inf {
            return Err(Error::InvalidInput("infinity goes in the second slot".into()));
        }
        if signs.0.abs() != 1 || signs.1.abs() != 1 {
            return Err(Error::InvalidInput(format!("signs {signs:?}")));
        }
        Ok(ElementaryStep {
            nu,
            nu_prime,
            signs,
        })
    }

    /// The step undoing this one.
    pub fn inverse(&self) -> Self {
        ElementaryStep {
            signs: (-self.signs.0, -self.signs.1),
            ..*self
        }
    }

    /// Integer shifts of `(Θ0, Θ1, Θt, Θ∞)`.
    pub fn theta_shift(&self) -> [i64; 4] {
        let mut d = [0i64; 4];
        let slot = |l: Label| l.finite_index().unwrap_or(3);
        d[slot(self.nu)] += self.signs.0 as i64;
        d[slot(self.nu_prime)] += self.signs.1 as i64;
        d
    }
}

/// `Θ` values kept as base values plus exact integer offsets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaBook {
    pub base: Thetas6,
    pub shift: [i64; 4],
}

impl ThetaBook {
    pub fn new(base: Thetas6) -> Self {
        ThetaBook {
            base,
            shift: [0; 4],
        }
    }

    pub fn apply(&self, step: &ElementaryStep) -> Self {
        let d = step.theta_shift();
        let mut shift = self.shift;
        for i in 0..4 {
            shift[i] += d[i];
        }
        ThetaBook {
            base: self.base,
            shift,
        }
    }

    pub fn current(&self) -> Thetas6 {
        let b = self.base;
        let s = |i: usize| self.shift[i] as f64;
        Thetas6::new(b.th0 + s(0), b.th1 + s(1), b.tht + s(2), b.thinf + s(3))
    }
}

/// Eigenvector of `A_ν` for the eigenvalue `sign·Θν/2`.
fn eigen_column(state: &P6State, i: usize, sign: i8) -> [C; 2] {
    let th = state.thetas.finite(i);
    eigvec(&state.residue(i), th * (sign as f64) / 2.0)
}

/// Projector pair `(J_{νν′}, J_{ν′ν})` and `Δ` for a finite step.
///
/// `J_{νν′}` annihilates the eigenvector of `A_ν` for `s·Θν/2`, and
/// `J_{ν′ν}` the one of `A_ν′` for `s′·Θν′/2`; they sum to `I`.
pub fn j_projectors(state: &P6State, step: &ElementaryStep) -> Result<(Mat2C, Mat2C, C)> {
    let (i, k) = match (step.nu.finite_index(), step.nu_prime.finite_index()) {
        (Some(i), Some(k)) => (i, k),
        _ => return Err(Error::InvalidInput("finite step expected".into())),
    };
    let e = eigen_column(state, i, step.signs.0);
    let f = eigen_column(state, k, step.signs.1);
    // with e = (b_ν, −a_ν), f = (b_ν′, −a_ν′): Δ_{ν′ν} = a_ν′b_ν − a_νb_ν′
    let (a_nu, b_nu) = (-e[1], e[0]);
    let (a_np, b_np) = (-f[1], f[0]);
    let delta = a_np * b_nu - a_nu * b_np;
    if delta.norm() <= DELTA_TOL {
        return Err(Error::DeltaZero(format!(
            "Δ = {delta:e} for {}{}",
            step.nu.name(),
            step.nu_prime.name()
        )));
    }
    // J_{ν′ν} = e (a_ν′, b_ν′) / Δ: image e, kernel f
    let j_pn = Mat2C::new(b_nu * a_np, b_nu * b_np, -a_nu * a_np, -a_nu * b_np) / delta;
    let j_np = Mat2C::identity() - j_pn;
    Ok((j_np, j_pn, delta))
}

/// Off-diagonal entries `(Ψ12, Ψ21)` of the first coefficient of the
/// normalized expansion at infinity, from
/// `−Ψ1 + (Θ∞/2)[σ3, Ψ1] = A1 + t A_t`.
pub fn psi1_infinity_offdiag(state: &P6State) -> Result<(C, C)> {
    let th = state.thetas.thinf;
    let b = state.residue(NU1) + state.residue(NUT) * state.t6;
    let d12 = th - 1.0;
    let d21 = th + 1.0;
    if d12.norm() < 1e-12 || d21.norm() < 1e-12 {
        return Err(Error::NonGenericParameters(format!("Θ∞ = {th} is ±1")));
    }
    Ok((b.a12 / d12, -b.a21 / d21))
}

fn sigma_inf(sign: i8) -> Mat2C {
    if sign > 0 {
        Mat2C::diag(ZERO, ONE)
    } else {
        Mat2C::diag(ONE, ZERO)
    }
}

/// `J_{ν∞}` of the step `L^{s s∞}_{ν∞}`.
///
/// Its kernel is the eigenvector of `A_ν` for `s·Θν/2`, and it is fixed by
/// the normalization at infinity; it is a rank-one matrix but not a
/// projector in general.
pub fn j_infinity(state: &P6State, step: &ElementaryStep) -> Result<Mat2C> {
    let i = match (step.nu.finite_index(), step.nu_prime) {
        (Some(i), Label::Inf) => i,
        _ => return Err(Error::InvalidInput("step to infinity expected".into())),
    };
    let e = eigen_column(state, i, step.signs.0);
    let (a, b) = (-e[1], e[0]);
    let (p12, p21) = psi1_infinity_offdiag(state)?;
    if step.signs.1 > 0 {
        if a.norm() <= DELTA_TOL {
            return Err(Error::ExistenceViolation(format!("a = {a:e}")));
        }
        Ok(Mat2C::new(ONE, b / a, -p21, -p21 * b / a))
    } else {
        if b.norm() <= DELTA_TOL {
            return Err(Error::ExistenceViolation(format!("b = {b:e}")));
        }
        Ok(Mat2C::new(-p12 * a / b, -p12, a / b, ONE))
    }
}

/// Residues after the step, in the order `(0, 1, t)`.
pub fn step_residues(state: &P6State, step: &ElementaryStep) -> Result<[Mat2C; 3]> {
    let a = state.residues();
    let pos = |i: usize| state.position(i);
    let new_thetas = ThetaBook::new(state.thetas).apply(step).current();
    let mut out = [Mat2C::zero(); 3];
    match step.nu_prime.finite_index() {
        Some(k) => {
            let i = step.nu.finite_index().expect("finite ν");
            let m = 3 - i - k;
            let (j_ik, j_ki, _) = j_projectors(state, step)?;
            // L(λ) ∝ (λ − ν′)J_{νν′} + (λ − ν)J_{ν′ν}
            let g = j_ki + j_ik * ((pos(m) - pos(k)) / (pos(m) - pos(i)));
            out[m] = g * a[m] * g.inv()?;
            out[k] = prime_residue(&a, i, k, m, &j_ik, &j_ki, pos, state.thetas.thinf);
            out[i] = prime_residue(&a, k, i, m, &j_ki, &j_ik, pos, state.thetas.thinf);
        }
        None => {
            let i = step.nu.finite_index().expect("finite ν");
            let j = j_infinity(state, step)?;
            let s = sigma_inf(step.signs.1);
            let mut sum = Mat2C::zero();
            for m in (0..3).filter(|&m| m != i) {
                let g = s + j / (pos(m) - pos(i));
                out[m] = g * a[m] * g.inv()?;
                sum += out[m];
            }
            out[i] = Mat2C::sigma3() * (-new_thetas.thinf / 2.0) - sum;
        }
    }
    Ok(out)
}

/// `Ã_ν′` of a finite step (`ν`, `ν′`, `μ` a permutation of the three poles):
/// `−(Θ∞/2)σ3 J + J′(A_ν′ − 1/2) − J(A_ν − 1/2) − (c J′ + J) A_μ J`,
/// with `J = J_{νν′}`, `J′ = J_{ν′ν}`, `c = (μ − ν)/(μ − ν′)`; the last term
/// is `Ã_μ J` for the conjugation of `A_μ` induced by `L`. The shift `1/2`
/// does not depend on the signs: `L` always carries `(λ − ν)^{−1/2}` on `J`.
#[allow(clippy::too_many_arguments)]
fn prime_residue(
    a: &[Mat2C; 3],
    i: usize,
    k: usize,
    m: usize,
    j: &Mat2C,
    jp: &Mat2C,
    pos: impl Fn(usize) -> C,
    thinf: C,
) -> Mat2C {
    let half = Mat2C::identity() * 0.5;
    let cc = (pos(m) - pos(i)) / (pos(m) - pos(k));
    Mat2C::sigma3() * (-thinf / 2.0) * *j + *jp * (a[k] - half)
        - *j * (a[i] - half)
        - (*jp * cc + *j) * a[m] * *j
}

/// The step applied at the state's own time.
pub fn apply_step(state: &P6State, step: &ElementaryStep) -> Result<P6State> {
    let res = step_residues(state, step)?;
    let thetas = ThetaBook::new(state.thetas).apply(step).current();
    P6State::from_residues(state.t6, res, thetas, state.s)
}

/// Evaluates `L A L⁻¹ + L′L⁻¹` at `λ` for the step, as a check on the
/// residue formulas. Independent of the square-root branches.
pub fn dressed_coefficient(state: &P6State, step: &ElementaryStep, lam: C) -> Result<Mat2C> {
    let a = state.residues();
    let mut coeff = Mat2C::zero();
    for i in 0..3 {
        coeff += a[i] / (lam - state.position(i));
    }
    let i = step.nu.finite_index().expect("finite ν");
    let nu = state.position(i);
    match step.nu_prime.finite_index() {
        Some(k) => {
            let nup = state.position(k);
            let (j, jp, _) = j_projectors(state, step)?;
            // L = rJ + J′/r, r² = (λ − ν′)/(λ − ν)
            let r = ((lam - nup) / (lam - nu)).sqrt();
            let dr = r / 2.0 * (ONE / (lam - nup) - ONE / (lam - nu));
            let l = j * r + jp / r;
            let dl = j * dr - jp * (dr / (r * r));
            let linv = j / r + jp * r;
            Ok(l * coeff * linv + dl * linv)
        }
        None => {
            let j = j_infinity(state, step)?;
            let s = sigma_inf(step.signs.1);
            let q = (lam - nu).sqrt();
            let l = s * q + j / q;
            let dl = s / (q * 2.0) - j / (q * q * q * 2.0);
            let linv = l.inv()?;
            Ok(l * coeff * linv + dl * linv)
        }
    }
}

/// Which of the two degeneration ladders is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LadderPattern {
    /// Repeated `L^{−+}_{1∞}`: `Θ1` decreases and `Θ∞` increases by one per level.
    FirstLimit,
    /// Repeated `L^{+−}_{0t}`: `Θ0` increases and `Θt` decreases by one per level.
    SecondLimit,
}

impl LadderPattern {
    pub fn step(self) -> ElementaryStep {
        match self {
            LadderPattern::FirstLimit => ElementaryStep {
                nu: Label::One,
                nu_prime: Label::Inf,
                signs: (-1, 1),
            },
            LadderPattern::SecondLimit => ElementaryStep {
                nu: Label::Zero,
                nu_prime: Label::T,
                signs: (1, -1),
            },
        }
    }

    /// The base `Θ` that tends to `−∞` along the ladder.
    pub fn moving_theta(self, th: &Thetas6) -> C {
        match self {
            LadderPattern::FirstLimit => th.th1,
            LadderPattern::SecondLimit => th.tht,
        }
    }

    /// `ε_n = −1/(Θ6 − 2n)`.
    pub fn epsilon(self, base: &Thetas6, n: usize) -> C {
        -ONE / (self.moving_theta(base) - 2.0 * n as f64)
    }
}

/// One rung: the transformed state at its evaluation time `ε_n t5`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Rung {
    pub level: usize,
    pub n: usize,
    pub epsilon: C,
    pub book: ThetaBook,
    pub state: P6State,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GsdLadder {
    pub pattern: LadderPattern,
    pub base: P6State,
    pub t5: C,
    pub steps: Vec<ElementaryStep>,
    /// Levels `0..=2 n_max`; level `k ≥ 2` is evaluated at `ε_{⌊k/2⌋} t5`,
    /// levels 0 and 1 at the base time.
    pub rungs: Vec<Rung>,
    pub epsilons: Vec<C>,
}

impl GsdLadder {
    pub fn rung(&self, level: usize) -> Option<&Rung> {
        self.rungs.get(level)
    }

    /// Even rung `2n`.
    pub fn even(&self, n: usize) -> Option<&Rung> {
        self.rungs.get(2 * n)
    }
}

/// Builds the ladder: for each `n ≥ 1`, the base solution is flowed to
/// `ε_n t5`, then `2n` and `2n + 1` elementary steps are applied.
pub fn build_ladder(
    base: &P6State,
    pattern: LadderPattern,
    n_max: usize,
    t5: C,
    tol: f64,
) -> Result<GsdLadder> {
    let step = pattern.step();
    let levels = 2 * n_max;
    let mut rungs = Vec::with_capacity(levels + 1);
    let mut epsilons = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let eps = pattern.epsilon(&base.thetas, n);
        epsilons.push(eps);
        // ε_0 = −1/Θ6 is not small and may be negative; level 0 and 1 stay
        // at the base time
        let mut state = if n == 0 {
            *base
        } else {
            schlesinger_flow(base, eps * t5, tol)?
        };
        let mut book = ThetaBook::new(base.thetas);
        let top = (2 * n + 1).min(levels);
        for level in 0..=top {
            if level >= 2 * n {
                rungs.push(Rung {
                    level,
                    n,
                    epsilon: eps,
                    book,
                    state,
                });
            }
            if level < top {
                state = apply_step(&state, &step).map_err(|e| blocked(level, e))?;
                book = book.apply(&step);
                state.thetas = book.current();
            }
        }
    }
    Ok(GsdLadder {
        pattern,
        base: *base,
        t5,
        steps: vec![step; levels],
        rungs,
        epsilons,
    })
}

fn blocked(level: usize, e: Error) -> Error {
    match e {
        Error::DeltaZero(m) | Error::ExistenceViolation(m) => Error::LadderBlocked(level, m),
        other => other,
    }
}

/// Applies `steps` in order at the state's own time.
pub fn apply_steps(state: &P6State, steps: &[ElementaryStep]) -> Result<P6State> {
    let mut book = ThetaBook::new(state.thetas);
    let mut cur = *state;
    for (level, s) in steps.iter().enumerate() {
        cur = apply_step(&cur, s).map_err(|e| blocked(level, e))?;
        book = book.apply(s);
        cur.thetas = book.current();
    }
    Ok(cur)
}

/// Expected sign of `M̃κ/Mκ` after a step, for `κ` in `(0, 1, t, ∞)` order.
pub fn monodromy_signs(step: &ElementaryStep) -> [f64; 4] {
    let mut s = [1.0; 4];
    for l in [step.nu, step.nu_prime] {
        s[l.finite_index().unwrap_or(3)] = -1.0;
    }
    s
}

/// Label of the third finite pole for a finite step.
pub fn third_pole(step: &ElementaryStep) -> Option<Label> {
    let i = step.nu.finite_index()?;
    let k = step.nu_prime.finite_index()?;
    Some(Label::from_index(3 - i - k))
}
