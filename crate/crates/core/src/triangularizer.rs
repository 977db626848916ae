//! Simultaneous triangularization of a pair of SL(2,C) matrices:
//! `K M0 K⁻¹` upper and `K M1 K⁻¹` lower triangular with prescribed
//! diagonals `(r0, 1/r0)` and `(r1, 1/r1)`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::algebra::{eig2, eigvec, Mat2C, C, ONE, ZERO};
use crate::error::{Error, Result};

/// Relative tolerance of the zero tests in the classification.
pub const CLASSIFY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairProblem {
    pub m0: Mat2C,
    pub m1: Mat2C,
    pub r0: C,
    pub r1: C,
}

/// Labels the eigenvalue `r` of a unimodular matrix: `|r| > 1`, ties broken
/// by larger real part, then larger imaginary part.
pub fn label_eigenvalue(m: &Mat2C) -> Result<C> {
    let pair = eig2(m)?;
    let (a, b) = pair.values;
    let key = |z: C| (z.norm(), z.re, z.im);
    let (ka, kb) = (key(a), key(b));
    let pick = if (ka.0 - kb.0).abs() > 1e-12 {
        ka.0 > kb.0
    } else if (ka.1 - kb.1).abs() > 1e-12 {
        ka.1 > kb.1
    } else {
        ka.2 >= kb.2
    };
    Ok(if pick { a } else { b })
}

impl PairProblem {
    pub fn new(m0: Mat2C, m1: Mat2C, r0: C, r1: C) -> Result<Self> {
        let p = PairProblem { m0, m1, r0, r1 };
        p.check()?;
        Ok(p)
    }

    /// Problem with eigenvalues chosen by [`label_eigenvalue`].
    pub fn from_matrices(m0: Mat2C, m1: Mat2C) -> Result<Self> {
        Self::new(m0, m1, label_eigenvalue(&m0)?, label_eigenvalue(&m1)?)
    }

    fn check(&self) -> Result<()> {
        for (name, m, r) in [("M0", self.m0, self.r0), ("M1", self.m1, self.r1)] {
            if !m.is_unimodular(1e-10) {
                return Err(Error::InvalidInput(format!("{name} is not unimodular")));
            }
            if r.norm() <= 1e-8 || (r - 1.0).norm() <= 1e-8 || (r + 1.0).norm() <= 1e-8 {
                return Err(Error::InvalidInput(format!("eigenvalue {r} of {name} is 0 or ±1")));
            }
            let res = (r + ONE / r - m.trace()).norm();
            if res > 1e-8 * m.norm().max(1.0) {
                return Err(Error::InvalidInput(format!("{r} is not an eigenvalue of {name}")));
            }
        }
        Ok(())
    }

    /// The same problem with `r0 → 1/r0` and/or `r1 → 1/r1`.
    pub fn swapped(&self, swap0: bool, swap1: bool) -> Self {
        PairProblem {
            r0: if swap0 { ONE / self.r0 } else { self.r0 },
            r1: if swap1 { ONE / self.r1 } else { self.r1 },
            ..*self
        }
    }

    fn delta0(&self) -> C {
        self.r0 - ONE / self.r0
    }

    fn delta1(&self) -> C {
        self.r1 - ONE / self.r1
    }

    fn scale(&self) -> f64 {
        (1.0 + self.m0.norm()) * (1.0 + self.m1.norm())
    }

    /// `(M0 − x)(M1 − y)`.
    fn product(&self, x: C, y: C) -> Mat2C {
        (self.m0 - x) * (self.m1 - y)
    }

    /// Eigenvector pair `(e_{ν,1}, e_{ν,−1})` of `M_ν` with unit determinant.
    pub fn eigenbasis(&self, nu: usize) -> Result<Mat2C> {
        let (m, r) = if nu == 0 {
            (self.m0, self.r0)
        } else {
            (self.m1, self.r1)
        };
        let e1 = eigvec(&m, r);
        let e2 = eigvec(&m, ONE / r);
        let d = e1[0] * e2[1] - e1[1] * e2[0];
        if d.norm() < 1e-14 {
            return Err(Error::DegenerateSpectrum(d.norm()));
        }
        Ok(Mat2C::from_cols(e1, [e2[0] / d, e2[1] / d]))
    }

    /// `(p, q, r, s)` with `(e11, e1−1) = (e01, e0−1)[[p, r], [q, s]]`.
    pub fn basis_change(&self) -> Result<[C; 4]> {
        let e0 = self.eigenbasis(0)?;
        let e1 = self.eigenbasis(1)?;
        let t = e0.inv()? * e1;
        Ok([t.a11, t.a21, t.a12, t.a22])
    }
}

/// Case of the problem, in the order of the classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaseTag {
    Commuting,
    F1Zero,
    F0Zero,
    PZero,
    Generic,
    Unsolvable,
}

/// The discriminants used by [`classify`], normalized by the problem scale.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Discriminants {
    /// `tr (M0 − 1/r0)(M1 − r1)`.
    pub trace_item1: f64,
    /// `tr (M0 − 1/r0)(M1 − 1/r1)`.
    pub trace_item3: f64,
    pub commutator: f64,
    /// `(M0 − r0)(M1 − 1/r1)`.
    pub a9: f64,
    /// `(M0 − 1/r0)(M1 − r1)`.
    pub a13: f64,
    /// `(M0 − r0)(M1 − r1)`.
    pub a3: f64,
    /// `(M1 − 1/r1)(M0 − 1/r0)`.
    pub a4: f64,
    /// `(M0 − 1/r0)(M1 − 1/r1)`.
    pub b3: f64,
}

pub fn discriminants(p: &PairProblem) -> Discriminants {
    let s = p.scale();
    let (i0, i1) = (ONE / p.r0, ONE / p.r1);
    Discriminants {
        trace_item1: p.product(i0, p.r1).trace().norm() / s,
        trace_item3: p.product(i0, i1).trace().norm() / s,
        commutator: p.m0.commutator(&p.m1).norm() / s,
        a9: p.product(p.r0, i1).norm() / s,
        a13: p.product(i0, p.r1).norm() / s,
        a3: p.product(p.r0, p.r1).norm() / s,
        a4: ((p.m1 - i1) * (p.m0 - i0)).norm() / s,
        b3: p.product(i0, i1).norm() / s,
    }
}

/// Zero test with an ambiguity band `(tol, 10·tol]`.
fn is_zero(x: f64, what: &str) -> Result<bool> {
    if x <= CLASSIFY_TOL {
        Ok(true)
    } else if x <= 10.0 * CLASSIFY_TOL {
        Err(Error::AmbiguousClassification(format!("{what} = {x:e}")))
    } else {
        Ok(false)
    }
}

/// Case of the problem.
pub fn classify(p: &PairProblem) -> Result<CaseTag> {
    let d = discriminants(p);
    if is_zero(d.trace_item1, "tr(M0−1/r0)(M1−r1)")? {
        if is_zero(d.commutator, "[M0, M1]")? {
            return Ok(CaseTag::Commuting);
        }
        if is_zero(d.a9, "(M0−r0)(M1−1/r1)")? {
            return Ok(CaseTag::F1Zero);
        }
        if is_zero(d.a13, "(M0−1/r0)(M1−r1)")? {
            return Ok(CaseTag::F0Zero);
        }
        return Err(Error::AmbiguousClassification(
            "vanishing trace without a vanishing product".into(),
        ));
    }
    if is_zero(d.trace_item3, "tr(M0−1/r0)(M1−1/r1)")? {
        if is_zero(d.a3, "(M0−r0)(M1−r1)")? {
            return Ok(CaseTag::Unsolvable);
        }
        if is_zero(d.b3, "(M0−1/r0)(M1−1/r1)")? {
            return Ok(CaseTag::PZero);
        }
        return Err(Error::AmbiguousClassification(
            "vanishing trace without a vanishing product".into(),
        ));
    }
    Ok(CaseTag::Generic)
}

/// The four expressions for `f0 f1` in the generic case.
pub fn f_product_forms(p: &PairProblem) -> [C; 4] {
    let (r0, r1) = (p.r0, p.r1);
    let (i0, i1) = (ONE / r0, ONE / r1);
    [
        ((p.m1 - r1) * (p.m0 - i0)).trace(),
        ((p.m1 - i1) * (p.m0 - r0)).trace(),
        ((p.m0 - i0) * (p.m1 - i1)).trace() - p.delta0() * p.delta1(),
        (r0 + r1) * (i0 + i1) - (p.m0 + p.m1).det(),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSolution {
    pub case_tag: CaseTag,
    /// `K` and `−K` solve the problem equally well.
    pub k: Option<Mat2C>,
    pub f0: C,
    pub f1: C,
    pub f_product: C,
}

/// Square root with the sign selected by `branch`.
fn root(z: C, branch: bool) -> C {
    let s = z.sqrt();
    if branch {
        s
    } else {
        -s
    }
}

/// Solves the problem. `f_choice` fixes the free corner: `f0` in the
/// `f1 = 0` case, `f1` in the `f0 = 0`, `p = 0` and generic cases
/// (default 1). `branch` picks the square-root sign.
pub fn solve(p: &PairProblem, f_choice: Option<C>, branch: bool) -> Result<PairSolution> {
    let tag = classify(p)?;
    let f = f_choice.unwrap_or(ONE);
    if f.norm() == 0.0 && tag != CaseTag::Commuting {
        return Err(Error::InvalidInput("the free corner must be nonzero".into()));
    }
    let e0 = p.eigenbasis(0)?;
    match tag {
        CaseTag::Unsolvable => Err(Error::UnsolvablePair(
            "M0 and M1 share the eigenvector for (r0, 1/r1)".into(),
        )),
        CaseTag::Commuting => {
            let k = e0.inv()?;
            let d = k * p.m1 * e0;
            if (d.a11 - p.r1).norm() > 1e-6 * p.scale() {
                return Err(Error::UnsolvablePair("commuting pair with swapped spectra".into()));
            }
            Ok(PairSolution {
                case_tag: tag,
                k: Some(k),
                f0: ZERO,
                f1: ZERO,
                f_product: ZERO,
            })
        }
        CaseTag::F1Zero => {
            // K⁻¹ = (e11, e1−1)ϰ^{σ3} with e11 = e01, det(e01, e1−1) = 1
            let e01 = e0.col(0);
            let v = eigvec(&p.m1, ONE / p.r1);
            let d = e01[0] * v[1] - e01[1] * v[0];
            let e1m = [v[0] / d, v[1] / d];
            let coeff = e0.inv()?.apply(e1m);
            let alpha0 = coeff[0];
            let kappa = root(alpha0 * p.delta0() / f, branch);
            let kinv = Mat2C::from_cols([e01[0] * kappa, e01[1] * kappa], [e1m[0] / kappa, e1m[1] / kappa]);
            Ok(PairSolution {
                case_tag: tag,
                k: Some(kinv.inv()?),
                f0: f,
                f1: ZERO,
                f_product: ZERO,
            })
        }
        CaseTag::F0Zero => {
            // K⁻¹ = (e01, e0−1)ϰ^{σ3} with e1−1 = e0−1, det(e11, e1−1) = 1
            let e0m = e0.col(1);
            let v = eigvec(&p.m1, p.r1);
            let d = v[0] * e0m[1] - v[1] * e0m[0];
            let e11 = [v[0] / d, v[1] / d];
            let e1 = Mat2C::from_cols(e11, e0m);
            let coeff = e1.inv()?.apply(e0.col(0));
            let beta1 = coeff[1];
            let kappa = root(f / (beta1 * (-p.delta1())), branch);
            let kinv = e0 * Mat2C::diag(kappa, ONE / kappa);
            Ok(PairSolution {
                case_tag: tag,
                k: Some(kinv.inv()?),
                f0: ZERO,
                f1: f,
                f_product: ZERO,
            })
        }
        CaseTag::PZero | CaseTag::Generic => {
            let [_, q, r, s] = p.basis_change()?;
            if s.norm() <= CLASSIFY_TOL {
                return Err(Error::BasisDegenerate);
            }
            let e1 = p.eigenbasis(1)?;
            let gamma0 = root(f / (q * s * p.delta1()), branch);
            let gamma1 = ONE / (gamma0 * s);
            let e01 = e0.col(0);
            let e1m = e1.col(1);
            let kinv = Mat2C::from_cols(
                [e01[0] * gamma0, e01[1] * gamma0],
                [e1m[0] * gamma1, e1m[1] * gamma1],
            );
            let f0 = gamma1 * r * p.delta0() / gamma0;
            Ok(PairSolution {
                case_tag: tag,
                k: Some(kinv.inv()?),
                f0,
                f1: f,
                f_product: q * r * p.delta0() * p.delta1(),
            })
        }
    }
}

/// Both sign branches; the second `K` is the negative of the first.
pub fn solve_both(p: &PairProblem, f_choice: Option<C>) -> Result<[PairSolution; 2]> {
    let a = solve(p, f_choice, true)?;
    let b = PairSolution {
        k: a.k.map(|k| -k),
        ..a
    };
    Ok([a, b])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    /// `|(K M0 K⁻¹)21|` and `|(K M1 K⁻¹)12|`.
    pub triangularity: f64,
    /// Deviation of the diagonals from `(r0, 1/r0)` and `(r1, 1/r1)`.
    pub diagonal: f64,
    /// Deviation of the corners from `(f0, f1)`.
    pub corners: f64,
    /// `|f0 f1 − f_product|`.
    pub f_product: f64,
    /// `|det K − 1|`.
    pub unimodularity: f64,
}

impl VerifyReport {
    pub fn max(&self) -> f64 {
        [
            self.triangularity,
            self.diagonal,
            self.corners,
            self.f_product,
            self.unimodularity,
        ]
        .iter()
        .fold(0.0, |m, x| m.max(*x))
    }
}

/// Residuals of `K M_ν = M_νΔ K`, relative to the problem scale.
pub fn verify(p: &PairProblem, sol: &PairSolution) -> Result<VerifyReport> {
    let k = sol
        .k
        .ok_or_else(|| Error::InvalidInput("solution carries no K".into()))?;
    let kinv = k.inv()?;
    let a = k * p.m0 * kinv;
    let b = k * p.m1 * kinv;
    let s = p.scale().max(k.norm() * kinv.norm());
    Ok(VerifyReport {
        triangularity: a.a21.norm().max(b.a12.norm()) / s,
        diagonal: [
            a.a11 - p.r0,
            a.a22 - ONE / p.r0,
            b.a11 - p.r1,
            b.a22 - ONE / p.r1,
        ]
        .iter()
        .fold(0.0_f64, |m, x| m.max(x.norm()))
            / s,
        corners: (a.a12 - sol.f0).norm().max((b.a21 - sol.f1).norm()) / s,
        f_product: (sol.f0 * sol.f1 - sol.f_product).norm() / s,
        unimodularity: (k.det() - 1.0).norm(),
    })
}

/// Solutions of the two swapped-diagonal problems attached to an
/// unsolvable pair: `r1 → 1/r1` (then `f1 = 0`) and `r0 → 1/r0`
/// (then `f0 = 0`).
pub fn swapped_diagonal_solutions(p: &PairProblem) -> Result<[PairSolution; 2]> {
    if classify(p)? != CaseTag::Unsolvable {
        return Err(Error::InvalidInput("pair is solvable as stated".into()));
    }
    Ok([
        solve(&p.swapped(false, true), None, true)?,
        solve(&p.swapped(true, false), None, true)?,
    ])
}

/// One line of batch input.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchInput {
    pub m0: Mat2C,
    pub m1: Mat2C,
    #[serde(default)]
    pub r0: Option<C>,
    #[serde(default)]
    pub r1: Option<C>,
    #[serde(default)]
    pub f: Option<C>,
}

/// One line of batch output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchOutput {
    pub index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution: Option<PairSolution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residuals: Option<VerifyReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn solve_input(input: &BatchInput) -> Result<(PairSolution, VerifyReport)> {
    let r0 = match input.r0 {
        Some(r) => r,
        None => label_eigenvalue(&input.m0)?,
    };
    let r1 = match input.r1 {
        Some(r) => r,
        None => label_eigenvalue(&input.m1)?,
    };
    let p = PairProblem::new(input.m0, input.m1, r0, r1)?;
    let sol = solve(&p, input.f, true)?;
    let rep = verify(&p, &sol)?;
    Ok((sol, rep))
}

/// Solves a JSON-lines batch; malformed or unsolvable lines produce an
/// output line carrying the error.
pub fn solve_jsonl(input: &str) -> String {
    let mut out = String::new();
    for (index, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let res = serde_json::from_str::<BatchInput>(line)
            .map_err(|e| Error::InvalidInput(e.to_string()))
            .and_then(|inp| solve_input(&inp));
        let o = match res {
            Ok((s, r)) => BatchOutput {
                index,
                solution: Some(s),
                residuals: Some(r),
                error: None,
            },
            Err(e) => BatchOutput {
                index,
                solution: None,
                residuals: None,
                error: Some(e.to_string()),
            },
        };
        out.push_str(&serde_json::to_string(&o).expect("output serializes"));
        out.push('\n');
    }
    out
}

/// Random matrix of unit determinant: complex Gaussian entries, rescaled by
/// a square root of the determinant.
pub fn random_sl2<R: Rng>(rng: &mut R) -> Mat2C {
    loop {
        let mut z = || C::new(rng.sample(StandardNormal), rng.sample(StandardNormal)) / 2f64.sqrt();
        let m = Mat2C::new(z(), z(), z(), z());
        let d = m.det();
        if d.norm() > 0.05 {
            return m / d.sqrt();
        }
    }
}

/// Random eigenvalue with `1.2 ≤ |r| ≤ 3`.
pub fn random_eigenvalue<R: Rng>(rng: &mut R) -> C {
    C::from_polar(rng.gen_range(1.2..3.0), rng.gen_range(-3.1..3.1))
}

/// Random problem of the requested case, built from eigenbases related by
/// the basis change that characterizes the case.
pub fn constructed_problem<R: Rng>(rng: &mut R, tag: CaseTag) -> PairProblem {
    loop {
        let (r0, r1) = (random_eigenvalue(rng), random_eigenvalue(rng));
        let e0 = random_sl2(rng);
        let w = random_sl2(rng).col(0);
        let (a, b) = (e0.col(0), e0.col(1));
        let e1 = match tag {
            CaseTag::Commuting => e0,
            CaseTag::F1Zero => Mat2C::from_cols(a, w),
            CaseTag::F0Zero => Mat2C::from_cols(w, b),
            CaseTag::PZero => Mat2C::from_cols(b, w),
            CaseTag::Unsolvable => Mat2C::from_cols(w, a),
            CaseTag::Generic => random_sl2(rng),
        };
        if e1.det().norm() < 0.1 {
            continue;
        }
        let build = |e: Mat2C, r: C| e * Mat2C::diag(r, ONE / r) * e.inv().expect("invertible");
        let p = PairProblem {
            m0: build(e0, r0),
            m1: build(e1, r1),
            r0,
            r1,
        };
        if p.check().is_ok() && classify(&p) == Ok(tag) {
            return p;
        }
    }
}
