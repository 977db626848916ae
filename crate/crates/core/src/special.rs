//! Complex Γ, Gauss ₂F₁ and the hypergeometric 2×2 system `Y(x)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::algebra::{dist_to_int, exp_ipi, re, Mat2C, C, ONE, ZERO};
use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(z)` for `Re z ≥ 0.5` (Lanczos).
fn ln_gamma_right(z: C) -> C {
    let z = z - 1.0;
    let mut x = re(LANCZOS[0]);
    for (k, &ck) in LANCZOS.iter().enumerate().skip(1) {
        x += ck / (z + k as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    re(0.5 * (2.0 * PI).ln()) + (z + 0.5) * t.ln() - t + x.ln()
}

fn check_pole(z: C) -> Result<()> {
    let n = z.re.round();
    if n <= 0.0 && (z - re(n)).norm() <= 1e-12 {
        return Err(Error::PoleOfGamma);
    }
    Ok(())
}

/// Complex gamma function.
pub fn gamma_c(z: C) -> Result<C> {
    check_pole(z)?;
    if z.re < 0.5 {
        // reflection Γ(z)Γ(1−z) = π / sin(πz)
        let s = (z * PI).sin();
        Ok(re(PI) / (s * ln_gamma_right(ONE - z).exp()))
    } else {
        Ok(ln_gamma_right(z).exp())
    }
}

/// `1/Γ(z)`, entire; zero at the poles of Γ.
pub fn rgamma_c(z: C) -> C {
    if check_pole(z).is_err() {
        return ZERO;
    }
    if z.re < 0.5 {
        (z * PI).sin() * ln_gamma_right(ONE - z).exp() / PI
    } else {
        (-ln_gamma_right(z)).exp()
    }
}

/// `ln Γ(z)` on some branch (only `exp` of sums of these is meaningful).
pub fn ln_gamma_c(z: C) -> Result<C> {
    check_pole(z)?;
    if z.re < 0.5 {
        Ok(re(PI.ln()) - (z * PI).sin().ln() - ln_gamma_right(ONE - z))
    } else {
        Ok(ln_gamma_right(z))
    }
}

/// `∏Γ(num) / ∏Γ(den)` evaluated through logarithms; zero when a denominator argument is a pole.
pub fn gamma_ratio(num: &[C], den: &[C]) -> Result<C> {
    let mut l = ZERO;
    for &z in den {
        if check_pole(z).is_err() {
            return Ok(ZERO);
        }
        l -= ln_gamma_c(z)?;
    }
    for &z in num {
        l += ln_gamma_c(z)?;
    }
    Ok(l.exp())
}

/// Residuals of the reflection formula and of the ratio asymptotics
/// `Γ(z+μ)/Γ(z+ν)·z^{ν−μ} → 1`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GammaIdentities {
    pub reflection: f64,
    pub ratio: f64,
}

pub fn gamma_identities(z: C, mu: C, nu: C) -> Result<GammaIdentities> {
    let refl = gamma_c(z)? * gamma_c(ONE - z)? * (z * PI).sin() / PI - 1.0;
    let ratio = gamma_c(z + mu)? / gamma_c(z + nu)? * ((nu - mu) * z.ln()).exp() - 1.0;
    Ok(GammaIdentities {
        reflection: refl.norm(),
        ratio: ratio.norm(),
    })
}

/// Sum of the Gauss series and the largest term modulus seen.
fn series(a: C, b: C, c: C, z: C) -> Result<(C, f64)> {
    let mut term = ONE;
    let mut sum = ONE;
    let mut big = 1.0_f64;
    let mut small_run = 0;
    for n in 0..20_000 {
        let nf = n as f64;
        let den = (c + nf) * (nf + 1.0);
        if den.norm() == 0.0 {
            return Err(Error::ParameterPole("c is a non-positive integer".into()));
        }
        term = term * (a + nf) * (b + nf) / den * z;
        if term.norm() == 0.0 {
            return Ok((sum, big));
        }
        sum += term;
        big = big.max(term.norm());
        if term.norm() <= 1e-17 * sum.norm() {
            small_run += 1;
            if small_run >= 3 {
                return Ok((sum, big));
            }
        } else {
            small_run = 0;
        }
    }
    Err(Error::NoConvergence("hypergeometric series".into()))
}

fn is_nonpos_int(z: C) -> bool {
    z.re <= 0.5 && dist_to_int(z) < 1e-14
}

/// Best of the direct, Euler and Pfaff forms in the disc `|x| < 1`.
fn series_best(a: C, b: C, c: C, x: C) -> Result<C> {
    let (s, big) = series(a, b, c, x)?;
    let cond = big / s.norm().max(1e-300);
    if cond < 1e3 {
        return Ok(s);
    }
    let mut best = (s, cond);
    let one_minus = ONE - x;
    // Euler: (1−x)^{c−a−b} F(c−a, c−b; c; x)
    if let Ok((s2, b2)) = series(c - a, c - b, c, x) {
        let v = ((c - a - b) * one_minus.ln()).exp() * s2;
        let c2 = b2 / s2.norm().max(1e-300);
        if c2 < best.1 {
            best = (v, c2);
        }
    }
    if dist_to_int(c - a - b) >= LOG_DEGENERACY && one_minus.norm() < 0.9 {
        if let Ok(v) = one_minus_form(a, b, c, x) {
            let c4 = v.1;
            if c4 < best.1 {
                best = (v.0, c4);
            }
        }
    }
    let w = x / (x - 1.0);
    if w.norm() < 0.9 {
        for (p, q) in [(a, b), (b, a)] {
            // Pfaff: (1−x)^{−p} F(p, c−q; c; x/(x−1))
            if let Ok((s3, b3)) = series(p, c - q, c, w) {
                let v = (-p * one_minus.ln()).exp() * s3;
                let c3 = b3 / s3.norm().max(1e-300);
                if c3 < best.1 {
                    best = (v, c3);
                }
            }
        }
    }
    Ok(best.0)
}

/// Two-term `1 − x` connection formula; returns the value and a cancellation measure.
fn one_minus_form(a: C, b: C, c: C, x: C) -> Result<(C, f64)> {
    let w = ONE - x;
    let s = c - a - b;
    let (f1, m1) = series(a, b, ONE - s, w)?;
    let k1 = gamma_ratio(&[c, s], &[c - a, c - b])?;
    let t1 = k1 * f1;
    let k2 = gamma_ratio(&[c, -s], &[a, b])?;
    let (t2, m2) = if k2.norm() == 0.0 {
        (ZERO, 0.0)
    } else {
        let (f2, m2) = series(c - a, c - b, s + 1.0, w)?;
        let p = (s * w.ln()).exp();
        (k2 * p * f2, (k2 * p).norm() * m2)
    };
    let v = t1 + t2;
    let big = (k1.norm() * m1).max(m2).max(t1.norm()).max(t2.norm());
    Ok((v, big / v.norm().max(1e-300)))
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Transform {
    Direct,
    Pfaff,
    OneMinus,
    Inverse,
    InverseOneMinus,
    OneMinusInverse,
}

const LOG_DEGENERACY: f64 = 1e-3;

/// Gauss hypergeometric function `₂F₁(a, b; c; x)` on the principal sheet (cut along `[1, ∞)`).
///
/// Accuracy is about 1e−12 relative away from the unit circle; near `x = e^{±iπ/3}` every
/// transformation has argument of modulus close to one and convergence slows down.
pub fn hyp2f1(a: C, b: C, c: C, x: C) -> Result<C> {
    if is_nonpos_int(c) {
        return Err(Error::ParameterPole(format!("c = {c} is a non-positive integer")));
    }
    if (x - 1.0).norm() <= 1e-8 {
        return Err(Error::NearSingularArgument);
    }
    if x.norm() == 0.0 {
        return Ok(ONE);
    }
    if x.norm() <= 0.5 {
        return series_best(a, b, c, x);
    }
    if is_nonpos_int(a) || is_nonpos_int(b) {
        return Ok(series(a, b, c, x)?.0);
    }
    if x.norm() <= 0.5 {
        return series_best(a, b, c, x);
    }
    let one_minus_x = ONE - x;
    let cands = [
        (Transform::Direct, x.norm()),
        (Transform::Pfaff, (x / (x - 1.0)).norm()),
        (Transform::OneMinus, one_minus_x.norm()),
        (Transform::Inverse, x.inv().norm()),
        (Transform::InverseOneMinus, one_minus_x.inv().norm()),
        (Transform::OneMinusInverse, (ONE - x.inv()).norm()),
    ];
    let cab_deg = dist_to_int(c - a - b) < LOG_DEGENERACY;
    let ab_deg = dist_to_int(a - b) < LOG_DEGENERACY;
    let mut order: Vec<_> = cands
        .iter()
        .filter(|(t, _)| match t {
            Transform::OneMinus | Transform::OneMinusInverse => !cab_deg,
            Transform::Inverse | Transform::InverseOneMinus => !ab_deg,
            _ => true,
        })
        .copied()
        .collect();
    order.sort_by(|p, q| p.1.partial_cmp(&q.1).unwrap());
    let Some(&(t, m)) = order.first() else {
        return Err(Error::ParameterPole("logarithmic case".into()));
    };
    if m >= 1.0 {
        return Err(Error::ParameterPole(
            "logarithmic case: no convergent transformation".into(),
        ));
    }
    match t {
        Transform::Direct => series_best(a, b, c, x),
        Transform::Pfaff => {
            let w = x / (x - 1.0);
            Ok((-a * one_minus_x.ln()).exp() * series(a, c - b, c, w)?.0)
        }
        Transform::OneMinus => Ok(one_minus_form(a, b, c, x)?.0),
        Transform::Inverse => {
            let w = x.inv();
            let lm = (-x).ln();
            let t1 = gamma_ratio(&[c, b - a], &[b, c - a])?
                * (-a * lm).exp()
                * series(a, a - c + 1.0, a - b + 1.0, w)?.0;
            let t2 = gamma_ratio(&[c, a - b], &[a, c - b])?
                * (-b * lm).exp()
                * series(b, b - c + 1.0, b - a + 1.0, w)?.0;
            Ok(t1 + t2)
        }
        Transform::InverseOneMinus => {
            let w = one_minus_x.inv();
            let l1 = one_minus_x.ln();
            let t1 = gamma_ratio(&[c, b - a], &[b, c - a])?
                * (-a * l1).exp()
                * series(a, c - b, a - b + 1.0, w)?.0;
            let t2 = gamma_ratio(&[c, a - b], &[a, c - b])?
                * (-b * l1).exp()
                * series(b, c - a, b - a + 1.0, w)?.0;
            Ok(t1 + t2)
        }
        Transform::OneMinusInverse => {
            let w = ONE - x.inv();
            let s = c - a - b;
            let t1 = gamma_ratio(&[c, s], &[c - a, c - b])?
                * (-a * x.ln()).exp()
                * series(a, a - c + 1.0, a + b - c + 1.0, w)?.0;
            let t2 = gamma_ratio(&[c, -s], &[a, b])?
                * (s * one_minus_x.ln() + (a - c) * x.ln()).exp()
                * series(c - a, ONE - a, s + 1.0, w)?.0;
            Ok(t1 + t2)
        }
    }
}

/// Branch representative of `arg(w)` inside the strip `(−π + κπ/2, π + κπ/2)`, using the
/// principal argument only.
fn sector_arg(w: C, kappa: i32) -> Result<f64> {
    let th = w.arg();
    let k = kappa as f64;
    let lo = -PI + k * PI / 2.0;
    let hi = PI + k * PI / 2.0;
    if th > lo && th < hi {
        Ok(th)
    } else {
        Err(Error::OutOfSector)
    }
}

/// Leading two-term large-`b` asymptotics of `₂F₁(a, b; c; z)`.
pub fn hyp_large_b(a: C, b: C, c: C, z: C, kappa: i32) -> Result<C> {
    if kappa != 1 && kappa != -1 {
        return Err(Error::InvalidInput("kappa must be ±1".into()));
    }
    if !(z.norm() > 0.0 && z.norm() < 1.0) {
        return Err(Error::InvalidInput("need 0 < |z| < 1".into()));
    }
    let w = b * z;
    if w.norm() < 10.0 {
        return Err(Error::InvalidInput("need |bz| ≥ 10".into()));
    }
    let th = sector_arg(w, kappa)?;
    let lw = C::new(w.norm().ln(), th);
    let t1 = exp_ipi(a * kappa as f64) * gamma_c(c)? * rgamma_c(c - a) * (-a * lw).exp();
    let t2 = gamma_c(c)? * rgamma_c(a) * (w + (a - c) * lw).exp();
    Ok(t1 + t2)
}

/// Parameters `(α, β, γ)` of the hypergeometric system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub alpha: C,
    pub beta: C,
    pub gamma: C,
}

impl HyperParams {
    pub fn new(alpha: C, beta: C, gamma: C) -> Self {
        HyperParams { alpha, beta, gamma }
    }

    /// `Θ_∞Y = α − β`.
    pub fn theta_inf(&self) -> C {
        self.alpha - self.beta
    }

    /// `Θ_0Y = 1 − γ`.
    pub fn theta0(&self) -> C {
        ONE - self.gamma
    }

    /// `Θ_1Y = γ − α − β − 1`.
    pub fn theta1(&self) -> C {
        self.gamma - self.alpha - self.beta - 1.0
    }

    pub fn check_generic(&self) -> Result<()> {
        for (name, th) in [
            ("alpha-beta", self.theta_inf()),
            ("1-gamma", self.theta0()),
            ("gamma-alpha-beta-1", self.theta1()),
        ] {
            if dist_to_int(th) <= 1e-6 {
                return Err(Error::NonGenericParameters(format!("{name} = {th} is an integer")));
            }
        }
        Ok(())
    }
}

/// Residues, local gauge matrices and connection matrices of the system
/// `dY/dx = (A0Y/x + A1Y/(x−1)) Y`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct YBundle {
    pub a0: Mat2C,
    pub a1: Mat2C,
    pub g0: Mat2C,
    pub g1: Mat2C,
    pub c0: Mat2C,
    pub c1: Mat2C,
    pub params: HyperParams,
}

impl YBundle {
    /// `(C^ν)⁻¹ e^{πiΘ_νY σ3} C^ν` for `ν ∈ {0, 1}`.
    pub fn monodromy(&self, nu: u8) -> Result<Mat2C> {
        let (cm, th) = match nu {
            0 => (self.c0, self.params.theta0()),
            _ => (self.c1, self.params.theta1()),
        };
        let e = Mat2C::diag(exp_ipi(th), exp_ipi(-th));
        Ok(cm.inv()? * e * cm)
    }
}

pub fn y_bundle(p: HyperParams) -> Result<YBundle> {
    p.check_generic()?;
    let (a, b, g) = (p.alpha, p.beta, p.gamma);
    let d = b - a;
    let h0 = ((a + b) * (ONE - g) + a * b * 2.0) * 0.5;
    let a0 = Mat2C::new(-h0, b * (b + 1.0 - g), -a * (a + 1.0 - g), h0) / d;
    // the sum rule fixes A1Y
    let a1 = Mat2C::sigma3() * (d * 0.5) - a0;
    let g0 = Mat2C::new(b + 1.0 - g, b, a + 1.0 - g, a) / d;
    let g1 = Mat2C::new(ONE, b * (b + 1.0 - g), ONE, a * (a + 1.0 - g)) / d;
    let gm = gamma_c;
    let rg = rgamma_c;
    let c0 = Mat2C::new(
        exp_ipi(-(a + 1.0 - g)) * gm(g - 1.0)? * gm(a - b + 1.0)? * rg(g - b) * rg(a),
        -exp_ipi(-(b + 1.0 - g)) * gm(g - 1.0)? * gm(b - a + 1.0)? * rg(g - a) * rg(b),
        exp_ipi(-a) * gm(ONE - g)? * gm(a - b + 1.0)? * rg(ONE - b) * rg(a + 1.0 - g),
        -exp_ipi(-b) * gm(ONE - g)? * gm(b - a + 1.0)? * rg(ONE - a) * rg(b + 1.0 - g),
    );
    let s = g - a - b - 1.0;
    let c1 = Mat2C::new(
        -gm(a + b + 1.0 - g)? * gm(a - b + 1.0)? * rg(a + 1.0 - g) * rg(a),
        gm(a + b + 1.0 - g)? * gm(b - a + 1.0)? * rg(b + 1.0 - g) * rg(b),
        -exp_ipi(-s) * gm(s)? * gm(a - b + 1.0)? * rg(ONE - b) * rg(g - b),
        exp_ipi(-s) * gm(s)? * gm(b - a + 1.0)? * rg(ONE - a) * rg(g - a),
    );
    Ok(YBundle {
        a0,
        a1,
        g0,
        g1,
        c0,
        c1,
        params: p,
    })
}

/// Explicit hypergeometric form of the solution normalized as
/// `Y = (I + O(1/x)) x^{((β−α)/2)σ3}` at infinity; principal branches, `|x| > 1`.
pub fn y_eval(p: &HyperParams, x: C) -> Result<Mat2C> {
    let (a, b, g) = (p.alpha, p.beta, p.gamma);
    let d = b - a;
    let w = x.inv();
    let f11 = hyp2f1(a, a + 1.0 - g, a - b, w)?;
    let f22 = hyp2f1(b, b + 1.0 - g, b - a, w)?;
    let f12 = hyp2f1(b + 1.0, b + 2.0 - g, b - a + 2.0, w)?;
    let f21 = hyp2f1(a + 1.0, a + 2.0 - g, a - b + 2.0, w)?;
    let m = Mat2C::new(
        f11,
        b * (b + 1.0 - g) / (d * (d + 1.0)) * w * f12,
        a * (a + 1.0 - g) / (-d * (ONE - d)) * w * f21,
        f22,
    );
    let lx = x.ln();
    let scal = ((g - 1.0 - a - b) * 0.5 * lx + (a + b + 1.0 - g) * 0.5 * (x - 1.0).ln()).exp();
    Ok(m * Mat2C::exp_sigma3(d * 0.5 * lx) * scal)
}

/// Leading constant matrix `K̂(κ)` of the large-`(1−γ)` asymptotics of `Y`.
pub fn y_asymptotic_frame(p: &HyperParams, kappa: i32) -> Result<Mat2C> {
    let (a, b, g) = (p.alpha, p.beta, p.gamma);
    let big = ONE - g;
    if big.norm() < 10.0 {
        return Err(Error::SmallParameterRegime(big.norm()));
    }
    if kappa != 1 && kappa != -1 {
        return Err(Error::InvalidInput("kappa must be ±1".into()));
    }
    let k = kappa as f64;
    let inner = Mat2C::new(
        gamma_c(a - b)? * rgamma_c(a),
        gamma_c(b - a)? * rgamma_c(b),
        -exp_ipi(a * k) * gamma_c(ONE + a - b)? * rgamma_c(ONE - b),
        exp_ipi(b * k) * gamma_c(ONE + b - a)? * rgamma_c(ONE - a),
    );
    Ok(Mat2C::sigma3() * (a - b).sqrt() * inner * Mat2C::pow_sigma3(big, (b - a) * 0.5))
}

/// Leading-order approximation of `Y(x)` in the large-`(1−γ)` regime.
pub fn y_asymptotic_approx(p: &HyperParams, kappa: i32, x: C) -> Result<Mat2C> {
    let (a, b, g) = (p.alpha, p.beta, p.gamma);
    let big = ONE - g;
    let pre = Mat2C::new(ONE, b, ONE, a) / (a - b).sqrt();
    let w = big / (x * 2.0) + (a + b) * 0.5 * (big / x).ln();
    Ok(pre * Mat2C::exp_sigma3(w) * y_asymptotic_frame(p, kappa)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::c;

    #[test]
    fn gamma_simple_values() {
        assert!((gamma_c(ONE).unwrap() - ONE).norm() < 1e-14);
        assert!((gamma_c(re(0.5)).unwrap() - re(PI.sqrt())).norm() < 1e-14);
        assert!((gamma_c(re(5.0)).unwrap() - re(24.0)).norm() < 1e-12);
        assert!(matches!(gamma_c(re(-2.0)), Err(Error::PoleOfGamma)));
        assert!(matches!(gamma_c(ZERO), Err(Error::PoleOfGamma)));
    }

    #[test]
    fn hyp_trivial() {
        assert_eq!(hyp2f1(re(0.3), re(0.2), re(1.1), ZERO).unwrap(), ONE);
        let v = hyp2f1(ONE, ONE, re(2.0), re(0.5)).unwrap();
        assert!((v - re(2.0 * 2f64.ln())).norm() < 1e-14);
        assert!(matches!(
            hyp2f1(ONE, ONE, re(-2.0), re(0.3)),
            Err(Error::ParameterPole(_))
        ));
        assert!(matches!(
            hyp2f1(ONE, re(0.3), re(2.5), c(1.0 + 1e-9, 0.0)),
            Err(Error::NearSingularArgument)
        ));
    }

    #[test]
    fn bundle_sum_rule() {
        let p = HyperParams::new(re(0.3), re(-0.2), re(0.6));
        let yb = y_bundle(p).unwrap();
        let s = yb.a0 + yb.a1 - Mat2C::sigma3() * re(-0.25);
        assert!(s.max_abs() < 1e-14);
    }
}
