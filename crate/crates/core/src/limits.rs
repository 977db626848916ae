//! The two degeneration limits from Painlevé VI to Painlevé V.
//!
//! Leading-order predictors for the P6 coordinates along a ladder, the maps
//! of monodromy data onto the limiting P5 system, extraction of the limiting
//! P5 solution from a ladder with convergence reports, and the equivalence
//! of the two limits under `λ → t6/λ`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{dist_to_int, exp_ipi, ONE};
use crate::error::{Error, Result};
use crate::fuchsian::{validate, LoopMeta, MonodromyKind, MonodromyPoint, Residuals};
use crate::ladder::{build_ladder, GsdLadder, LadderPattern};
use crate::painleve5::{p5_residual, tau5_logderiv, sigma5, M5Report, P5State, StokesData, Thetas5};
use crate::painleve6::{
    dlog_tau6, dsigma6_hat, jm_diagonalizer, reflect_infinity, y6_of, P6State, Thetas6, NU0, NU1,
    NUT,
};
use crate::special::rgamma_c;
use crate::stats::loglog_slope;
use crate::triangularizer::{self, CaseTag, PairProblem};
use crate::{Mat2C, C};

/// Smallest admissible modulus of a predictor denominator.
pub const DENOM_TOL: f64 = 1e-10;
/// Distance of `cos πl` from `±1` below which `l` is rejected.
pub const BRANCH_TOL: f64 = 1e-8;
/// Required fitted slope of every convergence report.
pub const MIN_SLOPE: f64 = 0.5;
/// Fitted slope at or below which extraction reports no convergence.
pub const NO_CONVERGENCE_SLOPE: f64 = 0.2;
/// Ladder levels entering the slope fits.
pub const SLOPE_LEVELS: (usize, usize) = (6, 16);
/// First level used by the extrapolation to `ε = 0`.
pub const FIT_FROM: usize = 6;
/// Agreement required by the equivalence check.
pub const MATCH_TOL: f64 = 5e-3;

/// Which formal limit a ladder realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitKind {
    /// First limit, parametrization with `Θ∞6 + Θ16 = Θ∞5`.
    OneA,
    /// First limit after the reflection at infinity, `Θ16 − Θ∞6 = Θ∞5`.
    OneB,
    /// Second limit, `Θt6 + Θ06 = Θ∞5`.
    Two,
}

impl LimitKind {
    pub fn pattern(self) -> LadderPattern {
        match self {
            LimitKind::OneA | LimitKind::OneB => LadderPattern::FirstLimit,
            LimitKind::Two => LadderPattern::SecondLimit,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LimitKind::OneA => "1a",
            LimitKind::OneB => "1b",
            LimitKind::Two => "2",
        }
    }
}

/// A named complex value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub name: String,
    pub value: C,
}

fn q(name: &str, value: C) -> Quantity {
    Quantity {
        name: name.to_string(),
        value,
    }
}

/// Leading-order P6 data predicted from a P5 point at a given `ε`.
///
/// Each entry of `values` is normalized to be `O(1)` as `ε → 0`;
/// `printed` holds alternative closed forms kept for comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitPrediction {
    pub kind: LimitKind,
    pub eps: C,
    pub t5: C,
    pub thetas6: Thetas6,
    pub values: Vec<Quantity>,
    pub printed: Vec<Quantity>,
}

impl LimitPrediction {
    pub fn get(&self, name: &str) -> Option<C> {
        self.values
            .iter()
            .chain(&self.printed)
            .find(|x| x.name == name)
            .map(|x| x.value)
    }
}

fn nonzero(x: C, what: &str) -> Result<C> {
    if x.norm() < DENOM_TOL || !x.is_finite() {
        return Err(Error::DenominatorCollapse(format!("{what} = {x}")));
    }
    Ok(x)
}

/// Recurring combinations of a P5 point.
struct P5Combos {
    /// `z5 + (Θ05 − Θ15 + Θ∞5)/2`.
    p: C,
    /// `z5 + (Θ05 + Θ15 + Θ∞5)/2`.
    q: C,
    /// `z5 − q/y5`.
    x: C,
    /// `z5 + Θ05 − y5 p`.
    y: C,
}

fn combos(p5: &P5State) -> Result<P5Combos> {
    let Thetas5 { th0, th1, thinf } = p5.thetas;
    let z = p5.z5;
    let y5 = nonzero(p5.y5, "y5")?;
    let p = z + (th0 - th1 + thinf) / 2.0;
    let q = z + (th0 + th1 + thinf) / 2.0;
    Ok(P5Combos {
        p,
        q,
        x: z - q / y5,
        y: z + th0 - y5 * p,
    })
}

/// `(Θ∞5² − Θ05² − Θ15²)/(4t5)`.
fn tau_shift(p5: &P5State) -> C {
    let Thetas5 { th0, th1, thinf } = p5.thetas;
    (thinf * thinf - th0 * th0 - th1 * th1) / (p5.t5 * 4.0)
}

/// Leading-order data of the first limit in the parametrization where
/// `Θ∞6 + Θ16 = Θ∞5`. The `u` entries carry the factor `s16²` with
/// `s16 = ε(εt5)^{Θ∞5/2}`.
pub fn predict_limit1a(p5: &P5State, eps: C) -> Result<LimitPrediction> {
    let Thetas5 { th0, th1, thinf } = p5.thetas;
    let (z, y5, u5, t5) = (p5.z5, p5.y5, p5.u5, p5.t5);
    let k = combos(p5)?;
    nonzero(z, "z5")?;
    nonzero(k.x, "z5 − q/y5")?;
    let zth = nonzero(z + th0, "z5 + Θ05")?;
    let den = nonzero(zth - y5 * k.p, "z5 + Θ05 − y5 p")?;
    let printed_den = nonzero(
        ONE + y5 * (ONE - (th0 + th1 - thinf) / (nonzero(z + thinf, "z5 + Θ∞5")? * 2.0)),
        "printed y6 denominator",
    )?;
    let thetas6 = Thetas6::new(th0, -ONE / eps, -th1, thinf + ONE / eps);
    let values = vec![
        q("z06", z),
        q("zt6", -k.p),
        q("z16/eps", -k.x * k.y),
        q("u06*s^2/eps^2", u5 * zth / z),
        q("ut6*s^2/eps^2", y5 * u5),
        q("u16*s^2/eps", u5 / k.x),
        // y6 = t6/(1 + (1 − t6) ut6zt6/(u06z06)) with the asymptotics above
        q("y6/eps", t5 * zth / den),
        q("dlog_tau6/dt5", tau_shift(p5) + tau5_logderiv(p5)?),
    ];
    let printed = vec![q("y6/eps printed", t5 / printed_den)];
    Ok(LimitPrediction {
        kind: LimitKind::OneA,
        eps,
        t5,
        thetas6,
        values,
        printed,
    })
}

/// Leading-order data of the first limit in the reflected parametrization
/// `Θ16 − Θ∞6 = Θ∞5`; here `z16 = 1/ε + O(ε)` and only `u` ratios are fixed.
pub fn predict_limit1b(p5: &P5State, eps: C) -> Result<LimitPrediction> {
    let Thetas5 { th0, th1, thinf } = p5.thetas;
    let (z, y5, t5) = (p5.z5, p5.y5, p5.t5);
    let k = combos(p5)?;
    nonzero(z, "z5")?;
    let zth = z + th0;
    let den = nonzero(ONE - k.q / (y5 * z), "1 − q/(y5 z5)")?;
    let printed_den = nonzero(ONE + k.q / (y5 * z), "printed y6 denominator")?;
    let thetas6 = Thetas6::new(th0, -ONE / eps, -th1, -ONE / eps - thinf);
    let values = vec![
        q("z06", -zth),
        q("zt6", k.q),
        q("(z16-1/eps)/eps", k.x * k.y),
        q("u16/(eps*ut6)", y5 * k.x),
        q("u16/(eps*u06)", zth * k.x / z),
        // as for 1a, through ut6zt6/(u06z06) = −q/(y5 z5)
        q("y6/eps", t5 / den),
        q("dlog_tau6/dt5", tau_shift(p5) + tau5_logderiv(p5)?),
    ];
    let printed = vec![q("y6/eps printed", t5 / printed_den)];
    Ok(LimitPrediction {
        kind: LimitKind::OneB,
        eps,
        t5,
        thetas6,
        values,
        printed,
    })
}

/// Leading-order data of the second limit. The `u` coordinates enter only
/// through ratios, and the `τ6`, `σ̂6` entries have their singular terms
/// `−1/(2ε²t5) − Θ∞5/(2εt5)` and `−t5/(2ε)` removed.
pub fn predict_limit2(p5: &P5State, eps: C) -> Result<LimitPrediction> {
    let Thetas5 { th0, th1, thinf } = p5.thetas;
    let (z, y5, t5) = (p5.z5, p5.y5, p5.t5);
    if th0.norm() < DENOM_TOL {
        return Err(Error::ThetaZero("Θ05 = 0".into()));
    }
    let k = combos(p5)?;
    let om = nonzero(ONE - y5, "1 − y5")?;
    nonzero(z, "z5")?;
    let w = (ONE / y5 - 1.0) * k.q;
    let u_den = nonzero(th1 + w * (ONE + th0 / (z * om)), "u16 denominator")?;
    let z16 = (z * om / th0 + 1.0) * (th1 + w);
    let u16 = (th1 + w) / u_den;
    // y6 = 1/(1 + (1 − 1/t6) u16z16/(u06z06)) with the asymptotics above
    let y_den = nonzero(ONE - th0 * u16 * (z16 - th1) / (t5 * z), "y6 denominator")?;
    let printed_den = nonzero(ONE + (y5 - 1.0) / t5 * (k.p - k.q / y5), "printed y6 denominator")?;
    let thetas6 = Thetas6::new(thinf + ONE / eps, th1, -ONE / eps, th0);
    let values = vec![
        q("eps*zt6", -z / th0),
        q("eps*z06", z / th0),
        q("z16+th16", z16),
        q("u06/ut6", ONE),
        q("u16/ut6", u16),
        q("y6", ONE / y_den),
        q("dlog_tau6/dt5 regular", tau5_logderiv(p5)?),
        q("t6*dsigma6_hat regular", t5 * (z + th0 / 2.0)),
    ];
    let printed = vec![q("y6 printed", ONE / printed_den)];
    Ok(LimitPrediction {
        kind: LimitKind::Two,
        eps,
        t5,
        thetas6,
        values,
        printed,
    })
}

pub fn predict(kind: LimitKind, p5: &P5State, eps: C) -> Result<LimitPrediction> {
    match kind {
        LimitKind::OneA => predict_limit1a(p5, eps),
        LimitKind::OneB => predict_limit1b(p5, eps),
        LimitKind::Two => predict_limit2(p5, eps),
    }
}

/// The `Θ` of the limiting P5 system read off a ladder state.
pub fn thetas5_of(kind: LimitKind, th: &Thetas6) -> Thetas5 {
    match kind {
        LimitKind::OneA => Thetas5::new(th.th0, -th.tht, th.th1 + th.thinf),
        LimitKind::OneB => Thetas5::new(th.th0, -th.tht, th.th1 - th.thinf),
        LimitKind::Two => Thetas5::new(th.thinf, th.th1, th.tht + th.th0),
    }
}

/// `s16 = ε(εt5)^{Θ∞5/2}`, the first-limit scale with `f0 d0 = 1`.
pub fn s16_scale(eps: C, t5: C, thinf5: C) -> C {
    eps * (eps * t5).powc(thinf5 / 2.0)
}

/// The quantities of [`predict`] measured on a ladder state, in the same
/// order and normalization. For [`LimitKind::OneB`] the state must already
/// be in the reflected parametrization.
pub fn observe(kind: LimitKind, state: &P6State, eps: C, t5: C) -> Result<Vec<Quantity>> {
    let th = state.thetas;
    let th5 = thetas5_of(kind, &th);
    let (z, u) = (state.z, state.u);
    let y6 = y6_of(state)?;
    let dlog = eps * dlog_tau6(state);
    Ok(match kind {
        LimitKind::OneA => {
            let s2 = s16_scale(eps, t5, th5.thinf).powu(2);
            vec![
                q("z06", z[NU0]),
                q("zt6", z[NUT]),
                q("z16/eps", z[NU1] / eps),
                q("u06*s^2/eps^2", u[NU0] * s2 / (eps * eps)),
                q("ut6*s^2/eps^2", u[NUT] * s2 / (eps * eps)),
                q("u16*s^2/eps", u[NU1] * s2 / eps),
                q("y6/eps", y6 / eps),
                q("dlog_tau6/dt5", dlog),
            ]
        }
        LimitKind::OneB => vec![
            q("z06", z[NU0]),
            q("zt6", z[NUT]),
            q("(z16-1/eps)/eps", (z[NU1] + th.th1) / eps),
            q("u16/(eps*ut6)", u[NU1] / (eps * u[NUT])),
            q("u16/(eps*u06)", u[NU1] / (eps * u[NU0])),
            q("y6/eps", y6 / eps),
            q("dlog_tau6/dt5", dlog),
        ],
        LimitKind::Two => {
            let e2t = eps * eps * t5;
            vec![
                q("eps*zt6", eps * z[NUT]),
                q("eps*z06", eps * z[NU0]),
                q("z16+th16", z[NU1] + th.th1),
                q("u06/ut6", u[NU0] / u[NUT]),
                q("u16/ut6", u[NU1] / u[NUT]),
                q("y6", y6),
                q(
                    "dlog_tau6/dt5 regular",
                    dlog + ONE / (e2t * 2.0) + th5.thinf / (eps * t5 * 2.0),
                ),
                q(
                    "t6*dsigma6_hat regular",
                    state.t6 * dsigma6_hat(state) + t5 / (eps * 2.0),
                ),
            ]
        }
    })
}

/// `(z5, u5, y5)` from a pair of P5 residues, always through the same
/// entries so that estimates along a ladder vary smoothly.
fn p5_from_pair(t5: C, b0: &Mat2C, b1: &Mat2C, thetas: Thetas5) -> Result<P5State> {
    let z5 = b0.a11 - thetas.th0 / 2.0;
    let u5 = z5 / nonzero(b0.a21, "(A05)21")?;
    let p = z5 + (thetas.th0 - thetas.th1 + thetas.thinf) / 2.0;
    let y5 = b1.a12 / nonzero(u5 * p, "u5 (z5 + (Θ05 − Θ15 + Θ∞5)/2)")?;
    Ok(P5State {
        t5,
        u5,
        z5,
        y5,
        thetas,
    })
}

/// Estimate of the limiting P5 point from one ladder state, given in the
/// parametrization of `kind`. For the first limit `u5` carries the scale
/// `s16` of [`s16_scale`]; for the second limit `u5` is only defined up to
/// the free scale of `s_t6`.
pub fn estimate_p5(kind: LimitKind, state: &P6State, eps: C, t5: C) -> Result<P5State> {
    let th = state.thetas;
    match kind {
        LimitKind::OneA => {
            let th5 = thetas5_of(kind, &th);
            let s = s16_scale(eps, t5, th5.thinf);
            let r = jm_diagonalizer(state.z[NU1], state.u[NU1], th.th1, s);
            let ri = r.inv()?;
            let b0 = ri * state.residue(NU0) * r;
            let b1 = ri * state.residue(NUT) * r;
            p5_from_pair(t5, &b0, &b1, th5)
        }
        LimitKind::OneB => estimate_p5(LimitKind::OneA, &reflect_infinity(state, [1, 1, 1])?, eps, t5),
        LimitKind::Two => {
            let th5 = thetas5_of(kind, &th);
            let r = jm_diagonalizer(state.z[NUT], state.u[NUT], th.tht, ONE);
            let ri = r.inv()?;
            let b0 = ri * (Mat2C::sigma3() * (th.thinf / 2.0)) * r;
            let b1 = ri * state.residue(NU1) * r;
            p5_from_pair(t5, &b0, &b1, th5)
        }
    }
}

/// Error decay of one predicted quantity along a ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub quantity: String,
    pub levels: Vec<usize>,
    /// `|ε_n|`.
    pub eps: Vec<f64>,
    pub errors: Vec<f64>,
    /// Least-squares slope of `ln e_n` against `ln |ε_n|`.
    pub slope: f64,
    pub pass: bool,
}

impl ConvergenceReport {
    /// Report over the levels inside [`SLOPE_LEVELS`]; needs at least four.
    pub fn new(quantity: &str, levels: &[usize], eps: &[f64], errors: &[f64]) -> Result<Self> {
        let (lo, hi) = SLOPE_LEVELS;
        let keep: Vec<usize> = (0..levels.len())
            .filter(|&i| levels[i] >= lo && levels[i] <= hi)
            .collect();
        if keep.len() < 4 {
            return Err(Error::InvalidInput(format!(
                "{quantity}: {} levels in [{lo}, {hi}], need 4",
                keep.len()
            )));
        }
        let pick = |v: &[f64]| keep.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let (eps, errors) = (pick(eps), pick(errors));
        if errors.iter().any(|e| !e.is_finite()) {
            return Err(Error::NoConvergence(format!("{quantity}: non-finite error")));
        }
        let slope = loglog_slope(&eps, &errors);
        Ok(ConvergenceReport {
            quantity: quantity.to_string(),
            levels: keep.iter().map(|&i| levels[i]).collect(),
            eps,
            errors,
            slope,
            pass: slope >= MIN_SLOPE,
        })
    }
}

/// Constant term of the least-squares polynomial of degree `deg` through
/// `(x_i, y_i)`.
pub fn extrapolate_to_zero(xs: &[C], ys: &[C], deg: usize) -> Result<C> {
    let m = deg + 1;
    if xs.len() < m || xs.len() != ys.len() {
        return Err(Error::InvalidInput(format!(
            "{} samples for a degree {deg} fit",
            xs.len()
        )));
    }
    // scaling the abscissa keeps the Vandermonde matrix well conditioned
    let xmax = xs.iter().map(|x| x.norm()).fold(0.0, f64::max);
    let a = DMatrix::from_fn(xs.len(), m, |i, j| (xs[i] / xmax).powu(j as u32));
    let b = DVector::from_column_slice(ys);
    let sol = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::NoConvergence(e.to_string()))?;
    Ok(sol[0])
}

/// One ladder level: the P5 estimate and the measured and predicted data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelEstimate {
    pub n: usize,
    pub eps: C,
    pub thetas6: Thetas6,
    pub p5: P5State,
    pub observed: Vec<Quantity>,
    pub predicted: LimitPrediction,
}

/// The limiting P5 point fitted from a ladder with its convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    pub kind: LimitKind,
    pub t5: C,
    pub levels: Vec<LevelEstimate>,
    /// Extrapolation of the level estimates to `ε = 0`. For the second
    /// limit `u5` is set to 1.
    pub limit: P5State,
    pub reports: Vec<ConvergenceReport>,
    /// Largest deviation of the ladder `Θ` from the predicted bookkeeping.
    pub theta_bookkeeping: f64,
}

impl Extraction {
    /// `NoConvergence` naming the first quantity whose slope is at most
    /// `NO_CONVERGENCE_SLOPE`.
    pub fn check_convergence(&self) -> Result<()> {
        match self.reports.iter().find(|r| r.slope <= NO_CONVERGENCE_SLOPE) {
            Some(r) => Err(Error::NoConvergence(format!(
                "{}: fitted slope {:.3}",
                r.quantity, r.slope
            ))),
            None => Ok(()),
        }
    }

    pub fn deepest(&self) -> &LevelEstimate {
        self.levels.last().expect("extraction has levels")
    }

    pub fn report(&self, quantity: &str) -> Option<&ConvergenceReport> {
        self.reports.iter().find(|r| r.quantity == quantity)
    }

    pub fn all_pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }
}

fn theta_gap(a: &Thetas6, b: &Thetas6) -> f64 {
    [a.th0 - b.th0, a.th1 - b.th1, a.tht - b.tht, a.thinf - b.thinf]
        .iter()
        .map(|d| d.norm())
        .fold(0.0, f64::max)
}

/// Level state in the parametrization of `kind`.
fn level_state(kind: LimitKind, state: &P6State) -> Result<P6State> {
    match kind {
        LimitKind::OneB => reflect_infinity(state, [1, 1, 1]),
        _ => Ok(*state),
    }
}

/// Fits the limiting P5 point from the even levels `n ≥ FIT_FROM` of a
/// ladder, then measures every predicted quantity against the ladder.
/// Fails with `NoConvergence` when a fitted slope is at most
/// `NO_CONVERGENCE_SLOPE`.
pub fn extract_p5_from_ladder(ladder: &GsdLadder, kind: LimitKind) -> Result<Extraction> {
    let ext = fit_p5_from_ladder(ladder, kind)?;
    ext.check_convergence()?;
    Ok(ext)
}

/// [`extract_p5_from_ladder`] without the slope check, so that a failed
/// run can still be tabulated.
pub fn fit_p5_from_ladder(ladder: &GsdLadder, kind: LimitKind) -> Result<Extraction> {
    if ladder.pattern != kind.pattern() {
        return Err(Error::InvalidInput(format!(
            "limit {} needs a {:?} ladder",
            kind.name(),
            kind.pattern()
        )));
    }
    let t5 = ladder.t5;
    let mut raw = Vec::new();
    for n in FIT_FROM..ladder.epsilons.len() {
        let rung = ladder
            .even(n)
            .ok_or_else(|| Error::InvalidInput(format!("ladder has no level {}", 2 * n)))?;
        let state = level_state(kind, &rung.state)?;
        let p5 = estimate_p5(kind, &state, rung.epsilon, t5)?;
        raw.push((n, rung.epsilon, state, p5));
    }
    if raw.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "{} usable levels, need at least 4",
            raw.len()
        )));
    }
    let eps: Vec<C> = raw.iter().map(|r| r.1).collect();
    let deg = (raw.len() - 2).min(4);
    let fit = |f: &dyn Fn(&P5State) -> C| {
        extrapolate_to_zero(&eps, &raw.iter().map(|r| f(&r.3)).collect::<Vec<_>>(), deg)
    };
    let th5 = raw[0].3.thetas;
    let limit = P5State {
        t5,
        z5: fit(&|p| p.z5)?,
        y5: fit(&|p| p.y5)?,
        u5: if kind == LimitKind::Two { ONE } else { fit(&|p| p.u5)? },
        thetas: th5,
    };
    let mut levels = Vec::with_capacity(raw.len());
    let mut theta_bookkeeping = 0.0_f64;
    for (n, e, state, p5) in raw {
        let predicted = predict(kind, &limit, e)?;
        theta_bookkeeping = theta_bookkeeping.max(theta_gap(&predicted.thetas6, &state.thetas));
        levels.push(LevelEstimate {
            n,
            eps: e,
            thetas6: state.thetas,
            p5,
            observed: observe(kind, &state, e, t5)?,
            predicted,
        });
    }
    let ns: Vec<usize> = levels.iter().map(|l| l.n).collect();
    let abs_eps: Vec<f64> = levels.iter().map(|l| l.eps.norm()).collect();
    let mut reports = Vec::new();
    for (i, name) in levels[0].observed.iter().map(|x| x.name.clone()).enumerate() {
        let errors: Vec<f64> = levels
            .iter()
            .map(|l| {
                let p = l.predicted.values[i].value;
                (l.observed[i].value - p).norm() / p.norm().max(1.0)
            })
            .collect();
        reports.push(ConvergenceReport::new(&name, &ns, &abs_eps, &errors)?);
    }
    Ok(Extraction {
        kind,
        t5,
        levels,
        limit,
        reports,
        theta_bookkeeping,
    })
}

/// The fitted P5 solution sampled on a `t5` grid and tested against the
/// P5 equation and `dσ5/dt5 = −z5`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct P5ResidualCheck {
    pub t5: C,
    pub h: f64,
    pub samples: Vec<P5State>,
    /// Residual of the P5 equation from 5-point differences of `y5`.
    pub residual: f64,
    /// `|dσ5/dt5 + z5|` from 5-point differences of `σ5`.
    pub sigma_defect: f64,
}

/// Builds ladders at `t5 + kh`, `k = −2..2` (in parallel), extracts the
/// limiting P5 point from each and differentiates the results.
pub fn p5_residual_check(
    base: &P6State,
    kind: LimitKind,
    t5: C,
    h: f64,
    n_max: usize,
    tol: f64,
) -> Result<P5ResidualCheck> {
    let samples: Vec<P5State> = (-2..=2)
        .into_par_iter()
        .map(|k| {
            let ladder = build_ladder(base, kind.pattern(), n_max, t5 + h * k as f64, tol)?;
            Ok(extract_p5_from_ladder(&ladder, kind)?.limit)
        })
        .collect::<Result<_>>()?;
    let d1 = |v: &[C]| (v[0] - v[1] * 8.0 + v[3] * 8.0 - v[4]) / (12.0 * h);
    let d2 = |v: &[C]| (-v[0] + v[1] * 16.0 - v[2] * 30.0 + v[3] * 16.0 - v[4]) / (12.0 * h * h);
    let ys: Vec<C> = samples.iter().map(|s| s.y5).collect();
    let residual = p5_residual(t5, ys[2], d1(&ys), d2(&ys), &samples[2].thetas);
    let sig: Vec<C> = samples.iter().map(sigma5).collect::<Result<_>>()?;
    let sigma_defect = (d1(&sig) + samples[2].z5).norm();
    Ok(P5ResidualCheck {
        t5,
        h,
        samples,
        residual,
        sigma_defect,
    })
}

fn need(m: &MonodromyPoint, name: &str) -> Result<Mat2C> {
    m.get(name)
        .ok_or_else(|| Error::InvalidInput(format!("monodromy point lacks M_{name}")))
}

fn require_non_integer(values: &[(&str, C)]) -> Result<()> {
    for (name, v) in values {
        if dist_to_int(*v) <= 1e-8 {
            return Err(Error::ConditionViolation(format!("{name} = {v} is an integer")));
        }
    }
    Ok(())
}

/// `l` with `cos πl = w`, `0 ≤ Re l < 1`, `l ≠ 0`.
fn solve_cos(w: C, what: &str) -> Result<C> {
    if (w + 1.0).norm() <= BRANCH_TOL {
        return Err(Error::ConditionViolation(format!("{what}: cos πl = −1")));
    }
    if (w - 1.0).norm() <= BRANCH_TOL {
        return Err(Error::ConditionViolation(format!("{what}: cos πl = 1 gives l = 0")));
    }
    let l = w.acos() / PI;
    if l.re >= 1.0 - 1e-12 {
        return Err(Error::ConditionViolation(format!(
            "{what}: no root with |Re l| < 1 (cos πl = {w})"
        )));
    }
    Ok(l)
}

fn p5_point(kind: MonodromyKind, matrices: [(&str, Mat2C); 3], thetas: &Thetas5) -> MonodromyPoint {
    let mut point = MonodromyPoint {
        kind,
        matrices: matrices.iter().map(|(n, m)| (n.to_string(), *m)).collect(),
        thetas: thetas.tuple(),
        residuals: Residuals::default(),
        meta: LoopMeta::default(),
    };
    point.residuals = validate(&point);
    point
}

/// Parameters of the first-limit monodromy map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitIMap {
    pub l: C,
    pub alpha: C,
    pub beta: C,
    pub d0_sq: C,
    pub d0: C,
    pub k: Mat2C,
    pub f0: C,
    pub cos_pi_l: C,
    pub theta5: Thetas5,
}

/// A first-limit map with the point it predicts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Output {
    pub map: LimitIMap,
    /// `M̃05, M̃15, M̃∞5` in the frame where `M̃∞5 = S_{−1}S_0 e^{πiΘ∞5σ3}`.
    pub point: MonodromyPoint,
    /// Stokes multipliers read off `M̃∞5`.
    pub stokes: StokesData,
    /// Deviation of `M̃∞5 e^{−πiΘ∞5σ3}` from the form `S_{−1}S_0`.
    pub stokes_residual: f64,
}

/// The monodromy data of the limiting P5 system for the first limit, for
/// both roots `±l`. `thetas` are the base values: `Θ6 = Θ16`, and
/// `Θ∞5 − Θ6 = Θ∞6`.
pub fn theorem1_map(m6: &MonodromyPoint, thetas: &Thetas6, f0: C) -> Result<[Theorem1Output; 2]> {
    let th6 = thetas.th1;
    let th_inf6 = thetas.thinf;
    let th_inf5 = th6 + th_inf6;
    require_non_integer(&[
        ("Θ06", thetas.th0),
        ("Θ6", th6),
        ("Θt6", thetas.tht),
        ("Θ∞5 − Θ6", th_inf6),
    ])?;
    if f0.norm() < DENOM_TOL {
        return Err(Error::ConditionViolation("f0 = 0".into()));
    }
    let m0 = need(m6, "0")?;
    let m1 = need(m6, "1")?;
    let mt = need(m6, "t")?;
    let m_inf = need(m6, "inf")?;
    if m1.a21.norm() <= 1e-10 * m1.norm() {
        return Err(Error::ConditionViolation("m21 of M16 vanishes".into()));
    }
    let sin_inf = (th_inf6 * PI).sin();
    let w = C::i() * m1.a11 * sin_inf + exp_ipi(-th_inf6) * (th6 * PI).cos();
    let l0 = solve_cos(w, "first limit")?;
    let theta5 = Thetas5::new(thetas.th0, -thetas.tht, th_inf5);
    let build = |l: C| -> Result<Theorem1Output> {
        let alpha = (l - th_inf5) / 2.0;
        let beta = -(l + th_inf5) / 2.0;
        let rg = rgamma_c(ONE - alpha) * rgamma_c(ONE - beta);
        if rg.norm() < 1e-300 {
            return Err(Error::ConditionViolation("Γ(1−α)Γ(1−β) is infinite".into()));
        }
        let d0_sq = m1.a21 / (C::i() * 2.0 * PI) / rg;
        let d0 = d0_sq.sqrt();
        let corner = rgamma_c(alpha) * rgamma_c(beta) * PI / sin_inf;
        let k = -(Mat2C::diag(f0, ONE / f0)
            * Mat2C::diag(exp_ipi(-th6 / 2.0), exp_ipi(th6 / 2.0))
            * Mat2C::upper(corner)
            * Mat2C::diag(d0, ONE / d0));
        let ki = k.inv()?;
        let mt5 = k * m0 * ki;
        let m15 = k * mt * ki;
        let minf5 = k * m_inf * m1 * ki;
        let e_inv = Mat2C::diag(exp_ipi(-th_inf5), exp_ipi(th_inf5));
        let n = minf5 * e_inv;
        let (a, b) = (n.a12, n.a21);
        let stokes_residual = (n.a22 - 1.0).norm().max((n.a11 - ONE - a * b).norm());
        let stokes = StokesData::from_multipliers(b, a * exp_ipi(th_inf5 * 2.0), th_inf5);
        Ok(Theorem1Output {
            map: LimitIMap {
                l,
                alpha,
                beta,
                d0_sq,
                d0,
                k,
                f0,
                cos_pi_l: w,
                theta5,
            },
            point: p5_point(
                MonodromyKind::P5Tilde,
                [("0", mt5), ("1", m15), ("inf", minf5)],
                &theta5,
            ),
            stokes,
            stokes_residual,
        })
    };
    Ok([build(l0)?, build(-l0)?])
}

/// Agreement between a predicted first-limit point and the monodromy data
/// computed from a P5 system, modulo a diagonal conjugation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StokesComparison {
    /// Relative mismatch of the invariant `s0 s1`.
    pub product_error: f64,
    /// Diagonal gauge `ρ` taking computed to predicted upper entries.
    pub gauge: C,
    /// Largest relative entrywise mismatch of the three matrices.
    pub point_error: f64,
}

impl StokesComparison {
    pub fn max(&self) -> f64 {
        self.product_error.max(self.point_error)
    }
}

/// Compares [`theorem1_map`] output with computed P5 monodromy. The
/// computed tilde point is moved to the frame of the prediction by `S_{−1}`;
/// the diagonal gauge left free by the `f0 d0` normalization is fitted from
/// the Stokes multipliers.
pub fn compare_theorem1(pred: &Theorem1Output, computed: &M5Report) -> Result<StokesComparison> {
    let sc = &computed.stokes;
    let sp = &pred.stokes;
    let prod_c = sc.s0 * sc.s1;
    let prod_p = sp.s0 * sp.s1;
    let product_error = (prod_p - prod_c).norm() / prod_c.norm().max(1.0);
    let upper = nonzero(sc.s1, "computed s1")?;
    let lower = nonzero(sp.s0, "predicted s0")?;
    let gauge = (sp.s1 / upper * (sc.s0 / lower)).sqrt();
    let g = if (sp.s1 / upper - gauge).norm() <= (sp.s1 / upper + gauge).norm() {
        gauge
    } else {
        -gauge
    };
    let sm = sc.s(-1);
    let smi = sm.inv()?;
    let mut point_error = 0.0_f64;
    for name in ["0", "1", "inf"] {
        let p = need(&pred.point, name)?;
        let m = sm * need(&computed.tilde, name)? * smi;
        let moved = Mat2C::new(m.a11, m.a12 * g, m.a21 / g, m.a22);
        point_error = point_error.max(moved.dist(&p) / p.norm().max(1.0));
    }
    Ok(StokesComparison {
        product_error,
        gauge: g,
        point_error,
    })
}

/// Parameters of the second-limit monodromy map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitIIMap {
    pub t: C,
    pub l: C,
    pub alpha: C,
    pub beta: C,
    pub s0: Mat2C,
    pub s1: Mat2C,
    /// `K` and `−K`.
    pub k: [Mat2C; 2],
    pub case_tag: CaseTag,
    pub theta5: Thetas5,
    /// Residual of the two conjugation conditions defining `K`.
    pub k_residual: f64,
}

/// A second-limit map with the point it predicts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Output {
    pub map: LimitIIMap,
    /// `M05, M15, M∞5` with `M∞5 = S0 S1 e^{πiΘ∞5σ3}`.
    pub point: MonodromyPoint,
    pub stokes: StokesData,
}

/// The monodromy data of the limiting P5 system for the second limit, for
/// both roots `±l`. `thetas` are the base values: `Θ6 = Θt6`,
/// `Θ∞5 = Θt6 + Θ06`.
pub fn theorem2_map(m6: &MonodromyPoint, thetas: &Thetas6) -> Result<[Theorem2Output; 2]> {
    let th6 = thetas.tht;
    let th_inf5 = thetas.tht + thetas.th0;
    require_non_integer(&[
        ("Θ06", thetas.th0),
        ("Θ16", thetas.th1),
        ("Θ∞6", thetas.thinf),
    ])?;
    let m0 = need(m6, "0")?;
    let m1 = need(m6, "1")?;
    let mt = need(m6, "t")?;
    let m_inf = need(m6, "inf")?;
    let r0 = exp_ipi(th_inf5 - th6);
    let r1 = exp_ipi(th6);
    let t = ((mt - r1) * (m0 - ONE / r0)).trace();
    let cond = (mt - ONE / r1) * (m0 - ONE / r0);
    if cond.norm() <= 1e-10 * (1.0 + mt.norm()) * (1.0 + m0.norm()) {
        return Err(Error::ConditionViolation(
            "(Mt6 − e^{−πiΘ6})(M06 − e^{−πi(Θ∞5−Θ6)}) vanishes".into(),
        ));
    }
    let l0 = solve_cos((th_inf5 * PI).cos() - t / 2.0, "second limit")?;
    let theta5 = Thetas5::new(thetas.thinf, thetas.th1, th_inf5);
    let problem = PairProblem::new(m0, mt, r0, r1)?;
    let e = Mat2C::diag(exp_ipi(th_inf5), exp_ipi(-th_inf5));
    let e6 = Mat2C::diag(r1, ONE / r1);
    let e6i = Mat2C::diag(ONE / r1, r1);
    let build = |l: C| -> Result<Theorem2Output> {
        let alpha = -(th_inf5 - l) / 2.0;
        let beta = -(th_inf5 + l) / 2.0;
        require_non_integer(&[("α", alpha), ("β", beta), ("l", l)])?;
        let s0c = C::new(0.0, -2.0 * PI) * rgamma_c(ONE - alpha) * rgamma_c(ONE - beta);
        let s1c = C::new(0.0, -2.0 * PI) * exp_ipi(th_inf5) * rgamma_c(alpha) * rgamma_c(beta);
        let s0 = Mat2C::lower(s0c);
        let s1 = Mat2C::upper(s1c);
        let [sol, neg] = triangularizer::solve_both(&problem, Some(s0c * r1))?;
        let k = sol.k.ok_or_else(|| Error::UnsolvablePair("no K".into()))?;
        let ki = k.inv()?;
        let target_t = s0 * e6;
        let target_0 = e6i * s1 * e;
        let k_residual = ((k * mt * ki).dist(&target_t) / target_t.norm().max(1.0))
            .max((k * m0 * ki).dist(&target_0) / target_0.norm().max(1.0));
        let m05 = k * m_inf * ki;
        let m15 = k * m1 * ki;
        let stokes = StokesData::from_multipliers(s0c, s1c, th_inf5);
        Ok(Theorem2Output {
            map: LimitIIMap {
                t,
                l,
                alpha,
                beta,
                s0,
                s1,
                k: [k, neg.k.unwrap_or(-k)],
                case_tag: sol.case_tag,
                theta5,
                k_residual,
            },
            point: p5_point(
                MonodromyKind::P5,
                [("0", m05), ("1", m15), ("inf", stokes.m_inf(0))],
                &theta5,
            ),
            stokes,
        })
    };
    Ok([build(l0)?, build(-l0)?])
}

/// The state seen in the variable `λ' = t6/λ`: poles `1` and `t6` trade
/// places, `0` and `∞` trade places, and the residues are conjugated by the
/// diagonalizer of `A06` so that the new residue at infinity is diagonal.
/// `Θ` become `(Θ∞, Θt, Θ1, Θ0)`.
pub fn mobius_dual(state: &P6State) -> Result<P6State> {
    let th = state.thetas;
    if th.th0.norm() < DENOM_TOL {
        return Err(Error::ThetaZero("Θ0 = 0: A0 is not diagonalizable".into()));
    }
    let r = jm_diagonalizer(state.z[NU0], state.u[NU0], th.th0, ONE);
    let ri = r.inv()?;
    let g = |m: Mat2C| ri * m * r;
    let a_inf = Mat2C::sigma3() * (th.thinf / 2.0);
    let thetas = Thetas6::new(th.thinf, th.tht, th.th1, th.th0);
    P6State::from_residues(
        state.t6,
        [g(a_inf), g(state.residue(NUT)), g(state.residue(NU1))],
        thetas,
        [ONE; 3],
    )
}

/// Gauge-invariant comparison of two P6 states: the `z` coordinates and
/// the ratios `u_ν/u_t`.
pub fn state_mismatch(a: &P6State, b: &P6State) -> f64 {
    let rel = |x: C, y: C| (x - y).norm() / y.norm().max(1.0);
    let mut worst = 0.0_f64;
    for i in 0..3 {
        worst = worst.max(rel(a.z[i], b.z[i]));
        worst = worst.max(rel(a.u[i] / a.u[NUT], b.u[i] / b.u[NUT]));
    }
    worst
}

/// Result of comparing a first-limit and a second-limit ladder built from
/// dual base data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    /// Deepest common ladder index `n`.
    pub n: usize,
    /// `Θ` table mismatch between the two bases.
    pub theta_table: f64,
    /// Largest gauge-invariant mismatch between the dual of a first-limit
    /// state and the second-limit state, over all common even levels.
    pub residue_mismatch: f64,
    /// `|z5^II − z5^I|` (relative) at the deepest common level.
    pub z5_mismatch: f64,
    /// Relative mismatch of `y5 (z5 + (Θ05 − Θ15 + Θ∞5)/2)` at the deepest
    /// common level.
    pub y5_mismatch: f64,
    /// The same two quantities for the extrapolated limits.
    pub limit_z5_mismatch: f64,
    pub limit_y5_mismatch: f64,
    pub pass: bool,
}

fn y5_rescaled(p: &P5State) -> C {
    let Thetas5 { th0, th1, thinf } = p.thetas;
    p.y5 * (p.z5 + (th0 - th1 + thinf) / 2.0)
}

/// Checks that two ladders realize the same limit: ladder 2 (second limit)
/// must start from the dual of the base of ladder 1 (first limit).
pub fn equivalence_check(
    ladder1: &GsdLadder,
    ext1: &Extraction,
    ladder2: &GsdLadder,
    ext2: &Extraction,
) -> Result<EquivalenceReport> {
    if ext1.kind != LimitKind::OneA || ext2.kind != LimitKind::Two {
        return Err(Error::InvalidInput("need a 1a and a 2 extraction".into()));
    }
    let (b1, b2) = (ladder1.base.thetas, ladder2.base.thetas);
    let theta_table = theta_gap(&Thetas6::new(b1.thinf, b1.tht, b1.th1, b1.th0), &b2);
    let n = ladder1.epsilons.len().min(ladder2.epsilons.len()) - 1;
    let mut residue_mismatch = 0.0_f64;
    for k in 1..=n {
        let (r1, r2) = match (ladder1.even(k), ladder2.even(k)) {
            (Some(a), Some(b)) => (a, b),
            _ => break,
        };
        residue_mismatch = residue_mismatch.max(state_mismatch(&mobius_dual(&r1.state)?, &r2.state));
    }
    let level = |e: &Extraction| {
        e.levels
            .iter()
            .find(|l| l.n == n)
            .map(|l| l.p5)
            .ok_or_else(|| Error::InvalidInput(format!("extraction lacks level {n}")))
    };
    let (p1, p2) = (level(ext1)?, level(ext2)?);
    let rel = |x: C, y: C| (x - y).norm() / y.norm().max(1.0);
    let z5_mismatch = rel(p2.z5, p1.z5);
    let y5_mismatch = rel(y5_rescaled(&p2), y5_rescaled(&p1));
    let limit_z5_mismatch = rel(ext2.limit.z5, ext1.limit.z5);
    let limit_y5_mismatch = rel(y5_rescaled(&ext2.limit), y5_rescaled(&ext1.limit));
    let pass = [
        theta_table,
        residue_mismatch,
        z5_mismatch,
        y5_mismatch,
        limit_z5_mismatch,
        limit_y5_mismatch,
    ]
    .iter()
    .all(|&x| x <= MATCH_TOL);
    let report = EquivalenceReport {
        n,
        theta_table,
        residue_mismatch,
        z5_mismatch,
        y5_mismatch,
        limit_z5_mismatch,
        limit_y5_mismatch,
        pass,
    };
    if !report.pass {
        return Err(Error::MismatchBeyondTolerance(format!("{report:?}")));
    }
    Ok(report)
}

/// CSV of a convergence study: one row per level, with the error of every
/// reported quantity.
pub fn convergence_csv(ext: &Extraction) -> String {
    let mut out = String::from("n,eps");
    for r in &ext.reports {
        out.push(',');
        out.push_str(&csv_field(&r.quantity));
    }
    out.push('\n');
    let levels = &ext.reports.first().map(|r| r.levels.clone()).unwrap_or_default();
    for (i, n) in levels.iter().enumerate() {
        out.push_str(&format!("{n},{:e}", ext.reports[0].eps[i]));
        for r in &ext.reports {
            out.push_str(&format!(",{:e}", r.errors[i]));
        }
        out.push('\n');
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
