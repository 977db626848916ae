//! Rational 2×2 systems in the spectral variable, numerical continuation of
//! their fundamental solutions and monodromy data.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::algebra::{c, eig2, exp_ipi, Mat2C, C, ONE, ZERO};
use crate::error::{Error, Result};
use crate::ode::{dopri5, OdeOptions};

/// Default tolerance for path integration.
pub const DEFAULT_TOL: f64 = 1e-10;

/// A simple pole of the coefficient matrix.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Pole {
    pub position: C,
    pub residue: Mat2C,
}

/// `dΨ/dλ = (poly_part + Σ residue/(λ − position)) Ψ`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearSystem {
    pub poles: Vec<Pole>,
    pub poly_part: Mat2C,
    pub theta_inf: C,
}

impl LinearSystem {
    /// Builds a system and checks that the residues are traceless.
    pub fn new(poles: Vec<Pole>, poly_part: Mat2C, theta_inf: C) -> Result<Self> {
        for p in &poles {
            let tr = p.residue.trace().norm();
            if tr > 1e-10 * (1.0 + p.residue.norm()) {
                return Err(Error::ConstraintViolation(format!(
                    "residue at {} has trace {tr:e}",
                    p.position
                )));
            }
        }
        Ok(LinearSystem {
            poles,
            poly_part,
            theta_inf,
        })
    }

    /// Fuchsian system with poles only, no polynomial part.
    pub fn fuchsian(poles: Vec<(C, Mat2C)>, theta_inf: C) -> Result<Self> {
        Self::new(
            poles
                .into_iter()
                .map(|(position, residue)| Pole { position, residue })
                .collect(),
            Mat2C::zero(),
            theta_inf,
        )
    }

    pub fn coeff(&self, lam: C) -> Mat2C {
        let mut a = self.poly_part;
        for p in &self.poles {
            a = a + p.residue / (lam - p.position);
        }
        a
    }

    pub fn residue_sum(&self) -> Mat2C {
        self.poles
            .iter()
            .fold(Mat2C::zero(), |acc, p| acc + p.residue)
    }

    /// Characteristic length: max(1, largest pole modulus).
    pub fn scale(&self) -> f64 {
        self.poles
            .iter()
            .fold(1.0_f64, |m, p| m.max(p.position.norm()))
    }

    /// Smallest distance between two distinct poles.
    pub fn min_gap(&self) -> f64 {
        let mut g = f64::INFINITY;
        for (i, p) in self.poles.iter().enumerate() {
            for q in &self.poles[i + 1..] {
                g = g.min((p.position - q.position).norm());
            }
        }
        g
    }

    pub fn residue_at(&self, pole: C) -> Result<Mat2C> {
        self.poles
            .iter()
            .find(|p| (p.position - pole).norm() <= 1e-12 * (1.0 + pole.norm()))
            .map(|p| p.residue)
            .ok_or_else(|| Error::InvalidInput(format!("{pole} is not a pole of the system")))
    }
}

/// One piece of a path in the λ-plane.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum Segment {
    Line { from: C, to: C },
    /// Arc `center + radius·e^{i(start + s·sweep)}`, `s ∈ [0, 1]`.
    Arc {
        center: C,
        radius: f64,
        start: f64,
        sweep: f64,
    },
}

impl Segment {
    pub fn point(&self, s: f64) -> C {
        match *self {
            Segment::Line { from, to } => from + (to - from) * s,
            Segment::Arc {
                center,
                radius,
                start,
                sweep,
            } => center + C::from_polar(radius, start + s * sweep),
        }
    }

    pub fn velocity(&self, s: f64) -> C {
        match *self {
            Segment::Line { from, to } => to - from,
            Segment::Arc {
                radius,
                start,
                sweep,
                ..
            } => C::from_polar(radius * sweep, start + s * sweep) * c(0.0, 1.0),
        }
    }

    pub fn start(&self) -> C {
        self.point(0.0)
    }

    pub fn end(&self) -> C {
        self.point(1.0)
    }

    pub fn length(&self) -> f64 {
        match *self {
            Segment::Line { from, to } => (to - from).norm(),
            Segment::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    /// Distance from `p` to the segment.
    pub fn distance_to(&self, p: C) -> f64 {
        match *self {
            Segment::Line { from, to } => {
                let d = to - from;
                let l2 = d.norm_sqr();
                if l2 == 0.0 {
                    return (p - from).norm();
                }
                let s = (((p - from) * d.conj()).re / l2).clamp(0.0, 1.0);
                (p - from - d * s).norm()
            }
            Segment::Arc {
                center,
                radius,
                sweep,
                ..
            } => {
                if sweep.abs() >= 2.0 * PI {
                    return ((p - center).norm() - radius).abs();
                }
                let n = 512;
                // sampled; the radial gap is a lower bound
                (0..=n)
                    .map(|k| (self.point(k as f64 / n as f64) - p).norm())
                    .fold(f64::INFINITY, f64::min)
                    .max(((p - center).norm() - radius).abs())
            }
        }
    }
}

/// A piecewise path; `ccw` records the intended loop orientation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Path {
    pub base_point: C,
    pub segments: Vec<Segment>,
    pub ccw: bool,
}

impl Path {
    pub fn line(from: C, to: C) -> Self {
        Path {
            base_point: from,
            segments: vec![Segment::Line { from, to }],
            ccw: true,
        }
    }

    /// Spoke from `base` to a circle of `radius` around `center`, one full
    /// turn, spoke back.
    pub fn lasso(base: C, center: C, radius: f64, ccw: bool) -> Self {
        let dir = base - center;
        let start = dir.arg();
        let touch = center + C::from_polar(radius, start);
        let sweep = if ccw { 2.0 * PI } else { -2.0 * PI };
        Path {
            base_point: base,
            segments: vec![
                Segment::Line {
                    from: base,
                    to: touch,
                },
                Segment::Arc {
                    center,
                    radius,
                    start,
                    sweep,
                },
                Segment::Line {
                    from: touch,
                    to: base,
                },
            ],
            ccw,
        }
    }

    /// Full circle around `center` through `base`.
    pub fn circle_through(base: C, center: C, ccw: bool) -> Self {
        let d = base - center;
        Path {
            base_point: base,
            segments: vec![Segment::Arc {
                center,
                radius: d.norm(),
                start: d.arg(),
                sweep: if ccw { 2.0 * PI } else { -2.0 * PI },
            }],
            ccw,
        }
    }

    /// Traverse `self` then `other`.
    pub fn then(mut self, other: &Path) -> Self {
        self.segments.extend_from_slice(&other.segments);
        self
    }

    pub fn reversed(&self) -> Self {
        let segments = self
            .segments
            .iter()
            .rev()
            .map(|s| match *s {
                Segment::Line { from, to } => Segment::Line { from: to, to: from },
                Segment::Arc {
                    center,
                    radius,
                    start,
                    sweep,
                } => Segment::Arc {
                    center,
                    radius,
                    start: start + sweep,
                    sweep: -sweep,
                },
            })
            .collect::<Vec<_>>();
        Path {
            base_point: segments.first().map_or(self.base_point, |s| s.start()),
            segments,
            ccw: !self.ccw,
        }
    }

    pub fn end_point(&self) -> C {
        self.segments.last().map_or(self.base_point, |s| s.end())
    }

    /// Polyline sampling of the path, for reports and plotting.
    pub fn vertices(&self, per_arc: usize) -> Vec<C> {
        let mut out = vec![self.base_point];
        for s in &self.segments {
            match s {
                Segment::Line { to, .. } => out.push(*to),
                Segment::Arc { .. } => {
                    for k in 1..=per_arc {
                        out.push(s.point(k as f64 / per_arc as f64));
                    }
                }
            }
        }
        out
    }

    pub fn min_pole_distance(&self, sys: &LinearSystem) -> f64 {
        let mut d = f64::INFINITY;
        for s in &self.segments {
            for p in &sys.poles {
                d = d.min(s.distance_to(p.position));
            }
        }
        d
    }
}

fn to_arr(m: &Mat2C) -> [C; 4] {
    [m.a11, m.a12, m.a21, m.a22]
}

fn from_arr(a: &[C; 4]) -> Mat2C {
    Mat2C::new(a[0], a[1], a[2], a[3])
}

/// Transfer matrix of one segment: `Ψ(end) = T·Ψ(start)`.
pub fn transfer_segment(sys: &LinearSystem, seg: &Segment, tol: f64) -> Result<Mat2C> {
    let opts = OdeOptions::with_tol(tol);
    let (y, _) = dopri5(
        |s, y: &[C; 4]| {
            let m = sys.coeff(seg.point(s)) * seg.velocity(s) * from_arr(y);
            Ok(to_arr(&m))
        },
        0.0,
        1.0,
        to_arr(&Mat2C::identity()),
        &opts,
    )?;
    Ok(from_arr(&y))
}

/// Transfer matrix along a whole path: `Ψ(end) = T·Ψ(start)`.
pub fn transfer(sys: &LinearSystem, path: &Path, tol: f64) -> Result<Mat2C> {
    if !(1e-13..=1e-6).contains(&tol) {
        return Err(Error::InvalidInput(format!(
            "tolerance {tol:e} outside [1e-13, 1e-6]"
        )));
    }
    let d = path.min_pole_distance(sys);
    if d <= 1e-3 * sys.scale() {
        return Err(Error::PoleProximity(format!(
            "path passes within {d:e} of a pole"
        )));
    }
    let mut t = Mat2C::identity();
    for seg in &path.segments {
        t = transfer_segment(sys, seg, tol)? * t;
    }
    Ok(t)
}

/// Frobenius data at a regular singularity `ν`:
/// `Ψ = R (Σ Φk (λ−ν)^k) (λ−ν)^{(Θν/2)σ3}` with unimodular `R`,
/// `R⁻¹ A_ν R = (Θν/2)σ3` and `Φ0 = I`.
#[derive(Debug, Clone)]
pub struct LocalSeries {
    pub pole: C,
    pub frame: Mat2C,
    pub theta: C,
    pub coeffs: Vec<Mat2C>,
}

impl LocalSeries {
    /// Evaluates the series with principal-branch powers of `λ − ν`.
    pub fn eval(&self, lam: C) -> Mat2C {
        let z = lam - self.pole;
        let mut sum = Mat2C::zero();
        let mut p = ONE;
        for f in &self.coeffs {
            sum = sum + *f * p;
            p *= z;
        }
        self.frame * sum * Mat2C::exp_sigma3(self.theta * 0.5 * z.ln())
    }
}

/// Builds the local series with `n_terms` corrections.
///
/// `theta_hint` selects which residue eigenvalue plays `+Θν/2`; without it
/// the ordering of [`eig2`] is used.
pub fn local_series(
    sys: &LinearSystem,
    pole: C,
    theta_hint: Option<C>,
    n_terms: usize,
) -> Result<LocalSeries> {
    let a = sys.residue_at(pole)?;
    let ep = eig2(&a).map_err(|_| Error::ResonantExponent("residue eigenvalues coalesce".into()))?;
    let mut swap = false;
    if let Some(th) = theta_hint {
        swap = (ep.values.1 - th / 2.0).norm() < (ep.values.0 - th / 2.0).norm();
    }
    let (h, v1, v2) = if swap {
        (ep.values.1, ep.vectors.1, ep.vectors.0)
    } else {
        (ep.values.0, ep.vectors.0, ep.vectors.1)
    };
    let theta = h * 2.0;
    if crate::algebra::dist_to_int(theta) < 1e-6 {
        return Err(Error::ResonantExponent(format!("Θ = {theta}")));
    }
    let det = Mat2C::from_cols(v1, v2).det();
    let r = Mat2C::from_cols(v1, [v2[0] / det, v2[1] / det]);
    let rinv = r.inv()?;
    // Taylor coefficients at ν of the rest of A, in the diagonal gauge
    let others: Vec<&Pole> = sys
        .poles
        .iter()
        .filter(|p| (p.position - pole).norm() > 1e-12 * (1.0 + pole.norm()))
        .collect();
    let b: Vec<Mat2C> = (0..n_terms)
        .map(|j| {
            let mut m = if j == 0 { sys.poly_part } else { Mat2C::zero() };
            for p in &others {
                let d = pole - p.position;
                let sgn = if j % 2 == 0 { 1.0 } else { -1.0 };
                m = m + p.residue * (sgn / d.powu(j as u32 + 1));
            }
            rinv * m * r
        })
        .collect();
    // kΦk + [Φk, (Θ/2)σ3] = Σ_{j<k} B_j Φ_{k−1−j}
    let mut coeffs = vec![Mat2C::identity()];
    for k in 1..=n_terms {
        let mut rhs = Mat2C::zero();
        for j in 0..k {
            rhs = rhs + b[j] * coeffs[k - 1 - j];
        }
        let kf = c(k as f64, 0.0);
        coeffs.push(Mat2C::new(
            rhs.a11 / kf,
            rhs.a12 / (kf - theta),
            rhs.a21 / (kf + theta),
            rhs.a22 / kf,
        ));
    }
    Ok(LocalSeries {
        pole,
        frame: r,
        theta,
        coeffs,
    })
}

/// Local frame `Ψ0ν` (unimodular), exponent `Θν` and the first correction
/// `Ψ1ν`, so that `Ψ ≈ Ψ0ν(I + Ψ1ν(λ−ν))(λ−ν)^{(Θν/2)σ3}` near `ν`.
pub fn local_frame(
    sys: &LinearSystem,
    pole: C,
    theta_hint: Option<C>,
) -> Result<(Mat2C, C, Mat2C)> {
    let ls = local_series(sys, pole, theta_hint, 1)?;
    Ok((ls.frame, ls.theta, ls.coeffs[1]))
}

/// Coefficients `Φk` of the convergent expansion
/// `Ψ = (Σ Φk λ^{−k}) λ^{Lσ3}` at infinity of a Fuchsian system whose
/// residues sum to `Lσ3`.
pub fn infinity_series_coeffs(sys: &LinearSystem, l: C, n_terms: usize) -> Result<Vec<Mat2C>> {
    if sys.poly_part.max_abs() != 0.0 {
        return Err(Error::InvalidInput(
            "series at infinity needs a Fuchsian system".into(),
        ));
    }
    if crate::algebra::dist_to_int(l * 2.0) < 1e-6 {
        return Err(Error::ResonantExponent(format!("2L = {}", l * 2.0)));
    }
    // B_j = Σ ν^{j−1} A_ν, the Taylor coefficients of A at infinity
    let b: Vec<Mat2C> = (0..=n_terms + 1)
        .map(|j| {
            if j == 0 {
                return Mat2C::zero();
            }
            sys.poles.iter().fold(Mat2C::zero(), |acc, p| {
                acc + p.residue * p.position.powu(j as u32 - 1)
            })
        })
        .collect();
    let mut phi = vec![Mat2C::identity()];
    for k in 1..=n_terms {
        let mut r = Mat2C::zero();
        for j in 2..=k + 1 {
            r = r + b[j] * phi[k + 1 - j];
        }
        let kf = c(k as f64, 0.0);
        phi.push(Mat2C::new(
            -r.a11 / kf,
            r.a12 / (-kf - l * 2.0),
            r.a21 / (-kf + l * 2.0),
            -r.a22 / kf,
        ));
    }
    Ok(phi)
}

/// `Ψ(λ)` from the expansion at infinity with principal-branch powers.
/// Requires `|λ|` beyond the largest pole modulus; terms are summed until
/// they fall below machine precision.
pub fn infinity_frame(sys: &LinearSystem, l: C, lam: C) -> Result<Mat2C> {
    let rho = sys
        .poles
        .iter()
        .fold(0.0_f64, |m, p| m.max(p.position.norm()));
    let q = rho / lam.norm();
    if q >= 0.5 {
        return Err(Error::InvalidInput(format!(
            "anchor {lam} too close to the poles"
        )));
    }
    let n = ((-36.0 / q.max(1e-300).ln()).ceil() as usize + 8).clamp(8, 400);
    let phi = infinity_series_coeffs(sys, l, n)?;
    let inv = ONE / lam;
    let mut sum = Mat2C::zero();
    let mut p = ONE;
    for f in &phi {
        sum = sum + *f * p;
        p *= inv;
    }
    let e = (l * lam.ln()).exp();
    Ok(sum * Mat2C::diag(e, ONE / e))
}

/// Which monodromy presentation a point belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MonodromyKind {
    P6,
    P5,
    P5Tilde,
}

/// Named formal monodromy exponents.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ThetaTuple(pub Vec<(String, C)>);

impl ThetaTuple {
    pub fn get(&self, name: &str) -> Option<C> {
        self.0.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    /// Errors if any of `names` is within 1e−6 of an integer.
    pub fn require_non_integer(&self, names: &[&str]) -> Result<()> {
        for n in names {
            let v = self
                .get(n)
                .ok_or_else(|| Error::InvalidInput(format!("missing Θ_{n}")))?;
            if crate::algebra::dist_to_int(v) <= 1e-6 {
                return Err(Error::NonGenericParameters(format!("Θ_{n} = {v} is an integer")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub det: f64,
    pub cyclic: f64,
    pub trace: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.det.max(self.cyclic).max(self.trace)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

/// Loop geometry used to produce a point, for reruns.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoopMeta {
    pub base_point: C,
    pub radii: Vec<(String, f64)>,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonodromyPoint {
    pub kind: MonodromyKind,
    pub matrices: Vec<(String, Mat2C)>,
    pub thetas: ThetaTuple,
    pub residuals: Residuals,
    pub meta: LoopMeta,
}

impl MonodromyPoint {
    pub fn get(&self, name: &str) -> Option<Mat2C> {
        self.matrices
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| *m)
    }

    fn need(&self, name: &str) -> Mat2C {
        self.get(name).unwrap_or_else(Mat2C::zero)
    }
}

/// Determinant, cyclic-relation and trace residuals of a point.
///
/// Trace rules are checked for every matrix with a matching Θ, except
/// `M∞` of the P5 kinds whose trace involves the Stokes data.
pub fn validate(mp: &MonodromyPoint) -> Residuals {
    let det = mp
        .matrices
        .iter()
        .map(|(_, m)| (m.det() - ONE).norm())
        .fold(0.0, f64::max);
    let id = Mat2C::identity();
    let prod = match mp.kind {
        MonodromyKind::P6 => mp.need("inf") * mp.need("1") * mp.need("t") * mp.need("0"),
        MonodromyKind::P5 => mp.need("0") * mp.need("1") * mp.need("inf"),
        MonodromyKind::P5Tilde => mp.need("inf") * mp.need("1") * mp.need("0"),
    };
    let cyclic = prod.dist(&id);
    let trace = mp
        .matrices
        .iter()
        .filter(|(n, _)| !(n == "inf" && mp.kind != MonodromyKind::P6))
        .filter_map(|(n, m)| {
            mp.thetas
                .get(n)
                .map(|th| (m.trace() - (exp_ipi(th) + exp_ipi(-th))).norm())
        })
        .fold(0.0, f64::max);
    Residuals { det, cyclic, trace }
}

/// Monodromy of each loop in the frame `psi0` at the base point:
/// `M = Ψ(λ0)⁻¹ T Ψ(λ0)`.
pub fn monodromy_in_frame(
    sys: &LinearSystem,
    loop_path: &Path,
    psi0: &Mat2C,
    tol: f64,
) -> Result<Mat2C> {
    let t = transfer(sys, loop_path, tol)?;
    Ok(psi0.inv()? * t * *psi0)
}

/// Base point of the P6 loops: above the real axis, clear of all poles.
pub fn p6_base_point(t6: C) -> C {
    (t6 + ONE) / 2.0 + c(0.0, 1.0_f64.max(t6.norm() + 1.0))
}

/// Ray on which the frame at infinity is anchored.
pub const ANCHOR_ARG: f64 = PI / 2.0 - 0.1;

/// The normalized solution at `λ0`, continued from an anchor at
/// `4·scale·e^{i·ANCHOR_ARG}` along a straight segment.
pub fn anchored_frame(sys: &LinearSystem, l: C, lambda0: C, tol: f64) -> Result<Mat2C> {
    let anchor = C::from_polar(4.0 * sys.scale(), ANCHOR_ARG);
    let psi_a = infinity_frame(sys, l, anchor)?;
    let t = transfer(sys, &Path::line(anchor, lambda0), tol)?;
    Ok(t * psi_a)
}

/// Loop radius for a pole: a third of the distance to the nearest other
/// pole, capped so that the circle stays inside the base point's reach.
fn loop_radius(sys: &LinearSystem, pole: C, base: C) -> f64 {
    let mut g = (base - pole).norm() / 2.0;
    for p in &sys.poles {
        let d = (p.position - pole).norm();
        if d > 0.0 {
            g = g.min(d / 3.0);
        }
    }
    g
}

/// Full P6 monodromy data of a Fuchsian system with poles `0, 1, t6`,
/// normalized at infinity.
pub fn monodromy_point_p6(sys: &LinearSystem, t6: C, tol: f64) -> Result<MonodromyPoint> {
    let base = p6_base_point(t6);
    let l = -sys.theta_inf / 2.0;
    let psi0 = anchored_frame(sys, l, base, tol)?;
    let mut matrices = Vec::new();
    let mut radii = Vec::new();
    let mut thetas = Vec::new();
    for (name, pos) in [("0", ZERO), ("t", t6), ("1", ONE)] {
        let r = loop_radius(sys, pos, base);
        let m = monodromy_in_frame(sys, &Path::lasso(base, pos, r, true), &psi0, tol)?;
        let a = sys.residue_at(pos)?;
        // Θν/2 = √(−det A_ν), sign fixed by matching the trace
        let th = (-a.det()).sqrt() * 2.0;
        thetas.push((name.to_string(), th));
        matrices.push((name.to_string(), m));
        radii.push((name.to_string(), r));
    }
    let center = (t6 + ONE) / 2.0;
    let m_inf = monodromy_in_frame(sys, &Path::circle_through(base, center, false), &psi0, tol)?;
    matrices.push(("inf".to_string(), m_inf));
    thetas.push(("inf".to_string(), sys.theta_inf));
    radii.push(("inf".to_string(), (base - center).norm()));
    let mut mp = MonodromyPoint {
        kind: MonodromyKind::P6,
        matrices,
        thetas: ThetaTuple(thetas),
        residuals: Residuals::default(),
        meta: LoopMeta {
            base_point: base,
            radii,
            tol,
        },
    };
    mp.residuals = validate(&mp);
    if mp.residuals.cyclic > 1e-5 {
        return Err(Error::CyclicViolation(mp.residuals.cyclic));
    }
    Ok(mp)
}
