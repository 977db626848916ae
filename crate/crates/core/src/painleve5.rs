//! Fifth Painlevé side: the system with regular points `0, 1` and an
//! irregular point at infinity, its isomonodromy flow, canonical sector
//! solutions, Stokes multipliers and monodromy data.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{c, exp_ipi, fmt_csv, Mat2C, C, ONE, ZERO};
use crate::error::{Error, Result};
use crate::fuchsian::{
    monodromy_in_frame, transfer, validate, LinearSystem, LoopMeta, MonodromyKind,
    MonodromyPoint, Path, Pole, Residuals, Segment, ThetaTuple,
};
use crate::ode::{dopri5, OdeOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thetas5 {
    pub th0: C,
    pub th1: C,
    pub thinf: C,
}

impl Thetas5 {
    pub fn new(th0: C, th1: C, thinf: C) -> Self {
        Thetas5 { th0, th1, thinf }
    }

    pub fn tuple(&self) -> ThetaTuple {
        ThetaTuple(vec![
            ("0".into(), self.th0),
            ("1".into(), self.th1),
            ("inf".into(), self.thinf),
        ])
    }

    /// `(α5, β5, γ5, δ5)` of the fifth Painlevé equation.
    pub fn p5_coefficients(&self) -> (C, C, C, C) {
        let (a, b, i) = (self.th0, self.th1, self.thinf);
        (
            ((a - b + i) / 2.0).powu(2) * 0.5,
            -((a - b - i) / 2.0).powu(2) * 0.5,
            ONE - a - b,
            c(-0.5, 0.0),
        )
    }
}

/// Point of the P5 system in the `(u5, z5, y5)` coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct P5State {
    pub t5: C,
    pub u5: C,
    pub z5: C,
    pub y5: C,
    pub thetas: Thetas5,
}

impl P5State {
    pub fn a05(&self) -> Mat2C {
        let (z, u, th0) = (self.z5, self.u5, self.thetas.th0);
        Mat2C::new(z + th0 / 2.0, -u * (z + th0), z / u, -z - th0 / 2.0)
    }

    pub fn a15(&self) -> Mat2C {
        let Thetas5 { th0, th1, thinf } = self.thetas;
        let (z, u, y) = (self.z5, self.u5, self.y5);
        let d = z + (th0 + thinf) / 2.0;
        Mat2C::new(
            -d,
            u * y * (z + (th0 - th1 + thinf) / 2.0),
            -(z + (th0 + th1 + thinf) / 2.0) / (u * y),
            d,
        )
    }

    /// Recovers `(z5, u5, y5)` from residues with the given `Θ` signs.
    pub fn from_residues(t5: C, a0: &Mat2C, a1: &Mat2C, thetas: Thetas5) -> Result<Self> {
        let Thetas5 { th0, th1, thinf } = thetas;
        let z = a0.a11 - th0 / 2.0;
        let u = if (z + th0).norm() >= z.norm() {
            -a0.a12 / (z + th0)
        } else {
            z / a0.a21
        };
        let p = z + (th0 - th1 + thinf) / 2.0;
        let q = z + (th0 + th1 + thinf) / 2.0;
        let y = if p.norm() >= q.norm() {
            a1.a12 / (u * p)
        } else {
            -q / (u * a1.a21)
        };
        if !(u.is_finite() && y.is_finite()) || u.norm() < 1e-300 || y.norm() < 1e-300 {
            return Err(Error::SingularParametrization(format!("u5 = {u}, y5 = {y}")));
        }
        Ok(P5State {
            t5,
            u5: u,
            z5: z,
            y5: y,
            thetas,
        })
    }

    /// Random state with coordinates of moderate size.
    pub fn random<R: Rng>(rng: &mut R, thetas: Thetas5, t5: C) -> Self {
        let mut draw = |lo: f64, hi: f64| c(rng.gen_range(lo..hi), rng.gen_range(-0.3..0.3));
        P5State {
            t5,
            u5: draw(0.5, 1.5),
            z5: draw(-0.6, 0.6),
            y5: draw(0.5, 1.5),
            thetas,
        }
    }

    /// Residuals of `diag(A05 + A15) = −(Θ∞/2)σ3` and of both determinants.
    pub fn invariant_residuals(&self) -> [f64; 3] {
        let (a0, a1) = (self.a05(), self.a15());
        let th = self.thetas;
        let s = a0 + a1;
        [
            (s.a11 + th.thinf / 2.0).norm().max((s.a22 - th.thinf / 2.0).norm()),
            (a0.det() + th.th0 * th.th0 / 4.0).norm(),
            (a1.det() + th.th1 * th.th1 / 4.0).norm(),
        ]
    }

    /// `dΨ/dλ = ((t5/2)σ3 + A05/λ + A15/(λ − 1))Ψ`.
    pub fn assemble5(&self) -> Result<LinearSystem> {
        if self.u5.norm() == 0.0 || self.y5.norm() == 0.0 {
            return Err(Error::ConstraintViolation("u5 and y5 must be nonzero".into()));
        }
        let r = self.invariant_residuals();
        if r.iter().any(|x| !(*x <= 1e-10)) {
            return Err(Error::ConstraintViolation(format!("invariants {r:?}")));
        }
        system5(self.t5, self.a05(), self.a15(), self.thetas.thinf)
    }
}

pub fn system5(t5: C, a0: Mat2C, a1: Mat2C, thinf: C) -> Result<LinearSystem> {
    LinearSystem::new(
        vec![
            Pole {
                position: ZERO,
                residue: a0,
            },
            Pole {
                position: ONE,
                residue: a1,
            },
        ],
        Mat2C::sigma3() * (t5 / 2.0),
        thinf,
    )
}

/// The matrix `(Θ∞/2)σ3 + A05 + A15` that drives the flow.
fn drive(a0: &Mat2C, a1: &Mat2C, thinf: C) -> Mat2C {
    Mat2C::sigma3() * (thinf / 2.0) + *a0 + *a1
}

/// Integrates the isomonodromy system in `t5` along a straight segment.
pub fn flow_residues5(
    t0: C,
    a: [Mat2C; 2],
    thinf: C,
    t1: C,
    tol: f64,
) -> Result<[Mat2C; 2]> {
    let seg = Segment::Line { from: t0, to: t1 };
    let d = seg.distance_to(ZERO);
    if d < 1e-6 {
        return Err(Error::SingularTime(format!(
            "segment {t0} → {t1} passes within {d:e} of t5 = 0"
        )));
    }
    let dt = t1 - t0;
    let half = Mat2C::sigma3() * 0.5;
    let rhs = |s: f64, y: &[C; 8]| -> Result<[C; 8]> {
        let t = t0 + dt * s;
        let a0 = Mat2C::new(y[0], y[1], y[2], y[3]);
        let a1 = Mat2C::new(y[4], y[5], y[6], y[7]);
        let b = drive(&a0, &a1, thinf) / t;
        let d0 = b.commutator(&a0) * dt;
        let d1 = (b + half).commutator(&a1) * dt;
        Ok([
            d0.a11, d0.a12, d0.a21, d0.a22, d1.a11, d1.a12, d1.a21, d1.a22,
        ])
    };
    let y0 = [
        a[0].a11, a[0].a12, a[0].a21, a[0].a22, a[1].a11, a[1].a12, a[1].a21, a[1].a22,
    ];
    let (y, _) = dopri5(rhs, 0.0, 1.0, y0, &OdeOptions::with_tol(tol))?;
    Ok([
        Mat2C::new(y[0], y[1], y[2], y[3]),
        Mat2C::new(y[4], y[5], y[6], y[7]),
    ])
}

pub fn idm5_flow(state: &P5State, t5_target: C, tol: f64) -> Result<P5State> {
    let [b0, b1] = flow_residues5(
        state.t5,
        [state.a05(), state.a15()],
        state.thetas.thinf,
        t5_target,
        tol,
    )?;
    P5State::from_residues(t5_target, &b0, &b1, state.thetas)
}

pub fn trajectory5(state: &P5State, times: &[C], tol: f64) -> Result<Vec<P5State>> {
    let mut out = Vec::with_capacity(times.len());
    let mut cur = *state;
    for &t in times {
        cur = idm5_flow(&cur, t, tol)?;
        out.push(cur);
    }
    Ok(out)
}

/// Right-hand side of the fifth Painlevé equation for `y''`.
pub fn p5_rhs(t: C, y: C, yp: C, th: &Thetas5) -> C {
    let (a, b, g, d) = th.p5_coefficients();
    (ONE / (y * 2.0) + ONE / (y - 1.0)) * yp * yp - yp / t
        + ((y - 1.0) / t).powu(2) * (a * y + b / y)
        + g * y / t
        + d * y * (y + 1.0) / (y - 1.0)
}

pub fn p5_residual(t: C, y: C, yp: C, ypp: C, th: &Thetas5) -> f64 {
    (ypp - p5_rhs(t, y, yp, th)).norm() / ypp.norm().max(1.0)
}

/// `(y5, y5', y5'')` by 5-point central differences along the real direction.
pub fn y5_jet(state: &P5State, h: f64, tol: f64) -> Result<(C, C, C)> {
    let mut ys = [ZERO; 5];
    for (k, off) in [-2.0, -1.0, 0.0, 1.0, 2.0].iter().enumerate() {
        ys[k] = if *off == 0.0 {
            state.y5
        } else {
            idm5_flow(state, state.t5 + c(off * h, 0.0), tol)?.y5
        };
    }
    let d1 = (ys[0] - ys[1] * 8.0 + ys[3] * 8.0 - ys[4]) / (12.0 * h);
    let d2 = (-ys[0] + ys[1] * 16.0 - ys[2] * 30.0 + ys[3] * 16.0 - ys[4]) / (12.0 * h * h);
    Ok((ys[2], d1, d2))
}

/// `d/dt5 log τ5` in the `(z5, y5)` form.
pub fn tau5_scalar(st: &P5State) -> Result<C> {
    if st.y5.norm() < 1e-300 || st.t5.norm() < 1e-300 {
        return Err(Error::IndeterminateTau("y5 or t5 vanishes".into()));
    }
    let Thetas5 { th0, th1, thinf } = st.thetas;
    let (z, y, t) = (st.z5, st.y5, st.t5);
    Ok(-z - (th0 + thinf) / 2.0
        - (z - (z + (th0 + th1 + thinf) / 2.0) / y)
            * (z + th0 - y * (z + (th0 - th1 + thinf) / 2.0))
            / t)
}

/// `d/dt5 log τ5` in the trace form.
pub fn tau5_matrix(st: &P5State) -> Result<C> {
    if st.t5.norm() < 1e-300 {
        return Err(Error::IndeterminateTau("t5 vanishes".into()));
    }
    let Thetas5 { th0, th1, thinf } = st.thetas;
    let t = st.t5;
    let q = (th0 * th0 + th1 * th1 - thinf * thinf) / 4.0 / t;
    Ok(q + ((st.a05() / t + Mat2C::sigma3() * 0.5) * st.a15()).trace())
}

/// `d/dt5 log τ5`, with the scalar and trace forms cross-checked.
pub fn tau5_logderiv(st: &P5State) -> Result<C> {
    let a = tau5_scalar(st)?;
    let b = tau5_matrix(st)?;
    let err = (a - b).norm() / b.norm().max(1.0);
    if err > 1e-9 {
        return Err(Error::IndeterminateTau(format!("forms disagree by {err:e}")));
    }
    Ok(b)
}

/// `σ5 = ((Θ05 + Θ∞5)/2)t5 + t5 d/dt5 log τ5`.
pub fn sigma5(st: &P5State) -> Result<C> {
    Ok((st.thetas.th0 + st.thetas.thinf) / 2.0 * st.t5 + st.t5 * tau5_logderiv(st)?)
}

/// Coefficients `Φm` (`Φ0 = I`) of the formal solution at infinity,
/// `(Σ Φm λ^{−m}) exp((λt5/2 − (Θ∞/2) ln λ)σ3)`.
pub fn formal_series5(t5: C, a0: &Mat2C, a1: &Mat2C, thinf: C, n: usize) -> Vec<Mat2C> {
    // A(λ) = (t/2)σ3 + Σ_{j≥1} B_j λ^{−j}, B1 = A0 + A1, B_j = A1 for j ≥ 2
    let b = |j: usize| if j == 1 { *a0 + *a1 } else { *a1 };
    let b1 = b(1);
    let s3 = Mat2C::sigma3();
    let h = thinf / 2.0;
    let mut phi = vec![Mat2C::identity()];
    for m in 0..n {
        // (t/2)[σ3, Φ_{m+1}] = −mΦm − hΦmσ3 − Σ_{j=1}^{m+1} B_jΦ_{m+1−j}
        let mut r = phi[m] * (-(m as f64)) - phi[m] * s3 * h;
        for j in 1..=m + 1 {
            r = r - b(j) * phi[m + 1 - j];
        }
        let x12 = r.a12 / t5;
        let x21 = -r.a21 / t5;
        // diagonal from the next order:
        // −(m+1) diag Φ_{m+1} = diag(off(B1) off(Φ_{m+1})) + diag(Σ_{j=2}^{m+2} B_jΦ_{m+2−j})
        let off = Mat2C::new(ZERO, x12, x21, ZERO);
        let mut q = Mat2C::new(ZERO, b1.a12, b1.a21, ZERO) * off;
        for j in 2..=m + 2 {
            let f = if m + 2 - j == m + 1 { off } else { phi[m + 2 - j] };
            q = q + b(j) * f;
        }
        let k = -((m + 1) as f64);
        phi.push(Mat2C::new(q.a11 / k, x12, x21, q.a22 / k));
    }
    phi
}

/// Optimally truncated sum of the formal series at `lam`, with `arg_lam`
/// the continuous argument used for `ln λ`.
pub fn formal_frame5(
    t5: C,
    a0: &Mat2C,
    a1: &Mat2C,
    thinf: C,
    lam: C,
    arg_lam: f64,
) -> Mat2C {
    let phi = formal_series5(t5, a0, a1, thinf, 120);
    let inv = ONE / lam;
    let mut sum = Mat2C::zero();
    let mut p = ONE;
    let mut last = f64::INFINITY;
    for f in &phi {
        let term = *f * p;
        let tn = term.norm();
        if tn > last && tn < 1e-3 {
            break;
        }
        sum = sum + term;
        last = tn;
        p *= inv;
    }
    let ln = C::new(lam.norm().ln(), arg_lam);
    sum * Mat2C::exp_sigma3(lam * t5 / 2.0 - ln * (thinf / 2.0))
}

/// A canonical solution known at one point, with the continuous argument
/// of that point.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CanonicalFrame {
    pub k: i32,
    pub point: C,
    pub arg: f64,
    pub psi: Mat2C,
}

/// Controls for the canonical frames.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FrameOptions {
    /// Anchor radius; `|t5|·R` must be at least 30.
    pub radius: f64,
    /// Radius of the inner arcs connecting the sectors.
    pub inner_radius: f64,
    /// Anchor direction relative to the sector's central ray.
    pub offset: f64,
    pub tol: f64,
}

impl FrameOptions {
    pub fn for_time(t5: C) -> Self {
        FrameOptions {
            radius: 30.0 / t5.norm(),
            inner_radius: 2.0,
            offset: 0.0,
            tol: 1e-12,
        }
    }
}

/// Central direction `arg λ` of the sector of `Ψ5^k`.
pub fn sector_center(t5: C, k: i32) -> f64 {
    -PI / 2.0 + PI * k as f64 - t5.arg()
}

/// `Ψ5^k` at its anchor on the ray `arg(λt5) = −π/2 + πk + offset`.
pub fn canonical_frame(sys: &LinearSystem, t5: C, k: i32, opts: &FrameOptions) -> Result<CanonicalFrame> {
    let tr = t5.norm() * opts.radius;
    if tr < 30.0 - 1e-9 {
        return Err(Error::AnchorTooClose(tr));
    }
    if opts.offset.abs() >= PI {
        return Err(Error::SectorViolation(format!("offset {}", opts.offset)));
    }
    let (a0, a1) = residues5(sys)?;
    let arg = sector_center(t5, k) + opts.offset;
    let lam = C::from_polar(opts.radius, arg);
    let psi = formal_frame5(t5, &a0, &a1, sys.theta_inf, lam, arg);
    Ok(CanonicalFrame {
        k,
        point: lam,
        arg,
        psi,
    })
}

fn residues5(sys: &LinearSystem) -> Result<(Mat2C, Mat2C)> {
    Ok((sys.residue_at(ZERO)?, sys.residue_at(ONE)?))
}

/// Continues a frame radially to `radius`, then along the arc to `arg`
/// (continuous angle), then radially to the final radius of `target`.
pub fn continue_frame(
    sys: &LinearSystem,
    f: &CanonicalFrame,
    inner_radius: f64,
    target_arg: f64,
    target_radius: f64,
    tol: f64,
) -> Result<CanonicalFrame> {
    let p1 = C::from_polar(inner_radius, f.arg);
    let mut path = Path::line(f.point, p1);
    if (target_arg - f.arg).abs() > 0.0 {
        path.segments.push(Segment::Arc {
            center: ZERO,
            radius: inner_radius,
            start: f.arg,
            sweep: target_arg - f.arg,
        });
    }
    let end = C::from_polar(target_radius, target_arg);
    path.segments.push(Segment::Line {
        from: C::from_polar(inner_radius, target_arg),
        to: end,
    });
    let t = transfer(sys, &path, tol)?;
    Ok(CanonicalFrame {
        k: f.k,
        point: end,
        arg: target_arg,
        psi: t * f.psi,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StokesData {
    pub s0: C,
    pub s1: C,
    pub theta_inf5: C,
    pub s0_matrix: Mat2C,
    pub s1_matrix: Mat2C,
    /// Largest off-pattern entry before it was zeroed.
    pub off_pattern: f64,
}

impl StokesData {
    pub fn from_multipliers(s0: C, s1: C, theta_inf5: C) -> Self {
        StokesData {
            s0,
            s1,
            theta_inf5,
            s0_matrix: Mat2C::new(ONE, ZERO, s0, ONE),
            s1_matrix: Mat2C::new(ONE, s1, ZERO, ONE),
            off_pattern: 0.0,
        }
    }

    /// `S_k` for any `k`, through `S_{k+2} = e^{πiΘ∞σ3} S_k e^{−πiΘ∞σ3}`.
    pub fn s(&self, k: i32) -> Mat2C {
        let base = if k.rem_euclid(2) == 0 {
            self.s0_matrix
        } else {
            self.s1_matrix
        };
        let shift = k.div_euclid(2) as f64;
        let e = Mat2C::diag(
            exp_ipi(self.theta_inf5 * shift),
            exp_ipi(-self.theta_inf5 * shift),
        );
        e * base * e.inv().expect("diagonal exponential is invertible")
    }

    /// `M_{k∞5} = S_k S_{k+1} e^{πiΘ∞σ3}`.
    pub fn m_inf(&self, k: i32) -> Mat2C {
        let e = Mat2C::diag(exp_ipi(self.theta_inf5), exp_ipi(-self.theta_inf5));
        self.s(k) * self.s(k + 1) * e
    }

    /// `tr M∞5 − 2cos(πΘ∞5) − e^{−πiΘ∞5}s0s1`.
    pub fn trace_residual(&self) -> f64 {
        let th = self.theta_inf5;
        (self.m_inf(0).trace() - exp_ipi(th) - exp_ipi(-th) - exp_ipi(-th) * self.s0 * self.s1)
            .norm()
    }
}

/// Budget for the unipotent pattern of the numerically extracted `S_k`.
pub const STOKES_TOL: f64 = 1e-3;

/// `S_k = (Ψ5^k)⁻¹Ψ5^{k+1}` at the common point `inner_radius·e^{i(πk − arg t5)}`.
pub fn stokes_matrix_numeric(sys: &LinearSystem, t5: C, k: i32, opts: &FrameOptions) -> Result<Mat2C> {
    let fk = canonical_frame(sys, t5, k, opts)?;
    let fk1 = canonical_frame(sys, t5, k + 1, opts)?;
    let common = PI * k as f64 - t5.arg();
    let a = continue_frame(sys, &fk, opts.inner_radius, common, opts.inner_radius, opts.tol)?;
    let b = continue_frame(sys, &fk1, opts.inner_radius, common, opts.inner_radius, opts.tol)?;
    Ok(a.psi.inv()? * b.psi)
}

/// Stokes multipliers `s0, s1` of the system.
pub fn stokes_of(sys: &LinearSystem, t5: C, opts: &FrameOptions) -> Result<StokesData> {
    let s0 = stokes_matrix_numeric(sys, t5, 0, opts)?;
    let s1 = stokes_matrix_numeric(sys, t5, 1, opts)?;
    let off = [
        s0.a12.norm(),
        (s0.a11 - ONE).norm(),
        (s0.a22 - ONE).norm(),
        s1.a21.norm(),
        (s1.a11 - ONE).norm(),
        (s1.a22 - ONE).norm(),
    ]
    .iter()
    .fold(0.0_f64, |m, x| m.max(*x));
    if !(off <= STOKES_TOL) {
        return Err(Error::NonUnipotentResidual(off));
    }
    let mut d = StokesData::from_multipliers(s0.a21, s1.a12, sys.theta_inf);
    d.off_pattern = off;
    Ok(d)
}

/// Base point of the P5 loops: below and to the left of the poles.
pub const P5_BASE: C = C::new(-0.5, -1.0);
/// Base point of the alternative presentation: above and to the left.
pub const P5_TILDE_BASE: C = C::new(-0.5, 1.0);

/// `Ψ5^0` at the base point, continued inside its sector.
pub fn frame_at_base5(sys: &LinearSystem, t5: C, base: C, opts: &FrameOptions) -> Result<Mat2C> {
    let f = canonical_frame(sys, t5, 0, opts)?;
    // continuous argument of the base point inside the domain of Ψ5^0,
    // which is cut along arg λ = π/2 − arg t5
    let cut = PI / 2.0 - t5.arg();
    let mut a = base.arg();
    while a > cut {
        a -= 2.0 * PI;
    }
    while a < cut - 2.0 * PI {
        a += 2.0 * PI;
    }
    let inner = opts.inner_radius.max(base.norm());
    let g = continue_frame(sys, &f, inner, a, base.norm(), opts.tol)?;
    Ok(g.psi)
}

/// Monodromy data of the P5 system in both presentations.
///
/// `M05`, `M15` come from loops at the lower base point, `M∞5` from the
/// Stokes data; the tilde presentation uses `M̃15 = M05 M15 M05⁻¹`.
/// `m_inf_loop` and `m1_tilde_loop` record the direct loop integrations
/// used as cross-checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct M5Report {
    pub point: MonodromyPoint,
    pub tilde: MonodromyPoint,
    pub stokes: StokesData,
    pub m_inf_loop: Mat2C,
    pub m1_tilde_loop: Mat2C,
}

pub fn m5_point(sys: &LinearSystem, t5: C, thetas: &Thetas5, opts: &FrameOptions) -> Result<M5Report> {
    let stokes = stokes_of(sys, t5, opts)?;
    let psi = frame_at_base5(sys, t5, P5_BASE, opts)?;
    let r = 1.0 / 3.0;
    let m0 = monodromy_in_frame(sys, &Path::lasso(P5_BASE, ZERO, r, true), &psi, opts.tol)?;
    let m1 = monodromy_in_frame(sys, &Path::lasso(P5_BASE, ONE, r, true), &psi, opts.tol)?;
    let m_inf = stokes.m_inf(0);
    let m_inf_loop = monodromy_in_frame(
        sys,
        &Path::circle_through(P5_BASE, c(0.5, 0.0), false),
        &psi,
        opts.tol,
    )?;
    let psi_t = frame_at_base5(sys, t5, P5_TILDE_BASE, opts)?;
    let m1_tilde_loop =
        monodromy_in_frame(sys, &Path::lasso(P5_TILDE_BASE, ONE, r, true), &psi_t, opts.tol)?;
    let meta = LoopMeta {
        base_point: P5_BASE,
        radii: vec![("0".into(), r), ("1".into(), r)],
        tol: opts.tol,
    };
    let mut point = MonodromyPoint {
        kind: MonodromyKind::P5,
        matrices: vec![("0".into(), m0), ("1".into(), m1), ("inf".into(), m_inf)],
        thetas: thetas.tuple(),
        residuals: Residuals::default(),
        meta,
    };
    point.residuals = validate(&point);
    let tilde = tilde_presentation(&point, P5_TILDE_BASE)?;
    Ok(M5Report {
        point,
        tilde,
        stokes,
        m_inf_loop,
        m1_tilde_loop,
    })
}

/// Converts a P5 point to the presentation with `M̃05 = M05`,
/// `M̃15 = M05 M15 M05⁻¹` and `M̃∞5 = M∞5`.
pub fn tilde_presentation(point: &MonodromyPoint, base: C) -> Result<MonodromyPoint> {
    let need = |n: &str| {
        point
            .get(n)
            .ok_or_else(|| Error::InvalidInput(format!("missing M_{n}")))
    };
    let (m0, m1, m_inf) = (need("0")?, need("1")?, need("inf")?);
    let mut tilde = MonodromyPoint {
        kind: MonodromyKind::P5Tilde,
        matrices: vec![
            ("0".into(), m0),
            ("1".into(), m0 * m1 * m0.inv()?),
            ("inf".into(), m_inf),
        ],
        thetas: point.thetas.clone(),
        residuals: Residuals::default(),
        meta: LoopMeta {
            base_point: base,
            ..point.meta.clone()
        },
    };
    tilde.residuals = validate(&tilde);
    Ok(tilde)
}

/// CSV header for P5 trajectory dumps.
pub const TRAJECTORY5_HEADER: &str = "t5,u5,z5,y5,dlog_tau5";

pub fn trajectory5_csv(traj: &[P5State]) -> String {
    let mut out = String::from(TRAJECTORY5_HEADER);
    out.push('\n');
    for st in traj {
        let tau = tau5_logderiv(st).map(fmt_csv).unwrap_or_else(|_| "nan".into());
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_csv(st.t5),
            fmt_csv(st.u5),
            fmt_csv(st.z5),
            fmt_csv(st.y5),
            tau
        ));
    }
    out
}
