//! Sixth Painlevé side: Jimbo–Miwa coordinates of the Fuchsian system with
//! poles `0, 1, t6`, the Schlesinger flow, `y6`, `τ6`/`σ̂6` and the
//! reflection at infinity.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{c, fmt_csv, Mat2C, C, ONE, ZERO};
use crate::error::{Error, Result};
use crate::fuchsian::{LinearSystem, Segment, ThetaTuple};
use crate::ode::{dopri5, OdeOptions};

/// Index of the finite singularities in coordinate arrays: `0`, `1`, `t`.
pub const NU0: usize = 0;
pub const NU1: usize = 1;
pub const NUT: usize = 2;
pub const NU_NAMES: [&str; 3] = ["0", "1", "t"];

/// Tolerance for the parametrization constraints.
pub const CONSTRAINT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thetas6 {
    pub th0: C,
    pub th1: C,
    pub tht: C,
    pub thinf: C,
}

impl Thetas6 {
    pub fn new(th0: C, th1: C, tht: C, thinf: C) -> Self {
        Thetas6 {
            th0,
            th1,
            tht,
            thinf,
        }
    }

    /// `Θν` for the finite singularity with index `i`.
    pub fn finite(&self, i: usize) -> C {
        [self.th0, self.th1, self.tht][i]
    }

    pub fn set_finite(&mut self, i: usize, v: C) {
        match i {
            NU0 => self.th0 = v,
            NU1 => self.th1 = v,
            _ => self.tht = v,
        }
    }

    pub fn tuple(&self) -> ThetaTuple {
        ThetaTuple(vec![
            ("0".into(), self.th0),
            ("t".into(), self.tht),
            ("1".into(), self.th1),
            ("inf".into(), self.thinf),
        ])
    }

    /// `(α6, β6, γ6, δ6)` of the sixth Painlevé equation.
    pub fn p6_coefficients(&self) -> (C, C, C, C) {
        (
            (self.thinf - 1.0).powu(2) * 0.5,
            -self.th0 * self.th0 * 0.5,
            self.th1 * self.th1 * 0.5,
            (ONE - self.tht * self.tht) * 0.5,
        )
    }
}

/// Point of the P6 system in Jimbo–Miwa coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct P6State {
    pub t6: C,
    pub z: [C; 3],
    pub u: [C; 3],
    /// Normalization of the diagonalizers; metadata outside the limits.
    pub s: [C; 3],
    pub thetas: Thetas6,
}

/// Residue in the Jimbo–Miwa parametrization.
pub fn jm_residue(z: C, u: C, th: C) -> Mat2C {
    Mat2C::new(z + th / 2.0, -u * z, (z + th) / u, -z - th / 2.0)
}

/// Unimodular diagonalizer `R` with `R⁻¹AR = (Θ/2)σ3`.
pub fn jm_diagonalizer(z: C, u: C, th: C, s: C) -> Mat2C {
    Mat2C::new(
        ONE / (th * s),
        u * z * s,
        ONE / (th * u * s),
        (z + th) * s,
    )
}

/// `(z, u)` of a residue with prescribed `Θ`, avoiding the worse of the two
/// available divisions.
pub fn jm_coordinates(a: &Mat2C, th: C) -> Result<(C, C)> {
    let z = a.a11 - th / 2.0;
    let zt = z + th;
    let u = if z.norm() >= zt.norm() {
        -a.a12 / z
    } else {
        zt / a.a21
    };
    if !u.is_finite() || u.norm() < 1e-300 {
        return Err(Error::SingularParametrization(format!(
            "u = {u} for residue {a:?}"
        )));
    }
    Ok((z, u))
}

fn scale_of(xs: &[C]) -> f64 {
    xs.iter().fold(1.0_f64, |m, x| m.max(x.norm()))
}

impl P6State {
    pub fn position(&self, i: usize) -> C {
        [ZERO, ONE, self.t6][i]
    }

    pub fn residue(&self, i: usize) -> Mat2C {
        jm_residue(self.z[i], self.u[i], self.thetas.finite(i))
    }

    pub fn residues(&self) -> [Mat2C; 3] {
        [self.residue(0), self.residue(1), self.residue(2)]
    }

    pub fn diagonalizer(&self, i: usize) -> Mat2C {
        jm_diagonalizer(self.z[i], self.u[i], self.thetas.finite(i), self.s[i])
    }

    /// Residuals of the three scalar normalization relations.
    pub fn constraint_residuals(&self) -> [f64; 3] {
        let th = &self.thetas;
        let zsum = self.z[0] + self.z[1] + self.z[2]
            + (th.th0 + th.th1 + th.tht + th.thinf) * 0.5;
        let uz: Vec<C> = (0..3).map(|i| self.u[i] * self.z[i]).collect();
        let w: Vec<C> = (0..3)
            .map(|i| (self.z[i] + th.finite(i)) / self.u[i])
            .collect();
        [
            zsum.norm() / scale_of(&self.z),
            (uz[0] + uz[1] + uz[2]).norm() / scale_of(&uz),
            (w[0] + w[1] + w[2]).norm() / scale_of(&w),
        ]
    }

    pub fn check_constraints(&self, tol: f64) -> Result<()> {
        let names = ["z-sum", "uz-sum", "(z+Θ)/u-sum"];
        for (n, r) in names.iter().zip(self.constraint_residuals()) {
            if r.is_nan() || r > tol {
                return Err(Error::ConstraintViolation(format!("{n}: residual {r:e}")));
            }
        }
        Ok(())
    }

    /// The five first integrals, as residuals that vanish on the manifold:
    /// `tr A0, tr A1, det A0 + Θ0²/4, det A1 + Θ1²/4,
    /// det(Θ∞σ3/2 + A0 + A1) + Θt²/4`.
    pub fn first_integrals(&self) -> [C; 5] {
        let [a0, a1, _] = self.residues();
        first_integrals_of(&a0, &a1, &self.thetas)
    }

    /// The Fuchsian system `Σ A_ν/(λ − ν)`.
    pub fn assemble(&self) -> Result<LinearSystem> {
        for i in 0..3 {
            if self.u[i].norm() == 0.0 || self.s[i].norm() == 0.0 {
                return Err(Error::ConstraintViolation(format!(
                    "u or s vanishes at ν = {}",
                    NU_NAMES[i]
                )));
            }
        }
        self.check_constraints(CONSTRAINT_TOL)?;
        let r = self.residues();
        LinearSystem::fuchsian(
            vec![(ZERO, r[NU0]), (self.t6, r[NUT]), (ONE, r[NU1])],
            self.thetas.thinf,
        )
    }

    /// Rebuilds coordinates from residues, keeping the given `Θ` signs and `s`.
    pub fn from_residues(t6: C, a: [Mat2C; 3], thetas: Thetas6, s: [C; 3]) -> Result<Self> {
        let mut z = [ZERO; 3];
        let mut u = [ZERO; 3];
        for i in 0..3 {
            let (zi, ui) = jm_coordinates(&a[i], thetas.finite(i))?;
            z[i] = zi;
            u[i] = ui;
        }
        Ok(P6State {
            t6,
            z,
            u,
            s,
            thetas,
        })
    }

    /// Random point of the constraint manifold: `z0, z1, u0` are drawn,
    /// `zt` follows from the diagonal relation and `u1` solves the quadratic
    /// left by the two off-diagonal relations.
    pub fn random<R: Rng>(rng: &mut R, thetas: Thetas6, t6: C) -> Result<Self> {
        let mut draw = |lo: f64, hi: f64| c(rng.gen_range(lo..hi), rng.gen_range(-0.5..0.5));
        for _ in 0..100 {
            let z0 = draw(-0.8, 0.8);
            let z1 = draw(-0.8, 0.8);
            let u0 = draw(0.5, 1.5);
            let st = Self::complete(t6, z0, z1, u0, thetas, 0)?;
            if let Some(st) = st {
                return Ok(st);
            }
        }
        Err(Error::NoConvergence("no admissible random state".into()))
    }

    /// Completes `(z0, z1, u0)` to a state; `root` picks one of the two
    /// solutions for `u1`. Returns `None` for degenerate draws.
    pub fn complete(
        t6: C,
        z0: C,
        z1: C,
        u0: C,
        thetas: Thetas6,
        root: usize,
    ) -> Result<Option<Self>> {
        let th = thetas;
        let zt = -(th.th0 + th.th1 + th.tht + th.thinf) * 0.5 - z0 - z1;
        let a = u0 * z0;
        let b = z1;
        let cc = (z0 + th.th0) / u0;
        let d = z1 + th.th1;
        let k = zt * (zt + th.tht);
        let qa = b * cc;
        let qb = a * cc + b * d - k;
        let qc = a * d;
        if qa.norm() < 1e-8 || zt.norm() < 1e-6 {
            return Ok(None);
        }
        let disc = (qb * qb - qa * qc * 4.0).sqrt();
        let w = if root == 0 {
            (-qb + disc) / (qa * 2.0)
        } else {
            (-qb - disc) / (qa * 2.0)
        };
        if w.norm() < 1e-6 || w.norm() > 1e6 {
            return Ok(None);
        }
        let ut = -(a + b * w) / zt;
        if ut.norm() < 1e-6 || ut.norm() > 1e6 {
            return Ok(None);
        }
        let st = P6State {
            t6,
            z: [z0, z1, zt],
            u: [u0, w, ut],
            s: [ONE; 3],
            thetas,
        };
        if st.check_constraints(1e-10).is_err() {
            return Ok(None);
        }
        Ok(Some(st))
    }
}

fn first_integrals_of(a0: &Mat2C, a1: &Mat2C, th: &Thetas6) -> [C; 5] {
    let inf = Mat2C::sigma3() * (th.thinf / 2.0);
    [
        a0.trace(),
        a1.trace(),
        a0.det() + th.th0 * th.th0 / 4.0,
        a1.det() + th.th1 * th.th1 / 4.0,
        (inf + *a0 + *a1).det() + th.tht * th.tht / 4.0,
    ]
}

/// `A_t` from the normalization `A0 + A1 + At = −(Θ∞/2)σ3`.
pub fn residue_t(a0: &Mat2C, a1: &Mat2C, thinf: C) -> Mat2C {
    Mat2C::sigma3() * (-thinf / 2.0) - *a0 - *a1
}

/// Rescales a traceless residue so that `det A = −Θ²/4` exactly.
fn project(a: &Mat2C, th: C) -> Mat2C {
    let h = (-a.det()).sqrt();
    if h.norm() == 0.0 {
        return *a;
    }
    let mut f = th / 2.0 / h;
    if (f - 1.0).norm() > (f + 1.0).norm() {
        f = -f;
    }
    let m = *a * f;
    let tr = m.trace() * 0.5;
    Mat2C::new(m.a11 - tr, m.a12, m.a21, m.a22 - tr)
}

/// Integrates the Schlesinger system for `(A0, A1)` along the straight
/// segment `t0 → t1`.
///
/// The path is cut into pieces; after each piece the residues are
/// re-projected onto their determinant levels when the drift exceeds 1e−11.
pub fn flow_residues(
    t0: C,
    a: [Mat2C; 2],
    thetas: &Thetas6,
    t1: C,
    tol: f64,
) -> Result<[Mat2C; 2]> {
    let seg = Segment::Line { from: t0, to: t1 };
    for (name, p) in [("0", ZERO), ("1", ONE)] {
        let d = seg.distance_to(p);
        if d < 1e-6 {
            return Err(Error::SingularTime(format!(
                "segment {t0} → {t1} passes within {d:e} of t = {name}"
            )));
        }
    }
    let dt = t1 - t0;
    let thinf = thetas.thinf;
    let rhs = |s: f64, y: &[C; 8]| -> Result<[C; 8]> {
        let t = t0 + dt * s;
        let a0 = Mat2C::new(y[0], y[1], y[2], y[3]);
        let a1 = Mat2C::new(y[4], y[5], y[6], y[7]);
        let at = residue_t(&a0, &a1, thinf);
        let d0 = at.commutator(&a0) * (dt / t);
        let d1 = at.commutator(&a1) * (dt / (t - 1.0));
        Ok([
            d0.a11, d0.a12, d0.a21, d0.a22, d1.a11, d1.a12, d1.a21, d1.a22,
        ])
    };
    let pieces = 16;
    let opts = OdeOptions::with_tol(tol);
    let mut y = [
        a[0].a11, a[0].a12, a[0].a21, a[0].a22, a[1].a11, a[1].a12, a[1].a21, a[1].a22,
    ];
    for k in 0..pieces {
        let s0 = k as f64 / pieces as f64;
        let s1 = (k + 1) as f64 / pieces as f64;
        let (ny, _) = dopri5(rhs, s0, s1, y, &opts)?;
        y = ny;
        let mut a0 = Mat2C::new(y[0], y[1], y[2], y[3]);
        let mut a1 = Mat2C::new(y[4], y[5], y[6], y[7]);
        let fi = first_integrals_of(&a0, &a1, thetas);
        if fi[..4].iter().any(|x| x.norm() > 1e-11) {
            a0 = project(&a0, thetas.th0);
            a1 = project(&a1, thetas.th1);
            y = [
                a0.a11, a0.a12, a0.a21, a0.a22, a1.a11, a1.a12, a1.a21, a1.a22,
            ];
        }
    }
    Ok([
        Mat2C::new(y[0], y[1], y[2], y[3]),
        Mat2C::new(y[4], y[5], y[6], y[7]),
    ])
}

/// Continuous isomonodromic deformation of a state to `t6_target`.
/// The `s` coordinates are carried unchanged.
pub fn schlesinger_flow(state: &P6State, t6_target: C, tol: f64) -> Result<P6State> {
    let [a0, a1, _] = state.residues();
    let [b0, b1] = flow_residues(state.t6, [a0, a1], &state.thetas, t6_target, tol)?;
    let bt = residue_t(&b0, &b1, state.thetas.thinf);
    P6State::from_residues(t6_target, [b0, b1, bt], state.thetas, state.s)
}

/// States along a straight-line flow through the given times.
pub fn trajectory(state: &P6State, times: &[C], tol: f64) -> Result<Vec<P6State>> {
    let mut out = Vec::with_capacity(times.len());
    let mut cur = *state;
    for &t in times {
        cur = schlesinger_flow(&cur, t, tol)?;
        out.push(cur);
    }
    Ok(out)
}

/// `y6` from the residues' upper-right entries (`A_ν12 = −u_ν z_ν`).
pub fn y6_from_residues(t6: C, a: &[Mat2C; 3]) -> Result<C> {
    let (w0, w1, wt) = (-a[NU0].a12, -a[NU1].a12, -a[NUT].a12);
    let den1 = (t6 + 1.0) * w0 + t6 * w1 + wt;
    if den1.norm() < 1e-12 || w0.norm() < 1e-12 || t6.norm() < 1e-12 {
        return Err(Error::IndeterminateY(format!("denominator {den1:e}")));
    }
    let y1 = t6 * w0 / den1;
    let den2 = ONE + (ONE - ONE / t6) * w1 / w0;
    let den3 = ONE + (ONE - t6) * wt / w0;
    if den2.norm() < 1e-12 || den3.norm() < 1e-12 {
        return Err(Error::IndeterminateY("denominator of an alternative form".into()));
    }
    let y2 = ONE / den2;
    let y3 = t6 / den3;
    let sc = y1.norm().max(1e-3);
    let spread = (y1 - y2).norm().max((y1 - y3).norm()) / sc;
    if spread > 1e-9 {
        return Err(Error::ConstraintViolation(format!(
            "the three forms of y6 disagree by {spread:e}"
        )));
    }
    Ok(y1)
}

pub fn y6_of(state: &P6State) -> Result<C> {
    y6_from_residues(state.t6, &state.residues())
}

/// Right-hand side of the sixth Painlevé equation for `y''`.
pub fn p6_rhs(t: C, y: C, yp: C, th: &Thetas6) -> C {
    let (a, b, g, d) = th.p6_coefficients();
    (ONE / y + ONE / (y - 1.0) + ONE / (y - t)) * 0.5 * yp * yp
        - (ONE / t + ONE / (t - 1.0) + ONE / (y - t)) * yp
        + y * (y - 1.0) * (y - t) / (t * t * (t - 1.0) * (t - 1.0))
            * (a + b * t / (y * y) + g * (t - 1.0) / ((y - 1.0) * (y - 1.0))
                + d * t * (t - 1.0) / ((y - t) * (y - t)))
}

/// `y'' − rhs`, scaled by `max(1, |y''|)`.
pub fn p6_residual(t: C, y: C, yp: C, ypp: C, th: &Thetas6) -> f64 {
    (ypp - p6_rhs(t, y, yp, th)).norm() / ypp.norm().max(1.0)
}

/// `(y, y', y'')` at the state's time by 5-point central differences with
/// step `h` along the real direction, the neighbours obtained by flowing.
pub fn y6_jet(state: &P6State, h: f64, tol: f64) -> Result<(C, C, C)> {
    let mut ys = [ZERO; 5];
    for (k, off) in [-2.0, -1.0, 0.0, 1.0, 2.0].iter().enumerate() {
        let st = if *off == 0.0 {
            *state
        } else {
            schlesinger_flow(state, state.t6 + c(off * h, 0.0), tol)?
        };
        ys[k] = y6_of(&st)?;
    }
    let d1 = (ys[0] - ys[1] * 8.0 + ys[3] * 8.0 - ys[4]) / (12.0 * h);
    let d2 = (-ys[0] + ys[1] * 16.0 - ys[2] * 30.0 + ys[3] * 16.0 - ys[4]) / (12.0 * h * h);
    Ok((ys[2], d1, d2))
}

/// `d/dt6 log τ6 = tr(A0/t6 + A1/(t6 − 1))At`.
pub fn dlog_tau6(state: &P6State) -> C {
    let [a0, a1, at] = state.residues();
    let t = state.t6;
    ((a0 / t + a1 / (t - 1.0)) * at).trace()
}

/// `σ̂6 = t6(t6 − 1) d/dt6 log τ6`.
pub fn sigma6_hat(state: &P6State) -> C {
    let t = state.t6;
    t * (t - 1.0) * dlog_tau6(state)
}

/// `dσ̂6/dt6 = −tr((Θ∞/2)σ3 At) − tr At²`.
pub fn dsigma6_hat(state: &P6State) -> C {
    let at = state.residue(NUT);
    -(Mat2C::sigma3() * (state.thetas.thinf / 2.0) * at).trace() - (at * at).trace()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauSample {
    pub t6: C,
    pub dlog_tau: C,
    pub sigma_hat: C,
    /// Closed-form derivative of `σ̂6`.
    pub dsigma: C,
    /// Derivative of `σ̂6` by differences along the samples.
    pub dsigma_fd: C,
}

/// `τ6`/`σ̂6` data along a sampled trajectory. Interior samples compare the
/// closed-form `σ̂6′` with a 3-point difference on the (possibly
/// non-uniform) grid; `GridTooCoarse` is raised above `tol`.
pub fn tau6_sigma6(traj: &[P6State], tol: f64) -> Result<Vec<TauSample>> {
    if traj.len() < 3 {
        return Err(Error::InvalidInput("need at least three samples".into()));
    }
    let sig: Vec<C> = traj.iter().map(sigma6_hat).collect();
    let mut out = Vec::with_capacity(traj.len());
    let mut worst = 0.0_f64;
    for (k, st) in traj.iter().enumerate() {
        let (i0, i1, i2) = if k == 0 {
            (0, 1, 2)
        } else if k + 1 == traj.len() {
            (k - 2, k - 1, k)
        } else {
            (k - 1, k, k + 1)
        };
        let (x0, x1, x2) = (traj[i0].t6, traj[i1].t6, traj[i2].t6);
        let x = st.t6;
        // derivative of the quadratic interpolant at x
        let l0 = ((x - x1) + (x - x2)) / ((x0 - x1) * (x0 - x2));
        let l1 = ((x - x0) + (x - x2)) / ((x1 - x0) * (x1 - x2));
        let l2 = ((x - x0) + (x - x1)) / ((x2 - x0) * (x2 - x1));
        let fd = sig[i0] * l0 + sig[i1] * l1 + sig[i2] * l2;
        let ds = dsigma6_hat(st);
        if k > 0 && k + 1 < traj.len() {
            worst = worst.max((fd - ds).norm() / ds.norm().max(1.0));
        }
        out.push(TauSample {
            t6: st.t6,
            dlog_tau: dlog_tau6(st),
            sigma_hat: sig[k],
            dsigma: ds,
            dsigma_fd: fd,
        });
    }
    if worst > tol {
        return Err(Error::GridTooCoarse(worst));
    }
    Ok(out)
}

/// Reflection `Θ∞ → −Θ∞` realized as `Ã = σ1Aσ1`; `signs[i]` chooses
/// `Θ̃ν = ±Θν` for `ν = 0, 1, t`.
pub fn reflect_infinity(state: &P6State, signs: [i8; 3]) -> Result<P6State> {
    let mut th = state.thetas;
    th.thinf = -th.thinf;
    let mut z = [ZERO; 3];
    let mut u = [ZERO; 3];
    for i in 0..3 {
        let t_old = state.thetas.finite(i);
        let t_new = t_old * signs[i] as f64;
        th.set_finite(i, t_new);
        let den = state.z[i] + (t_new + t_old) / 2.0;
        if den.norm() < 1e-12 {
            return Err(Error::ReflectionSingular(format!(
                "z + (Θ̃+Θ)/2 vanishes at ν = {}",
                NU_NAMES[i]
            )));
        }
        z[i] = -den;
        u[i] = (state.z[i] + t_old) / (state.u[i] * den);
    }
    Ok(P6State {
        t6: state.t6,
        z,
        u,
        s: state.s,
        thetas: th,
    })
}

/// CSV header for trajectory dumps.
pub const TRAJECTORY_HEADER: &str =
    "t6,z0,u0,z1,u1,zt,ut,y6,sigma6_hat,fi_max";

/// One CSV row per state, complex values as `re+imi`.
pub fn trajectory_csv(traj: &[P6State]) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for st in traj {
        let y = y6_of(st).map(fmt_csv).unwrap_or_else(|_| "nan".into());
        let fi = st
            .first_integrals()
            .iter()
            .map(|x| x.norm())
            .fold(0.0, f64::max);
        let cells = [
            fmt_csv(st.t6),
            fmt_csv(st.z[NU0]),
            fmt_csv(st.u[NU0]),
            fmt_csv(st.z[NU1]),
            fmt_csv(st.u[NU1]),
            fmt_csv(st.z[NUT]),
            fmt_csv(st.u[NUT]),
            y,
            fmt_csv(sigma6_hat(st)),
            format!("{fi:e}"),
        ];
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonalizer_is_unimodular_and_diagonalizes() {
        let (z, u, th, s) = (c(0.3, 0.1), c(1.2, -0.4), c(0.45, 0.2), c(0.7, 0.3));
        let a = jm_residue(z, u, th);
        let r = jm_diagonalizer(z, u, th, s);
        assert!((r.det() - ONE).norm() < 1e-13);
        let d = r.inv().unwrap() * a * r;
        assert!(d.dist(&(Mat2C::sigma3() * (th / 2.0))) < 1e-13);
        let (z2, u2) = jm_coordinates(&a, th).unwrap();
        assert!((z2 - z).norm() < 1e-14 && (u2 - u).norm() < 1e-13);
    }
}
