//! Complex scalars and 2×2 complex matrices.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Complex scalar. Serialized as `[re, im]`.
pub type C = num_complex::Complex64;

pub const I: C = C::new(0.0, 1.0);
pub const ONE: C = C::new(1.0, 0.0);
pub const ZERO: C = C::new(0.0, 0.0);

/// Determinant threshold below which a matrix is treated as singular.
pub const SINGULAR_DET: f64 = 1e-14;
/// Minimal eigenvalue separation accepted by [`eig2`].
pub const EIG_SEPARATION: f64 = 1e-10;

#[inline]
pub const fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C {
    C::new(x, 0.0)
}

/// `e^{iπ z}`.
#[inline]
pub fn exp_ipi(z: C) -> C {
    (I * std::f64::consts::PI * z).exp()
}

/// Distance from `z` to the nearest integer.
pub fn dist_to_int(z: C) -> f64 {
    let n = z.re.round();
    C::new(z.re - n, z.im).norm()
}

/// Formats a complex number as `re+imi` (CSV convention).
pub fn fmt_csv(z: C) -> String {
    if z.im.is_sign_negative() {
        format!("{:.17e}{:.17e}i", z.re, z.im)
    } else {
        format!("{:.17e}+{:.17e}i", z.re, z.im)
    }
}

/// Parses the `re+imi` form written by [`fmt_csv`].
pub fn parse_csv(s: &str) -> Result<C> {
    let s = s.trim();
    let body = s
        .strip_suffix('i')
        .ok_or_else(|| Error::InvalidInput(format!("complex literal without 'i': {s}")))?;
    // split at the last sign that is not part of an exponent
    let bytes = body.as_bytes();
    let mut split = None;
    for k in (1..bytes.len()).rev() {
        if (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E') {
            split = Some(k);
            break;
        }
    }
    let k = split.ok_or_else(|| Error::InvalidInput(format!("bad complex literal: {s}")))?;
    let parse = |t: &str| {
        t.parse::<f64>()
            .map_err(|_| Error::InvalidInput(format!("bad complex literal: {s}")))
    };
    Ok(C::new(parse(&body[..k])?, parse(&body[k..])?))
}

/// A 2×2 complex matrix `[[a11, a12], [a21, a22]]`.
#[derive(Clone, Copy, PartialEq, Default)]
pub struct Mat2C {
    pub a11: C,
    pub a12: C,
    pub a21: C,
    pub a22: C,
}

impl Mat2C {
    pub const fn new(a11: C, a12: C, a21: C, a22: C) -> Self {
        Mat2C { a11, a12, a21, a22 }
    }

    pub const fn identity() -> Self {
        Mat2C::new(ONE, ZERO, ZERO, ONE)
    }

    pub const fn zero() -> Self {
        Mat2C::new(ZERO, ZERO, ZERO, ZERO)
    }

    pub fn diag(d1: C, d2: C) -> Self {
        Mat2C::new(d1, ZERO, ZERO, d2)
    }

    pub fn sigma1() -> Self {
        Mat2C::new(ZERO, ONE, ONE, ZERO)
    }

    pub fn sigma3() -> Self {
        Mat2C::diag(ONE, -ONE)
    }

    /// Upper unipotent `[[1, x], [0, 1]]`.
    pub fn upper(x: C) -> Self {
        Mat2C::new(ONE, x, ZERO, ONE)
    }

    /// Lower unipotent `[[1, 0], [x, 1]]`.
    pub fn lower(x: C) -> Self {
        Mat2C::new(ONE, ZERO, x, ONE)
    }

    /// `x^{s σ3} = diag(x^s, x^{-s})`, principal branch.
    pub fn pow_sigma3(x: C, s: C) -> Self {
        let p = (s * x.ln()).exp();
        Mat2C::diag(p, p.inv())
    }

    /// `x^{σ3} = diag(x, 1/x)`.
    pub fn scalar_sigma3(x: C) -> Self {
        Mat2C::diag(x, x.inv())
    }

    /// `e^{w σ3}`.
    pub fn exp_sigma3(w: C) -> Self {
        Mat2C::diag(w.exp(), (-w).exp())
    }

    pub fn from_cols(c1: [C; 2], c2: [C; 2]) -> Self {
        Mat2C::new(c1[0], c2[0], c1[1], c2[1])
    }

    pub fn from_rows(r: [[C; 2]; 2]) -> Self {
        Mat2C::new(r[0][0], r[0][1], r[1][0], r[1][1])
    }

    pub fn rows(&self) -> [[C; 2]; 2] {
        [[self.a11, self.a12], [self.a21, self.a22]]
    }

    pub fn col(&self, j: usize) -> [C; 2] {
        match j {
            0 => [self.a11, self.a21],
            _ => [self.a12, self.a22],
        }
    }

    /// Entry with zero-based indices.
    pub fn get(&self, i: usize, j: usize) -> C {
        match (i, j) {
            (0, 0) => self.a11,
            (0, 1) => self.a12,
            (1, 0) => self.a21,
            _ => self.a22,
        }
    }

    pub fn entries(&self) -> [C; 4] {
        [self.a11, self.a12, self.a21, self.a22]
    }

    pub fn from_entries(e: [C; 4]) -> Self {
        Mat2C::new(e[0], e[1], e[2], e[3])
    }

    pub fn det(&self) -> C {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn trace(&self) -> C {
        self.a11 + self.a22
    }

    /// Adjugate; equals the inverse for unimodular matrices.
    pub fn adj(&self) -> Self {
        Mat2C::new(self.a22, -self.a12, -self.a21, self.a11)
    }

    pub fn inv(&self) -> Result<Self> {
        let d = self.det();
        if d.norm() <= SINGULAR_DET {
            return Err(Error::SingularMatrix(d.norm()));
        }
        Ok(self.adj() * d.inv())
    }

    pub fn transpose(&self) -> Self {
        Mat2C::new(self.a11, self.a21, self.a12, self.a22)
    }

    pub fn scale(&self, s: C) -> Self {
        Mat2C::new(self.a11 * s, self.a12 * s, self.a21 * s, self.a22 * s)
    }

    pub fn commutator(&self, other: &Mat2C) -> Self {
        *self * *other - *other * *self
    }

    /// `A X A⁻¹`.
    pub fn conj_by(&self, x: &Mat2C) -> Result<Self> {
        Ok(*self * *x * self.inv()?)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        (self.a11.norm_sqr() + self.a12.norm_sqr() + self.a21.norm_sqr() + self.a22.norm_sqr())
            .sqrt()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.entries().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn dist(&self, other: &Mat2C) -> f64 {
        (*self - *other).max_abs()
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn is_unimodular(&self, tol: f64) -> bool {
        (self.det() - ONE).norm() <= tol
    }

    /// Rescales by `det^{-1/2}` (principal root) so that the result is unimodular.
    pub fn normalize_det(&self) -> Result<Self> {
        let d = self.det();
        if d.norm() <= SINGULAR_DET {
            return Err(Error::SingularMatrix(d.norm()));
        }
        Ok(self.scale(d.sqrt().inv()))
    }

    pub fn apply(&self, v: [C; 2]) -> [C; 2] {
        [
            self.a11 * v[0] + self.a12 * v[1],
            self.a21 * v[0] + self.a22 * v[1],
        ]
    }

    /// Complex conjugate of each entry.
    pub fn conj(&self) -> Self {
        Mat2C::new(self.a11.conj(), self.a12.conj(), self.a21.conj(), self.a22.conj())
    }
}

impl fmt::Debug for Mat2C {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[[{}, {}], [{}, {}]]",
            self.a11, self.a12, self.a21, self.a22
        )
    }
}

impl fmt::Display for Mat2C {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl Mul for Mat2C {
    type Output = Mat2C;
    fn mul(self, b: Mat2C) -> Mat2C {
        Mat2C::new(
            self.a11 * b.a11 + self.a12 * b.a21,
            self.a11 * b.a12 + self.a12 * b.a22,
            self.a21 * b.a11 + self.a22 * b.a21,
            self.a21 * b.a12 + self.a22 * b.a22,
        )
    }
}

impl MulAssign for Mat2C {
    fn mul_assign(&mut self, b: Mat2C) {
        *self = *self * b;
    }
}

impl Mul<C> for Mat2C {
    type Output = Mat2C;
    fn mul(self, s: C) -> Mat2C {
        self.scale(s)
    }
}

impl Mul<Mat2C> for C {
    type Output = Mat2C;
    fn mul(self, m: Mat2C) -> Mat2C {
        m.scale(self)
    }
}

impl Mul<f64> for Mat2C {
    type Output = Mat2C;
    fn mul(self, s: f64) -> Mat2C {
        self.scale(re(s))
    }
}

impl Mul<Mat2C> for f64 {
    type Output = Mat2C;
    fn mul(self, m: Mat2C) -> Mat2C {
        m.scale(re(self))
    }
}

impl Div<C> for Mat2C {
    type Output = Mat2C;
    fn div(self, s: C) -> Mat2C {
        self.scale(s.inv())
    }
}

impl Add for Mat2C {
    type Output = Mat2C;
    fn add(self, b: Mat2C) -> Mat2C {
        Mat2C::new(
            self.a11 + b.a11,
            self.a12 + b.a12,
            self.a21 + b.a21,
            self.a22 + b.a22,
        )
    }
}

impl AddAssign for Mat2C {
    fn add_assign(&mut self, b: Mat2C) {
        *self = *self + b;
    }
}

impl Sub for Mat2C {
    type Output = Mat2C;
    fn sub(self, b: Mat2C) -> Mat2C {
        Mat2C::new(
            self.a11 - b.a11,
            self.a12 - b.a12,
            self.a21 - b.a21,
            self.a22 - b.a22,
        )
    }
}

impl SubAssign for Mat2C {
    fn sub_assign(&mut self, b: Mat2C) {
        *self = *self - b;
    }
}

/// `M − z·I`.
impl Sub<C> for Mat2C {
    type Output = Mat2C;
    fn sub(self, z: C) -> Mat2C {
        Mat2C::new(self.a11 - z, self.a12, self.a21, self.a22 - z)
    }
}

/// `M + z·I`.
impl Add<C> for Mat2C {
    type Output = Mat2C;
    fn add(self, z: C) -> Mat2C {
        Mat2C::new(self.a11 + z, self.a12, self.a21, self.a22 + z)
    }
}

impl Neg for Mat2C {
    type Output = Mat2C;
    fn neg(self) -> Mat2C {
        Mat2C::new(-self.a11, -self.a12, -self.a21, -self.a22)
    }
}

impl Serialize for Mat2C {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Mat2C {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = <[[C; 2]; 2]>::deserialize(d)?;
        Ok(Mat2C::from_rows(r))
    }
}

/// Eigenvalues and unit eigenvectors of a 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenPair2 {
    pub values: (C, C),
    pub vectors: ([C; 2], [C; 2]),
}

impl EigenPair2 {
    /// Matrix with columns `e₁, e₂` rescaled so that `det(e₁, e₂) = 1`.
    pub fn unimodular_basis(&self) -> Result<Mat2C> {
        let e = Mat2C::from_cols(self.vectors.0, self.vectors.1);
        let d = e.det();
        if d.norm() <= SINGULAR_DET {
            return Err(Error::SingularMatrix(d.norm()));
        }
        Ok(Mat2C::from_cols(
            self.vectors.0,
            [self.vectors.1[0] / d, self.vectors.1[1] / d],
        ))
    }

    /// Reassembles `E·diag(r)·E⁻¹`.
    pub fn reassemble(&self) -> Result<Mat2C> {
        let e = Mat2C::from_cols(self.vectors.0, self.vectors.1);
        Ok(e * Mat2C::diag(self.values.0, self.values.1) * e.inv()?)
    }
}

/// Normalizes a vector to unit length with its first nonzero component real positive.
pub fn normalize_vec(v: [C; 2]) -> [C; 2] {
    let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    let lead = if v[0].norm() > 1e-300 { v[0] } else { v[1] };
    let phase = lead.conj() / lead.norm();
    [v[0] * phase / n, v[1] * phase / n]
}

/// Eigenvector of `m` for the eigenvalue `r`, unit normalized with phase convention.
pub fn eigvec(m: &Mat2C, r: C) -> [C; 2] {
    // rows of M − r annihilate the eigenvector; take the better conditioned row
    let u = [m.a12, r - m.a11];
    let w = [r - m.a22, m.a21];
    let nu = u[0].norm_sqr() + u[1].norm_sqr();
    let nw = w[0].norm_sqr() + w[1].norm_sqr();
    let v = if nu >= nw { u } else { w };
    if nu.max(nw) == 0.0 {
        // M is a multiple of the identity
        return [ONE, ZERO];
    }
    normalize_vec(v)
}

/// Eigen-decomposition with the first eigenvalue of larger modulus
/// (ties broken by larger real part).
pub fn eig2(m: &Mat2C) -> Result<EigenPair2> {
    let half = m.trace() * 0.5;
    let disc = ((m.a11 - m.a22) * (m.a11 - m.a22) * 0.25 + m.a12 * m.a21).sqrt();
    let sep = (disc * 2.0).norm();
    if sep <= EIG_SEPARATION * (1.0 + half.norm()) {
        return Err(Error::DegenerateSpectrum(sep));
    }
    let (p, q) = (half + disc, half - disc);
    let (mut r1, mut r2) = if p.norm() > q.norm() || (p.norm() == q.norm() && p.re >= q.re) {
        (p, q)
    } else {
        (q, p)
    };
    // refine the smaller root through the determinant when it is cancellation-prone
    let d = m.det();
    if r1.norm() > 0.0 && r2.norm() < 1e-3 * r1.norm() {
        r2 = d / r1;
    }
    if r1.norm() == 0.0 {
        r1 = ZERO;
    }
    Ok(EigenPair2 {
        values: (r1, r2),
        vectors: (eigvec(m, r1), eigvec(m, r2)),
    })
}

/// Eigenvector basis for prescribed eigenvalues `(r, 1/r)` of a unimodular matrix,
/// normalized so that `det(e_r, e_{1/r}) = 1`.
pub fn eigenbasis_for(m: &Mat2C, r: C) -> Result<Mat2C> {
    let r2 = m.trace() - r;
    if (r - r2).norm() <= EIG_SEPARATION {
        return Err(Error::DegenerateSpectrum((r - r2).norm()));
    }
    let ep = EigenPair2 {
        values: (r, r2),
        vectors: (eigvec(m, r), eigvec(m, r2)),
    };
    ep.unimodular_basis()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_algebra() {
        let id = Mat2C::identity();
        assert_eq!(id * id, id);
        assert_eq!(id.det(), ONE);
        assert_eq!(id.commutator(&id), Mat2C::zero());
    }

    #[test]
    fn diagonal_inverse() {
        let a = Mat2C::diag(re(2.0), re(0.5));
        assert!((a * a.inv().unwrap()).dist(&Mat2C::identity()) < 1e-14);
    }

    #[test]
    fn singular_detected() {
        let a = Mat2C::new(ONE, ONE, ONE, ONE);
        assert!(matches!(a.inv(), Err(Error::SingularMatrix(_))));
    }

    #[test]
    fn eig_diag_and_rotation() {
        let e = eig2(&Mat2C::diag(re(3.0), re(1.0 / 3.0))).unwrap();
        assert!((e.values.0 - re(3.0)).norm() < 1e-15);
        assert!((e.values.1 - re(1.0 / 3.0)).norm() < 1e-15);
        assert!((e.vectors.0[0] - ONE).norm() < 1e-15 && e.vectors.0[1].norm() < 1e-15);
        assert!((e.vectors.1[1] - ONE).norm() < 1e-15 && e.vectors.1[0].norm() < 1e-15);

        let rot = Mat2C::new(ZERO, ONE, -ONE, ZERO);
        let e = eig2(&rot).unwrap();
        let mut v = [e.values.0, e.values.1];
        v.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        assert!((v[0] + I).norm() < 1e-15 && (v[1] - I).norm() < 1e-15);
    }

    #[test]
    fn degenerate_spectrum() {
        let m = Mat2C::upper(ONE);
        assert!(matches!(eig2(&m), Err(Error::DegenerateSpectrum(_))));
    }

    #[test]
    fn csv_roundtrip() {
        for z in [c(1.5, -2.25e-7), c(-3.0, 4.0), c(0.0, 0.0), c(1e300, -1e-300)] {
            assert_eq!(parse_csv(&fmt_csv(z)).unwrap(), z);
        }
    }

    #[test]
    fn json_pairs() {
        let m = Mat2C::new(c(1.0, 2.0), c(0.1, 0.0), ZERO, c(-1.0, 1.0 / 3.0));
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.starts_with("[[[1.0,2.0],[0.1,0.0]]"));
        let back: Mat2C = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }
}
