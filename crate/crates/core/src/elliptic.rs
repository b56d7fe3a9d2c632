//! Complete and incomplete elliptic integrals, Jacobi elliptic functions at
//! real and complex arguments, and the auxiliary function
//! `A(u|k) = (Dc(u) + (E - K) u / K) / k'` with `Dc(u) = ∫_0^u dc²`.
//!
//! Real arguments use the descending Landen (Bulirsch) iteration; complex
//! arguments combine it with Jacobi's imaginary transformation through the
//! addition formulas. Near the line `Im u ≡ K' (mod 2K')` the functions are
//! evaluated through the quarter-period shift `u -> u - iK'` so that the
//! common poles of `sn`, `cn`, `dn` never produce `∞/∞`.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::gauss_kronrod;

/// Stand-in for `K'` at `k = 0`, where the imaginary period is infinite.
pub const INFINITE_PERIOD_CAP: f64 = 1.0e300;

/// `|cn| < POLE_THRESHOLD` signals a pole of the quotients with `cn` in the
/// denominator.
pub const POLE_THRESHOLD: f64 = 1e-12;

/// Tolerance of the adaptive quadrature behind `Dc`.
pub const DC_QUADRATURE_TOL: f64 = 1e-13;

/// Minimum distance from a pole of `dc` at which `A` is evaluated.
pub const DC_POLE_GUARD: f64 = 1e-6;

/// Carlson's symmetric integral `R_F(x, y, z)`.
pub fn carlson_rf(x: f64, y: f64, z: f64) -> f64 {
    const ERRTOL: f64 = 1e-3;
    let (mut x, mut y, mut z) = (x, y, z);
    let (mut ave, mut dx, mut dy, mut dz);
    loop {
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lambda = sx * (sy + sz) + sy * sz;
        x = 0.25 * (x + lambda);
        y = 0.25 * (y + lambda);
        z = 0.25 * (z + lambda);
        ave = (x + y + z) / 3.0;
        dx = (ave - x) / ave;
        dy = (ave - y) / ave;
        dz = (ave - z) / ave;
        if dx.abs().max(dy.abs()).max(dz.abs()) <= ERRTOL {
            break;
        }
    }
    let e2 = dx * dy - dz * dz;
    let e3 = dx * dy * dz;
    (1.0 + (e2 / 24.0 - 0.1 - 3.0 * e3 / 44.0) * e2 + e3 / 14.0) / ave.sqrt()
}

/// Carlson's symmetric integral `R_D(x, y, z)`.
pub fn carlson_rd(x: f64, y: f64, z: f64) -> f64 {
    const ERRTOL: f64 = 1e-3;
    const C1: f64 = 3.0 / 14.0;
    const C2: f64 = 1.0 / 6.0;
    const C3: f64 = 9.0 / 22.0;
    const C4: f64 = 3.0 / 26.0;
    const C5: f64 = 0.25 * C3;
    const C6: f64 = 1.5 * C4;
    let (mut x, mut y, mut z) = (x, y, z);
    let mut sum = 0.0;
    let mut fac = 1.0;
    let (mut ave, mut dx, mut dy, mut dz);
    loop {
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lambda = sx * (sy + sz) + sy * sz;
        sum += fac / (sz * (z + lambda));
        fac *= 0.25;
        x = 0.25 * (x + lambda);
        y = 0.25 * (y + lambda);
        z = 0.25 * (z + lambda);
        ave = 0.2 * (x + y + 3.0 * z);
        dx = (ave - x) / ave;
        dy = (ave - y) / ave;
        dz = (ave - z) / ave;
        if dx.abs().max(dy.abs()).max(dz.abs()) <= ERRTOL {
            break;
        }
    }
    let ea = dx * dy;
    let eb = dz * dz;
    let ec = ea - eb;
    let ed = ea - 6.0 * eb;
    let ee = ed + ec + ec;
    3.0 * sum
        + fac
            * (1.0
                + ed * (-C1 + C5 * ed - C6 * dz * ee)
                + dz * (C2 * ee + dz * (-C3 * ec + dz * C4 * ea)))
            / (ave * ave.sqrt())
}

/// Complete integral of the first kind `K(k)`.
pub fn complete_k(k: f64) -> f64 {
    if k >= 1.0 {
        return INFINITE_PERIOD_CAP;
    }
    carlson_rf(0.0, (1.0 - k) * (1.0 + k), 1.0)
}

/// Complete integral of the second kind `E(k)`.
pub fn complete_e(k: f64) -> f64 {
    if k >= 1.0 {
        return 1.0;
    }
    let kp2 = (1.0 - k) * (1.0 + k);
    carlson_rf(0.0, kp2, 1.0) - k * k / 3.0 * carlson_rd(0.0, kp2, 1.0)
}

/// Real Jacobi triple by the descending Landen transformation, with the
/// complementary parameter `mc = k'^2` given directly.
fn sncndn_real(u: f64, mc: f64) -> (f64, f64, f64) {
    const CA: f64 = 1e-9;
    if mc == 0.0 {
        let cn = 1.0 / u.cosh();
        return (u.tanh(), cn, cn);
    }
    let mut em = [0.0_f64; 16];
    let mut en = [0.0_f64; 16];
    let mut a = 1.0;
    let mut dn = 1.0;
    let mut emc = mc;
    let mut c = 0.0;
    let mut levels = 0;
    for i in 0..16 {
        levels = i;
        em[i] = a;
        emc = emc.sqrt();
        en[i] = emc;
        c = 0.5 * (a + emc);
        if (a - emc).abs() <= CA * a {
            break;
        }
        emc *= a;
        a = c;
    }
    let uc = u * c;
    let mut sn = uc.sin();
    let mut cn = uc.cos();
    if sn != 0.0 {
        let mut a = cn / sn;
        c *= a;
        for ii in (0..=levels).rev() {
            let b = em[ii];
            a *= c;
            c *= dn;
            dn = (en[ii] + a) / (b + a);
            a = c / b;
        }
        let a = 1.0 / (c * c + 1.0).sqrt();
        sn = if sn >= 0.0 { a } else { -a };
        cn = c * sn;
    }
    (sn, cn, dn)
}

/// Reduce `x` into `[-half_period, half_period)` for a function of period
/// `2 * half_period`.
fn reduce_symmetric(x: f64, period: f64) -> f64 {
    let r = x - period * (x / period).round();
    if r >= 0.5 * period {
        r - period
    } else {
        r
    }
}

/// A fixed elliptic modulus with its derived constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticContext {
    k: f64,
    k_prime: f64,
    big_k: f64,
    big_k_prime: f64,
    big_e: f64,
    big_e_prime: f64,
}

/// A point of the torus `C / (4K Z + 4iK' Z)`, stored in canonical form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusPoint {
    u: Complex64,
}

impl TorusPoint {
    /// Reduce `u` modulo the lattice. Requires `k > 0`.
    pub fn new(u: Complex64, ctx: &EllipticContext) -> Result<Self> {
        if ctx.k() == 0.0 {
            return Err(Error::ModulusOutOfRange(0.0));
        }
        let re_period = 4.0 * ctx.big_k();
        let im_period = 4.0 * ctx.big_k_prime();
        let re = u.re.rem_euclid(re_period);
        let im = u.im.rem_euclid(im_period);
        // rem_euclid can return the period itself after rounding
        let re = if re >= re_period { 0.0 } else { re };
        let im = if im >= im_period { 0.0 } else { im };
        Ok(Self {
            u: Complex64::new(re, im),
        })
    }

    pub fn value(&self) -> Complex64 {
        self.u
    }
}

/// Jacobi functions at one complex argument, kept in a form that stays
/// finite at the common poles of `sn`, `cn` and `dn`.
#[derive(Debug, Clone, Copy)]
pub struct JacobiValues {
    repr: Repr,
    k: f64,
    at: Complex64,
}

#[derive(Debug, Clone, Copy)]
enum Repr {
    /// Plain values, `(sn, cn, dn)`.
    Direct(Complex64, Complex64, Complex64),
    /// `u = w + iK'` (up to `2iK'` shifts folded into `sign`), holding
    /// `(sn w, cn w, dn w)` and the sign applied to both `cn u` and `dn u`.
    Shifted(Complex64, Complex64, Complex64, f64),
}

impl JacobiValues {
    fn pole(&self, function: &'static str) -> Error {
        Error::Pole {
            function,
            re: self.at.re,
            im: self.at.im,
        }
    }

    fn checked(&self, value: Complex64, function: &'static str) -> Result<Complex64> {
        if value.is_finite() {
            Ok(value)
        } else {
            Err(self.pole(function))
        }
    }

    fn nonzero(&self, d: Complex64, function: &'static str) -> Result<Complex64> {
        if d.norm() < POLE_THRESHOLD {
            Err(self.pole(function))
        } else {
            Ok(d)
        }
    }

    pub fn sn(&self) -> Result<Complex64> {
        match self.repr {
            Repr::Direct(s, _, _) => Ok(s),
            Repr::Shifted(s, _, _, _) => {
                let d = self.nonzero(self.k * s, "sn")?;
                self.checked(1.0 / d, "sn")
            }
        }
    }

    pub fn cn(&self) -> Result<Complex64> {
        match self.repr {
            Repr::Direct(_, c, _) => Ok(c),
            Repr::Shifted(s, _, d, sign) => {
                let den = self.nonzero(self.k * s, "cn")?;
                Ok(-Complex64::i() * sign * d / den)
            }
        }
    }

    pub fn dn(&self) -> Result<Complex64> {
        match self.repr {
            Repr::Direct(_, _, d) => Ok(d),
            Repr::Shifted(s, c, _, sign) => {
                let den = self.nonzero(s, "dn")?;
                Ok(-Complex64::i() * sign * c / den)
            }
        }
    }

    /// `sc = sn / cn`.
    pub fn sc(&self) -> Result<Complex64> {
        match self.repr {
            Repr::Direct(s, c, _) => Ok(s / self.nonzero(c, "sc")?),
            Repr::Shifted(_, _, d, sign) => Ok(Complex64::i() * sign / self.nonzero(d, "sc")?),
        }
    }

    /// `dc = dn / cn`.
    pub fn dc(&self) -> Result<Complex64> {
        match self.repr {
            Repr::Direct(_, c, d) => Ok(d / self.nonzero(c, "dc")?),
            Repr::Shifted(_, c, d, _) => Ok(self.k * c / self.nonzero(d, "dc")?),
        }
    }

    /// `ns = 1 / sn`.
    pub fn ns(&self) -> Result<Complex64> {
        match self.repr {
            Repr::Direct(s, _, _) => Ok(1.0 / self.nonzero(s, "ns")?),
            Repr::Shifted(s, _, _, _) => Ok(self.k * s),
        }
    }

    /// `nc = 1 / cn`.
    pub fn nc(&self) -> Result<Complex64> {
        match self.repr {
            Repr::Direct(_, c, _) => Ok(1.0 / self.nonzero(c, "nc")?),
            Repr::Shifted(s, _, d, sign) => {
                Ok(Complex64::i() * sign * self.k * s / self.nonzero(d, "nc")?)
            }
        }
    }

    /// `nd = 1 / dn`.
    pub fn nd(&self) -> Result<Complex64> {
        match self.repr {
            Repr::Direct(_, _, d) => Ok(1.0 / self.nonzero(d, "nd")?),
            Repr::Shifted(s, c, _, sign) => {
                Ok(Complex64::i() * sign * s / self.nonzero(c, "nd")?)
            }
        }
    }

    /// `sn · cn / dn`.
    pub fn sn_cn_over_dn(&self) -> Result<Complex64> {
        match self.repr {
            Repr::Direct(s, c, d) => Ok(s * c / self.nonzero(d, "sn cn / dn")?),
            Repr::Shifted(s, c, d, _) => {
                let den = self.nonzero(self.k * self.k * s * c, "sn cn / dn")?;
                Ok(d / den)
            }
        }
    }
}

impl EllipticContext {
    /// Build the context for modulus `k ∈ [0, 1)`.
    pub fn new(k: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&k) || !k.is_finite() {
            return Err(Error::ModulusOutOfRange(k));
        }
        let k_prime = ((1.0 - k) * (1.0 + k)).sqrt();
        let big_k = complete_k(k);
        let big_e = complete_e(k);
        let (big_k_prime, big_e_prime) = if k == 0.0 {
            (INFINITE_PERIOD_CAP, 1.0)
        } else {
            (complete_k(k_prime), complete_e(k_prime))
        };
        Ok(Self {
            k,
            k_prime,
            big_k,
            big_k_prime,
            big_e,
            big_e_prime,
        })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// Complementary modulus `k' = sqrt(1 - k²)`.
    pub fn k_prime(&self) -> f64 {
        self.k_prime
    }

    /// `K(k)`.
    pub fn big_k(&self) -> f64 {
        self.big_k
    }

    /// `K'(k) = K(k')`; [`INFINITE_PERIOD_CAP`] when `k = 0`.
    pub fn big_k_prime(&self) -> f64 {
        self.big_k_prime
    }

    /// `E(k)`.
    pub fn big_e(&self) -> f64 {
        self.big_e
    }

    /// `E'(k) = E(k')`.
    pub fn big_e_prime(&self) -> f64 {
        self.big_e_prime
    }

    /// Residual of Legendre's relation `E K' + E' K - K K' - π/2`.
    pub fn legendre_residual(&self) -> f64 {
        if self.k == 0.0 {
            return 0.0;
        }
        self.big_e * self.big_k_prime + self.big_e_prime * self.big_k
            - self.big_k * self.big_k_prime
            - FRAC_PI_2
    }

    /// Conversion factor from radians to elliptic angle units, `2K/π`.
    pub fn angle_scale(&self) -> f64 {
        2.0 * self.big_k / std::f64::consts::PI
    }

    /// Real Jacobi triple `(sn, cn, dn)`.
    pub fn jacobi_real(&self, u: f64) -> (f64, f64, f64) {
        if self.k == 0.0 {
            return (u.sin(), u.cos(), 1.0);
        }
        let x = reduce_symmetric(u, 4.0 * self.big_k);
        sncndn_real(x, self.k_prime * self.k_prime)
    }

    fn jacobi_imag_part(&self, y: f64) -> (f64, f64, f64) {
        sncndn_real(y, self.k * self.k)
    }

    /// Jacobi functions at complex `u`.
    pub fn jacobi_values(&self, u: Complex64) -> JacobiValues {
        if self.k == 0.0 {
            return JacobiValues {
                repr: Repr::Direct(u.sin(), u.cos(), Complex64::new(1.0, 0.0)),
                k: 0.0,
                at: u,
            };
        }
        let kp = self.big_k_prime;
        let x = reduce_symmetric(u.re, 4.0 * self.big_k);
        // y into [-K', K'), tracking the sign flip of cn, dn under 2iK'
        let mut y = u.im;
        let mut sign = 1.0;
        let turns = (y / (2.0 * kp)).round();
        y -= 2.0 * kp * turns;
        if (turns as i64).rem_euclid(2) == 1 {
            sign = -1.0;
        }
        if y.abs() >= 0.5 * kp {
            // u = w ± iK' with |Im w| <= K'/2
            let (w_im, shift_sign) = if y > 0.0 { (y - kp, 1.0) } else { (y + kp, -1.0) };
            let (s, c, d) = self.addition(x, w_im);
            JacobiValues {
                repr: Repr::Shifted(s, c, d, sign * shift_sign),
                k: self.k,
                at: u,
            }
        } else {
            let (s, c, d) = self.addition(x, y);
            JacobiValues {
                repr: Repr::Direct(s, c * sign, d * sign),
                k: self.k,
                at: u,
            }
        }
    }

    /// Jacobi triple at `x + iy` for `|y|` at most `K'/2`, by the addition
    /// formulas with the imaginary transformation.
    fn addition(&self, x: f64, y: f64) -> (Complex64, Complex64, Complex64) {
        let (s, c, d) = sncndn_real(x, self.k_prime * self.k_prime);
        if y == 0.0 {
            return (
                Complex64::new(s, 0.0),
                Complex64::new(c, 0.0),
                Complex64::new(d, 0.0),
            );
        }
        // sn(iy|k) = i sc(y|k'), cn(iy|k) = nc(y|k'), dn(iy|k) = dc(y|k')
        let (s1, c1, d1) = self.jacobi_imag_part(y);
        let k2 = self.k * self.k;
        let den = c1 * c1 + k2 * s * s * s1 * s1;
        let sn = Complex64::new(s * d1, c * d * s1 * c1) / den;
        let cn = Complex64::new(c * c1, -s * d * s1 * d1) / den;
        let dn = Complex64::new(d * c1 * d1, -k2 * s * c * s1) / den;
        (sn, cn, dn)
    }

    /// `(sn, cn, dn)` at complex `u`. Fails at a pole of the triple.
    pub fn jacobi(&self, u: Complex64) -> Result<(Complex64, Complex64, Complex64)> {
        let v = self.jacobi_values(u);
        Ok((v.sn()?, v.cn()?, v.dn()?))
    }

    pub fn sc(&self, u: Complex64) -> Result<Complex64> {
        self.jacobi_values(u).sc()
    }

    pub fn dc(&self, u: Complex64) -> Result<Complex64> {
        self.jacobi_values(u).dc()
    }

    pub fn ns(&self, u: Complex64) -> Result<Complex64> {
        self.jacobi_values(u).ns()
    }

    pub fn nc(&self, u: Complex64) -> Result<Complex64> {
        self.jacobi_values(u).nc()
    }

    pub fn nd(&self, u: Complex64) -> Result<Complex64> {
        self.jacobi_values(u).nd()
    }

    /// Real `sc`, failing at `u ≡ K (mod 2K)`.
    pub fn sc_real(&self, u: f64) -> Result<f64> {
        let (s, c, _) = self.jacobi_real(u);
        if c.abs() < POLE_THRESHOLD {
            return Err(Error::Pole {
                function: "sc",
                re: u,
                im: 0.0,
            });
        }
        Ok(s / c)
    }

    /// Real `dc`, failing at `u ≡ K (mod 2K)`.
    pub fn dc_real(&self, u: f64) -> Result<f64> {
        let (_, c, d) = self.jacobi_real(u);
        if c.abs() < POLE_THRESHOLD {
            return Err(Error::Pole {
                function: "dc",
                re: u,
                im: 0.0,
            });
        }
        Ok(d / c)
    }

    /// Incomplete integral of the first kind in the modular-sine convention,
    /// `F(x) = ∫_0^x dt / sqrt((1 - t²)(1 - k² t²))`, so that `sn(F(x)) = x`.
    pub fn big_f(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::ArgumentOutOfRange {
                value: x,
                range: "[0, 1]",
            });
        }
        if x == 1.0 {
            return Ok(self.big_k);
        }
        let x2 = x * x;
        Ok(x * carlson_rf((1.0 - x) * (1.0 + x), 1.0 - self.k * self.k * x2, 1.0))
    }

    /// `Dc(u) = ∫_0^u dc²(v) dv` for real `u` in `(0, 2K)`, away from the
    /// pole at `K`. Values past the pole use `Dc(u) = 2(K - E) - Dc(2K - u)`.
    pub fn dc_integral(&self, u: f64) -> Result<f64> {
        let big_k = self.big_k;
        if !(0.0..2.0 * big_k).contains(&u) {
            return Err(Error::ArgumentOutOfRange {
                value: u,
                range: "[0, 2K)",
            });
        }
        if (u - big_k).abs() < DC_POLE_GUARD {
            return Err(Error::Quadrature(format!(
                "u = {u} within {DC_POLE_GUARD} of the dc pole at K"
            )));
        }
        if u > big_k {
            return Ok(2.0 * (big_k - self.big_e) - self.dc_integral(2.0 * big_k - u)?);
        }
        let mc = self.k_prime * self.k_prime;
        gauss_kronrod(
            |v| {
                // dc(K − w) = ns(w) keeps full precision near the pole.
                let q = if v > 0.5 * big_k {
                    1.0 / sncndn_real(big_k - v, mc).0
                } else {
                    let (_, c, d) = sncndn_real(v, mc);
                    d / c
                };
                q * q
            },
            0.0,
            u,
            DC_QUADRATURE_TOL,
        )
    }

    /// The auxiliary function `A(u|k)` entering the squared masses.
    pub fn a_func(&self, u: f64) -> Result<f64> {
        let dc_int = self.dc_integral(u)?;
        Ok((dc_int + (self.big_e - self.big_k) / self.big_k * u) / self.k_prime)
    }
}
