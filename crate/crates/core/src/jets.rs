//! Forward-mode truncated Taylor (jet) arithmetic over the real and
//! imaginary parts of a bundle chart's complex coordinates, with mixed
//! Wirtinger-derivative extraction.
//!
//! A metric value `G(z, v)` is evaluated once as an order-4 jet; every
//! derivative the curvature formulas need (`G_i`, `G_{i j-bar}`,
//! `G_{i j-bar alpha beta-bar}`, ...) is then a linear combination of the
//! stored Taylor coefficients. The Wirtinger convention is fixed once:
//! for a complex coordinate `w = x + iy`,
//!
//! ```text
//! d/dw     = (d/dx - i d/dy) / 2
//! d/dw-bar = (d/dx + i d/dy) / 2
//! ```
//!
//! Jets are immutable values and all operations are pure.

use crate::{Error, Result};
use num_complex::Complex64;
use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

/// Maximum total derivative order carried by the public jet type.
pub const JET_ORDER: usize = 4;

const MAX_COMPLEX_COORDS: usize = 8;

type C64 = Complex64;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Enumeration tables for multi-indices of total degree <= order in the
/// frame's real variables, plus the product table used by multiplication.
struct OrderTables {
    /// Exponent vectors, sorted by (total degree, lexicographic).
    exponents: Vec<Vec<u8>>,
    /// Packed exponent key -> enumeration index.
    index_of: HashMap<u64, u32>,
    /// (i, j, k) with exponents[i] + exponents[j] = exponents[k]; grouped so
    /// that j only ranges over degrees <= order - degree(i).
    product_triples: Vec<(u32, u32, u32)>,
    /// factorial(exponents[k]) = prod of entry factorials, per index.
    factorial: Vec<f64>,
}

fn pack(exp: &[u8]) -> u64 {
    let mut key = 0u64;
    for (s, &e) in exp.iter().enumerate() {
        key |= (e as u64) << (3 * s);
    }
    key
}

fn enumerate_exponents(nvars: usize, order: usize) -> Vec<Vec<u8>> {
    let mut all = Vec::new();
    for deg in 0..=order {
        let mut current = vec![0u8; nvars];
        gen_degree(nvars, deg, 0, &mut current, &mut all);
    }
    all
}

fn gen_degree(nvars: usize, remaining: usize, var: usize, current: &mut [u8], out: &mut Vec<Vec<u8>>) {
    if var == nvars - 1 {
        current[var] = remaining as u8;
        out.push(current.to_vec());
        current[var] = 0;
        return;
    }
    for take in (0..=remaining).rev() {
        current[var] = take as u8;
        gen_degree(nvars, remaining - take, var + 1, current, out);
    }
    current[var] = 0;
}

impl OrderTables {
    fn build(nvars: usize, order: usize) -> Self {
        let exponents = enumerate_exponents(nvars, order);
        let degree: Vec<u8> = exponents
            .iter()
            .map(|e| e.iter().map(|&x| x as usize).sum::<usize>() as u8)
            .collect();
        let mut band_start = vec![0usize; order + 2];
        for d in 0..=order {
            band_start[d + 1] = degree.iter().filter(|&&g| (g as usize) <= d).count();
        }
        let mut index_of = HashMap::with_capacity(exponents.len() * 2);
        for (i, e) in exponents.iter().enumerate() {
            index_of.insert(pack(e), i as u32);
        }
        let mut product_triples = Vec::new();
        let mut sum = vec![0u8; nvars];
        for i in 0..exponents.len() {
            let room = order - degree[i] as usize;
            for j in 0..band_start[room + 1] {
                for s in 0..nvars {
                    sum[s] = exponents[i][s] + exponents[j][s];
                }
                let k = index_of[&pack(&sum)];
                product_triples.push((i as u32, j as u32, k));
            }
        }
        let factorial: Vec<f64> = exponents
            .iter()
            .map(|e| {
                e.iter()
                    .map(|&x| match x {
                        0 | 1 => 1.0,
                        2 => 2.0,
                        3 => 6.0,
                        _ => 24.0,
                    })
                    .product()
            })
            .collect();
        OrderTables {
            exponents,
            index_of,
            product_triples,
            factorial,
        }
    }

    fn len(&self) -> usize {
        self.exponents.len()
    }
}

struct FrameInner {
    n: usize,
    r: usize,
    tables: [OnceLock<Arc<OrderTables>>; JET_ORDER],
}

/// The fixed chart frame: `n` base holomorphic coordinates `z^alpha` and `r`
/// fibre holomorphic coordinates `v^i`, enumerated with real slots
/// `2a` (real part) and `2a + 1` (imaginary part) for holomorphic
/// coordinate `a` in `0..n+r` (base coordinates first).
///
/// Cheap to clone; frames compare equal when their shapes agree, and all
/// jets and forms of one run must share a single frame.
#[derive(Clone)]
pub struct CoordinateFrame {
    inner: Arc<FrameInner>,
}

impl std::fmt::Debug for CoordinateFrame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "CoordinateFrame(n={}, r={})", self.n(), self.r())
    }
}

impl PartialEq for CoordinateFrame {
    fn eq(&self, other: &Self) -> bool {
        self.n() == other.n() && self.r() == other.r()
    }
}

impl CoordinateFrame {
    pub fn new(n: usize, r: usize) -> Result<Self> {
        if n < 1 || r < 1 {
            return Err(Error::InvalidConfig(format!(
                "frame needs n >= 1 and r >= 1, got n={n}, r={r}"
            )));
        }
        if n + r > MAX_COMPLEX_COORDS {
            return Err(Error::InvalidConfig(format!(
                "frame with n + r = {} exceeds the supported desk scale {}",
                n + r,
                MAX_COMPLEX_COORDS
            )));
        }
        Ok(CoordinateFrame {
            inner: Arc::new(FrameInner {
                n,
                r,
                tables: Default::default(),
            }),
        })
    }

    pub fn n(&self) -> usize {
        self.inner.n
    }

    pub fn r(&self) -> usize {
        self.inner.r
    }

    /// Number of complex coordinates.
    pub fn coords(&self) -> usize {
        self.inner.n + self.inner.r
    }

    /// Number of real variables.
    pub fn real_vars(&self) -> usize {
        2 * self.coords()
    }

    /// Coordinate id of `z^alpha` (0-based).
    pub fn z_id(&self, alpha: usize) -> usize {
        debug_assert!(alpha < self.n());
        alpha
    }

    /// Coordinate id of `v^i` (0-based).
    pub fn v_id(&self, i: usize) -> usize {
        debug_assert!(i < self.r());
        self.n() + i
    }

    fn tables(&self, order: usize) -> Arc<OrderTables> {
        assert!((1..=JET_ORDER).contains(&order));
        self.inner.tables[order - 1]
            .get_or_init(|| Arc::new(OrderTables::build(self.real_vars(), order)))
            .clone()
    }

    /// Coefficient count of a jet of the given order on this frame.
    pub fn coefficient_count(&self, order: usize) -> usize {
        self.tables(order).len()
    }
}

/// A multiset of holomorphic and antiholomorphic coordinate ids defining one
/// mixed Wirtinger derivative, e.g. `{v^i ; v^j-bar, z^beta-bar}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WirtingerIndex {
    pub holo: Vec<usize>,
    pub anti: Vec<usize>,
}

impl WirtingerIndex {
    pub fn new(holo: impl Into<Vec<usize>>, anti: impl Into<Vec<usize>>) -> Self {
        WirtingerIndex {
            holo: holo.into(),
            anti: anti.into(),
        }
    }

    pub fn order(&self) -> usize {
        self.holo.len() + self.anti.len()
    }
}

/// Truncated Taylor expansion of a scalar function of the chart coordinates,
/// centred at `basepoint`, in the frame's real variables.
#[derive(Clone)]
pub struct Jet {
    frame: CoordinateFrame,
    order: usize,
    basepoint: Arc<Vec<C64>>,
    coeffs: Vec<C64>,
}

impl std::fmt::Debug for Jet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "Jet(order={}, value={}, coeffs={})",
            self.order,
            self.value(),
            self.coeffs.len()
        )
    }
}

impl Jet {
    fn compatible(&self, other: &Jet) {
        assert!(
            self.frame == other.frame && self.order == other.order,
            "jet operands must share one frame and order"
        );
        assert!(
            self.basepoint
                .iter()
                .zip(other.basepoint.iter())
                .all(|(a, b)| a == b),
            "jet operands must share one basepoint"
        );
    }

    pub fn frame(&self) -> &CoordinateFrame {
        &self.frame
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn basepoint(&self) -> &[C64] {
        &self.basepoint
    }

    /// Function value at the basepoint.
    pub fn value(&self) -> C64 {
        self.coeffs[0]
    }

    /// Largest imaginary part over all Taylor coefficients; zero for a jet
    /// of a genuinely real-valued function.
    pub fn imag_magnitude(&self) -> f64 {
        self.coeffs.iter().map(|c| c.im.abs()).fold(0.0, f64::max)
    }

    /// Error if the jet is not real-valued to the documented tolerance
    /// (1e-10 absolute on every coefficient).
    pub fn check_real(&self) -> Result<()> {
        let imag = self.imag_magnitude();
        if imag > 1e-10 {
            return Err(Error::NotReal { imag });
        }
        Ok(())
    }

    /// Re-tags the jet onto the basepoint of `other` without touching
    /// coefficients; sound only when the represented function does not
    /// depend on the coordinates whose basepoint entries differ.
    pub(crate) fn with_basepoint_of(&self, other: &Jet) -> Jet {
        debug_assert!(self.frame == other.frame && self.order == other.order);
        Jet {
            frame: self.frame.clone(),
            order: self.order,
            basepoint: other.basepoint.clone(),
            coeffs: self.coeffs.clone(),
        }
    }

    fn zero_like(&self) -> Jet {
        Jet {
            frame: self.frame.clone(),
            order: self.order,
            basepoint: self.basepoint.clone(),
            coeffs: vec![c(0.0, 0.0); self.coeffs.len()],
        }
    }

    pub fn add(&self, other: &Jet) -> Jet {
        self.compatible(other);
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, other: &Jet) -> Jet {
        self.compatible(other);
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *a -= b;
        }
        out
    }

    pub fn mul(&self, other: &Jet) -> Jet {
        self.compatible(other);
        let tables = self.frame.tables(self.order);
        let mut out = self.zero_like();
        let zero = c(0.0, 0.0);
        for &(i, j, k) in &tables.product_triples {
            let a = self.coeffs[i as usize];
            if a == zero {
                continue;
            }
            let b = other.coeffs[j as usize];
            if b == zero {
                continue;
            }
            out.coeffs[k as usize] += a * b;
        }
        out
    }

    pub fn scale(&self, s: C64) -> Jet {
        let mut out = self.clone();
        for a in out.coeffs.iter_mut() {
            *a *= s;
        }
        out
    }

    pub fn add_scalar(&self, s: C64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += s;
        out
    }

    /// Evaluates `sum_m series[m] * (self - value)^m`, the common core of all
    /// analytic unary operations. `series.len()` must be `order + 1`.
    fn compose(&self, series: &[C64]) -> Jet {
        let mut u = self.clone();
        u.coeffs[0] = c(0.0, 0.0);
        let mut out = self.zero_like();
        out.coeffs[0] = series[0];
        let mut power = u.clone();
        for m in 1..=self.order {
            let s = series[m];
            for (o, p) in out.coeffs.iter_mut().zip(&power.coeffs) {
                *o += s * p;
            }
            if m < self.order {
                power = power.mul(&u);
            }
        }
        out
    }

    pub fn div(&self, other: &Jet) -> Result<Jet> {
        self.compatible(other);
        let b0 = other.value();
        if b0.norm() < 1e-12 {
            return Err(Error::DivisionNearZero { value: b0 });
        }
        let mut series = Vec::with_capacity(self.order + 1);
        let inv = c(1.0, 0.0) / b0;
        let mut p = inv;
        for _ in 0..=self.order {
            series.push(p);
            p *= -inv;
        }
        Ok(self.mul(&other.compose(&series)))
    }

    fn real_positive_value(&self) -> Result<f64> {
        let v0 = self.value();
        if v0.im.abs() > 1e-10 * v0.re.abs().max(1.0) || v0.re <= 1e-12 {
            return Err(Error::LogNonPositive { value: v0 });
        }
        Ok(v0.re)
    }

    /// Natural logarithm; requires a real-positive value at the basepoint.
    pub fn ln(&self) -> Result<Jet> {
        let v0 = self.real_positive_value()?;
        let mut series = Vec::with_capacity(self.order + 1);
        series.push(c(v0.ln(), 0.0));
        let inv = 1.0 / v0;
        let mut p = inv;
        for m in 1..=self.order {
            let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
            series.push(c(sign * p / m as f64, 0.0));
            p *= inv;
        }
        Ok(self.compose(&series))
    }

    pub fn exp(&self) -> Jet {
        let e0 = self.value().exp();
        let mut series = Vec::with_capacity(self.order + 1);
        let mut fact = 1.0;
        for m in 0..=self.order {
            if m > 0 {
                fact *= m as f64;
            }
            series.push(e0 / fact);
        }
        self.compose(&series)
    }

    /// Real power `self^p`; requires a real-positive value at the basepoint.
    pub fn powf(&self, p: f64) -> Result<Jet> {
        let v0 = self.real_positive_value()?;
        let mut series = Vec::with_capacity(self.order + 1);
        let mut binom = 1.0;
        for m in 0..=self.order {
            if m > 0 {
                binom *= (p - (m as f64 - 1.0)) / m as f64;
            }
            series.push(c(binom * v0.powf(p - m as f64), 0.0));
        }
        Ok(self.compose(&series))
    }

    /// Complex conjugate of the represented function. In real coordinates
    /// this conjugates every coefficient; the index set is untouched.
    pub fn conj(&self) -> Jet {
        let mut out = self.clone();
        for a in out.coeffs.iter_mut() {
            *a = a.conj();
        }
        out
    }

    /// Real part of the represented function.
    pub fn re(&self) -> Jet {
        let mut out = self.clone();
        for a in out.coeffs.iter_mut() {
            *a = c(a.re, 0.0);
        }
        out
    }

    /// Mixed Wirtinger derivative at the basepoint, including the multi-index
    /// factorial normalization of the stored Taylor coefficients.
    pub fn wirtinger(&self, idx: &WirtingerIndex) -> Result<C64> {
        if idx.order() > self.order {
            return Err(Error::OrderOverflow {
                max: self.order,
                got: idx.order(),
            });
        }
        let tables = self.frame.tables(self.order);
        let nfac = idx.order();
        // Each factor is (d/dx -+ i d/dy)/2; expand the product over the
        // 2^nfac choices of taking the x- or the y-derivative. Buffers live
        // on the stack: at most 4 factors and 16 real variables.
        let mut factors = [(0usize, 0usize, c(0.0, 0.0)); JET_ORDER];
        for (slot, &a) in idx.holo.iter().enumerate() {
            debug_assert!(a < self.frame.coords());
            factors[slot] = (2 * a, 2 * a + 1, c(0.0, -0.5));
        }
        for (slot, &a) in idx.anti.iter().enumerate() {
            debug_assert!(a < self.frame.coords());
            factors[idx.holo.len() + slot] = (2 * a, 2 * a + 1, c(0.0, 0.5));
        }
        let nvars = self.frame.real_vars();
        let mut total = c(0.0, 0.0);
        let mut exp = [0u8; 2 * MAX_COMPLEX_COORDS];
        for choice in 0u32..(1 << nfac) {
            exp.iter_mut().for_each(|e| *e = 0);
            let mut weight = c(1.0, 0.0);
            for (f, &(xslot, yslot, yweight)) in factors[..nfac].iter().enumerate() {
                if choice & (1 << f) == 0 {
                    exp[xslot] += 1;
                    weight *= c(0.5, 0.0);
                } else {
                    exp[yslot] += 1;
                    weight *= yweight;
                }
            }
            let k = tables.index_of[&pack(&exp[..nvars])] as usize;
            total += weight * self.coeffs[k] * tables.factorial[k];
        }
        Ok(total)
    }
}

impl std::ops::Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        Jet::add(self, rhs)
    }
}

impl std::ops::Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        Jet::sub(self, rhs)
    }
}

impl std::ops::Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        Jet::mul(self, rhs)
    }
}

/// Seeds one exact coordinate jet per holomorphic coordinate of the frame at
/// the given basepoint (order 4). Conjugate coordinates come from [`Jet::conj`].
pub fn seed(frame: &CoordinateFrame, basepoint: &[C64]) -> Result<Vec<Jet>> {
    seed_with_order(frame, basepoint, JET_ORDER)
}

/// Seeds coordinate jets of a reduced order; internal fast path for
/// integrands that only consume second derivatives.
pub(crate) fn seed_with_order(
    frame: &CoordinateFrame,
    basepoint: &[C64],
    order: usize,
) -> Result<Vec<Jet>> {
    if basepoint.len() != frame.coords() {
        return Err(Error::BasepointMismatch {
            want: frame.coords(),
            got: basepoint.len(),
        });
    }
    let tables = frame.tables(order);
    let bp = Arc::new(basepoint.to_vec());
    let mut out = Vec::with_capacity(frame.coords());
    for a in 0..frame.coords() {
        let mut coeffs = vec![c(0.0, 0.0); tables.len()];
        coeffs[0] = basepoint[a];
        let mut exp = vec![0u8; frame.real_vars()];
        exp[2 * a] = 1;
        coeffs[tables.index_of[&pack(&exp)] as usize] = c(1.0, 0.0);
        exp[2 * a] = 0;
        exp[2 * a + 1] = 1;
        coeffs[tables.index_of[&pack(&exp)] as usize] = c(0.0, 1.0);
        out.push(Jet {
            frame: frame.clone(),
            order,
            basepoint: bp.clone(),
            coeffs,
        });
    }
    Ok(out)
}

/// Constant jet at the same basepoint as `like`.
pub fn constant_like(like: &Jet, value: C64) -> Jet {
    let mut out = like.zero_like();
    out.coeffs[0] = value;
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn frame_1_2() -> CoordinateFrame {
        CoordinateFrame::new(1, 2).unwrap()
    }

    fn wz(alpha: usize) -> usize {
        alpha
    }

    fn wv(frame: &CoordinateFrame, i: usize) -> usize {
        frame.v_id(i)
    }

    #[test]
    fn coefficient_count_matches_combinatorics() {
        // degree <= 4 in 6 real variables: C(10, 4) = 210
        let f = frame_1_2();
        assert_eq!(f.coefficient_count(4), 210);
        // degree <= 4 in 2(n+r) = 10 variables: C(14, 4) = 1001
        let f = CoordinateFrame::new(2, 3).unwrap();
        assert_eq!(f.coefficient_count(4), 1001);
    }

    #[test]
    fn seed_coordinate_jet_shape() {
        let f = frame_1_2();
        let jets = seed(&f, &[c(0.5, 0.0), c(2.0, 0.0), c(0.0, 0.0)]).unwrap();
        let z = &jets[0];
        assert_eq!(z.value(), c(0.5, 0.0));
        // dz/dz = 1, dz/dz-bar = 0
        let dz = z.wirtinger(&WirtingerIndex::new(vec![wz(0)], vec![])).unwrap();
        let dzb = z.wirtinger(&WirtingerIndex::new(vec![], vec![wz(0)])).unwrap();
        assert_abs_diff_eq!(dz.re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(dz.im, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(dzb.norm(), 0.0, epsilon = 1e-15);
        // holomorphy of the fibre coordinate
        let v = &jets[1];
        let dv = v.wirtinger(&WirtingerIndex::new(vec![wv(&f, 0)], vec![])).unwrap();
        let dvb = v.wirtinger(&WirtingerIndex::new(vec![], vec![wv(&f, 0)])).unwrap();
        assert_abs_diff_eq!(dv.re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(dvb.norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn norm_squared_hessian() {
        let f = frame_1_2();
        let jets = seed(&f, &[c(0.1, 0.0), c(2.0, 0.0), c(0.0, 0.0)]).unwrap();
        let v = &jets[1];
        let prod = v.mul(&v.conj());
        assert_abs_diff_eq!(prod.value().re, 4.0, epsilon = 1e-15);
        let mixed = prod
            .wirtinger(&WirtingerIndex::new(vec![wv(&f, 0)], vec![wv(&f, 0)]))
            .unwrap();
        assert_abs_diff_eq!(mixed.re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(mixed.im, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn flat_metric_jet_values() {
        // G = |v1|^2 + |v2|^2 at v = (1, 1)
        let f = frame_1_2();
        let jets = seed(&f, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let g = &jets[1].mul(&jets[1].conj()) + &jets[2].mul(&jets[2].conj());
        assert_abs_diff_eq!(g.value().re, 2.0, epsilon = 1e-15);
        let g11 = g
            .wirtinger(&WirtingerIndex::new(vec![wv(&f, 0)], vec![wv(&f, 0)]))
            .unwrap();
        assert_abs_diff_eq!(g11.re, 1.0, epsilon = 1e-15);
        let g12 = g
            .wirtinger(&WirtingerIndex::new(vec![wv(&f, 0)], vec![wv(&f, 1)]))
            .unwrap();
        assert_abs_diff_eq!(g12.norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn fubini_study_log_hessian_at_origin() {
        // log(1 + |z|^2) at z = 0: d^2/dz dz-bar = 1
        let f = frame_1_2();
        let jets = seed(&f, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let z = &jets[0];
        let one = constant_like(z, c(1.0, 0.0));
        let g = (&one + &z.mul(&z.conj())).ln().unwrap();
        let mixed = g
            .wirtinger(&WirtingerIndex::new(vec![wz(0)], vec![wz(0)]))
            .unwrap();
        assert_abs_diff_eq!(mixed.re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(mixed.im, 0.0, epsilon = 1e-14);
        // fourth mixed derivative of log(1+|z|^2) at 0 is -2
        let quartic = g
            .wirtinger(&WirtingerIndex::new(vec![wz(0), wz(0)], vec![wz(0), wz(0)]))
            .unwrap();
        assert_abs_diff_eq!(quartic.re, -2.0, epsilon = 1e-12);
    }

    #[test]
    fn quartic_norm_derivative() {
        // |v1|^4 at v1 = 1: d^4 / dv^2 dv-bar^2 = 4
        let f = frame_1_2();
        let jets = seed(&f, &[c(0.3, 0.0), c(1.0, 0.0), c(0.5, 0.0)]).unwrap();
        let v = &jets[1];
        let n2 = v.mul(&v.conj());
        let n4 = n2.mul(&n2);
        let d = n4
            .wirtinger(&WirtingerIndex::new(
                vec![wv(&f, 0), wv(&f, 0)],
                vec![wv(&f, 0), wv(&f, 0)],
            ))
            .unwrap();
        assert_abs_diff_eq!(d.re, 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.im, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn log_exp_roundtrip() {
        let f = frame_1_2();
        let jets = seed(&f, &[c(0.4, -0.2), c(1.1, 0.3), c(-0.5, 0.8)]).unwrap();
        // A generic real-positive-valued jet with dense coefficients.
        let mut g = constant_like(&jets[0], c(1.5, 0.0));
        for j in &jets {
            g = &g + &j.mul(&j.conj());
        }
        let h = g.ln().unwrap().exp();
        for (a, b) in g.coeffs.iter().zip(&h.coeffs) {
            assert!((a - b).norm() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn division_near_zero_is_flagged() {
        let f = frame_1_2();
        let jets = seed(&f, &[c(0.0, 0.0), c(1e-8, 0.0), c(0.0, 0.0)]).unwrap();
        let tiny = jets[1].mul(&jets[1].conj());
        assert!(matches!(
            jets[0].div(&tiny),
            Err(Error::DivisionNearZero { .. })
        ));
    }

    #[test]
    fn log_of_negative_is_flagged() {
        let f = frame_1_2();
        let jets = seed(&f, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let neg = constant_like(&jets[0], c(-2.0, 0.0));
        assert!(matches!(neg.ln(), Err(Error::LogNonPositive { .. })));
    }

    #[test]
    fn order_overflow_is_flagged() {
        let f = frame_1_2();
        let jets = seed(&f, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        let idx = WirtingerIndex::new(vec![wv(&f, 0); 3], vec![wv(&f, 0); 2]);
        assert!(matches!(
            jets[1].wirtinger(&idx),
            Err(Error::OrderOverflow { .. })
        ));
    }

    #[test]
    fn powf_matches_repeated_multiplication() {
        let f = frame_1_2();
        let jets = seed(&f, &[c(0.3, 0.1), c(0.9, -0.4), c(0.2, 0.6)]).unwrap();
        let mut g = constant_like(&jets[0], c(1.0, 0.0));
        for j in &jets {
            g = &g + &j.mul(&j.conj());
        }
        let cubed = g.powf(3.0).unwrap();
        let direct = g.mul(&g).mul(&g);
        for (a, b) in cubed.coeffs.iter().zip(&direct.coeffs) {
            assert!((a - b).norm() < 1e-10 * b.norm().max(1.0));
        }
    }

    proptest! {
        #[test]
        fn leibniz_rule_first_order(seed_re in -1.0f64..1.0, seed_im in -1.0f64..1.0) {
            let f = frame_1_2();
            let jets = seed(&f, &[c(seed_re, seed_im), c(1.0 + seed_im.abs(), 0.3), c(0.7, -0.2)]).unwrap();
            // two generic smooth jets
            let a = {
                let t = &jets[0].mul(&jets[1].conj()) + &jets[2];
                t.mul(&t.conj()).add_scalar(c(2.0, 0.0)).exp()
            };
            let b = {
                let t = &jets[1] + &jets[2].mul(&jets[0].conj());
                t.mul(&t.conj()).add_scalar(c(1.5, 0.0))
            };
            let prod = a.mul(&b);
            for coord in 0..f.coords() {
                for idx in [WirtingerIndex::new(vec![coord], vec![]), WirtingerIndex::new(vec![], vec![coord])] {
                    let lhs = prod.wirtinger(&idx).unwrap();
                    let rhs = a.wirtinger(&idx).unwrap() * b.value() + a.value() * b.wirtinger(&idx).unwrap();
                    let scale = lhs.norm().max(rhs.norm()).max(1.0);
                    prop_assert!((lhs - rhs).norm() <= 1e-12 * scale);
                }
            }
        }
    }
}
