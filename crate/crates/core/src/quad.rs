//! Quadrature primitives shared by the fibre and base integrators:
//! Gauss-Legendre rules, the tangent substitution for radial improper
//! integrals, and compensated summation.

use num_complex::Complex64;
use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre recurrence. Accurate to machine precision for n up to several
/// hundred.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for k in 0..(n + 1) / 2 {
        // Chebyshev-based initial guess.
        let mut x = (PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n(x) and P_n'(x).
            let mut p0 = 1.0;
            let mut p1 = x;
            for m in 2..=n {
                let mf = m as f64;
                let p2 = ((2.0 * mf - 1.0) * x * p1 - (mf - 1.0) * p0) / mf;
                p0 = p1;
                p1 = p2;
            }
            dp = (n as f64) * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[k] = -x;
        nodes[n - 1 - k] = x;
        weights[k] = w;
        weights[n - 1 - k] = w;
    }
    (nodes, weights)
}

/// Gauss-Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        x.iter().map(|&t| mid + half * t).collect(),
        w.iter().map(|&wi| wi * half).collect(),
    )
}

/// One radial-angular rule for a full complex plane: rho = tan t maps
/// [0, pi/2) to [0, inf), and the plane measure dx dy = rho drho dtheta.
/// Returns (rho_k, radial_weight_k) with the substitution Jacobian and the
/// rho factor folded in, plus the uniform angular weight for `angular`
/// equally spaced phases.
pub struct PlaneRule {
    pub rho: Vec<f64>,
    pub radial_weight: Vec<f64>,
    pub theta: Vec<f64>,
    pub angular_weight: f64,
}

pub fn plane_rule(radial: usize, angular: usize) -> PlaneRule {
    let (t, wt) = gauss_legendre_on(radial, 0.0, PI / 2.0);
    let mut rho = Vec::with_capacity(radial);
    let mut radial_weight = Vec::with_capacity(radial);
    for (tk, wk) in t.iter().zip(&wt) {
        let r = tk.tan();
        let sec2 = 1.0 / (tk.cos() * tk.cos());
        rho.push(r);
        radial_weight.push(wk * sec2 * r);
    }
    let theta = (0..angular)
        .map(|j| 2.0 * PI * (j as f64) / (angular as f64))
        .collect();
    PlaneRule {
        rho,
        radial_weight,
        theta,
        angular_weight: 2.0 * PI / (angular as f64),
    }
}

/// Seeded random point generators for sample plans and Monte Carlo modes.
pub(crate) mod sampling {
    use num_complex::Complex64;
    use rand::Rng;
    use std::f64::consts::PI;

    pub fn standard_normal(rng: &mut impl Rng) -> f64 {
        // Box-Muller; 1 - u keeps the argument of ln strictly positive.
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }

    pub fn uniform_disc(rng: &mut impl Rng, radius: f64) -> Complex64 {
        let r = radius * rng.gen::<f64>().sqrt();
        let th = 2.0 * PI * rng.gen::<f64>();
        Complex64::from_polar(r, th)
    }

    pub fn unit_sphere(rng: &mut impl Rng, dim: usize) -> Vec<Complex64> {
        loop {
            let v: Vec<Complex64> = (0..dim)
                .map(|_| Complex64::new(standard_normal(rng), standard_normal(rng)))
                .collect();
            let norm: f64 = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if norm > 1e-6 {
                return v.into_iter().map(|c| c / norm).collect();
            }
        }
    }

    /// Random complex scalar with magnitude in `[min_mag, max_mag]`.
    pub fn random_phase_scale(rng: &mut impl Rng, min_mag: f64, max_mag: f64) -> Complex64 {
        let mag = min_mag + (max_mag - min_mag) * rng.gen::<f64>();
        let th = 2.0 * PI * rng.gen::<f64>();
        Complex64::from_polar(mag, th)
    }

    /// Fubini-Study-distributed chart point: radius from inverse-CDF of the
    /// normalized FS measure, phase uniform. Density `(1/pi)(1+|z|^2)^{-2}`.
    pub fn fubini_study_point(rng: &mut impl Rng) -> Complex64 {
        let u: f64 = rng.gen();
        let u = u.min(1.0 - 1e-15);
        let r = (u / (1.0 - u)).sqrt();
        let th = 2.0 * PI * rng.gen::<f64>();
        Complex64::from_polar(r, th)
    }
}

/// Neumaier-compensated complex accumulator; summation order is the caller's
/// responsibility (keep it deterministic).
#[derive(Clone, Copy, Debug)]
pub struct KahanSum {
    sum_re: f64,
    c_re: f64,
    sum_im: f64,
    c_im: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        KahanSum {
            sum_re: 0.0,
            c_re: 0.0,
            sum_im: 0.0,
            c_im: 0.0,
        }
    }

    pub fn add(&mut self, x: Complex64) {
        let t = self.sum_re + x.re;
        if self.sum_re.abs() >= x.re.abs() {
            self.c_re += (self.sum_re - t) + x.re;
        } else {
            self.c_re += (x.re - t) + self.sum_re;
        }
        self.sum_re = t;
        let t = self.sum_im + x.im;
        if self.sum_im.abs() >= x.im.abs() {
            self.c_im += (self.sum_im - t) + x.im;
        } else {
            self.c_im += (x.im - t) + self.sum_im;
        }
        self.sum_im = t;
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.sum_re + self.c_re, self.sum_im + self.c_im)
    }
}

impl Default for KahanSum {
    fn default() -> Self {
        Self::new()
    }
}
