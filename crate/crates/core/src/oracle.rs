//! Independent ground-truth generators: central finite-difference Wirtinger
//! derivatives, closed-form line-bundle Chern data for the Hermitian
//! specializations, and a plain Monte Carlo integrator for cross-checking
//! tensor quadrature.
//!
//! Nothing in this module touches the jet tables or the pushforward engine's
//! node bookkeeping; agreement between the two routes is what the oracle
//! gate certifies.

use crate::jets::WirtingerIndex;
use crate::quad::sampling;
use crate::{Error, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

type C64 = Complex64;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Finite-difference plan: 4th-order central stencils, nested per derivative
/// factor, with one Richardson extrapolation level (evaluations at `h` and
/// `h/2`).
#[derive(Clone, Copy, Debug)]
pub struct FdPlan {
    /// Step for first-order derivatives; higher orders widen it to balance
    /// truncation against cancellation (see [`FdPlan::step_for_order`]).
    pub step: f64,
    pub richardson_levels: usize,
}

impl Default for FdPlan {
    fn default() -> Self {
        FdPlan {
            step: 1e-3,
            richardson_levels: 2,
        }
    }
}

impl FdPlan {
    /// Step width for a derivative of total order `k`. The widening factors
    /// keep the rounding error of the k-fold nested stencil near the
    /// truncation error of the 4th-order scheme.
    pub fn step_for_order(&self, k: usize) -> f64 {
        let factor = match k {
            0 | 1 => 1.0,
            2 => 4.0,
            3 => 10.0,
            _ => 25.0,
        };
        self.step * factor
    }
}

/// A mixed Wirtinger derivative estimate with its extrapolation error bound.
#[derive(Clone, Copy, Debug)]
pub struct FdEstimate {
    pub value: C64,
    pub error_estimate: f64,
}

/// Nested 4th-order central differences in the real and imaginary parts,
/// combined into the mixed Wirtinger derivative
/// `d/dw = (d/dx - i d/dy)/2`, `d/dw-bar = (d/dx + i d/dy)/2`.
pub fn fd_wirtinger(
    f: &dyn Fn(&[C64]) -> f64,
    point: &[C64],
    idx: &WirtingerIndex,
    plan: &FdPlan,
) -> Result<FdEstimate> {
    let order = idx.order();
    if order > 4 {
        return Err(Error::OrderOverflow { max: 4, got: order });
    }
    let mut factors: Vec<(usize, bool)> = Vec::with_capacity(order);
    for &a in &idx.holo {
        factors.push((a, false));
    }
    for &a in &idx.anti {
        factors.push((a, true));
    }
    let h = plan.step_for_order(order.max(1));
    if h < 1e-12 {
        return Err(Error::InvalidConfig(
            "finite-difference step underflow".into(),
        ));
    }
    let wrap = |p: &[C64]| c(f(p), 0.0);
    let coarse = nested(&wrap, &mut point.to_vec(), &factors, h);
    if plan.richardson_levels < 2 {
        return Ok(FdEstimate {
            value: coarse,
            error_estimate: f64::INFINITY,
        });
    }
    let fine = nested(&wrap, &mut point.to_vec(), &factors, h / 2.0);
    // 4th-order scheme: R = (16 D(h/2) - D(h)) / 15 removes the h^4 term.
    let extrapolated = (fine * 16.0 - coarse) / 15.0;
    Ok(FdEstimate {
        value: extrapolated,
        error_estimate: (extrapolated - fine).norm(),
    })
}

fn nested(
    f: &dyn Fn(&[C64]) -> C64,
    point: &mut Vec<C64>,
    factors: &[(usize, bool)],
    h: f64,
) -> C64 {
    if factors.is_empty() {
        return f(point);
    }
    let (coord, anti) = factors[0];
    let rest = &factors[1..];
    let original = point[coord];
    let mut stencil = |step: C64| -> C64 {
        // (g(-2h) - 8 g(-h) + 8 g(h) - g(2h)) / 12h
        let mut acc = c(0.0, 0.0);
        for (mult, weight) in [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)] {
            point[coord] = original + step * mult;
            acc += nested(f, point, rest, h) * weight;
        }
        point[coord] = original;
        acc / (12.0 * h)
    };
    let dx = stencil(c(h, 0.0));
    let dy = stencil(c(0.0, h));
    if anti {
        (dx + c(0.0, 1.0) * dy) * 0.5
    } else {
        (dx - c(0.0, 1.0) * dy) * 0.5
    }
}

/// Closed-form Chern data of direct sums of line bundles with the
/// Fubini-Study-power weights used by the diagonal Hermitian family.
pub mod line_bundle {
    use super::*;
    use crate::linalg::CMat;

    /// The Hermitian matrix `m` of `c_1(L) = sqrt(-1) m_{alpha beta-bar}
    /// dz^alpha wedge dz-bar^beta` for one line factor with the given
    /// degrees per base coordinate.
    pub fn c1_matrix(degrees: &[i32], z: &[C64]) -> CMat {
        CMat::from_fn(degrees.len(), |a, b| {
            if a == b {
                c(
                    f64::from(degrees[a]) / (2.0 * PI) * (1.0 + z[a].norm_sqr()).powi(-2),
                    0.0,
                )
            } else {
                c(0.0, 0.0)
            }
        })
    }

    /// The Hermitian matrix of `c_1(E) = sum_i c_1(L_i)`.
    pub fn total_c1_matrix(degrees: &[Vec<i32>], z: &[C64]) -> CMat {
        let n = z.len();
        let mut m = CMat::zeros(n);
        for row in degrees {
            let add = c1_matrix(row, z);
            for a in 0..n {
                for b in 0..n {
                    m[(a, b)] += add[(a, b)];
                }
            }
        }
        m
    }

    /// Integrated first Chern number over a single projective line.
    pub fn integrated_c1_line(degrees: &[Vec<i32>]) -> f64 {
        degrees.iter().map(|d| f64::from(d[0])).sum()
    }

    /// Integrated `c_2` over a product of two lines:
    /// `sum_{i<j} (a_i b_j + a_j b_i)`.
    pub fn integrated_c2_product(degrees: &[Vec<i32>]) -> f64 {
        let mut total = 0.0;
        for i in 0..degrees.len() {
            for j in i + 1..degrees.len() {
                total += f64::from(degrees[i][0]) * f64::from(degrees[j][1])
                    + f64::from(degrees[j][0]) * f64::from(degrees[i][1]);
            }
        }
        total
    }

    /// `int_M c_1(E) wedge omega^{n-1}` against the unnormalized
    /// Fubini-Study form of each factor (`int_{CP1} omega = 2 pi`).
    pub fn degree_against_fs(degrees: &[Vec<i32>]) -> f64 {
        let n = degrees.first().map_or(1, Vec::len);
        match n {
            1 => integrated_c1_line(degrees),
            2 => {
                2.0 * PI
                    * degrees
                        .iter()
                        .map(|d| f64::from(d[0]) + f64::from(d[1]))
                        .sum::<f64>()
            }
            _ => unreachable!("desk scale bases have n <= 2"),
        }
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug)]
pub struct McEstimate {
    pub value: f64,
    pub sigma: f64,
    pub samples: usize,
}

impl McEstimate {
    /// Whether `reference` lies within `k` standard errors. A small absolute
    /// floor covers the zero-variance case (integrand proportional to the
    /// proposal), where only accumulation noise remains.
    pub fn covers(&self, reference: f64, k: f64) -> bool {
        let floor = 1e-9 * reference.abs().max(1.0);
        (self.value - reference).abs() <= k * self.sigma + floor
    }
}

/// Plain Monte Carlo integral of a density over `C^dims` (chart coordinates
/// of a fibre or base), importance-sampled from the product Fubini-Study
/// distribution so that polynomially decaying integrands have bounded
/// weights. `f` receives the chart point and returns the plain Lebesgue
/// density (per `prod dx_a dy_a`).
pub fn brute_integrate(
    f: &dyn Fn(&[C64]) -> f64,
    dims: usize,
    samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0f64;
    let mut sum_sq = 0.0f64;
    for _ in 0..samples {
        let point: Vec<C64> = (0..dims)
            .map(|_| sampling::fubini_study_point(&mut rng))
            .collect();
        let density: f64 = point
            .iter()
            .map(|w| (1.0 + w.norm_sqr()).powi(-2) / PI)
            .product();
        let value = f(&point) / density;
        sum += value;
        sum_sq += value * value;
    }
    let n = samples as f64;
    let mean = sum / n;
    let variance = (sum_sq / n - mean * mean).max(0.0);
    if !variance.is_finite() {
        return Err(Error::VarianceOverflow);
    }
    Ok(McEstimate {
        value: mean,
        sigma: (variance / n).sqrt(),
        samples,
    })
}

/// Uniform-sphere sampler for fibre points, exposed for oracle cross-checks
/// that want the projective-space route instead of the chart route.
pub fn sphere_samples(dim: usize, count: usize, seed: u64) -> Vec<Vec<C64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| sampling::unit_sphere(&mut rng, dim))
        .collect()
}

/// Deterministic pseudo-random scalar stream for test fixtures.
pub fn scalar_stream(seed: u64, count: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.gen_range(lo..hi)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::CoordinateFrame;

    #[test]
    fn fd_norm_squared_mixed_derivative() {
        // d^2 |v|^2 / dv dv-bar = 1 at v = 0.7 + 0.2i
        let f = |p: &[C64]| p[0].norm_sqr();
        let idx = WirtingerIndex::new(vec![0], vec![0]);
        let est = fd_wirtinger(&f, &[c(0.7, 0.2)], &idx, &FdPlan::default()).unwrap();
        assert!((est.value - c(1.0, 0.0)).norm() < 1e-9, "{est:?}");
        assert!(est.error_estimate < 1e-7);
    }

    #[test]
    fn fd_exact_on_polynomials() {
        // f = |z|^4 = z^2 z-bar^2: d^4/dz^2 dz-bar^2 = 4, d^2/dz dz-bar = 4|z|^2
        let f = |p: &[C64]| p[0].norm_sqr().powi(2);
        let plan = FdPlan::default();
        let z0 = c(0.6, -0.4);
        let second =
            fd_wirtinger(&f, &[z0], &WirtingerIndex::new(vec![0], vec![0]), &plan).unwrap();
        assert!(
            (second.value - c(4.0 * z0.norm_sqr(), 0.0)).norm() < 1e-8,
            "{second:?}"
        );
        let fourth = fd_wirtinger(
            &f,
            &[z0],
            &WirtingerIndex::new(vec![0, 0], vec![0, 0]),
            &plan,
        )
        .unwrap();
        assert!((fourth.value - c(4.0, 0.0)).norm() < 1e-8, "{fourth:?}");
    }

    #[test]
    fn fd_quartic_log_derivative_matches_series() {
        // log(1+|z|^2) = |z|^2 - |z|^4/2 + ...; the |z|^4 coefficient -1/2
        // times 2!*2! gives d^4/dz^2 dz-bar^2 = -2 at the origin.
        let f = |p: &[C64]| (1.0 + p[0].norm_sqr()).ln();
        let est = fd_wirtinger(
            &f,
            &[c(0.0, 0.0)],
            &WirtingerIndex::new(vec![0, 0], vec![0, 0]),
            &FdPlan::default(),
        )
        .unwrap();
        assert!((est.value - c(-2.0, 0.0)).norm() < 1e-6, "{est:?}");
    }

    #[test]
    fn fd_matches_jets_on_perturbed_metric() {
        use crate::finsler::{MetricModel, SamplePlan};
        let model = MetricModel::finsler_perturbed(1, vec![vec![1], vec![1]], 0.1).unwrap();
        let frame = model.frame().clone();
        let plan = SamplePlan::new(6, 99, 0.8);
        let fd_plan = FdPlan::default();
        let indices = vec![
            WirtingerIndex::new(vec![frame.v_id(0)], vec![]),
            WirtingerIndex::new(vec![frame.v_id(0)], vec![frame.v_id(1)]),
            WirtingerIndex::new(vec![frame.v_id(0), frame.z_id(0)], vec![frame.v_id(1)]),
            WirtingerIndex::new(
                vec![frame.v_id(0), frame.z_id(0)],
                vec![frame.v_id(1), frame.z_id(0)],
            ),
        ];
        for (z, v) in plan.points(&frame) {
            let jet = model.metric_jet(&z, &v).unwrap();
            let eval = |p: &[C64]| {
                model
                    .metric_value(&p[..frame.n()], &p[frame.n()..])
                    .expect("valid point")
            };
            let mut point = z.clone();
            point.extend_from_slice(&v);
            for idx in &indices {
                let want = jet.wirtinger(idx).unwrap();
                let got = fd_wirtinger(&eval, &point, idx, &fd_plan).unwrap();
                let scale = want.norm().max(1.0);
                assert!(
                    (want - got.value).norm() / scale < 1e-5,
                    "idx {idx:?}: jet {want} vs fd {got:?}"
                );
            }
        }
    }

    #[test]
    fn fd_order_overflow() {
        let f = |p: &[C64]| p[0].norm_sqr();
        let idx = WirtingerIndex::new(vec![0, 0, 0], vec![0, 0]);
        assert!(matches!(
            fd_wirtinger(&f, &[c(1.0, 0.0)], &idx, &FdPlan::default()),
            Err(Error::OrderOverflow { .. })
        ));
    }

    #[test]
    fn line_bundle_chern_numbers() {
        assert_eq!(line_bundle::integrated_c1_line(&[vec![1], vec![1]]), 2.0);
        assert_eq!(line_bundle::integrated_c1_line(&[vec![1], vec![2]]), 3.0);
        // O(1,0) + O(0,1) on a product of lines: c_2 integrates to 1
        assert_eq!(
            line_bundle::integrated_c2_product(&[vec![1, 0], vec![0, 1]]),
            1.0
        );
        // L + L with L of bidegree (1,1): c_2 = 1*1 + 1*1 = 2
        assert_eq!(
            line_bundle::integrated_c2_product(&[vec![1, 1], vec![1, 1]]),
            2.0
        );
    }

    #[test]
    fn brute_integrate_fs_normalization() {
        // Integral of (1/pi)(1+rho^2)^{-2} over the plane is 1.
        let f = |p: &[C64]| (1.0 + p[0].norm_sqr()).powi(-2) / PI;
        let est = brute_integrate(&f, 1, 20_000, 17).unwrap();
        assert!(est.covers(1.0, 3.0), "{est:?}");
        // This particular integrand equals the proposal, so sigma is ~0.
        assert!(est.sigma < 1e-12);
    }

    #[test]
    fn brute_integrate_base_volume() {
        // int_CP1 omega = 2 pi with density 2 (1+rho^2)^{-2}.
        let f = |p: &[C64]| 2.0 * (1.0 + p[0].norm_sqr()).powi(-2);
        let est = brute_integrate(&f, 1, 20_000, 23).unwrap();
        assert!(est.covers(2.0 * PI, 3.0), "{est:?}");
    }

    #[test]
    fn brute_integrate_zero() {
        let f = |_: &[C64]| 0.0;
        let est = brute_integrate(&f, 2, 1000, 5).unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.sigma, 0.0);
    }

    #[test]
    fn sphere_samples_are_unit() {
        let frame = CoordinateFrame::new(1, 3).unwrap();
        for v in sphere_samples(frame.r(), 50, 4) {
            let norm: f64 = v.iter().map(|x| x.norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }
}
