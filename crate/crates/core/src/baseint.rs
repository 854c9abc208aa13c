//! Base-manifold models (projective-line charts with Fubini-Study Kahler
//! data), global integration of top horizontal forms, omega-traces, degrees
//! and slopes, and the pointwise inequality fields of the Einstein theory.
//!
//! Everything runs on a single dense affine chart per factor; the removed
//! locus has measure zero and the integrands extend integrably. The
//! Fubini-Study profile carries no 2 pi normalization
//! (`int_CP1 omega = 2 pi`); every degree formula keeps its explicit 2 pi
//! factors instead.

use crate::exterior::{Form, Gen, HorizontalForm};
use crate::fiberint::{
    chern_from_segre, fiber_pushforward_multi, FiberIntegrand, QuadMode, QuadratureSpec, XiPower,
};
use crate::finsler::{self, MetricModel, SamplePlan};
use crate::jets::CoordinateFrame;
use crate::linalg::CMat;
use crate::quad::{plane_rule, sampling, KahanSum};
use crate::{Error, Result};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::PI;

type C64 = Complex64;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaseKind {
    Cp1,
    Cp1xCp1,
}

/// A base manifold on its dense chart, with the product Fubini-Study Kahler
/// form and its closed-form volume.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BaseManifold {
    pub kind: BaseKind,
}

impl BaseManifold {
    pub fn cp1() -> BaseManifold {
        BaseManifold { kind: BaseKind::Cp1 }
    }

    pub fn cp1_x_cp1() -> BaseManifold {
        BaseManifold {
            kind: BaseKind::Cp1xCp1,
        }
    }

    pub fn n(&self) -> usize {
        match self.kind {
            BaseKind::Cp1 => 1,
            BaseKind::Cp1xCp1 => 2,
        }
    }

    /// `g_{alpha beta-bar}` at `z`: diagonal `(1 + |z^alpha|^2)^{-2}`.
    pub fn kahler_matrix(&self, z: &[C64]) -> CMat {
        CMat::from_fn(self.n(), |a, b| {
            if a == b {
                c((1.0 + z[a].norm_sqr()).powi(-2), 0.0)
            } else {
                c(0.0, 0.0)
            }
        })
    }

    /// `omega = sqrt(-1) g_{alpha beta-bar} dz^alpha wedge dz-bar^beta`.
    pub fn kahler_form(&self, frame: &CoordinateFrame, z: &[C64]) -> HorizontalForm {
        let g = self.kahler_matrix(z);
        let mut form = Form::zero(frame);
        for a in 0..self.n() {
            for b in 0..self.n() {
                let coeff = g[(a, b)] * c(0.0, 1.0);
                if coeff != c(0.0, 0.0) {
                    form = form.add(
                        &Form::generator(frame, Gen::Dz(a))
                            .wedge(&Form::generator(frame, Gen::Dzbar(b)))
                            .scale(coeff),
                    );
                }
            }
        }
        HorizontalForm::new(form).expect("kahler form is horizontal")
    }

    /// Closed-form `int_M omega^n`: `2 pi` for one line, `8 pi^2` for the
    /// product (`omega^2 = 2 omega_1 omega_2`).
    pub fn volume(&self) -> f64 {
        match self.kind {
            BaseKind::Cp1 => 2.0 * PI,
            BaseKind::Cp1xCp1 => 8.0 * PI * PI,
        }
    }

    /// Human-readable tag recorded in reports.
    pub fn name(&self) -> &'static str {
        match self.kind {
            BaseKind::Cp1 => "cp1",
            BaseKind::Cp1xCp1 => "cp1xcp1",
        }
    }
}

/// Base integration strategy on top of a [`QuadratureSpec`].
#[derive(Clone, Copy, Debug)]
pub struct BaseQuadrature {
    pub spec: QuadratureSpec,
    /// Integrate radii only and multiply by the phase volume; valid for
    /// integrands invariant under independent per-factor phase rotations,
    /// which is probed before use.
    pub radial_symmetric: bool,
}

impl BaseQuadrature {
    pub fn tensor(radial: usize, angular: usize) -> BaseQuadrature {
        BaseQuadrature {
            spec: QuadratureSpec::tensor(radial, angular),
            radial_symmetric: false,
        }
    }

    pub fn radial(radial: usize) -> BaseQuadrature {
        BaseQuadrature {
            spec: QuadratureSpec::tensor(radial, 8),
            radial_symmetric: true,
        }
    }

    pub fn monte_carlo(samples: usize, seed: u64) -> BaseQuadrature {
        BaseQuadrature {
            spec: QuadratureSpec::monte_carlo(samples, seed),
            radial_symmetric: false,
        }
    }
}

/// Result of a base integral with its error bookkeeping.
#[derive(Clone, Copy, Debug)]
pub struct BaseIntegral {
    pub value: C64,
    pub mc_three_sigma: Option<f64>,
    pub quad_error: Option<f64>,
}

type FieldFn<'a> = dyn Fn(&[C64]) -> Result<HorizontalForm> + Sync + 'a;
type MultiFieldFn<'a> = dyn Fn(&[C64]) -> Result<Vec<HorizontalForm>> + Sync + 'a;

const CHUNK: usize = 64;

fn orientation_constant(n: usize) -> C64 {
    let mut k = c(1.0, 0.0);
    for _ in 0..n {
        k *= c(0.0, -2.0);
    }
    if (n * n.saturating_sub(1) / 2) % 2 == 1 {
        k = -k;
    }
    k
}

fn tensor_base_pass(
    n: usize,
    outputs: usize,
    field: &MultiFieldFn,
    radial: usize,
    angular: usize,
    radial_symmetric: bool,
) -> Result<Vec<C64>> {
    let rule = plane_rule(radial, angular);
    let (per_dim, phases) = if radial_symmetric {
        (radial, 1usize)
    } else {
        (radial * angular, angular)
    };
    let total = per_dim.pow(n as u32);
    let chunk_count = total.div_ceil(CHUNK);
    let chunks: Vec<Result<Vec<KahanSum>>> = (0..chunk_count)
        .into_par_iter()
        .map(|chunk_idx| {
            let start = chunk_idx * CHUNK;
            let end = (start + CHUNK).min(total);
            let mut acc = vec![KahanSum::new(); outputs];
            for node in start..end {
                let mut rest = node;
                let mut z = Vec::with_capacity(n);
                let mut weight = 1.0f64;
                for _ in 0..n {
                    let idx = rest % per_dim;
                    rest /= per_dim;
                    let (k, j) = (idx / phases, idx % phases);
                    let theta = if radial_symmetric { 0.0 } else { rule.theta[j] };
                    z.push(C64::from_polar(rule.rho[k], theta));
                    weight *= rule.radial_weight[k]
                        * if radial_symmetric {
                            2.0 * PI
                        } else {
                            rule.angular_weight
                        };
                }
                let forms = field(&z)?;
                debug_assert_eq!(forms.len(), outputs);
                for (slot, form) in acc.iter_mut().zip(&forms) {
                    slot.add(form.top_coeff() * weight);
                }
            }
            Ok(acc)
        })
        .collect();
    let mut totals = vec![KahanSum::new(); outputs];
    for chunk in chunks {
        for (slot, part) in totals.iter_mut().zip(chunk?) {
            slot.add(part.value());
        }
    }
    let orient = orientation_constant(n);
    Ok(totals.into_iter().map(|s| s.value() * orient).collect())
}

fn rotation_probe(n: usize, field: &MultiFieldFn, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5AD1A1);
    let probes = [0.45, 1.7];
    for rho in probes {
        let z0: Vec<C64> = (0..n).map(|_| c(rho, 0.0)).collect();
        let base: Vec<C64> = field(&z0)?.iter().map(|f| f.top_coeff()).collect();
        for _ in 0..2 {
            let z: Vec<C64> = z0
                .iter()
                .map(|w| w * C64::from_polar(1.0, 2.0 * PI * rand::Rng::gen::<f64>(&mut rng)))
                .collect();
            let rotated: Vec<C64> = field(&z)?.iter().map(|f| f.top_coeff()).collect();
            for (b, r) in base.iter().zip(&rotated) {
                let scale = b.norm().max(1.0);
                if (b - r).norm() / scale > 1e-8 {
                    return Err(Error::InvalidConfig(format!(
                        "radial-symmetric base quadrature requires a phase-invariant integrand \
                         (deviation {:.3e})",
                        (b - r).norm() / scale
                    )));
                }
            }
        }
    }
    Ok(())
}

fn mc_base_pass(
    n: usize,
    outputs: usize,
    field: &MultiFieldFn,
    samples: usize,
    seed: u64,
) -> Result<Vec<(C64, f64)>> {
    let chunk_count = samples.div_ceil(CHUNK);
    let stats: Vec<Result<Vec<(KahanSum, f64, f64)>>> = (0..chunk_count)
        .into_par_iter()
        .map(|chunk_idx| {
            let start = chunk_idx * CHUNK;
            let end = (start + CHUNK).min(samples);
            let mut rng = ChaCha8Rng::seed_from_u64(
                seed.wrapping_add((chunk_idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
            );
            let mut acc = vec![(KahanSum::new(), 0.0f64, 0.0f64); outputs];
            for _ in start..end {
                let z: Vec<C64> = (0..n)
                    .map(|_| sampling::fubini_study_point(&mut rng))
                    .collect();
                let density: f64 = z
                    .iter()
                    .map(|w| (1.0 + w.norm_sqr()).powi(-2) / PI)
                    .product();
                let forms = field(&z)?;
                for (slot, form) in acc.iter_mut().zip(&forms) {
                    let value = form.top_coeff() * orientation_constant(n) / density;
                    slot.0.add(value);
                    slot.1 += value.re * value.re;
                    slot.2 += value.im * value.im;
                }
            }
            Ok(acc)
        })
        .collect();
    let mut totals = vec![(KahanSum::new(), 0.0f64, 0.0f64); outputs];
    for chunk in stats {
        for (slot, part) in totals.iter_mut().zip(chunk?) {
            slot.0.add(part.0.value());
            slot.1 += part.1;
            slot.2 += part.2;
        }
    }
    let count = samples as f64;
    Ok(totals
        .into_iter()
        .map(|(sum, sq_re, sq_im)| {
            let mean = sum.value() / count;
            let var = (sq_re / count - mean.re * mean.re).max(0.0)
                + (sq_im / count - mean.im * mean.im).max(0.0);
            (mean, 3.0 * (var / count).sqrt())
        })
        .collect())
}

/// Integrals over the base chart of several fields of top (n,n) horizontal
/// forms at once, sharing every (possibly expensive) field evaluation; the
/// same tangent substitution as the fibre machinery.
pub fn base_integrate_multi(
    base: &BaseManifold,
    outputs: usize,
    field: &MultiFieldFn,
    quad: &BaseQuadrature,
) -> Result<Vec<BaseIntegral>> {
    let n = base.n();
    match quad.spec.mode {
        QuadMode::Tensor => {
            if quad.radial_symmetric {
                rotation_probe(n, field, quad.spec.seed)?;
            }
            let (radial, angular) = (quad.spec.radial_order, quad.spec.angular_order);
            if radial < 8 || (!quad.radial_symmetric && angular < 8) {
                return Err(Error::InvalidConfig(
                    "base tensor quadrature needs orders >= 8".into(),
                ));
            }
            let values = tensor_base_pass(n, outputs, field, radial, angular, quad.radial_symmetric)?;
            if quad.spec.check_convergence {
                let bumped = tensor_base_pass(
                    n,
                    outputs,
                    field,
                    radial + 8,
                    angular + 8,
                    quad.radial_symmetric,
                )?;
                let mut out = Vec::with_capacity(outputs);
                for (lo, hi) in values.iter().zip(&bumped) {
                    let delta = (lo - hi).norm();
                    if delta > quad.spec.tolerance {
                        return Err(Error::NonConvergent {
                            delta,
                            tolerance: quad.spec.tolerance,
                        });
                    }
                    out.push(BaseIntegral {
                        value: *hi,
                        mc_three_sigma: None,
                        quad_error: Some(delta),
                    });
                }
                Ok(out)
            } else {
                Ok(values
                    .into_iter()
                    .map(|value| BaseIntegral {
                        value,
                        mc_three_sigma: None,
                        quad_error: None,
                    })
                    .collect())
            }
        }
        QuadMode::MonteCarlo => {
            let stats = mc_base_pass(n, outputs, field, quad.spec.mc_samples, quad.spec.seed)?;
            Ok(stats
                .into_iter()
                .map(|(value, band)| BaseIntegral {
                    value,
                    mc_three_sigma: Some(band),
                    quad_error: None,
                })
                .collect())
        }
    }
}

/// Single-field form of [`base_integrate_multi`].
pub fn base_integrate(
    base: &BaseManifold,
    field: &FieldFn,
    quad: &BaseQuadrature,
) -> Result<BaseIntegral> {
    let multi = move |z: &[C64]| Ok(vec![field(z)?]);
    Ok(base_integrate_multi(base, 1, &multi, quad)?
        .into_iter()
        .next()
        .expect("one output"))
}

/// `tr_omega` of a (1,1) horizontal form at `z`:
/// `g^{alpha beta-bar} phi_{alpha beta-bar}` for
/// `phi = sqrt(-1) phi_{alpha beta-bar} dz wedge dz-bar`.
pub fn trace_omega(form: &HorizontalForm, base: &BaseManifold, z: &[C64]) -> Result<C64> {
    finsler::trace_against(&form.hermitian_matrix_11(), &base.kahler_matrix(z), z)
}

/// `tr_omega Psi^2 = psi_{alpha beta-bar} psi_{gamma delta-bar}
/// g^{alpha delta-bar} g^{gamma beta-bar}` for the contracted Kobayashi
/// matrix `psi`.
pub fn trace_omega_sq(psi_matrix: &CMat, base: &BaseManifold, z: &[C64]) -> Result<C64> {
    let g = base.kahler_matrix(z);
    if g.hermitian_eigenvalues()[0] <= 0.0 {
        return Err(Error::DegenerateKahler { z: z.to_vec() });
    }
    let ginv = g.inverse()?;
    let prod = psi_matrix.mul(&ginv);
    Ok(prod.mul(&prod).trace())
}

fn check_base_model(base: &BaseManifold, model: &MetricModel) -> Result<()> {
    if base.n() != model.frame().n() {
        return Err(Error::InvalidConfig(format!(
            "base dimension {} does not match the model chart dimension {}",
            base.n(),
            model.frame().n()
        )));
    }
    Ok(())
}

/// `int_M C_1(E, G) wedge omega^{n-1}` by nesting the Segre pushforward
/// inside the base quadrature.
pub fn chern_degree(
    model: &MetricModel,
    base: &BaseManifold,
    fiber_spec: &QuadratureSpec,
    base_quad: &BaseQuadrature,
) -> Result<BaseIntegral> {
    check_base_model(base, model)?;
    let n = base.n();
    let r = model.frame().r();
    let field = |z: &[C64]| -> Result<HorizontalForm> {
        let outs = fiber_pushforward_multi(model, z, &[&XiPower(r)], fiber_spec)?;
        let c1 = outs[0].form.scale(c(-1.0, 0.0));
        let omega_pow = base.kahler_form(model.frame(), z).wedge_pow(n - 1);
        Ok(c1.wedge(&omega_pow))
    };
    base_integrate(base, &field, base_quad)
}

/// The Einstein constant from the first Chern class:
/// `lambda = 2 pi (n / int omega^n) (int C_1 wedge omega^{n-1} / r)`.
pub fn lambda_from_class(
    model: &MetricModel,
    base: &BaseManifold,
    fiber_spec: &QuadratureSpec,
    base_quad: &BaseQuadrature,
) -> Result<f64> {
    let degree = chern_degree(model, base, fiber_spec, base_quad)?;
    let n = base.n() as f64;
    let r = model.frame().r() as f64;
    Ok(2.0 * PI * n / base.volume() * degree.value.re / r)
}

#[derive(Clone, Copy, Debug)]
pub struct SlopeReport {
    pub degree: f64,
    pub rank: usize,
    pub slope: f64,
}

/// Degree and slope of the bundle (or a restricted subbundle model) against
/// `omega^{n-1}`.
pub fn slope(
    model: &MetricModel,
    base: &BaseManifold,
    fiber_spec: &QuadratureSpec,
    base_quad: &BaseQuadrature,
) -> Result<SlopeReport> {
    let degree = chern_degree(model, base, fiber_spec, base_quad)?.value.re;
    let rank = model.frame().r();
    Ok(SlopeReport {
        degree,
        rank,
        slope: degree / rank as f64,
    })
}

/// Verified Finsler-Einstein data: the constant and the worst deviation of
/// `tr_omega Psi` over the sample plan.
#[derive(Clone, Copy, Debug)]
pub struct EinsteinReport {
    pub lambda: f64,
    pub deviation: f64,
}

pub fn verify_einstein(
    model: &MetricModel,
    base: &BaseManifold,
    plan: &SamplePlan,
    tolerance: f64,
) -> Result<EinsteinReport> {
    check_base_model(base, model)?;
    let points = plan.points(model.frame());
    let mut traces = Vec::with_capacity(points.len());
    for (z, v) in &points {
        let g = base.kahler_matrix(z);
        traces.push(finsler::einstein_trace(model, z, v, &g)?);
    }
    let lambda = traces.iter().map(|t| t.re).sum::<f64>() / traces.len() as f64;
    let deviation = traces
        .iter()
        .map(|t| (t - c(lambda, 0.0)).norm())
        .fold(0.0, f64::max);
    if deviation > tolerance {
        return Err(Error::NotEinstein {
            deviation,
            tolerance,
        });
    }
    Ok(EinsteinReport { lambda, deviation })
}

/// Pointwise data of the Kobayashi-Luebke field
/// `((r-1) C_1^2 - 2r C_2) wedge omega^{n-2}` at the sampled base points,
/// normalized against the volume form `omega^n`.
#[derive(Clone, Debug)]
pub struct KlReport {
    pub einstein: EinsteinReport,
    pub values: Vec<f64>,
    pub max_value: f64,
    pub max_abs: f64,
}

/// Requires `n = 2` and a verified Finsler-Einstein metric.
pub fn kl_inequality(
    model: &MetricModel,
    base: &BaseManifold,
    sample_zs: &[Vec<C64>],
    fiber_spec: &QuadratureSpec,
    einstein_plan: &SamplePlan,
    einstein_tolerance: f64,
) -> Result<KlReport> {
    check_base_model(base, model)?;
    if base.n() != 2 {
        return Err(Error::InvalidConfig(
            "the Kobayashi-Luebke field needs a two-dimensional base".into(),
        ));
    }
    let einstein = verify_einstein(model, base, einstein_plan, einstein_tolerance)?;
    let r = model.frame().r();
    let rf = r as f64;
    let mut values = Vec::with_capacity(sample_zs.len());
    for z in sample_zs {
        let s1 = XiPower(r);
        let s2 = XiPower(r + 1);
        let outs = fiber_pushforward_multi(
            model,
            z,
            &[&s1 as &dyn FiberIntegrand, &s2 as &dyn FiberIntegrand],
            fiber_spec,
        )?;
        let chern = chern_from_segre(&[outs[0].form.clone(), outs[1].form.clone()]);
        let field = chern[0]
            .wedge(&chern[0])
            .scale(c(rf - 1.0, 0.0))
            .sub(&chern[1].scale(c(2.0 * rf, 0.0)));
        let omega_top = base.kahler_form(model.frame(), z).wedge_pow(2).top_coeff();
        values.push((field.top_coeff() / omega_top).re);
    }
    let max_value = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let max_abs = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    Ok(KlReport {
        einstein,
        values,
        max_value,
        max_abs,
    })
}

/// Pointwise comparison of `s_2 wedge omega^{n-2}` against the Einstein
/// bound `r(r+1) lambda^2 / (8 pi^2 n^2) omega^n`.
#[derive(Clone, Debug)]
pub struct SegreBoundReport {
    pub einstein: EinsteinReport,
    pub bound: f64,
    pub values: Vec<f64>,
    /// Largest `value - bound`; nonpositive means the bound holds.
    pub max_violation: f64,
    /// Worst coefficient residual of `Psi - (lambda/n) omega` at the
    /// equality-diagnosis samples.
    pub equality_residual: f64,
}

pub fn segre_bound(
    model: &MetricModel,
    base: &BaseManifold,
    sample_zs: &[Vec<C64>],
    fiber_spec: &QuadratureSpec,
    einstein_plan: &SamplePlan,
    einstein_tolerance: f64,
) -> Result<SegreBoundReport> {
    check_base_model(base, model)?;
    if base.n() != 2 {
        return Err(Error::InvalidConfig(
            "the Segre bound needs a two-dimensional base".into(),
        ));
    }
    let einstein = verify_einstein(model, base, einstein_plan, einstein_tolerance)?;
    let r = model.frame().r() as f64;
    let n = base.n() as f64;
    let bound = r * (r + 1.0) * einstein.lambda * einstein.lambda / (8.0 * PI * PI * n * n);
    let rank = model.frame().r();
    let mut values = Vec::with_capacity(sample_zs.len());
    for z in sample_zs {
        let s2 = fiber_pushforward_multi(model, z, &[&XiPower(rank + 1)], fiber_spec)?;
        let omega_top = base.kahler_form(model.frame(), z).wedge_pow(2).top_coeff();
        values.push((s2[0].form.top_coeff() / omega_top).re);
    }
    let max_violation = values
        .iter()
        .map(|v| v - bound)
        .fold(f64::NEG_INFINITY, f64::max);
    // equality diagnosis: Psi vs (lambda/n) omega at the Einstein plan points
    let mut equality_residual = 0.0f64;
    for (z, v) in einstein_plan.points(model.frame()) {
        let bundle = finsler::evaluate(model, &z, &v)?;
        let target = base
            .kahler_form(model.frame(), &z)
            .scale(c(einstein.lambda / n, 0.0));
        equality_residual = equality_residual.max(bundle.psi.max_abs_diff(target.form()));
    }
    Ok(SegreBoundReport {
        einstein,
        bound,
        values,
        max_violation,
        equality_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn fs_volume_field(
        base: &BaseManifold,
        frame: &CoordinateFrame,
    ) -> impl Fn(&[C64]) -> Result<HorizontalForm> + Sync {
        let frame = frame.clone();
        let base = *base;
        move |z: &[C64]| Ok(base.kahler_form(&frame, z).wedge_pow(base.n()))
    }

    #[test]
    fn volume_of_cp1() {
        let base = BaseManifold::cp1();
        let frame = CoordinateFrame::new(1, 1).unwrap();
        let field = fs_volume_field(&base, &frame);
        let got = base_integrate(&base, &field, &BaseQuadrature::tensor(24, 8)).unwrap();
        assert_abs_diff_eq!(got.value.re, base.volume(), epsilon = 1e-10);
        assert!(got.value.im.abs() < 1e-12);
    }

    #[test]
    fn volume_of_product_base() {
        let base = BaseManifold::cp1_x_cp1();
        let frame = CoordinateFrame::new(2, 1).unwrap();
        let field = fs_volume_field(&base, &frame);
        // the volume integrand is separable, so both modes are spectral
        let full = base_integrate(&base, &field, &BaseQuadrature::tensor(20, 8)).unwrap();
        assert!(
            (full.value.re - base.volume()).abs() / base.volume() < 1e-10,
            "{}",
            full.value
        );
        let radial = base_integrate(&base, &field, &BaseQuadrature::radial(20)).unwrap();
        assert!((radial.value.re - base.volume()).abs() / base.volume() < 1e-10);
    }

    #[test]
    fn volume_monte_carlo_band() {
        let base = BaseManifold::cp1();
        let frame = CoordinateFrame::new(1, 1).unwrap();
        let field = fs_volume_field(&base, &frame);
        let got = base_integrate(&base, &field, &BaseQuadrature::monte_carlo(5000, 3)).unwrap();
        let band = got.mc_three_sigma.unwrap();
        assert!(
            (got.value.re - base.volume()).abs() <= band.max(1e-9),
            "{} +- {}",
            got.value.re,
            band
        );
    }

    #[test]
    fn zero_field_integrates_to_zero() {
        let base = BaseManifold::cp1();
        let frame = CoordinateFrame::new(1, 1).unwrap();
        let field = move |_: &[C64]| Ok(HorizontalForm::zero(&frame));
        let got = base_integrate(&base, &field, &BaseQuadrature::tensor(16, 8)).unwrap();
        assert_eq!(got.value, c(0.0, 0.0));
    }

    #[test]
    fn rotation_probe_rejects_asymmetric_field() {
        let base = BaseManifold::cp1();
        let frame = CoordinateFrame::new(1, 1).unwrap();
        let field = move |z: &[C64]| {
            let coeff = c(0.0, 1.0) * (1.0 + z[0].re);
            HorizontalForm::new(
                Form::generator(&frame, Gen::Dz(0))
                    .wedge(&Form::generator(&frame, Gen::Dzbar(0)))
                    .scale(coeff),
            )
        };
        assert!(matches!(
            base_integrate(&base, &field, &BaseQuadrature::radial(16)),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn trace_of_kahler_form_is_dimension() {
        for base in [BaseManifold::cp1(), BaseManifold::cp1_x_cp1()] {
            let frame = CoordinateFrame::new(base.n(), 2).unwrap();
            let z: Vec<C64> = (0..base.n()).map(|k| c(0.3 * k as f64, -0.2)).collect();
            let omega = base.kahler_form(&frame, &z);
            let tr = trace_omega(&omega, &base, &z).unwrap();
            assert_abs_diff_eq!(tr.re, base.n() as f64, epsilon = 1e-12);
        }
    }

    #[test]
    fn trace_cauchy_schwarz() {
        // n tr(psi^2) >= (tr psi)^2 for Hermitian psi against positive g
        let base = BaseManifold::cp1_x_cp1();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let z = [
                c(rng.gen_range(-1.0..1.0), 0.2),
                c(0.1, rng.gen_range(-1.0..1.0)),
            ];
            let mut psi = CMat::zeros(2);
            for a in 0..2 {
                psi[(a, a)] = c(rng.gen_range(-2.0..2.0), 0.0);
            }
            let off = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            psi[(0, 1)] = off;
            psi[(1, 0)] = off.conj();
            let tr = finsler::trace_against(&psi, &base.kahler_matrix(&z), &z).unwrap();
            let tr2 = trace_omega_sq(&psi, &base, &z).unwrap();
            assert!(
                2.0 * tr2.re >= tr.re * tr.re - 1e-10,
                "{} vs {}",
                2.0 * tr2.re,
                tr.re * tr.re
            );
        }
    }

    #[test]
    fn lambda_from_class_balanced_model() {
        let model = MetricModel::hermitian_diagonal(1, vec![vec![1], vec![1]]).unwrap();
        let base = BaseManifold::cp1();
        let lambda = lambda_from_class(
            &model,
            &base,
            &QuadratureSpec::tensor(24, 10),
            &BaseQuadrature::radial(20),
        )
        .unwrap();
        assert_abs_diff_eq!(lambda, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn slope_of_flat_model_vanishes() {
        let model = MetricModel::hermitian_diagonal(1, vec![vec![0], vec![0]]).unwrap();
        let base = BaseManifold::cp1();
        let report = slope(
            &model,
            &base,
            &QuadratureSpec::tensor(16, 8),
            &BaseQuadrature::radial(12),
        )
        .unwrap();
        assert!(report.degree.abs() < 1e-10);
        assert!(report.slope.abs() < 1e-10);
    }

    #[test]
    fn einstein_verification() {
        let base = BaseManifold::cp1();
        let plan = SamplePlan::new(15, 8, 1.0);
        let good = MetricModel::hermitian_diagonal(1, vec![vec![1], vec![1]]).unwrap();
        let report = verify_einstein(&good, &base, &plan, 1e-8).unwrap();
        assert_abs_diff_eq!(report.lambda, 1.0, epsilon = 1e-9);
        let bad = MetricModel::hermitian_diagonal(1, vec![vec![1], vec![2]]).unwrap();
        assert!(matches!(
            verify_einstein(&bad, &base, &plan, 1e-6),
            Err(Error::NotEinstein { .. })
        ));
    }

    fn sample_zs() -> Vec<Vec<C64>> {
        vec![
            vec![c(0.0, 0.0), c(0.0, 0.0)],
            vec![c(0.5, 0.2), c(-0.3, 0.4)],
            vec![c(1.1, -0.6), c(0.2, 0.9)],
        ]
    }

    #[test]
    fn kl_field_equality_for_isotypic_sum() {
        // L + L with L of bidegree (1,1): the field vanishes identically
        let model = MetricModel::hermitian_diagonal(2, vec![vec![1, 1], vec![1, 1]]).unwrap();
        let base = BaseManifold::cp1_x_cp1();
        let report = kl_inequality(
            &model,
            &base,
            &sample_zs(),
            &QuadratureSpec::tensor(24, 10),
            &SamplePlan::new(10, 5, 0.8),
            1e-6,
        )
        .unwrap();
        assert_abs_diff_eq!(report.einstein.lambda, 2.0, epsilon = 1e-8);
        assert!(report.max_abs < 1e-6, "{:?}", report.values);
    }

    #[test]
    fn kl_field_strictly_negative_for_mixed_sum() {
        // O(1,0) + O(0,1): equal slopes, Hermitian-Einstein direct sum,
        // strictly negative field
        let model = MetricModel::hermitian_diagonal(2, vec![vec![1, 0], vec![0, 1]]).unwrap();
        let base = BaseManifold::cp1_x_cp1();
        let report = kl_inequality(
            &model,
            &base,
            &sample_zs(),
            &QuadratureSpec::tensor(24, 10),
            &SamplePlan::new(10, 5, 0.8),
            1e-6,
        )
        .unwrap();
        assert_abs_diff_eq!(report.einstein.lambda, 1.0, epsilon = 1e-8);
        assert!(
            report.values.iter().all(|&v| v < -1e-4),
            "{:?}",
            report.values
        );
    }

    #[test]
    fn segre_bound_equality_and_strict_cases() {
        let base = BaseManifold::cp1_x_cp1();
        let plan = SamplePlan::new(10, 5, 0.8);
        let spec = QuadratureSpec::tensor(24, 10);
        let isotypic = MetricModel::hermitian_diagonal(2, vec![vec![1, 1], vec![1, 1]]).unwrap();
        let report = segre_bound(&isotypic, &base, &sample_zs(), &spec, &plan, 1e-6).unwrap();
        assert!(report.max_violation.abs() < 1e-6, "{report:?}");
        assert!(report.equality_residual < 1e-9, "{report:?}");
        let mixed = MetricModel::hermitian_diagonal(2, vec![vec![1, 0], vec![0, 1]]).unwrap();
        let report = segre_bound(&mixed, &base, &sample_zs(), &spec, &plan, 1e-6).unwrap();
        assert!(report.max_violation < -1e-4, "{report:?}");
        assert!(report.equality_residual > 1e-3, "{report:?}");
    }

    #[test]
    fn kl_requires_two_dimensional_base() {
        let model = MetricModel::hermitian_diagonal(1, vec![vec![1], vec![1]]).unwrap();
        let base = BaseManifold::cp1();
        assert!(matches!(
            kl_inequality(
                &model,
                &base,
                &[vec![c(0.0, 0.0)]],
                &QuadratureSpec::tensor(16, 8),
                &SamplePlan::new(5, 1, 0.5),
                1e-6,
            ),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn kl_rejects_non_einstein_models() {
        let model = MetricModel::hermitian_diagonal(2, vec![vec![1, 1], vec![2, 2]]).unwrap();
        let base = BaseManifold::cp1_x_cp1();
        assert!(matches!(
            kl_inequality(
                &model,
                &base,
                &sample_zs(),
                &QuadratureSpec::tensor(16, 8),
                &SamplePlan::new(10, 5, 0.8),
                1e-6,
            ),
            Err(Error::NotEinstein { .. })
        ));
    }
}
