//! Pushforward integration over the projectivized fibres `P(E_z)`.
//!
//! Fibre integrals run on the single affine chart `v = (1, w)` with the
//! removed hyperplane of measure zero: a form is pulled back by substituting
//! `dv^chart -> 0`, `dv^j -> dw`, the coefficient of the full vertical
//! volume monomial is extracted per horizontal monomial, and the improper
//! radial integral is mapped to `[0, pi/2)` by `rho = tan t` (Gauss-Legendre
//! in `t`, uniform grid per phase circle). Monte Carlo mode samples the unit
//! fibre sphere instead and weighs each sample by the ratio of the integrand
//! density to the flat Fubini-Study volume density, the pushforward of the
//! uniform sphere measure.
//!
//! Node evaluation is parallel; reduction is compensated summation in a
//! fixed chunk order, so repeated runs are bit-identical for a fixed seed
//! and node count.

use crate::exterior::{self, det_plus_identity, Form, Gen, HorizontalForm};
use crate::finsler::node::{evaluate_node, EvalLevel, NodeData};
use crate::finsler::{MetricModel, PreparedMetric};
use crate::jets::CoordinateFrame;
use crate::linalg::CMat;
use crate::quad::{plane_rule, sampling, KahanSum};
use crate::{Error, Result};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::f64::consts::PI;

type C64 = Complex64;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Integration plan for fibre and base charts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureSpec {
    pub mode: QuadMode,
    /// Gauss-Legendre points on the tangent-substituted radius, per
    /// complex dimension.
    pub radial_order: usize,
    /// Uniform points per phase circle.
    pub angular_order: usize,
    pub mc_samples: usize,
    pub seed: u64,
    /// Target absolute error for convergence checking.
    pub tolerance: f64,
    /// Re-run with orders raised one notch and fail on disagreement.
    pub check_convergence: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuadMode {
    Tensor,
    MonteCarlo,
}

impl QuadratureSpec {
    pub fn tensor(radial_order: usize, angular_order: usize) -> QuadratureSpec {
        QuadratureSpec {
            mode: QuadMode::Tensor,
            radial_order,
            angular_order,
            mc_samples: 0,
            seed: 1700,
            tolerance: 1e-6,
            check_convergence: false,
        }
    }

    pub fn monte_carlo(mc_samples: usize, seed: u64) -> QuadratureSpec {
        QuadratureSpec {
            mode: QuadMode::MonteCarlo,
            radial_order: 0,
            angular_order: 0,
            mc_samples,
            seed,
            tolerance: 1e-6,
            check_convergence: false,
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> QuadratureSpec {
        self.tolerance = tolerance;
        self
    }

    pub fn checked(mut self) -> QuadratureSpec {
        self.check_convergence = true;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> QuadratureSpec {
        self.seed = seed;
        self
    }

    fn validate(&self, fiber_dims: usize) -> Result<()> {
        match self.mode {
            QuadMode::Tensor => {
                if fiber_dims > 0 && (self.radial_order < 8 || self.angular_order < 8) {
                    return Err(Error::InvalidConfig(format!(
                        "tensor quadrature needs orders >= 8, got ({}, {})",
                        self.radial_order, self.angular_order
                    )));
                }
            }
            QuadMode::MonteCarlo => {
                if fiber_dims > 0 && self.mc_samples < 100 {
                    return Err(Error::InvalidConfig(
                        "Monte Carlo mode needs at least 100 samples".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Per-node context handed to fibre integrands.
pub struct NodeCtx<'a> {
    pub frame: &'a CoordinateFrame,
    pub z: &'a [C64],
    pub v: &'a [C64],
    pub data: &'a NodeData,
}

/// A pointwise form producer integrated over the fibre. The producer sees
/// the curvature data at each node; forms must descend to `P(E_z)` (checked
/// on random fibre scalings before integration starts).
pub trait FiberIntegrand: Sync {
    fn level(&self) -> EvalLevel;
    fn form(&self, ctx: &NodeCtx) -> Result<Form>;
    /// Outputs known to be real (j,j)-classes get a Hermiticity validation
    /// of their (1,1) part in tensor mode.
    fn real_11_class(&self) -> bool {
        false
    }
}

/// One pushforward result.
#[derive(Clone, Debug)]
pub struct PushOutput {
    pub form: HorizontalForm,
    /// Monte Carlo mode: the largest 3-sigma radius over the coefficients.
    pub mc_three_sigma: Option<f64>,
    /// Tensor mode with convergence checking: the observed order-bump shift.
    pub quad_error: Option<f64>,
}

impl PushOutput {
    pub fn scale(mut self, s: C64) -> PushOutput {
        self.form = self.form.scale(s);
        self.mc_three_sigma = self.mc_three_sigma.map(|e| e * s.norm());
        self
    }
}

fn chart_vector(w: &[C64], chart: usize, r: usize) -> Vec<C64> {
    let mut v = Vec::with_capacity(r);
    let mut it = w.iter();
    for i in 0..r {
        if i == chart {
            v.push(c(1.0, 0.0));
        } else {
            v.push(*it.next().expect("chart vector length"));
        }
    }
    v
}

/// Pulls one form back along the scaled chart section through `mu * (1, w)`
/// and keeps the coefficient of the full vertical volume monomial, keyed by
/// the horizontal monomial.
fn chart_pullback_top(
    frame: &CoordinateFrame,
    form: &Form,
    chart: usize,
    mu: C64,
) -> Vec<(u32, C64)> {
    let m = frame.r() - 1;
    let chart_bits = Gen::Dv(chart).bit(frame) | Gen::Dvbar(chart).bit(frame);
    let vertical = exterior::vertical_mask(frame);
    let horizontal = exterior::horizontal_mask(frame);
    let required = vertical & !chart_bits;
    let scale = mu.norm_sqr().powi(m as i32);
    form.terms()
        .filter_map(|(mask, coeff)| {
            if mask & chart_bits != 0 {
                return None;
            }
            if mask & vertical != required {
                return None;
            }
            Some((mask & horizontal, coeff * scale))
        })
        .collect()
}

/// `(-1)^{m(m-1)/2} (-2i)^m`: the plane measure of the block-sorted vertical
/// volume monomial `dw^1..dw^m dw-bar^1..dw-bar^m` per unit of
/// `prod dx_a dy_a`.
fn orientation_constant(m: usize) -> C64 {
    let mut k = c(1.0, 0.0);
    for _ in 0..m {
        k *= c(0.0, -2.0);
    }
    if (m * m.saturating_sub(1) / 2) % 2 == 1 {
        k = -k;
    }
    k
}

fn max_level(integrands: &[&dyn FiberIntegrand]) -> EvalLevel {
    integrands
        .iter()
        .map(|ig| ig.level())
        .max()
        .unwrap_or(EvalLevel::Xi)
}

fn map_deviation(a: &BTreeMap<u32, C64>, b: &BTreeMap<u32, C64>) -> f64 {
    let mut worst = 0.0f64;
    for (&k, &v) in a {
        worst = worst.max((v - b.get(&k).copied().unwrap_or(c(0.0, 0.0))).norm());
    }
    for (&k, &v) in b {
        worst = worst.max((v - a.get(&k).copied().unwrap_or(c(0.0, 0.0))).norm());
    }
    worst
}

fn descent_check(
    prepared: &PreparedMetric,
    z: &[C64],
    integrands: &[&dyn FiberIntegrand],
    level: EvalLevel,
    seed: u64,
) -> Result<()> {
    let frame = prepared.frame().clone();
    let r = frame.r();
    let m = r - 1;
    let w: Vec<C64> = (0..m)
        .map(|a| C64::from_polar(0.8 + 0.3 * a as f64, 0.9 + 0.5 * a as f64))
        .collect();
    let v0 = chart_vector(&w, 0, r);
    let data0 = evaluate_node(prepared, &v0, level)?;
    let ctx0 = NodeCtx {
        frame: &frame,
        z,
        v: &v0,
        data: &data0,
    };
    let base: Vec<BTreeMap<u32, C64>> = integrands
        .iter()
        .map(|ig| {
            Ok(chart_pullback_top(&frame, &ig.form(&ctx0)?, 0, c(1.0, 0.0))
                .into_iter()
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xDE5C_E27);
    for _ in 0..3 {
        let lambda = sampling::random_phase_scale(&mut rng, 0.4, 2.5);
        let vl: Vec<C64> = v0.iter().map(|x| x * lambda).collect();
        let data = evaluate_node(prepared, &vl, level)?;
        let ctx = NodeCtx {
            frame: &frame,
            z,
            v: &vl,
            data: &data,
        };
        for (ig, base_terms) in integrands.iter().zip(&base) {
            let pulled: BTreeMap<u32, C64> = chart_pullback_top(&frame, &ig.form(&ctx)?, 0, lambda)
                .into_iter()
                .collect();
            let scale = 1.0 + base_terms.values().map(|v| v.norm()).fold(0.0, f64::max);
            let deviation = map_deviation(base_terms, &pulled) / scale;
            if deviation > 1e-7 {
                return Err(Error::DescentCheckFailed { deviation });
            }
        }
    }
    Ok(())
}

const CHUNK: usize = 512;

/// Radial scales for the tangent substitution, one per chart dimension:
/// `rho = s tan t` with `s^2 = G(z, e_chart) / G(z, e_a)`. Any positive
/// scale is exact in the limit; matching the metric's diagonal anisotropy
/// keeps the substituted integrand's knee at order one even when the weight
/// ratio drifts with the base point, which preserves spectral convergence.
fn radial_scales(prepared: &PreparedMetric) -> Result<Vec<f64>> {
    let r = prepared.frame().r();
    let unit = |i: usize| -> Vec<C64> {
        (0..r)
            .map(|k| if k == i { c(1.0, 0.0) } else { c(0.0, 0.0) })
            .collect()
    };
    let g_ref = prepared.metric_jet(&unit(0))?.value().re;
    (1..r)
        .map(|i| {
            let g_i = prepared.metric_jet(&unit(i))?.value().re;
            if g_ref <= 0.0 || g_i <= 0.0 {
                return Err(Error::LogNonPositive {
                    value: c(g_i.min(g_ref), 0.0),
                });
            }
            Ok((g_ref / g_i).sqrt())
        })
        .collect()
}

fn tensor_pass(
    prepared: &PreparedMetric,
    z: &[C64],
    integrands: &[&dyn FiberIntegrand],
    level: EvalLevel,
    radial: usize,
    angular: usize,
) -> Result<Vec<BTreeMap<u32, C64>>> {
    let frame = prepared.frame().clone();
    let r = frame.r();
    let m = r - 1;
    if m == 0 {
        let v = vec![c(1.0, 0.0)];
        let data = evaluate_node(prepared, &v, level)?;
        let ctx = NodeCtx {
            frame: &frame,
            z,
            v: &v,
            data: &data,
        };
        return integrands
            .iter()
            .map(|ig| {
                Ok(chart_pullback_top(&frame, &ig.form(&ctx)?, 0, c(1.0, 0.0))
                    .into_iter()
                    .collect())
            })
            .collect();
    }
    let scales = radial_scales(prepared)?;
    let rule = plane_rule(radial, angular);
    let per_dim = radial * angular;
    let total = per_dim.pow(m as u32);
    let chunk_count = total.div_ceil(CHUNK);
    let chunk_maps: Vec<Result<Vec<BTreeMap<u32, KahanSum>>>> = (0..chunk_count)
        .into_par_iter()
        .map(|chunk_idx| {
            let start = chunk_idx * CHUNK;
            let end = (start + CHUNK).min(total);
            let mut acc: Vec<BTreeMap<u32, KahanSum>> =
                vec![BTreeMap::new(); integrands.len()];
            for node in start..end {
                let mut rest = node;
                let mut w = Vec::with_capacity(m);
                let mut weight = 1.0f64;
                for dim in 0..m {
                    let idx = rest % per_dim;
                    rest /= per_dim;
                    let k = idx / angular;
                    let j = idx % angular;
                    let s = scales[dim];
                    w.push(C64::from_polar(s * rule.rho[k], rule.theta[j]));
                    weight *= s * s * rule.radial_weight[k] * rule.angular_weight;
                }
                let v = chart_vector(&w, 0, r);
                let data = evaluate_node(prepared, &v, level)?;
                let ctx = NodeCtx {
                    frame: &frame,
                    z,
                    v: &v,
                    data: &data,
                };
                for (ig, map) in integrands.iter().zip(acc.iter_mut()) {
                    let form = ig.form(&ctx)?;
                    for (mask, coeff) in chart_pullback_top(&frame, &form, 0, c(1.0, 0.0)) {
                        map.entry(mask).or_default().add(coeff * weight);
                    }
                }
            }
            Ok(acc)
        })
        .collect();
    // deterministic chunk-order reduction
    let mut totals: Vec<BTreeMap<u32, KahanSum>> = vec![BTreeMap::new(); integrands.len()];
    for chunk in chunk_maps {
        let chunk = chunk?;
        for (total_map, chunk_map) in totals.iter_mut().zip(chunk) {
            for (mask, sum) in chunk_map {
                total_map.entry(mask).or_default().add(sum.value());
            }
        }
    }
    let orient = orientation_constant(m);
    Ok(totals
        .into_iter()
        .map(|map| {
            map.into_iter()
                .map(|(mask, sum)| (mask, sum.value() * orient))
                .collect()
        })
        .collect())
}

#[derive(Clone)]
struct McAccum {
    sum: KahanSum,
    sq_re: f64,
    sq_im: f64,
}

impl Default for McAccum {
    fn default() -> Self {
        McAccum {
            sum: KahanSum::new(),
            sq_re: 0.0,
            sq_im: 0.0,
        }
    }
}

fn mc_pass(
    prepared: &PreparedMetric,
    z: &[C64],
    integrands: &[&dyn FiberIntegrand],
    level: EvalLevel,
    samples: usize,
    seed: u64,
) -> Result<Vec<(BTreeMap<u32, C64>, f64)>> {
    let frame = prepared.frame().clone();
    let r = frame.r();
    let m = r - 1;
    // Flat reference: the pushforward of the uniform sphere measure is the
    // Fubini-Study volume of the flat metric, computed through the same
    // machinery so that chart conventions cancel exactly.
    let flat = MetricModel::hermitian_diagonal(frame.n(), vec![vec![0; frame.n()]; r])?;
    let flat_prepared = flat.prepare_with_order(z, EvalLevel::Xi.jet_order())?;
    let chunk_count = samples.div_ceil(CHUNK);
    let chunk_maps: Vec<Result<Vec<BTreeMap<u32, McAccum>>>> = (0..chunk_count)
        .into_par_iter()
        .map(|chunk_idx| {
            let start = chunk_idx * CHUNK;
            let end = (start + CHUNK).min(samples);
            let mut rng = ChaCha8Rng::seed_from_u64(
                seed.wrapping_add((chunk_idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
            );
            let mut acc: Vec<BTreeMap<u32, McAccum>> = vec![BTreeMap::new(); integrands.len()];
            for _ in start..end {
                let v = sampling::unit_sphere(&mut rng, r);
                let chart = (0..r)
                    .max_by(|&a, &b| v[a].norm().partial_cmp(&v[b].norm()).unwrap())
                    .unwrap();
                let mu = v[chart];
                let data = evaluate_node(prepared, &v, level)?;
                let flat_data = evaluate_node(&flat_prepared, &v, EvalLevel::Xi)?;
                let reference =
                    chart_pullback_top(&frame, &flat_data.xi.wedge_pow(m), chart, mu)
                        .into_iter()
                        .find(|(mask, _)| *mask == 0)
                        .map(|(_, c)| c)
                        .unwrap_or(c(0.0, 0.0));
                if reference.norm() < 1e-300 {
                    return Err(Error::VarianceOverflow);
                }
                let ctx = NodeCtx {
                    frame: &frame,
                    z,
                    v: &v,
                    data: &data,
                };
                for (ig, map) in integrands.iter().zip(acc.iter_mut()) {
                    let form = ig.form(&ctx)?;
                    for (mask, coeff) in chart_pullback_top(&frame, &form, chart, mu) {
                        let ratio = coeff / reference;
                        let slot = map.entry(mask).or_default();
                        slot.sum.add(ratio);
                        slot.sq_re += ratio.re * ratio.re;
                        slot.sq_im += ratio.im * ratio.im;
                    }
                }
            }
            Ok(acc)
        })
        .collect();
    let mut totals: Vec<BTreeMap<u32, McAccum>> = vec![BTreeMap::new(); integrands.len()];
    for chunk in chunk_maps {
        let chunk = chunk?;
        for (total_map, chunk_map) in totals.iter_mut().zip(chunk) {
            for (mask, a) in chunk_map {
                let slot = total_map.entry(mask).or_default();
                slot.sum.add(a.sum.value());
                slot.sq_re += a.sq_re;
                slot.sq_im += a.sq_im;
            }
        }
    }
    let n = samples as f64;
    Ok(totals
        .into_iter()
        .map(|map| {
            let mut out = BTreeMap::new();
            let mut worst_sigma = 0.0f64;
            for (mask, a) in map {
                let mean = a.sum.value() / n;
                let var_re = (a.sq_re / n - mean.re * mean.re).max(0.0);
                let var_im = (a.sq_im / n - mean.im * mean.im).max(0.0);
                worst_sigma = worst_sigma.max(((var_re + var_im) / n).sqrt());
                out.insert(mask, mean);
            }
            (out, 3.0 * worst_sigma)
        })
        .collect())
}

fn outputs_from_maps(
    frame: &CoordinateFrame,
    maps: Vec<BTreeMap<u32, C64>>,
    integrands: &[&dyn FiberIntegrand],
    mc_sigma: Option<Vec<f64>>,
    quad_error: Option<Vec<f64>>,
    validate_reality: bool,
) -> Result<Vec<PushOutput>> {
    let mut out = Vec::with_capacity(maps.len());
    for (idx, map) in maps.into_iter().enumerate() {
        let mut form = Form::zero(frame);
        for (mask, coeff) in map {
            form.insert(mask, coeff);
        }
        let horizontal = HorizontalForm::new(form)?;
        if validate_reality && integrands[idx].real_11_class() {
            let defect = horizontal.reality_defect_11();
            let scale = 1.0 + horizontal.max_abs();
            if defect > 1e-9 * scale {
                return Err(Error::InvalidConfig(format!(
                    "(1,1) coefficient matrix of a real class has Hermitian defect {defect:e}"
                )));
            }
        }
        out.push(PushOutput {
            form: horizontal,
            mc_three_sigma: mc_sigma.as_ref().map(|v| v[idx]),
            quad_error: quad_error.as_ref().map(|v| v[idx]),
        });
    }
    Ok(out)
}

/// Pushes several integrands down the fibre at once, sharing every node
/// evaluation. Extra integrands ride along at almost no cost, so bundled
/// calls are the norm for nested base integrals.
pub fn fiber_pushforward_multi(
    model: &MetricModel,
    z: &[C64],
    integrands: &[&dyn FiberIntegrand],
    spec: &QuadratureSpec,
) -> Result<Vec<PushOutput>> {
    let frame = model.frame().clone();
    let m = frame.r() - 1;
    spec.validate(m)?;
    let level = max_level(integrands);
    let prepared = model.prepare_with_order(z, level.jet_order())?;
    descent_check(&prepared, z, integrands, level, spec.seed)?;
    match spec.mode {
        QuadMode::Tensor => {
            let maps = tensor_pass(
                &prepared,
                z,
                integrands,
                level,
                spec.radial_order,
                spec.angular_order,
            )?;
            if spec.check_convergence && m > 0 {
                let bumped = tensor_pass(
                    &prepared,
                    z,
                    integrands,
                    level,
                    spec.radial_order + 8,
                    spec.angular_order + 8,
                )?;
                let mut errors = Vec::with_capacity(maps.len());
                for (lo, hi) in maps.iter().zip(&bumped) {
                    let delta = map_deviation(lo, hi);
                    if delta > spec.tolerance {
                        return Err(Error::NonConvergent {
                            delta,
                            tolerance: spec.tolerance,
                        });
                    }
                    errors.push(delta);
                }
                outputs_from_maps(&frame, bumped, integrands, None, Some(errors), true)
            } else {
                outputs_from_maps(&frame, maps, integrands, None, None, true)
            }
        }
        QuadMode::MonteCarlo => {
            let stats = mc_pass(&prepared, z, integrands, level, spec.mc_samples, spec.seed)?;
            let (maps, sigmas): (Vec<_>, Vec<_>) = stats.into_iter().unzip();
            outputs_from_maps(&frame, maps, integrands, Some(sigmas), None, false)
        }
    }
}

/// Single-integrand form of [`fiber_pushforward_multi`].
pub fn fiber_integrate(
    model: &MetricModel,
    z: &[C64],
    integrand: &dyn FiberIntegrand,
    spec: &QuadratureSpec,
) -> Result<PushOutput> {
    Ok(fiber_pushforward_multi(model, z, &[integrand], spec)?
        .into_iter()
        .next()
        .expect("one integrand"))
}

/// `Xi^p` (pushforward of powers of the first Chern form of the hyperplane
/// bundle).
pub struct XiPower(pub usize);

impl FiberIntegrand for XiPower {
    fn level(&self) -> EvalLevel {
        EvalLevel::Xi
    }
    fn form(&self, ctx: &NodeCtx) -> Result<Form> {
        Ok(ctx.data.xi.wedge_pow(self.0))
    }
    fn real_11_class(&self) -> bool {
        true
    }
}

/// `Psi^k wedge omega_FS^{r-1}`.
pub struct PsiFsPower {
    pub k: usize,
}

impl FiberIntegrand for PsiFsPower {
    fn level(&self) -> EvalLevel {
        EvalLevel::Full
    }
    fn form(&self, ctx: &NodeCtx) -> Result<Form> {
        let full = ctx.data.full.as_ref().expect("full level");
        Ok(full
            .psi
            .wedge_pow(self.k)
            .wedge(&full.omega_fs.wedge_pow(ctx.frame.r() - 1)))
    }
}

/// The (k,k)-part of `det(I + (i/2pi) Theta)` wedged with `Xi^{r-1}`.
pub struct ChernWeilXi {
    pub k: usize,
}

impl FiberIntegrand for ChernWeilXi {
    fn level(&self) -> EvalLevel {
        EvalLevel::Full
    }
    fn form(&self, ctx: &NodeCtx) -> Result<Form> {
        let full = ctx.data.full.as_ref().expect("full level");
        let det = det_plus_identity(&full.theta, c(0.0, 1.0 / (2.0 * PI)))?;
        Ok(det
            .degree_component(2 * self.k)
            .wedge(&ctx.data.xi.wedge_pow(ctx.frame.r() - 1)))
    }
    fn real_11_class(&self) -> bool {
        true
    }
}

/// Fibre restriction of `omega_FS^{r-1}` scaled by the Levi entry
/// `G_{i j-bar}` (the averaged-metric integrand).
pub struct LeviFs {
    pub i: usize,
    pub j: usize,
}

fn fs_restricted(ctx: &NodeCtx) -> Form {
    let frame = ctx.frame;
    let r = frame.r();
    let mut f = Form::zero(frame);
    let scale = c(0.0, 1.0 / (2.0 * PI));
    for a in 0..r {
        for b in 0..r {
            let coeff = ctx.data.log_vert_hessian[(a, b)] * scale;
            if coeff != c(0.0, 0.0) {
                f = f.add(
                    &Form::generator(frame, Gen::Dv(a))
                        .wedge(&Form::generator(frame, Gen::Dvbar(b)))
                        .scale(coeff),
                );
            }
        }
    }
    f
}

impl FiberIntegrand for LeviFs {
    fn level(&self) -> EvalLevel {
        EvalLevel::Xi
    }
    fn form(&self, ctx: &NodeCtx) -> Result<Form> {
        Ok(fs_restricted(ctx)
            .wedge_pow(ctx.frame.r() - 1)
            .scale(ctx.data.levi[(self.i, self.j)]))
    }
}

/// `|<u, v>|^2 e^{-phi} omega^phi_{r-1}` with `phi = log G` and
/// `omega^phi = sqrt(-1) d_v d_v-bar phi` (no 2 pi), the L2-metric density
/// on the dual fibre.
pub struct L2DualDensity {
    pub u: Vec<C64>,
}

impl FiberIntegrand for L2DualDensity {
    fn level(&self) -> EvalLevel {
        EvalLevel::Xi
    }
    fn form(&self, ctx: &NodeCtx) -> Result<Form> {
        let frame = ctx.frame;
        let r = frame.r();
        let mut omega_phi = Form::zero(frame);
        for a in 0..r {
            for b in 0..r {
                let coeff = ctx.data.log_vert_hessian[(a, b)] * c(0.0, 1.0);
                if coeff != c(0.0, 0.0) {
                    omega_phi = omega_phi.add(
                        &Form::generator(frame, Gen::Dv(a))
                            .wedge(&Form::generator(frame, Gen::Dvbar(b)))
                            .scale(coeff),
                    );
                }
            }
        }
        let pairing: C64 = self.u.iter().zip(ctx.v).map(|(ui, vi)| ui * vi).sum();
        let mut factorial = 1.0;
        for k in 2..r {
            factorial *= k as f64;
        }
        Ok(omega_phi
            .wedge_pow(r - 1)
            .scale(c(pairing.norm_sqr() / ctx.data.g / factorial, 0.0)))
    }
}

/// The bracketed fibre integrand of the rank-(r-1) Bott-Chern transgression
/// between the Finsler metric and an auxiliary Hermitian one:
/// `log(G/h) sum_i Xi_G^i Xi_h^{r-1-i} - log(det G_lev / det h_lev) Xi_G^{r-1}`.
pub struct BottChernBracket {
    aux: PreparedMetric,
}

impl FiberIntegrand for BottChernBracket {
    fn level(&self) -> EvalLevel {
        EvalLevel::Xi
    }
    fn form(&self, ctx: &NodeCtx) -> Result<Form> {
        let r = ctx.frame.r();
        let aux_data = evaluate_node(&self.aux, ctx.v, EvalLevel::Xi)?;
        let log_ratio = (ctx.data.g / aux_data.g).ln();
        let mut series = Form::zero(ctx.frame);
        for i in 0..r {
            series = series.add(
                &ctx.data
                    .xi
                    .wedge_pow(i)
                    .wedge(&aux_data.xi.wedge_pow(r - 1 - i)),
            );
        }
        let det_ratio = (ctx.data.levi.det().re / aux_data.levi.det().re).ln();
        Ok(series
            .scale(c(log_ratio, 0.0))
            .sub(&ctx.data.xi.wedge_pow(r - 1).scale(c(det_ratio, 0.0))))
    }
}

/// Normalization integral `int_{P(E_z)) Xi^{r-1}`; equals 1 for every
/// strongly pseudo-convex metric.
pub fn fiber_normalization(
    model: &MetricModel,
    z: &[C64],
    spec: &QuadratureSpec,
) -> Result<PushOutput> {
    fiber_integrate(model, z, &XiPower(model.frame().r() - 1), spec)
}

/// Segre form by the direct route: `s_j = pi_* Xi^{r-1+j}`; `j = 0` is the
/// exact normalization scalar 1.
pub fn segre_direct(
    model: &MetricModel,
    z: &[C64],
    j: usize,
    spec: &QuadratureSpec,
) -> Result<PushOutput> {
    if j == 0 {
        return Ok(PushOutput {
            form: HorizontalForm::scalar(model.frame(), c(1.0, 0.0)),
            mc_three_sigma: None,
            quad_error: None,
        });
    }
    fiber_integrate(model, z, &XiPower(model.frame().r() - 1 + j), spec)
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut out = 1.0;
    for i in 0..k {
        out *= (n - i) as f64 / (k - i) as f64;
    }
    out
}

/// Segre form by the curvature route:
/// `s_k = (-1)^k (2 pi)^{-k} binom(r-1+k, k) pi_*(Psi^k wedge omega_FS^{r-1})`.
pub fn segre_via_psi(
    model: &MetricModel,
    z: &[C64],
    k: usize,
    spec: &QuadratureSpec,
) -> Result<PushOutput> {
    let r = model.frame().r();
    let raw = fiber_integrate(model, z, &PsiFsPower { k }, spec)?;
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    let scale = sign * binomial(r - 1 + k, k) / (2.0 * PI).powi(k as i32);
    Ok(raw.scale(c(scale, 0.0)))
}

/// Chern form via Chern-Weil on the pulled-back bundle:
/// `c_k(E, G) = pi_*( c_k(pi^* E, h^G) Xi^{r-1} )`; `c_0 = 1`.
pub fn chern_via_cw(
    model: &MetricModel,
    z: &[C64],
    k: usize,
    spec: &QuadratureSpec,
) -> Result<PushOutput> {
    if k == 0 {
        return Ok(PushOutput {
            form: HorizontalForm::scalar(model.frame(), c(1.0, 0.0)),
            mc_three_sigma: None,
            quad_error: None,
        });
    }
    if k > model.frame().r() {
        return Err(Error::InvalidConfig(format!(
            "Chern index {k} exceeds the rank {}",
            model.frame().r()
        )));
    }
    fiber_integrate(model, z, &ChernWeilXi { k }, spec)
}

/// Formal graded inverse of the total Segre form: from `s_1 .. s_n` returns
/// `C_1 .. C_n` with `C_k = -(s_1 C_{k-1} + ... + s_k C_0)`.
pub fn chern_from_segre(segre: &[HorizontalForm]) -> Vec<HorizontalForm> {
    if segre.is_empty() {
        return Vec::new();
    }
    let frame = segre[0].frame().clone();
    let mut chern: Vec<HorizontalForm> = vec![HorizontalForm::scalar(&frame, c(1.0, 0.0))];
    for k in 1..=segre.len() {
        let mut acc = HorizontalForm::zero(&frame);
        for j in 1..=k {
            acc = acc.add(&segre[j - 1].wedge(&chern[k - j]));
        }
        chern.push(acc.scale(c(-1.0, 0.0)));
    }
    chern.remove(0);
    chern
}

/// The Bott-Chern transgression scalar between `G` and an auxiliary
/// Hermitian metric `h`, evaluated at `z`.
pub fn bott_chern_c0(
    model: &MetricModel,
    aux: &MetricModel,
    z: &[C64],
    spec: &QuadratureSpec,
) -> Result<C64> {
    if !aux.is_hermitian_diagonal() {
        return Err(Error::InvalidConfig(
            "the Bott-Chern auxiliary metric must be the diagonal Hermitian family".into(),
        ));
    }
    if aux.frame() != model.frame() {
        return Err(Error::FrameMismatch);
    }
    let aux_prepared = aux.prepare_with_order(z, EvalLevel::Xi.jet_order())?;
    let bracket = BottChernBracket { aux: aux_prepared };
    let out = fiber_integrate(model, z, &bracket, spec)?;
    Ok(out.form.scalar_part() * c(0.0, 1.0 / (2.0 * PI)))
}

/// Fibre average of the induced Hermitian matrix against the probability
/// measure `i_z^* omega_FS^{r-1}`.
pub fn averaged_metric(model: &MetricModel, z: &[C64], spec: &QuadratureSpec) -> Result<CMat> {
    let r = model.frame().r();
    let mut integrands: Vec<LeviFs> = Vec::with_capacity(r * r);
    for i in 0..r {
        for j in 0..r {
            integrands.push(LeviFs { i, j });
        }
    }
    let refs: Vec<&dyn FiberIntegrand> = integrands
        .iter()
        .map(|ig| ig as &dyn FiberIntegrand)
        .collect();
    let outs = fiber_pushforward_multi(model, z, &refs, spec)?;
    Ok(CMat::from_fn(r, |i, j| outs[i * r + j].form.scalar_part()))
}

/// The L2 metric of a dual fibre vector `u`:
/// `h_z(u) = int |<u, v>|^2 e^{-phi} omega^phi_{r-1}` over `P(E_z)`.
pub fn l2_dual_metric(
    model: &MetricModel,
    z: &[C64],
    u: &[C64],
    spec: &QuadratureSpec,
) -> Result<f64> {
    if u.iter().all(|x| x.norm() == 0.0) {
        return Err(Error::ZeroFiberVector);
    }
    let out = fiber_integrate(model, z, &L2DualDensity { u: u.to_vec() }, spec)?;
    Ok(out.form.scalar_part().re)
}
