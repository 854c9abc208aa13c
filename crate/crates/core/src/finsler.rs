//! Metric model families and the pointwise curvature package of a strongly
//! pseudo-convex Finsler metric: the Levi form `G_{i j-bar}` and its inverse,
//! the Chern connection coefficients `Gamma`/`gamma`, the tensor
//! `K_{i j-bar alpha beta-bar}`, the Kobayashi curvature form `Psi`, the
//! vertical form `omega_FS`, the first Chern form `Xi` of the hyperplane
//! bundle, and the full curvature matrix `Theta` of the pulled-back bundle.
//!
//! All of it is extracted from a single order-4 jet of `G` at the point.

use crate::exterior::{DeltaDirection, Form, FormMatrix, Gen};
use crate::jets::{self, CoordinateFrame, Jet, WirtingerIndex, JET_ORDER};
use crate::linalg::CMat;
use crate::quad::sampling;
use crate::{Error, Result};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::Arc;

type C64 = Complex64;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Builder signature for user-supplied metrics: receives the seeded
/// coordinate jets `(z, v)` and returns the jet of `G`.
pub type CustomBuild = dyn Fn(&[Jet], &[Jet]) -> Result<Jet> + Send + Sync;

/// The built-in metric families.
///
/// Degrees are listed per fibre index and per base factor: over a single
/// projective line `degrees[i] = [a_i]` gives the weight
/// `(1 + |z|^2)^{-a_i}`, over a product of two lines
/// `degrees[i] = [a_i, b_i]` gives the product of the factor weights.
#[derive(Clone)]
pub enum MetricFamily {
    /// `G = sum_i h_i(z) |v^i|^2` with diagonal line-bundle weights.
    HermitianDiagonal { degrees: Vec<Vec<i32>> },
    /// `G = G_h + eps * Q / G_h` with `Q = sum_i (h_i |v^i|^2)^2`;
    /// genuinely non-Hermitian for `eps > 0` and rank >= 2.
    FinslerPerturbed { degrees: Vec<Vec<i32>>, epsilon: f64 },
    /// `G = G_inner * h_L(z)` for a Hermitian line-bundle weight.
    TensorByLine {
        inner: Box<MetricFamily>,
        line_degrees: Vec<i32>,
    },
    /// The inner metric read on the coordinate subbundle spanned by the
    /// `keep` fibre coordinates.
    Restricted {
        inner: Box<MetricFamily>,
        inner_rank: usize,
        keep: Vec<usize>,
    },
    /// In-code hook for bespoke metrics (used e.g. by negative controls).
    Custom {
        name: String,
        build: Arc<CustomBuild>,
    },
}

impl std::fmt::Debug for MetricFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MetricFamily::HermitianDiagonal { degrees } => {
                write!(f, "HermitianDiagonal({degrees:?})")
            }
            MetricFamily::FinslerPerturbed { degrees, epsilon } => {
                write!(f, "FinslerPerturbed({degrees:?}, eps={epsilon})")
            }
            MetricFamily::TensorByLine {
                inner,
                line_degrees,
            } => write!(f, "TensorByLine({inner:?}, {line_degrees:?})"),
            MetricFamily::Restricted { inner, keep, .. } => {
                write!(f, "Restricted({inner:?}, keep={keep:?})")
            }
            MetricFamily::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

/// An evaluatable Finsler metric on a chart of the bundle.
#[derive(Clone, Debug)]
pub struct MetricModel {
    frame: CoordinateFrame,
    family: MetricFamily,
}

fn weight_jet(z_jets: &[Jet], degrees: &[i32]) -> Result<Jet> {
    debug_assert_eq!(z_jets.len(), degrees.len());
    let mut acc: Option<Jet> = None;
    for (zj, &d) in z_jets.iter().zip(degrees) {
        let one_plus = zj.mul(&zj.conj()).add_scalar(c(1.0, 0.0));
        let factor = one_plus.powf(-f64::from(d))?;
        acc = Some(match acc {
            None => factor,
            Some(a) => a.mul(&factor),
        });
    }
    Ok(acc.expect("at least one base factor"))
}

fn hermitian_weights(z_jets: &[Jet], degrees: &[Vec<i32>]) -> Result<Vec<Jet>> {
    degrees.iter().map(|d| weight_jet(z_jets, d)).collect()
}

/// Per-basepoint cache of the z-only jets of a model, shared across the many
/// fibre evaluations of one fibre integral.
pub struct PreparedMetric {
    frame: CoordinateFrame,
    order: usize,
    z: Vec<C64>,
    z_jets: Vec<Jet>,
    state: PreparedState,
}

enum PreparedState {
    Hermitian {
        weights: Vec<Jet>,
    },
    Perturbed {
        weights: Vec<Jet>,
        epsilon: f64,
    },
    TensorLine {
        inner: Box<PreparedState>,
        line: Jet,
    },
    Restricted {
        inner: Box<PreparedState>,
        inner_rank: usize,
        keep: Vec<usize>,
    },
    Custom {
        build: Arc<CustomBuild>,
    },
}

fn prepare_state(family: &MetricFamily, z_jets: &[Jet]) -> Result<PreparedState> {
    Ok(match family {
        MetricFamily::HermitianDiagonal { degrees } => PreparedState::Hermitian {
            weights: hermitian_weights(z_jets, degrees)?,
        },
        MetricFamily::FinslerPerturbed { degrees, epsilon } => PreparedState::Perturbed {
            weights: hermitian_weights(z_jets, degrees)?,
            epsilon: *epsilon,
        },
        MetricFamily::TensorByLine {
            inner,
            line_degrees,
        } => PreparedState::TensorLine {
            inner: Box::new(prepare_state(inner, z_jets)?),
            line: weight_jet(z_jets, line_degrees)?,
        },
        MetricFamily::Restricted {
            inner,
            inner_rank,
            keep,
        } => PreparedState::Restricted {
            inner: Box::new(prepare_state(inner, z_jets)?),
            inner_rank: *inner_rank,
            keep: keep.clone(),
        },
        MetricFamily::Custom { build, .. } => PreparedState::Custom {
            build: build.clone(),
        },
    })
}

fn state_contains_custom(state: &PreparedState) -> bool {
    match state {
        PreparedState::Custom { .. } => true,
        PreparedState::TensorLine { inner, .. } | PreparedState::Restricted { inner, .. } => {
            state_contains_custom(inner)
        }
        _ => false,
    }
}

fn build_from_state(state: &PreparedState, z_jets: &[Jet], v_jets: &[Jet]) -> Result<Jet> {
    // Cached z-only jets were seeded at a different fibre basepoint; their
    // coefficients are v-independent, so re-tag them onto the live one.
    let tag = &v_jets[0];
    match state {
        PreparedState::Hermitian { weights } => {
            let mut acc: Option<Jet> = None;
            for (h, vj) in weights.iter().zip(v_jets) {
                let term = h.with_basepoint_of(tag).mul(&vj.mul(&vj.conj()));
                acc = Some(match acc {
                    None => term,
                    Some(a) => a.add(&term),
                });
            }
            Ok(acc.expect("rank >= 1"))
        }
        PreparedState::Perturbed { weights, epsilon } => {
            let mut gh: Option<Jet> = None;
            let mut q: Option<Jet> = None;
            for (h, vj) in weights.iter().zip(v_jets) {
                let term = h.with_basepoint_of(tag).mul(&vj.mul(&vj.conj()));
                let term_sq = term.mul(&term);
                gh = Some(match gh {
                    None => term.clone(),
                    Some(a) => a.add(&term),
                });
                q = Some(match q {
                    None => term_sq,
                    Some(a) => a.add(&term_sq),
                });
            }
            let gh = gh.expect("rank >= 1");
            let q = q.expect("rank >= 1");
            Ok(gh.add(&q.div(&gh)?.scale(c(*epsilon, 0.0))))
        }
        PreparedState::TensorLine { inner, line } => {
            Ok(build_from_state(inner, z_jets, v_jets)?.mul(&line.with_basepoint_of(tag)))
        }
        PreparedState::Restricted {
            inner,
            inner_rank,
            keep,
        } => {
            let zero = jets::constant_like(&v_jets[0], c(0.0, 0.0));
            let mut inner_v = vec![zero; *inner_rank];
            for (pos, &idx) in keep.iter().enumerate() {
                inner_v[idx] = v_jets[pos].clone();
            }
            build_from_state(inner, z_jets, &inner_v)
        }
        PreparedState::Custom { build } => build(z_jets, v_jets),
    }
}

impl PreparedMetric {
    /// Jet of `G` at `(z, v)`, reusing the cached z-only jets.
    pub fn metric_jet(&self, v: &[C64]) -> Result<Jet> {
        if v.iter().all(|x| x.norm() == 0.0) {
            return Err(Error::ZeroFiberVector);
        }
        let mut basepoint = self.z.clone();
        basepoint.extend_from_slice(v);
        let all = jets::seed_with_order(&self.frame, &basepoint, self.order)?;
        let v_jets = &all[self.frame.n()..];
        // The cached z-only jets were seeded at a different fibre basepoint;
        // their coefficients do not depend on it, only the recorded
        // basepoint tag does, so re-tag instead of re-deriving. Only the
        // custom hook consumes them directly.
        let z_jets: Vec<Jet> = if state_contains_custom(&self.state) {
            self.z_jets
                .iter()
                .map(|j| j.with_basepoint_of(&all[0]))
                .collect()
        } else {
            Vec::new()
        };
        build_from_state(&self.state, &z_jets, v_jets)
    }

    pub fn z(&self) -> &[C64] {
        &self.z
    }

    pub fn frame(&self) -> &CoordinateFrame {
        &self.frame
    }

}

impl MetricModel {
    pub fn hermitian_diagonal(n: usize, degrees: Vec<Vec<i32>>) -> Result<MetricModel> {
        let r = degrees.len();
        for d in &degrees {
            if d.len() != n {
                return Err(Error::InvalidConfig(format!(
                    "each degree row needs {n} base-factor entries, got {}",
                    d.len()
                )));
            }
        }
        Ok(MetricModel {
            frame: CoordinateFrame::new(n, r)?,
            family: MetricFamily::HermitianDiagonal { degrees },
        })
    }

    pub fn finsler_perturbed(n: usize, degrees: Vec<Vec<i32>>, epsilon: f64) -> Result<MetricModel> {
        let base = Self::hermitian_diagonal(n, degrees)?;
        let degrees = match base.family {
            MetricFamily::HermitianDiagonal { degrees } => degrees,
            _ => unreachable!(),
        };
        Ok(MetricModel {
            frame: base.frame,
            family: MetricFamily::FinslerPerturbed { degrees, epsilon },
        })
    }

    /// Tensors the model by a Hermitian line-bundle weight on the same base.
    pub fn tensor_by_line(self, line_degrees: Vec<i32>) -> Result<MetricModel> {
        if line_degrees.len() != self.frame.n() {
            return Err(Error::InvalidConfig(
                "line-bundle degree list must match the base factor count".into(),
            ));
        }
        Ok(MetricModel {
            frame: self.frame,
            family: MetricFamily::TensorByLine {
                inner: Box::new(self.family),
                line_degrees,
            },
        })
    }

    /// Restricts the model to the coordinate subbundle spanned by `keep`.
    pub fn restricted(self, keep: Vec<usize>) -> Result<MetricModel> {
        let inner_rank = self.frame.r();
        if keep.is_empty() || keep.iter().any(|&i| i >= inner_rank) {
            return Err(Error::InvalidConfig(
                "restriction needs a nonempty subset of fibre indices".into(),
            ));
        }
        let frame = CoordinateFrame::new(self.frame.n(), keep.len())?;
        Ok(MetricModel {
            frame,
            family: MetricFamily::Restricted {
                inner: Box::new(self.family),
                inner_rank,
                keep,
            },
        })
    }

    pub fn custom(
        frame: CoordinateFrame,
        name: impl Into<String>,
        build: Arc<CustomBuild>,
    ) -> MetricModel {
        MetricModel {
            frame,
            family: MetricFamily::Custom {
                name: name.into(),
                build,
            },
        }
    }

    pub fn frame(&self) -> &CoordinateFrame {
        &self.frame
    }

    pub fn family(&self) -> &MetricFamily {
        &self.family
    }

    pub fn is_hermitian_diagonal(&self) -> bool {
        matches!(self.family, MetricFamily::HermitianDiagonal { .. })
    }

    /// Caches the z-only jets of the model at `z` for repeated fibre
    /// evaluations.
    pub fn prepare(&self, z: &[C64]) -> Result<PreparedMetric> {
        self.prepare_with_order(z, JET_ORDER)
    }

    pub(crate) fn prepare_with_order(&self, z: &[C64], order: usize) -> Result<PreparedMetric> {
        if z.len() != self.frame.n() {
            return Err(Error::BasepointMismatch {
                want: self.frame.n(),
                got: z.len(),
            });
        }
        let mut basepoint = z.to_vec();
        basepoint.extend(std::iter::repeat(c(1.0, 0.0)).take(self.frame.r()));
        let all = jets::seed_with_order(&self.frame, &basepoint, order)?;
        let z_jets = all[..self.frame.n()].to_vec();
        let state = prepare_state(&self.family, &z_jets)?;
        Ok(PreparedMetric {
            frame: self.frame.clone(),
            order,
            z: z.to_vec(),
            z_jets,
            state,
        })
    }

    /// Jet of `G` at `(z, v)` without caching.
    pub fn metric_jet(&self, z: &[C64], v: &[C64]) -> Result<Jet> {
        self.prepare(z)?.metric_jet(v)
    }

    /// Metric value `G(z, v)` by plain scalar arithmetic where the family
    /// permits (everything but the in-code hook), cheap enough for
    /// finite-difference stencils; custom metrics fall back to order-1 jets.
    pub fn metric_value(&self, z: &[C64], v: &[C64]) -> Result<f64> {
        match scalar_value(&self.family, z, v) {
            Some(value) => value,
            None => Ok(self.prepare_with_order(z, 1)?.metric_jet(v)?.value().re),
        }
    }
}

fn scalar_weight(z: &[C64], degrees: &[i32]) -> f64 {
    z.iter()
        .zip(degrees)
        .map(|(zf, &d)| (1.0 + zf.norm_sqr()).powi(-d))
        .product()
}

/// Scalar evaluation mirror of the jet builders; `None` for the custom hook.
fn scalar_value(family: &MetricFamily, z: &[C64], v: &[C64]) -> Option<Result<f64>> {
    match family {
        MetricFamily::HermitianDiagonal { degrees } => Some(Ok(degrees
            .iter()
            .zip(v)
            .map(|(d, vi)| scalar_weight(z, d) * vi.norm_sqr())
            .sum())),
        MetricFamily::FinslerPerturbed { degrees, epsilon } => {
            let mut gh = 0.0f64;
            let mut q = 0.0f64;
            for (d, vi) in degrees.iter().zip(v) {
                let term = scalar_weight(z, d) * vi.norm_sqr();
                gh += term;
                q += term * term;
            }
            if gh.abs() < 1e-12 {
                return Some(Err(Error::DivisionNearZero {
                    value: C64::new(gh, 0.0),
                }));
            }
            Some(Ok(gh + epsilon * q / gh))
        }
        MetricFamily::TensorByLine {
            inner,
            line_degrees,
        } => scalar_value(inner, z, v)
            .map(|r| r.map(|value| value * scalar_weight(z, line_degrees))),
        MetricFamily::Restricted {
            inner,
            inner_rank,
            keep,
        } => {
            let mut embedded = vec![C64::new(0.0, 0.0); *inner_rank];
            for (pos, &idx) in keep.iter().enumerate() {
                embedded[idx] = v[pos];
            }
            scalar_value(inner, z, &embedded)
        }
        MetricFamily::Custom { .. } => None,
    }
}

/// The tensor `K_{i j-bar alpha beta-bar}` of the Kobayashi curvature.
#[derive(Clone, Debug)]
pub struct KTensor {
    n: usize,
    r: usize,
    data: Vec<C64>,
}

impl KTensor {
    fn zeros(n: usize, r: usize) -> KTensor {
        KTensor {
            n,
            r,
            data: vec![c(0.0, 0.0); n * n * r * r],
        }
    }

    fn idx(&self, i: usize, j: usize, alpha: usize, beta: usize) -> usize {
        ((i * self.r + j) * self.n + alpha) * self.n + beta
    }

    pub fn get(&self, i: usize, j: usize, alpha: usize, beta: usize) -> C64 {
        self.data[self.idx(i, j, alpha, beta)]
    }

    fn set(&mut self, i: usize, j: usize, alpha: usize, beta: usize, value: C64) {
        let k = self.idx(i, j, alpha, beta);
        self.data[k] = value;
    }

    /// The Hermitian matrix `K_{i j-bar alpha beta-bar} v^i v-bar^j / G`
    /// indexed by `(alpha, beta)`.
    pub fn contracted(&self, v: &[C64], g: f64) -> CMat {
        CMat::from_fn(self.n, |alpha, beta| {
            let mut s = c(0.0, 0.0);
            for i in 0..self.r {
                for j in 0..self.r {
                    s += self.get(i, j, alpha, beta) * v[i] * v[j].conj();
                }
            }
            s / g
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }
}

/// Every pointwise curvature object of the metric at one `(z, v)`.
#[derive(Clone, Debug)]
pub struct CurvatureBundle {
    pub z: Vec<C64>,
    pub v: Vec<C64>,
    /// Metric value `G(z, v)`.
    pub g: f64,
    /// Levi matrix `G_{i j-bar}`.
    pub levi: CMat,
    /// Inverse `G^{j-bar k}`.
    pub levi_inv: CMat,
    /// `gamma_h[alpha][(i, k)] = Gamma^k_{i alpha}`.
    pub gamma_h: Vec<CMat>,
    /// `gamma_v[l][(i, k)] = gamma^k_{i l}`.
    pub gamma_v: Vec<CMat>,
    pub kobayashi: KTensor,
    /// Kobayashi curvature `Psi` as a horizontal (1,1)-form.
    pub psi: Form,
    /// Vertical Fubini-Study form in coordinates (built in the delta basis).
    pub omega_fs: Form,
    /// First Chern form of the hyperplane bundle, over all coordinates.
    pub xi: Form,
    /// Full curvature matrix of the pulled-back bundle.
    pub theta: FormMatrix,
    frame: CoordinateFrame,
}

impl CurvatureBundle {
    pub fn frame(&self) -> &CoordinateFrame {
        &self.frame
    }

    /// Largest violation of `gamma^k_{il} v^i = gamma^k_{il} v^l = 0`.
    pub fn gamma_v_contraction_residual(&self) -> f64 {
        let r = self.frame.r();
        let mut worst = 0.0f64;
        for k in 0..r {
            for l in 0..r {
                let mut s = c(0.0, 0.0);
                for i in 0..r {
                    s += self.gamma_v[l][(i, k)] * self.v[i];
                }
                worst = worst.max(s.norm());
            }
            for i in 0..r {
                let mut s = c(0.0, 0.0);
                for l in 0..r {
                    s += self.gamma_v[l][(i, k)] * self.v[l];
                }
                worst = worst.max(s.norm());
            }
        }
        worst
    }

    /// `sqrt(-1) * Theta^k_i v^i G_k / G`, the curvature pairing of the
    /// tautological section; its horizontal part reproduces `Psi`.
    pub fn theta_pairing(&self) -> Form {
        let r = self.frame.r();
        let mut acc = Form::zero(&self.frame);
        for i in 0..r {
            for k in 0..r {
                // G_k = G_{k j-bar} v-bar^j by the Euler identities
                let mut gk = c(0.0, 0.0);
                for j in 0..r {
                    gk += self.levi[(k, j)] * self.v[j].conj();
                }
                acc = acc.add(&self.theta.get(i, k).scale(self.v[i] * gk));
            }
        }
        acc.scale(c(0.0, 1.0 / self.g))
    }
}

/// Leveled point evaluation: fibre integrands declare how much derivative
/// depth they need, and the engine seeds jets of exactly that order.
pub mod node {
    use super::*;

    /// How much of the curvature package a fibre-node evaluation needs.
    #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
    pub enum EvalLevel {
        /// Only `Xi`, the Levi matrix and the vertical log-Hessian
        /// (second-order data).
        Xi,
        /// Everything, from the order-4 jet.
        Full,
    }

    impl EvalLevel {
        pub fn jet_order(self) -> usize {
            match self {
                EvalLevel::Xi => 2,
                EvalLevel::Full => JET_ORDER,
            }
        }
    }

    /// Per-node curvature data handed to fibre integrands.
    pub struct NodeData {
        pub g: f64,
        pub levi: CMat,
        /// `(i/2pi) d d-bar log G` over all chart coordinates.
        pub xi: Form,
        /// `d^2 log G / dv^i dv-bar^j`.
        pub log_vert_hessian: CMat,
        pub full: Option<Box<CurvatureBundle>>,
    }

    pub fn evaluate_node(
        prepared: &PreparedMetric,
        v: &[C64],
        level: EvalLevel,
    ) -> Result<NodeData> {
        let frame = prepared.frame().clone();
        let n = frame.n();
        let r = frame.r();
        let g_jet = prepared.metric_jet(v)?;
        g_jet.check_real()?;
        let log_jet = g_jet.ln()?;
        let g = g_jet.value().re;

        let wz = |a: usize| a;
        let wv = |i: usize| frame.v_id(i);
        let coord = |a: usize| -> Gen {
            if a < n {
                Gen::Dz(a)
            } else {
                Gen::Dv(a - n)
            }
        };
        let coord_bar = |a: usize| -> Gen {
            if a < n {
                Gen::Dzbar(a)
            } else {
                Gen::Dvbar(a - n)
            }
        };

        let levi = CMat::from_fn(r, |i, j| {
            log_deriv_panic(&g_jet, &[wv(i)], &[wv(j)])
        });

        let mut xi = Form::zero(&frame);
        let scale = c(0.0, 1.0 / (2.0 * PI));
        for a in 0..n + r {
            for b in 0..n + r {
                let coeff = log_deriv_panic(&log_jet, &[a], &[b]) * scale;
                if coeff != c(0.0, 0.0) {
                    let ga = coord(a).bit(&frame);
                    let gb = coord_bar(b).bit(&frame);
                    xi.insert(ga | gb, coeff * crate::exterior::merge_sign(ga, gb));
                }
            }
        }

        let log_vert_hessian = CMat::from_fn(r, |i, j| {
            log_deriv_panic(&log_jet, &[wv(i)], &[wv(j)])
        });

        if level == EvalLevel::Xi {
            return Ok(NodeData {
                g,
                levi,
                xi,
                log_vert_hessian,
                full: None,
            });
        }

        // Order-4 package.
        let (min_eig, _witness) = levi.hermitian_min_eig();
        let trace = levi.trace().re;
        if min_eig <= 1e-10 * trace.abs().max(1e-300) {
            return Err(Error::NotPseudoConvex {
                min_eigenvalue: min_eig,
                z: prepared.z().to_vec(),
                v: v.to_vec(),
            });
        }
        let levi_inv = levi.inverse()?;

        // dl_holo[a][(i,j)] = G_{i j-bar a}, dl_anti[b][(i,j)] = G_{i j-bar b-bar}
        let m = n + r;
        let mut dl_holo = Vec::with_capacity(m);
        let mut dl_anti = Vec::with_capacity(m);
        for a in 0..m {
            dl_holo.push(CMat::from_fn(r, |i, j| {
                log_deriv_panic(&g_jet, &[wv(i), a], &[wv(j)])
            }));
            dl_anti.push(CMat::from_fn(r, |i, j| {
                log_deriv_panic(&g_jet, &[wv(i)], &[wv(j), a])
            }));
        }

        let gamma_h: Vec<CMat> = (0..n).map(|alpha| dl_holo[alpha].mul(&levi_inv)).collect();
        let gamma_v: Vec<CMat> = (0..r)
            .map(|l| dl_holo[n + l].mul(&levi_inv))
            .collect();

        // K_{i j-bar alpha beta-bar}
        //   = -G_{i j-bar alpha beta-bar}
        //     + G_{i l-bar alpha} G^{l-bar k} G_{k j-bar beta-bar}
        let mut kobayashi = KTensor::zeros(n, r);
        for alpha in 0..n {
            let a_linv = dl_holo[alpha].mul(&levi_inv);
            for beta in 0..n {
                let second = a_linv.mul(&dl_anti[beta]);
                for i in 0..r {
                    for j in 0..r {
                        let d4 = log_deriv_panic(&g_jet, &[wv(i), wz(alpha)], &[wv(j), wz(beta)]);
                        kobayashi.set(i, j, alpha, beta, -d4 + second[(i, j)]);
                    }
                }
            }
        }

        let psi_matrix = kobayashi.contracted(v, g);
        let mut psi = Form::zero(&frame);
        for alpha in 0..n {
            for beta in 0..n {
                let coeff = psi_matrix[(alpha, beta)] * c(0.0, 1.0);
                if coeff != c(0.0, 0.0) {
                    // dz bits sit below dz-bar bits, so the pair is sorted
                    psi.insert(
                        Gen::Dz(alpha).bit(&frame) | Gen::Dzbar(beta).bit(&frame),
                        coeff,
                    );
                }
            }
        }

        // omega_FS assembled in the delta basis, then pushed to coordinates.
        let mut fs_delta = Form::zero(&frame);
        for i in 0..r {
            for j in 0..r {
                let coeff = log_vert_hessian[(i, j)] * scale;
                if coeff != c(0.0, 0.0) {
                    fs_delta.insert(
                        Gen::Dv(i).bit(&frame) | Gen::Dvbar(j).bit(&frame),
                        coeff,
                    );
                }
            }
        }
        let omega_fs = fs_delta.delta_basis(&gamma_h, v, DeltaDirection::FromDelta);

        // Theta^k_i = d-bar of (Gamma^k_{i alpha} dz^alpha + gamma^k_{il} dv^l):
        // for each holomorphic direction a with connection matrix
        // P_a = (d_a L) L^{-1}, the antiholomorphic derivative is
        // d_b-bar P_a = (d_b-bar d_a L) L^{-1} - (d_a L) L^{-1} (d_b-bar L) L^{-1}.
        let mut d2l = vec![vec![CMat::zeros(r); m]; m];
        for a in 0..m {
            for b in 0..m {
                d2l[a][b] = CMat::from_fn(r, |i, j| {
                    log_deriv_panic(&g_jet, &[wv(i), a], &[wv(j), b])
                });
            }
        }
        let mut theta = FormMatrix::zeros(&frame, r);
        let mut theta_entries = vec![vec![Form::zero(&frame); r]; r];
        for a in 0..m {
            let p_a = dl_holo[a].mul(&levi_inv);
            for b in 0..m {
                let d_p = d2l[a][b]
                    .mul(&levi_inv)
                    .sub(&p_a.mul(&dl_anti[b].mul(&levi_inv)));
                let gb = coord_bar(b).bit(&frame);
                let ga = coord(a).bit(&frame);
                let sign = crate::exterior::merge_sign(gb, ga);
                for i in 0..r {
                    for k in 0..r {
                        let coeff = d_p[(i, k)];
                        if coeff != c(0.0, 0.0) {
                            theta_entries[i][k].insert(gb | ga, coeff * sign);
                        }
                    }
                }
            }
        }
        for i in 0..r {
            for k in 0..r {
                theta.set(i, k, std::mem::replace(&mut theta_entries[i][k], Form::zero(&frame)));
            }
        }

        let full = CurvatureBundle {
            z: prepared.z().to_vec(),
            v: v.to_vec(),
            g,
            levi,
            levi_inv,
            gamma_h,
            gamma_v,
            kobayashi,
            psi,
            omega_fs,
            xi: xi.clone(),
            theta,
            frame: frame.clone(),
        };
        Ok(NodeData {
            g,
            levi: full.levi.clone(),
            xi,
            log_vert_hessian,
            full: Some(Box::new(full)),
        })
    }

    fn log_deriv_panic(jet: &Jet, holo: &[usize], anti: &[usize]) -> C64 {
        jet.wirtinger(&WirtingerIndex::new(holo.to_vec(), anti.to_vec()))
            .expect("derivative order within jet order")
    }
}

/// Full curvature evaluation at one point of `E^o`.
pub fn evaluate(model: &MetricModel, z: &[C64], v: &[C64]) -> Result<CurvatureBundle> {
    let prepared = model.prepare(z)?;
    let data = node::evaluate_node(&prepared, v, node::EvalLevel::Full)?;
    Ok(*data.full.expect("full level"))
}

/// Residual record of the Euler and homogeneity identities at one point,
/// each normalized by `G`.
#[derive(Clone, Debug)]
pub struct EulerResiduals {
    /// `|G_i v^i - G| / G`
    pub first_holo: f64,
    /// `|G_j-bar v-bar^j - G| / G`
    pub first_anti: f64,
    /// `|G_{i j-bar} v^i v-bar^j - G| / G`
    pub levi_contraction: f64,
    /// `max |G_{i j} v^i| / G`
    pub second_holo: f64,
    /// `max |G_{i j-bar k} v^i| / G`
    pub third_holo: f64,
    /// `max |G_{i j-bar k-bar} v-bar^j| / G`
    pub third_anti: f64,
}

impl EulerResiduals {
    pub fn max(&self) -> f64 {
        self.first_holo
            .max(self.first_anti)
            .max(self.levi_contraction)
            .max(self.second_holo)
            .max(self.third_holo)
            .max(self.third_anti)
    }
}

pub fn euler_residuals(model: &MetricModel, z: &[C64], v: &[C64]) -> Result<EulerResiduals> {
    let frame = model.frame().clone();
    let r = frame.r();
    let jet = model.metric_jet(z, v)?;
    let g = jet.value().re;
    let wv = |i: usize| frame.v_id(i);
    let w = |holo: &[usize], anti: &[usize]| -> Result<C64> {
        jet.wirtinger(&WirtingerIndex::new(holo.to_vec(), anti.to_vec()))
    };

    let mut first_holo = c(0.0, 0.0);
    let mut first_anti = c(0.0, 0.0);
    let mut levi_contraction = c(0.0, 0.0);
    for i in 0..r {
        first_holo += w(&[wv(i)], &[])? * v[i];
        first_anti += w(&[], &[wv(i)])? * v[i].conj();
        for j in 0..r {
            levi_contraction += w(&[wv(i)], &[wv(j)])? * v[i] * v[j].conj();
        }
    }

    let mut second_holo = 0.0f64;
    for j in 0..r {
        let mut s = c(0.0, 0.0);
        for i in 0..r {
            s += w(&[wv(i), wv(j)], &[])? * v[i];
        }
        second_holo = second_holo.max(s.norm());
    }

    let mut third_holo = 0.0f64;
    let mut third_anti = 0.0f64;
    for j in 0..r {
        for k in 0..r {
            let mut s = c(0.0, 0.0);
            let mut t = c(0.0, 0.0);
            for i in 0..r {
                s += w(&[wv(i), wv(k)], &[wv(j)])? * v[i];
                t += w(&[wv(k)], &[wv(i), wv(j)])? * v[i].conj();
            }
            third_holo = third_holo.max(s.norm());
            third_anti = third_anti.max(t.norm());
        }
    }

    Ok(EulerResiduals {
        first_holo: (first_holo - c(g, 0.0)).norm() / g,
        first_anti: (first_anti - c(g, 0.0)).norm() / g,
        levi_contraction: (levi_contraction - c(g, 0.0)).norm() / g,
        second_holo: second_holo / g,
        third_holo: third_holo / g,
        third_anti: third_anti / g,
    })
}

/// Max coefficient residual of `Xi - (-Psi/2pi + omega_FS)` in coordinates.
pub fn decomposition_residual(model: &MetricModel, z: &[C64], v: &[C64]) -> Result<f64> {
    let bundle = evaluate(model, z, v)?;
    let rhs = bundle
        .psi
        .scale(c(-1.0 / (2.0 * PI), 0.0))
        .add(&bundle.omega_fs);
    Ok(bundle.xi.max_abs_diff(&rhs))
}

/// Sign classification of the Kobayashi curvature over a sample plan.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SignClass {
    Positive,
    Negative,
    Indefinite,
    Flat,
}

#[derive(Clone, Debug)]
pub struct SignReport {
    pub classification: SignClass,
    /// Extreme eigenvalue over the scan (smallest for positive, largest for
    /// negative classification).
    pub margin: f64,
    pub samples: usize,
}

/// Plan for randomized point scans over the chart and the fibre sphere.
#[derive(Clone, Copy, Debug)]
pub struct SamplePlan {
    pub count: usize,
    pub seed: u64,
    pub chart_radius: f64,
}

impl SamplePlan {
    pub fn new(count: usize, seed: u64, chart_radius: f64) -> SamplePlan {
        SamplePlan {
            count,
            seed,
            chart_radius,
        }
    }

    /// Seeded samples `(z, v)` with `z` uniform in the chart polydisc and
    /// `v` uniform on the unit fibre sphere.
    pub fn points(&self, frame: &CoordinateFrame) -> Vec<(Vec<C64>, Vec<C64>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.count)
            .map(|_| {
                let z = (0..frame.n())
                    .map(|_| sampling::uniform_disc(&mut rng, self.chart_radius))
                    .collect();
                let v = sampling::unit_sphere(&mut rng, frame.r());
                (z, v)
            })
            .collect()
    }
}

pub fn kobayashi_sign_scan(model: &MetricModel, plan: &SamplePlan) -> Result<SignReport> {
    let mut min_eig = f64::INFINITY;
    let mut max_eig = f64::NEG_INFINITY;
    let mut max_entry = 0.0f64;
    let points = plan.points(model.frame());
    for (z, v) in &points {
        let bundle = evaluate(model, z, v)?;
        let psi = bundle.kobayashi.contracted(v, bundle.g);
        max_entry = max_entry.max(psi.max_abs());
        let eigs = psi.hermitian_eigenvalues();
        min_eig = min_eig.min(eigs[0]);
        max_eig = max_eig.max(*eigs.last().unwrap());
    }
    let classification = if max_entry < 1e-8 {
        SignClass::Flat
    } else if min_eig > 1e-8 {
        SignClass::Positive
    } else if max_eig < -1e-8 {
        SignClass::Negative
    } else {
        SignClass::Indefinite
    };
    let margin = match classification {
        SignClass::Positive => min_eig,
        SignClass::Negative => max_eig,
        SignClass::Flat => max_entry,
        SignClass::Indefinite => 0.0,
    };
    Ok(SignReport {
        classification,
        margin,
        samples: points.len(),
    })
}

/// `tr_omega Psi = g^{alpha beta-bar} K_{i j-bar alpha beta-bar} v^i v-bar^j / G`
/// for a positive Kahler matrix `g_{alpha beta-bar}` at `z`.
pub fn einstein_trace(model: &MetricModel, z: &[C64], v: &[C64], kahler: &CMat) -> Result<C64> {
    let bundle = evaluate(model, z, v)?;
    trace_against(&bundle.kobayashi.contracted(v, bundle.g), kahler, z)
}

pub(crate) fn trace_against(matrix: &CMat, kahler: &CMat, z: &[C64]) -> Result<C64> {
    if kahler.hermitian_eigenvalues()[0] <= 0.0 {
        return Err(Error::DegenerateKahler { z: z.to_vec() });
    }
    let inv = kahler.inverse()?;
    let n = kahler.dim();
    let mut s = c(0.0, 0.0);
    for alpha in 0..n {
        for beta in 0..n {
            // g^{alpha beta-bar} is the (beta, alpha) entry of the inverse
            s += inv[(beta, alpha)] * matrix[(alpha, beta)];
        }
    }
    Ok(s)
}

#[derive(Clone, Debug)]
pub struct HermitianEinsteinReport {
    pub lambda: f64,
    pub residual: f64,
}

/// Residual of `g^{alpha beta-bar} K^i_{j alpha beta-bar} = lambda delta^i_j`
/// over a sample plan, for Hermitian-induced models.
pub fn hermitian_einstein_check(
    model: &MetricModel,
    kahler_at: &dyn Fn(&[C64]) -> CMat,
    plan: &SamplePlan,
) -> Result<HermitianEinsteinReport> {
    if !model.is_hermitian_diagonal() {
        return Err(Error::NotHermitianInduced);
    }
    let r = model.frame().r();
    let n = model.frame().n();
    let mut contracted = Vec::new();
    for (z, v) in plan.points(model.frame()) {
        let bundle = evaluate(model, &z, &v)?;
        let kahler = kahler_at(&z);
        if kahler.hermitian_eigenvalues()[0] <= 0.0 {
            return Err(Error::DegenerateKahler { z: z.clone() });
        }
        let ginv = kahler.inverse()?;
        // raise the barred index: K^k_i = K_{i j-bar} G^{j-bar k}
        let mut traced = CMat::zeros(r);
        for alpha in 0..n {
            for beta in 0..n {
                let block = CMat::from_fn(r, |i, j| bundle.kobayashi.get(i, j, alpha, beta));
                let raised = block.mul(&bundle.levi_inv);
                for i in 0..r {
                    for k in 0..r {
                        traced[(i, k)] += ginv[(beta, alpha)] * raised[(i, k)];
                    }
                }
            }
        }
        contracted.push(traced);
    }
    let lambda = contracted
        .iter()
        .map(|m| m.trace().re / r as f64)
        .sum::<f64>()
        / contracted.len() as f64;
    let mut residual = 0.0f64;
    for m in &contracted {
        let diff = m.sub(&CMat::identity(r).scale(c(lambda, 0.0)));
        residual = residual.max(diff.max_abs());
    }
    Ok(HermitianEinsteinReport { lambda, residual })
}

/// Admission scan for a model: homogeneity `G(z, lambda v) = |lambda|^2 G`,
/// positivity of `G`, and strong pseudo-convexity of the Levi form.
#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub homogeneity_residual: f64,
    pub min_metric_value: f64,
    pub min_levi_eigenvalue: f64,
    pub witness: Option<(Vec<C64>, Vec<C64>, Vec<C64>)>,
}

pub fn validate_model(model: &MetricModel, plan: &SamplePlan) -> Result<ValidationReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed ^ 0x4d45_5452_4943);
    let mut homogeneity = 0.0f64;
    let mut min_g = f64::INFINITY;
    let mut min_eig = f64::INFINITY;
    let mut witness = None;
    for (z, v) in plan.points(model.frame()) {
        let jet = model.metric_jet(&z, &v)?;
        jet.check_real()?;
        let g = jet.value().re;
        min_g = min_g.min(g);
        let lambda = sampling::random_phase_scale(&mut rng, 0.25, 4.0);
        let scaled: Vec<C64> = v.iter().map(|x| x * lambda).collect();
        let g_scaled = model.metric_value(&z, &scaled)?;
        let expected = lambda.norm_sqr() * g;
        homogeneity = homogeneity.max((g_scaled - expected).abs() / expected.abs().max(1e-300));
        let frame = model.frame();
        let levi = CMat::from_fn(frame.r(), |i, j| {
            jet.wirtinger(&WirtingerIndex::new(vec![frame.v_id(i)], vec![frame.v_id(j)]))
                .expect("order 2 within jet order")
        });
        let (eig, vec) = levi.hermitian_min_eig();
        if eig < min_eig {
            min_eig = eig;
            witness = Some((z.clone(), v.clone(), vec));
        }
    }
    let report = ValidationReport {
        homogeneity_residual: homogeneity,
        min_metric_value: min_g,
        min_levi_eigenvalue: min_eig,
        witness,
    };
    if min_g <= 0.0 || min_eig <= 0.0 {
        let (z, v, _) = report.witness.clone().unwrap();
        return Err(Error::NotPseudoConvex {
            min_eigenvalue: min_eig,
            z,
            v,
        });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn flat_r2() -> MetricModel {
        MetricModel::hermitian_diagonal(1, vec![vec![0], vec![0]]).unwrap()
    }

    fn cp1_model(a: i32, b: i32) -> MetricModel {
        MetricModel::hermitian_diagonal(1, vec![vec![a], vec![b]]).unwrap()
    }

    fn perturbed(eps: f64) -> MetricModel {
        MetricModel::finsler_perturbed(1, vec![vec![1], vec![1]], eps).unwrap()
    }

    #[test]
    fn flat_model_curvature_vanishes() {
        let model = flat_r2();
        let z = [c(0.4, -0.3)];
        let v = [c(1.0, 0.2), c(-0.5, 0.8)];
        let bundle = evaluate(&model, &z, &v).unwrap();
        assert!(bundle.kobayashi.max_abs() < 1e-14);
        assert!(bundle.psi.max_abs() < 1e-14);
        for g in &bundle.gamma_h {
            assert!(g.max_abs() < 1e-14);
        }
        for g in &bundle.gamma_v {
            assert!(g.max_abs() < 1e-14);
        }
    }

    #[test]
    fn hermitian_psi_coefficient_at_origin() {
        // degrees (1,1) on one line: Psi = sqrt(-1) dz dz-bar at z=0
        let model = cp1_model(1, 1);
        let z = [c(0.0, 0.0)];
        let v = [c(1.0, 0.0), c(0.0, 0.0)];
        let bundle = evaluate(&model, &z, &v).unwrap();
        let frame = model.frame();
        let mask = Gen::Dz(0).bit(frame) | Gen::Dzbar(0).bit(frame);
        let coeff = bundle.psi.coeff(mask);
        assert_abs_diff_eq!(coeff.re, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(coeff.im, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn perturbed_z_independent_is_flat_but_not_hermitian() {
        let model = MetricModel::finsler_perturbed(1, vec![vec![0], vec![0]], 0.1).unwrap();
        let z = [c(0.7, 0.1)];
        let v = [c(1.0, 0.0), c(0.6, -0.4)];
        let bundle = evaluate(&model, &z, &v).unwrap();
        assert!(bundle.kobayashi.max_abs() < 1e-12, "z-independent metric");
        let gamma_v_size: f64 = bundle.gamma_v.iter().map(|m| m.max_abs()).fold(0.0, f64::max);
        assert!(gamma_v_size > 1e-3, "perturbation must bend the fibres");
    }

    #[test]
    fn euler_residuals_flat() {
        let model = flat_r2();
        let res = euler_residuals(&model, &[c(0.2, 0.3)], &[c(0.9, -0.1), c(0.4, 0.7)]).unwrap();
        assert!(res.max() < 1e-12, "{res:?}");
    }

    #[test]
    fn euler_residuals_perturbed() {
        let model = perturbed(0.1);
        let plan = SamplePlan::new(25, 42, 1.0);
        for (z, v) in plan.points(model.frame()) {
            let res = euler_residuals(&model, &z, &v).unwrap();
            assert!(res.max() < 1e-9, "{res:?}");
        }
    }

    #[test]
    fn euler_residuals_flag_broken_homogeneity() {
        // G + |v1|^3 breaks degree-(1,1) homogeneity; the validator must see it.
        let frame = CoordinateFrame::new(1, 2).unwrap();
        let build: Arc<CustomBuild> = Arc::new(|_z: &[Jet], v: &[Jet]| {
            let mut g = v[0].mul(&v[0].conj()).add(&v[1].mul(&v[1].conj()));
            let cube = v[0].mul(&v[0].conj()).powf(1.5)?;
            g = g.add(&cube);
            Ok(g)
        });
        let model = MetricModel::custom(frame, "broken-homogeneity", build);
        let res = euler_residuals(&model, &[c(0.1, 0.0)], &[c(1.0, 0.0), c(0.5, 0.5)]).unwrap();
        assert!(res.max() > 0.05, "non-homogeneous term must be flagged: {res:?}");
    }

    #[test]
    fn gamma_homogeneity_and_contractions() {
        let model = perturbed(0.1);
        let z = [c(0.3, -0.2)];
        let v = [c(0.8, 0.3), c(-0.2, 0.9)];
        let bundle = evaluate(&model, &z, &v).unwrap();
        assert!(bundle.gamma_v_contraction_residual() / bundle.g < 1e-9);
        let lambda = c(0.7, -1.1);
        let scaled: Vec<C64> = v.iter().map(|x| x * lambda).collect();
        let bundle2 = evaluate(&model, &z, &scaled).unwrap();
        for (a, b) in bundle.gamma_h.iter().zip(&bundle2.gamma_h) {
            assert!(a.sub(b).max_abs() < 1e-9, "Gamma must be scale-invariant");
        }
    }

    #[test]
    fn decomposition_flat_and_hermitian() {
        assert!(
            decomposition_residual(&flat_r2(), &[c(0.5, 0.1)], &[c(1.0, 0.0), c(0.2, 0.4)])
                .unwrap()
                < 1e-12
        );
        assert!(
            decomposition_residual(&cp1_model(1, 2), &[c(0.4, -0.6)], &[c(0.9, 0.2), c(0.1, 0.5)])
                .unwrap()
                < 1e-9
        );
    }

    #[test]
    fn decomposition_perturbed() {
        let model = perturbed(0.1);
        let plan = SamplePlan::new(10, 7, 1.0);
        for (z, v) in plan.points(model.frame()) {
            assert!(decomposition_residual(&model, &z, &v).unwrap() < 1e-9);
        }
    }

    #[test]
    fn conjugate_symmetry_of_metric_derivatives() {
        let model = perturbed(0.1);
        let frame = model.frame().clone();
        let plan = SamplePlan::new(20, 3, 1.0);
        for (z, v) in plan.points(&frame) {
            let jet = model.metric_jet(&z, &v).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    let a = jet
                        .wirtinger(&WirtingerIndex::new(vec![frame.v_id(i)], vec![frame.v_id(j)]))
                        .unwrap();
                    let b = jet
                        .wirtinger(&WirtingerIndex::new(vec![frame.v_id(j)], vec![frame.v_id(i)]))
                        .unwrap();
                    assert!((a - b.conj()).norm() < 1e-12);
                    let p = jet
                        .wirtinger(&WirtingerIndex::new(
                            vec![frame.v_id(i), frame.z_id(0)],
                            vec![frame.v_id(j), frame.z_id(0)],
                        ))
                        .unwrap();
                    let q = jet
                        .wirtinger(&WirtingerIndex::new(
                            vec![frame.v_id(j), frame.z_id(0)],
                            vec![frame.v_id(i), frame.z_id(0)],
                        ))
                        .unwrap();
                    assert!((p - q.conj()).norm() < 1e-12 * p.norm().max(1.0));
                }
            }
        }
    }

    #[test]
    fn theta_pairing_reproduces_psi() {
        for model in [cp1_model(1, 2), perturbed(0.1)] {
            let plan = SamplePlan::new(5, 11, 0.9);
            for (z, v) in plan.points(model.frame()) {
                let bundle = evaluate(&model, &z, &v).unwrap();
                let pairing = bundle.theta_pairing().horizontal_part();
                assert!(
                    pairing.max_abs_diff(&bundle.psi) < 1e-9,
                    "model {:?}",
                    model.family()
                );
            }
        }
    }

    #[test]
    fn descent_of_psi_coefficients() {
        let model = perturbed(0.1);
        let z = [c(0.2, 0.5)];
        let v = [c(1.0, -0.3), c(0.4, 0.8)];
        let bundle = evaluate(&model, &z, &v).unwrap();
        for lambda in [c(1.7, 0.4), c(0.3, -0.9), c(-2.0, 1.0)] {
            let scaled: Vec<C64> = v.iter().map(|x| x * lambda).collect();
            let b2 = evaluate(&model, &z, &scaled).unwrap();
            assert!(bundle.psi.max_abs_diff(&b2.psi) < 1e-9);
        }
    }

    #[test]
    fn sign_scan_classifications() {
        let plan = SamplePlan::new(30, 9, 1.0);
        let pos = kobayashi_sign_scan(&cp1_model(1, 1), &plan).unwrap();
        assert_eq!(pos.classification, SignClass::Positive);
        // margin >= (1 + R^2)^{-2} for the degree-(1,1) model on a radius-R ball
        assert!(pos.margin >= (1.0 + 1.0f64).powi(-2) - 1e-9, "{}", pos.margin);
        let neg = kobayashi_sign_scan(&cp1_model(-1, -1), &plan).unwrap();
        assert_eq!(neg.classification, SignClass::Negative);
        let flat = kobayashi_sign_scan(
            &MetricModel::finsler_perturbed(1, vec![vec![0], vec![0]], 0.1).unwrap(),
            &plan,
        )
        .unwrap();
        assert_eq!(flat.classification, SignClass::Flat);
        let indef = kobayashi_sign_scan(&cp1_model(1, -1), &plan).unwrap();
        assert_eq!(indef.classification, SignClass::Indefinite);
    }

    #[test]
    fn einstein_trace_constant_for_balanced_degrees() {
        let model = cp1_model(1, 1);
        let plan = SamplePlan::new(20, 5, 1.2);
        for (z, v) in plan.points(model.frame()) {
            let g = CMat::from_fn(1, |_, _| c((1.0 + z[0].norm_sqr()).powi(-2), 0.0));
            let tr = einstein_trace(&model, &z, &v, &g).unwrap();
            assert!((tr - c(1.0, 0.0)).norm() < 1e-9, "{tr}");
        }
    }

    #[test]
    fn einstein_trace_flat_is_zero() {
        let model = flat_r2();
        let g = CMat::identity(1);
        let tr = einstein_trace(&model, &[c(0.3, 0.3)], &[c(1.0, 0.0), c(0.0, 1.0)], &g).unwrap();
        assert!(tr.norm() < 1e-12);
    }

    #[test]
    fn einstein_trace_unbalanced_is_not_constant() {
        let model = cp1_model(1, 2);
        let g0 = CMat::from_fn(1, |_, _| c(1.0, 0.0));
        let t0 = einstein_trace(&model, &[c(0.0, 0.0)], &[c(1.0, 0.0), c(1.0, 0.0)], &g0).unwrap();
        let z1 = [c(1.0, 0.0)];
        let g1 = CMat::from_fn(1, |_, _| c((1.0 + 1.0f64).powi(-2), 0.0));
        let t1 = einstein_trace(&model, &z1, &[c(1.0, 0.0), c(1.0, 0.0)], &g1).unwrap();
        assert!((t0 - t1).norm() > 1e-3, "{t0} vs {t1}");
    }

    #[test]
    fn hermitian_einstein_residuals() {
        let fs = |z: &[C64]| CMat::from_fn(1, |_, _| c((1.0 + z[0].norm_sqr()).powi(-2), 0.0));
        let plan = SamplePlan::new(15, 21, 1.0);
        let ok = hermitian_einstein_check(&cp1_model(1, 1), &fs, &plan).unwrap();
        assert!(ok.residual < 1e-9, "{ok:?}");
        assert!((ok.lambda - 1.0).abs() < 1e-9);
        let bad = hermitian_einstein_check(&cp1_model(1, 2), &fs, &plan).unwrap();
        assert!(bad.residual > 0.1, "{bad:?}");
        let trivial = hermitian_einstein_check(&cp1_model(0, 0), &fs, &plan).unwrap();
        assert!(trivial.residual < 1e-12 && trivial.lambda.abs() < 1e-12);
        assert!(matches!(
            hermitian_einstein_check(&perturbed(0.1), &fs, &plan),
            Err(Error::NotHermitianInduced)
        ));
    }

    #[test]
    fn validation_gates_degenerate_metrics() {
        let plan = SamplePlan::new(40, 13, 1.0);
        assert!(validate_model(&perturbed(0.1), &plan).is_ok());
        // A large negative perturbation destroys pseudo-convexity.
        let bad = MetricModel::finsler_perturbed(1, vec![vec![1], vec![1]], -0.9).unwrap();
        assert!(matches!(
            validate_model(&bad, &plan),
            Err(Error::NotPseudoConvex { .. })
        ));
    }

    #[test]
    fn restricted_model_reads_the_sub_metric() {
        let model = perturbed(0.1).restricted(vec![0]).unwrap();
        let z = [c(0.2, 0.1)];
        let v = [c(0.8, -0.5)];
        let got = model.metric_value(&z, &v).unwrap();
        let full = perturbed(0.1);
        let want = full
            .metric_value(&z, &[v[0], c(0.0, 0.0)])
            .unwrap();
        assert_abs_diff_eq!(got, want, epsilon = 1e-14);
    }

    #[test]
    fn tensor_by_line_scales_the_metric() {
        let model = cp1_model(1, 1).tensor_by_line(vec![2]).unwrap();
        let z = [c(0.5, -0.5)];
        let v = [c(1.0, 0.0), c(0.0, 1.0)];
        let got = model.metric_value(&z, &v).unwrap();
        let base = cp1_model(1, 1).metric_value(&z, &v).unwrap();
        let h_l = (1.0 + z[0].norm_sqr()).powi(-2);
        assert_abs_diff_eq!(got, base * h_l, epsilon = 1e-12);
    }

    #[test]
    fn scalar_value_matches_jet_value() {
        let models = [
            perturbed(0.1),
            cp1_model(1, 2).tensor_by_line(vec![1]).unwrap(),
            perturbed(0.07).restricted(vec![1]).unwrap(),
        ];
        for model in models {
            let plan = SamplePlan::new(10, 77, 1.1);
            for (z, v) in plan.points(model.frame()) {
                let scalar = model.metric_value(&z, &v).unwrap();
                let jet = model.metric_jet(&z, &v).unwrap().value().re;
                assert!((scalar - jet).abs() < 1e-12 * jet.abs().max(1.0));
            }
        }
    }

    #[test]
    fn zero_fiber_vector_rejected() {
        let model = flat_r2();
        assert!(matches!(
            evaluate(&model, &[c(0.0, 0.0)], &[c(0.0, 0.0), c(0.0, 0.0)]),
            Err(Error::ZeroFiberVector)
        ));
    }
}
