//! Pointwise complex exterior algebra over the chart one-form generators
//! `dz^alpha, dz-bar^alpha, dv^i, dv-bar^i`.
//!
//! Forms here are pointwise objects: their coefficients are numbers at one
//! `(z, v)`, not fields. Derivatives are always taken through jets before a
//! form is assembled, so no exterior differentiation lives here.
//!
//! Terms are keyed by a generator bitmask; the fixed generator enumeration is
//! `dz^1 .. dz^n, dz-bar^1 .. dz-bar^n, dv^1 .. dv^r, dv-bar^1 .. dv-bar^r`,
//! so the horizontal block sits below the vertical one and a sorted monomial
//! factors as (horizontal part) wedge (vertical part) with no extra sign.
//!
//! The global orientation convention, validated end-to-end by the fibre
//! normalization test: for each complex coordinate `w`,
//! `sqrt(-1) dw wedge dw-bar` integrates as `2 dx dy`.

use crate::jets::CoordinateFrame;
use crate::linalg::CMat;
use crate::{Error, Result};
use num_complex::Complex64;
use std::collections::BTreeMap;

type C64 = Complex64;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// One chart generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gen {
    Dz(usize),
    Dzbar(usize),
    Dv(usize),
    Dvbar(usize),
}

impl Gen {
    pub fn bit(self, frame: &CoordinateFrame) -> u32 {
        let (n, r) = (frame.n(), frame.r());
        let pos = match self {
            Gen::Dz(a) => {
                debug_assert!(a < n);
                a
            }
            Gen::Dzbar(a) => {
                debug_assert!(a < n);
                n + a
            }
            Gen::Dv(i) => {
                debug_assert!(i < r);
                2 * n + i
            }
            Gen::Dvbar(i) => {
                debug_assert!(i < r);
                2 * n + r + i
            }
        };
        1u32 << pos
    }
}

pub(crate) fn horizontal_mask(frame: &CoordinateFrame) -> u32 {
    (1u32 << (2 * frame.n())) - 1
}

pub(crate) fn vertical_mask(frame: &CoordinateFrame) -> u32 {
    let all = (1u32 << (2 * frame.coords())) - 1;
    all & !horizontal_mask(frame)
}

pub(crate) fn unbarred_mask(frame: &CoordinateFrame) -> u32 {
    let n = frame.n();
    let r = frame.r();
    let dz = (1u32 << n) - 1;
    let dv = ((1u32 << r) - 1) << (2 * n);
    dz | dv
}

/// Sign of merging two disjoint ascending monomials: (-1)^(inversions).
pub(crate) fn merge_sign(a: u32, b: u32) -> f64 {
    let mut inversions = 0u32;
    let mut rest = b;
    while rest != 0 {
        let y = rest.trailing_zeros();
        inversions += (a >> (y + 1)).count_ones();
        rest &= rest - 1;
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Which generators a bidegree extraction counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Total,
    Horizontal,
    Vertical,
}

/// An element of the exterior algebra at one point: a map from strictly
/// ordered generator subsets (bitmasks) to complex coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Form {
    frame: CoordinateFrame,
    terms: BTreeMap<u32, C64>,
}

impl Form {
    pub fn zero(frame: &CoordinateFrame) -> Form {
        Form {
            frame: frame.clone(),
            terms: BTreeMap::new(),
        }
    }

    pub fn scalar(frame: &CoordinateFrame, value: C64) -> Form {
        let mut f = Form::zero(frame);
        f.insert(0, value);
        f
    }

    pub fn generator(frame: &CoordinateFrame, g: Gen) -> Form {
        let mut f = Form::zero(frame);
        f.insert(g.bit(frame), c(1.0, 0.0));
        f
    }

    pub fn frame(&self) -> &CoordinateFrame {
        &self.frame
    }

    pub(crate) fn insert(&mut self, mask: u32, value: C64) {
        if value == c(0.0, 0.0) {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(mask) {
            Entry::Vacant(e) => {
                e.insert(value);
            }
            Entry::Occupied(mut e) => {
                let v = *e.get() + value;
                if v == c(0.0, 0.0) {
                    e.remove();
                } else {
                    *e.get_mut() = v;
                }
            }
        }
    }

    pub fn coeff(&self, mask: u32) -> C64 {
        self.terms.get(&mask).copied().unwrap_or(c(0.0, 0.0))
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, C64)> + '_ {
        self.terms.iter().map(|(&m, &v)| (m, v))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Form) -> f64 {
        assert!(self.frame == other.frame, "form frame mismatch");
        let mut worst = 0.0f64;
        for (&m, &v) in &self.terms {
            worst = worst.max((v - other.coeff(m)).norm());
        }
        for (&m, &v) in &other.terms {
            worst = worst.max((v - self.coeff(m)).norm());
        }
        worst
    }

    pub fn add(&self, other: &Form) -> Form {
        assert!(self.frame == other.frame, "form frame mismatch");
        let mut out = self.clone();
        for (&m, &v) in &other.terms {
            out.insert(m, v);
        }
        out
    }

    pub fn sub(&self, other: &Form) -> Form {
        self.add(&other.scale(c(-1.0, 0.0)))
    }

    pub fn scale(&self, s: C64) -> Form {
        let mut out = Form::zero(&self.frame);
        if s == c(0.0, 0.0) {
            return out;
        }
        for (&m, &v) in &self.terms {
            out.terms.insert(m, v * s);
        }
        out
    }

    /// Graded product with exact sign bookkeeping; terms with repeated
    /// generators vanish.
    pub fn wedge(&self, other: &Form) -> Form {
        assert!(self.frame == other.frame, "form frame mismatch");
        let mut out = Form::zero(&self.frame);
        for (&ma, &va) in &self.terms {
            for (&mb, &vb) in &other.terms {
                if ma & mb != 0 {
                    continue;
                }
                let sign = merge_sign(ma, mb);
                out.insert(ma | mb, va * vb * sign);
            }
        }
        out
    }

    pub fn wedge_pow(&self, k: usize) -> Form {
        if k == 0 {
            return Form::scalar(&self.frame, c(1.0, 0.0));
        }
        let mut out = self.clone();
        for _ in 1..k {
            out = out.wedge(self);
        }
        out
    }

    /// The component whose terms have exactly `p` unbarred and `q` barred
    /// generators, counted over the generators selected by `split`
    /// (horizontal and vertical splits additionally require the term to be
    /// purely of that kind).
    pub fn bidegree_extract(&self, p: usize, q: usize, split: Split) -> Form {
        let unbarred = unbarred_mask(&self.frame);
        let horizontal = horizontal_mask(&self.frame);
        let vertical = vertical_mask(&self.frame);
        let mut out = Form::zero(&self.frame);
        for (&m, &v) in &self.terms {
            let keep = match split {
                Split::Total => {
                    (m & unbarred).count_ones() as usize == p
                        && (m & !unbarred).count_ones() as usize == q
                }
                Split::Horizontal => {
                    m & vertical == 0
                        && (m & unbarred).count_ones() as usize == p
                        && (m & !unbarred).count_ones() as usize == q
                }
                Split::Vertical => {
                    m & horizontal == 0
                        && (m & unbarred).count_ones() as usize == p
                        && (m & !unbarred).count_ones() as usize == q
                }
            };
            if keep {
                out.terms.insert(m, v);
            }
        }
        out
    }

    /// All terms of the given total degree.
    pub fn degree_component(&self, degree: usize) -> Form {
        let mut out = Form::zero(&self.frame);
        for (&m, &v) in &self.terms {
            if m.count_ones() as usize == degree {
                out.terms.insert(m, v);
            }
        }
        out
    }

    /// Purely horizontal part (no vertical generators).
    pub fn horizontal_part(&self) -> Form {
        let vertical = vertical_mask(&self.frame);
        let mut out = Form::zero(&self.frame);
        for (&m, &v) in &self.terms {
            if m & vertical == 0 {
                out.terms.insert(m, v);
            }
        }
        out
    }

    /// Rewrites the form between the coordinate basis `{dz, dv}` and the
    /// horizontal-vertical basis `{dz, delta-v}` determined by the
    /// connection, where `delta-v^k = dv^k + Gamma^k_{j alpha} v^j dz^alpha`.
    ///
    /// `gamma_h[alpha][(i, k)] = Gamma^k_{i alpha}`. With
    /// [`DeltaDirection::FromDelta`] the stored `dv` slots are read as
    /// `delta-v` and expanded into coordinates; [`DeltaDirection::ToDelta`]
    /// inverts that, and the round trip is the identity.
    pub fn delta_basis(&self, gamma_h: &[CMat], v: &[C64], direction: DeltaDirection) -> Form {
        let frame = &self.frame;
        let n = frame.n();
        let r = frame.r();
        debug_assert_eq!(gamma_h.len(), n);
        debug_assert_eq!(v.len(), r);
        // b[k][alpha] = Gamma^k_{j alpha} v^j, signed by direction
        let sign = match direction {
            DeltaDirection::FromDelta => 1.0,
            DeltaDirection::ToDelta => -1.0,
        };
        let mut b = vec![vec![c(0.0, 0.0); n]; r];
        for alpha in 0..n {
            for k in 0..r {
                let mut s = c(0.0, 0.0);
                for j in 0..r {
                    s += gamma_h[alpha][(j, k)] * v[j];
                }
                b[k][alpha] = s * sign;
            }
        }
        let substitute = |bit_pos: usize| -> Form {
            let mut f = Form::zero(frame);
            f.insert(1u32 << bit_pos, c(1.0, 0.0));
            if bit_pos >= 2 * n {
                let fib = bit_pos - 2 * n;
                if fib < r {
                    for alpha in 0..n {
                        f.insert(Gen::Dz(alpha).bit(frame), b[fib][alpha]);
                    }
                } else {
                    let k = fib - r;
                    for alpha in 0..n {
                        f.insert(Gen::Dzbar(alpha).bit(frame), b[k][alpha].conj());
                    }
                }
            }
            f
        };
        let mut out = Form::zero(frame);
        for (&m, &coeff) in &self.terms {
            let mut acc = Form::scalar(frame, coeff);
            let mut rest = m;
            while rest != 0 {
                let bit_pos = rest.trailing_zeros() as usize;
                acc = acc.wedge(&substitute(bit_pos));
                rest &= rest - 1;
            }
            out = out.add(&acc);
        }
        out
    }

    /// Evaluates a purely horizontal form of degree `2p` on the arguments
    /// `(Y_1, ..., Y_p, conj(Y_1), ..., conj(Y_p))`, each `Y_s` a (1,0)-type
    /// base tangent vector given by its components.
    pub fn eval_on_vectors(&self, vectors: &[Vec<C64>]) -> C64 {
        let n = self.frame.n();
        let p = vectors.len();
        let mut total = c(0.0, 0.0);
        for (&m, &v) in &self.terms {
            if m.count_ones() as usize != 2 * p {
                continue;
            }
            debug_assert_eq!(m & vertical_mask(&self.frame), 0);
            // rows: generators ascending; cols: Y_1..Y_p, conj(Y_1)..conj(Y_p)
            let mut mat = CMat::zeros(2 * p);
            let mut row = 0;
            let mut rest = m;
            while rest != 0 {
                let pos = rest.trailing_zeros() as usize;
                for s in 0..p {
                    if pos < n {
                        mat[(row, s)] = vectors[s][pos];
                    } else {
                        mat[(row, p + s)] = vectors[s][pos - n].conj();
                    }
                }
                rest &= rest - 1;
                row += 1;
            }
            total += v * mat.det();
        }
        total
    }
}

/// Direction of the basis change in [`Form::delta_basis`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeltaDirection {
    ToDelta,
    FromDelta,
}

/// A square array of even-degree forms sharing one frame, as produced by the
/// curvature of the pulled-back bundle.
#[derive(Clone, Debug)]
pub struct FormMatrix {
    frame: CoordinateFrame,
    r: usize,
    entries: Vec<Form>,
}

impl FormMatrix {
    pub fn zeros(frame: &CoordinateFrame, r: usize) -> FormMatrix {
        FormMatrix {
            frame: frame.clone(),
            r,
            entries: vec![Form::zero(frame); r * r],
        }
    }

    pub fn rank(&self) -> usize {
        self.r
    }

    pub fn frame(&self) -> &CoordinateFrame {
        &self.frame
    }

    pub fn get(&self, i: usize, k: usize) -> &Form {
        &self.entries[i * self.r + k]
    }

    pub fn set(&mut self, i: usize, k: usize, f: Form) {
        assert!(f.frame == self.frame, "form frame mismatch");
        self.entries[i * self.r + k] = f;
    }
}

fn permutations(items: &[usize]) -> Vec<(Vec<usize>, f64)> {
    if items.len() <= 1 {
        return vec![(items.to_vec(), 1.0)];
    }
    let mut out = Vec::new();
    for (pos, &first) in items.iter().enumerate() {
        let mut rest: Vec<usize> = items.to_vec();
        rest.remove(pos);
        let swap_sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
        for (tail, sign) in permutations(&rest) {
            let mut perm = vec![first];
            perm.extend(tail);
            out.push((perm, sign * swap_sign));
        }
    }
    out
}

fn subsets_of_size(items: &[usize], size: usize) -> Vec<Vec<usize>> {
    if size == 0 {
        return vec![vec![]];
    }
    if items.len() < size {
        return vec![];
    }
    let mut out = Vec::new();
    for (pos, &first) in items.iter().enumerate() {
        for mut tail in subsets_of_size(&items[pos + 1..], size - 1) {
            tail.insert(0, first);
            out.push(tail);
        }
    }
    out
}

/// Leibniz expansion of `det(I + scale * Theta)` for a matrix of even forms,
/// via principal minors. The component built from k matrix factors is the
/// k-th Chern piece when `Theta` is a curvature matrix and
/// `scale = sqrt(-1)/2pi`.
pub fn det_plus_identity(theta: &FormMatrix, scale: C64) -> Result<Form> {
    let r = theta.rank();
    if r > 4 {
        return Err(Error::InvalidConfig(format!(
            "det_plus_identity supports rank <= 4, got {r}"
        )));
    }
    for i in 0..r {
        for k in 0..r {
            for (m, _) in theta.get(i, k).terms() {
                if m.count_ones() % 2 != 0 {
                    return Err(Error::OddDegreeEntry);
                }
            }
        }
    }
    let frame = theta.frame();
    let mut out = Form::scalar(frame, c(1.0, 0.0));
    let indices: Vec<usize> = (0..r).collect();
    for size in 1..=r {
        for subset in subsets_of_size(&indices, size) {
            for (perm, sign) in permutations(&subset) {
                let mut prod = Form::scalar(frame, c(sign, 0.0) * scale.powu(size as u32));
                for (row, col) in subset.iter().zip(&perm) {
                    prod = prod.wedge(theta.get(*row, *col));
                    if prod.is_zero() {
                        break;
                    }
                }
                out = out.add(&prod);
            }
        }
    }
    Ok(out)
}

/// A purely horizontal form at one base point, as produced by pushing a form
/// down the fibre.
#[derive(Clone, Debug, PartialEq)]
pub struct HorizontalForm {
    form: Form,
}

impl HorizontalForm {
    pub fn new(form: Form) -> Result<HorizontalForm> {
        let vertical = vertical_mask(form.frame());
        for (m, _) in form.terms() {
            if m & vertical != 0 {
                return Err(Error::InvalidConfig(
                    "horizontal form carries vertical generators".into(),
                ));
            }
        }
        Ok(HorizontalForm { form })
    }

    pub fn zero(frame: &CoordinateFrame) -> HorizontalForm {
        HorizontalForm {
            form: Form::zero(frame),
        }
    }

    pub fn scalar(frame: &CoordinateFrame, value: C64) -> HorizontalForm {
        HorizontalForm {
            form: Form::scalar(frame, value),
        }
    }

    pub fn form(&self) -> &Form {
        &self.form
    }

    pub fn frame(&self) -> &CoordinateFrame {
        self.form.frame()
    }

    pub fn add(&self, other: &HorizontalForm) -> HorizontalForm {
        HorizontalForm {
            form: self.form.add(&other.form),
        }
    }

    pub fn sub(&self, other: &HorizontalForm) -> HorizontalForm {
        HorizontalForm {
            form: self.form.sub(&other.form),
        }
    }

    pub fn scale(&self, s: C64) -> HorizontalForm {
        HorizontalForm {
            form: self.form.scale(s),
        }
    }

    pub fn wedge(&self, other: &HorizontalForm) -> HorizontalForm {
        HorizontalForm {
            form: self.form.wedge(&other.form),
        }
    }

    pub fn wedge_pow(&self, k: usize) -> HorizontalForm {
        HorizontalForm {
            form: self.form.wedge_pow(k),
        }
    }

    pub fn max_abs_diff(&self, other: &HorizontalForm) -> f64 {
        self.form.max_abs_diff(&other.form)
    }

    pub fn max_abs(&self) -> f64 {
        self.form.max_abs()
    }

    /// Scalar (degree-0) part.
    pub fn scalar_part(&self) -> C64 {
        self.form.coeff(0)
    }

    /// Coefficient matrix `M[alpha][beta]` of the (1,1) component over
    /// `dz^alpha wedge dz-bar^beta`.
    pub fn coeff_matrix_11(&self) -> CMat {
        let frame = self.form.frame();
        let n = frame.n();
        CMat::from_fn(n, |a, b| {
            self.form
                .coeff(Gen::Dz(a).bit(frame) | Gen::Dzbar(b).bit(frame))
        })
    }

    /// The matrix `M/sqrt(-1)` of a (1,1) form written
    /// `sqrt(-1) m_{alpha beta-bar} dz wedge dz-bar`; Hermitian and
    /// positive-definite exactly when the form is positive.
    pub fn hermitian_matrix_11(&self) -> CMat {
        self.coeff_matrix_11().scale(c(0.0, -1.0))
    }

    /// Coefficient of the full top monomial `dz^1..dz^n dz-bar^1..dz-bar^n`.
    pub fn top_coeff(&self) -> C64 {
        self.form.coeff(horizontal_mask(self.form.frame()))
    }

    /// Largest Hermitian defect of the (1,1) coefficient matrix; small for
    /// forms that are real as (1,1)-forms (Segre and Chern densities).
    pub fn reality_defect_11(&self) -> f64 {
        self.hermitian_matrix_11().hermitian_defect()
    }
}
