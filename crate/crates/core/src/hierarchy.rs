//! Multi-time Hamiltonian hierarchies and their zero-curvature residual.
//!
//! A hierarchy is a family `H_1(t), …, H_N(t)` of Hermitian generators on a
//! common truncated space, one per time direction. It is *flat* when
//!
//! ```text
//! Z_lk = ∂H_k/∂t_l − ∂H_l/∂t_k − (i/ħ)[H_k, H_l] = 0
//! ```
//!
//! for every pair, which is the compatibility condition for the
//! simultaneous Schrödinger equations `iħ ∂_k Ψ = H_k Ψ`. Flatness is only a
//! necessary condition for commuting multi-time unitaries; nothing here tries
//! to certify the converse.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    build_grid_operators, build_oscillator_operators, commutator, OperatorMatrix, C64,
};

/// Minimum finite-difference step accepted before cancellation dominates.
pub const MIN_FD_STEP: f64 = 1e-10;
/// Default time step for 4th-order central differences.
pub const DEFAULT_FD_STEP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimePoint(Vec<f64>);

impl TimePoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("time point"));
        }
        Ok(Self(coords))
    }

    pub fn origin(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn n_times(&self) -> usize {
        self.0.len()
    }

    /// Copy shifted by `delta` along `axis`.
    pub fn shifted(&self, axis: usize, delta: f64) -> Self {
        let mut c = self.0.clone();
        c[axis] += delta;
        Self(c)
    }
}

impl From<&[f64]> for TimePoint {
    fn from(c: &[f64]) -> Self {
        Self(c.to_vec())
    }
}

pub type GeneratorFn = Arc<dyn Fn(&TimePoint) -> OperatorMatrix + Send + Sync>;
/// `(k, l, t) ↦ ∂H_k/∂t_l`.
pub type PartialFn = Arc<dyn Fn(usize, usize, &TimePoint) -> OperatorMatrix + Send + Sync>;

#[derive(Clone)]
pub struct HamiltonianHierarchy {
    dim: usize,
    hbar: f64,
    label: String,
    generators: Vec<GeneratorFn>,
    partials: Option<PartialFn>,
    autonomous: bool,
    truncation_affected: bool,
}

impl fmt::Debug for HamiltonianHierarchy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianHierarchy")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("n_times", &self.generators.len())
            .field("hbar", &self.hbar)
            .field("analytic_partials", &self.partials.is_some())
            .field("autonomous", &self.autonomous)
            .finish()
    }
}

impl HamiltonianHierarchy {
    /// A hierarchy of general time-dependent generators.
    pub fn new(
        label: impl Into<String>,
        dim: usize,
        generators: Vec<GeneratorFn>,
        partials: Option<PartialFn>,
    ) -> Result<Self> {
        if generators.len() < 2 {
            return Err(Error::InvalidArgument(
                "a hierarchy needs at least two generators".into(),
            ));
        }
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        Ok(Self {
            dim,
            hbar: 1.0,
            label: label.into(),
            generators,
            partials,
            autonomous: false,
            truncation_affected: false,
        })
    }

    /// Time-independent generators; analytic partials are identically zero.
    pub fn autonomous(label: impl Into<String>, ops: Vec<OperatorMatrix>) -> Result<Self> {
        let dim = ops.first().map(|o| o.dim()).unwrap_or(0);
        for op in &ops {
            if op.dim() != dim {
                return Err(Error::DimMismatch {
                    left: dim,
                    right: op.dim(),
                });
            }
            if !op.is_hermitian() {
                return Err(Error::InvalidArgument("generator is not Hermitian".into()));
            }
        }
        let generators: Vec<GeneratorFn> = ops
            .into_iter()
            .map(|op| {
                let op = op.hermitian_part();
                Arc::new(move |_: &TimePoint| op.clone()) as GeneratorFn
            })
            .collect();
        let zero: PartialFn = Arc::new(move |_, _, _| OperatorMatrix::zeros(dim));
        let mut h = Self::new(label, dim, generators, Some(zero))?;
        h.autonomous = true;
        Ok(h)
    }

    pub fn with_hbar(mut self, hbar: f64) -> Self {
        assert!(hbar > 0.0 && hbar.is_finite(), "ħ must be positive");
        self.hbar = hbar;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub(crate) fn flag_truncation(mut self) -> Self {
        self.truncation_affected = true;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_times(&self) -> usize {
        self.generators.len()
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_autonomous(&self) -> bool {
        self.autonomous
    }

    pub fn has_analytic_partials(&self) -> bool {
        self.partials.is_some()
    }

    /// True when the operator truncation is known to spoil exact identities
    /// (e.g. powers of momentum on a truncated oscillator basis).
    pub fn truncation_affected(&self) -> bool {
        self.truncation_affected
    }

    pub fn check_index(&self, k: usize) -> Result<()> {
        if k >= self.n_times() {
            Err(Error::IndexOutOfRange {
                index: k,
                len: self.n_times(),
            })
        } else {
            Ok(())
        }
    }

    fn check_point(&self, t: &TimePoint) -> Result<()> {
        if t.n_times() != self.n_times() {
            return Err(Error::InvalidArgument(format!(
                "time point has {} coordinates, hierarchy has {} times",
                t.n_times(),
                self.n_times()
            )));
        }
        Ok(())
    }

    /// `H_k(t)`.
    pub fn generator(&self, k: usize, t: &TimePoint) -> OperatorMatrix {
        (self.generators[k])(t)
    }

    /// Analytic `∂H_k/∂t_l`, if provided.
    pub fn analytic_partial(&self, k: usize, l: usize, t: &TimePoint) -> Option<OperatorMatrix> {
        self.partials.as_ref().map(|p| p(k, l, t))
    }

    /// 4th-order central difference of `H_k` along `t_l`.
    pub fn fd_partial(&self, k: usize, l: usize, t: &TimePoint, step: f64) -> OperatorMatrix {
        central_difference4(|s| self.generator(k, &t.shifted(l, s)), step)
    }
}

/// `[−f(2h) + 8f(h) − 8f(−h) + f(−2h)] / 12h`
pub(crate) fn central_difference4(f: impl Fn(f64) -> OperatorMatrix, h: f64) -> OperatorMatrix {
    let fp2 = f(2.0 * h);
    let fp1 = f(h);
    let fm1 = f(-h);
    let fm2 = f(-2.0 * h);
    let num = &(&fp1 - &fm1).scale_real(8.0) - &(&fp2 - &fm2);
    num.scale_real(1.0 / (12.0 * h))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeMode {
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone)]
pub struct CurvatureResidual {
    pub pair: (usize, usize),
    pub at: TimePoint,
    pub residual: OperatorMatrix,
    pub norm: f64,
    pub derivative_mode: DerivativeMode,
    pub fd_step: f64,
}

/// `Z_lk(t) = ∂H_k/∂t_l − ∂H_l/∂t_k − (i/ħ)[H_k, H_l]`.
///
/// Analytic partials are used when the hierarchy carries them; otherwise
/// 4th-order central differences with `fd_step`.
pub fn zero_curvature_residual(
    h: &HamiltonianHierarchy,
    l: usize,
    k: usize,
    t: &TimePoint,
    fd_step: f64,
) -> Result<CurvatureResidual> {
    h.check_index(l)?;
    h.check_index(k)?;
    h.check_point(t)?;
    if l == k {
        return Err(Error::InvalidArgument(
            "curvature needs two distinct directions".into(),
        ));
    }
    let (dk_l, dl_k, mode) = match (h.analytic_partial(k, l, t), h.analytic_partial(l, k, t)) {
        (Some(a), Some(b)) => (a, b, DerivativeMode::Analytic),
        _ => {
            if !(fd_step >= MIN_FD_STEP) {
                return Err(Error::StepTooSmall(fd_step));
            }
            (
                h.fd_partial(k, l, t, fd_step),
                h.fd_partial(l, k, t, fd_step),
                DerivativeMode::FiniteDifference,
            )
        }
    };
    let hk = h.generator(k, t);
    let hl = h.generator(l, t);
    let comm = commutator(&hk, &hl)?.scale(C64::new(0.0, -1.0 / h.hbar()));
    let residual = &(&dk_l - &dl_k) + &comm;
    let norm = residual.frobenius_norm();
    Ok(CurvatureResidual {
        pair: (l, k),
        at: t.clone(),
        residual,
        norm,
        derivative_mode: mode,
        fd_step,
    })
}

/// Largest residual norm over every pair `l < k` and every sample point.
pub fn max_residual_over(
    h: &HamiltonianHierarchy,
    points: &[TimePoint],
    fd_step: f64,
) -> Result<f64> {
    let mut worst = 0.0_f64;
    for t in points {
        for l in 0..h.n_times() {
            for k in (l + 1)..h.n_times() {
                worst = worst.max(zero_curvature_residual(h, l, k, t, fd_step)?.norm);
            }
        }
    }
    Ok(worst)
}

/// Uniform `n × n` grid of 2-time sample points over `[lo, hi]²`, remaining
/// coordinates (if any) fixed at `lo`.
pub fn sample_grid(n_times: usize, n: usize, lo: f64, hi: f64) -> Vec<TimePoint> {
    let step = if n > 1 {
        (hi - lo) / (n - 1) as f64
    } else {
        0.0
    };
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut c = vec![lo; n_times];
            c[0] = lo + i as f64 * step;
            c[1] = lo + j as f64 * step;
            out.push(TimePoint(c));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Gauge transformations
// ---------------------------------------------------------------------------

/// Polynomial phase `θ(t) = Σ c · Π t_j^{e_j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePolynomial {
    pub terms: Vec<(f64, Vec<u32>)>,
}

impl PhasePolynomial {
    pub fn new(terms: Vec<(f64, Vec<u32>)>) -> Self {
        Self { terms }
    }

    fn monomial(t: &[f64], exps: &[u32], skip: &[usize]) -> f64 {
        // Evaluates the monomial after differentiating once per entry of `skip`.
        let mut e: Vec<i64> = (0..t.len())
            .map(|j| *exps.get(j).unwrap_or(&0) as i64)
            .collect();
        let mut coeff = 1.0;
        for &s in skip {
            if e[s] <= 0 {
                return 0.0;
            }
            coeff *= e[s] as f64;
            e[s] -= 1;
        }
        coeff
            * t.iter()
                .zip(&e)
                .map(|(&x, &p)| x.powi(p as i32))
                .product::<f64>()
    }

    pub fn value(&self, t: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| c * Self::monomial(t, e, &[]))
            .sum()
    }

    pub fn gradient(&self, t: &[f64], k: usize) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| c * Self::monomial(t, e, &[k]))
            .sum()
    }

    pub fn hessian(&self, t: &[f64], k: usize, l: usize) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| c * Self::monomial(t, e, &[k, l]))
            .sum()
    }
}

/// One factor `exp(−i θ(t) G)` of a gauge with Hermitian `G`.
#[derive(Debug, Clone)]
pub struct GaugeFactor {
    pub generator: OperatorMatrix,
    pub phase: PhasePolynomial,
}

type GaugeValueFn = Arc<dyn Fn(&TimePoint) -> OperatorMatrix + Send + Sync>;
type GaugeD1Fn = Arc<dyn Fn(usize, &TimePoint) -> OperatorMatrix + Send + Sync>;
type GaugeD2Fn = Arc<dyn Fn(usize, usize, &TimePoint) -> OperatorMatrix + Send + Sync>;

/// A time-dependent unitary `V(t)` with its first (and optionally second)
/// analytic partials.
#[derive(Clone)]
pub struct Gauge {
    n_times: usize,
    value: GaugeValueFn,
    d1: GaugeD1Fn,
    d2: Option<GaugeD2Fn>,
}

impl fmt::Debug for Gauge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gauge")
            .field("n_times", &self.n_times)
            .field("second_partials", &self.d2.is_some())
            .finish()
    }
}

impl Gauge {
    pub fn from_fns(
        n_times: usize,
        value: GaugeValueFn,
        d1: GaugeD1Fn,
        d2: Option<GaugeD2Fn>,
    ) -> Self {
        Self {
            n_times,
            value,
            d1,
            d2,
        }
    }

    pub fn identity(n_times: usize, dim: usize) -> Self {
        Self {
            n_times,
            value: Arc::new(move |_| OperatorMatrix::identity(dim)),
            d1: Arc::new(move |_, _| OperatorMatrix::zeros(dim)),
            d2: Some(Arc::new(move |_, _, _| OperatorMatrix::zeros(dim))),
        }
    }

    /// `V(t) = Π_f exp(−i θ_f(t) G_f)`, factors applied left to right.
    pub fn exponential_product(n_times: usize, factors: Vec<GaugeFactor>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidArgument(
                "gauge needs at least one factor".into(),
            ));
        }
        let dim = factors[0].generator.dim();
        for f in &factors {
            if f.generator.dim() != dim {
                return Err(Error::DimMismatch {
                    left: dim,
                    right: f.generator.dim(),
                });
            }
            if !f.generator.is_hermitian() {
                return Err(Error::InvalidArgument(
                    "gauge generator must be Hermitian".into(),
                ));
            }
        }
        let factors: Arc<Vec<SpectralFactor>> =
            Arc::new(factors.iter().map(SpectralFactor::new).collect());
        let fv = factors.clone();
        let f1 = factors.clone();
        let f2 = factors;
        Ok(Self {
            n_times,
            value: Arc::new(move |t| product_derivative(&fv, t, &[])),
            d1: Arc::new(move |k, t| product_derivative(&f1, t, &[k])),
            d2: Some(Arc::new(move |k, l, t| product_derivative(&f2, t, &[k, l]))),
        })
    }

    /// `V(t)†` with conjugated partials.
    pub fn inverse(&self) -> Self {
        let v = self.value.clone();
        let d1 = self.d1.clone();
        let d2 = self.d2.clone();
        Self {
            n_times: self.n_times,
            value: Arc::new(move |t| v(t).adjoint()),
            d1: Arc::new(move |k, t| d1(k, t).adjoint()),
            d2: d2
                .map(|d2| Arc::new(move |k, l, t: &TimePoint| d2(k, l, t).adjoint()) as GaugeD2Fn),
        }
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn value(&self, t: &TimePoint) -> OperatorMatrix {
        (self.value)(t)
    }

    pub fn partial(&self, k: usize, t: &TimePoint) -> OperatorMatrix {
        (self.d1)(k, t)
    }

    pub fn second_partial(&self, k: usize, l: usize, t: &TimePoint) -> Option<OperatorMatrix> {
        self.d2.as_ref().map(|d| d(k, l, t))
    }
}

/// `G = U diag(λ) U†` of a gauge generator, so that every `G^m exp(−iθG)`
/// costs a single product.
struct SpectralFactor {
    vecs: DMatrix<C64>,
    vecs_adj: DMatrix<C64>,
    vals: Vec<f64>,
    phase: PhasePolynomial,
}

impl SpectralFactor {
    fn new(f: &GaugeFactor) -> Self {
        let eig = SymmetricEigen::new(f.generator.as_matrix().clone());
        Self {
            vecs_adj: eig.eigenvectors.adjoint(),
            vecs: eig.eigenvectors,
            vals: eig.eigenvalues.iter().copied().collect(),
            phase: f.phase.clone(),
        }
    }

    /// `U diag(w(λ) e^{−iθλ}) U†`.
    fn spectral(&self, theta: f64, weight: impl Fn(f64) -> C64) -> OperatorMatrix {
        let mut scaled = self.vecs.clone();
        for (j, &l) in self.vals.iter().enumerate() {
            let s = weight(l) * C64::from_polar(1.0, -theta * l);
            scaled.column_mut(j).iter_mut().for_each(|z| *z *= s);
        }
        OperatorMatrix::from_matrix(scaled * &self.vecs_adj).expect("finite gauge factor")
    }
}

/// Mixed derivative of `Π_f E_f(t)` over the directions in `dirs` (0, 1 or 2
/// entries) by the product rule.
fn product_derivative(factors: &[SpectralFactor], t: &TimePoint, dirs: &[usize]) -> OperatorMatrix {
    let c = t.coords();
    let thetas: Vec<f64> = factors.iter().map(|f| f.phase.value(c)).collect();
    let values: Vec<OperatorMatrix> = factors
        .iter()
        .zip(&thetas)
        .map(|(f, &th)| f.spectral(th, |_| C64::new(1.0, 0.0)))
        .collect();
    // d(E_f)/dt_k = −i θ_k G E_f ; d²(E_f)/dt_k dt_l = (−i θ_kl G − θ_k θ_l G²) E_f
    let first = |fi: usize, k: usize| -> OperatorMatrix {
        let f = &factors[fi];
        let gk = f.phase.gradient(c, k);
        f.spectral(thetas[fi], |l| C64::new(0.0, -gk * l))
    };
    let second = |fi: usize, k: usize, l: usize| -> OperatorMatrix {
        let f = &factors[fi];
        let (gk, gl, hkl) = (
            f.phase.gradient(c, k),
            f.phase.gradient(c, l),
            f.phase.hessian(c, k, l),
        );
        f.spectral(thetas[fi], |x| C64::new(-gk * gl * x * x, -hkl * x))
    };
    let dim = values[0].dim();
    let chain = |slots: &[(usize, OperatorMatrix)]| -> OperatorMatrix {
        let mut out: Option<OperatorMatrix> = None;
        for (i, v) in values.iter().enumerate() {
            let m = slots
                .iter()
                .find(|(j, _)| *j == i)
                .map(|(_, m)| m)
                .unwrap_or(v);
            out = Some(match out {
                None => m.clone(),
                Some(o) => &o * m,
            });
        }
        out.unwrap_or_else(|| OperatorMatrix::identity(dim))
    };
    match dirs {
        [] => chain(&[]),
        [k] => {
            let mut acc = OperatorMatrix::zeros(dim);
            for fi in 0..factors.len() {
                acc = &acc + &chain(&[(fi, first(fi, *k))]);
            }
            acc
        }
        [k, l] => {
            let mut acc = OperatorMatrix::zeros(dim);
            for fi in 0..factors.len() {
                acc = &acc + &chain(&[(fi, second(fi, *k, *l))]);
                for gi in 0..factors.len() {
                    if gi != fi {
                        acc = &acc + &chain(&[(fi, first(fi, *k)), (gi, first(gi, *l))]);
                    }
                }
            }
            acc
        }
        _ => unreachable!("at most second derivatives"),
    }
}

/// Deterministic interior sample points used to validate gauges.
fn gauge_check_points(n_times: usize) -> Vec<TimePoint> {
    [0.13, 0.47, 0.81]
        .iter()
        .map(|&s| TimePoint((0..n_times).map(|j| s + 0.17 * j as f64).collect()))
        .collect()
}

/// `H_k' = V H_k V† + iħ (∂_k V) V†`.
///
/// Flatness is gauge covariant (`Z' = V Z V†`), so flat inputs stay flat
/// while the output generators generally become non-autonomous and mutually
/// non-commuting. Analytic partials of the result are supplied when both the
/// hierarchy and the gauge (including its second partials) provide them.
pub fn gauge_transform(h: &HamiltonianHierarchy, gauge: &Gauge) -> Result<HamiltonianHierarchy> {
    if gauge.n_times() != h.n_times() {
        return Err(Error::InvalidArgument(format!(
            "gauge has {} times, hierarchy has {}",
            gauge.n_times(),
            h.n_times()
        )));
    }
    for t in gauge_check_points(h.n_times()) {
        let v = gauge.value(&t);
        if v.dim() != h.dim() {
            return Err(Error::DimMismatch {
                left: h.dim(),
                right: v.dim(),
            });
        }
        let defect = v.unitarity_defect();
        if defect > 1e-12 * (v.dim() as f64).sqrt().max(1.0) {
            return Err(Error::NotUnitary {
                defect,
                at: t.coords().to_vec(),
            });
        }
        for k in 0..h.n_times() {
            let fd = central_difference4(|s| gauge.value(&t.shifted(k, s)), 1e-3);
            let an = gauge.partial(k, &t);
            let mismatch = (&fd - &an).frobenius_norm() / (1.0 + an.frobenius_norm());
            if mismatch > 1e-6 {
                return Err(Error::InconsistentDerivative { axis: k, mismatch });
            }
        }
    }

    let hbar = h.hbar();
    let ihbar = C64::new(0.0, hbar);
    let generators: Vec<GeneratorFn> = (0..h.n_times())
        .map(|k| {
            let h = h.clone();
            let g = gauge.clone();
            Arc::new(move |t: &TimePoint| {
                let v = g.value(t);
                let dv = g.partial(k, t);
                let conj = h.generator(k, t).conjugate_by(&v);
                let extra = (&dv * &v.adjoint()).scale(ihbar);
                (&conj + &extra).hermitian_part()
            }) as GeneratorFn
        })
        .collect();

    let partials: Option<PartialFn> = if h.has_analytic_partials() && gauge.d2.is_some() {
        let h = h.clone();
        let g = gauge.clone();
        Some(Arc::new(move |k: usize, l: usize, t: &TimePoint| {
            let v = g.value(t);
            let vd = v.adjoint();
            let dl = g.partial(l, t);
            let dk = g.partial(k, t);
            let dkl = g.second_partial(k, l, t).expect("second partials present");
            let hk = h.generator(k, t);
            let dhk = h
                .analytic_partial(k, l, t)
                .expect("analytic partials present");
            let t1 = &(&dl * &hk) * &vd;
            let t2 = &(&v * &dhk) * &vd;
            let t3 = &(&v * &hk) * &dl.adjoint();
            let t4 = (&(&dkl * &vd) + &(&dk * &dl.adjoint())).scale(ihbar);
            (&(&(&t1 + &t2) + &t3) + &t4).hermitian_part()
        }))
    } else {
        None
    };

    let mut out = HamiltonianHierarchy::new(
        format!("{}∘gauge", h.label()),
        h.dim(),
        generators,
        partials,
    )?
    .with_hbar(hbar);
    out.truncation_affected = h.truncation_affected;
    Ok(out)
}

// ---------------------------------------------------------------------------
// Built-in hierarchies
// ---------------------------------------------------------------------------

/// Operator representation used by the built-in hierarchies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Basis {
    /// Periodic position grid of the given length.
    Grid { length: f64 },
    /// Truncated harmonic-oscillator number basis.
    Oscillator,
}

impl Basis {
    /// Grid whose position and wavenumber spacings coincide.
    pub fn balanced_grid(dim: usize) -> Self {
        Basis::Grid {
            length: (2.0 * std::f64::consts::PI * dim as f64).sqrt(),
        }
    }

    pub fn operators(&self, dim: usize) -> Result<(OperatorMatrix, OperatorMatrix)> {
        match *self {
            Basis::Grid { length } => {
                let g = build_grid_operators(dim, length)?;
                Ok((g.position, g.momentum))
            }
            Basis::Oscillator => build_oscillator_operators(dim),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Builtin {
    /// `H_k = p^{o_k} / o_k`.
    Free { orders: Vec<u32> },
    /// `H_j = p²/2 + ω_j² q²/2`.
    OscillatorPair { omega1: f64, omega2: f64 },
    /// `H_k = f_k(base)` for polynomials given by ascending coefficients.
    FunctionFamily {
        base: OperatorMatrix,
        polys: Vec<Vec<f64>>,
    },
}

pub fn builtin(kind: &Builtin, dim: usize, basis: Basis) -> Result<HamiltonianHierarchy> {
    if dim < 2 {
        return Err(Error::InvalidArgument(format!("dimension {dim} < 2")));
    }
    let (q, p) = basis.operators(dim)?;
    match kind {
        Builtin::Free { orders } => {
            if orders.len() < 2 {
                return Err(Error::InvalidArgument(
                    "free hierarchy needs at least two orders".into(),
                ));
            }
            if orders.contains(&0) {
                return Err(Error::UnsupportedCombination(
                    "free hierarchy order 0 (p^0/0)".into(),
                ));
            }
            let ops = orders
                .iter()
                .map(|&o| p.powi(o).scale_real(1.0 / o as f64).hermitian_part())
                .collect();
            let label = format!(
                "free[{}]",
                orders
                    .iter()
                    .map(|o| o.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            );
            let h = HamiltonianHierarchy::autonomous(label, ops)?;
            // Powers of p on a truncated ladder basis are not functions of an
            // exactly diagonalisable momentum; identities still hold (they
            // commute) but spectra are truncation artefacts.
            Ok(if matches!(basis, Basis::Oscillator) {
                h.flag_truncation()
            } else {
                h
            })
        }
        Builtin::OscillatorPair { omega1, omega2 } => {
            let p2 = &p * &p;
            let q2 = &q * &q;
            let make =
                |w: f64| (&p2.scale_real(0.5) + &q2.scale_real(0.5 * w * w)).hermitian_part();
            HamiltonianHierarchy::autonomous(
                format!("oscillator-pair({omega1},{omega2})"),
                vec![make(*omega1), make(*omega2)],
            )
        }
        Builtin::FunctionFamily { base, polys } => {
            if polys.len() < 2 || polys.iter().any(|c| c.is_empty()) {
                return Err(Error::InvalidArgument(
                    "function family needs >= 2 nonempty polynomials".into(),
                ));
            }
            if base.dim() != dim {
                return Err(Error::DimMismatch {
                    left: dim,
                    right: base.dim(),
                });
            }
            let base = base.clone().into_hermitian()?;
            let ops = polys
                .iter()
                .map(|c| base.polynomial(c).hermitian_part())
                .collect();
            HamiltonianHierarchy::autonomous("function-family", ops)
        }
    }
}

/// The standard harmonic Hamiltonian `(p² + q²)/2` on a basis.
pub fn harmonic_base(dim: usize, basis: Basis) -> Result<OperatorMatrix> {
    let (q, p) = basis.operators(dim)?;
    Ok((&(&p * &p) + &(&q * &q)).scale_real(0.5).hermitian_part())
}

/// The gauge family used by the flat-hierarchy suite:
/// `V(t) = exp(−i θ_a(t) q) · exp(−i θ_b(t) p)`.
pub fn mixing_gauge(
    n_times: usize,
    basis: Basis,
    dim: usize,
    phase_q: PhasePolynomial,
    phase_p: Option<PhasePolynomial>,
) -> Result<Gauge> {
    let (q, p) = basis.operators(dim)?;
    let mut factors = vec![GaugeFactor {
        generator: q,
        phase: phase_q,
    }];
    if let Some(phase) = phase_p {
        factors.push(GaugeFactor {
            generator: p,
            phase,
        });
    }
    Gauge::exponential_product(n_times, factors)
}

/// Three flat hierarchies generated by gauge transformations on the
/// balanced grid: a gauged free hierarchy with an affine `q` boost, one with
/// affine boosts in both `q` and `p`, and a gauged function family with a
/// quadratic phase. `strength` scales every gauge phase.
pub fn gauged_flat_family(dim: usize, strength: f64) -> Result<Vec<HamiltonianHierarchy>> {
    let basis = Basis::balanced_grid(dim);
    let free = builtin(&Builtin::Free { orders: vec![1, 2] }, dim, basis)?;
    let functions = builtin(
        &Builtin::FunctionFamily {
            base: harmonic_base(dim, basis)?,
            polys: vec![vec![0.0, 1.0], vec![0.0, 0.0, 0.05]],
        },
        dim,
        basis,
    )?;
    let poly = |terms: Vec<(f64, Vec<u32>)>| {
        PhasePolynomial::new(terms.into_iter().map(|(c, e)| (c * strength, e)).collect())
    };
    let gauges = [
        mixing_gauge(
            2,
            basis,
            dim,
            poly(vec![(1.0, vec![1, 0]), (-0.5, vec![0, 1])]),
            None,
        )?,
        mixing_gauge(
            2,
            basis,
            dim,
            poly(vec![(0.7, vec![1, 0]), (0.2, vec![0, 1])]),
            Some(poly(vec![(0.4, vec![1, 0]), (-0.3, vec![0, 1])])),
        )?,
        mixing_gauge(
            2,
            basis,
            dim,
            poly(vec![
                (0.5, vec![2, 0]),
                (0.5, vec![1, 1]),
                (0.5, vec![0, 2]),
            ]),
            None,
        )?,
    ];
    let bases = [&free, &free, &functions];
    bases
        .iter()
        .zip(gauges.iter())
        .enumerate()
        .map(|(i, (h, g))| Ok(gauge_transform(h, g)?.with_label(format!("gauged-{}", i + 1))))
        .collect()
}
