//! Classical Lagrangian 1-form layer.
//!
//! Multi-time solutions, on-shell closure residuals
//! `∂L_l/∂t_k − ∂L_k/∂t_l`, path and loop actions by composite Simpson
//! quadrature, and classical boundary-value actions for the oscillator
//! (closed form plus an independent shooting solver).

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::evolution::Rectangle;
use crate::hierarchy::{TimePoint, MIN_FD_STEP};
use crate::kernelflow::{CAUSTIC_TOL, SMALL_OMEGA};
use crate::timelattice::StaircasePath;

/// Default Simpson density, points per unit time.
pub const DEFAULT_QUAD_PER_UNIT: usize = 64;

/// `L_j(q, ∂_j q, t)`.
pub type ComponentFn = Arc<dyn Fn(usize, &[f64], &[f64], &[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct LagrangianOneForm {
    n_times: usize,
    /// Quadratic fast path `L_j = Σ_c (q̇_c²/2 − ω_j² q_c²/2)`.
    omegas: Option<Vec<f64>>,
    generic: Option<ComponentFn>,
}

impl std::fmt::Debug for LagrangianOneForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LagrangianOneForm")
            .field("n_times", &self.n_times)
            .field("omegas", &self.omegas)
            .finish()
    }
}

impl LagrangianOneForm {
    pub fn quadratic(omegas: Vec<f64>) -> Result<Self> {
        if omegas.len() < 2 {
            return Err(Error::InvalidArgument(
                "a 1-form needs at least two time directions".into(),
            ));
        }
        if omegas.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("1-form frequencies"));
        }
        Ok(Self {
            n_times: omegas.len(),
            omegas: Some(omegas),
            generic: None,
        })
    }

    pub fn custom(n_times: usize, component: ComponentFn) -> Result<Self> {
        if n_times < 2 {
            return Err(Error::InvalidArgument(
                "a 1-form needs at least two time directions".into(),
            ));
        }
        Ok(Self {
            n_times,
            omegas: None,
            generic: Some(component),
        })
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn omegas(&self) -> Option<&[f64]> {
        self.omegas.as_deref()
    }

    pub fn evaluate(&self, j: usize, q: &[f64], dq: &[f64], t: &[f64]) -> f64 {
        match (&self.omegas, &self.generic) {
            (Some(w), _) => {
                let w2 = w[j] * w[j];
                q.iter()
                    .zip(dq)
                    .map(|(&x, &v)| 0.5 * v * v - 0.5 * w2 * x * x)
                    .sum()
            }
            (None, Some(g)) => g(j, q, dq, t),
            (None, None) => unreachable!("1-form has an evaluator"),
        }
    }

    /// `L_j` on the solution at `t`.
    pub fn on_shell(&self, j: usize, sol: &MultiTimeSolution, t: &[f64]) -> f64 {
        let p = sol.at(t);
        self.evaluate(j, &p.q, &p.dq[j], t)
    }
}

/// Values and first partials: `dq[j][c] = ∂q_c/∂t_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPoint {
    pub q: Vec<f64>,
    pub dq: Vec<Vec<f64>>,
}

pub type SolutionFn = Arc<dyn Fn(&[f64]) -> SolutionPoint + Send + Sync>;

#[derive(Clone)]
pub struct MultiTimeSolution {
    n_dof: usize,
    n_times: usize,
    label: String,
    eval: SolutionFn,
}

impl std::fmt::Debug for MultiTimeSolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MultiTimeSolution")
            .field("label", &self.label)
            .field("n_dof", &self.n_dof)
            .field("n_times", &self.n_times)
            .finish()
    }
}

impl MultiTimeSolution {
    pub fn custom(
        label: impl Into<String>,
        n_dof: usize,
        n_times: usize,
        eval: SolutionFn,
    ) -> Self {
        Self {
            n_dof,
            n_times,
            label: label.into(),
            eval,
        }
    }

    /// `q_c = A_c cos(Σ_j ω_j t_j + φ_c)`.
    pub fn cosine_wave(omegas: Vec<f64>, amplitudes: Vec<f64>, phases: Vec<f64>) -> Result<Self> {
        if amplitudes.len() != phases.len() || amplitudes.is_empty() {
            return Err(Error::InvalidArgument(
                "one amplitude and phase per component".into(),
            ));
        }
        let n_times = omegas.len();
        let n_dof = amplitudes.len();
        let eval: SolutionFn = Arc::new(move |t: &[f64]| {
            let theta: f64 = omegas.iter().zip(t).map(|(w, x)| w * x).sum();
            let (q, s): (Vec<f64>, Vec<f64>) = amplitudes
                .iter()
                .zip(&phases)
                .map(|(&a, &ph)| {
                    let (sn, cs) = (theta + ph).sin_cos();
                    (a * cs, -a * sn)
                })
                .unzip();
            SolutionPoint {
                q,
                dq: omegas
                    .iter()
                    .map(|&w| s.iter().map(|&x| w * x).collect())
                    .collect(),
            }
        });
        Ok(Self::custom("cosine-wave", n_dof, n_times, eval))
    }

    /// Single component `A cos(ω(t₁ + … + t_N))`.
    pub fn symmetric(omega: f64, amplitude: f64, n_times: usize) -> Result<Self> {
        Ok(
            Self::cosine_wave(vec![omega; n_times], vec![amplitude], vec![0.0])?
                .relabel("symmetric"),
        )
    }

    /// `A (cos θ, sin θ)` with `θ = Σ ω_j t_j`.
    pub fn circular(omegas: Vec<f64>, amplitude: f64) -> Result<Self> {
        Ok(
            Self::cosine_wave(omegas, vec![amplitude; 2], vec![0.0, -PI / 2.0])?
                .relabel("circular"),
        )
    }

    /// Off-shell witness `q = t₁ t₂`.
    pub fn product_field() -> Self {
        let eval: SolutionFn = Arc::new(|t: &[f64]| SolutionPoint {
            q: vec![t[0] * t[1]],
            dq: vec![vec![t[1]], vec![t[0]]],
        });
        Self::custom("product-field", 1, 2, eval)
    }

    fn relabel(mut self, label: &str) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn n_dof(&self) -> usize {
        self.n_dof
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn at(&self, t: &[f64]) -> SolutionPoint {
        (self.eval)(t)
    }
}

fn shifted(t: &[f64], axis: usize, delta: f64) -> Vec<f64> {
    let mut s = t.to_vec();
    s[axis] += delta;
    s
}

/// Fourth-order central first derivative of a scalar.
fn d4(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    (8.0 * (f(h) - f(-h)) - (f(2.0 * h) - f(-2.0 * h))) / (12.0 * h)
}

fn check_step(fd_step: f64) -> Result<()> {
    if !(fd_step >= MIN_FD_STEP) {
        return Err(Error::StepTooSmall(fd_step));
    }
    Ok(())
}

/// `‖∂²q/∂t_j² + ω_j² q‖` per axis, differentiating the supplied first
/// partials with fourth-order central differences.
pub fn eom_residual(
    sol: &MultiTimeSolution,
    omegas: &[f64],
    t: &[f64],
    fd_step: f64,
) -> Result<Vec<f64>> {
    check_step(fd_step)?;
    if omegas.len() != sol.n_times() || t.len() != sol.n_times() {
        return Err(Error::DimMismatch {
            left: sol.n_times(),
            right: omegas.len().min(t.len()),
        });
    }
    let q = sol.at(t).q;
    Ok((0..sol.n_times())
        .map(|j| {
            (0..sol.n_dof())
                .map(|c| {
                    let second = d4(|d| sol.at(&shifted(t, j, d)).dq[j][c], fd_step);
                    (second + omegas[j] * omegas[j] * q[c]).powi(2)
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect())
}

fn check_pair(form: &LagrangianOneForm, l: usize, k: usize) -> Result<()> {
    for idx in [l, k] {
        if idx >= form.n_times() {
            return Err(Error::IndexOutOfRange {
                index: idx,
                len: form.n_times(),
            });
        }
    }
    if l == k {
        return Err(Error::InvalidArgument(
            "closure needs two distinct directions".into(),
        ));
    }
    Ok(())
}

/// Signed on-shell density `dL_k/dt_l − dL_l/dt_k` (the Green-theorem
/// integrand for a loop traversed along `l` first).
pub fn closure_density(
    form: &LagrangianOneForm,
    sol: &MultiTimeSolution,
    l: usize,
    k: usize,
    t: &[f64],
    fd_step: f64,
) -> Result<f64> {
    check_step(fd_step)?;
    check_pair(form, l, k)?;
    let dk_dl = d4(|d| form.on_shell(k, sol, &shifted(t, l, d)), fd_step);
    let dl_dk = d4(|d| form.on_shell(l, sol, &shifted(t, k, d)), fd_step);
    Ok(dk_dl - dl_dk)
}

/// `|dL_l/dt_k − dL_k/dt_l|` along the solution.
pub fn closure_residual(
    form: &LagrangianOneForm,
    sol: &MultiTimeSolution,
    l: usize,
    k: usize,
    t: &[f64],
    fd_step: f64,
) -> Result<f64> {
    Ok(closure_density(form, sol, l, k, t, fd_step)?.abs())
}

fn simpson_intervals(duration: f64, per_unit: usize) -> usize {
    let n = (duration.abs() * per_unit as f64).ceil() as usize;
    (n.max(2) + 1) & !1
}

/// `∫ L_axis dt_axis` along a straight leg of signed length `dt`.
fn leg_integral(
    form: &LagrangianOneForm,
    sol: &MultiTimeSolution,
    start: &[f64],
    axis: usize,
    dt: f64,
    per_unit: usize,
) -> f64 {
    if dt == 0.0 {
        return 0.0;
    }
    let n = simpson_intervals(dt, per_unit);
    let h = dt / n as f64;
    let mut acc = 0.0;
    for i in 0..=n {
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * form.on_shell(axis, sol, &shifted(start, axis, i as f64 * h));
    }
    acc * h / 3.0
}

/// `S_Γ = Σ_moves ∫ L_axis dt_axis` by composite Simpson with
/// `quad_per_unit` points per unit time (at least two intervals per move).
pub fn action_along_path(
    form: &LagrangianOneForm,
    sol: &MultiTimeSolution,
    path: &StaircasePath,
    widths: &[f64],
    quad_per_unit: usize,
) -> Result<f64> {
    if path.n_times() != form.n_times() || widths.len() != form.n_times() {
        return Err(Error::InvalidArgument(format!(
            "path has {} directions, widths {}, 1-form {}",
            path.n_times(),
            widths.len(),
            form.n_times()
        )));
    }
    let mut t: Vec<f64> = path
        .start()
        .iter()
        .zip(widths)
        .map(|(&c, &w)| c as f64 * w)
        .collect();
    let mut total = 0.0;
    for m in path.moves() {
        let dt = m.length as f64 * widths[m.axis];
        total += leg_integral(form, sol, &t, m.axis, dt, quad_per_unit);
        t[m.axis] += dt;
    }
    Ok(total)
}

/// `∮ 𝓛` around the rectangle: first axis forward, second forward, then back.
pub fn loop_action(
    form: &LagrangianOneForm,
    sol: &MultiTimeSolution,
    rect: &Rectangle,
    quad_per_unit: usize,
) -> Result<f64> {
    let (l, k) = rect.axes;
    check_pair(form, l, k)?;
    let (a, b) = rect.sides;
    let c0 = rect.corner.coords().to_vec();
    let c1 = shifted(&c0, l, a);
    let c2 = shifted(&c1, k, b);
    let c3 = shifted(&c2, l, -a);
    Ok(leg_integral(form, sol, &c0, l, a, quad_per_unit)
        + leg_integral(form, sol, &c1, k, b, quad_per_unit)
        + leg_integral(form, sol, &c2, l, -a, quad_per_unit)
        + leg_integral(form, sol, &c3, k, -b, quad_per_unit))
}

/// `∬ (dL_k/dt_l − dL_l/dt_k) dt_l dt_k` over the rectangle by 2D Simpson.
pub fn area_integral_closure(
    form: &LagrangianOneForm,
    sol: &MultiTimeSolution,
    rect: &Rectangle,
    quad_per_unit: usize,
    fd_step: f64,
) -> Result<f64> {
    let (l, k) = rect.axes;
    let (a, b) = rect.sides;
    if a == 0.0 || b == 0.0 {
        return Ok(0.0);
    }
    let (na, nb) = (
        simpson_intervals(a, quad_per_unit),
        simpson_intervals(b, quad_per_unit),
    );
    let weight = |i: usize, n: usize| {
        if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        }
    };
    let (ha, hb) = (a / na as f64, b / nb as f64);
    let mut acc = 0.0;
    for i in 0..=na {
        for j in 0..=nb {
            let t = shifted(
                &shifted(rect.corner.coords(), l, i as f64 * ha),
                k,
                j as f64 * hb,
            );
            acc += weight(i, na) * weight(j, nb) * closure_density(form, sol, l, k, &t, fd_step)?;
        }
    }
    Ok(acc * ha * hb / 9.0)
}

// ---------------------------------------------------------------------------
// Classical boundary-value actions
// ---------------------------------------------------------------------------

fn caustic(omega: f64, duration: f64) -> Result<(f64, f64)> {
    let (s, c) = (omega * duration).sin_cos();
    if s.abs() < CAUSTIC_TOL {
        return Err(Error::Caustic {
            omega,
            duration,
            sin_abs: s.abs(),
            segment: None,
        });
    }
    Ok((s, c))
}

/// `S = (ω/(2 sin ωT))[(x′² + x″²) cos ωT − 2 x′x″]`.
pub fn classical_bvp_action(omega: f64, duration: f64, x_start: f64, x_end: f64) -> Result<f64> {
    Ok(SegmentAction::closed_form(omega, duration)?.eval(x_start, x_end))
}

/// Two-point boundary value solved by linear shooting with RK4, action by
/// Simpson over the RK4 nodes. `steps` is rounded up to even.
pub fn classical_bvp_action_shooting(
    omega: f64,
    duration: f64,
    x_start: f64,
    x_end: f64,
    steps: usize,
) -> Result<f64> {
    if duration <= 0.0 {
        return Err(Error::NegativeDuration(duration));
    }
    caustic(omega, duration)?;
    let n = (steps.max(2) + 1) & !1;
    let h = duration / n as f64;
    let w2 = omega * omega;
    let rk4 = |q0: f64, v0: f64| -> Vec<(f64, f64)> {
        let f = |q: f64, v: f64| (v, -w2 * q);
        let mut out = Vec::with_capacity(n + 1);
        let (mut q, mut v) = (q0, v0);
        out.push((q, v));
        for _ in 0..n {
            let k1 = f(q, v);
            let k2 = f(q + 0.5 * h * k1.0, v + 0.5 * h * k1.1);
            let k3 = f(q + 0.5 * h * k2.0, v + 0.5 * h * k2.1);
            let k4 = f(q + h * k3.0, v + h * k3.1);
            q += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            v += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
            out.push((q, v));
        }
        out
    };
    let end0 = rk4(x_start, 0.0)[n].0;
    let end1 = rk4(x_start, 1.0)[n].0;
    let v0 = (x_end - end0) / (end1 - end0);
    let traj = rk4(x_start, v0);
    let mut acc = 0.0;
    for (i, &(q, v)) in traj.iter().enumerate() {
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * (0.5 * v * v - 0.5 * w2 * q * q);
    }
    Ok(acc * h / 3.0)
}

/// Quadratic segment action `S(u, v) = p u² + 2 r u v + s v²` with its
/// conjugate-point count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentAction {
    pub start_sq: f64,
    pub cross: f64,
    pub end_sq: f64,
    pub morse_index: i64,
}

impl SegmentAction {
    pub fn closed_form(omega: f64, duration: f64) -> Result<Self> {
        if duration <= 0.0 {
            return Err(Error::NegativeDuration(duration));
        }
        let w = omega.abs();
        if w < SMALL_OMEGA {
            let x2 = (w * duration).powi(2);
            let diag = (1.0 - x2 / 3.0 - x2 * x2 / 45.0) / (2.0 * duration);
            let cross = -(1.0 + x2 / 6.0 + 7.0 * x2 * x2 / 360.0) / (2.0 * duration);
            return Ok(Self {
                start_sq: diag,
                cross,
                end_sq: diag,
                morse_index: 0,
            });
        }
        let (s, c) = caustic(w, duration)?;
        Ok(Self {
            start_sq: w * c / (2.0 * s),
            cross: -w / (2.0 * s),
            end_sq: w * c / (2.0 * s),
            morse_index: (w * duration / PI).floor() as i64,
        })
    }

    /// Coefficients recovered from three shooting solves.
    pub fn from_shooting(omega: f64, duration: f64, steps: usize) -> Result<Self> {
        let s = |u, v| classical_bvp_action_shooting(omega, duration, u, v, steps);
        let p = s(1.0, 0.0)?;
        let e = s(0.0, 1.0)?;
        let both = s(1.0, 1.0)?;
        Ok(Self {
            start_sq: p,
            cross: (both - p - e) / 2.0,
            end_sq: e,
            morse_index: (omega.abs() * duration / PI).floor() as i64,
        })
    }

    pub fn eval(&self, x_start: f64, x_end: f64) -> f64 {
        self.start_sq * x_start * x_start
            + 2.0 * self.cross * x_start * x_end
            + self.end_sq * x_end * x_end
    }
}

/// Classical action of consecutive segments with free corner positions.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainAction {
    pub segments: Vec<SegmentAction>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainStationary {
    pub action: f64,
    pub corners: Vec<f64>,
    /// Segment conjugate points plus negative directions of the corner Hessian.
    pub morse_index: i64,
}

impl ChainAction {
    /// Segments along the path's moves; `shooting_steps = None` uses the
    /// closed form.
    pub fn along_path(
        omegas: &[f64],
        path: &StaircasePath,
        widths: &[f64],
        shooting_steps: Option<usize>,
    ) -> Result<Self> {
        let mut segments = Vec::new();
        for m in path.moves() {
            let dt = m.length as f64 * widths[m.axis];
            if dt == 0.0 {
                continue;
            }
            let w = omegas[m.axis];
            segments.push(match shooting_steps {
                Some(steps) => SegmentAction::from_shooting(w, dt, steps)?,
                None => SegmentAction::closed_form(w, dt)?,
            });
        }
        if segments.is_empty() {
            return Err(Error::IdentityKernel);
        }
        Ok(Self { segments })
    }

    fn corner_hessian(&self) -> DMatrix<f64> {
        let m = self.segments.len() - 1;
        let mut h = DMatrix::zeros(m, m);
        for j in 0..m {
            h[(j, j)] = 2.0 * (self.segments[j].end_sq + self.segments[j + 1].start_sq);
            if j + 1 < m {
                h[(j, j + 1)] = 2.0 * self.segments[j + 1].cross;
                h[(j + 1, j)] = 2.0 * self.segments[j + 1].cross;
            }
        }
        h
    }

    pub fn stationary(&self, x_start: f64, x_end: f64) -> Result<ChainStationary> {
        let m = self.segments.len() - 1;
        let base_index: i64 = self.segments.iter().map(|s| s.morse_index).sum();
        if m == 0 {
            return Ok(ChainStationary {
                action: self.segments[0].eval(x_start, x_end),
                corners: Vec::new(),
                morse_index: base_index,
            });
        }
        let h = self.corner_hessian();
        let mut g = DVector::zeros(m);
        g[0] += 2.0 * self.segments[0].cross * x_start;
        g[m - 1] += 2.0 * self.segments[m].cross * x_end;
        let eig = SymmetricEigen::new(h.clone());
        let smallest = eig
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b.abs()));
        if smallest < CAUSTIC_TOL {
            return Err(Error::DegenerateComposition {
                magnitude: smallest,
                segment: None,
            });
        }
        let y = h.lu().solve(&(-g)).ok_or(Error::DegenerateComposition {
            magnitude: smallest,
            segment: None,
        })?;
        let mut pts = vec![x_start];
        pts.extend(y.iter().copied());
        pts.push(x_end);
        let action = self
            .segments
            .iter()
            .enumerate()
            .map(|(i, s)| s.eval(pts[i], pts[i + 1]))
            .sum();
        let negative = eig.eigenvalues.iter().filter(|&&e| e < 0.0).count() as i64;
        Ok(ChainStationary {
            action,
            corners: y.iter().copied().collect(),
            morse_index: base_index + negative,
        })
    }

    /// `∂²S/∂x″∂x′` of the end-to-end action by a central mixed difference.
    pub fn mixed_derivative(&self, step: f64) -> Result<f64> {
        check_step(step)?;
        let s = |xs: f64, xe: f64| self.stationary(xs, xe).map(|c| c.action);
        Ok(
            (s(step, step)? - s(step, -step)? - s(-step, step)? + s(-step, -step)?)
                / (4.0 * step * step),
        )
    }
}

/// Convenience: sample a closure residual scan over an `n × n` grid in the
/// `(t₁, t₂)` plane, returning `(t₁, t₂, residual)` rows.
pub fn closure_scan(
    form: &LagrangianOneForm,
    sol: &MultiTimeSolution,
    n: usize,
    lo: f64,
    hi: f64,
    fd_step: f64,
) -> Result<Vec<(f64, f64, f64)>> {
    let pts = crate::hierarchy::sample_grid(2, n, lo, hi);
    pts.iter()
        .map(|t: &TimePoint| {
            let c = t.coords();
            Ok((c[0], c[1], closure_residual(form, sol, 0, 1, c, fd_step)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::DEFAULT_FD_STEP;
    use crate::timelattice::{enumerate_paths, LatticeSpec, Move};

    fn unit_square() -> Rectangle {
        Rectangle::new(TimePoint::origin(2), (0, 1), (1.0, 1.0)).unwrap()
    }

    #[test]
    fn quadratic_fast_path_matches_generic() {
        let omegas = vec![1.0, 2.5];
        let fast = LagrangianOneForm::quadratic(omegas.clone()).unwrap();
        let generic = LagrangianOneForm::custom(
            2,
            Arc::new(move |j, q: &[f64], dq: &[f64], _t: &[f64]| {
                q.iter()
                    .zip(dq)
                    .map(|(x, v)| 0.5 * v * v - 0.5 * omegas[j] * omegas[j] * x * x)
                    .sum()
            }),
        )
        .unwrap();
        for (i, q) in [[0.3, -1.2], [2.0, 0.5], [-0.7, 0.0]].iter().enumerate() {
            let dq = [0.1 * i as f64 - 0.4, 1.3];
            for j in 0..2 {
                let a = fast.evaluate(j, q, &dq, &[0.0, 0.0]);
                let b = generic.evaluate(j, q, &dq, &[0.0, 0.0]);
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn equations_of_motion() {
        let t = [0.4, 0.9];
        let wave = MultiTimeSolution::cosine_wave(vec![1.0, 2.0], vec![1.0], vec![0.0]).unwrap();
        assert!(eom_residual(&wave, &[1.0, 2.0], &t, 1e-3)
            .unwrap()
            .iter()
            .all(|&r| r <= 1e-6));
        let circ = MultiTimeSolution::circular(vec![1.0, 2.0], 1.5).unwrap();
        assert!(eom_residual(&circ, &[1.0, 2.0], &t, 1e-3)
            .unwrap()
            .iter()
            .all(|&r| r <= 1e-6));
        let off = MultiTimeSolution::product_field();
        let r = eom_residual(&off, &[1.0, 2.0], &t, 1e-3).unwrap();
        assert!((r[0] - 0.4 * 0.9).abs() < 1e-9, "{r:?}");
        assert!((r[1] - 4.0 * 0.4 * 0.9).abs() < 1e-9);
        assert!(matches!(
            eom_residual(&off, &[1.0, 2.0], &t, 0.0),
            Err(Error::StepTooSmall(_))
        ));
    }

    #[test]
    fn closure_on_named_families() {
        let t = [0.3, 0.7];
        let sym = MultiTimeSolution::symmetric(1.7, 0.8, 2).unwrap();
        let f = LagrangianOneForm::quadratic(vec![1.7, 1.7]).unwrap();
        assert!(closure_residual(&f, &sym, 0, 1, &t, DEFAULT_FD_STEP).unwrap() <= 1e-6);
        // On the circular pair |∂_j q|² = A²ω_j² and |q|² = A², so L_j ≡ 0.
        let circ = MultiTimeSolution::circular(vec![1.0, 2.0], 1.5).unwrap();
        let f = LagrangianOneForm::quadratic(vec![1.0, 2.0]).unwrap();
        assert!(f.on_shell(0, &circ, &t).abs() < 1e-12 && f.on_shell(1, &circ, &t).abs() < 1e-12);
        assert!(closure_residual(&f, &circ, 0, 1, &t, DEFAULT_FD_STEP).unwrap() <= 1e-6);
    }

    #[test]
    fn single_wave_with_distinct_frequencies_is_reported() {
        // L_j = −A²ω_j² cos 2θ / 2, so the density is A² ω₁ω₂(ω₁ − ω₂) sin 2θ.
        let (w1, w2) = (1.0, 2.0);
        let wave = MultiTimeSolution::cosine_wave(vec![w1, w2], vec![1.0], vec![0.0]).unwrap();
        let f = LagrangianOneForm::quadratic(vec![w1, w2]).unwrap();
        let t = [0.3, 0.2];
        let theta = w1 * t[0] + w2 * t[1];
        let expect = (w1 * w2 * (w1 - w2) * (2.0 * theta).sin()).abs();
        let got = closure_residual(&f, &wave, 0, 1, &t, DEFAULT_FD_STEP).unwrap();
        assert!((got - expect).abs() < 1e-8, "{got} vs {expect}");
    }

    #[test]
    fn off_shell_witness() {
        let f = LagrangianOneForm::quadratic(vec![1.0, 2.0]).unwrap();
        let off = MultiTimeSolution::product_field();
        // ∂L₁/∂t₂ − ∂L₂/∂t₁ = (t₂ − t₁²t₂) − (t₁ − 4t₁t₂²) = 3 at (1, 1).
        let r = closure_residual(&f, &off, 0, 1, &[1.0, 1.0], DEFAULT_FD_STEP).unwrap();
        assert!((r - 3.0).abs() < 1e-9);
        let loop_s = loop_action(&f, &off, &unit_square(), 64).unwrap();
        assert!((loop_s + 0.5).abs() < 1e-10, "{loop_s}");
        let area = area_integral_closure(&f, &off, &unit_square(), 64, DEFAULT_FD_STEP).unwrap();
        assert!((loop_s - area).abs() <= 1e-6);
    }

    #[test]
    fn actions_simple_cases() {
        let f = LagrangianOneForm::quadratic(vec![1.0, 2.0]).unwrap();
        let circ = MultiTimeSolution::circular(vec![1.0, 2.0], 1.0).unwrap();
        assert_eq!(
            action_along_path(&f, &circ, &StaircasePath::empty(2), &[1.0, 1.0], 64).unwrap(),
            0.0
        );
        let constant = LagrangianOneForm::custom(
            2,
            Arc::new(|j, _: &[f64], _: &[f64], _: &[f64]| 1.5 + j as f64),
        )
        .unwrap();
        let p = StaircasePath::from_origin(2, vec![Move::new(1, 3)]).unwrap();
        let s = action_along_path(&constant, &circ, &p, &[0.1, 0.25], 7).unwrap();
        assert!((s - 2.5 * 0.75).abs() < 1e-14);
        let degenerate = Rectangle::new(TimePoint::origin(2), (0, 1), (0.0, 1.0)).unwrap();
        assert!(loop_action(&f, &circ, &degenerate, 64).unwrap().abs() < 1e-15);
    }

    #[test]
    fn simpson_order() {
        // L₁ = −cos(2θ)/2 along t₁ at t₂ = 0: ∫₀^T = −sin(2T)/4.
        let wave = MultiTimeSolution::cosine_wave(vec![1.0, 2.0], vec![1.0], vec![0.0]).unwrap();
        let f = LagrangianOneForm::quadratic(vec![1.0, 2.0]).unwrap();
        let p = StaircasePath::from_origin(2, vec![Move::new(0, 1)]).unwrap();
        let exact = -(2.0_f64 * 1.7).sin() / 4.0;
        let e1 = (action_along_path(&f, &wave, &p, &[1.7, 1.0], 8).unwrap() - exact).abs();
        let e2 = (action_along_path(&f, &wave, &p, &[1.7, 1.0], 16).unwrap() - exact).abs();
        let ratio = e1 / e2;
        assert!((12.0..20.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn path_independence_on_closed_solution() {
        let f = LagrangianOneForm::quadratic(vec![1.0, 2.0]).unwrap();
        let circ = MultiTimeSolution::circular(vec![1.0, 2.0], 1.0).unwrap();
        let sym = MultiTimeSolution::symmetric(1.0, 1.0, 2).unwrap();
        let fs = LagrangianOneForm::quadratic(vec![1.0, 1.0]).unwrap();
        let spec = LatticeSpec::new(2, 3, vec![0.3, 0.3]).unwrap();
        let paths = enumerate_paths(&spec).unwrap();
        for (form, sol) in [(&f, &circ), (&fs, &sym)] {
            let actions: Vec<f64> = paths
                .iter()
                .map(|p| action_along_path(form, sol, p, &spec.widths, 256).unwrap())
                .collect();
            let spread = actions.iter().fold(f64::MIN, |a, &b| a.max(b))
                - actions.iter().fold(f64::MAX, |a, &b| a.min(b));
            assert!(spread <= 1e-7, "{spread}");
        }
    }

    #[test]
    fn bvp_action_closed_form_and_shooting() {
        let free = classical_bvp_action(1e-9, 0.8, 0.3, 1.1).unwrap();
        assert!((free - 0.8_f64.powi(2) / 1.6).abs() < 1e-12);
        let w = 1.3;
        let quarter = classical_bvp_action(w, PI / (2.0 * w), 0.7, 0.7).unwrap();
        assert!((quarter + w * 0.49).abs() < 1e-12);
        let shot = classical_bvp_action_shooting(w, PI / (2.0 * w), 0.7, 0.7, 2000).unwrap();
        assert!((shot - quarter).abs() < 1e-8);
        for &(w, t, xs, xe) in &[
            (0.5, 1.0, 0.2, -0.4),
            (2.0, 2.0, 1.0, 0.5),
            (1.0, 4.0, -0.3, 0.8),
        ] {
            let a = classical_bvp_action(w, t, xs, xe).unwrap();
            let b = classical_bvp_action_shooting(w, t, xs, xe, 4000).unwrap();
            assert!((a - b).abs() < 1e-8, "{w} {t}: {a} vs {b}");
        }
        assert!(matches!(
            classical_bvp_action(1.0, PI, 0.0, 1.0),
            Err(Error::Caustic { .. })
        ));
        let seg = SegmentAction::closed_form(w, 0.9).unwrap();
        let chain = ChainAction {
            segments: vec![seg],
        };
        let mixed = chain.mixed_derivative(0.25).unwrap();
        assert!((mixed + w / (w * 0.9).sin()).abs() < 1e-12);
    }

    #[test]
    fn chain_of_equal_frequencies_is_one_segment() {
        let a = SegmentAction::closed_form(1.0, 1.2).unwrap();
        let b = SegmentAction::closed_form(1.0, 2.3).unwrap();
        let whole = SegmentAction::closed_form(1.0, 3.5).unwrap();
        let st = ChainAction {
            segments: vec![a, b],
        }
        .stationary(0.4, -0.9)
        .unwrap();
        assert!((st.action - whole.eval(0.4, -0.9)).abs() < 1e-12);
        assert_eq!(st.morse_index, whole.morse_index);
    }
}
