//! Time-ordered evolution along staircase paths.
//!
//! Each straight segment along axis `l` is integrated with a midpoint-sampled
//! product of exponentials, later factors acting on the left. A path is the
//! ordered product of its segments; no commutation between directions is
//! assumed anywhere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::{HamiltonianHierarchy, TimePoint, MIN_FD_STEP};
use crate::hilbert::{commutator, matexp, OperatorMatrix, StateVector, C64};
use crate::timelattice::StaircasePath;

/// `Π_{j=steps..1} exp(−(i/ħ) H_axis(t_j*) Δt/steps)` with midpoint samples
/// `t_j*`. Autonomous generators are exponentiated once.
pub fn evolve_segment(
    h: &HamiltonianHierarchy,
    axis: usize,
    t_start: &TimePoint,
    dt: f64,
    steps: usize,
) -> Result<OperatorMatrix> {
    evolve_segment_with(h, axis, t_start, dt, steps, Integrator::Midpoint)
}

/// Per-step propagator used inside a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    /// `exp(−(i/ħ) H(t_mid) δ)`: second order.
    #[default]
    Midpoint,
    /// Two-node Gauss–Legendre Magnus expansion with the commutator term:
    /// fourth order.
    Magnus4,
}

pub fn evolve_segment_with(
    h: &HamiltonianHierarchy,
    axis: usize,
    t_start: &TimePoint,
    dt: f64,
    steps: usize,
    integrator: Integrator,
) -> Result<OperatorMatrix> {
    if dt < 0.0 {
        return Err(Error::NegativeDuration(dt));
    }
    evolve_segment_signed(h, axis, t_start, dt, steps, integrator)
}

/// Like [`evolve_segment_with`] but accepts `dt < 0` (backward traversal).
pub(crate) fn evolve_segment_signed(
    h: &HamiltonianHierarchy,
    axis: usize,
    t_start: &TimePoint,
    dt: f64,
    steps: usize,
    integrator: Integrator,
) -> Result<OperatorMatrix> {
    h.check_index(axis)?;
    if steps == 0 {
        return Err(Error::InvalidArgument(
            "segment needs at least one step".into(),
        ));
    }
    if !dt.is_finite() {
        return Err(Error::NonFinite("segment duration"));
    }
    if dt == 0.0 {
        return Ok(OperatorMatrix::identity(h.dim()));
    }
    let phase = |delta: f64| C64::new(0.0, -delta / h.hbar());
    if h.is_autonomous() {
        return matexp(&h.generator(axis, t_start), phase(dt));
    }
    let delta = dt / steps as f64;
    let mut u = OperatorMatrix::identity(h.dim());
    for j in 0..steps {
        let step = match integrator {
            Integrator::Midpoint => {
                let mid = t_start.shifted(axis, (j as f64 + 0.5) * delta);
                matexp(&h.generator(axis, &mid), phase(delta))?
            }
            Integrator::Magnus4 => {
                let node = 3.0_f64.sqrt() / 6.0;
                let h1 = h.generator(
                    axis,
                    &t_start.shifted(axis, (j as f64 + 0.5 - node) * delta),
                );
                let h2 = h.generator(
                    axis,
                    &t_start.shifted(axis, (j as f64 + 0.5 + node) * delta),
                );
                // exp(−(i/ħ) Ω) with Ω = δ(H₁ + H₂)/2 − i(√3 δ²/12ħ)[H₂, H₁]
                let avg = (&h1 + &h2).scale_real(0.5);
                let comm = commutator(&h2, &h1)?;
                let correction = comm.scale(C64::new(
                    0.0,
                    -3.0_f64.sqrt() * delta * delta / (12.0 * h.hbar()),
                ));
                let omega = (&avg.scale_real(delta) + &correction).hermitian_part();
                matexp(&omega, phase(1.0))?
            }
        };
        u = &step * &u;
    }
    Ok(u)
}

fn steps_for(dt: f64, steps_per_unit: usize) -> usize {
    ((dt.abs() * steps_per_unit as f64) - 1e-9).ceil().max(1.0) as usize
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvolutionResult {
    pub path: StaircasePath,
    pub widths: Vec<f64>,
    pub steps_per_unit: usize,
    #[serde(skip)]
    pub unitary: Option<OperatorMatrix>,
    pub unitarity_defect: f64,
    pub segments: usize,
}

impl EvolutionResult {
    pub fn unitary(&self) -> &OperatorMatrix {
        self.unitary
            .as_ref()
            .expect("unitary is present on fresh results")
    }

    /// Declared unitarity bound: `1e−10` per segment.
    pub fn defect_tolerance(&self) -> f64 {
        1e-10 * self.segments.max(1) as f64
    }
}

fn path_start_time(path: &StaircasePath, widths: &[f64]) -> Result<TimePoint> {
    if widths.len() != path.n_times() {
        return Err(Error::InvalidArgument(format!(
            "{} widths for a {}-time path",
            widths.len(),
            path.n_times()
        )));
    }
    TimePoint::new(
        path.start()
            .iter()
            .zip(widths)
            .map(|(&c, &w)| c as f64 * w)
            .collect(),
    )
}

/// Ordered product of segment evolutions over the path's moves.
/// `steps_per_unit` is the number of integrator steps per unit time.
pub fn evolve_path(
    h: &HamiltonianHierarchy,
    path: &StaircasePath,
    widths: &[f64],
    steps_per_unit: usize,
) -> Result<EvolutionResult> {
    if path.n_times() != h.n_times() {
        return Err(Error::InvalidArgument(format!(
            "{}-time path on a {}-time hierarchy",
            path.n_times(),
            h.n_times()
        )));
    }
    let mut t = path_start_time(path, widths)?;
    let mut u = OperatorMatrix::identity(h.dim());
    let mut segments = 0;
    for m in path.moves() {
        let dt = m.length as f64 * widths[m.axis];
        if dt == 0.0 {
            continue;
        }
        let seg = evolve_segment(h, m.axis, &t, dt, steps_for(dt, steps_per_unit))?;
        u = &seg * &u;
        t = t.shifted(m.axis, dt);
        segments += 1;
    }
    let defect = u.unitarity_defect();
    Ok(EvolutionResult {
        path: path.clone(),
        widths: widths.to_vec(),
        steps_per_unit,
        unitary: Some(u),
        unitarity_defect: defect,
        segments,
    })
}

/// Evolution along the path traversed backwards, from its end to its start.
pub fn evolve_path_reversed(
    h: &HamiltonianHierarchy,
    path: &StaircasePath,
    widths: &[f64],
    steps_per_unit: usize,
) -> Result<OperatorMatrix> {
    let start = path_start_time(path, widths)?;
    let mut t = start;
    for m in path.moves() {
        t = t.shifted(m.axis, m.length as f64 * widths[m.axis]);
    }
    let mut u = OperatorMatrix::identity(h.dim());
    for m in path.moves().iter().rev() {
        let dt = m.length as f64 * widths[m.axis];
        if dt == 0.0 {
            continue;
        }
        let seg = evolve_segment_signed(
            h,
            m.axis,
            &t,
            -dt,
            steps_for(dt, steps_per_unit),
            Integrator::Midpoint,
        )?;
        u = &seg * &u;
        t = t.shifted(m.axis, -dt);
    }
    Ok(u)
}

/// Axis-aligned rectangle in the `(first, second)` time plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rectangle {
    pub corner: TimePoint,
    pub axes: (usize, usize),
    pub sides: (f64, f64),
}

impl Rectangle {
    pub fn new(corner: TimePoint, axes: (usize, usize), sides: (f64, f64)) -> Result<Self> {
        if axes.0 == axes.1 {
            return Err(Error::InvalidArgument(
                "rectangle needs two distinct axes".into(),
            ));
        }
        if !(sides.0 >= 0.0 && sides.1 >= 0.0) {
            return Err(Error::NegativeDuration(sides.0.min(sides.1)));
        }
        Ok(Self {
            corner,
            axes,
            sides,
        })
    }

    pub fn area(&self) -> f64 {
        self.sides.0 * self.sides.1
    }

    /// Rectangle scaled by `lambda` about its corner.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            corner: self.corner.clone(),
            axes: self.axes,
            sides: (self.sides.0 * lambda, self.sides.1 * lambda),
        }
    }

    pub fn center(&self) -> TimePoint {
        self.corner
            .shifted(self.axes.0, self.sides.0 / 2.0)
            .shifted(self.axes.1, self.sides.1 / 2.0)
    }
}

fn two_leg(
    h: &HamiltonianHierarchy,
    start: &TimePoint,
    legs: [(usize, f64); 2],
    steps_per_unit: usize,
    integrator: Integrator,
) -> Result<OperatorMatrix> {
    let mut t = start.clone();
    let mut u = OperatorMatrix::identity(h.dim());
    for (axis, dt) in legs {
        let seg =
            evolve_segment_signed(h, axis, &t, dt, steps_for(dt, steps_per_unit), integrator)?;
        u = &seg * &u;
        t = t.shifted(axis, dt);
    }
    Ok(u)
}

/// `U_loop = U_{Γ'}† U_Γ` with `Γ` going along the first axis then the
/// second, and `Γ'` the other way round: the rectangle traversed
/// counter-clockwise from its corner.
pub fn loop_unitary(
    h: &HamiltonianHierarchy,
    rect: &Rectangle,
    steps_per_unit: usize,
) -> Result<OperatorMatrix> {
    loop_unitary_with(h, rect, steps_per_unit, Integrator::Midpoint)
}

pub fn loop_unitary_with(
    h: &HamiltonianHierarchy,
    rect: &Rectangle,
    steps_per_unit: usize,
    integrator: Integrator,
) -> Result<OperatorMatrix> {
    h.check_index(rect.axes.0)?;
    h.check_index(rect.axes.1)?;
    let (l, k) = rect.axes;
    let (a, b) = rect.sides;
    let forward = two_leg(
        h,
        &rect.corner,
        [(l, a), (k, b)],
        steps_per_unit,
        integrator,
    )?;
    let other = two_leg(
        h,
        &rect.corner,
        [(k, b), (l, a)],
        steps_per_unit,
        integrator,
    )?;
    Ok(&other.adjoint() * &forward)
}

/// `‖U_loop − I‖_F`.
pub fn loop_residual(
    h: &HamiltonianHierarchy,
    rect: &Rectangle,
    steps_per_unit: usize,
) -> Result<f64> {
    Ok(loop_unitary(h, rect, steps_per_unit)?.distance_from_identity())
}

pub fn loop_residual_with(
    h: &HamiltonianHierarchy,
    rect: &Rectangle,
    steps_per_unit: usize,
    integrator: Integrator,
) -> Result<f64> {
    Ok(loop_unitary_with(h, rect, steps_per_unit, integrator)?.distance_from_identity())
}

/// Same rectangle traversed clockwise.
pub fn loop_residual_clockwise(
    h: &HamiltonianHierarchy,
    rect: &Rectangle,
    steps_per_unit: usize,
) -> Result<f64> {
    let (l, k) = rect.axes;
    let (a, b) = rect.sides;
    let forward = two_leg(
        h,
        &rect.corner,
        [(k, b), (l, a)],
        steps_per_unit,
        Integrator::Midpoint,
    )?;
    let other = two_leg(
        h,
        &rect.corner,
        [(l, a), (k, b)],
        steps_per_unit,
        Integrator::Midpoint,
    )?;
    Ok((&other.adjoint() * &forward).distance_from_identity())
}

/// Evolution from the origin to `t` along the canonical path (all of `t_1`
/// first, then `t_2`, …) with a fixed step count per leg.
pub fn canonical_evolution(
    h: &HamiltonianHierarchy,
    t: &TimePoint,
    steps_per_leg: usize,
) -> Result<OperatorMatrix> {
    let mut cur = TimePoint::origin(h.n_times());
    let mut u = OperatorMatrix::identity(h.dim());
    for (axis, &target) in t.coords().iter().enumerate() {
        let seg = evolve_segment(h, axis, &cur, target, steps_per_leg)?;
        u = &seg * &u;
        cur = cur.shifted(axis, target);
    }
    Ok(u)
}

/// Schrödinger compatibility of mixed partials at `t`.
///
/// `Ψ(t)` is `Ψ0` evolved along the canonical path. For each pair `l < k`
/// the two mixed second derivatives implied by the multi-time equations,
/// `D_lk = ∂_l(−(i/ħ) H_k Ψ)` and `D_kl = ∂_k(−(i/ħ) H_l Ψ)`, are formed by
/// central differences over the 3×3 stencil and the largest `‖D_lk − D_kl‖`
/// is returned. It is `O(step²)` for flat hierarchies and `O(‖Z‖)`
/// otherwise.
pub fn mixed_partial_residual(
    h: &HamiltonianHierarchy,
    psi0: &StateVector,
    t: &TimePoint,
    fd_step: f64,
    steps_per_leg: usize,
) -> Result<f64> {
    if !(fd_step >= MIN_FD_STEP) {
        return Err(Error::StepTooSmall(fd_step));
    }
    if psi0.dim() != h.dim() {
        return Err(Error::DimMismatch {
            left: h.dim(),
            right: psi0.dim(),
        });
    }
    if t.coords().iter().any(|&c| c - fd_step < 0.0) {
        return Err(Error::NegativeDuration(
            t.coords().iter().fold(f64::INFINITY, |m, &c| m.min(c)) - fd_step,
        ));
    }
    let flow = |k: usize, at: &TimePoint| -> Result<StateVector> {
        let psi = canonical_evolution(h, at, steps_per_leg)?.apply(psi0)?;
        Ok(h.generator(k, at)
            .apply(&psi)?
            .scale(C64::new(0.0, -1.0 / h.hbar())))
    };
    let mut worst = 0.0_f64;
    for l in 0..h.n_times() {
        for k in (l + 1)..h.n_times() {
            let d_lk = flow(k, &t.shifted(l, fd_step))?
                .sub(&flow(k, &t.shifted(l, -fd_step))?)
                .scale(C64::new(0.5 / fd_step, 0.0));
            let d_kl = flow(l, &t.shifted(k, fd_step))?
                .sub(&flow(l, &t.shifted(k, -fd_step))?)
                .scale(C64::new(0.5 / fd_step, 0.0));
            worst = worst.max(d_lk.distance(&d_kl));
        }
    }
    Ok(worst)
}

/// `‖U_1(T) U_2(T) − U_2(T) U_1(T)‖_F` for flows started at the origin.
pub fn flow_commutator_gap(
    h: &HamiltonianHierarchy,
    l: usize,
    k: usize,
    duration: f64,
    steps: usize,
) -> Result<f64> {
    let origin = TimePoint::origin(h.n_times());
    let ul = evolve_segment(h, l, &origin, duration, steps)?;
    let uk = evolve_segment(h, k, &origin, duration, steps)?;
    Ok((&(&ul * &uk) - &(&uk * &ul)).frobenius_norm())
}

/// JSON record emitted by the report writer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvolutionRecord {
    pub path: StaircasePath,
    pub steps: usize,
    pub defect: f64,
    pub residuals: Vec<f64>,
}

impl From<&EvolutionResult> for EvolutionRecord {
    fn from(r: &EvolutionResult) -> Self {
        Self {
            path: r.path.clone(),
            steps: r.steps_per_unit,
            defect: r.unitarity_defect,
            residuals: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{
        builtin, gauge_transform, mixing_gauge, Basis, Builtin, PhasePolynomial,
    };
    use crate::hilbert::build_oscillator_operators;
    use crate::timelattice::{enumerate_paths, LatticeSpec, Move};
    use std::sync::Arc;

    fn tp(c: &[f64]) -> TimePoint {
        TimePoint::new(c.to_vec()).unwrap()
    }

    fn oscillator_pair(d: usize, w2: f64) -> HamiltonianHierarchy {
        builtin(
            &Builtin::OscillatorPair {
                omega1: 1.0,
                omega2: w2,
            },
            d,
            Basis::Oscillator,
        )
        .unwrap()
    }

    fn gauged(d: usize) -> HamiltonianHierarchy {
        let base = builtin(
            &Builtin::Free { orders: vec![1, 2] },
            d,
            Basis::balanced_grid(d),
        )
        .unwrap();
        let g = mixing_gauge(
            2,
            Basis::balanced_grid(d),
            d,
            PhasePolynomial::new(vec![(1.0, vec![1, 0]), (1.0, vec![0, 2])]),
            None,
        )
        .unwrap();
        gauge_transform(&base, &g).unwrap()
    }

    /// `H(t) = f(t_1) H_0` on axis 0 with `f(t) = 1 + t²`.
    fn scalar_modulated(d: usize) -> (HamiltonianHierarchy, OperatorMatrix) {
        let (q, p) = build_oscillator_operators(d).unwrap();
        let h0 = (&(&p * &p) + &(&q * &q)).scale_real(0.5).hermitian_part();
        let h0c = h0.clone();
        let h1 = h0.clone();
        let gens: Vec<crate::hierarchy::GeneratorFn> = vec![
            Arc::new(move |t: &TimePoint| h0c.scale_real(1.0 + t.coords()[0].powi(2))),
            Arc::new(move |_: &TimePoint| h1.clone()),
        ];
        (
            HamiltonianHierarchy::new("modulated", d, gens, None).unwrap(),
            h0,
        )
    }

    #[test]
    fn autonomous_segment_is_step_independent() {
        let h = oscillator_pair(8, 2.0);
        let t = TimePoint::origin(2);
        let a = evolve_segment(&h, 1, &t, 0.7, 1).unwrap();
        let b = evolve_segment(&h, 1, &t, 0.7, 100).unwrap();
        assert!((&a - &b).frobenius_norm() < 1e-12);
        let z = evolve_segment(&h, 0, &t, 0.0, 5).unwrap();
        assert_eq!(z.distance_from_identity(), 0.0);
        assert!(matches!(
            evolve_segment(&h, 0, &t, -0.1, 5),
            Err(Error::NegativeDuration(_))
        ));
    }

    #[test]
    fn scalar_modulation_matches_quadrature() {
        let (h, h0) = scalar_modulated(6);
        let t0 = tp(&[0.2, 0.0]);
        let dt = 0.8;
        // ∫_{0.2}^{1.0} (1 + t²) dt = 0.8 + (1 − 0.008)/3
        let integral = 0.8 + (1.0 - 0.008) / 3.0;
        let exact = matexp(&h0, C64::new(0.0, -integral)).unwrap();
        let e1 = (&evolve_segment(&h, 0, &t0, dt, 50).unwrap() - &exact).frobenius_norm();
        let e2 = (&evolve_segment(&h, 0, &t0, dt, 100).unwrap() - &exact).frobenius_norm();
        // H(t) commutes with itself at all times, so the midpoint product is
        // exp of the midpoint-rule integral: error ∝ step².
        assert!(e1 < 1e-3, "{e1}");
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn empty_path_is_identity() {
        let h = oscillator_pair(6, 2.0);
        let r = evolve_path(&h, &StaircasePath::empty(2), &[1.0, 1.0], 10).unwrap();
        assert_eq!(r.unitary().distance_from_identity(), 0.0);
        assert_eq!(r.segments, 0);
    }

    #[test]
    fn composition_law_along_one_line() {
        let (h, _) = scalar_modulated(6);
        let widths = [0.1, 0.1];
        let ab = StaircasePath::from_origin(2, vec![Move::new(0, 3)]).unwrap();
        let bc = StaircasePath::new(vec![3, 0], vec![Move::new(0, 4)]).unwrap();
        let ac = StaircasePath::from_origin(2, vec![Move::new(0, 7)]).unwrap();
        let u_ab = evolve_path(&h, &ab, &widths, 100).unwrap();
        let u_bc = evolve_path(&h, &bc, &widths, 100).unwrap();
        let u_ac = evolve_path(&h, &ac, &widths, 100).unwrap();
        let composed = u_bc.unitary() * u_ab.unitary();
        assert!((&composed - u_ac.unitary()).frobenius_norm() < 1e-11);
    }

    #[test]
    fn unitarity_and_reversal() {
        let h = gauged(16);
        let spec = LatticeSpec::new(2, 2, vec![0.3, 0.3]).unwrap();
        for p in enumerate_paths(&spec).unwrap() {
            let r = evolve_path(&h, &p, &spec.widths, 50).unwrap();
            assert!(
                r.unitarity_defect <= r.defect_tolerance(),
                "{}",
                r.unitarity_defect
            );
            let back = evolve_path_reversed(&h, &p, &spec.widths, 50).unwrap();
            assert!((&back - &r.unitary().adjoint()).frobenius_norm() < 1e-11);
        }
    }

    #[test]
    fn free_hierarchy_loops_close() {
        let d = 16;
        let h = builtin(
            &Builtin::Free { orders: vec![1, 2] },
            d,
            Basis::balanced_grid(d),
        )
        .unwrap();
        let rect = Rectangle::new(tp(&[0.1, 0.2]), (0, 1), (0.8, 0.5)).unwrap();
        assert!(loop_residual(&h, &rect, 10).unwrap() <= 1e-10);
    }

    #[test]
    fn loop_orientation_norms_agree() {
        let h = oscillator_pair(12, 2.0);
        let rect = Rectangle::new(TimePoint::origin(2), (0, 1), (0.3, 0.2)).unwrap();
        let a = loop_residual(&h, &rect, 20).unwrap();
        let b = loop_residual_clockwise(&h, &rect, 20).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!(a > 1e-3);
    }

    #[test]
    fn commutativity_witness() {
        let d = 32;
        let free = builtin(
            &Builtin::Free { orders: vec![1, 2] },
            d,
            Basis::balanced_grid(d),
        )
        .unwrap();
        assert!(flow_commutator_gap(&free, 0, 1, 1.0, 1).unwrap() <= 1e-10);
        let pair = oscillator_pair(d, 2.0);
        assert!(flow_commutator_gap(&pair, 0, 1, 1.0, 1).unwrap() > 1e-2);
    }

    #[test]
    fn magnus_is_fourth_order() {
        let h = gauged(8);
        let rect = Rectangle::new(TimePoint::origin(2), (0, 1), (1.0, 1.0)).unwrap();
        let r1 = loop_residual_with(&h, &rect, 10, Integrator::Magnus4).unwrap();
        let r2 = loop_residual_with(&h, &rect, 20, Integrator::Magnus4).unwrap();
        let ratio = r1 / r2;
        assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
        let m1 = loop_residual(&h, &rect, 20).unwrap();
        let m2 = loop_residual(&h, &rect, 40).unwrap();
        assert!((3.5..4.5).contains(&(m1 / m2)));
    }

    #[test]
    fn mixed_partials_flat_vs_nonflat() {
        let d = 64;
        let basis = Basis::Grid { length: 40.0 };
        let free = builtin(&Builtin::Free { orders: vec![1, 2] }, d, basis).unwrap();
        let g = crate::hilbert::build_grid_operators(d, 40.0).unwrap();
        let psi = g.gaussian_packet(0.0, 3.0, 0.0);
        let t = tp(&[0.5, 0.5]);
        let flat = mixed_partial_residual(&free, &psi, &t, 1e-2, 1).unwrap();
        assert!(flat <= 1e-6, "{flat}");
        let flat_half = mixed_partial_residual(&free, &psi, &t, 5e-3, 1).unwrap();
        let ratio = flat / flat_half;
        assert!((3.0..5.0).contains(&ratio), "Richardson ratio {ratio}");

        let pair = builtin(
            &Builtin::OscillatorPair {
                omega1: 1.0,
                omega2: 2.0,
            },
            d,
            basis,
        )
        .unwrap();
        let nonflat = mixed_partial_residual(&pair, &psi, &t, 1e-2, 1).unwrap();
        let pair_flat_ref = flat.max(1e-300);
        assert!(nonflat > 10.0 * pair_flat_ref, "{nonflat} vs {flat}");
        assert!(matches!(
            mixed_partial_residual(&free, &psi, &t, 1e-12, 1),
            Err(Error::StepTooSmall(_))
        ));
    }
}
