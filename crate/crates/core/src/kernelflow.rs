//! Exact Gaussian propagators for quadratic Lagrangian 1-forms.
//!
//! A kernel component is `K(x″, x′) = A · exp((i/ħ)(a x″² + 2b x″x′ + c x′²))`.
//! Segment kernels are harmonic-oscillator propagators; gluing two kernels is
//! the Gaussian integral over the shared corner point. Every kernel can be
//! checked against the ordered product of grid-operator exponentials.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{build_grid_operators, matexp, OperatorMatrix, StateVector, C64};
use crate::timelattice::{enumerate_paths, LatticeSpec, StaircasePath};

pub const CAUSTIC_TOL: f64 = 1e-12;
pub const DEGENERATE_TOL: f64 = 1e-12;
/// Frequencies below this use the small-`ωT` series.
pub const SMALL_OMEGA: f64 = 1e-6;
/// Boundary amplitude above which the grid oracle flags the grid as too coarse.
pub const BOUNDARY_WARN: f64 = 1e-8;

/// Quadratic coefficients, amplitude and Maslov counter of one degree of freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelComponent {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub amplitude: C64,
    pub phase_index: i64,
}

impl KernelComponent {
    pub fn evaluate(&self, x_end: f64, x_start: f64, hbar: f64) -> C64 {
        let q =
            self.a * x_end * x_end + self.b * 2.0 * x_end * x_start + self.c * x_start * x_start;
        self.amplitude * (C64::new(0.0, 1.0 / hbar) * q).exp()
    }

    /// Euclidean distance between the quadratic-form coefficients.
    pub fn coefficient_distance(&self, other: &Self) -> f64 {
        ((self.a - other.a).norm_sqr()
            + (self.b - other.b).norm_sqr()
            + (self.c - other.c).norm_sqr())
        .sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKernel {
    hbar: f64,
    components: Vec<KernelComponent>,
}

impl GaussianKernel {
    pub fn new(hbar: f64, components: Vec<KernelComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidArgument(
                "kernel needs at least one component".into(),
            ));
        }
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "hbar must be positive, got {hbar}"
            )));
        }
        Ok(Self { hbar, components })
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn n_dof(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[KernelComponent] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &KernelComponent {
        &self.components[i]
    }

    /// Same one-dimensional kernel replicated over `n` independent components.
    pub fn replicated(&self, n: usize) -> Self {
        Self {
            hbar: self.hbar,
            components: (0..n)
                .map(|i| self.components[i % self.components.len()])
                .collect(),
        }
    }

    /// Product over components.
    pub fn evaluate(&self, x_end: &[f64], x_start: &[f64]) -> Result<C64> {
        if x_end.len() != self.n_dof() || x_start.len() != self.n_dof() {
            return Err(Error::DimMismatch {
                left: self.n_dof(),
                right: x_end.len().max(x_start.len()),
            });
        }
        Ok(self
            .components
            .iter()
            .zip(x_end.iter().zip(x_start))
            .map(|(k, (&xe, &xs))| k.evaluate(xe, xs, self.hbar))
            .product())
    }

    /// Largest per-component coefficient distance.
    pub fn coefficient_distance(&self, other: &Self) -> f64 {
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.coefficient_distance(b))
            .fold(0.0, f64::max)
    }

    /// Largest per-component amplitude distance.
    pub fn amplitude_distance(&self, other: &Self) -> f64 {
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| (a.amplitude - b.amplitude).norm())
            .fold(0.0, f64::max)
    }

    /// Total Maslov counter (sum over components).
    pub fn phase_index(&self) -> i64 {
        self.components.iter().map(|c| c.phase_index).sum()
    }
}

/// Propagator of `L = q̇²/2 − ω²q²/2` over duration `T` (one component).
pub fn ho_kernel(omega: f64, duration: f64, hbar: f64) -> Result<GaussianKernel> {
    if duration == 0.0 {
        return Err(Error::IdentityKernel);
    }
    if duration < 0.0 {
        return Err(Error::NegativeDuration(duration));
    }
    if !omega.is_finite() || !duration.is_finite() {
        return Err(Error::NonFinite("oscillator kernel parameters"));
    }
    let w = omega.abs();
    let t = duration;
    let quarter = C64::from_polar(1.0, -PI / 4.0);
    let component = if w < SMALL_OMEGA {
        let x2 = (w * t).powi(2);
        let x_cot = 1.0 - x2 / 3.0 - x2 * x2 / 45.0;
        let x_csc = 1.0 + x2 / 6.0 + 7.0 * x2 * x2 / 360.0;
        let diag = C64::new(x_cot / (2.0 * t), 0.0);
        KernelComponent {
            a: diag,
            b: C64::new(-x_csc / (2.0 * t), 0.0),
            c: diag,
            amplitude: quarter * (x_csc / (2.0 * PI * hbar * t)).sqrt(),
            phase_index: 0,
        }
    } else {
        let (s, co) = (w * t).sin_cos();
        if s.abs() < CAUSTIC_TOL {
            return Err(Error::Caustic {
                omega,
                duration,
                sin_abs: s.abs(),
                segment: None,
            });
        }
        let mu = (w * t / PI).floor() as i64;
        let diag = C64::new(w * co / (2.0 * s), 0.0);
        KernelComponent {
            a: diag,
            b: C64::new(-w / (2.0 * s), 0.0),
            c: diag,
            amplitude: quarter
                * C64::from_polar(1.0, -PI / 2.0 * mu as f64)
                * (w / (2.0 * PI * hbar * s.abs())).sqrt(),
            phase_index: mu,
        }
    };
    GaussianKernel::new(hbar, vec![component])
}

/// `K₂ ∘ K₁`: `K₁` acts first, the corner variable is integrated out.
pub fn compose(k2: &GaussianKernel, k1: &GaussianKernel) -> Result<GaussianKernel> {
    if k1.n_dof() != k2.n_dof() {
        return Err(Error::DimMismatch {
            left: k2.n_dof(),
            right: k1.n_dof(),
        });
    }
    if (k1.hbar - k2.hbar).abs() > 1e-15 * k1.hbar.max(k2.hbar) {
        return Err(Error::InvalidArgument(format!(
            "cannot compose kernels with hbar {} and {}",
            k2.hbar, k1.hbar
        )));
    }
    let hbar = k1.hbar;
    let components = k1
        .components
        .iter()
        .zip(&k2.components)
        .map(|(c1, c2)| {
            let alpha = c1.a + c2.c;
            if alpha.norm() < DEGENERATE_TOL {
                return Err(Error::DegenerateComposition {
                    magnitude: alpha.norm(),
                    segment: None,
                });
            }
            Ok(KernelComponent {
                a: c2.a - c2.b * c2.b / alpha,
                b: -c1.b * c2.b / alpha,
                c: c1.c - c1.b * c1.b / alpha,
                amplitude: c1.amplitude * c2.amplitude * (C64::new(0.0, PI * hbar) / alpha).sqrt(),
                phase_index: c1.phase_index + c2.phase_index + i64::from(alpha.re < 0.0),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    GaussianKernel::new(hbar, components)
}

/// Quadratic Lagrangian 1-form: direction `j` carries `L_j = Σ_c (q̇_c²/2 − ω_j² q_c²/2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticOneForm {
    pub omegas: Vec<f64>,
    pub n_dof: usize,
    pub hbar: f64,
}

impl QuadraticOneForm {
    pub fn new(omegas: Vec<f64>, n_dof: usize) -> Result<Self> {
        if omegas.len() < 2 {
            return Err(Error::InvalidArgument(
                "a 1-form needs at least two time directions".into(),
            ));
        }
        if omegas.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("1-form frequencies"));
        }
        if n_dof == 0 {
            return Err(Error::InvalidArgument("n_dof must be >= 1".into()));
        }
        Ok(Self {
            omegas,
            n_dof,
            hbar: 1.0,
        })
    }

    pub fn with_hbar(mut self, hbar: f64) -> Self {
        self.hbar = hbar;
        self
    }

    pub fn n_times(&self) -> usize {
        self.omegas.len()
    }
}

fn tag_segment(err: Error, index: usize) -> Error {
    match err {
        Error::Caustic {
            omega,
            duration,
            sin_abs,
            ..
        } => Error::Caustic {
            omega,
            duration,
            sin_abs,
            segment: Some(index),
        },
        Error::DegenerateComposition { magnitude, .. } => Error::DegenerateComposition {
            magnitude,
            segment: Some(index),
        },
        other => other,
    }
}

/// Ordered composition of segment kernels along the path's moves.
pub fn kernel_along_path(
    form: &QuadraticOneForm,
    path: &StaircasePath,
    widths: &[f64],
) -> Result<GaussianKernel> {
    if path.n_times() != form.n_times() || widths.len() != form.n_times() {
        return Err(Error::InvalidArgument(format!(
            "path has {} directions, widths {}, 1-form {}",
            path.n_times(),
            widths.len(),
            form.n_times()
        )));
    }
    let mut acc: Option<GaussianKernel> = None;
    for (i, m) in path.moves().iter().enumerate() {
        let dt = m.length as f64 * widths[m.axis];
        if dt == 0.0 {
            continue;
        }
        let seg = ho_kernel(form.omegas[m.axis], dt, form.hbar)
            .map_err(|e| tag_segment(e, i))?
            .replicated(form.n_dof);
        acc = Some(match acc {
            None => seg,
            Some(prev) => compose(&seg, &prev).map_err(|e| tag_segment(e, i))?,
        });
    }
    acc.ok_or(Error::IdentityKernel)
}

/// `Π_c (i S_c/(2πħ))^{1/2}`, with the branch `e^{−iπ/4} e^{−iπμ_c/2}`.
///
/// `maslov[c]` must have the parity fixed by the sign of `s_mixed[c]`
/// (even for negative mixed derivatives).
pub fn van_vleck_prefactor(s_mixed: &[f64], hbar: f64, maslov: &[i64]) -> Result<C64> {
    if s_mixed.len() != maslov.len() {
        return Err(Error::DimMismatch {
            left: s_mixed.len(),
            right: maslov.len(),
        });
    }
    let mut out = C64::new(1.0, 0.0);
    for (&s, &mu) in s_mixed.iter().zip(maslov) {
        if !s.is_finite() {
            return Err(Error::NonFinite("mixed action derivative"));
        }
        if s.abs() < CAUSTIC_TOL {
            return Err(Error::CausticDeterminant(s.abs()));
        }
        if (s < 0.0) != (mu.rem_euclid(2) == 0) {
            return Err(Error::InvalidArgument(format!(
                "Maslov index {mu} inconsistent with mixed derivative sign {s}"
            )));
        }
        let phase = -PI / 4.0 - PI / 2.0 * mu as f64;
        out *= C64::from_polar((s.abs() / (2.0 * PI * hbar)).sqrt(), phase);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Fluctuation spectra along the three simple paths
// ---------------------------------------------------------------------------

/// `A`: all of `t_1` then `t_2`; `B`: `t_2` then `t_1`; `C(τ)`: `t_1` up to
/// `τ`, all of `t_2`, then the rest of `t_1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathKind {
    A,
    B,
    C(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeParams {
    pub t1: f64,
    pub t2: f64,
    pub omega1: f64,
    pub omega2: f64,
}

/// Normalisation of the `t_2` piece of the `C` path basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CPieceNorm {
    /// `√(2/T₂)`: unit norm on the `t_2` leg.
    Orthonormal,
    /// `√(2/T₁)`: the leg picks up a factor `T₂/T₁`.
    FirstAxis,
}

/// `y = α sin(kt) + β cos(kt)` on `[from, to]`, weighed with `ω`.
struct ModePiece {
    alpha: f64,
    beta: f64,
    k: f64,
    from: f64,
    to: f64,
    omega: f64,
}

impl ModePiece {
    /// `∫ (y′² − ω² y²) dt` in closed form.
    fn action(&self) -> f64 {
        let (k, u, v) = (self.k, self.from, self.to);
        let half = (v - u) / 2.0;
        let osc = ((2.0 * k * v).sin() - (2.0 * k * u).sin()) / (4.0 * k);
        let cos2 = half + osc;
        let sin2 = half - osc;
        let sincos = ((k * v).sin().powi(2) - (k * u).sin().powi(2)) / (2.0 * k);
        let (a, b) = (self.alpha, self.beta);
        let kinetic = k * k * (a * a * cos2 - 2.0 * a * b * sincos + b * b * sin2);
        let potential = a * a * sin2 + 2.0 * a * b * sincos + b * b * cos2;
        kinetic - self.omega * self.omega * potential
    }
}

fn mode_pieces(kind: PathKind, p: &ModeParams, n: usize, norm: CPieceNorm) -> Vec<ModePiece> {
    let k1 = n as f64 * PI / p.t1;
    let k2 = n as f64 * PI / p.t2;
    let n1 = (2.0 / p.t1).sqrt();
    let n2 = (2.0 / p.t2).sqrt();
    // Two-term basis restricted to a t_1 leg at fixed t_2 = s, or a t_2 leg at t_1 = s.
    let t1_leg = |s: f64, from: f64, to: f64| ModePiece {
        alpha: n1 * (k2 * s).cos(),
        beta: n2 * (k2 * s).sin(),
        k: k1,
        from,
        to,
        omega: p.omega1,
    };
    let t2_leg = |s: f64, from: f64, to: f64| ModePiece {
        alpha: n2 * (k1 * s).cos(),
        beta: n1 * (k1 * s).sin(),
        k: k2,
        from,
        to,
        omega: p.omega2,
    };
    match kind {
        PathKind::A => vec![t1_leg(0.0, 0.0, p.t1), t2_leg(p.t1, 0.0, p.t2)],
        PathKind::B => vec![t2_leg(0.0, 0.0, p.t2), t1_leg(p.t2, 0.0, p.t1)],
        PathKind::C(tau) => {
            let nc = match norm {
                CPieceNorm::Orthonormal => n2,
                CPieceNorm::FirstAxis => n1,
            };
            // (−1)ⁿ = cos(k₂T₂): the t_2 leg continues the first t_1 piece's phase convention.
            let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
            vec![
                ModePiece {
                    alpha: n1,
                    beta: 0.0,
                    k: k1,
                    from: 0.0,
                    to: tau,
                    omega: p.omega1,
                },
                ModePiece {
                    alpha: nc * sign,
                    beta: 0.0,
                    k: k2,
                    from: 0.0,
                    to: p.t2,
                    omega: p.omega2,
                },
                ModePiece {
                    alpha: n1 * (k2 * p.t2).cos(),
                    beta: 0.0,
                    k: k1,
                    from: tau,
                    to: p.t1,
                    omega: p.omega1,
                },
            ]
        }
    }
}

/// Diagonal second variation `λ_n = Σ_legs ∫ (y_n′² − ω² y_n²)` of mode
/// `n = 1..=cutoff` along the given path.
pub fn mode_eigenvalues(kind: PathKind, params: &ModeParams, cutoff: usize) -> Vec<f64> {
    mode_eigenvalues_with_norm(kind, params, cutoff, CPieceNorm::Orthonormal)
}

pub fn mode_eigenvalues_with_norm(
    kind: PathKind,
    params: &ModeParams,
    cutoff: usize,
    norm: CPieceNorm,
) -> Vec<f64> {
    (1..=cutoff)
        .map(|n| {
            mode_pieces(kind, params, n, norm)
                .iter()
                .map(ModePiece::action)
                .sum()
        })
        .collect()
}

/// `λ_n = −ω₁² − ω₂² + (nπ/T₁)² + (nπ/T₂)²`.
pub fn closed_form_mode(params: &ModeParams, n: usize) -> f64 {
    let x = n as f64 * PI;
    -params.omega1.powi(2) - params.omega2.powi(2)
        + (x / params.t1).powi(2)
        + (x / params.t2).powi(2)
}

/// Index of the first negative mode, if any.
pub fn first_negative_mode(eigenvalues: &[f64]) -> Option<usize> {
    eigenvalues.iter().position(|&l| l < 0.0).map(|i| i + 1)
}

/// Truncated fluctuation factor `Π_n (2πiħ/λ_n)^{1/2}` in log-polar form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluctuationFactor {
    pub log_magnitude: f64,
    pub phase: f64,
    pub negative_modes: usize,
}

pub fn truncated_q_factor(eigenvalues: &[f64], hbar: f64) -> Result<FluctuationFactor> {
    let mut out = FluctuationFactor {
        log_magnitude: 0.0,
        phase: 0.0,
        negative_modes: 0,
    };
    for &l in eigenvalues {
        if l.abs() < CAUSTIC_TOL {
            return Err(Error::CausticDeterminant(l.abs()));
        }
        out.log_magnitude += 0.5 * (2.0 * PI * hbar / l.abs()).ln();
        out.phase += PI / 4.0 * l.signum();
        if l < 0.0 {
            out.negative_modes += 1;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Grid-operator oracle
// ---------------------------------------------------------------------------

/// Probe packets `exp(−(x−x₀)²/(4σ²) + i k₀ x)` used by the oracle.
pub const PROBE_CENTERS: [f64; 3] = [-1.5, 0.0, 1.5];
pub const PROBE_MOMENTA: [f64; 3] = [-1.0, 0.0, 1.0];
pub const PROBE_WIDTH: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    /// Largest relative ℓ² gap over the probe packets.
    pub gap: f64,
    /// Largest edge amplitude relative to the peak.
    pub boundary_amplitude: f64,
    pub grid_too_coarse: bool,
}

/// Analytic `∫ K(x, x′) ψ(x′) dx′` for an unnormalised probe packet.
fn kernel_on_packet(k: &KernelComponent, hbar: f64, x: f64, x0: f64, sigma: f64, k0: f64) -> C64 {
    let alpha0 = 1.0 / (4.0 * sigma * sigma);
    let beta0 = C64::new(x0 / (2.0 * sigma * sigma), k0);
    let gamma0 = -x0 * x0 / (4.0 * sigma * sigma);
    let i_h = C64::new(0.0, 1.0 / hbar);
    let p = alpha0 - i_h * k.c;
    let q = beta0 + i_h * k.b * 2.0 * x;
    k.amplitude
        * (C64::new(PI, 0.0) / p).sqrt()
        * (i_h * k.a * x * x + gamma0 + q * q / (4.0 * p)).exp()
}

/// Ordered product of `exp(−i H_j Δt/ħ)` with `H_j = p²/2 + ω_j² q²/2`
/// on a periodic position grid (`p = ħ k`).
pub fn grid_path_unitary(
    form: &QuadraticOneForm,
    path: &StaircasePath,
    widths: &[f64],
    grid_dim: usize,
    grid_length: f64,
) -> Result<(OperatorMatrix, Vec<f64>)> {
    let g = build_grid_operators(grid_dim, grid_length)?;
    let hbar = form.hbar;
    let kinetic = (&g.momentum * &g.momentum).scale_real(0.5 * hbar * hbar);
    let q2 = (&g.position * &g.position).scale_real(0.5);
    let mut u = OperatorMatrix::identity(grid_dim);
    for m in path.moves() {
        let dt = m.length as f64 * widths[m.axis];
        if dt == 0.0 {
            continue;
        }
        let w = form.omegas[m.axis];
        let h = (&kinetic + &q2.scale_real(w * w)).hermitian_part();
        u = &matexp(&h, C64::new(0.0, -dt / hbar))? * &u;
    }
    Ok((u, g.points))
}

/// Relative gap between the Gaussian kernel and the grid-operator product,
/// measured on the probe packets (first component; components are equal).
pub fn kernel_vs_operator(
    form: &QuadraticOneForm,
    path: &StaircasePath,
    widths: &[f64],
    grid_dim: usize,
    grid_length: f64,
) -> Result<OracleReport> {
    let kernel = kernel_along_path(form, path, widths)?;
    let (u, points) = grid_path_unitary(form, path, widths, grid_dim, grid_length)?;
    let comp = kernel.component(0);
    let mut gap = 0.0_f64;
    let mut boundary = 0.0_f64;
    for &x0 in &PROBE_CENTERS {
        for &k0 in &PROBE_MOMENTA {
            let psi: Vec<C64> = points
                .iter()
                .map(|&x| {
                    C64::from_polar(
                        (-(x - x0).powi(2) / (4.0 * PROBE_WIDTH * PROBE_WIDTH)).exp(),
                        k0 * x,
                    )
                })
                .collect();
            let evolved = u.apply(&StateVector::from_slice(&psi))?;
            let exact: Vec<C64> = points
                .iter()
                .map(|&x| kernel_on_packet(comp, form.hbar, x, x0, PROBE_WIDTH, k0))
                .collect();
            let exact = StateVector::from_slice(&exact);
            gap = gap.max(evolved.distance(&exact) / exact.norm());
            let peak = exact
                .amplitudes()
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            let amps = exact.amplitudes();
            let edge = [amps[0], amps[1], amps[amps.len() - 2], amps[amps.len() - 1]]
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            boundary = boundary.max(edge / peak);
        }
    }
    Ok(OracleReport {
        gap,
        boundary_amplitude: boundary,
        grid_too_coarse: boundary > BOUNDARY_WARN,
    })
}

/// `‖[H₁, H₂] ψ₀‖` for `H_j = p²/2 + ω_j² q²/2` at `ħ = 1` on the oscillator
/// ground state `ψ₀`: `|ω₂² − ω₁²| ‖(qp + pq)ψ₀‖/2 = |ω₂² − ω₁²|/√2`.
pub fn commutator_scale(omega1: f64, omega2: f64) -> f64 {
    (omega2 * omega2 - omega1 * omega1).abs() / std::f64::consts::SQRT_2
}

/// Uniformly weighted family of path kernels.
#[derive(Debug, Clone)]
pub struct KernelMixture {
    pub terms: Vec<(f64, StaircasePath, GaussianKernel)>,
}

impl KernelMixture {
    pub fn evaluate(&self, x_end: &[f64], x_start: &[f64]) -> Result<C64> {
        let mut acc = C64::new(0.0, 0.0);
        for (w, _, k) in &self.terms {
            acc += k.evaluate(x_end, x_start)? * *w;
        }
        Ok(acc)
    }

    /// The common kernel when every term agrees to `tol` in all coefficients
    /// and amplitudes.
    pub fn as_single(&self, tol: f64) -> Option<&GaussianKernel> {
        let first = &self.terms.first()?.2;
        self.terms
            .iter()
            .all(|(_, _, k)| {
                k.coefficient_distance(first) <= tol && k.amplitude_distance(first) <= tol
            })
            .then_some(first)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadReport {
    pub paths: usize,
    /// `max ‖K_Γ − K_Γ′‖` over the quadratic-form coefficients (ħ-independent).
    pub coefficient_spread: f64,
    pub amplitude_spread: f64,
    /// Coefficient spread in units of ħ: the largest phase-coefficient gap of `e^{iS/ħ}`.
    pub phase_gap: f64,
    /// `‖[H₁, H₂]‖ T₁ T₂ / ħ` with the ground-state commutator scale.
    pub commutator_estimate: f64,
}

pub fn sum_over_path_families(
    form: &QuadraticOneForm,
    spec: &LatticeSpec,
) -> Result<(KernelMixture, SpreadReport)> {
    let paths = enumerate_paths(spec)?;
    let weight = 1.0 / paths.len() as f64;
    let terms = paths
        .into_iter()
        .map(|p| {
            let k = kernel_along_path(form, &p, &spec.widths)?;
            Ok((weight, p, k))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut coefficient_spread = 0.0_f64;
    let mut amplitude_spread = 0.0_f64;
    for (i, (_, _, ki)) in terms.iter().enumerate() {
        for (_, _, kj) in &terms[i + 1..] {
            coefficient_spread = coefficient_spread.max(ki.coefficient_distance(kj));
            amplitude_spread = amplitude_spread.max(ki.amplitude_distance(kj));
        }
    }
    let extents = spec.extents();
    let mut commutator = 0.0_f64;
    for l in 0..form.n_times() {
        for k in (l + 1)..form.n_times() {
            commutator = commutator
                .max(commutator_scale(form.omegas[l], form.omegas[k]) * extents[l] * extents[k]);
        }
    }
    let report = SpreadReport {
        paths: terms.len(),
        coefficient_spread,
        amplitude_spread,
        phase_gap: coefficient_spread / form.hbar,
        commutator_estimate: commutator / form.hbar,
    };
    Ok((KernelMixture { terms }, report))
}

/// JSON view of a kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRecord {
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub c: [f64; 2],
    #[serde(rename = "A_re")]
    pub amplitude_re: f64,
    #[serde(rename = "A_im")]
    pub amplitude_im: f64,
    pub phase_index: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    pub path: StaircasePath,
    pub per_dof: Vec<ComponentRecord>,
    pub oracle_gap: Option<f64>,
}

impl KernelReport {
    pub fn new(path: &StaircasePath, kernel: &GaussianKernel, oracle_gap: Option<f64>) -> Self {
        let pair = |z: C64| [z.re, z.im];
        Self {
            path: path.clone(),
            per_dof: kernel
                .components()
                .iter()
                .map(|c| ComponentRecord {
                    a: pair(c.a),
                    b: pair(c.b),
                    c: pair(c.c),
                    amplitude_re: c.amplitude.re,
                    amplitude_im: c.amplitude.im,
                    phase_index: c.phase_index,
                })
                .collect(),
            oracle_gap,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timelattice::Move;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    fn same(k1: &GaussianKernel, k2: &GaussianKernel, tol: f64) -> bool {
        k1.components().iter().zip(k2.components()).all(|(x, y)| {
            close(x.a, y.a, tol)
                && close(x.b, y.b, tol)
                && close(x.c, y.c, tol)
                && close(x.amplitude, y.amplitude, tol)
                && x.phase_index == y.phase_index
        })
    }

    #[test]
    fn free_limit() {
        let k = ho_kernel(1e-9, 0.8, 1.0).unwrap();
        let c = k.component(0);
        assert!(close(c.a, C64::new(1.0 / 1.6, 0.0), 1e-14));
        assert!(close(c.b, C64::new(-1.0 / 1.6, 0.0), 1e-14));
        let expect = (C64::new(0.0, 2.0 * PI * 0.8)).inv().sqrt();
        assert!(close(c.amplitude, expect, 1e-14));
        // series and closed form agree across the switch
        let lo = ho_kernel(0.999e-6, 0.8, 1.0).unwrap();
        let hi = ho_kernel(1.001e-6, 0.8, 1.0).unwrap();
        assert!(same(&lo, &hi, 1e-9));
    }

    #[test]
    fn quarter_period() {
        let k = ho_kernel(1.0, PI / 2.0, 1.0).unwrap();
        let c = k.component(0);
        assert!(c.a.norm() < 1e-15 && c.c.norm() < 1e-15);
        assert!(close(c.b, C64::new(-0.5, 0.0), 1e-15));
        assert!((c.amplitude.norm() - (1.0 / (2.0 * PI)).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn caustic_and_degenerate_inputs() {
        assert!(matches!(
            ho_kernel(1.0, PI, 1.0),
            Err(Error::Caustic { .. })
        ));
        assert!(matches!(
            ho_kernel(1.0, 0.0, 1.0),
            Err(Error::IdentityKernel)
        ));
        // quarter periods: a₁ + c₂ = 0
        let q = ho_kernel(1.0, PI / 2.0, 1.0).unwrap();
        assert!(matches!(
            compose(&q, &q),
            Err(Error::DegenerateComposition { .. })
        ));
        let form = QuadraticOneForm::new(vec![1.0, 1.0], 1).unwrap();
        let path = StaircasePath::from_origin(2, vec![Move::new(0, 1), Move::new(1, 1)]).unwrap();
        match kernel_along_path(&form, &path, &[PI / 2.0, PI / 2.0]) {
            Err(Error::DegenerateComposition { segment, .. }) => assert_eq!(segment, Some(1)),
            other => panic!("{other:?}"),
        }
        match kernel_along_path(&form, &path, &[0.5, PI]) {
            Err(Error::Caustic { segment, .. }) => assert_eq!(segment, Some(1)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            kernel_along_path(&form, &StaircasePath::empty(2), &[1.0, 1.0]),
            Err(Error::IdentityKernel)
        ));
    }

    #[test]
    fn semigroup_across_caustics() {
        for &(w, t1, t2) in &[
            (1.0, 0.7, 0.5),
            (1.0, 2.0, 2.0),
            (1.3, 1.9, 2.6),
            (0.0, 0.3, 0.4),
        ] {
            let lhs = compose(
                &ho_kernel(w, t2, 1.0).unwrap(),
                &ho_kernel(w, t1, 1.0).unwrap(),
            )
            .unwrap();
            let rhs = ho_kernel(w, t1 + t2, 1.0).unwrap();
            assert!(same(&lhs, &rhs, 1e-10), "{w} {t1} {t2}: {lhs:?} vs {rhs:?}");
        }
    }

    #[test]
    fn associativity() {
        let k1 = ho_kernel(1.0, 0.4, 0.5).unwrap();
        let k2 = ho_kernel(2.0, 0.3, 0.5).unwrap();
        let k3 = ho_kernel(0.5, 0.9, 0.5).unwrap();
        let left = compose(&k3, &compose(&k2, &k1).unwrap()).unwrap();
        let right = compose(&compose(&k3, &k2).unwrap(), &k1).unwrap();
        assert!(same(&left, &right, 1e-10));
    }

    #[test]
    fn van_vleck_single_segment() {
        let (w, t) = (1.0, 0.8);
        let k = ho_kernel(w, t, 1.0).unwrap();
        let s_mixed = -w / (w * t).sin();
        let pre = van_vleck_prefactor(&[s_mixed], 1.0, &[0]).unwrap();
        assert!(close(pre, k.component(0).amplitude, 1e-14));
        let free = van_vleck_prefactor(&[-1.0 / 0.8], 1.0, &[0]).unwrap();
        assert!(close(
            free,
            (C64::new(0.0, 2.0 * PI * 0.8)).inv().sqrt(),
            1e-14
        ));
        assert!(matches!(
            van_vleck_prefactor(&[1e-13], 1.0, &[1]),
            Err(Error::CausticDeterminant(_))
        ));
        assert!(van_vleck_prefactor(&[1.0], 1.0, &[0]).is_err());
    }

    #[test]
    fn mode_lists_agree() {
        let p = ModeParams {
            t1: 1.3,
            t2: 0.7,
            omega1: 2.0,
            omega2: 3.5,
        };
        let a = mode_eigenvalues(PathKind::A, &p, 12);
        let b = mode_eigenvalues(PathKind::B, &p, 12);
        let c = mode_eigenvalues(PathKind::C(0.3), &p, 12);
        for n in 0..12 {
            let exact = closed_form_mode(&p, n + 1);
            let scale = exact.abs().max(1.0);
            for v in [a[n], b[n], c[n]] {
                assert!((v - exact).abs() <= 1e-12 * scale, "{n}: {v} vs {exact}");
            }
        }
        let skewed = mode_eigenvalues_with_norm(PathKind::C(0.3), &p, 1, CPieceNorm::FirstAxis)[0];
        let k2 = PI / p.t2;
        let expect =
            (PI / p.t1).powi(2) - p.omega1.powi(2) + p.t2 / p.t1 * (k2 * k2 - p.omega2.powi(2));
        assert!((skewed - expect).abs() < 1e-10);
    }

    #[test]
    fn free_modes_positive_and_negative_scan() {
        let p = ModeParams {
            t1: 2.0,
            t2: 3.0,
            omega1: 0.0,
            omega2: 0.0,
        };
        assert!(mode_eigenvalues(PathKind::A, &p, 20)
            .iter()
            .all(|&l| l > 0.0));
        let p = ModeParams {
            omega1: 4.0,
            omega2: 3.0,
            ..p
        };
        let eig = mode_eigenvalues(PathKind::B, &p, 20);
        let scan = (1..=20).find(|&n| closed_form_mode(&p, n) < 0.0);
        assert_eq!(first_negative_mode(&eig), scan);
        let q = truncated_q_factor(&eig, 1.0).unwrap();
        assert_eq!(q.negative_modes, eig.iter().filter(|&&l| l < 0.0).count());
    }

    #[test]
    fn oracle_single_segment() {
        let form = QuadraticOneForm::new(vec![1.0, 2.0], 1).unwrap();
        let path = StaircasePath::from_origin(2, vec![Move::new(0, 1)]).unwrap();
        let r = kernel_vs_operator(&form, &path, &[0.8, 0.4], 128, 24.0).unwrap();
        assert!(r.gap <= 1e-6, "{r:?}");
        assert!(!r.grid_too_coarse);
    }

    #[test]
    fn degenerate_frequencies_path_independent() {
        let form = QuadraticOneForm::new(vec![1.3, 1.3], 2).unwrap();
        let spec = LatticeSpec::new(2, 3, vec![0.2, 0.3]).unwrap();
        let (mix, report) = sum_over_path_families(&form, &spec).unwrap();
        assert_eq!(report.paths, 20);
        assert!(report.coefficient_spread <= 1e-10 && report.amplitude_spread <= 1e-10);
        let single = mix.as_single(1e-10).unwrap();
        let target = ho_kernel(1.3, 0.6 + 0.9, 1.0).unwrap().replicated(2);
        assert!(same(single, &target, 1e-10));
    }

    #[test]
    fn distinct_frequencies_report_gap() {
        let form = QuadraticOneForm::new(vec![1.0, 2.0], 1).unwrap();
        let spec = LatticeSpec::new(2, 1, vec![0.4, 0.4]).unwrap();
        let (mix, report) = sum_over_path_families(&form, &spec).unwrap();
        assert!(report.coefficient_spread > 1e-3);
        assert!(mix.as_single(1e-10).is_none());
        let (_, _, ka) = &mix.terms[0];
        let (_, _, kb) = &mix.terms[1];
        let x = ([0.3], [-0.2]);
        let avg = (ka.evaluate(&x.0, &x.1).unwrap() + kb.evaluate(&x.0, &x.1).unwrap()) / 2.0;
        assert!(close(mix.evaluate(&x.0, &x.1).unwrap(), avg, 1e-15));
    }

    #[test]
    fn report_serializes() {
        let k = ho_kernel(1.0, 0.5, 1.0).unwrap().replicated(2);
        let p = StaircasePath::from_origin(2, vec![Move::new(0, 1)]).unwrap();
        let json = serde_json::to_string(&KernelReport::new(&p, &k, Some(1e-9))).unwrap();
        assert!(json.contains("\"A_re\"") && json.contains("phase_index"));
    }
}
