//! The verification suites behind each subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::closure::{
    action_along_path, area_integral_closure, closure_scan, eom_residual, loop_action, ChainAction,
    LagrangianOneForm, MultiTimeSolution,
};
use crate::error::Error;
use crate::evolution::{
    flow_commutator_gap, loop_residual, loop_residual_clockwise, loop_residual_with,
    mixed_partial_residual, Integrator, Rectangle,
};
use crate::hierarchy::{
    builtin, gauge_transform, gauged_flat_family, sample_grid, zero_curvature_residual, Basis,
    Builtin, HamiltonianHierarchy, TimePoint, DEFAULT_FD_STEP,
};
use crate::hilbert::{build_grid_operators, commutator, StateVector};
use crate::kernelflow::{
    closed_form_mode, grid_path_unitary, ho_kernel, kernel_along_path, kernel_vs_operator,
    mode_eigenvalues, mode_eigenvalues_with_norm, sum_over_path_families, van_vleck_prefactor,
    CPieceNorm, KernelReport, ModeParams, PathKind, QuadraticOneForm,
};
use crate::timelattice::{
    binomial, brute_force_count, constrained_family, count_paths, dedup_report, enumerate_paths,
    multiindex_from_path, path_from_multiindex, permutation_family_3d, raw_breakpoint_family,
    LatticeSpec, Move, PathFamily, StaircasePath,
};

use super::config::{BuiltinName, ScenarioConfig, ScenarioKind};
use super::gauge::GaugeSpec;
use super::report::{Assertion, CsvTable, Section};
use super::CliError;

/// Residuals at or below this are treated as the round-off floor when
/// estimating convergence order.
const CONVERGENCE_FLOOR: f64 = 1e-11;
/// Sample grid of the classical closure scan.
const CLOSURE_GRID: usize = 9;
/// Side of the largest oscillator-pair rectangle; the scan halves it twice.
const LOOP_BASE_SIDE: f64 = 0.3;
/// ħ values of the path-gap scan.
const HBAR_SCAN: [f64; 3] = [1.0, 0.5, 0.25];
/// Random draws for the mode-list and van Vleck checks.
const RANDOM_DRAWS: usize = 10;
const MODE_CUTOFF: usize = 16;
/// Default truncation of the oscillator pair.
const OSCILLATOR_DIM: usize = 16;

type Outcome = Result<Section, CliError>;

fn ctx(scenario: &'static str) -> impl Fn(Error) -> CliError {
    move |e| CliError::Compute {
        scenario: scenario.to_string(),
        source: e,
    }
}

pub fn run_scenario(kind: ScenarioKind, cfg: &ScenarioConfig) -> Result<Vec<Section>, CliError> {
    match kind {
        ScenarioKind::Curvature => curvature(cfg).map(|s| vec![s]),
        ScenarioKind::Loop => loops(cfg).map(|s| vec![s]),
        ScenarioKind::Paths => paths(cfg).map(|s| vec![s]),
        ScenarioKind::Kernel => kernel(cfg).map(|s| vec![s]),
        ScenarioKind::Closure => closure(cfg).map(|s| vec![s]),
        ScenarioKind::FullSuite => {
            let mut cfg = cfg.clone();
            cfg.oneform.appendix_e = true;
            let kinds = [
                ScenarioKind::Curvature,
                ScenarioKind::Loop,
                ScenarioKind::Paths,
                ScenarioKind::Kernel,
                ScenarioKind::Closure,
            ];
            let results: Vec<Result<Vec<Section>, CliError>> =
                kinds.par_iter().map(|&k| run_scenario(k, &cfg)).collect();
            let mut out = Vec::new();
            for r in results {
                out.extend(r?);
            }
            Ok(out)
        }
    }
}

// ---------------------------------------------------------------------------
// Hierarchy suites
// ---------------------------------------------------------------------------

/// Flat hierarchies selected by the configuration, each with the tolerance
/// its curvature must meet.
fn flat_hierarchies(
    cfg: &ScenarioConfig,
    dim: usize,
) -> crate::Result<Vec<(String, HamiltonianHierarchy, f64)>> {
    let hc = &cfg.hierarchy;
    let basis = Basis::balanced_grid(dim);
    let orders: Vec<u32> = (1..=cfg.lattice.n_times as u32).collect();
    let free = builtin(&Builtin::Free { orders }, dim, basis)?.with_hbar(hc.hbar);
    let mut out = Vec::new();
    if hc.builtin.includes(BuiltinName::Free) {
        out.push(("free".to_string(), free, cfg.tolerances.curvature_free));
    }
    if hc.builtin.includes(BuiltinName::Gauged) {
        for h in gauged_flat_family(dim, hc.gauge_strength)? {
            out.push((h.label().to_string(), h, cfg.tolerances.curvature_flat));
        }
    }
    if !hc.gauges.is_empty() {
        let free2 = builtin(&Builtin::Free { orders: vec![1, 2] }, dim, basis)?.with_hbar(hc.hbar);
        for (i, text) in hc.gauges.iter().enumerate() {
            let spec =
                GaugeSpec::parse(text, 2).map_err(|e| Error::InvalidArgument(e.message()))?;
            let g = spec.build(2, basis, dim)?;
            let label = format!("custom-{}", i + 1);
            out.push((
                label.clone(),
                gauge_transform(&free2, &g)?.with_label(label),
                cfg.tolerances.curvature_flat,
            ));
        }
    }
    Ok(out)
}

fn oscillator_pair(cfg: &ScenarioConfig, dim: usize) -> crate::Result<HamiltonianHierarchy> {
    let o = &cfg.oneform;
    Ok(builtin(
        &Builtin::OscillatorPair {
            omega1: o.w1,
            omega2: o.w2,
        },
        dim,
        Basis::Oscillator,
    )?
    .with_hbar(cfg.hierarchy.hbar))
}

/// Largest residual over all pairs at each grid point.
fn residual_map(h: &HamiltonianHierarchy, pts: &[TimePoint]) -> crate::Result<Vec<f64>> {
    pts.par_iter()
        .map(|t| {
            let mut worst = 0.0_f64;
            for l in 0..h.n_times() {
                for k in (l + 1)..h.n_times() {
                    worst = worst.max(zero_curvature_residual(h, l, k, t, DEFAULT_FD_STEP)?.norm);
                }
            }
            Ok(worst)
        })
        .collect()
}

fn heat_map(file: String, pts: &[TimePoint], values: &[f64]) -> CsvTable {
    let mut t = CsvTable::new(file, &["t1", "t2", "residual"]);
    for (p, v) in pts.iter().zip(values) {
        t.push([p.coords()[0], p.coords()[1], *v]);
    }
    t
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn curvature(cfg: &ScenarioConfig) -> Outcome {
    let err = ctx("curvature");
    let hc = &cfg.hierarchy;
    let mut s = Section::new("curvature");
    let n = hc.grid_points;
    s.info(
        "grid",
        format!("{n}x{n} over [{}, {}]^2", hc.grid_lo, hc.grid_hi),
    );
    let grid_dim = hc.dim.unwrap_or(32);
    for (label, h, tol) in flat_hierarchies(cfg, grid_dim).map_err(&err)? {
        let pts = sample_grid(h.n_times(), n, hc.grid_lo, hc.grid_hi);
        let values = residual_map(&h, &pts).map_err(&err)?;
        s.check(Assertion::at_most(
            format!("{label}: max curvature residual"),
            max_of(&values),
            tol,
        ));
        let mid = &pts[pts.len() / 2];
        let comm = commutator(&h.generator(0, mid), &h.generator(1, mid)).map_err(&err)?;
        s.info(format!("{label}: dim"), h.dim());
        s.info(format!("{label}: autonomous"), h.is_autonomous());
        s.info(
            format!("{label}: commutator norm at grid centre"),
            comm.frobenius_norm(),
        );
        s.table(heat_map(format!("curvature_{label}.csv"), &pts, &values));
    }
    if hc.builtin.includes(BuiltinName::OscillatorPair) {
        let dim = hc.dim.unwrap_or(OSCILLATOR_DIM);
        let h = oscillator_pair(cfg, dim).map_err(&err)?;
        let pts = sample_grid(2, n, hc.grid_lo, hc.grid_hi);
        let values = residual_map(&h, &pts).map_err(&err)?;
        s.check(Assertion::at_least(
            "oscillator-pair: min curvature residual",
            min_of(&values),
            cfg.tolerances.curvature_nonflat_min,
        ));
        s.info("oscillator-pair: dim", dim);
        s.info("oscillator-pair: omegas", [cfg.oneform.w1, cfg.oneform.w2]);
        s.table(heat_map(
            "curvature_oscillator-pair.csv".into(),
            &pts,
            &values,
        ));
    }
    Ok(s)
}

pub fn loops(cfg: &ScenarioConfig) -> Outcome {
    let err = ctx("loop");
    let tol = &cfg.tolerances;
    let spu = cfg.evolution.steps_per_unit;
    let dim = cfg.hierarchy.dim.unwrap_or(32);
    let mut s = Section::new("loop");
    s.info("steps_per_unit", spu);
    let unit = Rectangle::new(TimePoint::origin(2), (0, 1), (1.0, 1.0)).map_err(&err)?;
    let mut convergence = CsvTable::new(
        "loop_convergence.csv",
        &["hierarchy", "steps_per_unit", "residual", "ratio"],
    );
    let flat = flat_hierarchies(cfg, dim).map_err(&err)?;
    // (residual, Magnus residual, step-halving ladder) per hierarchy.
    type Study = (f64, f64, Vec<(usize, f64)>);
    let studies: Vec<crate::Result<Study>> = flat
        .par_iter()
        .map(|(_, h, _)| {
            let r = loop_residual(h, &unit, spu)?;
            let magnus = loop_residual_with(h, &unit, spu, Integrator::Magnus4)?;
            let ladder = if h.is_autonomous() {
                Vec::new()
            } else {
                [8, 4, 2, 1]
                    .iter()
                    .map(|&div| {
                        let n = (spu / div).max(1);
                        let res = if n == spu {
                            r
                        } else {
                            loop_residual(h, &unit, n)?
                        };
                        Ok((n, res))
                    })
                    .collect::<crate::Result<Vec<_>>>()?
            };
            Ok((r, magnus, ladder))
        })
        .collect();
    for ((label, _, _), study) in flat.iter().zip(studies) {
        let (r, magnus, ladder) = study.map_err(&err)?;
        s.check(Assertion::at_most(
            format!("{label}: unit-square loop residual"),
            r,
            tol.loop_flat,
        ));
        s.info(
            format!("{label}: unit-square loop residual (magnus4)"),
            magnus,
        );
        let mut prev: Option<f64> = None;
        for &(n, res) in &ladder {
            let ratio = prev.map(|p| p / res);
            convergence.push([
                label.clone(),
                n.to_string(),
                res.to_string(),
                ratio.map_or(String::new(), |x| x.to_string()),
            ]);
            prev = Some(res);
        }
        if let [.., (_, coarse), (_, fine)] = ladder[..] {
            if fine > CONVERGENCE_FLOOR {
                let ratio = coarse / fine;
                s.check(Assertion::at_least(
                    format!("{label}: step-halving residual ratio"),
                    ratio,
                    tol.loop_order_min,
                ));
                s.check(Assertion::at_most(
                    format!("{label}: step-halving residual ratio"),
                    ratio,
                    tol.loop_order_max,
                ));
            } else {
                s.info(format!("{label}: convergence"), "at round-off floor");
            }
        }
    }
    if !convergence.rows.is_empty() {
        s.table(convergence);
    }

    if cfg.hierarchy.builtin.includes(BuiltinName::OscillatorPair) {
        let osc_dim = cfg.hierarchy.dim.unwrap_or(OSCILLATOR_DIM);
        let h = oscillator_pair(cfg, osc_dim).map_err(&err)?;
        let base = Rectangle::new(
            TimePoint::origin(2),
            (0, 1),
            (LOOP_BASE_SIDE, LOOP_BASE_SIDE),
        )
        .map_err(&err)?;
        let lambdas = [1.0, 0.5, 0.25];
        let rows: Vec<crate::Result<(f64, f64, f64)>> = lambdas
            .par_iter()
            .map(|&lam| {
                let rect = base.scaled(lam);
                let z = zero_curvature_residual(&h, 0, 1, &rect.center(), DEFAULT_FD_STEP)?.norm;
                Ok((
                    lam,
                    loop_residual(&h, &rect, spu)?,
                    rect.area() * z / h.hbar(),
                ))
            })
            .collect();
        let rows = rows
            .into_iter()
            .collect::<crate::Result<Vec<_>>>()
            .map_err(&err)?;
        let mut table = CsvTable::new("loop_scaling.csv", &["lambda", "residual", "prediction"]);
        for &(lam, res, pred) in &rows {
            table.push([lam, res, pred]);
            let ratio = res / pred;
            s.check(Assertion::at_most(
                format!(
                    "oscillator-pair: loop residual vs area*|Z|, area {}",
                    base.scaled(lam).area()
                ),
                ratio.max(1.0 / ratio),
                tol.loop_area_factor,
            ));
        }
        let normalised: Vec<f64> = rows.iter().map(|(lam, res, _)| res / (lam * lam)).collect();
        let n = normalised.len();
        s.check(Assertion::at_most(
            "oscillator-pair: relative change of residual/lambda^2 at the smallest lambda",
            (normalised[n - 1] / normalised[n - 2] - 1.0).abs(),
            tol.loop_scaling,
        ));
        s.table(table);
        let ccw = loop_residual(&h, &base, spu).map_err(&err)?;
        let cw = loop_residual_clockwise(&h, &base, spu).map_err(&err)?;
        s.info("oscillator-pair: dim", osc_dim);
        s.info(
            "oscillator-pair: clockwise minus counter-clockwise residual",
            cw - ccw,
        );
        s.info(
            "oscillator-pair: flow commutator gap at T = 1",
            flow_commutator_gap(&h, 0, 1, 1.0, 1).map_err(&err)?,
        );

        if cfg.hierarchy.builtin.includes(BuiltinName::Free) {
            let free = builtin(
                &Builtin::Free { orders: vec![1, 2] },
                dim,
                Basis::balanced_grid(dim),
            )
            .map_err(&err)?
            .with_hbar(cfg.hierarchy.hbar);
            let g = build_grid_operators(dim, (2.0 * std::f64::consts::PI * dim as f64).sqrt())
                .map_err(&err)?;
            let t = TimePoint::new(vec![0.5, 0.5]).map_err(&err)?;
            let flat =
                mixed_partial_residual(&free, &g.gaussian_packet(0.0, 1.0, 0.0), &t, 1e-2, 50)
                    .map_err(&err)?;
            let curved = mixed_partial_residual(&h, &StateVector::basis(osc_dim, 0), &t, 1e-2, 50)
                .map_err(&err)?;
            s.info("free: mixed-partial residual", flat);
            s.info("oscillator-pair: mixed-partial residual", curved);
            s.check(Assertion::at_least(
                "mixed-partial contrast oscillator-pair / free",
                curved / flat.max(f64::MIN_POSITIVE),
                10.0,
            ));
        }
    }
    Ok(s)
}

// ---------------------------------------------------------------------------
// Path combinatorics
// ---------------------------------------------------------------------------

fn expected_count(n_times: usize, steps: u32) -> u128 {
    // Multinomial (n·N)! / (N!)^n as a product of binomials.
    let n = steps as u128;
    (1..n_times as u128)
        .map(|j| binomial((j + 1) * n, n))
        .product()
}

pub fn paths(cfg: &ScenarioConfig) -> Outcome {
    let err = ctx("paths");
    let mut s = Section::new("paths");
    let (n_times, steps) = (cfg.lattice.n_times, cfg.lattice.steps);
    let spec = LatticeSpec::unit(n_times, steps).map_err(&err)?;
    let first = enumerate_paths(&spec).map_err(&err)?;
    let second = enumerate_paths(&spec).map_err(&err)?;
    let expected = expected_count(n_times, steps) as f64;
    s.check(Assertion::equals(
        "enumerated paths",
        first.len() as f64,
        expected,
        0.0,
    ));
    s.check(Assertion::equals(
        "closed-form count",
        count_paths(&spec) as f64,
        expected,
        0.0,
    ));
    s.check(Assertion::equals(
        "brute-force count",
        brute_force_count(&spec).map_err(&err)? as f64,
        expected,
        0.0,
    ));
    let reordered = first.iter().zip(&second).filter(|(a, b)| a != b).count();
    s.check(Assertion::equals(
        "ordering changes between runs",
        reordered as f64,
        0.0,
        0.0,
    ));

    let enumerated = PathFamily::unweighted("enumerated", n_times, steps, first.clone());
    let mut families = vec![enumerated];
    if n_times == 2 {
        families.push(
            PathFamily::union(
                "multi-index",
                &[
                    constrained_family(&spec, 0).map_err(&err)?,
                    constrained_family(&spec, 1).map_err(&err)?,
                ],
            )
            .map_err(&err)?,
        );
        let broken = first
            .iter()
            .filter(|p| {
                multiindex_from_path(&spec, p)
                    .and_then(|idx| path_from_multiindex(&spec, &idx))
                    .map_or(true, |back| back != **p)
            })
            .count();
        s.check(Assertion::equals(
            "multi-index round-trip failures",
            broken as f64,
            0.0,
            0.0,
        ));
        let raw = dedup_report(&[raw_breakpoint_family(steps, 1, 0).map_err(&err)?]);
        s.info(
            "raw single-corner family histogram",
            &raw.families[0].histogram,
        );
    } else {
        let perms = (0..n_times)
            .map(|a| permutation_family_3d(&spec, a))
            .collect::<crate::Result<Vec<_>>>()
            .map_err(&err)?;
        let union = PathFamily::union("permutation-measure", &perms).map_err(&err)?;
        let r = dedup_report(&[union]);
        s.check(Assertion::equals(
            "permutation-measure weighted multiplicity all ones",
            r.families[0].weighted_all_ones as u8 as f64,
            1.0,
            0.0,
        ));
        s.info("permutation-measure histogram", &r.families[0].histogram);
    }
    let report = dedup_report(&families);
    for f in &report.families {
        let worst = f.histogram.keys().copied().max().unwrap_or(0);
        s.check(Assertion::equals(
            format!("{}: max multiplicity", f.name),
            worst as f64,
            1.0,
            0.0,
        ));
        s.check(Assertion::equals(
            format!("{}: missing paths", f.name),
            f.missing_paths as f64,
            0.0,
            0.0,
        ));
    }
    s.info("dedup", &report);
    s.info(
        "paths",
        first.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
    );
    Ok(s)
}

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

fn two_time_spec(cfg: &ScenarioConfig, steps: u32) -> crate::Result<LatticeSpec> {
    let o = &cfg.oneform;
    LatticeSpec::new(2, steps, vec![o.t1 / steps as f64, o.t2 / steps as f64])
}

fn simple_path(first: usize, steps: u32) -> crate::Result<StaircasePath> {
    StaircasePath::from_origin(
        2,
        vec![Move::new(first, steps), Move::new(1 - first, steps)],
    )
}

fn zigzag(steps: u32) -> crate::Result<StaircasePath> {
    let moves = (0..2 * steps as usize)
        .map(|i| Move::new(i % 2, 1))
        .collect();
    StaircasePath::from_origin(2, moves)
}

fn fluctuation_modes(
    cfg: &ScenarioConfig,
    s: &mut Section,
    rng: &mut ChaCha8Rng,
) -> Result<(), CliError> {
    let err = ctx("kernel");
    let tol = &cfg.tolerances;
    let mut worst_pair = 0.0_f64;
    let mut worst_closed = 0.0_f64;
    let mut worst_first_axis = 0.0_f64;
    for _ in 0..RANDOM_DRAWS {
        let p = ModeParams {
            t1: rng.random_range(0.2..2.0),
            t2: rng.random_range(0.2..2.0),
            omega1: rng.random_range(0.0..4.0),
            omega2: rng.random_range(0.0..4.0),
        };
        let tau = rng.random_range(0.05..0.95) * p.t1;
        let a = mode_eigenvalues(PathKind::A, &p, MODE_CUTOFF);
        let b = mode_eigenvalues(PathKind::B, &p, MODE_CUTOFF);
        let c = mode_eigenvalues(PathKind::C(tau), &p, MODE_CUTOFF);
        let c_first =
            mode_eigenvalues_with_norm(PathKind::C(tau), &p, MODE_CUTOFF, CPieceNorm::FirstAxis);
        for n in 0..MODE_CUTOFF {
            let exact = closed_form_mode(&p, n + 1);
            let scale = exact.abs().max(1.0);
            worst_pair = worst_pair.max((a[n] - b[n]).abs().max((a[n] - c[n]).abs()) / scale);
            worst_closed = worst_closed.max(
                [a[n], b[n], c[n]]
                    .iter()
                    .map(|v| (v - exact).abs())
                    .fold(0.0, f64::max)
                    / scale,
            );
            worst_first_axis = worst_first_axis.max((c_first[n] - a[n]).abs() / scale);
        }
    }
    s.check(Assertion::at_most(
        "mode lists A/B/C: max relative difference",
        worst_pair,
        tol.mode_equality,
    ));
    s.check(Assertion::at_most(
        "mode lists vs closed form: max relative difference",
        worst_closed,
        tol.mode_equality,
    ));
    s.info(
        "mode lists: C path with t2 piece normalised by T1",
        worst_first_axis,
    );

    let w = cfg.oneform.w1;
    let form = QuadraticOneForm::new(vec![w, w], 1)
        .map_err(&err)?
        .with_hbar(cfg.oneform.hbar);
    for steps in 1..=4u32 {
        let spec = two_time_spec(cfg, steps).map_err(&err)?;
        let (mix, report) = sum_over_path_families(&form, &spec).map_err(&err)?;
        s.check(Assertion::at_most(
            format!(
                "equal frequencies, N = {steps}: kernel spread over {} paths",
                report.paths
            ),
            report.coefficient_spread.max(report.amplitude_spread),
            tol.kernel_spread,
        ));
        let target =
            ho_kernel(w, cfg.oneform.t1 + cfg.oneform.t2, cfg.oneform.hbar).map_err(&err)?;
        let k = &mix.terms[0].2;
        s.check(Assertion::at_most(
            format!("equal frequencies, N = {steps}: distance to single-oscillator kernel"),
            k.coefficient_distance(&target)
                .max(k.amplitude_distance(&target)),
            tol.kernel_spread,
        ));
    }
    Ok(())
}

fn oracle(
    cfg: &ScenarioConfig,
    form: &QuadraticOneForm,
    spec: &LatticeSpec,
    s: &mut Section,
) -> Result<(), CliError> {
    let err = ctx("kernel");
    let o = &cfg.oneform;
    let steps = spec.steps;
    let mut probes = vec![
        StaircasePath::from_origin(2, vec![Move::new(0, steps)]).map_err(&err)?,
        StaircasePath::from_origin(2, vec![Move::new(1, steps)]).map_err(&err)?,
        simple_path(0, steps).map_err(&err)?,
        simple_path(1, steps).map_err(&err)?,
    ];
    if steps > 1 {
        probes.push(zigzag(steps).map_err(&err)?);
    }
    let results: Vec<_> = probes
        .par_iter()
        .map(|p| kernel_vs_operator(form, p, &spec.widths, o.oracle_dim, o.oracle_length))
        .collect();
    for (p, r) in probes.iter().zip(results) {
        match r {
            Ok(r) => {
                s.check(Assertion::at_most(
                    format!("oracle gap, path {p}"),
                    r.gap,
                    cfg.tolerances.oracle_gap,
                ));
                if r.grid_too_coarse {
                    s.info(
                        format!("oracle boundary amplitude, path {p}"),
                        r.boundary_amplitude,
                    );
                }
            }
            Err(e @ (Error::Caustic { .. } | Error::DegenerateComposition { .. })) => {
                s.info(format!("oracle skipped, path {p}"), e.to_string());
            }
            Err(e) => return Err(err(e)),
        }
    }
    s.info(
        "oracle grid",
        format!("d = {}, L = {}", o.oracle_dim, o.oracle_length),
    );
    Ok(())
}

fn van_vleck(
    cfg: &ScenarioConfig,
    form: &QuadraticOneForm,
    s: &mut Section,
    rng: &mut ChaCha8Rng,
) -> Result<(), CliError> {
    let err = ctx("kernel");
    let o = &cfg.oneform;
    let mut checked = 0;
    let mut attempts = 0;
    let mut worst = 0.0_f64;
    let mut index_mismatch = 0;
    while checked < RANDOM_DRAWS && attempts < 50 * RANDOM_DRAWS {
        attempts += 1;
        let steps = rng.random_range(1..=4u32);
        let spec = two_time_spec(cfg, steps).map_err(&err)?;
        let all = enumerate_paths(&spec).map_err(&err)?;
        let path = &all[rng.random_range(0..all.len())];
        let kernel = match kernel_along_path(form, path, &spec.widths) {
            Ok(k) => k,
            Err(Error::Caustic { .. } | Error::DegenerateComposition { .. }) => continue,
            Err(e) => return Err(err(e)),
        };
        let chain = match ChainAction::along_path(&form.omegas, path, &spec.widths, None) {
            Ok(c) => c,
            Err(Error::Caustic { .. }) => continue,
            Err(e) => return Err(err(e)),
        };
        let (mixed, stationary) = match (chain.mixed_derivative(0.5), chain.stationary(0.0, 0.0)) {
            (Ok(m), Ok(st)) => (m, st),
            (Err(Error::DegenerateComposition { .. }), _)
            | (_, Err(Error::DegenerateComposition { .. })) => continue,
            (Err(e), _) | (_, Err(e)) => return Err(err(e)),
        };
        let pre = match van_vleck_prefactor(&[mixed], o.hbar, &[stationary.morse_index]) {
            Ok(p) => p,
            Err(Error::CausticDeterminant(_)) => continue,
            Err(e) => return Err(err(e)),
        };
        if stationary.morse_index != kernel.phase_index() {
            index_mismatch += 1;
        }
        worst = worst.max((pre - kernel.component(0).amplitude).norm());
        checked += 1;
    }
    s.check(Assertion::equals(
        "van Vleck: caustic-free paths checked",
        checked as f64,
        RANDOM_DRAWS as f64,
        0.0,
    ));
    s.check(Assertion::at_most(
        "van Vleck: max |prefactor - kernel amplitude|",
        worst,
        cfg.tolerances.van_vleck,
    ));
    s.check(Assertion::equals(
        "van Vleck: Morse/phase index mismatches",
        index_mismatch as f64,
        0.0,
        0.0,
    ));
    Ok(())
}

fn hbar_scan(cfg: &ScenarioConfig, spec: &LatticeSpec, s: &mut Section) -> Result<(), CliError> {
    let err = ctx("kernel");
    let o = &cfg.oneform;
    let a = simple_path(0, spec.steps).map_err(&err)?;
    let b = simple_path(1, spec.steps).map_err(&err)?;
    let mut hbars = HBAR_SCAN.to_vec();
    hbars.sort_by(f64::total_cmp);
    let rows: Vec<crate::Result<[f64; 6]>> = hbars
        .par_iter()
        .map(|&hbar| {
            let form = QuadraticOneForm::new(vec![o.w1, o.w2], 1)?.with_hbar(hbar);
            let (_, r) = sum_over_path_families(&form, spec)?;
            let (ua, points) =
                grid_path_unitary(&form, &a, &spec.widths, o.oracle_dim, o.oracle_length)?;
            let (ub, _) =
                grid_path_unitary(&form, &b, &spec.widths, o.oracle_dim, o.oracle_length)?;
            let g = build_grid_operators(points.len(), o.oracle_length)?;
            let psi = g.gaussian_packet(0.0, (hbar / 2.0).sqrt(), 0.0);
            let operator_gap = ua.apply(&psi)?.distance(&ub.apply(&psi)?);
            Ok([
                hbar,
                r.coefficient_spread,
                r.phase_gap,
                r.commutator_estimate,
                r.phase_gap / r.commutator_estimate,
                operator_gap,
            ])
        })
        .collect();
    let rows = rows
        .into_iter()
        .collect::<crate::Result<Vec<_>>>()
        .map_err(&err)?;
    let mut table = CsvTable::new(
        "hbar_scan.csv",
        &[
            "hbar",
            "coefficient_spread",
            "phase_gap",
            "commutator_estimate",
            "ratio",
            "operator_gap",
        ],
    );
    for r in &rows {
        table.push(*r);
    }
    s.table(table);
    let ratios: Vec<f64> = rows.iter().map(|r| r[4]).collect();
    s.check(Assertion::at_least(
        "smallest path gap over the hbar scan vs degenerate-case spread",
        min_of(&rows.iter().map(|r| r[2]).collect::<Vec<_>>()),
        cfg.tolerances.kernel_spread,
    ));
    s.check(Assertion::at_most(
        "gap / commutator estimate: max/min over the hbar scan",
        max_of(&ratios) / min_of(&ratios),
        cfg.tolerances.gap_ratio_band,
    ));
    Ok(())
}

pub fn kernel(cfg: &ScenarioConfig) -> Outcome {
    let err = ctx("kernel");
    let o = &cfg.oneform;
    let tol = &cfg.tolerances;
    let mut s = Section::new("kernel");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let spec = two_time_spec(cfg, cfg.lattice.steps).map_err(&err)?;
    let form = QuadraticOneForm::new(vec![o.w1, o.w2], 1)
        .map_err(&err)?
        .with_hbar(o.hbar);

    let (mix, spread) = sum_over_path_families(&form, &spec).map_err(&err)?;
    s.info("path family", spread);
    if o.w1 == o.w2 {
        s.check(Assertion::at_most(
            "kernel spread over all paths",
            spread.coefficient_spread.max(spread.amplitude_spread),
            tol.kernel_spread,
        ));
        let target = ho_kernel(o.w1, o.t1 + o.t2, o.hbar).map_err(&err)?;
        let k = &mix.terms[0].2;
        s.check(Assertion::at_most(
            "distance to single-oscillator kernel",
            k.coefficient_distance(&target)
                .max(k.amplitude_distance(&target)),
            tol.kernel_spread,
        ));
    } else {
        hbar_scan(cfg, &spec, &mut s)?;
    }
    let records: Vec<KernelReport> = [simple_path(0, spec.steps), simple_path(1, spec.steps)]
        .into_iter()
        .map(|p| {
            let p = p?;
            Ok(KernelReport::new(
                &p,
                &kernel_along_path(&form, &p, &spec.widths)?,
                None,
            ))
        })
        .collect::<crate::Result<_>>()
        .map_err(&err)?;
    s.info("kernels", records);

    if o.appendix_e {
        fluctuation_modes(cfg, &mut s, &mut rng)?;
    }
    oracle(cfg, &form, &spec, &mut s)?;
    van_vleck(cfg, &form, &mut s, &mut rng)?;
    Ok(s)
}

// ---------------------------------------------------------------------------
// Classical closure
// ---------------------------------------------------------------------------

pub fn closure(cfg: &ScenarioConfig) -> Outcome {
    let err = ctx("closure");
    let o = &cfg.oneform;
    let tol = &cfg.tolerances;
    let mut s = Section::new("closure");
    let unit = Rectangle::new(TimePoint::origin(2), (0, 1), (1.0, 1.0)).map_err(&err)?;
    let steps = cfg.lattice.steps;
    let spec = LatticeSpec::new(2, steps, vec![1.0 / steps as f64; 2]).map_err(&err)?;
    let all = enumerate_paths(&spec).map_err(&err)?;
    let families = [
        (
            "symmetric",
            LagrangianOneForm::quadratic(vec![o.w1, o.w1]).map_err(&err)?,
            MultiTimeSolution::symmetric(o.w1, 1.0, 2).map_err(&err)?,
            vec![o.w1, o.w1],
        ),
        (
            "circular",
            LagrangianOneForm::quadratic(vec![o.w1, o.w2]).map_err(&err)?,
            MultiTimeSolution::circular(vec![o.w1, o.w2], 1.0).map_err(&err)?,
            vec![o.w1, o.w2],
        ),
    ];
    for (name, form, sol, omegas) in &families {
        let scan =
            closure_scan(form, sol, CLOSURE_GRID, 0.0, 1.0, DEFAULT_FD_STEP).map_err(&err)?;
        let worst = scan.iter().map(|r| r.2).fold(0.0, f64::max);
        s.check(Assertion::at_most(
            format!("{name}: max closure residual"),
            worst,
            tol.closure_residual,
        ));
        let mut table = CsvTable::new(format!("closure_{name}.csv"), &["t1", "t2", "residual"]);
        for (a, b, r) in &scan {
            table.push([*a, *b, *r]);
        }
        s.table(table);
        let looped = loop_action(form, sol, &unit, o.quad_per_unit).map_err(&err)?;
        s.check(Assertion::at_most(
            format!("{name}: |unit-square loop action|"),
            looped.abs(),
            tol.loop_action,
        ));
        let actions = all
            .iter()
            .map(|p| action_along_path(form, sol, p, &spec.widths, o.quad_per_unit))
            .collect::<crate::Result<Vec<_>>>()
            .map_err(&err)?;
        s.check(Assertion::at_most(
            format!(
                "{name}: max |S_path - S_path'| over {} paths",
                actions.len()
            ),
            max_of(&actions) - min_of(&actions),
            tol.path_action,
        ));
        let eom = eom_residual(sol, omegas, &[0.5, 0.5], DEFAULT_FD_STEP).map_err(&err)?;
        s.info(
            format!("{name}: equation-of-motion residual at (0.5, 0.5)"),
            eom,
        );
    }

    let form = LagrangianOneForm::quadratic(vec![o.w1, o.w2]).map_err(&err)?;
    let off = MultiTimeSolution::product_field();
    let scan = closure_scan(&form, &off, CLOSURE_GRID, 0.0, 1.0, DEFAULT_FD_STEP).map_err(&err)?;
    let worst = scan.iter().map(|r| r.2).fold(0.0, f64::max);
    s.check(Assertion::at_least(
        "off-shell q = t1 t2: max closure residual",
        worst,
        tol.offshell_min,
    ));
    let mut table = CsvTable::new("closure_off-shell.csv", &["t1", "t2", "residual"]);
    for (a, b, r) in &scan {
        table.push([*a, *b, *r]);
    }
    s.table(table);
    let looped = loop_action(&form, &off, &unit, o.quad_per_unit).map_err(&err)?;
    let area = area_integral_closure(&form, &off, &unit, o.quad_per_unit, DEFAULT_FD_STEP)
        .map_err(&err)?;
    s.info("off-shell: loop action", looped);
    s.check(Assertion::at_most(
        "off-shell: |loop action - area integral|",
        (looped - area).abs(),
        tol.green_identity,
    ));

    if o.w1 != o.w2 {
        let wave =
            MultiTimeSolution::cosine_wave(vec![o.w1, o.w2], vec![1.0], vec![0.0]).map_err(&err)?;
        let scan =
            closure_scan(&form, &wave, CLOSURE_GRID, 0.0, 1.0, DEFAULT_FD_STEP).map_err(&err)?;
        s.info(
            "single wave with distinct frequencies: max closure residual",
            scan.iter().map(|r| r.2).fold(0.0, f64::max),
        );
    }
    Ok(s)
}
