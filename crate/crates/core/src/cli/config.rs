//! Scenario configuration: a `key = value` file with sections (TOML), or
//! JSON, followed by command-line overrides.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::timelattice::{MAX_STEPS_2D, MAX_STEPS_3D};

use super::gauge::GaugeSpec;
use super::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Curvature,
    Loop,
    Paths,
    Kernel,
    Closure,
    #[default]
    FullSuite,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Curvature => "curvature",
            ScenarioKind::Loop => "loop",
            ScenarioKind::Paths => "paths",
            ScenarioKind::Kernel => "kernel",
            ScenarioKind::Closure => "closure",
            ScenarioKind::FullSuite => "full-suite",
        }
    }
}

/// Which hierarchies the curvature and loop suites run on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum BuiltinName {
    Free,
    OscillatorPair,
    Gauged,
    #[default]
    All,
}

impl BuiltinName {
    pub fn includes(self, other: BuiltinName) -> bool {
        self == BuiltinName::All || self == other
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HierarchySection {
    pub builtin: BuiltinName,
    /// Hilbert-space dimension; per-hierarchy defaults when absent.
    pub dim: Option<usize>,
    pub gauge_strength: f64,
    /// Extra gauges applied to the free hierarchy, in the grammar of
    /// [`super::gauge`].
    pub gauges: Vec<String>,
    pub hbar: f64,
    /// Sample grid `grid_points × grid_points` over `[grid_lo, grid_hi]²`.
    pub grid_points: usize,
    pub grid_lo: f64,
    pub grid_hi: f64,
}

impl Default for HierarchySection {
    fn default() -> Self {
        Self {
            builtin: BuiltinName::All,
            dim: None,
            gauge_strength: 1.0,
            gauges: Vec::new(),
            hbar: 1.0,
            grid_points: 5,
            grid_lo: 0.0,
            grid_hi: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeSection {
    pub n_times: usize,
    #[serde(rename = "N")]
    pub steps: u32,
}

impl Default for LatticeSection {
    fn default() -> Self {
        Self {
            n_times: 2,
            steps: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OneFormSection {
    pub w1: f64,
    pub w2: f64,
    #[serde(rename = "T1")]
    pub t1: f64,
    #[serde(rename = "T2")]
    pub t2: f64,
    pub hbar: f64,
    pub appendix_e: bool,
    pub oracle_dim: usize,
    pub oracle_length: f64,
    pub quad_per_unit: usize,
}

impl Default for OneFormSection {
    fn default() -> Self {
        Self {
            w1: 1.0,
            w2: 2.0,
            t1: 0.4,
            t2: 0.4,
            hbar: 1.0,
            appendix_e: false,
            oracle_dim: 256,
            oracle_length: 24.0,
            quad_per_unit: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionSection {
    pub steps_per_unit: usize,
}

impl Default for EvolutionSection {
    fn default() -> Self {
        Self {
            steps_per_unit: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub curvature_free: f64,
    pub curvature_flat: f64,
    pub curvature_nonflat_min: f64,
    pub loop_flat: f64,
    pub loop_order_min: f64,
    pub loop_order_max: f64,
    pub loop_area_factor: f64,
    pub loop_scaling: f64,
    pub kernel_spread: f64,
    pub mode_equality: f64,
    pub oracle_gap: f64,
    pub van_vleck: f64,
    pub closure_residual: f64,
    pub loop_action: f64,
    pub path_action: f64,
    pub green_identity: f64,
    pub offshell_min: f64,
    pub gap_ratio_band: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            curvature_free: 1e-12,
            curvature_flat: 1e-7,
            curvature_nonflat_min: 0.1,
            loop_flat: 1e-6,
            loop_order_min: 3.0,
            loop_order_max: 5.0,
            loop_area_factor: 2.0,
            loop_scaling: 0.3,
            kernel_spread: 1e-10,
            mode_equality: 1e-12,
            oracle_gap: 1e-6,
            van_vleck: 1e-9,
            closure_residual: 1e-6,
            loop_action: 1e-8,
            path_action: 1e-7,
            green_identity: 1e-6,
            offshell_min: 0.1,
            gap_ratio_band: 3.0,
        }
    }
}

impl Tolerances {
    fn entries(&self) -> [(&'static str, f64); 18] {
        [
            ("curvature_free", self.curvature_free),
            ("curvature_flat", self.curvature_flat),
            ("curvature_nonflat_min", self.curvature_nonflat_min),
            ("loop_flat", self.loop_flat),
            ("loop_order_min", self.loop_order_min),
            ("loop_order_max", self.loop_order_max),
            ("loop_area_factor", self.loop_area_factor),
            ("loop_scaling", self.loop_scaling),
            ("kernel_spread", self.kernel_spread),
            ("mode_equality", self.mode_equality),
            ("oracle_gap", self.oracle_gap),
            ("van_vleck", self.van_vleck),
            ("closure_residual", self.closure_residual),
            ("loop_action", self.loop_action),
            ("path_action", self.path_action),
            ("green_identity", self.green_identity),
            ("offshell_min", self.offshell_min),
            ("gap_ratio_band", self.gap_ratio_band),
        ]
    }

    /// The tolerance `--tol` overrides for a scenario.
    fn primary_mut(&mut self, kind: ScenarioKind) -> Option<&mut f64> {
        match kind {
            ScenarioKind::Curvature => Some(&mut self.curvature_flat),
            ScenarioKind::Loop => Some(&mut self.loop_flat),
            ScenarioKind::Kernel => Some(&mut self.kernel_spread),
            ScenarioKind::Closure => Some(&mut self.closure_residual),
            ScenarioKind::Paths | ScenarioKind::FullSuite => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("oneform-report"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub seed: u64,
    pub hierarchy: HierarchySection,
    pub lattice: LatticeSection,
    pub oneform: OneFormSection,
    pub evolution: EvolutionSection,
    pub tolerances: Tolerances,
    pub output: OutputSection,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub dim: Option<usize>,
    pub steps: Option<u32>,
    pub n_times: Option<usize>,
    pub w1: Option<f64>,
    pub w2: Option<f64>,
    pub t1: Option<f64>,
    pub t2: Option<f64>,
    pub steps_per_unit: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub builtin: Option<BuiltinName>,
    pub appendix_e: bool,
    pub hbar: Option<f64>,
}

impl ScenarioConfig {
    pub fn parse_str(text: &str, json: bool) -> Result<Self, CliError> {
        if json {
            serde_json::from_str(text).map_err(|e| {
                CliError::Config(format!("line {} column {}: {e}", e.line(), e.column()))
            })
        } else {
            toml::from_str(text).map_err(|e| {
                let line = e
                    .span()
                    .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
                match line {
                    Some(l) => CliError::Config(format!("line {l}: {}", e.message())),
                    None => CliError::Config(e.message().to_string()),
                }
            })
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let json =
            path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
        Self::parse_str(&text, json)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.dim {
            self.hierarchy.dim = Some(v);
        }
        if let Some(v) = o.steps {
            self.lattice.steps = v;
        }
        if let Some(v) = o.n_times {
            self.lattice.n_times = v;
        }
        if let Some(v) = o.w1 {
            self.oneform.w1 = v;
        }
        if let Some(v) = o.w2 {
            self.oneform.w2 = v;
        }
        if let Some(v) = o.t1 {
            self.oneform.t1 = v;
        }
        if let Some(v) = o.t2 {
            self.oneform.t2 = v;
        }
        if let Some(v) = o.steps_per_unit {
            self.evolution.steps_per_unit = v;
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = &o.out {
            self.output.dir = v.clone();
        }
        if let Some(v) = o.builtin {
            self.hierarchy.builtin = v;
        }
        if o.appendix_e {
            self.oneform.appendix_e = true;
        }
        if let Some(v) = o.hbar {
            self.hierarchy.hbar = v;
            self.oneform.hbar = v;
        }
        if let Some(v) = o.tol {
            let kind = self.scenario;
            if let Some(slot) = self.tolerances.primary_mut(kind) {
                *slot = v;
            }
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, why: &str| Err(CliError::Config(format!("{field}: {why}")));
        for (name, value) in self.tolerances.entries() {
            if !(value > 0.0 && value.is_finite()) {
                return bad(
                    &format!("tolerances.{name}"),
                    "must be a positive finite number",
                );
            }
        }
        if self.tolerances.loop_order_min >= self.tolerances.loop_order_max {
            return bad("tolerances.loop_order_min", "must be below loop_order_max");
        }
        if let Some(d) = self.hierarchy.dim {
            if d < 2 {
                return bad("hierarchy.dim", "must be >= 2");
            }
        }
        if !(self.hierarchy.hbar > 0.0) || !(self.oneform.hbar > 0.0) {
            return bad("hbar", "must be positive");
        }
        if !(2..=3).contains(&self.lattice.n_times) {
            return bad("lattice.n_times", "must be 2 or 3");
        }
        let cap = if self.lattice.n_times == 2 {
            MAX_STEPS_2D
        } else {
            MAX_STEPS_3D
        };
        if self.lattice.steps == 0 || self.lattice.steps > cap {
            return bad(
                "lattice.N",
                &format!(
                    "must be in 1..={cap} for {} time directions",
                    self.lattice.n_times
                ),
            );
        }
        for (name, v) in [
            ("oneform.T1", self.oneform.t1),
            ("oneform.T2", self.oneform.t2),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(name, "must be positive");
            }
        }
        for (name, v) in [
            ("oneform.w1", self.oneform.w1),
            ("oneform.w2", self.oneform.w2),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(name, "must be a non-negative frequency");
            }
        }
        if self.evolution.steps_per_unit == 0 {
            return bad("evolution.steps_per_unit", "must be >= 1");
        }
        if self.oneform.oracle_dim < 16 {
            return bad("oneform.oracle_dim", "must be >= 16");
        }
        if self.oneform.quad_per_unit < 2 {
            return bad("oneform.quad_per_unit", "must be >= 2");
        }
        if !(self.hierarchy.gauge_strength.is_finite()) {
            return bad("hierarchy.gauge_strength", "must be finite");
        }
        for (i, g) in self.hierarchy.gauges.iter().enumerate() {
            GaugeSpec::parse(g, 2)
                .map_err(|e| CliError::Config(format!("hierarchy.gauges[{i}]: {}", e.message())))?;
        }
        if self.hierarchy.grid_points < 2 {
            return bad("hierarchy.grid_points", "must be >= 2");
        }
        if !(self.hierarchy.grid_lo < self.hierarchy.grid_hi) {
            return bad("hierarchy.grid_lo", "must be below grid_hi");
        }
        Ok(())
    }
}
