//! TOML run configuration. Every key carries its unit in the name; unknown
//! keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use ioncool::optimize::{gamma_for_rabi_khz, RABI_GAMMAS};
use ioncool::potential::PotentialFamily;
use ioncool::Method;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid override '{0}': expected key.path=value")]
    Override(String),
    #[error("invalid value for {key}: {reason}")]
    Value { key: &'static str, reason: String },
}

fn bad(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Value { key, reason: reason.into() }
}

/// A number, or the literal string `"calibrated"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Calibrated {
    Value(f64),
    Mode(CalibratedTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CalibratedTag {
    Calibrated,
}

impl Calibrated {
    pub fn value(&self) -> Option<f64> {
        match self {
            Calibrated::Value(v) => Some(*v),
            Calibrated::Mode(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub trap: TrapConfig,
    pub chain: ChainConfig,
    pub heating: HeatingConfig,
    pub cooling: CoolingConfig,
    pub schedule: ScheduleConfig,
    pub fidelity: FidelityConfig,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            trap: TrapConfig::default(),
            chain: ChainConfig::default(),
            heating: HeatingConfig::default(),
            cooling: CoolingConfig::default(),
            schedule: ScheduleConfig::default(),
            fidelity: FidelityConfig::default(),
            sweep: SweepConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrapConfig {
    pub x2: f64,
    pub x4: f64,
    pub mass_amu: f64,
}

impl Default for TrapConfig {
    fn default() -> Self {
        Self { x2: 0.00188, x4: 0.00177, mass_amu: 171.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutKind {
    /// Use `trap.x2`, `trap.x4` as given.
    Fixed,
    /// Fit the potential to `chain.spacing_m` for each ion count.
    Equispaced,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainConfig {
    pub n_ions: usize,
    /// Explicit coolant offset labels; overrides `n_coolants`.
    pub coolant_labels: Option<Vec<i64>>,
    /// Centred coolants.
    pub n_coolants: usize,
    /// Reserve the outermost ion at each end as an endcap.
    pub endcaps: bool,
    pub layout: LayoutKind,
    pub spacing_m: f64,
    pub family: PotentialFamily,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            n_ions: 15,
            coolant_labels: None,
            n_coolants: 2,
            endcaps: false,
            layout: LayoutKind::Fixed,
            spacing_m: 4.4e-6,
            family: PotentialFamily::Quartic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatingConfig {
    pub alpha: f64,
    pub a0: f64,
    pub b0: f64,
    pub d: Calibrated,
    /// Cooling limit the calibration reproduces on the 15-ion reference.
    pub reference_n0: f64,
}

impl Default for HeatingConfig {
    fn default() -> Self {
        Self { alpha: 0.8, a0: 8.2e17, b0: 0.9, d: Calibrated::Mode(CalibratedTag::Calibrated), reference_n0: 29.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoolingConfig {
    /// Normalized damping rate; overrides `rabi_khz`.
    pub gamma: Option<f64>,
    pub rabi_khz: f64,
    pub method: Method,
}

impl Default for CoolingConfig {
    fn default() -> Self {
        Self { gamma: None, rabi_khz: 640.0, method: Method::ExactEigen }
    }
}

impl CoolingConfig {
    pub fn gamma(&self) -> Result<f64, ConfigError> {
        let g = match self.gamma {
            Some(g) => g,
            None => gamma_for_rabi_khz(self.rabi_khz).ok_or_else(|| {
                bad("cooling.rabi_khz", format!("{} has no damping rate; use one of 180, 275, 640 or set cooling.gamma", self.rabi_khz))
            })?,
        };
        if !(g >= 0.0) || !g.is_finite() {
            return Err(bad("cooling.gamma", "must be non-negative"));
        }
        Ok(g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub n_qubits: usize,
    pub gate_time_s: f64,
    pub gates_per_cycle: usize,
    pub cooling_time_s: f64,
    pub total_gates: usize,
    pub radial_overhead_s: f64,
    /// Initial occupation; the chain's cooling limit when absent.
    pub n_init_quanta: Option<f64>,
    /// Samples per cooling segment in trajectory output.
    pub cool_steps: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            n_qubits: 14,
            gate_time_s: 250e-6,
            gates_per_cycle: 1,
            cooling_time_s: 487e-6,
            total_gates: 500,
            radial_overhead_s: 0.0,
            n_init_quanta: None,
            cool_steps: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FidelityConfig {
    pub t2_s: f64,
    pub kappa: Calibrated,
    /// `κ_eff = κ·(ω_ref/ω0)^kappa_exponent`.
    pub kappa_exponent: f64,
    /// Cooling time per cycle at which the calibrated `⟨F⟩` peaks.
    pub reference_cooling_time_s: f64,
}

impl Default for FidelityConfig {
    fn default() -> Self {
        Self {
            t2_s: 0.5,
            kappa: Calibrated::Mode(CalibratedTag::Calibrated),
            kappa_exponent: 1.0,
            reference_cooling_time_s: 487e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Chain potential for the circuit studies: `equispaced` re-fits it to
    /// `spacing_m` for every ion count, `fixed` uses `[trap]`.
    pub layout: LayoutKind,
    pub spacing_m: f64,
    /// Centred coolants for the duty-cycle studies.
    pub n_coolants: usize,
    pub coolant_counts: Vec<usize>,
    /// Explicit cooling-time grid; otherwise `0, step, …, max`.
    pub cooling_times_s: Option<Vec<f64>>,
    pub cooling_time_step_s: f64,
    pub cooling_time_max_s: f64,
    pub gates_per_cycle: Vec<usize>,
    /// Normalized damping rates; overrides `rabi_khz`.
    pub gammas: Option<Vec<f64>>,
    pub rabi_khz: Vec<f64>,
    pub radial_factor: f64,
    pub refine: bool,
    pub heatmap_n_ions: usize,
    pub heatmap_family: PotentialFamily,
    pub com_frequencies_hz: Vec<f64>,
    /// Heatmap coolant counts; `1..=heatmap_n_ions` when empty.
    pub heatmap_coolant_counts: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            layout: LayoutKind::Equispaced,
            spacing_m: 4.4e-6,
            n_coolants: 6,
            coolant_counts: (0..=14).collect(),
            cooling_times_s: None,
            cooling_time_step_s: 25e-6,
            cooling_time_max_s: 10e-3,
            gates_per_cycle: (1..=5).collect(),
            gammas: None,
            rabi_khz: RABI_GAMMAS.iter().map(|&(k, _)| k).collect(),
            radial_factor: 0.0,
            refine: true,
            heatmap_n_ions: 21,
            heatmap_family: PotentialFamily::Quartic,
            com_frequencies_hz: (3..=9).map(|k| k as f64 * 50e3).collect(),
            heatmap_coolant_counts: Vec::new(),
        }
    }
}

impl SweepConfig {
    pub fn cooling_times(&self) -> Result<Vec<f64>, ConfigError> {
        let grid = match &self.cooling_times_s {
            Some(v) => v.clone(),
            None => {
                if !(self.cooling_time_step_s > 0.0) || !(self.cooling_time_max_s >= 0.0) {
                    return Err(bad("sweep.cooling_time_step_s", "step must be positive and max non-negative"));
                }
                let n = (self.cooling_time_max_s / self.cooling_time_step_s + 1e-9).floor() as usize;
                (0..=n).map(|k| k as f64 * self.cooling_time_step_s).collect()
            }
        };
        if grid.is_empty() || grid.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(bad("sweep.cooling_times_s", "grid must be non-empty and non-negative"));
        }
        Ok(grid)
    }

    pub fn gammas(&self) -> Result<Vec<f64>, ConfigError> {
        let g = match &self.gammas {
            Some(g) => g.clone(),
            None => self
                .rabi_khz
                .iter()
                .map(|&k| gamma_for_rabi_khz(k).ok_or_else(|| bad("sweep.rabi_khz", format!("{k} kHz has no damping rate"))))
                .collect::<Result<_, _>>()?,
        };
        if g.is_empty() || g.iter().any(|x| !(*x > 0.0)) {
            return Err(bad("sweep.gammas", "need at least one positive damping rate"));
        }
        Ok(g)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

/// Parses a `--set` value as a TOML literal, falling back to a bare string.
fn parse_literal(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), ConfigError> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| ConfigError::Override(spec.to_string()))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Override(spec.to_string()));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| ConfigError::Override(spec.to_string()))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_literal(raw.trim()));
    Ok(())
}

pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Read { path: p.to_path_buf(), source })?;
            text.parse::<toml::Table>().map_err(|e| ConfigError::Parse(e.to_string()))?
        }
        None => toml::Table::new(),
    };
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let cfg: RunConfig = toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.trap.mass_amu > 0.0) {
            return Err(bad("trap.mass_amu", "must be positive"));
        }
        if !(self.trap.x4 >= 0.0) || (self.trap.x4 == 0.0 && !(self.trap.x2 > 0.0)) {
            return Err(bad("trap", "need x4 ≥ 0 and, if x4 = 0, x2 > 0"));
        }
        if self.chain.n_ions == 0 {
            return Err(bad("chain.n_ions", "must be at least 1"));
        }
        if !(self.chain.spacing_m > 0.0) {
            return Err(bad("chain.spacing_m", "must be positive"));
        }
        if !(self.heating.alpha > 0.0) || !(self.heating.a0 >= 0.0) || !(self.heating.b0 >= 0.0) {
            return Err(bad("heating", "alpha must be positive, a0 and b0 non-negative"));
        }
        if let Some(d) = self.heating.d.value() {
            if !(d > 0.0) {
                return Err(bad("heating.d", "must be positive"));
            }
        }
        if !(self.heating.reference_n0 > 0.0) {
            return Err(bad("heating.reference_n0", "must be positive"));
        }
        self.cooling.gamma()?;
        let s = &self.schedule;
        if !(s.gate_time_s > 0.0) || s.gates_per_cycle == 0 || s.total_gates == 0 {
            return Err(bad("schedule", "gate time, gates per cycle and total gates must be positive"));
        }
        if !(s.cooling_time_s >= 0.0) || !(s.radial_overhead_s >= 0.0) {
            return Err(bad("schedule", "cooling time and radial overhead must be non-negative"));
        }
        if let Some(n) = s.n_init_quanta {
            if !(n >= 0.0) {
                return Err(bad("schedule.n_init_quanta", "must be non-negative"));
            }
        }
        if !(self.fidelity.t2_s > 0.0) {
            return Err(bad("fidelity.t2_s", "must be positive"));
        }
        if let Some(k) = self.fidelity.kappa.value() {
            if !(k >= 0.0) {
                return Err(bad("fidelity.kappa", "must be non-negative"));
            }
        }
        if !(self.fidelity.reference_cooling_time_s > 0.0) {
            return Err(bad("fidelity.reference_cooling_time_s", "must be positive"));
        }
        let w = &self.sweep;
        if w.coolant_counts.is_empty() || w.gates_per_cycle.is_empty() || w.gates_per_cycle.contains(&0) {
            return Err(bad("sweep", "coolant counts and gates per cycle must be non-empty; gates per cycle ≥ 1"));
        }
        if !(w.spacing_m > 0.0) {
            return Err(bad("sweep.spacing_m", "must be positive"));
        }
        if w.heatmap_n_ions < 3 {
            return Err(bad("sweep.heatmap_n_ions", "must be at least 3"));
        }
        if !(w.radial_factor >= 0.0) {
            return Err(bad("sweep.radial_factor", "must be non-negative"));
        }
        if w.com_frequencies_hz.is_empty() || w.com_frequencies_hz.iter().any(|f| !(*f > 0.0)) {
            return Err(bad("sweep.com_frequencies_hz", "need positive frequencies"));
        }
        if w.heatmap_coolant_counts.iter().any(|&k| k == 0 || k > w.heatmap_n_ions) {
            return Err(bad("sweep.heatmap_coolant_counts", "counts must lie in 1..=heatmap_n_ions"));
        }
        w.cooling_times()?;
        w.gammas()?;
        Ok(())
    }

    /// SHA-256 over the canonical JSON form of the study name and resolved
    /// config. The output directory is excluded.
    pub fn hash(&self, study: &str) -> String {
        let mut c = self.clone();
        c.output = OutputConfig::default();
        let canon = serde_json::to_string(&(study, &c)).expect("config serializes");
        hex::encode(Sha256::digest(canon.as_bytes()))
    }
}
