//! Parameter studies: coolant count, coolant placement, duty cycle, COM
//! frequency × coolant fill, and the radial-wait variant of the duty sweep.
//!
//! Every grid point is evaluated independently (in parallel) and results are
//! assembled in grid order, so a study is a pure function of its inputs.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve, mean_gate_fidelity, total_fidelity, DutyCycleSchedule, FidelityModel};
use crate::error::{domain, Error, Result};
use crate::heating::{heating_rate, HeatingModel};
use crate::limit::{calibrate_heating, com_cooling, quadratic_upper_bound, Method};
use crate::potential::{calibrate_equispacing, centered_indices, offset_label, IonChain, PotentialFamily, TrapPotential};
use crate::search::{bisect, golden_section};
use crate::units::Normalization;

/// Cooling-beam Rabi frequencies (kHz) and their normalized damping rates.
pub const RABI_GAMMAS: [(f64, f64); 3] = [(180.0, 1.387e-5), (275.0, 3.468e-5), (640.0, 5.328e-5)];

pub const GAMMA_640KHZ: f64 = 5.328e-5;

/// Largest number of placements [`enumerate_placements`] will evaluate.
pub const PLACEMENT_GUARD: u128 = 1_000_000;

pub fn gamma_for_rabi_khz(khz: f64) -> Option<f64> {
    RABI_GAMMAS.iter().find(|(k, _)| (*k - khz).abs() < 1e-9).map(|&(_, g)| g)
}

pub fn rabi_khz_for_gamma(gamma: f64) -> Option<f64> {
    RABI_GAMMAS.iter().find(|(_, g)| (*g - gamma).abs() < 1e-15).map(|&(k, _)| k)
}

/// Fixed circuit of the studies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitSpec {
    pub n_qubits: usize,
    pub total_gates: usize,
    /// s
    pub gate_time: f64,
}

impl Default for CircuitSpec {
    fn default() -> Self {
        Self { n_qubits: 14, total_gates: 500, gate_time: 250e-6 }
    }
}

/// Frequency dependence of the motional sensitivity:
/// `κ_eff = κ · (ω_ref/ω0)^exponent`.
///
/// With exponent 1 the motional error follows the COM zero-point spread,
/// whose variance per quantum scales as `1/ω0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaScaling {
    /// rad/s
    pub reference_omega: f64,
    pub exponent: f64,
}

impl KappaScaling {
    pub fn none() -> Self {
        Self { reference_omega: 1.0, exponent: 0.0 }
    }

    pub fn factor(&self, omega0: f64) -> f64 {
        if self.exponent == 0.0 {
            1.0
        } else {
            (self.reference_omega / omega0).powf(self.exponent)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyContext {
    pub norm: Normalization<f64>,
    pub heating: HeatingModel<f64>,
    /// `kappa` is the sensitivity at `kappa_scaling.reference_omega`.
    pub fidelity: FidelityModel<f64>,
    pub kappa_scaling: KappaScaling,
    pub method: Method,
    pub circuit: CircuitSpec,
}

impl StudyContext {
    /// Uncalibrated context: `D = 1`, `κ = 0`.
    pub fn uncalibrated() -> Self {
        Self {
            norm: Normalization::ytterbium171(),
            heating: HeatingModel::standard(),
            fidelity: FidelityModel { t2: 0.5, kappa: 0.0 },
            kappa_scaling: KappaScaling::none(),
            method: Method::ExactEigen,
            circuit: CircuitSpec::default(),
        }
    }

    /// Context with `D` and `κ` fitted to the default references.
    pub fn calibrated() -> Result<Self> {
        let mut ctx = Self::uncalibrated();
        ctx.heating = calibrate_d(&ctx, &HeatingReference::default())?;
        let k = calibrate_kappa(&ctx, &KappaReference::default())?;
        ctx.fidelity.kappa = k.kappa;
        ctx.kappa_scaling = k.scaling;
        Ok(ctx)
    }

    pub fn effective_fidelity(&self, omega0: f64) -> FidelityModel<f64> {
        FidelityModel { t2: self.fidelity.t2, kappa: self.fidelity.kappa * self.kappa_scaling.factor(omega0) }
    }
}

/// How the chain potential is chosen for a given ion count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainLayout {
    /// Quartic potential recalibrated per ion count to this mean spacing (m).
    Equispaced { spacing_m: f64 },
    /// One potential for every ion count.
    Fixed(TrapPotential<f64>),
}

impl Default for ChainLayout {
    fn default() -> Self {
        ChainLayout::Equispaced { spacing_m: 4.4e-6 }
    }
}

impl ChainLayout {
    pub fn potential(&self, n_ions: usize, norm: &Normalization<f64>) -> Result<(TrapPotential<f64>, Option<Vec<f64>>)> {
        match *self {
            ChainLayout::Equispaced { spacing_m } => {
                let fit = calibrate_equispacing(n_ions, spacing_m, norm, PotentialFamily::Quartic)?;
                Ok((fit.potential, Some(fit.positions)))
            }
            ChainLayout::Fixed(p) => Ok((p, None)),
        }
    }

    /// `n_qubits + n_coolants + 2` ions, endcaps outermost, coolants centred.
    pub fn build(&self, n_qubits: usize, n_coolants: usize, norm: &Normalization<f64>) -> Result<IonChain<f64>> {
        let n = n_qubits + n_coolants + 2;
        let (pot, positions) = self.potential(n, norm)?;
        match positions {
            Some(u) => IonChain::centered_from_positions(pot, u, n_coolants),
            None => IonChain::centered(pot, n_qubits, n_coolants),
        }
    }
}

/// COM heating/cooling summary of one chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainCooling {
    pub n_ions: usize,
    pub coolants: Vec<usize>,
    /// rad/s
    pub omega0: f64,
    /// quanta/s
    pub h: f64,
    /// 1/s; zero without coolants.
    pub c: f64,
    /// quanta; infinite without coolants.
    pub n0: f64,
}

pub fn chain_cooling(ctx: &StudyContext, chain: &IonChain<f64>, gamma: f64) -> Result<ChainCooling> {
    let cc = com_cooling(chain, gamma, ctx.method)?;
    let omega0 = ctx.norm.rate_to_si(cc.spectrum.frequency(cc.com));
    let h = heating_rate(&ctx.heating, omega0)?;
    let c = ctx.norm.rate_to_si(cc.rate);
    let n0 = if c > 0.0 { h / c } else { f64::INFINITY };
    Ok(ChainCooling { n_ions: chain.n_ions(), coolants: chain.coolant_indices(), omega0, h, c, n0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CircuitMetrics {
    pub gates_per_cycle: usize,
    /// s
    pub cooling_time: f64,
    /// s
    pub radial_overhead: f64,
    pub duty_cycle: f64,
    pub duty_cycle_excluding_radial: f64,
    pub mean_fidelity: f64,
    pub total_fidelity: f64,
    /// s
    pub wall_time: f64,
}

/// Runs the study circuit on a chain, starting at its cooling limit.
pub fn evaluate_circuit(
    ctx: &StudyContext,
    cooling: &ChainCooling,
    gates_per_cycle: usize,
    cooling_time: f64,
    radial_overhead: f64,
) -> Result<CircuitMetrics> {
    let schedule = DutyCycleSchedule::new(
        ctx.circuit.gate_time,
        gates_per_cycle,
        cooling_time,
        ctx.circuit.total_gates,
        radial_overhead,
    )?;
    let fidelity = ctx.effective_fidelity(cooling.omega0);
    let traj = evolve(cooling.n0, &schedule, cooling.h, cooling.c, &fidelity)?;
    Ok(CircuitMetrics {
        gates_per_cycle,
        cooling_time,
        radial_overhead,
        duty_cycle: schedule.duty_cycle(),
        duty_cycle_excluding_radial: schedule.duty_cycle_excluding_radial(),
        mean_fidelity: mean_gate_fidelity(&traj)?,
        total_fidelity: total_fidelity(&traj)?,
        wall_time: traj.duration(),
    })
}

// ---------------------------------------------------------------------------
// calibrations

/// Configuration whose cooling limit fixes `D`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatingReference {
    pub potential: TrapPotential<f64>,
    pub n_ions: usize,
    pub coolant_labels: Vec<i64>,
    pub gamma: f64,
    pub n0: f64,
}

impl Default for HeatingReference {
    fn default() -> Self {
        Self {
            potential: TrapPotential::reference(),
            n_ions: 15,
            coolant_labels: vec![-1, 0],
            gamma: GAMMA_640KHZ,
            n0: 29.0,
        }
    }
}

impl HeatingReference {
    pub fn chain(&self) -> Result<IonChain<f64>> {
        let idx = labels_to_indices(self.n_ions, &self.coolant_labels)?;
        IonChain::with_coolants(self.potential, self.n_ions, &idx)
    }
}

pub fn labels_to_indices(n: usize, labels: &[i64]) -> Result<Vec<usize>> {
    labels.iter().map(|&l| crate::potential::index_of_label(n, l)).collect()
}

/// Heating model with `D` reproducing the reference cooling limit.
pub fn calibrate_d(ctx: &StudyContext, reference: &HeatingReference) -> Result<HeatingModel<f64>> {
    let chain = reference.chain()?;
    calibrate_heating(&chain, &ctx.heating, reference.gamma, ctx.method, reference.n0, &ctx.norm)
}

/// Operating point at which the fidelity optimum is pinned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaReference {
    pub layout: ChainLayout,
    pub n_coolants: usize,
    pub gamma: f64,
    pub gates_per_cycle: usize,
    /// Cooling time per cycle at which `⟨F⟩` must peak, s.
    pub cooling_time: f64,
    pub frequency_exponent: f64,
}

impl Default for KappaReference {
    fn default() -> Self {
        Self {
            layout: ChainLayout::default(),
            n_coolants: 6,
            gamma: GAMMA_640KHZ,
            gates_per_cycle: 1,
            cooling_time: 487e-6,
            frequency_exponent: 1.0,
        }
    }
}

impl KappaReference {
    /// COM angular frequency (rad/s) of the reference chain.
    pub fn com_omega(&self, ctx: &StudyContext) -> Result<f64> {
        let chain = self.layout.build(ctx.circuit.n_qubits, self.n_coolants, &ctx.norm)?;
        let s = crate::modes::normal_modes(&chain.hessian())?;
        Ok(ctx.norm.rate_to_si(s.frequency(crate::modes::com_mode_index(&s)?)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KappaCalibration {
    pub kappa: f64,
    pub scaling: KappaScaling,
    pub mean_fidelity: f64,
    pub total_fidelity: f64,
}

/// `κ` such that `⟨F⟩` over cooling time peaks exactly at the reference
/// cooling time (with the heating model of `ctx`).
pub fn calibrate_kappa(ctx: &StudyContext, reference: &KappaReference) -> Result<KappaCalibration> {
    let chain = reference.layout.build(ctx.circuit.n_qubits, reference.n_coolants, &ctx.norm)?;
    let cooling = chain_cooling(ctx, &chain, reference.gamma)?;
    if !(cooling.c > 0.0) {
        return Err(Error::NoCooling);
    }
    let scaling = KappaScaling { reference_omega: cooling.omega0, exponent: reference.frequency_exponent };
    let at = |kappa: f64, tau: f64| -> f64 {
        let mut c = ctx.clone();
        c.fidelity.kappa = kappa;
        c.kappa_scaling = scaling;
        evaluate_circuit(&c, &cooling, reference.gates_per_cycle, tau, 0.0)
            .map(|m| m.mean_fidelity)
            .unwrap_or(f64::NAN)
    };
    let tau = reference.cooling_time;
    let dtau = 0.5e-6;
    let slope = |log_k: f64| {
        let k = 10f64.powf(log_k);
        at(k, tau + dtau) - at(k, tau - dtau)
    };
    let log_k = bisect(slope, -8.0, 1.0, 1e-12, 200).ok_or_else(|| {
        Error::Convergence { iterations: 200, residual: f64::NAN }
    })?;
    let kappa = 10f64.powf(log_k);
    let mut c = ctx.clone();
    c.fidelity.kappa = kappa;
    c.kappa_scaling = scaling;
    let m = evaluate_circuit(&c, &cooling, reference.gates_per_cycle, tau, 0.0)?;
    Ok(KappaCalibration { kappa, scaling, mean_fidelity: m.mean_fidelity, total_fidelity: m.total_fidelity })
}

// ---------------------------------------------------------------------------
// tabular output

/// Flat row representation shared by CSV writers.
pub trait Tabular {
    fn header() -> Vec<&'static str>;
    fn fields(&self) -> Vec<String>;
}

pub fn fmt_f(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x}")
    }
}

fn fmt_set(xs: &[i64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

// ---------------------------------------------------------------------------
// coolant-count sweep

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoolantSweepSpec {
    pub layout: ChainLayout,
    pub coolant_counts: Vec<usize>,
    pub gamma: f64,
    pub gates_per_cycle: usize,
    /// s
    pub cooling_times: Vec<f64>,
}

impl Default for CoolantSweepSpec {
    fn default() -> Self {
        Self {
            layout: ChainLayout::default(),
            coolant_counts: (0..=14).collect(),
            gamma: GAMMA_640KHZ,
            gates_per_cycle: 1,
            cooling_times: vec![487e-6],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoolantRow {
    pub n_coolants: usize,
    pub n_ions: usize,
    pub cooling_time: f64,
    /// Hz
    pub com_frequency: f64,
    pub h: f64,
    pub c: f64,
    pub n0: f64,
    pub duty_cycle: f64,
    pub mean_fidelity: f64,
    pub total_fidelity: f64,
    /// Empty on success, otherwise the reason the point failed.
    pub error: String,
}

impl Tabular for CoolantRow {
    fn header() -> Vec<&'static str> {
        vec![
            "n_coolants", "n_ions", "cooling_time_s", "com_frequency_hz", "heating_rate_per_s", "cooling_rate_per_s",
            "n0_quanta", "duty_cycle", "mean_fidelity", "total_fidelity", "error",
        ]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.n_coolants.to_string(),
            self.n_ions.to_string(),
            fmt_f(self.cooling_time),
            fmt_f(self.com_frequency),
            fmt_f(self.h),
            fmt_f(self.c),
            fmt_f(self.n0),
            fmt_f(self.duty_cycle),
            fmt_f(self.mean_fidelity),
            fmt_f(self.total_fidelity),
            self.error.clone(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoolantArgmax {
    pub cooling_time: f64,
    pub n_coolants: usize,
    pub mean_fidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoolantSweepResult {
    /// Ordered by coolant count, then cooling time.
    pub rows: Vec<CoolantRow>,
    /// Best coolant count for each cooling time.
    pub argmax: Vec<CoolantArgmax>,
}

pub fn sweep_coolant_count(ctx: &StudyContext, spec: &CoolantSweepSpec) -> Result<CoolantSweepResult> {
    if spec.coolant_counts.is_empty() || spec.cooling_times.is_empty() {
        return Err(domain("coolant sweep needs non-empty grids"));
    }
    let rows: Vec<Vec<CoolantRow>> = spec
        .coolant_counts
        .par_iter()
        .map(|&nc| coolant_point(ctx, spec, nc))
        .collect();
    let rows: Vec<CoolantRow> = rows.into_iter().flatten().collect();
    let argmax = spec
        .cooling_times
        .iter()
        .map(|&tau| {
            rows.iter()
                .filter(|r| r.cooling_time == tau && r.error.is_empty())
                .fold(None::<&CoolantRow>, |best, r| match best {
                    Some(b) if b.mean_fidelity >= r.mean_fidelity => Some(b),
                    _ => Some(r),
                })
                .map(|r| CoolantArgmax { cooling_time: tau, n_coolants: r.n_coolants, mean_fidelity: r.mean_fidelity })
        })
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::Numeric("every coolant count failed".into()))?;
    Ok(CoolantSweepResult { rows, argmax })
}

fn coolant_point(ctx: &StudyContext, spec: &CoolantSweepSpec, nc: usize) -> Vec<CoolantRow> {
    let n_ions = ctx.circuit.n_qubits + nc + 2;
    let failed = |e: Error| {
        spec.cooling_times
            .iter()
            .map(|&tau| CoolantRow {
                n_coolants: nc,
                n_ions,
                cooling_time: tau,
                com_frequency: f64::NAN,
                h: f64::NAN,
                c: f64::NAN,
                n0: f64::NAN,
                duty_cycle: f64::NAN,
                mean_fidelity: f64::NAN,
                total_fidelity: f64::NAN,
                error: e.to_string(),
            })
            .collect::<Vec<_>>()
    };
    let cooling = match spec
        .layout
        .build(ctx.circuit.n_qubits, nc, &ctx.norm)
        .and_then(|chain| chain_cooling(ctx, &chain, spec.gamma))
    {
        Ok(c) => c,
        Err(e) => return failed(e),
    };
    spec.cooling_times
        .iter()
        .map(|&tau| match evaluate_circuit(ctx, &cooling, spec.gates_per_cycle, tau, 0.0) {
            Ok(m) => CoolantRow {
                n_coolants: nc,
                n_ions,
                cooling_time: tau,
                com_frequency: cooling.omega0 / (2.0 * PI),
                h: cooling.h,
                c: cooling.c,
                n0: cooling.n0,
                duty_cycle: m.duty_cycle,
                mean_fidelity: m.mean_fidelity,
                total_fidelity: m.total_fidelity,
                error: String::new(),
            },
            Err(e) => failed(e).remove(0),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// placement enumeration

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlacementRow {
    pub rank: usize,
    pub coolants: Vec<usize>,
    pub labels: Vec<i64>,
    /// 1/s
    pub c: f64,
    pub n0: f64,
}

impl Tabular for PlacementRow {
    fn header() -> Vec<&'static str> {
        vec!["rank", "coolant_labels", "coolant_indices", "cooling_rate_per_s", "n0_quanta"]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            self.rank.to_string(),
            fmt_set(&self.labels),
            self.coolants.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" "),
            fmt_f(self.c),
            fmt_f(self.n0),
        ]
    }
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul((n - i) as u128) / (i as u128 + 1))
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    if k > n {
        return out;
    }
    loop {
        out.push(idx.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Every `n_coolants`-subset of an `n_ions` chain in potential `pot`, ranked
/// by ascending cooling limit (ties by label order).
pub fn enumerate_placements(
    ctx: &StudyContext,
    pot: &TrapPotential<f64>,
    n_ions: usize,
    n_coolants: usize,
    gamma: f64,
) -> Result<Vec<PlacementRow>> {
    if n_coolants == 0 || n_coolants > n_ions {
        return Err(domain(format!("need 1 ≤ N_C ≤ N, got N_C = {n_coolants}, N = {n_ions}")));
    }
    let count = binomial(n_ions, n_coolants);
    if count > PLACEMENT_GUARD {
        return Err(Error::GuardExceeded { count, limit: PLACEMENT_GUARD });
    }
    let base = IonChain::with_coolants(*pot, n_ions, &[])?;
    let sets = combinations(n_ions, n_coolants);
    let mut rows: Vec<PlacementRow> = sets
        .par_iter()
        .map(|set| {
            let chain = IonChain::from_positions(*pot, base.positions.clone(), set, false)?;
            let cooling = chain_cooling(ctx, &chain, gamma)?;
            Ok(PlacementRow {
                rank: 0,
                coolants: set.clone(),
                labels: set.iter().map(|&i| offset_label(n_ions, i)).collect(),
                c: cooling.c,
                n0: cooling.n0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.n0.total_cmp(&b.n0).then_with(|| a.labels.cmp(&b.labels)));
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// duty-cycle sweep

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DutySweepSpec {
    pub layout: ChainLayout,
    pub n_coolants: usize,
    pub gammas: Vec<f64>,
    pub gates_per_cycle: Vec<usize>,
    /// s
    pub cooling_times: Vec<f64>,
    /// Radial wait per cycle as a multiple of the cooling time.
    pub radial_factor: f64,
    /// Polish each grid optimum by a golden-section search between its
    /// neighbouring grid points.
    pub refine: bool,
}

impl Default for DutySweepSpec {
    fn default() -> Self {
        Self {
            layout: ChainLayout::default(),
            n_coolants: 6,
            gammas: RABI_GAMMAS.iter().map(|&(_, g)| g).collect(),
            gates_per_cycle: (1..=5).collect(),
            cooling_times: (0..=400).map(|k| k as f64 * 25e-6).collect(),
            radial_factor: 0.0,
            refine: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DutyRow {
    pub gamma: f64,
    pub rabi_khz: Option<f64>,
    pub metrics: CircuitMetrics,
}

impl Tabular for DutyRow {
    fn header() -> Vec<&'static str> {
        vec![
            "gamma", "rabi_khz", "gates_per_cycle", "cooling_time_s", "radial_overhead_s", "duty_cycle",
            "duty_cycle_excluding_radial", "mean_fidelity", "total_fidelity", "wall_time_s",
        ]
    }

    fn fields(&self) -> Vec<String> {
        let m = &self.metrics;
        vec![
            fmt_f(self.gamma),
            self.rabi_khz.map(fmt_f).unwrap_or_default(),
            m.gates_per_cycle.to_string(),
            fmt_f(m.cooling_time),
            fmt_f(m.radial_overhead),
            fmt_f(m.duty_cycle),
            fmt_f(m.duty_cycle_excluding_radial),
            fmt_f(m.mean_fidelity),
            fmt_f(m.total_fidelity),
            fmt_f(m.wall_time),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DutyOptimum {
    pub gamma: f64,
    pub rabi_khz: Option<f64>,
    pub gates_per_cycle: usize,
    /// Best grid point by mean fidelity.
    pub grid: CircuitMetrics,
    /// Continuous optimum near the grid point (equal to `grid` when
    /// refinement is off).
    pub refined: CircuitMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DutySweepResult {
    /// COM summary of the swept chain for each γ.
    pub chains: Vec<ChainCooling>,
    /// Ordered by γ, gates per cycle, cooling time.
    pub rows: Vec<DutyRow>,
    /// One per (γ, gates per cycle).
    pub optima: Vec<DutyOptimum>,
    /// Index into `optima` of the best gates-per-cycle for each γ.
    pub best: Vec<usize>,
}

impl DutySweepResult {
    pub fn optimum(&self, gamma: f64, gates_per_cycle: usize) -> Option<&DutyOptimum> {
        self.optima.iter().find(|o| o.gamma == gamma && o.gates_per_cycle == gates_per_cycle)
    }

    pub fn best_for(&self, gamma: f64) -> Option<&DutyOptimum> {
        self.best.iter().map(|&i| &self.optima[i]).find(|o| o.gamma == gamma)
    }
}

pub fn sweep_duty_cycle(ctx: &StudyContext, spec: &DutySweepSpec) -> Result<DutySweepResult> {
    if spec.gammas.is_empty() || spec.gates_per_cycle.is_empty() || spec.cooling_times.is_empty() {
        return Err(domain("duty sweep needs non-empty grids"));
    }
    if !(spec.radial_factor >= 0.0) {
        return Err(domain("radial overhead factor must be non-negative"));
    }
    let chain = spec.layout.build(ctx.circuit.n_qubits, spec.n_coolants, &ctx.norm)?;
    let chains: Vec<ChainCooling> = spec
        .gammas
        .par_iter()
        .map(|&g| chain_cooling(ctx, &chain, g))
        .collect::<Result<_>>()?;

    let radial = |tau: f64| spec.radial_factor * tau;
    let mut tasks = Vec::new();
    for (gi, _) in spec.gammas.iter().enumerate() {
        for &g in &spec.gates_per_cycle {
            for &tau in &spec.cooling_times {
                tasks.push((gi, g, tau));
            }
        }
    }
    let rows: Vec<DutyRow> = tasks
        .par_iter()
        .map(|&(gi, g, tau)| {
            let m = evaluate_circuit(ctx, &chains[gi], g, tau, radial(tau))?;
            Ok(DutyRow { gamma: spec.gammas[gi], rabi_khz: rabi_khz_for_gamma(spec.gammas[gi]), metrics: m })
        })
        .collect::<Result<_>>()?;

    let mut groups = Vec::new();
    for (gi, _) in spec.gammas.iter().enumerate() {
        for &g in &spec.gates_per_cycle {
            groups.push((gi, g));
        }
    }
    let nt = spec.cooling_times.len();
    let optima: Vec<DutyOptimum> = groups
        .par_iter()
        .enumerate()
        .map(|(k, &(gi, g))| {
            let slice = &rows[k * nt..(k + 1) * nt];
            let (bi, best) = slice
                .iter()
                .enumerate()
                .fold(None::<(usize, &DutyRow)>, |acc, (i, r)| match acc {
                    Some((_, b)) if b.metrics.mean_fidelity >= r.metrics.mean_fidelity => acc,
                    _ => Some((i, r)),
                })
                .expect("non-empty grid");
            let grid = best.metrics;
            let refined = if spec.refine && nt > 1 {
                let lo = spec.cooling_times[bi.saturating_sub(1)];
                let hi = spec.cooling_times[(bi + 1).min(nt - 1)];
                let f = |tau: f64| {
                    evaluate_circuit(ctx, &chains[gi], g, tau, radial(tau))
                        .map(|m| -m.mean_fidelity)
                        .unwrap_or(f64::INFINITY)
                };
                let (tau, _) = golden_section(f, lo, hi, 1e-9);
                let m = evaluate_circuit(ctx, &chains[gi], g, tau, radial(tau))?;
                if m.mean_fidelity >= grid.mean_fidelity { m } else { grid }
            } else {
                grid
            };
            Ok(DutyOptimum {
                gamma: spec.gammas[gi],
                rabi_khz: rabi_khz_for_gamma(spec.gammas[gi]),
                gates_per_cycle: g,
                grid,
                refined,
            })
        })
        .collect::<Result<_>>()?;

    let ng = spec.gates_per_cycle.len();
    let best = (0..spec.gammas.len())
        .map(|gi| {
            (gi * ng..(gi + 1) * ng)
                .fold(None::<usize>, |acc, i| match acc {
                    Some(b) if optima[b].refined.mean_fidelity >= optima[i].refined.mean_fidelity => acc,
                    _ => Some(i),
                })
                .expect("non-empty gates grid")
        })
        .collect();
    Ok(DutySweepResult { chains, rows, optima, best })
}

/// The duty sweep with a radial wait of `factor × cooling time` per cycle.
pub fn sweep_duty_cycle_with_radial(ctx: &StudyContext, spec: &DutySweepSpec, factor: f64) -> Result<DutySweepResult> {
    let spec = DutySweepSpec { radial_factor: factor, ..spec.clone() };
    sweep_duty_cycle(ctx, &spec)
}

// ---------------------------------------------------------------------------
// COM frequency × coolant fill

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreqFillSpec {
    pub n_ions: usize,
    /// Target COM frequencies, Hz.
    pub com_frequencies: Vec<f64>,
    /// Coolant counts, placed from the centre outwards.
    pub coolant_counts: Vec<usize>,
    pub gamma: f64,
    /// Potential family of the base chain.
    pub family: PotentialFamily,
    /// Mean spacing of the base chain before rescaling, m.
    pub base_spacing_m: f64,
}

impl Default for FreqFillSpec {
    fn default() -> Self {
        Self {
            n_ions: 21,
            com_frequencies: (3..=9).map(|k| k as f64 * 50e3).collect(),
            coolant_counts: (1..=21).collect(),
            gamma: GAMMA_640KHZ,
            family: PotentialFamily::Quartic,
            base_spacing_m: 4.4e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatmapCell {
    /// Hz
    pub com_frequency: f64,
    pub n_coolants: usize,
    pub fill: f64,
    pub x2: f64,
    pub x4: f64,
    pub h: f64,
    pub c: f64,
    pub n0: f64,
}

impl Tabular for HeatmapCell {
    fn header() -> Vec<&'static str> {
        vec!["com_frequency_hz", "n_coolants", "fill_fraction", "x2", "x4", "heating_rate_per_s", "cooling_rate_per_s", "n0_quanta"]
    }

    fn fields(&self) -> Vec<String> {
        vec![
            fmt_f(self.com_frequency),
            self.n_coolants.to_string(),
            fmt_f(self.fill),
            fmt_f(self.x2),
            fmt_f(self.x4),
            fmt_f(self.h),
            fmt_f(self.c),
            fmt_f(self.n0),
        ]
    }
}

/// Base potential stretched so that its COM frequency is `target_hz`.
///
/// Stretching by `s` divides the Hessian by `s³`, so frequencies scale as
/// `s^(-3/2)`: X2 is multiplied by `(ω_t/ω)²` and X4 by `(ω_t/ω)^(10/3)`.
pub fn potential_for_com_frequency(
    base: &TrapPotential<f64>,
    base_omega0: f64,
    target_hz: f64,
) -> TrapPotential<f64> {
    let ratio = 2.0 * PI * target_hz / base_omega0;
    base.stretched(ratio.powf(-2.0 / 3.0))
}

pub fn sweep_frequency_fill(ctx: &StudyContext, spec: &FreqFillSpec) -> Result<Vec<HeatmapCell>> {
    if spec.com_frequencies.is_empty() || spec.coolant_counts.is_empty() {
        return Err(domain("heatmap needs non-empty grids"));
    }
    if spec.coolant_counts.iter().any(|&k| k == 0 || k > spec.n_ions) {
        return Err(domain("coolant counts must lie in 1..=N"));
    }
    let fit = calibrate_equispacing(spec.n_ions, spec.base_spacing_m, &ctx.norm, spec.family)?;
    let base_chain = IonChain::from_positions(fit.potential, fit.positions.clone(), &[], false)?;
    let base_omega = {
        let s = crate::modes::normal_modes(&base_chain.hessian())?;
        ctx.norm.rate_to_si(s.frequency(crate::modes::com_mode_index(&s)?))
    };
    let all: Vec<usize> = (0..spec.n_ions).collect();
    let mut tasks = Vec::new();
    for &f in &spec.com_frequencies {
        for &k in &spec.coolant_counts {
            tasks.push((f, k));
        }
    }
    tasks
        .par_iter()
        .map(|&(f, k)| {
            let pot = potential_for_com_frequency(&fit.potential, base_omega, f);
            let scale = (2.0 * PI * f / base_omega).powf(-2.0 / 3.0);
            let positions: Vec<f64> = fit.positions.iter().map(|u| u * scale).collect();
            let coolants = centered_indices(spec.n_ions, &all, k)?;
            let chain = IonChain::from_positions(pot, positions, &coolants, false)?;
            let cooling = chain_cooling(ctx, &chain, spec.gamma)?;
            Ok(HeatmapCell {
                com_frequency: cooling.omega0 / (2.0 * PI),
                n_coolants: k,
                fill: k as f64 / spec.n_ions as f64,
                x2: pot.x2,
                x4: pot.x4,
                h: cooling.h,
                c: cooling.c,
                n0: cooling.n0,
            })
        })
        .collect()
}

/// Quadratic-chain bound matching a heatmap cell's COM frequency and fill.
pub fn heatmap_quadratic_bound(ctx: &StudyContext, cell: &HeatmapCell, n_ions: usize, gamma: f64) -> Result<f64> {
    let w = ctx.norm.rate_to_normalized(2.0 * PI * cell.com_frequency);
    let x2 = w * w / 2.0;
    Ok(quadratic_upper_bound(n_ions, cell.n_coolants, x2, gamma, &ctx.heating, &ctx.norm)?.n0)
}
