//! COM occupation over gate/cool duty cycles and the resulting gate fidelity.
//!
//! Each cycle runs its gates, then axial cooling, then the radial-cooling
//! wait before the next gates. Gates and the wait heat the mode linearly at
//! `h`; cooling relaxes it exponentially towards `n0 = h/c`.

use std::fmt::Write as _;
use std::io;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DutyCycleSchedule<T = f64> {
    /// Duration of one two-qubit gate, s.
    pub gate_time: T,
    pub gates_per_cycle: usize,
    /// Axial cooling per cycle, s.
    pub cooling_time: T,
    pub total_gates: usize,
    /// Dead time per cycle with neither gates nor axial cooling, s.
    pub radial_overhead: T,
}

impl<T: Real> DutyCycleSchedule<T> {
    pub fn new(gate_time: T, gates_per_cycle: usize, cooling_time: T, total_gates: usize, radial_overhead: T) -> Result<Self> {
        if !(gate_time > T::zero()) || !gate_time.is_finite() {
            return Err(domain("gate time must be positive"));
        }
        if gates_per_cycle == 0 || total_gates == 0 {
            return Err(domain("gates per cycle and total gates must be at least 1"));
        }
        if !(cooling_time >= T::zero()) || !cooling_time.is_finite() {
            return Err(domain("cooling time must be non-negative"));
        }
        if !(radial_overhead >= T::zero()) || !radial_overhead.is_finite() {
            return Err(domain("radial overhead must be non-negative"));
        }
        Ok(Self { gate_time, gates_per_cycle, cooling_time, total_gates, radial_overhead })
    }

    /// Length of a full cycle, s.
    pub fn cycle_time(&self) -> T {
        self.cooling_time + T::from_usize_lossy(self.gates_per_cycle) * self.gate_time + self.radial_overhead
    }

    /// Fraction of the cycle spent on axial cooling.
    pub fn duty_cycle(&self) -> T {
        self.cooling_time / self.cycle_time()
    }

    /// Cooling fraction of the gate-plus-cooling time, ignoring the wait.
    pub fn duty_cycle_excluding_radial(&self) -> T {
        self.cooling_time / (self.cooling_time + T::from_usize_lossy(self.gates_per_cycle) * self.gate_time)
    }

    pub fn n_cycles(&self) -> usize {
        self.total_gates.div_ceil(self.gates_per_cycle)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityModel<T = f64> {
    /// Dephasing time, s.
    pub t2: T,
    /// Motional sensitivity in `(1 + (κ n)²)^(-1/2)`.
    pub kappa: T,
}

impl<T: Real> FidelityModel<T> {
    pub fn new(t2: T, kappa: T) -> Result<Self> {
        if !(t2 > T::zero()) {
            return Err(domain("T2 must be positive"));
        }
        if !(kappa >= T::zero()) || !kappa.is_finite() {
            return Err(domain("kappa must be finite and non-negative"));
        }
        Ok(Self { t2, kappa })
    }
}

/// `(1 + (κn)²)^(-1/2) · exp(-wall/T2)`.
pub fn gate_fidelity<T: Real>(model: &FidelityModel<T>, n: T, wall_time: T) -> T {
    let kn = model.kappa * n;
    let motional = if kn.is_finite() { (T::one() + kn * kn).sqrt().recip() } else { T::zero() };
    motional * (-wall_time / model.t2).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Gate,
    Radial,
    Cool,
}

impl Phase {
    pub fn label(&self) -> &'static str {
        match self {
            Phase::Gate => "gate",
            Phase::Radial => "radial",
            Phase::Cool => "cool",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample<T = f64> {
    pub t: T,
    pub n: T,
    /// Phase of the segment this sample ends (or, at `t = 0`, starts).
    pub phase: Phase,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GateRecord<T = f64> {
    pub index: usize,
    pub cycle: usize,
    pub start: T,
    pub n_start: T,
    /// Gate time plus this gate's share of its cycle's cooling and wait, s.
    pub wall_time: T,
    pub fidelity: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory<T = f64> {
    pub samples: Vec<Sample<T>>,
    pub gates: Vec<GateRecord<T>>,
}

/// Closed-form evolution over one segment.
pub fn advance<T: Real>(n: T, phase: Phase, dt: T, h: T, c: T) -> T {
    match phase {
        Phase::Cool if c > T::zero() => {
            let n0 = h / c;
            n0 + (n - n0) * (-c * dt).exp()
        }
        _ => n + h * dt,
    }
}

/// Runs the whole circuit from `n_init`, sampling segment boundaries.
pub fn evolve<T: Real>(n_init: T, schedule: &DutyCycleSchedule<T>, h: T, c: T, fidelity: &FidelityModel<T>) -> Result<Trajectory<T>> {
    evolve_sampled(n_init, schedule, h, c, fidelity, 1)
}

/// As [`evolve`], with each cooling segment split into `cool_steps` samples.
pub fn evolve_sampled<T: Real>(
    n_init: T,
    schedule: &DutyCycleSchedule<T>,
    h: T,
    c: T,
    fidelity: &FidelityModel<T>,
    cool_steps: usize,
) -> Result<Trajectory<T>> {
    if !(n_init >= T::zero()) {
        return Err(domain("initial occupation must be non-negative"));
    }
    if !(h >= T::zero()) || !(c >= T::zero()) {
        return Err(domain("heating and cooling rates must be non-negative"));
    }
    let cool_steps = cool_steps.max(1);
    let total = schedule.total_gates;
    let per = schedule.gates_per_cycle;
    let mut t = T::zero();
    let mut n = n_init;
    let mut samples = vec![Sample { t, n, phase: Phase::Gate }];
    let mut gates = Vec::with_capacity(total);
    let mut done = 0;
    let mut cycle = 0;
    while done < total {
        let k = per.min(total - done);
        let share = (schedule.cooling_time + schedule.radial_overhead) / T::from_usize_lossy(k);
        let wall = schedule.gate_time + share;
        for _ in 0..k {
            gates.push(GateRecord {
                index: done,
                cycle,
                start: t,
                n_start: n,
                wall_time: wall,
                fidelity: gate_fidelity(fidelity, n, wall),
            });
            t += schedule.gate_time;
            n = advance(n, Phase::Gate, schedule.gate_time, h, c);
            samples.push(Sample { t, n, phase: Phase::Gate });
            done += 1;
        }
        if schedule.cooling_time > T::zero() {
            let dt = schedule.cooling_time / T::from_usize_lossy(cool_steps);
            let start = t;
            let n_start = n;
            for s in 1..=cool_steps {
                let elapsed = dt * T::from_usize_lossy(s);
                let tn = if s == cool_steps { start + schedule.cooling_time } else { start + elapsed };
                let nn = advance(n_start, Phase::Cool, tn - start, h, c);
                samples.push(Sample { t: tn, n: nn, phase: Phase::Cool });
            }
            t = start + schedule.cooling_time;
            n = advance(n_start, Phase::Cool, schedule.cooling_time, h, c);
        }
        if schedule.radial_overhead > T::zero() {
            t += schedule.radial_overhead;
            n = advance(n, Phase::Radial, schedule.radial_overhead, h, c);
            samples.push(Sample { t, n, phase: Phase::Radial });
        }
        cycle += 1;
    }
    Ok(Trajectory { samples, gates })
}

impl<T: Real> Trajectory<T> {
    /// Circuit wall time, s.
    pub fn duration(&self) -> T {
        self.samples.last().map(|s| s.t).unwrap_or(T::zero())
    }

    /// Occupation at the end of each cooling segment.
    pub fn cooling_floors(&self) -> Vec<T> {
        let mut out = Vec::new();
        for (i, s) in self.samples.iter().enumerate() {
            let last_of_segment = self.samples.get(i + 1).is_none_or(|nx| nx.phase != Phase::Cool);
            if s.phase == Phase::Cool && last_of_segment {
                out.push(s.n);
            }
        }
        out
    }

    pub fn write_csv<W: io::Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(self.to_csv().as_bytes())
    }

    /// Rows `t_seconds,n_quanta,phase_label`, LF terminated.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t_seconds,n_quanta,phase_label\n");
        for p in &self.samples {
            let _ = writeln!(s, "{},{},{}", p.t, p.n, p.phase.label());
        }
        s
    }
}

/// Arithmetic mean of the per-gate fidelities.
pub fn mean_gate_fidelity<T: Real>(trajectory: &Trajectory<T>) -> Result<T> {
    if trajectory.gates.is_empty() {
        return Err(domain("trajectory has no gates"));
    }
    let sum = trajectory.gates.iter().fold(T::zero(), |a, g| a + g.fidelity);
    Ok(sum / T::from_usize_lossy(trajectory.gates.len()))
}

/// Product of the per-gate fidelities, accumulated as `exp(Σ ln F)`.
pub fn total_fidelity<T: Real>(trajectory: &Trajectory<T>) -> Result<T> {
    if trajectory.gates.is_empty() {
        return Err(domain("trajectory has no gates"));
    }
    let log_sum = trajectory.gates.iter().fold(T::zero(), |a, g| a + g.fidelity.ln());
    Ok(log_sum.exp())
}
