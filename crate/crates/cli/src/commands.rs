//! One function per subcommand. Each returns the table written to CSV, a JSON
//! summary and a one-line headline.

use std::f64::consts::PI;

use serde_json::{json, Value};

use ioncool::dynamics::{evolve_sampled, mean_gate_fidelity, total_fidelity, DutyCycleSchedule};
use ioncool::limit::{cooling_limit, quadratic_upper_bound};
use ioncool::modes::{com_mode_index, normal_modes};
use ioncool::optimize::{
    calibrate_d, calibrate_kappa, chain_cooling, enumerate_placements, fmt_f, labels_to_indices, sweep_coolant_count,
    sweep_duty_cycle, sweep_frequency_fill, ChainLayout, CircuitSpec, CoolantRow, CoolantSweepSpec, DutyRow,
    DutySweepSpec, FreqFillSpec, HeatingReference, HeatmapCell, KappaReference, KappaScaling, PlacementRow,
    StudyContext, Tabular,
};
use ioncool::potential::{calibrate_equispacing, centered_indices, offset_label, solve_equilibrium, IonChain, IonRole};
use ioncool::units::normalization_for_amu;
use ioncool::{Error, FidelityModel, HeatingModel, TrapPotential};

use crate::config::{LayoutKind, RunConfig};

pub struct Outcome {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub summary: Value,
    pub headline: String,
}

fn table<R: Tabular>(rows: &[R]) -> (Vec<String>, Vec<Vec<String>>) {
    (R::header().into_iter().map(String::from).collect(), rows.iter().map(|r| r.fields()).collect())
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// Heating/fidelity context with calibrations resolved.
pub fn context(cfg: &RunConfig) -> Result<(StudyContext, Value), Error> {
    let mut ctx = StudyContext::uncalibrated();
    ctx.norm = normalization_for_amu(cfg.trap.mass_amu)?;
    ctx.method = cfg.cooling.method;
    ctx.circuit = CircuitSpec {
        n_qubits: cfg.schedule.n_qubits,
        total_gates: cfg.schedule.total_gates,
        gate_time: cfg.schedule.gate_time_s,
    };
    let h = &cfg.heating;
    ctx.heating = HeatingModel::new(h.alpha, h.a0, h.b0, h.d.value().unwrap_or(1.0))?;
    if h.d.value().is_none() {
        let reference = HeatingReference { n0: h.reference_n0, ..HeatingReference::default() };
        ctx.heating = calibrate_d(&ctx, &reference)?;
    }
    ctx.fidelity = FidelityModel::new(cfg.fidelity.t2_s, cfg.fidelity.kappa.value().unwrap_or(0.0))?;
    let reference = KappaReference {
        layout: ChainLayout::Equispaced { spacing_m: cfg.sweep.spacing_m },
        cooling_time: cfg.fidelity.reference_cooling_time_s,
        frequency_exponent: cfg.fidelity.kappa_exponent,
        ..KappaReference::default()
    };
    match cfg.fidelity.kappa.value() {
        Some(_) => {
            let omega = if cfg.fidelity.kappa_exponent == 0.0 { 1.0 } else { reference.com_omega(&ctx)? };
            ctx.kappa_scaling = KappaScaling { reference_omega: omega, exponent: cfg.fidelity.kappa_exponent };
        }
        None => {
            let k = calibrate_kappa(&ctx, &reference)?;
            ctx.fidelity.kappa = k.kappa;
            ctx.kappa_scaling = k.scaling;
        }
    }
    let info = json!({
        "d": ctx.heating.d,
        "d_calibrated": h.d.value().is_none(),
        "kappa": ctx.fidelity.kappa,
        "kappa_calibrated": cfg.fidelity.kappa.value().is_none(),
        "kappa_reference_com_frequency_hz": ctx.kappa_scaling.reference_omega / (2.0 * PI),
        "kappa_exponent": ctx.kappa_scaling.exponent,
        "t2_s": ctx.fidelity.t2,
    });
    Ok((ctx, info))
}

/// Chain described by `[trap]` and `[chain]`.
pub fn build_chain(cfg: &RunConfig) -> Result<IonChain<f64>, Error> {
    let norm = normalization_for_amu(cfg.trap.mass_amu)?;
    let c = &cfg.chain;
    let (pot, positions) = match c.layout {
        LayoutKind::Fixed => {
            let pot = TrapPotential::new(cfg.trap.x2, cfg.trap.x4)?;
            (pot, solve_equilibrium(&pot, c.n_ions, None)?)
        }
        LayoutKind::Equispaced => {
            let fit = calibrate_equispacing(c.n_ions, c.spacing_m, &norm, c.family)?;
            (fit.potential, fit.positions)
        }
    };
    let coolants = match &c.coolant_labels {
        Some(labels) => labels_to_indices(c.n_ions, labels)?,
        None => {
            let candidates: Vec<usize> = if c.endcaps && c.n_ions >= 2 {
                (1..c.n_ions - 1).collect()
            } else {
                (0..c.n_ions).collect()
            };
            centered_indices(c.n_ions, &candidates, c.n_coolants)?
        }
    };
    IonChain::from_positions(pot, positions, &coolants, c.endcaps)
}

fn study_layout(cfg: &RunConfig) -> Result<ChainLayout, Error> {
    Ok(match cfg.sweep.layout {
        LayoutKind::Equispaced => ChainLayout::Equispaced { spacing_m: cfg.sweep.spacing_m },
        LayoutKind::Fixed => ChainLayout::Fixed(TrapPotential::new(cfg.trap.x2, cfg.trap.x4)?),
    })
}

fn role_label(r: IonRole) -> &'static str {
    match r {
        IonRole::Coolant => "coolant",
        IonRole::Qubit => "qubit",
        IonRole::Endcap => "endcap",
    }
}

pub fn equilibrium(cfg: &RunConfig) -> Result<Outcome, Error> {
    let norm = normalization_for_amu(cfg.trap.mass_amu)?;
    let chain = build_chain(cfg)?;
    let n = chain.n_ions();
    let rows = (0..n)
        .map(|i| {
            vec![
                i.to_string(),
                offset_label(n, i).to_string(),
                role_label(chain.roles[i]).to_string(),
                fmt_f(chain.positions[i]),
                fmt_f(norm.length_to_si(chain.positions[i])),
            ]
        })
        .collect();
    let spacings: Vec<f64> = chain.spacings().iter().map(|&s| norm.length_to_si(s)).collect();
    let mean = norm.length_to_si(chain.mean_spacing());
    let spread = ioncool::potential::relative_spread(&chain.spacings());
    Ok(Outcome {
        header: strings(&["index", "label", "role", "position_normalized", "position_m"]),
        rows,
        summary: json!({
            "n_ions": n,
            "x2": chain.potential.x2,
            "x4": chain.potential.x4,
            "mean_spacing_m": mean,
            "relative_spacing_spread": spread,
            "min_spacing_m": spacings.iter().cloned().fold(f64::INFINITY, f64::min),
            "max_spacing_m": spacings.iter().cloned().fold(0.0, f64::max),
        }),
        headline: format!("mean spacing = {:.4} um over {} ions (spread {:.2}%)", mean * 1e6, n, spread * 100.0),
    })
}

pub fn modes(cfg: &RunConfig) -> Result<Outcome, Error> {
    let norm = normalization_for_amu(cfg.trap.mass_amu)?;
    let chain = build_chain(cfg)?;
    let spectrum = normal_modes(&chain.hessian())?;
    let com = com_mode_index(&spectrum)?;
    let n = chain.n_ions();
    let mut header = strings(&["mode", "frequency_hz", "is_com"]);
    header.extend((0..n).map(|i| format!("v_ion{i}")));
    let rows = (0..spectrum.len())
        .map(|m| {
            let mut r = vec![m.to_string(), fmt_f(norm.frequency_to_hz(spectrum.frequency(m))), (m == com).to_string()];
            r.extend((0..n).map(|i| fmt_f(spectrum.participation(m, i))));
            r
        })
        .collect();
    let com_hz = norm.frequency_to_hz(spectrum.frequency(com));
    Ok(Outcome {
        header,
        rows,
        summary: json!({
            "n_ions": n,
            "com_mode": com,
            "com_frequency_hz": com_hz,
            "com_frequency_normalized": spectrum.frequency(com),
        }),
        headline: format!("COM mode {com} at {:.3} kHz", com_hz / 1e3),
    })
}

pub fn cooling_limit_cmd(cfg: &RunConfig) -> Result<Outcome, Error> {
    let (ctx, calibration) = context(cfg)?;
    let chain = build_chain(cfg)?;
    let gamma = cfg.cooling.gamma().map_err(|e| Error::Domain(e.to_string()))?;
    let report = cooling_limit(&chain, &ctx.heating, gamma, ctx.method, &ctx.norm)?;
    let labels: Vec<i64> = chain.coolant_indices().iter().map(|&i| offset_label(chain.n_ions(), i)).collect();
    let bound = if chain.potential.x2 > 0.0 {
        quadratic_upper_bound(chain.n_ions(), labels.len(), chain.potential.x2, gamma, &ctx.heating, &ctx.norm)
            .ok()
            .map(|b| b.n0)
    } else {
        None
    };
    Ok(Outcome {
        header: strings(&["method", "gamma", "com_frequency_hz", "heating_rate_per_s", "cooling_rate_per_s", "n0_quanta"]),
        rows: vec![vec![
            report.method.name().to_string(),
            fmt_f(gamma),
            fmt_f(report.omega0 / (2.0 * PI)),
            fmt_f(report.h),
            fmt_f(report.c),
            fmt_f(report.n0),
        ]],
        summary: json!({
            "method": report.method.name(),
            "gamma": gamma,
            "coolant_labels": labels,
            "com_frequency_hz": report.omega0 / (2.0 * PI),
            "heating_rate_per_s": report.h,
            "cooling_rate_per_s": report.c,
            "n0_quanta": report.n0,
            "quadratic_bound_n0_quanta": bound,
            "calibration": calibration,
        }),
        headline: format!("n0 = {:.4} quanta ({})", report.n0, report.method.name()),
    })
}

pub fn trajectory(cfg: &RunConfig) -> Result<Outcome, Error> {
    let (ctx, calibration) = context(cfg)?;
    let chain = build_chain(cfg)?;
    let gamma = cfg.cooling.gamma().map_err(|e| Error::Domain(e.to_string()))?;
    let cooling = chain_cooling(&ctx, &chain, gamma)?;
    let s = &cfg.schedule;
    let schedule =
        DutyCycleSchedule::new(s.gate_time_s, s.gates_per_cycle, s.cooling_time_s, s.total_gates, s.radial_overhead_s)?;
    let n_init = s.n_init_quanta.unwrap_or(cooling.n0);
    let fidelity = ctx.effective_fidelity(cooling.omega0);
    let traj = evolve_sampled(n_init, &schedule, cooling.h, cooling.c, &fidelity, s.cool_steps)?;
    let mean = mean_gate_fidelity(&traj)?;
    let total = total_fidelity(&traj)?;
    let rows = traj.samples.iter().map(|p| vec![fmt_f(p.t), fmt_f(p.n), p.phase.label().to_string()]).collect();
    Ok(Outcome {
        header: strings(&["t_seconds", "n_quanta", "phase_label"]),
        rows,
        summary: json!({
            "com_frequency_hz": cooling.omega0 / (2.0 * PI),
            "heating_rate_per_s": cooling.h,
            "cooling_rate_per_s": cooling.c,
            "n0_quanta": cooling.n0,
            "n_init_quanta": n_init,
            "duty_cycle": schedule.duty_cycle(),
            "n_cycles": schedule.n_cycles(),
            "wall_time_s": traj.duration(),
            "mean_fidelity": mean,
            "total_fidelity": total,
            "cooling_floors": traj.cooling_floors().iter().take(16).collect::<Vec<_>>(),
            "calibration": calibration,
        }),
        headline: format!("<F> = {mean:.6}, F_total = {total:.4} over {:.4} s", traj.duration()),
    })
}

pub fn placement_scan(cfg: &RunConfig) -> Result<Outcome, Error> {
    let (ctx, calibration) = context(cfg)?;
    let gamma = cfg.cooling.gamma().map_err(|e| Error::Domain(e.to_string()))?;
    let pot = TrapPotential::new(cfg.trap.x2, cfg.trap.x4)?;
    let rows: Vec<PlacementRow> = enumerate_placements(&ctx, &pot, cfg.chain.n_ions, cfg.chain.n_coolants, gamma)?;
    let (header, table_rows) = table(&rows);
    let best = &rows[0];
    let worst = &rows[rows.len() - 1];
    Ok(Outcome {
        header,
        rows: table_rows,
        summary: json!({
            "configurations": rows.len(),
            "best": { "labels": best.labels, "n0_quanta": best.n0, "cooling_rate_per_s": best.c },
            "worst": { "labels": worst.labels, "n0_quanta": worst.n0, "cooling_rate_per_s": worst.c },
            "calibration": calibration,
        }),
        headline: format!("best of {}: {:?} with n0 = {:.3} quanta", rows.len(), best.labels, best.n0),
    })
}

pub fn coolant_scan(cfg: &RunConfig) -> Result<Outcome, Error> {
    let (ctx, calibration) = context(cfg)?;
    let spec = CoolantSweepSpec {
        layout: study_layout(cfg)?,
        coolant_counts: cfg.sweep.coolant_counts.clone(),
        gamma: cfg.cooling.gamma().map_err(|e| Error::Domain(e.to_string()))?,
        gates_per_cycle: cfg.schedule.gates_per_cycle,
        cooling_times: vec![cfg.schedule.cooling_time_s],
    };
    let result = sweep_coolant_count(&ctx, &spec)?;
    let (header, rows) = table::<CoolantRow>(&result.rows);
    let best = &result.argmax[0];
    Ok(Outcome {
        header,
        rows,
        summary: json!({
            "argmax": result.argmax,
            "failed_points": result.rows.iter().filter(|r| !r.error.is_empty()).count(),
            "calibration": calibration,
        }),
        headline: format!("best N_C = {} with <F> = {:.6}", best.n_coolants, best.mean_fidelity),
    })
}

pub fn duty_scan(cfg: &RunConfig) -> Result<Outcome, Error> {
    let (ctx, calibration) = context(cfg)?;
    let spec = DutySweepSpec {
        layout: study_layout(cfg)?,
        n_coolants: cfg.sweep.n_coolants,
        gammas: cfg.sweep.gammas().map_err(|e| Error::Domain(e.to_string()))?,
        gates_per_cycle: cfg.sweep.gates_per_cycle.clone(),
        cooling_times: cfg.sweep.cooling_times().map_err(|e| Error::Domain(e.to_string()))?,
        radial_factor: cfg.sweep.radial_factor,
        refine: cfg.sweep.refine,
    };
    let result = sweep_duty_cycle(&ctx, &spec)?;
    let (header, rows) = table::<DutyRow>(&result.rows);
    let best: Vec<_> = result.best.iter().map(|&i| &result.optima[i]).collect();
    let headline = best
        .iter()
        .map(|o| {
            let name = o.rabi_khz.map(|k| format!("{k} kHz")).unwrap_or_else(|| format!("gamma {}", o.gamma));
            format!(
                "{name}: {} gate/cycle, {:.1} us, duty {:.2}%",
                o.gates_per_cycle,
                o.refined.cooling_time * 1e6,
                o.refined.duty_cycle * 100.0
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    Ok(Outcome {
        header,
        rows,
        summary: json!({
            "radial_factor": spec.radial_factor,
            "chains": result.chains,
            "optima": result.optima,
            "best": best,
            "calibration": calibration,
        }),
        headline,
    })
}

pub fn freq_fill_scan(cfg: &RunConfig) -> Result<Outcome, Error> {
    let (ctx, calibration) = context(cfg)?;
    let w = &cfg.sweep;
    let counts = if w.heatmap_coolant_counts.is_empty() {
        (1..=w.heatmap_n_ions).collect()
    } else {
        w.heatmap_coolant_counts.clone()
    };
    let spec = FreqFillSpec {
        n_ions: w.heatmap_n_ions,
        com_frequencies: w.com_frequencies_hz.clone(),
        coolant_counts: counts,
        gamma: cfg.cooling.gamma().map_err(|e| Error::Domain(e.to_string()))?,
        family: w.heatmap_family,
        base_spacing_m: w.spacing_m,
    };
    let cells = sweep_frequency_fill(&ctx, &spec)?;
    let (header, rows) = table::<HeatmapCell>(&cells);
    let best = cells.iter().min_by(|a, b| a.n0.total_cmp(&b.n0)).expect("non-empty heatmap");
    Ok(Outcome {
        header,
        rows,
        summary: json!({
            "n_ions": spec.n_ions,
            "cells": cells.len(),
            "min_n0": { "com_frequency_hz": best.com_frequency, "n_coolants": best.n_coolants, "n0_quanta": best.n0 },
            "calibration": calibration,
        }),
        headline: format!(
            "lowest n0 = {:.3} quanta at {:.0} kHz with {} coolants",
            best.n0,
            best.com_frequency / 1e3,
            best.n_coolants
        ),
    })
}

pub fn calibrate(cfg: &RunConfig) -> Result<Outcome, Error> {
    let (ctx, calibration) = context(cfg)?;
    let rows = vec![
        vec!["d".to_string(), fmt_f(ctx.heating.d)],
        vec!["kappa".to_string(), fmt_f(ctx.fidelity.kappa)],
        vec!["kappa_reference_com_frequency_hz".to_string(), fmt_f(ctx.kappa_scaling.reference_omega / (2.0 * PI))],
        vec!["kappa_exponent".to_string(), fmt_f(ctx.kappa_scaling.exponent)],
    ];
    Ok(Outcome {
        header: strings(&["parameter", "value"]),
        rows,
        summary: calibration,
        headline: format!("D = {:.6e}, kappa = {:.6e}", ctx.heating.d, ctx.fidelity.kappa),
    })
}
