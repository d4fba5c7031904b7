use std::f64::consts::PI;
use std::fs;
use std::io::Write;

use anyhow::{bail, ensure, Context, Result};
use rayon::prelude::*;
use serde_json::Value;
use spinphase::berry::{berry_phase_adiabatic, gauge_field_sphere, sphere_lambda, DEFAULT_QUAD_POINTS};
use spinphase::dynamics::{mirror_phase_difference, ramp_fidelity, RunOptions, LEAKAGE_WARN};
use spinphase::entangle::{amplitude_pairs, berry_target, entangling_cycle, lambda_max_solve, EntangleOptions, Tune};
use spinphase::hamiltonian::{labeled_spectrum, polarization, DEFAULT_GRID_STEP};
use spinphase::nonadiabatic::{cxy_coefficient, delta_p, magic_fit, magic_lambda, p2_coefficient};
use spinphase::{CycleSchedule, Integrator, SpinRep};

use crate::output::{fmt_m, header, with_output, write_json, Cell, Table};
use crate::{Cli, Command, Format, TuneArg};

pub enum Outcome {
    Clean,
    ContractViolated(String),
}

/// `n` evenly spaced points on [lo, hi].
fn linspace(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    ensure!(lo.is_finite() && hi.is_finite(), "range bounds must be finite");
    ensure!(n >= 1, "need at least one point");
    if n == 1 {
        return Ok(vec![lo]);
    }
    ensure!(lo < hi, "range [{lo}, {hi}] is empty");
    Ok((0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect())
}

fn spin_note(rep: &SpinRep) -> String {
    format!("spin S = {}", fmt_m(rep.s()))
}

fn emit_table(cli: &Cli, table: &Table) -> Result<()> {
    let format = cli.format.unwrap_or(Format::Csv);
    with_output(cli.out.as_deref(), |w: &mut dyn Write| match format {
        Format::Csv => Ok(table.write_csv(w)?),
        Format::Json => write_json(&table.to_json(), w),
    })
}

fn emit_bundle(cli: &Cli, command: &str, value: Value) -> Result<()> {
    if cli.format == Some(Format::Csv) {
        bail!("{command} writes a JSON bundle; csv is only available for curves");
    }
    let mut obj = header(command);
    if let Value::Object(body) = value {
        obj.extend(body);
    }
    with_output(cli.out.as_deref(), |w: &mut dyn Write| write_json(&Value::Object(obj), w))
}

fn run_options(steps: f64, integrator: Integrator) -> Result<RunOptions> {
    ensure!(steps > 0.0 && steps.is_finite(), "--steps must be positive, got {steps}");
    Ok(RunOptions { steps_per_unit: steps, integrator, convergence_tol: None })
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Spectrum { spin, lambda_min, lambda_max, n_points } => {
            let lambdas = linspace(*lambda_min, *lambda_max, *n_points)?;
            let ms = spin.m_values();
            let mut columns = vec!["lambda".to_string()];
            columns.extend(ms.iter().map(|&m| format!("E({})", fmt_m(m))));
            columns.extend(ms.iter().map(|&m| format!("p({})", fmt_m(m))));
            let rows = lambdas
                .par_iter()
                .map(|&l| -> spinphase::Result<Vec<Cell>> {
                    let spec = labeled_spectrum(spin, l, DEFAULT_GRID_STEP)?;
                    let mut row = vec![Cell::Num(l)];
                    row.extend(spec.entries.iter().map(|e| Cell::Num(e.energy)));
                    for &m in &ms {
                        row.push(Cell::Num(polarization(spin, m, l)?));
                    }
                    Ok(row)
                })
                .collect::<spinphase::Result<Vec<_>>>()?;
            let mut t = Table::new("spectrum", columns);
            t.notes.push(spin_note(spin));
            t.rows = rows;
            emit_table(&cli, &t)?;
        }
        Command::GaugeSphere { spin, m, n_points } => {
            ensure!(*n_points >= 1, "--n-points must be at least 1");
            spin.index_of(*m)?;
            let rows = (1..=*n_points)
                .into_par_iter()
                .map(|k| -> spinphase::Result<Vec<Cell>> {
                    let tt = PI * k as f64 / (*n_points + 1) as f64;
                    Ok(vec![Cell::Num(tt), Cell::Num(sphere_lambda(tt)), Cell::Num(gauge_field_sphere(spin, *m, tt)?)])
                })
                .collect::<spinphase::Result<Vec<_>>>()?;
            let mut t = Table::new("gauge-sphere", vec!["theta_tilde".into(), "lambda".into(), "a_alpha".into()]);
            t.notes.push(format!("{}, m = {}, lambda = -2 cot(theta_tilde)", spin_note(spin), fmt_m(*m)));
            t.rows = rows;
            emit_table(&cli, &t)?;
        }
        Command::Magic { spin, eta_min, eta_max, n } => {
            let etas = linspace(*eta_min, *eta_max, *n)?;
            ensure!(etas.iter().all(|e| e.abs() < 1.0), "|eta| must stay below 1");
            let rows = etas
                .par_iter()
                .map(|&eta| -> spinphase::Result<Vec<Cell>> {
                    let exact = magic_lambda(spin, eta)?;
                    let fit = magic_fit(spin.two_s(), eta);
                    let residual = fit.map(|l| delta_p(spin, 0.0, l, eta).map(f64::abs)).transpose()?;
                    Ok(vec![Cell::Num(eta), Cell::Num(exact), fit.into(), residual.into()])
                })
                .collect::<spinphase::Result<Vec<_>>>()?;
            let mut t = Table::new(
                "magic",
                vec!["eta".into(), "lambda_star".into(), "lambda_fit".into(), "abs_delta_p_at_fit".into()],
            );
            t.notes.push(spin_note(spin));
            if magic_fit(spin.two_s(), 0.0).is_none() {
                t.notes.push("no fit available for this spin: fit columns left empty".into());
            }
            t.rows = rows;
            emit_table(&cli, &t)?;
        }
        Command::Ramp { spin, m, lambda0, shape, t: times, steps, integrator } => {
            let opts = run_options(*steps, *integrator)?;
            spin.index_of(*m)?;
            let rows = times
                .par_iter()
                .map(|&tt| -> spinphase::Result<Vec<Cell>> {
                    let o = ramp_fidelity(spin, *m, *lambda0, tt, *shape, &opts)?;
                    Ok(vec![
                        Cell::Num(tt),
                        Cell::Num(o.sz_final),
                        Cell::Num(o.sz_adiabatic),
                        Cell::Num(o.deviation),
                        Cell::Num(o.relative_deviation()),
                        Cell::Num(o.leakage),
                        Cell::Num(o.phase_error()),
                    ])
                })
                .collect::<spinphase::Result<Vec<_>>>()?;
            let mut t = Table::new(
                "ramp",
                ["T", "sz_final", "sz_adiabatic", "deviation", "relative_deviation", "leakage", "dynamical_phase_error"]
                    .map(String::from)
                    .to_vec(),
            );
            t.notes.push(format!(
                "{}, m = {}, lambda0 = {}, shape = {}, steps per unit time = {}, integrator = {}",
                spin_note(spin),
                fmt_m(*m),
                lambda0,
                shape.name(),
                steps,
                format!("{integrator:?}").to_lowercase()
            ));
            t.rows = rows;
            emit_table(&cli, &t)?;
        }
        Command::Transverse { spin, m, lambda_min, lambda_max, n } => {
            let lambdas = linspace(*lambda_min, *lambda_max, *n)?;
            let rows = lambdas
                .par_iter()
                .map(|&l| -> spinphase::Result<Vec<Cell>> {
                    let p2 = p2_coefficient(spin, *m, l)?;
                    let cxy = cxy_coefficient(spin, *m, l)?;
                    Ok(vec![Cell::Num(l), Cell::Num(p2.value), Cell::Num(cxy.value), (p2.large_correction || cxy.large_correction).into()])
                })
                .collect::<spinphase::Result<Vec<_>>>()?;
            let mut t = Table::new("transverse", ["lambda", "p2", "cxy", "large_correction"].map(String::from).to_vec());
            t.notes.push(format!("{}, m = {}", spin_note(spin), fmt_m(*m)));
            t.rows = rows;
            emit_table(&cli, &t)?;
        }
        Command::Cycle { schedule, spin, m, steps, integrator } => {
            let opts = run_options(*steps, *integrator)?;
            let text = fs::read_to_string(schedule).with_context(|| format!("cannot read {}", schedule.display()))?;
            let s = CycleSchedule::from_toml_str(&text).with_context(|| format!("invalid schedule {}", schedule.display()))?;
            let berry = berry_phase_adiabatic(spin, *m, &s, DEFAULT_QUAD_POINTS)?;
            let mirror = mirror_phase_difference(spin, *m, &s, &opts)?;
            let leakage = mirror.forward.leakage.max(mirror.mirror.leakage);
            let body = serde_json::json!({
                "spin": spin.s(),
                "m": m,
                "schedule": {
                    "file": schedule.display().to_string(),
                    "duration": s.duration,
                    "n_phi": s.n_phi,
                    "n_alpha": s.n_alpha,
                    "winding_angle": s.winding_angle(),
                    "max_abs_eta": s.max_abs_eta(4096),
                },
                "steps_per_unit": steps,
                "integrator": integrator,
                "berry_adiabatic": berry,
                "berry_mirror_extracted": mirror.extracted,
                "dynamical_phase": mirror.forward.dynamical_phase,
                "total_phase": mirror.forward.total_phase,
                "leakage": leakage,
                "trusted": mirror.trusted,
                "forward": mirror.forward,
                "mirror": mirror.mirror,
            });
            emit_bundle(&cli, "cycle", body)?;
            if !mirror.trusted {
                return Ok(Outcome::ContractViolated(format!(
                    "leakage {leakage:.3e} exceeds {LEAKAGE_WARN}; the extracted phase is not adiabatic"
                )));
            }
        }
        Command::Entangle { lambda0, t, tune, steps, integrator } => {
            ensure!(*steps > 0.0 && steps.is_finite(), "--steps must be positive, got {steps}");
            let l0 = match lambda0 {
                Some(l) => *l,
                None => lambda_max_solve()?,
            };
            let opts = EntangleOptions {
                steps_per_unit: *steps,
                integrator: *integrator,
                tune: match tune {
                    TuneArg::Auto => Tune::Auto,
                    TuneArg::Fixed(x) => Tune::Fixed(*x),
                },
            };
            let r = entangling_cycle(l0, *t, &opts)?;
            let index_pairs = |pairs: Vec<[f64; 2]>| -> Vec<Value> {
                pairs
                    .into_iter()
                    .enumerate()
                    .map(|(k, [re, im])| serde_json::json!({ "index": k, "re": re, "im": im }))
                    .collect()
            };
            let mut body = serde_json::to_value(&r)?;
            if let Value::Object(o) = &mut body {
                o.insert("tune".into(), Value::from(matches!(tune, TuneArg::Auto).then_some("auto").unwrap_or("fixed")));
                o.insert("steps_per_unit".into(), Value::from(*steps));
                o.insert("integrator".into(), serde_json::to_value(integrator)?);
                o.insert("final_amplitudes".into(), Value::from(index_pairs(amplitude_pairs(&r.final_state))));
                o.insert("target_amplitudes".into(), Value::from(index_pairs(amplitude_pairs(&berry_target(l0)))));
            }
            emit_bundle(&cli, "entangle", body)?;
            if !r.adiabatic {
                return Ok(Outcome::ContractViolated(format!(
                    "population {:.3e} left the M = 1 sector",
                    r.sector_leakage
                )));
            }
        }
    }
    Ok(Outcome::Clean)
}
