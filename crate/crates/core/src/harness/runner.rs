//! Closed-loop scenario execution.
//!
//! Per physics tick: apply due failures; every high-level tick sense, run the
//! LQI, adjust limits and allocate; push the module commands through the
//! delay line; every low-level tick run compensation and the module
//! controllers; then step the plant.

use log::{debug, info, warn};
use nalgebra::{Vector2, Vector3, Vector4};

use super::config::Config;
use super::metrics::{compute_metrics, is_diverged, Metrics};
use super::scenario::{AllocationMode, Scenario};
use super::trace::{Trace, TraceRecord, SAT_ALLOCATION_CONSTRAINED, SAT_QP_NOT_OPTIMAL, SAT_THRUST_COMMAND};
use super::trajectory::generate_trajectory;
use crate::allocation::{AllocationLimits, Allocator, NullspaceWarmStart};
use crate::controller::{attitude_angle_error, lowlevel_step, LowLevelOutput, LowLevelState, LqiState};
use crate::error::{Error, Result};
use crate::ftc::{adjust_thrust_limits, compensate, good_modules, CompensationProblem, ThrustLimits};
use crate::model::{
    FailureStatus, FailureStrategy, PlatformParams, PlatformState, PropellerSet, PropellerThrusts, QuadCommand,
    NUM_QUADS,
};
use crate::numerics::QpStatus;
use crate::sim::{apply_failures, delay_steps, plant_step, DelayLine, MotorLag, Sensor};

/// How often each loop ran.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LoopCounters {
    pub physics_ticks: usize,
    pub lowlevel_ticks: usize,
    pub highlevel_ticks: usize,
    /// Physics ticks per low-level tick.
    pub ll_every: usize,
    /// Low-level ticks per high-level tick.
    pub hl_every_ll: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Trace,
    pub metrics: Metrics,
    pub counters: LoopCounters,
}

fn ratio(a: f64, b: f64, what: &str) -> Result<usize> {
    let r = (a / b).round();
    if !(r >= 1.0) || !r.is_finite() {
        return Err(Error::Config(format!("{what} must be at least one tick")));
    }
    Ok(r as usize)
}

/// The module with a survivable failure, when it is the only failed one.
fn compensation_target(status: &[FailureStatus; NUM_QUADS]) -> Option<usize> {
    let failed: Vec<usize> = (0..NUM_QUADS).filter(|&i| !status[i].is_nominal()).collect();
    match failed.as_slice() {
        [i] => match status[*i].strategy {
            FailureStrategy::OneFail(_) | FailureStrategy::TwoFailControllable(..) => Some(*i),
            _ => None,
        },
        _ => None,
    }
}

pub fn run_scenario(scenario: &Scenario, cfg: &Config) -> Result<RunOutput> {
    scenario.validate()?;
    cfg.validate()?;
    let params = PlatformParams::new(&cfg.platform)?;
    let sim = &cfg.sim;
    let dt = sim.dt_physics;
    let ll_every = ratio(1.0 / params.ll_rate, dt, "low-level period")?;
    let hl_every_ll = ratio(params.ll_rate, params.hl_rate, "high-level period")?;
    let hl_every = ll_every * hl_every_ll;
    let ll_dt = ll_every as f64 * dt;
    let hl_dt = hl_every as f64 * dt;
    let n_ticks = (scenario.duration / dt).round() as usize;
    let delay = delay_steps(sim.comm_delay.unwrap_or(params.comm_delay), dt);
    let seed = scenario.seed.unwrap_or(sim.seed);
    info!(
        "{}: {} ticks, low level every {ll_every}, high level every {hl_every}, delay {delay} ticks, seed {seed}",
        scenario.name, n_ticks
    );

    let mut lqi = LqiState::new(&params, &cfg.lqi)?;
    let allocator = Allocator::new(&params, &cfg.allocation);
    let mut limits = AllocationLimits::nominal(&params, &cfg.allocation);
    let mut ll: [LowLevelState; NUM_QUADS] =
        std::array::from_fn(|_| LowLevelState::new(cfg.lowlevel, scenario.variant.lowlevel));
    let mut sensor = Sensor::new(sim.noise, seed);
    let mut motors = MotorLag::new(sim.motor_tau);

    let hover = params.hover_thrust();
    let hover_cmd = QuadCommand::new(hover, 0.0, params.t_max);
    let mut hl_cmd = [hover_cmd; NUM_QUADS];
    let mut delay_line = DelayLine::new(delay, hl_cmd);

    let mut events = scenario.failures.clone();
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    let mut next_event = 0;
    let mut failed = [PropellerSet::EMPTY; NUM_QUADS];
    let mut status = [FailureStatus::default(); NUM_QUADS];

    let mut state = PlatformState::default();
    let mut prev_alpha = Vector4::zeros();
    let mut prev_thrust = Vector4::repeat(hover);
    let mut warm = NullspaceWarmStart::default();
    let mut outs =
        [LowLevelOutput { thrusts: PropellerThrusts::uniform(hover / 4.0), ..LowLevelOutput::default() }; NUM_QUADS];
    let mut last_my = Vector4::zeros();
    let mut aux = (Vector3::zeros(), Vector3::zeros());
    let mut platform_lost = false;

    let mut trace = Trace { duration: scenario.duration, ..Trace::default() };
    let mut counters = LoopCounters { ll_every, hl_every_ll, ..LoopCounters::default() };

    for tick in 0..n_ticks {
        let t = tick as f64 * dt;
        while next_event < events.len() && events[next_event].time <= t + 0.5 * dt {
            let e = events[next_event];
            failed[e.quad] = failed[e.quad].union(e.propellers);
            status[e.quad] = FailureStatus::new(failed[e.quad]);
            info!("t={t:.3}: module {} propellers {} failed -> {:?}", e.quad, failed[e.quad], status[e.quad].strategy);
            next_event += 1;
        }

        if tick % hl_every == 0 {
            counters.highlevel_ticks += 1;
            let reference = generate_trajectory(&scenario.trajectory, t);
            let meas = sensor.measure(&state);
            let u_d = lqi.step(&meas, &reference, hl_dt);

            match adjust_thrust_limits(&status, params.t_max) {
                ThrustLimits::Limits(v) => limits.t_max = v,
                ThrustLimits::PlatformFailure { lost } => {
                    if !platform_lost {
                        warn!("t={t:.3}: modules {lost:?} lost, platform cannot be controlled");
                    }
                    platform_lost = true;
                    limits.t_max = Vector4::zeros();
                }
            }
            let alloc = match scenario.variant.allocation {
                AllocationMode::Fd => allocator.fd_allocate(&u_d, &Vector2::zeros(), &prev_alpha),
                AllocationMode::Nullspace => {
                    allocator.nullspace_allocate(&u_d, &prev_alpha, &prev_thrust, &limits, &warm)
                }
            };
            prev_alpha = alloc.alpha;
            prev_thrust = alloc.thrust;
            warm = alloc.warm.clone();

            let mut flags = 0;
            for i in 0..NUM_QUADS {
                let thrust = if platform_lost { 0.0 } else { alloc.thrust[i] };
                hl_cmd[i] = QuadCommand::new(thrust, alloc.alpha[i], params.t_max);
                if alloc.thrust[i] > 4.0 * params.t_max {
                    flags |= SAT_THRUST_COMMAND;
                }
                if outs[i].saturated {
                    flags |= 1 << i;
                }
            }
            if alloc.constrained {
                flags |= SAT_ALLOCATION_CONSTRAINED;
            }
            if alloc.qp_status.is_some_and(|s| s != QpStatus::Optimal) {
                flags |= SAT_QP_NOT_OPTIMAL;
            }

            let record = TraceRecord {
                t,
                xi: state.xi,
                eta: state.eta,
                xi_r: reference.xi_r,
                eta_r: reference.eta_r,
                alpha: state.alpha,
                thrust_alloc: alloc.thrust,
                alpha_alloc: alloc.alpha,
                props: std::array::from_fn(|i| outs[i].thrusts.t),
                mx_dist: outs.iter().map(|o| o.mx_dist).sum(),
                mz_dist: outs.iter().map(|o| o.mz_dist).sum(),
                mx_aux: aux.0,
                mz_aux: aux.1,
                sat_flags: flags,
                u_d: u_d.to_vector(),
                pos_err: (reference.xi_r - state.xi).norm(),
                att_err: attitude_angle_error(&state.eta, &reference.eta_r),
            };
            let diverged = is_diverged(&record);
            trace.records.push(record);
            if diverged {
                info!("{}: diverged at t={t:.3}", scenario.name);
                break;
            }
        }

        let delayed = delay_line.push(hl_cmd);

        if tick % ll_every == 0 {
            counters.lowlevel_ticks += 1;
            let target = compensation_target(&status);
            let mut cmds = delayed;
            if let Some(bad) = target {
                outs[bad] = lowlevel_step(
                    &cmds[bad],
                    state.alpha[bad],
                    state.alpha_dot[bad],
                    &status[bad],
                    &mut ll[bad],
                    &params,
                    ll_dt,
                );
                last_my[bad] = outs[bad].my_cmd;
            }
            aux = (Vector3::zeros(), Vector3::zeros());
            if let (Some(bad), true) = (target, scenario.variant.compensation) {
                let problem = CompensationProblem {
                    alpha: state.alpha,
                    thrust: Vector4::from_fn(|i, _| cmds[i].thrust),
                    my: last_my,
                    bad,
                    disturbance: Vector2::new(outs[bad].mx_dist, outs[bad].mz_dist),
                };
                let comp = compensate(&problem, &params, &cfg.compensation);
                for (n, &g) in good_modules(bad).iter().enumerate() {
                    cmds[g].mx_aux = comp.mx_aux[n];
                    cmds[g].mz_aux = comp.mz_aux[n];
                }
                aux = (comp.mx_aux, comp.mz_aux);
                debug!("t={t:.3}: compensation residual {:.3e}", comp.residual.amax());
            }
            for i in 0..NUM_QUADS {
                if Some(i) == target {
                    continue;
                }
                outs[i] =
                    lowlevel_step(&cmds[i], state.alpha[i], state.alpha_dot[i], &status[i], &mut ll[i], &params, ll_dt);
                last_my[i] = outs[i].my_cmd;
            }
            trace.ll_steps += 1;
            if outs.iter().any(|o| o.saturated) {
                trace.ll_saturated_steps += 1;
            }
        }

        let commanded: [PropellerThrusts; NUM_QUADS] =
            std::array::from_fn(|i| apply_failures(&outs[i].thrusts, failed[i]));
        let applied = motors.step(&commanded, dt);
        state = plant_step(&state, &applied, &params, sim);
        counters.physics_ticks += 1;
        if !state.is_finite() {
            warn!("{}: non-finite state at t={:.3}", scenario.name, t + dt);
            trace.records.push(TraceRecord {
                t: t + dt,
                pos_err: f64::NAN,
                att_err: f64::NAN,
                ..TraceRecord::default()
            });
            break;
        }
    }

    let metrics = compute_metrics(&trace);
    Ok(RunOutput { trace, metrics, counters })
}
