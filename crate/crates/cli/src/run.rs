use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use topophase::dynamics::{autocorrelation, interferometric_phase, precess, Driver, SpinState};
use topophase::fields::assemble_field_tensor;
use topophase::gauge::{check_topological_conditions, Provenance};
use topophase::phase::{
    ac_phase, open_path_phase, sab_phase, surface_flux_phase, winding_number, QuadratureOptions, Surface,
    SIGN_CONVENTION,
};
use topophase::spinor::verify_bilinear_identities;

use crate::report::*;
use crate::scenario::{DriverKind, DriverSpec, PhaseKind, Scenario, TaskKind, TaskSpec};

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub seed: u64,
    /// Omit wall-clock timings so identical runs give identical bytes.
    pub normalized: bool,
}

/// A finished run: the report plus sidecar files keyed by relative name.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: ReportDocument,
    pub sidecars: Vec<Sidecar>,
}

impl RunOutput {
    pub fn failed_tasks(&self) -> usize {
        self.report.tasks.iter().filter(|t| t.status == TaskStatus::Failed).count()
    }

    /// Writes `report.json` and the sidecars into `dir`, creating it.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, bytes) in &self.sidecars {
            std::fs::write(dir.join(name), bytes)?;
        }
        std::fs::write(dir.join("report.json"), to_json(&self.report))
    }
}

/// Relative file name and contents.
type Sidecar = (String, Vec<u8>);

struct Outcome {
    result: TaskResult,
    sidecar: Option<Sidecar>,
}

fn driver(scenario: &Scenario, spec: &DriverSpec) -> Driver {
    let mu = scenario.particle.moment();
    match spec.kind {
        DriverKind::PeshkinLipkin => {
            Driver::peshkin_lipkin_from_config(scenario.field.clone(), mu, spec.start, spec.velocity)
        }
        DriverKind::Effective => Driver::effective_from_config(
            scenario.field.clone(),
            Provenance::Nonrelativistic(scenario.particle.polarization()),
            mu,
            spec.start,
            spec.velocity,
            spec.derivative_step,
        ),
    }
}

fn note(kind: DriverKind) -> Option<&'static str> {
    (kind == DriverKind::Effective).then_some(EFFECTIVE_NOTE)
}

fn execute(scenario: &Scenario, task: &TaskSpec, seed: u64) -> topophase::Result<Outcome> {
    let particle = &scenario.particle;
    let field = &scenario.field;
    let result = match &task.kind {
        TaskKind::Phase { path, which, tolerance, velocity } => {
            let path = &scenario.paths[path];
            let opts = QuadratureOptions { tolerance: *tolerance, ..Default::default() };
            let winding = match (path.path().is_closed(), field.singular_axes().first()) {
                (true, Some(axis)) => Some(winding_number(path.path(), axis)?),
                _ => None,
            };
            let (mu, s) = (particle.moment(), particle.polarization());
            let breakdown = match which {
                PhaseKind::Open => Some(open_path_phase(field, particle, path, &opts)?),
                PhaseKind::Ac => Some(ac_phase(field, mu, &s, velocity, path, &opts)?),
                PhaseKind::Sab => Some(sab_phase(field, mu, &s, path, &opts)?),
                PhaseKind::Flux => None,
            };
            let r = match breakdown {
                Some(b) => PhaseResult {
                    which: *which,
                    value: b.total,
                    error_estimate: b.error_estimate,
                    breakdown: Some(b),
                    winding,
                    refinements: None,
                },
                None => {
                    let f = surface_flux_phase(field, particle, path.path(), &Surface::Fan, path.time(0.0))?;
                    PhaseResult {
                        which: *which,
                        value: f.value,
                        error_estimate: f.last_change,
                        breakdown: None,
                        winding,
                        refinements: Some(f.refinements),
                    }
                }
            };
            return Ok(Outcome { result: TaskResult::Phase(r), sidecar: None });
        }
        TaskKind::Conditions { region, tolerance, step } => {
            let report = check_topological_conditions(field, &particle.polarization(), region, *tolerance, *step)?;
            let mut csv = Vec::new();
            report.write_csv(&mut csv)?;
            let r = ConditionsResult {
                pass: report.pass(),
                ac_pass: report.ac_pass(),
                sab_pass: report.sab_pass(),
                report,
            };
            return Ok(Outcome {
                result: TaskResult::Conditions(r),
                sidecar: Some((format!("{}.csv", task.name), csv)),
            });
        }
        TaskKind::Evolve { setup } => TaskResult::Evolve(interferometric_phase(field, setup)?),
        TaskKind::Precession { driver: spec, t0, t1, steps, initial, stride } => {
            let state = SpinState::along(initial)?;
            let tr = precess(&state, &driver(scenario, spec), *t0, *t1, *steps)?;
            let mut csv = String::from("t,sx,sy,sz\n");
            for (t, b) in tr.times.iter().zip(&tr.bloch).step_by(*stride) {
                writeln!(csv, "{t:?},{:?},{:?},{:?}", b.x, b.y, b.z).expect("string write");
            }
            let r = PrecessionResult {
                driver: spec.kind,
                steps: *steps,
                initial_bloch: triple(&tr.bloch[0]),
                final_bloch: triple(&tr.last()),
                norm_drift: tr.norm_drift(),
                max_deviation: tr.max_deviation(),
                note: note(spec.kind),
            };
            return Ok(Outcome {
                result: TaskResult::Precession(r),
                sidecar: Some((format!("{}.csv", task.name), csv.into_bytes())),
            });
        }
        TaskKind::Autocorrelation { driver: spec, t_i, t_f, state } => {
            let r = autocorrelation(&driver(scenario, spec), &SpinState::along(state)?, *t_i, *t_f)?;
            let z = |c: num_complex::Complex64| [c.re, c.im];
            TaskResult::Autocorrelation(Box::new(AutocorrelationReport {
                driver: spec.kind,
                delta_t: r.delta_t,
                c: matrix(&r.c),
                s: matrix(&r.s),
                s_plus: matrix(&r.s_plus),
                s_minus: matrix(&r.s_minus),
                expectations: Expectations {
                    c: z(r.expectations[0]),
                    s: z(r.expectations[1]),
                    s_plus: z(r.expectations[2]),
                    s_minus: z(r.expectations[3]),
                },
                hermiticity_residual: r.hermiticity_residual(),
                symmetrized_residual: r.symmetrized_residual,
                symmetrized_residual_s: r.symmetrized_residual_s,
                unsymmetrized_residual: r.unsymmetrized_residual,
                commutator_norms: r.commutator_norms,
                propagator_steps: r.propagator_steps,
                note: note(spec.kind),
            }))
        }
        TaskKind::IdentityChecks { trials, event } => {
            let tensor = assemble_field_tensor(&field.sample(event)?);
            let report = verify_bilinear_identities(particle, &tensor, *trials, seed)?;
            let mut csv = String::from(
                "px,py,pz,sx,sy,sz,kinetic_on_shell,kinetic_projected,kinetic_off_shell,moment_on_shell,moment_projected,moment_off_shell\n",
            );
            for t in &report.trials {
                let [px, py, pz] = t.momentum;
                let [sx, sy, sz] = t.polarization;
                let (k, m) = (t.kinetic, t.moment);
                writeln!(
                    csv,
                    "{px:?},{py:?},{pz:?},{sx:?},{sy:?},{sz:?},{:?},{:?},{:?},{:?},{:?},{:?}",
                    k.on_shell, k.projected, k.off_shell, m.on_shell, m.projected, m.off_shell
                )
                .expect("string write");
            }
            let r = IdentityResult {
                seed,
                trials: report.trials.len(),
                max_kinetic: report.max_kinetic,
                max_moment: report.max_moment,
            };
            return Ok(Outcome {
                result: TaskResult::IdentityChecks(r),
                sidecar: Some((format!("{}.csv", task.name), csv.into_bytes())),
            });
        }
    };
    Ok(Outcome { result, sidecar: None })
}

/// Runs every task of `scenario` (independent tasks concurrently) and
/// assembles the report in declaration order. Task failures are recorded
/// and do not stop the remaining tasks.
pub fn run_scenario(scenario: &Scenario, source: &str, opts: RunOptions) -> RunOutput {
    let start = Instant::now();
    let finished: Vec<(TaskReport, Option<Sidecar>)> = scenario
        .tasks
        .par_iter()
        .map(|task| {
            let seed = task_seed(opts.seed, &task.name);
            let t = Instant::now();
            let outcome = execute(scenario, task, seed);
            let elapsed = (!opts.normalized).then(|| t.elapsed().as_secs_f64());
            let mut report = TaskReport {
                name: task.name.clone(),
                kind: task.kind.name().to_string(),
                seed,
                status: TaskStatus::Ok,
                result: None,
                error: None,
                files: Vec::new(),
                wall_seconds: elapsed,
            };
            match outcome {
                Ok(o) => {
                    log::info!("task {} finished", task.name);
                    report.result = Some(o.result);
                    report.files = o.sidecar.iter().map(|(n, _)| n.clone()).collect();
                    (report, o.sidecar)
                }
                Err(e) => {
                    log::warn!("task {} failed: {e}", task.name);
                    report.status = TaskStatus::Failed;
                    report.error = Some(e.to_string());
                    (report, None)
                }
            }
        })
        .collect();
    let (tasks, sidecars): (Vec<_>, Vec<_>) = finished.into_iter().unzip();
    let report = ReportDocument {
        toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
        scenario: scenario.name.clone(),
        scenario_hash: scenario_hash(source),
        seed: opts.seed,
        sign_convention: SIGN_CONVENTION.to_string(),
        partial: tasks.iter().any(|t: &TaskReport| t.status == TaskStatus::Failed),
        wall_seconds: (!opts.normalized).then(|| start.elapsed().as_secs_f64()),
        tasks,
    };
    RunOutput { report, sidecars: sidecars.into_iter().flatten().collect() }
}
