//! Run driver: one configuration in, one directory of artifacts out.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::mfg::{mfg_residuals, solve_fixed_point, sweep_alpha, MfgProblem, MfgSolution, OuterStatus};
use crate::model::CouplingSign;
use crate::validation::{
    audit_energy_inequality, cross_validate_quadratic, energy_report, hopf_cole_forward, nls_residual,
    pohozaev_residual, simulate_particles, NlsOptions,
};

use super::config::{parse_config, parse_with_mode, Mode, RunConfig};
use super::field_csv::{field_to_csv, read_field};
use super::manifest::{sha256_hex, unix_now, write_atomic, Manifest, RunStatus};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

/// Output root used when neither the config nor the caller names one.
pub const DEFAULT_OUTPUT: &str = "runs";

#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    /// Directory holding the manifest; `None` when nothing was written.
    pub run_dir: Option<PathBuf>,
    pub error: Option<String>,
}

/// Parses `text` and runs it. `mode` fixes the mode (a subcommand); `output`
/// and `seed` override the config values. A config that does not parse
/// produces exit code 1 and no files.
pub fn execute(text: &str, mode: Option<Mode>, output: Option<PathBuf>, seed: Option<u64>) -> RunOutcome {
    let parsed = match mode {
        Some(m) => parse_with_mode(text, m),
        None => parse_config(text),
    };
    let mut cfg = match parsed {
        Ok(c) => c,
        Err(e) => {
            log::error!("{e}");
            return RunOutcome {
                exit_code: EXIT_USAGE,
                run_dir: None,
                error: Some(e.to_string()),
            };
        }
    };
    if output.is_some() {
        cfg.output_dir = output;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    run_config(&cfg)
}

/// Files written so far, with their digests.
struct Artifacts {
    dir: PathBuf,
    files: BTreeMap<String, String>,
}

impl Artifacts {
    fn bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.files.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    fn field(&mut self, name: &str, f: &ScalarField) -> Result<()> {
        self.bytes(name, field_to_csv(f).as_bytes())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(&serde_json::to_value(value)?)?;
        s.push('\n');
        self.bytes(name, s.as_bytes())
    }
}

/// Runs a validated config and writes its manifest, also on failure.
pub fn run_config(cfg: &RunConfig) -> RunOutcome {
    let dir = cfg
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT))
        .join(&cfg.run_id);
    if let Err(e) = fs::create_dir_all(&dir) {
        log::error!("cannot create {}: {e}", dir.display());
        return RunOutcome {
            exit_code: EXIT_USAGE,
            run_dir: None,
            error: Some(e.to_string()),
        };
    }
    let started = unix_now();
    let clock = Instant::now();
    let mut art = Artifacts {
        dir: dir.clone(),
        files: BTreeMap::new(),
    };
    log::info!("{} run `{}` into {}", cfg.mode, cfg.run_id, dir.display());
    let outcome = match cfg.mode {
        Mode::Solve => run_solve(cfg, &mut art),
        Mode::Sweep => run_sweep(cfg, &mut art),
        Mode::Validate => run_validate(cfg, &mut art),
        Mode::Particles => run_particles(cfg, &mut art),
        Mode::Pohozaev => run_pohozaev(cfg, &mut art),
    };
    let (status, results, error) = match outcome {
        Ok((status, results)) => (status, results, None),
        Err(e) if e.is_not_converged() => (RunStatus::NotConverged, Value::Null, Some(e.to_string())),
        Err(e) => (RunStatus::Failed, Value::Null, Some(e.to_string())),
    };
    let exit_code = match status {
        RunStatus::Ok => EXIT_OK,
        RunStatus::NotConverged => EXIT_NOT_CONVERGED,
        RunStatus::Failed => EXIT_USAGE,
    };
    if let Some(e) = &error {
        log::error!("{e}");
    }
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        mode: cfg.mode.to_string(),
        run_id: cfg.run_id.clone(),
        config: cfg.echo().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        started_unix: started,
        finished_unix: unix_now(),
        wall_time_s: clock.elapsed().as_secs_f64(),
        status,
        exit_code,
        error: error.clone(),
        results,
        files: art.files,
    };
    match manifest.write(&dir) {
        Ok(()) => RunOutcome {
            exit_code,
            run_dir: Some(dir),
            error,
        },
        Err(e) => {
            log::error!("cannot write manifest: {e}");
            RunOutcome {
                exit_code: EXIT_USAGE,
                run_dir: Some(dir),
                error: Some(e.to_string()),
            }
        }
    }
}

fn solution_summary(cfg: &RunConfig, s: &MfgSolution) -> Result<Value> {
    let crit = cfg.critical()?;
    Ok(json!({
        "lambda": s.lambda,
        "hjb_residual": s.hjb_res,
        "fp_residual": s.fp_res,
        "coupling_residual": s.coupling_res,
        "outer_iters": s.outer_iters,
        "converged": s.converged,
        "status": s.status,
        "history": s.history,
        "max_m": s.m.max(),
        "min_m": s.m.min(),
        "alpha1": crit.alpha1,
        "alpha2": crit.alpha2.is_finite().then_some(crit.alpha2),
        "regime": crit.regime(cfg.alpha),
    }))
}

fn status_of(s: &MfgSolution) -> RunStatus {
    if s.converged {
        RunStatus::Ok
    } else {
        RunStatus::NotConverged
    }
}

fn run_solve(cfg: &RunConfig, art: &mut Artifacts) -> Result<(RunStatus, Value)> {
    let p = cfg.problem()?;
    let m0 = cfg.initial()?.sample(&p.grid)?;
    let s = solve_fixed_point(&p, Some(&m0))?;
    art.field("u.csv", &s.u)?;
    art.field("m.csv", &s.m)?;
    Ok((status_of(&s), solution_summary(cfg, &s)?))
}

fn run_sweep(cfg: &RunConfig, art: &mut Artifacts) -> Result<(RunStatus, Value)> {
    let p = cfg.problem()?;
    let report = sweep_alpha(&p, &cfg.sweep_alphas, cfg.sweep_refine, &cfg.initial()?)?;
    art.json("sweep.json", &report)?;
    let mut csv = String::from("alpha,regime,converged,status,lambda,max_m,fine_max_m,growth,concentrating\n");
    for r in &report.rows {
        let regime = serde_json::to_value(r.regime)?;
        let status = serde_json::to_value(r.coarse.status)?;
        csv.push_str(&format!(
            "{},{},{},{},{:e},{:e},{},{},{}\n",
            r.alpha,
            regime.as_str().unwrap_or(""),
            r.coarse.converged,
            status.as_str().unwrap_or("error"),
            r.coarse.lambda,
            r.coarse.max_m,
            r.fine.as_ref().map_or(String::new(), |f| format!("{:e}", f.max_m)),
            r.growth.map_or(String::new(), |g| format!("{g:e}")),
            r.concentrating,
        ));
    }
    art.bytes("sweep.csv", csv.as_bytes())?;
    let pick = |f: &dyn Fn(&crate::mfg::SweepRow) -> bool| -> Vec<f64> {
        report.rows.iter().filter(|r| f(r)).map(|r| r.alpha).collect()
    };
    // non-convergence inside a sweep is a result, not a failure of the run
    Ok((
        RunStatus::Ok,
        json!({
            "rows": report.rows.len(),
            "converged": pick(&|r| r.converged()),
            "not_converged": pick(&|r| !r.converged()),
            "concentrating": pick(&|r| r.concentrating),
            "alpha1": report.alpha1,
            "alpha2": report.alpha2,
        }),
    ))
}

/// Reads `u.csv` and `m.csv` from `input_dir`, or solves when none is given.
fn load_or_solve(cfg: &RunConfig, p: &MfgProblem, art: &mut Artifacts) -> Result<MfgSolution> {
    let Some(input) = &cfg.input_dir else {
        let m0 = cfg.initial()?.sample(&p.grid)?;
        let s = solve_fixed_point(p, Some(&m0))?;
        art.field("u.csv", &s.u)?;
        art.field("m.csv", &s.m)?;
        return Ok(s);
    };
    let u = read_field(&input.join("u.csv"))?;
    let m = read_field(&input.join("m.csv"))?;
    if !u.grid().same_shape(&p.grid) || !m.grid().same_shape(&p.grid) {
        return Err(Error::FieldMismatch(format!(
            "fields in {} do not match dim/n/length of the config",
            input.display()
        )));
    }
    let (lambda, hjb_res, fp_res) = mfg_residuals(p, &u, &m)?;
    let converged = hjb_res <= p.tol && fp_res <= p.tol;
    Ok(MfgSolution {
        initial_max: m.max(),
        u,
        lambda,
        m,
        outer_iters: 0,
        hjb_res,
        fp_res,
        coupling_res: f64::NAN,
        converged,
        status: if converged {
            OuterStatus::Converged
        } else {
            OuterStatus::MaxIterations
        },
        history: Vec::new(),
    })
}

/// Runs a check, keeping its failure as data.
fn check<T: Serialize>(r: Result<T>) -> Value {
    match r.and_then(|v| Ok(serde_json::to_value(v)?)) {
        Ok(v) => v,
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn not_converged(cfg: &RunConfig, s: &MfgSolution) -> Result<(RunStatus, Value)> {
    Ok((RunStatus::NotConverged, json!({ "solve": solution_summary(cfg, s)? })))
}

fn run_validate(cfg: &RunConfig, art: &mut Artifacts) -> Result<(RunStatus, Value)> {
    let p = cfg.problem()?;
    let s = load_or_solve(cfg, &p, art)?;
    if cfg.input_dir.is_none() && !s.converged {
        return not_converged(cfg, &s);
    }
    let beta = cfg.alpha + 1.0;
    let energy = check(energy_report(&s, &p.coupling, &p.hamiltonian, &[beta]));
    let audit = check(audit_energy_inequality(std::slice::from_ref(&s), &p.hamiltonian, beta));
    let pohozaev = check(pohozaev_residual(
        &s,
        &p.coupling,
        &p.hamiltonian,
        &p.potential,
        cfg.pohozaev_radius,
        cfg.pohozaev_center(),
    ));
    let hopf_cole = if cfg.gamma != 2.0 {
        json!({ "skipped": "needs gamma = 2" })
    } else {
        let phi = check(
            hopf_cole_forward(&s, &p.hamiltonian)
                .and_then(|phi| nls_residual(&phi, s.lambda, &p.coupling, &p.potential)),
        );
        let cross = if p.coupling.sign() == CouplingSign::Focusing {
            let opts = NlsOptions {
                tol: cfg.nls_tol,
                ..NlsOptions::default()
            };
            check(cross_validate_quadratic(&s, &p.hamiltonian, &p.coupling, &p.potential, &opts))
        } else {
            json!({ "skipped": "the ground-state solver is focusing only" })
        };
        json!({ "nls_residual_of_sqrt_m": phi, "cross_validation": cross })
    };
    let report = json!({
        "solution": solution_summary(cfg, &s)?,
        "energy": energy,
        "energy_audit": audit,
        "pohozaev": pohozaev,
        "hopf_cole": hopf_cole,
    });
    art.json("validate.json", &report)?;
    Ok((RunStatus::Ok, report))
}

fn run_particles(cfg: &RunConfig, art: &mut Artifacts) -> Result<(RunStatus, Value)> {
    let p = cfg.problem()?;
    let s = load_or_solve(cfg, &p, art)?;
    if cfg.input_dir.is_none() && !s.converged {
        return not_converged(cfg, &s);
    }
    let opts = cfg.particle_options();
    let r = simulate_particles(&s.u, &s.m, &p.hamiltonian, &opts)?;
    art.field("histogram.csv", &r.density)?;
    let report = json!({
        "l1": r.l1,
        "noise_floor": r.noise_floor,
        "steps": r.steps,
        "samples": r.samples,
        "options": opts,
    });
    art.json("particles.json", &report)?;
    Ok((RunStatus::Ok, report))
}

fn run_pohozaev(cfg: &RunConfig, art: &mut Artifacts) -> Result<(RunStatus, Value)> {
    let p = cfg.problem()?;
    let s = load_or_solve(cfg, &p, art)?;
    if cfg.input_dir.is_none() && !s.converged {
        return not_converged(cfg, &s);
    }
    let r = pohozaev_residual(
        &s,
        &p.coupling,
        &p.hamiltonian,
        &p.potential,
        cfg.pohozaev_radius,
        cfg.pohozaev_center(),
    )?;
    art.json("pohozaev.json", &r)?;
    Ok((RunStatus::Ok, json!({ "pohozaev": r, "scale": r.scale() })))
}

/// Reads a config file and runs it; I/O errors on the config are usage errors.
pub fn execute_file(
    path: &Path,
    mode: Option<Mode>,
    output: Option<PathBuf>,
    seed: Option<u64>,
) -> RunOutcome {
    match fs::read_to_string(path) {
        Ok(text) => execute(&text, mode, output, seed),
        Err(e) => {
            log::error!("cannot read {}: {e}", path.display());
            RunOutcome {
                exit_code: EXIT_USAGE,
                run_dir: None,
                error: Some(e.to_string()),
            }
        }
    }
}
