//! `pinlab run`: dispatch a validated config over its parameter grids.
//!
//! Grid points run one after another; replicas inside a grid point run on
//! the thread pool. Grid point `i` (in config order) draws from the master
//! seed `mix64(seed, i)`, so outputs depend on the config and seed only.

use crate::config::{Command, ExperimentConfig};
use crate::manifest::{timestamp, OutputDir, RunManifest, TaskRecord, TaskStatus, MANIFEST_SCHEMA};
use crate::suite::{self, SuiteOptions};
use crate::{CliError, EXIT_FAILURE, EXIT_OK, EXIT_SATURATED};
use pinlab_core::bounds::{bracket_csv, hc_bracket, hc_upper_finite_size, FiniteSizeUpper};
use pinlab_core::chaos::{chaos_second_moment_exact, chaos_x, penalty_cost, sample_w, w_csv, ChaosScales, WConfig};
use pinlab_core::csv::{Cell, CsvBuf};
use pinlab_core::disorder::sample_disorder_seeded;
use pinlab_core::homogeneous::{free_energy_csv, predicted_marginal_constant_of, pure_free_energy};
use pinlab_core::parallel::map_indexed;
use pinlab_core::quenched::{mc_log_partitions, replica_csv};
use pinlab_core::renewal::{intersection_tables, renewal_mass, RenewalTables};
use pinlab_core::rng::mix64;
use pinlab_core::stats::{half_normal_cdf, ks_distance, Estimate};
use std::path::PathBuf;

pub const DEFAULT_OUT: &str = "pinlab-out";

/// Command-line values that take precedence over the config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    /// Suite only: set every upper tolerance to zero.
    pub zero_tolerance: bool,
    /// Suite only: restrict to these criterion ids.
    pub only: Option<Vec<u8>>,
}

#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub threads: usize,
    pub out: PathBuf,
}

/// Thread count: flag, then config, then `PINLAB_THREADS`, then the machine.
pub fn resolve_threads(flag: Option<usize>, config: Option<usize>, env: Option<usize>) -> usize {
    flag.or(config)
        .or(env)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}

pub fn resolve(config: ExperimentConfig, ov: &Overrides, env_threads: Option<usize>) -> Resolved {
    let seed = ov.seed.unwrap_or(config.seed);
    let threads = resolve_threads(ov.threads, config.threads, env_threads);
    let out = ov.out.clone().or_else(|| config.outputs.dir.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let mut config = config;
    config.seed = seed;
    config.threads = Some(threads);
    config.outputs.dir = Some(out.clone());
    Resolved { config, seed, threads, out }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub tasks: Vec<TaskRecord>,
    pub manifest: PathBuf,
    /// Console table of the acceptance battery.
    pub suite_table: Option<String>,
}

/// Validates, runs and writes the manifest. Validation failures return
/// `CliError::Config` before anything is written.
pub fn run(config: ExperimentConfig, ov: &Overrides, env_threads: Option<usize>) -> Result<RunOutcome, CliError> {
    config.validate()?;
    let r = resolve(config, ov, env_threads);
    let started = timestamp();
    let mut out = OutputDir::create(&r.out)?;
    let mut suite_table = None;
    let result = match r.config.command {
        Command::Kernel => kernel(&r, &mut out),
        Command::Pure => pure(&r, &mut out),
        Command::Quench => quench(&r, &mut out),
        Command::Chaos => chaos(&r, &mut out),
        Command::Bounds => bounds(&r, &mut out),
        Command::Suite => {
            let opts = SuiteOptions { seed: r.seed, threads: r.threads, zero_tolerance: ov.zero_tolerance, only: ov.only.clone() };
            suite::run_into(&opts, &mut out).map(|rep| {
                suite_table = Some(rep.table());
                rep.task_records()
            })
        }
    };
    let (tasks, exit_code, failure) = match result {
        Ok(tasks) => {
            let code = if tasks.iter().any(|t| t.status == TaskStatus::Failed) {
                EXIT_FAILURE
            } else if tasks.iter().any(|t| t.status == TaskStatus::Saturated) {
                EXIT_SATURATED
            } else {
                EXIT_OK
            };
            (tasks, code, None)
        }
        Err(e) => (vec![TaskRecord::new(r.config.command.name(), TaskStatus::Failed, e.to_string())], EXIT_FAILURE, Some(e)),
    };
    let manifest = RunManifest {
        schema_version: MANIFEST_SCHEMA,
        command: r.config.command.name().to_string(),
        config: serde_json::to_value(&r.config).expect("config serializes"),
        seed: r.seed,
        threads: r.threads,
        started,
        finished: timestamp(),
        tasks: tasks.clone(),
        artifacts: Vec::new(),
        exit_code,
    };
    let path = out.finish(manifest)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(RunOutcome { exit_code, tasks, manifest: path, suite_table }),
    }
}

fn tables_of(r: &Resolved) -> Result<(pinlab_core::renewal::RenewalKernel, RenewalTables), CliError> {
    let k = r.config.model.build(r.config.n_max)?;
    let t = renewal_mass(&k);
    Ok((k, t))
}

fn kernel(r: &Resolved, out: &mut OutputDir) -> Result<Vec<TaskRecord>, CliError> {
    let (k, t) = tables_of(r)?;
    out.write("kernel.csv", &t.to_csv())?;
    let detail = format!(
        "mass {:.12}, truncation deficit {:e}, c_phi {}, D(n_max) {}",
        k.mass(),
        k.truncation_deficit,
        k.c_phi,
        t.d[t.n_max()]
    );
    Ok(vec![TaskRecord::new("kernel", TaskStatus::Ok, detail)])
}

fn pure(r: &Resolved, out: &mut OutputDir) -> Result<Vec<TaskRecord>, CliError> {
    let (_, t) = tables_of(r)?;
    let hs = &r.config.grids.h;
    out.write("free_energy.csv", &free_energy_csv(&t, hs)?)?;
    hs.iter()
        .map(|&h| {
            let f = pure_free_energy(&t, h)?;
            let status = if f.saturated { TaskStatus::Saturated } else { TaskStatus::Ok };
            Ok(TaskRecord::new(format!("pure h={h}"), status, format!("F = {}", f.value)))
        })
        .collect()
}

/// Appends `csv` to `acc`, dropping the header after the first block.
fn append_csv(acc: &mut String, csv: &str) {
    if acc.is_empty() {
        acc.push_str(csv);
    } else if let Some((_, body)) = csv.split_once('\n') {
        acc.push_str(body);
    }
}

fn quench(r: &Resolved, out: &mut OutputDir) -> Result<Vec<TaskRecord>, CliError> {
    let (_, t) = tables_of(r)?;
    let c = &r.config;
    let law = c.law.to_core();
    let boundary = c.boundary.to_core();
    let mut replicas = String::new();
    let mut summary = CsvBuf::new(&["beta", "h", "N", "boundary", "mean_logZ_over_N", "stderr", "replicas", "seed"]);
    let mut tasks = Vec::new();
    let mut idx = 0u64;
    for &beta in &c.grids.beta {
        for &h in &c.grids.h {
            for &n in &c.grids.n {
                let master = mix64(r.seed, idx);
                idx += 1;
                let logs = mc_log_partitions(&t, law, beta, h, n, boundary, c.replicas, master, r.threads)?;
                append_csv(&mut replicas, &replica_csv(&logs, boundary, beta, h, n, master));
                let per: Vec<f64> = logs.iter().map(|l| l / n as f64).collect();
                let e = Estimate::from_samples(&per);
                summary.row(&[
                    Cell::F(beta),
                    Cell::F(h),
                    Cell::U(n as u64),
                    Cell::S(boundary.tag()),
                    Cell::F(e.mean),
                    Cell::F(e.stderr),
                    Cell::U(c.replicas as u64),
                    Cell::U(master),
                ]);
                tasks.push(TaskRecord::new(
                    format!("quench beta={beta} h={h} N={n}"),
                    TaskStatus::Ok,
                    format!("N⁻¹ E log Z = {} ± {}", e.mean, e.stderr),
                ));
            }
        }
    }
    out.write("replicas.csv", &replicas)?;
    out.write("quench_summary.csv", summary.as_str())?;
    Ok(tasks)
}

fn chaos(r: &Resolved, out: &mut OutputDir) -> Result<Vec<TaskRecord>, CliError> {
    let (k, t) = tables_of(r)?;
    let c = &r.config;
    let g = &c.grids;
    let mut tasks = Vec::new();
    let mut samples = String::new();
    let mut summary = CsvBuf::new(&["n", "t", "q", "mean_W", "stderr_W", "ks_half_normal"]);
    let scale = (2.0 * std::f64::consts::PI).sqrt().recip();
    let mut idx = 0u64;
    for &n in &g.n {
        for &tt in &g.t {
            for &q in &g.q {
                let cfg = WConfig::new(&k, n, tt, q, c.phi.to_core())?;
                let ws = sample_w(&t, &cfg, c.replicas, mix64(r.seed, idx), r.threads, false)?;
                idx += 1;
                append_csv(&mut samples, &w_csv(&ws, &cfg));
                let e = Estimate::from_samples(&ws);
                let ks = ks_distance(&ws, |x| half_normal_cdf(x, scale));
                summary.row(&[
                    Cell::U(n as u64),
                    Cell::U(tt as u64),
                    Cell::U(q as u64),
                    Cell::F(e.mean),
                    Cell::F(e.stderr),
                    Cell::F(ks),
                ]);
                tasks.push(TaskRecord::new(format!("W n={n} t={tt} q={q}"), TaskStatus::Ok, format!("KS {ks}")));
            }
        }
    }
    out.write("w_samples.csv", &samples)?;
    out.write("w_summary.csv", summary.as_str())?;

    if g.ell.is_empty() {
        return Ok(tasks);
    }
    let law = c.law.to_core();
    let mut exact = CsvBuf::new(&["ell", "t", "q", "second_moment"]);
    let mut cost = CsvBuf::new(&["ell", "t", "q", "M", "tail", "mean_g_inv3", "tail_bound", "in_regime"]);
    for &ell in &g.ell {
        for &tt in &g.t {
            for &q in &g.q {
                let scales = ChaosScales::manual(ell, tt, q, 0.0, 0.0, 0.5)?;
                let m2 = chaos_second_moment_exact(&t, &scales)?;
                exact.row(&[Cell::U(ell as u64), Cell::U(tt as u64), Cell::U(q as u64), Cell::F(m2)]);
                tasks.push(TaskRecord::new(format!("E[X²] ell={ell} t={tt} q={q}"), TaskStatus::Ok, format!("{m2}")));
                if g.m.is_empty() {
                    continue;
                }
                let master = mix64(r.seed, idx);
                idx += 1;
                let xs = map_indexed(r.threads, c.replicas, |i| {
                    chaos_x(&sample_disorder_seeded(law, ell, master, i as u64).omega, &t, &scales)
                });
                let xs: Vec<f64> = xs.into_iter().collect::<pinlab_core::Result<_>>()?;
                for &m in &g.m {
                    let pc = penalty_cost(&xs, m);
                    cost.row(&[
                        Cell::U(ell as u64),
                        Cell::U(tt as u64),
                        Cell::U(q as u64),
                        Cell::F(m),
                        Cell::F(pc.tail),
                        Cell::F(pc.mean_g_inv3),
                        Cell::F(pc.tail_bound),
                        Cell::S(pc.in_regime.to_string()),
                    ]);
                }
            }
        }
    }
    out.write("chaos_exact.csv", exact.as_str())?;
    if !g.m.is_empty() {
        out.write("chaos_penalty.csv", cost.as_str())?;
    }
    Ok(tasks)
}

fn finite_size_csv(rows: &[FiniteSizeUpper]) -> String {
    let mut b = CsvBuf::new(&[
        "beta",
        "eps",
        "N",
        "saturated",
        "second_moment",
        "contacts",
        "contacts_stderr",
        "value",
        "event_threshold",
        "event_probability",
        "event_bound",
    ]);
    for f in rows {
        b.row(&[
            Cell::F(f.beta),
            Cell::F(f.eps),
            Cell::U(f.n as u64),
            Cell::S(f.saturated.to_string()),
            Cell::F(f.second_moment),
            Cell::F(f.contacts.mean),
            Cell::F(f.contacts.stderr),
            Cell::F(f.value),
            Cell::F(f.event_threshold),
            Cell::F(f.event_probability.mean),
            Cell::F(f.event_bound),
        ]);
    }
    b.into_string()
}

fn bounds(r: &Resolved, out: &mut OutputDir) -> Result<Vec<TaskRecord>, CliError> {
    let (k, t) = tables_of(r)?;
    let inter = intersection_tables(&t)?;
    let c = &r.config;
    let predicted = predicted_marginal_constant_of(&k)?;
    let law = c.law.to_core();
    let mut rows = Vec::new();
    let mut finite = Vec::new();
    let mut tasks = Vec::new();
    let mut idx = 0u64;
    for &beta in &c.grids.beta {
        for &eps in &c.grids.eps {
            let f = if c.draws > 0 {
                let master = mix64(r.seed, idx);
                Some(hc_upper_finite_size(&t, &inter, law, beta, eps, c.replicas, c.draws, master, r.threads)?)
            } else {
                None
            };
            idx += 1;
            let b = hc_bracket(&t, beta, eps, predicted, f.as_ref())?;
            let status = if b.any_saturated() { TaskStatus::Saturated } else { TaskStatus::Ok };
            tasks.push(TaskRecord::new(
                format!("bracket beta={beta} eps={eps}"),
                status,
                format!("[{}, {}]", b.lower_formula, b.upper_formula),
            ));
            rows.push(b);
            finite.extend(f);
        }
    }
    out.write("bracket.csv", &bracket_csv(&rows))?;
    if !finite.is_empty() {
        out.write("finite_size.csv", &finite_size_csv(&finite))?;
    }
    Ok(tasks)
}
