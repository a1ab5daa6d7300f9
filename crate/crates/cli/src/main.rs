//! Command-line front end: configure, run, and summarize experiments; solve
//! MDP specs exactly and dump ground-truth tables.
//!
//! Exit codes: 0 success, 1 one or more jobs failed, 2 bad input
//! (unreadable/malformed manifest, spec, or policy file).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Deserialize;

use poisonbench_core::config::ExperimentConfig;
use poisonbench_core::harness::{run_experiment_with_id, sidecar_json, Simulation};
use poisonbench_core::mdp::{
    check_target_admissible, evaluate_policy, minimum_gap, solve_optimal, MdpSpec, Policy,
};

#[derive(Parser)]
#[command(name = "poisonbench", version, about = "Action-poisoning attack simulator for tabular episodic RL")]
struct Cli {
    /// Replace the master seed of every job (echoed in the resolved config).
    #[arg(long, global = true)]
    seed_override: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every job in a manifest; one CSV plus one JSON sidecar per job.
    Run {
        /// Manifest file: {"out_dir"?, "parallelism"?, "jobs": [{"id", "config", "dump_attacker"?}]}.
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory; defaults to the manifest's out_dir, then
        /// $POISONBENCH_OUT, then the current directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Worker threads for job-level parallelism.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Solve an MDP spec exactly; print V* and pi*, plus target diagnostics.
    Solve {
        /// MDP spec JSON file ({S, A, H, P, R, initial_dist, reward_noise}).
        #[arg(long)]
        spec: PathBuf,
        /// Optional target policy JSON; prints its Q table and minimum gap.
        #[arg(long)]
        target: Option<PathBuf>,
    },
    /// Aggregate finished run CSVs into a per-attacker table.
    Summary {
        /// Metric CSV files produced by `run`.
        csvs: Vec<PathBuf>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunManifest {
    #[serde(default)]
    out_dir: Option<PathBuf>,
    #[serde(default)]
    parallelism: Option<usize>,
    jobs: Vec<ManifestJob>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestJob {
    id: String,
    /// Write the attacker's learned tables to <id>.attacker.json.
    #[serde(default)]
    dump_attacker: bool,
    /// Write the resolved MDP spec to <id>.spec.json for inspection.
    #[serde(default)]
    dump_spec: bool,
    config: ExperimentConfig,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { manifest, out_dir, jobs } => cmd_run(&manifest, out_dir, jobs, cli.seed_override),
        Command::Solve { spec, target } => cmd_solve(&spec, target.as_deref(), cli.seed_override),
        Command::Summary { csvs } => cmd_summary(&csvs),
    }
}

// --------------------------------------------------------------------- run --

fn cmd_run(
    manifest_path: &Path,
    out_dir_flag: Option<PathBuf>,
    jobs_flag: Option<usize>,
    seed_override: Option<u64>,
) -> ExitCode {
    let manifest = match load_manifest(manifest_path) {
        Ok(manifest) => manifest,
        Err(err) => {
            eprintln!("error: {err:#}");
            return ExitCode::from(2);
        }
    };

    let out_dir = out_dir_flag
        .or(manifest.out_dir.clone())
        .or_else(|| std::env::var_os("POISONBENCH_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    if let Err(err) = std::fs::create_dir_all(&out_dir) {
        eprintln!("error: cannot create output directory {}: {err}", out_dir.display());
        return ExitCode::from(2);
    }

    let workers = jobs_flag.or(manifest.parallelism).unwrap_or(1).max(1);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool,
        Err(err) => {
            eprintln!("error: cannot build worker pool: {err}");
            return ExitCode::from(2);
        }
    };

    let results: Vec<(String, Result<String>)> = pool.install(|| {
        use rayon::prelude::*;
        manifest
            .jobs
            .par_iter()
            .map(|job| (job.id.clone(), run_job(job, &out_dir, seed_override)))
            .collect()
    });

    let mut failed = 0;
    for (id, result) in &results {
        match result {
            Ok(summary) => println!("job {id}: ok ({summary})"),
            Err(err) => {
                failed += 1;
                eprintln!("job {id}: error: {err:#}");
            }
        }
    }
    println!("{} of {} jobs succeeded", results.len() - failed, results.len());
    if failed > 0 {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}

fn load_manifest(path: &Path) -> Result<RunManifest> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read manifest {}", path.display()))?;
    let manifest: RunManifest = serde_json::from_str(&text)
        .with_context(|| format!("cannot parse manifest {}", path.display()))?;
    let mut seen = std::collections::BTreeSet::new();
    for job in &manifest.jobs {
        if job.id.is_empty() || job.id.contains(['/', '\\']) {
            bail!("job id {:?} must be a nonempty file-name-safe string", job.id);
        }
        if !seen.insert(&job.id) {
            bail!("duplicate job id {:?}", job.id);
        }
    }
    Ok(manifest)
}

fn run_job(job: &ManifestJob, out_dir: &Path, seed_override: Option<u64>) -> Result<String> {
    let mut config = job.config.clone();
    if let Some(seed) = seed_override {
        config.seed = seed;
    }
    let series = run_experiment_with_id(&config, &job.id)?;
    let csv_path = out_dir.join(format!("{}.csv", job.id));
    std::fs::write(&csv_path, series.to_csv())
        .with_context(|| format!("cannot write {}", csv_path.display()))?;
    let sidecar_path = out_dir.join(format!("{}.json", job.id));
    std::fs::write(&sidecar_path, serde_json::to_string_pretty(&sidecar_json(&config, &job.id))?)
        .with_context(|| format!("cannot write {}", sidecar_path.display()))?;
    if job.dump_spec {
        let sim = Simulation::new(&config)?;
        let spec_path = out_dir.join(format!("{}.spec.json", job.id));
        std::fs::write(&spec_path, sim.spec().to_json())
            .with_context(|| format!("cannot write {}", spec_path.display()))?;
    }
    if job.dump_attacker {
        // Re-run to completion to capture the attacker's learned tables.
        let mut sim = Simulation::new(&config)?;
        for _ in 0..config.episodes {
            sim.run_episode();
        }
        if let Some(dump) = sim.attacker_dump() {
            let dump_path = out_dir.join(format!("{}.attacker.json", job.id));
            std::fs::write(&dump_path, serde_json::to_string(&dump)?)
                .with_context(|| format!("cannot write {}", dump_path.display()))?;
        }
    }
    let last = series.final_row().expect("at least one checkpoint");
    Ok(format!(
        "episodes={}, loss={}, cost={}, nonopt={}",
        last.episodes, last.loss, last.cost, last.nonopt_pulls
    ))
}

// ------------------------------------------------------------------- solve --

fn cmd_solve(spec_path: &Path, target_path: Option<&Path>, seed_override: Option<u64>) -> ExitCode {
    match solve_inner(spec_path, target_path, seed_override) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn solve_inner(spec_path: &Path, target_path: Option<&Path>, seed_override: Option<u64>) -> Result<()> {
    let text = std::fs::read_to_string(spec_path)
        .with_context(|| format!("cannot read spec {}", spec_path.display()))?;
    let spec = MdpSpec::from_json(&text)
        .with_context(|| format!("cannot parse spec {}", spec_path.display()))?;
    spec.validate()?;

    println!(
        "resolved: {}",
        serde_json::json!({
            "spec": spec_path.display().to_string(),
            "target": target_path.map(|p| p.display().to_string()),
            "seed_override": seed_override,
            "S": spec.num_states, "A": spec.num_actions, "H": spec.horizon,
        })
    );

    let (tables, pi_star) = solve_optimal(&spec);
    println!("V* (rows h = 1..H):");
    for h in 0..spec.horizon {
        let row: Vec<String> =
            (0..spec.num_states).map(|s| format!("{:.6}", tables.v[[h, s]])).collect();
        println!("  h={}: {}", h + 1, row.join(" "));
    }
    println!("pi* (rows h = 1..H):");
    let actions = pi_star.action_table().expect("optimal policy is deterministic");
    for (h, row) in actions.iter().enumerate() {
        let row: Vec<String> = row.iter().map(|a| a.to_string()).collect();
        println!("  h={}: {}", h + 1, row.join(" "));
    }

    if let Some(target_path) = target_path {
        let text = std::fs::read_to_string(target_path)
            .with_context(|| format!("cannot read target policy {}", target_path.display()))?;
        let target: Policy = serde_json::from_str(&text)
            .with_context(|| format!("cannot parse target policy {}", target_path.display()))?;
        target.validate(&spec)?;
        if !target.is_deterministic() {
            bail!("target policy must be deterministic");
        }
        let q_dag = evaluate_policy(&spec, &target)?;
        println!("Q under the target policy (rows h = 1..H, one line per state):");
        for h in 0..spec.horizon {
            for s in 0..spec.num_states {
                let row: Vec<String> =
                    (0..spec.num_actions).map(|a| format!("{:.6}", q_dag.q[[h, s, a]])).collect();
                println!("  h={} s={}: {}", h + 1, s, row.join(" "));
            }
        }
        let gap = minimum_gap(&spec, &target)?;
        println!("Delta_min: {gap:.6}");
        if !check_target_admissible(&spec, &target)? {
            println!(
                "warning: target policy is not admissible (it ties the worst action somewhere); \
                 efficient-attack guarantees do not apply"
            );
        }
    }
    Ok(())
}

// ----------------------------------------------------------------- summary --

#[derive(Debug)]
struct RunRow {
    attacker: String,
    final_loss: f64,
    final_cost: f64,
    final_nonopt: f64,
    /// Loss(T)/Loss(T/10) and Cost(T)/Cost(T/10) from the checkpoint rows.
    loss_growth: Option<f64>,
    cost_growth: Option<f64>,
    echo: String,
}

fn cmd_summary(csv_paths: &[PathBuf]) -> ExitCode {
    match summary_inner(csv_paths) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn summary_inner(csv_paths: &[PathBuf]) -> Result<()> {
    if csv_paths.is_empty() {
        bail!("no CSV files given");
    }
    let mut runs = Vec::new();
    for path in csv_paths {
        runs.push(parse_run(path)?);
    }

    if let [run] = runs.as_slice() {
        println!("final row: {}", run.echo);
    }

    let mut groups: BTreeMap<&str, Vec<&RunRow>> = BTreeMap::new();
    for run in &runs {
        groups.entry(&run.attacker).or_default().push(run);
    }

    println!(
        "{:<14} {:>5} {:>12} {:>12} {:>12} {:>12} {:>10} {:>10} {:>10} {:>10}",
        "attacker", "runs", "loss_mean", "loss_std", "cost_mean", "cost_std",
        "nonopt_mu", "nonopt_sd", "lossT/T10", "costT/T10"
    );
    for (attacker, rows) in groups {
        let loss = mean_std(rows.iter().map(|r| r.final_loss));
        let cost = mean_std(rows.iter().map(|r| r.final_cost));
        let nonopt = mean_std(rows.iter().map(|r| r.final_nonopt));
        let lg = mean_opt(rows.iter().filter_map(|r| r.loss_growth));
        let cg = mean_opt(rows.iter().filter_map(|r| r.cost_growth));
        println!(
            "{:<14} {:>5} {:>12.2} {:>12.2} {:>12.2} {:>12.2} {:>10.2} {:>10.2} {:>10} {:>10}",
            attacker,
            rows.len(),
            loss.0,
            loss.1,
            cost.0,
            cost.1,
            nonopt.0,
            nonopt.1,
            lg.map_or("-".into(), |g| format!("{g:.3}")),
            cg.map_or("-".into(), |g| format!("{g:.3}")),
        );
    }
    Ok(())
}

fn mean_std(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let values: Vec<f64> = values.collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn mean_opt(values: impl Iterator<Item = f64>) -> Option<f64> {
    let values: Vec<f64> = values.collect();
    if values.is_empty() {
        return None;
    }
    Some(values.iter().sum::<f64>() / values.len() as f64)
}

fn parse_run(path: &Path) -> Result<RunRow> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().with_context(|| format!("{} is empty", path.display()))?;
    let columns: Vec<&str> = header.split(',').collect();
    let col = |name: &str| columns.iter().position(|&c| c == name);
    let (step_i, loss_i, cost_i, nonopt_i) = match (
        col("checkpoint_step"),
        col("loss"),
        col("cost"),
        col("nonopt_pulls"),
    ) {
        (Some(a), Some(b), Some(c), Some(d)) => (a, b, c, d),
        _ => bail!("{} lacks the expected metric columns", path.display()),
    };

    let mut rows: Vec<(f64, f64, f64, f64)> = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let get = |i: usize| -> Result<f64> {
            fields
                .get(i)
                .with_context(|| format!("{} row {} too short", path.display(), idx + 2))?
                .parse::<f64>()
                .with_context(|| format!("{} row {} has a non-numeric field", path.display(), idx + 2))
        };
        rows.push((get(step_i)?, get(loss_i)?, get(cost_i)?, get(nonopt_i)?));
    }
    let &(final_step, final_loss, final_cost, final_nonopt) =
        rows.last().with_context(|| format!("{} has no data rows", path.display()))?;

    // Growth diagnostics: compare the final value to the value at the largest
    // checkpoint at or below final_step / 10.
    let at_tenth = rows
        .iter()
        .rev()
        .find(|row| row.0 <= final_step / 10.0)
        .copied();
    let ratio = |now: f64, then: f64| if then > 0.0 { Some(now / then) } else { None };
    let loss_growth = at_tenth.and_then(|(_, loss, _, _)| ratio(final_loss, loss));
    let cost_growth = at_tenth.and_then(|(_, _, cost, _)| ratio(final_cost, cost));

    // Attacker kind from the sidecar written next to the CSV, when present.
    let attacker = path
        .with_extension("json")
        .exists()
        .then(|| -> Option<String> {
            let text = std::fs::read_to_string(path.with_extension("json")).ok()?;
            let doc: serde_json::Value = serde_json::from_str(&text).ok()?;
            Some(doc["config"]["attacker"]["kind"].as_str()?.to_string())
        })
        .flatten()
        .unwrap_or_else(|| "unknown".to_string());

    let echo = text.lines().last().unwrap_or_default().to_string();
    Ok(RunRow {
        attacker,
        final_loss,
        final_cost,
        final_nonopt,
        loss_growth,
        cost_growth,
        echo,
    })
}
