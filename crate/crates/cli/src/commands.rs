use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde::Serialize;
use spde_heavy::estimators::{
    moment_growth_check, picard_decay_study, stopping_time_study, truncation_convergence_study, StudyReport,
};
use spde_heavy::kernels::{admissible, kernel_lp_norm, q_threshold};
use spde_heavy::noise::{io::dump_realization, sample_noise, NoiseRealization};
use spde_heavy::seeds::realization_seed;
use spde_heavy::solver::io::{write_field_binary, write_field_csv};
use spde_heavy::solver::{SolveDiagnostics, Solver};

use crate::config::RunConfig;
use crate::error::CliError;

pub const VERSION: &str = env!("SPDE_HEAVY_VERSION");
const MANIFEST_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum StudyKind {
    Truncation,
    Picard,
    Moment,
    Stopping,
}

impl StudyKind {
    fn name(self) -> &'static str {
        match self {
            StudyKind::Truncation => "truncation",
            StudyKind::Picard => "picard",
            StudyKind::Moment => "moment",
            StudyKind::Stopping => "stopping",
        }
    }
}

/// A parsed run: configuration, output directory and master seed.
pub struct Run {
    pub config: RunConfig,
    pub source: String,
    pub out: PathBuf,
    pub seed: u64,
}

#[derive(Serialize)]
struct FileEntry {
    name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    version: &'a str,
    command: &'a str,
    master_seed: u64,
    config: &'a RunConfig,
    config_source: &'a str,
    files: Vec<FileEntry>,
}

impl Run {
    pub fn load(config: &Path, out: PathBuf, seed: Option<u64>) -> Result<Self, CliError> {
        let source = fs::read_to_string(config)?;
        let config = RunConfig::parse(&source)?;
        let seed = seed.unwrap_or(config.ensemble.seed);
        Ok(Self { config, source, out, seed })
    }

    fn create<P: AsRef<Path>>(&self, name: P) -> Result<BufWriter<File>, CliError> {
        Ok(BufWriter::new(File::create(self.out.join(name))?))
    }

    fn write_manifest(&self, command: &str, files: Vec<FileEntry>) -> Result<(), CliError> {
        let manifest = Manifest {
            schema_version: MANIFEST_SCHEMA,
            version: VERSION,
            command,
            master_seed: self.seed,
            config: &self.config,
            config_source: &self.source,
            files,
        };
        let mut w = self.create("manifest.json")?;
        serde_json::to_writer_pretty(&mut w, &manifest)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn prepare_out(&self) -> Result<(), CliError> {
        fs::create_dir_all(&self.out)?;
        Ok(())
    }
}

fn plain(name: &str) -> FileEntry {
    FileEntry { name: name.into(), seed: None }
}

#[derive(Serialize)]
struct KernelSummary {
    rho: f64,
    tau: f64,
    lambda: f64,
    dim: usize,
    normalization_constant: f64,
    singularity_exponent: f64,
    p_upper: f64,
    horizon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    configured: Option<spde_heavy::kernels::Admissibility>,
}

/// Admissible `(p, q)` boundary on a `p` grid plus kernel norms.
pub fn cmd_analyze_kernel(run: &Run) -> Result<(), CliError> {
    let kernel = run.config.kernel()?;
    let analyze = &run.config.analyze;
    if analyze.points < 2 {
        return Err(CliError::Config("analyze.points must be at least 2".into()));
    }
    if !(analyze.horizon > 0.0) {
        return Err(CliError::Config("analyze.horizon must be positive".into()));
    }
    run.prepare_out()?;
    let p_upper = kernel.critical_exponent();
    let mut w = run.create("region.csv")?;
    writeln!(w, "p,q_lower,kernel_lp_norm")?;
    for i in 1..analyze.points {
        let p = p_upper * i as f64 / analyze.points as f64;
        let norm = kernel_lp_norm(&kernel, p, analyze.horizon)?;
        writeln!(w, "{p:?},{:?},{norm:?}", q_threshold(p, &kernel))?;
    }
    w.flush()?;
    let configured = run.config.exponents.map(|e| admissible(e.p, e.q, &kernel));
    let summary = KernelSummary {
        rho: kernel.rho(),
        tau: kernel.tau(),
        lambda: kernel.lambda_cap(),
        dim: kernel.dim(),
        normalization_constant: kernel.norm_const(),
        singularity_exponent: kernel.singularity_exponent(),
        p_upper,
        horizon: analyze.horizon,
        configured,
    };
    let mut w = run.create("kernel.json")?;
    serde_json::to_writer_pretty(&mut w, &summary)?;
    writeln!(w)?;
    w.flush()?;
    println!("p < {p_upper}; boundary written to region.csv");
    if let Some(msg) = configured.and_then(|a| a.violation()) {
        println!("configured exponents not admissible: {msg}");
    }
    run.write_manifest("analyze-kernel", vec![plain("region.csv"), plain("kernel.json")])
}

/// `ensemble.size` atom clouds with sidecars.
pub fn cmd_sample(run: &Run) -> Result<(), CliError> {
    let noise = run.config.noise()?;
    let window = run.config.window()?;
    let n = run.config.ensemble.size;
    if n == 0 {
        return Err(CliError::Config("ensemble.size must be positive".into()));
    }
    run.prepare_out()?;
    let clouds: Vec<NoiseRealization> = (0..n)
        .into_par_iter()
        .map(|i| sample_noise(&noise, window, realization_seed(run.seed, i as u64)))
        .collect::<Result<_, _>>()?;
    let mut files = Vec::with_capacity(2 * n);
    for (i, real) in clouds.iter().enumerate() {
        let stem = format!("atoms_{i:04}");
        dump_realization(&run.out, &stem, &noise, real)?;
        files.push(FileEntry { name: format!("{stem}.csv"), seed: Some(real.seed) });
        files.push(FileEntry { name: format!("{stem}.json"), seed: Some(real.seed) });
    }
    info!("sampled {n} realizations");
    println!("{n} realizations written");
    run.write_manifest("sample", files)
}

#[derive(Serialize)]
struct SolveReport<'a> {
    seed: u64,
    #[serde(flatten)]
    diagnostics: &'a SolveDiagnostics,
}

/// Solution on the evaluation box for realization 0 of the master seed.
pub fn cmd_solve(run: &Run) -> Result<(), CliError> {
    let problem = run.config.problem()?;
    let stopping = run.config.stopping()?;
    let opts = run.config.solve_options();
    let solver = Solver::new(problem.clone())?;
    let seed = realization_seed(run.seed, 0);
    let real = sample_noise(&problem.noise, problem.noise_window(), seed)?;
    let sol = match &run.config.solve.levels {
        Some(levels) => solver.glue(&real, &stopping, levels, &opts)?,
        None => solver.solve(&real, &stopping, &opts)?,
    };
    run.prepare_out()?;
    let r = problem.eval_radius;
    let field = sol.eval_field(r);
    let mut w = run.create("field.csv")?;
    write_field_csv(&field, &mut w)?;
    w.flush()?;
    let mut w = run.create("field.bin")?;
    write_field_binary(&field, &mut w)?;
    w.flush()?;
    let mut w = run.create("initial.csv")?;
    write_field_csv(&solver.initial().restrict(r), &mut w)?;
    w.flush()?;
    let mut w = run.create("diagnostics.json")?;
    serde_json::to_writer_pretty(&mut w, &SolveReport { seed, diagnostics: &sol.diagnostics })?;
    writeln!(w)?;
    w.flush()?;
    println!(
        "converged after {} iterations; guard mass {:.3e}",
        sol.diagnostics.iterations, sol.diagnostics.guard_mass
    );
    let files = vec![
        FileEntry { name: "field.csv".into(), seed: Some(seed) },
        FileEntry { name: "field.bin".into(), seed: Some(seed) },
        plain("initial.csv"),
        FileEntry { name: "diagnostics.json".into(), seed: Some(seed) },
    ];
    run.write_manifest("solve", files)
}

fn required<T: Clone>(value: &Option<T>, key: &str) -> Result<T, CliError> {
    value
        .clone()
        .ok_or_else(|| CliError::Config(format!("missing `{key}`")))
}

pub fn cmd_study(run: &Run, kind: StudyKind) -> Result<(), CliError> {
    let study = &run.config.study;
    let report: StudyReport = match kind {
        StudyKind::Truncation => {
            let l_grid = required(&study.l_grid, "study.l_grid")?;
            truncation_convergence_study(&run.config.ensemble(run.seed)?, study.mode, &l_grid)?
        }
        StudyKind::Picard => picard_decay_study(&run.config.ensemble(run.seed)?, study.n_max)?,
        StudyKind::Moment => {
            let ladder = required(&study.ladder, "study.ladder")?;
            moment_growth_check(&run.config.ensemble(run.seed)?, &ladder, study.slack)?
        }
        StudyKind::Stopping => stopping_time_study(&run.config.stopping_study(run.seed)?)?,
    };
    run.prepare_out()?;
    let mut w = run.create("report.json")?;
    report.write_json(&mut w)?;
    writeln!(w)?;
    w.flush()?;
    let mut w = run.create("report.csv")?;
    report.write_csv(&mut w)?;
    w.flush()?;
    for (name, ok) in &report.verdicts {
        println!("{name}: {}", if *ok { "true" } else { "false" });
    }
    for note in &report.notes {
        println!("note: {note}");
    }
    run.write_manifest(
        &format!("study {}", kind.name()),
        vec![plain("report.json"), plain("report.csv")],
    )
}
