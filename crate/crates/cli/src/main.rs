use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use tunneling_core::amplitude::{write_curve_csv, Branch, Interaction};
use tunneling_core::analysis::interaction_time;
use tunneling_core::config::{tau_max, validate, CaseConfig, Convention, PRESET_NAMES};
use tunneling_core::experiment::{
    write_kinematics_csv, write_marginals_csv, write_norms_csv, write_trace_csv, CaseRun,
    Experiment,
};
use tunneling_core::report::{case_dirs, render, CaseOutputs};
use tunneling_core::stationary::KmaxRule;
use tunneling_core::Error;

/// Two-particle tunneling experiments.
#[derive(Parser)]
#[command(name = "tunneling", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve one or more cases and write their results.
    Run(RunArgs),
    /// Compare the results under a directory with the bundled reference values.
    Report {
        /// Output directory of `run`, or one case subdirectory of it.
        dir: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Preset names (`case1` .. `case6`) or `all`.
    targets: Vec<String>,
    /// Preset to run; may be repeated.
    #[arg(long = "case")]
    cases: Vec<String>,
    /// `key = value` configuration file; may be repeated.
    #[arg(long = "config")]
    configs: Vec<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Times at which to write density grids and marginals.
    #[arg(long, value_delimiter = ',')]
    snapshots: Vec<f64>,
    /// Overrides the configured phase convention.
    #[arg(long)]
    convention: Option<Convention>,
    /// Fit window as `start:end:step`.
    #[arg(long, value_parser = parse_window)]
    fit_window: Option<(f64, f64, f64)>,
    /// How the stationary-phase maximiser is located.
    #[arg(long, default_value = "marginal")]
    kmax_rule: KmaxRule,
    /// Run even if the initial packet fails the well-posedness checks.
    #[arg(long)]
    allow_ill_posed: bool,
}

fn parse_window(s: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, c] = parts.as_slice() else {
        return Err(format!("expected start:end:step, got `{s}`"));
    };
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    Ok((num(a)?, num(b)?, num(c)?))
}

/// Maps a failure to the process exit status.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code,
            error: error.into(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let code = match error.downcast_ref::<Error>() {
            Some(Error::Aliasing { .. }) => 3,
            Some(
                Error::InvalidParameter { .. }
                | Error::Parse { .. }
                | Error::NonPositiveWavenumber(_)
                | Error::GridTooCoarse(_),
            ) => 2,
            _ => 1,
        };
        Failure { code, error }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Report { dir } => report(&dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn resolve(args: &RunArgs) -> Result<Vec<(String, CaseConfig)>, Failure> {
    let mut names: Vec<String> = Vec::new();
    for t in args.targets.iter().chain(&args.cases) {
        if t == "all" {
            names.extend(PRESET_NAMES.iter().map(|s| s.to_string()));
        } else {
            names.push(t.clone());
        }
    }
    let mut out = Vec::new();
    for name in names {
        let cfg = CaseConfig::preset(&name).ok_or_else(|| {
            Failure::new(
                2,
                anyhow::anyhow!("unknown case `{name}`; expected one of {PRESET_NAMES:?} or `all`"),
            )
        })?;
        out.push((name, cfg));
    }
    for path in &args.configs {
        let cfg =
            CaseConfig::from_file(path).with_context(|| format!("reading {}", path.display()))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "config".into());
        out.push((name, cfg));
    }
    if out.is_empty() {
        return Err(Failure::new(
            2,
            anyhow::anyhow!("nothing to run: give a case name or --config"),
        ));
    }
    for (_, cfg) in &mut out {
        if let Some(c) = args.convention {
            cfg.convention = c;
        }
        if let Some((a, b, step)) = args.fit_window {
            cfg.tau_fit_start = a;
            cfg.tau_fit_end = b;
            cfg.dtau = step;
        }
    }
    Ok(out)
}

/// Everything that can be rejected before any evolution starts.
fn preflight(name: &str, cfg: &CaseConfig, args: &RunArgs) -> Result<(), Failure> {
    cfg.check().with_context(|| format!("case {name}"))?;
    let violations = validate(cfg);
    if !violations.is_empty() && !args.allow_ill_posed {
        let mut msg = format!("case {name} is not well posed:");
        for v in &violations {
            msg.push_str(&format!("\n  {v}"));
        }
        return Err(Failure::new(2, anyhow::anyhow!(msg)));
    }
    let limit = tau_max(cfg.length, cfg.points, cfg.k0);
    let latest = args
        .snapshots
        .iter()
        .copied()
        .chain(cfg.fit_taus())
        .fold(0.0, f64::max);
    let earliest = args.snapshots.iter().copied().fold(0.0, f64::min);
    for tau in [earliest, latest] {
        if !(0.0..limit).contains(&tau) {
            let e = Error::Aliasing {
                tau,
                tau_max: limit,
            };
            return Err(anyhow::Error::from(e)
                .context(format!("case {name}"))
                .into());
        }
    }
    Ok(())
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn unix_seconds() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let cases = resolve(&args)?;
    for (name, cfg) in &cases {
        preflight(name, cfg, &args)?;
    }
    for (name, cfg) in cases {
        let dir = args.out.join(&name);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        run_case(&name, cfg, &dir, &args)?;
    }
    Ok(())
}

fn run_case(name: &str, cfg: CaseConfig, dir: &Path, args: &RunArgs) -> Result<(), Failure> {
    let started = unix_seconds();
    eprintln!("{name}: preparing {}x{} grid", cfg.points, cfg.points);
    let experiment = Experiment::new(name, cfg)?;
    let samples = experiment.config.fit_taus().len();
    let mut done = 0;
    let result = experiment.run(args.kmax_rule, |_| {
        done += 1;
        if done % 10 == 0 || done == samples {
            eprintln!("{name}: {done}/{samples} snapshots");
        }
    })?;

    let mut outputs = Vec::new();
    let mut emit = |file: String| {
        outputs.push(file.clone());
        dir.join(file)
    };
    write_norms_csv(create(&emit("norms.csv".into()))?, &result.trace)?;
    write_trace_csv(create(&emit("trace.csv".into()))?, &result.trace)?;
    write_kinematics_csv(
        create(&emit("kinematics.csv".into()))?,
        &result.kinematics_records(),
    )?;
    {
        let cfg = &experiment.config;
        let half = 8.0 * experiment.derived.sigma_k;
        let mut w = create(&emit("tk_curve.csv".into()))?;
        write_curve_csv(
            &mut w,
            &Interaction::from_config(cfg),
            (cfg.k0 - half).max(1e-3 * cfg.k0),
            cfg.k0 + half,
            2001,
        )?;
        w.flush().context("writing tk_curve.csv")?;
    }
    for &tau in &args.snapshots {
        let density = create(&emit(format!("density_tau{tau}.bin")))?;
        let marginals = experiment.write_snapshot(tau, density)?;
        write_marginals_csv(
            create(&emit(format!("marginals_tau{tau}.csv")))?,
            &marginals,
        )?;
    }

    let manifest = json!({
        "case": name,
        "config": experiment.config,
        "derived": experiment.derived,
        "version": env!("CARGO_PKG_VERSION"),
        "kmax_rule": format!("{:?}", args.kmax_rule).to_lowercase(),
        "started_unix": started,
        "finished_unix": unix_seconds(),
        "left_mover_ratio": experiment.left_mover_ratio,
        "outputs": outputs,
    });
    let path = dir.join("manifest.json");
    fs::write(
        &path,
        serde_json::to_string_pretty(&manifest).context("manifest")? + "\n",
    )
    .with_context(|| format!("writing {}", path.display()))?;

    print!("{}", summary(&result));
    Ok(())
}

fn summary(run: &CaseRun) -> String {
    let (mean, min, max) = run.transmission_percent();
    let mut s = format!(
        "{}: T = {mean:.2}% (range {min:.2}..{max:.2} over the fit window)\n",
        run.name
    );
    for (i, branch) in [Branch::T, Branch::R].into_iter().enumerate() {
        let sp = run.predicted[i];
        match &run.numerical[i] {
            Ok(num) => {
                s.push_str(&format!(
                    "  {branch}  dx_b  num {:+.3e}  sp {:+.3e}   v_b  num {:+.3e}  sp {:+.3e}\n",
                    num.dx_b, sp.dx_b, num.v_b, sp.v_b
                ));
                if let Some(f) = num.fit.filter(|f| f.flagged) {
                    s.push_str(&format!(
                        "     fit residuals large: rms_b {:.2e}, rms_p {:.2e}\n",
                        f.rms_b, f.rms_p
                    ));
                }
                if branch == Branch::T {
                    if let Ok((t_int, wigner)) = interaction_time(num, &run.config) {
                        s.push_str(&format!(
                            "     interaction time {t_int:.3e}, phase delay {wigner:.3e}\n"
                        ));
                    }
                }
            }
            Err(e) => s.push_str(&format!(
                "  {branch}  no numerical fit ({e}); sp dx_b {:+.3e}\n",
                sp.dx_b
            )),
        }
    }
    s
}

fn report(dir: &Path) -> Result<(), Failure> {
    let dirs = case_dirs(dir).map_err(|e| Failure::new(2, e))?;
    let outputs = dirs
        .iter()
        .map(|d| CaseOutputs::load(d))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::new(2, e))?;
    let (text, ok) = render(&outputs);
    print!("{text}");
    if ok {
        Ok(())
    } else {
        Err(Failure::new(1, anyhow::anyhow!("some checks failed")))
    }
}
