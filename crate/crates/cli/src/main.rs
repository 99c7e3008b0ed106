use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand};
use pickup_auth::Result;
use pickup_auth_cli::commands::{bench_tsv, cmd_auth, cmd_bench, cmd_enroll, cmd_gen, cmd_report, cmd_sweep, SweepFlags};
use pickup_auth_cli::Config;

#[derive(Parser)]
#[command(name = "pickup-auth", version, about = "Implicit authentication from the phone pick-up motion")]
struct Cli {
    /// Key-value configuration file; unset keys keep their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set theta=0.2`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded synthetic dataset and its manifest.
    Gen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        users: Option<usize>,
        #[arg(long)]
        contexts: Option<usize>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Victims, attackers and repetitions of the attack section.
        #[arg(long, value_name = "VICTIMS,ATTACKERS,REPS")]
        attacks: Option<String>,
    },
    /// Build a profile from the pick-ups found in one or more traces.
    Enroll {
        #[arg(long)]
        user: String,
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(required = true)]
        traces: Vec<PathBuf>,
    },
    /// Authenticate the latest pick-up in a trace. Exit 0 grants access, 2 denies.
    #[command(group(ArgGroup::new("explicit").args(["explicit_pass", "explicit_fail"])))]
    Auth {
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        /// The fallback check (PIN, password) succeeded.
        #[arg(long)]
        explicit_pass: bool,
        /// The fallback check failed.
        #[arg(long)]
        explicit_fail: bool,
    },
    /// Evaluate a dataset: threshold sweep plus optional analyses.
    Sweep {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        attacks: bool,
        #[arg(long)]
        ablation: bool,
        #[arg(long)]
        weights: bool,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Time single authentications for several signal lengths.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "25,50,100,200")]
        lengths: Vec<usize>,
        #[arg(long, default_value_t = 200)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Pick an operating point from a curve written by `sweep`.
    Report {
        #[arg(long)]
        curve: PathBuf,
        /// min-far-max-accuracy, eer, or target-frr:<rate>; defaults to the config policy.
        #[arg(long)]
        policy: Option<String>,
        #[arg(long)]
        detection_ratio: Option<f64>,
    },
}

fn load_config(cli: &Cli) -> Result<Config> {
    let mut config = match &cli.config {
        Some(path) => Config::from_file(path)?,
        None => Config::default(),
    };
    for o in &cli.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| pickup_auth::Error::invalid(format!("--set expects KEY=VALUE, got {o:?}")))?;
        config.set(k, v)?;
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<u8> {
    let mut config = load_config(&cli)?;
    match cli.command {
        Command::Gen {
            out,
            users,
            contexts,
            reps,
            seed,
            attacks,
        } => {
            for (key, value) in [("users", users), ("contexts", contexts), ("reps", reps)] {
                if let Some(v) = value {
                    config.set(key, &v.to_string())?;
                }
            }
            if let Some(s) = seed {
                config.set("seed", &s.to_string())?;
            }
            if let Some(a) = attacks {
                let parts: Vec<&str> = a.split(',').collect();
                let [v, at, r] = parts[..] else {
                    return Err(pickup_auth::Error::invalid("--attacks expects VICTIMS,ATTACKERS,REPS"));
                };
                config.set("attack_victims", v)?;
                config.set("attack_attackers", at)?;
                config.set("attack_reps", r)?;
            }
            let manifest = cmd_gen(&config, &out)?;
            println!("{}", manifest.display());
        }
        Command::Enroll {
            user,
            profile,
            theta,
            traces,
        } => {
            if let Some(t) = theta {
                config.set("theta", &t.to_string())?;
            }
            let s = cmd_enroll(&config, &traces, &user, &profile)?;
            println!(
                "enrolled {user} from {} sample(s) ({} trigger(s)); template length {}",
                s.samples, s.triggers, s.template_len
            );
        }
        Command::Auth {
            profile,
            trace,
            explicit_pass,
            explicit_fail,
        } => {
            let explicit = match (explicit_pass, explicit_fail) {
                (true, _) => Some(true),
                (_, true) => Some(false),
                _ => None,
            };
            let outcome = cmd_auth(&config, &profile, &trace, explicit)?;
            println!("{}", outcome.line());
            if outcome.updated {
                eprintln!("profile updated");
            }
            return Ok(outcome.exit_code() as u8);
        }
        Command::Sweep {
            manifest,
            out,
            attacks,
            ablation,
            weights,
            jobs,
        } => {
            let flags = SweepFlags {
                attacks,
                ablation,
                weights,
                jobs,
            };
            let summary = cmd_sweep(&config, &manifest, &out, flags)?;
            print!("{}", summary.text);
        }
        Command::Bench { lengths, reps, seed } => {
            let rows = cmd_bench(&config, &lengths, reps, seed)?;
            print!("{}", bench_tsv(&rows));
        }
        Command::Report {
            curve,
            policy,
            detection_ratio,
        } => {
            if let Some(p) = policy {
                config.set("policy", &p)?;
            }
            print!("{}", cmd_report(&curve, config.policy, detection_ratio)?);
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
