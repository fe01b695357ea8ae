use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use pilotgrid::assignment::{assign_random, assign_regenerative, assign_rsa, PilotAssignment};
use pilotgrid::bnp::{bnp_solve_with, BnpInstance, BnpOptions};
use pilotgrid::channel::{GainModel, SeConfig};
use pilotgrid::experiment::output::{write_csv, write_json};
use pilotgrid::experiment::{gain_matrix, reproduce_figure, run_experiment, ExperimentConfig, Figure, FigureOptions};
use pilotgrid::geometry::{assign_marks, sample_ppp, CircularWindow, PointSet};
use pilotgrid::maxmin::{maxmin_assign, PartitionInstance, PartitionStatus};
use pilotgrid::spectral::{cluster_users, ClusterOptions};
use pilotgrid::theory::{assignment_probability, sequential_densities, AssignmentProbabilityInputs};
use pilotgrid::Error;

#[derive(Parser)]
#[command(name = "pilotgrid", version, about = "Pilot assignment experiments for cell-free massive MIMO")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo run described by a TOML config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// `key=value`, applied after the file. Repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Per-trial CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON mirror with rows and summaries.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Regenerate the dataset behind one figure.
    Figure {
        name: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// fig5-cdf only: small instances with a certified BnP optimum.
        #[arg(long)]
        certified: bool,
        #[arg(long, default_value_t = 60.0)]
        time_budget: f64,
        #[arg(long, default_value_t = 500)]
        max_pricing_calls: usize,
    },
    /// Analytic predictions.
    Theory {
        #[command(subcommand)]
        what: TheoryCommand,
    },
    /// Assign pilots to a user file.
    Assign {
        scheme: AssignScheme,
        #[command(flatten)]
        args: AssignArgs,
    },
    /// Draw a Poisson point set on a disk.
    Sample {
        #[arg(long)]
        density: f64,
        #[arg(long, default_value_t = 1500.0)]
        radius: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spectral co-clustering of users and RRHs.
    Cluster {
        #[arg(long)]
        users: PathBuf,
        #[arg(long)]
        rrhs: PathBuf,
        #[arg(long)]
        pilots: usize,
        #[arg(long)]
        clusters: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum TheoryCommand {
    /// Co-pilot and assigned density for P = 1..=pilots.
    Density {
        #[arg(long)]
        user_density: f64,
        #[arg(long)]
        radius: f64,
        #[arg(long, default_value_t = 16)]
        pilots: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Typical-user assignment probability for P = 1..=pilots.
    Prob {
        #[arg(long)]
        user_density: f64,
        #[arg(long)]
        radius: f64,
        #[arg(long, default_value_t = 16)]
        pilots: usize,
        #[arg(long, default_value_t = 1500.0)]
        observation_radius: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum AssignScheme {
    Rsa,
    Regenerative,
    Random,
    Maxmin,
    Bnp,
}

#[derive(Args)]
struct AssignArgs {
    /// User CSV as written by `sample`.
    #[arg(long)]
    users: PathBuf,
    /// RRH CSV; required by bnp.
    #[arg(long)]
    rrhs: Option<PathBuf>,
    #[arg(long)]
    pilots: usize,
    #[arg(long, default_value_t = 200.0)]
    radius: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 80.0)]
    pilot_snr_db: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    sinr_floor_db: f64,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 10.0)]
    time_budget: f64,
    #[arg(long)]
    max_pricing_calls: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct DensityRow {
    pilots: usize,
    copilot_density: f64,
    assigned_density: f64,
}

#[derive(Serialize)]
struct ProbabilityRow {
    pilots: usize,
    probability: f64,
}

#[derive(Serialize)]
struct ClusterRow {
    kind: &'static str,
    index: usize,
    cluster: usize,
}

enum Outcome {
    Done,
    /// Output written, but a search stopped before certifying optimality.
    BudgetExceeded,
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_points(path: &Path) -> Result<PointSet<f64>, Error> {
    PointSet::read_csv(BufReader::new(File::open(path)?))
}

fn run(cli: Cli) -> Result<Outcome, Error> {
    match cli.command {
        Command::Simulate {
            config,
            overrides,
            out,
            json,
        } => {
            let text = std::fs::read_to_string(&config)?;
            let cfg = ExperimentConfig::load(&text, &overrides)?;
            let data = run_experiment(&cfg)?;
            write_csv(sink(out.as_deref())?, cfg.seed, &cfg.to_toml(), &data.rows)?;
            if let Some(p) = json {
                write_json(BufWriter::new(File::create(p)?), cfg.seed, &data)?;
            }
            let truncated = data.rows.iter().any(|r| r.status == "budget-exceeded");
            Ok(if truncated { Outcome::BudgetExceeded } else { Outcome::Done })
        }
        Command::Figure {
            name,
            out,
            trials,
            seed,
            certified,
            time_budget,
            max_pricing_calls,
        } => {
            let figure: Figure = name.parse()?;
            let opts = FigureOptions {
                trials,
                seed,
                certified,
                time_budget_s: time_budget,
                max_pricing_calls: Some(max_pricing_calls),
            };
            let path = reproduce_figure(figure, &opts, &out)?;
            log::info!("wrote {}", path.display());
            Ok(Outcome::Done)
        }
        Command::Theory { what } => {
            match what {
                TheoryCommand::Density {
                    user_density,
                    radius,
                    pilots,
                    out,
                } => {
                    let rows = (1..=pilots)
                        .map(|p| {
                            let d = sequential_densities(user_density, radius, p)?;
                            Ok(DensityRow {
                                pilots: p,
                                copilot_density: d.per_pilot,
                                assigned_density: d.assigned,
                            })
                        })
                        .collect::<Result<Vec<_>, Error>>()?;
                    let echo = format!("user_density = {user_density}\nradius = {radius}\n");
                    write_csv(sink(out.as_deref())?, 0, &echo, &rows)?;
                }
                TheoryCommand::Prob {
                    user_density,
                    radius,
                    pilots,
                    observation_radius,
                    out,
                } => {
                    let rows = (1..=pilots)
                        .map(|p| {
                            let probability = assignment_probability(&AssignmentProbabilityInputs {
                                user_density,
                                inhibition_radius: radius,
                                pilots: p,
                                observation_radius,
                            })?;
                            Ok(ProbabilityRow { pilots: p, probability })
                        })
                        .collect::<Result<Vec<_>, Error>>()?;
                    let echo = format!("user_density = {user_density}\nradius = {radius}\nobservation_radius = {observation_radius}\n");
                    write_csv(sink(out.as_deref())?, 0, &echo, &rows)?;
                }
            }
            Ok(Outcome::Done)
        }
        Command::Assign { scheme, args } => assign(scheme, &args),
        Command::Sample {
            density,
            radius,
            seed,
            out,
        } => {
            let window = CircularWindow::centered(radius)?;
            let points = assign_marks(sample_ppp(density, &window, seed)?, seed);
            points.write_csv(sink(out.as_deref())?, &[("density".into(), density.to_string())])?;
            Ok(Outcome::Done)
        }
        Command::Cluster {
            users,
            rrhs,
            pilots,
            clusters,
            seed,
            out,
        } => {
            let users = read_points(&users)?;
            let rrhs = read_points(&rrhs)?;
            let gains = GainModel::new(&SeConfig::<f64>::for_pilots(pilots, 80.0).pathloss);
            let beta = gain_matrix(rrhs.points(), users.points(), &gains);
            let opts = ClusterOptions {
                k_override: clusters,
                ..ClusterOptions::default()
            };
            let res = cluster_users(&beta, pilots, seed, &opts)?;
            let rows: Vec<ClusterRow> = res
                .user_membership
                .iter()
                .enumerate()
                .map(|(index, &cluster)| ClusterRow { kind: "user", index, cluster })
                .chain(res.rrh_membership.iter().enumerate().map(|(index, &cluster)| ClusterRow { kind: "rrh", index, cluster }))
                .collect();
            let echo = format!("pilots = {pilots}\nk = {}\nncut = {}\n", res.k, res.ncut);
            write_csv(sink(out.as_deref())?, seed, &echo, &rows)?;
            Ok(Outcome::Done)
        }
    }
}

fn assign(scheme: AssignScheme, args: &AssignArgs) -> Result<Outcome, Error> {
    let users = read_points(&args.users)?;
    let p = args.pilots;
    let mut outcome = Outcome::Done;
    let asg: PilotAssignment<f64> = match scheme {
        AssignScheme::Rsa => {
            let marked = if users.marks().is_some() { users.clone() } else { assign_marks(users.clone(), args.seed) };
            assign_rsa(&marked, p, args.radius, args.seed)?
        }
        AssignScheme::Regenerative => {
            let marked = if users.marks().is_some() { users.clone() } else { assign_marks(users.clone(), args.seed) };
            assign_regenerative(&marked, p, args.radius)?
        }
        AssignScheme::Random => assign_random(users.len(), p, args.seed)?,
        AssignScheme::Maxmin => {
            let mut inst = PartitionInstance::new(&users, p);
            inst.epsilon = args.epsilon;
            inst.time_budget = Duration::from_secs_f64(args.time_budget);
            let r = maxmin_assign(&inst)?;
            match r.status {
                PartitionStatus::Infeasible => {
                    return Err(Error::Infeasible(format!("{} users cannot form {p} sets of at least two", users.len())))
                }
                PartitionStatus::Approximate => outcome = Outcome::BudgetExceeded,
                PartitionStatus::OptimalWithinEpsilon => {}
            }
            log::info!("minimum co-pilot distance {}", r.t_star);
            r.to_assignment(p)?
        }
        AssignScheme::Bnp => {
            let path = args
                .rrhs
                .as_ref()
                .ok_or_else(|| Error::Config("bnp needs --rrhs".into()))?;
            let rrhs = read_points(path)?;
            let se = SeConfig::<f64>::for_pilots(p, args.pilot_snr_db);
            let beta = gain_matrix(rrhs.points(), users.points(), &GainModel::new(&se.pathloss));
            let opts = ClusterOptions {
                max_cluster_users: Some(p),
                ..ClusterOptions::default()
            };
            let clusters = cluster_users(&beta, p, args.seed, &opts)?;
            let inst = BnpInstance::new(beta, p, clusters.user_membership, se.pilot_energy)?.with_sinr_floor_db(args.sinr_floor_db);
            let out = bnp_solve_with(
                &inst,
                &BnpOptions {
                    time_budget: Duration::from_secs_f64(args.time_budget),
                    max_pricing_calls: args.max_pricing_calls,
                },
            )?;
            if out.stats.timed_out {
                outcome = Outcome::BudgetExceeded;
            }
            log::info!("objective {} bound {} nodes {}", out.objective, out.root_bound, out.stats.nodes);
            out.assignment
        }
    };
    asg.write_csv(sink(args.out.as_deref())?, &users, args.seed)?;
    Ok(outcome)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parameter { .. } | Error::Data(_) | Error::Domain(_) => 2,
        Error::Infeasible(_) => 3,
        Error::Budget(_) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::BudgetExceeded) => {
            eprintln!("warning: search budget exhausted; result is not certified optimal");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
