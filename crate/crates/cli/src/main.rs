use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bibalance::adversaries::{
    exhaustive_worst_case, AlternatingGambler, ConstantGambler, GamblerKind, GreedyGambler, InteractiveGambler,
    ProportionalGambler, RandomGambler,
};
use bibalance::blackwell::{anytime_bound, delta_for_horizon, trace, TRACE_CSV_HEADER};
use bibalance::oracle::{
    verify_blackwell_partition, verify_blackwell_projection, verify_equalizer_t2, verify_grid_minimax,
    verify_jensen_domination, verify_optimal_loss, verify_subtree_balance, GridSpec, VerificationReport,
};
use bibalance::{
    game_loss, house_gain, play_game, BetPoint, Error, GamblerStrategy, GameConfig, HouseKind, Outcome, Transcript,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

/// Odds-setting strategies for the binary online bookmaking game.
#[derive(Parser)]
#[command(name = "bibalance", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Play one game and report the house's loss and gain.
    Simulate(SimulateArgs),
    /// Worst-case loss of several houses over a list of horizons (CSV).
    Sweep(SweepArgs),
    /// Run one oracle check and print a JSON report.
    Verify(VerifyArgs),
    /// Bet against a house from the terminal.
    Play(PlayArgs),
    /// Play several houses against the same gambler.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, Default, ValueEnum)]
enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Args, Clone, Default)]
struct HouseParams {
    /// House parameters as a JSON object, e.g. '{"N": 500}'.
    #[arg(long, value_name = "JSON")]
    house_params: Option<String>,
    /// Monte Carlo copies.
    #[arg(long)]
    mc_n: Option<usize>,
    /// Monte Carlo seed (defaults to --seed).
    #[arg(long)]
    mc_seed: Option<u64>,
    /// Monte Carlo accuracy; with --mc-delta sets the number of copies.
    #[arg(long)]
    mc_eps: Option<f64>,
    #[arg(long)]
    mc_delta: Option<f64>,
    /// Approachability cap Δ in (1, 2); required for T <= 32.
    #[arg(long)]
    bw_delta: Option<f64>,
}

const DEFAULT_MC_COPIES: u64 = 1000;

impl HouseParams {
    fn resolve(&self, id: &str, seed: u64) -> Result<HouseKind, Error> {
        let mut m = match &self.house_params {
            None => Map::new(),
            Some(s) => match serde_json::from_str(s)? {
                Value::Object(m) => m,
                other => {
                    return Err(Error::Domain(format!(
                        "--house-params must be a JSON object, got {other}"
                    )))
                }
            },
        };
        match id {
            "mc" => {
                if let Some(n) = self.mc_n {
                    m.insert("N".into(), json!(n));
                }
                if let Some(e) = self.mc_eps {
                    m.insert("eps".into(), json!(e));
                }
                if let Some(d) = self.mc_delta {
                    m.insert("delta".into(), json!(d));
                }
                m.insert("seed".into(), json!(self.mc_seed.unwrap_or(seed)));
                if !m.contains_key("N") && !m.contains_key("eps") && !m.contains_key("delta") {
                    m.insert("N".into(), json!(DEFAULT_MC_COPIES));
                }
            }
            "blackwell" => {
                if let Some(d) = self.bw_delta {
                    m.insert("delta".into(), json!(d));
                }
            }
            _ => {}
        }
        HouseKind::parse(id, &Value::Object(m))
    }
}

#[derive(Args)]
struct GameArgs {
    /// Horizon (number of rounds).
    #[arg(long = "T", value_name = "T")]
    horizon: usize,
    /// Overround Γ >= 1.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    params: HouseParams,
}

#[derive(Args)]
struct SimulateArgs {
    /// optimal, expected, mc, blackwell, kt or uniform.
    #[arg(long)]
    house: String,
    /// exhaustive, greedy, proportional, alternating, constant:<q>,
    /// random:<seed>, replay:<file> or interactive.
    #[arg(long)]
    gambler: String,
    #[command(flatten)]
    game: GameArgs,
    /// Write the transcript here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
    /// Write the approachability trace (blackwell house only) as CSV.
    #[arg(long)]
    bw_trace: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated house ids.
    #[arg(long, value_delimiter = ',', default_value = "optimal,uniform,kt,blackwell")]
    house: Vec<String>,
    /// Comma-separated horizons.
    #[arg(long = "T", value_delimiter = ',', required = true, value_name = "T")]
    horizons: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    params: HouseParams,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Check {
    OptimalLoss,
    SubtreeBalance,
    GridMinimax,
    Equalizer,
    JensenDomination,
    BlackwellPartition,
    BlackwellProjection,
}

#[derive(Args)]
struct VerifyArgs {
    check: Check,
    #[arg(long = "T", value_name = "T")]
    horizon: Option<usize>,
    /// Odds grid resolution for grid-minimax.
    #[arg(long, default_value_t = 1e-3)]
    res: f64,
    /// Sample count for jensen-domination and the approachability checks.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlayArgs {
    #[arg(long, default_value = "optimal")]
    house: String,
    #[command(flatten)]
    game: GameArgs,
    /// Write the transcript here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

#[derive(Args)]
struct CompareArgs {
    /// Comma-separated house ids.
    #[arg(long, value_delimiter = ',', default_value = "optimal,expected,uniform,kt")]
    house: Vec<String>,
    #[arg(long)]
    gambler: String,
    #[command(flatten)]
    game: GameArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Protocol { .. } => 3,
        Error::Aborted(_) => 4,
        Error::Invariant(_) => 1,
        _ => 2,
    }
}

fn output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_transcript(t: &Transcript, path: &Path, format: Format) -> Result<(), Error> {
    let mut out = BufWriter::new(File::create(path)?);
    match format {
        Format::Json => writeln!(out, "{}", t.to_json()?)?,
        Format::Csv => t.write_csv(&mut out)?,
    }
    out.flush()?;
    Ok(())
}

fn summary(house: &str, gambler: &str, t: &Transcript) -> Result<Value, Error> {
    let cfg = t.config();
    let loss = game_loss(t)?;
    Ok(json!({
        "house": house,
        "gambler": gambler,
        "T": cfg.horizon(),
        "gamma": cfg.overround(),
        "loss": loss,
        "normalized_loss": loss / cfg.horizon() as f64,
        "gain": house_gain(loss, cfg)?,
    }))
}

fn simulate(a: &SimulateArgs) -> Result<u8, Error> {
    let g = &a.game;
    let cfg = GameConfig::new(g.horizon, g.gamma)?;
    let house_kind = g.params.resolve(&a.house, g.seed)?;
    let gambler_kind: GamblerKind = a.gambler.parse()?;
    let mut gambler = gambler_kind.build(&house_kind, g.horizon)?;
    let mut house = house_kind.build(g.horizon)?;
    let tr = play_game(house.as_mut(), gambler.as_mut(), cfg)?;

    if let Some(path) = &a.out {
        write_transcript(&tr, path, a.format)?;
    }
    if let Some(path) = &a.bw_trace {
        let dp = match house_kind {
            HouseKind::Blackwell(Some(d)) => d,
            HouseKind::Blackwell(None) => delta_for_horizon(g.horizon)?,
            _ => return Err(Error::Domain("--bw-trace needs --house blackwell".into())),
        };
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{TRACE_CSV_HEADER}")?;
        for row in trace(tr.rounds(), dp)? {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                row.t, row.phi.x1, row.phi.x2, row.region, row.r, row.bound
            )?;
        }
        out.flush()?;
    }
    let mut s = summary(&a.house, &a.gambler, &tr)?;
    if gambler_kind.is_decisive() {
        s["decisive_only"] = json!(true);
    }
    println!("{s}");
    Ok(0)
}

const SWEEP_HEADER: &str = "T,house,worst_loss,normalized_loss,bound";
const EXHAUSTIVE_SWEEP_LIMIT: usize = 16;

struct SweepRow {
    horizon: usize,
    house: String,
    worst_loss: f64,
    bound: Option<f64>,
}

fn battery(decisive_only: bool) -> Vec<Box<dyn GamblerStrategy>> {
    let mut g: Vec<Box<dyn GamblerStrategy>> = vec![
        Box::new(GreedyGambler),
        Box::new(AlternatingGambler),
        Box::new(ConstantGambler(Outcome::Zero.as_bet())),
        Box::new(ConstantGambler(Outcome::One.as_bet())),
    ];
    if !decisive_only {
        g.push(Box::new(ProportionalGambler));
        g.push(Box::new(ConstantGambler(BetPoint::new(0.5).expect("valid"))));
    }
    for seed in 0..8 {
        g.push(Box::new(RandomGambler::new(seed)));
    }
    g
}

fn worst_loss(kind: &HouseKind, horizon: usize) -> Result<f64, Error> {
    if horizon <= EXHAUSTIVE_SWEEP_LIMIT {
        return Ok(exhaustive_worst_case(&|| kind.build(horizon), horizon)?.1);
    }
    let decisive_only = matches!(kind, HouseKind::Optimal | HouseKind::Kt);
    let cfg = GameConfig::fair(horizon)?;
    let mut worst: f64 = 0.0;
    for mut g in battery(decisive_only) {
        let mut house = kind.build(horizon)?;
        let tr = play_game(house.as_mut(), g.as_mut(), cfg)?;
        worst = worst.max(game_loss(&tr)?);
    }
    Ok(worst)
}

fn bound(kind: &HouseKind, horizon: usize) -> Result<Option<f64>, Error> {
    let t = horizon as f64;
    Ok(match kind {
        HouseKind::Optimal | HouseKind::Expected | HouseKind::MonteCarlo(_) => Some(1.0 + 1.0 / t.sqrt()),
        HouseKind::Uniform => Some(2.0),
        HouseKind::Kt => None,
        HouseKind::Blackwell(d) => {
            let dp = match d {
                Some(d) => *d,
                None => delta_for_horizon(horizon)?,
            };
            Some(anytime_bound(horizon, dp)?)
        }
    })
}

fn sweep(a: &SweepArgs) -> Result<u8, Error> {
    let mut items = Vec::new();
    for &t in &a.horizons {
        GameConfig::fair(t)?;
        for id in &a.house {
            let kind = a.params.resolve(id, a.seed)?;
            if matches!(kind, HouseKind::Blackwell(None)) && t <= 32 {
                eprintln!("warning: skipping blackwell at T={t}: the Δ schedule needs T > 32; pass --bw-delta");
                continue;
            }
            items.push((t, id.clone(), kind));
        }
    }
    let rows = items
        .par_iter()
        .map(|(t, id, kind)| {
            Ok(SweepRow {
                horizon: *t,
                house: id.clone(),
                worst_loss: worst_loss(kind, *t)?,
                bound: bound(kind, *t)?,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;

    let mut out = output(a.out.as_deref())?;
    match a.format {
        Format::Csv => {
            writeln!(out, "{SWEEP_HEADER}")?;
            for r in &rows {
                let b = r.bound.map(|b| b.to_string()).unwrap_or_default();
                writeln!(
                    out,
                    "{},{},{},{},{b}",
                    r.horizon,
                    r.house,
                    r.worst_loss,
                    r.worst_loss / r.horizon as f64
                )?;
            }
        }
        Format::Json => {
            let v: Vec<Value> = rows
                .iter()
                .map(|r| {
                    json!({
                        "T": r.horizon,
                        "house": r.house,
                        "worst_loss": r.worst_loss,
                        "normalized_loss": r.worst_loss / r.horizon as f64,
                        "bound": r.bound,
                    })
                })
                .collect();
            writeln!(out, "{}", Value::Array(v))?;
        }
    }
    out.flush()?;
    Ok(0)
}

fn verify(a: &VerifyArgs) -> Result<u8, Error> {
    let report: VerificationReport = match a.check {
        Check::OptimalLoss => verify_optimal_loss(a.horizon.unwrap_or(12))?,
        Check::SubtreeBalance => verify_subtree_balance(a.horizon.unwrap_or(4))?,
        Check::GridMinimax => verify_grid_minimax(&GridSpec::new(a.horizon.unwrap_or(2), a.res)?),
        Check::Equalizer => verify_equalizer_t2(),
        Check::JensenDomination => verify_jensen_domination(a.horizon.unwrap_or(8), a.samples.unwrap_or(1000), a.seed)?,
        Check::BlackwellPartition => verify_blackwell_partition(a.samples.unwrap_or(100_000), a.seed),
        Check::BlackwellProjection => verify_blackwell_projection(a.samples.unwrap_or(500), a.seed, 2e-3),
    };
    let mut out = output(a.out.as_deref())?;
    writeln!(out, "{}", report.to_json()?)?;
    out.flush()?;
    Ok(if report.pass { 0 } else { 1 })
}

fn play(a: &PlayArgs) -> Result<u8, Error> {
    let g = &a.game;
    let cfg = GameConfig::new(g.horizon, g.gamma)?;
    let mut house = g.params.resolve(&a.house, g.seed)?.build(g.horizon)?;
    let mut gambler = InteractiveGambler::new(io::stdin().lock(), io::stdout());
    let tr = play_game(house.as_mut(), &mut gambler, cfg)?;
    let acc = tr.accumulated();
    println!("settlement:");
    for (label, o) in [("0", Outcome::Zero), ("1", Outcome::One)] {
        println!(
            "  if {label} wins: exposure {:.9}, payout at Γ={} is {:.9}",
            acc.get(o),
            g.gamma,
            acc.get(o) / g.gamma
        );
    }
    let loss = game_loss(&tr)?;
    println!("house loss {loss:.9}, gain {:.9}", house_gain(loss, &cfg)?);
    if let Some(path) = &a.out {
        write_transcript(&tr, path, a.format)?;
    }
    Ok(0)
}

const COMPARE_HEADER: &str = "house,T,gamma,loss,normalized_loss,gain";

fn compare(a: &CompareArgs) -> Result<u8, Error> {
    let g = &a.game;
    let cfg = GameConfig::new(g.horizon, g.gamma)?;
    let gambler_kind: GamblerKind = a.gambler.parse()?;
    if matches!(gambler_kind, GamblerKind::Interactive) {
        return Err(Error::Domain("compare needs a non-interactive gambler".into()));
    }
    let mut rows = Vec::new();
    for id in &a.house {
        let kind = g.params.resolve(id, g.seed)?;
        let mut gambler = gambler_kind.build(&kind, g.horizon)?;
        let mut house = kind.build(g.horizon)?;
        let tr = play_game(house.as_mut(), gambler.as_mut(), cfg)?;
        rows.push(summary(id, &a.gambler, &tr)?);
    }
    let mut out = output(a.out.as_deref())?;
    match a.format {
        Format::Csv => {
            writeln!(out, "{COMPARE_HEADER}")?;
            for r in &rows {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    r["house"].as_str().unwrap_or_default(),
                    r["T"],
                    r["gamma"],
                    r["loss"],
                    r["normalized_loss"],
                    r["gain"]
                )?;
            }
        }
        Format::Json => writeln!(out, "{}", Value::Array(rows))?,
    }
    out.flush()?;
    Ok(0)
}

fn configure_threads() -> Result<(), Error> {
    if let Ok(v) = std::env::var("BIBALANCE_THREADS") {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Domain(format!("BIBALANCE_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Domain(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Verify(a) => verify(a),
        Command::Play(a) => play(a),
        Command::Compare(a) => compare(a),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("bibalance: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
