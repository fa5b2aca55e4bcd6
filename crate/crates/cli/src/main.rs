//! Command line front end: index and bound calculators, division-game and
//! adversary-game runners, the deficiency checker, the ultraresponse
//! validator, and deterministic transcript replay.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use rwcake::adversary::{AdversaryOptions, ScheduledAdversary};
use rwcake::arena::{run_adversary_game, run_division_game, AdversaryInfo, Transcript, Verdict};
use rwcake::deficiency::{is_deficient, DeficiencyVerdict, EnumerationBudget};
use rwcake::exact::{Radicand, Scalar};
use rwcake::indices::{
    adversary_schedule, clonage_lower_bound, clonage_upper_bound, compute_indices,
    fineness_lower_bound, precision_lower_bound, EntitlementProfile, ScheduleMode,
};
use rwcake::kitchen::{KitchenMeasure, Query};
use rwcake::protocols::mediator_by_name;
use rwcake::records::{validate_ultraresponse, PartitionRecord, RecordDoc, UltraVerdict};
use rwcake::sampling;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Parser)]
#[command(
    name = "rwcake",
    about = "Exact cake division under entitlements in the Robertson-Webb query model",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Entitlements: comma-separated scalars ("1/2,1/3,1/6") or the named
    /// profile "golden" = ((-1+√5)/2, (3-√5)/2).
    #[arg(short, long, allow_hyphen_values = true)]
    entitlements: String,
    /// Radicand d of the engine field Q(√d); 0 means pure rationals.
    #[arg(short = 'd', long, default_value_t = 5)]
    radicand: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Clonage, precision, and fineness of an entitlement profile.
    Indices {
        #[command(flatten)]
        common: CommonOpts,
        /// Emit JSON instead of the aligned table.
        #[arg(long)]
        json: bool,
    },
    /// Closed-form query bound calculators and level schedules.
    Bounds {
        #[arg(value_enum)]
        kind: BoundKind,
        /// Clonage level (theorem1, cf-upper).
        #[arg(long)]
        clonage: Option<BigUint>,
        /// Precision level (prop1).
        #[arg(long)]
        precision: Option<BigUint>,
        /// Fineness level (cf2-lower).
        #[arg(long)]
        fineness: Option<BigUint>,
        /// Target query count c* (schedule).
        #[arg(long)]
        cstar: Option<u32>,
        /// Number of agents.
        #[arg(short = 'n', long, default_value_t = 2)]
        agents: usize,
    },
    /// Run a protocol in the division game against a measure profile.
    Simulate {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(short, long, default_value = "cloned-ds")]
        mediator: String,
        /// JSON file with one kitchen measure per agent; omitted means a
        /// seeded random profile.
        #[arg(long)]
        measures: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1024)]
        budget: u64,
        /// Write the transcript JSON here instead of stdout.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Run a mediator against the scheduled forcing adversary.
    Duel {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(short, long, default_value = "cloned-ds")]
        mediator: String,
        #[arg(long, default_value_t = 2)]
        cstar: u32,
        #[arg(long, value_enum, default_value_t = ScheduleArg::Paper)]
        schedule: ScheduleArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Query budget; the default c*+1 suffices to witness forcing.
        #[arg(long)]
        budget: Option<u64>,
        /// Re-verify every response's deficiency by brute force when the
        /// enumeration budget allows.
        #[arg(long)]
        checked: bool,
        /// Fidelity mode: inconsistent adversary responses empty the
        /// domain instead of faulting, handing the mediator the win.
        #[arg(long)]
        permissive: bool,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Decide ℓ-deficiency of a two-agent partition record.
    Deficiency {
        /// Partition record JSON file.
        record: PathBuf,
        /// Distinguished agent 1's threshold.
        #[arg(long, allow_hyphen_values = true)]
        e1: String,
        #[arg(long)]
        level: u64,
        /// Enumeration node budget; infeasible instances are reported, not
        /// approximated.
        #[arg(long, default_value_t = 20_000_000)]
        nodes: u64,
    },
    /// Validate a candidate ultraresponse against a record and a query.
    Validate {
        /// Previous partition record JSON file.
        #[arg(long)]
        prev: PathBuf,
        /// Query JSON file: {cutter, serving, proportion}.
        #[arg(long)]
        query: PathBuf,
        /// Candidate partition record JSON file (may be invalid).
        #[arg(long)]
        candidate: PathBuf,
    },
    /// Re-run a transcript and check byte-for-byte determinism.
    Replay { transcript: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundKind {
    /// max{k : (2^(2^k-1))^(n-1) <= c} — no protocol finishes within this
    /// many queries when the clonage exceeds c.
    Theorem1,
    /// max{c : p >= 2^(2^c-1)} — the two-agent floor given a precision level.
    Prop1,
    /// 2(n-1)·ceil(log2 c) — a protocol exists within this many queries.
    CfUpper,
    /// (n-1)·log3(f), reported exactly and as an approximation.
    Cf2Lower,
    /// Adversary level schedules for a target query count c*.
    Schedule,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    Paper,
    Minimal,
}

impl From<ScheduleArg> for ScheduleMode {
    fn from(s: ScheduleArg) -> ScheduleMode {
        match s {
            ScheduleArg::Paper => ScheduleMode::Paper,
            ScheduleArg::Minimal => ScheduleMode::Minimal,
        }
    }
}

fn parse_profile(common: &CommonOpts) -> Result<EntitlementProfile> {
    let d = Radicand::new(common.radicand).map_err(|e| anyhow!("{e}"))?;
    if common.entitlements.trim() == "golden" {
        if d.value() != 5 {
            bail!("the golden profile lives in Q(√5); pass -d 5");
        }
        return Ok(EntitlementProfile::golden());
    }
    let shares = common
        .entitlements
        .split(',')
        .map(|part| {
            let s = Scalar::from_str(part.trim()).map_err(|e| anyhow!("{e}"))?;
            if s.radicand() != 0 && s.radicand() != d.value() {
                bail!("entitlement {s} does not live in Q(√{})", d.value());
            }
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    EntitlementProfile::new(shares).map_err(|e| anyhow!("{e}"))
}

/// Writes the transcript to --out, or into $RWCAKE_OUT_DIR under a
/// config-derived name, or to stdout when neither is given.
fn emit(out: &Option<PathBuf>, transcript: &Transcript) -> Result<()> {
    let json = serde_json::to_string_pretty(transcript)?;
    let target = out.clone().or_else(|| {
        std::env::var_os("RWCAKE_OUT_DIR").map(|dir| {
            let mode = match transcript.mode {
                rwcake::arena::GameMode::Division => "division",
                rwcake::arena::GameMode::Adversary => "adversary",
            };
            PathBuf::from(dir).join(format!(
                "{mode}-{}-seed{}.json",
                transcript.mediator, transcript.seed
            ))
        })
    });
    match target {
        Some(path) => {
            std::fs::write(&path, json.as_bytes())
                .with_context(|| format!("writing {}", path.display()))?;
            eprintln!("transcript: {}", path.display());
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn summarize(t: &Transcript) {
    eprintln!(
        "mode: {:?}, mediator: {}, cost: {}, verdict: {:?}",
        t.mode, t.mediator, t.cost, t.verdict
    );
    for note in &t.notes {
        eprintln!("note: {note}");
    }
}

fn main() {
    match run() {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(64);
        }
    }
}

fn run() -> Result<i32> {
    let cli = Cli::parse();
    match cli.command {
        Command::Indices { common, json } => {
            let e = parse_profile(&common)?;
            let report = compute_indices(&e);
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                println!("{:<14}{}", "clonage", report.clonage);
                println!("{:<14}{}", "precision", report.precision);
                println!("{:<14}{}", "fineness", report.fineness);
                // The cost row of the bounds table, instantiated at this
                // profile: any protocol needs more than the lower figure,
                // and one exists within the upper figure.
                let n = e.agents();
                if n >= 2 {
                    match report.clonage.finite() {
                        Some(c) => {
                            use num_traits::One;
                            if c > &BigUint::one() {
                                let lower = clonage_lower_bound(&(c - BigUint::one()), n)
                                    .map_err(|e| anyhow!("{e}"))?;
                                println!("{:<14}> {}", "cost lower", lower);
                            } else {
                                println!("{:<14}>= 0", "cost lower");
                            }
                            let upper = clonage_upper_bound(c, n).map_err(|e| anyhow!("{e}"))?;
                            println!("{:<14}<= {}", "cost upper", upper);
                        }
                        None => {
                            println!("{:<14}unbounded (irrational entitlement)", "cost");
                        }
                    }
                }
            }
            Ok(0)
        }
        Command::Bounds {
            kind,
            clonage,
            precision,
            fineness,
            cstar,
            agents,
        } => {
            let need = |v: &Option<BigUint>, name: &str| {
                v.clone()
                    .ok_or_else(|| anyhow!("--{name} is required for this bound"))
            };
            match kind {
                BoundKind::Prop1 => {
                    let p = need(&precision, "precision")?;
                    println!("{}", precision_lower_bound(&p).map_err(|e| anyhow!("{e}"))?);
                }
                BoundKind::Theorem1 => {
                    let c = need(&clonage, "clonage")?;
                    println!(
                        "{}",
                        clonage_lower_bound(&c, agents).map_err(|e| anyhow!("{e}"))?
                    );
                }
                BoundKind::CfUpper => {
                    let c = need(&clonage, "clonage")?;
                    println!(
                        "{}",
                        clonage_upper_bound(&c, agents).map_err(|e| anyhow!("{e}"))?
                    );
                }
                BoundKind::Cf2Lower => {
                    let f = need(&fineness, "fineness")?;
                    let bound = fineness_lower_bound(&f, agents).map_err(|e| anyhow!("{e}"))?;
                    println!(
                        "{} · log3({}) ≈ {:.6}",
                        bound.factor, bound.fineness, bound.approx
                    );
                }
                BoundKind::Schedule => {
                    let c_star = cstar.ok_or_else(|| anyhow!("--cstar is required"))?;
                    for mode in [ScheduleMode::Paper, ScheduleMode::Minimal] {
                        let levels =
                            adversary_schedule(mode, c_star).map_err(|e| anyhow!("{e}"))?;
                        let text: Vec<String> = levels.iter().map(|l| l.to_string()).collect();
                        println!("{mode}: {}", text.join(", "));
                    }
                }
            }
            Ok(0)
        }
        Command::Simulate {
            common,
            mediator,
            measures,
            seed,
            budget,
            out,
        } => {
            let e = parse_profile(&common)?;
            let profile: Vec<KitchenMeasure> = match measures {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    serde_json::from_str(&text)?
                }
                None => {
                    use rand::SeedableRng;
                    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                    sampling::random_profile(&mut rng, e.agents(), 4)
                }
            };
            if profile.len() != e.agents() {
                bail!(
                    "profile has {} measures for {} agents",
                    profile.len(),
                    e.agents()
                );
            }
            let m = mediator_by_name(&mediator, &e, budget as usize, seed)
                .map_err(|err| anyhow!("{err}"))?;
            let t = run_division_game(m.as_ref(), &e, &profile, budget, seed)
                .map_err(|err| anyhow!("{err}"))?;
            summarize(&t);
            emit(&out, &t)?;
            Ok(t.verdict.exit_code())
        }
        Command::Duel {
            common,
            mediator,
            cstar,
            schedule,
            seed,
            budget,
            checked,
            permissive,
            out,
        } => {
            let e = parse_profile(&common)?;
            let mode: ScheduleMode = schedule.into();
            let options = AdversaryOptions {
                checked,
                budget: EnumerationBudget::default(),
            };
            let mut adversary = ScheduledAdversary::new(&e, mode, cstar, options)
                .map_err(|err| anyhow!("{err}"))?;
            eprintln!(
                "schedule ({mode}): {}",
                adversary
                    .schedule()
                    .iter()
                    .map(|l| l.to_string())
                    .collect::<Vec<_>>()
                    .join(", ")
            );
            let budget = budget.unwrap_or(cstar as u64 + 1);
            let m = mediator_by_name(&mediator, &e, cstar as usize, seed)
                .map_err(|err| anyhow!("{err}"))?;
            let info = AdversaryInfo {
                c_star: cstar,
                schedule_mode: mode,
                checked,
            };
            let t = run_adversary_game(
                m.as_ref(),
                &mut adversary,
                &e,
                budget,
                seed,
                permissive,
                Some(info),
            )
            .map_err(|err| anyhow!("{err}"))?;
            summarize(&t);
            let forced = t.verdict != Verdict::Accepted || t.cost > cstar as u64;
            eprintln!(
                "forcing: {} (payoff {} -c*)",
                if forced {
                    "mediator held past c*"
                } else {
                    "mediator beat c*"
                },
                if forced { "<" } else { ">=" }
            );
            emit(&out, &t)?;
            Ok(t.verdict.exit_code())
        }
        Command::Deficiency {
            record,
            e1,
            level,
            nodes,
        } => {
            let text = std::fs::read_to_string(&record)
                .with_context(|| format!("reading {}", record.display()))?;
            let record: PartitionRecord = serde_json::from_str(&text)?;
            let e1 = Scalar::from_str(&e1).map_err(|e| anyhow!("{e}"))?;
            let verdict = is_deficient(&record, &e1, level, EnumerationBudget(nodes))
                .map_err(|e| anyhow!("{e}"))?;
            match verdict {
                DeficiencyVerdict::Deficient => {
                    println!("{level}-deficient");
                    Ok(0)
                }
                DeficiencyVerdict::Counterexample(h) => {
                    println!(
                        "not {level}-deficient: r = {}, weights = {:?}",
                        h.replicas, h.weights
                    );
                    Ok(1)
                }
            }
        }
        Command::Validate {
            prev,
            query,
            candidate,
        } => {
            let prev: PartitionRecord = serde_json::from_str(
                &std::fs::read_to_string(&prev)
                    .with_context(|| format!("reading {}", prev.display()))?,
            )?;
            let q: Query = serde_json::from_str(
                &std::fs::read_to_string(&query)
                    .with_context(|| format!("reading {}", query.display()))?,
            )?;
            // The candidate may violate record invariants on purpose, so
            // read the raw document rather than a validated record.
            let doc: RecordDoc = serde_json::from_str(
                &std::fs::read_to_string(&candidate)
                    .with_context(|| format!("reading {}", candidate.display()))?,
            )?;
            let mut values = vec![Vec::new(); doc.values.len()];
            for (key, vals) in &doc.values {
                let idx = *key as usize;
                if idx == 0 || idx > values.len() {
                    bail!("agent keys must be 1..=n");
                }
                values[idx - 1] = vals.clone();
            }
            match validate_ultraresponse(&prev, &q, &doc.cells, &values) {
                UltraVerdict::Accept { cut } => {
                    println!("accept (cut parameter {cut})");
                    Ok(0)
                }
                UltraVerdict::Reject(violation) => {
                    println!("reject: {violation}");
                    Ok(1)
                }
            }
        }
        Command::Replay { transcript } => {
            let text = std::fs::read_to_string(&transcript)
                .with_context(|| format!("reading {}", transcript.display()))?;
            let parsed: Transcript = serde_json::from_str(&text)?;
            let again = rwcake::arena::replay(&parsed).map_err(|e| anyhow!("{e}"))?;
            println!("{}", serde_json::to_string_pretty(&again)?);
            eprintln!(
                "replay identical: cost {}, verdict {:?}",
                again.cost, again.verdict
            );
            Ok(again.verdict.exit_code())
        }
    }
}
