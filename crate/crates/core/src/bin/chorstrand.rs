use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use thiserror::Error;

use chorstrand::abs::{abs, check_theorem1, interactions_in_order, AbsError};
use chorstrand::chor::{check_static_assumptions, parse_choreography, Choreography};
use chorstrand::crypto::{
    deliver_once_report, enumerate_bundles, Bounds, Protocol, DEFAULT_MAX_STATES,
};
use chorstrand::faithful::{check_faithfulness, AbstractionMap, FaithfulError};
use chorstrand::lts::{format_trace, traces};
use chorstrand::strand::{bundle_to_dot, bundle_to_json};

// sysexits.h
const EX_USAGE: u8 = 64;
const EX_DATAERR: u8 = 65;
const EX_NOINPUT: u8 = 66;

#[derive(Parser)]
#[command(
    name = "chorstrand",
    version,
    about = "Choreographies and cryptoprotocols as strand-space bundles"
)]
struct Cli {
    /// Worker threads for the faithfulness check.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse a choreography and check its static assumptions.
    Check {
        file: PathBuf,
        /// Also check the step/unprefix correspondence up to this depth.
        #[arg(long, value_name = "DEPTH")]
        theorem1: Option<usize>,
        #[arg(long)]
        json: bool,
    },
    /// Print the interaction traces of a choreography.
    Lts {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Compute the abstract bundles of a choreography.
    Abs {
        file: PathBuf,
        /// Write one JSON file per bundle into DIR.
        #[arg(long, value_name = "DIR")]
        json: Option<PathBuf>,
        /// Write one DOT file per bundle into DIR.
        #[arg(long, value_name = "DIR")]
        dot: Option<PathBuf>,
    },
    /// Enumerate the bundles of a protocol within bounds.
    Enumerate {
        #[command(flatten)]
        search: Search,
        #[arg(long, value_name = "DIR")]
        json: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        dot: Option<PathBuf>,
    },
    /// Enumerate without the deliver-once requirement and report every
    /// family per bundle.
    DeliverOnce {
        #[command(flatten)]
        search: Search,
        #[arg(long)]
        json: bool,
    },
    /// Bounded faithfulness of a protocol to a choreography.
    Faithful {
        #[command(flatten)]
        search: Search,
        #[arg(long)]
        chor: PathBuf,
        #[arg(long)]
        amap: PathBuf,
        /// Write the JSON report here instead of stdout.
        #[arg(long, value_name = "FILE")]
        report: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Search {
    #[arg(long)]
    proto: PathBuf,
    #[arg(long, default_value_t = 1)]
    max_instances: usize,
    #[arg(long, default_value_t = 0)]
    adv_steps: usize,
    #[arg(long)]
    no_deliver_once: bool,
    #[arg(long, default_value_t = DEFAULT_MAX_STATES)]
    max_states: usize,
}

impl Search {
    fn bounds(&self) -> Result<Bounds, CliError> {
        if self.max_instances == 0 || self.max_states == 0 {
            return Err(CliError::Usage(
                "--max-instances and --max-states must be positive".into(),
            ));
        }
        let mut b =
            Bounds::new(self.max_instances, self.adv_steps).deliver_once(!self.no_deliver_once);
        b.max_states = self.max_states;
        Ok(b)
    }
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}: no such file")]
    Missing(PathBuf),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EX_USAGE,
            CliError::Parse { .. } => EX_DATAERR,
            CliError::Missing(_) => EX_NOINPUT,
            CliError::Io(_) => 74,
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CliError::Missing(path.to_path_buf()),
        _ => CliError::Io(e),
    })
}

fn parse_err(path: &Path, e: impl ToString) -> CliError {
    CliError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn load_chor(path: &Path) -> Result<Choreography, CliError> {
    parse_choreography(&read(path)?).map_err(|e| parse_err(path, e))
}

fn load_proto(path: &Path) -> Result<Protocol, CliError> {
    Protocol::parse(&read(path)?).map_err(|e| parse_err(path, e))
}

fn static_err(path: &Path, e: AbsError) -> CliError {
    parse_err(path, e)
}

fn print_json(v: &Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(v).expect("json values serialize")
    );
}

fn write_dir(dir: &Path, name: &str, body: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), body)?;
    Ok(())
}

fn run(cli: Cli) -> Result<u8, CliError> {
    if cli.jobs == 0 {
        return Err(CliError::Usage("--jobs must be positive".into()));
    }
    match cli.cmd {
        Cmd::Check {
            file,
            theorem1,
            json,
        } => {
            let c = load_chor(&file)?;
            let violations = check_static_assumptions(&c);
            let report = theorem1.map(|d| check_theorem1(&c, d));
            let ok = violations.is_empty() && report.as_ref().is_none_or(|r| r.holds());
            if json {
                print_json(&json!({
                    "schema": 1,
                    "ok": ok,
                    "violations": violations,
                    "theorem1": report,
                }));
            } else if violations.is_empty() {
                println!("OK: 3 assumptions hold");
                if let Some(r) = &report {
                    let state = if r.holds() { "holds" } else { "FAILS" };
                    println!(
                        "theorem 1 {state}: {} states, {} transitions, {} counterexamples",
                        r.states,
                        r.transitions,
                        r.counterexamples.len()
                    );
                    for ce in &r.counterexamples {
                        println!(
                            "  clause {} at {} via {}: {}",
                            ce.clause, ce.state, ce.label, ce.detail
                        );
                    }
                }
            } else {
                for v in &violations {
                    println!("violation: {v}");
                }
            }
            Ok(if ok { 0 } else { 1 })
        }
        Cmd::Lts { file, json } => {
            let c = load_chor(&file)?;
            let ts = traces(&c);
            if json {
                print_json(&json!({ "schema": 1, "traces": ts }));
            } else {
                for t in &ts {
                    println!("{}", format_trace(t));
                }
            }
            Ok(0)
        }
        Cmd::Abs { file, json, dot } => {
            let c = load_chor(&file)?;
            let envs = abs(&c).map_err(|e| static_err(&file, e))?;
            for (k, e) in envs.iter().enumerate() {
                let name = format!("bundle_{}", k + 1);
                if let Some(dir) = &json {
                    let body = serde_json::to_string_pretty(&bundle_to_json(&e.bundle))
                        .expect("json values serialize");
                    write_dir(dir, &format!("{name}.json"), &body)?;
                }
                if let Some(dir) = &dot {
                    write_dir(dir, &format!("{name}.dot"), &bundle_to_dot(&e.bundle))?;
                }
                let counts: Vec<String> = e
                    .roles()
                    .map(|r| format!("{r}={}", e.interaction_count(r)))
                    .collect();
                println!(
                    "{name}: {} | {}",
                    counts.join(" "),
                    format_trace(&interactions_in_order(&e.bundle))
                );
            }
            Ok(0)
        }
        Cmd::Enumerate { search, json, dot } => {
            let p = load_proto(&search.proto)?;
            let en = enumerate_bundles(&p, search.bounds()?);
            for (k, x) in en.bundles.iter().enumerate() {
                let name = format!("bundle_{}", k + 1);
                if let Some(dir) = &json {
                    let v = json!({
                        "schema": 1,
                        "adversary_steps": x.adversary_steps(),
                        "complete": x.complete.iter().map(|s| s.0.clone()).collect::<Vec<_>>(),
                        "bundle": bundle_to_json(&x.bundle),
                    });
                    write_dir(
                        dir,
                        &format!("{name}.json"),
                        &serde_json::to_string_pretty(&v).expect("json values serialize"),
                    )?;
                }
                if let Some(dir) = &dot {
                    write_dir(dir, &format!("{name}.dot"), &bundle_to_dot(&x.bundle))?;
                }
                let heights: Vec<String> = x
                    .heights()
                    .iter()
                    .map(|(r, h)| format!("{r}={h:?}"))
                    .collect();
                println!(
                    "{name}: {} nodes, {} adversary strands, {}",
                    x.bundle.node_count(),
                    x.adversary_steps(),
                    heights.join(" ")
                );
            }
            let s = &en.stats;
            println!(
                "{} bundles; {} states, {} terminal{}",
                en.bundles.len(),
                s.states,
                s.terminal_states,
                if s.truncated {
                    "; TRUNCATED at --max-states"
                } else {
                    ""
                }
            );
            Ok(if s.truncated { 2 } else { 0 })
        }
        Cmd::DeliverOnce { search, json } => {
            let p = load_proto(&search.proto)?;
            let families: Vec<String> = p
                .deliver_once_families
                .iter()
                .map(|f| f.fresh_value_name.clone())
                .collect();
            let en = enumerate_bundles(&p, search.bounds()?.deliver_once(false));
            let rows: Vec<_> = en
                .bundles
                .iter()
                .map(|x| deliver_once_report(&x.bundle, &families))
                .collect();
            let failing = rows.iter().filter(|r| r.iter().any(|f| !f.holds)).count();
            if json {
                print_json(&json!({
                    "schema": 1,
                    "families": families,
                    "truncated": en.stats.truncated,
                    "bundles": rows,
                }));
            } else {
                for (k, r) in rows.iter().enumerate() {
                    let shown: Vec<String> = r
                        .iter()
                        .map(|f| {
                            format!(
                                "{} {}/{} {}",
                                f.value,
                                f.receptions,
                                f.transmissions,
                                if f.holds { "ok" } else { "VIOLATED" }
                            )
                        })
                        .collect();
                    println!("bundle_{}: {}", k + 1, shown.join(", "));
                }
                println!("{failing} of {} bundles violate deliver-once", rows.len());
            }
            Ok(if failing > 0 {
                1
            } else if en.stats.truncated {
                2
            } else {
                0
            })
        }
        Cmd::Faithful {
            search,
            chor,
            amap,
            report,
        } => {
            let p = load_proto(&search.proto)?;
            let c = load_chor(&chor)?;
            let a = AbstractionMap::parse(&read(&amap)?, &p.symbols)
                .map_err(|e| parse_err(&amap, e))?;
            let r = check_faithfulness(&p, &c, &a, search.bounds()?, cli.jobs).map_err(
                |e| match e {
                    FaithfulError::Abs(e) => static_err(&chor, e),
                    FaithfulError::Pool(m) => CliError::Usage(m),
                },
            )?;
            let body = serde_json::to_string_pretty(&r).expect("report serializes");
            match &report {
                Some(path) => fs::write(path, body)?,
                None => println!("{body}"),
            }
            eprintln!(
                "clause 1: {}, clause 2: {}, verdict: {} ({} concrete, {} abstract bundles)",
                r.clause1.verdict,
                r.clause2.verdict,
                r.verdict,
                r.concrete_bundles,
                r.abstract_bundles
            );
            Ok(r.verdict.exit_code() as u8)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EX_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("chorstrand: {e}");
            ExitCode::from(e.code())
        }
    }
}
