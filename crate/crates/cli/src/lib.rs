//! Command-line front end: spec documents, reports, simulation records and
//! topology export.

pub mod document;
pub mod dot;
pub mod report;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use netident::identifiability::{analyze, AnalysisOptions, Verdict};
use netident::model::{instantiate, NetworkModel};
use netident::numeric::{RankOptions, DEFAULT_RADIUS, DEFAULT_RANK_TOL, DEFAULT_TRIALS};
use netident::poly::frac;
use netident::simulator::{
    gaussian_noise, simulate, simulate_with_burn_in, witness_family_s2, Noise, SignalRecord,
};
use netident::Rat;

pub use document::{parse_spec, to_json, SpecDocument};
pub use report::RunInfo;

pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NOT_IDENTIFIABLE: i32 = 3;
pub const EXIT_RUNTIME: i32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid document: {0}")]
    Invalid(String),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Analysis(#[from] netident::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Invalid(_) | CliError::Usage(_) => EXIT_INVALID,
            _ => EXIT_RUNTIME,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "netident",
    version,
    about = "Identifiability analysis of linear dynamic networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputKind {
    Zero,
    Impulse,
    Step,
    Noise,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide identifiability of the model set.
    Check {
        spec: PathBuf,
        /// Analyze at the model given by the theta block.
        #[arg(long, conflicts_with = "generic")]
        at_model: bool,
        /// Analyze over random instances of the structure.
        #[arg(long)]
        generic: bool,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
        rank_tol: f64,
        /// Also write the machine-readable report here.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Exit with status 3 when the set is not identifiable.
        #[arg(long)]
        strict: bool,
    },
    /// Simulate the model given by the theta block and write a CSV record.
    Simulate {
        spec: PathBuf,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = InputKind::Noise)]
        input: InputKind,
        #[arg(long)]
        no_noise: bool,
        #[arg(long, default_value_t = 0)]
        burn_in: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Simulate models with the same transfer function and compare outputs.
    Witness {
        spec: PathBuf,
        #[arg(long, default_value_t = 512)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Write the module graph in DOT format.
    ExportDot {
        spec: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

pub fn load_spec(path: &Path) -> Result<SpecDocument, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_spec(&text)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Io {
        path: PathBuf::from("<output>"),
        source: e,
    }
}

/// The model named by the theta block.
pub fn model_of(doc: &SpecDocument) -> Result<NetworkModel, CliError> {
    let theta = doc
        .theta
        .as_ref()
        .ok_or_else(|| CliError::Usage("the document has no theta block".into()))?;
    instantiate(&doc.structure, theta).map_err(|e| CliError::Invalid(e.to_string()))
}

pub struct CheckOutcome {
    pub text: String,
    pub json: serde_json::Value,
    pub overall: Verdict,
}

pub fn check(doc: &SpecDocument, at_model: bool, info: RunInfo) -> Result<CheckOutcome, CliError> {
    let model = if at_model { Some(model_of(doc)?) } else { None };
    let opts = AnalysisOptions {
        rank: RankOptions {
            tol: info.rank_tol,
            trials: info.trials,
            seed: info.seed,
            radius: DEFAULT_RADIUS,
        },
    };
    let rep = analyze(&doc.structure, model.as_ref(), &opts)?;
    Ok(CheckOutcome {
        text: report::report_text(&doc.structure, &rep, info),
        json: report::report_json(&doc.structure, &rep, info),
        overall: rep.overall,
    })
}

pub fn excitation(kind: InputKind, k: usize, n: usize, seed: u64) -> DMatrix<f64> {
    match kind {
        InputKind::Zero => DMatrix::zeros(k, n),
        InputKind::Impulse => DMatrix::from_fn(k, n, |_, t| if t == 0 { 1.0 } else { 0.0 }),
        InputKind::Step => DMatrix::from_element(k, n, 1.0),
        InputKind::Noise => gaussian_noise(&DMatrix::identity(k, k), n, seed.wrapping_add(1)),
    }
}

/// Header `t, r1..rK, e1..ep, w1..wL`, one row per sample.
pub fn write_csv<W: Write>(rec: &SignalRecord, out: W) -> Result<(), CliError> {
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=rec.r.nrows()).map(|i| format!("r{i}")));
    header.extend((1..=rec.e.nrows()).map(|i| format!("e{i}")));
    header.extend((1..=rec.w.nrows()).map(|i| format!("w{i}")));
    wtr.write_record(&header)?;
    for t in 0..rec.len() {
        let mut row = vec![t.to_string()];
        for m in [&rec.r, &rec.e, &rec.w] {
            row.extend(m.column(t).iter().map(|v| format!("{v:.16e}")));
        }
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(io_err)
}

pub struct WitnessMember {
    pub label: String,
    pub max_diff: f64,
}

/// Models sharing the transfer function of the given one: alternatives from
/// deficient rows, plus the two-module family when the structure has it.
pub fn witness_members(
    doc: &SpecDocument,
    samples: usize,
    seed: u64,
) -> Result<Vec<WitnessMember>, CliError> {
    let m = model_of(doc)?;
    let s = &doc.structure;
    let mut candidates: Vec<(String, NetworkModel)> = Vec::new();

    let rep = analyze(s, Some(&m), &AnalysisOptions::with_seed(seed))?;
    for w in &rep.witnesses {
        if let Some(alt) = &w.alternative {
            if alt.validation.is_valid() {
                candidates.push((format!("row {} alternative", w.row + 1), alt.model.clone()));
            }
        }
    }
    let family_shape = m.l() == 3
        && s.g().get(1, 0).is_param()
        && s.g().get(1, 2).is_param()
        && (0..3)
            .all(|i| (0..3).all(|j| matches!((i, j), (1, 2) | (2, 0)) || m.g[(i, j)].is_zero()));
    if family_shape {
        let b = m.g[(1, 2)].clone();
        let probes = [
            ("G23 = B".to_string(), b.clone()),
            ("G23 = 0".to_string(), Rat::zero()),
            ("G23 = B/2".to_string(), b.scale(&frac(1, 2))),
            ("G23 = -B/2".to_string(), b.scale(&frac(-1, 2))),
            ("G23 = 0.25/z".to_string(), Rat::delay(frac(1, 4), 1)),
        ];
        for (label, g23) in probes {
            if let Ok(alt) = witness_family_s2(&m, &g23) {
                candidates.push((label, alt));
            }
        }
        if let Ok(mut control) = witness_family_s2(&m, &b.scale(&frac(1, 2))) {
            control.g[(1, 0)] = &control.g[(1, 0)] + &Rat::delay(frac(1, 1000), 1);
            candidates.push(("control: G21 + 0.001/z (not a member)".to_string(), control));
        }
    }

    let r = excitation(InputKind::Noise, m.k(), samples, seed);
    let e = gaussian_noise(&m.lambda, samples, seed.wrapping_add(2));
    let base = simulate(&m, &r, &Noise::Record(e.clone()))?;
    candidates
        .into_iter()
        .map(|(label, alt)| {
            let out = simulate(&alt, &r, &Noise::Record(e.clone()))?;
            Ok(WitnessMember {
                label,
                max_diff: (&out.w - &base.w).amax(),
            })
        })
        .collect()
}

/// Runs one command; returns the exit status.
pub fn run<W: Write>(cli: Cli, out: &mut W) -> Result<i32, CliError> {
    match cli.command {
        Command::Check {
            spec,
            at_model,
            generic,
            trials,
            seed,
            rank_tol,
            json,
            strict,
        } => {
            let doc = load_spec(&spec)?;
            if at_model && doc.theta.is_none() {
                return Err(CliError::Usage(
                    "--at-model needs a theta block in the document".into(),
                ));
            }
            let at_model = at_model || (!generic && doc.theta.is_some());
            let info = RunInfo {
                seed,
                trials,
                rank_tol,
            };
            let outcome = check(&doc, at_model, info)?;
            write!(out, "{}", outcome.text).map_err(io_err)?;
            if let Some(path) = json {
                let mut text =
                    serde_json::to_string_pretty(&outcome.json).expect("report serializes");
                text.push('\n');
                write_file(&path, &text)?;
            }
            Ok(if strict && outcome.overall == Verdict::NotIdentifiable {
                EXIT_NOT_IDENTIFIABLE
            } else {
                0
            })
        }
        Command::Simulate {
            spec,
            samples,
            seed,
            input,
            no_noise,
            burn_in,
            output,
        } => {
            let doc = load_spec(&spec)?;
            let m = model_of(&doc)?;
            let r = excitation(input, m.k(), samples, seed);
            let noise = if no_noise {
                Noise::Zero
            } else {
                Noise::Seeded(seed)
            };
            let rec = if burn_in > 0 {
                simulate_with_burn_in(&m, &r, &noise, burn_in)?
            } else {
                simulate(&m, &r, &noise)?
            };
            match output {
                Some(path) => {
                    let f = std::fs::File::create(&path)
                        .map_err(|source| CliError::Io { path, source })?;
                    write_csv(&rec, f)?;
                }
                None => write_csv(&rec, &mut *out)?,
            }
            Ok(0)
        }
        Command::Witness {
            spec,
            samples,
            seed,
            tol,
        } => {
            let doc = load_spec(&spec)?;
            let members = witness_members(&doc, samples, seed)?;
            if members.is_empty() {
                writeln!(
                    out,
                    "no witness: no alternative model with the same transfer function was found"
                )
                .map_err(io_err)?;
            }
            for w in &members {
                let verdict = if w.max_diff <= tol {
                    "SAME OUTPUT"
                } else {
                    "DIFFERENT OUTPUT"
                };
                writeln!(
                    out,
                    "{:<44} max |dw| = {:.3e}  {verdict}",
                    w.label, w.max_diff
                )
                .map_err(io_err)?;
            }
            Ok(0)
        }
        Command::ExportDot { spec, output } => {
            let doc = load_spec(&spec)?;
            let text = dot::export_dot(&doc.structure);
            match output {
                Some(path) => write_file(&path, &text)?,
                None => write!(out, "{text}").map_err(io_err)?,
            }
            Ok(0)
        }
    }
}
