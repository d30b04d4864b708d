//! Command-line driver for dataset generation, fingerprinting, attacks,
//! mitigation, grid experiments and reporting.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use genofp::attack::{col_correlation_attack, random_flip_attack, row_correlation_attack, AttackBudget};
use genofp::io;
use genofp::keyed::SecretKey;
use genofp::metrics::{accuracy, pvalues};
use genofp::mitigate::{mitigate_col, mitigate_row};
use genofp::pipeline::{
    attack_label, build_reports, load_records, save_records, AttackSpec, Dataset,
    ExperimentConfig, Scheme,
};
use genofp::scheme::{detect_traitor, extract_fingerprint, insert_fingerprint, ExtractionParams, InsertionParams};
use genofp::synth::{generate, GeneratorConfig};
use genofp::transport::SinkhornParams;

#[derive(Parser)]
#[command(name = "genofp", version, about = "Robust fingerprinting of SNP databases")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic trio dataset with its public correlation models
    Gen(GenArgs),
    /// Embed a service provider's fingerprint into a database copy
    Insert(InsertArgs),
    /// Recover a fingerprint from a (possibly pirated) database
    Extract(ExtractArgs),
    /// Run attacks against a fingerprinted database
    Attack(AttackArgs),
    /// Apply the row- and column-wise mitigations after insertion
    Mitigate(MitigateArgs),
    /// Sweep a density grid end to end and record one row per point
    Run(RunArgs),
    /// Summarize experiment CSVs into report tables
    Report(ReportArgs),
    /// Rank registered service providers against an extracted fingerprint
    Detect(DetectArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Output directory for db.csv, pedigree.csv, similarity.csv, joint.csv, split.csv
    #[arg(long, default_value = "dataset")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 150)]
    families: usize,
    /// Total rows including unrelated individuals (must be >= 3 * families)
    #[arg(long, default_value_t = 1500)]
    rows: usize,
    #[arg(long, default_value_t = 156)]
    loci: usize,
    #[arg(long, default_value_t = 0.1)]
    maf_low: f64,
    #[arg(long, default_value_t = 0.4)]
    maf_high: f64,
    #[arg(long, default_value_t = 0.5)]
    ld_rho: f64,
    #[arg(long, default_value_t = 0.0)]
    mutation_rate: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args)]
struct KeyedArgs {
    #[arg(long)]
    key: String,
    #[arg(long, default_value_t = 0.05)]
    gamma_r: f64,
    #[arg(long, default_value_t = 0.05)]
    gamma_l: f64,
}

#[derive(Args)]
struct InsertArgs {
    #[arg(long)]
    db: PathBuf,
    #[command(flatten)]
    keyed: KeyedArgs,
    #[arg(long)]
    sp_id: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    mask_out: Option<PathBuf>,
    /// Append `sp_id,fingerprint_hex` to this registry file
    #[arg(long)]
    registry: Option<PathBuf>,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    db: PathBuf,
    #[command(flatten)]
    keyed: KeyedArgs,
    #[arg(long, default_value_t = 0.7)]
    tau: f64,
    /// Write per-position vote counts to this CSV
    #[arg(long)]
    votes_out: Option<PathBuf>,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long)]
    db: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Ordered stages, e.g. --attacks row:0.01 col:0.05  or flip:0.15
    #[arg(long, num_args = 1.., required = true)]
    attacks: Vec<String>,
    #[arg(long)]
    pedigree: Option<PathBuf>,
    #[arg(long)]
    similarity: Option<PathBuf>,
    #[arg(long)]
    joint: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    epsilon_s: f64,
    /// Column-attack excess threshold; default is one row (1/M)
    #[arg(long)]
    epsilon_j: Option<f64>,
}

#[derive(Args)]
struct MitigateArgs {
    #[arg(long)]
    db: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    pedigree: PathBuf,
    #[arg(long)]
    similarity: PathBuf,
    #[arg(long)]
    joint: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0)]
    transport_seed: u64,
    /// Run only one of the phases
    #[arg(long, value_parser = ["row", "col", "both"], default_value = "both")]
    phase: String,
}

#[derive(Args)]
struct RunArgs {
    /// Directory produced by `gen` (db.csv, pedigree.csv, ...)
    #[arg(long)]
    data_dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated row densities
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.05, 0.06, 0.07, 0.08, 0.09, 0.1])]
    gamma_r: Vec<f64>,
    /// Comma-separated column densities
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.05, 0.06, 0.07, 0.08, 0.09, 0.1])]
    gamma_l: Vec<f64>,
    #[arg(long, default_value = "vanilla")]
    scheme: Scheme,
    /// Ordered attack stages; empty means no attack
    #[arg(long, num_args = 0..)]
    attacks: Vec<String>,
    #[arg(long)]
    key: String,
    #[arg(long, default_value_t = 0)]
    sp_id: u64,
    #[arg(long, default_value_t = 0.7)]
    tau: f64,
    #[arg(long, default_value_t = 5.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    epsilon_s: f64,
    #[arg(long)]
    epsilon_j: Option<f64>,
    #[arg(long, default_value_t = 1)]
    attack_seed: u64,
    #[arg(long, default_value_t = 2)]
    transport_seed: u64,
    #[arg(long, default_value_t = 50)]
    top_k: usize,
    /// Persist per-point attacked databases under this directory
    #[arg(long)]
    save_intermediate: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// One or more experiment CSVs
    #[arg(long, num_args = 1.., required = true)]
    experiments: Vec<PathBuf>,
    #[arg(long, default_value = "report")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    db: PathBuf,
    #[command(flatten)]
    keyed: KeyedArgs,
    #[arg(long, default_value_t = 0.7)]
    tau: f64,
    #[arg(long)]
    registry: PathBuf,
}

fn parse_attacks(specs: &[String]) -> Result<Vec<AttackSpec>, String> {
    specs.iter().map(|s| s.parse()).collect()
}

fn secret_key(key: &str) -> Result<SecretKey, String> {
    SecretKey::new(key.as_bytes().to_vec()).ok_or_else(|| "key must not be empty".to_string())
}

fn run(cli: Cli) -> Result<(), (u8, String)> {
    let usage = |m: String| (1u8, m);
    let data = |m: String| (2u8, m);
    match cli.command {
        Command::Gen(args) => {
            if args.families == 0 {
                return Err(usage("--families must be at least 1".into()));
            }
            if args.rows < 3 * args.families {
                return Err(usage(format!(
                    "--rows {} is below 3 * families = {}",
                    args.rows,
                    3 * args.families
                )));
            }
            let config = GeneratorConfig {
                n_families: args.families,
                total_rows: Some(args.rows),
                n_loci: args.loci,
                maf_range: (args.maf_low, args.maf_high),
                ld_rho: args.ld_rho,
                mutation_rate: args.mutation_rate,
                seed: args.seed,
            };
            let dataset: Dataset = generate(&config).map_err(|e| usage(e.to_string()))?.into();
            dataset.save(&args.out_dir).map_err(|e| data(e.to_string()))?;
            let echo = format!(
                "families={}\nrows={}\nloci={}\nmaf_low={}\nmaf_high={}\nld_rho={}\nmutation_rate={}\nseed={}\n",
                args.families,
                args.rows,
                args.loci,
                args.maf_low,
                args.maf_high,
                args.ld_rho,
                args.mutation_rate,
                args.seed
            );
            std::fs::write(args.out_dir.join("config.txt"), echo)
                .map_err(|e| data(e.to_string()))?;
            println!(
                "generated {} rows x {} loci ({} families) in {}",
                dataset.database.rows(),
                dataset.database.loci_count(),
                args.families,
                args.out_dir.display()
            );
            Ok(())
        }
        Command::Insert(args) => {
            let db = io::load_database(&args.db).map_err(|e| data(e.to_string()))?;
            let params = InsertionParams {
                gamma_r: args.keyed.gamma_r,
                gamma_l: args.keyed.gamma_l,
                key: secret_key(&args.keyed.key).map_err(usage)?,
                sp_id: args.sp_id,
            };
            let (marked, mask, fingerprint) =
                insert_fingerprint(&db, &params).map_err(|e| usage(e.to_string()))?;
            io::save_database(&marked, &args.out).map_err(|e| data(e.to_string()))?;
            if let Some(mask_path) = &args.mask_out {
                io::save_mask(&mask, &db, mask_path).map_err(|e| data(e.to_string()))?;
            }
            if let Some(registry) = &args.registry {
                let mut entries = if registry.exists() {
                    io::load_registry(registry).map_err(|e| data(e.to_string()))?
                } else {
                    Vec::new()
                };
                entries.retain(|(id, _)| *id != args.sp_id);
                entries.push((args.sp_id, fingerprint.clone()));
                io::save_registry(&entries, registry).map_err(|e| data(e.to_string()))?;
            }
            println!(
                "inserted fingerprint {} for sp {} ({} marked cells)",
                fingerprint.to_hex(),
                args.sp_id,
                mask.marked_count()
            );
            Ok(())
        }
        Command::Extract(args) => {
            let db = io::load_database(&args.db).map_err(|e| data(e.to_string()))?;
            let params = ExtractionParams {
                gamma_r: args.keyed.gamma_r,
                gamma_l: args.keyed.gamma_l,
                key: secret_key(&args.keyed.key).map_err(usage)?,
                tau: args.tau,
            };
            let extracted = extract_fingerprint(&db, &params).map_err(|e| usage(e.to_string()))?;
            println!("{}", extracted.to_pattern());
            println!("undetermined={}", extracted.undetermined_count());
            if let Some(path) = &args.votes_out {
                use std::io::Write;
                let mut w = std::io::BufWriter::new(
                    std::fs::File::create(path).map_err(|e| data(e.to_string()))?,
                );
                writeln!(w, "position,c0,c1,bit").map_err(|e| data(e.to_string()))?;
                for l in 0..extracted.len() {
                    let (c0, c1) = extracted.votes(l);
                    let bit = match extracted.bit(l) {
                        genofp::ExtractedBit::Zero => "0",
                        genofp::ExtractedBit::One => "1",
                        genofp::ExtractedBit::Undetermined => "?",
                    };
                    writeln!(w, "{l},{c0},{c1},{bit}").map_err(|e| data(e.to_string()))?;
                }
            }
            Ok(())
        }
        Command::Attack(args) => {
            let db = io::load_database(&args.db).map_err(|e| data(e.to_string()))?;
            let attacks = parse_attacks(&args.attacks).map_err(usage)?;
            let needs_row = attacks.iter().any(|a| a.kind == genofp::pipeline::AttackKind::Row);
            let needs_col = attacks.iter().any(|a| a.kind == genofp::pipeline::AttackKind::Col);
            let pedigree = match (&args.pedigree, needs_row) {
                (Some(p), _) => Some(io::load_pedigree(p).map_err(|e| data(e.to_string()))?),
                (None, true) => return Err(usage("row attack needs --pedigree".into())),
                _ => None,
            };
            let similarity = match (&args.similarity, needs_row) {
                (Some(p), _) => Some(io::load_similarity(p).map_err(|e| data(e.to_string()))?),
                (None, true) => return Err(usage("row attack needs --similarity".into())),
                _ => None,
            };
            let joint = match (&args.joint, needs_col) {
                (Some(p), _) => Some(io::load_joint(p).map_err(|e| data(e.to_string()))?),
                (None, true) => return Err(usage("col attack needs --joint".into())),
                _ => None,
            };
            let mut attacked = db.clone();
            for (stage, spec) in attacks.iter().enumerate() {
                let budget = AttackBudget::new(spec.budget, args.seed.wrapping_add(stage as u64))
                    .map_err(|e| usage(e.to_string()))?;
                let (next, report) = match spec.kind {
                    genofp::pipeline::AttackKind::Flip => {
                        random_flip_attack(&attacked, &budget).map_err(|e| data(e.to_string()))?
                    }
                    genofp::pipeline::AttackKind::Row => row_correlation_attack(
                        &attacked,
                        pedigree.as_ref().unwrap(),
                        similarity.as_ref().unwrap(),
                        &budget,
                        args.epsilon_s,
                    )
                    .map_err(|e| data(e.to_string()))?,
                    genofp::pipeline::AttackKind::Col => {
                        let epsilon = args.epsilon_j.unwrap_or(1.0 / db.rows().max(1) as f64);
                        col_correlation_attack(
                            &attacked,
                            joint.as_ref().unwrap(),
                            &budget,
                            epsilon,
                        )
                        .map_err(|e| data(e.to_string()))?
                    }
                };
                println!(
                    "{}: changed {} cells (per_chg {:.5}, {} loci, {} unbudgeted)",
                    spec.kind.label(),
                    report.changed_cells,
                    report.per_chg,
                    report.loci_touched,
                    report.unbudgeted_changes
                );
                attacked = next;
            }
            let total = 1.0 - accuracy(&db, &attacked).map_err(|e| data(e.to_string()))?;
            println!("total per_chg {total:.5} for {}", attack_label(&attacks));
            io::save_database(&attacked, &args.out).map_err(|e| data(e.to_string()))
        }
        Command::Mitigate(args) => {
            let db = io::load_database(&args.db).map_err(|e| data(e.to_string()))?;
            let mask = io::load_mask(&db, &args.mask).map_err(|e| data(e.to_string()))?;
            let pedigree = io::load_pedigree(&args.pedigree).map_err(|e| data(e.to_string()))?;
            let similarity = io::load_similarity(&args.similarity).map_err(|e| data(e.to_string()))?;
            let joint = io::load_joint(&args.joint).map_err(|e| data(e.to_string()))?;
            let mut out = db.clone();
            if args.phase == "row" || args.phase == "both" {
                let (next, report) = mitigate_row(&out, &mask, &pedigree, &similarity)
                    .map_err(|e| data(e.to_string()))?;
                println!(
                    "row mitigation: {} cells changed, {} residual violations",
                    report.cells_changed_row_phase, report.residual_mendel_violations
                );
                out = next;
            }
            if args.phase == "col" || args.phase == "both" {
                let (next, report) = mitigate_col(
                    &out,
                    &mask,
                    &joint,
                    &SinkhornParams::with_lambda(args.lambda),
                    args.transport_seed,
                )
                .map_err(|e| data(e.to_string()))?;
                println!(
                    "col mitigation: {} cells changed, {} shortfall rows",
                    report.cells_changed_col_phase, report.shortfall_rows
                );
                out = next;
            }
            let additional = 1.0 - accuracy(&db, &out).map_err(|e| data(e.to_string()))?;
            println!("additional change {additional:.5}");
            io::save_database(&out, &args.out).map_err(|e| data(e.to_string()))
        }
        Command::Run(args) => {
            let dataset = Dataset::load(&args.data_dir).map_err(|e| data(e.to_string()))?;
            let config = ExperimentConfig {
                gamma_r_grid: args.gamma_r.clone(),
                gamma_l_grid: args.gamma_l.clone(),
                scheme: args.scheme,
                attacks: parse_attacks(&args.attacks).map_err(usage)?,
                key: secret_key(&args.key).map_err(usage)?,
                sp_id: args.sp_id,
                tau: args.tau,
                lambda: args.lambda,
                epsilon_s: args.epsilon_s,
                epsilon_j: args.epsilon_j,
                attack_seed: args.attack_seed,
                transport_seed: args.transport_seed,
                top_k: args.top_k,
            };
            config.validate().map_err(|e| usage(e.to_string()))?;
            let reference =
                pvalues(&dataset.database, &dataset.split).map_err(|e| data(e.to_string()))?;
            let mut records = Vec::new();
            for &gr in &config.gamma_r_grid {
                for &gl in &config.gamma_l_grid {
                    let outcome =
                        genofp::pipeline::run_grid_point(&dataset, &config, &reference, gr, gl)
                            .map_err(|e| data(e.to_string()))?;
                    if let Some(dir) = &args.save_intermediate {
                        std::fs::create_dir_all(dir).map_err(|e| data(e.to_string()))?;
                        let name = format!("attacked_{gr}_{gl}.csv");
                        io::save_database(&outcome.attacked, &dir.join(name))
                            .map_err(|e| data(e.to_string()))?;
                    }
                    println!(
                        "gamma_r={gr} gamma_l={gl}: per_cmp={:.4} per_chg_attack={:.4}",
                        outcome.record.per_cmp, outcome.record.per_chg_attack
                    );
                    records.push(outcome.record);
                }
            }
            save_records(&records, &args.out).map_err(|e| data(e.to_string()))?;
            println!("wrote {} records to {}", records.len(), args.out.display());
            Ok(())
        }
        Command::Report(args) => {
            let mut records = Vec::new();
            for path in &args.experiments {
                records.extend(load_records(path).map_err(|e| data(e.to_string()))?);
            }
            let tables = build_reports(&records);
            std::fs::create_dir_all(&args.out_dir).map_err(|e| data(e.to_string()))?;
            std::fs::write(args.out_dir.join("consistency_table.csv"), tables.consistency)
                .map_err(|e| data(e.to_string()))?;
            std::fs::write(args.out_dir.join("mitigation_table.csv"), tables.mitigation)
                .map_err(|e| data(e.to_string()))?;
            std::fs::write(args.out_dir.join("scatter.csv"), tables.scatter)
                .map_err(|e| data(e.to_string()))?;
            println!(
                "wrote report tables for {} records to {}",
                records.len(),
                args.out_dir.display()
            );
            Ok(())
        }
        Command::Detect(args) => {
            let db = io::load_database(&args.db).map_err(|e| data(e.to_string()))?;
            let registry = io::load_registry(&args.registry).map_err(|e| data(e.to_string()))?;
            let params = ExtractionParams {
                gamma_r: args.keyed.gamma_r,
                gamma_l: args.keyed.gamma_l,
                key: secret_key(&args.keyed.key).map_err(usage)?,
                tau: args.tau,
            };
            let ranking = detect_traitor(&db, &params, &registry).map_err(|e| usage(e.to_string()))?;
            println!("sp_id,matched_bits");
            for (sp_id, matched) in ranking {
                println!("{sp_id},{matched}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap already distinguishes help/version from true usage errors
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}
