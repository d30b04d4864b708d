//! Experiment harness: wires insertion, mitigation, attacks and metrics
//! into reproducible grid sweeps and report tables.

use std::path::Path;
use std::time::Instant;

use thiserror::Error;

use crate::attack::{
    col_correlation_attack, random_flip_attack, row_correlation_attack, AttackBudget, AttackError,
};
use crate::io::DataError;
use crate::keyed::SecretKey;
use crate::metrics::{
    accuracy, per_cmp, pvalues, topk_consistency, CaseControlSplit, MetricsError, PValueTable,
};
use crate::mitigate::{mitigate_col, mitigate_row, MitigationError};
use crate::scheme::{
    extract_fingerprint, insert_fingerprint, ExtractionParams, InsertionParams, SchemeError,
};
use crate::snp::{JointModel, Pedigree, SimilarityModel, SnpDatabase};
use crate::synth::{descend, SynthError, SyntheticData};
use crate::transport::SinkhornParams;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] crate::snp::ModelError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error(transparent)]
    Mitigation(#[from] MitigationError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Vanilla,
    Robust,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::Vanilla => "vanilla",
            Scheme::Robust => "robust",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vanilla" => Ok(Scheme::Vanilla),
            "robust" => Ok(Scheme::Robust),
            other => Err(format!("unknown scheme {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackKind {
    Flip,
    Row,
    Col,
}

impl AttackKind {
    pub fn label(self) -> &'static str {
        match self {
            AttackKind::Flip => "flip",
            AttackKind::Row => "row",
            AttackKind::Col => "col",
        }
    }
}

/// One attack stage with its change budget (fraction of all cells).
#[derive(Debug, Clone, Copy)]
pub struct AttackSpec {
    pub kind: AttackKind,
    pub budget: f64,
}

impl std::str::FromStr for AttackSpec {
    type Err = String;

    /// Parses `kind:budget`, e.g. `flip:0.15` or `col:0.05`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, budget) = s
            .split_once(':')
            .ok_or_else(|| format!("expected kind:budget, got {s:?}"))?;
        let kind = match kind {
            "flip" => AttackKind::Flip,
            "row" => AttackKind::Row,
            "col" => AttackKind::Col,
            other => return Err(format!("unknown attack {other:?}")),
        };
        let budget: f64 = budget
            .parse()
            .map_err(|_| format!("invalid budget in {s:?}"))?;
        if !(0.0..=1.0).contains(&budget) {
            return Err(format!("budget {budget} outside [0, 1]"));
        }
        Ok(AttackSpec { kind, budget })
    }
}

pub fn attack_label(attacks: &[AttackSpec]) -> String {
    if attacks.is_empty() {
        return "none".to_string();
    }
    attacks
        .iter()
        .map(|a| format!("{}({})", a.kind.label(), a.budget))
        .collect::<Vec<_>>()
        .join("+")
}

/// The input bundle every experiment runs against.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub database: SnpDatabase,
    pub pedigree: Pedigree,
    pub similarity: SimilarityModel,
    pub joint: JointModel,
    pub split: CaseControlSplit,
}

impl From<SyntheticData> for Dataset {
    fn from(data: SyntheticData) -> Self {
        Dataset {
            database: data.database,
            pedigree: data.pedigree,
            similarity: data.similarity,
            joint: data.joint,
            split: data.split,
        }
    }
}

impl Dataset {
    pub fn load(dir: &Path) -> Result<Self, PipelineError> {
        Ok(Dataset {
            database: crate::io::load_database(&dir.join("db.csv"))?,
            pedigree: crate::io::load_pedigree(&dir.join("pedigree.csv"))?,
            similarity: crate::io::load_similarity(&dir.join("similarity.csv"))?,
            joint: crate::io::load_joint(&dir.join("joint.csv"))?,
            split: crate::io::load_split(&dir.join("split.csv"))?,
        })
    }

    pub fn save(&self, dir: &Path) -> Result<(), PipelineError> {
        std::fs::create_dir_all(dir).map_err(|e| {
            PipelineError::Invalid(format!("cannot create {}: {e}", dir.display()))
        })?;
        crate::io::save_database(&self.database, &dir.join("db.csv"))?;
        crate::io::save_pedigree(&self.pedigree, &dir.join("pedigree.csv"))?;
        crate::io::save_similarity(&self.similarity, &dir.join("similarity.csv"))?;
        crate::io::save_joint(&self.joint, &dir.join("joint.csv"))?;
        crate::io::save_split(&self.split, &dir.join("split.csv"))?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub gamma_r_grid: Vec<f64>,
    pub gamma_l_grid: Vec<f64>,
    pub scheme: Scheme,
    pub attacks: Vec<AttackSpec>,
    pub key: SecretKey,
    pub sp_id: u64,
    pub tau: f64,
    pub lambda: f64,
    /// Row-attack similarity tolerance (0 attacks until the budget runs out).
    pub epsilon_s: f64,
    /// Column-attack excess threshold as a probability (default one row).
    pub epsilon_j: Option<f64>,
    pub attack_seed: u64,
    pub transport_seed: u64,
    pub top_k: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.gamma_r_grid.is_empty() || self.gamma_l_grid.is_empty() {
            return Err(PipelineError::Invalid("empty density grid".into()));
        }
        Ok(())
    }
}

/// One grid-point outcome, in experiment CSV column order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub gamma_r: f64,
    pub gamma_l: f64,
    pub scheme: String,
    pub attack_label: String,
    pub per_chg_attack: f64,
    pub per_chg_mitigation: f64,
    pub per_cmp: f64,
    pub accuracy: f64,
    pub pvalue_consistency: f64,
    pub wall_time_seconds: f64,
}

pub const EXPERIMENT_HEADER: &str = "gamma_r,gamma_l,scheme,attack_label,per_chg_attack,per_chg_mitigation,per_cmp,accuracy,pvalue_consistency,wall_time_seconds";

/// Full artifacts of a single grid point, for stage-isolation checks.
pub struct GridPointOutcome {
    pub record: ExperimentRecord,
    pub fingerprinted: SnpDatabase,
    pub protected: SnpDatabase,
    pub attacked: SnpDatabase,
}

fn stage_seed(base: u64, gamma_r: f64, gamma_l: f64, stage: u64) -> u64 {
    // stable per-point derivation from the named seed
    let gr = (gamma_r * 1e6).round() as u64;
    let gl = (gamma_l * 1e6).round() as u64;
    base ^ gr.wrapping_mul(0x9e3779b97f4a7c15)
        ^ gl.wrapping_mul(0xc2b2ae3d27d4eb4f)
        ^ stage.wrapping_mul(0x165667b19e3779f9)
}

pub fn run_grid_point(
    dataset: &Dataset,
    config: &ExperimentConfig,
    reference_pvalues: &PValueTable,
    gamma_r: f64,
    gamma_l: f64,
) -> Result<GridPointOutcome, PipelineError> {
    let start = Instant::now();
    let (fingerprinted, mask, fingerprint) = insert_fingerprint(
        &dataset.database,
        &InsertionParams {
            gamma_r,
            gamma_l,
            key: config.key.clone(),
            sp_id: config.sp_id,
        },
    )?;

    let (protected, per_chg_mitigation) = match config.scheme {
        Scheme::Vanilla => (fingerprinted.clone(), 0.0),
        Scheme::Robust => {
            let (after_row, _) = mitigate_row(
                &fingerprinted,
                &mask,
                &dataset.pedigree,
                &dataset.similarity,
            )?;
            let (after_col, _) = mitigate_col(
                &after_row,
                &mask,
                &dataset.joint,
                &SinkhornParams::with_lambda(config.lambda),
                stage_seed(config.transport_seed, gamma_r, gamma_l, 0),
            )?;
            let changed = 1.0 - accuracy(&fingerprinted, &after_col)?;
            (after_col, changed)
        }
    };

    let mut attacked = protected.clone();
    for (stage, spec) in config.attacks.iter().enumerate() {
        let budget = AttackBudget::new(
            spec.budget,
            stage_seed(config.attack_seed, gamma_r, gamma_l, 1 + stage as u64),
        )?;
        attacked = match spec.kind {
            AttackKind::Flip => random_flip_attack(&attacked, &budget)?.0,
            AttackKind::Row => {
                row_correlation_attack(
                    &attacked,
                    &dataset.pedigree,
                    &dataset.similarity,
                    &budget,
                    config.epsilon_s,
                )?
                .0
            }
            AttackKind::Col => {
                let epsilon_j = config
                    .epsilon_j
                    .unwrap_or(1.0 / dataset.database.rows().max(1) as f64);
                col_correlation_attack(&attacked, &dataset.joint, &budget, epsilon_j)?.0
            }
        };
    }

    let extracted = extract_fingerprint(
        &attacked,
        &ExtractionParams {
            gamma_r,
            gamma_l,
            key: config.key.clone(),
            tau: config.tau,
        },
    )?;

    let candidate_pvalues = pvalues(&attacked, &dataset.split)?;
    let record = ExperimentRecord {
        gamma_r,
        gamma_l,
        scheme: config.scheme.label().to_string(),
        attack_label: attack_label(&config.attacks),
        per_chg_attack: 1.0 - accuracy(&protected, &attacked)?,
        per_chg_mitigation,
        per_cmp: per_cmp(&fingerprint, &extracted)?,
        accuracy: accuracy(&dataset.database, &attacked)?,
        pvalue_consistency: topk_consistency(
            reference_pvalues,
            &candidate_pvalues,
            config.top_k.min(dataset.database.loci_count()),
        )?,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(GridPointOutcome {
        record,
        fingerprinted,
        protected,
        attacked,
    })
}

/// Runs every grid point in deterministic grid order.
pub fn run_experiment(
    dataset: &Dataset,
    config: &ExperimentConfig,
) -> Result<Vec<ExperimentRecord>, PipelineError> {
    config.validate()?;
    let reference = pvalues(&dataset.database, &dataset.split)?;
    let mut records = Vec::new();
    for &gamma_r in &config.gamma_r_grid {
        for &gamma_l in &config.gamma_l_grid {
            let outcome = run_grid_point(dataset, config, &reference, gamma_r, gamma_l)?;
            records.push(outcome.record);
        }
    }
    Ok(records)
}

pub fn save_records(records: &[ExperimentRecord], path: &Path) -> Result<(), PipelineError> {
    use std::io::Write;
    let file = std::fs::File::create(path)
        .map_err(|e| PipelineError::Invalid(format!("cannot create {}: {e}", path.display())))?;
    let mut w = std::io::BufWriter::new(file);
    let write = |w: &mut std::io::BufWriter<std::fs::File>, s: String| {
        w.write_all(s.as_bytes())
            .map_err(|e| PipelineError::Invalid(format!("write {}: {e}", path.display())))
    };
    write(&mut w, format!("{EXPERIMENT_HEADER}\n"))?;
    for r in records {
        write(
            &mut w,
            format!(
                "{},{},{},{},{},{},{},{},{},{:.3}\n",
                r.gamma_r,
                r.gamma_l,
                r.scheme,
                r.attack_label,
                r.per_chg_attack,
                r.per_chg_mitigation,
                r.per_cmp,
                r.accuracy,
                r.pvalue_consistency,
                r.wall_time_seconds
            ),
        )?;
    }
    w.flush()
        .map_err(|e| PipelineError::Invalid(format!("flush {}: {e}", path.display())))
}

pub fn load_records(path: &Path) -> Result<Vec<ExperimentRecord>, PipelineError> {
    let file = std::fs::File::open(path)
        .map_err(|e| PipelineError::Invalid(format!("cannot open {}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let mut records = Vec::new();
    for result in rdr.records() {
        let rec = result.map_err(DataError::from)?;
        if rec.len() != 10 {
            return Err(PipelineError::Invalid(format!(
                "{}: expected 10 fields, got {}",
                path.display(),
                rec.len()
            )));
        }
        let f = |i: usize| -> Result<f64, PipelineError> {
            rec[i]
                .parse()
                .map_err(|_| PipelineError::Invalid(format!("bad number {:?}", &rec[i])))
        };
        records.push(ExperimentRecord {
            gamma_r: f(0)?,
            gamma_l: f(1)?,
            scheme: rec[2].to_string(),
            attack_label: rec[3].to_string(),
            per_chg_attack: f(4)?,
            per_chg_mitigation: f(5)?,
            per_cmp: f(6)?,
            accuracy: f(7)?,
            pvalue_consistency: f(8)?,
            wall_time_seconds: f(9)?,
        });
    }
    Ok(records)
}

/// Report artifacts: a consistency pivot, a mitigation-change pivot, and a
/// scatter file with the 0.5 success boundary classified per record.
pub struct ReportTables {
    pub consistency: String,
    pub mitigation: String,
    pub scatter: String,
}

pub fn build_reports(records: &[ExperimentRecord]) -> ReportTables {
    let mut gammas: Vec<f64> = records
        .iter()
        .filter(|r| (r.gamma_r - r.gamma_l).abs() < 1e-12)
        .map(|r| r.gamma_r)
        .collect();
    gammas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    gammas.dedup();

    // consistency by gamma for the diagonal of the grid, one row per series
    let mut series: Vec<String> = records
        .iter()
        .map(|r| format!("{}|{}", r.scheme, r.attack_label))
        .collect();
    series.sort();
    series.dedup();
    let mut consistency = String::from("series");
    for g in &gammas {
        consistency.push_str(&format!(",{g}"));
    }
    consistency.push('\n');
    for s in &series {
        consistency.push_str(s);
        for g in &gammas {
            let value = records.iter().find(|r| {
                format!("{}|{}", r.scheme, r.attack_label) == *s
                    && (r.gamma_r - g).abs() < 1e-12
                    && (r.gamma_l - g).abs() < 1e-12
            });
            match value {
                Some(r) => consistency.push_str(&format!(",{}", r.pvalue_consistency)),
                None => consistency.push(','),
            }
        }
        consistency.push('\n');
    }

    // mitigation additional change over the full gamma grid
    let mut grs: Vec<f64> = records.iter().map(|r| r.gamma_r).collect();
    grs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grs.dedup();
    let mut gls: Vec<f64> = records.iter().map(|r| r.gamma_l).collect();
    gls.sort_by(|a, b| a.partial_cmp(b).unwrap());
    gls.dedup();
    let mut mitigation = String::from("gamma_r");
    for gl in &gls {
        mitigation.push_str(&format!(",{gl}"));
    }
    mitigation.push('\n');
    for gr in &grs {
        mitigation.push_str(&format!("{gr}"));
        for gl in &gls {
            let value = records.iter().find(|r| {
                (r.gamma_r - gr).abs() < 1e-12 && (r.gamma_l - gl).abs() < 1e-12
            });
            match value {
                Some(r) => mitigation.push_str(&format!(",{}", r.per_chg_mitigation)),
                None => mitigation.push(','),
            }
        }
        mitigation.push('\n');
    }

    let mut scatter = String::from("per_chg,per_cmp,series,attack_successful\n");
    for r in records {
        scatter.push_str(&format!(
            "{},{},{}|{},{}\n",
            r.per_chg_attack,
            r.per_cmp,
            r.scheme,
            r.attack_label,
            if r.per_cmp > 0.5 { "yes" } else { "no" }
        ));
    }

    ReportTables {
        consistency,
        mitigation,
        scatter,
    }
}

/// Mean absolute change in parent-descendant cosine similarity caused by
/// fingerprinting, per simulated generation.
///
/// Descendants are generated once from the clean database, appended to it,
/// and the combined database is fingerprinted; each generation's value
/// averages |cos(parent, descendant) before - after| over both parents of
/// every family.
pub fn generation_similarity_study(
    dataset: &Dataset,
    generations: usize,
    gamma_r: f64,
    gamma_l: f64,
    key: &SecretKey,
    sp_id: u64,
    seed: u64,
) -> Result<Vec<f64>, PipelineError> {
    let descendants = descend(&dataset.database, &dataset.pedigree, generations, seed)?;
    let base = &dataset.database;
    let mut keys: Vec<String> = base.primary_keys().to_vec();
    let mut cells = base.cells().to_vec();
    for gen_db in &descendants {
        keys.extend(gen_db.primary_keys().iter().cloned());
        cells.extend(gen_db.cells().iter().copied());
    }
    let combined = SnpDatabase::new(keys, base.loci().to_vec(), cells)
        .map_err(|e| PipelineError::Invalid(e.to_string()))?;
    let (marked, _, _) = insert_fingerprint(
        &combined,
        &InsertionParams {
            gamma_r,
            gamma_l,
            key: key.clone(),
            sp_id,
        },
    )?;

    let cosine = |db: &SnpDatabase, i: usize, j: usize| -> Option<f64> {
        let (mut dot, mut ni, mut nj) = (0.0f64, 0.0f64, 0.0f64);
        for p in 0..db.loci_count() {
            let x = f64::from(db.count_at(i, p));
            let y = f64::from(db.count_at(j, p));
            dot += x * y;
            ni += x * x;
            nj += y * y;
        }
        (ni > 0.0 && nj > 0.0).then(|| dot / (ni.sqrt() * nj.sqrt()))
    };

    let bound = dataset.pedigree.bind(base)?;
    let mut result = Vec::with_capacity(generations);
    for g in 1..=generations {
        let mut total = 0.0;
        let mut pairs = 0usize;
        for (fam, trio) in bound.iter().enumerate() {
            let desc_key = format!("f{fam:04}d{g}");
            let Some(d) = combined.row_index(&desc_key) else {
                continue;
            };
            for parent in [trio.mother, trio.father] {
                let before = cosine(&combined, parent, d);
                let after = cosine(&marked, parent, d);
                if let (Some(b), Some(a)) = (before, after) {
                    total += (a - b).abs();
                    pairs += 1;
                }
            }
        }
        result.push(if pairs > 0 { total / pairs as f64 } else { 0.0 });
    }
    Ok(result)
}
