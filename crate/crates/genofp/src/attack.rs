//! The attacker's side: random bit flipping, and the row- and column-wise
//! correlation attacks that hunt for mark-induced inconsistencies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::snp::{
    mendel_consistent, JointModel, ModelError, Pedigree, SimilarityModel, SnpDatabase,
    GENOTYPE_VALUES,
};

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("change fraction must lie in [0, 1], got {0}")]
    BadBudget(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("similarity model has no entry for pair ({0}, {1})")]
    MissingSimilarity(String, String),
}

/// How many cells the attacker may modify, and its own randomness seed.
#[derive(Debug, Clone, Copy)]
pub struct AttackBudget {
    pub max_change_fraction: f64,
    pub seed: u64,
}

impl AttackBudget {
    pub fn new(max_change_fraction: f64, seed: u64) -> Result<Self, AttackError> {
        if !(0.0..=1.0).contains(&max_change_fraction) {
            return Err(AttackError::BadBudget(max_change_fraction));
        }
        Ok(AttackBudget {
            max_change_fraction,
            seed,
        })
    }

    fn cell_budget(&self, total_cells: usize) -> usize {
        (self.max_change_fraction * total_cells as f64).floor() as usize
    }
}

/// Outcome of one attack, measured against its input database.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackReport {
    pub changed_cells: usize,
    pub per_chg: f64,
    pub loci_touched: usize,
    /// Cells changed outside the budget (the row attack's Mendel phase).
    pub unbudgeted_changes: usize,
}

fn report(before: &SnpDatabase, after: &SnpDatabase, unbudgeted: usize) -> AttackReport {
    let mut changed = 0usize;
    let mut loci = vec![false; before.loci_count()];
    for i in 0..before.rows() {
        for j in 0..before.loci_count() {
            if before.cell(i, j) != after.cell(i, j) {
                changed += 1;
                loci[j] = true;
            }
        }
    }
    AttackReport {
        changed_cells: changed,
        per_chg: changed as f64 / before.total_cells().max(1) as f64,
        loci_touched: loci.iter().filter(|&&t| t).count(),
        unbudgeted_changes: unbudgeted,
    }
}

/// Flips one uniformly chosen bit in each of `floor(budget * M * N)`
/// distinct uniformly chosen cells.
pub fn random_flip_attack(
    db: &SnpDatabase,
    budget: &AttackBudget,
) -> Result<(SnpDatabase, AttackReport), AttackError> {
    if !(0.0..=1.0).contains(&budget.max_change_fraction) {
        return Err(AttackError::BadBudget(budget.max_change_fraction));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(budget.seed);
    let total = db.total_cells();
    let n_cells = budget.cell_budget(total);
    let mut out = db.clone();
    let chosen = rand::seq::index::sample(&mut rng, total, n_cells.min(total));
    let cols = db.loci_count();
    for pos in chosen {
        let (i, j) = (pos / cols, pos % cols);
        let t = rng.gen_range(1..=2u8);
        let cell = out.cell(i, j);
        let flipped = cell.with_bit_from_last(t, cell.bit_from_last(t) ^ 1);
        out.set_cell(i, j, flipped);
    }
    let rep = report(db, &out, 0);
    Ok((out, rep))
}

/// Single-member edits that restore Mendel consistency of a trio locus.
fn restoring_edits(counts: [u8; 3]) -> Vec<(usize, u8)> {
    let mut edits = Vec::new();
    for member in 0..3 {
        for value in 0..GENOTYPE_VALUES as u8 {
            if value == counts[member] {
                continue;
            }
            let mut fixed = counts;
            fixed[member] = value;
            if mendel_consistent(fixed[0], fixed[1], fixed[2]) {
                edits.push((member, value));
            }
        }
    }
    edits
}

/// The row-wise correlation attack.
///
/// Phase A flips one member of every Mendel-violating trio locus to a
/// consistency-restoring value (chosen uniformly; not counted against the
/// budget). Phase B moves parent-child tuples until each pair's empirical
/// similarity is within `epsilon_s` of the public model or the budget is
/// exhausted.
pub fn row_correlation_attack(
    db: &SnpDatabase,
    pedigree: &Pedigree,
    public_s: &SimilarityModel,
    budget: &AttackBudget,
    epsilon_s: f64,
) -> Result<(SnpDatabase, AttackReport), AttackError> {
    let mut rng = ChaCha12Rng::seed_from_u64(budget.seed);
    let bound = pedigree.bind(db)?;
    let mut out = db.clone();
    let n = db.loci_count();

    // Phase A: repair Mendel violations.
    let mut phase_a = 0usize;
    for trio in &bound {
        for p in 0..n {
            let counts = [
                out.count_at(trio.mother, p),
                out.count_at(trio.father, p),
                out.count_at(trio.child, p),
            ];
            if mendel_consistent(counts[0], counts[1], counts[2]) {
                continue;
            }
            let edits = restoring_edits(counts);
            let mut members: Vec<usize> = edits.iter().map(|&(m, _)| m).collect();
            members.dedup();
            let member = members[rng.gen_range(0..members.len())];
            let values: Vec<u8> = edits
                .iter()
                .filter(|&&(m, _)| m == member)
                .map(|&(_, v)| v)
                .collect();
            let value = values[rng.gen_range(0..values.len())];
            out.set_count(trio.members()[member], p, value);
            phase_a += 1;
        }
    }

    // Phase B: push parent-child inner products back toward the public model.
    let cell_budget = budget.cell_budget(db.total_cells());
    let mut spent = 0usize;
    for (trio, bt) in pedigree.trios().iter().zip(&bound) {
        for (parent_key, parent, is_mother) in [
            (&trio.mother, bt.mother, true),
            (&trio.father, bt.father, false),
        ] {
            let target = public_s
                .get(parent_key, &trio.child)
                .ok_or_else(|| {
                    AttackError::MissingSimilarity(parent_key.clone(), trio.child.clone())
                })? as i64;
            let mut emp: i64 = (0..n)
                .map(|p| {
                    i64::from(out.count_at(parent, p)) * i64::from(out.count_at(bt.child, p))
                })
                .sum();
            while (emp - target).abs() as f64 > epsilon_s && spent + 2 <= cell_budget {
                let other = if is_mother { bt.father } else { bt.mother };
                if emp > target {
                    // revert a (1, ., 1) tuple toward (0, ., 0)
                    let elig: Vec<usize> = (0..n)
                        .filter(|&p| out.count_at(parent, p) == 1 && out.count_at(bt.child, p) == 1)
                        .collect();
                    if elig.is_empty() {
                        break;
                    }
                    let p = elig[rng.gen_range(0..elig.len())];
                    out.set_count(parent, p, 0);
                    out.set_count(bt.child, p, 0);
                    emp -= 1;
                } else {
                    // raise via a fully zero tuple
                    let elig: Vec<usize> = (0..n)
                        .filter(|&p| {
                            out.count_at(parent, p) == 0
                                && out.count_at(other, p) == 0
                                && out.count_at(bt.child, p) == 0
                        })
                        .collect();
                    if elig.is_empty() {
                        break;
                    }
                    let p = elig[rng.gen_range(0..elig.len())];
                    out.set_count(parent, p, 1);
                    out.set_count(bt.child, p, 1);
                    emp += 1;
                }
                spent += 2;
            }
        }
    }

    let rep = report(db, &out, phase_a);
    Ok((out, rep))
}

/// Column-attack workspace: per-pair integer counts plus the model's
/// expected counts, kept incrementally up to date.
struct JointWorkspace {
    pairs: Vec<(usize, usize)>,
    counts: Vec<[[i64; GENOTYPE_VALUES]; GENOTYPE_VALUES]>,
    expected: Vec<[[f64; GENOTYPE_VALUES]; GENOTYPE_VALUES]>,
    tables_of: Vec<Vec<usize>>, // locus index -> table indices containing it
    /// Sum of expected counts, for rarity tie-breaking.
    model_counts: Vec<[[f64; GENOTYPE_VALUES]; GENOTYPE_VALUES]>,
}

impl JointWorkspace {
    fn build(db: &SnpDatabase, decoded: &[u8], public_j: &JointModel) -> Result<Self, AttackError> {
        let cols = db.loci_count();
        let m = db.rows() as f64;
        let mut pairs = Vec::with_capacity(public_j.len());
        let mut counts = Vec::with_capacity(public_j.len());
        let mut expected = Vec::with_capacity(public_j.len());
        let mut tables_of = vec![Vec::new(); cols];
        for (t, (p_name, q_name)) in public_j.pairs().iter().enumerate() {
            let p = db
                .locus_position(p_name)
                .ok_or_else(|| ModelError::MissingLocus(p_name.clone()))?;
            let q = db
                .locus_position(q_name)
                .ok_or_else(|| ModelError::MissingLocus(q_name.clone()))?;
            let mut cnt = [[0i64; GENOTYPE_VALUES]; GENOTYPE_VALUES];
            for i in 0..db.rows() {
                cnt[decoded[i * cols + p] as usize][decoded[i * cols + q] as usize] += 1;
            }
            let mut exp = [[0.0; GENOTYPE_VALUES]; GENOTYPE_VALUES];
            let table = public_j.table(t);
            for a in 0..GENOTYPE_VALUES {
                for b in 0..GENOTYPE_VALUES {
                    exp[a][b] = table[a][b] * m;
                }
            }
            tables_of[p].push(pairs.len());
            tables_of[q].push(pairs.len());
            pairs.push((p, q));
            counts.push(cnt);
            expected.push(exp);
        }
        let model_counts = expected.clone();
        Ok(JointWorkspace {
            pairs,
            counts,
            expected,
            tables_of,
            model_counts,
        })
    }

    fn apply_change(&mut self, decoded: &mut [u8], cols: usize, row: usize, locus: usize, new: u8) {
        for &t in &self.tables_of[locus] {
            let (p, q) = self.pairs[t];
            let a = decoded[row * cols + p] as usize;
            let b = decoded[row * cols + q] as usize;
            self.counts[t][a][b] -= 1;
            let (a2, b2) = if p == locus {
                (new as usize, b)
            } else {
                (a, new as usize)
            };
            self.counts[t][a2][b2] += 1;
        }
        decoded[row * cols + locus] = new;
    }
}

struct GreedyMove {
    table: usize,
    source: (usize, usize),
    dest: (usize, usize),
    excess: f64,
}

/// Best single-coordinate move: maximal excess source cell (ties broken by
/// rarest model cell, then scan order) paired with the most deficient
/// reachable cell holding at least one full row of deficit.
fn best_move(ws: &JointWorkspace, threshold_rows: f64) -> Option<GreedyMove> {
    let mut best: Option<GreedyMove> = None;
    for t in 0..ws.pairs.len() {
        let cnt = &ws.counts[t];
        let exp = &ws.expected[t];
        for a in 0..GENOTYPE_VALUES {
            for b in 0..GENOTYPE_VALUES {
                if cnt[a][b] == 0 {
                    continue;
                }
                let excess = cnt[a][b] as f64 - exp[a][b];
                if excess <= threshold_rows - 1e-6 || excess <= 1e-9 {
                    continue;
                }
                let mut dest: Option<((usize, usize), f64)> = None;
                for a2 in 0..GENOTYPE_VALUES {
                    if a2 == a {
                        continue;
                    }
                    let d = cnt[a2][b] as f64 - exp[a2][b];
                    if d <= -(1.0 - 1e-6) && dest.map_or(true, |(_, dd)| d < dd) {
                        dest = Some(((a2, b), d));
                    }
                }
                for b2 in 0..GENOTYPE_VALUES {
                    if b2 == b {
                        continue;
                    }
                    let d = cnt[a][b2] as f64 - exp[a][b2];
                    if d <= -(1.0 - 1e-6) && dest.map_or(true, |(_, dd)| d < dd) {
                        dest = Some(((a, b2), d));
                    }
                }
                let Some((dest_cell, _)) = dest else { continue };
                let better = match &best {
                    None => true,
                    Some(cur) => {
                        excess > cur.excess + 1e-9
                            || ((excess - cur.excess).abs() <= 1e-9
                                && ws.model_counts[t][a][b]
                                    < ws.model_counts[cur.table][cur.source.0][cur.source.1])
                    }
                };
                if better {
                    best = Some(GreedyMove {
                        table: t,
                        source: (a, b),
                        dest: dest_cell,
                        excess,
                    });
                }
            }
        }
    }
    best
}

/// The column-wise correlation attack.
///
/// Greedily moves one row at a time out of the joint-distribution cell with
/// the largest excess over the public model, toward the most deficient cell
/// of the same table, until no excess exceeds `epsilon_j` or the move budget
/// `floor(budget * M * N)` is exhausted.
pub fn col_correlation_attack(
    db: &SnpDatabase,
    public_j: &JointModel,
    budget: &AttackBudget,
    epsilon_j: f64,
) -> Result<(SnpDatabase, AttackReport), AttackError> {
    let mut rng = ChaCha12Rng::seed_from_u64(budget.seed);
    let cols = db.loci_count();
    let mut decoded: Vec<u8> = db.cells().iter().map(|c| c.count()).collect();
    let mut ws = JointWorkspace::build(db, &decoded, public_j)?;
    let threshold_rows = epsilon_j * db.rows() as f64;
    let move_budget = budget.cell_budget(db.total_cells());
    let mut out = db.clone();
    let mut moves = 0usize;
    while moves < move_budget {
        let Some(mv) = best_move(&ws, threshold_rows) else {
            break;
        };
        let (p, q) = ws.pairs[mv.table];
        let (a, b) = mv.source;
        let candidates: Vec<usize> = (0..db.rows())
            .filter(|&i| {
                decoded[i * cols + p] as usize == a && decoded[i * cols + q] as usize == b
            })
            .collect();
        debug_assert!(!candidates.is_empty());
        let row = candidates[rng.gen_range(0..candidates.len())];
        let (locus, new_value) = if mv.dest.0 != a {
            (p, mv.dest.0 as u8)
        } else {
            (q, mv.dest.1 as u8)
        };
        ws.apply_change(&mut decoded, cols, row, locus, new_value);
        out.set_count(row, locus, new_value);
        moves += 1;
    }
    let rep = report(db, &out, 0);
    Ok((out, rep))
}
