//! Owner-side post-processing after fingerprint insertion: Mendel repair
//! plus similarity restoration (row-wise), and marginal restoration via
//! optimal transport (column-wise). Marked cells are never modified.

use thiserror::Error;

use crate::snp::{
    mendel_consistent, FingerprintMask, JointModel, ModelError, Pedigree, SimilarityModel,
    SnpDatabase, GENOTYPE_VALUES,
};
use crate::transport::{
    apply_transport, column_distribution, sinkhorn_plan, SinkhornParams, TransportError,
};

pub use crate::snp::mendel_consistent as mendel_check;

#[derive(Debug, Error)]
pub enum MitigationError {
    #[error("mask shape does not match the database")]
    MaskMismatch,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("similarity model has no entry for pair ({0}, {1})")]
    MissingSimilarity(String, String),
    #[error("locus {0:?} is not covered by any joint-model pair")]
    UncoveredLocus(String),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

/// What a mitigation pass changed.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MitigationReport {
    pub cells_changed_row_phase: usize,
    pub cells_changed_col_phase: usize,
    /// Violating trio loci left in place because all three cells carry marks.
    pub residual_mendel_violations: usize,
    /// Plan moves that found no eligible unmarked row.
    pub shortfall_rows: usize,
    pub per_chg_additional: f64,
}

/// Candidate repair for one violating trio locus.
struct Repair {
    values: [u8; 3],
    changed: usize,
    total_delta: u32,
    changed_members: [bool; 3],
}

fn best_repair(current: [u8; 3], free: [bool; 3]) -> Option<Repair> {
    let choices = |member: usize| -> Vec<u8> {
        if free[member] {
            (0..GENOTYPE_VALUES as u8).collect()
        } else {
            vec![current[member]]
        }
    };
    let mut best: Option<Repair> = None;
    for m in choices(0) {
        for f in choices(1) {
            for c in choices(2) {
                if !mendel_consistent(m, f, c) {
                    continue;
                }
                let values = [m, f, c];
                let changed_members =
                    [m != current[0], f != current[1], c != current[2]];
                let changed = changed_members.iter().filter(|&&x| x).count();
                let total_delta: u32 = values
                    .iter()
                    .zip(&current)
                    .map(|(&v, &c)| (i32::from(v) - i32::from(c)).unsigned_abs())
                    .sum();
                let candidate = Repair {
                    values,
                    changed,
                    total_delta,
                    changed_members,
                };
                let replace = match &best {
                    None => true,
                    Some(b) => {
                        let key_new = (candidate.changed, candidate.total_delta, candidate.changed_members_rank());
                        let key_old = (b.changed, b.total_delta, b.changed_members_rank());
                        key_new < key_old
                    }
                };
                if replace {
                    best = Some(candidate);
                }
            }
        }
    }
    best
}

impl Repair {
    /// Lexicographic rank of which members change, mother < father < child.
    fn changed_members_rank(&self) -> [u8; 3] {
        let mut rank = [u8::MAX; 3];
        let mut k = 0;
        for (i, &ch) in self.changed_members.iter().enumerate() {
            if ch {
                rank[k] = i as u8;
                k += 1;
            }
        }
        rank
    }
}

/// Row-wise mitigation.
///
/// Phase 1 rewrites the unmarked members of every Mendel-violating trio
/// locus using the consistent assignment that changes the fewest cells
/// (ties: smallest total count delta, then earliest member). Loci with no
/// mark-preserving consistent assignment (all three cells marked, or a
/// marked parent-child pair pinned to an impossible combination) are left
/// violating and counted as residuals.
///
/// Phase 2 restores each parent-child inner product to the public model by
/// converting fully unmarked (0,0,0) tuples to (1,0,1) / (0,1,1) or back,
/// skipping any move that would break Mendel consistency.
pub fn mitigate_row(
    db: &SnpDatabase,
    mask: &FingerprintMask,
    pedigree: &Pedigree,
    public_s: &SimilarityModel,
) -> Result<(SnpDatabase, MitigationReport), MitigationError> {
    if !mask.matches(db) {
        return Err(MitigationError::MaskMismatch);
    }
    let bound = pedigree.bind(db)?;
    let mut out = db.clone();
    let n = db.loci_count();
    let mut report = MitigationReport::default();

    // Phase 1: Mendel repair on unmarked cells.
    for trio in &bound {
        let members = trio.members();
        for p in 0..n {
            let current = [
                out.count_at(trio.mother, p),
                out.count_at(trio.father, p),
                out.count_at(trio.child, p),
            ];
            if mendel_consistent(current[0], current[1], current[2]) {
                continue;
            }
            let free = [
                !mask.is_marked(trio.mother, p),
                !mask.is_marked(trio.father, p),
                !mask.is_marked(trio.child, p),
            ];
            // no mark-preserving repair exists when all three cells are
            // marked, and also for rare marked combinations such as a
            // (parent, child) pair pinned to (0, 2)
            let Some(repair) = best_repair(current, free) else {
                report.residual_mendel_violations += 1;
                continue;
            };
            for (k, &row) in members.iter().enumerate() {
                if repair.values[k] != current[k] {
                    out.set_count(row, p, repair.values[k]);
                    report.cells_changed_row_phase += 1;
                }
            }
        }
    }

    // Phase 2: similarity restoration through fully unmarked tuples.
    for (trio, bt) in pedigree.trios().iter().zip(&bound) {
        for (parent_key, parent, is_mother) in [
            (&trio.mother, bt.mother, true),
            (&trio.father, bt.father, false),
        ] {
            let target = public_s
                .get(parent_key, &trio.child)
                .ok_or_else(|| {
                    MitigationError::MissingSimilarity(parent_key.clone(), trio.child.clone())
                })? as i64;
            let emp: i64 = (0..n)
                .map(|p| {
                    i64::from(out.count_at(parent, p)) * i64::from(out.count_at(bt.child, p))
                })
                .sum();
            let mut delta = target - emp;
            let other = if is_mother { bt.father } else { bt.mother };
            for p in 0..n {
                if delta == 0 {
                    break;
                }
                let unmarked = !mask.is_marked(bt.mother, p)
                    && !mask.is_marked(bt.father, p)
                    && !mask.is_marked(bt.child, p);
                if !unmarked {
                    continue;
                }
                let tuple = (
                    out.count_at(parent, p),
                    out.count_at(other, p),
                    out.count_at(bt.child, p),
                );
                if delta > 0 && tuple == (0, 0, 0) {
                    // raising move keeps the trio consistent by construction
                    out.set_count(parent, p, 1);
                    out.set_count(bt.child, p, 1);
                    report.cells_changed_row_phase += 2;
                    delta -= 1;
                } else if delta < 0 && tuple == (1, 0, 1) {
                    out.set_count(parent, p, 0);
                    out.set_count(bt.child, p, 0);
                    report.cells_changed_row_phase += 2;
                    delta += 1;
                }
            }
        }
    }

    report.per_chg_additional =
        db.cells_differing(&out) as f64 / db.total_cells().max(1) as f64;
    Ok((out, report))
}

/// Column-wise mitigation: per locus, transports the post-fingerprinting
/// marginal back to the model's marginal and applies the plan to unmarked
/// rows. `seed` drives the per-locus row selection.
pub fn mitigate_col(
    db: &SnpDatabase,
    mask: &FingerprintMask,
    public_j: &JointModel,
    params: &SinkhornParams,
    seed: u64,
) -> Result<(SnpDatabase, MitigationReport), MitigationError> {
    if !mask.matches(db) {
        return Err(MitigationError::MaskMismatch);
    }
    let mut out = db.clone();
    let mut report = MitigationReport::default();
    for (p, locus) in db.loci().iter().enumerate() {
        let target = public_j
            .marginal_of(locus)
            .ok_or_else(|| MitigationError::UncoveredLocus(locus.clone()))?;
        let source = column_distribution(&out, p);
        let plan = sinkhorn_plan(&source, &target, params)?;
        let outcome = apply_transport(&mut out, mask, p, &plan, seed ^ (p as u64).wrapping_mul(0x9e3779b97f4a7c15))?;
        report.cells_changed_col_phase += outcome.changed_cells;
        report.shortfall_rows += outcome.shortfall_rows;
    }
    report.per_chg_additional =
        db.cells_differing(&out) as f64 / db.total_cells().max(1) as f64;
    Ok((out, report))
}
