//! Robustness and utility measurements: compromised-bit fraction, database
//! accuracy, case/control odds-ratio p-values, and top-k consistency.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::keyed::Fingerprint;
use crate::scheme::{ExtractedBit, ExtractedFingerprint};
use crate::snp::SnpDatabase;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("fingerprint lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("databases have different shapes or identifier orders")]
    ShapeMismatch,
    #[error("case and control groups must be disjoint, exhaustive and non-empty")]
    BadSplit,
    #[error("k = {0} out of range 1..={1}")]
    BadK(usize, usize),
    #[error("p-value tables cover different loci")]
    LocusMismatch,
}

/// Fraction of fingerprint bits an attacker compromised: positions that are
/// undetermined or disagree with the original.
pub fn per_cmp(
    original: &Fingerprint,
    extracted: &ExtractedFingerprint,
) -> Result<f64, MetricsError> {
    let len = extracted.len();
    if len != crate::keyed::FINGERPRINT_BITS {
        return Err(MetricsError::LengthMismatch(
            crate::keyed::FINGERPRINT_BITS,
            len,
        ));
    }
    let compromised = (0..len)
        .filter(|&l| match extracted.bit(l) {
            ExtractedBit::Zero => original.bit(l) != 0,
            ExtractedBit::One => original.bit(l) != 1,
            ExtractedBit::Undetermined => true,
        })
        .count();
    Ok(compromised as f64 / len as f64)
}

/// Fraction of raw-code cells on which the two databases agree.
pub fn accuracy(original: &SnpDatabase, other: &SnpDatabase) -> Result<f64, MetricsError> {
    if original.rows() != other.rows()
        || original.loci_count() != other.loci_count()
        || original.primary_keys() != other.primary_keys()
        || original.loci() != other.loci()
    {
        return Err(MetricsError::ShapeMismatch);
    }
    let total = original.total_cells();
    if total == 0 {
        return Ok(1.0);
    }
    let matched = total - original.cells_differing(other);
    Ok(matched as f64 / total as f64)
}

/// A random halving of the rows into case and control groups.
///
/// The split depends only on the key set and the seed, so the same seed
/// reproduces the same split on every variant of a database.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseControlSplit {
    case: Vec<String>,
    control: Vec<String>,
}

impl CaseControlSplit {
    pub fn random(keys: &[String], seed: u64) -> Result<Self, MetricsError> {
        if keys.len() < 2 {
            return Err(MetricsError::BadSplit);
        }
        let mut sorted: Vec<String> = keys.to_vec();
        sorted.sort();
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        sorted.shuffle(&mut rng);
        let half = sorted.len() / 2;
        let control = sorted.split_off(half);
        CaseControlSplit::from_groups(sorted, control)
    }

    pub fn from_groups(case: Vec<String>, control: Vec<String>) -> Result<Self, MetricsError> {
        if case.is_empty() || control.is_empty() {
            return Err(MetricsError::BadSplit);
        }
        let mut all: Vec<&String> = case.iter().chain(control.iter()).collect();
        all.sort();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return Err(MetricsError::BadSplit);
        }
        Ok(CaseControlSplit { case, control })
    }

    pub fn case_keys(&self) -> &[String] {
        &self.case
    }

    pub fn control_keys(&self) -> &[String] {
        &self.control
    }

    fn bind(&self, db: &SnpDatabase) -> Result<(Vec<usize>, Vec<usize>), MetricsError> {
        if self.case.len() + self.control.len() != db.rows() {
            return Err(MetricsError::BadSplit);
        }
        let resolve = |keys: &[String]| -> Result<Vec<usize>, MetricsError> {
            keys.iter()
                .map(|k| db.row_index(k).ok_or(MetricsError::BadSplit))
                .collect()
        };
        Ok((resolve(&self.case)?, resolve(&self.control)?))
    }
}

/// Standard normal CDF via the complementary error function.
fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Per-locus association statistics for one case/control split.
#[derive(Debug, Clone, PartialEq)]
pub struct PValueRow {
    pub locus: String,
    pub control_counts: [u32; 3],
    pub case_counts: [u32; 3],
    pub odds_ratio: f64,
    pub z: f64,
    pub p: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PValueTable {
    pub rows: Vec<PValueRow>,
}

impl PValueTable {
    /// Locus names of the `k` smallest p-values, ties broken by table order.
    pub fn top_k(&self, k: usize) -> Vec<&str> {
        let mut order: Vec<usize> = (0..self.rows.len()).collect();
        order.sort_by(|&a, &b| {
            self.rows[a]
                .p
                .partial_cmp(&self.rows[b].p)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        order
            .into_iter()
            .take(k)
            .map(|i| self.rows[i].locus.as_str())
            .collect()
    }
}

/// Odds-ratio two-tailed p-value from per-group genotype counts.
///
/// Degenerate count configurations (a zero in any of the four odds-ratio
/// terms) report p = 1 with the degenerate flag set.
pub fn pvalue_from_counts(control: [u32; 3], case: [u32; 3]) -> (f64, f64, f64, bool) {
    let c0 = f64::from(control[0]);
    let c12 = f64::from(control[1] + control[2]);
    let s0 = f64::from(case[0]);
    let s12 = f64::from(case[1] + case[2]);
    if c0 == 0.0 || s0 == 0.0 || c12 == 0.0 || s12 == 0.0 {
        return (f64::NAN, f64::NAN, 1.0, true);
    }
    let odds_ratio = (c0 * s12) / (s0 * c12);
    let std_err = (1.0 / s12 + 1.0 / s0 + 1.0 / c12 + 1.0 / c0).sqrt();
    let z = odds_ratio.ln() / std_err;
    let az = z.abs();
    let p = (normal_cdf(-az) + 1.0 - normal_cdf(az)).clamp(f64::MIN_POSITIVE, 1.0);
    (odds_ratio, z, p, false)
}

/// Per-locus p-values of a database under a case/control split.
pub fn pvalues(db: &SnpDatabase, split: &CaseControlSplit) -> Result<PValueTable, MetricsError> {
    let (case_rows, control_rows) = split.bind(db)?;
    let mut table = PValueTable::default();
    for (j, locus) in db.loci().iter().enumerate() {
        let tally = |rows: &[usize]| -> [u32; 3] {
            let mut counts = [0u32; 3];
            for &i in rows {
                counts[db.count_at(i, j) as usize] += 1;
            }
            counts
        };
        let case_counts = tally(&case_rows);
        let control_counts = tally(&control_rows);
        let (odds_ratio, z, p, degenerate) = pvalue_from_counts(control_counts, case_counts);
        table.rows.push(PValueRow {
            locus: locus.clone(),
            control_counts,
            case_counts,
            odds_ratio,
            z,
            p,
            degenerate,
        });
    }
    Ok(table)
}

/// Overlap fraction of the k lowest-p loci between two tables.
pub fn topk_consistency(
    reference: &PValueTable,
    candidate: &PValueTable,
    k: usize,
) -> Result<f64, MetricsError> {
    if reference.rows.len() != candidate.rows.len() {
        return Err(MetricsError::LocusMismatch);
    }
    let n = reference.rows.len();
    if k == 0 || k > n {
        return Err(MetricsError::BadK(k, n));
    }
    let mut ref_loci: Vec<&str> = reference.rows.iter().map(|r| r.locus.as_str()).collect();
    let mut cand_loci: Vec<&str> = candidate.rows.iter().map(|r| r.locus.as_str()).collect();
    ref_loci.sort_unstable();
    cand_loci.sort_unstable();
    if ref_loci != cand_loci {
        return Err(MetricsError::LocusMismatch);
    }
    let top_ref = reference.top_k(k);
    let top_cand: std::collections::HashSet<&str> = candidate.top_k(k).into_iter().collect();
    let overlap = top_ref.iter().filter(|l| top_cand.contains(*l)).count();
    Ok(overlap as f64 / k as f64)
}

/// Writes a p-value table in the `locus,C0,C1,C2,S0,S1,S2,or,z,p` format.
pub fn save_pvalues(table: &PValueTable, path: &std::path::Path) -> std::io::Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "locus,C0,C1,C2,S0,S1,S2,or,z,p")?;
    for r in &table.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.locus,
            r.control_counts[0],
            r.control_counts[1],
            r.control_counts[2],
            r.case_counts[0],
            r.case_counts[1],
            r.case_counts[2],
            r.odds_ratio,
            r.z,
            r.p
        )?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keyed::{gen_fingerprint, SecretKey};
    use crate::snp::SnpCode;

    #[test]
    fn hand_computed_pvalue() {
        // control (30,15,5), case (20,20,10): OR 2.25, z about 1.986
        let (or, z, p, degenerate) = pvalue_from_counts([30, 15, 5], [20, 20, 10]);
        assert!(!degenerate);
        assert!((or - 2.25).abs() < 1e-12);
        assert!((z - 1.986365246734842).abs() < 1e-9);
        assert!((p - 0.046992782617714).abs() < 1e-9);
        assert!((p - 0.047).abs() < 1e-3);
    }

    #[test]
    fn identical_groups_give_p_one() {
        let (or, z, p, degenerate) = pvalue_from_counts([30, 15, 5], [30, 15, 5]);
        assert!(!degenerate);
        assert!((or - 1.0).abs() < 1e-12);
        assert!(z.abs() < 1e-12);
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_counts_flagged() {
        let (_, _, p, degenerate) = pvalue_from_counts([0, 15, 5], [10, 5, 5]);
        assert!(degenerate);
        assert_eq!(p, 1.0);
        let (_, _, _, degenerate) = pvalue_from_counts([10, 0, 0], [10, 5, 5]);
        assert!(degenerate);
    }

    #[test]
    fn swapping_groups_preserves_p() {
        let (or1, z1, p1, _) = pvalue_from_counts([25, 10, 5], [18, 15, 7]);
        let (or2, z2, p2, _) = pvalue_from_counts([18, 15, 7], [25, 10, 5]);
        assert!((or1 * or2 - 1.0).abs() < 1e-12);
        assert!((z1 + z2).abs() < 1e-12);
        assert!((p1 - p2).abs() < 1e-12);
    }

    #[test]
    fn larger_abs_z_means_smaller_p() {
        let mut last_p = 1.0;
        for z10 in 1..40 {
            let z = f64::from(z10) / 10.0;
            let p = normal_cdf(-z) + 1.0 - normal_cdf(z);
            assert!(p < last_p);
            last_p = p;
        }
    }

    fn fingerprint() -> Fingerprint {
        gen_fingerprint(&SecretKey::new("metrics").unwrap(), 9)
    }

    #[test]
    fn per_cmp_boundaries() {
        use crate::scheme::ExtractionParams;
        use crate::scheme::insert_fingerprint;
        use crate::scheme::InsertionParams;

        let db = SnpDatabase::new(
            (0..80).map(|i| format!("r{i}")).collect(),
            (0..50).map(|j| format!("rs{j}")).collect(),
            (0..80 * 50)
                .map(|x| SnpCode::from_count((x % 3) as u8))
                .collect(),
        )
        .unwrap();
        let key = SecretKey::new("metrics").unwrap();
        let ins = InsertionParams {
            gamma_r: 0.5,
            gamma_l: 0.5,
            key: key.clone(),
            sp_id: 9,
        };
        let (marked, _, fp) = insert_fingerprint(&db, &ins).unwrap();
        let ext = ExtractionParams {
            gamma_r: 0.5,
            gamma_l: 0.5,
            key,
            tau: 0.7,
        };
        let extracted = crate::scheme::extract_fingerprint(&marked, &ext).unwrap();
        assert_eq!(extracted.undetermined_count(), 0);
        assert_eq!(per_cmp(&fp, &extracted).unwrap(), 0.0);
        assert_eq!(fingerprint().sp_id(), 9);
    }

    #[test]
    fn per_cmp_all_undetermined_is_one() {
        // a database with no rows yields zero votes everywhere
        let db = SnpDatabase::new(vec![], vec!["rs0".into()], vec![]).unwrap();
        let ext = crate::scheme::extract_fingerprint(
            &db,
            &crate::scheme::ExtractionParams {
                gamma_r: 0.5,
                gamma_l: 0.5,
                key: SecretKey::new("k").unwrap(),
                tau: 0.7,
            },
        )
        .unwrap();
        assert_eq!(per_cmp(&fingerprint(), &ext).unwrap(), 1.0);
    }

    #[test]
    fn accuracy_counts_cells() {
        let mk = |counts: &[u8]| {
            SnpDatabase::new(
                vec!["a".into(), "b".into()],
                (0..5).map(|j| format!("rs{j}")).collect(),
                counts.iter().map(|&c| SnpCode::from_count(c)).collect(),
            )
            .unwrap()
        };
        let x = mk(&[0, 1, 2, 0, 1, 2, 0, 1, 2, 0]);
        assert_eq!(accuracy(&x, &x).unwrap(), 1.0);
        let mut y = x.clone();
        y.set_count(1, 4, 2);
        assert_eq!(accuracy(&x, &y).unwrap(), 0.9);
        assert_eq!(accuracy(&y, &x).unwrap(), 0.9);
    }

    #[test]
    fn split_is_key_set_deterministic() {
        let keys_a: Vec<String> = (0..10).map(|i| format!("r{i}")).collect();
        let mut keys_b = keys_a.clone();
        keys_b.reverse();
        let s1 = CaseControlSplit::random(&keys_a, 4).unwrap();
        let s2 = CaseControlSplit::random(&keys_b, 4).unwrap();
        assert_eq!(s1, s2);
        let s3 = CaseControlSplit::random(&keys_a, 5).unwrap();
        assert_ne!(s1, s3);
    }

    #[test]
    fn topk_identity_and_disjoint() {
        let mk = |ps: &[f64]| PValueTable {
            rows: ps
                .iter()
                .enumerate()
                .map(|(i, &p)| PValueRow {
                    locus: format!("rs{i}"),
                    control_counts: [1, 1, 1],
                    case_counts: [1, 1, 1],
                    odds_ratio: 1.0,
                    z: 0.0,
                    p,
                    degenerate: false,
                })
                .collect(),
        };
        let reference = mk(&[0.01, 0.02, 0.9, 0.8]);
        assert_eq!(topk_consistency(&reference, &reference, 2).unwrap(), 1.0);
        let flipped = mk(&[0.9, 0.8, 0.01, 0.02]);
        assert_eq!(topk_consistency(&reference, &flipped, 2).unwrap(), 0.0);
        assert!(topk_consistency(&reference, &flipped, 0).is_err());
        assert!(topk_consistency(&reference, &flipped, 5).is_err());
    }
}
