//! The vanilla fingerprinting scheme: keyed insertion of per-SP mark bits
//! into selected 2-bit codes, and extraction by majority voting.

use thiserror::Error;

use crate::keyed::{gen_fingerprint, u_select, Fingerprint, SecretKey, SelectionChannel, FINGERPRINT_BITS};
use crate::snp::{FingerprintMask, SnpDatabase};

/// Default voting confidence threshold.
pub const DEFAULT_TAU: f64 = 0.7;

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("density must lie in (0, 1], got {0}")]
    BadDensity(f64),
    #[error("tau must lie in (0.5, 1], got {0}")]
    BadTau(f64),
    #[error("registry is empty")]
    EmptyRegistry,
}

#[derive(Debug, Clone)]
pub struct InsertionParams {
    pub gamma_r: f64,
    pub gamma_l: f64,
    pub key: SecretKey,
    pub sp_id: u64,
}

impl InsertionParams {
    pub fn validate(&self) -> Result<(), SchemeError> {
        for gamma in [self.gamma_r, self.gamma_l] {
            if !(gamma > 0.0 && gamma <= 1.0) {
                return Err(SchemeError::BadDensity(gamma));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ExtractionParams {
    pub gamma_r: f64,
    pub gamma_l: f64,
    pub key: SecretKey,
    pub tau: f64,
}

impl ExtractionParams {
    pub fn validate(&self) -> Result<(), SchemeError> {
        for gamma in [self.gamma_r, self.gamma_l] {
            if !(gamma > 0.0 && gamma <= 1.0) {
                return Err(SchemeError::BadDensity(gamma));
            }
        }
        if !(self.tau > 0.5 && self.tau <= 1.0) {
            return Err(SchemeError::BadTau(self.tau));
        }
        Ok(())
    }
}

/// An extracted fingerprint bit: determined 0/1 or still unknown.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtractedBit {
    Zero,
    One,
    Undetermined,
}

/// Majority-voted fingerprint recovered from a (possibly pirated) database.
#[derive(Debug, Clone)]
pub struct ExtractedFingerprint {
    bits: Vec<ExtractedBit>,
    vote_counts: Vec<(u32, u32)>, // (c0, c1) per position
}

impl ExtractedFingerprint {
    fn from_votes(vote_counts: Vec<(u32, u32)>, tau: f64) -> Self {
        let bits = vote_counts
            .iter()
            .map(|&(c0, c1)| {
                let total = c0 + c1;
                if total == 0 {
                    return ExtractedBit::Undetermined;
                }
                let total = f64::from(total);
                if f64::from(c1) / total >= tau {
                    ExtractedBit::One
                } else if f64::from(c0) / total >= tau {
                    ExtractedBit::Zero
                } else {
                    ExtractedBit::Undetermined
                }
            })
            .collect();
        ExtractedFingerprint { bits, vote_counts }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bit(&self, l: usize) -> ExtractedBit {
        self.bits[l]
    }

    pub fn bits(&self) -> &[ExtractedBit] {
        &self.bits
    }

    pub fn votes(&self, l: usize) -> (u32, u32) {
        self.vote_counts[l]
    }

    pub fn undetermined_count(&self) -> usize {
        self.bits
            .iter()
            .filter(|b| matches!(b, ExtractedBit::Undetermined))
            .count()
    }

    /// Determined positions whose bit equals the candidate's.
    pub fn matched_bits(&self, candidate: &Fingerprint) -> usize {
        self.bits
            .iter()
            .enumerate()
            .filter(|(l, bit)| match bit {
                ExtractedBit::Zero => candidate.bit(*l) == 0,
                ExtractedBit::One => candidate.bit(*l) == 1,
                ExtractedBit::Undetermined => false,
            })
            .count()
    }

    /// Rendered as a string of '0', '1' and '?'.
    pub fn to_pattern(&self) -> String {
        self.bits
            .iter()
            .map(|b| match b {
                ExtractedBit::Zero => '0',
                ExtractedBit::One => '1',
                ExtractedBit::Undetermined => '?',
            })
            .collect()
    }
}

/// Selection modulus for a density: `floor(1/gamma)`, computed with a small
/// guard so that e.g. 1/0.05 lands on 20 rather than 19.
pub fn selection_modulus(gamma: f64) -> u64 {
    ((1.0 / gamma) + 1e-9).floor() as u64
}

struct CellSelection {
    mask_bit: u8,
    fingerprint_index: usize,
    bit_position: u8, // t in {1, 2}, counted from the last bit
}

fn cell_selection(key: &SecretKey, row_key: &[u8], locus: &[u8]) -> CellSelection {
    let parts = &[row_key, locus][..];
    let mask_bit = (u_select(SelectionChannel::MASK_BIT, key, parts) % 2) as u8;
    let fingerprint_index =
        (u_select(SelectionChannel::FINGERPRINT_INDEX, key, parts) % FINGERPRINT_BITS as u64) as usize;
    let bit_position = (u_select(SelectionChannel::BIT_POSITION, key, parts) % 2) as u8 + 1;
    CellSelection {
        mask_bit,
        fingerprint_index,
        bit_position,
    }
}

fn row_selected(key: &SecretKey, row_key: &[u8], modulus: u64) -> bool {
    u_select(SelectionChannel::ROW, key, &[row_key]) % modulus == 0
}

fn cell_selected(key: &SecretKey, row_key: &[u8], locus: &[u8], modulus: u64) -> bool {
    u_select(SelectionChannel::CELL, key, &[row_key, locus]) % modulus == 0
}

/// Embeds the SP's fingerprint into a copy of the database.
///
/// Returns the fingerprinted database, the mask of marked cells, and the
/// fingerprint that was embedded. Non-selected cells are byte-identical to
/// the input.
pub fn insert_fingerprint(
    db: &SnpDatabase,
    params: &InsertionParams,
) -> Result<(SnpDatabase, FingerprintMask, Fingerprint), SchemeError> {
    params.validate()?;
    let fingerprint = gen_fingerprint(&params.key, params.sp_id);
    let mod_r = selection_modulus(params.gamma_r);
    let mod_l = selection_modulus(params.gamma_l);
    let mut out = db.clone();
    let mut mask = FingerprintMask::new(db.rows(), db.loci_count());
    for i in 0..db.rows() {
        let row_key = db.primary_keys()[i].as_bytes();
        if !row_selected(&params.key, row_key, mod_r) {
            continue;
        }
        for j in 0..db.loci_count() {
            let locus = db.loci()[j].as_bytes();
            if !cell_selected(&params.key, row_key, locus, mod_l) {
                continue;
            }
            let sel = cell_selection(&params.key, row_key, locus);
            let mark = sel.mask_bit ^ fingerprint.bit(sel.fingerprint_index);
            let cell = out.cell(i, j).with_bit_from_last(sel.bit_position, mark);
            out.set_cell(i, j, cell);
            mask.mark(i, j);
        }
    }
    Ok((out, mask, fingerprint))
}

/// Recovers the embedded fingerprint by recomputing every selection and
/// majority-voting the recovered bits.
pub fn extract_fingerprint(
    db: &SnpDatabase,
    params: &ExtractionParams,
) -> Result<ExtractedFingerprint, SchemeError> {
    params.validate()?;
    let mod_r = selection_modulus(params.gamma_r);
    let mod_l = selection_modulus(params.gamma_l);
    let mut votes = vec![(0u32, 0u32); FINGERPRINT_BITS];
    for i in 0..db.rows() {
        let row_key = db.primary_keys()[i].as_bytes();
        if !row_selected(&params.key, row_key, mod_r) {
            continue;
        }
        for j in 0..db.loci_count() {
            let locus = db.loci()[j].as_bytes();
            if !cell_selected(&params.key, row_key, locus, mod_l) {
                continue;
            }
            let sel = cell_selection(&params.key, row_key, locus);
            let mark = db.cell(i, j).bit_from_last(sel.bit_position);
            let bit = mark ^ sel.mask_bit;
            let entry = &mut votes[sel.fingerprint_index];
            if bit == 1 {
                entry.1 += 1;
            } else {
                entry.0 += 1;
            }
        }
    }
    Ok(ExtractedFingerprint::from_votes(votes, params.tau))
}

/// Scores every registered SP against the extracted fingerprint: matched
/// determined bits, ranked descending, ties broken by ascending sp_id.
pub fn detect_traitor(
    db: &SnpDatabase,
    params: &ExtractionParams,
    registry: &[(u64, Fingerprint)],
) -> Result<Vec<(u64, usize)>, SchemeError> {
    if registry.is_empty() {
        return Err(SchemeError::EmptyRegistry);
    }
    let extracted = extract_fingerprint(db, params)?;
    let mut scores: Vec<(u64, usize)> = registry
        .iter()
        .map(|(sp_id, fp)| (*sp_id, extracted.matched_bits(fp)))
        .collect();
    scores.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snp::SnpCode;

    fn small_db(rows: usize, cols: usize, seed: u64) -> SnpDatabase {
        // cheap deterministic fill
        let mut state = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) | 1;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        let cells = (0..rows * cols)
            .map(|_| SnpCode::from_count((next() % 3) as u8))
            .collect();
        SnpDatabase::new(
            (0..rows).map(|i| format!("r{i:05}")).collect(),
            (0..cols).map(|j| format!("rs{j:05}")).collect(),
            cells,
        )
        .unwrap()
    }

    #[test]
    fn modulus_examples() {
        assert_eq!(selection_modulus(0.05), 20);
        assert_eq!(selection_modulus(0.06), 16);
        assert_eq!(selection_modulus(0.07), 14);
        assert_eq!(selection_modulus(0.08), 12);
        assert_eq!(selection_modulus(0.09), 11);
        assert_eq!(selection_modulus(0.1), 10);
        assert_eq!(selection_modulus(1.0), 1);
    }

    #[test]
    fn voting_thresholds() {
        let ex = ExtractedFingerprint::from_votes(vec![(2, 8), (4, 6), (8, 2), (0, 0)], 0.7);
        assert_eq!(ex.bit(0), ExtractedBit::One); // 8/10 >= 0.7
        assert_eq!(ex.bit(1), ExtractedBit::Undetermined); // max ratio 0.6
        assert_eq!(ex.bit(2), ExtractedBit::Zero);
        assert_eq!(ex.bit(3), ExtractedBit::Undetermined); // no votes
    }

    #[test]
    fn untouched_cells_are_byte_identical() {
        let db = small_db(60, 40, 3);
        let params = InsertionParams {
            gamma_r: 0.2,
            gamma_l: 0.3,
            key: SecretKey::new("key").unwrap(),
            sp_id: 5,
        };
        let (marked, mask, _) = insert_fingerprint(&db, &params).unwrap();
        for i in 0..db.rows() {
            for j in 0..db.loci_count() {
                if !mask.is_marked(i, j) {
                    assert_eq!(db.cell(i, j), marked.cell(i, j));
                }
            }
        }
        assert!(mask.marked_count() > 0);
    }

    #[test]
    fn insertion_is_idempotent() {
        let db = small_db(50, 30, 9);
        let params = InsertionParams {
            gamma_r: 0.25,
            gamma_l: 0.25,
            key: SecretKey::new("key").unwrap(),
            sp_id: 2,
        };
        let (once, _, _) = insert_fingerprint(&db, &params).unwrap();
        let (twice, _, _) = insert_fingerprint(&once, &params).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn round_trip_recovers_fingerprint() {
        let db = small_db(200, 60, 1);
        let key = SecretKey::new("roundtrip").unwrap();
        let ins = InsertionParams {
            gamma_r: 0.2,
            gamma_l: 0.2,
            key: key.clone(),
            sp_id: 11,
        };
        let (marked, _, fp) = insert_fingerprint(&db, &ins).unwrap();
        let ext = ExtractionParams {
            gamma_r: 0.2,
            gamma_l: 0.2,
            key,
            tau: 1.0, // all votes agree without post-insertion modification
        };
        let extracted = extract_fingerprint(&marked, &ext).unwrap();
        for l in 0..FINGERPRINT_BITS {
            match extracted.bit(l) {
                ExtractedBit::Zero => assert_eq!(fp.bit(l), 0),
                ExtractedBit::One => assert_eq!(fp.bit(l), 1),
                ExtractedBit::Undetermined => assert_eq!(extracted.votes(l), (0, 0)),
            }
        }
    }

    #[test]
    fn gamma_one_selects_everything() {
        let db = small_db(20, 10, 4);
        let params = InsertionParams {
            gamma_r: 1.0,
            gamma_l: 1.0,
            key: SecretKey::new("k").unwrap(),
            sp_id: 0,
        };
        let (_, mask, _) = insert_fingerprint(&db, &params).unwrap();
        assert_eq!(mask.marked_count(), 200);
    }

    #[test]
    fn detect_ranks_inserted_sp_first() {
        let db = small_db(300, 80, 7);
        let key = SecretKey::new("owner").unwrap();
        let ins = InsertionParams {
            gamma_r: 0.2,
            gamma_l: 0.2,
            key: key.clone(),
            sp_id: 3,
        };
        let (marked, _, fp) = insert_fingerprint(&db, &ins).unwrap();
        let registry: Vec<(u64, Fingerprint)> = (0..6u64)
            .map(|n| (n, gen_fingerprint(&key, n)))
            .collect();
        let ext = ExtractionParams {
            gamma_r: 0.2,
            gamma_l: 0.2,
            key,
            tau: 0.7,
        };
        let ranking = detect_traitor(&marked, &ext, &registry).unwrap();
        assert_eq!(ranking[0].0, 3);
        assert_eq!(ranking[0].1, FINGERPRINT_BITS - extract_fingerprint(&marked, &ext).unwrap().undetermined_count());
        assert_eq!(fp.sp_id(), 3);
    }

    #[test]
    fn detect_tie_breaks_by_sp_id() {
        let ex = ExtractedFingerprint::from_votes(vec![(0, 0); FINGERPRINT_BITS], 0.7);
        // all undetermined: every SP scores 0, ranking is by ascending id
        let key = SecretKey::new("k").unwrap();
        let registry: Vec<(u64, Fingerprint)> =
            (0..4u64).map(|n| (n, gen_fingerprint(&key, n))).collect();
        let mut scores: Vec<(u64, usize)> = registry
            .iter()
            .map(|(id, fp)| (*id, ex.matched_bits(fp)))
            .collect();
        scores.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        assert_eq!(scores, vec![(0, 0), (1, 0), (2, 0), (3, 0)]);
    }
}
