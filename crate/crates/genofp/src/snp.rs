//! Domain types for SNP databases: 2-bit genotype codes, trio pedigrees,
//! and the public row/column correlation models.

use std::collections::HashMap;

use thiserror::Error;

/// Number of minor-allele values a SNP can take (0, 1 or 2).
pub const GENOTYPE_VALUES: usize = 3;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("row key {0:?} not present in database")]
    MissingKey(String),
    #[error("locus {0:?} not present in database")]
    MissingLocus(String),
    #[error("identifier {0:?} contains the reserved separator '|'")]
    ReservedSeparator(String),
    #[error("duplicate identifier {0:?}")]
    DuplicateIdentifier(String),
    #[error("dimension mismatch: expected {expected} cells, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("pedigree references row {0:?} in more than one family")]
    OverlappingFamilies(String),
    #[error("database needs at least two loci for adjacent pair statistics")]
    TooFewLoci,
}

/// One database cell: a raw 2-bit genotype code.
///
/// Freshly generated data only uses `00`, `01` and `10` (minor-allele counts
/// 0, 1 and 2). Bit-level marking can produce `11`; the stored code is kept
/// verbatim so the mark bit can be read back, and `11` decodes to count 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SnpCode(u8);

impl SnpCode {
    pub fn new(raw: u8) -> Option<Self> {
        (raw <= 0b11).then_some(SnpCode(raw))
    }

    /// Canonical encoding of a minor-allele count; never yields `11`.
    pub fn from_count(count: u8) -> Self {
        debug_assert!(count <= 2);
        SnpCode(count)
    }

    pub fn raw(self) -> u8 {
        self.0
    }

    /// Minor-allele count. `11` saturates to 2.
    pub fn count(self) -> u8 {
        if self.0 == 0b11 {
            2
        } else {
            self.0
        }
    }

    /// Reads the `t`-th bit from the last (t = 1 is the least significant).
    pub fn bit_from_last(self, t: u8) -> u8 {
        debug_assert!(t == 1 || t == 2);
        (self.0 >> (t - 1)) & 1
    }

    /// Returns the code with the `t`-th-from-last bit replaced by `bit`.
    pub fn with_bit_from_last(self, t: u8, bit: u8) -> Self {
        debug_assert!(t == 1 || t == 2);
        debug_assert!(bit <= 1);
        SnpCode((self.0 & !(1 << (t - 1))) | (bit << (t - 1)))
    }
}

/// Minor-allele count in `{0,1,2}`; decodes `0b11` as 2.
pub fn decode_count(code: SnpCode) -> u8 {
    code.count()
}

/// Allele values a parent with the given minor-allele count can transmit.
fn transmissible(count: u8) -> &'static [u8] {
    match count {
        0 => &[0],
        1 => &[0, 1],
        _ => &[1],
    }
}

/// Whether a (mother, father, child) minor-allele-count triple is consistent
/// with one allele inherited from each parent.
pub fn mendel_consistent(mother: u8, father: u8, child: u8) -> bool {
    transmissible(mother)
        .iter()
        .any(|m| transmissible(father).iter().any(|f| m + f == child))
}

/// A rectangular SNP database: one row per individual, one column per locus.
#[derive(Debug, Clone, PartialEq)]
pub struct SnpDatabase {
    primary_keys: Vec<String>,
    loci: Vec<String>,
    cells: Vec<SnpCode>, // row-major, len = rows * loci
    key_index: HashMap<String, usize>,
    locus_index: HashMap<String, usize>,
}

fn check_identifier(id: &str) -> Result<(), ModelError> {
    if id.contains('|') {
        return Err(ModelError::ReservedSeparator(id.to_string()));
    }
    Ok(())
}

impl SnpDatabase {
    pub fn new(
        primary_keys: Vec<String>,
        loci: Vec<String>,
        cells: Vec<SnpCode>,
    ) -> Result<Self, ModelError> {
        if cells.len() != primary_keys.len() * loci.len() {
            return Err(ModelError::DimensionMismatch {
                expected: primary_keys.len() * loci.len(),
                got: cells.len(),
            });
        }
        let mut key_index = HashMap::with_capacity(primary_keys.len());
        for (i, k) in primary_keys.iter().enumerate() {
            check_identifier(k)?;
            if key_index.insert(k.clone(), i).is_some() {
                return Err(ModelError::DuplicateIdentifier(k.clone()));
            }
        }
        let mut locus_index = HashMap::with_capacity(loci.len());
        for (j, l) in loci.iter().enumerate() {
            check_identifier(l)?;
            if locus_index.insert(l.clone(), j).is_some() {
                return Err(ModelError::DuplicateIdentifier(l.clone()));
            }
        }
        Ok(SnpDatabase {
            primary_keys,
            loci,
            cells,
            key_index,
            locus_index,
        })
    }

    pub fn rows(&self) -> usize {
        self.primary_keys.len()
    }

    pub fn loci_count(&self) -> usize {
        self.loci.len()
    }

    pub fn total_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn primary_keys(&self) -> &[String] {
        &self.primary_keys
    }

    pub fn loci(&self) -> &[String] {
        &self.loci
    }

    pub fn row_index(&self, key: &str) -> Option<usize> {
        self.key_index.get(key).copied()
    }

    pub fn locus_position(&self, locus: &str) -> Option<usize> {
        self.locus_index.get(locus).copied()
    }

    pub fn cell(&self, row: usize, col: usize) -> SnpCode {
        self.cells[row * self.loci.len() + col]
    }

    pub fn set_cell(&mut self, row: usize, col: usize, code: SnpCode) {
        self.cells[row * self.loci.len() + col] = code;
    }

    /// Minor-allele count at (row, col), with `11` saturating to 2.
    pub fn count_at(&self, row: usize, col: usize) -> u8 {
        self.cell(row, col).count()
    }

    /// Overwrites the cell with the canonical code for `count`.
    pub fn set_count(&mut self, row: usize, col: usize, count: u8) {
        self.set_cell(row, col, SnpCode::from_count(count));
    }

    pub fn cells(&self) -> &[SnpCode] {
        &self.cells
    }

    /// Decoded row as minor-allele counts.
    pub fn decoded_row(&self, row: usize) -> Vec<u8> {
        (0..self.loci.len()).map(|j| self.count_at(row, j)).collect()
    }

    /// Number of cells whose raw code differs from `other`'s.
    pub fn cells_differing(&self, other: &SnpDatabase) -> usize {
        debug_assert_eq!(self.cells.len(), other.cells.len());
        self.cells
            .iter()
            .zip(&other.cells)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// One mother/father/child family over database row keys.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trio {
    pub family_id: String,
    pub mother: String,
    pub father: String,
    pub child: String,
}

/// Disjoint trio families over the rows of a companion database.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Pedigree {
    trios: Vec<Trio>,
}

impl Pedigree {
    pub fn new(trios: Vec<Trio>) -> Result<Self, ModelError> {
        let mut seen: HashMap<&str, ()> = HashMap::new();
        for t in &trios {
            for key in [&t.mother, &t.father, &t.child] {
                if seen.insert(key, ()).is_some() {
                    return Err(ModelError::OverlappingFamilies(key.clone()));
                }
            }
        }
        Ok(Pedigree { trios })
    }

    pub fn trios(&self) -> &[Trio] {
        &self.trios
    }

    /// Resolves every trio against the database, erroring on unknown keys.
    pub fn bind(&self, db: &SnpDatabase) -> Result<Vec<BoundTrio>, ModelError> {
        self.trios
            .iter()
            .map(|t| {
                let find = |key: &String| {
                    db.row_index(key)
                        .ok_or_else(|| ModelError::MissingKey(key.clone()))
                };
                Ok(BoundTrio {
                    mother: find(&t.mother)?,
                    father: find(&t.father)?,
                    child: find(&t.child)?,
                })
            })
            .collect()
    }
}

/// A trio resolved to row indices of a specific database.
#[derive(Debug, Clone, Copy)]
pub struct BoundTrio {
    pub mother: usize,
    pub father: usize,
    pub child: usize,
}

impl BoundTrio {
    pub fn members(&self) -> [usize; 3] {
        [self.mother, self.father, self.child]
    }
}

/// Public row-wise correlation model: inner-product similarities for the
/// (mother, child) and (father, child) pair of every trio.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimilarityModel {
    order: Vec<(String, String)>,
    entries: HashMap<(String, String), u64>,
}

impl SimilarityModel {
    pub fn insert(&mut self, row_i: String, row_j: String, similarity: u64) {
        let key = (row_i, row_j);
        if self.entries.insert(key.clone(), similarity).is_none() {
            self.order.push(key);
        }
    }

    pub fn get(&self, row_i: &str, row_j: &str) -> Option<u64> {
        self.entries
            .get(&(row_i.to_string(), row_j.to_string()))
            .copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(String, String), u64)> {
        self.order.iter().map(move |k| (k, self.entries[k]))
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

/// A 3x3 joint probability table over minor-allele counts.
pub type JointTable = [[f64; GENOTYPE_VALUES]; GENOTYPE_VALUES];

/// Marginal of a joint table over the second locus (row sums).
pub fn marginal_first(table: &JointTable) -> [f64; GENOTYPE_VALUES] {
    let mut m = [0.0; GENOTYPE_VALUES];
    for (a, row) in table.iter().enumerate() {
        m[a] = row.iter().sum();
    }
    m
}

/// Marginal of a joint table over the first locus (column sums).
pub fn marginal_second(table: &JointTable) -> [f64; GENOTYPE_VALUES] {
    let mut m = [0.0; GENOTYPE_VALUES];
    for row in table.iter() {
        for (b, v) in row.iter().enumerate() {
            m[b] += v;
        }
    }
    m
}

/// Public column-wise correlation model: pairwise joint distributions of
/// minor-allele counts, keyed by ordered locus pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct JointModel {
    pairs: Vec<(String, String)>,
    tables: Vec<JointTable>,
    index: HashMap<(String, String), usize>,
}

impl JointModel {
    pub fn insert(&mut self, p: String, q: String, table: JointTable) {
        let key = (p, q);
        if let Some(&i) = self.index.get(&key) {
            self.tables[i] = table;
        } else {
            self.index.insert(key.clone(), self.pairs.len());
            self.pairs.push(key);
            self.tables.push(table);
        }
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn table(&self, i: usize) -> &JointTable {
        &self.tables[i]
    }

    pub fn get(&self, p: &str, q: &str) -> Option<&JointTable> {
        self.index
            .get(&(p.to_string(), q.to_string()))
            .map(|&i| &self.tables[i])
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Marginal distribution of `locus` from the first table containing it,
    /// in pair order. All tables agree on marginals by construction.
    pub fn marginal_of(&self, locus: &str) -> Option<[f64; GENOTYPE_VALUES]> {
        for (i, (p, q)) in self.pairs.iter().enumerate() {
            if p == locus {
                return Some(marginal_first(&self.tables[i]));
            }
            if q == locus {
                return Some(marginal_second(&self.tables[i]));
            }
        }
        None
    }
}

/// Which locus pairs the empirical joint model covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairPolicy {
    /// Neighbouring pairs (p, p+1); the default, where linkage is strongest.
    Adjacent,
    /// Every ordered pair p < q. Quadratic in the locus count.
    AllPairs,
}

/// Boolean matrix recording which cells the insertion phase marked.
///
/// Mitigations consult it so they never overwrite an embedded mark.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FingerprintMask {
    rows: usize,
    cols: usize,
    marked: Vec<bool>,
}

impl FingerprintMask {
    pub fn new(rows: usize, cols: usize) -> Self {
        FingerprintMask {
            rows,
            cols,
            marked: vec![false; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_marked(&self, row: usize, col: usize) -> bool {
        self.marked[row * self.cols + col]
    }

    pub fn mark(&mut self, row: usize, col: usize) {
        self.marked[row * self.cols + col] = true;
    }

    pub fn marked_count(&self) -> usize {
        self.marked.iter().filter(|&&m| m).count()
    }

    /// Rows containing at least one marked cell.
    pub fn marked_row_count(&self) -> usize {
        (0..self.rows)
            .filter(|&i| (0..self.cols).any(|j| self.is_marked(i, j)))
            .count()
    }

    pub fn matches(&self, db: &SnpDatabase) -> bool {
        self.rows == db.rows() && self.cols == db.loci_count()
    }
}

/// Empirical correlation models of a database: parent-child inner products
/// and per-pair joint distributions of decoded values over all rows.
pub fn empirical_models(
    db: &SnpDatabase,
    pedigree: &Pedigree,
    policy: PairPolicy,
) -> Result<(SimilarityModel, JointModel), ModelError> {
    let mut sim = SimilarityModel::default();
    let bound = pedigree.bind(db)?;
    for (trio, b) in pedigree.trios().iter().zip(&bound) {
        let child = db.decoded_row(b.child);
        for (parent_key, parent_row) in [(&trio.mother, b.mother), (&trio.father, b.father)] {
            let parent = db.decoded_row(parent_row);
            let s: u64 = parent
                .iter()
                .zip(&child)
                .map(|(&a, &b)| u64::from(a) * u64::from(b))
                .sum();
            sim.insert(parent_key.clone(), trio.child.clone(), s);
        }
    }

    let joint = empirical_joint(db, policy)?;
    Ok((sim, joint))
}

/// Empirical pairwise joint distributions alone.
pub fn empirical_joint(db: &SnpDatabase, policy: PairPolicy) -> Result<JointModel, ModelError> {
    let n = db.loci_count();
    if n < 2 {
        return Err(ModelError::TooFewLoci);
    }
    let mut joint = JointModel::default();
    let pairs: Vec<(usize, usize)> = match policy {
        PairPolicy::Adjacent => (0..n - 1).map(|p| (p, p + 1)).collect(),
        PairPolicy::AllPairs => (0..n)
            .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
            .collect(),
    };
    let m = db.rows() as f64;
    for (p, q) in pairs {
        let mut table = [[0.0; GENOTYPE_VALUES]; GENOTYPE_VALUES];
        for i in 0..db.rows() {
            let a = db.count_at(i, p) as usize;
            let b = db.count_at(i, q) as usize;
            table[a][b] += 1.0;
        }
        for row in &mut table {
            for v in row {
                *v /= m;
            }
        }
        joint.insert(db.loci()[p].clone(), db.loci()[q].clone(), table);
    }
    Ok(joint)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decode_saturates() {
        assert_eq!(decode_count(SnpCode::new(0b00).unwrap()), 0);
        assert_eq!(decode_count(SnpCode::new(0b01).unwrap()), 1);
        assert_eq!(decode_count(SnpCode::new(0b10).unwrap()), 2);
        assert_eq!(decode_count(SnpCode::new(0b11).unwrap()), 2);
        assert!(SnpCode::new(4).is_none());
    }

    #[test]
    fn decode_total_and_surjective() {
        let counts: Vec<u8> = (0u8..4)
            .map(|raw| decode_count(SnpCode::new(raw).unwrap()))
            .collect();
        for c in 0..=2u8 {
            assert!(counts.contains(&c));
        }
        assert!(counts.iter().all(|&c| c <= 2));
    }

    #[test]
    fn bit_access_round_trips() {
        let c = SnpCode::new(0b01).unwrap();
        assert_eq!(c.bit_from_last(1), 1);
        assert_eq!(c.bit_from_last(2), 0);
        // marking the 2nd-to-last bit of 01 with 1 yields 11
        assert_eq!(c.with_bit_from_last(2, 1).raw(), 0b11);
        assert_eq!(c.with_bit_from_last(1, 0).raw(), 0b00);
    }

    #[test]
    fn mendel_table() {
        assert!(mendel_consistent(0, 0, 0));
        assert!(!mendel_consistent(0, 0, 1)); // both parents 0, child 1
        assert!(!mendel_consistent(2, 1, 0)); // the 2-1-0 tuple
        assert!(mendel_consistent(2, 1, 1));
        assert!(mendel_consistent(1, 1, 0));
        assert!(mendel_consistent(1, 1, 2));
        assert!(!mendel_consistent(2, 2, 1));
        assert!(mendel_consistent(2, 2, 2));
        assert!(!mendel_consistent(0, 2, 0));
        assert!(mendel_consistent(0, 2, 1));
    }

    #[test]
    fn mendel_matches_allele_enumeration() {
        // independent oracle: enumerate unordered parental allele pairs
        let genotypes = |count: u8| -> Vec<(u8, u8)> {
            match count {
                0 => vec![(0, 0)],
                1 => vec![(0, 1)],
                _ => vec![(1, 1)],
            }
        };
        for m in 0..=2u8 {
            for f in 0..=2u8 {
                for c in 0..=2u8 {
                    let mut ok = false;
                    for (m1, m2) in genotypes(m) {
                        for (f1, f2) in genotypes(f) {
                            for ma in [m1, m2] {
                                for fa in [f1, f2] {
                                    ok |= ma + fa == c;
                                }
                            }
                        }
                    }
                    assert_eq!(mendel_consistent(m, f, c), ok, "({m},{f},{c})");
                }
            }
        }
    }

    #[test]
    fn identical_rows_inner_product() {
        // mother and child rows both decode to (1,1,1): similarity 3
        let counts = [1u8, 1, 1, 0, 0, 0, 1, 1, 1];
        let cells = counts.iter().map(|&c| SnpCode::from_count(c)).collect();
        let db = SnpDatabase::new(
            vec!["m".into(), "f".into(), "c".into()],
            vec!["rs1".into(), "rs2".into(), "rs3".into()],
            cells,
        )
        .unwrap();
        let ped = Pedigree::new(vec![Trio {
            family_id: "f0".into(),
            mother: "m".into(),
            father: "f".into(),
            child: "c".into(),
        }])
        .unwrap();
        let (sim, _) = empirical_models(&db, &ped, PairPolicy::Adjacent).unwrap();
        assert_eq!(sim.get("m", "c"), Some(3));
        assert_eq!(sim.get("f", "c"), Some(0));
    }

    #[test]
    fn joint_degenerate_mass() {
        let cells = vec![SnpCode::from_count(0); 8];
        let db = SnpDatabase::new(
            (0..4).map(|i| format!("r{i}")).collect(),
            vec!["a".into(), "b".into()],
            cells,
        )
        .unwrap();
        let joint = empirical_joint(&db, PairPolicy::Adjacent).unwrap();
        assert_eq!(joint.len(), 1);
        let t = joint.table(0);
        assert_eq!(t[0][0], 1.0);
        let total: f64 = t.iter().flatten().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_pipe_and_duplicates() {
        let bad = SnpDatabase::new(
            vec!["a|b".into()],
            vec!["l".into()],
            vec![SnpCode::from_count(0)],
        );
        assert!(matches!(bad, Err(ModelError::ReservedSeparator(_))));
        let dup = SnpDatabase::new(
            vec!["a".into(), "a".into()],
            vec!["l".into()],
            vec![SnpCode::from_count(0); 2],
        );
        assert!(matches!(dup, Err(ModelError::DuplicateIdentifier(_))));
    }
}
