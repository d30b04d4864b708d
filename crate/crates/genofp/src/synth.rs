//! Synthetic trio-structured SNP data: Mendelian inheritance by haplotype
//! transmission, tunable adjacent-locus linkage, and the matching public
//! correlation models.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::metrics::CaseControlSplit;
use crate::snp::{
    empirical_models, JointModel, Pedigree, PairPolicy, SimilarityModel, SnpCode, SnpDatabase,
    Trio,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    BadConfig(&'static str),
    #[error(transparent)]
    Model(#[from] crate::snp::ModelError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
}

#[derive(Debug, Clone)]
pub struct GeneratorConfig {
    pub n_families: usize,
    /// Total rows including unrelated singletons; `None` means trio rows only.
    pub total_rows: Option<usize>,
    pub n_loci: usize,
    /// Minor-allele-frequency range, drawn uniformly per locus.
    pub maf_range: (f64, f64),
    /// Adjacent-locus haplotype copy probability in [0, 1).
    pub ld_rho: f64,
    /// Per-transmission allele flip probability.
    pub mutation_rate: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_families: 150,
            total_rows: Some(1500),
            n_loci: 156,
            maf_range: (0.1, 0.4),
            ld_rho: 0.5,
            mutation_rate: 0.0,
            seed: 7,
        }
    }
}

impl GeneratorConfig {
    pub fn rows(&self) -> usize {
        self.total_rows.unwrap_or(3 * self.n_families)
    }

    fn validate(&self) -> Result<(), SynthError> {
        if self.n_families == 0 {
            return Err(SynthError::BadConfig("need at least one family"));
        }
        if self.n_loci < 2 {
            return Err(SynthError::BadConfig("need at least two loci"));
        }
        let (lo, hi) = self.maf_range;
        if !(lo > 0.0 && lo <= hi && hi <= 0.5) {
            return Err(SynthError::BadConfig("maf range must satisfy 0 < lo <= hi <= 0.5"));
        }
        if !(0.0..1.0).contains(&self.ld_rho) {
            return Err(SynthError::BadConfig("ld_rho must lie in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(SynthError::BadConfig("mutation_rate must lie in [0, 1]"));
        }
        if self.rows() < 3 * self.n_families {
            return Err(SynthError::BadConfig("total_rows below 3 * n_families"));
        }
        Ok(())
    }
}

/// Everything one experiment needs: the database, its pedigree, the public
/// correlation models computed from the clean data, and a fixed split.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub database: SnpDatabase,
    pub pedigree: Pedigree,
    pub similarity: SimilarityModel,
    pub joint: JointModel,
    pub split: CaseControlSplit,
    /// The per-locus minor-allele frequencies that were drawn.
    pub mafs: Vec<f64>,
}

/// First-order haplotype chain with exact per-locus marginals.
///
/// Locus j copies locus j-1's allele with probability `copy[j]` and
/// otherwise redraws with probability `fresh[j]`, chosen so the marginal
/// equals the drawn frequency exactly; the copy probability is capped where
/// neighbouring frequencies make the nominal `ld_rho` infeasible.
struct HaplotypeSampler {
    mafs: Vec<f64>,
    copy: Vec<f64>,
    fresh: Vec<f64>,
}

impl HaplotypeSampler {
    fn new(mafs: Vec<f64>, ld_rho: f64) -> Self {
        let n = mafs.len();
        let mut copy = vec![0.0; n];
        let mut fresh = vec![0.0; n];
        for j in 1..n {
            let prev = mafs[j - 1];
            let cur = mafs[j];
            let mut c = ld_rho;
            if prev > 0.0 {
                c = c.min(cur / prev);
            }
            if prev < 1.0 {
                c = c.min((1.0 - cur) / (1.0 - prev));
            }
            copy[j] = c;
            fresh[j] = ((cur - c * prev) / (1.0 - c)).clamp(0.0, 1.0);
        }
        HaplotypeSampler { mafs, copy, fresh }
    }

    fn sample(&self, rng: &mut impl Rng) -> Vec<u8> {
        let n = self.mafs.len();
        let mut hap = vec![0u8; n];
        hap[0] = u8::from(rng.gen_bool(self.mafs[0]));
        for j in 1..n {
            hap[j] = if rng.gen_bool(self.copy[j]) {
                hap[j - 1]
            } else {
                u8::from(rng.gen_bool(self.fresh[j]))
            };
        }
        hap
    }
}

fn transmit(hap: &[u8], mutation_rate: f64, rng: &mut impl Rng) -> Vec<u8> {
    hap.iter()
        .map(|&a| {
            if mutation_rate > 0.0 && rng.gen_bool(mutation_rate) {
                a ^ 1
            } else {
                a
            }
        })
        .collect()
}

fn genotype_cells(h1: &[u8], h2: &[u8]) -> Vec<SnpCode> {
    h1.iter()
        .zip(h2)
        .map(|(&a, &b)| SnpCode::from_count(a + b))
        .collect()
}

/// Generates a trio-structured database together with its public models.
pub fn generate(config: &GeneratorConfig) -> Result<SyntheticData, SynthError> {
    config.validate()?;
    let mut master = ChaCha12Rng::seed_from_u64(config.seed);
    let maf_seed = master.next_u64();
    let family_seed = master.next_u64();
    let singleton_seed = master.next_u64();
    let split_seed = master.next_u64();

    let mut maf_rng = ChaCha12Rng::seed_from_u64(maf_seed);
    let (lo, hi) = config.maf_range;
    let mafs: Vec<f64> = (0..config.n_loci)
        .map(|_| {
            if hi > lo {
                maf_rng.gen_range(lo..hi)
            } else {
                lo
            }
        })
        .collect();
    let sampler = HaplotypeSampler::new(mafs.clone(), config.ld_rho);

    let rows = config.rows();
    let mut keys = Vec::with_capacity(rows);
    let mut cells = Vec::with_capacity(rows * config.n_loci);
    let mut trios = Vec::with_capacity(config.n_families);
    let mut fam_rng = ChaCha12Rng::seed_from_u64(family_seed);
    for fam in 0..config.n_families {
        let mut rng = ChaCha12Rng::seed_from_u64(fam_rng.next_u64());
        let mother_haps = [sampler.sample(&mut rng), sampler.sample(&mut rng)];
        let father_haps = [sampler.sample(&mut rng), sampler.sample(&mut rng)];
        let from_mother = transmit(
            &mother_haps[usize::from(rng.gen_bool(0.5))],
            config.mutation_rate,
            &mut rng,
        );
        let from_father = transmit(
            &father_haps[usize::from(rng.gen_bool(0.5))],
            config.mutation_rate,
            &mut rng,
        );
        let mother_key = format!("f{fam:04}m");
        let father_key = format!("f{fam:04}f");
        let child_key = format!("f{fam:04}c");
        keys.push(mother_key.clone());
        cells.extend(genotype_cells(&mother_haps[0], &mother_haps[1]));
        keys.push(father_key.clone());
        cells.extend(genotype_cells(&father_haps[0], &father_haps[1]));
        keys.push(child_key.clone());
        cells.extend(genotype_cells(&from_mother, &from_father));
        trios.push(Trio {
            family_id: format!("f{fam:04}"),
            mother: mother_key,
            father: father_key,
            child: child_key,
        });
    }
    let mut single_rng = ChaCha12Rng::seed_from_u64(singleton_seed);
    for s in 0..rows - 3 * config.n_families {
        let h1 = sampler.sample(&mut single_rng);
        let h2 = sampler.sample(&mut single_rng);
        keys.push(format!("u{s:04}"));
        cells.extend(genotype_cells(&h1, &h2));
    }

    let loci: Vec<String> = (0..config.n_loci).map(|j| format!("rs{:06}", j + 1)).collect();
    let database = SnpDatabase::new(keys, loci, cells)?;
    let pedigree = Pedigree::new(trios)?;
    let (similarity, joint) = empirical_models(&database, &pedigree, PairPolicy::Adjacent)?;
    let split = CaseControlSplit::random(database.primary_keys(), split_seed)?;
    Ok(SyntheticData {
        database,
        pedigree,
        similarity,
        joint,
        split,
        mafs,
    })
}

/// Empirical per-locus allele frequency (mean decoded count over two).
pub fn allele_frequencies(db: &SnpDatabase) -> Vec<f64> {
    (0..db.loci_count())
        .map(|j| {
            let total: u64 = (0..db.rows()).map(|i| u64::from(db.count_at(i, j))).sum();
            total as f64 / (2.0 * db.rows().max(1) as f64)
        })
        .collect()
}

/// One allele drawn from an unphased genotype: each of the two alleles is
/// equally likely to be transmitted.
fn allele_from_genotype(count: u8, rng: &mut impl Rng) -> u8 {
    match count {
        0 => 0,
        2 => 1,
        _ => u8::from(rng.gen_bool(0.5)),
    }
}

/// Simulated descendants of every family: generation 1 re-mates each trio's
/// parents; generation g+1 mates the generation-g descendant with a fresh
/// founder drawn from the database's allele-frequency profile.
///
/// Returns one database per generation, each holding one descendant row per
/// family (`f<k>d<g>`), over the same loci.
pub fn descend(
    db: &SnpDatabase,
    pedigree: &Pedigree,
    generations: usize,
    seed: u64,
) -> Result<Vec<SnpDatabase>, SynthError> {
    if generations == 0 {
        return Err(SynthError::BadConfig("generations must be at least 1"));
    }
    let bound = pedigree.bind(db)?;
    let freqs = allele_frequencies(db);
    let n = db.loci_count();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut output = Vec::with_capacity(generations);
    // genotype counts of the previous generation, one row per family
    let mut previous: Vec<Vec<u8>> = Vec::with_capacity(bound.len());
    for g in 1..=generations {
        let mut keys = Vec::with_capacity(bound.len());
        let mut cells = Vec::with_capacity(bound.len() * n);
        let mut current = Vec::with_capacity(bound.len());
        for (fam, trio) in bound.iter().enumerate() {
            let child: Vec<u8> = if g == 1 {
                (0..n)
                    .map(|j| {
                        allele_from_genotype(db.count_at(trio.mother, j), &mut rng)
                            + allele_from_genotype(db.count_at(trio.father, j), &mut rng)
                    })
                    .collect()
            } else {
                let parent = &previous[fam];
                (0..n)
                    .map(|j| {
                        let from_line = allele_from_genotype(parent[j], &mut rng);
                        let founder =
                            u8::from(rng.gen_bool(freqs[j])) + u8::from(rng.gen_bool(freqs[j]));
                        from_line + allele_from_genotype(founder, &mut rng)
                    })
                    .collect()
            };
            keys.push(format!("f{fam:04}d{g}"));
            cells.extend(child.iter().map(|&c| SnpCode::from_count(c)));
            current.push(child);
        }
        output.push(SnpDatabase::new(keys, db.loci().to_vec(), cells)?);
        previous = current;
    }
    Ok(output)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snp::mendel_consistent;

    #[test]
    fn zero_mutation_means_zero_violations() {
        for seed in [1u64, 2, 3] {
            let data = generate(&GeneratorConfig {
                n_families: 40,
                total_rows: Some(150),
                n_loci: 30,
                seed,
                ..Default::default()
            })
            .unwrap();
            let bound = data.pedigree.bind(&data.database).unwrap();
            for trio in &bound {
                for p in 0..data.database.loci_count() {
                    assert!(mendel_consistent(
                        data.database.count_at(trio.mother, p),
                        data.database.count_at(trio.father, p),
                        data.database.count_at(trio.child, p),
                    ));
                }
            }
        }
    }

    #[test]
    fn degenerate_maf_gives_all_zeros() {
        let data = generate(&GeneratorConfig {
            n_families: 10,
            total_rows: None,
            n_loci: 20,
            maf_range: (1e-12, 1e-12),
            ld_rho: 0.3,
            mutation_rate: 0.0,
            seed: 4,
        })
        .unwrap();
        assert!(data
            .database
            .cells()
            .iter()
            .all(|c| c.count() == 0));
        assert!(data.similarity.iter().all(|(_, s)| s == 0));
    }

    #[test]
    fn published_similarity_matches_recomputation() {
        let data = generate(&GeneratorConfig {
            n_families: 25,
            total_rows: Some(100),
            n_loci: 25,
            seed: 11,
            ..Default::default()
        })
        .unwrap();
        let (sim, joint) =
            empirical_models(&data.database, &data.pedigree, PairPolicy::Adjacent).unwrap();
        assert_eq!(sim, data.similarity);
        assert_eq!(joint, data.joint);
    }

    #[test]
    fn empirical_maf_tracks_drawn_maf() {
        // 500 families = 2000 founder haplotypes per locus
        let data = generate(&GeneratorConfig {
            n_families: 500,
            total_rows: None,
            n_loci: 156,
            maf_range: (0.1, 0.4),
            ld_rho: 0.5,
            mutation_rate: 0.0,
            seed: 16,
        })
        .unwrap();
        // measure over the 1000 parent rows: 2000 independent founder haplotypes
        let db = &data.database;
        let parents: Vec<usize> = (0..db.rows())
            .filter(|&i| !db.primary_keys()[i].ends_with('c'))
            .collect();
        assert_eq!(parents.len(), 1000);
        for (j, &drawn) in data.mafs.iter().enumerate() {
            let total: u64 = parents.iter().map(|&i| u64::from(db.count_at(i, j))).sum();
            let obs = total as f64 / (2.0 * parents.len() as f64);
            assert!(
                (obs - drawn).abs() <= 0.03,
                "locus {j}: observed {obs:.4} vs drawn {drawn:.4}"
            );
        }
    }

    fn adjacent_correlation(db: &SnpDatabase) -> f64 {
        let m = db.rows() as f64;
        let mut total = 0.0;
        let mut pairs = 0usize;
        for j in 0..db.loci_count() - 1 {
            let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..db.rows() {
                let x = f64::from(db.count_at(i, j));
                let y = f64::from(db.count_at(i, j + 1));
                sx += x;
                sy += y;
                sxx += x * x;
                syy += y * y;
                sxy += x * y;
            }
            let cov = sxy / m - (sx / m) * (sy / m);
            let vx = sxx / m - (sx / m) * (sx / m);
            let vy = syy / m - (sy / m) * (sy / m);
            if vx > 0.0 && vy > 0.0 {
                total += cov / (vx * vy).sqrt();
                pairs += 1;
            }
        }
        total / pairs as f64
    }

    #[test]
    fn ld_parameter_controls_adjacent_correlation() {
        let base = GeneratorConfig {
            n_families: 400,
            total_rows: None,
            n_loci: 60,
            maf_range: (0.1, 0.4),
            mutation_rate: 0.0,
            seed: 21,
            ld_rho: 0.0,
        };
        let independent = generate(&base).unwrap();
        assert!(adjacent_correlation(&independent.database).abs() <= 0.05);
        let linked = generate(&GeneratorConfig {
            ld_rho: 0.9,
            ..base
        })
        .unwrap();
        assert!(adjacent_correlation(&linked.database) >= 0.5);
    }

    #[test]
    fn generation_is_deterministic() {
        let config = GeneratorConfig {
            n_families: 20,
            total_rows: Some(80),
            n_loci: 15,
            seed: 33,
            ..Default::default()
        };
        let a = generate(&config).unwrap();
        let b = generate(&config).unwrap();
        assert_eq!(a.database, b.database);
        assert_eq!(a.split, b.split);
    }

    #[test]
    fn descend_is_deterministic_and_consistent() {
        let data = generate(&GeneratorConfig {
            n_families: 30,
            total_rows: None,
            n_loci: 20,
            seed: 9,
            ..Default::default()
        })
        .unwrap();
        let a = descend(&data.database, &data.pedigree, 3, 17).unwrap();
        let b = descend(&data.database, &data.pedigree, 3, 17).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert_eq!(a[0].rows(), 30);
        // generation-1 children obey Mendel with respect to their parents
        let bound = data.pedigree.bind(&data.database).unwrap();
        for (fam, trio) in bound.iter().enumerate() {
            for j in 0..data.database.loci_count() {
                assert!(mendel_consistent(
                    data.database.count_at(trio.mother, j),
                    data.database.count_at(trio.father, j),
                    a[0].count_at(fam, j),
                ));
            }
        }
    }
}
