//! Entropy-regularized optimal transport over minor-allele-count
//! distributions, solved by log-domain Sinkhorn scaling, and the row-level
//! application of a transport plan to one database column.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::snp::{FingerprintMask, SnpDatabase, GENOTYPE_VALUES};

pub type Dist = [f64; GENOTYPE_VALUES];
pub type Matrix = [[f64; GENOTYPE_VALUES]; GENOTYPE_VALUES];

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("input is not a probability vector (sum {0})")]
    NotProbability(f64),
    #[error("Sinkhorn scaling did not converge: residual {residual} after {iterations} iterations")]
    NotConverged { residual: f64, iterations: usize },
    #[error("locus index {0} out of range")]
    LocusOutOfRange(usize),
    #[error("plan source does not match the column distribution (max diff {0})")]
    SourceMismatch(f64),
    #[error("mask shape does not match the database")]
    MaskMismatch,
    #[error("invalid parameter: {0}")]
    BadParameter(&'static str),
}

/// Solver parameters for the entropy-regularized transport problem
/// `min <G, cost> - H(G)/lambda` subject to the marginal constraints.
#[derive(Debug, Clone)]
pub struct SinkhornParams {
    /// Regularization weight; larger values concentrate the plan on the
    /// cheapest routes, smaller values spread it out.
    pub lambda: f64,
    /// Transport cost matrix; defaults to `|a - b|`.
    pub cost: Matrix,
    /// Marginal residual bound (max-norm) for convergence.
    pub alpha: f64,
    pub max_iterations: usize,
}

impl Default for SinkhornParams {
    fn default() -> Self {
        SinkhornParams {
            lambda: 50.0,
            cost: absolute_difference_cost(),
            alpha: 1e-9,
            max_iterations: 10_000,
        }
    }
}

impl SinkhornParams {
    pub fn with_lambda(lambda: f64) -> Self {
        SinkhornParams {
            lambda,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<(), TransportError> {
        if !(self.lambda > 0.0) {
            return Err(TransportError::BadParameter("lambda must be positive"));
        }
        if !(self.alpha > 0.0) {
            return Err(TransportError::BadParameter("alpha must be positive"));
        }
        for a in 0..GENOTYPE_VALUES {
            if self.cost[a][a] != 0.0 {
                return Err(TransportError::BadParameter("cost diagonal must be zero"));
            }
            for b in 0..GENOTYPE_VALUES {
                if (self.cost[a][b] - self.cost[b][a]).abs() > 1e-12 {
                    return Err(TransportError::BadParameter("cost must be symmetric"));
                }
                if a != b && self.cost[a][b] <= 0.0 {
                    return Err(TransportError::BadParameter(
                        "off-diagonal cost must be positive",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// The default transport cost `|a - b|`.
pub fn absolute_difference_cost() -> Matrix {
    let mut cost = [[0.0; GENOTYPE_VALUES]; GENOTYPE_VALUES];
    for (a, row) in cost.iter_mut().enumerate() {
        for (b, v) in row.iter_mut().enumerate() {
            *v = (a as f64 - b as f64).abs();
        }
    }
    cost
}

/// A feasible transport plan between two genotype distributions.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    pub plan: Matrix,
    pub source: Dist,
    pub target: Dist,
}

impl TransportPlan {
    /// Max-norm residual of both marginal constraints.
    pub fn marginal_residual(&self) -> f64 {
        let mut res: f64 = 0.0;
        for a in 0..GENOTYPE_VALUES {
            let row: f64 = self.plan[a].iter().sum();
            res = res.max((row - self.source[a]).abs());
        }
        for b in 0..GENOTYPE_VALUES {
            let col: f64 = (0..GENOTYPE_VALUES).map(|a| self.plan[a][b]).sum();
            res = res.max((col - self.target[b]).abs());
        }
        res
    }

    pub fn transport_cost(&self, cost: &Matrix) -> f64 {
        let mut total = 0.0;
        for a in 0..GENOTYPE_VALUES {
            for b in 0..GENOTYPE_VALUES {
                total += self.plan[a][b] * cost[a][b];
            }
        }
        total
    }

    /// Information entropy `-sum G ln G` (0 ln 0 = 0).
    pub fn entropy(&self) -> f64 {
        let mut h = 0.0;
        for row in &self.plan {
            for &g in row {
                if g > 0.0 {
                    h -= g * g.ln();
                }
            }
        }
        h
    }
}

fn check_probability(dist: &Dist) -> Result<(), TransportError> {
    let sum: f64 = dist.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || dist.iter().any(|&v| v < 0.0) {
        return Err(TransportError::NotProbability(sum));
    }
    Ok(())
}

fn log_sum_exp(values: &[f64; GENOTYPE_VALUES]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// Solves the entropy-regularized transport problem between two genotype
/// distributions by alternating log-domain scaling.
///
/// Zero-probability bins are handled exactly (their plan rows/columns are
/// zero). Returns an error when both marginal residuals cannot be brought
/// below `alpha` within the iteration cap.
pub fn sinkhorn_plan(
    source: &Dist,
    target: &Dist,
    params: &SinkhornParams,
) -> Result<TransportPlan, TransportError> {
    params.validate()?;
    check_probability(source)?;
    check_probability(target)?;
    let lambda = params.lambda;
    let log_src: Dist = source.map(|v| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY });
    let log_tgt: Dist = target.map(|v| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY });
    // potentials: G[a][b] = exp(phi[a] + psi[b] - lambda*cost[a][b])
    let mut phi = [0.0f64; GENOTYPE_VALUES];
    let mut psi = [0.0f64; GENOTYPE_VALUES];
    for a in 0..GENOTYPE_VALUES {
        if source[a] == 0.0 {
            phi[a] = f64::NEG_INFINITY;
        }
    }
    for b in 0..GENOTYPE_VALUES {
        if target[b] == 0.0 {
            psi[b] = f64::NEG_INFINITY;
        }
    }
    let build = |phi: &Dist, psi: &Dist| -> Matrix {
        let mut plan = [[0.0; GENOTYPE_VALUES]; GENOTYPE_VALUES];
        for a in 0..GENOTYPE_VALUES {
            for b in 0..GENOTYPE_VALUES {
                let e = phi[a] + psi[b] - lambda * params.cost[a][b];
                plan[a][b] = if e.is_finite() { e.exp() } else { 0.0 };
            }
        }
        plan
    };
    let mut residual = f64::INFINITY;
    for iteration in 0..params.max_iterations {
        for a in 0..GENOTYPE_VALUES {
            if source[a] == 0.0 {
                continue;
            }
            let terms =
                std::array::from_fn(|b| psi[b] - lambda * params.cost[a][b]);
            phi[a] = log_src[a] - log_sum_exp(&terms);
        }
        for b in 0..GENOTYPE_VALUES {
            if target[b] == 0.0 {
                continue;
            }
            let terms =
                std::array::from_fn(|a| phi[a] - lambda * params.cost[a][b]);
            psi[b] = log_tgt[b] - log_sum_exp(&terms);
        }
        let plan = TransportPlan {
            plan: build(&phi, &psi),
            source: *source,
            target: *target,
        };
        residual = plan.marginal_residual();
        if residual < params.alpha {
            return Ok(plan);
        }
        let _ = iteration;
    }
    Err(TransportError::NotConverged {
        residual,
        iterations: params.max_iterations,
    })
}

/// Outcome of applying one plan to one column.
#[derive(Debug, Clone, Copy, Default)]
pub struct TransportApplication {
    pub changed_cells: usize,
    /// Moves requested by the plan that had no eligible non-marked row left.
    pub shortfall_rows: usize,
}

/// Empirical decoded distribution of one column.
pub fn column_distribution(db: &SnpDatabase, locus: usize) -> Dist {
    let mut counts = [0usize; GENOTYPE_VALUES];
    for i in 0..db.rows() {
        counts[db.count_at(i, locus) as usize] += 1;
    }
    counts.map(|c| c as f64 / db.rows().max(1) as f64)
}

/// Applies a transport plan to one column in place: for every off-diagonal
/// cell (a, b), `round(G[a][b] * M)` non-marked rows currently holding value
/// `a` are rewritten to `b`. Rows are drawn uniformly without replacement
/// via the seed; shortfalls are reported, never forced.
pub fn apply_transport(
    db: &mut SnpDatabase,
    mask: &FingerprintMask,
    locus: usize,
    plan: &TransportPlan,
    seed: u64,
) -> Result<TransportApplication, TransportError> {
    if locus >= db.loci_count() {
        return Err(TransportError::LocusOutOfRange(locus));
    }
    if !mask.matches(db) {
        return Err(TransportError::MaskMismatch);
    }
    let current = column_distribution(db, locus);
    let max_diff = current
        .iter()
        .zip(&plan.source)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    if max_diff > 1e-6 {
        return Err(TransportError::SourceMismatch(max_diff));
    }
    let m = db.rows() as f64;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut outcome = TransportApplication::default();
    for a in 0..GENOTYPE_VALUES {
        // snapshot of eligible rows before any move at this source value
        let mut pool: Vec<usize> = (0..db.rows())
            .filter(|&i| db.count_at(i, locus) as usize == a && !mask.is_marked(i, locus))
            .collect();
        pool.shuffle(&mut rng);
        let mut cursor = 0usize;
        for b in 0..GENOTYPE_VALUES {
            if a == b {
                continue;
            }
            let requested = (plan.plan[a][b] * m).round() as usize;
            let available = pool.len().saturating_sub(cursor);
            let take = requested.min(available);
            for &row in &pool[cursor..cursor + take] {
                db.set_count(row, locus, b as u8);
            }
            cursor += take;
            outcome.changed_cells += take;
            outcome.shortfall_rows += requested - take;
        }
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snp::SnpCode;

    #[test]
    fn point_mass_identity() {
        let params = SinkhornParams::default();
        let plan = sinkhorn_plan(&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &params).unwrap();
        assert!((plan.plan[0][0] - 1.0).abs() < 1e-9);
        assert!(plan.marginal_residual() < 1e-9);
    }

    #[test]
    fn point_mass_shift() {
        let params = SinkhornParams::default();
        let plan = sinkhorn_plan(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &params).unwrap();
        assert!((plan.plan[0][1] - 1.0).abs() < 1e-9);
        assert!((plan.transport_cost(&params.cost) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn reference_plan_at_lambda_50() {
        // frozen reference computed with an independent high-precision solver
        let plan = sinkhorn_plan(
            &[0.5, 0.3, 0.2],
            &[0.3, 0.4, 0.3],
            &SinkhornParams::default(),
        )
        .unwrap();
        let expected = [[0.30, 0.16, 0.04], [0.0, 0.24, 0.06], [0.0, 0.0, 0.20]];
        for a in 0..3 {
            for b in 0..3 {
                assert!(
                    (plan.plan[a][b] - expected[a][b]).abs() < 1e-6,
                    "cell ({a},{b}): {} vs {}",
                    plan.plan[a][b],
                    expected[a][b]
                );
            }
        }
    }

    #[test]
    fn optimality_certificate_loop_ratios() {
        // at the optimum, G = diag(u) K diag(v), so for every 2x2 loop
        // G[a][b] G[a'][b'] / (G[a][b'] G[a'][b]) = exp(-lambda * loop cost)
        let params = SinkhornParams::with_lambda(3.0);
        let plan = sinkhorn_plan(&[0.6, 0.3, 0.1], &[0.2, 0.5, 0.3], &params).unwrap();
        for a in 0..3 {
            for a2 in a + 1..3 {
                for b in 0..3 {
                    for b2 in b + 1..3 {
                        let lhs = (plan.plan[a][b] * plan.plan[a2][b2]).ln()
                            - (plan.plan[a][b2] * plan.plan[a2][b]).ln();
                        let loop_cost = params.cost[a][b] + params.cost[a2][b2]
                            - params.cost[a][b2]
                            - params.cost[a2][b];
                        assert!((lhs + params.lambda * loop_cost).abs() < 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn entropy_grows_as_lambda_shrinks() {
        let source = [0.5, 0.3, 0.2];
        let target = [0.3, 0.4, 0.3];
        let h5 = sinkhorn_plan(&source, &target, &SinkhornParams::with_lambda(5.0))
            .unwrap()
            .entropy();
        let h500 = sinkhorn_plan(&source, &target, &SinkhornParams::with_lambda(500.0))
            .unwrap()
            .entropy();
        assert!(h5 >= h500);
    }

    #[test]
    fn rejects_non_probability() {
        let params = SinkhornParams::default();
        assert!(matches!(
            sinkhorn_plan(&[0.5, 0.2, 0.2], &[0.3, 0.4, 0.3], &params),
            Err(TransportError::NotProbability(_))
        ));
    }

    fn column_db(counts: &[u8]) -> SnpDatabase {
        SnpDatabase::new(
            (0..counts.len()).map(|i| format!("r{i}")).collect(),
            vec!["rs0".into()],
            counts.iter().map(|&c| SnpCode::from_count(c)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn diagonal_plan_changes_nothing() {
        let mut db = column_db(&[0, 0, 1, 1, 2, 2]);
        let mask = FingerprintMask::new(6, 1);
        let dist = column_distribution(&db, 0);
        let plan = TransportPlan {
            plan: [
                [dist[0], 0.0, 0.0],
                [0.0, dist[1], 0.0],
                [0.0, 0.0, dist[2]],
            ],
            source: dist,
            target: dist,
        };
        let before = db.clone();
        let outcome = apply_transport(&mut db, &mask, 0, &plan, 1).unwrap();
        assert_eq!(outcome.changed_cells, 0);
        assert_eq!(db, before);
    }

    #[test]
    fn counted_moves_hit_target_marginal() {
        // M=10, five 0s and five 1s, G(0,1)=0.2 -> exactly 2 rows move 0->1
        let mut db = column_db(&[0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
        let mask = FingerprintMask::new(10, 1);
        let plan = TransportPlan {
            plan: [[0.3, 0.2, 0.0], [0.0, 0.5, 0.0], [0.0, 0.0, 0.0]],
            source: [0.5, 0.5, 0.0],
            target: [0.3, 0.7, 0.0],
        };
        let outcome = apply_transport(&mut db, &mask, 0, &plan, 9).unwrap();
        assert_eq!(outcome.changed_cells, 2);
        assert_eq!(outcome.shortfall_rows, 0);
        let dist = column_distribution(&db, 0);
        assert_eq!(dist, [0.3, 0.7, 0.0]);
    }

    #[test]
    fn marked_rows_cause_shortfall_not_overwrite() {
        let mut db = column_db(&[0, 0, 1, 1]);
        let mut mask = FingerprintMask::new(4, 1);
        mask.mark(0, 0);
        mask.mark(1, 0);
        let plan = TransportPlan {
            plan: [[0.0, 0.5, 0.0], [0.0, 0.5, 0.0], [0.0, 0.0, 0.0]],
            source: [0.5, 0.5, 0.0],
            target: [0.0, 1.0, 0.0],
        };
        let outcome = apply_transport(&mut db, &mask, 0, &plan, 3).unwrap();
        // both zero-rows are marked: nothing may move, shortfall reported
        assert_eq!(outcome.changed_cells, 0);
        assert_eq!(outcome.shortfall_rows, 2);
        assert_eq!(db.count_at(0, 0), 0);
        assert_eq!(db.count_at(1, 0), 0);
    }

    #[test]
    fn source_mismatch_is_rejected() {
        let mut db = column_db(&[0, 0, 1, 1]);
        let mask = FingerprintMask::new(4, 1);
        let plan = TransportPlan {
            plan: [[0.9, 0.0, 0.0], [0.0, 0.1, 0.0], [0.0, 0.0, 0.0]],
            source: [0.9, 0.1, 0.0],
            target: [0.9, 0.1, 0.0],
        };
        assert!(matches!(
            apply_transport(&mut db, &mask, 0, &plan, 0),
            Err(TransportError::SourceMismatch(_))
        ));
    }
}
