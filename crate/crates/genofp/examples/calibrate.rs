//! scratch: sweep attack-study parameters for the acceptance experiments
use genofp::keyed::SecretKey;
use genofp::pipeline::{
    run_experiment, AttackKind, AttackSpec, Dataset, ExperimentConfig, Scheme,
};
use genofp::synth::{generate, GeneratorConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let fams: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(200);
    let loci: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(100);
    let maf_lo: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0.05);
    let maf_hi: f64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(0.25);
    let ld: f64 = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(0.85);
    let row_b: f64 = args.get(6).map(|s| s.parse().unwrap()).unwrap_or(0.02);
    let col_b: f64 = args.get(7).map(|s| s.parse().unwrap()).unwrap_or(0.25);
    let seed: u64 = args.get(8).map(|s| s.parse().unwrap()).unwrap_or(41);

    let data = generate(&GeneratorConfig {
        n_families: fams,
        total_rows: None,
        n_loci: loci,
        maf_range: (maf_lo, maf_hi),
        ld_rho: ld,
        mutation_rate: 0.0,
        seed,
    })
    .unwrap();
    let dataset: Dataset = data.into();
    let grid = vec![0.05, 0.06, 0.07, 0.08, 0.09, 0.1];
    let attacks = vec![
        AttackSpec { kind: AttackKind::Row, budget: row_b },
        AttackSpec { kind: AttackKind::Col, budget: col_b },
    ];
    let mk = |scheme: Scheme| ExperimentConfig {
        gamma_r_grid: grid.clone(),
        gamma_l_grid: grid.clone(),
        scheme,
        attacks: attacks.clone(),
        key: SecretKey::new("calibration-key").unwrap(),
        sp_id: 1,
        tau: 0.7,
        lambda: 5.0,
        epsilon_s: 0.0,
        epsilon_j: Some(0.0),
        attack_seed: 101,
        transport_seed: 202,
        top_k: 50.min(loci),
    };
    let t0 = std::time::Instant::now();
    let vanilla = run_experiment(&dataset, &mk(Scheme::Vanilla)).unwrap();
    let robust = run_experiment(&dataset, &mk(Scheme::Robust)).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();

    let crit6 = vanilla
        .iter()
        .filter(|r| r.per_cmp > 0.5 && r.per_chg_attack < 0.08)
        .count();
    let mean_v: f64 = vanilla.iter().map(|r| r.per_cmp).sum::<f64>() / 36.0;
    let mean_r: f64 = robust.iter().map(|r| r.per_cmp).sum::<f64>() / 36.0;
    let rob_below = robust.iter().filter(|r| r.per_cmp < 0.5).count();
    let max_chg_v = vanilla.iter().map(|r| r.per_chg_attack).fold(0.0f64, f64::max);
    let mean_mtg: f64 = robust.iter().map(|r| r.per_chg_mitigation).sum::<f64>() / 36.0;
    let mean_cons_rob_atk: f64 = robust.iter().map(|r| r.pvalue_consistency).sum::<f64>() / 36.0;
    println!(
        "fams={fams} loci={loci} maf=({maf_lo},{maf_hi}) ld={ld} row_b={row_b} col_b={col_b} seed={seed}"
    );
    println!(
        "  crit6: {crit6}/36 (need>=22) | mean per_cmp vanilla={mean_v:.3} robust={mean_r:.3} gap={:.3} (need>=0.15) | robust<0.5: {rob_below}/36 (need>=29)",
        mean_v - mean_r
    );
    println!(
        "  max per_chg_attack={max_chg_v:.4} | mean mitigation chg={mean_mtg:.4} | mean robust-attacked consistency={mean_cons_rob_atk:.3} | {elapsed:.1}s"
    );
}
