//! Aggregated verification suite behind the `verify` CLI command. Each check
//! records its measured gaps alongside the threshold it was held to, so a
//! failure report says by how much, not just that.

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;
use serde_json::json;

use super::flows::{
    ou_contraction_test, second_moment_bound_check, talagrand_check, OuConfig, SecondMomentConfig,
};
use super::gaussian::{restricted_elbo_gap, GaussianOracle};
use super::grid::{dv_identity_check, dv_objective, gibbs_identity_check, GridMeasure};
use crate::rng::{stream_rng, sub_seed};

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub details: serde_json::Value,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub all_pass: bool,
}

impl VerifyReport {
    fn push(&mut self, name: &str, pass: bool, details: serde_json::Value) {
        self.checks.push(CheckResult { name: name.to_string(), pass, details });
        self.all_pass &= pass;
    }
}

/// Runs the whole oracle battery. Deterministic per seed; roughly a minute
/// of compute at the default sizes.
pub fn run_verify(seed: u64) -> VerifyReport {
    let mut report = VerifyReport { seed, checks: Vec::new(), all_pass: true };

    // Donsker-Varadhan identity: exact on finite grids, plus strictness of
    // suboptimal measures.
    {
        let mut rng = stream_rng(sub_seed(seed, "verify-dv", 0), 0);
        let mut worst_gap: f64 = 0.0;
        let mut min_strict = f64::INFINITY;
        for _ in 0..100 {
            let n = rng.gen_range(2..64);
            let support: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let base: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..3.0)).collect();
            let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let measure = GridMeasure::new(support.clone(), vec![1.0 / n as f64; n], base)
                .expect("valid grid");
            let check = dv_identity_check(&f, &measure).expect("dv check");
            worst_gap = worst_gap.max(check.gap.abs());
            let uniform = GridMeasure::uniform(support);
            min_strict = min_strict.min(check.lhs - dv_objective(&f, &uniform));
        }
        // Hand case: f = (0, ln 3) on a two-point counting grid.
        let hand = dv_identity_check(
            &[0.0, 3f64.ln()],
            &GridMeasure::uniform(vec![0.0, 1.0]),
        )
        .expect("hand case");
        let pass = worst_gap < 1e-12
            && hand.gap.abs() < 1e-12
            && (hand.lhs - 4f64.ln()).abs() < 1e-12
            && min_strict > 0.0;
        report.push(
            "dv_identity",
            pass,
            json!({
                "worst_gap": worst_gap,
                "hand_case_gap": hand.gap,
                "min_strictness_margin": min_strict,
                "threshold": 1e-12,
            }),
        );
    }

    // Gibbs identity on random grids plus the hand-computed two-point case.
    {
        let mut rng = stream_rng(sub_seed(seed, "verify-gibbs", 0), 0);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let n = rng.gen_range(2..64);
            let support: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let e: Vec<f64> = (0..n).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let mut w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= total);
            let q = GridMeasure::counting(support, w).expect("valid grid");
            worst = worst.max(gibbs_identity_check(&e, &q).expect("gibbs check"));
        }
        let hand = gibbs_identity_check(
            &[0.0, 2f64.ln()],
            &GridMeasure::uniform(vec![0.0, 1.0]),
        )
        .expect("hand case");
        let pass = worst < 1e-10 && hand < 1e-12;
        report.push(
            "gibbs_identity",
            pass,
            json!({ "worst_gap": worst, "hand_case_gap": hand, "threshold": 1e-10 }),
        );
    }

    // Restricted-family domination: zero gap when the family contains the
    // posterior, strictly positive gap on the misspecified construction.
    {
        let mut rng = stream_rng(sub_seed(seed, "verify-gap", 0), 0);
        let exact_oracle = GaussianOracle::build(&[vec![0.5], vec![0.1]], 1.0, 1.0)
            .expect("oracle");
        let xs: Vec<Vec<f64>> =
            (0..64).map(|_| exact_oracle.sample_marginal_x(&mut rng)).collect();
        let exact = restricted_elbo_gap(&exact_oracle, &xs);

        let miss_oracle = GaussianOracle::build_full(
            DMatrix::from_row_slice(2, 2, &[0.3, 0.0, 0.0, 0.1]),
            DMatrix::identity(2, 2),
            DMatrix::from_row_slice(2, 2, &[2.0, 0.8, 0.8, 1.0]),
        )
        .expect("oracle");
        let xs2: Vec<Vec<f64>> =
            (0..64).map(|_| miss_oracle.sample_marginal_x(&mut rng)).collect();
        let miss = restricted_elbo_gap(&miss_oracle, &xs2);
        let pass = exact.gap.abs() < 1e-10
            && miss.gap > 1e-3
            && miss.gap >= -1e-10
            && (miss.gap - miss.gap_closed_form).abs() < 1e-9;
        report.push(
            "restricted_elbo_domination",
            pass,
            json!({
                "exact_family_gap": exact.gap,
                "misspecified_gap": miss.gap,
                "misspecified_gap_closed_form": miss.gap_closed_form,
            }),
        );
    }

    // OU contraction at the acceptance scale and its Talagrand bound.
    {
        let traj = ou_contraction_test(&OuConfig { seed, ..OuConfig::default() });
        let mut worst_ratio: f64 = 0.0;
        for c in &traj.checkpoints {
            worst_ratio = worst_ratio.max(c.kl_empirical / c.kl_exact);
            worst_ratio = worst_ratio.max(c.kl_exact / c.kl_empirical.max(1e-300));
        }
        let tala = talagrand_check(&traj, 1.0, 1e-9);
        let pass = worst_ratio <= 1.3 && tala.pass && (traj.kl_initial_exact - 2.0).abs() < 1e-12;
        report.push(
            "ou_contraction",
            pass,
            json!({
                "worst_ratio": worst_ratio,
                "fitted_rate": traj.fitted_rate,
                "talagrand_pass": tala.pass,
                "checkpoints": traj.checkpoints.iter().map(|c| {
                    json!({ "t": c.t, "kl_empirical": c.kl_empirical, "kl_exact": c.kl_exact })
                }).collect::<Vec<_>>(),
                "threshold_ratio": 1.3,
            }),
        );
    }

    // Gronwall second-moment envelope over the full step budget.
    {
        let cfg = SecondMomentConfig { seed, ..SecondMomentConfig::default() };
        let m2 = second_moment_bound_check(&cfg);
        report.push(
            "second_moment_bound",
            m2.pass,
            json!({ "max_ratio": m2.max_ratio, "headroom": cfg.headroom }),
        );
    }

    // Oracle self-consistency: exact log p(x) against Simpson quadrature.
    {
        let oracle = GaussianOracle::build(&[vec![0.5]], 1.0, 1.0).expect("oracle");
        let mut worst: f64 = 0.0;
        for &x in &[0.0, 0.7, -1.3, 2.1] {
            let exact = oracle.log_marginal_x(&[x]);
            let quad = oracle.quadrature_log_marginal_x(&[x]).expect("quadrature");
            worst = worst.max((exact - quad).abs());
        }
        report.push(
            "gaussian_quadrature",
            worst < 1e-6,
            json!({ "worst_abs_error": worst, "threshold": 1e-6 }),
        );
    }

    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    #[cfg_attr(feature = "flipped-drift", ignore = "mutation build must fail verify")]
    fn full_suite_passes() {
        let report = run_verify(7);
        for c in &report.checks {
            assert!(c.pass, "check {} failed: {}", c.name, c.details);
        }
        assert!(report.all_pass);
        assert_eq!(report.checks.len(), 6);
    }

    #[cfg(feature = "flipped-drift")]
    #[test]
    fn full_suite_detects_flipped_drift() {
        let report = run_verify(7);
        assert!(!report.all_pass, "mutated drift must fail verification");
        let ou = report.checks.iter().find(|c| c.name == "ou_contraction").unwrap();
        assert!(!ou.pass);
    }
}
