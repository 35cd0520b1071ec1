//! Finite-grid instances of the variational identities. On a grid every
//! integral is a finite sum, so both sides of each identity can be evaluated
//! exactly (up to float rounding) and compared.

use super::OracleError;

/// A probability measure on a finite support together with the base-measure
/// weights entropy is taken against (counting measure by default).
#[derive(Clone, Debug, PartialEq)]
pub struct GridMeasure {
    pub support: Vec<f64>,
    pub weights: Vec<f64>,
    pub base: Vec<f64>,
}

impl GridMeasure {
    pub fn new(support: Vec<f64>, weights: Vec<f64>, base: Vec<f64>) -> Result<Self, OracleError> {
        if support.len() != weights.len() || support.len() != base.len() {
            return Err(OracleError::Invalid("support/weights/base lengths differ".into()));
        }
        if weights.iter().any(|&w| w < 0.0) || base.iter().any(|&b| !(b > 0.0)) {
            return Err(OracleError::Invalid(
                "weights must be non-negative and base weights positive".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(OracleError::Invalid(format!("weights sum to {total}, not 1")));
        }
        Ok(GridMeasure { support, weights, base })
    }

    /// Counting base measure (all base weights 1).
    pub fn counting(support: Vec<f64>, weights: Vec<f64>) -> Result<Self, OracleError> {
        let base = vec![1.0; support.len()];
        GridMeasure::new(support, weights, base)
    }

    pub fn uniform(support: Vec<f64>) -> Self {
        let n = support.len();
        let base = vec![1.0; n];
        GridMeasure { support, weights: vec![1.0 / n as f64; n], base }
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Entropy relative to the base weights: -sum q_i ln(q_i / base_i).
    pub fn entropy(&self) -> f64 {
        self.weights
            .iter()
            .zip(self.base.iter())
            .map(|(&q, &b)| if q > 0.0 { -q * (q / b).ln() } else { 0.0 })
            .sum()
    }
}

/// Both sides of log sum_i base_i e^{f_i} = sup_q { E_q[f] + H(q) }, the
/// supremum evaluated at its closed-form optimizer q*_i proportional to
/// base_i e^{f_i}.
#[derive(Clone, Debug)]
pub struct DvCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub optimizer: Vec<f64>,
}

pub fn dv_identity_check(f: &[f64], base: &GridMeasure) -> Result<DvCheck, OracleError> {
    if f.len() != base.len() {
        return Err(OracleError::Invalid("f length does not match grid".into()));
    }
    let max = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = f
        .iter()
        .zip(base.base.iter())
        .map(|(&fi, &bi)| bi * (fi - max).exp())
        .collect();
    let total: f64 = shifted.iter().sum();
    let lhs = max + total.ln();
    let optimizer: Vec<f64> = shifted.iter().map(|&s| s / total).collect();
    let q = GridMeasure {
        support: base.support.clone(),
        weights: optimizer.clone(),
        base: base.base.clone(),
    };
    let rhs = dv_objective(f, &q);
    Ok(DvCheck { lhs, rhs, gap: lhs - rhs, optimizer })
}

/// E_q[f] + H(q) for an arbitrary grid measure; strictly below the DV value
/// whenever q differs from the softmax optimizer.
pub fn dv_objective(f: &[f64], q: &GridMeasure) -> f64 {
    let expect: f64 = f.iter().zip(q.weights.iter()).map(|(&fi, &qi)| fi * qi).sum();
    expect + q.entropy()
}

/// Absolute gap of the Gibbs identity
/// E_q[E] - H(q) = KL(q || p) - log Z with p_i = base_i e^{-E_i} / Z on the
/// grid. The same formula covers the conditional version: a z-slice of the
/// energy makes Z the conditional normalizer.
pub fn gibbs_identity_check(energy: &[f64], q: &GridMeasure) -> Result<f64, OracleError> {
    if energy.len() != q.len() {
        return Err(OracleError::Invalid("energy length does not match grid".into()));
    }
    let lhs: f64 = energy.iter().zip(q.weights.iter()).map(|(&e, &w)| e * w).sum::<f64>()
        - q.entropy();
    // Log-domain normalizer for stability on wide energy ranges:
    // log sum b e^{-E} = log(sum b e^{min - E}) - min.
    let e_min = energy.iter().cloned().fold(f64::INFINITY, f64::min);
    let z: f64 = energy
        .iter()
        .zip(q.base.iter())
        .map(|(&e, &b)| b * (e_min - e).exp())
        .sum::<f64>();
    let log_z = z.ln() - e_min;
    let kl: f64 = energy
        .iter()
        .zip(q.weights.iter())
        .zip(q.base.iter())
        .map(|((&e, &w), &b)| {
            if w > 0.0 {
                let log_p = -e + b.ln() - log_z;
                w * (w.ln() - log_p)
            } else {
                0.0
            }
        })
        .sum();
    let rhs = kl - log_z;
    Ok((lhs - rhs).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    #[test]
    fn dv_two_point_hand_case() {
        let base = GridMeasure::uniform(vec![0.0, 1.0]);
        let f = [0.0, 3f64.ln()];
        let check = dv_identity_check(&f, &base).unwrap();
        assert!((check.lhs - 4f64.ln()).abs() < 1e-15, "lhs {}", check.lhs);
        assert!((check.optimizer[0] - 0.25).abs() < 1e-15);
        assert!((check.optimizer[1] - 0.75).abs() < 1e-15);
        assert!(check.gap.abs() < 1e-12, "gap {}", check.gap);
    }

    #[test]
    fn dv_constant_function() {
        let base =
            GridMeasure::new(vec![0.0, 1.0, 2.0], vec![0.2, 0.3, 0.5], vec![0.5, 1.0, 2.0])
                .unwrap();
        let c = 1.7;
        let f = [c; 3];
        let check = dv_identity_check(&f, &base).unwrap();
        let base_total: f64 = base.base.iter().sum();
        assert!((check.lhs - (c + base_total.ln())).abs() < 1e-12);
        assert!(check.gap.abs() < 1e-12);
        // Optimizer is the base measure normalized.
        for (q, b) in check.optimizer.iter().zip(base.base.iter()) {
            assert!((q - b / base_total).abs() < 1e-12);
        }
    }

    #[test]
    fn dv_suboptimal_measure_is_strictly_below() {
        let base = GridMeasure::uniform(vec![0.0, 1.0]);
        let f = [0.0, 3f64.ln()];
        let check = dv_identity_check(&f, &base).unwrap();
        let uniform = GridMeasure::uniform(vec![0.0, 1.0]);
        let sub = dv_objective(&f, &uniform);
        assert!(check.lhs - sub > 0.0, "strictness: {} vs {}", check.lhs, sub);
    }

    #[test]
    fn dv_random_grids_are_exact() {
        let mut rng = stream_rng(41, 0);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let n = rng.gen_range(2..60);
            let support: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let base: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..3.0)).collect();
            let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let measure =
                GridMeasure::new(support, vec![1.0 / n as f64; n], base).unwrap();
            let check = dv_identity_check(&f, &measure).unwrap();
            worst = worst.max(check.gap.abs());
        }
        assert!(worst < 1e-12, "worst DV gap {worst}");
    }

    #[test]
    fn gibbs_two_point_hand_case() {
        let q = GridMeasure::uniform(vec![0.0, 1.0]);
        let e = [0.0, 2f64.ln()];
        // LHS = (ln 2)/2 - ln 2; Z = 1.5; KL(q||p) = 0.5 ln(9/8);
        // RHS = 0.5 ln(9/8) - ln 1.5. Both equal -(ln 2)/2.
        let gap = gibbs_identity_check(&e, &q).unwrap();
        assert!(gap < 1e-12, "gap {gap}");
        let lhs: f64 = 0.5 * 2f64.ln() - 2f64.ln();
        assert!((lhs - (-0.346_573_590_279_972_6)).abs() < 1e-12);
    }

    #[test]
    fn gibbs_at_the_gibbs_measure() {
        // q = p: both sides equal -log Z.
        let e = [0.3, 1.1, -0.4];
        let z: f64 = e.iter().map(|&v| (-v as f64).exp()).sum();
        let p: Vec<f64> = e.iter().map(|&v| (-v as f64).exp() / z).collect();
        let q = GridMeasure::counting(vec![0.0, 1.0, 2.0], p).unwrap();
        let gap = gibbs_identity_check(&e, &q).unwrap();
        assert!(gap < 1e-12);
        let lhs: f64 = e.iter().zip(q.weights.iter()).map(|(&ei, &w)| ei * w).sum::<f64>()
            - q.entropy();
        assert!((lhs + z.ln()).abs() < 1e-12);
    }

    #[test]
    fn gibbs_random_grids() {
        let mut rng = stream_rng(43, 0);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let n = rng.gen_range(2..50);
            let support: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let e: Vec<f64> = (0..n).map(|_| rng.gen_range(-4.0..4.0)).collect();
            let mut w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= total);
            let q = GridMeasure::counting(support, w).unwrap();
            worst = worst.max(gibbs_identity_check(&e, &q).unwrap());
        }
        assert!(worst < 1e-10, "worst Gibbs gap {worst}");
    }
}
