/// Gauss–Legendre rule on the reference cell `[0, 1]`.
///
/// An `n`-point rule integrates polynomials up to degree `2n - 1` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

// (node, weight) pairs on [-1, 1], non-negative half only.
const GAUSS_1: [(f64, f64); 1] = [(0.0, 2.0)];
const GAUSS_2: [(f64, f64); 1] = [(0.577_350_269_189_625_8, 1.0)];
const GAUSS_3: [(f64, f64); 2] = [(0.0, 8.0 / 9.0), (0.774_596_669_241_483_4, 5.0 / 9.0)];
const GAUSS_4: [(f64, f64); 2] = [
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
];
const GAUSS_5: [(f64, f64); 3] = [
    (0.0, 0.568_888_888_888_888_9),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.906_179_845_938_664_0, 0.236_926_885_056_189_1),
];

impl QuadRule {
    /// Gauss–Legendre rule with `n` points, `1 <= n <= 5`.
    pub fn gauss(n: usize) -> Option<Self> {
        let half: &[(f64, f64)] = match n {
            1 => &GAUSS_1,
            2 => &GAUSS_2,
            3 => &GAUSS_3,
            4 => &GAUSS_4,
            5 => &GAUSS_5,
            _ => return None,
        };
        let mut pairs = Vec::with_capacity(n);
        for &(x, w) in half {
            if x == 0.0 {
                pairs.push((0.0, w));
            } else {
                pairs.push((-x, w));
                pairs.push((x, w));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Some(Self {
            points: pairs.iter().map(|&(x, _)| 0.5 * (x + 1.0)).collect(),
            weights: pairs.iter().map(|&(_, w)| 0.5 * w).collect(),
        })
    }

    /// Default rule for assembly and load integrals (exact to degree 5).
    pub fn default_assembly() -> Self {
        Self::gauss(3).expect("3-point rule exists")
    }

    /// Rule used for error integrals.
    pub fn default_error() -> Self {
        Self::gauss(5).expect("5-point rule exists")
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Polynomial degree integrated exactly.
    pub fn exactness_degree(&self) -> usize {
        2 * self.len() - 1
    }

    /// Quadrature nodes and weights mapped to `[lo, hi]`.
    pub fn mapped(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let len = hi - lo;
        self.points
            .iter()
            .zip(&self.weights)
            .map(move |(&p, &w)| (lo + p * len, w * len))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_one_and_exactness() {
        for n in 1..=5 {
            let rule = QuadRule::gauss(n).unwrap();
            let sum: f64 = rule.weights.iter().sum();
            assert!((sum - 1.0).abs() < 1e-15, "n = {n}");
            assert!(rule.points.iter().all(|&p| (0.0..=1.0).contains(&p)));
            // monomials x^k on [0,1] integrate to 1/(k+1)
            for k in 0..=rule.exactness_degree() {
                let q: f64 = rule.mapped(0.0, 1.0).map(|(x, w)| w * x.powi(k as i32)).sum();
                assert!((q - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "n = {n}, k = {k}");
            }
        }
        assert!(QuadRule::gauss(0).is_none());
        assert!(QuadRule::gauss(6).is_none());
    }
}
