//! Gauss–Hermite discretization of a lognormal gross return.

use std::f64::consts::PI;

/// Discrete approximation of `log R ~ N(mean_log, sd_log^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnQuadrature {
    pub n_nodes: usize,
    pub mean_log: f64,
    pub sd_log: f64,
    /// Nodes for `log R`, increasing.
    pub log_nodes: Vec<f64>,
    /// Probabilities, summing to one.
    pub weights: Vec<f64>,
}

impl ReturnQuadrature {
    /// Gross returns `exp(log_node)`.
    pub fn returns(&self) -> Vec<f64> {
        self.log_nodes.iter().map(|x| x.exp()).collect()
    }

    /// `E[f(log R)]` under the discrete distribution.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.log_nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Nodes and weights of the `n`-point Gauss–Hermite rule for the weight
/// `exp(-x^2)`, nodes increasing. Newton iteration on the orthonormal Hermite
/// recurrence, with the usual asymptotic starting guesses.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let pim4 = PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    let m = n.div_ceil(2);
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (pim4, 0.0);
            for j in 1..=n {
                let jf = j as f64;
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let step = p1 / pp;
            z -= step;
            if step.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        // x[i] holds the i-th largest node while guesses are being built.
        x[i] = z;
        w[i] = 2.0 / (pp * pp);
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..m {
        nodes[n - 1 - i] = x[i];
        nodes[i] = -x[i];
        weights[n - 1 - i] = w[i];
        weights[i] = w[i];
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Discretizes `log R ~ N((mu - sigma^2/2) dt, sigma^2 dt)` with an `n_nodes`
/// Gauss–Hermite rule. Weights are renormalized to sum to one.
pub fn discretize_returns(mu: f64, sigma: f64, delta_t: f64, n_nodes: usize) -> ReturnQuadrature {
    assert!(sigma > 0.0 && delta_t > 0.0, "sigma and delta_t must be positive");
    let mean_log = (mu - 0.5 * sigma * sigma) * delta_t;
    let sd_log = sigma * delta_t.sqrt();
    let (x, w) = gauss_hermite(n_nodes);
    let total: f64 = w.iter().sum();
    ReturnQuadrature {
        n_nodes,
        mean_log,
        sd_log,
        log_nodes: x.iter().map(|xi| mean_log + sd_log * 2f64.sqrt() * xi).collect(),
        weights: w.iter().map(|wi| wi / total).collect(),
    }
}
