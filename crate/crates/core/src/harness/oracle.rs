use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::linalg;
use crate::measures::{w2_squared, DiscreteMeasure, Point};
use crate::selection::{min_norm_select, oracle_min_norm, ConstraintSet, SelectionOutcome};

/// Absolute agreement required between the QP solver and the enumeration oracle.
pub const QP_XI_TOL: f64 = 1e-6;
/// Absolute agreement required between the transport solver and enumeration.
pub const W2_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub seed: u64,
    pub count: usize,
    pub qp_status_agree: usize,
    pub qp_xi_agree: usize,
    pub qp_max_xi_diff: f64,
    pub w2_agree: usize,
    pub w2_max_diff: f64,
    pub failures: Vec<String>,
    /// SHA-256 over the rounded solver outputs, stable for a fixed build.
    pub digest: String,
}

impl OracleReport {
    pub fn pass(&self) -> bool {
        self.failures.is_empty()
    }
}

fn instance_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `d ≤ 3`, `n ≤ 6`, every coefficient uniform in `[−1, 1]`.
pub fn random_qp(seed: u64, k: usize) -> ConstraintSet {
    let mut rng = instance_rng(seed, 2 * k as u64);
    let d = rng.gen_range(1..=3);
    let n = rng.gen_range(1..=6);
    let dirs = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect()).collect();
    let offs = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
    ConstraintSet::new(d, dirs, offs).expect("well-formed instance")
}

/// Two uniform measures with `m = n ≤ 6` atoms in `[−1, 1]^d`, `d ≤ 3`.
pub fn random_uniform_pair(seed: u64, k: usize) -> (DiscreteMeasure, DiscreteMeasure) {
    let mut rng = instance_rng(seed, 2 * k as u64 + 1);
    let d = rng.gen_range(1..=3);
    let m = rng.gen_range(1..=6);
    let mut cloud = || -> Vec<Point> {
        (0..m)
            .map(|_| Point::new((0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect()).expect("finite"))
            .collect()
    };
    let a = cloud();
    let b = cloud();
    (DiscreteMeasure::uniform(a).expect("valid"), DiscreteMeasure::uniform(b).expect("valid"))
}

/// `min_σ (1/m) Σ_j ‖x_j − y_σ(j)‖²` over all permutations. For uniform
/// measures of equal size an optimal plan is a permutation (Birkhoff).
pub fn w2_by_permutation(x: &[Point], y: &[Point]) -> f64 {
    assert_eq!(x.len(), y.len(), "permutation oracle needs equal sizes");
    let m = x.len();
    let mut perm: Vec<usize> = (0..m).collect();
    let cost = |p: &[usize]| p.iter().enumerate().map(|(j, &i)| x[j].dist_sq(&y[i])).sum::<f64>() / m as f64;
    let mut best = cost(&perm);
    // Heap's algorithm, iterative.
    let mut c = vec![0usize; m];
    let mut i = 0;
    while i < m {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.min(cost(&perm));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    best
}

/// Solver against brute force on `count` seeded QP instances and `count`
/// seeded measure pairs.
pub fn oracle_suite(seed: u64, count: usize) -> OracleReport {
    let mut report = OracleReport {
        seed,
        count,
        qp_status_agree: 0,
        qp_xi_agree: 0,
        qp_max_xi_diff: 0.0,
        w2_agree: 0,
        w2_max_diff: 0.0,
        failures: Vec::new(),
        digest: String::new(),
    };
    let mut hasher = Sha256::new();
    for k in 0..count {
        let c = random_qp(seed, k);
        let fast = min_norm_select(&c);
        let slow = oracle_min_norm(&c).expect("instance within oracle budget");
        match (&fast, &slow) {
            (SelectionOutcome::Feasible { xi: a, .. }, SelectionOutcome::Feasible { xi: b, .. }) => {
                report.qp_status_agree += 1;
                let diff = linalg::dist_sq(a, b).sqrt();
                report.qp_max_xi_diff = report.qp_max_xi_diff.max(diff);
                if diff <= QP_XI_TOL {
                    report.qp_xi_agree += 1;
                } else {
                    report.failures.push(format!("qp {k}: ξ differs by {diff:.3e}"));
                }
                let xs: Vec<String> = a.iter().map(|x| format!("{x:.9e}")).collect();
                hasher.update(format!("qp {k} feasible {}\n", xs.join(" ")));
            }
            (SelectionOutcome::Infeasible { .. }, SelectionOutcome::Infeasible { .. }) => {
                report.qp_status_agree += 1;
                report.qp_xi_agree += 1;
                hasher.update(format!("qp {k} infeasible\n"));
            }
            _ => report.failures.push(format!(
                "qp {k}: solver feasible = {}, oracle feasible = {}",
                fast.is_feasible(),
                slow.is_feasible()
            )),
        }

        let (mu, nu) = random_uniform_pair(seed, k);
        match w2_squared(&mu, &nu) {
            Ok(w) => {
                let brute = w2_by_permutation(&mu.points, &nu.points);
                let diff = (w - brute).abs();
                report.w2_max_diff = report.w2_max_diff.max(diff);
                if diff <= W2_TOL {
                    report.w2_agree += 1;
                } else {
                    report.failures.push(format!("w2 {k}: {w} vs permutation {brute}"));
                }
                hasher.update(format!("w2 {k} {w:.12e}\n"));
            }
            Err(e) => report.failures.push(format!("w2 {k}: {e}")),
        }
    }
    report.digest = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
    report
}
