//! Random model generators shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use wirehead::pomdp::{DominanceSpec, FinitePomdp, RewardMaps};

pub struct Generated {
    pub pomdp: FinitePomdp,
    pub rewards: RewardMaps,
    pub spec: DominanceSpec,
}

fn simplex<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    // Sparse rows now and then, so point masses get exercised too.
    let keep = if rng.gen_bool(0.3) {
        rng.gen_range(1..=n)
    } else {
        n
    };
    let mut row: Vec<f64> = (0..n)
        .map(|i| {
            if i < keep {
                rng.gen::<f64>() + 1e-3
            } else {
                0.0
            }
        })
        .collect();
    for i in (1..n).rev() {
        row.swap(i, rng.gen_range(0..=i));
    }
    let sum: f64 = row.iter().sum();
    row.iter().map(|x| x / sum).collect()
}

/// Unconstrained model with `|S| <= 5`, `|A| <= 6`, `|O| <= 5`.
pub fn random_pomdp<R: Rng>(rng: &mut R, discount: f64) -> (FinitePomdp, RewardMaps) {
    let ns = rng.gen_range(1..=5);
    let na = rng.gen_range(1..=6);
    let no = rng.gen_range(1..=5);
    let t = (0..ns)
        .map(|_| (0..na).map(|_| simplex(rng, ns)).collect())
        .collect();
    let o = (0..ns)
        .map(|_| (0..na).map(|_| simplex(rng, no)).collect())
        .collect();
    let pomdp = FinitePomdp::new(t, o, discount).unwrap();
    let rewards = RewardMaps::new(
        (0..no).map(|_| rng.gen()).collect(),
        (0..ns).map(|_| rng.gen()).collect(),
    )
    .unwrap();
    (pomdp, rewards)
}

/// Model built to satisfy the dominance premises at `r_task`.
///
/// Observation 0 pays 1 and observation 1 pays 0. The wirehead action emits
/// only reward-1 observations; each task action's observation row is mixed
/// toward observation 1 until its expected reward is at most `r_task`,
/// which lands exactly on `r_task` whenever mixing was needed.
pub fn dominance_pomdp<R: Rng>(rng: &mut R, discount: f64, r_task: f64) -> Generated {
    let ns = rng.gen_range(1..=5);
    let na = rng.gen_range(2..=6);
    let no = rng.gen_range(2..=5);
    let aw = rng.gen_range(0..na);
    let mut implemented = vec![1.0, 0.0];
    implemented.extend((2..no).map(|_| if rng.gen_bool(0.2) { 1.0 } else { rng.gen() }));
    let top: Vec<usize> = (0..no).filter(|&i| implemented[i] == 1.0).collect();

    let t = (0..ns)
        .map(|_| (0..na).map(|_| simplex(rng, ns)).collect())
        .collect();
    let o = (0..ns)
        .map(|_| {
            (0..na)
                .map(|a| {
                    if a == aw {
                        let mut row = vec![0.0; no];
                        let w = simplex(rng, top.len());
                        for (k, &i) in top.iter().enumerate() {
                            row[i] = w[k];
                        }
                        row
                    } else {
                        let mut row = simplex(rng, no);
                        let e: f64 = row.iter().zip(&implemented).map(|(p, r)| p * r).sum();
                        if e > r_task {
                            let lambda = (e - r_task) / e;
                            for p in row.iter_mut() {
                                *p *= 1.0 - lambda;
                            }
                            row[1] += lambda;
                        }
                        row
                    }
                })
                .collect()
        })
        .collect();
    let pomdp = FinitePomdp::new(t, o, discount).unwrap();
    let rewards = RewardMaps::new(implemented, (0..ns).map(|_| rng.gen()).collect()).unwrap();
    let task = (0..na).filter(|&a| a != aw).collect();
    let spec = DominanceSpec::new(task, aw, r_task).unwrap();
    Generated {
        pomdp,
        rewards,
        spec,
    }
}
