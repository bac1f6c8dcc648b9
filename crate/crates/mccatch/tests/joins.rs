//! Join exactness against quadratic enumeration, across whole radii
//! ladders and payload kinds, plus the index-level runtime slope.

use std::time::Instant;

use mccatch::synth::{CloudKind, CloudSpec, SplitMix64};
use mccatch::{MetricSpace, MetricTree, RadiiSchedule};

fn random_vectors(seed: u64, n: usize, dim: usize) -> MetricSpace {
    let mut rng = SplitMix64::new(seed);
    let rows = (0..n)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    if rng.next_u64() % 4 == 0 {
                        rng.next_f64() * 3.0
                    } else {
                        0.5 + 0.1 * rng.next_gaussian()
                    }
                })
                .collect()
        })
        .collect();
    MetricSpace::vectors(rows, 2.0).unwrap()
}

fn random_words(seed: u64, n: usize) -> MetricSpace {
    let mut rng = SplitMix64::new(seed);
    let words = (0..n)
        .map(|_| {
            let len = 2 + (rng.next_u64() % 9) as usize;
            (0..len)
                .map(|_| char::from(b'a' + (rng.next_u64() % 6) as u8))
                .collect()
        })
        .collect();
    MetricSpace::words(words).unwrap()
}

fn ladder(space: &MetricSpace, tree: &MetricTree) -> RadiiSchedule {
    let l = tree.estimate_diameter(space).unwrap();
    RadiiSchedule::new(l, 15).unwrap()
}

/// Counts from the tree must equal quadratic counting at every rung of
/// a 15-step ladder, over fifty datasets of both payload kinds.
#[test]
fn self_join_counts_are_exact_at_every_rung() {
    for k in 0..50u64 {
        let space = if k % 5 == 4 {
            random_words(900 + k, 500)
        } else {
            let dim = [2, 5, 10][(k % 3) as usize];
            let n = 200 + (SplitMix64::new(k).next_u64() % 1800) as usize;
            random_vectors(100 + k, n, dim)
        };
        let n = space.len();
        let tree = MetricTree::build(&space).unwrap();
        let schedule = ladder(&space, &tree);
        for e in 1..=schedule.len() {
            let r = schedule.radius(e);
            let counts = tree.count_self_join(&space, r, None);
            for q in (0..n).step_by(7) {
                let want = (0..n).filter(|&j| space.distance(q, j) <= r).count();
                assert_eq!(counts[q], want, "dataset {k} rung {e} query {q}");
            }
        }
    }
}

/// Pair joins enumerate exactly the close pairs at every rung.
#[test]
fn pair_joins_are_exact_at_every_rung() {
    for k in 0..12u64 {
        let space = if k % 4 == 3 {
            random_words(700 + k, 300)
        } else {
            random_vectors(300 + k, 400, [2, 5, 10][(k % 3) as usize])
        };
        let n = space.len();
        let tree = MetricTree::build(&space).unwrap();
        let schedule = ladder(&space, &tree);
        for e in 1..=schedule.len() {
            let r = schedule.radius(e);
            let got = tree.pair_self_join(&space, r);
            let mut want = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    if space.distance(i, j) <= r {
                        want.push((i, j));
                    }
                }
            }
            assert_eq!(got, want, "dataset {k} rung {e}");
        }
    }
}

/// Cross joins over random splits match quadratic counting, including
/// the everyone-in-range regime.
#[test]
fn cross_joins_are_exact_at_every_rung() {
    for k in 0..15u64 {
        let space = random_vectors(500 + k, 600, [2, 5, 10][(k % 3) as usize]);
        let mut rng = SplitMix64::new(k);
        let (mut queries, mut targets) = (Vec::new(), Vec::new());
        for i in 0..space.len() {
            if rng.next_u64() % 3 == 0 {
                queries.push(i);
            } else {
                targets.push(i);
            }
        }
        let qt = MetricTree::build_subset(&space, queries.clone(), 32).unwrap();
        let tt = MetricTree::build_subset(&space, targets.clone(), 32).unwrap();
        let full = MetricTree::build(&space).unwrap();
        let schedule = ladder(&space, &full);
        for e in (1..=schedule.len()).step_by(2) {
            let r = schedule.radius(e);
            let counts = tt.count_cross_join(&space, &qt, r);
            for (pos, &q) in queries.iter().enumerate() {
                let want = targets
                    .iter()
                    .filter(|&&j| space.distance(q, j) <= r)
                    .count();
                assert_eq!(counts[pos], want, "dataset {k} rung {e} query {q}");
            }
        }
        // Queries drawn from the target set, radius covering everything.
        let sub = MetricTree::build_subset(&space, targets[..40].to_vec(), 32).unwrap();
        let all = tt.count_cross_join(&space, &sub, schedule.last() * 2.0);
        assert!(all.iter().all(|&c| c == targets.len()));
    }
}

/// Build plus one self-join over uniform 2-d data stays clearly
/// subquadratic: fitted log-log slope below 1.9 across 10k..160k.
#[test]
fn build_and_join_slope_is_subquadratic() {
    let sizes = [10_000usize, 20_000, 40_000, 80_000, 160_000];
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (k, &n) in sizes.iter().enumerate() {
        let rows = mccatch::synth::generate_cloud(&CloudSpec {
            kind: CloudKind::Uniform,
            dim: 2,
            count: n,
            seed: 77 + k as u64,
        })
        .unwrap();
        let space = MetricSpace::vectors(rows, 2.0).unwrap();
        let mut best = f64::INFINITY;
        for _ in 0..3 {
            let start = Instant::now();
            let tree = MetricTree::build(&space).unwrap();
            let l = tree.estimate_diameter(&space).unwrap();
            let counts = tree.count_self_join(&space, l / 16.0, None);
            std::hint::black_box(&counts);
            best = best.min(start.elapsed().as_secs_f64());
        }
        xs.push((n as f64).ln());
        ys.push(best.ln());
    }
    let slope = mccatch::eval::fit_slope(&xs, &ys);
    println!("build+join slope: {slope:.3}");
    assert!(slope < 1.9, "slope {slope:.3} is not subquadratic enough");
}
