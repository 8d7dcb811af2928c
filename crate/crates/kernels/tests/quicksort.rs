use std::collections::HashMap;

use proptest::prelude::*;
use stratsched_core::{Scheduler, SchedulerConfig};
use stratsched_kernels::quicksort::{self, QuicksortParams};
use stratsched_kernels::{hierarchy, Exec, KernelMode};

fn sched(threads: usize) -> Scheduler {
    Scheduler::new(SchedulerConfig::with_threads(threads), hierarchy()).unwrap()
}

fn histogram(v: &[u64]) -> HashMap<u64, usize> {
    let mut h = HashMap::new();
    for &x in v {
        *h.entry(x).or_insert(0) += 1;
    }
    h
}

fn check(input: &[u64], threads: usize, params: QuicksortParams, mode: KernelMode) {
    let mut v = input.to_vec();
    quicksort::run(&sched(threads), Exec::Parallel, &mut v, params, mode);
    assert!(v.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(histogram(&v), histogram(input));
}

#[test]
fn tiny_inputs() {
    for input in [vec![], vec![7], vec![3, 1, 2], vec![2, 2, 2, 1]] {
        check(&input, 2, QuicksortParams::default(), KernelMode::Strategy);
    }
}

#[test]
fn million_elements() {
    for (seed, distinct) in [(1, true), (2, false)] {
        let input = quicksort::generate(1_000_000, seed, distinct);
        let mut expected = input.clone();
        expected.sort();
        for threads in [1, 4] {
            let mut v = input.clone();
            quicksort::run(&sched(threads), Exec::Parallel, &mut v, QuicksortParams::default(), KernelMode::Strategy);
            assert_eq!(v, expected);
        }
    }
}

#[test]
fn sorted_and_reversed_inputs() {
    let up: Vec<u64> = (0..100_000).collect();
    let down: Vec<u64> = (0..100_000).rev().collect();
    for input in [up, down] {
        check(&input, 2, QuicksortParams::default(), KernelMode::LifoFifo);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn sorts_anything(input in proptest::collection::vec(0u64..50, 0..2000), cutoff in 0usize..40, threads in 1usize..4) {
        check(&input, threads, QuicksortParams { cutoff, block: 8 }, KernelMode::Strategy);
    }
}
