//! Benchmark fixtures shared by the criterion benches.

use mni_core::verify::{generate_instances, SuiteInstance};

const SEED: u64 = 2024;

/// Random instances sorted by size so that benchmark ids are stable.
pub fn fixtures(count: usize) -> Vec<SuiteInstance> {
    let mut v = generate_instances(SEED, count);
    v.sort_by_key(|i| (i.op.m(), i.op.union_support().len(), i.id));
    v
}

/// The largest instance of `fixtures(count)`.
pub fn largest(count: usize) -> SuiteInstance {
    fixtures(count).pop().expect("count > 0")
}
