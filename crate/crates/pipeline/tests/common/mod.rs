#![allow(dead_code)]

use pomh_core::synthgen::{gen_cohort, GeneratorSpec};
use pomh_pipeline::prepared::PreparedCohort;

pub fn cohort(spec: &GeneratorSpec, n: usize, seed: u64) -> PreparedCohort {
    let c = gen_cohort(spec, n, 0.12, seed).expect("cohort");
    PreparedCohort::new(c.children).expect("prepare")
}

pub fn planted(n: usize, seed: u64) -> PreparedCohort {
    cohort(&GeneratorSpec::calibrated(), n, seed)
}
