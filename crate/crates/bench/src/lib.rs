//! Criterion benchmarks for `rc-lab-core`; see `benches/`.
