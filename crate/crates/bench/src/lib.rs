//! Criterion benchmarks for the forecasting engine live under `benches/`.
