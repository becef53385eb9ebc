//! Shared fixtures for the benchmarks in `benches/`.
use opuc::verblunsky::default_precision;
use opuc::Potential;

/// One point of the GWW(2) ladder: potential, `n`, largest index and starting precision.
pub struct Case {
    pub potential: Potential,
    pub n: usize,
    pub kmax: usize,
    pub precision: u32,
}

pub fn gww2_case(n: usize) -> Case {
    Case {
        potential: Potential::gww(2.0),
        n,
        kmax: n + 6,
        precision: default_precision(n),
    }
}
