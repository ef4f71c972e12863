//! Key popularity under the zipfian generator, next to the exact
//! probabilities, plus the deterministic read/write interleave.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use geoqod::workload::{Operation, WorkloadSpec, Zipfian};

fn main() -> geoqod::error::Result<()> {
    let zipf = Zipfian::new(1000, 0.99)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let draws = 1_000_000;
    let mut counts: HashMap<u64, u64> = HashMap::new();
    for _ in 0..draws {
        *counts.entry(zipf.sample(&mut rng)).or_default() += 1;
    }
    println!("rank  expected  observed");
    for rank in 0..5 {
        let observed = counts.get(&rank).copied().unwrap_or(0) as f64 / draws as f64;
        println!("{rank:>4}  {:.5}   {observed:.5}", zipf.probability(rank));
    }

    let spec = WorkloadSpec { total_operations: 10, write_fraction: 0.5, ..WorkloadSpec::default() };
    let kinds: String = spec
        .generate()?
        .map(|op| match op {
            Operation::Read { .. } => 'R',
            Operation::Write { .. } => 'W',
            Operation::Block(_) => 'B',
        })
        .collect();
    println!("50/50 interleave: {kinds}");
    Ok(())
}
