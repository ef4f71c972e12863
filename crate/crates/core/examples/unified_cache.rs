//! The unified cache keeps pending updates per container and drains whole
//! containers, pulling in every container that shares a block.

use geoqod::cache::UnifiedCache;
use geoqod::qod::ContainerId;
use geoqod::update::{BlockId, ClusterId, Update};

fn main() -> geoqod::error::Result<()> {
    let a: ContainerId = "shop:orders".parse()?;
    let b: ContainerId = "shop:stock".parse()?;
    let c: ContainerId = "shop:audit".parse()?;
    let block = Some(BlockId::new(ClusterId(1), 1));
    let mut cache = UnifiedCache::new();
    let mut seq = 0;
    let mut add = |cid: &ContainerId, key: &str, block| {
        seq += 1;
        cache.enqueue(Update::new(cid.clone(), key, "v", seq, ClusterId(1), seq, block))
    };
    add(&a, "o1", None)?;
    add(&a, "o2", block)?;
    add(&b, "s1", block)?;
    add(&c, "x1", None)?;

    println!(
        "pending: {} over {:?}",
        cache.pending_total(),
        cache.pending_containers().map(|c| c.as_str()).collect::<Vec<_>>()
    );
    let drain = cache.drain_closure([a.clone()]);
    println!(
        "draining {a} also drained {:?}: {} updates, {} bytes",
        drain.containers.iter().map(|c| c.as_str()).collect::<Vec<_>>(),
        drain.updates.len(),
        drain.total_bytes()
    );
    println!("left behind: {} in {c}", cache.pending_count(&c));
    Ok(())
}
