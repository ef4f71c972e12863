//! Each dimension of the bound vector on its own: time, pending count and
//! numeric divergence.

use std::sync::Arc;

use geoqod::qod::{ContainerId, VectorK};
use geoqod::replication::{BoundsTable, ReplicationSource, ShippingMode};
use geoqod::update::{ClusterId, Update};

fn source(bound: VectorK, cid: &ContainerId) -> ReplicationSource {
    let bounds = BoundsTable::default().with(cid.clone(), bound);
    ReplicationSource::new(ClusterId(1), ClusterId(2), Arc::new(bounds), ShippingMode::Qod { theta_tick_ms: 100 })
}

fn main() -> geoqod::error::Result<()> {
    let cid: ContainerId = "sensors:temp".parse()?;
    let write = |seq: u64, value: &str, at: u64| {
        Update::new(cid.clone(), "probe", value.to_owned(), at, ClusterId(1), seq, None)
    };

    // θ = 1 s: nothing ships on arrival, the periodic check ships it.
    let mut timed = source(VectorK::with_theta(1000), &cid);
    timed.offer(write(1, "20.0", 0), 0)?;
    for now in (100..=1200).step_by(100) {
        for batch in timed.theta_tick(now) {
            println!("theta: {} update(s) shipped at {now} ms", batch.len());
        }
    }

    // ν = 5: ships once the value moves 5 away from what was last shipped.
    // A key needs a shipped baseline first.
    let mut drifting = source(VectorK::new(0, 0, 5.0)?, &cid);
    drifting.offer(write(1, "20.0", 1), 1)?;
    println!("nu: baseline 20.0 shipped by drain: {}", drifting.final_drain(1).len() == 1);
    for (seq, v) in [(2, "21.5"), (3, "24.0"), (4, "25.5"), (5, "27.0"), (6, "31.0")] {
        let shipped = drifting.offer(write(seq, v, seq), seq)?;
        println!("nu: value {v} -> {}", if shipped.is_some() { "shipped" } else { "held" });
    }

    // All dimensions off: every write ships at once.
    let mut eager = source(VectorK::immediate(), &cid);
    let batch = eager.offer(write(1, "1", 0), 0)?.expect("immediate");
    println!("immediate: batch of {} ({:?})", batch.len(), batch.trigger);
    Ok(())
}
