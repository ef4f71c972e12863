//! A source with an update-count bound of 3 ships every third write.

use std::sync::Arc;

use geoqod::qod::{ContainerId, VectorK};
use geoqod::replication::{BoundsTable, ReplicationSource, ShippingMode};
use geoqod::update::{ClusterId, Update};

fn main() -> geoqod::error::Result<()> {
    let users: ContainerId = "users:profile".parse()?;
    let bounds = BoundsTable::default().with(users.clone(), VectorK::with_sigma(3));
    let mut source =
        ReplicationSource::new(ClusterId(1), ClusterId(2), Arc::new(bounds), ShippingMode::Qod { theta_tick_ms: 100 });

    for seq in 1..=7 {
        let update = Update::new(users.clone(), format!("user{seq}"), "x", seq * 10, ClusterId(1), seq, None);
        match source.offer(update, seq * 10)? {
            Some(batch) => println!(
                "write {seq}: shipped {} updates ({:?}, {} bytes)",
                batch.len(),
                batch.trigger,
                batch.total_bytes
            ),
            None => println!("write {seq}: held, counter {}", source.state(&users).unwrap().actual_sigma),
        }
    }
    for batch in source.final_drain(100) {
        println!("final drain: {} updates", batch.len());
    }
    Ok(())
}
