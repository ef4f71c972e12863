//! Two replicas receive the same conflicting writes in opposite orders and
//! still end with identical stores.

use geoqod::cluster::ClusterNode;
use geoqod::qod::ContainerId;
use geoqod::replication::{ShipmentBatch, Trigger};
use geoqod::update::{ClusterId, Update};

fn batch(dest: ClusterId, updates: Vec<Update>) -> ShipmentBatch {
    ShipmentBatch::new(1, ClusterId(9), dest, 0, Trigger::Immediate, updates)
}

fn main() -> geoqod::error::Result<()> {
    let cid: ContainerId = "users:profile".parse()?;
    let early = Update::new(cid.clone(), "alice", "v-early", 100, ClusterId(3), 1, None);
    let late = Update::new(cid.clone(), "alice", "v-late", 250, ClusterId(4), 1, None);

    let mut x = ClusterNode::new(ClusterId(1));
    let mut y = ClusterNode::new(ClusterId(2));
    x.apply_remote_batch(&batch(x.id(), vec![early.clone()]), 300)?;
    x.apply_remote_batch(&batch(x.id(), vec![late.clone()]), 301)?;
    let report = y.apply_remote_batch(&batch(y.id(), vec![late, early]), 300)?;
    println!("y applied {} and discarded {} (older)", report.applied, report.discarded);

    let value = |n: &ClusterNode| String::from_utf8_lossy(&n.get(&cid, "alice").unwrap().value).into_owned();
    println!("x: {}  y: {}", value(&x), value(&y));
    println!("digests equal: {}", x.store_digest() == y.store_digest());
    Ok(())
}
