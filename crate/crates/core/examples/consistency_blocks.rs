//! Consistency blocks: an IMMEDIATE block ships as soon as it ends, an ANY
//! block waits for the first bound trip among its containers and then ships
//! whole.

use std::sync::Arc;

use geoqod::blocks::{BlockMode, ClientSession};
use geoqod::cluster::ClusterNode;
use geoqod::qod::{ContainerId, VectorK};
use geoqod::replication::{BoundsTable, ReplicationSource, ShippingMode};
use geoqod::update::ClusterId;

fn main() -> geoqod::error::Result<()> {
    let orders: ContainerId = "shop:orders".parse()?;
    let stock: ContainerId = "shop:stock".parse()?;
    let bounds = BoundsTable::default()
        .with(orders.clone(), VectorK::with_sigma(3))
        .with(stock.clone(), VectorK::with_sigma(10));
    let (a, b) = (ClusterId(1), ClusterId(2));
    let mut node = ClusterNode::new(a);
    node.add_source(ReplicationSource::new(a, b, Arc::new(bounds), ShippingMode::Qod { theta_tick_ms: 100 }));
    let mut session = ClientSession::new(a);

    session.start_consistent_block(BlockMode::Immediate)?;
    session.put(&mut node, &orders, "order-1", "placed", 0)?;
    session.put(&mut node, &stock, "sku-9", "41", 0)?;
    for batch in session.end_consistent_block(&mut node, 1)? {
        println!("IMMEDIATE block: {} updates at t=1 ({:?})", batch.len(), batch.trigger);
    }

    session.start_consistent_block(BlockMode::Any)?;
    session.put(&mut node, &orders, "order-2", "placed", 5)?;
    session.put(&mut node, &stock, "sku-9", "40", 5)?;
    println!("ANY block ended, shipped: {}", session.end_consistent_block(&mut node, 6)?.len());
    for t in 7..10 {
        let shipped = session.put(&mut node, &orders, &format!("order-{t}"), "placed", t)?;
        for batch in shipped {
            println!(
                "orders bound tripped at t={t}: {} updates in one batch, blocks {:?}",
                batch.len(),
                batch.block_ids()
            );
        }
    }
    Ok(())
}
