//! The simulated network defers a batch sent into a partition until the
//! link comes back, then delivers it after the usual latency.

use geoqod::qod::ContainerId;
use geoqod::replication::{ShipmentBatch, Trigger};
use geoqod::simnet::{LinkSpec, NetEvent, SimNet, Submission};
use geoqod::update::{ClusterId, Update};

fn main() -> geoqod::error::Result<()> {
    let (a, b) = (ClusterId(1), ClusterId(2));
    let mut net: SimNet<NetEvent> = SimNet::new(100);
    net.add_link(a, b, LinkSpec::new(10, vec![(100, 200)])?);

    let cid: ContainerId = "t:cf".parse()?;
    let batch = |seq: u64| {
        ShipmentBatch::new(seq, a, b, 0, Trigger::Sigma, vec![Update::new(cid.clone(), "k", "v", 0, a, seq, None)])
    };

    println!("t=0: {:?}", net.submit(batch(1))?);
    net.schedule(150, NetEvent::Retry(batch(2)));
    net.run_until_quiescent(|net, event| {
        match event {
            NetEvent::Retry(b) => {
                let outcome = net.submit(b)?;
                println!("t={}: submit -> {outcome:?}", net.now());
                if let Submission::Deferred { retry_at } = outcome {
                    println!("      link down, retry at {retry_at}");
                }
            }
            NetEvent::Deliver(b) => println!("t={}: delivered batch {}", net.now(), b.sequence),
        }
        Ok(())
    })?;
    for ((window, src, dst), w) in net.windows() {
        println!("window {window} {src}->{dst}: {} bytes in {} batch(es)", w.bytes, w.batches);
    }
    Ok(())
}
