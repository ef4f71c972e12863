//! Encodes batches in the wire format, shows the header layout, and reads a
//! trace back.

use geoqod::qod::ContainerId;
use geoqod::replication::{ShipmentBatch, Trigger};
use geoqod::update::{BlockId, ClusterId, Update};
use geoqod::wire::{decode_batch, encode_batch, read_trace, write_trace, BATCH_HEADER_BYTES};

fn main() -> geoqod::error::Result<()> {
    let cid: ContainerId = "users:profile".parse()?;
    let (a, b) = (ClusterId(1), ClusterId(2));
    let updates = vec![
        Update::new(cid.clone(), "alice", "42", 1000, a, 1, None),
        Update::new(cid.clone(), "bob", "7", 1001, a, 2, Some(BlockId::new(a, 1))),
    ];
    let batch = ShipmentBatch::new(1, a, b, 1005, Trigger::Sigma, updates);
    let bytes = encode_batch(&batch)?;
    println!("batch: {} bytes (header {BATCH_HEADER_BYTES}), total_bytes {}", bytes.len(), batch.total_bytes);
    println!("header: {}", hex::encode(&bytes[..BATCH_HEADER_BYTES as usize]));
    let (decoded, used) = decode_batch(&bytes)?;
    println!("decoded {} updates from {used} bytes, equal: {}", decoded.len(), decoded == batch);

    let mut trace = Vec::new();
    write_trace(&mut trace, [&batch, &batch])?;
    println!("trace of {} bytes holds {} batches", trace.len(), read_trace(&trace[..])?.len());
    Ok(())
}
