//! Binary form of shipment batches, used for trace dumps and for byte
//! accounting. All integers are big-endian.
//!
//! ```text
//! batch   := len:u32 source:u32 destination:u32 created_at:u64 trigger:u8
//!            count:u32 sequence:u64 update*count
//! update  := container_len:u16 container key_len:u16 key value_len:u32 value
//!            timestamp:u64 origin:u32 sequence:u64 block_id:u64
//! ```
//!
//! `len` counts the bytes after itself. `block_id` is 0 outside blocks. The
//! encoded length of a batch always equals its `total_bytes`.

use std::io::{Read, Write};

use bytes::Bytes;

use crate::error::{Error, Result};
use crate::qod::ContainerId;
use crate::replication::{ShipmentBatch, Trigger};
use crate::update::{BlockId, ClusterId, Update};

pub const BATCH_HEADER_BYTES: u64 = 4 + 4 + 4 + 8 + 1 + 4 + 8;

pub fn encode_batch(batch: &ShipmentBatch) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(batch.total_bytes as usize);
    let body_len = u32::try_from(batch.total_bytes - 4).map_err(|_| Error::Wire("batch larger than 4 GiB".into()))?;
    out.extend_from_slice(&body_len.to_be_bytes());
    out.extend_from_slice(&batch.source_cluster.0.to_be_bytes());
    out.extend_from_slice(&batch.destination_cluster.0.to_be_bytes());
    out.extend_from_slice(&batch.created_at.to_be_bytes());
    out.push(batch.trigger.code());
    out.extend_from_slice(&(batch.updates.len() as u32).to_be_bytes());
    out.extend_from_slice(&batch.sequence.to_be_bytes());
    for u in &batch.updates {
        let container = u.container.as_str().as_bytes();
        let key = u.key.as_bytes();
        let container_len =
            u16::try_from(container.len()).map_err(|_| Error::Wire(format!("container `{}` too long", u.container)))?;
        let key_len = u16::try_from(key.len()).map_err(|_| Error::Wire(format!("key `{}` too long", u.key)))?;
        let value_len = u32::try_from(u.value.len()).map_err(|_| Error::Wire("value too long".into()))?;
        out.extend_from_slice(&container_len.to_be_bytes());
        out.extend_from_slice(container);
        out.extend_from_slice(&key_len.to_be_bytes());
        out.extend_from_slice(key);
        out.extend_from_slice(&value_len.to_be_bytes());
        out.extend_from_slice(&u.value);
        out.extend_from_slice(&u.wall_timestamp.to_be_bytes());
        out.extend_from_slice(&u.origin_cluster.0.to_be_bytes());
        out.extend_from_slice(&u.origin_sequence.to_be_bytes());
        out.extend_from_slice(&u.block_id.map_or(0, |b| b.0).to_be_bytes());
    }
    debug_assert_eq!(out.len() as u64, batch.total_bytes);
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(Error::Wire(format!("truncated: wanted {n} bytes, {} left", self.buf.len())));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn text(&mut self, n: usize) -> Result<&'a str> {
        std::str::from_utf8(self.take(n)?).map_err(|e| Error::Wire(e.to_string()))
    }
}

/// Decodes one batch from the front of `buf`, returning it with the number
/// of bytes consumed.
pub fn decode_batch(buf: &[u8]) -> Result<(ShipmentBatch, usize)> {
    let mut head = Cursor { buf };
    let body_len = head.u32()? as usize;
    let mut c = Cursor { buf: head.take(body_len)? };
    let source = ClusterId(c.u32()?);
    let destination = ClusterId(c.u32()?);
    let created_at = c.u64()?;
    let code = c.u8()?;
    let trigger = Trigger::from_code(code).ok_or_else(|| Error::Wire(format!("unknown trigger {code}")))?;
    let count = c.u32()?;
    let sequence = c.u64()?;
    let mut updates = Vec::with_capacity(count.min(1 << 16) as usize);
    for _ in 0..count {
        let n = c.u16()? as usize;
        let container: ContainerId = c.text(n)?.parse()?;
        let n = c.u16()? as usize;
        let key = c.text(n)?.to_owned();
        let n = c.u32()? as usize;
        let value = Bytes::copy_from_slice(c.take(n)?);
        let ts = c.u64()?;
        let origin = ClusterId(c.u32()?);
        let seq = c.u64()?;
        let block = match c.u64()? {
            0 => None,
            b => Some(BlockId(b)),
        };
        updates.push(Update::new(container, key, value, ts, origin, seq, block));
    }
    if !c.buf.is_empty() {
        return Err(Error::Wire(format!("{} trailing bytes in batch record", c.buf.len())));
    }
    let batch = ShipmentBatch::new(sequence, source, destination, created_at, trigger, updates);
    Ok((batch, 4 + body_len))
}

/// Appends batches to a trace stream.
pub fn write_trace<'a>(mut out: impl Write, batches: impl IntoIterator<Item = &'a ShipmentBatch>) -> Result<()> {
    for batch in batches {
        out.write_all(&encode_batch(batch)?)?;
    }
    Ok(())
}

pub fn read_trace(mut input: impl Read) -> Result<Vec<ShipmentBatch>> {
    let mut buf = Vec::new();
    input.read_to_end(&mut buf)?;
    let mut batches = Vec::new();
    let mut rest = &buf[..];
    while !rest.is_empty() {
        let (batch, used) = decode_batch(rest)?;
        batches.push(batch);
        rest = &rest[used..];
    }
    Ok(batches)
}
