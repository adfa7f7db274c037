//! Minimal classic-pcap writer for raw IPv4 packets (linktype 101).

use std::io::Write;

use crate::prober::MeasurementRecord;

const MAGIC: u32 = 0xa1b2_c3d4;
const LINKTYPE_RAW: u32 = 101;

pub fn write_pcap_header<W: Write>(w: &mut W) -> std::io::Result<()> {
    w.write_all(&MAGIC.to_le_bytes())?;
    w.write_all(&2u16.to_le_bytes())?;
    w.write_all(&4u16.to_le_bytes())?;
    w.write_all(&0i32.to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    w.write_all(&65535u32.to_le_bytes())?;
    w.write_all(&LINKTYPE_RAW.to_le_bytes())
}

pub fn write_pcap_packet<W: Write>(w: &mut W, timestamp: f64, data: &[u8]) -> std::io::Result<()> {
    let secs = timestamp.floor() as u32;
    let usecs = ((timestamp - timestamp.floor()) * 1e6).round() as u32;
    w.write_all(&secs.to_le_bytes())?;
    w.write_all(&usecs.min(999_999).to_le_bytes())?;
    w.write_all(&(data.len() as u32).to_le_bytes())?;
    w.write_all(&(data.len() as u32).to_le_bytes())?;
    w.write_all(data)
}

/// All packets of all records, in record order.
pub fn write_records_pcap<W: Write>(
    records: &[MeasurementRecord],
    w: &mut W,
) -> std::io::Result<()> {
    write_pcap_header(w)?;
    for rec in records {
        for ev in &rec.packets {
            write_pcap_packet(w, ev.timestamp, &ev.bytes())?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_packet_layout() {
        let mut buf = Vec::new();
        write_pcap_header(&mut buf).unwrap();
        assert_eq!(buf.len(), 24);
        assert_eq!(&buf[0..4], &MAGIC.to_le_bytes());
        assert_eq!(&buf[20..24], &LINKTYPE_RAW.to_le_bytes());
        write_pcap_packet(&mut buf, 1.5, &[0x45, 0x00]).unwrap();
        assert_eq!(buf.len(), 24 + 16 + 2);
        assert_eq!(&buf[24..28], &1u32.to_le_bytes());
        assert_eq!(&buf[28..32], &500_000u32.to_le_bytes());
        assert_eq!(&buf[32..36], &2u32.to_le_bytes());
    }
}
