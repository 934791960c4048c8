//! EPOS event records.
//!
//! Each record is 44 bytes, big-endian: nine `f32` fields
//! (`x y z mz tof v_dc det_x det_y reserved`) followed by two `u32`
//! fields (`pulse_delta multiplicity`). The reserved float is read and
//! discarded; the writer emits `0.0` in its place.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EPOS_RECORD_LEN: usize = 44;

/// One reconstructed detection event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IonEvent {
    /// Reconstructed position (nm).
    pub x: f32,
    pub y: f32,
    pub z: f32,
    /// Mass-to-charge ratio (Da).
    pub mz: f32,
    /// Time of flight (ns).
    pub tof: f32,
    /// Standing voltage (kV).
    pub v_dc: f32,
    /// Detector hit position (mm).
    pub det_x: f32,
    pub det_y: f32,
    /// Pulses elapsed since the previous event; 0 marks a same-pulse follower.
    pub pulse_delta: u32,
    /// Ions recorded on this pulse.
    pub multiplicity: u32,
}

impl IonEvent {
    pub fn position(&self) -> [f64; 3] {
        [self.x as f64, self.y as f64, self.z as f64]
    }

    pub fn detector(&self) -> [f64; 2] {
        [self.det_x as f64, self.det_y as f64]
    }

    /// Checks the record invariants (`mz >= 0`, `multiplicity >= 1`, finite fields).
    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.float_fields() {
            if !v.is_finite() {
                return Err(Error::invalid(format!("ion event field `{name}` is not finite")));
            }
        }
        if self.mz < 0.0 {
            return Err(Error::invalid(format!("negative mass-to-charge {}", self.mz)));
        }
        if self.multiplicity == 0 {
            return Err(Error::invalid("multiplicity must be at least 1"));
        }
        Ok(())
    }

    fn float_fields(&self) -> [(&'static str, f32); 8] {
        [
            ("x", self.x),
            ("y", self.y),
            ("z", self.z),
            ("mz", self.mz),
            ("tof", self.tof),
            ("v_dc", self.v_dc),
            ("det_x", self.det_x),
            ("det_y", self.det_y),
        ]
    }

    fn encode(&self, out: &mut [u8; EPOS_RECORD_LEN]) {
        let floats = [
            self.x, self.y, self.z, self.mz, self.tof, self.v_dc, self.det_x, self.det_y, 0.0,
        ];
        for (i, f) in floats.iter().enumerate() {
            out[i * 4..i * 4 + 4].copy_from_slice(&f.to_be_bytes());
        }
        out[36..40].copy_from_slice(&self.pulse_delta.to_be_bytes());
        out[40..44].copy_from_slice(&self.multiplicity.to_be_bytes());
    }

    fn decode(rec: &[u8], index: usize) -> Result<Self> {
        let f = |i: usize| f32::from_be_bytes([rec[i * 4], rec[i * 4 + 1], rec[i * 4 + 2], rec[i * 4 + 3]]);
        let u = |o: usize| u32::from_be_bytes([rec[o], rec[o + 1], rec[o + 2], rec[o + 3]]);
        let ev = IonEvent {
            x: f(0),
            y: f(1),
            z: f(2),
            mz: f(3),
            tof: f(4),
            v_dc: f(5),
            det_x: f(6),
            det_y: f(7),
            pulse_delta: u(36),
            multiplicity: u(40),
        };
        if let Some((field, _)) = ev.float_fields().into_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { record: index, field });
        }
        Ok(ev)
    }
}

/// Decodes an EPOS byte stream into events in file order.
pub fn parse_epos(bytes: &[u8]) -> Result<Vec<IonEvent>> {
    let rem = bytes.len() % EPOS_RECORD_LEN;
    if rem != 0 {
        return Err(Error::TruncatedRecord {
            offset: bytes.len() - rem,
            len: bytes.len(),
        });
    }
    bytes
        .chunks_exact(EPOS_RECORD_LEN)
        .enumerate()
        .map(|(i, rec)| IonEvent::decode(rec, i))
        .collect()
}

pub fn read_epos(path: impl AsRef<Path>) -> Result<Vec<IonEvent>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_epos(&bytes)
}

pub fn write_epos<W: Write>(mut w: W, events: &[IonEvent]) -> std::io::Result<()> {
    let mut buf = [0u8; EPOS_RECORD_LEN];
    for ev in events {
        ev.encode(&mut buf);
        w.write_all(&buf)?;
    }
    w.flush()
}

pub fn write_epos_file(path: impl AsRef<Path>, events: &[IonEvent]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_epos(BufWriter::new(file), events).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> IonEvent {
        IonEvent {
            x: 1.0,
            y: -2.5,
            z: 33.25,
            mz: 106.909,
            tof: 812.0,
            v_dc: 4.2,
            det_x: 10.5,
            det_y: -3.0,
            pulse_delta: 7,
            multiplicity: 2,
        }
    }

    fn encode_all(events: &[IonEvent]) -> Vec<u8> {
        let mut out = Vec::new();
        write_epos(&mut out, events).unwrap();
        out
    }

    #[test]
    fn empty_stream() {
        assert!(parse_epos(&[]).unwrap().is_empty());
    }

    #[test]
    fn single_record_round_trip() {
        let ev = sample();
        let bytes = encode_all(&[ev]);
        assert_eq!(bytes.len(), 44);
        let back = parse_epos(&bytes).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].x.to_bits(), 1.0f32.to_bits());
        assert_eq!(back[0].mz.to_bits(), 106.909f32.to_bits());
        assert_eq!(back[0].multiplicity, 2);
        assert_eq!(back[0], ev);
    }

    #[test]
    fn big_endian_layout() {
        let bytes = encode_all(&[sample()]);
        assert_eq!(&bytes[0..4], &1.0f32.to_be_bytes());
        assert_eq!(&bytes[32..36], &0.0f32.to_be_bytes());
        assert_eq!(&bytes[36..40], &[0, 0, 0, 7]);
        assert_eq!(&bytes[40..44], &[0, 0, 0, 2]);
    }

    #[test]
    fn truncated_record_offset() {
        let mut bytes = encode_all(&[sample()]);
        bytes.push(0);
        match parse_epos(&bytes) {
            Err(Error::TruncatedRecord { offset, len }) => {
                assert_eq!(offset, 44);
                assert_eq!(len, 45);
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn non_finite_reports_record_index() {
        let mut ev = sample();
        let ok = encode_all(&[ev]);
        ev.det_y = f32::NAN;
        let mut bytes = ok.clone();
        bytes.extend(encode_all(&[ev]));
        bytes.extend(ok);
        match parse_epos(&bytes) {
            Err(Error::NonFinite { record, field }) => {
                assert_eq!(record, 1);
                assert_eq!(field, "det_y");
            }
            other => panic!("expected non-finite error, got {other:?}"),
        }
    }

    #[test]
    fn reserved_field_is_ignored() {
        let mut bytes = encode_all(&[sample()]);
        bytes[32..36].copy_from_slice(&123.0f32.to_be_bytes());
        assert_eq!(parse_epos(&bytes).unwrap()[0], sample());
    }

    #[test]
    fn validate_invariants() {
        assert!(sample().validate().is_ok());
        let mut ev = sample();
        ev.multiplicity = 0;
        assert!(ev.validate().is_err());
        let mut ev = sample();
        ev.mz = -1.0;
        assert!(ev.validate().is_err());
    }
}
