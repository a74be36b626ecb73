use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Byte closing every frame. Never produced by a sample's high byte, whose top nibble is zero.
pub const FRAME_TERMINATOR: u8 = 0xFF;
/// Exclusive upper bound of a 12-bit sample.
pub const SAMPLE_LIMIT: u16 = 1 << 12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("sample {value} at strip {strip} pad {pad} does not fit in 12 bits")]
    SampleRange { strip: usize, pad: usize, value: u16 },
    #[error("frame shape {strips}x{pads} does not match {len} samples")]
    Shape { strips: usize, pads: usize, len: usize },
    #[error("expected {expected} bytes, got {actual}")]
    Length { expected: usize, actual: usize },
    #[error("missing terminator, found {found:#04x}")]
    Terminator { found: u8 },
    #[error("reserved high bits set at byte offset {offset}")]
    ReservedBits { offset: usize },
}

/// One scan of the pad array, stored strip-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PressureFrame {
    pub n_strips: usize,
    pub pads_per_strip: usize,
    pub samples: Vec<u16>,
    /// Position in the capture; not part of the wire format.
    #[serde(default)]
    pub sequence: u64,
}

impl PressureFrame {
    pub fn zeroed(n_strips: usize, pads_per_strip: usize) -> Self {
        Self {
            n_strips,
            pads_per_strip,
            samples: vec![0; n_strips * pads_per_strip],
            sequence: 0,
        }
    }

    pub fn get(&self, strip: usize, pad: usize) -> u16 {
        self.samples[strip * self.pads_per_strip + pad]
    }

    pub fn set(&mut self, strip: usize, pad: usize, value: u16) {
        self.samples[strip * self.pads_per_strip + pad] = value;
    }

    pub fn encoded_len(&self) -> usize {
        encoded_len(self.n_strips, self.pads_per_strip)
    }
}

pub(crate) fn encoded_len(n_strips: usize, pads_per_strip: usize) -> usize {
    n_strips * pads_per_strip * 2 + 1
}

/// Big-endian 16-bit words, strip by strip, pad by pad, then [`FRAME_TERMINATOR`].
pub fn encode_frame(frame: &PressureFrame) -> Result<Vec<u8>, FrameError> {
    let count = frame.n_strips * frame.pads_per_strip;
    if frame.samples.len() != count {
        return Err(FrameError::Shape {
            strips: frame.n_strips,
            pads: frame.pads_per_strip,
            len: frame.samples.len(),
        });
    }
    let mut out = Vec::with_capacity(count * 2 + 1);
    for (i, &value) in frame.samples.iter().enumerate() {
        if value >= SAMPLE_LIMIT {
            return Err(FrameError::SampleRange {
                strip: i / frame.pads_per_strip,
                pad: i % frame.pads_per_strip,
                value,
            });
        }
        out.extend_from_slice(&value.to_be_bytes());
    }
    out.push(FRAME_TERMINATOR);
    Ok(out)
}

pub fn decode_frame(
    bytes: &[u8],
    n_strips: usize,
    pads_per_strip: usize,
) -> Result<PressureFrame, FrameError> {
    let expected = encoded_len(n_strips, pads_per_strip);
    if bytes.len() != expected {
        return Err(FrameError::Length {
            expected,
            actual: bytes.len(),
        });
    }
    let last = bytes[expected - 1];
    if last != FRAME_TERMINATOR {
        return Err(FrameError::Terminator { found: last });
    }
    let samples = bytes[..expected - 1]
        .chunks_exact(2)
        .enumerate()
        .map(|(i, pair)| {
            if pair[0] & 0xF0 != 0 {
                Err(FrameError::ReservedBits { offset: 2 * i })
            } else {
                Ok(u16::from_be_bytes([pair[0], pair[1]]))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PressureFrame {
        n_strips,
        pads_per_strip,
        samples,
        sequence: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_frame_layout() {
        let bytes = encode_frame(&PressureFrame::zeroed(8, 16)).unwrap();
        assert_eq!(bytes.len(), 257);
        assert!(bytes[..256].iter().all(|&b| b == 0));
        assert_eq!(bytes[256], 0xFF);
    }

    #[test]
    fn twelve_bit_ceiling_packs_big_endian() {
        let mut f = PressureFrame::zeroed(8, 16);
        f.set(0, 0, 4095);
        let bytes = encode_frame(&f).unwrap();
        assert_eq!(&bytes[..2], &[0x0F, 0xFF]);
    }

    #[test]
    fn oversized_sample_rejected() {
        let mut f = PressureFrame::zeroed(8, 16);
        f.set(2, 5, 4096);
        assert_eq!(
            encode_frame(&f),
            Err(FrameError::SampleRange { strip: 2, pad: 5, value: 4096 })
        );
        let f = PressureFrame { samples: vec![0; 3], ..PressureFrame::zeroed(8, 16) };
        assert!(matches!(encode_frame(&f), Err(FrameError::Shape { .. })));
    }

    #[test]
    fn malformed_inputs() {
        let good = encode_frame(&PressureFrame::zeroed(8, 16)).unwrap();
        assert_eq!(
            decode_frame(&good[..256], 8, 16),
            Err(FrameError::Length { expected: 257, actual: 256 })
        );
        let mut bad = good.clone();
        bad[256] = 0x00;
        assert_eq!(decode_frame(&bad, 8, 16), Err(FrameError::Terminator { found: 0 }));
        let mut bad = good.clone();
        bad[10] = 0x10;
        assert_eq!(decode_frame(&bad, 8, 16), Err(FrameError::ReservedBits { offset: 10 }));
        assert_eq!(decode_frame(&good, 8, 16).unwrap(), PressureFrame::zeroed(8, 16));
    }
}
