use proptest::prelude::*;
use sloshlab::telemetry::{decode_frame, encode_frame, FrameError, PressureFrame, FRAME_TERMINATOR, SAMPLE_LIMIT};

fn frame() -> impl Strategy<Value = PressureFrame> {
    (1usize..=12, 1usize..=20).prop_flat_map(|(s, p)| {
        prop::collection::vec(0..SAMPLE_LIMIT, s * p).prop_map(move |samples| PressureFrame {
            n_strips: s,
            pads_per_strip: p,
            samples,
            sequence: 0,
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn round_trip(f in frame()) {
        let bytes = encode_frame(&f).unwrap();
        prop_assert_eq!(bytes.len(), 2 * f.samples.len() + 1);
        prop_assert_eq!(bytes[bytes.len() - 1], FRAME_TERMINATOR);
        prop_assert_eq!(decode_frame(&bytes, f.n_strips, f.pads_per_strip).unwrap(), f);
    }
}

proptest! {
    #[test]
    fn truncation_is_a_length_error(f in frame(), cut in 1usize..8) {
        let bytes = encode_frame(&f).unwrap();
        let cut = cut.min(bytes.len());
        let err = decode_frame(&bytes[..bytes.len() - cut], f.n_strips, f.pads_per_strip).unwrap_err();
        prop_assert!(matches!(err, FrameError::Length { .. }), "unexpected {:?}", err);
    }

    #[test]
    fn high_nibble_is_reserved(f in frame(), pick in any::<prop::sample::Index>(), nib in 1u8..16) {
        let mut bytes = encode_frame(&f).unwrap();
        let i = pick.index(f.samples.len());
        bytes[2 * i] |= nib << 4;
        let err = decode_frame(&bytes, f.n_strips, f.pads_per_strip).unwrap_err();
        prop_assert_eq!(err, FrameError::ReservedBits { offset: 2 * i });
    }

    #[test]
    fn oversized_samples_rejected(f in frame(), pick in any::<prop::sample::Index>(), v in SAMPLE_LIMIT..=u16::MAX) {
        let mut f = f;
        let i = pick.index(f.samples.len());
        f.samples[i] = v;
        let err = encode_frame(&f).unwrap_err();
        let hit = matches!(err, FrameError::SampleRange { value, .. } if value == v);
        prop_assert!(hit, "unexpected {:?}", err);
    }
}

#[test]
fn terminator_and_shape_errors() {
    let mut bytes = encode_frame(&PressureFrame::zeroed(8, 16)).unwrap();
    bytes[256] = 0xFE;
    assert_eq!(decode_frame(&bytes, 8, 16).unwrap_err(), FrameError::Terminator { found: 0xFE });

    let mut f = PressureFrame::zeroed(8, 16);
    f.samples.push(0);
    assert!(matches!(encode_frame(&f).unwrap_err(), FrameError::Shape { strips: 8, pads: 16, len: 129 }));
}

#[test]
fn reference_frame_layout() {
    let mut f = PressureFrame::zeroed(8, 16);
    f.set(7, 15, 0x0ABC);
    f.set(0, 1, 1);
    let bytes = encode_frame(&f).unwrap();
    assert_eq!(bytes.len(), 257);
    assert_eq!(&bytes[2..4], &[0x00, 0x01]);
    assert_eq!(&bytes[254..257], &[0x0A, 0xBC, 0xFF]);
}
