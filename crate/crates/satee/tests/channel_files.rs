use proptest::prelude::*;
use satee::channel_file::{format_channel, parse_channel};
use satee::{load_channel, save_channel, ChannelFileError};
use satee_core::channel::{generate_channel, ChannelMatrix, GeometryConfig, UserLayout};
use satee_core::linalg::CMat;
use satee_core::Complex64;

#[test]
fn saved_32_by_16_channel_loads_identically() {
    let mut g = GeometryConfig::ka_band_geo(16);
    g.rng_seed = 5;
    let layout = UserLayout::uniform_in_beams(&g, 2, Some(&[2, 2, 1, 2, 2, 2, 0, 2, 2, 2, 2, 2, 2, 2, 2, 1])).unwrap();
    let h = generate_channel(&g, &layout, 5).unwrap();
    assert_eq!((h.num_users(), h.num_feeds()), (32, 16));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.txt");
    save_channel(&path, &h).unwrap();
    let back = load_channel(&path, 2).unwrap();
    assert_eq!(back.entries(), h.entries());
    assert_eq!(back.virtual_mask(), h.virtual_mask());
    assert_eq!(back.users_per_beam(), 2);
}

#[test]
fn missing_file_is_an_io_error() {
    let err = load_channel(std::path::Path::new("/nonexistent/h.txt"), 1).unwrap_err();
    assert!(matches!(err, ChannelFileError::Io(_)));
}

#[test]
fn extra_rows_are_a_row_count_error() {
    let text = "1 1\n1.0 0.0\n2.0 0.0\n0\n";
    assert!(matches!(
        parse_channel(text, 1),
        Err(ChannelFileError::RowCount { expected: 1, found: 2 })
    ));
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e3f64..1e3,
        (-300i32..300, -1.0f64..1.0).prop_map(|(e, m)| m * 10f64.powi(e)),
        Just(0.0),
        Just(-0.0),
    ]
}

proptest! {
    #[test]
    fn round_trip_is_bit_exact(k in 1usize..6, m in 1usize..5, seed in proptest::collection::vec(finite(), 60)) {
        let data: Vec<Complex64> = (0..k * m)
            .map(|i| Complex64::new(seed[(2 * i) % 60], seed[(2 * i + 1) % 60]))
            .collect();
        let h = ChannelMatrix::from_entries(CMat::from_rows(k, m, data).unwrap(), 1).unwrap();
        let back = parse_channel(&format_channel(&h), 1).unwrap();
        for r in 0..k {
            for c in 0..m {
                let (a, b) = (h.entries()[(r, c)], back.entries()[(r, c)]);
                prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
                prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
            }
        }
    }
}
