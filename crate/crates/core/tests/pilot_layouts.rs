use std::path::PathBuf;

use sha2::{Digest, Sha256};
use tdsc::pilot_grid::{parse_layout, pattern_for, Standard};

const SIZES: [usize; 4] = [128, 512, 1024, 2048];

fn golden_path(standard: Standard, n: usize) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("data/pilots")
        .join(format!("{standard}_{n}.txt"))
}

fn cases() -> impl Iterator<Item = (Standard, usize)> {
    [Standard::Wimax, Standard::Lte]
        .into_iter()
        .flat_map(|s| SIZES.into_iter().map(move |n| (s, n)))
}

/// Rewrites the golden files; run with `--ignored` after an intended layout change.
#[test]
#[ignore]
fn regenerate_golden_layouts() {
    for (s, n) in cases() {
        std::fs::write(golden_path(s, n), pattern_for(s, n).unwrap().layout_text()).unwrap();
    }
}

#[test]
fn layouts_match_golden_files() {
    for (s, n) in cases() {
        let golden = std::fs::read_to_string(golden_path(s, n)).unwrap();
        let text = pattern_for(s, n).unwrap().layout_text();
        assert_eq!(
            hex(&Sha256::digest(text.as_bytes())),
            hex(&Sha256::digest(golden.as_bytes())),
            "{s} {n}"
        );
    }
}

#[test]
fn golden_checksums_are_frozen() {
    let expected = [
        ("wimax_128", WIMAX[0]),
        ("wimax_512", WIMAX[1]),
        ("wimax_1024", WIMAX[2]),
        ("wimax_2048", WIMAX[3]),
        ("lte_128", LTE[0]),
        ("lte_512", LTE[1]),
        ("lte_1024", LTE[2]),
        ("lte_2048", LTE[3]),
    ];
    for ((s, n), (name, sum)) in cases().zip(expected) {
        assert_eq!(format!("{s}_{n}"), name);
        let bytes = std::fs::read(golden_path(s, n)).unwrap();
        assert_eq!(hex(&Sha256::digest(&bytes)), sum, "{name}");
    }
}

#[test]
fn golden_files_parse_back_to_the_pattern() {
    for (s, n) in cases() {
        let p = pattern_for(s, n).unwrap();
        let layout = parse_layout(&std::fs::read_to_string(golden_path(s, n)).unwrap()).unwrap();
        assert_eq!((layout.standard, layout.fft_size), (s, n));
        assert_eq!(layout.configs.len(), p.period(), "{s} {n}");
        assert_eq!(layout.configs.as_slice(), p.configs(), "{s} {n}");
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

const WIMAX: [&str; 4] = [
    "1b3cedac1aad121e34bad1250e6aba682d7ca159791b046f44ffd26914679aa8",
    "b6a98c37ea26231b8f3b6b99a97c059b29fde6886e48120512a3ea07553e3f54",
    "f44c66ad15db8965d3a4bf8d1696d73a0ecf6b933ad1727b5c1cd0146c152f36",
    "5f60cf60c9c6149f681ec27e9670f66a46023b93a06b520a08dc9194991cbcdb",
];
const LTE: [&str; 4] = [
    "06d21724043bf90fafec095dfc59b2f8f7b10cb4be683999f322ef3a2ac3806e",
    "cc6ba4ca90b15507a1b3b119d4123f66df48d82704aefadde17390611428aa28",
    "f3a7259f414608bf6c41d64bcc084a0647a628d465ac5b1587e60ae14307875c",
    "3b3761da37fba4c1abb7b0484b7a1f00554bb910a9e0be80278b28039cf4c8ee",
];
