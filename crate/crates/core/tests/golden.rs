//! Generator outputs pinned from a reference run. Any change to the stream
//! layout, the RNG conversions or the generator arithmetic shows up here.

use std::fs;

use robeval::imagegen::{generate_dataset, generate_image, GenerateOptions, Source};
use robeval::{GeneratorKind, ImageTensor, Shape};

const SEED: u64 = 7;

fn ramp() -> ImageTensor {
    ImageTensor::from_fn(8, 8, 1, |y, x, _| (y * 8 + x) as f64 / 63.0).unwrap()
}

fn shape(s: &str) -> Shape {
    s.parse().unwrap()
}

#[test]
fn phase_on_ramp() {
    let src = ramp();
    let out = generate_image(
        GeneratorKind::Phase,
        SEED,
        0,
        Some(&src),
        src.shape(),
        &GenerateOptions::default(),
    );
    #[rustfmt::skip]
    let expected: [u8; 64] = [
        87, 83, 74, 83, 61, 64, 79, 87,
        87, 83, 75, 83, 61, 65, 79, 87,
        54, 50, 42, 50, 28, 32, 46, 54,
        82, 78, 69, 78, 56, 59, 74, 82,
        223, 219, 210, 219, 197, 200, 215, 223,
        255, 255, 255, 255, 255, 255, 255, 255,
        120, 116, 108, 116, 94, 98, 112, 120,
        163, 159, 151, 159, 137, 141, 155, 163,
    ];
    assert_eq!(out.to_bytes(), expected);
    let sum: f64 = out.data().iter().sum();
    assert!((sum - 31.481066440271).abs() < 1e-6, "{sum}");
}

#[test]
fn scramble_two_by_two() {
    let src = ImageTensor::new(2, 2, 1, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    let out = generate_image(
        GeneratorKind::Scramble,
        SEED,
        0,
        Some(&src),
        src.shape(),
        &GenerateOptions::default(),
    );
    assert_eq!(out.data(), &[0.2, 0.3, 0.4, 0.1]);
}

#[test]
fn blobs_eight_by_eight() {
    let out = generate_image(
        GeneratorKind::Blobs,
        SEED,
        0,
        None,
        shape("8x8x1"),
        &GenerateOptions::default(),
    );
    #[rustfmt::skip]
    let expected: [u8; 64] = [
        229, 215, 193, 0, 0, 0, 0, 0,
        216, 204, 0, 0, 0, 0, 0, 0,
        196, 0, 0, 0, 0, 0, 0, 0,
        0, 0, 0, 0, 193, 197, 197, 196,
        0, 0, 0, 195, 206, 212, 212, 208,
        0, 0, 192, 202, 214, 221, 219, 214,
        0, 0, 200, 212, 223, 230, 229, 225,
        0, 0, 205, 220, 232, 238, 238, 235,
    ];
    assert_eq!(out.to_bytes(), expected);
    let sum: f64 = out.data().iter().sum();
    assert!((sum - 27.525529152224).abs() < 1e-6, "{sum}");
}

#[test]
fn uniform_first_values() {
    let out = generate_image(
        GeneratorKind::Uniform,
        SEED,
        0,
        None,
        shape("2x2x1"),
        &GenerateOptions::default(),
    );
    assert_eq!(
        out.data(),
        &[
            0.5751433439306962,
            0.6963170704625027,
            0.09746857157338606,
            0.27494258068649424
        ]
    );
}

#[test]
fn ordinals_are_independent_streams() {
    let o = GenerateOptions::default();
    let a = generate_image(GeneratorKind::Uniform, SEED, 0, None, shape("4x4x1"), &o);
    let b = generate_image(GeneratorKind::Uniform, SEED, 1, None, shape("4x4x1"), &o);
    let blobs0 = generate_image(GeneratorKind::Blobs, SEED, 0, None, shape("4x4x1"), &o);
    assert_ne!(a, b);
    assert_ne!(a.data(), blobs0.data());
}

#[test]
fn dataset_files_are_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let source = Source::Synthetic {
        shape: shape("16x16x3"),
        count: 6,
    };
    let run = |name: &str| {
        let out = dir.path().join(name);
        generate_dataset(GeneratorKind::Blobs, &source, SEED, &out, &GenerateOptions::default()).unwrap();
        (0..6)
            .map(|i| fs::read(out.join(format!("{i:06}.png"))).unwrap())
            .collect::<Vec<_>>()
    };
    assert_eq!(run("a"), run("b"));
}
