use std::path::Path;

use trd_cli::modelfile::{model_from_json, model_to_json};
use trd_cli::pgm::{decode_pgm, encode_pgm, load_pgm};
use trd_core::influence::{RbfConfig, RbfKind};
use trd_core::model::{init_model, ModelConfig, Task};

fn fixtures() -> Vec<std::path::PathBuf> {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    let mut out = Vec::new();
    for sub in ["train", "holdout"] {
        for e in std::fs::read_dir(root.join(sub)).unwrap() {
            let p = e.unwrap().path();
            if p.extension().is_some_and(|x| x == "pgm") {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

#[test]
fn canonical_fixtures_round_trip_bytewise() {
    let files = fixtures();
    assert_eq!(files.len(), 6);
    for p in files {
        let bytes = std::fs::read(&p).unwrap();
        let img = load_pgm(&p).unwrap();
        assert_eq!(encode_pgm(&img).unwrap(), bytes, "{}", p.display());
    }
}

#[test]
fn ascii_and_binary_forms_agree() {
    let p = &fixtures()[0];
    let img = load_pgm(p).unwrap();
    let (h, w) = img.dims();
    let mut ascii = format!("P2\n# converted\n{w} {h}\n255\n");
    for row in 0..h {
        let line: Vec<String> = img.row(row).iter().map(|v| format!("{}", *v as u8)).collect();
        ascii.push_str(&line.join(" "));
        ascii.push('\n');
    }
    assert_eq!(decode_pgm(ascii.as_bytes()).unwrap(), img);
}

#[test]
fn wide_maxval_is_rejected() {
    let err = decode_pgm(b"P2\n2 1\n65535\n0 65535\n").unwrap_err();
    assert!(err.to_string().contains("65535"), "{err}");
}

#[test]
fn saved_intensities_are_clamped_and_rounded() {
    let img = trd_core::Image::new(1, 5, vec![-3.0, 0.5, 1.49, 254.5, 300.0]).unwrap();
    let bytes = encode_pgm(&img).unwrap();
    assert_eq!(&bytes[bytes.len() - 5..], &[0, 1, 1, 255, 255]);
}

#[test]
fn model_json_round_trip_and_text_is_stable() {
    let model = init_model(&ModelConfig {
        task: Task::Deblock { quality: 20 },
        stages: 2,
        filter_size: 5,
        filters: 6,
        rbf: RbfConfig::new(RbfKind::Triangular, 9, 120.0).unwrap(),
    })
    .unwrap();
    let text = model_to_json(&model).unwrap();
    let back = model_from_json(&text).unwrap();
    assert_eq!(back, model);
    assert_eq!(model_to_json(&back).unwrap(), text);
    assert!(model_from_json(&text.replace("\"version\":1", "\"version\":99")).is_err());
}
