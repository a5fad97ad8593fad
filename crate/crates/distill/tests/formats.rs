use distill::formats::*;
use distill_core::distillation::{DistilledData, DistilledStep, StepTargets};
use distill_core::models::{sample_init, InitKind, InitSpec, ModelSpec};
use distill_core::{LabeledDataset, Tensor};

/// Two 2x2 images written out byte by byte.
fn fixture() -> (Vec<u8>, Vec<u8>) {
    let images = vec![
        0x00, 0x00, 0x08, 0x03, // magic
        0x00, 0x00, 0x00, 0x02, // count
        0x00, 0x00, 0x00, 0x02, // rows
        0x00, 0x00, 0x00, 0x02, // cols
        0, 255, 51, 102, // image 0
        255, 0, 0, 204, // image 1
    ];
    let labels = vec![0x00, 0x00, 0x08, 0x01, 0x00, 0x00, 0x00, 0x02, 7, 3];
    (images, labels)
}

#[test]
fn idx_fixture_decodes_exactly() {
    let (images, labels) = fixture();
    let d = decode_idx(&images, &labels).unwrap();
    assert_eq!(d.inputs().shape(), &[2, 4]);
    assert_eq!(d.inputs().data(), &[0.0, 1.0, 0.2, 0.4, 1.0, 0.0, 0.0, 0.8]);
    assert_eq!(d.labels(), &[7, 3]);
    assert_eq!(d.num_classes(), 10);
}

#[test]
fn idx_fixture_round_trips_through_files() {
    let (images, labels) = fixture();
    let dir = tempfile::tempdir().unwrap();
    let (ip, lp) = (dir.path().join("img"), dir.path().join("lbl"));
    let d = decode_idx(&images, &labels).unwrap();
    save_idx(&d, &ip, &lp).unwrap();
    assert_eq!(std::fs::read(&ip).unwrap(), images);
    assert_eq!(std::fs::read(&lp).unwrap(), labels);
    assert_eq!(load_idx(&ip, &lp).unwrap(), d);
}

#[test]
fn idx_errors() {
    let (images, mut labels) = fixture();
    let mut bad = labels.clone();
    bad[3] = 0x03;
    assert!(matches!(
        decode_idx(&images, &bad),
        Err(FormatError::BadMagic { .. })
    ));
    assert!(matches!(
        decode_idx(&images[..images.len() - 1], &labels),
        Err(FormatError::TruncatedFile { .. })
    ));
    labels[7] = 1;
    labels.pop();
    assert!(matches!(
        decode_idx(&images, &labels),
        Err(FormatError::CountMismatch {
            images: 2,
            labels: 1
        })
    ));
}

fn sample_distilled() -> DistilledData {
    DistilledData {
        steps: vec![
            DistilledStep {
                inputs: Tensor::matrix(2, 3, vec![0.5, -1.25, 3.0, 1e-300, f64::MAX, -0.0])
                    .unwrap(),
                targets: StepTargets::Classes(vec![4, 1]),
            },
            DistilledStep {
                inputs: Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap(),
                targets: StepTargets::Classes(vec![0, 9]),
            },
        ],
        lr_raw: Tensor::matrix(2, 3, vec![-50.0, 0.1, 2.0, 3.0, 4.0, 50.0]).unwrap(),
    }
}

#[test]
fn distilled_round_trip_and_layout() {
    let d = sample_distilled();
    let bytes = encode_distilled(&d).unwrap();
    assert_eq!(&bytes[..4], b"DDXD");
    assert_eq!(
        u32::from_le_bytes(bytes[4..8].try_into().unwrap()),
        DDXD_VERSION
    );
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
    assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 3);
    // step 0 header: M=2, D=3, labels 4 and 1 as u16
    assert_eq!(&bytes[16..28], &[2, 0, 0, 0, 3, 0, 0, 0, 4, 0, 1, 0]);
    let expected_len = 16 + 2 * (8 + 2 * 2 + 6 * 8) + 6 * 8;
    assert_eq!(bytes.len(), expected_len);
    let back = decode_distilled(&bytes).unwrap();
    assert_eq!(encode_distilled(&back).unwrap(), bytes);
    assert_eq!(back.steps[0].targets, d.steps[0].targets);
    assert_eq!(back.lr_raw, d.lr_raw);
}

#[test]
fn distilled_regression_targets_round_trip() {
    let d = DistilledData {
        steps: vec![DistilledStep {
            inputs: Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap(),
            targets: StepTargets::Values(Tensor::matrix(2, 1, vec![0.5, -0.5]).unwrap()),
        }],
        lr_raw: Tensor::matrix(1, 1, vec![0.3]).unwrap(),
    };
    let back = decode_distilled(&encode_distilled(&d).unwrap()).unwrap();
    assert_eq!(back, d);
}

#[test]
fn distilled_rejects_damage() {
    let bytes = encode_distilled(&sample_distilled()).unwrap();
    assert!(matches!(
        decode_distilled(&bytes[..bytes.len() - 3]),
        Err(FormatError::TruncatedFile { .. })
    ));
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(matches!(
        decode_distilled(&extra),
        Err(FormatError::Invalid(_))
    ));
    let mut magic = bytes;
    magic[0] = b'X';
    assert!(matches!(
        decode_distilled(&magic),
        Err(FormatError::BadMagic { .. })
    ));
}

#[test]
fn pool_round_trip() {
    let model = ModelSpec::Mlp {
        dim: 3,
        hidden: 2,
        classes: 2,
    };
    let spec = InitSpec::new(InitKind::RandomXavier, 1);
    let pool: Vec<_> = (0..3)
        .map(|i| sample_init(&spec, &model, i).unwrap())
        .collect();
    let bytes = encode_pool(&pool);
    assert_eq!(&bytes[..4], b"DDPV");
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
    assert_eq!(
        u64::from_le_bytes(bytes[12..20].try_into().unwrap()),
        model.num_params() as u64
    );
    assert_eq!(bytes.len(), 12 + 3 * (8 + 8 * model.num_params()));
    assert_eq!(decode_pool(&bytes, &model).unwrap(), pool);
    let other = ModelSpec::Mlp {
        dim: 4,
        hidden: 2,
        classes: 2,
    };
    assert!(decode_pool(&bytes, &other).is_err());
}

#[test]
fn pgm_is_min_max_normalized() {
    let pgm = encode_pgm(&[-1.0, 0.0, 1.0, 3.0], 2, 2).unwrap();
    let header = b"P5\n2 2\n255\n";
    assert_eq!(&pgm[..header.len()], header);
    // (v + 1) / 4 * 255 rounded
    assert_eq!(&pgm[header.len()..], &[0, 64, 128, 255]);
    let flat = encode_pgm(&[0.7; 4], 2, 2).unwrap();
    assert_eq!(&flat[header.len()..], &[0, 0, 0, 0]);
    assert!(encode_pgm(&[0.0; 3], 2, 2).is_err());
}

#[test]
fn export_writes_one_file_per_image() {
    let d = DistilledData {
        steps: vec![DistilledStep {
            inputs: Tensor::matrix(2, 4, vec![0.0, 1.0, 2.0, 3.0, 3.0, 2.0, 1.0, 0.0]).unwrap(),
            targets: StepTargets::Classes(vec![0, 1]),
        }],
        lr_raw: Tensor::matrix(1, 1, vec![0.0]).unwrap(),
    };
    let dir = tempfile::tempdir().unwrap();
    let written = export_pgms(&d, dir.path()).unwrap();
    assert_eq!(written.len(), 2);
    assert!(written[1]
        .file_name()
        .unwrap()
        .to_string_lossy()
        .contains("label1"));
    let bytes = std::fs::read(&written[0]).unwrap();
    assert!(bytes.starts_with(b"P5\n2 2\n255\n"));
}

#[test]
fn full_mnist_when_available() {
    let dir = std::env::var("DD_MNIST_DIR").unwrap_or_else(|_| "/root/data/mnist".into());
    let dir = std::path::Path::new(&dir);
    let train_images = dir.join("train-images-idx3-ubyte");
    if !train_images.exists() {
        eprintln!("MNIST not found under {}; skipping", dir.display());
        return;
    }
    let train: LabeledDataset =
        load_idx(&train_images, &dir.join("train-labels-idx1-ubyte")).unwrap();
    let test = load_idx(
        &dir.join("t10k-images-idx3-ubyte"),
        &dir.join("t10k-labels-idx1-ubyte"),
    )
    .unwrap();
    assert_eq!((train.len(), test.len()), (60000, 10000));
    assert_eq!(train.dim(), 784);
    for c in train.class_counts() {
        assert!((5400..=7000).contains(&c));
    }
}
