//! On-disk formats: MNIST IDX, distilled data (`DDXD`), parameter pools
//! (`DDPV`) and PGM image export. All multi-byte DDXD/DDPV fields are
//! little-endian; IDX headers are big-endian.

use std::fs;
use std::io;
use std::path::Path;

use distill_core::distillation::{DistilledData, DistilledStep, StepTargets};
use distill_core::models::{ModelSpec, ParamVector};
use distill_core::{LabeledDataset, Tensor};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
pub const DDXD_MAGIC: &[u8; 4] = b"DDXD";
pub const DDXD_VERSION: u32 = 1;
pub const DDPV_MAGIC: &[u8; 4] = b"DDPV";
pub const DDPV_VERSION: u32 = 1;

/// Label value stored for learned regression targets, whose values follow
/// the pixels in the same step record.
const REGRESSION_LABEL: u16 = u16::MAX;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{what}: bad magic {found:#010x}, expected {expected:#010x}")]
    BadMagic {
        what: &'static str,
        found: u32,
        expected: u32,
    },
    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("{what}: file truncated")]
    TruncatedFile { what: &'static str },
    #[error("{what}: unsupported version {version}")]
    Version { what: &'static str, version: u32 },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] distill_core::Error),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

pub type Result<T> = std::result::Result<T, FormatError>;

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Sequential reader over a byte slice that reports truncation.
struct Cursor<'a> {
    bytes: &'a [u8],
    what: &'static str,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(FormatError::TruncatedFile { what: self.what });
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u32_be(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u16_le(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(
            self.take(2)?.try_into().expect("2 bytes"),
        ))
    }

    fn u32_le(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64_le(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let len = n
            .checked_mul(8)
            .ok_or(FormatError::TruncatedFile { what: self.what })?;
        Ok(self
            .take(len)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn finish(&self) -> Result<()> {
        if self.bytes.is_empty() {
            Ok(())
        } else {
            Err(FormatError::Invalid(format!(
                "{}: {} trailing bytes",
                self.what,
                self.bytes.len()
            )))
        }
    }
}

/// Raw IDX image file: `(count, rows, cols, pixels)`.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<u8>)> {
    let mut c = Cursor {
        bytes,
        what: "idx images",
    };
    let magic = c.u32_be()?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(FormatError::BadMagic {
            what: "idx images",
            found: magic,
            expected: IDX_IMAGES_MAGIC,
        });
    }
    let (n, rows, cols) = (
        c.u32_be()? as usize,
        c.u32_be()? as usize,
        c.u32_be()? as usize,
    );
    let pixels = c.take(n * rows * cols)?.to_vec();
    Ok((n, rows, cols, pixels))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let mut c = Cursor {
        bytes,
        what: "idx labels",
    };
    let magic = c.u32_be()?;
    if magic != IDX_LABELS_MAGIC {
        return Err(FormatError::BadMagic {
            what: "idx labels",
            found: magic,
            expected: IDX_LABELS_MAGIC,
        });
    }
    let n = c.u32_be()? as usize;
    Ok(c.take(n)?.to_vec())
}

/// Images scaled by 1/255 and flattened row-major; `num_classes` is the
/// largest label plus one, at least 10.
pub fn decode_idx(images: &[u8], labels: &[u8]) -> Result<LabeledDataset> {
    decode_idx_with_classes(images, labels, None)
}

/// As [`decode_idx`], with an explicit class count when given.
pub fn decode_idx_with_classes(
    images: &[u8],
    labels: &[u8],
    num_classes: Option<usize>,
) -> Result<LabeledDataset> {
    let (n, rows, cols, pixels) = parse_idx_images(images)?;
    let labels = parse_idx_labels(labels)?;
    if labels.len() != n {
        return Err(FormatError::CountMismatch {
            images: n,
            labels: labels.len(),
        });
    }
    let x = Tensor::matrix(
        n,
        rows * cols,
        pixels.iter().map(|&p| p as f64 / 255.0).collect(),
    )?;
    let labels: Vec<usize> = labels.iter().map(|&l| l as usize).collect();
    let classes =
        num_classes.unwrap_or_else(|| labels.iter().max().map_or(10, |&m| (m + 1).max(10)));
    Ok(LabeledDataset::new(x, labels, classes)?)
}

pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<LabeledDataset> {
    decode_idx(&read_file(images_path)?, &read_file(labels_path)?)
}

pub fn load_idx_with_classes(
    images_path: &Path,
    labels_path: &Path,
    num_classes: Option<usize>,
) -> Result<LabeledDataset> {
    decode_idx_with_classes(
        &read_file(images_path)?,
        &read_file(labels_path)?,
        num_classes,
    )
}

/// Encode `(count, rows, cols)` u8 images as IDX bytes.
pub fn encode_idx_images(rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    let n = pixels.len() / (rows * cols).max(1);
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IDX_IMAGES_MAGIC, n as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Write a dataset with pixels in `[0, 1]` as an IDX pair of square images.
pub fn save_idx(data: &LabeledDataset, images_path: &Path, labels_path: &Path) -> Result<()> {
    let side = distill_core::data::integer_sqrt(data.dim()).ok_or_else(|| {
        FormatError::Invalid(format!("image dimension {} is not square", data.dim()))
    })?;
    let pixels: Vec<u8> = data
        .inputs()
        .data()
        .iter()
        .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    let labels: Vec<u8> = data
        .labels()
        .iter()
        .map(|&l| {
            u8::try_from(l)
                .map_err(|_| FormatError::Invalid(format!("label {l} does not fit in u8")))
        })
        .collect::<Result<_>>()?;
    write_file(images_path, &encode_idx_images(side, side, &pixels))?;
    write_file(labels_path, &encode_idx_labels(&labels))
}

/// Layout: magic, version u32, S u32, E u32; per step M u32, D u32, M u16
/// labels, M*D f64 pixels, and for regression steps M f64 targets; then
/// S*E f64 raw rates (row-major `S x E`).
pub fn encode_distilled(data: &DistilledData) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(DDXD_MAGIC);
    out.extend_from_slice(&DDXD_VERSION.to_le_bytes());
    out.extend_from_slice(&(data.num_steps() as u32).to_le_bytes());
    out.extend_from_slice(&(data.num_epochs() as u32).to_le_bytes());
    for step in &data.steps {
        let (m, d) = step.inputs.dims2("encode_distilled")?;
        out.extend_from_slice(&(m as u32).to_le_bytes());
        out.extend_from_slice(&(d as u32).to_le_bytes());
        match &step.targets {
            StepTargets::Classes(labels) => {
                for &l in labels {
                    let l = u16::try_from(l)
                        .ok()
                        .filter(|&l| l != REGRESSION_LABEL)
                        .ok_or_else(|| {
                            FormatError::Invalid(format!("label {l} does not fit in u16"))
                        })?;
                    out.extend_from_slice(&l.to_le_bytes());
                }
            }
            StepTargets::Values(_) => {
                for _ in 0..m {
                    out.extend_from_slice(&REGRESSION_LABEL.to_le_bytes());
                }
            }
        }
        step.inputs
            .data()
            .iter()
            .for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        if let StepTargets::Values(t) = &step.targets {
            t.data()
                .iter()
                .for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        }
    }
    data.lr_raw
        .data()
        .iter()
        .for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
    Ok(out)
}

pub fn decode_distilled(bytes: &[u8]) -> Result<DistilledData> {
    let mut c = Cursor {
        bytes,
        what: "distilled data",
    };
    let magic = c.take(4)?;
    if magic != DDXD_MAGIC {
        return Err(FormatError::BadMagic {
            what: "distilled data",
            found: u32::from_be_bytes(magic.try_into().expect("4 bytes")),
            expected: u32::from_be_bytes(*DDXD_MAGIC),
        });
    }
    let version = c.u32_le()?;
    if version != DDXD_VERSION {
        return Err(FormatError::Version {
            what: "distilled data",
            version,
        });
    }
    let (s, e) = (c.u32_le()? as usize, c.u32_le()? as usize);
    let mut steps = Vec::with_capacity(s);
    for _ in 0..s {
        let (m, d) = (c.u32_le()? as usize, c.u32_le()? as usize);
        let labels: Vec<u16> = (0..m).map(|_| c.u16_le()).collect::<Result<_>>()?;
        let inputs = Tensor::matrix(m, d, c.f64s(m * d)?)?;
        let regression = m > 0 && labels.iter().all(|&l| l == REGRESSION_LABEL);
        let targets = if regression {
            StepTargets::Values(Tensor::matrix(m, 1, c.f64s(m)?)?)
        } else if labels.contains(&REGRESSION_LABEL) {
            return Err(FormatError::Invalid(
                "step mixes class labels and regression targets".into(),
            ));
        } else {
            StepTargets::Classes(labels.iter().map(|&l| l as usize).collect())
        };
        steps.push(DistilledStep { inputs, targets });
    }
    let lr_raw = Tensor::matrix(s, e, c.f64s(s * e)?)?;
    c.finish()?;
    Ok(DistilledData { steps, lr_raw })
}

pub fn save_distilled(data: &DistilledData, path: &Path) -> Result<()> {
    write_file(path, &encode_distilled(data)?)
}

pub fn load_distilled(path: &Path) -> Result<DistilledData> {
    decode_distilled(&read_file(path)?)
}

/// Layout: magic, version u32, count u32, then per vector a u64 length and
/// that many f64 values.
pub fn encode_pool(pool: &[ParamVector]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(DDPV_MAGIC);
    out.extend_from_slice(&DDPV_VERSION.to_le_bytes());
    out.extend_from_slice(&(pool.len() as u32).to_le_bytes());
    for p in pool {
        out.extend_from_slice(&(p.len() as u64).to_le_bytes());
        p.flat()
            .data()
            .iter()
            .for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
    }
    out
}

/// Decode a pool and attach `model`'s layout to every vector.
pub fn decode_pool(bytes: &[u8], model: &ModelSpec) -> Result<Vec<ParamVector>> {
    let mut c = Cursor {
        bytes,
        what: "parameter pool",
    };
    let magic = c.take(4)?;
    if magic != DDPV_MAGIC {
        return Err(FormatError::BadMagic {
            what: "parameter pool",
            found: u32::from_be_bytes(magic.try_into().expect("4 bytes")),
            expected: u32::from_be_bytes(*DDPV_MAGIC),
        });
    }
    let version = c.u32_le()?;
    if version != DDPV_VERSION {
        return Err(FormatError::Version {
            what: "parameter pool",
            version,
        });
    }
    let count = c.u32_le()? as usize;
    let expected = model.num_params();
    let mut pool = Vec::with_capacity(count);
    for i in 0..count {
        let len = c.u64_le()? as usize;
        if len != expected {
            return Err(FormatError::Invalid(format!(
                "pool entry {i} has {len} values, the model needs {expected}"
            )));
        }
        pool.push(ParamVector::new(c.f64s(len)?, model.layout())?);
    }
    c.finish()?;
    Ok(pool)
}

pub fn save_pool(pool: &[ParamVector], path: &Path) -> Result<()> {
    write_file(path, &encode_pool(pool))
}

pub fn load_pool(path: &Path, model: &ModelSpec) -> Result<Vec<ParamVector>> {
    decode_pool(&read_file(path)?, model)
}

/// Binary PGM (`P5`, maxval 255), min-max normalized; a constant image maps
/// to all zeros.
pub fn encode_pgm(pixels: &[f64], width: usize, height: usize) -> Result<Vec<u8>> {
    if pixels.len() != width * height {
        return Err(FormatError::Invalid(format!(
            "{} pixels for a {width}x{height} image",
            pixels.len()
        )));
    }
    let lo = pixels.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = pixels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(pixels.iter().map(|&v| {
        if range > 0.0 {
            ((v - lo) / range * 255.0).round() as u8
        } else {
            0
        }
    }));
    Ok(out)
}

/// Write one PGM per distilled image as `step{s}_img{i}_label{y}.pgm`;
/// returns the paths written.
pub fn export_pgms(data: &DistilledData, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| FormatError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut written = Vec::new();
    for (s, step) in data.steps.iter().enumerate() {
        let (m, d) = step.inputs.dims2("export_pgms")?;
        let side = distill_core::data::integer_sqrt(d)
            .ok_or_else(|| FormatError::Invalid(format!("image dimension {d} is not square")))?;
        for i in 0..m {
            let label = match &step.targets {
                StepTargets::Classes(l) => l[i].to_string(),
                StepTargets::Values(_) => "value".into(),
            };
            let path = dir.join(format!("step{s:02}_img{i:03}_label{label}.pgm"));
            write_file(&path, &encode_pgm(step.inputs.row(i), side, side)?)?;
            written.push(path);
        }
    }
    Ok(written)
}
