//! MNIST / CIFAR-10 ingestion.
//!
//! Readers for the two raw binary formats:
//!
//! * MNIST IDX: big-endian, image magic `0x00000803`, label magic
//!   `0x00000801`, payload of raw unsigned bytes.
//! * CIFAR-10 binary: 3073-byte records, one label byte followed by 3072
//!   pixel bytes in R/G/B plane order.
//!
//! Pixels are normalized to `[0, 1]` by dividing by 255. The training files
//! are split into train/validation deterministically in file order: the last
//! 5,000 records become the validation set.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::scalar::{cast, Scalar};

pub const MNIST_IMAGE_MAGIC: u32 = 0x0000_0803;
pub const MNIST_LABEL_MAGIC: u32 = 0x0000_0801;
pub const CIFAR_RECORD_BYTES: usize = 3073;
/// Records held out from the end of each training file for validation.
pub const VALIDATION_SIZE: usize = 5_000;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: bad magic number {got:#010x}, expected {want:#010x}")]
    BadMagic { path: String, got: u32, want: u32 },
    #[error("{path}: truncated payload, need {need} bytes but have {have}")]
    Truncated { path: String, need: usize, have: usize },
    #[error("image file holds {images} records but label file holds {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("{path}: file length {len} is not a multiple of the {record}-byte record size")]
    BadRecordSize { path: String, len: usize, record: usize },
    #[error("{path}: label byte {label} exceeds 9 at record {index}")]
    BadLabel { path: String, label: u8, index: usize },
    #[error("cannot split off {requested} validation records from {available}")]
    SplitTooLarge { requested: usize, available: usize },
}

/// Which portion of a dataset a [`LabeledImageSet`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Validation => write!(f, "validation"),
            Split::Test => write!(f, "test"),
        }
    }
}

/// Dense H x W x C intensity grid with values in `[0, 1]`, row-major and
/// channel-interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct Image<S> {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<S>,
}

impl<S: Scalar> Image<S> {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<S>) -> Self {
        assert!(channels == 1 || channels == 3, "channels must be 1 or 3");
        assert_eq!(data.len(), height * width * channels, "data length mismatch");
        debug_assert!(data.iter().all(|&v| v >= S::zero() && v <= S::one()));
        Self { height, width, channels, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn num_pixels(&self) -> usize {
        self.height * self.width
    }

    /// Channel intensities of pixel (x, y).
    pub fn pixel(&self, x: usize, y: usize) -> &[S] {
        let off = (y * self.width + x) * self.channels;
        &self.data[off..off + self.channels]
    }

    /// Back to raw bytes (inverse of [`normalize`] up to exact u8 values).
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| (v.to_f64_lossy() * 255.0).round() as u8)
            .collect()
    }
}

/// Divide raw byte intensities by 255, preserving shape.
pub fn normalize<S: Scalar>(
    raw: &[u8],
    height: usize,
    width: usize,
    channels: usize,
) -> Image<S> {
    let data = raw.iter().map(|&b| cast::<S>(b as f64 / 255.0)).collect();
    Image::new(height, width, channels, data)
}

/// Uniformly-shaped images with class labels in `[0, 9]`.
#[derive(Debug, Clone)]
pub struct LabeledImageSet<S> {
    pub images: Vec<Image<S>>,
    pub labels: Vec<u8>,
    pub split: Split,
}

impl<S: Scalar> LabeledImageSet<S> {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// First `n` records, in file order.
    pub fn take(&self, n: usize) -> LabeledImageSet<S> {
        let n = n.min(self.len());
        LabeledImageSet {
            images: self.images[..n].to_vec(),
            labels: self.labels[..n].to_vec(),
            split: self.split,
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, DatasetError> {
    fs::read(path).map_err(|source| DatasetError::Io { path: path.display().to_string(), source })
}

fn read_be_u32(bytes: &[u8], offset: usize, path: &Path) -> Result<u32, DatasetError> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(DatasetError::Truncated {
            path: path.display().to_string(),
            need: end,
            have: bytes.len(),
        });
    }
    Ok(u32::from_be_bytes([bytes[offset], bytes[offset + 1], bytes[offset + 2], bytes[offset + 3]]))
}

/// Load one MNIST image/label file pair. The returned set carries the whole
/// file in order; use [`split_train_validation`] to apply the 55,000/5,000
/// train/validation rule.
pub fn load_mnist<S: Scalar>(
    images_path: &Path,
    labels_path: &Path,
) -> Result<LabeledImageSet<S>, DatasetError> {
    let img_bytes = read_file(images_path)?;
    let magic = read_be_u32(&img_bytes, 0, images_path)?;
    if magic != MNIST_IMAGE_MAGIC {
        return Err(DatasetError::BadMagic {
            path: images_path.display().to_string(),
            got: magic,
            want: MNIST_IMAGE_MAGIC,
        });
    }
    let count = read_be_u32(&img_bytes, 4, images_path)? as usize;
    let rows = read_be_u32(&img_bytes, 8, images_path)? as usize;
    let cols = read_be_u32(&img_bytes, 12, images_path)? as usize;
    let need = 16 + count * rows * cols;
    if img_bytes.len() < need {
        return Err(DatasetError::Truncated {
            path: images_path.display().to_string(),
            need,
            have: img_bytes.len(),
        });
    }

    let lab_bytes = read_file(labels_path)?;
    let magic = read_be_u32(&lab_bytes, 0, labels_path)?;
    if magic != MNIST_LABEL_MAGIC {
        return Err(DatasetError::BadMagic {
            path: labels_path.display().to_string(),
            got: magic,
            want: MNIST_LABEL_MAGIC,
        });
    }
    let lab_count = read_be_u32(&lab_bytes, 4, labels_path)? as usize;
    if lab_count != count {
        return Err(DatasetError::CountMismatch { images: count, labels: lab_count });
    }
    let need = 8 + lab_count;
    if lab_bytes.len() < need {
        return Err(DatasetError::Truncated {
            path: labels_path.display().to_string(),
            need,
            have: lab_bytes.len(),
        });
    }

    let px = rows * cols;
    let mut images = Vec::with_capacity(count);
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let off = 16 + i * px;
        images.push(normalize(&img_bytes[off..off + px], rows, cols, 1));
        let label = lab_bytes[8 + i];
        if label > 9 {
            return Err(DatasetError::BadLabel {
                path: labels_path.display().to_string(),
                label,
                index: i,
            });
        }
        labels.push(label);
    }
    Ok(LabeledImageSet { images, labels, split: Split::Train })
}

/// Load CIFAR-10 binary batches, concatenated in the given order.
pub fn load_cifar10<S: Scalar>(
    batch_paths: &[impl AsRef<Path>],
) -> Result<LabeledImageSet<S>, DatasetError> {
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for path in batch_paths {
        let path = path.as_ref();
        let bytes = read_file(path)?;
        if bytes.len() % CIFAR_RECORD_BYTES != 0 {
            return Err(DatasetError::BadRecordSize {
                path: path.display().to_string(),
                len: bytes.len(),
                record: CIFAR_RECORD_BYTES,
            });
        }
        let count = bytes.len() / CIFAR_RECORD_BYTES;
        for i in 0..count {
            let rec = &bytes[i * CIFAR_RECORD_BYTES..(i + 1) * CIFAR_RECORD_BYTES];
            let label = rec[0];
            if label > 9 {
                return Err(DatasetError::BadLabel {
                    path: path.display().to_string(),
                    label,
                    index: i,
                });
            }
            // Plane order R,G,B -> interleave per pixel.
            let mut data = Vec::with_capacity(3072);
            for p in 0..1024 {
                data.push(cast::<S>(rec[1 + p] as f64 / 255.0));
                data.push(cast::<S>(rec[1 + 1024 + p] as f64 / 255.0));
                data.push(cast::<S>(rec[1 + 2048 + p] as f64 / 255.0));
            }
            images.push(Image::new(32, 32, 3, data));
            labels.push(label);
        }
    }
    Ok(LabeledImageSet { images, labels, split: Split::Train })
}

/// Split the last `validation_size` records off the end of a training set,
/// in file order, with no shuffling.
pub fn split_train_validation<S: Scalar>(
    set: LabeledImageSet<S>,
    validation_size: usize,
) -> Result<(LabeledImageSet<S>, LabeledImageSet<S>), DatasetError> {
    let n = set.len();
    if validation_size > n {
        return Err(DatasetError::SplitTooLarge { requested: validation_size, available: n });
    }
    let cut = n - validation_size;
    let mut images = set.images;
    let mut labels = set.labels;
    let val_images = images.split_off(cut);
    let val_labels = labels.split_off(cut);
    Ok((
        LabeledImageSet { images, labels, split: Split::Train },
        LabeledImageSet { images: val_images, labels: val_labels, split: Split::Validation },
    ))
}

/// Train/validation/test portions of one dataset.
#[derive(Debug, Clone)]
pub struct DatasetSplits<S> {
    pub train: LabeledImageSet<S>,
    pub validation: LabeledImageSet<S>,
    pub test: LabeledImageSet<S>,
}

/// Load MNIST from a directory holding the four standard IDX files and apply
/// the 55,000/5,000/10,000 split.
pub fn load_mnist_dataset<S: Scalar>(dir: &Path) -> Result<DatasetSplits<S>, DatasetError> {
    let train = load_mnist(
        &dir.join("train-images-idx3-ubyte"),
        &dir.join("train-labels-idx1-ubyte"),
    )?;
    let (train, validation) = split_train_validation(train, VALIDATION_SIZE)?;
    let mut test = load_mnist(
        &dir.join("t10k-images-idx3-ubyte"),
        &dir.join("t10k-labels-idx1-ubyte"),
    )?;
    test.split = Split::Test;
    Ok(DatasetSplits { train, validation, test })
}

/// Load CIFAR-10 from a directory holding `data_batch_1..5.bin` and
/// `test_batch.bin` and apply the 45,000/5,000/10,000 split.
pub fn load_cifar10_dataset<S: Scalar>(dir: &Path) -> Result<DatasetSplits<S>, DatasetError> {
    let batches: Vec<_> = (1..=5).map(|i| dir.join(format!("data_batch_{i}.bin"))).collect();
    let train = load_cifar10(&batches)?;
    let (train, validation) = split_train_validation(train, VALIDATION_SIZE)?;
    let mut test = load_cifar10(&[dir.join("test_batch.bin")])?;
    test.split = Split::Test;
    Ok(DatasetSplits { train, validation, test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_idx_images(path: &Path, images: &[[u8; 4]]) {
        let mut f = fs::File::create(path).unwrap();
        f.write_all(&MNIST_IMAGE_MAGIC.to_be_bytes()).unwrap();
        f.write_all(&(images.len() as u32).to_be_bytes()).unwrap();
        f.write_all(&2u32.to_be_bytes()).unwrap();
        f.write_all(&2u32.to_be_bytes()).unwrap();
        for img in images {
            f.write_all(img).unwrap();
        }
    }

    fn write_idx_labels(path: &Path, labels: &[u8]) {
        let mut f = fs::File::create(path).unwrap();
        f.write_all(&MNIST_LABEL_MAGIC.to_be_bytes()).unwrap();
        f.write_all(&(labels.len() as u32).to_be_bytes()).unwrap();
        f.write_all(labels).unwrap();
    }

    #[test]
    fn normalize_endpoints() {
        let img: Image<f64> = normalize(&[0, 255, 51, 128], 2, 2, 1);
        assert_eq!(img.data()[0], 0.0);
        assert_eq!(img.data()[1], 1.0);
        assert!((img.data()[2] - 0.2).abs() < 1e-9);
    }

    #[test]
    fn normalize_all_zero() {
        let img: Image<f64> = normalize(&[0; 12], 2, 2, 3);
        assert!(img.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mnist_round_trip_and_split() {
        let dir = tempfile::tempdir().unwrap();
        let imgs: Vec<[u8; 4]> = (0..10u8).map(|i| [i, 255 - i, 2 * i, 100]).collect();
        let labels: Vec<u8> = (0..10).map(|i| i % 10).collect();
        let ip = dir.path().join("imgs");
        let lp = dir.path().join("labels");
        write_idx_images(&ip, &imgs);
        write_idx_labels(&lp, &labels);

        let set: LabeledImageSet<f64> = load_mnist(&ip, &lp).unwrap();
        assert_eq!(set.len(), 10);
        assert_eq!(set.labels, labels);
        // byte-level oracle: first label sits at offset 8 of the label file
        let raw = fs::read(&lp).unwrap();
        assert_eq!(set.labels[0], raw[8]);
        // round-trip: normalized image back to bytes reproduces the payload
        assert_eq!(set.images[3].to_bytes(), imgs[3]);
        let again: LabeledImageSet<f64> = load_mnist(&ip, &lp).unwrap();
        assert_eq!(again.images[3], set.images[3]);

        let (train, val) = split_train_validation(set, 3).unwrap();
        assert_eq!(train.len(), 7);
        assert_eq!(val.len(), 3);
        assert_eq!(val.labels, vec![7, 8, 9]);
        assert_eq!(val.split, Split::Validation);
    }

    #[test]
    fn mnist_split_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let imgs: Vec<[u8; 4]> = (0..8u8).map(|i| [i; 4]).collect();
        let ip = dir.path().join("imgs");
        let lp = dir.path().join("labels");
        write_idx_images(&ip, &imgs);
        write_idx_labels(&lp, &[0, 1, 2, 3, 4, 5, 6, 7]);
        let a: LabeledImageSet<f64> = load_mnist(&ip, &lp).unwrap();
        let b: LabeledImageSet<f64> = load_mnist(&ip, &lp).unwrap();
        let (ta, va) = split_train_validation(a, 2).unwrap();
        let (tb, vb) = split_train_validation(b, 2).unwrap();
        assert_eq!(ta.labels, tb.labels);
        assert_eq!(va.labels, vb.labels);
    }

    #[test]
    fn mnist_empty_file_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("empty");
        fs::File::create(&ip).unwrap();
        let err = load_mnist::<f64>(&ip, &ip).unwrap_err();
        assert!(matches!(err, DatasetError::Truncated { .. }));
    }

    #[test]
    fn mnist_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("bad");
        fs::write(&ip, [0u8; 32]).unwrap();
        let err = load_mnist::<f64>(&ip, &ip).unwrap_err();
        assert!(matches!(err, DatasetError::BadMagic { .. }));
    }

    #[test]
    fn mnist_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("imgs");
        let lp = dir.path().join("labels");
        write_idx_images(&ip, &[[0; 4], [1; 4]]);
        write_idx_labels(&lp, &[0]);
        let err = load_mnist::<f64>(&ip, &lp).unwrap_err();
        assert!(matches!(err, DatasetError::CountMismatch { images: 2, labels: 1 }));
    }

    #[test]
    fn cifar_single_record() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("batch.bin");
        let mut rec = vec![7u8];
        rec.extend(std::iter::repeat(10u8).take(1024)); // R
        rec.extend(std::iter::repeat(20u8).take(1024)); // G
        rec.extend(std::iter::repeat(30u8).take(1024)); // B
        fs::write(&p, &rec).unwrap();
        let set: LabeledImageSet<f64> = load_cifar10(&[&p]).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.labels, vec![7]);
        let img = &set.images[0];
        assert_eq!((img.height(), img.width(), img.channels()), (32, 32, 3));
        assert_eq!(img.data().len(), 3072);
        let px = img.pixel(5, 9);
        assert!((px[0] - 10.0 / 255.0).abs() < 1e-12);
        assert!((px[1] - 20.0 / 255.0).abs() < 1e-12);
        assert!((px[2] - 30.0 / 255.0).abs() < 1e-12);
    }

    #[test]
    fn cifar_bad_record_size() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("batch.bin");
        fs::write(&p, [0u8; 100]).unwrap();
        let err = load_cifar10::<f64>(&[&p]).unwrap_err();
        assert!(matches!(err, DatasetError::BadRecordSize { .. }));
    }

    #[test]
    fn cifar_bad_label() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("batch.bin");
        let mut rec = vec![11u8];
        rec.extend([0u8; 3072]);
        fs::write(&p, &rec).unwrap();
        let err = load_cifar10::<f64>(&[&p]).unwrap_err();
        assert!(matches!(err, DatasetError::BadLabel { label: 11, .. }));
    }
}
