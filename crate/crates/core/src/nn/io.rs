//! Binary containers for models and samples.
//!
//! Model file, all integers little-endian:
//!
//! ```text
//! magic    8 bytes  "DPAMODL\0"
//! version  u8       1
//! rank     u32, then `rank` × u32 input dims
//! classes  u32
//! layers   u32 count, then per layer a u8 tag and its u32 fields:
//!            0 dense   (input, output)
//!            1 conv2d  (in_channels, out_channels, kernel, stride)
//!            2 relu
//!            3 flatten
//! theta    u64 count, then `count` × f64
//! ```
//!
//! Sample file:
//!
//! ```text
//! magic    8 bytes  "DPASMPL\0"
//! version  u8       1
//! rank     u32, then `rank` × u32 dims
//! pixels   product(dims) × f64
//! label    u32
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::arch::{Layer, ModelArch};
use super::model::ModelParams;
use super::tensor::{Sample, Tensor};

pub const MODEL_MAGIC: &[u8; 8] = b"DPAMODL\0";
pub const SAMPLE_MAGIC: &[u8; 8] = b"DPASMPL\0";
pub const FORMAT_VERSION: u8 = 1;

const TAG_DENSE: u8 = 0;
const TAG_CONV2D: u8 = 1;
const TAG_RELU: u8 = 2;
const TAG_FLATTEN: u8 = 3;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn u64(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u64).to_le_bytes());
    }
    fn f64s(&mut self, values: &[f64]) {
        for v in values {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }
    fn shape(&mut self, shape: &[usize]) {
        self.u32(shape.len());
        for d in shape {
            self.u32(*d);
        }
    }
}

/// Byte cursor that reports the offset of any failure.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8], path: &'a Path) -> Self {
        Reader { bytes, pos: 0, path }
    }

    pub(crate) fn error(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            offset: self.pos as u64,
            msg: msg.into(),
        }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.error(format!(
                "truncated: need {n} bytes, {} remain",
                self.bytes.len() - self.pos
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32_le(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    pub(crate) fn u32_be(&mut self) -> Result<usize> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn u64_le(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| self.error("length does not fit in memory"))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| self.error("length overflow"))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn shape(&mut self) -> Result<Vec<usize>> {
        let rank = self.u32_le()?;
        if rank == 0 || rank > 8 {
            return Err(self.error(format!("implausible rank {rank}")));
        }
        (0..rank).map(|_| self.u32_le()).collect()
    }

    fn header(&mut self, magic: &[u8; 8]) -> Result<()> {
        if self.take(8)? != magic {
            self.pos = 0;
            return Err(self.error("bad magic"));
        }
        let version = self.u8()?;
        if version != FORMAT_VERSION {
            return Err(self.error(format!("unsupported version {version}")));
        }
        Ok(())
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(self.error("trailing bytes"));
        }
        Ok(())
    }
}

pub fn encode_model(params: &ModelParams) -> Vec<u8> {
    let arch = params.arch();
    let mut w = Writer(Vec::with_capacity(64 + 8 * params.theta().len()));
    w.0.extend_from_slice(MODEL_MAGIC);
    w.u8(FORMAT_VERSION);
    w.shape(arch.input_shape());
    w.u32(arch.classes());
    w.u32(arch.layers().len());
    for layer in arch.layers() {
        match *layer {
            Layer::Dense { input, output } => {
                w.u8(TAG_DENSE);
                w.u32(input);
                w.u32(output);
            }
            Layer::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
            } => {
                w.u8(TAG_CONV2D);
                w.u32(in_channels);
                w.u32(out_channels);
                w.u32(kernel);
                w.u32(stride);
            }
            Layer::Relu => w.u8(TAG_RELU),
            Layer::Flatten => w.u8(TAG_FLATTEN),
        }
    }
    w.u64(params.theta().len());
    w.f64s(params.theta());
    w.0
}

pub fn decode_model(bytes: &[u8], path: &Path) -> Result<ModelParams> {
    let mut r = Reader::new(bytes, path);
    r.header(MODEL_MAGIC)?;
    let input_shape = r.shape()?;
    let classes = r.u32_le()?;
    let n_layers = r.u32_le()?;
    let mut layers = Vec::with_capacity(n_layers.min(64));
    for _ in 0..n_layers {
        let layer = match r.u8()? {
            TAG_DENSE => Layer::Dense {
                input: r.u32_le()?,
                output: r.u32_le()?,
            },
            TAG_CONV2D => Layer::Conv2d {
                in_channels: r.u32_le()?,
                out_channels: r.u32_le()?,
                kernel: r.u32_le()?,
                stride: r.u32_le()?,
            },
            TAG_RELU => Layer::Relu,
            TAG_FLATTEN => Layer::Flatten,
            tag => return Err(r.error(format!("unknown layer tag {tag}"))),
        };
        layers.push(layer);
    }
    let arch = ModelArch::new(input_shape, layers, classes).map_err(|e| r.error(e.to_string()))?;
    let count = r.u64_le()?;
    if count != arch.param_count() {
        return Err(r.error(format!(
            "parameter count {count} does not match architecture ({})",
            arch.param_count()
        )));
    }
    let theta = r.f64s(count)?;
    r.finish()?;
    ModelParams::new(arch, theta).map_err(|e| r.error(e.to_string()))
}

pub fn encode_sample(sample: &Sample) -> Vec<u8> {
    let mut w = Writer(Vec::with_capacity(32 + 8 * sample.x.len()));
    w.0.extend_from_slice(SAMPLE_MAGIC);
    w.u8(FORMAT_VERSION);
    w.shape(sample.x.shape());
    w.f64s(sample.x.data());
    w.u32(sample.y);
    w.0
}

pub fn decode_sample(bytes: &[u8], path: &Path) -> Result<Sample> {
    let mut r = Reader::new(bytes, path);
    r.header(SAMPLE_MAGIC)?;
    let shape = r.shape()?;
    let len = shape
        .iter()
        .try_fold(1usize, |acc, d| acc.checked_mul(*d))
        .ok_or_else(|| r.error("shape overflow"))?;
    let pixels = r.f64s(len)?;
    let label = r.u32_le()?;
    r.finish()?;
    let x = Tensor::new(shape, pixels).map_err(|e| r.error(e.to_string()))?;
    Sample::new(x, label).map_err(|e| r.error(e.to_string()))
}

pub fn write_model(params: &ModelParams, path: &Path) -> Result<()> {
    fs::write(path, encode_model(params)).map_err(|e| Error::io(path, e))
}

pub fn read_model(path: &Path) -> Result<ModelParams> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes, path)
}

pub fn write_sample(sample: &Sample, path: &Path) -> Result<()> {
    fs::write(path, encode_sample(sample)).map_err(|e| Error::io(path, e))
}

pub fn read_sample(path: &Path) -> Result<Sample> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_sample(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededStream;

    fn p() -> &'static Path {
        Path::new("<memory>")
    }

    #[test]
    fn model_round_trip_is_bit_exact() {
        let arch = ModelArch::small_convnet(1, 9, 9, 3).unwrap();
        let params = ModelParams::init(arch, &mut SeededStream::new(5));
        let bytes = encode_model(&params);
        let back = decode_model(&bytes, p()).unwrap();
        assert_eq!(back, params);
        assert_eq!(encode_model(&back), bytes);
    }

    #[test]
    fn header_layout() {
        let arch = ModelArch::new(vec![2], vec![Layer::Dense { input: 2, output: 2 }], 2).unwrap();
        let bytes = encode_model(&ModelParams::zeros(arch));
        assert_eq!(&bytes[..8], MODEL_MAGIC);
        assert_eq!(bytes[8], 1);
        // rank 1, dim 2, classes 2, one layer, dense tag, 2, 2, six params
        assert_eq!(&bytes[9..13], &1u32.to_le_bytes());
        assert_eq!(bytes[25], TAG_DENSE);
        assert_eq!(&bytes[34..42], &6u64.to_le_bytes());
        assert_eq!(bytes.len(), 42 + 6 * 8);
    }

    #[test]
    fn corrupt_model_reports_offset() {
        let arch = ModelArch::mlp(3, 2, 2).unwrap();
        let bytes = encode_model(&ModelParams::zeros(arch));
        let err = decode_model(&bytes[..bytes.len() - 3], p()).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));

        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(matches!(decode_model(&bad_magic, p()), Err(Error::Parse { offset: 0, .. })));

        let mut bad_version = bytes;
        bad_version[8] = 9;
        assert!(matches!(decode_model(&bad_version, p()), Err(Error::Parse { offset: 9, .. })));
    }

    #[test]
    fn sample_round_trip() {
        let x = Tensor::new(vec![1, 2, 2], vec![0.0, 0.25, 0.5, 1.0]).unwrap();
        let s = Sample::new(x, 7).unwrap();
        let bytes = encode_sample(&s);
        assert_eq!(decode_sample(&bytes, p()).unwrap(), s);
        assert!(decode_sample(&bytes[..bytes.len() - 1], p()).is_err());
    }
}
