//! `TCWT` weight checkpoints.
//!
//! Body layout after the shared framing (see `binfmt`):
//!
//! ```text
//! arch code   u8
//! count       u32
//! count x { kind u8 (0 parameter, 1 running statistic), rank u8, dims u32 x rank }
//! payload     f32 x sum(numel), tensors in manifest order
//! ```
//!
//! Parameters come first in [`Module::params`] order, then batch norm
//! running statistics in [`Module::buffers`] order.

use std::fs;
use std::path::Path;

use super::{build_network, ArchId, Network};
use crate::binfmt::{Reader, Writer};
use crate::error::{Error, Result};
use crate::layers::Module;
use crate::rng::Rng;
use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"TCWT";
const VERSION: u32 = 1;
const FORMAT: &str = "TCWT";

const KIND_PARAM: u8 = 0;
const KIND_BUFFER: u8 = 1;

/// Serializes `net` to bytes.
pub fn write_checkpoint(net: &Network) -> Vec<u8> {
    let params = net.params();
    let buffers = net.buffers();
    let mut w = Writer::new(MAGIC, VERSION);
    w.u8(net.arch().code());
    w.u32((params.len() + buffers.len()) as u32);
    let tagged = params
        .iter()
        .map(|t| (KIND_PARAM, *t))
        .chain(buffers.iter().map(|t| (KIND_BUFFER, *t)));
    for (kind, t) in tagged.clone() {
        w.u8(kind);
        w.u8(t.rank() as u8);
        for &d in t.shape() {
            w.u32(d as u32);
        }
    }
    for (_, t) in tagged {
        w.f32s(t.data());
    }
    w.finish()
}

/// Parses checkpoint bytes into a network of the stored architecture.
pub fn read_checkpoint(bytes: &[u8]) -> Result<Network> {
    let mut r = Reader::open(FORMAT, MAGIC, VERSION, bytes)?;
    let code = r.u8("architecture code")?;
    let arch = ArchId::from_code(code).ok_or_else(|| r.corrupt(format!("unknown architecture code {code}")))?;
    let mut net = build_network::<f32>(arch, &mut Rng::new(0));

    let expected: Vec<(u8, Vec<usize>)> = net
        .params()
        .iter()
        .map(|t| (KIND_PARAM, t.shape().to_vec()))
        .chain(net.buffers().iter().map(|t| (KIND_BUFFER, t.shape().to_vec())))
        .collect();
    let count = r.u32("tensor count")? as usize;
    let mut manifest = Vec::with_capacity(count.min(expected.len()));
    for i in 0..count {
        let kind = r.u8("manifest")?;
        let rank = r.u8("manifest")? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32("manifest")? as usize);
        }
        match expected.get(i) {
            Some((k, shape)) if *k == kind && *shape == dims => manifest.push(dims),
            Some((_, shape)) => {
                return Err(Error::ManifestMismatch {
                    index: i,
                    expected: shape.clone(),
                    found: dims,
                })
            }
            None => {
                return Err(Error::ManifestMismatch {
                    index: i,
                    expected: Vec::new(),
                    found: dims,
                })
            }
        }
    }
    if count != expected.len() {
        return Err(Error::ManifestMismatch {
            index: count,
            expected: expected[count].1.clone(),
            found: Vec::new(),
        });
    }

    let n_params = net.params().len();
    let mut tensors = Vec::with_capacity(count);
    for (i, dims) in manifest.into_iter().enumerate() {
        let n = dims.iter().product();
        let data = r.f32s(n, &format!("payload of tensor {i}"))?;
        tensors.push(Tensor::new(dims, data)?);
    }
    r.finish()?;

    let buffers = tensors.split_off(n_params);
    for (dst, src) in net.params_mut().into_iter().zip(tensors) {
        *dst = src;
    }
    for (dst, src) in net.buffers_mut().into_iter().zip(buffers) {
        *dst = src;
    }
    Ok(net)
}

pub fn save_checkpoint(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_checkpoint(net)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    read_checkpoint(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

/// As [`load_checkpoint`], but fails unless the file holds `arch`.
pub fn load_checkpoint_expecting(path: impl AsRef<Path>, arch: ArchId) -> Result<Network> {
    let net = load_checkpoint(path)?;
    if net.arch() != arch {
        return Err(Error::ArchMismatch {
            expected: arch.to_string(),
            found: net.arch().to_string(),
        });
    }
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = Rng::new(11);
        let net = build_network::<f32>(ArchId::TimeconvXception, &mut rng);
        let back = read_checkpoint(&write_checkpoint(&net)).unwrap();
        assert_eq!(back.arch(), net.arch());
        for (a, b) in net.params().iter().zip(back.params()) {
            assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        assert_eq!(back.count_params(), net.count_params());
    }

    #[test]
    fn manifest_shape_mismatch_is_reported() {
        let net = build_network::<f32>(ArchId::Xception2d, &mut Rng::new(1));
        let mut bytes = write_checkpoint(&net);
        // first manifest entry is conv1.weight [8, 1, 3, 3]; claim xception's code for timeconv
        bytes[16] = ArchId::TimeconvXception.code();
        let split = bytes.len() - 4;
        let crc = crc32fast::hash(&bytes[..split]);
        bytes[split..].copy_from_slice(&crc.to_le_bytes());
        assert!(matches!(
            read_checkpoint(&bytes),
            Err(Error::ManifestMismatch { index: 0, .. })
        ));
    }
}
