//! Versioned little-endian binary container for parameter tensors.
//!
//! Layout: `"CAML"`, version `u32`, entry count `u32`, then per entry a kind
//! tag `u32`, tensor count `u32`, and per tensor its rank `u32`, dims `u64`
//! each, and the `f64` data.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::network::Network;
use super::params::{ParamBlock, Parameters};

pub const MAGIC: [u8; 4] = *b"CAML";
pub const VERSION: u32 = 1;

/// Kind tags.
pub mod tags {
    pub const CONV: u32 = 1;
    pub const DENSE: u32 = 2;
    pub const STANDARDIZER: u32 = 16;
    pub const LINEAR_SVM: u32 = 17;
}

const MAX_ELEMENTS: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub tag: u32,
    pub tensors: Vec<Tensor>,
}

pub fn write_container(w: &mut impl Write, entries: &[Entry]) -> Result<()> {
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(entries.len() as u32).to_le_bytes())?;
    for e in entries {
        w.write_all(&e.tag.to_le_bytes())?;
        w.write_all(&(e.tensors.len() as u32).to_le_bytes())?;
        for t in &e.tensors {
            w.write_all(&(t.rank() as u32).to_le_bytes())?;
            for &d in t.shape() {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for v in t.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u64::from_le_bytes(b))
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("container is truncated".into())
    } else {
        Error::Io(e)
    }
}

pub fn read_container(r: &mut impl Read) -> Result<Vec<Entry>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(truncated)?;
    if magic != MAGIC {
        return Err(Error::Format("not a parameter container (bad magic)".into()));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported container version {version}")));
    }
    let count = read_u32(r)?;
    let mut entries = Vec::new();
    for _ in 0..count {
        let tag = read_u32(r)?;
        let n = read_u32(r)?;
        let mut tensors = Vec::new();
        for _ in 0..n {
            let rank = read_u32(r)?;
            if rank == 0 || rank > 8 {
                return Err(Error::Format(format!("tensor rank {rank} out of range")));
            }
            let mut shape = Vec::with_capacity(rank as usize);
            let mut elems: u64 = 1;
            for _ in 0..rank {
                let d = read_u64(r)?;
                elems = elems.saturating_mul(d);
                shape.push(d as usize);
            }
            if elems == 0 || elems > MAX_ELEMENTS {
                return Err(Error::Format(format!("tensor shape {shape:?} is implausible")));
            }
            let mut data = Vec::with_capacity(elems as usize);
            let mut b = [0u8; 8];
            for _ in 0..elems {
                r.read_exact(&mut b).map_err(truncated)?;
                data.push(f64::from_le_bytes(b));
            }
            tensors.push(Tensor::from_vec(&shape, data)?);
        }
        entries.push(Entry { tag, tensors });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after container".into()));
    }
    Ok(entries)
}

pub fn save_entries(path: &Path, entries: &[Entry]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_container(&mut w, entries)?;
    w.flush()?;
    Ok(())
}

pub fn load_entries(path: &Path) -> Result<Vec<Entry>> {
    read_container(&mut BufReader::new(File::open(path)?))
}

fn tag_for(kind: &str) -> Result<u32> {
    match kind {
        "conv" => Ok(tags::CONV),
        "dense" => Ok(tags::DENSE),
        other => Err(Error::Format(format!("no container tag for `{other}` layers"))),
    }
}

/// One entry per trainable layer, in layer order.
pub fn parameters_to_entries(net: &Network, params: &Parameters) -> Result<Vec<Entry>> {
    params.check_against(net)?;
    params
        .trainable()
        .map(|(i, b)| {
            Ok(Entry { tag: tag_for(net.layers()[i].kind())?, tensors: vec![b.weight.clone(), b.bias.clone()] })
        })
        .collect()
}

pub fn parameters_from_entries(net: &Network, entries: &[Entry]) -> Result<Parameters> {
    let mut it = entries.iter();
    let mut blocks = Vec::with_capacity(net.layers().len());
    for (i, layer) in net.layers().iter().enumerate() {
        if layer.param_shapes().is_none() {
            blocks.push(None);
            continue;
        }
        let e = it.next().ok_or_else(|| Error::Format(format!("container ends before layer {i}")))?;
        if e.tag != tag_for(layer.kind())? || e.tensors.len() != 2 {
            return Err(Error::Format(format!("entry for layer {i} has tag {} / {} tensors", e.tag, e.tensors.len())));
        }
        blocks.push(Some(ParamBlock { weight: e.tensors[0].clone(), bias: e.tensors[1].clone() }));
    }
    if it.next().is_some() {
        return Err(Error::Format("container has more entries than the network has layers".into()));
    }
    let params = Parameters::from_blocks(blocks);
    params.check_against(net).map_err(|e| Error::Format(e.to_string()))?;
    Ok(params)
}

pub fn save_parameters(path: &Path, net: &Network, params: &Parameters) -> Result<()> {
    save_entries(path, &parameters_to_entries(net, params)?)
}

pub fn load_parameters(path: &Path, net: &Network) -> Result<Parameters> {
    parameters_from_entries(net, &load_entries(path)?)
}
