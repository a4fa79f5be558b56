//! Versioned binary checkpoint format.
//!
//! Layout (all integers little-endian): magic `CGCK`, u32 version = 1,
//! u32 epoch, u32 tensor count, then framed tensors. Each frame: u16 name
//! length, UTF-8 name, u8 ndims, ndims x u32 extents, extent-product f32
//! payload. After the main section: u8 optimizer-state flag; when set, a
//! u32 count followed by the same tensor framing for the optimizer
//! moments and auxiliary training state.
//!
//! Non-float state (integer config fields, step counters) rides in
//! reserved `meta.*` / `opt.*.step` tensors whose f32 payloads are
//! bit-cast u32 values, keeping the framing uniform.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"CGCK";
pub const CHECKPOINT_VERSION: u32 = 1;

/// One named tensor frame.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<u32>,
    pub data: Vec<f32>,
}

impl NamedTensor {
    pub fn new(name: impl Into<String>, shape: Vec<u32>, data: Vec<f32>) -> Self {
        NamedTensor {
            name: name.into(),
            shape,
            data,
        }
    }

    /// 1-D frame carrying u32 values bit-cast to f32.
    pub fn from_u32s(name: impl Into<String>, values: &[u32]) -> Self {
        NamedTensor {
            name: name.into(),
            shape: vec![values.len() as u32],
            data: values.iter().map(|v| f32::from_bits(*v)).collect(),
        }
    }

    pub fn to_u32s(&self) -> Vec<u32> {
        self.data.iter().map(|v| v.to_bits()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub epoch: u32,
    pub tensors: Vec<NamedTensor>,
    pub optimizer: Option<Vec<NamedTensor>>,
}

impl Checkpoint {
    pub fn find<'a>(&'a self, name: &str) -> Option<&'a NamedTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn find_opt<'a>(&'a self, name: &str) -> Option<&'a NamedTensor> {
        self.optimizer
            .as_ref()
            .and_then(|ts| ts.iter().find(|t| t.name == name))
    }

    fn check_unique(&self, path: &Path) -> Result<()> {
        let mut seen = HashSet::new();
        for t in &self.tensors {
            if !seen.insert(t.name.as_str()) {
                return Err(Error::parse(
                    path,
                    format!("duplicate tensor name {:?}", t.name),
                ));
            }
        }
        let mut seen = HashSet::new();
        for t in self.optimizer.iter().flatten() {
            if !seen.insert(t.name.as_str()) {
                return Err(Error::parse(
                    path,
                    format!("duplicate optimizer tensor name {:?}", t.name),
                ));
            }
        }
        Ok(())
    }
}

fn write_tensor(w: &mut impl Write, t: &NamedTensor, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let name = t.name.as_bytes();
    if name.len() > u16::MAX as usize {
        return Err(Error::InvalidArgument(format!(
            "tensor name too long ({} bytes)",
            name.len()
        )));
    }
    let numel: usize = t.shape.iter().map(|&e| e as usize).product();
    if numel != t.data.len() || t.shape.len() > u8::MAX as usize {
        return Err(Error::InvalidArgument(format!(
            "tensor {:?}: shape {:?} does not describe {} values",
            t.name,
            t.shape,
            t.data.len()
        )));
    }
    w.write_all(&(name.len() as u16).to_le_bytes()).map_err(io)?;
    w.write_all(name).map_err(io)?;
    w.write_all(&[t.shape.len() as u8]).map_err(io)?;
    for e in &t.shape {
        w.write_all(&e.to_le_bytes()).map_err(io)?;
    }
    for v in &t.data {
        w.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    Ok(())
}

pub fn write_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    ckpt.check_unique(path)?;
    let io = |e| Error::io(path, e);
    let file = File::create(path).map_err(io)?;
    let mut w = BufWriter::new(file);
    w.write_all(&CHECKPOINT_MAGIC).map_err(io)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&ckpt.epoch.to_le_bytes()).map_err(io)?;
    w.write_all(&(ckpt.tensors.len() as u32).to_le_bytes())
        .map_err(io)?;
    for t in &ckpt.tensors {
        write_tensor(&mut w, t, path)?;
    }
    match &ckpt.optimizer {
        None => w.write_all(&[0u8]).map_err(io)?,
        Some(opt) => {
            w.write_all(&[1u8]).map_err(io)?;
            w.write_all(&(opt.len() as u32).to_le_bytes()).map_err(io)?;
            for t in opt {
                write_tensor(&mut w, t, path)?;
            }
        }
    }
    w.flush().map_err(io)
}

struct Reader<'a> {
    inner: BufReader<File>,
    path: &'a Path,
    offset: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; n];
        let got = read_up_to(&mut self.inner, &mut buf).map_err(|e| Error::io(self.path, e))?;
        if got < n {
            return Err(Error::parse(
                self.path,
                format!(
                    "truncated at byte {}: expected {} bytes, got {}",
                    self.offset, n, got
                ),
            ));
        }
        self.offset += n;
        Ok(buf)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn tensor(&mut self) -> Result<NamedTensor> {
        let name_len = self.u16()? as usize;
        let name_bytes = self.take(name_len)?;
        let name = String::from_utf8(name_bytes)
            .map_err(|_| Error::parse(self.path, "tensor name is not valid UTF-8"))?;
        let ndims = self.u8()? as usize;
        let mut shape = Vec::with_capacity(ndims);
        for _ in 0..ndims {
            shape.push(self.u32()?);
        }
        let numel: usize = shape.iter().map(|&e| e as usize).product();
        let raw = self.take(numel * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(NamedTensor { name, shape, data })
    }
}

fn read_up_to(r: &mut impl Read, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut got = 0;
    while got < buf.len() {
        let n = r.read(&mut buf[got..])?;
        if n == 0 {
            break;
        }
        got += n;
    }
    Ok(got)
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader {
        inner: BufReader::new(file),
        path,
        offset: 0,
    };
    let magic = r.take(4)?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::parse(
            path,
            format!("bad magic {:02x?}, expected {:02x?}", magic, CHECKPOINT_MAGIC),
        ));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::parse(
            path,
            format!("unsupported checkpoint version {version}, expected {CHECKPOINT_VERSION}"),
        ));
    }
    let epoch = r.u32()?;
    let count = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        tensors.push(r.tensor()?);
    }
    let optimizer = match r.u8()? {
        0 => None,
        1 => {
            let n = r.u32()? as usize;
            let mut opt = Vec::with_capacity(n);
            for _ in 0..n {
                opt.push(r.tensor()?);
            }
            Some(opt)
        }
        f => {
            return Err(Error::parse(
                path,
                format!("invalid optimizer-state flag {f}"),
            ))
        }
    };
    // trailing garbage means the file was not produced by this writer
    let mut probe = [0u8; 1];
    if read_up_to(&mut r.inner, &mut probe).map_err(|e| Error::io(path, e))? != 0 {
        return Err(Error::parse(path, "trailing bytes after optimizer section"));
    }
    let ckpt = Checkpoint {
        epoch,
        tensors,
        optimizer,
    };
    ckpt.check_unique(path)?;
    Ok(ckpt)
}
