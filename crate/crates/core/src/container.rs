//! Little-endian binary container shared by checkpoints and curvature snapshots.
//!
//! ```text
//! magic      [u8; 4]   "LMCW"
//! version    u32
//! layers     u32
//!   per layer: in u32, out u32, activation u8, has_bias u8, lora_rank u32, lora_scale f64
//! count      u64
//! values     f64 × count          (layout order, see `nncore::weights`)
//! sections   u32
//!   per section: tag [u8; 4], rows u32, cols u32, f64 × rows·cols (row-major)
//! ```
//!
//! Plain checkpoints carry zero sections.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::nncore::{Activation, DenseLayer, LoraAdapter, Network};

pub const MAGIC: &[u8; 4] = b"LMCW";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub tag: [u8; 4],
    pub data: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub network: Network,
    pub sections: Vec<Section>,
}

fn put_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn dim_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::contract(format!("{what} {v} does not fit in u32")))
}

fn get<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Format("truncated container".into())
        } else {
            Error::Io(e)
        }
    })?;
    Ok(buf)
}

fn get_u32<R: Read>(r: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(get::<4, _>(r)?))
}

fn get_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_le_bytes(get::<8, _>(r)?))
}

pub fn write_container<W: Write>(w: &mut W, network: &Network, sections: &[Section]) -> Result<()> {
    w.write_all(MAGIC)?;
    put_u32(w, VERSION)?;
    put_u32(w, dim_u32(network.layers().len(), "layer count")?)?;
    for layer in network.layers() {
        put_u32(w, dim_u32(layer.in_dim(), "input dim")?)?;
        put_u32(w, dim_u32(layer.out_dim(), "output dim")?)?;
        w.write_all(&[layer.activation.code(), u8::from(layer.bias.is_some())])?;
        let (rank, scale) = layer.adapter.as_ref().map_or((0, 0.0), |a| (a.rank(), a.scale));
        put_u32(w, dim_u32(rank, "LoRA rank")?)?;
        put_f64(w, scale)?;
    }
    let theta = network.flatten();
    w.write_all(&(theta.len() as u64).to_le_bytes())?;
    for v in theta.values() {
        put_f64(w, *v)?;
    }
    put_u32(w, dim_u32(sections.len(), "section count")?)?;
    for s in sections {
        w.write_all(&s.tag)?;
        put_u32(w, dim_u32(s.data.rows(), "section rows")?)?;
        put_u32(w, dim_u32(s.data.cols(), "section cols")?)?;
        for v in s.data.as_slice() {
            put_f64(w, *v)?;
        }
    }
    Ok(())
}

pub fn read_container<R: Read>(r: &mut R) -> Result<Container> {
    let magic = get::<4, _>(r)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}, expected LMCW")));
    }
    let version = get_u32(r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported container version {version}")));
    }
    let n_layers = get_u32(r)? as usize;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let in_dim = get_u32(r)? as usize;
        let out_dim = get_u32(r)? as usize;
        let [act, has_bias] = get::<2, _>(r)?;
        let rank = get_u32(r)? as usize;
        let scale = get_f64(r)?;
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::Format("zero layer dimension".into()));
        }
        let adapter = (rank > 0).then(|| LoraAdapter {
            a: Mat::zeros(rank, in_dim),
            b: Mat::zeros(out_dim, rank),
            scale,
        });
        layers.push(DenseLayer {
            weight: Mat::zeros(out_dim, in_dim),
            bias: match has_bias {
                0 => None,
                1 => Some(vec![0.0; out_dim]),
                other => return Err(Error::Format(format!("bad bias flag {other}"))),
            },
            activation: Activation::from_code(act)?,
            adapter,
        });
    }
    let mut network = Network::from_layers(layers).map_err(|e| Error::Format(e.to_string()))?;
    let count = u64::from_le_bytes(get::<8, _>(r)?) as usize;
    let layout = network.layout();
    if count != layout.len() {
        return Err(Error::Format(format!(
            "container holds {count} weights but its layout needs {}",
            layout.len()
        )));
    }
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        values.push(get_f64(r)?);
    }
    network.load(&crate::nncore::WeightVector::new(layout, values)?)?;

    let n_sections = get_u32(r)? as usize;
    let mut sections = Vec::with_capacity(n_sections);
    for _ in 0..n_sections {
        let tag = get::<4, _>(r)?;
        let rows = get_u32(r)? as usize;
        let cols = get_u32(r)? as usize;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(get_f64(r)?);
        }
        sections.push(Section {
            tag,
            data: Mat::from_vec(rows, cols, data)?,
        });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after container".into()));
    }
    Ok(Container { network, sections })
}

pub fn save_checkpoint(path: &std::path::Path, network: &Network) -> Result<()> {
    let mut buf = Vec::new();
    write_container(&mut buf, network, &[])?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_checkpoint(path: &std::path::Path) -> Result<Network> {
    let bytes = std::fs::read(path)?;
    let c = read_container(&mut bytes.as_slice())?;
    Ok(c.network)
}
