use std::fs;
use std::path::Path;

use super::mlp::{Layer, Mlp, OutputActivation};
use super::NeuralError;

const MAGIC: &[u8; 8] = b"LREMLP\x00\x01";

/// Layout: magic, u32 layer count, u64 dims (count + 1), output activation
/// (u8 tag, f64 lo, f64 hi), then per layer the weights and the biases, all
/// little-endian f64.
pub fn to_bytes(net: &Mlp) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + 8 * net.num_params());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(net.layers.len() as u32).to_le_bytes());
    for d in net.dims() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    let (tag, lo, hi) = match net.output {
        OutputActivation::Identity => (0u8, 0.0, 0.0),
        OutputActivation::ScaledTanh { lo, hi } => (1u8, lo, hi),
    };
    out.push(tag);
    out.extend_from_slice(&lo.to_le_bytes());
    out.extend_from_slice(&hi.to_le_bytes());
    for l in &net.layers {
        for x in l.w.iter().chain(&l.b) {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NeuralError> {
        if self.pos + n > self.buf.len() {
            return Err(NeuralError::CorruptCheckpoint(format!(
                "file ends at byte {} while reading {} more",
                self.buf.len(),
                n
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NeuralError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, NeuralError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, NeuralError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn from_bytes(buf: &[u8]) -> Result<Mlp, NeuralError> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(NeuralError::CorruptCheckpoint("bad magic".into()));
    }
    let n = r.u32()? as usize;
    if n == 0 || n > 64 {
        return Err(NeuralError::CorruptCheckpoint(format!("implausible layer count {n}")));
    }
    let mut dims = Vec::with_capacity(n + 1);
    for _ in 0..=n {
        let d = r.u64()?;
        if d == 0 || d > 1 << 24 {
            return Err(NeuralError::CorruptCheckpoint(format!("implausible layer width {d}")));
        }
        dims.push(d as usize);
    }
    let tag = r.take(1)?[0];
    let (lo, hi) = (r.f64()?, r.f64()?);
    let output = match tag {
        0 => OutputActivation::Identity,
        1 => OutputActivation::ScaledTanh { lo, hi },
        t => return Err(NeuralError::CorruptCheckpoint(format!("unknown output activation {t}"))),
    };
    let expected: usize = dims.windows(2).map(|d| d[0] * d[1] + d[1]).sum::<usize>() * 8;
    if buf.len() - r.pos != expected {
        return Err(NeuralError::CorruptCheckpoint(format!(
            "payload is {} bytes, header implies {}",
            buf.len() - r.pos,
            expected
        )));
    }
    let mut layers = Vec::with_capacity(n);
    for d in dims.windows(2) {
        let (n_in, n_out) = (d[0], d[1]);
        let w = (0..n_in * n_out).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
        let b = (0..n_out).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
        layers.push(Layer { n_in, n_out, w, b });
    }
    Ok(Mlp { layers, output })
}

pub fn save(net: &Mlp, path: &Path) -> Result<(), NeuralError> {
    fs::write(path, to_bytes(net))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Mlp, NeuralError> {
    from_bytes(&fs::read(path)?)
}

/// Load into a slot with a fixed architecture; any dimension mismatch is corruption.
pub fn load_expecting(path: &Path, dims: &[usize]) -> Result<Mlp, NeuralError> {
    let net = load(path)?;
    if net.dims() != dims {
        return Err(NeuralError::CorruptCheckpoint(format!(
            "checkpoint dims {:?} do not match expected {:?}",
            net.dims(),
            dims
        )));
    }
    Ok(net)
}
