//! Binary checkpoint: `FMDC`, a `u16` version, the layer configuration as
//! little-endian `u32`s, then every parameter as a little-endian `f32` in
//! declaration order.

use std::io::{Read, Write};

use super::network::{ConvBlock, Network, NetworkConfig, NetworkWeights};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"FMDC";
pub const VERSION: u16 = 1;

fn put_u32<W: Write>(w: &mut W, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Checkpoint(format!("{v} does not fit in u32")))?;
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub fn write_checkpoint<W: Write>(mut w: W, net: &Network<f32>) -> Result<()> {
    let cfg = net.config();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    put_u32(&mut w, cfg.input_resolution)?;
    put_u32(&mut w, cfg.kernel_size)?;
    put_u32(&mut w, cfg.blocks.len())?;
    for b in &cfg.blocks {
        put_u32(&mut w, b.conv_count)?;
        put_u32(&mut w, b.out_channels)?;
        put_u32(&mut w, usize::from(b.pool))?;
    }
    put_u32(&mut w, cfg.fc_hidden.len())?;
    for &h in &cfg.fc_hidden {
        put_u32(&mut w, h)?;
    }
    put_u32(&mut w, cfg.output_dim)?;
    let mut buf = Vec::with_capacity(net.weights().len() * 4);
    for v in net.weights().iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Checkpoint(format!(
                "truncated at byte {} reading {what}",
                self.bytes.len()
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
    }
}

/// Upper bound on any single count in a header, guarding allocations.
const MAX_COUNT: usize = 1 << 16;

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Network<f32>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    let mut c = Cursor { bytes: &bytes, pos: 0 };
    if c.take(4, "magic")? != MAGIC {
        return Err(Error::Checkpoint("bad magic, not a checkpoint file".into()));
    }
    let version = u16::from_le_bytes(c.take(2, "version")?.try_into().expect("2 bytes"));
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let bounded = |v: usize, what: &str| {
        if v > MAX_COUNT {
            Err(Error::Checkpoint(format!("{what} {v} out of range")))
        } else {
            Ok(v)
        }
    };
    let input_resolution = bounded(c.u32("input resolution")?, "input resolution")?;
    let kernel_size = bounded(c.u32("kernel size")?, "kernel size")?;
    let n_blocks = bounded(c.u32("block count")?, "block count")?;
    let mut blocks = Vec::with_capacity(n_blocks);
    for _ in 0..n_blocks {
        let conv_count = bounded(c.u32("block")?, "conv count")?;
        let out_channels = bounded(c.u32("block")?, "channel count")?;
        let pool = match c.u32("block")? {
            0 => false,
            1 => true,
            v => return Err(Error::Checkpoint(format!("pool flag {v} is not 0 or 1"))),
        };
        blocks.push(ConvBlock {
            conv_count,
            out_channels,
            pool,
        });
    }
    let n_fc = bounded(c.u32("dense count")?, "dense count")?;
    let fc_hidden = (0..n_fc)
        .map(|_| c.u32("dense width").and_then(|v| bounded(v, "dense width")))
        .collect::<Result<Vec<_>>>()?;
    let output_dim = bounded(c.u32("output dim")?, "output dim")?;
    let config = NetworkConfig {
        input_resolution,
        kernel_size,
        blocks,
        fc_hidden,
        output_dim,
    };
    config.validate()?;
    let mut weights = NetworkWeights::<f32>::zeros(&config);
    let expected = weights.len() * 4;
    if bytes.len() - c.pos != expected {
        return Err(Error::Checkpoint(format!(
            "parameter payload is {} bytes, configuration needs {expected}",
            bytes.len() - c.pos
        )));
    }
    for (v, b) in weights.iter_mut().zip(bytes[c.pos..].chunks_exact(4)) {
        *v = f32::from_le_bytes(b.try_into().expect("4 bytes"));
    }
    Network::new(config, weights)
}

pub fn save(path: &std::path::Path, net: &Network<f32>) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_checkpoint(std::io::BufWriter::new(f), net)
}

pub fn load(path: &std::path::Path) -> Result<Network<f32>> {
    read_checkpoint(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bitwise() {
        let net = Network::<f32>::initialized(NetworkConfig::compact(3), 7).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &net).unwrap();
        assert_eq!(&buf[..4], MAGIC);
        let back = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back.config(), net.config());
        assert!(back
            .weights()
            .iter()
            .zip(net.weights().iter())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn header_layout() {
        let net = Network::<f32>::zeros(NetworkConfig::compact(3)).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &net).unwrap();
        // magic, version, res, k, blocks, 3 x (count, channels, pool), n_fc, width, out
        let header = 4 + 2 + 4 * (3 + 9 + 1 + 1 + 1);
        assert_eq!(buf.len(), header + 4 * net.config().param_count());
        assert_eq!(u16::from_le_bytes([buf[4], buf[5]]), VERSION);
        assert_eq!(u32::from_le_bytes(buf[6..10].try_into().unwrap()), 64);
    }

    #[test]
    fn rejects_corruption() {
        let net = Network::<f32>::zeros(NetworkConfig::compact(3)).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &net).unwrap();
        assert!(matches!(
            read_checkpoint(&buf[..buf.len() - 1]),
            Err(Error::Checkpoint(_))
        ));
        assert!(matches!(read_checkpoint(&buf[..20]), Err(Error::Checkpoint(_))));
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_checkpoint(bad.as_slice()), Err(Error::Checkpoint(_))));
        let mut nan = buf;
        let n = nan.len();
        nan[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(read_checkpoint(nan.as_slice()), Err(Error::NonFinite(_))));
    }
}
