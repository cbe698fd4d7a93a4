//! `FMDS` dataset files. Layout, all little-endian:
//!
//! ```text
//! "FMDS" | u16 version | f64 core radius | f64 NA | f64 wavelength
//! | u32 grid resolution | f64 window half-width | u32 N | u32 count
//! | u32 image resolution | count x (f32[2N-1] label, f32[res^2] image)
//! ```

use std::path::Path;

use fmd_core::{BeamImage, LabelVector};

use crate::error::{io_err, CliError, Result};

pub const MAGIC: &[u8; 4] = b"FMDS";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 4 + 2 + 3 * 8 + 4 + 8 + 3 * 4;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetHeader {
    pub core_radius_um: f64,
    pub numerical_aperture: f64,
    pub wavelength_um: f64,
    pub grid_resolution: u32,
    pub window_half_width_um: f64,
    pub modes: u32,
    pub count: u32,
    pub resolution: u32,
}

impl DatasetHeader {
    pub fn label_len(&self) -> usize {
        2 * self.modes as usize - 1
    }

    pub fn record_len(&self) -> usize {
        4 * (self.label_len() + (self.resolution as usize).pow(2))
    }

    pub fn file_len(&self) -> usize {
        HEADER_LEN + self.count as usize * self.record_len()
    }

    fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for v in [self.core_radius_um, self.numerical_aperture, self.wavelength_um] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.grid_resolution.to_le_bytes());
        out.extend_from_slice(&self.window_half_width_um.to_le_bytes());
        for v in [self.modes, self.count, self.resolution] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub label: Vec<f32>,
    pub image: Vec<f32>,
}

impl Sample {
    pub fn label_vector(&self) -> fmd_core::Result<LabelVector> {
        LabelVector::new(self.label.iter().map(|&v| v as f64).collect())
    }

    pub fn beam_image(&self, resolution: usize) -> fmd_core::Result<BeamImage> {
        BeamImage::square(resolution, self.image.iter().map(|&v| v as f64).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub header: DatasetHeader,
    pub samples: Vec<Sample>,
}

impl DatasetFile {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.header.file_len());
        self.header.write(&mut out);
        for s in &self.samples {
            for v in s.label.iter().chain(&s.image) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &str) -> Result<Self> {
        let fail = |message: String| CliError::Dataset {
            path: path.to_string(),
            message,
        };
        if bytes.len() < HEADER_LEN {
            return Err(fail(format!("header needs {HEADER_LEN} bytes, file has {}", bytes.len())));
        }
        if &bytes[..4] != MAGIC {
            return Err(fail("bad magic, not a dataset file".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(fail(format!("unsupported version {version}")));
        }
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
        let header = DatasetHeader {
            core_radius_um: f64_at(6),
            numerical_aperture: f64_at(14),
            wavelength_um: f64_at(22),
            grid_resolution: u32_at(30),
            window_half_width_um: f64_at(34),
            modes: u32_at(42),
            count: u32_at(46),
            resolution: u32_at(50),
        };
        if header.modes == 0 {
            return Err(fail("mode count is zero".into()));
        }
        let expected = (header.count as u128) * (header.record_len() as u128) + HEADER_LEN as u128;
        if expected != bytes.len() as u128 {
            return Err(fail(format!(
                "header declares {} samples ({expected} bytes), file has {} bytes",
                header.count,
                bytes.len()
            )));
        }
        let floats: Vec<f32> = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        let ll = header.label_len();
        let samples: Vec<Sample> = floats
            .chunks_exact(header.record_len() / 4)
            .map(|rec| Sample {
                label: rec[..ll].to_vec(),
                image: rec[ll..].to_vec(),
            })
            .collect();
        for (i, s) in samples.iter().enumerate() {
            if s.label_vector().is_err() {
                return Err(fail(format!("sample {i} has an invalid label")));
            }
        }
        Ok(Self { header, samples })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(io_err(path))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(io_err(path))?;
        Self::from_bytes(&bytes, &path.display().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(count: u32) -> DatasetHeader {
        DatasetHeader {
            core_radius_um: 4.1,
            numerical_aperture: 0.14,
            wavelength_um: 1.073,
            grid_resolution: 4,
            window_half_width_um: 8.2,
            modes: 3,
            count,
            resolution: 4,
        }
    }

    #[test]
    fn header_is_54_bytes() {
        assert_eq!(HEADER_LEN, 54);
        let d = DatasetFile {
            header: header(0),
            samples: vec![],
        };
        assert_eq!(d.to_bytes().len(), 54);
        assert_eq!(DatasetFile::from_bytes(&d.to_bytes(), "t").unwrap(), d);
    }

    #[test]
    fn round_trip_and_length_checks() {
        let s = Sample {
            label: vec![0.5, 0.25, 0.25, 1.0, 0.0],
            image: (0..16).map(|i| i as f32 / 15.0).collect(),
        };
        let d = DatasetFile {
            header: header(2),
            samples: vec![s.clone(), s],
        };
        let bytes = d.to_bytes();
        assert_eq!(bytes.len(), d.header.file_len());
        assert_eq!(DatasetFile::from_bytes(&bytes, "t").unwrap(), d);
        assert!(DatasetFile::from_bytes(&bytes[..bytes.len() - 4], "t").is_err());
        let mut bad_label = bytes.clone();
        bad_label[HEADER_LEN..HEADER_LEN + 4].copy_from_slice(&2.0f32.to_le_bytes());
        assert!(DatasetFile::from_bytes(&bad_label, "t").is_err());
    }
}
