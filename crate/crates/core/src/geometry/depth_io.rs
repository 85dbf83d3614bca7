//! Depth file format: little-endian `u32` width, `u32` height, then
//! `width * height` `f32` depths in meters, row-major.

use super::{CameraIntrinsics, DepthImage, GeometryError};
use std::io::{Read, Write};

pub fn write_depth<W: Write>(depth: &DepthImage, mut out: W) -> Result<(), GeometryError> {
    let io = |e: std::io::Error| GeometryError::Io(e.to_string());
    out.write_all(&(depth.width() as u32).to_le_bytes()).map_err(io)?;
    out.write_all(&(depth.height() as u32).to_le_bytes()).map_err(io)?;
    let mut buf = Vec::with_capacity(depth.depths().len() * 4);
    for d in depth.depths() {
        buf.extend_from_slice(&d.to_le_bytes());
    }
    out.write_all(&buf).map_err(io)
}

/// Reads a depth grid; `intrinsics` must agree with the stored size.
pub fn read_depth<R: Read>(mut input: R, intrinsics: CameraIntrinsics) -> Result<DepthImage, GeometryError> {
    let io = |e: std::io::Error| GeometryError::Io(e.to_string());
    let mut word = [0u8; 4];
    input.read_exact(&mut word).map_err(io)?;
    let width = u32::from_le_bytes(word) as usize;
    input.read_exact(&mut word).map_err(io)?;
    let height = u32::from_le_bytes(word) as usize;
    if width != intrinsics.width || height != intrinsics.height {
        return Err(GeometryError::Io(format!(
            "stored size {width}x{height} does not match intrinsics {}x{}",
            intrinsics.width, intrinsics.height
        )));
    }
    let mut raw = vec![0u8; width * height * 4];
    input.read_exact(&mut raw).map_err(io)?;
    let depths = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    DepthImage::new(intrinsics, depths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let intr = CameraIntrinsics::new(50.0, 50.0, 2.0, 1.0, 4, 3).unwrap();
        let depth = DepthImage::new(intr, (0..12).map(|i| i as f32 * 0.25).collect()).unwrap();
        let mut bytes = Vec::new();
        write_depth(&depth, &mut bytes).unwrap();
        assert_eq!(bytes.len(), 8 + 48);
        assert_eq!(read_depth(bytes.as_slice(), intr).unwrap(), depth);
        assert!(read_depth(&bytes[..20], intr).is_err());
    }
}
