//! Tensor serialization and grayscale frame import/export.
//!
//! # Tensor file layout
//!
//! | bytes        | content                                              |
//! |--------------|------------------------------------------------------|
//! | `0..8`       | magic `BMT3 00 00 00 01`                              |
//! | `8..32`      | `n1`, `n2`, `n3` as little-endian `u64`               |
//! | `32..`       | `n1·n2·n3` little-endian IEEE-754 `f64` in storage order |
//!
//! Masks are stored in the same format with entries `1.0` (observed) and
//! `0.0` (missing).
//!
//! Frames are binary portable graymaps (`P5`) with 8- or 16-bit samples. A
//! directory of frames, taken in lexicographic filename order, becomes a
//! tensor with `x(row, col, frame)` equal to the sample divided by the maxval.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::tensor::{check_dims, ObservationMask, Tensor3};

pub const TENSOR_MAGIC: [u8; 8] = *b"BMT3\x00\x00\x00\x01";
const HEADER_LEN: usize = 32;

pub fn encode_tensor(x: &Tensor3) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * x.len());
    out.extend_from_slice(&TENSOR_MAGIC);
    for d in x.dims() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in x.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor3> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(format!(
            "tensor file has {} bytes, shorter than its header",
            bytes.len()
        )));
    }
    if bytes[..8] != TENSOR_MAGIC {
        return Err(Error::format("bad tensor file magic"));
    }
    let mut dims = [0usize; 3];
    for (d, chunk) in dims.iter_mut().zip(bytes[8..HEADER_LEN].chunks_exact(8)) {
        let raw = u64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        *d = usize::try_from(raw)
            .map_err(|_| Error::format(format!("dimension {raw} overflows usize")))?;
    }
    let count = check_dims(dims).map_err(|e| Error::format(e.to_string()))?;
    let payload_len = count
        .checked_mul(8)
        .ok_or_else(|| Error::format(format!("dims {dims:?} overflow the payload size")))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != payload_len {
        return Err(Error::format(format!(
            "payload holds {} bytes, dims {dims:?} need {payload_len}",
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Tensor3::from_vec(dims, data)
}

pub fn write_tensor(path: impl AsRef<Path>, x: &Tensor3) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_tensor(x))?;
    f.flush()?;
    Ok(())
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor3> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_tensor(&bytes)
}

/// Writes the observed-entry flags of `mask`.
pub fn write_mask(path: impl AsRef<Path>, mask: &ObservationMask) -> Result<()> {
    let data = mask
        .flags()
        .iter()
        .map(|&f| if f { 1.0 } else { 0.0 })
        .collect();
    write_tensor(path, &Tensor3::from_vec(mask.dims(), data)?)
}

/// Reads mask flags; every entry must be exactly 0 or 1.
pub fn read_mask_flags(path: impl AsRef<Path>) -> Result<(crate::tensor::Dims, Vec<bool>)> {
    let t = read_tensor(path)?;
    let flags = t
        .as_slice()
        .iter()
        .map(|&v| match v {
            1.0 => Ok(true),
            0.0 => Ok(false),
            v => Err(Error::format(format!("mask entry {v} is neither 0 nor 1"))),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((t.dims(), flags))
}

/// A decoded portable graymap.
#[derive(Debug, Clone, PartialEq)]
pub struct Graymap {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    /// Row-major samples.
    pub samples: Vec<u16>,
}

fn pgm_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::format("truncated graymap header"));
    }
    Ok(&bytes[start..*pos])
}

fn pgm_number(bytes: &[u8], pos: &mut usize) -> Result<usize> {
    let tok = pgm_token(bytes, pos)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::format("malformed number in graymap header"))
}

pub fn decode_pgm(bytes: &[u8]) -> Result<Graymap> {
    let mut pos = 0;
    if pgm_token(bytes, &mut pos)? != b"P5" {
        return Err(Error::format("not a binary graymap (expected P5)"));
    }
    let width = pgm_number(bytes, &mut pos)?;
    let height = pgm_number(bytes, &mut pos)?;
    let maxval = pgm_number(bytes, &mut pos)?;
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(Error::format(format!(
            "unsupported graymap {width}x{height} with maxval {maxval}"
        )));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let wide = maxval > 255;
    let count = width * height;
    let need = count * if wide { 2 } else { 1 };
    let raster = bytes
        .get(pos..pos + need)
        .ok_or_else(|| Error::format(format!("graymap raster truncated, need {need} bytes")))?;
    let samples = if wide {
        raster
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    } else {
        raster.iter().map(|&b| u16::from(b)).collect()
    };
    Ok(Graymap {
        width,
        height,
        maxval: maxval as u16,
        samples,
    })
}

pub fn encode_pgm(g: &Graymap) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", g.width, g.height, g.maxval).into_bytes();
    if g.maxval > 255 {
        for s in &g.samples {
            out.extend_from_slice(&s.to_be_bytes());
        }
    } else {
        out.extend(g.samples.iter().map(|&s| s as u8));
    }
    out
}

fn frame_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    paths.retain(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")));
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(paths)
}

/// Imports a directory of graymaps as an `height × width × frames` tensor with
/// entries in `[0, 1]`. Returns the tensor and the source maxval.
pub fn import_frames(dir: impl AsRef<Path>) -> Result<(Tensor3, u16)> {
    let paths = frame_paths(dir.as_ref())?;
    if paths.is_empty() {
        return Err(Error::format(format!(
            "no .pgm frames in {}",
            dir.as_ref().display()
        )));
    }
    let frames = paths
        .iter()
        .map(|p| {
            let bytes = fs::read(p)?;
            decode_pgm(&bytes).map_err(|e| Error::format(format!("{}: {e}", p.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    let (h, w, maxval) = (frames[0].height, frames[0].width, frames[0].maxval);
    if let Some((p, _)) = paths
        .iter()
        .zip(&frames)
        .find(|(_, f)| (f.height, f.width, f.maxval) != (h, w, maxval))
    {
        return Err(Error::dim(format!(
            "{} does not match the {w}x{h} maxval {maxval} of the first frame",
            p.display()
        )));
    }
    let scale = f64::from(maxval);
    let x = Tensor3::from_fn([h, w, frames.len()], |r, c, k| {
        f64::from(frames[k].samples[r * w + c]) / scale
    });
    Ok((x, maxval))
}

/// Writes frame `k` of `x` to `dir/frame_#####.pgm`, clamping to `[0, 1]` and
/// quantizing to `maxval`.
pub fn export_frames(x: &Tensor3, dir: impl AsRef<Path>, maxval: u16) -> Result<Vec<PathBuf>> {
    if maxval == 0 {
        return Err(Error::format("graymap maxval must be positive"));
    }
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let [h, w, frames] = x.dims();
    let scale = f64::from(maxval);
    let mut written = Vec::with_capacity(frames);
    for k in 0..frames {
        let samples = (0..h * w)
            .map(|idx| {
                let v = x.get(idx / w, idx % w, k);
                let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
                (v * scale).round() as u16
            })
            .collect();
        let g = Graymap {
            width: w,
            height: h,
            maxval,
            samples,
        };
        let path = dir.join(format!("frame_{k:05}.pgm"));
        fs::write(&path, encode_pgm(&g))?;
        written.push(path);
    }
    Ok(written)
}
