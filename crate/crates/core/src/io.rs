//! File formats: Matrix Market (coordinate and array), whitespace-separated
//! vectors, binary/ASCII PGM images and flat little-endian float arrays.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{check_len, Error, Result};
use crate::linalg::DenseMatrix;
use crate::sparse::SparseMatrix;
use crate::Scalar;

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MmFormat {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MmSymmetry {
    General,
    Symmetric,
    SkewSymmetric,
}

struct MmHeader {
    format: MmFormat,
    symmetry: MmSymmetry,
}

fn parse_header(line: &str) -> Result<MmHeader> {
    let tokens: Vec<String> = line.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(1, "missing '%%MatrixMarket matrix' banner"));
    }
    let format = match tokens[2].as_str() {
        "coordinate" => MmFormat::Coordinate,
        "array" => MmFormat::Array,
        other => return Err(parse_err(1, format!("unsupported format '{other}'"))),
    };
    match tokens[3].as_str() {
        "real" | "integer" | "double" => {}
        other => return Err(parse_err(1, format!("unsupported field '{other}'"))),
    }
    let symmetry = match tokens[4].as_str() {
        "general" => MmSymmetry::General,
        "symmetric" => MmSymmetry::Symmetric,
        "skew-symmetric" => MmSymmetry::SkewSymmetric,
        other => return Err(parse_err(1, format!("unsupported symmetry '{other}'"))),
    };
    Ok(MmHeader { format, symmetry })
}

type Triplets = Vec<(usize, usize, f64)>;

/// Entries of a Matrix Market file as triplets, expanded for symmetric storage.
fn read_mm_triplets<R: BufRead>(reader: R) -> Result<(usize, usize, Triplets)> {
    let mut lines = reader.lines().enumerate();
    let header = match lines.next() {
        Some((_, l)) => parse_header(&l?)?,
        None => return Err(parse_err(1, "empty file")),
    };
    let mut data_lines = Vec::new();
    for (no, l) in lines {
        let l = l?;
        let t = l.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        data_lines.push((no + 1, t.to_string()));
    }
    let mut it = data_lines.into_iter();
    let (size_no, size_line) = it.next().ok_or_else(|| parse_err(2, "missing size line"))?;
    let sizes: Vec<usize> = size_line
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| parse_err(size_no, format!("bad size '{s}'"))))
        .collect::<Result<_>>()?;
    let parse_f = |no: usize, s: &str| -> Result<f64> {
        s.parse::<f64>().map_err(|_| parse_err(no, format!("bad value '{s}'")))
    };
    let mut trip = Vec::new();
    let (nrows, ncols) = match header.format {
        MmFormat::Coordinate => {
            if sizes.len() != 3 {
                return Err(parse_err(size_no, "coordinate size line needs 'rows cols nnz'"));
            }
            let (nr, nc, nnz) = (sizes[0], sizes[1], sizes[2]);
            for (no, line) in it.by_ref() {
                let tok: Vec<&str> = line.split_whitespace().collect();
                if tok.len() != 3 {
                    return Err(parse_err(no, "expected 'row col value'"));
                }
                let i: usize = tok[0].parse().map_err(|_| parse_err(no, "bad row index"))?;
                let j: usize = tok[1].parse().map_err(|_| parse_err(no, "bad column index"))?;
                if i == 0 || j == 0 || i > nr || j > nc {
                    return Err(parse_err(no, format!("index ({i}, {j}) out of range")));
                }
                trip.push((i - 1, j - 1, parse_f(no, tok[2])?));
            }
            if trip.len() != nnz {
                return Err(parse_err(size_no, format!("declared {nnz} entries, found {}", trip.len())));
            }
            (nr, nc)
        }
        MmFormat::Array => {
            if sizes.len() != 2 {
                return Err(parse_err(size_no, "array size line needs 'rows cols'"));
            }
            let (nr, nc) = (sizes[0], sizes[1]);
            let mut values = Vec::new();
            for (no, line) in it.by_ref() {
                for tok in line.split_whitespace() {
                    values.push(parse_f(no, tok)?);
                }
            }
            // Column-major; symmetric arrays store the lower triangle only.
            let mut k = 0;
            for j in 0..nc {
                let start = if header.symmetry == MmSymmetry::General { 0 } else { j };
                for i in start..nr {
                    let v = *values
                        .get(k)
                        .ok_or_else(|| parse_err(size_no, "array data shorter than declared"))?;
                    k += 1;
                    trip.push((i, j, v));
                }
            }
            if k != values.len() {
                return Err(parse_err(size_no, "array data longer than declared"));
            }
            (nr, nc)
        }
    };
    if header.symmetry != MmSymmetry::General {
        let sign = if header.symmetry == MmSymmetry::SkewSymmetric { -1.0 } else { 1.0 };
        let mirrored: Vec<_> =
            trip.iter().filter(|t| t.0 != t.1).map(|&(i, j, v)| (j, i, sign * v)).collect();
        trip.extend(mirrored);
    }
    Ok((nrows, ncols, trip))
}

pub fn read_matrix_market<T: Scalar, P: AsRef<Path>>(path: P) -> Result<SparseMatrix<T>> {
    let f = fs::File::open(path)?;
    parse_matrix_market(BufReader::new(f))
}

pub fn parse_matrix_market<T: Scalar, R: BufRead>(reader: R) -> Result<SparseMatrix<T>> {
    let (nr, nc, trip) = read_mm_triplets(reader)?;
    let trip: Vec<(usize, usize, T)> = trip.into_iter().map(|(i, j, v)| (i, j, T::lit(v))).collect();
    SparseMatrix::from_triplets(nr, nc, &trip)
}

pub fn read_dense_matrix_market<T: Scalar, P: AsRef<Path>>(path: P) -> Result<DenseMatrix<T>> {
    let f = fs::File::open(path)?;
    let (nr, nc, trip) = read_mm_triplets(BufReader::new(f))?;
    let mut d = DenseMatrix::zeros(nr, nc);
    for (i, j, v) in trip {
        d[(i, j)] += T::lit(v);
    }
    Ok(d)
}

pub fn format_matrix_market<T: Scalar>(a: &SparseMatrix<T>) -> String {
    let mut s = String::new();
    s.push_str("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(s, "{} {} {}", a.nrows(), a.ncols(), a.nnz());
    for (i, j, v) in a.triplets() {
        let _ = writeln!(s, "{} {} {:e}", i + 1, j + 1, v.as_f64());
    }
    s
}

pub fn write_matrix_market<T: Scalar, P: AsRef<Path>>(path: P, a: &SparseMatrix<T>) -> Result<()> {
    fs::write(path, format_matrix_market(a))?;
    Ok(())
}

/// Dense matrices are written in the column-major `array` format.
pub fn write_dense_matrix_market<T: Scalar, P: AsRef<Path>>(path: P, a: &DenseMatrix<T>) -> Result<()> {
    let mut s = String::new();
    s.push_str("%%MatrixMarket matrix array real general\n");
    let _ = writeln!(s, "{} {}", a.rows(), a.cols());
    for j in 0..a.cols() {
        for i in 0..a.rows() {
            let _ = writeln!(s, "{:e}", a[(i, j)].as_f64());
        }
    }
    fs::write(path, s)?;
    Ok(())
}

/// Whitespace-separated values; `#` starts a comment.
pub fn read_vector<T: Scalar, P: AsRef<Path>>(path: P) -> Result<Vec<T>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| parse_err(no + 1, format!("bad value '{tok}'")))?;
            out.push(T::lit(v));
        }
    }
    Ok(out)
}

pub fn write_vector<T: Scalar, P: AsRef<Path>>(path: P, v: &[T]) -> Result<()> {
    let mut s = String::with_capacity(v.len() * 24);
    for x in v {
        let _ = writeln!(s, "{:e}", x.as_f64());
    }
    fs::write(path, s)?;
    Ok(())
}

/// Grayscale image with intensities normalized to `[0, 1]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

/// Reads binary (`P5`) or ASCII (`P2`) PGM with 8- or 16-bit samples.
pub fn read_pgm<P: AsRef<Path>>(path: P) -> Result<GrayImage> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    parse_pgm(&bytes)
}

pub fn parse_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let mut pos = 0usize;
    let next_token = |pos: &mut usize| -> Result<String> {
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
        while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if start == *pos {
            return Err(parse_err(0, "truncated PGM header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };
    let magic = next_token(&mut pos)?;
    let num = |s: String| s.parse::<usize>().map_err(|_| parse_err(0, format!("bad PGM number '{s}'")));
    let width = num(next_token(&mut pos)?)?;
    let height = num(next_token(&mut pos)?)?;
    let maxval = num(next_token(&mut pos)?)?;
    if maxval == 0 || maxval > 65535 {
        return Err(parse_err(0, format!("unsupported PGM maxval {maxval}")));
    }
    let count = width * height;
    let scale = 1.0 / maxval as f64;
    let pixels = match magic.as_str() {
        "P5" => {
            pos += 1; // single whitespace after maxval
            let bps = if maxval < 256 { 1 } else { 2 };
            let data = bytes
                .get(pos..pos + count * bps)
                .ok_or_else(|| parse_err(0, "truncated PGM raster"))?;
            if bps == 1 {
                data.iter().map(|&b| b as f64 * scale).collect()
            } else {
                data.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 * scale).collect()
            }
        }
        "P2" => {
            let mut v = Vec::with_capacity(count);
            for _ in 0..count {
                v.push(num(next_token(&mut pos)?)? as f64 * scale);
            }
            v
        }
        other => return Err(parse_err(0, format!("unsupported PGM magic '{other}'"))),
    };
    Ok(GrayImage { width, height, pixels })
}

/// Writes a binary PGM, clamping intensities to `[0, 1]`.
pub fn write_pgm<P: AsRef<Path>>(path: P, img: &GrayImage, sixteen_bit: bool) -> Result<()> {
    check_len(img.width * img.height, img.pixels.len())?;
    let maxval: u32 = if sixteen_bit { 65535 } else { 255 };
    let mut out = format!("P5\n{} {}\n{}\n", img.width, img.height, maxval).into_bytes();
    for &p in &img.pixels {
        let q = (p.clamp(0.0, 1.0) * maxval as f64).round() as u32;
        if sixteen_bit {
            out.extend_from_slice(&(q as u16).to_be_bytes());
        } else {
            out.push(q as u8);
        }
    }
    fs::File::create(path)?.write_all(&out)?;
    Ok(())
}

/// Flat little-endian `f64` array.
pub fn write_flat_f64<T: Scalar, P: AsRef<Path>>(path: P, v: &[T]) -> Result<()> {
    let mut out = Vec::with_capacity(v.len() * 8);
    for x in v {
        out.extend_from_slice(&x.as_f64().to_le_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_flat_f64<T: Scalar, P: AsRef<Path>>(path: P) -> Result<Vec<T>> {
    let bytes = fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(parse_err(0, "flat f64 file length is not a multiple of 8"));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| T::lit(f64::from_le_bytes(c.try_into().unwrap())))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinate_general_and_symmetric() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n% comment\n3 3 2\n1 1 2.0\n3 1 -1.5\n";
        let a: SparseMatrix<f64> = parse_matrix_market(text.as_bytes()).unwrap();
        let d = a.to_dense();
        assert_eq!(d[(0, 0)], 2.0);
        assert_eq!(d[(2, 0)], -1.5);
        assert_eq!(d[(0, 2)], -1.5);
        assert_eq!(a.nnz(), 3);
    }

    #[test]
    fn array_format_is_column_major() {
        let text = "%%MatrixMarket matrix array real general\n2 2\n1\n3\n2\n4\n";
        let (nr, nc, trip) = read_mm_triplets(text.as_bytes()).unwrap();
        assert_eq!((nr, nc), (2, 2));
        assert!(trip.contains(&(1, 0, 3.0)));
        assert!(trip.contains(&(0, 1, 2.0)));
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        let bad_banner = "%%MatrixMarket tensor coordinate real general\n1 1 0\n";
        assert!(parse_matrix_market::<f64, _>(bad_banner.as_bytes()).is_err());
        let short = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n";
        assert!(parse_matrix_market::<f64, _>(short.as_bytes()).is_err());
        let oob = "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n";
        assert!(parse_matrix_market::<f64, _>(oob.as_bytes()).is_err());
        let complex = "%%MatrixMarket matrix coordinate complex general\n1 1 0\n";
        assert!(parse_matrix_market::<f64, _>(complex.as_bytes()).is_err());
    }

    #[test]
    fn file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let a = SparseMatrix::from_triplets(2, 3, &[(0, 1, 0.25f64), (1, 2, -3.0)]).unwrap();
        let p = dir.path().join("a.mtx");
        write_matrix_market(&p, &a).unwrap();
        assert_eq!(read_matrix_market::<f64, _>(&p).unwrap(), a);

        let d = DenseMatrix::from_rows(&[vec![1.0f64, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let p = dir.path().join("d.mtx");
        write_dense_matrix_market(&p, &d).unwrap();
        assert_eq!(read_dense_matrix_market::<f64, _>(&p).unwrap(), d);

        let v = vec![1.5f64, -2.0, 1e-20];
        let p = dir.path().join("v.txt");
        write_vector(&p, &v).unwrap();
        assert_eq!(read_vector::<f64, _>(&p).unwrap(), v);
        let p = dir.path().join("v.bin");
        write_flat_f64(&p, &v).unwrap();
        assert_eq!(read_flat_f64::<f64, _>(&p).unwrap(), v);
    }

    #[test]
    fn pgm_8_and_16_bit() {
        let dir = tempfile::tempdir().unwrap();
        let img = GrayImage { width: 3, height: 2, pixels: vec![0.0, 0.5, 1.0, 0.25, 0.75, 1.0] };
        for sixteen in [false, true] {
            let p = dir.path().join(format!("i{sixteen}.pgm"));
            write_pgm(&p, &img, sixteen).unwrap();
            let back = read_pgm(&p).unwrap();
            assert_eq!((back.width, back.height), (3, 2));
            let tol = if sixteen { 1e-4 } else { 3e-3 };
            for (a, b) in back.pixels.iter().zip(&img.pixels) {
                assert!((a - b).abs() < tol);
            }
        }
        let ascii = b"P2\n# c\n2 1\n4\n0 4\n";
        assert_eq!(parse_pgm(ascii).unwrap().pixels, vec![0.0, 1.0]);
    }
}
