//! Reading and writing feature arrays in the npy binary format.
//!
//! Only the subset this harness needs is supported: version 1.0 headers,
//! little-endian `<f4`/`<f8` payloads, C (row-major) order, 1 to 3
//! dimensions. Anything else is rejected with a typed error instead of a
//! conversion path, so stored bytes stay auditable.

use ndarray::{Array2, Array3};

use super::DatasetError;

/// The npy magic number.
const MAGIC: [u8; 6] = *b"\x93NUMPY";

/// Element type of a stored array.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    /// The npy type descriptor string.
    pub fn descr(self) -> &'static str {
        match self {
            Dtype::F32 => "<f4",
            Dtype::F64 => "<f8",
        }
    }

    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

/// A dense row-major numeric array of 1 to 3 dimensions.
///
/// Values are held as `f64` regardless of the stored dtype; every `f32`
/// is exactly representable as `f64`, so round-trips through this type
/// are bit-exact.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    dtype: Dtype,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, dtype: Dtype, data: Vec<f64>) -> Result<Self, DatasetError> {
        if shape.is_empty() || shape.len() > 3 {
            return Err(DatasetError::Data(format!(
                "tensor must have 1-3 dimensions, got {}",
                shape.len()
            )));
        }
        let expect: usize = shape.iter().product();
        if expect != data.len() {
            return Err(DatasetError::Data(format!(
                "shape {:?} implies {} elements, buffer has {}",
                shape,
                expect,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(DatasetError::Data(format!("non-finite value {v} in tensor")));
        }
        Ok(Tensor { shape, dtype, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn dtype(&self) -> Dtype {
        self.dtype
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    /// View as an `[n, d]` matrix.
    pub fn to_array2(&self) -> Result<Array2<f64>, DatasetError> {
        if self.ndim() != 2 {
            return Err(DatasetError::Data(format!(
                "expected 2-D tensor, got shape {:?}",
                self.shape
            )));
        }
        Array2::from_shape_vec((self.shape[0], self.shape[1]), self.data.clone())
            .map_err(|e| DatasetError::Data(e.to_string()))
    }

    /// View as an `[n, h, d]` block.
    pub fn to_array3(&self) -> Result<Array3<f64>, DatasetError> {
        if self.ndim() != 3 {
            return Err(DatasetError::Data(format!(
                "expected 3-D tensor, got shape {:?}",
                self.shape
            )));
        }
        Array3::from_shape_vec(
            (self.shape[0], self.shape[1], self.shape[2]),
            self.data.clone(),
        )
        .map_err(|e| DatasetError::Data(e.to_string()))
    }

    pub fn from_array2(arr: &Array2<f64>, dtype: Dtype) -> Result<Self, DatasetError> {
        let shape = vec![arr.nrows(), arr.ncols()];
        let data = arr.iter().copied().collect();
        Tensor::new(shape, dtype, data)
    }

    pub fn from_array3(arr: &Array3<f64>, dtype: Dtype) -> Result<Self, DatasetError> {
        let dims = arr.dim();
        let shape = vec![dims.0, dims.1, dims.2];
        let data = arr.iter().copied().collect();
        Tensor::new(shape, dtype, data)
    }
}

/// Parse an npy file into a [`Tensor`].
///
/// Rejects bad magic with `Format`, non-1.0 versions, unsupported dtypes,
/// Fortran order and >3-D shapes with `Unsupported`, and header/payload
/// length mismatches with `Corrupt`.
pub fn parse_array_file(bytes: &[u8]) -> Result<Tensor, DatasetError> {
    if bytes.len() < 10 {
        return Err(DatasetError::Format("file shorter than npy preamble".into()));
    }
    if bytes[..6] != MAGIC {
        return Err(DatasetError::Format("bad magic string".into()));
    }
    let (major, minor) = (bytes[6], bytes[7]);
    if (major, minor) != (1, 0) {
        return Err(DatasetError::Unsupported(format!(
            "npy version {major}.{minor} (only 1.0 supported)"
        )));
    }
    let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
    let payload_start = 10 + header_len;
    if bytes.len() < payload_start {
        return Err(DatasetError::Corrupt(
            "declared header length exceeds file size".into(),
        ));
    }
    let header = std::str::from_utf8(&bytes[10..payload_start])
        .map_err(|_| DatasetError::Format("header is not ASCII".into()))?;
    let (dtype, fortran_order, shape) = parse_header_dict(header)?;
    if fortran_order {
        return Err(DatasetError::Unsupported(
            "fortran_order=True not supported (row-major only)".into(),
        ));
    }
    if shape.is_empty() || shape.len() > 3 {
        return Err(DatasetError::Unsupported(format!(
            "{}-D arrays not supported (1-3 dims)",
            shape.len()
        )));
    }
    let count: usize = shape.iter().product();
    let payload = &bytes[payload_start..];
    if payload.len() != count * dtype.size() {
        return Err(DatasetError::Corrupt(format!(
            "payload is {} bytes, header implies {}",
            payload.len(),
            count * dtype.size()
        )));
    }
    let mut data = Vec::with_capacity(count);
    match dtype {
        Dtype::F32 => {
            for chunk in payload.chunks_exact(4) {
                data.push(f32::from_le_bytes(chunk.try_into().unwrap()) as f64);
            }
        }
        Dtype::F64 => {
            for chunk in payload.chunks_exact(8) {
                data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
            }
        }
    }
    Tensor::new(shape, dtype, data)
}

/// Serialize a [`Tensor`] to npy bytes.
///
/// Output matches the reference writer byte-for-byte: version 1.0 header,
/// dict with `descr`/`fortran_order`/`shape`, space-padded so the payload
/// starts on a 64-byte boundary, newline-terminated.
pub fn write_array_file(tensor: &Tensor) -> Vec<u8> {
    let shape_str = match tensor.shape() {
        [n] => format!("({n},)"),
        dims => {
            let parts: Vec<String> = dims.iter().map(|d| d.to_string()).collect();
            format!("({})", parts.join(", "))
        }
    };
    let dict = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {}, }}",
        tensor.dtype().descr(),
        shape_str
    );
    // magic(6) + version(2) + len(2) + dict + padding + '\n', total % 64 == 0
    let unpadded = 10 + dict.len() + 1;
    let pad = (64 - unpadded % 64) % 64;
    let header_len = (dict.len() + pad + 1) as u16;

    let mut out = Vec::with_capacity(10 + header_len as usize + tensor.data().len() * 8);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&header_len.to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out.extend(std::iter::repeat_n(b' ', pad));
    out.push(b'\n');
    match tensor.dtype() {
        Dtype::F32 => {
            for &v in tensor.data() {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        Dtype::F64 => {
            for &v in tensor.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

/// Parse the header dict, e.g. `{'descr': '<f8', 'fortran_order': False, 'shape': (3, 2), }`.
fn parse_header_dict(header: &str) -> Result<(Dtype, bool, Vec<usize>), DatasetError> {
    let trimmed = header.trim_end_matches(['\n', ' ']);
    let inner = trimmed
        .strip_prefix('{')
        .and_then(|s| s.strip_suffix('}'))
        .ok_or_else(|| DatasetError::Format("header is not a dict".into()))?;

    let descr = extract_quoted_value(inner, "descr")?;
    let dtype = match descr.as_str() {
        "<f4" => Dtype::F32,
        "<f8" => Dtype::F64,
        other => {
            return Err(DatasetError::Unsupported(format!(
                "dtype descriptor '{other}' (only <f4/<f8)"
            )))
        }
    };

    let order_raw = extract_raw_value(inner, "fortran_order")?;
    let fortran_order = match order_raw.as_str() {
        "True" => true,
        "False" => false,
        other => {
            return Err(DatasetError::Format(format!(
                "fortran_order must be True or False, got '{other}'"
            )))
        }
    };

    let shape_raw = extract_raw_value(inner, "shape")?;
    let shape = parse_shape_tuple(&shape_raw)?;
    Ok((dtype, fortran_order, shape))
}

fn key_position(dict: &str, key: &str) -> Result<usize, DatasetError> {
    let quoted = format!("'{key}'");
    dict.find(&quoted)
        .map(|p| p + quoted.len())
        .ok_or_else(|| DatasetError::Format(format!("header missing key '{key}'")))
}

fn skip_colon(dict: &str, pos: usize) -> Result<usize, DatasetError> {
    let rest = &dict[pos..];
    let colon = rest
        .find(':')
        .ok_or_else(|| DatasetError::Format("missing ':' after header key".into()))?;
    Ok(pos + colon + 1)
}

fn extract_quoted_value(dict: &str, key: &str) -> Result<String, DatasetError> {
    let start = skip_colon(dict, key_position(dict, key)?)?;
    let rest = dict[start..].trim_start();
    let body = rest
        .strip_prefix('\'')
        .ok_or_else(|| DatasetError::Format(format!("value for '{key}' is not a string")))?;
    let end = body
        .find('\'')
        .ok_or_else(|| DatasetError::Format(format!("unterminated string for '{key}'")))?;
    Ok(body[..end].to_string())
}

fn extract_raw_value(dict: &str, key: &str) -> Result<String, DatasetError> {
    let start = skip_colon(dict, key_position(dict, key)?)?;
    let rest = dict[start..].trim_start();
    // value runs to the next top-level comma
    let mut depth = 0usize;
    let mut end = rest.len();
    for (i, c) in rest.char_indices() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                end = i;
                break;
            }
            _ => {}
        }
    }
    Ok(rest[..end].trim().to_string())
}

fn parse_shape_tuple(raw: &str) -> Result<Vec<usize>, DatasetError> {
    let inner = raw
        .strip_prefix('(')
        .and_then(|s| s.strip_suffix(')'))
        .ok_or_else(|| DatasetError::Format(format!("shape '{raw}' is not a tuple")))?;
    let mut dims = Vec::new();
    for part in inner.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue; // trailing comma of 1-tuples
        }
        let dim: usize = part
            .parse()
            .map_err(|_| DatasetError::Format(format!("bad shape entry '{part}'")))?;
        dims.push(dim);
    }
    if dims.is_empty() {
        return Err(DatasetError::Unsupported("0-D arrays not supported".into()));
    }
    Ok(dims)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seeded_values(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (rng.gen::<f32>() * 8.0 - 4.0) as f64).collect()
    }

    /// Test-only reference writer, assembled independently of
    /// `write_array_file` so the two can check each other.
    fn reference_npy(descr: &str, shape_str: &str, payload: &[u8]) -> Vec<u8> {
        let dict =
            format!("{{'descr': '{descr}', 'fortran_order': False, 'shape': {shape_str}, }}");
        let mut header = dict.into_bytes();
        while (10 + header.len() + 1) % 64 != 0 {
            header.push(b' ');
        }
        header.push(b'\n');
        let mut out = vec![0x93, b'N', b'U', b'M', b'P', b'Y', 1, 0];
        out.extend_from_slice(&(header.len() as u16).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(payload);
        out
    }

    #[test]
    fn minimal_one_by_one_f64() {
        let t = Tensor::new(vec![1, 1], Dtype::F64, vec![0.0]).unwrap();
        let bytes = write_array_file(&t);
        let back = parse_array_file(&bytes).unwrap();
        assert_eq!(back.shape(), &[1, 1]);
        assert_eq!(back.data(), &[0.0]);
        assert_eq!(back.dtype(), Dtype::F64);
    }

    #[test]
    fn roundtrip_matches_independent_reference_writer_7x3_f32() {
        let values = seeded_values(21, 41);
        let mut payload = Vec::new();
        for &v in &values {
            payload.extend_from_slice(&(v as f32).to_le_bytes());
        }
        let file = reference_npy("<f4", "(7, 3)", &payload);

        let parsed = parse_array_file(&file).unwrap();
        assert_eq!(parsed.shape(), &[7, 3]);
        assert_eq!(parsed.dtype(), Dtype::F32);
        assert_eq!(parsed.data(), values.as_slice());

        // our writer reproduces the reference bytes exactly
        let rewritten = write_array_file(&parsed);
        assert_eq!(rewritten, file);
        assert_eq!(parse_array_file(&rewritten).unwrap(), parsed);
    }

    #[test]
    fn roundtrip_5x4_f32_bit_exact() {
        let t = Tensor::new(vec![5, 4], Dtype::F32, seeded_values(20, 7)).unwrap();
        let back = parse_array_file(&write_array_file(&t)).unwrap();
        assert_eq!(back, t);
        for (a, b) in back.data().iter().zip(t.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn roundtrip_3d_f64_head_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<f64> = (0..2 * 3 * 8).map(|_| rng.gen::<f64>() * 10.0 - 5.0).collect();
        let t = Tensor::new(vec![2, 3, 8], Dtype::F64, data).unwrap();
        let back = parse_array_file(&write_array_file(&t)).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn bad_magic_is_format_error() {
        let t = Tensor::new(vec![1, 1], Dtype::F64, vec![0.0]).unwrap();
        let mut bytes = write_array_file(&t);
        bytes[0] ^= 0xff;
        assert!(matches!(
            parse_array_file(&bytes),
            Err(DatasetError::Format(_))
        ));
    }

    #[test]
    fn version_2_is_unsupported() {
        let t = Tensor::new(vec![1, 1], Dtype::F64, vec![0.0]).unwrap();
        let mut bytes = write_array_file(&t);
        bytes[6] = 2;
        assert!(matches!(
            parse_array_file(&bytes),
            Err(DatasetError::Unsupported(_))
        ));
    }

    #[test]
    fn fortran_order_rejected() {
        let mut file = reference_npy("<f8", "(2, 2)", &[0u8; 32]);
        let pos = file
            .windows(5)
            .position(|w| w == b"False")
            .expect("header carries fortran_order");
        file.splice(pos..pos + 5, *b"True ");
        let err = parse_array_file(&file).unwrap_err();
        assert!(matches!(err, DatasetError::Unsupported(_)));
    }

    #[test]
    fn integer_dtype_rejected() {
        let file = reference_npy("<i4", "(2,)", &[0u8; 8]);
        assert!(matches!(
            parse_array_file(&file),
            Err(DatasetError::Unsupported(_))
        ));
    }

    #[test]
    fn truncated_payload_is_corrupt() {
        let t = Tensor::new(vec![2, 2], Dtype::F64, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let bytes = write_array_file(&t);
        assert!(matches!(
            parse_array_file(&bytes[..bytes.len() - 8]),
            Err(DatasetError::Corrupt(_))
        ));
    }

    #[test]
    fn nan_payload_rejected() {
        let mut payload = Vec::new();
        for v in [1.0f64, f64::NAN] {
            payload.extend_from_slice(&v.to_le_bytes());
        }
        let file = reference_npy("<f8", "(2,)", &payload);
        assert!(matches!(parse_array_file(&file), Err(DatasetError::Data(_))));
    }

    #[test]
    fn four_dims_rejected() {
        let file = reference_npy("<f8", "(1, 1, 1, 2)", &[0u8; 16]);
        assert!(matches!(
            parse_array_file(&file),
            Err(DatasetError::Unsupported(_))
        ));
    }

    #[test]
    fn one_dim_shape_formats_with_trailing_comma() {
        let t = Tensor::new(vec![5], Dtype::F64, vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let bytes = write_array_file(&t);
        let header = String::from_utf8_lossy(&bytes[10..74]);
        assert!(header.contains("'shape': (5,)"), "header: {header}");
        assert_eq!(parse_array_file(&bytes).unwrap(), t);
    }

    // A file produced by the numpy reference implementation
    // (np.save of a seeded 3x4 <f4 array); guards interop.
    const NUMPY_F4_FIXTURE: &[u8] = &[
        147, 78, 85, 77, 80, 89, 1, 0, 118, 0, 123, 39, 100, 101, 115, 99, 114, 39, 58, 32, 39,
        60, 102, 52, 39, 44, 32, 39, 102, 111, 114, 116, 114, 97, 110, 95, 111, 114, 100, 101,
        114, 39, 58, 32, 70, 97, 108, 115, 101, 44, 32, 39, 115, 104, 97, 112, 101, 39, 58, 32,
        40, 51, 44, 32, 52, 41, 44, 32, 125, 32, 32, 32, 32, 32, 32, 32, 32, 32, 32, 32, 32, 32,
        32, 32, 32, 32, 32, 32, 32, 32, 32, 32, 32, 32, 32, 32, 32, 32, 32, 32, 32, 32, 32, 32,
        32, 32, 32, 32, 32, 32, 32, 32, 32, 32, 32, 32, 32, 32, 32, 32, 32, 32, 32, 32, 32, 32,
        32, 10, 25, 61, 33, 59, 45, 245, 24, 63, 204, 91, 12, 191, 212, 253, 227, 191, 156, 202,
        104, 191, 140, 220, 253, 191, 35, 89, 246, 61, 44, 140, 43, 64, 126, 2, 124, 191, 113,
        215, 158, 191, 148, 204, 122, 63, 229, 185, 54, 63,
    ];

    #[test]
    fn parses_numpy_reference_file() {
        let t = parse_array_file(NUMPY_F4_FIXTURE).unwrap();
        assert_eq!(t.shape(), &[3, 4]);
        assert_eq!(t.dtype(), Dtype::F32);
        // spot values from the generating session
        assert_eq!(t.data()[0], 0.00246030674315989f32 as f64);
        assert_eq!(t.data()[7], 2.6804304122924805);
        // byte-identical re-emission
        assert_eq!(write_array_file(&t), NUMPY_F4_FIXTURE);
    }
}
