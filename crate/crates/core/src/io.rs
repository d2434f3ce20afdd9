//! File formats: the `kernelset-v1` JSON document, binary PGM images and
//! plain CSV feature maps.
//!
//! A kernelset document looks like
//!
//! ```json
//! {"format":"kernelset-v1","model":"vgg16","dataset":"imagenet",
//!  "layers":[{"name":"block1_conv1","depth":0,"shape":[3,3,3,64],"weights":[...]}]}
//! ```
//!
//! with weights flattened as `((i * kw + j) * c_in + c) * c_out + f`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelLayer, KernelSet};
use crate::localization::FeatureMap2D;

pub const FORMAT_TAG: &str = "kernelset-v1";

#[derive(Serialize)]
struct FileOut<'a> {
    format: &'a str,
    model: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    dataset: Option<&'a str>,
    layers: Vec<LayerOut<'a>>,
}

#[derive(Serialize)]
struct LayerOut<'a> {
    name: &'a str,
    depth: usize,
    shape: [usize; 4],
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct FileIn {
    format: String,
    model: String,
    #[serde(default)]
    dataset: Option<String>,
    layers: Vec<LayerIn>,
}

#[derive(Deserialize)]
struct LayerIn {
    name: String,
    depth: usize,
    shape: [usize; 4],
    // kept loose so NaN/Infinity spellings get their own diagnostic
    weights: Vec<Value>,
}

fn layer_from_file(l: LayerIn) -> Result<KernelLayer> {
    let [kh, kw, c_in, c_out] = l.shape;
    if kh != kw {
        return Err(Error::Shape(format!("layer {}: kernel {kh}x{kw} is not square", l.name)));
    }
    let expected = kh * kw * c_in * c_out;
    if expected == 0 {
        return Err(Error::Shape(format!("layer {}: empty shape {:?}", l.name, l.shape)));
    }
    if l.weights.len() != expected {
        return Err(Error::WeightCount {
            layer: l.name,
            shape: l.shape,
            expected,
            found: l.weights.len(),
        });
    }
    let mut flat = Vec::with_capacity(expected);
    for (index, v) in l.weights.iter().enumerate() {
        match v.as_f64() {
            Some(x) if x.is_finite() => flat.push(x),
            Some(_) => return Err(Error::NonFinite { layer: l.name, index }),
            None => match v {
                Value::Null => return Err(Error::NonFinite { layer: l.name, index }),
                Value::String(s) if s.parse::<f64>().is_ok_and(|x| !x.is_finite()) => {
                    return Err(Error::NonFinite { layer: l.name, index })
                }
                other => {
                    return Err(Error::Parse(format!(
                        "layer {}: weight {index} is not a number: {other}",
                        l.name
                    )))
                }
            },
        }
    }
    let mut kernels = Vec::with_capacity(c_in * c_out);
    for f in 0..c_out {
        for c in 0..c_in {
            let mut w = Vec::with_capacity(kh * kw);
            for i in 0..kh {
                for j in 0..kw {
                    w.push(flat[((i * kw + j) * c_in + c) * c_out + f]);
                }
            }
            kernels.push(Kernel::new(kh, w)?);
        }
    }
    KernelLayer::new(l.name, l.depth, c_in, c_out, kernels)
}

pub fn parse_kernelset(text: &str) -> Result<KernelSet> {
    // Check the tag before the full structure so old or foreign documents get
    // the more useful diagnostic.
    let raw: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let tag = raw.get("format").and_then(Value::as_str).unwrap_or("");
    if tag != FORMAT_TAG {
        return Err(Error::FormatTag {
            expected: FORMAT_TAG.into(),
            found: tag.into(),
        });
    }
    let file: FileIn = serde_json::from_value(raw).map_err(|e| Error::Parse(e.to_string()))?;
    debug_assert_eq!(file.format, FORMAT_TAG);
    if file.layers.is_empty() {
        return Err(Error::Shape("kernelset has no layers".into()));
    }
    let layers = file.layers.into_iter().map(layer_from_file).collect::<Result<Vec<_>>>()?;
    Ok(KernelSet::new(file.model, file.dataset, layers))
}

pub fn read_kernelset(path: impl AsRef<Path>) -> Result<KernelSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_kernelset(&text)
}

/// Canonical serialization: fixed key order, shortest round-trip floats,
/// one layer per line.
pub fn kernelset_to_string(set: &KernelSet) -> Result<String> {
    if set.layers.is_empty() {
        return Err(Error::Shape("kernelset has no layers".into()));
    }
    let mut layers = Vec::with_capacity(set.layers.len());
    for l in &set.layers {
        if l.is_empty() {
            return Err(Error::Shape(format!("layer {} has no kernels", l.name)));
        }
        let k = l.kernel_size();
        let (c_in, c_out) = (l.in_channels, l.out_channels);
        let mut flat = vec![0.0; k * k * c_in * c_out];
        for f in 0..c_out {
            for c in 0..c_in {
                let w = l.kernel(c, f);
                for i in 0..k {
                    for j in 0..k {
                        let v = w.get(i, j);
                        if !v.is_finite() {
                            return Err(Error::NonFinite {
                                layer: l.name.clone(),
                                index: ((i * k + j) * c_in + c) * c_out + f,
                            });
                        }
                        flat[((i * k + j) * c_in + c) * c_out + f] = v;
                    }
                }
            }
        }
        layers.push(LayerOut {
            name: &l.name,
            depth: l.depth,
            shape: [k, k, c_in, c_out],
            weights: flat,
        });
    }
    let doc = FileOut {
        format: FORMAT_TAG,
        model: &set.model,
        dataset: set.dataset.as_deref(),
        layers,
    };
    // one layer per line keeps diffs readable
    let mut out = String::new();
    let head = serde_json::to_string(&FileOut {
        layers: Vec::new(),
        ..doc
    })
    .map_err(|e| Error::Parse(e.to_string()))?;
    let head = head.strip_suffix("[]}").expect("layers serialized last");
    out.push_str(head);
    out.push_str("[\n");
    let FileOut { layers, .. } = doc;
    for (i, l) in layers.iter().enumerate() {
        out.push_str(&serde_json::to_string(l).map_err(|e| Error::Parse(e.to_string()))?);
        out.push_str(if i + 1 < layers.len() { ",\n" } else { "\n" });
    }
    out.push_str("]}\n");
    Ok(out)
}

pub fn write_kernelset(set: &KernelSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = kernelset_to_string(set)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Encodes a row-major matrix as binary PGM (P5, maxval 255).
///
/// With `normalize`, values are min-max scaled to 0..=255 and constant
/// matrices become mid-gray 128. Without it, values are taken as fractions
/// of white and clamped to `[0, 1]`.
pub fn encode_pgm(values: &[f64], rows: usize, cols: usize, normalize: bool) -> Result<Vec<u8>> {
    if rows == 0 || cols == 0 || values.len() != rows * cols {
        return Err(Error::Shape(format!(
            "{rows}x{cols} image needs {} values, got {}",
            rows * cols,
            values.len()
        )));
    }
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    if normalize {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            out.extend(values.iter().map(|v| ((v - lo) / (hi - lo) * 255.0).round() as u8));
        } else {
            out.extend(std::iter::repeat_n(128u8, values.len()));
        }
    } else {
        out.extend(values.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    }
    Ok(out)
}

pub fn emit_pgm(values: &[f64], rows: usize, cols: usize, path: impl AsRef<Path>, normalize: bool) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_pgm(values, rows, cols, normalize)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Decodes a P5 (binary) or P2 (ASCII) PGM into values divided by maxval.
pub fn decode_pgm(bytes: &[u8]) -> Result<FeatureMap2D> {
    let mut pos = 0;
    let mut token = || -> Result<String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Parse("truncated PGM header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    let magic = token()?;
    let num = |s: String| s.parse::<usize>().map_err(|e| Error::Parse(format!("PGM header {s:?}: {e}")));
    let cols = num(token()?)?;
    let rows = num(token()?)?;
    let maxval = num(token()?)?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Parse(format!("PGM maxval {maxval} out of range")));
    }
    let n = rows * cols;
    let values: Vec<f64> = match magic.as_str() {
        "P5" => {
            let body = &bytes[(pos + 1).min(bytes.len())..];
            let width = if maxval < 256 { 1 } else { 2 };
            if body.len() < n * width {
                return Err(Error::Parse(format!("PGM body has {} bytes, need {}", body.len(), n * width)));
            }
            (0..n)
                .map(|i| {
                    let v = if width == 1 {
                        body[i] as usize
                    } else {
                        (body[2 * i] as usize) << 8 | body[2 * i + 1] as usize
                    };
                    v as f64 / maxval as f64
                })
                .collect()
        }
        "P2" => (0..n)
            .map(|_| Ok(num(token()?)? as f64 / maxval as f64))
            .collect::<Result<_>>()?,
        other => return Err(Error::Parse(format!("unsupported PGM magic {other:?}"))),
    };
    FeatureMap2D::new(rows, cols, values)
}

/// Parses comma-separated rows of non-negative reals; blank lines and `#`
/// comments are skipped.
pub fn parse_csv_map(text: &str) -> Result<FeatureMap2D> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| {
                let f = f.trim();
                let v = f
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {f:?}: {e}", lineno + 1)))?;
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::Parse(format!("line {}: value {v} is not a finite non-negative real", lineno + 1)));
                }
                Ok(v)
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("empty map".into()));
    }
    FeatureMap2D::from_rows(&rows)
}

/// Reads a feature map, choosing the parser by extension (`.pgm` or CSV).
pub fn read_feature_map(path: impl AsRef<Path>) -> Result<FeatureMap2D> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let is_pgm = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
        || bytes.starts_with(b"P5")
        || bytes.starts_with(b"P2");
    if is_pgm {
        decode_pgm(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))?;
        parse_csv_map(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn gaussian_doc() -> String {
        let w: Vec<String> = fixtures::gaussian().weights().iter().map(|x| x.to_string()).collect();
        format!(
            r#"{{"format":"kernelset-v1","model":"fixture","layers":[{{"name":"g","depth":0,"shape":[3,3,1,1],"weights":[{}]}}]}}"#,
            w.join(",")
        )
    }

    #[test]
    fn reads_minimal_document() {
        let set = parse_kernelset(&gaussian_doc()).unwrap();
        assert_eq!(set.layers.len(), 1);
        assert_eq!(set.layers[0].kernels, vec![fixtures::gaussian()]);
        assert_eq!(set.dataset, None);
    }

    #[test]
    fn distinct_diagnostics() {
        let doc = gaussian_doc();
        assert!(matches!(
            parse_kernelset(&doc.replace("kernelset-v1", "kernelset-v0")),
            Err(Error::FormatTag { .. })
        ));
        assert!(matches!(
            parse_kernelset(&doc.replace(",0.06]", "]")),
            Err(Error::WeightCount { expected: 9, found: 8, .. })
        ));
        assert!(matches!(
            parse_kernelset(&doc.replace("0.25", "null")),
            Err(Error::NonFinite { index: 4, .. })
        ));
        assert!(matches!(
            parse_kernelset(&doc.replace("0.25", "\"NaN\"")),
            Err(Error::NonFinite { index: 4, .. })
        ));
        assert!(matches!(
            parse_kernelset(&doc.replace("0.25", "1e999")),
            Err(Error::Parse(_) | Error::NonFinite { .. })
        ));
        assert!(matches!(parse_kernelset("{"), Err(Error::Parse(_))));
        assert!(matches!(
            parse_kernelset(&doc.replace("[3,3,1,1]", "[3,1,1,3]")),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn flattening_order() {
        // shape [3,3,2,2]: weight index ((i*3+j)*2+c)*2+f = 100*f + 10*c + (i*3+j)
        let mut flat = vec![0.0; 36];
        for i in 0..3 {
            for j in 0..3 {
                for c in 0..2 {
                    for f in 0..2 {
                        flat[((i * 3 + j) * 2 + c) * 2 + f] = (100 * f + 10 * c + i * 3 + j) as f64;
                    }
                }
            }
        }
        let w: Vec<String> = flat.iter().map(|x| x.to_string()).collect();
        let doc = format!(
            r#"{{"format":"kernelset-v1","model":"m","dataset":"d","layers":[{{"name":"l","depth":3,"shape":[3,3,2,2],"weights":[{}]}}]}}"#,
            w.join(",")
        );
        let set = parse_kernelset(&doc).unwrap();
        let l = &set.layers[0];
        assert_eq!(l.len(), 4);
        assert_eq!(l.kernel(1, 1).get(2, 1), 117.0);
        assert_eq!(l.kernel(0, 1).get(0, 0), 100.0);
        assert_eq!(set.dataset.as_deref(), Some("d"));
        let again = parse_kernelset(&kernelset_to_string(&set).unwrap()).unwrap();
        assert_eq!(again, set);
    }

    #[test]
    fn writer_is_canonical() {
        let set = parse_kernelset(&gaussian_doc()).unwrap();
        let a = kernelset_to_string(&set).unwrap();
        assert_eq!(a, kernelset_to_string(&set).unwrap());
        assert!(a.starts_with(r#"{"format":"kernelset-v1","model":"fixture","layers":["#));
        assert!(a.contains("0.06,0.12,0.06"));
        let empty = KernelSet::new("e", None, vec![]);
        assert!(kernelset_to_string(&empty).is_err());
    }

    #[test]
    fn pgm_encoding() {
        let bytes = encode_pgm(&[0.0, 1.0, 2.0, 3.0], 2, 2, true).unwrap();
        assert_eq!(&bytes[..11], b"P5\n2 2\n255\n");
        assert_eq!(&bytes[11..], &[0, 85, 170, 255]);
        let flat = encode_pgm(&[0.3; 6], 2, 3, true).unwrap();
        assert!(flat[11..].iter().all(|b| *b == 128));
        let g = fixtures::gaussian();
        let img = encode_pgm(g.weights(), 3, 3, true).unwrap();
        let px = &img[11..];
        assert_eq!(px[4], 255);
        assert!(px.iter().enumerate().all(|(i, &v)| i == 4 || v < 255));
        assert!(encode_pgm(&[], 0, 0, true).is_err());
    }

    #[test]
    fn pgm_decode_roundtrip() {
        let bytes = encode_pgm(&[0.0, 0.5, 1.0, 0.25, 0.75, 1.0], 2, 3, false).unwrap();
        let map = decode_pgm(&bytes).unwrap();
        assert_eq!((map.rows(), map.cols()), (2, 3));
        assert_eq!(map.get(0, 2), 1.0);
        assert!((map.get(0, 1) - 128.0 / 255.0).abs() < 1e-12);
        let ascii = b"P2\n# c\n2 1\n4\n0 4\n";
        let m = decode_pgm(ascii).unwrap();
        assert_eq!(m.values(), &[0.0, 1.0]);
        assert!(decode_pgm(b"P6\n1 1\n255\n\0").is_err());
    }

    #[test]
    fn csv_maps() {
        let m = parse_csv_map("# map\n1,2,3\n4, 5 ,6\n\n").unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 3));
        assert_eq!(m.get(1, 1), 5.0);
        assert!(parse_csv_map("1,2\n3\n").is_err());
        assert!(parse_csv_map("1,-2\n").is_err());
        assert!(parse_csv_map("1,x\n").is_err());
        assert!(parse_csv_map("").is_err());
    }
}
