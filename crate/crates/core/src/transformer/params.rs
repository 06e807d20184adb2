use std::io::{Read, Write};

use rand::Rng;
use thiserror::Error;

use super::config::ModelShape;
use crate::rng::seeded;

/// Location of one tensor inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorSpan {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl TensorSpan {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpans {
    pub ln1_gain: TensorSpan,
    pub ln1_bias: TensorSpan,
    pub wq: TensorSpan,
    pub wk: TensorSpan,
    pub wv: TensorSpan,
    pub wo: TensorSpan,
    pub ln2_gain: TensorSpan,
    pub ln2_bias: TensorSpan,
    pub ff1_w: TensorSpan,
    pub ff1_b: TensorSpan,
    pub ff2_w: TensorSpan,
    pub ff2_b: TensorSpan,
}

/// Offsets of every trainable tensor. Gradients share the same layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    pub emb_scale: TensorSpan,
    pub emb_shift: TensorSpan,
    pub layers: Vec<LayerSpans>,
    pub head_w: TensorSpan,
    pub head_b: TensorSpan,
    total: usize,
}

impl ParamLayout {
    pub fn new(shape: &ModelShape) -> Self {
        let mut next = 0;
        let mut span = |rows: usize, cols: usize| {
            let s = TensorSpan {
                offset: next,
                rows,
                cols,
            };
            next += rows * cols;
            s
        };
        let (t, d, f) = (shape.n_features, shape.d_model, shape.d_ff);
        let emb_scale = span(t, d);
        let emb_shift = span(t, d);
        let layers = (0..shape.n_layers)
            .map(|_| LayerSpans {
                ln1_gain: span(1, d),
                ln1_bias: span(1, d),
                wq: span(d, d),
                wk: span(d, d),
                wv: span(d, d),
                wo: span(d, d),
                ln2_gain: span(1, d),
                ln2_bias: span(1, d),
                ff1_w: span(d, f),
                ff1_b: span(1, f),
                ff2_w: span(f, d),
                ff2_b: span(1, d),
            })
            .collect();
        let head_w = span(d, 2);
        let head_b = span(1, 2);
        Self {
            emb_scale,
            emb_shift,
            layers,
            head_w,
            head_b,
            total: next,
        }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// Every trainable tensor with a stable name, in storage order.
    pub fn named(&self) -> Vec<(String, TensorSpan)> {
        let mut out = vec![
            ("embedding.scale".to_string(), self.emb_scale),
            ("embedding.shift".to_string(), self.emb_shift),
        ];
        for (l, s) in self.layers.iter().enumerate() {
            for (name, span) in [
                ("ln1.gain", s.ln1_gain),
                ("ln1.bias", s.ln1_bias),
                ("attn.query", s.wq),
                ("attn.key", s.wk),
                ("attn.value", s.wv),
                ("attn.output", s.wo),
                ("ln2.gain", s.ln2_gain),
                ("ln2.bias", s.ln2_bias),
                ("ffn.w1", s.ff1_w),
                ("ffn.b1", s.ff1_b),
                ("ffn.w2", s.ff2_w),
                ("ffn.b2", s.ff2_b),
            ] {
                out.push((format!("layer{l}.{name}"), span));
            }
        }
        out.push(("head.weight".to_string(), self.head_w));
        out.push(("head.bias".to_string(), self.head_b));
        out
    }
}

/// Fixed sinusoidal encoding, `n_positions × d_model`, base 10000:
/// even columns `sin(pos / 10000^(2i/d))`, odd columns the matching cosine.
pub fn positional_encoding(n_positions: usize, d_model: usize) -> Vec<f64> {
    let mut pe = vec![0.0; n_positions * d_model];
    for pos in 0..n_positions {
        for pair in (0..d_model).step_by(2) {
            let angle = pos as f64 / 10000f64.powf(pair as f64 / d_model as f64);
            pe[pos * d_model + pair] = angle.sin();
            if pair + 1 < d_model {
                pe[pos * d_model + pair + 1] = angle.cos();
            }
        }
    }
    pe
}

/// All tensors of one encoder classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub shape: ModelShape,
    pub layout: ParamLayout,
    /// Trainable values, laid out by [`ParamLayout`].
    pub values: Vec<f64>,
    /// Fixed positional encodings, `n_features × d_model`. Not trained.
    pub positional: Vec<f64>,
}

impl ModelParams {
    /// Seeded initialization: matrices uniform in `±1/√fan_in`, layer-norm
    /// gains 1, biases 0. Embedding lifts have fan-in 1.
    pub fn init(shape: ModelShape, seed: u64) -> Self {
        let layout = ParamLayout::new(&shape);
        let mut values = vec![0.0; layout.total()];
        let mut rng = seeded(seed);
        let mut fill = |values: &mut [f64], span: TensorSpan, fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for v in &mut values[span.range()] {
                *v = rng.gen_range(-bound..=bound);
            }
        };
        fill(&mut values, layout.emb_scale, 1);
        fill(&mut values, layout.emb_shift, 1);
        for s in &layout.layers {
            values[s.ln1_gain.range()].fill(1.0);
            values[s.ln2_gain.range()].fill(1.0);
            for w in [s.wq, s.wk, s.wv, s.wo, s.ff1_w, s.ff2_w] {
                fill(&mut values, w, w.rows);
            }
        }
        fill(&mut values, layout.head_w, layout.head_w.rows);
        Self {
            positional: positional_encoding(shape.n_features, shape.d_model),
            shape,
            layout,
            values,
        }
    }

    pub fn tensor(&self, span: TensorSpan) -> &[f64] {
        &self.values[span.range()]
    }

    pub fn tensor_mut(&mut self, span: TensorSpan) -> &mut [f64] {
        &mut self.values[span.range()]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Write the flat binary model file.
    ///
    /// Layout, all integers little-endian `u32`, all values little-endian `f64`:
    /// magic `SFMP`, version `1`, `n_features d_model n_heads d_ff n_layers`,
    /// digest length + UTF-8 digest, tensor count, then per tensor
    /// name length + UTF-8 name + rows + cols, then every tensor's values
    /// row-major in header order. The first tensor is `positional`.
    pub fn save<W: Write>(&self, mut sink: W, digest: &str) -> Result<(), ModelFileError> {
        let put = |w: &mut W, v: usize| w.write_all(&(v as u32).to_le_bytes());
        sink.write_all(MAGIC)?;
        sink.write_all(&FORMAT_VERSION.to_le_bytes())?;
        let s = self.shape;
        for v in [s.n_features, s.d_model, s.n_heads, s.d_ff, s.n_layers] {
            put(&mut sink, v)?;
        }
        put(&mut sink, digest.len())?;
        sink.write_all(digest.as_bytes())?;

        let named = self.layout.named();
        put(&mut sink, named.len() + 1)?;
        let positional = ("positional".to_string(), s.n_features, s.d_model);
        let headers = std::iter::once(positional).chain(named.iter().map(|(n, sp)| (n.clone(), sp.rows, sp.cols)));
        for (name, rows, cols) in headers {
            put(&mut sink, name.len())?;
            sink.write_all(name.as_bytes())?;
            put(&mut sink, rows)?;
            put(&mut sink, cols)?;
        }
        for v in self.positional.iter().chain(&self.values) {
            sink.write_all(&v.to_le_bytes())?;
        }
        sink.flush()?;
        Ok(())
    }

    /// Read a file written by [`ModelParams::save`]; returns the embedded digest too.
    pub fn load<R: Read>(mut source: R) -> Result<(Self, String), ModelFileError> {
        let mut magic = [0u8; 4];
        source.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(ModelFileError::BadMagic);
        }
        let version = read_u32(&mut source)?;
        if version != FORMAT_VERSION {
            return Err(ModelFileError::UnsupportedVersion(version));
        }
        let mut dims = [0usize; 5];
        for d in &mut dims {
            *d = read_u32(&mut source)? as usize;
        }
        let shape = ModelShape {
            n_features: dims[0],
            d_model: dims[1],
            n_heads: dims[2],
            d_ff: dims[3],
            n_layers: dims[4],
        };
        if shape.n_heads == 0 || !shape.d_model.is_multiple_of(shape.n_heads) {
            return Err(ModelFileError::Mismatch("heads do not divide d_model".into()));
        }
        let digest = read_string(&mut source)?;
        let layout = ParamLayout::new(&shape);
        let mut expected = vec![("positional".to_string(), shape.n_features, shape.d_model)];
        expected.extend(layout.named().into_iter().map(|(n, s)| (n, s.rows, s.cols)));
        let count = read_u32(&mut source)? as usize;
        if count != expected.len() {
            return Err(ModelFileError::Mismatch(format!(
                "expected {} tensors, file lists {count}",
                expected.len()
            )));
        }
        for (name, rows, cols) in &expected {
            let got = read_string(&mut source)?;
            let (r, c) = (read_u32(&mut source)? as usize, read_u32(&mut source)? as usize);
            if &got != name || r != *rows || c != *cols {
                return Err(ModelFileError::Mismatch(format!(
                    "tensor {got} ({r}×{c}) where {name} ({rows}×{cols}) was expected"
                )));
            }
        }
        let mut read_values = |n: usize| -> Result<Vec<f64>, ModelFileError> {
            let mut buf = vec![0u8; n * 8];
            source.read_exact(&mut buf)?;
            Ok(buf
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
                .collect())
        };
        let positional = read_values(shape.n_features * shape.d_model)?;
        let values = read_values(layout.total())?;
        Ok((
            Self {
                shape,
                layout,
                values,
                positional,
            },
            digest,
        ))
    }
}

const MAGIC: &[u8; 4] = b"SFMP";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u32),
    #[error("model file does not match its header: {0}")]
    Mismatch(String),
    #[error("model file text is not UTF-8")]
    Utf8,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, ModelFileError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_string<R: Read>(r: &mut R) -> Result<String, ModelFileError> {
    let len = read_u32(r)? as usize;
    if len > 1 << 16 {
        return Err(ModelFileError::Mismatch(format!("implausible string length {len}")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| ModelFileError::Utf8)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape() -> ModelShape {
        ModelShape {
            n_features: 5,
            d_model: 4,
            n_heads: 2,
            d_ff: 6,
            n_layers: 2,
        }
    }

    #[test]
    fn positional_row_zero() {
        let pe = positional_encoding(3, 4);
        assert_eq!(&pe[..4], &[0.0, 1.0, 0.0, 1.0]);
        // position 1, pair 2: angle 1 / 10000^(2/4) = 0.01
        assert!((pe[4 + 2] - 0.01f64.sin()).abs() < 1e-15);
        assert!((pe[4 + 3] - 0.01f64.cos()).abs() < 1e-15);
    }

    #[test]
    fn layout_is_contiguous() {
        let layout = ParamLayout::new(&shape());
        let mut next = 0;
        for (_, span) in layout.named() {
            assert_eq!(span.offset, next);
            next += span.len();
        }
        assert_eq!(next, layout.total());
    }

    #[test]
    fn init_is_seeded() {
        let a = ModelParams::init(shape(), 3);
        assert_eq!(a, ModelParams::init(shape(), 3));
        assert_ne!(a.values, ModelParams::init(shape(), 4).values);
        assert!(a.tensor(a.layout.layers[0].ln1_gain).iter().all(|&g| g == 1.0));
        assert!(a.tensor(a.layout.head_b).iter().all(|&b| b == 0.0));
        let bound = 1.0 / 4f64.sqrt();
        assert!(a.tensor(a.layout.layers[1].wq).iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn binary_round_trip() {
        let p = ModelParams::init(shape(), 9);
        let mut buf = Vec::new();
        p.save(&mut buf, "abc123").unwrap();
        assert_eq!(&buf[..4], b"SFMP");
        let (q, digest) = ModelParams::load(buf.as_slice()).unwrap();
        assert_eq!(digest, "abc123");
        assert_eq!(p, q);
    }

    #[test]
    fn rejects_truncated_or_foreign_files() {
        assert!(matches!(
            ModelParams::load(&b"XXXX\x01\0\0\0"[..]),
            Err(ModelFileError::BadMagic)
        ));
        let p = ModelParams::init(shape(), 9);
        let mut buf = Vec::new();
        p.save(&mut buf, "").unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(ModelParams::load(buf.as_slice()), Err(ModelFileError::Io(_))));
    }
}
