use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub pixels: Vec<f64>,
    pub label: usize,
}

/// Labelled images split into train and test parts.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub classes: usize,
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl Dataset {
    pub fn new(
        channels: usize,
        height: usize,
        width: usize,
        classes: usize,
        train: Vec<Sample>,
        test: Vec<Sample>,
    ) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 || classes < 2 {
            return Err(Error::param(format!(
                "bad dataset geometry {channels}x{height}x{width} with {classes} classes"
            )));
        }
        let len = channels * height * width;
        for s in train.iter().chain(&test) {
            if s.pixels.len() != len {
                return Err(Error::Shape(format!("sample has {} values, expected {len}", s.pixels.len())));
            }
            if s.label >= classes {
                return Err(Error::Shape(format!("label {} with {classes} classes", s.label)));
            }
            if s.pixels.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse("non-finite pixel value".into()));
            }
        }
        Ok(Self {
            channels,
            height,
            width,
            classes,
            train,
            test,
        })
    }

    pub fn sample_len(&self) -> usize {
        self.channels * self.height * self.width
    }

    /// Text form: a `dims,<c>,<h>,<w>,<classes>` line, then one
    /// `train|test,<label>,<pixels...>` line per sample.
    pub fn to_text(&self) -> String {
        let mut s = format!("dims,{},{},{},{}\n", self.channels, self.height, self.width, self.classes);
        for (split, samples) in [("train", &self.train), ("test", &self.test)] {
            for x in samples {
                let _ = write!(s, "{split},{}", x.label);
                for v in &x.pixels {
                    let _ = write!(s, ",{v}");
                }
                s.push('\n');
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (_, head) = lines.next().ok_or(Error::EmptyDataset)?;
        let dims: Vec<&str> = head.split(',').collect();
        if dims.len() != 5 || dims[0] != "dims" {
            return Err(Error::Parse(format!("expected dims,<c>,<h>,<w>,<classes>, got {head:?}")));
        }
        let int = |s: &str| s.trim().parse::<usize>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
        let (c, h, w, k) = (int(dims[1])?, int(dims[2])?, int(dims[3])?, int(dims[4])?);
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (lineno, line) in lines {
            let mut f = line.split(',');
            let split = f.next().unwrap_or("");
            let label = int(f.next().unwrap_or(""))?;
            let pixels = f
                .map(|v| v.trim().parse::<f64>().map_err(|e| Error::Parse(format!("line {lineno}: {v:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            let sample = Sample { pixels, label };
            match split {
                "train" => train.push(sample),
                "test" => test.push(sample),
                other => return Err(Error::Parse(format!("line {lineno}: unknown split {other:?}"))),
            }
        }
        Dataset::new(c, h, w, k, train, test)
    }
}

pub const SHAPE_NAMES: [&str; 4] = ["square", "frame", "plus", "cross"];

fn draw(kind: usize, size: usize, rng: &mut ChaCha8Rng, intensity: f64, img: &mut [f64]) {
    let r = match kind {
        0 => rng.gen_range(1..=2),
        1 => rng.gen_range(2..=3),
        _ => rng.gen_range(2..=3),
    } as i64;
    let n = size as i64;
    let cy = rng.gen_range(r..n - r);
    let cx = rng.gen_range(r..n - r);
    for dy in -r..=r {
        for dx in -r..=r {
            let on = match kind {
                0 => true,
                1 => dy.abs() == r || dx.abs() == r,
                2 => dy == 0 || dx == 0,
                _ => dy.abs() == dx.abs(),
            };
            if on {
                img[((cy + dy) * n + (cx + dx)) as usize] = intensity;
            }
        }
    }
}

/// Four left-right symmetric shape classes (filled square, hollow frame,
/// plus, diagonal cross) at random positions on a noisy single-channel
/// `size x size` canvas.
pub fn synthetic_shapes(n_train: usize, n_test: usize, size: usize, seed: u64) -> Result<Dataset> {
    if size < 8 {
        return Err(Error::param(format!("canvas size must be at least 8, got {size}")));
    }
    if n_train == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut make = |count: usize| -> Vec<Sample> {
        (0..count)
            .map(|i| {
                let label = i % SHAPE_NAMES.len();
                let mut img = vec![0.0; size * size];
                let intensity = rng.gen_range(0.6..1.0);
                draw(label, size, &mut rng, intensity, &mut img);
                for v in &mut img {
                    let z: f64 = rng.sample(StandardNormal);
                    *v += 0.3 * z;
                }
                Sample { pixels: img, label }
            })
            .collect()
    };
    let train = make(n_train);
    let test = make(n_test);
    Dataset::new(1, size, size, SHAPE_NAMES.len(), train, test)
}
