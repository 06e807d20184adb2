//! Grayscale heatmaps in the plain-text PGM format (`P2`).
//!
//! A grid of values is mapped linearly from `[lo, hi]` to gray levels
//! `0..=255` (values outside the range are clamped) and every cell is drawn
//! as a `cell_px × cell_px` block. Header comments carry the value range and
//! any caller-supplied notes.

use std::io::{self, Write};

pub const MAX_GRAY: u32 = 255;

/// Gray level for `v` on the `[lo, hi]` scale. A degenerate range maps to 0.
pub fn gray_level(v: f64, lo: f64, hi: f64) -> u32 {
    if !(hi > lo) {
        return 0;
    }
    let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
    (t * MAX_GRAY as f64).round() as u32
}

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap<'a> {
    pub values: &'a [f64],
    pub rows: usize,
    pub cols: usize,
    pub lo: f64,
    pub hi: f64,
    pub cell_px: usize,
}

impl Heatmap<'_> {
    pub fn write_pgm<W: Write>(&self, mut sink: W, comments: &[String]) -> io::Result<()> {
        if self.values.len() != self.rows * self.cols {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                format!("{} values for a {}x{} grid", self.values.len(), self.rows, self.cols),
            ));
        }
        let px = self.cell_px.max(1);
        writeln!(sink, "P2")?;
        writeln!(sink, "# values {} .. {} mapped to 0 .. {}", self.lo, self.hi, MAX_GRAY)?;
        for c in comments {
            for line in c.lines() {
                writeln!(sink, "# {line}")?;
            }
        }
        writeln!(sink, "{} {}", self.cols * px, self.rows * px)?;
        writeln!(sink, "{MAX_GRAY}")?;
        for r in 0..self.rows {
            let levels: Vec<String> = (0..self.cols)
                .flat_map(|c| {
                    let g = gray_level(self.values[r * self.cols + c], self.lo, self.hi).to_string();
                    std::iter::repeat_n(g, px)
                })
                .collect();
            let line = levels.join(" ");
            for _ in 0..px {
                writeln!(sink, "{line}")?;
            }
        }
        sink.flush()
    }
}
