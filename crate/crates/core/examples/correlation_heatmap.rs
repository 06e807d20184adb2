//! Pearson correlation matrix of a synthetic dataset, written as CSV and as a
//! PGM heatmap.
//!
//! cargo run --example correlation_heatmap -- [out_dir]

use std::fs::File;
use std::path::PathBuf;

use swarmformer::data::{pearson_matrix, synthesize_dataset};
use swarmformer::pixmap::Heatmap;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "example_out".into()));
    std::fs::create_dir_all(&out)?;

    let data = synthesize_dataset(500, 0.05, 1)?;
    let matrix = pearson_matrix(&data)?;
    for (i, j, r) in matrix.strongest_pairs(5) {
        println!("{:>9} ~ {:<9} r = {r:+.3}", matrix.names()[i], matrix.names()[j]);
    }

    matrix.write_csv(File::create(out.join("correlation.csv"))?)?;
    let k = matrix.size();
    Heatmap {
        values: matrix.values(),
        rows: k,
        cols: k,
        lo: -1.0,
        hi: 1.0,
        cell_px: 12,
    }
    .write_pgm(File::create(out.join("correlation.pgm"))?, &[matrix.names().join(" ")])?;
    println!("wrote {}", out.display());
    Ok(())
}
