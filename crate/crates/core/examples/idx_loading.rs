//! Reads an IDX image file into a `[N×pixels]` matrix scaled to [0, 1].
//! Without an argument a small file is written to the temp directory first.
//!
//! cargo run --release --example idx_loading -- [path/to/train-images-idx3-ubyte]

use std::path::PathBuf;

use ardvae::datasets::{load_idx, save_idx};

fn main() -> ardvae::Result<()> {
    let path = match std::env::args().nth(1) {
        Some(p) => PathBuf::from(p),
        None => {
            let p = std::env::temp_dir().join("ardvae-example-idx3-ubyte");
            let payload: Vec<u8> = (0..5 * 4 * 4).map(|i| (i * 13 % 256) as u8).collect();
            save_idx(&p, &[5, 4, 4], &payload)?;
            p
        }
    };
    let x = load_idx(&path)?;
    println!("{}: {} samples of {} values", path.display(), x.rows(), x.cols());
    let (lo, hi) = x.data().iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    println!("range [{lo:.3}, {hi:.3}], mean {:.4}", x.sum() / x.len() as f64);
    println!("first row {:?}", &x.row(0)[..x.cols().min(8)]);
    Ok(())
}
