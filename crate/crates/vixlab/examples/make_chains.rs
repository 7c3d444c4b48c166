//! Regenerates the synthetic Black chains under `examples/chains`.
//!
//! `cargo run -p vixlab --example make_chains`

use std::path::Path;

use vixlab::io::{write_chain_csv, write_json, ChainFile, ChainMeta, ChainRecord};
use vixlab_core::black::{black_chain, relative_strike_grid};

const FORWARD: f64 = 100.0;
const SIGMA: f64 = 0.2;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/chains");
    std::fs::create_dir_all(&dir)?;
    let strikes = relative_strike_grid(FORWARD, 0.5, 2.0, 0.001);
    for (name, days) in [("black_near", 23), ("black_next", 37)] {
        let chain = black_chain(FORWARD, SIGMA, days, 0.0, &strikes)?;
        write_chain_csv(&dir.join(format!("{name}.csv")), &chain, None)?;
    }
    let coarse = relative_strike_grid(FORWARD, 0.5, 2.0, 0.01);
    let chain = black_chain(FORWARD, SIGMA, 30, 0.01, &coarse)?;
    let file = ChainFile {
        meta: ChainMeta { days_to_expiry: 30, rate: 0.01, spot_time: Some("2024-01-02T15:00:00Z".into()) },
        rows: chain.rows().iter().map(ChainRecord::from).collect(),
    };
    write_json(&dir.join("black_30d.json"), &file)?;
    Ok(())
}
