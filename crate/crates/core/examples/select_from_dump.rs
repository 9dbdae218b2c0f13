//! Writes a synthetic embedding dump, reads it back and runs the full
//! selection, printing the record the CLI would emit.
//!
//! Pass a path to process an existing dump instead.

use tokcover::pipeline::select_tokens_detailed;
use tokcover::record::ResultRecord;
use tokcover::{read_dump, synth_sample, write_dump, AdaptiveTau, CoverageConfig};

fn main() -> tokcover::Result<()> {
    let path = match std::env::args_os().nth(1) {
        Some(p) => p.into(),
        None => {
            let p = std::env::temp_dir().join("tokcover_example.bin");
            write_dump(&synth_sample(576, 32, 8, 1024, 4096, 1), &p)?;
            p
        }
    };
    let sample = read_dump(&path)?;
    println!(
        "{}: {} vision tokens, {} text rows, agent rows: {}",
        path.display(),
        sample.sources(),
        sample.text.rows(),
        sample.agent_text.as_ref().map_or(0, |a| a.rows())
    );
    let cfg = CoverageConfig { adaptive_tau: AdaptiveTau::default_grid(), ..CoverageConfig::default().with_budget(64) };
    let out = select_tokens_detailed(&sample, &cfg)?;
    let record = ResultRecord::new("example", cfg.tau_t, cfg.alpha, &out, true);
    print!("{}", record.to_line());
    Ok(())
}
