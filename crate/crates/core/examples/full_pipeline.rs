//! Both design steps and the validation runs from a configuration file.
//!
//! ```text
//! cargo run --release --example full_pipeline -- configs/paper-first-reference.toml out/demo
//! ```
//! Without arguments the first bundled configuration runs on a small budget.

use std::path::PathBuf;

use zdshape::config::PipelineConfig;
use zdshape::pipeline::{run_config, RunOptions};

fn main() {
    let mut args = std::env::args().skip(1);
    let explicit = args.next().map(PathBuf::from);
    let path = explicit
        .clone()
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/paper-first-reference.toml")));
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("zdshape-demo"));

    let (mut cfg, text) = PipelineConfig::load(&path).unwrap_or_else(|e| panic!("{e}"));
    if explicit.is_none() {
        cfg.reference.samples = 300;
        cfg.ga.generations = 40;
        cfg.ga.restarts = 2;
        cfg.spring_ga.generations = 100;
        cfg.spring_ga.restarts = 2;
    }
    let opts = RunOptions {
        out: Some(out),
        ..RunOptions::default()
    };
    match run_config(cfg, &text, &opts) {
        Ok(o) => {
            let r = &o.report;
            println!("mass design {:?}, rms {:.5} vs {:.5} N m", r.mass.pm, r.mass.rms, r.mass.baseline_rms);
            for (s, v) in r.springs.iter().zip(&r.validation.fitted) {
                println!("n = {}: mse {:.3e}, zero dynamics {:?}", s.n, s.mse, v.zero_dynamics.deviation);
            }
            println!("{} files in {}", r.manifest.len(), o.out_dir.display());
            println!("timing {:?}", o.timing.stages);
        }
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.exit_code());
        }
    }
}
