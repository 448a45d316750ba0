//! Runs the full keyword-task comparison with the desk preset and prints the
//! report. `cargo run --release --example keyword -- [seed] [key=value ...]`

use std::time::Instant;

use distill_lab::eval::markdown_table;
use distill_lab::pipeline::{
    compare_methods, distill_generator, feature_extractor, load_task, pretrain, Generators,
    RunConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let mut cfg = RunConfig::desk().normalized();
    if let Some(seed) = args.next() {
        cfg.seed = seed.parse()?;
    }
    for a in args {
        cfg = cfg.with_override(&a)?;
    }
    cfg.workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let t0 = Instant::now();
    let task = load_task(&cfg.task, cfg.seed)?;
    let features = feature_extractor(&task, &cfg)?;
    let pre = pretrain(&task, &cfg)?;
    let n = pre.losses.len();
    eprintln!(
        "pretrain: first {:.3} last {:.3} ({:.1}s)",
        pre.losses[..10.min(n)].iter().sum::<f64>() / 10f64.min(n as f64),
        pre.losses[n.saturating_sub(50)..].iter().sum::<f64>() / 50f64.min(n as f64),
        t0.elapsed().as_secs_f64()
    );
    let t1 = Instant::now();
    let out = distill_generator(
        &task,
        pre.generator.clone(),
        &features,
        &cfg.distill,
        cfg.seed,
        None,
    )?;
    let losses = out.log.step_losses();
    let tenth = (losses.len() / 10).max(1);
    eprintln!(
        "distill: {} steps, first-10% mean L_GM {:.4}, last-10% {:.4} ({:.1}s)",
        losses.len(),
        losses[..tenth].iter().sum::<f64>() / tenth as f64,
        losses[losses.len() - tenth..].iter().sum::<f64>() / tenth as f64,
        t1.elapsed().as_secs_f64()
    );
    let t2 = Instant::now();
    let gens = Generators {
        pretrained: Some(&pre.generator),
        distilled: Some(&out.generator),
    };
    let reports = compare_methods(
        &cfg.experiment.methods,
        cfg.experiment.dpc,
        &task,
        &features,
        gens,
        &cfg,
        cfg.learner.arch,
    )?;
    println!("{}", markdown_table("keyword", &reports));
    let cross = compare_methods(
        &cfg.experiment.methods,
        cfg.experiment.dpc,
        &task,
        &features,
        gens,
        &cfg,
        cfg.experiment.cross_arch,
    )?;
    println!("{}", markdown_table("keyword, cross arch", &cross));
    eprintln!(
        "eval {:.1}s, total {:.1}s",
        t2.elapsed().as_secs_f64(),
        t0.elapsed().as_secs_f64()
    );
    Ok(())
}
