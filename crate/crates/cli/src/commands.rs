use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use distill_lab::autodiff::{load_checkpoint, save_checkpoint};
use distill_lab::coreset::select;
use distill_lab::coreset::Strategy;
use distill_lab::eval::{markdown_table, sweep_svg, write_reports_csv, EvalReport, Method};
use distill_lab::models::{GeneratorModel, LearnerModel};
use distill_lab::pipeline::{
    ablation, compare_methods, distill_generator, dpc_sweep, feature_extractor, load_task,
    pretrain, Generators, RunConfig, Task,
};
use distill_lab::seeds::derive_seed;
use distill_lab::synthesis::generate_distilled;
use distill_lab::text::{write_jsonl, Sample};

use crate::rundir::RunDir;
use crate::{resolve_config, Command, Common, Failure};

struct Ctx {
    cfg: RunConfig,
    dir: RunDir,
    task: Task,
}

type Outcome = Result<(), (Failure, Option<PathBuf>)>;

/// Flags that change what a subcommand computes, folded into the config
/// (and so into the run id) before the run directory exists.
#[derive(Default)]
struct Flags<'a> {
    dpc: Option<usize>,
    methods: Option<(&'a str, &'a [Method])>,
    sweep_dpcs: &'a [usize],
    inputs: Vec<(&'static str, PathBuf)>,
}

fn setup(
    common: &Common,
    subcommand: &str,
    flags: Flags<'_>,
) -> Result<Ctx, (Failure, Option<PathBuf>)> {
    let mut cfg = resolve_config(common).map_err(|f| (f, None))?;
    if let Some(d) = flags.dpc {
        cfg.experiment.dpc = d;
    }
    if let Some((key, m)) = flags.methods {
        if !m.is_empty() {
            match key {
                "sweep" => cfg.experiment.sweep_methods = m.to_vec(),
                _ => cfg.experiment.methods = m.to_vec(),
            }
        }
    }
    if !flags.sweep_dpcs.is_empty() {
        cfg.experiment.sweep_dpcs = flags.sweep_dpcs.to_vec();
    }
    let dir = RunDir::create(&common.out, subcommand, &cfg, &flags.inputs)
        .map_err(|e| (e.into(), None))?;
    let task = load_task(&cfg.task, cfg.seed)
        .context("loading task")
        .map_err(|e| (e.into(), Some(dir.path.clone())))?;
    Ok(Ctx { cfg, dir, task })
}

fn with_ctx(
    common: &Common,
    subcommand: &str,
    flags: Flags<'_>,
    body: impl FnOnce(&Ctx) -> anyhow::Result<()>,
) -> Outcome {
    let ctx = setup(common, subcommand, flags)?;
    body(&ctx).map_err(|e| (Failure::Runtime(e), Some(ctx.dir.path.clone())))?;
    eprintln!("{}: wrote {}", subcommand, ctx.dir.path.display());
    Ok(())
}

pub fn run(cmd: Command) -> Outcome {
    match cmd {
        Command::Pretrain { common } => with_ctx(&common, "pretrain", Flags::default(), |ctx| {
            pretrained_generator(ctx, None, "generator.ckpt").map(|_| ())
        }),
        Command::Distill { common, checkpoint } => with_ctx(
            &common,
            "distill",
            Flags {
                inputs: opt_input("pretrained", &checkpoint),
                ..Flags::default()
            },
            |ctx| {
                let pre = pretrained_generator(ctx, checkpoint.as_deref(), "pretrained.ckpt")?;
                let features = feature_extractor(&ctx.task, &ctx.cfg)?;
                distilled_generator(ctx, None, pre, &features).map(|_| ())
            },
        ),
        Command::Generate {
            common,
            dpc,
            checkpoint,
        } => with_ctx(
            &common,
            "generate",
            Flags {
                dpc,
                inputs: vec![("generator", checkpoint.clone())],
                ..Flags::default()
            },
            |ctx| {
                let dpc = ctx.cfg.experiment.dpc;
                let gen = load_generator(ctx, &checkpoint)?;
                let features = feature_extractor(&ctx.task, &ctx.cfg)?;
                let f = |s: &Sample| features.features(s);
                let mut data = generate_distilled(
                    &gen,
                    &f,
                    dpc,
                    &ctx.cfg.generate,
                    derive_seed(ctx.cfg.seed, "generate"),
                    &checkpoint.display().to_string(),
                )?;
                data.provenance.feature_seed = Some(derive_seed(ctx.cfg.seed, "features"));
                let vocab = ctx.task.train.vocab().clone();
                data.write_jsonl(vocab.clone(), ctx.dir.create_file("distilled.jsonl")?)?;
                distill_lab::synthesis::write_sample_sheet(
                    &data,
                    &vocab,
                    ctx.dir.create_file("samples.md")?,
                )?;
                Ok(())
            },
        ),
        Command::Baseline {
            common,
            methods,
            dpc,
        } => with_ctx(
            &common,
            "baseline",
            Flags {
                dpc,
                methods: Some(("baseline", &methods)),
                ..Flags::default()
            },
            |ctx| {
                let dpc = ctx.cfg.experiment.dpc;
                let methods = if methods.is_empty() {
                    vec![Method::Random, Method::Kcenters, Method::Herding]
                } else {
                    methods.clone()
                };
                let features = feature_extractor(&ctx.task, &ctx.cfg)?;
                let f = |s: &Sample| features.features(s);
                let mut selections = Vec::new();
                for m in methods {
                    let strategy = match m {
                        Method::Random => Strategy::Random,
                        Method::Kcenters => Strategy::Kcenters,
                        Method::Herding => Strategy::Herding,
                        other => bail!("`{other}` is not a coreset baseline; use `generate`"),
                    };
                    let count = if m == Method::Herding {
                        1
                    } else {
                        ctx.cfg.eval.datasets_per_method
                    };
                    for d in 0..count {
                        let seed = derive_seed(ctx.cfg.seed, &format!("method/{m}/dpc{dpc}/{d}"));
                        let sel = select(&ctx.task.train, strategy, dpc, &f, seed)?;
                        let subset = ctx.task.train.subset(&sel.per_class)?;
                        let prov = serde_json::json!({ "run_id": ctx.dir.id, "method": m, "dpc": dpc, "index": d, "seed": sel.seed });
                        write_jsonl(
                            &subset,
                            ctx.dir.create_file(&format!("{m}/dataset-{d:02}.jsonl"))?,
                            false,
                            Some(&prov),
                        )?;
                        selections
                            .push(serde_json::json!({ "method": m, "index": d, "selection": sel }));
                    }
                }
                ctx.dir.write(
                    "selections.json",
                    serde_json::to_string_pretty(&selections)?,
                )?;
                Ok(())
            },
        ),
        Command::Evaluate {
            common,
            methods,
            dpc,
            checkpoint,
            pretrained,
            cross,
        } => with_ctx(
            &common,
            "evaluate",
            Flags {
                dpc,
                methods: Some(("methods", &methods)),
                inputs: [
                    opt_input("distilled", &checkpoint),
                    opt_input("pretrained", &pretrained),
                ]
                .concat(),
                ..Flags::default()
            },
            |ctx| {
                let methods = ctx.cfg.experiment.methods.clone();
                let dpc = ctx.cfg.experiment.dpc;
                let features = feature_extractor(&ctx.task, &ctx.cfg)?;
                let (pre, dis) = generators_for(
                    ctx,
                    &methods,
                    checkpoint.as_deref(),
                    pretrained.as_deref(),
                    &features,
                )?;
                let gens = Generators {
                    pretrained: pre.as_ref(),
                    distilled: dis.as_ref(),
                };
                let mut reports = compare_methods(
                    &methods,
                    dpc,
                    &ctx.task,
                    &features,
                    gens,
                    &ctx.cfg,
                    ctx.cfg.learner.arch,
                )?;
                if cross {
                    reports.extend(compare_methods(
                        &methods,
                        dpc,
                        &ctx.task,
                        &features,
                        gens,
                        &ctx.cfg,
                        ctx.cfg.experiment.cross_arch,
                    )?);
                }
                write_reports(&ctx.dir, "report", &reports)
            },
        ),
        Command::Sweep {
            common,
            methods,
            dpc,
            checkpoint,
            pretrained,
        } => with_ctx(
            &common,
            "sweep",
            Flags {
                methods: Some(("sweep", &methods)),
                sweep_dpcs: &dpc,
                inputs: [
                    opt_input("distilled", &checkpoint),
                    opt_input("pretrained", &pretrained),
                ]
                .concat(),
                ..Flags::default()
            },
            |ctx| {
                let methods = ctx.cfg.experiment.sweep_methods.clone();
                let dpcs = ctx.cfg.experiment.sweep_dpcs.clone();
                let features = feature_extractor(&ctx.task, &ctx.cfg)?;
                let (pre, dis) = generators_for(
                    ctx,
                    &methods,
                    checkpoint.as_deref(),
                    pretrained.as_deref(),
                    &features,
                )?;
                let gens = Generators {
                    pretrained: pre.as_ref(),
                    distilled: dis.as_ref(),
                };
                let reports = dpc_sweep(&methods, &dpcs, &ctx.task, &features, gens, &ctx.cfg)?;
                write_reports(&ctx.dir, "sweep", &reports)
            },
        ),
        Command::Ablate {
            common,
            dpc,
            pretrained,
            checkpoint,
        } => with_ctx(
            &common,
            "ablate",
            Flags {
                dpc,
                inputs: [
                    opt_input("distilled", &checkpoint),
                    opt_input("pretrained", &pretrained),
                ]
                .concat(),
                ..Flags::default()
            },
            |ctx| {
                let cfg = &ctx.cfg;
                let features = feature_extractor(&ctx.task, cfg)?;
                let pre = pretrained_generator(ctx, pretrained.as_deref(), "pretrained.ckpt")?;
                let full = checkpoint
                    .as_deref()
                    .map(|p| load_generator(ctx, p))
                    .transpose()?;
                let reports = ablation(&ctx.task, &features, &pre, full.as_ref(), cfg)?;
                write_reports(&ctx.dir, "ablation", &reports)
            },
        ),
        Command::Report { run } => {
            report(&run).map_err(|e| (Failure::Runtime(e), Some(run.clone())))
        }
    }
}

fn opt_input(name: &'static str, path: &Option<PathBuf>) -> Vec<(&'static str, PathBuf)> {
    path.iter().map(|p| (name, p.clone())).collect()
}

fn load_generator(ctx: &Ctx, path: &Path) -> anyhow::Result<GeneratorModel> {
    let params = load_checkpoint(path).with_context(|| format!("loading {}", path.display()))?;
    Ok(GeneratorModel::from_params(
        ctx.cfg.generator.clone(),
        ctx.task.train.vocab().clone(),
        params,
    )?)
}

/// Loads `path`, or pretrains and saves as `save_as` with a loss log.
fn pretrained_generator(
    ctx: &Ctx,
    path: Option<&Path>,
    save_as: &str,
) -> anyhow::Result<GeneratorModel> {
    if let Some(p) = path {
        return load_generator(ctx, p);
    }
    let out = pretrain(&ctx.task, &ctx.cfg)?;
    let mut csv = String::from("step,loss\n");
    for (i, l) in out.losses.iter().enumerate() {
        csv.push_str(&format!("{i},{l}\n"));
    }
    ctx.dir.write("pretrain_loss.csv", csv)?;
    save_checkpoint(&out.generator.params, &ctx.dir.file(save_as))?;
    if let Some(last) = out.losses.last() {
        eprintln!(
            "pretrain: {} steps, final batch loss {last:.4}",
            out.losses.len()
        );
    }
    Ok(out.generator)
}

/// Loads `path`, or distills from `pre` and saves `generator.ckpt`, the
/// training log and any periodic checkpoints.
fn distilled_generator(
    ctx: &Ctx,
    path: Option<&Path>,
    pre: GeneratorModel,
    features: &LearnerModel,
) -> anyhow::Result<GeneratorModel> {
    if let Some(p) = path {
        return load_generator(ctx, p);
    }
    let mut hook = |step: usize, g: &GeneratorModel| -> Result<(), String> {
        let p = ctx.dir.file(&format!("checkpoints/step-{step:06}.ckpt"));
        std::fs::create_dir_all(p.parent().unwrap()).map_err(|e| e.to_string())?;
        save_checkpoint(&g.params, &p).map_err(|e| e.to_string())
    };
    let out = distill_generator(
        &ctx.task,
        pre,
        features,
        &ctx.cfg.distill,
        ctx.cfg.seed,
        Some(&mut hook),
    )?;
    out.log.write_csv(ctx.dir.create_file("distill_log.csv")?)?;
    save_checkpoint(&out.generator.params, &ctx.dir.file("generator.ckpt"))?;
    eprintln!("distill: {} generator steps", out.log.steps());
    Ok(out.generator)
}

fn generators_for(
    ctx: &Ctx,
    methods: &[Method],
    distilled: Option<&Path>,
    pretrained: Option<&Path>,
    features: &LearnerModel,
) -> anyhow::Result<(Option<GeneratorModel>, Option<GeneratorModel>)> {
    let need_dilm = methods.contains(&Method::Dilm);
    let need_pre = methods.contains(&Method::VanillaLm) || (need_dilm && distilled.is_none());
    let pre = if need_pre {
        Some(pretrained_generator(ctx, pretrained, "pretrained.ckpt")?)
    } else {
        None
    };
    let dis = if need_dilm {
        Some(match (distilled, &pre) {
            (Some(p), _) => load_generator(ctx, p)?,
            (None, Some(start)) => distilled_generator(ctx, None, start.clone(), features)?,
            (None, None) => {
                unreachable!("pretrained generator is built whenever dilm needs distilling")
            }
        })
    } else {
        None
    };
    Ok((pre, dis))
}

fn write_reports(dir: &RunDir, stem: &str, reports: &[EvalReport]) -> anyhow::Result<()> {
    dir.write("reports.json", serde_json::to_string_pretty(reports)?)?;
    render(&dir.path, stem, reports)?;
    print!("{}", markdown_table(stem, reports));
    Ok(())
}

fn render(dir: &Path, stem: &str, reports: &[EvalReport]) -> anyhow::Result<()> {
    std::fs::write(
        dir.join(format!("{stem}.md")),
        markdown_table(stem, reports),
    )?;
    let f = std::fs::File::create(dir.join(format!("{stem}.csv")))?;
    write_reports_csv(reports, f)?;
    let dpcs: BTreeSet<usize> = reports.iter().map(|r| r.dpc).collect();
    if dpcs.len() > 1 {
        std::fs::write(dir.join(format!("{stem}.svg")), sweep_svg(reports))?;
    }
    Ok(())
}

/// Re-renders from `reports.json` without touching any model.
fn report(run: &Path) -> anyhow::Result<()> {
    let path = run.join("reports.json");
    let text =
        std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let reports: Vec<EvalReport> = serde_json::from_str(&text).context("parsing reports.json")?;
    let stem = std::fs::read_to_string(run.join("run.json"))
        .ok()
        .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok())
        .and_then(|v| v["subcommand"].as_str().map(str::to_string))
        .map_or("report", |s| match s.as_str() {
            "sweep" => "sweep",
            "ablate" => "ablation",
            _ => "report",
        });
    render(run, stem, &reports)?;
    print!("{}", markdown_table(stem, &reports));
    Ok(())
}
