use std::path::Path;

use crate::coreset::{herding_select, kcenters_select, random_select};
use crate::distill::{run_distillation, CheckpointHook, DistillConfig, DistillOutcome};
use crate::eval::{evaluate_datasets, EvalError, EvalReport, Method};
use crate::models::{Arch, GeneratorModel, LearnerConfig, LearnerModel};
use crate::seeds::derive_seed;
use crate::synthesis::{
    generate_distilled, pretrain_generator, train_feature_extractor, GenerateConfig,
    PretrainOutcome,
};
use crate::text::{load_jsonl, load_tsv, make_synthetic_task, LabeledDataset, LoadSchema};

use super::{PipelineError, RunConfig, TaskConfig};

/// Train and test splits sharing one vocabulary.
#[derive(Clone, Debug)]
pub struct Task {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
}

fn load_file(path: &Path, schema: &LoadSchema) -> Result<LabeledDataset, PipelineError> {
    let tsv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("tsv"));
    Ok(if tsv {
        load_tsv(path, schema)?
    } else {
        load_jsonl(path, schema)?
    })
}

pub fn load_task(cfg: &TaskConfig, seed: u64) -> Result<Task, PipelineError> {
    match (&cfg.train_file, &cfg.test_file) {
        (Some(train), Some(test)) => {
            let schema = LoadSchema {
                tokenizer: cfg.tokenizer,
                num_classes: cfg.num_classes,
                vocab: None,
                max_len: Some(cfg.max_len),
            };
            let train = load_file(train, &schema)?;
            let schema = LoadSchema {
                vocab: Some(train.vocab().clone()),
                num_classes: Some(train.num_classes()),
                ..schema
            };
            let test = load_file(test, &schema)?;
            Ok(Task { train, test })
        }
        (None, None) => {
            let mut train = make_synthetic_task(
                cfg.kind,
                cfg.train_per_class,
                derive_seed(seed, "task/train"),
            )?;
            let mut test =
                make_synthetic_task(cfg.kind, cfg.test_per_class, derive_seed(seed, "task/test"))?;
            train.truncate_all(cfg.max_len);
            test.truncate_all(cfg.max_len);
            Ok(Task { train, test })
        }
        _ => Err(PipelineError::Config(
            "task.train_file and task.test_file must be given together".into(),
        )),
    }
}

/// The learner whose encoder embeds samples for K-centers, herding and the
/// teacher bank.
pub fn feature_extractor(task: &Task, cfg: &RunConfig) -> Result<LearnerModel, PipelineError> {
    Ok(train_feature_extractor(
        &task.train,
        &cfg.features,
        derive_seed(cfg.seed, "features"),
    )?)
}

pub fn pretrain(task: &Task, cfg: &RunConfig) -> Result<PretrainOutcome, PipelineError> {
    let gen = GeneratorModel::new(
        cfg.generator.clone(),
        task.train.vocab().clone(),
        derive_seed(cfg.seed, "generator/init"),
    );
    Ok(pretrain_generator(
        gen,
        &task.train,
        &cfg.pretrain,
        derive_seed(cfg.seed, "generator/pretrain"),
    )?)
}

pub fn distill_generator(
    task: &Task,
    pretrained: GeneratorModel,
    features: &LearnerModel,
    distill: &DistillConfig,
    seed: u64,
    hook: Option<CheckpointHook<'_>>,
) -> Result<DistillOutcome, PipelineError> {
    let f = |s: &crate::text::Sample| features.features(s);
    Ok(run_distillation(
        distill,
        &task.train,
        pretrained,
        &f,
        derive_seed(seed, "distill"),
        hook,
    )?)
}

/// Generators available to the generative methods.
#[derive(Clone, Copy, Debug, Default)]
pub struct Generators<'a> {
    pub pretrained: Option<&'a GeneratorModel>,
    pub distilled: Option<&'a GeneratorModel>,
}

/// Candidate training sets for `method` at `dpc`: one per
/// `datasets_per_method` seed, or a single set for deterministic herding.
pub fn method_datasets(
    method: Method,
    dpc: usize,
    task: &Task,
    features: &LearnerModel,
    gens: Generators<'_>,
    cfg: &RunConfig,
    generate: &GenerateConfig,
) -> Result<Vec<LabeledDataset>, PipelineError> {
    let f = |s: &crate::text::Sample| features.features(s);
    let n = cfg.eval.datasets_per_method;
    let seed = |d: usize| derive_seed(cfg.seed, &format!("method/{method}/dpc{dpc}/{d}"));
    let train = &task.train;
    let generated = |gen: Option<&GeneratorModel>| -> Result<Vec<LabeledDataset>, PipelineError> {
        let gen = gen.ok_or_else(|| EvalError::MissingMethod(method.to_string()))?;
        (0..n)
            .map(|d| {
                let data = generate_distilled(gen, &f, dpc, generate, seed(d), method.as_str())?;
                Ok(data.to_dataset(train.vocab().clone())?)
            })
            .collect()
    };
    match method {
        Method::Random => (0..n)
            .map(|d| Ok(train.subset(&random_select(train, dpc, seed(d))?.per_class)?))
            .collect(),
        Method::Kcenters => (0..n)
            .map(|d| Ok(train.subset(&kcenters_select(train, dpc, &f, seed(d))?.per_class)?))
            .collect(),
        Method::Herding => Ok(vec![
            train.subset(&herding_select(train, dpc, &f)?.per_class)?
        ]),
        Method::VanillaLm => generated(gens.pretrained),
        Method::Dilm => generated(gens.distilled),
    }
}

fn evaluate(
    label: &str,
    method: Method,
    dpc: usize,
    datasets: &[LabeledDataset],
    task: &Task,
    learner: &LearnerConfig,
    cfg: &RunConfig,
) -> Result<EvalReport, PipelineError> {
    let runs = if method == Method::Herding {
        cfg.eval.deterministic_runs
    } else {
        cfg.eval.runs_per_dataset
    };
    Ok(evaluate_datasets(
        label,
        dpc,
        datasets,
        runs,
        &task.test,
        learner,
        &cfg.eval,
        derive_seed(cfg.seed, "eval"),
        cfg.workers,
    )?)
}

fn compare_to_kcenters(reports: &mut [EvalReport]) {
    if let Some(base) = reports
        .iter()
        .find(|r| r.method == Method::Kcenters.as_str())
        .cloned()
    {
        for r in reports.iter_mut().filter(|r| r.method != base.method) {
            r.compare_to(&base);
        }
    }
}

/// One report per method at `dpc`, each compared against K-centers when it
/// is among the methods.
pub fn compare_methods(
    methods: &[Method],
    dpc: usize,
    task: &Task,
    features: &LearnerModel,
    gens: Generators<'_>,
    cfg: &RunConfig,
    arch: Arch,
) -> Result<Vec<EvalReport>, PipelineError> {
    let learner = LearnerConfig {
        arch,
        ..cfg.learner.clone()
    };
    let mut reports = Vec::with_capacity(methods.len());
    for &m in methods {
        let data = method_datasets(m, dpc, task, features, gens, cfg, &cfg.generate)?;
        reports.push(evaluate(m.as_str(), m, dpc, &data, task, &learner, cfg)?);
    }
    compare_to_kcenters(&mut reports);
    Ok(reports)
}

/// The same methods evaluated with the source learner and with
/// `cfg.experiment.cross_arch`.
pub fn cross_model(
    methods: &[Method],
    dpc: usize,
    task: &Task,
    features: &LearnerModel,
    gens: Generators<'_>,
    cfg: &RunConfig,
) -> Result<Vec<EvalReport>, PipelineError> {
    let mut out = compare_methods(methods, dpc, task, features, gens, cfg, cfg.learner.arch)?;
    out.extend(compare_methods(
        methods,
        dpc,
        task,
        features,
        gens,
        cfg,
        cfg.experiment.cross_arch,
    )?);
    Ok(out)
}

/// One report per (method, dpc). Generators are trained once and reused at
/// every size.
pub fn dpc_sweep(
    methods: &[Method],
    dpcs: &[usize],
    task: &Task,
    features: &LearnerModel,
    gens: Generators<'_>,
    cfg: &RunConfig,
) -> Result<Vec<EvalReport>, PipelineError> {
    let mut out = Vec::new();
    for &dpc in dpcs {
        out.extend(compare_methods(
            methods,
            dpc,
            task,
            features,
            gens,
            cfg,
            cfg.learner.arch,
        )?);
    }
    Ok(out)
}

/// Row labels of the ablation report, in order.
pub const ABLATION_ROWS: [&str; 4] = ["dilm", "dilm-no-rt", "dilm-no-dms", "dilm-no-selection"];

/// Full method plus one run with each of the representative teacher,
/// diverse mini-batch sampling and final selection disabled.
pub fn ablation(
    task: &Task,
    features: &LearnerModel,
    pretrained: &GeneratorModel,
    full: Option<&GeneratorModel>,
    cfg: &RunConfig,
) -> Result<Vec<EvalReport>, PipelineError> {
    let dpc = cfg.experiment.dpc;
    let train = |distill: DistillConfig| -> Result<GeneratorModel, PipelineError> {
        Ok(
            distill_generator(task, pretrained.clone(), features, &distill, cfg.seed, None)?
                .generator,
        )
    };
    let full_gen = match full {
        Some(g) => g.clone(),
        None => train(cfg.distill.clone())?,
    };
    let no_rt = train(DistillConfig {
        representative_teacher: false,
        ..cfg.distill.clone()
    })?;
    let no_dms = train(DistillConfig {
        diverse_minibatch: false,
        ..cfg.distill.clone()
    })?;
    let no_select = GenerateConfig {
        select: false,
        ..cfg.generate.clone()
    };
    let rows: [(&GeneratorModel, &GenerateConfig); 4] = [
        (&full_gen, &cfg.generate),
        (&no_rt, &cfg.generate),
        (&no_dms, &cfg.generate),
        (&full_gen, &no_select),
    ];
    let mut reports = Vec::with_capacity(4);
    for (label, (gen, generate)) in ABLATION_ROWS.iter().zip(rows) {
        let gens = Generators {
            pretrained: None,
            distilled: Some(gen),
        };
        let data = method_datasets(Method::Dilm, dpc, task, features, gens, cfg, generate)?;
        reports.push(evaluate(
            label,
            Method::Dilm,
            dpc,
            &data,
            task,
            &cfg.learner,
            cfg,
        )?);
    }
    Ok(reports)
}
