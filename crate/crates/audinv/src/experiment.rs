//! Experiment commands: training, evaluation with tables and figures, reports and single-file inversion.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use audinv_core::audio::{spectrogram, AudioClip};
use audinv_core::classifier::{argmax_rows, inception_score, train_classifier, DigitClassifier};
use audinv_core::data::{synth_digits, LabeledDataset, NUM_CLASSES};
use audinv_core::generator::{sample_latent, train_gan, Critic, GanObserver, Generator};
use audinv_core::inversion::{
    invert_gd, invert_hybrid, invert_mapper, train_inverter, GdConfig, InitMode, InverseMapper, InversionResult, Method,
};
use audinv_core::metrics::{mse_raw, ssim};
use audinv_core::profile::{Profile, Scale};
use audinv_core::tensor::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::checkpoint::{self, config_hash};
use crate::figures::save_comparison;
use crate::results::{
    read_table, write_sidecar, write_table, FailureRecord, InversionRecord, Provenance, ResultsTable, Source, TableRow,
    TargetRecord,
};
use crate::sc09::load_sc09;
use crate::wav::{load_wav, save_wav};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub profile: Profile,
    pub seed: u64,
    /// Spoken-digit directory; the synthetic digit set is used when absent.
    pub data_dir: Option<PathBuf>,
    pub out: PathBuf,
    pub workers: usize,
    /// Comparison figures written per source.
    pub figures: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            profile: Profile::toy(),
            seed: 0,
            data_dir: None,
            out: PathBuf::from("runs/toy"),
            workers: 1,
            figures: 4,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn with_scale(mut self, scale: Scale) -> Self {
        self.profile = Profile::for_scale(scale);
        self
    }

    pub fn checkpoint_dir(&self, what: &str) -> PathBuf {
        self.out.join("checkpoints").join(what)
    }

    pub fn results_dir(&self) -> PathBuf {
        self.out.join("results")
    }

    /// Hash of everything that influences outputs (the output directory and worker count do not).
    pub fn hash(&self) -> String {
        config_hash(&(&self.profile, self.seed, &self.data_dir))
    }

    pub fn gd_config(&self, steps: usize) -> GdConfig {
        let mut cfg = GdConfig::new(steps, self.profile.spectrogram);
        cfg.lbfgs = self.profile.lbfgs;
        cfg.clip = self.profile.clip;
        cfg
    }
}

/// Independent deterministic seed for a named stream.
pub fn derive_seed(seed: u64, tag: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(tag.as_bytes());
    h.update(index.to_le_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().expect("digest is 32 bytes"))
}

fn rng_for(cfg: &ExperimentConfig, tag: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, tag, index))
}

pub fn real_dataset(cfg: &ExperimentConfig) -> Result<LabeledDataset> {
    match &cfg.data_dir {
        Some(dir) => {
            let (data, report) = load_sc09(dir, cfg.profile.clip_length)?;
            log::info!("dataset per-class counts {:?}, {} skipped", report.per_class, report.skipped);
            Ok(data)
        }
        None => {
            Ok(synth_digits(cfg.profile.synthetic_per_class, cfg.profile.clip_length, &mut rng_for(cfg, "data", 0))?)
        }
    }
}

/// Training and held-out parts; the classifier uses the same split internally.
pub fn split_dataset(cfg: &ExperimentConfig) -> Result<(LabeledDataset, LabeledDataset)> {
    Ok(real_dataset(cfg)?.split_holdout(cfg.profile.classifier.holdout_fraction, cfg.seed)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainTarget {
    Gan,
    Classifier,
    Inverter,
}

struct CheckpointObserver<'a> {
    cfg: &'a ExperimentConfig,
    hash: String,
}

impl GanObserver for CheckpointObserver<'_> {
    fn on_step(&mut self, step: usize, log: &audinv_core::generator::GanLog) {
        if (step + 1).is_multiple_of(50) {
            log::info!("gan step {}: critic {:.4}", step + 1, log.critic_loss.last().copied().unwrap_or(f32::NAN));
        }
    }

    fn checkpoint(&mut self, _step: usize, g: &Generator, c: &Critic) -> audinv_core::error::Result<()> {
        let dir = self.cfg.checkpoint_dir("gan");
        let saved = checkpoint::save_generator(&dir, g, &self.hash, self.cfg.seed)
            .and_then(|_| checkpoint::save_critic(&dir.join("critic"), c, &self.hash, self.cfg.seed));
        saved
            .map(|_| ())
            .map_err(|e| audinv_core::error::Error::InvalidConfig(format!("checkpoint write failed: {e:#}")))
    }
}

/// Train one component and write its checkpoint directory; returns that directory.
pub fn cmd_train(cfg: &ExperimentConfig, target: TrainTarget) -> Result<PathBuf> {
    let hash = cfg.hash();
    let p = &cfg.profile;
    let (train, _) = split_dataset(cfg)?;
    match target {
        TrainTarget::Gan => {
            let clips: Vec<AudioClip> = train.items.iter().map(|i| i.clip.clone()).collect();
            let mut obs = CheckpointObserver { cfg, hash: hash.clone() };
            let out = train_gan(&clips, p.generator, &p.gan, &mut rng_for(cfg, "gan", 0), &mut obs)?;
            let dir = cfg.checkpoint_dir("gan");
            checkpoint::write_log(&dir, &out.log)?;
            Ok(dir)
        }
        TrainTarget::Classifier => {
            let data = real_dataset(cfg)?;
            let (clf, report) =
                train_classifier(&data, p.classifier_arch.clone(), p.spectrogram, &p.classifier, cfg.seed)?;
            log::info!("classifier held-out accuracy {:.4}", report.heldout_accuracy);
            let dir = cfg.checkpoint_dir("classifier");
            checkpoint::save_classifier(&dir, &clf, p.clip_length, &hash, cfg.seed)?;
            checkpoint::write_log(&dir, &report)?;
            Ok(dir)
        }
        TrainTarget::Inverter => {
            let (generator, _) = checkpoint::load_generator(&cfg.checkpoint_dir("gan"))
                .context("inverter training requires the gan checkpoint; run `train gan` first")?;
            let (clf, _) = checkpoint::load_classifier(&cfg.checkpoint_dir("classifier"))
                .context("inverter training requires the classifier checkpoint; run `train classifier` first")?;
            let (mapper, log) = train_inverter(
                &generator,
                &clf,
                &train,
                p.inverter_arch.clone(),
                &p.inverter,
                &mut rng_for(cfg, "inverter", 0),
            )?;
            let dir = cfg.checkpoint_dir("inverter");
            checkpoint::save_mapper(&dir, &mapper, p.clip_length, &hash, cfg.seed)?;
            checkpoint::write_log(&dir, &log)?;
            Ok(dir)
        }
    }
}

pub struct Models {
    pub generator: Generator,
    pub classifier: DigitClassifier,
    pub mapper: InverseMapper,
    pub hashes: BTreeMap<String, String>,
}

pub fn load_models(cfg: &ExperimentConfig) -> Result<Models> {
    let (generator, gm) = checkpoint::load_generator(&cfg.checkpoint_dir("gan"))?;
    let (classifier, cm) = checkpoint::load_classifier(&cfg.checkpoint_dir("classifier"))?;
    let (mapper, mm) = checkpoint::load_mapper(&cfg.checkpoint_dir("inverter"))?;
    let hashes = [("gan", gm), ("classifier", cm), ("inverter", mm)]
        .into_iter()
        .map(|(k, m)| (k.to_string(), m.params_sha256))
        .collect();
    Ok(Models { generator, classifier, mapper, hashes })
}

pub fn run_method(
    models: &Models,
    cfg: &ExperimentConfig,
    method: Method,
    target: &AudioClip,
    rng: &mut ChaCha8Rng,
) -> Result<InversionResult> {
    let start = Instant::now();
    let p = &cfg.profile;
    let mut r = match method {
        Method::Gradient => invert_gd(&models.generator, target, InitMode::Random, &cfg.gd_config(p.gd_steps), rng)?,
        Method::Mapper => invert_mapper(&models.mapper, &models.generator, target, &p.spectrogram)?,
        Method::Hybrid => {
            invert_hybrid(&models.mapper, &models.generator, target, &cfg.gd_config(p.hybrid_steps), rng)?
        }
    };
    r.wall_time = start.elapsed().as_secs_f64();
    Ok(r)
}

struct Target {
    source: Source,
    index: usize,
    clip: AudioClip,
    label: Option<usize>,
    latent: Option<Vec<f32>>,
}

type MethodOutcome = std::result::Result<(InversionRecord, InversionResult), FailureRecord>;

fn evaluate_target(
    models: &Models,
    cfg: &ExperimentConfig,
    t: &Target,
    methods: &[Method],
) -> Result<(TargetRecord, Vec<MethodOutcome>)> {
    let spec = &cfg.profile.spectrogram;
    let target_spec = spectrogram(&t.clip, spec)?;
    let class_probs = models.classifier.classify(&target_spec)?;
    let target =
        TargetRecord { source: t.source, index: t.index, label: t.label, latent: t.latent.clone(), class_probs };
    let mut outcomes = Vec::new();
    for &method in methods {
        let mut rng = rng_for(cfg, &format!("invert-{}-{}", t.source.as_str(), method.as_str()), t.index as u64);
        let outcome = run_method(models, cfg, method, &t.clip, &mut rng).and_then(|r| {
            let recon_spec = spectrogram(&r.reconstruction, spec)?;
            let probs = models.classifier.classify(&recon_spec)?;
            let predicted = argmax_rows(&Tensor::new(&[1, probs.len()], probs.clone()))[0];
            let record = InversionRecord {
                source: t.source,
                index: t.index,
                method,
                label: t.label,
                z_hat: r.z_hat.values.clone(),
                loss_trace: r.loss_trace.clone(),
                steps_used: r.steps_used,
                wall_time: r.wall_time,
                spectrogram_mae: r.final_loss(),
                raw_mse: mse_raw(&t.clip, &r.reconstruction)?,
                spectrogram_ssim: ssim(&target_spec, &recon_spec)?,
                class_probs: probs,
                predicted,
                latent_mse: t
                    .latent
                    .as_ref()
                    .map(|z| audinv_core::generator::LatentVector::new(z.clone()).mse(&r.z_hat)),
                config_hash: cfg.hash(),
                seed: cfg.seed,
            };
            Ok((record, r))
        });
        outcomes.push(outcome.map_err(|e| FailureRecord {
            source: t.source,
            index: t.index,
            method,
            error: format!("{e:#}"),
        }));
    }
    Ok((target, outcomes))
}

/// Run `f` over `items` on `workers` threads; results keep the input order.
fn parallel_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    slots.into_inner().expect("worker panicked").into_iter().map(|r| r.expect("every slot filled")).collect()
}

/// Table for one source, computed only from target and inversion records.
pub fn build_table(
    source: Source,
    targets: &[TargetRecord],
    records: &[InversionRecord],
    failures: usize,
    splits: usize,
) -> Result<ResultsTable> {
    let with_accuracy = source == Source::Real && targets.iter().all(|t| t.label.is_some());
    let is = |probs: Vec<&Vec<f32>>| -> Result<(f64, f64)> {
        if probs.is_empty() {
            return Ok((f64::NAN, f64::NAN));
        }
        let c = probs[0].len();
        let data: Vec<f32> = probs.iter().flat_map(|p| p.iter().copied()).collect();
        Ok(inception_score(&Tensor::new(&[probs.len(), c], data), splits.min(probs.len()))?)
    };
    let mean = |v: Vec<f64>| if v.is_empty() { None } else { Some(v.iter().sum::<f64>() / v.len() as f64) };
    let (im, is_std) = is(targets.iter().map(|t| &t.class_probs).collect())?;
    let source_acc = with_accuracy.then(|| {
        let hits = targets.iter().filter(|t| {
            Some(argmax_rows(&Tensor::new(&[1, t.class_probs.len()], t.class_probs.clone()))[0]) == t.label
        });
        hits.count() as f64 / targets.len() as f64
    });
    let mut rows = vec![TableRow {
        name: source.as_str().to_string(),
        inception_mean: im,
        inception_std: is_std,
        raw_mse: None,
        spectrogram_ssim: None,
        accuracy: source_acc,
        count: targets.len(),
    }];
    for method in Method::ALL {
        let rs: Vec<&InversionRecord> = records.iter().filter(|r| r.method == method && r.source == source).collect();
        let (m, s) = is(rs.iter().map(|r| &r.class_probs).collect())?;
        let accuracy = with_accuracy
            .then(|| mean(rs.iter().map(|r| if Some(r.predicted) == r.label { 1.0 } else { 0.0 }).collect()))
            .flatten();
        rows.push(TableRow {
            name: method.as_str().to_string(),
            inception_mean: m,
            inception_std: s,
            raw_mse: mean(rs.iter().map(|r| r.raw_mse).collect()),
            spectrogram_ssim: mean(rs.iter().map(|r| r.spectrogram_ssim).collect()),
            accuracy,
            count: rs.len(),
        });
    }
    let title = match source {
        Source::Fake => "Synthesized audio reconstructions",
        Source::Real => "Real audio reconstructions",
    };
    Ok(ResultsTable { title: title.to_string(), source, with_accuracy, rows, failures })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checks {
    /// Targets whose hybrid spectrogram error exceeds the prediction-only error.
    pub hybrid_violations: usize,
    /// Records whose best-so-far trace ever increases.
    pub trace_violations: usize,
    pub mapper_real_accuracy: Option<f64>,
    pub gradient_real_accuracy: Option<f64>,
    pub chance_threshold: f64,
    /// Mapper reconstructions beat both chance and the gradient-only method on real audio.
    pub mapper_trend_ok: bool,
    pub fake_latent_mse_mapper: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub provenance: Provenance,
    pub fake: ResultsTable,
    pub real: ResultsTable,
    pub checks: Checks,
    pub flags: Vec<String>,
    pub failures: Vec<FailureRecord>,
}

fn compute_checks(
    records: &[InversionRecord],
    real: &ResultsTable,
    classifier_accuracy: Option<f64>,
) -> (Checks, Vec<String>) {
    let find = |s: Source, i: usize, m: Method| records.iter().find(|r| r.source == s && r.index == i && r.method == m);
    let hybrid_violations = records
        .iter()
        .filter(|r| r.method == Method::Hybrid)
        .filter(|h| find(h.source, h.index, Method::Mapper).is_some_and(|m| h.spectrogram_mae > m.spectrogram_mae))
        .count();
    let trace_violations = records.iter().filter(|r| r.loss_trace.windows(2).any(|w| w[1] > w[0])).count();
    let acc = |name: &str| real.row(name).and_then(|r| r.accuracy);
    let (mapper, gradient) = (acc("mapper"), acc("gradient"));
    let chance_threshold = 2.0 / NUM_CLASSES as f64;
    let mapper_trend_ok = matches!((mapper, gradient), (Some(m), Some(g)) if m > chance_threshold && m > g);
    let latent: Vec<f64> = records
        .iter()
        .filter(|r| r.method == Method::Mapper && r.source == Source::Fake)
        .filter_map(|r| r.latent_mse)
        .collect();
    let fake_latent_mse_mapper = (!latent.is_empty()).then(|| latent.iter().sum::<f64>() / latent.len() as f64);
    let mut flags = Vec::new();
    if !mapper_trend_ok {
        flags.push(format!(
            "real-audio mapper accuracy {} does not exceed both chance {chance_threshold:.2} and gradient-only accuracy {}; \
             classifier accuracy on the source clips {}, mean fake latent MSE of the mapper {}",
            fmt_opt(mapper),
            fmt_opt(gradient),
            fmt_opt(classifier_accuracy),
            fmt_opt(fake_latent_mse_mapper)
        ));
    }
    if hybrid_violations > 0 {
        flags.push(format!("{hybrid_violations} targets where hybrid refinement ended above its starting prediction"));
    }
    if trace_violations > 0 {
        flags.push(format!("{trace_violations} inversion traces are not non-increasing"));
    }
    let checks = Checks {
        hybrid_violations,
        trace_violations,
        mapper_real_accuracy: mapper,
        gradient_real_accuracy: gradient,
        chance_threshold,
        mapper_trend_ok,
        fake_latent_mse_mapper,
    };
    (checks, flags)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

/// Up to `n` items, cycling through the classes so every digit is represented.
fn balanced_targets(data: &LabeledDataset, n: usize) -> Vec<(AudioClip, usize)> {
    let mut by_class: Vec<std::collections::VecDeque<&audinv_core::data::LabeledItem>> =
        (0..NUM_CLASSES).map(|_| Default::default()).collect();
    for item in &data.items {
        by_class[item.label].push_back(item);
    }
    let mut out = Vec::with_capacity(n);
    while out.len() < n && by_class.iter().any(|q| !q.is_empty()) {
        for q in by_class.iter_mut() {
            if out.len() == n {
                break;
            }
            if let Some(item) = q.pop_front() {
                out.push((item.clip.clone(), item.label));
            }
        }
    }
    out
}

/// Invert N fake and N real targets with every method; write sidecars, tables, figures and a summary.
pub fn cmd_evaluate(cfg: &ExperimentConfig) -> Result<EvalSummary> {
    let models = load_models(cfg)?;
    let p = &cfg.profile;
    let n = p.num_targets;
    let mut fake_rng = rng_for(cfg, "fake-targets", 0);
    let mut targets = Vec::with_capacity(2 * n);
    for index in 0..n {
        let z = sample_latent(&mut fake_rng, models.generator.latent_dim());
        let clip = models.generator.generate(&z)?;
        targets.push(Target { source: Source::Fake, index, clip, label: None, latent: Some(z.values) });
    }
    let (train, held) = split_dataset(cfg)?;
    let pool = if p.heldout_eval { held } else { train };
    for (index, (clip, label)) in balanced_targets(&pool, n).into_iter().enumerate() {
        targets.push(Target { source: Source::Real, index, clip, label: Some(label), latent: None });
    }

    let evaluated = parallel_map(&targets, cfg.workers, |t| evaluate_target(&models, cfg, t, &Method::ALL));
    let results_dir = cfg.results_dir();
    if results_dir.exists() {
        fs::remove_dir_all(&results_dir)?;
    }
    let mut target_records = Vec::new();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut by_target: Vec<Vec<(Method, InversionResult)>> = Vec::new();
    for (t, ev) in targets.iter().zip(evaluated) {
        let (target, outcomes) = ev?;
        target_records.push(target);
        let mut results = Vec::new();
        for o in outcomes {
            match o {
                Ok((rec, res)) => {
                    write_sidecar(&results_dir.join("inversions").join(t.source.as_str()), &rec, &res)?;
                    records.push(rec);
                    results.push((res.method, res));
                }
                Err(f) => {
                    log::warn!("{} target {} {}: {}", f.source.as_str(), f.index, f.method.as_str(), f.error);
                    failures.push(f);
                }
            }
        }
        by_target.push(results);
    }
    fs::write(results_dir.join("targets.json"), serde_json::to_string_pretty(&target_records)?)?;

    let count_fail = |s: Source| failures.iter().filter(|f| f.source == s).count();
    let split = |s: Source| target_records.iter().filter(|t| t.source == s).cloned().collect::<Vec<_>>();
    let fake = build_table(Source::Fake, &split(Source::Fake), &records, count_fail(Source::Fake), p.inception_splits)?;
    let real = build_table(Source::Real, &split(Source::Real), &records, count_fail(Source::Real), p.inception_splits)?;
    let provenance = Provenance {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        scale: format!("{:?}", p.scale).to_lowercase(),
        checkpoints: models.hashes.clone(),
    };
    write_table(&results_dir, "fake_table", &fake, &provenance)?;
    write_table(&results_dir, "real_table", &real, &provenance)?;

    let fig_dir = cfg.out.join("figures");
    fs::create_dir_all(&fig_dir)?;
    for source in [Source::Fake, Source::Real] {
        let mut written = 0;
        for (t, results) in targets.iter().zip(&by_target) {
            if t.source != source || written == cfg.figures || results.len() != Method::ALL.len() {
                continue;
            }
            let clips: Vec<&AudioClip> =
                std::iter::once(&t.clip).chain(results.iter().map(|(_, r)| &r.reconstruction)).collect();
            let specs = clips.iter().map(|c| spectrogram(c, &p.spectrogram)).collect::<Result<Vec<_>, _>>()?;
            let columns: Vec<_> = clips.iter().copied().zip(specs.iter()).collect();
            save_comparison(&fig_dir.join(format!("{}_{:04}.png", source.as_str(), t.index)), &columns)?;
            written += 1;
        }
    }

    let classifier_accuracy = real.rows.first().and_then(|r| r.accuracy);
    let (checks, flags) = compute_checks(&records, &real, classifier_accuracy);
    let summary = EvalSummary { provenance, fake, real, checks, flags, failures };
    fs::write(results_dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(summary)
}

fn find_summaries(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).with_context(|| format!("cannot read {}", dir.display()))? {
        let path = entry?.path();
        if path.is_dir() {
            find_summaries(&path, out)?;
        } else if path.file_name().is_some_and(|n| n == "summary.json") {
            out.push(path);
        }
    }
    Ok(())
}

fn render_table(out: &mut String, t: &ResultsTable) {
    let _ = writeln!(out, "  {} (failures: {})", t.title, t.failures);
    let _ = writeln!(
        out,
        "    {:<10} {:>16} {:>12} {:>8} {:>8} {:>4}",
        "method", "inception", "raw MSE", "SSIM", "acc", "n"
    );
    for r in &t.rows {
        let cell = |v: Option<f64>, sci: bool| match v {
            Some(x) if sci => format!("{x:.3e}"),
            Some(x) => format!("{x:.4}"),
            None => "-".to_string(),
        };
        let _ = writeln!(
            out,
            "    {:<10} {:>16} {:>12} {:>8} {:>8} {:>4}",
            r.name,
            format!("{:.3} ± {:.3}", r.inception_mean, r.inception_std),
            cell(r.raw_mse, true),
            cell(r.spectrogram_ssim, false),
            cell(r.accuracy, false),
            r.count
        );
    }
}

/// Human-readable summary of every evaluation run found under `dir`.
pub fn cmd_report(dir: &Path) -> Result<String> {
    let mut paths = Vec::new();
    find_summaries(dir, &mut paths)?;
    paths.sort();
    if paths.is_empty() {
        bail!("no evaluation results found under {}", dir.display());
    }
    let mut runs = Vec::new();
    for p in &paths {
        let s: EvalSummary = serde_json::from_str(&fs::read_to_string(p)?)
            .with_context(|| format!("malformed summary {}", p.display()))?;
        runs.push((p.clone(), s));
    }
    let mut out = String::new();
    for (path, s) in &runs {
        let _ = writeln!(
            out,
            "run {} (seed {}, scale {}, config {})",
            path.display(),
            s.provenance.seed,
            s.provenance.scale,
            &s.provenance.config_hash[..12]
        );
        render_table(&mut out, &s.fake);
        render_table(&mut out, &s.real);
        let mut per_target: BTreeMap<(String, usize), usize> = BTreeMap::new();
        for f in &s.failures {
            *per_target.entry((f.source.as_str().to_string(), f.index)).or_default() += 1;
        }
        let _ = writeln!(out, "  failed targets: {} ({} failed method runs)", per_target.len(), s.failures.len());
        for ((src, idx), k) in &per_target {
            let _ = writeln!(out, "    {src} target {idx}: {k} failed methods");
        }
        let c = &s.checks;
        let mark = |ok: bool| if ok { "PASS" } else { "FLAG" };
        let _ = writeln!(out, "  checks:");
        let _ = writeln!(
            out,
            "    [{}] hybrid never worse than its prediction ({} violations)",
            mark(c.hybrid_violations == 0),
            c.hybrid_violations
        );
        let _ = writeln!(
            out,
            "    [{}] best-so-far traces non-increasing ({} violations)",
            mark(c.trace_violations == 0),
            c.trace_violations
        );
        let _ = writeln!(
            out,
            "    [{}] real-audio mapper accuracy {} vs gradient-only {} (chance threshold {:.2})",
            mark(c.mapper_trend_ok),
            fmt_opt(c.mapper_real_accuracy),
            fmt_opt(c.gradient_real_accuracy),
            c.chance_threshold
        );
        let _ = writeln!(out, "    mapper latent MSE on fake targets: {}", fmt_opt(c.fake_latent_mse_mapper));
        for f in &s.flags {
            let _ = writeln!(out, "  flag: {f}");
        }
    }
    if runs.len() > 1 {
        let _ = writeln!(out, "spread over {} runs (mean ± std [min, max])", runs.len());
        let mut metrics: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for (_, s) in &runs {
            for t in [&s.fake, &s.real] {
                for r in &t.rows {
                    let key = |m: &str| format!("{}/{}/{}", t.source.as_str(), r.name, m);
                    metrics.entry(key("inception")).or_default().push(r.inception_mean);
                    for (m, v) in [("raw_mse", r.raw_mse), ("ssim", r.spectrogram_ssim), ("accuracy", r.accuracy)] {
                        if let Some(v) = v {
                            metrics.entry(key(m)).or_default().push(v);
                        }
                    }
                }
            }
        }
        for (k, v) in metrics {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let std = (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / v.len() as f64).sqrt();
            let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
            let _ = writeln!(out, "  {k:<28} {mean:.5} ± {std:.5} [{lo:.5}, {hi:.5}]");
        }
    }
    Ok(out)
}

/// Invert one WAV file; writes `<out>.wav` and `<out>.json`.
pub fn cmd_invert(cfg: &ExperimentConfig, input: &Path, method: Method, out: &Path) -> Result<InversionRecord> {
    let models = load_models(cfg)?;
    let clip = load_wav(input, cfg.profile.clip_length)?;
    let t = Target { source: Source::Real, index: 0, clip, label: None, latent: None };
    let (_, mut outcomes) = evaluate_target(&models, cfg, &t, &[method])?;
    let (record, result) =
        outcomes.remove(0).map_err(|f| anyhow::anyhow!("{} inversion failed: {}", method.as_str(), f.error))?;
    if let Some(parent) = out.parent() {
        fs::create_dir_all(parent)?;
    }
    save_wav(&out.with_extension("wav"), &result.reconstruction)?;
    fs::write(out.with_extension("json"), serde_json::to_string_pretty(&record)?)?;
    Ok(record)
}

/// Reload the tables written by an evaluation run.
pub fn read_tables(cfg: &ExperimentConfig) -> Result<(ResultsTable, ResultsTable)> {
    let dir = cfg.results_dir();
    Ok((read_table(&dir.join("fake_table.json"))?.table, read_table(&dir.join("real_table.json"))?.table))
}
