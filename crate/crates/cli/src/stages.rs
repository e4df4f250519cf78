use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use s2s_core::context::{label_users, read_communities, read_labels, read_pois, write_labels, DroppedUser, StationContext};
use s2s_core::features::general::{read_feature_dump, write_feature_dump, GeneralLayout};
use s2s_core::features::sequence::{read_sequence_dump, sequence_stats, write_sequence_dump, SequenceFeature};
use s2s_core::ingest::{build_histories, parse_records, read_trips, write_records, write_reject_log, write_trips, StationRegistry};
use s2s_core::model::{
    check_model_gradients, checkpoint_tensors, evaluate, load_checkpoint, predict, random_guess_baseline, train, EvalReport,
    ModelConfig, Sample,
};
use s2s_core::nn::{write_checkpoint, GradCheckConfig};
use s2s_core::pipeline::{build_features, ingest};
use s2s_core::synth::{synthesize, COMMUNITIES_FILE, MANIFEST_FILE, POIS_FILE, RECORDS_FILE, STATIONS_FILE};

use crate::config::RunConfig;
use crate::CliError;

pub const FREQUENT_FILE: &str = "frequent_records.csv";
pub const TRIPS_FILE: &str = "trips.csv";
pub const INGEST_STATS_FILE: &str = "ingest_stats.csv";
pub const REJECTS_FILE: &str = "rejects.csv";
pub const CONTEXT_FILE: &str = "context.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const LABEL_DROPPED_FILE: &str = "label_dropped.csv";
pub const THRESHOLDS_FILE: &str = "thresholds.json";
pub const GENERAL_FILE: &str = "general.csv";
pub const SEQUENCES_FILE: &str = "sequences.txt";
pub const FEATURE_DROPPED_FILE: &str = "features_dropped.csv";
pub const SEQUENCE_STATS_FILE: &str = "sequence_stats.json";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const MODEL_CONFIG_FILE: &str = "model_config.json";
pub const SPLIT_FILE: &str = "split.csv";
pub const TRAIN_REPORT_FILE: &str = "train_report.json";
pub const EVAL_REPORT_FILE: &str = "eval_report.json";
pub const EVAL_TEXT_FILE: &str = "eval_report.txt";
pub const CONFUSION_FILE: &str = "confusion.csv";
pub const GRADCHECK_FILE: &str = "gradcheck.json";
pub const REPORT_FILE: &str = "report.txt";

/// Inputs and outputs of one stage run, as file names.
#[derive(Debug, Default)]
pub struct StageFiles {
    pub inputs: Vec<&'static str>,
    pub outputs: Vec<&'static str>,
}

/// Directory pair plus the stage name for error messages.
pub struct Io<'a> {
    pub stage: &'static str,
    pub input: &'a Path,
    pub output: &'a Path,
    pub files: StageFiles,
}

impl Io<'_> {
    fn in_path(&mut self, name: &'static str) -> Result<PathBuf, CliError> {
        let p = self.input.join(name);
        if !p.is_file() {
            return Err(CliError::Data {
                stage: self.stage,
                path: p,
                cause: "input file not found".into(),
            });
        }
        self.files.inputs.push(name);
        Ok(p)
    }

    fn open(&mut self, name: &'static str) -> Result<(PathBuf, BufReader<File>), CliError> {
        let p = self.in_path(name)?;
        let f = File::open(&p).map_err(|e| CliError::data(self.stage, &p, e))?;
        Ok((p, BufReader::new(f)))
    }

    fn create(&mut self, name: &'static str) -> Result<(PathBuf, BufWriter<File>), CliError> {
        let p = self.output.join(name);
        let f = File::create(&p).map_err(|e| CliError::data(self.stage, &p, e))?;
        self.files.outputs.push(name);
        Ok((p, BufWriter::new(f)))
    }

    /// Runs `f` on a fresh output file, attributing failures to that file.
    fn write<F>(&mut self, name: &'static str, f: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut BufWriter<File>) -> s2s_core::Result<()>,
    {
        let (p, mut w) = self.create(name)?;
        f(&mut w).map_err(|e| CliError::data(self.stage, &p, e))?;
        w.flush().map_err(|e| CliError::data(self.stage, &p, e))
    }

    fn read<T, F>(&mut self, name: &'static str, f: F) -> Result<T, CliError>
    where
        F: FnOnce(BufReader<File>) -> s2s_core::Result<T>,
    {
        let (p, r) = self.open(name)?;
        f(r).map_err(|e| CliError::data(self.stage, &p, e))
    }

    fn fail(&self, name: &str, cause: impl ToString) -> CliError {
        CliError::Data {
            stage: self.stage,
            path: self.input.join(name),
            cause: cause.to_string(),
        }
    }

    fn registry(&mut self) -> Result<StationRegistry, CliError> {
        self.read(STATIONS_FILE, StationRegistry::read_csv)
    }
}

fn write_dropped<W: Write>(w: W, dropped: &[DroppedUser]) -> s2s_core::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["card_id", "reason"])?;
    for d in dropped {
        out.write_record([d.card_id.as_str(), d.reason.as_str()])?;
    }
    out.flush()?;
    Ok(())
}

fn write_json<W: Write, T: Serialize>(mut w: W, value: &T) -> s2s_core::Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

pub fn synth(cfg: &RunConfig, io: &mut Io) -> Result<(), CliError> {
    let out = synthesize(&cfg.synth).map_err(|e| CliError::Usage(e.to_string()))?;
    out.write_dir(io.output).map_err(|e| CliError::data(io.stage, io.output, e))?;
    io.files.outputs = vec![STATIONS_FILE, COMMUNITIES_FILE, POIS_FILE, RECORDS_FILE, MANIFEST_FILE];
    log::info!("{} agents, {} records", out.agents.len(), out.records.len());
    Ok(())
}

pub fn ingest_stage(cfg: &RunConfig, io: &mut Io) -> Result<(), CliError> {
    let registry = io.registry()?;
    let parsed = io.read(RECORDS_FILE, |r| parse_records(r, &registry))?;
    if parsed.records.is_empty() {
        return Err(io.fail(RECORDS_FILE, "no valid records"));
    }
    let rejects = parsed.rejects;
    let ing = ingest(parsed.records, cfg.min_days).map_err(|e| CliError::Usage(e.to_string()))?;
    io.write(REJECTS_FILE, |w| write_reject_log(w, &rejects))?;
    io.write(FREQUENT_FILE, |w| {
        write_records(w, ing.frequent.iter().flat_map(|h| &h.records), &registry)
    })?;
    io.write(TRIPS_FILE, |w| write_trips(w, &ing.all_trips))?;
    io.write(INGEST_STATS_FILE, |w| ing.stats.write_csv(w))?;
    log::info!(
        "{} users, {} frequent, {} rejects",
        ing.stats.total_users,
        ing.frequent.len(),
        rejects.len()
    );
    Ok(())
}

#[derive(Serialize, Deserialize)]
pub struct LabelSummary {
    pub labeled: usize,
    pub dropped: usize,
    pub low_threshold: f64,
    pub high_threshold: f64,
    /// Labeled users per class, low to high.
    pub counts: [usize; 3],
}

pub fn label(cfg: &RunConfig, io: &mut Io) -> Result<(), CliError> {
    let registry = io.registry()?;
    let records = io.read(FREQUENT_FILE, |r| parse_records(r, &registry))?;
    if !records.rejects.is_empty() {
        return Err(io.fail(FREQUENT_FILE, format!("{} malformed lines", records.rejects.len())));
    }
    let histories = build_histories(records.records);
    let trips = io.read(TRIPS_FILE, read_trips)?;
    let pois = io.read(POIS_FILE, read_pois)?;
    let communities = io.read(COMMUNITIES_FILE, read_communities)?;
    let ctx = StationContext::build(&registry, &trips, &pois, communities, &cfg.context)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let out = label_users(&histories, &ctx, &cfg.label_policy()).map_err(|e| io.fail(FREQUENT_FILE, e))?;
    io.write(CONTEXT_FILE, |w| ctx.write_csv(w))?;
    io.write(LABELS_FILE, |w| write_labels(w, &out.labels))?;
    io.write(LABEL_DROPPED_FILE, |w| write_dropped(w, &out.dropped))?;
    let mut counts = [0; 3];
    for l in &out.labels {
        counts[l.ses.index()] += 1;
    }
    let summary = LabelSummary {
        labeled: out.labels.len(),
        dropped: out.dropped.len(),
        low_threshold: out.thresholds.low,
        high_threshold: out.thresholds.high,
        counts,
    };
    io.write(THRESHOLDS_FILE, |w| write_json(w, &summary))
}

pub fn features(cfg: &RunConfig, io: &mut Io) -> Result<(), CliError> {
    let registry = io.registry()?;
    let records = io.read(FREQUENT_FILE, |r| parse_records(r, &registry))?;
    let histories = build_histories(records.records);
    let ctx = io.read(CONTEXT_FILE, StationContext::read_csv)?;
    let labels = io.read(LABELS_FILE, read_labels)?;
    let out = build_features(&histories, &labels, &registry, &ctx, &cfg.features)
        .map_err(|e| io.fail(FREQUENT_FILE, e))?;
    io.write(GENERAL_FILE, |w| {
        write_feature_dump(w, out.rows.iter().map(|u| (u.card_id.as_str(), &u.general)))
    })?;
    io.write(SEQUENCES_FILE, |w| {
        write_sequence_dump(w, out.rows.iter().map(|u| (u.card_id.as_str(), &u.sequence)))
    })?;
    io.write(FEATURE_DROPPED_FILE, |w| write_dropped(w, &out.dropped))?;
    let seqs: Vec<SequenceFeature> = out.rows.iter().map(|u| u.sequence.clone()).collect();
    let stats = sequence_stats(&seqs);
    io.write(SEQUENCE_STATS_FILE, |w| write_json(w, &stats))?;
    log::info!("{} users, {} bins each", out.rows.len(), out.window.len());
    Ok(())
}

/// What `eval` needs to rebuild the trained network.
#[derive(Serialize, Deserialize)]
pub struct TrainedConfig {
    pub model: ModelConfig,
    pub layout: GeneralLayout,
}

/// Joins the feature dumps with the labels, in general-dump order.
fn load_samples(io: &mut Io, layout: &GeneralLayout) -> Result<Vec<Sample<f64>>, CliError> {
    let general = io.read(GENERAL_FILE, read_feature_dump)?;
    let seqs: HashMap<String, SequenceFeature> = io.read(SEQUENCES_FILE, read_sequence_dump)?.into_iter().collect();
    let labels: HashMap<String, usize> = io
        .read(LABELS_FILE, read_labels)?
        .into_iter()
        .map(|l| (l.card_id, l.ses.index()))
        .collect();
    if general.is_empty() {
        return Err(io.fail(GENERAL_FILE, "no users"));
    }
    general
        .into_iter()
        .map(|(card, g)| {
            let seq = seqs.get(&card).ok_or_else(|| io.fail(SEQUENCES_FILE, format!("no sequence for card {card}")))?;
            let label = *labels.get(&card).ok_or_else(|| io.fail(LABELS_FILE, format!("no label for card {card}")))?;
            Ok(Sample::new(card, seq, layout.raw_vector(&g), label))
        })
        .collect()
}

pub fn train_stage(cfg: &RunConfig, io: &mut Io) -> Result<(), CliError> {
    let layout = cfg.features.layout;
    let data = load_samples(io, &layout)?;
    let trained = train(&data, &cfg.model).map_err(|e| io.fail(GENERAL_FILE, e))?;
    let tensors = checkpoint_tensors(&trained);
    let named: Vec<(&str, &s2s_core::nn::Tensor<f64>)> = tensors.iter().map(|(n, t)| (n.as_str(), t)).collect();
    io.write(CHECKPOINT_FILE, |w| write_checkpoint(w, &named))?;
    let tc = TrainedConfig {
        model: cfg.model.clone(),
        layout,
    };
    io.write(MODEL_CONFIG_FILE, |w| write_json(w, &tc))?;
    io.write(SPLIT_FILE, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["card_id", "part"])?;
        for (part, idx) in [("train", &trained.split.train), ("test", &trained.split.test)] {
            for &i in idx {
                out.write_record([data[i].card_id.as_str(), part])?;
            }
        }
        out.flush()?;
        Ok(())
    })?;
    io.write(TRAIN_REPORT_FILE, |w| write_json(w, &trained.report))?;
    log::info!("{} held-out macro-F1 {:.4}", cfg.model.variant, trained.report.macro_f1);
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(r: BufReader<File>) -> s2s_core::Result<T> {
    Ok(serde_json::from_reader(r)?)
}

/// Card ids of the held-out part.
fn test_cards(io: &mut Io) -> Result<Vec<String>, CliError> {
    io.read(SPLIT_FILE, |r| {
        let mut rdr = csv::Reader::from_reader(r);
        let mut out = Vec::new();
        for row in rdr.records() {
            let row = row?;
            if row.get(1) == Some("test") {
                out.push(row.get(0).unwrap_or_default().to_owned());
            }
        }
        Ok(out)
    })
}

pub fn eval(io: &mut Io) -> Result<(), CliError> {
    let tc: TrainedConfig = io.read(MODEL_CONFIG_FILE, read_json)?;
    let (model, norm) = io.read(CHECKPOINT_FILE, |r| load_checkpoint(r, &tc.model))?;
    let data = load_samples(io, &tc.layout)?;
    let by_card: HashMap<&str, &Sample<f64>> = data.iter().map(|s| (s.card_id.as_str(), s)).collect();
    let test = test_cards(io)?;
    if test.is_empty() {
        return Err(io.fail(SPLIT_FILE, "empty test split"));
    }
    let mut preds = Vec::with_capacity(test.len());
    let mut labels = Vec::with_capacity(test.len());
    for card in &test {
        let s = by_card
            .get(card.as_str())
            .ok_or_else(|| io.fail(GENERAL_FILE, format!("no features for card {card}")))?;
        let x = Sample {
            general: norm.normalize(&s.general),
            ..(*s).clone()
        };
        let (p, _) = predict(&model, &x).map_err(|e| io.fail(CHECKPOINT_FILE, e))?;
        preds.push(p);
        labels.push(s.label);
    }
    let report = evaluate(&preds, &labels, tc.model.classes).map_err(|e| io.fail(SPLIT_FILE, e))?;
    io.write(EVAL_REPORT_FILE, |w| write_json(w, &report))?;
    io.write(EVAL_TEXT_FILE, |w| Ok(w.write_all(report.to_text().as_bytes())?))?;
    io.write(CONFUSION_FILE, |w| Ok(w.write_all(report.confusion_csv().as_bytes())?))?;
    println!("macro_f1 {:.6}", report.macro_f1);
    Ok(())
}

pub fn gradcheck(cfg: &RunConfig, io: &mut Io) -> Result<(), CliError> {
    let dim = cfg.features.layout.width();
    let report = check_model_gradients(&cfg.model, cfg.gradcheck_bins, dim, &GradCheckConfig::default(), cfg.model.seed)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    #[derive(Serialize)]
    struct Out<'a> {
        passed: bool,
        max_rel_error: f64,
        #[serde(flatten)]
        report: &'a s2s_core::nn::GradCheckReport,
    }
    let out = Out {
        passed: report.passed(),
        max_rel_error: report.max_rel_error(),
        report: &report,
    };
    io.write(GRADCHECK_FILE, |w| write_json(w, &out))?;
    println!("max_rel_error {:.3e} passed {}", out.max_rel_error, out.passed);
    if !out.passed {
        return Err(CliError::Data {
            stage: io.stage,
            path: io.output.join(GRADCHECK_FILE),
            cause: format!("relative error {:.3e} above {:.0e}", out.max_rel_error, report.tolerance),
        });
    }
    Ok(())
}

pub fn report(cfg: &RunConfig, io: &mut Io) -> Result<(), CliError> {
    let labels: LabelSummary = io.read(THRESHOLDS_FILE, read_json)?;
    let eval: EvalReport = io.read(EVAL_REPORT_FILE, read_json)?;
    let train: EvalReport = io.read(TRAIN_REPORT_FILE, read_json)?;
    let tc: TrainedConfig = io.read(MODEL_CONFIG_FILE, read_json)?;
    let truth: Vec<usize> = eval
        .confusion
        .iter()
        .enumerate()
        .flat_map(|(c, row)| std::iter::repeat_n(c, row.iter().sum()))
        .collect();
    let random = random_guess_baseline(&truth, eval.confusion.len(), cfg.model.seed).map_err(|e| io.fail(EVAL_REPORT_FILE, e))?;
    let mut s = String::new();
    use std::fmt::Write as _;
    let total = labels.labeled.max(1) as f64;
    let _ = writeln!(s, "labeled_users {}", labels.labeled);
    let _ = writeln!(s, "dropped_users {}", labels.dropped);
    let _ = writeln!(s, "threshold.low {:.2}", labels.low_threshold);
    let _ = writeln!(s, "threshold.high {:.2}", labels.high_threshold);
    for (c, name) in ["low", "middle", "high"].iter().enumerate() {
        let _ = writeln!(s, "share.{name} {:.4}", labels.counts[c] as f64 / total);
    }
    let _ = writeln!(s, "variant {}", tc.model.variant);
    let _ = writeln!(s, "epochs {}", train.history.len());
    if let Some(last) = train.history.last() {
        let _ = writeln!(s, "final_train_loss {:.6}", last.train_loss);
    }
    let _ = writeln!(s, "test_users {}", eval.n);
    let _ = writeln!(s, "accuracy {:.4}", eval.accuracy);
    for m in &eval.per_class {
        let _ = writeln!(s, "f1.{} {:.4}", m.class, m.f1);
    }
    let _ = writeln!(s, "macro_f1 {:.4}", eval.macro_f1);
    let _ = writeln!(s, "random_guess_macro_f1 {:.4}", random.macro_f1);
    io.write(REPORT_FILE, |w| Ok(w.write_all(s.as_bytes())?))?;
    print!("{s}");
    Ok(())
}
