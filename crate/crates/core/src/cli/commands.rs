use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde_json::json;

use super::config::{ClusterSpace, RunConfig};
use super::formats::{
    load_jsonl, read_embeddings, read_predictions, write_embeddings, write_jsonl, write_predictions, CaptionPair,
    FeatureRecord, GeneratedCaption, ScoreMap, SplitFile,
};
use super::manifest::RunContext;
use super::*;
use crate::baselines::{BaselineKind, BaselineSet};
use crate::captioner::{train_captioner, CaptionModel};
use crate::corpus::{
    id_set_hash, join_dataset, load_captions, load_votes, split, write_captions, write_votes, LabeledEntry, QScoreTable,
};
use crate::encoder::{import_external_hidden, init_model, mean_rows, train_heads, PerceptionModel};
use crate::eval::{compare, evaluate, improvement, migrate, MigrationSet};
use crate::scenescape::{hdbscan, tsne, write_scene_csv, NOISE};
use crate::seed::{sub_seed, Stream};
use crate::topics::{
    build_bow, default_stopwords, fit_lda, top_words, topic_perception_correlation, topic_topic_correlation,
};

/// Fold per-command flags into the config before it is recorded.
pub(super) fn apply_overrides(cmd: &Command, cfg: &mut RunConfig) {
    match cmd {
        Command::TrainCaptioner(a) => {
            if let Some(e) = a.epochs {
                cfg.captioner.epochs = e;
            }
        }
        Command::Caption(a) => {
            if let Some(m) = a.max_len {
                cfg.captioner.max_len = m;
            }
        }
        Command::Train(a) => {
            if let Some(e) = a.epochs {
                cfg.encoder.epochs = e;
            }
            if let Some(lr) = a.learning_rate {
                cfg.encoder.learning_rate = lr;
            }
            if let Some(b) = a.batch_size {
                cfg.encoder.batch_size = b;
            }
            if let Some(f) = a.test_fraction {
                cfg.test_fraction = f;
            }
        }
        Command::Cluster(a) => {
            if let Some(s) = a.space {
                cfg.cluster_space = s;
            }
            if let Some(p) = a.perplexity {
                cfg.tsne.perplexity = p;
            }
            if let Some(i) = a.iterations {
                cfg.tsne.iterations = i;
            }
            if let Some(m) = a.min_cluster_size {
                cfg.hdbscan.min_cluster_size = m;
            }
            if let Some(m) = a.min_samples {
                cfg.hdbscan.min_samples = m;
            }
        }
        Command::Topics(a) => {
            if let Some(k) = a.topics {
                cfg.lda.topics = k;
            }
            if let Some(i) = a.iterations {
                cfg.lda.iterations = i;
            }
        }
        _ => {}
    }
}

pub(super) fn dispatch(ctx: &mut RunContext, cmd: &Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(ctx, a),
        Command::Ingest(a) => ingest(ctx, a),
        Command::Score(a) => score(ctx, a),
        Command::TrainCaptioner(a) => train_captioner_cmd(ctx, a),
        Command::Caption(a) => caption(ctx, a),
        Command::Train(a) => train(ctx, a),
        Command::Predict(a) => predict(ctx, a),
        Command::Embed(a) => embed(ctx, a),
        Command::Cluster(a) => cluster(ctx, a),
        Command::Topics(a) => topics(ctx, a),
        Command::Baseline(a) => baseline(ctx, a),
        Command::Eval(a) => eval(ctx, a),
        Command::Migrate(a) => migrate_cmd(ctx, a),
    }
}

fn weights_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("pmte")
}

fn load_model(ctx: &mut RunContext, manifest: &Path) -> Result<PerceptionModel> {
    ctx.input(manifest)?;
    let weights = ctx.input(&weights_path(manifest))?;
    PerceptionModel::load(&weights, manifest)
}

fn write_loss_csv(ctx: &mut RunContext, path: &Path, trace: &[f64]) -> Result<()> {
    let mut text = String::from("epoch,loss\n");
    for (i, l) in trace.iter().enumerate() {
        text.push_str(&format!("{i},{l:.6}\n"));
    }
    ctx.write_string(path, &text)
}

fn synth(ctx: &mut RunContext, a: &SynthArgs) -> Result<()> {
    if a.images < 2 || a.locations == 0 || a.raters == 0 {
        return Err(Error::Usage("synth needs at least 2 images, 1 location and 1 rater".into()));
    }
    let seed = sub_seed(ctx.config.seed, Stream::Synthetic);
    let corpus = crate::synthetic::street_corpus(a.images, a.votes_per_image, seed);

    let p = ctx.output_path(None, "votes.csv");
    let w = ctx.create(&p)?;
    write_votes(w, &corpus.votes)?;
    let p = ctx.output_path(None, "captions.jsonl");
    let w = ctx.create(&p)?;
    write_captions(w, &corpus.captions)?;

    let pairs = crate::synthetic::caption_pairs();
    let records: Vec<CaptionPair> =
        pairs.iter().map(|(f, c)| CaptionPair { feature: f.clone(), caption: c.clone() }).collect();
    let p = ctx.output_path(None, "caption_pairs.jsonl");
    let w = ctx.create(&p)?;
    write_jsonl(w, &records)?;
    let features: Vec<FeatureRecord> = pairs
        .iter()
        .enumerate()
        .map(|(i, (f, _))| FeatureRecord { image_id: format!("cap{i:02}"), feature: f.clone() })
        .collect();
    let p = ctx.output_path(None, "caption_features.jsonl");
    let w = ctx.create(&p)?;
    write_jsonl(w, &features)?;

    let (set, _) = crate::synthetic::migration_set(a.locations, a.raters, a.rating_noise, seed.wrapping_add(1));
    let p = ctx.output_path(None, "migration.jsonl");
    let w = ctx.create(&p)?;
    set.write(w)?;
    eprintln!(
        "synth: {} images, {} votes, {} captioner pairs, {} migration locations",
        corpus.captions.len(),
        corpus.votes.len(),
        records.len(),
        set.locations.len()
    );
    Ok(())
}

fn ingest(ctx: &mut RunContext, a: &IngestArgs) -> Result<()> {
    let votes = load_votes(&ctx.input(&a.votes)?)?;
    let docs = load_captions(&ctx.input(&a.captions)?)?;
    let table = QScoreTable::from_votes(&votes)?;
    let joined = join_dataset(&table, &docs)?;
    let voted: BTreeSet<&str> = votes.iter().flat_map(|v| [v.left_id.as_str(), v.right_id.as_str()]).collect();
    let summary = json!({
        "votes": votes.len(),
        "voted_images": voted.len(),
        "scored_images": table.image_ids().count(),
        "scores": table.len(),
        "caption_documents": docs.len(),
        "joined": joined.len(),
        "drops": joined.drops,
    });
    let p = ctx.output_path(None, "ingest.json");
    ctx.write_json(&p, &summary)?;
    eprintln!("ingest: {} of {} caption documents join complete scores", joined.len(), docs.len());
    Ok(())
}

fn score(ctx: &mut RunContext, a: &ScoreArgs) -> Result<()> {
    let votes = load_votes(&ctx.input(&a.votes)?)?;
    let table = QScoreTable::from_votes(&votes)?;
    let p = ctx.output_path(a.out.as_deref(), "scores.csv");
    let w = ctx.create(&p)?;
    table.write_csv(w)?;
    eprintln!("score: {} images, {} scores", table.image_ids().count(), table.len());
    Ok(())
}

fn train_captioner_cmd(ctx: &mut RunContext, a: &TrainCaptionerArgs) -> Result<()> {
    let pairs: Vec<CaptionPair> = load_jsonl(&ctx.input(&a.pairs)?)?;
    let data: Vec<(Vec<f64>, String)> = pairs.into_iter().map(|p| (p.feature, p.caption)).collect();
    let mut trained = train_captioner(&data, &ctx.config.captioner)?;
    trained.model.quantize();
    let manifest = ctx.output_path(None, "captioner.json");
    let weights = weights_path(&manifest);
    trained.model.save(&trained.config, &weights, &manifest)?;
    ctx.claim(&weights);
    ctx.claim(&manifest);
    let p = ctx.output_path(None, "captioner_loss.csv");
    write_loss_csv(ctx, &p, &trained.loss_trace)?;
    if let (Some(first), Some(last)) = (trained.loss_trace.first(), trained.loss_trace.last()) {
        eprintln!("train-captioner: loss {first:.4} -> {last:.4}");
    }
    Ok(())
}

fn caption(ctx: &mut RunContext, a: &CaptionArgs) -> Result<()> {
    ctx.input(&a.model)?;
    let weights = ctx.input(&weights_path(&a.model))?;
    let (model, _) = CaptionModel::load(&weights, &a.model)?;
    let features: Vec<FeatureRecord> = load_jsonl(&ctx.input(&a.features)?)?;
    let max_len = ctx.config.captioner.max_len;
    let out: Vec<GeneratedCaption> = features
        .iter()
        .map(|f| Ok(GeneratedCaption { image_id: f.image_id.clone(), caption: model.caption(&f.feature, max_len)? }))
        .collect::<Result<_>>()?;
    let p = ctx.output_path(None, "generated_captions.jsonl");
    let w = ctx.create(&p)?;
    write_jsonl(w, &out)
}

fn labeled(ctx: &mut RunContext, scores: &Path, captions: &Path) -> Result<(QScoreTable, Vec<LabeledEntry>)> {
    let table = QScoreTable::load(&ctx.input(scores)?)?;
    let docs = load_captions(&ctx.input(captions)?)?;
    let joined = join_dataset(&table, &docs)?;
    Ok((table, joined.entries))
}

fn train(ctx: &mut RunContext, a: &TrainArgs) -> Result<()> {
    let table = QScoreTable::load(&ctx.input(&a.scores)?)?;
    let docs = load_captions(&ctx.input(&a.captions)?)?;
    let corpus = join_dataset(&table, &docs)?;
    let seed = ctx.config.split_seed();
    let parts = split(&corpus, ctx.config.test_fraction, seed)?;
    let split_file = SplitFile {
        seed,
        test_fraction: ctx.config.test_fraction,
        test_hash: parts.test_hash(),
        train: parts.train.iter().map(|e| e.image_id().to_string()).collect(),
        test: parts.test.iter().map(|e| e.image_id().to_string()).collect(),
    };
    let p = ctx.output_path(None, "split.json");
    ctx.write_json(&p, &split_file)?;

    let outcome = train_heads(&parts.train, &ctx.config.encoder)?;
    let mut model = outcome.model;
    model.quantize();
    let manifest = ctx.output_path(None, "model.json");
    let weights = weights_path(&manifest);
    model.save(&weights, &manifest)?;
    ctx.claim(&weights);
    ctx.claim(&manifest);
    let p = ctx.output_path(None, "train_loss.csv");
    write_loss_csv(ctx, &p, &outcome.loss_trace)?;
    eprintln!(
        "train: {} train / {} test images, loss {:.4} -> {:.4}",
        parts.train.len(),
        parts.test.len(),
        outcome.loss_trace.first().copied().unwrap_or(f64::NAN),
        outcome.loss_trace.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn predict(ctx: &mut RunContext, a: &PredictArgs) -> Result<()> {
    let model = load_model(ctx, &a.model)?;
    let mut docs = load_captions(&ctx.input(&a.captions)?)?;
    if let Some(s) = &a.split {
        let split = SplitFile::load(&ctx.input(s)?)?;
        let keep: BTreeSet<&str> = split.test.iter().map(String::as_str).collect();
        docs.retain(|d| keep.contains(d.image_id.as_str()));
    }
    let mut preds = ScoreMap::new();
    for d in &docs {
        preds.insert(d.image_id.clone(), model.predict_q(d)?);
    }
    let p = ctx.output_path(a.out.as_deref(), "predictions.csv");
    let w = ctx.create(&p)?;
    write_predictions(w, &preds)?;
    eprintln!("predict: {} images", preds.len());
    Ok(())
}

fn stack(rows: Vec<ndarray::Array1<f64>>) -> Result<Array2<f64>> {
    let width = rows.first().map_or(0, |r| r.len());
    let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
    Array2::from_shape_vec((rows.len(), width), flat).map_err(|e| Error::Shape(e.to_string()))
}

fn embed(ctx: &mut RunContext, a: &EmbedArgs) -> Result<()> {
    let (ids, rows) = if let Some(h) = &a.hidden {
        let container = ctx.input(h)?;
        if let Some(i) = &a.index {
            ctx.input(i)?;
        }
        let imported = import_external_hidden(&container, a.index.as_deref())?;
        let mut ids = Vec::new();
        let mut rows = Vec::new();
        for (id, item) in imported {
            let e = mean_rows(&item.hidden, &item.content_mask())
                .ok_or_else(|| Error::Degenerate(format!("{id} has no content tokens")))?;
            ids.push(id);
            rows.push(e);
        }
        (ids, rows)
    } else {
        let (Some(m), Some(c)) = (&a.model, &a.captions) else {
            return Err(Error::Usage("embed needs --hidden or --model with --captions".into()));
        };
        let model = load_model(ctx, m)?;
        let docs = load_captions(&ctx.input(c)?)?;
        let rows = docs.iter().map(|d| model.sentence_embedding(d)).collect::<Result<Vec<_>>>()?;
        (docs.into_iter().map(|d| d.image_id).collect(), rows)
    };
    if ids.is_empty() {
        return Err(Error::InvalidInput("nothing to embed".into()));
    }
    let x = stack(rows)?;
    let p = ctx.output_path(None, "embeddings.csv");
    let w = ctx.create(&p)?;
    write_embeddings(w, &ids, &x)?;
    eprintln!("embed: {} x {}", x.nrows(), x.ncols());
    Ok(())
}

fn cluster(ctx: &mut RunContext, a: &ClusterArgs) -> Result<()> {
    let (ids, x) = read_embeddings(&ctx.input(&a.embeddings)?)?;
    let layout = tsne(x.view(), &ctx.config.tsne)?;
    for w in &layout.warnings {
        eprintln!("warning: {w}");
    }
    let space = ctx.config.cluster_space;
    let labeling = match space {
        ClusterSpace::Tsne => hdbscan(layout.embedding.view(), &ctx.config.hdbscan)?,
        ClusterSpace::Raw => hdbscan(x.view(), &ctx.config.hdbscan)?,
    };
    let p = ctx.output_path(None, "scene.csv");
    let w = ctx.create(&p)?;
    write_scene_csv(w, &ids, layout.embedding.view(), &labeling.labels)?;
    let mut sizes: BTreeMap<i32, usize> = BTreeMap::new();
    for &l in &labeling.labels {
        *sizes.entry(l).or_default() += 1;
    }
    let noise = sizes.remove(&NOISE).unwrap_or(0);
    let summary = json!({
        "points": ids.len(),
        "space": space,
        "clusters": labeling.cluster_count(),
        "cluster_sizes": sizes.values().collect::<Vec<_>>(),
        "noise": noise,
        "perplexity": layout.perplexity,
        "initial_kl": layout.initial_kl,
        "final_kl": layout.final_kl,
        "warnings": layout.warnings,
    });
    let p = ctx.output_path(None, "cluster.json");
    ctx.write_json(&p, &summary)?;
    eprintln!("cluster: {} clusters, {} noise points", labeling.cluster_count(), noise);
    Ok(())
}

/// Number of distinct non-noise labels in a scene CSV.
fn scene_cluster_count(path: &Path) -> Result<usize> {
    let src = path.display().to_string();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(f);
    let col = r
        .headers()?
        .iter()
        .position(|h| h == "cluster_label")
        .ok_or_else(|| Error::parse(&src, 1, "no cluster_label column"))?;
    let mut labels = BTreeSet::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let l: i32 = rec[col].parse().map_err(|_| Error::parse(&src, i as u64 + 2, format!("bad label {:?}", &rec[col])))?;
        if l != NOISE {
            labels.insert(l);
        }
    }
    Ok(labels.len())
}

fn topics(ctx: &mut RunContext, a: &TopicsArgs) -> Result<()> {
    let docs = load_captions(&ctx.input(&a.captions)?)?;
    if let Some(scene) = &a.clusters {
        let k = scene_cluster_count(&ctx.input(scene)?)?;
        if k == 0 {
            return Err(Error::Degenerate(format!("{} has no clusters to size the topic model", scene.display())));
        }
        ctx.config.lda.topics = k;
    }
    let bow = build_bow(&docs, &default_stopwords(), ctx.config.topic_min_freq)?;
    let model = fit_lda(&bow, &ctx.config.lda)?;
    let summary = top_words(&model, ctx.config.topic_words)?;

    let p = ctx.output_path(None, "topics.csv");
    let w = ctx.create(&p)?;
    summary.write_csv(w)?;
    let p = ctx.output_path(None, "topics.txt");
    ctx.write_string(&p, &summary.render_text())?;
    let p = ctx.output_path(None, "topic_correlation.csv");
    let w = ctx.create(&p)?;
    topic_topic_correlation(&model)?.write_csv(w)?;
    if let Some(s) = &a.scores {
        let table = QScoreTable::load(&ctx.input(s)?)?;
        let corr = topic_perception_correlation(&model, &table)?;
        let undefined = corr.degenerate.iter().filter(|&&d| d).count();
        if undefined > 0 {
            eprintln!("warning: {undefined} topic/perception correlations are undefined and written as 0");
        }
        let p = ctx.output_path(None, "topic_perception.csv");
        let w = ctx.create(&p)?;
        corr.write_csv(w)?;
    }
    let info = json!({
        "topics": model.k,
        "alpha": model.alpha,
        "beta": model.beta,
        "sweeps": model.sweeps,
        "documents": bow.n_docs(),
        "dropped_documents": bow.dropped,
        "vocabulary": bow.vocab_size(),
        "tokens": bow.total_tokens(),
        "stopword_tokens": bow.stopword_tokens,
        "rare_tokens": bow.rare_tokens,
    });
    let p = ctx.output_path(None, "topics.json");
    ctx.write_json(&p, &info)?;
    eprintln!("topics: K={} over {} documents, vocabulary {}", model.k, bow.n_docs(), bow.vocab_size());
    Ok(())
}

fn features_of(model: &PerceptionModel, entries: &[&LabeledEntry]) -> Result<Array2<f64>> {
    stack(entries.iter().map(|e| model.sentence_embedding(&e.doc)).collect::<Result<Vec<_>>>()?)
}

fn baseline(ctx: &mut RunContext, a: &BaselineArgs) -> Result<()> {
    let (_, entries) = labeled(ctx, &a.scores, &a.captions)?;
    let split_file = SplitFile::load(&ctx.input(&a.split)?)?;
    let by_id: BTreeMap<&str, &LabeledEntry> = entries.iter().map(|e| (e.image_id(), e)).collect();
    let pick = |ids: &[String]| -> Result<Vec<&LabeledEntry>> {
        ids.iter()
            .map(|id| {
                by_id.get(id.as_str()).copied().ok_or_else(|| {
                    Error::InvalidInput(format!("split image {id} has no complete scores and captions"))
                })
            })
            .collect()
    };
    let train = pick(&split_file.train)?;
    let test = pick(&split_file.test)?;
    if id_set_hash(test.iter().map(|e| e.image_id())) != split_file.test_hash {
        return Err(Error::InvalidInput("split file test ids do not match its test_hash".into()));
    }
    let model = match &a.model {
        Some(m) => load_model(ctx, m)?,
        None => {
            let owned: Vec<LabeledEntry> = train.iter().map(|e| (*e).clone()).collect();
            init_model(&owned, &ctx.config.encoder)?
        }
    };
    let x_train = features_of(&model, &train)?;
    let x_test = features_of(&model, &test)?;
    let y_train: Vec<[f64; 6]> = train.iter().map(|e| e.scores).collect();
    let kinds: Vec<BaselineKind> = match a.kind {
        Some(k) => vec![k],
        None => BaselineKind::ALL.to_vec(),
    };
    for kind in kinds {
        let set = BaselineSet::fit(kind, &x_train, &y_train, &ctx.config.baselines)?;
        let p = ctx.output_path(None, &format!("baseline-{}.json", kind.slug()));
        set.save(&p)?;
        ctx.claim(&p);
        let preds: ScoreMap =
            test.iter().map(|e| e.image_id().to_string()).zip(set.predict(&x_test)?).collect();
        let p = ctx.output_path(None, &format!("predictions-{}.csv", kind.slug()));
        let w = ctx.create(&p)?;
        write_predictions(w, &preds)?;
        eprintln!("baseline: {} fitted on {} images", kind.label(), train.len());
    }
    Ok(())
}

fn eval(ctx: &mut RunContext, a: &EvalArgs) -> Result<()> {
    let table = QScoreTable::load(&ctx.input(&a.scores)?)?;
    let mut targets: ScoreMap = table.image_ids().filter_map(|id| Some((id.to_string(), table.complete(id)?))).collect();
    if let Some(s) = &a.split {
        let split = SplitFile::load(&ctx.input(s)?)?;
        let keep: BTreeSet<&str> = split.test.iter().map(String::as_str).collect();
        targets.retain(|id, _| keep.contains(id.as_str()));
    }
    let mut reports = Vec::new();
    for entry in &a.predictions {
        let (name, path) = entry
            .split_once('=')
            .filter(|(n, p)| !n.is_empty() && !p.is_empty())
            .ok_or_else(|| Error::Usage(format!("--predictions expects NAME=FILE, got {entry:?}")))?;
        let preds = read_predictions(&ctx.input(Path::new(path))?)?;
        reports.push(evaluate(name, &preds, &targets)?);
    }
    let p = ctx.output_path(None, "metrics.json");
    ctx.write_json(&p, &reports)?;
    if reports.len() < 2 {
        return Ok(());
    }
    let cmp = compare(&reports)?;
    let p = ctx.output_path(None, "comparison.csv");
    let w = ctx.create(&p)?;
    cmp.write_csv(w)?;
    let mut text = cmp.render_text();
    if let Some(r) = &a.reference {
        text.push_str(&format!("\nMSE improvement of {r} over the best other model: {:.2}%\n", improvement(&cmp, r)?));
    }
    let p = ctx.output_path(None, "comparison.txt");
    ctx.write_string(&p, &text)?;
    print!("{text}");
    Ok(())
}

fn migrate_cmd(ctx: &mut RunContext, a: &MigrateArgs) -> Result<()> {
    let model = load_model(ctx, &a.model)?;
    let set = MigrationSet::load(&ctx.input(&a.set)?)?;
    let result = migrate(&model, &set)?;
    let summary = json!({
        "locations": set.locations.len(),
        "pooled_r2": result.pooled_r2,
        "per_dimension": result.per_dimension,
    });
    let p = ctx.output_path(None, "migration.json");
    ctx.write_json(&p, &summary)?;
    let p = ctx.output_path(None, "migration_scatter.csv");
    let w = ctx.create(&p)?;
    result.write_scatter_csv(w)?;
    eprintln!("migrate: pooled R^2 {:.3} over {} locations", result.pooled_r2, set.locations.len());
    Ok(())
}

