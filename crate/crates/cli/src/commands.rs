use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use mmsbm::analysis::{group_similarity, AgeBinning};
use mmsbm::eval::{compare, scaling_benchmark, Method, MethodSpec};
use mmsbm::io::metadata::{parse_metadata, MetadataFormat};
use mmsbm::io::ratings::{parse_ratings, write_ratings};
use mmsbm::io::report::{render_report, render_similarity_report, summary_text, ReportFormat};
use mmsbm::io::snapshot::{read_snapshot, write_snapshot, ModelSnapshot, Provenance, SnapshotRun};
use mmsbm::io::synthetic::{generate_synthetic, BlockSpec, MembershipSpec, SyntheticSpec};
use mmsbm::{ensemble_fit, estimate, log_likelihood, Dataset, Ensemble, Estimator, FitConfig};

use crate::config::{require_file, Settings};

fn load_dataset(settings: &Settings) -> Result<Dataset> {
    let path = settings.require_dataset()?;
    eprintln!("reading {}", path.display());
    let triples = parse_ratings(path, &settings.format, &settings.scale).context("data-io")?;
    let data = Dataset::from_triples(&triples, settings.scale.clone()).context("data-io")?;
    eprintln!(
        "{} users, {} items, {} ratings",
        data.n_users(),
        data.n_items(),
        data.n_ratings()
    );
    Ok(data)
}

fn out_dir(settings: &Settings) -> Result<&Path> {
    fs::create_dir_all(&settings.out).with_context(|| format!("creating {}", settings.out.display()))?;
    Ok(&settings.out)
}

fn write(path: PathBuf, contents: &str) -> Result<()> {
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn fit_ensemble(settings: &Settings, data: &Dataset) -> Result<Ensemble> {
    eprintln!(
        "fitting {} runs with K={} L={}",
        settings.runs, settings.fit.user_groups, settings.fit.item_groups
    );
    ensemble_fit(data, &settings.fit, settings.runs, settings.fit.seed).context("em-engine")
}

pub fn fit(settings: &Settings) -> Result<()> {
    let data = load_dataset(settings)?;
    let ensemble = fit_ensemble(settings, &data)?;
    let out = out_dir(settings)?;

    let path = out.join("model.snap");
    write_snapshot(&ModelSnapshot::from_ensemble(&ensemble, &data), &path).context("data-io: snapshot")?;
    eprintln!("wrote {}", path.display());

    let mut trace = String::from("run\tseed\titeration\tlog_likelihood\n");
    let mut summary = settings.header();
    summary.push('\n');
    for (idx, run) in ensemble.runs().enumerate() {
        for (t, ll) in run.log_likelihood_trace.iter().enumerate() {
            let _ = writeln!(trace, "{idx}\t{}\t{t}\t{ll}", ensemble.seed(idx));
        }
        let _ = writeln!(
            summary,
            "run {idx} seed {} iterations {} converged {} log_likelihood {}",
            ensemble.seed(idx),
            run.iterations_run,
            run.converged,
            run.log_likelihood()
        );
    }
    write(out.join("trace.tsv"), &trace)?;
    write(out.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn read_queries(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut queries = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split(|c: char| c == ',' || c == '\t' || c == ' ').filter(|f| !f.is_empty());
        match (fields.next(), fields.next()) {
            (Some(u), Some(i)) => queries.push((u.to_string(), i.to_string())),
            _ => bail!("{}:{}: expected `user item`", path.display(), n + 1),
        }
    }
    Ok(queries)
}

pub fn predict(settings: &Settings) -> Result<()> {
    let model = settings
        .predict_model
        .clone()
        .unwrap_or_else(|| settings.out.join("model.snap"));
    let queries_path = settings.queries.as_deref().context("no query file given (use --queries)")?;
    require_file(&model)?;
    require_file(queries_path)?;

    let snapshot = read_snapshot(&model).context("data-io: snapshot")?;
    let ensemble = snapshot.to_ensemble().context("ensemble")?;
    let queries = read_queries(queries_path)?;
    let users: HashMap<&str, usize> = snapshot.user_ids.iter().enumerate().map(|(n, id)| (id.as_str(), n)).collect();
    let items: HashMap<&str, usize> = snapshot.item_ids.iter().enumerate().map(|(n, id)| (id.as_str(), n)).collect();
    let scale = ensemble.scale();

    let mut out_text = String::from("user\titem\tcold");
    for label in scale.labels() {
        let _ = write!(out_text, "\tp_{label}");
    }
    out_text.push_str("\tmode\tmedian\tmean\n");
    let mut cold = 0;
    for (u_id, i_id) in &queries {
        let (u, i) = (users.get(u_id.as_str()).copied(), items.get(i_id.as_str()).copied());
        let flag = match (u, i) {
            (Some(_), Some(_)) => "no",
            (None, Some(_)) => "user",
            (Some(_), None) => "item",
            (None, None) => "both",
        };
        if flag != "no" {
            cold += 1;
        }
        let dist = ensemble.predict(u, i);
        let _ = write!(out_text, "{u_id}\t{i_id}\t{flag}");
        for p in dist.probs() {
            let _ = write!(out_text, "\t{p}");
        }
        let mode = estimate(&dist, Estimator::Mode, scale).label(scale);
        let median = estimate(&dist, Estimator::Median, scale).label(scale);
        let mean = estimate(&dist, Estimator::Mean, scale).value(scale);
        let _ = writeln!(out_text, "\t{}\t{}\t{mean}", scale.label(mode), scale.label(median));
    }
    let out = out_dir(settings)?;
    write(out.join("predictions.tsv"), &out_text)?;
    println!("{} predictions, {cold} cold-start", queries.len());
    Ok(())
}

fn method_specs(settings: &Settings) -> Vec<MethodSpec> {
    settings
        .methods
        .iter()
        .map(|name| match name.as_str() {
            "mmsbm" => MethodSpec::mmsbm(settings.fit.clone(), settings.runs, settings.fit.seed),
            "naive" => MethodSpec::Naive,
            "item-item" => MethodSpec::ItemItem {
                k_neighbors: settings.neighbors,
            },
            "mf" => MethodSpec::MatrixFactorization(settings.mf.clone()),
            other => unreachable!("method {other} passed validation"),
        })
        .collect()
}

pub fn evaluate(settings: &Settings) -> Result<()> {
    let data = load_dataset(settings)?;
    let specs = method_specs(settings);
    let methods: Vec<&dyn Method> = specs.iter().map(|m| m as &dyn Method).collect();
    eprintln!("{}-fold cross-validation of {}", settings.folds, settings.methods.join(", "));
    let report = compare(&methods, &data, settings.folds, settings.fit.seed).context("eval-harness")?;
    let out = out_dir(settings)?;
    write(out.join("report.csv"), &render_report(&report, &ReportFormat::default()))?;
    let summary = format!("{}\n{}", settings.header(), summary_text(&report));
    write(out.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

fn synthetic_spec(settings: &Settings) -> SyntheticSpec {
    SyntheticSpec {
        n_users: settings.synth_users,
        n_items: settings.synth_items,
        user_groups: settings.fit.user_groups,
        item_groups: settings.fit.item_groups,
        scale: settings.scale.clone(),
        theta: MembershipSpec::Pure,
        eta: MembershipSpec::Pure,
        p: BlockSpec::NearDeterministic {
            peak: settings.synth_peak,
        },
        ratings_per_user: settings.synth_ratings_per_user,
        seed: settings.fit.seed,
    }
}

pub fn benchmark(settings: &Settings) -> Result<()> {
    let data = if settings.dataset.is_some() {
        load_dataset(settings)?
    } else {
        let spec = synthetic_spec(settings);
        eprintln!(
            "no dataset given; generating {} x {} planted ratings",
            spec.n_users, spec.ratings_per_user
        );
        generate_synthetic(&spec).context("data-io: synthetic")?.0
    };
    let rows = scaling_benchmark(&data, &settings.fractions, &settings.fit, settings.bench_iterations)
        .context("eval-harness: benchmark")?;
    let mut text = String::from("fraction,n_ratings,seconds_per_iteration\n");
    for r in &rows {
        let _ = writeln!(text, "{},{},{}", r.fraction, r.n_ratings, r.seconds_per_iteration);
    }
    let out = out_dir(settings)?;
    write(out.join("scaling.csv"), &text)?;
    for pair in rows.windows(2) {
        println!(
            "{} -> {} ratings: time ratio {:.2}",
            pair[0].n_ratings,
            pair[1].n_ratings,
            pair[1].seconds_per_iteration / pair[0].seconds_per_iteration
        );
    }
    print!("{text}");
    Ok(())
}

pub fn synthesize(settings: &Settings) -> Result<()> {
    let spec = synthetic_spec(settings);
    let (data, planted) = generate_synthetic(&spec).context("data-io: synthetic")?;
    let ll = log_likelihood(&planted, &data).context("em-engine")?;
    let out = out_dir(settings)?;

    let ratings = out.join("ratings.txt");
    write_ratings(&ratings, &data.to_triples(), &settings.format).context("data-io")?;
    eprintln!("wrote {}", ratings.display());
    let snapshot = ModelSnapshot {
        scale: data.scale().clone(),
        user_ids: data.user_ids().to_vec(),
        item_ids: data.item_ids().to_vec(),
        runs: vec![SnapshotRun {
            params: planted,
            provenance: Provenance {
                seed: spec.seed,
                config: FitConfig {
                    seed: spec.seed,
                    ..settings.fit.clone()
                },
                iterations: 0,
                converged: true,
                log_likelihood: ll,
            },
        }],
    };
    let path = out.join("planted.snap");
    write_snapshot(&snapshot, &path).context("data-io: snapshot")?;
    eprintln!("wrote {}", path.display());
    println!(
        "{} users, {} items, {} ratings; planted log-likelihood {ll}",
        data.n_users(),
        data.n_items(),
        data.n_ratings()
    );
    Ok(())
}

pub fn analyze(settings: &Settings) -> Result<()> {
    let metadata_path = settings.metadata.as_deref().context("no metadata file given (use --metadata)")?;
    require_file(metadata_path)?;
    match &settings.analyze_model {
        Some(model) => require_file(model)?,
        None => {
            settings.require_dataset()?;
        }
    }

    let metadata = parse_metadata(metadata_path, &MetadataFormat::default()).context("data-io: metadata")?;
    let (params, user_ids) = match &settings.analyze_model {
        Some(model) => {
            let snap = read_snapshot(model).context("data-io: snapshot")?;
            let params: Vec<_> = snap.runs.into_iter().map(|r| r.params).collect();
            (params, snap.user_ids)
        }
        None => {
            let data = load_dataset(settings)?;
            let ensemble = fit_ensemble(settings, &data)?;
            let params = ensemble.runs().map(|r| r.params.clone()).collect();
            (params, data.user_ids().to_vec())
        }
    };
    let refs: Vec<_> = params.iter().collect();
    let binning = AgeBinning {
        start: settings.age_bin_start,
        width: settings.age_bin_width,
    };
    let report = group_similarity(&refs, &user_ids, &metadata, binning).context("analysis")?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let out = out_dir(settings)?;
    write(
        out.join("similarity.csv"),
        &render_similarity_report(&report, &ReportFormat::default()),
    )?;
    for g in &report.gender_pairs {
        println!("{:<5} mean similarity {:.4} ± {:.4} over {} pairs", g.pairing, g.mean, g.sem, g.count);
    }
    for c in &report.correlations {
        println!(
            "{:<5} similarity vs age: Spearman rho {:.4}, p {:.3e}, n {}",
            c.pairing, c.rho, c.p_value, c.n
        );
    }
    Ok(())
}
