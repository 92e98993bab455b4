use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;
use std::thread;

use log::{info, warn};
use sharepref::classifier::{
    ablation, cross_validate_jobs, train_tree, write_report_csv, EvalReport, FeatureGroup, TreeParams,
};
use sharepref::diffusion::{self, CascadeConfig, CascadeResult, PreferenceTable};
use sharepref::features::{apply_promiscuity, build_balanced_datasets, Feature, Featurizer, TrainingInstance};
use sharepref::io::{self, write_atomic, write_csv_atomic};
use sharepref::model::{assign_group, merge_likes, to_unary, ItemId, LikesMatrix, Rating, UserId};
use sharepref::recommender::{recommend, RecommendationList};
use sharepref::rng::derive_seed;
use sharepref::similarity::PreferenceOptions;
use sharepref::stats::{
    cohens_d, fit_lmm_with, likelihood_ratio_test, pooled_t_from_summary, welch_t_from_summary, LmmFit,
    LmmOptions, LmmRow, SampleSummary, TTestResult,
};
use sharepref::synthgen::{generate_study, planted_effect_ratings, StudyProfile};
use sharepref::{Error, Result};

use crate::config::RunConfig;

pub fn dispatch(cfg: &RunConfig) -> Result<()> {
    match cfg.command.as_str() {
        "ingest" => ingest(cfg),
        "recommend" => recommend_cmd(cfg),
        "featurize" => featurize(cfg),
        "train" => train(cfg),
        "evaluate" => evaluate(cfg),
        "ablate" => ablate(cfg),
        "simulate" => simulate(cfg),
        "stats ttest" => ttest(cfg),
        "stats lmm" => lmm(cfg),
        "stats plant" => plant(cfg),
        "stats power" => power(cfg),
        "synth" => synth(cfg),
        other => unreachable!("no handler for {other}"),
    }
}

fn out_dir(cfg: &RunConfig) -> Option<&Path> {
    cfg.out.as_deref()
}

/// Order-preserving map over `0..n` on up to `jobs` threads.
fn par_map<T: Send>(n: usize, jobs: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    if jobs <= 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    let chunk = n.div_ceil(jobs);
    let f = &f;
    thread::scope(|s| {
        let handles: Vec<_> = (0..n)
            .step_by(chunk)
            .map(|lo| s.spawn(move || (lo..(lo + chunk).min(n)).map(f).collect::<Vec<T>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    write_atomic(&dir.join(name), |w| {
        w.write_all(text.as_bytes())
            .map_err(|e| Error::Io { path: dir.join(name), source: e })
    })
}

/// Prints key=value lines and, with `--out`, also stores them.
fn emit_kv(cfg: &RunConfig, name: &str, text: &str) -> Result<()> {
    print!("{text}");
    match out_dir(cfg) {
        Some(dir) => write_text(dir, name, text),
        None => Ok(()),
    }
}

fn ingest(cfg: &RunConfig) -> Result<()> {
    let data = cfg.input("data");
    let files = io::read_study_dir(data)?;
    let out = out_dir(cfg).expect("required");
    let mut groups = BTreeMap::new();
    for s in &files.sessions {
        for p in [s.user_a(), s.user_b()] {
            if groups.insert(p.clone(), assign_group(p, s)?).is_some() {
                return Err(Error::validation(format!("participant {p} appears in two sessions")));
            }
        }
    }
    let missing = files.shares.iter().filter(|r| !files.items.contains_key(&r.item)).count();
    if missing > 0 {
        warn!("{missing} share records name items without metadata");
    }
    io::write_csv_atomic(&out.join(io::LIKES_FILE), |w| io::write_likes(&files.likes, w))?;
    io::write_csv_atomic(&out.join(io::RATINGS_FILE), |w| io::write_ratings(&files.ratings, w))?;
    io::write_csv_atomic(&out.join(io::SHARES_FILE), |w| io::write_shares(&files.shares, w))?;
    io::write_csv_atomic(&out.join(io::ITEMS_FILE), |w| io::write_items(files.items.values(), w))?;
    io::write_csv_atomic(&out.join(io::SESSIONS_FILE), |w| io::write_sessions(&files.sessions, w))?;
    let graph_path = data.join(io::GRAPH_FILE);
    if graph_path.exists() {
        let graph = io::read_graph(&graph_path)?;
        io::write_csv_atomic(&out.join(io::GRAPH_FILE), |w| io::write_graph(&graph, w))?;
    }
    write_csv_atomic(&out.join("groups.csv"), |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["participant_id", "group"])?;
        for (p, g) in &groups {
            c.write_record([p.as_str(), g.name()])?;
        }
        c.flush()?;
        Ok(())
    })?;

    let mut ratings_of: BTreeMap<&UserId, Vec<f64>> = BTreeMap::new();
    for (u, _, r) in files.ratings.iter() {
        ratings_of.entry(u).or_default().push(r.value());
    }
    let mut sent: BTreeMap<&UserId, usize> = BTreeMap::new();
    for r in files.shares.iter().filter(|r| r.shared) {
        *sent.entry(&r.sender).or_default() += 1;
    }
    let summarize = |members: Vec<&UserId>| {
        let n = members.len();
        let ratings: Vec<f64> = members
            .iter()
            .flat_map(|p| ratings_of.get(p).into_iter().flatten().copied())
            .collect();
        let shares: usize = members.iter().map(|p| sent.get(p).copied().unwrap_or(0)).sum();
        let per = |x: usize| if n == 0 { 0.0 } else { x as f64 / n as f64 };
        let mean = if ratings.is_empty() { 0.0 } else { ratings.iter().sum::<f64>() / ratings.len() as f64 };
        [n.to_string(), format!("{:.4}", per(ratings.len())), format!("{mean:.4}"), format!("{:.4}", per(shares))]
    };
    write_csv_atomic(&out.join("summary.csv"), |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["group", "participants", "ratings_per_person", "mean_rating", "shares_per_person"])?;
        let mut names: Vec<_> = groups.values().copied().collect::<BTreeSet<_>>().into_iter().collect();
        names.sort();
        for g in names {
            let members = groups.iter().filter(|(_, x)| **x == g).map(|(p, _)| p).collect();
            let row = summarize(members);
            c.write_record(std::iter::once(g.name()).chain(row.iter().map(String::as_str)))?;
        }
        let row = summarize(groups.keys().collect());
        c.write_record(std::iter::once("all").chain(row.iter().map(String::as_str)))?;
        c.flush()?;
        Ok(())
    })?;
    info!("ingested {} participants, {} share records", groups.len(), files.shares.len());
    Ok(())
}

fn recommend_cmd(cfg: &RunConfig) -> Result<()> {
    let likes = io::read_likes(cfg.input("likes"))?;
    let graph = io::read_graph(cfg.input("graph"))?;
    let friends = io::graph_to_friends(&graph);
    let (k, n): (usize, usize) = (cfg.parse("k")?, cfg.parse("n")?);
    let user = cfg.param("user");
    let single = user != "all";
    let users: Vec<UserId> = if single {
        let u = UserId::new(user)?;
        if !graph.contains(&u) {
            return Err(Error::validation(format!("user {u} is not in the graph")));
        }
        vec![u]
    } else {
        graph.nodes().cloned().collect()
    };
    let none = BTreeSet::new();
    let lists: Vec<Result<RecommendationList>> = par_map(users.len(), cfg.jobs, |i| {
        recommend(&users[i], friends.get(&users[i]).unwrap_or(&none), &likes, k, n)
    });
    let lists = lists.into_iter().collect::<Result<Vec<_>>>()?;
    let out = out_dir(cfg).expect("required");
    write_csv_atomic(&out.join("recommendations.csv"), |w| {
        let mut c = csv::Writer::from_writer(w);
        if single {
            c.write_record(["item_id", "score"])?;
        } else {
            c.write_record(["user_id", "item_id", "score"])?;
        }
        for list in &lists {
            for (item, score) in &list.entries {
                if single {
                    c.write_record([item.to_string(), score.to_string()])?;
                } else {
                    c.write_record([list.user.to_string(), item.to_string(), score.to_string()])?;
                }
            }
        }
        c.flush()?;
        Ok(())
    })
}

fn pipeline_likes(data: &Path, like_threshold: &str) -> Result<LikesMatrix> {
    let likes = io::read_likes(&data.join(io::LIKES_FILE))?;
    if like_threshold == "none" {
        return Ok(likes);
    }
    let t: f64 = like_threshold
        .parse()
        .map_err(|_| Error::validation(format!("bad value {like_threshold:?} for like_threshold")))?;
    let ratings = io::read_ratings(&data.join(io::RATINGS_FILE))?;
    Ok(merge_likes(&likes, &to_unary(&ratings, Rating::from_f64(t)?)))
}

fn featurize(cfg: &RunConfig) -> Result<()> {
    let data = cfg.input("data");
    let likes = pipeline_likes(data, cfg.param("like_threshold"))?;
    let shares = io::read_shares(&data.join(io::SHARES_FILE))?;
    let items = io::read_items(&data.join(io::ITEMS_FILE))?;
    let f = Featurizer { likes: &likes, sims: &likes, meta: &items, options: PreferenceOptions::default() };
    let pool = f.featurize_all(&shares, &shares);
    let out = out_dir(cfg).expect("required");
    write_csv_atomic(&out.join("features.csv"), |w| io::write_features(&pool, w))
}

fn tree_params(cfg: &RunConfig, with_features: bool) -> Result<TreeParams> {
    let mut p = TreeParams { max_depth: cfg.parse("max_depth")?, min_leaf: cfg.parse("min_leaf")?, ..Default::default() };
    if with_features && cfg.param("columns") != "all" {
        p.features = cfg
            .param("columns")
            .split(',')
            .map(|s| s.trim().parse::<Feature>())
            .collect::<Result<Vec<_>>>()?;
    }
    p.validate()?;
    Ok(p)
}

fn read_pool(cfg: &RunConfig) -> Result<Vec<TrainingInstance>> {
    let pool = io::read_features(cfg.input("features"))?;
    if pool.is_empty() {
        return Err(Error::validation(format!("{}: no feature rows", cfg.input("features").display())));
    }
    Ok(pool)
}

fn train(cfg: &RunConfig) -> Result<()> {
    let params = tree_params(cfg, true)?;
    let pool = read_pool(cfg)?;
    let mut data = build_balanced_datasets(&pool, 1, cfg.seed)?.remove(0);
    let all = data.instances.clone();
    apply_promiscuity(&mut data.instances, &all.iter().collect::<Vec<_>>());
    let tree = train_tree(&data, &params)?;
    let out = out_dir(cfg).expect("required");
    write_text(out, "tree.txt", &tree.to_text())
}

fn write_eval(out: &Path, report: &EvalReport) -> Result<()> {
    write_csv_atomic(&out.join("evaluation.csv"), |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["dataset", "fold", "precision", "recall", "accuracy", "tp", "fp", "tn", "fn"])?;
        for (d, folds) in report.folds.iter().enumerate() {
            for (k, e) in folds.iter().enumerate() {
                let m = e.confusion;
                c.write_record([
                    d.to_string(),
                    k.to_string(),
                    format!("{:.6}", e.precision),
                    format!("{:.6}", e.recall),
                    format!("{:.6}", e.accuracy),
                    m.tp.to_string(),
                    m.fp.to_string(),
                    m.tn.to_string(),
                    m.fn_.to_string(),
                ])?;
            }
        }
        c.flush()?;
        Ok(())
    })?;
    write_csv_atomic(&out.join("summary.csv"), |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["dataset", "precision", "recall", "accuracy"])?;
        let rows = report.dataset_means.iter().enumerate().map(|(d, m)| (d.to_string(), m));
        for (name, m) in rows.chain(std::iter::once(("mean".to_string(), &report.grand_mean))) {
            c.write_record([
                name,
                format!("{:.6}", m.precision),
                format!("{:.6}", m.recall),
                format!("{:.6}", m.accuracy),
            ])?;
        }
        c.flush()?;
        Ok(())
    })
}

fn evaluate(cfg: &RunConfig) -> Result<()> {
    let params = tree_params(cfg, true)?;
    let pool = read_pool(cfg)?;
    let datasets = build_balanced_datasets(&pool, cfg.parse("datasets")?, cfg.seed)?;
    let report = cross_validate_jobs(&datasets, &params, cfg.parse("folds")?, cfg.seed, cfg.jobs)?;
    let m = report.grand_mean;
    info!("precision {:.3} recall {:.3} accuracy {:.3}", m.precision, m.recall, m.accuracy);
    write_eval(out_dir(cfg).expect("required"), &report)
}

fn ablate(cfg: &RunConfig) -> Result<()> {
    let params = tree_params(cfg, false)?;
    let groups = match cfg.param("groups") {
        "headline" => FeatureGroup::headline(),
        "detailed" => FeatureGroup::detailed(),
        other => return Err(Error::validation(format!("unknown groups {other:?}; use headline or detailed"))),
    };
    let pool = read_pool(cfg)?;
    let datasets = build_balanced_datasets(&pool, cfg.parse("datasets")?, cfg.seed)?;
    let rows = ablation(&groups, &datasets, &params, cfg.parse("folds")?, cfg.seed, cfg.jobs)?;
    let out = out_dir(cfg).expect("required");
    write_csv_atomic(&out.join("ablation.csv"), |w| write_report_csv(&rows, w))
}

fn simulate(cfg: &RunConfig) -> Result<()> {
    let graph = io::read_graph(cfg.input("graph"))?;
    let seeds = io::read_seeds(cfg.input("seeds"))?;
    let likes = io::read_likes(cfg.input("likes"))?;
    let mut cascade = CascadeConfig::default();
    let own = ["model", "runs", "ic_p"];
    for (k, v) in cfg.params.iter().filter(|(k, _)| !own.contains(&k.as_str())).chain(&cfg.extra) {
        cascade.set(k, v)?;
    }
    cascade.validate()?;
    let runs: usize = cfg.parse("runs")?;
    if runs == 0 {
        return Err(Error::validation("runs must be at least 1"));
    }
    let ic_p: f64 = cfg.parse("ic_p")?;
    let model = cfg.param("model").to_string();
    if model != "cascade" && model != "ic" {
        return Err(Error::validation(format!("unknown model {model:?}; use cascade or ic")));
    }
    let items: BTreeSet<ItemId> = seeds.values().flatten().cloned().collect();
    let prefs = if model == "cascade" {
        PreferenceTable::from_likes(&likes, graph.nodes(), &items)
    } else {
        PreferenceTable::new()
    };
    let results: Vec<Result<CascadeResult>> = par_map(runs, cfg.jobs, |r| {
        let s = derive_seed(cfg.seed, "simulate", &[r as u64]);
        if model == "cascade" {
            diffusion::run(&graph, &seeds, &prefs, &cascade, s)
        } else {
            diffusion::baseline_ic(&graph, &seeds, ic_p, cascade.max_steps, s)
        }
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    let out = out_dir(cfg).expect("required");
    write_csv_atomic(&out.join("timeseries.csv"), |w| results[0].write_timeseries_csv(w))?;
    write_csv_atomic(&out.join("summary.csv"), |w| results[0].write_summary_csv(w))?;
    write_csv_atomic(&out.join("runs.csv"), |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["run", "item_id", "final_adopters", "shares_attempted", "shares_accepted", "steps"])?;
        for (r, res) in results.iter().enumerate() {
            for (item, set) in &res.final_adopters {
                let get = |m: &BTreeMap<ItemId, u64>| m.get(item).copied().unwrap_or(0).to_string();
                c.write_record([
                    r.to_string(),
                    item.to_string(),
                    set.len().to_string(),
                    get(&res.shares_attempted),
                    get(&res.shares_accepted),
                    res.steps.to_string(),
                ])?;
            }
        }
        c.flush()?;
        Ok(())
    })
}

fn summary_triple(key: &str, v: &str) -> Result<SampleSummary> {
    let bad = || Error::validation(format!("{key} must be n,mean,sd; got {v:?}"));
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    let [n, mean, sd] = parts.as_slice() else { return Err(bad()) };
    SampleSummary::new(
        n.parse().map_err(|_| bad())?,
        mean.parse().map_err(|_| bad())?,
        sd.parse().map_err(|_| bad())?,
    )
}

fn ttest(cfg: &RunConfig) -> Result<()> {
    let a = summary_triple("a", cfg.param("a"))?;
    let b = summary_triple("b", cfg.param("b"))?;
    let tests: [(&str, TTestResult); 2] =
        [("welch", welch_t_from_summary(&a, &b)?), ("pooled", pooled_t_from_summary(&a, &b)?)];
    let mut text = String::new();
    for (name, t) in &tests {
        let _ = writeln!(text, "{name}_t={}", t.t);
        let _ = writeln!(text, "{name}_df={}", t.df);
        let _ = writeln!(text, "{name}_p={}", t.p);
        let _ = writeln!(text, "{name}_p_upper={}", t.p_upper);
        let _ = writeln!(text, "{name}_p_lower={}", t.p_lower);
    }
    let _ = writeln!(text, "cohens_d={}", cohens_d(&a, &b)?);
    emit_kv(cfg, "ttest.txt", &text)?;
    if let Some(dir) = out_dir(cfg) {
        write_csv_atomic(&dir.join("ttest.csv"), |w| {
            let mut c = csv::Writer::from_writer(w);
            c.write_record(["test", "t", "df", "p", "p_upper", "p_lower"])?;
            for (name, t) in &tests {
                c.write_record([
                    name.to_string(),
                    t.t.to_string(),
                    t.df.to_string(),
                    t.p.to_string(),
                    t.p_upper.to_string(),
                    t.p_lower.to_string(),
                ])?;
            }
            c.flush()?;
            Ok(())
        })?;
    }
    Ok(())
}

fn fit_lines(text: &mut String, prefix: &str, fit: &LmmFit) {
    let _ = writeln!(text, "{prefix}_intercept={}", fit.intercept());
    if let Some(c) = fit.condition_effect() {
        let _ = writeln!(text, "{prefix}_condition={c}");
    }
    let _ = writeln!(text, "{prefix}_var_participant={}", fit.var_participant);
    let _ = writeln!(text, "{prefix}_var_item={}", fit.var_item);
    let _ = writeln!(text, "{prefix}_var_residual={}", fit.var_residual);
    let _ = writeln!(text, "{prefix}_loglik={}", fit.log_likelihood);
}

fn lmm_test(rows: &[LmmRow], opts: LmmOptions) -> Result<(LmmFit, LmmFit, sharepref::stats::LrtResult)> {
    let full = fit_lmm_with(rows, true, opts)?;
    let null = fit_lmm_with(rows, false, opts)?;
    let lrt = likelihood_ratio_test(&full, &null)?;
    Ok((full, null, lrt))
}

fn lmm(cfg: &RunConfig) -> Result<()> {
    let rows = io::read_lmm_rows(cfg.input("ratings"))?;
    let opts = LmmOptions { tolerance: cfg.parse("tolerance")?, max_iterations: cfg.parse("max_iterations")? };
    let (full, null, lrt) = lmm_test(&rows, opts)?;
    let mut text = String::new();
    let _ = writeln!(text, "n_obs={}", full.n_obs);
    fit_lines(&mut text, "full", &full);
    fit_lines(&mut text, "null", &null);
    let _ = writeln!(text, "chi_square={}", lrt.chi_square);
    let _ = writeln!(text, "df={}", lrt.df);
    let _ = writeln!(text, "p={}", lrt.p);
    emit_kv(cfg, "lmm.txt", &text)
}

fn planted(cfg: &RunConfig, seed: u64) -> Result<Vec<LmmRow>> {
    planted_effect_ratings(
        cfg.parse("participants")?,
        cfg.parse("items")?,
        cfg.parse("beta")?,
        cfg.parse("sd_participant")?,
        cfg.parse("sd_item")?,
        cfg.parse("sd_residual")?,
        seed,
    )
}

fn plant(cfg: &RunConfig) -> Result<()> {
    let rows = planted(cfg, cfg.seed)?;
    let out = out_dir(cfg).expect("required");
    write_csv_atomic(&out.join("ratings_long.csv"), |w| io::write_lmm_rows(&rows, w))
}

fn power(cfg: &RunConfig) -> Result<()> {
    let runs: usize = cfg.parse("runs")?;
    let alpha: f64 = cfg.parse("alpha")?;
    if runs == 0 || !(0.0..1.0).contains(&alpha) {
        return Err(Error::validation("need runs >= 1 and alpha in [0, 1)"));
    }
    planted(cfg, 0)?;
    let results: Vec<Result<(f64, f64, f64)>> = par_map(runs, cfg.jobs, |r| {
        let rows = planted(cfg, derive_seed(cfg.seed, "power", &[r as u64]))?;
        let (full, _, lrt) = lmm_test(&rows, LmmOptions::default())?;
        Ok((full.condition_effect().unwrap_or(0.0), lrt.chi_square, lrt.p))
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    let rejected = results.iter().filter(|r| r.2 < alpha).count();
    let mean_beta = results.iter().map(|r| r.0).sum::<f64>() / runs as f64;
    let mut text = String::new();
    let _ = writeln!(text, "runs={runs}");
    let _ = writeln!(text, "rejections={rejected}");
    let _ = writeln!(text, "rejection_rate={}", rejected as f64 / runs as f64);
    let _ = writeln!(text, "mean_beta_hat={mean_beta}");
    emit_kv(cfg, "power.txt", &text)?;
    if let Some(dir) = out_dir(cfg) {
        write_csv_atomic(&dir.join("power.csv"), |w| {
            let mut c = csv::Writer::from_writer(w);
            c.write_record(["run", "beta_hat", "chi_square", "p", "rejected"])?;
            for (r, (b, chi, p)) in results.iter().enumerate() {
                c.write_record([
                    r.to_string(),
                    b.to_string(),
                    chi.to_string(),
                    p.to_string(),
                    u8::from(*p < alpha).to_string(),
                ])?;
            }
            c.flush()?;
            Ok(())
        })?;
    }
    Ok(())
}

fn synth(cfg: &RunConfig) -> Result<()> {
    let mut profile = StudyProfile::default();
    for (k, v) in &cfg.params {
        profile.set(k, v)?;
    }
    profile.validate()?;
    let study = generate_study(&profile, cfg.seed)?;
    info!(
        "{} participants, {} ratings, {} shares sent",
        study.participants().count(),
        study.ratings.len(),
        study.shares_sent()
    );
    io::write_study_dir(&study, out_dir(cfg).expect("required"))
}
