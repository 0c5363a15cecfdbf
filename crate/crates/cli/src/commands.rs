use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use log::{info, warn};
use nalgebra::{Unit, UnitQuaternion, Vector3};
use serde::Deserialize;
use serde_json::json;

use featlift::bench::{self, BenchConfig};
use featlift::edit::{insert, select_gaussians, InsertOptions, Selection, Transform};
use featlift::io;
use featlift::oracle::{approximation_gap, closed_form, collect_dense_weights, exact_ml_solve, GapReport, Support};
use featlift::query::{localize, protocol_registry, relevancy_map, select_level, QuerySpec, ThresholdOutcome};
use featlift::raster::{render_color, render_features, RasterConfig};
use featlift::synth::{generate_feature_maps, generate_scene, ground_truth_features, SynthSpec};
use featlift::uplift::{method_registry, Level, UpliftConfig};
use featlift::{CameraView, FeatureMap, GaussianScene};

use crate::{
    BenchArgs, EditArgs, EvalArgs, LevelArg, OracleArgs, QueryArgs, RenderArgs, RenderMode, SynthArgs, UpliftArgs,
};

/// Inputs that are individually valid but do not match each other.
#[derive(Debug)]
pub struct ConsistencyError(pub String);

impl fmt::Display for ConsistencyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConsistencyError {}

fn read_scene(path: &Path) -> Result<GaussianScene> {
    let report = io::read_ply_report(path)?;
    if report.rejected_rows > 0 {
        warn!(
            "{}: skipped {} rows with non-finite values",
            path.display(),
            report.rejected_rows
        );
    }
    Ok(report.scene)
}

fn find_view<'a>(views: &'a [CameraView], sel: Option<&str>) -> Result<&'a CameraView> {
    let Some(sel) = sel else {
        return views.first().ok_or_else(|| anyhow!("camera file has no views"));
    };
    if let Some(v) = views.iter().find(|v| v.id == sel) {
        return Ok(v);
    }
    match sel.parse::<usize>() {
        Ok(i) if i < views.len() => Ok(&views[i]),
        _ => bail!("no camera with id or index '{sel}'"),
    }
}

fn read_maps(views: &[CameraView], path_for: impl Fn(&str) -> PathBuf) -> Result<Vec<FeatureMap>> {
    views
        .iter()
        .map(|v| {
            let p = path_for(&v.id);
            if !p.exists() {
                return Err(anyhow!(ConsistencyError(format!(
                    "no feature map for view '{}' (expected {})",
                    v.id,
                    p.display()
                ))));
            }
            Ok(io::read_feature_map(&p)?)
        })
        .collect()
}

fn print_json(value: &serde_json::Value) {
    println!("{value}");
}

pub fn uplift(a: UpliftArgs) -> Result<()> {
    let mut scene = read_scene(&a.scene)?;
    if scene.has_features() {
        info!(
            "ignoring {}-dimensional features already present in the scene",
            scene.feature_dim()
        );
        scene.clear_features();
    }
    let views = io::read_cameras(&a.cameras)?;
    let method_spec = match (a.no_weighting, a.method.as_str()) {
        (true, "weighted" | "unweighted") => "unweighted",
        (true, other) => bail!("--no-weighting only applies to the weighted method, not '{other}'"),
        (false, m) => m,
    };
    let method = method_registry().create(method_spec)?;
    let cfg = UpliftConfig {
        occlusion_threshold: a.occlusion_threshold,
        weighted: !a.no_weighting,
        filter: !a.no_filter,
        deterministic: a.deterministic,
        raster: RasterConfig::default(),
    };
    cfg.validate()?;

    let jobs: Vec<(Option<Level>, PathBuf)> = match a.level {
        None => vec![(None, a.out.clone())],
        Some(LevelArg::All) => Level::ALL
            .iter()
            .map(|&l| (Some(l), io::level_scene_path(&a.out, l)))
            .collect(),
        Some(l) => {
            let level = match l {
                LevelArg::Whole => Level::Whole,
                LevelArg::Part => Level::Part,
                _ => Level::Subpart,
            };
            vec![(Some(level), a.out.clone())]
        }
    };
    // Resolve every map before any work so a missing file fails fast.
    let mut inputs = Vec::with_capacity(jobs.len());
    for (level, out) in jobs {
        let maps = match level {
            None => read_maps(&views, |id| io::map_path(&a.features, id))?,
            Some(l) => read_maps(&views, |id| io::level_map_path(&a.features, id, l))?,
        };
        inputs.push((level, out, maps));
    }

    for (level, out, maps) in inputs {
        let t0 = Instant::now();
        let outcome = method.uplift(&scene, &views, &maps, &cfg)?;
        let elapsed = t0.elapsed().as_secs_f64();
        io::write_ply(&outcome.scene, &out)?;
        print_json(&json!({
            "level": level.map(|l| l.name()),
            "method": method.name(),
            "n_views": outcome.stats.n_views,
            "N": outcome.stats.n_input,
            "M": outcome.stats.n_output,
            "elapsed_seconds": elapsed,
            "peak_feature_dim": outcome.scene.feature_dim(),
            "out": out,
        }));
    }
    Ok(())
}

pub fn render(a: RenderArgs) -> Result<()> {
    let scene = read_scene(&a.scene)?;
    let views = io::read_cameras(&a.cameras)?;
    let cam = find_view(&views, a.view.as_deref())?;
    let cfg = RasterConfig::default();
    let is_fmap = a.out.extension().is_some_and(|e| e == "fmap");
    match a.mode {
        RenderMode::Color => {
            if is_fmap {
                bail!("color renders are written as PNG");
            }
            io::write_rgb_png(&render_color(&scene, cam, &cfg)?, &a.out)?;
        }
        RenderMode::Features => {
            let map = render_features(&scene, cam, &cfg)?;
            if is_fmap {
                io::write_feature_map(&map, &a.out)?;
            } else {
                io::write_rgb_png(&io::feature_preview(&map), &a.out)?;
            }
        }
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum EmbeddingFile {
    One(Vec<f32>),
    Many(Vec<Vec<f32>>),
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_embeddings(path: &Path) -> Result<Vec<Vec<f32>>> {
    Ok(match read_json::<EmbeddingFile>(path)? {
        EmbeddingFile::One(v) => vec![v],
        EmbeddingFile::Many(v) => v,
    })
}

pub fn query(a: QueryArgs) -> Result<()> {
    let maps: Vec<FeatureMap> = if !a.feature_maps.is_empty() {
        if !a.scenes.is_empty() {
            bail!("give either --feature-map or --scene, not both");
        }
        a.feature_maps
            .iter()
            .map(|p| Ok(io::read_feature_map(p)?))
            .collect::<Result<_>>()?
    } else if !a.scenes.is_empty() {
        let cams = a.cameras.as_ref().ok_or_else(|| anyhow!("--scene needs --cameras"))?;
        let views = io::read_cameras(cams)?;
        let cam = find_view(&views, a.view.as_deref())?;
        let cfg = RasterConfig::default();
        a.scenes
            .iter()
            .map(|p| {
                let scene = read_scene(p)?;
                Ok(render_features(&scene, cam, &cfg)?)
            })
            .collect::<Result<_>>()?
    } else {
        bail!("nothing to query: give --feature-map or --scene");
    };

    let embedding: Vec<f32> = read_json(&a.embedding)?;
    let mut canonicals = Vec::new();
    for p in &a.canonical {
        canonicals.extend(read_embeddings(p)?);
    }
    let spec = QuerySpec::new(embedding, canonicals)?;
    let protocol = protocol_registry().create(&a.protocol)?;

    let rels = maps
        .iter()
        .map(|m| relevancy_map(m, &spec))
        .collect::<featlift::Result<Vec<_>>>()?;
    let level = select_level(&rels)?;
    let rel = &rels[level];
    let outcome = protocol.apply(rel)?;
    let (x, y) = localize(rel)?;

    if let Some(p) = &a.out_relevancy {
        io::write_gray_png(&rel.values, rel.width, rel.height, p)?;
    }
    if let Some(p) = &a.out_mask {
        match outcome.mask() {
            Some(m) => io::write_mask_png(m, p)?,
            None => warn!("no stable region; mask not written"),
        }
    }
    let confidence = match &outcome {
        ThresholdOutcome::Stable { confidence, .. } => Some(*confidence),
        _ => None,
    };
    print_json(&json!({
        "protocol": protocol.name(),
        "level": level,
        "outcome": match outcome {
            ThresholdOutcome::Stable { .. } => "stable",
            ThresholdOutcome::Fixed { .. } => "fixed",
            ThresholdOutcome::NoStableRegion => "no-stable-region",
        },
        "threshold": outcome.threshold(),
        "confidence": confidence,
        "mask_area": outcome.mask().map(|m| m.area()),
        "location": [x, y],
        "max_relevancy": rel.max(),
    }));
    Ok(())
}

#[derive(Debug, Deserialize)]
struct PredictionRow {
    scene: String,
    query: String,
    level: String,
    threshold: Option<f64>,
    x: usize,
    y: usize,
}

#[derive(Debug, serde::Serialize)]
struct EvalRow {
    scene: String,
    query: String,
    level: String,
    threshold: Option<f64>,
    iou: f64,
    loc_hit: Option<u8>,
}

fn png_stems(dir: &Path) -> Result<Vec<String>> {
    let mut stems = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "png") {
            if let Some(s) = path.file_stem() {
                stems.push(s.to_string_lossy().into_owned());
            }
        }
    }
    stems.sort();
    Ok(stems)
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let queries = png_stems(&a.pred_masks)?;
    if queries.is_empty() {
        bail!("no predicted masks in {}", a.pred_masks.display());
    }
    let mut preds: HashMap<String, PredictionRow> = HashMap::new();
    if let Some(p) = &a.predictions {
        let mut rdr = csv::Reader::from_path(p).with_context(|| format!("reading {}", p.display()))?;
        for row in rdr.deserialize() {
            let row: PredictionRow = row.with_context(|| format!("parsing {}", p.display()))?;
            preds.insert(row.query.clone(), row);
        }
    }

    let mut rows = Vec::with_capacity(queries.len());
    for q in &queries {
        let gt_path = a.gt_masks.join(format!("{q}.png"));
        if !gt_path.exists() {
            return Err(anyhow!(ConsistencyError(format!(
                "no ground-truth mask for query '{q}' ({})",
                gt_path.display()
            ))));
        }
        let pred = io::read_mask_png(a.pred_masks.join(format!("{q}.png")))?;
        let gt = io::read_mask_png(&gt_path)?;
        let iou = featlift::query::compute_iou(&pred, &gt)
            .map_err(|e| anyhow!(ConsistencyError(format!("query '{q}': {e}"))))?;
        let p = preds.get(q);
        let loc_hit = p.map(|p| u8::from(p.x < gt.width && p.y < gt.height && gt.get(p.x, p.y)));
        rows.push(EvalRow {
            scene: p.map(|p| p.scene.clone()).unwrap_or_else(|| a.scene.clone()),
            query: q.clone(),
            level: p.map(|p| p.level.clone()).unwrap_or_default(),
            threshold: p.and_then(|p| p.threshold),
            iou: iou.value,
            loc_hit,
        });
    }

    let out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(out);
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;

    let miou = rows.iter().map(|r| r.iou).sum::<f64>() / rows.len() as f64;
    let hits: Vec<u8> = rows.iter().filter_map(|r| r.loc_hit).collect();
    let loc = (!hits.is_empty()).then(|| hits.iter().map(|&h| f64::from(h)).sum::<f64>() / hits.len() as f64);
    eprintln!(
        "{}",
        json!({ "queries": rows.len(), "miou": miou, "localization_accuracy": loc })
    );
    Ok(())
}

fn gap_json(r: &GapReport) -> serde_json::Value {
    json!({ "mean": r.mean, "max": r.max, "p95": r.p95 })
}

pub fn oracle_compare(a: OracleArgs) -> Result<()> {
    let spec: SynthSpec = read_json(&a.spec)?;
    let synth = generate_scene(&spec)?;
    let cfg = RasterConfig::default();
    let maps = generate_feature_maps(&synth.scene, &synth.views, a.noise, spec.seed, &cfg)?;
    let rec = collect_dense_weights(&synth.scene, &synth.views, &maps, &cfg)?;
    let exact = exact_ml_solve(&rec);
    let center = closed_form(&rec, Support::CenterPixels, a.min_weight);
    let all = closed_form(&rec, Support::AllPixels, a.min_weight);
    let truth: Vec<f64> = synth.scene.features().iter().map(|&v| f64::from(v)).collect();
    print_json(&json!({
        "n_gaussians": synth.scene.len(),
        "dim": rec.dim,
        "n_views": synth.views.len(),
        "observed_pixels": rec.pixels.len(),
        "noise": a.noise,
        "rank_deficient": exact.rank_deficient,
        "unidentifiable": exact.unidentifiable.len(),
        "center_vs_exact": gap_json(&approximation_gap(&exact.features, &center.features, rec.dim)?),
        "all_pixels_vs_exact": gap_json(&approximation_gap(&exact.features, &all.features, rec.dim)?),
        "exact_vs_truth": gap_json(&approximation_gap(&truth, &exact.features, rec.dim)?),
        "center_vs_truth": gap_json(&approximation_gap(&truth, &center.features, rec.dim)?),
    }));
    Ok(())
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let mut spec: SynthSpec = match &a.spec {
        Some(p) => read_json(p)?,
        None => SynthSpec::default(),
    };
    if let Some(l) = &a.layout {
        spec.layout = serde_json::from_value(json!(l))
            .map_err(|_| anyhow!("unknown layout '{l}' (grid, random, stacked-pairs, occluder)"))?;
    }
    macro_rules! set {
        ($($field:ident <- $flag:ident),*) => { $(if let Some(v) = a.$flag { spec.$field = v; })* };
    }
    set!(n_gaussians <- n_gaussians, dim <- dim, n_views <- views, seed <- seed, width <- width, height <- height, overlap <- overlap, hidden_fraction <- hidden_fraction);

    let synth = generate_scene(&spec)?;
    let cfg = RasterConfig::default();
    let features_dir = a.out.join("features");
    fs::create_dir_all(&features_dir).with_context(|| format!("creating {}", features_dir.display()))?;

    let mut geometry = synth.scene.clone();
    geometry.clear_features();
    io::write_ply(&geometry, a.out.join("scene.ply"))?;
    io::write_cameras(&synth.views, a.out.join("cameras.json"))?;

    let write_maps = |scene: &GaussianScene, path_for: &dyn Fn(&str) -> PathBuf| -> Result<()> {
        let maps = generate_feature_maps(scene, &synth.views, a.noise, spec.seed, &cfg)?;
        for (v, m) in synth.views.iter().zip(&maps) {
            io::write_feature_map(m, path_for(&v.id))?;
        }
        Ok(())
    };
    if a.levels {
        for (k, &level) in Level::ALL.iter().enumerate() {
            let mut truth = geometry.clone();
            truth.set_features(spec.dim, ground_truth_features(&spec, truth.len(), k as u64))?;
            io::write_ply(&truth, a.out.join(format!("scene_gt_{level}.ply")))?;
            write_maps(&truth, &|id| io::level_map_path(&features_dir, id, level))?;
        }
    } else {
        io::write_ply(&synth.scene, a.out.join("scene_gt.ply"))?;
        write_maps(&synth.scene, &|id| io::map_path(&features_dir, id))?;
    }
    let manifest = json!({
        "spec": spec,
        "noise": a.noise,
        "levels": a.levels,
        "n_gaussians": synth.scene.len(),
        "hidden": synth.hidden,
        "views": synth.views.iter().map(|v| v.id.clone()).collect::<Vec<_>>(),
    });
    fs::write(
        a.out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )
    .with_context(|| format!("writing manifest in {}", a.out.display()))?;
    print_json(
        &json!({ "out": a.out, "n_gaussians": synth.scene.len(), "n_views": synth.views.len(), "hidden": synth.hidden.len() }),
    );
    Ok(())
}

fn parse_floats<const N: usize>(s: &str, what: &str) -> Result<[f64; N]> {
    let vals: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| anyhow!("{what}: {e}"))?;
    vals.try_into()
        .map_err(|v: Vec<f64>| anyhow!("{what}: expected {N} comma-separated numbers, got {}", v.len()))
}

pub fn edit(a: EditArgs) -> Result<()> {
    let src = read_scene(&a.src)?;
    let dst = match &a.dst {
        Some(p) => read_scene(p)?,
        None => GaussianScene::new(Vec::new())?,
    };
    let selection = match (&a.select_aabb, &a.select_query) {
        (Some(_), Some(_)) => bail!("give at most one of --select-aabb and --select-query"),
        (Some(s), None) => {
            let [x0, y0, z0, x1, y1, z1] = parse_floats::<6>(s, "--select-aabb")?;
            Some(Selection::Aabb {
                min: Vector3::new(x0, y0, z0),
                max: Vector3::new(x1, y1, z1),
            })
        }
        (None, Some(p)) => Some(Selection::Relevancy {
            query: read_json(p)?,
            threshold: a.threshold,
        }),
        (None, None) => None,
    };
    let indices = match &selection {
        Some(s) => select_gaussians(&src, s)?,
        None => (0..src.len()).collect(),
    };
    let rotation = match &a.rotate {
        Some(s) => {
            let [ax, ay, az, deg] = parse_floats::<4>(s, "--rotate")?;
            let axis = Unit::try_new(Vector3::new(ax, ay, az), 1e-12).ok_or_else(|| anyhow!("--rotate: zero axis"))?;
            UnitQuaternion::from_axis_angle(&axis, deg.to_radians())
        }
        None => UnitQuaternion::identity(),
    };
    let translation = match &a.translate {
        Some(s) => Vector3::from(parse_floats::<3>(s, "--translate")?),
        None => Vector3::zeros(),
    };
    let transform = Transform {
        rotation,
        translation,
        scale: a.scale,
    };
    let out = insert(
        &src,
        &indices,
        &transform,
        &dst,
        InsertOptions {
            zero_fill_features: a.zero_fill,
        },
    )?;
    io::write_ply(&out, &a.out)?;
    print_json(&json!({ "selected": indices.len(), "n_out": out.len(), "feature_dim": out.feature_dim() }));
    Ok(())
}

pub fn bench(a: BenchArgs) -> Result<()> {
    let cfg = BenchConfig {
        n_gaussians: a.n_gaussians,
        n_views: a.n_views,
        dims: a.dims,
        width: a.width,
        height: a.height,
        repeats: a.repeats,
        seed: a.seed,
        uplift: UpliftConfig {
            deterministic: a.deterministic,
            ..Default::default()
        },
    };
    let rows = bench::run(&cfg)?;
    let out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(fs::File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(out);
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
