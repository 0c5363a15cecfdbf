//! Open-vocabulary querying over rendered feature maps: relevancy scoring,
//! threshold selection, localization and mask metrics.

use log::warn;

use crate::error::{Error, Result};
use crate::feature_map::FeatureMap;
use crate::registry::{parse_param, Registry};

#[derive(Clone, Debug, PartialEq)]
pub struct QuerySpec {
    pub query_embedding: Vec<f32>,
    /// Contrast phrases; empty means plain scaled cosine.
    pub canonical_embeddings: Vec<Vec<f32>>,
}

impl QuerySpec {
    pub fn new(query_embedding: Vec<f32>, canonical_embeddings: Vec<Vec<f32>>) -> Result<Self> {
        let d = query_embedding.len();
        if d == 0 {
            return Err(Error::InvalidConfig("empty query embedding".into()));
        }
        if let Some(c) = canonical_embeddings.iter().find(|c| c.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: c.len(),
            });
        }
        Ok(QuerySpec {
            query_embedding,
            canonical_embeddings,
        })
    }

    pub fn dim(&self) -> usize {
        self.query_embedding.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdConfig {
    pub step: f64,
    pub stability_threshold: f64,
    pub min_area_frac: f64,
    pub max_area_frac: f64,
    /// Fallback when no stable region is found.
    pub fixed_threshold: Option<f64>,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            step: 0.01,
            stability_threshold: 0.4,
            min_area_frac: 0.00005,
            max_area_frac: 0.90,
            fixed_threshold: None,
        }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.step > 0.0
            && self.step < 1.0
            && self.stability_threshold > 0.0
            && self.min_area_frac > 0.0
            && self.min_area_frac < self.max_area_frac
            && self.max_area_frac <= 1.0
            && self.fixed_threshold.is_none_or(|t| (0.0..=1.0).contains(&t));
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid threshold config {self:?}")))
        }
    }
}

/// Per-pixel relevancy in `[0, 1]`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RelevancyMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl RelevancyMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidConfig(format!("relevancy {v} outside [0, 1]")));
        }
        Ok(RelevancyMap { width, height, values })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let values = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Self::new(width, height, values)
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: bits.len(),
            });
        }
        Ok(Mask { width, height, bits })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let bits = (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        Mask { width, height, bits }
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn area(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

fn norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| x as f64 * x as f64).sum::<f64>().sqrt()
}

fn unit(v: &[f32]) -> Vec<f64> {
    let n = norm(v);
    v.iter().map(|&x| if n == 0.0 { 0.0 } else { x as f64 / n }).collect()
}

/// Query and canonical embeddings pre-normalized for per-pixel scoring.
struct Scorer {
    query: Vec<f64>,
    canonical: Vec<Vec<f64>>,
}

impl Scorer {
    fn new(spec: &QuerySpec) -> Self {
        Scorer {
            query: unit(&spec.query_embedding),
            canonical: spec.canonical_embeddings.iter().map(|c| unit(c)).collect(),
        }
    }

    fn score(&self, feature: &[f32]) -> f64 {
        let n = norm(feature);
        if n == 0.0 {
            return 0.0;
        }
        let cos = |e: &[f64]| feature.iter().zip(e).map(|(&x, &y)| x as f64 * y).sum::<f64>() / n;
        let cq = cos(&self.query);
        if self.canonical.is_empty() {
            return ((cq + 1.0) / 2.0).clamp(0.0, 1.0);
        }
        // exp(a) / (exp(a) + exp(b)) written as a logistic of the difference
        self.canonical
            .iter()
            .map(|c| 1.0 / (1.0 + (cos(c) - cq).exp()))
            .fold(1.0, f64::min)
    }
}

/// Relevancy of a single feature vector against a query.
pub fn relevancy(feature: &[f32], query: &QuerySpec) -> f64 {
    Scorer::new(query).score(feature)
}

pub fn relevancy_map(feat_map: &FeatureMap, query: &QuerySpec) -> Result<RelevancyMap> {
    if feat_map.dim() != query.dim() {
        return Err(Error::DimensionMismatch {
            expected: feat_map.dim(),
            actual: query.dim(),
        });
    }
    let scorer = Scorer::new(query);
    let values = feat_map
        .data()
        .chunks(feat_map.dim())
        .map(|f| scorer.score(f))
        .collect();
    RelevancyMap::new(feat_map.width(), feat_map.height(), values)
}

/// Level whose map reaches the highest relevancy; ties go to the lowest index.
pub fn select_level(maps: &[RelevancyMap]) -> Result<usize> {
    if maps.is_empty() {
        return Err(Error::InvalidConfig("no relevancy levels".into()));
    }
    let mut best = 0;
    for (i, m) in maps.iter().enumerate().skip(1) {
        if m.max() > maps[best].max() {
            best = i;
        }
    }
    Ok(best)
}

pub fn fixed_threshold_mask(rel: &RelevancyMap, t: f64) -> Mask {
    Mask {
        width: rel.width,
        height: rel.height,
        bits: rel.values.iter().map(|&v| v > t).collect(),
    }
}

/// One point of the threshold sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub threshold: f64,
    pub area_frac: f64,
    /// Mean relevancy over `rel > threshold`; `None` when the area is rejected.
    pub mean: Option<f64>,
}

pub fn threshold_sweep(rel: &RelevancyMap, cfg: &ThresholdConfig) -> Vec<SweepPoint> {
    let (lo, hi) = (rel.min(), rel.max());
    let total = rel.values.len() as f64;
    let steps = ((hi - lo) / cfg.step + 1e-9).floor() as usize;
    (0..=steps)
        .map(|k| {
            let t = lo + k as f64 * cfg.step;
            let (mut sum, mut count) = (0.0, 0usize);
            for &v in &rel.values {
                if v > t {
                    sum += v;
                    count += 1;
                }
            }
            let area_frac = count as f64 / total;
            let valid = count > 0 && area_frac >= cfg.min_area_frac && area_frac <= cfg.max_area_frac;
            SweepPoint {
                threshold: t,
                area_frac,
                mean: valid.then(|| sum / count as f64),
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub enum ThresholdOutcome {
    Stable {
        threshold: f64,
        mask: Mask,
        /// Mean relevancy of the chosen run.
        confidence: f64,
    },
    Fixed {
        threshold: f64,
        mask: Mask,
    },
    NoStableRegion,
}

impl ThresholdOutcome {
    pub fn mask(&self) -> Option<&Mask> {
        match self {
            ThresholdOutcome::Stable { mask, .. } | ThresholdOutcome::Fixed { mask, .. } => Some(mask),
            ThresholdOutcome::NoStableRegion => None,
        }
    }

    pub fn threshold(&self) -> Option<f64> {
        match self {
            ThresholdOutcome::Stable { threshold, .. } | ThresholdOutcome::Fixed { threshold, .. } => Some(*threshold),
            ThresholdOutcome::NoStableRegion => None,
        }
    }
}

/// Sweeps thresholds, finds maximal runs of consecutive valid thresholds whose
/// mean relevancy changes by less than `stability_threshold` per unit
/// threshold, and returns the midpoint of the run with the highest mean.
/// Falls back to `fixed_threshold` when no run of two or more exists.
pub fn dynamic_threshold(rel: &RelevancyMap, cfg: &ThresholdConfig) -> Result<ThresholdOutcome> {
    cfg.validate()?;
    let sweep = threshold_sweep(rel, cfg);
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start: Option<usize> = None;
    for k in 0..sweep.len().saturating_sub(1) {
        let stable = match (sweep[k].mean, sweep[k + 1].mean) {
            (Some(a), Some(b)) => (b - a).abs() / cfg.step < cfg.stability_threshold,
            _ => false,
        };
        match (stable, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                runs.push((s, k));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, sweep.len() - 1));
    }

    let best = runs
        .iter()
        .map(|&(s, e)| {
            let mean = sweep[s..=e].iter().filter_map(|p| p.mean).sum::<f64>() / (e - s + 1) as f64;
            (s, e, mean)
        })
        .fold(None::<(usize, usize, f64)>, |acc, r| match acc {
            Some(a) if a.2 >= r.2 => Some(a),
            _ => Some(r),
        });

    Ok(match best {
        Some((s, e, confidence)) => {
            let threshold = 0.5 * (sweep[s].threshold + sweep[e].threshold);
            ThresholdOutcome::Stable {
                threshold,
                mask: fixed_threshold_mask(rel, threshold),
                confidence,
            }
        }
        None => match cfg.fixed_threshold {
            Some(t) => ThresholdOutcome::Fixed {
                threshold: t,
                mask: fixed_threshold_mask(rel, t),
            },
            None => ThresholdOutcome::NoStableRegion,
        },
    })
}

/// Highest-relevancy pixel as `(x, y)`; ties go to the smallest row-major index.
pub fn localize(rel: &RelevancyMap) -> Result<(usize, usize)> {
    if rel.values.is_empty() {
        return Err(Error::InvalidConfig("empty relevancy map".into()));
    }
    let mut best = 0;
    for (i, &v) in rel.values.iter().enumerate() {
        if v > rel.values[best] {
            best = i;
        }
    }
    Ok((best % rel.width, best / rel.width))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Iou {
    pub value: f64,
    /// Both masks were empty; the value is defined as 1.
    pub both_empty: bool,
}

pub fn compute_iou(mask: &Mask, gt: &Mask) -> Result<Iou> {
    if mask.width != gt.width || mask.height != gt.height {
        return Err(Error::DimensionMismatch {
            expected: gt.width * gt.height,
            actual: mask.width * mask.height,
        });
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for (&a, &b) in mask.bits.iter().zip(&gt.bits) {
        inter += (a && b) as usize;
        union += (a || b) as usize;
    }
    if union == 0 {
        warn!("both masks empty; IoU defined as 1");
        return Ok(Iou {
            value: 1.0,
            both_empty: true,
        });
    }
    Ok(Iou {
        value: inter as f64 / union as f64,
        both_empty: false,
    })
}

pub fn mean_iou(pairs: &[(Mask, Mask)]) -> Result<f64> {
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for (m, g) in pairs {
        sum += compute_iou(m, g)?.value;
    }
    Ok(sum / pairs.len() as f64)
}

/// A rule turning a relevancy map into a mask.
pub trait ThresholdProtocol: Send + Sync {
    fn name(&self) -> &'static str;
    fn apply(&self, rel: &RelevancyMap) -> Result<ThresholdOutcome>;
}

pub struct FixedProtocol(pub f64);

impl ThresholdProtocol for FixedProtocol {
    fn name(&self) -> &'static str {
        "fixed"
    }

    fn apply(&self, rel: &RelevancyMap) -> Result<ThresholdOutcome> {
        Ok(ThresholdOutcome::Fixed {
            threshold: self.0,
            mask: fixed_threshold_mask(rel, self.0),
        })
    }
}

pub struct DynamicProtocol(pub ThresholdConfig);

impl ThresholdProtocol for DynamicProtocol {
    fn name(&self) -> &'static str {
        "dynamic"
    }

    fn apply(&self, rel: &RelevancyMap) -> Result<ThresholdOutcome> {
        dynamic_threshold(rel, &self.0)
    }
}

/// `fixed[:t]` (default 0.5) and `dynamic[:stability]` (default 0.4).
pub fn protocol_registry() -> Registry<dyn ThresholdProtocol> {
    let mut reg: Registry<dyn ThresholdProtocol> = Registry::new("threshold protocol");
    reg.register("fixed", "mask = relevancy > t", |p| {
        let t = parse_param(p, 0.5)?;
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::InvalidConfig(format!("fixed threshold {t} outside [0, 1]")));
        }
        Ok(Box::new(FixedProtocol(t)))
    });
    reg.register("dynamic", "stable-region threshold sweep", |p| {
        let cfg = ThresholdConfig {
            stability_threshold: parse_param(p, 0.4)?,
            ..ThresholdConfig::default()
        };
        cfg.validate()?;
        Ok(Box::new(DynamicProtocol(cfg)))
    });
    reg
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map1(features: &[Vec<f32>]) -> FeatureMap {
        let d = features[0].len();
        FeatureMap::new(features.len(), 1, d, features.concat()).unwrap()
    }

    #[test]
    fn relevancy_examples() {
        let q = vec![1.0, 0.0, 0.0];
        let with_canon = QuerySpec::new(q.clone(), vec![vec![0.0, 1.0, 0.0]]).unwrap();
        let e = std::f64::consts::E;
        assert!((relevancy(&q, &with_canon) - e / (e + 1.0)).abs() < 1e-12);
        let plain = QuerySpec::new(q.clone(), vec![]).unwrap();
        assert_eq!(relevancy(&[0.0, 2.0, 0.0], &plain), 0.5);
        assert_eq!(relevancy(&q, &plain), 1.0);
        assert_eq!(relevancy(&[0.0; 3], &plain), 0.0);
    }

    #[test]
    fn map_matches_pointwise_relevancy() {
        let feats = vec![vec![1.0, 0.0], vec![0.3, 0.7], vec![0.0, 0.0], vec![-1.0, 0.2]];
        let spec = QuerySpec::new(vec![0.6, 0.8], vec![vec![1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        let rel = relevancy_map(&map1(&feats), &spec).unwrap();
        for (f, &r) in feats.iter().zip(&rel.values) {
            assert!((relevancy(f, &spec) - r).abs() < 1e-12);
        }
        let wrong = QuerySpec::new(vec![1.0, 0.0, 0.0], vec![]).unwrap();
        assert!(relevancy_map(&map1(&feats), &wrong).is_err());
    }

    #[test]
    fn select_level_examples() {
        let m = |v: f64| RelevancyMap::new(1, 1, vec![v]).unwrap();
        assert_eq!(select_level(&[m(0.3)]).unwrap(), 0);
        assert_eq!(select_level(&[m(0.4), m(0.9), m(0.6)]).unwrap(), 1);
        assert_eq!(select_level(&[m(0.5), m(0.5)]).unwrap(), 0);
        assert!(select_level(&[]).is_err());
    }

    #[test]
    fn fixed_threshold_examples() {
        let full = RelevancyMap::new(2, 2, vec![0.6; 4]).unwrap();
        assert_eq!(fixed_threshold_mask(&full, 0.5).area(), 4);
        let none = RelevancyMap::new(2, 2, vec![0.4; 4]).unwrap();
        assert_eq!(fixed_threshold_mask(&none, 0.5).area(), 0);
        let checker = RelevancyMap::from_fn(4, 4, |x, y| if (x + y) % 2 == 0 { 0.7 } else { 0.3 }).unwrap();
        let mask = fixed_threshold_mask(&checker, 0.5);
        assert_eq!(mask, Mask::from_fn(4, 4, |x, y| (x + y) % 2 == 0));
    }

    fn disc(w: usize, h: usize, r: f64) -> Mask {
        Mask::from_fn(w, h, |x, y| {
            let (dx, dy) = (x as f64 - w as f64 / 2.0, y as f64 - h as f64 / 2.0);
            dx * dx + dy * dy < r * r
        })
    }

    #[test]
    fn disc_plateau_gives_midpoint_and_exact_mask() {
        let gt = disc(64, 64, 19.5);
        let frac = gt.area() as f64 / (64.0 * 64.0);
        assert!((frac - 0.3).abs() < 0.02);
        let rel = RelevancyMap::from_fn(64, 64, |x, y| if gt.get(x, y) { 0.9 } else { 0.1 }).unwrap();
        let out = dynamic_threshold(&rel, &ThresholdConfig::default()).unwrap();
        let t = out.threshold().unwrap();
        assert!((t - 0.5).abs() < 0.011, "{t}");
        assert_eq!(out.mask().unwrap(), &gt);
    }

    #[test]
    fn uniform_map_has_no_stable_region() {
        let rel = RelevancyMap::new(16, 16, vec![0.5; 256]).unwrap();
        assert_eq!(
            dynamic_threshold(&rel, &ThresholdConfig::default()).unwrap(),
            ThresholdOutcome::NoStableRegion
        );
        let cfg = ThresholdConfig {
            fixed_threshold: Some(0.4),
            ..Default::default()
        };
        match dynamic_threshold(&rel, &cfg).unwrap() {
            ThresholdOutcome::Fixed { threshold, mask } => {
                assert_eq!(threshold, 0.4);
                assert_eq!(mask.area(), 256);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn higher_plateau_wins() {
        // background 0.05 (50%), region A 0.6 (40%), region B 0.9 (10%)
        let rel = RelevancyMap::from_fn(100, 10, |x, _| match x {
            0..50 => 0.05,
            50..90 => 0.6,
            _ => 0.9,
        })
        .unwrap();
        let out = dynamic_threshold(&rel, &ThresholdConfig::default()).unwrap();
        let t = out.threshold().unwrap();
        assert!(t > 0.6 && t < 0.9, "{t}");
        assert_eq!(out.mask().unwrap(), &Mask::from_fn(100, 10, |x, _| x >= 90));
    }

    #[test]
    fn localize_examples() {
        let mut v = vec![0.1; 40 * 30];
        v[20 * 40 + 10] = 0.95;
        assert_eq!(localize(&RelevancyMap::new(40, 30, v).unwrap()).unwrap(), (10, 20));
        assert_eq!(
            localize(&RelevancyMap::new(5, 5, vec![0.3; 25]).unwrap()).unwrap(),
            (0, 0)
        );
        let mut b = vec![0.0; 25];
        b[24] = 1.0;
        assert_eq!(localize(&RelevancyMap::new(5, 5, b).unwrap()).unwrap(), (4, 4));
    }

    #[test]
    fn iou_examples() {
        let a = Mask::from_fn(8, 8, |x, _| x < 4);
        assert_eq!(compute_iou(&a, &a).unwrap().value, 1.0);
        let b = Mask::from_fn(8, 8, |x, _| x >= 4);
        assert_eq!(compute_iou(&a, &b).unwrap().value, 0.0);
        let half = Mask::from_fn(8, 8, |x, _| x < 2);
        assert_eq!(compute_iou(&half, &a).unwrap().value, 0.5);
        let empty = Mask::from_fn(8, 8, |_, _| false);
        let both = compute_iou(&empty, &empty).unwrap();
        assert!(both.both_empty && both.value == 1.0);
        assert!(compute_iou(&a, &Mask::from_fn(4, 4, |_, _| true)).is_err());
        assert_eq!(mean_iou(&[(a.clone(), a.clone()), (a, b)]).unwrap(), 0.5);
    }

    #[test]
    fn protocol_registry_specs() {
        let reg = protocol_registry();
        assert_eq!(reg.names(), vec!["fixed", "dynamic"]);
        let rel = RelevancyMap::new(2, 1, vec![0.3, 0.8]).unwrap();
        let p = reg.create("fixed:0.5").unwrap();
        assert_eq!(p.apply(&rel).unwrap().mask().unwrap().bits, vec![false, true]);
        assert!(reg.create("fixed:1.5").is_err());
        assert_eq!(reg.create("dynamic").unwrap().name(), "dynamic");
        assert!(reg.create("otsu").is_err());
    }

    fn feature_vec(d: usize) -> impl Strategy<Value = Vec<f32>> {
        prop::collection::vec(-1.0f32..1.0, d)
    }

    proptest! {
        #[test]
        fn relevancy_is_scale_invariant(f in feature_vec(6), q in feature_vec(6), c in feature_vec(6), s in 0.01f32..100.0) {
            prop_assume!(f.iter().any(|v| v.abs() > 1e-3));
            let spec = QuerySpec::new(q, vec![c]).unwrap();
            let scaled: Vec<f32> = f.iter().map(|v| v * s).collect();
            let (a, b) = (relevancy(&f, &spec), relevancy(&scaled, &spec));
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!((a - b).abs() < 1e-6);
        }

        #[test]
        fn localize_invariant_under_monotone_map(vals in prop::collection::vec(0.0f64..1.0, 1..60)) {
            let n = vals.len();
            let rel = RelevancyMap::new(n, 1, vals.clone()).unwrap();
            let squashed = RelevancyMap::new(n, 1, vals.iter().map(|v| v * v * 0.5 + 0.1).collect()).unwrap();
            prop_assert_eq!(localize(&rel).unwrap(), localize(&squashed).unwrap());
        }

        #[test]
        fn iou_symmetric(a in prop::collection::vec(any::<bool>(), 36), b in prop::collection::vec(any::<bool>(), 36)) {
            let (ma, mb) = (Mask::new(6, 6, a).unwrap(), Mask::new(6, 6, b).unwrap());
            prop_assert_eq!(compute_iou(&ma, &mb).unwrap(), compute_iou(&mb, &ma).unwrap());
        }

        #[test]
        fn raising_threshold_shrinks_mask(vals in prop::collection::vec(0.0f64..1.0, 1..80), t1 in 0.0f64..1.0, dt in 0.0f64..0.5) {
            let rel = RelevancyMap::new(vals.len(), 1, vals).unwrap();
            let (lo, hi) = (fixed_threshold_mask(&rel, t1), fixed_threshold_mask(&rel, t1 + dt));
            prop_assert!(hi.bits.iter().zip(&lo.bits).all(|(&h, &l)| !h || l));
        }

        #[test]
        fn two_level_plateau_is_recovered(w in 20usize..60, cut in 0.15f64..0.8, lo in 0.0f64..0.3, hi in 0.6f64..1.0) {
            let split = ((w as f64) * cut) as usize;
            prop_assume!(split > 0 && split < w);
            let gt = Mask::from_fn(w, w, |x, _| x >= split);
            let rel = RelevancyMap::from_fn(w, w, |x, y| if gt.get(x, y) { hi } else { lo }).unwrap();
            let out = dynamic_threshold(&rel, &ThresholdConfig::default()).unwrap();
            let t = out.threshold().unwrap();
            prop_assert!(t > lo && t < hi);
            prop_assert_eq!(out.mask().unwrap(), &gt);
        }
    }
}
