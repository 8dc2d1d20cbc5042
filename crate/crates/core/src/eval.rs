//! Keypoint accuracy metrics and the paired drawing-style comparison.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::{SymbolKind, SymbolTruth};
use crate::parser::{parse_sketch, ParserConfig};
use crate::types::{DrawingStyle, KeypointRole, RasterImage, StepColor, Symbol, SymbolSet};

pub const DEFAULT_THRESHOLD_PX: f64 = 50.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("no ground-truth keypoints to score")]
    EmptyGroundTruth,
    #[error("pair {0:?} has variants with different ground truth")]
    UnpairedVariants(String),
}

impl EvalError {
    pub fn code(&self) -> &'static str {
        match self {
            EvalError::EmptyGroundTruth => "EmptyGroundTruth",
            EvalError::UnpairedVariants(_) => "UnpairedVariants",
        }
    }
}

/// One ground-truth keypoint and the prediction matched to it, if any.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointSample {
    pub record: String,
    pub symbol: usize,
    pub role: KeypointRole,
    pub truth: [f64; 2],
    pub prediction: Option<[f64; 2]>,
}

impl KeypointSample {
    pub fn distance(&self) -> Option<f64> {
        self.prediction.map(|p| (p[0] - self.truth[0]).hypot(p[1] - self.truth[1]))
    }

    fn key(&self) -> (&str, usize, KeypointRole) {
        (&self.record, self.symbol, self.role)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleMetrics {
    pub role: KeypointRole,
    pub ground_truth: usize,
    pub matched: usize,
    /// Ground-truth keypoints with no prediction.
    pub no_prediction: usize,
    pub hits: usize,
    pub mean_distance: Option<f64>,
    pub std_distance: Option<f64>,
    /// Hits over ground truth.
    pub map: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointReport {
    pub threshold_px: f64,
    pub ground_truth: usize,
    pub matched: usize,
    pub no_prediction: usize,
    /// Over all matched pairs.
    pub mean_distance: Option<f64>,
    pub std_distance: Option<f64>,
    /// Per-role hit rates, averaged over the roles present.
    pub map: f64,
    pub roles: Vec<RoleMetrics>,
}

fn mean_std(d: &[f64]) -> (Option<f64>, Option<f64>) {
    if d.is_empty() {
        return (None, None);
    }
    let n = d.len() as f64;
    let m = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (Some(m), Some(var.sqrt()))
}

/// MD over matched pairs and hit rate at `threshold_px`, per role then averaged.
pub fn keypoint_metrics(samples: &[KeypointSample], threshold_px: f64) -> Result<KeypointReport, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::EmptyGroundTruth);
    }
    let mut roles = Vec::new();
    for role in [KeypointRole::Start, KeypointRole::Waypoint, KeypointRole::End, KeypointRole::Center] {
        let of_role: Vec<&KeypointSample> = samples.iter().filter(|s| s.role == role).collect();
        if of_role.is_empty() {
            continue;
        }
        let d: Vec<f64> = of_role.iter().filter_map(|s| s.distance()).collect();
        let hits = d.iter().filter(|x| **x <= threshold_px).count();
        let (mean_distance, std_distance) = mean_std(&d);
        roles.push(RoleMetrics {
            role,
            ground_truth: of_role.len(),
            matched: d.len(),
            no_prediction: of_role.len() - d.len(),
            hits,
            mean_distance,
            std_distance,
            map: hits as f64 / of_role.len() as f64,
        });
    }
    let d: Vec<f64> = samples.iter().filter_map(|s| s.distance()).collect();
    let (mean_distance, std_distance) = mean_std(&d);
    Ok(KeypointReport {
        threshold_px,
        ground_truth: samples.len(),
        matched: d.len(),
        no_prediction: samples.len() - d.len(),
        mean_distance,
        std_distance,
        map: roles.iter().map(|r| r.map).sum::<f64>() / roles.len() as f64,
        roles,
    })
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

impl KeypointReport {
    /// Aligned text table, one row per role plus an overall row.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<8} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8}", "role", "gt", "matched", "no_pred", "MD", "std", "mAP");
        for r in &self.roles {
            let _ = writeln!(
                out,
                "{:<8} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8.3}",
                r.role.as_str(),
                r.ground_truth,
                r.matched,
                r.no_prediction,
                fmt_opt(r.mean_distance),
                fmt_opt(r.std_distance),
                r.map
            );
        }
        let _ = writeln!(
            out,
            "{:<8} {:>6} {:>8} {:>8} {:>8} {:>8} {:>8.3}",
            "all",
            self.ground_truth,
            self.matched,
            self.no_prediction,
            fmt_opt(self.mean_distance),
            fmt_opt(self.std_distance),
            self.map
        );
        let _ = writeln!(out, "threshold {:.0} px", self.threshold_px);
        out
    }
}

fn kind_of(s: &Symbol) -> SymbolKind {
    match s {
        Symbol::Arrow(_) => SymbolKind::Arrow,
        Symbol::Circle(_) => SymbolKind::Circle,
    }
}

fn role_point(s: &Symbol, role: KeypointRole) -> Option<[f64; 2]> {
    let k = match (s, role) {
        (Symbol::Arrow(a), KeypointRole::Start) => a.start(),
        (Symbol::Arrow(a), KeypointRole::End) => a.end(),
        (Symbol::Circle(c), KeypointRole::Center) => &c.center,
        _ => return None,
    };
    Some([k.u, k.v])
}

/// Pairs each ground-truth symbol with the unused parsed symbol of the same step and kind
/// whose keypoints lie closest, and emits one sample per ground-truth keypoint.
pub fn match_predictions(record: &str, truth: &[SymbolTruth], parsed: Option<&SymbolSet>) -> Vec<KeypointSample> {
    let empty = Vec::new();
    let symbols = parsed.map_or(&empty, |p| &p.symbols);
    let mut used = vec![false; symbols.len()];
    let mut out = Vec::new();
    for (index, t) in truth.iter().enumerate() {
        let kind = if t.kind == SymbolKind::Stroke { SymbolKind::Arrow } else { t.kind };
        let cost = |s: &Symbol| -> f64 {
            t.keypoints
                .iter()
                .map(|k| role_point(s, k.role).map_or(f64::INFINITY, |p| (p[0] - k.u).hypot(p[1] - k.v)))
                .sum()
        };
        let best = symbols
            .iter()
            .enumerate()
            .filter(|(i, s)| !used[*i] && s.color().ordinal == t.ordinal && kind_of(s) == kind)
            .min_by(|a, b| cost(a.1).total_cmp(&cost(b.1)))
            .map(|(i, _)| i);
        if let Some(i) = best {
            used[i] = true;
        }
        for k in &t.keypoints {
            out.push(KeypointSample {
                record: record.to_string(),
                symbol: index,
                role: k.role,
                truth: [k.u, k.v],
                prediction: best.and_then(|i| role_point(&symbols[i], k.role)),
            });
        }
    }
    out
}

/// Parses one annotated image and matches it against its ground truth; a failed parse
/// leaves every keypoint without a prediction.
pub fn score_sketch(
    record: &str,
    annotated: &RasterImage,
    clean: Option<&RasterImage>,
    truth: &[SymbolTruth],
    palette: &[StepColor],
    cfg: &ParserConfig,
) -> Vec<KeypointSample> {
    let parsed = parse_sketch(annotated, clean, palette, cfg).ok();
    match_predictions(record, truth, parsed.as_ref())
}

/// The same sketch drawn in both styles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StylePair {
    pub id: String,
    pub geometric: Vec<KeypointSample>,
    pub loose: Vec<KeypointSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleAblation {
    pub pairs: usize,
    pub geometric: KeypointReport,
    pub loose: KeypointReport,
    /// Loose MD minus geometric MD.
    pub md_difference: Option<f64>,
    /// Geometric mAP minus loose mAP.
    pub map_difference: f64,
    pub geometric_better: usize,
    pub loose_better: usize,
    pub ties: usize,
    /// Two-sided exact sign test over non-tied pairs.
    pub p_value: f64,
}

fn ln_choose(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

/// Two-sided exact binomial sign test: probability under p = 1/2 of a split at least as
/// uneven as `k` of `n`.
pub fn sign_test(k: usize, n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let (n, k) = (n as u64, k as u64);
    let hi = k.max(n - k);
    let tail: f64 = (hi..=n).map(|j| (ln_choose(n, j) - n as f64 * std::f64::consts::LN_2).exp()).sum();
    (2.0 * tail).min(1.0)
}

/// Per-pair error: mean distance with each keypoint capped at the threshold, and a missing
/// prediction counted as the threshold.
fn pair_error(s: &[KeypointSample], threshold: f64) -> f64 {
    s.iter().map(|k| k.distance().map_or(threshold, |d| d.min(threshold))).sum::<f64>() / s.len().max(1) as f64
}

pub fn style_ablation(pairs: &[StylePair], threshold_px: f64) -> Result<StyleAblation, EvalError> {
    for p in pairs {
        let same = p.geometric.len() == p.loose.len()
            && p.geometric.iter().zip(&p.loose).all(|(g, l)| g.key() == l.key() && g.truth == l.truth);
        if !same {
            return Err(EvalError::UnpairedVariants(p.id.clone()));
        }
    }
    let all = |f: fn(&StylePair) -> &Vec<KeypointSample>| pairs.iter().flat_map(|p| f(p).iter().cloned()).collect::<Vec<_>>();
    let geometric = keypoint_metrics(&all(|p| &p.geometric), threshold_px)?;
    let loose = keypoint_metrics(&all(|p| &p.loose), threshold_px)?;
    let (mut g, mut l, mut ties) = (0, 0, 0);
    for p in pairs {
        let (eg, el) = (pair_error(&p.geometric, threshold_px), pair_error(&p.loose, threshold_px));
        if eg < el {
            g += 1;
        } else if el < eg {
            l += 1;
        } else {
            ties += 1;
        }
    }
    Ok(StyleAblation {
        pairs: pairs.len(),
        md_difference: geometric.mean_distance.zip(loose.mean_distance).map(|(a, b)| b - a),
        map_difference: geometric.map - loose.map,
        geometric_better: g,
        loose_better: l,
        ties,
        p_value: sign_test(g, g + l),
        geometric,
        loose,
    })
}

impl StyleAblation {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<10} {:>8} {:>8} {:>8} {:>8}", "style", "pairs", "MD", "std", "mAP");
        for (name, r) in [("geometric", &self.geometric), ("loose", &self.loose)] {
            let _ = writeln!(
                out,
                "{:<10} {:>8} {:>8} {:>8} {:>8.3}",
                name,
                self.pairs,
                fmt_opt(r.mean_distance),
                fmt_opt(r.std_distance),
                r.map
            );
        }
        let _ = writeln!(
            out,
            "geometric better {} / loose better {} / ties {}, sign test p = {:.4}",
            self.geometric_better, self.loose_better, self.ties, self.p_value
        );
        out
    }
}

/// Keypoint samples from one parsed variant of a dataset record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredVariant {
    pub record: String,
    pub task: String,
    pub style: DrawingStyle,
    pub samples: Vec<KeypointSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskMetrics {
    pub task: String,
    pub variants: usize,
    pub report: KeypointReport,
}

/// Overall, per-task and per-style accuracy over a dataset, with the paired style table when
/// some records were drawn in both styles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub variants: usize,
    pub overall: KeypointReport,
    pub tasks: Vec<TaskMetrics>,
    pub geometric: Option<KeypointReport>,
    pub loose: Option<KeypointReport>,
    pub ablation: Option<StyleAblation>,
}

/// Pairs the first geometric and first loose variant of each record that has both.
pub fn style_pairs(variants: &[ScoredVariant]) -> Vec<StylePair> {
    let mut ids: Vec<&str> = variants.iter().map(|v| v.record.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    ids.into_iter()
        .filter_map(|id| {
            let first = |style| variants.iter().find(|v| v.record == id && v.style == style);
            let g = first(DrawingStyle::Geometric)?;
            let l = first(DrawingStyle::Loose)?;
            Some(StylePair { id: id.to_string(), geometric: g.samples.clone(), loose: l.samples.clone() })
        })
        .collect()
}

pub fn dataset_report(variants: &[ScoredVariant], threshold_px: f64) -> Result<EvalReport, EvalError> {
    let collect = |f: &dyn Fn(&ScoredVariant) -> bool| {
        variants.iter().filter(|v| f(v)).flat_map(|v| v.samples.iter().cloned()).collect::<Vec<_>>()
    };
    let overall = keypoint_metrics(&collect(&|_| true), threshold_px)?;
    let mut names: Vec<&str> = variants.iter().map(|v| v.task.as_str()).collect();
    names.sort_unstable();
    names.dedup();
    let tasks = names
        .into_iter()
        .map(|t| {
            Ok(TaskMetrics {
                task: t.to_string(),
                variants: variants.iter().filter(|v| v.task == t).count(),
                report: keypoint_metrics(&collect(&|v| v.task == t), threshold_px)?,
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    let by_style = |style| keypoint_metrics(&collect(&|v| v.style == style), threshold_px).ok();
    let pairs = style_pairs(variants);
    let ablation = if pairs.is_empty() { None } else { Some(style_ablation(&pairs, threshold_px)?) };
    Ok(EvalReport {
        variants: variants.len(),
        overall,
        tasks,
        geometric: by_style(DrawingStyle::Geometric),
        loose: by_style(DrawingStyle::Loose),
        ablation,
    })
}

impl EvalReport {
    pub fn to_table(&self) -> String {
        let mut out = self.overall.to_table();
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<28} {:>8} {:>8} {:>8}", "task", "variants", "MD", "mAP");
        for t in &self.tasks {
            let _ = writeln!(
                out,
                "{:<28} {:>8} {:>8} {:>8.3}",
                t.task,
                t.variants,
                fmt_opt(t.report.mean_distance),
                t.report.map
            );
        }
        if let Some(a) = &self.ablation {
            let _ = writeln!(out);
            out.push_str(&a.to_table());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(i: usize, role: KeypointRole, off: Option<f64>) -> KeypointSample {
        KeypointSample {
            record: format!("r{i}"),
            symbol: 0,
            role,
            truth: [100.0, 100.0],
            prediction: off.map(|d| [100.0 + d, 100.0]),
        }
    }

    #[test]
    fn one_far_among_ten() {
        let mut s: Vec<_> = (0..9).map(|i| sample(i, KeypointRole::End, Some(0.0))).collect();
        s.push(sample(9, KeypointRole::End, Some(60.0)));
        let r = keypoint_metrics(&s, 50.0).unwrap();
        assert_eq!(r.mean_distance, Some(6.0));
        assert_eq!(r.map, 0.9);
        assert_eq!(keypoint_metrics(&[], 50.0), Err(EvalError::EmptyGroundTruth));
    }

    #[test]
    fn missing_prediction_is_a_miss_not_a_distance() {
        let s = vec![sample(0, KeypointRole::Start, Some(3.0)), sample(1, KeypointRole::Start, None)];
        let r = keypoint_metrics(&s, 50.0).unwrap();
        assert_eq!(r.mean_distance, Some(3.0));
        assert_eq!(r.map, 0.5);
        assert_eq!(r.no_prediction, 1);
    }

    #[test]
    fn sign_test_matches_binomial_tail() {
        // 40 of 50: 2 * sum_{j>=40} C(50, j) / 2^50
        let mut c = 1.0f64;
        let mut tail = 0.0;
        for j in 0..=50u32 {
            if j >= 40 {
                tail += c;
            }
            c = c * (50 - j) as f64 / (j + 1) as f64;
        }
        let want = 2.0 * tail / 2f64.powi(50);
        assert!((sign_test(40, 50) - want).abs() < 1e-15);
        assert_eq!(sign_test(25, 50), 1.0);
    }

    #[test]
    fn identical_styles_give_zero_difference() {
        let s = vec![sample(0, KeypointRole::Start, Some(2.0)), sample(0, KeypointRole::End, Some(4.0))];
        let pairs = vec![StylePair { id: "a".into(), geometric: s.clone(), loose: s }];
        let t = style_ablation(&pairs, 50.0).unwrap();
        assert_eq!(t.md_difference, Some(0.0));
        assert_eq!(t.map_difference, 0.0);
        assert_eq!(t.ties, 1);
        assert_eq!(t.p_value, 1.0);
    }

    #[test]
    fn dataset_report_pairs_styles_per_record() {
        let v = |record: &str, task: &str, style, off| ScoredVariant {
            record: record.into(),
            task: task.into(),
            style,
            samples: vec![KeypointSample { record: record.into(), ..sample(0, KeypointRole::End, Some(off)) }],
        };
        let vs = vec![
            v("a", "move", DrawingStyle::Geometric, 1.0),
            v("a", "move", DrawingStyle::Loose, 3.0),
            v("a", "move", DrawingStyle::Loose, 9.0),
            v("b", "pick", DrawingStyle::Geometric, 2.0),
        ];
        let r = dataset_report(&vs, 50.0).unwrap();
        assert_eq!(r.tasks.len(), 2);
        assert_eq!(r.tasks[0].variants, 3);
        let a = r.ablation.unwrap();
        assert_eq!(a.pairs, 1);
        assert_eq!(a.geometric_better, 1);
        assert_eq!(r.loose.unwrap().mean_distance, Some(6.0));
    }

    #[test]
    fn unpaired_rejected() {
        let a = vec![sample(0, KeypointRole::Start, Some(2.0))];
        let mut b = a.clone();
        b[0].truth = [1.0, 1.0];
        let pairs = vec![StylePair { id: "x".into(), geometric: a, loose: b }];
        assert!(matches!(style_ablation(&pairs, 50.0), Err(EvalError::UnpairedVariants(_))));
    }
}
