//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero on any failure.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rovi_core::datagen::{
    generate_record, random_tabletop, render_sketch, script_for, GeneratedRecord, SamplerConfig, SketchScript, SymbolTruth,
    VariantStyle,
};
use rovi_core::eval::{keypoint_metrics, score_sketch, style_ablation, EvalError, KeypointSample, StylePair};
use rovi_core::geom::{Quat, Vec3};
use rovi_core::parser::ParserConfig;
use rovi_core::pipeline::{run_episode, PipelineConfig};
use rovi_core::policy::{execute_step, vector_angle, FreeEffector, PolicyConfig};
use rovi_core::simulator::{render, SceneObject, Shape, WorldState};
use rovi_core::{default_palette, ActionType, DrawingStyle, Keypoint2, Keypoint3, KeypointRole, Pose, StepColor};

const PARSER_SKETCHES: usize = 200;
const PARSER_MAX_MD: f64 = 10.0;
const PARSER_MIN_MAP: f64 = 0.98;
const PARSER_MAX_SECS: f64 = 60.0;
const LOOSE_MIN_MAP: f64 = 0.90;
const MAX_JITTER: f64 = 4.0;
const THRESHOLD: f64 = 50.0;
const POLICY_RUNS: usize = 1000;
const ANGLE_PAIRS: usize = 10_000;
const ANGLE_TOL: f64 = 1e-9;
const RADIUS_TOL: f64 = 1e-6;
const LIFT_SCENES: usize = 20;
const REPROJECT_TOL: f64 = 1e-9;
const SURFACE_TOL: f64 = 1e-6;
const GOLDEN_MIN_ALIGNMENT: f64 = 0.9;
const GOLDEN_MAX_SECS: f64 = 30.0;
const MULTI_STEP_SKETCHES: usize = 50;

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn report(name: &'static str, pass: bool, detail: String) -> Outcome {
    println!("{} [{name}] {detail}", if pass { "PASS" } else { "FAIL" });
    Outcome { name, pass, detail }
}

fn geometric_sampler() -> SamplerConfig {
    SamplerConfig { variants: [1, 1], style: Some(DrawingStyle::Geometric), ..Default::default() }
}

struct Drawn {
    id: String,
    clean: rovi_core::RasterImage,
    annotated: rovi_core::RasterImage,
    truth: Vec<SymbolTruth>,
}

fn score(d: &Drawn, palette: &[StepColor]) -> Vec<KeypointSample> {
    score_sketch(&d.id, &d.annotated, Some(&d.clean), &d.truth, palette, &ParserConfig::default())
}

/// The same task redrawn loosely with the geometric variant's width and bend.
fn loose_twin(g: &GeneratedRecord, rng: &mut ChaCha8Rng, palette: &[StepColor]) -> Drawn {
    let base = g.record.variants[0].style;
    let style = VariantStyle { style: DrawingStyle::Loose, jitter: rng.random_range(0.0..=MAX_JITTER), ..base };
    let script = script_for(&g.record.task, &style);
    let (annotated, truth) = render_sketch(&g.clean, &script, palette).expect("loose twin renders");
    Drawn { id: g.record.id.clone(), clean: g.clean.clone(), annotated, truth }
}

fn fmt_md(x: Option<f64>) -> String {
    x.map_or("n/a".into(), |v| format!("{v:.2}"))
}

fn parser_suites(out: &mut Vec<Outcome>) {
    let palette = default_palette();
    let cfg = geometric_sampler();
    let records: Vec<GeneratedRecord> =
        (0..PARSER_SKETCHES).map(|i| generate_record(&[], &cfg, &palette, 2024, i).expect("record generates")).collect();
    let widths: std::collections::BTreeSet<i64> =
        records.iter().map(|r| r.record.variants[0].style.stroke_width as i64).collect();
    let curved = records
        .iter()
        .filter(|r| r.record.variants[0].style.bend != 0.0 && r.record.variants[0].script.symbols.iter().any(|s| s.control_points.len() > 2))
        .count();
    let geometric: Vec<Drawn> = records
        .iter()
        .map(|g| Drawn {
            id: g.record.id.clone(),
            clean: g.clean.clone(),
            annotated: g.annotated[0].clone(),
            truth: g.record.variants[0].truth.clone(),
        })
        .collect();

    let t0 = Instant::now();
    let gsamples: Vec<Vec<KeypointSample>> = geometric.iter().map(|d| score(d, &palette)).collect();
    let secs = t0.elapsed().as_secs_f64();
    let flat: Vec<KeypointSample> = gsamples.iter().flatten().cloned().collect();
    let g = keypoint_metrics(&flat, THRESHOLD).expect("ground truth present");
    let coverage = widths == (3..=7).collect() && curved > 0 && curved < PARSER_SKETCHES;
    let md_ok = g.mean_distance.is_some_and(|m| m <= PARSER_MAX_MD);
    out.push(report(
        "parser-geometric",
        coverage && md_ok && g.map >= PARSER_MIN_MAP && secs <= PARSER_MAX_SECS,
        format!(
            "{} sketches, widths {:?}, {} curved; MD {} px (<= {PARSER_MAX_MD}), mAP@50 {:.3} (>= {PARSER_MIN_MAP}), {} keypoints, {secs:.1} s (<= {PARSER_MAX_SECS})",
            geometric.len(),
            widths,
            curved,
            fmt_md(g.mean_distance),
            g.map,
            g.ground_truth
        ),
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let loose: Vec<Drawn> = records.iter().map(|g| loose_twin(g, &mut rng, &palette)).collect();
    let lsamples: Vec<Vec<KeypointSample>> = loose.iter().map(|d| score(d, &palette)).collect();
    let flat_l: Vec<KeypointSample> = lsamples.iter().flatten().cloned().collect();
    let l = keypoint_metrics(&flat_l, THRESHOLD).expect("ground truth present");
    let pairs: Vec<StylePair> = geometric
        .iter()
        .zip(gsamples)
        .zip(lsamples)
        .map(|((d, g), l)| StylePair { id: d.id.clone(), geometric: g, loose: l })
        .collect();
    let ablation = style_ablation(&pairs, THRESHOLD);
    let (pass, detail) = match &ablation {
        Ok(a) => (
            l.map >= LOOSE_MIN_MAP && a.map_difference >= 0.0,
            format!(
                "loose jitter <= {MAX_JITTER} px: MD {} px, mAP@50 {:.3} (>= {LOOSE_MIN_MAP}); geometric - loose mAP {:+.3} (>= 0), MD loose - geometric {}, pairs geometric/loose/tie better {}/{}/{}, sign test p {:.3}",
                fmt_md(l.mean_distance),
                l.map,
                a.map_difference,
                a.md_difference.map_or("n/a".into(), |d| format!("{d:+.2}")),
                a.geometric_better,
                a.loose_better,
                a.ties,
                a.p_value
            ),
        ),
        Err(e) => (false, format!("style ablation failed: {e}")),
    };
    out.push(report("parser-loose", pass, detail));

    // monotonicity on real parser output, reported with the metric suite
    let thresholds = [10.0, 25.0, 50.0, 100.0];
    let maps: Vec<f64> =
        thresholds.iter().map(|t| keypoint_metrics(&flat_l, *t).expect("ground truth present").map).collect();
    MONOTONE_REAL.with(|m| *m.borrow_mut() = Some(maps));
}

thread_local! {
    static MONOTONE_REAL: std::cell::RefCell<Option<Vec<f64>>> = const { std::cell::RefCell::new(None) };
}

fn unit(rng: &mut ChaCha8Rng) -> Vec3<f64> {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v.scale(1.0 / n);
        }
    }
}

fn policy_suite(out: &mut Vec<Outcome>) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut violations: Vec<String> = Vec::new();
    let (mut ticks, mut transitions, mut rotations) = (0usize, 0usize, 0usize);
    let mut worst_radius = 0.0f64;
    for run in 0..POLICY_RUNS {
        let cfg = PolicyConfig {
            eps_trans: rng.random_range(0.002..0.02),
            eps_rot: rng.random_range(0.005..0.05),
            step_size: rng.random_range(0.002..0.02),
            max_ticks_per_keypoint: 5000,
        };
        let kp = |p: Vec3<f64>| Keypoint3::from_vec(p, KeypointRole::Waypoint);
        if run % 2 == 0 {
            let start = Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(0.0..0.5));
            let n = rng.random_range(1..=6);
            let targets: Vec<Vec3<f64>> = (0..n)
                .map(|_| Vec3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(0.0..0.5)))
                .collect();
            let kps: Vec<_> = targets.iter().map(|p| kp(*p)).collect();
            let mut fx = FreeEffector { pose: Pose::from_position(start) };
            let trace = match execute_step(ActionType::Translation, &kps, None, &mut fx, &cfg) {
                Ok(t) => t,
                Err(e) => {
                    violations.push(format!("run {run}: {e}"));
                    continue;
                }
            };
            ticks += trace.records.len();
            let mut prev: Option<(usize, f64)> = None;
            for (i, r) in trace.records.iter().enumerate() {
                let oracle = Vec3::from_array(r.position).distance(targets[r.keypoint]);
                if (oracle - r.cost).abs() > 1e-12 {
                    violations.push(format!("run {run} tick {i}: recorded cost {} vs distance {oracle}", r.cost));
                }
                if let Some((k, c)) = prev {
                    if k == r.keypoint && !(r.cost < c) {
                        violations.push(format!("run {run} tick {i}: cost {} did not drop from {c}", r.cost));
                    }
                }
                let last_of_keypoint = trace.records.get(i + 1).is_none_or(|n| n.keypoint != r.keypoint);
                if last_of_keypoint {
                    transitions += 1;
                    if !(r.reached && r.cost <= cfg.eps_trans) {
                        violations.push(format!("run {run}: left keypoint {} at cost {} > {}", r.keypoint, r.cost, cfg.eps_trans));
                    }
                }
                prev = Some((r.keypoint, r.cost));
            }
            let seen: std::collections::BTreeSet<usize> = trace.records.iter().map(|r| r.keypoint).collect();
            if seen.len() != n {
                violations.push(format!("run {run}: visited {} of {n} keypoints", seen.len()));
            }
        } else {
            rotations += 1;
            let center = Vec3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(0.0..0.3));
            let axis = unit(&mut rng);
            let r0 = rng.random_range(0.05..0.3);
            let mut spoke = axis.cross(unit(&mut rng));
            while spoke.norm() < 0.2 {
                spoke = axis.cross(unit(&mut rng));
            }
            let spoke = spoke.scale(r0 / spoke.norm());
            let n = rng.random_range(2..=5);
            let mut angle = 0.0;
            let mut kps = Vec::new();
            let mut targets = Vec::new();
            for k in 0..n {
                if k > 0 {
                    let step = rng.random_range(0.1..1.5);
                    angle += step;
                    targets.push(step);
                }
                // radius may differ per keypoint; only angles are tracked
                let scale = rng.random_range(0.5..1.5);
                kps.push(kp(center + Quat::from_axis_angle(axis, angle).rotate(spoke).scale(scale)));
            }
            let start = center + spoke;
            let mut fx = FreeEffector { pose: Pose::from_position(start) };
            let trace = match execute_step(ActionType::Rotation, &kps, Some(&kp(center)), &mut fx, &cfg) {
                Ok(t) => t,
                Err(e) => {
                    violations.push(format!("run {run}: {e}"));
                    continue;
                }
            };
            ticks += trace.records.len();
            for (i, r) in trace.records.iter().enumerate() {
                let dr = (Vec3::from_array(r.position).distance(center) - r0).abs();
                worst_radius = worst_radius.max(dr);
                if dr > RADIUS_TOL {
                    violations.push(format!("run {run} tick {i}: radius drift {dr:e}"));
                }
                if trace.records.get(i + 1).is_none_or(|n| n.keypoint != r.keypoint) {
                    transitions += 1;
                    if !(r.reached && r.cost <= cfg.eps_rot) {
                        violations.push(format!("run {run}: left segment {} at cost {} > {}", r.keypoint, r.cost, cfg.eps_rot));
                    }
                }
            }
            let segments: std::collections::BTreeSet<usize> = trace.records.iter().map(|r| r.keypoint).collect();
            if segments.len() != targets.len() {
                violations.push(format!("run {run}: {} of {} segments traced", segments.len(), targets.len()));
            }
        }
    }

    // angle oracle: atan2 of the cross and dot products
    let mut worst_angle = 0.0f64;
    let mut angle_fail = 0;
    for _ in 0..ANGLE_PAIRS {
        let a = unit(&mut rng).scale(rng.random_range(1e-3..10.0));
        let b = unit(&mut rng).scale(rng.random_range(1e-3..10.0));
        let cx = a.y * b.z - a.z * b.y;
        let cy = a.z * b.x - a.x * b.z;
        let cz = a.x * b.y - a.y * b.x;
        let oracle = (cx * cx + cy * cy + cz * cz).sqrt().atan2(a.x * b.x + a.y * b.y + a.z * b.z);
        match vector_angle(a, b) {
            Ok(got) => {
                worst_angle = worst_angle.max((got - oracle).abs());
                if (got - oracle).abs() > ANGLE_TOL {
                    angle_fail += 1;
                }
            }
            Err(_) => angle_fail += 1,
        }
    }
    for v in violations.iter().take(5) {
        eprintln!("  policy: {v}");
    }
    out.push(report(
        "policy-invariants",
        violations.is_empty() && angle_fail == 0,
        format!(
            "{POLICY_RUNS} runs ({rotations} rotations), {ticks} ticks, {transitions} transitions, {} violations; worst radius drift {worst_radius:.1e} (<= {RADIUS_TOL:e}); {ANGLE_PAIRS} angle pairs, worst error {worst_angle:.1e} (<= {ANGLE_TOL:e}), {angle_fail} failures",
            violations.len()
        ),
    ));
}

/// Signed distance to a solid in its local frame.
fn sdf(shape: &Shape, q: Vec3<f64>) -> f64 {
    match *shape {
        Shape::Box { half_extents: h } => {
            let d = [q.x.abs() - h[0], q.y.abs() - h[1], q.z.abs() - h[2]];
            let outside = d.iter().map(|x| x.max(0.0).powi(2)).sum::<f64>().sqrt();
            outside + d[0].max(d[1]).max(d[2]).min(0.0)
        }
        Shape::Sphere { radius } => q.norm() - radius,
        Shape::Cylinder { radius, half_height } => {
            let d = [(q.x * q.x + q.y * q.y).sqrt() - radius, q.z.abs() - half_height];
            (d[0].max(0.0).powi(2) + d[1].max(0.0).powi(2)).sqrt() + d[0].max(d[1]).min(0.0)
        }
    }
}

fn lift_scene(seed: u64) -> WorldState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut world = random_tabletop(&mut rng);
    let height = rng.random_range(0.8..1.4);
    let tilt = Quat::from_axis_angle(unit(&mut rng), rng.random_range(0.0..0.25));
    world.camera.pose = Pose::new(Vec3::new(0.0, 0.0, height), tilt.mul(world.camera.pose.orientation));
    let r = rng.random_range(0.03..0.06);
    world.objects.push(SceneObject {
        id: "ball".into(),
        shape: Shape::Sphere { radius: r },
        pose: Pose::from_position(Vec3::new(rng.random_range(-0.2..0.2), rng.random_range(-0.15..0.15), r)),
        color: [200, 200, 200],
        graspable: true,
        joint: None,
    });
    // one tilted box so faces are not all axis aligned in the camera frame
    world.objects.push(SceneObject {
        id: "tilted".into(),
        shape: Shape::Box { half_extents: [0.03, 0.05, 0.02] },
        pose: Pose::new(
            Vec3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.2..0.2), 0.08),
            Quat::from_axis_angle(unit(&mut rng), rng.random_range(0.2..1.2)),
        ),
        color: [30, 90, 60],
        graspable: true,
        joint: None,
    });
    world
}

fn lifter_suite(out: &mut Vec<Outcome>) {
    let (mut pixels, mut worst_proj, mut worst_surface, mut hidden) = (0usize, 0.0f64, 0.0f64, 0usize);
    let mut failures = 0usize;
    for s in 0..LIFT_SCENES {
        let world = lift_scene(900 + s as u64);
        let frame = render(&world);
        let cam = world.camera;
        for v in 0..cam.height {
            for u in 0..cam.width {
                if frame.depth.get(u as i64, v as i64).is_none() {
                    continue;
                }
                pixels += 1;
                let kp = Keypoint2::new(u as f64, v as f64, KeypointRole::Waypoint);
                let Ok(p) = cam.lift(&kp, &frame.depth) else {
                    failures += 1;
                    continue;
                };
                match cam.project_world(p) {
                    Ok((pu, pv)) => worst_proj = worst_proj.max((pu - u as f64).abs().max((pv - v as f64).abs())),
                    Err(_) => failures += 1,
                }
                let mut nearest = f64::INFINITY;
                for o in &world.objects {
                    let d = sdf(&o.shape, o.pose.isometry().inverse_transform_point(p));
                    nearest = nearest.min(d.abs());
                    if d < -SURFACE_TOL {
                        hidden += 1;
                    }
                }
                if let Some(plane) = &world.support {
                    nearest = nearest.min((p.z - plane.height).abs());
                    if p.z < plane.height - SURFACE_TOL {
                        hidden += 1;
                    }
                }
                worst_surface = worst_surface.max(nearest);
            }
        }
    }
    out.push(report(
        "lifter-round-trip",
        failures == 0 && hidden == 0 && worst_proj <= REPROJECT_TOL && worst_surface <= SURFACE_TOL,
        format!(
            "{LIFT_SCENES} scenes, {pixels} finite pixels; worst reprojection {worst_proj:.1e} px (<= {REPROJECT_TOL:e}), worst surface distance {worst_surface:.1e} m (<= {SURFACE_TOL:e}), {hidden} points inside solids, {failures} lift failures"
        ),
    ));
}

const GOLDEN: [&str; 5] = ["move", "rotate", "pick", "open_drawer", "close_drawer"];

fn golden_suite(out: &mut Vec<Outcome>) {
    let palette = default_palette();
    let dir = std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("assets/golden");
    let t0 = Instant::now();
    let mut lines = Vec::new();
    let mut pass = true;
    for name in GOLDEN {
        let scene = std::fs::read_to_string(dir.join(format!("{name}.scene.json"))).expect("golden scene");
        let script: SketchScript =
            serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{name}.sketch.json"))).expect("golden sketch"))
                .expect("sketch parses");
        let world = WorldState::from_json(&scene, &palette, 100.0).expect("golden scene validates");
        let (annotated, _) = render_sketch(&render(&world).image, &script, &palette).expect("sketch renders");
        let runs: Vec<_> = (0..2).map(|_| run_episode(&world, &annotated, &PipelineConfig::default())).collect();
        match (&runs[0], &runs[1]) {
            (Ok(a), Ok(b)) => {
                let identical = a == b && a.execution.trace.to_ndjson() == b.execution.trace.to_ndjson();
                let ok = a.evaluation.success && a.evaluation.alignment >= GOLDEN_MIN_ALIGNMENT && identical;
                pass &= ok;
                lines.push(format!(
                    "{name} success={} alignment={:.3} identical={identical}",
                    a.evaluation.success, a.evaluation.alignment
                ));
            }
            (Err(e), _) | (_, Err(e)) => {
                pass = false;
                lines.push(format!("{name} error {e}"));
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    out.push(report(
        "golden-end-to-end",
        pass && secs <= GOLDEN_MAX_SECS,
        format!("{}; alignment >= {GOLDEN_MIN_ALIGNMENT}, two runs each in {secs:.2} s (<= {GOLDEN_MAX_SECS})", lines.join(", ")),
    ));
}

fn multi_step_suite(out: &mut Vec<Outcome>) {
    let palette = default_palette();
    let cfg = SamplerConfig { single_step_fraction: 0.0, max_steps: 3, ..geometric_sampler() };
    let pipeline = PipelineConfig::default();
    let eps = pipeline.exec.policy.eps_trans;
    let (mut checked, mut index, mut errors, mut three) = (0usize, 0usize, Vec::new(), 0usize);
    let mut worst_gap = 0.0f64;
    let mut transits = 0usize;
    while checked < MULTI_STEP_SKETCHES && index < 10 * MULTI_STEP_SKETCHES {
        let g = generate_record(&[], &cfg, &palette, 31, index).expect("record generates");
        index += 1;
        let n = g.record.step_count();
        if n < 2 {
            continue;
        }
        checked += 1;
        three += usize::from(n == 3);
        let ep = match run_episode(&g.world, &g.annotated[0], &pipeline) {
            Ok(ep) => ep,
            Err(e) => {
                errors.push(format!("record {}: {e}", g.record.id));
                continue;
            }
        };
        let ex = &ep.execution;
        if ex.steps.len() != n {
            errors.push(format!("record {}: {} of {n} steps executed", g.record.id, ex.steps.len()));
        }
        let ordered_events = ex.events.windows(2).all(|w| w[0].step <= w[1].step && w[0].tick <= w[1].tick);
        let ordered_ticks = ex.trace.records.windows(2).all(|w| w[0].step <= w[1].step && w[0].tick < w[1].tick);
        if !(ordered_events && ordered_ticks) {
            errors.push(format!("record {}: events or ticks interleave across steps", g.record.id));
        }
        for j in 1..ex.steps.len() {
            let ordinal = ex.steps[j].ordinal;
            let before = ex.trace.records.iter().rev().find(|r| r.step < ordinal);
            let first = ex.trace.records.iter().find(|r| r.step == ordinal);
            let (Some(before), Some(first)) = (before, first) else {
                errors.push(format!("record {}: step {ordinal} has no preceding ticks", g.record.id));
                continue;
            };
            transits += 1;
            if !first.transit {
                errors.push(format!("record {}: step {ordinal} does not open with a transit", g.record.id));
            }
            let gap = Vec3::from_array(before.position).distance(ex.steps[j - 1].endpoint);
            worst_gap = worst_gap.max(gap);
            if gap > eps {
                errors.push(format!("record {}: transit into step {ordinal} starts {gap:.4} m from the endpoint", g.record.id));
            }
        }
    }
    for e in errors.iter().take(5) {
        eprintln!("  multi-step: {e}");
    }
    out.push(report(
        "multi-step-ordering",
        checked == MULTI_STEP_SKETCHES && errors.is_empty(),
        format!(
            "{checked} sketches ({three} with 3 steps), {transits} transits, worst start gap {worst_gap:.4} m (<= eps {eps}), {} violations",
            errors.len()
        ),
    ));
}

fn sample(role: KeypointRole, offset: Option<(f64, f64)>) -> KeypointSample {
    KeypointSample {
        record: "fixture".into(),
        symbol: 0,
        role,
        truth: [100.0, 200.0],
        prediction: offset.map(|(du, dv)| [100.0 + du, 200.0 + dv]),
    }
}

fn metric_suite(out: &mut Vec<Outcome>) {
    use KeypointRole::{Center, End, Start, Waypoint};
    let at = |d: f64| Some((d, 0.0));
    let rep = |role, ds: &[Option<(f64, f64)>]| ds.iter().map(|d| sample(role, *d)).collect::<Vec<_>>();
    let cat = |parts: Vec<Vec<KeypointSample>>| parts.into_iter().flatten().collect::<Vec<_>>();
    // (samples, threshold, MD, mAP): hand-computed
    let mut nine_and_one = rep(End, &[at(0.0); 9]);
    nine_and_one.push(sample(End, at(60.0)));
    let cases: Vec<(&str, Vec<KeypointSample>, f64, Option<f64>, f64)> = vec![
        ("exact", cat(vec![rep(Start, &[at(0.0); 2]), rep(End, &[at(0.0); 2])]), 50.0, Some(0.0), 1.0),
        ("one far among ten", nine_and_one, 50.0, Some(6.0), 0.9),
        ("3-4-5 and axis offsets", rep(Start, &[Some((3.0, 4.0)), at(10.0), at(-20.0)]), 15.0, Some(35.0 / 3.0), 2.0 / 3.0),
        ("missing predictions", rep(Start, &[at(0.0), None, None, at(8.0)]), 50.0, Some(4.0), 0.5),
        (
            "per-role averaging",
            cat(vec![rep(Start, &[at(0.0); 2]), rep(End, &[at(100.0), at(0.0), at(0.0), at(0.0)])]),
            50.0,
            Some(100.0 / 6.0),
            0.875,
        ),
        ("threshold inclusive", rep(Center, &[at(50.0), at(51.0)]), 50.0, Some(50.5), 0.5),
        ("nothing predicted", rep(End, &[None, None]), 50.0, None, 0.0),
        (
            "three roles",
            cat(vec![rep(Start, &[at(10.0)]), rep(Waypoint, &[at(70.0)]), rep(End, &[at(30.0)])]),
            50.0,
            Some(110.0 / 3.0),
            2.0 / 3.0,
        ),
        (
            "three roles, tight threshold",
            cat(vec![rep(Start, &[at(10.0)]), rep(Waypoint, &[at(70.0)]), rep(End, &[at(30.0)])]),
            10.0,
            Some(110.0 / 3.0),
            1.0 / 3.0,
        ),
    ];
    let mut wrong = Vec::new();
    for (name, samples, t, md, map) in &cases {
        match keypoint_metrics(samples, *t) {
            Ok(r) if r.mean_distance == *md && r.map == *map => {}
            Ok(r) => wrong.push(format!("{name}: MD {:?} mAP {} (want {md:?}, {map})", r.mean_distance, r.map)),
            Err(e) => wrong.push(format!("{name}: {e}")),
        }
    }
    let empty_ok = keypoint_metrics(&[], 50.0) == Err(EvalError::EmptyGroundTruth);
    if !empty_ok {
        wrong.push("empty ground truth accepted".into());
    }
    let thresholds = [10.0, 25.0, 50.0, 100.0];
    let mut series: Vec<Vec<f64>> = cases
        .iter()
        .map(|(_, s, _, _, _)| thresholds.iter().map(|t| keypoint_metrics(s, *t).expect("non-empty").map).collect())
        .collect();
    if let Some(real) = MONOTONE_REAL.with(|m| m.borrow().clone()) {
        series.push(real);
    }
    let monotone = series.iter().all(|m| m.windows(2).all(|w| w[0] <= w[1]));
    for w in &wrong {
        eprintln!("  metrics: {w}");
    }
    let real = series.last().map(|m| m.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join("/")).unwrap_or_default();
    out.push(report(
        "metric-arithmetic",
        wrong.is_empty() && monotone,
        format!(
            "{} fixture cases exact ({} mismatches); mAP monotone over {{10, 25, 50, 100}} px: {monotone} (loose parser: {real})",
            cases.len() + 1,
            wrong.len()
        ),
    ));
}

fn main() -> ExitCode {
    let t0 = Instant::now();
    let mut out = Vec::new();
    parser_suites(&mut out);
    policy_suite(&mut out);
    lifter_suite(&mut out);
    golden_suite(&mut out);
    multi_step_suite(&mut out);
    metric_suite(&mut out);
    let failed: Vec<&str> = out.iter().filter(|o| !o.pass).map(|o| o.name).collect();
    println!("acceptance: {} of {} criteria pass in {:.1} s", out.len() - failed.len(), out.len(), t0.elapsed().as_secs_f64());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        for o in out.iter().filter(|o| !o.pass) {
            eprintln!("failed {}: {}", o.name, o.detail);
        }
        ExitCode::FAILURE
    }
}
