//! Independent oracles shared by the integration tests and the acceptance
//! harness. Nothing here calls into the crate's geometry helpers.
#![allow(dead_code)]

use beamprint::geometry::{Point2, Rect};
use beamprint::learner::{mmse_loss, ConvSpec, Mode, Network, NetworkSpec};
use beamprint::scene::{Building, Scene};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const C: f64 = 299_792_458.0;
const HALF: f64 = 60.0;

fn sub(a: Point2, b: Point2) -> (f64, f64) {
    (a.x - b.x, a.y - b.y)
}

fn cross(a: (f64, f64), b: (f64, f64)) -> f64 {
    a.0 * b.1 - a.1 * b.0
}

fn dist(a: Point2, b: Point2) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Reflection of `p` across the infinite line through `a` and `b`.
pub fn reflect(p: Point2, a: Point2, b: Point2) -> Point2 {
    let (dx, dy) = sub(b, a);
    let len2 = dx * dx + dy * dy;
    let t = ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2;
    let foot = Point2::new(a.x + t * dx, a.y + t * dy);
    Point2::new(2.0 * foot.x - p.x, 2.0 * foot.y - p.y)
}

/// Winding number of `p` around a closed polygon.
pub fn winding(poly: &[Point2], p: Point2) -> i32 {
    let mut w = 0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let side = cross(sub(b, a), sub(p, a));
        if a.y <= p.y {
            if b.y > p.y && side > 0.0 {
                w += 1;
            }
        } else if b.y <= p.y && side < 0.0 {
            w -= 1;
        }
    }
    w
}

fn dist_to_segment(p: Point2, a: Point2, b: Point2) -> f64 {
    let (dx, dy) = sub(b, a);
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
    dist(p, Point2::new(a.x + t * dx, a.y + t * dy))
}

pub fn boundary_distance(poly: &[Point2], p: Point2) -> f64 {
    (0..poly.len())
        .map(|i| dist_to_segment(p, poly[i], poly[(i + 1) % poly.len()]))
        .fold(f64::INFINITY, f64::min)
}

/// Strictly inside by winding number and at least `eps` from the boundary.
pub fn strictly_inside(poly: &[Point2], p: Point2, eps: f64) -> bool {
    winding(poly, p) != 0 && boundary_distance(poly, p) > eps
}

/// Splits `p→q` at every boundary crossing and probes each piece's midpoint.
pub fn leg_blocked(poly: &[Point2], p: Point2, q: Point2) -> bool {
    let d = sub(q, p);
    let mut ts = vec![0.0, 1.0];
    for i in 0..poly.len() {
        let a = poly[i];
        let e = sub(poly[(i + 1) % poly.len()], a);
        let den = cross(d, e);
        let ap = sub(a, p);
        if den.abs() < 1e-15 {
            if cross(ap, d).abs() < 1e-12 {
                let dd = d.0 * d.0 + d.1 * d.1;
                for v in [a, poly[(i + 1) % poly.len()]] {
                    let t = ((v.x - p.x) * d.0 + (v.y - p.y) * d.1) / dd;
                    if (0.0..=1.0).contains(&t) {
                        ts.push(t);
                    }
                }
            }
            continue;
        }
        let t = cross(ap, e) / den;
        let s = cross(ap, d) / den;
        if (0.0..=1.0).contains(&t) && (-1e-12..=1.0 + 1e-12).contains(&s) {
            ts.push(t);
        }
    }
    ts.sort_by(f64::total_cmp);
    ts.windows(2).any(|w| {
        if w[1] - w[0] < 1e-12 {
            return false;
        }
        let m = 0.5 * (w[0] + w[1]);
        strictly_inside(poly, Point2::new(p.x + m * d.0, p.y + m * d.1), 1e-9)
    })
}

pub struct OraclePath {
    pub walls: Vec<usize>,
    pub length: f64,
}

struct OracleWall {
    a: Point2,
    b: Point2,
}

fn oracle_walls(scene: &Scene) -> Vec<OracleWall> {
    let mut out = Vec::new();
    for b in scene.buildings() {
        let v = b.vertices();
        for i in 0..v.len() {
            out.push(OracleWall {
                a: v[i],
                b: v[(i + 1) % v.len()],
            });
        }
    }
    out
}

fn outside_of(w: &OracleWall, p: Point2) -> bool {
    // counter-clockwise footprints: outside is to the right of a→b
    cross(sub(w.b, w.a), sub(p, w.a)) < -1e-9
}

fn unobstructed(polys: &[Vec<Point2>], p: Point2, q: Point2) -> bool {
    !polys.iter().any(|poly| leg_blocked(poly, p, q))
}

/// Every specular path with at most `max_bounces` reflections, found by
/// enumerating all wall sequences and validating each one geometrically.
pub fn brute_force_paths(scene: &Scene, rx: Point2, max_bounces: usize) -> Vec<OraclePath> {
    let walls = oracle_walls(scene);
    let polys: Vec<Vec<Point2>> = scene
        .buildings()
        .iter()
        .map(|b| b.vertices().to_vec())
        .collect();
    let tx = scene.tx_position();
    let mut out = Vec::new();
    let mut seq = Vec::new();
    enumerate(&walls, &polys, tx, rx, max_bounces, &mut seq, &mut out);
    out
}

fn enumerate(
    walls: &[OracleWall],
    polys: &[Vec<Point2>],
    tx: Point2,
    rx: Point2,
    max_bounces: usize,
    seq: &mut Vec<usize>,
    out: &mut Vec<OraclePath>,
) {
    if let Some(len) = validate_sequence(walls, polys, tx, rx, seq) {
        out.push(OraclePath {
            walls: seq.clone(),
            length: len,
        });
    }
    if seq.len() == max_bounces {
        return;
    }
    for w in 0..walls.len() {
        if seq.last() == Some(&w) {
            continue;
        }
        seq.push(w);
        enumerate(walls, polys, tx, rx, max_bounces, seq, out);
        seq.pop();
    }
}

fn validate_sequence(
    walls: &[OracleWall],
    polys: &[Vec<Point2>],
    tx: Point2,
    rx: Point2,
    seq: &[usize],
) -> Option<f64> {
    let mut images = vec![tx];
    for &w in seq {
        let prev = *images.last().unwrap();
        images.push(reflect(prev, walls[w].a, walls[w].b));
    }
    let mut points = vec![rx];
    let mut target = rx;
    for j in (0..seq.len()).rev() {
        let w = &walls[seq[j]];
        let img = images[j + 1];
        let d = sub(img, target);
        let e = sub(w.b, w.a);
        let den = cross(d, e);
        if den.abs() < 1e-15 {
            return None;
        }
        let aw = sub(w.a, target);
        let t = cross(aw, e) / den;
        let s = cross(aw, d) / den;
        if !(t > 0.0 && t < 1.0 && s > 1e-9 && s < 1.0 - 1e-9) {
            return None;
        }
        target = Point2::new(w.a.x + s * e.0, w.a.y + s * e.1);
        points.push(target);
    }
    points.push(tx);
    points.reverse();
    for (j, &w) in seq.iter().enumerate() {
        let wall = &walls[w];
        if !outside_of(wall, points[j]) || !outside_of(wall, points[j + 2]) {
            return None;
        }
    }
    let mut length = 0.0;
    for leg in points.windows(2) {
        if !unobstructed(polys, leg[0], leg[1]) {
            return None;
        }
        length += dist(leg[0], leg[1]);
    }
    (length > 1e-9).then_some(length)
}

/// Rotated rectangle with counter-clockwise vertices.
pub fn rotated_rect(center: Point2, half_w: f64, half_h: f64, angle: f64) -> Vec<Point2> {
    let (s, c) = angle.sin_cos();
    [
        (-half_w, -half_h),
        (half_w, -half_h),
        (half_w, half_h),
        (-half_w, half_h),
    ]
    .iter()
    .map(|&(x, y)| Point2::new(center.x + c * x - s * y, center.y + s * x + c * y))
    .collect()
}

fn bbox(poly: &[Point2]) -> (f64, f64, f64, f64) {
    poly.iter().fold(
        (
            f64::INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
        ),
        |(a, b, c, d), p| (a.min(p.x), b.min(p.y), c.max(p.x), d.max(p.y)),
    )
}

fn clear_of(polys: &[Vec<Point2>], p: Point2, margin: f64) -> bool {
    polys
        .iter()
        .all(|poly| winding(poly, p) == 0 && boundary_distance(poly, p) > margin)
}

/// Scene with up to `max_buildings` disjoint rotated rectangles in a 120 m square.
pub fn random_scene(rng: &mut ChaCha8Rng, max_buildings: usize) -> Scene {
    let half = HALF;
    loop {
        let n = rng.random_range(max_buildings.saturating_sub(1).max(1)..=max_buildings);
        let mut polys: Vec<Vec<Point2>> = Vec::new();
        let mut tries = 0;
        while polys.len() < n && tries < 200 {
            tries += 1;
            let c = Point2::new(rng.random_range(-40.0..40.0), rng.random_range(-40.0..40.0));
            let poly = rotated_rect(
                c,
                rng.random_range(4.0..18.0),
                rng.random_range(4.0..18.0),
                rng.random_range(0.0..std::f64::consts::PI),
            );
            let (x0, y0, x1, y1) = bbox(&poly);
            if x0 < -half || y0 < -half || x1 > half || y1 > half {
                continue;
            }
            let overlaps = polys.iter().any(|q| {
                let (a0, b0, a1, b1) = bbox(q);
                x0 < a1 + 1.0 && a0 < x1 + 1.0 && y0 < b1 + 1.0 && b0 < y1 + 1.0
            });
            if !overlaps {
                polys.push(poly);
            }
        }
        let tx = Point2::new(rng.random_range(-55.0..55.0), rng.random_range(-55.0..55.0));
        if !clear_of(&polys, tx, 0.5) {
            continue;
        }
        let buildings = polys
            .into_iter()
            .map(|v| Building::new(v, None).expect("valid rectangle"))
            .collect();
        return Scene::new(Rect::new(-half, -half, half, half), buildings, tx, 6.0)
            .expect("valid scene");
    }
}

/// Receiver strictly outdoors with a clearance margin.
pub fn random_outdoor_point(rng: &mut ChaCha8Rng, scene: &Scene) -> Point2 {
    let polys: Vec<Vec<Point2>> = scene
        .buildings()
        .iter()
        .map(|b| b.vertices().to_vec())
        .collect();
    loop {
        let p = Point2::new(rng.random_range(-55.0..55.0), rng.random_range(-55.0..55.0));
        if clear_of(&polys, p, 0.5) {
            return p;
        }
    }
}

/// Outcome of comparing tracer paths against the brute-force enumeration.
pub struct ImageComparison {
    pub receivers: usize,
    pub paths: usize,
    pub multi_bounce: usize,
    pub count_mismatches: usize,
    pub max_length_error: f64,
}

pub fn compare_with_oracle(
    scene_count: usize,
    rx_per_scene: usize,
    max_buildings: usize,
    seed: u64,
) -> ImageComparison {
    use beamprint::propagation::{TraceConfig, Tracer};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cmp = ImageComparison {
        receivers: 0,
        paths: 0,
        multi_bounce: 0,
        count_mismatches: 0,
        max_length_error: 0.0,
    };
    for _ in 0..scene_count {
        let scene = random_scene(&mut rng, max_buildings);
        let cfg = TraceConfig {
            max_bounces: 2,
            ..TraceConfig::for_scene(&scene)
        };
        let tracer = Tracer::new(&scene, cfg).unwrap();
        for _ in 0..rx_per_scene {
            let rx = random_outdoor_point(&mut rng, &scene);
            let mut got: Vec<(Vec<usize>, f64)> = tracer
                .trace(rx)
                .paths
                .into_iter()
                .map(|p| (p.walls, p.length))
                .collect();
            let mut want: Vec<(Vec<usize>, f64)> = brute_force_paths(&scene, rx, 2)
                .into_iter()
                .map(|p| (p.walls, p.length))
                .collect();
            got.sort_by(|a, b| a.0.cmp(&b.0));
            want.sort_by(|a, b| a.0.cmp(&b.0));
            cmp.receivers += 1;
            cmp.paths += want.len();
            cmp.multi_bounce += want.iter().filter(|w| w.0.len() == 2).count();
            let same_walls =
                got.len() == want.len() && got.iter().zip(&want).all(|(g, w)| g.0 == w.0);
            if !same_walls {
                cmp.count_mismatches += 1;
                continue;
            }
            for (g, w) in got.iter().zip(&want) {
                cmp.max_length_error = cmp.max_length_error.max((g.1 - w.1).abs());
            }
        }
    }
    cmp
}

/// Small random architecture and input dimensions for gradient checks.
pub fn random_architecture(rng: &mut ChaCha8Rng) -> (NetworkSpec, (usize, usize)) {
    let kernel = (rng.random_range(1..=2), rng.random_range(1..=3));
    let pool = (rng.random_range(1..=2), rng.random_range(1..=2));
    let dims = (
        kernel.0 + pool.0 * rng.random_range(1..=3),
        kernel.1 + pool.1 * rng.random_range(1..=3),
    );
    let spec = NetworkSpec {
        conv: ConvSpec {
            filters: rng.random_range(1..=3),
            kernel,
            pool,
        },
        hidden_layers: rng.random_range(1..=3),
        hidden_width: rng.random_range(2..=6),
        dropout_rate: 0.0,
    };
    (spec, dims)
}

/// Largest relative error between backprop and central differences over
/// every parameter, `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn gradient_check(
    spec: NetworkSpec,
    dims: (usize, usize),
    seed: u64,
    batch: usize,
    h: f64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37);
    let mut net = Network::<f64>::init(spec, dims, seed).unwrap();
    for t in net.params_mut().tensors_mut() {
        for v in t.iter_mut() {
            *v += rng.random_range(-0.05..0.05);
        }
    }
    let inputs = Array2::from_shape_fn((batch, dims.0 * dims.1), |_| rng.random_range(-1.0..1.0));
    let targets = Array2::from_shape_fn((batch, 2), |_| rng.random_range(-1.0..1.0));
    let cache = net.forward(inputs.view(), Mode::Eval).unwrap();
    let grads = net.backward(&cache, targets.view()).unwrap();
    let analytic: Vec<f64> = grads
        .tensors()
        .iter()
        .flat_map(|t| t.iter().copied())
        .collect();

    let loss = |n: &Network<f64>| {
        let out = n.forward(inputs.view(), Mode::Eval).unwrap().output;
        mmse_loss(out.view(), targets.view())
    };
    let mut worst = 0.0f64;
    let mut k = 0;
    let sizes: Vec<usize> = net.params().tensors().iter().map(|t| t.len()).collect();
    for (ti, size) in sizes.into_iter().enumerate() {
        for j in 0..size {
            let orig = net.params().tensors()[ti][j];
            net.params_mut().tensors_mut()[ti][j] = orig + h;
            let up = loss(&net);
            net.params_mut().tensors_mut()[ti][j] = orig - h;
            let down = loss(&net);
            net.params_mut().tensors_mut()[ti][j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
            k += 1;
        }
    }
    worst
}
