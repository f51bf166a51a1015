//! Deterministic 2D image-method ray tracer.
//!
//! Specular reflection paths are built by mirroring the transmitter across
//! sequences of building walls. The image tree depends only on the scene and
//! the transmitter, so [`Tracer`] builds it once and then answers any number
//! of receiver queries. Tree expansion is pruned by a conservative
//! illumination test (a child wall must be reachable through the parent's
//! wall window), which never discards a geometrically valid path.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::{mirror_across, segment_params, Point2, GEOM_EPS};
use crate::scene::{Scene, Wall};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Paths shorter than this have no defined far-field loss and are skipped.
const MIN_PATH_LENGTH: f64 = 1e-9;

/// Free-space (Friis) path loss in dB: `20 log10(4π d f / c)`.
pub fn free_space_loss(distance: f64, frequency: f64) -> Result<f64> {
    if !(distance > 0.0 && distance.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "distance {distance} m must be > 0"
        )));
    }
    if !(frequency > 0.0 && frequency.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "frequency {frequency} Hz must be > 0"
        )));
    }
    Ok(20.0 * (4.0 * std::f64::consts::PI * distance * frequency / SPEED_OF_LIGHT).log10())
}

fn fspl(distance: f64, frequency: f64) -> f64 {
    20.0 * (4.0 * std::f64::consts::PI * distance * frequency / SPEED_OF_LIGHT).log10()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceConfig {
    pub carrier_frequency: f64,
    pub max_bounces: usize,
    /// Per-bounce loss for walls without a building override.
    pub reflection_loss: f64,
}

impl TraceConfig {
    pub const DEFAULT_FREQUENCY_HZ: f64 = 28e9;
    pub const DEFAULT_MAX_BOUNCES: usize = 4;

    /// Defaults with the reflection loss taken from the scene.
    pub fn for_scene(scene: &Scene) -> Self {
        TraceConfig {
            carrier_frequency: Self::DEFAULT_FREQUENCY_HZ,
            max_bounces: Self::DEFAULT_MAX_BOUNCES,
            reflection_loss: scene.default_reflection_loss(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_frequency > 0.0 && self.carrier_frequency.is_finite()) {
            return Err(Error::InvalidParameter(
                "carrier frequency must be > 0".into(),
            ));
        }
        if !(self.reflection_loss >= 0.0 && self.reflection_loss.is_finite()) {
            return Err(Error::InvalidParameter(
                "reflection loss must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            carrier_frequency: Self::DEFAULT_FREQUENCY_HZ,
            max_bounces: Self::DEFAULT_MAX_BOUNCES,
            reflection_loss: crate::scene::DEFAULT_REFLECTION_LOSS_DB,
        }
    }
}

/// One propagation path from the transmitter to a receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct RayPath {
    /// Seconds.
    pub delay: f64,
    /// dB, excluding antenna gains and transmit power.
    pub path_gain: f64,
    /// Degrees in `[0, 360)`, direction of the first leg as seen from the transmitter.
    pub departure_azimuth: f64,
    /// Degrees in `[0, 360)`, direction of the last leg's origin as seen from the receiver.
    pub arrival_azimuth: f64,
    pub bounces: usize,
    /// Geometric length in meters.
    pub length: f64,
    /// Reflecting wall ids in propagation order.
    pub walls: Vec<usize>,
    /// Reflection points in propagation order.
    pub reflection_points: Vec<Point2>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LosClass {
    Los,
    Nlos,
    Indoor,
}

impl LosClass {
    pub fn as_str(self) -> &'static str {
        match self {
            LosClass::Los => "LOS",
            LosClass::Nlos => "NLOS",
            LosClass::Indoor => "INDOOR",
        }
    }
}

/// Open segment `a→b` does not pass through any building interior.
pub fn visibility(scene: &Scene, a: Point2, b: Point2) -> bool {
    scene
        .buildings()
        .iter()
        .all(|bld| !bld.footprint().segment_crosses_interior(a, b))
}

pub fn classify_los(scene: &Scene, rx: Point2) -> LosClass {
    if scene.is_indoor(rx) {
        LosClass::Indoor
    } else if visibility(scene, scene.tx_position(), rx) {
        LosClass::Los
    } else {
        LosClass::Nlos
    }
}

#[derive(Debug, Clone)]
struct ImageNode {
    image: Point2,
    wall: usize,
    parent: Option<usize>,
    depth: usize,
    /// Portion of the wall that rays from the image can pass through.
    window: (Point2, Point2),
}

/// Result of a receiver query.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceResult {
    pub paths: Vec<RayPath>,
    /// The receiver was strictly inside a building; `paths` is empty.
    pub indoor: bool,
}

/// Image tree for one scene and trace configuration.
#[derive(Debug, Clone)]
pub struct Tracer<'s> {
    scene: &'s Scene,
    cfg: TraceConfig,
    walls: Vec<Wall>,
    nodes: Vec<ImageNode>,
}

/// Clips the parameter interval of segment `a→b` to the half-plane
/// `f(p) >= -GEOM_EPS` where `f` is affine along the segment.
fn clip_affine(lo: &mut f64, hi: &mut f64, f0: f64, f1: f64) {
    let (f0, f1) = (f0 + GEOM_EPS, f1 + GEOM_EPS);
    let slope = f1 - f0;
    if slope == 0.0 {
        if f0 < 0.0 {
            *hi = *lo - 1.0;
        }
        return;
    }
    let root = -f0 / slope;
    if slope > 0.0 {
        *lo = lo.max(root);
    } else {
        *hi = hi.min(root);
    }
}

impl<'s> Tracer<'s> {
    pub fn new(scene: &'s Scene, cfg: TraceConfig) -> Result<Self> {
        cfg.validate()?;
        let walls = scene.walls();
        let mut tracer = Tracer {
            scene,
            cfg,
            walls,
            nodes: Vec::new(),
        };
        tracer.build_tree();
        Ok(tracer)
    }

    pub fn scene(&self) -> &Scene {
        self.scene
    }

    pub fn config(&self) -> &TraceConfig {
        &self.cfg
    }

    /// Number of image nodes (wall sequences) that survived pruning.
    pub fn image_count(&self) -> usize {
        self.nodes.len()
    }

    fn build_tree(&mut self) {
        if self.cfg.max_bounces == 0 {
            return;
        }
        let tx = self.scene.tx_position();
        for w in &self.walls {
            if w.front_distance(tx) > GEOM_EPS {
                self.nodes.push(ImageNode {
                    image: mirror_across(tx, w.start, w.end),
                    wall: w.id,
                    parent: None,
                    depth: 1,
                    window: (w.start, w.end),
                });
            }
        }
        let mut frontier = 0..self.nodes.len();
        for _ in 1..self.cfg.max_bounces {
            let next_start = self.nodes.len();
            for ni in frontier.clone() {
                let parent = self.nodes[ni].clone();
                for w in &self.walls {
                    if w.id == parent.wall {
                        continue;
                    }
                    if let Some(window) = self.child_window(&parent, w) {
                        self.nodes.push(ImageNode {
                            image: mirror_across(parent.image, w.start, w.end),
                            wall: w.id,
                            parent: Some(ni),
                            depth: parent.depth + 1,
                            window,
                        });
                    }
                }
            }
            frontier = next_start..self.nodes.len();
            if frontier.is_empty() {
                break;
            }
        }
    }

    /// Part of wall `w` reachable by rays from `parent.image` passing
    /// through the parent's window, or `None` if there is none.
    fn child_window(&self, parent: &ImageNode, w: &Wall) -> Option<(Point2, Point2)> {
        let img = parent.image;
        // rays must arrive on the outside face of w
        if w.front_distance(img) <= GEOM_EPS {
            return None;
        }
        let pw = &self.walls[parent.wall];
        let (wa, wb) = parent.window;
        // cone edges ordered counter-clockwise
        let (mut ea, mut eb) = (wa - img, wb - img);
        if ea.cross(eb) < 0.0 {
            std::mem::swap(&mut ea, &mut eb);
        }
        let (a, b) = (w.start, w.end);
        let (mut lo, mut hi) = (0.0, 1.0);
        // inside the cone iff cross(ea, p-img) >= 0 and cross(p-img, eb) >= 0
        let na = ea.norm();
        let nb = eb.norm();
        clip_affine(
            &mut lo,
            &mut hi,
            ea.cross(a - img) / na,
            ea.cross(b - img) / na,
        );
        clip_affine(
            &mut lo,
            &mut hi,
            (a - img).cross(eb) / nb,
            (b - img).cross(eb) / nb,
        );
        // beyond the parent wall, on its outside face
        clip_affine(&mut lo, &mut hi, pw.front_distance(a), pw.front_distance(b));
        let len = a.distance(b);
        if (hi - lo) * len <= GEOM_EPS {
            return None;
        }
        let d = b - a;
        Some((a + d * lo, a + d * hi))
    }

    fn wall_loss(&self, wall: usize) -> f64 {
        self.walls[wall]
            .reflection_loss_override
            .unwrap_or(self.cfg.reflection_loss)
    }

    /// Builds the path for `node` ending at `rx`, or `None` if invalid.
    fn realize(&self, node_index: usize, rx: Point2) -> Option<RayPath> {
        let node = &self.nodes[node_index];
        let last = &self.walls[node.wall];
        if last.front_distance(rx) <= GEOM_EPS {
            return None;
        }
        // quick reject: the final leg must cross the illuminated window
        let (ta, tb) = node.window;
        match segment_params(node.image, rx, ta, tb) {
            Some((t, u)) if t > 0.0 && t < 1.0 && (-1e-9..=1.0 + 1e-9).contains(&u) => {}
            _ => return None,
        }

        let mut chain = Vec::with_capacity(node.depth);
        let mut cur = Some(node_index);
        while let Some(i) = cur {
            chain.push(i);
            cur = self.nodes[i].parent;
        }
        // chain is last-bounce first
        let mut points_rev = Vec::with_capacity(chain.len());
        let mut target = rx;
        for &i in &chain {
            let n = &self.nodes[i];
            let w = &self.walls[n.wall];
            if w.front_distance(target) <= GEOM_EPS {
                return None;
            }
            let (t, u) = segment_params(n.image, target, w.start, w.end)?;
            if !(t > 0.0 && t < 1.0 && u > 0.0 && u < 1.0) {
                return None;
            }
            let wall_len = w.start.distance(w.end);
            if u * wall_len <= GEOM_EPS || (1.0 - u) * wall_len <= GEOM_EPS {
                return None;
            }
            let hit = w.start + (w.end - w.start) * u;
            points_rev.push(hit);
            target = hit;
        }
        let tx = self.scene.tx_position();
        // the first leg leaves the transmitter toward the front of the first wall
        let first = &self.walls[self.nodes[*chain.last().unwrap()].wall];
        if first.front_distance(tx) <= GEOM_EPS {
            return None;
        }

        let mut pts = Vec::with_capacity(points_rev.len() + 2);
        pts.push(tx);
        pts.extend(points_rev.iter().rev().copied());
        pts.push(rx);
        let mut length = 0.0;
        for leg in pts.windows(2) {
            let l = leg[0].distance(leg[1]);
            if l <= GEOM_EPS || !visibility(self.scene, leg[0], leg[1]) {
                return None;
            }
            length += l;
        }
        let walls: Vec<usize> = chain.iter().rev().map(|&i| self.nodes[i].wall).collect();
        let loss: f64 = walls.iter().map(|&w| self.wall_loss(w)).sum();
        let reflection_points: Vec<Point2> = pts[1..pts.len() - 1].to_vec();
        Some(RayPath {
            delay: length / SPEED_OF_LIGHT,
            path_gain: -fspl(length, self.cfg.carrier_frequency) - loss,
            departure_azimuth: (pts[1] - tx).azimuth_deg(),
            arrival_azimuth: (pts[pts.len() - 2] - rx).azimuth_deg(),
            bounces: walls.len(),
            length,
            walls,
            reflection_points,
        })
    }

    /// All paths to `rx`, sorted by delay, then bounce count, then wall sequence.
    pub fn trace(&self, rx: Point2) -> TraceResult {
        if self.scene.is_indoor(rx) {
            return TraceResult {
                paths: Vec::new(),
                indoor: true,
            };
        }
        let tx = self.scene.tx_position();
        let mut paths = Vec::new();
        let los_len = tx.distance(rx);
        if los_len > MIN_PATH_LENGTH && visibility(self.scene, tx, rx) {
            paths.push(RayPath {
                delay: los_len / SPEED_OF_LIGHT,
                path_gain: -fspl(los_len, self.cfg.carrier_frequency),
                departure_azimuth: (rx - tx).azimuth_deg(),
                arrival_azimuth: (tx - rx).azimuth_deg(),
                bounces: 0,
                length: los_len,
                walls: Vec::new(),
                reflection_points: Vec::new(),
            });
        }
        for i in 0..self.nodes.len() {
            if let Some(p) = self.realize(i, rx) {
                if p.length > MIN_PATH_LENGTH {
                    paths.push(p);
                }
            }
        }
        sort_paths(&mut paths);
        TraceResult {
            paths,
            indoor: false,
        }
    }
}

/// Canonical path order: ascending delay, then bounces, then wall sequence.
pub fn sort_paths(paths: &mut [RayPath]) {
    paths.sort_by(|a, b| {
        a.delay
            .total_cmp(&b.delay)
            .then(a.bounces.cmp(&b.bounces))
            .then_with(|| a.walls.cmp(&b.walls))
    });
}

/// One-shot trace. Prefer [`Tracer`] when querying many receivers.
pub fn trace_paths(scene: &Scene, rx: Point2, cfg: &TraceConfig) -> Result<TraceResult> {
    Ok(Tracer::new(scene, *cfg)?.trace(rx))
}

pub const PATH_CSV_HEADER: &str = "rx_x,rx_y,delay_s,path_gain_db,dep_az_deg,arr_az_deg,bounces";

/// Appends one CSV row per path (no header).
pub fn write_path_rows(out: &mut String, rx: Point2, paths: &[RayPath]) {
    for p in paths {
        let _ = writeln!(
            out,
            "{},{},{:e},{},{},{},{}",
            rx.x, rx.y, p.delay, p.path_gain, p.departure_azimuth, p.arrival_azimuth, p.bounces
        );
    }
}
