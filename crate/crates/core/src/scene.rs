//! Urban scene geometry: building footprints, bounds, transmitter and
//! receiver grids, plus the text scene format and a procedural generator.
//!
//! Scene file format (UTF-8, one directive per line, `#` starts a comment):
//!
//! ```text
//! bounds x0 y0 x1 y1
//! tx x y
//! rloss dB
//! building x1 y1 x2 y2 ... [rloss=dB]
//! ```
//!
//! Building vertices are listed counter-clockwise. `rloss` is optional and
//! defaults to [`DEFAULT_REFLECTION_LOSS_DB`].

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{is_ccw_convex, ConvexPolygon, Point2, Rect, GEOM_EPS};

pub const DEFAULT_REFLECTION_LOSS_DB: f64 = 6.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Building {
    footprint: ConvexPolygon,
    pub reflection_loss_override: Option<f64>,
}

impl Building {
    /// Validates orientation and convexity.
    pub fn new(vertices: Vec<Point2>, reflection_loss_override: Option<f64>) -> Result<Self> {
        is_ccw_convex(&vertices).map_err(|r| Error::validation("building", r))?;
        if let Some(l) = reflection_loss_override {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::validation(
                    "building",
                    format!("reflection loss {l} dB must be >= 0"),
                ));
            }
        }
        Ok(Building {
            footprint: ConvexPolygon::new_unchecked(vertices),
            reflection_loss_override,
        })
    }

    /// Axis-aligned rectangle with CCW vertices starting at the lower-left corner.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        let r = Rect::new(x0, y0, x1, y1);
        Building::new(
            vec![
                r.min,
                Point2::new(r.max.x, r.min.y),
                r.max,
                Point2::new(r.min.x, r.max.y),
            ],
            None,
        )
    }

    pub fn vertices(&self) -> &[Point2] {
        self.footprint.vertices()
    }

    pub fn footprint(&self) -> &ConvexPolygon {
        &self.footprint
    }

    pub fn contains_strict(&self, p: Point2) -> bool {
        self.footprint.contains_strict(p)
    }
}

/// One reflecting building face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wall {
    pub id: usize,
    pub building: usize,
    pub start: Point2,
    pub end: Point2,
    /// Unit normal pointing out of the building.
    pub normal: Point2,
    pub reflection_loss_override: Option<f64>,
}

impl Wall {
    /// Signed distance of `p` from the wall line, positive outside the building.
    pub fn front_distance(&self, p: Point2) -> f64 {
        (p - self.start).dot(self.normal)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    bounds: Rect,
    buildings: Vec<Building>,
    tx_position: Point2,
    default_reflection_loss: f64,
}

impl Scene {
    pub fn new(
        bounds: Rect,
        buildings: Vec<Building>,
        tx_position: Point2,
        default_reflection_loss: f64,
    ) -> Result<Self> {
        let scene = Scene {
            bounds,
            buildings,
            tx_position,
            default_reflection_loss,
        };
        scene.validate()?;
        Ok(scene)
    }

    fn validate(&self) -> Result<()> {
        if !(self.bounds.width() > 0.0 && self.bounds.height() > 0.0) {
            return Err(Error::validation(
                "bounds",
                "must have positive width and height",
            ));
        }
        if !(self.default_reflection_loss >= 0.0 && self.default_reflection_loss.is_finite()) {
            return Err(Error::validation(
                "rloss",
                format!(
                    "default reflection loss {} dB must be >= 0",
                    self.default_reflection_loss
                ),
            ));
        }
        if !self.bounds.contains(self.tx_position) {
            return Err(Error::validation(
                "tx",
                "transmitter lies outside the bounds",
            ));
        }
        for (i, b) in self.buildings.iter().enumerate() {
            if let Some(v) = b.vertices().iter().position(|v| !self.bounds.contains(*v)) {
                return Err(Error::validation(
                    format!("building {i}"),
                    format!("vertex {v} lies outside the bounds"),
                ));
            }
            if b.contains_strict(self.tx_position) {
                return Err(Error::validation(
                    format!("building {i}"),
                    "transmitter lies inside the footprint",
                ));
            }
        }
        Ok(())
    }

    pub fn bounds(&self) -> Rect {
        self.bounds
    }

    pub fn buildings(&self) -> &[Building] {
        &self.buildings
    }

    pub fn tx_position(&self) -> Point2 {
        self.tx_position
    }

    pub fn default_reflection_loss(&self) -> f64 {
        self.default_reflection_loss
    }

    /// Index of the building strictly containing `p`, if any.
    pub fn building_containing(&self, p: Point2) -> Option<usize> {
        self.buildings.iter().position(|b| b.contains_strict(p))
    }

    pub fn is_indoor(&self, p: Point2) -> bool {
        self.building_containing(p).is_some()
    }

    /// All building faces, numbered building by building in vertex order.
    pub fn walls(&self) -> Vec<Wall> {
        let mut walls = Vec::new();
        for (bi, b) in self.buildings.iter().enumerate() {
            for (start, end) in b.footprint.edges() {
                let d = end - start;
                let len = d.norm();
                walls.push(Wall {
                    id: walls.len(),
                    building: bi,
                    start,
                    end,
                    normal: Point2::new(d.y / len, -d.x / len),
                    reflection_loss_override: b.reflection_loss_override,
                });
            }
        }
        walls
    }
}

/// Regular receiver grid, row-major with x varying fastest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverGrid {
    pub origin: Point2,
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
}

impl ReceiverGrid {
    pub fn new(origin: Point2, spacing: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "grid spacing {spacing} must be > 0"
            )));
        }
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidParameter(
                "grid counts must be positive".into(),
            ));
        }
        Ok(ReceiverGrid {
            origin,
            spacing,
            nx,
            ny,
        })
    }

    /// Grid that spans `bounds` with the given spacing, origin at the lower-left corner.
    pub fn covering(bounds: Rect, spacing: f64) -> Result<Self> {
        let nx = (bounds.width() / spacing + 1e-9).floor() as usize + 1;
        let ny = (bounds.height() / spacing + 1e-9).floor() as usize + 1;
        ReceiverGrid::new(bounds.min, spacing, nx, ny)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, ix: usize, iy: usize) -> Point2 {
        Point2::new(
            self.origin.x + ix as f64 * self.spacing,
            self.origin.y + iy as f64 * self.spacing,
        )
    }

    pub fn far_corner(&self) -> Point2 {
        self.point(self.nx - 1, self.ny - 1)
    }

    /// Row-major cell index of `p`, if it lies on a grid node (within 1e-6 of a spacing).
    pub fn index_of(&self, p: Point2) -> Option<usize> {
        let fx = (p.x - self.origin.x) / self.spacing;
        let fy = (p.y - self.origin.y) / self.spacing;
        let (ix, iy) = (fx.round(), fy.round());
        if (fx - ix).abs() > 1e-6 || (fy - iy).abs() > 1e-6 {
            return None;
        }
        if ix < 0.0 || iy < 0.0 || ix as usize >= self.nx || iy as usize >= self.ny {
            return None;
        }
        Some(iy as usize * self.nx + ix as usize)
    }

    pub fn check_inside(&self, bounds: Rect) -> Result<()> {
        let slack = |r: Rect| {
            Rect::new(
                r.min.x - GEOM_EPS,
                r.min.y - GEOM_EPS,
                r.max.x + GEOM_EPS,
                r.max.y + GEOM_EPS,
            )
        };
        let b = slack(bounds);
        if !b.contains(self.origin) || !b.contains(self.far_corner()) {
            return Err(Error::validation(
                "grid",
                "receiver grid extends beyond the scene bounds",
            ));
        }
        Ok(())
    }
}

/// Every grid point with a flag telling whether it is strictly inside a building.
pub fn receiver_positions(scene: &Scene, grid: &ReceiverGrid) -> Vec<(Point2, bool)> {
    let mut out = Vec::with_capacity(grid.len());
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let p = grid.point(ix, iy);
            out.push((p, scene.is_indoor(p)));
        }
    }
    out
}

fn parse_f64(tok: &str, line: usize, what: &str) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::parse(line, format!("{what}: expected a number, found `{tok}`")))?;
    if !v.is_finite() {
        return Err(Error::parse(
            line,
            format!("{what}: non-finite value `{tok}`"),
        ));
    }
    Ok(v)
}

/// Parses and validates a scene file.
pub fn load_scene(text: &str) -> Result<Scene> {
    let mut bounds = None;
    let mut tx = None;
    let mut rloss = None;
    let mut buildings = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let mut toks = content.split_whitespace();
        let keyword = toks.next().unwrap();
        let rest: Vec<&str> = toks.collect();
        match keyword {
            "bounds" => {
                if rest.len() != 4 {
                    return Err(Error::parse(line, "bounds takes 4 numbers: x0 y0 x1 y1"));
                }
                let v: Vec<f64> = rest
                    .iter()
                    .map(|t| parse_f64(t, line, "bounds"))
                    .collect::<Result<_>>()?;
                if bounds.replace(Rect::new(v[0], v[1], v[2], v[3])).is_some() {
                    return Err(Error::parse(line, "duplicate bounds"));
                }
            }
            "tx" => {
                if rest.len() != 2 {
                    return Err(Error::parse(line, "tx takes 2 numbers: x y"));
                }
                let p = Point2::new(
                    parse_f64(rest[0], line, "tx")?,
                    parse_f64(rest[1], line, "tx")?,
                );
                if tx.replace(p).is_some() {
                    return Err(Error::parse(line, "duplicate tx"));
                }
            }
            "rloss" => {
                if rest.len() != 1 {
                    return Err(Error::parse(line, "rloss takes 1 number"));
                }
                if rloss.replace(parse_f64(rest[0], line, "rloss")?).is_some() {
                    return Err(Error::parse(line, "duplicate rloss"));
                }
            }
            "building" => {
                let (coords, over) = match rest.last() {
                    Some(t) if t.starts_with("rloss=") => {
                        let v = parse_f64(&t["rloss=".len()..], line, "building rloss")?;
                        (&rest[..rest.len() - 1], Some(v))
                    }
                    _ => (&rest[..], None),
                };
                if coords.len() % 2 != 0 {
                    return Err(Error::parse(
                        line,
                        "building needs an even number of coordinates",
                    ));
                }
                let vals: Vec<f64> = coords
                    .iter()
                    .map(|t| parse_f64(t, line, "building"))
                    .collect::<Result<_>>()?;
                let verts = vals.chunks(2).map(|c| Point2::new(c[0], c[1])).collect();
                let index = buildings.len();
                let b = Building::new(verts, over).map_err(|e| match e {
                    Error::Validation { reason, .. } => {
                        Error::validation(format!("building {index} (line {line})"), reason)
                    }
                    other => other,
                })?;
                buildings.push(b);
            }
            other => return Err(Error::parse(line, format!("unknown directive `{other}`"))),
        }
    }

    let bounds = bounds.ok_or_else(|| Error::parse(0, "missing `bounds` line"))?;
    let tx = tx.ok_or_else(|| Error::parse(0, "missing `tx` line"))?;
    Scene::new(
        bounds,
        buildings,
        tx,
        rloss.unwrap_or(DEFAULT_REFLECTION_LOSS_DB),
    )
}

/// Canonical scene text. Numbers use the shortest representation that
/// parses back to the same `f64`, so `load_scene(&save_scene(s)) == s`.
pub fn save_scene(scene: &Scene) -> String {
    let mut out = String::from("# beamprint scene v1\n");
    let b = scene.bounds;
    let _ = writeln!(
        out,
        "bounds {} {} {} {}",
        b.min.x, b.min.y, b.max.x, b.max.y
    );
    let _ = writeln!(out, "tx {} {}", scene.tx_position.x, scene.tx_position.y);
    let _ = writeln!(out, "rloss {}", scene.default_reflection_loss);
    for bld in &scene.buildings {
        out.push_str("building");
        for v in bld.vertices() {
            let _ = write!(out, " {} {}", v.x, v.y);
        }
        if let Some(l) = bld.reflection_loss_override {
            let _ = write!(out, " rloss={l}");
        }
        out.push('\n');
    }
    out
}

/// Parameters of the Manhattan-grid generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManhattanParams {
    pub side: f64,
    pub block: f64,
    pub street: f64,
    pub jitter: f64,
}

impl ManhattanParams {
    pub fn validate(&self) -> Result<()> {
        let ManhattanParams {
            side,
            block,
            street,
            jitter,
        } = *self;
        if !(block > 0.0 && block.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "block {block} must be > 0"
            )));
        }
        if !(street > 0.0 && street.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "street {street} must be > 0"
            )));
        }
        if !(side.is_finite() && block + street <= side) {
            return Err(Error::InvalidParameter(format!(
                "block + street ({}) must not exceed side ({side})",
                block + street
            )));
        }
        if !(0.0..0.5).contains(&jitter) {
            return Err(Error::InvalidParameter(format!(
                "jitter {jitter} must be in [0, 0.5)"
            )));
        }
        Ok(())
    }
}

/// Procedural downtown: a square `side`×`side` scene centered on the
/// transmitter at the origin, with rectangular blocks separated by streets.
///
/// Street centerlines run through the origin every `block + street` meters,
/// so the transmitter always stands at a street crossing. Each block's width
/// and height are scaled by an independent factor in `[1-jitter, 1+jitter]`,
/// capped so that a block never grows more than `street/4` past its nominal
/// edges; neighbouring blocks therefore keep a gap of at least `street/2`.
pub fn generate_manhattan_scene(seed: u64, params: ManhattanParams) -> Result<Scene> {
    params.validate()?;
    let ManhattanParams {
        side,
        block,
        street,
        jitter,
    } = params;
    let half = side / 2.0;
    let bounds = Rect::new(-half, -half, half, half);
    let period = block + street;

    // cells k whose nominal block [kP + s/2, (k+1)P - s/2] fits inside [-half, half]
    let k_min = ((-half - street / 2.0) / period).ceil() as i64;
    let k_max = ((half + street / 2.0) / period).floor() as i64 - 1;
    let cells: Vec<f64> = (k_min..=k_max)
        .map(|k| k as f64 * period + street / 2.0)
        .filter(|lo| *lo >= -half - 1e-9 && lo + block <= half + 1e-9)
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_size = block + street / 2.0;
    let mut buildings = Vec::with_capacity(cells.len() * cells.len());
    for &y0 in &cells {
        for &x0 in &cells {
            let (w, h) = if jitter > 0.0 {
                let fx: f64 = rng.random_range(-1.0..=1.0);
                let fy: f64 = rng.random_range(-1.0..=1.0);
                (
                    (block * (1.0 + jitter * fx)).min(max_size),
                    (block * (1.0 + jitter * fy)).min(max_size),
                )
            } else {
                (block, block)
            };
            let (cx, cy) = (x0 + block / 2.0, y0 + block / 2.0);
            let bx0 = (cx - w / 2.0).max(-half);
            let bx1 = (cx + w / 2.0).min(half);
            let by0 = (cy - h / 2.0).max(-half);
            let by1 = (cy + h / 2.0).min(half);
            buildings.push(Building::rectangle(bx0, by0, bx1, by1)?);
        }
    }
    Scene::new(
        bounds,
        buildings,
        Point2::new(0.0, 0.0),
        DEFAULT_REFLECTION_LOSS_DB,
    )
}
