//! Combined heat and power unit: feasible operating region, projection, and
//! operating cost.
//!
//! The detailed model uses a non-convex polygon in (power, heat) space. The
//! polygon is split along the horizontal line through its single reflex
//! vertex into two convex sections, and each section is stored as a set of
//! half-planes generated from the published corner list. The simplified model
//! replaces the polygon with a fixed heat-to-power conversion line.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed on half-plane tests, in MW / MWt.
pub const FEASIBILITY_TOL: f64 = 1e-9;

const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub p: f64,
    pub h: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { p: 0.0, h: 0.0 };

    pub fn new(p: f64, h: f64) -> Self {
        Self { p, h }
    }

    fn sub(self, other: Point) -> Point {
        Point::new(self.p - other.p, self.h - other.h)
    }

    fn dist_sq(self, other: Point) -> f64 {
        let d = self.sub(other);
        d.p * d.p + d.h * d.h
    }
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    let u = a.sub(o);
    let v = b.sub(o);
    u.p * v.h - u.h * v.p
}

fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let a = poly[i];
            let b = poly[(i + 1) % n];
            a.p * b.h - b.p * a.h
        })
        .sum::<f64>()
        / 2.0
}

/// Closest point to `q` on the segment `[a, b]`.
fn project_on_segment(q: Point, a: Point, b: Point) -> Point {
    let d = b.sub(a);
    let len_sq = d.p * d.p + d.h * d.h;
    if len_sq <= DEGENERACY_TOL {
        return a;
    }
    let t = ((q.p - a.p) * d.p + (q.h - a.h) * d.h) / len_sq;
    let t = t.clamp(0.0, 1.0);
    Point::new(a.p + t * d.p, a.h + t * d.h)
}

/// `normal · x <= offset`, with a unit normal so the slack is a distance.
#[derive(Debug, Clone, Copy, PartialEq)]
struct HalfPlane {
    normal: Point,
    offset: f64,
}

impl HalfPlane {
    fn slack(&self, q: Point) -> f64 {
        self.offset - (self.normal.p * q.p + self.normal.h * q.h)
    }
}

/// A convex polygon, vertices in counter-clockwise order.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexSection {
    vertices: Vec<Point>,
    half_planes: Vec<HalfPlane>,
}

impl ConvexSection {
    fn new(vertices: Vec<Point>) -> Result<Self> {
        let vertices = simplify(vertices);
        if vertices.len() < 3 || signed_area(&vertices) <= DEGENERACY_TOL {
            return Err(Error::config("CHP region section has no area"));
        }
        let n = vertices.len();
        let mut half_planes = Vec::with_capacity(n);
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let c = vertices[(i + 2) % n];
            if cross(a, b, c) < -DEGENERACY_TOL {
                return Err(Error::config(
                    "CHP region section is not convex after splitting",
                ));
            }
            // Interior lies to the left of a CCW edge, so the outward normal
            // points to the right.
            let d = b.sub(a);
            let len = (d.p * d.p + d.h * d.h).sqrt();
            let normal = Point::new(d.h / len, -d.p / len);
            half_planes.push(HalfPlane {
                normal,
                offset: normal.p * a.p + normal.h * a.h,
            });
        }
        Ok(Self {
            vertices,
            half_planes,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn contains(&self, q: Point) -> bool {
        self.half_planes
            .iter()
            .all(|hp| hp.slack(q) >= -FEASIBILITY_TOL)
    }

    pub fn nearest(&self, q: Point) -> Point {
        if self.contains(q) {
            return q;
        }
        let n = self.vertices.len();
        (0..n)
            .map(|i| project_on_segment(q, self.vertices[i], self.vertices[(i + 1) % n]))
            .min_by(|a, b| a.dist_sq(q).total_cmp(&b.dist_sq(q)))
            .expect("section has vertices")
    }
}

/// Drop repeated points and interior points of straight runs.
fn simplify(points: Vec<Point>) -> Vec<Point> {
    let mut pts: Vec<Point> = Vec::with_capacity(points.len());
    for q in points {
        if pts
            .last()
            .is_none_or(|last| last.dist_sq(q) > DEGENERACY_TOL)
        {
            pts.push(q);
        }
    }
    while pts.len() > 1 && pts[0].dist_sq(pts[pts.len() - 1]) <= DEGENERACY_TOL {
        pts.pop();
    }
    let mut changed = true;
    while changed && pts.len() >= 3 {
        changed = false;
        let n = pts.len();
        for i in 0..n {
            let prev = pts[(i + n - 1) % n];
            let next = pts[(i + 1) % n];
            if cross(prev, pts[i], next).abs() <= 1e-9 {
                pts.remove(i);
                changed = true;
                break;
            }
        }
    }
    pts
}

/// Keep the part of `poly` with `sign * (h - level) >= 0` (Sutherland-Hodgman).
fn clip_horizontal(poly: &[Point], level: f64, sign: f64) -> Vec<Point> {
    let inside = |q: Point| sign * (q.h - level) >= -DEGENERACY_TOL;
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 2);
    for i in 0..n {
        let cur = poly[i];
        let next = poly[(i + 1) % n];
        match (inside(cur), inside(next)) {
            (true, true) => out.push(next),
            (true, false) | (false, true) => {
                let t = (level - cur.h) / (next.h - cur.h);
                let cut = Point::new(cur.p + t * (next.p - cur.p), level);
                out.push(cut);
                if inside(next) {
                    out.push(next);
                }
            }
            (false, false) => {}
        }
    }
    out
}

/// The non-convex feasible operating region given by its boundary corners.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleRegion {
    corners: Vec<Point>,
    sections: Vec<ConvexSection>,
}

impl FeasibleRegion {
    /// Build the region from its boundary corners (either orientation).
    ///
    /// Fails if corners repeat, three consecutive corners are collinear, any
    /// coordinate is negative, or the polygon cannot be split into at most
    /// two convex sections through a single reflex vertex.
    pub fn from_corners(corners: &[Point]) -> Result<Self> {
        if corners.len() < 3 {
            return Err(Error::config("CHP region needs at least three corners"));
        }
        if corners
            .iter()
            .any(|c| !c.p.is_finite() || !c.h.is_finite() || c.p < 0.0 || c.h < 0.0)
        {
            return Err(Error::config("CHP corners must be finite and nonnegative"));
        }
        let n = corners.len();
        for i in 0..n {
            let a = corners[i];
            let b = corners[(i + 1) % n];
            let c = corners[(i + 2) % n];
            if a.dist_sq(b) <= DEGENERACY_TOL {
                return Err(Error::config(format!(
                    "degenerate CHP polygon: duplicate corner ({}, {})",
                    a.p, a.h
                )));
            }
            if cross(a, b, c).abs() <= DEGENERACY_TOL {
                return Err(Error::config(format!(
                    "degenerate CHP polygon: collinear corners around ({}, {})",
                    b.p, b.h
                )));
            }
        }
        let mut ccw = corners.to_vec();
        if signed_area(&ccw) < 0.0 {
            ccw.reverse();
        }
        let reflex: Vec<usize> = (0..n)
            .filter(|&i| cross(ccw[(i + n - 1) % n], ccw[i], ccw[(i + 1) % n]) < 0.0)
            .collect();
        let sections = match reflex.as_slice() {
            [] => vec![ConvexSection::new(ccw.clone())?],
            [i] => {
                let level = ccw[*i].h;
                let lower = clip_horizontal(&ccw, level, -1.0);
                let upper = clip_horizontal(&ccw, level, 1.0);
                vec![ConvexSection::new(lower)?, ConvexSection::new(upper)?]
            }
            _ => return Err(Error::config(
                "CHP region has more than one reflex corner; two convex sections cannot cover it",
            )),
        };
        Ok(Self {
            corners: corners.to_vec(),
            sections,
        })
    }

    pub fn corners(&self) -> &[Point] {
        &self.corners
    }

    pub fn sections(&self) -> &[ConvexSection] {
        &self.sections
    }

    pub fn contains(&self, q: Point) -> bool {
        self.sections.iter().any(|s| s.contains(q))
    }

    pub fn nearest(&self, q: Point) -> Point {
        self.sections
            .iter()
            .map(|s| s.nearest(q))
            .min_by(|a, b| a.dist_sq(q).total_cmp(&b.dist_sq(q)))
            .expect("region has sections")
    }

    /// Largest power and heat over all corners.
    pub fn max_output(&self) -> Point {
        self.corners.iter().fold(Point::ORIGIN, |acc, c| {
            Point::new(acc.p.max(c.p), acc.h.max(c.h))
        })
    }
}

/// Fixed electric and thermal conversion efficiencies: output lies on the line
/// `H = (eta_heat / eta_power) * P` for fuel input within `[fuel_min, fuel_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedRatioRegion {
    pub eta_power: f64,
    pub eta_heat: f64,
    pub fuel_min: f64,
    pub fuel_max: f64,
}

impl FixedRatioRegion {
    /// Efficiencies chosen so the top of the line reaches `max_output`, with the
    /// lowest power output at `min_power`.
    pub fn matching_box(eta_power: f64, max_output: Point, min_power: f64) -> Result<Self> {
        if !(eta_power > 0.0 && eta_power <= 1.0) || max_output.p <= 0.0 || max_output.h < 0.0 {
            return Err(Error::config("invalid simplified CHP parameters"));
        }
        let eta_heat = eta_power * max_output.h / max_output.p;
        let region = Self {
            eta_power,
            eta_heat,
            fuel_min: min_power / eta_power,
            fuel_max: max_output.p / eta_power,
        };
        region.validate()?;
        Ok(region)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.eta_power > 0.0
            && self.eta_heat >= 0.0
            && self.eta_power + self.eta_heat <= 1.0 + 1e-12
            && self.fuel_min >= 0.0
            && self.fuel_max > self.fuel_min;
        if ok {
            Ok(())
        } else {
            Err(Error::config(
                "invalid simplified CHP efficiencies or fuel range",
            ))
        }
    }

    fn endpoints(&self) -> (Point, Point) {
        (
            Point::new(
                self.eta_power * self.fuel_min,
                self.eta_heat * self.fuel_min,
            ),
            Point::new(
                self.eta_power * self.fuel_max,
                self.eta_heat * self.fuel_max,
            ),
        )
    }

    pub fn contains(&self, q: Point) -> bool {
        let (a, b) = self.endpoints();
        project_on_segment(q, a, b).dist_sq(q).sqrt() <= FEASIBILITY_TOL
    }

    pub fn nearest(&self, q: Point) -> Point {
        let (a, b) = self.endpoints();
        project_on_segment(q, a, b)
    }

    pub fn max_output(&self) -> Point {
        self.endpoints().1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatingRegion {
    Detailed(FeasibleRegion),
    Simplified(FixedRatioRegion),
}

impl OperatingRegion {
    pub fn contains(&self, q: Point) -> bool {
        match self {
            OperatingRegion::Detailed(r) => r.contains(q),
            OperatingRegion::Simplified(r) => r.contains(q),
        }
    }

    pub fn nearest(&self, q: Point) -> Point {
        match self {
            OperatingRegion::Detailed(r) => r.nearest(q),
            OperatingRegion::Simplified(r) => r.nearest(q),
        }
    }

    pub fn max_output(&self) -> Point {
        match self {
            OperatingRegion::Detailed(r) => r.max_output(),
            OperatingRegion::Simplified(r) => r.max_output(),
        }
    }
}

/// Quadratic cost surface `a P^2 + b P + c + d H^2 + e H + f P H`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChpCostCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
}

impl ChpCostCoeffs {
    pub fn evaluate(&self, p: f64, h: f64) -> f64 {
        self.a * p * p + self.b * p + self.c + self.d * h * h + self.e * h + self.f * p * h
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChpUnit {
    pub region: OperatingRegion,
    pub cost: ChpCostCoeffs,
    pub committed: bool,
    /// The large constant of the mixed-integer region description. Not used by
    /// the geometric implementation; kept so configurations round-trip.
    pub big_m: f64,
}

impl ChpUnit {
    pub fn new(region: OperatingRegion, cost: ChpCostCoeffs) -> Result<Self> {
        if cost.a < 0.0 || cost.d < 0.0 {
            return Err(Error::config(
                "CHP cost coefficients a and d must be nonnegative",
            ));
        }
        Ok(Self {
            region,
            cost,
            committed: true,
            big_m: 1e4,
        })
    }

    pub fn with_commitment(mut self, committed: bool) -> Self {
        self.committed = committed;
        self
    }

    /// Whether `(p, h)` is an admissible operating point. An uncommitted unit
    /// only admits the origin.
    pub fn is_feasible(&self, p: f64, h: f64) -> bool {
        if !self.committed {
            return p.abs() <= FEASIBILITY_TOL && h.abs() <= FEASIBILITY_TOL;
        }
        self.region.contains(Point::new(p, h))
    }

    /// Euclidean-nearest admissible point; the origin when `commit` is false.
    pub fn project(&self, p_raw: f64, h_raw: f64, commit: bool) -> (f64, f64) {
        if !commit {
            return (0.0, 0.0);
        }
        let q = self.region.nearest(Point::new(p_raw, h_raw));
        (q.p, q.h)
    }

    /// Operating cost for the current commitment state. The no-load term only
    /// applies while committed.
    pub fn operating_cost(&self, p: f64, h: f64) -> f64 {
        if !self.committed {
            return 0.0;
        }
        self.cost.evaluate(p, h)
    }

    /// Largest power and heat over the region; with the origin this spans the
    /// bounding box the agent's raw setpoints are scaled onto.
    pub fn max_output(&self) -> Point {
        self.region.max_output()
    }
}
