//! Cross sections of the tube rasterized onto masked uniform grids.
//!
//! A cross section is sampled on the lattice `(i·h, j·h)` centered at the
//! origin. A lattice point is an interior node iff it lies strictly inside
//! the shape. For every interior node we also record, per lattice direction,
//! either the neighbouring node or the fractional distance `θ ∈ (0, 1]` (in
//! units of `h`) at which the grid line leaves the shape. The operators in
//! [`crate::discretize`] use the latter for their boundary closure.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest wall fraction kept by the rasterizer. Walls closer than this to a
/// node are moved out to `THETA_MIN · h`.
pub const THETA_MIN: f64 = 1e-2;

/// Lattice directions in the order `+t2, -t2, +t3, -t3`.
pub const DIRECTIONS: [(i32, i32); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

/// Shape of the tube cross section `ω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeSpec {
    /// Unit disc.
    Disc,
    /// Elliptic disc `(1+ε)² t2² + t3² < 1`.
    Ellipse { eccentricity: f64 },
    /// Zigzag ribbon of the given level between radii ~1 and ~2.
    Ribbon {
        level: u32,
        #[serde(default = "default_ribbon_width")]
        width: f64,
    },
    /// Polygon with holes, membership by the even-odd rule over all rings.
    PolygonWithHoles {
        outer: Vec<[f64; 2]>,
        #[serde(default)]
        holes: Vec<Vec<[f64; 2]>>,
    },
}

pub fn default_ribbon_width() -> f64 {
    0.1
}

impl ShapeSpec {
    pub fn ribbon(level: u32) -> Self {
        ShapeSpec::Ribbon { level, width: default_ribbon_width() }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ShapeSpec::Disc => Ok(()),
            ShapeSpec::Ellipse { eccentricity } => {
                if !(eccentricity.is_finite() && *eccentricity >= 0.0) {
                    return Err(Error::InvalidSpec(format!(
                        "ellipse eccentricity must be finite and nonnegative, got {eccentricity}"
                    )));
                }
                Ok(())
            }
            ShapeSpec::Ribbon { level, width } => {
                if *level < 1 {
                    return Err(Error::InvalidSpec("ribbon level must be at least 1".into()));
                }
                if *level > 12 {
                    return Err(Error::InvalidSpec(format!("ribbon level {level} is too large")));
                }
                if !(*width > 0.0 && *width < 1.0) {
                    return Err(Error::InvalidSpec(format!(
                        "ribbon width must lie in (0, 1), got {width}"
                    )));
                }
                Ok(())
            }
            ShapeSpec::PolygonWithHoles { outer, holes } => {
                validate_ring(outer, "outer ring")?;
                for (k, hole) in holes.iter().enumerate() {
                    validate_ring(hole, &format!("hole {k}"))?;
                }
                Ok(())
            }
        }
    }

    /// Largest distance from the origin of a point of the closed shape.
    pub fn analytic_radius(&self) -> f64 {
        match self {
            ShapeSpec::Disc | ShapeSpec::Ellipse { .. } => 1.0,
            ShapeSpec::Ribbon { .. } => 2.0,
            ShapeSpec::PolygonWithHoles { outer, .. } => outer
                .iter()
                .map(|p| p[0].hypot(p[1]))
                .fold(0.0, f64::max),
        }
    }

    fn region(&self) -> Region {
        match self {
            ShapeSpec::Disc => Region::Ellipse { stretch: 1.0 },
            ShapeSpec::Ellipse { eccentricity } => Region::Ellipse { stretch: 1.0 + eccentricity },
            ShapeSpec::Ribbon { level, width } => {
                let (outer, inner) = ribbon_rings(*level, *width);
                Region::Polygon { rings: vec![outer, inner] }
            }
            ShapeSpec::PolygonWithHoles { outer, holes } => {
                let mut rings = vec![open_ring(outer)];
                rings.extend(holes.iter().map(|h| open_ring(h)));
                Region::Polygon { rings }
            }
        }
    }
}

/// Outer and inner zigzag rings of the level-`k` ribbon.
///
/// Both rings have one vertex on each ray at angle `jπ/2^{k+1}`,
/// `j = 0..2^{k+2}`. Even rays carry the far vertex (radius 2, or `2 - w`
/// for the inner ring) and odd rays the near one (radius 1, or `1 - w`).
pub fn ribbon_rings(level: u32, width: f64) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
    let rays = 1usize << (level + 2);
    let step = PI / (1u64 << (level + 1)) as f64;
    let ring = |far: f64, near: f64| -> Vec<[f64; 2]> {
        (0..rays)
            .map(|j| {
                let r = if j % 2 == 0 { far } else { near };
                let a = j as f64 * step;
                [r * a.cos(), r * a.sin()]
            })
            .collect()
    };
    (ring(2.0, 1.0), ring(2.0 - width, 1.0 - width))
}

fn open_ring(ring: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut r = ring.to_vec();
    if r.len() > 1 && r.first() == r.last() {
        r.pop();
    }
    r
}

fn validate_ring(ring: &[[f64; 2]], what: &str) -> Result<()> {
    let ring = open_ring(ring);
    let n = ring.len();
    if n < 3 {
        return Err(Error::InvalidSpec(format!("{what} needs at least 3 vertices, got {n}")));
    }
    if ring.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::InvalidSpec(format!("{what} has a non-finite vertex")));
    }
    for a in 0..n {
        let (p1, p2) = (ring[a], ring[(a + 1) % n]);
        if p1 == p2 {
            return Err(Error::InvalidSpec(format!("{what} has a repeated vertex at index {a}")));
        }
        for b in (a + 1)..n {
            // adjacent edges share a vertex
            if b == a + 1 || (a == 0 && b == n - 1) {
                continue;
            }
            let (q1, q2) = (ring[b], ring[(b + 1) % n]);
            if segments_intersect(p1, p2, q1, q2) {
                return Err(Error::InvalidSpec(format!(
                    "{what} is self-intersecting (edges {a} and {b})"
                )));
            }
        }
    }
    Ok(())
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn segments_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |a: [f64; 2], b: [f64; 2], p: [f64; 2], d: f64| {
        d == 0.0
            && p[0] >= a[0].min(b[0])
            && p[0] <= a[0].max(b[0])
            && p[1] >= a[1].min(b[1])
            && p[1] <= a[1].max(b[1])
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

/// Membership predicate and wall locator for a shape.
#[derive(Debug, Clone)]
enum Region {
    /// `(stretch·x)² + y² < 1`.
    Ellipse { stretch: f64 },
    Polygon { rings: Vec<Vec<[f64; 2]>> },
}

impl Region {
    fn contains(&self, x: f64, y: f64) -> bool {
        match self {
            Region::Ellipse { stretch } => (stretch * x).powi(2) + y * y < 1.0,
            Region::Polygon { rings } => {
                !rings.iter().any(|r| on_ring(r, x, y)) && rings.iter().fold(false, |acc, r| acc ^ in_ring(r, x, y))
            }
        }
    }

    fn bbox(&self) -> ([f64; 2], [f64; 2]) {
        match self {
            Region::Ellipse { stretch } => ([-1.0 / stretch, -1.0], [1.0 / stretch, 1.0]),
            Region::Polygon { rings } => {
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                for p in rings.iter().flatten() {
                    for k in 0..2 {
                        lo[k] = lo[k].min(p[k]);
                        hi[k] = hi[k].max(p[k]);
                    }
                }
                (lo, hi)
            }
        }
    }

    /// Fraction `θ ∈ (0, 1]` of the step `h·(dx, dy)` from the interior point
    /// `(x, y)` at which the boundary is first met.
    fn wall_fraction(&self, x: f64, y: f64, dx: f64, dy: f64, h: f64) -> f64 {
        let t = match self {
            Region::Ellipse { stretch } => {
                if dx != 0.0 {
                    let xb = (1.0 - y * y).max(0.0).sqrt() / stretch;
                    (dx * xb - x) * dx / h
                } else {
                    let yb = (1.0 - (stretch * x).powi(2)).max(0.0).sqrt();
                    (dy * yb - y) * dy / h
                }
            }
            Region::Polygon { rings } => {
                let p = [x, y];
                let q = [x + dx * h, y + dy * h];
                let mut best = 1.0_f64;
                for ring in rings {
                    let n = ring.len();
                    for a in 0..n {
                        if let Some(t) = ray_edge(p, q, ring[a], ring[(a + 1) % n]) {
                            best = best.min(t);
                        }
                    }
                }
                best
            }
        };
        t.clamp(THETA_MIN, 1.0)
    }
}

/// Parameter `t ∈ [0, 1]` where the segment `p→q` meets the edge `a→b`.
fn ray_edge(p: [f64; 2], q: [f64; 2], a: [f64; 2], b: [f64; 2]) -> Option<f64> {
    let r = [q[0] - p[0], q[1] - p[1]];
    let s = [b[0] - a[0], b[1] - a[1]];
    let denom = r[0] * s[1] - r[1] * s[0];
    if denom == 0.0 {
        return None;
    }
    let ap = [a[0] - p[0], a[1] - p[1]];
    let t = (ap[0] * s[1] - ap[1] * s[0]) / denom;
    let u = (ap[0] * r[1] - ap[1] * r[0]) / denom;
    ((0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u)).then_some(t)
}

/// True when `(x, y)` lies on an edge of the ring (up to rounding).
fn on_ring(ring: &[[f64; 2]], x: f64, y: f64) -> bool {
    let n = ring.len();
    (0..n).any(|i| {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        let (ex, ey) = (b[0] - a[0], b[1] - a[1]);
        let len2 = ex * ex + ey * ey;
        let cross = (x - a[0]) * ey - (y - a[1]) * ex;
        let along = (x - a[0]) * ex + (y - a[1]) * ey;
        cross.abs() <= 1e-12 * len2 && along >= -1e-12 * len2 && along <= len2 * (1.0 + 1e-12)
    })
}

/// Even-odd point-in-ring test.
fn in_ring(ring: &[[f64; 2]], x: f64, y: f64) -> bool {
    let n = ring.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = (ring[i][0], ring[i][1]);
        let (xj, yj) = (ring[j][0], ring[j][1]);
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// An interior lattice node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridNode {
    pub i: i32,
    pub j: i32,
    pub t2: f64,
    pub t3: f64,
}

/// What lies one lattice step away from a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Link {
    /// Another interior node (dense index).
    Node(usize),
    /// The boundary, met after the given fraction of a step.
    Wall(f64),
}

impl Link {
    /// Wall fraction, if this arm leaves the domain.
    pub fn wall(&self) -> Option<f64> {
        match *self {
            Link::Wall(t) => Some(t),
            Link::Node(_) => None,
        }
    }
}

/// A shape rasterized onto the lattice of spacing `h`.
#[derive(Debug, Clone)]
pub struct CrossSection {
    spec: ShapeSpec,
    h: f64,
    lo: [i32; 2],
    dims: [usize; 2],
    nodes: Vec<GridNode>,
    links: Vec<[Link; 4]>,
    lookup: Vec<u32>,
    radius: f64,
}

const NO_NODE: u32 = u32::MAX;

/// Rasterize `spec` with spacing `h`.
pub fn build_cross_section(spec: &ShapeSpec, h: f64) -> Result<CrossSection> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidArgument(format!("grid spacing must be positive, got {h}")));
    }
    spec.validate()?;
    let region = spec.region();
    let (blo, bhi) = region.bbox();
    let lo = [(blo[0] / h).floor() as i32 - 1, (blo[1] / h).floor() as i32 - 1];
    let hi = [(bhi[0] / h).ceil() as i32 + 1, (bhi[1] / h).ceil() as i32 + 1];
    let dims = [(hi[0] - lo[0] + 1) as usize, (hi[1] - lo[1] + 1) as usize];
    if dims[0].saturating_mul(dims[1]) > u32::MAX as usize / 2 {
        return Err(Error::InvalidArgument(format!("grid spacing {h} is too fine")));
    }

    let mut lookup = vec![NO_NODE; dims[0] * dims[1]];
    let mut nodes = Vec::new();
    // row-major: t3 rows outer, t2 inner
    for j in lo[1]..=hi[1] {
        for i in lo[0]..=hi[0] {
            let (t2, t3) = (i as f64 * h, j as f64 * h);
            if region.contains(t2, t3) {
                let slot = (j - lo[1]) as usize * dims[0] + (i - lo[0]) as usize;
                lookup[slot] = nodes.len() as u32;
                nodes.push(GridNode { i, j, t2, t3 });
            }
        }
    }
    if nodes.is_empty() {
        return Err(Error::EmptyMask { h });
    }

    let at = |i: i32, j: i32| -> Option<usize> {
        if i < lo[0] || i > hi[0] || j < lo[1] || j > hi[1] {
            return None;
        }
        let v = lookup[(j - lo[1]) as usize * dims[0] + (i - lo[0]) as usize];
        (v != NO_NODE).then_some(v as usize)
    };
    let links = nodes
        .iter()
        .map(|n| {
            DIRECTIONS.map(|(di, dj)| match at(n.i + di, n.j + dj) {
                Some(k) => Link::Node(k),
                None => Link::Wall(region.wall_fraction(n.t2, n.t3, di as f64, dj as f64, h)),
            })
        })
        .collect();
    let radius = nodes.iter().map(|n| n.t2.hypot(n.t3)).fold(0.0, f64::max);

    Ok(CrossSection { spec: spec.clone(), h, lo, dims, nodes, links, lookup, radius })
}

impl CrossSection {
    pub fn spec(&self) -> &ShapeSpec {
        &self.spec
    }

    /// Grid spacing `h`.
    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[GridNode] {
        &self.nodes
    }

    /// Neighbour links of node `k` in [`DIRECTIONS`] order.
    pub fn links(&self, k: usize) -> &[Link; 4] {
        &self.links[k]
    }

    /// Corners of the lattice window that was scanned.
    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        let hi = [
            self.lo[0] + self.dims[0] as i32 - 1,
            self.lo[1] + self.dims[1] as i32 - 1,
        ];
        (
            [self.lo[0] as f64 * self.h, self.lo[1] as f64 * self.h],
            [hi[0] as f64 * self.h, hi[1] as f64 * self.h],
        )
    }

    /// Dense index of lattice point `(i, j)`, if it is an interior node.
    pub fn index_of(&self, i: i32, j: i32) -> Option<usize> {
        let (ri, rj) = (i - self.lo[0], j - self.lo[1]);
        if ri < 0 || rj < 0 || ri as usize >= self.dims[0] || rj as usize >= self.dims[1] {
            return None;
        }
        let v = self.lookup[rj as usize * self.dims[0] + ri as usize];
        (v != NO_NODE).then_some(v as usize)
    }

    /// Largest node distance from the origin.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Node count times cell area.
    pub fn area(&self) -> f64 {
        self.nodes.len() as f64 * self.h * self.h
    }

    /// True when all four neighbours of node `k` are interior nodes.
    pub fn has_full_stencil(&self, k: usize) -> bool {
        self.links[k].iter().all(|l| matches!(l, Link::Node(_)))
    }

    /// True when every lattice point within `steps` steps (in each axis) of
    /// node `k` is an interior node.
    pub fn is_deep(&self, k: usize, steps: i32) -> bool {
        let n = self.nodes[k];
        (-steps..=steps).all(|di| (-steps..=steps).all(|dj| self.index_of(n.i + di, n.j + dj).is_some()))
    }

    /// Samples `g(t2, t3)` at every node.
    pub fn sample(&self, g: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|n| g(n.t2, n.t3)).collect()
    }

    /// Writes `i,j,t2,t3` rows, plus one column per extra field.
    pub fn write_csv<W: Write>(&self, mut w: W, fields: &[(&str, &[f64])]) -> Result<()> {
        write!(w, "i,j,t2,t3")?;
        for (name, values) in fields {
            if values.len() != self.len() {
                return Err(Error::InvalidArgument(format!(
                    "field {name} has {} values for {} nodes",
                    values.len(),
                    self.len()
                )));
            }
            write!(w, ",{name}")?;
        }
        writeln!(w)?;
        for (k, n) in self.nodes.iter().enumerate() {
            write!(w, "{},{},{:.17e},{:.17e}", n.i, n.j, n.t2, n.t3)?;
            for (_, values) in fields {
                write!(w, ",{:.17e}", values[k])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Largest node distance from the origin, the radius `d` of the cross section.
pub fn radius(cs: &CrossSection) -> f64 {
    cs.radius()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node_set(cs: &CrossSection) -> std::collections::BTreeSet<(i32, i32)> {
        cs.nodes().iter().map(|n| (n.i, n.j)).collect()
    }

    #[test]
    fn coarse_disc_has_nine_nodes() {
        let cs = build_cross_section(&ShapeSpec::Disc, 0.5).unwrap();
        let set = node_set(&cs);
        assert_eq!(set.len(), 9);
        assert!(set.contains(&(0, 0)));
        assert!(set.contains(&(1, 1)) && set.contains(&(-1, -1)));
        // (±1, 0)·h sits on the circle of radius 0.5, inside; (2, 0)·h is on the boundary
        assert!(!set.contains(&(2, 0)));
    }

    #[test]
    fn zero_eccentricity_ellipse_is_the_disc() {
        let d = build_cross_section(&ShapeSpec::Disc, 0.1).unwrap();
        let e = build_cross_section(&ShapeSpec::Ellipse { eccentricity: 0.0 }, 0.1).unwrap();
        assert_eq!(node_set(&d), node_set(&e));
    }

    #[test]
    fn ribbon_vertex_layout() {
        let (outer, inner) = ribbon_rings(1, 0.1);
        assert_eq!(outer.len(), 8);
        let far: Vec<_> = outer.iter().filter(|p| (p[0].hypot(p[1]) - 2.0).abs() < 1e-12).collect();
        let near: Vec<_> = outer.iter().filter(|p| (p[0].hypot(p[1]) - 1.0).abs() < 1e-12).collect();
        assert_eq!((far.len(), near.len()), (4, 4));
        for (j, p) in outer.iter().enumerate() {
            let angle = p[1].atan2(p[0]).rem_euclid(2.0 * PI);
            assert!((angle - j as f64 * PI / 4.0).abs() < 1e-12);
            let r = if j % 2 == 0 { 2.0 } else { 1.0 };
            assert!((p[0].hypot(p[1]) - r).abs() < 1e-12);
        }
        assert!((inner[0][0] - 1.9).abs() < 1e-12);
        assert!((inner[1][0].hypot(inner[1][1]) - 0.9).abs() < 1e-12);

        let (outer2, _) = ribbon_rings(2, 0.1);
        assert_eq!(outer2.len(), 16);
        let far2 = outer2.iter().filter(|p| (p[0].hypot(p[1]) - 2.0).abs() < 1e-12).count();
        assert_eq!(far2, 8);
    }

    #[test]
    fn radius_examples() {
        let h = 1.0 / 32.0;
        for spec in [ShapeSpec::Disc, ShapeSpec::Ellipse { eccentricity: 0.5 }] {
            let cs = build_cross_section(&spec, h).unwrap();
            assert!(cs.radius() <= 1.0 && cs.radius() >= 1.0 - h * 2f64.sqrt());
        }
        let cs = build_cross_section(&ShapeSpec::ribbon(1), h).unwrap();
        assert!(radius(&cs) <= 2.0 && radius(&cs) >= 2.0 - h * 2f64.sqrt() - 0.1);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let bad = [
            ShapeSpec::Ellipse { eccentricity: -0.1 },
            ShapeSpec::Ribbon { level: 0, width: 0.1 },
            ShapeSpec::Ribbon { level: 1, width: 1.0 },
            ShapeSpec::Ribbon { level: 1, width: 0.0 },
            ShapeSpec::PolygonWithHoles { outer: vec![[0.0, 0.0], [1.0, 0.0]], holes: vec![] },
            // bow tie
            ShapeSpec::PolygonWithHoles {
                outer: vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]],
                holes: vec![],
            },
        ];
        for spec in bad {
            assert!(matches!(build_cross_section(&spec, 0.1), Err(Error::InvalidSpec(_))), "{spec:?}");
        }
        assert!(matches!(
            build_cross_section(&ShapeSpec::Disc, -1.0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn tiny_polygon_is_empty() {
        let spec = ShapeSpec::PolygonWithHoles {
            outer: vec![[0.1, 0.1], [0.2, 0.1], [0.2, 0.2], [0.1, 0.2]],
            holes: vec![],
        };
        assert!(matches!(build_cross_section(&spec, 0.5), Err(Error::EmptyMask { .. })));
    }

    #[test]
    fn square_with_hole_uses_even_odd_rule() {
        let spec = ShapeSpec::PolygonWithHoles {
            outer: vec![[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0]],
            holes: vec![vec![[-0.3, -0.3], [0.3, -0.3], [0.3, 0.3], [-0.3, 0.3]]],
        };
        let cs = build_cross_section(&spec, 0.25).unwrap();
        assert!(cs.index_of(0, 0).is_none());
        assert!(cs.index_of(3, 3).is_some());
        // 7x7 lattice points strictly inside the square minus 3x3 inside the hole
        assert_eq!(cs.len(), 49 - 9);
    }

    #[test]
    fn wall_fractions_match_the_circle() {
        let h = 0.1;
        let cs = build_cross_section(&ShapeSpec::Disc, h).unwrap();
        let k = cs.index_of(9, 0).unwrap();
        match cs.links(k)[0] {
            Link::Wall(t) => assert!((t - 1.0).abs() < 1e-9, "{t}"),
            Link::Node(_) => panic!("expected a wall"),
        }
        let k = cs.index_of(0, 9).unwrap();
        match cs.links(k)[2] {
            Link::Wall(t) => assert!((t - 1.0).abs() < 1e-9),
            Link::Node(_) => panic!("expected a wall"),
        }
        // (7,7) is inside, (8,7) is not; the circle crosses at t2 = sqrt(1 - 0.49)
        let k = cs.index_of(7, 7).unwrap();
        match cs.links(k)[0] {
            Link::Wall(t) => assert!((t - ((1.0f64 - 0.49).sqrt() - 0.7) / h).abs() < 1e-9),
            Link::Node(_) => panic!("expected a wall"),
        }
        match cs.links(k)[1] {
            Link::Node(n) => assert_eq!(cs.nodes()[n].i, 6),
            Link::Wall(_) => panic!("(6,7) is inside"),
        }
    }

    #[test]
    fn wall_fractions_respect_reflections() {
        for spec in [ShapeSpec::Disc, ShapeSpec::Ellipse { eccentricity: 0.3 }] {
            let cs = build_cross_section(&spec, 1.0 / 16.0).unwrap();
            for (k, n) in cs.nodes().iter().enumerate() {
                let mirror_x = cs.index_of(-n.i, n.j).unwrap();
                let mirror_y = cs.index_of(n.i, -n.j).unwrap();
                assert_eq!(cs.links(k)[0].wall(), cs.links(mirror_x)[1].wall());
                assert_eq!(cs.links(k)[2].wall(), cs.links(mirror_y)[3].wall());
            }
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let cs = build_cross_section(&ShapeSpec::Disc, 0.5).unwrap();
        let mut buf = Vec::new();
        let f = vec![1.0; cs.len()];
        cs.write_csv(&mut buf, &[("f", &f)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "i,j,t2,t3,f");
        assert_eq!(lines.len(), 1 + cs.len());
    }
}
