//! Poisson point processes on circular windows.
//!
//! All sampling is a pure function of `(parameters, seed)`. Locations and
//! marks come from separate derived streams, so re-marking a user process
//! never moves its points.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, streams};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point<T> {
    #[inline]
    pub fn new(x: T, y: T) -> Self {
        Point { x, y }
    }

    #[inline]
    pub fn origin() -> Self {
        Point::new(T::zero(), T::zero())
    }

    #[inline]
    pub fn distance_sq(&self, other: &Point<T>) -> T {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    #[inline]
    pub fn distance(&self, other: &Point<T>) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    #[inline]
    pub fn translate(&self, by: Point<T>) -> Self {
        Point::new(self.x + by.x, self.y + by.y)
    }
}

/// Closed disk: a point at exactly `radius` from the center is inside.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircularWindow<T> {
    center: Point<T>,
    radius: T,
}

impl<T: Scalar> CircularWindow<T> {
    pub fn new(center: Point<T>, radius: T) -> Result<Self> {
        if !(radius > T::zero()) || !radius.is_finite() {
            return Err(Error::param("radius", format!("must be finite and > 0, got {radius}")));
        }
        Ok(CircularWindow { center, radius })
    }

    pub fn centered(radius: T) -> Result<Self> {
        Self::new(Point::origin(), radius)
    }

    #[inline]
    pub fn center(&self) -> Point<T> {
        self.center
    }

    #[inline]
    pub fn radius(&self) -> T {
        self.radius
    }

    #[inline]
    pub fn contains(&self, p: &Point<T>) -> bool {
        self.center.distance_sq(p) <= self.radius * self.radius
    }

    pub fn area(&self) -> T {
        T::PI() * self.radius * self.radius
    }

    pub fn diameter(&self) -> T {
        self.radius + self.radius
    }

    pub fn translated(&self, by: Point<T>) -> Self {
        CircularWindow {
            center: self.center.translate(by),
            radius: self.radius,
        }
    }
}

/// Ordered points inside a window, with optional uniform marks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSet<T> {
    window: CircularWindow<T>,
    points: Vec<Point<T>>,
    marks: Option<Vec<T>>,
    seed: u64,
}

impl<T: Scalar> PointSet<T> {
    pub fn new(window: CircularWindow<T>, points: Vec<Point<T>>, seed: u64) -> Result<Self> {
        // Allow a few ulps of slack for points produced by round-tripping text.
        let slack = window.radius * T::of(1e-12);
        if let Some(p) = points
            .iter()
            .find(|p| window.center.distance(p) > window.radius + slack)
        {
            return Err(Error::Data(format!(
                "point ({}, {}) lies outside the window of radius {}",
                p.x, p.y, window.radius
            )));
        }
        Ok(PointSet {
            window,
            points,
            marks: None,
            seed,
        })
    }

    pub fn empty(window: CircularWindow<T>, seed: u64) -> Self {
        PointSet {
            window,
            points: Vec::new(),
            marks: None,
            seed,
        }
    }

    pub fn with_marks(mut self, marks: Vec<T>) -> Result<Self> {
        validate_marks(&marks, self.points.len())?;
        self.marks = Some(marks);
        Ok(self)
    }

    #[inline]
    pub fn window(&self) -> &CircularWindow<T> {
        &self.window
    }

    #[inline]
    pub fn points(&self) -> &[Point<T>] {
        &self.points
    }

    #[inline]
    pub fn marks(&self) -> Option<&[T]> {
        self.marks.as_deref()
    }

    #[inline]
    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> Point<T> {
        self.points[i]
    }

    /// Inserts a point at the front of the list (index 0), shifting others.
    /// Used to plant the typical user; marks are dropped and must be redrawn.
    pub fn plant_front(&mut self, p: Point<T>) -> Result<()> {
        if !self.window.contains(&p) {
            return Err(Error::Data("planted point outside window".into()));
        }
        self.points.insert(0, p);
        self.marks = None;
        Ok(())
    }

    /// Processing order: increasing mark, ties broken by list index. Without
    /// marks this is list order.
    pub fn arrival_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.points.len()).collect();
        if let Some(marks) = &self.marks {
            order.sort_by(|&a, &b| {
                marks[a]
                    .partial_cmp(&marks[b])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
        }
        order
    }

    pub fn translated(&self, by: Point<T>) -> Self {
        PointSet {
            window: self.window.translated(by),
            points: self.points.iter().map(|p| p.translate(by)).collect(),
            marks: self.marks.clone(),
            seed: self.seed,
        }
    }

    /// Writes `x_m,y_m,mark` rows preceded by `#`-comment metadata.
    pub fn write_csv<W: Write>(&self, mut out: W, extra_header: &[(String, String)]) -> Result<()> {
        writeln!(out, "# seed={}", self.seed)?;
        writeln!(
            out,
            "# window={},{},{}",
            self.window.center.x, self.window.center.y, self.window.radius
        )?;
        for (k, v) in extra_header {
            writeln!(out, "# {k}={v}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x_m", "y_m", "mark"])?;
        for (i, p) in self.points.iter().enumerate() {
            let mark = self
                .marks
                .as_ref()
                .map(|m| m[i].to_string())
                .unwrap_or_default();
            w.write_record([p.x.to_string(), p.y.to_string(), mark])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the CSV layout produced by [`PointSet::write_csv`]. Without a
    /// `# window=` header the smallest origin-centered disk holding every
    /// point is used.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut text = String::new();
        let mut reader = input;
        reader.read_to_string(&mut text)?;

        let mut seed = 0u64;
        let mut window = None;
        for line in text.lines().filter_map(|l| l.strip_prefix('#')) {
            let line = line.trim();
            if let Some(v) = line.strip_prefix("seed=") {
                seed = v
                    .trim()
                    .parse()
                    .map_err(|_| Error::Data(format!("bad seed header `{v}`")))?;
            } else if let Some(v) = line.strip_prefix("window=") {
                let parts: Vec<f64> = v
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::Data(format!("bad window header `{v}`")))?;
                if parts.len() != 3 {
                    return Err(Error::Data(format!("bad window header `{v}`")));
                }
                window = Some(CircularWindow::new(
                    Point::new(T::of(parts[0]), T::of(parts[1])),
                    T::of(parts[2]),
                )?);
            }
        }

        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = rdr.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h == name);
        let xi = col("x_m")
            .or_else(|| col("x"))
            .ok_or_else(|| Error::Data("missing x_m column".into()))?;
        let yi = col("y_m")
            .or_else(|| col("y"))
            .ok_or_else(|| Error::Data("missing y_m column".into()))?;
        let mi = col("mark");

        let mut points = Vec::new();
        let mut marks = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::Data("short row".into()))?
                    .parse::<f64>()
                    .map_err(|e| Error::Data(format!("bad number: {e}")))
            };
            points.push(Point::new(T::of(parse(xi)?), T::of(parse(yi)?)));
            if let Some(mi) = mi {
                match rec.get(mi) {
                    Some(s) if !s.is_empty() => marks.push(T::of(
                        s.parse::<f64>()
                            .map_err(|e| Error::Data(format!("bad mark: {e}")))?,
                    )),
                    _ => {}
                }
            }
        }
        let window = match window {
            Some(w) => w,
            None => {
                let r = points
                    .iter()
                    .map(|p| p.distance(&Point::origin()))
                    .fold(T::zero(), T::max);
                CircularWindow::centered(if r > T::zero() { r } else { T::one() })?
            }
        };
        let set = PointSet::new(window, points, seed)?;
        if marks.is_empty() {
            Ok(set)
        } else {
            set.with_marks(marks)
        }
    }
}

fn validate_marks<T: Scalar>(marks: &[T], n: usize) -> Result<()> {
    if marks.len() != n {
        return Err(Error::Data(format!("{} marks for {} points", marks.len(), n)));
    }
    if let Some(m) = marks.iter().find(|m| !(**m >= T::zero() && **m <= T::one())) {
        return Err(Error::Data(format!("mark {m} outside [0, 1]")));
    }
    let mut sorted = marks.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Data("duplicate marks".into()));
    }
    Ok(())
}

/// Homogeneous PPP on `window`: Poisson count, then i.i.d. uniform locations
/// with radius `R·√u` and uniform angle.
pub fn sample_ppp<T: Scalar>(
    intensity: T,
    window: &CircularWindow<T>,
    seed: u64,
) -> Result<PointSet<T>> {
    if !(intensity >= T::zero()) || !intensity.is_finite() {
        return Err(Error::param("intensity", format!("must be finite and >= 0, got {intensity}")));
    }
    let mut rng = stream_rng(seed, streams::POINTS);
    let mean = (intensity * window.area()).as_f64();
    let count = if mean > 0.0 {
        let d = Poisson::new(mean).map_err(|e| Error::param("intensity", e.to_string()))?;
        d.sample(&mut rng) as usize
    } else {
        0
    };
    let points = uniform_in_disk(&mut rng, window, count);
    Ok(PointSet {
        window: *window,
        points,
        marks: None,
        seed,
    })
}

/// `count` i.i.d. uniform points on the window (binomial point process).
pub fn sample_uniform<T: Scalar>(count: usize, window: &CircularWindow<T>, seed: u64) -> PointSet<T> {
    let mut rng = stream_rng(seed, streams::POINTS);
    let points = uniform_in_disk(&mut rng, window, count);
    PointSet {
        window: *window,
        points,
        marks: None,
        seed,
    }
}

fn uniform_in_disk<T: Scalar, R: Rng>(rng: &mut R, window: &CircularWindow<T>, count: usize) -> Vec<Point<T>> {
    let two_pi = T::PI() + T::PI();
    (0..count)
        .map(|_| {
            let u: f64 = rng.random();
            let v: f64 = rng.random();
            // u in [0,1) keeps r strictly inside the closed disk.
            let r = window.radius * T::of(u).sqrt();
            let a = two_pi * T::of(v);
            Point::new(window.center.x + r * a.cos(), window.center.y + r * a.sin())
        })
        .collect()
}

/// Attaches independent `U(0,1)` marks drawn from the marks stream of `seed`.
pub fn assign_marks<T: Scalar>(points: PointSet<T>, seed: u64) -> PointSet<T> {
    let mut rng = stream_rng(seed, streams::MARKS);
    let marks = (0..points.len())
        .map(|_| T::of(rng.random::<f64>()))
        .collect();
    PointSet {
        marks: Some(marks),
        ..points
    }
}

/// Subset of `points` inside `window`, order and marks preserved.
pub fn crop<T: Scalar>(points: &PointSet<T>, window: &CircularWindow<T>) -> PointSet<T> {
    let keep: Vec<usize> = (0..points.len())
        .filter(|&i| window.contains(&points.points[i]))
        .collect();
    PointSet {
        window: *window,
        points: keep.iter().map(|&i| points.points[i]).collect(),
        marks: points
            .marks
            .as_ref()
            .map(|m| keep.iter().map(|&i| m[i]).collect()),
        seed: points.seed,
    }
}

/// Indices of `points` inside `window`.
pub fn indices_within<T: Scalar>(points: &PointSet<T>, window: &CircularWindow<T>) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| window.contains(&points.points[i]))
        .collect()
}

/// Uniform bucket grid for fixed-radius neighbour queries.
#[derive(Clone, Debug)]
pub struct SpatialGrid<T> {
    min: Point<T>,
    cell: T,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<usize>>,
}

impl<T: Scalar> SpatialGrid<T> {
    /// Empty grid covering `window` with square cells of side at least
    /// `cell`. The cell count is capped relative to `expected_points` so tiny
    /// radii do not allocate huge grids.
    pub fn empty(window: &CircularWindow<T>, cell: T, expected_points: usize) -> Self {
        let cell = if cell > T::zero() { cell } else { window.radius };
        let span = window.diameter();
        let cap = (2.0 * (expected_points as f64).sqrt()).ceil() as usize + 1;
        let n = ((span / cell).ceil().to_usize().unwrap_or(1)).clamp(1, cap.min(4096));
        let cell = span / T::of_usize(n);
        SpatialGrid {
            min: Point::new(window.center.x - window.radius, window.center.y - window.radius),
            cell,
            nx: n,
            ny: n,
            cells: vec![Vec::new(); n * n],
        }
    }

    pub fn build(set: &PointSet<T>, cell: T) -> Self {
        let mut g = Self::empty(&set.window, cell, set.len());
        for (i, p) in set.points.iter().enumerate() {
            g.insert(i, p);
        }
        g
    }

    #[inline]
    fn cell_of(&self, p: &Point<T>) -> (usize, usize) {
        let cx = ((p.x - self.min.x) / self.cell).floor().to_isize().unwrap_or(0);
        let cy = ((p.y - self.min.y) / self.cell).floor().to_isize().unwrap_or(0);
        (
            cx.clamp(0, self.nx as isize - 1) as usize,
            cy.clamp(0, self.ny as isize - 1) as usize,
        )
    }

    pub fn insert(&mut self, idx: usize, p: &Point<T>) {
        let (cx, cy) = self.cell_of(p);
        self.cells[cy * self.nx + cx].push(idx);
    }

    /// Calls `f` for every stored index whose cell intersects the square of
    /// half-side `r` around `p`; callers filter by exact distance.
    #[inline]
    pub fn for_each_candidate(&self, p: &Point<T>, r: T, mut f: impl FnMut(usize)) {
        let reach = (r / self.cell).ceil().to_isize().unwrap_or(1).max(1);
        let (cx, cy) = self.cell_of(p);
        let (cx, cy) = (cx as isize, cy as isize);
        for y in (cy - reach).max(0)..=(cy + reach).min(self.ny as isize - 1) {
            for x in (cx - reach).max(0)..=(cx + reach).min(self.nx as isize - 1) {
                for &i in &self.cells[y as usize * self.nx + x as usize] {
                    f(i);
                }
            }
        }
    }
}
