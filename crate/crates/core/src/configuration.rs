//! Finite marked configurations ω = {(x, m)} with pairwise distinct base points.

use std::cmp::Ordering;
use std::io::{Read, Write};

use crate::base_space::{Point, Window};
use crate::error::{Error, Result};
use crate::mark_space::{MarkPoint, MarkSpace};

#[derive(Clone, Debug, PartialEq)]
pub struct MarkedConfiguration {
    dim: usize,
    space: MarkSpace,
    points: Vec<(Point, MarkPoint)>,
}

fn lex(a: &Point, b: &Point) -> Ordering {
    for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

/// Mark-side factor of a counting region B = window × mark region.
#[derive(Clone, Debug, PartialEq)]
pub enum MarkRegion {
    All,
    /// Half-open coordinate interval [lo, hi) for circle angles or dilation scales.
    Interval { lo: f64, hi: f64 },
    /// Spherical cap {m : ⟨m, axis⟩ ≥ min_dot}.
    Cap { axis: [f64; 3], min_dot: f64 },
}

impl MarkRegion {
    pub fn contains(&self, m: &MarkPoint) -> bool {
        match (self, m) {
            (MarkRegion::All, _) => true,
            (MarkRegion::Interval { lo, hi }, MarkPoint::Circle(v) | MarkPoint::Dilation(v)) => *v >= *lo && *v < *hi,
            (MarkRegion::Cap { axis, min_dot }, MarkPoint::Sphere(v)) => {
                axis[0] * v[0] + axis[1] * v[1] + axis[2] * v[2] >= *min_dot
            }
            _ => false,
        }
    }
}

impl MarkedConfiguration {
    pub fn empty(dim: usize, space: MarkSpace) -> Self {
        MarkedConfiguration { dim, space, points: Vec::new() }
    }

    /// Builds ω from pairs, rejecting repeated base points and foreign marks.
    pub fn new(dim: usize, space: MarkSpace, mut points: Vec<(Point, MarkPoint)>) -> Result<Self> {
        for (x, m) in &points {
            if x.dim() != dim {
                return Err(Error::Usage(format!("base point {x:?} is not {dim}-dimensional")));
            }
            if m.space() != space {
                return Err(Error::Usage(format!("mark {m:?} does not belong to the {space} model")));
            }
            m.validate()?;
        }
        points.sort_by(|a, b| lex(&a.0, &b.0));
        if let Some(w) = points.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicateBasePoint { point: w[0].0.as_slice().to_vec(), sample: None });
        }
        Ok(MarkedConfiguration { dim, space, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn space(&self) -> MarkSpace {
        self.space
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[(Point, MarkPoint)] {
        &self.points
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Point, MarkPoint)> {
        self.points.iter()
    }

    /// ⟨f, ω⟩ = Σ_{(x,m) ∈ ω} f(x, m).
    pub fn pairing<F: Fn(&Point, &MarkPoint) -> f64>(&self, f: F) -> f64 {
        self.points.iter().map(|(x, m)| f(x, m)).sum()
    }

    /// N_B(ω) for B = window × marks.
    pub fn count(&self, window: &Window, marks: &MarkRegion) -> usize {
        self.points.iter().filter(|(x, m)| window.contains(x) && marks.contains(m)).count()
    }

    /// The restriction p_Λ(ω) = ω ∩ (Λ × M).
    pub fn restrict(&self, window: &Window) -> Self {
        MarkedConfiguration {
            dim: self.dim,
            space: self.space,
            points: self.points.iter().filter(|(x, _)| window.contains(x)).cloned().collect(),
        }
    }

    /// ω + ε_{(x,m)}.
    pub fn with_point(&self, x: Point, m: MarkPoint) -> Result<Self> {
        let mut points = self.points.clone();
        points.push((x, m));
        MarkedConfiguration::new(self.dim, self.space, points)
    }

    /// Disjoint union of two configurations.
    pub fn union(&self, other: &MarkedConfiguration) -> Result<Self> {
        let mut points = self.points.clone();
        points.extend(other.points.iter().cloned());
        MarkedConfiguration::new(self.dim, self.space, points)
    }

    /// Image of every pair under `map`; distinctness is rechecked.
    pub fn map_points<F>(&self, mut map: F) -> Result<Self>
    where
        F: FnMut(&Point, &MarkPoint) -> Result<(Point, MarkPoint)>,
    {
        let points = self.points.iter().map(|(x, m)| map(x, m)).collect::<Result<Vec<_>>>()?;
        MarkedConfiguration::new(self.dim, self.space, points)
    }

    pub fn csv_header(dim: usize, space: MarkSpace) -> Vec<String> {
        let mut h: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
        match space {
            MarkSpace::Circle => h.push("angle".into()),
            MarkSpace::Dilation => h.push("scale".into()),
            MarkSpace::Sphere => h.extend(["mx", "my", "mz"].map(String::from)),
        }
        h
    }

    /// One row per point: base coordinates followed by mark coordinates.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::csv_header(self.dim, self.space))?;
        for (x, m) in &self.points {
            let row: Vec<String> = x.as_slice().iter().chain(m.coords().iter()).map(|v| format!("{v:e}")).collect();
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, dim: usize, space: MarkSpace) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let expected = Self::csv_header(dim, space);
        let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
        if header != expected {
            return Err(Error::Usage(format!("csv header {header:?}, expected {expected:?}")));
        }
        let mut points = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Usage(format!("bad number '{s}': {e}"))))
                .collect::<Result<Vec<_>>>()?;
            let m = space.mark_from_coords(&vals[dim..])?;
            points.push((Point::new(&vals[..dim]), m));
        }
        MarkedConfiguration::new(dim, space, points)
    }
}
