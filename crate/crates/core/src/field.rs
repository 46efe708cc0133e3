//! Spatial locations, observed fields, deterministic randomness, and CSV I/O.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the plane. Coordinates are unitless, typically in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub x: f64,
    pub y: f64,
}

impl Location {
    pub fn new(x: f64, y: f64) -> Self {
        Location { x, y }
    }

    /// Squared Euclidean distance to `other`.
    pub fn dist2(&self, other: &Location) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn dist(&self, other: &Location) -> f64 {
        self.dist2(other).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Axis-aligned bounding rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl Region {
    /// The unit square [0,1] x [0,1].
    pub fn unit() -> Self {
        Region { xmin: 0.0, xmax: 1.0, ymin: 0.0, ymax: 1.0 }
    }

    /// Smallest rectangle containing all `locations`. Empty input is an error.
    pub fn bounding(locations: &[Location]) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::invalid("locations", "cannot bound an empty set"));
        }
        let mut r = Region {
            xmin: f64::INFINITY,
            xmax: f64::NEG_INFINITY,
            ymin: f64::INFINITY,
            ymax: f64::NEG_INFINITY,
        };
        for p in locations {
            r.xmin = r.xmin.min(p.x);
            r.xmax = r.xmax.max(p.x);
            r.ymin = r.ymin.min(p.y);
            r.ymax = r.ymax.max(p.y);
        }
        Ok(r)
    }

    pub fn contains(&self, p: &Location) -> bool {
        p.x >= self.xmin && p.x <= self.xmax && p.y >= self.ymin && p.y <= self.ymax
    }

    pub fn width(&self) -> f64 {
        self.xmax - self.xmin
    }

    pub fn height(&self) -> f64 {
        self.ymax - self.ymin
    }

    /// Length of the rectangle diagonal.
    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> Location {
        Location::new(0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax))
    }
}

/// Scattered observations of a scalar field.
///
/// Locations and values are index-aligned; the region is a bounding rectangle
/// that contains every location. All data is immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialField {
    locations: Vec<Location>,
    values: Vec<f64>,
    region: Region,
}

impl SpatialField {
    /// Builds a field and checks the invariants: equal lengths >= 1, finite
    /// values, every location inside `region`.
    pub fn new(locations: Vec<Location>, values: Vec<f64>, region: Region) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::invalid("locations", "field must contain at least one observation"));
        }
        if locations.len() != values.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} locations vs {} values",
                locations.len(),
                values.len()
            )));
        }
        for (i, p) in locations.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::invalid("locations", format!("non-finite location at index {i}")));
            }
            if !region.contains(p) {
                return Err(Error::invalid(
                    "locations",
                    format!("location ({}, {}) at index {i} outside region", p.x, p.y),
                ));
            }
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid("values", format!("non-finite value at index {i}")));
        }
        Ok(SpatialField { locations, values, region })
    }

    /// Builds a field whose region is the bounding box of the locations.
    pub fn from_observations(locations: Vec<Location>, values: Vec<f64>) -> Result<Self> {
        let region = Region::bounding(&locations)?;
        SpatialField::new(locations, values, region)
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    /// The subset of observations at the given indices, with the region
    /// shrunk to their bounding box.
    pub fn subset(&self, indices: &[usize]) -> Result<SpatialField> {
        let locations: Vec<Location> = indices.iter().map(|&i| self.locations[i]).collect();
        let values: Vec<f64> = indices.iter().map(|&i| self.values[i]).collect();
        SpatialField::from_observations(locations, values)
    }
}

/// Purpose tag for deriving independent random streams from one run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamKind {
    /// Perturbed-grid location generation.
    Locations = 1,
    /// Standard-normal innovations for field simulation.
    FieldNoise = 2,
    /// Seed-point sampling inside partition restarts.
    PartitionRestart = 3,
    /// Classifier weight initialization.
    WeightInit = 4,
    /// Minibatch shuffling during training.
    Shuffle = 5,
    /// Multistart jitter for the optimizer.
    Multistart = 6,
    /// Per-sample derivation inside corpus builders.
    Corpus = 7,
    /// Per-replicate derivation inside experiment harnesses.
    Replicate = 8,
}

/// One master seed per run.
///
/// All randomness flows through ChaCha12 streams derived from this seed:
/// `stream(kind, index)` keys the 64-bit ChaCha stream counter with the
/// purpose tag in the high 16 bits and the index in the low 48, so different
/// purposes (and different replicates of one purpose) never share a stream.
/// `child` derives a fresh independent seed for nested components via
/// splitmix64.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSeed(pub u64);

impl RngSeed {
    /// Deterministic generator for one purpose. `index` distinguishes
    /// replicates/restarts and must stay below 2^48.
    pub fn stream(self, kind: StreamKind, index: u64) -> ChaCha12Rng {
        debug_assert!(index < (1 << 48));
        let mut rng = ChaCha12Rng::seed_from_u64(self.0);
        rng.set_stream(((kind as u64) << 48) | (index & 0xffff_ffff_ffffu64));
        rng
    }

    /// A fresh seed for a nested component, independent of all streams of
    /// this seed.
    pub fn child(self, kind: StreamKind, index: u64) -> RngSeed {
        let mut z = self.0 ^ (kind as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ index;
        // splitmix64 finalizer
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        RngSeed(z ^ (z >> 31))
    }
}

/// Locations on a jittered regular grid over the unit square:
/// `n^{-1/2} (i - 0.5 + X, j - 0.5 + Y)` with X, Y ~ Unif(-0.4, 0.4) i.i.d.
///
/// `n` must be a perfect square. The result is a pure function of
/// `(n, seed)`, and every location lies strictly inside [0, 1]^2 since the
/// jitter never exceeds the half-spacing.
pub fn perturbed_grid_locations(n: usize, seed: RngSeed) -> Result<Vec<Location>> {
    let mut rng = seed.stream(StreamKind::Locations, 0);
    perturbed_grid_from(n, move || {
        use rand::Rng;
        let px: f64 = rng.random_range(-0.4..0.4);
        let py: f64 = rng.random_range(-0.4..0.4);
        (px, py)
    })
}

/// Unperturbed regular grid of cell centers: `n^{-1/2} (i - 0.5, j - 0.5)`.
pub fn regular_grid_locations(n: usize) -> Result<Vec<Location>> {
    perturbed_grid_from(n, || (0.0, 0.0))
}

fn perturbed_grid_from(n: usize, mut perturb: impl FnMut() -> (f64, f64)) -> Result<Vec<Location>> {
    if n == 0 {
        return Err(Error::invalid("n", "grid size must be positive"));
    }
    let m = (n as f64).sqrt().round() as usize;
    if m * m != n {
        return Err(Error::invalid("n", format!("{n} is not a perfect square")));
    }
    let scale = 1.0 / m as f64;
    let mut out = Vec::with_capacity(n);
    for i in 1..=m {
        for j in 1..=m {
            let (px, py) = perturb();
            out.push(Location::new(
                scale * (i as f64 - 0.5 + px),
                scale * (j as f64 - 0.5 + py),
            ));
        }
    }
    Ok(out)
}

/// Reads a `x,y,z` CSV into a field whose region is the data bounding box.
///
/// Malformed rows, non-finite values, and empty files are rejected with the
/// offending data row number (1-based, excluding the header).
pub fn read_field_csv(path: impl AsRef<Path>) -> Result<SpatialField> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines();

    let header = match lines.next() {
        Some(h) => h?,
        None => return Err(Error::parse(path.display().to_string(), "empty file")),
    };
    if header.trim_end_matches('\r').trim() != "x,y,z" {
        return Err(Error::parse(
            format!("{}, header", path.display()),
            format!("expected `x,y,z`, got `{}`", header.trim()),
        ));
    }

    let mut locations = Vec::new();
    let mut values = Vec::new();
    for (row, line) in lines.enumerate() {
        let row = row + 1;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let mut next = |name: &str| -> Result<f64> {
            let raw = fields
                .next()
                .ok_or_else(|| Error::parse(format!("{}, row {row}", path.display()), format!("missing {name}")))?;
            let v: f64 = raw.trim().parse().map_err(|_| {
                Error::parse(format!("{}, row {row}", path.display()), format!("bad {name}: `{raw}`"))
            })?;
            if !v.is_finite() {
                return Err(Error::parse(
                    format!("{}, row {row}", path.display()),
                    format!("non-finite {name}: `{raw}`"),
                ));
            }
            Ok(v)
        };
        let x = next("x")?;
        let y = next("y")?;
        let z = next("z")?;
        if fields.next().is_some() {
            return Err(Error::parse(
                format!("{}, row {row}", path.display()),
                "more than three fields",
            ));
        }
        locations.push(Location::new(x, y));
        values.push(z);
    }
    if locations.is_empty() {
        return Err(Error::parse(path.display().to_string(), "no observations"));
    }
    SpatialField::from_observations(locations, values)
}

/// Writes a field as `x,y,z` CSV (UTF-8, LF endings, `.` decimal separator).
/// Values are printed with the shortest representation that parses back to
/// the identical f64, so write-then-read round-trips exactly.
pub fn write_field_csv(field: &SpatialField, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(field_csv_string(field).as_bytes())?;
    Ok(())
}

/// The CSV serialization of a field as a string.
pub fn field_csv_string(field: &SpatialField) -> String {
    let mut s = String::with_capacity(24 * field.len() + 8);
    s.push_str("x,y,z\n");
    for (p, v) in field.locations().iter().zip(field.values()) {
        let _ = writeln!(s, "{},{},{}", p.x, p.y, v);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_perturbation_grid_is_cell_centers() {
        let locs = perturbed_grid_from(4, || (0.0, 0.0)).unwrap();
        let expected = [(0.25, 0.25), (0.25, 0.75), (0.75, 0.25), (0.75, 0.75)];
        assert_eq!(locs.len(), 4);
        for (got, want) in locs.iter().zip(expected) {
            assert_eq!((got.x, got.y), want);
        }
    }

    #[test]
    fn perturbed_grid_stays_inside_unit_square() {
        let locs = perturbed_grid_locations(10_000, RngSeed(42)).unwrap();
        assert_eq!(locs.len(), 10_000);
        let lo = (0.5 - 0.4) / 100.0;
        let hi = (99.5 + 0.4) / 100.0;
        for p in &locs {
            assert!(p.x >= lo && p.x <= hi, "x={} out of [{lo},{hi}]", p.x);
            assert!(p.y >= lo && p.y <= hi, "y={} out of [{lo},{hi}]", p.y);
            assert!(p.x > 0.0 && p.x < 1.0 && p.y > 0.0 && p.y < 1.0);
        }
    }

    #[test]
    fn non_square_n_rejected() {
        assert!(perturbed_grid_locations(5, RngSeed(1)).is_err());
        assert!(perturbed_grid_locations(0, RngSeed(1)).is_err());
    }

    #[test]
    fn grid_generation_is_deterministic() {
        let a = perturbed_grid_locations(64, RngSeed(7)).unwrap();
        let b = perturbed_grid_locations(64, RngSeed(7)).unwrap();
        assert_eq!(a, b);
        let c = perturbed_grid_locations(64, RngSeed(8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn stream_derivation_is_purpose_separated() {
        use rand::Rng;
        let seed = RngSeed(123);
        let a: f64 = seed.stream(StreamKind::Locations, 0).random();
        let b: f64 = seed.stream(StreamKind::FieldNoise, 0).random();
        let c: f64 = seed.stream(StreamKind::Locations, 1).random();
        assert_ne!(a, b);
        assert_ne!(a, c);
        let a2: f64 = seed.stream(StreamKind::Locations, 0).random();
        assert_eq!(a, a2);
    }

    #[test]
    fn csv_single_row() {
        let dir = std::env::temp_dir().join("nscov_field_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("one.csv");
        std::fs::write(&path, "x,y,z\n0.1,0.2,1.5\n").unwrap();
        let f = read_field_csv(&path).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f.values()[0], 1.5);
        assert_eq!(f.locations()[0], Location::new(0.1, 0.2));
    }

    #[test]
    fn csv_round_trip_exact() {
        use rand::Rng;
        let mut rng = RngSeed(9).stream(StreamKind::FieldNoise, 0);
        let locs = perturbed_grid_locations(100, RngSeed(9)).unwrap();
        let vals: Vec<f64> = (0..100).map(|_| rng.random_range(-3.0..3.0)).collect();
        let f = SpatialField::new(locs, vals, Region::unit()).unwrap();

        let dir = std::env::temp_dir().join("nscov_field_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("roundtrip.csv");
        write_field_csv(&f, &path).unwrap();
        let g = read_field_csv(&path).unwrap();
        assert_eq!(f.locations(), g.locations());
        assert_eq!(f.values(), g.values());
    }

    #[test]
    fn csv_nan_rejected_with_row_number() {
        let dir = std::env::temp_dir().join("nscov_field_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("nan.csv");
        std::fs::write(&path, "x,y,z\n0.1,NaN,1.0\n").unwrap();
        let err = read_field_csv(&path).unwrap_err().to_string();
        assert!(err.contains("row 1"), "error should name row 1: {err}");
    }

    #[test]
    fn csv_malformed_and_empty_rejected() {
        let dir = std::env::temp_dir().join("nscov_field_test");
        std::fs::create_dir_all(&dir).unwrap();

        let p1 = dir.join("short.csv");
        std::fs::write(&p1, "x,y,z\n0.1,0.2,3\n0.3,0.4\n").unwrap();
        let err = read_field_csv(&p1).unwrap_err().to_string();
        assert!(err.contains("row 2"), "{err}");

        let p2 = dir.join("empty.csv");
        std::fs::write(&p2, "x,y,z\n").unwrap();
        assert!(read_field_csv(&p2).is_err());

        let p3 = dir.join("badheader.csv");
        std::fs::write(&p3, "a,b,c\n1,2,3\n").unwrap();
        assert!(read_field_csv(&p3).is_err());
    }

    #[test]
    fn field_invariants_enforced() {
        let locs = vec![Location::new(0.5, 0.5)];
        assert!(SpatialField::new(locs.clone(), vec![1.0, 2.0], Region::unit()).is_err());
        assert!(SpatialField::new(locs.clone(), vec![f64::NAN], Region::unit()).is_err());
        assert!(SpatialField::new(
            vec![Location::new(2.0, 0.5)],
            vec![1.0],
            Region::unit()
        )
        .is_err());
        assert!(SpatialField::new(locs, vec![1.0], Region::unit()).is_ok());
    }
}
