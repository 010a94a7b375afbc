//! Geographic primitives: WGS-ish spherical coordinates, great-circle
//! distance, and the simple areas (rectangles, polygons) used for
//! obstacles and region tagging.
//!
//! Everything treats Earth as a sphere of radius [`EARTH_RADIUS_M`];
//! at the few-kilometre scale of a fog deployment the ellipsoidal
//! correction is far below the noise floor of the cost model.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// A point in degrees. `lat` in [-90, 90], `lon` in [-180, 180].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        let p = GeoPoint { lat, lon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lat.is_finite() || !(-90.0..=90.0).contains(&self.lat) {
            return Err(Error::InvalidInput(format!(
                "latitude {} outside [-90, 90]",
                self.lat
            )));
        }
        if !self.lon.is_finite() || !(-180.0..=180.0).contains(&self.lon) {
            return Err(Error::InvalidInput(format!(
                "longitude {} outside [-180, 180]",
                self.lon
            )));
        }
        Ok(())
    }
}

/// Great-circle distance in metres (haversine form, numerically stable
/// for the short distances fog coverage deals in).
pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let lat1 = a.lat.to_radians();
    let lat2 = b.lat.to_radians();
    let dlat = (b.lat - a.lat).to_radians();
    let dlon = (b.lon - a.lon).to_radians();
    let s = (dlat / 2.0).sin().powi(2)
        + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * s.sqrt().min(1.0).asin()
}

/// Metres spanned by one degree of latitude / longitude at `lat_deg`.
pub fn meters_per_degree(lat_deg: f64) -> (f64, f64) {
    let m_lat = std::f64::consts::PI / 180.0 * EARTH_RADIUS_M;
    let m_lon = m_lat * lat_deg.to_radians().cos();
    (m_lat, m_lon)
}

/// Local planar offset: `origin` displaced `east_m` / `north_m` metres.
/// Equirectangular around the origin; used to lay out scenarios, not
/// for long-range navigation.
pub fn offset_m(origin: GeoPoint, east_m: f64, north_m: f64) -> GeoPoint {
    let (m_lat, m_lon) = meters_per_degree(origin.lat);
    GeoPoint {
        lat: origin.lat + north_m / m_lat,
        lon: origin.lon + east_m / m_lon,
    }
}

/// Axis-aligned lat/lon rectangle, bounds inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoRect {
    pub min_lat: f64,
    pub min_lon: f64,
    pub max_lat: f64,
    pub max_lon: f64,
}

impl GeoRect {
    pub fn new(min_lat: f64, min_lon: f64, max_lat: f64, max_lon: f64) -> Result<Self> {
        GeoPoint::new(min_lat, min_lon)?;
        GeoPoint::new(max_lat, max_lon)?;
        if min_lat >= max_lat || min_lon >= max_lon {
            return Err(Error::InvalidInput(format!(
                "degenerate rectangle [{min_lat}, {min_lon}] x [{max_lat}, {max_lon}]"
            )));
        }
        Ok(GeoRect {
            min_lat,
            min_lon,
            max_lat,
            max_lon,
        })
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        p.lat >= self.min_lat
            && p.lat <= self.max_lat
            && p.lon >= self.min_lon
            && p.lon <= self.max_lon
    }

    pub fn center(&self) -> GeoPoint {
        GeoPoint {
            lat: 0.5 * (self.min_lat + self.max_lat),
            lon: 0.5 * (self.min_lon + self.max_lon),
        }
    }

    /// Metres from `p` to the rectangle, 0 when inside.
    pub fn distance_outside_m(&self, p: GeoPoint) -> f64 {
        let (m_lat, m_lon) = meters_per_degree(p.lat);
        let dlat = if p.lat < self.min_lat {
            self.min_lat - p.lat
        } else if p.lat > self.max_lat {
            p.lat - self.max_lat
        } else {
            0.0
        };
        let dlon = if p.lon < self.min_lon {
            self.min_lon - p.lon
        } else if p.lon > self.max_lon {
            p.lon - self.max_lon
        } else {
            0.0
        };
        (dlat * m_lat).hypot(dlon * m_lon)
    }
}

/// Simple (non-self-intersecting) polygon in lat/lon. Containment is
/// even-odd ray casting in coordinate space; fine for the small convex
/// shapes regions and obstacles use.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoPolygon {
    pub vertices: Vec<GeoPoint>,
}

impl GeoPolygon {
    pub fn new(vertices: Vec<GeoPoint>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidInput(format!(
                "polygon needs at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        for v in &vertices {
            v.validate()?;
        }
        Ok(GeoPolygon { vertices })
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        let mut inside = false;
        let n = self.vertices.len();
        let mut j = n - 1;
        for i in 0..n {
            let (vi, vj) = (self.vertices[i], self.vertices[j]);
            if (vi.lat > p.lat) != (vj.lat > p.lat) {
                let x = vj.lon + (p.lat - vj.lat) / (vi.lat - vj.lat) * (vi.lon - vj.lon);
                if p.lon < x {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    /// Metres from `p` to the polygon boundary, 0 when inside. Planar
    /// around `p`.
    pub fn distance_outside_m(&self, p: GeoPoint) -> f64 {
        if self.contains(p) {
            return 0.0;
        }
        let (m_lat, m_lon) = meters_per_degree(p.lat);
        let to_xy = |g: GeoPoint| ((g.lon - p.lon) * m_lon, (g.lat - p.lat) * m_lat);
        let mut best = f64::INFINITY;
        let n = self.vertices.len();
        for i in 0..n {
            let (ax, ay) = to_xy(self.vertices[i]);
            let (bx, by) = to_xy(self.vertices[(i + 1) % n]);
            let (ex, ey) = (bx - ax, by - ay);
            let len2 = ex * ex + ey * ey;
            let t = if len2 == 0.0 {
                0.0
            } else {
                (-(ax * ex + ay * ey) / len2).clamp(0.0, 1.0)
            };
            let (cx, cy) = (ax + t * ex, ay + t * ey);
            best = best.min(cx.hypot(cy));
        }
        best
    }
}

/// A region of the map: rectangle or polygon. Serialized tagged, e.g.
/// `{"rect": {...}}` or `{"polygon": {...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeoArea {
    Rect(GeoRect),
    Polygon(GeoPolygon),
}

impl GeoArea {
    pub fn contains(&self, p: GeoPoint) -> bool {
        match self {
            GeoArea::Rect(r) => r.contains(p),
            GeoArea::Polygon(poly) => poly.contains(p),
        }
    }

    pub fn distance_outside_m(&self, p: GeoPoint) -> f64 {
        match self {
            GeoArea::Rect(r) => r.distance_outside_m(p),
            GeoArea::Polygon(poly) => poly.distance_outside_m(p),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference distances computed independently at 30 significant
    // digits; asserted to 1e-9 relative.
    #[test]
    fn haversine_reference_values() {
        let cases = [
            ((31.23, 121.47), (31.24, 121.48), 1463.008_552_310_465_5),
            ((0.0, 0.0), (0.0, 1.0), 111_194.926_644_558_74),
            ((52.52, 13.405), (48.8566, 2.3522), 877_463.325_917_543_1),
            ((0.0, 0.0), (90.0, 0.0), 10_007_543.398_010_286),
        ];
        for ((alat, alon), (blat, blon), want) in cases {
            let d = haversine_m(
                GeoPoint { lat: alat, lon: alon },
                GeoPoint { lat: blat, lon: blon },
            );
            assert!(
                (d - want).abs() / want < 1e-9,
                "got {d}, want {want}"
            );
        }
    }

    #[test]
    fn haversine_zero_and_symmetry() {
        let a = GeoPoint { lat: 31.2, lon: 121.5 };
        let b = GeoPoint { lat: 31.21, lon: 121.52 };
        assert_eq!(haversine_m(a, a), 0.0);
        assert_eq!(haversine_m(a, b), haversine_m(b, a));
    }

    #[test]
    fn point_validation() {
        assert!(GeoPoint::new(91.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, -181.0).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
        assert!(GeoPoint::new(-90.0, 180.0).is_ok());
    }

    #[test]
    fn offset_round_trip() {
        let o = GeoPoint { lat: 31.23, lon: 121.47 };
        let p = offset_m(o, 500.0, -300.0);
        let d = haversine_m(o, p);
        let want = (500.0f64.powi(2) + 300.0f64.powi(2)).sqrt();
        assert!((d - want).abs() < 0.5, "got {d}, want ~{want}");
    }

    #[test]
    fn rect_contains_and_distance() {
        let r = GeoRect::new(31.0, 121.0, 31.1, 121.1).unwrap();
        assert!(r.contains(GeoPoint { lat: 31.05, lon: 121.05 }));
        assert!(r.contains(GeoPoint { lat: 31.0, lon: 121.0 }));
        assert!(!r.contains(GeoPoint { lat: 30.99, lon: 121.05 }));
        assert_eq!(r.distance_outside_m(GeoPoint { lat: 31.05, lon: 121.05 }), 0.0);
        // 0.01 degrees of latitude south of the edge
        let d = r.distance_outside_m(GeoPoint { lat: 30.99, lon: 121.05 });
        assert!((d - 1111.9492664455874).abs() < 1e-6);
        assert!(GeoRect::new(31.0, 121.0, 31.0, 121.1).is_err());
    }

    #[test]
    fn polygon_contains() {
        let square = GeoPolygon::new(vec![
            GeoPoint { lat: 0.0, lon: 0.0 },
            GeoPoint { lat: 0.0, lon: 1.0 },
            GeoPoint { lat: 1.0, lon: 1.0 },
            GeoPoint { lat: 1.0, lon: 0.0 },
        ])
        .unwrap();
        assert!(square.contains(GeoPoint { lat: 0.5, lon: 0.5 }));
        assert!(!square.contains(GeoPoint { lat: 1.5, lon: 0.5 }));
        assert!(!square.contains(GeoPoint { lat: 0.5, lon: -0.1 }));
        assert!(GeoPolygon::new(vec![
            GeoPoint { lat: 0.0, lon: 0.0 },
            GeoPoint { lat: 1.0, lon: 1.0 },
        ])
        .is_err());
        let d = square.distance_outside_m(GeoPoint { lat: 0.5, lon: -0.1 });
        let (_, m_lon) = meters_per_degree(0.5);
        assert!((d - 0.1 * m_lon).abs() < 1.0);
    }
}
