//! Transverse Mercator on the WGS84 ellipsoid, using Krüger's series to
//! sixth order in the third flattening (sub-millimeter within a zone).

use crate::error::{Error, Result};

const A: f64 = 6_378_137.0;
const F: f64 = 1.0 / 298.257_223_563;
const UTM_K0: f64 = 0.9996;
const UTM_FALSE_EASTING: f64 = 500_000.0;
const UTM_FALSE_NORTHING_SOUTH: f64 = 10_000_000.0;
/// Widest longitude offset from the central meridian accepted, degrees.
const MAX_DLON_DEG: f64 = 4.0;
const MAX_LAT_DEG: f64 = 84.0;

struct Series {
    n: f64,
    /// Rectifying radius.
    a_r: f64,
    alpha: [f64; 6],
    beta: [f64; 6],
    delta: [f64; 6],
}

fn series() -> Series {
    let n = F / (2.0 - F);
    let n2 = n * n;
    let n3 = n2 * n;
    let n4 = n3 * n;
    let n5 = n4 * n;
    let n6 = n5 * n;
    Series {
        n,
        a_r: A / (1.0 + n) * (1.0 + n2 / 4.0 + n4 / 64.0 + n6 / 256.0),
        alpha: [
            n / 2.0 - 2.0 * n2 / 3.0 + 5.0 * n3 / 16.0 + 41.0 * n4 / 180.0 - 127.0 * n5 / 288.0 + 7891.0 * n6 / 37800.0,
            13.0 * n2 / 48.0 - 3.0 * n3 / 5.0 + 557.0 * n4 / 1440.0 + 281.0 * n5 / 630.0 - 1983433.0 * n6 / 1935360.0,
            61.0 * n3 / 240.0 - 103.0 * n4 / 140.0 + 15061.0 * n5 / 26880.0 + 167603.0 * n6 / 181440.0,
            49561.0 * n4 / 161280.0 - 179.0 * n5 / 168.0 + 6601661.0 * n6 / 7257600.0,
            34729.0 * n5 / 80640.0 - 3418889.0 * n6 / 1995840.0,
            212378941.0 * n6 / 319334400.0,
        ],
        beta: [
            n / 2.0 - 2.0 * n2 / 3.0 + 37.0 * n3 / 96.0 - n4 / 360.0 - 81.0 * n5 / 512.0 + 96199.0 * n6 / 604800.0,
            n2 / 48.0 + n3 / 15.0 - 437.0 * n4 / 1440.0 + 46.0 * n5 / 105.0 - 1118711.0 * n6 / 3870720.0,
            17.0 * n3 / 480.0 - 37.0 * n4 / 840.0 - 209.0 * n5 / 4480.0 + 5569.0 * n6 / 90720.0,
            4397.0 * n4 / 161280.0 - 11.0 * n5 / 504.0 - 830251.0 * n6 / 7257600.0,
            4583.0 * n5 / 161280.0 - 108847.0 * n6 / 3991680.0,
            20648693.0 * n6 / 638668800.0,
        ],
        delta: [
            2.0 * n - 2.0 * n2 / 3.0 - 2.0 * n3 + 116.0 * n4 / 45.0 + 26.0 * n5 / 45.0 - 2854.0 * n6 / 675.0,
            7.0 * n2 / 3.0 - 8.0 * n3 / 5.0 - 227.0 * n4 / 45.0 + 2704.0 * n5 / 315.0 + 2323.0 * n6 / 945.0,
            56.0 * n3 / 15.0 - 136.0 * n4 / 35.0 - 1262.0 * n5 / 105.0 + 73814.0 * n6 / 2835.0,
            4279.0 * n4 / 630.0 - 332.0 * n5 / 35.0 - 399572.0 * n6 / 14175.0,
            4174.0 * n5 / 315.0 - 144838.0 * n6 / 6237.0,
            601676.0 * n6 / 22275.0,
        ],
    }
}

/// Unit-scale transverse Mercator about `lon0` (radians): returns
/// (easting, northing) / k0 with the equator as northing origin.
fn tm_forward(s: &Series, lat: f64, dlon: f64) -> (f64, f64) {
    let e2n = 2.0 * s.n.sqrt() / (1.0 + s.n);
    let sin_lat = lat.sin();
    let t = (sin_lat.atanh() - e2n * (e2n * sin_lat).atanh()).sinh();
    let xi_p = t.atan2(dlon.cos());
    let eta_p = (dlon.sin() / (1.0 + t * t).sqrt()).atanh();
    let (mut xi, mut eta) = (xi_p, eta_p);
    for (j, a) in s.alpha.iter().enumerate() {
        let k = 2.0 * (j + 1) as f64;
        xi += a * (k * xi_p).sin() * (k * eta_p).cosh();
        eta += a * (k * xi_p).cos() * (k * eta_p).sinh();
    }
    (s.a_r * eta, s.a_r * xi)
}

fn tm_inverse(s: &Series, x: f64, y: f64) -> (f64, f64) {
    let xi = y / s.a_r;
    let eta = x / s.a_r;
    let (mut xi_p, mut eta_p) = (xi, eta);
    for (j, b) in s.beta.iter().enumerate() {
        let k = 2.0 * (j + 1) as f64;
        xi_p -= b * (k * xi).sin() * (k * eta).cosh();
        eta_p -= b * (k * xi).cos() * (k * eta).sinh();
    }
    let chi = (xi_p.sin() / eta_p.cosh()).asin();
    let mut lat = chi;
    for (j, d) in s.delta.iter().enumerate() {
        lat += d * (2.0 * (j + 1) as f64 * chi).sin();
    }
    (lat, eta_p.sinh().atan2(xi_p.cos()))
}

/// Origin of a local metric frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProjectionOrigin {
    /// Transverse Mercator centered on `(lat0, lon0)` with unit scale;
    /// the origin maps to `(0, 0)`.
    Local { lat0: f64, lon0: f64 },
    /// UTM zone coordinates minus an offset (the dataset's UTM origin).
    Utm {
        zone: u8,
        north: bool,
        easting0: f64,
        northing0: f64,
    },
}

impl ProjectionOrigin {
    /// UTM frame whose origin is the projection of `(lat, lon)` in the zone
    /// containing it.
    pub fn utm_at(lat: f64, lon: f64) -> Result<Self> {
        let zone = utm_zone(lon)?;
        let base = ProjectionOrigin::Utm {
            zone,
            north: lat >= 0.0,
            easting0: 0.0,
            northing0: 0.0,
        };
        let (e, n) = Projection::new(base).forward(lat, lon)?;
        Ok(ProjectionOrigin::Utm {
            zone,
            north: lat >= 0.0,
            easting0: e,
            northing0: n,
        })
    }
}

pub fn utm_zone(lon: f64) -> Result<u8> {
    if !(-180.0..=180.0).contains(&lon) {
        return Err(Error::Projection(format!("longitude {lon} out of range")));
    }
    Ok((((lon + 180.0) / 6.0).floor() as i64).clamp(0, 59) as u8 + 1)
}

pub struct Projection {
    origin: ProjectionOrigin,
    series: Series,
    k0: f64,
    lon0: f64,
    x0: f64,
    y0: f64,
}

impl Projection {
    pub fn new(origin: ProjectionOrigin) -> Self {
        let series = series();
        let (k0, lon0, x0, y0) = match origin {
            ProjectionOrigin::Local { lat0, lon0 } => {
                let (_, y) = tm_forward(&series, lat0.to_radians(), 0.0);
                (1.0, lon0, 0.0, y)
            }
            ProjectionOrigin::Utm {
                zone,
                north,
                easting0,
                northing0,
            } => {
                let false_n = if north { 0.0 } else { UTM_FALSE_NORTHING_SOUTH };
                (
                    UTM_K0,
                    -183.0 + 6.0 * zone as f64,
                    easting0 - UTM_FALSE_EASTING,
                    (northing0 - false_n) / UTM_K0,
                )
            }
        };
        Projection {
            origin,
            series,
            k0,
            lon0,
            x0,
            y0,
        }
    }

    pub fn origin(&self) -> ProjectionOrigin {
        self.origin
    }

    fn check(&self, lat: f64, lon: f64) -> Result<()> {
        if !lat.is_finite() || !lon.is_finite() || lat.abs() > MAX_LAT_DEG {
            return Err(Error::Projection(format!("latitude {lat} outside the projection's domain")));
        }
        let dlon = (lon - self.lon0 + 540.0).rem_euclid(360.0) - 180.0;
        if dlon.abs() > MAX_DLON_DEG {
            return Err(Error::Projection(format!(
                "longitude {lon} is {dlon:.2} deg from the central meridian {}",
                self.lon0
            )));
        }
        Ok(())
    }

    /// Project `(lat, lon)` in degrees to local `(x, y)` meters.
    pub fn forward(&self, lat: f64, lon: f64) -> Result<(f64, f64)> {
        self.check(lat, lon)?;
        let dlon = ((lon - self.lon0 + 540.0).rem_euclid(360.0) - 180.0).to_radians();
        let (e, n) = tm_forward(&self.series, lat.to_radians(), dlon);
        Ok((self.k0 * e - self.x0, self.k0 * (n - self.y0)))
    }

    /// Inverse of [`Projection::forward`], degrees.
    pub fn inverse(&self, x: f64, y: f64) -> Result<(f64, f64)> {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::Projection("non-finite coordinates".into()));
        }
        let (lat, dlon) = tm_inverse(&self.series, (x + self.x0) / self.k0, y / self.k0 + self.y0);
        let lon = (self.lon0 + dlon.to_degrees() + 540.0).rem_euclid(360.0) - 180.0;
        Ok((lat.to_degrees(), lon))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn origin_maps_to_origin() {
        let p = Projection::new(ProjectionOrigin::Local { lat0: 50.78, lon0: 6.07 });
        let (x, y) = p.forward(50.78, 6.07).unwrap();
        assert!(x.abs() < 1e-9 && y.abs() < 1e-9);
    }

    #[test]
    fn latitude_step_matches_geodesic() {
        // Geodesic distance on WGS84 between the two points: 111.1318 m.
        let p = Projection::new(ProjectionOrigin::Local { lat0: 45.0, lon0: 7.0 });
        let (_, y0) = p.forward(45.0, 7.0).unwrap();
        let (_, y1) = p.forward(45.001, 7.0).unwrap();
        assert!((y1 - y0 - 111.1318).abs() < 1e-3, "{}", y1 - y0);
        assert!((y1 - y0 - 111.2).abs() < 0.5);
    }

    #[test]
    fn utm_reference_points() {
        // Reference values from PROJ (EPSG:32632).
        let p = Projection::new(ProjectionOrigin::Utm {
            zone: 32,
            north: true,
            easting0: 0.0,
            northing0: 0.0,
        });
        let (e, n) = p.forward(50.0, 9.0).unwrap();
        assert!((e - 500_000.0).abs() < 1e-6);
        assert!((n - 5_538_630.703).abs() < 1e-3, "{n}");
        let (e, n) = p.forward(48.137, 11.575).unwrap();
        assert!((e - 691_567.326_4).abs() < 1e-3, "{e}");
        assert!((n - 5_334_734.330_5).abs() < 1e-3, "{n}");
        let local = Projection::new(ProjectionOrigin::Local { lat0: 50.78, lon0: 6.07 });
        let (x, y) = local.forward(50.8, 6.1).unwrap();
        assert!((x - 2114.9710).abs() < 1e-3 && (y - 2225.3141).abs() < 1e-3, "{x} {y}");
    }

    #[test]
    fn out_of_zone_is_rejected() {
        let p = Projection::new(ProjectionOrigin::Local { lat0: 50.0, lon0: 6.0 });
        assert!(p.forward(50.0, 12.0).is_err());
        assert!(p.forward(89.0, 6.0).is_err());
        assert!(utm_zone(200.0).is_err());
        assert_eq!(utm_zone(6.07).unwrap(), 32);
        assert_eq!(utm_zone(0.0).unwrap(), 31);
    }

    #[test]
    fn utm_at_is_zero_at_its_point() {
        let o = ProjectionOrigin::utm_at(0.0, 0.0).unwrap();
        let (x, y) = Projection::new(o).forward(0.0, 0.0).unwrap();
        assert!(x.abs() < 1e-9 && y.abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn round_trip(lat in -80f64..80.0, dlon in -3.5f64..3.5, lat0 in -60f64..60.0, lon0 in -170f64..170.0) {
            let p = Projection::new(ProjectionOrigin::Local { lat0, lon0 });
            let (x, y) = p.forward(lat, lon0 + dlon).unwrap();
            let (la, lo) = p.inverse(x, y).unwrap();
            prop_assert!((la - lat).abs() < 1e-6);
            prop_assert!((lo - lon0 - dlon).abs() < 1e-6);
            let u = Projection::new(ProjectionOrigin::Utm { zone: utm_zone(lon0).unwrap(), north: lat >= 0.0, easting0: 1.0e5, northing0: 2.0e5 });
            let lon = (utm_zone(lon0).unwrap() as f64) * 6.0 - 183.0 + dlon * 0.8;
            let (x, y) = u.forward(lat, lon).unwrap();
            let (la, lo) = u.inverse(x, y).unwrap();
            prop_assert!((la - lat).abs() < 1e-6 && (lo - lon).abs() < 1e-6);
        }
    }
}
