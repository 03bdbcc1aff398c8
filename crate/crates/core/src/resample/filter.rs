//! Digital Chebyshev type I low-pass design and IIR filtering.
//!
//! The design follows the classic analog-prototype route: Chebyshev poles on
//! an ellipse, frequency scaling with bilinear prewarping, then the bilinear
//! transform. Filtering uses the transposed direct form II with steady-state
//! initial conditions, and [`filtfilt`] runs it forward and backward over an
//! odd-extended signal.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// One biquad `[b0, b1, b2, a0, a1, a2]` with `a0 == 1`.
pub type Section = [f64; 6];

/// A designed filter: transfer-function coefficients `b(z) / a(z)` (with
/// `a[0] == 1`), the same filter as cascaded second-order sections, and
/// its poles. Filtering runs on the sections.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub b: Vec<f64>,
    pub a: Vec<f64>,
    pub sections: Vec<Section>,
    pub poles: Vec<Complex64>,
}

impl Coefficients {
    /// Complex response at normalized angular frequency `omega` (rad/sample).
    pub fn response_at(&self, omega: f64) -> Complex64 {
        let z_inv = Complex64::from_polar(1.0, -omega);
        let eval = |c: &[f64]| {
            c.iter()
                .rev()
                .fold(Complex64::new(0.0, 0.0), |acc, &k| acc * z_inv + k)
        };
        eval(&self.b) / eval(&self.a)
    }

    /// Magnitude response at `freq_hz` for sample rate `fs_hz`.
    pub fn gain(&self, freq_hz: f64, fs_hz: f64) -> f64 {
        self.response_at(2.0 * PI * freq_hz / fs_hz).norm()
    }

    pub fn max_pole_radius(&self) -> f64 {
        self.poles.iter().map(|p| p.norm()).fold(0.0, f64::max)
    }

    pub fn order(&self) -> usize {
        self.a.len() - 1
    }

    /// Gain at DC.
    pub fn dc_gain(&self) -> f64 {
        self.b.iter().sum::<f64>() / self.a.iter().sum::<f64>()
    }

    /// Rescale so the DC gain is exactly one.
    pub fn normalized_dc(mut self) -> Self {
        let g = self.dc_gain();
        for v in &mut self.b {
            *v /= g;
        }
        if let Some(s) = self.sections.first_mut() {
            for v in &mut s[..3] {
                *v /= g;
            }
        }
        self
    }
}

/// Chebyshev type I low-pass with passband ripple `ripple_db` and edge `wn`
/// given as a fraction of the Nyquist frequency.
pub fn chebyshev1_lowpass(order: usize, ripple_db: f64, wn: f64) -> Result<Coefficients> {
    if order == 0 {
        return Err(Error::Filter("order must be at least 1".into()));
    }
    if !(ripple_db > 0.0 && ripple_db.is_finite()) {
        return Err(Error::Filter(format!("ripple {ripple_db} dB must be positive")));
    }
    if !(wn > 0.0 && wn < 1.0) {
        return Err(Error::Filter(format!(
            "normalized cutoff {wn} must lie in (0, 1)"
        )));
    }
    let n = order as f64;
    let eps = (10f64.powf(0.1 * ripple_db) - 1.0).sqrt();
    let mu = (1.0 / eps).asinh() / n;

    // analog prototype with unit passband edge
    let mut poles: Vec<Complex64> = (0..order)
        .map(|i| {
            let m = -(n - 1.0) + 2.0 * i as f64;
            let theta = PI * m / (2.0 * n);
            -Complex64::new(mu, theta).sinh()
        })
        .collect();
    let mut gain = poles
        .iter()
        .fold(Complex64::new(1.0, 0.0), |acc, p| acc * (-p))
        .re;
    if order.is_multiple_of(2) {
        gain /= (1.0 + eps * eps).sqrt();
    }

    // prewarp and scale to the requested edge (bilinear with fs = 2)
    let fs2 = 4.0;
    let warped = fs2 * (PI * wn / 2.0).tan();
    for p in &mut poles {
        *p *= warped;
    }
    gain *= warped.powi(order as i32);

    // bilinear transform; all zeros land at z = -1
    let denom = poles
        .iter()
        .fold(Complex64::new(1.0, 0.0), |acc, p| acc * (fs2 - p));
    gain *= (Complex64::new(1.0, 0.0) / denom).re;
    let z_poles: Vec<Complex64> = poles.iter().map(|p| (fs2 + p) / (fs2 - p)).collect();
    let zeros = vec![Complex64::new(-1.0, 0.0); order];

    let b = poly(&zeros).into_iter().map(|c| c * gain).collect();
    let a = poly(&z_poles);
    let sections = to_sections(&z_poles, gain);
    Ok(Coefficients {
        b,
        a,
        sections,
        poles: z_poles,
    })
}

/// Group conjugate pole pairs into biquads with zeros at `z = -1`. The
/// section with the poles farthest from the unit circle comes first and
/// carries the overall gain.
fn to_sections(poles: &[Complex64], gain: f64) -> Vec<Section> {
    let mut complex: Vec<Complex64> = poles.iter().filter(|p| p.im > 1e-12).copied().collect();
    let mut real: Vec<f64> = poles.iter().filter(|p| p.im.abs() <= 1e-12).map(|p| p.re).collect();
    complex.sort_by(|x, y| x.norm().total_cmp(&y.norm()));
    real.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    let mut out: Vec<(f64, Section)> = complex
        .iter()
        .map(|p| (p.norm(), [1.0, 2.0, 1.0, 1.0, -2.0 * p.re, p.norm_sqr()]))
        .collect();
    for pair in real.chunks(2) {
        let s = match *pair {
            [p, q] => [1.0, 2.0, 1.0, 1.0, -(p + q), p * q],
            [p] => [1.0, 1.0, 0.0, 1.0, -p, 0.0],
            _ => unreachable!(),
        };
        out.push((pair.iter().fold(0.0f64, |m, p| m.max(p.abs())), s));
    }
    out.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut sections: Vec<Section> = out.into_iter().map(|(_, s)| s).collect();
    if let Some(s) = sections.first_mut() {
        for v in &mut s[..3] {
            *v *= gain;
        }
    }
    sections
}

/// Real coefficients of `prod (z - r)`, highest power first.
fn poly(roots: &[Complex64]) -> Vec<f64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (i, &ci) in c.iter().enumerate() {
            next[i] += ci;
            next[i + 1] -= ci * r;
        }
        c = next;
    }
    c.into_iter().map(|v| v.re).collect()
}

/// Steady-state filter state for a unit step input.
pub(crate) fn steady_state(b: &[f64], a: &[f64]) -> Vec<f64> {
    let n = b.len().max(a.len());
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    let dc = b.iter().sum::<f64>() / a.iter().sum::<f64>();
    let mut z = vec![0.0; n - 1];
    let mut acc = 0.0;
    for i in (0..n - 1).rev() {
        acc += at(b, i + 1) - at(a, i + 1) * dc;
        z[i] = acc;
    }
    z
}

/// Causal IIR filtering, transposed direct form II, initial state `zi`.
pub fn lfilter(b: &[f64], a: &[f64], x: &[f64], zi: &[f64]) -> Vec<f64> {
    let n = b.len().max(a.len());
    let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
    let a0 = a[0];
    let mut z = zi.to_vec();
    z.resize(n - 1, 0.0);
    let mut y = Vec::with_capacity(x.len());
    for &xi in x {
        let yi = (at(b, 0) * xi + z.first().copied().unwrap_or(0.0)) / a0;
        for k in 0..n - 1 {
            let next = z.get(k + 1).copied().unwrap_or(0.0);
            z[k] = at(b, k + 1) * xi - at(a, k + 1) * yi + next;
        }
        y.push(yi);
    }
    y
}

/// Cascade the sections over `x`; `zi[s]` is the state of section `s`.
fn sosfilt(sections: &[Section], x: &[f64], zi: &[[f64; 2]]) -> Vec<f64> {
    let mut y = x.to_vec();
    for (s, z0) in sections.iter().zip(zi) {
        let [b0, b1, b2, _, a1, a2] = *s;
        let (mut z1, mut z2) = (z0[0], z0[1]);
        for v in &mut y {
            let xi = *v;
            let yi = b0 * xi + z1;
            z1 = b1 * xi - a1 * yi + z2;
            z2 = b2 * xi - a2 * yi;
            *v = yi;
        }
    }
    y
}

/// Per-section steady state for a unit step at the cascade input.
fn sections_steady_state(sections: &[Section]) -> Vec<[f64; 2]> {
    let mut scale = 1.0;
    sections
        .iter()
        .map(|s| {
            let z = steady_state(&s[..3], &s[3..]);
            let out = [scale * z[0], scale * z[1]];
            scale *= (s[0] + s[1] + s[2]) / (s[3] + s[4] + s[5]);
            out
        })
        .collect()
}

/// Forward filtering from steady state at the first sample.
pub fn filter_causal(c: &Coefficients, x: &[f64]) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let zi: Vec<[f64; 2]> = sections_steady_state(&c.sections)
        .iter()
        .map(|z| [z[0] * x[0], z[1] * x[0]])
        .collect();
    sosfilt(&c.sections, x, &zi)
}

/// Default odd-extension length for [`filtfilt`]: three times the
/// transfer-function length.
pub fn default_padlen(c: &Coefficients) -> usize {
    3 * c.b.len().max(c.a.len())
}

/// Zero-phase forward-backward filtering with odd extension of `padlen`
/// samples on each side. Requires `x.len() > padlen`.
pub fn filtfilt(c: &Coefficients, x: &[f64], padlen: usize) -> Result<Vec<f64>> {
    let n = x.len();
    if n <= padlen {
        return Err(Error::Filter(format!(
            "signal length {n} must exceed padding {padlen}"
        )));
    }
    let mut ext = Vec::with_capacity(n + 2 * padlen);
    for i in (1..=padlen).rev() {
        ext.push(2.0 * x[0] - x[i]);
    }
    ext.extend_from_slice(x);
    for i in 1..=padlen {
        ext.push(2.0 * x[n - 1] - x[n - 1 - i]);
    }
    let zi = sections_steady_state(&c.sections);
    let init = |v: f64| zi.iter().map(|z| [z[0] * v, z[1] * v]).collect::<Vec<_>>();
    let mut y = sosfilt(&c.sections, &ext, &init(ext[0]));
    y.reverse();
    let mut y = sosfilt(&c.sections, &y, &init(y[0]));
    y.reverse();
    Ok(y[padlen..padlen + n].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(got: &[f64], want: &[f64], tol: f64) {
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() <= tol * w.abs().max(1.0), "{g} vs {w}");
        }
    }

    // Reference values frozen from scipy.signal.cheby1 / filtfilt.
    #[test]
    fn matches_reference_coefficients() {
        let c = chebyshev1_lowpass(2, 1.0, 0.5).unwrap();
        assert_close(&c.b, &[0.3070432012590639, 0.6140864025181278, 0.3070432012590639], 1e-12);
        assert_close(&c.a, &[1.0, 0.06406405700380895, 0.3139684953186774], 1e-12);

        let c = chebyshev1_lowpass(7, 0.05, 0.16).unwrap();
        assert_close(
            &c.b,
            &[
                5.8759228363433086e-06, 4.1131459854403163e-05, 1.2339437956320948e-04,
                2.0565729927201579e-04, 2.0565729927201579e-04, 1.2339437956320948e-04,
                4.1131459854403163e-05, 5.8759228363433086e-06,
            ],
            1e-9,
        );
        assert_close(
            &c.a,
            &[
                1.0, -5.633617292062548, 14.010591238526258, -19.88382881647834,
                17.359007694841036, -9.31031731950279, 2.837986457075983, -0.3790698442765496,
            ],
            1e-9,
        );
        assert!((c.gain(10.0, 25.0) - 4.133901376072893e-09).abs() < 1e-12);
    }

    #[test]
    fn filtfilt_matches_reference() {
        let c = chebyshev1_lowpass(7, 0.05, 0.16).unwrap();
        let x: Vec<f64> = (0..60)
            .map(|i| (2.0 * PI * i as f64 / 25.0 * 1.3).sin() + 0.01 * i as f64)
            .collect();
        let y = filtfilt(&c, &x, default_padlen(&c)).unwrap();
        let got = [y[0], y[10], y[30], y[59]];
        assert_close(
            &got,
            &[0.00605540569641634, -0.02244471737767274, -0.06908440580539434, 1.04348207302428],
            1e-7,
        );
    }

    #[test]
    fn ripple_bounds_in_passband() {
        for order in 1..=9 {
            let c = chebyshev1_lowpass(order, 0.5, 0.3).unwrap();
            let floor = 10f64.powf(-0.5 / 20.0);
            for i in 0..=300 {
                let w = 0.3 * i as f64 / 300.0;
                let g = c.gain(w, 2.0);
                assert!(g <= 1.0 + 1e-9 && g >= floor - 1e-9, "order {order} w {w} g {g}");
            }
            assert!(c.max_pole_radius() < 1.0);
        }
    }

    #[test]
    fn steady_state_makes_step_flat() {
        let c = chebyshev1_lowpass(7, 0.05, 0.16).unwrap();
        let y = filter_causal(&c, &[3.0; 50]);
        let dc = c.dc_gain();
        for v in y {
            assert!((v - 3.0 * dc).abs() < 1e-9);
        }
    }

    #[test]
    fn sections_match_transfer_function() {
        for order in [1, 2, 5, 7, 8] {
            let c = chebyshev1_lowpass(order, 0.05, 0.16).unwrap();
            for i in 0..50 {
                let w = PI * i as f64 / 50.0;
                let z_inv = Complex64::from_polar(1.0, -w);
                let h = c.sections.iter().fold(Complex64::new(1.0, 0.0), |acc, s| {
                    acc * (s[0] + s[1] * z_inv + s[2] * z_inv * z_inv)
                        / (s[3] + s[4] * z_inv + s[5] * z_inv * z_inv)
                });
                assert!((h - c.response_at(w)).norm() < 1e-9, "order {order}");
            }
        }
    }

    #[test]
    fn normalized_dc_is_unity() {
        let c = chebyshev1_lowpass(2, 0.05, 0.4).unwrap().normalized_dc();
        assert!((c.dc_gain() - 1.0).abs() < 1e-14);
        let y = filter_causal(&c, &[2.0; 10]);
        assert!(y.iter().all(|v| (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn filtfilt_needs_length() {
        let c = chebyshev1_lowpass(7, 0.05, 0.16).unwrap();
        assert!(filtfilt(&c, &[0.0; 24], 24).is_err());
        assert_eq!(filtfilt(&c, &[0.0; 25], 24).unwrap().len(), 25);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(chebyshev1_lowpass(0, 0.05, 0.2).is_err());
        assert!(chebyshev1_lowpass(3, 0.0, 0.2).is_err());
        assert!(chebyshev1_lowpass(3, 0.05, 1.0).is_err());
    }
}
