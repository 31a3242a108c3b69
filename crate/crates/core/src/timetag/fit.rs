use serde::{Deserialize, Serialize};

use super::TimetagStream;
use crate::error::{Error, Result};
use crate::units::sigma_to_fwhm;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramFit {
    /// (bin centre relative to the offset, count).
    pub bins: Vec<(f64, u64)>,
    pub fit_center_ps: f64,
    pub fit_fwhm_ps: f64,
    /// Peak height above the floor, counts per bin.
    pub fit_amplitude: f64,
    /// Counts under the Gaussian.
    pub fit_area: f64,
    pub fit_floor: f64,
    pub residual_rms: f64,
}

/// Histogram of every `tB - tA - offset` inside `[-span/2, span/2)`.
pub fn histogram(a: &TimetagStream, b: &TimetagStream, bin_width_ps: f64, span_ps: f64, offset_ps: i64) -> Result<Vec<(f64, u64)>> {
    if !(bin_width_ps > 0.0 && span_ps >= bin_width_ps) {
        return Err(Error::domain("bin width must be positive and no wider than the span"));
    }
    if !a.is_sorted() || !b.is_sorted() {
        return Err(Error::Contract("timetag streams must be sorted".into()));
    }
    let nbins = (span_ps / bin_width_ps).round() as usize;
    let half = 0.5 * nbins as f64 * bin_width_ps;
    let mut counts = vec![0u64; nbins];
    let mut lo = 0usize;
    for ea in &a.events {
        let ta = ea.time_ps as f64 + offset_ps as f64;
        while lo < b.events.len() && (b.events[lo].time_ps as f64) < ta - half {
            lo += 1;
        }
        let mut j = lo;
        while j < b.events.len() {
            let d = b.events[j].time_ps as f64 - ta;
            if d >= half {
                break;
            }
            let k = ((d + half) / bin_width_ps).floor() as usize;
            counts[k.min(nbins - 1)] += 1;
            j += 1;
        }
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (-half + (i as f64 + 0.5) * bin_width_ps, c))
        .collect())
}

pub fn histogram_csv(bins: &[(f64, u64)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bin_center_ps", "count"]).map_err(|e| Error::Format(e.to_string()))?;
    for (c, n) in bins {
        w.write_record([format!("{c:.1}"), n.to_string()]).map_err(|e| Error::Format(e.to_string()))?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Format(e.to_string()))?).map_err(|e| Error::Format(e.to_string()))
}

// p = [centre, ln sigma, area, floor]; Gaussian integrated over each bin so
// that peaks narrower than a bin stay well posed.
fn model(p: &[f64; 4], x: f64, bw: f64) -> f64 {
    let s = p[1].exp() * std::f64::consts::SQRT_2;
    let (lo, hi) = (x - 0.5 * bw - p[0], x + 0.5 * bw - p[0]);
    p[2] * 0.5 * (libm::erf(hi / s) - libm::erf(lo / s)) + p[3]
}

fn cost(p: &[f64; 4], xs: &[f64], ys: &[f64], bw: f64) -> f64 {
    xs.iter().zip(ys).map(|(&x, &y)| (y - model(p, x, bw)).powi(2)).sum()
}

#[allow(clippy::needless_range_loop)]
fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let s: f64 = (row + 1..4).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

fn levenberg_marquardt(mut p: [f64; 4], xs: &[f64], ys: &[f64], bw: f64) -> [f64; 4] {
    let mut lambda = 1e-3;
    let mut c = cost(&p, xs, ys, bw);
    for _ in 0..300 {
        let mut jtj = [[0.0; 4]; 4];
        let mut jtr = [0.0; 4];
        for (&x, &y) in xs.iter().zip(ys) {
            let f0 = model(&p, x, bw);
            let mut g = [0.0; 4];
            for (k, gk) in g.iter_mut().enumerate() {
                let h = 1e-6 * p[k].abs().max(1e-3);
                let mut q = p;
                q[k] += h;
                *gk = (model(&q, x, bw) - f0) / h;
            }
            for i in 0..4 {
                jtr[i] += g[i] * (y - f0);
                for j in 0..4 {
                    jtj[i][j] += g[i] * g[j];
                }
            }
        }
        let mut improved = false;
        for _ in 0..20 {
            let mut a = jtj;
            for (i, row) in a.iter_mut().enumerate() {
                row[i] += lambda * jtj[i][i].max(1e-12);
            }
            let Some(d) = solve4(a, jtr) else {
                lambda *= 10.0;
                continue;
            };
            let q = [p[0] + d[0], p[1] + d[1], p[2] + d[2], p[3] + d[3]];
            let cq = cost(&q, xs, ys, bw);
            if cq.is_finite() && cq <= c {
                let done = (c - cq) <= 1e-12 * c.max(1e-300);
                p = q;
                c = cq;
                lambda = (lambda * 0.1).max(1e-12);
                improved = !done;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    p
}

/// Least-squares fit of a Gaussian on a flat floor to the `tB - tA`
/// histogram around `offset_ps`.
pub fn fit_coincidence_peak(
    a: &TimetagStream,
    b: &TimetagStream,
    bin_width_ps: f64,
    span_ps: f64,
    offset_ps: i64,
) -> Result<HistogramFit> {
    let bins = histogram(a, b, bin_width_ps, span_ps, offset_ps)?;
    fit_histogram(bins, bin_width_ps)
}

pub(crate) fn fit_histogram(bins: Vec<(f64, u64)>, bin_width_ps: f64) -> Result<HistogramFit> {
    let nonzero = bins.iter().filter(|(_, n)| *n > 0).count();
    if nonzero < 5 {
        return Err(Error::Fit(format!("only {nonzero} non-empty histogram bins; need at least 5")));
    }
    let xs: Vec<f64> = bins.iter().map(|b| b.0).collect();
    let ys: Vec<f64> = bins.iter().map(|b| b.1 as f64).collect();
    let mut sorted = ys.clone();
    sorted.sort_by(f64::total_cmp);
    let floor = sorted[sorted.len() / 2];
    let (imax, ymax) = ys.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, y)| (i, *y)).unwrap();
    let excess: f64 = ys.iter().map(|y| (y - floor).max(0.0)).sum();
    if !(ymax > floor) || excess <= 0.0 {
        return Err(Error::Fit("no peak above the floor".into()));
    }
    let sigma0 = (excess * bin_width_ps / ((ymax - floor) * (2.0 * std::f64::consts::PI).sqrt())).max(0.25 * bin_width_ps);
    let p0 = [xs[imax], sigma0.ln(), excess, floor];
    let p = levenberg_marquardt(p0, &xs, &ys, bin_width_ps);
    let sigma = p[1].exp();
    if !(sigma.is_finite() && p[2].is_finite() && p[2] > 0.0) {
        return Err(Error::Fit("peak fit did not converge".into()));
    }
    let residual_rms = (cost(&p, &xs, &ys, bin_width_ps) / xs.len() as f64).sqrt();
    Ok(HistogramFit {
        fit_center_ps: p[0],
        fit_fwhm_ps: sigma_to_fwhm(sigma),
        fit_amplitude: p[2] * bin_width_ps / (sigma * (2.0 * std::f64::consts::PI).sqrt()),
        fit_area: p[2],
        fit_floor: p[3],
        residual_rms,
        bins,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{Arm, Basis, DetectorId, Event};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, Normal};

    fn streams(offsets: &[f64], noise: usize, seed: u64) -> (TimetagStream, TimetagStream) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let da = DetectorId::new(Arm::A, Basis::Z, 0);
        let db = DetectorId::new(Arm::B, Basis::Z, 0);
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (i, off) in offsets.iter().enumerate() {
            let t = 1_000_000 + i as u64 * 50_000;
            a.push(Event { time_ps: t, detector: da });
            b.push(Event { time_ps: (t as f64 + off).round() as u64, detector: db });
        }
        let end = 1_000_000 + offsets.len() as u64 * 50_000;
        for _ in 0..noise {
            b.push(Event { time_ps: rng.gen_range(0..end), detector: db });
        }
        a.sort_unstable();
        b.sort_unstable();
        let mk = |events| TimetagStream { events, duration_s: 1.0, channel: "t".into() };
        (mk(a), mk(b))
    }

    #[test]
    fn recovers_known_width() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let n = Normal::new(0.0, crate::units::fwhm_to_sigma(80.0)).unwrap();
        let offs: Vec<f64> = (0..40_000).map(|_| n.sample(&mut rng)).collect();
        let (a, b) = streams(&offs, 20_000, 2);
        let f = fit_coincidence_peak(&a, &b, 10.0, 4000.0, 0).unwrap();
        assert!((f.fit_fwhm_ps - 80.0).abs() < 5.0, "{}", f.fit_fwhm_ps);
        assert!(f.fit_center_ps.abs() < 2.0);
    }

    #[test]
    fn delta_peak_is_below_one_bin() {
        let offs = vec![3.0; 5_000];
        let (a, b) = streams(&offs, 20_000, 3);
        let f = fit_coincidence_peak(&a, &b, 10.0, 4000.0, 0).unwrap();
        assert!(f.fit_fwhm_ps <= 10.0, "{}", f.fit_fwhm_ps);
    }

    #[test]
    fn too_few_bins_is_a_fit_error() {
        let (a, b) = streams(&[0.0, 1.0], 0, 4);
        assert!(matches!(fit_coincidence_peak(&a, &b, 10.0, 4000.0, 0), Err(Error::Fit(_))));
    }

    #[test]
    fn histogram_respects_offset() {
        let (a, b) = streams(&[500.0; 10], 0, 5);
        let h = histogram(&a, &b, 10.0, 200.0, 500).unwrap();
        assert_eq!(h.iter().map(|x| x.1).sum::<u64>(), 10);
        let h = histogram(&a, &b, 10.0, 200.0, 0).unwrap();
        assert_eq!(h.iter().map(|x| x.1).sum::<u64>(), 0);
    }
}
