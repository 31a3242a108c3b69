use serde::{Deserialize, Serialize};

use super::{CompensationDevice, DeviceKind};
use crate::error::{Error, Result};

/// Linear fit of a device's per-channel contribution against wavelength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceFit {
    /// One catalog unit (the fitted total divided by the device count).
    pub device: CompensationDevice,
    /// Fitted total, ps/nm per nm.
    pub slope_ps_per_nm2: f64,
    /// Fitted total at `lambda0`, ps/nm.
    pub intercept_ps_per_nm: f64,
    /// RMS misfit over the rows kept, ps.
    pub rms_ps: f64,
    /// Indices of rows excluded as outliers.
    pub outliers: Vec<usize>,
}

fn least_squares(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 1e-18 * mx.abs().max(1.0)) {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Fits `rows_ps[i] = fwhm * (D + S (lambda_i - lambda0))` by least squares,
/// rows being the spread a device group adds to each channel.
///
/// With `outlier_ps` set and at least four rows, the row whose
/// leave-one-out prediction misses by the most is dropped while that miss
/// exceeds the threshold (always keeping three rows).
pub fn fit_device_coefficients(
    kind: DeviceKind,
    wavelengths_nm: &[f64],
    rows_ps: &[f64],
    channel_fwhm_nm: f64,
    device_count: usize,
    insertion_loss_db: f64,
    outlier_ps: Option<f64>,
) -> Result<DeviceFit> {
    if wavelengths_nm.len() != rows_ps.len() {
        return Err(Error::Contract("wavelength and row counts differ".into()));
    }
    if wavelengths_nm.len() < 2 {
        return Err(Error::Fit("at least two rows are required".into()));
    }
    if device_count == 0 || !(channel_fwhm_nm > 0.0) {
        return Err(Error::domain("device count and channel width must be positive"));
    }
    let lambda0 = 1550.0;
    let x: Vec<f64> = wavelengths_nm.iter().map(|w| w - lambda0).collect();
    let mut keep: Vec<usize> = (0..x.len()).collect();
    let mut outliers = Vec::new();

    let fit_on = |idx: &[usize]| {
        let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
        let ys: Vec<f64> = idx.iter().map(|&i| rows_ps[i]).collect();
        least_squares(&xs, &ys)
    };

    if let Some(threshold) = outlier_ps {
        while keep.len() >= 4 {
            let mut worst: Option<(usize, f64)> = None;
            for (pos, &i) in keep.iter().enumerate() {
                let rest: Vec<usize> = keep.iter().copied().filter(|&j| j != i).collect();
                let Some((s, c)) = fit_on(&rest) else { continue };
                let miss = (rows_ps[i] - (c + s * x[i])).abs();
                if worst.is_none_or(|(_, m)| miss > m) {
                    worst = Some((pos, miss));
                }
            }
            match worst {
                Some((pos, miss)) if miss > threshold => outliers.push(keep.remove(pos)),
                _ => break,
            }
        }
    }

    let (slope_ps, intercept_ps) =
        fit_on(&keep).ok_or_else(|| Error::Fit("rows share a single wavelength".into()))?;
    let rms_ps = (keep
        .iter()
        .map(|&i| (rows_ps[i] - (intercept_ps + slope_ps * x[i])).powi(2))
        .sum::<f64>()
        / keep.len() as f64)
        .sqrt();
    outliers.sort_unstable();

    let slope_ps_per_nm2 = slope_ps / channel_fwhm_nm;
    let intercept_ps_per_nm = intercept_ps / channel_fwhm_nm;
    let units = device_count as f64;
    Ok(DeviceFit {
        device: CompensationDevice {
            kind,
            d0_ps_per_nm: intercept_ps_per_nm / units,
            s0_ps_per_nm2: slope_ps_per_nm2 / units,
            lambda0_nm: lambda0,
            insertion_loss_db,
        },
        slope_ps_per_nm2,
        intercept_ps_per_nm,
        rms_ps,
        outliers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_rows_give_zero_slope() {
        let f = fit_device_coefficients(DeviceKind::Dcf, &[1530.0, 1540.0, 1550.0], &[-5.0; 3], 1.0, 1, 1.0, None).unwrap();
        assert!(f.slope_ps_per_nm2.abs() < 1e-12);
        assert!((f.intercept_ps_per_nm + 5.0).abs() < 1e-12);
        assert!(f.rms_ps < 1e-12);
    }

    #[test]
    fn single_wavelength_is_a_fit_error() {
        let r = fit_device_coefficients(DeviceKind::Dcf, &[1540.0, 1540.0], &[1.0, 2.0], 1.0, 1, 1.0, None);
        assert!(matches!(r, Err(Error::Fit(_))));
        let r = fit_device_coefficients(DeviceKind::Dcf, &[1540.0], &[1.0], 1.0, 1, 1.0, None);
        assert!(matches!(r, Err(Error::Fit(_))));
    }

    #[test]
    fn exact_line_is_recovered_and_split_per_device() {
        let wl = [1531.0, 1535.0, 1539.0, 1543.0];
        let rows: Vec<f64> = wl.iter().map(|w| 2.0 * (-600.0 - 3.0 * (w - 1550.0))).collect();
        let f = fit_device_coefficients(DeviceKind::Dcm, &wl, &rows, 2.0, 3, 3.0, Some(5.0)).unwrap();
        assert!((f.slope_ps_per_nm2 + 3.0).abs() < 1e-10);
        assert!((f.device.d0_ps_per_nm + 200.0).abs() < 1e-9);
        assert!((f.device.s0_ps_per_nm2 + 1.0).abs() < 1e-10);
        assert!(f.outliers.is_empty());
    }

    #[test]
    fn a_single_bad_row_is_flagged() {
        let wl: Vec<f64> = (0..9).map(|i| 1543.0 - 1.6 * i as f64).collect();
        let mut rows: Vec<f64> = wl.iter().map(|w| -200.0 + 0.8 * (w - 1550.0)).collect();
        rows[0] -= 12.0;
        let f = fit_device_coefficients(DeviceKind::Dcf, &wl, &rows, 1.25, 1, 1.0, Some(5.0)).unwrap();
        assert_eq!(f.outliers, vec![0]);
        assert!(f.rms_ps < 1e-9);
    }
}
