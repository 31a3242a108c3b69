//! Physical constants and the handful of unit conversions the models share.

/// Planck constant, J s (exact, SI 2019).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Speed of light expressed in nm * THz, so that `nu_thz = C_NM_THZ / lambda_nm`.
pub const C_NM_THZ: f64 = 299_792.458;

pub fn nm_to_thz(wavelength_nm: f64) -> f64 {
    C_NM_THZ / wavelength_nm
}

pub fn thz_to_nm(freq_thz: f64) -> f64 {
    C_NM_THZ / freq_thz
}

pub fn db_to_transmittance(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

pub fn transmittance_to_db(t: f64) -> f64 {
    -10.0 * t.log10()
}

/// Gaussian FWHM to standard deviation.
pub fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm / (8.0 * std::f64::consts::LN_2).sqrt()
}

pub fn sigma_to_fwhm(sigma: f64) -> f64 {
    sigma * (8.0 * std::f64::consts::LN_2).sqrt()
}
