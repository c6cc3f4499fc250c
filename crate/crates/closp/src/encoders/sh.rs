use crate::error::{Error, Result};
use crate::ndmath::Tensor;

/// Real orthonormal spherical-harmonic features for a point on the globe.
///
/// Colatitude is 90 - lat and azimuth is lon. The output holds Y_l^m for
/// l = 0..=degree, m = -l..=l in (l, m) lexicographic order, so its length
/// is (degree+1)^2. Orthonormal means integrating Y_a * Y_b over the sphere
/// gives exactly the identity, which the tests verify by quadrature.
pub fn sh_encode(lon: f64, lat: f64, degree: usize) -> Result<Tensor> {
    check_coords(lon, lat)?;
    let theta = (90.0 - lat).to_radians();
    let phi = lon.to_radians();
    let x = theta.cos();
    let legendre = associated_legendre(degree, x);

    let mut out = vec![0.0; (degree + 1) * (degree + 1)];
    let sqrt2 = std::f64::consts::SQRT_2;
    for l in 0..=degree {
        for m in 0..=l {
            let k = norm_factor(l, m);
            let p = legendre[plm_index(l, m)];
            if m == 0 {
                out[l * l + l] = k * p;
            } else {
                let mf = m as f64;
                out[l * l + l + m] = sqrt2 * k * (mf * phi).cos() * p;
                out[l * l + l - m] = sqrt2 * k * (mf * phi).sin() * p;
            }
        }
    }
    Tensor::new(&[out.len()], out)
}

pub(crate) fn check_coords(lon: f64, lat: f64) -> Result<()> {
    if !(-180.0..=180.0).contains(&lon) || !lon.is_finite() {
        return Err(Error::Domain(format!(
            "longitude {lon} outside [-180, 180]"
        )));
    }
    if !(-90.0..=90.0).contains(&lat) || !lat.is_finite() {
        return Err(Error::Domain(format!("latitude {lat} outside [-90, 90]")));
    }
    Ok(())
}

fn plm_index(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

/// P_l^m(x) for all 0 <= m <= l <= degree, Condon-Shortley phase included,
/// packed triangularly.
fn associated_legendre(degree: usize, x: f64) -> Vec<f64> {
    let mut p = vec![0.0; (degree + 1) * (degree + 2) / 2];
    let sin_theta = (1.0 - x * x).max(0.0).sqrt();
    p[plm_index(0, 0)] = 1.0;
    for m in 1..=degree {
        // P_m^m = -(2m-1) * sin(theta) * P_{m-1}^{m-1}
        p[plm_index(m, m)] = -((2 * m - 1) as f64) * sin_theta * p[plm_index(m - 1, m - 1)];
    }
    for m in 0..degree {
        // P_{m+1}^m = x (2m+1) P_m^m
        p[plm_index(m + 1, m)] = x * (2 * m + 1) as f64 * p[plm_index(m, m)];
    }
    for m in 0..=degree {
        for l in m + 2..=degree {
            // (l-m) P_l^m = x (2l-1) P_{l-1}^m - (l+m-1) P_{l-2}^m
            p[plm_index(l, m)] = (x * (2 * l - 1) as f64 * p[plm_index(l - 1, m)]
                - (l + m - 1) as f64 * p[plm_index(l - 2, m)])
                / (l - m) as f64;
        }
    }
    p
}

fn norm_factor(l: usize, m: usize) -> f64 {
    // sqrt((2l+1)/(4 pi) * (l-m)!/(l+m)!)
    let mut ratio = 1.0;
    for k in (l - m + 1)..=(l + m) {
        ratio /= k as f64;
    }
    ((2 * l + 1) as f64 / (4.0 * std::f64::consts::PI) * ratio).sqrt()
}
