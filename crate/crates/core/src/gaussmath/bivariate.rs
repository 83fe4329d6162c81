//! Bivariate normal CDF after Genz's double-precision refinement of the
//! Drezner–Wesolowsky method.
#![allow(clippy::excessive_precision)]

use std::f64::consts::PI;

use super::normal::ncdf;
use super::{Gaussian2, CORRELATION_CLAMP};
use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

/// Correlations this close to +-1 use the perfect-correlation limit.
const SINGULAR_R: f64 = 1.0 - 1e-12;

// Gauss-Legendre (weight, positive node) pairs on [-1, 1].
const GL6: [(f64, f64); 3] = [
    (0.1713244923791705, 0.9324695142031522),
    (0.3607615730481384, 0.6612093864662647),
    (0.4679139345726904, 0.2386191860831970),
];

const GL12: [(f64, f64); 6] = [
    (0.4717533638651177e-1, 0.9815606342467191),
    (0.1069393259953183, 0.9041172563704750),
    (0.1600783285433464, 0.7699026741943050),
    (0.2031674267230659, 0.5873179542866171),
    (0.2334925365383547, 0.3678314989981802),
    (0.2491470458134029, 0.1252334085114692),
];

const GL20: [(f64, f64); 10] = [
    (0.1761400713915212e-1, 0.9931285991850949),
    (0.4060142980038694e-1, 0.9639719272779138),
    (0.6267204833410906e-1, 0.9122344282513259),
    (0.8327674157670475e-1, 0.8391169718222188),
    (0.1019301198172404, 0.7463319064601508),
    (0.1181945319615184, 0.6360536807265150),
    (0.1316886384491766, 0.5108670019508271),
    (0.1420961093183821, 0.3737060887154196),
    (0.1491729864726037, 0.2277858511416451),
    (0.1527533871307259, 0.7652652113349733e-1),
];

fn rule_for(r_abs: f64) -> &'static [(f64, f64)] {
    if r_abs < 0.3 {
        &GL6
    } else if r_abs < 0.75 {
        &GL12
    } else {
        &GL20
    }
}

/// Upper orthant probability `P(X > h, Y > k)` for standard normals with
/// correlation `r`. `r` must lie in `[-1, 1]`.
pub fn bvn_upper(h: f64, k: f64, r: f64) -> f64 {
    debug_assert!((-1.0..=1.0).contains(&r));
    if h == f64::INFINITY || k == f64::INFINITY {
        return 0.0;
    }
    if h == f64::NEG_INFINITY {
        return if k == f64::NEG_INFINITY {
            1.0
        } else {
            ncdf(-k)
        };
    }
    if k == f64::NEG_INFINITY {
        return ncdf(-h);
    }
    if r == 0.0 {
        return ncdf(-h) * ncdf(-k);
    }

    let r = if r.abs() > SINGULAR_R { r.signum() } else { r };
    let rule = rule_for(r.abs());
    let mut hk = h * k;
    let mut bvn = 0.0;

    if r.abs() < 0.925 {
        let hs = 0.5 * (h * h + k * k);
        let asr = 0.5 * r.asin();
        for &(w, x) in rule {
            for node in [1.0 - x, 1.0 + x] {
                let sn = (asr * node).sin();
                bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        bvn = bvn * asr / TWO_PI + ncdf(-h) * ncdf(-k);
    } else {
        let mut k = k;
        if r < 0.0 {
            k = -k;
            hk = -hk;
        }
        if r.abs() < 1.0 {
            let as_ = (1.0 - r) * (1.0 + r);
            let mut a = as_.sqrt();
            let bs = (h - k) * (h - k);
            let c = (4.0 - hk) / 8.0;
            let d = (12.0 - hk) / 80.0;
            let asr = -0.5 * (bs / as_ + hk);
            if asr > -100.0 {
                bvn = a
                    * asr.exp()
                    * (1.0 - c * (bs - as_) * (1.0 - d * bs) / 3.0 + c * d * as_ * as_);
            }
            if hk > -100.0 {
                let b = bs.sqrt();
                let sp = TWO_PI.sqrt() * ncdf(-b / a);
                bvn -= (-0.5 * hk).exp() * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
            }
            a *= 0.5;
            let mut sum = 0.0;
            for &(w, x) in rule {
                for node in [1.0 - x, 1.0 + x] {
                    let xs = (a * node) * (a * node);
                    let asr = -0.5 * (bs / xs + hk);
                    if asr > -100.0 {
                        let sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
                        let rs = (1.0 - xs).sqrt();
                        let ep = (-0.5 * hk * xs / ((1.0 + rs) * (1.0 + rs))).exp() / rs;
                        sum += w * asr.exp() * (sp - ep);
                    }
                }
            }
            bvn = (a * sum - bvn) / TWO_PI;
        }
        if r > 0.0 {
            bvn += ncdf(-h.max(k));
        } else if h >= k {
            bvn = -bvn;
        } else {
            let span = if h < 0.0 {
                ncdf(k) - ncdf(h)
            } else {
                ncdf(-h) - ncdf(-k)
            };
            bvn = span - bvn;
        }
    }
    bvn.clamp(0.0, 1.0)
}

/// `P(U <= x1, V <= x2)` for the pair `g`. Both variances must be positive.
pub fn bivariate_normal_cdf(x1: f64, x2: f64, g: &Gaussian2) -> Result<f64> {
    g.validate()?;
    if !(x1.is_finite() && x2.is_finite()) {
        return Err(Error::domain("bivariate_normal_cdf limits must be finite"));
    }
    if g.var_u <= 0.0 || g.var_v <= 0.0 {
        return Err(Error::domain(
            "bivariate_normal_cdf requires positive variances",
        ));
    }
    let su = g.var_u.sqrt();
    let sv = g.var_v.sqrt();
    let raw = g.cov_uv / (su * sv);
    if raw.abs() > 1.0 + CORRELATION_CLAMP {
        return Err(Error::domain(format!("correlation {raw} outside [-1, 1]")));
    }
    let r = raw.clamp(-1.0, 1.0);
    let h = (x1 - g.mean_u) / su;
    let k = (x2 - g.mean_v) / sv;
    Ok(bvn_upper(-h, -k, r))
}
