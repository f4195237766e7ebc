//! Scalar numerics used throughout: stable logistic transforms, log-sum-exp,
//! and normal distribution helpers. Transcendentals go through `libm` so the
//! crate builds without `std`.

pub(crate) use libm::{exp, expm1, log, log1p, sqrt};

pub(crate) fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// log Γ(a + k) - log Γ(a) for integer k >= 0, stable for any `a`. A direct
/// `lgamma` difference loses whole nats once `a` is large (the values grow
/// like a·log a while their spacing stays put), so small `k` gets the exact
/// product form and large `a` a Stirling difference.
pub(crate) fn ln_gamma_diff(a: f64, k: f64) -> f64 {
    if k <= 256.0 {
        let mut acc = 0.0;
        let mut j = 0.0;
        while j < k {
            acc += log(a + j);
            j += 1.0;
        }
        acc
    } else if a >= 1e6 {
        // (a+k-1/2)·log(a+k) - (a-1/2)·log a - k, with the log difference
        // taken through log1p; the dropped 1/(12a) corrections are O(k/a²)
        (a - 0.5) * log1p(k / a) + k * log(a + k) - k
    } else {
        ln_gamma(a + k) - ln_gamma(a)
    }
}

pub(crate) fn floor(x: f64) -> f64 {
    libm::floor(x)
}

pub const LN_2PI: f64 = 1.8378770664093453_f64;

/// log(1 + exp(t)) without overflow for large |t|.
pub fn ln_1p_exp(t: f64) -> f64 {
    if t > 30.0 {
        // exp(-t) < 1e-13, so log1p(exp(-t)) ~ exp(-t); t dominates anyway.
        t + log1p(exp(-t))
    } else if t < -30.0 {
        exp(t)
    } else {
        log1p(exp(t))
    }
}

/// log(1 - exp(a)) for a <= 0, switching forms at the usual -ln 2 knee to
/// keep precision at both ends. Returns -∞ at a = 0.
pub fn log1m_exp(a: f64) -> f64 {
    if a >= 0.0 {
        if a == 0.0 {
            return f64::NEG_INFINITY;
        }
        return f64::NAN;
    }
    if a > -core::f64::consts::LN_2 {
        log(-expm1(a))
    } else {
        log1p(-exp(a))
    }
}

/// Logistic function 1 / (1 + exp(-t)), evaluated without overflow.
pub fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + exp(-t))
    } else {
        let e = exp(t);
        e / (1.0 + e)
    }
}

/// log(logistic(t)), accurate far into both tails.
pub fn log_logistic(t: f64) -> f64 {
    -ln_1p_exp(-t)
}

/// log(Σ exp(aᵢ)) over two terms. Handles -∞ inputs.
pub fn log_sum_exp2(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + log1p(exp(lo - hi))
}

/// log(Σ exp(aᵢ)) over a slice, summing left to right after factoring out the
/// maximum. Empty input yields -∞.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let mut hi = f64::NEG_INFINITY;
    for &t in terms {
        if t > hi {
            hi = t;
        }
    }
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut acc = 0.0;
    for &t in terms {
        acc += exp(t - hi);
    }
    hi + log(acc)
}

/// Standard normal density in log form.
pub fn normal_logpdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - log(sd) - 0.5 * LN_2PI
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / core::f64::consts::SQRT_2)
}

/// Two-sided tail probability 2·(1 - Φ(|z|)), computed through erfc so that
/// large |z| keeps precision.
pub fn two_sided_p(z: f64) -> f64 {
    libm::erfc(z.abs() / core::f64::consts::SQRT_2)
}

/// Standard normal quantile (Wichura's algorithm AS 241, double precision).
///
/// Accurate to about 1e-15 over (0, 1). Returns ±∞ at the endpoints and NaN
/// outside [0, 1].
pub fn normal_quantile(p: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(r, &A_NORM) / poly(r, &B_NORM);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let mut r = sqrt(-log(r));
    let val = if r <= 5.0 {
        r -= 1.6;
        poly(r, &C_NORM) / poly(r, &D_NORM)
    } else {
        r -= 5.0;
        poly(r, &E_NORM) / poly(r, &F_NORM)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

fn poly(x: f64, coef: &[f64]) -> f64 {
    let mut acc = 0.0;
    for &c in coef.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

const A_NORM: [f64; 8] = [
    3.387_132_872_796_366_5e0,
    1.331_416_678_917_843_8e2,
    1.971_590_950_306_551_3e3,
    1.373_169_376_550_946e4,
    4.592_195_393_154_987e4,
    6.726_577_092_700_87e4,
    3.343_057_558_358_813e4,
    2.509_080_928_730_122_7e3,
];
const B_NORM: [f64; 8] = [
    1.0,
    4.231_333_070_160_091e1,
    6.871_870_074_920_579e2,
    5.394_196_021_424_751e3,
    2.121_379_430_158_659_7e4,
    3.930_789_580_009_271e4,
    2.872_908_573_572_194_3e4,
    5.226_495_278_852_545_6e3,
];
const C_NORM: [f64; 8] = [
    1.423_437_110_749_683_5e0,
    4.630_337_846_156_545e0,
    5.769_497_221_460_691e0,
    3.647_848_324_763_204_5e0,
    1.270_458_252_452_368_4e0,
    2.417_807_251_774_506e-1,
    2.272_384_498_926_918_4e-2,
    7.745_450_142_783_414e-4,
];
const D_NORM: [f64; 8] = [
    1.0,
    2.053_191_626_637_758_9e0,
    1.676_384_830_183_803_8e0,
    6.897_673_349_851e-1,
    1.481_039_764_274_800_8e-1,
    1.519_866_656_361_645_7e-2,
    5.475_938_084_995_345e-4,
    1.050_750_071_644_416_9e-9,
];
const E_NORM: [f64; 8] = [
    6.657_904_643_501_103e0,
    5.463_784_911_164_114e0,
    1.784_826_539_917_291_3e0,
    2.965_605_718_285_048_7e-1,
    2.653_218_952_657_612_4e-2,
    1.242_660_947_388_078_4e-3,
    2.711_555_568_743_487_6e-5,
    2.010_334_399_292_288_1e-7,
];
const F_NORM: [f64; 8] = [
    1.0,
    5.998_322_065_558_88e-1,
    1.369_298_809_227_358e-1,
    1.487_536_129_085_061_5e-2,
    7.868_691_311_456_133e-4,
    1.846_318_317_510_054_8e-5,
    1.421_511_758_316_446e-7,
    2.044_263_103_389_939_7e-15,
];
