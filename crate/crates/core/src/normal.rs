//! Standard normal distribution functions.
//!
//! The pseudo-observation kernels evaluate `Φ(η)`, `1 − Φ(η)` and `φ(η)` for
//! every pair on every solver pass, so they are computed jointly from a single
//! exponential. Lower and upper tails are both returned directly, which keeps
//! full relative precision in whichever tail is small.
//!
//! The rational approximations are W. J. Cody's (1969) for the CDF and
//! Wichura's AS 241 (PPND16) for the quantile, both good to roughly machine
//! precision.

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const SQRT_32: f64 = 5.656_854_249_492_380_5;

/// `Φ(x)`, `1 − Φ(x)` and `φ(x)` evaluated together.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalTails {
    pub lower: f64,
    pub upper: f64,
    pub density: f64,
}

#[inline]
pub fn density(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

#[inline]
pub fn cdf(x: f64) -> f64 {
    tails(x).lower
}

#[inline]
pub fn tails(x: f64) -> NormalTails {
    const A: [f64; 5] = [
        2.235_252_035_460_683_9,
        161.028_231_068_555_88,
        1_067.689_485_460_371,
        18_154.981_253_343_56,
        0.065_682_337_918_207_45,
    ];
    const B: [f64; 4] = [
        47.202_581_904_688_24,
        976.098_551_737_776_7,
        10_260.932_208_618_978,
        45_507.789_335_026_73,
    ];
    const C: [f64; 9] = [
        0.398_941_512_088_134_66,
        8.883_149_794_388_376,
        93.506_656_132_177_86,
        597.270_276_394_800_3,
        2_494.537_585_290_372_6,
        6_848.190_450_536_283,
        11_602.651_437_647_35,
        9_842.714_838_383_978,
        1.076_557_677_372_019_2e-8,
    ];
    const D: [f64; 8] = [
        22.266_688_044_328_116,
        235.387_901_782_625,
        1_519.377_599_407_554_8,
        6_485.558_298_266_761,
        18_615.571_640_885_097,
        34_900.952_721_145_98,
        38_912.003_286_093_27,
        19_685.429_676_859_99,
    ];
    const P: [f64; 6] = [
        0.215_898_534_057_957,
        0.127_401_161_160_247_36,
        0.022_235_277_870_649_807,
        0.001_421_619_193_227_893_5,
        2.911_287_495_116_879_2e-5,
        0.023_073_441_764_940_174,
    ];
    const Q: [f64; 5] = [
        1.284_260_096_144_911_2,
        0.468_238_212_480_865_1,
        0.065_988_137_868_928_55,
        0.003_782_396_332_027_582_4,
        7.297_515_550_839_662e-5,
    ];

    let y = x.abs();
    let density = density(x);
    if y <= 0.674_489_75 {
        let (mut num, mut den) = (0.0, 0.0);
        if y > f64::EPSILON * 0.5 {
            let xsq = x * x;
            num = A[4] * xsq;
            den = xsq;
            for k in 0..3 {
                num = (num + A[k]) * xsq;
                den = (den + B[k]) * xsq;
            }
        }
        let t = x * (num + A[3]) / (den + B[3]);
        return NormalTails {
            lower: 0.5 + t,
            upper: 0.5 - t,
            density,
        };
    }

    // small tail mass, before orienting by the sign of x
    let small = if y <= SQRT_32 {
        let mut num = C[8] * y;
        let mut den = y;
        for k in 0..7 {
            num = (num + C[k]) * y;
            den = (den + D[k]) * y;
        }
        (density / FRAC_1_SQRT_2PI) * (num + C[7]) / (den + D[7])
    } else if y < 37.5193 {
        let xsq = 1.0 / (x * x);
        let mut num = P[5] * xsq;
        let mut den = xsq;
        for k in 0..4 {
            num = (num + P[k]) * xsq;
            den = (den + Q[k]) * xsq;
        }
        let r = xsq * (num + P[4]) / (den + Q[4]);
        (density / FRAC_1_SQRT_2PI) * (FRAC_1_SQRT_2PI - r) / y
    } else {
        0.0
    };
    if x > 0.0 {
        NormalTails {
            lower: 1.0 - small,
            upper: small,
            density,
        }
    } else {
        NormalTails {
            lower: small,
            upper: 1.0 - small,
            density,
        }
    }
}

/// Standard normal quantile `Φ⁻¹(p)`.
///
/// Returns `-inf`/`inf` at 0 and 1 and NaN outside `[0, 1]`.
pub fn quantile(p: f64) -> f64 {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let q = p - 0.5;
    let mut val = if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        q * (((((((r * 2_509.080_928_730_122_7 + 33_430.575_583_588_13) * r + 67_265.770_927_008_7) * r
            + 45_921.953_931_549_87)
            * r
            + 13_731.693_765_509_461)
            * r
            + 1_971.590_950_306_551_3)
            * r
            + 133.141_667_891_784_38)
            * r
            + 3.387_132_872_796_366_5)
            / (((((((r * 5_226.495_278_852_546 + 28_729.085_735_721_943) * r + 39_307.895_800_092_71) * r
                + 21_213.794_301_586_597)
                * r
                + 5_394.196_021_424_751)
                * r
                + 687.187_007_492_057_9)
                * r
                + 42.313_330_701_600_91)
                * r
                + 1.0)
    } else {
        let tail = if q < 0.0 { p } else { 1.0 - p };
        let mut r = (-tail.ln()).sqrt();
        let v = if r <= 5.0 {
            r -= 1.6;
            (((((((r * 7.745_450_142_783_414e-4 + 0.022_723_844_989_269_184) * r + 0.241_780_725_177_450_6) * r
                + 1.270_458_252_452_368_4)
                * r
                + 3.647_848_324_763_204_5)
                * r
                + 5.769_497_221_460_691)
                * r
                + 4.630_337_846_156_545)
                * r
                + 1.423_437_110_749_683_5)
                / (((((((r * 1.050_750_071_644_416_9e-9 + 5.475_938_084_995_345e-4) * r
                    + 0.015_198_666_563_616_457)
                    * r
                    + 0.148_103_976_427_480_08)
                    * r
                    + 0.689_767_334_985_1)
                    * r
                    + 1.676_384_830_183_803_8)
                    * r
                    + 2.053_191_626_637_759)
                    * r
                    + 1.0)
        } else {
            r -= 5.0;
            (((((((r * 2.010_334_399_292_288_1e-7 + 2.711_555_568_743_487_6e-5) * r + 0.001_242_660_947_388_078_4)
                * r
                + 0.026_532_189_526_576_124)
                * r
                + 0.296_560_571_828_504_9)
                * r
                + 1.784_826_539_917_291_3)
                * r
                + 5.463_784_911_164_114)
                * r
                + 6.657_904_643_501_103)
                / (((((((r * 2.044_263_103_389_939_7e-15 + 1.421_511_758_316_446e-7) * r
                    + 1.846_318_317_510_054_8e-5)
                    * r
                    + 7.868_691_311_456_133e-4)
                    * r
                    + 0.014_875_361_290_850_615)
                    * r
                    + 0.136_929_880_922_735_8)
                    * r
                    + 0.599_832_206_555_888)
                    * r
                    + 1.0)
        };
        if q < 0.0 {
            -v
        } else {
            v
        }
    };
    // One Newton polish against the tail that carries the precision.
    let t = tails(val);
    if t.density > 0.0 {
        let step = if q < 0.0 {
            (t.lower - p) / t.density
        } else {
            ((1.0 - p) - t.upper) / t.density
        };
        if step.is_finite() {
            val -= step;
        }
    }
    val
}

/// Two-sided critical value `z_{1−α/2}`.
pub fn two_sided_critical(alpha: f64) -> f64 {
    quantile(1.0 - 0.5 * alpha)
}

/// Two-sided p-value for a standard normal statistic.
pub fn two_sided_p(z: f64) -> f64 {
    (2.0 * tails(-z.abs()).lower).min(1.0)
}
