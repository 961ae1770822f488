//! Branch-free link evaluation over one row of pairs.
//!
//! For fixed `i` the kernels need, for every `j > i`, the score multiplier
//! `s_ij = μ'/V · (I_ij − μ_ij)` and the information weight `μ'²/V`. Written
//! without data-dependent branches and without libm calls, the loops below
//! vectorise. They are compiled twice from the same source, once with AVX2
//! enabled (selected at run time) and once for the baseline target; no fused
//! multiply-adds are requested, so both builds round identically.

use crate::link::LinkFunction;

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const SQRT_32: f64 = 5.656_854_249_492_380_5;

/// `eˣ` for `x ≤ 0`, without division or branches. Inputs below −708 are
/// treated as −708 (result ≈ 3e−308).
#[inline(always)]
fn exp_nonpositive(x: f64) -> f64 {
    const LOG2_E: f64 = std::f64::consts::LOG2_E;
    const LN2_HI: f64 = 6.931_471_803_691_238_164_90e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_700_02e-10;
    // adding 1.5·2⁵² rounds to an integer held in the low mantissa bits
    const SHIFTER: f64 = 6_755_399_441_055_744.0;
    let x = if x < -708.0 { -708.0 } else { x };
    let shifted = x * LOG2_E + SHIFTER;
    let k = shifted - SHIFTER;
    let r = (x - k * LN2_HI) - k * LN2_LO;
    // Taylor to degree 12 on |r| ≤ ln2/2: truncation below 2e−16 relative
    let mut p = 1.0 / 479_001_600.0;
    p = p * r + 1.0 / 39_916_800.0;
    p = p * r + 1.0 / 3_628_800.0;
    p = p * r + 1.0 / 362_880.0;
    p = p * r + 1.0 / 40_320.0;
    p = p * r + 1.0 / 5_040.0;
    p = p * r + 1.0 / 720.0;
    p = p * r + 1.0 / 120.0;
    p = p * r + 1.0 / 24.0;
    p = p * r + 1.0 / 6.0;
    p = p * r + 0.5;
    p = p * r + 1.0;
    p = p * r + 1.0;
    let bits = ((shifted.to_bits() as i64).wrapping_add(1023) as u64) << 52;
    p * f64::from_bits(bits)
}

/// `(μ, μ'/V, μ'²/V)` for the probit link, branch-free. The tail mass uses
/// Cody's three rational approximations, all evaluated and then selected.
#[inline(always)]
fn probit_weights(x: f64) -> (f64, f64, f64) {
    let y = x.abs();
    let xsq = x * x;
    let e = exp_nonpositive(-0.5 * xsq);
    let density = FRAC_1_SQRT_2PI * e;

    // |x| ≤ 0.6745: Φ(−|x|) = 0.5 − |x|·R₁(x²)
    let mut n1 = 0.065_682_337_918_207_45 * xsq;
    let mut d1 = xsq;
    n1 = (n1 + 2.235_252_035_460_683_9) * xsq;
    d1 = (d1 + 47.202_581_904_688_24) * xsq;
    n1 = (n1 + 161.028_231_068_555_88) * xsq;
    d1 = (d1 + 976.098_551_737_776_7) * xsq;
    n1 = (n1 + 1_067.689_485_460_371) * xsq;
    d1 = (d1 + 10_260.932_208_618_978) * xsq;
    n1 += 18_154.981_253_343_56;
    d1 += 45_507.789_335_026_73;
    let num1 = 0.5 * d1 - y * n1;

    // |x| ≤ √32: Φ(−|x|) = e^{−x²/2}·R₂(|x|)
    let mut n2 = 1.076_557_677_372_019_2e-8 * y;
    let mut d2 = y;
    n2 = (n2 + 0.398_941_512_088_134_66) * y;
    d2 = (d2 + 22.266_688_044_328_116) * y;
    n2 = (n2 + 8.883_149_794_388_376) * y;
    d2 = (d2 + 235.387_901_782_625) * y;
    n2 = (n2 + 93.506_656_132_177_86) * y;
    d2 = (d2 + 1_519.377_599_407_554_8) * y;
    n2 = (n2 + 597.270_276_394_800_3) * y;
    d2 = (d2 + 6_485.558_298_266_761) * y;
    n2 = (n2 + 2_494.537_585_290_372_6) * y;
    d2 = (d2 + 18_615.571_640_885_097) * y;
    n2 = (n2 + 6_848.190_450_536_283) * y;
    d2 = (d2 + 34_900.952_721_145_98) * y;
    n2 = (n2 + 11_602.651_437_647_35) * y;
    d2 = (d2 + 38_912.003_286_093_27) * y;
    n2 += 9_842.714_838_383_978;
    d2 += 19_685.429_676_859_99;

    // |x| > √32: Φ(−|x|) = e^{−x²/2}·(1/√(2π) − x⁻²R₃(x⁻²))/|x|
    let yy = if y > 1.0 { y } else { 1.0 };
    let w = 1.0 / (yy * yy);
    let mut n3 = 0.023_073_441_764_940_174 * w;
    let mut d3 = w;
    n3 = (n3 + 0.215_898_534_057_957) * w;
    d3 = (d3 + 1.284_260_096_144_911_2) * w;
    n3 = (n3 + 0.127_401_161_160_247_36) * w;
    d3 = (d3 + 0.468_238_212_480_865_1) * w;
    n3 = (n3 + 0.022_235_277_870_649_807) * w;
    d3 = (d3 + 0.065_988_137_868_928_55) * w;
    n3 = (n3 + 0.001_421_619_193_227_893_5) * w;
    d3 = (d3 + 0.003_782_396_332_027_582_4) * w;
    n3 += 2.911_287_495_116_879_2e-5;
    d3 += 7.297_515_550_839_662e-5;
    let num3 = FRAC_1_SQRT_2PI * d3 - w * n3;
    let den3 = d3 * yy;

    let central = y <= 0.674_489_75;
    let middle = y <= SQRT_32;
    let num = if central {
        num1
    } else if middle {
        n2
    } else {
        num3
    };
    let den = if central {
        d1
    } else if middle {
        d2
    } else {
        den3
    };
    let scale = if central { 1.0 } else { e };
    let small = scale * num / den;
    let small = if y < 37.519_3 { small } else { 0.0 };

    let positive = x > 0.0;
    let lower = if positive { 1.0 - small } else { small };
    let upper = if positive { small } else { 1.0 - small };
    let v = lower * upper;
    // beyond ~37 SD V underflows; the Mills ratio tends to |x|
    let a = if v > 0.0 {
        density / if v > 0.0 { v } else { 1.0 }
    } else {
        y
    };
    (lower, a, a * density)
}

#[inline(always)]
fn logit_weights(x: f64) -> (f64, f64, f64) {
    let e = exp_nonpositive(-x.abs());
    let r = 1.0 / (1.0 + e);
    let small = e * r;
    (if x >= 0.0 { r } else { small }, 1.0, small * r)
}

/// Inputs for one row `i` against partners `j = i+1, …`.
pub(crate) struct RowInput<'a> {
    pub y_i: f64,
    pub lin_i: f64,
    pub y: &'a [f64],
    pub lin: &'a [f64],
    pub eta_clamp: f64,
}

trait Weights {
    fn weights(x: f64) -> (f64, f64, f64);
}

struct Logit;
struct Probit;

impl Weights for Logit {
    #[inline(always)]
    fn weights(x: f64) -> (f64, f64, f64) {
        logit_weights(x)
    }
}

impl Weights for Probit {
    #[inline(always)]
    fn weights(x: f64) -> (f64, f64, f64) {
        probit_weights(x)
    }
}

#[inline(always)]
fn fill<W: Weights>(row: &RowInput<'_>, score: &mut [f64], info: &mut [f64]) -> usize {
    let (lo, hi) = (-row.eta_clamp, row.eta_clamp);
    let mut clamped = 0usize;
    let it = row.y.iter().zip(row.lin).zip(score.iter_mut().zip(info.iter_mut()));
    for ((&yj, &lj), (s, w)) in it {
        let raw = lj - row.lin_i;
        clamped += (raw < lo || raw > hi) as usize;
        let eta = if raw < lo {
            lo
        } else if raw > hi {
            hi
        } else {
            raw
        };
        let (mean, sw, iw) = W::weights(eta);
        let ind = 0.5 * ((row.y_i < yj) as u8 as f64 + (row.y_i <= yj) as u8 as f64);
        *s = sw * (ind - mean);
        *w = iw;
    }
    clamped
}

#[inline(always)]
fn fill_generic(link: LinkFunction, row: &RowInput<'_>, score: &mut [f64], info: &mut [f64]) -> usize {
    let m = row.y.len();
    let (score, info) = (&mut score[..m], &mut info[..m]);
    match link {
        LinkFunction::Logit => fill::<Logit>(row, score, info),
        LinkFunction::Probit => fill::<Probit>(row, score, info),
    }
}

/// Defines `$name` calling `$generic` compiled for the widest vector
/// extension the running CPU supports.
macro_rules! dispatch {
    ($(#[$doc:meta])* $name:ident => $generic:ident($($arg:ident: $ty:ty),*) -> $ret:ty) => {
        $(#[$doc])*
        pub(crate) fn $name($($arg: $ty),*) -> $ret {
            #[cfg(target_arch = "x86_64")]
            {
                #[target_feature(enable = "avx512f")]
                unsafe fn wide($($arg: $ty),*) -> $ret {
                    $generic($($arg),*)
                }
                #[target_feature(enable = "avx2")]
                unsafe fn narrow($($arg: $ty),*) -> $ret {
                    $generic($($arg),*)
                }
                if std::arch::is_x86_feature_detected!("avx512f") {
                    // SAFETY: feature presence checked at run time
                    return unsafe { wide($($arg),*) };
                }
                if std::arch::is_x86_feature_detected!("avx2") {
                    // SAFETY: feature presence checked at run time
                    return unsafe { narrow($($arg),*) };
                }
            }
            $generic($($arg),*)
        }
    };
}

dispatch! {
    /// Writes `s_ij` into `score[j − i − 1]` and `μ'²/V` into `info[..]` for
    /// every partner in `row`; returns how many linear predictors were clamped.
    row_weights => fill_generic(link: LinkFunction, row: &RowInput<'_>, score: &mut [f64], info: &mut [f64]) -> usize
}

/// `(Σ s_j z_j, Σ w_j z_j²)` with `z_j = f_j − f_i`, using four interleaved
/// partial sums so the loop vectorises.
#[inline(always)]
fn dot_p1(f_i: f64, f: &[f64], score: &[f64], info: &[f64]) -> (f64, f64) {
    let mut s = [0.0; 4];
    let mut w = [0.0; 4];
    let m = f.len();
    let (score, info) = (&score[..m], &info[..m]);
    let full = m / 4 * 4;
    for base in (0..full).step_by(4) {
        for l in 0..4 {
            let z = f[base + l] - f_i;
            s[l] += score[base + l] * z;
            w[l] += info[base + l] * z * z;
        }
    }
    for k in full..m {
        let z = f[k] - f_i;
        s[0] += score[k] * z;
        w[0] += info[k] * z * z;
    }
    ((s[0] + s[1]) + (s[2] + s[3]), (w[0] + w[1]) + (w[2] + w[3]))
}

dispatch! {
    row_dot_p1 => dot_p1(f_i: f64, f: &[f64], score: &[f64], info: &[f64]) -> (f64, f64)
}
