//! Branch-free softplus and logistic over slices of pair exponents.
//!
//! These are the hot loops of every loss and gradient evaluation. The
//! exponential and `log1p` are evaluated with polynomial kernels written
//! without branches or calls, so the loops vectorize; on x86-64 a copy
//! compiled for AVX2 is picked at runtime. No fused multiply-adds are
//! emitted by either copy, so results are bit-identical across them.

const LN2_HI: f64 = 6.931_471_803_691_238_164_90e-1;
const LN2_LO: f64 = 1.908_214_929_270_587_700_02e-10;
const SHIFTER: f64 = 6_755_399_441_055_744.0; // 1.5 * 2^52

/// `exp(x)` for `x <= 0`; results below `exp(-708)` are flushed to that value.
#[inline(always)]
fn exp_nonpos(x: f64) -> f64 {
    let x = x.max(-708.0);
    let kf = x * std::f64::consts::LOG2_E + SHIFTER;
    let bits = kf.to_bits();
    let k = kf - SHIFTER;
    let r = (x - k * LN2_HI) - k * LN2_LO;
    let mut p = 1.0 / 6_227_020_800.0;
    p = p * r + 1.0 / 479_001_600.0;
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
    // low mantissa bits of `kf` hold k in two's complement
    let scale = f64::from_bits((bits.wrapping_add(1023)) << 52);
    p * scale
}

/// `ln(1 + e)` for `0 <= e <= 1`.
#[inline(always)]
fn ln1p_unit(e: f64) -> f64 {
    let u = 1.0 + e;
    let corr = (e - (u - 1.0)) / u;
    let big = u > std::f64::consts::SQRT_2;
    let m = if big { 0.5 * u } else { u };
    let k = if big { 1.0 } else { 0.0 };
    let s = (m - 1.0) / (m + 1.0);
    let s2 = s * s;
    let mut p = 1.0 / 25.0;
    p = p * s2 + 1.0 / 23.0;
    p = p * s2 + 1.0 / 21.0;
    p = p * s2 + 1.0 / 19.0;
    p = p * s2 + 1.0 / 17.0;
    p = p * s2 + 1.0 / 15.0;
    p = p * s2 + 1.0 / 13.0;
    p = p * s2 + 1.0 / 11.0;
    p = p * s2 + 1.0 / 9.0;
    p = p * s2 + 1.0 / 7.0;
    p = p * s2 + 1.0 / 5.0;
    p = p * s2 + 1.0 / 3.0;
    let log_m = 2.0 * s + 2.0 * s * (s2 * p);
    (k * LN2_HI + (log_m + k * LN2_LO)) + corr
}

/// Fixed-order sum with four interleaved partial sums.
#[inline(always)]
fn sum4(v: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = v.chunks_exact(4);
    let rest = chunks.remainder();
    for c in chunks {
        acc[0] += c[0];
        acc[1] += c[1];
        acc[2] += c[2];
        acc[3] += c[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for &x in rest {
        s += x;
    }
    s
}

/// Scratch length for the blocked passes below.
const BLOCK: usize = 256;

#[inline(always)]
fn softplus_sum_body(t: &[f64]) -> f64 {
    let mut buf = [0.0f64; BLOCK];
    let mut s = 0.0;
    for tb in t.chunks(BLOCK) {
        let out = &mut buf[..tb.len()];
        for (o, &x) in out.iter_mut().zip(tb) {
            *o = x.max(0.0) + ln1p_unit(exp_nonpos(-x.abs()));
        }
        s += sum4(out);
    }
    s
}

#[inline(always)]
fn softplus_logistic_body(t: &[f64], out: &mut [f64]) -> f64 {
    let mut buf = [0.0f64; BLOCK];
    let mut s = 0.0;
    for (tb, ob) in t.chunks(BLOCK).zip(out.chunks_mut(BLOCK)) {
        let sp = &mut buf[..tb.len()];
        for ((o, p), &x) in ob.iter_mut().zip(sp.iter_mut()).zip(tb) {
            let e = exp_nonpos(-x.abs());
            *p = x.max(0.0) + ln1p_unit(e);
            let inv = 1.0 / (1.0 + e);
            *o = if x >= 0.0 { inv } else { e * inv };
        }
        s += sum4(sp);
    }
    s
}

#[inline(always)]
fn logistic_body(t: &[f64], out: &mut [f64]) {
    for (o, &x) in out.iter_mut().zip(t) {
        let e = exp_nonpos(-x.abs());
        let inv = 1.0 / (1.0 + e);
        *o = if x >= 0.0 { inv } else { e * inv };
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn softplus_sum_avx2(t: &[f64]) -> f64 {
    softplus_sum_body(t)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn softplus_logistic_avx2(t: &[f64], out: &mut [f64]) -> f64 {
    softplus_logistic_body(t, out)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn logistic_avx2(t: &[f64], out: &mut [f64]) {
    logistic_body(t, out)
}

#[cfg(target_arch = "x86_64")]
fn has_avx2() -> bool {
    std::arch::is_x86_feature_detected!("avx2")
}

/// `sum_p log(1 + exp(t_p))` in a fixed summation order.
pub(crate) fn softplus_sum(t: &[f64]) -> f64 {
    #[cfg(target_arch = "x86_64")]
    if has_avx2() {
        // SAFETY: the CPU supports AVX2.
        return unsafe { softplus_sum_avx2(t) };
    }
    softplus_sum_body(t)
}

/// As [`softplus_sum`], also writing `out[p] = 1 / (1 + exp(-t_p))`.
pub(crate) fn softplus_logistic(t: &[f64], out: &mut [f64]) -> f64 {
    #[cfg(target_arch = "x86_64")]
    if has_avx2() {
        // SAFETY: the CPU supports AVX2.
        return unsafe { softplus_logistic_avx2(t, out) };
    }
    softplus_logistic_body(t, out)
}

/// `out[p] = 1 / (1 + exp(-t_p))`.
pub(crate) fn logistic(t: &[f64], out: &mut [f64]) {
    #[cfg(target_arch = "x86_64")]
    if has_avx2() {
        // SAFETY: the CPU supports AVX2.
        return unsafe { logistic_avx2(t, out) };
    }
    logistic_body(t, out)
}
