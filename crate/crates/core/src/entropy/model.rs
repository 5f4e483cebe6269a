//! Static Gaussian-mixture symbol model quantized to a 16-bit frequency table.

use statrs::function::erf::erfc;

use super::range_coder::TOTAL_FREQ;
use crate::error::{Error, Result};
use crate::wire::{ByteReader, PutLe};

/// Lower bound applied to every fitted standard deviation.
pub const SIGMA_FLOOR: f64 = 0.5;
/// EM iterations used by [`fit_model`] for two-component fits.
pub const EM_ITERATIONS: usize = 10;
/// Upper bound on components accepted when reading a serialized model.
pub const MAX_COMPONENTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
    pub sigma: f64,
}

/// Mixture parameters plus the derived cumulative frequency table over the
/// integer support `[lo, hi]`. Every symbol in the support has frequency >= 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolModel {
    components: Vec<MixtureComponent>,
    lo: i32,
    hi: i32,
    cum: Vec<u32>,
}

// P(a < X <= b) for X ~ N(0, 1), evaluated on the tail side for accuracy.
fn normal_interval(a: f64, b: f64) -> f64 {
    let upper = |z: f64| 0.5 * erfc(z / std::f64::consts::SQRT_2);
    let lower = |z: f64| 0.5 * erfc(-z / std::f64::consts::SQRT_2);
    if a >= 0.0 {
        upper(a) - upper(b)
    } else {
        lower(b) - lower(a)
    }
}

impl SymbolModel {
    pub fn new(components: Vec<MixtureComponent>, lo: i32, hi: i32) -> Result<Self> {
        if components.is_empty() || components.len() > MAX_COMPONENTS {
            return Err(Error::invalid(format!(
                "mixture needs 1..={MAX_COMPONENTS} components, got {}",
                components.len()
            )));
        }
        for c in &components {
            if !(c.weight >= 0.0) || !c.weight.is_finite() || !c.mean.is_finite() {
                return Err(Error::invalid(format!("bad mixture component {c:?}")));
            }
            if !(c.sigma > 0.0) || !c.sigma.is_finite() {
                return Err(Error::invalid(format!("non-positive sigma in {c:?}")));
            }
        }
        let wsum: f64 = components.iter().map(|c| c.weight).sum();
        if (wsum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("mixture weights sum to {wsum}")));
        }
        if lo > hi {
            return Err(Error::invalid(format!("empty support [{lo}, {hi}]")));
        }
        let n = (i64::from(hi) - i64::from(lo) + 1) as u64;
        if n > u64::from(TOTAL_FREQ) {
            return Err(Error::invalid(format!(
                "support of {n} symbols exceeds the {TOTAL_FREQ}-entry frequency table"
            )));
        }
        let cum = quantize_pmf(&components, lo, hi);
        Ok(SymbolModel {
            components,
            lo,
            hi,
            cum,
        })
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn support(&self) -> (i32, i32) {
        (self.lo, self.hi)
    }

    pub fn contains(&self, s: i32) -> bool {
        s >= self.lo && s <= self.hi
    }

    /// `(start, size)` of a symbol's interval in the cumulative table.
    #[inline]
    pub fn interval(&self, s: i32) -> Result<(u32, u32)> {
        if !self.contains(s) {
            return Err(Error::OutOfSupport {
                symbol: s,
                lo: self.lo,
                hi: self.hi,
            });
        }
        let i = (s - self.lo) as usize;
        Ok((self.cum[i], self.cum[i + 1] - self.cum[i]))
    }

    /// Symbol whose interval contains cumulative frequency `target`.
    #[inline]
    pub fn lookup(&self, target: u32) -> (i32, u32, u32) {
        let i = self.cum.partition_point(|&c| c <= target) - 1;
        (self.lo + i as i32, self.cum[i], self.cum[i + 1] - self.cum[i])
    }

    /// Quantized probability of `s` (0 outside the support).
    pub fn prob(&self, s: i32) -> f64 {
        self.interval(s)
            .map(|(_, f)| f64::from(f) / f64::from(TOTAL_FREQ))
            .unwrap_or(0.0)
    }

    pub fn serialized_len(&self) -> usize {
        1 + 24 * self.components.len() + 8
    }

    pub fn write_to(&self, out: &mut Vec<u8>) {
        out.put_u8(self.components.len() as u8);
        for c in &self.components {
            out.put_f64(c.weight);
            out.put_f64(c.mean);
            out.put_f64(c.sigma);
        }
        out.put_i32(self.lo);
        out.put_i32(self.hi);
    }

    pub(crate) fn read_from(r: &mut ByteReader<'_>) -> Result<Self> {
        let m = r.u8("mixture count")? as usize;
        if m == 0 || m > MAX_COMPONENTS {
            return Err(Error::Corrupt(format!("mixture count {m}")));
        }
        let mut comps = Vec::with_capacity(m);
        for _ in 0..m {
            comps.push(MixtureComponent {
                weight: r.f64("mixture weight")?,
                mean: r.f64("mixture mean")?,
                sigma: r.f64("mixture sigma")?,
            });
        }
        let lo = r.i32("support lo")?;
        let hi = r.i32("support hi")?;
        SymbolModel::new(comps, lo, hi).map_err(|e| Error::Corrupt(format!("symbol model: {e}")))
    }
}

/// Mixture mass per unit bin, turned into frequencies that sum to `TOTAL_FREQ`
/// with every bin at least 1. Leftover units go to the heaviest bins.
fn quantize_pmf(components: &[MixtureComponent], lo: i32, hi: i32) -> Vec<u32> {
    let n = (i64::from(hi) - i64::from(lo) + 1) as usize;
    let mut mass: Vec<f64> = (0..n)
        .map(|i| {
            let x = f64::from(lo) + i as f64;
            components
                .iter()
                .filter(|c| c.weight > 0.0)
                .map(|c| {
                    c.weight * normal_interval((x - 0.5 - c.mean) / c.sigma, (x + 0.5 - c.mean) / c.sigma)
                })
                .sum::<f64>()
                .max(0.0)
        })
        .collect();
    let total: f64 = mass.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        mass.iter_mut().for_each(|m| *m = 1.0);
    }
    let total: f64 = mass.iter().sum();

    let spare = f64::from(TOTAL_FREQ) - n as f64;
    let mut freq: Vec<u32> = mass
        .iter()
        .map(|m| 1 + (m / total * spare).floor() as u32)
        .collect();
    let assigned: u64 = freq.iter().map(|&f| u64::from(f)).sum();
    let mut left = u64::from(TOTAL_FREQ) - assigned;
    if left > 0 {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| mass[b].total_cmp(&mass[a]).then(a.cmp(&b)));
        for &i in order.iter().cycle() {
            if left == 0 {
                break;
            }
            freq[i] += 1;
            left -= 1;
        }
    }

    let mut cum = Vec::with_capacity(n + 1);
    let mut acc = 0u32;
    cum.push(0);
    for f in freq {
        acc += f;
        cum.push(acc);
    }
    debug_assert_eq!(acc, TOTAL_FREQ);
    cum
}

fn log_normal_pdf(x: f64, mean: f64, sigma: f64) -> f64 {
    let z = (x - mean) / sigma;
    -0.5 * z * z - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// Fits a one- or two-component Gaussian mixture to an integer sequence.
///
/// One component: sample mean and standard deviation. Two components: start
/// from `mean -/+ std` with equal weights and run [`EM_ITERATIONS`] EM steps.
/// Standard deviations are floored at [`SIGMA_FLOOR`]; the support is
/// `[min, max]` of the sequence.
pub fn fit_model(symbols: &[i32], mixtures: usize) -> Result<SymbolModel> {
    if symbols.is_empty() {
        return Err(Error::invalid("cannot fit a model to an empty sequence"));
    }
    if mixtures != 1 && mixtures != 2 {
        return Err(Error::invalid(format!(
            "mixture count {mixtures} not in {{1, 2}}"
        )));
    }
    let lo = *symbols.iter().min().unwrap();
    let hi = *symbols.iter().max().unwrap();
    let span = (i64::from(hi) - i64::from(lo) + 1) as usize;
    if span > TOTAL_FREQ as usize {
        return Err(Error::invalid(format!(
            "symbol range [{lo}, {hi}] exceeds the {TOTAL_FREQ}-entry frequency table"
        )));
    }
    // EM runs over the histogram; identical to per-sample EM but O(span)
    let mut hist = vec![0u64; span];
    for &s in symbols {
        hist[(s - lo) as usize] += 1;
    }
    let bins: Vec<(f64, f64)> = hist
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, &c)| (f64::from(lo) + i as f64, c as f64))
        .collect();
    let n = symbols.len() as f64;
    let mean = bins.iter().map(|(x, c)| x * c).sum::<f64>() / n;
    let var = bins.iter().map(|(x, c)| c * (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt().max(SIGMA_FLOOR);

    let components = if mixtures == 1 {
        vec![MixtureComponent {
            weight: 1.0,
            mean,
            sigma: std,
        }]
    } else {
        let mut comps = [
            MixtureComponent {
                weight: 0.5,
                mean: mean - std,
                sigma: std,
            },
            MixtureComponent {
                weight: 0.5,
                mean: mean + std,
                sigma: std,
            },
        ];
        for _ in 0..EM_ITERATIONS {
            comps = em_step(&bins, n, comps);
        }
        comps.to_vec()
    };
    SymbolModel::new(components, lo, hi)
}

fn em_step(bins: &[(f64, f64)], n: f64, comps: [MixtureComponent; 2]) -> [MixtureComponent; 2] {
    let mut nk = [0.0; 2];
    let mut sx = [0.0; 2];
    let mut resp = Vec::with_capacity(bins.len());
    for &(x, c) in bins {
        let lp: Vec<f64> = comps
            .iter()
            .map(|k| {
                if k.weight > 0.0 {
                    k.weight.ln() + log_normal_pdf(x, k.mean, k.sigma)
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let m = lp[0].max(lp[1]);
        let e = [(lp[0] - m).exp(), (lp[1] - m).exp()];
        let s = e[0] + e[1];
        let r = [e[0] / s, e[1] / s];
        for j in 0..2 {
            nk[j] += c * r[j];
            sx[j] += c * r[j] * x;
        }
        resp.push(r);
    }
    let mut out = comps;
    for j in 0..2 {
        if nk[j] <= 1e-12 * n {
            out[j].weight = 0.0;
            continue;
        }
        let mu = sx[j] / nk[j];
        let var = bins
            .iter()
            .zip(&resp)
            .map(|(&(x, c), r)| c * r[j] * (x - mu) * (x - mu))
            .sum::<f64>()
            / nk[j];
        out[j] = MixtureComponent {
            weight: nk[j] / n,
            mean: mu,
            sigma: var.sqrt().max(SIGMA_FLOOR),
        };
    }
    let wsum = out[0].weight + out[1].weight;
    for c in &mut out {
        c.weight /= wsum;
    }
    out
}
