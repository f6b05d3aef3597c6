use super::PartitionStats;

/// One per-condition parameter field; `empty[c]` marks conditions without
/// enough data to define the estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct RawField {
    pub values: Vec<f64>,
    pub empty: Vec<bool>,
}

impl RawField {
    fn with_len(n: usize) -> Self {
        Self {
            values: vec![f64::NAN; n],
            empty: vec![true; n],
        }
    }

    fn set(&mut self, i: usize, v: f64) {
        self.values[i] = v;
        self.empty[i] = false;
    }

    pub fn n_observed(&self) -> usize {
        self.empty.iter().filter(|e| !**e).count()
    }
}

/// Independent per-condition maximum-likelihood estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct MleEstimate {
    pub a01: RawField,
    pub a11: RawField,
    pub mu_r: RawField,
    pub mu_theta: RawField,
    pub sigma_r: RawField,
    pub sigma_theta: RawField,
    pub rho: RawField,
    pub n_samples: Vec<usize>,
}

pub fn estimate_mle(stats: &PartitionStats) -> MleEstimate {
    let n = stats.conditions.len();
    let mut est = MleEstimate {
        a01: RawField::with_len(n),
        a11: RawField::with_len(n),
        mu_r: RawField::with_len(n),
        mu_theta: RawField::with_len(n),
        sigma_r: RawField::with_len(n),
        sigma_theta: RawField::with_len(n),
        rho: RawField::with_len(n),
        n_samples: vec![0; n],
    };
    for (i, cs) in stats.conditions.iter().enumerate() {
        let [[w00, w01], [w10, w11]] = cs.counts;
        if w00 + w01 > 0 {
            est.a01.set(i, w01 as f64 / (w00 + w01) as f64);
        }
        if w10 + w11 > 0 {
            est.a11.set(i, w11 as f64 / (w10 + w11) as f64);
        }
        let m = moments(&cs.samples);
        est.n_samples[i] = cs.samples.len();
        if let Some((mr, mt)) = m.mean {
            est.mu_r.set(i, mr);
            est.mu_theta.set(i, mt);
        }
        if let Some((sr, st)) = m.std {
            est.sigma_r.set(i, sr);
            est.sigma_theta.set(i, st);
        }
        if let Some(r) = m.corr {
            est.rho.set(i, r);
        }
    }
    est
}

pub(crate) struct Moments {
    pub mean: Option<(f64, f64)>,
    /// Sample standard deviations (n - 1 denominator).
    pub std: Option<(f64, f64)>,
    pub corr: Option<f64>,
}

pub(crate) fn moments(samples: &[(f64, f64)]) -> Moments {
    let n = samples.len();
    if n == 0 {
        return Moments {
            mean: None,
            std: None,
            corr: None,
        };
    }
    let nf = n as f64;
    let (sa, sb) = samples.iter().fold((0.0, 0.0), |(a, b), s| (a + s.0, b + s.1));
    let (ma, mb) = (sa / nf, sb / nf);
    if n < 2 {
        return Moments {
            mean: Some((ma, mb)),
            std: None,
            corr: None,
        };
    }
    let (mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0);
    for &(a, b) in samples {
        let (da, db) = (a - ma, b - mb);
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    let corr = if saa > 0.0 && sbb > 0.0 {
        Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
    } else {
        None
    };
    Moments {
        mean: Some((ma, mb)),
        std: Some(((saa / (nf - 1.0)).sqrt(), (sbb / (nf - 1.0)).sqrt())),
        corr,
    }
}
