//! Seeded data generators: flow records with the CICIoT2023 raw layout and
//! class structure, and a planted-feature problem with known informative
//! columns.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::dataset::{FeatureMatrix, FeatureSchema, LabelTaxonomy, LabelVector, RawRow, RawTable};
use crate::error::{Error, Result};
use crate::seed::{self, Rng};

/// Class sizes of a typical 18-shard subsample.
pub const SUBSAMPLE_COUNTS: [(&str, usize); 8] = [
    ("Benign", 2376),
    ("Bruteforce", 28),
    ("DDoS", 1500),
    ("DoS", 500),
    ("Mirai", 350),
    ("Recon", 310),
    ("Spoofing", 320),
    ("Web", 52),
];

#[derive(Debug, Clone, PartialEq)]
pub struct FlowConfig {
    /// Rows per class.
    pub counts: BTreeMap<String, usize>,
    /// Share of attack rows whose timing and reset counts look benign.
    pub stealth_rate: f64,
    /// Share of benign rows whose timing and reset counts look like an attack.
    pub noisy_benign_rate: f64,
    /// Mean shift of attack rows in the secondary features, in units of
    /// their spread.
    pub secondary_shift: f64,
    /// Share of rows with an infinite rate (dropped by cleaning).
    pub infinite_rate: f64,
    /// Share of rows emitted twice (dropped by cleaning).
    pub duplicate_rate: f64,
    pub seed: u64,
}

impl FlowConfig {
    pub fn subsample(seed: u64) -> Self {
        Self {
            counts: SUBSAMPLE_COUNTS.iter().map(|(c, n)| (c.to_string(), *n)).collect(),
            stealth_rate: 0.05,
            noisy_benign_rate: 0.03,
            secondary_shift: 1.0,
            infinite_rate: 0.002,
            duplicate_rate: 0.003,
            seed,
        }
    }

    /// Same class proportions scaled to roughly `total` rows (at least 2 per class).
    pub fn scaled(total: usize, seed: u64) -> Self {
        let mut c = Self::subsample(seed);
        let sum: usize = c.counts.values().sum();
        for n in c.counts.values_mut() {
            *n = ((*n * total) as f64 / sum as f64).round().max(2.0) as usize;
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Benign,
    /// High-volume floods: DDoS, DoS, Mirai.
    Flood,
    /// Low-volume probing and application attacks.
    Probe,
}

fn family(class: &str) -> Family {
    match class {
        "Benign" => Family::Benign,
        "DDoS" | "DoS" | "Mirai" => Family::Flood,
        _ => Family::Probe,
    }
}

fn lognormal(rng: &mut Rng, mu: f64, sigma: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    (mu + sigma * z).exp()
}

fn gauss(rng: &mut Rng, mu: f64, sigma: f64) -> f64 {
    Normal::new(mu, sigma).expect("finite sigma").sample(rng)
}

fn flag(rng: &mut Rng, p: f64) -> f64 {
    f64::from(u8::from(rng.random_bool(p.clamp(0.0, 1.0))))
}

/// One flow in the 46-column raw layout (constant columns are zero).
/// Share of flood rows whose band lies among the benign ones.
const FLOOD_INTERLEAVED: f64 = 0.4;
const BENIGN_IAT_BANDS: [f64; 4] = [17.0, 17.6, 18.2, 18.8];
const FLOOD_IAT_BANDS: [f64; 12] = [
    15.6, 15.8, 16.0, 16.2, 16.4, 16.6, 17.3, 17.45, 17.9, 18.05, 18.5, 18.65,
];

/// `variant` indexes the subcategory within its class.
fn flow(rng: &mut Rng, class: &str, variant: usize, cfg: &FlowConfig) -> Vec<f64> {
    let fam = family(class);
    let attack = fam != Family::Benign;
    // Which family the timing/reset signature is drawn from.
    let signature = match fam {
        Family::Benign if rng.random_bool(cfg.noisy_benign_rate) => {
            if rng.random_bool(0.5) {
                Family::Flood
            } else {
                Family::Probe
            }
        }
        _ if attack && rng.random_bool(cfg.stealth_rate) => Family::Benign,
        f => f,
    };
    // Weak evidence carried by many secondary features.
    let shift = if attack { cfg.secondary_shift } else { 0.0 };

    // Inter-arrival times cluster in narrow per-session bands. Flood bands
    // sit between the benign ones; probe bands coincide with them.
    let iat = match signature {
        Family::Benign => {
            let band = rng.random_range(0..BENIGN_IAT_BANDS.len());
            lognormal(rng, BENIGN_IAT_BANDS[band], 0.05)
        }
        Family::Flood => {
            let band = if fam == Family::Flood { (variant % 6) + 6 * usize::from(rng.random_bool(FLOOD_INTERLEAVED)) } else { rng.random_range(0..FLOOD_IAT_BANDS.len()) };
            lognormal(rng, FLOOD_IAT_BANDS[band % FLOOD_IAT_BANDS.len()], 0.04)
        }
        Family::Probe => lognormal(rng, BENIGN_IAT_BANDS[variant % 4], 0.05),
    };
    let rst_count = match signature {
        Family::Benign => lognormal(rng, 2.0, 1.1),
        Family::Flood => lognormal(rng, 1.4, 1.2),
        Family::Probe => lognormal(rng, 5.2, 0.8),
    };

    let proto = match fam {
        Family::Flood => *[6.0, 17.0, 1.0, 6.0].choose(rng).expect("non-empty"),
        _ => *[6.0, 6.0, 17.0, 6.0].choose(rng).expect("non-empty"),
    } + gauss(rng, 0.0, 1.0).abs();
    // Only a handful of columns carry the weak evidence; the rest are noise.
    let tcp = flag(rng, if proto < 10.0 { 0.9 } else { 0.1 });
    let udp = flag(rng, if (16.0..20.0).contains(&proto) { 0.85 } else { 0.1 });
    let icmp = flag(rng, 0.03);

    let flow_duration = lognormal(rng, 2.0 - 1.6 * shift, 1.6);
    let header_length = lognormal(rng, 9.0 + 1.5 * shift, 1.5);
    // Mean TTL over the window: almost always 64, occasionally 128 or 255.
    let ttl = *[64.0, 64.0, 64.0, 64.0, 64.0, 64.0, 128.0, 255.0].choose(rng).expect("non-empty");
    let duration = ttl + gauss(rng, 0.0, 0.5);
    let rate = lognormal(rng, 5.0, 1.8);

    let syn = flag(rng, if fam == Family::Flood { 0.55 } else { 0.15 });
    let fin = flag(rng, 0.08);
    let rst = flag(rng, 0.08);
    let psh = flag(rng, if fam == Family::Flood { 0.05 } else { 0.2 });
    let ack = flag(rng, if fam == Family::Flood { 0.08 } else { 0.3 });

    let ack_count = lognormal(rng, -0.5 - shift, 1.0);
    let syn_count = lognormal(rng, -0.2 + shift, 1.0);
    let fin_count = lognormal(rng, -1.0, 1.2);
    let urg_count = 0.1 * rst_count * lognormal(rng, 0.0, 0.8);

    let http = flag(rng, 0.08);
    let https = flag(rng, if fam == Family::Flood { 0.1 } else { 0.45 });
    let dns = flag(rng, 0.04);
    let ssh = flag(rng, 0.01);
    let arp = flag(rng, 0.01);
    let ipv = flag(rng, 0.97);
    let llc = flag(rng, 0.97);
    let dhcp = flag(rng, 0.001);

    // Packet-length family, all driven by one size latent.
    let avg = lognormal(rng, 5.0 - 0.82 * shift, 0.6);
    let spread = lognormal(rng, 2.5, 0.9);
    let number = if rng.random_bool(0.9) { 9.5 } else { gauss(rng, 9.5, 1.5) };
    let min = (avg - spread * gauss(rng, 1.0, 0.3).abs()).max(42.0);
    let max = avg + spread * gauss(rng, 2.0, 0.5).abs();
    let tot_size = avg * gauss(rng, 1.0, 0.05).abs();
    let tot_sum = avg * number;
    let magnitude = (2.0 * avg).sqrt() * gauss(rng, 1.0, 0.02);
    let radius = spread * gauss(rng, 0.7, 0.15).abs();
    let covariance = spread * spread * lognormal(rng, 0.0, 0.5);
    let variance = gauss(rng, 0.5 + 0.3 * shift, 0.3).clamp(0.0, 1.0);
    let weight = number * number * 1.5 + gauss(rng, 0.0, 0.5);

    let mut v = vec![
        flow_duration,
        header_length,
        proto,
        duration,
        rate,
        rate,
        0.0, // Drate
        fin,
        syn,
        rst,
        psh,
        ack,
        0.0, // ece_flag_number
        0.0, // cwr_flag_number
        ack_count,
        syn_count,
        fin_count,
        urg_count,
        rst_count,
        http,
        https,
        dns,
        0.0, // Telnet
        0.0, // SMTP
        ssh,
        0.0, // IRC
        tcp,
        udp,
        arp,
        icmp,
        ipv,
        llc,
        tot_sum,
        min,
        max,
        avg,
        spread,
        tot_size,
        iat,
        number,
        magnitude,
        radius,
        covariance,
        variance,
        weight,
        dhcp,
    ];
    for x in &mut v {
        // Shards carry a few decimals; rounding also makes duplicates exact.
        *x = (*x * 1e6).round() / 1e6;
    }
    v
}

/// Flow records in the raw 46-column layout, labeled with subcategory names
/// drawn uniformly within each class. Rows are shuffled.
pub fn ciciot_like(cfg: &FlowConfig) -> Result<RawTable> {
    let taxonomy = LabelTaxonomy::ciciot2023();
    let schema = Arc::new(FeatureSchema::ciciot_raw());
    let mut rng = seed::rng(cfg.seed);
    let mut rows = Vec::new();
    for (class, &n) in &cfg.counts {
        let subs = taxonomy.subcategories_of(class);
        if subs.is_empty() {
            return Err(Error::UnknownLabel(vec![class.clone()]));
        }
        for _ in 0..n {
            let variant = rng.random_range(0..subs.len());
            let mut values = flow(&mut rng, class, variant, cfg);
            if rng.random_bool(cfg.infinite_rate) {
                values[4] = f64::INFINITY;
            }
            let label = subs[variant].clone();
            let row = RawRow {
                values: values.into_iter().map(Some).collect(),
                label,
                known: true,
            };
            if rng.random_bool(cfg.duplicate_rate) {
                rows.push(row.clone());
            }
            rows.push(row);
        }
    }
    use rand::seq::SliceRandom;
    rows.shuffle(&mut rng);
    Ok(RawTable { schema, rows })
}

/// Binary problem with known informative columns.
#[derive(Debug, Clone)]
pub struct Planted {
    pub x: FeatureMatrix,
    pub y: LabelVector,
    /// Column indices that carry signal.
    pub informative: Vec<usize>,
    /// Logit coefficient of each informative column.
    pub coefficients: Vec<f64>,
}

/// Standard-normal columns; `y ~ Bernoulli(logistic(sum_j beta_j x_j))` over
/// the informative columns, which are spread through the matrix so that
/// index order carries no hint. Names are `f0, f1, ...`.
pub fn planted(n: usize, n_informative: usize, n_noise: usize, seed: u64) -> Result<Planted> {
    if n < 2 || n_informative == 0 {
        return Err(Error::Parameter("planted needs n >= 2 and at least one informative feature".into()));
    }
    let p = n_informative + n_noise;
    let mut rng = seed::rng(seed);
    let mut cols: Vec<usize> = (0..p).collect();
    use rand::seq::SliceRandom;
    cols.shuffle(&mut rng);
    let mut informative = cols[..n_informative].to_vec();
    informative.sort_unstable();
    let coefficients: Vec<f64> = (0..n_informative)
        .map(|i| 2.0 - 1.0 * i as f64 / n_informative.max(2) as f64)
        .collect();
    let mut rows = Vec::with_capacity(n);
    let mut ids = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let logit: f64 = informative.iter().zip(&coefficients).map(|(&j, b)| b * row[j]).sum();
        let prob = crate::models::logistic(logit);
        ids.push(u32::from(rng.random_bool(prob)));
        rows.push(row);
    }
    let names = (0..p).map(|j| format!("f{j}")).collect();
    let x = FeatureMatrix::from_rows(Arc::new(FeatureSchema::new(names)?), &rows)?;
    Ok(Planted {
        x,
        y: LabelVector::binary(ids)?,
        informative,
        coefficients,
    })
}
