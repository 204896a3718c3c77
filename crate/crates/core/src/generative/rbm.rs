use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::sigmoid;
use crate::numkit::RngStream;

/// Largest n_v + n_h handled by the enumeration oracles.
pub const MAX_ENUMERATION_UNITS: usize = 20;

/// Binary RBM with energy E(v,h) = −a·v − b·h − vᵀWh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbmParams {
    pub visible_bias: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    /// `weights[i][j]` couples visible i to hidden j.
    pub weights: Vec<Vec<f64>>,
}

impl RbmParams {
    pub fn zeros(n_visible: usize, n_hidden: usize) -> Self {
        RbmParams {
            visible_bias: vec![0.0; n_visible],
            hidden_bias: vec![0.0; n_hidden],
            weights: vec![vec![0.0; n_hidden]; n_visible],
        }
    }

    /// Zero biases, couplings drawn from N(0, scale²).
    pub fn random(n_visible: usize, n_hidden: usize, scale: f64, rng: &mut RngStream) -> Self {
        let mut p = Self::zeros(n_visible, n_hidden);
        for row in &mut p.weights {
            for w in row.iter_mut() {
                *w = scale * rng.gaussian_std();
            }
        }
        p
    }

    pub fn n_visible(&self) -> usize {
        self.visible_bias.len()
    }

    pub fn n_hidden(&self) -> usize {
        self.hidden_bias.len()
    }

    pub fn validate(&self) -> Result<()> {
        let nh = self.n_hidden();
        if self.weights.len() != self.n_visible() || self.weights.iter().any(|r| r.len() != nh) {
            return Err(Error::Shape(format!(
                "weights must be {}x{nh}",
                self.n_visible()
            )));
        }
        let all = self
            .visible_bias
            .iter()
            .chain(&self.hidden_bias)
            .chain(self.weights.iter().flatten());
        if all.clone().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("RBM parameters must be finite".into()));
        }
        Ok(())
    }

    /// z_j = b_j + Σ_i v_i w_ij
    fn hidden_field(&self, v: &[u8]) -> Vec<f64> {
        let mut z = self.hidden_bias.clone();
        for (row, &vi) in self.weights.iter().zip(v) {
            if vi == 1 {
                for (zj, w) in z.iter_mut().zip(row) {
                    *zj += w;
                }
            }
        }
        z
    }

    /// a_i + Σ_j w_ij h_j
    fn visible_field(&self, h: &[u8]) -> Vec<f64> {
        self.visible_bias
            .iter()
            .zip(&self.weights)
            .map(|(a, row)| a + row.iter().zip(h).filter(|(_, &hj)| hj == 1).map(|(w, _)| w).sum::<f64>())
            .collect()
    }
}

fn check_binary(x: &[u8], n: usize, what: &str) -> Result<()> {
    if x.len() != n {
        return Err(Error::Shape(format!("{what} has length {} instead of {n}", x.len())));
    }
    if x.iter().any(|&b| b > 1) {
        return Err(Error::InvalidArgument(format!("{what} is not binary")));
    }
    Ok(())
}

/// Rows of {0,1} samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryBatch {
    rows: Vec<Vec<u8>>,
}

impl BinaryBatch {
    pub fn new(rows: Vec<Vec<u8>>) -> Result<Self> {
        let n = rows.first().map(|r| r.len()).unwrap_or(0);
        for (k, r) in rows.iter().enumerate() {
            check_binary(r, n, &format!("row {k}"))?;
        }
        Ok(BinaryBatch { rows })
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Draws `n` configurations of `n_units` bits from a table over their
    /// 2^n_units states.
    pub fn sample_from(table: &[f64], n_units: usize, n: usize, rng: &mut RngStream) -> Result<Self> {
        if table.len() != 1 << n_units {
            return Err(Error::Shape(format!("table of {} entries for {n_units} units", table.len())));
        }
        let rows = (0..n)
            .map(|_| rng.categorical(table).map(|s| to_bits(s, n_units)))
            .collect::<Result<Vec<_>>>()?;
        Ok(BinaryBatch { rows })
    }
}

/// Bit i of `index` is unit i.
pub fn to_bits(index: usize, n: usize) -> Vec<u8> {
    (0..n).map(|i| ((index >> i) & 1) as u8).collect()
}

pub fn from_bits(bits: &[u8]) -> usize {
    bits.iter().enumerate().map(|(i, &b)| (b as usize) << i).sum()
}

pub fn rbm_energy(params: &RbmParams, v: &[u8], h: &[u8]) -> Result<f64> {
    check_binary(v, params.n_visible(), "visible vector")?;
    check_binary(h, params.n_hidden(), "hidden vector")?;
    let mut e = 0.0;
    for (i, &vi) in v.iter().enumerate() {
        if vi == 1 {
            e -= params.visible_bias[i];
            for (j, &hj) in h.iter().enumerate() {
                if hj == 1 {
                    e -= params.weights[i][j];
                }
            }
        }
    }
    for (b, &hj) in params.hidden_bias.iter().zip(h) {
        if hj == 1 {
            e -= b;
        }
    }
    Ok(e)
}

/// P(h_j = 1 | v) = σ(z_j)
pub fn cond_prob_h(params: &RbmParams, v: &[u8]) -> Result<Vec<f64>> {
    check_binary(v, params.n_visible(), "visible vector")?;
    Ok(params.hidden_field(v).into_iter().map(sigmoid).collect())
}

/// P(v_i = 1 | h)
pub fn cond_prob_v(params: &RbmParams, h: &[u8]) -> Result<Vec<f64>> {
    check_binary(h, params.n_hidden(), "hidden vector")?;
    Ok(params.visible_field(h).into_iter().map(sigmoid).collect())
}

fn sample_units(probs: &[f64], rng: &mut RngStream) -> Vec<u8> {
    probs.iter().map(|&p| u8::from(rng.uniform01() < p)).collect()
}

/// Alternating Gibbs sampler v → h → v′ → h′ …
#[derive(Debug, Clone)]
pub struct GibbsChain<'a> {
    params: &'a RbmParams,
    visible: Vec<u8>,
}

impl<'a> GibbsChain<'a> {
    pub fn new(params: &'a RbmParams, v0: &[u8]) -> Result<Self> {
        params.validate()?;
        check_binary(v0, params.n_visible(), "initial visible vector")?;
        Ok(GibbsChain {
            params,
            visible: v0.to_vec(),
        })
    }

    pub fn visible(&self) -> &[u8] {
        &self.visible
    }

    /// Samples h ~ P(h|v), then v′ ~ P(v|h). Returns (v, h) before the
    /// visible update.
    pub fn step(&mut self, rng: &mut RngStream) -> (Vec<u8>, Vec<u8>) {
        let ph: Vec<f64> = self.params.hidden_field(&self.visible).into_iter().map(sigmoid).collect();
        let h = sample_units(&ph, rng);
        let pv: Vec<f64> = self.params.visible_field(&h).into_iter().map(sigmoid).collect();
        let next = sample_units(&pv, rng);
        let v = std::mem::replace(&mut self.visible, next);
        (v, h)
    }
}

/// `steps` successive (v_t, h_t) pairs starting from v0.
pub fn gibbs_chain(params: &RbmParams, v0: &[u8], steps: usize, rng: &mut RngStream) -> Result<Vec<(Vec<u8>, Vec<u8>)>> {
    let mut chain = GibbsChain::new(params, v0)?;
    Ok((0..steps).map(|_| chain.step(rng)).collect())
}

fn check_enumerable(params: &RbmParams) -> Result<()> {
    params.validate()?;
    let units = params.n_visible() + params.n_hidden();
    if units > MAX_ENUMERATION_UNITS {
        return Err(Error::InvalidArgument(format!(
            "{units} units exceed the enumeration limit {MAX_ENUMERATION_UNITS}"
        )));
    }
    Ok(())
}

fn normalize_log_weights(logw: Vec<f64>) -> Vec<f64> {
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// Joint P(v, h), indexed `[v][h]` by bit pattern.
pub fn exact_joint(params: &RbmParams) -> Result<Vec<Vec<f64>>> {
    check_enumerable(params)?;
    let (nv, nh) = (params.n_visible(), params.n_hidden());
    let mut logw = Vec::with_capacity(1 << (nv + nh));
    for vi in 0..1usize << nv {
        let v = to_bits(vi, nv);
        for hi in 0..1usize << nh {
            logw.push(-rbm_energy(params, &v, &to_bits(hi, nh))?);
        }
    }
    let flat = normalize_log_weights(logw);
    Ok(flat.chunks(1 << nh).map(|c| c.to_vec()).collect())
}

/// Marginal P(v) by summing out the hidden units analytically:
/// P(v) ∝ e^{a·v} Π_j (1 + e^{z_j}).
pub fn exact_distribution(params: &RbmParams) -> Result<Vec<f64>> {
    check_enumerable(params)?;
    let nv = params.n_visible();
    let logw = (0..1usize << nv)
        .map(|vi| {
            let v = to_bits(vi, nv);
            let a: f64 = params.visible_bias.iter().zip(&v).map(|(a, &x)| a * x as f64).sum();
            let soft: f64 = params.hidden_field(&v).iter().map(|&z| softplus(z)).sum();
            a + soft
        })
        .collect();
    Ok(normalize_log_weights(logw))
}

/// ln(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn check_table(p0: &[f64], n_visible: usize) -> Result<()> {
    if p0.len() != 1 << n_visible {
        return Err(Error::Shape(format!("table of {} entries for {n_visible} visible units", p0.len())));
    }
    let total: f64 = p0.iter().sum();
    if p0.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument("target table is not a probability distribution".into()));
    }
    Ok(())
}

/// C = −Σ_v P0(v) ln P(v)
pub fn rbm_cross_entropy(p0: &[f64], params: &RbmParams) -> Result<f64> {
    check_table(p0, params.n_visible())?;
    let p = exact_distribution(params)?;
    Ok(-p0.iter().zip(&p).filter(|(q, _)| **q > 0.0).map(|(q, p)| q * p.ln()).sum::<f64>())
}

/// KL(P0‖P) = C − H(P0)
pub fn rbm_kl(p0: &[f64], params: &RbmParams) -> Result<f64> {
    let entropy: f64 = -p0.iter().filter(|q| **q > 0.0).map(|q| q * q.ln()).sum::<f64>();
    Ok(rbm_cross_entropy(p0, params)? - entropy)
}

/// Parameter-shaped increments.
#[derive(Debug, Clone, PartialEq)]
pub struct RbmUpdate {
    pub visible_bias: Vec<f64>,
    pub hidden_bias: Vec<f64>,
    pub weights: Vec<Vec<f64>>,
}

impl RbmUpdate {
    fn zeros(nv: usize, nh: usize) -> Self {
        let z = RbmParams::zeros(nv, nh);
        RbmUpdate {
            visible_bias: z.visible_bias,
            hidden_bias: z.hidden_bias,
            weights: z.weights,
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.visible_bias
            .iter()
            .chain(&self.hidden_bias)
            .chain(self.weights.iter().flatten())
            .copied()
            .collect()
    }

    /// Adds c·(positive statistics) − c·(negative statistics).
    fn accumulate(&mut self, v: &[u8], ph: &[f64], v2: &[u8], ph2: &[f64], c: f64) {
        for (i, (&x, &x2)) in v.iter().zip(v2).enumerate() {
            self.visible_bias[i] += c * (x as f64 - x2 as f64);
            for j in 0..ph.len() {
                self.weights[i][j] += c * (x as f64 * ph[j] - x2 as f64 * ph2[j]);
            }
        }
        for (j, (&p, &p2)) in ph.iter().zip(ph2).enumerate() {
            self.hidden_bias[j] += c * (p - p2);
        }
    }
}

/// CD-1 statistics of one sample: v → h (sampled) → v′ (sampled), with
/// hidden probabilities on both sides.
pub fn cd1_sample_update(params: &RbmParams, v: &[u8], rng: &mut RngStream) -> Result<RbmUpdate> {
    let (ph, v2, ph2) = cd1_reconstruction(params, v, rng)?;
    let mut u = RbmUpdate::zeros(params.n_visible(), params.n_hidden());
    u.accumulate(v, &ph, &v2, &ph2, 1.0);
    Ok(u)
}

/// (P(h|v), v′, P(h|v′)) with h and v′ sampled.
fn cd1_reconstruction(params: &RbmParams, v: &[u8], rng: &mut RngStream) -> Result<(Vec<f64>, Vec<u8>, Vec<f64>)> {
    let ph = cond_prob_h(params, v)?;
    let h = sample_units(&ph, rng);
    let v2 = sample_units(&cond_prob_v(params, &h)?, rng);
    let ph2 = cond_prob_h(params, &v2)?;
    Ok((ph, v2, ph2))
}

/// One CD-1 step on a batch; returns the applied increment (lr times the
/// batch-mean statistics).
pub fn cd1_update(params: &mut RbmParams, batch: &BinaryBatch, lr: f64, rng: &mut RngStream) -> Result<RbmUpdate> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("CD-1 batch is empty".into()));
    }
    params.validate()?;
    let (nv, nh) = (params.n_visible(), params.n_hidden());
    let mut total = RbmUpdate::zeros(nv, nh);
    let c = lr / batch.len() as f64;
    for v in batch.rows() {
        check_binary(v, nv, "batch row")?;
        let (ph, v2, ph2) = cd1_reconstruction(params, v, rng)?;
        total.accumulate(v, &ph, &v2, &ph2, c);
    }
    for (a, d) in params.visible_bias.iter_mut().zip(&total.visible_bias) {
        *a += d;
    }
    for (b, d) in params.hidden_bias.iter_mut().zip(&total.hidden_bias) {
        *b += d;
    }
    for (row, drow) in params.weights.iter_mut().zip(&total.weights) {
        for (w, d) in row.iter_mut().zip(drow) {
            *w += d;
        }
    }
    Ok(total)
}

/// Expected CD-1 statistics for data drawn from `p0`, by enumeration.
pub fn cd1_expected_update(params: &RbmParams, p0: &[f64]) -> Result<RbmUpdate> {
    check_enumerable(params)?;
    let (nv, nh) = (params.n_visible(), params.n_hidden());
    check_table(p0, nv)?;
    let mut u = RbmUpdate::zeros(nv, nh);
    for (vi, &q) in p0.iter().enumerate() {
        if q == 0.0 {
            continue;
        }
        let v = to_bits(vi, nv);
        let ph = cond_prob_h(params, &v)?;
        for hi in 0..1usize << nh {
            let h = to_bits(hi, nh);
            let p_h: f64 = ph.iter().zip(&h).map(|(p, &b)| if b == 1 { *p } else { 1.0 - p }).product();
            let pv = cond_prob_v(params, &h)?;
            for v2i in 0..1usize << nv {
                let v2 = to_bits(v2i, nv);
                let p_v2: f64 = pv.iter().zip(&v2).map(|(p, &b)| if b == 1 { *p } else { 1.0 - p }).product();
                let ph2 = cond_prob_h(params, &v2)?;
                u.accumulate(&v, &ph, &v2, &ph2, q * p_h * p_v2);
            }
        }
    }
    Ok(u)
}

/// Gradient of −C (ascent direction): ⟨·⟩_{P0} − ⟨·⟩_P for each parameter.
pub fn exact_log_likelihood_gradient(params: &RbmParams, p0: &[f64]) -> Result<RbmUpdate> {
    let (nv, nh) = (params.n_visible(), params.n_hidden());
    check_table(p0, nv)?;
    let p = exact_distribution(params)?;
    let mut u = RbmUpdate::zeros(nv, nh);
    for vi in 0..1usize << nv {
        let v = to_bits(vi, nv);
        let ph = cond_prob_h(params, &v)?;
        let c = p0[vi] - p[vi];
        for i in 0..nv {
            let x = v[i] as f64;
            u.visible_bias[i] += c * x;
            for j in 0..nh {
                u.weights[i][j] += c * x * ph[j];
            }
        }
        for j in 0..nh {
            u.hidden_bias[j] += c * ph[j];
        }
    }
    Ok(u)
}

/// Default target: two peaks at 000 and 111 over three visible units.
pub const TWO_PEAK_TARGET: [f64; 8] = [0.42, 0.16 / 6.0, 0.16 / 6.0, 0.16 / 6.0, 0.16 / 6.0, 0.16 / 6.0, 0.16 / 6.0, 0.42];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RbmConfig {
    pub n_hidden: usize,
    pub target: Vec<f64>,
    pub steps: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub init_scale: f64,
    /// Log every this many steps.
    pub log_every: usize,
}

impl Default for RbmConfig {
    fn default() -> Self {
        RbmConfig {
            n_hidden: 3,
            target: TWO_PEAK_TARGET.to_vec(),
            steps: 1800,
            batch: 512,
            learning_rate: 0.1,
            init_scale: 0.1,
            log_every: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RbmReport {
    pub params: RbmParams,
    /// (step, cross-entropy, KL) at every logged step.
    pub log: Vec<(usize, f64, f64)>,
    pub final_kl: f64,
}

/// CD-1 on batches sampled from the target table. Stream 0 initializes,
/// stream 1 draws data and stream 2 drives the Gibbs reconstructions.
pub fn train_rbm(config: &RbmConfig, seed: u64) -> Result<RbmReport> {
    let nv = config.target.len().trailing_zeros() as usize;
    if config.target.len() < 2 || !config.target.len().is_power_of_two() {
        return Err(Error::InvalidArgument("target table length must be a power of two".into()));
    }
    check_table(&config.target, nv)?;
    if config.batch == 0 || config.n_hidden == 0 || config.log_every == 0 {
        return Err(Error::InvalidArgument("batch, hidden units and log interval must be positive".into()));
    }
    let mut params = RbmParams::random(nv, config.n_hidden, config.init_scale, &mut RngStream::new(seed, 0));
    check_enumerable(&params)?;
    let mut data_rng = RngStream::new(seed, 1);
    let mut gibbs_rng = RngStream::new(seed, 2);
    let mut log = Vec::new();
    for step in 0..=config.steps {
        if step % config.log_every == 0 || step == config.steps {
            log.push((step, rbm_cross_entropy(&config.target, &params)?, rbm_kl(&config.target, &params)?));
        }
        if step == config.steps {
            break;
        }
        let batch = BinaryBatch::sample_from(&config.target, nv, config.batch, &mut data_rng)?;
        cd1_update(&mut params, &batch, config.learning_rate, &mut gibbs_rng)?;
    }
    let final_kl = log.last().map(|r| r.2).unwrap_or(f64::NAN);
    Ok(RbmReport { params, log, final_kl })
}
