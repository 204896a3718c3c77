//! Experiment dispatch: resolves the parameter table, runs the experiment
//! and collects what the runner writes to disk.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use toml::Table;

use qflrl_core::autoenc::{pca_task, to_pgm, denoising_task, DenoiseConfig, PcaTaskConfig};
use qflrl_core::generative::{exact_distribution, qbm_two_qubit_task, train_rbm, QbmConfig, RbmConfig, TWO_QUBIT_LABELS};
use qflrl_core::nn::{gradient_check_suite, train_func1d, train_xor, Checkpoint, Func1dConfig, TaskReport, XorConfig};
use qflrl_core::numkit::RngStream;
use qflrl_core::qcontrol::{constant_drive_baseline, decile_means, train_with, ControlConfig, TrainLogRow, COHERENT_CEILING};
use qflrl_core::qsim::{dump_trajectory, FockDensityMatrix, STABILITY_LIMIT};
use qflrl_core::rl::{
    compare_with_oracle, train_q_learning, train_walker, train_walker_target, value_iteration_oracle,
    walker_analytic_curve, GridworldBoxEnv, QLearningConfig, SigmoidPolicy, UpdateRecord, WalkerConfig, WalkerEnv,
    WalkerTargetConfig, WalkerTargetEnv,
};
use qflrl_core::statest::{train_reconstructor, ReconstructConfig, ReconstructLogRow};

use crate::config::{resolve, Experiment};
use crate::error::CliError;
use crate::output::SCHEMA_VERSION;

/// Everything a finished run hands to the writer.
#[derive(Debug)]
pub struct RunOutput {
    /// Resolved parameters, defaults included.
    pub params: Value,
    pub csv: String,
    pub metrics: Map<String, Value>,
    pub checkpoint: Option<String>,
    /// Additional (file name, contents) pairs.
    pub files: Vec<(String, String)>,
}

/// A rule broken by a configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub rule: String,
    pub message: String,
}

fn violation(rule: &str, message: impl Into<String>) -> Violation {
    Violation { rule: rule.into(), message: message.into() }
}

/// Collects summary metrics and remembers non-finite entries.
#[derive(Default)]
struct Metrics {
    map: Map<String, Value>,
    bad: Vec<String>,
}

impl Metrics {
    fn num(&mut self, key: &str, x: f64) -> &mut Self {
        if !x.is_finite() {
            self.bad.push(key.into());
        }
        self.map.insert(key.into(), json!(x));
        self
    }

    fn nums(&mut self, key: &str, xs: &[f64]) -> &mut Self {
        if xs.iter().any(|x| !x.is_finite()) {
            self.bad.push(key.into());
        }
        self.map.insert(key.into(), json!(xs));
        self
    }

    fn put(&mut self, key: &str, v: impl Into<Value>) -> &mut Self {
        self.map.insert(key.into(), v.into());
        self
    }

    fn finish(self) -> Result<Map<String, Value>, CliError> {
        if self.bad.is_empty() {
            Ok(self.map)
        } else {
            Err(CliError::NonFinite(self.bad.join(", ")))
        }
    }
}

fn echo<T: Serialize>(params: &T) -> Result<Value, CliError> {
    serde_json::to_value(params).map_err(|e| CliError::Config(format!("cannot echo parameters: {e}")))
}

fn csv(header: String, rows: impl Iterator<Item = String>) -> String {
    let mut out = header;
    out.push('\n');
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    out
}

fn network_checkpoint(cp: &Checkpoint) -> Result<String, CliError> {
    Ok(cp.to_json()?)
}

fn plain_checkpoint(kind: &str, params: Value) -> Result<String, CliError> {
    let v = json!({ "format_version": SCHEMA_VERSION, "kind": kind, "params": params });
    serde_json::to_string_pretty(&v).map_err(|e| CliError::Io(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradcheckParams {
    pub cases: usize,
    /// Central-difference step.
    pub h: f64,
    /// Pass threshold on the scale-aware relative error.
    pub tolerance: f64,
}

impl Default for GradcheckParams {
    fn default() -> Self {
        GradcheckParams { cases: 20, h: 1e-5, tolerance: 1e-5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridworldParams {
    pub height: usize,
    pub width: usize,
    pub start: (usize, usize),
    pub boxes: Vec<(usize, usize)>,
    /// Value-iteration stopping tolerance for Q*.
    pub oracle_tol: f64,
    pub qlearning: QLearningConfig,
}

impl Default for GridworldParams {
    fn default() -> Self {
        GridworldParams {
            height: 4,
            width: 4,
            start: (0, 0),
            boxes: vec![(3, 2)],
            oracle_tol: 1e-12,
            qlearning: QLearningConfig::default(),
        }
    }
}

impl GridworldParams {
    fn env(&self) -> qflrl_core::Result<GridworldBoxEnv> {
        GridworldBoxEnv::new(self.height, self.width, self.start, self.boxes.clone())
    }
}

/// Cavity parameters: the control configuration plus the number of
/// constant-drive trajectories dumped at the best grid amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct CavityParams {
    pub control: ControlConfig,
    pub trajectory_dumps: usize,
}

const DUMP_KEY: &str = "trajectory_dumps";

fn resolve_cavity(params: &Table) -> Result<CavityParams, CliError> {
    let mut table = params.clone();
    let trajectory_dumps = match table.remove(DUMP_KEY) {
        None => 0,
        Some(toml::Value::Integer(n)) if n >= 0 => n as usize,
        Some(v) => return Err(CliError::Config(format!("{DUMP_KEY} must be a non-negative integer, got {v}"))),
    };
    Ok(CavityParams { control: resolve(&table)?, trajectory_dumps })
}

fn cavity_echo(p: &CavityParams) -> Result<Value, CliError> {
    let mut v = echo(&p.control)?;
    v[DUMP_KEY] = json!(p.trajectory_dumps);
    Ok(v)
}

/// Resolved parameters of `experiment` as JSON, defaults included.
pub fn resolved_params(experiment: Experiment, params: &Table) -> Result<Value, CliError> {
    match experiment {
        Experiment::Gradcheck => echo(&resolve::<GradcheckParams>(params)?),
        Experiment::Xor => echo(&resolve::<XorConfig>(params)?),
        Experiment::Func1d => echo(&resolve::<Func1dConfig>(params)?),
        Experiment::AutoencPca => echo(&resolve::<PcaTaskConfig>(params)?),
        Experiment::Denoise => echo(&resolve::<DenoiseConfig>(params)?),
        Experiment::Walker => echo(&resolve::<WalkerConfig>(params)?),
        Experiment::WalkerTarget => echo(&resolve::<WalkerTargetConfig>(params)?),
        Experiment::GridworldQ => echo(&resolve::<GridworldParams>(params)?),
        Experiment::Cavity => cavity_echo(&resolve_cavity(params)?),
        Experiment::Rbm => echo(&resolve::<RbmConfig>(params)?),
        Experiment::Qbm => echo(&resolve::<QbmConfig>(params)?),
        Experiment::Reconstruct => echo(&resolve::<ReconstructConfig>(params)?),
    }
}

fn from_core(rule: &str, r: qflrl_core::Result<()>) -> Vec<Violation> {
    match r {
        Ok(()) => Vec::new(),
        Err(e) => vec![violation(rule, e.to_string())],
    }
}

fn positive(rule: &str, name: &str, x: f64) -> Option<Violation> {
    (!(x > 0.0 && x.is_finite())).then(|| violation(rule, format!("{name} = {x} must be positive and finite")))
}

fn nonzero(rule: &str, name: &str, n: usize) -> Option<Violation> {
    (n == 0).then(|| violation(rule, format!("{name} must be positive")))
}

fn cavity_violations(p: &CavityParams) -> Vec<Violation> {
    let c = &p.control;
    let mut v = Vec::new();
    let s = &c.sme;
    if !(s.kappa >= 0.0 && s.kappa.is_finite() && s.kappa_meas >= 0.0 && s.kappa_meas.is_finite()) {
        v.push(violation("sme_rates", "κ and κ′ must be finite and non-negative"));
    }
    v.extend(positive("sme_time_step", "sme.dt", s.dt));
    v.extend(nonzero("sme_time_step", "sme.substeps", s.substeps));
    if c.cutoff < 2 {
        v.push(violation("cutoff", "cutoff must be at least 2"));
    }
    if v.is_empty() {
        let number = s.stability_number(c.cutoff);
        if number >= STABILITY_LIMIT {
            v.push(violation(
                "sme_stability",
                format!(
                    "(κ + 4κ′‖A‖²)δt = {number:.4} is not below {STABILITY_LIMIT}; use at least {} substeps",
                    s.min_substeps(c.cutoff)
                ),
            ));
        }
    }
    if c.amplitudes.len() < 2 {
        v.push(violation("amplitude_grid", "at least two drive amplitudes are required"));
    } else if c.cutoff >= 2 && s.kappa.is_finite() {
        let cap = c.amplitude_cap();
        if let Some(a) = c.amplitudes.iter().find(|a| !(a.norm() <= cap)) {
            v.push(violation(
                "amplitude_grid",
                format!("amplitude {a} exceeds the leakage cap {cap:.3} for cutoff {}", c.cutoff),
            ));
        }
        for (i, a) in c.amplitudes.iter().enumerate() {
            if c.amplitudes[..i].contains(a) {
                v.push(violation("amplitude_grid", format!("amplitude {a} appears twice")));
                break;
            }
        }
    }
    v.extend(nonzero("policy_input", "window", c.window));
    if c.window > c.horizon {
        v.push(violation(
            "policy_input",
            format!("measurement window {} is longer than the episode horizon {}", c.window, c.horizon),
        ));
    }
    if c.hidden.contains(&0) {
        v.push(violation("policy_layers", "hidden layer widths must be positive"));
    }
    v.extend(nonzero("episode", "horizon", c.horizon));
    v.extend(nonzero("episode", "batch", c.batch));
    if c.target >= c.cutoff {
        v.push(violation("target_level", format!("target level {} outside cutoff {}", c.target, c.cutoff)));
    }
    v.extend(positive("optimizer", "learning_rate", c.learning_rate));
    if v.is_empty() {
        // anything the named rules missed
        v.extend(from_core("control", c.validate()));
    }
    v
}

fn walker_violations(c: &WalkerConfig) -> Vec<Violation> {
    let mut v = from_core("environment", WalkerEnv::new(c.horizon).map(|_| ()));
    v.extend(nonzero("training", "batch", c.batch));
    v.extend(nonzero("training", "updates", c.updates));
    v.extend(positive("training", "learning_rate", c.learning_rate));
    if !c.theta0.is_finite() {
        v.push(violation("training", "theta0 must be finite"));
    }
    v
}

fn rbm_violations(c: &RbmConfig) -> Vec<Violation> {
    let mut v = Vec::new();
    let n = c.target.len();
    if n < 2 || !n.is_power_of_two() {
        v.push(violation("target_table", format!("target has {n} entries; need a power of two ≥ 2")));
    } else {
        let sum: f64 = c.target.iter().sum();
        if c.target.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            v.push(violation("target_table", format!("target must be a probability table (sums to {sum})")));
        }
    }
    v.extend(nonzero("training", "n_hidden", c.n_hidden));
    v.extend(nonzero("training", "batch", c.batch));
    v.extend(nonzero("training", "log_every", c.log_every));
    v.extend(positive("training", "learning_rate", c.learning_rate));
    v
}

fn qbm_violations(c: &QbmConfig) -> Vec<Violation> {
    let mut v = Vec::new();
    if !c.target_weights.is_empty() && c.target_weights.len() != TWO_QUBIT_LABELS.len() {
        v.push(violation(
            "target_weights",
            format!("expected {} weights ({:?})", TWO_QUBIT_LABELS.len(), TWO_QUBIT_LABELS),
        ));
    }
    if c.target_weights.iter().any(|w| !w.is_finite()) || !(c.target_scale >= 0.0 && c.target_scale.is_finite()) {
        v.push(violation("target_weights", "target weights and scale must be finite"));
    }
    v.extend(positive("training", "learning_rate", c.learning_rate));
    v
}

/// Every broken rule, without running anything.
pub fn violations(experiment: Experiment, params: &Table) -> Result<Vec<Violation>, CliError> {
    Ok(match experiment {
        Experiment::Gradcheck => {
            let p: GradcheckParams = resolve(params)?;
            let mut v = Vec::new();
            v.extend(nonzero("suite", "cases", p.cases));
            v.extend(positive("suite", "h", p.h));
            v.extend(positive("suite", "tolerance", p.tolerance));
            v
        }
        Experiment::Xor => from_core("network", resolve::<XorConfig>(params)?.validate()),
        Experiment::Func1d => from_core("network", resolve::<Func1dConfig>(params)?.validate()),
        Experiment::AutoencPca => from_core("pca_task", resolve::<PcaTaskConfig>(params)?.validate()),
        Experiment::Denoise => from_core("denoise", resolve::<DenoiseConfig>(params)?.validate()),
        Experiment::Walker => walker_violations(&resolve(params)?),
        Experiment::WalkerTarget => {
            let c: WalkerTargetConfig = resolve(params)?;
            let mut v = from_core("environment", WalkerTargetEnv::new(c.x_max, c.horizon).map(|_| ()));
            v.extend(nonzero("training", "batch", c.batch));
            v.extend(positive("training", "learning_rate", c.learning_rate));
            v
        }
        Experiment::GridworldQ => {
            let p: GridworldParams = resolve(params)?;
            let mut v = from_core("grid", p.env().map(|_| ()));
            let q = &p.qlearning;
            v.extend(nonzero("qlearning", "episodes", q.episodes));
            v.extend(nonzero("qlearning", "max_steps", q.max_steps));
            if !(q.alpha > 0.0 && q.alpha <= 1.0) || !(q.gamma >= 0.0 && q.gamma < 1.0) {
                v.push(violation("qlearning", "need 0 < alpha ≤ 1 and 0 ≤ gamma < 1"));
            }
            let eps = |e: f64| (0.0..=1.0).contains(&e);
            if !eps(q.epsilon_start) || !eps(q.epsilon_end) {
                v.push(violation("qlearning", "epsilon schedule must stay in [0, 1]"));
            }
            v.extend(positive("oracle", "oracle_tol", p.oracle_tol));
            v
        }
        Experiment::Cavity => cavity_violations(&resolve_cavity(params)?),
        Experiment::Rbm => rbm_violations(&resolve(params)?),
        Experiment::Qbm => qbm_violations(&resolve(params)?),
        Experiment::Reconstruct => from_core("reconstruct", resolve::<ReconstructConfig>(params)?.validate()),
    })
}

/// Checks the rules, then runs `experiment`.
pub fn run(experiment: Experiment, params: &Table, seed: u64) -> Result<RunOutput, CliError> {
    let found = violations(experiment, params)?;
    if let Some(first) = found.first() {
        return Err(CliError::Config(format!("{}: {}", first.rule, first.message)));
    }
    match experiment {
        Experiment::Gradcheck => gradcheck(resolve(params)?, seed),
        Experiment::Xor => {
            let c: XorConfig = resolve(params)?;
            let r = train_xor(&c, seed)?;
            fitted(echo(&c)?, r, 0.1)
        }
        Experiment::Func1d => {
            let c: Func1dConfig = resolve(params)?;
            let r = train_func1d(&c, seed)?;
            fitted(echo(&c)?, r, 0.05)
        }
        Experiment::AutoencPca => autoenc_pca(resolve(params)?, seed),
        Experiment::Denoise => denoise(resolve(params)?, seed),
        Experiment::Walker => walker(resolve(params)?, seed),
        Experiment::WalkerTarget => walker_target(resolve(params)?, seed),
        Experiment::GridworldQ => gridworld(resolve(params)?, seed),
        Experiment::Cavity => cavity(resolve_cavity(params)?, seed),
        Experiment::Rbm => rbm(resolve(params)?, seed),
        Experiment::Qbm => qbm(resolve(params)?, seed),
        Experiment::Reconstruct => reconstruct(resolve(params)?, seed),
    }
}

fn gradcheck(p: GradcheckParams, seed: u64) -> Result<RunOutput, CliError> {
    let errors = gradient_check_suite(p.cases, seed, p.h)?;
    let worst = errors.iter().copied().fold(0.0, f64::max);
    let mut m = Metrics::default();
    m.num("max_relative_error", worst)
        .put("cases", p.cases)
        .put("failed_cases", errors.iter().filter(|e| !(**e < p.tolerance)).count())
        .put("passed", worst < p.tolerance);
    Ok(RunOutput {
        params: echo(&p)?,
        csv: csv("case,max_relative_error".into(), errors.iter().enumerate().map(|(i, e)| format!("{i},{e}"))),
        metrics: m.finish()?,
        checkpoint: None,
        files: Vec::new(),
    })
}

fn fitted(params: Value, r: TaskReport, threshold: f64) -> Result<RunOutput, CliError> {
    let mut m = Metrics::default();
    m.num("final_loss", r.loss_curve.last().copied().unwrap_or(f64::NAN))
        .num("max_error", r.max_error)
        .put("within_threshold", r.max_error < threshold)
        .num("threshold", threshold);
    if r.outputs.len() <= 16 {
        m.nums("outputs", &r.outputs).nums("targets", &r.targets);
    }
    Ok(RunOutput {
        params,
        csv: csv("step,loss".into(), r.loss_curve.iter().enumerate().map(|(i, l)| format!("{},{l}", i + 1))),
        metrics: m.finish()?,
        checkpoint: Some(network_checkpoint(&Checkpoint::new(&r.network, None))?),
        files: Vec::new(),
    })
}

fn autoenc_pca(c: PcaTaskConfig, seed: u64) -> Result<RunOutput, CliError> {
    let r = pca_task(&c, seed)?;
    let mut m = Metrics::default();
    m.num("final_cost", r.autoencoder.final_cost)
        .num("optimal_cost", r.optimal_cost)
        .num("relative_gap", r.relative_gap)
        .nums("eigenvalues", &r.pca.eigenvalues);
    match r.max_angle_deg {
        Some(a) => m.num("max_principal_angle_deg", a),
        None => m.put("max_principal_angle_deg", Value::Null),
    };
    Ok(RunOutput {
        params: echo(&c)?,
        csv: csv("step,cost".into(), r.autoencoder.cost_curve.iter().enumerate().map(|(i, l)| format!("{i},{l}"))),
        metrics: m.finish()?,
        checkpoint: Some(network_checkpoint(&Checkpoint::new(&r.autoencoder.net, None))?),
        files: Vec::new(),
    })
}

fn denoise(c: DenoiseConfig, seed: u64) -> Result<RunOutput, CliError> {
    let r = denoising_task(&c, seed)?;
    let mut m = Metrics::default();
    m.num("train_error", r.train_error)
        .num("test_error", r.test_error)
        .num("noise_baseline", r.noise_baseline)
        .put("beats_noise_baseline", r.test_error < r.noise_baseline);
    let mut files = Vec::new();
    for (k, ex) in r.examples.iter().enumerate() {
        for (tag, pixels) in [("clean", &ex.clean), ("noisy", &ex.noisy), ("denoised", &ex.denoised)] {
            files.push((format!("example_{k}_{tag}.pgm"), to_pgm(pixels, c.size, c.size)?));
        }
    }
    Ok(RunOutput {
        params: echo(&c)?,
        csv: csv("step,cost".into(), r.cost_curve.iter().enumerate().map(|(i, l)| format!("{},{l}", i + 1))),
        metrics: m.finish()?,
        checkpoint: Some(network_checkpoint(&Checkpoint::new(&r.net, Some(&r.optimizer)))?),
        files,
    })
}

fn policy_checkpoint(p: &SigmoidPolicy) -> Result<String, CliError> {
    plain_checkpoint("sigmoid_policy", json!({ "theta": p.theta, "base_actions": p.base_actions }))
}

fn walker(c: WalkerConfig, seed: u64) -> Result<RunOutput, CliError> {
    let (thetas, records) = train_walker(&c, seed)?;
    let analytic = walker_analytic_curve(&c)?;
    let header = format!("{},theta,analytic_theta", UpdateRecord::csv_header(1));
    let rows = records
        .iter()
        .map(|r| format!("{},{},{}", r.to_csv_row(), thetas[r.step], analytic[r.step]));
    let theta = *thetas.last().expect("θ0 present");
    let exact = *analytic.last().expect("θ0 present");
    let mut m = Metrics::default();
    m.num("final_theta", theta)
        .num("final_p_up", qflrl_core::nn::sigmoid(theta))
        .num("analytic_final_theta", exact)
        .num("analytic_final_p_up", qflrl_core::nn::sigmoid(exact))
        .num("final_mean_return", records.last().map_or(f64::NAN, |r| r.mean_return));
    let policy = SigmoidPolicy::new(vec![theta], vec![WalkerEnv::UP])?;
    Ok(RunOutput {
        params: echo(&c)?,
        csv: csv(header, rows),
        metrics: m.finish()?,
        checkpoint: Some(policy_checkpoint(&policy)?),
        files: Vec::new(),
    })
}

fn walker_target(c: WalkerTargetConfig, seed: u64) -> Result<RunOutput, CliError> {
    let r = train_walker_target(&c, seed)?;
    let mut m = Metrics::default();
    m.num("p_move_off_target", r.p_move_off_target())
        .num("p_stay_on_target", r.p_stay_on_target())
        .num("final_mean_return", r.records.last().map_or(f64::NAN, |x| x.mean_return));
    Ok(RunOutput {
        params: echo(&c)?,
        csv: csv(UpdateRecord::csv_header(2), r.records.iter().map(UpdateRecord::to_csv_row)),
        metrics: m.finish()?,
        checkpoint: Some(policy_checkpoint(&r.policy)?),
        files: Vec::new(),
    })
}

fn gridworld(p: GridworldParams, seed: u64) -> Result<RunOutput, CliError> {
    let env = p.env()?;
    let report = train_q_learning(&env, &p.qlearning, seed)?;
    let mdp = env.to_mdp()?;
    let q_star = value_iteration_oracle(&mdp, p.qlearning.gamma, p.oracle_tol)?;
    let cmp = compare_with_oracle(&report, &mdp, &q_star, env.state_index(&env.start_state()));
    let tail = report.returns.len().min(100);
    let tail_mean = report.returns[report.returns.len() - tail..].iter().sum::<f64>() / tail as f64;
    let mut m = Metrics::default();
    m.put("reachable_states", cmp.reachable_states)
        .put("policy_mismatches", cmp.policy_mismatches.len())
        .put("mismatched_states", cmp.policy_mismatches.clone())
        .num("max_visited_error", cmp.max_visited_error)
        .num("mean_return_last_100", tail_mean);
    let t = &report.table;
    let values: Vec<Vec<f64>> = (0..t.num_states()).map(|s| t.row(s).to_vec()).collect();
    let checkpoint = plain_checkpoint(
        "q_table",
        json!({ "num_states": t.num_states(), "num_actions": t.num_actions(), "gamma": t.gamma, "alpha": t.alpha, "values": values }),
    )?;
    let rows = report
        .returns
        .iter()
        .zip(&report.epsilons)
        .enumerate()
        .map(|(i, (r, e))| format!("{i},{r},{e}"));
    Ok(RunOutput {
        params: echo(&p)?,
        csv: csv("episode,return,epsilon".into(), rows),
        metrics: m.finish()?,
        checkpoint: Some(checkpoint),
        files: Vec::new(),
    })
}

fn cavity(p: CavityParams, seed: u64) -> Result<RunOutput, CliError> {
    let c = &p.control;
    let report = train_with(c, seed, |row| {
        log::info!("update {} mean return {:.4} P(target) {:.4}", row.update, row.mean_return, row.mean_population);
    })?;
    let returns: Vec<f64> = report.log.iter().map(|r| r.mean_return).collect();
    let deciles = decile_means(&returns);
    let final_population = report.final_window_population();
    let mut m = Metrics::default();
    m.num("best_mean_return", report.best_mean_return)
        .num("final_window_population", final_population)
        .num("baseline_best_constant_drive", report.baseline_best_constant_drive)
        .num("coherent_ceiling", COHERENT_CEILING)
        .put("exceeds_baseline", final_population > report.baseline_best_constant_drive)
        .put("exceeds_coherent_ceiling", final_population > COHERENT_CEILING)
        .nums("decile_mean_returns", &deciles)
        .put("leakage_warnings", report.log.iter().map(|r| r.leakage_warnings).sum::<u64>());
    let mut files = vec![("best_checkpoint.json".to_string(), network_checkpoint(&report.best_checkpoint())?)];
    if p.trajectory_dumps > 0 {
        let baseline = constant_drive_baseline(c)?;
        let alpha = c.amplitudes[baseline.best_action];
        let vacuum = FockDensityMatrix::vacuum(c.cutoff)?;
        let mut text = String::new();
        for k in 0..p.trajectory_dumps {
            let mut rng = RngStream::new(seed, (1u64 << 48) + k as u64);
            let dump = dump_trajectory(&c.sme, &vacuum, alpha, c.horizon, k, &mut rng)?;
            // keep one header
            let body = if k == 0 { dump.as_str() } else { dump.split_once('\n').map_or("", |x| x.1) };
            text.push_str(body);
        }
        files.push(("trajectories.csv".to_string(), text));
    }
    Ok(RunOutput {
        params: cavity_echo(&p)?,
        csv: csv(TrainLogRow::csv_header(c.amplitudes.len()), report.log.iter().map(TrainLogRow::to_csv_row)),
        metrics: m.finish()?,
        checkpoint: Some(network_checkpoint(&report.final_checkpoint())?),
        files,
    })
}

fn rbm(c: RbmConfig, seed: u64) -> Result<RunOutput, CliError> {
    let r = train_rbm(&c, seed)?;
    let model = exact_distribution(&r.params)?;
    let mut m = Metrics::default();
    m.num("final_kl", r.final_kl)
        .num("final_cross_entropy", r.log.last().map_or(f64::NAN, |x| x.1))
        .nums("model_distribution", &model)
        .nums("target_distribution", &c.target);
    let params = serde_json::to_value(&r.params).map_err(|e| CliError::Io(e.to_string()))?;
    Ok(RunOutput {
        params: echo(&c)?,
        csv: csv("step,cross_entropy,kl".into(), r.log.iter().map(|(s, ce, kl)| format!("{s},{ce},{kl}"))),
        metrics: m.finish()?,
        checkpoint: Some(plain_checkpoint("rbm", params)?),
        files: Vec::new(),
    })
}

fn qbm(c: QbmConfig, seed: u64) -> Result<RunOutput, CliError> {
    let task = qbm_two_qubit_task(&c, seed)?;
    let s = &task.report.relative_entropy;
    let weights = &task.report.model.weights;
    let mut m = Metrics::default();
    m.num("final_relative_entropy", *s.last().expect("initial value logged"))
        .num("initial_relative_entropy", s[0])
        .put("labels", TWO_QUBIT_LABELS.to_vec())
        .nums("target_weights", &task.target_weights)
        .nums("learned_weights", weights);
    Ok(RunOutput {
        params: echo(&c)?,
        csv: csv("step,relative_entropy".into(), s.iter().enumerate().map(|(i, x)| format!("{i},{x}"))),
        metrics: m.finish()?,
        checkpoint: Some(plain_checkpoint("qbm", json!({ "labels": TWO_QUBIT_LABELS, "weights": weights }))?),
        files: Vec::new(),
    })
}

fn reconstruct(c: ReconstructConfig, seed: u64) -> Result<RunOutput, CliError> {
    let r = train_reconstructor(&c, seed)?;
    let mut m = Metrics::default();
    m.num("train_mse", r.train_mse)
        .num("test_mse", r.test_mse)
        .num("oracle_mse", r.oracle_mse)
        .num("oracle_se", r.oracle_se)
        .num("baseline_mse", r.baseline_mse)
        .num("test_to_oracle_ratio", r.test_mse / r.oracle_mse);
    Ok(RunOutput {
        params: echo(&c)?,
        csv: csv(ReconstructLogRow::CSV_HEADER.into(), r.log.iter().map(ReconstructLogRow::to_csv_row)),
        metrics: m.finish()?,
        checkpoint: Some(network_checkpoint(&Checkpoint::new(&r.network, None))?),
        files: Vec::new(),
    })
}
