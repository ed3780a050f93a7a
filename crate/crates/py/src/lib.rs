//! Python bindings over the core simulator: config handling, training,
//! checkpoint evaluation, the baselines/oracle on tiny instances, and a
//! few scalar operations handy for sanity checks from Python.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use rand_chacha::ChaCha8Rng;

use uassoc::config::SimConfig;
use uassoc::harness::eval::EvalOverrides;
use uassoc::learner::MetricsRow;
use uassoc::policy::PolicyNetwork;
use uassoc::utility::{Constraints, FixedRateEvaluator};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn parse_config(toml_text: Option<&str>) -> PyResult<SimConfig> {
    let cfg: SimConfig = match toml_text {
        None => SimConfig::default(),
        Some(text) => toml::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?,
    };
    cfg.validated().map_err(err)
}

#[pyfunction]
fn version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

/// Full default configuration as TOML (every Table-style radio value
/// and learning hyperparameter).
#[pyfunction]
fn default_config_toml() -> PyResult<String> {
    Ok(SimConfig::default().validated().map_err(err)?.to_toml())
}

#[pyfunction]
fn alpha_fair(x: f64, alpha: f64) -> f64 {
    uassoc::utility::alpha_fair(x, alpha)
}

#[pyfunction]
fn shannon_rate(bandwidth_hz: f64, sinr: f64) -> f64 {
    uassoc::channel::shannon_rate(bandwidth_hz, sinr)
}

#[pyfunction]
fn hysteretic_ppo_loss(zeta: f64, advantage: f64, eps_neg: f64, eps_pos: f64) -> f64 {
    uassoc::learner::hysteretic_ppo_loss(zeta, advantage, eps_neg, eps_pos)
}

fn row_dict<'py>(py: Python<'py>, row: &MetricsRow) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("episode", row.episode)?;
    d.set_item("seed", row.seed)?;
    d.set_item("k", row.k)?;
    d.set_item("mean_reward", row.mean_reward)?;
    d.set_item("heuristic_reward", row.heuristic_reward)?;
    d.set_item("r_d", row.r_d)?;
    d.set_item("maxsnr_reward", row.maxsnr_reward)?;
    d.set_item("policy_entropy", row.policy_entropy)?;
    d.set_item("actor_loss", row.actor_loss)?;
    d.set_item("critic_loss", row.critic_loss)?;
    d.set_item("collisions", row.collisions)?;
    Ok(d)
}

/// Trains the shared policy and writes a checkpoint; returns the
/// per-episode metrics rows.
#[pyfunction]
#[pyo3(signature = (episodes, seed, checkpoint_path, config_toml=None))]
fn train<'py>(
    py: Python<'py>,
    episodes: usize,
    seed: u64,
    checkpoint_path: &str,
    config_toml: Option<&str>,
) -> PyResult<Bound<'py, PyList>> {
    let cfg = parse_config(config_toml)?;
    let outcome = uassoc::learner::train(&cfg, episodes, seed, |_, _| Ok(())).map_err(err)?;
    outcome
        .policy
        .save(std::path::Path::new(checkpoint_path), &cfg, vec![seed], None)
        .map_err(err)?;
    let rows = PyList::empty(py);
    for row in &outcome.metrics {
        rows.append(row_dict(py, row)?)?;
    }
    Ok(rows)
}

/// Zero-shot evaluation of a checkpoint against both baselines on
/// shared-randomness deployments. Returns one dict per (method, k).
#[pyfunction]
#[pyo3(signature = (checkpoint_path, k_values, deployments=50, seed=0, beams=None))]
fn evaluate<'py>(
    py: Python<'py>,
    checkpoint_path: &str,
    k_values: Vec<usize>,
    deployments: usize,
    seed: u64,
    beams: Option<usize>,
) -> PyResult<Bound<'py, PyList>> {
    let overrides = EvalOverrides {
        beams,
        deployments: Some(deployments),
        seed,
        ..Default::default()
    };
    let summary = uassoc::harness::run_transfer_eval(
        std::path::Path::new(checkpoint_path),
        &k_values,
        &overrides,
        String::new(),
    )
    .map_err(err)?;
    let out = PyList::empty(py);
    for p in &summary.points {
        let d = PyDict::new(py);
        d.set_item("method", &p.method)?;
        d.set_item("k", p.k)?;
        d.set_item("n_i", p.n_i)?;
        d.set_item("alpha", p.alpha)?;
        d.set_item("traffic_mode", &p.traffic_mode)?;
        d.set_item("mean_utility_bps", p.mean_utility_bps)?;
        d.set_item("ci95", p.ci95)?;
        d.set_item("deployments", p.deployments)?;
        out.append(d)?;
    }
    Ok(out)
}

/// Exhaustive optimum of a tiny association-independent rate table.
/// `rates[ue][bs]` in bps, BS 0 is the uncapacitated macro cell.
#[pyfunction]
#[pyo3(signature = (rates, beam_budget, alpha=0.0, demands=None))]
fn solve_tiny(
    rates: Vec<Vec<f64>>,
    beam_budget: Vec<usize>,
    alpha: f64,
    demands: Option<Vec<f64>>,
) -> PyResult<(Vec<usize>, f64)> {
    let k = rates.len();
    if k == 0 {
        return Err(PyValueError::new_err("empty rate table"));
    }
    let n_bs = rates[0].len();
    if n_bs != beam_budget.len() + 1 {
        return Err(PyValueError::new_err(
            "rate table width must equal 1 + len(beam_budget)",
        ));
    }
    let candidates: Vec<Vec<usize>> = vec![(0..n_bs).collect(); k];
    let active = vec![true; k];
    let demands = demands.unwrap_or_else(|| vec![f64::INFINITY; k]);
    let cons = Constraints {
        candidate_sets: &candidates,
        beam_budget: &beam_budget,
        active: &active,
    };
    let eval = FixedRateEvaluator { table: rates };
    let (assoc, report) = uassoc::utility::exact_oracle(&eval, &demands, alpha, &cons).map_err(err)?;
    let serving = (0..k).map(|ue| assoc.serving_of(ue).unwrap()).collect();
    Ok((serving, report.total))
}

/// Random tiny-instance sandwich check (max_snr <= heuristic <=
/// oracle); returns a result dict.
#[pyfunction]
#[pyo3(signature = (instances=50, seed=0))]
fn oracle_check<'py>(py: Python<'py>, instances: usize, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let report = uassoc::harness::oracle_check(instances, seed).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("instances", report.instances)?;
    d.set_item("sandwich_failures", report.sandwich_failures)?;
    d.set_item("ratio_ge_95", report.ratio_ge_95)?;
    d.set_item("min_ratio", report.min_ratio)?;
    d.set_item("mean_ratio", report.mean_ratio)?;
    d.set_item("pass", report.pass())?;
    Ok(d)
}

/// Finite-difference check of the full training loss gradient.
#[pyfunction]
#[pyo3(signature = (coords=250, tolerance=1e-4, seed=0))]
fn gradcheck<'py>(
    py: Python<'py>,
    coords: usize,
    tolerance: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let report = uassoc::harness::policy_gradcheck(coords, tolerance, seed).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("n_checked", report.n_checked)?;
    d.set_item("max_rel_err", report.max_rel_err)?;
    d.set_item("tolerance", report.tolerance)?;
    d.set_item("pass", report.pass)?;
    Ok(d)
}

/// Action probabilities and state value of a freshly initialized policy
/// on a synthetic observation; mostly a smoke hook proving the
/// attention path is wired through the bindings.
#[pyfunction]
#[pyo3(signature = (neighbors, seed=0, config_toml=None))]
fn policy_probe(
    neighbors: Vec<(f64, f64, f64)>,
    seed: u64,
    config_toml: Option<&str>,
) -> PyResult<(Vec<f64>, f64)> {
    use rand::SeedableRng;
    use uassoc::env::{GlobalObservation, LocalObservation, NeighborInfo, UeObservation};
    let cfg = parse_config(config_toml)?;
    let policy = PolicyNetwork::init(&cfg, &mut ChaCha8Rng::seed_from_u64(seed));
    let n_bs = cfg.network.n_bs();
    let obs = UeObservation {
        local: LocalObservation {
            prev_action: 0,
            prev_rate_bps: 0.0,
            prev_network_utility: 0.0,
            ack: 1,
            rss_w: vec![1e-9; n_bs],
            aoa_rad: vec![0.0; n_bs],
        },
        global: GlobalObservation {
            self_info: NeighborInfo {
                x_m: cfg.network.region.width_m / 2.0,
                y_m: cfg.network.region.height_m / 2.0,
                prev_rate_bps: 0.0,
            },
            neighbors: neighbors
                .into_iter()
                .map(|(x, y, r)| NeighborInfo {
                    x_m: x,
                    y_m: y,
                    prev_rate_bps: r,
                })
                .collect(),
        },
    };
    let out = policy.forward(&obs).map_err(err)?;
    Ok((out.dist.probs, out.value))
}

#[pymodule]
#[pyo3(name = "uassoc")]
fn uassoc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(version, m)?)?;
    m.add_function(wrap_pyfunction!(default_config_toml, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_fair, m)?)?;
    m.add_function(wrap_pyfunction!(shannon_rate, m)?)?;
    m.add_function(wrap_pyfunction!(hysteretic_ppo_loss, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(solve_tiny, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_check, m)?)?;
    m.add_function(wrap_pyfunction!(gradcheck, m)?)?;
    m.add_function(wrap_pyfunction!(policy_probe, m)?)?;
    Ok(())
}
