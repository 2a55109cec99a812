//! Browser bindings: thin JSON façades over the simulator, compiled to
//! WebAssembly for the demo page in `www/`.
//!
//! Every function takes and returns plain JSON strings. Failures come back
//! as `{"error": "..."}` instead of exceptions, so the same functions are
//! testable natively and trivial to consume from JavaScript.

use serde::Deserialize;
use serde_json::json;
use wasm_bindgen::prelude::wasm_bindgen;

use dhaiq::experiment::{
    run_sweep, simulate_seed, verify_claim, AdversaryDistribution, ScenarioConfig,
};
use dhaiq::gf::GfField;

fn err_json(message: impl std::fmt::Display) -> String {
    json!({ "error": message.to_string() }).to_string()
}

/// Browser-facing scenario parameters; everything optional with the library
/// defaults, plus limits that keep a single click affordable in a tab.
#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SimParams {
    nodes: usize,
    side: f64,
    range: f64,
    adversaries: usize,
    distribution: String,
    mu: f64,
    shift: bool,
    act_normal: bool,
    master_seed: u64,
    seed_index: usize,
    runs_per_point: usize,
    z0_list: Vec<usize>,
}

impl Default for SimParams {
    fn default() -> Self {
        let base = ScenarioConfig::default();
        SimParams {
            nodes: base.nodes,
            side: base.side,
            range: base.range,
            adversaries: base.adversaries,
            distribution: "uniform".to_string(),
            mu: base.mu,
            shift: base.shift,
            act_normal: base.act_normal,
            master_seed: base.master_seed,
            seed_index: 0,
            runs_per_point: 5,
            z0_list: vec![5, 15, 25, 35, 45],
        }
    }
}

impl SimParams {
    fn to_config(&self) -> Result<ScenarioConfig, String> {
        if self.nodes > 2000 {
            return Err("at most 2000 nodes in the browser".to_string());
        }
        if self.runs_per_point > 50 {
            return Err("at most 50 runs per point in the browser".to_string());
        }
        if self.z0_list.is_empty() || self.z0_list.len() > 16 {
            return Err("z0_list must hold 1..=16 entries".to_string());
        }
        let mut cfg = ScenarioConfig {
            nodes: self.nodes,
            side: self.side,
            range: self.range,
            adversaries: self.adversaries,
            mu: self.mu,
            shift: self.shift,
            act_normal: self.act_normal,
            master_seed: self.master_seed,
            runs_per_point: self.runs_per_point,
            ..ScenarioConfig::default()
        };
        cfg.distribution = match self.distribution.as_str() {
            "uniform" => AdversaryDistribution::Uniform,
            "gaussian" => AdversaryDistribution::Gaussian,
            other => return Err(format!("unknown distribution `{other}`")),
        };
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

fn parse_params(params_json: &str) -> Result<SimParams, String> {
    serde_json::from_str(params_json).map_err(|e| format!("bad parameters: {e}"))
}

/// Simulates one seeded scenario and returns the full picture for drawing:
/// node positions and roles, radio edges, marked areas, suspects, ratios.
#[wasm_bindgen]
pub fn simulate(params_json: &str) -> String {
    let params = match parse_params(params_json) {
        Ok(p) => p,
        Err(e) => return err_json(e),
    };
    let cfg = match params.to_config() {
        Ok(c) => c,
        Err(e) => return err_json(e),
    };
    let field = match GfField::with_width(cfg.field_width) {
        Ok(f) => f,
        Err(e) => return err_json(e),
    };
    let snap = match simulate_seed(&field, &cfg, params.seed_index) {
        Ok(s) => s,
        Err(e) => return err_json(e),
    };
    let edges: Vec<[usize; 2]> = (0..snap.graph.len())
        .flat_map(|u| {
            snap.graph
                .neighbors(u)
                .iter()
                .filter(move |&&v| u < v)
                .map(move |&v| [u, v])
        })
        .collect();
    json!({
        "side": cfg.side,
        "seed": format!("{:016x}", snap.seed),
        "connected": snap.connected,
        "nodes": snap.nodes.iter().map(|n| json!({
            "id": n.id, "x": n.x, "y": n.y, "adversary": n.is_adversary,
        })).collect::<Vec<_>>(),
        "edges": edges,
        "suspects": snap.final_suspects,
        "marked_areas": snap.runs.iter().enumerate().flat_map(|(run, m)| {
            m.marked_areas.iter().map(move |a| json!({
                "run": run,
                "x": a.rect.x0, "y": a.rect.y0,
                "w": a.rect.width, "h": a.rect.height,
                "level": a.level,
            }))
        }).collect::<Vec<_>>(),
        "innocent_ratio": snap.innocent_ratio,
        "catch_ratio": snap.catch_ratio,
        "transmissions": snap.transmissions(),
        "rounds": snap.rounds(),
        "least_edge": snap.least_edge,
    })
    .to_string()
}

/// Checks the four-quadrant placement analysis over k = 1..=10 and returns
/// the table rows.
#[wasm_bindgen]
pub fn division_report(resolution: f64) -> String {
    if !(0.005..=0.5).contains(&resolution) {
        return err_json("resolution must lie in [0.005, 0.5]");
    }
    let ks: Vec<u32> = (1..=10).collect();
    let report = verify_claim(&ks, resolution);
    json!({
        "all_ok": report.all_ok,
        "rows": report.rows.iter().map(|r| json!({
            "k": r.k,
            "division": r.division,
            "objective": r.objective,
            "multiplier": r.multiplier,
            "curvature": r.curvature,
            "regime": r.regime.name(),
            "ok": r.ok,
        })).collect::<Vec<_>>(),
    })
    .to_string()
}

/// Sweeps the adversary count (optionally both shift settings) and returns
/// mean innocent and catch ratios per point, for curve drawing.
#[wasm_bindgen]
pub fn ratio_sweep(params_json: &str) -> String {
    let params = match parse_params(params_json) {
        Ok(p) => p,
        Err(e) => return err_json(e),
    };
    let cfg = match params.to_config() {
        Ok(c) => c,
        Err(e) => return err_json(e),
    };
    let shifts: &[bool] = if params.shift { &[false, true] } else { &[false] };
    let rows = match run_sweep(&cfg, &[cfg.nodes], &params.z0_list, shifts) {
        Ok(r) => r,
        Err(e) => return err_json(e),
    };
    json!({
        "rows": rows.iter().map(|r| json!({
            "n": r.n,
            "z0": r.z0,
            "shift": r.shift,
            "mean_innocent": r.mean_innocent,
            "sd_innocent": r.sd_innocent,
            "mean_catch": r.mean_catch,
            "sd_catch": r.sd_catch,
        })).collect::<Vec<_>>(),
    })
    .to_string()
}
