//! Repeatable experiment orchestration: scenario configuration, seed
//! derivation, per-seed simulation, aggregation over seed batches, parameter
//! sweeps, and plain-text renderers (CSV, SVG, claim tables).
//!
//! Determinism contract: every simulated quantity is a pure function of the
//! scenario parameters and a master seed. Per-seed streams are derived by
//! hashing `(master, nodes, adversaries, distribution, seed index)`; the
//! shift flag is deliberately left out of the hash so shifted and unshifted
//! scenarios replay identical topologies and first passes, which makes their
//! comparison a paired one.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::analysis::{
    hessian_diagonal, lagrange_multiplier, optimal_division, untouched_fraction,
    untouched_gradient, Division,
};
use crate::gf::{FieldError, GfField};
use crate::protocol::{
    dhaiq_run, least_area_edge, run_with_shift, AdversaryModel, CorruptionMode, ProtocolParams,
    RunMetrics, SuspectTable,
};
use crate::topology::{
    build_graph, place_adversaries, place_nodes, AdversaryPlacement, Graph, NodeRecord,
    TopologyError,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("only {found} of {needed} required connected topologies after {attempts} attempts")]
    NotEnoughConnected { needed: usize, found: usize, attempts: usize },
}

/// How adversaries are placed among the nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdversaryDistribution {
    /// Uniformly random distinct nodes.
    Uniform,
    /// Nodes nearest to draws from a two-dimensional normal.
    Gaussian,
}

impl AdversaryDistribution {
    pub fn name(self) -> &'static str {
        match self {
            AdversaryDistribution::Uniform => "uniform",
            AdversaryDistribution::Gaussian => "gaussian",
        }
    }

    fn tag(self) -> u64 {
        match self {
            AdversaryDistribution::Uniform => 0,
            AdversaryDistribution::Gaussian => 1,
        }
    }
}

/// Full description of one simulated scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub nodes: usize,
    /// Deployment square edge, meters.
    pub side: f64,
    /// Radio range, meters.
    pub range: f64,
    /// Adversary count.
    pub adversaries: usize,
    pub distribution: AdversaryDistribution,
    /// Spread of the gaussian placement; defaults to `side / 8`.
    pub gaussian_sigma: Option<f64>,
    /// Center of the gaussian placement; defaults to the area center.
    pub gaussian_mean: Option<(f64, f64)>,
    /// Population threshold below which an area is marked instead of probed.
    pub mu: f64,
    /// Run the marking pass twice on half-edge-shifted grids and keep the
    /// agreement.
    pub shift: bool,
    /// Agreement threshold for the shifted pair (1 = union, 2 = both).
    pub suspect_threshold: u32,
    /// Independent seeds aggregated per parameter point.
    pub runs_per_point: usize,
    /// Symbol width of the coding field, bits.
    pub field_width: u32,
    /// Probe payload symbols.
    pub payload_len: usize,
    pub master_seed: u64,
    pub corruption: CorruptionMode,
    /// Adversaries behave honestly whenever they serve as watchdogs.
    pub act_normal: bool,
    /// Skip topologies whose connectivity graph is not connected.
    pub require_connected: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            nodes: 400,
            side: 800.0,
            range: 50.0,
            adversaries: 25,
            distribution: AdversaryDistribution::Uniform,
            gaussian_sigma: None,
            gaussian_mean: None,
            mu: 5.0,
            shift: false,
            suspect_threshold: 2,
            runs_per_point: 30,
            field_width: 8,
            payload_len: 16,
            master_seed: 2024,
            corruption: CorruptionMode::Payload,
            act_normal: false,
            require_connected: false,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let fail = |msg: String| Err(ExperimentError::InvalidConfig(msg));
        if self.nodes == 0 {
            return fail("nodes must be positive".into());
        }
        if !(self.side > 0.0 && self.side.is_finite()) {
            return fail(format!("side {} must be positive and finite", self.side));
        }
        if !(self.range > 0.0 && self.range.is_finite()) {
            return fail(format!("range {} must be positive and finite", self.range));
        }
        if self.adversaries > self.nodes {
            return fail(format!(
                "adversaries {} exceed nodes {}",
                self.adversaries, self.nodes
            ));
        }
        if !(self.mu >= 1.0 && self.mu.is_finite()) {
            return fail(format!("mu {} must be at least 1", self.mu));
        }
        if self.shift && !(1..=2).contains(&self.suspect_threshold) {
            return fail(format!(
                "suspect_threshold {} must be 1 or 2 for a two-pass scheme",
                self.suspect_threshold
            ));
        }
        if self.runs_per_point == 0 {
            return fail("runs_per_point must be positive".into());
        }
        if !(2..=16).contains(&self.field_width) {
            return fail(format!("field_width {} outside 2..=16", self.field_width));
        }
        if self.payload_len == 0 {
            return fail("payload_len must be positive".into());
        }
        if let Some(sigma) = self.gaussian_sigma {
            if !(sigma > 0.0 && sigma.is_finite()) {
                return fail(format!("gaussian_sigma {sigma} must be positive and finite"));
            }
        }
        if let Some((x, y)) = self.gaussian_mean {
            if !(x.is_finite() && y.is_finite()) {
                return fail(format!("gaussian_mean ({x}, {y}) must be finite"));
            }
        }
        Ok(())
    }

    /// Mean and spread of the gaussian placement with defaults resolved.
    pub fn resolved_gaussian(&self) -> ((f64, f64), f64) {
        let mean = self.gaussian_mean.unwrap_or((self.side / 2.0, self.side / 2.0));
        let sigma = self.gaussian_sigma.unwrap_or(self.side / 8.0);
        (mean, sigma)
    }

    fn placement(&self) -> AdversaryPlacement {
        match self.distribution {
            AdversaryDistribution::Uniform => AdversaryPlacement::Uniform,
            AdversaryDistribution::Gaussian => {
                let (mean, sigma) = self.resolved_gaussian();
                AdversaryPlacement::Gaussian { mean, sigma }
            }
        }
    }

    fn protocol_params(&self) -> ProtocolParams {
        ProtocolParams {
            mu: self.mu,
            payload_len: self.payload_len,
            model: AdversaryModel {
                mode: self.corruption,
                act_normal_as_watchdog: self.act_normal,
            },
        }
    }

    /// Applies one `key=value` override. Accepted keys: `nodes`, `side`,
    /// `range`, `adversaries`, `distribution` (`uniform`/`gaussian`),
    /// `gaussian_sigma`, `gaussian_mean_x`, `gaussian_mean_y`, `mu`, `shift`,
    /// `suspect_threshold`, `runs_per_point`, `field_width`, `payload_len`,
    /// `master_seed`, `corruption` (`payload`/`coefficients`/`both`),
    /// `act_normal`, `require_connected`.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<(), ExperimentError> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ExperimentError>
        where
            T::Err: std::fmt::Display,
        {
            value.trim().parse().map_err(|e: T::Err| ExperimentError::BadValue {
                key: key.to_string(),
                value: value.to_string(),
                reason: e.to_string(),
            })
        }
        match key.trim() {
            "nodes" => self.nodes = parse(key, value)?,
            "side" => self.side = parse(key, value)?,
            "range" => self.range = parse(key, value)?,
            "adversaries" => self.adversaries = parse(key, value)?,
            "distribution" => {
                self.distribution = match value.trim().to_ascii_lowercase().as_str() {
                    "uniform" => AdversaryDistribution::Uniform,
                    "gaussian" => AdversaryDistribution::Gaussian,
                    _ => {
                        return Err(ExperimentError::BadValue {
                            key: key.into(),
                            value: value.into(),
                            reason: "expected `uniform` or `gaussian`".into(),
                        })
                    }
                }
            }
            "gaussian_sigma" => self.gaussian_sigma = Some(parse(key, value)?),
            "gaussian_mean_x" => {
                let x = parse(key, value)?;
                let y = self.gaussian_mean.map(|m| m.1).unwrap_or(self.side / 2.0);
                self.gaussian_mean = Some((x, y));
            }
            "gaussian_mean_y" => {
                let y = parse(key, value)?;
                let x = self.gaussian_mean.map(|m| m.0).unwrap_or(self.side / 2.0);
                self.gaussian_mean = Some((x, y));
            }
            "mu" => self.mu = parse(key, value)?,
            "shift" => self.shift = parse(key, value)?,
            "suspect_threshold" => self.suspect_threshold = parse(key, value)?,
            "runs_per_point" => self.runs_per_point = parse(key, value)?,
            "field_width" => self.field_width = parse(key, value)?,
            "payload_len" => self.payload_len = parse(key, value)?,
            "master_seed" => self.master_seed = parse(key, value)?,
            "corruption" => {
                self.corruption = match value.trim().to_ascii_lowercase().as_str() {
                    "payload" => CorruptionMode::Payload,
                    "coefficients" => CorruptionMode::Coefficients,
                    "both" => CorruptionMode::Both,
                    _ => {
                        return Err(ExperimentError::BadValue {
                            key: key.into(),
                            value: value.into(),
                            reason: "expected `payload`, `coefficients`, or `both`".into(),
                        })
                    }
                }
            }
            "act_normal" => self.act_normal = parse(key, value)?,
            "require_connected" => self.require_connected = parse(key, value)?,
            other => return Err(ExperimentError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Applies a `key=value` file: one pair per line, `#` starts a comment,
    /// blank lines are skipped.
    pub fn apply_config_text(&mut self, text: &str) -> Result<(), ExperimentError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ExperimentError::InvalidConfig(format!(
                    "line {}: `{}` is not a key=value pair",
                    lineno + 1,
                    raw.trim()
                )));
            };
            self.apply_kv(key, value)?;
        }
        Ok(())
    }
}

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the stream seed for one `(scenario, seed index)` point. The shift
/// flag is not an input: see the module documentation.
pub fn derive_seed(
    master: u64,
    nodes: usize,
    adversaries: usize,
    distribution: AdversaryDistribution,
    seed_index: usize,
) -> u64 {
    let mut state = master;
    for word in [
        nodes as u64,
        adversaries as u64,
        distribution.tag(),
        seed_index as u64,
    ] {
        state = mix64(state ^ mix64(word));
    }
    state
}

/// Everything produced by one seeded simulation, including the topology, for
/// rendering and inspection.
#[derive(Clone, Debug)]
pub struct SimulationSnapshot {
    pub seed_index: usize,
    pub seed: u64,
    pub connected: bool,
    pub nodes: Vec<NodeRecord>,
    pub graph: Graph,
    /// One pass, or two when the scenario shifts.
    pub runs: Vec<RunMetrics>,
    /// Suspects after thresholding (the single pass's marked set when not
    /// shifting), ascending.
    pub final_suspects: Vec<usize>,
    pub innocent_ratio: f64,
    pub catch_ratio: f64,
    pub least_edge: f64,
}

impl SimulationSnapshot {
    pub fn transmissions(&self) -> u64 {
        self.runs.iter().map(|r| r.probe_transmissions).sum()
    }

    pub fn rounds(&self) -> u64 {
        self.runs.iter().map(|r| r.rounds_elapsed).sum()
    }
}

fn seeded_topology(
    cfg: &ScenarioConfig,
    seed_index: usize,
) -> Result<(u64, ChaCha8Rng, Vec<NodeRecord>, Graph), ExperimentError> {
    let seed = derive_seed(
        cfg.master_seed,
        cfg.nodes,
        cfg.adversaries,
        cfg.distribution,
        seed_index,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = place_nodes(cfg.nodes, cfg.side, &mut rng);
    place_adversaries(&mut nodes, cfg.adversaries, &cfg.placement(), &mut rng)?;
    let graph = build_graph(&nodes, cfg.range);
    Ok((seed, rng, nodes, graph))
}

/// Draws the seeded topology of one `(scenario, seed index)` point without
/// simulating the protocol on it.
pub fn topology_only(
    cfg: &ScenarioConfig,
    seed_index: usize,
) -> Result<(u64, Vec<NodeRecord>, Graph), ExperimentError> {
    let (seed, _, nodes, graph) = seeded_topology(cfg, seed_index)?;
    Ok((seed, nodes, graph))
}

/// Runs one seeded simulation of the scenario. The caller provides the
/// coding field (it is scenario-independent) so batches build it once.
pub fn simulate_seed(
    field: &GfField,
    cfg: &ScenarioConfig,
    seed_index: usize,
) -> Result<SimulationSnapshot, ExperimentError> {
    debug_assert_eq!(field.width(), cfg.field_width);
    let (seed, mut rng, nodes, graph) = seeded_topology(cfg, seed_index)?;
    let connected = graph.is_connected();
    let params = cfg.protocol_params();

    let (runs, final_suspects, innocent_ratio, catch_ratio) = if cfg.shift {
        let outcome = run_with_shift(
            field,
            &nodes,
            &graph,
            cfg.side,
            &params,
            cfg.suspect_threshold,
            &mut rng,
        );
        (
            outcome.runs,
            outcome.final_suspects,
            outcome.innocent_ratio,
            outcome.catch_ratio,
        )
    } else {
        let mut suspects = SuspectTable::new(nodes.len());
        let metrics = dhaiq_run(
            field,
            &nodes,
            &graph,
            cfg.side,
            &params,
            (0.0, 0.0),
            0,
            &mut suspects,
            &mut rng,
        );
        let marked = metrics.marked.clone();
        let (innocent, catch) = (metrics.innocent_ratio, metrics.catch_ratio);
        (vec![metrics], marked, innocent, catch)
    };

    Ok(SimulationSnapshot {
        seed_index,
        seed,
        connected,
        least_edge: least_area_edge(cfg.side, cfg.nodes, cfg.mu),
        nodes,
        graph,
        runs,
        final_suspects,
        innocent_ratio,
        catch_ratio,
    })
}

/// Per-seed summary kept by scenario batches.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedOutcome {
    pub seed_index: usize,
    pub seed: u64,
    pub connected: bool,
    pub suspects: usize,
    pub innocent_ratio: f64,
    pub catch_ratio: f64,
    pub transmissions: u64,
    pub rounds: u64,
}

impl SeedOutcome {
    pub fn from_snapshot(snap: &SimulationSnapshot) -> SeedOutcome {
        SeedOutcome {
            seed_index: snap.seed_index,
            seed: snap.seed,
            connected: snap.connected,
            suspects: snap.final_suspects.len(),
            innocent_ratio: snap.innocent_ratio,
            catch_ratio: snap.catch_ratio,
            transmissions: snap.transmissions(),
            rounds: snap.rounds(),
        }
    }
}

/// One aggregated sweep point.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub n: usize,
    pub z0: usize,
    pub dist: AdversaryDistribution,
    pub shift: bool,
    pub mean_innocent: f64,
    pub sd_innocent: f64,
    pub mean_catch: f64,
    pub sd_catch: f64,
    pub mean_tx: f64,
    pub mean_rounds: f64,
    pub seeds: usize,
}

/// A scenario batch: per-seed outcomes plus their aggregate.
#[derive(Clone, Debug)]
pub struct ScenarioResult {
    pub outcomes: Vec<SeedOutcome>,
    pub row: AggregateRow,
    /// Topologies discarded by the connectivity requirement.
    pub skipped_disconnected: usize,
}

/// Mean and sample standard deviation (zero for fewer than two values).
pub fn mean_and_sample_sd(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    (mean, (ss / (xs.len() - 1) as f64).sqrt())
}

/// Simulates `runs_per_point` seeds of the scenario and aggregates them.
/// With `require_connected`, disconnected draws are discarded and further
/// seed indices are consumed, up to twenty times the requested count.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioResult, ExperimentError> {
    cfg.validate()?;
    let field = GfField::with_width(cfg.field_width)?;
    let max_attempts = cfg.runs_per_point.saturating_mul(20).max(200);
    let mut outcomes = Vec::with_capacity(cfg.runs_per_point);
    let mut skipped = 0;
    let mut attempts = 0;
    while outcomes.len() < cfg.runs_per_point && attempts < max_attempts {
        let snap = simulate_seed(&field, cfg, attempts)?;
        attempts += 1;
        if cfg.require_connected && !snap.connected {
            skipped += 1;
            continue;
        }
        outcomes.push(SeedOutcome::from_snapshot(&snap));
    }
    if outcomes.len() < cfg.runs_per_point {
        return Err(ExperimentError::NotEnoughConnected {
            needed: cfg.runs_per_point,
            found: outcomes.len(),
            attempts,
        });
    }

    let collect = |f: fn(&SeedOutcome) -> f64| -> Vec<f64> { outcomes.iter().map(f).collect() };
    let (mean_innocent, sd_innocent) = mean_and_sample_sd(&collect(|o| o.innocent_ratio));
    let (mean_catch, sd_catch) = mean_and_sample_sd(&collect(|o| o.catch_ratio));
    let (mean_tx, _) = mean_and_sample_sd(&collect(|o| o.transmissions as f64));
    let (mean_rounds, _) = mean_and_sample_sd(&collect(|o| o.rounds as f64));
    let row = AggregateRow {
        n: cfg.nodes,
        z0: cfg.adversaries,
        dist: cfg.distribution,
        shift: cfg.shift,
        mean_innocent,
        sd_innocent,
        mean_catch,
        sd_catch,
        mean_tx,
        mean_rounds,
        seeds: outcomes.len(),
    };
    Ok(ScenarioResult { outcomes, row, skipped_disconnected: skipped })
}

/// Runs the scenario grid `n_list` x `z0_list` x `shifts` on top of the base
/// configuration, in that loop order.
pub fn run_sweep(
    base: &ScenarioConfig,
    n_list: &[usize],
    z0_list: &[usize],
    shifts: &[bool],
) -> Result<Vec<AggregateRow>, ExperimentError> {
    let mut rows = Vec::new();
    for &n in n_list {
        for &z0 in z0_list {
            for &shift in shifts {
                let mut cfg = base.clone();
                cfg.nodes = n;
                cfg.adversaries = z0;
                cfg.shift = shift;
                rows.push(run_scenario(&cfg)?.row);
            }
        }
    }
    Ok(rows)
}

/// Formats with six significant digits, scale-free: `0.123457`, `123.457`,
/// `1234567`. Exact zero is `0`.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Renders aggregate rows as CSV, stable field order and formatting.
pub fn render_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from(
        "n,z0,dist,shift,mean_innocent,sd_innocent,mean_catch,sd_catch,mean_tx,mean_rounds,seeds\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.n,
            r.z0,
            r.dist.name(),
            if r.shift { "on" } else { "off" },
            fmt_sig(r.mean_innocent),
            fmt_sig(r.sd_innocent),
            fmt_sig(r.mean_catch),
            fmt_sig(r.sd_catch),
            fmt_sig(r.mean_tx),
            fmt_sig(r.mean_rounds),
            r.seeds,
        ));
    }
    out
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Renders innocent and catch ratios against the adversary count as a
/// self-contained SVG: one solid polyline (innocent) and one dashed polyline
/// (catch) per `(n, dist, shift)` group.
pub fn render_plot_svg(rows: &[AggregateRow]) -> String {
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (60.0, 20.0, 20.0, 50.0);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {w} {h}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    );
    if rows.is_empty() {
        svg.push_str("<text x=\"320\" y=\"200\" text-anchor=\"middle\">no data</text>\n</svg>\n");
        return svg;
    }

    let z_min = rows.iter().map(|r| r.z0).min().unwrap() as f64;
    let z_max = rows.iter().map(|r| r.z0).max().unwrap() as f64;
    let span = (z_max - z_min).max(1e-9);
    let x = |z0: f64| left + (z0 - z_min) / span * (w - left - right);
    let y = |v: f64| h - bottom - v.clamp(0.0, 1.0) * (h - top - bottom);

    // Axes and gridlines.
    for i in 0..=4 {
        let v = i as f64 * 0.25;
        let yy = y(v);
        svg.push_str(&format!(
            "<line x1=\"{left}\" y1=\"{yy}\" x2=\"{}\" y2=\"{yy}\" stroke=\"#ddd\"/>\n\
             <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{v}</text>\n",
            w - right,
            left - 6.0,
            yy + 4.0
        ));
    }
    let mut z_values: Vec<usize> = rows.iter().map(|r| r.z0).collect();
    z_values.sort_unstable();
    z_values.dedup();
    for &z0 in &z_values {
        let xx = x(z0 as f64);
        svg.push_str(&format!(
            "<line x1=\"{xx}\" y1=\"{}\" x2=\"{xx}\" y2=\"{}\" stroke=\"#eee\"/>\n\
             <text x=\"{xx}\" y=\"{}\" text-anchor=\"middle\">{z0}</text>\n",
            top,
            h - bottom,
            h - bottom + 16.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">adversaries</text>\n\
         <text x=\"14\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">ratio</text>\n",
        (left + w - right) / 2.0,
        h - 14.0,
        (top + h - bottom) / 2.0,
        (top + h - bottom) / 2.0
    ));

    // Series, grouped by (n, dist, shift) in stable order.
    let mut groups: Vec<(usize, AdversaryDistribution, bool)> =
        rows.iter().map(|r| (r.n, r.dist, r.shift)).collect();
    groups.sort_by_key(|&(n, d, s)| (n, d.tag(), s));
    groups.dedup();
    for (gi, &(n, dist, shift)) in groups.iter().enumerate() {
        let color = PALETTE[gi % PALETTE.len()];
        let mut members: Vec<&AggregateRow> = rows
            .iter()
            .filter(|r| (r.n, r.dist, r.shift) == (n, dist, shift))
            .collect();
        members.sort_by_key(|r| r.z0);
        let path = |pick: fn(&AggregateRow) -> f64| {
            members
                .iter()
                .map(|r| format!("{:.2},{:.2}", x(r.z0 as f64), y(pick(r))))
                .collect::<Vec<_>>()
                .join(" ")
        };
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n\
             <polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" \
             stroke-dasharray=\"6 3\"/>\n",
            path(|r| r.mean_innocent),
            path(|r| r.mean_catch),
        ));
        let label = format!(
            "n={n} {}{}",
            dist.name(),
            if shift { " shifted" } else { "" }
        );
        let ly = top + 16.0 * gi as f64 + 12.0;
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\n\
             <text x=\"{}\" y=\"{}\">{label} (solid innocent, dashed catch)</text>\n",
            w - right - 250.0,
            w - right - 230.0,
            w - right - 224.0,
            ly + 4.0
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Where the even spread stands for a given adversary count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    /// Fewer than seven adversaries: the even spread maximizes the untouched
    /// fraction.
    EvenOptimal,
    /// Exactly seven: the curvature term vanishes.
    Boundary,
    /// Eight or more: the even spread is no longer a maximum.
    Spread,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::EvenOptimal => "even-optimal",
            Regime::Boundary => "boundary",
            Regime::Spread => "spread",
        }
    }
}

/// One adversary count checked against the closed-form placement analysis.
#[derive(Clone, Debug)]
pub struct ClaimRow {
    pub k: u32,
    pub division: [f64; 4],
    pub objective: f64,
    pub multiplier: f64,
    pub curvature: f64,
    pub regime: Regime,
    pub ok: bool,
}

#[derive(Clone, Debug)]
pub struct ClaimReport {
    pub rows: Vec<ClaimRow>,
    pub all_ok: bool,
}

/// Checks, for each adversary count, that the numerically found optimal
/// division agrees with the closed-form analysis: even spread optimal below
/// seven (stationarity holds and curvature is negative), curvature zero at
/// seven, and a strictly better uneven spread past seven.
pub fn verify_claim(k_list: &[u32], resolution: f64) -> ClaimReport {
    let even = Division::equal();
    let rows: Vec<ClaimRow> = k_list
        .iter()
        .map(|&k| {
            let opt = optimal_division(k, resolution);
            let objective = untouched_fraction(&opt, k);
            let multiplier = lagrange_multiplier(k);
            let curvature = hessian_diagonal(k);
            let stationary = (untouched_gradient(0.25, k) + multiplier).abs() < 1e-9;
            let (regime, ok) = if k < 7 {
                let at_even = opt
                    .fractions()
                    .iter()
                    .all(|a| (a - 0.25).abs() < 1e-6);
                (Regime::EvenOptimal, at_even && stationary && curvature < 0.0)
            } else if k == 7 {
                (Regime::Boundary, stationary && curvature == 0.0)
            } else {
                let gain = objective - untouched_fraction(&even, k);
                (Regime::Spread, stationary && curvature > 0.0 && gain > 1e-9)
            };
            ClaimRow { k, division: opt.fractions(), objective, multiplier, curvature, regime, ok }
        })
        .collect();
    let all_ok = rows.iter().all(|r| r.ok);
    ClaimReport { rows, all_ok }
}

/// Renders a claim report as an aligned text table with a verdict line.
pub fn render_claim_table(report: &ClaimReport) -> String {
    let mut out = String::from(
        " k  a1       a2       a3       a4       objective  multiplier  curvature  regime        check\n",
    );
    for r in &report.rows {
        out.push_str(&format!(
            "{:2}  {:.6} {:.6} {:.6} {:.6}  {:+.6}  {:+.6}   {:+.6}  {:<12.12}  {}\n",
            r.k,
            r.division[0],
            r.division[1],
            r.division[2],
            r.division[3],
            r.objective,
            r.multiplier,
            r.curvature,
            r.regime.name(),
            if r.ok { "ok" } else { "FAIL" },
        ));
    }
    out.push_str(if report.all_ok {
        "all checks passed\n"
    } else {
        "CHECKS FAILED\n"
    });
    out
}

/// Breadth-first distances from a node over the connectivity graph
/// (`usize::MAX` for unreachable nodes). Shared by analyses that relate
/// catch rates to watchdog proximity.
pub fn bfs_distances(graph: &Graph, from: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; graph.len()];
    dist[from] = 0;
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        for &v in graph.neighbors(u) {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> ScenarioConfig {
        ScenarioConfig {
            nodes: 60,
            side: 200.0,
            range: 70.0,
            adversaries: 3,
            runs_per_point: 4,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn seed_derivation_is_deterministic_and_separates_coordinates() {
        let base = derive_seed(2024, 400, 25, AdversaryDistribution::Uniform, 0);
        assert_eq!(base, derive_seed(2024, 400, 25, AdversaryDistribution::Uniform, 0));
        let variants = [
            derive_seed(2025, 400, 25, AdversaryDistribution::Uniform, 0),
            derive_seed(2024, 401, 25, AdversaryDistribution::Uniform, 0),
            derive_seed(2024, 400, 26, AdversaryDistribution::Uniform, 0),
            derive_seed(2024, 400, 25, AdversaryDistribution::Gaussian, 0),
            derive_seed(2024, 400, 25, AdversaryDistribution::Uniform, 1),
        ];
        for (i, v) in variants.iter().enumerate() {
            assert_ne!(base, *v, "variant {i} collided");
        }
        let mut sequence: Vec<u64> = (0..100)
            .map(|idx| derive_seed(2024, 400, 25, AdversaryDistribution::Uniform, idx))
            .collect();
        sequence.sort_unstable();
        sequence.dedup();
        assert_eq!(sequence.len(), 100);
    }

    #[test]
    fn config_overrides_parse_and_reject() {
        let mut cfg = ScenarioConfig::default();
        cfg.apply_config_text(
            "# comment line\n\
             nodes = 100\n\
             side=400  # trailing comment\n\
             distribution=gaussian\n\
             gaussian_mean_x=120.5\n\
             shift=true\n\
             corruption=both\n",
        )
        .unwrap();
        assert_eq!(cfg.nodes, 100);
        assert_eq!(cfg.side, 400.0);
        assert_eq!(cfg.distribution, AdversaryDistribution::Gaussian);
        assert_eq!(cfg.gaussian_mean, Some((120.5, 200.0)));
        assert!(cfg.shift);
        assert_eq!(cfg.corruption, CorruptionMode::Both);

        let mut cfg = ScenarioConfig::default();
        assert!(matches!(
            cfg.apply_kv("no_such_key", "1"),
            Err(ExperimentError::UnknownKey(_))
        ));
        assert!(matches!(
            cfg.apply_kv("nodes", "many"),
            Err(ExperimentError::BadValue { .. })
        ));
        assert!(matches!(
            cfg.apply_kv("distribution", "clustered"),
            Err(ExperimentError::BadValue { .. })
        ));
        assert!(matches!(
            cfg.apply_config_text("nodes 100\n"),
            Err(ExperimentError::InvalidConfig(_))
        ));
    }

    #[test]
    fn validation_rejects_inconsistent_scenarios() {
        let reject = |mutate: fn(&mut ScenarioConfig)| {
            let mut cfg = ScenarioConfig::default();
            mutate(&mut cfg);
            assert!(cfg.validate().is_err(), "accepted: {cfg:?}");
        };
        assert!(ScenarioConfig::default().validate().is_ok());
        reject(|c| c.nodes = 0);
        reject(|c| c.side = -1.0);
        reject(|c| c.range = 0.0);
        reject(|c| c.adversaries = c.nodes + 1);
        reject(|c| c.mu = 0.5);
        reject(|c| {
            c.shift = true;
            c.suspect_threshold = 3;
        });
        reject(|c| c.runs_per_point = 0);
        reject(|c| c.field_width = 17);
        reject(|c| c.payload_len = 0);
        reject(|c| c.gaussian_sigma = Some(0.0));
        reject(|c| c.gaussian_mean = Some((f64::NAN, 0.0)));
    }

    #[test]
    fn seeded_simulation_replays_exactly() {
        let cfg = small_cfg();
        let field = GfField::with_width(cfg.field_width).unwrap();
        let a = simulate_seed(&field, &cfg, 2).unwrap();
        let b = simulate_seed(&field, &cfg, 2).unwrap();
        assert_eq!(a.seed, b.seed);
        assert_eq!(a.nodes, b.nodes);
        assert_eq!(a.final_suspects, b.final_suspects);
        assert_eq!(a.runs, b.runs);
        assert_eq!(a.transmissions(), b.transmissions());
    }

    #[test]
    fn shifted_and_unshifted_scenarios_share_topology() {
        let plain = small_cfg();
        let mut shifted = small_cfg();
        shifted.shift = true;
        let field = GfField::with_width(plain.field_width).unwrap();
        let a = simulate_seed(&field, &plain, 0).unwrap();
        let b = simulate_seed(&field, &shifted, 0).unwrap();
        assert_eq!(a.seed, b.seed);
        assert_eq!(a.nodes, b.nodes, "topology must be shared for pairing");
        assert_eq!(a.runs[0], b.runs[0], "first pass must replay identically");
        assert_eq!(b.runs.len(), 2);
    }

    #[test]
    fn scenario_batch_aggregates() {
        let cfg = small_cfg();
        let result = run_scenario(&cfg).unwrap();
        assert_eq!(result.outcomes.len(), 4);
        assert_eq!(result.row.seeds, 4);
        assert_eq!(result.row.n, 60);
        assert_eq!(result.row.z0, 3);
        assert!(result.row.mean_tx > 0.0);
        assert!(result.row.mean_rounds > 0.0);
        assert!((0.0..=1.0).contains(&result.row.mean_innocent));
        assert!((0.0..=1.0).contains(&result.row.mean_catch));
        for o in &result.outcomes {
            assert!(o.transmissions > 0);
        }
        // Distinct seeds were used.
        assert_ne!(result.outcomes[0].seed, result.outcomes[1].seed);
    }

    #[test]
    fn connectivity_requirement_filters_or_fails() {
        // Generous radio range: everything connects, nothing is skipped.
        let mut cfg = small_cfg();
        cfg.range = 150.0;
        cfg.require_connected = true;
        cfg.runs_per_point = 3;
        let result = run_scenario(&cfg).unwrap();
        assert_eq!(result.skipped_disconnected, 0);
        assert!(result.outcomes.iter().all(|o| o.connected));

        // Hopeless radio range: the attempt budget runs out.
        let mut cfg = small_cfg();
        cfg.nodes = 40;
        cfg.range = 12.0;
        cfg.require_connected = true;
        cfg.runs_per_point = 2;
        match run_scenario(&cfg) {
            Err(ExperimentError::NotEnoughConnected { needed, attempts, .. }) => {
                assert_eq!(needed, 2);
                assert_eq!(attempts, 200);
            }
            other => panic!("expected a connectivity failure, got {other:?}"),
        }
    }

    #[test]
    fn statistics_and_formatting() {
        let (m, s) = mean_and_sample_sd(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(mean_and_sample_sd(&[7.0]), (7.0, 0.0));
        assert_eq!(mean_and_sample_sd(&[]), (0.0, 0.0));

        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(0.123456789), "0.123457");
        assert_eq!(fmt_sig(123.456789), "123.457");
        assert_eq!(fmt_sig(1.0), "1.00000");
        assert_eq!(fmt_sig(-0.5), "-0.500000");
        assert_eq!(fmt_sig(1234567.0), "1234567");
        assert_eq!(fmt_sig(0.25), "0.250000");
    }

    #[test]
    fn csv_rendering_is_exact() {
        let row = AggregateRow {
            n: 400,
            z0: 25,
            dist: AdversaryDistribution::Uniform,
            shift: false,
            mean_innocent: 0.1234567,
            sd_innocent: 0.01,
            mean_catch: 1.0,
            sd_catch: 0.0,
            mean_tx: 25000.5,
            mean_rounds: 123.25,
            seeds: 30,
        };
        assert_eq!(
            render_csv(&[row]),
            "n,z0,dist,shift,mean_innocent,sd_innocent,mean_catch,sd_catch,mean_tx,mean_rounds,seeds\n\
             400,25,uniform,off,0.123457,0.0100000,1.00000,0,25000.5,123.250,30\n"
        );
    }

    #[test]
    fn csv_is_reproducible_across_batches() {
        let cfg = small_cfg();
        let a = render_csv(&[run_scenario(&cfg).unwrap().row]);
        let b = render_csv(&[run_scenario(&cfg).unwrap().row]);
        assert_eq!(a, b);
        assert!(a.starts_with("n,z0,dist,shift,"));
    }

    #[test]
    fn sweep_covers_the_grid_in_order() {
        let mut base = small_cfg();
        base.runs_per_point = 2;
        let rows = run_sweep(&base, &[40, 60], &[2, 4], &[false, true]).unwrap();
        assert_eq!(rows.len(), 8);
        let key: Vec<(usize, usize, bool)> =
            rows.iter().map(|r| (r.n, r.z0, r.shift)).collect();
        assert_eq!(
            key,
            vec![
                (40, 2, false),
                (40, 2, true),
                (40, 4, false),
                (40, 4, true),
                (60, 2, false),
                (60, 2, true),
                (60, 4, false),
                (60, 4, true),
            ]
        );
    }

    #[test]
    fn claim_verification_covers_all_regimes() {
        let report = verify_claim(&[1, 2, 3, 4, 5, 6, 7, 8, 9, 10], 0.02);
        assert!(report.all_ok);
        for row in &report.rows {
            let expect = match row.k {
                k if k < 7 => Regime::EvenOptimal,
                7 => Regime::Boundary,
                _ => Regime::Spread,
            };
            assert_eq!(row.regime, expect, "k = {}", row.k);
        }
        let table = render_claim_table(&report);
        assert!(table.contains("even-optimal"));
        assert!(table.contains("boundary"));
        assert!(table.contains("spread"));
        assert!(table.ends_with("all checks passed\n"));
        assert_eq!(table.lines().count(), 12);
    }

    #[test]
    fn plot_rendering_produces_svg() {
        let mut base = small_cfg();
        base.runs_per_point = 2;
        let rows = run_sweep(&base, &[60], &[2, 4, 6], &[false]).unwrap();
        let svg = render_plot_svg(&rows);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("n=60 uniform"));
        let empty = render_plot_svg(&[]);
        assert!(empty.contains("no data"));
    }

    #[test]
    fn graph_distances_via_breadth_first_search() {
        use crate::topology::Graph;
        // Path 0-1-2-3 plus isolated 4.
        let graph = Graph::from_adjacency(vec![vec![1], vec![0, 2], vec![1, 3], vec![2], vec![]]);
        assert_eq!(bfs_distances(&graph, 0), vec![0, 1, 2, 3, usize::MAX]);
        assert_eq!(bfs_distances(&graph, 2), vec![2, 1, 0, 1, usize::MAX]);
    }
}
