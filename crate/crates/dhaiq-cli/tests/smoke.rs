//! End-to-end checks of the installed binary: every subcommand runs, output
//! formats hold, and repeated invocations are byte-identical.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dhaiq"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}, stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn temp_path(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("dhaiq-smoke-{}-{name}", std::process::id()))
}

const SMALL: &[&str] = &[
    "--nodes", "60", "--side", "200", "--range", "70", "--adversaries", "3", "--runs", "3",
];

#[test]
fn run_prints_seed_rows_and_aggregate_csv() {
    let out = stdout(&run(&[&["run"], SMALL].concat()));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "seed_index seed connected suspects innocent catch tx rounds");
    assert!(lines
        .iter()
        .any(|l| l.starts_with("n,z0,dist,shift,mean_innocent,sd_innocent,mean_catch")));
    // Header + three seed rows + CSV header + one aggregate row.
    assert_eq!(lines.len(), 6);
    assert!(lines[5].starts_with("60,3,uniform,off,"));
}

#[test]
fn identical_invocations_write_identical_csv() {
    let a = temp_path("a.csv");
    let b = temp_path("b.csv");
    for path in [&a, &b] {
        let out = run(&[
            &["run"],
            SMALL,
            &["--seed", "77", "--out", path.to_str().unwrap()],
        ]
        .concat());
        assert!(out.status.success());
    }
    let left = fs::read(&a).unwrap();
    let right = fs::read(&b).unwrap();
    assert!(!left.is_empty());
    assert_eq!(left, right, "same config and seed must reproduce the CSV byte for byte");
    let _ = fs::remove_file(a);
    let _ = fs::remove_file(b);
}

#[test]
fn config_file_and_overrides_compose() {
    let cfg = temp_path("scenario.cfg");
    fs::write(
        &cfg,
        "# small deployment\nnodes = 60\nside = 200\nrange = 70\nadversaries = 3\nruns_per_point = 2\n",
    )
    .unwrap();
    let out = stdout(&run(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "corruption=both",
        "--adversaries",
        "4",
    ]));
    assert!(out.contains("\n60,4,uniform,off,"), "named flag overrides the file: {out}");
    let _ = fs::remove_file(cfg);

    let bad = run(&["run", "--set", "nodes=many"]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("bad value"));
}

#[test]
fn sweep_covers_grid_and_renders_plot() {
    let plot = temp_path("plot.svg");
    let out = stdout(&run(&[
        &["sweep"],
        SMALL,
        &[
            "--n-list",
            "40,60",
            "--z0-list",
            "2,4",
            "--shift",
            "both",
            "--plot",
            plot.to_str().unwrap(),
        ],
    ]
    .concat()));
    // Header plus 2 x 2 x 2 grid rows.
    assert_eq!(out.lines().count(), 9);
    assert!(out.contains("\n40,2,uniform,off,"));
    assert!(out.contains("\n60,4,uniform,on,"));
    let svg = fs::read_to_string(&plot).unwrap();
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("</svg>"));
    let _ = fs::remove_file(plot);
}

#[test]
fn verify_claim_passes_and_prints_table() {
    let out = stdout(&run(&["verify-claim", "--k-list", "1,6,7,8", "--resolution", "0.02"]));
    assert!(out.contains("even-optimal"));
    assert!(out.contains("boundary"));
    assert!(out.contains("spread"));
    assert!(out.trim_end().ends_with("all checks passed"));
}

#[test]
fn bound_prints_the_closed_form() {
    let out = stdout(&run(&["bound", "--mu", "5", "--z0", "25", "--n", "400"]));
    assert_eq!(out.trim(), "0.25");
    let out = stdout(&run(&["bound", "--mu", "5", "--z0", "45", "--n", "400"]));
    assert_eq!(out.trim(), "0.45");
}

#[test]
fn export_topology_writes_nodes_and_adjacency() {
    let out_path = temp_path("topo.txt");
    let out = run(&[
        &["export-topology"],
        SMALL,
        &["--seed-index", "1", "--out", out_path.to_str().unwrap()],
    ]
    .concat());
    assert!(out.status.success());
    let nodes = fs::read_to_string(&out_path).unwrap();
    assert_eq!(nodes.lines().count(), 60);
    let adversaries = nodes
        .lines()
        .filter(|l| l.ends_with(" 1"))
        .count();
    assert_eq!(adversaries, 3);
    let adj_path = PathBuf::from(format!("{}.adj", out_path.display()));
    let adj = fs::read_to_string(&adj_path).unwrap();
    assert_eq!(adj.lines().count(), 60);
    // Symmetry spot check on the first listed edge.
    let first = adj.lines().next().unwrap();
    let (node, rest) = first.split_once(':').unwrap();
    if let Some(neighbor) = rest.split_whitespace().next() {
        let back = adj
            .lines()
            .find(|l| l.starts_with(&format!("{neighbor}:")))
            .unwrap();
        assert!(
            back.split_once(':').unwrap().1.split_whitespace().any(|t| t == node),
            "edge {node}-{neighbor} must be symmetric"
        );
    }
    let _ = fs::remove_file(out_path);
    let _ = fs::remove_file(adj_path);
}
