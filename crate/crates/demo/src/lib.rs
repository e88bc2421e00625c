//! Browser demo: sphere topologies, quantizer certificates and a short
//! CZSD vs ZSD-PD race. Every export returns a JSON string; errors come back
//! as `{"error": "..."}` so the page never has to catch.

use czsd_core::compress::{certify, CompressorKind, CompressorSpec};
use czsd_core::graph::random_geometric_sphere;
use czsd_core::rng::{fill_standard_normal, stream};
use czsd_core::runner::{self, mean_series, RunConfig, TopologyConfig};
use czsd_core::{Algorithm, ProblemConfig, ScheduleConfig};
use serde::Serialize;
use wasm_bindgen::prelude::wasm_bindgen;

#[derive(Serialize)]
struct GraphView {
    points: Vec<[f64; 3]>,
    edges: Vec<(usize, usize)>,
    eigenvalues: Vec<f64>,
    fiedler: f64,
    spectral_radius: f64,
    attempts: usize,
}

pub fn sphere_graph_json(n: usize, threshold_deg: f64, seed: u64) -> Result<String, String> {
    let g = random_geometric_sphere(n, threshold_deg, seed).map_err(|e| e.to_string())?;
    let t = &g.topology;
    let edges = (0..n)
        .flat_map(|i| {
            t.neighbors(i)
                .iter()
                .filter(move |(j, _)| *j > i)
                .map(move |(j, _)| (i, *j))
        })
        .collect();
    to_json(&GraphView {
        points: g.points.clone(),
        edges,
        eigenvalues: t.eigenvalues().to_vec(),
        fiedler: t.fiedler(),
        spectral_radius: t.spectral_radius(),
        attempts: g.attempts,
    })
}

#[derive(Serialize)]
struct QuantizerView {
    r: f64,
    delta: f64,
    bits_per_vector: u64,
    float_bits: u64,
    mean_ratio: f64,
    bound: f64,
    pass: bool,
    x: Vec<f64>,
    compressed: Vec<f64>,
}

pub fn quantizer_json(bits: u32, p: usize, samples: usize, seed: u64) -> Result<String, String> {
    let spec = CompressorSpec::new(CompressorKind::Dithered { bits }, p).map_err(|e| e.to_string())?;
    let mut rng = stream(seed, 0);
    let report = certify(&spec, samples.max(1), &mut rng);
    let mut x = vec![0.0; p];
    fill_standard_normal(&mut rng, &mut x);
    let compressed = spec.compress(&x, &mut rng).map_err(|e| e.to_string())?;
    to_json(&QuantizerView {
        r: spec.r(),
        delta: spec.delta(),
        bits_per_vector: spec.bits_per_vector(),
        float_bits: 64 * p as u64,
        mean_ratio: report.mean_ratio,
        bound: report.bound,
        pass: report.pass,
        x,
        compressed,
    })
}

#[derive(Serialize)]
struct Curve {
    k: Vec<usize>,
    p_running: Vec<f64>,
    bits: Vec<f64>,
}

#[derive(Serialize)]
struct RaceView {
    czsd: Curve,
    zsdpd: Curve,
    bits_per_round_czsd: u64,
    bits_per_round_zsdpd: u64,
}

/// Logistic benchmark on a sphere graph, CZSD (dithered `bits`) against
/// ZSD-PD with the table schedule.
pub fn race_json(
    n: usize,
    p: usize,
    threshold_deg: f64,
    bits: u32,
    iterations: usize,
    seed: u64,
) -> Result<String, String> {
    let mut cfg = RunConfig {
        problem: ProblemConfig::Logistic {
            n,
            p,
            m: 100,
            theta: 0.001,
            tau: 1.0,
        },
        topology: TopologyConfig::Geometric { threshold_deg, seed },
        algorithm: Algorithm::Czsd,
        compressor: CompressorKind::Dithered { bits },
        schedule: ScheduleConfig::Table1 { omega: None },
        iterations,
        seeds: vec![seed],
        cadence: (iterations / 100).max(1),
        init: Default::default(),
        lyapunov: false,
        lambda_fm: None,
        bit_convention: Default::default(),
        grad_batch: 16,
        thresholds: vec![],
        record_wall_time: false,
        out_dir: None,
    };
    let curve = |cfg: &RunConfig| -> Result<(Curve, u64), String> {
        let out = runner::run(cfg).map_err(|e| e.to_string())?;
        let p = mean_series(&out.runs, |r| r.p_running);
        let b = mean_series(&out.runs, |r| r.bits as f64);
        let per_round = out.summary.bits_per_vector * n as u64;
        Ok((
            Curve {
                k: p.iter().map(|x| x.0).collect(),
                p_running: p.iter().map(|x| x.1).collect(),
                bits: b.iter().map(|x| x.1).collect(),
            },
            per_round,
        ))
    };
    let (czsd, bc) = curve(&cfg)?;
    cfg.algorithm = Algorithm::Zsdpd;
    let (zsdpd, bz) = curve(&cfg)?;
    to_json(&RaceView {
        czsd,
        zsdpd,
        bits_per_round_czsd: bc,
        bits_per_round_zsdpd: bz,
    })
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

fn or_error(r: Result<String, String>) -> String {
    r.unwrap_or_else(|e| serde_json::json!({ "error": e }).to_string())
}

#[wasm_bindgen]
pub fn sphere_graph(n: usize, threshold_deg: f64, seed: u32) -> String {
    or_error(sphere_graph_json(n, threshold_deg, seed as u64))
}

#[wasm_bindgen]
pub fn quantizer(bits: u32, p: usize, samples: usize, seed: u32) -> String {
    or_error(quantizer_json(bits, p, samples, seed as u64))
}

#[wasm_bindgen]
pub fn race(n: usize, p: usize, threshold_deg: f64, bits: u32, iterations: usize, seed: u32) -> String {
    or_error(race_json(n, p, threshold_deg, bits, iterations, seed as u64))
}
