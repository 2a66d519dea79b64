use std::fs;

use nalgebra::{DMatrix, DVector};

use tracescreen::admm::AdmmConfig;
use tracescreen::harness::report::CSV_HEADER;
use tracescreen::harness::{
    bench, bench_one, gen_gaussian, gen_shape, load_problem, report, save_problem, BenchConfig, BenchRecord, DataSpec,
    Format, GaussianSpec, MeanVar, Shape, ShapeSpec,
};
use tracescreen::model::build_problem;
use tracescreen::prox::svd;
use tracescreen::Error;

#[test]
fn gaussian_generator_is_deterministic_and_rank_one_per_sample() {
    let spec = GaussianSpec::new(4, 6, 9, 17);
    let (a, ba) = gen_gaussian(&spec).unwrap();
    let (b, bb) = gen_gaussian(&spec).unwrap();
    assert_eq!(a.design(), b.design());
    assert_eq!(a.y(), b.y());
    assert_eq!(ba, bb);
    let (c, _) = gen_gaussian(&GaussianSpec { seed: 18, ..spec }).unwrap();
    assert_ne!(a.y(), c.y());
    for x in a.x() {
        assert_eq!(svd(x, false).unwrap().rank(), 1);
    }
    assert!((ba.norm() - 1.0).abs() < 1e-14);
    assert_eq!(svd(&ba, false).unwrap().rank(), 2);
}

#[test]
fn gaussian_noise_is_centred() {
    let spec = GaussianSpec { p: 2, q: 2, n: 10_000, rank: 1, noise_std: 0.1, seed: 5 };
    let (prob, b) = gen_gaussian(&spec).unwrap();
    let mean = (prob.y() - prob.apply(&b)).mean();
    assert!(mean.abs() <= 3.0 * 0.1 / 100.0, "{mean}");
}

#[test]
fn noiseless_generators_are_exact() {
    let (prob, b) = gen_gaussian(&GaussianSpec { noise_std: 0.0, ..GaussianSpec::new(3, 3, 5, 2) }).unwrap();
    assert!((prob.apply(&b) - prob.y()).norm() <= 1e-12 * prob.y().norm());
    let (prob, b) = gen_shape(&ShapeSpec { noise_std: 0.0, ..ShapeSpec::new(Shape::Ring, 4, 3) }).unwrap();
    assert!((prob.apply(&b) - prob.y()).norm() <= 1e-12 * prob.y().norm());
    assert_eq!((prob.p(), prob.q()), (64, 64));
}

#[test]
fn invalid_gaussian_specs_are_rejected() {
    assert!(gen_gaussian(&GaussianSpec { rank: 4, ..GaussianSpec::new(3, 5, 4, 0) }).is_err());
    assert!(gen_gaussian(&GaussianSpec { noise_std: -1.0, ..GaussianSpec::new(3, 5, 4, 0) }).is_err());
}

#[test]
fn shapes_are_binary_with_documented_rank() {
    for shape in Shape::ALL {
        let m = shape.matrix(64);
        assert_eq!(m.shape(), (64, 64));
        assert!(m.iter().all(|&v| v == 0.0 || v == 1.0), "{shape}");
        assert!(m.iter().any(|&v| v == 1.0), "{shape}");
        assert_eq!(svd(&m, false).unwrap().rank(), shape.documented_rank(), "{shape}");
        assert_eq!(shape.name().parse::<Shape>().unwrap(), shape);
    }
    assert!(svd(&Shape::Cross.matrix(64), false).unwrap().rank() <= 2);
    assert!(matches!("blob".parse::<Shape>(), Err(Error::UnknownShape(_))));
}

#[test]
fn square_is_one_contiguous_block() {
    let m = Shape::Square.matrix(64);
    let on: Vec<(usize, usize)> =
        (0..64).flat_map(|r| (0..64).map(move |c| (r, c))).filter(|&(r, c)| m[(r, c)] == 1.0).collect();
    let (r0, r1) = (on.iter().map(|x| x.0).min().unwrap(), on.iter().map(|x| x.0).max().unwrap());
    let (c0, c1) = (on.iter().map(|x| x.1).min().unwrap(), on.iter().map(|x| x.1).max().unwrap());
    assert_eq!(on.len(), (r1 - r0 + 1) * (c1 - c0 + 1));
}

#[test]
fn save_then_load_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (prob, _) = gen_gaussian(&GaussianSpec::new(3, 4, 7, 1)).unwrap();
    let manifest = save_problem(&prob, dir.path()).unwrap();
    let back = load_problem(&manifest).unwrap();
    assert_eq!(back.design(), prob.design());
    assert_eq!(back.y(), prob.y());
    assert_eq!((back.n(), back.p(), back.q()), (7, 3, 4));
}

#[test]
fn loads_a_wide_real_data_shaped_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let (n, p, q) = (138, 41, 30);
    let mut x = String::new();
    let mut y = String::new();
    for i in 0..n {
        let row: Vec<String> = (0..p * q).map(|k| format!("{}", ((i * 31 + k * 7) % 23) as f64 / 23.0)).collect();
        x.push_str(&row.join(","));
        x.push('\n');
        y.push_str(&format!("{}\n", i as f64 * 0.5));
    }
    fs::write(dir.path().join("X.csv"), x).unwrap();
    fs::write(dir.path().join("y.csv"), y).unwrap();
    let m = format!(r#"{{"n": {n}, "p": {p}, "q": {q}, "y": "y.csv", "X": "X.csv"}}"#);
    fs::write(dir.path().join("manifest.json"), m).unwrap();
    let prob = load_problem(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(prob.design().shape(), (138, 1230));
    assert_eq!(prob.x()[1][(0, 1)], ((31 + 41 * 7) % 23) as f64 / 23.0);
}

fn write_small(dir: &std::path::Path, x: &str, y: &str, n: usize) -> std::path::PathBuf {
    fs::write(dir.join("X.csv"), x).unwrap();
    fs::write(dir.join("y.csv"), y).unwrap();
    let m = format!(r#"{{"n": {n}, "p": 1, "q": 2, "y": "y.csv", "X": "X.csv"}}"#);
    let path = dir.join("manifest.json");
    fs::write(&path, m).unwrap();
    path
}

#[test]
fn load_errors_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_small(dir.path(), "1,2\n3,4\n5\n", "1\n2\n3\n", 3);
    match load_problem(&m) {
        Err(Error::Parse { msg, .. }) => assert!(msg.contains("row 3"), "{msg}"),
        other => panic!("unexpected {other:?}"),
    }
    let m = write_small(dir.path(), "1,2\n3,x\n", "1\n2\n", 2);
    match load_problem(&m) {
        Err(Error::Parse { msg, .. }) => assert!(msg.contains("row 2") && msg.contains("column 2"), "{msg}"),
        other => panic!("unexpected {other:?}"),
    }
    let m = write_small(dir.path(), "1,2\n3,4\n", "1\n2\n", 3);
    assert!(matches!(load_problem(&m), Err(Error::Dimension(_))));
    fs::remove_file(dir.path().join("y.csv")).unwrap();
    assert!(matches!(load_problem(&m), Err(Error::Io { .. }) | Err(Error::Parse { .. })));
    assert!(matches!(load_problem(&dir.path().join("nope.json")), Err(Error::Io { .. })));
}

fn quick() -> BenchConfig {
    BenchConfig { k: 3, reps: 1, admm: AdmmConfig::default(), ..BenchConfig::default() }
}

#[test]
fn bench_records_and_single_rep_variance() {
    let spec = DataSpec::Gaussian(GaussianSpec::new(3, 4, 6, 1));
    let r = bench_one(&spec, &quick()).unwrap();
    assert_eq!(r.reps, 1);
    assert_eq!(r.t_f.var, 0.0);
    assert_eq!(r.t_s.var, 0.0);
    assert!(r.safety_ok);
    assert!((r.speedup.mean - r.t_f_ms[0] / r.t_s_ms[0]).abs() <= 1e-12 * r.speedup.mean);
    assert_eq!(r.label, "3x4");
    assert_eq!(r.rows.len(), 3);
}

#[test]
fn seeds_change_timings_not_safety() {
    let specs = [DataSpec::Gaussian(GaussianSpec::new(3, 4, 6, 1)), DataSpec::Gaussian(GaussianSpec::new(3, 4, 6, 2))];
    let rs = bench(&specs, &BenchConfig { reps: 2, ..quick() }).unwrap();
    assert_eq!(rs.len(), 2);
    assert_ne!(rs[0].t_f_ms, rs[1].t_f_ms);
    assert!(rs.iter().all(|r| r.safety_ok && r.t_f.var >= 0.0 && r.reps == 2));
}

#[test]
fn data_spec_json_round_trip() {
    let specs =
        [DataSpec::Gaussian(GaussianSpec::new(15, 45, 30, 3)), DataSpec::Shape(ShapeSpec::new(Shape::DotGrid, 10, 4))];
    let text = serde_json::to_string(&specs).unwrap();
    assert!(text.contains(r#""kind":"gaussian""#) && text.contains(r#""shape":"dot-grid""#));
    let back: Vec<DataSpec> = serde_json::from_str(&text).unwrap();
    assert_eq!(back, specs);
    assert_eq!(specs[1].label(), "dot-grid-64");
}

fn record(p: usize, q: usize, n: usize, tf: f64, ts: f64) -> BenchRecord {
    BenchRecord {
        label: format!("{p}x{q}"),
        p,
        q,
        n,
        reps: 2,
        t_f_ms: vec![tf - 1.0, tf + 1.0],
        t_s_ms: vec![ts, ts],
        t_f: MeanVar::of(&[tf - 1.0, tf + 1.0]),
        t_s: MeanVar::of(&[ts, ts]),
        speedup: MeanVar::of(&[(tf - 1.0) / ts, (tf + 1.0) / ts]),
        safety_ok: true,
        all_converged: true,
        max_objective_gap: 1.5e-9,
        max_solution_gap: 2.5e-7,
        rows: vec![],
    }
}

#[test]
fn single_record_reports() {
    let r = [record(3, 4, 6, 101.0, 50.0)];
    let csv = report(&r, Format::Csv).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert_eq!(csv.lines().next().unwrap(), CSV_HEADER.join(","));
    let md = report(&r, Format::Markdown).unwrap();
    assert_eq!(md.lines().count(), 3);
    let js: serde_json::Value = serde_json::from_str(&report(&r, Format::Json).unwrap()).unwrap();
    assert_eq!(js.as_array().unwrap().len(), 1);
    assert!(report(&[], Format::Json).is_err());
    assert!(matches!("xml".parse::<Format>(), Err(Error::UnknownFormat(_))));
}

#[test]
fn csv_and_json_carry_the_same_numbers() {
    let rs = [record(3, 4, 6, 101.0, 50.0), record(3, 4, 12, 1.0 / 3.0, 0.1)];
    let js: serde_json::Value = serde_json::from_str(&report(&rs, Format::Json).unwrap()).unwrap();
    let csv = report(&rs, Format::Csv).unwrap();
    let mut rdr = csv::Reader::from_reader(csv.as_bytes());
    for (row, j) in rdr.records().zip(js.as_array().unwrap()) {
        let row = row.unwrap();
        let num = |i: usize| row[i].parse::<f64>().unwrap();
        assert_eq!(num(5), j["t_f"]["mean"].as_f64().unwrap());
        assert_eq!(num(6), j["t_f"]["var"].as_f64().unwrap());
        assert_eq!(num(7), j["t_s"]["mean"].as_f64().unwrap());
        assert_eq!(num(9), j["speedup"]["mean"].as_f64().unwrap());
        assert_eq!(num(12), j["max_objective_gap"].as_f64().unwrap());
        assert_eq!(&row[3], j["n"].to_string());
    }
}

#[test]
fn markdown_groups_sample_sizes_under_one_dimension() {
    let rs = [
        record(15, 45, 30, 15443.0, 5094.0),
        record(15, 45, 50, 9000.0, 4000.0),
        record(15, 45, 100, 6000.0, 5000.0),
        record(20, 40, 30, 12000.0, 4000.0),
    ];
    let md = report(&rs, Format::Markdown).unwrap();
    let want = "\
| Dimension | Sample size | T_f (s) | T_s (s) | Speedup |
|---|---|---|---|---|
| 15×45 | 30 | 15.443(0.000) | 5.094(0.000) | 3.032(0.000) |
|  | 50 | 9.000(0.000) | 4.000(0.000) | 2.250(0.000) |
|  | 100 | 6.000(0.000) | 5.000(0.000) | 1.200(0.000) |
| 20×40 | 30 | 12.000(0.000) | 4.000(0.000) | 3.000(0.000) |
";
    assert_eq!(md, want);
}

#[test]
fn problems_from_loaded_parts_match_builder() {
    let x = vec![DMatrix::from_row_slice(1, 2, &[1.0, 2.0])];
    let p = build_problem(x, DVector::from_element(1, 3.0)).unwrap();
    assert_eq!(p.design().shape(), (1, 2));
}
