use attrlearn::config::ExperimentConfig;
use attrlearn::record::{runs_csv, strip_wall_time, sweep_csv, RUN_COLUMNS, SWEEP_COLUMNS};
use attrlearn::runner::{run_experiment, run_sweep};

fn cfg(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(text).unwrap()
}

fn table(bytes: &[u8]) -> (Vec<String>, Vec<csv::StringRecord>) {
    let text = String::from_utf8(bytes.to_vec()).unwrap();
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    (header, r.records().map(Result::unwrap).collect())
}

#[test]
fn header_matches_schema_and_labels_sum_to_m() {
    let c = cfg("d = 20\ns = 2\neps = 0.05\ndelta = 0.1\nseeds = [1, 2]\n");
    let exp = run_experiment(&c).unwrap();
    let bytes = runs_csv(&exp).unwrap();
    let (header, rows) = table(&bytes);
    assert_eq!(header, RUN_COLUMNS);
    assert!(rows.len() >= 2);
    let m_total: u64 = rows.iter().map(|r| r[7].parse::<u64>().unwrap()).sum();
    assert_eq!(exp.summary.total_labels, m_total);
}

#[test]
fn reruns_are_identical_apart_from_wall_time() {
    let c = cfg("d = 30\ns = 3\neps = 0.1\ndelta = 0.1\nseeds = [4, 5, 6]\neta = 0.05\n[adversary]\nkind = \"mixed\"\n");
    let a = runs_csv(&run_experiment(&c).unwrap()).unwrap();
    let b = runs_csv(&run_experiment(&c).unwrap()).unwrap();
    assert_eq!(strip_wall_time(&a), strip_wall_time(&b));
}

#[test]
fn embedded_config_reproduces_the_run() {
    let c = cfg("d = 20\ns = 2\neps = 0.1\ndelta = 0.1\nseed = 3\nmode = \"passive\"\n");
    let bytes = runs_csv(&run_experiment(&c).unwrap()).unwrap();
    let text = String::from_utf8(bytes.clone()).unwrap();
    let embedded: String = text
        .lines()
        .filter(|l| l.starts_with("# ") && !l.starts_with("# schema"))
        .map(|l| format!("{}\n", &l[2..]))
        .collect();
    let again = cfg(&embedded);
    assert_eq!(again, c);
    let replay = runs_csv(&run_experiment(&again).unwrap()).unwrap();
    assert_eq!(strip_wall_time(&bytes), strip_wall_time(&replay));
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    let c = cfg("d = 40\ns = 4\neps = 0.05\ndelta = 0.2\neta_over_eps = 0.5\nseeds = [1, 9]\n[adversary]\nkind = \"antipodal_in_band\"\n[sizing]\na = 0.1\n");
    c.save(&path).unwrap();
    assert_eq!(ExperimentConfig::load(&path).unwrap(), c);
}

#[test]
fn label_totals_grow_near_linearly_in_s() {
    let c = cfg("d = 400\ns = 2\neps = 0.1\ndelta = 0.1\nseed = 1\n");
    let values: Vec<String> = ["2", "4", "8"].iter().map(|v| v.to_string()).collect();
    let points = run_sweep(&c, "s", &values).unwrap();
    let bytes = sweep_csv(&c, "s", &points).unwrap();
    let (header, rows) = table(&bytes);
    assert_eq!(header, SWEEP_COLUMNS);
    assert_eq!(rows.len(), 3);
    let labels: Vec<f64> = points.iter().map(|p| p.experiment.summary.total_labels as f64).collect();
    for w in labels.windows(2) {
        assert!(w[1] / w[0] <= 2.5, "{labels:?}");
    }
}
