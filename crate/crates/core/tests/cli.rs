use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nematic::fields::{random_unit_director, write_snapshot, write_trajectory_file, DomainKind, Field, Grid, Snapshot};
use nematic::tensor::Vec3;

fn nematic(dir: &Path, args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_nematic"));
    cmd.current_dir(dir).args(args);
    match threads {
        Some(t) => cmd.env("NEMATIC_THREADS", t),
        None => cmd.env_remove("NEMATIC_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn value(text: &str, key: &str) -> f64 {
    let line = text.lines().find(|l| l.starts_with(key)).unwrap_or_else(|| panic!("no `{key}` in {text}"));
    line.rsplit('=').next().unwrap().trim().parse().unwrap()
}

const LESLIE: &str = "leslie.mu1 = 0.5\nleslie.mu2 = 0.3\nleslie.mu3 = 0.2\nleslie.mu5 = 0.5\nleslie.mu6 = 0.5\nleslie.lambda = 0.5\n";

#[test]
fn constant_director_has_zero_energy() {
    let dir = tempfile::tempdir().unwrap();
    let g = Grid::cube(6, 1.0, DomainKind::Periodic).unwrap();
    write_snapshot(&dir.path().join("c.snap"), &Snapshot::new(0.0, Field::constant(g, Vec3::new(0.6, 0.0, 0.8)))).unwrap();
    let o = nematic(dir.path(), &["energy", "c.snap"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l == "F = 0"), "{text}");
    assert!(text.lines().any(|l| l == "||d x q|| = 0"), "{text}");
}

#[test]
fn helix_energy_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("h.cfg"), "grid.n = 32\ninit.director = helix\nfrank.K2 = 0.7\n").unwrap();
    let o = nematic(dir.path(), &["generate", "--config", "h.cfg"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = nematic(dir.path(), &["energy", "initial.snap", "--config", "h.cfg"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let f = value(&stdout(&o), "F =");
    let exact = 2.0 * std::f64::consts::PI.powi(2) * 0.7;
    assert!((f - exact).abs() <= 0.01 * exact, "F = {f}, closed form {exact}");
}

#[test]
fn non_unit_snapshot_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let g = Grid::cube(5, 1.0, DomainKind::Periodic).unwrap();
    let mut d = Field::constant(g, Vec3::e(2));
    d.values[37] = Vec3::new(0.0, 0.0, 1.1);
    write_snapshot(&dir.path().join("bad.snap"), &Snapshot::new(0.0, d)).unwrap();
    let o = nematic(dir.path(), &["energy", "bad.snap"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("node 37"), "{}", stderr(&o));
    fs::write(dir.path().join("trunc.snap"), b"NEMATIC-SNAPSHOT v1\ndims 5 5 5\n").unwrap();
    let o = nematic(dir.path(), &["energy", "trunc.snap"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("u.cfg"), "grid.n = 8\nfrank.K9 = 1\n").unwrap();
    let o = nematic(dir.path(), &["gradflow", "--config", "u.cfg"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("frank.K9"), "{}", stderr(&o));

    fs::write(dir.path().join("f.cfg"), format!("grid.n = 8\n{LESLIE}leslie.mu4 = 0\n")).unwrap();
    let o = nematic(dir.path(), &["flow", "--config", "f.cfg"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("μ4 > 0"), "{}", stderr(&o));

    fs::write(dir.path().join("d.cfg"), format!("grid.n = 8\ngrid.domain = dirichlet\n{LESLIE}leslie.mu4 = 2\n")).unwrap();
    let o = nematic(dir.path(), &["flow", "--config", "d.cfg"], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("periodic"), "{}", stderr(&o));

    let o = nematic(dir.path(), &["gradflow"], Some("zero"));
    assert_eq!(o.status.code(), Some(2));
}

fn timeseries_rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('t'))
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

const GRADFLOW: &str = "grid.n = 8\ngrid.domain = dirichlet\ninit.mean = 0 0 1\ninit.boundary = 0 0 1\ninit.taper = true\nseed = 3\n";

#[test]
fn gradflow_is_deterministic_and_descends() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("g.cfg"), GRADFLOW).unwrap();
    let a = nematic(dir.path(), &["gradflow", "--config", "g.cfg", "--out", "a"], None);
    assert!(a.status.success(), "{}", stderr(&a));
    let b = nematic(dir.path(), &["gradflow", "--config", "g.cfg", "--out", "b"], Some("1"));
    assert!(b.status.success());
    let ta = fs::read(dir.path().join("a/timeseries.csv")).unwrap();
    assert_eq!(ta, fs::read(dir.path().join("b/timeseries.csv")).unwrap());
    assert_eq!(fs::read(dir.path().join("a/trajectory.snap")).unwrap(), fs::read(dir.path().join("b/trajectory.snap")).unwrap());
    let text = String::from_utf8(ta).unwrap();
    assert!(text.starts_with("# nematic "), "{text}");
    assert!(text.contains("# config seed = 3"));

    let rows = timeseries_rows(&dir.path().join("a/timeseries.csv"));
    assert!(rows.len() > 10);
    for w in rows.windows(2) {
        assert!(w[1][1] <= w[0][1] + 1e-10, "energy rose: {} -> {}", w[0][1], w[1][1]);
    }
    assert!(rows.last().unwrap()[4] <= 1e-6);

    let o = nematic(dir.path(), &["gradflow", "--config", "g.cfg", "--out", "c", "--seed", "4"], None);
    assert!(o.status.success());
    assert_ne!(fs::read(dir.path().join("c/timeseries.csv")).unwrap(), fs::read(dir.path().join("a/timeseries.csv")).unwrap());
}

#[test]
fn gradflow_budget_exhaustion_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("g.cfg"), format!("{GRADFLOW}solver.max_steps = 20\n")).unwrap();
    let o = nematic(dir.path(), &["gradflow", "--config", "g.cfg"], None);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(timeseries_rows(&dir.path().join("timeseries.csv")).len(), 21);
}

#[test]
fn magnetic_gradflow_aligns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "grid.n = 8\nseed = 2\nmagnetic.chi_par = -1\nmagnetic.chi_perp = -2\nmagnetic.H = 0 0 1\nsolver.sample_every = 1000\n";
    fs::write(dir.path().join("m.cfg"), cfg).unwrap();
    let o = nematic(dir.path(), &["gradflow", "--config", "m.cfg"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let align = value(&stdout(&o), "mean |d.H|/|H|");
    assert!(align >= 0.999, "alignment {align}");
}

#[test]
fn certify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("g.cfg"), GRADFLOW).unwrap();
    let o = nematic(dir.path(), &["gradflow", "--config", "g.cfg"], None);
    assert!(o.status.success());

    let o = nematic(dir.path(), &["certify", "trajectory.snap", "--config", "g.cfg", "--out", "cert"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).lines().any(|l| l == "PASS"));
    assert!(value(&stdout(&o), "min margin =") >= -1e-3);
    let report = fs::read_to_string(dir.path().join("cert/certify.csv")).unwrap();
    assert!(report.contains("t,E_rel,W,K,int_K,lhs,rhs,margin"));

    fs::write(dir.path().join("s.cfg"), format!("{GRADFLOW}diag.pair = self\n")).unwrap();
    let o = nematic(dir.path(), &["certify", "trajectory.snap", "--config", "s.cfg", "--tol", "1e-10", "--out", "self"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(value(&stdout(&o), "min margin =") >= -1e-10);

    // energy appears from nothing: the constant pair cannot bound it
    let g = Grid::cube(6, 1.0, DomainKind::Periodic).unwrap();
    let snap = |t: f64, d: Field<Vec3>| {
        let mut s = Snapshot::new(t, d);
        s.dxq = Some(Field::zeros(g));
        s
    };
    let snaps = [snap(0.0, Field::constant(g, Vec3::e(2))), snap(0.1, random_unit_director(&g, 1, 1.0).into_field())];
    write_trajectory_file(&dir.path().join("bad.snap"), &snaps).unwrap();
    let o = nematic(dir.path(), &["certify", "bad.snap", "--C", "1", "--out", "bad"], None);
    assert_eq!(o.status.code(), Some(2), "no pair director configured: {}", stderr(&o));
    fs::write(dir.path().join("p.cfg"), "diag.pair_director = 0 0 1\n").unwrap();
    let o = nematic(dir.path(), &["certify", "bad.snap", "--config", "p.cfg", "--out", "bad"], None);
    assert_eq!(o.status.code(), Some(4), "{}", stdout(&o));
    assert!(stdout(&o).lines().any(|l| l == "FAIL"));
}

#[test]
fn flow_is_thread_count_independent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!("grid.n = 8\n{LESLIE}leslie.mu4 = 2\ninit.velocity = random\nsolver.max_steps = 40\nseed = 9\n");
    fs::write(dir.path().join("f.cfg"), cfg).unwrap();
    let a = nematic(dir.path(), &["flow", "--config", "f.cfg", "--out", "a"], Some("1"));
    let b = nematic(dir.path(), &["flow", "--config", "f.cfg", "--out", "b"], Some("3"));
    assert_eq!(a.status.code(), Some(3));
    assert_eq!(b.status.code(), Some(3));
    assert_eq!(fs::read(dir.path().join("a/timeseries.csv")).unwrap(), fs::read(dir.path().join("b/timeseries.csv")).unwrap());
    for row in timeseries_rows(&dir.path().join("a/timeseries.csv")) {
        assert!(row[8] >= -1e-6 * (1.0 + row[3]), "energy margin {}", row[8]);
    }
}

#[test]
fn steady_writes_a_table() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.cfg"), format!("{GRADFLOW}steady.levels = 6 8\n")).unwrap();
    let o = nematic(dir.path(), &["steady", "--config", "s.cfg"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(dir.path().join("steady.txt")).unwrap();
    assert_eq!(table.lines().filter(|l| !l.starts_with('#')).count(), 3, "{table}");
    assert!(table.contains("n,h,steps,converged,dxq_L2,el_L2,gap_L2,gap_order"));
}
