use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use nematic_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0u8; 512];
    let need = unsafe { nematic_last_error(buf.as_mut_ptr().cast(), buf.len()) };
    assert!(need >= 1);
    CStr::from_bytes_until_nul(&buf).unwrap().to_string_lossy().into_owned()
}

fn config(text: &str) -> *mut NematicConfig {
    let text = CString::new(text).unwrap();
    let mut cfg = ptr::null_mut();
    let status = unsafe { nematic_config_parse(text.as_ptr(), &mut cfg) };
    assert_eq!(status, NematicStatus::Ok, "{}", last_error());
    cfg
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(nematic_version()) };
    assert!(v.to_str().unwrap().starts_with("nematic "));
}

#[test]
fn config_errors_are_reported() {
    let text = CString::new("grid.n = 2\n").unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { nematic_config_parse(text.as_ptr(), &mut cfg) }, NematicStatus::InvalidConfig);
    assert!(cfg.is_null());
    assert!(last_error().contains("grid"), "{}", last_error());
    assert_eq!(unsafe { nematic_config_parse(ptr::null(), &mut cfg) }, NematicStatus::NullPointer);

    let mut buf = [0u8; 4];
    let need = unsafe { nematic_last_error(buf.as_mut_ptr().cast(), buf.len()) };
    assert!(need > 4);
    assert_eq!(buf[3], 0);
}

#[test]
fn director_round_trip_and_validation() {
    let dims = [4usize, 4, 4];
    let spacing = [0.25; 3];
    let mut values: Vec<f64> = (0..64).flat_map(|_| [0.0, 0.6, 0.8]).collect();
    let mut d = ptr::null_mut();
    let s = unsafe { nematic_director_from_values(dims.as_ptr(), spacing.as_ptr(), true, values.as_ptr(), values.len(), &mut d) };
    assert_eq!(s, NematicStatus::Ok);
    assert_eq!(unsafe { nematic_director_nodes(d) }, 64);
    let mut back = vec![0.0; 192];
    assert_eq!(unsafe { nematic_director_values(d, back.as_mut_ptr(), back.len()) }, NematicStatus::Ok);
    assert_eq!(back, values);
    assert_eq!(unsafe { nematic_director_values(d, back.as_mut_ptr(), 5) }, NematicStatus::InvalidArgument);

    let cfg = config("");
    let mut e = NematicEnergy::default();
    assert_eq!(unsafe { nematic_energy(cfg, d, &mut e) }, NematicStatus::Ok);
    assert_eq!((e.elastic, e.dxq_norm), (0.0, 0.0));
    unsafe { nematic_director_free(d) };

    values[3 * 9 + 2] = 0.9;
    let mut d = ptr::null_mut();
    let s = unsafe { nematic_director_from_values(dims.as_ptr(), spacing.as_ptr(), true, values.as_ptr(), values.len(), &mut d) };
    assert_eq!(s, NematicStatus::InvalidArgument);
    assert!(last_error().contains("node 9"), "{}", last_error());
    unsafe { nematic_config_free(cfg) };
}

#[test]
fn flow_budget_and_certification() {
    let cfg = config(
        "grid.n = 6\nleslie.mu1 = 0.5\nleslie.mu2 = 0.3\nleslie.mu3 = 0.2\nleslie.mu4 = 2\nleslie.mu5 = 0.5\n\
         leslie.mu6 = 0.5\nleslie.lambda = 0.5\ninit.velocity = random\nsolver.max_steps = 25\ndiag.pair = self\n",
    );
    let mut traj = ptr::null_mut();
    assert_eq!(unsafe { nematic_flow(cfg, &mut traj) }, NematicStatus::NoConvergence);
    assert!(!traj.is_null());
    assert!(!unsafe { nematic_trajectory_converged(traj) });
    assert_eq!(unsafe { nematic_trajectory_records(traj) }, 26);
    let mut r = NematicRecord::default();
    assert_eq!(unsafe { nematic_trajectory_record(traj, 99, &mut r) }, NematicStatus::InvalidArgument);

    let mut cert = NematicCertificate::default();
    assert_eq!(unsafe { nematic_certify(cfg, traj, &mut cert) }, NematicStatus::Ok, "{}", last_error());
    assert!(cert.passes && cert.min_margin >= -1e-10);
    assert_eq!(cert.samples, unsafe { nematic_trajectory_samples(traj) });

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().to_str().unwrap()).unwrap();
    assert_eq!(unsafe { nematic_trajectory_write(traj, cfg, path.as_ptr()) }, NematicStatus::Ok);
    let file = CString::new(dir.path().join("trajectory.snap").to_str().unwrap()).unwrap();
    let mut loaded = ptr::null_mut();
    assert_eq!(unsafe { nematic_trajectory_read(file.as_ptr(), &mut loaded) }, NematicStatus::Ok);
    assert_eq!(unsafe { nematic_trajectory_samples(loaded) }, unsafe { nematic_trajectory_samples(traj) });
    let missing = CString::new("/nonexistent/trajectory.snap").unwrap();
    let mut none = ptr::null_mut();
    assert_eq!(unsafe { nematic_trajectory_read(missing.as_ptr(), &mut none) }, NematicStatus::Io);

    unsafe {
        nematic_trajectory_free(loaded);
        nematic_trajectory_free(traj);
        nematic_config_free(cfg);
    }
}

#[test]
fn periodic_flow_is_required() {
    let cfg = config("grid.n = 6\ngrid.domain = dirichlet\n");
    let mut traj = ptr::null_mut();
    assert_eq!(unsafe { nematic_flow(cfg, &mut traj) }, NematicStatus::InvalidConfig);
    assert!(last_error().contains("periodic"));
    unsafe { nematic_config_free(cfg) };
}

fn target_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_the_header() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libnematic_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let out = tempfile::tempdir().unwrap();
    let exe = out.path().join("smoke");
    let status = Command::new("cc")
        .arg("-std=c11")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler runs");
    assert!(status.success());
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).contains(" ok"));
}
