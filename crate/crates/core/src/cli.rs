//! Command-line front end: flag parsing, config loading with line-numbered
//! diagnostics, experiment dispatch under the requested parallelism, and
//! report emission with overwrite protection.
//!
//! Exit codes: 0 success, 2 invalid configuration or data, 64 usage error,
//! 66 unreadable input file, 73 refused or failed file creation.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use crate::cadlag::{m2_distance, uniform_distance, StepFunction};
use crate::ma;
use crate::mc::{self, ExperimentConfig, ExperimentKind, ExperimentReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_NO_INPUT: i32 = 66;
pub const EXIT_CANT_CREATE: i32 = 73;

struct Flags {
    config: Option<PathBuf>,
    out: PathBuf,
    seed: Option<u64>,
    jobs: Option<usize>,
    force: bool,
    positional: Vec<String>,
}

fn parse_flags(args: &[String]) -> Result<Flags, String> {
    let mut flags = Flags {
        config: None,
        out: PathBuf::from("."),
        seed: None,
        jobs: None,
        force: false,
        positional: Vec::new(),
    };
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        match arg.as_str() {
            "--config" => {
                flags.config = Some(PathBuf::from(it.next().ok_or("--config needs a path")?));
            }
            "--out" => {
                flags.out = PathBuf::from(it.next().ok_or("--out needs a directory")?);
            }
            "--seed" => {
                let v = it.next().ok_or("--seed needs a value")?;
                flags.seed = Some(v.parse().map_err(|_| format!("--seed needs an unsigned integer, got `{v}`"))?);
            }
            "--jobs" => {
                let v = it.next().ok_or("--jobs needs a count")?;
                let jobs: usize = v.parse().map_err(|_| format!("--jobs needs a positive integer, got `{v}`"))?;
                if jobs < 1 {
                    return Err("--jobs must be at least 1".into());
                }
                flags.jobs = Some(jobs);
            }
            "--force" => flags.force = true,
            other if other.starts_with("--") => return Err(format!("unknown flag `{other}`")),
            other => flags.positional.push(other.to_string()),
        }
    }
    Ok(flags)
}

fn usage() {
    eprintln!("usage: stablepaths <subcommand> [flags]");
    eprintln!();
    eprintln!("subcommands:");
    eprintln!("  simulate                 emit one coupled path pair as CSV files");
    eprintln!("  metric <a.csv> <b.csv>   M2 and uniform distances between two path CSVs");
    eprintln!("  experiment <kind>        run an experiment: slutsky, truncation, marginal,");
    eprintln!("                           functional, or identity");
    eprintln!("  validate-coeffs <file>   check a coefficient vector (one value per line or");
    eprintln!("                           comma-separated)");
    eprintln!();
    eprintln!("flags: --config <file>  --out <dir>  --seed <u64>  --jobs <count>  --force");
}

/// Runs the CLI on the given arguments (binary name excluded) and returns
/// the process exit code.
pub fn run(argv: &[String]) -> i32 {
    let Some(sub) = argv.first() else {
        usage();
        return EXIT_USAGE;
    };
    let flags = match parse_flags(&argv[1..]) {
        Ok(f) => f,
        Err(msg) => {
            eprintln!("error: {msg}");
            usage();
            return EXIT_USAGE;
        }
    };
    match sub.as_str() {
        "simulate" => simulate(&flags),
        "metric" => metric(&flags),
        "experiment" => experiment(&flags),
        "validate-coeffs" => validate_coeffs(&flags),
        other => {
            eprintln!("error: unknown subcommand `{other}`");
            usage();
            EXIT_USAGE
        }
    }
}

fn load_config(flags: &Flags) -> Result<ExperimentConfig, i32> {
    let Some(path) = &flags.config else {
        eprintln!("error: --config is required for this subcommand");
        return Err(EXIT_USAGE);
    };
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return Err(EXIT_NO_INPUT);
        }
    };
    let mut cfg = match ExperimentConfig::from_text(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return Err(EXIT_INVALID);
        }
    };
    if let Some(seed) = flags.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

/// Refuses to clobber any of the targets unless --force was given.
fn guard_overwrite(targets: &[&Path], force: bool) -> Result<(), i32> {
    if force {
        return Ok(());
    }
    for p in targets {
        if p.exists() {
            eprintln!("error: {} already exists (pass --force to overwrite)", p.display());
            return Err(EXIT_CANT_CREATE);
        }
    }
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<(), i32> {
    fs::write(path, contents).map_err(|e| {
        eprintln!("error: cannot write {}: {e}", path.display());
        EXIT_CANT_CREATE
    })
}

fn simulate(flags: &Flags) -> i32 {
    let cfg = match load_config(flags) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let coeffs = match cfg.finite_coefficients() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    let n = *cfg.n_grid.last().expect("config validation keeps n_grid nonempty");
    let (vn, vnz) = ma::build_paths(&cfg.model, &coeffs, n, cfg.seed);
    let series_file = flags.out.join("series_path.csv");
    let noise_file = flags.out.join("noise_path.csv");
    if let Err(code) = guard_overwrite(&[&series_file, &noise_file], flags.force) {
        return code;
    }
    if let Err(e) = fs::create_dir_all(&flags.out) {
        eprintln!("error: cannot create {}: {e}", flags.out.display());
        return EXIT_CANT_CREATE;
    }
    for (path, step) in [(&series_file, &vn), (&noise_file, &vnz)] {
        let mut buf = Vec::new();
        step.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        let text = String::from_utf8(buf).expect("path CSV is ASCII");
        if let Err(code) = write_file(path, &text) {
            return code;
        }
    }
    println!("wrote {} and {}", series_file.display(), noise_file.display());
    EXIT_OK
}

fn read_path_csv(path: &str) -> Result<StepFunction, i32> {
    let file = match fs::File::open(path) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: cannot read {path}: {e}");
            return Err(EXIT_NO_INPUT);
        }
    };
    StepFunction::read_csv(BufReader::new(file)).map_err(|e| {
        eprintln!("error: {path}: {e}");
        EXIT_INVALID
    })
}

fn metric(flags: &Flags) -> i32 {
    let [a, b] = flags.positional.as_slice() else {
        eprintln!("error: metric needs exactly two path CSV files");
        usage();
        return EXIT_USAGE;
    };
    let x = match read_path_csv(a) {
        Ok(x) => x,
        Err(code) => return code,
    };
    let y = match read_path_csv(b) {
        Ok(y) => y,
        Err(code) => return code,
    };
    println!("m2 = {}", m2_distance(&x, &y));
    println!("uniform = {}", uniform_distance(&x, &y));
    EXIT_OK
}

fn experiment(flags: &Flags) -> i32 {
    let Some(kind_name) = flags.positional.first() else {
        eprintln!("error: experiment needs a kind");
        usage();
        return EXIT_USAGE;
    };
    let Some(kind) = ExperimentKind::parse(kind_name) else {
        eprintln!("error: unknown experiment `{kind_name}`");
        usage();
        return EXIT_USAGE;
    };
    let cfg = match load_config(flags) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let report_csv = flags.out.join("report.csv");
    let report_json = flags.out.join("report.json");
    let plot_csv = flags.out.join("plot.csv");
    if let Err(code) = guard_overwrite(&[&report_csv, &report_json, &plot_csv], flags.force) {
        return code;
    }
    let result = match flags.jobs {
        Some(jobs) => match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            Ok(pool) => pool.install(|| mc::run_experiment(kind, &cfg)),
            Err(e) => {
                eprintln!("error: cannot build a {jobs}-thread pool: {e}");
                return EXIT_USAGE;
            }
        },
        None => mc::run_experiment(kind, &cfg),
    };
    let report: ExperimentReport = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_INVALID;
        }
    };
    if let Err(e) = fs::create_dir_all(&flags.out) {
        eprintln!("error: cannot create {}: {e}", flags.out.display());
        return EXIT_CANT_CREATE;
    }
    for (path, contents) in [
        (&report_csv, report.to_csv()),
        (&report_json, report.to_json()),
        (&plot_csv, report.plot_csv()),
    ] {
        if let Err(code) = write_file(path, &contents) {
            return code;
        }
    }
    // timing is log-only so reruns stay byte-identical
    eprintln!("{} finished in {:.2}s", kind.name(), report.wall_seconds);
    println!("wrote {}", report_csv.display());
    println!("wrote {}", report_json.display());
    println!("wrote {}", plot_csv.display());
    EXIT_OK
}

fn validate_coeffs(flags: &Flags) -> i32 {
    let [path] = flags.positional.as_slice() else {
        eprintln!("error: validate-coeffs needs exactly one file");
        usage();
        return EXIT_USAGE;
    };
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {path}: {e}");
            return EXIT_NO_INPUT;
        }
    };
    // accept one value per line or a comma-separated list
    let normalized = text.replace(',', "\n");
    let phis = match ma::read_coefficients(normalized.as_bytes()) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {path}: {e}");
            return EXIT_INVALID;
        }
    };
    match ma::validate_coefficients(&phis) {
        Ok(()) => {
            println!("ok");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INVALID
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn unknown_subcommand_is_a_usage_error() {
        assert_eq!(run(&args(&["frobnicate"])), EXIT_USAGE);
        assert_eq!(run(&args(&[])), EXIT_USAGE);
        assert_eq!(run(&args(&["experiment", "nonsense"])), EXIT_USAGE);
        assert_eq!(run(&args(&["metric", "only-one.csv"])), EXIT_USAGE);
        assert_eq!(run(&args(&["simulate", "--jobs", "0"])), EXIT_USAGE);
        assert_eq!(run(&args(&["simulate", "--wat"])), EXIT_USAGE);
    }

    #[test]
    fn missing_files_exit_no_input() {
        assert_eq!(run(&args(&["validate-coeffs", "/nonexistent/phis.txt"])), EXIT_NO_INPUT);
        assert_eq!(
            run(&args(&["experiment", "slutsky", "--config", "/nonexistent/cfg.txt"])),
            EXIT_NO_INPUT
        );
        assert_eq!(run(&args(&["metric", "/nonexistent/a.csv", "/nonexistent/b.csv"])), EXIT_NO_INPUT);
    }

    #[test]
    fn validate_coeffs_distinguishes_ok_from_violation() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("good.txt");
        fs::write(&good, "0.5, -0.5, 1\n").unwrap();
        assert_eq!(run(&args(&["validate-coeffs", good.to_str().unwrap()])), EXIT_OK);

        let lines = dir.path().join("lines.txt");
        fs::write(&lines, "0.5\n-0.5\n1\n").unwrap();
        assert_eq!(run(&args(&["validate-coeffs", lines.to_str().unwrap()])), EXIT_OK);

        let bad = dir.path().join("bad.txt");
        fs::write(&bad, "2, -1\n").unwrap();
        assert_eq!(run(&args(&["validate-coeffs", bad.to_str().unwrap()])), EXIT_INVALID);

        let garbage = dir.path().join("garbage.txt");
        fs::write(&garbage, "0.5\nnope\n").unwrap();
        assert_eq!(run(&args(&["validate-coeffs", garbage.to_str().unwrap()])), EXIT_INVALID);
    }

    #[test]
    fn metric_on_identical_files_prints_zero_distances() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("cfg.txt");
        fs::write(&cfg, "alpha = 0.8\np = 0.5\ncoeffs = 0.5,-0.5,1\nn_grid = 32\nseed = 9\n").unwrap();
        let out = dir.path().join("paths");
        let code = run(&args(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]));
        assert_eq!(code, EXIT_OK);
        let a = out.join("series_path.csv");
        assert_eq!(run(&args(&["metric", a.to_str().unwrap(), a.to_str().unwrap()])), EXIT_OK);

        // rerunning simulate without --force must refuse, with it must pass
        let again = run(&args(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]));
        assert_eq!(again, EXIT_CANT_CREATE);
        let forced = run(&args(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--force",
        ]));
        assert_eq!(forced, EXIT_OK);
    }

    #[test]
    fn invalid_config_exits_two() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("cfg.txt");
        fs::write(&cfg, "alpha = 2.5\np = 0.5\ncoeffs = 1\n").unwrap();
        assert_eq!(run(&args(&["experiment", "slutsky", "--config", cfg.to_str().unwrap()])), EXIT_INVALID);

        let asym = dir.path().join("asym.txt");
        fs::write(&asym, "alpha = 1\np = 0.7\ncoeffs = 1\n").unwrap();
        assert_eq!(run(&args(&["experiment", "slutsky", "--config", asym.to_str().unwrap()])), EXIT_INVALID);
    }

    #[test]
    fn experiment_writes_reports_and_respects_force() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("cfg.txt");
        fs::write(
            &cfg,
            "alpha = 0.8\np = 0.5\ncoeffs = 0.5,-0.5,1\nn_grid = 16,32\nreps = 6\nseed = 3\n",
        )
        .unwrap();
        let out = dir.path().join("run");
        let base = args(&[
            "experiment",
            "slutsky",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(run(&base), EXIT_OK);
        for name in ["report.csv", "report.json", "plot.csv"] {
            assert!(out.join(name).exists(), "{name} missing");
        }
        let csv = fs::read_to_string(out.join("report.csv")).unwrap();
        assert!(csv.starts_with("n,p_m2,se_m2,"), "{csv}");
        assert_eq!(run(&base), EXIT_CANT_CREATE);

        let mut forced = base.clone();
        forced.push("--force".into());
        assert_eq!(run(&forced), EXIT_OK);
    }
}
