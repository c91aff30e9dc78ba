use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use polykin_cli::config::{GridPreset, RelaxConfig, SnapshotGenConfig, SweepConfig};
use polykin_cli::{drivers, CliError, EXIT_USAGE};

const USAGE: &str = "polykin - polyatomic ellipsoidal BGK toolkit

USAGE:
    polykin <COMMAND> [FLAGS]

COMMANDS:
    moments    --snapshot PATH
                   macroscopic fields and temperatures of a snapshot
    decompose  --snapshot PATH --nu X --theta Y [--format csv|json] [--out DIR]
                   entropy production decomposition and theorem verdict
    relax      --config PATH [--out DIR] [--seed N] [--grid-preset P]
                   space-homogeneous relaxation run (trajectory.csv, manifest.json)
    slab       --config PATH [--out DIR] [--seed N] [--grid-preset P]
                   1D periodic slab run with Strang splitting
    sweep      --config PATH [--out DIR] [--seed N]
                   closed-form theorem certification over a random ensemble
    snapshot   --config PATH --out-file PATH
                   generate a snapshot fixture from an initial-condition config

FLAGS:
    --config PATH          JSON run configuration
    --snapshot PATH        snapshot file (moments, decompose)
    --nu X, --theta Y      relaxation parameters (decompose)
    --seed N               override the config seed
    --grid-preset P        coarse | default | fine (point counts)
    --out DIR              output directory (default .)
    --out-file PATH        output file (snapshot)
    --format F             csv | json (decompose stdout, default json)

EXIT CODES:
    0 ok, 1 usage, 2 vacuum state, 3 parse error, 4 theorem violation,
    5 numerical failure";

fn fail_usage(msg: &str) -> ExitCode {
    eprintln!("error: {msg}\n\n{USAGE}");
    ExitCode::from(EXIT_USAGE as u8)
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some(command) = args.first().cloned() else {
        return fail_usage("missing command");
    };
    if command == "--help" || command == "-h" || command == "help" {
        println!("{USAGE}");
        return ExitCode::SUCCESS;
    }

    let mut flags: HashMap<String, String> = HashMap::new();
    let mut it = args[1..].iter();
    while let Some(arg) = it.next() {
        let Some(name) = arg.strip_prefix("--") else {
            return fail_usage(&format!("unexpected argument {arg:?}"));
        };
        let Some(value) = it.next() else {
            return fail_usage(&format!("flag --{name} needs a value"));
        };
        flags.insert(name.to_string(), value.clone());
    }

    let out_dir = PathBuf::from(flags.get("out").map(String::as_str).unwrap_or("."));
    let result = match command.as_str() {
        "moments" => {
            let Some(snap) = flags.get("snapshot") else {
                return fail_usage("moments needs --snapshot");
            };
            drivers::cmd_moments(Path::new(snap))
        }
        "decompose" => {
            let Some(snap) = flags.get("snapshot") else {
                return fail_usage("decompose needs --snapshot");
            };
            let (Some(nu), Some(theta)) = (parse_f64(&flags, "nu"), parse_f64(&flags, "theta"))
            else {
                return fail_usage("decompose needs numeric --nu and --theta");
            };
            let format = flags.get("format").map(String::as_str).unwrap_or("json");
            let out = flags.get("out").map(|_| out_dir.as_path());
            drivers::cmd_decompose(Path::new(snap), nu, theta, format, out)
        }
        "relax" | "slab" => {
            let Some(cfg_path) = flags.get("config") else {
                return fail_usage("relax/slab need --config");
            };
            match load_relax(cfg_path, &flags) {
                Ok(cfg) => {
                    if command == "relax" {
                        drivers::cmd_relax(&cfg, &out_dir)
                    } else {
                        drivers::cmd_slab(&cfg, &out_dir)
                    }
                }
                Err(e) => Err(e),
            }
        }
        "sweep" => {
            let Some(cfg_path) = flags.get("config") else {
                return fail_usage("sweep needs --config");
            };
            match SweepConfig::load(Path::new(cfg_path)) {
                Ok(mut cfg) => {
                    if let Some(seed) = parse_u64(&flags, "seed") {
                        cfg.seed = seed;
                    }
                    drivers::cmd_sweep(&cfg, &out_dir)
                }
                Err(e) => Err(e),
            }
        }
        "snapshot" => {
            let (Some(cfg_path), Some(out_file)) = (flags.get("config"), flags.get("out-file"))
            else {
                return fail_usage("snapshot needs --config and --out-file");
            };
            match SnapshotGenConfig::load(Path::new(cfg_path)) {
                Ok(cfg) => drivers::cmd_snapshot(&cfg, Path::new(out_file)),
                Err(e) => Err(e),
            }
        }
        other => return fail_usage(&format!("unknown command {other:?}")),
    };

    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_relax(cfg_path: &str, flags: &HashMap<String, String>) -> Result<RelaxConfig, CliError> {
    let mut cfg = RelaxConfig::load(Path::new(cfg_path))?;
    if let Some(seed) = parse_u64(flags, "seed") {
        cfg.seed = seed;
    }
    if let Some(preset) = flags.get("grid-preset") {
        let Some(preset) = GridPreset::parse(preset) else {
            return Err(CliError::Malformed(format!("unknown grid preset {preset:?}")));
        };
        cfg.run.grid = preset.apply(cfg.run.grid)?;
    }
    Ok(cfg)
}

fn parse_f64(flags: &HashMap<String, String>, name: &str) -> Option<f64> {
    flags.get(name).and_then(|s| s.parse().ok())
}

fn parse_u64(flags: &HashMap<String, String>, name: &str) -> Option<u64> {
    flags.get(name).and_then(|s| s.parse().ok())
}
