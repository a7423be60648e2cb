//! Command-line surface: `sample`, `fit` and `validate` subcommands over the
//! CSV formats in [`io`].
//!
//! Exit codes: 0 on success, 1 when a validation experiment fails, 2 on
//! usage or I/O errors.

mod commands;
pub mod io;

use std::collections::BTreeMap;

/// A command failure carrying its process exit code.
pub(crate) struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub(crate) fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub(crate) fn validation(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        CliError { code: 2, message: e.to_string() }
    }
}

/// Simple `--flag value` argument map.
pub(crate) struct ArgMap {
    values: BTreeMap<String, String>,
}

impl ArgMap {
    fn parse(args: &[String]) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        let mut iter = args.iter();
        while let Some(flag) = iter.next() {
            let Some(name) = flag.strip_prefix("--") else {
                return Err(CliError::usage(format!("unexpected argument {flag:?}")));
            };
            let Some(value) = iter.next() else {
                return Err(CliError::usage(format!("flag --{name} needs a value")));
            };
            if values.insert(name.to_string(), value.clone()).is_some() {
                return Err(CliError::usage(format!("flag --{name} given twice")));
            }
        }
        Ok(Self { values })
    }

    pub(crate) fn get(&self, name: &str) -> Option<&str> {
        self.values.get(name).map(|s| s.as_str())
    }

    pub(crate) fn required(&self, name: &str) -> Result<&str, CliError> {
        self.get(name).ok_or_else(|| CliError::usage(format!("missing required flag --{name}")))
    }

    pub(crate) fn parsed<T: std::str::FromStr>(
        &self,
        name: &str,
        default: T,
    ) -> Result<T, CliError> {
        match self.get(name) {
            None => Ok(default),
            Some(s) => {
                s.parse().map_err(|_| CliError::usage(format!("bad value for --{name}: {s:?}")))
            }
        }
    }

    pub(crate) fn iter(&self) -> impl Iterator<Item = (&String, &String)> {
        self.values.iter()
    }
}

fn usage() -> String {
    "\
momgmm: moment-matching estimation for Gaussian mixtures

Usage: momgmm <command> [flags]

Commands:
  sample    --model <file> | --benchmark <n,m,sigma2>; --p <count>
            [--seed <u64>] --out <dir>
            Draw observations and write samples.csv, truth.csv, manifest.json.

  fit       --data <samples.csv> --m <components> [--d <order>]
            [--method mom|em] [--omega <w>] [--variant implicit|postprocess]
            [--mode moments|debias] [--sigma <file>] [--restarts <count>]
            [--seed <u64>] [--truth <file>] --out <dir>
            Fit a mixture and write fitted.csv, report.csv, manifest.json.

  validate  --experiment moments|debias|oracle|identities [--seed <u64>]
            [--out <dir>]
            Run a validation experiment; nonzero exit on failure.

Environment:
  MOMGMM_THREADS   caps worker threads (0 or unset = automatic).
"
    .to_string()
}

fn init_threads() {
    if let Ok(value) = std::env::var("MOMGMM_THREADS") {
        if let Ok(threads) = value.trim().parse::<usize>() {
            if threads > 0 {
                // Ignore the error if a pool already exists (e.g. in tests).
                let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
            }
        }
    }
}

/// Entry point; returns the process exit code.
pub fn run(args: Vec<String>) -> i32 {
    init_threads();
    let Some(command) = args.first() else {
        eprint!("{}", usage());
        return 2;
    };
    if command == "--help" || command == "help" {
        print!("{}", usage());
        return 0;
    }
    let parsed = match ArgMap::parse(&args[1..]) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {}", e.message);
            return e.code;
        }
    };
    let outcome = match command.as_str() {
        "sample" => commands::cmd_sample(&parsed),
        "fit" => commands::cmd_fit(&parsed),
        "validate" => commands::cmd_validate(&parsed),
        other => Err(CliError::usage(format!("unknown command {other:?}"))),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
