use std::io::Write;

use log::{Level, LevelFilter, Log, Metadata, Record};
use serde_json::json;

/// Writes log records to stderr, one JSON object per line under `--json`.
pub struct Logger {
    json: bool,
    level: LevelFilter,
}

impl Log for Logger {
    fn enabled(&self, metadata: &Metadata) -> bool {
        metadata.level() <= self.level
    }

    fn log(&self, record: &Record) {
        if !self.enabled(record.metadata()) {
            return;
        }
        let line = if self.json {
            json!({
                "level": record.level().as_str().to_lowercase(),
                "target": record.target(),
                "message": record.args().to_string(),
            })
            .to_string()
        } else if record.level() == Level::Info {
            record.args().to_string()
        } else {
            format!("{}: {}", record.level().as_str().to_lowercase(), record.args())
        };
        let _ = writeln!(std::io::stderr().lock(), "{line}");
    }

    fn flush(&self) {
        let _ = std::io::stderr().flush();
    }
}

pub fn init(json: bool, verbose: u8, quiet: bool) {
    let level = match (quiet, verbose) {
        (true, _) => LevelFilter::Warn,
        (false, 0) => LevelFilter::Info,
        (false, 1) => LevelFilter::Debug,
        _ => LevelFilter::Trace,
    };
    // A second call (tests running several commands) keeps the first logger.
    if log::set_boxed_logger(Box::new(Logger { json, level })).is_ok() {
        log::set_max_level(level);
    }
}
