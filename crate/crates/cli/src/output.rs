//! CSV and JSON emission.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use nvhp_core::table::Table;
use serde_json::{json, Map, Value};

use crate::config::RunConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `x` with 12 significant digits, in the shorter of fixed or exponent form.
pub fn format_sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if !s.contains('.') {
        return s.to_string();
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// CSV body preceded by a `#` block that echoes the resolved config.
pub fn render_csv(table: &Table, cfg: &RunConfig) -> String {
    let mut out = String::new();
    out.push_str(&format!("# nvhp {VERSION}\n"));
    out.push_str(&format!("# experiment: {}\n", cfg.experiment));
    out.push_str(&format!("# seed: {}\n", cfg.seed));
    out.push_str("# config:\n");
    for line in cfg.to_toml().lines() {
        out.push_str("#   ");
        out.push_str(line);
        out.push('\n');
    }
    out.push_str(&table.columns().join(","));
    out.push('\n');
    for row in table.rows() {
        let cells: Vec<String> = row.iter().map(|&x| format_sig12(x)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn sidecar(
    table: &Table,
    cfg: &RunConfig,
    csv_name: &str,
    diagnostics: &Map<String, Value>,
    wall_clock_s: f64,
) -> Value {
    json!({
        "tool": "nvhp",
        "version": VERSION,
        "experiment": cfg.experiment.name(),
        "seed": cfg.seed,
        "config": cfg.to_toml(),
        "csv": csv_name,
        "columns": table.columns(),
        "rows": table.len(),
        "diagnostics": diagnostics,
        "wall_clock_s": wall_clock_s,
    })
}

pub struct Written {
    pub csv: PathBuf,
    pub json: PathBuf,
}

pub fn write_outputs(
    dir: &Path,
    table: &Table,
    cfg: &RunConfig,
    diagnostics: &Map<String, Value>,
    wall_clock_s: f64,
) -> io::Result<Written> {
    fs::create_dir_all(dir)?;
    let name = cfg.experiment.name();
    let csv = dir.join(format!("{name}.csv"));
    let json = dir.join(format!("{name}.json"));
    fs::write(&csv, render_csv(table, cfg))?;
    let meta = sidecar(
        table,
        cfg,
        &format!("{name}.csv"),
        diagnostics,
        wall_clock_s,
    );
    fs::write(&json, serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(Written { csv, json })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(format_sig12(1.0), "1");
        assert_eq!(format_sig12(-0.5), "-0.5");
        assert_eq!(format_sig12(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_sig12(2870.0), "2870");
        assert_eq!(format_sig12(123456.7890123456), "123456.789012");
        assert_eq!(format_sig12(1.936e18), "1.936e18");
        assert_eq!(format_sig12(2.5e-7), "2.5e-7");
        assert_eq!(format_sig12(0.99999999999999), "1");
        assert_eq!(format_sig12(0.0), "0");
    }

    #[test]
    fn csv_has_metadata_then_rows() {
        let cfg = crate::config::parse_config("experiment = \"totals\"").unwrap();
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![1.0, 0.25]).unwrap();
        let csv = render_csv(&t, &cfg);
        let body: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body, vec!["a,b", "1,0.25"]);
        assert!(csv.lines().any(|l| l == "# seed: 0"));
    }
}
