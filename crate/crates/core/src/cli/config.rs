//! Flat `key = value` settings with dotted sections.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::data::{parse_f64, Datum};
use crate::dirichlet1d::{CheckOptions, SamplingPlan};
use crate::envelope::{Accelerator, SolverConfig, SweepOrder};
use crate::error::{Error, Result};
use crate::geometry::{Domain, Point};
use crate::kernel::{FractionalOrder, Normalization};
use crate::operator::{AnisotropyGrid, LineConfig, OperatorMode};

/// Environment variable naming the directory searched for relative config
/// paths and for `default.conf`.
pub const CONFIG_DIR_VAR: &str = "FRACENV_CONFIG_DIR";

/// Every recognised key with its default and a one-line description.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("domain", "ball:1.0", "interval:a,b | ball:r | ball:cx,cy,r | ellipse:cx,cy,a,b | square:cx,cy,hw | dumbbell[:lx,ly,rx,ry,r,neck]"),
    ("g", "constant:0.0", "exterior datum"),
    ("u", "", "function for operator-eval and check-convexity; empty means g, `envelope` solves first"),
    ("s", "0.5", "fractional order in (0,1)"),
    ("concave", "false", "compute the s-concave envelope instead"),
    ("threads", "0", "worker threads, 0 for all cores"),
    ("output.dir", "out", "directory receiving the output files"),
    ("solver.dx", "0.03125", "lattice spacing"),
    ("solver.directions", "64", "directions on the half circle"),
    ("solver.tolerance", "1e-8", "sweep change tolerance relative to osc(g)"),
    ("solver.residual_tolerance", "1e-3", "residual tolerance relative to osc(g)"),
    ("solver.max_sweeps", "100000", "value iteration sweep cap"),
    ("solver.sweep_order", "jacobi", "jacobi | gauss_seidel"),
    ("solver.relaxation", "1.0", "relaxation factor in (0,1]"),
    ("solver.accelerator", "policy", "policy | none"),
    ("solver.max_policies", "200", "policy iteration cap"),
    ("solver.inner_tolerance", "1e-13", "linear solve tolerance relative to the largest stencil mass"),
    ("solver.max_inner", "5000", "linear solver iteration cap"),
    ("solver.normalization", "unnormalized", "unnormalized | normalized kernel constant"),
    ("solver.line_margin", "8", "extra line nodes beyond the domain"),
    ("operator.mode", "full", "full | localized_union | localized_component"),
    ("operator.points", "100", "random interior points, or `lattice`"),
    ("operator.seed", "42", "seed for random points"),
    ("operator.radius", "0", "kernel truncation radius for localized modes, 0 for the domain diameter"),
    ("operator.a_max", "100", "largest stretch of the Monge-Ampere matrices"),
    ("operator.a_steps", "8", "geometric stretch steps on each side of 1"),
    ("operator.normalization", "normalized", "unnormalized | normalized kernel constant"),
    ("check.segments", "200", "random segments"),
    ("check.seed", "42", "seed for random segments"),
    ("check.min_length", "0.0625", "shortest random segment"),
    ("check.nodes", "63", "interior nodes per segment"),
    ("check.window", "2.0", "sampled exterior window, in segment lengths"),
    ("check.tolerance", "auto", "violation tolerance, `auto` for 10 h^(2-2s) osc(u)"),
    ("check.expect", "s_convex", "s_convex | not_s_convex | none"),
    ("dirichlet.x", "-1,0", "segment start"),
    ("dirichlet.y", "1,0", "segment end"),
    ("dirichlet.nodes", "511", "interior nodes"),
    ("dirichlet.window", "2.0", "sampled exterior window, in segment lengths"),
    ("scenario.levels", "16,32", "inverse spacings of the multi-resolution scenarios"),
    ("scenario.samples", "3", "random repetitions of sampling scenarios"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Default for Settings {
    fn default() -> Self {
        Self { values: KEYS.iter().map(|(k, v, _)| (k.to_string(), v.to_string())).collect() }
    }
}

impl Settings {
    /// Applies `key = value` lines; `#` starts a comment, `[section]` prefixes
    /// the following keys.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut section = String::new();
        for (n, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            let key = if section.is_empty() { k.trim().to_string() } else { format!("{section}.{}", k.trim()) };
            self.set(&key, unquote(v.trim()))?;
        }
        Ok(())
    }

    /// Applies the `config` object of a run manifest.
    pub fn apply_manifest(&mut self, text: &str) -> Result<()> {
        let json: serde_json::Value = serde_json::from_str(text)?;
        let map = json
            .get("config")
            .and_then(|c| c.as_object())
            .ok_or_else(|| Error::Config("manifest has no `config` object".into()))?;
        for (k, v) in map {
            let v = v.as_str().ok_or_else(|| Error::Config(format!("manifest value of {k} is not a string")))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Loads a file, resolving relative paths against the config directory
    /// when they do not exist as given.
    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let path = resolve(path);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        if text.trim_start().starts_with('{') {
            self.apply_manifest(&text)
        } else {
            self.apply_text(&text)
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_string();
                Ok(())
            }
            None => Err(Error::Config(format!("unknown key `{key}`"))),
        }
    }

    pub fn get(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn map(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        parse_f64(self.get(key)).map_err(|_| Error::Config(format!("{key} = `{}` is not a number", self.get(key))))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        self.get(key)
            .parse()
            .map_err(|_| Error::Config(format!("{key} = `{}` is not a count", self.get(key))))
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        self.get(key)
            .parse()
            .map_err(|_| Error::Config(format!("{key} = `{}` is not a seed", self.get(key))))
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            v => Err(Error::Config(format!("{key} = `{v}` is not a boolean"))),
        }
    }

    pub fn order(&self) -> Result<FractionalOrder> {
        FractionalOrder::new(self.f64("s")?).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn domain(&self) -> Result<Domain> {
        parse_domain(self.get("domain"))
    }

    pub fn datum(&self, key: &str) -> Result<Datum> {
        Datum::parse(self.get(key))
    }

    pub fn solver(&self) -> Result<SolverConfig> {
        let sweep_order = match self.get("solver.sweep_order") {
            "jacobi" => SweepOrder::Jacobi,
            "gauss_seidel" => SweepOrder::GaussSeidelLexicographic,
            v => return Err(Error::Config(format!("unknown sweep order `{v}`"))),
        };
        let accelerator = match self.get("solver.accelerator") {
            "none" => Accelerator::None,
            "policy" => Accelerator::PolicyIteration {
                max_policies: self.usize("solver.max_policies")?,
                inner_tolerance: self.f64("solver.inner_tolerance")?,
                max_inner: self.usize("solver.max_inner")?,
            },
            v => return Err(Error::Config(format!("unknown accelerator `{v}`"))),
        };
        Ok(SolverConfig {
            dx: self.f64("solver.dx")?,
            direction_count: self.usize("solver.directions")?,
            tolerance: self.f64("solver.tolerance")?,
            residual_tolerance: self.f64("solver.residual_tolerance")?,
            max_sweeps: self.usize("solver.max_sweeps")?,
            sweep_order,
            relaxation: self.f64("solver.relaxation")?,
            mode: OperatorMode::Full,
            accelerator,
            normalization: parse_normalization(self.get("solver.normalization"))?,
            line: LineConfig { margin: self.usize("solver.line_margin")?, ..LineConfig::default() },
        })
    }

    pub fn operator_mode(&self) -> Result<OperatorMode> {
        match self.get("operator.mode") {
            "full" => Ok(OperatorMode::Full),
            "localized_union" => Ok(OperatorMode::LocalizedUnion),
            "localized_component" => Ok(OperatorMode::LocalizedComponent),
            v => Err(Error::Config(format!("unknown operator mode `{v}`"))),
        }
    }

    pub fn operator_normalization(&self) -> Result<Normalization> {
        parse_normalization(self.get("operator.normalization"))
    }

    pub fn anisotropy(&self) -> Result<AnisotropyGrid> {
        AnisotropyGrid::new(self.f64("operator.a_max")?, self.usize("operator.a_steps")?)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn check_options(&self) -> Result<CheckOptions> {
        let tolerance = match self.get("check.tolerance") {
            "auto" => None,
            v => Some(parse_f64(v)?),
        };
        Ok(CheckOptions { nodes: self.usize("check.nodes")?, window: self.f64("check.window")?, tolerance })
    }

    pub fn sampling_plan(&self) -> Result<SamplingPlan> {
        Ok(SamplingPlan::Random {
            count: self.usize("check.segments")?,
            seed: self.u64("check.seed")?,
            min_length: self.f64("check.min_length")?,
        })
    }

    pub fn point(&self, key: &str) -> Result<Point> {
        match numbers(self.get(key))?.as_slice() {
            [x] => Ok(Point::new(*x, 0.0)),
            [x, y] => Ok(Point::new(*x, *y)),
            _ => Err(Error::Config(format!("{key} must be `x` or `x,y`"))),
        }
    }

    pub fn levels(&self) -> Result<Vec<f64>> {
        let v = numbers(self.get("scenario.levels"))?;
        if v.is_empty() || v.iter().any(|&n| !(n >= 2.0)) {
            return Err(Error::Config("scenario.levels needs inverse spacings of at least 2".into()));
        }
        Ok(v)
    }
}

fn parse_normalization(v: &str) -> Result<Normalization> {
    match v {
        "unnormalized" => Ok(Normalization::Unnormalized),
        "normalized" => Ok(Normalization::Normalized),
        v => Err(Error::Config(format!("unknown normalization `{v}`"))),
    }
}

fn numbers(s: &str) -> Result<Vec<f64>> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|x| parse_f64(x.trim())).collect()
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn unquote(v: &str) -> &str {
    v.strip_prefix('"').and_then(|v| v.strip_suffix('"')).unwrap_or(v)
}

fn resolve(path: &Path) -> PathBuf {
    if path.is_relative() && !path.exists() {
        if let Some(dir) = std::env::var_os(CONFIG_DIR_VAR) {
            let alt = Path::new(&dir).join(path);
            if alt.exists() {
                return alt;
            }
        }
    }
    path.to_path_buf()
}

/// Parses a domain spec such as `ball:1.0` or `interval:0,1`.
pub fn parse_domain(spec: &str) -> Result<Domain> {
    let (name, args) = match spec.trim().split_once(':') {
        Some((n, a)) => (n.trim(), numbers(a)?),
        None => (spec.trim(), Vec::new()),
    };
    let bad = || Error::Config(format!("bad domain `{spec}`"));
    let domain = match (name, args.as_slice()) {
        ("disk", []) => Ok(Domain::unit_disk()),
        ("ball", [r]) => Domain::ball(Point::origin(), *r),
        ("ball", [x, y, r]) => Domain::ball(Point::new(*x, *y), *r),
        ("interval", [a, b]) => Domain::interval(*a, *b),
        ("ellipse", [x, y, a, b]) => Domain::ellipse(Point::new(*x, *y), *a, *b),
        ("square", [x, y, h]) => Domain::square(Point::new(*x, *y), *h),
        ("dumbbell", []) => Ok(Domain::canonical_dumbbell()),
        ("dumbbell", [lx, ly, rx, ry, r, n]) => Domain::dumbbell(Point::new(*lx, *ly), Point::new(*rx, *ry), *r, *n),
        _ => return Err(bad()),
    };
    domain.map_err(|e| Error::Config(format!("bad domain `{spec}`: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_comments_and_overrides() {
        let mut s = Settings::default();
        s.apply_text("s = 0.25 # order\n[solver]\ndx = 0.0625\ndirections = 16\n\n[check]\nseed = \"7\"\n")
            .unwrap();
        assert_eq!(s.f64("s").unwrap(), 0.25);
        assert_eq!(s.solver().unwrap().dx, 0.0625);
        assert_eq!(s.solver().unwrap().direction_count, 16);
        assert_eq!(s.u64("check.seed").unwrap(), 7);
    }

    #[test]
    fn unknown_keys_and_bad_values_fail() {
        let mut s = Settings::default();
        assert!(s.apply_text("nonsense = 3").is_err());
        assert!(s.apply_text("just a line").is_err());
        s.set("solver.sweep_order", "sideways").unwrap();
        assert!(s.solver().is_err());
        s.set("s", "1.5").unwrap();
        assert!(s.order().is_err());
    }

    #[test]
    fn manifest_config_round_trips() {
        let mut s = Settings::default();
        s.set("g", "boundary_peak:0.0,0.2,0.5").unwrap();
        s.set("solver.dx", "0.015625").unwrap();
        let json = serde_json::json!({ "config": s.map() }).to_string();
        let mut t = Settings::default();
        t.apply_manifest(&json).unwrap();
        assert_eq!(s, t);
    }

    #[test]
    fn domains_parse() {
        assert_eq!(parse_domain("ball:1.0").unwrap(), Domain::unit_disk());
        assert_eq!(parse_domain("interval:0,1").unwrap().dimension(), 1);
        assert!(!parse_domain("dumbbell").unwrap().strictly_convex());
        assert!(parse_domain("ball:-1").is_err());
        assert!(parse_domain("triangle:1").is_err());
    }
}
