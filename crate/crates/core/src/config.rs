//! Scenario configuration: a flat map of dotted keys with typed defaults.
//!
//! Files are TOML, written either with `[section]` tables or dotted keys.
//! Key suffixes carry units: `_um` lengths and `_us` times must be
//! non-negative, `_rad` angles finite.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use toml::Value;

use crate::error::{Error, Result};

pub const SECTIONS: [&str; 6] = ["chip", "solver", "propagation", "ion", "sensor", "output"];

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Float,
    Int,
    Bool,
    Choice(&'static [&'static str]),
    FloatList,
    Text,
}

struct Key {
    name: &'static str,
    kind: Kind,
    default: &'static str,
    /// Must be given explicitly when a config file is used.
    required: bool,
}

const fn key(name: &'static str, kind: Kind, default: &'static str) -> Key {
    Key {
        name,
        kind,
        default,
        required: false,
    }
}

const fn required(name: &'static str, kind: Kind, default: &'static str) -> Key {
    Key {
        name,
        kind,
        default,
        required: true,
    }
}

const DESIGNS: &[&str] = &["spim", "conventional"];
const PROFILES: &[&str] = &["linear", "cosine"];
const DECOUPLING: &[&str] = &["none", "echo", "kdd"];
const ADDRESSING: &[&str] = &["single_global", "both_addressed"];

const KEYS: &[Key] = &[
    required("chip.design", Kind::Choice(DESIGNS), "\"spim\""),
    required("chip.n_channels", Kind::Int, "8"),
    required("chip.input_pitch_um", Kind::Float, "127.0"),
    required("chip.output_pitch_um", Kind::Float, "8.0"),
    required("chip.wavelength_um", Kind::Float, "0.532"),
    key("chip.len_straight_in_um", Kind::Float, "2200.0"),
    key("chip.len_curve_um", Kind::Float, "7200.0"),
    key("chip.len_straight_out_um", Kind::Float, "200.0"),
    key("chip.n_clad", Kind::Float, "1.51"),
    key("chip.contrast", Kind::Float, "0.015"),
    key("chip.sigma_x_um", Kind::Float, "0.35"),
    key("chip.sigma_y_um", Kind::Float, "0.7"),
    key("chip.conventional_contrast", Kind::Float, "0.006"),
    key("chip.conventional_sigma_um", Kind::Float, "1.0"),
    key("chip.grid_step_um", Kind::Float, "0.1"),
    key("chip.path_step_um", Kind::Float, "100.0"),
    key("solver.max_modes", Kind::Int, "1"),
    key("solver.grid_step_um", Kind::Float, "0.05"),
    key("solver.contrast_min", Kind::Float, "0.005"),
    key("solver.contrast_max", Kind::Float, "0.02"),
    key("solver.contrast_steps", Kind::Int, "4"),
    key("solver.vga_samples", Kind::Int, "2000"),
    key("solver.vga_offset_x_um", Kind::Float, "0.7"),
    key("solver.vga_offset_y_um", Kind::Float, "0.3"),
    key("propagation.dz_um", Kind::Float, "0.25"),
    key("propagation.absorber_width_um", Kind::Float, "5.0"),
    key("propagation.absorber_strength", Kind::Float, "6.0"),
    key("propagation.injected", Kind::Int, "3"),
    key("propagation.taper_lengths_um", Kind::FloatList, "[50.0, 2200.0]"),
    key("propagation.taper_profile", Kind::Choice(PROFILES), "\"linear\""),
    key("propagation.bend_radius_um", Kind::Float, "0.0"),
    key("propagation.bend_arc_um", Kind::Float, "7200.0"),
    required("ion.n_ions", Kind::Int, "8"),
    key("ion.mass_amu", Kind::Float, "137.0"),
    key("ion.axial_freq_mhz", Kind::Float, "1.0"),
    key("ion.alpha4", Kind::Float, "0.0"),
    key("ion.target_spacing_um", Kind::Float, "3.95"),
    key("ion.quartic", Kind::Bool, "true"),
    key("ion.magnification", Kind::Float, "0.5"),
    key("ion.chip_waist_um", Kind::Float, "0.95"),
    key("ion.diffraction_floor_um", Kind::Float, "0.532"),
    key("ion.blur_um", Kind::Float, "0.407279"),
    required("sensor.n_beams", Kind::Int, "8"),
    required("sensor.pitch_um", Kind::Float, "3.95"),
    required("sensor.waist_um", Kind::Float, "0.67"),
    key("sensor.crosstalk", Kind::Float, "5e-4"),
    key("sensor.scan_step_um", Kind::Float, "0.05"),
    key("sensor.scan_margin_um", Kind::Float, "2.5"),
    key("sensor.shots", Kind::Int, "100"),
    key("sensor.noise_sigma", Kind::Float, "0.0"),
    key("sensor.readout_error", Kind::Float, "0.0"),
    key("sensor.exact", Kind::Bool, "false"),
    key("sensor.tau0_us", Kind::Float, "1.0"),
    key("sensor.tau0_max_us", Kind::Float, "5000.0"),
    key("sensor.generations", Kind::Int, "8"),
    key("sensor.max_gap_us", Kind::Float, "500.0"),
    key("sensor.decoupling", Kind::Choice(DECOUPLING), "\"kdd\""),
    key("sensor.phase_rad", Kind::Float, "1.2345"),
    key("sensor.c_stark", Kind::Float, "1.0"),
    key("sensor.pair_crosstalk", Kind::FloatList, "[5e-4, 5e-4, 5e-4, 5e-4, 5e-4, 5e-4, 5e-4]"),
    key("sensor.addressing", Kind::Choice(ADDRESSING), "\"single_global\""),
    key("output.prefix", Kind::Text, "\"run\""),
];

fn key_def(name: &str) -> Option<&'static Key> {
    KEYS.iter().find(|k| k.name == name)
}

fn parse_value(raw: &str) -> Result<Value> {
    let doc = format!("v = {raw}");
    let mut t: toml::Table = doc.parse().map_err(|e: toml::de::Error| Error::Config(format!("cannot parse `{raw}`: {}", e.message())))?;
    Ok(t.remove("v").expect("single key"))
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, Value)>) {
    for (k, v) in table {
        let name = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&name, t, out),
            _ => out.push((name, v.clone())),
        }
    }
}

/// Resolved key/value map.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    values: BTreeMap<String, Value>,
    /// Keys given explicitly by a file or override.
    explicit: Vec<String>,
    from_file: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let values = KEYS
            .iter()
            .map(|k| (k.name.to_string(), parse_value(k.default).expect("built-in default parses")))
            .collect();
        Self {
            values,
            explicit: Vec::new(),
            from_file: false,
        }
    }
}

impl ScenarioConfig {
    /// Defaults overlaid with the keys of a TOML document.
    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        let mut flat = Vec::new();
        flatten("", &table, &mut flat);
        let mut cfg = Self {
            from_file: true,
            ..Self::default()
        };
        for (k, v) in flat {
            cfg.insert(&k, v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    fn insert(&mut self, key: &str, v: Value) -> Result<()> {
        let k = key_def(key).ok_or_else(|| Error::Config(format!("unknown key `{key}`")))?;
        let v = coerce(k, v)?;
        self.values.insert(key.to_string(), v);
        if !self.explicit.iter().any(|e| e == key) {
            self.explicit.push(key.to_string());
        }
        Ok(())
    }

    /// Applies `key=value`; the value uses TOML syntax, bare words are
    /// read as strings.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
        let (key, raw) = (key.trim(), raw.trim());
        let v = parse_value(raw).or_else(|_| parse_value(&format!("\"{raw}\"")))?;
        self.insert(key, v)
    }

    /// Type, unit and presence checks for the keys under `sections`.
    pub fn validate(&self, sections: &[&str]) -> Result<()> {
        for k in KEYS {
            let section = k.name.split('.').next().unwrap_or("");
            if !sections.contains(&section) {
                continue;
            }
            if k.required && self.from_file && !self.explicit.iter().any(|e| e == k.name) {
                return Err(Error::Config(format!("missing required key `{}`", k.name)));
            }
            check_units(k.name, &self.values[k.name])?;
        }
        Ok(())
    }

    fn get(&self, key: &str) -> &Value {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("`{key}` is not a configuration key"))
    }

    pub fn f64(&self, key: &str) -> f64 {
        match self.get(key) {
            Value::Float(f) => *f,
            Value::Integer(i) => *i as f64,
            v => panic!("`{key}` holds {v}"),
        }
    }

    pub fn usize(&self, key: &str) -> usize {
        match self.get(key) {
            Value::Integer(i) => *i as usize,
            v => panic!("`{key}` holds {v}"),
        }
    }

    pub fn bool(&self, key: &str) -> bool {
        self.get(key).as_bool().unwrap_or_else(|| panic!("`{key}` is not a bool"))
    }

    pub fn str(&self, key: &str) -> &str {
        self.get(key).as_str().unwrap_or_else(|| panic!("`{key}` is not a string"))
    }

    pub fn f64_list(&self, key: &str) -> Vec<f64> {
        match self.get(key) {
            Value::Array(a) => a
                .iter()
                .map(|v| v.as_float().or_else(|| v.as_integer().map(|i| i as f64)).unwrap_or(f64::NAN))
                .collect(),
            v => panic!("`{key}` holds {v}"),
        }
    }

    /// One `key = value` line per key, sorted; valid TOML.
    pub fn resolved(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.values {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

fn coerce(k: &Key, v: Value) -> Result<Value> {
    let bad = |v: &Value| Error::Config(format!("`{}` expects {:?}, got {v}", k.name, k.kind));
    let v = match (k.kind, v) {
        (Kind::Float, Value::Integer(i)) => Value::Float(i as f64),
        (Kind::Float, v @ Value::Float(_)) => v,
        (Kind::Int, Value::Integer(i)) if i >= 0 => Value::Integer(i),
        (Kind::Bool, v @ Value::Boolean(_)) => v,
        (Kind::Text, v @ Value::String(_)) => v,
        (Kind::Choice(options), Value::String(s)) => {
            if !options.contains(&s.as_str()) {
                return Err(Error::Config(format!("`{}` must be one of {options:?}, got \"{s}\"", k.name)));
            }
            Value::String(s)
        }
        (Kind::FloatList, Value::Array(a)) => {
            let mut out = Vec::with_capacity(a.len());
            for item in a {
                match item {
                    Value::Float(f) => out.push(Value::Float(f)),
                    Value::Integer(i) => out.push(Value::Float(i as f64)),
                    other => return Err(bad(&other)),
                }
            }
            Value::Array(out)
        }
        (_, v) => return Err(bad(&v)),
    };
    Ok(v)
}

fn check_units(name: &str, v: &Value) -> Result<()> {
    let numbers: Vec<f64> = match v {
        Value::Float(f) => vec![*f],
        Value::Integer(i) => vec![*i as f64],
        Value::Array(a) => a.iter().filter_map(|x| x.as_float()).collect(),
        _ => return Ok(()),
    };
    for x in numbers {
        if !x.is_finite() {
            return Err(Error::Config(format!("`{name}` must be finite, got {x}")));
        }
        if (name.ends_with("_um") || name.ends_with("_us")) && x < 0.0 {
            return Err(Error::Config(format!("`{name}` must be non-negative, got {x}")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_and_validate() {
        let c = ScenarioConfig::default();
        c.validate(&SECTIONS).unwrap();
        assert_eq!(c.usize("chip.n_channels"), 8);
        assert_eq!(c.f64("chip.output_pitch_um"), 8.0);
        let again = ScenarioConfig::from_toml(&c.resolved()).unwrap();
        assert_eq!(again.values, c.values);
    }

    #[test]
    fn sections_and_dotted_keys_both_work() {
        let a = ScenarioConfig::from_toml("[chip]\noutput_pitch_um = 10\n").unwrap();
        let b = ScenarioConfig::from_toml("chip.output_pitch_um = 10.0\n").unwrap();
        assert_eq!(a.f64("chip.output_pitch_um"), 10.0);
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn unknown_key_is_named() {
        let e = ScenarioConfig::from_toml("chip.pitch = 3").unwrap_err();
        assert!(e.to_string().contains("chip.pitch"));
        let mut c = ScenarioConfig::default();
        assert!(c.set("sensor.bogus=1").unwrap_err().to_string().contains("sensor.bogus"));
    }

    #[test]
    fn negative_lengths_fail() {
        let mut c = ScenarioConfig::default();
        c.set("chip.output_pitch_um=-8").unwrap();
        let e = c.validate(&["chip"]).unwrap_err();
        assert!(e.to_string().contains("chip.output_pitch_um"));
    }

    #[test]
    fn missing_required_key_in_a_file() {
        let c = ScenarioConfig::from_toml("[chip]\ninput_pitch_um = 127\n").unwrap();
        let e = c.validate(&["chip"]).unwrap_err();
        assert!(e.to_string().contains("missing required key `chip.design`"), "{e}");
        // other sections are not checked
        c.validate(&["propagation"]).unwrap();
    }

    #[test]
    fn overrides_parse_toml_values() {
        let mut c = ScenarioConfig::default();
        c.set("chip.design=conventional").unwrap();
        c.set("propagation.taper_lengths_um=[100, 200]").unwrap();
        c.set("ion.quartic = false").unwrap();
        assert_eq!(c.str("chip.design"), "conventional");
        assert_eq!(c.f64_list("propagation.taper_lengths_um"), vec![100.0, 200.0]);
        assert!(!c.bool("ion.quartic"));
        assert!(c.set("chip.design=round").is_err());
        assert!(c.set("chip.n_channels=2.5").is_err());
    }
}
