//! Plain-text synth spec files.
//!
//! ```text
//! # comment
//! axis1 = -10 10 101        # q_min q_max points
//! axis2 = -10 10 101
//! axis3 = -25 25 101
//! noise_floor = 1e-4
//! seed = 42
//! primitive = gaussian_peak center=0,0,0 sigma=0.3,0.3,0.8 amplitude=0.01
//! primitive = cone_shell apex=0,0,0 axis=0,0,1 half_angle_deg=40 thickness=0.3 extent=3.5 amplitude=1e-3
//! primitive = bar center=8,8,0 axis=0,0,1 length=20 radius=0.4 amplitude=1e-3
//! primitive = broomstick base=0,0,10 direction=0,0,1 length=15 spread=0.15 width=0.2 amplitude=1e-3
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{Primitive, SynthSpec};
use crate::error::{Error, Result};
use crate::volume::AxisSpec;

fn config_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Config { line, msg: msg.into() }
}

fn number(line: usize, s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| config_err(line, format!("not a number: {s:?}")))
}

fn vector(line: usize, s: &str) -> Result<[f64; 3]> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(config_err(line, format!("expected 3 comma-separated values, got {s:?}")));
    }
    Ok([number(line, parts[0])?, number(line, parts[1])?, number(line, parts[2])?])
}

struct Fields<'a> {
    line: usize,
    map: HashMap<&'a str, &'a str>,
}

impl<'a> Fields<'a> {
    fn take(&mut self, key: &str) -> Result<&'a str> {
        self.map.remove(key).ok_or_else(|| config_err(self.line, format!("missing `{key}`")))
    }

    fn num(&mut self, key: &str) -> Result<f64> {
        let v = self.take(key)?;
        number(self.line, v)
    }

    fn vec3(&mut self, key: &str) -> Result<[f64; 3]> {
        let v = self.take(key)?;
        vector(self.line, v)
    }

    fn finish(self) -> Result<()> {
        match self.map.keys().next() {
            Some(k) => Err(config_err(self.line, format!("unknown parameter `{k}`"))),
            None => Ok(()),
        }
    }
}

fn parse_primitive(line: usize, value: &str) -> Result<Primitive> {
    let mut words = value.split_whitespace();
    let kind = words.next().ok_or_else(|| config_err(line, "empty primitive"))?;
    let mut map = HashMap::new();
    for word in words {
        let (k, v) = word.split_once('=').ok_or_else(|| config_err(line, format!("expected key=value, got {word:?}")))?;
        if map.insert(k, v).is_some() {
            return Err(config_err(line, format!("duplicate parameter `{k}`")));
        }
    }
    let mut f = Fields { line, map };
    let prim = match kind {
        "gaussian_peak" => {
            Primitive::GaussianPeak { center: f.vec3("center")?, sigma: f.vec3("sigma")?, amplitude: f.num("amplitude")? }
        }
        "cone_shell" => Primitive::ConeShell {
            apex: f.vec3("apex")?,
            axis: f.vec3("axis")?,
            half_angle_deg: f.num("half_angle_deg")?,
            thickness: f.num("thickness")?,
            extent: f.num("extent")?,
            amplitude: f.num("amplitude")?,
        },
        "bar" => Primitive::Bar {
            center: f.vec3("center")?,
            axis: f.vec3("axis")?,
            length: f.num("length")?,
            radius: f.num("radius")?,
            amplitude: f.num("amplitude")?,
        },
        "broomstick" => Primitive::Broomstick {
            base: f.vec3("base")?,
            direction: f.vec3("direction")?,
            length: f.num("length")?,
            spread: f.num("spread")?,
            width: f.num("width")?,
            amplitude: f.num("amplitude")?,
        },
        other => return Err(config_err(line, format!("unknown primitive `{other}`"))),
    };
    f.finish()?;
    Ok(prim)
}

pub fn parse_spec(text: &str) -> Result<SynthSpec> {
    let mut axes: [Option<AxisSpec>; 3] = [None; 3];
    let mut noise_floor = None;
    let mut seed = None;
    let mut primitives = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| config_err(line, "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "axis1" | "axis2" | "axis3" => {
                let k = (key.as_bytes()[4] - b'1') as usize;
                let parts: Vec<&str> = value.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(config_err(line, "axis needs `q_min q_max points`"));
                }
                let n = parts[2].parse().map_err(|_| config_err(line, format!("bad point count {:?}", parts[2])))?;
                let axis = AxisSpec::new(number(line, parts[0])?, number(line, parts[1])?, n)
                    .map_err(|e| config_err(line, e.to_string()))?;
                if axes[k].replace(axis).is_some() {
                    return Err(config_err(line, format!("duplicate `{key}`")));
                }
            }
            "noise_floor" => noise_floor = Some(number(line, value)?),
            "seed" => seed = Some(value.parse().map_err(|_| config_err(line, format!("bad seed {value:?}")))?),
            "primitive" => primitives.push(parse_primitive(line, value)?),
            other => return Err(config_err(line, format!("unknown key `{other}`"))),
        }
    }

    let end = text.lines().count();
    let mut resolved = [AxisSpec { q_min: 0.0, q_max: 0.0, n: 0 }; 3];
    for k in 0..3 {
        resolved[k] = axes[k].ok_or_else(|| config_err(end, format!("missing `axis{}`", k + 1)))?;
    }
    let spec = SynthSpec {
        axes: resolved,
        noise_floor: noise_floor.unwrap_or(0.0),
        seed: seed.unwrap_or(0),
        primitives,
    };
    spec.validate()?;
    Ok(spec)
}

pub fn load_spec(path: impl AsRef<Path>) -> Result<SynthSpec> {
    parse_spec(&std::fs::read_to_string(path)?)
}

fn v3(v: [f64; 3]) -> String {
    format!("{:?},{:?},{:?}", v[0], v[1], v[2])
}

/// Renders a spec in the config syntax; `parse_spec` reads it back exactly.
pub fn format_spec(spec: &SynthSpec) -> String {
    let mut out = String::new();
    for (k, a) in spec.axes.iter().enumerate() {
        let _ = writeln!(out, "axis{} = {:?} {:?} {}", k + 1, a.q_min, a.q_max, a.n);
    }
    let _ = writeln!(out, "noise_floor = {:?}", spec.noise_floor);
    let _ = writeln!(out, "seed = {}", spec.seed);
    for p in &spec.primitives {
        let _ = match *p {
            Primitive::GaussianPeak { center, sigma, amplitude } => writeln!(
                out,
                "primitive = gaussian_peak center={} sigma={} amplitude={amplitude:?}",
                v3(center),
                v3(sigma)
            ),
            Primitive::ConeShell { apex, axis, half_angle_deg, thickness, extent, amplitude } => writeln!(
                out,
                "primitive = cone_shell apex={} axis={} half_angle_deg={half_angle_deg:?} thickness={thickness:?} \
                 extent={extent:?} amplitude={amplitude:?}",
                v3(apex),
                v3(axis)
            ),
            Primitive::Bar { center, axis, length, radius, amplitude } => writeln!(
                out,
                "primitive = bar center={} axis={} length={length:?} radius={radius:?} amplitude={amplitude:?}",
                v3(center),
                v3(axis)
            ),
            Primitive::Broomstick { base, direction, length, spread, width, amplitude } => writeln!(
                out,
                "primitive = broomstick base={} direction={} length={length:?} spread={spread:?} width={width:?} \
                 amplitude={amplitude:?}",
                v3(base),
                v3(direction)
            ),
        };
    }
    out
}
