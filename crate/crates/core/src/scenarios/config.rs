use crate::error::{Error, Result};
use crate::mesh::{
    build_cylinder, build_disk, build_icosahedral_sphere, build_periodic_square, io, Mesh, StructuredPlane,
};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// `key = value` settings, one per line. `#` starts a comment.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScenarioConfig {
    entries: BTreeMap<String, String>,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: n + 1, message: format!("expected `key = value`, got `{line}`") })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(Error::Parse { line: n + 1, message: "empty key".into() });
            }
            if entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::Parse { line: n + 1, message: format!("duplicate key `{k}`") });
            }
        }
        Ok(Self { entries })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.insert(key.into(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Rejects keys outside `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.entries.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(Error::param(format!("unknown key `{k}` (expected one of: {})", allowed.join(", ")))),
            None => Ok(()),
        }
    }

    pub fn value_or<V: FromStr>(&self, key: &str, default: V) -> Result<V> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Error::param(format!("cannot parse `{key} = {v}`"))),
        }
    }

    pub fn list_or<V: FromStr>(&self, key: &str, default: Vec<V>) -> Result<Vec<V>> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| Error::param(format!("cannot parse `{key} = {v}`"))))
                .collect(),
        }
    }
}

/// Mesh selection as written on the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum MeshSpec {
    /// `periodic:n`, the unit doubly periodic square.
    Periodic(usize),
    /// `plane:n`, the unit square with walls.
    Plane(usize),
    /// `channel:n`, unit square periodic in x.
    Channel(usize),
    /// `icosa:level` on the unit sphere.
    Icosa(u32),
    /// `cylinder:na,nz`, radius 1 and height 2.
    Cylinder(usize, usize),
    /// `disk:rings`, the graded unit disk.
    Disk(usize),
    File(PathBuf),
}

impl MeshSpec {
    pub fn build(&self) -> Result<Mesh> {
        match self {
            Self::Periodic(n) => build_periodic_square(*n, 1.0, 1.0),
            Self::Plane(n) => StructuredPlane::new(*n, *n, 1.0, 1.0).build(),
            Self::Channel(n) => StructuredPlane::new(*n, *n, 1.0, 1.0).periodic(true, false).build(),
            Self::Icosa(level) => build_icosahedral_sphere(*level, 1.0),
            Self::Cylinder(na, nz) => build_cylinder(*na, *nz, 1.0, 2.0),
            Self::Disk(rings) => build_disk(*rings, 1.0, DISK_GRADING),
            Self::File(p) => io::read_mesh(p),
        }
    }
}

pub(crate) const DISK_GRADING: f64 = 0.6;

impl FromStr for MeshSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = s.split_once(':').ok_or_else(|| Error::param(format!("mesh spec `{s}` needs `kind:args`")))?;
        let bad = || Error::param(format!("bad mesh spec `{s}`"));
        let num = |a: &str| a.trim().parse::<usize>().map_err(|_| bad());
        Ok(match kind {
            "periodic" => Self::Periodic(num(arg)?),
            "plane" => Self::Plane(num(arg)?),
            "channel" => Self::Channel(num(arg)?),
            "icosa" => Self::Icosa(arg.trim().parse().map_err(|_| bad())?),
            "cylinder" => {
                let (a, z) = arg.split_once(',').ok_or_else(bad)?;
                Self::Cylinder(num(a)?, num(z)?)
            }
            "disk" => Self::Disk(num(arg)?),
            "file" if !arg.is_empty() => Self::File(PathBuf::from(arg)),
            _ => return Err(bad()),
        })
    }
}

impl fmt::Display for MeshSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Periodic(n) => write!(f, "periodic:{n}"),
            Self::Plane(n) => write!(f, "plane:{n}"),
            Self::Channel(n) => write!(f, "channel:{n}"),
            Self::Icosa(l) => write!(f, "icosa:{l}"),
            Self::Cylinder(a, z) => write!(f, "cylinder:{a},{z}"),
            Self::Disk(r) => write!(f, "disk:{r}"),
            Self::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_and_comments() {
        let c = ScenarioConfig::parse("# header\nsteps = 10\n dt=0.5 # inline\n\nsizes = 8, 16\n").unwrap();
        assert_eq!(c.value_or("steps", 0usize).unwrap(), 10);
        assert_eq!(c.value_or("dt", 0.0).unwrap(), 0.5);
        assert_eq!(c.list_or::<usize>("sizes", vec![]).unwrap(), vec![8, 16]);
        assert_eq!(c.value_or("missing", 3u32).unwrap(), 3);
        assert!(c.check_keys(&["steps", "dt", "sizes"]).is_ok());
        assert!(c.check_keys(&["steps"]).is_err());
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(matches!(ScenarioConfig::parse("a = 1\nnonsense"), Err(Error::Parse { line: 2, .. })));
        assert!(ScenarioConfig::parse("a = 1\na = 2").is_err());
        assert!(ScenarioConfig::parse("a = x").unwrap().value_or("a", 1.0).is_err());
    }

    #[test]
    fn mesh_specs_round_trip() {
        for s in ["periodic:4", "plane:3", "channel:8", "icosa:2", "cylinder:12,4", "disk:5", "file:/tmp/m.msh"] {
            assert_eq!(s.parse::<MeshSpec>().unwrap().to_string(), s);
        }
        for s in ["periodic", "periodic:x", "cylinder:3", "torus:2", "file:"] {
            assert!(s.parse::<MeshSpec>().is_err(), "{s}");
        }
        assert_eq!(MeshSpec::Periodic(3).build().unwrap().n_cells(), 18);
    }
}
