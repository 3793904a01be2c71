//! Flat key=value experiment configs with strict unknown-key detection, and
//! the typed builders for grids, obstacle sets, operators, and evolution
//! settings shared by the CLI subcommands.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::evolve::EvolveConfig;
use crate::fields::{GridSpec, ScalarField};
use crate::nonlocal::ObstacleSet;
use crate::operators::{Operator, SurfaceEnergy, ValueProfile};

/// Parsed config: consumed keys are tracked so that leftovers (typos) can be
/// rejected wholesale.
#[derive(Debug, Clone)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
    raw: String,
    base_dir: PathBuf,
}

impl ConfigMap {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", lineno + 1)))?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if entries.insert(key.clone(), value).is_some() {
                return Err(Error::Config(format!("duplicate key `{key}`")));
            }
        }
        Ok(ConfigMap { entries, raw: text.to_string(), base_dir: base_dir.to_path_buf() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        ConfigMap::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    pub fn take_or(&mut self, key: &str, default: &str) -> String {
        self.take(key).unwrap_or_else(|| default.to_string())
    }

    pub fn take_f64(&mut self, key: &str) -> Result<Option<f64>> {
        self.take(key)
            .map(|v| v.parse::<f64>().map_err(|e| Error::Config(format!("{key}: {e}"))))
            .transpose()
    }

    pub fn require_f64(&mut self, key: &str) -> Result<f64> {
        self.take_f64(key)?
            .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    }

    pub fn take_f64_or(&mut self, key: &str, default: f64) -> Result<f64> {
        Ok(self.take_f64(key)?.unwrap_or(default))
    }

    pub fn take_u64_or(&mut self, key: &str, default: u64) -> Result<u64> {
        self.take(key)
            .map(|v| v.parse::<u64>().map_err(|e| Error::Config(format!("{key}: {e}"))))
            .transpose()
            .map(|o| o.unwrap_or(default))
    }

    pub fn take_list_f64(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        self.take(key)
            .map(|v| {
                v.split(',')
                    .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Config(format!("{key}: {e}"))))
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()
    }

    pub fn take_list_usize(&mut self, key: &str) -> Result<Option<Vec<usize>>> {
        self.take(key)
            .map(|v| {
                v.split(',')
                    .map(|t| {
                        t.trim().parse::<usize>().map_err(|e| Error::Config(format!("{key}: {e}")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()
    }

    /// Errors if any key was never consumed (typo safety).
    pub fn finish(self) -> Result<()> {
        if self.entries.is_empty() {
            Ok(())
        } else {
            let keys: Vec<_> = self.entries.keys().cloned().collect();
            Err(Error::Config(format!("unknown keys: {}", keys.join(", "))))
        }
    }

    pub fn resolve_path(&self, rel: &str) -> PathBuf {
        let p = Path::new(rel);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

pub fn parse_grid(cfg: &mut ConfigMap) -> Result<GridSpec> {
    let lower = cfg
        .take_list_f64("grid.lower")?
        .ok_or_else(|| Error::Config("missing grid.lower".into()))?;
    let upper = cfg
        .take_list_f64("grid.upper")?
        .ok_or_else(|| Error::Config("missing grid.upper".into()))?;
    let counts = cfg
        .take_list_usize("grid.counts")?
        .ok_or_else(|| Error::Config("missing grid.counts".into()))?;
    GridSpec::new(lower, upper, counts)
}

pub fn parse_obstacle(cfg: &mut ConfigMap, grid: &GridSpec) -> Result<ObstacleSet> {
    match cfg.take_or("K.kind", "ball").as_str() {
        "ball" => {
            let center = cfg.take_list_f64("K.center")?.unwrap_or_else(|| vec![0.0; grid.dim()]);
            let radius = cfg.take_f64_or("K.radius", 1.0)?;
            ObstacleSet::ball(center, radius, grid)
        }
        "mask" => {
            let file = cfg
                .take("K.file")
                .ok_or_else(|| Error::Config("K.kind=mask needs K.file".into()))?;
            let path = cfg.resolve_path(&file);
            let field = ScalarField::read_snapshot(&path)?;
            if field.grid() != grid {
                return Err(Error::Config("mask grid does not match the experiment grid".into()));
            }
            ObstacleSet::mask_from_field(&field)
        }
        other => Err(Error::Config(format!("unknown K.kind `{other}`"))),
    }
}

fn parse_value_profile(text: &str) -> Result<ValueProfile> {
    let (name, arg) = text.split_once(':').unwrap_or((text, "0.0"));
    match name {
        "arctan_shifted" => {
            let shift =
                arg.parse::<f64>().map_err(|e| Error::Config(format!("op.V shift: {e}")))?;
            Ok(ValueProfile::ArctanShifted { shift })
        }
        other => Err(Error::Config(format!("unknown V profile `{other}`"))),
    }
}

pub fn parse_operator(cfg: &mut ConfigMap) -> Result<Operator> {
    let kind = cfg
        .take("op.kind")
        .ok_or_else(|| Error::Config("missing op.kind".into()))?;
    let op = match kind.as_str() {
        "nonlocal_eikonal" => Operator::nonlocal_eikonal(cfg.take_f64_or("op.b", 1.0)?)?,
        "aniso_flow" => {
            let gamma = cfg.take_or("op.gamma", "isotropic");
            if gamma != "isotropic" {
                return Err(Error::Config(format!(
                    "only the isotropic surface energy is available from configs, got `{gamma}`"
                )));
            }
            Operator::aniso_flow(
                cfg.take_f64_or("op.a", 0.0)?,
                cfg.take_f64_or("op.b", 0.0)?,
                cfg.take_f64_or("op.c", 0.0)?,
                SurfaceEnergy::Isotropic,
            )?
        }
        "u_dep_flow" => {
            let v = parse_value_profile(&cfg.take_or("op.V", "arctan_shifted:0.0"))?;
            Operator::u_dep_flow(v)?
        }
        "viscous_hj" => Operator::viscous_hj(
            cfg.take_f64_or("op.a_coef", 1.0)?,
            cfg.take_f64_or("op.alpha", 0.5)?,
        )?,
        other => return Err(Error::Config(format!("unknown op.kind `{other}`"))),
    };
    Ok(op)
}

pub fn parse_evolve(cfg: &mut ConfigMap) -> Result<EvolveConfig> {
    let mut e = EvolveConfig::new(cfg.require_f64("evolve.t_end")?);
    e.cfl_first = cfg.take_f64_or("evolve.cfl_first", e.cfl_first)?;
    e.cfl_second = cfg.take_f64_or("evolve.cfl_second", e.cfl_second)?;
    e.eps_grad = cfg.take_f64("evolve.eps_grad")?;
    e.snapshot_times = cfg.take_list_f64("evolve.snapshots")?.unwrap_or_default();
    e.c0 = cfg.take_f64_or("evolve.c0", 0.0)?;
    e.validate()?;
    Ok(e)
}

/// Named initial conditions for experiments driven purely by configs.
pub fn parse_initial(cfg: &mut ConfigMap, grid: &GridSpec) -> Result<ScalarField> {
    match cfg.take("init.profile") {
        Some(name) => initial_by_name(&name, grid),
        None => {
            let file = cfg
                .take("init.file")
                .ok_or_else(|| Error::Config("need init.profile or init.file".into()))?;
            let f = ScalarField::read_snapshot(&cfg.resolve_path(&file))?;
            if f.grid() != grid {
                return Err(Error::Config("init.file grid does not match".into()));
            }
            Ok(f)
        }
    }
}

pub fn initial_by_name(name: &str, grid: &GridSpec) -> Result<ScalarField> {
    let radial = |f: Box<dyn Fn(f64) -> f64 + Sync>| {
        ScalarField::from_fn(grid.clone(), move |x| {
            f(crate::matrix::norm(x))
        })
    };
    match name {
        // cone: |x| + 1
        "cone" => radial(Box::new(|r| r + 1.0)),
        // steepening cone: max(|x|, 2|x| - 1) + 1, quasiconvex but kinked
        "steep_cone" => radial(Box::new(|r| r.max(2.0 * r - 1.0) + 1.0)),
        // smooth coercive bowl
        "smooth_bowl" => radial(Box::new(|r| (r * r + 1.0).sqrt() + 0.2)),
        other => Err(Error::Config(format!("unknown init.profile `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ConfigMap {
        ConfigMap::parse(text, Path::new(".")).unwrap()
    }

    #[test]
    fn parse_and_consume_everything() {
        let mut c = cfg("grid.lower=-4,-4\ngrid.upper=4,4\ngrid.counts=41,41\n\
                         K.kind=ball\nK.center=0,0\nK.radius=1.0\n\
                         op.kind=nonlocal_eikonal\nop.b=1.0\n\
                         evolve.t_end=0.5\nevolve.snapshots=0.1,0.25\n");
        let g = parse_grid(&mut c).unwrap();
        assert_eq!(g.dim(), 2);
        let k = parse_obstacle(&mut c, &g).unwrap();
        assert!((k.measure_total - std::f64::consts::PI).abs() < 1e-12);
        let op = parse_operator(&mut c).unwrap();
        assert_eq!(op.name(), "nonlocal_eikonal");
        let e = parse_evolve(&mut c).unwrap();
        assert_eq!(e.snapshot_times, vec![0.1, 0.25]);
        c.finish().unwrap();
    }

    #[test]
    fn unknown_keys_are_errors() {
        let mut c = cfg("grid.lower=0\ngrid.upper=1\ngrid.counts=11\ngrid.typo=3");
        let _ = parse_grid(&mut c).unwrap();
        let err = c.finish().unwrap_err();
        assert!(format!("{err}").contains("grid.typo"));
    }

    #[test]
    fn duplicate_and_malformed_lines_rejected() {
        assert!(ConfigMap::parse("a=1\na=2", Path::new(".")).is_err());
        assert!(ConfigMap::parse("just a line", Path::new(".")).is_err());
        // comments and blanks are fine
        let c = ConfigMap::parse("# comment\n\na=1\n", Path::new(".")).unwrap();
        assert_eq!(c.entries.len(), 1);
    }

    #[test]
    fn operator_parsing_variants() {
        let mut c = cfg("op.kind=viscous_hj\nop.a_coef=2.0\nop.alpha=0.25");
        let op = parse_operator(&mut c).unwrap();
        assert_eq!(op.name(), "viscous_hj");
        c.finish().unwrap();

        let mut c = cfg("op.kind=u_dep_flow\nop.V=arctan_shifted:0.5");
        assert_eq!(parse_operator(&mut c).unwrap().name(), "u_dep_flow");
        c.finish().unwrap();

        let mut c = cfg("op.kind=warp_drive");
        assert!(parse_operator(&mut c).is_err());
    }
}
