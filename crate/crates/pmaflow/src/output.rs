use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use pmaflow_core::{GridFunction, NodeClass};
use serde::Serialize;

/// Output directory; created on first use.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn new(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// One row per non-exterior node: `index, x0.., class, value`.
    pub fn nodes(&self, name: &str, u: &GridFunction) -> Result<PathBuf> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
        let g = u.grid();
        let m = 2 * g.dim();
        let mut head = vec!["index".to_string()];
        head.extend((0..m).map(|k| format!("x{k}")));
        head.extend(["class".into(), "value".into()]);
        w.write_record(&head)?;
        for i in 0..g.len() {
            let class = g.class(i);
            if class == NodeClass::Exterior {
                continue;
            }
            let x = g.coords(i);
            let mut row = vec![i.to_string()];
            row.extend(x[..m].iter().map(|v| v.to_string()));
            row.push(class.as_str().into());
            row.push(u.get(i).to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(path)
    }

    pub fn table<R: Serialize>(&self, name: &str, rows: impl IntoIterator<Item = R>) -> Result<PathBuf> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(path)
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.path(name);
        let text = serde_json::to_string_pretty(value)?;
        fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use pmaflow_core::{Discretization, DomainSpec};

    #[test]
    fn node_csv_skips_exterior() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutDir::new(dir.path()).unwrap();
        let d = Discretization::with_defaults(DomainSpec::ball(1, 1.0).unwrap(), 0.25).unwrap();
        let u = d.sample(|x| x[0]);
        let p = out.nodes("u.csv", &u).unwrap();
        let mut r = csv::Reader::from_path(p).unwrap();
        assert_eq!(r.headers().unwrap(), vec!["index", "x0", "x1", "class", "value"]);
        let rows: Vec<_> = r.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), d.grid.active().len());
        for row in rows {
            let x0: f64 = row[1].parse().unwrap();
            let v: f64 = row[4].parse().unwrap();
            assert_eq!(x0, v);
            assert_ne!(&row[3], "exterior");
        }
    }
}
