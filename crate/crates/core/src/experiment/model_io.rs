//! Plain-text persistence of a fitted model together with its embedding, so
//! that held-out data can be scored later.
//!
//! Floats are written with the shortest round-trip representation, so a
//! saved model reloads bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::csda::SubspaceModel;
use crate::error::{Error, Result};
use crate::kernel::{npt_transform, CenteringStats, KernelSpec, NptModel};

const MAGIC: &str = "csda-model 1";

#[derive(Clone, Debug)]
pub struct SavedModel {
    pub positive_class: i64,
    pub model: SubspaceModel,
    /// Positive mean in the embedded space, where the model lives.
    pub positive_mean: DVector<f64>,
    pub embedding: Option<NptModel>,
}

impl SavedModel {
    /// Maps raw samples into the space the projection expects.
    pub fn embed(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match &self.embedding {
            None => Ok(x.clone()),
            Some(npt) => npt_transform(npt, x),
        }
    }
}

fn put_matrix(out: &mut String, name: &str, m: &DMatrix<f64>) {
    writeln!(out, "matrix {name} {} {}", m.nrows(), m.ncols()).unwrap();
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(f64::to_string).collect();
        writeln!(out, "{}", line.join(",")).unwrap();
    }
}

fn put_vector(out: &mut String, name: &str, v: &DVector<f64>) {
    let line: Vec<String> = v.iter().map(f64::to_string).collect();
    writeln!(out, "vector {name} {}", v.len()).unwrap();
    writeln!(out, "{}", line.join(",")).unwrap();
}

pub fn format_model(m: &SavedModel) -> String {
    let mut out = format!("{MAGIC}\n");
    writeln!(out, "method {}", m.model.method_tag).unwrap();
    writeln!(out, "positive_class {}", m.positive_class).unwrap();
    match m.embedding.as_ref().map(|e| e.kernel) {
        None => out.push_str("kernel none\n"),
        Some(KernelSpec::Linear) => out.push_str("kernel linear\n"),
        Some(KernelSpec::Rbf { sigma }) => writeln!(out, "kernel rbf {sigma}").unwrap(),
    }
    put_matrix(&mut out, "projection", &m.model.projection);
    put_vector(&mut out, "ranking", &m.model.ranking_values);
    put_vector(&mut out, "positive_mean", &m.positive_mean);
    if let Some(e) = &m.embedding {
        put_matrix(&mut out, "train_data", &e.train_data);
        put_vector(&mut out, "eig_values", &e.eig_values);
        put_matrix(&mut out, "eig_vectors", &e.eig_vectors);
        put_vector(&mut out, "row_means", &e.stats.row_means);
        put_vector(
            &mut out,
            "grand_mean",
            &DVector::from_element(1, e.stats.grand_mean),
        );
    }
    out
}

struct Reader<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Reader<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        self.lines
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| Error::Parse {
                line: 0,
                message: "unexpected end of model file".into(),
            })
    }

    fn field(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let (n, l) = self.next()?;
        l.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .map(|r| (n, r))
            .ok_or_else(|| Error::Parse {
                line: n,
                message: format!("expected '{key}'"),
            })
    }

    fn numbers(&mut self, expected: usize) -> Result<Vec<f64>> {
        let (n, l) = self.next()?;
        let v = l
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|_| Error::Parse {
                line: n,
                message: "bad number".into(),
            })?;
        if v.len() != expected {
            return Err(Error::Parse {
                line: n,
                message: format!("expected {expected} values, found {}", v.len()),
            });
        }
        Ok(v)
    }

    fn header(&mut self, kind: &str, name: &str) -> Result<Vec<usize>> {
        let (n, rest) = self.field(kind)?;
        let mut parts = rest.split_whitespace();
        if parts.next() != Some(name) {
            return Err(Error::Parse {
                line: n,
                message: format!("expected {kind} '{name}'"),
            });
        }
        parts
            .map(|p| p.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::Parse {
                line: n,
                message: "bad size".into(),
            })
    }

    fn matrix(&mut self, name: &str) -> Result<DMatrix<f64>> {
        let dims = self.header("matrix", name)?;
        let (r, c) = (dims[0], dims[1]);
        let mut data = Vec::with_capacity(r * c);
        for _ in 0..r {
            data.extend(self.numbers(c)?);
        }
        Ok(DMatrix::from_row_slice(r, c, &data))
    }

    fn vector(&mut self, name: &str) -> Result<DVector<f64>> {
        let dims = self.header("vector", name)?;
        Ok(DVector::from_vec(self.numbers(dims[0])?))
    }
}

pub fn parse_model(text: &str) -> Result<SavedModel> {
    let mut r = Reader {
        lines: text.lines().enumerate(),
    };
    let (n, magic) = r.next()?;
    if magic != MAGIC {
        return Err(Error::Parse {
            line: n,
            message: "not a model file".into(),
        });
    }
    let tag = r.field("method")?.1.to_string();
    let (n, class) = r.field("positive_class")?;
    let positive_class = class.parse().map_err(|_| Error::Parse {
        line: n,
        message: "bad class id".into(),
    })?;
    let (n, kernel) = r.field("kernel")?;
    let kernel = match kernel.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["none"] => None,
        ["linear"] => Some(KernelSpec::Linear),
        ["rbf", s] => Some(KernelSpec::Rbf {
            sigma: s.parse().map_err(|_| Error::Parse {
                line: n,
                message: "bad sigma".into(),
            })?,
        }),
        _ => {
            return Err(Error::Parse {
                line: n,
                message: "unknown kernel".into(),
            })
        }
    };
    let projection = r.matrix("projection")?;
    let ranking = r.vector("ranking")?;
    let positive_mean = r.vector("positive_mean")?;
    let embedding = match kernel {
        None => None,
        Some(kernel) => Some(NptModel {
            train_data: r.matrix("train_data")?,
            kernel,
            eig_values: r.vector("eig_values")?,
            eig_vectors: r.matrix("eig_vectors")?,
            stats: CenteringStats {
                row_means: r.vector("row_means")?,
                grand_mean: r.vector("grand_mean")?[0],
            },
        }),
    };
    Ok(SavedModel {
        positive_class,
        model: SubspaceModel::new(projection, ranking, tag)?,
        positive_mean,
        embedding,
    })
}

pub fn save_model(path: &Path, m: &SavedModel) -> Result<()> {
    fs::write(path, format_model(m))
        .map_err(|e| Error::from(e).context(format!("writing {}", path.display())))
}

pub fn load_model(path: &Path) -> Result<SavedModel> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
    parse_model(&text).map_err(|e| e.context(path.display().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::npt_fit;
    use crate::linalg::testutil::gaussian;
    use crate::linalg::ZeroThreshold;

    #[test]
    fn round_trip_is_exact() {
        let x = gaussian(3, 6, 1).map(|v| v + 5.0);
        let npt = npt_fit(&x, KernelSpec::Rbf { sigma: 1.7 }, ZeroThreshold::default()).unwrap();
        let w = gaussian(npt.dim(), 2, 2);
        let saved = SavedModel {
            positive_class: 3,
            model: SubspaceModel::new(w, DVector::from_vec(vec![2.5, -1e-300]), "ocsda-svdn+qr")
                .unwrap(),
            positive_mean: gaussian(npt.dim(), 1, 3).column(0).into_owned(),
            embedding: Some(npt),
        };
        let text = format_model(&saved);
        let back = parse_model(&text).unwrap();
        assert_eq!(format_model(&back), text);
        assert_eq!(back.model.projection, saved.model.projection);
        let probe = gaussian(3, 4, 9);
        assert_eq!(back.embed(&probe).unwrap(), saved.embed(&probe).unwrap());
    }

    #[test]
    fn rejects_foreign_files() {
        assert!(matches!(
            parse_model("hello\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
