//! Pre-trained word vectors in the fastText `.vec` text format and their
//! PCA compression.

use std::collections::HashSet;
use std::io::BufRead;

use indexmap::IndexMap;
use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{s, Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};
use crate::parallel::{chunked_sum, Exec};
use crate::vocab::KnownForms;

/// Word vectors keyed by surface form.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    forms: IndexMap<String, usize>,
    /// One row per form.
    vectors: Array2<f64>,
    unknown: Array1<f64>,
}

impl EmbeddingTable {
    pub fn new(forms: Vec<String>, vectors: Array2<f64>, unknown: Array1<f64>) -> Result<Self> {
        if forms.len() != vectors.nrows() {
            return Err(Error::LengthMismatch {
                expected: vectors.nrows(),
                actual: forms.len(),
            });
        }
        if unknown.len() != vectors.ncols() {
            return Err(Error::LengthMismatch {
                expected: vectors.ncols(),
                actual: unknown.len(),
            });
        }
        let forms = forms.into_iter().enumerate().map(|(i, f)| (f, i)).collect();
        Ok(EmbeddingTable {
            forms,
            vectors,
            unknown,
        })
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    pub fn get(&self, form: &str) -> Option<ArrayView1<'_, f64>> {
        self.forms.get(form).map(|&i| self.vectors.row(i))
    }

    /// Vector for `form`, falling back to the unknown vector.
    pub fn lookup(&self, form: &str) -> ArrayView1<'_, f64> {
        self.get(form).unwrap_or_else(|| self.unknown.view())
    }

    pub fn unknown_vector(&self) -> ArrayView1<'_, f64> {
        self.unknown.view()
    }

    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }

    pub fn forms(&self) -> impl Iterator<Item = &str> {
        self.forms.keys().map(String::as_str)
    }
}

impl KnownForms for EmbeddingTable {
    fn contains_form(&self, form: &str) -> bool {
        self.forms.contains_key(form)
    }
}

fn emb_err(line: usize, message: impl Into<String>) -> Error {
    Error::Embedding {
        line,
        message: message.into(),
    }
}

/// Read vectors in the `.vec` text format: an optional `count dim` header,
/// then one `token v1 .. vdim` line per word.
///
/// With `restrict_to`, only the listed forms are kept. The unknown vector is
/// the mean of the kept vectors.
pub fn load_vectors<R: BufRead>(reader: R, restrict_to: Option<&HashSet<String>>) -> Result<EmbeddingTable> {
    let mut dim: Option<usize> = None;
    let mut forms = Vec::new();
    let mut seen = HashSet::new();
    let mut data = Vec::new();

    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(' ');
        let word = parts.next().unwrap_or_default();
        let rest: Vec<&str> = parts.filter(|p| !p.is_empty()).collect();

        if line_no == 1 && rest.len() == 1 {
            if let (Ok(_), Ok(d)) = (word.parse::<usize>(), rest[0].parse::<usize>()) {
                dim = Some(d);
                continue;
            }
        }
        let expected = *dim.get_or_insert(rest.len());
        if rest.len() != expected {
            return Err(emb_err(
                line_no,
                format!("expected {expected} values, found {}", rest.len()),
            ));
        }
        let mut values = Vec::with_capacity(expected);
        for v in &rest {
            values.push(
                v.parse::<f64>()
                    .map_err(|_| emb_err(line_no, format!("non-numeric value `{v}`")))?,
            );
        }
        if restrict_to.is_some_and(|r| !r.contains(word)) || !seen.insert(word.to_string()) {
            continue;
        }
        forms.push(word.to_string());
        data.extend(values);
    }

    let dim = dim.unwrap_or(0);
    let vectors = Array2::from_shape_vec((forms.len(), dim), data)
        .map_err(|e| emb_err(0, e.to_string()))?;
    let unknown = vectors
        .mean_axis(Axis(0))
        .unwrap_or_else(|| Array1::zeros(dim));
    EmbeddingTable::new(forms, vectors, unknown)
}

/// A fitted principal component projection.
#[derive(Clone, Debug)]
pub struct Pca {
    pub mean: Array1<f64>,
    /// One component per row, ordered by descending explained variance.
    pub components: Array2<f64>,
    /// Variance along each retained component.
    pub explained_variance: Vec<f64>,
    /// Variance along every component of the input space.
    pub all_variances: Vec<f64>,
}

const COV_CHUNKS: usize = 16;

impl Pca {
    /// Fit on the rows of `data`.
    pub fn fit(data: &Array2<f64>, out_dim: usize, exec: Exec) -> Result<Pca> {
        let (n, dim) = data.dim();
        if out_dim == 0 || out_dim > dim {
            return Err(Error::Config(format!(
                "cannot project {dim}-dimensional vectors to {out_dim} dimensions"
            )));
        }
        if n < 2 {
            return Err(Error::RankDeficient {
                rank: 0,
                requested: out_dim,
            });
        }
        let mean = data.mean_axis(Axis(0)).expect("non-empty");

        let rows: Vec<usize> = (0..n).collect();
        let scatter = chunked_sum(
            exec,
            &rows,
            COV_CHUNKS,
            |idx| {
                let block = data.slice(s![idx[0]..idx[0] + idx.len(), ..]).to_owned() - &mean;
                block.t().dot(&block)
            },
            |a, b| a + b,
        )
        .expect("non-empty");
        let cov = scatter / (n as f64 - 1.0);

        let sym = DMatrix::from_fn(dim, dim, |i, j| 0.5 * (cov[[i, j]] + cov[[j, i]]));
        let eig = SymmetricEigen::new(sym);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));

        let all_variances: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();
        let top = all_variances[0];
        let tol = top * 1e-10 * dim as f64;
        let rank = all_variances.iter().filter(|&&v| v > tol).count();
        if out_dim > rank {
            return Err(Error::RankDeficient {
                rank,
                requested: out_dim,
            });
        }

        let mut components = Array2::zeros((out_dim, dim));
        for (row, &k) in order.iter().take(out_dim).enumerate() {
            let v = eig.eigenvectors.column(k);
            let mut pivot = 0;
            for i in 1..dim {
                if v[i].abs() > v[pivot].abs() {
                    pivot = i;
                }
            }
            let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
            for i in 0..dim {
                components[[row, i]] = sign * v[i];
            }
        }
        Ok(Pca {
            mean,
            explained_variance: all_variances[..out_dim].to_vec(),
            all_variances,
            components,
        })
    }

    pub fn transform(&self, data: &Array2<f64>) -> Array2<f64> {
        (data - &self.mean).dot(&self.components.t())
    }

    pub fn transform_one(&self, v: ArrayView1<'_, f64>) -> Array1<f64> {
        self.components.dot(&(&v - &self.mean))
    }

    /// Squared Frobenius norm of the residual after projecting and
    /// reconstructing the centred rows of `data`.
    pub fn reconstruction_error(&self, data: &Array2<f64>) -> f64 {
        let centred = data - &self.mean;
        let recon = centred.dot(&self.components.t()).dot(&self.components);
        (&centred - &recon).iter().map(|x| x * x).sum()
    }
}

/// Compress a table to `out_dim` dimensions.
pub fn pca_compress(table: &EmbeddingTable, out_dim: usize) -> Result<EmbeddingTable> {
    pca_compress_with(table, out_dim, Exec::default()).map(|(t, _)| t)
}

pub fn pca_compress_with(table: &EmbeddingTable, out_dim: usize, exec: Exec) -> Result<(EmbeddingTable, Pca)> {
    let pca = Pca::fit(&table.vectors, out_dim, exec)?;
    let vectors = pca.transform(&table.vectors);
    let unknown = pca.transform_one(table.unknown.view());
    let out = EmbeddingTable {
        forms: table.forms.clone(),
        vectors,
        unknown,
    };
    Ok((out, pca))
}
