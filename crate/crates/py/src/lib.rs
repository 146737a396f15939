use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use rboost::boost::{self, Algorithm, BoostModel, TrainConfig};
use rboost::data::{self, DataFormat, LoadOptions};
use rboost::{eval, model_io, tree, Error};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

#[pyclass(name = "Dataset", module = "rboost", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyDataset {
    inner: data::Dataset,
}

#[pymethods]
impl PyDataset {
    /// Dataset from row-major features and class indices `0..n_classes`.
    #[new]
    #[pyo3(signature = (rows, labels, n_classes=None))]
    fn new(rows: Vec<Vec<f64>>, labels: Vec<usize>, n_classes: Option<usize>) -> PyResult<Self> {
        let k = n_classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
        data::Dataset::with_numeric_labels(&rows, labels, k)
            .map(|inner| PyDataset { inner })
            .map_err(to_py)
    }

    #[getter]
    fn n_samples(&self) -> usize {
        self.inner.n_samples()
    }

    #[getter]
    fn n_features(&self) -> usize {
        self.inner.n_features()
    }

    #[getter]
    fn n_classes(&self) -> usize {
        self.inner.n_classes()
    }

    #[getter]
    fn labels(&self) -> Vec<usize> {
        self.inner.labels().to_vec()
    }

    #[getter]
    fn label_names(&self) -> Vec<String> {
        self.inner.label_names().to_vec()
    }

    fn row(&self, i: usize) -> PyResult<Vec<f64>> {
        if i >= self.inner.n_samples() {
            return Err(PyValueError::new_err(format!("sample {i} out of range")));
        }
        Ok(self.inner.row(i))
    }

    fn __len__(&self) -> usize {
        self.inner.n_samples()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(n_samples={}, n_features={}, n_classes={})",
            self.inner.n_samples(),
            self.inner.n_features(),
            self.inner.n_classes()
        )
    }
}

#[pyclass(name = "Model", module = "rboost", frozen)]
pub struct PyModel {
    inner: BoostModel,
}

#[pymethods]
impl PyModel {
    #[getter]
    fn algorithm(&self) -> String {
        self.inner.algorithm.to_string()
    }

    #[getter]
    fn n_classes(&self) -> usize {
        self.inner.n_classes
    }

    #[getter]
    fn n_features(&self) -> usize {
        self.inner.n_features
    }

    #[getter]
    fn n_iterations(&self) -> usize {
        self.inner.n_iterations()
    }

    #[getter]
    fn shrinkage(&self) -> f64 {
        self.inner.shrinkage
    }

    #[getter]
    fn label_names(&self) -> Vec<String> {
        self.inner.label_names.clone()
    }

    /// Base class chosen at each iteration (abc models), `None` for plain ones.
    #[getter]
    fn base_classes(&self) -> Vec<Option<usize>> {
        self.inner.stages.iter().map(|s| s.base).collect()
    }

    /// `(scores, probabilities, label)` for one feature vector.
    fn predict(&self, x: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>, usize)> {
        let p = self.inner.predict(&x).map_err(to_py)?;
        Ok((p.scores, p.probabilities, p.label))
    }

    /// Predicted class index of every sample.
    fn predict_labels(&self, dataset: &PyDataset) -> PyResult<Vec<usize>> {
        Ok(self
            .inner
            .predict_dataset(&dataset.inner)
            .map_err(to_py)?
            .into_iter()
            .map(|p| p.label)
            .collect())
    }

    fn save(&self, path: &str) -> PyResult<()> {
        model_io::save_model(&self.inner, path).map_err(to_py)
    }

    fn to_text(&self) -> String {
        model_io::model_to_string(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(algorithm='{}', n_classes={}, n_iterations={})",
            self.inner.algorithm,
            self.inner.n_classes,
            self.inner.n_iterations()
        )
    }
}

#[pyfunction]
#[pyo3(signature = (path, format, label_names=None, n_features=None, csv_header=false))]
fn load_dataset(
    path: &str,
    format: &str,
    label_names: Option<Vec<String>>,
    n_features: Option<usize>,
    csv_header: bool,
) -> PyResult<PyDataset> {
    let format: DataFormat = format.parse().map_err(to_py)?;
    let mut opts = LoadOptions::new(format);
    opts.label_map = label_names;
    opts.n_features = n_features;
    opts.csv_header = csv_header;
    data::load_dataset(path, &opts)
        .map(|inner| PyDataset { inner })
        .map_err(to_py)
}

#[pyfunction]
fn load_model(path: &str) -> PyResult<PyModel> {
    model_io::load_model(path)
        .map(|inner| PyModel { inner })
        .map_err(to_py)
}

type LogRow = (usize, f64, Option<usize>, f64);

/// Trains a model; returns it with the metric log
/// `[(iteration, train_loss, test_errors, seconds), ...]`.
#[pyfunction]
#[pyo3(signature = (
    dataset,
    algorithm="abc-logit",
    trees=20,
    shrinkage=0.1,
    iterations=100,
    test=None,
    min_leaf=1,
    eval_stride=10,
    early_stop=None,
))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    dataset: &PyDataset,
    algorithm: &str,
    trees: usize,
    shrinkage: f64,
    iterations: usize,
    test: Option<PyRef<'_, PyDataset>>,
    min_leaf: usize,
    eval_stride: usize,
    early_stop: Option<f64>,
) -> PyResult<(PyModel, Vec<LogRow>)> {
    let algorithm: Algorithm = algorithm.parse().map_err(to_py)?;
    let config = TrainConfig {
        algorithm,
        max_leaves: trees,
        shrinkage,
        iterations,
        early_stop_loss: early_stop,
        min_leaf,
        eval_stride,
        seed: 0,
    };
    let train_set = dataset.inner.clone();
    let test_set = test.map(|t| t.inner.clone());
    let (model, log) = py
        .detach(|| boost::train(&train_set, test_set.as_ref(), &config))
        .map_err(to_py)?;
    let rows = log
        .rows()
        .iter()
        .map(|r| (r.iteration, r.train_loss, r.test_errors, r.seconds))
        .collect();
    Ok((PyModel { inner: model }, rows))
}

#[pyfunction]
fn softmax_row(scores: Vec<f64>) -> Vec<f64> {
    boost::softmax_row(&scores)
}

#[pyfunction]
fn grads_plain(r: f64, p: f64) -> (f64, f64) {
    boost::grads_plain(r, p)
}

#[pyfunction]
fn grads_abc(r_b: f64, p_b: f64, r_k: f64, p_k: f64) -> (f64, f64) {
    boost::grads_abc(r_b, p_b, r_k, p_k)
}

#[pyfunction]
fn gain_from_sums(sum_zw_left: f64, sum_w_left: f64, sum_zw_right: f64, sum_w_right: f64) -> PyResult<f64> {
    tree::gain_from_sums(sum_zw_left, sum_w_left, sum_zw_right, sum_w_right)
        .ok_or_else(|| PyValueError::new_err("both weight sums must be positive"))
}

#[pyfunction]
fn leaf_value(sum_zw: f64, sum_w: f64, scale: f64) -> f64 {
    tree::leaf_value(sum_zw, sum_w, scale)
}

#[pyfunction]
fn hessian_diagnostics(p: [f64; 3], base: usize) -> PyResult<(f64, f64)> {
    boost::hessian_diagnostics(p, base).map_err(to_py)
}

#[pyfunction]
fn pvalue_two_proportion(err_a: u64, err_b: u64, n_test: u64) -> PyResult<f64> {
    eval::pvalue_two_proportion(err_a, err_b, n_test).map_err(to_py)
}

#[pyfunction]
fn relative_improvement(err_base: u64, err_new: u64) -> PyResult<f64> {
    eval::relative_improvement(err_base, err_new).map_err(to_py)
}

#[pyfunction]
fn misclassification_count(predictions: Vec<usize>, truth: Vec<usize>) -> PyResult<usize> {
    eval::misclassification_count(&predictions, &truth).map_err(to_py)
}

#[pymodule(name = "rboost")]
fn rboost_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(load_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(load_model, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(softmax_row, m)?)?;
    m.add_function(wrap_pyfunction!(grads_plain, m)?)?;
    m.add_function(wrap_pyfunction!(grads_abc, m)?)?;
    m.add_function(wrap_pyfunction!(gain_from_sums, m)?)?;
    m.add_function(wrap_pyfunction!(leaf_value, m)?)?;
    m.add_function(wrap_pyfunction!(hessian_diagnostics, m)?)?;
    m.add_function(wrap_pyfunction!(pvalue_two_proportion, m)?)?;
    m.add_function(wrap_pyfunction!(relative_improvement, m)?)?;
    m.add_function(wrap_pyfunction!(misclassification_count, m)?)?;
    Ok(())
}
