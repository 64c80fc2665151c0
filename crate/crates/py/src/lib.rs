//! Python bindings: tensors, datasets, model building, training and the
//! evaluation metrics.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use waveforge::autodiff::{ConvGeom, Tape};
use waveforge::checkpoint::Checkpoint;
use waveforge::data::{self, EpochDataset, PhaseMode};
use waveforge::evaluation::{self, GmmConfig};
use waveforge::experiment::{self, SchemeRunConfig};
use waveforge::layers;
use waveforge::models::{ModelSpec, UpsampleScheme, Variant};
use waveforge::training::{sample_latent, TrainConfig};
use waveforge::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::Format(_) => PyIOError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

/// Dense row-major array.
#[pyclass(name = "Tensor", from_py_object)]
#[derive(Clone)]
struct PyTensor {
    inner: waveforge::Tensor,
}

#[pymethods]
impl PyTensor {
    #[new]
    fn new(shape: Vec<usize>, data: Vec<f64>) -> PyResult<Self> {
        Ok(PyTensor {
            inner: waveforge::Tensor::new(shape, data).map_err(py_err)?,
        })
    }

    #[getter]
    fn shape(&self) -> Vec<usize> {
        self.inner.shape().to_vec()
    }

    #[getter]
    fn data(&self) -> Vec<f64> {
        self.inner.data().to_vec()
    }

    fn __len__(&self) -> usize {
        self.inner.shape()[0]
    }

    fn __repr__(&self) -> String {
        format!("Tensor(shape={:?})", self.inner.shape())
    }

    fn __add__(&self, other: &PyTensor) -> PyResult<PyTensor> {
        binary(self, other, |a, b| a.add(b))
    }

    fn __mul__(&self, other: &PyTensor) -> PyResult<PyTensor> {
        binary(self, other, |a, b| a.mul(b))
    }

    fn matmul(&self, other: &PyTensor) -> PyResult<PyTensor> {
        binary(self, other, |a, b| a.matmul(b))
    }

    fn sum(&self) -> f64 {
        self.inner.data().iter().sum()
    }

    /// Cross-correlation of `[N, C, H, W]` input with `[F, C, kh, kw]`
    /// kernels.
    fn conv2d(&self, kernel: &PyTensor, stride: (usize, usize), padding: (usize, usize)) -> PyResult<PyTensor> {
        binary(self, kernel, |x, k| x.conv2d(k, ConvGeom::new(stride, padding)))
    }

    fn transposed_conv2d(
        &self,
        kernel: &PyTensor,
        stride: (usize, usize),
        padding: (usize, usize),
    ) -> PyResult<PyTensor> {
        binary(self, kernel, |x, k| {
            x.transposed_conv2d(k, ConvGeom::new(stride, padding), (0, 0))
        })
    }
}

fn binary<F>(a: &PyTensor, b: &PyTensor, f: F) -> PyResult<PyTensor>
where
    F: FnOnce(&waveforge::autodiff::Var, &waveforge::autodiff::Var) -> waveforge::Result<waveforge::autodiff::Var>,
{
    let tape = Tape::new();
    let out = f(&tape.constant(a.inner.clone()), &tape.constant(b.inner.clone())).map_err(py_err)?;
    Ok(PyTensor {
        inner: out.value().clone(),
    })
}

/// Reverse-mode gradient of `sum(x ** 2)`: a minimal check that the tape is
/// reachable from Python.
#[pyfunction]
fn grad_of_sum_squares(x: &PyTensor) -> PyResult<PyTensor> {
    let tape = Tape::new();
    let v = tape.leaf(x.inner.clone().with_requires_grad(true));
    let y = v.square().and_then(|s| s.sum()).map_err(py_err)?;
    let g = tape.grad(&y, &[&v], false).map_err(py_err)?;
    Ok(PyTensor {
        inner: g[0].value().clone(),
    })
}

/// Epochs `[N, C, T]` with optional binary labels.
#[pyclass(name = "Dataset", from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: EpochDataset,
}

#[pymethods]
impl PyDataset {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyDataset {
            inner: data::load_dataset(&path).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        data::save_dataset(&path, &self.inner).map_err(py_err)
    }

    #[getter]
    fn samples(&self) -> PyTensor {
        PyTensor {
            inner: self.inner.samples.clone(),
        }
    }

    #[getter]
    fn labels(&self) -> Option<Vec<u8>> {
        self.inner.labels.clone()
    }

    #[getter]
    fn metadata(&self) -> String {
        self.inner.metadata.clone()
    }

    fn epoch(&self, i: usize) -> PyResult<Vec<f64>> {
        if i >= self.inner.len() {
            return Err(PyValueError::new_err(format!("epoch {i} out of range")));
        }
        Ok(self.inner.epoch(i).to_vec())
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Dataset(shape={:?})", self.inner.samples.shape())
    }
}

fn phase_mode(phase: Option<f64>) -> PhaseMode {
    phase.map_or(PhaseMode::Random, PhaseMode::Fixed)
}

/// Noisy sinusoid toy set. `phase=None` draws a random phase per sample.
#[pyfunction]
#[pyo3(signature = (n=5000, freq_hz=5.0, amplitude=1.0, noise_var=1.0, phase=None, seed=0))]
fn gen_sinusoid_toy(
    n: usize,
    freq_hz: f64,
    amplitude: f64,
    noise_var: f64,
    phase: Option<f64>,
    seed: u64,
) -> PyResult<PyDataset> {
    let inner = data::gen_sinusoid_toy(n, freq_hz, amplitude, noise_var, phase_mode(phase), seed).map_err(py_err)?;
    Ok(PyDataset { inner })
}

#[pyfunction]
#[pyo3(signature = (n_per_class=500, channels=1, seed=0))]
fn gen_erp_surrogate(n_per_class: usize, channels: usize, seed: u64) -> PyResult<PyDataset> {
    Ok(PyDataset {
        inner: data::gen_erp_surrogate(n_per_class, channels, seed).map_err(py_err)?,
    })
}

#[pyfunction]
fn zscore_epoch(x: Vec<f64>) -> PyResult<Vec<f64>> {
    data::zscore_epoch(&x).map_err(py_err)
}

#[pyfunction]
fn deconv_kernel_size(stride: usize) -> PyResult<usize> {
    layers::deconv_kernel_size(stride).map_err(py_err)
}

#[pyfunction]
fn bilinear_init_weights(stride: usize) -> PyResult<Vec<f64>> {
    layers::bilinear_init_weights(stride).map_err(py_err)
}

#[pyfunction]
fn spectral_artifact_ratio(samples: Vec<Vec<f64>>, band: Vec<usize>) -> PyResult<f64> {
    let rows: Vec<&[f64]> = samples.iter().map(Vec::as_slice).collect();
    evaluation::spectral_artifact_ratio(&rows, &band).map_err(py_err)
}

#[pyfunction]
fn roc_auc(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    evaluation::roc_auc(&scores, &labels).map_err(py_err)
}

/// BIC model selection over `1..=max_k`; returns `(k, [(k, bic), ...])`.
#[pyfunction]
#[pyo3(signature = (samples, max_k=6, seed=0))]
fn gmm_select_k(samples: Vec<Vec<f64>>, max_k: usize, seed: u64) -> PyResult<(usize, Vec<(usize, f64)>)> {
    let cfg = GmmConfig {
        seed,
        ..GmmConfig::default()
    };
    let sel = evaluation::gmm_select_k(&samples, 1..=max_k, &cfg).map_err(py_err)?;
    Ok((sel.k, sel.bics))
}

/// Trainable-parameter count of a model variant at a width scale.
#[pyfunction]
#[pyo3(signature = (variant, width_scale=1.0, scheme="bc-dcbl"))]
fn parameter_count(variant: &str, width_scale: f64, scheme: &str) -> PyResult<usize> {
    let variant: Variant = variant.parse().map_err(py_err)?;
    let scheme: UpsampleScheme = scheme.parse().map_err(py_err)?;
    let spec = ModelSpec::new(variant).with_width_scale(width_scale).with_scheme(scheme);
    let mut store = waveforge::models::ModelParams::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    waveforge::models::build_network(&spec, &mut store, &mut rng).map_err(py_err)?;
    Ok(store.trainable_count())
}

/// Trains one upsampling scheme on the toy set and reports its spectral
/// metrics. Writes a checkpoint when `checkpoint` is given.
#[pyfunction]
#[pyo3(signature = (scheme="bc-dcbl", seed=1, steps=600, n_data=5000, n_eval=1000, checkpoint=None))]
fn train_scheme<'py>(
    py: Python<'py>,
    scheme: &str,
    seed: u64,
    steps: usize,
    n_data: usize,
    n_eval: usize,
    checkpoint: Option<PathBuf>,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let scheme: UpsampleScheme = scheme.parse().map_err(py_err)?;
    let d = SchemeRunConfig::default();
    let cfg = SchemeRunConfig {
        n_data,
        n_eval,
        train: TrainConfig {
            max_steps: steps,
            ..d.train.clone()
        },
        ..d
    };
    let res = py
        .detach(|| -> waveforge::Result<_> {
            let mut trainer = experiment::train_scheme(&cfg, scheme, seed)?;
            if let Some(p) = &checkpoint {
                trainer.checkpoint().save(p)?;
            }
            experiment::evaluate_scheme(&cfg, &mut trainer, seed)
        })
        .map_err(py_err)?;
    let out = pyo3::types::PyDict::new(py);
    out.set_item("scheme", res.scheme.name())?;
    out.set_item("dominant_bin", res.dominant_bin)?;
    out.set_item("amplitude", res.amplitude)?;
    out.set_item("artifact_ratio", res.artifact_ratio)?;
    out.set_item("averaged", res.averaged)?;
    Ok(out)
}

/// Draws `n` samples from a saved checkpoint; returns a `[n, C, T]` tensor.
#[pyfunction]
#[pyo3(signature = (checkpoint, n, seed=0))]
fn generate(checkpoint: PathBuf, n: usize, seed: u64) -> PyResult<PyTensor> {
    let ck = Checkpoint::load(&checkpoint).map_err(py_err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = ck.generator(&mut rng).map_err(py_err)?;
    let labels: Option<Vec<usize>> = g.is_conditional().then(|| (0..n).map(|i| i % 2).collect());
    let z = sample_latent(n, g.spec.latent_dim, &mut rng).map_err(py_err)?;
    let y = g.generate(&z, labels.as_deref(), &mut rng).map_err(py_err)?;
    let shape = g.spec.sample_shape();
    Ok(PyTensor {
        inner: y.reshaped(&[n, shape[1], shape[2]]).map_err(py_err)?,
    })
}

#[pymodule]
fn pywaveforge(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTensor>()?;
    m.add_class::<PyDataset>()?;
    m.add_function(wrap_pyfunction!(grad_of_sum_squares, m)?)?;
    m.add_function(wrap_pyfunction!(gen_sinusoid_toy, m)?)?;
    m.add_function(wrap_pyfunction!(gen_erp_surrogate, m)?)?;
    m.add_function(wrap_pyfunction!(zscore_epoch, m)?)?;
    m.add_function(wrap_pyfunction!(deconv_kernel_size, m)?)?;
    m.add_function(wrap_pyfunction!(bilinear_init_weights, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_artifact_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add_function(wrap_pyfunction!(gmm_select_k, m)?)?;
    m.add_function(wrap_pyfunction!(parameter_count, m)?)?;
    m.add_function(wrap_pyfunction!(train_scheme, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    Ok(())
}
