//! Python bindings for the task-automaton learning pipeline.
//!
//! Exposes the main types (grids, automata, episode sets) and the three
//! pipeline steps (simulate, train, distill, debias) plus a one-shot
//! `learn_task_automaton`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use taskauto::automata::{self, Completion, TaskAutomaton};
use taskauto::episode::{self, Episode};
use taskauto::hmm::{self, HmmParams, ObservationMode, TrainOptions};
use taskauto::label::Label;
use taskauto::mdp::{LabelledMdp, Policy};
use taskauto::pipeline::{self, InitKind, PipelineOptions};

fn err(e: taskauto::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_init(init: &str) -> PyResult<InitKind> {
    init.parse::<InitKind>().map_err(PyValueError::new_err)
}

fn parse_word(word: Vec<String>) -> PyResult<Vec<Label>> {
    word.iter()
        .map(|t| Label::parse(t).map_err(err))
        .collect()
}

/// A labelled gridworld.
#[pyclass(name = "Grid", skip_from_py_object)]
#[derive(Clone)]
struct PyGrid {
    inner: LabelledMdp,
}

#[pymethods]
impl PyGrid {
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(PyGrid {
            inner: LabelledMdp::parse(text, "<text>").map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        Ok(PyGrid {
            inner: LabelledMdp::from_file(path).map_err(err)?,
        })
    }

    #[getter]
    fn width(&self) -> usize {
        self.inner.width()
    }

    #[getter]
    fn height(&self) -> usize {
        self.inner.height()
    }

    #[getter]
    fn num_states(&self) -> usize {
        self.inner.num_states()
    }

    #[getter]
    fn initial_state(&self) -> usize {
        self.inner.initial_state()
    }

    /// Label token of a state (`.` for the empty label).
    fn label(&self, state: usize) -> PyResult<String> {
        if state >= self.inner.num_states() {
            return Err(PyValueError::new_err("state index out of range"));
        }
        Ok(self.inner.label(state).to_string())
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn __repr__(&self) -> String {
        format!("Grid({}x{})", self.inner.width(), self.inner.height())
    }
}

/// A task automaton (DFA over label tokens).
#[pyclass(name = "Automaton", skip_from_py_object)]
#[derive(Clone)]
struct PyAutomaton {
    inner: TaskAutomaton,
}

#[pymethods]
impl PyAutomaton {
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(PyAutomaton {
            inner: TaskAutomaton::parse(text, "<text>").map_err(err)?,
        })
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        Ok(PyAutomaton {
            inner: TaskAutomaton::from_file(path).map_err(err)?,
        })
    }

    #[getter]
    fn num_states(&self) -> usize {
        self.inner.num_states()
    }

    #[getter]
    fn alphabet(&self) -> Vec<String> {
        self.inner.alphabet().iter().map(|l| l.to_string()).collect()
    }

    fn accepts(&self, word: Vec<String>) -> PyResult<bool> {
        self.inner.accepts(&parse_word(word)?).map_err(err)
    }

    #[pyo3(signature = (policy = "self_loop"))]
    fn complete(&self, policy: &str) -> PyResult<Self> {
        let policy = match policy {
            "self_loop" => Completion::SelfLoop,
            "sink" => Completion::RejectSink,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown completion policy {other:?} (self_loop|sink)"
                )))
            }
        };
        Ok(PyAutomaton {
            inner: self.inner.complete(policy),
        })
    }

    fn minimize(&self) -> PyResult<Self> {
        Ok(PyAutomaton {
            inner: automata::minimize(&self.inner).map_err(err)?,
        })
    }

    fn language_equivalent(&self, other: &PyAutomaton) -> PyResult<bool> {
        automata::language_equivalent(&self.inner, &other.inner).map_err(err)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn to_dot(&self) -> String {
        self.inner.to_dot()
    }

    fn __repr__(&self) -> String {
        format!("Automaton(states={})", self.inner.num_states())
    }
}

/// A set of simulated episodes.
#[pyclass(name = "Episodes", skip_from_py_object)]
#[derive(Clone)]
struct PyEpisodes {
    inner: Vec<Episode>,
}

#[pymethods]
impl PyEpisodes {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyEpisodes {
            inner: episode::read_episodes(path).map_err(err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        episode::write_episodes(path, &self.inner).map_err(err)
    }

    fn goal_fraction(&self) -> f64 {
        episode::goal_fraction(&self.inner)
    }

    /// `(states, labels, rewards)` rows of one episode.
    fn episode(&self, index: usize) -> PyResult<(Vec<usize>, Vec<String>, Vec<u8>)> {
        let ep = self
            .inner
            .get(index)
            .ok_or_else(|| PyValueError::new_err("episode index out of range"))?;
        Ok((
            ep.states.clone(),
            ep.trace.iter().map(|l| l.to_string()).collect(),
            ep.rewards.clone(),
        ))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Episodes(n={})", self.inner.len())
    }
}

/// Result of HMM training: the learned transition matrix plus diagnostics.
#[pyclass(name = "TrainResult")]
struct PyTrainResult {
    #[pyo3(get)]
    transition: Vec<Vec<f64>>,
    #[pyo3(get)]
    k: usize,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    converged: bool,
    #[pyo3(get)]
    final_delta: f64,
    #[pyo3(get)]
    log_likelihood: f64,
    #[pyo3(get)]
    wall_time_secs: f64,
}

#[pyfunction]
#[pyo3(signature = (grid, hidden_ta, length, episodes, seed = 0))]
fn simulate(
    grid: &PyGrid,
    hidden_ta: &PyAutomaton,
    length: usize,
    episodes: usize,
    seed: u64,
) -> PyResult<PyEpisodes> {
    let policy = Policy::uniform(&grid.inner);
    let eps = episode::simulate_episodes(
        &grid.inner,
        &hidden_ta.inner,
        &policy,
        length,
        episodes,
        seed,
    )
    .map_err(err)?;
    Ok(PyEpisodes { inner: eps })
}

fn options(
    k: usize,
    init: &str,
    tol: f64,
    max_iters: usize,
    seed: u64,
    smoothing: f64,
    threshold: f64,
) -> PyResult<PipelineOptions> {
    Ok(PipelineOptions {
        k,
        init: parse_init(init)?,
        seed,
        smoothing,
        threshold,
        obs_mode: ObservationMode::State,
        train: TrainOptions {
            tol,
            max_iters,
            reestimate_emissions: false,
        },
    })
}

#[pyfunction]
#[pyo3(signature = (grid, episodes, k, init = "spatial", tol = 1e-6, max_iters = 10_000, seed = 0, smoothing = 1.0))]
#[allow(clippy::too_many_arguments)]
fn train(
    grid: &PyGrid,
    episodes: &PyEpisodes,
    k: usize,
    init: &str,
    tol: f64,
    max_iters: usize,
    seed: u64,
    smoothing: f64,
) -> PyResult<PyTrainResult> {
    let opts = options(k, init, tol, max_iters, seed, smoothing, 0.01)?;
    let params = pipeline::initial_params(&grid.inner, &opts).map_err(err)?;
    let seqs = hmm::encode_episodes(&episodes.inner, &grid.inner, ObservationMode::State);
    let (learned, report) = hmm::train(&params, &seqs, &opts.train).map_err(err)?;
    let n = learned.n_hidden();
    let transition = (0..n)
        .map(|i| learned.transition.row(i).to_vec())
        .collect();
    Ok(PyTrainResult {
        transition,
        k,
        iterations: report.iterations,
        converged: report.converged,
        final_delta: report.final_delta,
        log_likelihood: report.log_likelihood_trace.last().copied().unwrap_or(f64::NAN),
        wall_time_secs: report.wall_time_secs,
    })
}

fn params_from_matrix(grid: &PyGrid, transition: Vec<Vec<f64>>) -> PyResult<HmmParams> {
    let n = transition.len();
    let n_mdp = grid.inner.num_states();
    if n == 0 || n % n_mdp != 0 || transition.iter().any(|row| row.len() != n) {
        return Err(PyValueError::new_err(format!(
            "transition must be square with a multiple of {n_mdp} rows"
        )));
    }
    let k = n / n_mdp;
    let flat: Vec<f64> = transition.into_iter().flatten().collect();
    let matrix = ndarray_from(flat, n);
    HmmParams::for_mdp(&grid.inner, k, matrix, ObservationMode::State).map_err(err)
}

fn ndarray_from(flat: Vec<f64>, n: usize) -> ndarray::Array2<f64> {
    ndarray::Array2::from_shape_vec((n, n), flat).expect("validated shape")
}

#[pyfunction]
#[pyo3(signature = (grid, transition, threshold = 0.01))]
fn distill(grid: &PyGrid, transition: Vec<Vec<f64>>, threshold: f64) -> PyResult<PyAutomaton> {
    let params = params_from_matrix(grid, transition)?;
    let ta = taskauto::distill::distill_ta(&params, grid.inner.labels(), threshold).map_err(err)?;
    Ok(PyAutomaton { inner: ta })
}

#[pyfunction]
fn debias(ta: &PyAutomaton, episodes: &PyEpisodes) -> PyResult<(PyAutomaton, Vec<String>)> {
    let outcome =
        taskauto::debias::remove_environmental_bias(&ta.inner, &episodes.inner).map_err(err)?;
    Ok((
        PyAutomaton { inner: outcome.ta },
        outcome.removed.iter().map(|l| l.to_string()).collect(),
    ))
}

/// Run the full pipeline on pre-collected episodes.
#[pyfunction]
#[pyo3(signature = (grid, episodes, k, init = "spatial", tol = 1e-6, max_iters = 10_000, seed = 0, smoothing = 1.0, threshold = 0.01))]
#[allow(clippy::too_many_arguments)]
fn learn_task_automaton(
    grid: &PyGrid,
    episodes: &PyEpisodes,
    k: usize,
    init: &str,
    tol: f64,
    max_iters: usize,
    seed: u64,
    smoothing: f64,
    threshold: f64,
) -> PyResult<PyAutomaton> {
    let opts = options(k, init, tol, max_iters, seed, smoothing, threshold)?;
    let result =
        pipeline::learn_task_automaton(&grid.inner, &episodes.inner, &opts).map_err(err)?;
    Ok(PyAutomaton {
        inner: result.debias.ta,
    })
}

#[pymodule]
fn taskauto_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyAutomaton>()?;
    m.add_class::<PyEpisodes>()?;
    m.add_class::<PyTrainResult>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(distill, m)?)?;
    m.add_function(wrap_pyfunction!(debias, m)?)?;
    m.add_function(wrap_pyfunction!(learn_task_automaton, m)?)?;
    Ok(())
}
