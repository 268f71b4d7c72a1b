//! Python bindings. Rationals cross the boundary as `fractions.Fraction`;
//! reports and results come back as plain dicts and lists.

use fairdiv::additive::algorithm1;
use fairdiv::completion::{envy_cycles, pipeline_additive, pipeline_subadditive, singleton_swaps};
use fairdiv::instance::InstanceFile;
use fairdiv::instances::generate_with_caps;
use fairdiv::oracle::{self, best_alpha_efx_product, certify_impossibility, ImpossibilityFamily};
use fairdiv::subadditive::algorithm2;
use fairdiv::verify;
use fairdiv::{Bundle, Caps, Error, GeneratorSpec, Ratio};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList, PyString};
use serde::Serialize;
use serde_json::Value;

create_exception!(pyfairdiv, CapacityError, PyException, "A brute-force search exceeded its cap.");
create_exception!(pyfairdiv, InternalError, PyException, "A proved bound was violated.");

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::Capacity { .. } => CapacityError::new_err(e.to_string()),
        Error::Internal(_) => InternalError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait OrRaise<T> {
    fn or_raise(self) -> PyResult<T>;
}

impl<T> OrRaise<T> for fairdiv::Result<T> {
    fn or_raise(self) -> PyResult<T> {
        self.map_err(to_py_err)
    }
}

fn is_fraction_text(s: &str) -> bool {
    let s = s.strip_prefix('-').unwrap_or(s);
    match s.split_once('/') {
        Some((p, q)) => {
            !p.is_empty() && !q.is_empty() && p.bytes().all(|b| b.is_ascii_digit()) && q.bytes().all(|b| b.is_ascii_digit())
        }
        None => false,
    }
}

/// JSON to Python, turning every `"p/q"` string into a `Fraction`.
fn to_python<'py>(py: Python<'py>, value: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match value {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match n.as_u64() {
            Some(u) => u.into_pyobject(py)?.into_any(),
            None => match n.as_i64() {
                Some(i) => i.into_pyobject(py)?.into_any(),
                None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
            },
        },
        Value::String(s) if is_fraction_text(s) => py.import("fractions")?.getattr("Fraction")?.call1((s.as_str(),))?,
        Value::String(s) => PyString::new(py, s).into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(to_python(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, to_python(py, v)?)?;
            }
            dict.into_any()
        }
    })
}

fn export<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let json = serde_json::to_value(value).map_err(|e| to_py_err(e.into()))?;
    to_python(py, &json)
}

/// Accepts `Fraction`, `int` or a `"p/q"` string.
fn ratio(obj: &Bound<'_, PyAny>) -> PyResult<Ratio> {
    obj.str()?.to_str()?.parse().or_raise()
}

/// Python object to JSON via the `json` module.
fn to_json(obj: &Bound<'_, PyAny>) -> PyResult<Value> {
    let text: String = obj.py().import("json")?.getattr("dumps")?.call1((obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| to_py_err(e.into()))
}

fn caps() -> PyResult<Caps> {
    Caps::from_env().or_raise()
}

#[pyclass(module = "pyfairdiv", frozen)]
struct Instance {
    inner: fairdiv::Instance,
}

#[pymethods]
impl Instance {
    /// Parses the instance JSON format.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let file: InstanceFile = serde_json::from_str(text).map_err(|e| to_py_err(e.into()))?;
        Ok(Instance {
            inner: file.into_instance(&caps()?).or_raise()?,
        })
    }

    /// Additive instance from one row of item values per agent.
    #[staticmethod]
    fn additive(rows: Vec<Vec<Bound<'_, PyAny>>>) -> PyResult<Self> {
        let m = rows.first().map_or(0, Vec::len);
        let valuations = rows
            .iter()
            .map(|row| Ok(fairdiv::Valuation::Additive(row.iter().map(ratio).collect::<PyResult<_>>()?)))
            .collect::<PyResult<_>>()?;
        Ok(Instance {
            inner: fairdiv::Instance::new(m, valuations, fairdiv::ValuationClass::Additive).or_raise()?,
        })
    }

    /// Instance from a generator spec such as `{"family": "example1"}`.
    #[staticmethod]
    fn generate(spec: &Bound<'_, PyAny>) -> PyResult<Self> {
        let spec: GeneratorSpec = serde_json::from_value(to_json(spec)?).map_err(|e| to_py_err(e.into()))?;
        Ok(Instance {
            inner: generate_with_caps(&spec, &caps()?).or_raise()?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json_string().or_raise()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn valuation_class(&self) -> String {
        self.inner.class().to_string()
    }

    fn value<'py>(&self, py: Python<'py>, agent: usize, items: Vec<usize>) -> PyResult<Bound<'py, PyAny>> {
        if agent >= self.inner.n() || items.iter().any(|&g| g >= self.inner.m()) {
            return Err(PyValueError::new_err("agent or item out of range"));
        }
        export(py, &self.inner.value(agent, Bundle::from_items(items)))
    }

    fn check_class<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        export(py, &fairdiv::check_class(&self.inner))
    }

    fn __repr__(&self) -> String {
        format!("Instance(n={}, m={}, class={})", self.inner.n(), self.inner.m(), self.inner.class())
    }
}

#[pyclass(module = "pyfairdiv", frozen)]
struct Allocation {
    inner: fairdiv::Allocation,
}

#[pymethods]
impl Allocation {
    #[new]
    fn new(m: usize, bundles: Vec<Vec<usize>>) -> PyResult<Self> {
        let bundles = bundles.into_iter().map(Bundle::from_items).collect();
        Ok(Allocation {
            inner: fairdiv::Allocation::new(m, bundles).or_raise()?,
        })
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn bundles(&self) -> Vec<Vec<usize>> {
        self.inner.bundles().iter().map(|b| b.items().collect()).collect()
    }

    #[getter]
    fn unallocated(&self) -> Vec<usize> {
        self.inner.unallocated().items().collect()
    }

    fn is_complete(&self) -> bool {
        self.inner.is_complete()
    }

    fn nash_product<'py>(&self, py: Python<'py>, instance: &Instance) -> PyResult<Bound<'py, PyAny>> {
        self.inner.check_fits(&instance.inner).or_raise()?;
        export(py, &fairdiv::nash_product(&instance.inner, &self.inner))
    }

    fn __eq__(&self, other: &Allocation) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("Allocation(m={}, bundles={:?})", self.inner.m(), self.bundles())
    }
}

fn fits(instance: &Instance, allocation: &Allocation) -> PyResult<()> {
    allocation.inner.check_fits(&instance.inner).or_raise()
}

/// Exact maximum Nash welfare; the dict holds `allocation` as an
/// [`Allocation`] and `product` as a `Fraction`.
#[pyfunction]
fn exact_mnw<'py>(py: Python<'py>, instance: &Instance) -> PyResult<Bound<'py, PyAny>> {
    let result = exact_mnw_inner(instance)?;
    let out = export(py, &result)?;
    out.set_item("allocation", Allocation { inner: result.allocation })?;
    Ok(out)
}

fn exact_mnw_inner(instance: &Instance) -> PyResult<fairdiv::oracle::MnwResult> {
    oracle::exact_mnw(&instance.inner, &caps()?).or_raise()
}

#[pyfunction]
fn best_alpha_efx<'py>(py: Python<'py>, instance: &Instance, alpha: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let best = best_alpha_efx_product(&instance.inner, &ratio(alpha)?, &caps()?).or_raise()?;
    let out = export(py, &best)?;
    out.set_item("allocation", Allocation { inner: best.allocation })?;
    Ok(out)
}

/// Additive matching algorithm on a complete allocation `x`.
#[pyfunction]
fn algorithm_additive(instance: &Instance, x: &Allocation, alpha: &Bound<'_, PyAny>) -> PyResult<Allocation> {
    let (inner, _) = algorithm1(&instance.inner, &x.inner, &ratio(alpha)?).or_raise()?;
    Ok(Allocation { inner })
}

/// Subadditive matching algorithm on a complete allocation `x`.
#[pyfunction]
fn algorithm_subadditive(instance: &Instance, x: &Allocation, alpha: &Bound<'_, PyAny>) -> PyResult<Allocation> {
    let (inner, _) = algorithm2(&instance.inner, &x.inner, &ratio(alpha)?).or_raise()?;
    Ok(Allocation { inner })
}

/// Gives every unallocated item away by envy-cycle elimination.
#[pyfunction]
fn complete_envy_cycles(instance: &Instance, z: &Allocation) -> PyResult<Allocation> {
    let (inner, _) = envy_cycles(&instance.inner, &z.inner, z.inner.unallocated()).or_raise()?;
    Ok(Allocation { inner })
}

/// Singleton swaps over every unallocated item.
#[pyfunction]
fn swap_singletons(instance: &Instance, z: &Allocation) -> PyResult<Allocation> {
    let (inner, _, _) = singleton_swaps(&instance.inner, &z.inner, z.inner.unallocated()).or_raise()?;
    Ok(Allocation { inner })
}

fn pipeline_dict<'py>(py: Python<'py>, out: fairdiv::completion::PipelineOutput) -> PyResult<Bound<'py, PyAny>> {
    let dict = PyDict::new(py);
    dict.set_item("allocation", Allocation { inner: out.allocation })?;
    dict.set_item("partial", Allocation { inner: out.partial })?;
    dict.set_item("mnw_product", export(py, &out.mnw.product)?)?;
    dict.set_item("guarantees_apply", out.guarantees_apply)?;
    dict.set_item("reports", export(py, &out.reports)?)?;
    Ok(dict.into_any())
}

/// Exact MNW, additive matching, envy cycles, and the full report set.
#[pyfunction]
fn solve_additive<'py>(py: Python<'py>, instance: &Instance, alpha: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    pipeline_dict(py, pipeline_additive(&instance.inner, &ratio(alpha)?, &caps()?).or_raise()?)
}

/// Exact MNW, subadditive matching, singleton swaps, envy cycles.
#[pyfunction]
fn solve_subadditive<'py>(py: Python<'py>, instance: &Instance, alpha: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    pipeline_dict(py, pipeline_subadditive(&instance.inner, &ratio(alpha)?, &caps()?).or_raise()?)
}

#[pyfunction]
fn is_alpha_efx<'py>(
    py: Python<'py>,
    instance: &Instance,
    allocation: &Allocation,
    alpha: &Bound<'py, PyAny>,
) -> PyResult<Bound<'py, PyAny>> {
    fits(instance, allocation)?;
    export(py, &verify::is_alpha_efx(&instance.inner, &allocation.inner, &ratio(alpha)?))
}

#[pyfunction]
fn is_ef1<'py>(py: Python<'py>, instance: &Instance, allocation: &Allocation) -> PyResult<Bound<'py, PyAny>> {
    fits(instance, allocation)?;
    export(py, &verify::is_ef1(&instance.inner, &allocation.inner))
}

/// `reference` defaults to the exact MNW product.
#[pyfunction]
#[pyo3(signature = (instance, allocation, beta, reference=None))]
fn is_beta_mnw<'py>(
    py: Python<'py>,
    instance: &Instance,
    allocation: &Allocation,
    beta: &Bound<'py, PyAny>,
    reference: Option<&Bound<'py, PyAny>>,
) -> PyResult<Bound<'py, PyAny>> {
    fits(instance, allocation)?;
    let reference = match reference {
        Some(r) => ratio(r)?,
        None => exact_mnw_inner(instance)?.product,
    };
    export(
        py,
        &verify::is_beta_mnw(&instance.inner, &allocation.inner, &ratio(beta)?, &reference).or_raise()?,
    )
}

#[pyfunction]
fn is_gamma_separated<'py>(
    py: Python<'py>,
    instance: &Instance,
    allocation: &Allocation,
    gamma: &Bound<'py, PyAny>,
) -> PyResult<Bound<'py, PyAny>> {
    fits(instance, allocation)?;
    export(py, &verify::is_gamma_separated(&instance.inner, &allocation.inner, &ratio(gamma)?))
}

#[pyfunction]
fn is_alpha_mms<'py>(
    py: Python<'py>,
    instance: &Instance,
    allocation: &Allocation,
    alpha: &Bound<'py, PyAny>,
) -> PyResult<Bound<'py, PyAny>> {
    fits(instance, allocation)?;
    export(
        py,
        &verify::is_alpha_mms(&instance.inner, &allocation.inner, &ratio(alpha)?, &caps()?).or_raise()?,
    )
}

#[pyfunction]
fn is_alpha_pmms<'py>(
    py: Python<'py>,
    instance: &Instance,
    allocation: &Allocation,
    alpha: &Bound<'py, PyAny>,
) -> PyResult<Bound<'py, PyAny>> {
    fits(instance, allocation)?;
    export(
        py,
        &verify::is_alpha_pmms(&instance.inner, &allocation.inner, &ratio(alpha)?, &caps()?).or_raise()?,
    )
}

#[pyfunction]
fn is_alpha_gmms<'py>(
    py: Python<'py>,
    instance: &Instance,
    allocation: &Allocation,
    alpha: &Bound<'py, PyAny>,
) -> PyResult<Bound<'py, PyAny>> {
    fits(instance, allocation)?;
    export(
        py,
        &verify::is_alpha_gmms(&instance.inner, &allocation.inner, &ratio(alpha)?, &caps()?).or_raise()?,
    )
}

/// `family` is e.g. `{"family": "theorem4", "alpha": "1/2", "epsilon": "1/100", "n": 2}`.
#[pyfunction]
fn certify<'py>(py: Python<'py>, family: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let family: ImpossibilityFamily = serde_json::from_value(to_json(family)?).map_err(|e| to_py_err(e.into()))?;
    export(py, &certify_impossibility(&family, &caps()?).or_raise()?)
}

#[pymodule]
fn pyfairdiv(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CapacityError", m.py().get_type::<CapacityError>())?;
    m.add("InternalError", m.py().get_type::<InternalError>())?;
    m.add_class::<Instance>()?;
    m.add_class::<Allocation>()?;
    m.add_function(wrap_pyfunction!(exact_mnw, m)?)?;
    m.add_function(wrap_pyfunction!(best_alpha_efx, m)?)?;
    m.add_function(wrap_pyfunction!(algorithm_additive, m)?)?;
    m.add_function(wrap_pyfunction!(algorithm_subadditive, m)?)?;
    m.add_function(wrap_pyfunction!(complete_envy_cycles, m)?)?;
    m.add_function(wrap_pyfunction!(swap_singletons, m)?)?;
    m.add_function(wrap_pyfunction!(solve_additive, m)?)?;
    m.add_function(wrap_pyfunction!(solve_subadditive, m)?)?;
    m.add_function(wrap_pyfunction!(is_alpha_efx, m)?)?;
    m.add_function(wrap_pyfunction!(is_ef1, m)?)?;
    m.add_function(wrap_pyfunction!(is_beta_mnw, m)?)?;
    m.add_function(wrap_pyfunction!(is_gamma_separated, m)?)?;
    m.add_function(wrap_pyfunction!(is_alpha_mms, m)?)?;
    m.add_function(wrap_pyfunction!(is_alpha_pmms, m)?)?;
    m.add_function(wrap_pyfunction!(is_alpha_gmms, m)?)?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    Ok(())
}
