use pyo3::prelude::*;

#[pymodule]
fn pce_py(_m: &Bound<'_, PyModule>) -> PyResult<()> {
    Ok(())
}
