//! Browser demo for the conekit toolkit. The interesting work lives in
//! [`ops`], which returns plain JSON strings and compiles (and is tested)
//! natively; the wasm-bindgen layer is a thin shim compiled only for
//! wasm32 targets.

pub mod ops;

#[cfg(target_arch = "wasm32")]
mod bindings {
    use wasm_bindgen::prelude::*;

    /// Profile of the regularized maximum reg_max(x, 0) across its
    /// transition band, with the hard maximum and the second derivative.
    #[wasm_bindgen]
    pub fn regmax_profile(delta: f64, kernel_degree: u32, samples: usize) -> Result<String, JsValue> {
        crate::ops::regmax_profile_json(delta, kernel_degree, samples).map_err(|e| JsValue::from_str(&e))
    }

    /// Level curve of the weighted cone potential in the moduli plane,
    /// together with flow lines projecting sample points onto it.
    #[wasm_bindgen]
    pub fn cone_geometry(a1: f64, a2: f64, curve_samples: usize, flow_lines: usize) -> Result<String, JsValue> {
        crate::ops::cone_geometry_json(a1, a2, curve_samples, flow_lines).map_err(|e| JsValue::from_str(&e))
    }

    /// Run the hyperplane gluing pipeline at demo scale and return a 1-D
    /// section of the glued potential plus the verification certificates.
    #[wasm_bindgen]
    pub fn glue_profile(epsilon: f64, delta: f64, c1: f64, amplitude: f64, samples: usize) -> Result<String, JsValue> {
        crate::ops::glue_profile_json(epsilon, delta, c1, amplitude, samples).map_err(|e| JsValue::from_str(&e))
    }
}
