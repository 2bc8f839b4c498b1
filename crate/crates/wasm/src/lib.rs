//! Browser bindings for a small airway phantom demo.

pub mod demo;

use airway_core::phantom::PhantomSpec;
use wasm_bindgen::prelude::*;

fn js_err(e: airway_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Frame {
    width: usize,
    height: usize,
    rgba: Vec<u8>,
}

#[wasm_bindgen]
impl Frame {
    #[wasm_bindgen(getter)]
    pub fn width(&self) -> usize {
        self.width
    }

    #[wasm_bindgen(getter)]
    pub fn height(&self) -> usize {
        self.height
    }

    /// RGBA bytes for `ImageData`.
    pub fn pixels(&self) -> Vec<u8> {
        self.rgba.clone()
    }
}

impl From<demo::Image> for Frame {
    fn from(i: demo::Image) -> Self {
        Self { width: i.width, height: i.height, rgba: i.rgba }
    }
}

#[wasm_bindgen]
pub struct Demo(demo::Demo);

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(generations: usize, branch_angle: f64, noise_sigma: f64, rng_seed: u64) -> Result<Demo, JsError> {
        let spec = PhantomSpec { generations, branch_angle, noise_sigma, rng_seed, ..Default::default() };
        demo::Demo::new(&spec).map(Demo).map_err(js_err)
    }

    #[wasm_bindgen(js_name = rootLength)]
    pub fn root_length(&self) -> f64 {
        self.0.root_length()
    }

    pub fn projection(&self) -> Frame {
        self.0.projection().into()
    }

    /// Trace the phantom; returns the metrics table.
    pub fn trace(&mut self) -> Result<String, JsError> {
        self.0.trace().map_err(js_err)
    }

    /// `kind` is one of cef, gvf, tubeness, centerline.
    #[wasm_bindgen(js_name = voiSlice)]
    pub fn voi_slice(&self, kind: &str, depth: f64) -> Result<Frame, JsError> {
        let k = demo::SliceKind::parse(kind).map_err(js_err)?;
        self.0.voi_slice(k, depth).map(Frame::from).map_err(js_err)
    }
}
