//! C interface to `tdrguard`.
//!
//! Objects cross the boundary as opaque handles created by `*_parse`,
//! `tdr_simulate`, `tdr_calibrate` and friends, and released with the
//! matching `*_free`. Every fallible call returns a [`TdrStatus`]; on failure
//! `tdr_last_error_message` describes what went wrong on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tdrguard::detector::{self, CalibrationConfig, ReferenceModel, ThresholdPolicy};
use tdrguard::sim::{self, MeasurementSeries, PulseSpec, SimConfig, Waveform};
use tdrguard::topology::{self, NodeLoad, Topology};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TdrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Simulation = 4,
    Detection = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TdrThresholdKind {
    Fixed = 0,
    BaselineMaxPlus = 1,
}

/// Detector settings; start from `tdr_detector_options_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdrDetectorOptions {
    pub n_reference: usize,
    pub n_average: usize,
    /// A `TdrThresholdKind` value.
    pub threshold_kind: u32,
    /// Fixed threshold or margin above the largest baseline score.
    pub threshold_value: f64,
    /// Propagation velocity for localisation, m/s.
    pub velocity: f64,
}

/// Outcome of `tdr_detect` for the newest batch of captures.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdrDetection {
    pub timestamp: usize,
    pub k_score: f64,
    pub threshold: f64,
    pub mse: f64,
    pub xcorr: f64,
    pub rqcc: f64,
    pub alien_present: bool,
    pub contaminated: bool,
    /// When false, `distance_m` and `onset_s` are NaN.
    pub has_distance: bool,
    pub distance_m: f64,
    pub onset_s: f64,
    pub window_origin: usize,
}

pub struct TdrTopology(Topology);
pub struct TdrSeries(MeasurementSeries);
pub struct TdrModel(ReferenceModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

type Failure = (TdrStatus, String);

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn call(f: impl FnOnce() -> Result<(), Failure>) -> TdrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TdrStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            TdrStatus::Panic
        }
    }
}

fn fail<E: std::fmt::Display>(status: TdrStatus) -> impl Fn(E) -> Failure {
    move |e| (status, e.to_string())
}

unsafe fn reference<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or((TdrStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or((TdrStatus::NullPointer, format!("{name} is null")))
}

unsafe fn c_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err((TdrStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (TdrStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tdr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tdr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a topology description.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn tdr_topology_parse(text: *const c_char, out: *mut *mut TdrTopology) -> TdrStatus {
    call(|| {
        let out = out_ptr(out, "out")?;
        let t = topology::parse_topology(c_str(text, "text")?).map_err(fail(TdrStatus::Parse))?;
        *out = boxed(TdrTopology(t));
        Ok(())
    })
}

/// # Safety
/// `topology` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn tdr_topology_free(topology: *mut TdrTopology) {
    if !topology.is_null() {
        drop(Box::from_raw(topology));
    }
}

/// DC resistance of all loads in parallel, ohms.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn tdr_topology_total_resistance(topology: *const TdrTopology, out: *mut f64) -> TdrStatus {
    call(|| {
        let t = reference(topology, "topology")?;
        let out = out_ptr(out, "out")?;
        *out = topology::total_bus_resistance(&t.0).map_err(fail(TdrStatus::InvalidArgument))?;
        Ok(())
    })
}

/// New topology with a transceiver attached at `position` through a stub
/// of `stub_length` metres.
///
/// # Safety
/// Pointers must be valid; `label` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn tdr_topology_attach_transceiver(
    topology: *const TdrTopology,
    position: f64,
    stub_length: f64,
    label: *const c_char,
    out: *mut *mut TdrTopology,
) -> TdrStatus {
    call(|| {
        let t = reference(topology, "topology")?;
        let out = out_ptr(out, "out")?;
        let next = t
            .0
            .attach_device(position, stub_length, NodeLoad::transceiver(), c_str(label, "label")?)
            .map_err(fail(TdrStatus::InvalidArgument))?;
        *out = boxed(TdrTopology(next));
        Ok(())
    })
}

/// New topology with the labelled device unplugged; its stub stays open.
///
/// # Safety
/// Pointers must be valid; `label` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn tdr_topology_detach(
    topology: *const TdrTopology,
    label: *const c_char,
    out: *mut *mut TdrTopology,
) -> TdrStatus {
    call(|| {
        let t = reference(topology, "topology")?;
        let out = out_ptr(out, "out")?;
        let next = t.0.detach_device(c_str(label, "label")?).map_err(fail(TdrStatus::InvalidArgument))?;
        *out = boxed(TdrTopology(next));
        Ok(())
    })
}

/// Record length `tdr_simulate` uses for `topology` when given a
/// non-positive duration, seconds from the capture start.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn tdr_default_duration(topology: *const TdrTopology, out: *mut f64) -> TdrStatus {
    call(|| {
        let t = &reference(topology, "topology")?.0;
        *out_ptr(out, "out")? = SimConfig::for_topology(t, &PulseSpec::for_topology(t)).duration;
        Ok(())
    })
}

/// Simulates `n_captures` captures with the default 3 ns pulse and 1 cm
/// grid. Capture `i` carries noise seeded from `(seed, first_index + i)`, so
/// a stream can be produced in pieces. Captures of a modified bus only share
/// the grid of the original when both use the same `duration`; a
/// non-positive value picks the topology default.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn tdr_simulate(
    topology: *const TdrTopology,
    duration: f64,
    noise_sigma: f64,
    seed: u64,
    first_index: usize,
    n_captures: usize,
    out: *mut *mut TdrSeries,
) -> TdrStatus {
    call(|| {
        let t = &reference(topology, "topology")?.0;
        let out = out_ptr(out, "out")?;
        if n_captures == 0 {
            return Err((TdrStatus::InvalidArgument, "n_captures must be at least 1".into()));
        }
        let pulse = PulseSpec::for_topology(t);
        let mut config = SimConfig::for_topology(t, &pulse);
        if duration > 0.0 {
            config.duration = duration;
        }
        let base = sim::simulate_tdr(t, &pulse, &config).map_err(fail(TdrStatus::Simulation))?;
        let series = sim::noisy_series_from(&base, noise_sigma, seed, first_index..first_index + n_captures)
            .map_err(fail(TdrStatus::InvalidArgument))?;
        *out = boxed(TdrSeries(series));
        Ok(())
    })
}

/// Wraps `n_captures * n_samples` values, capture-major, as a series.
/// `t0` is the injection instant after the first sample, `dt` the step.
///
/// # Safety
/// `samples` must point to `n_captures * n_samples` doubles.
#[no_mangle]
pub unsafe extern "C" fn tdr_series_from_samples(
    samples: *const f64,
    n_captures: usize,
    n_samples: usize,
    t0: f64,
    dt: f64,
    out: *mut *mut TdrSeries,
) -> TdrStatus {
    call(|| {
        let out = out_ptr(out, "out")?;
        if samples.is_null() {
            return Err((TdrStatus::NullPointer, "samples is null".into()));
        }
        let total = n_captures
            .checked_mul(n_samples)
            .ok_or((TdrStatus::InvalidArgument, "size overflow".to_string()))?;
        if total == 0 {
            return Err((TdrStatus::InvalidArgument, "series is empty".into()));
        }
        let data = std::slice::from_raw_parts(samples, total);
        let captures = data
            .chunks(n_samples)
            .map(|c| Waveform::new(t0, dt, c.to_vec()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(fail(TdrStatus::InvalidArgument))?;
        *out = boxed(TdrSeries(
            MeasurementSeries::new(captures).map_err(fail(TdrStatus::InvalidArgument))?,
        ));
        Ok(())
    })
}

/// Captures of `first` followed by those of `second`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn tdr_series_concat(
    first: *const TdrSeries,
    second: *const TdrSeries,
    out: *mut *mut TdrSeries,
) -> TdrStatus {
    call(|| {
        let a = reference(first, "first")?;
        let b = reference(second, "second")?;
        let out = out_ptr(out, "out")?;
        *out = boxed(TdrSeries(a.0.concat(&b.0).map_err(fail(TdrStatus::InvalidArgument))?));
        Ok(())
    })
}

/// Number of captures, 0 for NULL.
///
/// # Safety
/// `series` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn tdr_series_len(series: *const TdrSeries) -> usize {
    series.as_ref().map_or(0, |s| s.0.len())
}

/// Borrows the samples of one capture. The data lives as long as `series`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn tdr_series_capture(
    series: *const TdrSeries,
    index: usize,
    samples: *mut *const f64,
    len: *mut usize,
) -> TdrStatus {
    call(|| {
        let s = reference(series, "series")?;
        let samples = out_ptr(samples, "samples")?;
        let len = out_ptr(len, "len")?;
        let w = s.0.captures().get(index).ok_or_else(|| {
            (
                TdrStatus::InvalidArgument,
                format!("capture {index} out of range for {} captures", s.0.len()),
            )
        })?;
        *samples = w.samples().as_ptr();
        *len = w.len();
        Ok(())
    })
}

/// # Safety
/// `series` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn tdr_series_free(series: *mut TdrSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

/// 300 reference captures, batches of 30, threshold 0.01 above the largest
/// baseline score, velocity 2e8 m/s.
#[no_mangle]
pub extern "C" fn tdr_detector_options_default() -> TdrDetectorOptions {
    let c = CalibrationConfig::default();
    let (threshold_kind, threshold_value) = match c.threshold_policy {
        ThresholdPolicy::Fixed(v) => (TdrThresholdKind::Fixed, v),
        ThresholdPolicy::BaselineMaxPlus(m) => (TdrThresholdKind::BaselineMaxPlus, m),
    };
    TdrDetectorOptions {
        n_reference: c.n_reference,
        n_average: c.n_average,
        threshold_kind: threshold_kind as u32,
        threshold_value,
        velocity: c.velocity,
    }
}

unsafe fn config(options: *const TdrDetectorOptions) -> Result<CalibrationConfig, Failure> {
    let mut c = CalibrationConfig::default();
    if let Some(o) = options.as_ref() {
        c.n_reference = o.n_reference;
        c.n_average = o.n_average;
        c.velocity = o.velocity;
        c.threshold_policy = match o.threshold_kind {
            k if k == TdrThresholdKind::Fixed as u32 => ThresholdPolicy::Fixed(o.threshold_value),
            k if k == TdrThresholdKind::BaselineMaxPlus as u32 => ThresholdPolicy::BaselineMaxPlus(o.threshold_value),
            k => return Err((TdrStatus::InvalidArgument, format!("unknown threshold kind {k}"))),
        };
    }
    Ok(c)
}

/// Builds a reference model. `options` may be NULL for the defaults.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn tdr_calibrate(
    series: *const TdrSeries,
    options: *const TdrDetectorOptions,
    out: *mut *mut TdrModel,
) -> TdrStatus {
    call(|| {
        let s = reference(series, "series")?;
        let out = out_ptr(out, "out")?;
        let model = detector::calibrate(&s.0, &config(options)?).map_err(fail(TdrStatus::Detection))?;
        *out = boxed(TdrModel(model));
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn tdr_model_threshold(model: *const TdrModel, out: *mut f64) -> TdrStatus {
    call(|| {
        *out_ptr(out, "out")? = reference(model, "model")?.0.threshold;
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn tdr_model_noise_sigma(model: *const TdrModel, out: *mut f64) -> TdrStatus {
    call(|| {
        *out_ptr(out, "out")? = reference(model, "model")?.0.noise_sigma_estimate;
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn tdr_model_free(model: *mut TdrModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Scores the newest `n_average` captures of `series` against `model`.
/// `options` may be NULL for the defaults. The model is not modified.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn tdr_detect(
    model: *const TdrModel,
    series: *const TdrSeries,
    options: *const TdrDetectorOptions,
    out: *mut TdrDetection,
) -> TdrStatus {
    call(|| {
        let m = reference(model, "model")?;
        let s = reference(series, "series")?;
        let out = out_ptr(out, "out")?;
        let r = detector::detect(&m.0, &s.0, &config(options)?).map_err(fail(TdrStatus::Detection))?;
        *out = TdrDetection {
            timestamp: r.timestamp,
            k_score: r.scores.coherence_k,
            threshold: r.threshold,
            mse: r.scores.mse,
            xcorr: r.scores.xcorr,
            rqcc: r.scores.rqcc,
            alien_present: r.alien_present,
            contaminated: r.contaminated,
            has_distance: r.estimated_distance.is_some(),
            distance_m: r.estimated_distance.unwrap_or(f64::NAN),
            onset_s: r.onset_time.unwrap_or(f64::NAN),
            window_origin: r.window_origin,
        };
        Ok(())
    })
}
