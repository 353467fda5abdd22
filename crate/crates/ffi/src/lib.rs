//! C ABI over `conecap`: opaque model and field handles, status codes and a
//! thread-local last-error message.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use conecap::capacity::{boundary_capacity, Potential};
use conecap::config::validate_config;
use conecap::geometry::{
    build_grid, make_model, DomainSpec, EndDescriptor, EndId, GridSpec, LinkSpec, ManifoldModel, WarpProfile,
};
use conecap::presets::Preset;
use conecap::radial::{radial_capacity, radial_potential};
use conecap::report::run_preset;
use conecap::solver::{solve_p_laplace, DiscreteField, SolverConfig};
use conecap::Error;

/// Status returned by every fallible entry point.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConecapStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidModel = 3,
    OutOfDomain = 4,
    SolverStall = 5,
    ExtrapolationUnreliable = 6,
    InvalidConfig = 7,
    Io = 8,
    /// Numerical diagnostics or an unusable level set or surface.
    Numerical = 9,
    Internal = 10,
    Panic = 11,
}

/// Warp profile of one end: `Cone` is `slope·ρ`, `Offset` is
/// `slope·ρ + param`, `Smoothed` is `slope·sqrt(ρ² + param²)`.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConecapWarp {
    Cone = 0,
    Offset = 1,
    Smoothed = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct ConecapEnd {
    pub warp: ConecapWarp,
    pub slope: f64,
    pub param: f64,
    /// Radius of the round link sphere.
    pub link_scale: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConecapDomainKind {
    /// `{ρ ≤ a}`.
    Coordinate = 0,
    /// Axial semi-axis `a`, equatorial semi-axis `b`.
    Ellipsoid = 1,
    /// `ρ ≤ a (1 + b cos(mode θ))`.
    Harmonic = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct ConecapDomain {
    pub kind: ConecapDomainKind,
    pub a: f64,
    pub b: f64,
    pub mode: u32,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct ConecapGrid {
    pub outer_radius: f64,
    pub radial_cells: usize,
    pub angular_cells: usize,
}

/// Opaque model handle.
pub struct ConecapModel(ManifoldModel);

/// Opaque discrete potential handle.
pub struct ConecapField(DiscreteField);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ConecapStatus {
    match e {
        Error::InvalidArgument(_) | Error::InvalidGrid(_) | Error::UnknownEnd(_) | Error::LevelOutOfRange { .. } => {
            ConecapStatus::InvalidArgument
        }
        Error::InvalidModel(_) | Error::UnsupportedTopology(_) => ConecapStatus::InvalidModel,
        Error::OutOfDomain { .. } => ConecapStatus::OutOfDomain,
        Error::SolverStall { .. } => ConecapStatus::SolverStall,
        Error::ExtrapolationUnreliable(_) => ConecapStatus::ExtrapolationUnreliable,
        Error::InvalidConfig(_) => ConecapStatus::InvalidConfig,
        Error::Io { .. } => ConecapStatus::Io,
        Error::Internal(_) => ConecapStatus::Internal,
        _ => ConecapStatus::Numerical,
    }
}

/// Runs `f`, converting errors and panics into a status and the last error.
fn guard(f: impl FnOnce() -> Result<(), (ConecapStatus, String)>) -> ConecapStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ConecapStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            ConecapStatus::Panic
        }
    }
}

fn lib(e: Error) -> (ConecapStatus, String) {
    let mut msg = e.to_string();
    if let Error::InvalidConfig(issues) = &e {
        for i in issues {
            msg.push_str(&format!("\n{i}"));
        }
    }
    (status_of(&e), msg)
}

fn null(what: &str) -> (ConecapStatus, String) {
    (ConecapStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `p` must be null or point to a valid `T`.
unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (ConecapStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

/// # Safety
/// `s` must be null or a NUL-terminated string.
unsafe fn text<'a>(s: *const c_char, what: &str) -> Result<&'a str, (ConecapStatus, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| (ConecapStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn end_id(end: u32) -> EndId {
    EndId(end as usize)
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn conecap_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn conecap_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a model with `n_ends` (1 or 2) ends.
///
/// # Safety
/// `ends` must point to `n_ends` values and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn conecap_model_new(
    dimension: u32,
    ends: *const ConecapEnd,
    n_ends: usize,
    out: *mut *mut ConecapModel,
) -> ConecapStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if ends.is_null() {
            return Err(null("ends"));
        }
        let descriptors: Vec<EndDescriptor> = std::slice::from_raw_parts(ends, n_ends)
            .iter()
            .map(|e| {
                let warp = match e.warp {
                    ConecapWarp::Cone => WarpProfile::cone(e.slope),
                    ConecapWarp::Offset => WarpProfile::offset(e.slope, e.param),
                    ConecapWarp::Smoothed => WarpProfile::smoothed(e.slope, e.param),
                };
                EndDescriptor::new(warp, LinkSpec::round(e.link_scale))
            })
            .collect();
        let m = make_model(dimension as usize, &descriptors).map_err(lib)?;
        *out = Box::into_raw(Box::new(ConecapModel(m)));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from `conecap_model_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn conecap_model_free(model: *mut ConecapModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Asymptotic volume ratio summed over the ends.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn conecap_model_avr(model: *const ConecapModel, out: *mut f64) -> ConecapStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = m.0.avr();
        Ok(())
    })
}

/// Normalized p-capacity of `{ρ ≤ rho0}` on one end, and the asymptotic
/// constant γ, from the radial oracle. Either output may be null.
///
/// # Safety
/// `model` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn conecap_radial_capacity(
    model: *const ConecapModel,
    end: u32,
    rho0: f64,
    p: f64,
    capacity: *mut f64,
    gamma: *mut f64,
) -> ConecapStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let sol = radial_potential(&m.0, end_id(end), rho0, p).map_err(lib)?;
        if let Some(c) = capacity.as_mut() {
            *c = radial_capacity(&sol);
        }
        if let Some(g) = gamma.as_mut() {
            *g = sol.gamma;
        }
        Ok(())
    })
}

/// Radial potential of `{ρ ≤ rho0}` evaluated at `rho`.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn conecap_radial_potential(
    model: *const ConecapModel,
    end: u32,
    rho0: f64,
    p: f64,
    rho: f64,
    out: *mut f64,
) -> ConecapStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let sol = radial_potential(&m.0, end_id(end), rho0, p).map_err(lib)?;
        *out = sol.u(rho).map_err(lib)?;
        Ok(())
    })
}

/// Solves the p-capacitary problem of `domain` on one end with default
/// solver settings.
///
/// # Safety
/// `model` must be a live handle, `domain` and `grid` valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn conecap_solve(
    model: *const ConecapModel,
    end: u32,
    domain: *const ConecapDomain,
    grid: *const ConecapGrid,
    p: f64,
    out: *mut *mut ConecapField,
) -> ConecapStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let m = deref(model, "model")?;
        let d = deref(domain, "domain")?;
        let g = deref(grid, "grid")?;
        let spec = match d.kind {
            ConecapDomainKind::Coordinate => DomainSpec::Coordinate { radius: d.a },
            ConecapDomainKind::Ellipsoid => DomainSpec::Ellipsoid {
                axial: d.a,
                equatorial: d.b,
            },
            ConecapDomainKind::Harmonic => DomainSpec::Harmonic {
                radius: d.a,
                amplitude: d.b,
                mode: d.mode,
            },
        };
        let cfg = SolverConfig::with_p(p);
        cfg.validate(m.0.dimension()).map_err(lib)?;
        let gs = GridSpec::new(g.outer_radius, g.radial_cells, g.angular_cells);
        let grid = Arc::new(build_grid(&m.0, end_id(end), &spec, &gs).map_err(lib)?);
        let (field, _) = solve_p_laplace(&m.0, &spec, &grid, &cfg).map_err(lib)?;
        *out = Box::into_raw(Box::new(ConecapField(field)));
        Ok(())
    })
}

/// # Safety
/// `field` must be null or a handle from `conecap_solve` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn conecap_field_free(field: *mut ConecapField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Normalized capacity of a solved field from its boundary flux.
///
/// # Safety
/// `field` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn conecap_field_capacity(field: *const ConecapField, out: *mut f64) -> ConecapStatus {
    guard(|| {
        let f = deref(field, "field")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = boundary_capacity(Potential::from(&f.0)).map_err(lib)?;
        Ok(())
    })
}

/// Number of grid nodes; rows of `angular_cells + 1` nodes, `θ` fastest.
///
/// # Safety
/// `field` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn conecap_field_node_count(field: *const ConecapField) -> usize {
    field.as_ref().map_or(0, |f| f.0.grid().num_nodes())
}

/// Copies nodal radii and potential values. Either buffer may be null;
/// non-null buffers need `len ≥ conecap_field_node_count(field)`.
///
/// # Safety
/// `field` must be a live handle and each non-null buffer hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn conecap_field_values(
    field: *const ConecapField,
    rho: *mut f64,
    u: *mut f64,
    len: usize,
) -> ConecapStatus {
    guard(|| {
        let f = deref(field, "field")?;
        let n = f.0.grid().num_nodes();
        if len < n {
            return Err((
                ConecapStatus::InvalidArgument,
                format!("buffer holds {len} values, field has {n} nodes"),
            ));
        }
        if !rho.is_null() {
            std::slice::from_raw_parts_mut(rho, n).copy_from_slice(f.0.grid().rho());
        }
        if !u.is_null() {
            std::slice::from_raw_parts_mut(u, n).copy_from_slice(f.0.values());
        }
        Ok(())
    })
}

/// Checks a TOML configuration; issues go to the last error message.
///
/// # Safety
/// `config_toml` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn conecap_validate_config(config_toml: *const c_char) -> ConecapStatus {
    guard(|| {
        validate_config(text(config_toml, "config_toml")?).map_err(lib)?;
        Ok(())
    })
}

/// Runs a preset and writes its outputs under `out_root`. `passed`
/// receives 1 when every acceptance check passed, else 0.
///
/// # Safety
/// String arguments must be NUL-terminated; `passed` may be null.
#[no_mangle]
pub unsafe extern "C" fn conecap_run_preset(
    preset: *const c_char,
    config_toml: *const c_char,
    out_root: *const c_char,
    passed: *mut i32,
) -> ConecapStatus {
    guard(|| {
        let name = text(preset, "preset")?;
        let p = Preset::from_name(name)
            .ok_or_else(|| (ConecapStatus::InvalidConfig, format!("unknown preset {name:?}")))?;
        let cfg = validate_config(text(config_toml, "config_toml")?).map_err(lib)?;
        let root = text(out_root, "out_root")?;
        let outcome = run_preset(p, &cfg, Path::new(root)).map_err(lib)?;
        if let Some(flag) = passed.as_mut() {
            *flag = i32::from(outcome.manifest.passed);
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn last() -> String {
        unsafe { CStr::from_ptr(conecap_last_error_message()) }
            .to_string_lossy()
            .into_owned()
    }

    #[test]
    fn guard_converts_panics() {
        let st = guard(|| panic!("boom"));
        assert_eq!(st, ConecapStatus::Panic);
        assert_eq!(last(), "panic: boom");
        let st = guard(|| Err(null("thing")));
        assert_eq!(st, ConecapStatus::NullPointer);
        assert_eq!(last(), "thing is null");
        assert_eq!(guard(|| Ok(())), ConecapStatus::Ok);
    }

    #[test]
    fn errors_map_to_statuses() {
        assert_eq!(status_of(&Error::InvalidModel("x".into())), ConecapStatus::InvalidModel);
        assert_eq!(
            status_of(&Error::ExtrapolationUnreliable("x".into())),
            ConecapStatus::ExtrapolationUnreliable
        );
        assert_eq!(status_of(&Error::Diagnostics("x".into())), ConecapStatus::Numerical);
        let (st, msg) = lib(Error::InvalidConfig(vec![conecap::error::ConfigIssue {
            line: Some(3),
            path: "model.dimension".into(),
            message: "bad".into(),
        }]));
        assert_eq!(st, ConecapStatus::InvalidConfig);
        assert!(msg.contains("model.dimension"), "{msg}");
    }

    #[test]
    fn interior_nul_is_replaced() {
        set_error("a\0b".into());
        assert_eq!(last(), "a b");
    }
}
