//! C ABI over the phaseprobe library.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `*_free`. Every fallible call returns a [`PpStatus`];
//! the message for the last failure on the calling thread is available from
//! [`pp_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use phaseprobe::apt::{assign_all, parse_range_file, read_epos, IonEvent, RangeTable};
use phaseprobe::pairs::{extract_double_hits, filter_homopairs, measure_pairs, DoubleHitOptions};
use phaseprobe::stats::{mann_whitney_u, UTestMethod};
use phaseprobe::transport::{fit_ra, RaFitMethod, RaPoint};
use phaseprobe::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    Io = 4,
    Format = 5,
    Analysis = 6,
    /// The output buffer is too small; the required length was written.
    BufferTooSmall = 7,
    Panic = 8,
}

/// Parsed EPOS events.
pub struct PpEvents {
    events: Vec<IonEvent>,
}

/// Parsed range table.
pub struct PpRangeTable {
    table: RangeTable,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PpUTest {
    pub u: f64,
    pub z: f64,
    pub p: f64,
    /// 1 when `p` comes from the exact null distribution.
    pub exact: u8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PpRaFit {
    pub ra_product: f64,
    pub std_error: f64,
    pub n: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PpStatus {
    match e {
        Error::Io { .. } => PpStatus::Io,
        Error::TruncatedRecord { .. }
        | Error::NonFinite { .. }
        | Error::RangeSyntax { .. }
        | Error::RangeValidation(_)
        | Error::Json(_)
        | Error::Image(_)
        | Error::Config(_) => PpStatus::Format,
        Error::InvalidInput(_) => PpStatus::InvalidInput,
        _ => PpStatus::Analysis,
    }
}

fn guard<F>(f: F) -> PpStatus
where
    F: FnOnce() -> Result<(), (PpStatus, String)>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            PpStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            PpStatus::Panic
        }
    }
}

fn lib<T>(r: phaseprobe::Result<T>) -> Result<T, (PpStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (PpStatus, String) {
    (PpStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (PpStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (PpStatus::InvalidUtf8, format!("`{what}` is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], (PpStatus, String)> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `cap`). Returns the full message length, 0 if none.
///
/// # Safety
/// `buf` must be null or valid for `cap` bytes.
#[no_mangle]
pub unsafe extern "C" fn pp_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Reads an EPOS file.
///
/// # Safety
/// `path` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pp_events_read_epos(path: *const c_char, out: *mut *mut PpEvents) -> PpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = str_arg(path, "path")?;
        let events = lib(read_epos(path))?;
        *out = Box::into_raw(Box::new(PpEvents { events }));
        Ok(())
    })
}

/// # Safety
/// `events` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pp_events_len(events: *const PpEvents) -> usize {
    events.as_ref().map_or(0, |e| e.events.len())
}

/// # Safety
/// `events` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pp_events_free(events: *mut PpEvents) {
    if !events.is_null() {
        drop(Box::from_raw(events));
    }
}

/// Parses RRNG text.
///
/// # Safety
/// `text` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pp_ranges_parse(text: *const c_char, out: *mut *mut PpRangeTable) -> PpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(text, "text")?;
        let table = lib(parse_range_file(text))?;
        *out = Box::into_raw(Box::new(PpRangeTable { table }));
        Ok(())
    })
}

/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pp_ranges_len(table: *const PpRangeTable) -> usize {
    table.as_ref().map_or(0, |t| t.table.len())
}

/// # Safety
/// `table` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pp_ranges_free(table: *mut PpRangeTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Separations (Å) of same-pulse pairs whose members both carry `tag`,
/// at `scale` Å per detector mm.
///
/// Writes up to `cap` values into `out` and the total count into `out_len`.
/// Returns `BufferTooSmall` when `cap < *out_len`; call again with a larger
/// buffer (or with `cap = 0` to query the size).
///
/// # Safety
/// Handles must be live, `tag` a valid C string, `out` valid for `cap`
/// values and `out_len` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pp_homopair_separations(
    events: *const PpEvents,
    table: *const PpRangeTable,
    tag: *const c_char,
    scale: f64,
    out: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> PpStatus {
    guard(|| {
        let events = &events.as_ref().ok_or_else(|| null("events"))?.events;
        let table = &table.as_ref().ok_or_else(|| null("table"))?.table;
        let tag = str_arg(tag, "tag")?;
        if out_len.is_null() {
            return Err(null("out_len"));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err((PpStatus::InvalidInput, format!("scale must be positive, got {scale}")));
        }
        if table.index_of_tag(tag).is_none() {
            return Err((PpStatus::InvalidInput, format!("tag `{tag}` is not in the range table")));
        }
        let species = assign_all(events, table);
        let ex = extract_double_hits(events, DoubleHitOptions::default());
        let pairs = filter_homopairs(&measure_pairs(&ex.pairs, events, &species, scale), table, tag);
        *out_len = pairs.len();
        if cap < pairs.len() {
            return Err((
                PpStatus::BufferTooSmall,
                format!("{} separations do not fit in {cap}", pairs.len()),
            ));
        }
        if !pairs.is_empty() && out.is_null() {
            return Err(null("out"));
        }
        for (i, p) in pairs.iter().enumerate() {
            *out.add(i) = p.real_sep;
        }
        Ok(())
    })
}

/// Two-sided Mann-Whitney U test of `a` against `b`.
///
/// # Safety
/// `a` and `b` must be valid for `na` and `nb` values, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pp_mann_whitney(
    a: *const f64,
    na: usize,
    b: *const f64,
    nb: usize,
    out: *mut PpUTest,
) -> PpStatus {
    guard(|| {
        let (a, b) = (slice_arg(a, na, "a")?, slice_arg(b, nb, "b")?);
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = lib(mann_whitney_u(a, b))?;
        *out = PpUTest {
            u: r.u,
            z: r.z,
            p: r.p,
            exact: (r.method == UTestMethod::Exact) as u8,
        };
        Ok(())
    })
}

/// Least-squares R·A product (MΩ·μm²) from `n` area/resistance pairs.
///
/// # Safety
/// `areas_um2` and `resistances_mohm` must be valid for `n` values, `out` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pp_fit_ra(
    areas_um2: *const f64,
    resistances_mohm: *const f64,
    n: usize,
    out: *mut PpRaFit,
) -> PpStatus {
    guard(|| {
        let areas = slice_arg(areas_um2, n, "areas_um2")?;
        let res = slice_arg(resistances_mohm, n, "resistances_mohm")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let points: Vec<RaPoint> = areas
            .iter()
            .zip(res)
            .map(|(&area_um2, &resistance_mohm)| RaPoint {
                area_um2,
                resistance_mohm,
            })
            .collect();
        let fit = lib(fit_ra(&points, RaFitMethod::Linear))?;
        *out = PpRaFit {
            ra_product: fit.ra_product,
            std_error: fit.stderr,
            n: fit.n,
        };
        Ok(())
    })
}
